//! Remote side: serves one session of any in-process [`Agent`] over a line stream.

use std::io::{BufRead, Write};

use super::protocol::{BridgeMessage, MessageKind};
use super::BridgeError;
use crate::agent::{Agent, AgentError};
use crate::episode::EpisodeSpec;

/// Builds the served agent from the `init` payload: episode spec and goal radius.
pub type AgentMaker<'a> = dyn Fn(&EpisodeSpec, f64) -> Result<Box<dyn Agent>, AgentError> + 'a;

struct Session {
    id: String,
    last_seq: u64,
    spec: EpisodeSpec,
    committed: Box<dyn Agent>,
    snapshots: Vec<Box<dyn Agent>>,
}

/// Answers requests until `end`. On any protocol violation an `error` message
/// is written before the error is returned.
pub fn serve<R: BufRead, W: Write>(
    input: R,
    mut output: W,
    make: &AgentMaker<'_>,
    stateless: bool,
) -> Result<(), BridgeError> {
    let mut session: Option<Session> = None;
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (sid, seq) = session
            .as_ref()
            .map_or((String::new(), 0), |s| (s.id.clone(), s.last_seq));
        let result = BridgeMessage::parse(&line).and_then(|msg| handle(&mut session, msg, make, stateless));
        match result {
            Ok(Some(reply)) => {
                output.write_all(reply.to_line().as_bytes())?;
                output.flush()?;
            }
            Ok(None) => {
                if session.is_none() {
                    return Ok(());
                }
            }
            Err(e) => {
                let mut msg = BridgeMessage::new(MessageKind::Error, sid, seq);
                msg.error = Some(e.to_string());
                output.write_all(msg.to_line().as_bytes())?;
                output.flush()?;
                return Err(e);
            }
        }
    }
    Err(BridgeError::Closed)
}

fn handle(
    session: &mut Option<Session>,
    msg: BridgeMessage,
    make: &AgentMaker<'_>,
    stateless: bool,
) -> Result<Option<BridgeMessage>, BridgeError> {
    if msg.kind == MessageKind::Init {
        if session.is_some() {
            return Err(BridgeError::Malformed("second init in one session".into()));
        }
        let spec = msg
            .episode
            .ok_or_else(|| BridgeError::Malformed("init without episode".into()))?;
        let radius = msg
            .goal_radius
            .ok_or_else(|| BridgeError::Malformed("init without goal_radius".into()))?;
        let committed = make(&spec, radius).map_err(|e| BridgeError::Remote(e.to_string()))?;
        let mut reply = BridgeMessage::new(MessageKind::Init, msg.session.clone(), msg.seq);
        reply.stateless = Some(stateless);
        *session = Some(Session {
            id: msg.session,
            last_seq: msg.seq,
            spec,
            committed,
            snapshots: Vec::new(),
        });
        return Ok(Some(reply));
    }

    let s = session
        .as_mut()
        .ok_or_else(|| BridgeError::Malformed(format!("{} before init", msg.kind.as_str())))?;
    if msg.session != s.id {
        return Err(BridgeError::SessionMismatch {
            expected: s.id.clone(),
            got: msg.session,
        });
    }
    if msg.seq <= s.last_seq {
        return Err(BridgeError::SequenceMismatch {
            expected: s.last_seq + 1,
            got: msg.seq,
        });
    }
    s.last_seq = msg.seq;

    let remote = |e: AgentError| BridgeError::Remote(e.to_string());
    let reply_kind = match msg.kind {
        MessageKind::Observe => MessageKind::ActResponse,
        MessageKind::Peek => MessageKind::PeekResponse,
        MessageKind::Fork => {
            s.snapshots.push(s.committed.fork().map_err(remote)?);
            return Ok(None);
        }
        MessageKind::Restore => {
            s.committed = s
                .snapshots
                .pop()
                .ok_or_else(|| BridgeError::Malformed("restore without fork".into()))?;
            return Ok(None);
        }
        MessageKind::End => {
            *session = None;
            return Ok(None);
        }
        other => {
            return Err(BridgeError::UnexpectedKind {
                expected: "observe, peek, fork, restore or end",
                got: other.as_str(),
            })
        }
    };
    let obs = msg
        .obs
        .ok_or_else(|| BridgeError::Malformed(format!("{} without obs", msg.kind.as_str())))?;
    let action = if reply_kind == MessageKind::ActResponse {
        s.committed.act(&obs, &s.spec)
    } else {
        s.committed.peek(&obs, &s.spec)
    }
    .map_err(remote)?;
    let mut reply = BridgeMessage::new(reply_kind, msg.session, msg.seq);
    reply.action = Some(action.to_string());
    Ok(Some(reply))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::{GoalSeeker, ScriptedAgent};
    use crate::scene::Action;

    fn seeker(_: &EpisodeSpec, r: f64) -> Result<Box<dyn Agent>, AgentError> {
        Ok(Box::new(GoalSeeker::new(r)))
    }

    fn run(input: &str, make: &AgentMaker<'_>) -> (Result<(), BridgeError>, String) {
        let mut out = Vec::new();
        let r = serve(input.as_bytes(), &mut out, make, false);
        (r, String::from_utf8(out).unwrap())
    }

    const INIT: &str = r#"{"v":1,"kind":"init","session":"a#0","seq":1,"episode":{"scene_id":"a","instruction":"go","max_steps":5,"seed":0},"goal_radius":0.3}"#;

    #[test]
    fn end_terminates_cleanly() {
        let input = format!("{INIT}\n{{\"v\":1,\"kind\":\"end\",\"session\":\"a#0\",\"seq\":2}}\n");
        let (r, out) = run(&input, &seeker);
        r.unwrap();
        assert_eq!(
            out,
            "{\"v\":1,\"kind\":\"init\",\"session\":\"a#0\",\"seq\":1,\"stateless\":false}\n"
        );
    }

    #[test]
    fn restore_rolls_back_commits() {
        let make = |_: &EpisodeSpec, _: f64| -> Result<Box<dyn Agent>, AgentError> {
            Ok(Box::new(ScriptedAgent::new(vec![
                Action::rotate_left(),
                Action::move_ahead(),
            ])))
        };
        let obs = r#""obs":{"luminance":1.0,"perceived_goal_bearing":null,"perceived_goal_distance":null,"obstacle_rays":[],"timestep":1}"#;
        let input = format!(
            "{INIT}\n\
             {{\"v\":1,\"kind\":\"fork\",\"session\":\"a#0\",\"seq\":2}}\n\
             {{\"v\":1,\"kind\":\"observe\",\"session\":\"a#0\",\"seq\":3,{obs}}}\n\
             {{\"v\":1,\"kind\":\"restore\",\"session\":\"a#0\",\"seq\":4}}\n\
             {{\"v\":1,\"kind\":\"observe\",\"session\":\"a#0\",\"seq\":5,{obs}}}\n\
             {{\"v\":1,\"kind\":\"end\",\"session\":\"a#0\",\"seq\":6}}\n"
        );
        let (r, out) = run(&input, &make);
        r.unwrap();
        let replies: Vec<_> = out.lines().map(|l| BridgeMessage::parse(l).unwrap()).collect();
        assert_eq!(replies[1].action.as_deref(), Some("rotate_left 0.5235987755982988"));
        assert_eq!(replies[2].action, replies[1].action);
    }

    #[test]
    fn stale_sequence_is_rejected() {
        let input = format!("{INIT}\n{{\"v\":1,\"kind\":\"fork\",\"session\":\"a#0\",\"seq\":1}}\n");
        let (r, out) = run(&input, &seeker);
        assert!(matches!(r, Err(BridgeError::SequenceMismatch { expected: 2, got: 1 })));
        assert!(out.lines().last().unwrap().contains("\"kind\":\"error\""));
    }

    #[test]
    fn unknown_kind_is_an_error() {
        let (r, out) = run("{\"v\":1,\"kind\":\"jump\",\"session\":\"a\",\"seq\":1}\n", &seeker);
        assert!(matches!(r, Err(BridgeError::Malformed(_))));
        assert!(out.contains("\"kind\":\"error\""));
    }

    #[test]
    fn eof_without_end_is_an_error() {
        let (r, _) = run(&format!("{INIT}\n"), &seeker);
        assert!(matches!(r, Err(BridgeError::Closed)));
    }
}
