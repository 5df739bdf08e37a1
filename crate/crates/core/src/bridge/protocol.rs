//! Wire format: one JSON object per line.

use serde::{Deserialize, Serialize};

use super::BridgeError;
use crate::episode::EpisodeSpec;
use crate::render::Observation;

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    Init,
    Observe,
    ActResponse,
    Peek,
    PeekResponse,
    Fork,
    Restore,
    End,
    Error,
}

impl MessageKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            MessageKind::Init => "init",
            MessageKind::Observe => "observe",
            MessageKind::ActResponse => "act_response",
            MessageKind::Peek => "peek",
            MessageKind::PeekResponse => "peek_response",
            MessageKind::Fork => "fork",
            MessageKind::Restore => "restore",
            MessageKind::End => "end",
            MessageKind::Error => "error",
        }
    }

    /// Kinds the host waits on a reply for, paired with the expected reply kind.
    pub fn reply_kind(&self) -> Option<MessageKind> {
        match self {
            MessageKind::Init => Some(MessageKind::Init),
            MessageKind::Observe => Some(MessageKind::ActResponse),
            MessageKind::Peek => Some(MessageKind::PeekResponse),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeMessage {
    pub v: u32,
    pub kind: MessageKind,
    pub session: String,
    pub seq: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub episode: Option<EpisodeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stateless: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub obs: Option<Observation>,
    /// Action text, e.g. `move_ahead 0.25`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl BridgeMessage {
    pub fn new(kind: MessageKind, session: impl Into<String>, seq: u64) -> Self {
        Self {
            v: PROTOCOL_VERSION,
            kind,
            session: session.into(),
            seq,
            episode: None,
            goal_radius: None,
            stateless: None,
            obs: None,
            action: None,
            error: None,
        }
    }

    pub fn to_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("bridge messages always serialize");
        s.push('\n');
        s
    }

    /// Parses one line, checking the protocol version before anything else.
    pub fn parse(line: &str) -> Result<Self, BridgeError> {
        let value: serde_json::Value = serde_json::from_str(line.trim_end_matches(['\n', '\r']))
            .map_err(|e| BridgeError::Malformed(format!("{e}: {line:?}")))?;
        match value.get("v").and_then(serde_json::Value::as_u64) {
            Some(v) if v == u64::from(PROTOCOL_VERSION) => {}
            Some(v) => {
                return Err(BridgeError::VersionMismatch {
                    expected: PROTOCOL_VERSION,
                    got: v,
                })
            }
            None => return Err(BridgeError::Malformed(format!("missing version field: {line:?}"))),
        }
        serde_json::from_value(value).map_err(|e| BridgeError::Malformed(format!("{e}: {line:?}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_shape() {
        let mut m = BridgeMessage::new(MessageKind::ActResponse, "s#1", 4);
        m.action = Some("stop".into());
        assert_eq!(
            m.to_line(),
            "{\"v\":1,\"kind\":\"act_response\",\"session\":\"s#1\",\"seq\":4,\"action\":\"stop\"}\n"
        );
        assert_eq!(BridgeMessage::parse(&m.to_line()).unwrap(), m);
    }

    #[test]
    fn parse_errors_are_distinct() {
        assert!(matches!(
            BridgeMessage::parse("not json"),
            Err(BridgeError::Malformed(_))
        ));
        assert!(matches!(
            BridgeMessage::parse(r#"{"v":2,"kind":"end","session":"a","seq":1}"#),
            Err(BridgeError::VersionMismatch { got: 2, .. })
        ));
        assert!(matches!(
            BridgeMessage::parse(r#"{"v":1,"kind":"dance","session":"a","seq":1}"#),
            Err(BridgeError::Malformed(_))
        ));
        assert!(matches!(
            BridgeMessage::parse(r#"{"kind":"end","session":"a","seq":1}"#),
            Err(BridgeError::Malformed(_))
        ));
    }
}
