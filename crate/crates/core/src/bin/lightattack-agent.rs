//! Serves one bridge session on stdin/stdout.
//!
//! Usage: lightattack-agent [--stateless] [goal_seeker | scripted:<path>]

use std::io::{self, BufReader};
use std::process::ExitCode;

use lightattack::agent::{parse_script, Agent, AgentError, GoalSeeker, ScriptedAgent};
use lightattack::bridge::serve;
use lightattack::episode::EpisodeSpec;

fn main() -> ExitCode {
    let mut stateless = false;
    let mut kind = String::from("goal_seeker");
    for arg in std::env::args().skip(1) {
        match arg.as_str() {
            "--stateless" => stateless = true,
            "-h" | "--help" => {
                println!("usage: lightattack-agent [--stateless] [goal_seeker | scripted:<path>]");
                return ExitCode::SUCCESS;
            }
            other => kind = other.to_string(),
        }
    }

    let script = match kind.strip_prefix("scripted:") {
        Some(path) => match std::fs::read_to_string(path)
            .map_err(|e| e.to_string())
            .and_then(|t| parse_script(&t).map_err(|e| e.to_string()))
        {
            Ok(s) => Some(s),
            Err(e) => {
                eprintln!("lightattack-agent: {path}: {e}");
                return ExitCode::from(2);
            }
        },
        None if kind == "goal_seeker" => None,
        None => {
            eprintln!("lightattack-agent: unknown agent {kind:?}");
            return ExitCode::from(2);
        }
    };

    let make = move |_: &EpisodeSpec, radius: f64| -> Result<Box<dyn Agent>, AgentError> {
        Ok(match &script {
            Some(s) => Box::new(ScriptedAgent::new(s.clone())),
            None => Box::new(GoalSeeker::new(radius)),
        })
    };
    let stdin = io::stdin();
    match serve(BufReader::new(stdin.lock()), io::stdout().lock(), &make, stateless) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lightattack-agent: {e}");
            ExitCode::FAILURE
        }
    }
}
