//! Host side: transports, sessions and the [`Agent`] adapter.

use std::io::{self, BufRead, BufReader, Read, Write};
use std::net::TcpStream;
#[cfg(unix)]
use std::os::unix::net::UnixStream;
use std::path::PathBuf;
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use super::protocol::{BridgeMessage, MessageKind};
use super::BridgeError;
use crate::agent::{Agent, AgentError, AgentFactory};
use crate::episode::EpisodeSpec;
use crate::render::Observation;
use crate::scene::{Action, Scene};

/// Where the remote agent lives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Endpoint {
    /// Program and arguments, spoken to over stdin/stdout.
    Command(Vec<String>),
    Tcp(String),
    Unix(PathBuf),
}

impl Endpoint {
    /// `tcp://host:port`, `unix://<path>`, or otherwise a whitespace-separated command line.
    pub fn parse(s: &str) -> Result<Self, BridgeError> {
        if let Some(addr) = s.strip_prefix("tcp://") {
            return Ok(Endpoint::Tcp(addr.to_string()));
        }
        if let Some(path) = s.strip_prefix("unix://") {
            return Ok(Endpoint::Unix(PathBuf::from(path)));
        }
        let argv: Vec<String> = s.split_whitespace().map(str::to_string).collect();
        if argv.is_empty() {
            return Err(BridgeError::Endpoint(format!("empty endpoint {s:?}")));
        }
        Ok(Endpoint::Command(argv))
    }
}

/// A line-oriented duplex channel. Incoming lines are read on a helper thread
/// so that every receive can time out.
pub struct Connection {
    writer: Option<Box<dyn Write + Send>>,
    lines: Receiver<io::Result<String>>,
    child: Option<Child>,
    timeout: Duration,
}

impl Connection {
    pub fn from_io<R, W>(reader: R, writer: W, timeout: Duration) -> Self
    where
        R: Read + Send + 'static,
        W: Write + Send + 'static,
    {
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            let mut reader = BufReader::new(reader);
            loop {
                let mut line = String::new();
                match reader.read_line(&mut line) {
                    Ok(0) => break,
                    Ok(_) => {
                        if tx.send(Ok(line)).is_err() {
                            break;
                        }
                    }
                    Err(e) => {
                        let _ = tx.send(Err(e));
                        break;
                    }
                }
            }
        });
        Self {
            writer: Some(Box::new(writer)),
            lines: rx,
            child: None,
            timeout,
        }
    }

    pub fn open(endpoint: &Endpoint, timeout: Duration) -> Result<Self, BridgeError> {
        match endpoint {
            Endpoint::Command(argv) => {
                let mut child = Command::new(&argv[0])
                    .args(&argv[1..])
                    .stdin(Stdio::piped())
                    .stdout(Stdio::piped())
                    .stderr(Stdio::inherit())
                    .spawn()
                    .map_err(|e| BridgeError::Endpoint(format!("cannot start {:?}: {e}", argv[0])))?;
                let stdin = child.stdin.take().expect("stdin is piped");
                let stdout = child.stdout.take().expect("stdout is piped");
                let mut conn = Self::from_io(stdout, stdin, timeout);
                conn.child = Some(child);
                Ok(conn)
            }
            Endpoint::Tcp(addr) => {
                let stream = TcpStream::connect(addr)?;
                stream.set_nodelay(true)?;
                Ok(Self::from_io(stream.try_clone()?, stream, timeout))
            }
            #[cfg(unix)]
            Endpoint::Unix(path) => {
                let stream = UnixStream::connect(path)?;
                Ok(Self::from_io(stream.try_clone()?, stream, timeout))
            }
            #[cfg(not(unix))]
            Endpoint::Unix(_) => Err(BridgeError::Endpoint("unix sockets are unavailable".into())),
        }
    }

    pub fn send(&mut self, msg: &BridgeMessage) -> Result<(), BridgeError> {
        let w = self.writer.as_mut().ok_or(BridgeError::Closed)?;
        w.write_all(msg.to_line().as_bytes())?;
        w.flush()?;
        Ok(())
    }

    pub fn recv(&mut self) -> Result<BridgeMessage, BridgeError> {
        match self.lines.recv_timeout(self.timeout) {
            Ok(Ok(line)) => BridgeMessage::parse(&line),
            Ok(Err(e)) => Err(e.into()),
            Err(RecvTimeoutError::Timeout) => Err(BridgeError::Timeout(self.timeout)),
            Err(RecvTimeoutError::Disconnected) => Err(BridgeError::Closed),
        }
    }
}

impl Drop for Connection {
    fn drop(&mut self) {
        // closing stdin lets a well-behaved child exit on its own
        self.writer.take();
        if let Some(mut child) = self.child.take() {
            let deadline = Instant::now() + Duration::from_secs(1);
            while Instant::now() < deadline {
                if let Ok(Some(_)) = child.try_wait() {
                    return;
                }
                thread::sleep(Duration::from_millis(5));
            }
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

/// An agent living on the other side of a [`Connection`]; one session per episode.
pub struct BridgeAgent {
    conn: Connection,
    session: String,
    seq: u64,
    stateless: bool,
    stopped: bool,
    ended: bool,
}

impl BridgeAgent {
    /// Sends `init` and waits for the remote to accept the session.
    pub fn open(conn: Connection, spec: &EpisodeSpec, goal_radius: f64) -> Result<Self, BridgeError> {
        let mut agent = Self {
            conn,
            session: format!("{}#{}", spec.scene_id, spec.seed),
            seq: 0,
            stateless: false,
            stopped: false,
            ended: false,
        };
        let mut init = agent.next(MessageKind::Init);
        init.episode = Some(spec.clone());
        init.goal_radius = Some(goal_radius);
        let reply = agent.exchange(init)?;
        agent.stateless = reply.stateless.unwrap_or(false);
        Ok(agent)
    }

    pub fn session(&self) -> &str {
        &self.session
    }

    pub fn is_stateless(&self) -> bool {
        self.stateless
    }

    fn next(&mut self, kind: MessageKind) -> BridgeMessage {
        self.seq += 1;
        BridgeMessage::new(kind, self.session.clone(), self.seq)
    }

    fn exchange(&mut self, msg: BridgeMessage) -> Result<BridgeMessage, BridgeError> {
        self.conn.send(&msg)?;
        let Some(expected) = msg.kind.reply_kind() else {
            unreachable!("exchange is only used for request kinds");
        };
        let reply = self.conn.recv()?;
        if reply.kind == MessageKind::Error {
            return Err(BridgeError::Remote(reply.error.unwrap_or_default()));
        }
        if reply.session != self.session {
            return Err(BridgeError::SessionMismatch {
                expected: self.session.clone(),
                got: reply.session,
            });
        }
        if reply.seq != msg.seq {
            return Err(BridgeError::SequenceMismatch {
                expected: msg.seq,
                got: reply.seq,
            });
        }
        if reply.kind != expected {
            return Err(BridgeError::UnexpectedKind {
                expected: expected.as_str(),
                got: reply.kind.as_str(),
            });
        }
        Ok(reply)
    }

    fn notify(&mut self, kind: MessageKind) -> Result<(), BridgeError> {
        let msg = self.next(kind);
        self.conn.send(&msg)
    }

    fn query(&mut self, kind: MessageKind, obs: &Observation) -> Result<Action, BridgeError> {
        let mut msg = self.next(kind);
        msg.obs = Some(obs.clone());
        let reply = self.exchange(msg)?;
        let text = reply
            .action
            .ok_or_else(|| BridgeError::Malformed(format!("{} without action", reply.kind.as_str())))?;
        text.parse()
            .map_err(|e| BridgeError::Malformed(format!("bad action {text:?}: {e}")))
    }

    /// Sends `end`; the remote does not reply.
    pub fn end(&mut self) -> Result<(), BridgeError> {
        if self.ended {
            return Ok(());
        }
        self.ended = true;
        self.notify(MessageKind::End)
    }
}

impl Drop for BridgeAgent {
    fn drop(&mut self) {
        let _ = self.end();
    }
}

impl Agent for BridgeAgent {
    fn act(&mut self, obs: &Observation, _spec: &EpisodeSpec) -> Result<Action, AgentError> {
        if self.stopped {
            return Err(AgentError::AlreadyStopped);
        }
        let action = self.query(MessageKind::Observe, obs)?;
        self.stopped = action.is_stop();
        Ok(action)
    }

    fn fork(&self) -> Result<Box<dyn Agent>, AgentError> {
        Err(AgentError::ForkUnsupported)
    }

    /// `fork, peek, restore` for stateful remotes; a bare `peek` for stateless ones.
    fn peek(&mut self, obs: &Observation, _spec: &EpisodeSpec) -> Result<Action, AgentError> {
        if self.stopped {
            return Err(AgentError::AlreadyStopped);
        }
        if self.stateless {
            return Ok(self.query(MessageKind::Peek, obs)?);
        }
        self.notify(MessageKind::Fork)?;
        let action = self.query(MessageKind::Peek, obs)?;
        self.notify(MessageKind::Restore)?;
        Ok(action)
    }
}

/// Opens a new connection and session for every episode.
#[derive(Debug, Clone)]
pub struct BridgeFactory {
    pub raw: String,
    pub endpoint: Endpoint,
    pub timeout: Duration,
}

impl BridgeFactory {
    pub fn new(endpoint: &str, timeout: Duration) -> Result<Self, BridgeError> {
        Ok(Self {
            raw: endpoint.to_string(),
            endpoint: Endpoint::parse(endpoint)?,
            timeout,
        })
    }
}

impl AgentFactory for BridgeFactory {
    fn name(&self) -> String {
        format!("bridge:{}", self.raw)
    }

    fn create(&self, scene: &Scene, spec: &EpisodeSpec) -> Result<Box<dyn Agent>, AgentError> {
        let conn = Connection::open(&self.endpoint, self.timeout)?;
        Ok(Box::new(BridgeAgent::open(conn, spec, scene.goal.radius)?))
    }
}
