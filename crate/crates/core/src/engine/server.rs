//! A policy server speaking the wire protocol, backed by the random policy.
//! Useful as a stand-in for a learned policy and in tests.

use std::collections::BTreeSet;
use std::io::{self, BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::thread;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use crate::engine::protocol::{ClauseProposals, ProposeRequest, ProposeResponse, TrainRequest, TrainResponse, STOP_TOKEN};
use crate::engine::{Policy, PolicyRequest, Proposal, RandomPolicy};
use crate::tptp::parse_cnf;

#[derive(Debug, Default)]
struct State {
    rng: Option<ChaCha8Rng>,
    trained: BTreeSet<String>,
    train_calls: usize,
    resets: usize,
}

/// Shared state of a running server, visible to the owner.
#[derive(Debug, Clone)]
pub struct ServerHandle {
    state: Arc<Mutex<State>>,
    seed: u64,
}

impl ServerHandle {
    pub fn new(seed: u64) -> Self {
        Self { state: Arc::new(Mutex::new(State::default())), seed }
    }

    /// Every problem name received through `train` since the last reset.
    pub fn trained_problems(&self) -> BTreeSet<String> {
        self.state.lock().unwrap().trained.clone()
    }

    pub fn train_calls(&self) -> usize {
        self.state.lock().unwrap().train_calls
    }

    pub fn resets(&self) -> usize {
        self.state.lock().unwrap().resets
    }

    /// Answers one request line.
    pub fn handle_line(&self, line: &str) -> String {
        let value: Value = match serde_json::from_str(line) {
            Ok(v) => v,
            Err(e) => return error_line(0, &format!("bad request: {e}")),
        };
        let id = value.get("id").and_then(Value::as_u64).unwrap_or(0);
        match value.get("verb").and_then(Value::as_str) {
            Some("propose") => match serde_json::from_value::<ProposeRequest>(value) {
                Ok(req) => self.propose(req),
                Err(e) => error_line(id, &e.to_string()),
            },
            Some("train") => match serde_json::from_value::<TrainRequest>(value) {
                Ok(req) => {
                    let mut st = self.state.lock().unwrap();
                    st.train_calls += 1;
                    for r in &req.records {
                        st.trained.insert(r.problem.clone());
                    }
                    log::info!("train: {} records over {:?}", req.records.len(), req.problems.keys().collect::<Vec<_>>());
                    ack(id, st.train_calls)
                }
                Err(e) => error_line(id, &e.to_string()),
            },
            Some("reset") => {
                let mut st = self.state.lock().unwrap();
                st.trained.clear();
                st.rng = None;
                st.resets += 1;
                ack(id, 0)
            }
            other => error_line(id, &format!("unknown verb {other:?}")),
        }
    }

    fn propose(&self, req: ProposeRequest) -> String {
        let problem = match parse_cnf(&req.problem) {
            Ok(p) => p,
            Err(e) => return error_line(req.id, &e.to_string()),
        };
        let mut targets = Vec::new();
        for id in &req.clause_ids {
            match problem.clauses.iter().position(|c| &*c.name == id) {
                Some(i) => targets.push(i),
                None => return error_line(req.id, &format!("unknown clause {id}")),
            }
        }
        let rng = {
            let mut st = self.state.lock().unwrap();
            match req.seed {
                Some(s) => ChaCha8Rng::seed_from_u64(s),
                None => {
                    let base = self.seed;
                    let rng = st.rng.get_or_insert_with(|| ChaCha8Rng::seed_from_u64(base));
                    ChaCha8Rng::seed_from_u64(rand::Rng::gen(rng))
                }
            }
        };
        let mut policy = RandomPolicy::from_rng(rng);
        let preq = PolicyRequest {
            problem: &problem.name,
            clauses: &problem.clauses,
            signature: &problem.signature,
            level: req.level,
            samples: req.samples,
            targets: &targets,
            constants_only: req.constants_only,
        };
        let proposals = match policy.propose(&preq) {
            Ok(p) => p,
            Err(e) => return error_line(req.id, &e.to_string()),
        };
        let proposals = req
            .clause_ids
            .iter()
            .zip(proposals)
            .map(|(id, list)| ClauseProposals {
                clause_id: id.clone(),
                assignments: list
                    .into_iter()
                    .map(|p| match p {
                        Proposal::Stop => vec![STOP_TOKEN.to_string()],
                        Proposal::Assign(a) => a.names(),
                    })
                    .collect(),
            })
            .collect();
        serde_json::to_string(&ProposeResponse { id: req.id, proposals, error: None }).unwrap()
    }

    /// Serves request lines until the reader is exhausted.
    pub fn serve_stream<R: BufRead, W: Write>(&self, reader: R, mut writer: W) -> io::Result<()> {
        for line in reader.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            writeln!(writer, "{}", self.handle_line(&line))?;
            writer.flush()?;
        }
        Ok(())
    }
}

fn ack(id: u64, n: usize) -> String {
    serde_json::to_string(&TrainResponse { id, ok: true, checkpoint: Some(format!("random-{n}")), error: None }).unwrap()
}

fn error_line(id: u64, message: &str) -> String {
    serde_json::json!({ "id": id, "error": message }).to_string()
}

/// TCP front end; one thread per connection.
pub struct RandomPolicyServer {
    listener: TcpListener,
    handle: ServerHandle,
}

impl RandomPolicyServer {
    pub fn bind(addr: &str, seed: u64) -> io::Result<Self> {
        Ok(Self { listener: TcpListener::bind(addr)?, handle: ServerHandle::new(seed) })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    pub fn handle(&self) -> ServerHandle {
        self.handle.clone()
    }

    pub fn serve(self) -> io::Result<()> {
        for stream in self.listener.incoming() {
            let stream = stream?;
            let handle = self.handle.clone();
            thread::spawn(move || {
                if let Err(e) = serve_connection(&handle, stream) {
                    log::debug!("connection closed: {e}");
                }
            });
        }
        Ok(())
    }

    /// Serves on a background thread.
    pub fn spawn(self) -> ServerHandle {
        let handle = self.handle();
        thread::spawn(move || self.serve());
        handle
    }
}

fn serve_connection(handle: &ServerHandle, stream: TcpStream) -> io::Result<()> {
    let reader = BufReader::new(stream.try_clone()?);
    handle.serve_stream(reader, stream)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::protocol::Endpoint;
    use crate::engine::{two_pass_ground, ExternalPolicy, PassConfig};

    #[test]
    fn external_policy_over_tcp_grounds_fig1() {
        let server = RandomPolicyServer::bind("127.0.0.1:0", 1).unwrap();
        let addr = server.local_addr().unwrap();
        let handle = server.spawn();
        let ep = Endpoint::parse(&format!("tcp://{addr}")).unwrap();
        let mut policy = ExternalPolicy::connect(&ep).unwrap().with_seed(42);
        let p = parse_cnf("cnf(c1, axiom, ~p(f(X,Z))).\ncnf(c2, negated_conjecture, p(f(t(c,c),g(e)))).").unwrap();
        let g = two_pass_ground(&p, &mut policy, &PassConfig::external()).unwrap();
        assert!(g.clauses.iter().all(|c| c.is_ground()));
        assert!(g.max_per_input() <= 130);
        assert!(policy.take_faults().is_empty());

        let again = two_pass_ground(&p, &mut policy.clone(), &PassConfig::external()).unwrap();
        let texts = |g: &crate::engine::Grounding| g.clauses.iter().map(|c| c.formula_text()).collect::<Vec<_>>();
        assert_eq!(texts(&g), texts(&again));

        policy.train(&[], &[&p], 1).unwrap();
        assert_eq!(handle.train_calls(), 1);
        policy.reset().unwrap();
        assert_eq!(handle.resets(), 1);
    }

    #[test]
    fn unknown_verbs_and_garbage_get_errors() {
        let h = ServerHandle::new(0);
        assert!(h.handle_line("not json").contains("error"));
        assert!(h.handle_line(r#"{"id":4,"verb":"dance"}"#).contains(r#""id":4"#));
    }
}
