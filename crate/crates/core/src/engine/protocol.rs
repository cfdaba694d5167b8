//! Line-delimited JSON protocol between the engine and an external policy.
//!
//! Each request is one line and gets exactly one response line. Verbs:
//!
//! * `propose`: `{id, verb, level, samples, problem, clause_ids, constants_only, seed}`
//!   answered by `{id, proposals: [{clause_id, assignments: [[symbol, ...], ...]}]}`.
//!   An assignment lists one symbol name per clause variable in first-occurrence
//!   order; the single-element assignment `["⊥stop"]` skips the clause.
//! * `train`: `{id, verb, records, problems, steps}` answered by `{id, ok, checkpoint}`.
//! * `reset`: `{id, verb}` reinitializes the model, answered like `train`.
//!
//! Any response may carry an `error` string instead.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::engine::{EngineError, Policy, PolicyRequest, Proposal};
use crate::fol::{Clause, HeadAssignment, Signature};
use crate::store::SolutionRecord;
use crate::tptp::{serialize_cnf, Problem};

/// The assignment token meaning "do not instantiate this clause".
pub const STOP_TOKEN: &str = "⊥stop";

/// Environment variable naming the default policy endpoint.
pub const ENDPOINT_ENV: &str = "GROUNDINST_POLICY_ENDPOINT";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProposeRequest {
    pub id: u64,
    pub verb: String,
    pub level: usize,
    pub samples: usize,
    pub problem: String,
    pub clause_ids: Vec<String>,
    #[serde(default)]
    pub constants_only: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClauseProposals {
    pub clause_id: String,
    pub assignments: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProposeResponse {
    pub id: u64,
    #[serde(default)]
    pub proposals: Vec<ClauseProposals>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRequest {
    pub id: u64,
    pub verb: String,
    pub records: Vec<SolutionRecord>,
    /// CNF text of every problem named in `records`.
    pub problems: BTreeMap<String, String>,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlRequest {
    pub id: u64,
    pub verb: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainResponse {
    pub id: u64,
    #[serde(default)]
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// A per-clause problem in a response; the clause is treated as Stop.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClauseFault {
    UnknownSymbol { clause: String, symbol: String },
    Arity { clause: String, expected: usize, found: usize },
    NotConstant { clause: String, symbol: String },
    Missing { clause: String },
    Truncated { clause: String, sent: usize, cap: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Endpoint {
    Tcp(String),
    /// A child process speaking the protocol on stdin/stdout.
    Exec(Vec<String>),
}

impl Endpoint {
    /// `tcp://host:port`, `host:port`, or `exec:program arg ...`.
    pub fn parse(spec: &str) -> Result<Self, EngineError> {
        if let Some(cmd) = spec.strip_prefix("exec:") {
            let argv: Vec<String> = cmd.split_whitespace().map(str::to_string).collect();
            if argv.is_empty() {
                return Err(EngineError::Transport("empty exec endpoint".into()));
            }
            return Ok(Endpoint::Exec(argv));
        }
        let addr = spec.strip_prefix("tcp://").unwrap_or(spec);
        if addr.contains(':') {
            Ok(Endpoint::Tcp(addr.to_string()))
        } else {
            Err(EngineError::Transport(format!("cannot parse endpoint `{spec}`")))
        }
    }

    pub fn from_env() -> Option<Self> {
        std::env::var(ENDPOINT_ENV).ok().and_then(|s| Self::parse(&s).ok())
    }
}

enum Transport {
    Tcp { reader: BufReader<TcpStream>, writer: TcpStream },
    Child { child: Child, stdin: ChildStdin, stdout: BufReader<ChildStdout> },
}

impl Transport {
    fn open(endpoint: &Endpoint, timeout: Duration) -> Result<Self, EngineError> {
        match endpoint {
            Endpoint::Tcp(addr) => {
                let stream = TcpStream::connect(addr).map_err(|e| EngineError::Transport(format!("{addr}: {e}")))?;
                stream.set_read_timeout(Some(timeout)).map_err(|e| EngineError::Transport(e.to_string()))?;
                let reader = BufReader::new(stream.try_clone().map_err(|e| EngineError::Transport(e.to_string()))?);
                Ok(Transport::Tcp { reader, writer: stream })
            }
            Endpoint::Exec(argv) => {
                let mut child = Command::new(&argv[0])
                    .args(&argv[1..])
                    .stdin(Stdio::piped())
                    .stdout(Stdio::piped())
                    .spawn()
                    .map_err(|e| EngineError::Transport(format!("{}: {e}", argv[0])))?;
                let stdin = child.stdin.take().expect("piped stdin");
                let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
                Ok(Transport::Child { child, stdin, stdout })
            }
        }
    }

    fn roundtrip(&mut self, line: &str) -> Result<String, EngineError> {
        let (writer, reader): (&mut dyn Write, &mut dyn BufRead) = match self {
            Transport::Tcp { reader, writer } => (writer, reader),
            Transport::Child { stdin, stdout, .. } => (stdin, stdout),
        };
        let io = |e: std::io::Error| match e.kind() {
            std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut => EngineError::Timeout,
            _ => EngineError::Transport(e.to_string()),
        };
        writer.write_all(line.as_bytes()).map_err(io)?;
        writer.write_all(b"\n").map_err(io)?;
        writer.flush().map_err(io)?;
        let mut response = String::new();
        if reader.read_line(&mut response).map_err(io)? == 0 {
            return Err(EngineError::Transport("connection closed".into()));
        }
        Ok(response)
    }
}

impl Drop for Transport {
    fn drop(&mut self) {
        if let Transport::Child { child, .. } = self {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

struct Connection {
    transport: Transport,
    next_id: u64,
}

/// Client side of the protocol. Clones share one connection; requests are
/// serialized on it.
#[derive(Clone)]
pub struct ExternalPolicy {
    conn: Arc<Mutex<Connection>>,
    seed: Option<u64>,
    faults: Vec<ClauseFault>,
}

impl ExternalPolicy {
    pub fn connect(endpoint: &Endpoint) -> Result<Self, EngineError> {
        Self::connect_with_timeout(endpoint, Duration::from_secs(300))
    }

    pub fn connect_with_timeout(endpoint: &Endpoint, timeout: Duration) -> Result<Self, EngineError> {
        let transport = Transport::open(endpoint, timeout)?;
        Ok(Self { conn: Arc::new(Mutex::new(Connection { transport, next_id: 1 })), seed: None, faults: Vec::new() })
    }

    /// A handle on the same connection that sends `seed` with its requests.
    pub fn with_seed(&self, seed: u64) -> Self {
        Self { conn: Arc::clone(&self.conn), seed: Some(seed), faults: Vec::new() }
    }

    /// Per-clause faults seen since the last call to [`Self::take_faults`].
    pub fn take_faults(&mut self) -> Vec<ClauseFault> {
        std::mem::take(&mut self.faults)
    }

    fn call<T: for<'de> Deserialize<'de>>(&self, build: impl FnOnce(u64) -> String) -> Result<(u64, T), EngineError> {
        let mut conn = self.conn.lock().map_err(|_| EngineError::Transport("connection poisoned".into()))?;
        let id = conn.next_id;
        conn.next_id += 1;
        let line = build(id);
        let response = conn.transport.roundtrip(&line)?;
        let parsed = serde_json::from_str(&response).map_err(|e| EngineError::Malformed(e.to_string()))?;
        Ok((id, parsed))
    }

    pub fn train(&self, records: &[SolutionRecord], problems: &[&Problem], steps: usize) -> Result<TrainResponse, EngineError> {
        let problems = problems.iter().map(|p| (p.name.clone(), serialize_cnf(p))).collect();
        let (id, resp): (u64, TrainResponse) = self.call(|id| {
            serde_json::to_string(&TrainRequest { id, verb: "train".into(), records: records.to_vec(), problems, steps })
                .expect("train requests serialize")
        })?;
        check_ack(id, resp)
    }

    pub fn reset(&self) -> Result<TrainResponse, EngineError> {
        let (id, resp): (u64, TrainResponse) = self.call(|id| {
            serde_json::to_string(&ControlRequest { id, verb: "reset".into() }).expect("control requests serialize")
        })?;
        check_ack(id, resp)
    }
}

fn check_ack(id: u64, resp: TrainResponse) -> Result<TrainResponse, EngineError> {
    if resp.id != id {
        return Err(EngineError::Malformed(format!("response id {} for request {id}", resp.id)));
    }
    if let Some(e) = &resp.error {
        return Err(EngineError::Malformed(e.clone()));
    }
    Ok(resp)
}

/// Serializes the clause set of a request as CNF text.
pub fn request_problem_text(req: &PolicyRequest<'_>) -> String {
    let problem = Problem {
        name: req.problem.to_string(),
        family: crate::tptp::family_of(req.problem).to_string(),
        clauses: req.clauses.to_vec(),
        signature: req.signature.clone(),
    };
    serialize_cnf(&problem)
}

impl Policy for ExternalPolicy {
    fn propose(&mut self, req: &PolicyRequest<'_>) -> Result<Vec<Vec<Proposal>>, EngineError> {
        let clause_ids: Vec<String> = req.targets.iter().map(|&i| req.clauses[i].name.to_string()).collect();
        let problem = request_problem_text(req);
        let seed = self.seed;
        let (id, resp): (u64, ProposeResponse) = self.call(|id| {
            serde_json::to_string(&ProposeRequest {
                id,
                verb: "propose".into(),
                level: req.level,
                samples: req.samples,
                problem,
                clause_ids,
                constants_only: req.constants_only,
                seed,
            })
            .expect("propose requests serialize")
        })?;
        if resp.id != id {
            return Err(EngineError::Malformed(format!("response id {} for request {id}", resp.id)));
        }
        if let Some(e) = resp.error {
            return Err(EngineError::Malformed(e));
        }
        let (out, faults) = validate_response(req, resp.proposals);
        for f in &faults {
            log::warn!("policy response: {f:?}");
        }
        self.faults.extend(faults);
        Ok(out)
    }
}

/// Converts wire proposals into engine proposals, one list per target.
/// A clause with any invalid assignment becomes a single Stop.
pub fn validate_response(req: &PolicyRequest<'_>, proposals: Vec<ClauseProposals>) -> (Vec<Vec<Proposal>>, Vec<ClauseFault>) {
    let mut by_id: HashMap<String, Vec<Vec<String>>> = HashMap::new();
    for p in proposals {
        by_id.entry(p.clause_id).or_default().extend(p.assignments);
    }
    let mut faults = Vec::new();
    let out = req
        .targets
        .iter()
        .map(|&i| {
            let clause = &req.clauses[i];
            let name = clause.name.to_string();
            let Some(mut assignments) = by_id.remove(&name) else {
                faults.push(ClauseFault::Missing { clause: name });
                return vec![Proposal::Stop];
            };
            if assignments.len() > req.samples {
                faults.push(ClauseFault::Truncated { clause: name.clone(), sent: assignments.len(), cap: req.samples });
                assignments.truncate(req.samples);
            }
            match convert(clause, req.signature, req.constants_only, assignments) {
                Ok(list) => list,
                Err(fault) => {
                    faults.push(fault);
                    vec![Proposal::Stop]
                }
            }
        })
        .collect();
    (out, faults)
}

fn convert(
    clause: &Clause,
    signature: &Signature,
    constants_only: bool,
    assignments: Vec<Vec<String>>,
) -> Result<Vec<Proposal>, ClauseFault> {
    let n = clause.variables_in_order().len();
    let name = || clause.name.to_string();
    assignments
        .into_iter()
        .map(|a| {
            if a.len() == 1 && a[0] == STOP_TOKEN {
                return Ok(Proposal::Stop);
            }
            if a.len() != n {
                return Err(ClauseFault::Arity { clause: name(), expected: n, found: a.len() });
            }
            let heads = a
                .iter()
                .map(|s| {
                    let sym = signature
                        .function(s)
                        .ok_or_else(|| ClauseFault::UnknownSymbol { clause: name(), symbol: s.clone() })?;
                    if constants_only && !sym.is_constant() {
                        return Err(ClauseFault::NotConstant { clause: name(), symbol: s.clone() });
                    }
                    Ok(sym.clone())
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Proposal::Assign(HeadAssignment::new(heads)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tptp::parse_cnf;

    fn request<'a>(p: &'a Problem, targets: &'a [usize], samples: usize) -> PolicyRequest<'a> {
        PolicyRequest {
            problem: &p.name,
            clauses: &p.clauses,
            signature: &p.signature,
            level: 0,
            samples,
            targets,
            constants_only: false,
        }
    }

    fn fig1() -> Problem {
        parse_cnf("cnf(c1, axiom, ~p(f(X,Z))).\ncnf(c3, axiom, q(Y)).\ncnf(c2, negated_conjecture, p(f(t(c,c),g(e)))).").unwrap()
    }

    fn wire(id: &str, assignments: &[&[&str]]) -> ClauseProposals {
        ClauseProposals {
            clause_id: id.into(),
            assignments: assignments.iter().map(|a| a.iter().map(|s| s.to_string()).collect()).collect(),
        }
    }

    #[test]
    fn unknown_symbol_stops_only_that_clause() {
        let p = fig1();
        let targets = [0, 1];
        let req = request(&p, &targets, 5);
        let (out, faults) = validate_response(&req, vec![wire("c1", &[&["t", "zz"]]), wire("c3", &[&["c"]])]);
        assert_eq!(out[0], vec![Proposal::Stop]);
        assert!(matches!(out[1][0], Proposal::Assign(_)));
        assert!(matches!(&faults[..], [ClauseFault::UnknownSymbol { symbol, .. }] if symbol == "zz"));
    }

    #[test]
    fn surplus_assignments_are_truncated() {
        let p = fig1();
        let targets = [1];
        let req = request(&p, &targets, 5);
        let six: Vec<&[&str]> = vec![&["c"]; 6];
        let (out, faults) = validate_response(&req, vec![wire("c3", &six)]);
        assert_eq!(out[0].len(), 5);
        assert!(matches!(faults[0], ClauseFault::Truncated { sent: 6, cap: 5, .. }));
    }

    #[test]
    fn arity_and_stop_handling() {
        let p = fig1();
        let targets = [0, 1];
        let req = request(&p, &targets, 5);
        let (out, faults) = validate_response(&req, vec![wire("c1", &[&["t"]]), wire("c3", &[&[STOP_TOKEN]])]);
        assert_eq!(out, vec![vec![Proposal::Stop], vec![Proposal::Stop]]);
        assert!(matches!(faults[0], ClauseFault::Arity { expected: 2, found: 1, .. }));
        assert_eq!(faults.len(), 1);
    }

    #[test]
    fn missing_clause_is_stop() {
        let p = fig1();
        let targets = [0];
        let req = request(&p, &targets, 5);
        let (out, faults) = validate_response(&req, vec![]);
        assert_eq!(out, vec![vec![Proposal::Stop]]);
        assert!(matches!(faults[0], ClauseFault::Missing { .. }));
    }

    #[test]
    fn endpoint_parsing() {
        assert_eq!(Endpoint::parse("tcp://127.0.0.1:9").unwrap(), Endpoint::Tcp("127.0.0.1:9".into()));
        assert_eq!(Endpoint::parse("localhost:7").unwrap(), Endpoint::Tcp("localhost:7".into()));
        assert_eq!(Endpoint::parse("exec:python3 serve.py").unwrap(), Endpoint::Exec(vec!["python3".into(), "serve.py".into()]));
        assert!(Endpoint::parse("nonsense").is_err());
    }

    #[test]
    fn request_wire_format() {
        let req = ProposeRequest {
            id: 3,
            verb: "propose".into(),
            level: 0,
            samples: 25,
            problem: "cnf(a, axiom, p(X)).\n".into(),
            clause_ids: vec!["a".into()],
            constants_only: false,
            seed: None,
        };
        let json = serde_json::to_string(&req).unwrap();
        assert_eq!(
            json,
            r#"{"id":3,"verb":"propose","level":0,"samples":25,"problem":"cnf(a, axiom, p(X)).\n","clause_ids":["a"],"constants_only":false}"#
        );
        let resp: ProposeResponse =
            serde_json::from_str(r#"{"id":3,"proposals":[{"clause_id":"a","assignments":[["⊥stop"],["c"]]}]}"#).unwrap();
        assert_eq!(resp.proposals[0].assignments[0][0], STOP_TOKEN);
    }

    #[test]
    fn train_wire_format() {
        let req = TrainRequest {
            id: 1,
            verb: "train".into(),
            records: vec![],
            problems: [("fig1".to_string(), "cnf(a, axiom, p(c)).\n".to_string())].into(),
            steps: 4,
        };
        let v: serde_json::Value = serde_json::to_value(&req).unwrap();
        assert_eq!(v["verb"], "train");
        assert_eq!(v["steps"], 4);
        assert_eq!(v["problems"]["fig1"], "cnf(a, axiom, p(c)).\n");
        let ack: TrainResponse = serde_json::from_str(r#"{"id":1,"ok":true,"checkpoint":"ck-0003"}"#).unwrap();
        assert_eq!(ack.checkpoint.as_deref(), Some("ck-0003"));
        let reset = serde_json::to_string(&ControlRequest { id: 2, verb: "reset".into() }).unwrap();
        assert_eq!(reset, r#"{"id":2,"verb":"reset"}"#);
    }
}
