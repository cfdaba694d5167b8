use std::path::Path;

use groundinst::engine::server::RandomPolicyServer;
use groundinst::engine::{Endpoint, ExternalPolicy};
use groundinst::pipeline::{self_improve_loop, split_dataset, LoopConfig, LoopState, Part, RemotePolicy};
use groundinst::store::SolutionStore;
use groundinst::tptp::{family_of, load_dir};

#[test]
fn loop_against_a_policy_server() {
    let problems = load_dir(&Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus")).unwrap();
    let split = split_dataset(&problems, 2).unwrap();
    let server = RandomPolicyServer::bind("127.0.0.1:0", 5).unwrap();
    let addr = server.local_addr().unwrap();
    let handle = server.spawn();
    let client = ExternalPolicy::connect(&Endpoint::parse(&format!("tcp://{addr}")).unwrap()).unwrap();
    let mut remote = RemotePolicy::new(client, "init");

    let dir = tempfile::tempdir().unwrap();
    let state_path = dir.path().join("loop.json");
    let store = SolutionStore::new(dir.path().join("s.jsonl"));
    let config = LoopConfig { iterations: 4, eval_every: 2, ..LoopConfig::default() };
    let state = self_improve_loop(LoopState::new(20, 30), &problems, &split, &mut remote, &config, Some(&state_path), Some(&store))
        .unwrap();
    assert_eq!(state.iteration, 4);
    assert!(state.solved_count() > 0);
    assert_eq!(state.evals.len(), 2);
    assert_eq!(state.checkpoint.as_deref(), Some("random-4"));
    assert_eq!(handle.train_calls(), 4);

    let trained = handle.trained_problems();
    assert!(!trained.is_empty());
    for name in &trained {
        assert_eq!(split.part_of(family_of(name)), Some(Part::Train), "{name} leaked");
    }
    let stored = store.read_all().unwrap();
    assert!(stored.iter().all(|r| r.policy.to_string().starts_with("neural:")));

    // restart keeps the solved set and resumes the iteration count from disk
    let saved = LoopState::load(&state_path).unwrap().unwrap();
    assert_eq!(saved, state);
    let restart = LoopConfig { iterations: 1, restart_fresh_model: true, ..config };
    let after = self_improve_loop(saved, &problems, &split, &mut remote, &restart, Some(&state_path), Some(&store)).unwrap();
    assert_eq!(handle.resets(), 1);
    assert_eq!(after.iteration, 5);
    assert!(state.solved.keys().all(|k| after.solved.contains_key(k)));
}
