use fluid_core::io;
use fluid_core::session::{replay_discrepancy, RecordedOracle, Strategy};
use fluid_core::simulation::{generate_bank, simulated_oracle, SyntheticBankSpec};
use fluid_core::{run_session, Ability, Response, SessionConfig, StopReason};

fn bank() -> Vec<fluid_core::ItemParams> {
    generate_bank(&SyntheticBankSpec {
        item_count: 200,
        seed: 3,
        ..SyntheticBankSpec::default()
    })
    .unwrap()
}

#[test]
fn random_strategies_share_items_but_not_scores() {
    let bank = bank();
    let oracle = simulated_oracle(Ability(0.5), &bank, 9);
    let random = run_session(&bank, &oracle, &SessionConfig::new(Strategy::Random, Some(25), None, 4)).unwrap();
    let irt = run_session(&bank, &oracle, &SessionConfig::new(Strategy::RandomIrt, Some(25), None, 4)).unwrap();
    let ids = |s: &fluid_core::EvalSession| s.administered.iter().map(|a| a.item.item_id.clone()).collect::<Vec<_>>();
    assert_eq!(ids(&random), ids(&irt));
    assert!((0.0..=1.0).contains(&random.final_score));
    assert_eq!(irt.final_score, irt.final_estimate().unwrap().theta);
}

#[test]
fn recorded_answers_drive_a_session_through_a_log_file() {
    let bank = bank();
    let answers = bank.iter().map(|q| Response::new(q.item_id.clone(), q.difficulty < 0.3));
    let oracle = RecordedOracle::from_responses(answers);
    let session = run_session(&bank, &oracle, &SessionConfig::new(Strategy::Fluid, Some(40), Some(0.4), 0)).unwrap();
    assert!(matches!(session.stop_reason, StopReason::SeThreshold | StopReason::Budget));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("log.jsonl");
    io::write_session_log(&session, &path).unwrap();
    let logged = io::read_session_log(&path).unwrap();
    assert_eq!(logged, session);
    assert!(replay_discrepancy(&logged).unwrap() <= 1e-9);
}

#[test]
fn tampered_log_is_rejected() {
    let bank = bank();
    let oracle = simulated_oracle(Ability(-1.0), &bank, 1);
    let session = run_session(&bank, &oracle, &SessionConfig::new(Strategy::Fluid, Some(10), None, 0)).unwrap();
    let text = io::session_log_to_string(&session);
    let tampered = text.replacen("\"correct\":1", "\"correct\":0", 1);
    let tampered = if tampered == text {
        text.replacen("\"correct\":0", "\"correct\":1", 1)
    } else {
        tampered
    };
    assert_ne!(tampered, text);
    assert!(io::parse_session_log(&tampered, std::path::Path::new("log.jsonl")).is_err());
}
