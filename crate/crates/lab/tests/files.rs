use proptest::prelude::*;
use trustgame::io::{
    export_trajectories, load_record, load_records, record_from_str, save_record, save_records, trajectories_csv, IoError,
};
use trustgame_core::inference::ingest_game;
use trustgame_core::simulator::{play_dyad, GameRecord, TrajectoryStats};
use trustgame_core::{AgentSpec, GuiltType, PlannerConfig};

fn generated(seed: u64) -> GameRecord {
    let inv = AgentSpec::investor(0, GuiltType::Guilty, 2).unwrap();
    let tr = AgentSpec::trustee(1, GuiltType::Pragmatic, 2).unwrap();
    play_dyad(&inv, &tr, &PlannerConfig::with_simulations(40), seed).unwrap()
}

#[test]
fn generated_record_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let rec = generated(11);
    let path = dir.path().join("r.json");
    save_record(&path, &rec).unwrap();
    assert_eq!(load_record(&path).unwrap(), rec);
    // a single record also loads as a one-element set
    assert_eq!(load_records(&path).unwrap(), vec![rec.clone()]);

    let many = vec![rec, generated(12)];
    let set = dir.path().join("set.json");
    save_records(&set, &many).unwrap();
    assert_eq!(load_records(&set).unwrap(), many);
}

#[test]
fn truncated_file_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    save_record(&path, &generated(3)).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let cut = &text[..text.len() / 2];
    assert!(matches!(record_from_str(&path, cut), Err(IoError::Parse { .. })));
}

#[test]
fn eleven_rounds_fail_validation() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    let mut rec = ingest_game(Some("x".into()), &[(20, 30); 10]).unwrap();
    rec.rounds.push(rec.rounds[0]);
    assert!(save_record(&path, &rec).is_err());
    assert!(!path.exists());

    let mut v = serde_json::to_value(ingest_game(None, &[(20, 30); 10]).unwrap()).unwrap();
    let first = v["rounds"][0].clone();
    v["rounds"].as_array_mut().unwrap().push(first);
    let err = record_from_str(&path, &v.to_string()).unwrap_err();
    assert!(matches!(err, IoError::Invalid { .. }), "{err}");
}

#[test]
fn trajectory_export_shape_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let recs: Vec<GameRecord> = (0..3).map(generated).collect();
    let stats = vec![("a vs b".to_string(), TrajectoryStats::from_records(&recs).unwrap())];
    let path = dir.path().join("t.csv");
    export_trajectories(&path, &stats).unwrap();
    let first = std::fs::read(&path).unwrap();
    let text = String::from_utf8(first.clone()).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "pairing,round,role,mean,std,n");
    assert_eq!(lines.len(), 21);
    assert!(lines[1].starts_with("a vs b,1,investor,"));
    assert!(lines[2].starts_with("a vs b,1,trustee,"));
    export_trajectories(&path, &stats).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), first);
    assert_eq!(trajectories_csv(&[]), b"pairing,round,role,mean,std,n\n");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn observed_records_round_trip(pairs in proptest::collection::vec((0u8..5, 0u8..5), 10)) {
        let amounts: Vec<(i64, i64)> = pairs
            .iter()
            .map(|&(i, t)| {
                let inv = 5 * i as i64;
                let ret = if inv == 0 { 0 } else { (3 * inv) * t as i64 / 6 };
                (inv, ret)
            })
            .collect();
        let rec = ingest_game(Some("p".into()), &amounts).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.json");
        save_record(&path, &rec).unwrap();
        prop_assert_eq!(load_record(&path).unwrap(), rec);
    }
}
