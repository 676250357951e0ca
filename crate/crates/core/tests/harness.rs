use meps_core::harness::{self, stats, ExperimentConfig, RunOptions};
use meps_core::history::DynamicHypergraph;
use proptest::prelude::*;

fn config(json: serde_json::Value) -> ExperimentConfig {
    ExperimentConfig::from_json(&json.to_string()).unwrap()
}

fn distraction(rounds: usize, ensemble: usize, window: usize) -> ExperimentConfig {
    config(serde_json::json!({
        "name": "d", "environment": {"kind": "distraction"}, "rounds": rounds, "ensemble": ensemble,
        "window": window, "record_history": true,
        "agents": [{"kind": "meps", "name": "two-body", "io": [[2, 1]], "rule": {"softmax": {"beta": 1.0}}}]
    }))
}

fn maintenance(episodes: usize, ensemble: usize) -> ExperimentConfig {
    config(serde_json::json!({
        "name": "m", "environment": {"kind": "maintenance"}, "rounds": episodes, "ensemble": ensemble, "seed": 2,
        "agents": [{"kind": "meps", "name": "inductive", "bias": "DP",
                    "cutoffs": {"symptoms": 2, "hidden": [3, 2], "action": [3, 2]}, "rule": {"softmax": {"beta": 0.5}}},
                   {"kind": "q", "name": "q", "alpha": 1.0, "lambda": 0.0}]
    }))
}

fn data_rows(csv: &str) -> Vec<Vec<f64>> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn one_member_one_window_gives_one_row() {
    let out = harness::run(&distraction(100, 1, 100), RunOptions::default()).unwrap();
    let csv = out.agents[0].file("rewards.csv").unwrap();
    assert!(csv.starts_with(&format!("# config sha256 {}\n", out.config_sha256)));
    let rows = data_rows(csv);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][0], 100.0);
    // A single member has no spread.
    assert_eq!(rows[0][2], 0.0);
}

#[test]
fn history_has_one_line_per_round_plus_init() {
    let out = harness::run(&distraction(100, 1, 100), RunOptions::default()).unwrap();
    let history = out.agents[0].file("history.jsonl").unwrap();
    assert_eq!(history.lines().count(), 101);
    let graph = DynamicHypergraph::read_jsonl(history.as_bytes(), 100).unwrap();
    assert_eq!(graph.times().collect::<Vec<_>>(), (0..=100).collect::<Vec<_>>());
}

#[test]
fn windowed_curve_matches_raw_rewards() {
    let out = harness::run(&distraction(400, 5, 50), RunOptions { jobs: 2 }).unwrap();
    let agent = &out.agents[0];
    let rows = data_rows(agent.file("rewards.csv").unwrap());
    assert_eq!(rows.len(), 8);
    for (k, row) in rows.iter().enumerate() {
        let means: Vec<f64> = agent.rewards.iter().map(|m| m[k * 50..(k + 1) * 50].iter().sum::<f64>() / 50.0).collect();
        let mean = means.iter().sum::<f64>() / means.len() as f64;
        let var = means.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / means.len() as f64;
        assert!((row[1] - mean).abs() < 1e-9 && (row[2] - var.sqrt()).abs() < 1e-9, "{row:?} vs {mean} {var}");
    }
}

#[test]
fn maintenance_files_agree_with_each_other() {
    let out = harness::run(&maintenance(30, 3), RunOptions::default()).unwrap();
    for agent in &out.agents {
        let episodes = agent.file("episodes.csv").unwrap();
        assert_eq!(data_rows_raw(episodes).len(), 90);
        let from_file = harness::total_steps(episodes, 30).unwrap();
        assert!((from_file - agent.total_steps(30).unwrap()).abs() < 1e-9);
        assert_eq!(Some(from_file), agent.summary.total_steps);
        for name in ["hypothesis.csv", "plausibility.csv"] {
            let rows = data_rows(agent.file(name).unwrap());
            assert_eq!(rows.len(), 30);
            let mean_steps: f64 = rows.iter().map(|r| r[3]).sum();
            assert!((mean_steps - from_file).abs() < 1e-6);
        }
        let summary: serde_json::Value = serde_json::from_str(agent.file("summary.json").unwrap()).unwrap();
        assert_eq!(summary["name"], agent.summary.name.as_str());
    }
    assert_eq!(out.agent("q").unwrap().summary.parameters, 1_429_968);
}

fn data_rows_raw(csv: &str) -> Vec<&str> {
    csv.lines().filter(|l| !l.starts_with('#')).skip(1).collect()
}

#[test]
fn total_steps_rejects_short_logs() {
    let out = harness::run(&maintenance(5, 2), RunOptions::default()).unwrap();
    let episodes = out.agents[0].file("episodes.csv").unwrap();
    assert!(harness::total_steps(episodes, 6).is_err());
    assert!(harness::total_steps("member,episode\n1,x\n", 1).is_err());
}

#[test]
fn seeds_change_results_and_agents_share_environment_draws() {
    let a = harness::run(&maintenance(10, 2), RunOptions::default()).unwrap();
    let mut cfg = maintenance(10, 2);
    cfg.seed = 3;
    let b = harness::run(&cfg, RunOptions::default()).unwrap();
    assert_ne!(a.config_sha256, b.config_sha256);
    let scenarios = |o: &harness::RunOutput, k: usize| o.agents[k].episodes.iter().map(|m| m.iter().map(|e| e.scenario).collect::<Vec<_>>()).collect::<Vec<_>>();
    assert_ne!(scenarios(&a, 0), scenarios(&b, 0));
    // Both agents face the same first scenario of every member.
    for (m, n) in scenarios(&a, 0).iter().zip(scenarios(&a, 1)) {
        assert_eq!(m[0], n[0]);
    }
}

#[test]
fn bound_assertions_pass_on_bounded_biases() {
    let mut cfg = maintenance(5, 1);
    cfg.assert_bounds = true;
    let out = harness::run(&cfg, RunOptions::default()).unwrap();
    let bound = out.agents[0].summary.walk_bound.as_ref().unwrap();
    assert_eq!((bound.analytic_value, bound.observed_value, bound.satisfied), (Some(2), 2, true));
    assert!(out.agents[1].summary.walk_bound.is_none());
}

#[test]
fn audit_reports_exact_maintenance_counts() {
    let reports = harness::audit(&maintenance(1, 1)).unwrap();
    let nl = reports.iter().find(|r| r.bound_name == "inductive: N_l").unwrap();
    assert_eq!((nl.analytic_value, nl.observed_value), (Some(114_375), 114_375));
    assert!(reports.iter().all(|r| r.satisfied));
}

#[test]
fn written_output_mirrors_memory() {
    let dir = tempfile::tempdir().unwrap();
    let out = harness::run(&distraction(100, 2, 100), RunOptions::default()).unwrap();
    out.write(dir.path()).unwrap();
    for (name, bytes) in &out.agents[0].files {
        assert_eq!(&std::fs::read(dir.path().join("two-body").join(name)).unwrap(), bytes);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn window_rows_follow_the_schedule(windows in 1usize..6, per in prop::sample::select(vec![1usize, 2, 5, 10]), ensemble in 1usize..4) {
        let out = harness::run(&distraction(windows * per, ensemble, per), RunOptions::default()).unwrap();
        let rows = data_rows(out.agents[0].file("rewards.csv").unwrap());
        prop_assert_eq!(rows.len(), windows);
        for (k, r) in rows.iter().enumerate() {
            prop_assert_eq!(r[0] as usize, (k + 1) * per);
            prop_assert!(r[2] >= 0.0);
        }
    }

    #[test]
    fn running_stats_match_two_pass(values in prop::collection::vec(-50.0f64..50.0, 1..40)) {
        let mut w = stats::Welford::default();
        values.iter().for_each(|&v| w.push(v));
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64;
        prop_assert!((w.mean() - mean).abs() < 1e-9);
        prop_assert!((w.std() - var.sqrt()).abs() < 1e-9);
    }
}
