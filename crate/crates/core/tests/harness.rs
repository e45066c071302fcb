use arc_core::agents::Actor;
use arc_core::harness::*;
use arc_core::Error;
use serde_json::json;

fn parse(v: serde_json::Value) -> arc_core::Result<ExperimentConfig> {
    ExperimentConfig::from_value(v)
}

fn field_of(err: Error) -> String {
    match err {
        Error::Config { field, .. } => field,
        other => panic!("expected a config error, got {other:?}"),
    }
}

fn tiny_training(agent: &str, reward: &str) -> serde_json::Value {
    json!({
        "task": "planar_reach",
        "agent": agent,
        "reward_kind": reward,
        "seeds": [7, 8],
        "max_env_steps": 300,
        "eval_every": 150,
        "eval_episodes": 2,
        "hyperparameters": {
            "update_after": 100,
            "random_steps": 100,
            "update_every": 50,
            "disc_iterations": 2,
            "agent_iterations": 2,
            "critic_updates_per_policy": 2,
            "batch_size": 32,
            "disc_batch": 32,
            "hidden": [16, 16],
            "disc_hidden": [16, 16],
            "expert_trajectories": 4
        }
    })
}

#[test]
fn minimal_config_fills_defaults() {
    let c = parse(json!({"task": "gridworld_pi"})).unwrap();
    assert_eq!(c, ExperimentConfig::new(Task::GridworldPi));
    assert_eq!(c.eval_episodes, 20);
    assert!(!c.seeds.is_empty());
}

#[test]
fn misspelled_keys_are_named() {
    assert_eq!(field_of(parse(json!({"task": "car1d", "gamm": 0.9})).unwrap_err()), "gamm");
    let hp = json!({"task": "car1d", "hyperparameters": {"gamm": 0.9}});
    assert_eq!(field_of(parse(hp).unwrap_err()), "gamm");
}

#[test]
fn type_mismatch_and_missing_task_are_named() {
    let bad = json!({"task": "car1d", "max_env_steps": "many"});
    assert_eq!(field_of(parse(bad).unwrap_err()), "max_env_steps");
    let bad_hp = json!({"task": "planar_push", "hyperparameters": {"gamma": "high"}});
    assert_eq!(field_of(parse(bad_hp).unwrap_err()), "gamma");
    assert_eq!(field_of(parse(json!({"agent": "sac"})).unwrap_err()), "task");
    assert_eq!(field_of(parse(json!({"task": "mujoco"})).unwrap_err()), "task");
    assert_eq!(field_of(parse(json!({"task": "snr", "seeds": []})).unwrap_err()), "seeds");
    assert_eq!(field_of(parse(json!({"task": "snr", "eval_episodes": 0})).unwrap_err()), "eval_episodes");
    assert_eq!(field_of(ExperimentConfig::from_json_str("[1, 2]").unwrap_err()), "<root>");
}

#[test]
fn parse_serialize_parse_round_trips() {
    for v in [
        json!({"task": "gridworld_pi"}),
        tiny_training("sac", "gail"),
        json!({"task": "grad_accuracy", "hyperparameters": {"epochs": [0, 5], "state_range": [0.0, 0.5]}}),
        json!({"task": "theorem2", "seeds": [3], "hyperparameters": {"n_configs": 4}}),
    ] {
        let first = parse(v).unwrap();
        let again = ExperimentConfig::from_json_str(&first.to_json_string().unwrap()).unwrap();
        assert_eq!(first, again);
    }
}

#[test]
fn config_hash_tracks_meaning_not_layout() {
    let a = ExperimentConfig::from_json_str(r#"{"task": "car1d", "agent": "sac", "reward_kind": "gail"}"#).unwrap();
    let b = ExperimentConfig::from_json_str(r#"{"reward_kind": "gail", "agent": "sac", "task": "car1d"}"#).unwrap();
    assert_eq!(a.config_hash().unwrap(), b.config_hash().unwrap());

    let explicit_default = parse(json!({"task": "car1d", "agent": "sac", "reward_kind": "gail",
        "hyperparameters": {"gamma": 0.99}}))
    .unwrap();
    assert_eq!(a.config_hash().unwrap(), explicit_default.config_hash().unwrap());

    let changed = parse(json!({"task": "car1d", "agent": "sac", "reward_kind": "gail",
        "hyperparameters": {"gamma": 0.9}}))
    .unwrap();
    assert_ne!(a.config_hash().unwrap(), changed.config_hash().unwrap());

    // agent and reward do not enter a tabular experiment
    let g1 = parse(json!({"task": "gridworld_pi"})).unwrap();
    let g2 = parse(json!({"task": "gridworld_pi", "agent": "bc", "reward_kind": "env"})).unwrap();
    assert_eq!(g1.config_hash().unwrap(), g2.config_hash().unwrap());
}

#[test]
fn incompatible_pairs_are_rejected_before_any_work() {
    let cfg = ExperimentConfig {
        agent: arc_core::agents::AgentKind::Bc,
        reward_kind: arc_core::agents::RewardChoice::Gail,
        ..ExperimentConfig::new(Task::PlanarReach)
    };
    let out = tempfile::tempdir().unwrap();
    assert_eq!(field_of(run_experiment(&cfg, out.path()).unwrap_err()), "reward_kind");
    assert_eq!(std::fs::read_dir(out.path()).unwrap().count(), 0);
    assert_eq!(field_of(parse(tiny_training("sarc", "env")).unwrap_err()), "reward_kind");
}

#[test]
fn gridworld_run_reports_improvement_steps_and_residual() {
    let out = tempfile::tempdir().unwrap();
    let cfg = parse(json!({"task": "gridworld_pi"})).unwrap();
    let res = run_experiment(&cfg, out.path()).unwrap();
    assert!(res.records.is_empty());
    assert!(res.summary["improvement_steps"].as_u64().unwrap() >= 1);
    assert!(res.summary["q_minus_r_plus_c"].as_f64().unwrap() < 1e-9);
    assert_eq!(res.summary["same_policy"], json!(true));
    for f in ["config.json", "summary.json", "residuals.csv"] {
        assert!(res.dir.join(f).exists(), "{f}");
    }
    assert!(res.dir.ends_with(cfg.config_hash().unwrap()));
}

#[test]
fn training_is_byte_reproducible_and_checkpoints_reload() {
    let cfg = parse(tiny_training("sarc", "fmax_rkl")).unwrap();
    let (o1, o2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let r1 = run_experiment(&cfg, o1.path()).unwrap();
    let r2 = run_experiment(&cfg, o2.path()).unwrap();
    assert_eq!(r1.records.len(), 2);
    for seed in [7, 8] {
        let name = format!("seed_{seed}.csv");
        let a = std::fs::read(r1.dir.join(&name)).unwrap();
        assert_eq!(a, std::fs::read(r2.dir.join(&name)).unwrap());
        assert!(String::from_utf8(a).unwrap().starts_with("eval_step,mean_return,std_return,disc_loss,critic_loss,policy_objective\n"));
        assert!(r1.dir.join(format!("disc_seed_{seed}.json")).exists());
    }
    assert!(r1.records.iter().all(|r| r.config_hash == r1.config_hash));

    let actor = load_policy(&r1.dir.join("policy_seed_7.bin")).unwrap();
    let mut env = arc_core::env::EnvKind::Reach.make();
    let (m, _) = evaluate_policy(&actor, env.as_mut(), 2, 7).unwrap();
    assert!(m.is_finite());
    assert_eq!(actor.act(&[0.1, 0.1]).len(), 2);
}

#[test]
fn analysis_tasks_write_their_tables() {
    let out = tempfile::tempdir().unwrap();
    let t2 = parse(json!({"task": "theorem2", "hyperparameters": {"n_configs": 5, "grid_points": 1000}})).unwrap();
    let res = run_experiment(&t2, out.path()).unwrap();
    assert_eq!(res.summary["bound_holds"], json!(true));
    let csv = std::fs::read_to_string(res.dir.join("theorem2.csv")).unwrap();
    assert_eq!(csv.lines().count(), 6);

    let snr = parse(json!({"task": "snr", "hyperparameters": {"n_samples": 20000}})).unwrap();
    let res = run_experiment(&snr, out.path()).unwrap();
    assert_eq!(std::fs::read_to_string(res.dir.join("snr.csv")).unwrap().lines().count(), 11);
    assert!(res.summary["max_relative_error"].as_f64().unwrap() < 0.2);

    let small_snr = parse(json!({"task": "snr", "hyperparameters": {"n_samples": 10}})).unwrap_err();
    assert_eq!(field_of(small_snr), "n_samples");
}
