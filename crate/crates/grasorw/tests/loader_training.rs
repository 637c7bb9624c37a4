//! Loader-model calibration against the engine, with an injected clock so
//! the fits are deterministic.

mod common;

use grasorw::engine::{EngineConfig, RunHooks, WalkModel};
use grasorw::loader::{self, LoaderModelSet};
use grasorw::sink::NullSink;
use grasorw_core::regress::{LoadMode, Threshold};
use grasorw_core::transition::Termination;

use common::build_er_store;

fn synthetic_clock(_block: u32, mode: LoadMode, eta: f64) -> f64 {
    // t_f = 1.5 eta + 4, t_o = 6.5 eta  =>  eta0 = 4 / 5 = 0.8.
    match mode {
        LoadMode::Full => 1.5 * eta + 4.0,
        LoadMode::OnDemand => 6.5 * eta,
    }
}

fn base_cfg(seed: u64, threads: usize) -> EngineConfig {
    EngineConfig {
        model: WalkModel::DeepWalk,
        termination: Termination::FixedLength { length: 30 },
        threads,
        seed,
        ..EngineConfig::default()
    }
}

#[test]
fn injected_clock_recovers_the_synthetic_threshold() {
    let tmp = tempfile::tempdir().unwrap();
    let (store, _) = build_er_store(tmp.path(), 2000, 10.0, 19, 6);
    let starts: Vec<(u64, u64)> = (0..store.vertex_count()).map(|v| (v, 2)).collect();
    let hooks = RunHooks {
        load_timer: Some(&synthetic_clock),
    };
    let (model, samples) = loader::train(&store, &starts, &base_cfg(3, 2), hooks).unwrap();
    assert!(
        samples.len() > 20,
        "calibration produced {} samples",
        samples.len()
    );
    let global = model.global_model().expect("pooled fit");
    assert!((global.alpha_f - 1.5).abs() < 1e-9);
    assert!((global.b_f - 4.0).abs() < 1e-9);
    assert!((global.alpha_o - 6.5).abs() < 1e-9);
    match global.eta0 {
        Threshold::Crossover(x) => assert!((x - 0.8).abs() < 1e-9, "eta0 {x}"),
        Threshold::Degenerate => panic!("unexpected degenerate"),
    }
}

#[test]
fn training_is_idempotent_under_a_fixed_seed_and_clock() {
    let tmp = tempfile::tempdir().unwrap();
    let (store, _) = build_er_store(tmp.path(), 1200, 8.0, 29, 5);
    let starts: Vec<(u64, u64)> = (0..store.vertex_count()).map(|v| (v, 1)).collect();
    let hooks = RunHooks {
        load_timer: Some(&synthetic_clock),
    };
    let cfg = EngineConfig {
        deterministic: true,
        ..base_cfg(9, 1)
    };

    let run_once = |out: &std::path::Path| {
        let (model, samples) = loader::train(&store, &starts, &cfg, hooks).unwrap();
        model.save(out).unwrap();
        samples.len()
    };
    let a = tmp.path().join("a.json");
    let b = tmp.path().join("b.json");
    let na = run_once(&a);
    let nb = run_once(&b);
    assert_eq!(na, nb);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn task_too_small_to_calibrate_falls_back_to_full_load() {
    // A single-block store never loads an ancillary block, so calibration
    // collects nothing and the selector defaults to full load.
    let tmp = tempfile::tempdir().unwrap();
    let (store, _) = build_er_store(tmp.path(), 200, 6.0, 7, 1);
    let starts: Vec<(u64, u64)> = (0..store.vertex_count()).map(|v| (v, 1)).collect();
    let (model, samples) =
        loader::train(&store, &starts, &base_cfg(1, 1), RunHooks::default()).unwrap();
    assert!(samples.is_empty());
    assert!(model.global_model().is_none());
    assert_eq!(model.choose_mode(0, 100, 10).unwrap(), LoadMode::Full);

    // The empty model still round-trips through its file.
    let path = tmp.path().join("model.json");
    model.save(&path).unwrap();
    let loaded = LoaderModelSet::load(&path).unwrap();
    assert!(loaded.global_model().is_none());

    // And a learned-mode run against it works, choosing full loads.
    let cfg = EngineConfig {
        loading_mode: grasorw::engine::LoadingMode::Learned,
        ..base_cfg(1, 1)
    };
    let mut sink = NullSink;
    let report = grasorw::engine::run(
        &store,
        &starts,
        &cfg,
        Some(&loaded),
        &mut sink,
        RunHooks::default(),
    )
    .unwrap();
    assert_eq!(report.metrics.walks_finished, starts.len() as u64);
}
