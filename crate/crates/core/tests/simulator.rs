use symkit::aie::AieConfig;
use symkit::simulator::{self, MotionKind, SequenceSpec, TrackerModel};

fn distractor_spec(seed: u64) -> SequenceSpec {
    SequenceSpec {
        motion: MotionKind::ConstantVelocity,
        start_size: [40.0, 20.0],
        velocity: [2.0, 1.0],
        distractors: 1,
        distractor_offset: [0.0, 1.2],
        seed,
        ..SequenceSpec::default()
    }
}

#[test]
fn distractor_is_rejected_with_aie() {
    let (model, cfg) = (TrackerModel::default(), AieConfig::default());
    let mut with = Vec::new();
    let mut without = Vec::new();
    for seed in 0..10 {
        let spec = distractor_spec(seed);
        with.push(simulator::simulate_track(&spec, &model, &cfg, true).unwrap().summary());
        without.push(simulator::simulate_track(&spec, &model, &cfg, false).unwrap().summary());
    }
    let mean = |v: &[simulator::SimSummary]| v.iter().map(|s| s.mean_center_error).sum::<f64>() / v.len() as f64;
    assert!(mean(&with) < mean(&without), "{} vs {}", mean(&with), mean(&without));
    // never drifts a quarter of the way to the distractor
    let offset = 1.2 * 20.0;
    for s in &with {
        assert!(s.max_center_error < 0.25 * offset, "{s:?}");
    }
}

#[test]
fn smoke_path_never_adds_energy() {
    let run = simulator::simulate_track(&SequenceSpec::default(), &TrackerModel::default(), &AieConfig::default(), true)
        .unwrap();
    let energies: Vec<f64> = run.records.iter().filter_map(|r| r.calib_energy).collect();
    assert_eq!(energies.len(), run.records.len());
    assert!(energies.iter().all(|e| e.is_finite() && *e >= 0.0));

    let quiet = TrackerModel {
        feature_smoke: false,
        ..TrackerModel::default()
    };
    let bare = simulator::simulate_track(&SequenceSpec::default(), &quiet, &AieConfig::default(), true).unwrap();
    assert!(bare.records.iter().all(|r| r.calib_energy.is_none()));
    // the smoke check only observes: trajectories are identical
    assert_eq!(bare.predicted, run.predicted);
}

#[test]
fn fusion_beats_raw_measurements() {
    let spec = SequenceSpec {
        motion: MotionKind::ConstantVelocity,
        noise_std: 2.0,
        ..SequenceSpec::default()
    };
    let run = simulator::simulate_track(&spec, &TrackerModel::default(), &AieConfig::default(), true).unwrap();
    let (fused, raw) = simulator::smoothing_errors(&run);
    assert!(fused < raw, "{fused} vs {raw}");
}
