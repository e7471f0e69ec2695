use brain_core::streams::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn single_cluster(center: f64, sd: f64, class: usize) -> Concept {
    Concept {
        centroids: vec![Centroid {
            center: vec![center; 2],
            class,
            std_dev: sd,
            weight: 1.0,
        }],
    }
}

fn means(recs: &[StreamRecord]) -> Vec<f64> {
    let d = recs[0].x.len();
    (0..d)
        .map(|j| recs.iter().map(|r| r.x[j]).sum::<f64>() / recs.len() as f64)
        .collect()
}

#[test]
fn same_seed_is_byte_identical() {
    let (spec, _) = StreamSpec::desk_preset(DriftKind::Gradual, 100_000, 11).unwrap();
    let a = write_stream(&spec, &generate_stream(&spec, 4500).unwrap());
    let b = write_stream(&spec, &generate_stream(&spec, 4500).unwrap());
    assert_eq!(a, b);
    let other = StreamSpec {
        seed: 12,
        ..spec.clone()
    };
    assert_ne!(a, write_stream(&other, &generate_stream(&other, 4500).unwrap()));
}

#[test]
fn no_drift_halves_agree() {
    let sd = 0.5;
    let spec = StreamSpec {
        seed: 5,
        concepts: vec![single_cluster(1.0, sd, 0)],
        drifts: vec![],
        imbalance: vec![],
    };
    let n = 4000;
    let recs = generate_stream(&spec, n).unwrap();
    assert!(recs.iter().all(|r| r.concept == 0));
    let (a, b) = recs.split_at(n as usize / 2);
    let bound = 3.0 * sd / (n as f64).sqrt();
    for (x, y) in means(a).iter().zip(means(b)) {
        assert!((x - y).abs() < bound, "{x} vs {y} (bound {bound})");
    }
}

#[test]
fn abrupt_drift_moves_half_means_by_offset() {
    let sd = 0.3;
    let offset = 2.0;
    let spec = StreamSpec {
        seed: 9,
        concepts: vec![single_cluster(0.0, sd, 0), single_cluster(offset, sd, 0)],
        drifts: vec![Drift {
            kind: DriftKind::Abrupt,
            position: 1000,
            width: 1,
            to: 1,
        }],
        imbalance: vec![],
    };
    let recs = generate_stream(&spec, 2000).unwrap();
    assert!(recs[..1000].iter().all(|r| r.concept == 0));
    assert!(recs[1000..].iter().all(|r| r.concept == 1));
    let (a, b) = recs.split_at(1000);
    let tol = 4.0 * sd * (2.0f64 / 1000.0).sqrt();
    for (x, y) in means(a).iter().zip(means(b)) {
        assert!((y - x - offset).abs() < tol);
    }
}

#[test]
fn gradual_membership_follows_blend() {
    let spec = StreamSpec {
        seed: 2,
        concepts: vec![single_cluster(0.0, 0.1, 0), single_cluster(5.0, 0.1, 1)],
        drifts: vec![Drift {
            kind: DriftKind::Gradual,
            position: 50_000,
            width: 40_000,
            to: 1,
        }],
        imbalance: vec![],
    };
    let recs = generate_stream(&spec, 100_000).unwrap();
    assert!(recs[..30_000].iter().all(|r| r.concept == 0));
    assert!(recs[70_000..].iter().all(|r| r.concept == 1));
    for (lo, hi) in [(35_000u64, 40_000u64), (48_000, 52_000), (60_000, 65_000)] {
        let seg = &recs[lo as usize..hi as usize];
        let got = seg.iter().filter(|r| r.concept == 1).count() as f64 / seg.len() as f64;
        let want = (lo..hi).map(|t| spec.drifts[0].blend(t)).sum::<f64>() / (hi - lo) as f64;
        assert!((got - want).abs() < 0.03, "[{lo},{hi}) {got} vs {want}");
    }
}

#[test]
fn incremental_interpolates_centers() {
    let spec = StreamSpec {
        seed: 4,
        concepts: vec![single_cluster(0.0, 0.01, 0), single_cluster(1.0, 0.01, 0)],
        drifts: vec![Drift {
            kind: DriftKind::Incremental,
            position: 500,
            width: 200,
            to: 1,
        }],
        imbalance: vec![],
    };
    let recs = generate_stream(&spec, 1000).unwrap();
    let at = |t: usize| recs[t].x[0];
    assert!(at(300).abs() < 0.05);
    assert!((at(500) - 0.5).abs() < 0.05);
    assert!((at(900) - 1.0).abs() < 0.05);
    assert!(at(450) < at(550));
}

#[test]
fn imbalance_switch_is_honoured() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let spec = StreamSpec {
        seed: 8,
        concepts: vec![Concept::random_rbf(8, 3, 2, &mut rng)],
        drifts: vec![],
        imbalance: vec![
            ImbalanceStep { from: 0, ratio: 0.5 },
            ImbalanceStep {
                from: 20_000,
                ratio: 0.2,
            },
        ],
    };
    let recs = generate_stream(&spec, 40_000).unwrap();
    let ratio = |s: &[StreamRecord]| s.iter().filter(|r| r.label == 0).count() as f64 / s.len() as f64;
    assert!((ratio(&recs[..20_000]) - 0.5).abs() <= 0.02);
    assert!((ratio(&recs[20_000..]) - 0.2).abs() <= 0.02);
}

#[test]
fn hand_counted_rates() {
    let recs: Vec<TaskRecord> = (0..10)
        .map(|i| {
            let out = match i {
                0..6 => Some("ok"),
                6 => Some("wrong"),
                _ => None,
            };
            TaskRecord::new(format!("task{i}"), out, "ok")
        })
        .collect();
    assert_eq!(tpcr(&recs).unwrap(), 0.7);
    assert_eq!(tpsr(&recs).unwrap(), 0.6);
}

#[test]
fn abrupt_label_flip_drops_accuracy_at_drift() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let a = Concept::random_rbf(6, 4, 2, &mut rng);
    let spec = StreamSpec {
        seed: 21,
        concepts: vec![a.clone(), a.relabeled(&[1, 0])],
        drifts: vec![Drift {
            kind: DriftKind::Abrupt,
            position: 5000,
            width: 1,
            to: 1,
        }],
        imbalance: vec![],
    };
    let recs = generate_stream(&spec, 10_000).unwrap();
    let rows = drift_eval_curve(&mut NearestCentroid::frozen_after(1000), &recs, 500).unwrap();
    assert_eq!(rows.len(), 20);
    let before = rows[9].accuracy;
    let after = rows[10].accuracy;
    assert!(before > 0.7 && after < before - 0.3, "{before} -> {after}");
    assert_eq!(rows[10].start, 5000);
}

fn arb_records() -> impl Strategy<Value = Vec<TaskRecord>> {
    prop::collection::vec((prop::option::of(0u8..4), 0u8..4), 1..60).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (o, g))| {
                let out = o.map(|o| if o == 0 { String::new() } else { o.to_string() });
                TaskRecord {
                    input: i.to_string(),
                    output: out,
                    gold: g.to_string(),
                }
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn tpcr_bounds_tpsr(recs in arb_records()) {
        let c = tpcr(&recs).unwrap();
        let s = tpsr(&recs).unwrap();
        prop_assert!(s <= c);
        prop_assert!((0.0..=1.0).contains(&c));
    }

    #[test]
    fn metrics_match_confusion_oracle(pairs in prop::collection::vec((0usize..4, 0usize..4), 1..200)) {
        let m = classification_metrics(&pairs).unwrap();
        let acc = pairs.iter().filter(|(g, p)| g == p).count() as f64 / pairs.len() as f64;
        prop_assert!((m.accuracy - acc).abs() < 1e-12);
        let mut recalls = vec![];
        for k in 0..4 {
            let with = pairs.iter().filter(|(g, _)| *g == k).count();
            if with > 0 {
                let hit = pairs.iter().filter(|(g, p)| *g == k && *p == k).count();
                recalls.push(hit as f64 / with as f64);
            }
        }
        let want = recalls.iter().sum::<f64>() / recalls.len() as f64;
        prop_assert!((m.macro_recall - want).abs() < 1e-12);
    }

    #[test]
    fn curve_length_is_ceiling(n in 1u64..300, w in 1usize..50) {
        let spec = StreamSpec {
            seed: n,
            concepts: vec![single_cluster(0.0, 0.1, 0)],
            drifts: vec![],
            imbalance: vec![],
        };
        let recs = generate_stream(&spec, n).unwrap();
        let rows = drift_eval_curve(&mut ConstantModel(0), &recs, w).unwrap();
        prop_assert_eq!(rows.len(), (n as usize).div_ceil(w));
    }
}
