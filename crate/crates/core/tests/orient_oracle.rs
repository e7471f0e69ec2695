use brain_core::nnblocks::{grad_check, GruParams, Mat, Objective, Real};
use brain_core::orientdecide::*;
use brain_core::resilience::{Action, InterventionCandidate, InterventionFamily, NodeRef};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn matvec(m: &Mat, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; m.rows];
    for r in 0..m.rows {
        for c in 0..m.cols {
            out[r] += m.data[r * m.cols + c] * x[c];
        }
    }
    out
}

/// `σ(a[..d]·q + a[d..]·k)` for every key, normalised.
fn ref_weights(a: &Mat, q: &[f64], keys: &[Vec<f64>]) -> Vec<f64> {
    let d = q.len();
    let raw: Vec<f64> = keys
        .iter()
        .map(|k| {
            let mut s = 0.0;
            for i in 0..d {
                s += a.data[i] * q[i] + a.data[d + i] * k[i];
            }
            sig(s)
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|r| r / total).collect()
}

fn random_session(rng: &mut impl Rng, n: usize) -> Session {
    Session {
        subgraph: SubgraphKind::Current,
        tick: 3,
        events: (0..n)
            .map(|i| EventNode {
                node: i,
                kind: EventKind::ALL[rng.random_range(0..4)],
                features: (0..EVENT_FEATURES).map(|_| rng.random_range(-1.0..1.0)).collect(),
            })
            .collect(),
    }
}

#[test]
fn session_attention_matches_scalar_reference() {
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let heads: Vec<SessionHead> = (0..3).map(|_| SessionHead::init(EVENT_FEATURES, 3, &mut rng)).collect();
        let s = random_session(&mut rng, 5);
        let got = intra_session_gat(&heads, &s).unwrap();
        let h0: Vec<f64> = (0..EVENT_FEATURES)
            .map(|c| s.events.iter().map(|e| e.features[c]).sum::<f64>() / 5.0)
            .collect();
        let mut out = Vec::new();
        for (h, w_got) in heads.iter().zip(&got.weights) {
            let q = matvec(&h.session, &h0);
            let vals: Vec<Vec<f64>> = s
                .events
                .iter()
                .map(|e| matvec(&h.kinds[e.kind.index()], &e.features))
                .collect();
            let w = ref_weights(&h.attention, &q, &vals);
            for (a, b) in w.iter().zip(w_got) {
                assert!((a - b).abs() < 1e-12);
            }
            assert!((w_got.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for d in 0..3 {
                out.push((0..5).map(|i| w[i] * vals[i][d]).sum::<f64>().tanh());
            }
        }
        for (a, b) in out.iter().zip(&got.output) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn temporal_attention_matches_scalar_reference() {
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let heads: Vec<TemporalHead> = (0..2).map(|_| TemporalHead::init(4, 3, &mut rng)).collect();
        let hist: Vec<Vec<f64>> = (0..6)
            .map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let lookback = 3;
        let got = cross_session_gat(&heads, &hist, lookback).unwrap();
        let mut out = Vec::new();
        for (h, w_got) in heads.iter().zip(&got.weights) {
            let lags = &hist[..=lookback];
            let q = matvec(&h.query, &lags[0]);
            let keys: Vec<Vec<f64>> = lags.iter().map(|x| matvec(&h.key, x)).collect();
            let w = ref_weights(&h.attention, &q, &keys);
            assert_eq!(w_got.len(), lookback + 1);
            for (a, b) in w.iter().zip(w_got) {
                assert!((a - b).abs() < 1e-12);
            }
            assert!((w_got.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let vals: Vec<Vec<f64>> = lags.iter().map(|x| matvec(&h.value, x)).collect();
            for d in 0..3 {
                out.push((0..=lookback).map(|t| w[t] * vals[t][d]).sum::<f64>());
            }
        }
        for (a, b) in out.iter().zip(&got.output) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn subgraph_attention_matches_scalar_reference() {
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(200 + seed);
        let heads: Vec<GlobalHead> = (0..2).map(|_| GlobalHead::init(4, 3, &mut rng)).collect();
        let mut v = || -> Vec<f64> { (0..4).map(|_| rng.random_range(-1.0..1.0)).collect() };
        let h2 = [Some(v()), Some(v()), Some(v())];
        let nulls = [vec![0.0; 4], vec![0.0; 4], vec![0.0; 4]];
        let (got, _) = cross_subgraph_gat(&heads, &h2, &nulls, NullPolicy::Mask).unwrap();
        for (h, w_got) in heads.iter().zip(&got.weights) {
            let vals: Vec<Vec<f64>> = h2.iter().map(|x| matvec(&h.transform, x.as_ref().unwrap())).collect();
            let w = ref_weights(&h.attention, &vals[0], &vals);
            for (a, b) in w.iter().zip(w_got) {
                assert!((a - b).abs() < 1e-12);
            }
            assert!((w_got.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn judgment_sequence_zero_params_decays() {
    let gru = GruParams::zeros(3, 2);
    let inputs: Vec<Vec<f64>> = (0..5).map(|t| vec![t as f64, 1.0, -1.0]).collect();
    let hs = gru.run(&inputs, &[0.8, -0.4]);
    for (t, h) in hs.iter().enumerate() {
        let f = 0.5f64.powi(t as i32 + 1);
        assert_eq!(h, &vec![0.8 * f, -0.4 * f]);
    }
}

#[test]
fn judgment_sequence_matches_unrolled_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let gru = GruParams::init(3, 4, &mut rng);
    let inputs: Vec<Vec<f64>> = (0..8)
        .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let got = gru.run(&inputs, &[0.0; 4]);
    let mut h = vec![0.0; 4];
    for (x, g) in inputs.iter().zip(&got) {
        let add = |a: Vec<f64>, b: Vec<f64>| -> Vec<f64> { a.iter().zip(&b).map(|(p, q)| p + q).collect() };
        let z: Vec<f64> = add(matvec(&gru.w_z, x), matvec(&gru.u_z, &h))
            .into_iter()
            .map(sig)
            .collect();
        let r: Vec<f64> = add(matvec(&gru.w_r, x), matvec(&gru.u_r, &h))
            .into_iter()
            .map(sig)
            .collect();
        let rh: Vec<f64> = r.iter().zip(&h).map(|(a, b)| a * b).collect();
        let c: Vec<f64> = add(matvec(&gru.w, x), matvec(&gru.u, &rh))
            .into_iter()
            .map(f64::tanh)
            .collect();
        h = (0..4).map(|i| (1.0 - z[i]) * h[i] + z[i] * c[i]).collect();
        for (a, b) in h.iter().zip(g) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}

struct LossObj {
    states: Vec<Vec<f64>>,
    labels: Vec<bool>,
    lambda: f64,
}

impl Objective for LossObj {
    fn eval<T: Real>(&self, params: &[T]) -> T {
        decision_loss(&self.states, &self.labels, params, self.lambda).unwrap()
    }
}

#[test]
fn decision_loss_brute_force_and_gradient() {
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(300 + seed);
        let states: Vec<Vec<f64>> = (0..12)
            .map(|_| (0..5).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let labels: Vec<bool> = (0..12).map(|_| rng.random_bool(0.5)).collect();
        let theta: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let lambda = 0.3;
        let mut expect = 0.0;
        for (h, &y) in states.iter().zip(&labels) {
            let p = sig(h.iter().zip(&theta).map(|(a, b)| a * b).sum());
            let y = if y { 1.0 } else { 0.0 };
            expect -= y * p.ln() + (1.0 - y) * (1.0 - p).ln();
        }
        expect += lambda * theta.iter().map(|t| t * t).sum::<f64>().sqrt();
        let got = decision_loss(&states, &labels, &theta, lambda).unwrap();
        assert!((got - expect).abs() < 1e-10);
        assert!(got >= 0.0);
        let r = grad_check(&LossObj { states, labels, lambda }, &theta);
        assert!(r.max_rel_error < 1e-4, "{}", r.max_rel_error);
    }
}

fn candidates(rng: &mut impl Rng, n: usize) -> Vec<InterventionCandidate> {
    let fams = [
        InterventionFamily::Autonomy,
        InterventionFamily::DegreeMatchedRewire,
        InterventionFamily::Protection,
    ];
    (0..n)
        .map(|i| InterventionCandidate {
            id: format!("c-{i:02}"),
            family: fams[i % 3],
            k: 1 + i,
            action: Action::Protect {
                nodes: vec![NodeRef { layer: 0, node: i }],
            },
            predicted_s: rng.random_range(0.0..1.0),
            delta_s: rng.random_range(-0.1..0.3),
        })
        .collect()
}

#[test]
fn ranking_matches_exhaustive_scores() {
    let mut rng = ChaCha8Rng::seed_from_u64(400);
    let cands = candidates(&mut rng, 10);
    let h: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
    let theta: Vec<f64> = (0..4 + CANDIDATE_FEATURES)
        .map(|_| rng.random_range(-2.0..2.0))
        .collect();
    let ranked = rank_candidates(&h, &cands, &theta).unwrap();
    let score = |c: &InterventionCandidate| {
        let f = candidate_features(c);
        sig(h.iter().chain(&f).zip(&theta).map(|(a, b)| a * b).sum())
    };
    // Exhaustive: each candidate's rank is the number of candidates beating it.
    for (pos, r) in ranked.iter().enumerate() {
        let s = score(&r.candidate);
        assert!((r.score - s).abs() < 1e-12 && r.score > 0.0 && r.score < 1.0);
        let better = cands
            .iter()
            .filter(|c| {
                let t = score(c);
                t > s || (t == s && c.id < r.candidate.id)
            })
            .count();
        assert_eq!(better, pos);
    }
    // Scaling θ by a positive factor is a strictly increasing transform of
    // every score, so the order is unchanged.
    let scaled: Vec<f64> = theta.iter().map(|t| t * 0.37).collect();
    let again = rank_candidates(&h, &cands, &scaled).unwrap();
    let ids = |r: &[RankedCandidate]| r.iter().map(|x| x.candidate.id.clone()).collect::<Vec<_>>();
    assert_eq!(ids(&ranked), ids(&again));
    assert_eq!(rank_candidates(&h, &cands[..1], &theta).unwrap().len(), 1);
}

/// Path 0 -> 1 -> 2 -> 3 -> 4 with the cascade spreading from node 1.
#[test]
fn cascade_matches_rule_reference() {
    let links = vec![vec![1], vec![2], vec![3], vec![4], vec![]];
    let contribution = vec![1.2, 3.0, 2.5, 1.4, 0.3];
    let signals = NodeSignals {
        density: contribution.iter().map(|c| c / 5.0).collect(),
        coupling: vec![0.0, 0.0, 0.0, 0.8, 0.0],
        contribution: contribution.clone(),
    };
    let threshold = 2.0;
    let g = build_event_graph(&signals, &links, threshold, 11).unwrap();
    // Reference: current above threshold; sources are elevated predecessors;
    // targets are elevated successors not already sources.
    let current: Vec<usize> = (0..5).filter(|&i| contribution[i] > threshold).collect();
    let elevated = |i: usize| contribution[i] > threshold / 2.0 && contribution[i] <= threshold;
    let sources: Vec<usize> = (0..5)
        .filter(|&i| elevated(i) && links[i].iter().any(|j| current.contains(j)))
        .collect();
    let targets: Vec<usize> = (0..5)
        .filter(|&i| elevated(i) && !sources.contains(&i) && current.iter().any(|c| links[*c].contains(&i)))
        .collect();
    assert_eq!(current, vec![1, 2]);
    assert_eq!(g.anchor().unwrap().nodes(), current);
    assert_eq!(g.session(SubgraphKind::Source).unwrap().nodes(), sources);
    assert_eq!(g.session(SubgraphKind::Target).unwrap().nodes(), targets);
    assert_eq!(
        g.session(SubgraphKind::Target).unwrap().events[0].kind,
        EventKind::Coupling
    );
}

#[test]
fn end_to_end_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    let model = OrientDecideModel::init(OrientConfig::default(), &mut rng);
    let links = vec![vec![1], vec![2], vec![3], vec![]];
    let cands = candidates(&mut rng, 6);
    let run = || {
        let mut state = JudgmentState::default();
        let mut plans = Vec::new();
        for tick in 0..6u64 {
            let c: Vec<f64> = (0..4).map(|i| 1.0 + ((tick as usize + i) % 3) as f64).collect();
            let s = NodeSignals {
                density: c.iter().map(|x| x / 4.0).collect(),
                coupling: vec![0.2; 4],
                contribution: c,
            };
            let g = build_event_graph(&s, &links, 2.5, tick).unwrap();
            if let Some(j) = model.step(&mut state, &g).unwrap() {
                assert!((j.evidence.iter().map(|e| e.weight).sum::<f64>() - 1.0).abs() < 1e-12);
                plans.push(model.rank(&j.h_t, &cands).unwrap());
            }
        }
        (state, plans)
    };
    let (a, pa) = run();
    let (b, pb) = run();
    assert!(!pa.is_empty());
    assert_eq!(a, b);
    assert_eq!(pa, pb);
}
