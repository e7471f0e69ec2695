use brain_core::netcore::{CsrMatrix, Dependency, ElementKind, Layer, MultilayerNetwork};
use brain_core::resilience::cascade::sample_er;
use brain_core::resilience::{
    apply_perturbation, effective_state, enumerate_interventions, reduce_1d, solve_percolation, steady_state, Action,
    CouplingFn, DepRef, DynamicsSpec, InterventionFamily, LinkRef, NodeRef, PercolationOptions, PercolationProblem,
    SelfDynamics, SteadyStateOptions,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn adjacency(adj: &[Vec<usize>]) -> CsrMatrix {
    let n = adj.len();
    let mut t: Vec<(usize, usize, f64)> = adj
        .iter()
        .enumerate()
        .flat_map(|(i, nb)| nb.iter().map(move |&j| (i, j, 1.0)))
        .collect();
    t.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    t.dedup_by(|a, b| a.0 == b.0 && a.1 == b.1);
    CsrMatrix::from_triplets(n, n, &t)
}

/// Circulant k-regular graph: node i linked to i ± 1..k/2.
fn circulant(n: usize, k: usize) -> CsrMatrix {
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|i| (1..=k / 2).flat_map(|d| [(i + d) % n, (i + n - d) % n]).collect())
        .collect();
    adjacency(&adj)
}

#[test]
fn regular_graph_reduction_is_exact() {
    for (f, h) in [
        (SelfDynamics::Logistic { k: 1.0 }, CouplingFn::Linear),
        (
            SelfDynamics::Mutualistic { b: 0.1, c: 1.0, k: 5.0 },
            CouplingFn::Saturating { d: 5.0 },
        ),
        (SelfDynamics::Linear { a: 2.0 }, CouplingFn::Constant { value: 1.0 }),
    ] {
        let spec = DynamicsSpec::new(f, h, circulant(30, 4)).unwrap();
        let red = reduce_1d(&spec).unwrap();
        assert_eq!(red.beta_eff, 4.0);
        let full = steady_state(&spec, &[3.0; 30], SteadyStateOptions::default()).unwrap();
        let one = red.steady_state(3.0, SteadyStateOptions::default()).unwrap();
        // Uniform start on a regular graph: every node follows the reduced ODE.
        for v in &full.x {
            assert!((v - full.x[0]).abs() < 1e-12);
        }
        assert!((full.x[0] - one.x[0]).abs() < 1e-9, "{} vs {}", full.x[0], one.x[0]);
        assert!((effective_state(&spec, &full.x) - full.x[0]).abs() < 1e-12);
    }
}

#[test]
fn er_reduction_within_ten_percent() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let spec = DynamicsSpec::new(
        SelfDynamics::Logistic { k: 1.0 },
        CouplingFn::Linear,
        adjacency(&sample_er(2000, 4.0, &mut rng)),
    )
    .unwrap();
    let red = reduce_1d(&spec).unwrap();
    let opts = SteadyStateOptions {
        tol: 1e-8,
        ..Default::default()
    };
    let full = steady_state(&spec, &vec![1.0; 2000], opts).unwrap();
    assert!(full.stationary);
    let one = red.steady_state(1.0, opts).unwrap().x[0];
    let weighted = effective_state(&spec, &full.x);
    assert!(
        (one - weighted).abs() / weighted < 0.1,
        "reduced {one} vs x_eff {weighted}"
    );
}

#[test]
fn steady_state_is_reproducible() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let spec = DynamicsSpec::new(
        SelfDynamics::Mutualistic { b: 0.1, c: 1.0, k: 5.0 },
        CouplingFn::Saturating { d: 5.0 },
        adjacency(&sample_er(200, 3.0, &mut rng)),
    )
    .unwrap();
    let a = steady_state(&spec, &vec![4.0; 200], Default::default()).unwrap();
    let b = steady_state(&spec, &vec![4.0; 200], Default::default()).unwrap();
    assert_eq!(a, b);
    assert!(a.stationary && a.stable);
}

fn hub_pair(n: usize, c: f64, seed: u64) -> MultilayerNetwork {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layer = |name: &str, rng: &mut ChaCha8Rng| {
        let adj = sample_er(n, c, rng);
        let mut edges: Vec<(usize, usize, f64)> = adj
            .iter()
            .enumerate()
            .flat_map(|(i, nb)| nb.iter().filter(move |&&j| i < j).map(move |&j| (i, j, 1.0)))
            .collect();
        edges.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        edges.dedup_by(|a, b| a.0 == b.0 && a.1 == b.1);
        Layer::uniform(name, n, ElementKind::Enterprise, &edges).unwrap()
    };
    let a = layer("a", &mut rng);
    let b = layer("b", &mut rng);
    let deps = (0..n)
        .flat_map(|i| {
            [
                Dependency {
                    layer_a: 0,
                    node_a: i,
                    layer_b: 1,
                    node_b: i,
                    q: 1.0,
                },
                Dependency {
                    layer_a: 1,
                    node_a: i,
                    layer_b: 0,
                    node_b: i,
                    q: 1.0,
                },
            ]
        })
        .collect();
    MultilayerNetwork::new(vec![a, b], deps, vec![]).unwrap()
}

#[test]
fn autonomous_hubs_raise_giant_component_near_criticality() {
    let net = hub_pair(2000, 2.6, 11);
    let budget = 200; // 5% of 4000 nodes
    let c = enumerate_interventions(&net, &[1.0, 1.0], budget, PercolationOptions::default()).unwrap();
    let auto = c
        .iter()
        .find(|c| c.family == InterventionFamily::Autonomy && c.k == budget)
        .expect("autonomy candidate");
    assert!(auto.delta_s > 0.0, "{auto:?}");
}

#[test]
fn perturbation_leaves_input_untouched() {
    let net = hub_pair(100, 3.0, 2);
    let snapshot = net.clone();
    let e = net.layers()[0].edges()[0];
    let actions = [
        Action::RemoveNodes {
            nodes: vec![NodeRef { layer: 0, node: 3 }, NodeRef { layer: 1, node: 50 }],
        },
        Action::RemoveLinks {
            links: vec![LinkRef {
                layer: 0,
                from: e.0,
                to: e.1,
            }],
        },
        Action::ScaleWeights {
            factor: 0.5,
            layer: None,
        },
        Action::SetCoupling {
            pairs: vec![DepRef::from(&net.deps()[0])],
            q: 0.0,
        },
    ];
    for a in &actions {
        let out = apply_perturbation(&net, a).unwrap();
        assert_ne!(out, net);
        assert_eq!(net, snapshot);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn giant_component_monotone_in_occupation(c in 1.0f64..5.0, q in 0.0f64..1.0, p1 in 0.0f64..1.0, p2 in 0.0f64..1.0) {
        let (lo, hi) = if p1 <= p2 { (p1, p2) } else { (p2, p1) };
        let opts = PercolationOptions::default();
        let a = solve_percolation(&PercolationProblem::erdos_renyi(&[c, c], q, lo).unwrap(), opts).unwrap();
        let b = solve_percolation(&PercolationProblem::erdos_renyi(&[c, c], q, hi).unwrap(), opts).unwrap();
        prop_assert!(a.s[0] <= b.s[0] + 1e-9);
    }

    #[test]
    fn giant_component_monotone_in_coupling(c in 1.0f64..5.0, q1 in 0.0f64..1.0, q2 in 0.0f64..1.0, phi in 0.3f64..1.0) {
        let (lo, hi) = if q1 <= q2 { (q1, q2) } else { (q2, q1) };
        let opts = PercolationOptions::default();
        let a = solve_percolation(&PercolationProblem::erdos_renyi(&[c, c], lo, phi).unwrap(), opts).unwrap();
        let b = solve_percolation(&PercolationProblem::erdos_renyi(&[c, c], hi, phi).unwrap(), opts).unwrap();
        prop_assert!(b.s[0] <= a.s[0] + 1e-9);
        prop_assert!(a.s.iter().chain(&b.s).all(|s| (0.0..=1.0).contains(s)));
    }
}
