use brain_core::nnblocks::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEEDS: u64 = 10;
const TOL: f64 = 1e-4;

fn randv(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Weighted sum of outputs so every coordinate reaches the loss.
fn project<T: Real>(y: &[T], c: &[f64]) -> T {
    let mut acc = y[0] * c[0];
    for (v, w) in y.iter().zip(c).skip(1) {
        acc = acc + *v * *w;
    }
    acc
}

fn check<O: Objective>(name: &str, obj: &O, params: &[f64]) {
    let r = grad_check(obj, params);
    assert!(r.max_rel_error <= TOL, "{name}: rel error {}", r.max_rel_error);
}

struct DenseObj {
    template: DenseParams,
    c: Vec<f64>,
}

impl Objective for DenseObj {
    fn eval<T: Real>(&self, p: &[T]) -> T {
        let n = param_count(&self.template);
        let layer = unflatten(&self.template, &p[..n]);
        project(&layer.forward(&p[n..]), &self.c)
    }
}

#[test]
fn dense_gradients() {
    for act in [
        Activation::Identity,
        Activation::Relu,
        Activation::LeakyRelu,
        Activation::Sigmoid,
        Activation::Tanh,
        Activation::Elu,
    ] {
        for seed in 0..SEEDS {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let template = DenseParams::init(4, 3, act, &mut rng);
            let mut params = flatten(&template);
            params.extend(randv(4, &mut rng));
            let obj = DenseObj {
                template,
                c: randv(3, &mut rng),
            };
            check(&format!("dense {act:?} seed {seed}"), &obj, &params);
        }
    }
}

struct GluObj {
    c: Vec<f64>,
}

impl Objective for GluObj {
    fn eval<T: Real>(&self, p: &[T]) -> T {
        let n = p.len() / 2;
        project(&glu(&p[..n], &p[n..]), &self.c)
    }
}

#[test]
fn glu_gradients() {
    for seed in 0..SEEDS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params: Vec<f64> = randv(10, &mut rng).iter().map(|x| 3.0 * x).collect();
        check(&format!("glu seed {seed}"), &GluObj { c: randv(5, &mut rng) }, &params);
    }
}

struct GatObj {
    heads: Vec<AttentionHead>,
    nodes: usize,
    dim: usize,
    combine: HeadCombine,
    c: Vec<f64>,
}

impl Objective for GatObj {
    fn eval<T: Real>(&self, p: &[T]) -> T {
        let n = param_count(&self.heads);
        let heads = unflatten(&self.heads, &p[..n]);
        let features: Vec<Vec<T>> = p[n..].chunks(self.dim).map(<[T]>::to_vec).collect();
        let hood: Vec<usize> = (0..self.nodes).collect();
        let (_, out) = multi_head_attend(&heads, &features, 1, &hood, self.combine).unwrap();
        project(&out, &self.c)
    }
}

#[test]
fn attention_gradients() {
    for combine in [HeadCombine::Concat, HeadCombine::Mean] {
        for seed in 0..SEEDS {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (nodes, dim, out, k) = (4, 3, 2, 2);
            let heads: Vec<AttentionHead> = (0..k)
                .map(|_| AttentionHead::init(dim, out, Activation::Elu, &mut rng))
                .collect();
            let mut params = flatten(&heads);
            params.extend(randv(nodes * dim, &mut rng));
            let width = if combine == HeadCombine::Concat { k * out } else { out };
            let obj = GatObj {
                heads,
                nodes,
                dim,
                combine,
                c: randv(width, &mut rng),
            };
            check(&format!("attention {combine:?} seed {seed}"), &obj, &params);
        }
    }
}

struct GateObj {
    gate: Mat,
    experts: Vec<DenseParams>,
    k_top: usize,
    c: Vec<f64>,
}

impl Objective for GateObj {
    fn eval<T: Real>(&self, p: &[T]) -> T {
        let ng = param_count(&self.gate);
        let ne = param_count(&self.experts);
        let gate = unflatten(&self.gate, &p[..ng]);
        let experts = unflatten(&self.experts, &p[ng..ng + ne]);
        let x = &p[ng + ne..];
        let gates = gated_aggregator(x, &gate).unwrap();
        let fs: Vec<Box<dyn Fn(&[T]) -> Vec<T> + '_>> = experts
            .iter()
            .map(|e| Box::new(move |v: &[T]| e.forward(v)) as Box<dyn Fn(&[T]) -> Vec<T>>)
            .collect();
        let refs: Vec<Expert<'_, T>> = fs.iter().map(|f| f.as_ref()).collect();
        project(&mixture_dispatch(x, &gates, &refs, self.k_top).unwrap(), &self.c)
    }
}

#[test]
fn gating_gradients() {
    for seed in 0..SEEDS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (d, n, out) = (3, 4, 2);
        let gate = Mat::glorot(n, d, &mut rng);
        let experts: Vec<DenseParams> = (0..n)
            .map(|_| DenseParams::init(d, out, Activation::Tanh, &mut rng))
            .collect();
        let mut params = flatten(&gate);
        params.extend(flatten(&experts));
        params.extend(randv(d, &mut rng));
        for k_top in [1, 2, n] {
            let obj = GateObj {
                gate: gate.clone(),
                experts: experts.clone(),
                k_top,
                c: randv(out, &mut rng),
            };
            check(&format!("gating k={k_top} seed {seed}"), &obj, &params);
        }
    }
}

struct SoftmaxObj {
    c: Vec<f64>,
    log: bool,
}

impl Objective for SoftmaxObj {
    fn eval<T: Real>(&self, p: &[T]) -> T {
        let y = if self.log { log_softmax(p) } else { softmax(p) };
        project(&y, &self.c)
    }
}

#[test]
fn softmax_gradients() {
    for seed in 0..SEEDS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params: Vec<f64> = randv(6, &mut rng).iter().map(|x| 4.0 * x).collect();
        for log in [false, true] {
            let obj = SoftmaxObj {
                c: randv(6, &mut rng),
                log,
            };
            check(&format!("softmax log={log} seed {seed}"), &obj, &params);
        }
    }
}

struct GruObj {
    template: GruParams,
    input: usize,
    steps: usize,
    c: Vec<f64>,
}

impl Objective for GruObj {
    fn eval<T: Real>(&self, p: &[T]) -> T {
        let n = param_count(&self.template);
        let cell = unflatten(&self.template, &p[..n]);
        let hid = cell.hidden_dim();
        let h0 = &p[n..n + hid];
        let xs: Vec<Vec<T>> = p[n + hid..].chunks(self.input).map(<[T]>::to_vec).collect();
        assert_eq!(xs.len(), self.steps);
        let states = cell.run(&xs, h0);
        project(states.last().unwrap(), &self.c)
    }
}

#[test]
fn gru_gradients() {
    for seed in 0..SEEDS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (input, hidden, steps) = (2, 3, 4);
        let template = GruParams::init(input, hidden, &mut rng);
        let mut params = flatten(&template);
        params.extend(randv(hidden + input * steps, &mut rng));
        let obj = GruObj {
            template,
            input,
            steps,
            c: randv(hidden, &mut rng),
        };
        check(&format!("gru seed {seed}"), &obj, &params);
    }
}

struct OdeObj {
    dim: usize,
    c: Vec<f64>,
}

impl Objective for OdeObj {
    fn eval<T: Real>(&self, p: &[T]) -> T {
        let d = self.dim;
        let w = Mat::from_vec(d, d, p[..d * d].to_vec());
        let f = |h: &[T], _t: f64| -> Vec<T> { w.mul_vec(h).into_iter().map(Real::tanh).collect() };
        let h = neural_ode_integrate(&f, &p[d * d..], 0.0, 1.0, 10).unwrap();
        project(&h, &self.c)
    }
}

#[test]
fn ode_gradients() {
    for seed in 0..SEEDS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = 3;
        let params = randv(d * d + d, &mut rng);
        check(
            &format!("ode seed {seed}"),
            &OdeObj {
                dim: d,
                c: randv(d, &mut rng),
            },
            &params,
        );
    }
}

#[test]
fn normalized_weights_sum_to_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let n = rng.random_range(1..12);
        let logits: Vec<f64> = (0..n).map(|_| rng.random_range(-30.0..30.0)).collect();
        assert!((softmax(&logits).iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        let lse: f64 = log_softmax(&logits).iter().map(|x| x.exp()).sum();
        assert!((lse - 1.0).abs() <= 1e-12);

        let d = rng.random_range(1..5);
        let gate = Mat::glorot(n, d, &mut rng);
        let g = gated_aggregator(&randv(d, &mut rng), &gate).unwrap();
        assert!((g.iter().sum::<f64>() - 1.0).abs() <= 1e-12);

        let head = AttentionHead::init(d, 2, Activation::Identity, &mut rng);
        let features: Vec<Vec<f64>> = (0..n).map(|_| randv(d, &mut rng)).collect();
        let hood: Vec<usize> = (0..n).collect();
        let a = head.attend(&features, 0, &hood).unwrap();
        assert!((a.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn zero_parameter_gru_halves_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..50 {
        let (input, hidden) = (rng.random_range(1..5), rng.random_range(1..6));
        let cell = GruParams::zeros(input, hidden);
        let xs: Vec<Vec<f64>> = (0..6).map(|_| randv(input, &mut rng)).collect();
        let h0: Vec<f64> = randv(hidden, &mut rng).iter().map(|x| 10.0 * x).collect();
        let states = cell.run(&xs, &h0);
        let mut prev = h0;
        for h in states {
            for (a, b) in h.iter().zip(&prev) {
                assert_eq!(*a, 0.5 * b);
            }
            prev = h;
        }
    }
}
