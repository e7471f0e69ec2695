use serde::{Deserialize, Serialize};

/// Giant-component functional `g(x)`: the fraction of the surviving nodes
/// that belong to the giant component when a random fraction `x` of a
/// layer's nodes survive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GiantComponentFn {
    /// Poisson degrees with mean `c`: `g = 1 - exp(-c x g)`.
    ErdosRenyi { mean_degree: f64 },
    /// Configuration model with degree distribution `p[k]`.
    Degrees { pk: Vec<f64> },
}

impl GiantComponentFn {
    pub fn erdos_renyi(mean_degree: f64) -> Self {
        Self::ErdosRenyi { mean_degree }
    }

    /// Empirical degree distribution of a degree sequence.
    pub fn from_degrees(degrees: &[usize]) -> Self {
        let kmax = degrees.iter().copied().max().unwrap_or(0);
        let mut pk = vec![0.0; kmax + 1];
        if degrees.is_empty() {
            return Self::Degrees { pk: vec![1.0] };
        }
        for &k in degrees {
            pk[k] += 1.0;
        }
        let n = degrees.len() as f64;
        pk.iter_mut().for_each(|p| *p /= n);
        Self::Degrees { pk }
    }

    pub fn mean_degree(&self) -> f64 {
        match self {
            Self::ErdosRenyi { mean_degree } => *mean_degree,
            Self::Degrees { pk } => pk.iter().enumerate().map(|(k, p)| k as f64 * p).sum(),
        }
    }

    /// Second moment over first moment, `<k^2>/<k>`.
    pub fn branching_ratio(&self) -> f64 {
        match self {
            Self::ErdosRenyi { mean_degree } => mean_degree + 1.0,
            Self::Degrees { pk } => {
                let m1: f64 = pk.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
                let m2: f64 = pk.iter().enumerate().map(|(k, p)| (k * k) as f64 * p).sum();
                if m1 > 0.0 {
                    m2 / m1
                } else {
                    0.0
                }
            }
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        match self {
            Self::ErdosRenyi { mean_degree } => er_giant(mean_degree * x),
            Self::Degrees { pk } => degrees_giant(pk, x),
        }
    }
}

/// Largest root of `g = 1 - exp(-a g)`.
pub fn er_giant(a: f64) -> f64 {
    if a <= 1.0 {
        return 0.0;
    }
    // h(g) = 1 - exp(-a g) - g is concave; Newton from g = 1 decreases
    // monotonically onto the largest root.
    let mut g = 1.0;
    for _ in 0..500 {
        let e = (-a * g).exp();
        let h = 1.0 - e - g;
        let dh = a * e - 1.0;
        if dh >= 0.0 {
            break;
        }
        let next = g - h / dh;
        if (next - g).abs() < 1e-16 {
            g = next;
            break;
        }
        g = next;
    }
    g.clamp(0.0, 1.0)
}

fn g0(pk: &[f64], z: f64) -> f64 {
    pk.iter().rev().fold(0.0, |acc, &p| acc * z + p)
}

fn g1(pk: &[f64], z: f64) -> f64 {
    let mean: f64 = pk.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
    if mean == 0.0 {
        return 1.0;
    }
    let mut acc = 0.0;
    for k in (1..pk.len()).rev() {
        acc = acc * z + k as f64 * pk[k];
    }
    acc / mean
}

fn degrees_giant(pk: &[f64], x: f64) -> f64 {
    let mut f = 0.0;
    for _ in 0..100_000 {
        let next = g1(pk, 1.0 - x + x * f);
        if (next - f).abs() < 1e-15 {
            f = next;
            break;
        }
        f = next;
    }
    (1.0 - g0(pk, 1.0 - x + x * f)).clamp(0.0, 1.0)
}
