use super::autodiff::{Real, Tape};

/// Central-difference step.
pub const FD_EPSILON: f64 = 1e-5;

/// A scalar function of a flat parameter vector, evaluable on any [`Real`].
pub trait Objective {
    fn eval<T: Real>(&self, params: &[T]) -> T;
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
    pub max_rel_error: f64,
}

/// Objective value and its tape gradient.
pub fn value_and_grad<O: Objective>(obj: &O, params: &[f64]) -> (f64, Vec<f64>) {
    let tape = Tape::new();
    let vars = tape.vars(params);
    let out = obj.eval(&vars);
    let g = tape.gradient(out);
    (out.value(), g.wrt_all(&vars))
}

/// Compares tape gradients with central finite differences.
///
/// Relative error per coordinate is `|a - n| / max(|a| + |n|, 1e-6)`.
pub fn grad_check<O: Objective>(obj: &O, params: &[f64]) -> GradCheckReport {
    let (_, analytic) = value_and_grad(obj, params);
    let mut p = params.to_vec();
    let numeric: Vec<f64> = (0..params.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + FD_EPSILON;
            let up = obj.eval::<f64>(&p);
            p[i] = orig - FD_EPSILON;
            let down = obj.eval::<f64>(&p);
            p[i] = orig;
            (up - down) / (2.0 * FD_EPSILON)
        })
        .collect();
    let max_rel_error = analytic
        .iter()
        .zip(&numeric)
        .map(|(a, n)| (a - n).abs() / (a.abs() + n.abs()).max(1e-6))
        .fold(0.0, f64::max);
    GradCheckReport {
        analytic,
        numeric,
        max_rel_error,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Rosen;
    impl Objective for Rosen {
        fn eval<T: Real>(&self, p: &[T]) -> T {
            let a = -p[0] + 1.0;
            let b = p[1] - p[0] * p[0];
            a * a + b * b * 100.0
        }
    }

    #[test]
    fn rosenbrock_gradient() {
        let r = grad_check(&Rosen, &[-0.7, 1.3]);
        assert!(r.max_rel_error < 1e-7, "{r:?}");
    }
}
