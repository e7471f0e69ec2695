use super::autodiff::Real;
use super::NnError;

/// Classical fixed-step fourth-order Runge-Kutta from `t0` to `t1`.
pub fn neural_ode_integrate<T: Real>(
    f: &dyn Fn(&[T], f64) -> Vec<T>,
    h0: &[T],
    t0: f64,
    t1: f64,
    steps: usize,
) -> Result<Vec<T>, NnError> {
    if steps == 0 || !(t1 > t0) {
        return Err(NnError::InvalidArgument(format!(
            "need steps >= 1 and t1 > t0 (steps={steps}, t0={t0}, t1={t1})"
        )));
    }
    let dt = (t1 - t0) / steps as f64;
    let mut h = h0.to_vec();
    for s in 0..steps {
        let t = t0 + s as f64 * dt;
        h = rk4_step(f, &h, t, dt);
        if h.iter().any(|v| !v.value().is_finite()) {
            return Err(NnError::NonFinite { step: s });
        }
    }
    Ok(h)
}

pub fn rk4_step<T: Real>(f: &dyn Fn(&[T], f64) -> Vec<T>, h: &[T], t: f64, dt: f64) -> Vec<T> {
    let axpy = |a: &[T], k: &[T], s: f64| -> Vec<T> { a.iter().zip(k).map(|(&x, &d)| x + d * s).collect() };
    let k1 = f(h, t);
    let k2 = f(&axpy(h, &k1, dt / 2.0), t + dt / 2.0);
    let k3 = f(&axpy(h, &k2, dt / 2.0), t + dt / 2.0);
    let k4 = f(&axpy(h, &k3, dt), t + dt);
    (0..h.len())
        .map(|i| h[i] + (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (dt / 6.0))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_field_is_identity() {
        let f = |h: &[f64], _t: f64| vec![0.0; h.len()];
        assert_eq!(
            neural_ode_integrate(&f, &[1.5, -2.0], 0.0, 3.0, 7).unwrap(),
            vec![1.5, -2.0]
        );
    }

    #[test]
    fn exponential_decay() {
        let f = |h: &[f64], _t: f64| vec![-h[0]];
        let h = neural_ode_integrate(&f, &[1.0], 0.0, 1.0, 100).unwrap();
        assert!((h[0] - (-1f64).exp()).abs() < 1e-6);
        assert!((h[0] - 0.367879).abs() < 1e-6);
    }

    #[test]
    fn invalid_interval() {
        let f = |h: &[f64], _t: f64| h.to_vec();
        assert!(neural_ode_integrate(&f, &[1.0], 1.0, 1.0, 10).is_err());
        assert!(neural_ode_integrate(&f, &[1.0], 0.0, 1.0, 0).is_err());
    }

    #[test]
    fn blow_up_detected() {
        let f = |h: &[f64], _t: f64| vec![h[0] * h[0]];
        assert!(matches!(
            neural_ode_integrate(&f, &[1e200], 0.0, 1.0, 10),
            Err(NnError::NonFinite { .. })
        ));
    }
}
