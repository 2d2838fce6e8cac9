use crate::{Error, Result};

/// Classical fixed-step fourth-order Runge-Kutta from t = 0 to `t_final`,
/// advancing `state` in place. Errors as soon as the state goes non-finite.
pub(crate) fn integrate<F>(
    model_name: &str,
    rhs: F,
    state: &mut [f64],
    t_final: f64,
    steps: usize,
) -> Result<()>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = state.len();
    let h = t_final / steps as f64;
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    for step in 0..steps {
        rhs(state, &mut k1);
        for i in 0..n {
            tmp[i] = state[i] + 0.5 * h * k1[i];
        }
        rhs(&tmp, &mut k2);
        for i in 0..n {
            tmp[i] = state[i] + 0.5 * h * k2[i];
        }
        rhs(&tmp, &mut k3);
        for i in 0..n {
            tmp[i] = state[i] + h * k3[i];
        }
        rhs(&tmp, &mut k4);
        for i in 0..n {
            state[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if state.iter().any(|v| !v.is_finite()) {
            return Err(Error::Model {
                model: model_name.to_string(),
                reason: format!("state went non-finite at step {} of {}", step + 1, steps),
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_fourth_order() {
        // dy/dt = -y, y(0) = 1, exact e^{-1}; halving the step must shrink
        // the error by about 2^4.
        let run = |steps| {
            let mut y = [1.0];
            integrate("test", |s, d| d[0] = -s[0], &mut y, 1.0, steps).unwrap();
            (y[0] - (-1.0f64).exp()).abs()
        };
        let e1 = run(50);
        let e2 = run(100);
        assert!(e2 > 0.0);
        let order = (e1 / e2).log2();
        assert!((3.7..4.3).contains(&order), "observed order {order}");
    }

    #[test]
    fn blowup_is_reported() {
        // dy/dt = y^2 from y(0) = 1 blows up at t = 1.
        let mut y = [1.0];
        let r = integrate("test", |s, d| d[0] = s[0] * s[0], &mut y, 2.0, 100);
        assert!(matches!(r, Err(Error::Model { .. })));
    }
}
