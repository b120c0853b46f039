//! Central finite-difference gradient oracle.

use crate::error::Result;
use crate::params::ParamStore;
use crate::tensor::Tensor;

pub const DEFAULT_EPS: f64 = 1e-5;

/// Smallest denominator of the relative error. Central differences at
/// `DEFAULT_EPS` on an O(1) loss resolve gradients only to about 1e-10, so
/// entries with `|analytic| + |numeric|` below this are judged on an
/// absolute scale instead.
pub const ERROR_FLOOR: f64 = 1e-5;

/// Detailed outcome of [`grad_check_report`].
#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Parameter name and flat index where the maximum occurred.
    pub worst: Option<(String, usize)>,
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
    /// Entries whose error used [`ERROR_FLOOR`] as the denominator.
    pub floored: usize,
}

/// Largest `|analytic - numeric| / max(ERROR_FLOOR, |analytic| + |numeric|)` over
/// every entry of every parameter in `params`.
///
/// `f` must be deterministic for fixed parameter values. It is called once
/// for the analytic gradient and twice per entry for the central difference.
pub fn grad_check<F>(f: F, params: &ParamStore, eps: f64) -> Result<f64>
where
    F: Fn(&ParamStore) -> Result<Tensor>,
{
    grad_check_report(f, params, eps).map(|r| r.max_relative_error)
}

pub fn grad_check_report<F>(f: F, params: &ParamStore, eps: f64) -> Result<GradCheckReport>
where
    F: Fn(&ParamStore) -> Result<Tensor>,
{
    params.zero_grad();
    f(params)?.backward()?;
    let analytic: Vec<Vec<f64>> = params
        .iter()
        .map(|p| {
            p.tensor
                .grad()
                .unwrap_or_else(|| vec![0.0; p.tensor.numel()])
        })
        .collect();
    params.zero_grad();

    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst: None,
        analytic: 0.0,
        numeric: 0.0,
        checked: 0,
        floored: 0,
    };
    for (p, grad) in params.iter().zip(&analytic) {
        let original = p.tensor.to_vec();
        let mut probe = original.clone();
        for i in 0..original.len() {
            probe[i] = original[i] + eps;
            p.tensor.set_values(&probe)?;
            let plus = f(params)?.item();
            probe[i] = original[i] - eps;
            p.tensor.set_values(&probe)?;
            let minus = f(params)?.item();
            probe[i] = original[i];
            p.tensor.set_values(&original)?;

            let numeric = (plus - minus) / (2.0 * eps);
            let scale = grad[i].abs() + numeric.abs();
            let err = (grad[i] - numeric).abs() / scale.max(ERROR_FLOOR);
            report.checked += 1;
            if scale < ERROR_FLOOR {
                report.floored += 1;
            }
            if err > report.max_relative_error || report.worst.is_none() {
                report.max_relative_error = err;
                report.worst = Some((p.name.clone(), i));
                report.analytic = grad[i];
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_function_is_exact() {
        let mut store = ParamStore::new();
        store
            .insert(
                "a",
                Tensor::param(&[2, 3], vec![0.5, -1.0, 2.0, 3.0, 0.1, -0.2]).unwrap(),
            )
            .unwrap();
        store
            .insert("b", Tensor::param(&[4], vec![1.0; 4]).unwrap())
            .unwrap();
        let err = grad_check(
            |s| s.get("a").unwrap().sum().add(&s.get("b").unwrap().sum()),
            &store,
            DEFAULT_EPS,
        )
        .unwrap();
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn leaves_parameters_and_gradients_clean() {
        let mut store = ParamStore::new();
        let x = store
            .insert("x", Tensor::param(&[3], vec![0.3, -0.7, 1.1]).unwrap())
            .unwrap();
        grad_check(
            |s| Ok(s.get("x").unwrap().tanh().sum()),
            &store,
            DEFAULT_EPS,
        )
        .unwrap();
        assert_eq!(x.to_vec(), vec![0.3, -0.7, 1.1]);
        assert_eq!(x.grad().unwrap(), vec![0.0; 3]);
    }
}
