//! Central-difference verification of analytic gradients.

use super::tensor::DenseTensor;

#[derive(Debug, Clone)]
pub struct FdReport {
    pub max_rel_error: f64,
    pub checked: usize,
    /// (tensor index, coordinate, analytic, finite difference) of the worst case
    pub worst: Option<(usize, usize, f64, f64)>,
}

impl FdReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_error < tol
    }
}

/// Compare analytic gradients against central differences with step `h` on a
/// deterministic subset of coordinates (at most `max_coords` per tensor).
pub fn finite_diff_check<F>(
    loss_fn: F,
    params: &[DenseTensor],
    analytic: &[DenseTensor],
    h: f64,
    max_coords: usize,
) -> FdReport
where
    F: Fn(&[DenseTensor]) -> f64,
{
    assert!(h > 0.0);
    let mut work: Vec<DenseTensor> = params.to_vec();
    let mut report = FdReport { max_rel_error: 0.0, checked: 0, worst: None };
    for (ti, p) in params.iter().enumerate() {
        let n = p.values.len();
        let stride = n.div_ceil(max_coords.max(1)).max(1);
        for k in (0..n).step_by(stride) {
            let orig = p.values[k];
            work[ti].values[k] = orig + h;
            let fa = loss_fn(&work);
            work[ti].values[k] = orig - h;
            let fb = loss_fn(&work);
            work[ti].values[k] = orig;
            let fd = (fa - fb) / (2.0 * h);
            let an = analytic[ti].values[k];
            let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1.0);
            report.checked += 1;
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = Some((ti, k, an, fd));
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn x_squared_at_three() {
        let params = vec![DenseTensor::scalar(3.0)];
        let analytic = vec![DenseTensor::scalar(6.0)];
        let report = finite_diff_check(
            |p| p[0].item() * p[0].item(),
            &params,
            &analytic,
            1e-5,
            16,
        );
        assert!(report.max_rel_error < 1e-9, "{report:?}");
    }

    #[test]
    fn corrupted_gradient_is_caught() {
        let params = vec![DenseTensor::scalar(3.0)];
        let analytic = vec![DenseTensor::scalar(5.5)];
        let report = finite_diff_check(
            |p| p[0].item() * p[0].item(),
            &params,
            &analytic,
            1e-5,
            16,
        );
        assert!(!report.passes(1e-4), "{report:?}");
    }
}
