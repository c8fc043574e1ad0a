use crate::error::{Error, Result};

/// Compares an analytic gradient against central differences.
///
/// `f` returns the value and analytic gradient at a point; only the value is
/// used at perturbed points. Returns the maximum over coordinates of
/// `|analytic - numeric| / max(|analytic|, |numeric|, floor)`.
///
/// A central difference resolves a derivative only to about `ε·|f|/step`
/// (cancellation in `f(p+h) − f(p−h)`). `floor` is 1e7 times that
/// resolution, so roundoff alone contributes under ~1e-7 and coordinates
/// whose true gradient vanishes are judged by absolute error.
pub fn finite_diff_check<F>(mut f: F, p: &[f64], step: f64) -> Result<f64>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::contract(format!("finite-difference step {step} must be > 0")));
    }
    let (f0, analytic) = f(p)?;
    if !f0.is_finite() {
        return Err(Error::NonFinite(format!("f(p) = {f0}")));
    }
    if analytic.len() != p.len() {
        return Err(Error::contract(format!(
            "analytic gradient has length {}, point has {}",
            analytic.len(),
            p.len()
        )));
    }
    let floor = 1e7 * f64::EPSILON * f0.abs().max(1.0) / step;
    let mut q = p.to_vec();
    let mut worst = 0.0f64;
    for i in 0..p.len() {
        q[i] = p[i] + step;
        let (fp, _) = f(&q)?;
        q[i] = p[i] - step;
        let (fm, _) = f(&q)?;
        q[i] = p[i];
        if !(fp.is_finite() && fm.is_finite()) {
            return Err(Error::NonFinite(format!(
                "f evaluated to {fp} / {fm} at coordinate {i}"
            )));
        }
        let numeric = (fp - fm) / (2.0 * step);
        let a = analytic[i];
        let denom = a.abs().max(numeric.abs()).max(floor);
        worst = worst.max((a - numeric).abs() / denom);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_is_exact() {
        let p = [0.3, -1.7, 2.0, 5.5];
        let err = finite_diff_check(
            |q| Ok((q.iter().map(|v| v * v).sum(), q.iter().map(|v| 2.0 * v).collect())),
            &p,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-8, "err = {err}");
    }

    #[test]
    fn constant_gives_zero() {
        let err = finite_diff_check(|q| Ok((4.0, vec![0.0; q.len()])), &[1.0, 2.0], 1e-5).unwrap();
        assert_eq!(err, 0.0);
    }

    #[test]
    fn wrong_gradient_is_detected() {
        let err = finite_diff_check(|q| Ok((q[0] * q[0], vec![q[0]])), &[1.0], 1e-5).unwrap();
        assert!(err > 0.4);
    }

    #[test]
    fn vanishing_gradient_is_judged_absolutely() {
        // f = (1 + 1e-9·q)³ has gradient 3e-9: below what a 1e-5 central
        // difference resolves relative to |f| = 1.
        let f = |q: &[f64]| Ok(((1.0 + 1e-9 * q[0]).powi(3), vec![3e-9 * (1.0 + 1e-9 * q[0]).powi(2)]));
        assert!(finite_diff_check(f, &[0.3], 1e-5).unwrap() < 1e-6);
        // A wrong tiny gradient is still caught once it exceeds the floor.
        let g = |q: &[f64]| Ok(((1.0 + 1e-3 * q[0]).powi(3), vec![0.0]));
        assert!(finite_diff_check(g, &[0.3], 1e-5).unwrap() > 0.9);
    }

    #[test]
    fn rejects_bad_step_and_nan() {
        assert!(finite_diff_check(|_| Ok((0.0, vec![0.0])), &[1.0], 0.0).is_err());
        assert!(matches!(
            finite_diff_check(|q| Ok((q[0].ln(), vec![1.0 / q[0]])), &[1e-6], 1e-5),
            Err(Error::NonFinite(_))
        ));
    }
}
