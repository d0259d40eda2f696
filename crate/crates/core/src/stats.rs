//! Small fitting helpers shared by the estimators.

/// Least-squares line `y = intercept + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    /// Largest absolute residual.
    pub max_residual: f64,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let max_residual = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).abs())
        .fold(0.0, f64::max);
    Some(LineFit {
        intercept,
        slope,
        max_residual,
    })
}

/// Richardson extrapolation of `v(h)` to `h → 0` from samples at step sizes
/// `hs`, assuming `v(h) = v0 + c1 h + c2 h² + …` (Neville's scheme at `h = 0`).
pub fn richardson(hs: &[f64], vs: &[f64]) -> f64 {
    assert_eq!(hs.len(), vs.len());
    assert!(!hs.is_empty());
    let mut p = vs.to_vec();
    let n = hs.len();
    for k in 1..n {
        for i in (k..n).rev() {
            let (hi, hik) = (hs[i], hs[i - k]);
            p[i] = (hik * p[i] - hi * p[i - 1]) / (hik - hi);
        }
    }
    p[n - 1]
}

/// Observed convergence order from errors at successive refinements by `ratio`.
pub fn observed_order(e_coarse: f64, e_fine: f64, ratio: f64) -> f64 {
    (e_coarse.abs() / e_fine.abs()).ln() / ratio.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_fit_recovers_exact_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 - 0.5 * x).collect();
        let f = fit_line(&xs, &ys).unwrap();
        assert!((f.intercept - 2.0).abs() < 1e-14);
        assert!((f.slope + 0.5).abs() < 1e-14);
        assert!(f.max_residual < 1e-14);
        assert!(fit_line(&[1.0], &[1.0]).is_none());
    }

    #[test]
    fn richardson_removes_leading_terms() {
        let v = |h: f64| 3.0 + 2.0 * h - 7.0 * h * h;
        let hs = [0.1, 0.05, 0.025];
        let vs: Vec<f64> = hs.iter().map(|&h| v(h)).collect();
        assert!((richardson(&hs, &vs) - 3.0).abs() < 1e-12);
        // two levels kill the linear term only
        let r2 = richardson(&hs[1..], &vs[1..]);
        assert!((r2 - (3.0 + 7.0 * 0.05 * 0.025)).abs() < 1e-12);
    }
}
