//! Chi-squared tail probabilities and Pearson correlation.

use libm::{erfc, sqrt};

/// Upper tail of the chi-squared distribution with one degree of freedom.
///
/// `P(χ²₁ > x) = erfc(√(x/2))`. `libm::erfc` is a port of the FreeBSD/musl
/// implementation, accurate to about one ulp, so the tail probability is good
/// to `1e-12` absolute over the whole range.
pub fn chi2_sf_1(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x <= 0.0 {
        return 1.0;
    }
    erfc(sqrt(0.5 * x)).clamp(0.0, 1.0)
}

/// Pearson product-moment correlation. `None` when fewer than two pairs or
/// either axis has zero variance.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let dx = x - mx;
        let dy = y - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / sqrt(sxx * syy)).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    #[test]
    fn chi2_tail_matches_statrs() {
        let dist = ChiSquared::new(1.0).unwrap();
        for &x in &[1e-8, 0.0004, 0.034, 0.22, 1.0, 3.841_458_820_694_124, 10.0, 50.0] {
            let ours = chi2_sf_1(x);
            let reference = dist.sf(x);
            assert!((ours - reference).abs() < 1e-12, "x={x}: {ours} vs {reference}");
        }
    }

    #[test]
    fn chi2_tail_edges() {
        assert_eq!(chi2_sf_1(0.0), 1.0);
        assert_eq!(chi2_sf_1(-1.0), 1.0);
        assert!(chi2_sf_1(1e4) < 1e-300);
        // 95th percentile of χ²₁.
        assert!((chi2_sf_1(3.841_458_820_694_124) - 0.05).abs() < 1e-12);
    }

    #[test]
    fn reported_wald_row_is_consistent() {
        // Table row "Wald test score 0.22, p-value 0.64" on post likes.
        assert!((chi2_sf_1(0.22) - 0.64).abs() < 0.005);
        assert!((chi2_sf_1(0.034) - 0.85).abs() < 0.005);
        assert!(chi2_sf_1(1286.34) < 0.001);
    }

    #[test]
    fn pearson_basics() {
        assert_eq!(pearson(&[0.0, 1.0], &[0.0, 1.0]), Some(1.0));
        assert_eq!(pearson(&[0.0, 1.0], &[1.0, 0.0]), Some(-1.0));
        assert_eq!(pearson(&[0.0, 1.0], &[0.3, 0.3]), None);
        assert_eq!(pearson(&[0.5], &[0.5]), None);
    }
}
