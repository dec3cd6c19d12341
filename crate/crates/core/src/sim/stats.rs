/// Wilson score interval for `errors / trials` at normal quantile `z`.
pub fn wilson_interval(errors: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n);
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Binomial standard error of an error rate.
pub fn standard_error(errors: u64, trials: u64) -> f64 {
    if trials == 0 {
        return 0.0;
    }
    let p = errors as f64 / trials as f64;
    (p * (1.0 - p) / trials as f64).sqrt()
}

/// Standard error of `rate_a - rate_b` over paired trials, from the discordant counts
/// (`a_only`: a errs and b does not).
pub fn paired_difference_se(a_only: u64, b_only: u64, trials: u64) -> f64 {
    if trials == 0 {
        return 0.0;
    }
    let n = trials as f64;
    let d = (a_only as f64 - b_only as f64) / n;
    let second = (a_only + b_only) as f64 / n;
    ((second - d * d).max(0.0) / n).sqrt()
}

/// Abscissa where a decreasing curve crosses `target`, interpolating
/// `log10(y)` linearly between grid points. `None` if it never crosses.
pub fn crossing_db(points: &[(f64, f64)], target: f64) -> Option<f64> {
    let lt = target.log10();
    points.windows(2).find_map(|w| {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        if y0 >= target && y1 <= target && y0 > 0.0 && y1 > 0.0 {
            let (l0, l1) = (y0.log10(), y1.log10());
            if l0 == l1 {
                return Some(x0);
            }
            Some(x0 + (lt - l0) / (l1 - l0) * (x1 - x0))
        } else {
            None
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_contains_the_estimate() {
        let (lo, hi) = wilson_interval(10, 1000, 1.96);
        assert!(lo < 0.01 && 0.01 < hi);
        assert_eq!(wilson_interval(0, 0, 1.96), (0.0, 1.0));
        let (lo, _) = wilson_interval(0, 100, 1.96);
        assert_eq!(lo, 0.0);
    }

    #[test]
    fn crossing_interpolates_in_log_domain() {
        let pts = [(1.0, 1e-1), (2.0, 1e-3)];
        assert!((crossing_db(&pts, 1e-2).unwrap() - 1.5).abs() < 1e-12);
        assert!(crossing_db(&pts, 1e-4).is_none());
    }

    #[test]
    fn paired_se_vanishes_without_discordance() {
        assert_eq!(paired_difference_se(0, 0, 100), 0.0);
        assert!(paired_difference_se(5, 1, 100) > 0.0);
        assert!(standard_error(50, 100) > 0.0);
    }
}
