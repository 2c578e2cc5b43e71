//! Small helpers for judging Monte-Carlo estimates.

/// Two-sided Wilson score interval for `successes` out of `trials` at
/// standard-normal quantile `z`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Standard deviation of a binomial proportion with success probability `p`.
pub fn binomial_sigma(p: f64, trials: u64) -> f64 {
    (p * (1.0 - p) / trials as f64).sqrt()
}

/// Whether `observed` successes are within `k` standard deviations of the
/// expectation under `p`.
pub fn within_sigmas(observed: u64, trials: u64, p: f64, k: f64) -> bool {
    let rate = observed as f64 / trials as f64;
    (rate - p).abs() <= k * binomial_sigma(p, trials)
}

/// Normal quantile for a two-sided 99% interval.
pub const Z_99: f64 = 2.575_829_303_548_901;
