use crate::{Error, Result};

/// Desk-scale lower density of `A ⊆ {1, 2, ...}`: the minimum of
/// `#{n <= m : n in A} / m` over `m` in `[ceil(N/2), N]`. Elements below 1
/// are ignored; `prefix` must be strictly increasing.
pub fn lower_density(prefix: &[u64], horizon: u64) -> Result<f64> {
    if horizon < 1 {
        return Err(Error::InvalidInput("horizon must be at least 1".into()));
    }
    if let Some(w) = prefix.windows(2).find(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput(format!(
            "prefix is not strictly increasing at {} >= {}",
            w[0], w[1]
        )));
    }
    let start = horizon.div_ceil(2).max(1);
    let mut it = prefix.iter().filter(|&&n| n >= 1).peekable();
    let mut count = 0u64;
    while it.next_if(|&&n| n < start).is_some() {
        count += 1;
    }
    let mut best = f64::INFINITY;
    for m in start..=horizon {
        while it.next_if(|&&n| n <= m).is_some() {
            count += 1;
        }
        best = best.min(count as f64 / m as f64);
    }
    Ok(best)
}

/// Continuous analogue for a union of disjoint closed intervals in
/// `[0, horizon]`: the minimum of `|M ∩ [0, x]| / x` over `x` in
/// `[horizon/2, horizon]`. The ratio decreases on gaps and increases on the
/// intervals, so it is evaluated exactly at `horizon/2`, `horizon` and every
/// interval start in between.
pub fn continuous_lower_density(intervals: &[(f64, f64)], horizon: f64) -> Result<f64> {
    if !(horizon > 0.0) {
        return Err(Error::InvalidInput("horizon must be positive".into()));
    }
    let mut iv = intervals.to_vec();
    iv.sort_by(|a, b| a.0.total_cmp(&b.0));
    for &(a, b) in &iv {
        if !(0.0 <= a && a <= b && b <= horizon) {
            return Err(Error::InvalidInput(format!(
                "interval [{a}, {b}] is not inside [0, {horizon}]"
            )));
        }
    }
    if let Some(w) = iv.windows(2).find(|w| w[1].0 < w[0].1) {
        return Err(Error::InvalidInput(format!(
            "intervals [{}, {}] and [{}, {}] overlap",
            w[0].0, w[0].1, w[1].0, w[1].1
        )));
    }
    let measure_to = |x: f64| -> f64 {
        iv.iter()
            .take_while(|(a, _)| *a < x)
            .map(|(a, b)| b.min(x) - a)
            .sum()
    };
    let half = horizon / 2.0;
    let mut candidates = vec![half, horizon];
    candidates.extend(iv.iter().map(|(a, _)| *a).filter(|a| (half..=horizon).contains(a)));
    Ok(candidates
        .into_iter()
        .filter(|x| *x > 0.0)
        .map(|x| measure_to(x) / x)
        .fold(f64::INFINITY, f64::min))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_progressions() {
        let evens: Vec<u64> = (1..=5000).map(|k| 2 * k).collect();
        assert!((lower_density(&evens, 10_000).unwrap() - 0.5).abs() < 1e-3);
        let all: Vec<u64> = (0..=100).collect();
        assert_eq!(lower_density(&all, 100).unwrap(), 1.0);
        assert_eq!(lower_density(&[], 10).unwrap(), 0.0);
    }

    #[test]
    fn squares_have_density_zero() {
        let squares: Vec<u64> = (1..=1000).map(|k| k * k).collect();
        let d = lower_density(&squares, 1_000_000).unwrap();
        // oracle: brute force over isqrt(m) / m
        let oracle = (500_000u64..=1_000_000)
            .map(|m| (m as f64).sqrt().floor() / m as f64)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(d, oracle);
        assert!(d < 1e-3);
    }

    #[test]
    fn rejects_bad_prefix() {
        assert!(lower_density(&[3, 3], 10).is_err());
        assert!(lower_density(&[1], 0).is_err());
    }

    #[test]
    fn continuous_examples() {
        let iv: Vec<(f64, f64)> = (0..500).map(|k| (2.0 * k as f64, 2.0 * k as f64 + 1.0)).collect();
        assert!((continuous_lower_density(&iv, 1000.0).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(continuous_lower_density(&[], 10.0).unwrap(), 0.0);
        let harmonic: Vec<(f64, f64)> = (1..1000).map(|k| (k as f64, k as f64 + 1.0 / k as f64)).collect();
        assert!(continuous_lower_density(&harmonic, 1000.0).unwrap() <= 0.02);
        assert!(continuous_lower_density(&[(0.0, 2.0), (1.0, 3.0)], 10.0).is_err());
    }
}
