//! Deterministic low-discrepancy sequences used wherever a dense or
//! space-filling sample is needed.  A fixed index offset stands in for a seed.

/// Radical-inverse (van der Corput) value of `n` in the given base, in [0,1).
pub fn van_der_corput(mut n: u64, base: u64) -> f64 {
    let mut value = 0.0;
    let inv = 1.0 / base as f64;
    let mut scale = inv;
    while n > 0 {
        value += (n % base) as f64 * scale;
        n /= base;
        scale *= inv;
    }
    value
}

/// 2-d Halton point (bases 2 and 3).
pub fn halton2(n: u64) -> (f64, f64) {
    (van_der_corput(n, 2), van_der_corput(n, 3))
}

/// 4-d Halton point (bases 2, 3, 5, 7); used for point/displacement pairs.
pub fn halton4(n: u64) -> (f64, f64, f64, f64) {
    (
        van_der_corput(n, 2),
        van_der_corput(n, 3),
        van_der_corput(n, 5),
        van_der_corput(n, 7),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base2_prefix_matches_known_values() {
        let got: Vec<f64> = (1..=6).map(|n| van_der_corput(n, 2)).collect();
        assert_eq!(got, vec![0.5, 0.25, 0.75, 0.125, 0.625, 0.375]);
    }

    #[test]
    fn values_fill_unit_interval() {
        // After 2^k points the largest gap of the base-2 sequence is 2^-k.
        let mut pts: Vec<f64> = (1..=64).map(|n| van_der_corput(n, 2)).collect();
        pts.sort_by(f64::total_cmp);
        let mut prev = 0.0;
        let mut max_gap: f64 = 0.0;
        for &p in &pts {
            max_gap = max_gap.max(p - prev);
            prev = p;
        }
        max_gap = max_gap.max(1.0 - prev);
        assert!(max_gap <= 1.0 / 32.0 + 1e-15, "gap {max_gap}");
    }
}
