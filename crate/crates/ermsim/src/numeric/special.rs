//! Small special-function helpers.

/// Table of `ln(k!)` for `k = 0..=nmax`, built by compensated summation of
/// `ln k` (exact to a few ulp for any practical table size).
pub fn ln_factorial_table(nmax: usize) -> Vec<f64> {
    let mut table = Vec::with_capacity(nmax + 1);
    table.push(0.0);
    let mut sum = 0.0;
    let mut comp = 0.0;
    for k in 1..=nmax {
        // Kahan update of sum += ln k.
        let y = (k as f64).ln() - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        table.push(sum);
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_factorials_exact() {
        let t = ln_factorial_table(10);
        let exact: [f64; 11] =
            [1.0, 1.0, 2.0, 6.0, 24.0, 120.0, 720.0, 5040.0, 40320.0, 362880.0, 3628800.0];
        for (k, &f) in exact.iter().enumerate() {
            assert!((t[k] - f.ln()).abs() < 1e-13, "k = {}", k);
        }
    }

    #[test]
    fn large_argument_against_stirling() {
        let n = 5000;
        let t = ln_factorial_table(n);
        let x = n as f64;
        // Stirling series with the 1/(12n) correction is accurate to
        // ~1/(360 n³) here.
        let stirling = x * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI * x).ln() + 1.0 / (12.0 * x);
        assert!((t[n] - stirling).abs() < 1e-9);
    }
}
