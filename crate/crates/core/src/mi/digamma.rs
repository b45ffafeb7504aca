use super::MiError;

/// Recurrence target before switching to the asymptotic series.
const LIFT: f64 = 10.0;

/// Coefficients `B_2k / (2k)` for k = 1..=7.
const SERIES: [f64; 7] = [
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
];

/// Digamma function for `x > 0`.
///
/// Lifts `x` to at least 10 with `psi(x) = psi(x + 1) - 1/x`, then evaluates
/// `ln x - 1/(2x) - sum_k B_2k / (2k x^2k)` through `x^-14`. Absolute error is
/// below 1e-15 once lifted.
pub fn digamma(x: f64) -> Result<f64, MiError> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(MiError::DigammaDomain(x));
    }
    Ok(digamma_positive(x))
}

pub(crate) fn digamma_positive(mut x: f64) -> f64 {
    let mut shift = 0.0;
    while x < LIFT {
        shift += 1.0 / x;
        x += 1.0;
    }
    let inv2 = 1.0 / (x * x);
    // Horner in 1/x^2: sum_k c_k t^k with t = 1/x^2.
    let series = SERIES.iter().rev().fold(0.0, |acc, &c| (acc + c) * inv2);
    x.ln() - 0.5 / x - series - shift
}
