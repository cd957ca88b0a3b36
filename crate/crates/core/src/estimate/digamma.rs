use super::EstimateError;

/// ψ(x) for x > 0: shift up with ψ(x) = ψ(x + 1) − 1/x until x ≥ 6, then
/// the asymptotic expansion.
pub fn digamma(x: f64) -> Result<f64, EstimateError> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(EstimateError::DigammaDomain(x));
    }
    let mut x = x;
    let mut shift = 0.0;
    while x < 6.0 {
        shift -= 1.0 / x;
        x += 1.0;
    }
    let r = 1.0 / (x * x);
    // Bernoulli terms B_2k / (2k x^2k), k = 1..8.
    let series = r
        * (1.0 / 12.0
            - r * (1.0 / 120.0
                - r * (1.0 / 252.0
                    - r * (1.0 / 240.0
                        - r * (1.0 / 132.0
                            - r * (691.0 / 32760.0 - r * (1.0 / 12.0 - r * (3617.0 / 8160.0))))))));
    Ok(shift + x.ln() - 0.5 / x - series)
}
