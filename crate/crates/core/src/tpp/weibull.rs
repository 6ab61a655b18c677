//! Weibull density, survival, and quantile in log space.
//!
//! pdf:      f(t; k, l) = (k/l) (t/l)^(k-1) exp(-(t/l)^k)
//! survival: S(t; k, l) = exp(-(t/l)^k)

/// log f(t; k, lambda) for t > 0.
pub fn log_pdf(t: f64, shape: f64, scale: f64) -> f64 {
    let log_ratio = t.ln() - scale.ln();
    shape.ln() - scale.ln() + (shape - 1.0) * log_ratio - (shape * log_ratio).exp()
}

/// log S(t; k, lambda); zero for t <= 0 (no time elapsed, nothing survived).
pub fn log_survival(t: f64, shape: f64, scale: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    -(shape * (t.ln() - scale.ln())).exp()
}

/// Inverse survival: the t with S(t) = s, i.e. t = lambda * (-ln s)^(1/k).
/// Feeding a uniform draw in (0, 1] gives a Weibull sample.
pub fn quantile_from_survival(s: f64, shape: f64, scale: f64) -> f64 {
    scale * (-s.ln()).powf(1.0 / shape)
}
