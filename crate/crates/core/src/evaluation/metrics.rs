use crate::error::{Error, Result};

/// Coefficient of determination `1 - RSS/TSS`. Negative for predictions
/// worse than the mean of `y`.
pub fn r2(y: &[f64], pred: &[f64]) -> Result<f64> {
    if y.len() != pred.len() {
        return Err(Error::DimensionMismatch { expected: y.len(), got: pred.len() });
    }
    if y.len() < 2 {
        return Err(Error::Empty("r2 needs at least two observations".into()));
    }
    if y.iter().chain(pred).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("r2 input".into()));
    }
    let (tss, rss) = sums(y, pred);
    if tss == 0.0 {
        return Err(Error::ZeroVariance("r2 target is constant".into()));
    }
    Ok(1.0 - rss / tss)
}

/// [`r2`] for internal model selection where an error is unwelcome. A
/// constant target scores 1 when predicted exactly and 0 otherwise;
/// non-finite predictions score NaN so they never win a comparison.
pub fn r2_lenient(y: &[f64], pred: &[f64]) -> f64 {
    debug_assert_eq!(y.len(), pred.len());
    if y.is_empty() || pred.iter().any(|v| !v.is_finite()) {
        return f64::NAN;
    }
    let (tss, rss) = sums(y, pred);
    if tss > 0.0 {
        1.0 - rss / tss
    } else if rss == 0.0 {
        1.0
    } else {
        0.0
    }
}

fn sums(y: &[f64], pred: &[f64]) -> (f64, f64) {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let tss = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    let rss = y.iter().zip(pred).map(|(a, b)| (a - b) * (a - b)).sum();
    (tss, rss)
}
