use crate::error::{Error, Result};

/// Average relative drop of a method against a baseline, in percent.
/// Metrics where higher is better count a gain as a negative drop.
pub fn relative_drop(method: &[f64], baseline: &[f64], higher_better: &[bool]) -> Result<f64> {
    let n = baseline.len();
    if n == 0 || method.len() != n || higher_better.len() != n {
        return Err(Error::invalid("metric vectors must be nonempty and equally long"));
    }
    let mut acc = 0.0;
    for i in 0..n {
        let b = baseline[i];
        if b == 0.0 || !b.is_finite() || !method[i].is_finite() {
            return Err(Error::invalid(format!(
                "metric {}: baseline must be finite and nonzero",
                i + 1
            )));
        }
        let rel = (method[i] - b) / b;
        acc += if higher_better[i] { -rel } else { rel };
    }
    Ok(100.0 * acc / n as f64)
}
