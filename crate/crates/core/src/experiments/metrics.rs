use crate::error::{Error, Result};

/// Number of trailing episodes averaged by [`final_score`].
pub const FINAL_WINDOW: usize = 100;

/// Mean of the last `min(100, n)` episode scores; 0 for an empty history.
pub fn final_score(scores: &[f64]) -> f64 {
    if scores.is_empty() {
        return 0.0;
    }
    let tail = &scores[scores.len().saturating_sub(FINAL_WINDOW)..];
    tail.iter().sum::<f64>() / tail.len() as f64
}

/// Best episode score; 0 for an empty history.
pub fn max_score(scores: &[f64]) -> f64 {
    scores.iter().copied().fold(None, |m: Option<f64>, s| Some(m.map_or(s, |m| m.max(s)))).unwrap_or(0.0)
}

pub fn normalized_score(raw: f64, total: f64) -> Result<f64> {
    if !(total > 0.0) {
        return Err(Error::Invalid(format!("total score must be positive, got {total}")));
    }
    Ok(raw / total)
}
