use crate::error::{Error, Result};

/// Bucket for a numerical value: `floor((ln z)^2)` above 2, `floor(z)` (not
/// below zero) otherwise. Unparseable or non-finite values yield `None` and
/// are encoded as the unknown token.
pub fn transform_numeric(z: f64) -> Option<i64> {
    if !z.is_finite() {
        return None;
    }
    let bucket = if z > 2.0 {
        let l = z.ln();
        (l * l).floor()
    } else {
        z.floor().max(0.0)
    };
    Some(bucket as i64)
}

/// Parses a raw cell and buckets it; empty cells are missing.
pub fn numeric_token(raw: &str) -> Option<String> {
    let raw = raw.trim();
    if raw.is_empty() {
        return None;
    }
    raw.parse::<f64>()
        .ok()
        .and_then(transform_numeric)
        .map(|b| b.to_string())
}

/// Ratings of 4 and 5 are positive; 1 to 3 are negative.
pub fn binarize_rating(rating: i64) -> Result<u8> {
    match rating {
        4 | 5 => Ok(1),
        1..=3 => Ok(0),
        _ => Err(Error::MalformedRecord {
            line: 0,
            reason: format!("rating {rating} outside 1..=5"),
        }),
    }
}
