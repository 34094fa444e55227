//! Base64 little-endian f32 payloads shared by the centroid and model files.

use base64::engine::general_purpose::STANDARD;
use base64::Engine;

/// Rounds to the nearest f32, the precision every stored weight lives at.
pub(crate) fn to_f32_precision(x: f64) -> f64 {
    x as f32 as f64
}

pub(crate) fn encode_f32<'a>(values: impl IntoIterator<Item = &'a f64>) -> String {
    let mut bytes = Vec::new();
    for &v in values {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    STANDARD.encode(bytes)
}

/// Decodes exactly `expected` floats, rejecting bad base64, wrong lengths and
/// non-finite values.
pub(crate) fn decode_f32(payload: &str, expected: usize) -> Result<Vec<f64>, String> {
    let bytes = STANDARD
        .decode(payload.trim())
        .map_err(|e| format!("invalid base64: {e}"))?;
    if bytes.len() != expected * 4 {
        return Err(format!(
            "expected {} bytes ({} floats), found {}",
            expected * 4,
            expected,
            bytes.len()
        ));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err("payload contains non-finite values".to_string());
    }
    Ok(values)
}
