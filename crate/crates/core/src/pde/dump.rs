//! Bit-exact field dump codec: one ASCII header line
//! `plasma-field v1 res=<R> mu=<mu>\n`, then `res^3` little-endian 64-bit
//! floats, row-major in node order.

use crate::error::{DomainError, Result};
use crate::pde::{build_grid, GridField};

/// Serialize a field. `mu` is printed with shortest round-trip formatting,
/// so decoding recovers the identical bits.
pub fn encode_field(field: &GridField) -> Vec<u8> {
    let header = format!("plasma-field v1 res={} mu={}\n", field.grid.res(), field.mu);
    let mut out = Vec::with_capacity(header.len() + field.values.len() * 8);
    out.extend_from_slice(header.as_bytes());
    for v in &field.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Decode a dump produced by [`encode_field`]. The grid is rebuilt from the
/// header resolution and the field is re-validated (exterior zeros, positive
/// mu), so a corrupted payload is rejected rather than returned.
pub fn decode_field(bytes: &[u8]) -> Result<GridField> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| DomainError::Invalid("field dump has no header line".into()))?;
    let header = std::str::from_utf8(&bytes[..nl])
        .map_err(|_| DomainError::Invalid("field dump header is not ASCII".into()))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 4 || parts[0] != "plasma-field" || parts[1] != "v1" {
        return Err(DomainError::Invalid(format!("unrecognized dump header `{header}`")).into());
    }
    let res: usize = parts[2]
        .strip_prefix("res=")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| DomainError::Invalid(format!("bad res field in `{header}`")))?;
    let mu: f64 = parts[3]
        .strip_prefix("mu=")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| DomainError::Invalid(format!("bad mu field in `{header}`")))?;

    let grid = build_grid(res)?;
    let body = &bytes[nl + 1..];
    let expected = res * res * res * 8;
    if body.len() != expected {
        return Err(DomainError::Invalid(format!(
            "dump body has {} bytes, expected {expected} for res={res}",
            body.len()
        ))
        .into());
    }
    let values: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let field = GridField { grid, values, mu };
    field.validate()?;
    Ok(field)
}
