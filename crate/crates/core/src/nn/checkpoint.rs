//! Network checkpoints.
//!
//! Layout:
//!
//! 1. `DVNET1\n`
//! 2. the architecture text (see [`super::spec`]) followed by `;seed=<u64>\n`
//! 3. every parameter value as a little-endian IEEE-754 `f64`, tensors in
//!    [`Network`] parameter order, each tensor row-major
//! 4. a little-endian `u64` holding the byte length of sections 1-3

use super::network::Network;
use super::spec::ArchitectureSpec;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8] = b"DVNET1\n";

pub fn serialize_network(net: &Network) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + 8 * net.param_count());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(net.spec().to_text().as_bytes());
    out.extend_from_slice(format!(";seed={}\n", net.seed()).as_bytes());
    for p in net.params() {
        for v in p.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let len = out.len() as u64;
    out.extend_from_slice(&len.to_le_bytes());
    out
}

pub fn deserialize_network(bytes: &[u8]) -> Result<Network> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        let offset = bytes.iter().zip(MAGIC).take_while(|(a, b)| a == b).count();
        return Err(Error::Parse { offset, reason: "missing DVNET1 header".into() });
    }
    let body_start = MAGIC.len();
    let nl = bytes[body_start..]
        .iter()
        .position(|&b| b == b'\n')
        .ok_or(Error::Parse { offset: bytes.len(), reason: "unterminated architecture line".into() })?;
    let line_end = body_start + nl;
    let line = std::str::from_utf8(&bytes[body_start..line_end])
        .map_err(|e| Error::Parse { offset: body_start + e.valid_up_to(), reason: "architecture line is not UTF-8".into() })?;
    let spec = ArchitectureSpec::from_text(line).map_err(|e| match e {
        Error::Parse { reason, .. } => Error::Parse { offset: body_start, reason },
        other => other,
    })?;
    let seed = line
        .split(';')
        .find_map(|f| f.strip_prefix("seed="))
        .ok_or(Error::Parse { offset: body_start, reason: "missing seed field".into() })?
        .parse::<u64>()
        .map_err(|_| Error::Parse { offset: body_start, reason: "bad seed field".into() })?;

    if bytes.len() < line_end + 1 + 8 {
        return Err(Error::Parse { offset: bytes.len(), reason: "truncated before length footer".into() });
    }
    let footer_at = bytes.len() - 8;
    let declared = u64::from_le_bytes(bytes[footer_at..].try_into().expect("8 bytes"));
    if declared != footer_at as u64 {
        return Err(Error::Parse {
            offset: footer_at,
            reason: format!("length footer says {declared} bytes, found {footer_at}"),
        });
    }
    let payload = &bytes[line_end + 1..footer_at];
    if payload.len() % 8 != 0 {
        return Err(Error::Parse { offset: footer_at, reason: "parameter block is not a whole number of f64".into() });
    }
    let template = Network::new(spec.clone(), seed)?;
    let expected: usize = template.param_count() * 8;
    if payload.len() != expected {
        return Err(Error::Integrity(format!(
            "architecture needs {} parameter bytes, checkpoint has {}",
            expected,
            payload.len()
        )));
    }
    let mut values = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    let params = template
        .params()
        .iter()
        .map(|p| Tensor::new(p.shape().to_vec(), values.by_ref().take(p.len()).collect()))
        .collect::<Result<Vec<_>>>()?;
    Network::with_params(spec, seed, params)
}
