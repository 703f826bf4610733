//! Encoder checkpoints: a text header listing every tensor's name and shape,
//! followed by the values as little-endian `f64` in header order.
//!
//! ```text
//! brainfreq-checkpoint v1
//! seed 7
//! convention s0=identity
//! tensor tgnn.w0 64 64
//! ...
//! end_header
//! <binary>
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::encoders::ParamTensors;
use crate::error::{Error, Result};

const MAGIC: &str = "brainfreq-checkpoint v1";
const CONVENTION: &str = "convention s0=identity";
const END: &str = "end_header\n";

pub fn encode(params: &impl ParamTensors, seed: u64) -> Vec<u8> {
    let tensors = params.named_tensors();
    let mut header = format!("{MAGIC}\nseed {seed}\n{CONVENTION}\n");
    for (name, shape, _) in &tensors {
        let dims: Vec<String> = shape.iter().map(|d| d.to_string()).collect();
        header.push_str(&format!("tensor {name} {}\n", dims.join(" ")));
    }
    header.push_str(END);
    let mut out = header.into_bytes();
    for (_, _, data) in &tensors {
        for v in data.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

/// Overwrites `params` in place from `bytes`; names and shapes must match.
/// Returns the stored seed.
pub fn decode_into(bytes: &[u8], params: &mut impl ParamTensors) -> Result<u64> {
    let bad = |msg: String| Error::Config(format!("malformed checkpoint: {msg}"));
    let end = bytes
        .windows(END.len())
        .position(|w| w == END.as_bytes())
        .ok_or_else(|| bad("missing end_header".into()))?;
    let header = std::str::from_utf8(&bytes[..end]).map_err(|_| bad("header is not UTF-8".into()))?;
    let mut lines = header.lines();
    if lines.next() != Some(MAGIC) {
        return Err(bad("unknown format tag".into()));
    }
    let seed = lines
        .next()
        .and_then(|l| l.strip_prefix("seed "))
        .and_then(|s| s.parse::<u64>().ok())
        .ok_or_else(|| bad("missing seed line".into()))?;
    if lines.next() != Some(CONVENTION) {
        return Err(bad("unsupported layer convention".into()));
    }
    let expected: Vec<(String, Vec<usize>)> = params
        .named_tensors()
        .into_iter()
        .map(|(n, s, _)| (n, s))
        .collect();
    let mut found = Vec::new();
    for line in lines {
        let mut parts = line.split_whitespace();
        if parts.next() != Some("tensor") {
            return Err(bad(format!("unexpected header line `{line}`")));
        }
        let name = parts.next().ok_or_else(|| bad("tensor without name".into()))?.to_string();
        let shape = parts
            .map(|p| p.parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| bad(format!("bad shape for {name}")))?;
        found.push((name, shape));
    }
    if found != expected {
        return Err(Error::DimensionMismatch(
            "checkpoint tensors do not match the model layout".into(),
        ));
    }
    let mut body = &bytes[end + END.len()..];
    let total: usize = expected.iter().map(|(_, s)| s.iter().product::<usize>()).sum();
    if body.len() != total * 8 {
        return Err(bad(format!("expected {} data bytes, found {}", total * 8, body.len())));
    }
    for t in params.tensors_mut() {
        for v in t.iter_mut() {
            let (chunk, rest) = body.split_at(8);
            *v = f64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
            body = rest;
        }
    }
    Ok(seed)
}

/// SHA-256 of the tensor data, hex encoded. Equal fingerprints mean
/// bit-identical parameters.
pub fn fingerprint(params: &impl ParamTensors) -> String {
    let mut h = Sha256::new();
    for (name, shape, data) in params.named_tensors() {
        h.update(name.as_bytes());
        for d in shape {
            h.update((d as u64).to_le_bytes());
        }
        for v in data {
            h.update(v.to_le_bytes());
        }
    }
    hex(&h.finalize())
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn save(path: &Path, params: &impl ParamTensors, seed: u64) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&encode(params, seed)).map_err(|e| Error::io(path, e))
}

pub fn load_into(path: &Path, params: &mut impl ParamTensors) -> Result<u64> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_into(&bytes, params)
}
