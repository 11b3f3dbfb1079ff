//! On-disk formats.
//!
//! * RMT tensor: ASCII line `RMT1 <I> <J> <K>\n`, then I·J·K little-endian f64
//!   values, i slowest and k fastest.
//! * Mask: one `i,j` line per location.
//! * Decoder parameters: ASCII line `UNN1 <L> <k_0> … <k_{L+1}> <n> <D0>\n`,
//!   then the flat parameter vector (see [`crate::decoder::ParamLayout`]) as
//!   little-endian f64.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::decoder::{DecoderArch, DecoderParams};
use crate::error::{Error, Result};
use crate::mask::SamplingMask;
use crate::tensor::RadioMapTensor;

fn split_header(bytes: &[u8]) -> Result<(&str, &[u8])> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::MalformedHeader("missing header line".into()))?;
    let header = std::str::from_utf8(&bytes[..nl])
        .map_err(|_| Error::MalformedHeader("header is not ASCII".into()))?;
    Ok((header, &bytes[nl + 1..]))
}

fn parse_positive(tok: &str, what: &str) -> Result<usize> {
    match tok.parse::<usize>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(Error::MalformedHeader(format!("bad {what} '{tok}'"))),
    }
}

fn decode_payload(payload: &[u8], expected: usize) -> Result<Vec<f64>> {
    let found = payload.len() / 8;
    if payload.len() < expected * 8 {
        return Err(Error::TruncatedPayload { expected, found });
    }
    if payload.len() > expected * 8 {
        return Err(Error::TrailingData { expected });
    }
    Ok(payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

fn encode(header: &str, values: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(header.len() + 1 + values.len() * 8);
    out.extend_from_slice(header.as_bytes());
    out.push(b'\n');
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn tensor_to_bytes(x: &RadioMapTensor) -> Vec<u8> {
    let (i, j, k) = x.dims();
    encode(&format!("RMT1 {i} {j} {k}"), x.data())
}

pub fn tensor_from_bytes(bytes: &[u8]) -> Result<RadioMapTensor> {
    let (header, payload) = split_header(bytes)?;
    let toks: Vec<&str> = header.split(' ').collect();
    if toks.len() != 4 || toks[0] != "RMT1" {
        return Err(Error::MalformedHeader(format!(
            "expected 'RMT1 I J K', got '{header}'"
        )));
    }
    let dims = (
        parse_positive(toks[1], "I")?,
        parse_positive(toks[2], "J")?,
        parse_positive(toks[3], "K")?,
    );
    let n = dims
        .0
        .checked_mul(dims.1)
        .and_then(|v| v.checked_mul(dims.2))
        .ok_or_else(|| Error::MalformedHeader("dims overflow".into()))?;
    let data = decode_payload(payload, n)?;
    RadioMapTensor::new(dims, data)
}

pub fn tensor_write(path: impl AsRef<Path>, x: &RadioMapTensor) -> Result<()> {
    fs::write(path, tensor_to_bytes(x))?;
    Ok(())
}

pub fn tensor_read(path: impl AsRef<Path>) -> Result<RadioMapTensor> {
    tensor_from_bytes(&fs::read(path)?)
}

pub fn mask_write(path: impl AsRef<Path>, mask: &SamplingMask) -> Result<()> {
    let mut f = fs::File::create(path)?;
    for (i, j) in mask.locations() {
        writeln!(f, "{i},{j}")?;
    }
    Ok(())
}

pub fn mask_read(path: impl AsRef<Path>, grid: (usize, usize)) -> Result<SamplingMask> {
    let text = fs::read_to_string(path)?;
    let mut locations = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parsed = line
            .split_once(',')
            .and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)));
        match parsed {
            Some(loc) => locations.push(loc),
            None => {
                return Err(Error::invalid(format!(
                    "mask line {}: '{line}'",
                    lineno + 1
                )));
            }
        }
    }
    SamplingMask::new(grid, locations)
}

pub fn params_to_bytes(arch: &DecoderArch, params: &DecoderParams) -> Vec<u8> {
    let mut header = format!("UNN1 {}", arch.n_blocks());
    for w in &arch.widths {
        header.push_str(&format!(" {w}"));
    }
    header.push_str(&format!(" {} {}", arch.kernel, arch.latent_side));
    encode(&header, params.values())
}

/// Parse a parameter file. The returned arch carries the default
/// normalization epsilon, which the file does not record.
pub fn params_from_bytes(bytes: &[u8]) -> Result<(DecoderArch, DecoderParams)> {
    let (header, payload) = split_header(bytes)?;
    let toks: Vec<&str> = header.split(' ').collect();
    if toks.first() != Some(&"UNN1") || toks.len() < 2 {
        return Err(Error::MalformedHeader(format!(
            "expected 'UNN1 …', got '{header}'"
        )));
    }
    let n_blocks = parse_positive(toks[1], "L")?;
    if toks.len() != n_blocks + 6 {
        return Err(Error::MalformedHeader(format!(
            "UNN1 header with L = {n_blocks} needs {} fields, got {}",
            n_blocks + 6,
            toks.len()
        )));
    }
    let widths = toks[2..n_blocks + 4]
        .iter()
        .map(|t| parse_positive(t, "channel width"))
        .collect::<Result<Vec<_>>>()?;
    let kernel = parse_positive(toks[n_blocks + 4], "kernel")?;
    let latent_side = parse_positive(toks[n_blocks + 5], "D0")?;
    let arch = DecoderArch {
        widths,
        kernel,
        latent_side,
        ..DecoderArch::default()
    };
    let count = arch.count_params()?;
    let values = decode_payload(payload, count)?;
    let params = DecoderParams::from_values(&arch, values)?;
    Ok((arch, params))
}

pub fn params_write(
    path: impl AsRef<Path>,
    arch: &DecoderArch,
    params: &DecoderParams,
) -> Result<()> {
    fs::write(path, params_to_bytes(arch, params))?;
    Ok(())
}

pub fn params_read(path: impl AsRef<Path>) -> Result<(DecoderArch, DecoderParams)> {
    params_from_bytes(&fs::read(path)?)
}
