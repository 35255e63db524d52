//! Binary parameter files.
//!
//! Layout (little endian): the 8-byte magic `CRPOLICY`, a `u32` format
//! version, seven `u32` shape fields (height, width, channels, filters,
//! kernel, hidden, actions), then the six tensors as raw `f64` in the order of
//! [`PolicyParams::tensors`]. Values round-trip bit for bit.

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use thiserror::Error;

use super::{PolicyParams, PolicyShape, ACTIONS, CHANNELS, KERNEL};

pub const MAGIC: &[u8; 8] = b"CRPOLICY";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ParamsFileError {
    #[error("not a policy file (bad magic)")]
    BadMagic,
    #[error("unsupported policy format version {found} (expected {FORMAT_VERSION})")]
    Version { found: u32 },
    #[error("file truncated while reading `{field}`")]
    Truncated { field: &'static str },
    #[error("field `{field}` is {found} but this build requires {expected}")]
    Shape {
        field: &'static str,
        found: u32,
        expected: u32,
    },
    #[error("field `{field}` must be positive")]
    Zero { field: &'static str },
    #[error("tensor `{field}` contains a non-finite value")]
    NonFinite { field: &'static str },
    #[error("{0} unexpected bytes after the last tensor")]
    Trailing(usize),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub fn write_params(params: &PolicyParams, out: &mut impl Write) -> io::Result<()> {
    let s = params.shape;
    out.write_all(MAGIC)?;
    out.write_all(&FORMAT_VERSION.to_le_bytes())?;
    for v in [s.height, s.width, CHANNELS, s.filters, KERNEL, s.hidden, ACTIONS] {
        out.write_all(&(v as u32).to_le_bytes())?;
    }
    for (_, t) in params.tensors() {
        for w in t {
            out.write_all(&w.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn save_params(params: &PolicyParams, path: impl AsRef<Path>) -> io::Result<()> {
    let mut buf = Vec::with_capacity(64 + params.parameter_count() * 8);
    write_params(params, &mut buf)?;
    fs::write(path, buf)
}

struct Reader<'a> {
    bytes: &'a [u8],
}

impl Reader<'_> {
    fn take(&mut self, n: usize, field: &'static str) -> Result<&[u8], ParamsFileError> {
        if self.bytes.len() < n {
            return Err(ParamsFileError::Truncated { field });
        }
        let (head, rest) = self.bytes.split_at(n);
        self.bytes = rest;
        Ok(head)
    }

    fn u32(&mut self, field: &'static str) -> Result<u32, ParamsFileError> {
        Ok(u32::from_le_bytes(self.take(4, field)?.try_into().expect("4 bytes")))
    }
}

pub fn read_params(input: &mut impl Read) -> Result<PolicyParams, ParamsFileError> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    let mut r = Reader { bytes: &bytes };
    if r.take(MAGIC.len(), "magic").map_err(|_| ParamsFileError::BadMagic)? != MAGIC {
        return Err(ParamsFileError::BadMagic);
    }
    let version = r.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(ParamsFileError::Version { found: version });
    }
    let mut dims = [0u32; 7];
    let names = ["height", "width", "channels", "filters", "kernel", "hidden", "actions"];
    for (d, name) in dims.iter_mut().zip(names) {
        *d = r.u32(name)?;
        if *d == 0 {
            return Err(ParamsFileError::Zero { field: name });
        }
    }
    for (idx, expected) in [(2, CHANNELS), (4, KERNEL), (6, ACTIONS)] {
        if dims[idx] != expected as u32 {
            return Err(ParamsFileError::Shape {
                field: names[idx],
                found: dims[idx],
                expected: expected as u32,
            });
        }
    }
    let shape = PolicyShape {
        height: dims[0] as usize,
        width: dims[1] as usize,
        filters: dims[3] as usize,
        hidden: dims[5] as usize,
    };
    let mut params = PolicyParams::zeros(shape);
    let names: Vec<&'static str> = params.tensors().iter().map(|(n, _)| *n).collect();
    for (t, name) in params.tensors_mut().into_iter().zip(names) {
        let raw = r.take(t.len() * 8, name)?;
        for (w, chunk) in t.iter_mut().zip(raw.chunks_exact(8)) {
            *w = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
            if !w.is_finite() {
                return Err(ParamsFileError::NonFinite { field: name });
            }
        }
    }
    if !r.bytes.is_empty() {
        return Err(ParamsFileError::Trailing(r.bytes.len()));
    }
    Ok(params)
}

pub fn load_params(path: impl AsRef<Path>) -> Result<PolicyParams, ParamsFileError> {
    read_params(&mut fs::File::open(path)?)
}
