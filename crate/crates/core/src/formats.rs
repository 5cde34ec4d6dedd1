//! Binary file formats.
//!
//! * CF32: `"SFC1"`, width and height as `u64` LE, then row-major
//!   interleaved `(re, im)` `f32` LE samples.
//! * SFM1: `"SFM1"`, same header, then one label byte per pixel.
//! * PGM: binary `P5` with maxval 255.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex32;

use crate::error::{Error, Result};
use crate::raster::{ComplexRaster, Gray8, Mask};

pub const RASTER_MAGIC: &[u8; 4] = b"SFC1";
pub const MASK_MAGIC: &[u8; 4] = b"SFM1";
const HEADER_LEN: usize = 20;

fn encode_header(magic: &[u8; 4], width: usize, height: usize) -> [u8; HEADER_LEN] {
    let mut h = [0u8; HEADER_LEN];
    h[..4].copy_from_slice(magic);
    h[4..12].copy_from_slice(&(width as u64).to_le_bytes());
    h[12..20].copy_from_slice(&(height as u64).to_le_bytes());
    h
}

/// Parses a header and returns `(width, height, payload_len)`.
fn decode_header(
    bytes: &[u8],
    magic: &[u8; 4],
    bytes_per_px: u64,
) -> std::result::Result<(usize, usize, usize), String> {
    if bytes.len() < HEADER_LEN {
        return Err("truncated header".into());
    }
    if &bytes[..4] != magic {
        return Err(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&bytes[..4]),
            String::from_utf8_lossy(magic)
        ));
    }
    let w = u64::from_le_bytes(bytes[4..12].try_into().unwrap());
    let h = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
    let len = w
        .checked_mul(h)
        .and_then(|n| n.checked_mul(bytes_per_px))
        .filter(|&n| n <= isize::MAX as u64)
        .ok_or_else(|| format!("dimensions {w}x{h} overflow"))?;
    Ok((w as usize, h as usize, len as usize))
}

fn read_all(path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    File::open(path)
        .and_then(|f| BufReader::new(f).read_to_end(&mut buf))
        .map_err(|e| Error::io(path, e))?;
    Ok(buf)
}

fn payload<'a>(path: &Path, bytes: &'a [u8], expected: usize) -> Result<&'a [u8]> {
    let body = &bytes[HEADER_LEN..];
    if body.len() != expected {
        let kind = if body.len() < expected {
            std::io::ErrorKind::UnexpectedEof
        } else {
            std::io::ErrorKind::InvalidData
        };
        return Err(Error::io(
            path,
            std::io::Error::new(
                kind,
                format!("payload is {} bytes, header implies {expected}", body.len()),
            ),
        ));
    }
    Ok(body)
}

pub fn encode_raster(raster: &ComplexRaster) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + raster.samples().len() * 8);
    out.extend_from_slice(&encode_header(RASTER_MAGIC, raster.width(), raster.height()));
    for z in raster.samples() {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    out
}

pub fn decode_raster(path: &Path, bytes: &[u8]) -> Result<ComplexRaster> {
    let (w, h, len) = decode_header(bytes, RASTER_MAGIC, 8)
        .map_err(|m| Error::Format(format!("{}: {m}", path.display())))?;
    let body = payload(path, bytes, len)?;
    let samples = body
        .chunks_exact(8)
        .map(|c| {
            Complex32::new(
                f32::from_le_bytes(c[..4].try_into().unwrap()),
                f32::from_le_bytes(c[4..].try_into().unwrap()),
            )
        })
        .collect();
    ComplexRaster::from_samples(w, h, samples)
}

pub fn read_raster(path: impl AsRef<Path>) -> Result<ComplexRaster> {
    let path = path.as_ref();
    decode_raster(path, &read_all(path)?)
}

pub fn write_raster(raster: &ComplexRaster, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), &encode_raster(raster))
}

/// Reads only the header of a CF32 file.
pub fn raster_dims(path: impl AsRef<Path>) -> Result<(usize, usize)> {
    let path = path.as_ref();
    let mut head = [0u8; HEADER_LEN];
    File::open(path)
        .and_then(|mut f| f.read_exact(&mut head))
        .map_err(|e| Error::io(path, e))?;
    let (w, h, _) = decode_header(&head, RASTER_MAGIC, 8)
        .map_err(|m| Error::Format(format!("{}: {m}", path.display())))?;
    Ok((w, h))
}

pub fn encode_mask(mask: &Mask) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + mask.labels().len());
    out.extend_from_slice(&encode_header(MASK_MAGIC, mask.width(), mask.height()));
    out.extend_from_slice(mask.labels());
    out
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<Mask> {
    let path = path.as_ref();
    let bytes = read_all(path)?;
    let (w, h, len) = decode_header(&bytes, MASK_MAGIC, 1)
        .map_err(|m| Error::Format(format!("{}: {m}", path.display())))?;
    let body = payload(path, &bytes, len)?;
    Mask::from_labels(w, h, body.to_vec())
}

pub fn write_mask(mask: &Mask, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), &encode_mask(mask))
}

pub fn encode_pgm(img: &Gray8) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

pub fn decode_pgm(bytes: &[u8]) -> Result<Gray8> {
    let mut pos = 0usize;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        // whitespace and comments between header tokens
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| !b.is_ascii_whitespace()) {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format("truncated PGM header".into()));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    if fields[0] != "P5" {
        return Err(Error::Format(format!("not a binary PGM (magic {:?})", fields[0])));
    }
    let parse = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::Format(format!("bad PGM header field {s:?}")))
    };
    let (w, h, maxval) = (parse(&fields[1])?, parse(&fields[2])?, parse(&fields[3])?);
    if maxval != 255 {
        return Err(Error::Format(format!("PGM maxval {maxval} unsupported, need 255")));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let n = w
        .checked_mul(h)
        .ok_or_else(|| Error::Format("PGM dimensions overflow".into()))?;
    let body = bytes.get(pos..).unwrap_or(&[]);
    if body.len() != n {
        return Err(Error::Format(format!(
            "PGM payload is {} bytes, expected {n}",
            body.len()
        )));
    }
    Ok(Gray8 {
        width: w,
        height: h,
        pixels: body.to_vec(),
    })
}

pub fn read_pgm8(path: impl AsRef<Path>) -> Result<Gray8> {
    let path = path.as_ref();
    decode_pgm(&read_all(path)?).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn write_pgm8(img: &Gray8, path: impl AsRef<Path>) -> Result<()> {
    if img.pixels.len() != img.width * img.height {
        return Err(Error::Format("PGM pixel count does not match dimensions".into()));
    }
    write_bytes(path.as_ref(), &encode_pgm(img))
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    File::create(path)
        .and_then(|f| {
            let mut w = BufWriter::new(f);
            w.write_all(bytes)?;
            w.flush()
        })
        .map_err(|e| Error::io(path, e))
}
