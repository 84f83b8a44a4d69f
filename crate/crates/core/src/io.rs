//! On-disk tensor formats.
//!
//! * Raw F64: an ASCII header line `F64 <ndim> <d0> <d1> ...` followed by the
//!   entries as little-endian `f64`, row-major.
//! * 8-bit PGM (`P5`, one channel) and PPM (`P6`, three channels). Pixel values
//!   map linearly between `[0, 255]` and `[0, 1]`; images load as `[C, H, W]`.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub fn encode_f64(t: &Tensor) -> Vec<u8> {
    let mut header = format!("F64 {}", t.shape().len());
    for d in t.shape() {
        header.push_str(&format!(" {d}"));
    }
    header.push('\n');
    let mut out = header.into_bytes();
    out.reserve(8 * t.numel());
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_f64(bytes: &[u8]) -> std::result::Result<Tensor, String> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or("missing header line")?;
    let header = std::str::from_utf8(&bytes[..nl]).map_err(|_| "header is not ASCII")?;
    let mut fields = header.split_ascii_whitespace();
    if fields.next() != Some("F64") {
        return Err("header must start with `F64`".into());
    }
    let ndim: usize = fields
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or("bad ndim")?;
    let shape: Vec<usize> = fields
        .map(|s| s.parse::<usize>().map_err(|_| format!("bad dimension `{s}`")))
        .collect::<std::result::Result<_, _>>()?;
    if shape.len() != ndim {
        return Err(format!("header declares {ndim} dims but lists {}", shape.len()));
    }
    let body = &bytes[nl + 1..];
    let numel: usize = shape.iter().product();
    if body.len() != 8 * numel {
        return Err(format!("expected {} payload bytes, found {}", 8 * numel, body.len()));
    }
    let data = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Tensor::from_vec(data, &shape).map_err(|e| e.to_string())
}

pub fn write_f64(path: &Path, t: &Tensor) -> Result<()> {
    fs::write(path, encode_f64(t)).map_err(|e| Error::io(path, e))
}

pub fn read_f64(path: &Path) -> Result<Tensor> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_f64(&bytes).map_err(|message| Error::Format {
        path: path.to_path_buf(),
        message,
    })
}

fn to_byte(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Encodes a `[H, W]`, `[1, H, W]` or `[3, H, W]` tensor as binary PGM/PPM.
pub fn encode_netpbm(t: &Tensor) -> Result<Vec<u8>> {
    let (c, h, w) = match *t.shape() {
        [h, w] => (1, h, w),
        [c @ (1 | 3), h, w] => (c, h, w),
        _ => {
            return Err(Error::Unsupported(format!(
                "netpbm export needs [H,W], [1,H,W] or [3,H,W], got {:?}",
                t.shape()
            )))
        }
    };
    let magic = if c == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{w} {h}\n255\n").into_bytes();
    let plane = h * w;
    for p in 0..plane {
        for ch in 0..c {
            out.push(to_byte(t.data()[ch * plane + p]));
        }
    }
    Ok(out)
}

pub fn decode_netpbm(bytes: &[u8]) -> std::result::Result<Tensor, String> {
    let mut pos = 0;
    let mut tokens = Vec::with_capacity(4);
    while tokens.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err("truncated header".into());
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    // exactly one whitespace byte separates header and raster
    pos += 1;
    let channels = match tokens[0].as_str() {
        "P5" => 1,
        "P6" => 3,
        other => return Err(format!("unsupported magic `{other}`")),
    };
    let parse = |s: &str| s.parse::<usize>().map_err(|_| format!("bad header field `{s}`"));
    let (w, h, maxval) = (parse(&tokens[1])?, parse(&tokens[2])?, parse(&tokens[3])?);
    if maxval == 0 || maxval > 255 {
        return Err(format!("only 8-bit images are supported (maxval {maxval})"));
    }
    let plane = w * h;
    let raster = bytes.get(pos..).unwrap_or(&[]);
    if raster.len() < plane * channels {
        return Err("truncated raster".into());
    }
    let mut data = vec![0.0; plane * channels];
    for p in 0..plane {
        for ch in 0..channels {
            data[ch * plane + p] = raster[p * channels + ch] as f64 / maxval as f64;
        }
    }
    Tensor::from_vec(data, &[channels, h, w]).map_err(|e| e.to_string())
}

pub fn write_netpbm(path: &Path, t: &Tensor) -> Result<()> {
    fs::write(path, encode_netpbm(t)?).map_err(|e| Error::io(path, e))
}

pub fn read_netpbm(path: &Path) -> Result<Tensor> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_netpbm(&bytes).map_err(|message| Error::Format {
        path: path.to_path_buf(),
        message,
    })
}

/// Loads `.pgm`/`.ppm` as images and anything else as raw F64.
pub fn read_tensor(path: &Path) -> Result<Tensor> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("pgm" | "ppm") => read_netpbm(path),
        _ => read_f64(path),
    }
}
