//! Portable float map (PFM) reader/writer.
//!
//! `PF` = 3-channel color, `Pf` = single channel. The scale line's sign
//! encodes endianness; files are written little-endian (scale -1.0). PFM
//! stores rows bottom-to-top; in memory this type is row-major top-down.

use crate::Vec3;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PfmError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a PFM file (header `{0}`)")]
    BadHeader(String),
    #[error("malformed dimensions line `{0}`")]
    BadDimensions(String),
    #[error("payload truncated")]
    Truncated,
    #[error("expected {expected} channels, file has {got}")]
    ChannelMismatch { expected: usize, got: usize },
}

/// Float image, row-major top-down, `channels` interleaved values per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct PfmImage {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl PfmImage {
    pub fn from_rgb(width: usize, height: usize, pixels: &[Vec3]) -> Self {
        assert_eq!(pixels.len(), width * height);
        let mut data = Vec::with_capacity(3 * pixels.len());
        for p in pixels {
            data.extend_from_slice(&[p.x, p.y, p.z]);
        }
        PfmImage {
            width,
            height,
            channels: 3,
            data,
        }
    }

    pub fn from_gray(width: usize, height: usize, values: &[f64]) -> Self {
        assert_eq!(values.len(), width * height);
        PfmImage {
            width,
            height,
            channels: 1,
            data: values.to_vec(),
        }
    }

    pub fn to_rgb(&self) -> Result<Vec<Vec3>, PfmError> {
        if self.channels != 3 {
            return Err(PfmError::ChannelMismatch {
                expected: 3,
                got: self.channels,
            });
        }
        Ok(self
            .data
            .chunks_exact(3)
            .map(|p| Vec3::new(p[0], p[1], p[2]))
            .collect())
    }

    pub fn to_gray(&self) -> Result<Vec<f64>, PfmError> {
        if self.channels != 1 {
            return Err(PfmError::ChannelMismatch {
                expected: 1,
                got: self.channels,
            });
        }
        Ok(self.data.clone())
    }
}

pub fn write_pfm(path: &Path, img: &PfmImage) -> Result<(), PfmError> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    write_pfm_to(&mut w, img)?;
    w.flush()?;
    Ok(())
}

pub fn write_pfm_to(w: &mut impl Write, img: &PfmImage) -> Result<(), PfmError> {
    let tag = if img.channels == 3 { "PF" } else { "Pf" };
    write!(w, "{tag}\n{} {}\n-1.0\n", img.width, img.height)?;
    let row_len = img.width * img.channels;
    // Bottom-to-top row order.
    for y in (0..img.height).rev() {
        let row = &img.data[y * row_len..(y + 1) * row_len];
        for v in row {
            w.write_all(&(*v as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_pfm(path: &Path) -> Result<PfmImage, PfmError> {
    read_pfm_from(&mut BufReader::new(std::fs::File::open(path)?))
}

fn read_token(r: &mut impl BufRead) -> Result<String, PfmError> {
    // Tokens are separated by single whitespace characters (usually '\n').
    let mut tok = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        r.read_exact(&mut byte).map_err(|_| PfmError::Truncated)?;
        if byte[0].is_ascii_whitespace() {
            if tok.is_empty() {
                continue;
            }
            break;
        }
        tok.push(byte[0]);
    }
    Ok(String::from_utf8_lossy(&tok).into_owned())
}

pub fn read_pfm_from(r: &mut impl BufRead) -> Result<PfmImage, PfmError> {
    let tag = read_token(r)?;
    let channels = match tag.as_str() {
        "PF" => 3,
        "Pf" => 1,
        other => return Err(PfmError::BadHeader(other.to_string())),
    };
    let w_tok = read_token(r)?;
    let h_tok = read_token(r)?;
    let width: usize = w_tok
        .parse()
        .map_err(|_| PfmError::BadDimensions(w_tok.clone()))?;
    let height: usize = h_tok
        .parse()
        .map_err(|_| PfmError::BadDimensions(h_tok.clone()))?;
    let scale_tok = read_token(r)?;
    let scale: f64 = scale_tok
        .parse()
        .map_err(|_| PfmError::BadDimensions(scale_tok.clone()))?;
    let little_endian = scale < 0.0;

    let n = width * height * channels;
    let mut bytes = vec![0u8; 4 * n];
    r.read_exact(&mut bytes).map_err(|_| PfmError::Truncated)?;
    let mut data = vec![0.0f64; n];
    let row_len = width * channels;
    for file_row in 0..height {
        let mem_row = height - 1 - file_row; // file rows are bottom-up
        for i in 0..row_len {
            let off = 4 * (file_row * row_len + i);
            let raw: [u8; 4] = bytes[off..off + 4].try_into().unwrap();
            let v = if little_endian {
                f32::from_le_bytes(raw)
            } else {
                f32::from_be_bytes(raw)
            };
            data[mem_row * row_len + i] = v as f64;
        }
    }
    Ok(PfmImage {
        width,
        height,
        channels,
        data,
    })
}
