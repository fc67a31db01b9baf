//! File formats: PFM for float maps (bit-exact f32 round trips) and 8-bit PNG previews.
//!
//! PFM files are written little-endian (scale `-1.0`) with rows stored bottom
//! to top as the format prescribes; both byte orders are accepted on read.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use image::{ImageBuffer, Rgb as PngRgb};

use crate::error::{Error, Result};
use crate::geometry::{Rgb, Vec3};
use crate::grid::Grid;
use crate::shading::Image;

/// Decoded PFM contents, rows top to bottom.
#[derive(Debug, Clone, PartialEq)]
pub struct Pfm {
    pub rows: usize,
    pub cols: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

impl Pfm {
    pub fn from_gray(grid: &Grid<f64>) -> Self {
        Self {
            rows: grid.rows(),
            cols: grid.cols(),
            channels: 1,
            data: grid.iter().map(|&v| v as f32).collect(),
        }
    }

    pub fn from_rgb(grid: &Grid<Vec3>) -> Self {
        Self {
            rows: grid.rows(),
            cols: grid.cols(),
            channels: 3,
            data: grid.iter().flat_map(|v| [v.x as f32, v.y as f32, v.z as f32]).collect(),
        }
    }

    pub fn to_gray(&self) -> Result<Grid<f64>> {
        if self.channels != 1 {
            return Err(Error::Format(format!(
                "expected a 1-channel PFM, found {} channels",
                self.channels
            )));
        }
        Grid::from_vec(self.rows, self.cols, self.data.iter().map(|&v| v as f64).collect())
    }

    pub fn to_rgb(&self) -> Result<Grid<Vec3>> {
        if self.channels != 3 {
            return Err(Error::Format(format!(
                "expected a 3-channel PFM, found {} channels",
                self.channels
            )));
        }
        Grid::from_vec(
            self.rows,
            self.cols,
            self.data
                .chunks_exact(3)
                .map(|c| Vec3::new(c[0] as f64, c[1] as f64, c[2] as f64))
                .collect(),
        )
    }

    pub fn encode(&self) -> Vec<u8> {
        let magic = if self.channels == 3 { "PF" } else { "Pf" };
        let mut out = format!("{magic}\n{} {}\n-1.0\n", self.cols, self.rows).into_bytes();
        let row_len = self.cols * self.channels;
        out.reserve(self.data.len() * 4);
        for row in (0..self.rows).rev() {
            for v in &self.data[row * row_len..(row + 1) * row_len] {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0usize;
        let mut token = || -> Result<&str> {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(Error::Format("truncated PFM header".into()));
            }
            let tok =
                std::str::from_utf8(&bytes[start..pos]).map_err(|_| Error::Format("PFM header is not ASCII".into()))?;
            Ok(tok)
        };
        let channels = match token()? {
            "PF" => 3,
            "Pf" => 1,
            other => return Err(Error::Format(format!("bad PFM magic {other:?}"))),
        };
        let parse_dim = |t: &str| {
            t.parse::<usize>()
                .map_err(|_| Error::Format(format!("bad PFM dimension {t:?}")))
        };
        let cols = parse_dim(token()?)?;
        let rows = parse_dim(token()?)?;
        let scale_tok = token()?;
        let scale: f64 = scale_tok
            .parse()
            .map_err(|_| Error::Format(format!("bad PFM scale {scale_tok:?}")))?;
        if scale == 0.0 || !scale.is_finite() {
            return Err(Error::Format("PFM scale must be non-zero".into()));
        }
        // exactly one whitespace byte separates the header from the raster
        pos += 1;
        let little = scale < 0.0;
        let count = rows * cols * channels;
        let raster = bytes
            .get(pos..)
            .filter(|r| r.len() >= count * 4)
            .ok_or_else(|| Error::Format("truncated PFM raster".into()))?;
        let row_len = cols * channels;
        let mut data = vec![0f32; count];
        for (i, chunk) in raster[..count * 4].chunks_exact(4).enumerate() {
            let b = [chunk[0], chunk[1], chunk[2], chunk[3]];
            let v = if little {
                f32::from_le_bytes(b)
            } else {
                f32::from_be_bytes(b)
            };
            let (file_row, offset) = (i / row_len, i % row_len);
            data[(rows - 1 - file_row) * row_len + offset] = v;
        }
        Ok(Self {
            rows,
            cols,
            channels,
            data,
        })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::decode(&fs::read(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(fs::File::create(path)?);
        w.write_all(&self.encode())?;
        w.flush()?;
        Ok(())
    }
}

pub fn write_pfm_gray(path: impl AsRef<Path>, grid: &Grid<f64>) -> Result<()> {
    Pfm::from_gray(grid).write(path)
}

pub fn write_pfm_rgb(path: impl AsRef<Path>, grid: &Grid<Vec3>) -> Result<()> {
    Pfm::from_rgb(grid).write(path)
}

pub fn read_pfm_gray(path: impl AsRef<Path>) -> Result<Grid<f64>> {
    Pfm::read(path)?.to_gray()
}

pub fn read_pfm_rgb(path: impl AsRef<Path>) -> Result<Grid<Vec3>> {
    Pfm::read(path)?.to_rgb()
}

#[inline]
pub fn linear_to_srgb(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    if x <= 0.003_130_8 {
        12.92 * x
    } else {
        1.055 * x.powf(1.0 / 2.4) - 0.055
    }
}

#[inline]
pub fn srgb_to_linear(x: f64) -> f64 {
    if x <= 0.040_45 {
        x / 12.92
    } else {
        ((x + 0.055) / 1.055).powf(2.4)
    }
}

#[inline]
fn to_u8(x: f64) -> u8 {
    (x * 255.0).round().clamp(0.0, 255.0) as u8
}

type RgbBuffer = ImageBuffer<PngRgb<u8>, Vec<u8>>;

fn buffer_from(grid: &Grid<Vec3>, encode: impl Fn(f64) -> u8) -> RgbBuffer {
    let mut buf = RgbBuffer::new(grid.cols() as u32, grid.rows() as u32);
    for (r, c, v) in grid.indexed() {
        buf.put_pixel(c as u32, r as u32, PngRgb([encode(v.x), encode(v.y), encode(v.z)]));
    }
    buf
}

/// 8-bit sRGB encoding of a linear image, clamped to `[0, 1]`.
pub fn image_to_srgb8(image: &Image) -> Grid<Vec3> {
    image.map(|v| v.map(linear_to_srgb))
}

pub fn write_png_srgb(path: impl AsRef<Path>, image: &Image) -> Result<()> {
    buffer_from(image, |x| to_u8(linear_to_srgb(x))).save(path)?;
    Ok(())
}

/// Normal map preview with the usual `(n + 1) / 2` channel mapping.
pub fn write_png_normals(path: impl AsRef<Path>, normals: &Grid<Vec3>) -> Result<()> {
    buffer_from(normals, |x| to_u8((x + 1.0) * 0.5)).save(path)?;
    Ok(())
}

/// Reads an 8-bit PNG and converts it from sRGB to linear radiance.
pub fn read_png_linear(path: impl AsRef<Path>) -> Result<Image> {
    let img = image::open(path)?.to_rgb8();
    let (w, h) = img.dimensions();
    Ok(Grid::from_fn(h as usize, w as usize, |r, c| {
        let p = img.get_pixel(c as u32, r as u32).0;
        Rgb::new(
            srgb_to_linear(p[0] as f64 / 255.0),
            srgb_to_linear(p[1] as f64 / 255.0),
            srgb_to_linear(p[2] as f64 / 255.0),
        )
    }))
}

/// Depth visualized as gray, near = bright, normalized to the map's range.
pub fn depth_preview(depth: &Grid<f64>) -> Image {
    let lo = depth.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = depth.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    depth.map(|d| Rgb::repeat(1.0 - (d - lo) / span))
}

/// Places equally tall panels side by side.
pub fn hstack(panels: &[&Image]) -> Result<Image> {
    let rows = panels.first().map_or(0, |p| p.rows());
    if panels.iter().any(|p| p.rows() != rows) {
        return Err(Error::InvalidParam("panels must share a height".into()));
    }
    let cols: usize = panels.iter().map(|p| p.cols()).sum();
    let mut out = Grid::filled(rows, cols, Rgb::zeros());
    let mut offset = 0;
    for p in panels {
        for (r, c, v) in p.indexed() {
            out[(r, offset + c)] = *v;
        }
        offset += p.cols();
    }
    Ok(out)
}
