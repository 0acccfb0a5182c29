//! Non-overlapping patch grids over a slide's level-0 extent.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Magnification {
    X20,
    X40,
    X80,
}

impl Magnification {
    pub fn times(self) -> u32 {
        match self {
            Magnification::X20 => 20,
            Magnification::X40 => 40,
            Magnification::X80 => 80,
        }
    }

    pub fn from_times(m: u32) -> Result<Self> {
        match m {
            20 => Ok(Magnification::X20),
            40 => Ok(Magnification::X40),
            80 => Ok(Magnification::X80),
            other => Err(Error::invalid(format!("unsupported magnification {other}x (expected 20, 40 or 80)"))),
        }
    }
}

impl fmt::Display for Magnification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x", self.times())
    }
}

impl FromStr for Magnification {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let digits = s.trim().trim_end_matches(['x', 'X']);
        let m = digits.parse::<u32>().map_err(|_| Error::invalid(format!("bad magnification {s:?}")))?;
        Self::from_times(m)
    }
}

/// Edge length in level-0 pixels. The field of view `patch_size / mag`
/// is 12.8 for every supported magnification.
pub fn patch_size_for(mag: Magnification) -> u32 {
    match mag {
        Magnification::X20 => 256,
        Magnification::X40 => 512,
        Magnification::X80 => 1024,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlideGeometry {
    pub slide_id: String,
    pub width: u32,
    pub height: u32,
    pub magnification: Magnification,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TileCoord {
    pub slide_id: String,
    pub x: u32,
    pub y: u32,
    pub patch_size: u32,
}

/// Foreground bitmap sampled every `downsample` level-0 pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TissueMask {
    pub width: u32,
    pub height: u32,
    pub downsample: u32,
    /// Row-major, `width * height` entries.
    pub foreground: Vec<bool>,
}

impl TissueMask {
    pub fn new(width: u32, height: u32, downsample: u32, foreground: Vec<bool>) -> Result<Self> {
        if downsample == 0 {
            return Err(Error::invalid("mask downsample must be positive"));
        }
        if foreground.len() != width as usize * height as usize {
            return Err(Error::DimMismatch { expected: width as usize * height as usize, got: foreground.len() });
        }
        Ok(Self { width, height, downsample, foreground })
    }

    pub fn filled(width: u32, height: u32, downsample: u32, value: bool) -> Self {
        Self { width, height, downsample, foreground: vec![value; width as usize * height as usize] }
    }

    /// Grayscale image; pixels brighter than mid-grey are foreground.
    pub fn from_image(img: &image::GrayImage, downsample: u32) -> Result<Self> {
        let fg = img.pixels().map(|p| p.0[0] > 127).collect();
        Self::new(img.width(), img.height(), downsample, fg)
    }

    pub fn load(path: impl AsRef<std::path::Path>, downsample: u32) -> Result<Self> {
        let img = image::open(path.as_ref())
            .map_err(|e| Error::invalid(format!("cannot read mask {}: {e}", path.as_ref().display())))?;
        Self::from_image(&img.to_luma8(), downsample)
    }

    fn covers(&self, width: u32, height: u32) -> bool {
        let need_w = width.div_ceil(self.downsample);
        let need_h = height.div_ceil(self.downsample);
        let floor_w = width / self.downsample;
        let floor_h = height / self.downsample;
        (self.width == need_w || self.width == floor_w.max(1))
            && (self.height == need_h || self.height == floor_h.max(1))
    }

    /// Fraction of mask pixels inside the level-0 box that are foreground.
    fn foreground_fraction(&self, x: u32, y: u32, size: u32) -> f64 {
        let ds = self.downsample;
        let x0 = (x / ds).min(self.width);
        let y0 = (y / ds).min(self.height);
        let x1 = (x + size).div_ceil(ds).min(self.width);
        let y1 = (y + size).div_ceil(ds).min(self.height);
        if x1 <= x0 || y1 <= y0 {
            return 0.0;
        }
        let mut fg = 0usize;
        for my in y0..y1 {
            let row = my as usize * self.width as usize;
            fg += self.foreground[row + x0 as usize..row + x1 as usize].iter().filter(|v| **v).count();
        }
        fg as f64 / ((x1 - x0) as usize * (y1 - y0) as usize) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridOptions {
    /// A masked tile is kept when at least this fraction of its mask
    /// pixels is foreground.
    pub min_foreground: f64,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self { min_foreground: 0.5 }
    }
}

/// Row-major grid from (0,0) with step equal to the patch size; partial
/// edge tiles are dropped.
pub fn patch_grid(geometry: &SlideGeometry, mask: Option<&TissueMask>, opts: GridOptions) -> Result<Vec<TileCoord>> {
    if geometry.width == 0 || geometry.height == 0 {
        return Err(Error::invalid("slide dimensions must be at least 1 pixel"));
    }
    if let Some(m) = mask {
        if !m.covers(geometry.width, geometry.height) {
            return Err(Error::invalid(format!(
                "mask {}x{} at downsample {} does not cover a {}x{} slide",
                m.width, m.height, m.downsample, geometry.width, geometry.height
            )));
        }
    }
    let ps = patch_size_for(geometry.magnification);
    let cols = geometry.width / ps;
    let rows = geometry.height / ps;
    let mut out = Vec::with_capacity((cols * rows) as usize);
    for r in 0..rows {
        for c in 0..cols {
            let (x, y) = (c * ps, r * ps);
            if let Some(m) = mask {
                if m.foreground_fraction(x, y, ps) < opts.min_foreground {
                    continue;
                }
            }
            out.push(TileCoord { slide_id: geometry.slide_id.clone(), x, y, patch_size: ps });
        }
    }
    Ok(out)
}

/// `slide_id,x,y,patch_size`.
pub fn write_coords_csv<W: std::io::Write>(coords: &[TileCoord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["slide_id", "x", "y", "patch_size"])?;
    for c in coords {
        w.write_record([c.slide_id.clone(), c.x.to_string(), c.y.to_string(), c.patch_size.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
