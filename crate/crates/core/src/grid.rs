//! Pixel-grid helpers shared by all stages.
//!
//! Coordinates are `(x, y)` with the origin at the top-left pixel and `y`
//! pointing down; grids are stored row-major.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Axis-aligned pixel rectangle `[x, x + w) × [y, y + h)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl Rect {
    pub const fn new(x: usize, y: usize, w: usize, h: usize) -> Self {
        Rect { x, y, w, h }
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x && x < self.x + self.w && y >= self.y && y < self.y + self.h
    }

    pub fn fits_within(&self, width: usize, height: usize) -> bool {
        self.w > 0 && self.h > 0 && self.x + self.w <= width && self.y + self.h <= height
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.x < other.x + other.w
            && other.x < self.x + self.w
            && self.y < other.y + other.h
            && other.y < self.y + self.h
    }

    pub fn area(&self) -> usize {
        self.w * self.h
    }
}

impl fmt::Display for Rect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.x, self.y, self.w, self.h)
    }
}

impl FromStr for Rect {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 4 {
            return Err(Error::Config(format!(
                "rectangle `{s}` must be given as x,y,w,h"
            )));
        }
        let mut v = [0usize; 4];
        for (slot, part) in v.iter_mut().zip(&parts) {
            *slot = part
                .parse()
                .map_err(|_| Error::Config(format!("rectangle `{s}`: `{part}` is not a pixel count")))?;
        }
        Ok(Rect::new(v[0], v[1], v[2], v[3]))
    }
}

/// Calls `f(nx, ny)` for every in-bounds 8-neighbour of `(x, y)`.
#[inline]
pub fn for_each_neighbor8(
    x: usize,
    y: usize,
    width: usize,
    height: usize,
    mut f: impl FnMut(usize, usize),
) {
    let x0 = x.saturating_sub(1);
    let y0 = y.saturating_sub(1);
    let x1 = (x + 1).min(width - 1);
    let y1 = (y + 1).min(height - 1);
    for ny in y0..=y1 {
        for nx in x0..=x1 {
            if nx != x || ny != y {
                f(nx, ny);
            }
        }
    }
}
