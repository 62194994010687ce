use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box: top-left corner plus width and height, in pixels.
///
/// Zero width or height is allowed and marks placeholder boxes.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub const ZERO: BBox = BBox {
        x: 0.0,
        y: 0.0,
        w: 0.0,
        h: 0.0,
    };

    pub const fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn from_center(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        Self::new(cx - w / 2.0, cy - h / 2.0, w, h)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn is_degenerate(&self) -> bool {
        self.w <= 0.0 || self.h <= 0.0
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    /// Geometric center. Zero-area boxes report their corner `(x, y)`.
    pub fn center(&self) -> (f64, f64) {
        if self.area() == 0.0 {
            (self.x, self.y)
        } else {
            (self.x + self.w / 2.0, self.y + self.h / 2.0)
        }
    }

    /// Same size, moved so its center is `c`. Returns `self` unchanged when
    /// `c` already is the center, so round-tripping never perturbs coordinates.
    pub fn with_center(&self, c: (f64, f64)) -> Self {
        if c == self.center() {
            *self
        } else {
            Self::from_center(c.0, c.1, self.w, self.h)
        }
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Self {
        Self::new(self.x + dx, self.y + dy, self.w, self.h)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.x * s, self.y * s, self.w * s, self.h * s)
    }

    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let iw = (self.right().min(other.right()) - self.x.max(other.x)).max(0.0);
        let ih = (self.bottom().min(other.bottom()) - self.y.max(other.y)).max(0.0);
        iw * ih
    }

    /// Parses one `x,y,w,h` line.
    pub fn parse_line(line: &str) -> Result<Self> {
        let parts: Vec<&str> = line.trim().split(',').map(str::trim).collect();
        let bad = |m: String| Error::Parse {
            location: format!("box line {line:?}"),
            message: m,
        };
        if parts.len() != 4 {
            return Err(bad(format!("expected 4 fields, got {}", parts.len())));
        }
        let mut v = [0.0f64; 4];
        for (slot, p) in v.iter_mut().zip(&parts) {
            *slot = p.parse().map_err(|e| bad(format!("{p:?}: {e}")))?;
            if !slot.is_finite() {
                return Err(bad(format!("non-finite value {p:?}")));
            }
        }
        Ok(Self::new(v[0], v[1], v[2], v[3]))
    }
}

/// `x,y,w,h` with each value in shortest decimal form (integers print without a fraction).
impl fmt::Display for BBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", num(self.x), num(self.y), num(self.w), num(self.h))
    }
}

fn num(v: f64) -> f64 {
    // avoid printing "-0"
    if v == 0.0 {
        0.0
    } else {
        v
    }
}

/// Serializes boxes as newline-terminated `x,y,w,h` lines.
pub fn boxes_to_text(boxes: &[BBox]) -> String {
    let mut s = String::with_capacity(boxes.len() * 16);
    for b in boxes {
        s.push_str(&b.to_string());
        s.push('\n');
    }
    s
}

pub fn boxes_from_text(text: &str) -> Result<Vec<BBox>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(BBox::parse_line)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_is_compact() {
        assert_eq!(BBox::new(0.0, 0.0, 4.0, 3.0).to_string(), "0,0,4,3");
        assert_eq!(BBox::new(1.5, -0.0, 2.25, 10.0).to_string(), "1.5,0,2.25,10");
    }

    #[test]
    fn parse_round_trip() {
        let b = BBox::new(12.5, 7.0, 33.125, 0.0);
        assert_eq!(BBox::parse_line(&b.to_string()).unwrap(), b);
        assert!(BBox::parse_line("1,2,3").is_err());
        assert!(BBox::parse_line("1,2,x,4").is_err());
    }

    #[test]
    fn zero_area_center_is_corner() {
        assert_eq!(BBox::new(3.0, 4.0, 0.0, 5.0).center(), (3.0, 4.0));
        assert_eq!(BBox::new(0.0, 0.0, 4.0, 2.0).center(), (2.0, 1.0));
    }

    #[test]
    fn with_center_fixed_point_is_exact() {
        let b = BBox::new(0.1, 0.7, 0.3, 1.9);
        assert_eq!(b.with_center(b.center()), b);
    }
}
