//! Pixel boxes (half-open, integer) and real-valued rectangles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Half-open pixel rectangle `[x_min, x_max) x [y_min, y_max)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BBox {
    pub x_min: u32,
    pub y_min: u32,
    pub x_max: u32,
    pub y_max: u32,
}

impl BBox {
    /// Panics on an empty or inverted box; use [`BBox::try_new`] for input data.
    pub fn new(x_min: u32, y_min: u32, x_max: u32, y_max: u32) -> Self {
        Self::try_new(x_min, y_min, x_max, y_max).expect("non-empty box")
    }

    pub fn try_new(x_min: u32, y_min: u32, x_max: u32, y_max: u32) -> Result<Self> {
        if x_min >= x_max || y_min >= y_max {
            return Err(Error::ConfigInvalid(format!(
                "empty box ({x_min}, {y_min}, {x_max}, {y_max})"
            )));
        }
        Ok(Self {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    pub fn width(&self) -> u32 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> u32 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> u64 {
        self.width() as u64 * self.height() as u64
    }

    pub fn fits(&self, width: u32, height: u32) -> bool {
        self.x_max <= width && self.y_max <= height
    }

    pub fn check_within(&self, width: u32, height: u32) -> Result<()> {
        if self.fits(width, height) {
            Ok(())
        } else {
            Err(Error::BoxOutOfBounds {
                bbox: self.as_array(),
                width,
                height,
            })
        }
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.x_min && x < self.x_max && y >= self.y_min && y < self.y_max
    }

    pub fn as_array(&self) -> [u32; 4] {
        [self.x_min, self.y_min, self.x_max, self.y_max]
    }

    /// COCO `[x, y, width, height]`.
    pub fn to_xywh(&self) -> [f64; 4] {
        [
            self.x_min as f64,
            self.y_min as f64,
            self.width() as f64,
            self.height() as f64,
        ]
    }

    pub fn to_rect(&self) -> Rect {
        Rect {
            x_min: self.x_min as f64,
            y_min: self.y_min as f64,
            x_max: self.x_max as f64,
            y_max: self.y_max as f64,
        }
    }

    pub fn iou(&self, other: &BBox) -> f64 {
        let ix = self.x_max.min(other.x_max).saturating_sub(self.x_min.max(other.x_min)) as u64;
        let iy = self.y_max.min(other.y_max).saturating_sub(self.y_min.max(other.y_min)) as u64;
        let inter = ix * iy;
        let union = self.area() + other.area() - inter;
        inter as f64 / union as f64
    }

    /// Smallest box covering both.
    pub fn union(&self, other: &BBox) -> BBox {
        BBox {
            x_min: self.x_min.min(other.x_min),
            y_min: self.y_min.min(other.y_min),
            x_max: self.x_max.max(other.x_max),
            y_max: self.y_max.max(other.y_max),
        }
    }
}

/// Real-valued box, used for detector output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn from_xywh([x, y, w, h]: [f64; 4]) -> Result<Self> {
        if !(x.is_finite() && y.is_finite() && w.is_finite() && h.is_finite()) || w < 0.0 || h < 0.0 {
            return Err(Error::ConfigInvalid(format!("invalid box [{x}, {y}, {w}, {h}]")));
        }
        Ok(Self {
            x_min: x,
            y_min: y,
            x_max: x + w,
            y_max: y + h,
        })
    }

    pub fn to_xywh(&self) -> [f64; 4] {
        [self.x_min, self.y_min, self.width(), self.height()]
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width().max(0.0) * self.height().max(0.0)
    }

    /// Intersection over union; 0 for disjoint or degenerate pairs.
    pub fn iou(&self, other: &Rect) -> f64 {
        let iw = (self.x_max.min(other.x_max) - self.x_min.max(other.x_min)).max(0.0);
        let ih = (self.y_max.min(other.y_max) - self.y_min.max(other.y_min)).max(0.0);
        let inter = iw * ih;
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            (inter / union).clamp(0.0, 1.0)
        }
    }
}

impl From<BBox> for Rect {
    fn from(b: BBox) -> Self {
        b.to_rect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iou_examples() {
        let a = BBox::new(0, 0, 2, 2);
        let b = BBox::new(1, 0, 3, 2);
        assert!((a.iou(&b) - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(a.iou(&a), 1.0);
        assert_eq!(a.iou(&BBox::new(5, 5, 6, 6)), 0.0);
        assert!((a.to_rect().iou(&b.to_rect()) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_boxes_rejected() {
        assert!(BBox::try_new(3, 3, 3, 4).is_err());
        assert!(BBox::try_new(4, 3, 3, 4).is_err());
        assert!(Rect::from_xywh([0., 0., -1., 1.]).is_err());
    }

    #[test]
    fn bounds_check() {
        let b = BBox::new(0, 0, 10, 10);
        assert!(b.check_within(10, 10).is_ok());
        assert!(matches!(b.check_within(9, 10), Err(Error::BoxOutOfBounds { .. })));
    }
}
