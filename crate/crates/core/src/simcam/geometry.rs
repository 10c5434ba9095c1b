use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Rectangular lattice of trap sites imaged onto a camera frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeGeometry {
    pub rows: usize,
    pub cols: usize,
    /// Pixels between adjacent site centres.
    pub pitch_px: usize,
    /// Odd side length of the site-centred crop.
    pub patch_px: usize,
    pub image_h: usize,
    pub image_w: usize,
    /// (row, col) pixel of the centre of site (0, 0).
    pub origin_px: (usize, usize),
}

/// Odd crop size closest to the pitch; an even pitch rounds down so the crop
/// stays inside the site's cell.
pub fn default_patch(pitch_px: usize) -> usize {
    if pitch_px % 2 == 1 {
        pitch_px
    } else {
        pitch_px.saturating_sub(1).max(1)
    }
}

impl LatticeGeometry {
    /// 3x3 sites on a 28x28 frame, tight spacing.
    pub fn desk_5um() -> Self {
        Self {
            rows: 3,
            cols: 3,
            pitch_px: 8,
            patch_px: default_patch(8),
            image_h: 28,
            image_w: 28,
            origin_px: (6, 6),
        }
    }

    /// 3x3 sites on a 32x32 frame, wider spacing.
    pub fn desk_9um() -> Self {
        Self {
            rows: 3,
            cols: 3,
            pitch_px: 9,
            patch_px: default_patch(9),
            image_h: 32,
            image_w: 32,
            origin_px: (7, 7),
        }
    }

    pub fn num_sites(&self) -> usize {
        self.rows * self.cols
    }

    pub fn num_pixels(&self) -> usize {
        self.image_h * self.image_w
    }

    pub fn half_patch(&self) -> usize {
        self.patch_px / 2
    }

    pub fn site_center(&self, row: usize, col: usize) -> (usize, usize) {
        (
            self.origin_px.0 + row * self.pitch_px,
            self.origin_px.1 + col * self.pitch_px,
        )
    }

    pub fn site_index(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    pub fn site_coords(&self, index: usize) -> (usize, usize) {
        (index / self.cols, index % self.cols)
    }

    /// Pixels after the last site centre along each axis.
    pub fn trailing_margin(&self) -> (usize, usize) {
        let (lr, lc) = self.site_center(self.rows - 1, self.cols - 1);
        (self.image_h - 1 - lr, self.image_w - 1 - lc)
    }

    /// Same pitch, crop and margins with a different number of sites.
    pub fn resized(&self, rows: usize, cols: usize) -> Self {
        let (tr, tc) = self.trailing_margin();
        Self {
            rows,
            cols,
            image_h: self.origin_px.0 + (rows - 1) * self.pitch_px + 1 + tr,
            image_w: self.origin_px.1 + (cols - 1) * self.pitch_px + 1 + tc,
            ..*self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::config(
                "geometry.rows/cols",
                "lattice must have at least one site",
            ));
        }
        if self.patch_px.is_multiple_of(2) {
            return Err(Error::config("geometry.patch_px", "must be odd"));
        }
        if self.patch_px > self.pitch_px + 2 {
            return Err(Error::config(
                "geometry.patch_px",
                "must not exceed pitch_px + 2",
            ));
        }
        let half = self.half_patch();
        let (r0, c0) = self.origin_px;
        if r0 < half || c0 < half {
            return Err(Error::config(
                "geometry.origin_px",
                "first site crop leaves the frame",
            ));
        }
        let (lr, lc) = self.site_center(self.rows - 1, self.cols - 1);
        if lr + half >= self.image_h || lc + half >= self.image_w {
            return Err(Error::config(
                "geometry.image_h/image_w",
                "last site crop leaves the frame",
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid() {
        for g in [LatticeGeometry::desk_5um(), LatticeGeometry::desk_9um()] {
            g.validate().unwrap();
            assert_eq!(g.num_sites(), 9);
        }
        assert_eq!(LatticeGeometry::desk_5um().image_h, 28);
        assert_eq!(LatticeGeometry::desk_9um().image_h, 32);
    }

    #[test]
    fn patch_rule() {
        assert_eq!(default_patch(8), 7);
        assert_eq!(default_patch(9), 9);
        assert_eq!(default_patch(10), 9);
    }

    #[test]
    fn rejects_even_patch_and_overflow() {
        let mut g = LatticeGeometry::desk_5um();
        g.patch_px = 8;
        assert!(g.validate().is_err());
        let mut g = LatticeGeometry::desk_5um();
        g.image_h = 24;
        assert!(g.validate().is_err());
    }

    #[test]
    fn resize_keeps_margins() {
        let g = LatticeGeometry::desk_5um();
        assert_eq!(g.resized(3, 3), g);
        let big = g.resized(8, 8);
        assert_eq!(big.image_h, 6 + 7 * 8 + 1 + 5);
        assert_eq!(big.trailing_margin(), g.trailing_margin());
        big.validate().unwrap();
    }
}
