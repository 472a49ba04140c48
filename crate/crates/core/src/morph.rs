//! Binary morphology: dilation, erosion and closing over [`BinaryMask`].
//!
//! Out-of-frame pixels always count as clear, so erosion shrinks at the
//! border and dilation clips to the frame.

use crate::raster::BinaryMask;

/// Structuring element with its anchor at the center cell. Dimensions must
/// be odd.
#[derive(Debug, Clone)]
pub struct Kernel {
    width: u32,
    height: u32,
    cells: Vec<bool>,
}

impl Kernel {
    /// Fully set square element of odd side `n`.
    pub fn square(n: u32) -> Self {
        assert!(n % 2 == 1 && n >= 1, "kernel side must be odd");
        Self {
            width: n,
            height: n,
            cells: vec![true; (n * n) as usize],
        }
    }

    pub fn from_cells(width: u32, height: u32, cells: Vec<bool>) -> Self {
        assert!(width % 2 == 1 && height % 2 == 1, "kernel dims must be odd");
        assert_eq!(cells.len(), (width * height) as usize);
        assert!(cells.iter().any(|&c| c), "kernel must be non-empty");
        Self {
            width,
            height,
            cells,
        }
    }

    /// Offsets of set cells relative to the anchor.
    fn offsets(&self) -> Vec<(i64, i64)> {
        let ax = (self.width / 2) as i64;
        let ay = (self.height / 2) as i64;
        let mut out = Vec::new();
        for ky in 0..self.height as i64 {
            for kx in 0..self.width as i64 {
                if self.cells[(ky * self.width as i64 + kx) as usize] {
                    out.push((kx - ax, ky - ay));
                }
            }
        }
        out
    }
}

/// Minkowski dilation clipped to the frame.
pub fn dilate(mask: &BinaryMask, kernel: &Kernel) -> BinaryMask {
    let w = mask.width() as i64;
    let h = mask.height() as i64;
    let offsets = kernel.offsets();
    let mut out = BinaryMask::new(mask.width(), mask.height());
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x as u32, y as u32) {
                continue;
            }
            for &(ox, oy) in &offsets {
                let nx = x + ox;
                let ny = y + oy;
                if nx >= 0 && ny >= 0 && nx < w && ny < h {
                    out.set(nx as u32, ny as u32, true);
                }
            }
        }
    }
    out
}

/// Erosion; a pixel survives only when every kernel offset lands on a set
/// in-frame bit.
pub fn erode(mask: &BinaryMask, kernel: &Kernel) -> BinaryMask {
    let w = mask.width() as i64;
    let h = mask.height() as i64;
    let offsets = kernel.offsets();
    let mut out = BinaryMask::new(mask.width(), mask.height());
    for y in 0..h {
        'pixel: for x in 0..w {
            for &(ox, oy) in &offsets {
                let nx = x + ox;
                let ny = y + oy;
                if nx < 0 || ny < 0 || nx >= w || ny >= h || !mask.get(nx as u32, ny as u32) {
                    continue 'pixel;
                }
            }
            out.set(x as u32, y as u32, true);
        }
    }
    out
}

/// Closing: dilation followed by erosion with the same element.
pub fn close(mask: &BinaryMask, kernel: &Kernel) -> BinaryMask {
    erode(&dilate(mask, kernel), kernel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Set-algebra oracle for dilation: union of kernel translates.
    fn slow_dilate(mask: &BinaryMask, kernel: &Kernel) -> BinaryMask {
        let w = mask.width() as i64;
        let h = mask.height() as i64;
        let mut out = BinaryMask::new(mask.width(), mask.height());
        let offsets = kernel.offsets();
        for y in 0..h {
            for x in 0..w {
                let hit = offsets.iter().any(|&(ox, oy)| {
                    let sx = x - ox;
                    let sy = y - oy;
                    sx >= 0 && sy >= 0 && sx < w && sy < h && mask.get(sx as u32, sy as u32)
                });
                out.set(x as u32, y as u32, hit);
            }
        }
        out
    }

    #[test]
    fn empty_mask_stays_empty() {
        let mask = BinaryMask::new(20, 20);
        let k = Kernel::square(3);
        assert_eq!(dilate(&mask, &k).popcount(), 0);
        assert_eq!(close(&mask, &k).popcount(), 0);
    }

    #[test]
    fn single_bit_dilates_to_block() {
        let mut mask = BinaryMask::new(9, 9);
        mask.set(4, 4, true);
        let out = dilate(&mask, &Kernel::square(3));
        assert_eq!(out.popcount(), 9);
        for y in 3..=5 {
            for x in 3..=5 {
                assert!(out.get(x, y));
            }
        }
    }

    #[test]
    fn close_fills_two_pixel_gap() {
        let mut mask = BinaryMask::new(15, 15);
        mask.set(5, 7, true);
        mask.set(8, 7, true);
        let k = Kernel::square(3);
        let closed = close(&mask, &k);
        assert!(closed.get(5, 7) && closed.get(8, 7));
        assert!(closed.get(6, 7) && closed.get(7, 7), "gap must close");
        // Oracle: dilate then erode by brute force.
        let oracle = erode(&slow_dilate(&mask, &k), &k);
        assert_eq!(closed, oracle);
    }

    proptest! {
        #[test]
        fn dilation_never_shrinks(bits in proptest::collection::vec(any::<bool>(), 12 * 12)) {
            let mask = BinaryMask::from_bits(12, 12, bits);
            let k = Kernel::square(3);
            prop_assert!(dilate(&mask, &k).popcount() >= mask.popcount());
        }

        #[test]
        fn closing_is_idempotent(bits in proptest::collection::vec(any::<bool>(), 12 * 12)) {
            let mask = BinaryMask::from_bits(12, 12, bits);
            let k = Kernel::square(3);
            let once = close(&mask, &k);
            let twice = close(&once, &k);
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn dilate_matches_set_algebra_oracle(
            bits in proptest::collection::vec(any::<bool>(), 10 * 10),
            kbits in proptest::collection::vec(any::<bool>(), 9),
        ) {
            prop_assume!(kbits.iter().any(|&b| b));
            let mask = BinaryMask::from_bits(10, 10, bits);
            let k = Kernel::from_cells(3, 3, kbits);
            prop_assert_eq!(dilate(&mask, &k), slow_dilate(&mask, &k));
        }
    }
}
