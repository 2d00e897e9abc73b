//! Parity sub-sampling of a square image into four quarter-size images.
//!
//! With 1-based coordinates the split is
//!
//! ```text
//! CI1(n1, n2) = CI(2n1 - 1, 2n2 - 1)    CI3(n1, n2) = CI(2n1 - 1, 2n2)
//! CI2(n1, n2) = CI(2n1,     2n2 - 1)    CI4(n1, n2) = CI(2n1,     2n2)
//! ```
//!
//! where the first coordinate is the row. Everything here is 0-based, so
//! part `k` (0..4) samples source row `2i + (k & 1)` and column `2j + (k >> 1)`.

use crate::error::{Error, Result};
use crate::image_io::RealImage;

/// The four sub-images `CI1..CI4`, stored at indices 0..4.
#[derive(Clone, Debug, PartialEq)]
pub struct SubImages {
    parts: [RealImage; 4],
    side: usize,
}

impl SubImages {
    pub fn new(parts: [RealImage; 4]) -> Result<Self> {
        let half = parts[0].width();
        for p in &parts {
            if p.width() != half || p.height() != half {
                return Err(Error::Dimension(format!(
                    "sub-images must all be {half}x{half} squares, found {}x{}",
                    p.width(),
                    p.height()
                )));
            }
        }
        Ok(Self {
            parts,
            side: 2 * half,
        })
    }

    pub fn parts(&self) -> &[RealImage; 4] {
        &self.parts
    }

    pub fn into_parts(self) -> [RealImage; 4] {
        self.parts
    }

    pub fn part(&self, k: usize) -> &RealImage {
        &self.parts[k]
    }

    /// Side length of the full image.
    pub fn side(&self) -> usize {
        self.side
    }
}

#[inline]
fn offsets(k: usize) -> (usize, usize) {
    (k & 1, k >> 1)
}

pub fn subsample(img: &RealImage) -> Result<SubImages> {
    let r = img.width();
    if img.height() != r || !r.is_multiple_of(2) {
        return Err(Error::Dimension(format!(
            "sub-sampling needs an even-sided square image, got {}x{}",
            img.width(),
            img.height()
        )));
    }
    let half = r / 2;
    let parts = std::array::from_fn(|k| {
        let (dr, dc) = offsets(k);
        let mut data = Vec::with_capacity(half * half);
        for i in 0..half {
            for j in 0..half {
                data.push(img.get(2 * i + dr, 2 * j + dc));
            }
        }
        RealImage::new(half, half, data).expect("shape computed above")
    });
    Ok(SubImages { parts, side: r })
}

pub fn inverse_sample(parts: &SubImages) -> Result<RealImage> {
    let r = parts.side;
    let half = r / 2;
    let mut out = RealImage::zeros(r, r)?;
    for (k, part) in parts.parts.iter().enumerate() {
        if part.width() != half || part.height() != half {
            return Err(Error::Dimension("mismatched sub-image dimensions".into()));
        }
        let (dr, dc) = offsets(k);
        for i in 0..half {
            for j in 0..half {
                out.set(2 * i + dr, 2 * j + dc, part.get(i, j));
            }
        }
    }
    Ok(out)
}
