//! Block partitioning, orthonormal 2-D DCT-II, and zig-zag serialization.
//!
//! Blocks are enumerated column-major over the block grid: block `i` sits at
//! grid row `i % rows` and grid column `i / rows`. Embedding and extraction
//! both rely on this order.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock, RwLock};

use crate::error::{Error, Result};
use crate::image_io::RealImage;

/// Square block of samples or coefficients, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    side: usize,
    coeffs: Vec<f64>,
}

impl Block {
    pub fn new(side: usize, coeffs: Vec<f64>) -> Result<Self> {
        if side == 0 || coeffs.len() != side * side {
            return Err(Error::Dimension(format!(
                "block of side {side} needs {} values, got {}",
                side * side,
                coeffs.len()
            )));
        }
        Ok(Self { side, coeffs })
    }

    pub fn zeros(side: usize) -> Self {
        Self {
            side,
            coeffs: vec![0.0; side * side],
        }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.coeffs[row * self.side + col]
    }
}

/// Zig-zag ordered coefficient vector of one block.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockVector {
    values: Vec<f64>,
}

impl BlockVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Splits into the first `p1` entries (large, low-frequency) and the
    /// remaining `p2` entries. Requires `p1 <= p2`.
    pub fn split(&self, p1: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.values.len();
        if p1 > n || p1 > n - p1 {
            return Err(Error::InvalidArgument(format!(
                "head length {p1} invalid for vector of length {n} (need p1 <= p2)"
            )));
        }
        Ok((self.values[..p1].to_vec(), self.values[p1..].to_vec()))
    }
}

/// Per-side lookup tables: the orthonormal DCT basis and the zig-zag order.
#[derive(Debug)]
struct Tables {
    side: usize,
    /// `basis[k * side + n]` is the k-th DCT basis vector sampled at n.
    basis: Vec<f64>,
    /// Raster index of the i-th zig-zag position.
    zigzag: Vec<usize>,
}

impl Tables {
    fn new(side: usize) -> Self {
        let n = side as f64;
        let mut basis = vec![0.0; side * side];
        for k in 0..side {
            let scale = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
            for x in 0..side {
                basis[k * side + x] = scale * (PI * (2 * x + 1) as f64 * k as f64 / (2.0 * n)).cos();
            }
        }
        Self {
            side,
            basis,
            zigzag: zigzag_order(side),
        }
    }
}

fn tables(side: usize) -> Arc<Tables> {
    static CACHE: OnceLock<RwLock<HashMap<usize, Arc<Tables>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(t) = cache.read().unwrap().get(&side) {
        return t.clone();
    }
    cache
        .write()
        .unwrap()
        .entry(side)
        .or_insert_with(|| Arc::new(Tables::new(side)))
        .clone()
}

/// Raster indices of an `side x side` block in zig-zag order: anti-diagonals
/// from (0,0), first step rightward, alternating direction.
pub fn zigzag_order(side: usize) -> Vec<usize> {
    let mut order = Vec::with_capacity(side * side);
    if side == 0 {
        return order;
    }
    for d in 0..(2 * side - 1) {
        let lo = d.saturating_sub(side - 1);
        let hi = d.min(side - 1);
        if d % 2 == 0 {
            // up-right: row decreasing
            for row in (lo..=hi).rev() {
                order.push(row * side + (d - row));
            }
        } else {
            for row in lo..=hi {
                order.push(row * side + (d - row));
            }
        }
    }
    order
}

pub fn partition_blocks(img: &RealImage, side: usize) -> Result<Vec<Block>> {
    let (w, h) = (img.width(), img.height());
    if side == 0 || w % side != 0 || h % side != 0 {
        return Err(Error::Dimension(format!(
            "block side {side} does not divide {w}x{h}"
        )));
    }
    let (rows, cols) = (h / side, w / side);
    let mut blocks = Vec::with_capacity(rows * cols);
    for bc in 0..cols {
        for br in 0..rows {
            let mut coeffs = Vec::with_capacity(side * side);
            for r in 0..side {
                let start = (br * side + r) * w + bc * side;
                coeffs.extend_from_slice(&img.data()[start..start + side]);
            }
            blocks.push(Block { side, coeffs });
        }
    }
    Ok(blocks)
}

pub fn assemble_blocks(blocks: &[Block], width: usize, height: usize) -> Result<RealImage> {
    let side = blocks.first().map(|b| b.side).unwrap_or(0);
    if side == 0 || !width.is_multiple_of(side) || !height.is_multiple_of(side) {
        return Err(Error::Dimension(format!(
            "cannot tile {width}x{height} with blocks of side {side}"
        )));
    }
    let (rows, cols) = (height / side, width / side);
    if blocks.len() != rows * cols || blocks.iter().any(|b| b.side != side) {
        return Err(Error::Dimension(format!(
            "{width}x{height} needs {} blocks of side {side}, got {}",
            rows * cols,
            blocks.len()
        )));
    }
    let mut img = RealImage::zeros(width, height)?;
    let data = img.data_mut();
    for (i, block) in blocks.iter().enumerate() {
        let (br, bc) = (i % rows, i / rows);
        for r in 0..side {
            let start = (br * side + r) * width + bc * side;
            data[start..start + side].copy_from_slice(&block.coeffs[r * side..(r + 1) * side]);
        }
    }
    Ok(img)
}

/// Computes `A X A^T` (forward) or `A^T X A` (inverse) for the basis `A`.
fn separable(block: &Block, inverse: bool) -> Block {
    let n = block.side;
    let t = tables(n);
    let a = |i: usize, j: usize| {
        if inverse {
            t.basis[j * n + i]
        } else {
            t.basis[i * n + j]
        }
    };
    // tmp = A X
    let mut tmp = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a(i, k);
            for j in 0..n {
                tmp[i * n + j] += aik * block.coeffs[k * n + j];
            }
        }
    }
    // out = tmp A^T
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for k in 0..n {
                acc += tmp[i * n + k] * a(j, k);
            }
            out[i * n + j] = acc;
        }
    }
    Block {
        side: n,
        coeffs: out,
    }
}

/// Orthonormal 2-D DCT-II.
pub fn dct2(block: &Block) -> Block {
    separable(block, false)
}

/// Inverse of [`dct2`] (orthonormal DCT-III).
pub fn idct2(block: &Block) -> Block {
    separable(block, true)
}

pub fn zigzag(block: &Block) -> BlockVector {
    let t = tables(block.side);
    BlockVector {
        values: t.zigzag.iter().map(|&i| block.coeffs[i]).collect(),
    }
}

pub fn inverse_zigzag(vec: &BlockVector) -> Result<Block> {
    let len = vec.values.len();
    let side = (len as f64).sqrt().round() as usize;
    if side == 0 || side * side != len {
        return Err(Error::Dimension(format!(
            "zig-zag vector length {len} is not a perfect square"
        )));
    }
    let t = tables(side);
    debug_assert_eq!(t.side, side);
    let mut coeffs = vec![0.0; len];
    for (v, &i) in vec.values.iter().zip(&t.zigzag) {
        coeffs[i] = *v;
    }
    Ok(Block { side, coeffs })
}
