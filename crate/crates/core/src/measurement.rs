//! The shared measurement matrix and the block projection `y = [head; Φ·tail]`.
//!
//! The matrix is regenerated from a seed on both ends, so generation must be
//! bit-reproducible:
//!
//! * stream: xoshiro256++ seeded through `seed_from_u64` (SplitMix64 expansion);
//! * uniforms: `((x >> 11) + 1) * 2^-53`, which lies in `(0, 1]`;
//! * normals: Box–Muller on consecutive uniform pairs `(u1, u2)` giving
//!   `sqrt(-2 ln u1) cos(2π u2)` then `sqrt(-2 ln u1) sin(2π u2)`, evaluated
//!   with the `libm` routines so results do not depend on the platform libm;
//! * entries are filled in column-major order, each column then divided by
//!   its ℓ2 norm once the whole matrix is drawn.

use nalgebra::{DMatrix, DVector};
use rand_xoshiro::rand_core::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{Error, Result};

/// Column-normalized Gaussian matrix of shape `p3 x p2`.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementMatrix {
    seed: u64,
    matrix: DMatrix<f64>,
}

impl MeasurementMatrix {
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of measurements, p3.
    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    /// Length of the projected tail, p2.
    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Spectral norm, for bounding projections.
    pub fn spectral_norm(&self) -> f64 {
        self.matrix
            .singular_values()
            .iter()
            .copied()
            .fold(0.0, f64::max)
    }
}

/// Linear measurements of one block: `p1` head entries then `p3` projections.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementVector {
    values: Vec<f64>,
    p1: usize,
}

impl MeasurementVector {
    pub fn new(values: Vec<f64>, p1: usize) -> Result<Self> {
        if p1 > values.len() {
            return Err(Error::Dimension(format!(
                "head length {p1} exceeds measurement length {}",
                values.len()
            )));
        }
        Ok(Self { values, p1 })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn p1(&self) -> usize {
        self.p1
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn head(&self) -> &[f64] {
        &self.values[..self.p1]
    }

    pub fn measured(&self) -> &[f64] {
        &self.values[self.p1..]
    }
}

struct NormalStream {
    rng: Xoshiro256PlusPlus,
    spare: Option<f64>,
}

impl NormalStream {
    fn new(seed: u64) -> Self {
        Self {
            rng: Xoshiro256PlusPlus::seed_from_u64(seed),
            spare: None,
        }
    }

    fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    fn next(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.uniform();
        let u2 = self.uniform();
        let radius = libm::sqrt(-2.0 * libm::log(u1));
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(radius * libm::sin(theta));
        radius * libm::cos(theta)
    }
}

pub fn generate_matrix(seed: u64, p3: usize, p2: usize) -> Result<MeasurementMatrix> {
    if p2 == 0 || p3 <= p2 {
        return Err(Error::InvalidArgument(format!(
            "measurement matrix needs p3 > p2 >= 1, got p3={p3}, p2={p2}"
        )));
    }
    let mut stream = NormalStream::new(seed);
    let mut values = Vec::with_capacity(p3 * p2);
    for _ in 0..p3 * p2 {
        values.push(stream.next());
    }
    let mut matrix = DMatrix::from_vec(p3, p2, values);
    for mut col in matrix.column_iter_mut() {
        let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        col /= norm;
    }
    Ok(MeasurementMatrix { seed, matrix })
}

pub fn project(head: &[f64], tail: &[f64], phi: &MeasurementMatrix) -> Result<MeasurementVector> {
    if tail.len() != phi.cols() {
        return Err(Error::Dimension(format!(
            "tail length {} does not match matrix width {}",
            tail.len(),
            phi.cols()
        )));
    }
    let measured = phi.matrix() * DVector::from_column_slice(tail);
    let mut values = Vec::with_capacity(head.len() + phi.rows());
    values.extend_from_slice(head);
    values.extend(measured.iter());
    MeasurementVector::new(values, head.len())
}

/// Projects many tails at once: `tails` is `p2 x n`, the result `p3 x n`.
pub fn project_tails(tails: &DMatrix<f64>, phi: &MeasurementMatrix) -> Result<DMatrix<f64>> {
    if tails.nrows() != phi.cols() {
        return Err(Error::Dimension(format!(
            "tail length {} does not match matrix width {}",
            tails.nrows(),
            phi.cols()
        )));
    }
    Ok(phi.matrix() * tails)
}
