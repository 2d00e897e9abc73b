//! End-to-end embedding, stego-image construction, and blind extraction.
//!
//! Embedding, per sub-image of the cover: partition into `b×b` blocks, DCT,
//! zig-zag, split into head and tail, measure `y = [head; Φ·tail]`, embed
//! the matching secret block's coefficients into `y`, then rebuild the block
//! from the head of `y` and the LASSO estimate of the tail. The four rebuilt
//! sub-images are interleaved back into the stego image.
//!
//! Extraction repeats the measurement step on the stego image and inverts
//! the embedding rule. It needs only the stego image and the key.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

pub use crate::config::SabmisConfig;
use crate::codec::{embed_in_place, extract_from_slice, SecretCoefficients};
use crate::error::{Error, Result};
use crate::image_io::{quantize, to_real, GrayImage, RealImage};
use crate::lasso::{prefactor, solve_from_correlation, FactorHandle, SolveResult};
use crate::measurement::{generate_matrix, project_tails, MeasurementMatrix, MeasurementVector};
use crate::sampling::{inverse_sample, subsample, SubImages};
use crate::transform::{
    assemble_blocks, dct2, idct2, inverse_zigzag, partition_blocks, zigzag, Block, BlockVector,
};

/// Which sub-image carries a secret, numbered 1..=4.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Slot(u8);

impl Slot {
    pub const ALL: [Slot; 4] = [Slot(1), Slot(2), Slot(3), Slot(4)];

    pub fn new(n: usize) -> Result<Self> {
        if (1..=4).contains(&n) {
            Ok(Slot(n as u8))
        } else {
            Err(Error::InvalidArgument(format!("slot must be 1..=4, got {n}")))
        }
    }

    pub fn number(self) -> usize {
        self.0 as usize
    }

    fn index(self) -> usize {
        self.0 as usize - 1
    }
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::str::FromStr for Slot {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let n = s
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::InvalidArgument(format!("invalid slot {s:?}")))?;
        Slot::new(n)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EmbedOptions {
    /// Copy sub-images without a secret verbatim instead of rebuilding them.
    pub passthrough_empty: bool,
}

/// Per-block solver statistics gathered during embedding.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolveStats {
    pub iterations: Vec<usize>,
    pub converged: usize,
    pub polished: usize,
}

impl SolveStats {
    pub fn blocks(&self) -> usize {
        self.iterations.len()
    }

    pub fn median_iterations(&self) -> Option<usize> {
        if self.iterations.is_empty() {
            return None;
        }
        let mut v = self.iterations.clone();
        v.sort_unstable();
        Some(v[v.len() / 2])
    }

    fn absorb(&mut self, results: &[SolveResult]) {
        for r in results {
            self.iterations.push(r.iterations);
            self.converged += usize::from(r.converged);
            self.polished += usize::from(r.polished);
        }
    }
}

/// Everything produced by one embedding run.
#[derive(Clone, Debug)]
pub struct EmbedOutput {
    /// Unquantized stego image.
    pub stego: RealImage,
    pub stats: SolveStats,
    /// Embedded coefficients per slot (index 0 is slot 1).
    pub payload: [Option<Vec<SecretCoefficients>>; 4],
}

impl EmbedOutput {
    pub fn stego_gray(&self) -> GrayImage {
        quantize(&self.stego)
    }
}

/// Embedding capacity in bits per pixel: `n · m² · 8 / r²`.
pub fn capacity(cfg: &SabmisConfig, n_secrets: usize) -> Result<f64> {
    if !(1..=4).contains(&n_secrets) {
        return Err(Error::InvalidArgument(format!(
            "between 1 and 4 secrets can be embedded, got {n_secrets}"
        )));
    }
    let (m, r) = (cfg.m as f64, cfg.r as f64);
    Ok(n_secrets as f64 * m * m * 8.0 / (r * r))
}

/// A configured scheme instance: the regenerated matrix and its
/// factorization, shared read-only by every block.
#[derive(Clone, Debug)]
pub struct Sabmis {
    cfg: SabmisConfig,
    phi: MeasurementMatrix,
    handle: FactorHandle,
}

struct BlockMeasurements {
    /// Column `i` holds `y` of block `i`, length `p1 + p3`.
    y: DMatrix<f64>,
}

impl Sabmis {
    pub fn new(cfg: SabmisConfig) -> Result<Self> {
        let phi = generate_matrix(cfg.seed, cfg.p3, cfg.p2)?;
        let handle = prefactor(&phi, cfg.solver.rho)?;
        Ok(Self { cfg, phi, handle })
    }

    pub fn config(&self) -> &SabmisConfig {
        &self.cfg
    }

    pub fn matrix(&self) -> &MeasurementMatrix {
        &self.phi
    }

    pub fn factor(&self) -> &FactorHandle {
        &self.handle
    }

    /// First `p4` zig-zag DCT coefficients of every `l×l` block of a secret,
    /// in column-major block order.
    pub fn secret_coefficients(&self, secret: &GrayImage) -> Result<Vec<SecretCoefficients>> {
        let m = self.cfg.m;
        if secret.width() != m || secret.height() != m {
            return Err(Error::Dimension(format!(
                "secret must be {m}x{m}, got {}x{}",
                secret.width(),
                secret.height()
            )));
        }
        let p4 = self.cfg.p4();
        Ok(partition_blocks(&to_real(secret), self.cfg.l)?
            .par_iter()
            .map(|b| {
                let mut v = zigzag(&dct2(b)).into_values();
                v.truncate(p4);
                SecretCoefficients::new(v)
            })
            .collect())
    }

    fn measure(&self, part: &RealImage) -> Result<BlockMeasurements> {
        let (p1, p2, p3) = (self.cfg.p1(), self.cfg.p2, self.cfg.p3);
        let vectors: Vec<BlockVector> = partition_blocks(part, self.cfg.b)?
            .par_iter()
            .map(|b| zigzag(&dct2(b)))
            .collect();
        let n = vectors.len();
        let tails = DMatrix::from_fn(p2, n, |i, j| vectors[j].values()[p1 + i]);
        let measured = project_tails(&tails, &self.phi)?;
        let mut y = DMatrix::zeros(p1 + p3, n);
        for (j, v) in vectors.iter().enumerate() {
            y.view_mut((0, j), (p1, 1))
                .copy_from_slice(&v.values()[..p1]);
            y.view_mut((p1, j), (p3, 1)).copy_from(&measured.column(j));
        }
        Ok(BlockMeasurements { y })
    }

    /// Measurement vectors of every block of a sub-image, with `payload`
    /// embedded into the leading blocks when given.
    pub fn sub_image_measurements(
        &self,
        part: &RealImage,
        payload: Option<&[SecretCoefficients]>,
    ) -> Result<Vec<MeasurementVector>> {
        let mut meas = self.measure(part)?;
        if let Some(p) = payload {
            self.embed_payload(&mut meas, p)?;
        }
        meas.y
            .column_iter()
            .map(|c| MeasurementVector::new(c.iter().copied().collect(), self.cfg.p1()))
            .collect()
    }

    fn embed_payload(&self, meas: &mut BlockMeasurements, payload: &[SecretCoefficients]) -> Result<()> {
        if payload.len() > meas.y.ncols() {
            return Err(Error::Dimension(format!(
                "{} secret blocks do not fit into {} cover blocks",
                payload.len(),
                meas.y.ncols()
            )));
        }
        let k = self.cfg.embed;
        for (j, t) in payload.iter().enumerate() {
            if t.values().len() != k.p4 {
                return Err(Error::Dimension("secret coefficient length != p4".into()));
            }
            let src: Vec<f64> = meas.y.column(j).iter().copied().collect();
            let mut col = meas.y.column_mut(j);
            embed_in_place(&src, col.as_mut_slice(), t.values(), &k);
        }
        Ok(())
    }

    /// Rebuilds blocks from measurement vectors: the head is taken as-is and
    /// the tail is the LASSO estimate.
    fn reconstruct(&self, meas: &BlockMeasurements) -> Result<(Vec<Block>, Vec<SolveResult>)> {
        let (p1, p3) = (self.cfg.p1(), self.cfg.p3);
        let measured = meas.y.rows(p1, p3);
        let correlation = self.phi.matrix().tr_mul(&measured);
        let solver = &self.cfg.solver;
        let results: Vec<SolveResult> = if solver.warm_start {
            let mut out: Vec<SolveResult> = Vec::with_capacity(correlation.ncols());
            for j in 0..correlation.ncols() {
                let q: DVector<f64> = correlation.column(j).into_owned();
                let start = out.last().map(|r| r.solution.as_slice());
                out.push(solve_from_correlation(&q, &self.handle, solver, start)?);
            }
            out
        } else {
            (0..correlation.ncols())
                .into_par_iter()
                .map(|j| {
                    let q: DVector<f64> = correlation.column(j).into_owned();
                    solve_from_correlation(&q, &self.handle, solver, None)
                })
                .collect::<Result<_>>()?
        };
        let blocks = results
            .par_iter()
            .enumerate()
            .map(|(j, res)| {
                let mut s = Vec::with_capacity(p1 + res.solution.len());
                s.extend(meas.y.view((0, j), (p1, 1)).iter());
                s.extend_from_slice(&res.solution);
                Ok(idct2(&inverse_zigzag(&BlockVector::new(s))?))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((blocks, results))
    }

    /// Reconstructs one block from its (possibly embedded) measurements.
    pub fn reconstruct_block(&self, y: &MeasurementVector) -> Result<(Block, SolveResult)> {
        if y.len() != self.cfg.p1() + self.cfg.p3 || y.p1() != self.cfg.p1() {
            return Err(Error::Dimension("measurement vector shape does not match key".into()));
        }
        let meas = BlockMeasurements {
            y: DMatrix::from_column_slice(y.len(), 1, y.values()),
        };
        let (mut blocks, mut results) = self.reconstruct(&meas)?;
        Ok((blocks.remove(0), results.remove(0)))
    }

    fn process_part(
        &self,
        part: &RealImage,
        payload: Option<&[SecretCoefficients]>,
    ) -> Result<(RealImage, Vec<SolveResult>)> {
        let mut meas = self.measure(part)?;
        if let Some(p) = payload {
            self.embed_payload(&mut meas, p)?;
        }
        let (blocks, results) = self.reconstruct(&meas)?;
        Ok((assemble_blocks(&blocks, part.width(), part.height())?, results))
    }

    pub fn embed_real(
        &self,
        cover: &GrayImage,
        secrets: &[(Slot, &GrayImage)],
        opts: EmbedOptions,
    ) -> Result<EmbedOutput> {
        let r = self.cfg.r;
        if cover.width() != r || cover.height() != r {
            return Err(Error::Dimension(format!(
                "cover must be {r}x{r}, got {}x{}",
                cover.width(),
                cover.height()
            )));
        }
        if secrets.len() > 4 {
            return Err(Error::InvalidArgument(format!(
                "at most 4 secrets can be embedded, got {}",
                secrets.len()
            )));
        }
        let mut payload: [Option<Vec<SecretCoefficients>>; 4] = Default::default();
        for (slot, secret) in secrets {
            if payload[slot.index()].is_some() {
                return Err(Error::InvalidArgument(format!("slot {slot} used twice")));
            }
            payload[slot.index()] = Some(self.secret_coefficients(secret)?);
        }

        let parts = subsample(&to_real(cover))?;
        let mut stats = SolveStats::default();
        let mut rebuilt = Vec::with_capacity(4);
        for (k, part) in parts.parts().iter().enumerate() {
            match &payload[k] {
                None if opts.passthrough_empty => rebuilt.push(part.clone()),
                p => {
                    let (img, results) = self.process_part(part, p.as_deref())?;
                    stats.absorb(&results);
                    rebuilt.push(img);
                }
            }
        }
        let rebuilt: [RealImage; 4] = rebuilt.try_into().expect("four sub-images");
        let stego = inverse_sample(&SubImages::new(rebuilt)?)?;
        Ok(EmbedOutput {
            stego,
            stats,
            payload,
        })
    }

    pub fn embed(
        &self,
        cover: &GrayImage,
        secrets: &[(Slot, &GrayImage)],
        opts: EmbedOptions,
    ) -> Result<GrayImage> {
        Ok(self.embed_real(cover, secrets, opts)?.stego_gray())
    }

    /// Recovered coefficient vectors of the secret in `slot`.
    pub fn extract_coefficients(&self, stego: &RealImage, slot: Slot) -> Result<Vec<SecretCoefficients>> {
        let r = self.cfg.r;
        if stego.width() != r || stego.height() != r {
            return Err(Error::Dimension(format!(
                "stego image must be {r}x{r}, got {}x{}",
                stego.width(),
                stego.height()
            )));
        }
        let parts = subsample(stego)?;
        let meas = self.measure(parts.part(slot.index()))?;
        let k = self.cfg.embed;
        Ok((0..self.cfg.secret_blocks())
            .map(|j| SecretCoefficients::new(extract_from_slice(meas.y.column(j).as_slice(), &k)))
            .collect())
    }

    /// Builds the `m×m` secret image from recovered coefficients; positions
    /// after the first `p4` in zig-zag order are zero.
    pub fn secret_from_coefficients(&self, coeffs: &[SecretCoefficients]) -> Result<RealImage> {
        let l2 = self.cfg.l * self.cfg.l;
        let blocks = coeffs
            .par_iter()
            .map(|t| {
                let mut v = vec![0.0; l2];
                v[..t.values().len()].copy_from_slice(t.values());
                Ok(idct2(&inverse_zigzag(&BlockVector::new(v))?))
            })
            .collect::<Result<Vec<_>>>()?;
        assemble_blocks(&blocks, self.cfg.m, self.cfg.m)
    }

    pub fn extract_real(&self, stego: &RealImage, slots: &[Slot]) -> Result<Vec<GrayImage>> {
        slots
            .iter()
            .map(|&slot| {
                let coeffs = self.extract_coefficients(stego, slot)?;
                Ok(quantize(&self.secret_from_coefficients(&coeffs)?))
            })
            .collect()
    }

    /// Blind extraction: uses only the stego image and the key.
    pub fn extract(&self, stego: &GrayImage, slots: &[Slot]) -> Result<Vec<GrayImage>> {
        self.extract_real(&to_real(stego), slots)
    }
}

pub fn embed(cover: &GrayImage, secrets: &[(Slot, &GrayImage)], cfg: &SabmisConfig) -> Result<GrayImage> {
    Sabmis::new(*cfg)?.embed(cover, secrets, EmbedOptions::default())
}

pub fn extract(stego: &GrayImage, slots: &[Slot], cfg: &SabmisConfig) -> Result<Vec<GrayImage>> {
    Sabmis::new(*cfg)?.extract(stego, slots)
}
