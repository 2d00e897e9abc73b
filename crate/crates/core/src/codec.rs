//! Coefficient-domain embedding rule and its blind inverse.
//!
//! Formulas below use 1-based indices. With measurements `y` (length
//! `p1 + p3`) and secret coefficients `t` (length `p4`), embedding sets
//!
//! ```text
//! y'(p1)  = y(p1 - 2c)   + alpha * t(1)
//! y'(j)   = y(j - c)     + beta  * t(j - p1 + c + 1)      j = p1-c+1 ..= p1-1
//! y'(k)   = y(k - p4 + c) + gamma * t(k - p1 - p4 + c)    k = p1+p4+1 ..= p1+2p4-c
//! ```
//!
//! and leaves every other entry unchanged. Extraction takes the differences
//! back and divides by the gains. It is an exact inverse as long as no
//! reference entry on the right-hand side is also a written entry, which
//! [`EmbedConstants::validate`] checks.

use std::collections::BTreeSet;
use std::ops::RangeInclusive;

use crate::error::{Error, Result};
use crate::measurement::MeasurementVector;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EmbedConstants {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub c: usize,
    pub p1: usize,
    pub p4: usize,
}

impl EmbedConstants {
    /// Values used throughout the experiments: `alpha=0.01, beta=0.1, gamma=1, c=6`.
    pub const fn defaults(p1: usize, p4: usize) -> Self {
        Self {
            alpha: 0.01,
            beta: 0.1,
            gamma: 1.0,
            c: 6,
            p1,
            p4,
        }
    }

    fn beta_range(&self) -> RangeInclusive<usize> {
        // j in p1-c+1 ..= p1-1 (empty when c = 1)
        (self.p1 + 1 - self.c)..=(self.p1 - 1)
    }

    fn gamma_range(&self) -> RangeInclusive<usize> {
        (self.p1 + self.p4 + 1)..=(self.p1 + 2 * self.p4 - self.c)
    }

    /// Lists every broken constraint for measurement vectors of length
    /// `p1 + p3`. An empty list means the constants are usable.
    pub fn validate(&self, p3: usize) -> Vec<String> {
        let mut errs = Vec::new();
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma)] {
            if v == 0.0 || !v.is_finite() {
                errs.push(format!("{name} must be finite and nonzero (got {v})"));
            }
        }
        if self.c < 1 || self.c >= self.p4 {
            errs.push(format!("need 1 <= c < p4 (c={}, p4={})", self.c, self.p4));
        }
        let len = self.p1 as u128 + p3 as u128;
        if self.p4 as u128 >= len {
            errs.push(format!(
                "need p4 < p1 + p3 (p4={}, p1+p3={len})",
                self.p4
            ));
        }
        if (self.p1 as u128) < 2 * self.c as u128 + 1 {
            errs.push(format!(
                "need p1 - 2c >= 1 (p1={}, c={})",
                self.p1, self.c
            ));
        }
        if self.p1 as u128 + 2 * self.p4 as u128 > len + self.c as u128 {
            errs.push(format!(
                "need p1 + 2*p4 - c <= p1 + p3 (p1={}, p4={}, c={}, p3={p3})",
                self.p1, self.p4, self.c
            ));
        }
        if errs.is_empty() {
            let clash = self.read_write_overlap();
            if !clash.is_empty() {
                errs.push(format!(
                    "embedding overwrites entries that extraction reads as references: {clash:?}"
                ));
            }
        }
        errs
    }

    fn check(&self, len: usize) -> Result<()> {
        let errs = match len.checked_sub(self.p1) {
            Some(p3) => self.validate(p3),
            None => vec![format!("measurement length {len} shorter than p1={}", self.p1)],
        };
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(errs.join("; ")))
        }
    }

    /// Overlapping (write, reference) interval pairs, computed on interval
    /// bounds so huge parameters cost nothing. Requires `1 <= c < p4` and
    /// `p1 > 2c`.
    fn read_write_overlap(&self) -> Vec<((u128, u128), (u128, u128))> {
        let (p1, p4, c) = (self.p1 as u128, self.p4 as u128, self.c as u128);
        let writes = [(p1, p1), (p1 + 1 - c, p1 - 1), (p1 + p4 + 1, p1 + 2 * p4 - c)];
        let refs = [(p1 - 2 * c, p1 - 2 * c), (p1 + 1 - 2 * c, p1 - c - 1), (p1 + c + 1, p1 + p4)];
        let mut out = Vec::new();
        for w in writes.iter().filter(|w| w.0 <= w.1) {
            for r in refs.iter().filter(|r| r.0 <= r.1) {
                if w.0 <= r.1 && r.0 <= w.1 {
                    out.push((*w, *r));
                }
            }
        }
        out
    }

    /// 1-based indices written by [`embed_block`].
    pub fn write_indices(&self) -> BTreeSet<usize> {
        let mut s = BTreeSet::from([self.p1]);
        s.extend(self.beta_range());
        s.extend(self.gamma_range());
        s
    }

    /// 1-based indices read as unmodified references by [`extract_block`].
    pub fn reference_indices(&self) -> BTreeSet<usize> {
        let mut s = BTreeSet::from([self.p1 - 2 * self.c]);
        s.extend(self.beta_range().map(|j| j - self.c));
        s.extend(self.gamma_range().map(|k| k + self.c - self.p4));
        s
    }
}

/// First `p4` zig-zag DCT coefficients of one secret block.
#[derive(Clone, Debug, PartialEq)]
pub struct SecretCoefficients {
    values: Vec<f64>,
}

impl SecretCoefficients {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

pub fn embed_block(
    y: &MeasurementVector,
    t: &SecretCoefficients,
    k: &EmbedConstants,
) -> Result<MeasurementVector> {
    k.check(y.len())?;
    if y.p1() != k.p1 {
        return Err(Error::Dimension(format!(
            "measurement head length {} does not match p1={}",
            y.p1(),
            k.p1
        )));
    }
    if t.values.len() != k.p4 {
        return Err(Error::Dimension(format!(
            "expected {} secret coefficients, got {}",
            k.p4,
            t.values.len()
        )));
    }
    let mut out = y.clone();
    embed_in_place(y.values(), out.values_mut(), &t.values, k);
    Ok(out)
}

/// Writes the embedded entries of `src` into `dst` (both 0-based slices of
/// the same length). Constants must already be validated.
pub(crate) fn embed_in_place(src: &[f64], dst: &mut [f64], t: &[f64], k: &EmbedConstants) {
    let (p1, p4, c) = (k.p1, k.p4, k.c);
    // `at(i)` maps a 1-based index to the slice.
    let at = |i: usize| i - 1;
    dst[at(p1)] = src[at(p1 - 2 * c)] + k.alpha * t[at(1)];
    for j in k.beta_range() {
        dst[at(j)] = src[at(j - c)] + k.beta * t[at(j + c + 1 - p1)];
    }
    for kk in k.gamma_range() {
        dst[at(kk)] = src[at(kk + c - p4)] + k.gamma * t[at(kk + c - p1 - p4)];
    }
}

pub fn extract_block(y: &MeasurementVector, k: &EmbedConstants) -> Result<SecretCoefficients> {
    k.check(y.len())?;
    Ok(SecretCoefficients {
        values: extract_from_slice(y.values(), k),
    })
}

pub(crate) fn extract_from_slice(y: &[f64], k: &EmbedConstants) -> Vec<f64> {
    let (p1, p4, c) = (k.p1, k.p4, k.c);
    let at = |i: usize| i - 1;
    let mut t = vec![0.0; p4];
    t[at(1)] = (y[at(p1)] - y[at(p1 - 2 * c)]) / k.alpha;
    for j in k.beta_range() {
        t[at(j + c + 1 - p1)] = (y[at(j)] - y[at(j - c)]) / k.beta;
    }
    for kk in k.gamma_range() {
        t[at(kk + c - p1 - p4)] = (y[at(kk)] - y[at(kk + c - p4)]) / k.gamma;
    }
    t
}
