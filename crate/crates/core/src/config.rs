//! The secret key shared by sender and receiver, its JSON file format, and
//! validation of every cross-parameter constraint.
//!
//! The key file is a flat JSON object with exactly the fields of
//! [`SecretKey`]. Reals are written as decimal strings with 17 significant
//! digits so a save/load cycle is lossless; unknown fields are rejected.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::codec::EmbedConstants;
use crate::error::{Error, Result};
use crate::lasso::SolverConfig;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SecretKey {
    pub seed: u64,
    pub r: usize,
    pub b: usize,
    pub m: usize,
    pub l: usize,
    pub p1: usize,
    pub p2: usize,
    pub p3: usize,
    pub p4: usize,
    #[serde(with = "real_string")]
    pub alpha: f64,
    #[serde(with = "real_string")]
    pub beta: f64,
    #[serde(with = "real_string")]
    pub gamma: f64,
    pub c: usize,
}

impl SecretKey {
    /// 1024×1024 cover, 512×512 secrets, 8×8 blocks, `p1 = p2 = 32`,
    /// `p3 = 50·p2`, `p4 = 32`, `alpha = 0.01`, `beta = 0.1`, `gamma = 1`, `c = 6`.
    pub fn defaults(seed: u64) -> Self {
        let k = EmbedConstants::defaults(32, 32);
        Self {
            seed,
            r: 1024,
            b: 8,
            m: 512,
            l: 8,
            p1: k.p1,
            p2: 32,
            p3: 50 * 32,
            p4: k.p4,
            alpha: k.alpha,
            beta: k.beta,
            gamma: k.gamma,
            c: k.c,
        }
    }

    /// Defaults with a different cover side; secrets are half the cover side.
    pub fn with_cover_side(seed: u64, r: usize) -> Self {
        Self {
            r,
            m: r / 2,
            ..Self::defaults(seed)
        }
    }

    pub fn embed_constants(&self) -> EmbedConstants {
        EmbedConstants {
            alpha: self.alpha,
            beta: self.beta,
            gamma: self.gamma,
            c: self.c,
            p1: self.p1,
            p4: self.p4,
        }
    }

    /// The common guess of one for every embedding constant.
    pub fn with_unit_constants(&self) -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
            gamma: 1.0,
            c: 1,
            ..*self
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("key serialization cannot fail") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::KeyParse(e.to_string()))
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        serde_json::from_slice(bytes).map_err(|e| Error::KeyParse(e.to_string()))
    }
}

pub fn save_key(key: &SecretKey, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, key.to_json())?;
    Ok(())
}

pub fn load_key(path: impl AsRef<Path>) -> Result<SecretKey> {
    SecretKey::from_bytes(&std::fs::read(path)?)
}

mod real_string {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{v:.16e}"))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        let text = String::deserialize(d)?;
        text.trim()
            .parse::<f64>()
            .map_err(|_| de::Error::custom(format!("invalid real {text:?}")))
    }
}

/// One broken constraint.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub rule: &'static str,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.rule, self.detail)
    }
}

/// A key that passed validation, plus the sender-side solver settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SabmisConfig {
    pub r: usize,
    pub b: usize,
    pub m: usize,
    pub l: usize,
    pub p2: usize,
    pub p3: usize,
    pub embed: EmbedConstants,
    pub solver: SolverConfig,
    pub seed: u64,
}

impl SabmisConfig {
    pub fn key(&self) -> SecretKey {
        SecretKey {
            seed: self.seed,
            r: self.r,
            b: self.b,
            m: self.m,
            l: self.l,
            p1: self.embed.p1,
            p2: self.p2,
            p3: self.p3,
            p4: self.embed.p4,
            alpha: self.embed.alpha,
            beta: self.embed.beta,
            gamma: self.embed.gamma,
            c: self.embed.c,
        }
    }

    pub fn p1(&self) -> usize {
        self.embed.p1
    }

    pub fn p4(&self) -> usize {
        self.embed.p4
    }

    /// Blocks in one sub-image, `r² / (4b²)`.
    pub fn cover_blocks(&self) -> usize {
        (self.r / 2 / self.b).pow(2)
    }

    /// Blocks in one secret image, `m² / l²`.
    pub fn secret_blocks(&self) -> usize {
        (self.m / self.l).pow(2)
    }

    pub fn with_solver(self, solver: SolverConfig) -> Result<Self> {
        let errs = solver.validate();
        if errs.is_empty() {
            Ok(Self { solver, ..self })
        } else {
            Err(Error::Config(
                errs.into_iter()
                    .map(|detail| Violation {
                        rule: "solver",
                        detail,
                    })
                    .collect(),
            ))
        }
    }
}

/// Checks every constraint and reports all violations at once.
pub fn validate(key: &SecretKey) -> std::result::Result<SabmisConfig, Vec<Violation>> {
    let mut v = Vec::new();
    let mut push = |rule: &'static str, detail: String| v.push(Violation { rule, detail });

    let positive = [
        ("r", key.r),
        ("b", key.b),
        ("m", key.m),
        ("l", key.l),
        ("p1", key.p1),
        ("p2", key.p2),
        ("p3", key.p3),
        ("p4", key.p4),
        ("c", key.c),
    ];
    let zeros: Vec<&str> = positive.iter().filter(|(_, x)| *x == 0).map(|(n, _)| *n).collect();
    if !zeros.is_empty() {
        push("positive", format!("fields must be at least 1: {}", zeros.join(", ")));
    }
    // Products in u128 so absurd inputs cannot overflow.
    let sq = |x: usize| (x as u128) * (x as u128);

    if !key.r.is_multiple_of(2) {
        push("r_even", format!("cover side r={} must be even", key.r));
    }
    if key.b > 0 && !(key.r / 2).is_multiple_of(key.b) {
        push(
            "b_divides_subimage",
            format!("block side b={} must divide r/2={}", key.b, key.r / 2),
        );
    }
    if key.l > 0 && !key.m.is_multiple_of(key.l) {
        push("l_divides_m", format!("block side l={} must divide m={}", key.l, key.m));
    }
    // m²·4b² > r²·l²  <=>  2mb > rl  <=>  mb > floor(rl/2)
    if key.b > 0 && key.l > 0 && (key.m as u128) * (key.b as u128) > (key.r as u128) * (key.l as u128) / 2 {
        push(
            "block_count",
            format!(
                "secret blocks m²/l² must not exceed sub-image blocks r²/(4b²) (m={}, l={}, r={}, b={})",
                key.m, key.l, key.r, key.b
            ),
        );
    }
    if key.p1 as u128 + key.p2 as u128 != sq(key.b) {
        push(
            "p1_plus_p2",
            format!("p1 + p2 = {} must equal b² = {}", key.p1 as u128 + key.p2 as u128, sq(key.b)),
        );
    }
    if key.p1 > key.p2 {
        push("p1_le_p2", format!("need p1 <= p2 (p1={}, p2={})", key.p1, key.p2));
    }
    if key.p3 <= key.p2 {
        push("p3_gt_p2", format!("need p3 > p2 (p3={}, p2={})", key.p3, key.p2));
    }
    if key.p4 as u128 > sq(key.l) {
        push(
            "p4_le_l2",
            format!("p4={} exceeds the {} coefficients of a secret block", key.p4, sq(key.l)),
        );
    }
    if zeros.is_empty() {
        for detail in key.embed_constants().validate(key.p3) {
            push("embed_constants", detail);
        }
    } else {
        for (name, x) in [("alpha", key.alpha), ("beta", key.beta), ("gamma", key.gamma)] {
            if x == 0.0 || !x.is_finite() {
                push("embed_constants", format!("{name} must be finite and nonzero (got {x})"));
            }
        }
    }

    if v.is_empty() {
        Ok(SabmisConfig {
            r: key.r,
            b: key.b,
            m: key.m,
            l: key.l,
            p2: key.p2,
            p3: key.p3,
            embed: key.embed_constants(),
            solver: SolverConfig::default(),
            seed: key.seed,
        })
    } else {
        Err(v)
    }
}

/// [`validate`] with the violations wrapped in [`Error::Config`].
pub fn validated(key: &SecretKey) -> Result<SabmisConfig> {
    validate(key).map_err(Error::Config)
}
