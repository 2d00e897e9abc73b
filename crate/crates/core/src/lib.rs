//! Blind multi-image steganography over sparse block-DCT measurements.
//!
//! Up to four grayscale secret images are hidden in one grayscale cover. The
//! cover is split into four parity sub-images; each sub-image is cut into
//! blocks whose zig-zag DCT coefficients are divided into a large head and a
//! small tail. The tail is projected through a seeded random matrix, secret
//! coefficients are folded into the measurements, and the stego block is
//! rebuilt by solving a LASSO problem with ADMM. Extraction needs only the
//! stego image and the key.

pub mod codec;
pub mod config;
pub mod error;
pub mod harness;
pub mod image_io;
pub mod lasso;
pub mod measurement;
pub mod metrics;
pub mod pipeline;
pub mod sampling;
pub mod transform;

pub use config::{load_key, save_key, validate, SabmisConfig, SecretKey};
pub use error::{Error, Result};
pub use image_io::{GrayImage, RealImage};
pub use pipeline::{capacity, EmbedOptions, Sabmis, Slot};
