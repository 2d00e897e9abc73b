#![allow(dead_code)]

use std::path::PathBuf;

use sabmis::harness::load_resized;
use sabmis::GrayImage;

/// Fixture images, in a fixed order.
pub const IMAGES: [&str; 10] = [
    "camera",
    "astronaut",
    "coffee",
    "chelsea",
    "coins",
    "moon",
    "rocket",
    "motorcycle",
    "retina",
    "clock",
];

pub fn image_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../testdata/images")
        .join(format!("{name}.png"))
}

pub fn image(name: &str, side: usize) -> GrayImage {
    load_resized(&image_path(name), side).unwrap_or_else(|e| panic!("{name}: {e}"))
}
