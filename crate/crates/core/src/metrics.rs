//! Image quality measures: MSE/PSNR, MSSIM, NCC, entropy and NAE.

use crate::error::{Error, Result};
use crate::image_io::GrayImage;

const PEAK: f64 = 255.0;

fn same_shape(a: &GrayImage, b: &GrayImage) -> Result<()> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::Dimension(format!(
            "images differ in size: {}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    Ok(())
}

pub fn mse(a: &GrayImage, b: &GrayImage) -> Result<f64> {
    same_shape(a, b)?;
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = f64::from(x) - f64::from(y);
            d * d
        })
        .sum();
    Ok(sum / a.data().len().max(1) as f64)
}

/// PSNR in dB; identical images give `f64::INFINITY`.
pub fn psnr(a: &GrayImage, b: &GrayImage) -> Result<f64> {
    Ok(psnr_from_mse(mse(a, b)?))
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (PEAK * PEAK / mse).log10()
    }
}

/// Gaussian window and stabilizing constants for SSIM.
#[derive(Clone, Debug, PartialEq)]
pub struct SsimParams {
    side: usize,
    /// 1-D weights; the window is their outer product.
    weights: Vec<f64>,
    pub c1: f64,
    pub c2: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self::gaussian(11, 1.5, (0.01 * PEAK).powi(2), (0.03 * PEAK).powi(2))
            .expect("valid defaults")
    }
}

impl SsimParams {
    pub fn gaussian(side: usize, sigma: f64, c1: f64, c2: f64) -> Result<Self> {
        let positive = |x: f64| x > 0.0 && x.is_finite();
        if side == 0 || !positive(sigma) || !positive(c1) || !positive(c2) {
            return Err(Error::InvalidArgument(
                "SSIM needs a non-empty window, sigma > 0 and C1, C2 > 0".into(),
            ));
        }
        let center = (side as f64 - 1.0) / 2.0;
        let mut weights: Vec<f64> = (0..side)
            .map(|i| (-(i as f64 - center).powi(2) / (2.0 * sigma * sigma)).exp())
            .collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(Self {
            side,
            weights,
            c1,
            c2,
        })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    /// Window weight at `(row, col)`.
    pub fn weight(&self, row: usize, col: usize) -> f64 {
        self.weights[row] * self.weights[col]
    }
}

/// Separable weighted sum over every fully interior window ("valid" mode).
fn filter_valid(src: &[f64], width: usize, height: usize, w: &[f64]) -> Vec<f64> {
    let k = w.len();
    let (ow, oh) = (width + 1 - k, height + 1 - k);
    let mut rows = vec![0.0; ow * height];
    for r in 0..height {
        let line = &src[r * width..(r + 1) * width];
        for c in 0..ow {
            rows[r * ow + c] = w.iter().zip(&line[c..c + k]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for r in 0..oh {
        for (i, wi) in w.iter().enumerate() {
            let line = &rows[(r + i) * ow..(r + i + 1) * ow];
            for (o, v) in out[r * ow..(r + 1) * ow].iter_mut().zip(line) {
                *o += wi * v;
            }
        }
    }
    out
}

/// Mean SSIM over all interior windows, stride 1.
pub fn mssim(a: &GrayImage, b: &GrayImage, params: &SsimParams) -> Result<f64> {
    same_shape(a, b)?;
    let (w, h, k) = (a.width(), a.height(), params.side);
    if w < k || h < k {
        return Err(Error::Dimension(format!(
            "image {w}x{h} is smaller than the {k}x{k} window"
        )));
    }
    let x: Vec<f64> = a.data().iter().map(|&v| f64::from(v)).collect();
    let y: Vec<f64> = b.data().iter().map(|&v| f64::from(v)).collect();
    let prod = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(u, v)| u * v).collect::<Vec<_>>();
    let mx = filter_valid(&x, w, h, &params.weights);
    let my = filter_valid(&y, w, h, &params.weights);
    let sxx = filter_valid(&prod(&x, &x), w, h, &params.weights);
    let syy = filter_valid(&prod(&y, &y), w, h, &params.weights);
    let sxy = filter_valid(&prod(&x, &y), w, h, &params.weights);
    let (c1, c2) = (params.c1, params.c2);
    let total: f64 = (0..mx.len())
        .map(|i| {
            let (ux, uy) = (mx[i], my[i]);
            let vx = sxx[i] - ux * ux;
            let vy = syy[i] - uy * uy;
            let cxy = sxy[i] - ux * uy;
            ((2.0 * ux * uy + c1) * (2.0 * cxy + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2))
        })
        .sum();
    Ok(total / mx.len() as f64)
}

/// `ΣΣ a·b / ΣΣ a²`; not symmetric in its arguments.
pub fn ncc(a: &GrayImage, b: &GrayImage) -> Result<f64> {
    same_shape(a, b)?;
    let (mut num, mut den) = (0.0, 0.0);
    for (&x, &y) in a.data().iter().zip(b.data()) {
        let (x, y) = (f64::from(x), f64::from(y));
        num += x * y;
        den += x * x;
    }
    if den == 0.0 {
        return Err(Error::InvalidArgument("NCC reference image is all zero".into()));
    }
    Ok(num / den)
}

pub fn histogram(img: &GrayImage) -> [u64; 256] {
    let mut h = [0u64; 256];
    for &v in img.data() {
        h[v as usize] += 1;
    }
    h
}

/// Shannon entropy of the 256-bin histogram in bits.
pub fn entropy(img: &GrayImage) -> f64 {
    let n = img.data().len() as f64;
    if n == 0.0 {
        return 0.0;
    }
    histogram(img)
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum::<f64>()
        .max(0.0)
}

/// `ΣΣ |a−b| / ΣΣ a`.
pub fn nae(a: &GrayImage, b: &GrayImage) -> Result<f64> {
    same_shape(a, b)?;
    let (mut num, mut den) = (0.0, 0.0);
    for (&x, &y) in a.data().iter().zip(b.data()) {
        num += (f64::from(x) - f64::from(y)).abs();
        den += f64::from(x);
    }
    if den == 0.0 {
        return Err(Error::InvalidArgument("NAE reference image is all zero".into()));
    }
    Ok(num / den)
}

/// ℓ1 distance between normalized histograms, in `[0, 2]`.
pub fn histogram_l1(a: &GrayImage, b: &GrayImage) -> f64 {
    let (ha, hb) = (histogram(a), histogram(b));
    let (na, nb) = (a.data().len().max(1) as f64, b.data().len().max(1) as f64);
    ha.iter()
        .zip(&hb)
        .map(|(&x, &y)| (x as f64 / na - y as f64 / nb).abs())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn img(w: usize, h: usize, data: Vec<u8>) -> GrayImage {
        GrayImage::new(w, h, data).unwrap()
    }

    fn lcg_image(seed: u64, w: usize, h: usize) -> GrayImage {
        let mut s = seed;
        let data = (0..w * h)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (s >> 56) as u8
            })
            .collect();
        img(w, h, data)
    }

    #[test]
    fn mse_examples() {
        let a = lcg_image(1, 8, 8);
        assert_eq!(mse(&a, &a).unwrap(), 0.0);
        assert_eq!(mse(&img(1, 1, vec![0]), &img(1, 1, vec![255])).unwrap(), 65025.0);
        assert_eq!(mse(&img(2, 1, vec![0, 0]), &img(2, 1, vec![3, 4])).unwrap(), 12.5);
        assert!(mse(&a, &lcg_image(1, 8, 4)).is_err());
    }

    #[test]
    fn mse_matches_double_loop() {
        for seed in 0..20 {
            let (a, b) = (lcg_image(seed, 16, 16), lcg_image(seed + 100, 16, 16));
            let mut acc = 0.0;
            for r in 0..16 {
                for c in 0..16 {
                    let d = f64::from(a.get(r, c)) - f64::from(b.get(r, c));
                    acc += d * d;
                }
            }
            assert!((mse(&a, &b).unwrap() - acc / 256.0).abs() < 1e-9);
        }
    }

    #[test]
    fn psnr_examples() {
        let a = lcg_image(2, 4, 4);
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
        assert!(psnr_from_mse(65025.0).abs() < 1e-12);
        assert!((psnr_from_mse(6.5025) - 40.0).abs() < 1e-12);
    }

    #[test]
    fn ssim_params() {
        let p = SsimParams::default();
        let total: f64 = (0..11)
            .flat_map(|r| (0..11).map(move |c| (r, c)))
            .map(|(r, c)| p.weight(r, c))
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!((p.c1 - 6.5025).abs() < 1e-12);
        assert!((p.c2 - 58.5225).abs() < 1e-12);
        assert!(SsimParams::gaussian(11, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn mssim_examples() {
        let p = SsimParams::default();
        let a = lcg_image(3, 32, 24);
        assert!((mssim(&a, &a, &p).unwrap() - 1.0).abs() < 1e-12);
        let z = img(16, 16, vec![0; 256]);
        let f = img(16, 16, vec![255; 256]);
        let want = p.c1 / (255.0f64.powi(2) + p.c1);
        assert!((mssim(&z, &f, &p).unwrap() - want).abs() < 1e-12);
        assert!(mssim(&img(10, 10, vec![1; 100]), &img(10, 10, vec![1; 100]), &p).is_err());
    }

    #[test]
    fn mssim_matches_direct_window_sum() {
        let p = SsimParams::default();
        let (a, b) = (lcg_image(4, 14, 13), lcg_image(5, 14, 13));
        let mut acc = 0.0;
        let mut count = 0;
        for r0 in 0..=13 - 11 {
            for c0 in 0..=14 - 11 {
                let (mut ux, mut uy) = (0.0, 0.0);
                for r in 0..11 {
                    for c in 0..11 {
                        let w = p.weight(r, c);
                        ux += w * f64::from(a.get(r0 + r, c0 + c));
                        uy += w * f64::from(b.get(r0 + r, c0 + c));
                    }
                }
                let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
                for r in 0..11 {
                    for c in 0..11 {
                        let w = p.weight(r, c);
                        let dx = f64::from(a.get(r0 + r, c0 + c)) - ux;
                        let dy = f64::from(b.get(r0 + r, c0 + c)) - uy;
                        vx += w * dx * dx;
                        vy += w * dy * dy;
                        cxy += w * dx * dy;
                    }
                }
                acc += ((2.0 * ux * uy + p.c1) * (2.0 * cxy + p.c2))
                    / ((ux * ux + uy * uy + p.c1) * (vx + vy + p.c2));
                count += 1;
            }
        }
        assert_eq!(count, 3 * 4);
        assert!((mssim(&a, &b, &p).unwrap() - acc / count as f64).abs() < 1e-10);
    }

    #[test]
    fn ncc_examples() {
        let a = img(3, 1, vec![10, 20, 30]);
        assert_eq!(ncc(&a, &a).unwrap(), 1.0);
        assert_eq!(ncc(&a, &img(3, 1, vec![20, 40, 60])).unwrap(), 2.0);
        assert!(ncc(&img(1, 1, vec![0]), &a.clone()).is_err());
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy(&img(4, 4, vec![9; 16])), 0.0);
        let mut half = vec![0u8; 8];
        half.extend([255u8; 8]);
        assert!((entropy(&img(4, 4, half)) - 1.0).abs() < 1e-12);
        let all: Vec<u8> = (0..=255).collect();
        assert!((entropy(&img(16, 16, all)) - 8.0).abs() < 1e-12);
    }

    #[test]
    fn nae_examples() {
        let a = img(2, 2, vec![100; 4]);
        assert_eq!(nae(&a, &a).unwrap(), 0.0);
        assert!((nae(&a, &img(2, 2, vec![101; 4])).unwrap() - 0.01).abs() < 1e-15);
        assert!(nae(&img(2, 2, vec![0; 4]), &a).is_err());
    }

    #[test]
    fn histogram_distance() {
        let a = img(2, 1, vec![0, 0]);
        let b = img(2, 1, vec![1, 1]);
        assert_eq!(histogram_l1(&a, &a), 0.0);
        assert_eq!(histogram_l1(&a, &b), 2.0);
    }

    proptest! {
        #[test]
        fn metric_properties(seed in any::<u64>(), other in any::<u64>()) {
            let a = lcg_image(seed, 12, 12);
            let b = lcg_image(other, 12, 12);
            prop_assert_eq!(mse(&a, &b).unwrap(), mse(&b, &a).unwrap());
            let e = entropy(&a);
            prop_assert!((0.0..=8.0).contains(&e));
            prop_assert!((mssim(&a, &a, &SsimParams::default()).unwrap() - 1.0).abs() < 1e-12);
            let s = mssim(&a, &b, &SsimParams::default()).unwrap();
            prop_assert!((-1.0..=1.0 + 1e-12).contains(&s));
            if a.data().iter().any(|&v| v > 0) {
                prop_assert_eq!(nae(&a, &a).unwrap(), 0.0);
            }
        }

        #[test]
        fn psnr_decreasing(m1 in 1e-6f64..1e5, m2 in 1e-6f64..1e5) {
            prop_assume!(m1 < m2);
            prop_assert!(psnr_from_mse(m1) > psnr_from_mse(m2));
        }
    }
}
