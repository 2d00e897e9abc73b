//! Acceptance criteria 1-9. Each test writes one `criterion N ... PASS|FAIL`
//! line to stderr (bypassing the test harness capture) and then asserts.

mod common;

use std::io::Write;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use sabmis::codec::{embed_block, extract_block, EmbedConstants, SecretCoefficients};
use sabmis::config::{validate, SabmisConfig, SecretKey};
use sabmis::harness::{run_experiment, wrong_keys};
use sabmis::image_io::RealImage;
use sabmis::lasso::{prefactor, satisfies_kkt, solve_lasso, SolverConfig};
use sabmis::measurement::{generate_matrix, MeasurementVector};
use sabmis::metrics::{entropy, histogram_l1, mssim, nae, ncc, psnr, SsimParams};
use sabmis::sampling::{inverse_sample, subsample};
use sabmis::transform::{dct2, inverse_zigzag, zigzag, zigzag_order, Block};
use sabmis::{capacity, EmbedOptions, GrayImage, Sabmis, Slot};

use common::{image, image_path, IMAGES};

const SEED: u64 = 42;

fn report(n: usize, name: &str, pass: bool, detail: &str, elapsed: Duration) {
    let line = format!(
        "criterion {n} [{name}]: {} ({detail}; {:.1}s)\n",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
}

fn rng(seed: u64) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

fn full_cfg() -> SabmisConfig {
    validate(&SecretKey::defaults(SEED)).unwrap()
}

// ---------------------------------------------------------------------------
// Full-scale runs (1024 covers) shared by criteria 4, 6, 7 and 8

struct CoverRun {
    cover: &'static str,
    psnr: f64,
    iterations: Vec<usize>,
    kkt_checked: usize,
    kkt_failed: usize,
    /// Relative ℓ2 error of every secret block recovered from the float stego.
    float_block_errors: Vec<f64>,
    /// Per secret: (name, NAE, histogram ℓ1, wrong-constants NAE, wrong-seed NAE).
    secrets: Vec<(&'static str, f64, f64, f64, f64)>,
}

struct FullSuite {
    runs: Vec<CoverRun>,
    elapsed: Duration,
}

fn rel_l2(got: &[f64], want: &[f64]) -> f64 {
    let num: f64 = got.iter().zip(want).map(|(a, b)| (a - b).powi(2)).sum();
    let den: f64 = want.iter().map(|b| b * b).sum();
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

fn kkt_check(scheme: &Sabmis, cover: &GrayImage, payload: &[Option<Vec<SecretCoefficients>>; 4]) -> (usize, usize) {
    let parts = subsample(&sabmis::image_io::to_real(cover)).unwrap();
    let cfg = scheme.config();
    let (mut checked, mut failed) = (0, 0);
    for (k, part) in parts.parts().iter().enumerate() {
        let ys = scheme
            .sub_image_measurements(part, payload[k].as_deref())
            .unwrap();
        for y in &ys {
            let (_, res) = scheme.reconstruct_block(y).unwrap();
            checked += 1;
            if !satisfies_kkt(scheme.factor(), y.measured(), &res.solution, res.lambda, 1e-6) {
                failed += 1;
            }
        }
        assert_eq!(ys.len(), cfg.cover_blocks());
    }
    (checked, failed)
}

fn full_suite() -> &'static FullSuite {
    static SUITE: OnceLock<FullSuite> = OnceLock::new();
    SUITE.get_or_init(|| {
        let start = Instant::now();
        let key = SecretKey::defaults(SEED);
        let scheme = Sabmis::new(full_cfg()).unwrap();
        let (wc, ws) = wrong_keys(&key);
        let wrong_c = Sabmis::new(validate(&wc).unwrap()).unwrap();
        let wrong_s = Sabmis::new(validate(&ws).unwrap()).unwrap();
        let mut runs = Vec::new();
        for i in 0..IMAGES.len() {
            let cover_name = IMAGES[i];
            let cover = image(cover_name, 1024);
            let names: Vec<&'static str> = (1..=4).map(|d| IMAGES[(i + d) % IMAGES.len()]).collect();
            let secrets: Vec<GrayImage> = names.iter().map(|n| image(n, 512)).collect();
            let pairs: Vec<_> = Slot::ALL.iter().copied().zip(&secrets).collect();
            let out = scheme.embed_real(&cover, &pairs, EmbedOptions::default()).unwrap();
            let stego = out.stego_gray();

            let mut float_block_errors = Vec::new();
            for slot in Slot::ALL {
                let got = scheme.extract_coefficients(&out.stego, slot).unwrap();
                let want = out.payload[slot.number() - 1].as_ref().unwrap();
                for (g, w) in got.iter().zip(want) {
                    float_block_errors.push(rel_l2(g.values(), w.values()));
                }
            }

            let extracted = scheme.extract(&stego, &Slot::ALL).unwrap();
            let ex_c = wrong_c.extract(&stego, &Slot::ALL).unwrap();
            let ex_s = wrong_s.extract(&stego, &Slot::ALL).unwrap();
            let per_secret = (0..4)
                .map(|k| {
                    (
                        names[k],
                        nae(&secrets[k], &extracted[k]).unwrap(),
                        histogram_l1(&secrets[k], &extracted[k]),
                        nae(&secrets[k], &ex_c[k]).unwrap(),
                        nae(&secrets[k], &ex_s[k]).unwrap(),
                    )
                })
                .collect();

            let (kkt_checked, kkt_failed) = kkt_check(&scheme, &cover, &out.payload);
            runs.push(CoverRun {
                cover: cover_name,
                psnr: psnr(&cover, &stego).unwrap(),
                iterations: out.stats.iterations.clone(),
                kkt_checked,
                kkt_failed,
                float_block_errors,
                secrets: per_secret,
            });
        }
        FullSuite {
            runs,
            elapsed: start.elapsed(),
        }
    })
}

// ---------------------------------------------------------------------------

#[test]
fn criterion_1_capacity() {
    let start = Instant::now();
    let cfg = full_cfg();
    let got: Vec<f64> = (1..=4).map(|n| capacity(&cfg, n).unwrap()).collect();
    let pass = got == [2.0, 4.0, 6.0, 8.0];
    report(1, "capacity", pass, &format!("bpp {got:?}"), start.elapsed());
    assert!(pass);
}

#[test]
fn criterion_2_codec_inversion() {
    let start = Instant::now();
    let k = EmbedConstants::defaults(32, 32);
    let len = 32 + 1600;
    let mut r = rng(2);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let y: Vec<f64> = (0..len).map(|_| r.random_range(-2000.0..2000.0)).collect();
        let t: Vec<f64> = (0..32).map(|_| r.random_range(-2000.0..2000.0)).collect();
        let y = MeasurementVector::new(y, 32).unwrap();
        let emb = embed_block(&y, &SecretCoefficients::new(t.clone()), &k).unwrap();
        let back = extract_block(&emb, &k).unwrap();
        let scale = t.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let err = back
            .values()
            .iter()
            .zip(&t)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        worst = worst.max(err / scale);
    }
    let elapsed = start.elapsed();
    let pass = worst <= 1e-9 && elapsed < Duration::from_secs(1);
    report(2, "codec inversion", pass, &format!("max rel err {worst:.2e} over 10000 pairs"), elapsed);
    assert!(pass);
}

fn dct_oracle(x: &[f64], n: usize) -> Vec<f64> {
    let a = |k: usize| if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
    let pi = std::f64::consts::PI;
    let mut out = vec![0.0; n * n];
    for u in 0..n {
        for v in 0..n {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    s += x[i * n + j]
                        * ((2 * i + 1) as f64 * u as f64 * pi / (2 * n) as f64).cos()
                        * ((2 * j + 1) as f64 * v as f64 * pi / (2 * n) as f64).cos();
                }
            }
            out[u * n + v] = a(u) * a(v) * s;
        }
    }
    out
}

#[test]
fn criterion_3_transform_oracles() {
    let start = Instant::now();
    let mut r = rng(3);
    let mut dct_err = 0.0f64;
    for _ in 0..100 {
        let x: Vec<f64> = (0..64).map(|_| r.random_range(-255.0..255.0)).collect();
        let got = dct2(&Block::new(8, x.clone()).unwrap());
        let want = dct_oracle(&x, 8);
        for (g, w) in got.coeffs().iter().zip(&want) {
            dct_err = dct_err.max((g - w).abs());
        }
    }

    let mut zz_ok = true;
    for n in 1..=16 {
        let mut order = zigzag_order(n);
        order.sort_unstable();
        zz_ok &= order == (0..n * n).collect::<Vec<_>>();
        let b = Block::new(n, (0..n * n).map(|v| v as f64).collect()).unwrap();
        zz_ok &= inverse_zigzag(&zigzag(&b)).unwrap() == b;
    }

    let mut sampling_ok = true;
    for _ in 0..100 {
        let side = 2 * r.random_range(1..=40usize);
        let data: Vec<f64> = (0..side * side).map(|_| r.random_range(0.0..255.0)).collect();
        let img = RealImage::new(side, side, data).unwrap();
        sampling_ok &= inverse_sample(&subsample(&img).unwrap()).unwrap() == img;
    }
    let elapsed = start.elapsed();
    let pass = dct_err <= 1e-10 && zz_ok && sampling_ok && elapsed < Duration::from_secs(5);
    report(
        3,
        "transform oracles",
        pass,
        &format!("dct max err {dct_err:.2e}, zigzag bijective {zz_ok}, sampling round-trip {sampling_ok}"),
        elapsed,
    );
    assert!(pass);
}

/// Proximal gradient with step 1/L, run until the iterate moves less than `tol`.
fn ista(phi: &DMatrix<f64>, y: &DVector<f64>, lambda: f64, tol: f64) -> DVector<f64> {
    let l = phi.singular_values().max().powi(2);
    let step = 1.0 / l;
    let mut x = DVector::zeros(phi.ncols());
    for _ in 0..2_000_000 {
        let g = phi.tr_mul(&(phi * &x - y));
        let next = (&x - step * g).map(|v| v.signum() * (v.abs() - step * lambda).max(0.0));
        let moved = (&next - &x).amax();
        x = next;
        if moved < tol {
            break;
        }
    }
    x
}

#[test]
fn criterion_4_solver() {
    let start = Instant::now();
    let mut r = rng(4);
    let mut oracle_err = 0.0f64;
    let cfg = SolverConfig::default();
    for case in 0..50 {
        let p2 = r.random_range(2..=8usize);
        let p3 = r.random_range(p2 + 1..=50usize);
        let phi = generate_matrix(1000 + case, p3, p2).unwrap();
        let handle = prefactor(&phi, cfg.rho).unwrap();
        let mut s = vec![0.0; p2];
        for v in s.iter_mut() {
            if r.random_bool(0.5) {
                *v = r.random_range(-50.0..50.0);
            }
        }
        let mut y = phi.matrix() * DVector::from_vec(s);
        for v in y.iter_mut() {
            *v += r.random_range(-1.0..1.0);
        }
        let res = solve_lasso(y.as_slice(), &handle, &cfg).unwrap();
        let want = ista(phi.matrix(), &y, res.lambda, 1e-12);
        for (a, b) in res.solution.iter().zip(want.iter()) {
            oracle_err = oracle_err.max((a - b).abs());
        }
    }
    let small_elapsed = start.elapsed();

    let suite = full_suite();
    let mut iters: Vec<usize> = suite.runs.iter().flat_map(|c| c.iterations.iter().copied()).collect();
    iters.sort_unstable();
    let q = |f: f64| iters[((iters.len() - 1) as f64 * f) as usize];
    let median = q(0.5);
    let checked: usize = suite.runs.iter().map(|c| c.kkt_checked).sum();
    let failed: usize = suite.runs.iter().map(|c| c.kkt_failed).sum();
    let pass = oracle_err <= 1e-4 && failed == 0 && checked > 0 && median <= 50 && small_elapsed < Duration::from_secs(30);
    report(
        4,
        "solver",
        pass,
        &format!(
            "oracle max err {oracle_err:.2e} on 50 instances ({:.1}s); KKT failures {failed}/{checked} full-scale blocks; iterations median {median}, p25 {}, p75 {}, max {}",
            small_elapsed.as_secs_f64(),
            q(0.25),
            q(0.75),
            iters[iters.len() - 1]
        ),
        start.elapsed(),
    );
    assert!(pass);
}

#[test]
fn criterion_5_desk_scale_quality() {
    let start = Instant::now();
    let scheme = Sabmis::new(validate(&SecretKey::with_cover_side(SEED, 256)).unwrap()).unwrap();
    let secret_names = ["astronaut", "coffee", "camera", "coins"];
    let secrets: Vec<GrayImage> = secret_names.iter().map(|n| image(n, 128)).collect();
    let params = SsimParams::default();
    let mut failures = Vec::new();
    let mut worst_psnr = f64::INFINITY;
    let mut runs = 0;
    for cover_name in ["chelsea", "moon"] {
        let cover = image(cover_name, 256);
        for n in 1..=4 {
            let pairs: Vec<_> = Slot::ALL.iter().copied().zip(&secrets).take(n).collect();
            let stego = scheme.embed(&cover, &pairs, EmbedOptions::default()).unwrap();
            let p = psnr(&cover, &stego).unwrap();
            let s = mssim(&cover, &stego, &params).unwrap();
            let c = ncc(&cover, &stego).unwrap();
            let e = nae(&cover, &stego).unwrap();
            let h = (entropy(&cover) - entropy(&stego)).abs();
            worst_psnr = worst_psnr.min(p);
            runs += 1;
            if !(p >= 30.0 && s >= 0.99 && (0.98..=1.02).contains(&c) && e <= 0.05 && h <= 0.3) {
                failures.push(format!(
                    "{cover_name} n={n}: psnr {p:.2} mssim {s:.4} ncc {c:.4} nae {e:.4} dH {h:.3}"
                ));
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = failures.is_empty() && elapsed < Duration::from_secs(60);
    let detail = if failures.is_empty() {
        format!("{runs} runs, worst psnr {worst_psnr:.2} dB")
    } else {
        failures.join("; ")
    };
    report(5, "desk-scale quality", pass, &detail, elapsed);
    assert!(pass);
}

#[test]
fn criterion_6_full_scale_psnr() {
    let suite = full_suite();
    let psnrs: Vec<f64> = suite.runs.iter().map(|c| c.psnr).collect();
    let mean = psnrs.iter().sum::<f64>() / psnrs.len() as f64;
    let min = psnrs.iter().copied().fold(f64::INFINITY, f64::min);
    let pass = (mean - 37.14).abs() <= 3.0 && min >= 30.0 && suite.elapsed < Duration::from_secs(300);
    let per: Vec<String> = suite.runs.iter().map(|c| format!("{} {:.2}", c.cover, c.psnr)).collect();
    report(
        6,
        "full-scale psnr",
        pass,
        &format!("mean {mean:.2} dB, min {min:.2} dB [{}]", per.join(", ")),
        suite.elapsed,
    );
    assert!(pass);
}

#[test]
fn criterion_7_extraction_fidelity() {
    let suite = full_suite();
    let errs: Vec<f64> = suite.runs.iter().flat_map(|c| c.float_block_errors.iter().copied()).collect();
    let over = errs.iter().filter(|&&e| e > 0.05).count();
    let mut sorted = errs.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    let max_err = sorted[sorted.len() - 1];

    let mut bad_secrets = Vec::new();
    let (mut worst_nae, mut worst_hist) = (0.0f64, 0.0f64);
    for run in &suite.runs {
        for &(name, n, h, _, _) in &run.secrets {
            worst_nae = worst_nae.max(n);
            worst_hist = worst_hist.max(h);
            if n > 0.15 || h > 0.2 {
                bad_secrets.push(format!("{name}@{}: nae {n:.3} hist {h:.3}", run.cover));
            }
        }
    }
    let pass = over == 0 && bad_secrets.is_empty();
    report(
        7,
        "extraction fidelity",
        pass,
        &format!(
            "float path: {over}/{} blocks over 5% (median {median:.4}, max {max_err:.3}); 8-bit: worst nae {worst_nae:.3}, worst hist l1 {worst_hist:.3}, {} of {} secrets out of bounds{}",
            errs.len(),
            bad_secrets.len(),
            suite.runs.len() * 4,
            if bad_secrets.is_empty() { String::new() } else { format!(" [{}]", bad_secrets.join(", ")) }
        ),
        suite.elapsed,
    );
    assert!(pass);
}

#[test]
fn criterion_8_wrong_keys() {
    let suite = full_suite();
    let (mut min_c, mut min_s) = (f64::INFINITY, f64::INFINITY);
    let (mut fail_c, mut fail_s, mut pairs) = (0, 0, 0);
    for run in &suite.runs {
        for &(_, correct, _, wc, ws) in &run.secrets {
            pairs += 1;
            let (rc, rs) = (wc / correct, ws / correct);
            min_c = min_c.min(rc);
            min_s = min_s.min(rs);
            fail_c += usize::from(rc < 10.0);
            fail_s += usize::from(rs < 10.0);
        }
    }
    let pass = fail_c == 0 && fail_s == 0;
    report(
        8,
        "wrong-key security",
        pass,
        &format!(
            "{pairs} pairs; wrong constants: min ratio {min_c:.1}, {fail_c} below 10x; wrong seed: min ratio {min_s:.2}, {fail_s} below 10x"
        ),
        suite.elapsed,
    );
    assert!(pass);
}

#[test]
fn criterion_9_determinism() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let entries: Vec<serde_json::Value> = (0..IMAGES.len())
        .map(|i| {
            serde_json::json!({
                "cover": image_path(IMAGES[i]),
                "secrets": (1..=4).map(|d| image_path(IMAGES[(i + d) % IMAGES.len()])).collect::<Vec<_>>(),
                "slots": [1, 2, 3, 4],
            })
        })
        .collect();
    let manifest = dir.path().join("manifest.json");
    std::fs::write(&manifest, serde_json::to_string_pretty(&entries).unwrap()).unwrap();
    let key = SecretKey::defaults(SEED);
    let mut a = Vec::new();
    let mut b = Vec::new();
    run_experiment(&manifest, &key, &mut a, None).unwrap();
    run_experiment(&manifest, &key, &mut b, None).unwrap();
    let pass = a == b && a.len() > 200;
    report(
        9,
        "determinism",
        pass,
        &format!("two runs of {} entries, {} CSV bytes, identical {}", entries.len(), a.len(), a == b),
        start.elapsed(),
    );
    assert!(pass);
}
