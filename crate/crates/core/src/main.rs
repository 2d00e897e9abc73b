use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{CommandFactory, Parser, Subcommand};

use sabmis::config::{load_key, save_key, validated, SecretKey};
use sabmis::harness::{load_resized, run_experiment};
use sabmis::image_io::{load_gray, load_raster, save_float_raster, save_gray};
use sabmis::metrics::{entropy, mssim, nae, ncc, psnr, SsimParams};
use sabmis::{capacity, EmbedOptions, Error, Sabmis, Slot};

#[derive(Parser)]
#[command(name = "sabmis", version, about = "Hide up to four grayscale images in one cover")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Embed 1 to 4 secrets into a cover. Inputs are resized to the key's
    /// cover and secret sides when needed.
    Embed {
        #[arg(long)]
        cover: PathBuf,
        /// Secret image, optionally followed by `@SLOT` (1..4). Repeatable.
        #[arg(long = "secret", value_name = "PATH[@SLOT]", required = true)]
        secrets: Vec<SecretArg>,
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Write the unquantized stego image as a float raster.
        #[arg(long)]
        float_stego: bool,
        /// Copy sub-images without a secret unchanged.
        #[arg(long)]
        passthrough_empty: bool,
    },
    /// Recover secrets from a stego image. The cover is never needed.
    Extract {
        #[arg(long)]
        stego: PathBuf,
        #[arg(long)]
        key: PathBuf,
        /// Comma-separated slot numbers, e.g. `1,3`.
        #[arg(long, value_delimiter = ',', required = true)]
        slots: Vec<Slot>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Compare two images: psnr, mssim, ncc, entropy of each, nae.
    Metrics {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
    },
    /// Run a manifest of cover/secret sets and write a CSV report.
    Experiment {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        key: PathBuf,
        /// CSV destination; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Directory for histogram and edge-map data files.
        #[arg(long)]
        data_dir: Option<PathBuf>,
    },
    /// Write a key with default parameters.
    Keygen {
        #[arg(long)]
        out: PathBuf,
        /// Seed for the measurement matrix; random when omitted.
        #[arg(long)]
        seed: Option<u64>,
        /// Cover side length; secrets are half of it.
        #[arg(long, default_value_t = 1024)]
        cover_side: usize,
    },
}

#[derive(Clone, Debug)]
struct SecretArg {
    path: PathBuf,
    slot: Option<Slot>,
}

impl FromStr for SecretArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.rsplit_once('@') {
            Some((path, slot)) if !slot.is_empty() && slot.chars().all(|c| c.is_ascii_digit()) => {
                Ok(SecretArg {
                    path: path.into(),
                    slot: Some(slot.parse::<Slot>().map_err(|e| e.to_string())?),
                })
            }
            _ => Ok(SecretArg {
                path: s.into(),
                slot: None,
            }),
        }
    }
}

fn assign_slots(args: &[SecretArg]) -> Result<Vec<Slot>, String> {
    let mut used: Vec<Slot> = args.iter().filter_map(|a| a.slot).collect();
    let mut sorted = used.clone();
    sorted.sort();
    sorted.dedup();
    if sorted.len() != used.len() {
        return Err("a slot was given twice".into());
    }
    let mut out = Vec::with_capacity(args.len());
    for a in args {
        let slot = match a.slot {
            Some(s) => s,
            None => {
                let free = Slot::ALL
                    .into_iter()
                    .find(|s| !used.contains(s))
                    .ok_or("no free slot left")?;
                used.push(free);
                free
            }
        };
        out.push(slot);
    }
    Ok(out)
}

fn fmt_db(v: f64) -> String {
    if v.is_infinite() {
        "inf".into()
    } else {
        format!("{v:.3}")
    }
}

fn run(cli: Cli) -> sabmis::Result<()> {
    match cli.command {
        Command::Embed {
            cover,
            secrets,
            key,
            out,
            float_stego,
            passthrough_empty,
        } => {
            if secrets.len() > 4 {
                Cli::command()
                    .error(
                        clap::error::ErrorKind::TooManyValues,
                        format!("at most 4 --secret values are allowed, got {}", secrets.len()),
                    )
                    .exit();
            }
            let slots = match assign_slots(&secrets) {
                Ok(s) => s,
                Err(msg) => Cli::command()
                    .error(clap::error::ErrorKind::ValueValidation, msg)
                    .exit(),
            };
            let cfg = validated(&load_key(&key)?)?;
            let cover = load_resized(&cover, cfg.r)?;
            let images = secrets
                .iter()
                .map(|s| load_resized(&s.path, cfg.m))
                .collect::<sabmis::Result<Vec<_>>>()?;
            let pairs: Vec<_> = slots.iter().copied().zip(&images).collect();
            let scheme = Sabmis::new(cfg)?;
            let opts = EmbedOptions { passthrough_empty };
            let result = scheme.embed_real(&cover, &pairs, opts)?;
            let stego = result.stego_gray();
            if float_stego {
                save_float_raster(&result.stego, &out)?;
            } else {
                save_gray(&stego, &out)?;
            }
            println!(
                "bpp,{:.3},psnr_db,{}",
                capacity(&cfg, images.len())?,
                fmt_db(psnr(&cover, &stego)?)
            );
        }
        Command::Extract {
            stego,
            key,
            slots,
            out_dir,
        } => {
            let cfg = validated(&load_key(&key)?)?;
            let stego = load_raster(&stego)?.to_real();
            let images = Sabmis::new(cfg)?.extract_real(&stego, &slots)?;
            std::fs::create_dir_all(&out_dir)?;
            for (slot, img) in slots.iter().zip(&images) {
                let path = out_dir.join(format!("secret_{slot}.png"));
                save_gray(img, &path)?;
                println!("{}", path.display());
            }
        }
        Command::Metrics { a, b } => {
            let (a, b) = (load_gray(&a)?, load_gray(&b)?);
            println!("psnr_db,mssim,ncc,entropy_a,entropy_b,nae");
            println!(
                "{},{:.6},{:.6},{:.6},{:.6},{:.6}",
                fmt_db(psnr(&a, &b)?),
                mssim(&a, &b, &SsimParams::default())?,
                ncc(&a, &b)?,
                entropy(&a),
                entropy(&b),
                nae(&a, &b)?
            );
        }
        Command::Experiment {
            manifest,
            key,
            out,
            data_dir,
        } => {
            let key = load_key(&key)?;
            if let Some(dir) = &data_dir {
                std::fs::create_dir_all(dir)?;
            }
            match out {
                Some(path) => {
                    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
                    run_experiment(&manifest, &key, file, data_dir.as_deref())?;
                }
                None => {
                    run_experiment(&manifest, &key, std::io::stdout().lock(), data_dir.as_deref())?;
                }
            }
        }
        Command::Keygen {
            out,
            seed,
            cover_side,
        } => {
            let key = SecretKey::with_cover_side(seed.unwrap_or_else(rand::random), cover_side);
            validated(&key)?;
            save_key(&key, &out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::Config(_) = e {
                return ExitCode::from(3);
            }
            ExitCode::FAILURE
        }
    }
}
