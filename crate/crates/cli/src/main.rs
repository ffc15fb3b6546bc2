use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use animsynth_core::dataset::{
    dataset_stats, generate_dataset, load_entry, read_binary_png, read_rgb, validate_dataset, write_image_png,
    DatasetManifest,
};
use animsynth_core::metrics::MetricReport;
use animsynth_core::preview::preview_strip;
use animsynth_core::store::procedural_still;
use animsynth_core::{Error, GenConfig, ImageStore, SourceImages};
use clap::{Args, Parser, Subcommand};

/// Synthetic layered-animation triplets with exact flow and occlusion.
#[derive(Parser)]
#[command(name = "animsynth", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a dataset of triplets.
    Generate(GenerateArgs),
    /// Re-check a dataset directory.
    Validate {
        dir: PathBuf,
        /// Also require photo-consistency PSNR >= 35 dB.
        #[arg(long)]
        strict: bool,
        /// Where to write the JSON report (default: <dir>/validation.json).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Write an I1 | I2 | I3 | flow | occlusion strip for one entry.
    Preview {
        dir: PathBuf,
        #[arg(long)]
        id: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print distribution summaries of a dataset as JSON.
    Stats { dir: PathBuf },
    /// Write procedural cel-style stills usable as a source directory.
    Sources {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 8)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 768)]
        width: usize,
        #[arg(long, default_value_t = 576)]
        height: usize,
    },
    /// PSNR and SSIM between two images as one JSON line.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Binary mask PNG restricting the PSNR to non-zero pixels.
        #[arg(long)]
        mask: Option<PathBuf>,
    },
}

#[derive(Args)]
struct GenerateArgs {
    /// JSON config; omitted keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, required_unless_present = "print_default_config")]
    out: Option<PathBuf>,
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Directory of source stills, overriding the config.
    #[arg(long)]
    sources: Option<PathBuf>,
    /// Worker threads; output does not depend on this.
    #[arg(long, env = "ANIMSYNTH_JOBS")]
    jobs: Option<usize>,
    /// Print the full default config and exit.
    #[arg(long)]
    print_default_config: bool,
}

/// Failure classes mapped onto exit codes.
enum Failure {
    /// Exit 1: the data is readable but a check failed.
    Check(String),
    /// Exit 2: bad input, missing files, I/O.
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn load_config(path: Option<&Path>) -> Result<GenConfig, Failure> {
    let Some(path) = path else {
        return Ok(GenConfig::default());
    };
    let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    GenConfig::from_json(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn generate(args: GenerateArgs) -> Outcome {
    if args.print_default_config {
        println!("{}", GenConfig::default().to_json_pretty());
        return Ok(());
    }
    let out = args.out.expect("clap requires --out");
    let mut config = load_config(args.config.as_deref())?;
    if let Some(count) = args.count {
        config.count = count;
    }
    if let Some(seed) = args.seed {
        config.global_seed = seed;
    }
    if let Some(dir) = args.sources {
        config.source_dir = dir;
    }
    config.validate()?;
    if !config.source_dir.is_dir() {
        return Err(Failure::Usage(format!(
            "source directory {} does not exist",
            config.source_dir.display()
        )));
    }
    let store = ImageStore::load_dir(&config.source_dir)?;
    log::info!("loaded {} source stills from {}", store.len(), config.source_dir.display());

    let started = Instant::now();
    let report = generate_dataset(&config, &store, config.count, &out, args.jobs, |done, total| {
        eprintln!("progress {done}/{total}");
    })?;
    println!("manifest={}", report.manifest_path.display());
    println!(
        "generated={} failed={} elapsed={:.2}",
        report.generated,
        report.failed,
        started.elapsed().as_secs_f64()
    );
    if report.failed > 0 {
        return Err(Failure::Check(format!("{} samples were rejected", report.failed)));
    }
    Ok(())
}

fn validate(dir: &Path, strict: bool, report_path: Option<PathBuf>) -> Outcome {
    let report = validate_dataset(dir, strict)?;
    let path = report_path.unwrap_or_else(|| dir.join("validation.json"));
    let mut text = serde_json::to_string_pretty(&report).expect("report serialises");
    text.push('\n');
    fs::write(&path, text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    for (name, count) in &report.checks {
        println!("{name}: pass={} fail={}", count.pass, count.fail);
    }
    println!("report={}", path.display());
    if report.passed {
        return Ok(());
    }
    for f in &report.failures {
        match f.id {
            Some(id) => eprintln!("entry {id:06} {}: {}", f.check, f.detail),
            None => eprintln!("{}: {}", f.check, f.detail),
        }
    }
    Err(Failure::Check(format!("{} checks failed", report.failures.len())))
}

fn preview(dir: &Path, id: usize, out: &Path) -> Outcome {
    let manifest = DatasetManifest::load(dir)?;
    let entry = manifest
        .entries
        .get(id)
        .ok_or_else(|| Failure::Usage(format!("no entry {id}; dataset has {}", manifest.entries.len())))?;
    let loaded = load_entry(dir, entry)?;
    write_image_png(&preview_strip(&loaded), out)?;
    println!("preview={}", out.display());
    Ok(())
}

fn stats(dir: &Path) -> Outcome {
    let s = dataset_stats(dir)?;
    println!("{}", serde_json::to_string_pretty(&s).expect("stats serialise"));
    Ok(())
}

fn sources(out: &Path, count: usize, seed: u64, width: usize, height: usize) -> Outcome {
    if width == 0 || height == 0 {
        return Err(Failure::Usage("width and height must be positive".into()));
    }
    fs::create_dir_all(out).map_err(|e| Failure::Usage(format!("{}: {e}", out.display())))?;
    for i in 0..count {
        let path = out.join(format!("still_{i:03}.png"));
        write_image_png(&procedural_still(seed.wrapping_add(i as u64), width, height), &path)?;
    }
    println!("wrote {count} stills to {}", out.display());
    Ok(())
}

fn compare(a: &Path, b: &Path, mask: Option<&Path>) -> Outcome {
    let (ia, ib) = (read_rgb(a)?, read_rgb(b)?);
    let mask = mask.map(read_binary_png).transpose()?;
    let report = MetricReport::compare(&ia, &ib, mask.as_ref())?;
    println!("{}", report.to_json_line());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Generate(args) => generate(args),
        Command::Validate { dir, strict, report } => validate(&dir, strict, report),
        Command::Preview { dir, id, out } => preview(&dir, id, &out),
        Command::Stats { dir } => stats(&dir),
        Command::Sources {
            out,
            count,
            seed,
            width,
            height,
        } => sources(&out, count, seed, width, height),
        Command::Compare { a, b, mask } => compare(&a, &b, mask.as_deref()),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(msg)) => {
            eprintln!("animsynth: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("animsynth: {msg}");
            ExitCode::from(2)
        }
    }
}
