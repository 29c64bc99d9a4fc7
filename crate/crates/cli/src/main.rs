use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use etc_jigsaw::channel::{transmit_with_intermediates, ChannelConfig, Quality, Subsampling};
use etc_jigsaw::cipher::{decrypt, encrypt_with, expand_key, key_space, log2_big, CipherConfig, KeyFile, PuzzleType, SecretKey};
use etc_jigsaw::harness::{integrity_check, load_images, run_on_images, worker_pool, ExperimentPlan};
use etc_jigsaw::metrics::{ground_truth, score, ScoreTriple};
use etc_jigsaw::raster::grid_dims;
use etc_jigsaw::solver::{attack, AssemblyResult, AttackConfig};
use etc_jigsaw::RasterImage;

#[derive(Parser)]
#[command(name = "etc-jigsaw", version, about = "Block scrambling cipher and jigsaw puzzle solver attack")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a key file for a puzzle type.
    Keygen(Keygen),
    /// Encrypt an image with a key file.
    Encrypt(Encrypt),
    /// Decrypt an image with a key file.
    Decrypt(Decrypt),
    /// Print the key space size of a puzzle type.
    Keyspace(Keyspace),
    /// Send an image through the JPEG channel.
    Channel(Channel),
    /// Reassemble an encrypted image without the key.
    Attack(Attack),
    /// Score an assembly against the true layout, as a CSV row.
    Score(Score),
    /// Run an experiment plan.
    Experiment(Experiment),
}

#[derive(Args)]
struct TypeArgs {
    /// Puzzle type: 1, 2, I, N, IN or INC.
    #[arg(long = "type", default_value = "INC")]
    puzzle_type: PuzzleType,
    #[arg(long, default_value_t = 32)]
    block: usize,
}

#[derive(Args)]
struct Keygen {
    #[command(flatten)]
    kind: TypeArgs,
    /// Derive the key from this seed instead of the system clock.
    #[arg(long)]
    seed: Option<u64>,
    /// Key file to write; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Encrypt {
    #[arg(long)]
    key: PathBuf,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Also write the true layout as an assembly manifest.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Args)]
struct Decrypt {
    #[arg(long)]
    key: PathBuf,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct Keyspace {
    #[command(flatten)]
    kind: TypeArgs,
    /// Read the type and block size from a key file instead.
    #[arg(long)]
    key: Option<PathBuf>,
    /// Number of blocks; defaults to a 672x480 image.
    #[arg(long)]
    blocks: Option<usize>,
}

#[derive(Args)]
struct Channel {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "95")]
    quser: Quality,
    #[arg(long, default_value = "bypass")]
    qsns: Quality,
    #[arg(long, default_value = "4:2:0")]
    subsampling: Subsampling,
    /// Keep the JFIF files of each hop next to the output.
    #[arg(long)]
    keep_intermediates: bool,
}

#[derive(Args)]
struct Attack {
    #[command(flatten)]
    kind: TypeArgs,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long)]
    cols: Option<usize>,
    /// Assembly manifest (JSON) to write; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Render the assembled image.
    #[arg(long)]
    emit_assembled: Option<PathBuf>,
    /// Write the pairwise compatibility table as CSV.
    #[arg(long)]
    emit_table: Option<PathBuf>,
    /// Order merges by raw cost only.
    #[arg(long)]
    no_confidence: bool,
}

#[derive(Args)]
struct Score {
    /// Assembly manifest produced by `attack`.
    #[arg(long)]
    result: PathBuf,
    /// True layout produced by `encrypt --truth`.
    #[arg(long)]
    truth: PathBuf,
}

#[derive(Args)]
struct Experiment {
    #[arg(long)]
    plan: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Cap the number of blocks attacked per image.
    #[arg(long)]
    budget: Option<usize>,
    /// Per-attempt wall times; defaults to the output path with `.timings.csv`.
    #[arg(long)]
    timings: Option<PathBuf>,
    /// Skip the decryption self-test run before the experiment.
    #[arg(long)]
    skip_integrity: bool,
}

fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            if !text.ends_with('\n') {
                out.write_all(b"\n")?;
            }
            Ok(())
        }
    }
}

fn keygen(args: Keygen) -> Result<()> {
    let seed = match args.seed {
        Some(s) => s,
        None => {
            let now = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH)?;
            now.as_nanos() as u64 ^ u64::from(std::process::id()).rotate_left(32)
        }
    };
    let config = CipherConfig::for_type(args.kind.puzzle_type, args.kind.block);
    config.validate()?;
    let file = KeyFile::new(SecretKey::from_seed(seed), config);
    match args.out {
        Some(p) => file.save(&p)?,
        None => write_text(None, &file.to_json())?,
    }
    Ok(())
}

fn encrypt_cmd(args: Encrypt) -> Result<()> {
    let key = KeyFile::load(&args.key)?;
    let image = RasterImage::read(&args.input)?;
    let cfg = &key.config;
    let (rows, cols) = grid_dims(image.width(), image.height(), cfg.block_w, cfg.block_h);
    let expansion = expand_key(&key.key, rows * cols, cfg);
    encrypt_with(&image, &expansion, cfg)?.write(&args.out)?;
    if let Some(t) = args.truth {
        write_text(Some(&t), &ground_truth(&expansion, rows, cols)?.to_json())?;
    }
    Ok(())
}

fn decrypt_cmd(args: Decrypt) -> Result<()> {
    let key = KeyFile::load(&args.key)?;
    let image = RasterImage::read(&args.input)?;
    decrypt(&image, &key.key, &key.config)?.write(&args.out)?;
    Ok(())
}

fn keyspace(args: Keyspace) -> Result<()> {
    let config = match args.key {
        Some(p) => KeyFile::load(p)?.config,
        None => CipherConfig::for_type(args.kind.puzzle_type, args.kind.block),
    };
    let n = match args.blocks {
        Some(n) => n,
        None => {
            let (r, c) = grid_dims(672, 480, config.block_w, config.block_h);
            r * c
        }
    };
    let size = key_space(n, &config);
    println!("blocks {n}");
    println!("keys {size}");
    println!("log2 {:.3}", log2_big(&size));
    Ok(())
}

fn channel(args: Channel) -> Result<()> {
    let image = RasterImage::read(&args.input)?;
    let config = ChannelConfig {
        user_quality: args.quser,
        sns_quality: args.qsns,
        chroma_subsampling: args.subsampling,
    };
    let sent = transmit_with_intermediates(&image, &config)?;
    sent.received.write(&args.out)?;
    if args.keep_intermediates {
        let stem = args.out.with_extension("");
        for (name, bytes) in [("user", &sent.user_jpeg), ("sns", &sent.sns_jpeg)] {
            if let Some(b) = bytes {
                let p = PathBuf::from(format!("{}.{name}.jpg", stem.display()));
                fs::write(&p, b).with_context(|| format!("writing {}", p.display()))?;
            }
        }
    }
    Ok(())
}

fn attack_cmd(args: Attack) -> Result<()> {
    let image = RasterImage::read(&args.input)?;
    let mut config = AttackConfig::new(args.kind.puzzle_type, args.kind.block);
    config.rows = args.rows;
    config.cols = args.cols;
    config.confidence = !args.no_confidence;
    let result = attack(&image, &config)?;
    if let Some(p) = &args.emit_table {
        let file = fs::File::create(p).with_context(|| format!("writing {}", p.display()))?;
        result.table.write_csv(std::io::BufWriter::new(file))?;
    }
    if let Some(p) = &args.emit_assembled {
        result.render()?.write(p)?;
    }
    write_text(args.out.as_deref(), &result.assembly.to_json())
}

fn score_cmd(args: Score) -> Result<()> {
    let read = |p: &Path| -> Result<AssemblyResult> {
        let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        AssemblyResult::from_json(&text).with_context(|| format!("parsing {}", p.display()))
    };
    let s = score(&read(&args.result)?, &read(&args.truth)?)?;
    println!("{}", ScoreTriple::CSV_HEADER);
    println!("{}", s.csv_row());
    Ok(())
}

fn experiment(args: Experiment) -> Result<()> {
    let mut plan = ExperimentPlan::load(&args.plan)?;
    if args.budget.is_some() {
        plan.budget = args.budget;
    }
    plan.validate()?;
    let pool = worker_pool()?;
    let images = load_images(&plan.images)?;
    if !args.skip_integrity {
        for (image, puzzle_type, s) in pool.install(|| integrity_check(&plan, &images))? {
            if s.sum() != 3.0 {
                bail!("decryption self-test failed on {image} type {puzzle_type}: {}", s.csv_row());
            }
        }
    }
    let results = pool.install(|| run_on_images(&plan, &images))?;
    let mut csv = Vec::new();
    results.write_csv(&mut csv)?;
    fs::write(&args.out, &csv).with_context(|| format!("writing {}", args.out.display()))?;
    let timings = args
        .timings
        .unwrap_or_else(|| args.out.with_extension("timings.csv"));
    let mut t = Vec::new();
    results.write_timings(&mut t)?;
    fs::write(&timings, &t).with_context(|| format!("writing {}", timings.display()))?;
    if results.failures() > 0 {
        eprintln!("{} of {} attempts failed; see the error column", results.failures(), results.rows.len());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Keygen(a) => keygen(a),
        Command::Encrypt(a) => encrypt_cmd(a),
        Command::Decrypt(a) => decrypt_cmd(a),
        Command::Keyspace(a) => keyspace(a),
        Command::Channel(a) => channel(a),
        Command::Attack(a) => attack_cmd(a),
        Command::Score(a) => score_cmd(a),
        Command::Experiment(a) => experiment(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
