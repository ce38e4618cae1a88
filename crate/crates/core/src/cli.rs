//! Command-line verbs. Each verb reads and writes artifact containers.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::acquisition::grid_recon;
use crate::dictionary::{match_image, ParamGrid};
use crate::epg::FispMrf;
use crate::error::{invalid, Error, Result};
use crate::io::{self, dataset, Container, ExperimentConfig, SplitRatios, TrajectorySpec};
use crate::metrics::{evaluate_contrasts, MetricReport};
use crate::synthesis::synthesize_from_maps;

/// Environment variable that sets the worker thread count.
pub const THREADS_ENV: &str = "MRFCS_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USER: i32 = 1;
pub const EXIT_INTERNAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "mrfcs", version, about = "Fingerprint simulation, matching and contrast synthesis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TrajectoryKind {
    Spiral,
    Cartesian,
}

/// Experiment settings. Flags override the `--config` file, which
/// overrides the desk defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// Experiment configuration (JSON)
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Phantom matrix size
    #[arg(long)]
    pub size: Option<usize>,
    /// Phantom seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of TRs; regenerates the flip schedule
    #[arg(long)]
    pub n_tr: Option<usize>,
    #[arg(long)]
    pub schedule_seed: Option<u64>,
    /// Dictionary grid preset: desk or full
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long, value_enum)]
    pub trajectory: Option<TrajectoryKind>,
    #[arg(long)]
    pub samples_per_tr: Option<usize>,
    #[arg(long)]
    pub turns: Option<f64>,
    /// Add complex Gaussian noise at this SNR
    #[arg(long)]
    pub snr_db: Option<f64>,
    #[arg(long)]
    pub noise_seed: Option<u64>,
    /// Model off-resonance during the spiral readout
    #[arg(long)]
    pub b0: bool,
    /// Snap tissue parameters to the dictionary grid
    #[arg(long)]
    pub quantize: bool,
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::desk(0),
        };
        if let Some(n) = self.size {
            cfg.phantom.height = n;
            cfg.phantom.width = n;
        }
        if let Some(s) = self.seed {
            cfg.phantom.seed = s;
        }
        if self.n_tr.is_some() || self.schedule_seed.is_some() {
            let n = self.n_tr.unwrap_or(cfg.sequence.n_tr);
            let base = FispMrf::new(n, self.schedule_seed.unwrap_or(crate::epg::sequence::DEFAULT_SCHEDULE_SEED));
            cfg.sequence = FispMrf { te_ms: cfg.sequence.te_ms, tr_ms: cfg.sequence.tr_ms, ..base };
        }
        if let Some(g) = &self.grid {
            cfg.grid = ParamGrid::preset(g)?;
        }
        match self.trajectory {
            Some(TrajectoryKind::Cartesian) => cfg.trajectory = TrajectorySpec::Cartesian,
            Some(TrajectoryKind::Spiral) if cfg.trajectory == TrajectorySpec::Cartesian => {
                cfg.trajectory = TrajectorySpec::undersampled_spiral()
            }
            _ => {}
        }
        if self.samples_per_tr.is_some() || self.turns.is_some() {
            match &mut cfg.trajectory {
                TrajectorySpec::Spiral { samples_per_tr, turns, .. } => {
                    *samples_per_tr = self.samples_per_tr.unwrap_or(*samples_per_tr);
                    *turns = self.turns.unwrap_or(*turns);
                }
                TrajectorySpec::Cartesian => {
                    return Err(invalid("--samples-per-tr and --turns apply to spiral trajectories"))
                }
            }
        }
        if self.snr_db.is_some() {
            cfg.forward.noise_snr_db = self.snr_db;
        }
        if let Some(s) = self.noise_seed {
            cfg.forward.noise_seed = s;
        }
        cfg.forward.model_b0 |= self.b0;
        cfg.quantize_to_grid |= self.quantize;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rasterize the phantom's T1, T2, PD, B0 and label maps
    Phantom {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate the fingerprint dictionary
    Dict {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate k-space samples of the phantom
    Acquire {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Grid k-space into a normalized image series
    Recon {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Match every pixel of a series against a dictionary
    Match {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        dict: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate T1w, T2w and FLAIR images from matched maps
    Synth {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write 8-bit PNGs here
        #[arg(long)]
        png_dir: Option<PathBuf>,
    },
    /// Score synthesized contrasts against the ground truth
    Eval {
        #[arg(long)]
        pred: PathBuf,
        /// Ground-truth contrasts; simulated from the prediction's manifest if absent
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Write the report and its provenance as JSON
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Export slices for network training
    ExportDataset {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Number of slices; phantom seeds run from --seed upwards
        #[arg(long, default_value_t = 20)]
        slices: usize,
        /// Explicit per-slice configurations (replaces --slices)
        #[arg(long = "slice-config")]
        slice_configs: Vec<PathBuf>,
        /// train,val,test ratios
        #[arg(long, default_value = "0.8,0.1,0.1")]
        split: String,
        #[arg(long, default_value_t = 0)]
        split_seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Time each stage of the pipeline on one slice
    Bench {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Write the timings and configuration as JSON
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

fn load(path: &Path) -> Result<Container> {
    Container::read(path)
}

fn written(out: &mut dyn Write, path: &Path, c: &Container) -> Result<()> {
    writeln!(out, "wrote {} ({} {:?}, {})", path.display(), c.header.role, c.header.shape, c.header.digest)?;
    Ok(())
}

fn parse_split(text: &str) -> Result<SplitRatios> {
    let v: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| invalid(format!("bad split ratio '{s}'"))))
        .collect::<Result<_>>()?;
    let [train, val, test] = v[..] else {
        return Err(invalid(format!("--split needs three ratios, got '{text}'")));
    };
    let r = SplitRatios { train, val, test };
    r.validate()?;
    Ok(r)
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Phantom { cfg, out: path } => {
            let c = io::phantom_artifact(&cfg.resolve()?)?;
            c.write(&path)?;
            written(out, &path, &c)
        }
        Command::Dict { cfg, out: path } => {
            let c = io::dictionary_artifact(&cfg.resolve()?.dictionary()?)?;
            c.write(&path)?;
            written(out, &path, &c)
        }
        Command::Acquire { cfg, out: path } => {
            let c = io::kspace_artifact(&cfg.resolve()?)?;
            c.write(&path)?;
            written(out, &path, &c)
        }
        Command::Recon { input, out: path } => {
            let c = io::recon_artifact(&load(&input)?)?;
            c.write(&path)?;
            written(out, &path, &c)
        }
        Command::Match { input, dict, out: path } => {
            let (c, maps) = io::match_artifact(&load(&input)?, &load(&dict)?)?;
            c.write(&path)?;
            let matched = maps.atom_index.iter().filter(|a| a.is_some()).count();
            writeln!(out, "matched {matched} of {} pixels", maps.atom_index.len())?;
            written(out, &path, &c)
        }
        Command::Synth { input, out: path, png_dir } => {
            let (c, set) = io::synth_artifact(&load(&input)?)?;
            c.write(&path)?;
            if let Some(dir) = png_dir {
                std::fs::create_dir_all(&dir)?;
                set.export_png(&dir, "synth")?;
            }
            written(out, &path, &c)
        }
        Command::Eval { pred, truth, report } => {
            let p = load(&pred)?;
            let t = truth.as_deref().map(load).transpose()?;
            let r = io::evaluate_artifact(&p, t.as_ref())?;
            write!(out, "{}", r.to_table())?;
            if let Some(path) = report {
                let mut inputs = json!({ "pred": p.header.digest });
                if let Some(t) = &t {
                    inputs["truth"] = json!(t.header.digest);
                }
                let doc = json!({
                    "manifest": { "stage": "eval", "version": io::VERSION, "inputs": inputs,
                                  "config": p.header.manifest.get("config") },
                    "report": r,
                });
                io::container::write_atomic(&path, serde_json::to_string_pretty(&doc)?.as_bytes())?;
            }
            Ok(())
        }
        Command::ExportDataset { cfg, slices, slice_configs, split, split_seed, out: dir } => {
            let ratios = parse_split(&split)?;
            let configs = if slice_configs.is_empty() {
                let base = cfg.resolve()?;
                (0..slices as u64)
                    .map(|i| {
                        let mut c = base.clone();
                        c.phantom.seed = base.phantom.seed + i;
                        c.forward.noise_seed = base.forward.noise_seed + i;
                        c
                    })
                    .collect()
            } else {
                slice_configs.iter().map(|p| ExperimentConfig::load(p)).collect::<Result<Vec<_>>>()?
            };
            let m = dataset::export_dataset(&configs, ratios, split_seed, &dir)?;
            writeln!(
                out,
                "exported {} slices to {} (train {}, val {}, test {})",
                m.records.len(),
                dir.display(),
                m.splits["train"].len(),
                m.splits["val"].len(),
                m.splits["test"].len()
            )?;
            Ok(())
        }
        Command::Bench { cfg, report } => bench(&cfg.resolve()?, out, report.as_deref()),
    }
}

/// Per-stage wall time for one slice. Dictionary matching and contrast
/// simulation together are the inference cost of the pipeline.
fn bench(cfg: &ExperimentConfig, out: &mut dyn Write, report: Option<&Path>) -> Result<()> {
    let mut stages: Vec<(&str, f64)> = Vec::new();
    let mut timed = |name: &'static str, t: Instant| stages.push((name, t.elapsed().as_secs_f64()));

    let t = Instant::now();
    let dict = cfg.dictionary()?;
    timed("dictionary", t);
    let t = Instant::now();
    let kspace = cfg.acquire()?;
    timed("acquire", t);
    let t = Instant::now();
    let series = grid_recon(&kspace, &cfg.sequence)?.normalize_95th()?.0;
    timed("recon", t);
    let t = Instant::now();
    let maps = match_image(&series, &dict)?;
    timed("match", t);
    let t = Instant::now();
    let set = synthesize_from_maps(&maps.t1, &maps.t2, &maps.pd, &cfg.contrasts)?;
    timed("synth", t);
    let truth = cfg.ground_truth()?;
    let t = Instant::now();
    let metrics = evaluate_contrasts(&set, &truth, true)?;
    timed("eval", t);

    let (h, w) = series.image_dim();
    writeln!(
        out,
        "slice {h}x{w}, {} time points, {} atoms, {} threads",
        cfg.sequence.n_tr,
        dict.n_atoms(),
        rayon::current_num_threads()
    )?;
    writeln!(out, "{:<12} {:>12}", "stage", "seconds")?;
    for (name, s) in &stages {
        writeln!(out, "{name:<12} {s:>12.4}")?;
    }
    let get = |n: &str| stages.iter().find(|(s, _)| *s == n).map_or(0.0, |x| x.1);
    let inference = get("match") + get("synth");
    writeln!(out, "{:<12} {:>12.4}", "match+synth", inference)?;
    let r = MetricReport::new("simulation", vec![metrics]);
    write!(out, "{}", r.to_table())?;
    if let Some(path) = report {
        let timings: serde_json::Map<String, serde_json::Value> =
            stages.iter().map(|(n, s)| (n.to_string(), json!(s))).collect();
        let doc = json!({
            "manifest": { "stage": "bench", "version": io::VERSION, "config": cfg },
            "threads": rayon::current_num_threads(),
            "n_atoms": dict.n_atoms(),
            "timings_s": timings,
            "inference_s": inference,
            "metrics": r,
        });
        io::container::write_atomic(path, serde_json::to_string_pretty(&doc)?.as_bytes())?;
    }
    Ok(())
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Internal(_) => EXIT_INTERNAL,
        _ => EXIT_USER,
    }
}

fn configure_threads() -> Result<()> {
    let Some(v) = std::env::var_os(THREADS_ENV) else { return Ok(()) };
    let n: usize = v
        .to_str()
        .and_then(|s| s.trim().parse().ok())
        .filter(|&n| n > 0)
        .ok_or_else(|| invalid(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Error::Internal(e.to_string()))
}

/// Parses arguments, runs the verb and returns the process exit code.
/// Usage errors and bad inputs give 1; internal failures and panics give 2.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return if e.use_stderr() { EXIT_USER } else { EXIT_OK };
        }
    };
    if let Err(e) = configure_threads() {
        let _ = writeln!(err, "error: {e}");
        return exit_code(&e);
    }
    match std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| run(cli, out))) {
        Ok(Ok(())) => EXIT_OK,
        Ok(Err(e)) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
        Err(_) => EXIT_INTERNAL,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn code(args: &[&str]) -> i32 {
        main_with_args(std::iter::once("mrfcs").chain(args.iter().copied()), &mut Vec::new(), &mut Vec::new())
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(code(&["frobnicate"]), EXIT_USER);
        assert_eq!(code(&["phantom", "--bogus"]), EXIT_USER);
        assert_eq!(code(&[]), EXIT_USER);
        assert_eq!(code(&["--help"]), EXIT_OK);
        assert_eq!(code(&["recon", "--in", "/nonexistent/k.bin", "--out", "/tmp/x.bin"]), EXIT_USER);
    }

    #[test]
    fn flags_override_config() {
        let cli = Cli::try_parse_from([
            "mrfcs",
            "acquire",
            "--size",
            "32",
            "--n-tr",
            "20",
            "--trajectory",
            "cartesian",
            "--snr-db",
            "30",
            "--grid",
            "full",
            "--out",
            "x",
        ])
        .unwrap();
        let Command::Acquire { cfg, .. } = cli.command else { panic!() };
        let c = cfg.resolve().unwrap();
        assert_eq!((c.phantom.height, c.sequence.n_tr), (32, 20));
        assert_eq!(c.trajectory, TrajectorySpec::Cartesian);
        assert_eq!(c.forward.noise_snr_db, Some(30.0));
        assert_eq!(c.grid, ParamGrid::full());
        let bad = ConfigArgs { trajectory: Some(TrajectoryKind::Cartesian), turns: Some(3.0), ..Default::default() };
        assert!(bad.resolve().is_err());
        assert!(ConfigArgs { grid: Some("huge".into()), ..Default::default() }.resolve().is_err());
    }

    #[test]
    fn split_parsing() {
        assert_eq!(parse_split("0.8, 0.1,0.1").unwrap(), SplitRatios::default());
        assert!(parse_split("0.5,0.5").is_err());
        assert!(parse_split("a,b,c").is_err());
        assert!(parse_split("0.9,0.9,0.1").is_err());
    }

    #[test]
    fn error_codes() {
        assert_eq!(exit_code(&Error::Internal("x".into())), EXIT_INTERNAL);
        assert_eq!(exit_code(&invalid("x")), EXIT_USER);
        assert_eq!(exit_code(&Error::Format("x".into())), EXIT_USER);
    }
}
