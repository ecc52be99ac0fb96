//! Command-line front end. Every value flag overrides the key of the same
//! name (dashes become underscores) from `--config`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{parse_time_ps, RunConfig};
use crate::entropy::{bin_distribution, min_entropy, min_entropy_coherent, min_entropy_single};
use crate::error::{Error, Result};
use crate::estimator::{
    average_histograms, fit_g2, g2_histogram, hbt_split, AveragingMode, FitResult, DEFAULT_MAX_EMITTERS,
    MAX_PAIRING_DELAY_NS,
};
use crate::extractor::extract;
use crate::io::{
    read_bits, read_histogram, read_timestamps, write_bits, write_histogram, write_text, write_timestamps,
    BitFileMeta, KeyValues,
};
use crate::model::{g2_detected_zero, photon_number_single};
use crate::quality::{quality_report, QualityReport, DEFAULT_MAX_LAG};
use crate::regions::Region;
use crate::reproduce::{reproduce, ReproduceOptions};
use crate::simulator::SourcePlan;

#[derive(Debug, Parser)]
#[command(name = "nvqrng", version, about = "Photon arrival-time random number generation toolkit")]
pub struct Cli {
    /// Worker threads (outputs do not depend on this).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a detected timestamp stream.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        detector: DetectorArgs,
        /// Simulated time (ps unless suffixed).
        #[arg(long)]
        duration: Option<String>,
    },
    /// Turn a timestamp file into a raw bit file.
    Extract {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        binning: BinningArgs,
    },
    /// Split a stream at a virtual beamsplitter and histogram coincidences.
    G2 {
        #[command(flatten)]
        common: CommonArgs,
        /// Second detector stream; without it the input is split in two.
        #[arg(long)]
        input_b: Option<PathBuf>,
        /// Coincidence window (default 1ns).
        #[arg(long)]
        window: Option<String>,
        /// Largest delay (default 1000ns).
        #[arg(long)]
        max_tau: Option<String>,
        #[arg(long)]
        split_seed: Option<String>,
    },
    /// Fit the shelving model to one or more histograms.
    Fit {
        #[command(flatten)]
        common: CommonArgs,
        /// Signal fraction used by the model; taken from --region if absent.
        #[arg(long)]
        rho: Option<String>,
        #[arg(long)]
        region: Option<String>,
        #[arg(long)]
        n_max: Option<String>,
        /// How repeated histograms are combined before the joint fit.
        #[arg(long, value_enum, default_value_t = Averaging::Normalized)]
        averaging: Averaging,
    },
    /// Print model quantities and the min-entropy.
    Theory {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        binning: BinningArgs,
    },
    /// Score a bit file.
    Quality {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        max_lag: Option<String>,
        /// Also print the ENT statistics as a tab-separated row.
        #[arg(long)]
        tsv: bool,
    },
    /// Simulate, extract and score a region preset against its published figures.
    Reproduce {
        /// Region 1-5.
        region: String,
        #[arg(long, default_value = "2s")]
        duration: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Averaging {
    Normalized,
    Pooled,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Flat key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Vec<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    seed: Option<String>,
}

#[derive(Debug, Args)]
pub struct ParamArgs {
    #[arg(long)]
    region: Option<String>,
    #[arg(long)]
    n_emitters: Option<String>,
    /// ns⁻¹
    #[arg(long)]
    gamma1: Option<String>,
    /// ns⁻¹ (default gamma1/20)
    #[arg(long)]
    gamma2: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    #[arg(long)]
    rho: Option<String>,
    /// Detected counts/s per emitter.
    #[arg(long)]
    lambda: Option<String>,
}

#[derive(Debug, Args)]
pub struct DetectorArgs {
    #[arg(long)]
    dead_time: Option<String>,
    /// Jitter FWHM.
    #[arg(long)]
    jitter: Option<String>,
    /// Dark counts/s.
    #[arg(long)]
    dark_rate: Option<String>,
    #[arg(long)]
    efficiency: Option<String>,
}

#[derive(Debug, Args)]
pub struct BinningArgs {
    /// Reference period T.
    #[arg(long)]
    period: Option<String>,
    /// Bins per period M (power of two).
    #[arg(long)]
    n_bins: Option<String>,
}

fn overlay(cfg: &mut RunConfig, pairs: &[(&str, &Option<String>)]) -> Result<()> {
    for (key, value) in pairs {
        if let Some(v) = value {
            cfg.set(key, v, &format!("--{}", key.replace('_', "-")))?;
        }
    }
    Ok(())
}

impl CommonArgs {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        if !self.input.is_empty() {
            cfg.input = self.input.clone();
        }
        if let Some(o) = &self.output {
            cfg.output = Some(o.clone());
        }
        overlay(&mut cfg, &[("seed", &self.seed)])?;
        Ok(cfg)
    }
}

impl ParamArgs {
    fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        overlay(
            cfg,
            &[
                ("region", &self.region),
                ("n_emitters", &self.n_emitters),
                ("gamma1", &self.gamma1),
                ("gamma2", &self.gamma2),
                ("beta", &self.beta),
                ("rho", &self.rho),
                ("lambda", &self.lambda),
            ],
        )
    }
}

impl DetectorArgs {
    fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        overlay(
            cfg,
            &[
                ("dead_time", &self.dead_time),
                ("jitter", &self.jitter),
                ("dark_rate", &self.dark_rate),
                ("efficiency", &self.efficiency),
            ],
        )
    }
}

impl BinningArgs {
    fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        overlay(cfg, &[("period", &self.period), ("n_bins", &self.n_bins)])
    }
}

fn missing(what: &str) -> Error {
    Error::Config {
        location: "command line".into(),
        message: format!("missing {what}"),
    }
}

fn single_input(cfg: &RunConfig) -> Result<&Path> {
    match cfg.input.as_slice() {
        [p] => Ok(p),
        [] => Err(missing("--input")),
        _ => Err(Error::Config {
            location: "command line".into(),
            message: "this command takes exactly one --input".into(),
        }),
    }
}

fn output(cfg: &RunConfig) -> Result<&Path> {
    cfg.output.as_deref().ok_or_else(|| missing("--output"))
}

/// Writes a report to `--output` when given, and always to stdout.
fn emit(cfg: &RunConfig, text: &str) -> Result<()> {
    if let Some(path) = &cfg.output {
        write_text(path, text)?;
    }
    print!("{text}");
    Ok(())
}

fn cmd_simulate(common: &CommonArgs, params: &ParamArgs, det: &DetectorArgs, duration: &Option<String>) -> Result<()> {
    let mut cfg = common.load()?;
    params.apply(&mut cfg)?;
    det.apply(&mut cfg)?;
    overlay(&mut cfg, &[("duration", duration)])?;
    let (p, flux) = cfg.emitter()?;
    let detector = cfg.detector()?;
    let plan = SourcePlan::new(&p, &flux, &detector)?;
    let stream = plan.simulate(cfg.duration_ps(), cfg.seed())?;
    let out = output(&cfg)?;
    write_timestamps(out, &stream)?;
    let mut kv = KeyValues::new();
    kv.push("events", stream.len())
        .push("duration_ps", stream.duration_ps())
        .push("rate_per_s", format!("{:.3}", stream.rate_per_s()))
        .push("expected_rate_before_dead_time_per_s", format!("{:.3}", plan.expected_rate_per_s()))
        .push("config_hash", cfg.config_hash());
    print!("{}", kv.render());
    Ok(())
}

fn cmd_extract(common: &CommonArgs, binning: &BinningArgs) -> Result<()> {
    let mut cfg = common.load()?;
    binning.apply(&mut cfg)?;
    let bins = cfg.binning()?;
    let stream = read_timestamps(single_input(&cfg)?)?;
    let result = extract(&stream, &bins)?;
    if result.bytes.is_empty() {
        eprintln!("warning: no symbols extracted; writing an empty bit file");
    }
    let meta = BitFileMeta::new(&result, &bins, &cfg.config_hash());
    write_bits(output(&cfg)?, &result.bytes, &meta)?;
    let mut kv = meta.to_key_values();
    kv.push("bytes", result.bytes.len())
        .push("throughput_bit_s", format!("{:.1}", result.bits_per_second()));
    print!("{}", kv.render());
    Ok(())
}

fn cmd_g2(
    common: &CommonArgs,
    input_b: &Option<PathBuf>,
    window: &Option<String>,
    max_tau: &Option<String>,
    split_seed: &Option<String>,
) -> Result<()> {
    let mut cfg = common.load()?;
    overlay(&mut cfg, &[("window", window), ("max_tau", max_tau), ("split_seed", split_seed)])?;
    let stream = read_timestamps(single_input(&cfg)?)?;
    let (a, b) = match input_b {
        Some(path) => (stream, read_timestamps(path)?),
        None => hbt_split(&stream, cfg.split_seed.unwrap_or(cfg.seed())),
    };
    let total_time_s = a.duration_s().max(b.duration_s());
    let window_ns = cfg.window_ps.unwrap_or(1000) as f64 * 1e-3;
    let max_tau_ns = cfg.max_tau_ps.map_or(MAX_PAIRING_DELAY_NS, |t| t as f64 * 1e-3);
    let hist = g2_histogram(&a, &b, window_ns, max_tau_ns, total_time_s)?;
    write_histogram(output(&cfg)?, &hist)?;
    let mut kv = KeyValues::new();
    kv.push("counts_det0", hist.counts_det0)
        .push("counts_det1", hist.counts_det1)
        .push("windows", hist.len());
    if let Some((g0, sigma)) = hist.zero_delay() {
        kv.push("g2_zero", format!("{g0:.5}")).push("g2_zero_sigma", format!("{sigma:.5}"));
    }
    print!("{}", kv.render());
    Ok(())
}

fn fit_key_values(fit: &FitResult) -> KeyValues {
    let mut kv = KeyValues::new();
    kv.push("n_emitters", fit.n_emitters)
        .push("gamma_per_ns", format!("{:.6e}", fit.gamma))
        .push("gamma_std_err", format!("{:.3e}", fit.gamma_std_err))
        .push("beta", format!("{:.6}", fit.beta))
        .push("beta_std_err", format!("{:.3e}", fit.beta_std_err))
        .push("rho_used", fit.rho_used)
        .push("residual_sum_squares", format!("{:.6e}", fit.residual_sum_squares))
        .push("points", fit.points);
    let curve: Vec<String> = fit.rss_by_n.iter().map(|r| format!("{r:.4e}")).collect();
    kv.push("rss_by_n", curve.join(","));
    kv
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}

fn cmd_fit(
    common: &CommonArgs,
    rho: &Option<String>,
    region: &Option<String>,
    n_max: &Option<String>,
    averaging: Averaging,
) -> Result<()> {
    let mut cfg = common.load()?;
    overlay(&mut cfg, &[("rho", rho), ("region", region), ("n_max", n_max)])?;
    let rho = match (cfg.rho, cfg.region) {
        (Some(r), _) => r,
        (None, Some(region)) => region.params().rho(),
        (None, None) => return Err(missing("--rho or --region")),
    };
    if cfg.input.is_empty() {
        return Err(missing("--input"));
    }
    let n_max = cfg.n_max.unwrap_or(DEFAULT_MAX_EMITTERS);
    let hists = cfg.input.iter().map(|p| read_histogram(p)).collect::<Result<Vec<_>>>()?;
    let mode = match averaging {
        Averaging::Normalized => AveragingMode::NormalizedEqualWeight,
        Averaging::Pooled => AveragingMode::PooledCounts,
    };
    let joint = fit_g2(&average_histograms(&hists, mode)?, rho, n_max)?;
    let mut kv = fit_key_values(&joint);
    if hists.len() > 1 {
        let fits = hists.iter().map(|h| fit_g2(h, rho, n_max)).collect::<Result<Vec<_>>>()?;
        let n: Vec<f64> = fits.iter().map(|f| f64::from(f.n_emitters)).collect();
        let g: Vec<f64> = fits.iter().map(|f| f.gamma).collect();
        let b: Vec<f64> = fits.iter().map(|f| f.beta).collect();
        kv.push("repetitions", fits.len());
        for (name, xs) in [("n_emitters", n), ("gamma_per_ns", g), ("beta", b)] {
            let (m, sd) = mean_sd(&xs);
            kv.push(&format!("repeat_{name}_mean"), format!("{m:.6e}"))
                .push(&format!("repeat_{name}_sd"), format!("{sd:.3e}"));
        }
    }
    emit(&cfg, &kv.render())
}

fn cmd_theory(common: &CommonArgs, params: &ParamArgs, binning: &BinningArgs) -> Result<()> {
    let mut cfg = common.load()?;
    params.apply(&mut cfg)?;
    binning.apply(&mut cfg)?;
    let (p, flux) = cfg.emitter()?;
    let bins = cfg.binning()?;
    let tau = bins.bin_width_ns();
    let single = photon_number_single(tau, &flux, &p)?;
    let dist = bin_distribution(&p, &flux, &bins)?;
    let mut kv = KeyValues::new();
    kv.push("n_emitters", p.n_emitters())
        .push("gamma1_per_ns", p.gamma1())
        .push("gamma2_per_ns", p.gamma2())
        .push("beta", p.beta())
        .push("rho", p.rho())
        .push("lambda_per_s", flux.per_second())
        .push("period_ps", bins.period_ps())
        .push("n_bins", bins.n_bins())
        .push("g2_detected_zero", format!("{:.9}", g2_detected_zero(tau, &p)?))
        .push("p0", format!("{:.12e}", single.p0))
        .push("p1", format!("{:.12e}", single.p1))
        .push("p2", format!("{:.12e}", single.p2))
        .push("first_bin_probability", format!("{:.12e}", dist.probabilities[0]))
        .push("min_entropy", format!("{:.7}", min_entropy(&p, &flux, &bins)?))
        .push("min_entropy_single_route", format!("{:.7}", min_entropy_single(&p, &flux, &bins)?))
        .push(
            "min_entropy_coherent_same_flux",
            format!("{:.7}", min_entropy_coherent(flux.per_ns() * f64::from(p.n_emitters()), &bins)?),
        );
    if let Some(region) = cfg.region {
        kv.push("reference_min_entropy", region.reference_min_entropy());
    }
    emit(&cfg, &kv.render())
}

fn cmd_quality(common: &CommonArgs, max_lag: &Option<String>, tsv: bool) -> Result<()> {
    let mut cfg = common.load()?;
    overlay(&mut cfg, &[("max_lag", max_lag)])?;
    let bytes = read_bits(single_input(&cfg)?)?;
    let report: QualityReport = quality_report(&bytes, cfg.max_lag.unwrap_or(DEFAULT_MAX_LAG))?;
    let mut text = report.to_key_values().render();
    if tsv {
        text.push_str(&format!("# {}\n{}\n", QualityReport::TSV_HEADER, report.tsv_row()));
    }
    emit(&cfg, &text)
}

fn cmd_reproduce(region: &str, duration: &str, seed: u64, out_dir: &Path) -> Result<bool> {
    let region: Region = region.parse()?;
    let duration_ps = parse_time_ps(duration).map_err(|message| Error::Config {
        location: "--duration".into(),
        message,
    })?;
    let mut opts = ReproduceOptions::new(region, out_dir);
    opts.duration_ps = duration_ps;
    opts.seed = seed;
    let outcome = reproduce(&opts)?;
    print!("{}", outcome.to_key_values().render());
    Ok(outcome.passed())
}

fn dispatch(command: &Command) -> Result<bool> {
    match command {
        Command::Simulate {
            common,
            params,
            detector,
            duration,
        } => cmd_simulate(common, params, detector, duration).map(|_| true),
        Command::Extract { common, binning } => cmd_extract(common, binning).map(|_| true),
        Command::G2 {
            common,
            input_b,
            window,
            max_tau,
            split_seed,
        } => cmd_g2(common, input_b, window, max_tau, split_seed).map(|_| true),
        Command::Fit {
            common,
            rho,
            region,
            n_max,
            averaging,
        } => cmd_fit(common, rho, region, n_max, *averaging).map(|_| true),
        Command::Theory {
            common,
            params,
            binning,
        } => cmd_theory(common, params, binning).map(|_| true),
        Command::Quality { common, max_lag, tsv } => cmd_quality(common, max_lag, *tsv).map(|_| true),
        Command::Reproduce {
            region,
            duration,
            seed,
            out_dir,
        } => cmd_reproduce(region, duration, *seed, out_dir),
    }
}

fn report_error(e: &Error) {
    eprintln!("error: {e}");
    let mut source = std::error::Error::source(e);
    while let Some(s) = source {
        eprintln!("  caused by: {s}");
        source = s.source();
    }
}

/// Exit status: 0 on success, 1 when `reproduce` checks fail, 2 on errors.
pub fn run(cli: Cli) -> ExitCode {
    let outcome = match cli.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(&cli.command)),
            Err(e) => {
                eprintln!("error: cannot start {n} worker threads: {e}");
                return ExitCode::from(2);
            }
        },
        None => dispatch(&cli.command),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            report_error(&e);
            ExitCode::from(2)
        }
    }
}
