//! End-to-end regional run: simulate, extract, score, and compare against the
//! published per-region figures.

use std::path::{Path, PathBuf};

use crate::config::RunConfig;
use crate::entropy::{min_entropy, BinningConfig};
use crate::error::Result;
use crate::extractor::extract;
use crate::io::{write_bits, write_text, write_timestamps, BitFileMeta, KeyValues};
use crate::quality::{quality_report, QualityReport, DEFAULT_MAX_LAG};
use crate::regions::Region;
use crate::simulator::{simulate_region, DetectorModel};

pub const MIN_ENTROPY_TOLERANCE: f64 = 5e-5;
pub const THROUGHPUT_TOLERANCE: f64 = 0.05;

/// Acceptance bounds for a sample of `n_bytes` ideal random bytes, each at
/// five standard deviations of the statistic's null distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityThresholds {
    pub max_entropy_deficit: f64,
    pub max_frequency_offset: f64,
    pub max_mean_offset: f64,
    pub max_pi_error: f64,
    pub max_serial_correlation: f64,
    pub chi2_percentile_range: (f64, f64),
    pub max_lag_correlation: f64,
}

impl QualityThresholds {
    pub fn for_sample(n_bytes: u64) -> Self {
        let n = n_bytes as f64;
        let bits = 8.0 * n;
        let ln2 = std::f64::consts::LN_2;
        let quarter_pi = std::f64::consts::FRAC_PI_4;
        let groups = (n_bytes / 6).max(1) as f64;
        Self {
            // deficit of the plug-in entropy: mean 255/(2n ln 2), sd √510/(2n ln 2)
            max_entropy_deficit: (255.0 + 5.0 * 510f64.sqrt()) / (2.0 * n * ln2),
            max_frequency_offset: 5.0 * 0.5 / bits.sqrt(),
            max_mean_offset: 5.0 * ((256.0 * 256.0 - 1.0) / 12.0f64).sqrt() / n.sqrt(),
            max_pi_error: 5.0 * 4.0 * (quarter_pi * (1.0 - quarter_pi) / groups).sqrt(),
            max_serial_correlation: 5.0 / n.sqrt(),
            chi2_percentile_range: (0.1, 99.9),
            max_lag_correlation: 5.0 / bits.sqrt(),
        }
    }

    pub fn evaluate(&self, q: &QualityReport) -> Vec<Check> {
        let e = &q.ent;
        let (lo, hi) = self.chi2_percentile_range;
        vec![
            Check::new(
                "entropy_per_byte",
                e.entropy_per_byte,
                format!(">= {:.6}", 8.0 - self.max_entropy_deficit),
                8.0 - e.entropy_per_byte <= self.max_entropy_deficit,
            ),
            Check::within("frequency_zero", q.f0, 0.5, self.max_frequency_offset),
            Check::within("arithmetic_mean", e.arithmetic_mean, 127.5, self.max_mean_offset),
            Check::within("monte_carlo_pi", e.monte_carlo_pi, std::f64::consts::PI, self.max_pi_error),
            Check::within("serial_correlation", e.serial_correlation, 0.0, self.max_serial_correlation),
            Check::new(
                "chi2_percentile",
                e.chi2_percentile,
                format!("in [{lo}, {hi}]"),
                (lo..=hi).contains(&e.chi2_percentile),
            ),
            Check::within("max_abs_pearson_lag", q.lags.max_abs(), 0.0, self.max_lag_correlation),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub target: String,
    pub passed: bool,
}

impl Check {
    pub fn new(name: &'static str, value: f64, target: String, passed: bool) -> Self {
        Self {
            name,
            value,
            target,
            passed,
        }
    }

    pub fn within(name: &'static str, value: f64, target: f64, tolerance: f64) -> Self {
        Self::new(
            name,
            value,
            format!("{target} ± {tolerance:.3e}"),
            (value - target).abs() <= tolerance,
        )
    }
}

#[derive(Debug, Clone)]
pub struct ReproduceOptions {
    pub region: Region,
    pub duration_ps: u64,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub detector: DetectorModel,
}

impl ReproduceOptions {
    pub fn new(region: Region, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            region,
            duration_ps: 2_000_000_000_000,
            seed: 1,
            out_dir: out_dir.into(),
            detector: DetectorModel::default(),
        }
    }

    fn run_config(&self) -> RunConfig {
        let d = &self.detector;
        RunConfig {
            region: Some(self.region),
            duration_ps: Some(self.duration_ps),
            seed: Some(self.seed),
            dead_time_ps: Some(d.dead_time_ps()),
            jitter_fwhm_ps: Some(d.jitter_fwhm_ps().round() as u64),
            dark_rate_per_s: Some(d.dark_rate_per_s()),
            efficiency: Some(d.efficiency()),
            ..RunConfig::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReproduceOutcome {
    pub region: Region,
    pub events: usize,
    pub min_entropy: f64,
    pub throughput_bit_s: f64,
    pub quality: QualityReport,
    pub checks: Vec<Check>,
    pub timestamps_path: PathBuf,
    pub bits_path: PathBuf,
    pub report_path: PathBuf,
}

impl ReproduceOutcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn to_key_values(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.push("region", self.region.index())
            .push("events", self.events)
            .push("min_entropy", format!("{:.7}", self.min_entropy))
            .push("throughput_mbit_s", format!("{:.4}", self.throughput_bit_s * 1e-6));
        for (k, v) in self.quality.to_key_values().entries() {
            kv.push(k, v);
        }
        for c in &self.checks {
            let verdict = if c.passed { "pass" } else { "FAIL" };
            kv.push(&format!("check.{}", c.name), format!("{verdict} value={} target={}", c.value, c.target));
        }
        kv.push("result", if self.passed() { "pass" } else { "FAIL" });
        kv
    }
}

fn file_in(dir: &Path, region: Region, ext: &str) -> PathBuf {
    dir.join(format!("region{}.{ext}", region.index()))
}

/// Runs simulate → extract → quality for one region preset, writes
/// `region<k>.ts`, `region<k>.bin` (both with `.meta` sidecars) and
/// `region<k>.report` into the output directory.
pub fn reproduce(opts: &ReproduceOptions) -> Result<ReproduceOutcome> {
    let region = opts.region;
    let params = region.params();
    let flux = region.flux();
    let binning = BinningConfig::default();
    std::fs::create_dir_all(&opts.out_dir).map_err(|e| crate::Error::io(&opts.out_dir, e))?;

    let stream = simulate_region(&params, &flux, &opts.detector, opts.duration_ps, opts.seed)?;
    let timestamps_path = file_in(&opts.out_dir, region, "ts");
    write_timestamps(&timestamps_path, &stream)?;

    let extraction = extract(&stream, &binning)?;
    let bits_path = file_in(&opts.out_dir, region, "bin");
    let meta = BitFileMeta::new(&extraction, &binning, &opts.run_config().config_hash());
    write_bits(&bits_path, &extraction.bytes, &meta)?;

    let quality = quality_report(&extraction.bytes, DEFAULT_MAX_LAG)?;
    let h = min_entropy(&params, &flux, &binning)?;
    let throughput = extraction.bits_per_second();
    let reference_speed = region.reference_speed_mbit_s() * 1e6;

    let mut checks = vec![
        Check::within("min_entropy", h, region.reference_min_entropy(), MIN_ENTROPY_TOLERANCE),
        Check::new(
            "throughput",
            throughput,
            format!("{reference_speed} ± {:.0}%", THROUGHPUT_TOLERANCE * 100.0),
            ((throughput - reference_speed) / reference_speed).abs() <= THROUGHPUT_TOLERANCE,
        ),
    ];
    checks.extend(QualityThresholds::for_sample(extraction.bytes.len() as u64).evaluate(&quality));

    let report_path = file_in(&opts.out_dir, region, "report");
    let outcome = ReproduceOutcome {
        region,
        events: stream.len(),
        min_entropy: h,
        throughput_bit_s: throughput,
        quality,
        checks,
        timestamps_path,
        bits_path,
        report_path,
    };
    write_text(&outcome.report_path, &outcome.to_key_values().render())?;
    Ok(outcome)
}
