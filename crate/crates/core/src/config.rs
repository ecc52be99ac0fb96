//! Run configuration: flat `key = value` files, unit-suffixed values and
//! resolution into model, detector and binning parameters.

use std::path::PathBuf;

use sha2::{Digest, Sha256};

use crate::entropy::BinningConfig;
use crate::error::{Error, Result};
use crate::io::KeyValues;
use crate::model::{EmitterParams, FluxSpec, SHELVING_RATE_RATIO};
use crate::regions::Region;
use crate::simulator::DetectorModel;

pub const DEFAULT_DURATION_PS: u64 = 1_000_000_000_000;

/// Parses a time: picoseconds unless suffixed `ps`, `ns`, `us`, `ms` or `s`.
/// The result must be a whole number of picoseconds.
pub fn parse_time_ps(text: &str) -> std::result::Result<u64, String> {
    let t = text.trim();
    let (number, scale) = [("ps", 1.0), ("ns", 1e3), ("us", 1e6), ("ms", 1e9), ("s", 1e12)]
        .iter()
        .find_map(|(suffix, scale)| t.strip_suffix(suffix).map(|n| (n.trim(), *scale)))
        .unwrap_or((t, 1.0));
    let value: f64 = number
        .parse()
        .map_err(|_| format!("`{text}` is not a time (expected e.g. 24000, 24ns, 2s)"))?;
    let ps = value * scale;
    if !(ps.is_finite() && ps >= 0.0) {
        return Err(format!("time `{text}` must be finite and non-negative"));
    }
    let rounded = ps.round();
    if (ps - rounded).abs() > 1e-6 * rounded.max(1.0) || rounded > u64::MAX as f64 {
        return Err(format!("time `{text}` is not a whole number of picoseconds"));
    }
    Ok(rounded as u64)
}

fn parse_number<T: std::str::FromStr>(text: &str, what: &str) -> std::result::Result<T, String> {
    text.trim()
        .parse()
        .map_err(|_| format!("`{text}` is not a valid {what}"))
}

/// Every setting the subcommands read. Unset fields fall back to defaults
/// at resolution time.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    pub region: Option<Region>,
    pub n_emitters: Option<u32>,
    /// ns⁻¹
    pub gamma1: Option<f64>,
    /// ns⁻¹
    pub gamma2: Option<f64>,
    pub beta: Option<f64>,
    pub rho: Option<f64>,
    /// Detected flux per emitter, counts/s.
    pub lambda_per_s: Option<f64>,
    pub period_ps: Option<u64>,
    pub n_bins: Option<u32>,
    pub dead_time_ps: Option<u64>,
    pub jitter_fwhm_ps: Option<u64>,
    pub dark_rate_per_s: Option<f64>,
    pub efficiency: Option<f64>,
    pub duration_ps: Option<u64>,
    pub seed: Option<u64>,
    pub split_seed: Option<u64>,
    pub window_ps: Option<u64>,
    pub max_tau_ps: Option<u64>,
    pub n_max: Option<u32>,
    pub max_lag: Option<usize>,
    pub input: Vec<PathBuf>,
    pub output: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_text(text: &str, source: &str) -> Result<Self> {
        let kv = KeyValues::parse(text, source)?;
        let mut cfg = Self::default();
        // line numbers for diagnostics: re-scan to locate each key
        let lines: Vec<&str> = text.lines().collect();
        for (key, value) in kv.entries() {
            let line = lines
                .iter()
                .position(|l| l.split('#').next().unwrap_or("").split_once('=').map(|(k, _)| k.trim()) == Some(key))
                .map_or(0, |i| i + 1);
            cfg.set(key, value, &format!("{source}:{line}"))?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, &path.display().to_string())
    }

    /// Sets one key; `location` names the config line or flag for diagnostics.
    pub fn set(&mut self, key: &str, value: &str, location: &str) -> Result<()> {
        let fail = |message: String| Error::Config {
            location: location.to_owned(),
            message: format!("{key}: {message}"),
        };
        match key {
            "region" => self.region = Some(value.parse().map_err(|e: Error| fail(e.to_string()))?),
            "n_emitters" => self.n_emitters = Some(parse_number(value, "emitter count").map_err(fail)?),
            "gamma1" => self.gamma1 = Some(parse_number(value, "rate in ns^-1").map_err(fail)?),
            "gamma2" => self.gamma2 = Some(parse_number(value, "rate in ns^-1").map_err(fail)?),
            "beta" => self.beta = Some(parse_number(value, "number").map_err(fail)?),
            "rho" => self.rho = Some(parse_number(value, "number").map_err(fail)?),
            "lambda" => self.lambda_per_s = Some(parse_number(value, "rate in counts/s").map_err(fail)?),
            "period" => self.period_ps = Some(parse_time_ps(value).map_err(fail)?),
            "n_bins" => self.n_bins = Some(parse_number(value, "bin count").map_err(fail)?),
            "dead_time" => self.dead_time_ps = Some(parse_time_ps(value).map_err(fail)?),
            "jitter" => self.jitter_fwhm_ps = Some(parse_time_ps(value).map_err(fail)?),
            "dark_rate" => self.dark_rate_per_s = Some(parse_number(value, "rate in counts/s").map_err(fail)?),
            "efficiency" => self.efficiency = Some(parse_number(value, "number").map_err(fail)?),
            "duration" => self.duration_ps = Some(parse_time_ps(value).map_err(fail)?),
            "seed" => self.seed = Some(parse_number(value, "seed").map_err(fail)?),
            "split_seed" => self.split_seed = Some(parse_number(value, "seed").map_err(fail)?),
            "window" => self.window_ps = Some(parse_time_ps(value).map_err(fail)?),
            "max_tau" => self.max_tau_ps = Some(parse_time_ps(value).map_err(fail)?),
            "n_max" => self.n_max = Some(parse_number(value, "emitter count").map_err(fail)?),
            "max_lag" => self.max_lag = Some(parse_number(value, "lag").map_err(fail)?),
            "input" => self.input.push(PathBuf::from(value.trim())),
            "output" => self.output = Some(PathBuf::from(value.trim())),
            _ => return Err(fail("unknown key".into())),
        }
        Ok(())
    }

    fn explicit_keys(&self) -> Vec<&'static str> {
        [
            ("n_emitters", self.n_emitters.is_some()),
            ("gamma1", self.gamma1.is_some()),
            ("gamma2", self.gamma2.is_some()),
            ("beta", self.beta.is_some()),
            ("rho", self.rho.is_some()),
            ("lambda", self.lambda_per_s.is_some()),
        ]
        .into_iter()
        .filter_map(|(k, set)| set.then_some(k))
        .collect()
    }

    fn config_error(message: impl Into<String>) -> Error {
        Error::Config {
            location: "configuration".into(),
            message: message.into(),
        }
    }

    /// Emitter parameters and flux from either a region preset or the
    /// explicit keys, never both. γ₂ defaults to γ₁/20.
    pub fn emitter(&self) -> Result<(EmitterParams, FluxSpec)> {
        let explicit = self.explicit_keys();
        match (self.region, explicit.is_empty()) {
            (Some(_), false) => Err(Self::config_error(format!(
                "`region` cannot be combined with explicit parameters ({})",
                explicit.join(", ")
            ))),
            (Some(r), true) => Ok((r.params(), r.flux())),
            (None, true) => Err(Self::config_error(
                "no emitter parameters: set `region` or n_emitters, gamma1, beta, rho and lambda",
            )),
            (None, false) => {
                let missing = |k: &str| Self::config_error(format!("explicit parameters need `{k}`"));
                let n = self.n_emitters.ok_or_else(|| missing("n_emitters"))?;
                let g1 = self.gamma1.ok_or_else(|| missing("gamma1"))?;
                let g2 = self.gamma2.unwrap_or(g1 / SHELVING_RATE_RATIO);
                let beta = self.beta.ok_or_else(|| missing("beta"))?;
                let rho = self.rho.ok_or_else(|| missing("rho"))?;
                let lambda = self.lambda_per_s.ok_or_else(|| missing("lambda"))?;
                let params = EmitterParams::new(n, g1, g2, beta, rho)?;
                let flux = FluxSpec::new(lambda * 1e-9, &params)?;
                Ok((params, flux))
            }
        }
    }

    pub fn binning(&self) -> Result<BinningConfig> {
        let d = BinningConfig::default();
        BinningConfig::new(self.period_ps.unwrap_or(d.period_ps()), self.n_bins.unwrap_or(d.n_bins()))
    }

    pub fn detector(&self) -> Result<DetectorModel> {
        let d = DetectorModel::default();
        DetectorModel::new(
            self.dead_time_ps.unwrap_or(d.dead_time_ps()),
            self.jitter_fwhm_ps.map_or(d.jitter_fwhm_ps(), |j| j as f64),
            self.dark_rate_per_s.unwrap_or(d.dark_rate_per_s()),
            self.efficiency.unwrap_or(d.efficiency()),
        )
    }

    pub fn duration_ps(&self) -> u64 {
        self.duration_ps.unwrap_or(DEFAULT_DURATION_PS)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    /// Every set value except paths, in a fixed order.
    pub fn canonical(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        macro_rules! put {
            ($($key:literal => $field:expr),* $(,)?) => {
                $(if let Some(v) = &$field { kv.push($key, v); })*
            };
        }
        put!(
            "region" => self.region.map(Region::index),
            "n_emitters" => self.n_emitters,
            "gamma1" => self.gamma1,
            "gamma2" => self.gamma2,
            "beta" => self.beta,
            "rho" => self.rho,
            "lambda" => self.lambda_per_s,
            "period" => self.period_ps,
            "n_bins" => self.n_bins,
            "dead_time" => self.dead_time_ps,
            "jitter" => self.jitter_fwhm_ps,
            "dark_rate" => self.dark_rate_per_s,
            "efficiency" => self.efficiency,
            "duration" => self.duration_ps,
            "seed" => self.seed,
            "split_seed" => self.split_seed,
            "window" => self.window_ps,
            "max_tau" => self.max_tau_ps,
            "n_max" => self.n_max,
            "max_lag" => self.max_lag,
        );
        kv
    }

    /// SHA-256 of the canonical form, hex encoded.
    pub fn config_hash(&self) -> String {
        hex_digest(self.canonical().render().as_bytes())
    }
}

pub fn hex_digest(data: &[u8]) -> String {
    Sha256::digest(data).iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn time_units() {
        assert_eq!(parse_time_ps("24000"), Ok(24_000));
        assert_eq!(parse_time_ps("24ns"), Ok(24_000));
        assert_eq!(parse_time_ps("12.8 ns"), Ok(12_800));
        assert_eq!(parse_time_ps("2s"), Ok(2_000_000_000_000));
        assert_eq!(parse_time_ps("1.5us"), Ok(1_500_000));
        assert_eq!(parse_time_ps("3ms"), Ok(3_000_000_000));
        assert_eq!(parse_time_ps("25ps"), Ok(25));
        assert!(parse_time_ps("0.5ps").is_err());
        assert!(parse_time_ps("-1ns").is_err());
        assert!(parse_time_ps("5 minutes").is_err());
        assert!(parse_time_ps("").is_err());
    }

    #[test]
    fn config_file_with_diagnostics() {
        let cfg = RunConfig::from_text("# run\nregion = 3\nduration = 10ms\nseed=7\n", "run.cfg").unwrap();
        assert_eq!(cfg.region, Some(Region::R3));
        assert_eq!(cfg.duration_ps(), 10_000_000_000);
        assert_eq!(cfg.seed(), 7);
        let err = RunConfig::from_text("seed = 1\n\ndead_time = 24 parsecs\n", "run.cfg").unwrap_err();
        assert!(err.to_string().starts_with("run.cfg:3: dead_time:"), "{err}");
        let err = RunConfig::from_text("colour = blue\n", "run.cfg").unwrap_err();
        assert_eq!(err.to_string(), "run.cfg:1: colour: unknown key");
    }

    #[test]
    fn parameter_sources_are_exclusive() {
        let mut cfg = RunConfig::default();
        assert!(cfg.emitter().is_err());
        cfg.set("region", "1", "--region").unwrap();
        let (p, f) = cfg.emitter().unwrap();
        assert_eq!(p, Region::R1.params());
        assert_eq!(f.per_ns(), Region::R1.flux().per_ns());
        cfg.set("rho", "0.9", "--rho").unwrap();
        assert!(cfg.emitter().is_err());

        let mut explicit = RunConfig::default();
        for (k, v) in [("n_emitters", "2"), ("gamma1", "0.029"), ("beta", "1.218"), ("rho", "0.96816")] {
            explicit.set(k, v, "test").unwrap();
        }
        assert!(explicit.emitter().is_err());
        explicit.set("lambda", "12300", "test").unwrap();
        let (p, f) = explicit.emitter().unwrap();
        assert_eq!(p, Region::R2.params());
        assert!((f.per_ns() - 1.23e-5).abs() < 1e-18);
    }

    #[test]
    fn hash_ignores_paths_and_tracks_values() {
        let mut a = RunConfig::default();
        a.set("region", "1", "x").unwrap();
        let mut b = a.clone();
        b.set("output", "/tmp/elsewhere", "x").unwrap();
        assert_eq!(a.config_hash(), b.config_hash());
        b.set("seed", "3", "x").unwrap();
        assert_ne!(a.config_hash(), b.config_hash());
        assert_eq!(a.config_hash().len(), 64);
    }
}
