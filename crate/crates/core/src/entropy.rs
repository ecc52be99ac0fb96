//! First-arrival bin probabilities and min-entropy of the periodic
//! time-of-arrival scheme.

use crate::error::{Error, Result};
use crate::model::{photon_number_single, EmitterParams, FluxSpec, NeumaierSum};

/// Period T split into M bins of width τ = T/M. All lengths in picoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BinningConfig {
    period_ps: u64,
    n_bins: u32,
    bin_width_ps: u64,
}

impl Default for BinningConfig {
    fn default() -> Self {
        Self {
            period_ps: 12_800,
            n_bins: 256,
            bin_width_ps: 50,
        }
    }
}

impl BinningConfig {
    pub fn new(period_ps: u64, n_bins: u32) -> Result<Self> {
        if n_bins < 2 || !n_bins.is_power_of_two() {
            return Err(Error::param(
                "n_bins",
                format!("must be a power of two >= 2, got {n_bins}"),
            ));
        }
        if period_ps == 0 || !period_ps.is_multiple_of(u64::from(n_bins)) {
            return Err(Error::param(
                "period_ps",
                format!("period {period_ps} ps is not a positive multiple of {n_bins} bins"),
            ));
        }
        Ok(Self {
            period_ps,
            n_bins,
            bin_width_ps: period_ps / u64::from(n_bins),
        })
    }

    pub fn period_ps(&self) -> u64 {
        self.period_ps
    }

    pub fn n_bins(&self) -> u32 {
        self.n_bins
    }

    pub fn bin_width_ps(&self) -> u64 {
        self.bin_width_ps
    }

    pub fn period_ns(&self) -> f64 {
        self.period_ps as f64 * 1e-3
    }

    pub fn bin_width_ns(&self) -> f64 {
        self.bin_width_ps as f64 * 1e-3
    }

    pub fn bits_per_symbol(&self) -> u32 {
        self.n_bins.trailing_zeros()
    }
}

/// Probability that the first photon of a period lands in bin i (index 0 = first bin).
#[derive(Debug, Clone, PartialEq)]
pub struct BinDistribution {
    pub probabilities: Vec<f64>,
}

impl BinDistribution {
    pub fn max(&self) -> f64 {
        self.probabilities.iter().copied().fold(0.0, f64::max)
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    /// −log_M of the largest probability.
    pub fn min_entropy(&self) -> f64 {
        -self.max().ln() / (self.len() as f64).ln()
    }
}

/// Per-bin photon-number summary shared by the distribution and entropy routes.
struct BinStatistics {
    /// ln P_τ⁽ᴺ⁾(0)
    ln_empty: f64,
    /// Σ_{ℓ ≥ 1} P_τ⁽ᴺ⁾(ℓ)
    occupied: f64,
}

fn bin_statistics(params: &EmitterParams, flux: &FluxSpec, cfg: &BinningConfig) -> Result<BinStatistics> {
    let single = photon_number_single(cfg.bin_width_ns(), flux, params)?;
    let n = params.n_emitters();
    let mut occupied = NeumaierSum::default();
    for l in 1..=2 * n {
        occupied.add(single.total_count_probability(l, n));
    }
    // P⁽ᴺ⁾(0) = (P⁽¹⁾(0))ᴺ, kept in log form since 1 − P(0) is ~1e-6 at typical fluxes
    let ln_empty = f64::from(n) * (-single.nonzero()).ln_1p();
    Ok(BinStatistics {
        ln_empty,
        occupied: occupied.total(),
    })
}

/// First-arrival bin distribution for N independent emitters.
pub fn bin_distribution(
    params: &EmitterParams,
    flux: &FluxSpec,
    cfg: &BinningConfig,
) -> Result<BinDistribution> {
    let stats = bin_statistics(params, flux, cfg)?;
    let m = f64::from(cfg.n_bins());
    // 1 − P(0)^M
    let any_arrival = -(m * stats.ln_empty).exp_m1();
    let first = stats.occupied / any_arrival;
    let probabilities = (0..cfg.n_bins())
        .map(|i| first * (f64::from(i) * stats.ln_empty).exp())
        .collect();
    Ok(BinDistribution { probabilities })
}

/// Min-entropy per bit of the extracted symbols.
pub fn min_entropy(params: &EmitterParams, flux: &FluxSpec, cfg: &BinningConfig) -> Result<f64> {
    let stats = bin_statistics(params, flux, cfg)?;
    let m = f64::from(cfg.n_bins());
    let any_arrival = -(m * stats.ln_empty).exp_m1();
    let ln_first = stats.occupied.ln() - any_arrival.ln();
    Ok(-ln_first / m.ln())
}

/// Single-emitter min-entropy from P(1) + P(2) directly, ignoring the emitter count.
pub fn min_entropy_single(params: &EmitterParams, flux: &FluxSpec, cfg: &BinningConfig) -> Result<f64> {
    let d = photon_number_single(cfg.bin_width_ns(), flux, params)?;
    let m = f64::from(cfg.n_bins());
    let empty_all = m * (-(d.p1 + d.p2)).ln_1p();
    let denominator = -empty_all.exp_m1();
    Ok(-((d.p1 + d.p2) / denominator).ln() / m.ln())
}

/// Min-entropy per bit for a coherent (Poissonian) source of total flux `lambda_per_ns`.
pub fn min_entropy_coherent(lambda_per_ns: f64, cfg: &BinningConfig) -> Result<f64> {
    if !(lambda_per_ns.is_finite() && lambda_per_ns > 0.0) {
        return Err(Error::param(
            "lambda",
            format!("coherent flux must be positive, got {lambda_per_ns}"),
        ));
    }
    let x = lambda_per_ns * cfg.period_ns();
    let ln_m = f64::from(cfg.n_bins()).ln();
    Ok(1.0 + (-(-x).exp_m1()).ln() / ln_m - x.ln() / ln_m)
}

/// Bin distribution of a lone photon in a period, evaluated from the
/// unsimplified ratio of "empty except bin i" probabilities.
pub fn conditional_single_photon_bins(p_empty: f64, p_one: f64, n_bins: u32) -> Result<BinDistribution> {
    if !(p_empty > 0.0 && p_empty < 1.0) {
        return Err(Error::Domain(format!(
            "empty-bin probability must lie strictly inside (0, 1), got {p_empty}"
        )));
    }
    if !(p_one > 0.0 && p_one <= 1.0 - p_empty) {
        return Err(Error::Domain(format!(
            "single-photon probability {p_one} must lie in (0, 1 - {p_empty}]"
        )));
    }
    if n_bins < 1 {
        return Err(Error::param("n_bins", "must be at least 1"));
    }
    let ln_empty = p_empty.ln();
    let ln_one = p_one.ln();
    let m = n_bins;
    let ln_terms: Vec<f64> = (1..=m)
        .map(|i| f64::from(i - 1) * ln_empty + ln_one + f64::from(m - i) * ln_empty)
        .collect();
    let peak = ln_terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut norm = NeumaierSum::default();
    for &t in &ln_terms {
        norm.add((t - peak).exp());
    }
    let norm = norm.total();
    let probabilities = ln_terms.iter().map(|&t| (t - peak).exp() / norm).collect();
    Ok(BinDistribution { probabilities })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regions::Region;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn binning_defaults_and_validation() {
        let cfg = BinningConfig::default();
        assert_eq!(cfg, BinningConfig::new(12_800, 256).unwrap());
        assert_eq!(cfg.bin_width_ps(), 50);
        assert_eq!(cfg.bits_per_symbol(), 8);
        assert!(BinningConfig::new(12_800, 255).is_err());
        assert!(BinningConfig::new(12_801, 256).is_err());
        assert!(BinningConfig::new(12_800, 1).is_err());
    }

    #[test]
    fn vanishing_flux_is_uniform() {
        let p = Region::R1.params();
        let flux = FluxSpec::new(1e-14, &p).unwrap();
        let cfg = BinningConfig::default();
        let d = bin_distribution(&p, &flux, &cfg).unwrap();
        for &pi in &d.probabilities {
            assert!((pi * 256.0 - 1.0).abs() < 1e-6);
        }
        assert!((min_entropy(&p, &flux, &cfg).unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn region1_distribution_is_nearly_flat() {
        let cfg = BinningConfig::default();
        let d = bin_distribution(&Region::R1.params(), &Region::R1.flux(), &cfg).unwrap();
        let excess = d.max() * 256.0 - 1.0;
        assert!(excess > 0.0 && excess < 1e-3, "excess {excess}");
        let sum: f64 = d.probabilities.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn geometric_ratio_is_empty_probability() {
        let p = Region::R4.params();
        let flux = FluxSpec::new(0.002, &p).unwrap();
        let cfg = BinningConfig::default();
        let d = bin_distribution(&p, &flux, &cfg).unwrap();
        let single = photon_number_single(0.05, &flux, &p).unwrap();
        let p0n = single.total_count_probability(0, p.n_emitters());
        for w in d.probabilities.windows(2) {
            assert!((w[1] / w[0] - p0n).abs() < 1e-12);
            assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn table_values_region1_and_region5() {
        let cfg = BinningConfig::default();
        let h1 = min_entropy(&Region::R1.params(), &Region::R1.flux(), &cfg).unwrap();
        assert!((h1 - 0.999975).abs() < 2e-5, "{h1}");
        let h5 = min_entropy(&Region::R5.params(), &Region::R5.flux(), &cfg).unwrap();
        assert!((h5 - 0.999314).abs() < 5e-5, "{h5}");
    }

    #[test]
    fn single_route_matches_ensemble_route() {
        let cfg = BinningConfig::default();
        let p = Region::R1.params();
        for lambda in [1e-7, 2.16e-5, 1e-3, 1.5e-2] {
            let flux = FluxSpec::new(lambda, &p).unwrap();
            let a = min_entropy(&p, &flux, &cfg).unwrap();
            let b = min_entropy_single(&p, &flux, &cfg).unwrap();
            assert!((a - b).abs() < 1e-12, "lambda {lambda}: {a} vs {b}");
        }
    }

    #[test]
    fn coherent_limits() {
        let cfg = BinningConfig::default();
        let h = min_entropy_coherent(1e-9 / 12.8, &cfg).unwrap();
        assert!((h - 1.0).abs() < 1e-9);
        assert!(min_entropy_coherent(0.0, &cfg).is_err());
        let mut last = f64::INFINITY;
        for i in 0..100 {
            let lambda = 10f64.powf(-6.0 + 4.0 * f64::from(i) / 99.0);
            let h = min_entropy_coherent(lambda, &cfg).unwrap();
            assert!(h < last);
            last = h;
        }
    }

    #[test]
    fn coherent_matches_single_emitter_region1() {
        let cfg = BinningConfig::default();
        let a = min_entropy_coherent(0.0000216, &cfg).unwrap();
        let b = min_entropy(&Region::R1.params(), &Region::R1.flux(), &cfg).unwrap();
        assert!((a - b).abs() < 1e-5);
    }

    #[test]
    fn min_entropy_monotone_in_flux_and_count() {
        let cfg = BinningConfig::default();
        let base = Region::R3.params();
        for n in [1, 4, 17] {
            let p = base.with_n_emitters(n).unwrap();
            let mut last = f64::INFINITY;
            for i in 0..40 {
                let flux = FluxSpec::new(1e-6 * 1.25f64.powi(i), &p).unwrap();
                let h = min_entropy(&p, &flux, &cfg).unwrap();
                assert!(h <= last && h <= 1.0);
                last = h;
            }
        }
        let flux = FluxSpec::new(1e-4, &base).unwrap();
        let mut last = f64::INFINITY;
        for n in 1..60 {
            let h = min_entropy(&base.with_n_emitters(n).unwrap(), &flux, &cfg).unwrap();
            assert!(h <= last);
            last = h;
        }
    }

    #[test]
    fn conditional_bins_fixed_examples() {
        let d = conditional_single_photon_bins(0.9, 0.05, 16).unwrap();
        assert!(d.probabilities.iter().all(|&p| (p - 0.0625).abs() < 1e-12));
        let d = conditional_single_photon_bins(0.5, 0.5, 2).unwrap();
        assert!(d.probabilities.iter().all(|&p| (p - 0.5).abs() < 1e-12));
        assert!(conditional_single_photon_bins(0.0, 0.5, 4).is_err());
        assert!(conditional_single_photon_bins(1.0, 0.0, 4).is_err());
        assert!(conditional_single_photon_bins(0.6, 0.5, 4).is_err());
    }

    #[test]
    fn conditional_bins_random_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let p_empty: f64 = rng.random_range(1e-6..1.0 - 1e-9);
            let p_one = rng.random_range(0.0..1.0) * (1.0 - p_empty);
            if p_one <= 0.0 {
                continue;
            }
            let m = rng.random_range(2..=64);
            let d = conditional_single_photon_bins(p_empty, p_one, m).unwrap();
            let target = 1.0 / f64::from(m);
            let worst = d
                .probabilities
                .iter()
                .map(|p| (p - target).abs())
                .fold(0.0, f64::max);
            assert!(worst < 1e-12, "p_empty {p_empty} p_one {p_one} M {m}: {worst}");
        }
    }
}
