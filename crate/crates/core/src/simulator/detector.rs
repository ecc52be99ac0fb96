use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::stream::{Origin, TimestampStream, TIMESTAMP_RESOLUTION_PS};

/// FWHM of a Gaussian divided by its standard deviation.
const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949;

/// Single-photon detector and time-tagger imperfections.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorModel {
    dead_time_ps: u64,
    jitter_fwhm_ps: f64,
    dark_rate_per_s: f64,
    efficiency: f64,
}

impl Default for DetectorModel {
    fn default() -> Self {
        Self {
            dead_time_ps: 24_000,
            jitter_fwhm_ps: 350.0,
            dark_rate_per_s: 50.0,
            efficiency: 1.0,
        }
    }
}

impl DetectorModel {
    pub fn new(
        dead_time_ps: u64,
        jitter_fwhm_ps: f64,
        dark_rate_per_s: f64,
        efficiency: f64,
    ) -> Result<Self> {
        Self::default()
            .with_dead_time(dead_time_ps)
            .with_jitter(jitter_fwhm_ps)?
            .with_dark_rate(dark_rate_per_s)?
            .with_efficiency(efficiency)
    }

    /// No dead time, jitter or dark counts.
    pub fn ideal() -> Self {
        Self {
            dead_time_ps: 0,
            jitter_fwhm_ps: 0.0,
            dark_rate_per_s: 0.0,
            efficiency: 1.0,
        }
    }

    pub fn with_dead_time(mut self, dead_time_ps: u64) -> Self {
        self.dead_time_ps = dead_time_ps;
        self
    }

    pub fn with_jitter(mut self, fwhm_ps: f64) -> Result<Self> {
        if !(fwhm_ps.is_finite() && fwhm_ps >= 0.0) {
            return Err(Error::param("jitter_fwhm_ps", format!("must be non-negative, got {fwhm_ps}")));
        }
        self.jitter_fwhm_ps = fwhm_ps;
        Ok(self)
    }

    pub fn with_dark_rate(mut self, rate_per_s: f64) -> Result<Self> {
        if !(rate_per_s.is_finite() && rate_per_s >= 0.0) {
            return Err(Error::param("dark_rate_per_s", format!("must be non-negative, got {rate_per_s}")));
        }
        self.dark_rate_per_s = rate_per_s;
        Ok(self)
    }

    pub fn with_efficiency(mut self, efficiency: f64) -> Result<Self> {
        if !(efficiency > 0.0 && efficiency <= 1.0) {
            return Err(Error::param("efficiency", format!("must lie in (0, 1], got {efficiency}")));
        }
        self.efficiency = efficiency;
        Ok(self)
    }

    pub fn dead_time_ps(&self) -> u64 {
        self.dead_time_ps
    }

    pub fn jitter_fwhm_ps(&self) -> f64 {
        self.jitter_fwhm_ps
    }

    pub fn jitter_sigma_ps(&self) -> f64 {
        self.jitter_fwhm_ps / FWHM_PER_SIGMA
    }

    pub fn dark_rate_per_s(&self) -> f64 {
        self.dark_rate_per_s
    }

    pub fn efficiency(&self) -> f64 {
        self.efficiency
    }

    /// Adds Gaussian jitter, floors onto the tagger grid, drops events outside
    /// `[0, duration_ps]` and sorts.
    pub fn jitter_and_quantize(&self, raw_ps: Vec<f64>, duration_ps: u64, rng: &mut impl Rng) -> Vec<u64> {
        let sigma = self.jitter_sigma_ps();
        let normal = (sigma > 0.0).then(|| Normal::new(0.0, sigma).expect("finite sigma"));
        let limit = duration_ps as f64;
        let mut out: Vec<u64> = raw_ps
            .into_iter()
            .filter_map(|t| {
                let t = match &normal {
                    Some(n) => t + n.sample(rng),
                    None => t,
                };
                (t >= 0.0 && t <= limit).then(|| quantize(t))
            })
            .collect();
        out.sort_unstable();
        out
    }

    /// Drops every event closer than the dead time to the last accepted one.
    /// Coincident events collapse to one, so the output is strictly increasing.
    pub fn apply_dead_time(&self, sorted: &[u64]) -> Vec<u64> {
        let dead = self.dead_time_ps.max(1);
        let mut out = Vec::with_capacity(sorted.len());
        let mut last: Option<u64> = None;
        for &t in sorted {
            if last.is_none_or(|l| t - l >= dead) {
                out.push(t);
                last = Some(t);
            }
        }
        out
    }

    /// Jitter, quantization and dead time applied to an existing stream.
    pub fn apply(&self, stream: &TimestampStream, rng: &mut impl Rng) -> TimestampStream {
        let raw = stream.timestamps().iter().map(|&t| t as f64).collect();
        let quantized = self.jitter_and_quantize(raw, stream.duration_ps(), rng);
        let censored = self.apply_dead_time(&quantized);
        TimestampStream::from_sorted(censored, stream.duration_ps(), Origin::Merged)
    }
}

fn quantize(t_ps: f64) -> u64 {
    let t = t_ps as u64;
    t - t % TIMESTAMP_RESOLUTION_PS
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::substream_rng;

    #[test]
    fn validation() {
        assert!(DetectorModel::new(0, 350.0, 0.0, 1.0).is_ok());
        assert!(DetectorModel::new(0, -1.0, 0.0, 1.0).is_err());
        assert!(DetectorModel::new(0, 350.0, -5.0, 1.0).is_err());
        assert!(DetectorModel::new(0, 350.0, 0.0, 0.0).is_err());
        assert!(DetectorModel::new(0, 350.0, 0.0, 1.01).is_err());
        assert!((DetectorModel::default().jitter_sigma_ps() - 148.63).abs() < 0.01);
    }

    #[test]
    fn dead_time_censoring() {
        let d = DetectorModel::ideal().with_dead_time(10);
        assert_eq!(d.apply_dead_time(&[0, 5, 10, 12, 19, 20, 20, 31]), vec![0, 10, 20, 31]);
        let d0 = DetectorModel::ideal();
        assert_eq!(d0.apply_dead_time(&[3, 3, 4, 4, 4]), vec![3, 4]);
        assert!(d0.apply_dead_time(&[]).is_empty());
    }

    #[test]
    fn quantizes_to_grid_and_clips() {
        let d = DetectorModel::ideal();
        let mut rng = substream_rng(1, 1);
        let out = d.jitter_and_quantize(vec![49.9, 0.0, 74.99, 1000.0, 1000.5], 1000, &mut rng);
        assert_eq!(out, vec![0, 25, 50, 1000]);
    }

    #[test]
    fn jitter_spread() {
        let d = DetectorModel::default().with_dead_time(0);
        let mut rng = substream_rng(2, 3);
        let raw = vec![1.0e6; 100_000];
        let out = d.jitter_and_quantize(raw, 2_000_000, &mut rng);
        let n = out.len() as f64;
        // flooring to 25 ps shifts the mean by half a grid step
        let mean = out.iter().map(|&t| t as f64 + 12.5).sum::<f64>() / n;
        let var = out.iter().map(|&t| (t as f64 + 12.5 - mean).powi(2)).sum::<f64>() / n;
        assert!((mean - 1.0e6).abs() < 3.0);
        let expected_var = d.jitter_sigma_ps().powi(2) + 25.0 * 25.0 / 12.0;
        assert!((var / expected_var - 1.0).abs() < 0.02, "{var} vs {expected_var}");
    }
}
