//! Statistical scoring of generated bytes: bit frequencies, lagged bit
//! correlations and the five ENT statistics.

use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::io::KeyValues;

/// π estimation consumes bytes in groups of this size.
pub const PI_GROUP_BYTES: usize = 6;

const CHUNK_BYTES: usize = PI_GROUP_BYTES << 16;

/// Relative frequencies (f0, f1) of zero and one bits.
pub fn relative_frequency(bytes: &[u8]) -> Result<(f64, f64)> {
    if bytes.is_empty() {
        return Err(Error::EmptyInput("no bits to count".into()));
    }
    let ones: u64 = bytes.par_iter().map(|b| u64::from(b.count_ones())).sum();
    let n = bytes.len() as f64 * 8.0;
    let f1 = ones as f64 / n;
    Ok((1.0 - f1, f1))
}

/// Pearson coefficients of the bit sequence against itself delayed by 1..=K bits.
#[derive(Debug, Clone, PartialEq)]
pub struct LagCorrelations {
    /// Entry d − 1 holds the coefficient at lag d.
    pub coefficients: Vec<f64>,
    pub n_bits: u64,
    /// Set when some lag had a constant operand; its coefficient is reported as 1.
    pub degenerate: bool,
}

impl LagCorrelations {
    pub fn at_lag(&self, lag: usize) -> Option<f64> {
        lag.checked_sub(1).and_then(|i| self.coefficients.get(i)).copied()
    }

    pub fn max_abs(&self) -> f64 {
        self.coefficients.iter().fold(0.0, |m, r| m.max(r.abs()))
    }
}

/// Bits packed MSB-first into big-endian words, zero padded.
fn bit_words(bytes: &[u8]) -> Vec<u64> {
    bytes
        .chunks(8)
        .map(|c| {
            let mut w = [0u8; 8];
            w[..c.len()].copy_from_slice(c);
            u64::from_be_bytes(w)
        })
        .collect()
}

fn bit_at(bytes: &[u8], i: u64) -> u64 {
    u64::from(bytes[(i / 8) as usize] >> (7 - i % 8) & 1)
}

/// Σ b_i b_{i+lag} over i < m, with m = n − lag.
fn lagged_overlap(words: &[u64], n_bits: u64, lag: u64) -> u64 {
    let m = n_bits - lag;
    let full = (m / 64) as usize;
    let rem = m % 64;
    let word_offset = (lag / 64) as usize;
    let shift = lag % 64;
    let shifted = |w: usize| -> u64 {
        let hi = words.get(w + word_offset).copied().unwrap_or(0);
        if shift == 0 {
            hi
        } else {
            let lo = words.get(w + word_offset + 1).copied().unwrap_or(0);
            (hi << shift) | (lo >> (64 - shift))
        }
    };
    let body: u64 = (0..full)
        .into_par_iter()
        .map(|w| u64::from((words[w] & shifted(w)).count_ones()))
        .sum();
    let tail = if rem > 0 {
        let mask = !0u64 << (64 - rem);
        u64::from((words[full] & shifted(full) & mask).count_ones())
    } else {
        0
    };
    body + tail
}

fn pearson_from_sums(m: u64, sx: u64, sy: u64, sxx: u64, syy: u64, sxy: u64) -> Option<f64> {
    let m = i128::from(m);
    let cov = m * i128::from(sxy) - i128::from(sx) * i128::from(sy);
    let vx = m * i128::from(sxx) - i128::from(sx) * i128::from(sx);
    let vy = m * i128::from(syy) - i128::from(sy) * i128::from(sy);
    if vx == 0 || vy == 0 {
        return None;
    }
    Some((cov as f64 / ((vx as f64).sqrt() * (vy as f64).sqrt())).clamp(-1.0, 1.0))
}

pub fn pearson_lag(bytes: &[u8], max_lag: usize) -> Result<LagCorrelations> {
    let n_bits = bytes.len() as u64 * 8;
    if max_lag == 0 || n_bits <= max_lag as u64 {
        return Err(Error::param(
            "max_lag",
            format!("need 1 <= max_lag < bit count, got {max_lag} with {n_bits} bits"),
        ));
    }
    let words = bit_words(bytes);
    let total: u64 = words.par_iter().map(|w| u64::from(w.count_ones())).sum();
    let mut degenerate = false;
    let coefficients = (1..=max_lag as u64)
        .map(|lag| {
            let head: u64 = (0..lag).map(|i| bit_at(bytes, i)).sum();
            let tail: u64 = (n_bits - lag..n_bits).map(|i| bit_at(bytes, i)).sum();
            // bits are 0/1, so sums of squares equal plain sums
            let sx = total - tail;
            let sy = total - head;
            let sxy = lagged_overlap(&words, n_bits, lag);
            pearson_from_sums(n_bits - lag, sx, sy, sx, sy, sxy).unwrap_or_else(|| {
                degenerate = true;
                1.0
            })
        })
        .collect();
    Ok(LagCorrelations {
        coefficients,
        n_bits,
        degenerate,
    })
}

/// The χ² CDF at `statistic`, in percent.
pub fn chi2_percentile(statistic: f64, dof: u32) -> Result<f64> {
    if !(statistic >= 0.0) || dof == 0 {
        return Err(Error::Domain(format!(
            "need statistic >= 0 and dof >= 1, got {statistic} and {dof}"
        )));
    }
    let dist = ChiSquared::new(f64::from(dof)).map_err(|e| Error::Domain(e.to_string()))?;
    Ok(100.0 * dist.cdf(statistic))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntReport {
    pub n_bytes: u64,
    /// Bits per byte.
    pub entropy_per_byte: f64,
    /// Against a uniform distribution over 256 values (255 degrees of freedom).
    pub chi2_statistic: f64,
    pub chi2_percentile: f64,
    pub arithmetic_mean: f64,
    pub monte_carlo_pi: f64,
    pub serial_correlation: f64,
    pub serial_degenerate: bool,
}

impl EntReport {
    pub fn pi_error(&self) -> f64 {
        self.monte_carlo_pi - std::f64::consts::PI
    }
}

#[derive(Debug, Clone, Copy)]
struct Partial {
    counts: [u64; 256],
    inside: u64,
    groups: u64,
    // consecutive-byte pair sums, pairs (i, i + 1) with i in this chunk
    pairs: u64,
    sx: u64,
    sy: u64,
    sxx: u64,
    syy: u64,
    sxy: u64,
}

impl Partial {
    fn zero() -> Self {
        Self {
            counts: [0; 256],
            inside: 0,
            groups: 0,
            pairs: 0,
            sx: 0,
            sy: 0,
            sxx: 0,
            syy: 0,
            sxy: 0,
        }
    }

    fn merge(mut self, o: Self) -> Self {
        self.counts.iter_mut().zip(o.counts).for_each(|(a, b)| *a += b);
        self.inside += o.inside;
        self.groups += o.groups;
        self.pairs += o.pairs;
        self.sx += o.sx;
        self.sy += o.sy;
        self.sxx += o.sxx;
        self.syy += o.syy;
        self.sxy += o.sxy;
        self
    }
}

fn in_circle(group: &[u8]) -> bool {
    const RADIUS: u64 = (1 << 24) - 1;
    let x = u64::from(group[0]) << 16 | u64::from(group[1]) << 8 | u64::from(group[2]);
    let y = u64::from(group[3]) << 16 | u64::from(group[4]) << 8 | u64::from(group[5]);
    x * x + y * y <= RADIUS * RADIUS
}

fn accumulate(bytes: &[u8], start: usize, len: usize) -> Partial {
    let mut p = Partial::zero();
    let chunk = &bytes[start..start + len];
    for &b in chunk {
        p.counts[b as usize] += 1;
    }
    // chunk starts are multiples of the group size, so groups never straddle chunks
    for g in chunk.chunks_exact(PI_GROUP_BYTES) {
        p.groups += 1;
        p.inside += u64::from(in_circle(g));
    }
    let end = (start + len).min(bytes.len() - 1);
    for i in start..end {
        let (x, y) = (u64::from(bytes[i]), u64::from(bytes[i + 1]));
        p.pairs += 1;
        p.sx += x;
        p.sy += y;
        p.sxx += x * x;
        p.syy += y * y;
        p.sxy += x * y;
    }
    p
}

pub fn ent_report(bytes: &[u8]) -> Result<EntReport> {
    if bytes.len() < PI_GROUP_BYTES {
        return Err(Error::EmptyInput(format!(
            "ENT statistics need at least {PI_GROUP_BYTES} bytes, got {}",
            bytes.len()
        )));
    }
    let starts: Vec<usize> = (0..bytes.len()).step_by(CHUNK_BYTES).collect();
    let p = starts
        .par_iter()
        .map(|&s| accumulate(bytes, s, CHUNK_BYTES.min(bytes.len() - s)))
        .reduce(Partial::zero, Partial::merge);

    let n = bytes.len() as f64;
    let expected = n / 256.0;
    let mut entropy = 0.0;
    let mut chi2 = 0.0;
    let mut sum = 0u64;
    for (v, &c) in p.counts.iter().enumerate() {
        if c > 0 {
            let f = c as f64 / n;
            entropy -= f * f.log2();
        }
        let d = c as f64 - expected;
        chi2 += d * d / expected;
        sum += v as u64 * c;
    }
    let serial = pearson_from_sums(p.pairs, p.sx, p.sy, p.sxx, p.syy, p.sxy);
    Ok(EntReport {
        n_bytes: bytes.len() as u64,
        entropy_per_byte: entropy.max(0.0),
        chi2_statistic: chi2,
        chi2_percentile: chi2_percentile(chi2, 255)?,
        arithmetic_mean: sum as f64 / n,
        monte_carlo_pi: 4.0 * p.inside as f64 / p.groups as f64,
        serial_correlation: serial.unwrap_or(1.0),
        serial_degenerate: serial.is_none(),
    })
}

/// Bit frequencies, lagged bit correlations and ENT statistics of one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct QualityReport {
    pub f0: f64,
    pub f1: f64,
    pub lags: LagCorrelations,
    pub ent: EntReport,
}

pub const DEFAULT_MAX_LAG: usize = 15;

pub fn quality_report(bytes: &[u8], max_lag: usize) -> Result<QualityReport> {
    let (f0, f1) = relative_frequency(bytes)?;
    Ok(QualityReport {
        f0,
        f1,
        lags: pearson_lag(bytes, max_lag)?,
        ent: ent_report(bytes)?,
    })
}

impl QualityReport {
    pub fn to_key_values(&self) -> KeyValues {
        let e = &self.ent;
        let mut kv = KeyValues::new();
        kv.push("bytes", e.n_bytes)
            .push("frequency_zero", format!("{:.6}", self.f0))
            .push("frequency_one", format!("{:.6}", self.f1))
            .push("entropy_per_byte", format!("{:.6}", e.entropy_per_byte))
            .push("chi2_statistic", format!("{:.2}", e.chi2_statistic))
            .push("chi2_percentile", format!("{:.2}", e.chi2_percentile))
            .push("arithmetic_mean", format!("{:.4}", e.arithmetic_mean))
            .push("monte_carlo_pi", format!("{:.8}", e.monte_carlo_pi))
            .push("serial_correlation", format!("{:.6}", e.serial_correlation))
            .push("serial_degenerate", e.serial_degenerate);
        for (i, r) in self.lags.coefficients.iter().enumerate() {
            kv.push(&format!("pearson_lag_{}", i + 1), format!("{r:.6}"));
        }
        kv.push("pearson_degenerate", self.lags.degenerate);
        kv
    }

    pub const TSV_HEADER: &'static str =
        "entropy_per_byte\tchi2_percentile\tarithmetic_mean\tmonte_carlo_pi\tserial_correlation";

    /// ENT statistics as one tab-separated row, in the usual ENT table order.
    pub fn tsv_row(&self) -> String {
        let e = &self.ent;
        format!(
            "{:.6}\t{:.2}\t{:.3}\t{:.8}\t{:.6}",
            e.entropy_per_byte, e.chi2_percentile, e.arithmetic_mean, e.monte_carlo_pi, e.serial_correlation
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{seq::SliceRandom, RngCore};

    fn random_bytes(n: usize, seed: u64) -> Vec<u8> {
        let mut v = vec![0u8; n];
        crate::simulator::substream_rng(seed, 0).fill_bytes(&mut v);
        v
    }

    fn naive_pearson(x: &[f64], y: &[f64]) -> f64 {
        let m = x.len() as f64;
        let mx = x.iter().sum::<f64>() / m;
        let my = y.iter().sum::<f64>() / m;
        let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
        let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
        cov / (vx * vy).sqrt()
    }

    #[test]
    fn frequencies() {
        assert_eq!(relative_frequency(&[0u8; 10]).unwrap(), (1.0, 0.0));
        assert_eq!(relative_frequency(&[0xAA; 10]).unwrap(), (0.5, 0.5));
        assert!(relative_frequency(&[]).is_err());
    }

    #[test]
    fn periodic_bits() {
        let r = pearson_lag(&[0x55; 64], 3).unwrap();
        assert!((r.at_lag(1).unwrap() + 1.0).abs() < 1e-12);
        assert!((r.at_lag(2).unwrap() - 1.0).abs() < 1e-12);
        assert!(!r.degenerate);
        let d = pearson_lag(&[0u8; 8], 2).unwrap();
        assert!(d.degenerate);
        assert_eq!(d.coefficients, vec![1.0, 1.0]);
        assert!(pearson_lag(&[1], 8).is_err());
    }

    #[test]
    fn lags_match_naive_evaluation() {
        let bytes = random_bytes(1003, 3);
        let bits: Vec<f64> = (0..bytes.len() as u64 * 8).map(|i| bit_at(&bytes, i) as f64).collect();
        let r = pearson_lag(&bytes, 70).unwrap();
        for lag in 1..=70usize {
            let expect = naive_pearson(&bits[..bits.len() - lag], &bits[lag..]);
            assert!((r.at_lag(lag).unwrap() - expect).abs() < 1e-12, "lag {lag}");
        }
    }

    #[test]
    fn exact_uniform_sample() {
        let bytes: Vec<u8> = (0..2560).map(|i| (i % 256) as u8).collect();
        let r = ent_report(&bytes).unwrap();
        assert!((r.entropy_per_byte - 8.0).abs() < 1e-12);
        assert_eq!(r.chi2_statistic, 0.0);
        assert_eq!(r.chi2_percentile, 0.0);
        assert!((r.arithmetic_mean - 127.5).abs() < 1e-12);
    }

    #[test]
    fn constant_sample() {
        let r = ent_report(&[0u8; 600]).unwrap();
        assert_eq!(r.entropy_per_byte, 0.0);
        assert_eq!(r.arithmetic_mean, 0.0);
        assert_eq!(r.serial_correlation, 1.0);
        assert!(r.serial_degenerate);
        assert_eq!(r.monte_carlo_pi, 4.0);
        assert!(ent_report(&[1, 2, 3, 4, 5]).is_err());
    }

    #[test]
    fn pi_and_serial_match_naive() {
        let bytes = random_bytes(CHUNK_BYTES * 2 + 1001, 8);
        let r = ent_report(&bytes).unwrap();
        let groups: Vec<&[u8]> = bytes.chunks_exact(6).collect();
        let inside = groups.iter().filter(|g| in_circle(g)).count();
        assert_eq!(r.monte_carlo_pi, 4.0 * inside as f64 / groups.len() as f64);
        let x: Vec<f64> = bytes.iter().map(|&b| f64::from(b)).collect();
        let expect = naive_pearson(&x[..x.len() - 1], &x[1..]);
        assert!((r.serial_correlation - expect).abs() < 1e-12);
        assert!(!r.serial_degenerate);
    }

    #[test]
    fn order_sensitivity() {
        let mut bytes = random_bytes(60_000, 1);
        bytes[..30_000].sort_unstable();
        let sorted = ent_report(&bytes).unwrap();
        let mut rng = crate::simulator::substream_rng(2, 0);
        bytes.shuffle(&mut rng);
        let shuffled = ent_report(&bytes).unwrap();
        assert!((sorted.entropy_per_byte - shuffled.entropy_per_byte).abs() < 1e-12);
        assert_eq!(sorted.chi2_statistic, shuffled.chi2_statistic);
        assert!(sorted.serial_correlation > 0.3);
        assert!(shuffled.serial_correlation.abs() < 0.05);
        assert_ne!(sorted.monte_carlo_pi, shuffled.monte_carlo_pi);
    }

    #[test]
    fn chi2_percentiles() {
        assert_eq!(chi2_percentile(0.0, 255).unwrap(), 0.0);
        assert!((chi2_percentile(2.0 * std::f64::consts::LN_2, 2).unwrap() - 50.0).abs() < 1e-9);
        // dof = 2 is exponential: CDF = 1 − e^{−x/2}
        for x in [0.1, 1.0, 5.0, 20.0] {
            let expect = 100.0 * -(-x / 2.0_f64).exp_m1();
            assert!((chi2_percentile(x, 2).unwrap() - expect).abs() < 1e-8);
        }
        // the median of chi2(255) sits at about 254.3, so the CDF at the mean is above 50%
        assert!((chi2_percentile(255.0, 255).unwrap() - 51.177_747_82).abs() < 1e-6);
        assert!(chi2_percentile(400.0, 255).unwrap() > 99.99);
        assert!(chi2_percentile(-1.0, 3).is_err());
    }

    #[test]
    fn entropy_deficit_scale() {
        let n = 20_000;
        let expected = 255.0 / (2.0 * n as f64 * std::f64::consts::LN_2);
        let mean_deficit = (0..100)
            .map(|s| 8.0 - ent_report(&random_bytes(n, 100 + s)).unwrap().entropy_per_byte)
            .sum::<f64>()
            / 100.0;
        assert!(mean_deficit < 5.0 * expected && mean_deficit > expected / 5.0);
    }
}
