use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::stream::{TimestampStream, TIMESTAMP_RESOLUTION_PS};

/// Largest delay the coincidence counter pairs out to.
pub const MAX_PAIRING_DELAY_NS: f64 = 1000.0;

const EVENTS_PER_CHUNK: usize = 1 << 14;

/// Cross-correlation histogram of two detector streams.
#[derive(Debug, Clone, PartialEq)]
pub struct G2Histogram {
    /// Window centres, ns. Window k covers [(k − ½)Δτ, (k + ½)Δτ).
    pub tau_centers: Vec<f64>,
    pub g2_values: Vec<f64>,
    pub raw_coincidences: Vec<u64>,
    pub window_ns: f64,
    pub total_time_s: f64,
    pub counts_det0: u64,
    pub counts_det1: u64,
}

impl G2Histogram {
    pub fn len(&self) -> usize {
        self.tau_centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau_centers.is_empty()
    }

    /// Largest |τ| window centre.
    pub fn max_tau_ns(&self) -> f64 {
        self.tau_centers.iter().fold(0.0, |m, t| m.max(t.abs()))
    }

    /// Coincidences expected per window for uncorrelated streams.
    pub fn accidental_level(&self) -> f64 {
        let window_s = self.window_ns * 1e-9;
        self.counts_det0 as f64 * self.counts_det1 as f64 * window_s / self.total_time_s
    }

    /// Value of the window containing τ = 0 and its Poisson counting error.
    pub fn zero_delay(&self) -> Option<(f64, f64)> {
        let i = self.tau_centers.iter().position(|t| t.abs() < 0.5 * self.window_ns)?;
        let level = self.accidental_level();
        let sigma = (self.raw_coincidences[i] as f64).max(1.0).sqrt() / level;
        Some((self.g2_values[i], sigma))
    }

    /// Mean of g² over windows with min_abs ≤ |τ| ≤ max_abs.
    pub fn mean_over(&self, min_abs_ns: f64, max_abs_ns: f64) -> Option<f64> {
        let (sum, n) = self
            .tau_centers
            .iter()
            .zip(&self.g2_values)
            .filter(|(t, _)| (min_abs_ns..=max_abs_ns).contains(&t.abs()))
            .fold((0.0, 0usize), |(s, n), (_, g)| (s + g, n + 1));
        (n > 0).then(|| sum / n as f64)
    }

    fn renormalize(&mut self) {
        let level = self.accidental_level();
        self.g2_values = self
            .raw_coincidences
            .iter()
            .map(|&c| if level > 0.0 { c as f64 / level } else { 0.0 })
            .collect();
    }
}

/// Counts every ordered pair (a event, b event) by signed delay t_b − t_a
/// (multi-start multi-stop) and normalizes by the accidental level
/// C₀ C₁ Δτ / T_tot.
pub fn g2_histogram(
    a: &TimestampStream,
    b: &TimestampStream,
    window_ns: f64,
    max_tau_ns: f64,
    total_time_s: f64,
) -> Result<G2Histogram> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput("both detector streams need at least one event".into()));
    }
    let window_ps = (window_ns * 1e3).round();
    if !(window_ps >= TIMESTAMP_RESOLUTION_PS as f64) {
        return Err(Error::param(
            "window_ns",
            format!("window {window_ns} ns is below the {TIMESTAMP_RESOLUTION_PS} ps resolution"),
        ));
    }
    if !(max_tau_ns.is_finite() && max_tau_ns >= 0.0) {
        return Err(Error::param("max_tau_ns", format!("must be non-negative, got {max_tau_ns}")));
    }
    if !(total_time_s.is_finite() && total_time_s > 0.0) {
        return Err(Error::param("total_time_s", format!("must be positive, got {total_time_s}")));
    }
    let w = window_ps as i64;
    let half_windows = (max_tau_ns.min(MAX_PAIRING_DELAY_NS) * 1e3 / window_ps).floor() as i64;
    let n_windows = (2 * half_windows + 1) as usize;
    // delays in [-reach, reach) land in a window
    let reach = (2 * half_windows + 1) * w;

    let ta = a.timestamps();
    let tb = b.timestamps();
    let raw = ta
        .par_chunks(EVENTS_PER_CHUNK)
        .map(|chunk| {
            let mut counts = vec![0u64; n_windows];
            let first = chunk[0] as i64;
            let mut lo = tb.partition_point(|&t| 2 * (t as i64 - first) < -reach);
            for &t0 in chunk {
                let t0 = t0 as i64;
                while lo < tb.len() && 2 * (tb[lo] as i64 - t0) < -reach {
                    lo += 1;
                }
                for &t1 in &tb[lo..] {
                    let twice_delay = 2 * (t1 as i64 - t0);
                    if twice_delay >= reach {
                        break;
                    }
                    let k = (twice_delay + w).div_euclid(2 * w) + half_windows;
                    counts[k as usize] += 1;
                }
            }
            counts
        })
        .reduce(
            || vec![0u64; n_windows],
            |mut x, y| {
                x.iter_mut().zip(y).for_each(|(p, q)| *p += q);
                x
            },
        );

    let mut hist = G2Histogram {
        tau_centers: (-half_windows..=half_windows)
            .map(|k| k as f64 * window_ps * 1e-3)
            .collect(),
        g2_values: Vec::new(),
        raw_coincidences: raw,
        window_ns: window_ps * 1e-3,
        total_time_s,
        counts_det0: a.len() as u64,
        counts_det1: b.len() as u64,
    };
    hist.renormalize();
    Ok(hist)
}

/// How repeated histograms are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AveragingMode {
    /// Mean of the individually normalized g² curves.
    #[default]
    NormalizedEqualWeight,
    /// Raw coincidences, singles and times summed, then normalized once.
    PooledCounts,
}

pub fn average_histograms(hists: &[G2Histogram], mode: AveragingMode) -> Result<G2Histogram> {
    let first = hists
        .first()
        .ok_or_else(|| Error::EmptyInput("no histograms to average".into()))?;
    if hists
        .iter()
        .any(|h| h.tau_centers != first.tau_centers || h.window_ns != first.window_ns)
    {
        return Err(Error::param("hists", "histograms have different delay grids"));
    }
    let mut out = first.clone();
    out.raw_coincidences = (0..first.len())
        .map(|i| hists.iter().map(|h| h.raw_coincidences[i]).sum())
        .collect();
    out.counts_det0 = hists.iter().map(|h| h.counts_det0).sum();
    out.counts_det1 = hists.iter().map(|h| h.counts_det1).sum();
    out.total_time_s = hists.iter().map(|h| h.total_time_s).sum();
    match mode {
        AveragingMode::PooledCounts => out.renormalize(),
        AveragingMode::NormalizedEqualWeight => {
            let n = hists.len() as f64;
            out.g2_values = (0..first.len())
                .map(|i| hists.iter().map(|h| h.g2_values[i]).sum::<f64>() / n)
                .collect();
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::Origin;

    fn stream(ts: Vec<u64>, duration: u64) -> TimestampStream {
        TimestampStream::new(ts, duration, Origin::Merged).unwrap()
    }

    fn brute_force(a: &[u64], b: &[u64], w: i64, half: i64) -> Vec<u64> {
        let mut counts = vec![0u64; (2 * half + 1) as usize];
        for &x in a {
            for &y in b {
                let d = y as i64 - x as i64;
                let k = (2 * d + w).div_euclid(2 * w);
                if k.abs() <= half {
                    counts[(k + half) as usize] += 1;
                }
            }
        }
        counts
    }

    #[test]
    fn matches_brute_force_pairing() {
        use rand::Rng;
        let mut rng = crate::simulator::substream_rng(11, 0);
        let mut a: Vec<u64> = (0..3000).map(|_| rng.random_range(0..2_000_000u64) / 25 * 25).collect();
        let mut b: Vec<u64> = (0..3000).map(|_| rng.random_range(0..2_000_000u64) / 25 * 25).collect();
        a.sort_unstable();
        b.sort_unstable();
        let h = g2_histogram(&stream(a.clone(), 2_000_000), &stream(b.clone(), 2_000_000), 1.0, 40.0, 2e-6)
            .unwrap();
        assert_eq!(h.raw_coincidences, brute_force(&a, &b, 1000, 40));
        assert_eq!(h.len(), 81);
        assert_eq!(h.tau_centers[40], 0.0);
    }

    #[test]
    fn shifted_copy_spikes_at_shift() {
        let a: Vec<u64> = (0..1000).map(|i| i * 100_000).collect();
        let b: Vec<u64> = a.iter().map(|t| t + 7_000).collect();
        let h = g2_histogram(&stream(a, 100_007_000), &stream(b, 100_007_000), 1.0, 20.0, 1e-4).unwrap();
        let peak = h.raw_coincidences.iter().enumerate().max_by_key(|(_, c)| **c).unwrap().0;
        assert_eq!(h.tau_centers[peak], 7.0);
        assert_eq!(h.raw_coincidences[peak], 1000);
        assert_eq!(h.raw_coincidences.iter().sum::<u64>(), 1000);
    }

    #[test]
    fn window_edges_half_open() {
        // delays of exactly -500 ps and +500 ps fall in windows 0 and +1
        let h = g2_histogram(&stream(vec![10_000], 20_000), &stream(vec![9_500, 10_500], 20_000), 1.0, 2.0, 1.0)
            .unwrap();
        assert_eq!(h.raw_coincidences, vec![0, 0, 1, 1, 0]);
    }

    #[test]
    fn rejects_bad_input() {
        let s = stream(vec![1, 2], 10);
        let e = TimestampStream::empty(10, Origin::Merged);
        assert!(matches!(g2_histogram(&s, &e, 1.0, 10.0, 1.0), Err(Error::EmptyInput(_))));
        assert!(g2_histogram(&s, &s, 0.01, 10.0, 1.0).is_err());
        assert!(g2_histogram(&s, &s, 1.0, 10.0, 0.0).is_err());
    }

    #[test]
    fn averaging_modes() {
        let s = stream((0..100).map(|i| i * 1000).collect(), 100_000);
        let h1 = g2_histogram(&s, &s, 1.0, 3.0, 1e-7).unwrap();
        let h2 = g2_histogram(&s, &s, 1.0, 3.0, 2e-7).unwrap();
        let eq = average_histograms(&[h1.clone(), h2.clone()], AveragingMode::NormalizedEqualWeight).unwrap();
        let pooled = average_histograms(&[h1.clone(), h2.clone()], AveragingMode::PooledCounts).unwrap();
        for i in 0..h1.len() {
            assert!((eq.g2_values[i] - 0.5 * (h1.g2_values[i] + h2.g2_values[i])).abs() < 1e-12);
            let expect = 2.0 * h1.raw_coincidences[i] as f64 * 3e-7 / (200.0 * 200.0 * 1e-9);
            assert!((pooled.g2_values[i] - expect).abs() < 1e-9 * expect.max(1.0));
        }
        assert!(average_histograms(&[], AveragingMode::PooledCounts).is_err());
    }
}
