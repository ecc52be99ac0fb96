//! Beamsplitter simulation, coincidence histograms and model fitting.

mod fit;
mod histogram;

pub use fit::{fit_g2, shelving_model, FitResult, DEFAULT_MAX_EMITTERS, FIT_RANGE_NS};
pub use histogram::{average_histograms, g2_histogram, AveragingMode, G2Histogram, MAX_PAIRING_DELAY_NS};

use rand::Rng;

use crate::error::{Error, Result};
use crate::simulator::substream_rng;
use crate::stream::TimestampStream;

/// Routes each event to one of two outputs with probability ½.
pub fn hbt_split(stream: &TimestampStream, seed: u64) -> (TimestampStream, TimestampStream) {
    let mut rng = substream_rng(seed, 0);
    let mut a = Vec::with_capacity(stream.len() / 2 + 1);
    let mut b = Vec::with_capacity(stream.len() / 2 + 1);
    for &t in stream.timestamps() {
        if rng.random::<bool>() {
            a.push(t);
        } else {
            b.push(t);
        }
    }
    let d = stream.duration_ps();
    let o = stream.origin();
    (
        TimestampStream::from_sorted(a, d, o),
        TimestampStream::from_sorted(b, d, o),
    )
}

/// Signal fraction S / (S + B) from the total and background rates.
pub fn estimate_rho(signal_plus_bg_rate: f64, bg_rate: f64) -> Result<f64> {
    if !(signal_plus_bg_rate > 0.0) || !(bg_rate >= 0.0) {
        return Err(Error::Domain(format!(
            "rates must satisfy total > 0 and background >= 0, got {signal_plus_bg_rate} and {bg_rate}"
        )));
    }
    if bg_rate > signal_plus_bg_rate {
        return Err(Error::Domain(format!(
            "background rate {bg_rate} exceeds total rate {signal_plus_bg_rate}"
        )));
    }
    Ok((signal_plus_bg_rate - bg_rate) / signal_plus_bg_rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::simulate_poisson;

    #[test]
    fn split_partitions_stream() {
        let s = simulate_poisson(1e6, 1_000_000_000_000, 4).unwrap();
        let (a, b) = hbt_split(&s, 9);
        assert_eq!(a.len() + b.len(), s.len());
        let mut union: Vec<u64> = a.timestamps().iter().chain(b.timestamps()).copied().collect();
        union.sort_unstable();
        assert_eq!(union, s.timestamps());
        let n = s.len() as f64;
        assert!((a.len() as f64 - n / 2.0).abs() < 5.0 * (n / 4.0).sqrt());
        assert_eq!(hbt_split(&s, 9), (a, b));
    }

    #[test]
    fn rho_from_rates() {
        assert_eq!(estimate_rho(100.0, 0.0).unwrap(), 1.0);
        assert_eq!(estimate_rho(100.0, 50.0).unwrap(), 0.5);
        assert!(estimate_rho(100.0, 101.0).is_err());
        assert!(estimate_rho(0.0, 0.0).is_err());
        // Region 4: 17 emitters at 21.2 kcounts/s each
        let signal = 17.0 * 21_200.0;
        let total = signal / 0.99708;
        assert!((estimate_rho(total, total - signal).unwrap() - 0.99708).abs() < 1e-12);
    }
}
