//! Periodic time-of-arrival extraction: the index of the bin holding the first
//! photon of each period becomes a log2(M)-bit symbol.

use rayon::prelude::*;

use crate::entropy::BinningConfig;
use crate::error::{Error, Result};
use crate::stream::{TimestampStream, PS_PER_SECOND, TIMESTAMP_RESOLUTION_PS};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractionResult {
    pub bytes: Vec<u8>,
    pub photons_used: u64,
    pub photons_discarded_same_period: u64,
    pub elapsed_ps: u64,
    /// Bits of the final partial byte that were not emitted (always 0 for M = 256).
    pub trailing_bits_dropped: u32,
    pub bits_per_symbol: u32,
}

impl ExtractionResult {
    pub fn bits_per_second(&self) -> f64 {
        throughput(self)
    }
}

/// Generated bits per second of stream time; 0 for a zero-length stream.
pub fn throughput(result: &ExtractionResult) -> f64 {
    if result.elapsed_ps == 0 {
        return 0.0;
    }
    let bits = result.photons_used as f64 * f64::from(result.bits_per_symbol);
    bits / (result.elapsed_ps as f64 / PS_PER_SECOND)
}

fn check_resolution(cfg: &BinningConfig) -> Result<()> {
    if cfg.bin_width_ps() < TIMESTAMP_RESOLUTION_PS {
        return Err(Error::param(
            "n_bins",
            format!(
                "bin width {} ps is below the {TIMESTAMP_RESOLUTION_PS} ps timestamp resolution",
                cfg.bin_width_ps()
            ),
        ));
    }
    Ok(())
}

#[inline]
fn bin_of(t: u64, cfg: &BinningConfig) -> u32 {
    ((t % cfg.period_ps()) / cfg.bin_width_ps()) as u32
}

/// Bin index of the first arrival of every occupied period, in time order.
pub fn extract_symbols(stream: &TimestampStream, cfg: &BinningConfig) -> Result<Vec<u32>> {
    check_resolution(cfg)?;
    let ts = stream.timestamps();
    let period = cfg.period_ps();
    // whether an event opens its period depends only on its predecessor
    Ok((0..ts.len())
        .into_par_iter()
        .filter(|&i| i == 0 || ts[i] / period != ts[i - 1] / period)
        .map(|i| bin_of(ts[i], cfg))
        .collect())
}

/// Bin indices from periods containing exactly one arrival.
pub fn single_arrival_symbols(stream: &TimestampStream, cfg: &BinningConfig) -> Result<Vec<u32>> {
    check_resolution(cfg)?;
    let ts = stream.timestamps();
    let period = cfg.period_ps();
    Ok((0..ts.len())
        .into_par_iter()
        .filter(|&i| {
            let p = ts[i] / period;
            (i == 0 || ts[i - 1] / period != p) && ts.get(i + 1).is_none_or(|&next| next / period != p)
        })
        .map(|i| bin_of(ts[i], cfg))
        .collect())
}

/// Packs `bits` low-order bits of each symbol, most significant bit first.
/// Returns the bytes and the number of bits left over in an incomplete byte.
pub fn pack_symbols(symbols: &[u32], bits: u32) -> (Vec<u8>, u32) {
    if bits == 8 {
        return (symbols.iter().map(|&s| s as u8).collect(), 0);
    }
    let mut out = Vec::with_capacity(symbols.len() * bits as usize / 8 + 1);
    let mut acc: u64 = 0;
    let mut filled = 0u32;
    for &s in symbols {
        acc = (acc << bits) | u64::from(s & ((1 << bits) - 1));
        filled += bits;
        while filled >= 8 {
            filled -= 8;
            out.push((acc >> filled) as u8);
        }
        acc &= (1 << filled) - 1;
    }
    (out, filled)
}

pub fn extract(stream: &TimestampStream, cfg: &BinningConfig) -> Result<ExtractionResult> {
    let symbols = extract_symbols(stream, cfg)?;
    let bits = cfg.bits_per_symbol();
    let (bytes, trailing_bits_dropped) = pack_symbols(&symbols, bits);
    let photons_used = symbols.len() as u64;
    Ok(ExtractionResult {
        bytes,
        photons_used,
        photons_discarded_same_period: stream.len() as u64 - photons_used,
        elapsed_ps: stream.duration_ps(),
        trailing_bits_dropped,
        bits_per_symbol: bits,
    })
}
