//! Periods holding exactly one photon give uniform bin indices even when the
//! light itself is strongly bunched.

use nvqrng::entropy::conditional_single_photon_bins;
use nvqrng::extractor::single_arrival_symbols;
use nvqrng::quality::chi2_percentile;
use nvqrng::simulator::simulate_blinking;
use nvqrng::BinningConfig;

fn main() -> nvqrng::Result<()> {
    let dist = conditional_single_photon_bins(0.9, 0.08, 16)?;
    println!("analytic bin probabilities: {:?}", &dist.probabilities[..4]);

    // on/off switching every ~10 µs, 2·10⁸ counts/s while on
    let stream = simulate_blinking(2e8, 1e7, 1e7, 100_000_000_000, 1)?;
    let cfg = BinningConfig::new(12_800, 16)?;
    let symbols = single_arrival_symbols(&stream, &cfg)?;
    let mut counts = [0u64; 16];
    for &s in &symbols {
        counts[s as usize] += 1;
    }
    let expected = symbols.len() as f64 / 16.0;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    println!("{} events, {} single-arrival periods", stream.len(), symbols.len());
    println!("counts per bin: {counts:?}");
    println!("chi2 = {chi2:.2} on 15 dof, percentile {:.1}", chi2_percentile(chi2, 15)?);
    Ok(())
}
