//! Runs the byte-level statistics on simulated output and on a deliberately
//! biased buffer.

use nvqrng::extractor::extract;
use nvqrng::quality::{quality_report, DEFAULT_MAX_LAG};
use nvqrng::regions::Region;
use nvqrng::reproduce::QualityThresholds;
use nvqrng::simulator::simulate_region;
use nvqrng::{BinningConfig, DetectorModel};

fn main() -> nvqrng::Result<()> {
    let region = Region::R5;
    let stream = simulate_region(&region.params(), &region.flux(), &DetectorModel::default(), 2_000_000_000_000, 9)?;
    let bytes = extract(&stream, &BinningConfig::default())?.bytes;
    report("simulated region 5", &bytes)?;

    // every fourth byte forced to zero
    let biased: Vec<u8> = bytes.iter().enumerate().map(|(i, &b)| if i % 4 == 0 { 0 } else { b }).collect();
    report("biased copy", &biased)
}

fn report(label: &str, bytes: &[u8]) -> nvqrng::Result<()> {
    let q = quality_report(bytes, DEFAULT_MAX_LAG)?;
    println!("{label}: {} bytes", bytes.len());
    for (k, v) in q.to_key_values().entries() {
        println!("  {k} = {v}");
    }
    let failed: Vec<&str> = QualityThresholds::for_sample(bytes.len() as u64)
        .evaluate(&q)
        .into_iter()
        .filter(|c| !c.passed)
        .map(|c| c.name)
        .collect();
    println!("  failed checks: {failed:?}\n");
    Ok(())
}
