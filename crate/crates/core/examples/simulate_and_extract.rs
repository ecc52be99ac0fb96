//! Simulates a detected stream for one region and turns it into bytes.
//!
//! `cargo run --release --example simulate_and_extract -- 4 0.5`
//! (region, seconds).

use nvqrng::extractor::extract;
use nvqrng::regions::Region;
use nvqrng::simulator::{simulate_region, SourcePlan};
use nvqrng::{BinningConfig, DetectorModel};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let region: Region = args.next().as_deref().unwrap_or("4").parse()?;
    let seconds: f64 = args.next().as_deref().unwrap_or("0.5").parse()?;
    let duration_ps = (seconds * 1e12) as u64;

    let detector = DetectorModel::default();
    let plan = SourcePlan::new(&region.params(), &region.flux(), &detector)?;
    println!(
        "{region}: keep probability {:.3e}, background {:.1} counts/s, expected {:.0} counts/s",
        plan.keep_probability,
        plan.background_rate * 1e9,
        plan.expected_rate_per_s()
    );

    let stream = simulate_region(&region.params(), &region.flux(), &detector, duration_ps, 2024)?;
    println!(
        "{} events over {seconds} s ({:.0} counts/s after dead time)",
        stream.len(),
        stream.rate_per_s()
    );

    let out = extract(&stream, &BinningConfig::default())?;
    println!(
        "{} bytes, {} photons dropped as second arrivals in a period, {:.4} Mbit/s",
        out.bytes.len(),
        out.photons_discarded_same_period,
        out.bits_per_second() * 1e-6
    );
    let preview: Vec<String> = out.bytes.iter().take(16).map(|b| format!("{b:02x}")).collect();
    println!("first bytes: {}", preview.join(" "));
    Ok(())
}
