//! Writes and reads back each on-disk format.

use nvqrng::estimator::{g2_histogram, hbt_split};
use nvqrng::extractor::extract;
use nvqrng::io::{
    read_bit_meta, read_bits, read_histogram, read_timestamps, write_bits, write_histogram, write_timestamps,
    BitFileMeta,
};
use nvqrng::regions::Region;
use nvqrng::simulator::simulate_region;
use nvqrng::{BinningConfig, DetectorModel};

fn main() -> nvqrng::Result<()> {
    let dir = std::env::temp_dir().join("nvqrng-formats");
    std::fs::create_dir_all(&dir).map_err(|e| nvqrng::Error::Io { path: dir.clone(), source: e })?;
    let region = Region::R2;
    let stream = simulate_region(&region.params(), &region.flux(), &DetectorModel::default(), 100_000_000_000, 5)?;

    let ts_path = dir.join("r2.ts");
    write_timestamps(&ts_path, &stream)?;
    let back = read_timestamps(&ts_path)?;
    println!("{}: {} timestamps, identical = {}", ts_path.display(), back.len(), back == stream);

    let cfg = BinningConfig::default();
    let out = extract(&stream, &cfg)?;
    let bin_path = dir.join("r2.bin");
    write_bits(&bin_path, &out.bytes, &BitFileMeta::new(&out, &cfg, "example"))?;
    let meta = read_bit_meta(&bin_path)?;
    println!(
        "{}: {} bytes, {} photons used over {} ps",
        bin_path.display(),
        read_bits(&bin_path)?.len(),
        meta.photons_used,
        meta.duration_ps
    );

    let (a, b) = hbt_split(&stream, 6);
    let hist = g2_histogram(&a, &b, 2.0, 100.0, stream.duration_s())?;
    let csv_path = dir.join("r2_g2.csv");
    write_histogram(&csv_path, &hist)?;
    println!("{}: {} windows", csv_path.display(), read_histogram(&csv_path)?.len());
    Ok(())
}
