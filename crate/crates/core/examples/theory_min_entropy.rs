//! Min-entropy per detected symbol for the five region presets, and how it
//! moves with the flux and the number of bins.

use nvqrng::entropy::{min_entropy, min_entropy_coherent, BinningConfig};
use nvqrng::model::FluxSpec;
use nvqrng::regions::Region;

fn main() -> nvqrng::Result<()> {
    let cfg = BinningConfig::default();
    println!("region  N    H_min      reference  coherent");
    for region in Region::ALL {
        let params = region.params();
        let flux = region.flux();
        let h = min_entropy(&params, &flux, &cfg)?;
        let coherent = min_entropy_coherent(flux.per_ns() * f64::from(params.n_emitters()), &cfg)?;
        println!(
            "{:>6}  {:<3}  {h:.7}  {:.6}   {coherent:.7}",
            region.index(),
            params.n_emitters(),
            region.reference_min_entropy(),
        );
    }

    let params = Region::R4.params();
    println!("\nregion 4, varying the per-emitter flux");
    for lambda_per_s in [1e4, 1e5, 1e6, 1e7] {
        let flux = FluxSpec::new(lambda_per_s * 1e-9, &params)?;
        println!("  {lambda_per_s:>8.0e} /s  H_min = {:.6}", min_entropy(&params, &flux, &cfg)?);
    }

    println!("\nregion 4, varying the bin count at T = 12.8 ns");
    for bins in [16, 64, 256, 512] {
        let cfg = BinningConfig::new(12_800, bins)?;
        println!("  M = {bins:<4} H_min = {:.6}", min_entropy(&params, &Region::R4.flux(), &cfg)?);
    }
    Ok(())
}
