//! Fits three-level rates to a target g² curve and checks the round trip.

use nvqrng::model::{g2_model, EmitterParams};
use nvqrng::simulator::{calibrate_rates, ctmc_g2};

fn main() -> nvqrng::Result<()> {
    let target = EmitterParams::with_standard_shelving(1, 0.02, 1.4, 1.0)?;
    let rates = calibrate_rates(&target)?;
    println!(
        "excite {:.5}  radiate {:.5}  shelve {:.5}  deshelve {:.5}  (ns^-1)",
        rates.r_excite(),
        rates.r_radiate(),
        rates.r_shelve(),
        rates.r_deshelve()
    );
    println!("emission rate {:.4e} ns^-1", rates.emission_rate());

    let lumped = rates.lumped()?;
    println!(
        "recovered gamma1 {:.6}  gamma2 {:.6}  beta {:.6}",
        lumped.gamma1, lumped.gamma2, lumped.beta
    );

    println!("\n  tau/ns   three-level   target");
    for tau in [0.0, 10.0, 25.0, 50.0, 100.0, 400.0, 2000.0] {
        println!("{tau:>8}   {:.6}      {:.6}", ctmc_g2(&rates, tau)?, g2_model(tau, &target));
    }
    Ok(())
}
