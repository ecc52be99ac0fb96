//! Detected-photon stream generation.
//!
//! Every random sub-stream draws from its own ChaCha stream, selected by a
//! fixed index under the master seed, so output does not depend on how many
//! worker threads generate it.

mod ctmc;
mod detector;

pub use ctmc::{
    calibrate_rates, calibrate_rates_with_ratio, ctmc_g2, CtmcRates, LumpedParams,
    DEFAULT_EXCITATION_RATIO,
};
pub use detector::DetectorModel;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Exp, Gamma, Geometric};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{EmitterParams, FluxSpec};
use crate::stream::{Origin, TimestampStream, PS_PER_SECOND};

const PS_PER_NS: f64 = 1e3;

/// Deterministic generator for sub-stream `index` under `seed`.
pub fn substream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Level {
    Ground,
    Excited,
    Shelf,
}

/// Exact jump-by-jump simulation of one emitter started in the ground state.
/// Every radiative decay produces a timestamp (rounded to the nearest ps).
pub fn simulate_emitter(rates: &CtmcRates, duration_ps: u64, seed: u64) -> TimestampStream {
    let mut rng = substream_rng(seed, 0);
    let emissions = emitter_jump_times(rates, duration_ps as f64 / PS_PER_NS, &mut rng);
    // rounding can tie neighbours but never reorders them
    let ts: Vec<u64> = emissions
        .into_iter()
        .map(|t_ns| (t_ns * PS_PER_NS).round() as u64)
        .filter(|&t| t <= duration_ps)
        .collect();
    TimestampStream::from_sorted(ts, duration_ps, Origin::Signal)
}

fn emitter_jump_times(rates: &CtmcRates, horizon_ns: f64, rng: &mut impl Rng) -> Vec<f64> {
    let mut out = Vec::new();
    if horizon_ns <= 0.0 {
        return out;
    }
    let leave_excited = rates.r_radiate() + rates.r_shelve();
    let hold_ground = Exp::new(rates.r_excite()).expect("positive rate");
    let hold_excited = Exp::new(leave_excited).expect("positive rate");
    let hold_shelf = Exp::new(rates.r_deshelve()).expect("positive rate");
    let p_radiate = rates.r_radiate() / leave_excited;

    let mut t = 0.0;
    let mut level = Level::Ground;
    loop {
        level = match level {
            Level::Ground => {
                t += hold_ground.sample(rng);
                Level::Excited
            }
            Level::Excited => {
                t += hold_excited.sample(rng);
                if rng.random::<f64>() < p_radiate {
                    if t > horizon_ns {
                        break;
                    }
                    out.push(t);
                    Level::Ground
                } else {
                    Level::Shelf
                }
            }
            Level::Shelf => {
                t += hold_shelf.sample(rng);
                Level::Ground
            }
        };
        if t > horizon_ns {
            break;
        }
    }
    out
}

/// Inter-arrival sampler for the emitter's emissions after independent
/// Bernoulli(`keep`) thinning.
///
/// Emissions form a renewal process, so the gap between kept photons is a sum
/// of whole ground→excited passes: their number J is geometric with success
/// probability `keep · r/(r + s)`, the J − 1 discarded passes each end on the
/// shelf with fixed probability, and holding times in a level add up to Gamma
/// variates. One draw therefore replaces the J passes a jump-by-jump
/// simulation would take, with the same distribution.
#[derive(Debug, Clone)]
pub struct ThinnedEmitter {
    passes: Geometric,
    shelf_fraction: f64,
    r_excite: f64,
    leave_excited: f64,
    r_deshelve: f64,
}

impl ThinnedEmitter {
    pub fn new(rates: &CtmcRates, keep: f64) -> Result<Self> {
        if !(keep > 0.0 && keep <= 1.0) {
            return Err(Error::param(
                "keep",
                format!("thinning probability must lie in (0, 1], got {keep}"),
            ));
        }
        let leave_excited = rates.r_radiate() + rates.r_shelve();
        let radiate = rates.r_radiate() / leave_excited;
        let success = keep * radiate;
        let shelf_fraction = if success >= 1.0 {
            0.0
        } else {
            ((1.0 - radiate) / (1.0 - success)).clamp(0.0, 1.0)
        };
        Ok(Self {
            passes: Geometric::new(success).map_err(|e| Error::Domain(e.to_string()))?,
            shelf_fraction,
            r_excite: rates.r_excite(),
            leave_excited,
            r_deshelve: rates.r_deshelve(),
        })
    }

    /// Time until the next kept photon, ns.
    pub fn sample_gap(&self, rng: &mut impl Rng) -> f64 {
        let passes = self.passes.sample(rng) + 1;
        let shelved = if passes > 1 && self.shelf_fraction > 0.0 {
            Binomial::new(passes - 1, self.shelf_fraction)
                .expect("valid binomial")
                .sample(rng)
        } else {
            0
        };
        gamma_sum(passes, self.r_excite, rng)
            + gamma_sum(passes, self.leave_excited, rng)
            + gamma_sum(shelved, self.r_deshelve, rng)
    }

    /// Kept emission times in ns up to `horizon_ns`, starting from the ground state.
    pub fn arrivals(&self, horizon_ns: f64, rng: &mut impl Rng) -> Vec<f64> {
        let mut out = Vec::new();
        let mut t = self.sample_gap(rng);
        while t <= horizon_ns {
            out.push(t);
            t += self.sample_gap(rng);
        }
        out
    }
}

/// Sum of `count` independent Exp(rate) variates.
fn gamma_sum(count: u64, rate: f64, rng: &mut impl Rng) -> f64 {
    match count {
        0 => 0.0,
        1 => Exp::new(rate).expect("positive rate").sample(rng),
        n => Gamma::new(n as f64, 1.0 / rate).expect("valid gamma").sample(rng),
    }
}

fn poisson_arrivals_ps(rate_per_ps: f64, duration_ps: f64, rng: &mut impl Rng) -> Vec<f64> {
    let mut out = Vec::new();
    if rate_per_ps <= 0.0 {
        return out;
    }
    let gap = Exp::new(rate_per_ps).expect("positive rate");
    let mut t = gap.sample(rng);
    while t <= duration_ps {
        out.push(t);
        t += gap.sample(rng);
    }
    out
}

/// Homogeneous Poisson arrivals (coherent light), rounded to the nearest ps.
pub fn simulate_poisson(rate_per_s: f64, duration_ps: u64, seed: u64) -> Result<TimestampStream> {
    if !(rate_per_s.is_finite() && rate_per_s >= 0.0) {
        return Err(Error::param("rate_per_s", format!("must be non-negative, got {rate_per_s}")));
    }
    let mut rng = substream_rng(seed, 0);
    let ts: Vec<u64> = poisson_arrivals_ps(rate_per_s / PS_PER_SECOND, duration_ps as f64, &mut rng)
        .into_iter()
        .map(|t| t.round() as u64)
        .filter(|&t| t <= duration_ps)
        .collect();
    Ok(TimestampStream::from_sorted(ts, duration_ps, Origin::Signal))
}

/// Poisson light switched on and off by a two-state telegraph process with
/// exponential dwell times: a strongly bunched stationary source
/// (g²(0) = 1 + off/on dwell ratio). Starts in its stationary state.
pub fn simulate_blinking(
    on_rate_per_s: f64,
    mean_on_ps: f64,
    mean_off_ps: f64,
    duration_ps: u64,
    seed: u64,
) -> Result<TimestampStream> {
    if !(on_rate_per_s.is_finite() && on_rate_per_s > 0.0) {
        return Err(Error::param("on_rate_per_s", format!("must be positive, got {on_rate_per_s}")));
    }
    if !(mean_on_ps > 0.0 && mean_off_ps > 0.0) {
        return Err(Error::param("mean_on_ps", "dwell times must be positive"));
    }
    let mut rng = substream_rng(seed, 0);
    let on_dwell = Exp::new(1.0 / mean_on_ps).expect("positive rate");
    let off_dwell = Exp::new(1.0 / mean_off_ps).expect("positive rate");
    let gap = Exp::new(on_rate_per_s / PS_PER_SECOND).expect("positive rate");
    let end = duration_ps as f64;
    let mut on = rng.random::<f64>() < mean_on_ps / (mean_on_ps + mean_off_ps);
    let mut t = 0.0;
    let mut out = Vec::new();
    while t < end {
        let switch = t + if on { on_dwell.sample(&mut rng) } else { off_dwell.sample(&mut rng) };
        if on {
            // memorylessness lets each on-interval restart the arrival clock
            let mut a = t + gap.sample(&mut rng);
            while a < switch.min(end) {
                out.push(a.round() as u64);
                a += gap.sample(&mut rng);
            }
        }
        t = switch;
        on = !on;
    }
    out.retain(|&x| x <= duration_ps);
    Ok(TimestampStream::from_sorted(out, duration_ps, Origin::Signal))
}

/// Resolved event rates of a simulated region.
#[derive(Debug, Clone, Copy)]
pub struct SourcePlan {
    pub params: EmitterParams,
    pub rates: CtmcRates,
    pub detector: DetectorModel,
    /// Probability that an emission reaches the output.
    pub keep_probability: f64,
    /// Detected signal rate per emitter, ns⁻¹.
    pub signal_per_emitter: f64,
    /// Background rate, ns⁻¹, chosen so signal / (signal + background) = ρ.
    pub background_rate: f64,
}

impl SourcePlan {
    pub fn new(params: &EmitterParams, flux: &FluxSpec, detector: &DetectorModel) -> Result<Self> {
        let rates = calibrate_rates(params)?;
        let signal_per_emitter = detector.efficiency() * flux.per_ns();
        let emission = rates.emission_rate();
        let keep_probability = signal_per_emitter / emission;
        if keep_probability > 1.0 {
            return Err(Error::Infeasible(format!(
                "detected flux {signal_per_emitter:.6e} ns^-1 per emitter exceeds the emission rate \
                 {emission:.6e} ns^-1 of the calibrated emitter"
            )));
        }
        let total_signal = signal_per_emitter * f64::from(params.n_emitters());
        let background_rate = total_signal * (1.0 / params.rho() - 1.0);
        Ok(Self {
            params: *params,
            rates,
            detector: *detector,
            keep_probability,
            signal_per_emitter,
            background_rate,
        })
    }

    /// Expected rate of the merged stream before dead-time losses, counts/s.
    pub fn expected_rate_per_s(&self) -> f64 {
        let signal = self.signal_per_emitter * f64::from(self.params.n_emitters());
        (signal + self.background_rate) * 1e9 + self.detector.dark_rate_per_s()
    }

    /// Generates the detected stream.
    pub fn simulate(&self, duration_ps: u64, seed: u64) -> Result<TimestampStream> {
        let n = u64::from(self.params.n_emitters());
        let horizon_ns = duration_ps as f64 / PS_PER_NS;
        let duration = duration_ps as f64;
        let emitter = ThinnedEmitter::new(&self.rates, self.keep_probability)?;

        // sub-stream k draws arrivals from rng index 2k and jitter from 2k + 1
        let sources: Vec<u64> = (0..n + 2).collect();
        let streams: Vec<Vec<u64>> = sources
            .par_iter()
            .map(|&k| {
                let mut rng = substream_rng(seed, 2 * k);
                let raw_ps: Vec<f64> = if k < n {
                    emitter
                        .arrivals(horizon_ns, &mut rng)
                        .into_iter()
                        .map(|t| t * PS_PER_NS)
                        .collect()
                } else if k == n {
                    poisson_arrivals_ps(self.background_rate / PS_PER_NS, duration, &mut rng)
                } else {
                    poisson_arrivals_ps(
                        self.detector.dark_rate_per_s() / PS_PER_SECOND,
                        duration,
                        &mut rng,
                    )
                };
                let mut jitter_rng = substream_rng(seed, 2 * k + 1);
                self.detector.jitter_and_quantize(raw_ps, duration_ps, &mut jitter_rng)
            })
            .collect();

        let merged = merge_sorted(streams);
        let censored = self.detector.apply_dead_time(&merged);
        Ok(TimestampStream::from_sorted(censored, duration_ps, Origin::Merged))
    }
}

/// N emitters thinned to the requested flux, plus background and dark counts,
/// after jitter, quantization and dead time.
pub fn simulate_region(
    params: &EmitterParams,
    flux: &FluxSpec,
    detector: &DetectorModel,
    duration_ps: u64,
    seed: u64,
) -> Result<TimestampStream> {
    SourcePlan::new(params, flux, detector)?.simulate(duration_ps, seed)
}

/// k-way merge of sorted sequences; ties keep the lower sequence index first.
pub fn merge_sorted(streams: Vec<Vec<u64>>) -> Vec<u64> {
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;

    let total = streams.iter().map(Vec::len).sum();
    let mut out = Vec::with_capacity(total);
    let mut heap: BinaryHeap<Reverse<(u64, usize, usize)>> = streams
        .iter()
        .enumerate()
        .filter_map(|(k, s)| s.first().map(|&t| Reverse((t, k, 0))))
        .collect();
    while let Some(Reverse((t, k, i))) = heap.pop() {
        out.push(t);
        if let Some(&next) = streams[k].get(i + 1) {
            heap.push(Reverse((next, k, i + 1)));
        }
    }
    out
}
