//! Statistical checks of the simulated sources against closed forms.

use statrs::distribution::{ChiSquared, ContinuousCDF, Exp};

use nvqrng::estimator::{estimate_rho, g2_histogram, hbt_split, shelving_model, G2Histogram};
use nvqrng::model::FluxSpec;
use nvqrng::regions::Region;
use nvqrng::simulator::{
    calibrate_rates, ctmc_g2, simulate_emitter, simulate_poisson, simulate_region, substream_rng, CtmcRates,
    SourcePlan, ThinnedEmitter,
};
use nvqrng::stream::Origin;
use nvqrng::{DetectorModel, TimestampStream};

/// Mean of `model` over the window centred on `tau` (Simpson, 8 panels).
fn window_average(model: &impl Fn(f64) -> f64, tau: f64, width: f64) -> f64 {
    let h = width / 8.0;
    let lo = tau - width / 2.0;
    let mut s = model(lo) + model(lo + width);
    for i in 1..8 {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * model(lo + f64::from(i) * h);
    }
    s * h / 3.0 / width
}

/// Pearson χ² of a histogram against the window-averaged `model(τ)` using
/// expected-count variances. Returns (statistic, degrees of freedom).
fn chi2_against(hist: &G2Histogram, max_abs_tau: f64, model: impl Fn(f64) -> f64) -> (f64, usize) {
    let scale = hist.accidental_level();
    let w = hist.window_ns;
    let mut stat = 0.0;
    let mut dof = 0;
    for (&tau, &raw) in hist.tau_centers.iter().zip(&hist.raw_coincidences) {
        if tau.abs() > max_abs_tau {
            continue;
        }
        let expected = window_average(&model, tau, w) * scale;
        if expected < 5.0 {
            continue;
        }
        stat += (raw as f64 - expected).powi(2) / expected;
        dof += 1;
    }
    (stat, dof)
}

fn p_value(stat: f64, dof: usize) -> f64 {
    1.0 - ChiSquared::new(dof as f64).unwrap().cdf(stat)
}

fn to_stream(arrivals_ns: Vec<f64>, horizon_ns: f64) -> TimestampStream {
    let mut ts: Vec<u64> = arrivals_ns.into_iter().map(|t| (t * 1e3).round() as u64).collect();
    ts.dedup();
    TimestampStream::new(ts, (horizon_ns * 1e3) as u64, Origin::Signal).unwrap()
}

#[test]
fn two_level_emitter_antibunching_matches_closed_form() {
    let gamma = 1.0;
    let rates = CtmcRates::two_level(gamma).unwrap();
    let stream = simulate_emitter(&rates, 4_000_000_000, 12);
    assert!(stream.len() > 900_000, "{}", stream.len());
    let (a, b) = hbt_split(&stream, 13);
    let hist = g2_histogram(&a, &b, 0.05, 10.0, stream.duration_s()).unwrap();
    let model = |tau: f64| 1.0 - (-gamma * tau.abs()).exp();
    let (stat, dof) = chi2_against(&hist, 10.0, model);
    let p = p_value(stat, dof);
    assert!(p > 1e-3, "chi2 = {stat:.1} on {dof} bins, p = {p:.2e}");
    let (g0, sigma) = hist.zero_delay().unwrap();
    let expect = window_average(&model, 0.0, 0.05);
    assert!((g0 - expect).abs() < 4.0 * sigma, "g2(0) = {g0} ± {sigma}, expected {expect:.4}");
}

#[test]
fn thinned_shelving_emitter_keeps_its_correlations() {
    let params = Region::R3.params();
    let rates = calibrate_rates(&params).unwrap();
    let emitter = ThinnedEmitter::new(&rates, 0.5).unwrap();
    let horizon_ns = 2e8;
    let arrivals = emitter.arrivals(horizon_ns, &mut substream_rng(21, 0));
    let stream = to_stream(arrivals, horizon_ns);
    assert!(stream.len() > 500_000, "{}", stream.len());
    let (a, b) = hbt_split(&stream, 22);
    let hist = g2_histogram(&a, &b, 1.0, 300.0, stream.duration_s()).unwrap();
    let (stat, dof) = chi2_against(&hist, 300.0, |tau| ctmc_g2(&rates, tau.abs()).unwrap());
    let p = p_value(stat, dof);
    assert!(p > 1e-3, "chi2 = {stat:.1} on {dof} bins, p = {p:.2e}");
}

#[test]
fn poisson_gaps_are_exponential() {
    let rate = 1e6;
    let stream = simulate_poisson(rate, 1_000_000_000_000, 31).unwrap();
    let mut gaps: Vec<f64> = stream.gaps_ps().map(|g| g as f64).collect();
    gaps.sort_by(f64::total_cmp);
    let n = gaps.len() as f64;
    let exp = Exp::new(rate * 1e-12).unwrap();
    let d = gaps
        .iter()
        .enumerate()
        .map(|(i, &g)| {
            let f = exp.cdf(g);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max);
    // 1% critical value of the Kolmogorov distribution
    assert!(d < 1.628 / n.sqrt(), "D = {d:.2e} for {n} gaps");
    assert!(((n - rate) / rate.sqrt()).abs() < 4.0, "{n} events");
}

#[test]
fn merged_rate_matches_emitters_background_and_dark() {
    for (region, seed) in [(Region::R3, 41), (Region::R4, 42)] {
        let params = region.params();
        let detector = DetectorModel::default().with_dead_time(0);
        let stream = simulate_region(&params, &region.flux(), &detector, 1_000_000_000_000, seed).unwrap();
        let expected = f64::from(params.n_emitters()) * region.lambda_per_ns() * 1e9 / params.rho()
            + detector.dark_rate_per_s();
        let got = stream.len() as f64;
        assert!(
            (got - expected).abs() < 3.0 * expected.sqrt(),
            "{region}: {got} events, expected {expected:.0}"
        );
    }
}

#[test]
fn dead_time_keeps_gaps_and_lowers_rate() {
    let region = Region::R5;
    let detector = DetectorModel::default();
    let stream = simulate_region(&region.params(), &region.flux(), &detector, 200_000_000_000, 5).unwrap();
    assert!(stream.min_gap_ps().unwrap() >= detector.dead_time_ps());
    let plan = SourcePlan::new(&region.params(), &region.flux(), &detector).unwrap();
    // non-paralyzable loss: r / (1 + r·τd)
    let r = plan.expected_rate_per_s();
    let predicted = r / (1.0 + r * detector.dead_time_ps() as f64 * 1e-12) * stream.duration_s();
    let got = stream.len() as f64;
    assert!((got / predicted - 1.0).abs() < 0.01, "{got} vs {predicted:.0}");
}

#[test]
fn rho_is_recovered_from_rates() {
    let params = Region::R2.params().with_rho(0.8).unwrap();
    let flux = FluxSpec::new(Region::R2.lambda_per_ns(), &params).unwrap();
    let ideal = DetectorModel::ideal();
    let plan = SourcePlan::new(&params, &flux, &ideal).unwrap();
    let total = plan.simulate(1_000_000_000_000, 51).unwrap();
    let background = simulate_poisson(plan.background_rate * 1e9, 1_000_000_000_000, 52).unwrap();
    let rho = estimate_rho(total.rate_per_s(), background.rate_per_s()).unwrap();
    let sigma = (1.0 - 0.8) * (1.0 / total.len() as f64 + 1.0 / background.len() as f64).sqrt();
    assert!((rho - 0.8).abs() < 4.0 * sigma, "rho = {rho}, sigma = {sigma:.2e}");
}

#[test]
fn histogram_is_symmetric_and_flat_in_the_tail() {
    let region = Region::R3;
    let params = region.params();
    let flux = FluxSpec::new(1e-3, &params).unwrap();
    let detector = DetectorModel::default().with_dead_time(0);
    let stream = simulate_region(&params, &flux, &detector, 500_000_000_000, 61).unwrap();
    let (a, b) = hbt_split(&stream, 62);
    let hist = g2_histogram(&a, &b, 2.0, 1000.0, stream.duration_s()).unwrap();

    let mid = hist.len() / 2;
    let mut stat = 0.0;
    for k in 1..=mid {
        let (lo, hi) = (hist.raw_coincidences[mid - k] as f64, hist.raw_coincidences[mid + k] as f64);
        stat += (lo - hi).powi(2) / (lo + hi);
    }
    let p = p_value(stat, mid);
    assert!(p > 1e-3, "asymmetry chi2 = {stat:.1} on {mid} pairs");

    // the shelf keeps the tail above one; compare it with the model curve
    let model = |tau: f64| {
        shelving_model(tau, params.n_emitters(), params.gamma1(), params.beta(), params.rho())
    };
    let tail_taus: Vec<f64> =
        hist.tau_centers.iter().copied().filter(|t| (800.0..=1000.0).contains(&t.abs())).collect();
    let expect = tail_taus.iter().map(|&t| model(t)).sum::<f64>() / tail_taus.len() as f64;
    let tail = hist.mean_over(800.0, 1000.0).unwrap();
    let sigma = 1.0 / (hist.accidental_level() * tail_taus.len() as f64).sqrt();
    assert!(expect > 1.01);
    assert!((tail - expect).abs() < 4.0 * sigma, "tail mean {tail}, model {expect:.4}, sigma {sigma:.2e}");
}

#[test]
fn independent_poisson_streams_are_uncorrelated() {
    let a = simulate_poisson(2e6, 200_000_000_000, 71).unwrap();
    let b = simulate_poisson(2e6, 200_000_000_000, 72).unwrap();
    let hist = g2_histogram(&a, &b, 1.0, 200.0, a.duration_s()).unwrap();
    let (stat, dof) = chi2_against(&hist, 200.0, |_| 1.0);
    let p = p_value(stat, dof);
    assert!(p > 1e-3, "chi2 = {stat:.1} on {dof} bins");
}
