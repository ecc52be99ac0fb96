//! Closed-form photon statistics of N identical three-level emitters with
//! incoherent background.
//!
//! Times are in nanoseconds and rates in ns⁻¹ throughout this module.

use statrs::function::factorial::ln_factorial;

use crate::error::{Error, Result};

/// Ratio γ₁/γ₂ used when only a single decay rate is known.
pub const SHELVING_RATE_RATIO: f64 = 20.0;

/// Largest γ₁·t for which the truncated photon-number model is accepted.
pub const MAX_GAMMA1_INTERVAL: f64 = 0.1;

/// Below this argument `e^{-x} + x - 1` is evaluated by its Taylor series.
const SERIES_THRESHOLD: f64 = 1e-3;

/// Above this emitter count multi-emitter probabilities are evaluated in the log domain.
const DIRECT_EVALUATION_MAX_EMITTERS: u32 = 30;

/// Physical parameters of an ensemble of identical emitters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmitterParams {
    n_emitters: u32,
    gamma1: f64,
    gamma2: f64,
    beta: f64,
    rho: f64,
}

impl EmitterParams {
    pub fn new(n_emitters: u32, gamma1: f64, gamma2: f64, beta: f64, rho: f64) -> Result<Self> {
        if n_emitters == 0 {
            return Err(Error::param("n_emitters", "must be at least 1"));
        }
        if !(gamma1.is_finite() && gamma1 > 0.0) {
            return Err(Error::param("gamma1", format!("must be positive, got {gamma1}")));
        }
        if !(gamma2.is_finite() && gamma2 > 0.0) {
            return Err(Error::param("gamma2", format!("must be positive, got {gamma2}")));
        }
        if gamma2 >= gamma1 {
            return Err(Error::param(
                "gamma2",
                format!("shelving decay {gamma2} must be slower than gamma1 = {gamma1}"),
            ));
        }
        if !(beta.is_finite() && beta >= 1.0) {
            return Err(Error::param("beta", format!("must be >= 1, got {beta}")));
        }
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(Error::param("rho", format!("must lie in (0, 1], got {rho}")));
        }
        Ok(Self {
            n_emitters,
            gamma1,
            gamma2,
            beta,
            rho,
        })
    }

    /// Parameters with the shelving decay fixed at γ₂ = γ/20.
    pub fn with_standard_shelving(n_emitters: u32, gamma: f64, beta: f64, rho: f64) -> Result<Self> {
        Self::new(n_emitters, gamma, gamma / SHELVING_RATE_RATIO, beta, rho)
    }

    pub fn n_emitters(&self) -> u32 {
        self.n_emitters
    }

    pub fn gamma1(&self) -> f64 {
        self.gamma1
    }

    pub fn gamma2(&self) -> f64 {
        self.gamma2
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn with_n_emitters(self, n_emitters: u32) -> Result<Self> {
        Self::new(n_emitters, self.gamma1, self.gamma2, self.beta, self.rho)
    }

    pub fn with_rho(self, rho: f64) -> Result<Self> {
        Self::new(self.n_emitters, self.gamma1, self.gamma2, self.beta, rho)
    }

    pub fn with_beta(self, beta: f64) -> Result<Self> {
        Self::new(self.n_emitters, self.gamma1, self.gamma2, beta, self.rho)
    }
}

/// Mean detected photon flux per emitter (ns⁻¹).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxSpec {
    lambda_per_emitter: f64,
}

impl FluxSpec {
    /// Validates the flux against the emitter's ground/excited rate, which bounds it.
    pub fn new(lambda_per_emitter: f64, params: &EmitterParams) -> Result<Self> {
        if !(lambda_per_emitter.is_finite() && lambda_per_emitter > 0.0) {
            return Err(Error::param(
                "lambda",
                format!("flux must be positive, got {lambda_per_emitter}"),
            ));
        }
        if lambda_per_emitter >= params.gamma1() {
            return Err(Error::param(
                "lambda",
                format!(
                    "flux {lambda_per_emitter} ns^-1 must stay below gamma1 = {} ns^-1",
                    params.gamma1()
                ),
            ));
        }
        Ok(Self { lambda_per_emitter })
    }

    pub fn per_ns(&self) -> f64 {
        self.lambda_per_emitter
    }

    pub fn per_second(&self) -> f64 {
        self.lambda_per_emitter * 1e9
    }

    /// Mean photon number μ_t = λt in an interval of `t_ns`.
    pub fn mean_count(&self, t_ns: f64) -> f64 {
        self.lambda_per_emitter * t_ns
    }
}

/// Truncated photon-number distribution of one emitter over a fixed interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonNumberDist {
    pub p0: f64,
    pub p1: f64,
    pub p2: f64,
    pub interval_ns: f64,
}

impl PhotonNumberDist {
    pub fn mean(&self) -> f64 {
        self.p1 + 2.0 * self.p2
    }

    /// Probability of one or more photons, computed without cancellation.
    pub fn nonzero(&self) -> f64 {
        self.p1 + self.p2
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.p0, self.p1, self.p2]
    }

    /// P⁽ᴺ⁾(n): probability of `n` photons from `n_emitters` independent copies.
    pub fn total_count_probability(&self, n: u32, n_emitters: u32) -> f64 {
        if n > 2 * n_emitters {
            return 0.0;
        }
        if n_emitters <= DIRECT_EVALUATION_MAX_EMITTERS {
            trinomial_direct(self, n, n_emitters)
        } else {
            trinomial_log(self, n, n_emitters)
        }
    }

    /// P⁽ᴺ⁾(n) for every n in 0..=2N.
    pub fn total_count_distribution(&self, n_emitters: u32) -> Vec<f64> {
        (0..=2 * n_emitters)
            .map(|n| self.total_count_probability(n, n_emitters))
            .collect()
    }
}

/// Normalized second-order correlation of N emitters with background, at delay `tau_ns`.
pub fn g2_model(tau_ns: f64, params: &EmitterParams) -> f64 {
    let t = tau_ns.abs();
    let fast = params.beta * (-params.gamma1 * t).exp();
    let slow = (params.beta - 1.0) * (-params.gamma2 * t).exp();
    let rho2 = params.rho * params.rho;
    1.0 - rho2 / f64::from(params.n_emitters) * (fast - slow)
}

/// `(e^{-x} + x - 1) / x²`, accurate for all x ≥ 0.
fn window_kernel(x: f64) -> f64 {
    if x < SERIES_THRESHOLD {
        0.5 - x / 6.0 + x * x / 24.0 - x * x * x / 120.0
    } else {
        ((-x).exp_m1() + x) / (x * x)
    }
}

/// Correlation of a single emitter averaged over a detection interval of length `t_ns`.
///
/// The emitter count of `params` is ignored: this is the per-emitter quantity
/// that feeds [`photon_number_single`].
pub fn g2_detected_zero(t_ns: f64, params: &EmitterParams) -> Result<f64> {
    if !(t_ns.is_finite() && t_ns > 0.0) {
        return Err(Error::Domain(format!(
            "detection interval must be positive, got {t_ns} ns"
        )));
    }
    let rho2 = params.rho * params.rho;
    let fast = params.beta * window_kernel(params.gamma1 * t_ns);
    let slow = (params.beta - 1.0) * window_kernel(params.gamma2 * t_ns);
    Ok(1.0 - 2.0 * rho2 * (fast - slow))
}

/// Photon-number probabilities of one emitter in an interval `t_ns` ≪ 1/γ₁.
///
/// Multi-photon probability is set to its upper bound ½μ²g_t(0) and n ≥ 3 is
/// dropped; P(0) follows by normalization.
pub fn photon_number_single(
    t_ns: f64,
    flux: &FluxSpec,
    params: &EmitterParams,
) -> Result<PhotonNumberDist> {
    let g1t = params.gamma1 * t_ns;
    if !(g1t < MAX_GAMMA1_INTERVAL) {
        return Err(Error::ModelValidity(format!(
            "gamma1 * t = {g1t:.4} is not small (limit {MAX_GAMMA1_INTERVAL})"
        )));
    }
    let g = g2_detected_zero(t_ns, params)?;
    let mu = flux.mean_count(t_ns);
    if mu >= 1.0 {
        return Err(Error::ModelValidity(format!(
            "mean photon number {mu} per interval must be below 1"
        )));
    }
    let p2 = 0.5 * mu * mu * g;
    let p1 = mu - mu * mu * g;
    let p0 = 1.0 - p1 - p2;
    for (name, p) in [("P(0)", p0), ("P(1)", p1), ("P(2)", p2)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::ModelValidity(format!(
                "{name} = {p} outside [0, 1]; interval too long for the truncated model"
            )));
        }
    }
    Ok(PhotonNumberDist {
        p0,
        p1,
        p2,
        interval_ns: t_ns,
    })
}

/// P⁽ᴺ⁾(n) for the emitter count carried by `params`.
pub fn photon_number_multi(
    n: u32,
    t_ns: f64,
    flux: &FluxSpec,
    params: &EmitterParams,
) -> Result<f64> {
    let single = photon_number_single(t_ns, flux, params)?;
    Ok(single.total_count_probability(n, params.n_emitters))
}

fn k_range(n: u32, n_emitters: u32) -> std::ops::RangeInclusive<u32> {
    n.saturating_sub(n_emitters)..=n / 2
}

fn binomial(n: u32, k: u32) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}

fn pow0(p: f64, e: u32) -> f64 {
    // 0^0 = 1 by convention
    if e == 0 {
        1.0
    } else {
        p.powi(e as i32)
    }
}

fn trinomial_direct(d: &PhotonNumberDist, n: u32, big_n: u32) -> f64 {
    k_range(n, big_n)
        .map(|k| {
            let zeros = big_n + k - n;
            let ones = n - 2 * k;
            // N! / (zeros! ones! k!) = C(N, k) C(N - k, ones)
            let coeff = binomial(big_n, k) * binomial(big_n - k, ones);
            coeff * pow0(d.p0, zeros) * pow0(d.p1, ones) * pow0(d.p2, k)
        })
        .sum()
}

fn ln_pow(p: f64, e: u32) -> f64 {
    if e == 0 {
        0.0
    } else {
        f64::from(e) * p.ln()
    }
}

fn trinomial_log(d: &PhotonNumberDist, n: u32, big_n: u32) -> f64 {
    let ln_p0 = (-d.nonzero()).ln_1p();
    let ln_nf = ln_factorial(u64::from(big_n));
    let mut sum = NeumaierSum::default();
    for k in k_range(n, big_n) {
        let zeros = big_n + k - n;
        let ones = n - 2 * k;
        let ln_coeff = ln_nf
            - ln_factorial(u64::from(zeros))
            - ln_factorial(u64::from(ones))
            - ln_factorial(u64::from(k));
        let ln_zero_part = if zeros == 0 { 0.0 } else { f64::from(zeros) * ln_p0 };
        let ln_term = ln_coeff + ln_zero_part + ln_pow(d.p1, ones) + ln_pow(d.p2, k);
        sum.add(ln_term.exp());
    }
    sum.total()
}

/// Compensated (Neumaier) summation.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn total(&self) -> f64 {
        self.sum + self.compensation
    }
}
