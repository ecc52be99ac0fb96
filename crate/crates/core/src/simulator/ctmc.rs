//! Three-state emitter chain (ground, excited, shelf) and the mapping between
//! its microscopic rates and the lumped correlation parameters (γ₁, γ₂, β).
//!
//! Transitions: ground → excited (`r_excite`), excited → ground with photon
//! emission (`r_radiate`), excited → shelf (`r_shelve`), shelf → ground
//! (`r_deshelve`). Rates in ns⁻¹.
//!
//! Starting from the ground state right after an emission, the excited-state
//! population relaxes as π_E + c₁e^{−λ₁τ} + c₂e^{−λ₂τ}, where λ₁, λ₂ are the
//! non-zero eigenvalues of the generator. They are the roots of
//! x² − Sx + P with S = a + r + s + d and P = as + ad + rd + sd. Since the
//! population starts at zero with slope `r_excite`, g²(0) = 0 and
//! g²′(0) = a/π_E =: D, which fixes β(λ₁ − λ₂) = D − λ₂.

use crate::error::{Error, Result};
use crate::model::EmitterParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CtmcRates {
    r_excite: f64,
    r_radiate: f64,
    r_shelve: f64,
    r_deshelve: f64,
}

/// Lumped biexponential parameters g²(τ) = 1 − βe^{−γ₁τ} + (β − 1)e^{−γ₂τ}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LumpedParams {
    pub gamma1: f64,
    pub gamma2: f64,
    pub beta: f64,
}

/// Eigen-structure of the relaxation after an emission.
#[derive(Debug, Clone, Copy)]
enum Relaxation {
    Distinct { fast: f64, slow: f64 },
    Repeated { rate: f64 },
    Oscillating { decay: f64, frequency: f64 },
}

impl CtmcRates {
    pub fn new(r_excite: f64, r_radiate: f64, r_shelve: f64, r_deshelve: f64) -> Result<Self> {
        for (name, v) in [
            ("r_excite", r_excite),
            ("r_radiate", r_radiate),
            ("r_deshelve", r_deshelve),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(name, format!("must be positive, got {v}")));
            }
        }
        if !(r_shelve.is_finite() && r_shelve >= 0.0) {
            return Err(Error::param("r_shelve", format!("must be non-negative, got {r_shelve}")));
        }
        if r_shelve >= r_radiate {
            return Err(Error::param(
                "r_shelve",
                format!("shelving rate {r_shelve} must stay below the radiative rate {r_radiate}"),
            ));
        }
        Ok(Self {
            r_excite,
            r_radiate,
            r_shelve,
            r_deshelve,
        })
    }

    /// Two-level emitter with g²(τ) = 1 − e^{−γτ}: excitation = emission = γ/2.
    pub fn two_level(gamma: f64) -> Result<Self> {
        // the shelf is unreachable; its decay rate only needs to be valid
        Self::new(gamma / 2.0, gamma / 2.0, 0.0, gamma)
    }

    pub fn r_excite(&self) -> f64 {
        self.r_excite
    }

    pub fn r_radiate(&self) -> f64 {
        self.r_radiate
    }

    pub fn r_shelve(&self) -> f64 {
        self.r_shelve
    }

    pub fn r_deshelve(&self) -> f64 {
        self.r_deshelve
    }

    /// Stationary occupation of (ground, excited, shelf).
    pub fn steady_state(&self) -> [f64; 3] {
        let excited = 1.0
            / (1.0 + (self.r_radiate + self.r_shelve) / self.r_excite + self.r_shelve / self.r_deshelve);
        let ground = excited * (self.r_radiate + self.r_shelve) / self.r_excite;
        let shelf = excited * self.r_shelve / self.r_deshelve;
        [ground, excited, shelf]
    }

    /// Mean photon emission rate, ns⁻¹.
    pub fn emission_rate(&self) -> f64 {
        self.r_radiate * self.steady_state()[1]
    }

    fn trace_and_det(&self) -> (f64, f64) {
        let (a, r, s, d) = (self.r_excite, self.r_radiate, self.r_shelve, self.r_deshelve);
        (a + r + s + d, a * s + a * d + r * d + s * d)
    }

    /// Initial slope g²′(0).
    fn initial_slope(&self) -> f64 {
        self.r_excite / self.steady_state()[1]
    }

    fn relaxation(&self) -> Relaxation {
        let (sum, prod) = self.trace_and_det();
        let disc = sum * sum - 4.0 * prod;
        let scale = sum * sum;
        if disc.abs() <= 1e-14 * scale {
            Relaxation::Repeated { rate: sum / 2.0 }
        } else if disc > 0.0 {
            let root = disc.sqrt();
            let fast = 0.5 * (sum + root);
            // product form avoids cancellation in the slow root
            Relaxation::Distinct {
                fast,
                slow: prod / fast,
            }
        } else {
            Relaxation::Oscillating {
                decay: sum / 2.0,
                frequency: 0.5 * (-disc).sqrt(),
            }
        }
    }

    /// The (γ₁, γ₂, β) reproduced by this chain, or an error when the
    /// relaxation is oscillatory and has no biexponential form.
    pub fn lumped(&self) -> Result<LumpedParams> {
        let slope = self.initial_slope();
        match self.relaxation() {
            Relaxation::Distinct { fast, slow } => Ok(LumpedParams {
                gamma1: fast,
                gamma2: slow,
                beta: (slope - slow) / (fast - slow),
            }),
            Relaxation::Repeated { .. } | Relaxation::Oscillating { .. } => Err(Error::Domain(
                "generator eigenvalues are not distinct and real".into(),
            )),
        }
    }
}

/// Exact g²(τ) of the emitter chain for τ ≥ 0.
pub fn ctmc_g2(rates: &CtmcRates, tau_ns: f64) -> Result<f64> {
    if !(tau_ns >= 0.0) {
        return Err(Error::Domain(format!("delay must be non-negative, got {tau_ns}")));
    }
    let slope = rates.initial_slope();
    let t = tau_ns;
    Ok(match rates.relaxation() {
        Relaxation::Distinct { fast, slow } => {
            let beta = (slope - slow) / (fast - slow);
            1.0 - beta * (-fast * t).exp() + (beta - 1.0) * (-slow * t).exp()
        }
        Relaxation::Repeated { rate } => 1.0 - (-rate * t).exp() * (1.0 + (rate - slope) * t),
        Relaxation::Oscillating { decay, frequency } => {
            let (sin, cos) = (frequency * t).sin_cos();
            1.0 - (-decay * t).exp() * (cos - (slope - decay) / frequency * sin)
        }
    })
}

/// Excitation-to-radiative rate ratio used by [`calibrate_rates`].
pub const DEFAULT_EXCITATION_RATIO: f64 = 1.0;

const CALIBRATION_GRID: usize = 4000;

/// Microscopic rates reproducing the target (γ₁, γ₂, β); ρ and N are ignored.
pub fn calibrate_rates(target: &EmitterParams) -> Result<CtmcRates> {
    calibrate_rates_with_ratio(
        target.gamma1(),
        target.gamma2(),
        target.beta(),
        DEFAULT_EXCITATION_RATIO,
    )
}

/// Solves for rates with `r_excite = excitation_ratio · r_radiate`.
///
/// The three lumped parameters leave one rate free; fixing the excitation
/// ratio closes the system. Of the admissible solutions the brightest
/// (largest emission rate) is returned.
pub fn calibrate_rates_with_ratio(
    gamma1: f64,
    gamma2: f64,
    beta: f64,
    excitation_ratio: f64,
) -> Result<CtmcRates> {
    if !(gamma1 > gamma2 && gamma2 > 0.0) {
        return Err(Error::param(
            "gamma2",
            format!("need gamma1 > gamma2 > 0, got {gamma1}, {gamma2}"),
        ));
    }
    if !(beta >= 1.0 && beta.is_finite()) {
        return Err(Error::param("beta", format!("must be >= 1, got {beta}")));
    }
    if !(excitation_ratio > 0.0 && excitation_ratio.is_finite()) {
        return Err(Error::param("excitation_ratio", "must be positive"));
    }
    match solve(gamma1, gamma2, beta, excitation_ratio) {
        Some(rates) => Ok(rates),
        None => Err(Error::CalibrationInfeasible {
            requested_beta: beta,
            nearest_beta: nearest_feasible_beta(gamma1, gamma2, beta, excitation_ratio),
        }),
    }
}

/// Closed system in the deshelving rate d. With u = a + r, a = c·u,
/// c = κ/(1 + κ) and E = D − S:
///   s = d(E + d)/a,
///   c·u² − c(S − d)u + d(E + d) = 0       (trace),
///   d(E + d) + d·u + d·s − P = 0          (determinant).
struct Reduced {
    sum: f64,
    prod: f64,
    excess: f64,
    c: f64,
    ratio: f64,
}

impl Reduced {
    fn bright_u(&self, d: f64) -> Option<f64> {
        let b = self.sum - d;
        let disc = b * b - 4.0 * d * (self.excess + d) / self.c;
        (disc >= 0.0 && b > 0.0).then(|| 0.5 * (b + disc.sqrt()))
    }

    fn residual(&self, d: f64) -> Option<f64> {
        let u = self.bright_u(d)?;
        let s_term = d * (self.excess + d);
        Some(s_term + d * u + d * s_term / (self.c * u) - self.prod)
    }

    fn rates(&self, d: f64) -> Option<CtmcRates> {
        let u = self.bright_u(d)?;
        let a = self.c * u;
        let r = u / (1.0 + self.ratio);
        let s = (d * (self.excess + d) / a).max(0.0);
        CtmcRates::new(a, r, s, d).ok()
    }
}

fn solve(gamma1: f64, gamma2: f64, beta: f64, ratio: f64) -> Option<CtmcRates> {
    let sum = gamma1 + gamma2;
    let slope = beta * gamma1 - (beta - 1.0) * gamma2;
    let sys = Reduced {
        sum,
        prod: gamma1 * gamma2,
        excess: slope - sum,
        c: ratio / (1.0 + ratio),
        ratio,
    };
    let target = LumpedParams {
        gamma1,
        gamma2,
        beta,
    };

    // s >= 0 requires d >= -E
    let d_lo = (-sys.excess).max(0.0);
    let mut candidates = Vec::new();
    if d_lo > 0.0 {
        if let Some(g) = sys.residual(d_lo) {
            if g.abs() <= 1e-13 * sys.prod {
                candidates.push(d_lo);
            }
        }
    }

    let start = if d_lo > 0.0 { d_lo } else { sum * 1e-12 };
    let ln_lo = start.ln();
    let ln_hi = sum.ln();
    let grid: Vec<f64> = (0..=CALIBRATION_GRID)
        .map(|i| (ln_lo + (ln_hi - ln_lo) * i as f64 / CALIBRATION_GRID as f64).exp())
        .collect();
    for w in grid.windows(2) {
        let (Some(g0), Some(g1)) = (sys.residual(w[0]), sys.residual(w[1])) else {
            continue;
        };
        if g0 == 0.0 {
            candidates.push(w[0]);
        } else if g0.signum() != g1.signum() {
            candidates.push(bisect(&sys, w[0], w[1], g0));
        }
    }

    candidates
        .into_iter()
        .filter_map(|d| sys.rates(d))
        .filter(|rates| matches_target(rates, &target))
        .max_by(|x, y| x.emission_rate().total_cmp(&y.emission_rate()))
}

fn bisect(sys: &Reduced, mut lo: f64, mut hi: f64, g_lo: f64) -> f64 {
    let sign_lo = g_lo.signum();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match sys.residual(mid) {
            Some(g) if g == 0.0 => return mid,
            Some(g) if g.signum() == sign_lo => lo = mid,
            Some(_) => hi = mid,
            None => break,
        }
    }
    0.5 * (lo + hi)
}

fn matches_target(rates: &CtmcRates, target: &LumpedParams) -> bool {
    // rejects sign changes at poles of the residual
    let Ok(got) = rates.lumped() else {
        return false;
    };
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
    rel(got.gamma1, target.gamma1) < 1e-9
        && rel(got.gamma2, target.gamma2) < 1e-9
        && rel(got.beta, target.beta) < 1e-9
}

fn nearest_feasible_beta(gamma1: f64, gamma2: f64, beta: f64, ratio: f64) -> Option<f64> {
    (0..=400)
        .map(|i| 1.0 + 99.0 * (f64::from(i) / 400.0).powi(2))
        .filter(|&b| solve(gamma1, gamma2, b, ratio).is_some())
        .min_by(|x, y| (x - beta).abs().total_cmp(&(y - beta).abs()))
}
