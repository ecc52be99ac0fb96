use rayon::prelude::*;

use super::histogram::G2Histogram;
use crate::error::{Error, Result};
use crate::model::SHELVING_RATE_RATIO;

/// Delay range used by the fit, ns.
pub const FIT_RANGE_NS: f64 = 200.0;
pub const DEFAULT_MAX_EMITTERS: u32 = 128;

const MAX_ITERATIONS: usize = 400;
const MIN_GAMMA: f64 = 1e-9;
const FALLBACK_GAMMA: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub n_emitters: u32,
    /// ns⁻¹
    pub gamma: f64,
    pub beta: f64,
    pub rho_used: f64,
    pub residual_sum_squares: f64,
    pub gamma_std_err: f64,
    pub beta_std_err: f64,
    pub points: usize,
    /// Best residual sum of squares for N = 1, 2, …, n_max (NaN where no start converged).
    pub rss_by_n: Vec<f64>,
}

/// Model values at the fit points: g² with γ₂ tied to γ/20.
pub fn shelving_model(tau_ns: f64, n_emitters: u32, gamma: f64, beta: f64, rho: f64) -> f64 {
    let t = tau_ns.abs();
    let depth = rho * rho / f64::from(n_emitters);
    1.0 - depth * (beta * (-gamma * t).exp() - (beta - 1.0) * (-gamma * t / SHELVING_RATE_RATIO).exp())
}

struct Problem<'a> {
    tau: &'a [f64],
    y: &'a [f64],
    depth: f64,
}

#[derive(Debug, Clone, Copy)]
struct Solution {
    gamma: f64,
    beta: f64,
    rss: f64,
    converged: bool,
}

impl Problem<'_> {
    fn rss(&self, gamma: f64, beta: f64) -> f64 {
        self.tau
            .iter()
            .zip(self.y)
            .map(|(&t, &y)| {
                let e1 = (-gamma * t).exp();
                let e2 = (-gamma * t / SHELVING_RATE_RATIO).exp();
                let r = y - (1.0 - self.depth * (beta * e1 - (beta - 1.0) * e2));
                r * r
            })
            .sum()
    }

    /// JᵀJ and Jᵀr of the residuals y − f.
    fn normal_equations(&self, gamma: f64, beta: f64) -> ([[f64; 2]; 2], [f64; 2]) {
        let mut jtj = [[0.0; 2]; 2];
        let mut jtr = [0.0; 2];
        for (&t, &y) in self.tau.iter().zip(self.y) {
            let e1 = (-gamma * t).exp();
            let e2 = (-gamma * t / SHELVING_RATE_RATIO).exp();
            let f = 1.0 - self.depth * (beta * e1 - (beta - 1.0) * e2);
            let r = y - f;
            let dg = self.depth * t * (beta * e1 - (beta - 1.0) * e2 / SHELVING_RATE_RATIO);
            let db = -self.depth * (e1 - e2);
            let j = [dg, db];
            for p in 0..2 {
                jtr[p] += j[p] * r;
                for q in 0..2 {
                    jtj[p][q] += j[p] * j[q];
                }
            }
        }
        (jtj, jtr)
    }

    /// Levenberg–Marquardt with β ≥ 1 and γ > 0 enforced by projection.
    fn solve(&self, gamma0: f64, beta0: f64) -> Solution {
        let project = |g: f64, b: f64| (g.max(MIN_GAMMA), b.max(1.0));
        let (mut gamma, mut beta) = project(gamma0, beta0);
        let mut rss = self.rss(gamma, beta);
        let mut lambda = 1e-3;
        let mut converged = false;
        for _ in 0..MAX_ITERATIONS {
            let (jtj, jtr) = self.normal_equations(gamma, beta);
            let mut accepted = false;
            while lambda < 1e16 {
                let a = [
                    [jtj[0][0] * (1.0 + lambda), jtj[0][1]],
                    [jtj[1][0], jtj[1][1] * (1.0 + lambda)],
                ];
                let Some(step) = solve2(a, jtr) else {
                    lambda *= 10.0;
                    continue;
                };
                let (g, b) = project(gamma + step[0], beta + step[1]);
                let trial = self.rss(g, b);
                if trial.is_finite() && trial <= rss {
                    let small_step = (g - gamma).abs() <= 1e-13 * gamma && (b - beta).abs() <= 1e-13 * beta;
                    let flat = rss - trial <= 1e-15 * rss;
                    gamma = g;
                    beta = b;
                    rss = trial;
                    lambda = (lambda / 10.0).max(1e-12);
                    accepted = true;
                    if small_step || flat {
                        converged = true;
                    }
                    break;
                }
                lambda *= 10.0;
            }
            // no downhill step at any damping: a (projected) stationary point
            if !accepted {
                converged = true;
            }
            if converged {
                break;
            }
        }
        Solution {
            gamma,
            beta,
            rss,
            converged,
        }
    }

    fn std_errors(&self, s: &Solution) -> (f64, f64) {
        let dof = self.tau.len() as f64 - 2.0;
        let (jtj, _) = self.normal_equations(s.gamma, s.beta);
        let det = jtj[0][0] * jtj[1][1] - jtj[0][1] * jtj[1][0];
        if dof <= 0.0 || det <= 0.0 {
            return (f64::NAN, f64::NAN);
        }
        let s2 = s.rss / dof;
        ((s2 * jtj[1][1] / det).sqrt(), (s2 * jtj[0][0] / det).sqrt())
    }
}

fn solve2(a: [[f64; 2]; 2], b: [f64; 2]) -> Option<[f64; 2]> {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    if !(det.abs() > 0.0) || !det.is_finite() {
        return None;
    }
    Some([
        (b[0] * a[1][1] - a[0][1] * b[1]) / det,
        (a[0][0] * b[1] - a[1][0] * b[0]) / det,
    ])
}

/// γ from the delay at which the dip has recovered halfway, from the
/// symmetrized data.
fn half_recovery_gamma(tau: &[f64], y: &[f64]) -> f64 {
    let mut pts: Vec<(f64, f64)> = tau.iter().copied().zip(y.iter().copied()).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let Some(&(_, y0)) = pts.first() else {
        return FALLBACK_GAMMA;
    };
    let dip = 1.0 - y0;
    if !(dip > 0.0) {
        return FALLBACK_GAMMA;
    }
    pts.iter()
        .find(|(t, g)| *t > 0.0 && 1.0 - g <= 0.5 * dip)
        .map(|(t, _)| std::f64::consts::LN_2 / t)
        .unwrap_or(FALLBACK_GAMMA)
}

/// Fits g² for every N in 1..=n_max over (γ, β) and keeps the N with the
/// smallest residual (the smaller N on ties).
pub fn fit_g2(hist: &G2Histogram, rho: f64, n_max: u32) -> Result<FitResult> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::param("rho", format!("must lie in (0, 1], got {rho}")));
    }
    if n_max == 0 {
        return Err(Error::param("n_max", "must be at least 1"));
    }
    if hist.window_ns > 1.0 + 1e-9 {
        return Err(Error::param(
            "window_ns",
            format!("fit needs windows of at most 1 ns, histogram has {}", hist.window_ns),
        ));
    }
    if hist.max_tau_ns() + 0.5 * hist.window_ns < FIT_RANGE_NS {
        return Err(Error::param(
            "max_tau_ns",
            format!("fit needs delays out to {FIT_RANGE_NS} ns, histogram stops at {}", hist.max_tau_ns()),
        ));
    }

    let (tau, y): (Vec<f64>, Vec<f64>) = hist
        .tau_centers
        .iter()
        .zip(&hist.g2_values)
        .filter(|(t, _)| t.abs() <= FIT_RANGE_NS)
        .map(|(t, g)| (t.abs(), *g))
        .unzip();

    let gamma0 = half_recovery_gamma(&tau, &y);
    let starts: Vec<(f64, f64)> = [0.5, 1.0, 2.0]
        .iter()
        .flat_map(|s| [(gamma0 * s, 1.0), (gamma0 * s, 1.5)])
        .collect();

    let per_n: Vec<Option<Solution>> = (1..=n_max)
        .into_par_iter()
        .map(|n| {
            let problem = Problem {
                tau: &tau,
                y: &y,
                depth: rho * rho / f64::from(n),
            };
            starts
                .iter()
                .map(|&(g, b)| problem.solve(g, b))
                .filter(|s| s.converged && s.rss.is_finite())
                .min_by(|a, b| a.rss.total_cmp(&b.rss))
        })
        .collect();

    let mut best: Option<(u32, Solution)> = None;
    for (i, s) in per_n.iter().enumerate() {
        if let Some(s) = s {
            if best.is_none_or(|(_, b)| s.rss < b.rss) {
                best = Some((i as u32 + 1, *s));
            }
        }
    }
    let Some((n, solution)) = best else {
        return Err(Error::Fit(format!(
            "no start converged for N in 1..={n_max} ({} points, initial gamma {gamma0:.4e})",
            tau.len()
        )));
    };

    let problem = Problem {
        tau: &tau,
        y: &y,
        depth: rho * rho / f64::from(n),
    };
    let (gamma_std_err, beta_std_err) = problem.std_errors(&solution);
    Ok(FitResult {
        n_emitters: n,
        gamma: solution.gamma,
        beta: solution.beta,
        rho_used: rho,
        residual_sum_squares: solution.rss,
        gamma_std_err,
        beta_std_err,
        points: tau.len(),
        rss_by_n: per_n.iter().map(|s| s.map_or(f64::NAN, |s| s.rss)).collect(),
    })
}
