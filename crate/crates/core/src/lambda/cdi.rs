//! Numerical check of the coming-down-from-infinity criterion
//! `∫_1^∞ du / ψ(u) < ∞`.
//!
//! Convergence of an improper integral cannot be decided from finitely many
//! evaluations, so the verdict is a heuristic with an explicit
//! `Inconclusive` outcome. Two pieces of evidence are combined:
//!
//! * the growth exponent of ψ. Local exponents over each decade of
//!   `[10², 10⁸]` are regressed on `1 / ln u`; for `ψ ~ u^γ (ln u)^β` the
//!   local exponent is `γ + β / ln u`, so the intercept estimates `γ` with
//!   logarithmic corrections removed.
//! * the partial integrals `∫_1^{10^d} du/ψ`. The increment over the last
//!   decade, relative to the integral so far, measures how much is still
//!   being added.

use serde::Serialize;

use super::LambdaMeasure;
use crate::error::{Error, Result};
use crate::numeric::integrate;

/// Exponent margin above 1.
pub const CDI_MARGIN: f64 = 0.05;
/// Relative last-decade increment separating "converged" from "still growing".
pub const TAIL_RATIO_THRESHOLD: f64 = 0.01;

const FIRST_DECADE: i32 = 2;
const LAST_DECADE: i32 = 8;
const POINTS_PER_DECADE: i32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CdiVerdict {
    Cdi,
    NotCdi,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct CdiDiagnostics {
    /// Least-squares slope of `ln ψ` against `ln u` over the whole grid.
    pub gamma: f64,
    /// Exponent extrapolated to `u → ∞` (log corrections removed).
    pub gamma_asymptotic: f64,
    /// Coefficient of `1 / ln u` in the local-exponent fit.
    pub log_power: f64,
    /// Local exponent per decade, keyed by the decade's lower end.
    pub local_exponents: Vec<(f64, f64)>,
    /// `(U, ∫_1^U du/ψ)` for `U = 10, 100, …, 10⁸`.
    pub partial_integrals: Vec<(f64, f64)>,
    /// Last-decade increment divided by the final partial integral.
    pub tail_ratio: f64,
    pub margin: f64,
    /// `(u, ψ(u))` on the geometric grid.
    pub grid: Vec<(f64, f64)>,
}

fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Classifies Λ as coming down from infinity or not.
pub fn cdi_check(lambda: &LambdaMeasure) -> Result<(CdiVerdict, CdiDiagnostics)> {
    let grid: Vec<(f64, f64)> = (FIRST_DECADE * POINTS_PER_DECADE..=LAST_DECADE * POINTS_PER_DECADE)
        .map(|i| {
            let u = 10f64.powf(i as f64 / POINTS_PER_DECADE as f64);
            lambda.psi(u).map(|p| (u, p))
        })
        .collect::<Result<_>>()?;
    if let Some(&(u, _)) = grid.iter().find(|(_, p)| !(*p > 0.0)) {
        return Err(Error::DegenerateMeasure(format!("psi vanishes at u = {u:e}")));
    }

    let ln_u: Vec<f64> = grid.iter().map(|(u, _)| u.ln()).collect();
    let ln_psi: Vec<f64> = grid.iter().map(|(_, p)| p.ln()).collect();
    let (gamma, _) = least_squares(&ln_u, &ln_psi);

    let step = POINTS_PER_DECADE as usize;
    let mut local_exponents = Vec::new();
    let mut inv_log_mid = Vec::new();
    let mut local = Vec::new();
    for start in (0..grid.len() - 1).step_by(step) {
        let end = start + step;
        let g = (ln_psi[end] - ln_psi[start]) / (ln_u[end] - ln_u[start]);
        local_exponents.push((grid[start].0, g));
        inv_log_mid.push(2.0 / (ln_u[start] + ln_u[end]));
        local.push(g);
    }
    let (log_power, gamma_asymptotic) = least_squares(&inv_log_mid, &local);

    // ∫ du/ψ(u) over [10^d, 10^{d+1}] in the variable v = ln u
    let mut partial_integrals = Vec::new();
    let mut acc = 0.0;
    let ln10 = std::f64::consts::LN_10;
    for d in 0..LAST_DECADE {
        let piece = integrate(
            |v: f64| {
                let u = v.exp();
                u / lambda.psi(u).expect("u is finite and positive")
            },
            d as f64 * ln10,
            (d + 1) as f64 * ln10,
            1e-8,
        );
        acc += piece;
        partial_integrals.push((10f64.powi(d + 1), acc));
    }
    let n = partial_integrals.len();
    let tail_ratio = (partial_integrals[n - 1].1 - partial_integrals[n - 2].1) / acc;

    let verdict = if gamma_asymptotic > 1.0 + CDI_MARGIN && tail_ratio < TAIL_RATIO_THRESHOLD {
        CdiVerdict::Cdi
    } else if gamma_asymptotic < 1.0 + CDI_MARGIN && tail_ratio >= TAIL_RATIO_THRESHOLD {
        CdiVerdict::NotCdi
    } else {
        CdiVerdict::Inconclusive
    };
    Ok((
        verdict,
        CdiDiagnostics {
            gamma,
            gamma_asymptotic,
            log_power,
            local_exponents,
            partial_integrals,
            tail_ratio,
            margin: CDI_MARGIN,
            grid,
        },
    ))
}
