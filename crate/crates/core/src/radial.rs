//! Concentric-ball configurations `(B_1, B_R)` in dimension `n ≥ 2`.
//!
//! For convection the state and energy are explicit. For a general law the
//! state in the annulus is harmonic with outer trace `l`, so the energy is a
//! function of the single scalar `l` which is minimized by a global scan
//! followed by golden-section refinement.

use serde::Serialize;

use crate::dissipation::DissipationLaw;
use crate::error::{Error, Result};
use crate::numeric::{bisect, geomspace, linspace, scan_then_refine};
use crate::numeric::{unit_ball_volume, unit_sphere_area};

const TRACE_SCAN_POINTS: usize = 4096;
const RADIUS_SCAN_POINTS: usize = 512;
const GRADIENT_RATIO_POINTS: usize = 4096;
const THRESHOLD_RTOL: f64 = 1e-10;
/// Distance below which `R_max` is considered equal to the threshold radius.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// Energy split of a configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyBreakdown {
    /// `∫|∇u|²`.
    pub dirichlet: f64,
    /// `∫_{∂Ω} Θ(u)`.
    pub boundary: f64,
    /// `Λ|Ω∖K|`.
    pub penalty: f64,
    pub total: f64,
    /// Outer boundary value of the state.
    pub trace: f64,
}

impl EnergyBreakdown {
    pub fn new(dirichlet: f64, boundary: f64, penalty: f64, trace: f64) -> Self {
        Self {
            dirichlet,
            boundary,
            penalty,
            total: dirichlet + boundary + penalty,
            trace,
        }
    }

    pub fn with_penalty(self, penalty: f64) -> Self {
        Self::new(self.dirichlet, self.boundary, penalty, self.trace)
    }
}

/// A radial problem instance; the inner radius is fixed to one.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialConfig {
    pub n: usize,
    pub law: DissipationLaw,
    pub outer_radius: f64,
    pub lambda: f64,
}

impl RadialConfig {
    pub fn new(n: usize, law: DissipationLaw, outer_radius: f64, lambda: f64) -> Result<Self> {
        check_dim(n)?;
        check_radius(outer_radius)?;
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("lambda must be ≥ 0, got {lambda}")));
        }
        Ok(Self { n, law, outer_radius, lambda })
    }

    /// Volume of the inner ball, `ω_n`.
    pub fn inner_volume(&self) -> f64 {
        unit_ball_volume(self.n)
    }

    pub fn energy(&self) -> Result<EnergyBreakdown> {
        general_radial_energy(self.n, &self.law, self.outer_radius, self.lambda)
    }
}

/// Convection regimes of the constrained problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// Spread insulation up to the volume budget.
    A,
    /// All or nothing, depending on the budget versus the threshold radius.
    B,
    /// No insulation.
    C,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegimeReport {
    pub regime: Regime,
    pub critical_radius: f64,
    pub threshold_radius: Option<f64>,
    pub optimal_radius: f64,
    pub optimal_energy: f64,
    pub tie: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BestRadius {
    pub r_star: f64,
    pub energy: EnergyBreakdown,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerturbationExpansion {
    /// Energy of the linear thin-shell competitor on `B_{1+ε}`.
    pub energy_eps: f64,
    /// `((n−1)Θ(1) − Θ'(1)²/4)·Per(B_1)`.
    pub first_order_coeff: f64,
}

fn check_dim(n: usize) -> Result<()> {
    if n < 2 {
        Err(Error::InvalidParameter(format!("dimension must be ≥ 2, got {n}")))
    } else {
        Ok(())
    }
}

fn check_radius(r: f64) -> Result<()> {
    if r >= 1.0 {
        Ok(())
    } else {
        Err(Error::Domain { value: r, domain: "[1, ∞]" })
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("beta must be positive, got {beta}")))
    }
}

/// Increasing radial fundamental solution `Φ_n`.
pub fn phi(n: usize, rho: f64) -> Result<f64> {
    check_dim(n)?;
    if !(rho > 0.0) {
        return Err(Error::Domain { value: rho, domain: "(0, ∞)" });
    }
    Ok(phi_unchecked(n, rho))
}

/// `Φ_n'(ρ) = ρ^{1−n}`.
pub fn phi_prime(n: usize, rho: f64) -> Result<f64> {
    check_dim(n)?;
    if !(rho > 0.0) {
        return Err(Error::Domain { value: rho, domain: "(0, ∞)" });
    }
    Ok(phi_prime_unchecked(n, rho))
}

fn phi_unchecked(n: usize, rho: f64) -> f64 {
    if n == 2 {
        rho.ln()
    } else {
        -1.0 / ((n as f64 - 2.0) * rho.powi(n as i32 - 2))
    }
}

fn phi_prime_unchecked(n: usize, rho: f64) -> f64 {
    rho.powi(1 - n as i32)
}

/// `Φ_n(R) − Φ_n(1)`, including `R = ∞`.
fn phi_gap(n: usize, r: f64) -> f64 {
    if r.is_infinite() {
        if n == 2 {
            f64::INFINITY
        } else {
            1.0 / (n as f64 - 2.0)
        }
    } else if n == 2 {
        r.ln()
    } else {
        (1.0 - r.powi(2 - n as i32)) / (n as f64 - 2.0)
    }
}

fn phi_prime_ext(n: usize, r: f64) -> f64 {
    if r.is_infinite() {
        0.0
    } else {
        phi_prime_unchecked(n, r)
    }
}

/// Denominator `Φ_n'(R) + β(Φ_n(R) − Φ_n(1))` of the convection energy.
fn convection_denominator(n: usize, beta: f64, r: f64) -> f64 {
    phi_prime_ext(n, r) + beta * phi_gap(n, r)
}

/// Explicit energy of `(B_1, B_R)` under `Θ(u) = βu²`; `R = ∞` gives the limit.
pub fn convection_energy(n: usize, beta: f64, r: f64) -> Result<EnergyBreakdown> {
    check_dim(n)?;
    check_beta(beta)?;
    check_radius(r)?;
    let per1 = unit_sphere_area(n);
    if r == 1.0 {
        return Ok(EnergyBreakdown::new(0.0, beta * per1, 0.0, 1.0));
    }
    if r.is_infinite() {
        // all energy is Dirichlet in the limit, the trace goes to 0
        let dirichlet = if n == 2 { 0.0 } else { (n as f64 - 2.0) * per1 };
        return Ok(EnergyBreakdown::new(dirichlet, 0.0, 0.0, 0.0));
    }
    let denom = convection_denominator(n, beta, r);
    let gap = phi_gap(n, r);
    let trace = phi_prime_unchecked(n, r) / denom;
    let one_minus = beta * gap / denom;
    let dirichlet = one_minus * one_minus * per1 / gap;
    let boundary = beta * per1 * r.powi(n as i32 - 1) * trace * trace;
    Ok(EnergyBreakdown::new(dirichlet, boundary, 0.0, trace))
}

/// Convection state `u*(ρ)` on `(B_1, B_R)`.
pub fn convection_state(n: usize, beta: f64, r: f64, rho: f64) -> Result<f64> {
    check_dim(n)?;
    check_beta(beta)?;
    check_radius(r)?;
    if !(0.0..=r).contains(&rho) {
        return Err(Error::Domain { value: rho, domain: "[0, R]" });
    }
    if rho <= 1.0 {
        return Ok(1.0);
    }
    let denom = convection_denominator(n, beta, r);
    Ok(1.0 - beta * phi_gap(n, rho) / denom)
}

/// `|∇u*|/u*` of the convection state at radius `ρ ∈ [1, R]`.
pub fn convection_gradient_ratio(n: usize, beta: f64, r: f64, rho: f64) -> f64 {
    let denom = convection_denominator(n, beta, r);
    let u = 1.0 - beta * phi_gap(n, rho) / denom;
    beta * phi_prime_unchecked(n, rho) / denom / u
}

/// Minimal energy of `(B_1, B_R)` for a general law, plus `λω_n(Rⁿ−1)`.
pub fn general_radial_energy(
    n: usize,
    law: &DissipationLaw,
    r: f64,
    lambda: f64,
) -> Result<EnergyBreakdown> {
    check_dim(n)?;
    check_radius(r)?;
    if !(lambda >= 0.0) {
        return Err(Error::InvalidParameter(format!("lambda must be ≥ 0, got {lambda}")));
    }
    let per1 = unit_sphere_area(n);
    let omega = unit_ball_volume(n);
    if r == 1.0 {
        let theta1 = law.value(1.0);
        return Ok(EnergyBreakdown::new(0.0, theta1 * per1, 0.0, 1.0));
    }
    if r.is_infinite() {
        if lambda > 0.0 {
            return Ok(EnergyBreakdown::new(0.0, 0.0, f64::INFINITY, 0.0));
        }
        // infinite perimeter forces Θ(l) = 0; keep the largest such l
        let flat_top = linspace(0.0, 1.0, TRACE_SCAN_POINTS)
            .into_iter()
            .take_while(|&l| law.value(l) == 0.0)
            .last()
            .unwrap_or(0.0);
        let stiffness = per1 / phi_gap(n, r);
        let d = stiffness * (1.0 - flat_top).powi(2);
        return Ok(EnergyBreakdown::new(d, 0.0, 0.0, flat_top));
    }
    let stiffness = per1 / phi_gap(n, r);
    let per_r = per1 * r.powi(n as i32 - 1);
    let energy = |l: f64| stiffness * (1.0 - l) * (1.0 - l) + per_r * law.value(l);
    let grid = linspace(0.0, 1.0, TRACE_SCAN_POINTS);
    let (l, _) = scan_then_refine(energy, &grid, 1e-13);
    let dirichlet = stiffness * (1.0 - l) * (1.0 - l);
    let boundary = per_r * law.value(l);
    let penalty = lambda * omega * (r.powi(n as i32) - 1.0);
    Ok(EnergyBreakdown::new(dirichlet, boundary, penalty, l))
}

/// Nontrivial radius `R > (n−1)/β` with `E_β(B_1,B_R) = E_β(B_1,B_1)`, when it exists.
pub fn threshold_radius(n: usize, beta: f64) -> Option<f64> {
    if n < 2 || !(beta > 0.0) {
        return None;
    }
    let nf = n as f64;
    let in_regime = beta < nf - 1.0 && beta > nf - 2.0;
    if !in_regime {
        return None;
    }
    let crit = (nf - 1.0) / beta;
    let f = |r: f64| convection_denominator(n, beta, r) - 1.0;
    let mut hi = 2.0 * crit;
    let mut guard = 0;
    while f(hi) <= 0.0 {
        hi *= 2.0;
        guard += 1;
        if guard > 200 {
            return None;
        }
    }
    bisect(f, crit, hi, THRESHOLD_RTOL)
}

/// Case disjunction for the convection problem with volume budget `|B_{R_max}|`.
pub fn classify_regime(n: usize, beta: f64, r_max: f64) -> Result<RegimeReport> {
    check_dim(n)?;
    check_beta(beta)?;
    check_radius(r_max)?;
    let nf = n as f64;
    let critical_radius = ((nf - 1.0) / beta).max(1.0);
    let mut tie = false;
    let mut threshold = None;
    let (regime, optimal_radius) = if beta >= nf - 1.0 {
        (Regime::A, r_max)
    } else if beta <= nf - 2.0 {
        (Regime::C, 1.0)
    } else {
        let thr = threshold_radius(n, beta).ok_or_else(|| {
            Error::InvalidParameter("threshold radius not found in regime b".into())
        })?;
        threshold = Some(thr);
        if (r_max - thr).abs() < TIE_TOLERANCE {
            tie = true;
            (Regime::B, 1.0)
        } else if r_max < thr {
            (Regime::B, 1.0)
        } else {
            (Regime::B, r_max)
        }
    };
    let optimal_energy = convection_energy(n, beta, optimal_radius)?.total;
    Ok(RegimeReport {
        regime,
        critical_radius,
        threshold_radius: threshold,
        optimal_radius,
        optimal_energy,
        tie,
    })
}

/// Best concentric outer radius in `[1, R_max]` for a general law.
///
/// With `λ > 0` the search interval is capped where the penalty alone
/// exceeds `E(B_1,B_1) = Θ(1)Per(B_1)`, so `R_max = ∞` is allowed.
pub fn best_radius(n: usize, law: &DissipationLaw, r_max: f64, lambda: f64) -> Result<BestRadius> {
    check_dim(n)?;
    check_radius(r_max)?;
    if !(lambda >= 0.0) {
        return Err(Error::InvalidParameter(format!("lambda must be ≥ 0, got {lambda}")));
    }
    let mut hi = r_max;
    if lambda > 0.0 {
        let cap = (1.0 + n as f64 * law.value(1.0) / lambda).powf(1.0 / n as f64);
        hi = hi.min(cap.max(1.0 + 1e-9));
    } else if r_max.is_infinite() {
        return Err(Error::InvalidParameter(
            "an infinite R_max needs a positive lambda".into(),
        ));
    }
    if hi == 1.0 {
        return Ok(BestRadius {
            r_star: 1.0,
            energy: general_radial_energy(n, law, 1.0, lambda)?,
        });
    }
    let width = hi - 1.0;
    let mut grid = vec![1.0];
    grid.extend(
        geomspace(width * 1e-6, width, RADIUS_SCAN_POINTS - 1)
            .into_iter()
            .map(|d| 1.0 + d),
    );
    *grid.last_mut().unwrap() = hi;
    let total = |r: f64| {
        general_radial_energy(n, law, r, lambda)
            .map(|e| e.total)
            .unwrap_or(f64::INFINITY)
    };
    let (r_star, _) = scan_then_refine(total, &grid, 1e-12);
    Ok(BestRadius {
        r_star,
        energy: general_radial_energy(n, law, r_star, lambda)?,
    })
}

/// Thin-shell competitor with linear profile of slope `Θ'(1)/2` on `B_{1+ε}∖B_1`.
pub fn perturbation_expansion(
    n: usize,
    law: &DissipationLaw,
    eps: f64,
) -> Result<PerturbationExpansion> {
    check_dim(n)?;
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::Domain { value: eps, domain: "(0, 0.5)" });
    }
    let d1 = law.derivative(1.0)?;
    let theta1 = law.value(1.0);
    let omega = unit_ball_volume(n);
    let per1 = unit_sphere_area(n);
    let outer = 1.0 + eps;
    let trace = (1.0 - 0.5 * d1 * eps).clamp(0.0, 1.0);
    let energy_eps = per1 * outer.powi(n as i32 - 1) * law.value(trace)
        + omega * (outer.powi(n as i32) - 1.0) * d1 * d1 / 4.0;
    let first_order_coeff = ((n as f64 - 1.0) * theta1 - 0.25 * d1 * d1) * per1;
    Ok(PerturbationExpansion { energy_eps, first_order_coeff })
}

/// `max |∇u*|/u*` over a radial grid of `[1, R]` for the convection state.
pub fn gradient_ratio_max(n: usize, beta: f64, r: f64) -> Result<f64> {
    check_dim(n)?;
    check_beta(beta)?;
    if !(r > 1.0 && r.is_finite()) {
        return Err(Error::Domain { value: r, domain: "(1, ∞)" });
    }
    Ok(linspace(1.0, r, GRADIENT_RATIO_POINTS)
        .into_iter()
        .map(|rho| convection_gradient_ratio(n, beta, r, rho))
        .fold(f64::NEG_INFINITY, f64::max))
}
