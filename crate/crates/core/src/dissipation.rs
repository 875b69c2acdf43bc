//! Boundary dissipation laws `Θ : [0,1] → [0,∞)`.
//!
//! A law is lower semicontinuous, nondecreasing and vanishes at zero. The
//! closed-form variants cover convection, radiation, constant flux,
//! homogeneous powers and a surface cost that jumps at zero; tabulated laws
//! are evaluated through their nondecreasing left-continuous lower envelope.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{adaptive_simpson, unit_ball_volume};

/// Number of grid points used by the monotonicity check run on construction.
pub const MONOTONE_CHECK_POINTS: usize = 1024;

const TABULATED_FD_STEP: f64 = 1e-6;

/// A boundary dissipation law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LawSpec", into = "LawSpec")]
pub enum DissipationLaw {
    /// `β u²`.
    Convection { beta: f64 },
    /// `u⁵/5 + γu⁴ + 2γ²u³ + 2γ³u²` with `γ = T_e/(T_K − T_e)`.
    Radiation { gamma: f64 },
    /// `c u`.
    Linear { c: f64 },
    /// `c u^α`.
    Power { c: f64, alpha: f64 },
    /// `c1·1_{u>0} + c2 u^α`.
    SurfaceCost { c1: f64, c2: f64, alpha: f64 },
    Tabulated(TabulatedLaw),
}

/// Piecewise-linear law given by knots `(u, Θ(u))`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedLaw {
    knots: Vec<(f64, f64)>,
    // suffix_min[i] = min_{j >= i} knots[j].1
    suffix_min: Vec<f64>,
}

impl TabulatedLaw {
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::InvalidParameter(
                "tabulated law needs at least two knots".into(),
            ));
        }
        for w in knots.windows(2) {
            if !(w[0].0 <= w[1].0) {
                return Err(Error::InvalidParameter(
                    "tabulated knots must be sorted by u".into(),
                ));
            }
        }
        if knots[0] != (0.0, 0.0) {
            return Err(Error::InvalidParameter(
                "tabulated law must start at the knot (0, 0)".into(),
            ));
        }
        if knots.last().unwrap().0 != 1.0 {
            return Err(Error::InvalidParameter(
                "tabulated law must end at u = 1".into(),
            ));
        }
        if knots
            .iter()
            .any(|&(u, v)| !u.is_finite() || !v.is_finite() || v < 0.0 || u < 0.0)
        {
            return Err(Error::InvalidParameter(
                "tabulated knots must be finite and nonnegative".into(),
            ));
        }
        let mut suffix_min = vec![0.0; knots.len()];
        let mut running = f64::INFINITY;
        for (i, &(_, v)) in knots.iter().enumerate().rev() {
            running = running.min(v);
            suffix_min[i] = running;
        }
        Ok(Self { knots, suffix_min })
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    fn value(&self, u: f64) -> f64 {
        let j = self.knots.partition_point(|k| k.0 < u);
        if j >= self.knots.len() {
            return self.suffix_min[self.knots.len() - 1];
        }
        let tail = self.suffix_min[j];
        if j > 0 && self.knots[j].0 > u {
            let (u0, v0) = self.knots[j - 1];
            let (u1, v1) = self.knots[j];
            let interp = v0 + (v1 - v0) * (u - u0) / (u1 - u0);
            interp.min(tail)
        } else {
            tail
        }
    }
}

/// Wire format of a law.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LawSpec {
    Convection { beta: f64 },
    Radiation { gamma: f64 },
    Linear { c: f64 },
    Power { c: f64, alpha: f64 },
    SurfaceCost { c1: f64, c2: f64, alpha: f64 },
    Tabulated { knots: Vec<[f64; 2]> },
}

impl TryFrom<LawSpec> for DissipationLaw {
    type Error = Error;

    fn try_from(spec: LawSpec) -> Result<Self> {
        let law = match spec {
            LawSpec::Convection { beta } => DissipationLaw::Convection { beta },
            LawSpec::Radiation { gamma } => DissipationLaw::Radiation { gamma },
            LawSpec::Linear { c } => DissipationLaw::Linear { c },
            LawSpec::Power { c, alpha } => DissipationLaw::Power { c, alpha },
            LawSpec::SurfaceCost { c1, c2, alpha } => DissipationLaw::SurfaceCost { c1, c2, alpha },
            LawSpec::Tabulated { knots } => DissipationLaw::Tabulated(TabulatedLaw::new(
                knots.into_iter().map(|[u, v]| (u, v)).collect(),
            )?),
        };
        law.validate()?;
        Ok(law)
    }
}

impl From<DissipationLaw> for LawSpec {
    fn from(law: DissipationLaw) -> Self {
        match law {
            DissipationLaw::Convection { beta } => LawSpec::Convection { beta },
            DissipationLaw::Radiation { gamma } => LawSpec::Radiation { gamma },
            DissipationLaw::Linear { c } => LawSpec::Linear { c },
            DissipationLaw::Power { c, alpha } => LawSpec::Power { c, alpha },
            DissipationLaw::SurfaceCost { c1, c2, alpha } => LawSpec::SurfaceCost { c1, c2, alpha },
            DissipationLaw::Tabulated(t) => LawSpec::Tabulated {
                knots: t.knots.iter().map(|&(u, v)| [u, v]).collect(),
            },
        }
    }
}

/// Outcome of the flatness test `Θ'(1)²/Θ(1) < 4(n−1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlatCriterion {
    pub ratio: f64,
    pub bound: f64,
    pub flat_optimal_for_small_m: bool,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
    }
}

impl DissipationLaw {
    pub fn convection(beta: f64) -> Result<Self> {
        Self::checked(Self::Convection { beta })
    }

    pub fn radiation(gamma: f64) -> Result<Self> {
        Self::checked(Self::Radiation { gamma })
    }

    pub fn linear(c: f64) -> Result<Self> {
        Self::checked(Self::Linear { c })
    }

    pub fn power(c: f64, alpha: f64) -> Result<Self> {
        Self::checked(Self::Power { c, alpha })
    }

    pub fn surface_cost(c1: f64, c2: f64, alpha: f64) -> Result<Self> {
        Self::checked(Self::SurfaceCost { c1, c2, alpha })
    }

    pub fn tabulated(knots: Vec<(f64, f64)>) -> Result<Self> {
        Self::checked(Self::Tabulated(TabulatedLaw::new(knots)?))
    }

    /// The law `Θ ≡ 0`.
    pub fn zero() -> Self {
        Self::Tabulated(TabulatedLaw::new(vec![(0.0, 0.0), (1.0, 0.0)]).unwrap())
    }

    fn checked(law: Self) -> Result<Self> {
        law.validate()?;
        Ok(law)
    }

    /// Checks the parameters and runs the monotonicity/nonnegativity grid check.
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Convection { beta } => positive("beta", beta)?,
            Self::Radiation { gamma } => positive("gamma", gamma)?,
            Self::Linear { c } => positive("c", c)?,
            Self::Power { c, alpha } => {
                positive("c", c)?;
                positive("alpha", alpha)?;
            }
            Self::SurfaceCost { c1, c2, alpha } => {
                positive("c1", c1)?;
                positive("alpha", alpha)?;
                if !(c2.is_finite() && c2 >= 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "c2 must be nonnegative, got {c2}"
                    )));
                }
            }
            Self::Tabulated(_) => {}
        }
        if self.value(0.0) != 0.0 {
            return Err(Error::InvalidParameter("law must vanish at 0".into()));
        }
        let mut prev = 0.0;
        for i in 0..MONOTONE_CHECK_POINTS {
            let u = i as f64 / (MONOTONE_CHECK_POINTS - 1) as f64;
            let v = self.value(u);
            if !(v >= 0.0) || v < prev {
                return Err(Error::InvalidParameter(format!(
                    "law is not nonnegative and nondecreasing near u = {u}"
                )));
            }
            prev = v;
        }
        Ok(())
    }

    /// `Θ(u)` for `u ∈ [0, 1]`.
    pub fn eval(&self, u: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::Domain { value: u, domain: "[0, 1]" });
        }
        Ok(self.value(u))
    }

    /// Unchecked evaluation; arguments are clamped into `[0, 1]`.
    pub(crate) fn value(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match *self {
            Self::Convection { beta } => beta * u * u,
            Self::Radiation { gamma } => {
                let g = gamma;
                u * u * (2.0 * g * g * g + u * (2.0 * g * g + u * (g + u / 5.0)))
            }
            Self::Linear { c } => c * u,
            Self::Power { c, alpha } => c * u.powf(alpha),
            Self::SurfaceCost { c1, c2, alpha } => {
                if u > 0.0 {
                    c1 + c2 * u.powf(alpha)
                } else {
                    0.0
                }
            }
            Self::Tabulated(ref t) => t.value(u),
        }
    }

    /// `Θ'(u)`; analytic for closed forms, central differences for tabulated laws.
    pub fn derivative(&self, u: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::Domain { value: u, domain: "[0, 1]" });
        }
        match *self {
            Self::Convection { beta } => Ok(2.0 * beta * u),
            Self::Radiation { gamma: g } => {
                Ok(u * (4.0 * g * g * g + u * (6.0 * g * g + u * (4.0 * g + u))))
            }
            Self::Linear { c } => Ok(c),
            Self::Power { c, alpha } => power_derivative(c, alpha, u),
            Self::SurfaceCost { c1, c2, alpha } => {
                if u == 0.0 && c1 > 0.0 {
                    Err(Error::NonDifferentiable(u))
                } else {
                    power_derivative(c2, alpha, u)
                }
            }
            Self::Tabulated(ref t) => {
                let h = TABULATED_FD_STEP;
                let lo = (u - h).max(0.0);
                let hi = (u + h).min(1.0);
                Ok((t.value(hi) - t.value(lo)) / (hi - lo))
            }
        }
    }

    /// Finite slope used by the state solvers' gradients. Jumps are ignored,
    /// infinite slopes at 0 are capped.
    pub(crate) fn slope(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match *self {
            Self::Power { c, alpha } => c * alpha * u.max(1e-12).powf(alpha - 1.0),
            Self::SurfaceCost { c2, alpha, .. } => c2 * alpha * u.max(1e-12).powf(alpha - 1.0),
            Self::Tabulated(ref t) => {
                let h = 1e-7;
                let lo = (u - h).max(0.0);
                let hi = (u + h).min(1.0);
                (t.value(hi) - t.value(lo)) / (hi - lo)
            }
            _ => self.derivative(u).unwrap_or(0.0),
        }
    }

    /// Nonnegative second-derivative estimate used to precondition solvers.
    pub(crate) fn curvature(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let power_curv = |c: f64, alpha: f64| {
            if alpha > 1.0 {
                c * alpha * (alpha - 1.0) * u.max(1e-12).powf(alpha - 2.0)
            } else {
                0.0
            }
        };
        match *self {
            Self::Convection { beta } => 2.0 * beta,
            Self::Radiation { gamma: g } => {
                4.0 * g * g * g + u * (12.0 * g * g + u * (12.0 * g + 4.0 * u))
            }
            Self::Power { c, alpha } => power_curv(c, alpha),
            Self::SurfaceCost { c2, alpha, .. } => power_curv(c2, alpha),
            Self::Linear { .. } | Self::Tabulated(_) => 0.0,
        }
        .min(1e12)
    }

    /// `Θ(0⁺)`; positive exactly when the law jumps at the origin.
    pub fn jump_at_zero(&self) -> f64 {
        match *self {
            Self::SurfaceCost { c1, .. } => c1,
            Self::Tabulated(ref t) => t.value(f64::MIN_POSITIVE),
            _ => 0.0,
        }
    }

    /// `inf_{0<s≤1} Θ(s/3)/Θ(s)` over the logarithmic grid `s = 3^{−k/m}`.
    ///
    /// The grid spans twenty factors of three; ratios with `Θ(s) = 0` are skipped.
    pub fn hyp_theta_inf(&self, grid_size: usize) -> Result<f64> {
        if grid_size < 64 {
            return Err(Error::InvalidParameter(format!(
                "grid_size must be at least 64, got {grid_size}"
            )));
        }
        let per_factor = (grid_size / 20).max(1) as f64;
        let mut best: Option<f64> = None;
        for k in 0..grid_size {
            let s = 3f64.powf(-(k as f64) / per_factor);
            let denom = self.value(s);
            if denom > 0.0 {
                let r = self.value(s / 3.0) / denom;
                best = Some(best.map_or(r, |b: f64| b.min(r)));
            }
        }
        best.map(|b| b.clamp(0.0, 1.0)).ok_or(Error::DegenerateLaw)
    }

    /// Upper volume budget `ω_n + c_n·(inf Θ(s/3)/Θ(s))^{2n}·∫₀¹ t^{2n−1}/Θ(t)ⁿ dt`.
    ///
    /// Returns `+∞` when the integral diverges at the origin.
    pub fn volume_bound(&self, n: usize, c_n: f64) -> Result<f64> {
        if n < 2 {
            return Err(Error::InvalidParameter(format!("dimension must be ≥ 2, got {n}")));
        }
        positive("c_n", c_n)?;
        let ratio = self.hyp_theta_inf(1024)?;
        let omega = unit_ball_volume(n);
        let integrand = |t: f64| t.powi(2 * n as i32 - 1) / self.value(t).powi(n as i32);

        const EPS: f64 = 1e-8;
        let (f_lo, f_hi) = (integrand(EPS), integrand(10.0 * EPS));
        if !f_lo.is_finite() || !f_hi.is_finite() {
            return Ok(f64::INFINITY);
        }
        // local exponent p of f(t) ~ C t^p; ∫₀ diverges iff p ≤ −1
        let p = (f_hi / f_lo).log10();
        if p <= -1.0 + 1e-3 {
            return Ok(f64::INFINITY);
        }
        // t = e^x turns the singular endpoint into a long smooth tail
        let integral = adaptive_simpson(
            |x| {
                let t = x.exp();
                t * integrand(t)
            },
            EPS.ln(),
            0.0,
            1e-12,
        );
        if !integral.is_finite() {
            return Ok(f64::INFINITY);
        }
        Ok(omega + c_n * ratio.powi(2 * n as i32) * integral)
    }

    pub fn flat_criterion(&self, n: usize) -> Result<FlatCriterion> {
        let d = self.derivative(1.0)?;
        let theta1 = self.value(1.0);
        let ratio = d * d / theta1;
        let bound = 4.0 * (n as f64 - 1.0);
        Ok(FlatCriterion {
            ratio,
            bound,
            flat_optimal_for_small_m: ratio < bound,
        })
    }

    /// Tabulated approximation of `Θ^ε(u) = min((Θ(1)+ε)(u/ε)², Θ(u) + ε·1_{u>0})`.
    ///
    /// The quadratic branch is replaced by the envelope of its tangents at
    /// the sample points, so the table never exceeds `(Θ(1)+ε)(u/ε)²`
    /// between knots either.
    pub fn epsilon_regularize(&self, eps: f64) -> Result<DissipationLaw> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::Domain { value: eps, domain: "(0, 1)" });
        }
        let curv = (self.value(1.0) + eps) / (eps * eps);
        let mut samples: Vec<f64> = Vec::with_capacity(8192);
        let ratio: f64 = 1.01;
        let mut s = 1e-10;
        while s < 1.0 {
            samples.push(s);
            s *= ratio;
        }
        samples.extend((1..=2048).map(|k| k as f64 / 2048.0));
        samples.push(0.0);
        samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
        samples.dedup();

        let quad_env = |u: f64, left: f64, right: f64| -> f64 {
            // knot either at a tangent point or at the crossing of two tangents
            if u == left || u == right {
                curv * u * u
            } else {
                curv * left * right
            }
        };
        let mut knots = Vec::with_capacity(2 * samples.len());
        knots.push((0.0, 0.0));
        for w in samples.windows(2) {
            let (a, b) = (w[0], w[1]);
            let mid = 0.5 * (a + b);
            let second = |u: f64| self.value(u) + eps;
            knots.push((mid, quad_env(mid, a, b).min(second(mid))));
            knots.push((b, quad_env(b, a, b).min(second(b))));
        }
        DissipationLaw::tabulated(knots)
    }
}

fn power_derivative(c: f64, alpha: f64, u: f64) -> Result<f64> {
    if c == 0.0 {
        return Ok(0.0);
    }
    if u == 0.0 {
        if alpha < 1.0 {
            return Err(Error::NonDifferentiable(u));
        }
        return Ok(if alpha == 1.0 { c } else { 0.0 });
    }
    Ok(c * alpha * u.powf(alpha - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn all_laws() -> Vec<DissipationLaw> {
        vec![
            DissipationLaw::convection(1.0).unwrap(),
            DissipationLaw::convection(0.25).unwrap(),
            DissipationLaw::radiation(1.0).unwrap(),
            DissipationLaw::radiation(0.3).unwrap(),
            DissipationLaw::linear(2.0).unwrap(),
            DissipationLaw::power(1.0, 0.5).unwrap(),
            DissipationLaw::power(3.0, 3.0).unwrap(),
            DissipationLaw::surface_cost(2.0, 0.0, 1.0).unwrap(),
            DissipationLaw::surface_cost(1.0, 1.0, 2.0).unwrap(),
            DissipationLaw::tabulated(vec![(0.0, 0.0), (0.5, 0.1), (1.0, 2.0)]).unwrap(),
            DissipationLaw::zero(),
        ]
    }

    #[test]
    fn eval_examples() {
        let conv = DissipationLaw::convection(1.0).unwrap();
        assert_eq!(conv.eval(1.0).unwrap(), 1.0);
        let rad = DissipationLaw::radiation(1.0).unwrap();
        assert!((rad.eval(1.0).unwrap() - 5.2).abs() < 1e-14);
        let sc = DissipationLaw::surface_cost(2.0, 0.0, 1.0).unwrap();
        assert_eq!(sc.eval(0.0).unwrap(), 0.0);
        assert_eq!(sc.eval(1e-9).unwrap(), 2.0);
    }

    #[test]
    fn eval_rejects_out_of_range() {
        let conv = DissipationLaw::convection(1.0).unwrap();
        assert!(matches!(conv.eval(1.5), Err(Error::Domain { .. })));
        assert!(matches!(conv.eval(-0.1), Err(Error::Domain { .. })));
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(DissipationLaw::convection(0.0).is_err());
        assert!(DissipationLaw::power(1.0, -1.0).is_err());
        assert!(DissipationLaw::surface_cost(1.0, -1.0, 1.0).is_err());
        assert!(DissipationLaw::tabulated(vec![(0.0, 0.1), (1.0, 1.0)]).is_err());
        assert!(DissipationLaw::tabulated(vec![(0.0, 0.0), (0.5, 1.0)]).is_err());
        assert!(DissipationLaw::tabulated(vec![(0.0, 0.0), (0.7, 1.0), (0.2, 1.0), (1.0, 1.0)]).is_err());
    }

    #[test]
    fn derivative_examples() {
        let conv = DissipationLaw::convection(2.0).unwrap();
        assert!((conv.derivative(0.5).unwrap() - 2.0).abs() < 1e-15);
        let rad = DissipationLaw::radiation(1.0).unwrap();
        assert!((rad.derivative(1.0).unwrap() - 15.0).abs() < 1e-13);
        let sc = DissipationLaw::surface_cost(1.0, 1.0, 1.0).unwrap();
        assert!(matches!(sc.derivative(0.0), Err(Error::NonDifferentiable(_))));
        assert!((sc.derivative(0.5).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn radiation_derivative_matches_finite_difference() {
        let rad = DissipationLaw::radiation(0.7).unwrap();
        for &u in &[0.1, 0.4, 0.9] {
            let h = 1e-6;
            let fd = (rad.value(u + h) - rad.value(u - h)) / (2.0 * h);
            assert!((rad.derivative(u).unwrap() - fd).abs() < 1e-7);
        }
    }

    #[test]
    fn tabulated_derivative_by_central_difference() {
        let t = DissipationLaw::tabulated(vec![(0.0, 0.0), (0.5, 1.0), (1.0, 3.0)]).unwrap();
        assert!((t.derivative(0.25).unwrap() - 2.0).abs() < 1e-6);
        assert!((t.derivative(0.75).unwrap() - 4.0).abs() < 1e-6);
        // one-sided at the ends
        assert!((t.derivative(1.0).unwrap() - 4.0).abs() < 1e-6);
        assert!((t.derivative(0.0).unwrap() - 2.0).abs() < 1e-6);
    }

    #[test]
    fn tabulated_envelope_is_monotone_and_left_continuous() {
        // a dip and a jump at 0.5
        let t = TabulatedLaw::new(vec![(0.0, 0.0), (0.3, 1.0), (0.5, 0.5), (0.5, 2.0), (1.0, 2.0)])
            .unwrap();
        assert!((t.value(0.3) - 0.5).abs() < 1e-15);
        assert!((t.value(0.5) - 0.5).abs() < 1e-15);
        assert!((t.value(0.5 + 1e-12) - 2.0).abs() < 1e-9);
        assert!((t.value(0.15) - 0.5).abs() < 1e-15);
        assert!((t.value(0.1) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn every_variant_is_monotone_and_vanishes_at_zero() {
        for law in all_laws() {
            assert_eq!(law.eval(0.0).unwrap(), 0.0, "{law:?}");
            let mut prev = 0.0;
            for i in 0..MONOTONE_CHECK_POINTS {
                let u = i as f64 / (MONOTONE_CHECK_POINTS - 1) as f64;
                let v = law.eval(u).unwrap();
                assert!(v >= prev && v >= 0.0, "{law:?} at {u}");
                prev = v;
            }
        }
    }

    #[test]
    fn hyp_theta_inf_examples() {
        for beta in [0.1, 1.0, 7.0] {
            let conv = DissipationLaw::convection(beta).unwrap();
            for grid in [64, 100, 1024] {
                let v = conv.hyp_theta_inf(grid).unwrap();
                assert!((v - 1.0 / 9.0).abs() < 1e-15, "{v}");
            }
        }
        let lin = DissipationLaw::power(1.0, 1.0).unwrap();
        assert!((lin.hyp_theta_inf(256).unwrap() - 1.0 / 3.0).abs() < 1e-14);
        let rad = DissipationLaw::radiation(1.0).unwrap();
        let v = rad.hyp_theta_inf(1024).unwrap();
        assert!((v - 0.0595).abs() < 0.002, "{v}");
        // the s = 1 ratio is the minimizer
        assert!((v - rad.value(1.0 / 3.0) / 5.2).abs() < 1e-12);
        assert!(DissipationLaw::zero().hyp_theta_inf(64).is_err());
        assert!(lin.hyp_theta_inf(10).is_err());
    }

    #[test]
    fn volume_bound_examples() {
        let conv = DissipationLaw::convection(1.0).unwrap();
        assert!(conv.volume_bound(2, 1.0).unwrap().is_infinite());
        let rad = DissipationLaw::radiation(1.0).unwrap();
        assert!(rad.volume_bound(2, 1.0).unwrap().is_infinite());

        // ∫₀¹ t³/t² dt = 1/2, ratio 1/3
        let lin = DissipationLaw::power(1.0, 1.0).unwrap();
        let v = lin.volume_bound(2, 1.0).unwrap();
        assert!((v - (PI + 1.0 / 162.0)).abs() < 1e-9, "{v}");

        // Θ ≡ 1 on (0,1]: ratio 1, ∫ t³ = 1/4
        let sc = DissipationLaw::surface_cost(1.0, 0.0, 1.0).unwrap();
        let v = sc.volume_bound(2, 1.0).unwrap();
        assert!((v - (PI + 0.25)).abs() < 1e-9, "{v}");
    }

    #[test]
    fn volume_bound_matches_independent_quadrature() {
        // Power(2, 1.5), n = 2: integrand t³/(4 t³) = 1/4 on (0,1]
        let law = DissipationLaw::power(2.0, 1.5).unwrap();
        let ratio = law.hyp_theta_inf(1024).unwrap();
        let mut midpoint = 0.0;
        let m = 200_000;
        for i in 0..m {
            let t = (i as f64 + 0.5) / m as f64;
            midpoint += t.powi(3) / law.value(t).powi(2) / m as f64;
        }
        let expected = PI + 3.0 * ratio.powi(4) * midpoint;
        let got = law.volume_bound(2, 3.0).unwrap();
        assert!((got - expected).abs() < 1e-8, "{got} vs {expected}");
    }

    #[test]
    fn flat_criterion_examples() {
        let rad = DissipationLaw::radiation(1.0).unwrap();
        let fc = rad.flat_criterion(2).unwrap();
        assert!((fc.ratio - 225.0 / 5.2).abs() < 1e-10);
        assert_eq!(fc.bound, 4.0);
        assert!(!fc.flat_optimal_for_small_m);

        let conv = DissipationLaw::convection(1.5).unwrap();
        let fc = conv.flat_criterion(3).unwrap();
        assert!((fc.ratio - 6.0).abs() < 1e-12);
        assert_eq!(fc.bound, 8.0);
        assert!(fc.flat_optimal_for_small_m);

        let sc = DissipationLaw::surface_cost(1.0, 0.0, 0.5).unwrap();
        assert!((sc.flat_criterion(2).unwrap().ratio).abs() < 1e-15);
    }

    #[test]
    fn epsilon_regularize_examples() {
        let lin = DissipationLaw::linear(1.0).unwrap();
        let reg = lin.epsilon_regularize(0.5).unwrap();
        assert_eq!(reg.eval(0.0).unwrap(), 0.0);
        assert!((reg.eval(1.0).unwrap() - 1.5).abs() < 1e-12);
        if let DissipationLaw::Tabulated(t) = &reg {
            assert!(t.knots().len() >= 1024);
        } else {
            panic!("expected a tabulated law");
        }

        for law in all_laws() {
            let theta1 = law.value(1.0);
            let reg = law.epsilon_regularize(0.1).unwrap();
            assert!(reg.eval(0.001).unwrap() <= (theta1 + 0.1) * 1e-4 * (1.0 + 1e-12));
            let mut prev = 0.0;
            for i in 0..=4096 {
                let u = i as f64 / 4096.0;
                let v = reg.eval(u).unwrap();
                assert!(v <= (theta1 + 0.1) * (u / 0.1).powi(2) * (1.0 + 1e-12) + 1e-300);
                assert!(v >= prev);
                prev = v;
            }
            if let DissipationLaw::Tabulated(t) = &reg {
                for &(u, v) in t.knots() {
                    assert!(v <= law.value(u) + 0.1 + 1e-12);
                }
            }
        }
    }

    #[test]
    fn regularized_law_is_o_u_squared_and_satisfies_hypothesis() {
        let sc = DissipationLaw::surface_cost(1.0, 0.0, 1.0).unwrap();
        let reg = sc.epsilon_regularize(0.2).unwrap();
        assert!(reg.hyp_theta_inf(512).unwrap() > 0.0);
        assert!(reg.volume_bound(2, 1.0).unwrap().is_infinite());
    }

    #[test]
    fn json_round_trip_and_rejection() {
        let law: DissipationLaw = serde_json::from_str(r#"{"type":"convection","beta":1.0}"#).unwrap();
        assert_eq!(law, DissipationLaw::Convection { beta: 1.0 });
        let law: DissipationLaw =
            serde_json::from_str(r#"{"type":"surface_cost","c1":1.0,"c2":0.0,"alpha":1.0}"#).unwrap();
        assert_eq!(law.jump_at_zero(), 1.0);
        let law: DissipationLaw =
            serde_json::from_str(r#"{"type":"tabulated","knots":[[0,0],[1,2]]}"#).unwrap();
        assert!((law.eval(0.5).unwrap() - 1.0).abs() < 1e-15);
        let back = serde_json::to_string(&law).unwrap();
        assert_eq!(back, r#"{"type":"tabulated","knots":[[0.0,0.0],[1.0,2.0]]}"#);
        assert!(serde_json::from_str::<DissipationLaw>(r#"{"type":"convection","beta":-1}"#).is_err());
        assert!(serde_json::from_str::<DissipationLaw>(r#"{"type":"plasma"}"#).is_err());
    }
}
