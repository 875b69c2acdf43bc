//! Star-shaped boundaries given by truncated Fourier radius functions.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximal truncation order of a radius function.
pub const MAX_FOURIER_ORDER: usize = 16;
/// Minimal distance between the inner and outer boundary.
pub const GAP_MIN: f64 = 1e-3;

const CHECK_POINTS: usize = 1024;
const AREA_POINTS: usize = 4096;

/// `r(θ) = a0 + Σ_k (cos[k−1]·cos kθ + sin[k−1]·sin kθ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierRadius {
    pub a0: f64,
    #[serde(default)]
    pub cos: Vec<f64>,
    #[serde(default)]
    pub sin: Vec<f64>,
}

impl FourierRadius {
    pub fn circle(radius: f64) -> Self {
        Self { a0: radius, cos: Vec::new(), sin: Vec::new() }
    }

    pub fn new(a0: f64, cos: Vec<f64>, sin: Vec<f64>) -> Self {
        let mut r = Self { a0, cos, sin };
        r.pad_to(r.order());
        r
    }

    pub fn order(&self) -> usize {
        self.cos.len().max(self.sin.len())
    }

    pub fn pad_to(&mut self, order: usize) {
        self.cos.resize(order.max(self.cos.len()), 0.0);
        self.sin.resize(order.max(self.sin.len()), 0.0);
    }

    pub fn padded(&self, order: usize) -> Self {
        let mut r = self.clone();
        r.pad_to(order);
        r
    }

    pub fn eval(&self, theta: f64) -> f64 {
        let mut r = self.a0;
        for (k, (&a, &b)) in self.cos.iter().zip(&self.sin).enumerate() {
            let kt = (k + 1) as f64 * theta;
            r += a * kt.cos() + b * kt.sin();
        }
        r
    }

    /// `r'(θ)`.
    pub fn derivative(&self, theta: f64) -> f64 {
        let mut d = 0.0;
        for (k, (&a, &b)) in self.cos.iter().zip(&self.sin).enumerate() {
            let kf = (k + 1) as f64;
            let kt = kf * theta;
            d += kf * (b * kt.cos() - a * kt.sin());
        }
        d
    }

    /// Enclosed area `½∫r²dθ` by the trapezoid rule on 4096 points.
    pub fn area(&self) -> f64 {
        let h = 2.0 * PI / AREA_POINTS as f64;
        0.5 * h
            * (0..AREA_POINTS)
                .map(|i| self.eval(i as f64 * h).powi(2))
                .sum::<f64>()
    }

    /// Boundary length `∫√(r² + r'²)dθ`.
    pub fn perimeter(&self) -> f64 {
        let h = 2.0 * PI / AREA_POINTS as f64;
        h * (0..AREA_POINTS)
            .map(|i| {
                let t = i as f64 * h;
                self.eval(t).hypot(self.derivative(t))
            })
            .sum::<f64>()
    }

    pub fn scaled(&self, t: f64) -> Self {
        Self {
            a0: self.a0 * t,
            cos: self.cos.iter().map(|c| c * t).collect(),
            sin: self.sin.iter().map(|c| c * t).collect(),
        }
    }

    /// The radius function of the set rotated by `phi`, i.e. `θ ↦ r(θ − φ)`.
    pub fn rotated(&self, phi: f64) -> Self {
        let mut cos = Vec::with_capacity(self.order());
        let mut sin = Vec::with_capacity(self.order());
        for (k, (&a, &b)) in self.cos.iter().zip(&self.sin).enumerate() {
            let kp = (k + 1) as f64 * phi;
            let (s, c) = kp.sin_cos();
            cos.push(a * c - b * s);
            sin.push(a * s + b * c);
        }
        Self { a0: self.a0, cos, sin }
    }

    /// Largest `|coefficient|/a0` over the nonconstant modes.
    pub fn asymmetry(&self) -> f64 {
        self.cos
            .iter()
            .chain(&self.sin)
            .fold(0.0f64, |m, c| m.max(c.abs()))
            / self.a0.abs()
    }

    pub fn min_on_grid(&self) -> f64 {
        (0..CHECK_POINTS)
            .map(|i| self.eval(2.0 * PI * i as f64 / CHECK_POINTS as f64))
            .fold(f64::INFINITY, f64::min)
    }

    /// Coefficients as `[a0, cos.., sin..]`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(1 + 2 * self.order());
        v.push(self.a0);
        v.extend(&self.cos);
        v.extend(&self.sin);
        v
    }

    pub fn from_slice(coeffs: &[f64], order: usize) -> Self {
        assert_eq!(coeffs.len(), 1 + 2 * order);
        Self {
            a0: coeffs[0],
            cos: coeffs[1..1 + order].to_vec(),
            sin: coeffs[1 + order..].to_vec(),
        }
    }
}

/// Nested star-shaped pair `K ⊂ Ω` centred at the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PairSpec", into = "PairSpec")]
pub struct StarPair {
    inner: FourierRadius,
    outer: FourierRadius,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairSpec {
    pub inner: FourierRadius,
    pub outer: FourierRadius,
}

impl TryFrom<PairSpec> for StarPair {
    type Error = Error;
    fn try_from(spec: PairSpec) -> Result<Self> {
        StarPair::new(spec.inner, spec.outer)
    }
}

impl From<StarPair> for PairSpec {
    fn from(p: StarPair) -> Self {
        PairSpec { inner: p.inner, outer: p.outer }
    }
}

impl StarPair {
    /// Builds a pair, padding both radius functions to a common order and
    /// checking positivity and the minimal gap on a 1024-point grid.
    pub fn new(inner: FourierRadius, outer: FourierRadius) -> Result<Self> {
        Self::with_min_gap(inner, outer, GAP_MIN)
    }

    /// Like [`StarPair::new`] with a different lower bound on the gap.
    pub(crate) fn with_min_gap(inner: FourierRadius, outer: FourierRadius, min_gap: f64) -> Result<Self> {
        let order = inner.order().max(outer.order());
        if order > MAX_FOURIER_ORDER {
            return Err(Error::Geometry(format!(
                "Fourier order {order} exceeds {MAX_FOURIER_ORDER}"
            )));
        }
        let pair = Self { inner: inner.padded(order), outer: outer.padded(order) };
        if pair
            .inner
            .to_vec()
            .iter()
            .chain(pair.outer.to_vec().iter())
            .any(|c| !c.is_finite())
        {
            return Err(Error::Geometry("non-finite coefficient".into()));
        }
        if pair.inner.min_on_grid() <= 0.0 {
            return Err(Error::Geometry("inner radius must be positive".into()));
        }
        let gap = pair.gap();
        if gap < min_gap * (1.0 - 1e-9) {
            return Err(Error::Geometry(format!(
                "gap {gap:.3e} between the boundaries is below {min_gap:e}"
            )));
        }
        Ok(pair)
    }

    pub fn circles(r_inner: f64, r_outer: f64) -> Result<Self> {
        Self::new(FourierRadius::circle(r_inner), FourierRadius::circle(r_outer))
    }

    pub fn inner(&self) -> &FourierRadius {
        &self.inner
    }

    pub fn outer(&self) -> &FourierRadius {
        &self.outer
    }

    pub fn order(&self) -> usize {
        self.inner.order()
    }

    /// Minimum of `r_Ω − r_K` on the check grid.
    pub fn gap(&self) -> f64 {
        (0..CHECK_POINTS)
            .map(|i| {
                let t = 2.0 * PI * i as f64 / CHECK_POINTS as f64;
                self.outer.eval(t) - self.inner.eval(t)
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn scaled(&self, t: f64) -> Result<Self> {
        if !(t > 0.0) {
            return Err(Error::Geometry(format!("scale factor must be positive, got {t}")));
        }
        Self::new(self.inner.scaled(t), self.outer.scaled(t))
    }

    pub fn rotated(&self, phi: f64) -> Result<Self> {
        Self::new(self.inner.rotated(phi), self.outer.rotated(phi))
    }

    pub fn padded(&self, order: usize) -> Result<Self> {
        Self::new(self.inner.padded(order), self.outer.padded(order))
    }

    /// Isoperimetric-type asymmetry of the pair: the larger of the two
    /// boundaries' normalized nonconstant Fourier magnitudes.
    pub fn deficit(&self) -> f64 {
        self.inner.asymmetry().max(self.outer.asymmetry())
    }

    /// Physical position of the mesh coordinate `(s, θ)`.
    pub fn map(&self, s: f64, theta: f64) -> (f64, f64) {
        let rho = self.radius_at(s, theta);
        (rho * theta.cos(), rho * theta.sin())
    }

    pub fn radius_at(&self, s: f64, theta: f64) -> f64 {
        let a = self.inner.eval(theta);
        a + s * (self.outer.eval(theta) - a)
    }

    /// Coefficients as `[inner.., outer..]`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.inner.to_vec();
        v.extend(self.outer.to_vec());
        v
    }

    pub fn from_slice(coeffs: &[f64], order: usize) -> Result<Self> {
        Self::from_slice_with_min_gap(coeffs, order, GAP_MIN)
    }

    pub(crate) fn from_slice_with_min_gap(coeffs: &[f64], order: usize, min_gap: f64) -> Result<Self> {
        let half = 1 + 2 * order;
        if coeffs.len() != 2 * half {
            return Err(Error::Geometry(format!(
                "expected {} coefficients for order {order}, got {}",
                2 * half,
                coeffs.len()
            )));
        }
        Self::with_min_gap(
            FourierRadius::from_slice(&coeffs[..half], order),
            FourierRadius::from_slice(&coeffs[half..], order),
            min_gap,
        )
    }
}

/// Area of a radius function, `½∫r²dθ`.
pub fn area(shape: &FourierRadius) -> f64 {
    shape.area()
}

/// Rescales a radius function so that it encloses area `π`.
pub fn project_inner_volume(shape: &FourierRadius) -> FourierRadius {
    shape.scaled((PI / shape.area()).sqrt())
}
