//! Discrete versions of the level-set machinery used in the ball-optimality
//! argument: level decompositions, the `H(t, φ)` functional, the
//! dearrangement of the radial gradient ratio, single-threshold truncation
//! and the high-cutoff inequality.

use std::f64::consts::PI;
use std::io::Write;

use serde::Serialize;

use crate::annulus::{energy_of, gradient_magnitude, Assembly, Column, Mesh, ScalarField};
use crate::dissipation::DissipationLaw;
use crate::error::{Error, Result};
use crate::geometry::StarPair;
use crate::numeric::unit_ball_volume;
use crate::radial::convection_gradient_ratio;

/// Subcells per cell edge used for area integrals.
const SUBCELLS: usize = 4;
const HIGH_CUTOFF_POINTS: usize = 4096;

/// Real-valued nodal data on a mesh, e.g. a density `φ`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalField {
    pub mesh: Mesh,
    pub values: Vec<f64>,
}

impl NodalField {
    pub fn new(mesh: Mesh, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.len() {
            return Err(Error::MeshMismatch(format!(
                "{} values for a {}×{} mesh",
                values.len(),
                mesh.n_s,
                mesh.n_theta
            )));
        }
        Ok(Self { mesh, values })
    }

    pub fn constant(mesh: Mesh, value: f64) -> Self {
        Self { mesh, values: vec![value; mesh.len()] }
    }

    /// `|∇u|/u` of a field, node by node.
    pub fn gradient_ratio(field: &ScalarField) -> Self {
        let values = gradient_magnitude(field)
            .into_iter()
            .zip(field.values())
            .map(|(g, &u)| g / u.max(1e-300))
            .collect();
        Self { mesh: field.mesh(), values }
    }
}

/// Level data of a field on the annulus: `Ω_t = K ∪ {u > t}`, its interior
/// boundary `{u = t}` and its share of `∂Ω`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelDecomposition {
    pub levels: Vec<f64>,
    pub interior_length: Vec<f64>,
    pub exterior_length: Vec<f64>,
    /// Area of `{u > t}` inside the annulus.
    pub area: Vec<f64>,
    /// `(∫_{u=t} φ ds, ∫_{u>t} φ² dx)` per level once a density is accumulated.
    pub level_integrals: Option<Vec<(f64, f64)>>,
    #[serde(skip)]
    mesh: Mesh,
}

/// Subcell quadrature of the bilinear field: value, area weight and
/// Dirichlet density of every sample, in a fixed order.
struct Samples {
    u: Vec<f64>,
    weight: Vec<f64>,
    dirichlet: Vec<f64>,
}

impl Samples {
    fn new(field: &ScalarField) -> Self {
        let mesh = field.mesh();
        let (ns, nt) = (mesh.n_s, mesh.n_theta);
        let (ds, dt) = (mesh.ds(), mesh.dtheta());
        let q = SUBCELLS;
        let cap = (ns - 1) * nt * q * q;
        let (mut u, mut weight, mut dirichlet) =
            (Vec::with_capacity(cap), Vec::with_capacity(cap), Vec::with_capacity(cap));
        let cell_area = ds * dt / (q * q) as f64;
        for j in 0..nt {
            let j1 = (j + 1) % nt;
            for b in 0..q {
                let tau = (b as f64 + 0.5) / q as f64;
                let col = Column::at(field.pair(), mesh.theta(j) + tau * dt);
                for i in 0..ns - 1 {
                    let (u00, u10, u01, u11) =
                        (field.get(i, j), field.get(i + 1, j), field.get(i, j1), field.get(i + 1, j1));
                    for a in 0..q {
                        let sigma = (a as f64 + 0.5) / q as f64;
                        let s = mesh.s(i) + sigma * ds;
                        let v = bilinear(u00, u10, u01, u11, sigma, tau);
                        let us = ((1.0 - tau) * (u10 - u00) + tau * (u11 - u01)) / ds;
                        let ut = ((1.0 - sigma) * (u01 - u00) + sigma * (u11 - u10)) / dt;
                        let (wss, wst, wtt) = col.metric(s);
                        let rho = col.inner + s * col.width;
                        u.push(v);
                        weight.push(col.width * rho * cell_area);
                        dirichlet.push((wss * us * us + 2.0 * wst * us * ut + wtt * ut * ut) * cell_area);
                    }
                }
            }
        }
        Self { u, weight, dirichlet }
    }

    /// Samples of a nodal density in the same order as `u`.
    fn interpolate(mesh: Mesh, phi: &[f64]) -> Vec<f64> {
        let (ns, nt) = (mesh.n_s, mesh.n_theta);
        let q = SUBCELLS;
        let mut out = Vec::with_capacity((ns - 1) * nt * q * q);
        for j in 0..nt {
            let j1 = (j + 1) % nt;
            for b in 0..q {
                let tau = (b as f64 + 0.5) / q as f64;
                for i in 0..ns - 1 {
                    let at = |r: usize, c: usize| phi[r * nt + c];
                    for a in 0..q {
                        let sigma = (a as f64 + 0.5) / q as f64;
                        out.push(bilinear(at(i, j), at(i + 1, j), at(i, j1), at(i + 1, j1), sigma, tau));
                    }
                }
            }
        }
        out
    }
}

fn bilinear(u00: f64, u10: f64, u01: f64, u11: f64, sigma: f64, tau: f64) -> f64 {
    (1.0 - sigma) * (1.0 - tau) * u00 + sigma * (1.0 - tau) * u10 + (1.0 - sigma) * tau * u01 + sigma * tau * u11
}

/// Length of `{u = t}` by marching segments and, if given, `∫_{u=t} φ ds`.
fn contour(field: &ScalarField, t: f64, phi: Option<&[f64]>) -> (f64, f64) {
    let mesh = field.mesh();
    let (ns, nt) = (mesh.n_s, mesh.n_theta);
    let (ds, dt) = (mesh.ds(), mesh.dtheta());
    let pair = field.pair();
    let values = field.values();
    let phi_at = |p: usize| phi.map_or(0.0, |f| f[p]);
    let mut length = 0.0;
    let mut integral = 0.0;
    for i in 0..ns - 1 {
        for j in 0..nt {
            let j1 = (j + 1) % nt;
            // corners counter-clockwise in (s, θ): (i,j), (i+1,j), (i+1,j1), (i,j1)
            let idx = [mesh.index(i, j), mesh.index(i + 1, j), mesh.index(i + 1, j1), mesh.index(i, j1)];
            let st = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
            let above: Vec<bool> = idx.iter().map(|&p| values[p] > t).collect();
            let mut crossings: Vec<((f64, f64), f64)> = Vec::with_capacity(4);
            for e in 0..4 {
                let (a, b) = (e, (e + 1) % 4);
                if above[a] != above[b] {
                    let (va, vb) = (values[idx[a]], values[idx[b]]);
                    let w = ((t - va) / (vb - va)).clamp(0.0, 1.0);
                    let s = mesh.s(i) + ds * (st[a].0 + w * (st[b].0 - st[a].0));
                    let th = mesh.theta(j) + dt * (st[a].1 + w * (st[b].1 - st[a].1));
                    let f = phi_at(idx[a]) + w * (phi_at(idx[b]) - phi_at(idx[a]));
                    crossings.push((pair.map(s, th), f));
                }
            }
            let segments: Vec<(usize, usize)> = match crossings.len() {
                2 => vec![(0, 1)],
                4 => {
                    let centre = idx.iter().map(|&p| values[p]).sum::<f64>() / 4.0;
                    // saddle: cut off the two corners not joined through the centre
                    if (centre > t) == above[0] {
                        vec![(0, 1), (2, 3)]
                    } else {
                        vec![(3, 0), (1, 2)]
                    }
                }
                _ => Vec::new(),
            };
            for (a, b) in segments {
                let ((pa, fa), (pb, fb)) = (crossings[a], crossings[b]);
                let len = (pa.0 - pb.0).hypot(pa.1 - pb.1);
                length += len;
                integral += 0.5 * len * (fa + fb);
            }
        }
    }
    (length, integral)
}

/// Uniform levels in `(min u, 1)`.
fn default_levels(field: &ScalarField, n_levels: usize) -> Result<Vec<f64>> {
    let lo = field.min();
    if 1.0 - lo < 1e-12 {
        return Err(Error::DegenerateField);
    }
    if n_levels == 0 {
        return Err(Error::InvalidParameter("need at least one level".into()));
    }
    Ok((0..n_levels)
        .map(|k| lo + (1.0 - lo) * (k as f64 + 0.5) / n_levels as f64)
        .collect())
}

/// Decomposition at `n_levels` uniform levels in `(min u, 1)`.
pub fn decompose_levels(field: &ScalarField, pair: &StarPair, n_levels: usize) -> Result<LevelDecomposition> {
    let levels = default_levels(field, n_levels)?;
    decompose_levels_at(field, pair, &levels)
}

/// Decomposition at given levels.
pub fn decompose_levels_at(field: &ScalarField, pair: &StarPair, levels: &[f64]) -> Result<LevelDecomposition> {
    if field.pair() != pair {
        return Err(Error::MeshMismatch("field was built on a different pair".into()));
    }
    let (lo, hi) = field
        .values()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if hi - lo < 1e-12 {
        return Err(Error::DegenerateField);
    }
    let mesh = field.mesh();
    let asm = Assembly::new(pair, mesh);
    let samples = Samples::new(field);
    let outer = field.outer_row();
    let mut dec = LevelDecomposition {
        levels: levels.to_vec(),
        interior_length: Vec::with_capacity(levels.len()),
        exterior_length: Vec::with_capacity(levels.len()),
        area: Vec::with_capacity(levels.len()),
        level_integrals: None,
        mesh,
    };
    for &t in levels {
        dec.interior_length.push(contour(field, t, None).0);
        dec.exterior_length.push(
            asm.boundary_weights()
                .iter()
                .zip(outer)
                .filter(|(_, &u)| u > t)
                .map(|(w, _)| w)
                .sum(),
        );
        dec.area.push(
            samples
                .u
                .iter()
                .zip(&samples.weight)
                .filter(|(&u, _)| u > t)
                .map(|(_, w)| w)
                .sum(),
        );
    }
    Ok(dec)
}

impl LevelDecomposition {
    /// Accumulates `∫_{u=t} φ ds` and `∫_{u>t} φ² dx` for every level.
    pub fn accumulate(&mut self, field: &ScalarField, phi: &NodalField) -> Result<()> {
        if phi.mesh != self.mesh || field.mesh() != self.mesh {
            return Err(Error::MeshMismatch(format!(
                "density on {}×{}, decomposition on {}×{}",
                phi.mesh.n_s, phi.mesh.n_theta, self.mesh.n_s, self.mesh.n_theta
            )));
        }
        let samples = Samples::new(field);
        let phi_s = Samples::interpolate(self.mesh, &phi.values);
        let integrals = self
            .levels
            .iter()
            .map(|&t| {
                let line = contour(field, t, Some(&phi.values)).1;
                let bulk = samples
                    .u
                    .iter()
                    .zip(&samples.weight)
                    .zip(&phi_s)
                    .filter(|((&u, _), _)| u > t)
                    .map(|((_, w), f)| w * f * f)
                    .sum();
                (line, bulk)
            })
            .collect();
        self.level_integrals = Some(integrals);
        Ok(())
    }

    pub fn mesh(&self) -> Mesh {
        self.mesh
    }

    /// Per-level CSV with columns `t, interior_length, exterior_length, area, H_value`.
    pub fn write_csv<W: Write>(&self, h: Option<&[f64]>, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,interior_length,exterior_length,area,H_value")?;
        for k in 0..self.levels.len() {
            let hv = h.and_then(|h| h.get(k)).map_or(String::new(), |v| v.to_string());
            writeln!(
                w,
                "{},{},{},{},{}",
                self.levels[k], self.interior_length[k], self.exterior_length[k], self.area[k], hv
            )?;
        }
        Ok(())
    }
}

/// `H(t, φ) = β·|∂ᵉΩ_t| + ∫_{∂ⁱΩ_t} φ − ∫_{Ω_t} φ²` per level.
pub fn h_function(dec: &LevelDecomposition, beta: f64) -> Result<Vec<f64>> {
    let integrals = dec
        .level_integrals
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("no density accumulated into the decomposition".into()))?;
    Ok(dec
        .exterior_length
        .iter()
        .zip(integrals)
        .map(|(ext, (line, bulk))| beta * ext + line - bulk)
        .collect())
}

/// Concentric convection configuration the dearrangement is taken from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadialReference {
    pub n: usize,
    pub beta: f64,
    pub outer_radius: f64,
}

/// `φ(x)`: the gradient ratio `|∇u*|/u*` of the reference state on the
/// sphere `∂B_r` with `|B_r| = |K| + |{u > u(x)}|`.
pub fn dearrangement(field: &ScalarField, pair: &StarPair, reference: RadialReference) -> Result<NodalField> {
    if reference.n != 2 {
        return Err(Error::InvalidParameter("the annulus solver is two-dimensional".into()));
    }
    if field.pair() != pair {
        return Err(Error::MeshMismatch("field was built on a different pair".into()));
    }
    if !(reference.beta > 0.0 && reference.outer_radius > 1.0) {
        return Err(Error::InvalidParameter(format!("invalid reference {reference:?}")));
    }
    let samples = Samples::new(field);
    let mut order: Vec<usize> = (0..samples.u.len()).collect();
    order.sort_by(|&a, &b| samples.u[b].total_cmp(&samples.u[a]));
    let sorted_u: Vec<f64> = order.iter().map(|&k| samples.u[k]).collect();
    let mut prefix = Vec::with_capacity(order.len() + 1);
    prefix.push(0.0);
    for &k in &order {
        prefix.push(prefix.last().unwrap() + samples.weight[k]);
    }
    let inner_area = pair.inner().area();
    let omega = unit_ball_volume(2);
    let r_big = reference.outer_radius;
    let values = field
        .values()
        .iter()
        .map(|&u| {
            let above = sorted_u.partition_point(|&v| v > u);
            let area = inner_area + prefix[above];
            let r = (area / omega).sqrt().clamp(1.0, r_big);
            convection_gradient_ratio(2, reference.beta, r_big, r)
        })
        .collect();
    Ok(NodalField { mesh: field.mesh(), values })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HInequalityReport {
    pub energy: f64,
    pub min_h: f64,
    pub weighted_integral: f64,
    pub passes: bool,
    #[serde(skip)]
    pub levels: Vec<f64>,
    #[serde(skip)]
    pub h: Vec<f64>,
}

/// Relative tolerance of the H-inequality check.
pub const H_TOLERANCE: f64 = 0.02;

/// Checks `min_t H(t, φ) ≤ E` and `∫₀¹ t(H − E) dt ≤ 0` with the dearranged
/// density of the concentric configuration of equal outer area.
pub fn h_inequality_check(field: &ScalarField, pair: &StarPair, beta: f64, n_levels: usize) -> Result<HInequalityReport> {
    let r = (pair.outer().area() / PI).sqrt();
    let phi = dearrangement(field, pair, RadialReference { n: 2, beta, outer_radius: r })?;
    h_inequality_check_with(field, pair, beta, n_levels, &phi)
}

/// [`h_inequality_check`] with a caller-supplied density `φ ≥ 0` on the annulus.
///
/// Below `min u` the level set is empty, `∂ᵉΩ_t = ∂Ω` and `H` is constant;
/// that segment is integrated exactly and the rest by the midpoint rule on
/// the uniform levels.
pub fn h_inequality_check_with(
    field: &ScalarField,
    pair: &StarPair,
    beta: f64,
    n_levels: usize,
    phi: &NodalField,
) -> Result<HInequalityReport> {
    if !(beta > 0.0) {
        return Err(Error::InvalidParameter(format!("beta must be positive, got {beta}")));
    }
    let energy = energy_of(field, pair, &DissipationLaw::convection(beta)?)?.total;
    let mut dec = decompose_levels(field, pair, n_levels)?;
    dec.accumulate(field, phi)?;
    let h = h_function(&dec, beta)?;

    let lo = field.min();
    let samples = Samples::new(field);
    let phi_s = Samples::interpolate(field.mesh(), &phi.values);
    let bulk: f64 = samples.weight.iter().zip(&phi_s).map(|(w, f)| w * f * f).sum();
    let h_low = beta * Assembly::new(pair, field.mesh()).boundary_weights().iter().sum::<f64>() - bulk;

    let dt = (1.0 - lo) / n_levels as f64;
    let weighted_integral = 0.5 * lo * lo * (h_low - energy)
        + dec.levels.iter().zip(&h).map(|(t, hv)| t * (hv - energy) * dt).sum::<f64>();
    let min_h = h.iter().copied().fold(if lo > 0.0 { h_low } else { f64::INFINITY }, f64::min);
    let tol = H_TOLERANCE * energy;
    Ok(HInequalityReport {
        energy,
        min_h,
        weighted_integral,
        passes: weighted_integral <= tol && min_h <= energy + tol,
        levels: dec.levels,
        h,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationReport {
    pub original_energy: f64,
    pub best_t: f64,
    pub best_energy: f64,
    pub improved: bool,
    #[serde(skip)]
    pub thresholds: Vec<f64>,
    #[serde(skip)]
    pub energies: Vec<f64>,
}

/// Relaxed energy of `u·1_{u>t}` for `t = k/n`, `k = 0..n`.
///
/// The cut adds a one-sided jump along `{u = t}` with density `Θ(t)`; the
/// Dirichlet energy below the threshold is removed by subcell quadrature.
pub fn truncation_scan(
    field: &ScalarField,
    pair: &StarPair,
    law: &DissipationLaw,
    n_thresholds: usize,
) -> Result<TruncationReport> {
    if n_thresholds == 0 {
        return Err(Error::InvalidParameter("need at least one threshold".into()));
    }
    let original = energy_of(field, pair, law)?;
    let asm = Assembly::new(pair, field.mesh());
    let samples = Samples::new(field);
    let outer = field.outer_row();
    let thresholds: Vec<f64> = (0..n_thresholds).map(|k| k as f64 / n_thresholds as f64).collect();
    let energies: Vec<f64> = thresholds
        .iter()
        .map(|&t| {
            if t == 0.0 {
                return original.total;
            }
            let cut: f64 = samples
                .u
                .iter()
                .zip(&samples.dirichlet)
                .filter(|(&u, _)| u <= t)
                .map(|(_, d)| d)
                .sum();
            let boundary: f64 = asm
                .boundary_weights()
                .iter()
                .zip(outer)
                .map(|(w, &u)| w * law.value(if u > t { u } else { 0.0 }))
                .sum();
            let crack = law.value(t) * contour(field, t, None).0;
            (original.dirichlet - cut).max(0.0) + boundary + crack
        })
        .collect();
    let (k, &best_energy) = energies
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty");
    Ok(TruncationReport {
        original_energy: original.total,
        best_t: thresholds[k],
        best_energy,
        improved: best_energy < original.total - 1e-12,
        thresholds,
        energies,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HighCutoff {
    /// Largest grid `δ` satisfying the inequality, 0 when none does.
    pub delta: f64,
    pub feasible: bool,
}

/// Largest `δ = k/4096 < 1` with `δ + C_n Θ(1) (M − ω_n)^{1/(2n)} / √Θ(δ) < 1`.
pub fn high_cutoff_bound(law: &DissipationLaw, n: usize, max_volume: f64, c_n: f64) -> Result<HighCutoff> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("dimension must be ≥ 2, got {n}")));
    }
    let omega = unit_ball_volume(n);
    if !(max_volume >= omega) {
        return Err(Error::InvalidParameter(format!("M must be at least ω_n = {omega}, got {max_volume}")));
    }
    if !(c_n > 0.0) {
        return Err(Error::InvalidParameter(format!("C_n must be positive, got {c_n}")));
    }
    let excess = (max_volume - omega).powf(1.0 / (2 * n) as f64);
    let theta1 = law.value(1.0);
    let holds = |delta: f64| {
        let term = if excess == 0.0 { 0.0 } else { c_n * theta1 * excess / law.value(delta).sqrt() };
        delta + term < 1.0
    };
    let best = (1..HIGH_CUTOFF_POINTS)
        .rev()
        .map(|k| k as f64 / HIGH_CUTOFF_POINTS as f64)
        .find(|&d| holds(d));
    Ok(HighCutoff { delta: best.unwrap_or(0.0), feasible: best.is_some() })
}
