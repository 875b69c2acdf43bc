//! Outer optimization over the Fourier coefficients of a nested pair.
//!
//! Both boundaries move. Shape gradients are central finite differences of
//! the discrete state energy (one warm-started solve per coefficient); each
//! trial point is pulled back onto the feasible set by the active
//! [`OptimizationMode`], and steps are accepted by backtracking on the total
//! objective.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::annulus::{solve_state_with, Mesh, ScalarField, SolverOptions, DEFAULT_MAX_ITERS};
use crate::dissipation::DissipationLaw;
use crate::error::{Error, Result};
use crate::geometry::{project_inner_volume, FourierRadius, StarPair, GAP_MIN};
use crate::radial::EnergyBreakdown;

/// Tuning of the descent loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizeOptions {
    pub fourier_order: usize,
    /// Largest coefficient change of the first trial step.
    pub initial_step: f64,
    pub backtrack: f64,
    pub min_step: f64,
    /// Relative finite-difference step for shape gradients.
    pub fd_step: f64,
    pub max_outer_iters: usize,
    pub volume_tolerance: f64,
    /// Stop once the projected gradient norm drops below this.
    pub grad_tol: f64,
    pub mesh: Mesh,
    /// Relative tolerance of every state solve.
    pub solve_tol: f64,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self {
            fourier_order: 4,
            initial_step: 0.05,
            backtrack: 0.5,
            min_step: 1e-10,
            fd_step: 1e-5,
            max_outer_iters: 500,
            volume_tolerance: 1e-8,
            grad_tol: 1e-6,
            mesh: Mesh { n_s: 32, n_theta: 128 },
            solve_tol: 1e-14,
        }
    }
}

impl OptimizeOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.initial_step,
            self.min_step,
            self.fd_step,
            self.volume_tolerance,
            self.grad_tol,
            self.solve_tol,
        ];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite()))
            || !(self.backtrack > 0.0 && self.backtrack < 1.0)
            || self.max_outer_iters == 0
            || self.fourier_order == 0
            || self.fourier_order > crate::geometry::MAX_FOURIER_ORDER
        {
            return Err(Error::InvalidParameter(format!("invalid optimizer options {self:?}")));
        }
        Mesh::new(self.mesh.n_s, self.mesh.n_theta)?;
        Ok(())
    }
}

/// Volume handling of one optimization problem.
pub trait OptimizationMode: Send + Sync {
    fn name(&self) -> &'static str;

    /// Additional objective term for a pair.
    fn penalty(&self, pair: &StarPair) -> f64;

    /// Maps raw coefficients onto the feasible set.
    fn project(&self, inner: FourierRadius, outer: FourierRadius) -> Result<StarPair>;

    /// Checks a projected initial pair.
    fn check_feasible(&self, pair: &StarPair, tol: f64) -> Result<()>;

    /// Upper bound on the outer area, if any.
    fn outer_area_bound(&self) -> Option<f64> {
        None
    }
}

/// `|K| = π`, `|Ω| ≤ M`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constrained {
    pub max_area: f64,
}

impl Constrained {
    pub fn new(max_area: f64) -> Result<Self> {
        if !(max_area > PI && max_area.is_finite()) {
            return Err(Error::InvalidParameter(format!("M must exceed π, got {max_area}")));
        }
        Ok(Self { max_area })
    }
}

impl OptimizationMode for Constrained {
    fn name(&self) -> &'static str {
        "constrained"
    }

    fn penalty(&self, _pair: &StarPair) -> f64 {
        0.0
    }

    fn project(&self, inner: FourierRadius, outer: FourierRadius) -> Result<StarPair> {
        let inner = project_inner_volume(&inner);
        let outer = if fourier_area(&outer) > self.max_area {
            shrink_to_area(&inner, &outer, self.max_area)
        } else {
            outer
        };
        StarPair::new(inner, outer)
    }

    fn check_feasible(&self, pair: &StarPair, tol: f64) -> Result<()> {
        let a = fourier_area(pair.outer());
        if a > self.max_area + tol {
            return Err(Error::InvalidParameter(format!(
                "initial outer area {a} exceeds M = {}",
                self.max_area
            )));
        }
        Ok(())
    }

    fn outer_area_bound(&self) -> Option<f64> {
        Some(self.max_area)
    }
}

/// `|K| = π` with the objective `E + λ(|Ω| − π)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Penalized {
    pub lambda: f64,
}

impl Penalized {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
        }
        Ok(Self { lambda })
    }
}

impl OptimizationMode for Penalized {
    fn name(&self) -> &'static str {
        "penalized"
    }

    fn penalty(&self, pair: &StarPair) -> f64 {
        self.lambda * (fourier_area(pair.outer()) - PI)
    }

    fn project(&self, inner: FourierRadius, outer: FourierRadius) -> Result<StarPair> {
        StarPair::new(project_inner_volume(&inner), outer)
    }

    fn check_feasible(&self, _pair: &StarPair, _tol: f64) -> Result<()> {
        Ok(())
    }
}

/// `½∫fg dθ` from the coefficients.
fn half_inner_product(f: &FourierRadius, g: &FourierRadius) -> f64 {
    let modes: f64 = f.cos.iter().zip(&g.cos).map(|(a, b)| a * b).sum::<f64>()
        + f.sin.iter().zip(&g.sin).map(|(a, b)| a * b).sum::<f64>();
    PI * f.a0 * g.a0 + 0.5 * PI * modes
}

/// Gradient of `½∫r²dθ` with respect to `[a0, cos.., sin..]`.
fn area_gradient(f: &FourierRadius) -> Vec<f64> {
    let mut g: Vec<f64> = f.to_vec().iter().map(|c| PI * c).collect();
    g[0] *= 2.0;
    g
}

/// Orthogonal projection of `v` onto the complement of the span of `normals`.
fn project_out(v: &[f64], normals: &[Vec<f64>]) -> Vec<f64> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(normals.len());
    for n in normals {
        let mut b = n.clone();
        for e in &basis {
            let c = dot(&b, e);
            b.iter_mut().zip(e).for_each(|(x, y)| *x -= c * y);
        }
        let len = norm(&b);
        if len > 1e-12 {
            b.iter_mut().for_each(|x| *x /= len);
            basis.push(b);
        }
    }
    let mut out = v.to_vec();
    for e in &basis {
        let c = dot(&out, e);
        out.iter_mut().zip(e).for_each(|(x, y)| *x -= c * y);
    }
    out
}

/// Exact area of a trigonometric radius function.
fn fourier_area(f: &FourierRadius) -> f64 {
    half_inner_product(f, f)
}

fn combine(f: &FourierRadius, g: &FourierRadius, a: f64, b: f64) -> FourierRadius {
    let order = f.order().max(g.order());
    let (f, g) = (f.padded(order), g.padded(order));
    FourierRadius {
        a0: a * f.a0 + b * g.a0,
        cos: f.cos.iter().zip(&g.cos).map(|(x, y)| a * x + b * y).collect(),
        sin: f.sin.iter().zip(&g.sin).map(|(x, y)| a * x + b * y).collect(),
    }
}

/// `inner + τ(outer − inner)` with `τ ∈ [0, 1]` chosen so the area equals `target`.
fn shrink_to_area(inner: &FourierRadius, outer: &FourierRadius, target: f64) -> FourierRadius {
    let d = combine(outer, inner, 1.0, -1.0);
    let (a, b, c) = (
        fourier_area(&d),
        2.0 * half_inner_product(inner, &d),
        fourier_area(inner) - target,
    );
    let tau = if a > 0.0 {
        (-b + (b * b - 4.0 * a * c).max(0.0).sqrt()) / (2.0 * a)
    } else {
        1.0
    };
    combine(inner, &d, 1.0, tau.clamp(0.0, 1.0))
}

/// One row of the optimization trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub iter: usize,
    pub energy: f64,
    pub dirichlet: f64,
    pub boundary: f64,
    pub penalty: f64,
    pub inner_area: f64,
    pub outer_area: f64,
    pub deficit: f64,
    pub step: f64,
}

pub const TRACE_HEADER: &str =
    "iter,energy,dirichlet,boundary,penalty,inner_area,outer_area,deficit,step";

pub fn write_trace<W: Write>(rows: &[TraceRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{TRACE_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.iter, r.energy, r.dirichlet, r.boundary, r.penalty, r.inner_area, r.outer_area, r.deficit, r.step
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimizeResult {
    pub pair: StarPair,
    /// Final objective split; after a collapse this is the cheaper of the
    /// thin-shell state and the `Ω = K` configuration.
    pub energy: EnergyBreakdown,
    pub deficit: f64,
    pub iterations: usize,
    /// The outer boundary reached `2·gap_min` from the inner one.
    pub collapsed: bool,
    /// `Θ(1)·Per(K)` of the final inner boundary, reported on collapse.
    pub contact_energy: Option<f64>,
    pub initial_energy: f64,
    /// Norm of the shape gradient tangent to the active constraints.
    pub gradient_norm: f64,
    /// The same norm at the projected initial pair.
    pub initial_gradient_norm: f64,
    #[serde(skip)]
    pub trace: Vec<TraceRow>,
}

/// Problem `min E_Θ(K,Ω)` over `|K| = π`, `|Ω| ≤ M`.
pub fn optimize_constrained(
    law: &DissipationLaw,
    max_area: f64,
    init: &StarPair,
    opts: &OptimizeOptions,
) -> Result<OptimizeResult> {
    optimize(law, &Constrained::new(max_area)?, init, opts)
}

/// Problem `min E_Θ(K,Ω) + λ|Ω∖K|` over `|K| = π`.
pub fn optimize_penalized(
    law: &DissipationLaw,
    lambda: f64,
    init: &StarPair,
    opts: &OptimizeOptions,
) -> Result<OptimizeResult> {
    optimize(law, &Penalized::new(lambda)?, init, opts)
}

struct Evaluator<'a> {
    law: &'a DissipationLaw,
    mode: &'a dyn OptimizationMode,
    opts: &'a OptimizeOptions,
    order: usize,
}

struct Point {
    pair: StarPair,
    coeffs: Vec<f64>,
    field: ScalarField,
    energy: EnergyBreakdown,
}

impl Evaluator<'_> {
    fn solver(&self) -> SolverOptions {
        SolverOptions { tol: self.opts.solve_tol, max_iters: DEFAULT_MAX_ITERS }
    }

    fn evaluate(&self, pair: StarPair, warm: Option<&[f64]>) -> Result<Point> {
        let sol = solve_state_with(&pair, self.law, self.opts.mesh, self.solver(), warm)?;
        let energy = sol.energy.with_penalty(self.mode.penalty(&pair));
        Ok(Point { coeffs: pair.to_vec(), pair, field: sol.field, energy })
    }

    /// Objective of raw, unprojected coefficients.
    fn raw_objective(&self, coeffs: &[f64], warm: &[f64]) -> Result<f64> {
        // probes may dip slightly below the minimal gap
        let pair = StarPair::from_slice_with_min_gap(coeffs, self.order, 0.5 * GAP_MIN)?;
        let sol = solve_state_with(&pair, self.law, self.opts.mesh, self.solver(), Some(warm))?;
        Ok(sol.energy.total + self.mode.penalty(&pair))
    }

    fn gradient(&self, at: &Point) -> Result<Vec<f64>> {
        let n = at.coeffs.len();
        let half = n / 2;
        (0..n)
            .into_par_iter()
            .map(|i| {
                let scale = at.coeffs[if i < half { 0 } else { half }].abs().max(1.0);
                let h = self.opts.fd_step * scale;
                let mut plus = at.coeffs.clone();
                let mut minus = at.coeffs.clone();
                plus[i] += h;
                minus[i] -= h;
                let warm = at.field.values();
                // one-sided next to the minimal gap
                match (self.raw_objective(&plus, warm), self.raw_objective(&minus, warm)) {
                    (Ok(p), Ok(m)) => Ok((p - m) / (2.0 * h)),
                    (Ok(p), Err(Error::Geometry(_))) => Ok((p - at.energy.total) / h),
                    (Err(Error::Geometry(_)), Ok(m)) => Ok((at.energy.total - m) / h),
                    (Err(e), _) | (_, Err(e)) => Err(e),
                }
            })
            .collect()
    }

    fn project(&self, coeffs: &[f64]) -> Result<StarPair> {
        let half = coeffs.len() / 2;
        let inner = FourierRadius::from_slice(&coeffs[..half], self.order);
        let outer = FourierRadius::from_slice(&coeffs[half..], self.order);
        self.mode.project(inner, outer)
    }

    /// Part of a displacement compatible with the active constraints: tangent
    /// to `|K| = π`, free of the common first-mode shift (a rigid translation
    /// to first order), and not increasing `|Ω|` once it sits at its bound.
    fn tangent_direction(&self, at: &Point, d: Vec<f64>) -> Vec<f64> {
        let n = d.len();
        let half = n / 2;
        let mut normals = Vec::with_capacity(4);
        let mut inner_normal = area_gradient(at.pair.inner());
        inner_normal.resize(n, 0.0);
        normals.push(inner_normal);
        for k in [1, 1 + self.order] {
            let mut v = vec![0.0; n];
            v[k] = 1.0;
            v[half + k] = 1.0;
            normals.push(v);
        }
        let projected = project_out(&d, &normals);
        if let Some(m) = self.mode.outer_area_bound() {
            let mut outer_normal = vec![0.0; half];
            outer_normal.extend(area_gradient(at.pair.outer()));
            if fourier_area(at.pair.outer()) >= m * (1.0 - 1e-10) && dot(&projected, &outer_normal) > 0.0 {
                normals.push(outer_normal);
                return project_out(&d, &normals);
            }
        }
        projected
    }

    fn tangent(&self, at: &Point, g: Vec<f64>) -> Vec<f64> {
        let neg: Vec<f64> = g.iter().map(|x| -x).collect();
        self.tangent_direction(at, neg).into_iter().map(|x| -x).collect()
    }
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

const ARMIJO: f64 = 1e-4;

fn trace_row(iter: usize, p: &Point, step: f64) -> TraceRow {
    TraceRow {
        iter,
        energy: p.energy.total,
        dirichlet: p.energy.dirichlet,
        boundary: p.energy.boundary,
        penalty: p.energy.penalty,
        inner_area: fourier_area(p.pair.inner()),
        outer_area: fourier_area(p.pair.outer()),
        deficit: p.pair.deficit(),
        step,
    }
}

/// Shifts the common first Fourier mode out of both boundaries, which
/// translates the pair to first order.
fn recentred(pair: &StarPair) -> Result<StarPair> {
    let (mut inner, mut outer) = (pair.inner().clone(), pair.outer().clone());
    if inner.order() > 0 {
        let mc = 0.5 * (inner.cos[0] + outer.cos[0]);
        let ms = 0.5 * (inner.sin[0] + outer.sin[0]);
        inner.cos[0] -= mc;
        outer.cos[0] -= mc;
        inner.sin[0] -= ms;
        outer.sin[0] -= ms;
    }
    StarPair::new(inner, outer)
}

/// Projected-gradient descent for any registered mode.
pub fn optimize(
    law: &DissipationLaw,
    mode: &dyn OptimizationMode,
    init: &StarPair,
    opts: &OptimizeOptions,
) -> Result<OptimizeResult> {
    opts.validate()?;
    let order = opts.fourier_order.max(init.order());
    let ev = Evaluator { law, mode, opts, order };
    let start = recentred(&init.padded(order)?)?;
    let normalized = StarPair::new(project_inner_volume(start.inner()), start.outer().clone())?;
    mode.check_feasible(&normalized, opts.volume_tolerance)?;
    let start = mode.project(start.inner().clone(), start.outer().clone())?;

    let mut cur = ev.evaluate(start, None)?;
    let initial_energy = cur.energy.total;
    let mut trace = vec![trace_row(0, &cur, 0.0)];
    let mut g = ev.tangent(&cur, ev.gradient(&cur)?);
    let mut iterations = 0;
    let mut collapsed = cur.pair.gap() <= 2.0 * GAP_MIN;
    let mut gradient_norm = norm(&g);
    let initial_gradient_norm = gradient_norm;
    // Barzilai–Borwein step from the last accepted move
    let mut bb: Option<f64> = None;

    while iterations < opts.max_outer_iters && !collapsed && gradient_norm >= opts.grad_tol {
        let cap = opts.initial_step / max_abs(&g).max(1e-300);
        let mut s = bb.map_or(cap, |b| b.min(cap));
        let slope = -dot(&g, &g);
        let mut accepted = None;
        while s >= opts.min_step {
            let trial: Vec<f64> = cur.coeffs.iter().zip(&g).map(|(c, gi)| c - s * gi).collect();
            if let Ok(pair) = ev.project(&trial) {
                let next = ev.evaluate(pair, Some(cur.field.values()))?;
                if next.energy.total < cur.energy.total
                    && next.energy.total <= cur.energy.total + ARMIJO * s * slope
                {
                    accepted = Some(next);
                    break;
                }
            }
            s *= opts.backtrack;
        }
        let Some(next) = accepted else { break };
        iterations += 1;
        trace.push(trace_row(iterations, &next, s));
        let g_next = ev.tangent(&next, ev.gradient(&next)?);
        let dx: Vec<f64> = next.coeffs.iter().zip(&cur.coeffs).map(|(a, b)| a - b).collect();
        let dg: Vec<f64> = g_next.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&dx, &dg);
        bb = (sy > 0.0).then(|| dot(&dx, &dx) / sy);
        cur = next;
        g = g_next;
        gradient_norm = norm(&g);
        collapsed = cur.pair.gap() <= 2.0 * GAP_MIN;
    }

    let mut energy = cur.energy;
    let mut contact_energy = None;
    if collapsed {
        let contact = law.value(1.0) * cur.pair.inner().perimeter();
        contact_energy = Some(contact);
        if contact < energy.total {
            energy = EnergyBreakdown::new(0.0, contact, 0.0, 1.0);
        }
    }
    Ok(OptimizeResult {
        deficit: cur.pair.deficit(),
        pair: cur.pair,
        energy,
        iterations,
        collapsed,
        contact_energy,
        initial_energy,
        gradient_norm,
        initial_gradient_norm,
        trace,
    })
}
