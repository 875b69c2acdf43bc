//! Discrete state problem on the region between two nested star-shaped
//! boundaries.
//!
//! The annulus is mapped from the rectangle `(s, θ) ∈ [0,1] × [0,2π)` by
//! `ρ = r_K(θ) + s (r_Ω(θ) − r_K(θ))`. The Dirichlet energy uses bilinear
//! elements on that rectangle with the exact metric of the polar map
//! (2×2 Gauss points per cell); the boundary term is a trapezoid sum along
//! `∂Ω` with the arclength weight `√(r_Ω² + r_Ω'²)`. Row `s = 0` is pinned to
//! one, all other nodal values are minimized inside `[0, 1]` by a projected,
//! Jacobi-preconditioned nonlinear conjugate gradient method.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::dissipation::DissipationLaw;
use crate::error::{Error, Result};
use crate::geometry::{FourierRadius, StarPair};
use crate::numeric::golden_section;
use crate::radial::{general_radial_energy, EnergyBreakdown};

/// Default relative tolerance of the state solver.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Default iteration cap of the state solver.
pub const DEFAULT_MAX_ITERS: usize = 20_000;

const GAUSS: [f64; 2] = [0.211_324_865_405_187_1, 0.788_675_134_594_812_9];

/// Tensor grid on the reference rectangle: `n_s` node rows from `∂K` (row 0)
/// to `∂Ω` (row `n_s − 1`) and `n_theta` periodic columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mesh {
    pub n_s: usize,
    pub n_theta: usize,
}

impl Default for Mesh {
    fn default() -> Self {
        Self { n_s: 64, n_theta: 256 }
    }
}

impl Mesh {
    pub fn new(n_s: usize, n_theta: usize) -> Result<Self> {
        if n_s < 2 || n_theta < 8 {
            return Err(Error::InvalidParameter(format!(
                "mesh needs n_s ≥ 2 and n_theta ≥ 8, got {n_s}×{n_theta}"
            )));
        }
        Ok(Self { n_s, n_theta })
    }

    pub fn len(&self) -> usize {
        self.n_s * self.n_theta
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn ds(&self) -> f64 {
        1.0 / (self.n_s - 1) as f64
    }

    pub fn dtheta(&self) -> f64 {
        2.0 * PI / self.n_theta as f64
    }

    pub fn s(&self, i: usize) -> f64 {
        i as f64 * self.ds()
    }

    pub fn theta(&self, j: usize) -> f64 {
        j as f64 * self.dtheta()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n_theta + j
    }
}

/// Nodal temperature on the mesh of a pair; row 0 is `∂K` and equals one.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    mesh: Mesh,
    pair: StarPair,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(mesh: Mesh, pair: StarPair, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.len() {
            return Err(Error::MeshMismatch(format!(
                "{} values for a {}×{} mesh",
                values.len(),
                mesh.n_s,
                mesh.n_theta
            )));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidParameter("field values must lie in [0, 1]".into()));
        }
        if values[..mesh.n_theta].iter().any(|&v| v != 1.0) {
            return Err(Error::InvalidParameter("field must equal 1 on the inner boundary".into()));
        }
        Ok(Self { mesh, pair, values })
    }

    /// Samples `f(s, θ)` at the nodes; row 0 is forced to one and values are clamped.
    pub fn from_fn(mesh: Mesh, pair: StarPair, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(mesh.len());
        for i in 0..mesh.n_s {
            for j in 0..mesh.n_theta {
                let v = if i == 0 { 1.0 } else { f(mesh.s(i), mesh.theta(j)).clamp(0.0, 1.0) };
                values.push(v);
            }
        }
        Self { mesh, pair, values }
    }

    pub fn mesh(&self) -> Mesh {
        self.mesh
    }

    pub fn pair(&self) -> &StarPair {
        &self.pair
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.mesh.index(i, j)]
    }

    pub fn outer_row(&self) -> &[f64] {
        let start = (self.mesh.n_s - 1) * self.mesh.n_theta;
        &self.values[start..]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// CSV dump: a header `n_s,n_theta,fourier_order,coeffs...` (inner then
    /// outer coefficients, each as `a0, cos.., sin..`) followed by `n_s` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let mut header = vec![
            self.mesh.n_s.to_string(),
            self.mesh.n_theta.to_string(),
            self.pair.order().to_string(),
        ];
        header.extend(self.pair.to_vec().iter().map(|c| c.to_string()));
        writeln!(w, "{}", header.join(","))?;
        for row in self.values.chunks(self.mesh.n_theta) {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let parse_row = |line: &str| -> Result<Vec<f64>> {
            line.split(',')
                .map(|t| t.trim().parse::<f64>().map_err(|e| Error::Format(format!("{t:?}: {e}"))))
                .collect()
        };
        let header = lines
            .next()
            .ok_or_else(|| Error::Format("empty field file".into()))?
            .map_err(|e| Error::Format(e.to_string()))?;
        let head = parse_row(&header)?;
        if head.len() < 3 {
            return Err(Error::Format("header too short".into()));
        }
        let (n_s, n_theta, order) = (head[0] as usize, head[1] as usize, head[2] as usize);
        let mesh = Mesh::new(n_s, n_theta)?;
        let pair = StarPair::from_slice(&head[3..], order)?;
        let mut values = Vec::with_capacity(mesh.len());
        for line in lines {
            let line = line.map_err(|e| Error::Format(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let row = parse_row(&line)?;
            if row.len() != n_theta {
                return Err(Error::Format(format!("row of length {} for n_theta = {n_theta}", row.len())));
            }
            values.extend(row);
        }
        ScalarField::new(mesh, pair, values)
    }
}

/// Stiffness stencil and boundary weights of a pair on a mesh.
#[derive(Debug, Clone)]
pub struct Assembly {
    mesh: Mesh,
    // 9-point couplings, index (di + 1) * 3 + (dj + 1)
    stencil: Vec<[f64; 9]>,
    boundary_weights: Vec<f64>,
}

/// Geometry of the polar map along one angle.
#[derive(Clone, Copy)]
pub(crate) struct Column {
    pub(crate) inner: f64,
    pub(crate) inner_d: f64,
    pub(crate) width: f64,
    pub(crate) width_d: f64,
}

impl Column {
    pub(crate) fn at(pair: &StarPair, theta: f64) -> Self {
        let (k, o) = (pair.inner(), pair.outer());
        let inner = k.eval(theta);
        let inner_d = k.derivative(theta);
        Self {
            inner,
            inner_d,
            width: o.eval(theta) - inner,
            width_d: o.derivative(theta) - inner_d,
        }
    }

    /// `(W_ss, W_sθ, W_θθ)` with `∫|∇u|² = ∫ ∇u·W∇u ds dθ` in `(s, θ)` coordinates.
    pub(crate) fn metric(&self, s: f64) -> (f64, f64, f64) {
        let rho = self.inner + s * self.width;
        let rho_t = self.inner_d + s * self.width_d;
        let h = self.width;
        ((rho_t * rho_t + rho * rho) / (h * rho), -rho_t / rho, h / rho)
    }
}

impl Assembly {
    pub fn new(pair: &StarPair, mesh: Mesh) -> Self {
        let (ns, nt) = (mesh.n_s, mesh.n_theta);
        let (ds, dt) = (mesh.ds(), mesh.dtheta());
        let columns: Vec<[Column; 2]> = (0..nt)
            .map(|j| {
                let t0 = mesh.theta(j);
                [Column::at(pair, t0 + GAUSS[0] * dt), Column::at(pair, t0 + GAUSS[1] * dt)]
            })
            .collect();
        // local node order: (i,j), (i+1,j), (i,j+1), (i+1,j+1)
        let offsets: [(isize, isize); 4] = [(0, 0), (1, 0), (0, 1), (1, 1)];
        let mut stencil = vec![[0.0; 9]; mesh.len()];
        for i in 0..ns - 1 {
            for (j, cols) in columns.iter().enumerate() {
                let mut ke = [[0.0; 4]; 4];
                for (qt, col) in cols.iter().enumerate() {
                    let tau = GAUSS[qt];
                    for &sigma in &GAUSS {
                        let s = mesh.s(i) + sigma * ds;
                        let (wss, wst, wtt) = col.metric(s);
                        let gs = [-(1.0 - tau) / ds, (1.0 - tau) / ds, -tau / ds, tau / ds];
                        let gt = [-(1.0 - sigma) / dt, -sigma / dt, (1.0 - sigma) / dt, sigma / dt];
                        let w = 0.25 * ds * dt;
                        for a in 0..4 {
                            for b in 0..4 {
                                ke[a][b] += w
                                    * (gs[a] * gs[b] * wss
                                        + (gs[a] * gt[b] + gt[a] * gs[b]) * wst
                                        + gt[a] * gt[b] * wtt);
                            }
                        }
                    }
                }
                for a in 0..4 {
                    let ia = i + offsets[a].0 as usize;
                    let ja = (j + offsets[a].1 as usize) % nt;
                    for b in 0..4 {
                        let di = offsets[b].0 - offsets[a].0;
                        let dj = offsets[b].1 - offsets[a].1;
                        let k = ((di + 1) * 3 + (dj + 1)) as usize;
                        stencil[mesh.index(ia, ja)][k] += ke[a][b];
                    }
                }
            }
        }
        let outer = pair.outer();
        let boundary_weights = (0..nt)
            .map(|j| {
                let t = mesh.theta(j);
                outer.eval(t).hypot(outer.derivative(t)) * dt
            })
            .collect();
        Self { mesh, stencil, boundary_weights }
    }

    pub fn mesh(&self) -> Mesh {
        self.mesh
    }

    /// Arclength weights of the outer boundary nodes.
    pub fn boundary_weights(&self) -> &[f64] {
        &self.boundary_weights
    }

    /// `out = A x` where `xᵀAx` is the Dirichlet energy.
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        let (ns, nt) = (self.mesh.n_s, self.mesh.n_theta);
        for i in 0..ns {
            let rows: [Option<usize>; 3] = [
                i.checked_sub(1),
                Some(i),
                if i + 1 < ns { Some(i + 1) } else { None },
            ];
            for j in 0..nt {
                let cols = [(j + nt - 1) % nt, j, (j + 1) % nt];
                let st = &self.stencil[i * nt + j];
                let mut acc = 0.0;
                for (di, row) in rows.iter().enumerate() {
                    if let Some(r) = row {
                        let base = r * nt;
                        acc += st[di * 3] * x[base + cols[0]]
                            + st[di * 3 + 1] * x[base + cols[1]]
                            + st[di * 3 + 2] * x[base + cols[2]];
                    }
                }
                out[i * nt + j] = acc;
            }
        }
    }

    pub fn diagonal(&self, p: usize) -> f64 {
        self.stencil[p][4]
    }

    /// Values at the 9 stencil neighbours of node `(i, j)` that exist, with their couplings.
    pub fn neighbours(&self, i: usize, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (ns, nt) = (self.mesh.n_s, self.mesh.n_theta);
        let st = self.stencil[i * nt + j];
        (0..9).filter_map(move |k| {
            let di = k as isize / 3 - 1;
            let dj = k as isize % 3 - 1;
            let r = i as isize + di;
            if r < 0 || r >= ns as isize || (di == 0 && dj == 0) {
                return None;
            }
            let c = (j as isize + dj).rem_euclid(nt as isize) as usize;
            Some((r as usize * nt + c, st[k]))
        })
    }

    pub fn dirichlet(&self, x: &[f64]) -> f64 {
        let mut ax = vec![0.0; x.len()];
        self.apply(x, &mut ax);
        dot(x, &ax)
    }

    pub fn boundary(&self, law: &DissipationLaw, x: &[f64]) -> f64 {
        let start = (self.mesh.n_s - 1) * self.mesh.n_theta;
        self.boundary_weights
            .iter()
            .zip(&x[start..])
            .map(|(w, &u)| w * law.value(u))
            .sum()
    }

    /// Arclength-weighted mean of the outer trace.
    pub fn mean_trace(&self, x: &[f64]) -> f64 {
        let start = (self.mesh.n_s - 1) * self.mesh.n_theta;
        let total: f64 = self.boundary_weights.iter().sum();
        self.boundary_weights
            .iter()
            .zip(&x[start..])
            .map(|(w, u)| w * u)
            .sum::<f64>()
            / total
    }

    pub fn energy(&self, law: &DissipationLaw, x: &[f64]) -> EnergyBreakdown {
        EnergyBreakdown::new(self.dirichlet(x), self.boundary(law, x), 0.0, self.mean_trace(x))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Tolerance and iteration cap of the state solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Stopping threshold on the preconditioned projected-gradient measure
    /// `gᵀD⁻¹g` relative to the energy, which bounds the remaining relative
    /// energy decrease.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL, max_iters: DEFAULT_MAX_ITERS }
    }
}

#[derive(Debug, Clone)]
pub struct StateSolution {
    pub field: ScalarField,
    pub energy: EnergyBreakdown,
    pub iterations: usize,
}

/// Minimizes the discrete energy of `pair` for `law` with default iteration cap.
pub fn solve_state(
    pair: &StarPair,
    law: &DissipationLaw,
    mesh: Mesh,
    tol: f64,
) -> Result<StateSolution> {
    solve_state_with(pair, law, mesh, SolverOptions { tol, ..SolverOptions::default() }, None)
}

/// Like [`solve_state`], optionally warm-started from nodal values on the same mesh.
pub fn solve_state_with(
    pair: &StarPair,
    law: &DissipationLaw,
    mesh: Mesh,
    opts: SolverOptions,
    warm: Option<&[f64]>,
) -> Result<StateSolution> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tol must be positive, got {}", opts.tol)));
    }
    let asm = Assembly::new(pair, mesh);
    let mut x = match warm {
        Some(w) if w.len() == mesh.len() => {
            let mut x = w.to_vec();
            x.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
            x[..mesh.n_theta].fill(1.0);
            x
        }
        Some(w) => {
            return Err(Error::MeshMismatch(format!(
                "warm start has {} values, mesh has {}",
                w.len(),
                mesh.len()
            )))
        }
        None => radial_guess(pair, law, mesh),
    };
    let mut iterations = minimize(&asm, law, &mut x, None, opts)?;
    let mut energy = asm.energy(law, &x);

    if law.jump_at_zero() > 0.0 {
        // the l.s.c. jump at 0 is invisible to gradients: compare with a zero trace
        let mut alt = x.clone();
        let last = (mesh.n_s - 1) * mesh.n_theta;
        alt[last..].fill(0.0);
        iterations += minimize(&asm, law, &mut alt, Some(0.0), opts)?;
        let alt_energy = asm.energy(law, &alt);
        if alt_energy.total < energy.total {
            x = alt;
            energy = alt_energy;
        }
    }
    Ok(StateSolution {
        field: ScalarField { mesh, pair: pair.clone(), values: x },
        energy,
        iterations,
    })
}

/// Energy of a given field, without optimizing.
pub fn energy_of(field: &ScalarField, pair: &StarPair, law: &DissipationLaw) -> Result<EnergyBreakdown> {
    if field.pair != *pair {
        return Err(Error::MeshMismatch("field was built on a different pair".into()));
    }
    Ok(Assembly::new(pair, field.mesh).energy(law, &field.values))
}

/// Dilates the geometry by `t`, keeping the nodal values.
pub fn scale_field(field: &ScalarField, pair: &StarPair, t: f64) -> Result<(ScalarField, StarPair)> {
    if field.pair != *pair {
        return Err(Error::MeshMismatch("field was built on a different pair".into()));
    }
    let scaled = pair.scaled(t)?;
    Ok((
        ScalarField { mesh: field.mesh, pair: scaled.clone(), values: field.values.clone() },
        scaled,
    ))
}

/// Radial profile of the equivalent concentric problem, used as initial guess.
fn radial_guess(pair: &StarPair, law: &DissipationLaw, mesh: Mesh) -> Vec<f64> {
    let ratio = (pair.outer().a0 / pair.inner().a0).max(1.0 + 1e-6);
    let trace = general_radial_energy(2, law, ratio, 0.0).map(|e| e.trace).unwrap_or(0.5);
    let mut x = Vec::with_capacity(mesh.len());
    for i in 0..mesh.n_s {
        let s = mesh.s(i);
        let shape = (1.0 + s * (ratio - 1.0)).ln() / ratio.ln();
        let v = 1.0 - (1.0 - trace) * shape;
        x.extend(std::iter::repeat_n(v.clamp(0.0, 1.0), mesh.n_theta));
    }
    x[..mesh.n_theta].fill(1.0);
    x
}

/// Projected preconditioned Polak–Ribière descent; returns the iteration count.
///
/// `pinned_outer` fixes the outer row to a constant instead of optimizing it.
fn minimize(
    asm: &Assembly,
    law: &DissipationLaw,
    x: &mut [f64],
    pinned_outer: Option<f64>,
    opts: SolverOptions,
) -> Result<usize> {
    let mesh = asm.mesh;
    let (n, nt) = (mesh.len(), mesh.n_theta);
    let last = (mesh.n_s - 1) * nt;
    if let Some(v) = pinned_outer {
        x[last..].fill(v);
    }
    let free_end = if pinned_outer.is_some() { last } else { n };
    if free_end <= nt {
        return Ok(0);
    }
    let weights = &asm.boundary_weights;
    let quadratic_beta = match *law {
        DissipationLaw::Convection { beta } => Some(beta),
        _ => None,
    };
    let optimize_boundary = pinned_outer.is_none();

    let boundary_energy = |x: &[f64]| -> f64 {
        if optimize_boundary {
            asm.boundary(law, x)
        } else {
            0.0
        }
    };

    let mut ax = vec![0.0; n];
    asm.apply(x, &mut ax);
    let mut energy = dot(x, &ax) + boundary_energy(x);

    let mut g = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut ad = vec![0.0; n];
    let mut g_prev = vec![0.0; n];
    let mut gz_prev = 0.0;
    let mut restart = true;
    let mut last_decrease = f64::INFINITY;

    for iter in 0..opts.max_iters {
        // projected gradient and Jacobi preconditioner
        let mut gz = 0.0;
        let mut z_gprev = 0.0;
        for p in nt..free_end {
            let mut gp = 2.0 * ax[p];
            let mut diag = 2.0 * asm.stencil[p][4];
            if optimize_boundary && p >= last {
                let w = weights[p - last];
                gp += w * law.slope(x[p]);
                diag += w * law.curvature(x[p]);
            }
            let active = (x[p] <= 0.0 && gp > 0.0) || (x[p] >= 1.0 && gp < 0.0);
            if active {
                g[p] = 0.0;
                z[p] = 0.0;
            } else {
                g[p] = gp;
                z[p] = gp / diag;
                gz += gp * z[p];
                z_gprev += z[p] * g_prev[p];
            }
        }
        if gz <= opts.tol * energy.abs().max(f64::MIN_POSITIVE) {
            return Ok(iter);
        }
        let beta_pr = if restart || gz_prev == 0.0 {
            0.0
        } else {
            ((gz - z_gprev) / gz_prev).max(0.0)
        };
        let mut dg = 0.0;
        for p in nt..free_end {
            d[p] = if g[p] == 0.0 && z[p] == 0.0 && (x[p] <= 0.0 || x[p] >= 1.0) {
                0.0
            } else {
                -z[p] + beta_pr * d[p]
            };
            dg += d[p] * g[p];
        }
        if dg >= 0.0 {
            dg = 0.0;
            for p in nt..free_end {
                d[p] = -z[p];
                dg += d[p] * g[p];
            }
        }
        d[..nt].fill(0.0);
        d[free_end..].fill(0.0);
        let steepest = beta_pr == 0.0;

        asm.apply(&d, &mut ad);
        let d_ax = dot(&d, &ax);
        let d_ad = dot(&d, &ad);
        let mut alpha_max = f64::INFINITY;
        for p in nt..free_end {
            if d[p] > 0.0 {
                alpha_max = alpha_max.min((1.0 - x[p]) / d[p]);
            } else if d[p] < 0.0 {
                alpha_max = alpha_max.min(-x[p] / d[p]);
            }
        }
        let b0 = boundary_energy(x);
        let change = |alpha: f64| -> f64 {
            let mut b = 0.0;
            if optimize_boundary {
                for (k, w) in weights.iter().enumerate() {
                    let p = last + k;
                    b += w * law.value(x[p] + alpha * d[p]);
                }
            }
            2.0 * alpha * d_ax + alpha * alpha * d_ad + b - b0
        };

        let alpha = if let (Some(beta), true) = (quadratic_beta, optimize_boundary) {
            let mut num = 2.0 * d_ax;
            let mut den = 2.0 * d_ad;
            for (k, w) in weights.iter().enumerate() {
                let p = last + k;
                num += 2.0 * beta * w * x[p] * d[p];
                den += 2.0 * beta * w * d[p] * d[p];
            }
            (-num / den).clamp(0.0, alpha_max)
        } else if !optimize_boundary {
            (-d_ax / d_ad).clamp(0.0, alpha_max)
        } else {
            let mut curv = 2.0 * d_ad;
            for (k, w) in weights.iter().enumerate() {
                let p = last + k;
                curv += w * law.curvature(x[p]) * d[p] * d[p];
            }
            let guess = if curv > 0.0 { -dg / curv } else { alpha_max };
            let mut hi = (3.0 * guess).min(alpha_max);
            if !hi.is_finite() || hi <= 0.0 {
                hi = if alpha_max.is_finite() { alpha_max } else { 1.0 };
            }
            let mut best = golden_section(&change, 0.0, hi, 1e-10);
            while best.0 >= hi * (1.0 - 1e-6) && hi < alpha_max {
                hi = (4.0 * hi).min(alpha_max);
                best = golden_section(&change, 0.0, hi, 1e-10);
            }
            best.0
        };

        let mut delta = change(alpha);
        let mut clamped = false;
        let mut step = alpha;
        if alpha_max.is_finite() && alpha >= alpha_max * (1.0 - 1e-12) {
            // continue along the projected path while it keeps decreasing
            let mut trial = x.to_vec();
            let mut best_val = delta;
            let mut k = 2.0;
            for _ in 0..30 {
                let a = alpha_max * k;
                for p in nt..free_end {
                    trial[p] = (x[p] + a * d[p]).clamp(0.0, 1.0);
                }
                let val = asm.dirichlet(&trial) + boundary_energy(&trial) - energy;
                if val < best_val {
                    best_val = val;
                    step = a;
                    clamped = true;
                    k *= 2.0;
                } else {
                    break;
                }
            }
            delta = best_val;
        }

        if !(delta < 0.0) {
            if steepest {
                // no descent possible at floating-point resolution
                return Ok(iter);
            }
            restart = true;
            continue;
        }
        for p in nt..free_end {
            x[p] = (x[p] + step * d[p]).clamp(0.0, 1.0);
        }
        if clamped {
            asm.apply(x, &mut ax);
            energy = dot(x, &ax) + boundary_energy(x);
        } else {
            for p in 0..n {
                ax[p] += step * ad[p];
            }
            energy += delta;
        }
        last_decrease = -delta / energy.abs().max(f64::MIN_POSITIVE);
        g_prev[nt..free_end].copy_from_slice(&g[nt..free_end]);
        gz_prev = gz;
        restart = clamped;
        if (iter + 1) % 200 == 0 {
            // refresh against drift of the incremental update
            asm.apply(x, &mut ax);
            energy = dot(x, &ax) + boundary_energy(x);
        }
    }
    Err(Error::NonConvergence { iterations: opts.max_iters, last_decrease })
}

/// Physical gradient magnitude `|∇u|` at every node by central differences
/// in `(s, θ)` (one-sided on the first and last rows) mapped through the metric.
pub fn gradient_magnitude(field: &ScalarField) -> Vec<f64> {
    let mesh = field.mesh;
    let (ns, nt) = (mesh.n_s, mesh.n_theta);
    let (ds, dt) = (mesh.ds(), mesh.dtheta());
    let cols: Vec<Column> = (0..nt).map(|j| Column::at(&field.pair, mesh.theta(j))).collect();
    let mut out = vec![0.0; mesh.len()];
    for i in 0..ns {
        for j in 0..nt {
            let u_s = if i == 0 {
                (-3.0 * field.get(0, j) + 4.0 * field.get(1, j) - field.get(2.min(ns - 1), j))
                    / (2.0 * ds)
            } else if i == ns - 1 {
                (3.0 * field.get(i, j) - 4.0 * field.get(i - 1, j) + field.get(i.saturating_sub(2), j))
                    / (2.0 * ds)
            } else {
                (field.get(i + 1, j) - field.get(i - 1, j)) / (2.0 * ds)
            };
            let u_t = (field.get(i, (j + 1) % nt) - field.get(i, (j + nt - 1) % nt)) / (2.0 * dt);
            let col = cols[j];
            let s = mesh.s(i);
            let rho = col.inner + s * col.width;
            // |∇u|² = (∇u·W∇u) / det J with det J = hρ
            let (wss, wst, wtt) = col.metric(s);
            let q = (wss * u_s * u_s + 2.0 * wst * u_s * u_t + wtt * u_t * u_t) / (col.width * rho);
            out[mesh.index(i, j)] = q.max(0.0).sqrt();
        }
    }
    out
}

/// Concentric circles pair helper for the common test geometry.
pub fn circle_pair(r_inner: f64, r_outer: f64) -> Result<StarPair> {
    StarPair::new(FourierRadius::circle(r_inner), FourierRadius::circle(r_outer))
}
