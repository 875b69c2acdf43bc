//! Small one-dimensional numerical kernels shared by the radial engine,
//! the dissipation hypotheses and the checks.

use std::f64::consts::PI;

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Volume of the unit ball in dimension `n`.
///
/// Uses the two-step recurrence `ω_n = 2π/n · ω_{n-2}` seeded with
/// `ω_0 = 1`, `ω_1 = 2`, which is the half-integer Gamma recurrence
/// written out.
pub fn unit_ball_volume(n: usize) -> f64 {
    let even = n.is_multiple_of(2);
    let mut w = if even { 1.0 } else { 2.0 };
    let mut k = if even { 2 } else { 3 };
    while k <= n {
        w *= 2.0 * PI / k as f64;
        k += 2;
    }
    w
}

/// Perimeter of the unit sphere, `n ω_n`.
pub fn unit_sphere_area(n: usize) -> f64 {
    n as f64 * unit_ball_volume(n)
}

/// Golden-section minimization of `f` on `[a, b]`.
///
/// Returns the best abscissa visited together with its value. The
/// endpoints are evaluated as well so a monotone function returns the
/// correct endpoint.
pub fn golden_section<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> (f64, f64) {
    let (mut lo, mut hi) = (a.min(b), a.max(b));
    let mut best = (lo, f(lo));
    let fb = f(hi);
    if fb < best.1 {
        best = (hi, fb);
    }
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut iter = 0;
    while hi - lo > tol * (1.0 + lo.abs().max(hi.abs())) && iter < 400 {
        iter += 1;
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
        if f1 < best.1 {
            best = (x1, f1);
        }
        if f2 < best.1 {
            best = (x2, f2);
        }
    }
    best
}

/// Minimizes `f` over the sorted sample points `grid`, then refines the
/// best sample by golden section inside the bracket formed by its
/// neighbours.
pub fn scan_then_refine<F: FnMut(f64) -> f64>(mut f: F, grid: &[f64], tol: f64) -> (f64, f64) {
    assert!(!grid.is_empty());
    let mut best_idx = 0;
    let mut best_val = f64::INFINITY;
    for (i, &x) in grid.iter().enumerate() {
        let v = f(x);
        if v < best_val {
            best_val = v;
            best_idx = i;
        }
    }
    let lo = grid[best_idx.saturating_sub(1)];
    let hi = grid[(best_idx + 1).min(grid.len() - 1)];
    let (x, v) = golden_section(&mut f, lo, hi, tol);
    if v < best_val {
        (x, v)
    } else {
        (grid[best_idx], best_val)
    }
}

/// Bisection for a sign change of `f` on `[a, b]`; stops when the bracket
/// is below `rtol` relative to its midpoint.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, rtol: f64) -> Option<f64> {
    let (mut lo, mut hi) = (a, b);
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Some(lo);
    }
    if fhi == 0.0 {
        return Some(hi);
    }
    if flo.signum() == fhi.signum() {
        return None;
    }
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if (hi - lo).abs() <= rtol * mid.abs() {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Some(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Adaptive Simpson quadrature of `f` on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: FnMut(f64) -> f64>(
        f: &mut F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    recurse(&mut f, a, b, fa, fm, fb, whole, tol, 48)
}

/// `count` points between `lo` and `hi`; both endpoints are hit exactly.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count)
            .map(|i| if i + 1 == count { hi } else { lo + (hi - lo) * i as f64 / (count - 1) as f64 })
            .collect(),
    }
}

/// `count` geometrically spaced points between positive `lo` and `hi`; both
/// endpoints are hit exactly.
pub fn geomspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let mut out: Vec<f64> = linspace(lo.ln(), hi.ln(), count).into_iter().map(f64::exp).collect();
    if let Some(first) = out.first_mut() {
        *first = lo;
    }
    if count > 1 {
        out[count - 1] = hi;
    }
    out
}
