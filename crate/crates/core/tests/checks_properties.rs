//! Level-set machinery: H-function, dearrangement, truncation and cutoff.

use std::f64::consts::PI;

use proptest::prelude::*;
use thermoshield::annulus::DEFAULT_TOL;
use thermoshield::checks::{
    decompose_levels, decompose_levels_at, dearrangement, h_function, h_inequality_check, h_inequality_check_with,
    high_cutoff_bound, truncation_scan, NodalField, RadialReference,
};
use thermoshield::radial::{convection_energy, convection_gradient_ratio};
use thermoshield::{solve_state, DissipationLaw, FourierRadius, Mesh, ScalarField, StarPair};

fn conv(beta: f64) -> DissipationLaw {
    DissipationLaw::convection(beta).unwrap()
}

fn solved(pair: &StarPair, beta: f64, mesh: Mesh) -> ScalarField {
    solve_state(pair, &conv(beta), mesh, DEFAULT_TOL).unwrap().field
}

fn mean_and_std(v: &[f64]) -> (f64, f64) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64;
    (mean, var.sqrt())
}

fn h_spread(mesh: Mesh) -> f64 {
    let pair = StarPair::circles(1.0, 2.0).unwrap();
    let f = solved(&pair, 1.0, mesh);
    let mut dec = decompose_levels(&f, &pair, 24).unwrap();
    dec.accumulate(&f, &NodalField::gradient_ratio(&f)).unwrap();
    let h = h_function(&dec, 1.0).unwrap();
    let (mean, std) = mean_and_std(&h);
    let e = convection_energy(2, 1.0, 2.0).unwrap().total;
    assert!((mean / e - 1.0).abs() < 0.02, "mean H {mean} vs E {e}");
    std / mean
}

#[test]
fn h_identity_holds_on_circles_and_sharpens() {
    let coarse = h_spread(Mesh::new(32, 128).unwrap());
    let fine = h_spread(Mesh::default());
    assert!(fine <= 0.02, "{fine}");
    assert!(fine < coarse, "{coarse} → {fine}");
}

#[test]
fn dearranging_a_radial_field_returns_its_own_ratio() {
    let r = 2.0;
    let pair = StarPair::circles(1.0, r).unwrap();
    let mesh = Mesh::default();
    let f = solved(&pair, 1.0, mesh);
    let phi = dearrangement(&f, &pair, RadialReference { n: 2, beta: 1.0, outer_radius: r }).unwrap();
    for i in 0..mesh.n_s {
        let rho = 1.0 + mesh.s(i) * (r - 1.0);
        let exact = convection_gradient_ratio(2, 1.0, r, rho);
        let got = phi.values[mesh.index(i, 0)];
        assert!((got / exact - 1.0).abs() < 0.01, "row {i}: {got} vs {exact}");
    }
}

#[test]
fn dearrangement_is_a_function_of_the_level() {
    let pair = StarPair::circles(1.0, 2.0).unwrap();
    let mesh = Mesh::new(16, 64).unwrap();
    // four plateaus shared across angles and rows
    let f = ScalarField::from_fn(mesh, pair.clone(), |s, th| {
        if s == 0.0 {
            1.0
        } else {
            (0.2 + 0.2 * ((2.0 * th).cos() > 0.0) as u8 as f64 + 0.4 * (s < 0.5) as u8 as f64).min(1.0)
        }
    });
    let phi = dearrangement(&f, &pair, RadialReference { n: 2, beta: 1.0, outer_radius: 2.0 }).unwrap();
    for (a, (ua, pa)) in f.values().iter().zip(&phi.values).enumerate() {
        for (ub, pb) in f.values().iter().zip(&phi.values).skip(a + 1) {
            if ua == ub {
                assert_eq!(pa, pb);
            }
        }
    }
}

fn ellipse(r: f64, amp: f64) -> StarPair {
    StarPair::new(
        FourierRadius::new(1.0, vec![0.0, amp], vec![]),
        FourierRadius::new(r, vec![0.0, amp], vec![]),
    )
    .unwrap()
}

#[test]
fn perturbed_pair_sits_between_ball_and_its_own_energy() {
    let pair = ellipse(2.0, 0.1);
    let f = solved(&pair, 1.0, Mesh::default());
    let rep = h_inequality_check(&f, &pair, 1.0, 32).unwrap();
    assert!(rep.passes, "{rep:?}");
    let ball = convection_energy(2, 1.0, (pair.outer().area() / PI).sqrt()).unwrap().total;
    assert!(rep.min_h <= rep.energy * 1.02);
    assert!(rep.min_h >= ball * 0.98, "min H {} vs ball {ball}", rep.min_h);
}

#[test]
fn circles_give_a_vanishing_weighted_integral() {
    let pair = StarPair::circles(1.0, 2.0).unwrap();
    let f = solved(&pair, 1.0, Mesh::default());
    let rep = h_inequality_check(&f, &pair, 1.0, 32).unwrap();
    assert!(rep.passes);
    assert!(rep.weighted_integral.abs() < 0.01 * rep.energy, "{rep:?}");
}

#[test]
fn inequality_holds_for_a_constant_density() {
    let pair = ellipse(2.0, 0.1);
    for beta in [0.5, 1.0, 2.0] {
        let f = solved(&pair, beta, Mesh::new(32, 128).unwrap());
        let phi = NodalField::constant(f.mesh(), 2.0 * beta);
        assert!(h_inequality_check_with(&f, &pair, beta, 32, &phi).unwrap().passes, "β={beta}");
    }
}

/// Inner half of circles(1,2) at 1, outer half at `ε`.
fn low_trace_field(mesh: Mesh, eps: f64) -> (ScalarField, StarPair) {
    let pair = StarPair::circles(1.0, 2.0).unwrap();
    let f = ScalarField::from_fn(mesh, pair.clone(), |s, _| if s < 0.5 { 1.0 } else { eps });
    (f, pair)
}

#[test]
fn truncation_removes_a_cold_outer_layer() {
    let (f, pair) = low_trace_field(Mesh::new(32, 128).unwrap(), 1e-3);
    let law = conv(1.0);
    let rep = truncation_scan(&f, &pair, &law, 64).unwrap();
    assert!(rep.improved);
    assert!(rep.best_t >= 1e-3);
    // independent check: the cut field has no Dirichlet energy left outside
    // the jump row, no boundary dissipation, and a crack of length ≈ 2π·1.5
    assert!(rep.best_energy < 2.0 * PI * 1.5 * 1.1, "{}", rep.best_energy);
}

#[test]
fn truncation_never_helps_a_solved_radial_state() {
    let pair = StarPair::circles(1.0, 2.0).unwrap();
    let law = conv(1.0);
    let f = solved(&pair, 1.0, Mesh::new(32, 128).unwrap());
    let rep = truncation_scan(&f, &pair, &law, 64).unwrap();
    assert!(!rep.improved);
    assert_eq!(rep.best_energy, rep.original_energy);
    assert_eq!(rep.energies[0], rep.original_energy);
    let zero = DissipationLaw::zero();
    let rep = truncation_scan(&f, &pair, &zero, 32).unwrap();
    assert!(rep.best_energy <= rep.original_energy);
}

#[test]
fn high_cutoff_agrees_with_direct_grid_evaluation() {
    let law = conv(1.0);
    for extra in [1e-8, 1e-3, 0.5, 10.0] {
        let m = PI + extra;
        let got = high_cutoff_bound(&law, 2, m, 1.0).unwrap();
        let ok = |d: f64| d + law.eval(1.0).unwrap() * extra.powf(0.25) / law.eval(d).unwrap().sqrt() < 1.0;
        let oracle = (1..4096).rev().map(|k| k as f64 / 4096.0).find(|&d| ok(d));
        assert_eq!(got.feasible, oracle.is_some(), "M = π + {extra}");
        assert_eq!(got.delta, oracle.unwrap_or(0.0));
    }
}

#[test]
fn level_csv_has_the_documented_columns() {
    let pair = StarPair::circles(1.0, 2.0).unwrap();
    let f = solved(&pair, 1.0, Mesh::new(16, 64).unwrap());
    let dec = decompose_levels(&f, &pair, 5).unwrap();
    let mut buf = Vec::new();
    dec.write_csv(None, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next(), Some("t,interior_length,exterior_length,area,H_value"));
    assert_eq!(text.lines().count(), 6);
}

/// Exact polar area of every mesh cell.
fn cell_areas(pair: &StarPair, mesh: Mesh) -> Vec<f64> {
    let mut out = Vec::new();
    for i in 0..mesh.n_s - 1 {
        for j in 0..mesh.n_theta {
            let sub = 64;
            let dth = mesh.dtheta() / sub as f64;
            let a: f64 = (0..sub)
                .map(|k| {
                    let th = mesh.theta(j) + (k as f64 + 0.5) * dth;
                    0.5 * (pair.radius_at(mesh.s(i + 1), th).powi(2) - pair.radius_at(mesh.s(i), th).powi(2)) * dth
                })
                .sum();
            out.push(a);
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn level_area_lies_between_cell_counts(
        amp in 0.0..0.12f64,
        r in 1.6..2.4f64,
        beta in 0.3..2.0f64,
        t in 0.05..0.95f64,
    ) {
        let pair = ellipse(r, amp);
        let mesh = Mesh::new(16, 64).unwrap();
        let f = solved(&pair, beta, mesh);
        prop_assume!(t > f.min());
        let dec = decompose_levels_at(&f, &pair, &[t]).unwrap();
        let cells = cell_areas(&pair, mesh);
        let (mut inside, mut touched) = (0.0, 0.0);
        for i in 0..mesh.n_s - 1 {
            for j in 0..mesh.n_theta {
                let jn = (j + 1) % mesh.n_theta;
                let corners = [f.get(i, j), f.get(i, jn), f.get(i + 1, j), f.get(i + 1, jn)];
                let a = cells[i * mesh.n_theta + j];
                if corners.iter().all(|&u| u > t) { inside += a; }
                if corners.iter().any(|&u| u > t) { touched += a; }
            }
        }
        let slack = 1e-3 * touched;
        prop_assert!(dec.area[0] >= inside - slack && dec.area[0] <= touched + slack,
            "{} not in [{}, {}]", dec.area[0], inside, touched);
        prop_assert!(dec.exterior_length[0] <= pair.outer().perimeter() * (1.0 + 1e-9));
    }

    #[test]
    fn decomposition_is_monotone(amp in 0.0..0.12f64, r in 1.6..2.4f64) {
        let pair = ellipse(r, amp);
        let f = solved(&pair, 1.0, Mesh::new(16, 64).unwrap());
        let dec = decompose_levels(&f, &pair, 12).unwrap();
        prop_assert!(dec.area.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(dec.interior_length.iter().chain(&dec.exterior_length).all(|&l| l >= 0.0));
        prop_assert!(dec.levels.windows(2).all(|w| w[0] < w[1]));
    }
}
