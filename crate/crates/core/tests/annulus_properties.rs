//! Structural properties of the discrete state solver.

use std::f64::consts::PI;

use proptest::prelude::*;
use thermoshield::annulus::{solve_state_with, Assembly, SolverOptions, DEFAULT_TOL};
use thermoshield::radial::{convection_energy, general_radial_energy};
use thermoshield::{energy_of, solve_state, DissipationLaw, FourierRadius, Mesh, StarPair};

fn conv(beta: f64) -> DissipationLaw {
    DissipationLaw::convection(beta).unwrap()
}

fn wobbly() -> StarPair {
    StarPair::new(
        FourierRadius::new(1.0, vec![0.0, 0.08, 0.0], vec![0.05, 0.0, 0.0]),
        FourierRadius::new(2.2, vec![0.1, 0.0, -0.12], vec![0.0, 0.15, 0.0]),
    )
    .unwrap()
}

#[test]
fn values_obey_the_maximum_principle() {
    let mesh = Mesh::new(32, 128).unwrap();
    for law in [conv(1.0), DissipationLaw::radiation(1.0).unwrap()] {
        let pair = wobbly();
        let sol = solve_state(&pair, &law, mesh, DEFAULT_TOL).unwrap();
        let f = &sol.field;
        let trace_min = f.outer_row().iter().copied().fold(f64::INFINITY, f64::min);
        assert!(f.values().iter().all(|&u| u >= trace_min - 1e-9 && u <= 1.0));
        let asm = Assembly::new(&pair, mesh);
        for i in 1..mesh.n_s - 1 {
            for j in 0..mesh.n_theta {
                let (lo, hi) = asm
                    .neighbours(i, j)
                    .map(|(q, _)| f.values()[q])
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
                let u = f.get(i, j);
                assert!(u >= lo - 1e-6 && u <= hi + 1e-6, "node ({i},{j}): {u} not in [{lo}, {hi}]");
            }
        }
    }
}

#[test]
fn circle_error_shrinks_under_refinement() {
    let exact = convection_energy(2, 1.0, 2.0).unwrap().total;
    let pair = StarPair::circles(1.0, 2.0).unwrap();
    let errors: Vec<f64> = [32, 64, 128]
        .iter()
        .map(|&n| {
            let e = solve_state(&pair, &conv(1.0), Mesh::new(n, 4 * n).unwrap(), DEFAULT_TOL).unwrap();
            (e.energy.total - exact).abs()
        })
        .collect();
    for w in errors.windows(2) {
        assert!(w[1] < w[0], "{errors:?}");
        assert!((w[0] / w[1]).log2() >= 1.0, "order below one: {errors:?}");
    }
}

#[test]
fn nonlinear_law_on_circles_matches_radial_oracle() {
    let law = DissipationLaw::radiation(1.0).unwrap();
    let pair = StarPair::circles(1.0, 1.5).unwrap();
    let sol = solve_state(&pair, &law, Mesh::default(), DEFAULT_TOL).unwrap();
    let exact = general_radial_energy(2, &law, 1.5, 0.0).unwrap();
    assert!((sol.energy.total / exact.total - 1.0).abs() < 0.01);
    assert!((sol.energy.trace - exact.trace).abs() < 0.01);
}

#[test]
fn energy_of_reproduces_the_solver() {
    let pair = wobbly();
    let law = DissipationLaw::power(2.0, 1.5).unwrap();
    let sol = solve_state(&pair, &law, Mesh::new(24, 96).unwrap(), DEFAULT_TOL).unwrap();
    assert_eq!(energy_of(&sol.field, &pair, &law).unwrap(), sol.energy);
}

#[test]
fn warm_and_cold_starts_agree() {
    let pair = wobbly();
    let mesh = Mesh::new(24, 96).unwrap();
    let opts = SolverOptions { tol: 1e-13, max_iters: 20_000 };
    let cold = solve_state_with(&pair, &conv(0.7), mesh, opts, None).unwrap();
    let warm_start = vec![0.5; mesh.len()];
    let warm = solve_state_with(&pair, &conv(0.7), mesh, opts, Some(&warm_start)).unwrap();
    assert!((cold.energy.total - warm.energy.total).abs() < 1e-9 * cold.energy.total);
}

#[test]
fn outer_boundary_weights_sum_to_perimeter() {
    let pair = wobbly();
    let asm = Assembly::new(&pair, Mesh::new(8, 512).unwrap());
    let total: f64 = asm.boundary_weights().iter().sum();
    assert!((total - pair.outer().perimeter()).abs() < 1e-9 * total);
    let circle = Assembly::new(&StarPair::circles(1.0, 3.0).unwrap(), Mesh::new(8, 64).unwrap());
    assert!((circle.boundary_weights().iter().sum::<f64>() - 6.0 * PI).abs() < 1e-12);
}

fn small_pair() -> impl Strategy<Value = StarPair> {
    (
        prop::collection::vec(-0.08..0.08f64, 4),
        prop::collection::vec(-0.1..0.1f64, 4),
        1.5..2.5f64,
    )
        .prop_map(|(a, b, r)| {
            StarPair::new(
                FourierRadius::new(1.0, a[..2].to_vec(), a[2..].to_vec()),
                FourierRadius::new(r, b[..2].to_vec(), b[2..].to_vec()),
            )
            .unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    // Rotations by whole mesh cells map the discrete problem onto itself.
    #[test]
    fn grid_aligned_rotation_keeps_the_energy(pair in small_pair(), k in 1usize..64) {
        let mesh = Mesh::new(16, 64).unwrap();
        let law = conv(1.0);
        let phi = k as f64 * mesh.dtheta();
        let e0 = solve_state(&pair, &law, mesh, 1e-14).unwrap().energy.total;
        let e1 = solve_state(&pair.rotated(phi).unwrap(), &law, mesh, 1e-14).unwrap().energy.total;
        prop_assert!((e0 - e1).abs() <= 1e-10 * e0, "{} vs {}", e0, e1);
    }

    #[test]
    fn larger_beta_never_lowers_the_energy(pair in small_pair(), beta in 0.2..3.0f64) {
        let mesh = Mesh::new(16, 64).unwrap();
        let e1 = solve_state(&pair, &conv(beta), mesh, 1e-12).unwrap().energy.total;
        let e2 = solve_state(&pair, &conv(2.0 * beta), mesh, 1e-12).unwrap().energy.total;
        prop_assert!(e2 >= e1 * (1.0 - 1e-9), "{} < {}", e2, e1);
    }

    #[test]
    fn solved_energy_beats_constant_fields(pair in small_pair(), gamma in 0.2..2.0f64) {
        let mesh = Mesh::new(16, 64).unwrap();
        let law = DissipationLaw::radiation(gamma).unwrap();
        let sol = solve_state(&pair, &law, mesh, 1e-12).unwrap();
        let ones = thermoshield::ScalarField::from_fn(mesh, pair.clone(), |_, _| 1.0);
        prop_assert!(sol.energy.total <= energy_of(&ones, &pair, &law).unwrap().total);
        prop_assert!(sol.field.values().iter().all(|&u| (0.0..=1.0).contains(&u)));
        let b = sol.energy;
        prop_assert_eq!(b.total, b.dirichlet + b.boundary + b.penalty);
    }
}
