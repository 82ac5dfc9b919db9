use smoothing_lab::Complex64;
use smoothing_lab::grids::{ModeFunction, RadialGrid};
use smoothing_lab::helmholtz::*;
use smoothing_lab::numeric::observed_orders;
use smoothing_lab::potentials::{PotentialKind, PotentialRole, PotentialSpec};

fn gaussian(grid: RadialGrid) -> ModeFunction {
    ModeFunction::from_real_fn(grid, |r| (-(r - 2.0).powi(2)).exp())
}

fn inverse_square(c: f64) -> PotentialSpec {
    PotentialSpec::new(PotentialKind::InversePower { c, gamma: 2.0 }, PotentialRole::VRepulsive).unwrap()
}

fn relative_l2(a: &ModeFunction, b: &ModeFunction) -> f64 {
    let w = a.grid().volume_weights();
    let mut num = 0.0;
    let mut den = 0.0;
    for ((x, y), wi) in a.values().iter().zip(b.values()).zip(&w) {
        num += wi * (x - y).norm_sqr();
        den += wi * y.norm_sqr();
    }
    (num / den).sqrt()
}

fn manufactured_errors(d: usize, l: usize, potentials: Vec<PotentialSpec>) -> Vec<f64> {
    [200, 400, 800, 1600]
        .iter()
        .map(|&n| {
            let grid = RadialGrid::new(d, l, n, 8.0).unwrap();
            let problem = ResolventProblem::new(grid, potentials.clone(), Sign::Plus, 0.3, 1.5, ModeFunction::zeros(grid));
            let problem = problem.with_rhs(manufactured_rhs(&problem).unwrap());
            let solution = solve_resolvent(&problem).unwrap();
            relative_l2(&solution.u, &manufactured_solution(grid))
        })
        .collect()
}

#[test]
fn manufactured_solution_converges_at_second_order() {
    for (d, l, potentials) in [(3, 0, vec![]), (2, 1, vec![]), (5, 2, vec![inverse_square(0.1)])] {
        let errors = manufactured_errors(d, l, potentials);
        for order in observed_orders(&errors) {
            assert!(order >= 1.8, "d={d} ℓ={l}: errors {errors:?}");
        }
    }
}

/// Gaussian elimination with partial pivoting on the full matrix.
fn dense_solve(mut a: Vec<Vec<Complex64>>, mut b: Vec<Complex64>) -> Vec<Complex64> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].norm().total_cmp(&a[j][k].norm())).unwrap();
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let m = a[i][k] / a[k][k];
            for j in k..n {
                let t = a[k][j];
                a[i][j] -= m * t;
            }
            let t = b[k];
            b[i] -= m * t;
        }
    }
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for k in (0..n).rev() {
        let s: Complex64 = (k + 1..n).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    x
}

#[test]
fn tridiagonal_solve_matches_dense_elimination() {
    for boundary in [Boundary::Dirichlet, Boundary::Sponge { width: 0.3, strength: 5.0 }] {
        let grid = RadialGrid::new(3, 1, 200, 20.0).unwrap();
        let problem = ResolventProblem::new(grid, vec![inverse_square(0.2)], Sign::Minus, 0.05, 2.0, gaussian(grid))
            .with_boundary(boundary);
        let a = assemble_operator(&problem).unwrap();
        let n = a.len();
        let mut dense = vec![vec![Complex64::new(0.0, 0.0); n]; n];
        for i in 0..n {
            dense[i][i] = a.diag[i];
            if i + 1 < n {
                dense[i + 1][i] = a.lower[i];
                dense[i][i + 1] = a.upper[i];
            }
        }
        let g: Vec<Complex64> = problem.rhs.values().iter().zip(grid.nodes()).map(|(f, r)| f * r).collect();
        let oracle = dense_solve(dense, g);
        let solution = solve_resolvent(&problem).unwrap();
        let num: f64 = solution.v.iter().zip(&oracle).map(|(x, y)| (x - y).norm_sqr()).sum();
        let den: f64 = oracle.iter().map(|y| y.norm_sqr()).sum();
        assert!((num / den).sqrt() <= 1e-10);
    }
}

#[test]
fn hermitian_part_is_symmetric() {
    let grid = RadialGrid::new(4, 2, 300, 15.0).unwrap();
    let problem = ResolventProblem::new(grid, vec![inverse_square(0.3)], Sign::Plus, 0.1, 1.0, gaussian(grid));
    let a = assemble_operator(&problem).unwrap();
    for (lo, up) in a.lower.iter().zip(&a.upper) {
        assert_eq!(lo.re, up.re);
        assert_eq!(lo.im, 0.0);
    }
}

#[test]
fn solve_is_backward_stable_and_sensitive_to_noise() {
    let grid = RadialGrid::new(3, 0, 1000, 30.0).unwrap();
    let problem = ResolventProblem::new(grid, vec![inverse_square(0.1)], Sign::Plus, 0.2, 1.0, gaussian(grid));
    let solution = solve_resolvent(&problem).unwrap();
    assert!(solution.residual <= 1e-10);
    let noisy: Vec<Complex64> =
        solution.u.values().iter().enumerate().map(|(i, z)| z * (1.0 + 0.01 * ((i as f64) * 1.7).sin())).collect();
    let noisy = ModeFunction::new(grid, noisy).unwrap();
    let perturbed = residual_check(&problem, &noisy).unwrap();
    assert!(perturbed >= 1e3 * solution.residual.max(1e-16));
    let zero = ResolventProblem::new(grid, vec![], Sign::Plus, 0.2, 1.0, ModeFunction::zeros(grid));
    assert_eq!(residual_check(&zero, &ModeFunction::zeros(grid)).unwrap(), 0.0);
}

#[test]
fn conjugate_problems_have_conjugate_solutions() {
    let grid = RadialGrid::new(3, 1, 800, 30.0).unwrap();
    let f = ModeFunction::from_fn(grid, |r| Complex64::new((-(r - 2.0).powi(2)).exp(), 0.5 * (-(r - 3.0).powi(2)).exp()));
    let plus = ResolventProblem::new(grid, vec![inverse_square(0.1)], Sign::Plus, 0.1, 2.0, f.clone());
    let minus = ResolventProblem::new(grid, vec![inverse_square(0.1)], Sign::Minus, 0.1, 2.0, f.conj());
    let up = solve_resolvent(&plus).unwrap().u;
    let um = solve_resolvent(&minus).unwrap().u;
    let scale = up.max_abs();
    for (a, b) in up.values().iter().zip(um.values()) {
        assert!((a - b.conj()).norm() <= 1e-13 * scale);
    }
}

#[test]
fn first_resolvent_identity_holds() {
    let grid = RadialGrid::new(3, 0, 400, 20.0).unwrap();
    let f = gaussian(grid);
    let solve = |tau: f64, rhs: ModeFunction| {
        let p = ResolventProblem::new(grid, vec![inverse_square(0.1)], Sign::Plus, 0.3, tau, rhs);
        solve_resolvent(&p).unwrap().u
    };
    // The solver inverts H − τ ± iε, so the difference carries τ₁ − τ₂.
    let (t1, t2) = (0.5, 2.0);
    let r2f = solve(t2, f.clone());
    let lhs = solve(t1, r2f.clone()).scale(Complex64::new(t1 - t2, 0.0));
    let rhs = solve(t1, f.clone()).add(&r2f.scale(Complex64::new(-1.0, 0.0))).unwrap();
    let err = lhs.add(&rhs.scale(Complex64::new(-1.0, 0.0))).unwrap().max_abs();
    assert!(err <= 1e-8 * rhs.max_abs());
}

#[test]
fn absorption_bounds_mass_by_pairing() {
    for sign in [Sign::Plus, Sign::Minus] {
        for epsilon in [0.01, 0.1, 1.0] {
            let grid = RadialGrid::new(3, 0, 2000, 60.0).unwrap();
            let problem = ResolventProblem::new(grid, vec![inverse_square(0.1)], sign, epsilon, 1.0, gaussian(grid))
                .with_boundary(Boundary::Sponge { width: 0.3, strength: 2.0 });
            let u = solve_resolvent(&problem).unwrap().u;
            let w = grid.volume_weights();
            let mass: f64 = u.values().iter().zip(&w).map(|(z, wi)| wi * z.norm_sqr()).sum();
            let pairing: f64 =
                u.values().iter().zip(problem.rhs.values()).zip(&w).map(|((z, fi), wi)| wi * z.norm() * fi.norm()).sum();
            assert!(epsilon * mass <= pairing * (1.0 + 1e-9), "ε={epsilon}");
        }
    }
}

#[test]
fn reported_derivative_matches_differences() {
    let errors: Vec<f64> = [400, 800, 1600]
        .iter()
        .map(|&n| {
            let grid = RadialGrid::new(3, 0, n, 10.0).unwrap();
            let problem = ResolventProblem::new(grid, vec![], Sign::Plus, 0.5, 1.0, gaussian(grid));
            let u = solve_resolvent(&problem).unwrap().u;
            let du = u.derivative().unwrap();
            let vals = u.values();
            let h = grid.spacing();
            (2..n - 2)
                .filter(|&i| (1.0..5.0).contains(&grid.node(i)))
                .map(|i| {
                    let fd = (vals[i - 2] - vals[i - 1] * 8.0 + vals[i + 1] * 8.0 - vals[i + 2]) / (12.0 * h);
                    (fd - du[i]).norm()
                })
                .fold(0.0, f64::max)
        })
        .collect();
    for order in observed_orders(&errors) {
        assert!(order >= 3.5, "{errors:?}");
    }
}

#[test]
fn effective_potential_vanishes_for_radial_three_dimensional_mode() {
    assert_eq!(effective_centrifugal(3, 0), 0.0);
    assert_eq!(effective_centrifugal(3, 1), 2.0);
    assert_eq!(effective_centrifugal(2, 0), -0.25);
}
