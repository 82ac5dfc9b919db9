use proptest::prelude::*;
use smoothing_lab::grids::RadialGrid;
use smoothing_lab::potentials::*;
use smoothing_lab::Error;

fn spec(kind: PotentialKind, role: PotentialRole) -> PotentialSpec {
    PotentialSpec::new(kind, role).unwrap()
}

fn repulsive(kind: PotentialKind) -> PotentialSpec {
    spec(kind, PotentialRole::VRepulsive)
}

fn well(mu: f64, b: f64) -> PotentialSpec {
    spec(
        PotentialKind::ExpWell {
            mu,
            b,
            gamma_g: 2.0,
            form: ExpWellForm::OmegaMinusMu,
        },
        PotentialRole::NAttractive,
    )
}

#[test]
fn relaxed_well_stays_below_its_total_variation() {
    let (mu, b) = (1.0, 0.1);
    let v = repulsive(PotentialKind::ExpWell {
        mu,
        b,
        gamma_g: 2.0,
        form: ExpWellForm::Relaxed,
    });
    // Simpson quadrature of g' = b/(1+r)² on [0, L] plus the exact tail b/(1+L).
    let (l, m) = (1000.0, 200_000);
    let h = l / m as f64;
    let g = |r: f64| b / (1.0 + r).powi(2);
    let mut s = g(0.0) + g(l);
    for k in 1..m {
        s += if k % 2 == 1 { 4.0 } else { 2.0 } * g(k as f64 * h);
    }
    let total = s * h / 3.0 + b / (1.0 + l);
    let bound = mu * (1.0 - (-total).exp());
    for r in [1e-3, 0.1, 1.0, 10.0, 1e3] {
        assert!(v.eval(r).unwrap().abs() <= bound * (1.0 + 1e-9));
    }
    assert!(v.eval(1e8).unwrap().abs() < 1e-8);
}

#[test]
fn repulsivity_of_zero_and_inverse_square() {
    let grid = RadialGrid::new(5, 0, 2000, 50.0).unwrap();
    let zero = check_repulsive(&PotentialSpec::zero(PotentialRole::VRepulsive), 5, 1.0, &grid).unwrap();
    assert!(zero.pass);
    assert_eq!(zero.eta, Some(1.0));
    let c = 0.1;
    let report = check_repulsive(&repulsive(PotentialKind::InversePower { c, gamma: 2.0 }), 5, 1.0, &grid).unwrap();
    assert!(report.pass);
    assert_eq!(report.chi, 0);
    for (i, l) in report.lhs.iter().enumerate() {
        let r = grid.node(i);
        assert!((l + c / (r * r)).abs() <= 1e-12 * c / (r * r));
    }
}

#[test]
fn homogeneous_potential_has_vanishing_envelope_in_three_dimensions() {
    let grid = RadialGrid::new(3, 0, 2000, 50.0).unwrap();
    for gamma in [0.5, 1.0, 1.5] {
        let v = repulsive(PotentialKind::InversePower { c: 0.3, gamma });
        let report = check_repulsive(&v, 3, gamma, &grid).unwrap();
        assert_eq!(report.chi, 1);
        assert!(report.moment.unwrap() < 1e-12);
        assert!(report.pass);
    }
}

#[test]
fn negative_potential_fails_with_its_node() {
    let grid = RadialGrid::new(5, 0, 100, 10.0).unwrap();
    let v = repulsive(PotentialKind::SmoothInversePower { c: -0.1, alpha: 2.0 });
    match check_repulsive(&v, 5, 1.0, &grid) {
        Err(Error::NegativePotential { node, .. }) => assert_eq!(node, 0),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn repulsivity_margin_is_monotone() {
    // 0.5·V has pointwise smaller V and smaller positive LHS.
    let grid = RadialGrid::new(5, 0, 1000, 30.0).unwrap();
    let v = repulsive(PotentialKind::SmoothInversePower { c: 1.0, alpha: 1.0 });
    let big = check_repulsive(&v, 5, 1.5, &grid).unwrap();
    let small = check_repulsive(&v.scaled(0.5), 5, 1.5, &grid).unwrap();
    assert!(small.eta.unwrap() >= big.eta.unwrap());
}

#[test]
fn constant_well_has_zero_beta() {
    let grid = RadialGrid::new(4, 0, 1000, 40.0).unwrap();
    let report = compute_beta_rho(&well(2.0, 0.0), 3.0, &grid).unwrap();
    assert_eq!(report.beta, 0.0);
    assert!(report.pass);
    let repulsive = spec(PotentialKind::SmoothInversePower { c: 1.0, alpha: 1.0 }, PotentialRole::NAttractive);
    assert!(matches!(compute_beta_rho(&repulsive, 3.0, &grid), Err(Error::SignViolation { .. })));
}

/// β over the grid by dense sampling of a closed-form `n`, with the radial
/// derivative taken by central differences.
fn brute_force_beta(mu: f64, b: f64, rho: f64, grid: &RadialGrid) -> f64 {
    let n = |r: f64| -mu * (b / (1.0 + r)).exp();
    let q = |r: f64| {
        let e = 1e-6 * r;
        (n(r + e) - n(r - e)) / (2.0 * e) / n(r).abs()
    };
    let h = grid.spacing();
    let sup = |a: f64, c: f64| {
        let m = (((c - a) / h) * 10.0).ceil() as usize;
        (0..=m).map(|k| q(a + (c - a) * k as f64 / m as f64)).fold(f64::NEG_INFINITY, f64::max)
    };
    let mut j = (rho.log2().ceil() as i32) - 1;
    if 2f64.powi(j + 1) < rho {
        j += 1;
    }
    let mut beta = rho * sup(h, rho).max(0.0);
    while 2f64.powi(j) < grid.r_max() {
        let (a, c) = (2f64.powi(j), 2f64.powi(j + 1).min(grid.r_max()));
        beta += 2f64.powi(j + 1) * sup(a, c).max(0.0);
        j += 1;
    }
    beta
}

#[test]
fn beta_matches_dense_sampling_and_shrinks_with_b() {
    let grid = RadialGrid::new(4, 0, 2000, 64.0).unwrap();
    let mut previous = f64::INFINITY;
    for b in [0.1, 0.01, 0.001] {
        let report = compute_beta_rho(&well(1.0, b), 3.0, &grid).unwrap();
        let oracle = brute_force_beta(1.0, b, 3.0, &grid);
        assert!((report.beta_grid - oracle).abs() <= 1e-6 * oracle, "b={b}: {} vs {oracle}", report.beta_grid);
        assert!(report.beta < previous);
        previous = report.beta;
    }
    assert!(previous < 1e-2);
}

#[test]
fn sobolev_split_hardy_constants() {
    let grid = RadialGrid::new(3, 0, 1000, 20.0).unwrap();
    let zero = check_sobolev_split(1.0, &PotentialSpec::zero(PotentialRole::NAttractive), 3, &grid).unwrap();
    assert_eq!((zero.c1, zero.pass), (0.0, true));
    for (c, c1, pass) in [(0.1, 0.4, true), (0.5, 2.0, false)] {
        let n2 = spec(PotentialKind::InversePower { c: -c, gamma: 2.0 }, PotentialRole::NAttractive);
        let report = check_sobolev_split(0.0, &n2, 3, &grid).unwrap();
        assert!((report.c1 - c1).abs() < 1e-12);
        assert_eq!(report.pass, pass);
    }
    let steep = spec(PotentialKind::InversePower { c: -0.1, gamma: 3.0 }, PotentialRole::NAttractive);
    assert!(matches!(check_sobolev_split(0.0, &steep, 3, &grid), Err(Error::UnsupportedSplit(_))));
}

#[test]
fn long_range_constants() {
    let grid = RadialGrid::new(3, 0, 2000, 40.0).unwrap();
    let zero = PotentialSpec::zero(PotentialRole::V2LongRange);
    let none = check_long_range(&PotentialSpec::zero(PotentialRole::V1LongRange), &zero, 1.0, &grid, &[1.0]).unwrap();
    assert_eq!(none.a, 0.0);
    assert_eq!(none.b_values[0].b, 0.0);

    let v1 = spec(PotentialKind::ShiftedInversePower { c: 1.0, gamma: 2.0 }, PotentialRole::V1LongRange);
    let report = check_long_range(&v1, &zero, 2.0, &grid, &[]).unwrap();
    assert!((report.a - 1.0).abs() < 1e-12);
    assert_eq!(report.constants[2], 0.0);

    let singular = spec(PotentialKind::InversePower { c: 1.0, gamma: 1.0 }, PotentialRole::V1LongRange);
    let report = check_long_range(&singular, &zero, 1.0, &grid, &[1.0]).unwrap();
    assert!(report.a.is_infinite());
    assert_eq!(report.failing, Some(DecayCondition::V1Size));
}

#[test]
fn long_range_constant_of_omega_is_stable_under_refinement() {
    let omega = spec(
        PotentialKind::ExpWell {
            mu: 1.0,
            b: 0.5,
            gamma_g: 2.0,
            form: ExpWellForm::Omega,
        },
        PotentialRole::V1LongRange,
    );
    let zero = PotentialSpec::zero(PotentialRole::V2LongRange);
    // The constant is attained at the first node, so it moves by O(h).
    let a: Vec<f64> = [2000, 4000, 8000]
        .iter()
        .map(|&n| check_long_range(&omega, &zero, 1.0, &RadialGrid::new(3, 0, n, 20.0).unwrap(), &[]).unwrap().a)
        .collect();
    assert!(a[0].is_finite() && a[0] > 0.0);
    for w in a.windows(2) {
        assert!((w[0] - w[1]).abs() <= 0.01 * w[1], "{a:?}");
    }
}

#[test]
fn b_tau0_is_monotone_on_a_lattice() {
    for d in [2, 3, 5] {
        for gamma in [0.5, 1.0, 2.0] {
            for i in 0..10 {
                let a = 0.05 * i as f64;
                let a_next = a + 0.05;
                for k in 1..=10 {
                    let tau0 = 0.1 * k as f64;
                    let b = compute_b_tau0(a, d, gamma, tau0).unwrap();
                    assert!(compute_b_tau0(a_next, d, gamma, tau0).unwrap() >= b);
                    if k < 10 {
                        assert!(compute_b_tau0(a, d, gamma, tau0 + 0.1).unwrap() <= b);
                    }
                }
            }
        }
    }
    // τ₀ = 1 gives the simplified 16a(d²−1)(1 + F(γ)) + a(2a+1).
    let a = 0.2;
    let simple = 16.0 * a * 8.0 * (1.0 + 4.0 / 3.0) + a * (2.0 * a + 1.0);
    assert!((compute_b_tau0(a, 3, 2.0, 1.0).unwrap() - simple).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn beta_is_scale_invariant(mu in 0.1f64..10.0, b in 0.001f64..0.5, scale in 0.1f64..20.0) {
        let grid = RadialGrid::new(4, 0, 500, 32.0).unwrap();
        let n = well(mu, b);
        let base = compute_beta_rho(&n, 2.5, &grid).unwrap();
        let scaled = compute_beta_rho(&n.scaled(scale), 2.5, &grid).unwrap();
        prop_assert!((base.beta - scaled.beta).abs() <= 1e-12 * base.beta.max(1e-300));
    }
}
