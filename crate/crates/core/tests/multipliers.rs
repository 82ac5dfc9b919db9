use smoothing_lab::grids::{ModeFunction, RadialGrid};
use smoothing_lab::multipliers::*;
use smoothing_lab::numeric::observed_orders;

fn grid(d: usize, n: usize, r_max: f64) -> RadialGrid {
    RadialGrid::new(d, 0, n, r_max).unwrap()
}

#[test]
fn morawetz_first_derivative_limits_and_bounds() {
    let g = grid(3, 2000, 200.0);
    let p = morawetz_profile(1.0, &g).unwrap();
    let first = p.first_derivative();
    let second = p.second_derivative();
    assert!((first[0] - 1.0).abs() < 0.2);
    assert!((first[first.len() - 1] - 2.0).abs() < 1e-4);
    for (i, (a, b)) in first.iter().zip(&second).enumerate() {
        let r = g.node(i);
        assert!((1.0..=2.0).contains(a));
        assert!((0.0..=1.0).contains(&(r * b)));
    }
}

#[test]
fn morawetz_bilaplacian_matches_explicit_formula() {
    // Independent closed form, derived by hand from Φ = (1+r²)^{1/2} + r.
    let explicit = |d: f64, r: f64| {
        let q = 1.0 + r * r;
        -(d - 1.0) * (d - 3.0) / q.powf(1.5) - 6.0 * (d - 3.0) / q.powf(2.5) - 15.0 / q.powf(3.5) - (d - 1.0) * (d - 3.0) / r.powi(3)
    };
    for d in 2..=6 {
        for r in [0.1, 0.5, 1.0, 2.0, 7.0] {
            let a = morawetz_bilaplacian(d, r);
            let b = explicit(d as f64, r);
            assert!((a - b).abs() < 1e-12 * b.abs().max(1.0), "d={d} r={r}: {a} vs {b}");
        }
    }
    assert!((morawetz_bilaplacian(5, 1.0) + 14.275_572_683_030_6).abs() < 1e-10);
}

#[test]
fn morawetz_lower_bounds_near_origin() {
    for d in [4usize, 5, 6] {
        let g = grid(d, 1000, 10.0);
        let p = morawetz_profile(1.0, &g).unwrap();
        let bilap = p.bilaplacian().unwrap();
        let bound = (d * (d + 2)) as f64 / (8.0 * 2f64.sqrt());
        for i in 0..g.len() {
            if g.node(i) <= 1.0 {
                assert!(-bilap[i] >= bound, "d={d} r={}", g.node(i));
            }
        }
    }
    let g = grid(3, 1000, 10.0);
    let p = morawetz_profile(1.0, &g).unwrap();
    let (first, second) = (p.first_derivative(), p.second_derivative());
    let floor = 1.0 / (2.0 * 2f64.sqrt());
    for i in 0..g.len() {
        let r = g.node(i);
        if r <= 1.0 {
            // The infimum is attained at r = 1, so allow rounding there.
            assert!(second[i].min((first[i] - 1.0) / r) >= floor * (1.0 - 1e-12));
        }
    }
}

#[test]
fn morawetz_scaling_is_exact() {
    let g = grid(4, 800, 16.0);
    let big = morawetz_profile(4.0, &g).unwrap();
    for i in (0..g.len()).step_by(37) {
        let r = g.node(i);
        let s = r / 4.0;
        assert!((big.first_derivative()[i] - morawetz_first(s)).abs() < 1e-12);
        assert!((big.second_derivative()[i] - morawetz_second(s) / 4.0).abs() < 1e-12);
        assert!((big.bilaplacian().unwrap()[i] - morawetz_bilaplacian(4, s) / 64.0).abs() < 1e-12);
    }
}

#[test]
fn laplacian_is_consistent_with_radial_calculus() {
    let g = grid(5, 500, 10.0);
    for p in [morawetz_profile(2.0, &g).unwrap(), piecewise_profile(2.0, &g).unwrap()] {
        let (first, second, lap) = (p.first_derivative(), p.second_derivative(), p.laplacian());
        for i in 0..g.len() {
            let expected = second[i] + 4.0 * first[i] / g.node(i);
            assert!((lap[i] - expected).abs() < 1e-12 * expected.abs().max(1.0));
        }
    }
}

#[test]
fn piecewise_family_values_and_atom() {
    let g = grid(3, 400, 8.0);
    let p = piecewise_profile(2.003, &g).unwrap();
    assert_eq!(p.radius(), 2.0);
    assert!((p.meta().snap_distance - 0.003).abs() < 1e-12);
    let weight = p.ball_weight().unwrap().node_values(&g);
    for i in 0..g.len() {
        let r = g.node(i);
        if r > 2.0 {
            assert_eq!(weight[i], 0.0);
        } else if r < 2.0 {
            assert_eq!(weight[i], 0.25);
        }
    }
    let atoms = p.combo_laplacian().unwrap().atoms();
    assert_eq!(atoms.len(), 1);
    assert_eq!(atoms[0].radius, 2.0);
    assert!((atoms[0].mass - 0.5).abs() < 1e-15);
    assert!(p.bilaplacian().is_none());
}

#[test]
fn quadratic_form_of_constant_radial_mode_vanishes() {
    let g = grid(3, 200, 10.0);
    let p = morawetz_profile(1.0, &g).unwrap();
    let u = ModeFunction::from_real_fn_with_derivative(g, |_| 1.0, |_| 0.0);
    assert!(quadratic_form_density(&p, &u).unwrap().iter().all(|&q| q == 0.0));
}

#[test]
fn quadratic_form_of_gaussian_matches_closed_form() {
    let g = grid(3, 2000, 8.0);
    let p = morawetz_profile(1.0, &g).unwrap();
    let u = ModeFunction::from_real_fn(g, |r| (-r * r).exp());
    let q = quadratic_form_density(&p, &u).unwrap();
    let h = g.spacing();
    for i in 0..g.len() {
        let r = g.node(i);
        let exact = morawetz_second(r) * 4.0 * r * r * (-2.0 * r * r).exp();
        assert!((q[i] - exact).abs() < 50.0 * h.powi(4) + 1e-12, "r={r}");
    }
}

/// `Φ(x) = (1+|x|²)^{1/2} + |x|` in three dimensions.
fn morawetz_phi(x: [f64; 3]) -> f64 {
    let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
    (1.0 + r2).sqrt() + r2.sqrt()
}

fn hessian_fd(x: [f64; 3], step: f64) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            let eval = |sa: f64, sb: f64| {
                let mut y = x;
                y[a] += sa * step;
                y[b] += sb * step;
                morawetz_phi(y)
            };
            out[a][b] = (eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0) + eval(-1.0, -1.0)) / (4.0 * step * step);
        }
    }
    out
}

#[test]
fn quadratic_form_agrees_with_cartesian_hessian() {
    // ℓ = 0 mode u = f(r): ∇u = f'(r) x/|x|, contracted with a difference Hessian.
    let f = |r: f64| (-0.3 * r * r).exp() * (1.0 + r);
    let df = |r: f64| (-0.3 * r * r).exp() * (1.0 - 0.6 * r * (1.0 + r));
    let g = grid(3, 4000, 8.0);
    let p = morawetz_profile(1.0, &g).unwrap();
    let u = ModeFunction::from_real_fn_with_derivative(g, f, df);
    let q = quadratic_form_density(&p, &u).unwrap();
    let mut checked = 0;
    for k in 0..20 {
        let i = 60 + 150 * k;
        let r = g.node(i);
        let theta = 0.3 + 0.11 * k as f64;
        let phi = 0.7 * k as f64;
        let dir = [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()];
        let x = [r * dir[0], r * dir[1], r * dir[2]];
        let hess = hessian_fd(x, 1e-4);
        let grad = dir.map(|c| df(r) * c);
        let mut contraction = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                contraction += grad[a] * hess[a][b] * grad[b];
            }
        }
        let rel = (contraction - q[i]).abs() / q[i].abs().max(1e-12);
        assert!(rel <= 1e-4, "r={r}: {contraction} vs {}", q[i]);
        checked += 1;
    }
    assert_eq!(checked, 20);
}

#[test]
fn bilaplacian_residual_of_linear_multiplier_is_zero() {
    let g = grid(3, 200, 10.0);
    let check = bilaplacian_residual_samples(&g, &vec![0.7; 200], &vec![0.0; 200], &[]).unwrap();
    assert!(check.max_absolute < 1e-9);
    assert!(bilaplacian_residual_samples(&grid(3, 12, 1.0), &[1.0; 12], &[0.0; 12], &[]).is_err());
}

#[test]
fn morawetz_bilaplacian_reconstruction_converges() {
    let mut errors = Vec::new();
    for n in [200, 400, 800] {
        let g = grid(5, n, 10.0);
        let p = morawetz_profile(1.0, &g).unwrap();
        let check = bilaplacian_residual(&p, &p.bilaplacian().unwrap()).unwrap();
        errors.push(check.max_relative);
    }
    for order in observed_orders(&errors) {
        assert!(order >= 1.9, "{errors:?}");
    }
}

#[test]
fn psi_weight_brackets() {
    let g = grid(3, 1000, 50.0);
    for big_r in [0.5, 4.0, 20.0] {
        let w = psi_weight(big_r, &g).unwrap();
        assert!(w.below_inverse_radius && w.below_radius_over_r2 && w.below_inverse_r && w.above_half_ball);
        for (v, inv) in w.values.iter().zip(&w.reciprocal) {
            assert!((v * inv - 1.0).abs() < 1e-15);
        }
    }
    assert_eq!(psi(4.0, 0.0), 0.25);
}

fn interval_family() -> Vec<(f64, f64)> {
    (0..200)
        .map(|k| {
            let center = 0.01 * 10f64.powf(5.0 * k as f64 / 199.0);
            let fraction = 0.05 + 0.9 * ((k * 37) % 200) as f64 / 200.0;
            (center, center * fraction)
        })
        .collect()
}

#[test]
fn a2_products_are_uniform_in_radius() {
    let report = check_a2(&[1.0, 8.0, 64.0], &interval_family(), 3).unwrap();
    assert!(report.spread <= 2.0, "{report:?}");
    for (_, sup) in &report.sups {
        assert!(*sup >= 1.0);
    }
    assert!(check_a2(&[1.0], &[], 3).is_err());
}

#[test]
fn a2_degenerate_cases() {
    assert!((a2_product(|_| 3.0, 2.0, 1.0, 3) - 1.0).abs() < 1e-14);
    let narrow = a2_product(|r| psi(1.0, r), 2.0, 1e-4, 3);
    assert!((narrow - 1.0).abs() < 1e-7);
}

#[test]
fn construction_without_h_reaches_epsilon_over_six() {
    let g = grid(3, 4000, 20.0);
    let p = appendix2_construct(&HProfile::Zero, 0.6, 1.0, 0.1, 0.4, &g).unwrap();
    let meta = p.meta();
    assert!((meta.phi_prime_limit.unwrap() - 0.1).abs() < 1e-9, "{meta:?}");
    // Closed form of the compact part outside the ball: ε/6 − εR²/(30r²).
    let last = g.len() - 1;
    let r = g.node(last);
    let closed = 0.1 - 0.6 / (30.0 * r * r);
    assert!((p.first_derivative()[last] - 0.1 - closed).abs() < 1e-6);
    let first = p.first_derivative();
    let second = p.second_derivative();
    for i in 0..g.len() {
        let r = g.node(i);
        let (phi1, phi2) = if r < 1.0 {
            (0.06 * (r - r.powi(3) / 3.0) + 0.04 * r, 0.06 * (1.0 - r * r) + 0.04)
        } else {
            (0.1 - 0.02 / (r * r), 0.04 / r.powi(3))
        };
        assert!((first[i] - 0.1 - phi1).abs() < 1e-7, "r={r}");
        assert!((second[i] - phi2).abs() < 1e-7, "r={r} {} {phi2}", second[i]);
        assert!(first[i] - 0.1 <= 0.1);
        assert!(first[i] > 0.1 && first[i] < 0.4);
    }
    assert!(meta.measured_c.unwrap() > 0.0);
}

#[test]
fn construction_with_decaying_h_meets_its_target() {
    let g = grid(3, 4000, 20.0);
    let h = HProfile::PowerDecay {
        amplitude: 0.05,
        exponent: 3.0,
    };
    let p = appendix2_construct(&h, 0.6, 1.0, 0.1, 0.4, &g).unwrap();
    assert!((p.meta().moment.unwrap() - 0.025).abs() < 1e-9);
    let check = bilaplacian_residual(&p, &p.bilaplacian().unwrap()).unwrap();
    assert!(check.max_relative <= 1e-4, "{check:?}");
    for (a, b) in p.first_derivative().iter().zip(p.second_derivative()) {
        assert!(*a > 0.1 && *a < 0.4 && b >= 0.0);
    }
}

#[test]
fn construction_refuses_violated_hypothesis_and_heavy_tails() {
    let g = grid(3, 400, 20.0);
    let heavy = HProfile::PowerDecay {
        amplitude: 0.05,
        exponent: 2.0,
    };
    assert!(matches!(
        appendix2_construct(&heavy, 0.6, 1.0, 0.1, 0.4, &g),
        Err(smoothing_lab::Error::TailBound(_))
    ));
    match appendix2_construct(&HProfile::Zero, 1.8, 1.0, 0.1, 0.4, &g) {
        Err(smoothing_lab::Error::Hypothesis { margin, .. }) => assert!((margin + 0.0).abs() < 1e-12 || margin < 0.0),
        other => panic!("expected a hypothesis error, got {other:?}"),
    }
}
