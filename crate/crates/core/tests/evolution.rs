use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smoothing_lab::evolution::*;
use smoothing_lab::grids::{dyadic_radii, ModeFunction, RadialGrid, Weight};
use smoothing_lab::helmholtz::{Boundary, Sign, TauConvention};
use smoothing_lab::potentials::{ManufacturedProfile, PotentialKind, PotentialRole, PotentialSpec};
use smoothing_lab::Error;
use std::f64::consts::PI;

fn random_mode(grid: RadialGrid, seed: u64) -> ModeFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..grid.len())
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    ModeFunction::new(grid, values).unwrap()
}

fn l2_diff(a: &ModeFunction, b: &ModeFunction) -> f64 {
    l2_norm_sqr(&a.add(&b.scale(Complex64::new(-1.0, 0.0))).unwrap()).sqrt()
}

fn repulsive(c: f64, gamma: f64) -> PotentialSpec {
    PotentialSpec::new(PotentialKind::InversePower { c, gamma }, PotentialRole::VRepulsive).unwrap()
}

#[test]
fn free_dirichlet_eigenvalues_converge_at_second_order() {
    let length = 10.0;
    let mut errors = Vec::new();
    for n in [199, 399, 799] {
        let h = length / (n + 1) as f64;
        let grid = RadialGrid::new(3, 0, n, length - h).unwrap();
        let spectrum = free_spectrum(&grid).unwrap();
        let values = spectrum.real_eigenvalues().unwrap();
        assert!(values.windows(2).all(|w| w[0] <= w[1]));
        let mut worst: f64 = 0.0;
        for k in 1..=20 {
            let exact = (k as f64 * PI / length).powi(2);
            worst = worst.max((values[k - 1] - exact).abs() / exact);
            // Discrete symbol of the three-point Laplacian.
            let symbol = (2.0 - 2.0 * (k as f64 * PI / (n + 1) as f64).cos()) / (h * h);
            assert!((values[k - 1] - symbol).abs() <= 1e-9 * symbol);
        }
        errors.push(worst);
    }
    assert!(errors[0] / errors[1] > 3.9 && errors[1] / errors[2] > 3.9, "{errors:?}");
}

#[test]
fn zero_mode_potential_has_near_zero_eigenvalue() {
    let zero_mode = PotentialSpec::new(
        PotentialKind::Manufactured(ManufacturedProfile::ZeroMode { lambda: -2.0, d: 3 }),
        PotentialRole::NAttractive,
    )
    .unwrap();
    let mut residuals = Vec::new();
    let mut nearest = Vec::new();
    for n in [400, 800, 1600] {
        let grid = RadialGrid::new(3, 0, n, 20.0).unwrap();
        let u = ModeFunction::from_real_fn(grid, |r| (1.0 + r * r).powi(-2));
        let hu = apply_hamiltonian(&grid, std::slice::from_ref(&zero_mode), &u).unwrap();
        // Skip the last nodes, where the truncated tail meets the wall.
        let interior = (n as f64 * 0.9) as usize;
        residuals.push(hu.values()[..interior].iter().map(|z| z.norm()).fold(0.0, f64::max));
        let spectrum = diagonalize(&grid, std::slice::from_ref(&zero_mode), Boundary::Dirichlet).unwrap();
        nearest.push(spectrum.real_eigenvalues().unwrap().iter().map(|l| l.abs()).fold(f64::INFINITY, f64::min));
    }
    assert!(residuals[0] / residuals[1] > 3.5 && residuals[1] / residuals[2] > 3.5, "{residuals:?}");
    let h = 20.0 / 400.0;
    assert!(nearest[0] < 5.0 * h * h, "{nearest:?}");
    assert!(nearest[0] / nearest[1] > 3.5 && nearest[1] / nearest[2] > 3.5, "{nearest:?}");
}

#[test]
fn projections_are_orthogonal() {
    let grid = RadialGrid::new(3, 1, 300, 30.0).unwrap();
    let spectrum = diagonalize(&grid, &[repulsive(0.1, 2.0)], Boundary::Dirichlet).unwrap();
    let u = random_mode(grid, 1);
    let v = random_mode(grid, 2);
    let interval = SpectralInterval::at_least(1.0);
    let pu = spectral_project(&spectrum, interval, &u).unwrap();
    assert!(!pu.empty && pu.modes > 0);
    let ppu = spectral_project(&spectrum, interval, &pu.function).unwrap();
    assert!(l2_diff(&ppu.function, &pu.function) <= 1e-10 * l2_norm_sqr(&u).sqrt());
    let pv = spectral_project(&spectrum, interval, &v).unwrap();
    let lhs = l2_inner(&pu.function, &v).unwrap();
    let rhs = l2_inner(&u, &pv.function).unwrap();
    assert!((lhs - rhs).norm() <= 1e-10 * (l2_norm_sqr(&u) * l2_norm_sqr(&v)).sqrt());

    let all = spectral_project(&spectrum, SpectralInterval::at_least(f64::NEG_INFINITY), &u).unwrap();
    assert!(l2_diff(&all.function, &u) <= 1e-10 * l2_norm_sqr(&u).sqrt());
    let top = spectrum.real_eigenvalues().unwrap().last().copied().unwrap();
    let none = spectral_project(&spectrum, SpectralInterval::at_least(top + 1.0), &u).unwrap();
    assert!(none.empty && none.modes == 0);
    assert_eq!(none.function.max_abs(), 0.0);
}

#[test]
fn parseval_holds() {
    let grid = RadialGrid::new(4, 0, 250, 25.0).unwrap();
    let spectrum = diagonalize(&grid, &[repulsive(0.3, 1.0)], Boundary::Dirichlet).unwrap();
    let u = random_mode(grid, 3);
    let c = spectrum.coefficients(&u).unwrap();
    let sum: f64 = c.iter().map(|z| z.norm_sqr()).sum();
    assert!((sum - l2_norm_sqr(&u)).abs() <= 1e-10 * sum);
    let back = spectrum.synthesize(&c).unwrap();
    assert!(l2_diff(&back, &u) <= 1e-10 * sum.sqrt());
}

#[test]
fn half_derivative_composition() {
    let grid = RadialGrid::new(3, 2, 300, 20.0).unwrap();
    let free = free_spectrum(&grid).unwrap();
    let values = free.real_eigenvalues().unwrap().to_vec();
    let phi = free.eigenfunction(7);
    let d_phi = half_derivative(&phi, &free).unwrap();
    assert!(l2_diff(&d_phi, &phi.scale(Complex64::new(values[7].powf(0.25), 0.0))) <= 1e-10 * values[7].powf(0.25));

    let u = random_mode(grid, 4);
    let twice = half_derivative(&half_derivative(&u, &free).unwrap(), &free).unwrap();
    let sqrt = spectral_power(&free, &u, 0.5).unwrap();
    assert!(l2_diff(&twice, &sqrt) <= 1e-10 * l2_norm_sqr(&sqrt).sqrt());

    assert_eq!(half_derivative(&ModeFunction::zeros(grid), &free).unwrap().max_abs(), 0.0);
    let not_free = diagonalize(&grid, &[repulsive(1.0, 2.0)], Boundary::Dirichlet).unwrap();
    assert!(matches!(half_derivative(&u, &not_free), Err(Error::Domain(_))));
}

#[test]
fn propagator_is_unitary_and_a_group() {
    let grid = RadialGrid::new(3, 0, 300, 30.0).unwrap();
    let spectrum = diagonalize(&grid, &[repulsive(0.1, 2.0)], Boundary::Dirichlet).unwrap();
    let u = random_mode(grid, 5);
    let norm = l2_norm_sqr(&u).sqrt();
    assert!(l2_diff(&propagate(&spectrum, &u, 0.0).unwrap(), &u) <= 1e-12 * norm);
    for t in [-3.0, 0.7, 12.5] {
        let ut = propagate(&spectrum, &u, t).unwrap();
        assert!((l2_norm_sqr(&ut).sqrt() - norm).abs() <= 1e-10 * norm);
    }
    let (t, s) = (1.3, -0.45);
    let composed = propagate(&spectrum, &propagate(&spectrum, &u, s).unwrap(), t).unwrap();
    let direct = propagate(&spectrum, &u, t + s).unwrap();
    assert!(l2_diff(&composed, &direct) <= 1e-9 * norm);

    let interval = SpectralInterval::at_least(0.5);
    let a = propagate(&spectrum, &spectral_project(&spectrum, interval, &u).unwrap().function, t).unwrap();
    let b = spectral_project(&spectrum, interval, &propagate(&spectrum, &u, t).unwrap()).unwrap().function;
    assert!(l2_diff(&a, &b) <= 1e-9 * norm);
}

#[test]
fn absorbing_layer_spectrum_damps_both_directions() {
    let grid = RadialGrid::new(3, 0, 300, 30.0).unwrap();
    let boundary = Boundary::Sponge { width: 0.3, strength: 2.0 };
    let spectrum = diagonalize(&grid, &[], boundary).unwrap();
    assert!(!spectrum.is_real());
    assert!(spectrum.eigenvalues().iter().all(|l| l.im <= 1e-9));
    let u = ModeFunction::from_real_fn(grid, |r| (-(r - 5.0).powi(2)).exp());
    let norm = l2_norm_sqr(&u);
    let mut last = norm;
    for t in [0.0, 4.0, 8.0, 16.0, 24.0] {
        let forward = l2_norm_sqr(&propagate(&spectrum, &u, t).unwrap());
        let backward = l2_norm_sqr(&propagate(&spectrum, &u, -t).unwrap());
        assert!(forward <= last * (1.0 + 1e-8), "t = {t}: {forward} > {last}");
        assert!((forward - backward).abs() <= 1e-8 * norm);
        last = forward;
    }
    assert!(last < 0.5 * norm);
    let large = RadialGrid::new(3, 0, MAX_COMPLEX_SIZE + 1, 30.0).unwrap();
    assert!(matches!(diagonalize(&large, &[], boundary), Err(Error::Size(_))));
}

#[test]
fn smoothing_functional_guards_and_trivial_cases() {
    let grid = RadialGrid::new(3, 0, 400, 40.0).unwrap();
    let spectrum = free_spectrum(&grid).unwrap();
    let zero = smoothing_functional(
        &spectrum,
        &ModeFunction::zeros(grid),
        &Weight::BallAverage(2.0),
        SmoothingDerivative::Half(&spectrum),
        1.0,
        0.01,
        DEFAULT_RETENTION,
    )
    .unwrap();
    assert_eq!(zero.value, 0.0);

    let u = ModeFunction::from_real_fn(grid, |r| (-(r / 2.0).powi(2)).exp());
    let guard = smoothing_functional(&spectrum, &u, &Weight::One, SmoothingDerivative::None, 1e3, 0.01, DEFAULT_RETENTION);
    assert!(matches!(guard, Err(Error::Guard { .. })));
    let coarse = smoothing_functional(&spectrum, &u, &Weight::One, SmoothingDerivative::None, 1.0, 1.0, DEFAULT_RETENTION);
    assert!(matches!(coarse, Err(Error::Rejected(_))));

    // With weight one the integrand is the conserved mass.
    let norm = l2_norm_sqr(&u);
    let short = smoothing_functional(&spectrum, &u, &Weight::One, SmoothingDerivative::None, 1.0, 0.05, DEFAULT_RETENTION).unwrap();
    let long = smoothing_functional(&spectrum, &u, &Weight::One, SmoothingDerivative::None, 2.0, 0.05, DEFAULT_RETENTION).unwrap();
    let (a, b) = (short.value / 2.0, long.value / 4.0);
    assert!((a - b).abs() <= 0.05 * b);
    assert!((b - norm).abs() <= 1e-3 * norm);
}

#[test]
fn free_local_smoothing_is_uniform_in_radius() {
    let grid = RadialGrid::new(3, 0, 1200, 84.0).unwrap();
    let free = free_spectrum(&grid).unwrap();
    let u = ModeFunction::from_real_fn(grid, |r| (-(r / 1.5).powi(2)).exp());
    let norm = l2_norm_sqr(&u);
    let values: Vec<f64> = [1.0, 2.0, 4.0, 8.0]
        .iter()
        .map(|&radius| {
            smoothing_functional(
                &free,
                &u,
                &Weight::BallAverage(radius),
                SmoothingDerivative::Half(&free),
                4.0,
                0.02,
                DEFAULT_RETENTION,
            )
            .unwrap()
            .value
                / norm
        })
        .collect();
    let max = values.iter().copied().fold(0.0, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(max / min <= 4.0, "{values:?}");
}

#[test]
fn low_energy_probe_separates_potential_from_free_case() {
    let grid = RadialGrid::new(3, 0, 1000, 400.0).unwrap();
    let radii = dyadic_radii(&grid, 0.0, grid.r_max());
    let with_v = diagonalize(&grid, &[repulsive(1.0, 0.5)], Boundary::Dirichlet).unwrap();
    let free = free_spectrum(&grid).unwrap();
    let per_delta = |s: &Spectrum| -> Vec<f64> {
        [0.5, 0.25, 0.125]
            .iter()
            .map(|&delta| {
                let p = low_energy_probe(s, delta, 0.5, &radii).unwrap();
                assert!(!p.empty);
                p.value / delta
            })
            .collect()
    };
    let v = per_delta(&with_v);
    assert!(v.iter().all(|x| *x <= 2.0 * v[0]), "{v:?}");
    let f = per_delta(&free);
    assert!(f[2] > 1.3 * f[0], "{f:?}");
    let empty = low_energy_probe(&with_v, 1e-6, 0.5, &radii).unwrap();
    assert!(empty.empty && empty.value == 0.0);
}

fn sweep_config(estimate: Estimate, family: DataFamily) -> SweepConfig {
    SweepConfig {
        grid: RadialGrid::new(3, 0, 1000, 30.0).unwrap(),
        potentials: vec![repulsive(0.1, 2.0)],
        boundary: Boundary::Sponge { width: 0.3, strength: 10.0 },
        sign: Sign::Plus,
        estimate,
        tau_list: vec![-1.0, 1.0],
        epsilon_list: vec![0.01, 0.1, 1.0],
        radius_list: vec![1.0, 4.0],
        rho: 1.0,
        alpha: 0.5,
        conventions: vec![TauConvention::MinusTau],
        data: DataSpec {
            family,
            seed: 11,
            count: 3,
            amplitude: 1.0,
        },
        leak_threshold: 1e-3,
    }
}

#[test]
fn zero_data_give_zero_ratios() {
    let report = supersmooth_sweep(&sweep_config(Estimate::Basic, DataFamily::Zero)).unwrap();
    assert!(!report.rows.is_empty());
    assert!(report.rows.iter().all(|r| r.ratio == 0.0));
    assert!(report.aggregates.iter().all(|a| a.spread == 1.0 && a.slope == 0.0));
}

#[test]
fn sweep_is_homogeneous_and_deterministic() {
    for estimate in [Estimate::Basic, Estimate::WeightedSinpeque, Estimate::Juan14Kato] {
        let base = sweep_config(estimate, DataFamily::DyadicBumps);
        let mut scaled = base.clone();
        scaled.data.amplitude = 37.5;
        let mut binary = base.clone();
        binary.data.amplitude = 0.25;
        let a = supersmooth_sweep(&base).unwrap();
        let b = supersmooth_sweep(&scaled).unwrap();
        let again = supersmooth_sweep(&base).unwrap();
        let exact = supersmooth_sweep(&binary).unwrap();
        for (x, y) in a.rows.iter().zip(&exact.rows) {
            assert_eq!(x.ratio, y.ratio);
        }
        assert_eq!(a, again);
        assert_eq!(a.rows.len(), b.rows.len());
        for (x, y) in a.rows.iter().zip(&b.rows) {
            assert_eq!(x.lhs_term, y.lhs_term);
            // The scale is inexact in binary; near resonance the solve
            // amplifies the rounding by roughly 1/ε.
            assert!((x.ratio - y.ratio).abs() <= 1e-9 * x.ratio.abs(), "{x:?} vs {y:?}");
        }
    }
}

#[test]
fn basic_terms_are_nonnegative_and_bounded_by_the_total() {
    let report = supersmooth_sweep(&sweep_config(Estimate::Basic, DataFamily::Gaussians)).unwrap();
    let labels: Vec<&str> = report.rows.iter().take(5).map(|r| r.lhs_term.as_str()).collect();
    assert_eq!(labels, ["grad_x", "tau_x", "v_over_r", "ball_r3", "total"]);
    for point in report.rows.chunks(5) {
        let total = point[4].ratio;
        assert!(total > 0.0);
        for row in &point[..4] {
            assert!(row.ratio >= 0.0 && row.ratio <= total * (1.0 + 1e-12));
        }
        if point[0].tau < 0.0 {
            assert_eq!(point[1].ratio, 0.0);
        }
    }
}

#[test]
fn negative_tau_ratios_are_uniform_in_epsilon() {
    let report = supersmooth_sweep(&sweep_config(Estimate::Basic, DataFamily::Shells)).unwrap();
    for a in report.aggregates.iter().filter(|a| a.tau < 0.0 && a.lhs_term != "tau_x") {
        assert!(a.spread < 1.5 && a.meets_decade_criterion(), "{a:?}");
    }
}

#[test]
fn leaking_lattice_is_reported_with_histogram() {
    let mut config = sweep_config(Estimate::Basic, DataFamily::Gaussians);
    config.boundary = Boundary::Dirichlet;
    config.tau_list = vec![4.0];
    config.epsilon_list = vec![1e-3];
    match supersmooth_sweep(&config) {
        Err(Error::AllContaminated { histogram }) => {
            assert_eq!(histogram.iter().sum::<usize>(), 1);
            assert!(histogram[..5].iter().all(|&c| c == 0));
        }
        other => panic!("expected contamination, got {other:?}"),
    }
}

#[test]
fn every_estimate_produces_its_terms() {
    let expect: [(Estimate, &[&str]); 6] = [
        (Estimate::Basic, &["grad_x", "tau_x", "v_over_r", "ball_r3", "total"]),
        (Estimate::BasicAttractive, &["grad_x", "tau_x", "v_over_r", "sphere", "n_x", "total"]),
        (Estimate::Mayo10, &["grad_x", "tau_x", "sphere", "total"]),
        (Estimate::WeightedSinpeque, &["grad_weighted", "tau_weighted", "total"]),
        (Estimate::Juan10Kato, &["kato_im", "kato_abs"]),
        (Estimate::Juan14Kato, &["kato_im", "kato_abs"]),
    ];
    for (estimate, labels) in expect {
        let mut config = sweep_config(estimate, DataFamily::Gaussians);
        config.grid = RadialGrid::new(3, 0, 400, 30.0).unwrap();
        config.conventions = vec![TauConvention::MinusTau, TauConvention::PlusTau];
        let report = supersmooth_sweep(&config).unwrap();
        let first: Vec<&str> = report.rows.iter().take(labels.len()).map(|r| r.lhs_term.as_str()).collect();
        assert_eq!(first, labels, "{}", estimate.name());
        assert!(report.rows.iter().any(|r| r.estimate.ends_with("/plus_tau")));
        assert!(report.rows.iter().all(|r| r.ratio.is_finite() && r.ratio >= 0.0));
        let per_point = labels.len();
        let radii = if matches!(estimate, Estimate::Juan10Kato | Estimate::Juan14Kato) { 2 } else { 1 };
        assert_eq!(report.rows.len(), report.kept_points * per_point);
        assert_eq!(report.kept_points + report.dropped_points, 2 * 2 * 3 * radii);
    }
}

#[test]
fn data_families_respect_support_and_seed() {
    let grid = RadialGrid::new(3, 1, 500, 50.0).unwrap();
    for family in DataFamily::ALL {
        let spec = DataSpec {
            family,
            seed: 99,
            count: 6,
            amplitude: 2.0,
        };
        let a = generate_data(&grid, &spec, 20.0).unwrap();
        let b = generate_data(&grid, &spec, 20.0).unwrap();
        assert_eq!(a, b);
        for f in &a {
            for (i, z) in f.values().iter().enumerate() {
                if grid.node(i) > 20.0 + 1e-9 {
                    assert_eq!(z.norm(), 0.0);
                }
            }
            assert_eq!(f.max_abs() == 0.0, family == DataFamily::Zero);
        }
    }
}
