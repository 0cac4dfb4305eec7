use approx::assert_relative_eq;
use zzlab_core::bloch::{assemble_operator, critical_branch, parity_check, spectral_gap};
use zzlab_core::params::{axes_grid, symmetric_axis, tensor_grid, Params, SigmaPoint};
use zzlab_core::roll::{residual, roll_series_reference, solve_roll, RollError, RollSolution};

fn roll(eps: f64, kappa: f64) -> RollSolution {
    solve_roll(Params::new(eps, kappa).unwrap(), 32).unwrap()
}

#[test]
fn a1_at_eps_tenth() {
    let r = roll(0.1, 0.0);
    assert_relative_eq!(r.a_tilde, 0.115_470_05, epsilon = 1e-8);
    assert_relative_eq!(r.a1(), 0.115_473_1, epsilon = 1e-7);
    let (a1s, a3s) = roll_series_reference(0.1, 0.0);
    assert!((r.a1() - a1s).abs() <= 5.0 * r.a_tilde.powi(4));
    assert_relative_eq!(a3s, -6.01e-6, max_relative = 2e-3);
}

#[test]
fn degenerate_at_existence_edge() {
    let p = Params::new(0.2, 0.2).unwrap();
    assert!(matches!(solve_roll(p, 32), Err(RollError::DegenerateSolution { .. })));
    assert_eq!(roll_series_reference(0.2, 0.2), (0.0, 0.0));
    assert_eq!(p.a_tilde(), 0.0);
}

#[test]
fn residual_oracles() {
    let p = Params::new(0.1, 0.0).unwrap();
    let zero = RollSolution::from_coefficients(p, vec![0.0; 4]);
    assert_eq!(residual(&zero, 64), 0.0);
    // (a cos)^3 = a^3 (3 cos + cos 3)/4 and eps^2 = 3 a^2 / 4 leave -a^3/4 cos 3
    let at = p.a_tilde();
    let single = RollSolution::from_coefficients(p, vec![at, 0.0]);
    assert_relative_eq!(residual(&single, 64), at.powi(3) / 4.0, max_relative = 1e-12);
    let r = roll(0.1, 0.0);
    assert!(residual(&r, 8 * 32) <= 1e-10);
}

#[test]
fn roll_parity_and_tail() {
    for (eps, kappa) in [(0.1, 0.0), (0.3, -0.1), (0.45, 0.2)] {
        let r = roll(eps, kappa);
        for i in 0..50 {
            let xi = 0.13 * i as f64;
            assert!((r.eval(xi) - r.eval(-xi)).abs() <= 1e-12);
        }
        let last = r.coeffs.last().unwrap().abs();
        assert!(last < 1e-12 * r.a1());
        assert!(r.a1() > 0.0);
        let doubled = solve_roll(r.params, 64).unwrap();
        assert!((doubled.a1() - r.a1()).abs() < 1e-12);
    }
}

#[test]
fn operator_entries() {
    let p = Params::new(0.1, 0.0).unwrap();
    let zero = RollSolution::from_coefficients(p, vec![0.0; 2]);
    let m = assemble_operator(&zero, SigmaPoint::ORIGIN, 6).unwrap();
    let at = |j: i64| m.entries[((j + 6) as usize, (j + 6) as usize)].re;
    assert_relative_eq!(at(1), 0.01, max_relative = 1e-14);
    assert_relative_eq!(at(-1), 0.01, max_relative = 1e-14);
    assert_relative_eq!(at(3), -64.0 + 0.01, max_relative = 1e-14);
    let r = roll(0.2, 0.0);
    let m = assemble_operator(&r, SigmaPoint::new(0.07, -0.11), 64).unwrap();
    assert!(m.hermitian_defect() <= 1e-13);
    assert!(assemble_operator(&r, SigmaPoint::ORIGIN, 10).is_err());
}

#[test]
fn transverse_mode_decays_at_kappa_zero() {
    let r = roll(0.2, 0.0);
    let br = critical_branch(&r, &[SigmaPoint::ORIGIN, SigmaPoint::new(0.0, 0.05), SigmaPoint::new(0.0, 0.1)], 64).unwrap();
    assert!(br.lambdas[2] < 0.0);
    // independent dense solve
    let m = assemble_operator(&r, SigmaPoint::new(0.0, 0.1), 64).unwrap();
    assert!(m.eigenvalues()[0] < 0.0);
}

#[test]
fn zero_roll_gap_is_j0_entry() {
    let p = Params::new(0.1, 0.0).unwrap();
    let zero = RollSolution::from_coefficients(p, vec![0.0; 2]);
    let g = spectral_gap(&zero, &[SigmaPoint::ORIGIN], 8).unwrap();
    // j = +-1 both sit at eps^2; the second largest is the other one of the pair
    assert_relative_eq!(g, 0.01, max_relative = 1e-13);
    let m = assemble_operator(&zero, SigmaPoint::ORIGIN, 8).unwrap();
    assert_relative_eq!(m.eigenvalues()[2], -1.0 + 0.01, max_relative = 1e-13);
    let r = roll(0.1, 0.0);
    let coarse = spectral_gap(&r, &axes_grid(0.2, 4), 64).unwrap();
    let fine = spectral_gap(&r, &axes_grid(0.2, 16), 64).unwrap();
    assert!(coarse < 0.0);
    assert!(fine >= coarse - 1e-15);
}

#[test]
fn truncation_stability_and_symmetry() {
    let r = roll(0.2, -0.2f64.powi(4) / 512.0);
    let ax = symmetric_axis(0.15, 9);
    let grid = tensor_grid(&ax, &ax);
    let a = critical_branch(&r, &grid, 64).unwrap();
    let b = critical_branch(&r, &grid, 72).unwrap();
    for (x, y) in a.lambdas.iter().zip(&b.lambdas) {
        assert!((x - y).abs() <= 1e-10);
    }
    for (s, l) in a.grid.iter().zip(&a.lambdas) {
        let m1 = a.lambda_at(SigmaPoint::new(-s.sigma1, s.sigma2)).unwrap();
        let m2 = a.lambda_at(SigmaPoint::new(s.sigma1, -s.sigma2)).unwrap();
        assert!((l - m1).abs() <= 1e-10 && (l - m2).abs() <= 1e-10);
        assert!(*l <= 1e-12);
    }
    // second eigenvalue at the origin is far from 0
    let o = a.index_of(SigmaPoint::ORIGIN, 0.0).unwrap();
    assert!(a.second[o] < -1e-3);
}

#[test]
fn parity_and_linear_imaginary_part() {
    let grid: Vec<SigmaPoint> = [0.0, 0.01, 0.02, 0.04, 0.05].iter().map(|&s| SigmaPoint::new(s, 0.0)).collect();
    let ratios = |kappa: f64| -> Vec<f64> {
        let br = critical_branch(&roll(0.2, kappa), &grid, 64).unwrap();
        let rep = parity_check(&br).unwrap();
        assert!(rep.points[0].even_part_of_real <= 1e-10);
        let p05 = &rep.points[4];
        assert!(p05.even_part_of_real <= 1e-6 && p05.odd_part_of_imag <= 1e-6);
        rep.points[1..4].iter().map(|p| p.imag_norm / p.sigma.sigma1).collect()
    };
    let q = ratios(0.05);
    for x in &q {
        assert!((x / q[0] - 1.0).abs() <= 0.1, "{q:?}");
    }
    // at kappa = 0, mu_1 and mu_-1 agree to third order and the linear term nearly cancels
    let q0 = ratios(0.0);
    assert!(q0[0] < 0.01 * q[0], "{q0:?}");
}
