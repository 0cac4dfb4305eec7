use statrs::function::erf::erf;
use statrs::function::gamma::gamma;
use zzlab_core::fit::{fit_decay, logspace};
use zzlab_core::semigroup::{decay_curve, kernel_norm, DecayLawSpec, NormKind, SemigroupError};

const PI: f64 = std::f64::consts::PI;

#[test]
fn unit_law_integral_against_special_functions() {
    let s = DecayLawSpec::new(1.0, 1.0, 4, 0).unwrap();
    let v = kernel_norm(&s, 1.0, NormKind::Integral).unwrap();
    let whole_line = PI.sqrt() * 2.0 * gamma(1.25);
    assert!((whole_line - 3.21312).abs() < 1e-5);
    assert!(v < whole_line);
    let cell = PI.sqrt() * erf(0.5) * 2.0 * gamma(1.25);
    assert!((v - cell).abs() <= 1e-9 * cell, "{v} vs {cell}");
}

#[test]
fn off_boundary_integral_against_closed_form() {
    // int e^{-t s^2} over the cell times sqrt(pi / t)
    let s = DecayLawSpec::new(1.0, 1.0, 2, 0).unwrap();
    for t in [0.5, 3.0, 40.0] {
        let want = (PI / t).sqrt() * erf(0.5 * t.sqrt()) * (PI / t).sqrt();
        let got = kernel_norm(&s, t, NormKind::Integral).unwrap();
        assert!((got - want).abs() <= 1e-9 * want);
    }
    let s1 = DecayLawSpec::new(1.0, 1.0, 2, 1).unwrap();
    // int |s| e^{-t s^2} over the cell = (1 - e^{-t/4}) / t
    let t = 7.0;
    let want = (1.0 - (-t / 4.0f64).exp()) / t * (PI / t).sqrt();
    assert!((kernel_norm(&s1, t, NormKind::Integral).unwrap() - want).abs() <= 1e-9 * want);
}

#[test]
fn sup_kind_values_and_slopes() {
    for (d1, d2) in [(1.0, 1.0), (0.3, 2.0)] {
        let s0 = DecayLawSpec::new(d1, d2, 4, 0).unwrap();
        for t in [0.1, 1.0, 100.0] {
            assert_eq!(kernel_norm(&s0, t, NormKind::Sup).unwrap(), 1.0);
        }
        let s1 = DecayLawSpec::new(d1, d2, 4, 1).unwrap();
        let c = decay_curve(&s1, NormKind::Sup, 10.0, 1000.0, 41).unwrap();
        assert!((c.fitted_slope + 0.5).abs() <= 0.02);
    }
}

#[test]
fn integral_slopes() {
    let on = decay_curve(&DecayLawSpec::new(1.0, 1.0, 4, 0).unwrap(), NormKind::Integral, 10.0, 1000.0, 41).unwrap();
    assert!((-0.80..=-0.70).contains(&on.fitted_slope));
    let off = decay_curve(&DecayLawSpec::new(1.0, 1.0, 2, 0).unwrap(), NormKind::Integral, 10.0, 1000.0, 41).unwrap();
    assert!((-1.06..=-0.94).contains(&off.fitted_slope));
}

#[test]
fn monotone_in_time() {
    for p in [2, 4] {
        for k in [0, 1] {
            let s = DecayLawSpec::new(0.7, 1.3, p, k).unwrap();
            let v: Vec<f64> = logspace(0.5, 2000.0, 30).iter().map(|&t| kernel_norm(&s, t, NormKind::Integral).unwrap()).collect();
            assert!(v.windows(2).all(|w| w[1] < w[0]));
        }
    }
}

#[test]
fn d1_scaling() {
    let t = 500.0;
    let base = kernel_norm(&DecayLawSpec::new(1.0, 1.0, 4, 0).unwrap(), t, NormKind::Integral).unwrap();
    for s in [0.5, 0.8, 1.5, 2.0] {
        let v = kernel_norm(&DecayLawSpec::new(s, 1.0, 4, 0).unwrap(), t, NormKind::Integral).unwrap();
        assert!((v - base / s.sqrt()).abs() <= 1e-6 * base);
    }
}

#[test]
fn exact_power_law_fit() {
    let t = logspace(1.0, 1e3, 20);
    let v: Vec<f64> = t.iter().map(|t| t.powf(-0.75)).collect();
    let c = fit_decay(&t, &v, (1.0, 1e3)).unwrap();
    assert!((c.fitted_slope + 0.75).abs() <= 1e-12);
}

#[test]
fn invalid_inputs() {
    assert!(matches!(DecayLawSpec::new(0.0, 1.0, 4, 0), Err(SemigroupError::InvalidSpec(_))));
    assert!(DecayLawSpec::new(1.0, 1.0, 3, 0).is_err());
    assert!(DecayLawSpec::new(1.0, 1.0, 4, 2).is_err());
    let s = DecayLawSpec::new(1.0, 1.0, 4, 0).unwrap();
    assert!(matches!(kernel_norm(&s, -1.0, NormKind::Integral), Err(SemigroupError::InvalidTime(_))));
}
