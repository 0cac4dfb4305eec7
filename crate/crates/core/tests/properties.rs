use nalgebra::DVector;
use num_complex::Complex64;
use proptest::prelude::*;
use std::sync::OnceLock;
use zzlab_core::expansions::{eta_terms_direct, eta_terms_split, mu_split};
use zzlab_core::io::fmt_f64;
use zzlab_core::kernels::cutoff;
use zzlab_core::semigroup::NormKind;
use zzlab_core::{assemble_operator, kernel_norm, mu, solve_roll, split_modes, DecayLawSpec, Params, RollSolution, SigmaPoint};

fn roll() -> &'static RollSolution {
    static R: OnceLock<RollSolution> = OnceLock::new();
    R.get_or_init(|| solve_roll(Params::new(0.2, 0.03).unwrap(), 9).unwrap())
}

fn sigma() -> impl Strategy<Value = SigmaPoint> {
    (-0.5f64..0.5, -0.5f64..0.5).prop_map(|(a, b)| SigmaPoint::new(a, b))
}

fn cvec(n: usize) -> impl Strategy<Value = DVector<Complex64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n).prop_map(|v| DVector::from_iterator(v.len(), v.into_iter().map(|(a, b)| Complex64::new(a, b))))
}

proptest! {
    #[test]
    fn mu_split_recombines(m in -5i64..=5, kappa in -0.3f64..0.3, s in sigma()) {
        let (e, d) = mu_split(m, kappa, s);
        let scale = mu(m, kappa, s).abs().max(mu(-m, kappa, s).abs()).max(1.0);
        prop_assert!((e + d - mu(m, kappa, s)).abs() <= 1e-12 * scale);
        prop_assert!((e - d - mu(-m, kappa, s)).abs() <= 1e-12 * scale);
    }

    #[test]
    fn eta_forms_agree(kappa in -0.2f64..0.2, s in sigma()) {
        if let (Ok(a), Ok(b)) = (eta_terms_direct(kappa, s), eta_terms_split(kappa, s)) {
            prop_assert!(a.max_relative_diff(&b) <= 1e-9, "{a:?} {b:?}");
        }
    }

    #[test]
    fn split_reconstructs(v in cvec(7), e in cvec(7), s in sigma(), sigma0 in 0.05f64..0.5) {
        prop_assume!(e.norm() > 1e-3);
        let e = e.normalize();
        let chi = cutoff(s, sigma0);
        prop_assert!((0.0..=1.0).contains(&chi));
        let m = split_modes(&v, &e, chi).unwrap();
        prop_assert!((&e * m.a + &m.v_s - &v).norm() <= 1e-13 * v.norm().max(1.0));
        if chi == 1.0 {
            prop_assert!(e.dotc(&m.v_s).norm() <= 1e-13 * v.norm().max(1.0));
        }
    }

    #[test]
    fn cutoff_decreases_with_radius(r1 in 0.0f64..0.6, r2 in 0.0f64..0.6, sigma0 in 0.05f64..0.5) {
        let (lo, hi) = (r1.min(r2), r1.max(r2));
        prop_assert!(cutoff(SigmaPoint::new(lo, 0.0), sigma0) >= cutoff(SigmaPoint::new(0.0, hi), sigma0));
    }

    #[test]
    fn bloch_spectrum_is_reflection_symmetric(s in sigma()) {
        let r = roll();
        let base = assemble_operator(r, s, 40).unwrap();
        prop_assert!(base.hermitian_defect() == 0.0);
        let l = base.eigenvalues();
        for t in [SigmaPoint::new(-s.sigma1, s.sigma2), SigmaPoint::new(s.sigma1, -s.sigma2)] {
            let lt = assemble_operator(r, t, 40).unwrap().eigenvalues();
            // top of the spectrum; eigen-solver round-off scales with |mu_J| ~ J^4
            for (a, b) in l.iter().zip(&lt).take(6) {
                prop_assert!((a - b).abs() <= 1e-14 * 40f64.powi(4), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn kernel_norms_do_not_increase(d1 in 0.1f64..3.0, d2 in 0.1f64..3.0, p in prop::sample::select(vec![2u32, 4]), k in 0u32..=1, t in 1.0f64..500.0, f in 1.01f64..4.0) {
        let spec = DecayLawSpec::new(d1, d2, p, k).unwrap();
        for kind in [NormKind::Sup, NormKind::Integral] {
            let (a, b) = (kernel_norm(&spec, t, kind).unwrap(), kernel_norm(&spec, f * t, kind).unwrap());
            prop_assert!(b <= a * (1.0 + 1e-9), "{kind:?}: {a} -> {b}");
        }
    }

    #[test]
    fn floats_round_trip(x in any::<f64>()) {
        let back: f64 = fmt_f64(x).parse().unwrap();
        if x.is_nan() {
            prop_assert!(back.is_nan());
        } else {
            prop_assert_eq!(back.to_bits(), x.to_bits());
        }
    }
}
