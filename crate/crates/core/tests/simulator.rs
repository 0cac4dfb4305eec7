use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use zzlab_core::expansions::{kappa_z_closed_root, A1Source};
use zzlab_core::sim::checkpoint::{read_checkpoint, write_checkpoint};
use zzlab_core::sim::diagnostics::{critical_amplitudes, h_norm_diagnostics, LatticeBranch};
use zzlab_core::sim::experiment::run_simulation;
use zzlab_core::sim::{Dynamics, Grid, KappaChoice, Perturbation, SimConfig, SimError, SimState, Simulator};
use zzlab_core::Params;

fn zero_state(sim: &Simulator) -> SimState {
    SimState { t: 0.0, step: 0, u_hat: vec![Complex64::default(); sim.spectral_len()] }
}

#[test]
fn zero_field_is_a_fixed_point() {
    let p = Params::new(0.3, 0.0).unwrap();
    let g = Grid::new(&p, 4, 20.0, 64, 16).unwrap();
    let mut sim = Simulator::new(p, g, 0.2, Dynamics::Full).unwrap();
    let mut st = zero_state(&sim);
    for _ in 0..20 {
        sim.step(&mut st);
    }
    assert!(st.u_hat.iter().all(|z| *z == Complex64::default()));
}

#[test]
fn perturbed_run_stays_real_and_checkpoints() {
    let p = Params::new(0.3, 0.01).unwrap();
    let g = Grid::new(&p, 8, 40.0, 128, 32).unwrap();
    let mut sim = Simulator::new(p, g.clone(), 0.25, Dynamics::Full).unwrap();
    let pert = Perturbation { amplitude: 1e-2, width_y: 4.0, ..Perturbation::default() };
    let v0 = pert.field(&g, p.wavenumber());
    let mut st = sim.state_from_perturbation(&v0);
    for _ in 0..40 {
        sim.step(&mut st);
    }
    assert!(sim.max_imag_residue <= 1e-12);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("state.zzck");
    write_checkpoint(&path, g.nx, g.ny, &st).unwrap();
    let (nx, ny, back) = read_checkpoint(&path).unwrap();
    assert_eq!((nx, ny), (128, 32));
    assert_eq!(back, st);
}

/// 9 roll periods on 256 points: retained `|m_x| <= 85`, Bloch index `r = -4..=4`.
fn line_box(eps: f64, kappa: f64, dt: f64) -> (Simulator, LatticeBranch) {
    let p = Params::new(eps, kappa).unwrap();
    let g = Grid::new(&p, 9, 10.0, 256, 1).unwrap();
    let sim = Simulator::new(p, g.clone(), dt, Dynamics::Linearized).unwrap();
    let lb = LatticeBranch::with_default_sigma0(&sim.roll.clone(), &g).unwrap();
    (sim, lb)
}

/// `(r, j)` of a stored `m_x >= 0`.
fn bloch_index(m: i64, mx: i64) -> (i64, i64) {
    let r = (mx + m / 2).rem_euclid(m) - m / 2;
    (r, (mx - r) / m)
}

fn evolve(sim: &mut Simulator, lb: &LatticeBranch, st: &mut SimState, times: &[f64]) -> Vec<zzlab_core::sim::HNorms> {
    let mut out = Vec::new();
    for &t in times {
        while st.t < t - 1e-9 {
            sim.step(st);
        }
        out.push(h_norm_diagnostics(lb, &sim.grid, &st.u_hat, st.t).unwrap());
    }
    out
}

/// Evolves data with the critical component removed at every lattice point.
fn stable_only(dt: f64) -> (Vec<zzlab_core::sim::HNorms>, f64) {
    let eps = 0.3;
    let kz = kappa_z_closed_root(eps, A1Source::Roll).unwrap();
    let (mut sim, lb) = line_box(eps, kz, dt);
    let g = sim.grid.clone();
    let m = g.periods_x as i64;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut st = zero_state(&sim);
    for mx in 0..=g.kx_max as i64 {
        let (r, _) = bloch_index(m, mx);
        if lb.lattice.contains(&(r, 0)) {
            let z = if mx == 0 { Complex64::new(rng.gen_range(-1.0..1.0), 0.0) } else { Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) };
            g.set_coeff(&mut st.u_hat, mx, 0, z * 1e-3);
        }
    }
    // remove the critical component at every lattice point
    let j = lb.branch.truncation as i64;
    let mut dots = Vec::new();
    for (k, &(r, my)) in lb.lattice.iter().enumerate() {
        let e = &lb.branch.eigvecs[k];
        let d: Complex64 = (-j..=j).filter(|jj| g.retained(jj * m + r, my)).map(|jj| e[(jj + j) as usize].conj() * g.coeff(&st.u_hat, jj * m + r, my)).sum();
        dots.push(d);
    }
    for (k, &(r, my)) in lb.lattice.iter().enumerate() {
        let e = &lb.branch.eigvecs[k];
        for jj in -j..=j {
            let mx = jj * m + r;
            if mx >= 0 && g.retained(mx, my) {
                let v = g.coeff(&st.u_hat, mx, my) - dots[k] * e[(jj + j) as usize];
                g.set_coeff(&mut st.u_hat, mx, my, v);
            }
        }
    }
    let norms = evolve(&mut sim, &lb, &mut st, &[0.0, 20.0, 40.0, 60.0]);
    (norms, lb.branch.spectral_gap)
}

#[test]
fn stable_only_data_decays_at_the_gap_rate() {
    let (norms, lambda0) = stable_only(0.05);
    assert!(lambda0 < 0.0);
    assert!(norms[0].a_l1 <= 1e-12 * norms[0].vs_l1);
    let rate = (norms[3].vs_l1 / norms[1].vs_l1).ln() / 40.0;
    assert!(rate <= lambda0 + 0.01 * lambda0.abs(), "rate {rate} vs lambda0 {lambda0}");
    assert!(rate >= 1.2 * lambda0, "rate {rate} vs lambda0 {lambda0}");
    // the step does not commute exactly with the spectral split; the
    // critical part it feeds is small and second order in dt
    let leak = |n: &[zzlab_core::sim::HNorms]| n.iter().map(|x| x.a_inf).fold(0.0, f64::max) / n[0].vs_inf;
    let (coarse, fine) = (leak(&norms), leak(&stable_only(0.025).0));
    assert!(coarse <= 1e-3, "{norms:?}");
    assert!(fine <= coarse / 3.0, "{coarse:.3e} -> {fine:.3e}");
}

#[test]
fn critical_only_data_does_not_grow() {
    let eps = 0.3;
    let kz = kappa_z_closed_root(eps, A1Source::Roll).unwrap();
    let (mut sim, lb) = line_box(eps, kz, 0.05);
    let g = sim.grid.clone();
    let m = g.periods_x as i64;
    let j = lb.branch.truncation as i64;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut amp = std::collections::HashMap::new();
    for &(r, _) in &lb.lattice {
        if r >= 0 {
            let a: f64 = rng.gen_range(0.5..1.0) * 1e-3;
            amp.insert(r, a);
            amp.insert(-r, a);
        }
    }
    let mut st = zero_state(&sim);
    for (k, &(r, my)) in lb.lattice.iter().enumerate() {
        let e = &lb.branch.eigvecs[k];
        for jj in -j..=j {
            let mx = jj * m + r;
            if mx >= 0 && g.retained(mx, my) {
                g.set_coeff(&mut st.u_hat, mx, my, e[(jj + j) as usize] * amp[&r]);
            }
        }
    }
    let a0 = critical_amplitudes(&lb, &g, &st.u_hat);
    for (k, &(r, _)) in lb.lattice.iter().enumerate() {
        let x = zzlab_core::kernels::cutoff(lb.branch.grid[k], lb.sigma0);
        assert!((a0[k] - Complex64::new(x * amp[&r], 0.0)).norm() <= 1e-12, "{k}: {}", a0[k]);
    }
    let norms = evolve(&mut sim, &lb, &mut st, &[0.0, 10.0, 50.0, 100.0, 200.0]);
    for n in &norms {
        assert!(n.a_inf <= (1.0 + 1e-6) * norms[0].a_inf, "{n:?}");
    }
    // the stable part is the (1 - cutoff) share on the annulus, which decays
    assert!(norms[0].vs_l1 > 0.0 && norms[4].vs_l1 <= 1e-6 * norms[0].vs_l1, "{norms:?}");
    // the sigma = 0 translation amplitude persists
    assert!(norms[4].a_inf >= 0.5 * norms[0].a_inf);
}

#[test]
fn branch_mismatch_is_detected() {
    let (sim, lb) = line_box(0.3, 0.0, 0.05);
    let p = Params::new(0.3, 0.0).unwrap();
    let other = Grid::new(&p, 8, 10.0, 256, 1).unwrap();
    let spec = vec![Complex64::default(); sim.spectral_len()];
    assert!(matches!(h_norm_diagnostics(&lb, &other, &spec, 0.0), Err(SimError::BranchMismatch(_))));
}

#[test]
fn small_box_run_is_bounded_with_finite_diagnostics() {
    let cfg = SimConfig {
        eps: 0.3,
        kappa: KappaChoice::AtZigzag,
        periods_x: 8,
        length_y: 40.0,
        nx: 128,
        ny: 32,
        t_end: 200.0,
        n_records: 12,
        diagnostics: true,
        perturbation: Perturbation { amplitude: 1e-3, width_y: 3.0, ..Perturbation::default() },
        ..SimConfig::default()
    };
    let run = run_simulation(&cfg, |_| {}).unwrap();
    let (recs, residue) = (run.records, run.max_imag_residue);
    assert!(residue <= 1e-12);
    let v0 = recs[0].v_inf;
    for r in &recs {
        assert!(r.v_inf <= 2.0 * v0);
        let n = r.norms.unwrap();
        assert!(n.weighted().iter().all(|x| x.is_finite()));
    }
}

#[test]
fn zigzag_unstable_rolls_grow() {
    let cfg = SimConfig {
        eps: 0.3,
        kappa: KappaChoice::Fixed(-0.05),
        periods_x: 4,
        length_y: 40.0,
        nx: 64,
        ny: 32,
        t_end: 1500.0,
        t_first_record: 100.0,
        n_records: 4,
        perturbation: Perturbation { amplitude: 1e-4, width_y: 3.0, ..Perturbation::default() },
        ..SimConfig::default()
    };
    let recs = run_simulation(&cfg, |_| {}).unwrap().records;
    assert!(recs.last().unwrap().v_inf > 3.0 * recs[1].v_inf, "{recs:?}");
}

#[test]
fn oversized_step_blows_up() {
    let cfg = SimConfig {
        eps: 0.3,
        kappa: KappaChoice::Fixed(0.0),
        periods_x: 4,
        length_y: 20.0,
        nx: 64,
        ny: 16,
        dt: Some(40.0),
        t_end: 4000.0,
        n_records: 5,
        perturbation: Perturbation { amplitude: 0.3, ..Perturbation::default() },
        ..SimConfig::default()
    };
    assert!(matches!(run_simulation(&cfg, |_| {}), Err(SimError::BlowUp { .. })));
}
