//! Subcommand pipelines. Each writes its CSV / JSON-lines files into the
//! output directory and appends one manifest line per file.

use crate::config::{RunConfig, Subcommand};
use crate::error::CliError;
use crate::manifest::record_output;
use rayon::prelude::*;
use serde_json::{json, Value};
use std::path::Path;
use zzlab_core::bloch::{critical_branch_with, BranchOptions};
use zzlab_core::expansions::{kappa_z_closed_root, kappa_z_root, spectral_dispersion, A1Source, SpectralFitOptions};
use zzlab_core::io::{Cell, CsvWriter, JsonLines};
use zzlab_core::kernels::{fit_bound_constant, sample_k1, BranchInterpolant};
use zzlab_core::params::{symmetric_axis, tensor_grid, Params, SigmaPoint};
use zzlab_core::roll::{residual, RollSolution, RollSolver};
use zzlab_core::semigroup::{decay_curve, DecayLawSpec, NormKind};
use zzlab_core::sim::checkpoint::write_checkpoint;
use zzlab_core::sim::experiment::fit_records;
use zzlab_core::sim::{run_simulation, KappaChoice, Perturbation, Record, SimConfig};

/// Summary of a finished run, printed to stdout.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub files: Vec<String>,
    pub summary: Value,
}

pub fn run(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir).map_err(CliError::io(format!("creating {}", dir.display())))?;
    let mut out = Output { dir, cfg, files: Vec::new() };
    let summary = match cfg.subcommand {
        Subcommand::Roll => roll(cfg, &mut out)?,
        Subcommand::Spectrum => spectrum(cfg, &mut out)?,
        Subcommand::Dispersion => dispersion(cfg, &mut out)?,
        Subcommand::Zigzag => zigzag(cfg, &mut out)?,
        Subcommand::Semigroup => semigroup(cfg, &mut out)?,
        Subcommand::Kernel => kernel(cfg, &mut out)?,
        Subcommand::Simulate => simulate(cfg, &mut out)?,
        Subcommand::Sweep => sweep(cfg, &mut out)?,
    };
    Ok(Outcome { files: out.files, summary })
}

struct Output<'a> {
    dir: &'a Path,
    cfg: &'a RunConfig,
    files: Vec<String>,
}

impl Output<'_> {
    fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<Cell>], extra: Value) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let ctx = || format!("writing {}", path.display());
        let mut w = CsvWriter::create(&path, header).map_err(CliError::io(ctx()))?;
        for r in rows {
            w.row(r).map_err(CliError::io(ctx()))?;
        }
        w.finish().map_err(CliError::io(ctx()))?;
        self.register(name, extra)
    }

    fn jsonl(&mut self, name: &str, records: &[Value]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let ctx = || format!("writing {}", path.display());
        let mut w = JsonLines::create(&path).map_err(CliError::io(ctx()))?;
        for r in records {
            w.write(r).map_err(CliError::io(ctx()))?;
        }
        w.finish().map_err(CliError::io(ctx()))?;
        self.register(name, Value::Null)
    }

    fn register(&mut self, name: &str, extra: Value) -> Result<(), CliError> {
        record_output(self.dir, name, self.cfg, extra).map_err(CliError::io("writing manifest"))?;
        self.files.push(name.to_string());
        Ok(())
    }
}

fn f(x: f64) -> Cell {
    Cell::F(x)
}

fn opt(x: Option<f64>) -> Cell {
    Cell::F(x.unwrap_or(f64::NAN))
}

/// `kappa` from `kappa_mode` / `kappa` / `kappa_offset`.
fn kappa_for(cfg: &RunConfig, eps: f64) -> Result<f64, CliError> {
    Ok(match cfg.choice("kappa_mode") {
        "fixed" => cfg.real("kappa"),
        "at_zigzag" => kappa_z_closed_root(eps, A1Source::Roll)?,
        _ => kappa_z_closed_root(eps, A1Source::Roll)? + cfg.real("kappa_offset"),
    })
}

fn solve(cfg: &RunConfig, eps: f64, kappa: f64) -> Result<RollSolution, CliError> {
    let p = Params::with_eps0(eps, kappa, cfg.real("eps0"))?;
    Ok(RollSolver::new(cfg.usize("n_modes")).solve(p)?)
}

fn roll(cfg: &RunConfig, out: &mut Output) -> Result<Value, CliError> {
    let r = solve(cfg, cfg.real("eps"), cfg.real("kappa"))?;
    let res = residual(&r, 8 * r.coeffs.len().max(8));
    let rows: Vec<Vec<Cell>> = r.harmonics().map(|(n, a)| vec![Cell::from(n), f(a)]).collect();
    out.csv("roll.csv", &["n", "coeff"], &rows, Value::Null)?;
    let meta = json!({
        "eps": r.params.eps,
        "kappa": r.params.kappa,
        "a_tilde": r.a_tilde,
        "residual_inf": res,
        "a1": r.a1(),
        "n_modes": r.coeffs.len(),
    });
    out.jsonl("roll.jsonl", std::slice::from_ref(&meta))?;
    Ok(meta)
}

fn spectrum(cfg: &RunConfig, out: &mut Output) -> Result<Value, CliError> {
    let eps = cfg.real("eps");
    let r = solve(cfg, eps, kappa_for(cfg, eps)?)?;
    let smax = cfg.real("sigma_max");
    let ax = symmetric_axis(smax, cfg.usize("n_axis"));
    let mut grid = tensor_grid(&ax, &ax);
    if !grid.contains(&SigmaPoint::ORIGIN) {
        grid.push(SigmaPoint::ORIGIN);
    }
    let j = cfg.usize("truncation").max(2 * r.highest_harmonic());
    let opts = BranchOptions { sigma_max: std::f64::consts::SQRT_2 * smax + 1e-12, ..BranchOptions::default() };
    let br = critical_branch_with(&r, &grid, j, &opts)?;
    let rows: Vec<Vec<Cell>> = (0..br.grid.len())
        .map(|i| vec![f(br.grid[i].sigma1), f(br.grid[i].sigma2), f(br.lambdas[i]), f(br.second[i])])
        .collect();
    out.csv("spectrum.csv", &["sigma1", "sigma2", "lambda", "gap"], &rows, Value::Null)?;
    if cfg.flag("eigvecs") {
        let mut rows = Vec::new();
        for (s, e) in br.grid.iter().zip(&br.eigvecs) {
            for (i, z) in e.iter().enumerate() {
                rows.push(vec![f(s.sigma1), f(s.sigma2), Cell::I(i as i64 - j as i64), f(z.re), f(z.im)]);
            }
        }
        out.csv("eigvecs.csv", &["sigma1", "sigma2", "j", "re", "im"], &rows, Value::Null)?;
    }
    let lmax = br.lambdas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let summary = json!({
        "eps": eps,
        "kappa": r.params.kappa,
        "truncation": j,
        "points": br.grid.len(),
        "lambda_max": lmax,
        "spectral_gap": br.spectral_gap,
    });
    out.jsonl("spectrum_summary.jsonl", std::slice::from_ref(&summary))?;
    Ok(summary)
}

fn fit_options(cfg: &RunConfig) -> SpectralFitOptions {
    SpectralFitOptions {
        n_modes: cfg.usize("n_modes"),
        truncation: cfg.usize("truncation"),
        fit_radius: cfg.real("fit_radius"),
        n_axis: cfg.usize("n_axis"),
    }
}

fn dispersion(cfg: &RunConfig, out: &mut Output) -> Result<Value, CliError> {
    let opts = fit_options(cfg);
    let eps0 = cfg.real("eps0");
    let fits = cfg
        .reals("eps")
        .par_iter()
        .map(|&eps| -> Result<_, CliError> {
            let kappa = kappa_for(cfg, eps)?;
            let fit = spectral_dispersion(Params::with_eps0(eps, kappa, eps0)?, &opts)?;
            Ok((eps, kappa, fit))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let rows: Vec<Vec<Cell>> =
        fits.iter().map(|(e, k, d)| vec![f(*e), f(*k), f(d.c1), f(d.c2), f(d.c3), f(d.fit_residual)]).collect();
    out.csv("dispersion.csv", &["eps", "kappa", "c1", "c2", "c3", "residual"], &rows, Value::Null)?;
    Ok(json!({ "fits": fits.len() }))
}

fn zigzag(cfg: &RunConfig, out: &mut Output) -> Result<Value, CliError> {
    let source = if cfg.choice("a1_source") == "series" { A1Source::Series } else { A1Source::Roll };
    let opts = fit_options(cfg);
    let spectral = cfg.flag("spectral").then_some(&opts);
    let rows = cfg
        .reals("eps")
        .par_iter()
        .map(|&eps| kappa_z_root(eps, source, spectral))
        .collect::<Result<Vec<_>, _>>()?;
    let cells: Vec<Vec<Cell>> = rows
        .iter()
        .map(|z| vec![f(z.eps), f(z.kappa_z_numeric), opt(z.kappa_z_spectral), f(z.kappa_z_series)])
        .collect();
    out.csv("zigzag.csv", &["eps", "kappa_z_numeric", "kappa_z_spectral", "kappa_z_series"], &cells, Value::Null)?;
    Ok(json!({ "rows": rows }))
}

fn semigroup(cfg: &RunConfig, out: &mut Output) -> Result<Value, CliError> {
    let (k, p) = (cfg.int("k") as u32, cfg.int("p") as u32);
    let kind: NormKind = cfg.choice("kind").parse().expect("schema restricts kind");
    let (mut d1, mut d2) = (cfg.opt_real("d1"), cfg.opt_real("d2"));
    if d1.is_none() || d2.is_none() {
        let eps = cfg.real("eps");
        let opts = SpectralFitOptions::default();
        let kz = kappa_z_closed_root(eps, A1Source::Roll)?;
        let at = spectral_dispersion(Params::new(eps, kz)?, &opts)?;
        d1 = d1.or(Some(at.c1));
        if d2.is_none() {
            d2 = Some(if p == 4 { at.c3 } else { spectral_dispersion(Params::new(eps, kz + 0.05 * eps)?, &opts)?.c2 });
        }
    }
    let (d1, d2) = (d1.expect("set above"), d2.expect("set above"));
    let spec = DecayLawSpec::new(d1, d2, p, k)?;
    let c = decay_curve(&spec, kind, cfg.real("t_min"), cfg.real("t_max"), cfg.usize("n_t"))?;
    let rows: Vec<Vec<Cell>> = c
        .times
        .iter()
        .zip(&c.values)
        .map(|(t, v)| vec![f(*t), f(*v), Cell::from(k), Cell::from(kind.to_string()), Cell::from(p)])
        .collect();
    out.csv("semigroup.csv", &["t", "value", "k", "kind", "p"], &rows, Value::Null)?;
    let summary = json!({
        "k": k,
        "p": p,
        "kind": kind,
        "d1": d1,
        "d2": d2,
        "slope": c.fitted_slope,
        "slope_std_err": c.slope_std_err,
        "expected_slope": spec.expected_slope(kind),
        "window": [c.fit_window.0, c.fit_window.1],
    });
    out.jsonl("semigroup_summary.jsonl", std::slice::from_ref(&summary))?;
    Ok(summary)
}

fn kernel(cfg: &RunConfig, out: &mut Output) -> Result<Value, CliError> {
    let eps = cfg.real("eps");
    let r = solve(cfg, eps, kappa_for(cfg, eps)?)?;
    let j = cfg.usize("truncation").max(2 * r.highest_harmonic());
    let interp = BranchInterpolant::on_square(&r, cfg.real("branch_radius"), cfg.usize("branch_points"), j)?;
    let rad = cfg.real("disc_radius");
    let ax = symmetric_axis(rad, cfg.usize("disc_points"));
    let disc: Vec<SigmaPoint> = tensor_grid(&ax, &ax).into_iter().filter(|s| s.norm() <= rad * (1.0 + 1e-12)).collect();
    let samples = sample_k1(&r, &interp, &disc)?;
    let rows: Vec<Vec<Cell>> = samples
        .iter()
        .map(|s| {
            vec![
                f(s.sigma.sigma1),
                f(s.sigma.sigma2),
                f(s.sigma_tilde.sigma1),
                f(s.sigma_tilde.sigma2),
                f(s.re_k1),
                f(s.im_k1),
                f(s.bound_rhs),
            ]
        })
        .collect();
    out.csv("kernel.csv", &["sigma1", "sigma2", "sigma1t", "sigma2t", "re_k1", "im_k1", "bound_rhs"], &rows, Value::Null)?;
    let slice = samples
        .iter()
        .filter(|s| s.sigma.sigma1 == 0.0 && s.sigma_tilde.sigma1 == 0.0)
        .map(|s| s.abs_k1())
        .fold(0.0f64, f64::max);
    let summary = json!({
        "eps": eps,
        "kappa": r.params.kappa,
        "samples": samples.len(),
        "bound_constant": fit_bound_constant(&samples).ok(),
        "max_abs_k1": samples.iter().map(|s| s.abs_k1()).fold(0.0f64, f64::max),
        "slice_sup_abs_k1": slice,
    });
    out.jsonl("kernel_summary.jsonl", std::slice::from_ref(&summary))?;
    Ok(summary)
}

fn sim_config(cfg: &RunConfig, eps: f64, kappa: KappaChoice, seed: u64) -> SimConfig {
    SimConfig {
        eps,
        kappa,
        periods_x: cfg.usize("periods_x"),
        length_y: cfg.real("length_y"),
        nx: cfg.usize("nx"),
        ny: cfg.usize("ny"),
        dt: cfg.opt_real("dt"),
        t_end: cfg.real("t_end"),
        t_first_record: cfg.real("t_first_record"),
        n_records: cfg.usize("n_records"),
        perturbation: Perturbation {
            amplitude: cfg.real("amplitude"),
            width_x: cfg.real("width_x"),
            width_y: cfg.real("width_y"),
            seed,
        },
        diagnostics: cfg.flag("diagnostics"),
        sigma0: cfg.real("sigma0"),
    }
}

const SIM_HEADER: [&str; 5] = ["t", "v_inf", "a_l1", "sigma1a_l1", "vs_l1"];

fn record_rows(records: &[Record]) -> Vec<Vec<Cell>> {
    records
        .iter()
        .map(|r| {
            let n = r.norms;
            vec![f(r.t), f(r.v_inf), opt(n.map(|n| n.a_l1)), opt(n.map(|n| n.sigma1_a_l1)), opt(n.map(|n| n.vs_l1))]
        })
        .collect()
}

fn simulate(cfg: &RunConfig, out: &mut Output) -> Result<Value, CliError> {
    let kappa = match cfg.choice("kappa_mode") {
        "fixed" => KappaChoice::Fixed(cfg.real("kappa")),
        "at_zigzag" => KappaChoice::AtZigzag,
        _ => KappaChoice::ZigzagOffset(cfg.real("kappa_offset")),
    };
    let sc = sim_config(cfg, cfg.real("eps"), kappa, cfg.seed);
    let run = run_simulation(&sc, |_| {})?;
    out.csv("simulate.csv", &SIM_HEADER, &record_rows(&run.records), Value::Null)?;
    if let Some(path) = cfg.opt_path("checkpoint") {
        write_checkpoint(path, sc.nx, sc.ny, &run.final_state)?;
    }
    let fit = fit_records(&run.records);
    let mut summary = json!({
        "eps": run.params.eps,
        "kappa": run.params.kappa,
        "dt": run.dt,
        "seed": cfg.seed,
        "max_imag_residue": run.max_imag_residue,
    });
    if let Ok((e, se, w)) = &fit {
        summary["exponent"] = json!(e);
        summary["exponent_std_err"] = json!(se);
        summary["window"] = json!([w.0, w.1]);
    }
    out.jsonl("simulate_summary.jsonl", std::slice::from_ref(&summary))?;
    fit?;
    Ok(summary)
}

/// `(kappa, records, (exponent, std_err, window))` of one sweep run.
type SweepRun = Result<(f64, Vec<Record>, (f64, f64, (f64, f64))), String>;

fn sweep(cfg: &RunConfig, out: &mut Output) -> Result<Value, CliError> {
    let mut jobs = Vec::new();
    for &eps in &cfg.reals("eps") {
        for &of in &cfg.reals("offset_factors") {
            for &seed in &cfg.ints("seeds") {
                jobs.push((eps, of, seed as u64));
            }
        }
    }
    let results: Vec<(f64, f64, u64, SweepRun)> = jobs
        .par_iter()
        .map(|&(eps, of, seed)| {
            let sc = sim_config(cfg, eps, KappaChoice::ZigzagOffset(of * eps), seed);
            let res = run_simulation(&sc, |_| {}).map_err(|e| e.to_string()).and_then(|run| {
                let fit = fit_records(&run.records).map_err(|e| e.to_string())?;
                Ok((run.params.kappa, run.records, fit))
            });
            (eps, of, seed, res)
        })
        .collect();
    let mut rows = Vec::new();
    for (i, (eps, of, seed, res)) in results.iter().enumerate() {
        let name = format!("run_{i:03}.csv");
        match res {
            Ok((kappa, records, (e, se, w))) => {
                out.csv(&name, &SIM_HEADER, &record_rows(records), json!({ "eps": eps, "offset_factor": of, "seed": seed }))?;
                rows.push(vec![Cell::from(i), f(*eps), f(*of), f(*kappa), Cell::I(*seed as i64), f(*e), f(*se), f(w.0), f(w.1), Cell::from("ok")]);
            }
            Err(msg) => {
                let nan = f64::NAN;
                let status = msg.replace([',', '\n'], ";");
                rows.push(vec![Cell::from(i), f(*eps), f(*of), f(nan), Cell::I(*seed as i64), f(nan), f(nan), f(nan), f(nan), Cell::from(status)]);
            }
        }
    }
    out.csv(
        "sweep.csv",
        &["run", "eps", "offset_factor", "kappa", "seed", "exponent", "exponent_std_err", "window_lo", "window_hi", "status"],
        &rows,
        Value::Null,
    )?;
    let failed = results.iter().filter(|r| r.3.is_err()).count();
    Ok(json!({ "runs": results.len(), "failed": failed }))
}
