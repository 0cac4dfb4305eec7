//! Run configuration: typed key schemas per subcommand, a plain
//! `key = value` file format with `[section]` headers, and flag parsing.
//!
//! Precedence is flags > file > defaults. Keys before the first section
//! (or in `[global]`) are global: `output_dir`, `seed`.

use clap::{Arg, ArgAction, ArgMatches, Command};
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),
    #[error("{0}")]
    Usage(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Subcommand {
    Roll,
    Spectrum,
    Dispersion,
    Zigzag,
    Semigroup,
    Kernel,
    Simulate,
    Sweep,
}

impl Subcommand {
    pub const ALL: [Subcommand; 8] = [
        Subcommand::Roll,
        Subcommand::Spectrum,
        Subcommand::Dispersion,
        Subcommand::Zigzag,
        Subcommand::Semigroup,
        Subcommand::Kernel,
        Subcommand::Simulate,
        Subcommand::Sweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Roll => "roll",
            Subcommand::Spectrum => "spectrum",
            Subcommand::Dispersion => "dispersion",
            Subcommand::Zigzag => "zigzag",
            Subcommand::Semigroup => "semigroup",
            Subcommand::Kernel => "kernel",
            Subcommand::Simulate => "simulate",
            Subcommand::Sweep => "sweep",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }

    fn about(self) -> &'static str {
        match self {
            Subcommand::Roll => "Solve for a periodic roll and write its cosine coefficients",
            Subcommand::Spectrum => "Critical Bloch eigenvalue branch and spectral gap on a sigma grid",
            Subcommand::Dispersion => "Fit lambda ~ -c1 s1^2 - c2 s2^2 - c3 s2^4 to the computed branch",
            Subcommand::Zigzag => "Zigzag boundary kappa_z over an eps ladder",
            Subcommand::Semigroup => "Norms of the model decay kernel and fitted power laws",
            Subcommand::Kernel => "Quadratic interaction kernel k1 on a sigma disc and its bound",
            Subcommand::Simulate => "Pseudospectral decay experiment around a roll",
            Subcommand::Sweep => "Decay experiments over eps, kappa offsets and seeds",
        }
    }

    pub fn schema(self) -> Vec<KeySpec> {
        use Kind::*;
        let kappa_keys = || {
            vec![
                KeySpec::new("kappa", Real, "0", "wavenumber offset kappa = k^2 - 1 (kappa_mode = fixed)"),
                KeySpec::new("kappa_mode", Enum(&["fixed", "at_zigzag", "offset"]), "fixed", "how kappa is chosen"),
                KeySpec::new("kappa_offset", Real, "0", "kappa - kappa_z (kappa_mode = offset)"),
            ]
        };
        let roll_keys = || {
            vec![
                KeySpec::new("eps0", Real, "0.5", "upper end of the admissible eps range"),
                KeySpec::new("n_modes", Int, "32", "odd cosine harmonics in the roll"),
            ]
        };
        let sim_keys = || {
            vec![
                KeySpec::new("periods_x", Int, "85", "roll periods across the box"),
                KeySpec::new("length_y", Real, "400", "box length in y"),
                KeySpec::new("nx", Int, "1024", "grid points in x (power of two)"),
                KeySpec::new("ny", Int, "256", "grid points in y (power of two)"),
                KeySpec::new("dt", OptReal, "auto", "time step, or auto"),
                KeySpec::new("t_end", Real, "3000", "final time"),
                KeySpec::new("t_first_record", Real, "1", "first nonzero record time"),
                KeySpec::new("n_records", Int, "80", "log-spaced records"),
                KeySpec::new("amplitude", Real, "1e-3", "perturbation sup norm"),
                KeySpec::new("width_x", Real, "3.141592653589793", "perturbation envelope width in x"),
                KeySpec::new("width_y", Real, "2", "perturbation envelope width in y"),
                KeySpec::new("diagnostics", Bool, "false", "Bloch-split norms at every record"),
                KeySpec::new("sigma0", Real, "0.25", "critical-mode cutoff radius"),
            ]
        };
        let mut keys = match self {
            Subcommand::Roll => {
                let mut k = vec![KeySpec::new("eps", Real, "0.1", "control parameter"), KeySpec::new("kappa", Real, "0", "wavenumber offset")];
                k.extend(roll_keys());
                k
            }
            Subcommand::Spectrum => {
                let mut k = vec![KeySpec::new("eps", Real, "0.2", "control parameter")];
                k.extend(kappa_keys());
                k.extend(roll_keys());
                k.extend([
                    KeySpec::new("truncation", Int, "64", "Fourier truncation J"),
                    KeySpec::new("sigma_max", Real, "0.25", "half-width of the sigma square"),
                    KeySpec::new("n_axis", Int, "11", "grid points per sigma axis"),
                    KeySpec::new("eigvecs", Bool, "false", "also write eigenvectors"),
                ]);
                k
            }
            Subcommand::Dispersion => {
                let mut k = vec![KeySpec::new("eps", RealList, "0.2", "control parameters")];
                k.extend(kappa_keys());
                k.extend(roll_keys());
                k.extend([
                    KeySpec::new("truncation", Int, "64", "Fourier truncation J"),
                    KeySpec::new("fit_radius", Real, "0.2", "fit radius in sigma"),
                    KeySpec::new("n_axis", Int, "20", "samples per axis"),
                ]);
                k
            }
            Subcommand::Zigzag => vec![
                KeySpec::new("eps", RealList, "0.05,0.1,0.2", "eps ladder"),
                KeySpec::new("a1_source", Enum(&["roll", "series"]), "roll", "amplitude used in c2"),
                KeySpec::new("spectral", Bool, "false", "also locate kappa_z from the computed branch"),
                KeySpec::new("n_modes", Int, "32", "odd cosine harmonics in the roll"),
                KeySpec::new("truncation", Int, "64", "Fourier truncation J (spectral)"),
                KeySpec::new("fit_radius", Real, "0.2", "fit radius in sigma (spectral)"),
                KeySpec::new("n_axis", Int, "12", "samples per axis (spectral)"),
            ],
            Subcommand::Semigroup => vec![
                KeySpec::new("k", Int, "0", "sigma1 weight power (0 or 1)"),
                KeySpec::new("p", Int, "4", "transverse power (2 or 4)"),
                KeySpec::new("kind", Enum(&["integral", "sup"]), "integral", "norm of the kernel"),
                KeySpec::new("d1", OptReal, "auto", "sigma1 coefficient, or auto (fitted c1 at kappa_z)"),
                KeySpec::new("d2", OptReal, "auto", "sigma2 coefficient, or auto (fitted c3 at kappa_z for p = 4, c2 at kappa_z + 0.05 eps for p = 2)"),
                KeySpec::new("eps", Real, "0.2", "control parameter for the auto coefficients"),
                KeySpec::new("t_min", Real, "10", "first time"),
                KeySpec::new("t_max", Real, "1000", "last time"),
                KeySpec::new("n_t", Int, "41", "log-spaced times"),
            ],
            Subcommand::Kernel => {
                let mut k = vec![KeySpec::new("eps", Real, "0.2", "control parameter")];
                k.extend(kappa_keys());
                k.extend(roll_keys());
                k.extend([
                    KeySpec::new("truncation", Int, "64", "Fourier truncation J"),
                    KeySpec::new("branch_radius", Real, "0.2", "half-width of the branch square"),
                    KeySpec::new("branch_points", Int, "21", "branch points per axis"),
                    KeySpec::new("disc_radius", Real, "0.1", "radius of the sample disc"),
                    KeySpec::new("disc_points", Int, "5", "tensor points per axis before the disc cut"),
                ]);
                k
            }
            Subcommand::Simulate => {
                let mut k = vec![KeySpec::new("eps", Real, "0.3", "control parameter")];
                let mut kk = kappa_keys();
                kk[1].default = "at_zigzag";
                k.extend(kk);
                k.extend(sim_keys());
                k.push(KeySpec::new("checkpoint", OptPath, "none", "write the final state here"));
                k
            }
            Subcommand::Sweep => {
                let mut k = vec![
                    KeySpec::new("eps", RealList, "0.3", "control parameters"),
                    KeySpec::new("offset_factors", RealList, "0,0.05", "kappa - kappa_z in units of eps"),
                    KeySpec::new("seeds", IntList, "1,2,3", "perturbation seeds"),
                ];
                k.extend(sim_keys());
                k
            }
        };
        keys.sort_by_key(|k| k.name);
        keys
    }
}

impl fmt::Display for Subcommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kind {
    Real,
    Int,
    Bool,
    RealList,
    IntList,
    Enum(&'static [&'static str]),
    /// Real or `auto`.
    OptReal,
    /// Path or `none`.
    OptPath,
}

#[derive(Debug, Clone)]
pub struct KeySpec {
    pub name: &'static str,
    pub kind: Kind,
    pub default: &'static str,
    pub help: &'static str,
}

impl KeySpec {
    fn new(name: &'static str, kind: Kind, default: &'static str, help: &'static str) -> Self {
        Self { name, kind, default, help }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Real(f64),
    Int(i64),
    Bool(bool),
    RealList(Vec<f64>),
    IntList(Vec<i64>),
    Enum(String),
    OptReal(Option<f64>),
    OptPath(Option<PathBuf>),
}

impl Value {
    fn parse(kind: Kind, raw: &str) -> Result<Value, String> {
        let raw = raw.trim();
        let real = |s: &str| -> Result<f64, String> {
            let x: f64 = s.trim().parse().map_err(|_| format!("'{s}' is not a real number"))?;
            if x.is_finite() {
                Ok(x)
            } else {
                Err(format!("'{s}' is not finite"))
            }
        };
        let int = |s: &str| -> Result<i64, String> { s.trim().parse().map_err(|_| format!("'{s}' is not an integer")) };
        let list = |s: &str| -> Vec<String> { s.split(',').map(str::trim).filter(|x| !x.is_empty()).map(String::from).collect() };
        Ok(match kind {
            Kind::Real => Value::Real(real(raw)?),
            Kind::Int => Value::Int(int(raw)?),
            Kind::Bool => match raw {
                "true" | "yes" | "1" => Value::Bool(true),
                "false" | "no" | "0" => Value::Bool(false),
                _ => return Err(format!("'{raw}' is not a boolean")),
            },
            Kind::RealList => {
                let v = list(raw).iter().map(|s| real(s)).collect::<Result<Vec<_>, _>>()?;
                if v.is_empty() {
                    return Err("empty list".into());
                }
                Value::RealList(v)
            }
            Kind::IntList => {
                let v = list(raw).iter().map(|s| int(s)).collect::<Result<Vec<_>, _>>()?;
                if v.is_empty() {
                    return Err("empty list".into());
                }
                Value::IntList(v)
            }
            Kind::Enum(options) => {
                if !options.contains(&raw) {
                    return Err(format!("'{raw}' is not one of {}", options.join("|")));
                }
                Value::Enum(raw.to_string())
            }
            Kind::OptReal => Value::OptReal(if raw == "auto" { None } else { Some(real(raw)?) }),
            Kind::OptPath => Value::OptPath(if raw == "none" || raw.is_empty() { None } else { Some(PathBuf::from(raw)) }),
        })
    }

    /// Canonical text, also used for hashing.
    pub fn render(&self) -> String {
        let f = |x: &f64| zzlab_core::io::fmt_f64(*x);
        match self {
            Value::Real(x) => f(x),
            Value::Int(i) => i.to_string(),
            Value::Bool(b) => b.to_string(),
            Value::RealList(v) => v.iter().map(f).collect::<Vec<_>>().join(","),
            Value::IntList(v) => v.iter().map(i64::to_string).collect::<Vec<_>>().join(","),
            Value::Enum(s) => s.clone(),
            Value::OptReal(x) => x.as_ref().map_or("auto".into(), f),
            Value::OptPath(p) => p.as_ref().map_or("none".into(), |p| p.display().to_string()),
        }
    }
}

/// Where a value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Default,
    File,
    Flag,
}

impl Source {
    pub fn name(self) -> &'static str {
        match self {
            Source::Default => "default",
            Source::File => "file",
            Source::Flag => "flag",
        }
    }
}

/// Validated configuration of one run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub subcommand: Subcommand,
    pub values: BTreeMap<&'static str, (Value, Source)>,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub config_file: Option<PathBuf>,
}

impl RunConfig {
    fn get(&self, key: &str) -> &Value {
        match self.values.get(key) {
            Some((v, _)) => v,
            None => panic!("key '{key}' is not in the {} schema", self.subcommand),
        }
    }

    pub fn real(&self, key: &str) -> f64 {
        match self.get(key) {
            Value::Real(x) => *x,
            v => panic!("{key} is {v:?}"),
        }
    }

    pub fn int(&self, key: &str) -> i64 {
        match self.get(key) {
            Value::Int(x) => *x,
            v => panic!("{key} is {v:?}"),
        }
    }

    pub fn usize(&self, key: &str) -> usize {
        self.int(key) as usize
    }

    pub fn flag(&self, key: &str) -> bool {
        match self.get(key) {
            Value::Bool(x) => *x,
            v => panic!("{key} is {v:?}"),
        }
    }

    pub fn reals(&self, key: &str) -> Vec<f64> {
        match self.get(key) {
            Value::RealList(x) => x.clone(),
            Value::Real(x) => vec![*x],
            v => panic!("{key} is {v:?}"),
        }
    }

    pub fn ints(&self, key: &str) -> Vec<i64> {
        match self.get(key) {
            Value::IntList(x) => x.clone(),
            v => panic!("{key} is {v:?}"),
        }
    }

    pub fn choice(&self, key: &str) -> &str {
        match self.get(key) {
            Value::Enum(s) => s,
            v => panic!("{key} is {v:?}"),
        }
    }

    pub fn opt_real(&self, key: &str) -> Option<f64> {
        match self.get(key) {
            Value::OptReal(x) => *x,
            v => panic!("{key} is {v:?}"),
        }
    }

    pub fn opt_path(&self, key: &str) -> Option<&Path> {
        match self.get(key) {
            Value::OptPath(p) => p.as_deref(),
            v => panic!("{key} is {v:?}"),
        }
    }

    pub fn source(&self, key: &str) -> Source {
        self.values.get(key).map_or(Source::Default, |(_, s)| *s)
    }

    /// Canonical `key = value` text of the resolved inputs (sorted, without
    /// sources or the output directory); its hash identifies the run.
    pub fn canonical_text(&self) -> String {
        let mut s = format!("[{}]\n", self.subcommand);
        s += &format!("seed = {}\n", self.seed);
        for (k, (v, _)) in &self.values {
            s += &format!("{k} = {}\n", v.render());
        }
        s
    }
}

/// Parsed config file: global keys and per-section keys, with line numbers.
#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    pub global: BTreeMap<String, (String, usize)>,
    pub sections: BTreeMap<String, BTreeMap<String, (String, usize)>>,
}

pub const GLOBAL_KEYS: [&str; 2] = ["output_dir", "seed"];

/// Parses `key = value` lines with `[section]` headers; `#` and `;` start
/// comments.
pub fn parse_file_text(text: &str) -> Result<ConfigFile, ConfigError> {
    let mut out = ConfigFile::default();
    let mut section: Option<String> = None;
    for (n, line) in text.lines().enumerate() {
        let lineno = n + 1;
        let line = line.split(['#', ';']).next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::Parse(format!("line {lineno}: unterminated section header")))?
                .trim();
            if name != "global" && Subcommand::from_name(name).is_none() {
                return Err(ConfigError::Parse(format!("line {lineno}: unknown section [{name}]")));
            }
            section = if name == "global" { None } else { Some(name.to_string()) };
            if let Some(s) = &section {
                out.sections.entry(s.clone()).or_default();
            }
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| ConfigError::Parse(format!("line {lineno}: expected key = value, got '{line}'")))?;
        let (k, v) = (k.trim().to_string(), v.trim().to_string());
        if k.is_empty() {
            return Err(ConfigError::Parse(format!("line {lineno}: empty key")));
        }
        let map = match &section {
            None => &mut out.global,
            Some(s) => out.sections.get_mut(s).expect("section inserted on header"),
        };
        if map.insert(k.clone(), (v, lineno)).is_some() {
            return Err(ConfigError::Parse(format!("line {lineno}: duplicate key '{k}'")));
        }
    }
    Ok(out)
}

/// The clap command tree, generated from the key schemas.
pub fn command() -> Command {
    let mut cmd = Command::new("zzlab")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Zigzag stability lab for Swift-Hohenberg rolls")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .after_help("Exit codes: 0 ok, 2 config, 3 convergence, 4 numerical blow-up, 5 I/O.\nZZLAB_THREADS caps worker threads.")
        .arg(Arg::new("config").long("config").short('c').global(true).value_name("FILE").help("key = value config file"))
        .arg(Arg::new("output_dir").long("out").short('o').global(true).value_name("DIR").help("output directory [default: out]"))
        .arg(Arg::new("seed").long("seed").global(true).value_name("N").help("seed recorded in the manifest [default: 1]"));
    for sc in Subcommand::ALL {
        let mut sub = Command::new(sc.name()).about(sc.about());
        for k in sc.schema() {
            let alias = k.name.replace('_', "-");
            let mut arg = Arg::new(k.name)
                .long(k.name)
                .value_name(value_name(k.kind))
                .action(ArgAction::Set)
                .allow_negative_numbers(true)
                .help(format!("{} [default: {}]", k.help, k.default));
            if alias != k.name {
                arg = arg.alias(alias);
            }
            sub = sub.arg(arg);
        }
        cmd = cmd.subcommand(sub);
    }
    cmd
}

fn value_name(kind: Kind) -> &'static str {
    match kind {
        Kind::Real => "REAL",
        Kind::Int => "INT",
        Kind::Bool => "BOOL",
        Kind::RealList => "REAL,..",
        Kind::IntList => "INT,..",
        Kind::Enum(_) => "CHOICE",
        Kind::OptReal => "REAL|auto",
        Kind::OptPath => "PATH|none",
    }
}

fn resolve_path(p: &Path, base: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Builds a validated [`RunConfig`] from parsed flags and an optional file.
pub fn from_matches(m: &ArgMatches, cwd: &Path) -> Result<RunConfig, ConfigError> {
    let (name, sm) = m.subcommand().ok_or_else(|| ConfigError::Usage(command().render_usage().to_string()))?;
    let subcommand = Subcommand::from_name(name).expect("clap only accepts known subcommands");
    let config_file = m.get_one::<String>("config").map(|p| resolve_path(Path::new(p), cwd));
    let file = match &config_file {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| ConfigError::Parse(format!("{}: {e}", p.display())))?;
            parse_file_text(&text).map_err(|e| match e {
                ConfigError::Parse(s) => ConfigError::Parse(format!("{}: {s}", p.display())),
                other => other,
            })?
        }
        None => ConfigFile::default(),
    };
    let file_dir = config_file.as_ref().and_then(|p| p.parent().map(Path::to_path_buf)).unwrap_or_else(|| cwd.to_path_buf());
    let flags: BTreeMap<String, String> = subcommand
        .schema()
        .iter()
        .filter_map(|k| sm.get_one::<String>(k.name).map(|v| (k.name.to_string(), v.clone())))
        .collect();
    resolve(
        subcommand,
        &file,
        &flags,
        m.get_one::<String>("output_dir").map(String::as_str),
        m.get_one::<String>("seed").map(String::as_str),
        cwd,
        &file_dir,
        config_file,
    )
}

/// Merges defaults, file and flags and validates the result, collecting
/// every violated constraint.
#[allow(clippy::too_many_arguments)]
pub fn resolve(
    subcommand: Subcommand,
    file: &ConfigFile,
    flags: &BTreeMap<String, String>,
    out_flag: Option<&str>,
    seed_flag: Option<&str>,
    cwd: &Path,
    file_dir: &Path,
    config_file: Option<PathBuf>,
) -> Result<RunConfig, ConfigError> {
    let mut errors = Vec::new();
    for (k, (_, line)) in &file.global {
        if !GLOBAL_KEYS.contains(&k.as_str()) {
            errors.push(format!("line {line}: unknown global key '{k}' (expected one of {})", GLOBAL_KEYS.join(", ")));
        }
    }
    // every section is checked against its own schema, not just the active one
    for (sec, keys) in &file.sections {
        let sc = Subcommand::from_name(sec).expect("sections are checked while parsing");
        let schema = sc.schema();
        for (k, (raw, line)) in keys {
            match schema.iter().find(|s| s.name == k) {
                None => errors.push(format!("line {line}: unknown key '{k}' in [{sec}]")),
                Some(spec) => {
                    if let Err(e) = Value::parse(spec.kind, raw) {
                        errors.push(format!("line {line}: {k}: {e}"));
                    }
                }
            }
        }
    }

    let section = file.sections.get(subcommand.name());
    let mut values = BTreeMap::new();
    for spec in subcommand.schema() {
        let (raw, source) = if let Some(v) = flags.get(spec.name) {
            (v.clone(), Source::Flag)
        } else if let Some((v, _)) = section.and_then(|s| s.get(spec.name)) {
            (v.clone(), Source::File)
        } else {
            (spec.default.to_string(), Source::Default)
        };
        match Value::parse(spec.kind, &raw) {
            Ok(mut v) => {
                if let Value::OptPath(Some(p)) = &v {
                    let base = if source == Source::File { file_dir } else { cwd };
                    v = Value::OptPath(Some(resolve_path(p, base)));
                }
                values.insert(spec.name, (v, source));
            }
            Err(e) if source == Source::Flag => errors.push(format!("--{}: {e}", spec.name)),
            // file errors were reported above
            Err(_) => {}
        }
    }

    let (out_raw, out_base) = match (out_flag, file.global.get("output_dir")) {
        (Some(o), _) => (o.to_string(), cwd),
        (None, Some((o, _))) => (o.clone(), file_dir),
        (None, None) => ("out".to_string(), cwd),
    };
    let output_dir = resolve_path(Path::new(&out_raw), out_base);
    let seed = match seed_flag.map(str::to_string).or_else(|| file.global.get("seed").map(|(s, _)| s.clone())) {
        None => 1,
        Some(s) => s.trim().parse::<u64>().unwrap_or_else(|_| {
            errors.push(format!("seed: '{s}' is not a non-negative integer"));
            0
        }),
    };
    if !errors.is_empty() {
        return Err(ConfigError::Validation(errors));
    }
    let cfg = RunConfig { subcommand, values, output_dir, seed, config_file };
    let violations = constraints(&cfg);
    if violations.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigError::Validation(violations))
    }
}

/// Range and cross-key constraints.
fn constraints(c: &RunConfig) -> Vec<String> {
    let mut v = Vec::new();
    let has = |k: &str| c.values.contains_key(k);
    let mut check = |ok: bool, msg: String| {
        if !ok {
            v.push(msg);
        }
    };
    let eps0 = if has("eps0") { c.real("eps0") } else { zzlab_core::params::DEFAULT_EPS0 };
    if has("eps0") {
        check(eps0 > 0.0, format!("eps0 = {eps0} must be positive"));
    }
    if has("eps") {
        for e in c.reals("eps") {
            check(e > 0.0 && e <= eps0, format!("eps = {e} must lie in (0, eps0 = {eps0}]"));
        }
    }
    if has("kappa_mode") {
        let mode = c.choice("kappa_mode");
        if mode != "fixed" && c.source("kappa") != Source::Default {
            v.push(format!("kappa is set but kappa_mode = {mode}; kappa is only used with kappa_mode = fixed"));
        }
        if mode != "offset" && c.source("kappa_offset") != Source::Default {
            v.push(format!("kappa_offset is set but kappa_mode = {mode}; it is only used with kappa_mode = offset"));
        }
    }
    let mut check = |ok: bool, msg: String| {
        if !ok {
            v.push(msg);
        }
    };
    if has("kappa") && has("eps") && c.values.get("kappa_mode").map_or(true, |(m, _)| *m == Value::Enum("fixed".into())) {
        let k = c.real("kappa");
        for e in c.reals("eps") {
            check(k.abs() <= e, format!("|kappa| = {} must not exceed eps = {e}", k.abs()));
        }
    }
    for key in ["n_modes", "truncation", "n_axis", "branch_points", "disc_points", "periods_x", "n_records", "n_t"] {
        if has(key) {
            check(c.int(key) >= 1, format!("{key} = {} must be positive", c.int(key)));
        }
    }
    for key in ["sigma_max", "fit_radius", "branch_radius", "disc_radius", "length_y", "t_end", "t_first_record", "width_x", "width_y", "t_min"] {
        if has(key) {
            check(c.real(key) > 0.0, format!("{key} = {} must be positive", c.real(key)));
        }
    }
    if has("sigma_max") {
        check(c.real("sigma_max") <= 0.5, format!("sigma_max = {} must not exceed 1/2", c.real("sigma_max")));
    }
    if has("sigma0") {
        let s = c.real("sigma0");
        check(s > 0.0 && s <= 0.25, format!("sigma0 = {s} must lie in (0, 0.25]"));
    }
    if has("amplitude") {
        check(c.real("amplitude") >= 0.0, format!("amplitude = {} must be >= 0", c.real("amplitude")));
    }
    for key in ["nx", "ny"] {
        if has(key) {
            let n = c.int(key);
            check(n >= 1 && (n as u64).is_power_of_two(), format!("{key} = {n} must be a power of two"));
        }
    }
    if has("nx") {
        check(c.int("nx") >= 4, format!("nx = {} must be at least 4", c.int("nx")));
    }
    for key in ["dt", "d1", "d2"] {
        if has(key) {
            if let Some(x) = c.opt_real(key) {
                check(x > 0.0, format!("{key} = {x} must be positive"));
            }
        }
    }
    if has("t_first_record") && has("t_end") {
        check(
            c.real("t_first_record") <= c.real("t_end"),
            format!("t_first_record = {} exceeds t_end = {}", c.real("t_first_record"), c.real("t_end")),
        );
    }
    if c.subcommand == Subcommand::Semigroup {
        check(c.int("k") == 0 || c.int("k") == 1, format!("k = {} must be 0 or 1", c.int("k")));
        check(c.int("p") == 2 || c.int("p") == 4, format!("p = {} must be 2 or 4", c.int("p")));
        check(c.real("t_max") > c.real("t_min"), format!("t_max = {} must exceed t_min = {}", c.real("t_max"), c.real("t_min")));
        check(c.int("n_t") >= 2, format!("n_t = {} must be at least 2", c.int("n_t")));
    }
    if c.subcommand == Subcommand::Kernel {
        check(
            c.real("disc_radius") <= c.real("branch_radius"),
            format!("disc_radius = {} exceeds branch_radius = {}", c.real("disc_radius"), c.real("branch_radius")),
        );
        check(c.int("branch_points") >= 4, format!("branch_points = {} must be at least 4", c.int("branch_points")));
    }
    if has("seeds") {
        for s in c.ints("seeds") {
            check(s >= 0, format!("seed {s} must be non-negative"));
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str], file: Option<&str>) -> Result<RunConfig, ConfigError> {
        let dir = std::env::temp_dir();
        let m = command().try_get_matches_from(std::iter::once("zzlab").chain(args.iter().copied())).unwrap();
        let parsed = match file {
            Some(t) => parse_file_text(t)?,
            None => ConfigFile::default(),
        };
        let (name, sm) = m.subcommand().unwrap();
        let sc = Subcommand::from_name(name).unwrap();
        let flags = sc.schema().iter().filter_map(|k| sm.get_one::<String>(k.name).map(|v| (k.name.to_string(), v.clone()))).collect();
        resolve(sc, &parsed, &flags, None, None, &dir, &dir, None)
    }

    #[test]
    fn empty_file_gives_defaults() {
        let c = run(&["zigzag"], Some("")).unwrap();
        assert_eq!(c.reals("eps"), vec![0.05, 0.1, 0.2]);
        assert_eq!(c.seed, 1);
        assert_eq!(c.source("eps"), Source::Default);
    }

    #[test]
    fn flag_beats_file() {
        let c = run(&["zigzag", "--eps", "0.3"], Some("[zigzag]\neps = 0.1, 0.2\n")).unwrap();
        assert_eq!(c.reals("eps"), vec![0.3]);
        assert_eq!(c.source("eps"), Source::Flag);
        let c = run(&["zigzag"], Some("[zigzag]\neps = 0.1, 0.2\n")).unwrap();
        assert_eq!(c.reals("eps"), vec![0.1, 0.2]);
        assert_eq!(c.source("eps"), Source::File);
    }

    #[test]
    fn kappa_conflicts_with_at_zigzag() {
        let e = run(&["spectrum", "--kappa_mode", "at_zigzag", "--kappa", "0.01"], None).unwrap_err();
        assert!(matches!(e, ConfigError::Validation(ref v) if v[0].contains("kappa_mode")), "{e}");
        let e = run(&["spectrum", "--kappa_mode", "at_zigzag"], Some("[spectrum]\nkappa = 0\n")).unwrap_err();
        assert!(matches!(e, ConfigError::Validation(_)));
        assert!(run(&["spectrum", "--kappa-mode", "at_zigzag"], None).is_ok());
    }

    #[test]
    fn every_violation_is_listed() {
        let e = run(&["simulate", "--nx", "1000", "--ny", "3", "--eps", "-1"], None).unwrap_err();
        match e {
            ConfigError::Validation(v) => assert_eq!(v.len(), 3, "{v:?}"),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn unknown_keys_and_sections_are_rejected() {
        assert!(matches!(run(&["zigzag"], Some("[zigzag]\nbogus = 1\n")), Err(ConfigError::Validation(_))));
        assert!(matches!(run(&["zigzag"], Some("[roll]\nbogus = 1\n")), Err(ConfigError::Validation(_))));
        assert!(matches!(parse_file_text("[nothing]\n"), Err(ConfigError::Parse(_))));
        assert!(matches!(parse_file_text("eps 0.1\n"), Err(ConfigError::Parse(ref s)) if s.contains("line 1")));
        assert!(command().try_get_matches_from(["zzlab", "zigzag", "--bogus", "1"]).is_err());
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let e = run(&["roll"], Some("seed = 2\n\n[roll]\neps = abc\n")).unwrap_err();
        assert!(e.to_string().contains("line 4"), "{e}");
    }

    #[test]
    fn canonical_text_ignores_sources() {
        let a = run(&["roll", "--eps", "0.1"], None).unwrap();
        let b = run(&["roll"], None).unwrap();
        assert_eq!(a.canonical_text(), b.canonical_text());
    }
}
