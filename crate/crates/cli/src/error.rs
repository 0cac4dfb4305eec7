use crate::config::ConfigError;
use serde_json::json;
use thiserror::Error;
use zzlab_core::bloch::BlochError;
use zzlab_core::expansions::ExpansionError;
use zzlab_core::kernels::KernelError;
use zzlab_core::params::ParamsError;
use zzlab_core::roll::RollError;
use zzlab_core::semigroup::SemigroupError;
use zzlab_core::sim::SimError;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_CONVERGENCE: i32 = 3;
pub const EXIT_BLOWUP: i32 = 4;
pub const EXIT_IO: i32 = 5;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error(transparent)]
    Roll(#[from] RollError),
    #[error(transparent)]
    Bloch(#[from] BlochError),
    #[error(transparent)]
    Expansion(#[from] ExpansionError),
    #[error(transparent)]
    Semigroup(#[from] SemigroupError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("{context}: {source}")]
    Io { context: String, source: std::io::Error },
}

impl From<std::io::Error> for CliError {
    fn from(source: std::io::Error) -> Self {
        CliError::Io { context: "i/o".into(), source }
    }
}

impl CliError {
    pub fn io(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> CliError {
        let context = context.into();
        move |source| CliError::Io { context, source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Params(_) => EXIT_CONFIG,
            CliError::Expansion(ExpansionError::Params(_)) => EXIT_CONFIG,
            CliError::Sim(e) => match e {
                SimError::BlowUp { .. } => EXIT_BLOWUP,
                SimError::InvalidConfig(_) | SimError::Params(_) => EXIT_CONFIG,
                SimError::Io(_) | SimError::Checkpoint(_) => EXIT_IO,
                _ => EXIT_CONVERGENCE,
            },
            CliError::Io { .. } => EXIT_IO,
            _ => EXIT_CONVERGENCE,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.exit_code() {
            EXIT_CONFIG => "config",
            EXIT_BLOWUP => "blow_up",
            EXIT_IO => "io",
            _ => "convergence",
        }
    }

    /// One-line JSON error record for stderr.
    pub fn record(&self) -> String {
        let details: Vec<String> = match self {
            CliError::Config(ConfigError::Validation(v)) => v.clone(),
            _ => Vec::new(),
        };
        json!({
            "error": self.kind(),
            "exit_code": self.exit_code(),
            "message": self.to_string(),
            "violations": details,
        })
        .to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_are_distinct_per_class() {
        let blow = CliError::Sim(SimError::BlowUp { t: 1.0, norm: 5.0, initial: 0.1 });
        let conv = CliError::Roll(RollError::NoConvergence { residual: 1.0, iterations: 50 });
        let cfg = CliError::Config(ConfigError::Validation(vec!["a".into(), "b".into()]));
        let io = CliError::from(std::io::Error::other("disk"));
        assert_eq!([cfg.exit_code(), conv.exit_code(), blow.exit_code(), io.exit_code()], [2, 3, 4, 5]);
        let rec: serde_json::Value = serde_json::from_str(&cfg.record()).unwrap();
        assert_eq!(rec["error"], "config");
        assert_eq!(rec["violations"].as_array().unwrap().len(), 2);
    }
}
