use std::path::{Path, PathBuf};

use clap::ValueEnum;
use corrwitness::Tolerances;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    Witness,
    Saturate,
    Sweep,
    ChainDemo,
    EnvCorr,
    TomographyDemo,
    Validate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// Which invariants `validate` checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OperatorKind {
    #[default]
    Density,
    Hermitian,
    Unitary,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceConfig {
    pub hermitian: Option<f64>,
    pub trace: Option<f64>,
    pub unitary: Option<f64>,
    pub psd: Option<f64>,
    pub eig_per_dim: Option<f64>,
}

/// Contents of a `--config` file. Every field is optional; flags given on
/// the command line take precedence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<CommandKind>,
    pub input: Option<PathBuf>,
    pub sigma: Option<PathBuf>,
    pub hamiltonian: Option<PathBuf>,
    pub seed: Option<u64>,
    pub t_max: Option<f64>,
    pub steps: Option<usize>,
    pub out: Option<PathBuf>,
    pub tol_det: Option<f64>,
    pub format: Option<Format>,
    pub dims: Option<Vec<usize>>,
    pub spins: Option<usize>,
    pub env_start: Option<usize>,
    pub trials: Option<usize>,
    pub couplings: Option<Vec<f64>>,
    pub queries: Option<usize>,
    pub kind: Option<OperatorKind>,
    pub tolerances: Option<ToleranceConfig>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Input(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
        let mut config = Self::parse(&text)?;
        // Relative paths inside a config file are resolved against it.
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut config.input, &mut config.sigma, &mut config.hamiltonian, &mut config.out]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }

    /// Fields set in `other` replace those in `self`.
    pub fn overridden_by(self, other: RunConfig) -> RunConfig {
        RunConfig {
            command: other.command.or(self.command),
            input: other.input.or(self.input),
            sigma: other.sigma.or(self.sigma),
            hamiltonian: other.hamiltonian.or(self.hamiltonian),
            seed: other.seed.or(self.seed),
            t_max: other.t_max.or(self.t_max),
            steps: other.steps.or(self.steps),
            out: other.out.or(self.out),
            tol_det: other.tol_det.or(self.tol_det),
            format: other.format.or(self.format),
            dims: other.dims.or(self.dims),
            spins: other.spins.or(self.spins),
            env_start: other.env_start.or(self.env_start),
            trials: other.trials.or(self.trials),
            couplings: other.couplings.or(self.couplings),
            queries: other.queries.or(self.queries),
            kind: other.kind.or(self.kind),
            tolerances: match (self.tolerances, other.tolerances) {
                (Some(a), Some(b)) => Some(ToleranceConfig {
                    hermitian: b.hermitian.or(a.hermitian),
                    trace: b.trace.or(a.trace),
                    unitary: b.unitary.or(a.unitary),
                    psd: b.psd.or(a.psd),
                    eig_per_dim: b.eig_per_dim.or(a.eig_per_dim),
                }),
                (a, b) => b.or(a),
            },
        }
    }

    pub fn tolerances(&self) -> Result<Tolerances, CliError> {
        let mut tol = Tolerances::default();
        if let Some(t) = &self.tolerances {
            for (slot, value) in [
                (&mut tol.hermitian, t.hermitian),
                (&mut tol.trace, t.trace),
                (&mut tol.unitary, t.unitary),
                (&mut tol.psd, t.psd),
                (&mut tol.eig_per_dim, t.eig_per_dim),
            ] {
                if let Some(v) = value {
                    if !(v.is_finite() && v >= 0.0) {
                        return Err(CliError::Input(format!("tolerance {v} must be finite and non-negative")));
                    }
                    *slot = v;
                }
            }
        }
        Ok(tol)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn tol_det(&self) -> Result<f64, CliError> {
        let t = self.tol_det.unwrap_or(corrwitness::DETECTION_THRESHOLD);
        if !(t.is_finite() && t >= 0.0) {
            return Err(CliError::Input(format!("--tol-det {t} must be finite and non-negative")));
        }
        Ok(t)
    }

    pub fn format(&self) -> Format {
        self.format.unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_fields_rejected() {
        assert!(RunConfig::parse(r#"{"seed": 1, "colour": "red"}"#).is_err());
        assert!(RunConfig::parse(r#"{"tolerances": {"herm": 1e-9}}"#).is_err());
    }

    #[test]
    fn flags_win() {
        let file = RunConfig::parse(r#"{"command": "sweep", "seed": 1, "steps": 10, "tolerances": {"trace": 1e-6}}"#).unwrap();
        let flags = RunConfig {
            seed: Some(2),
            tolerances: Some(ToleranceConfig {
                psd: Some(1e-7),
                ..Default::default()
            }),
            ..Default::default()
        };
        let merged = file.overridden_by(flags);
        assert_eq!(merged.command, Some(CommandKind::Sweep));
        assert_eq!(merged.seed, Some(2));
        assert_eq!(merged.steps, Some(10));
        let tol = merged.tolerances().unwrap();
        assert_eq!(tol.trace, 1e-6);
        assert_eq!(tol.psd, 1e-7);
    }

    #[test]
    fn command_names_are_kebab_case() {
        let c = RunConfig::parse(r#"{"command": "tomography-demo"}"#).unwrap();
        assert_eq!(c.command, Some(CommandKind::TomographyDemo));
    }
}
