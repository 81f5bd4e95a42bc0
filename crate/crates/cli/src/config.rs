use std::fs;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use toric_locus::disguised::SearchBudget;
use toric_locus::Tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Table,
}

/// Settings shared by all subcommands. Read from `--config`, then
/// overridden by individual flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub tolerances: Tolerances,
    pub budget: SearchBudget,
    /// Samples per path segment.
    pub samples: usize,
    /// Seed of the multistart search; replaces `budget.seed`.
    pub seed: u64,
    pub format: Format,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            tolerances: Tolerances::default(),
            budget: SearchBudget::default(),
            samples: 32,
            seed: 0,
            format: Format::Json,
        }
    }
}

#[derive(Args, Debug, Default)]
pub struct Overrides {
    /// JSON file with a RunConfig; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true)]
    pub tol_lin: Option<f64>,
    #[arg(long, global = true)]
    pub tol_loglin: Option<f64>,
    #[arg(long, global = true)]
    pub pos_eps: Option<f64>,
    /// Random starts of the steady-state search.
    #[arg(long, global = true)]
    pub starts: Option<usize>,
    #[arg(long, global = true)]
    pub iters: Option<usize>,
    #[arg(long, global = true)]
    pub subset_cap: Option<u64>,
    #[arg(long, global = true)]
    pub max_evaluations: Option<u64>,
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

impl RunConfig {
    pub fn load(o: &Overrides) -> Result<Self, String> {
        let mut cfg = match &o.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
                serde_json::from_str(&text)
                    .map_err(|e| format!("cannot parse {}: {e}", path.display()))?
            }
            None => RunConfig::default(),
        };
        let t = &mut cfg.tolerances;
        t.tol = o.tol.unwrap_or(t.tol);
        t.tol_lin = o.tol_lin.unwrap_or(t.tol_lin);
        t.tol_loglin = o.tol_loglin.unwrap_or(t.tol_loglin);
        t.pos_eps = o.pos_eps.unwrap_or(t.pos_eps);
        let b = &mut cfg.budget;
        b.starts = o.starts.unwrap_or(b.starts);
        b.iters = o.iters.unwrap_or(b.iters);
        b.subset_cap = o.subset_cap.unwrap_or(b.subset_cap);
        b.max_evaluations = o.max_evaluations.unwrap_or(b.max_evaluations);
        cfg.samples = o.samples.unwrap_or(cfg.samples);
        cfg.seed = o.seed.unwrap_or(cfg.seed);
        cfg.budget.seed = cfg.seed;
        cfg.format = o.format.unwrap_or(cfg.format);
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), String> {
        let t = &self.tolerances;
        for (name, v) in [
            ("tol", t.tol),
            ("tol_lin", t.tol_lin),
            ("tol_loglin", t.tol_loglin),
            ("pos_eps", t.pos_eps),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if self.samples < 2 {
            return Err(format!("samples must be at least 2, got {}", self.samples));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_win_over_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        fs::write(&path, r#"{"tolerances": {"tol": 1e-6}, "samples": 10, "seed": 3}"#).unwrap();
        let o = Overrides {
            config: Some(path),
            samples: Some(20),
            ..Overrides::default()
        };
        let cfg = RunConfig::load(&o).unwrap();
        assert_eq!(cfg.tolerances.tol, 1e-6);
        assert_eq!(cfg.tolerances.pos_eps, Tolerances::default().pos_eps);
        assert_eq!(cfg.samples, 20);
        assert_eq!(cfg.budget.seed, 3);
    }

    #[test]
    fn rejects_non_positive_tolerance() {
        let o = Overrides {
            tol: Some(0.0),
            ..Overrides::default()
        };
        assert!(RunConfig::load(&o).is_err());
    }
}
