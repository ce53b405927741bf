//! Validated run configuration shared by the pipeline commands and echoed
//! verbatim into every report.

use std::path::PathBuf;

use regretcal_core::decision::UtilityMatrix;
use serde::Serialize;

use crate::error::AppError;
use crate::DEFAULT_T_STAR_GRID;

#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub input: PathBuf,
    pub out: PathBuf,
    pub bins: usize,
    pub max_leaves: usize,
    pub min_leaf: usize,
    pub glar_gate: f64,
    pub t_stars: Vec<f64>,
    /// Explicit payoff table `[u00, u01, u10, u11]`; exclusive with a
    /// threshold list.
    pub utility: Option<[f64; 4]>,
    pub seed: u64,
    pub fit_fraction: f64,
    pub feature_prefix: String,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), AppError> {
        if self.bins == 0 {
            return Err(AppError::config("--bins must be positive"));
        }
        if self.max_leaves == 0 {
            return Err(AppError::config("--max-leaves must be positive"));
        }
        if !(self.glar_gate >= 0.0) {
            return Err(AppError::config("--glar-gate must be nonnegative"));
        }
        if !(self.fit_fraction > 0.0 && self.fit_fraction < 1.0) {
            return Err(AppError::config(
                "--fit-fraction must lie strictly between 0 and 1",
            ));
        }
        if self.t_stars.is_empty() {
            return Err(AppError::config("--tstar list is empty"));
        }
        for &t in &self.t_stars {
            if !(t > 0.0 && t < 1.0) {
                return Err(AppError::config(format!(
                    "threshold {t} must lie strictly inside (0, 1)"
                )));
            }
        }
        Ok(())
    }

    /// The decision problems this run evaluates: one `(t*, U)` pair per
    /// requested threshold, or the single explicit matrix.
    pub fn decision_problems(&self) -> Result<Vec<(f64, UtilityMatrix)>, AppError> {
        if let Some([u00, u01, u10, u11]) = self.utility {
            let u = UtilityMatrix::new(u00, u01, u10, u11)?;
            return Ok(vec![(u.t_star(), u)]);
        }
        self.t_stars
            .iter()
            .map(|&t| Ok((t, UtilityMatrix::from_t_star(t)?)))
            .collect()
    }
}

pub fn default_t_stars() -> Vec<f64> {
    DEFAULT_T_STAR_GRID.to_vec()
}

/// Parse `--tstar 0.1,0.25,0.5` style comma lists.
pub fn parse_f64_list(raw: &str) -> Result<Vec<f64>, AppError> {
    raw.split(',')
        .map(|part| {
            part.trim()
                .parse::<f64>()
                .map_err(|_| AppError::config(format!("cannot parse '{part}' as a number")))
        })
        .collect()
}

/// Parse `--utility u00,u01,u10,u11`.
pub fn parse_utility(raw: &str) -> Result<[f64; 4], AppError> {
    let values = parse_f64_list(raw)?;
    let [u00, u01, u10, u11] = values[..] else {
        return Err(AppError::config(
            "--utility needs exactly four comma-separated payoffs: u00,u01,u10,u11",
        ));
    };
    Ok([u00, u01, u10, u11])
}
