//! Group-level (cluster) bootstrap standard errors.
//!
//! Replication `r` draws `G` groups with replacement from ChaCha8 stream `r`
//! of the seed and re-runs the estimator on the resampled panel. Results are
//! collected in replication order, so the output does not depend on the
//! number of worker threads.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::decomposition::twfe_coefficient;
use crate::didm::didm;
use crate::error::{Error, Result};
use crate::panel::PanelDataset;
use crate::sim::stream;
use crate::staggered::{build_cohorts, did_ell};

const RESAMPLE: u64 = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Estimator {
    Didm { target: usize },
    DidEll { first: usize, second: usize, ell: usize },
    Twfe { target: usize },
}

impl Estimator {
    /// Point estimate on `panel`.
    pub fn evaluate(&self, panel: &PanelDataset) -> Result<f64> {
        match *self {
            Estimator::Didm { target } => Ok(didm(panel, target)?.estimate),
            Estimator::DidEll { first, second, ell } => {
                let structure = build_cohorts(panel, first, second)?;
                Ok(did_ell(panel, &structure, ell)?.estimate)
            }
            Estimator::Twfe { target } => twfe_coefficient(panel, target),
        }
    }

    /// Estimate on a resampled panel; `None` when undefined there, which for
    /// `DID_M` includes an empty switcher set.
    fn replicate(&self, panel: &PanelDataset) -> Option<f64> {
        match *self {
            Estimator::Didm { target } => didm(panel, target).ok().filter(|r| r.n_s > 0.0).map(|r| r.estimate),
            _ => self.evaluate(panel).ok(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapResult {
    pub estimate: f64,
    pub se: f64,
    pub replications: usize,
    pub n_valid: usize,
    pub n_degenerate: usize,
    /// Per-replication estimates; `None` where the estimator was undefined.
    pub estimates: Vec<Option<f64>>,
}

/// Groups drawn for replication `r`.
pub fn resample(n_groups: usize, seed: u64, r: u64) -> Vec<usize> {
    let mut rng = stream(seed, RESAMPLE, r);
    (0..n_groups).map(|_| rng.random_range(0..n_groups)).collect()
}

/// Bootstrap standard error of `estimator` with `replications` draws on
/// `jobs` worker threads (`0` lets the pool choose).
pub fn bootstrap_se(
    estimator: Estimator,
    panel: &PanelDataset,
    replications: usize,
    seed: u64,
    jobs: usize,
) -> Result<BootstrapResult> {
    if replications == 0 {
        return Err(Error::InvalidConfig("bootstrap needs at least one replication".into()));
    }
    let estimate = estimator.evaluate(panel)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let estimates: Vec<Option<f64>> = pool.install(|| {
        (0..replications)
            .into_par_iter()
            .map(|r| {
                let groups = resample(panel.n_groups(), seed, r as u64);
                estimator.replicate(&panel.select_groups(&groups))
            })
            .collect()
    });

    let valid: Vec<f64> = estimates.iter().flatten().copied().collect();
    if valid.is_empty() {
        return Err(Error::AllReplicationsDegenerate { replications });
    }
    let n_valid = valid.len();
    if n_valid < replications {
        log::warn!("{} of {replications} bootstrap replications were undefined and excluded", replications - n_valid);
    }
    let se = if n_valid == 1 {
        log::warn!("a single usable bootstrap replication: standard error set to 0");
        0.0
    } else {
        let mean = valid.iter().sum::<f64>() / n_valid as f64;
        let ss: f64 = valid.iter().map(|v| (v - mean) * (v - mean)).sum();
        (ss / (n_valid - 1) as f64).sqrt()
    };
    Ok(BootstrapResult {
        estimate,
        se,
        replications,
        n_valid,
        n_degenerate: replications - n_valid,
        estimates,
    })
}
