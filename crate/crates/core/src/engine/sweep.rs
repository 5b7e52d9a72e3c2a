//! Parameter sweeps over density, scheme and split.
//!
//! Replications run in parallel; results merge in cell order, so the output
//! does not depend on the thread count.

use rayon::prelude::*;
use thiserror::Error;

use super::{run_with, EngineError, MetricsReport, RunOptions};
use crate::domain::{ScenarioConfig, Scheme, Split};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub sn_counts: Vec<u32>,
    pub schemes: Vec<Scheme>,
    /// Applied to the SN→CH tier.
    pub splits: Vec<Split>,
    pub replications: u32,
    pub first_replication: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub sn_count: u32,
    pub scheme: Scheme,
    pub split: Split,
    pub report: MetricsReport,
}

#[derive(Debug, Error)]
#[error("cell sn_count={sn_count} scheme={scheme} split={split}: {source}")]
pub struct SweepError {
    pub sn_count: u32,
    pub scheme: Scheme,
    pub split: Split,
    #[source]
    pub source: EngineError,
}

impl SweepSpec {
    /// Cell configurations in output order: density, then scheme, then split.
    pub fn cells(&self, base: &ScenarioConfig) -> Vec<ScenarioConfig> {
        let mut out = Vec::new();
        for &sn_count in &self.sn_counts {
            for &scheme in &self.schemes {
                for &split_ch in &self.splits {
                    out.push(ScenarioConfig {
                        sn_count,
                        scheme,
                        split_ch,
                        ..base.clone()
                    });
                }
            }
        }
        out
    }
}

fn jobs(spec: &SweepSpec, cells: usize) -> Vec<(usize, u32)> {
    (0..cells)
        .flat_map(|c| (0..spec.replications).map(move |r| (c, spec.first_replication + r)))
        .collect()
}

fn run_job(cfg: &ScenarioConfig, replication: u32) -> Result<MetricsReport, EngineError> {
    let opts = RunOptions {
        replication,
        ..Default::default()
    };
    run_with(cfg, &opts)
}

/// Runs every (cell, replication) job on the rayon pool.
pub fn sweep(base: &ScenarioConfig, spec: &SweepSpec) -> Result<Vec<SweepCell>, SweepError> {
    let cells = spec.cells(base);
    let jobs = jobs(spec, cells.len());
    let results: Vec<_> = jobs.par_iter().map(|&(c, r)| run_job(&cells[c], r)).collect();
    merge(&cells, &jobs, results)
}

/// Runs the jobs one by one in the given order, a permutation of job indices
/// (cell-major, replication-minor). The result equals [`sweep`]'s.
pub fn sweep_in_order(
    base: &ScenarioConfig,
    spec: &SweepSpec,
    order: &[usize],
) -> Result<Vec<SweepCell>, SweepError> {
    let cells = spec.cells(base);
    let jobs = jobs(spec, cells.len());
    let mut sorted = order.to_vec();
    sorted.sort_unstable();
    assert!(
        sorted.iter().copied().eq(0..jobs.len()),
        "order must be a permutation of 0..{}",
        jobs.len()
    );
    let mut results: Vec<Option<Result<MetricsReport, EngineError>>> = (0..jobs.len()).map(|_| None).collect();
    for &j in order {
        let (c, r) = jobs[j];
        results[j] = Some(run_job(&cells[c], r));
    }
    merge(&cells, &jobs, results.into_iter().map(|r| r.expect("every job ran")).collect())
}

/// Number of jobs [`sweep_in_order`] expects an order for.
pub fn job_count(spec: &SweepSpec) -> usize {
    spec.sn_counts.len() * spec.schemes.len() * spec.splits.len() * spec.replications as usize
}

fn merge(
    cells: &[ScenarioConfig],
    jobs: &[(usize, u32)],
    results: Vec<Result<MetricsReport, EngineError>>,
) -> Result<Vec<SweepCell>, SweepError> {
    let mut merged: Vec<Option<MetricsReport>> = vec![None; cells.len()];
    for (&(c, _), r) in jobs.iter().zip(results) {
        let report = r.map_err(|source| SweepError {
            sn_count: cells[c].sn_count,
            scheme: cells[c].scheme,
            split: cells[c].split_ch,
            source,
        })?;
        match &mut merged[c] {
            Some(m) => m.merge(&report),
            slot => *slot = Some(report),
        }
    }
    Ok(cells
        .iter()
        .zip(merged)
        .map(|(cfg, report)| SweepCell {
            sn_count: cfg.sn_count,
            scheme: cfg.scheme,
            split: cfg.split_ch,
            report: report.unwrap_or_else(|| {
                MetricsReport::empty(cfg.scheme, cfg.sn_count, cfg.split_ch, cfg.seed, cfg.sim_minutes)
            }),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replications_merge_in_cell_order() {
        let base = ScenarioConfig {
            sim_minutes: 3,
            ..Default::default()
        };
        let spec = SweepSpec {
            sn_counts: vec![400, 800],
            schemes: vec![Scheme::TsnIot, Scheme::Ofdma],
            splits: vec![Split::new(4, 1)],
            replications: 2,
            first_replication: 0,
        };
        let cells = sweep(&base, &spec).unwrap();
        assert_eq!(cells.len(), 4);
        assert_eq!((cells[1].sn_count, cells[1].scheme), (400, Scheme::Ofdma));
        assert!(cells.iter().all(|c| c.report.replications == 2));

        let mut expect = run_with(&spec.cells(&base)[2], &RunOptions::default()).unwrap();
        expect.merge(
            &run_with(
                &spec.cells(&base)[2],
                &RunOptions {
                    replication: 1,
                    ..Default::default()
                },
            )
            .unwrap(),
        );
        assert_eq!(cells[2].report, expect);

        let reversed: Vec<usize> = (0..job_count(&spec)).rev().collect();
        assert_eq!(sweep_in_order(&base, &spec, &reversed).unwrap(), cells);
    }

    #[test]
    fn bad_cell_is_named() {
        let spec = SweepSpec {
            sn_counts: vec![401],
            schemes: vec![Scheme::TsnIot],
            splits: vec![Split::new(4, 1)],
            replications: 1,
            first_replication: 0,
        };
        let err = sweep(&ScenarioConfig::default(), &spec).unwrap_err();
        assert!(err.to_string().contains("sn_count=401"), "{err}");
    }
}
