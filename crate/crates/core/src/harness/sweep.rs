//! FAST-DTS over a `B_exp × rlb_min` grid on one shared scenario, with trend
//! tests on the resulting surfaces.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::scenario::Scenario;
use super::sim::simulate_with;
use crate::scheduler::{Algorithm, SchedulerConfig};
use crate::stats::{mean, spearman, spearman_p_increasing};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub b_exp: Vec<f64>,
    pub rlb_min: Vec<f64>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            b_exp: vec![30.0, 100.0, 200.0, 300.0, 450.0],
            rlb_min: vec![0.9, 0.95, 0.98, 0.995, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub b_exp: f64,
    pub rlb_min: f64,
    pub reliability_pct: f64,
    #[serde(rename = "wasted_kJ")]
    pub wasted_kj: f64,
    pub gaps: u64,
}

/// One-sided Spearman test for an increasing trend.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendTest {
    pub rho: f64,
    pub p_value: f64,
    pub n: usize,
}

impl TrendTest {
    fn increasing(xs: &[f64], ys: &[f64]) -> Self {
        let rho = spearman(xs, ys).unwrap_or(0.0);
        Self {
            rho,
            p_value: spearman_p_increasing(rho, xs.len()),
            n: xs.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepAnalysis {
    /// Gaps against `rlb_min`, pooled over all cells.
    pub gaps_vs_rlb_min: TrendTest,
    /// Wasted energy against `B_exp`, pooled over all cells.
    pub waste_vs_b_exp: TrendTest,
    /// Rows (fixed `B_exp`) in which gaps never decrease as `rlb_min` grows.
    pub gap_rows_monotone: usize,
    /// Columns (fixed `rlb_min`) in which waste never decreases as `B_exp` grows.
    pub waste_columns_monotone: usize,
    /// Mean reliability per `B_exp`, averaged over `rlb_min`.
    pub reliability_by_b_exp: Vec<f64>,
    /// The best `B_exp` lies strictly inside the grid.
    pub reliability_peak_interior: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub grid: SweepGrid,
    /// Row-major: `cells[i * rlb_min.len() + j]` is `(b_exp[i], rlb_min[j])`.
    pub cells: Vec<SweepCell>,
    pub analysis: SweepAnalysis,
}

pub fn sweep(cfg: &RunConfig, grid: &SweepGrid) -> Result<SweepResult> {
    let scenario = Scenario::build(cfg)?;
    sweep_scenario(&scenario, cfg, grid)
}

pub fn sweep_scenario(scenario: &Scenario, cfg: &RunConfig, grid: &SweepGrid) -> Result<SweepResult> {
    if grid.b_exp.is_empty() || grid.rlb_min.is_empty() {
        return Err(Error::config("sweep grid must be non-empty"));
    }
    let coords: Vec<(f64, f64)> = grid
        .b_exp
        .iter()
        .flat_map(|&b| grid.rlb_min.iter().map(move |&r| (b, r)))
        .collect();
    let cells: Vec<SweepCell> = coords
        .par_iter()
        .map(|&(b_exp, rlb_min)| {
            let sched = SchedulerConfig {
                algorithm: Algorithm::FastDts,
                b_exp,
                rlb_min,
                ..cfg.scheduler
            };
            let out = simulate_with(scenario, cfg, &sched).map_err(|e| Error::AtSweepCell {
                b_exp,
                rlb_min,
                source: Box::new(e),
            })?;
            Ok(SweepCell {
                b_exp,
                rlb_min,
                reliability_pct: out.metrics.reliability_pct,
                wasted_kj: out.metrics.wasted_kj,
                gaps: out.metrics.gaps,
            })
        })
        .collect::<Result<_>>()?;
    let analysis = analyse(grid, &cells);
    Ok(SweepResult {
        grid: grid.clone(),
        cells,
        analysis,
    })
}

fn non_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] >= w[0])
}

pub fn analyse(grid: &SweepGrid, cells: &[SweepCell]) -> SweepAnalysis {
    let (nb, nr) = (grid.b_exp.len(), grid.rlb_min.len());
    let cell = |i: usize, j: usize| &cells[i * nr + j];
    let rlb: Vec<f64> = cells.iter().map(|c| c.rlb_min).collect();
    let bexp: Vec<f64> = cells.iter().map(|c| c.b_exp).collect();
    let gaps: Vec<f64> = cells.iter().map(|c| c.gaps as f64).collect();
    let waste: Vec<f64> = cells.iter().map(|c| c.wasted_kj).collect();
    let gap_rows_monotone = (0..nb)
        .filter(|&i| non_decreasing(&(0..nr).map(|j| cell(i, j).gaps as f64).collect::<Vec<_>>()))
        .count();
    let waste_columns_monotone = (0..nr)
        .filter(|&j| non_decreasing(&(0..nb).map(|i| cell(i, j).wasted_kj).collect::<Vec<_>>()))
        .count();
    let reliability_by_b_exp: Vec<f64> = (0..nb)
        .map(|i| mean(&(0..nr).map(|j| cell(i, j).reliability_pct).collect::<Vec<_>>()))
        .collect();
    let best = (0..nb)
        .max_by(|&a, &b| {
            reliability_by_b_exp[a]
                .total_cmp(&reliability_by_b_exp[b])
                .then(b.cmp(&a))
        })
        .unwrap_or(0);
    SweepAnalysis {
        gaps_vs_rlb_min: TrendTest::increasing(&rlb, &gaps),
        waste_vs_b_exp: TrendTest::increasing(&bexp, &waste),
        gap_rows_monotone,
        waste_columns_monotone,
        reliability_peak_interior: nb >= 3 && best > 0 && best + 1 < nb,
        reliability_by_b_exp,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analysis_on_synthetic_surface() {
        let grid = SweepGrid {
            b_exp: vec![1.0, 2.0, 3.0],
            rlb_min: vec![0.1, 0.2],
        };
        let mut cells = Vec::new();
        for (i, &b) in grid.b_exp.iter().enumerate() {
            for (j, &r) in grid.rlb_min.iter().enumerate() {
                cells.push(SweepCell {
                    b_exp: b,
                    rlb_min: r,
                    reliability_pct: if i == 1 { 99.0 } else { 90.0 },
                    wasted_kj: i as f64,
                    gaps: j as u64,
                });
            }
        }
        let a = analyse(&grid, &cells);
        assert!(a.reliability_peak_interior);
        assert_eq!(a.gap_rows_monotone, 3);
        assert_eq!(a.waste_columns_monotone, 2);
        assert!(a.waste_vs_b_exp.rho > 0.9);
    }
}
