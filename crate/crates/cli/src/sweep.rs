//! Model-predicted comparison of the optimal decomposition against the
//! balanced greedy grid over a parameter grid of 2D stencils. Volumes are
//! analytic halo-exchange surfaces, not measured runtimes.

use procmap_core::commvol::{surface_volume, BlockGrid};
use procmap_core::decompose::{greedy_grid, search_optimal, to_f64, Factorization, Objective, Rational};
use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SweepGrid {
    /// `r` for an `x : y = 1 : r` iteration space.
    pub ratios: Vec<u64>,
    /// Iteration-space area per node.
    pub areas: Vec<u64>,
    pub gpus: Vec<u64>,
    pub gpus_per_node: u64,
}

impl SweepGrid {
    /// Six aspect ratios, five per-node areas and six GPU counts.
    pub fn table3() -> Self {
        SweepGrid {
            ratios: vec![1, 2, 4, 8, 16, 32],
            areas: vec![1_000_000, 10_000_000, 100_000_000, 200_000_000, 400_000_000],
            gpus: vec![4, 8, 16, 32, 64, 128],
            gpus_per_node: 4,
        }
    }

    pub fn len(&self) -> usize {
        self.ratios.len() * self.areas.len() * self.gpus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum SweepError {
    #[error("{0} must be positive")]
    NonPositive(&'static str),
    #[error("{gpus} GPUs do not fill whole nodes of {per_node}")]
    PartialNode { gpus: u64, per_node: u64 },
    #[error("configuration ratio 1:{ratio}, area {area}, {gpus} GPUs: {message}")]
    Config { ratio: u64, area: u64, gpus: u64, message: String },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRecord {
    pub ratio: u64,
    pub area: u64,
    pub gpus: u64,
    pub nodes: u64,
    pub extents: [u64; 2],
    pub greedy: Factorization,
    pub optimal: Factorization,
    #[serde(skip)]
    pub greedy_volume: Rational,
    #[serde(skip)]
    pub optimal_volume: Rational,
    /// `(V_greedy - V_optimal) / V_greedy`, exact.
    #[serde(skip)]
    pub improvement: Rational,
}

/// Extents `(x, r x)` with `x = round(sqrt(area * nodes / r))`.
pub fn stencil_extents(ratio: u64, area: u64, nodes: u64) -> [u64; 2] {
    let total = area as f64 * nodes as f64;
    let x = ((total / ratio as f64).sqrt().round() as u64).max(1);
    [x, ratio * x]
}

pub fn evaluate(ratio: u64, area: u64, gpus: u64, gpus_per_node: u64) -> Result<SweepRecord, SweepError> {
    let nodes = gpus.div_ceil(gpus_per_node);
    let extents = stencil_extents(ratio, area, nodes);
    let fail = |message: String| SweepError::Config { ratio, area, gpus, message };
    let optimal = search_optimal(gpus, &extents, &Objective::Isotropic).map_err(|e| fail(e.to_string()))?;
    let greedy = greedy_grid(gpus, 2);
    let volume = |f: &Factorization| {
        BlockGrid::from_factorization(extents.to_vec(), f)
            .map(|g| surface_volume(&g))
            .map_err(|e| fail(e.to_string()))
    };
    let greedy_volume = volume(&greedy)?;
    let optimal_volume = volume(&optimal.factorization)?;
    let improvement = if greedy_volume == Rational::from_integer(0.into()) {
        Rational::from_integer(0.into())
    } else {
        (&greedy_volume - &optimal_volume) / &greedy_volume
    };
    Ok(SweepRecord {
        ratio,
        area,
        gpus,
        nodes,
        extents,
        greedy,
        optimal: optimal.factorization,
        greedy_volume,
        optimal_volume,
        improvement,
    })
}

/// Every configuration, ratios outermost, then areas, then GPU counts.
pub fn run_sweep(grid: &SweepGrid) -> Result<Vec<SweepRecord>, SweepError> {
    if grid.gpus_per_node == 0 {
        return Err(SweepError::NonPositive("GPUs per node"));
    }
    for (name, values) in [("ratio", &grid.ratios), ("area", &grid.areas), ("GPU count", &grid.gpus)] {
        if values.contains(&0) {
            return Err(SweepError::NonPositive(name));
        }
    }
    if let Some(&g) = grid.gpus.iter().find(|&&g| g > grid.gpus_per_node && g % grid.gpus_per_node != 0) {
        return Err(SweepError::PartialNode { gpus: g, per_node: grid.gpus_per_node });
    }
    let mut out = Vec::with_capacity(grid.len());
    for &r in &grid.ratios {
        for &a in &grid.areas {
            for &g in &grid.gpus {
                out.push(evaluate(r, a, g, grid.gpus_per_node)?);
            }
        }
    }
    Ok(out)
}

/// `geomean(1 + x) - 1` over improvement fractions; 0 for no values.
pub fn geomean_improvement<'a>(values: impl IntoIterator<Item = &'a Rational>) -> f64 {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + (1.0 + to_f64(v)).ln(), n + 1));
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).exp() - 1.0
    }
}

/// Geometric-mean improvement per distinct value of `key`, in first-seen
/// order.
pub fn group_by(records: &[SweepRecord], key: impl Fn(&SweepRecord) -> u64) -> Vec<(u64, usize, f64)> {
    let mut keys: Vec<u64> = Vec::new();
    for r in records {
        if !keys.contains(&key(r)) {
            keys.push(key(r));
        }
    }
    keys.into_iter()
        .map(|k| {
            let group: Vec<&Rational> = records.iter().filter(|r| key(r) == k).map(|r| &r.improvement).collect();
            (k, group.len(), geomean_improvement(group))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_has_180_configs() {
        assert_eq!(SweepGrid::table3().len(), 180);
    }

    #[test]
    fn square_space_on_four_gpus_gains_nothing() {
        let r = evaluate(1, 1_000_000, 4, 4).unwrap();
        assert_eq!(r.extents, [1000, 1000]);
        assert_eq!(r.greedy, r.optimal);
        assert_eq!(r.improvement, Rational::from_integer(0.into()));
    }

    #[test]
    fn tall_space_favours_cutting_the_long_side() {
        // 8 GPUs on 2 nodes: (400, 12800); greedy (4, 2) cuts the short side.
        let r = evaluate(32, 2_560_000, 8, 4).unwrap();
        assert_eq!(r.extents, [400, 12800]);
        assert_eq!(r.greedy.0, vec![4, 2]);
        assert_eq!(r.optimal.0, vec![1, 8]);
        // 2 (l_y (d_x - 1) + l_x (d_y - 1)): greedy 2 (12800*3 + 400) vs 2 (400*7).
        assert_eq!(r.greedy_volume, Rational::from_integer(77_600.into()));
        assert_eq!(r.optimal_volume, Rational::from_integer(5_600.into()));
    }

    #[test]
    fn geomean_of_nothing_and_constants() {
        assert_eq!(geomean_improvement([]), 0.0);
        let half = Rational::new(1.into(), 2.into());
        assert!((geomean_improvement([&half, &half]) - 0.5).abs() < 1e-12);
    }
}
