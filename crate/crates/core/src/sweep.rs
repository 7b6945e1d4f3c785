//! Granularity sweeps: best objective per pointer count and per equal-way
//! chunk split, for locating the interior sweet zone.

use crate::cost::CostModel;
use crate::dfg::{ModelGraph, NodeRole, PointerMatrix};
use crate::fixed::{weighted_to_decimal, Frac};
use crate::regulate::DecompositionPlan;
use crate::search::{objective, optimize_at_pointer_count, SearchConfig, SearchResult};
use crate::sim::{makespan, simulate, ScenarioConfig, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PointerSweepPoint {
    pub count: usize,
    pub r: u64,
    pub makespan: u64,
}

/// Best-found configuration at every pointer count in `0..=max_count`.
pub fn pointer_sweep(
    models: &[ModelGraph],
    cost: &CostModel,
    config: &ScenarioConfig,
    search: &SearchConfig,
    max_count: usize,
) -> Result<(Vec<PointerSweepPoint>, Vec<SearchResult>), SimError> {
    let mut points = Vec::with_capacity(max_count + 1);
    let mut results = Vec::with_capacity(max_count + 1);
    for count in 0..=max_count {
        let result = optimize_at_pointer_count(models, cost, config, search, count)?;
        points.push(PointerSweepPoint {
            count,
            r: result.best_r,
            makespan: makespan(&result.trace),
        });
        results.push(result);
    }
    Ok((points, results))
}

pub fn pointer_sweep_to_csv(points: &[PointerSweepPoint]) -> String {
    let mut out = String::from("pointers,r,makespan\n");
    for p in points {
        out.push_str(&format!(
            "{},{},{}\n",
            p.count,
            weighted_to_decimal(p.r),
            p.makespan
        ));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChunkSweepPoint {
    pub ways: u32,
    pub split_ops: usize,
    pub r: u64,
    pub makespan: u64,
}

/// Near-equal integer partition of `batch` into `ways` parts.
pub fn equal_chunks(batch: u32, ways: u32) -> Vec<u32> {
    let base = batch / ways;
    let rem = batch % ways;
    (0..ways)
        .map(|i| if i < rem { base + 1 } else { base })
        .collect()
}

/// Split every operator at or above the occupancy bar into `ways` equal
/// chunks and evaluate. `ways == 1` is the unsplit baseline.
pub fn chunk_sweep(
    models: &[ModelGraph],
    cost: &CostModel,
    config: &ScenarioConfig,
    grid: &[u32],
    min_occ: Frac,
) -> Result<Vec<ChunkSweepPoint>, SimError> {
    let pointers = PointerMatrix::empty(models.len());
    let mut points = Vec::with_capacity(grid.len());
    for &ways in grid {
        let ways = ways.max(1);
        let mut plan = DecompositionPlan::default();
        let mut split_ops = 0;
        if ways > 1 {
            for model in models {
                for op in &model.operators {
                    if op.role != NodeRole::Compute || op.batch < ways {
                        continue;
                    }
                    let entry = cost.lookup(&op.kind, &op.shape_key, op.batch)?;
                    if entry.occupancy.sm >= min_occ {
                        plan.set_chunks(&op.id, equal_chunks(op.batch, ways));
                        split_ops += 1;
                    }
                }
            }
        }
        let r = objective(models, cost, &plan, &pointers, config)?;
        let decomposed =
            crate::dfg::apply_decomposition_all(models, &plan, &config.chunk_overhead)?;
        let trace = simulate(&decomposed, &pointers, cost, config)?;
        points.push(ChunkSweepPoint {
            ways,
            split_ops,
            r,
            makespan: makespan(&trace),
        });
    }
    Ok(points)
}

pub fn chunk_sweep_to_csv(points: &[ChunkSweepPoint]) -> String {
    let mut out = String::from("ways,split_ops,r,makespan\n");
    for p in points {
        out.push_str(&format!(
            "{},{},{},{}\n",
            p.ways,
            p.split_ops,
            weighted_to_decimal(p.r),
            p.makespan
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_chunks_partition_exactly() {
        assert_eq!(equal_chunks(32, 2), vec![16, 16]);
        assert_eq!(equal_chunks(32, 4), vec![8, 8, 8, 8]);
        assert_eq!(equal_chunks(30, 4), vec![8, 8, 7, 7]);
        assert_eq!(equal_chunks(5, 5), vec![1, 1, 1, 1, 1]);
        for (b, w) in [(32u32, 3u32), (17, 4), (9, 2)] {
            let c = equal_chunks(b, w);
            assert_eq!(c.iter().sum::<u32>(), b);
            assert!(c.iter().all(|&x| x >= 1));
        }
    }
}
