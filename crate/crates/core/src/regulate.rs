//! Move generation over the current plan: batch decomposition targeted at
//! the largest residue (spatial) and pointer repositioning (temporal).

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};

use crate::cost::CostModel;
use crate::dfg::{DfgError, ModelGraph, NodeRole, PointerMatrix};
use crate::fixed::{ResourceVector, SCALE};
use crate::sim::{ScenarioConfig, ScheduleTrace};

/// The spatial state: which operators are decomposed and into which chunk
/// batches. An operator is masked exactly when it carries a chunk list;
/// every list must sum to the operator's batch.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DecompositionPlan {
    chunks: BTreeMap<String, Vec<u32>>,
}

impl DecompositionPlan {
    pub fn chunks_for(&self, op_id: &str) -> Option<&[u32]> {
        self.chunks.get(op_id).map(Vec::as_slice)
    }

    pub fn set_chunks(&mut self, op_id: &str, chunks: Vec<u32>) {
        self.chunks.insert(op_id.to_string(), chunks);
    }

    pub fn masked(&self) -> impl Iterator<Item = (&str, &[u32])> {
        self.chunks.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    /// Chunk lists must partition each masked operator's batch.
    pub fn validate(&self, models: &[ModelGraph]) -> Result<(), DfgError> {
        let batch_of: HashMap<&str, u32> = models
            .iter()
            .flat_map(|m| m.operators.iter())
            .map(|op| (op.id.as_str(), op.batch))
            .collect();
        for (id, chunks) in &self.chunks {
            let Some(&batch) = batch_of.get(id.as_str()) else {
                return Err(DfgError::MaskedOperatorMissingChunks(id.clone()));
            };
            if chunks.is_empty() {
                return Err(DfgError::MaskedOperatorMissingChunks(id.clone()));
            }
            let sum: u32 = chunks.iter().sum();
            if sum != batch || chunks.iter().any(|&b| b == 0) {
                return Err(DfgError::ChunkSumMismatch {
                    op: id.clone(),
                    sum,
                    batch,
                });
            }
        }
        Ok(())
    }

    /// Canonical text encoding used for memoization keys.
    pub fn canonical_key(&self) -> String {
        let mut s = String::from("C:");
        for (id, chunks) in &self.chunks {
            s.push_str(id);
            s.push('=');
            for (i, c) in chunks.iter().enumerate() {
                if i > 0 {
                    s.push('+');
                }
                s.push_str(&c.to_string());
            }
            s.push(';');
        }
        s
    }
}

/// The working cycle with the largest weighted residue, or `None` when
/// nothing is worth filling.
///
/// Excluded from consideration: barrier-wait cycles, clusters where some
/// stream has an empty segment, and per cluster the tail cycles after the
/// earliest stream finished its segment (those residues cannot be filled
/// by the remaining lone streams). Residues below the configured
/// threshold are ignored. Ties resolve to the earliest cycle.
pub fn largest_residue_cycle(trace: &ScheduleTrace, config: &ScenarioConfig) -> Option<u64> {
    let threshold = (u128::from(config.weighted_capacity())
        * u128::from(config.residue_threshold.units())
        / u128::from(SCALE)) as u64;
    let mut best: Option<(u64, u64)> = None; // (weighted residue, cycle)
    for (k, &(start, end)) in trace.cluster_ranges.iter().enumerate() {
        let exhaust = trace.cluster_stream_ends[k]
            .iter()
            .map(|e| *e)
            .collect::<Option<Vec<u64>>>()
            .and_then(|ends| ends.into_iter().min());
        let Some(exhaust) = exhaust else {
            continue; // some stream had nothing to issue here
        };
        for c in &trace.cycles {
            if c.barrier_wait || c.cycle < start || c.cycle >= end || c.cycle > exhaust {
                continue;
            }
            let w = config.weights.weighted(c.residue.sm, c.residue.bw);
            if w >= threshold && best.map_or(true, |(bw, _)| w > bw) {
                best = Some((w, c.cycle));
            }
        }
    }
    best.map(|(_, cycle)| cycle)
}

/// One spatial move: find the largest worthwhile residue, pick the
/// largest-occupancy operator starting after it in the same cluster, and
/// split off the biggest profiled chunk that fits the residue, provided
/// the operator's predecessors finish before the target cycle. Returns
/// the updated plan, or `None` when no feasible chunk exists.
pub fn propose_decomposition(
    decomposed_models: &[ModelGraph],
    trace: &ScheduleTrace,
    plan: &DecompositionPlan,
    cost: &CostModel,
    config: &ScenarioConfig,
) -> Option<DecompositionPlan> {
    let target = largest_residue_cycle(trace, config)?;
    let cycle = trace.cycles.iter().find(|c| c.cycle == target)?;
    let residue = cycle.residue;
    let cluster = trace
        .cluster_ranges
        .iter()
        .position(|&(s, e)| target >= s && target < e)?;

    let end_of: HashMap<&str, u64> = trace
        .spans
        .iter()
        .map(|s| (s.op_id.as_str(), s.end))
        .collect();
    let preds_of: HashMap<&str, &[String]> = decomposed_models
        .iter()
        .flat_map(|m| m.operators.iter())
        .map(|op| (op.id.as_str(), op.predecessors.as_slice()))
        .collect();

    let mut candidates: Vec<&crate::sim::OpSpan> = trace
        .spans
        .iter()
        .filter(|s| {
            s.cluster == cluster
                && s.start > target
                && s.role == NodeRole::Compute
                && s.batch >= 2
        })
        .collect();
    candidates.sort_by(|a, b| {
        b.occupancy
            .sm
            .cmp(&a.occupancy.sm)
            .then(a.start.cmp(&b.start))
            .then(a.op_id.cmp(&b.op_id))
    });

    for cand in candidates {
        let Some(fill) = fill_batch(cost, &cand.kind, &cand.shape_key, cand.batch, residue, config)
        else {
            continue;
        };
        let deps_ok = preds_of
            .get(cand.op_id.as_str())
            .is_some_and(|preds| preds.iter().all(|p| end_of[p.as_str()] < target));
        if !deps_ok {
            continue;
        }
        let mut updated = plan.clone();
        if cand.chunk == 0 {
            updated.set_chunks(&cand.op_id, vec![fill, cand.batch - fill]);
        } else {
            // splitting an existing chunk refines its entry in place
            let suffix = format!(".c{}", cand.chunk);
            let orig = cand.op_id.strip_suffix(&suffix)?;
            let mut list = plan.chunks_for(orig)?.to_vec();
            let at = (cand.chunk - 1) as usize;
            debug_assert_eq!(list[at], cand.batch);
            list.splice(at..=at, [fill, cand.batch - fill]);
            updated.set_chunks(orig, list);
        }
        return Some(updated);
    }
    None
}

/// Largest profiled batch below `batch` whose cost fits inside `residue`
/// on every tracked dimension. Binary-searches the profiled grid, relying
/// on the validated batch-monotone occupancy.
fn fill_batch(
    cost: &CostModel,
    kind: &str,
    shape_key: &str,
    batch: u32,
    residue: ResourceVector,
    config: &ScenarioConfig,
) -> Option<u32> {
    let grid = cost.grid(kind, shape_key);
    let fitting = grid.partition_point(|r| r.occupancy.sm <= residue.sm);
    grid[..fitting]
        .iter()
        .rev()
        .find(|r| {
            r.batch < batch
                && match (config.capacity.bw, r.occupancy.bw, residue.bw) {
                    (Some(_), Some(b), Some(rbw)) => b <= rbw,
                    _ => true,
                }
        })
        .map(|r| r.batch)
}

/// All legal placements of one pointer slot with every other entry fixed:
/// the open interval between the neighboring cuts (model boundaries act
/// as virtual neighbors), plus the incumbent position. Each result is a
/// full matrix.
pub fn coordinate_moves(
    pointers: &PointerMatrix,
    models: &[ModelGraph],
    model_idx: usize,
    slot: usize,
) -> Vec<PointerMatrix> {
    let cuts = &pointers.cuts[model_idx];
    let len = models[model_idx].origin_len();
    let incumbent = cuts[slot];
    let lo = if slot == 0 { 0 } else { cuts[slot - 1] };
    let hi = if slot + 1 < cuts.len() {
        cuts[slot + 1]
    } else {
        len
    };
    let mut positions: Vec<u32> = (lo.saturating_add(1)..hi).collect();
    if let Err(at) = positions.binary_search(&incumbent) {
        positions.insert(at, incumbent);
    }
    positions
        .into_iter()
        .map(|p| {
            let mut m = pointers.clone();
            m.cuts[model_idx][slot] = p;
            m
        })
        .collect()
}

/// Append one slot to every model, placed at the midpoint of that model's
/// largest current segment (earliest on ties).
pub fn add_pointer(pointers: &PointerMatrix, models: &[ModelGraph]) -> PointerMatrix {
    let mut out = PointerMatrix {
        slots: pointers.slots + 1,
        cuts: Vec::with_capacity(models.len()),
    };
    for (model, cuts) in models.iter().zip(&pointers.cuts) {
        let len = model.origin_len();
        let bounds: Vec<u32> = std::iter::once(0)
            .chain(cuts.iter().copied())
            .chain(std::iter::once(len))
            .collect();
        let mut best: (u32, u32) = (0, 0); // (segment length, lower bound)
        let mut found = false;
        for w in bounds.windows(2) {
            let seg = w[1].saturating_sub(w[0]);
            if !found || seg > best.0 {
                best = (seg, w[0]);
                found = true;
            }
        }
        let new_cut = best.1 + best.0.div_ceil(2);
        let mut list = cuts.clone();
        let at = list.partition_point(|&c| c <= new_cut);
        list.insert(at, new_cut);
        out.cuts.push(list);
    }
    out
}
