//! Cycle-level greedy multi-stream execution of segmented, decomposed
//! tenants under a shared capacity constraint.
//!
//! Each model is a stream issuing its operators in order. Pointer cuts
//! group same-index segments of all models into clusters; clusters run
//! one after another with a fixed synchronization wait between them.
//! Within a cluster the scheduler scans streams round-robin each cycle
//! and places every ready head operator that still fits.

use serde::{Deserialize, Serialize};
use std::collections::{HashMap, VecDeque};
use thiserror::Error;

use crate::cost::{CostError, CostModel};
use crate::dfg::{ChunkOverhead, DfgError, ModelGraph, NodeRole, PointerMatrix};
use crate::fixed::{Frac, ResourceVector, ResourceWeights};

/// Scenario-wide execution parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// Shared capacity; the compute pool is normalized to 1.0.
    pub capacity: ResourceVector,
    /// Idle cycles charged at every cluster barrier.
    pub t_sw: u64,
    pub chunk_overhead: ChunkOverhead,
    pub weights: ResourceWeights,
    /// Residues below this fraction of capacity are not worth chunk
    /// overhead; the spatial regulator stops at them.
    pub residue_threshold: Frac,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            capacity: ResourceVector::sm_only(Frac::ONE),
            t_sw: 0,
            chunk_overhead: ChunkOverhead::default(),
            weights: ResourceWeights::default(),
            residue_threshold: Frac::from_f64(0.05),
        }
    }
}

impl ScenarioConfig {
    pub fn weighted_capacity(&self) -> u64 {
        self.weights.weighted(self.capacity.sm, self.capacity.bw)
    }
}

/// Execution span of one node in the trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpSpan {
    pub op_id: String,
    pub model_idx: usize,
    pub model_id: String,
    pub kind: String,
    pub shape_key: String,
    pub batch: u32,
    pub origin: u32,
    pub chunk: u32,
    pub role: NodeRole,
    pub occupancy: ResourceVector,
    pub start: u64,
    /// Inclusive last cycle.
    pub end: u64,
    pub cluster: usize,
}

/// One simulated cycle: which spans run and what is left over.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleCycle {
    pub cycle: u64,
    /// Indices into [`ScheduleTrace::spans`].
    pub placements: Vec<usize>,
    pub residue: ResourceVector,
    pub barrier_wait: bool,
}

/// Full execution trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct ScheduleTrace {
    pub spans: Vec<OpSpan>,
    pub cycles: Vec<ScheduleCycle>,
    /// Half-open cycle range of each cluster.
    pub cluster_ranges: Vec<(u64, u64)>,
    /// Last end cycle per (cluster, model); `None` for empty segments.
    pub cluster_stream_ends: Vec<Vec<Option<u64>>>,
    pub n_models: usize,
    pub makespan: u64,
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("operator `{op}` occupancy exceeds capacity in the {dim} dimension")]
    OperatorExceedsCapacity { op: String, dim: &'static str },
    #[error("no schedulable operator at cycle {cycle}; internal invariant broken")]
    DeadlockDetected { cycle: u64 },
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Dfg(#[from] DfgError),
}

struct Node {
    occ: ResourceVector,
    dur: u64,
    preds: Vec<usize>,
}

/// Run the scenario to completion and return the trace.
pub fn simulate(
    models: &[ModelGraph],
    pointers: &PointerMatrix,
    cost: &CostModel,
    config: &ScenarioConfig,
) -> Result<ScheduleTrace, SimError> {
    pointers.validate(models)?;
    if models.is_empty() {
        return Ok(ScheduleTrace::default());
    }

    let cap = config.capacity;
    let mut spans: Vec<OpSpan> = Vec::new();
    let mut nodes: Vec<Node> = Vec::new();
    let mut id_to_node: HashMap<&str, usize> = HashMap::new();
    for (mi, model) in models.iter().enumerate() {
        for op in &model.operators {
            let entry = match op.role {
                NodeRole::Compute => {
                    let e = cost.lookup(&op.kind, &op.shape_key, op.batch)?;
                    (e.occupancy, e.duration_cycles)
                }
                NodeRole::ChunkSplit | NodeRole::ChunkConcat => (
                    config.chunk_overhead.occupancy,
                    config.chunk_overhead.duration_cycles,
                ),
            };
            let (occ, dur) = entry;
            if occ.sm > cap.sm {
                return Err(SimError::OperatorExceedsCapacity {
                    op: op.id.clone(),
                    dim: "sm",
                });
            }
            if let (Some(c), Some(b)) = (cap.bw, occ.bw) {
                if b > c {
                    return Err(SimError::OperatorExceedsCapacity {
                        op: op.id.clone(),
                        dim: "bw",
                    });
                }
            }
            let idx = nodes.len();
            id_to_node.insert(op.id.as_str(), idx);
            let preds = op
                .predecessors
                .iter()
                .map(|p| id_to_node[p.as_str()])
                .collect();
            nodes.push(Node {
                span: idx,
                occ,
                dur: dur.max(1),
                preds,
            });
            spans.push(OpSpan {
                op_id: op.id.clone(),
                model_idx: mi,
                model_id: model.model_id.clone(),
                kind: op.kind.clone(),
                shape_key: op.shape_key.clone(),
                batch: op.batch,
                origin: op.origin,
                chunk: op.chunk,
                role: op.role,
                occupancy: occ,
                start: 0,
                end: 0,
                cluster: 0,
            });
        }
    }

    // Per-model node queues for every cluster, in issue order.
    let per_model_segments = pointers.segments(models);
    let n_clusters = pointers.slots + 1;
    let n_models = models.len();
    let mut cluster_queues: Vec<Vec<VecDeque<usize>>> =
        vec![Vec::with_capacity(n_models); n_clusters];
    for segs in &per_model_segments {
        for (k, seg) in segs.iter().enumerate() {
            let queue = seg
                .operator_ids
                .iter()
                .map(|id| id_to_node[id.as_str()])
                .collect();
            cluster_queues[k].push(queue);
        }
    }

    let mut ends: Vec<Option<u64>> = vec![None; nodes.len()];
    let mut cycles: Vec<ScheduleCycle> = Vec::new();
    let mut cluster_ranges = Vec::with_capacity(n_clusters);
    let mut cluster_stream_ends = Vec::with_capacity(n_clusters);
    let mut t: u64 = 0;
    let mut last_placed = n_models - 1;

    for (k, mut queues) in cluster_queues.into_iter().enumerate() {
        let start_t = t;
        let mut stream_ends: Vec<Option<u64>> = vec![None; n_models];
        let mut running: Vec<usize> = Vec::new();
        let mut used_sm: u32 = 0;
        let mut used_bw: u32 = 0;

        loop {
            // Round-robin placement scan, resuming after the last stream
            // that placed. A full lap without a placement ends the scan.
            let mut cursor = (last_placed + 1) % n_models;
            let mut misses = 0;
            let mut placed_this_cycle = false;
            while misses < n_models {
                let placed = match queues[cursor].front() {
                    Some(&head) => {
                        let node = &nodes[head];
                        let ready = node
                            .preds
                            .iter()
                            .all(|&p| ends[p].is_some_and(|e| e < t));
                        let fits_sm = used_sm + node.occ.sm.units() <= cap.sm.units();
                        let fits_bw = match (cap.bw, node.occ.bw) {
                            (Some(c), Some(b)) => used_bw + b.units() <= c.units(),
                            _ => true,
                        };
                        if ready && fits_sm && fits_bw {
                            let end = t + node.dur - 1;
                            ends[head] = Some(end);
                            spans[head].start = t;
                            spans[head].end = end;
                            spans[head].cluster = k;
                            stream_ends[cursor] =
                                Some(stream_ends[cursor].map_or(end, |e| e.max(end)));
                            used_sm += node.occ.sm.units();
                            used_bw += node.occ.bw.map_or(0, Frac::units);
                            running.push(head);
                            queues[cursor].pop_front();
                            last_placed = cursor;
                            true
                        } else {
                            false
                        }
                    }
                    None => false,
                };
                if placed {
                    misses = 0;
                    placed_this_cycle = true;
                } else {
                    misses += 1;
                }
                cursor = (cursor + 1) % n_models;
            }

            let queued: usize = queues.iter().map(VecDeque::len).sum();
            if running.is_empty() {
                if queued == 0 {
                    break;
                }
                if !placed_this_cycle {
                    return Err(SimError::DeadlockDetected { cycle: t });
                }
            }

            cycles.push(ScheduleCycle {
                cycle: t,
                placements: running.clone(),
                residue: ResourceVector {
                    sm: Frac(cap.sm.units() - used_sm),
                    bw: cap.bw.map(|c| Frac(c.units() - used_bw)),
                },
                barrier_wait: false,
            });
            t += 1;
            running.retain(|&n| {
                let done = ends[n].is_some_and(|e| e < t);
                if done {
                    used_sm -= nodes[n].occ.sm.units();
                    used_bw -= nodes[n].occ.bw.map_or(0, Frac::units);
                }
                !done
            });
        }

        cluster_ranges.push((start_t, t));
        cluster_stream_ends.push(stream_ends);
        if k + 1 < n_clusters {
            for _ in 0..config.t_sw {
                cycles.push(ScheduleCycle {
                    cycle: t,
                    placements: Vec::new(),
                    residue: cap,
                    barrier_wait: true,
                });
                t += 1;
            }
        }
    }

    Ok(ScheduleTrace {
        spans,
        cycles,
        cluster_ranges,
        cluster_stream_ends,
        n_models,
        makespan: t,
    })
}

/// Total penalized residue: the sum of weighted per-cycle residue over
/// working cycles plus `slots * capacity * t_sw` for the barriers. Barrier
/// cycles inside the trace are skipped by the first term; the penalty term
/// accounts for them.
pub fn total_residue(trace: &ScheduleTrace, pointers: &PointerMatrix, config: &ScenarioConfig) -> u64 {
    let work: u64 = trace
        .cycles
        .iter()
        .filter(|c| !c.barrier_wait)
        .map(|c| config.weights.weighted(c.residue.sm, c.residue.bw))
        .sum();
    let penalty = pointers.slots as u64 * config.weighted_capacity() * config.t_sw;
    work + penalty
}

pub fn makespan(trace: &ScheduleTrace) -> u64 {
    trace.makespan
}

/// Occupancy time series: (cycle, used sm, used bw, barrier flag).
pub fn utilization_report(
    trace: &ScheduleTrace,
    config: &ScenarioConfig,
) -> Vec<(u64, Frac, Option<Frac>, bool)> {
    trace
        .cycles
        .iter()
        .map(|c| {
            let sm = Frac(config.capacity.sm.units() - c.residue.sm.units());
            let bw = match (config.capacity.bw, c.residue.bw) {
                (Some(cap), Some(r)) => Some(Frac(cap.units() - r.units())),
                _ => None,
            };
            (c.cycle, sm, bw, c.barrier_wait)
        })
        .collect()
}

/// Trace rows as CSV: cycle, operator_id, chunk_index, sm_occupancy,
/// cluster_index. Barrier cycles carry no rows.
pub fn trace_to_csv(trace: &ScheduleTrace) -> String {
    let mut out = String::from("cycle,operator_id,chunk_index,sm_occupancy,cluster_index\n");
    for c in &trace.cycles {
        for &s in &c.placements {
            let span = &trace.spans[s];
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                c.cycle,
                span.op_id,
                span.chunk,
                span.occupancy.sm.format_decimal(),
                span.cluster
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::{CostEntry, CostModel};
    use crate::dfg::{build_model, OperatorDesc};

    fn unit_cost(kinds: &[(&str, f64, u64)]) -> CostModel {
        let rows = kinds
            .iter()
            .map(|(k, sm, dur)| CostEntry {
                kind: (*k).into(),
                shape_key: "s".into(),
                batch: 1,
                occupancy: ResourceVector::sm_only(Frac::from_f64(*sm)),
                duration_cycles: *dur,
            })
            .collect();
        CostModel::from_rows(rows).unwrap().0
    }

    fn chain(model_id: &str, kind: &str, n: usize) -> ModelGraph {
        let descs: Vec<OperatorDesc> = (0..n)
            .map(|i| OperatorDesc {
                id: format!("{model_id}.{}", i + 1),
                kind: kind.into(),
                shape_key: "s".into(),
                batch: 1,
                predecessors: if i == 0 {
                    vec![]
                } else {
                    vec![format!("{model_id}.{i}")]
                },
            })
            .collect();
        build_model(model_id, &descs).unwrap()
    }

    fn independent(model_id: &str, kind: &str, n: usize) -> ModelGraph {
        let descs: Vec<OperatorDesc> = (0..n)
            .map(|i| OperatorDesc {
                id: format!("{model_id}.{}", i + 1),
                kind: kind.into(),
                shape_key: "s".into(),
                batch: 1,
                predecessors: vec![],
            })
            .collect();
        build_model(model_id, &descs).unwrap()
    }

    #[test]
    fn zero_models_is_empty_trace() {
        let trace = simulate(
            &[],
            &PointerMatrix::empty(0),
            &CostModel::default(),
            &ScenarioConfig::default(),
        )
        .unwrap();
        assert_eq!(trace.makespan, 0);
        assert!(trace.cycles.is_empty());
    }

    #[test]
    fn single_op_residue() {
        let cost = unit_cost(&[("conv", 0.6, 1)]);
        let models = vec![chain("m", "conv", 1)];
        let trace = simulate(
            &models,
            &PointerMatrix::empty(1),
            &cost,
            &ScenarioConfig::default(),
        )
        .unwrap();
        assert_eq!(trace.makespan, 1);
        assert_eq!(trace.cycles[0].residue.sm, Frac::from_f64(0.4));
        let r = total_residue(&trace, &PointerMatrix::empty(1), &ScenarioConfig::default());
        assert_eq!(r, 40_000_000); // 0.4 in weighted units
    }

    #[test]
    fn sequential_chain_makespan_is_sum_of_durations() {
        let cost = unit_cost(&[("conv", 0.5, 2)]);
        let models = vec![chain("m", "conv", 3)];
        let trace = simulate(
            &models,
            &PointerMatrix::empty(1),
            &cost,
            &ScenarioConfig::default(),
        )
        .unwrap();
        assert_eq!(trace.makespan, 6);
    }

    #[test]
    fn two_small_ops_overlap_fully() {
        let cost = unit_cost(&[("conv", 0.4, 2)]);
        let models = vec![independent("a", "conv", 1), independent("b", "conv", 1)];
        let trace = simulate(
            &models,
            &PointerMatrix::empty(2),
            &cost,
            &ScenarioConfig::default(),
        )
        .unwrap();
        assert_eq!(trace.makespan, 2);
    }

    #[test]
    fn capacity_blocks_concurrent_placement() {
        let cost = unit_cost(&[("conv", 0.6, 1)]);
        let models = vec![independent("a", "conv", 1), independent("b", "conv", 1)];
        let trace = simulate(
            &models,
            &PointerMatrix::empty(2),
            &cost,
            &ScenarioConfig::default(),
        )
        .unwrap();
        assert_eq!(trace.makespan, 2);
        assert_eq!(trace.cycles[0].placements.len(), 1);
    }

    #[test]
    fn oversized_operator_is_unschedulable() {
        let cost = unit_cost(&[("conv", 0.8, 1)]);
        let models = vec![chain("m", "conv", 1)];
        let mut config = ScenarioConfig::default();
        config.capacity = ResourceVector::sm_only(Frac::from_f64(0.5));
        let err = simulate(&models, &PointerMatrix::empty(1), &cost, &config);
        assert!(matches!(
            err,
            Err(SimError::OperatorExceedsCapacity { dim: "sm", .. })
        ));
    }

    #[test]
    fn barrier_cycles_have_full_residue_and_flag() {
        let cost = unit_cost(&[("conv", 0.5, 1)]);
        let models = vec![chain("m", "conv", 2)];
        let pm = PointerMatrix {
            slots: 1,
            cuts: vec![vec![1]],
        };
        let mut config = ScenarioConfig::default();
        config.t_sw = 3;
        let trace = simulate(&models, &pm, &cost, &config).unwrap();
        // op1, 3 barrier cycles, op2
        assert_eq!(trace.makespan, 5);
        let waits: Vec<_> = trace.cycles.iter().filter(|c| c.barrier_wait).collect();
        assert_eq!(waits.len(), 3);
        assert!(waits.iter().all(|c| c.residue.sm == Frac::ONE));
        // Eq-8 style accounting: 2 working cycles at 0.5 residue each plus
        // 1 pointer * 1.0 * 3
        let r = total_residue(&trace, &pm, &config);
        assert_eq!(r, 2 * 50_000_000 + 30_000_000 * 3);
    }

    #[test]
    fn clusters_execute_in_order_with_dependency_safety() {
        let cost = unit_cost(&[("conv", 0.3, 2)]);
        let models = vec![chain("a", "conv", 4), chain("b", "conv", 2)];
        let pm = PointerMatrix {
            slots: 1,
            cuts: vec![vec![2], vec![1]],
        };
        let trace = simulate(&models, &pm, &cost, &ScenarioConfig::default()).unwrap();
        let (s0, e0) = trace.cluster_ranges[0];
        let (s1, _) = trace.cluster_ranges[1];
        assert!(e0 <= s1);
        for span in &trace.spans {
            if span.cluster == 0 {
                assert!(span.end < s1 || s1 == e0);
                assert!(span.start >= s0);
            }
        }
        // chains never overlap internally
        for w in trace.spans.windows(2) {
            if w[0].model_idx == w[1].model_idx {
                assert!(w[1].start > w[0].end);
            }
        }
    }

    #[test]
    fn determinism_bit_identical() {
        let cost = unit_cost(&[("conv", 0.35, 2), ("relu", 0.15, 1)]);
        let models = vec![chain("a", "conv", 5), chain("b", "relu", 7)];
        let pm = PointerMatrix {
            slots: 1,
            cuts: vec![vec![3], vec![4]],
        };
        let config = ScenarioConfig::default();
        let t1 = simulate(&models, &pm, &cost, &config).unwrap();
        let t2 = simulate(&models, &pm, &cost, &config).unwrap();
        assert_eq!(t1, t2);
    }

    #[test]
    fn penalty_term_matches_pointer_count() {
        let cost = unit_cost(&[("conv", 0.6, 1)]);
        let models = vec![chain("m", "conv", 1)];
        let mut config = ScenarioConfig::default();
        config.t_sw = 3;
        let pm = PointerMatrix {
            slots: 2,
            cuts: vec![vec![1, 1]],
        };
        let trace = simulate(&models, &pm, &cost, &config).unwrap();
        let r = total_residue(&trace, &pm, &config);
        // 0.4 residue + 2 pointers * 1.0 * 3 cycles = 6.4
        assert_eq!(r, 40_000_000 + 2 * 10_000 * 10_000 * 3);
        assert_eq!(crate::fixed::weighted_to_decimal(r), "6.4");
    }
}
