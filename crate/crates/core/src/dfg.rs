//! Tenant data-flow graphs: operators, issue order, segmentation by
//! synchronization pointers, and batch-decomposition rewriting.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use thiserror::Error;

use crate::fixed::ResourceVector;
use crate::regulate::DecompositionPlan;

/// What a node does in the rewritten graph. Split/concat nodes are the
/// bookkeeping ends of a decomposed operator and are costed by the chunk
/// overhead policy rather than the profile table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeRole {
    Compute,
    ChunkSplit,
    ChunkConcat,
}

/// One operator of a tenant model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperatorSpec {
    pub id: String,
    pub model_id: String,
    /// 1-based position in the model's issue order, contiguous.
    pub index: u32,
    /// Pre-decomposition position this node belongs to. Equal to `index`
    /// for graphs that have not been rewritten; after decomposition every
    /// node of a rewritten block keeps the original operator's position so
    /// pointer cuts stay valid.
    pub origin: u32,
    pub kind: String,
    pub shape_key: String,
    pub batch: u32,
    pub predecessors: Vec<String>,
    pub role: NodeRole,
    /// 0 for a whole operator; siblings of a decomposed operator are
    /// numbered from 1 in chunk-list order.
    pub chunk: u32,
}

/// Raw operator description as read from a scenario file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperatorDesc {
    pub id: String,
    pub kind: String,
    pub shape_key: String,
    pub batch: u32,
    #[serde(default)]
    pub predecessors: Vec<String>,
}

/// One tenant: operators in a fixed topological issue order plus the
/// dependency edges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelGraph {
    pub model_id: String,
    pub operators: Vec<OperatorSpec>,
    pub edges: Vec<(String, String)>,
}

/// A contiguous slice of a model's issue order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub model_id: String,
    pub segment_index: usize,
    pub operator_ids: Vec<String>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DfgError {
    #[error("duplicate operator id `{0}`")]
    DuplicateId(String),
    #[error("operator `{op}` references unknown predecessor `{pred}`")]
    UnknownPredecessor { op: String, pred: String },
    #[error("cyclic dependency involving operator `{0}`")]
    CyclicDependency(String),
    #[error("operator `{0}` has batch 0")]
    ZeroBatch(String),
    #[error("cut position {pos} out of range for model `{model}` with {len} operators")]
    CutOutOfRange { model: String, pos: u32, len: u32 },
    #[error("cuts must be strictly increasing, got {0} after {1}")]
    UnsortedCuts(u32, u32),
    #[error("chunk list for `{op}` sums to {sum}, operator batch is {batch}")]
    ChunkSumMismatch { op: String, sum: u32, batch: u32 },
    #[error("operator `{0}` is masked for decomposition but has no chunk list")]
    MaskedOperatorMissingChunks(String),
    #[error("pointer list for model `{model}` has {got} slots, expected {expected}")]
    SlotCountMismatch {
        model: String,
        got: usize,
        expected: usize,
    },
    #[error("pointer positions for model `{0}` must be non-decreasing")]
    UnsortedPointers(String),
    #[error("duplicate interior pointer position {pos} for model `{model}`")]
    DuplicateInteriorPointer { model: String, pos: u32 },
}

/// Validate raw descriptions into a model graph with a topological issue
/// order. The order is Kahn's algorithm with ties broken by input position,
/// so already-ordered chains come back unchanged.
pub fn build_model(model_id: &str, descs: &[OperatorDesc]) -> Result<ModelGraph, DfgError> {
    let mut id_to_pos: HashMap<&str, usize> = HashMap::new();
    for (pos, d) in descs.iter().enumerate() {
        if d.batch == 0 {
            return Err(DfgError::ZeroBatch(d.id.clone()));
        }
        if id_to_pos.insert(&d.id, pos).is_some() {
            return Err(DfgError::DuplicateId(d.id.clone()));
        }
    }

    let mut indegree = vec![0usize; descs.len()];
    let mut successors: Vec<Vec<usize>> = vec![Vec::new(); descs.len()];
    for (pos, d) in descs.iter().enumerate() {
        for pred in &d.predecessors {
            let &ppos = id_to_pos
                .get(pred.as_str())
                .ok_or_else(|| DfgError::UnknownPredecessor {
                    op: d.id.clone(),
                    pred: pred.clone(),
                })?;
            successors[ppos].push(pos);
            indegree[pos] += 1;
        }
    }

    // Min-heap on input position keeps the order deterministic.
    let mut ready: std::collections::BinaryHeap<std::cmp::Reverse<usize>> = indegree
        .iter()
        .enumerate()
        .filter(|(_, &d)| d == 0)
        .map(|(i, _)| std::cmp::Reverse(i))
        .collect();
    let mut order = Vec::with_capacity(descs.len());
    while let Some(std::cmp::Reverse(pos)) = ready.pop() {
        order.push(pos);
        for &succ in &successors[pos] {
            indegree[succ] -= 1;
            if indegree[succ] == 0 {
                ready.push(std::cmp::Reverse(succ));
            }
        }
    }
    if order.len() != descs.len() {
        let stuck = indegree
            .iter()
            .position(|&d| d > 0)
            .map(|i| descs[i].id.clone())
            .unwrap_or_default();
        return Err(DfgError::CyclicDependency(stuck));
    }

    let mut operators = Vec::with_capacity(descs.len());
    let mut edges = Vec::new();
    for (rank, &pos) in order.iter().enumerate() {
        let d = &descs[pos];
        for pred in &d.predecessors {
            edges.push((pred.clone(), d.id.clone()));
        }
        operators.push(OperatorSpec {
            id: d.id.clone(),
            model_id: model_id.to_string(),
            index: (rank + 1) as u32,
            origin: (rank + 1) as u32,
            kind: d.kind.clone(),
            shape_key: d.shape_key.clone(),
            batch: d.batch,
            predecessors: d.predecessors.clone(),
            role: NodeRole::Compute,
            chunk: 0,
        });
    }
    Ok(ModelGraph {
        model_id: model_id.to_string(),
        operators,
        edges,
    })
}

impl ModelGraph {
    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    /// Number of pre-decomposition positions, i.e. the coordinate space
    /// pointer cuts live in.
    pub fn origin_len(&self) -> u32 {
        self.operators.last().map_or(0, |op| op.origin)
    }
}

/// Split a model's issue order at the given cut positions. A cut at `k`
/// places a boundary after the operator with origin `k`; cuts must be
/// strictly increasing and in `1..=len`.
pub fn segment_model(model: &ModelGraph, cuts: &[u32]) -> Result<Vec<Segment>, DfgError> {
    let len = model.origin_len();
    let mut prev: Option<u32> = None;
    for &c in cuts {
        if c == 0 || c > len {
            return Err(DfgError::CutOutOfRange {
                model: model.model_id.clone(),
                pos: c,
                len,
            });
        }
        if let Some(p) = prev {
            if c <= p {
                return Err(DfgError::UnsortedCuts(c, p));
            }
        }
        prev = Some(c);
    }
    Ok(segments_by_origin(model, cuts))
}

/// Segment construction shared with cluster assembly: cut values of 0
/// (leading empty segments) and repeats at the boundaries are accepted
/// here because validated [`PointerMatrix`] lists may contain them.
pub(crate) fn segments_by_origin(model: &ModelGraph, cuts: &[u32]) -> Vec<Segment> {
    let bounds: Vec<u32> = std::iter::once(0)
        .chain(cuts.iter().copied())
        .chain(std::iter::once(model.origin_len()))
        .collect();
    let mut segments = Vec::with_capacity(bounds.len() - 1);
    for (i, window) in bounds.windows(2).enumerate() {
        let (lo, hi) = (window[0], window[1]);
        let operator_ids = model
            .operators
            .iter()
            .filter(|op| op.origin > lo && op.origin <= hi)
            .map(|op| op.id.clone())
            .collect();
        segments.push(Segment {
            model_id: model.model_id.clone(),
            segment_index: i,
            operator_ids,
        });
    }
    segments
}

/// The temporal state: one cut list per model, all lists the same length.
///
/// Positions live in `[0, len]` over pre-decomposition indices. Position 0
/// marks a leading empty segment; models shorter than the slot count pad
/// with trailing cuts at their final index, so repeats are legal only at
/// the boundary values.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PointerMatrix {
    pub slots: usize,
    /// Parallel to the scenario's model list.
    pub cuts: Vec<Vec<u32>>,
}

impl PointerMatrix {
    pub fn empty(n_models: usize) -> PointerMatrix {
        PointerMatrix {
            slots: 0,
            cuts: vec![Vec::new(); n_models],
        }
    }

    pub fn validate(&self, models: &[ModelGraph]) -> Result<(), DfgError> {
        if self.cuts.len() != models.len() {
            return Err(DfgError::SlotCountMismatch {
                model: "<matrix>".into(),
                got: self.cuts.len(),
                expected: models.len(),
            });
        }
        for (model, cuts) in models.iter().zip(&self.cuts) {
            let len = model.origin_len();
            if cuts.len() != self.slots {
                return Err(DfgError::SlotCountMismatch {
                    model: model.model_id.clone(),
                    got: cuts.len(),
                    expected: self.slots,
                });
            }
            let mut prev: Option<u32> = None;
            for &c in cuts {
                if c > len {
                    return Err(DfgError::CutOutOfRange {
                        model: model.model_id.clone(),
                        pos: c,
                        len,
                    });
                }
                if let Some(p) = prev {
                    if c < p {
                        return Err(DfgError::UnsortedPointers(model.model_id.clone()));
                    }
                    if c == p && c != 0 && c != len {
                        return Err(DfgError::DuplicateInteriorPointer {
                            model: model.model_id.clone(),
                            pos: c,
                        });
                    }
                }
                prev = Some(c);
            }
        }
        Ok(())
    }

    /// Segments for every model, one per cluster slot (`slots + 1` each).
    pub fn segments(&self, models: &[ModelGraph]) -> Vec<Vec<Segment>> {
        models
            .iter()
            .zip(&self.cuts)
            .map(|(m, cuts)| segments_by_origin(m, cuts))
            .collect()
    }

    /// Canonical text encoding used for memoization keys.
    pub fn canonical_key(&self) -> String {
        let mut s = format!("P{}:", self.slots);
        for cuts in &self.cuts {
            for (i, c) in cuts.iter().enumerate() {
                if i > 0 {
                    s.push(',');
                }
                s.push_str(&c.to_string());
            }
            s.push(';');
        }
        s
    }
}

/// Render the cluster assignment the way worked examples show it: one line
/// per cluster, one bracketed operator list per model, `[none]` for empty
/// segments.
pub fn cluster_listing(models: &[ModelGraph], pointers: &PointerMatrix) -> String {
    let per_model = pointers.segments(models);
    let mut out = String::new();
    for cluster in 0..=pointers.slots {
        let mut parts = Vec::with_capacity(models.len());
        for segs in &per_model {
            let ids = &segs[cluster].operator_ids;
            if ids.is_empty() {
                parts.push("[none]".to_string());
            } else {
                parts.push(format!("[{}]", ids.join(",")));
            }
        }
        out.push_str(&parts.join(" + "));
        out.push('\n');
    }
    out
}

/// Cost policy for the split/concat nodes a decomposition inserts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkOverhead {
    pub occupancy: ResourceVector,
    pub duration_cycles: u64,
}

impl Default for ChunkOverhead {
    fn default() -> Self {
        ChunkOverhead {
            occupancy: ResourceVector::sm_only(crate::fixed::Frac::from_f64(0.02)),
            duration_cycles: 1,
        }
    }
}

/// Rewrite every masked operator `O` with chunk list `[B1..Bj]` into a
/// split node, `j` sibling copies with the chunk batches, and a concat
/// node. The block occupies `O`'s original position (all nodes keep `O`'s
/// `origin`), so pointer cuts counted over pre-decomposition indices are
/// unaffected.
pub fn apply_decomposition(
    model: &ModelGraph,
    plan: &DecompositionPlan,
    _overhead: &ChunkOverhead,
) -> Result<ModelGraph, DfgError> {
    for op in &model.operators {
        if let Some(chunks) = plan.chunks_for(&op.id) {
            if chunks.is_empty() {
                return Err(DfgError::MaskedOperatorMissingChunks(op.id.clone()));
            }
            let sum: u32 = chunks.iter().sum();
            if sum != op.batch || chunks.iter().any(|&b| b == 0) {
                return Err(DfgError::ChunkSumMismatch {
                    op: op.id.clone(),
                    sum,
                    batch: op.batch,
                });
            }
        }
    }

    // Successors of a rewritten operator must re-point at its concat node.
    let mut rename: HashMap<&str, String> = HashMap::new();
    for op in &model.operators {
        if plan.chunks_for(&op.id).is_some() {
            rename.insert(op.id.as_str(), format!("{}.cat", op.id));
        }
    }

    let mut operators: Vec<OperatorSpec> = Vec::with_capacity(model.operators.len());
    let mut edges = Vec::new();
    for op in &model.operators {
        let preds: Vec<String> = op
            .predecessors
            .iter()
            .map(|p| rename.get(p.as_str()).cloned().unwrap_or_else(|| p.clone()))
            .collect();
        match plan.chunks_for(&op.id) {
            None => {
                let mut kept = op.clone();
                kept.predecessors = preds;
                operators.push(kept);
            }
            Some(chunks) => {
                let split_id = format!("{}.split", op.id);
                let cat_id = rename[op.id.as_str()].clone();
                operators.push(OperatorSpec {
                    id: split_id.clone(),
                    model_id: op.model_id.clone(),
                    index: 0,
                    origin: op.origin,
                    kind: "chunk".into(),
                    shape_key: op.shape_key.clone(),
                    batch: op.batch,
                    predecessors: preds,
                    role: NodeRole::ChunkSplit,
                    chunk: 0,
                });
                let mut sibling_ids = Vec::with_capacity(chunks.len());
                for (i, &b) in chunks.iter().enumerate() {
                    let sib_id = format!("{}.c{}", op.id, i + 1);
                    operators.push(OperatorSpec {
                        id: sib_id.clone(),
                        model_id: op.model_id.clone(),
                        index: 0,
                        origin: op.origin,
                        kind: op.kind.clone(),
                        shape_key: op.shape_key.clone(),
                        batch: b,
                        predecessors: vec![split_id.clone()],
                        role: NodeRole::Compute,
                        chunk: (i + 1) as u32,
                    });
                    sibling_ids.push(sib_id);
                }
                operators.push(OperatorSpec {
                    id: cat_id,
                    model_id: op.model_id.clone(),
                    index: 0,
                    origin: op.origin,
                    kind: "concat".into(),
                    shape_key: op.shape_key.clone(),
                    batch: op.batch,
                    predecessors: sibling_ids,
                    role: NodeRole::ChunkConcat,
                    chunk: 0,
                });
            }
        }
    }
    for (i, op) in operators.iter_mut().enumerate() {
        op.index = (i + 1) as u32;
    }
    for op in &operators {
        for p in &op.predecessors {
            edges.push((p.clone(), op.id.clone()));
        }
    }
    Ok(ModelGraph {
        model_id: model.model_id.clone(),
        operators,
        edges,
    })
}

/// Apply a plan to every model of a scenario.
pub fn apply_decomposition_all(
    models: &[ModelGraph],
    plan: &DecompositionPlan,
    overhead: &ChunkOverhead,
) -> Result<Vec<ModelGraph>, DfgError> {
    models
        .iter()
        .map(|m| apply_decomposition(m, plan, overhead))
        .collect()
}

/// External dependency fingerprint of a graph: edges collapsed onto the
/// pre-decomposition positions, self-loops inside a block removed.
pub fn origin_edge_set(model: &ModelGraph) -> HashSet<(u32, u32)> {
    let origin_of: HashMap<&str, u32> = model
        .operators
        .iter()
        .map(|op| (op.id.as_str(), op.origin))
        .collect();
    model
        .edges
        .iter()
        .filter_map(|(a, b)| {
            let (oa, ob) = (origin_of.get(a.as_str())?, origin_of.get(b.as_str())?);
            (oa != ob).then_some((*oa, *ob))
        })
        .collect()
}

/// Issue-order sanity used by tests and loaders: every predecessor appears
/// earlier in the operator list.
pub fn issue_order_is_topological(model: &ModelGraph) -> bool {
    let mut seen: HashSet<&str> = HashSet::new();
    for op in &model.operators {
        if !op.predecessors.iter().all(|p| seen.contains(p.as_str())) {
            return false;
        }
        seen.insert(op.id.as_str());
    }
    true
}

/// Breadth-first reachability over successors, used by validation helpers.
#[allow(dead_code)]
pub(crate) fn reachable_from(model: &ModelGraph, start: &str) -> HashSet<String> {
    let mut succs: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (a, b) in &model.edges {
        succs.entry(a.as_str()).or_default().push(b.as_str());
    }
    let mut seen = HashSet::new();
    let mut queue = VecDeque::from([start.to_string()]);
    while let Some(cur) = queue.pop_front() {
        if let Some(next) = succs.get(cur.as_str()) {
            for n in next {
                if seen.insert(n.to_string()) {
                    queue.push_back(n.to_string());
                }
            }
        }
    }
    seen
}
