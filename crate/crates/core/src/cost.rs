//! Profiled operator costs: a lookup table mapping (kind, shape, batch)
//! to resource occupancy and duration, with linear interpolation between
//! profiled batch sizes.

use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fixed::{ceil_ratio, lerp, scale_ratio, Frac, ResourceVector};

/// One profiled row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostEntry {
    pub kind: String,
    pub shape_key: String,
    pub batch: u32,
    pub occupancy: ResourceVector,
    pub duration_cycles: u64,
}

#[derive(Debug, Error)]
pub enum CostError {
    #[error("profile parse error at line {line}: {msg}")]
    ParseError { line: usize, msg: String },
    #[error("duplicate profile key ({kind}, {shape_key}, {batch})")]
    DuplicateKey {
        kind: String,
        shape_key: String,
        batch: u32,
    },
    #[error("occupancy out of [0,1] for ({kind}, {shape_key}, {batch})")]
    OutOfRangeOccupancy {
        kind: String,
        shape_key: String,
        batch: u32,
    },
    #[error("no profile rows for operator class ({kind}, {shape_key})")]
    UnknownOperatorClass { kind: String, shape_key: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The profiled lookup table. Rows are kept sorted by (kind, shape_key,
/// batch) so lookups are binary searches and saved files are canonical.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CostModel {
    rows: Vec<CostEntry>,
}

/// Result of loading a profile: the table plus validation diagnostics.
#[derive(Debug)]
pub struct ProfileLoad {
    pub model: CostModel,
    pub rows: usize,
    pub warnings: Vec<String>,
}

impl CostModel {
    pub fn from_rows(mut rows: Vec<CostEntry>) -> Result<(CostModel, Vec<String>), CostError> {
        rows.sort_by(|a, b| {
            (&a.kind, &a.shape_key, a.batch).cmp(&(&b.kind, &b.shape_key, b.batch))
        });
        for w in rows.windows(2) {
            if w[0].kind == w[1].kind
                && w[0].shape_key == w[1].shape_key
                && w[0].batch == w[1].batch
            {
                return Err(CostError::DuplicateKey {
                    kind: w[1].kind.clone(),
                    shape_key: w[1].shape_key.clone(),
                    batch: w[1].batch,
                });
            }
        }
        for r in &rows {
            if !r.occupancy.within_unit() {
                return Err(CostError::OutOfRangeOccupancy {
                    kind: r.kind.clone(),
                    shape_key: r.shape_key.clone(),
                    batch: r.batch,
                });
            }
        }
        let mut warnings = Vec::new();
        for w in rows.windows(2) {
            if w[0].kind == w[1].kind
                && w[0].shape_key == w[1].shape_key
                && w[1].occupancy.sm < w[0].occupancy.sm
            {
                warnings.push(format!(
                    "occupancy not monotone for ({}, {}): batch {} has sm {} below batch {}'s {}",
                    w[1].kind,
                    w[1].shape_key,
                    w[1].batch,
                    w[1].occupancy.sm,
                    w[0].batch,
                    w[0].occupancy.sm
                ));
            }
        }
        Ok((CostModel { rows }, warnings))
    }

    pub fn rows(&self) -> &[CostEntry] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// All profiled rows for one operator class, sorted by batch.
    pub fn grid(&self, kind: &str, shape_key: &str) -> &[CostEntry] {
        let lo = self.rows.partition_point(|r| {
            (r.kind.as_str(), r.shape_key.as_str()) < (kind, shape_key)
        });
        let hi = self.rows.partition_point(|r| {
            (r.kind.as_str(), r.shape_key.as_str()) <= (kind, shape_key)
        });
        &self.rows[lo..hi]
    }

    /// Cost of an operator class at a batch size. Exact rows are returned
    /// verbatim; batches between profiled points interpolate linearly
    /// (duration rounds up); below the smallest point the smallest row is
    /// scaled linearly in batch; above the largest the largest row applies.
    pub fn lookup(&self, kind: &str, shape_key: &str, batch: u32) -> Result<CostEntry, CostError> {
        let grid = self.grid(kind, shape_key);
        if grid.is_empty() {
            return Err(CostError::UnknownOperatorClass {
                kind: kind.to_string(),
                shape_key: shape_key.to_string(),
            });
        }
        let pos = grid.partition_point(|r| r.batch < batch);
        if pos < grid.len() && grid[pos].batch == batch {
            return Ok(grid[pos].clone());
        }
        let entry = if pos == 0 {
            let first = &grid[0];
            CostEntry {
                batch,
                occupancy: ResourceVector {
                    sm: scale_ratio(first.occupancy.sm, batch, first.batch),
                    bw: first
                        .occupancy
                        .bw
                        .map(|b| scale_ratio(b, batch, first.batch)),
                },
                duration_cycles: ceil_ratio(
                    first.duration_cycles,
                    u64::from(batch),
                    u64::from(first.batch),
                )
                .max(1),
                kind: first.kind.clone(),
                shape_key: first.shape_key.clone(),
            }
        } else if pos == grid.len() {
            let last = &grid[grid.len() - 1];
            CostEntry {
                batch,
                ..last.clone()
            }
        } else {
            let (lo, hi) = (&grid[pos - 1], &grid[pos]);
            let sm = lerp(lo.occupancy.sm, hi.occupancy.sm, lo.batch, hi.batch, batch)
                .min(Frac::ONE);
            let bw = match (lo.occupancy.bw, hi.occupancy.bw) {
                (Some(a), Some(b)) => Some(lerp(a, b, lo.batch, hi.batch, batch).min(Frac::ONE)),
                _ => None,
            };
            let span = i128::from(hi.batch - lo.batch);
            let num = i128::from(lo.duration_cycles) * span
                + (i128::from(hi.duration_cycles) - i128::from(lo.duration_cycles))
                    * i128::from(batch - lo.batch);
            debug_assert!(num > 0);
            let duration = (num as u128).div_ceil(span as u128) as u64;
            CostEntry {
                kind: lo.kind.clone(),
                shape_key: lo.shape_key.clone(),
                batch,
                occupancy: ResourceVector { sm, bw },
                duration_cycles: duration.max(1),
            }
        };
        Ok(entry)
    }
}

const CSV_HEADER: &str = "kind,shape_key,batch,sm,bw,duration_cycles";

/// Load a profile from CSV or a JSON array (chosen by file extension).
pub fn load_profile(path: &Path) -> Result<ProfileLoad, CostError> {
    let text = std::fs::read_to_string(path)?;
    let rows = if path.extension().is_some_and(|e| e == "json") {
        parse_profile_json(&text)?
    } else {
        parse_profile_csv(&text)?
    };
    let count = rows.len();
    let (model, warnings) = CostModel::from_rows(rows)?;
    Ok(ProfileLoad {
        model,
        rows: count,
        warnings,
    })
}

pub fn parse_profile_csv(text: &str) -> Result<Vec<CostEntry>, CostError> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.is_empty() || (i == 0 && line == CSV_HEADER) {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let err = |msg: &str| CostError::ParseError {
            line: i + 1,
            msg: msg.to_string(),
        };
        if fields.len() != 6 {
            return Err(err("expected 6 comma-separated fields"));
        }
        let batch: u32 = fields[2].trim().parse().map_err(|_| err("bad batch"))?;
        if batch == 0 {
            return Err(err("batch must be at least 1"));
        }
        let sm = Frac::parse_decimal(fields[3]).ok_or_else(|| err("bad sm fraction"))?;
        let bw = match fields[4].trim() {
            "" => None,
            s => Some(Frac::parse_decimal(s).ok_or_else(|| err("bad bw fraction"))?),
        };
        let duration: u64 = fields[5].trim().parse().map_err(|_| err("bad duration"))?;
        if duration == 0 {
            return Err(err("duration_cycles must be at least 1"));
        }
        rows.push(CostEntry {
            kind: fields[0].trim().to_string(),
            shape_key: fields[1].trim().to_string(),
            batch,
            occupancy: ResourceVector { sm, bw },
            duration_cycles: duration,
        });
    }
    Ok(rows)
}

fn parse_profile_json(text: &str) -> Result<Vec<CostEntry>, CostError> {
    #[derive(Deserialize)]
    struct JsonRow {
        kind: String,
        shape_key: String,
        batch: u32,
        sm: f64,
        #[serde(default)]
        bw: Option<f64>,
        duration_cycles: u64,
    }
    let raw: Vec<JsonRow> = serde_json::from_str(text).map_err(|e| CostError::ParseError {
        line: e.line(),
        msg: e.to_string(),
    })?;
    raw.into_iter()
        .map(|r| {
            if r.duration_cycles == 0 || r.batch == 0 {
                return Err(CostError::ParseError {
                    line: 0,
                    msg: format!("batch/duration must be positive for {}", r.kind),
                });
            }
            Ok(CostEntry {
                kind: r.kind,
                shape_key: r.shape_key,
                batch: r.batch,
                occupancy: ResourceVector {
                    sm: Frac::from_f64(r.sm),
                    bw: r.bw.map(Frac::from_f64),
                },
                duration_cycles: r.duration_cycles,
            })
        })
        .collect()
}

/// Canonical CSV writer; `load_profile(save_profile(m)) == m` bit for bit.
pub fn profile_to_csv(model: &CostModel) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in model.rows() {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.kind,
            r.shape_key,
            r.batch,
            r.occupancy.sm.format_decimal(),
            r.occupancy.bw.map(|b| b.format_decimal()).unwrap_or_default(),
            r.duration_cycles
        ));
    }
    out
}

pub fn save_profile(model: &CostModel, path: &Path) -> Result<(), CostError> {
    std::fs::write(path, profile_to_csv(model))?;
    Ok(())
}

/// Occupancy growth shapes available to the generator. All are exactly
/// computable (sqrt is correctly rounded in IEEE 754), so generation is
/// reproducible across platforms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OccupancyCurve {
    /// occ(b) = occ_max * b / b_max
    Linear,
    /// occ(b) = occ_max * sqrt(b / b_max)
    Sqrt,
    /// occ(b) = occ_max * (b / b_max)^(3/4)
    ThreeQuarter,
}

impl OccupancyCurve {
    fn apply(self, occ_max: Frac, batch: u32, batch_max: u32) -> Frac {
        let ratio = f64::from(batch) / f64::from(batch_max);
        let factor = match self {
            OccupancyCurve::Linear => ratio,
            OccupancyCurve::Sqrt => ratio.sqrt(),
            OccupancyCurve::ThreeQuarter => (ratio * ratio.sqrt()).sqrt(),
        };
        Frac::from_f64(occ_max.to_f64() * factor).min(Frac::ONE)
    }
}

/// One operator class the generator should emit rows for.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassSpec {
    pub kind: String,
    pub shape_key: String,
}

/// Generator parameters: classes, the batch grid, occupancy/duration
/// ranges at the largest batch, and bandwidth emission.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthParams {
    pub classes: Vec<ClassSpec>,
    pub batch_grid: Vec<u32>,
    /// occupancy at the largest batch is drawn from this range in steps
    /// of 0.05
    pub occ_max_range: (Frac, Frac),
    /// duration at the largest batch is drawn from this inclusive range
    pub dur_max_range: (u64, u64),
    pub emit_bw: bool,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            classes: vec![
                ClassSpec { kind: "conv3x3".into(), shape_key: "224x224x64".into() },
                ClassSpec { kind: "conv1x1".into(), shape_key: "56x56x256".into() },
                ClassSpec { kind: "batchnorm".into(), shape_key: "224x224x64".into() },
                ClassSpec { kind: "relu".into(), shape_key: "224x224x64".into() },
                ClassSpec { kind: "matmul".into(), shape_key: "1024x1024".into() },
                ClassSpec { kind: "lstm-cell".into(), shape_key: "h512".into() },
                ClassSpec { kind: "attention".into(), shape_key: "l128h8".into() },
            ],
            batch_grid: vec![4, 8, 16, 32],
            occ_max_range: (Frac::from_f64(0.3), Frac::from_f64(0.95)),
            dur_max_range: (2, 6),
            emit_bw: false,
        }
    }
}

/// Deterministic synthetic profile: same params and seed give the same
/// table, different seeds reshuffle the per-class constants.
pub fn synth_profile(params: &SynthParams, seed: u64) -> CostModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut grid: Vec<u32> = params.batch_grid.clone();
    grid.sort_unstable();
    grid.dedup();
    let batch_max = grid.last().copied().unwrap_or(1);
    let steps = {
        let lo = params.occ_max_range.0.units() / 500;
        let hi = params.occ_max_range.1.units() / 500;
        (lo, hi.max(lo))
    };
    let mut rows = Vec::new();
    for class in &params.classes {
        let occ_max = Frac(rng.gen_range(steps.0..=steps.1) * 500);
        let curve = match rng.gen_range(0..3u8) {
            0 => OccupancyCurve::Linear,
            1 => OccupancyCurve::Sqrt,
            _ => OccupancyCurve::ThreeQuarter,
        };
        let dur_max = rng.gen_range(params.dur_max_range.0..=params.dur_max_range.1);
        let bw_scale = if params.emit_bw {
            Some(Frac(rng.gen_range(2..=8u32) * 1000))
        } else {
            None
        };
        for &b in &grid {
            let sm = curve.apply(occ_max, b, batch_max);
            let bw = bw_scale.map(|s| {
                Frac((u64::from(s.units()) * u64::from(sm.units()) / 10_000) as u32)
            });
            rows.push(CostEntry {
                kind: class.kind.clone(),
                shape_key: class.shape_key.clone(),
                batch: b,
                occupancy: ResourceVector { sm, bw },
                duration_cycles: ceil_ratio(dur_max, u64::from(b), u64::from(batch_max)).max(1),
            });
        }
    }
    let (model, warnings) = CostModel::from_rows(rows).expect("generated rows are in range");
    debug_assert!(warnings.is_empty(), "generated curves are monotone");
    model
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(kind: &str, batch: u32, sm: f64, dur: u64) -> CostEntry {
        CostEntry {
            kind: kind.into(),
            shape_key: "s".into(),
            batch,
            occupancy: ResourceVector::sm_only(Frac::from_f64(sm)),
            duration_cycles: dur,
        }
    }

    #[test]
    fn exact_lookup_returns_row_verbatim() {
        let (m, _) = CostModel::from_rows(vec![entry("conv", 8, 0.4, 3)]).unwrap();
        let e = m.lookup("conv", "s", 8).unwrap();
        assert_eq!(e, entry("conv", 8, 0.4, 3));
    }

    #[test]
    fn midpoint_interpolation() {
        let (m, _) =
            CostModel::from_rows(vec![entry("conv", 8, 0.4, 2), entry("conv", 16, 0.6, 4)])
                .unwrap();
        let e = m.lookup("conv", "s", 12).unwrap();
        assert_eq!(e.occupancy.sm, Frac::from_f64(0.5));
        assert_eq!(e.duration_cycles, 3);
    }

    #[test]
    fn below_grid_scales_linearly() {
        let (m, _) = CostModel::from_rows(vec![entry("conv", 8, 0.4, 4)]).unwrap();
        let e = m.lookup("conv", "s", 2).unwrap();
        assert_eq!(e.occupancy.sm, Frac::from_f64(0.1));
        assert_eq!(e.duration_cycles, 1);
    }

    #[test]
    fn above_grid_clamps() {
        let (m, _) = CostModel::from_rows(vec![entry("conv", 8, 0.4, 4)]).unwrap();
        let e = m.lookup("conv", "s", 64).unwrap();
        assert_eq!(e.occupancy.sm, Frac::from_f64(0.4));
        assert_eq!(e.duration_cycles, 4);
    }

    #[test]
    fn unknown_class_errors() {
        let m = CostModel::default();
        assert!(matches!(
            m.lookup("ghost", "s", 1),
            Err(CostError::UnknownOperatorClass { .. })
        ));
    }

    #[test]
    fn duplicate_key_rejected() {
        let err = CostModel::from_rows(vec![entry("conv", 8, 0.4, 1), entry("conv", 8, 0.5, 1)]);
        assert!(matches!(err, Err(CostError::DuplicateKey { .. })));
    }

    #[test]
    fn out_of_range_occupancy_rejected() {
        let err = CostModel::from_rows(vec![entry("conv", 8, 1.2, 1)]);
        assert!(matches!(err, Err(CostError::OutOfRangeOccupancy { .. })));
    }

    #[test]
    fn monotonicity_violation_warns_but_loads() {
        let (m, warnings) =
            CostModel::from_rows(vec![entry("conv", 8, 0.6, 1), entry("conv", 16, 0.4, 1)])
                .unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(warnings.len(), 1);
    }

    #[test]
    fn csv_round_trip_is_bit_identical() {
        let m = synth_profile(&SynthParams::default(), 7);
        let text = profile_to_csv(&m);
        let reparsed = parse_profile_csv(&text).unwrap();
        let (m2, _) = CostModel::from_rows(reparsed).unwrap();
        assert_eq!(m, m2);
        assert_eq!(profile_to_csv(&m2), text);
    }

    #[test]
    fn empty_profile_loads_with_zero_rows() {
        let rows = parse_profile_csv("").unwrap();
        assert!(rows.is_empty());
        let (m, _) = CostModel::from_rows(rows).unwrap();
        assert!(m.lookup("conv", "s", 1).is_err());
    }

    #[test]
    fn synth_is_seed_deterministic_and_seed_sensitive() {
        let p = SynthParams::default();
        let a = synth_profile(&p, 1);
        let b = synth_profile(&p, 1);
        let c = synth_profile(&p, 2);
        assert_eq!(a, b);
        assert_ne!(a, c);
        let keys = |m: &CostModel| {
            m.rows()
                .iter()
                .map(|r| (r.kind.clone(), r.shape_key.clone(), r.batch))
                .collect::<Vec<_>>()
        };
        assert_eq!(keys(&a), keys(&c));
    }

    #[test]
    fn synth_three_classes_four_batches_is_twelve_rows() {
        let p = SynthParams {
            classes: SynthParams::default().classes[..3].to_vec(),
            ..SynthParams::default()
        };
        let m = synth_profile(&p, 1);
        assert_eq!(m.len(), 12);
    }

    #[test]
    fn synth_curves_pass_monotonicity() {
        for seed in 0..20 {
            let m = synth_profile(&SynthParams::default(), seed);
            let (_, warnings) = CostModel::from_rows(m.rows().to_vec()).unwrap();
            assert!(warnings.is_empty(), "seed {seed}: {warnings:?}");
        }
    }

    #[test]
    fn interpolated_occupancy_between_brackets() {
        let (m, _) =
            CostModel::from_rows(vec![entry("conv", 8, 0.15, 2), entry("conv", 32, 0.55, 5)])
                .unwrap();
        for b in 9..32 {
            let e = m.lookup("conv", "s", b).unwrap();
            assert!(e.occupancy.sm >= Frac::from_f64(0.15));
            assert!(e.occupancy.sm <= Frac::from_f64(0.55));
            assert!(e.duration_cycles >= 1);
        }
    }
}
