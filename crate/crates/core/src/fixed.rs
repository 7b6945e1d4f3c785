//! Fixed-point fractions of the accelerator capacity.
//!
//! Occupancies, capacities and residues are stored in integer units of
//! 1/10000 so that per-cycle sums, conservation checks and objective
//! comparisons are exact. Floats only appear at the file-format boundary.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Integer units per 1.0 of capacity.
pub const SCALE: u32 = 10_000;

/// A fraction of capacity in units of 1/10000.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Frac(pub u32);

impl Frac {
    pub const ZERO: Frac = Frac(0);
    pub const ONE: Frac = Frac(SCALE);

    /// Round a float to the nearest unit. Intended for generator code;
    /// file parsing goes through [`Frac::parse_decimal`] instead.
    pub fn from_f64(v: f64) -> Frac {
        Frac((v * f64::from(SCALE)).round().max(0.0) as u32)
    }

    pub fn to_f64(self) -> f64 {
        f64::from(self.0) / f64::from(SCALE)
    }

    pub fn units(self) -> u32 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn saturating_sub(self, rhs: Frac) -> Frac {
        Frac(self.0.saturating_sub(rhs.0))
    }

    pub fn checked_add(self, rhs: Frac) -> Option<Frac> {
        self.0.checked_add(rhs.0).map(Frac)
    }

    /// Exact decimal parse ("0.55" -> 5500 units). Accepts at most four
    /// fractional digits; a fifth digit rounds half-up. Avoids binary
    /// float round-trips so saved profiles reload bit-identically.
    pub fn parse_decimal(s: &str) -> Option<Frac> {
        let s = s.trim();
        if s.is_empty() || s.starts_with('-') {
            return None;
        }
        let (int_part, frac_part) = match s.split_once('.') {
            Some((i, f)) => (i, f),
            None => (s, ""),
        };
        let int: u32 = if int_part.is_empty() {
            0
        } else {
            int_part.parse().ok()?
        };
        if !frac_part.chars().all(|c| c.is_ascii_digit()) {
            return None;
        }
        let mut units = int.checked_mul(SCALE)?;
        let mut place = SCALE / 10;
        let mut digits = frac_part.chars();
        for _ in 0..4 {
            match digits.next() {
                Some(c) => {
                    units = units.checked_add(c.to_digit(10)? * place)?;
                    place /= 10;
                }
                None => break,
            }
        }
        if let Some(c) = digits.next() {
            if c.to_digit(10)? >= 5 {
                units = units.checked_add(1)?;
            }
        }
        Some(Frac(units))
    }

    /// Shortest decimal representation, e.g. 5500 -> "0.55", 10000 -> "1".
    pub fn format_decimal(self) -> String {
        let int = self.0 / SCALE;
        let frac = self.0 % SCALE;
        if frac == 0 {
            return int.to_string();
        }
        let mut s = format!("{int}.{frac:04}");
        while s.ends_with('0') {
            s.pop();
        }
        s
    }
}

impl fmt::Display for Frac {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.format_decimal())
    }
}

/// Linear interpolation between two fixed-point values at integer abscissae,
/// rounded to the nearest unit (ties away from zero).
pub fn lerp(lo: Frac, hi: Frac, x_lo: u32, x_hi: u32, x: u32) -> Frac {
    debug_assert!(x_lo < x_hi && x_lo <= x && x <= x_hi);
    let span = i64::from(x_hi) - i64::from(x_lo);
    let delta = i64::from(hi.0) - i64::from(lo.0);
    let num = delta * (i64::from(x) - i64::from(x_lo));
    let rounded = if num >= 0 {
        (2 * num + span) / (2 * span)
    } else {
        (2 * num - span) / (2 * span)
    };
    Frac((i64::from(lo.0) + rounded) as u32)
}

/// `value * num / den` rounded to the nearest unit.
pub fn scale_ratio(value: Frac, num: u32, den: u32) -> Frac {
    debug_assert!(den > 0);
    let n = u64::from(value.0) * u64::from(num);
    Frac(((2 * n + u64::from(den)) / (2 * u64::from(den))) as u32)
}

/// `value * num / den` rounded up, for integer cycle counts.
pub fn ceil_ratio(value: u64, num: u64, den: u64) -> u64 {
    debug_assert!(den > 0);
    (value * num).div_ceil(den)
}

/// Occupancy or capacity over the tracked resource dimensions: the
/// compute-unit pool plus an optional memory-bandwidth dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ResourceVector {
    pub sm: Frac,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bw: Option<Frac>,
}

impl ResourceVector {
    pub fn sm_only(sm: Frac) -> ResourceVector {
        ResourceVector { sm, bw: None }
    }

    pub fn within_unit(&self) -> bool {
        self.sm <= Frac::ONE && self.bw.map_or(true, |b| b <= Frac::ONE)
    }
}

/// Weights collapsing the per-dimension residue into a scalar objective.
/// Default charges the compute dimension only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceWeights {
    pub sm: Frac,
    pub bw: Frac,
}

impl Default for ResourceWeights {
    fn default() -> Self {
        ResourceWeights {
            sm: Frac::ONE,
            bw: Frac::ZERO,
        }
    }
}

impl ResourceWeights {
    pub fn is_valid(&self) -> bool {
        !(self.sm.is_zero() && self.bw.is_zero())
    }

    /// Weighted scalar of a residue vector, in units of 1/SCALE^2.
    pub fn weighted(&self, sm: Frac, bw: Option<Frac>) -> u64 {
        let mut total = u64::from(self.sm.0) * u64::from(sm.0);
        if let Some(b) = bw {
            total += u64::from(self.bw.0) * u64::from(b.0);
        }
        total
    }
}

/// Render a weighted objective value (units of 1/SCALE^2) as a decimal.
pub fn weighted_to_decimal(v: u64) -> String {
    let scale2 = u64::from(SCALE) * u64::from(SCALE);
    let int = v / scale2;
    let frac = v % scale2;
    if frac == 0 {
        return int.to_string();
    }
    let mut s = format!("{int}.{frac:08}");
    while s.ends_with('0') {
        s.pop();
    }
    s
}
