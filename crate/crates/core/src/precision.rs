//! Storage and compute number formats.
//!
//! Every precision mode pairs a storage format (what lives in the population
//! planes) with a compute format (what the per-cell update runs in):
//!
//! | mode   | storage | compute |
//! |--------|---------|---------|
//! | Single | f32     | f32     |
//! | Double | f64     | f64     |
//! | Mixed1 | f16     | f32     |
//! | Mixed2 | f32     | f64     |

use std::fmt;
use std::ops::{Add, Div, Mul, Sub};
use std::str::FromStr;

use half::f16;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Arithmetic used by the per-cell kernel math.
///
/// Deliberately smaller than a full float trait: only the four operations the
/// collision touches, so that a counting wrapper can shadow the kernel.
pub trait Real:
    Copy
    + Send
    + Sync
    + PartialOrd
    + fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + 'static
{
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }

    fn is_finite(self) -> bool {
        self.to_f64().is_finite()
    }
}

impl Real for f32 {
    #[inline(always)]
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    #[inline(always)]
    fn to_f64(self) -> f64 {
        self as f64
    }
    #[inline(always)]
    fn is_finite(self) -> bool {
        f32::is_finite(self)
    }
}

impl Real for f64 {
    #[inline(always)]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline(always)]
    fn to_f64(self) -> f64 {
        self
    }
    #[inline(always)]
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
}

/// A storage format that widens into / narrows from the compute format `C`.
pub trait Stored<C: Real>: Copy + Send + Sync + 'static {
    fn load(self) -> C;
    fn store(v: C) -> Self;
}

impl Stored<f32> for f32 {
    #[inline(always)]
    fn load(self) -> f32 {
        self
    }
    #[inline(always)]
    fn store(v: f32) -> Self {
        v
    }
}

impl Stored<f64> for f64 {
    #[inline(always)]
    fn load(self) -> f64 {
        self
    }
    #[inline(always)]
    fn store(v: f64) -> Self {
        v
    }
}

impl Stored<f32> for f16 {
    #[inline(always)]
    fn load(self) -> f32 {
        self.to_f32()
    }
    #[inline(always)]
    fn store(v: f32) -> Self {
        // IEEE binary16, round to nearest even.
        f16::from_f32(v)
    }
}

impl Stored<f64> for f32 {
    #[inline(always)]
    fn load(self) -> f64 {
        self as f64
    }
    #[inline(always)]
    fn store(v: f64) -> Self {
        v as f32
    }
}

/// Width of a stored population value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StoragePrecision {
    Half,
    Single,
    Double,
}

impl StoragePrecision {
    pub fn bytes(self) -> usize {
        match self {
            StoragePrecision::Half => 2,
            StoragePrecision::Single => 4,
            StoragePrecision::Double => 8,
        }
    }
}

/// Width of the arithmetic inside the kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ComputePrecision {
    Single,
    Double,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrecisionMode {
    #[default]
    Single,
    Double,
    Mixed1,
    Mixed2,
}

impl PrecisionMode {
    pub const ALL: [PrecisionMode; 4] = [
        PrecisionMode::Single,
        PrecisionMode::Double,
        PrecisionMode::Mixed1,
        PrecisionMode::Mixed2,
    ];

    pub fn storage(self) -> StoragePrecision {
        match self {
            PrecisionMode::Single | PrecisionMode::Mixed2 => StoragePrecision::Single,
            PrecisionMode::Double => StoragePrecision::Double,
            PrecisionMode::Mixed1 => StoragePrecision::Half,
        }
    }

    pub fn compute(self) -> ComputePrecision {
        match self {
            PrecisionMode::Single | PrecisionMode::Mixed1 => ComputePrecision::Single,
            PrecisionMode::Double | PrecisionMode::Mixed2 => ComputePrecision::Double,
        }
    }

    /// Code used in checkpoint headers.
    pub fn code(self) -> u8 {
        match self {
            PrecisionMode::Single => 0,
            PrecisionMode::Double => 1,
            PrecisionMode::Mixed1 => 2,
            PrecisionMode::Mixed2 => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.code() == code)
    }

    pub fn name(self) -> &'static str {
        match self {
            PrecisionMode::Single => "single",
            PrecisionMode::Double => "double",
            PrecisionMode::Mixed1 => "mixed1",
            PrecisionMode::Mixed2 => "mixed2",
        }
    }
}

impl fmt::Display for PrecisionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PrecisionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::config(format!(
                    "unknown precision '{s}' (expected single, double, mixed1 or mixed2)"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Narrow a compute value into the storage format.
    Store,
    /// Widen a stored value into the compute format.
    Compute,
}

/// Behaviour when a value does not fit the half-precision range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OverflowPolicy {
    #[default]
    Strict,
    /// Clamp to the largest finite value of the target format.
    Permissive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Converted {
    pub value: f64,
    pub clamped: bool,
}

/// Converts a scalar between the storage and compute formats of `mode`,
/// returning the result widened to `f64`.
pub fn convert_precision(
    value: f64,
    mode: PrecisionMode,
    direction: Direction,
    policy: OverflowPolicy,
) -> Result<Converted> {
    let (target, max, name) = match direction {
        Direction::Store => match mode.storage() {
            StoragePrecision::Half => (StoragePrecision::Half, f16::MAX.to_f64(), "half"),
            StoragePrecision::Single => (StoragePrecision::Single, f32::MAX as f64, "single"),
            StoragePrecision::Double => (StoragePrecision::Double, f64::MAX, "double"),
        },
        Direction::Compute => match mode.compute() {
            ComputePrecision::Single => (StoragePrecision::Single, f32::MAX as f64, "single"),
            ComputePrecision::Double => (StoragePrecision::Double, f64::MAX, "double"),
        },
    };
    let round = |v: f64| match target {
        StoragePrecision::Half => f16::from_f64(v).to_f64(),
        StoragePrecision::Single => v as f32 as f64,
        StoragePrecision::Double => v,
    };
    if value.is_nan() {
        return Err(Error::NonFinitePopulation);
    }
    let rounded = round(value);
    if rounded.is_finite() {
        return Ok(Converted {
            value: rounded,
            clamped: false,
        });
    }
    match policy {
        OverflowPolicy::Strict => Err(Error::Overflow {
            value,
            target: name,
        }),
        OverflowPolicy::Permissive => Ok(Converted {
            value: max.copysign(value),
            clamped: true,
        }),
    }
}
