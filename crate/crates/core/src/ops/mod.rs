//! Arithmetic and CNN operations on the associative processor.
//!
//! Every operation exists twice: a functional schedule that runs LUT passes
//! on a [`CamArray`](crate::cam::CamArray) and reports the resulting
//! [`EventTrace`], and a closed-form cycle count used by the cost model.
//! The two agree stage for stage.
//!
//! Row layouts, with fields listed in column order:
//!
//! | op | row contents |
//! |----|--------------|
//! | add | `A[M] B[M] carry` |
//! | multiply | `A[M] B[M] C[2M]` |
//! | reduce, avg pool | `A[W] B[W]`, `W = M + log2 L` (or `log2 S`) |
//! | matmat | `K[M] P[M] C[Wc] D[Wc]`, `Wc = 2M + ceil(log2 j)` |
//! | relu | `V[M] F` (one word per row) |
//! | max pool | `A[M] B[M] F1 F2` |
//!
//! Vertical (row-pair) variants append carry or flag rows below the data.

mod analytic;
mod exec;
mod oracle;

pub use analytic::{analytic_cycles, expected_trace, matmat_parts, ApOp, MatMatParts};
pub use exec::{avg_pool, inplace_add, matmat, max_pool, multiply, reduce, relu};
pub use oracle::{emulate_random, Emulation};

use crate::trace::EventTrace;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ApVariant {
    /// Column-pair operations only.
    #[serde(rename = "1d")]
    Ap1D,
    /// Row-pair operations, one pair at a time.
    #[serde(rename = "2d")]
    Ap2D,
    /// Row-pair operations with segmented, independent row groups.
    #[serde(rename = "2dseg")]
    Ap2DSeg,
}

impl ApVariant {
    pub const ALL: [ApVariant; 3] = [ApVariant::Ap1D, ApVariant::Ap2D, ApVariant::Ap2DSeg];

    /// Tree reductions need power-of-two operand counts.
    pub fn pads_to_pow2(self) -> bool {
        !matches!(self, ApVariant::Ap2D)
    }
}

impl fmt::Display for ApVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ApVariant::Ap1D => "1d",
            ApVariant::Ap2D => "2d",
            ApVariant::Ap2DSeg => "2dseg",
        })
    }
}

impl FromStr for ApVariant {
    type Err = crate::Error;
    fn from_str(s: &str) -> crate::Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "1d" => Ok(ApVariant::Ap1D),
            "2d" => Ok(ApVariant::Ap2D),
            "2dseg" | "2d-seg" => Ok(ApVariant::Ap2DSeg),
            _ => Err(crate::Error::Config(format!("unknown variant {s}"))),
        }
    }
}

/// Output of a functional run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OpResult {
    pub values: Vec<u64>,
    pub trace: EventTrace,
    pub analytic_cycles: u64,
}

impl OpResult {
    /// True when the emulated stage total equals the closed form.
    pub fn cycles_agree(&self) -> bool {
        self.trace.stages() == self.analytic_cycles
    }
}

pub(crate) fn log2_ceil(n: usize) -> u32 {
    if n <= 1 {
        0
    } else {
        usize::BITS - (n - 1).leading_zeros()
    }
}
