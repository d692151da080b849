//! Closed-form stage counts and expected activity.

use super::{log2_ceil, ApVariant};
use crate::error::{Error, Result};
use crate::lut::LutProgram;
use crate::trace::EventTrace;
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

/// An operation with its size parameters. `l` counts words, `s` is the
/// pooling window size and `k` the number of windows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum ApOp {
    Add { m: u32, l: usize },
    Multiply { m: u32, l: usize },
    Reduce { m: u32, l: usize },
    MatMat { m: u32, i: usize, j: usize, u: usize },
    Relu { m: u32, l: usize },
    MaxPool { m: u32, s: usize, k: usize },
    AvgPool { m: u32, s: usize, k: usize },
}

impl ApOp {
    pub fn m(&self) -> u32 {
        match *self {
            ApOp::Add { m, .. }
            | ApOp::Multiply { m, .. }
            | ApOp::Reduce { m, .. }
            | ApOp::MatMat { m, .. }
            | ApOp::Relu { m, .. }
            | ApOp::MaxPool { m, .. }
            | ApOp::AvgPool { m, .. } => m,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.m() == 0 {
            return Err(Error::Validation("bitwidth must be at least 1".into()));
        }
        match *self {
            ApOp::MatMat { i, j, u, .. } if i == 0 || j == 0 || u == 0 => {
                Err(Error::Validation("matrix dimensions must be positive".into()))
            }
            ApOp::MaxPool { s, k, .. } | ApOp::AvgPool { s, k, .. } if s < 2 || k == 0 => {
                Err(Error::Validation("pooling needs S >= 2 and K >= 1".into()))
            }
            _ => Ok(()),
        }
    }
}

fn pow2(n: usize) -> usize {
    n.max(1).next_power_of_two()
}

/// Closed-form cycle count of `op` on `variant`.
///
/// Non-power-of-two word counts, reduction depths and window sizes are
/// padded up for the tree reductions. The 2D chain reduction of a matrix
/// product does not need padding and uses `ceil(log2 j)` result bits.
pub fn analytic_cycles(op: &ApOp, variant: ApVariant) -> Result<u64> {
    op.validate()?;
    use ApVariant::*;
    let m = op.m() as u64;
    Ok(match *op {
        ApOp::Add { .. } => 2 * m + 8 * m + m + 1,
        ApOp::Multiply { .. } => 2 * m + 8 * m * m + 2 * m,
        ApOp::Relu { .. } => 4 * m + 1,
        ApOp::Reduce { l, .. } if l < 2 => 2 * m + 1,
        ApOp::Reduce { l, .. } => {
            let l = pow2(l) as u64;
            let lg = l.trailing_zeros() as u64;
            match variant {
                Ap1D => 2 * m + (1..=lg).map(|q| 8 * (m + q - 1)).sum::<u64>() + l - 1,
                Ap2D => 2 * m + 8 * m + 8 * (l / 2 - 1) + 1,
                Ap2DSeg => 2 * m + 8 * m + 8 * (lg - 1) + 1,
            }
        }
        ApOp::MatMat { i, j, u, .. } => {
            let iu = (i * u) as u64;
            let j = if variant.pads_to_pow2() { pow2(j) } else { j } as u64;
            let lg = log2_ceil(j as usize) as u64;
            let head = 2 * m + 8 * m * m;
            let tail = 2 * m + lg;
            head + tail
                + match variant {
                    Ap1D => (1..=lg).map(|q| 8 * (2 * m + q - 1)).sum::<u64>() + 2 * iu * (j - 1),
                    Ap2D => 8 * iu * (j - 1),
                    Ap2DSeg => 8 * lg,
                }
        }
        ApOp::MaxPool { s, k, .. } => {
            let s = pow2(s) as u64;
            let k = k as u64;
            let jl = s.trailing_zeros() as u64;
            match variant {
                Ap1D => 2 * m + (8 * m + 2) * jl + 2 * k * (s / 2 - 1) + m,
                Ap2D => 2 * m + (8 * m + 2) + 10 * k * (s / 2 - 1) + m,
                Ap2DSeg => 2 * m + (8 * m + 2) + (8 + 2 * k) * (jl - 1) + m,
            }
        }
        ApOp::AvgPool { s, k, .. } => {
            let s = pow2(s) as u64;
            let k = k as u64;
            let jl = s.trailing_zeros() as u64;
            match variant {
                Ap1D => 2 * m + 2 * k * (s / 2 - 1) + (1..=jl).map(|q| 8 * (m + q - 1)).sum::<u64>() + m,
                Ap2D => 2 * m + 8 * m + 8 * k * (s / 2 - 1) + m,
                Ap2DSeg => 2 * m + 8 * m + 8 * (jl - 1) + m,
            }
        }
    })
}

struct Rates {
    add: f64,
    mul: f64,
    max: f64,
    relu: f64,
}

/// Expected cells written per LUT application under uniform operand bits.
fn rates() -> &'static Rates {
    static R: OnceLock<Rates> = OnceLock::new();
    R.get_or_init(|| Rates {
        add: LutProgram::full_adder().expected_writes(0),
        mul: LutProgram::full_adder().expected_writes(1),
        max: LutProgram::max_pool().expected_writes(0),
        relu: LutProgram::relu().expected_writes(0),
    })
}

fn n_times(t: EventTrace, n: u64) -> EventTrace {
    t.times(n)
}

fn col_writes(n: u64, rows: f64) -> EventTrace {
    n_times(EventTrace::write(rows), n)
}

fn col_reads(n: u64, rows: f64) -> EventTrace {
    n_times(EventTrace::read(rows), n)
}

/// `passes` compare/write pairs over `cols` key columns on `rows` rows.
fn lut_passes(passes: u64, cols: f64, rows: f64, written: f64) -> EventTrace {
    EventTrace {
        n_compare: passes,
        n_write: passes,
        active_cells_compared: passes as f64 * cols * rows,
        cells_written: written,
        ..Default::default()
    }
}

/// In-place horizontal addition of `width`-bit fields on `rows` rows.
pub(crate) fn horizontal_add(width: u64, rows: f64) -> EventTrace {
    lut_passes(4 * width, 3.0, rows, width as f64 * rates().add * rows)
}

/// The shift-and-add multiply core on `rows` rows, without population or readout.
pub(crate) fn multiply_core(m: u64, rows: f64) -> EventTrace {
    lut_passes(4 * m * m, 4.0, rows, (m * m) as f64 * rates().mul * rows)
}

/// One vertical add stage group covering `pairs` row pairs, each sweeping
/// its addend plus one carry column.
pub(crate) fn vertical_add(addend: u64, pairs: f64) -> EventTrace {
    let swept = (addend + 1) as f64;
    EventTrace {
        n_compare: 4,
        n_write: 4,
        active_cells_compared: 4.0 * 3.0 * swept * pairs,
        cells_written: rates().add * swept * pairs,
        ..Default::default()
    }
}

/// One vertical max stage group over `pairs` row pairs of `m` bits.
fn vertical_max(m: u64, pairs: f64) -> EventTrace {
    let m = m as f64;
    EventTrace {
        n_compare: 4,
        n_write: 4,
        active_cells_compared: 4.0 * 4.0 * m * pairs,
        cells_written: rates().max * m * pairs,
        ..Default::default()
    }
}

fn horizontal_max(m: u64, rows: f64) -> EventTrace {
    lut_passes(4 * m, 4.0, rows, m as f64 * rates().max * rows)
}

/// The four phases of a matrix product on one array.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MatMatParts {
    /// Bit-sequential writes of both operand fields.
    pub population: EventTrace,
    /// Shift-and-add products on every row.
    pub multiply: EventTrace,
    /// Summing the `j` products of each output.
    pub reduction: EventTrace,
    /// Bit-sequential reads of the result field.
    pub readout: EventTrace,
}

impl MatMatParts {
    pub fn total(&self) -> EventTrace {
        self.population + self.multiply + self.reduction + self.readout
    }
}

/// Expected phases of an `m`-bit product with `outputs` = i*u outputs of
/// depth `j` each. Tree variants pad `j` to a power of two.
pub fn matmat_parts(m: u32, outputs: usize, j: usize, variant: ApVariant) -> MatMatParts {
    use ApVariant::*;
    let m = m as u64;
    let iu = outputs as u64;
    let j = if variant.pads_to_pow2() { pow2(j) } else { j.max(1) } as u64;
    let lg = log2_ceil(j as usize) as u64;
    let rows = (iu * j) as f64;
    let wc = (2 * m + lg) as f64;
    let reduction = match variant {
        Ap1D => (1..=lg)
            .map(|q| n_times(EventTrace::transfer(wc), iu * (j >> q)) + horizontal_add(2 * m + q - 1, rows))
            .sum(),
        Ap2D => n_times(vertical_add(2 * m, 1.0), iu * (j - 1)),
        Ap2DSeg => (1..=lg).map(|t| vertical_add(2 * m + t - 1, (iu * (j >> t)) as f64)).sum(),
    };
    MatMatParts {
        population: col_writes(2 * m, rows),
        multiply: multiply_core(m, rows),
        reduction,
        readout: col_reads(2 * m + lg, rows),
    }
}

/// Expected trace of `op` with uniform random operands. Stage counts are
/// exact and equal [`analytic_cycles`]; cell counts are expectations.
pub fn expected_trace(op: &ApOp, variant: ApVariant) -> Result<EventTrace> {
    op.validate()?;
    use ApVariant::*;
    let m = op.m() as u64;
    Ok(match *op {
        ApOp::Add { l, .. } => {
            let n = l.div_ceil(2).max(1) as f64;
            col_writes(2 * m, n) + horizontal_add(m, n) + col_reads(m + 1, n)
        }
        ApOp::Multiply { l, .. } => {
            let n = l.div_ceil(2).max(1) as f64;
            col_writes(2 * m, n) + multiply_core(m, n) + col_reads(2 * m, n)
        }
        ApOp::Relu { l, .. } => {
            let n = l.max(1) as f64;
            col_writes(m, n)
                + EventTrace::read(n)
                + EventTrace::write(n / 2.0)
                + EventTrace::write(n)
                + lut_passes(m - 1, 2.0, n, (m - 1) as f64 * rates().relu * n)
                + col_reads(m, n)
        }
        ApOp::Reduce { l, .. } if l < 2 => col_writes(2 * m, 1.0) + EventTrace::read(m as f64),
        ApOp::Reduce { l, .. } => {
            let l = pow2(l) as u64;
            let lg = l.trailing_zeros() as u64;
            let n = (l / 2) as f64;
            let w = (m + lg) as f64;
            let body = match variant {
                Ap1D => (1..=lg)
                    .map(|q| {
                        let moves = if q < lg { l >> (q + 1) } else { 0 };
                        horizontal_add(m + q - 1, n) + n_times(EventTrace::transfer(w), moves)
                    })
                    .sum(),
                Ap2D => horizontal_add(m, n) + n_times(vertical_add(m + 1, 1.0), l / 2 - 1),
                Ap2DSeg => {
                    horizontal_add(m, n)
                        + (1..lg).map(|t| vertical_add(m + t, (l >> (t + 1)) as f64)).sum::<EventTrace>()
                }
            };
            col_writes(2 * m, n) + body + EventTrace::read(w)
        }
        ApOp::MatMat { i, j, u, .. } => matmat_parts(m as u32, i * u, j, variant).total(),
        ApOp::MaxPool { s, k, .. } => {
            let s = pow2(s) as u64;
            let k = k as u64;
            let jl = s.trailing_zeros() as u64;
            let n = (s / 2 * k) as f64;
            let round = horizontal_max(m, n) + col_writes(2, n);
            let body = match variant {
                Ap1D => n_times(round, jl) + n_times(EventTrace::transfer(m as f64), k * (s / 2 - 1)),
                Ap2D => round + n_times(vertical_max(m, 1.0) + col_writes(2, m as f64), k * (s / 2 - 1)),
                Ap2DSeg => {
                    round
                        + (1..jl)
                            .map(|t| {
                                let per_window = (s >> (t + 1)) as f64;
                                vertical_max(m, per_window * k as f64)
                                    + col_writes(2 * k, per_window * m as f64)
                            })
                            .sum::<EventTrace>()
                }
            };
            col_writes(2 * m, n) + body + col_reads(m, n)
        }
        ApOp::AvgPool { s, k, .. } => {
            let s = pow2(s) as u64;
            let k = k as u64;
            let jl = s.trailing_zeros() as u64;
            let n = (s / 2 * k) as f64;
            let w = (m + jl) as f64;
            let body = match variant {
                Ap1D => {
                    (1..=jl).map(|q| horizontal_add(m + q - 1, n)).sum::<EventTrace>()
                        + n_times(EventTrace::transfer(w), k * (s / 2 - 1))
                }
                Ap2D => horizontal_add(m, n) + n_times(vertical_add(m + 1, 1.0), k * (s / 2 - 1)),
                Ap2DSeg => {
                    horizontal_add(m, n)
                        + (1..jl).map(|t| vertical_add(m + t, ((s >> (t + 1)) * k) as f64)).sum::<EventTrace>()
                }
            };
            col_writes(2 * m, n) + body + col_reads(m, n)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ApVariant::*;

    fn cyc(op: ApOp, v: ApVariant) -> u64 {
        analytic_cycles(&op, v).unwrap()
    }

    #[test]
    fn frozen_values() {
        assert_eq!(cyc(ApOp::Add { m: 8, l: 2 }, Ap2D), 89);
        assert_eq!(cyc(ApOp::Add { m: 1, l: 2 }, Ap1D), 12);
        assert_eq!(cyc(ApOp::Multiply { m: 4, l: 2 }, Ap2D), 144);
        assert_eq!(cyc(ApOp::Reduce { m: 4, l: 8 }, Ap2D), 65);
        assert_eq!(cyc(ApOp::Reduce { m: 2, l: 2 }, Ap1D), 21);
        assert_eq!(cyc(ApOp::Relu { m: 8, l: 3 }, Ap1D), 33);
        assert_eq!(cyc(ApOp::MaxPool { m: 8, s: 4, k: 4 }, Ap2DSeg), 106);
        assert_eq!(cyc(ApOp::AvgPool { m: 8, s: 4, k: 4 }, Ap2D), 120);
    }

    #[test]
    fn matmat_forms() {
        // 2D: 2M + 8M^2 + 8(iu)(j-1) + 2M + log2 j
        assert_eq!(cyc(ApOp::MatMat { m: 4, i: 2, j: 8, u: 1 }, Ap2D), 8 + 128 + 8 * 2 * 7 + 8 + 3);
        assert_eq!(cyc(ApOp::MatMat { m: 4, i: 2, j: 8, u: 1 }, Ap2DSeg), 8 + 128 + 24 + 8 + 3);
        let one_d = 8 + 128 + 8 * (8 + 9 + 10) + 2 * 2 * 7 + 8 + 3;
        assert_eq!(cyc(ApOp::MatMat { m: 4, i: 2, j: 8, u: 1 }, Ap1D), one_d);
        // chain reduction accepts any j
        assert_eq!(cyc(ApOp::MatMat { m: 2, i: 1, j: 3, u: 1 }, Ap2D), 4 + 32 + 16 + 4 + 2);
    }

    #[test]
    fn expected_stages_match_closed_form() {
        for m in 1..=8 {
            let mut ops = vec![
                ApOp::Add { m, l: 6 },
                ApOp::Multiply { m, l: 6 },
                ApOp::Relu { m, l: 5 },
                ApOp::Reduce { m, l: 1 },
            ];
            for l in [2, 4, 8, 16] {
                ops.push(ApOp::Reduce { m, l });
            }
            for s in [2, 4, 8] {
                for k in [1, 3] {
                    ops.push(ApOp::MaxPool { m, s, k });
                    ops.push(ApOp::AvgPool { m, s, k });
                }
            }
            for (i, j, u) in [(1, 1, 1), (2, 4, 1), (4, 2, 4), (1, 8, 2)] {
                ops.push(ApOp::MatMat { m, i, j, u });
            }
            for op in ops {
                for v in ApVariant::ALL {
                    let e = expected_trace(&op, v).unwrap();
                    assert_eq!(e.stages(), cyc(op, v), "{op:?} {v}");
                }
            }
        }
    }

    #[test]
    fn invalid_params() {
        assert!(analytic_cycles(&ApOp::Add { m: 0, l: 2 }, Ap1D).is_err());
        assert!(analytic_cycles(&ApOp::MaxPool { m: 4, s: 1, k: 1 }, Ap1D).is_err());
        assert!(analytic_cycles(&ApOp::MatMat { m: 4, i: 0, j: 1, u: 1 }, Ap1D).is_err());
    }
}
