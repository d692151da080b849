//! Functional schedules. Each one builds a fresh array, runs the stages the
//! closed forms count, and reads the results back through the AP.

use super::{analytic_cycles, log2_ceil, ApOp, ApVariant, OpResult};
use crate::bits::Bits;
use crate::cam::{CamArray, KeyMask};
use crate::error::{Error, Result};
use crate::lut::{write_or_noop, LutProgram, Pass};
use crate::trace::EventTrace;
use std::ops::Range;
use std::sync::OnceLock;

fn adder() -> &'static [Pass] {
    static P: OnceLock<Vec<Pass>> = OnceLock::new();
    P.get_or_init(|| LutProgram::full_adder().passes())
}

fn maxer() -> &'static [Pass] {
    static P: OnceLock<Vec<Pass>> = OnceLock::new();
    P.get_or_init(|| LutProgram::max_pool().passes())
}

fn relu_passes() -> &'static [Pass] {
    static P: OnceLock<Vec<Pass>> = OnceLock::new();
    P.get_or_init(|| LutProgram::relu().passes())
}

fn run_passes(a: &mut CamArray, passes: &[Pass], cols: &[usize], guard: &[(usize, bool)]) -> Result<()> {
    for p in passes {
        let key = KeyMask::horizontal(cols.iter().copied().zip(p.matches.iter().copied()).chain(guard.iter().copied()));
        let tags = a.compare(&key)?;
        let wr = KeyMask::horizontal(p.writes.iter().map(|&(i, b)| (cols[i], b)));
        write_or_noop(a, &wr, &tags)?;
    }
    Ok(())
}

fn check_width(values: &[u64], m: u32) -> Result<()> {
    if m == 0 || m > 24 {
        return Err(Error::Validation(format!("bitwidth {m} outside 1..=24")));
    }
    if let Some(v) = values.iter().find(|&&v| v >> m != 0) {
        return Err(Error::Validation(format!("value {v} does not fit in {m} bits")));
    }
    Ok(())
}

/// Bit-sequential population: one write stage per bit of `values`.
fn populate(a: &mut CamArray, start: usize, values: &[u64], m: u32) -> Result<()> {
    for bit in 0..m as usize {
        let mut col = Bits::zeros(a.rows());
        for (r, &v) in values.iter().enumerate() {
            col.set(r, (v >> bit) & 1 == 1);
        }
        a.write_column(start + bit, &col)?;
    }
    Ok(())
}

/// Bit-sequential readout of `cols`, returning the values of `rows`.
fn read_fields(a: &mut CamArray, cols: Range<usize>, rows: &[usize]) -> Result<Vec<u64>> {
    let mut out = vec![0u64; rows.len()];
    for (bit, c) in cols.enumerate() {
        let col = a.read_bit_sequential(c)?;
        for (o, &r) in out.iter_mut().zip(rows) {
            *o |= (col.get(r) as u64) << bit;
        }
    }
    Ok(out)
}

/// In-place add of A[a..a+w] into B[b..b+w] with `carry` as carry column.
fn add_fields(a: &mut CamArray, af: usize, bf: usize, w: usize, carry: usize) -> Result<()> {
    for k in 0..w {
        run_passes(a, adder(), &[carry, af + k, bf + k], &[])?;
    }
    Ok(())
}

fn apply_state(passes: &[Pass], state: &mut [bool]) -> usize {
    let mut changed = 0;
    for p in passes {
        if p.matches.as_slice() == &state[..] {
            for &(i, b) in &p.writes {
                if state[i] != b {
                    changed += 1;
                }
                state[i] = b;
            }
        }
    }
    changed
}

/// Row-pair addition `dst += src` over `field`, for every pair at once.
///
/// The four full-adder passes are applied column by column from the least
/// significant end with the carry travelling along the pair's carry row.
/// The sweep covers `addend` columns and continues while a carry is live.
/// Charged as 4 compare and 4 write stages in total.
fn vertical_add(a: &mut CamArray, pairs: &[(usize, usize, usize)], field: Range<usize>, addend: usize) -> Result<()> {
    let passes = adder();
    let (mut cmp, mut wr) = (0.0, 0.0);
    for &(src, dst, cr) in pairs {
        let mut carry = false;
        let mut c = field.start;
        while c < field.end && (c - field.start < addend || carry) {
            let mut s = [carry, a.get(src, c), a.get(dst, c)];
            wr += apply_state(passes, &mut s) as f64;
            a.set(dst, c, s[2]);
            carry = s[0];
            cmp += 3.0;
            c += 1;
        }
        if carry {
            return Err(Error::Validation("vertical add overflowed its field".into()));
        }
        a.set(cr, field.start, false);
    }
    a.charge(EventTrace { n_compare: 4, n_write: 4, active_cells_compared: 4.0 * cmp, cells_written: wr, ..Default::default() });
    Ok(())
}

/// Row-pair max `dst = max(src, dst)` over `field`, MSB first, leaving the
/// per-column flag state in the pair's two flag rows.
fn vertical_max(a: &mut CamArray, quads: &[(usize, usize, usize, usize)], field: Range<usize>) -> Result<()> {
    let passes = maxer();
    let (mut cmp, mut wr) = (0.0, 0.0);
    for &(src, dst, f1, f2) in quads {
        let (mut g1, mut g2) = (false, false);
        for c in field.clone().rev() {
            let mut s = [a.get(src, c), a.get(dst, c), g1, g2];
            wr += apply_state(passes, &mut s) as f64;
            a.set(dst, c, s[1]);
            a.set(f1, c, s[2]);
            a.set(f2, c, s[3]);
            (g1, g2) = (s[2], s[3]);
            cmp += 4.0;
        }
    }
    a.charge(EventTrace { n_compare: 4, n_write: 4, active_cells_compared: 4.0 * cmp, cells_written: wr, ..Default::default() });
    Ok(())
}

/// Clears `field` in every listed row with a single write stage.
fn clear_rows(a: &mut CamArray, rows: &[usize], field: Range<usize>) -> Result<()> {
    let mut tags = Bits::zeros(a.rows());
    for &r in rows {
        tags.set(r, true);
    }
    a.selective_write(&KeyMask::horizontal(field.map(|c| (c, false))), &tags)
}

fn finish(a: CamArray, values: Vec<u64>, op: ApOp, variant: ApVariant) -> Result<OpResult> {
    Ok(OpResult { values, trace: *a.trace(), analytic_cycles: analytic_cycles(&op, variant)? })
}

/// `B <- A + B` elementwise. All variants run the same column-pair schedule.
pub fn inplace_add(a: &[u64], b: &[u64], m: u32, variant: ApVariant) -> Result<OpResult> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Validation("operands must be non-empty and equal length".into()));
    }
    check_width(a, m)?;
    check_width(b, m)?;
    let (mw, n) = (m as usize, a.len());
    let mut arr = CamArray::new(n, 2 * mw + 1);
    populate(&mut arr, 0, a, m)?;
    populate(&mut arr, mw, b, m)?;
    add_fields(&mut arr, 0, mw, mw, 2 * mw)?;
    let rows: Vec<usize> = (0..n).collect();
    let values = read_fields(&mut arr, mw..2 * mw + 1, &rows)?;
    finish(arr, values, ApOp::Add { m, l: 2 * n }, variant)
}

/// `C <- A * B` elementwise by shift-and-add, with C twice as wide.
pub fn multiply(a: &[u64], b: &[u64], m: u32, variant: ApVariant) -> Result<OpResult> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Validation("operands must be non-empty and equal length".into()));
    }
    check_width(a, m)?;
    check_width(b, m)?;
    let (mw, n) = (m as usize, a.len());
    let mut arr = CamArray::new(n, 4 * mw);
    populate(&mut arr, 0, a, m)?;
    populate(&mut arr, mw, b, m)?;
    multiply_fields(&mut arr, 0, mw, 2 * mw, mw)?;
    let rows: Vec<usize> = (0..n).collect();
    let values = read_fields(&mut arr, 2 * mw..4 * mw, &rows)?;
    finish(arr, values, ApOp::Multiply { m, l: 2 * n }, variant)
}

/// Partial product `j` adds A into C shifted by `j`, guarded on `B_j = 1`.
/// The still-empty column `C_{j+M}` serves as the carry.
fn multiply_fields(arr: &mut CamArray, af: usize, bf: usize, cf: usize, m: usize) -> Result<()> {
    for j in 0..m {
        for k in 0..m {
            run_passes(arr, adder(), &[cf + j + m, af + k, cf + j + k], &[(bf + j, true)])?;
        }
    }
    Ok(())
}

/// Sum of all elements.
pub fn reduce(values: &[u64], m: u32, variant: ApVariant) -> Result<OpResult> {
    check_width(values, m)?;
    let mw = m as usize;
    let op = ApOp::Reduce { m, l: values.len() };
    if values.len() < 2 {
        let v = values.first().copied().unwrap_or(0);
        let mut arr = CamArray::new(1, 2 * mw);
        populate(&mut arr, 0, &[v], m)?;
        populate(&mut arr, mw, &[0], m)?;
        let got = arr.read_word_field(0, 0..mw)?.to_u64();
        return finish(arr, vec![got], op, variant);
    }
    let l = values.len().next_power_of_two();
    let mut padded = values.to_vec();
    padded.resize(l, 0);
    let (mut arr, w) = tree_sum(&padded, m, 1, variant)?;
    let sum = arr.read_word_field(0, w..2 * w)?.to_u64();
    finish(arr, vec![sum], op, variant)
}

/// Shared body of reduce and average pooling: `k` windows of `s` words each,
/// two words per row. Leaves each window's sum in the B field of its first
/// row and returns the array with the field width.
fn tree_sum(values: &[u64], m: u32, k: usize, variant: ApVariant) -> Result<(CamArray, usize)> {
    let s = values.len() / k;
    let lg = s.trailing_zeros() as usize;
    let (mw, half) = (m as usize, s / 2);
    let n = half * k;
    let w = mw + lg;
    let extra = match variant {
        ApVariant::Ap1D => 0,
        ApVariant::Ap2D => 1,
        ApVariant::Ap2DSeg => (n / 2).max(1),
    };
    let mut arr = CamArray::new(n + extra, 2 * w);
    let a: Vec<u64> = values.iter().step_by(2).copied().collect();
    let b: Vec<u64> = values.iter().skip(1).step_by(2).copied().collect();
    populate(&mut arr, 0, &pad_rows(&a, n + extra), m)?;
    populate(&mut arr, w, &pad_rows(&b, n + extra), m)?;
    let bases: Vec<usize> = (0..k).map(|win| win * half).collect();
    match variant {
        ApVariant::Ap1D => {
            for q in 1..=lg {
                let width = mw + q - 1;
                add_fields(&mut arr, 0, w, width, w + width)?;
                if q < lg {
                    let step = 1 << q;
                    for &base in &bases {
                        for r in (0..half).step_by(step) {
                            arr.transfer_within(base + r + step / 2, w..2 * w, base + r, 0)?;
                        }
                    }
                }
            }
        }
        ApVariant::Ap2D => {
            add_fields(&mut arr, 0, w, mw, w + mw)?;
            for &base in &bases {
                for r in 1..half {
                    vertical_add(&mut arr, &[(base + r, base, n)], w..2 * w, mw + 1)?;
                }
            }
        }
        ApVariant::Ap2DSeg => {
            add_fields(&mut arr, 0, w, mw, w + mw)?;
            for t in 1..lg {
                let step = 1 << t;
                let mut pairs = Vec::new();
                for &base in &bases {
                    for r in (0..half).step_by(step) {
                        pairs.push((base + r + step / 2, base + r, n + pairs.len()));
                    }
                }
                vertical_add(&mut arr, &pairs, w..2 * w, mw + t)?;
            }
        }
    }
    Ok((arr, w))
}

fn pad_rows(v: &[u64], rows: usize) -> Vec<u64> {
    let mut v = v.to_vec();
    v.resize(rows, 0);
    v
}

/// Integer matrix product `K (i x j) * P (j x u)`.
///
/// Row `(a*u + b)*j + k` holds `K[a][k]` and `P[k][b]`. Products are formed
/// horizontally; the `j` products of each output are then reduced by a
/// transfer-and-add tree (1D), a chain of row-pair adds (2D) or a segmented
/// row-pair tree (2DSeg).
pub fn matmat(kmat: &[Vec<u64>], pmat: &[Vec<u64>], m: u32, variant: ApVariant) -> Result<OpResult> {
    let i = kmat.len();
    let j0 = pmat.len();
    let u = pmat.first().map_or(0, Vec::len);
    if i == 0 || j0 == 0 || u == 0 {
        return Err(Error::Dimension("empty matrix".into()));
    }
    if kmat.iter().any(|r| r.len() != j0) || pmat.iter().any(|r| r.len() != u) {
        return Err(Error::Dimension(format!("cannot multiply {i}x? by {j0}x{u}")));
    }
    for r in kmat.iter().chain(pmat) {
        check_width(r, m)?;
    }
    let j = if variant.pads_to_pow2() { j0.next_power_of_two() } else { j0 };
    let lg = log2_ceil(j) as usize;
    let mw = m as usize;
    let wc = 2 * mw + lg;
    let groups = i * u;
    let rows = groups * j;
    let extra = match variant {
        ApVariant::Ap1D => 0,
        ApVariant::Ap2D => 1,
        ApVariant::Ap2DSeg => (rows / 2).max(1),
    };
    let cols = 2 * mw + if variant == ApVariant::Ap1D { 2 * wc } else { wc };
    let mut arr = CamArray::new(rows + extra, cols);
    let mut kv = vec![0u64; rows + extra];
    let mut pv = vec![0u64; rows + extra];
    for a in 0..i {
        for b in 0..u {
            for k in 0..j0 {
                let r = (a * u + b) * j + k;
                kv[r] = kmat[a][k];
                pv[r] = pmat[k][b];
            }
        }
    }
    populate(&mut arr, 0, &kv, m)?;
    populate(&mut arr, mw, &pv, m)?;
    let cf = 2 * mw;
    multiply_fields(&mut arr, 0, mw, cf, mw)?;
    match variant {
        ApVariant::Ap1D => {
            let df = cf + wc;
            for q in 1..=lg {
                let step = 1 << q;
                for g in 0..groups {
                    for r in (0..j).step_by(step) {
                        arr.transfer_within(g * j + r + step / 2, cf..cf + wc, g * j + r, df)?;
                    }
                }
                let width = 2 * mw + q - 1;
                add_fields(&mut arr, df, cf, width, cf + width)?;
            }
        }
        ApVariant::Ap2D => {
            for g in 0..groups {
                for k in 1..j {
                    vertical_add(&mut arr, &[(g * j + k, g * j, rows)], cf..cf + wc, 2 * mw)?;
                }
            }
        }
        ApVariant::Ap2DSeg => {
            for t in 1..=lg {
                let step = 1 << t;
                let mut pairs = Vec::new();
                for g in 0..groups {
                    for r in (0..j).step_by(step) {
                        pairs.push((g * j + r + step / 2, g * j + r, rows + pairs.len()));
                    }
                }
                vertical_add(&mut arr, &pairs, cf..cf + wc, 2 * mw + t - 1)?;
            }
        }
    }
    let bases: Vec<usize> = (0..groups).map(|g| g * j).collect();
    let values = read_fields(&mut arr, cf..cf + wc, &bases)?;
    finish(arr, values, ApOp::MatMat { m, i, j: j0, u }, variant)
}

/// `max(v, 0)` on `m`-bit two's-complement words, one word per row. The sign
/// is copied into the flag column, cleared from the word, and every flagged
/// lower bit is then cleared by the single ReLU pass.
pub fn relu(v: &[i64], m: u32, variant: ApVariant) -> Result<OpResult> {
    if v.is_empty() {
        return Err(Error::Validation("empty input".into()));
    }
    if m == 0 || m > 24 {
        return Err(Error::Validation(format!("bitwidth {m} outside 1..=24")));
    }
    let lo = -(1i64 << (m - 1));
    let hi = (1i64 << (m - 1)) - 1;
    if let Some(x) = v.iter().find(|&&x| x < lo || x > hi) {
        return Err(Error::Validation(format!("{x} not representable in {m}-bit two's complement")));
    }
    let mw = m as usize;
    let n = v.len();
    let mut arr = CamArray::new(n, mw + 1);
    let raw: Vec<u64> = v.iter().map(|&x| (x as u64) & ((1u64 << m) - 1)).collect();
    populate(&mut arr, 0, &raw, m)?;
    let sign = arr.read_bit_sequential(mw - 1)?;
    arr.selective_write(&KeyMask::horizontal([(mw, true)]), &sign)?;
    arr.selective_write(&KeyMask::horizontal([(mw - 1, false)]), &Bits::ones(n))?;
    for i in (0..mw - 1).rev() {
        run_passes(&mut arr, relu_passes(), &[i, mw], &[])?;
    }
    let rows: Vec<usize> = (0..n).collect();
    let values = read_fields(&mut arr, 0..mw, &rows)?;
    finish(arr, values, ApOp::Relu { m, l: n }, variant)
}

fn check_pool(values: &[u64], s: usize, k: usize, m: u32) -> Result<()> {
    if s < 2 || !s.is_power_of_two() {
        return Err(Error::Shape(format!("window size {s} must be a power of two >= 2")));
    }
    if k == 0 || values.len() != s * k {
        return Err(Error::Shape(format!("expected {} values for S={s}, K={k}, got {}", s * k, values.len())));
    }
    check_width(values, m)
}

/// Maximum of each of the `k` consecutive windows of `s` values.
pub fn max_pool(values: &[u64], s: usize, k: usize, m: u32, variant: ApVariant) -> Result<OpResult> {
    check_pool(values, s, k, m)?;
    let (mw, half) = (m as usize, s / 2);
    let lg = s.trailing_zeros() as usize;
    let n = half * k;
    let extra = match variant {
        ApVariant::Ap1D => 0,
        ApVariant::Ap2D => 2,
        ApVariant::Ap2DSeg => 2 * (n / 2).max(1),
    };
    let (bf, f1, f2) = (mw, 2 * mw, 2 * mw + 1);
    let mut arr = CamArray::new(n + extra, 2 * mw + 2);
    let a: Vec<u64> = values.iter().step_by(2).copied().collect();
    let b: Vec<u64> = values.iter().skip(1).step_by(2).copied().collect();
    populate(&mut arr, 0, &pad_rows(&a, n + extra), m)?;
    populate(&mut arr, bf, &pad_rows(&b, n + extra), m)?;
    let zeros = Bits::zeros(n + extra);
    let round = |arr: &mut CamArray| -> Result<()> {
        for bit in (0..mw).rev() {
            run_passes(arr, maxer(), &[bit, bf + bit, f1, f2], &[])?;
        }
        arr.write_column(f1, &zeros)?;
        arr.write_column(f2, &zeros)
    };
    let bases: Vec<usize> = (0..k).map(|w| w * half).collect();
    match variant {
        ApVariant::Ap1D => {
            for q in 1..=lg {
                round(&mut arr)?;
                if q < lg {
                    let step = 1 << q;
                    for &base in &bases {
                        for r in (0..half).step_by(step) {
                            arr.transfer_within(base + r + step / 2, bf..bf + mw, base + r, 0)?;
                        }
                    }
                }
            }
        }
        ApVariant::Ap2D => {
            round(&mut arr)?;
            for &base in &bases {
                for r in 1..half {
                    vertical_max(&mut arr, &[(base + r, base, n, n + 1)], bf..bf + mw)?;
                    clear_rows(&mut arr, &[n], bf..bf + mw)?;
                    clear_rows(&mut arr, &[n + 1], bf..bf + mw)?;
                }
            }
        }
        ApVariant::Ap2DSeg => {
            round(&mut arr)?;
            for t in 1..lg {
                let step = 1 << t;
                let mut quads = Vec::new();
                let mut per_window = Vec::new();
                for &base in &bases {
                    let first = quads.len();
                    for r in (0..half).step_by(step) {
                        let fr = n + 2 * quads.len();
                        quads.push((base + r + step / 2, base + r, fr, fr + 1));
                    }
                    per_window.push(first..quads.len());
                }
                vertical_max(&mut arr, &quads, bf..bf + mw)?;
                for win in per_window {
                    let f1s: Vec<usize> = quads[win.clone()].iter().map(|q| q.2).collect();
                    let f2s: Vec<usize> = quads[win].iter().map(|q| q.3).collect();
                    clear_rows(&mut arr, &f1s, bf..bf + mw)?;
                    clear_rows(&mut arr, &f2s, bf..bf + mw)?;
                }
            }
        }
    }
    let out = read_fields(&mut arr, bf..bf + mw, &bases)?;
    finish(arr, out, ApOp::MaxPool { m, s, k }, variant)
}

/// `floor(sum / s)` of each window, read from bit `log2 s` upwards.
pub fn avg_pool(values: &[u64], s: usize, k: usize, m: u32, variant: ApVariant) -> Result<OpResult> {
    check_pool(values, s, k, m)?;
    let (mut arr, w) = tree_sum(values, m, k, variant)?;
    let lg = s.trailing_zeros() as usize;
    let bases: Vec<usize> = (0..k).map(|win| win * s / 2).collect();
    let out = read_fields(&mut arr, w + lg..w + lg + m as usize, &bases)?;
    finish(arr, out, ApOp::AvgPool { m, s, k }, variant)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ApVariant::*;

    #[test]
    fn add_identity_and_carry() {
        let r = inplace_add(&[0, 15, 9], &[7, 15, 8], 4, Ap2D).unwrap();
        assert_eq!(r.values, vec![7, 30, 17]);
        assert!(r.cycles_agree());
    }

    #[test]
    fn multiply_small() {
        let r = multiply(&[3, 15, 0], &[5, 15, 9], 4, Ap1D).unwrap();
        assert_eq!(r.values, vec![15, 225, 0]);
        assert_eq!(r.analytic_cycles, 144);
        assert!(r.cycles_agree());
    }

    #[test]
    fn reduce_all_variants() {
        for v in ApVariant::ALL {
            let r = reduce(&[1, 2, 3, 4, 5, 6, 7, 15], 4, v).unwrap();
            assert_eq!(r.values, vec![43], "{v}");
            assert!(r.cycles_agree(), "{v}");
        }
        let r = reduce(&[5], 4, Ap2D).unwrap();
        assert_eq!(r.values, vec![5]);
        assert_eq!(r.trace.stages(), 9);
    }

    #[test]
    fn reduce_pads_odd_lengths() {
        let r = reduce(&[3, 3, 3], 2, Ap2DSeg).unwrap();
        assert_eq!(r.values, vec![9]);
        assert!(r.cycles_agree());
    }

    #[test]
    fn relu_example() {
        let r = relu(&[-3, 0, 7], 4, Ap2D).unwrap();
        assert_eq!(r.values, vec![0, 0, 7]);
        assert!(r.cycles_agree());
        assert!(relu(&[8], 4, Ap2D).is_err());
    }

    #[test]
    fn max_pool_example() {
        for v in ApVariant::ALL {
            let r = max_pool(&[1, 7, 3, 5, 2, 2, 9, 0], 4, 2, 4, v).unwrap();
            assert_eq!(r.values, vec![7, 9], "{v}");
            assert!(r.cycles_agree(), "{v}");
        }
    }

    #[test]
    fn avg_pool_example() {
        for v in ApVariant::ALL {
            let r = avg_pool(&[1, 2, 3, 6], 4, 1, 4, v).unwrap();
            assert_eq!(r.values, vec![3], "{v}");
            assert!(r.cycles_agree(), "{v}");
        }
        assert!(avg_pool(&[1, 2, 3], 3, 1, 4, Ap2D).is_err());
    }

    #[test]
    fn matmat_identity() {
        let k = vec![vec![1, 0], vec![0, 1]];
        let p = vec![vec![3, 1, 2], vec![0, 3, 1]];
        for v in ApVariant::ALL {
            let r = matmat(&k, &p, 2, v).unwrap();
            assert_eq!(r.values, vec![3, 1, 2, 0, 3, 1], "{v}");
            assert!(r.cycles_agree(), "{v}");
        }
    }

    #[test]
    fn matmat_odd_depth_chain() {
        let k = vec![vec![3, 3, 3]];
        let p = vec![vec![3], vec![3], vec![3]];
        for v in ApVariant::ALL {
            let r = matmat(&k, &p, 2, v).unwrap();
            assert_eq!(r.values, vec![27], "{v}");
            assert!(r.cycles_agree(), "{v}");
        }
    }

    #[test]
    fn validation() {
        assert!(inplace_add(&[16], &[0], 4, Ap2D).is_err());
        assert!(inplace_add(&[1, 2], &[0], 4, Ap2D).is_err());
        assert!(matmat(&[vec![1, 2]], &[vec![1]], 2, Ap2D).is_err());
    }
}
