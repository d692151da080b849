//! Functional model of a 2D CAM array: horizontal and vertical search,
//! masked selective writes, tag registers and the bit/word sequential
//! reading and writing modes.
//!
//! Cells are stored column-major so that horizontal (word-parallel) passes,
//! the common case, touch whole 64-row words at a time.

use crate::bits::Bits;
use crate::error::{Error, Result};
use crate::trace::EventTrace;
use serde::{Deserialize, Serialize};
use std::ops::Range;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    /// Key spans columns, tags are per row.
    Horizontal,
    /// Key spans rows, tags are per column.
    Vertical,
}

/// Key and mask registers. Only masked positions carry a key bit, so bits
/// outside the mask cannot influence a compare or a write.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyMask {
    orientation: Orientation,
    pairs: Vec<(usize, bool)>,
}

impl KeyMask {
    pub fn new(orientation: Orientation, pairs: impl IntoIterator<Item = (usize, bool)>) -> Self {
        KeyMask { orientation, pairs: pairs.into_iter().collect() }
    }

    pub fn horizontal(pairs: impl IntoIterator<Item = (usize, bool)>) -> Self {
        Self::new(Orientation::Horizontal, pairs)
    }

    pub fn vertical(pairs: impl IntoIterator<Item = (usize, bool)>) -> Self {
        Self::new(Orientation::Vertical, pairs)
    }

    /// Builds from a full-length key and a mask position set.
    pub fn from_key(orientation: Orientation, key: &Bits, mask: &[usize]) -> Result<Self> {
        if let Some(&p) = mask.iter().find(|&&p| p >= key.len()) {
            return Err(Error::Dimension(format!("mask position {p} beyond key length {}", key.len())));
        }
        Ok(Self::new(orientation, mask.iter().map(|&p| (p, key.get(p)))))
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn pairs(&self) -> &[(usize, bool)] {
        &self.pairs
    }

    pub fn mask(&self) -> impl Iterator<Item = usize> + '_ {
        self.pairs.iter().map(|p| p.0)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CamArray {
    rows: usize,
    cols: usize,
    data: Vec<Bits>,
    h_tags: Bits,
    v_tags: Bits,
    trace: EventTrace,
    write_cycles: u64,
}

impl CamArray {
    pub fn new(rows: usize, cols: usize) -> Self {
        CamArray {
            rows,
            cols,
            data: vec![Bits::zeros(rows); cols],
            h_tags: Bits::zeros(rows),
            v_tags: Bits::zeros(cols),
            trace: EventTrace::default(),
            write_cycles: 1,
        }
    }

    /// Cycle units charged per write stage by [`CamArray::cycles`]. Default 1.
    pub fn with_write_cycles(mut self, k: u64) -> Self {
        self.write_cycles = k.max(1);
        self
    }

    /// Parses the debug dump format: one row per line of '0'/'1'.
    pub fn from_dump(text: &str) -> Result<Self> {
        let lines: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
        let cols = lines.first().map_or(0, |l| l.len());
        let mut a = CamArray::new(lines.len(), cols);
        for (r, line) in lines.iter().enumerate() {
            let bits = Bits::parse(line)
                .filter(|b| b.len() == cols)
                .ok_or_else(|| Error::Parse { line: r + 1, msg: format!("bad row {line:?}") })?;
            for c in 0..cols {
                a.data[c].set(r, bits.get(c));
            }
        }
        Ok(a)
    }

    pub fn dump(&self) -> String {
        let mut s = String::with_capacity(self.rows * (self.cols + 1));
        for r in 0..self.rows {
            for c in 0..self.cols {
                s.push(if self.data[c].get(r) { '1' } else { '0' });
            }
            s.push('\n');
        }
        s
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn trace(&self) -> &EventTrace {
        &self.trace
    }

    pub fn cycles(&self) -> u64 {
        self.trace.cycles(self.write_cycles)
    }

    pub fn h_tags(&self) -> &Bits {
        &self.h_tags
    }

    pub fn v_tags(&self) -> &Bits {
        &self.v_tags
    }

    /// Direct cell inspection. Not an AP stage, nothing is charged.
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[col].get(row)
    }

    /// Direct cell update for test setup. Nothing is charged.
    pub fn set(&mut self, row: usize, col: usize, v: bool) {
        self.data[col].set(row, v);
    }

    pub fn column(&self, col: usize) -> &Bits {
        &self.data[col]
    }

    pub fn row(&self, row: usize) -> Bits {
        let mut b = Bits::zeros(self.cols);
        for c in 0..self.cols {
            b.set(c, self.data[c].get(row));
        }
        b
    }

    /// Unsigned value of `row` over `cols`, least significant column first.
    pub fn field_value(&self, row: usize, cols: Range<usize>) -> u64 {
        cols.enumerate().fold(0, |v, (i, c)| v | (self.data[c].get(row) as u64) << i)
    }

    pub(crate) fn charge(&mut self, t: EventTrace) {
        self.trace += t;
    }

    fn check_km(&self, km: &KeyMask) -> Result<()> {
        if km.is_empty() {
            return Err(Error::Usage("empty mask".into()));
        }
        let limit = match km.orientation {
            Orientation::Horizontal => self.cols,
            Orientation::Vertical => self.rows,
        };
        for (i, &(p, _)) in km.pairs.iter().enumerate() {
            if p >= limit {
                return Err(Error::Dimension(format!("mask position {p} out of range 0..{limit}")));
            }
            if km.pairs[..i].iter().any(|q| q.0 == p) {
                return Err(Error::Usage(format!("mask position {p} repeated")));
            }
        }
        Ok(())
    }

    fn check_row(&self, row: usize) -> Result<()> {
        if row >= self.rows {
            return Err(Error::Dimension(format!("row {row} out of range 0..{}", self.rows)));
        }
        Ok(())
    }

    fn check_col(&self, col: usize) -> Result<()> {
        if col >= self.cols {
            return Err(Error::Dimension(format!("column {col} out of range 0..{}", self.cols)));
        }
        Ok(())
    }

    fn check_field(&self, cols: &Range<usize>) -> Result<()> {
        if cols.end > self.cols || cols.start > cols.end {
            return Err(Error::Dimension(format!("field {cols:?} outside 0..{}", self.cols)));
        }
        Ok(())
    }

    /// Searches for the key over the masked positions and latches the result
    /// in the tag register of the key's orientation.
    pub fn compare(&mut self, km: &KeyMask) -> Result<Bits> {
        self.check_km(km)?;
        let tags = self.match_tags(km);
        let span = match km.orientation {
            Orientation::Horizontal => self.rows,
            Orientation::Vertical => self.cols,
        };
        self.trace += EventTrace::compare((km.len() * span) as f64);
        match km.orientation {
            Orientation::Horizontal => self.h_tags = tags.clone(),
            Orientation::Vertical => self.v_tags = tags.clone(),
        }
        Ok(tags)
    }

    fn match_tags(&self, km: &KeyMask) -> Bits {
        match km.orientation {
            Orientation::Horizontal => {
                let mut tags = Bits::ones(self.rows);
                for &(c, b) in &km.pairs {
                    let col = self.data[c].words();
                    for (t, &w) in tags.words_mut().iter_mut().zip(col) {
                        *t &= if b { w } else { !w };
                    }
                }
                tags.trim();
                tags
            }
            Orientation::Vertical => {
                let mut tags = Bits::zeros(self.cols);
                for c in 0..self.cols {
                    let hit = km.pairs.iter().all(|&(r, b)| self.data[c].get(r) == b);
                    tags.set(c, hit);
                }
                tags
            }
        }
    }

    /// Writes the key bits into every masked position of the tagged rows
    /// (horizontal) or tagged columns (vertical). One write stage.
    pub fn selective_write(&mut self, km: &KeyMask, tags: &Bits) -> Result<()> {
        self.check_km(km)?;
        match km.orientation {
            Orientation::Horizontal => {
                if tags.len() != self.rows {
                    return Err(Error::Dimension(format!("tag length {} != rows {}", tags.len(), self.rows)));
                }
                for &(c, b) in &km.pairs {
                    let col = self.data[c].words_mut();
                    for (w, &t) in col.iter_mut().zip(tags.words()) {
                        if b {
                            *w |= t;
                        } else {
                            *w &= !t;
                        }
                    }
                }
            }
            Orientation::Vertical => {
                if tags.len() != self.cols {
                    return Err(Error::Dimension(format!("tag length {} != cols {}", tags.len(), self.cols)));
                }
                for c in tags.iter_ones() {
                    for &(r, b) in &km.pairs {
                        self.data[c].set(r, b);
                    }
                }
            }
        }
        self.trace += EventTrace::write((km.len() * tags.count_ones()) as f64);
        Ok(())
    }

    /// Bit-sequential read: a compare with every column masked except `col`.
    pub fn read_bit_sequential(&mut self, col: usize) -> Result<Bits> {
        self.check_col(col)?;
        let tags = self.data[col].clone();
        self.h_tags = tags.clone();
        self.trace += EventTrace::read(self.rows as f64);
        Ok(tags)
    }

    /// Word-sequential read of a whole row through the vertical tags.
    pub fn read_word_sequential(&mut self, row: usize) -> Result<Bits> {
        self.read_word_field(row, 0..self.cols)
    }

    /// Word-sequential read restricted to the columns of one field. The
    /// returned vector is the field only; unaddressed columns are not sensed.
    pub fn read_word_field(&mut self, row: usize, cols: Range<usize>) -> Result<Bits> {
        self.check_row(row)?;
        self.check_field(&cols)?;
        let mut out = Bits::zeros(cols.len());
        let mut tags = Bits::zeros(self.cols);
        for (i, c) in cols.clone().enumerate() {
            let b = self.data[c].get(row);
            out.set(i, b);
            tags.set(c, b);
        }
        self.v_tags = tags;
        self.trace += EventTrace::read(cols.len() as f64);
        Ok(out)
    }

    /// Bit-sequential write of a whole column. One write stage.
    pub fn write_column(&mut self, col: usize, bits: &Bits) -> Result<()> {
        self.check_col(col)?;
        if bits.len() != self.rows {
            return Err(Error::Dimension(format!("column length {} != rows {}", bits.len(), self.rows)));
        }
        self.data[col] = bits.clone();
        self.trace += EventTrace::write(self.rows as f64);
        Ok(())
    }

    /// Word-sequential write of `bits` into `row` starting at column `start`.
    pub fn write_word(&mut self, row: usize, start: usize, bits: &Bits) -> Result<()> {
        self.check_row(row)?;
        self.check_field(&(start..start + bits.len()))?;
        for (i, b) in bits.iter().enumerate() {
            self.data[start + i].set(row, b);
        }
        self.trace += EventTrace::write(bits.len() as f64);
        Ok(())
    }

    /// Moves a field between two rows of this array: one read and one write.
    pub fn transfer_within(&mut self, src_row: usize, src: Range<usize>, dst_row: usize, dst_start: usize) -> Result<()> {
        self.check_row(src_row)?;
        self.check_row(dst_row)?;
        self.check_field(&src)?;
        self.check_field(&(dst_start..dst_start + src.len()))?;
        let w = src.len();
        let vals: Vec<bool> = src.map(|c| self.data[c].get(src_row)).collect();
        for (i, b) in vals.into_iter().enumerate() {
            self.data[dst_start + i].set(dst_row, b);
        }
        self.trace += EventTrace::transfer(w as f64);
        Ok(())
    }
}

/// Copies `src_row` of `src` into `dst_row` of `dst`. The read is charged to
/// the source and the write plus the transfer count to the destination.
pub fn transfer_word(src: &mut CamArray, src_row: usize, dst: &mut CamArray, dst_row: usize) -> Result<()> {
    if src.cols != dst.cols {
        return Err(Error::Dimension(format!("width mismatch {} vs {}", src.cols, dst.cols)));
    }
    let word = src.read_word_sequential(src_row)?;
    dst.write_word(dst_row, 0, &word)?;
    dst.trace.n_transfer += 1;
    dst.trace.bits_transferred += word.len() as f64;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arr(s: &str) -> CamArray {
        CamArray::from_dump(s).unwrap()
    }

    #[test]
    fn horizontal_compare_matches_rows() {
        let mut a = arr("10\n01\n");
        let t = a.compare(&KeyMask::horizontal([(0, true), (1, false)])).unwrap();
        assert_eq!(t.to_string(), "10");
        assert_eq!(a.trace().n_compare, 1);
        assert_eq!(a.trace().active_cells_compared, 4.0);
    }

    #[test]
    fn single_column_compare_reads_the_column() {
        let mut a = arr("1\n0\n1\n1\n");
        let t = a.compare(&KeyMask::horizontal([(0, true)])).unwrap();
        assert_eq!(t.to_string(), "1011");
    }

    #[test]
    fn empty_mask_is_usage_error() {
        let mut a = CamArray::new(2, 2);
        assert!(matches!(a.compare(&KeyMask::horizontal([])), Err(Error::Usage(_))));
        assert!(matches!(a.compare(&KeyMask::horizontal([(2, true)])), Err(Error::Dimension(_))));
        assert!(matches!(a.compare(&KeyMask::vertical([(2, true)])), Err(Error::Dimension(_))));
    }

    #[test]
    fn write_with_no_tags_changes_nothing() {
        let mut a = arr("101\n010\n");
        let before = a.dump();
        a.selective_write(&KeyMask::horizontal([(0, false)]), &Bits::zeros(2)).unwrap();
        assert_eq!(a.dump(), before);
        assert_eq!(a.trace().n_write, 1);
        assert_eq!(a.trace().cells_written, 0.0);
    }

    #[test]
    fn write_clears_column_in_tagged_rows() {
        let mut a = arr("111\n011\n");
        a.selective_write(&KeyMask::horizontal([(2, false)]), &Bits::ones(2)).unwrap();
        assert_eq!(a.dump(), "110\n010\n");
    }

    #[test]
    fn vertical_compare_and_write() {
        let mut a = arr("1100\n1010\n");
        let t = a.compare(&KeyMask::vertical([(0, true), (1, false)])).unwrap();
        assert_eq!(t.to_string(), "0100");
        a.selective_write(&KeyMask::vertical([(1, true)]), &t).unwrap();
        assert_eq!(a.dump(), "1100\n1110\n");
    }

    #[test]
    fn reads() {
        let mut a = arr("0110\n1001\n");
        assert_eq!(a.read_word_sequential(0).unwrap().to_string(), "0110");
        assert_eq!(a.read_bit_sequential(3).unwrap().to_string(), "01");
        assert_eq!(a.trace().n_read, 2);
        assert!(a.read_bit_sequential(4).is_err());
    }

    #[test]
    fn transfers() {
        let mut a = arr("101\n000\n");
        a.transfer_within(0, 0..3, 1, 0).unwrap();
        assert_eq!(a.dump(), "101\n101\n");
        a.transfer_within(1, 0..3, 1, 0).unwrap();
        assert_eq!(a.dump(), "101\n101\n");
        let t = a.trace();
        assert_eq!((t.n_read, t.n_write, t.n_transfer), (2, 2, 2));

        let mut b = CamArray::new(1, 3);
        transfer_word(&mut a, 0, &mut b, 0).unwrap();
        assert_eq!(b.dump(), "101\n");
        let mut c = CamArray::new(1, 4);
        assert!(transfer_word(&mut a, 0, &mut c, 0).is_err());
    }

    #[test]
    fn write_cycle_multiplier() {
        let mut a = CamArray::new(2, 2).with_write_cycles(2);
        a.write_column(0, &Bits::ones(2)).unwrap();
        a.read_bit_sequential(0).unwrap();
        assert_eq!(a.cycles(), 3);
        assert_eq!(a.trace().stages(), 2);
    }

    #[test]
    fn dump_roundtrip() {
        let s = "0101\n1110\n0000\n";
        assert_eq!(arr(s).dump(), s);
        assert!(CamArray::from_dump("01\n1\n").is_err());
    }
}
