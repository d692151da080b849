//! Stage and activity counters shared by the emulator and the cost model.

use serde::{Deserialize, Serialize};
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul};

/// Counts of compare, write, read and transfer stages plus the cell activity
/// behind them. Reads are search operations, so their cells are accumulated
/// into `active_cells_compared`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EventTrace {
    pub n_compare: u64,
    pub n_write: u64,
    pub n_read: u64,
    pub n_transfer: u64,
    /// May be fractional when the trace is an expectation rather than a run.
    pub active_cells_compared: f64,
    pub cells_written: f64,
    pub bits_transferred: f64,
}

impl EventTrace {
    /// Compare + write + read stages, one cycle unit each.
    pub fn stages(&self) -> u64 {
        self.n_compare + self.n_write + self.n_read
    }

    /// Cycles when each write stage takes `write_cycles` units.
    pub fn cycles(&self, write_cycles: u64) -> u64 {
        self.n_compare + self.n_write * write_cycles + self.n_read
    }

    pub fn is_empty(&self) -> bool {
        *self == EventTrace::default()
    }

    /// Repeats this trace `n` times.
    pub fn times(&self, n: u64) -> EventTrace {
        *self * n as f64
    }

    pub(crate) fn compare(cells: f64) -> Self {
        EventTrace { n_compare: 1, active_cells_compared: cells, ..Default::default() }
    }

    pub(crate) fn write(cells: f64) -> Self {
        EventTrace { n_write: 1, cells_written: cells, ..Default::default() }
    }

    pub(crate) fn read(cells: f64) -> Self {
        EventTrace { n_read: 1, active_cells_compared: cells, ..Default::default() }
    }

    /// One read plus one write of `width` cells between rows of one array.
    /// Nothing crosses the interconnect, so `bits_transferred` stays zero.
    pub(crate) fn transfer(width: f64) -> Self {
        EventTrace {
            n_compare: 0,
            n_read: 1,
            n_write: 1,
            n_transfer: 1,
            active_cells_compared: width,
            cells_written: width,
            bits_transferred: 0.0,
        }
    }
}

impl Add for EventTrace {
    type Output = EventTrace;
    fn add(mut self, o: EventTrace) -> EventTrace {
        self += o;
        self
    }
}

impl AddAssign for EventTrace {
    fn add_assign(&mut self, o: EventTrace) {
        self.n_compare += o.n_compare;
        self.n_write += o.n_write;
        self.n_read += o.n_read;
        self.n_transfer += o.n_transfer;
        self.active_cells_compared += o.active_cells_compared;
        self.cells_written += o.cells_written;
        self.bits_transferred += o.bits_transferred;
    }
}

/// Scales every counter. Stage counts are rounded to the nearest integer.
impl Mul<f64> for EventTrace {
    type Output = EventTrace;
    fn mul(self, k: f64) -> EventTrace {
        let r = |x: u64| (x as f64 * k).round() as u64;
        EventTrace {
            n_compare: r(self.n_compare),
            n_write: r(self.n_write),
            n_read: r(self.n_read),
            n_transfer: r(self.n_transfer),
            active_cells_compared: self.active_cells_compared * k,
            cells_written: self.cells_written * k,
            bits_transferred: self.bits_transferred * k,
        }
    }
}

impl Sum for EventTrace {
    fn sum<I: Iterator<Item = EventTrace>>(iter: I) -> Self {
        iter.fold(EventTrace::default(), |a, b| a + b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transfer_is_read_plus_write() {
        let t = EventTrace::transfer(8.0);
        assert_eq!((t.n_read, t.n_write, t.n_transfer), (1, 1, 1));
        assert_eq!(t.stages(), 2);
    }

    #[test]
    fn cycles_apply_write_multiplier() {
        let t = EventTrace::compare(1.0) + EventTrace::write(1.0) + EventTrace::write(1.0);
        assert_eq!(t.cycles(1), 3);
        assert_eq!(t.cycles(2), 5);
    }

    #[test]
    fn times_scales_counts() {
        let t = (EventTrace::compare(3.0) + EventTrace::read(2.0)).times(4);
        assert_eq!(t.n_compare, 4);
        assert_eq!(t.active_cells_compared, 20.0);
    }
}
