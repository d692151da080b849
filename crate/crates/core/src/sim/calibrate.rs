//! Fitting the per-cell compare energy, the one free energy parameter.

use super::{activity, plan_for};
use crate::error::{Error, Result};
use crate::mapper::HardwareConfig;
use crate::tech::{InterconnectProfile, TechProfile};
use crate::trace::EventTrace;
use crate::workload::{ModelSpec, PrecisionConfig};

/// ReRAM over SRAM end-to-end energy on VGG16 at fixed precisions 2..8.
pub const TECH_RATIO_TARGETS: [(u32, f64); 7] =
    [(2, 80.9), (3, 72.9), (4, 68.9), (5, 66.6), (6, 65.0), (7, 63.9), (8, 63.1)];

fn activities(model: &ModelSpec, hw: &HardwareConfig, ic: &InterconnectProfile, bits: &[u32]) -> Result<Vec<EventTrace>> {
    bits.iter()
        .map(|&b| plan_for(model, &PrecisionConfig::fixed(b), hw, ic).map(|p| activity(&p)))
        .collect()
}

fn ratio(t: &EventTrace, e_compare: f64, ic: &InterconnectProfile) -> f64 {
    let (s, r) = (TechProfile::sram16nm(), TechProfile::reram16nm());
    let rest = t.active_cells_compared * e_compare + t.bits_transferred * ic.energy_per_bit();
    (t.cells_written * r.e_write_cell + rest) / (t.cells_written * s.e_write_cell + rest)
}

/// ReRAM/SRAM energy ratio of `model` at each fixed precision in `bits`
/// when both technologies use `e_compare` J per compared cell.
pub fn ratio_curve(model: &ModelSpec, hw: &HardwareConfig, ic: &InterconnectProfile, e_compare: f64, bits: &[u32]) -> Result<Vec<f64>> {
    Ok(activities(model, hw, ic, bits)?.iter().map(|t| ratio(t, e_compare, ic)).collect())
}

/// Least-squares fit, in log space, of the compare energy that makes the
/// ReRAM/SRAM energy ratio of `model` follow `targets` (bits, ratio).
pub fn calibrate_compare_energy(
    model: &ModelSpec,
    hw: &HardwareConfig,
    ic: &InterconnectProfile,
    targets: &[(u32, f64)],
) -> Result<f64> {
    if targets.is_empty() {
        return Err(Error::Config("no calibration targets".into()));
    }
    let bits: Vec<u32> = targets.iter().map(|t| t.0).collect();
    let acts = activities(model, hw, ic, &bits)?;
    let cost = |log_e: f64| -> f64 {
        acts.iter()
            .zip(targets)
            .map(|(a, &(_, want))| (ratio(a, log_e.exp(), ic) / want).ln().powi(2))
            .sum()
    };
    let (lo, hi) = (1e-19f64.ln(), 1e-11f64.ln());
    let n = 400;
    let grid = |i: usize| lo + (hi - lo) * i as f64 / n as f64;
    let best = (0..=n).min_by(|&a, &b| cost(grid(a)).total_cmp(&cost(grid(b)))).unwrap_or(0);
    let (mut a, mut b) = (grid(best.saturating_sub(1)), grid((best + 1).min(n)));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..100 {
        let (x1, x2) = (b - g * (b - a), a + g * (b - a));
        if cost(x1) < cost(x2) {
            b = x2;
        } else {
            a = x1;
        }
    }
    Ok(((a + b) / 2.0).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tech::E_COMPARE_CELL;

    #[test]
    fn shipped_value_is_the_fit() {
        let vgg = ModelSpec::builtin("vgg16").unwrap();
        let e = calibrate_compare_energy(&vgg, &HardwareConfig::lr_default(), &InterconnectProfile::default(), &TECH_RATIO_TARGETS)
            .unwrap();
        assert!((e / E_COMPARE_CELL - 1.0).abs() < 1e-3, "fit {e:e}");
    }

    #[test]
    fn ratio_falls_with_compare_energy() {
        let vgg = ModelSpec::builtin("alexnet").unwrap();
        let hw = HardwareConfig::lr_default();
        let ic = InterconnectProfile::default();
        let a = ratio_curve(&vgg, &hw, &ic, 1e-15, &[4]).unwrap()[0];
        let b = ratio_curve(&vgg, &hw, &ic, 1e-14, &[4]).unwrap()[0];
        assert!(a > b && b > 1.0);
    }
}
