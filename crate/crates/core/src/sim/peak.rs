//! Peak throughput and efficiency of convolution at full occupancy.

use super::evaluate;
use crate::error::{Error, Result};
use crate::mapper::{plan, ExecutionPlan, HardwareConfig, Mode};
use crate::tech::{ClockProfile, InterconnectProfile, TechProfile};
use crate::workload::{Dims, LayerPrecision, LayerSpec, ModelSpec};
use serde::Serialize;

/// Widest word `peak_metrics` accepts. Rows are widened to two such words.
pub const PEAK_MAX_BITS: u32 = 16;

/// Kernel of the reference layer: 3x3 over 64 channels.
const REF_KERNEL: usize = 3;
const REF_CHANNELS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeakMetrics {
    pub bits: u32,
    pub gops: f64,
    pub gops_per_w: f64,
    pub ops_per_step: f64,
    pub step_latency_s: f64,
    pub step_energy_j: f64,
}

/// The reference layer sized so that one step fills every CAP.
fn reference(hw: &HardwareConfig) -> Result<ModelSpec> {
    let r = REF_KERNEL * REF_KERNEL * REF_CHANNELS;
    let per_cap = hw.usable_rows()? / r;
    let copies = (per_cap * hw.caps_in_cluster()) / REF_CHANNELS;
    if copies == 0 {
        return Err(Error::Capacity("a cluster cannot hold the reference kernel".into()));
    }
    let n = copies * hw.n_clusters();
    let mut m = ModelSpec::empty("peak");
    m.input = Dims::new(1, n, REF_CHANNELS);
    m.layers.push(LayerSpec::conv("conv", m.input, REF_KERNEL, REF_CHANNELS, 1, 1));
    Ok(m)
}

/// Convolution-only throughput of one fully occupied LR step with its
/// input broadcast and output drain, weights already resident.
pub fn peak_metrics(bits: u32, hw: &HardwareConfig, tech: &TechProfile, ic: &InterconnectProfile, clock: &ClockProfile) -> Result<PeakMetrics> {
    if bits == 0 || bits > PEAK_MAX_BITS {
        return Err(Error::Unsupported(format!("peak metrics support 1..={PEAK_MAX_BITS} bits, got {bits}")));
    }
    let hw = HardwareConfig { mode: Mode::Lr, ap_cols: hw.ap_cols.max(2 * bits as usize), ..*hw };
    let model = reference(&hw)?;
    let full = plan(&model, &[LayerPrecision::uniform(bits)], &hw, ic)?;
    let mut layer = full.layers[0].clone();
    layer.phases.retain(|p| p.label == "gemm");
    let ops = layer.ops;
    let step = ExecutionPlan { layers: vec![layer], ..full };
    let c = evaluate(&step, tech, ic, clock)?;
    let gops = ops / c.latency_s / 1e9;
    Ok(PeakMetrics {
        bits,
        gops,
        gops_per_w: gops / (c.energy_j / c.latency_s),
        ops_per_step: ops,
        step_latency_s: c.latency_s,
        step_energy_j: c.energy_j,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn peak(bits: u32) -> Result<PeakMetrics> {
        peak_metrics(
            bits,
            &HardwareConfig::lr_default(),
            &TechProfile::sram16nm(),
            &InterconnectProfile::default(),
            &ClockProfile::default(),
        )
    }

    #[test]
    fn one_full_step() {
        let p = peak(8).unwrap();
        let hw = HardwareConfig::lr_default();
        let lanes = (hw.usable_rows().unwrap() / 576 * 576 * hw.total_caps()) as f64;
        assert_eq!(p.ops_per_step, 2.0 * lanes);
        assert!(p.gops > 0.0 && p.gops_per_w > 0.0);
    }

    #[test]
    fn width_limits() {
        assert!(peak(16).is_ok());
        assert!(matches!(peak(17), Err(Error::Unsupported(_))));
        assert!(matches!(peak(0), Err(Error::Unsupported(_))));
    }

    #[test]
    fn narrower_is_faster() {
        let (a, b, c) = (peak(1).unwrap(), peak(8).unwrap(), peak(16).unwrap());
        assert!(a.gops > b.gops && b.gops > c.gops);
        assert!(a.gops_per_w > b.gops_per_w && b.gops_per_w > c.gops_per_w);
    }
}
