//! Per-layer mixed precision against a fixed 8-bit baseline.

use super::simulate;
use crate::error::Result;
use crate::mapper::HardwareConfig;
use crate::tech::{ClockProfile, InterconnectProfile, TechProfile};
use crate::workload::{average_precision, ModelSpec, PrecisionConfig, PrecisionSet};
use rayon::prelude::*;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixedRow {
    pub name: String,
    pub avg_bits: f64,
    pub energy_j: f64,
    pub latency_s: f64,
    pub edp_js: f64,
    /// Baseline energy over this configuration's energy; above 1 is cheaper.
    pub energy_factor: f64,
    /// Latency over baseline latency.
    pub latency_norm: f64,
    /// EDP over baseline EDP.
    pub edp_ratio: f64,
}

/// Costs every configuration of `set` and normalizes it against fixed
/// 8-bit inference of the same model on the same hardware.
pub fn evaluate_mixed_precision(
    model: &ModelSpec,
    set: &PrecisionSet,
    hw: &HardwareConfig,
    tech: &TechProfile,
    ic: &InterconnectProfile,
    clock: &ClockProfile,
) -> Result<Vec<MixedRow>> {
    let base = simulate(model, &PrecisionConfig::fixed(8), hw, tech, ic, clock)?;
    set.configs
        .par_iter()
        .map(|(name, cfg)| {
            let r = simulate(model, cfg, hw, tech, ic, clock)?;
            Ok(MixedRow {
                name: name.clone(),
                avg_bits: average_precision(cfg)?,
                energy_j: r.energy_j,
                latency_s: r.latency_s,
                edp_js: r.edp_js,
                energy_factor: base.energy_j / r.energy_j,
                latency_norm: r.latency_s / base.latency_s,
                edp_ratio: r.edp_js / base.edp_js,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn int8_is_the_baseline_and_lengths_are_checked() {
        let m = ModelSpec::builtin("resnet18").unwrap();
        let run = |set: &PrecisionSet| {
            evaluate_mixed_precision(
                &m,
                set,
                &HardwareConfig::lr_default(),
                &TechProfile::sram16nm(),
                &InterconnectProfile::default(),
                &ClockProfile::default(),
            )
        };
        let set = PrecisionSet { configs: vec![("int8".into(), PrecisionConfig::fixed(8))] };
        let r = &run(&set).unwrap()[0];
        assert_eq!((r.energy_factor, r.latency_norm, r.edp_ratio), (1.0, 1.0, 1.0));
        let short = PrecisionSet { configs: vec![("short".into(), PrecisionConfig::uniform_list(&[4; 18]))] };
        assert!(run(&short).is_err());
    }
}
