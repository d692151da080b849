//! ResNet18 with per-layer precisions, normalized to 8-bit inference.

use apsim::mapper::HardwareConfig;
use apsim::sim::evaluate_mixed_precision;
use apsim::tech::{ClockProfile, InterconnectProfile, TechProfile};
use apsim::workload::{ModelSpec, PrecisionSet};

fn main() -> apsim::Result<()> {
    let rows = evaluate_mixed_precision(
        &ModelSpec::builtin("resnet18")?,
        &PrecisionSet::resnet18_mixed(),
        &HardwareConfig::lr_default(),
        &TechProfile::sram16nm(),
        &InterconnectProfile::default(),
        &ClockProfile::default(),
    )?;
    println!("{:<7} {:>5} {:>8} {:>8} {:>8}", "config", "bits", "energy", "latency", "EDP");
    for r in rows {
        println!("{:<7} {:>5.2} {:>7.2}x {:>8.4} {:>8.3}", r.name, r.avg_bits, r.energy_factor, r.latency_norm, r.edp_ratio);
    }
    Ok(())
}
