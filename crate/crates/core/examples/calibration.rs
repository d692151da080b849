//! Fits the per-cell compare energy to the ReRAM/SRAM energy ratios of
//! VGG16 and prints the resulting curve.

use apsim::mapper::HardwareConfig;
use apsim::sim::{calibrate_compare_energy, ratio_curve, TECH_RATIO_TARGETS};
use apsim::tech::{InterconnectProfile, E_COMPARE_CELL};
use apsim::workload::ModelSpec;

fn main() -> apsim::Result<()> {
    let vgg = ModelSpec::builtin("vgg16")?;
    let (hw, ic) = (HardwareConfig::lr_default(), InterconnectProfile::default());
    let e = calibrate_compare_energy(&vgg, &hw, &ic, &TECH_RATIO_TARGETS)?;
    println!("fitted compare energy {e:.4e} J per cell (shipped {E_COMPARE_CELL:.4e})");
    let bits: Vec<u32> = TECH_RATIO_TARGETS.iter().map(|t| t.0).collect();
    for ((b, target), got) in TECH_RATIO_TARGETS.iter().zip(ratio_curve(&vgg, &hw, &ic, e, &bits)?) {
        println!("{b} bits  target {target:>5.1}  model {got:>6.2}  ({:+.1}%)", (got / target - 1.0) * 100.0);
    }
    Ok(())
}
