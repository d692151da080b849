//! End-to-end cost of VGG16 on both accelerator configurations.

use apsim::mapper::{HardwareConfig, Mode};
use apsim::sim::simulate;
use apsim::tech::{ClockProfile, InterconnectProfile, TechProfile};
use apsim::workload::{ModelSpec, PrecisionConfig};

fn main() -> apsim::Result<()> {
    let m = ModelSpec::builtin("vgg16")?;
    let (ic, clock) = (InterconnectProfile::default(), ClockProfile::default());
    for mode in [Mode::Lr, Mode::Ir] {
        let hw = HardwareConfig { mode, ..HardwareConfig::lr_default() };
        for tech in [TechProfile::sram16nm(), TechProfile::reram16nm()] {
            let r = simulate(&m, &PrecisionConfig::fixed(8), &hw, &tech, &ic, &clock)?;
            println!(
                "{mode} {:<9} {:.4} J  {:.3} ms  {:.0} GOPS  {:.1} GOPS/W  {:.3e} GOPS/W/mm2",
                r.tech,
                r.energy_j,
                r.latency_s * 1e3,
                r.gops,
                r.gops_per_w,
                r.gops_per_w_per_mm2
            );
            let s = r.energy_share;
            println!("      energy shares: gemm {:.4} pooling {:.2e} relu {:.2e} movement {:.4}", s.gemm, s.pooling, s.relu, s.data_movement);
        }
    }
    Ok(())
}
