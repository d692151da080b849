//! Peak convolution throughput and efficiency across word widths.

use apsim::mapper::HardwareConfig;
use apsim::sim::{peak_metrics, PEAK_MAX_BITS};
use apsim::tech::{ClockProfile, InterconnectProfile, TechProfile};

fn main() -> apsim::Result<()> {
    let hw = HardwareConfig::lr_default();
    for tech in [TechProfile::sram16nm(), TechProfile::reram16nm()] {
        for bits in [1, 2, 4, 8, PEAK_MAX_BITS] {
            let p = peak_metrics(bits, &hw, &tech, &InterconnectProfile::default(), &ClockProfile::default())?;
            println!(
                "{:<9} {bits:>2} bits  {:>8.1} GOPS  {:>8.1} GOPS/W  step {:.2} us",
                tech.name,
                p.gops,
                p.gops_per_w,
                p.step_latency_s * 1e6
            );
        }
    }
    Ok(())
}
