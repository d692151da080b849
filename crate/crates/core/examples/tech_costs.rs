//! Energy, latency and area of the same activity on SRAM and ReRAM.

use apsim::mapper::HardwareConfig;
use apsim::ops::expected_trace;
use apsim::tech::{area_of, energy_of, latency_of, ClockProfile, InterconnectProfile, TechProfile};
use apsim::{ApOp, ApVariant};

fn main() -> apsim::Result<()> {
    let (ic, clock) = (InterconnectProfile::default(), ClockProfile::default());
    let t = expected_trace(&ApOp::Multiply { m: 8, l: 9600 }, ApVariant::Ap2D)?;
    println!("8-bit multiply over 4800 rows: {} stages, {:.0} cells written", t.stages(), t.cells_written);
    let hw = HardwareConfig::lr_default();
    for tech in [TechProfile::sram16nm(), TechProfile::reram16nm()] {
        println!(
            "{:<10} energy {:.3e} J  latency {:.3e} s  LR area {:.1} mm2",
            tech.name,
            energy_of(&t, &tech, &ic)?,
            latency_of(&t, &tech, &clock),
            area_of(&hw, &tech)
        );
    }
    let half = TechProfile::sram16nm().apply_voltage(0.5)?;
    println!("sram at 0.5 V: e_write {:.2e} J, bit error rate {}", half.e_write_cell, half.p_bit_error);
    println!("1 Mbit over the interconnect: {:.3e} J, {:.3e} s", 1e6 * ic.energy_per_bit(), ic.latency(1e6));
    Ok(())
}
