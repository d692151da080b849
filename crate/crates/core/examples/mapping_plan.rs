//! How AlexNet is folded onto the limited-resource accelerator, next to
//! the infinite-resource plan.

use apsim::mapper::{plan_ir, plan_lr, HardwareConfig};
use apsim::tech::InterconnectProfile;
use apsim::workload::{ModelSpec, PrecisionConfig};

fn main() -> apsim::Result<()> {
    let m = ModelSpec::builtin("alexnet")?;
    let precs = PrecisionConfig::fixed(8).resolve(&m)?;
    let ic = InterconnectProfile::default();
    let hw = HardwareConfig::lr_default();
    let lr = plan_lr(&m, &precs, &hw, &ic)?;
    let ir = plan_ir(&m, &precs, &hw, &ic)?;
    println!("IR hardware: {} CAPs of {} rows", ir.hw.total_caps(), ir.hw.ap_rows);
    println!("{:<8} {:>6} {:>6} {:>8} {:>8} {:>6}", "layer", "LR", "IR", "CAP use", "lanes", "chunks");
    for (a, b) in lr.layers.iter().zip(&ir.layers) {
        let chunks = a.gemm.as_ref().map_or(0, |g| g.tiling.j_chunks);
        println!(
            "{:<8} {:>6} {:>6} {:>8.3} {:>8.3} {:>6}",
            a.name, a.fold_factor, b.fold_factor, a.utilization, a.lane_utilization, chunks
        );
    }
    println!("total ops {:.3e}", lr.total_ops());
    Ok(())
}
