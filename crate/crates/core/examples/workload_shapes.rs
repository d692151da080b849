//! Layer shapes, GEMM dimensions, MAC counts and precision averages.

use apsim::workload::{average_precision, im2col_dims, macs_of, total_macs, ModelSpec, PrecisionSet};

fn main() -> apsim::Result<()> {
    let m = ModelSpec::builtin("alexnet")?;
    for l in m.layers.iter().filter(|l| l.kind.is_gemm()) {
        let g = im2col_dims(l)?;
        println!("{:<6} out {:?}  kernel {}x{}  patches {}x{}  {} MACs", l.name, l.output()?, g.k.0, g.k.1, g.p.0, g.p.1, macs_of(l));
    }
    for name in ModelSpec::builtin_names() {
        let m = ModelSpec::builtin(name)?;
        println!("{name:<9} {:>3} layers  {:.3} GMACs  {:.1} M weights", m.layers.len(), total_macs(&m) as f64 / 1e9, m.weight_count() as f64 / 1e6);
    }
    for (name, cfg) in &PrecisionSet::resnet18_mixed().configs {
        println!("resnet18 {name:<7} average {:.2} bits", average_precision(cfg)?);
    }
    Ok(())
}
