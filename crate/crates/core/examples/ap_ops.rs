//! Every operation on every AP variant: emulated values against a direct
//! computation and emulated stages against the closed form.

use apsim::ops::{analytic_cycles, emulate_random};
use apsim::{ApOp, ApVariant};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> apsim::Result<()> {
    let ops = [
        ApOp::Add { m: 8, l: 16 },
        ApOp::Multiply { m: 8, l: 16 },
        ApOp::Reduce { m: 8, l: 16 },
        ApOp::MatMat { m: 8, i: 4, j: 4, u: 4 },
        ApOp::Relu { m: 8, l: 16 },
        ApOp::MaxPool { m: 8, s: 4, k: 4 },
        ApOp::AvgPool { m: 8, s: 4, k: 4 },
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    println!("{:<40} {:>6} {:>6} {:>6}", "op", "1d", "2d", "2dseg");
    for op in ops {
        let mut cells = Vec::new();
        for v in ApVariant::ALL {
            let e = emulate_random(&op, v, &mut rng)?;
            assert!(e.ok(), "{op:?} on {v}");
            cells.push(analytic_cycles(&op, v)?);
        }
        println!("{:<40} {:>6} {:>6} {:>6}", format!("{op:?}"), cells[0], cells[1], cells[2]);
    }
    println!("all results match");
    Ok(())
}
