//! The built-in truth tables, checked and run on an array.

use apsim::lut::LutProgram;
use apsim::CamArray;

fn main() -> apsim::Result<()> {
    for lut in [LutProgram::full_adder(), LutProgram::relu(), LutProgram::max_pool()] {
        lut.verify()?;
        print!("{}", lut.to_text());
        println!("passes {}, expected cells written per run {:.3}\n", lut.passes().len(), lut.expected_writes(0));
    }

    // One bit position of an add: columns C, A, B over all eight states.
    let mut a = CamArray::new(8, 3);
    for r in 0..8 {
        for c in 0..3 {
            a.set(r, c, r >> (2 - c) & 1 == 1);
        }
    }
    LutProgram::full_adder().run(&mut a, &[0, 1, 2], &[])?;
    println!("C A B  ->  carry sum");
    for r in 0..8 {
        println!("{:03b}    ->  {}     {}", r, a.get(r, 0) as u8, a.get(r, 2) as u8);
    }
    println!("{} stages", a.trace().stages());
    Ok(())
}
