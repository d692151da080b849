//! Compare, selective write and the two read modes on a small CAM array.

use apsim::{CamArray, KeyMask};

fn main() -> apsim::Result<()> {
    let mut a = CamArray::from_dump("0110\n1011\n0111\n1000\n")?;

    // Rows whose columns 1 and 2 hold 1 and 1.
    let key = KeyMask::horizontal([(1, true), (2, true)]);
    let tags = a.compare(&key)?;
    println!("tags after compare      {tags}");

    // Clear column 3 in the tagged rows only.
    a.selective_write(&KeyMask::horizontal([(3, false)]), &tags)?;
    print!("array after write\n{}", a.dump());

    let col = a.read_bit_sequential(0)?;
    let row = a.read_word_sequential(1)?;
    println!("column 0 {col}, row 1 {row}");
    println!("row 2 as a number {}", a.field_value(2, 0..4));

    let t = a.trace();
    println!(
        "{} compares, {} writes, {} reads; {} cells compared, {} written",
        t.n_compare, t.n_write, t.n_read, t.active_cells_compared, t.cells_written
    );
    Ok(())
}
