//! Constant-time sampling from a fixed distribution, and its `gamma` constant.

use sketchproj::{gamma, AliasTable, RngStream};

fn main() -> sketchproj::Result<()> {
    let p = [0.5, 0.25, 0.125, 0.125];
    let table = AliasTable::new(&p)?;
    let mut rng = RngStream::new(42);
    let draws = 200_000;
    let mut counts = [0usize; 4];
    for _ in 0..draws {
        counts[table.sample(&mut rng)] += 1;
    }
    for (i, (&pi, &c)) in p.iter().zip(&counts).enumerate() {
        println!("i={i} p={pi:.3} empirical={:.4}", c as f64 / draws as f64);
    }
    println!("gamma(p) = {:.4}", gamma(&p)?);
    println!("gamma(uniform over 4) = {:.4}", gamma(&[0.25; 4])?);
    Ok(())
}
