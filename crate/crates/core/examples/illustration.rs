//! Regenerates the separated single-dataset illustration and compares ML, BR,
//! ML/sub and ML/SST on it.
//!
//!     cargo run --example illustration -- tobit 7

use brsep::data::{Family, FitOptions};
use brsep::report::{compare, render_table, ALL_METHODS};
use brsep::separation::INFINITE_SE_THRESHOLD;
use brsep::simulation::{generate_dataset, DgpConfig};

fn main() -> brsep::Result<()> {
    let mut args = std::env::args().skip(1);
    let family: Family = args.next().as_deref().unwrap_or("poisson").parse()?;
    let seed: u64 = args.next().map_or(1, |s| s.parse().expect("seed must be an integer"));

    let data = generate_dataset(&DgpConfig::illustration(family, seed))?;
    let c = compare(&data, &ALL_METHODS, &FitOptions::default(), 0.95, INFINITE_SE_THRESHOLD)?;
    println!("{}", c.separation);
    println!();
    print!("{}", render_table(&c));
    Ok(())
}
