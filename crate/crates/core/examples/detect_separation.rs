//! Separation diagnosis: rank of the design on the positive responses, the
//! separating direction and the zero responses it reaches.

use brsep::data::{load_dataset, Family};
use brsep::separation::detect_separation;

// every zero count has group = 1
const SEPARATED: &str = "\
y,x,group
3,0.5,0
1,-0.2,0
4,1.1,0
0,0.3,1
0,-0.7,1
2,0.0,0
0,0.9,1
";

const OVERLAPPING: &str = "\
y,x,group
3,0.5,0
1,-0.2,1
4,1.1,0
0,0.3,1
0,-0.7,0
2,0.0,1
";

fn main() -> brsep::Result<()> {
    for (label, csv) in [("separated", SEPARATED), ("overlapping", OVERLAPPING)] {
        let data = load_dataset(csv.as_bytes(), "y", Family::Poisson)?;
        let report = detect_separation(&data)?;
        println!("== {label}\n{report}\n");
    }
    Ok(())
}
