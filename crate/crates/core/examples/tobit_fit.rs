//! Left-censored Tobit regression by ML and BR, with the adjustment term and
//! information matrices exposed.

use brsep::data::{Estimator, Family, FitOptions, ParamVector};
use brsep::simulation::{generate_dataset, DgpConfig};
use brsep::tobit::{tobit_adjustment, tobit_expected_info, tobit_fit, tobit_observed_info, tobit_score};

fn main() -> brsep::Result<()> {
    let cfg = DgpConfig { n: 60, pi: 0.5, beta: [0.5, 1.0, -1.0], phi: 2.0, family: Family::Tobit, seed: 5 };
    let data = generate_dataset(&cfg)?;
    let censored = data.y().iter().filter(|&&y| y == 0.0).count();
    println!("{} observations, {censored} censored at zero", data.n());

    let opts = FitOptions::default();
    let ml = tobit_fit(&data, Estimator::Ml, &opts)?;
    let br = tobit_fit(&data, Estimator::Br, &opts)?;
    println!("{:<12} {:>16} {:>16}", "", "ML", "BR");
    for (j, name) in ml.parameter_names().iter().enumerate() {
        println!(
            "{name:<12} {:>8.4} ({:.4}) {:>8.4} ({:.4})",
            ml.estimates()[j],
            ml.std_errors[j],
            br.estimates()[j],
            br.std_errors[j]
        );
    }

    let theta: &ParamVector = &br.params;
    let s = tobit_score(&data, theta)?;
    let a = tobit_adjustment(&data, theta)?;
    println!("at BR: score {:.4?}", s.as_slice());
    println!("       adjustment {:.4?}", a.as_slice());
    println!("       score + adjustment {:.1e}", (&s + &a).amax());

    let i = tobit_expected_info(&data, theta)?.assemble();
    let j = tobit_observed_info(&data, theta)?.assemble();
    println!("expected information:\n{i:.3}observed information:\n{j:.3}");
    Ok(())
}
