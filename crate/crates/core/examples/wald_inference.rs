//! Wald tests and intervals at several confidence levels.

use brsep::data::{Estimator, Family, FitOptions};
use brsep::inference::wald_summary;
use brsep::separation::fit_ml;
use brsep::simulation::{generate_dataset, DgpConfig};

fn main() -> brsep::Result<()> {
    let data = generate_dataset(&DgpConfig::illustration(Family::Tobit, 4))?;
    let fit = fit_ml(&data, Estimator::Br, &FitOptions::default())?;
    for level in [0.9, 0.95, 0.99] {
        let s = wald_summary(&fit, level)?;
        println!("level {level} (critical value {:.4})", s.critical_value);
        for r in &s.rows {
            let (lo, hi) = r.interval.unwrap();
            println!(
                "  {:<12} {:>8.3}  z = {:>7.3}  p = {:.4}  [{lo:.3}, {hi:.3}]  covers 0: {}",
                r.name,
                r.estimate,
                r.z,
                r.p_value,
                r.covers(0.0)
            );
        }
    }
    Ok(())
}
