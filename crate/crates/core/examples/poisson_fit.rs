//! ML and bias-reduced Poisson log-linear fits on a CSV-shaped dataset.

use brsep::data::{load_dataset, Estimator, Family, FitOptions};
use brsep::poisson::{poisson_adjusted_score, poisson_fit, poisson_hat_values};

const DATA: &str = "\
count,dose,treated
2,0.1,0
0,0.4,1
5,0.9,0
1,0.3,1
7,1.2,0
3,0.8,1
0,0.2,0
9,1.5,1
4,1.0,0
6,1.3,1
";

fn main() -> brsep::Result<()> {
    let data = load_dataset(DATA.as_bytes(), "count", Family::Poisson)?;
    let opts = FitOptions::default();
    for est in [Estimator::Ml, Estimator::Br] {
        let fit = poisson_fit(&data, est, &opts)?;
        println!("{} ({} iterations, log-likelihood {:.4})", fit.method.label(), fit.iterations, fit.loglik);
        for (name, (b, se)) in fit.coef_names.iter().zip(fit.params.beta.iter().zip(fit.std_errors.iter())) {
            println!("  {name:<12} {b:>9.4} ({se:.4})");
        }
        let residual = poisson_adjusted_score(&data, &fit.params.beta, est)?;
        println!("  max |adjusted score| = {:.2e}", residual.amax());
    }

    let br = poisson_fit(&data, Estimator::Br, &opts)?;
    let h = poisson_hat_values(&data, &br.params.beta)?;
    println!("hat values at BR estimate sum to {:.6} (= number of coefficients)", h.sum());
    Ok(())
}
