//! Tail-stable normal kernels next to the naive ratios they replace.

use brsep::kernel::{normal_cdf, normal_eval, normal_pdf, normal_sf};

fn main() -> brsep::Result<()> {
    println!("{:>6}  {:>22}  {:>22}  {:>22}", "z", "lambda (stable)", "f/(1-F) naive", "log(1-F)");
    for z in [-5.0, -1.0, 0.0, 1.0, 5.0, 10.0, 20.0, 37.0] {
        let e = normal_eval(z)?;
        let naive = normal_pdf(z) / (1.0 - normal_cdf(z));
        println!("{z:>6}  {:>22.15e}  {naive:>22.15e}  {:>22.15e}", e.lambda, brsep::kernel::log_sf(z));
    }
    println!();
    // xi is the lower-tail hazard, sharing the code path with lambda
    let e = normal_eval(-12.0)?;
    println!("xi(-12) = {}, lambda(12) = {}", e.xi, normal_eval(12.0)?.lambda);
    println!("1 - F(12) = {:e}, computed as {:e}", normal_sf(12.0), 1.0 - normal_cdf(12.0));
    Ok(())
}
