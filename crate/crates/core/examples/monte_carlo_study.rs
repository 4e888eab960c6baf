//! A small Monte Carlo study: how often ML diverges and how BR behaves,
//! across sample sizes and strengths of the x2/x3 association.
//!
//!     cargo run --release --example monte_carlo_study -- 500

use brsep::data::Family;
use brsep::simulation::{run_study_with_progress, StudyConfig};

fn main() -> brsep::Result<()> {
    let reps = std::env::args().nth(1).map_or(200, |s| s.parse().expect("reps must be an integer"));
    let cfg = StudyConfig {
        grid_n: vec![25, 100],
        grid_pi: vec![0.0, 0.5],
        reps,
        threads: 4,
        ..StudyConfig::full(Family::Poisson, 2024)
    };
    let out = run_study_with_progress(&cfg, |m| eprintln!("done n = {}, pi = {}", m.n, m.pi))?;
    println!("{:>4} {:>5} {:>8} {:>10} {:>10} {:>10}", "n", "pi", "P(inf)", "bias BR", "var BR", "cover BR");
    for m in &out.metrics {
        println!(
            "{:>4} {:>5} {:>8.3} {:>10.4} {:>10.4} {:>10.3}",
            m.n, m.pi, m.p_infinite_ml, m.bias_br_uncond, m.var_br_uncond, m.coverage_br_uncond
        );
    }
    out.write_metrics_csv(std::io::stdout())?;
    Ok(())
}
