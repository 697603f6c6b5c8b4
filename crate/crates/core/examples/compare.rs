//! Small Monte-Carlo comparison of the three strategies across the built-in
//! models, with the min/median/max summary and a bias histogram.

use twolevel::harness::{bias_histogram, run_comparison, ExperimentConfig};
use twolevel::noise::NoiseSpec;

fn main() -> twolevel::error::Result<()> {
    let noise = NoiseSpec::Gaussian { sigma: 0.05 };
    let cfg = ExperimentConfig { noise_sweep: vec![noise, NoiseSpec::Projection { ne: 1000 }], runs: 20, seed: 3, ..Default::default() };
    let stats = run_comparison(&cfg)?;
    for row in stats.summary() {
        println!(
            "{:<10} {:>7} strategy {}: e_omega median {:.4} [{:.4}, {:.4}], e_gamma median {:.4}",
            row.noise_kind, row.noise_level, row.strategy, row.e_omega.median, row.e_omega.min, row.e_omega.max, row.e_gamma.median
        );
    }
    stats.write_csv(std::io::stdout().lock())?;

    let cfg = ExperimentConfig { runs: 200, ..cfg };
    for h in bias_histogram(&cfg, 1, &NoiseSpec::Gaussian { sigma: 0.01 }, 12)? {
        println!(
            "strategy {}: mean omega {:.5} +- {:.5}, counts {:?}",
            h.strategy,
            h.omega.mean,
            h.omega.standard_error(),
            h.omega.counts
        );
    }
    Ok(())
}
