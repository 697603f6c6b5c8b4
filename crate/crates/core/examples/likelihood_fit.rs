//! Marginal-likelihood fit with noise, uncertainty and angle estimates.

use twolevel::likelihood::{strategy3, Strategy3Options};
use twolevel::model::{builtin_models, ModelKind};
use twolevel::noise::{simulate_trace, uniform_times, NoiseSpec};

fn main() -> twolevel::error::Result<()> {
    let kind = ModelKind::DephasingFid;
    for (model, sigma) in [(1, 0.01), (9, 0.05), (4, 0.05)] {
        let truth = builtin_models().model(model).expect("built-in model");
        let trace = simulate_trace(&truth, kind, &uniform_times(100, 30.0), NoiseSpec::Gaussian { sigma }, 5)?;
        let fit = strategy3(&trace, kind, &Strategy3Options::default())?;
        println!(
            "model {model}: omega {:.4} +- {:.4} (true {}), gamma {:.4} +- {:.4} (true {}), sigma_est {:.4} (true {sigma})",
            fit.omega, fit.d_omega, truth.omega, fit.gamma, fit.d_gamma, truth.gamma, fit.sigma_est
        );
        println!("  angles {:?} {:?}, amplitudes {:.3?}", fit.theta_i_est, fit.theta_m_est, fit.alpha);
    }
    Ok(())
}
