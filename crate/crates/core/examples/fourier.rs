//! Fourier-domain estimation: spectrum, peak location and the two peak-based
//! estimators, on noisy data and on the closed-form peak.

use twolevel::model::{builtin_models, ModelKind};
use twolevel::noise::{simulate_trace, uniform_times, NoiseSpec};
use twolevel::spectral::{
    center_rescale, closed_form_peak, continuous_ft, default_omega_grid, locate_peak, strategy1, strategy2,
    DEFAULT_GRID_POINTS,
};

fn main() -> twolevel::error::Result<()> {
    let truth = builtin_models().model(3).expect("model 3");
    let times = uniform_times(100, 30.0);
    let trace = simulate_trace(&truth, ModelKind::DephasingFid, &times, NoiseSpec::Gaussian { sigma: 0.02 }, 11)?;

    let rescaled = center_rescale(&trace.values)?;
    let grid = default_omega_grid(trace.len(), 30.0, DEFAULT_GRID_POINTS);
    let spectrum = continuous_ft(&rescaled, &trace.times, &grid);
    let peak = locate_peak(&spectrum)?;
    println!("peak: omega* {:.4}, power {:.3}, half-width {:.4}", peak.omega_star, peak.p_star, peak.d);

    let analytic = closed_form_peak(truth.omega, truth.gamma)?;
    println!("analytic peak: omega* {:.4}, half-width {:.4}", analytic.omega_star, analytic.d);

    for (name, est) in [("strategy 1", strategy1(&peak)?), ("strategy 2", strategy2(&peak)?)] {
        println!("{name}: omega {:.4} (true {}), gamma {:.4} (true {})", est.omega, truth.omega, est.gamma, truth.gamma);
    }
    Ok(())
}
