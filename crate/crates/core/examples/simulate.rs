//! Simulates one trace per model kind and noise regime and prints summary
//! statistics, then writes a trace as CSV to stdout.

use twolevel::model::{builtin_models, ideal_signal, ModelKind};
use twolevel::noise::{gaussian_sigma_from_ensemble, simulate_trace, uniform_times, NoiseSpec};

fn main() -> twolevel::error::Result<()> {
    let params = builtin_models().model(1).expect("model 1");
    let times = uniform_times(100, 30.0);
    let regimes = [NoiseSpec::None, NoiseSpec::Gaussian { sigma: 0.05 }, NoiseSpec::Projection { ne: 100 }];

    for kind in [ModelKind::DephasingFid, ModelKind::DrivenRabi] {
        let p = if kind == ModelKind::DrivenRabi { params.with_angles(1.0, 1.0) } else { params };
        for noise in regimes {
            let trace = simulate_trace(&p, kind, &times, noise, 7)?;
            let rms = (trace
                .times
                .iter()
                .zip(&trace.values)
                .map(|(&t, &d)| (d - ideal_signal(&p, kind, t)).powi(2))
                .sum::<f64>()
                / trace.len() as f64)
                .sqrt();
            println!("{kind:>4} {noise:<16} residual rms {rms:.4}");
        }
    }
    println!("ensemble of 1e4 systems ~ gaussian sigma {:.5}", gaussian_sigma_from_ensemble(10_000)?);

    let trace = simulate_trace(&params, ModelKind::DephasingFid, &times[..5], NoiseSpec::Gaussian { sigma: 0.05 }, 1)?;
    trace.write_csv(std::io::stdout())
}
