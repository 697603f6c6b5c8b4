//! Driven Rabi oscillations: signal across the damping regimes and recovery
//! of the Rabi frequency, dephasing rate and angles.

use twolevel::likelihood::{angles_from_alphas, strategy3, Strategy3Options};
use twolevel::model::{phi_x3, ModelKind, SystemParams};
use twolevel::noise::{simulate_trace, uniform_times, NoiseSpec};

fn main() -> twolevel::error::Result<()> {
    let gamma = 0.4;
    // underdamped, critical (Ω = γ/2) and overdamped
    for rabi in [1.0, gamma / 2.0, 0.1] {
        let samples: Vec<String> = [0.0, 2.0, 5.0, 10.0].iter().map(|&t| format!("{:.4}", phi_x3(rabi, gamma, t))).collect();
        println!("rabi {rabi:.2}, gamma {gamma}: phi at t = 0, 2, 5, 10 -> {}", samples.join(" "));
    }

    let truth = SystemParams::new(0.7551, 0.0533).with_angles(1.0, 0.6);
    let kind = ModelKind::DrivenRabi;
    let trace = simulate_trace(&truth, kind, &uniform_times(100, 30.0), NoiseSpec::Gaussian { sigma: 0.02 }, 3)?;
    let fit = strategy3(&trace, kind, &Strategy3Options::fast())?;
    let (ti, tm) = angles_from_alphas(fit.alpha[0], fit.alpha[1], kind)?;
    println!("rabi frequency {:.4} (true {}), gamma {:.4} (true {})", fit.omega, truth.omega, fit.gamma, truth.gamma);
    println!("theta_i {ti:.3} (true {}), theta_m {tm:.3} (true {})", truth.theta_i, truth.theta_m);
    Ok(())
}
