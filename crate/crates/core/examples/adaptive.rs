//! Iterative acquisition on model 4: low-discrepancy extension versus the
//! posterior trace-variance heuristic, plus the effect of averaging repeats.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use twolevel::adaptive::{average_traces, ld_schedule, refine_loop, RefineMethod, RefineOptions};
use twolevel::likelihood::{strategy3, Strategy3Options};
use twolevel::model::{builtin_models, ModelKind};
use twolevel::noise::{simulate_trace, stream_seed, uniform_times, NoiseSpec};

fn main() -> twolevel::error::Result<()> {
    let kind = ModelKind::DephasingFid;
    let truth = builtin_models().model(4).expect("model 4");
    let noise = NoiseSpec::Gaussian { sigma: 0.05 };

    let schedules = ld_schedule(20, 8, 10, 30.0)?;
    let gaps: Vec<String> = schedules.iter().map(|s| format!("{:.2}", s.max_gap(30.0))).collect();
    println!("ld max gap per iteration: {}", gaps.join(" "));

    for method in [RefineMethod::LdSampling, RefineMethod::TraceVariance] {
        let mut batch = 0;
        let acquire = |t: &[f64]| {
            batch += 1;
            simulate_trace(&truth, kind, t, noise, stream_seed(1, &[batch]))
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let steps = refine_loop(&schedules[0], acquire, kind, method, 10, &RefineOptions::default(), &mut rng)?;
        println!("{method:?}");
        for s in steps.iter().step_by(2) {
            println!("  iter {:>2}, {:>3} samples: omega {:.4}, gamma {:.4}", s.iteration, s.n_samples, s.fit.omega, s.fit.gamma);
        }
    }

    let times = uniform_times(100, 30.0);
    let noisy = NoiseSpec::Gaussian { sigma: 0.1 };
    for k in [1, 10, 100] {
        let traces = (0..k).map(|i| simulate_trace(&truth, kind, &times, noisy, i)).collect::<Result<Vec<_>, _>>()?;
        let fit = strategy3(&average_traces(&traces)?, kind, &Strategy3Options::fast())?;
        println!("{k:>3} averaged traces: omega {:.4}, gamma {:.4} (true {}, {})", fit.omega, fit.gamma, truth.omega, truth.gamma);
    }
    Ok(())
}
