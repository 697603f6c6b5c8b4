//! Behaviour of the adaptive acquisition schemes on the model-1 and model-4
//! scenarios.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use twolevel::adaptive::{
    default_candidates, default_posterior_grid, ld_schedule, prediction_variance, refine_loop, sample_posterior,
    trace_variance_schedule, RefineMethod, RefineOptions,
};
use twolevel::harness::median;
use twolevel::model::{builtin_models, ModelKind};
use twolevel::noise::{simulate_trace, stream_seed, NoiseSpec};

const FID: ModelKind = ModelKind::DephasingFid;

#[test]
fn posterior_cloud_after_25_samples_surrounds_truth() {
    let truth = builtin_models().model(1).unwrap();
    let times: Vec<f64> = (0..25).map(|n| 1.2 * n as f64).collect();
    let tr = simulate_trace(&truth, FID, &times, NoiseSpec::Gaussian { sigma: 0.05 }, 31).unwrap();
    let s = sample_posterior(&tr, FID, &default_posterior_grid(), 200, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
    let w = median(s.params.iter().map(|p| p[0]));
    let g = median(s.params.iter().map(|p| p[1]));
    assert!((w - 1.0).abs() < 0.05 && (g - 0.1).abs() < 0.05, "cloud median ({w}, {g})");
    let near = s.params.iter().filter(|p| (p[0] - 1.0).abs() < 0.1 && (p[1] - 0.1).abs() < 0.1).count();
    assert!(near >= 180, "{near} of 200 samples near the truth");
}

#[test]
fn variance_envelope_peaks_near_three_half_periods() {
    let truth = builtin_models().model(1).unwrap();
    let times: Vec<f64> = (0..25).map(|n| 1.2 * n as f64).collect();
    let tr = simulate_trace(&truth, FID, &times, NoiseSpec::Gaussian { sigma: 0.05 }, 31).unwrap();
    let s = sample_posterior(&tr, FID, &default_posterior_grid(), 200, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
    let w_bar = s.params.iter().map(|p| p[0]).sum::<f64>() / s.params.len() as f64;
    let grid: Vec<f64> = (0..3000).map(|k| k as f64 * 0.01).collect();
    let v = prediction_variance(&s, FID, [0.0, 1.0], &grid);
    let arg = (0..v.len()).fold(0, |b, k| if v[k] > v[b] { k } else { b });
    let in_units = grid[arg] * w_bar / std::f64::consts::PI;
    assert!((2.0..=4.0).contains(&in_units), "global maximum at {in_units} pi/omega");
    let next = trace_variance_schedule(&s, FID, [0.0, 1.0], &default_candidates(256, 30.0), 8).unwrap();
    assert!(!next.is_empty() && next.len() <= 8);
}

fn final_errors(method: RefineMethod, runs: usize) -> Vec<Vec<[f64; 2]>> {
    let truth = builtin_models().model(4).unwrap();
    let noise = NoiseSpec::Gaussian { sigma: 0.05 };
    let initial = ld_schedule(20, 8, 0, 30.0).unwrap().remove(0);
    (0..runs)
        .map(|run| {
            let mut batch = 0u64;
            let acquire = |t: &[f64]| {
                batch += 1;
                simulate_trace(&truth, FID, t, noise, stream_seed(77, &[run as u64, batch]))
            };
            let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(78, &[run as u64]));
            refine_loop(&initial, acquire, FID, method, 10, &RefineOptions::default(), &mut rng)
                .unwrap()
                .iter()
                .map(|s| [(s.fit.omega - truth.omega).abs() / truth.omega, (s.fit.gamma - truth.gamma).abs() / truth.gamma])
                .collect()
        })
        .collect()
}

/// Median over runs of the summed relative error at each iteration.
fn median_curve(errs: &[Vec<[f64; 2]>]) -> Vec<f64> {
    (0..errs[0].len()).map(|i| median(errs.iter().map(|e| e[i][0] + e[i][1]))).collect()
}

#[test]
fn refinement_improves_and_ld_holds_its_own() {
    let runs = 30;
    let ld = median_curve(&final_errors(RefineMethod::LdSampling, runs));
    let var = median_curve(&final_errors(RefineMethod::TraceVariance, runs));
    eprintln!("ld {ld:?}\nvariance {var:?}");
    // downward trend: the last three iterations beat the first three
    for curve in [&ld, &var] {
        let head: f64 = curve[..3].iter().sum();
        let tail: f64 = curve[curve.len() - 3..].iter().sum();
        assert!(tail < head, "{curve:?}");
    }
    assert!(ld.last().unwrap() <= var.last().unwrap(), "ld {ld:?} vs variance {var:?}");
}
