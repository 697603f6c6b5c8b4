//! Fisher information of the damped cosine and the gap between the
//! likelihood estimator's spread and the Cramér–Rao bound.

use twolevel::fisher::fisher_matrix;
use twolevel::harness::crb_sweep;
use twolevel::model::SystemParams;
use twolevel::noise::uniform_times;

fn main() -> twolevel::error::Result<()> {
    let truth = SystemParams::new(1.0, 0.1);
    let fisher = fisher_matrix(&truth, &uniform_times(100, 30.0), 0.1)?;
    let inv = fisher.inverse()?;
    println!("I = {:.1?}", fisher.as_array());
    println!("bound: std(omega) >= {:.5}, std(gamma) >= {:.5}", inv[0][0].sqrt(), inv[1][1].sqrt());

    for row in crb_sweep(&truth, &[100, 1000, 10_000], 200, 1)? {
        let g = row.gap;
        println!(
            "Ne {:>6}: var(omega) {:.3e} vs bound {:.3e}, var(gamma) {:.3e} vs bound {:.3e}, min_eig {:+.2e}",
            row.ne, g.covariance[0][0], g.inv_fisher[0][0], g.covariance[1][1], g.inv_fisher[1][1], g.min_eig
        );
    }
    Ok(())
}
