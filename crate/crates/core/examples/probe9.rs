// Temporary diagnostic for the steady-profile run.
use anisodiff::exponents::ExponentVector;
use anisodiff::grid::{Field, TensorGrid};
use anisodiff::solver::{steady_profile, RescaledConfig, StepConfig};

fn main() {
    let args: Vec<f64> = std::env::args().skip(1).map(|a| a.parse().unwrap()).collect();
    let (l1, l2, eps, tau_step) = (args[0], args[1], args[2], args[3]);
    let exp = ExponentVector::new(vec![1.4, 1.8]).unwrap();
    let grid = TensorGrid::new(vec![l1, l2], vec![257, 257]).unwrap();
    let mass = 1.0;
    let (a, b) = (4.8, 1.6);
    let norm = mass / (2.0 * std::f64::consts::PI * a * b);
    let v0 = Field::from_fn(grid.clone(), move |y| {
        norm * (-(y[0] / a).powi(2) / 2.0 - (y[1] / b).powi(2) / 2.0).exp()
    })
    .unwrap();
    let rcfg = RescaledConfig::new(exp.clone(), tau_step, 1.0).unwrap();
    let cfg = StepConfig {
        h: tau_step,
        h_growth: 1.0,
        eps,
        newton_tol: 1e-9,
        max_iters: 60,
        max_backtracks: 40,
        record_stride: 1000,
    };
    match steady_profile(&v0, &rcfg, &cfg, 1e-4, 60.0) {
        Ok((profile, traj)) => {
            println!(
                "converged at tau = {:.2} after {} steps, mass = {:.5}, sup = {:.5e}",
                traj.final_time(),
                traj.steps.len(),
                profile.integrate(),
                profile.max_value()
            );
            for axis in 0..2 {
                let prof = profile.axis_profile(axis);
                print!("axis {axis}: ");
                for &(c, v) in prof.iter().step_by(16) {
                    print!("({c:.1}, {v:.2e}) ");
                }
                println!();
                // local log-log slopes
                print!("  slopes: ");
                let pts: Vec<_> = prof.iter().filter(|&&(c, v)| c > 0.0 && v > 0.0).collect();
                for w in pts.windows(2).step_by(8) {
                    let s = (w[1].1 / w[0].1).ln() / (w[1].0 / w[0].0).ln();
                    print!("({:.1}: {s:.2}) ", w[0].0);
                }
                println!();
            }
        }
        Err(e) => println!("steady failed: {e}"),
    }
}
