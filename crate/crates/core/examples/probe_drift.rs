// Temporary diagnostic: does the rescaled flow confine mass?
use anisodiff::exponents::ExponentVector;
use anisodiff::grid::{Field, TensorGrid};
use anisodiff::solver::{rescaled_evolve, RescaledConfig, StepConfig};

fn main() {
    // 1-D rescaled flow from a mass-1 bump; the steady state should be the
    // explicit Barenblatt profile with mass 1.
    let exp = ExponentVector::new(vec![1.5]).unwrap();
    let grid = TensorGrid::new(vec![20.0], vec![257]).unwrap();
    let v0 = Field::from_fn(grid.clone(), |y| {
        (1.0 / (2.0 * std::f64::consts::PI).sqrt()) * (-(y[0] * y[0]) / 2.0).exp()
    })
    .unwrap();
    println!("v0 mass {:.6} sup {:.4}", v0.integrate(), v0.max_value());
    let rcfg = RescaledConfig::new(exp, 0.05, 1.0).unwrap();
    let cfg = StepConfig {
        h: 0.05,
        h_growth: 1.0,
        eps: 1e-6,
        newton_tol: 1e-10,
        max_iters: 60,
        max_backtracks: 40,
        record_stride: 20,
    };
    let traj = rescaled_evolve(&v0, 6.0, &rcfg, &cfg).unwrap();
    for (t, f) in traj.times.iter().zip(&traj.fields) {
        println!(
            "tau {t:.2}: mass {:.6} sup {:.5} v(5) {:.4e}",
            f.integrate(),
            f.max_value(),
            f.values()[f.grid().cell_count() / 2 + (5.0 / f.grid().spacing()[0]) as usize]
        );
    }
    // expected steady state: explicit profile with mass 1
    let p = anisodiff::profiles::OrthotropicProfile::with_mass(1, 1.5, 1.0).unwrap();
    println!(
        "target: sup {:.5} F(5) {:.4e} (C0 = {:.4})",
        p.eval(&[0.0]),
        p.eval(&[5.0]),
        p.c0
    );
}
