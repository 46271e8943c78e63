// Temporary parameter sweep for the 2-D Barenblatt acceptance run.
use anisodiff::exponents::ExponentVector;
use anisodiff::grid::{Field, TensorGrid};
use anisodiff::profiles::OrthotropicProfile;
use anisodiff::solver::{evolve, StepConfig};
use std::time::Instant;

fn main() {
    let args: Vec<f64> = std::env::args()
        .skip(1)
        .map(|a| a.parse().unwrap())
        .collect();
    let (c0, eps, ht, l) = (args[0], args[1], args[2], args.get(3).copied().unwrap_or(40.0));
    let t0 = Instant::now();
    let grid = TensorGrid::cube(2, l, 257).unwrap();
    let exp = ExponentVector::orthotropic(2, 1.5).unwrap();
    let profile = OrthotropicProfile::new(2, 1.5, c0).unwrap();
    let pr = profile.clone();
    let u0 = Field::from_cell_averages(grid.clone(), move |x| pr.barenblatt(x, 1.0).unwrap(), 3)
        .unwrap()
        .with_time(1.0);
    let cfg = StepConfig {
        h: ht,
        h_growth: 1.0,
        eps,
        newton_tol: 1e-9,
        max_iters: 60,
        max_backtracks: 40,
        record_stride: 100000,
    };
    let traj = evolve(&u0, 2.0, &cfg, &exp).unwrap();
    let pr = profile.clone();
    let reference = Field::from_cell_averages(grid.clone(), move |x| pr.barenblatt(x, 2.0).unwrap(), 3)
        .unwrap();
    let uf = traj.final_field();
    let mref = reference.integrate();
    // split |u-B| into |x|_inf <= r_split and beyond
    let r_split = 8.0;
    let (mut core, mut tail) = (0.0, 0.0);
    for flat in 0..grid.cell_count() {
        let x = grid.cell_center(flat);
        let d = (uf.values()[flat] - reference.values()[flat]).abs();
        if x.iter().all(|&c| c.abs() <= r_split) {
            core += d;
        } else {
            tail += d;
        }
    }
    let vol = grid.cell_volume();
    core *= vol / mref;
    tail *= vol / mref;
    let m0 = traj.steps.first().unwrap().mass;
    let drift = traj
        .steps
        .iter()
        .map(|s| (s.mass - m0).abs() / m0)
        .fold(0.0f64, f64::max);
    let ystar = (0.75 * c0).powf(1.0 / 3.0);
    println!(
        "C0={c0:<8} eps={eps:<8} ht={ht} L={l} M={:.2} y*={:.3} ({:.2}h) | rel_l1={:.4} core={:.4} tail={:.4} drift={:.5} | {:.0}s",
        profile.mass(),
        ystar,
        ystar / grid.spacing()[0],
        core + tail,
        core,
        tail,
        drift,
        t0.elapsed().as_secs_f64()
    );
}
