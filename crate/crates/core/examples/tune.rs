// Temporary tuning probe for the heavy experiments (not part of the deliverable).
use std::time::Instant;

fn show(name: &str, reports: &[anisodiff::verify::CheckReport], t0: Instant) {
    println!("== {name} ({:.1}s)", t0.elapsed().as_secs_f64());
    for r in reports {
        println!("  {}", r.summary_line());
        for (k, v) in &r.measured {
            println!("    {k} = {v:.6e}");
        }
    }
}

fn main() {
    let which: Vec<String> = std::env::args().skip(1).collect();
    let all = which.is_empty();
    let has = |s: &str| all || which.iter().any(|w| w == s);

    if has("5a") {
        let t = Instant::now();
        let r = anisodiff::experiments::criterion_5_barenblatt_1d().unwrap();
        show("criterion 5 (1d)", &r, t);
    }
    if has("5b") {
        let t = Instant::now();
        let r = anisodiff::experiments::criterion_5_barenblatt_2d().unwrap();
        show("criterion 5 (2d)", &r, t);
    }
    if has("6a") {
        let t = Instant::now();
        let r = match anisodiff::experiments::criterion_6_smoothing_p15() { Ok(r) => r, Err(e) => { println!("6a error: {e}"); return; } };
        show("criterion 6 (p=1.5)", &r, t);
    }
    if has("6b") {
        let t = Instant::now();
        let r = anisodiff::experiments::criterion_6_smoothing_p18().unwrap();
        show("criterion 6 (p=1.8)", &r, t);
    }
    if has("7") {
        let t = Instant::now();
        let r = anisodiff::experiments::criterion_7_comparison_bundle().unwrap();
        show("criterion 7", &r, t);
    }
    if has("8") {
        let t = Instant::now();
        let r = anisodiff::experiments::criterion_8_concentration().unwrap();
        show("criterion 8", &r, t);
    }
    if has("9") {
        let t = Instant::now();
        let r = anisodiff::experiments::criterion_9_steady_profile().unwrap();
        show("criterion 9", &r.reports, t);
    }
    if has("10") {
        let t = Instant::now();
        let r = anisodiff::experiments::criterion_10_asymptotics().unwrap();
        show("criterion 10", &r, t);
    }
}
