use std::time::Instant;
use planner_core::experiment::{run_quality_experiment, QualityConfig};

fn main() {
    let t0 = Instant::now();
    let cfg = QualityConfig::grid(6, 7);
    let cells = run_quality_experiment(&cfg).unwrap();
    let feasible: Vec<_> = cells.iter().filter(|c| c.feasible).collect();
    let mean_loss = feasible.iter().map(|c| c.loss_pct).sum::<f64>() / feasible.len() as f64;
    let max_loss = feasible.iter().map(|c| c.loss_pct).fold(f64::MIN, f64::max);
    println!("cells: {} feasible: {}", cells.len(), feasible.len());
    println!("mean loss: {mean_loss:.3}%  max loss: {max_loss:.3}%");
    for c in &cells {
        println!("m={} e={} states={} vg={:.1} v4={:.1} mg={:.1} m4={:.1} loss={:.2}%",
            c.machines, c.exploits, c.global_states, c.value_global, c.value_4al,
            c.mean_global, c.mean_4al, c.loss_pct);
    }
    println!("total: {:?}", t0.elapsed());
}
