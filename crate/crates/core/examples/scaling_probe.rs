use planner_core::experiment::{fit_power_law, run_scaling_experiment, ScalingConfig};

fn main() {
    let cfg = ScalingConfig::default();
    let cells = run_scaling_experiment(&cfg).unwrap();
    for c in &cells {
        println!(
            "m={} secs={:.4} value={:.1} solves={} hits={} timed_out={}",
            c.machines, c.seconds, c.value, c.pomdp_solves, c.cache_hits, c.timed_out
        );
    }
    let pts: Vec<(f64, f64)> = cells.iter().map(|c| (c.machines as f64, c.seconds)).collect();
    println!("fitted exponent: {:.3}", fit_power_law(&pts));
}
