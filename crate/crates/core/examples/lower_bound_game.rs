//! Plays the distinguishing game at the lower-bound scale and at a large-δ
//! control, printing both reports.

use std::time::Instant;

use lintest::{run_distinguish_game, LowerBoundConfig};

fn main() -> lintest::Result<()> {
    let trials = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(300);

    let start = Instant::now();
    let tiny = run_distinguish_game(&LowerBoundConfig::new(100, 0.01, trials, 7))?;
    println!(
        "n=100 C=0.01: success {:.4} [{:.4}, {:.4}], max tv bound {:.4} (cap {:.4}), {:.1?}",
        tiny.success_rate,
        tiny.wilson_interval.low,
        tiny.wilson_interval.high,
        tiny.max_tv_bound,
        tiny.tv_cap,
        start.elapsed()
    );

    let mut control = LowerBoundConfig::new(2, 0.01, trials, 7);
    control.delta_override = Some(1.0);
    let control = run_distinguish_game(&control)?;
    println!(
        "n=2 delta=1: success {:.4} [{:.4}, {:.4}]",
        control.success_rate, control.wilson_interval.low, control.wilson_interval.high
    );
    println!("{}", serde_json::to_string_pretty(&tiny)?);
    Ok(())
}
