//! A calibration run driven by a JSON spec, as the CLI would execute it.

use lintest::harness::{execute, ExperimentSpec, Format};

const SPEC: &str = r#"{
    "command": "calibrate",
    "oracle_spec": {
        "family": "corrupted-linear",
        "dim": 10,
        "seed": 4,
        "corruption": { "mass": 0.3, "payload": 1.0 }
    },
    "distribution_spec": { "kind": "standard-gaussian", "dim": 10 },
    "epsilon": 0.1,
    "trials": 200,
    "seed": 1,
    "elide_verdicts": true
}"#;

fn main() -> lintest::Result<()> {
    let spec = ExperimentSpec::from_json(SPEC)?;
    let report = execute(&spec)?;
    let c = report.calibration.as_ref().expect("calibration report");
    println!(
        "reject rate {:.3} (95% CI {:.3}..{:.3}), mean queries {:.1}",
        c.reject_rate, c.reject_interval.low, c.reject_interval.high, c.mean_queries
    );
    println!("reject sites: {:?}", c.reject_sites);
    print!("{}", report.render(Format::Csv)?);
    Ok(())
}
