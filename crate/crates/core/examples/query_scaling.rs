//! Accept-path query counts over an ε sweep.

use lintest::harness::{cmd_query_scaling, Command, ExperimentSpec};
use lintest::OracleSpec;

fn main() -> lintest::Result<()> {
    let mut spec = ExperimentSpec::new(Command::QueryScaling);
    spec.oracle_spec = Some(OracleSpec::linear(10, 1));
    spec.epsilons = Some(vec![0.2, 0.1, 0.05, 0.01]);
    spec.trials = 3;
    spec.seed = Some(1);

    let q = cmd_query_scaling(&spec)?;
    println!(
        "{:>6} {:>8} {:>8} {:>9} {:>12}",
        "eps", "queries", "formula", "ratio", "main ratio"
    );
    for r in &q.rows {
        println!(
            "{:>6} {:>8} {:>8} {:>9.2} {:>12.2}",
            r.epsilon, r.max_queries, r.formula, r.ratio, r.main_loop_ratio
        );
    }
    println!(
        "exact: {}, ratio spread {:.2}x, main-loop spread {:.2}x",
        q.measured_equals_formula, q.ratio_spread, q.main_loop_ratio_spread
    );
    Ok(())
}
