//! Using a CSV dataset as the unknown distribution `D`.

use lintest::distro::format_points_csv;
use lintest::{run_df_additivity, FunctionOracle, SampleDistribution, SeedState, TesterConfig};

fn main() -> lintest::Result<()> {
    let n = 4;
    let mut rng = SeedState::new(8);
    let rows: Vec<Vec<f64>> = (0..50)
        .map(|_| {
            rng.standard_normal_vec(n)
                .iter()
                .map(|v| 3.0 * v + 1.0)
                .collect()
        })
        .collect();
    let path = std::env::temp_dir().join("lintest_empirical_example.csv");
    std::fs::write(&path, format_points_csv(&rows)).map_err(|source| lintest::Error::Io {
        path: path.clone(),
        source,
    })?;

    let mut d = SampleDistribution::load_empirical(&path, 1)?;
    println!("first draw from {}: {:?}", path.display(), d.draw()?);

    let w = SeedState::new(9).standard_normal_vec(n);
    let cfg = TesterConfig::new(0.1)?.with_seed(2);
    let v = run_df_additivity(&FunctionOracle::linear(w)?, &mut d, &cfg)?;
    println!(
        "linear function: {:?} after {} queries",
        v.outcome, v.queries_used
    );
    Ok(())
}
