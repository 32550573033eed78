use std::path::PathBuf;
use std::process::Command;

// `cargo test` builds every example next to the test binaries.
fn example_path(name: &str) -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().unwrap().parent().unwrap();
    profile_dir
        .join("examples")
        .join(format!("{name}{}", std::env::consts::EXE_SUFFIX))
}

fn run(name: &str, args: &[&str]) -> String {
    let out = Command::new(example_path(name))
        .args(args)
        .output()
        .unwrap_or_else(|e| panic!("{name}: {e}"));
    assert!(
        out.status.success(),
        "{name} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn every_example_runs() {
    for name in [
        "gaussian_toolkit",
        "gaussian_additivity",
        "distribution_free",
        "linearity",
        "self_correction",
        "query_scaling",
        "calibrate",
        "empirical_data",
    ] {
        assert!(!run(name, &[]).is_empty(), "{name} printed nothing");
    }
}

#[test]
fn lower_bound_game_accepts_a_trial_count() {
    assert!(!run("lower_bound_game", &["50"]).is_empty());
}
