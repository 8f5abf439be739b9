use std::fs;

use chanprob_cli::commands;
use chanprob_cli::ExperimentConfig;
use proptest::prelude::*;
use tempfile::TempDir;

fn run(text: &str, workers: usize, dir: &std::path::Path) -> Vec<Vec<u8>> {
    let mut cfg = ExperimentConfig::from_toml(text).unwrap();
    cfg.workers = workers;
    cfg.output_dir = dir.to_path_buf();
    let mut files = commands::simulate(&cfg).unwrap();
    files.sort();
    files.iter().map(|f| fs::read(f).unwrap()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn simulate_output_is_a_function_of_the_config(seed in 0u64..=i64::MAX as u64, graph_seed in 0u64..1000, pairs in 1usize..4, parts in 1u32..3, dynamic in any::<bool>()) {
        let text = format!(
            "seed = {seed}\npairs = {pairs}\nparts = [{parts}]\nmode = \"{}\"\nmax_attempts = 20\n\
             [amounts]\nmin = 0.1\nmax = 0.3\nstep = 0.2\nunit = \"capacity_fraction\"\n\
             [snapshot]\nnodes = 8\nchannels = 14\nconstant_capacity = 1000\nseed = {graph_seed}\n",
            if dynamic { "dynamic" } else { "static" },
        );
        let dir = TempDir::new().unwrap();
        let one = run(&text, 1, &dir.path().join("a"));
        let three = run(&text, 3, &dir.path().join("b"));
        prop_assert_eq!(&one, &three);
        prop_assert_eq!(one, run(&text, 1, &dir.path().join("c")));
    }
}
