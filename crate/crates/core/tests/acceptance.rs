//! Runs every acceptance criterion and prints one line per criterion.
//! Criterion 9 runs on a single worker thread, as its time limit assumes.

use std::process::ExitCode;

use urtlab_core::verify::{run_criteria, CriterionResult, VerifyConfig, CRITERIA};

fn run_one(config: &VerifyConfig, id: u8) -> CriterionResult {
    let run = || run_criteria(config, &[id]);
    let summary = if id == 9 {
        rayon::ThreadPoolBuilder::new().num_threads(1).build().expect("thread pool").install(run)
    } else {
        run()
    };
    match summary {
        Ok(mut s) => s.criteria.remove(0),
        Err(e) => panic!("criterion {id} could not run: {e}"),
    }
}

fn main() -> ExitCode {
    let config = VerifyConfig::default();
    println!("acceptance suite, d = {}, seed = {}", config.d, config.seed);
    let mut failed = Vec::new();
    for id in CRITERIA {
        let result = run_one(&config, id);
        println!("{}", result.line());
        if !result.passed {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: {} of {} criteria passed", CRITERIA.len(), CRITERIA.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}
