//! Runs the built-in six-run matrix and prints the comparison.
//!
//! ```text
//! cargo run --release --example experiment_matrix -- [seed] [out_dir]
//! ```

use std::path::PathBuf;

use cvroute::scenario::{comparison_text, run_matrix, ExperimentMatrix};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let seed = args.next().map(|s| s.parse()).transpose()?.unwrap_or(7);
    let out = args.next().map(PathBuf::from);
    let matrix = ExperimentMatrix::table3(seed);
    let jobs = std::thread::available_parallelism().map_or(1, usize::from);
    let (comparison, _) = run_matrix(&matrix, jobs, out.as_deref())?;
    print!("{}", comparison_text(&comparison));
    Ok(())
}
