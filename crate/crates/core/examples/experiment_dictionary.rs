//! Regenerates the bundled experiment dictionary and prints it to stdout.

use csc_core::format::write_dictionary;
use csc_core::signal::regenerate_experiment_dictionary;

fn main() {
    let found = regenerate_experiment_dictionary().expect("coherence search failed");
    eprintln!("mu={} steps={}", found.mu, found.steps);
    print!("{}", write_dictionary(&found.dictionary));
}
