//! Runs the thirteen acceptance criteria and prints one line per criterion.
//!
//! Criteria listed in `KNOWN_FAILURES` are reported but do not fail the run
//! (see the README for why); set `PILEUP_STRICT=1` to make them fatal.

use pileup::harness::acceptance::Acceptance;

const KNOWN_FAILURES: [u8; 1] = [5];

fn main() {
    let strict = std::env::var("PILEUP_STRICT").is_ok_and(|v| v == "1");
    let suite = Acceptance::new();
    let mut fatal = 0;
    for outcome in suite.run_all() {
        let known = KNOWN_FAILURES.contains(&outcome.id);
        let note = if !outcome.passed && known { " (known, see README)" } else { "" };
        println!("{outcome}{note}");
        if !outcome.passed && (strict || !known) {
            fatal += 1;
        }
    }
    if fatal > 0 {
        eprintln!("{fatal} acceptance criteria failed");
        std::process::exit(1);
    }
}
