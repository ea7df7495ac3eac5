//! One line per acceptance criterion. Criteria listed in `KNOWN_FAILURES`
//! are expected to fail for the reason given there; the run fails if any
//! other criterion fails, or if a known failure starts passing.

mod common;

use common::Check;

const KNOWN_FAILURES: &[(u32, &str)] = &[(
    7,
    "with kappa_a*sigma_0 and kappa_eff held at their fitted values the floor scales as 1/kappa_a, \
     so the 3 MHz curve lies below the 1.5 MHz curve; the stated ordering cannot hold",
)];

fn main() {
    let criteria: [(u32, &str, fn() -> Check); 7] = [
        (1, "oracle equivalence", common::check_oracle_equivalence),
        (2, "effective linewidth", common::check_effective_linewidth),
        (3, "Kerr squeezing sweep", common::check_fig4),
        (4, "cooling pipeline roundtrip", common::check_cooling_roundtrip),
        (5, "textbook limit", common::check_textbook_limit),
        (6, "invariant suite", common::check_invariants),
        (7, "noise-floor scaling", common::check_noise_floor),
    ];
    let mut unexpected = Vec::new();
    for (id, name, run) in criteria {
        let c = run();
        let known = KNOWN_FAILURES.iter().find(|k| k.0 == id);
        println!("[{}] {id}. {name}: {}", if c.passed { "PASS" } else { "FAIL" }, c.detail);
        match (c.passed, known) {
            (false, Some((_, why))) => println!("      known failure: {why}"),
            (false, None) => unexpected.push(format!("criterion {id} failed")),
            (true, Some(_)) => unexpected.push(format!("criterion {id} listed as a known failure but passed")),
            (true, None) => {}
        }
    }
    if !unexpected.is_empty() {
        eprintln!("acceptance: {}", unexpected.join("; "));
        std::process::exit(1);
    }
}
