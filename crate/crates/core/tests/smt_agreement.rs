#[path = "support/formulas.rs"]
mod formulas;

use cosmoplan_core::smtgate::default_solver;
use formulas::{agreement, solver_available};

#[test]
fn solver_matches_enumeration_on_random_formulas() {
    let solver = default_solver();
    if !solver_available(&solver) {
        eprintln!("skipping: solver `{solver}` not found");
        return;
    }
    let (sat, unsat) = agreement(7, 200, &solver).unwrap();
    assert!(sat > 20 && unsat > 20, "degenerate sample: {sat} sat, {unsat} unsat");
}
