//! Acceptance criteria 1–13, one PASS/FAIL line each. Exits nonzero when any
//! criterion fails. `ACCEPTANCE_SEED` overrides the default seed, and
//! criterion ids given as arguments restrict the run.

use bloch_asymptotics::verify;

fn main() {
    let seed = std::env::var("ACCEPTANCE_SEED").ok().and_then(|s| s.parse().ok()).unwrap_or(7);
    let ids: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).filter(|i| (1..=13).contains(i)).collect();
    let checks = if ids.is_empty() { verify::run_all(seed) } else { ids.iter().map(|&i| verify::run(i, seed)).collect() };
    for c in &checks {
        println!("{}", c.line());
    }
    let failed: Vec<usize> = checks.iter().filter(|c| !c.pass).map(|c| c.id).collect();
    println!("acceptance: {}/{} passed (seed {seed})", checks.len() - failed.len(), checks.len());
    if !failed.is_empty() {
        println!("acceptance: failing criteria {failed:?}");
        std::process::exit(1);
    }
}
