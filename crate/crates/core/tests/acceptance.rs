//! The acceptance suite: one PASS/FAIL line per criterion, then a sabotage run
//! that must be caught. Runs without the libtest harness so the lines always
//! reach the console.

use fracorn::acceptance::{all_ids, run_suite, SuiteOptions};

fn main() {
    let opts = SuiteOptions::default();
    println!("acceptance: {} criteria, threads {:?}", all_ids().len(), opts.threads);
    let outcomes = run_suite(&all_ids(), &opts, |o| println!("{}", o.line())).expect("thread pool");
    let failed: Vec<usize> = outcomes.iter().filter(|o| !o.passed).map(|o| o.id).collect();
    println!("{} of {} criteria passed", outcomes.len() - failed.len(), outcomes.len());

    let sabotage = SuiteOptions { sabotage: true, ..SuiteOptions::default() };
    let caught = run_suite(&[4], &sabotage, |o| println!("sabotage check: {}", o.line())).expect("thread pool");
    let sabotage_caught = caught.iter().all(|o| !o.passed);
    println!("sabotaged coefficient {}", if sabotage_caught { "detected" } else { "NOT detected" });

    if !failed.is_empty() || !sabotage_caught {
        eprintln!("acceptance failed: criteria {failed:?}, sabotage detected: {sabotage_caught}");
        std::process::exit(1);
    }
}
