use hamtube_core::verify::suites::{run_suite, SuiteConfig};

fn main() {
    let mut failures = 0;
    for seed in [1_u64, 2, 3, 4, 5, 99, 123456] {
        for name in ["simple", "restricted", "tube0", "general", "so3r3"] {
            let cfg = SuiteConfig {
                seed,
                points: 100,
                step: 1e-5,
            };
            match run_suite(name, None, &cfg) {
                Ok(report) => {
                    if !report.all_pass() {
                        failures += 1;
                        println!("FAIL {name} seed {seed}:");
                        for s in &report.summary {
                            if s.passed != s.total {
                                println!(
                                    "  {} {}/{} max {:.3e}",
                                    s.check, s.passed, s.total, s.max_residual
                                );
                            }
                        }
                    }
                }
                Err(e) => {
                    failures += 1;
                    println!("ERROR {name} seed {seed}: {e}");
                }
            }
        }
        println!("seed {seed}: done");
    }
    println!("total failures: {failures}");
    std::process::exit(if failures == 0 { 0 } else { 1 });
}
