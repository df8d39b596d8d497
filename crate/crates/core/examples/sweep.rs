//! Run the whole check registry at the default parameter bundle and print
//! one report line per check. Equivalent to `skly check --all`.

use skly_core::params::{c64, EllipticParams};
use skly_core::verify::{run_all, CheckContext};

fn main() {
    let p = EllipticParams::from_lattice(c64(0.0, 0.9), c64(0.045, 0.21), c64(0.03, 0.0)).unwrap();
    let ctx = CheckContext::new(p);
    let mut failures = 0;
    for r in run_all(&ctx) {
        if !r.pass {
            failures += 1;
        }
        println!("{r}");
    }
    if failures > 0 {
        eprintln!("{failures} check(s) failed");
        std::process::exit(1);
    }
}
