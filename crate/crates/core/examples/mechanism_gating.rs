//! Latch release gating and engagement outcomes for a few parameter sets.
//!
//! ```text
//! cargo run --example mechanism_gating
//! ```

use teleswap::mechanism::{
    can_release, release_threshold, try_engage_latch, try_trigger_limit_switch, withdraw_resistance, InterfaceParams,
    LatchParams, ToleranceEnvelope,
};
use teleswap::scene::AlignmentError;

fn main() {
    let base = LatchParams::default();
    let iface = InterfaceParams::default();
    for f_release in [10.0, 11.0, 12.0, 15.0] {
        let p = LatchParams { f_release, ..base };
        println!(
            "f_release {f_release:>5.1} N  threshold {:.1} N  release {:<5}  withdraw {:.1} N",
            release_threshold(&p),
            can_release(&p),
            withdraw_resistance(&iface, can_release(&p), &p)
        );
    }

    let env = ToleranceEnvelope::default();
    println!();
    for (trans_err, tilt_err) in [(1.0, 1.0), (2.9, 4.9), (3.5, 1.0), (1.0, 7.0), (9.0, 0.0)] {
        let err = AlignmentError { trans_err, tilt_err };
        println!(
            "lateral {trans_err:>4.1} mm  tilt {tilt_err:>4.1} deg  -> {:?}, empty-bay switch {}",
            try_engage_latch(err, &env),
            try_trigger_limit_switch(err, true, &env)
        );
    }
}
