//! Finite-difference check of the hand-written backward pass, once as is and
//! once with the previous-cell term removed from the LSTM backward step.
//!
//! cargo run --release --example gradient_check

use tslstm::nn::BackwardFault;
use tslstm::training::{gradient_check, GradCheckConfig};

fn main() -> tslstm::Result<()> {
    for n_e in 1..=3 {
        let cfg = GradCheckConfig { n_e, ..GradCheckConfig::default() };
        let report = gradient_check(&cfg, BackwardFault::None)?;
        let worst = report.worst().expect("tensors");
        println!(
            "n_e = {n_e}: {} tensors, loss {:.6}, worst {} at {:.2e} -> {}",
            report.tensors.len(),
            report.loss,
            worst.name,
            worst.max_relative_error,
            if report.passed { "pass" } else { "FAIL" }
        );
    }

    let mutated = gradient_check(&GradCheckConfig::default(), BackwardFault::DropPrevCellTerm)?;
    println!("\nwith the c_prev term dropped:");
    for t in mutated.tensors.iter().filter(|t| !t.passed) {
        println!("  {:<16} max rel err {:.2e}", t.name, t.max_relative_error);
    }
    println!("mutated check {}", if mutated.passed { "passed (unexpected)" } else { "fails as it should" });
    Ok(())
}
