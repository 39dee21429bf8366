//! Builds the eta-product newforms, prints their first coefficients and
//! runs the exact Hecke, Deligne and level checks.
//!
//! cargo run --example newform_expansion

use symsq::qexp::{eta_expansion, eta_newform, validate_newform, ETA_LEVELS};

fn main() -> symsq::Result<()> {
    // eta(z)^24 = Delta, as a sanity check of the raw expansion.
    let delta = eta_expansion(1, 24, 8)?;
    println!("eta^24 offset/24 = {}, coefficients {:?}", delta.offset24(), delta.coeffs());

    for q in ETA_LEVELS {
        let f = eta_newform(q, 10_000)?;
        let head: Vec<_> = f.coefficients().iter().take(12).collect();
        println!("level {q}, weight {}: a_1.. = {head:?}", f.weight());
        println!("  lambda(2) = {:.6}, lambda(q) = {:.6}", f.lambda(2)?, f.lambda(q)?);
        let report = validate_newform(&f);
        for c in &report.checks {
            println!("  {:<36} residual {:e}  {}", c.name, c.residual, if c.passed { "ok" } else { "FAILED" });
        }
    }
    Ok(())
}
