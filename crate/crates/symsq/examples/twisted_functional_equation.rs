//! The twisted functional equation for each primitive character mod 5 and
//! the rebuild of the additive twist from its character pieces.
//!
//! cargo run --release --example twisted_functional_equation

use symsq::arith::enumerate_characters;
use symsq::kernels::SmoothBump;
use symsq::voronoi::{builtin_setup, verify_character_decomposition, verify_twisted_fe};

fn main() -> symsq::Result<()> {
    let q = 5;
    let (table, kernels) = builtin_setup(q, SmoothBump::narrow(25.0), 1e-8)?;
    for chi in enumerate_characters(q)?.iter().filter(|c| c.is_primitive()) {
        let r = verify_twisted_fe(&table, &kernels, chi, 1e-6);
        println!("chi {:?} (parity {:+}): rel residual {:.2e} passed {}", chi.exponents(), chi.parity(), r.rel_residual, r.passed);
    }
    for h in 1..q {
        let r = verify_character_decomposition(&table, &kernels, h, 1e-8);
        println!("h={h}: character rebuild residual {:.2e}", r.rel_residual);
    }
    Ok(())
}
