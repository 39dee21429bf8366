//! Symmetric-square coefficients of the level-11 form: the table A(n,1),
//! the two-index Rankin coefficients, the truncated Dirichlet series at s = 2
//! against its Euler product, and the local-factor identity.
//!
//! cargo run --example sym2_coefficients

use num_complex::Complex64;
use symsq::coeffs::{local_factor_identity, sym2_dirichlet_partial, sym2_euler_product, Sym2CoeffTable};
use symsq::qexp::eta_newform;

fn main() -> symsq::Result<()> {
    let f = eta_newform(11, 100_000)?;
    let table = Sym2CoeffTable::new(&f);
    for n in 1..=10u64 {
        println!("A({n:>2},1) = {:+.6}", table.a1(n)?);
    }
    println!("A(6,4) = {:+.6}", table.rankin(6, 4)?);
    println!("A(3,3) = {:+.6}  (A(3,1)^2 - 1 = {:+.6})", table.rankin(3, 3)?, table.a1(3)?.powi(2) - 1.0);

    let s = Complex64::new(2.0, 0.0);
    for x in [10_000, 100_000] {
        let p = sym2_dirichlet_partial(&table, s, x)?;
        println!("L(2, sym^2 f) truncated at {x:>6}: {:.10}  (tail <= {:.1e})", p.value.re, p.tail_estimate);
    }
    println!("Euler product over p <= 10^5:       {:.10}", sym2_euler_product(&table, s, 100_000)?.re);

    let i = Complex64::new(0.0, 1.0);
    for p in [2u64, 3, 7] {
        // A character mod 5 with chi(2) = i, evaluated at p, p^2, p^3.
        let chi_p = i.powu(match p % 5 { 2 => 1, 4 => 2, 3 => 3, _ => 0 });
        let r = local_factor_identity(&f, p, [chi_p, chi_p * chi_p, chi_p * chi_p * chi_p], 10)?;
        println!("local factor identity at p = {p}: residual {r:.1e}");
    }
    Ok(())
}
