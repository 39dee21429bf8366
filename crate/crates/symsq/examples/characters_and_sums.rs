//! Dirichlet characters, Gauss sums, Kloosterman sums and the closed form
//! of the twisted character average at prime modulus.
//!
//! cargo run --example characters_and_sums

use symsq::arith::{enumerate_characters, gauss_sum, kloosterman, twisted_kloosterman_brute, twisted_kloosterman_closed};

fn main() -> symsq::Result<()> {
    let q = 7;
    for chi in enumerate_characters(q)? {
        let tau = gauss_sum(&chi);
        println!(
            "chi {:?}: conductor {}, parity {:+}, |tau| = {:.12} (sqrt q = {:.12})",
            chi.exponents(),
            chi.conductor(),
            chi.parity(),
            tau.norm(),
            (q as f64).sqrt()
        );
    }
    for c in [5u64, 7, 12, 30] {
        println!("S(1,1;{c}) = {:+.10}, Weil bound 2 sqrt(c) d(c) applies", kloosterman(1, 1, c));
    }
    for x in 0..q as i64 {
        for a in [1, -1] {
            let closed = twisted_kloosterman_closed(q, x, a);
            let brute = twisted_kloosterman_brute(q, x, a)?;
            println!("x={x} a={a:+}: closed {:+.6}  brute {:+.6}", closed.re, brute.re);
        }
    }
    Ok(())
}
