//! The Petersson identity on the one-dimensional spaces of the eta-product
//! forms: calibrate the harmonic weight at (1,1), then compare spectral and
//! Kloosterman sides over coprime pairs.
//!
//! cargo run --release --example petersson_identity

use symsq::petersson::{calibrate, coprime_pairs, petersson_rhs, verify_petersson, SpectralBasis};
use symsq::qexp::ETA_LEVELS;

fn main() -> symsq::Result<()> {
    let c_max = 10_000;
    for q in ETA_LEVELS {
        let basis = calibrate(SpectralBasis::builtin(q, 2500)?, c_max)?;
        let k = basis.weight();
        println!("level {q}, weight {k}: omega = {:.8}", basis.harmonic_weights().map_or(f64::NAN, |w| w[0]));
        for (m, n) in [(2u64, 3u64), (7, 13)] {
            if m % q == 0 || n % q == 0 {
                continue;
            }
            let rhs = petersson_rhs(m, n, q, k, c_max)?;
            println!("  ({m},{n}): spectral {:+.12}  kloosterman {:+.12}", basis.harmonic_sum(m, n)?, rhs.value);
        }
        let tol = if k == 2 { 1e-2 } else { 1e-6 };
        let r = verify_petersson(&basis, &coprime_pairs(q, 30), c_max, tol);
        println!("  all coprime m,n <= 30: passed {} ({} checks)", r.passed, r.checks.len());
    }
    Ok(())
}
