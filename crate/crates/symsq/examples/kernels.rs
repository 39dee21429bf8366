//! The integral transforms: the approximate-functional-equation weight V,
//! the Voronoi dual kernels Phi_+ and Phi_-, their decay, and Bessel J.
//!
//! cargo run --release --example kernels

use std::sync::Arc;
use symsq::kernels::{bessel_j, ContourKernel, KernelKind, SmoothBump};

fn main() -> symsq::Result<()> {
    let v = ContourKernel::standard(KernelKind::V { k: 4 })?;
    println!("V for weight 4, rule {:?}", v.rule());
    for x in [1e-4, 0.1, 1.0, 5.0, 20.0] {
        println!("  V({x:>6}) = {:+.12}", v.eval_real(x));
    }
    let c2 = v.decay_constant(2.0)?;
    println!("  |V(x)| <= {c2:.4} x^-2");

    let phi = SmoothBump::standard(1.0);
    for alpha in [1, -1] {
        let kind = KernelKind::Dual { k: 4, alpha, b2: 1, weight: Arc::new(phi) };
        let kern = ContourKernel::standard(kind)?;
        let check = kern.contour_check(2.0, 1.4)?;
        println!("Phi_{alpha:+}: value at 2 = {:+.10}, moved contour differs by {:.1e}", check.value, check.difference);
        for x in [0.5, 10.0, 100.0] {
            println!("  Phi({x:>5}) = {:+.6e}", kern.eval_real(x));
        }
    }
    for x in [0.5, 5.0, 50.0] {
        println!("J_1({x}) = {:+.15}, J_7({x}) = {:+.15}", bessel_j(1, x), bessel_j(7, x));
    }
    Ok(())
}
