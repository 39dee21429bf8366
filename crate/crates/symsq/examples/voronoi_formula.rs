//! Both sides of the additive-twist Voronoi formula for the level-11 form,
//! with a bump on [121, 242], for every unit h mod 11.
//!
//! cargo run --release --example voronoi_formula

use symsq::kernels::SmoothBump;
use symsq::voronoi::{builtin_setup, dual_term_profile, verify_voronoi, voronoi_lhs, voronoi_rhs, VoronoiInstance};

fn main() -> symsq::Result<()> {
    let tol = 1e-8;
    let (table, kernels) = builtin_setup(11, SmoothBump::narrow(121.0), tol)?;
    for h in 1..11 {
        let inst = VoronoiInstance::new(table.clone(), kernels.clone(), h, tol)?;
        let lhs = voronoi_lhs(&inst)?;
        let rhs = voronoi_rhs(&inst)?;
        let report = verify_voronoi(&inst);
        println!(
            "h={h:>2}: lhs {:+.10} {:+.10}i  rhs {:+.10} {:+.10}i  rel {:.1e}  dual terms {}",
            lhs.re, lhs.im, rhs.total.re, rhs.total.im, report.rel_residual, rhs.t_dual
        );
    }
    let edges = [0, 10, 100, 1_000, 10_000];
    let profile = dual_term_profile(&table, &kernels, &edges)?;
    for (w, mass) in edges.windows(2).zip(profile) {
        println!("dual mass on ({}, {}]: {mass:.3e}", w[0], w[1]);
    }
    Ok(())
}
