//! First moment of central values of symmetric-square twists: the
//! Kloosterman-side estimate from the level-5 form, and the direct sum over
//! the weight-8 basis shipped in data/.
//!
//! cargo run --release --example mean_value

use std::path::Path;
use symsq::coeffs::Sym2CoeffTable;
use symsq::data::{load_records, spectral_basis};
use symsq::kernels::{ContourKernel, KernelKind};
use symsq::petersson::{
    calibrate, compare_mean_value, lemma_last_grid, lemma_last_sum, mean_value_direct, moment_estimator, MomentConfig,
};
use symsq::qexp::eta_newform;

fn main() -> symsq::Result<()> {
    let q = 5;
    let table = Sym2CoeffTable::new(&eta_newform(q, 20_000)?);
    let est = moment_estimator(&table, MomentConfig::new(1e-6))?;
    println!(
        "diagonal {:.8}, kloosterman {:+.3e}, predicted mean {:.8} (c <= {}, m <= {})",
        est.diagonal, est.kloosterman, est.predicted_mean, est.c_max, est.m_max
    );

    let records = load_records(Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/data/basis_5_8.jsonl")))?;
    let basis = calibrate(spectral_basis(&records, q, 8)?, 10_000)?;
    let direct = mean_value_direct(&table, &basis, 1e-6)?;
    for cv in &direct.values {
        println!(
            "{}: L(1/2, sym^2 f x g) = {:.8}, L(1/2, g) = {:.8}, eps = {:+}, omega = {:.6}",
            cv.label, cv.sym2_twist, cv.gl2, cv.root_number, cv.harmonic_weight
        );
    }
    let cmp = compare_mean_value(&direct, &est, 1.0, 0.3);
    println!("direct {:.8} vs moment {:.8}: relative gap {:.3}", direct.total, est.predicted_mean, cmp.rel_residual);

    let v = ContourKernel::standard(KernelKind::V { k: 4 })?;
    let worst = lemma_last_grid(q)
        .into_iter()
        .map(|p| lemma_last_sum(&table, p, &v).map(|s| s.ratio))
        .collect::<symsq::Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    println!("max |Kloosterman-weighted sum| / q^2 over the grid: {worst:.6e}");
    Ok(())
}
