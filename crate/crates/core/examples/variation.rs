//! Vitali and Hardy-Krause variation of smooth functions and step functions.
use copula_proc::bv::{from_fn, hk_variation, vitali_variation, GridStepFunction, VariationMode};

fn main() -> copula_proc::Result<()> {
    let refine = VariationMode::Refine { tol: 1e-4, max_depth: 12 };
    for d in 1..=3 {
        let prod = from_fn(d, |x: &[f64]| x.iter().product());
        let v = hk_variation(&prod, refine)?;
        println!("HK(x1*...*x{d}) = {:.6} (depth {:?}, converged {})", v.value, v.depth, v.converged);
    }
    let xy = from_fn(2, |x: &[f64]| x[0] * x[1]);
    println!("Vitali(xy) = {:.6}", vitali_variation(&xy, refine)?.value);

    // a step function is handled exactly from its jumps
    let step = GridStepFunction::new(vec![vec![0.0, 0.5], vec![0.0, 0.25, 0.75]], vec![0.0, 1.0, -1.0, 2.0, 0.5, 0.0])?;
    println!(
        "step: Vitali {} HK {}",
        vitali_variation(&step, VariationMode::Exact)?.value,
        hk_variation(&step, VariationMode::Exact)?.value
    );
    Ok(())
}
