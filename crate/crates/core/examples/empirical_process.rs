//! The function-indexed process over a class, in rank-sum and integral form.
use copula_proc::copula::CopulaModel;
use copula_proc::empirical::{evaluate_class, integral_form, pseudo_observations, rank_sum, Centering};
use copula_proc::index::build_class;

fn main() -> copula_proc::Result<()> {
    let model = CopulaModel::cuadras_auge(0.5)?;
    let ps = pseudo_observations(&model.sample(300, 1)?)?;
    println!("C̄n(0.5,0.5) = {:.4}  Cn(0.5,0.5) = {:.4}  C(0.5,0.5) = {:.4}", ps.cadlag(&[0.5, 0.5]), ps.inverse(&[0.5, 0.5]), model.cdf(&[0.5, 0.5]));

    let class = build_class(&"mgf:grid=3".parse()?)?;
    let eval = evaluate_class(&ps, &class, &Centering::auto(model.clone(), 200_000, 2))?;
    for (id, z) in &eval.values {
        println!("{id:<22} Z = {z:+.4}  E = {:.6} ({:?})", eval.expectations[id], eval.expectation_sources[id]);
    }
    println!("sup |Z| = {:.4}", eval.sup_abs);

    let g = &class.functions()[4];
    println!("rank sum {:.12}  integral {:.12}", rank_sum(&ps, g, 1.0), integral_form(&ps, g, 1.0)?);
    Ok(())
}
