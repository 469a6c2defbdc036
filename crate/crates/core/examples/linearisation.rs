//! Distance between the rank-based process and its linearised form as n grows.
use copula_proc::copula::CopulaModel;
use copula_proc::empirical::equivalence_diagnostic;
use copula_proc::index::build_class;

fn main() -> copula_proc::Result<()> {
    let class = build_class(&"mgf:grid=3".parse()?)?;
    let rows = equivalence_diagnostic(&CopulaModel::independence(2)?, &class, &[100, 400, 1600], 30, 5, 100_000)?;
    for r in rows {
        println!("n = {:>5}  median sup = {:.4}", r.n, r.median_sup);
    }
    Ok(())
}
