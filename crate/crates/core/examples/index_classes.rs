//! Built-in index classes, their variation bounds and closed-form means.
use copula_proc::copula::CopulaModel;
use copula_proc::index::{build_class, class_hk_bound, class_hk_variation};

fn main() -> copula_proc::Result<()> {
    let indep = CopulaModel::independence(2)?;
    for spec in ["indicator:grid=3", "mgf:grid=3", "poly:deg=2", "step:res=6,count=5,T=4,seed=1", "const:c=1"] {
        let class = build_class(&spec.parse()?)?;
        let v = class_hk_variation(&class, 1e-3, 8)?;
        println!("{:<36} {:>3} functions  HK bound {:.3}  refined {:.3}", class.spec(), class.len(), class_hk_bound(&class), v.value);
        let g = &class.functions()[class.len() - 1];
        match g.closed_form_expectation(&indep) {
            Ok(m) => println!("    E[{}] under independence = {m:.6}", g.id()),
            Err(e) => println!("    {e}"),
        }
    }
    Ok(())
}
