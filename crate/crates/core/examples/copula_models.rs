//! Copula families: distribution functions, samplers and spec strings.
use std::sync::Arc;

use copula_proc::copula::{CopulaModel, DeltaForm};

fn main() -> copula_proc::Result<()> {
    let specs = ["indep:d=2", "m", "w", "mo:alpha=0.5,beta=0.3", "ca:theta=0.4", "gauss:rho=0.6", "delta:form=min,power=2"];
    for spec in specs {
        let model: CopulaModel = spec.parse()?;
        println!("{:<28} C(0.3,0.6) = {:.6}", model.to_string(), model.cdf(&[0.3, 0.6]));
    }

    // a custom diagonal, C(u,v) = min(u, v, δ((u+v)/2))
    let delta = CopulaModel::delta(Arc::new(|t: f64| t.powf(1.5)), DeltaForm::Min, "t^1.5");
    println!("custom delta C(0.5,0.5) = {:.6}", delta.cdf(&[0.5, 0.5]));

    let s = CopulaModel::marshall_olkin(0.5, 0.5)?.sample(5, 42)?;
    s.write_csv(std::io::stdout())?;
    Ok(())
}
