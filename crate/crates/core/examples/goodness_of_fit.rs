//! Bootstrap goodness-of-fit test of independence.
use copula_proc::copula::CopulaModel;
use copula_proc::empirical::Centering;
use copula_proc::index::build_class;
use copula_proc::resampling::{bootstrap_replicates, gof_test, DEFAULT_LEVELS};

fn main() -> copula_proc::Result<()> {
    let class = build_class(&"indicator:grid=4".parse()?)?;
    let null = Centering::closed_form(CopulaModel::independence(2)?);
    for spec in ["indep:d=2", "gauss:rho=0.3", "mo:alpha=0.6,beta=0.6"] {
        let data = spec.parse::<CopulaModel>()?.sample(300, 10)?;
        let rep = gof_test(&data, &null, &class, 499, 11)?;
        println!("{spec:<22} stat {:.4}  p {:.3}  argmax {}", rep.statistic, rep.p_value, rep.argmax);
    }

    let data = CopulaModel::independence(2)?.sample(300, 12)?;
    let boot = bootstrap_replicates(&data, &class, 499, 13, &DEFAULT_LEVELS)?;
    for q in &boot.quantiles {
        println!("bootstrap quantile {:.1}: {:.4}", q.level, q.value);
    }
    Ok(())
}
