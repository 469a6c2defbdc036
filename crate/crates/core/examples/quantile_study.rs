//! Bootstrap quantiles of the sup statistic against Monte-Carlo quantiles.
use copula_proc::copula::CopulaModel;
use copula_proc::empirical::Centering;
use copula_proc::index::build_class;
use copula_proc::resampling::{mc_study, McStudyConfig, DEFAULT_LEVELS};

fn main() -> copula_proc::Result<()> {
    let model = CopulaModel::marshall_olkin(0.5, 0.5)?;
    let class = build_class(&"mgf:grid=3".parse()?)?;
    let cfg = McStudyConfig { n: 300, reps: 300, b: 300, boot_trials: 10, seed: 3, levels: DEFAULT_LEVELS.to_vec() };
    let study = mc_study(&model, &class, &Centering::auto(model.clone(), 500_000, 4), &cfg)?;
    study.write_csv(std::io::stdout())?;
    Ok(())
}
