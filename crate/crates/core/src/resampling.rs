//! Bootstrap of the empirical copula process, sup-statistic goodness-of-fit
//! tests and the bootstrap-vs-Monte-Carlo quantile study.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::copula::{format_g17, CopulaModel, SampleMatrix};
use crate::empirical::{class_expectations, pseudo_observations, sup_statistic, Centering, CenteringReport, PseudoSample};
use crate::error::{check_dim, Error, Result};
use crate::index::IndexClass;
use crate::seeding::{task_rng, DOMAIN_BOOTSTRAP, DOMAIN_FRESH_SAMPLES, DOMAIN_TRIALS};
use crate::bv::PointFn;

pub const DEFAULT_LEVELS: [f64; 3] = [0.1, 0.5, 0.9];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeedLedger {
    pub master_seed: u64,
    pub rule: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Quantile {
    pub level: f64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BootstrapResult {
    #[serde(rename = "B")]
    pub b: usize,
    /// `sup_g |Z̄ₙ*(g)|` per replicate, in replicate order.
    pub statistics: Vec<f64>,
    pub quantiles: Vec<Quantile>,
    pub seed_ledger: SeedLedger,
}

/// Row indices drawn for replicate `b`.
pub fn replicate_rows(n: usize, seed: u64, b: usize) -> Vec<usize> {
    let mut rng = task_rng(seed, DOMAIN_BOOTSTRAP, b as u64);
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

/// Order statistic at position `⌈level·B⌉` of the sorted values.
pub fn quantile_type1(sorted: &[f64], level: f64) -> f64 {
    let b = sorted.len();
    // the small guard keeps exact products like 0.9·500 from rounding up
    let k = ((level * b as f64) - 1e-9).ceil().clamp(1.0, b as f64) as usize;
    sorted[k - 1]
}

fn quantiles(stats: &[f64], levels: &[f64]) -> Vec<Quantile> {
    let mut sorted = stats.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut levels = levels.to_vec();
    levels.sort_by(f64::total_cmp);
    levels
        .into_iter()
        .map(|level| Quantile {
            level,
            value: quantile_type1(&sorted, level),
        })
        .collect()
}

/// Replicate statistics for an already ranked sample. Replicate `b` is
/// re-ranked within itself; since maximal ranks preserve `≤`, this is a
/// counting pass over the original integer ranks.
pub fn bootstrap_statistics(ps: &PseudoSample, class: &IndexClass, b: usize, seed: u64) -> Result<Vec<f64>> {
    check_dim(ps.dim(), class.dim())?;
    if b == 0 {
        return Err(Error::InvalidParameter("bootstrap needs B ≥ 1".into()));
    }
    let (n, d) = (ps.n(), ps.dim());
    if n < 2 {
        return Err(Error::InvalidParameter("bootstrap needs n ≥ 2".into()));
    }
    let fns = class.functions();
    let base: Vec<f64> = fns
        .iter()
        .map(|g| ps.rows().map(|r| g.eval(r)).sum::<f64>() / n as f64)
        .collect();
    let counts = ps.counts();
    let root_n = (n as f64).sqrt();
    let stats = (0..b)
        .into_par_iter()
        .map(|rep| {
            let idx = replicate_rows(n, seed, rep);
            let mut cum = vec![0u32; (n + 1) * d];
            for &i in &idx {
                for j in 0..d {
                    cum[j * (n + 1) + counts[i * d + j] as usize] += 1;
                }
            }
            for j in 0..d {
                let col = &mut cum[j * (n + 1)..(j + 1) * (n + 1)];
                for c in 1..=n {
                    col[c] += col[c - 1];
                }
            }
            let mut sums = vec![0.0; fns.len()];
            let mut row = vec![0.0; d];
            for &i in &idx {
                for j in 0..d {
                    row[j] = cum[j * (n + 1) + counts[i * d + j] as usize] as f64 / n as f64;
                }
                for (s, g) in sums.iter_mut().zip(fns) {
                    *s += g.eval(&row);
                }
            }
            sums.iter()
                .zip(&base)
                .map(|(s, m)| (root_n * (s / n as f64 - m)).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    Ok(stats)
}

pub fn bootstrap_replicates(sample: &SampleMatrix, class: &IndexClass, b: usize, seed: u64, levels: &[f64]) -> Result<BootstrapResult> {
    let ps = pseudo_observations(sample)?;
    let statistics = bootstrap_statistics(&ps, class, b, seed)?;
    Ok(BootstrapResult {
        b,
        quantiles: quantiles(&statistics, levels),
        statistics,
        seed_ledger: SeedLedger {
            master_seed: seed,
            rule: "replicate b: ChaCha8Rng::seed_from_u64(master_seed), stream b".into(),
        },
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct GofReport {
    pub statistic: f64,
    pub p_value: f64,
    #[serde(rename = "B")]
    pub b: usize,
    /// `#{b: stat*_b ≥ statistic}`.
    pub exceedances: usize,
    pub n: usize,
    pub class_spec: String,
    pub model_spec: String,
    pub seed: u64,
    pub centering: CenteringReport,
    /// Member attaining the sup.
    pub argmax: String,
}

/// Tests `H₀: C = null` with `sup_g |Z̄ₙ(g)|` centred under the null and
/// bootstrap critical values; `p = (1 + #{stat* ≥ stat}) / (B + 1)`.
pub fn gof_test(sample: &SampleMatrix, centering: &Centering, class: &IndexClass, b: usize, seed: u64) -> Result<GofReport> {
    let means: Vec<f64> = class_expectations(class, centering)?.into_iter().map(|(m, _)| m).collect();
    gof_with_means(sample, centering, class, &means, b, seed)
}

/// As [`gof_test`] with the null expectations supplied.
pub fn gof_with_means(sample: &SampleMatrix, centering: &Centering, class: &IndexClass, means: &[f64], b: usize, seed: u64) -> Result<GofReport> {
    let ps = pseudo_observations(sample)?;
    check_dim(ps.dim(), class.dim())?;
    let mut statistic: f64 = 0.0;
    let mut argmax = class.functions()[0].id().to_string();
    for (g, &m) in class.functions().iter().zip(means) {
        let z = crate::empirical::rank_sum(&ps, g, m).abs();
        if !z.is_finite() {
            return Err(Error::NonFinite(format!("statistic for {}", g.id())));
        }
        if z > statistic {
            statistic = z;
            argmax = g.id().to_string();
        }
    }
    let stats = bootstrap_statistics(&ps, class, b, seed)?;
    let exceedances = stats.iter().filter(|&&s| s >= statistic).count();
    Ok(GofReport {
        statistic,
        p_value: (1 + exceedances) as f64 / (b + 1) as f64,
        b,
        exceedances,
        n: ps.n(),
        class_spec: class.spec().to_string(),
        model_spec: centering.model.to_string(),
        seed,
        centering: CenteringReport {
            model: centering.model.to_string(),
            method: centering.method,
        },
        argmax,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct McRow {
    pub level: f64,
    pub mc_quantile: f64,
    pub boot_quantile: f64,
    pub rel_diff: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct McStudy {
    pub model: String,
    pub class: String,
    pub n: usize,
    pub reps: usize,
    #[serde(rename = "B")]
    pub b: usize,
    pub boot_trials: usize,
    pub seed: u64,
    pub centering: CenteringReport,
    pub rows: Vec<McRow>,
}

impl McStudy {
    /// Columns `level,mc_quantile,boot_quantile,rel_diff`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(["level", "mc_quantile", "boot_quantile", "rel_diff"])?;
        for r in &self.rows {
            w.write_record([r.level, r.mc_quantile, r.boot_quantile, r.rel_diff].map(format_g17))?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct McStudyConfig {
    pub n: usize,
    pub reps: usize,
    pub b: usize,
    /// Independent samples whose bootstrap quantiles are median-aggregated.
    pub boot_trials: usize,
    pub seed: u64,
    pub levels: Vec<f64>,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

/// Monte-Carlo quantiles of `sup_g |Z̄ₙ(g)|` over `reps` fresh samples
/// against the median over `boot_trials` samples of bootstrap quantiles.
///
/// Fresh sample `r` uses `task_rng(seed, DOMAIN_FRESH_SAMPLES, r)`; trial `t`
/// draws its data and then its bootstrap seed from
/// `task_rng(seed, DOMAIN_TRIALS, t)`.
pub fn mc_study(model: &CopulaModel, class: &IndexClass, centering: &Centering, cfg: &McStudyConfig) -> Result<McStudy> {
    check_dim(model.dim(), class.dim())?;
    if cfg.reps == 0 || cfg.boot_trials == 0 || cfg.levels.is_empty() {
        return Err(Error::InvalidParameter("mc study needs reps, trials and levels".into()));
    }
    if !model.has_sampler() {
        return Err(Error::NoSampler(model.to_string()));
    }
    let means: Vec<f64> = class_expectations(class, centering)?.into_iter().map(|(m, _)| m).collect();
    let mc_stats: Vec<f64> = (0..cfg.reps)
        .into_par_iter()
        .map(|r| -> Result<f64> {
            let s = model.sample_with(cfg.n, &mut task_rng(cfg.seed, DOMAIN_FRESH_SAMPLES, r as u64))?;
            Ok(sup_statistic(&pseudo_observations(&s)?, class, &means))
        })
        .collect::<Result<_>>()?;
    let mc_q = quantiles(&mc_stats, &cfg.levels);
    let boot_q: Vec<Vec<Quantile>> = (0..cfg.boot_trials)
        .into_par_iter()
        .map(|t| -> Result<Vec<Quantile>> {
            let mut rng = task_rng(cfg.seed, DOMAIN_TRIALS, t as u64);
            let s = model.sample_with(cfg.n, &mut rng)?;
            let stats = bootstrap_statistics(&pseudo_observations(&s)?, class, cfg.b, rng.random())?;
            Ok(quantiles(&stats, &cfg.levels))
        })
        .collect::<Result<_>>()?;
    let rows = mc_q
        .iter()
        .enumerate()
        .map(|(i, q)| {
            let boot = median(boot_q.iter().map(|t| t[i].value).collect());
            let rel_diff = if q.value == boot {
                0.0
            } else {
                (boot - q.value).abs() / q.value.abs()
            };
            McRow {
                level: q.level,
                mc_quantile: q.value,
                boot_quantile: boot,
                rel_diff,
            }
        })
        .collect();
    Ok(McStudy {
        model: model.to_string(),
        class: class.spec().to_string(),
        n: cfg.n,
        reps: cfg.reps,
        b: cfg.b,
        boot_trials: cfg.boot_trials,
        seed: cfg.seed,
        centering: CenteringReport {
            model: centering.model.to_string(),
            method: centering.method,
        },
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::{build_class, ClassSpec};

    fn mgf() -> IndexClass {
        build_class(&"mgf:grid=3".parse().unwrap()).unwrap()
    }

    #[test]
    fn constant_class_gives_zero_statistics() {
        let s = CopulaModel::independence(2).unwrap().sample(50, 1).unwrap();
        let class = build_class(&ClassSpec::Constant { dim: 2, c: 4.2 }).unwrap();
        let r = bootstrap_replicates(&s, &class, 20, 3, &DEFAULT_LEVELS).unwrap();
        assert!(r.statistics.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn replicate_rows_are_in_range_and_seeded() {
        let a = replicate_rows(30, 9, 4);
        assert!(a.iter().all(|&i| i < 30));
        assert_eq!(a, replicate_rows(30, 9, 4));
        assert_ne!(a, replicate_rows(30, 9, 5));
    }

    #[test]
    fn counting_rerank_matches_direct_rerank() {
        let s = CopulaModel::gaussian(0.5).unwrap().sample(40, 2).unwrap();
        let class = mgf();
        let ps = pseudo_observations(&s).unwrap();
        let stats = bootstrap_statistics(&ps, &class, 5, 77).unwrap();
        for (b, &stat) in stats.iter().enumerate() {
            let star = pseudo_observations(&s.select_rows(&replicate_rows(40, 77, b))).unwrap();
            let want = class
                .functions()
                .iter()
                .map(|g| {
                    let m_star = star.rows().map(|r| g.eval(r)).sum::<f64>() / 40.0;
                    let m = ps.rows().map(|r| g.eval(r)).sum::<f64>() / 40.0;
                    (40f64.sqrt() * (m_star - m)).abs()
                })
                .fold(0.0, f64::max);
            assert!((stat - want).abs() < 1e-12);
        }
    }

    #[test]
    fn quantiles_are_type_one_and_monotone() {
        let sorted: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(quantile_type1(&sorted, 0.1), 1.0);
        assert_eq!(quantile_type1(&sorted, 0.5), 5.0);
        assert_eq!(quantile_type1(&sorted, 0.55), 6.0);
        assert_eq!(quantile_type1(&sorted, 0.9), 9.0);
        assert_eq!(quantile_type1(&sorted, 1.0), 10.0);
        let s = CopulaModel::independence(2).unwrap().sample(60, 4).unwrap();
        let r = bootstrap_replicates(&s, &mgf(), 50, 1, &[0.9, 0.1, 0.5]).unwrap();
        assert!(r.quantiles.windows(2).all(|w| w[0].level < w[1].level && w[0].value <= w[1].value));
    }

    #[test]
    fn offsets_cancel() {
        let s = CopulaModel::marshall_olkin(0.5, 0.5).unwrap().sample(80, 6).unwrap();
        let a = bootstrap_replicates(&s, &mgf(), 30, 2, &DEFAULT_LEVELS).unwrap();
        let b = bootstrap_replicates(&s, &mgf().shifted(3.5), 30, 2, &DEFAULT_LEVELS).unwrap();
        for (x, y) in a.statistics.iter().zip(&b.statistics) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn thread_count_does_not_matter() {
        let s = CopulaModel::gaussian(0.3).unwrap().sample(100, 6).unwrap();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| bootstrap_replicates(&s, &mgf(), 64, 5, &DEFAULT_LEVELS).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn gof_report_invariants() {
        let null = Centering::closed_form(CopulaModel::independence(2).unwrap());
        let s = CopulaModel::independence(2).unwrap().sample(100, 12).unwrap();
        let r = gof_test(&s, &null, &mgf(), 99, 4).unwrap();
        assert!(r.statistic >= 0.0);
        assert_eq!(r.p_value, (1 + r.exceedances) as f64 / 100.0);
        let again = gof_test(&s, &null, &mgf(), 99, 4).unwrap();
        assert_eq!(serde_json::to_string(&r).unwrap(), serde_json::to_string(&again).unwrap());
        assert!(bootstrap_replicates(&s, &mgf(), 0, 1, &DEFAULT_LEVELS).is_err());
    }

    #[test]
    fn degenerate_study_emits_rows() {
        let model = CopulaModel::independence(2).unwrap();
        let cfg = McStudyConfig {
            n: 30,
            reps: 1,
            b: 10,
            boot_trials: 1,
            seed: 3,
            levels: vec![0.5],
        };
        let study = mc_study(&model, &mgf(), &Centering::closed_form(model.clone()), &cfg).unwrap();
        assert_eq!(study.rows.len(), 1);
        let mut buf = Vec::new();
        study.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("level,mc_quantile,boot_quantile,rel_diff\n"));
        assert_eq!(text.lines().count(), 2);
    }
}
