//! Pseudo-observations, empirical copulas and the function-indexed empirical
//! copula process `Z̄ₙ(g) = n^{-1/2} Σ_i {g(F̂ₙ(X_i)) - E g(U)}`.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bv::{IndexSet, PointFn, SignedMeasure};
use crate::copula::{CopulaModel, SampleMatrix, GL6};
use crate::error::{check_dim, Error, Result};
use crate::index::{IndexClass, IndexFunction};
use crate::seeding::{task_rng, DOMAIN_CENTERING, DOMAIN_DIAGNOSTIC, DOMAIN_REFERENCE};
use crate::stieltjes::integrate;

/// Normalised maximal ranks of a sample.
#[derive(Clone, Debug, PartialEq)]
pub struct PseudoSample {
    n: usize,
    dim: usize,
    /// `#{k: X_kj ≤ X_ij}`, row-major.
    counts: Vec<u32>,
    /// `counts / n`.
    ranks: Vec<f64>,
    /// Per column, the distinct attained counts in increasing order.
    attained: Vec<Vec<u32>>,
}

/// `#{k: x_k ≤ x_i}` for every `i`.
pub fn max_ranks(column: &[f64]) -> Vec<u32> {
    let mut sorted = column.to_vec();
    sorted.sort_by(f64::total_cmp);
    column
        .iter()
        .map(|x| sorted.partition_point(|v| v <= x) as u32)
        .collect()
}

impl PseudoSample {
    /// Builds from integer maximal ranks (row-major, `1..=n`).
    pub fn from_counts(n: usize, dim: usize, counts: Vec<u32>) -> Result<Self> {
        check_dim(n * dim, counts.len())?;
        if n == 0 {
            return Err(Error::InvalidParameter("pseudo-sample needs n ≥ 1".into()));
        }
        let ranks = counts.iter().map(|&c| c as f64 / n as f64).collect();
        let attained = (0..dim)
            .map(|j| {
                let mut col: Vec<u32> = counts.chunks_exact(dim).map(|r| r[j]).collect();
                col.sort_unstable();
                col.dedup();
                col
            })
            .collect();
        Ok(Self {
            n,
            dim,
            counts,
            ranks,
            attained,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn ranks(&self) -> &[f64] {
        &self.ranks
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.ranks[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.ranks.chunks_exact(self.dim)
    }

    /// The atomic measure of `C̄ₙ`: mass `1/n` at every rank vector.
    pub fn measure(&self) -> SignedMeasure {
        let w = 1.0 / self.n as f64;
        SignedMeasure::from_weighted_points(self.dim, self.rows().map(|r| (r.to_vec(), w)).collect())
            .expect("rank vectors lie in the unit cube")
    }

    /// `C̄ₙ(u) = n^{-1} Σ_i 1{rank_i ≤ u}`.
    pub fn cadlag(&self, u: &[f64]) -> f64 {
        let hits = self
            .rows()
            .filter(|r| r.iter().zip(u).all(|(r, u)| r <= u))
            .count();
        hits as f64 / self.n as f64
    }

    /// `Cₙ(u) = 𝔽ₙ(𝔽ₙ₁⁻(u₁), …, 𝔽ₙ_d⁻(u_d))` with the left-continuous
    /// marginal inverses.
    pub fn inverse(&self, u: &[f64]) -> f64 {
        if u.iter().any(|&x| x <= 0.0) {
            return 0.0;
        }
        let n = self.n as f64;
        let thresholds: Vec<u32> = u
            .iter()
            .zip(&self.attained)
            .map(|(&uj, attained)| {
                // smallest k with k/n ≥ u_j, decided in the same arithmetic as the ranks
                let mut k = ((uj * n).ceil() as u32).clamp(1, self.n as u32);
                while k > 1 && (k - 1) as f64 / n >= uj {
                    k -= 1;
                }
                while k < self.n as u32 && (k as f64 / n) < uj {
                    k += 1;
                }
                attained[attained.partition_point(|&c| c < k)]
            })
            .collect();
        let hits = self
            .counts
            .chunks_exact(self.dim)
            .filter(|r| r.iter().zip(&thresholds).all(|(c, t)| c <= t))
            .count();
        hits as f64 / n
    }
}

/// Coordinatewise maximal ranks divided by `n`.
pub fn pseudo_observations(sample: &SampleMatrix) -> Result<PseudoSample> {
    let (n, d) = (sample.n(), sample.dim());
    let mut counts = vec![0u32; n * d];
    for j in 0..d {
        for (i, c) in max_ranks(&sample.column(j)).into_iter().enumerate() {
            counts[i * d + j] = c;
        }
    }
    PseudoSample::from_counts(n, d, counts)
}

/// `(C̄ₙ(u), Cₙ(u))`.
pub fn empirical_copulas(ps: &PseudoSample, u: &[f64]) -> Result<(f64, f64)> {
    check_dim(ps.dim, u.len())?;
    Ok((ps.cadlag(u), ps.inverse(u)))
}

/// How `E[g(U)]` is obtained.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum CenteringMethod {
    ClosedForm,
    /// Gauss-Legendre evaluation of `Σ_I (-1)^{|I|} ∫ C(x_I;1) ∂^I g(x_I;1) dx_I`.
    Quadrature { panels: usize },
    MonteCarlo { samples: usize, seed: u64 },
    /// Closed form, else quadrature, else Monte Carlo.
    Auto { panels: usize, samples: usize, seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpectationSource {
    ClosedForm,
    Quadrature,
    MonteCarlo,
}

#[derive(Clone, Debug)]
pub struct Centering {
    pub model: CopulaModel,
    pub method: CenteringMethod,
}

impl Centering {
    pub fn closed_form(model: CopulaModel) -> Self {
        Self {
            model,
            method: CenteringMethod::ClosedForm,
        }
    }

    pub fn monte_carlo(model: CopulaModel, samples: usize, seed: u64) -> Self {
        Self {
            model,
            method: CenteringMethod::MonteCarlo { samples, seed },
        }
    }

    pub fn auto(model: CopulaModel, samples: usize, seed: u64) -> Self {
        Self {
            model,
            method: CenteringMethod::Auto {
                panels: DEFAULT_PANELS,
                samples,
                seed,
            },
        }
    }
}

pub const DEFAULT_PANELS: usize = 64;

/// `E[g(U)]` for every member of `class`, with the route taken.
pub fn class_expectations(class: &IndexClass, centering: &Centering) -> Result<Vec<(f64, ExpectationSource)>> {
    expectations(class.functions(), centering)
}

pub fn expectations(fns: &[IndexFunction], centering: &Centering) -> Result<Vec<(f64, ExpectationSource)>> {
    let model = &centering.model;
    if let Some(g) = fns.first() {
        check_dim(model.dim(), g.dim())?;
    }
    match centering.method {
        CenteringMethod::ClosedForm => fns
            .iter()
            .map(|g| Ok((g.closed_form_expectation(model)?, ExpectationSource::ClosedForm)))
            .collect(),
        CenteringMethod::Quadrature { panels } => fns
            .iter()
            .map(|g| Ok((quadrature_expectation(g, model, panels)?, ExpectationSource::Quadrature)))
            .collect(),
        CenteringMethod::MonteCarlo { samples, seed } => Ok(monte_carlo_expectations(fns, model, samples, seed)?
            .into_iter()
            .map(|v| (v, ExpectationSource::MonteCarlo))
            .collect()),
        CenteringMethod::Auto { panels, samples, seed } => {
            let mut out: Vec<Option<(f64, ExpectationSource)>> = fns
                .iter()
                .map(|g| {
                    if let Ok(v) = g.closed_form_expectation(model) {
                        Some((v, ExpectationSource::ClosedForm))
                    } else if let Ok(v) = quadrature_expectation(g, model, panels) {
                        Some((v, ExpectationSource::Quadrature))
                    } else {
                        None
                    }
                })
                .collect();
            let rest: Vec<usize> = (0..fns.len()).filter(|&i| out[i].is_none()).collect();
            if !rest.is_empty() {
                let sub: Vec<IndexFunction> = rest.iter().map(|&i| fns[i].clone()).collect();
                let mc = monte_carlo_expectations(&sub, model, samples, seed)?;
                for (&i, v) in rest.iter().zip(mc) {
                    out[i] = Some((v, ExpectationSource::MonteCarlo));
                }
            }
            Ok(out.into_iter().map(|v| v.expect("filled above")).collect())
        }
    }
}

const MC_CHUNK: usize = 4096;

fn monte_carlo_expectations(fns: &[IndexFunction], model: &CopulaModel, samples: usize, seed: u64) -> Result<Vec<f64>> {
    if samples == 0 {
        return Err(Error::InvalidParameter("Monte Carlo centering needs at least one draw".into()));
    }
    let mut rng = task_rng(seed, DOMAIN_CENTERING, 0);
    let draws = model.sample_with(samples, &mut rng)?;
    let d = draws.dim();
    let partial: Vec<Vec<f64>> = draws
        .values()
        .par_chunks(MC_CHUNK * d)
        .map(|chunk| {
            fns.iter()
                .map(|g| chunk.chunks_exact(d).map(|u| g.eval(u)).sum::<f64>())
                .collect()
        })
        .collect();
    let mut totals = vec![0.0; fns.len()];
    for p in &partial {
        for (t, v) in totals.iter_mut().zip(p) {
            *t += v;
        }
    }
    Ok(totals.into_iter().map(|t| t / samples as f64).collect())
}

/// Composite 6-point Gauss-Legendre nodes and weights on `[0,1]`.
fn composite_rule(panels: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(6 * panels);
    let mut weights = Vec::with_capacity(6 * panels);
    let h = 1.0 / panels as f64;
    for p in 0..panels {
        let mid = (p as f64 + 0.5) * h;
        for (w, x) in GL6.0.iter().zip(GL6.1) {
            for s in [-1.0, 1.0] {
                nodes.push(mid + s * x * h / 2.0);
                weights.push(w * h / 2.0);
            }
        }
    }
    (nodes, weights)
}

/// `E[g(U)]` through integration by parts against the copula:
/// `Σ_I (-1)^{|I|} ∫_{[0,1]^I} C(x_I; 1) ∂^I g(x_I; 1) dx_I`, the empty set
/// contributing `g(1)`. Needs the mixed partials of `g`.
pub fn quadrature_expectation(g: &IndexFunction, model: &CopulaModel, panels: usize) -> Result<f64> {
    let d = g.dim();
    check_dim(model.dim(), d)?;
    if panels == 0 {
        return Err(Error::InvalidParameter("quadrature needs at least one panel".into()));
    }
    let ones = vec![1.0; d];
    let missing = || Error::NoClosedForm {
        function: g.id().to_string(),
        model: model.to_string(),
    };
    // probe every subset before the expensive sums
    for s in IndexSet::all(d) {
        g.mixed_partial(&ones, s).ok_or_else(missing)?;
    }
    let (nodes, weights) = composite_rule(panels);
    let m = nodes.len();
    let mut total = 0.0;
    for s in IndexSet::all(d) {
        if s.is_empty() {
            total += g.eval(&ones);
            continue;
        }
        let axes: Vec<usize> = s.members().collect();
        let k = axes.len();
        let count = m.checked_pow(k as u32).ok_or_else(|| Error::InvalidParameter("quadrature grid too large".into()))?;
        // the first axis of the subset drives the parallel split; rows are summed in order
        let rows: Vec<f64> = (0..m)
            .into_par_iter()
            .map(|first| {
                let mut x = ones.clone();
                let mut acc = 0.0;
                for rest in 0..count / m {
                    let mut w = weights[first];
                    x[axes[0]] = nodes[first];
                    let mut r = rest;
                    for &axis in &axes[1..] {
                        let i = r % m;
                        r /= m;
                        x[axis] = nodes[i];
                        w *= weights[i];
                    }
                    let part = g.mixed_partial(&x, s).expect("probed above");
                    if part != 0.0 {
                        acc += w * model.cdf(&x) * part;
                    }
                }
                acc
            })
            .collect();
        total += s.sign() * rows.iter().sum::<f64>();
    }
    Ok(total)
}

/// `n^{-1/2} Σ_i {g(rank_i) - mean}`.
pub fn rank_sum(ps: &PseudoSample, g: &IndexFunction, mean: f64) -> f64 {
    let total: f64 = ps.rows().map(|r| g.eval(r) - mean).sum();
    total / (ps.n as f64).sqrt()
}

/// `√n (∫ g dC̄ₙ - mean)`, integrating against the atoms of `C̄ₙ`.
pub fn integral_form(ps: &PseudoSample, g: &IndexFunction, mean: f64) -> Result<f64> {
    check_dim(ps.dim, g.dim())?;
    Ok((ps.n as f64).sqrt() * (integrate(g, &ps.measure())? - mean))
}

/// `Z̄ₙ(g)` with the centering computed as requested.
pub fn process_value(ps: &PseudoSample, g: &IndexFunction, centering: &Centering) -> Result<f64> {
    check_dim(ps.dim, g.dim())?;
    let (mean, _) = expectations(std::slice::from_ref(g), centering)?[0];
    Ok(rank_sum(ps, g, mean))
}

#[derive(Clone, Debug, Serialize)]
pub struct CenteringReport {
    pub model: String,
    #[serde(flatten)]
    pub method: CenteringMethod,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProcessEvaluation {
    pub n: usize,
    pub dim: usize,
    pub class: String,
    pub centering: CenteringReport,
    /// `Z̄ₙ(g)` by identifier.
    pub values: BTreeMap<String, f64>,
    pub expectations: BTreeMap<String, f64>,
    pub expectation_sources: BTreeMap<String, ExpectationSource>,
    pub sup_abs: f64,
}

/// `Z̄ₙ(g)` for every member of the class.
pub fn evaluate_class(ps: &PseudoSample, class: &IndexClass, centering: &Centering) -> Result<ProcessEvaluation> {
    check_dim(ps.dim, class.dim())?;
    let means = class_expectations(class, centering)?;
    let mut values = BTreeMap::new();
    let mut expectations = BTreeMap::new();
    let mut sources = BTreeMap::new();
    let mut sup_abs: f64 = 0.0;
    for (g, &(mean, source)) in class.functions().iter().zip(&means) {
        let z = rank_sum(ps, g, mean);
        if !z.is_finite() {
            return Err(Error::NonFinite(format!("process value of {}", g.id())));
        }
        sup_abs = sup_abs.max(z.abs());
        values.insert(g.id().to_string(), z);
        expectations.insert(g.id().to_string(), mean);
        sources.insert(g.id().to_string(), source);
    }
    Ok(ProcessEvaluation {
        n: ps.n,
        dim: ps.dim,
        class: class.spec().to_string(),
        centering: CenteringReport {
            model: centering.model.to_string(),
            method: centering.method,
        },
        values,
        expectations,
        expectation_sources: sources,
        sup_abs,
    })
}

/// `sup_g |Z̄ₙ(g)|` given precomputed means.
pub fn sup_statistic(ps: &PseudoSample, class: &IndexClass, means: &[f64]) -> f64 {
    class
        .functions()
        .iter()
        .zip(means)
        .map(|(g, &m)| rank_sum(ps, g, m).abs())
        .fold(0.0, f64::max)
}

/// Monte Carlo estimate of `T_k(g)(x) = ∫ ġ_k(u) 1{x_k ≤ u_k} dC(u)`.
pub fn t_transform(g: &IndexFunction, k: usize, model: &CopulaModel, x: &[f64], samples: usize, seed: u64) -> Result<f64> {
    check_dim(model.dim(), g.dim())?;
    check_dim(g.dim(), x.len())?;
    if !g.has_gradient() {
        return Err(Error::NoGradient(g.id().to_string()));
    }
    if k >= g.dim() {
        return Err(Error::InvalidParameter(format!("coordinate {k} out of range")));
    }
    if samples == 0 {
        return Err(Error::InvalidParameter("T_k estimate needs at least one draw".into()));
    }
    let draws = model.sample(samples, seed)?;
    let mut acc = 0.0;
    for u in draws.rows() {
        if x[k] <= u[k] {
            acc += g.gradient(u, k)?;
        }
    }
    Ok(acc / samples as f64)
}

#[derive(Clone, Debug, Serialize)]
pub struct DiagnosticRow {
    pub n: usize,
    pub reps: usize,
    /// Median over replications of `sup_g |Z̄ₙ(g) - Z̃ₙ(g)|`.
    pub median_sup: f64,
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

/// Distance between the rank process and its linearisation
/// `Z̃ₙ(g) = ∫ [g + Σ_k T_k g] d𝕌ₙ`, `𝕌ₙ` being the empirical process of the
/// unranked uniform sample.
///
/// `T_k` is estimated from `reference` draws of the model shared by every
/// replication, so that
/// `Z̄ₙ - Z̃ₙ = n^{-1/2} Σ_i {g(rank_i) - g(U_i)} - Σ_k M^{-1} Σ_m ġ_k(V_m) √n (F_nk(V_mk) - V_mk)`.
/// Replication `r` at the `a`-th sample size draws from
/// `task_rng(seed, DOMAIN_DIAGNOSTIC + a, r)`.
pub fn equivalence_diagnostic(
    model: &CopulaModel,
    class: &IndexClass,
    n_values: &[usize],
    reps: usize,
    seed: u64,
    reference: usize,
) -> Result<Vec<DiagnosticRow>> {
    check_dim(model.dim(), class.dim())?;
    if let Some(g) = class.functions().iter().find(|g| !g.has_gradient()) {
        return Err(Error::NoGradient(g.id().to_string()));
    }
    if reps == 0 || reference == 0 || n_values.iter().any(|&n| n == 0) {
        return Err(Error::InvalidParameter("diagnostic needs reps, reference draws and sample sizes ≥ 1".into()));
    }
    let d = class.dim();
    let fns = class.functions();
    let v = model.sample_with(reference, &mut task_rng(seed, DOMAIN_REFERENCE, 0))?;
    // grad[g][k][m] = ġ_k(V_m) / M
    let grad: Vec<Vec<Vec<f64>>> = fns
        .iter()
        .map(|g| {
            (0..d)
                .map(|k| {
                    v.rows()
                        .map(|u| g.gradient(u, k).map(|x| x / reference as f64))
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let ref_cols: Vec<Vec<f64>> = (0..d).map(|k| v.column(k)).collect();

    let mut rows = Vec::with_capacity(n_values.len());
    for (a, &n) in n_values.iter().enumerate() {
        let sups: Vec<f64> = (0..reps)
            .into_par_iter()
            .map(|r| -> Result<f64> {
                let mut rng = task_rng(seed, DOMAIN_DIAGNOSTIC + a as u64, r as u64);
                let u = model.sample_with(n, &mut rng)?;
                let ps = pseudo_observations(&u)?;
                let root_n = (n as f64).sqrt();
                // √n (F_nk(V_mk) - V_mk)
                let bridge: Vec<Vec<f64>> = (0..d)
                    .map(|k| {
                        let mut col = u.column(k);
                        col.sort_by(f64::total_cmp);
                        ref_cols[k]
                            .iter()
                            .map(|&x| root_n * (col.partition_point(|&c| c <= x) as f64 / n as f64 - x))
                            .collect()
                    })
                    .collect();
                let mut sup: f64 = 0.0;
                for (g, grad_g) in fns.iter().zip(&grad) {
                    let direct: f64 = ps.rows().zip(u.rows()).map(|(r, x)| g.eval(r) - g.eval(x)).sum::<f64>() / root_n;
                    let linear: f64 = grad_g
                        .iter()
                        .zip(&bridge)
                        .map(|(w, b)| w.iter().zip(b).map(|(w, b)| w * b).sum::<f64>())
                        .sum();
                    sup = sup.max((direct - linear).abs());
                }
                Ok(sup)
            })
            .collect::<Result<_>>()?;
        rows.push(DiagnosticRow {
            n,
            reps,
            median_sup: median(sups),
        });
    }
    Ok(rows)
}
