//! Index functions `g` and the finite classes over which processes are
//! evaluated.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bv::{hk_variation, random_step_function, GridStepFunction, IndexSet, PointFn, VariationMode};
use crate::copula::{parse_params, reject_unknown, take_param, CopulaModel, Family};
use crate::error::{check_dim, parse_err, Error, Result};

/// Largest total degree accepted by the polynomial class.
pub const MAX_POLY_DEGREE: u32 = 4;

#[derive(Clone, Debug)]
pub enum IndexKind {
    Constant(f64),
    /// `1{x < u}` coordinatewise.
    Indicator(Vec<f64>),
    /// `exp(<t, x>)`.
    Mgf(Vec<f64>),
    /// `Π x_j^{a_j}`.
    Monomial(Vec<u32>),
    Step,
}

/// An index function with its optional capabilities.
#[derive(Clone, Debug)]
pub struct IndexFunction {
    id: String,
    dim: usize,
    kind: IndexKind,
    /// Added to every value.
    offset: f64,
    step: Option<GridStepFunction>,
    hk_bound: f64,
}

impl IndexFunction {
    pub fn constant(dim: usize, c: f64) -> Self {
        Self {
            id: format!("const({c})"),
            dim,
            kind: IndexKind::Constant(c),
            offset: 0.0,
            step: Some(GridStepFunction::constant(dim, c)),
            hk_bound: c.abs(),
        }
    }

    /// The right-continuous indicator `1{x < u}`.
    pub fn indicator(u: &[f64]) -> Result<Self> {
        let step = GridStepFunction::indicator_below(u)?;
        let hk = hk_variation(&step, VariationMode::Exact)?.value;
        Ok(Self {
            id: format!("ind({})", join(u)),
            dim: u.len(),
            kind: IndexKind::Indicator(u.to_vec()),
            offset: 0.0,
            step: Some(step),
            hk_bound: hk,
        })
    }

    pub fn mgf(t: &[f64]) -> Result<Self> {
        if t.is_empty() || t.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
            return Err(Error::InvalidParameter(format!("mgf parameter ({}) outside [0,1]^d", join(t))));
        }
        // exp(<t,x>) is monotone, so every anchored projection has variation
        // equal to its volume; summing over subsets factorises.
        let hk = t.iter().map(|&s| 2.0 * s.exp() - 1.0).product();
        Ok(Self {
            id: format!("mgf({})", join(t)),
            dim: t.len(),
            kind: IndexKind::Mgf(t.to_vec()),
            offset: 0.0,
            step: None,
            hk_bound: hk,
        })
    }

    pub fn monomial(powers: &[u32]) -> Result<Self> {
        if powers.is_empty() {
            return Err(Error::InvalidParameter("monomial needs at least one coordinate".into()));
        }
        let active = powers.iter().filter(|&&a| a > 0).count();
        Ok(Self {
            id: format!(
                "mono({})",
                powers.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(",")
            ),
            dim: powers.len(),
            kind: IndexKind::Monomial(powers.to_vec()),
            offset: 0.0,
            step: None,
            hk_bound: (1u64 << active) as f64,
        })
    }

    pub fn step(id: impl Into<String>, step: GridStepFunction) -> Result<Self> {
        let hk = hk_variation(&step, VariationMode::Exact)?.value;
        Ok(Self {
            id: id.into(),
            dim: step.dim(),
            kind: IndexKind::Step,
            offset: 0.0,
            step: Some(step),
            hk_bound: hk,
        })
    }

    /// `g + c`.
    pub fn shifted(&self, c: f64) -> Self {
        let mut out = self.clone();
        if c == 0.0 {
            return out;
        }
        let at_one_before = self.eval(&vec![1.0; self.dim]);
        out.offset += c;
        out.id = format!("{}{:+}", self.id, c);
        out.step = self.step.as_ref().map(|s| s.shifted(c));
        out.hk_bound = self.hk_bound - at_one_before.abs() + (at_one_before + c).abs();
        out
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn kind(&self) -> &IndexKind {
        &self.kind
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// The class constant `T`: an upper bound on the Hardy-Krause variation
    /// (exact for every shipped kind).
    pub fn hk_bound(&self) -> f64 {
        self.hk_bound
    }

    pub fn step_repr(&self) -> Option<&GridStepFunction> {
        self.step.as_ref()
    }

    pub fn has_gradient(&self) -> bool {
        matches!(
            self.kind,
            IndexKind::Constant(_) | IndexKind::Mgf(_) | IndexKind::Monomial(_)
        )
    }

    /// `∂g/∂x_k`.
    pub fn gradient(&self, x: &[f64], k: usize) -> Result<f64> {
        match &self.kind {
            IndexKind::Constant(_) => Ok(0.0),
            IndexKind::Mgf(t) => Ok(t[k] * mgf_value(t, x)),
            IndexKind::Monomial(a) => Ok(monomial_partial(a, x, IndexSet::empty().with(k))),
            _ => Err(Error::NoGradient(self.id.clone())),
        }
    }

    /// `∂^I g` for the smooth kinds; the empty set gives `g` itself.
    pub fn mixed_partial(&self, x: &[f64], subset: IndexSet) -> Option<f64> {
        if subset.is_empty() {
            return Some(self.eval(x));
        }
        match &self.kind {
            IndexKind::Constant(_) => Some(0.0),
            IndexKind::Mgf(t) => Some(subset.members().map(|j| t[j]).product::<f64>() * mgf_value(t, x)),
            IndexKind::Monomial(a) => Some(monomial_partial(a, x, subset)),
            _ => None,
        }
    }

    /// `E[g(U)]` for `U ~ model`, where an exact expression is known.
    pub fn closed_form_expectation(&self, model: &CopulaModel) -> Result<f64> {
        check_dim(self.dim, model.dim())?;
        let none = || Error::NoClosedForm {
            function: self.id.clone(),
            model: model.to_string(),
        };
        let base = match (&self.kind, model.family()) {
            (IndexKind::Constant(c), _) => *c,
            // margins are continuous, so strict and weak inequalities agree
            (IndexKind::Indicator(u), _) => model.cdf(u),
            (IndexKind::Step, _) => {
                let step = self.step.as_ref().expect("step kind has a representation");
                step_expectation(step, model) - self.offset
            }
            (IndexKind::Mgf(t), Family::Independence) => t.iter().map(|&s| exp_mean(s)).product(),
            (IndexKind::Mgf(t), Family::Upper) => exp_mean(t.iter().sum()),
            (IndexKind::Mgf(t), Family::Lower) => t[1].exp() * exp_mean(t[0] - t[1]),
            (IndexKind::Monomial(a), Family::Independence) => {
                a.iter().map(|&p| 1.0 / (p as f64 + 1.0)).product()
            }
            (IndexKind::Monomial(a), Family::Upper) => 1.0 / (a.iter().sum::<u32>() as f64 + 1.0),
            (IndexKind::Monomial(a), Family::Lower) => beta_integer(a[0], a[1]),
            _ => return Err(none()),
        };
        Ok(base + self.offset)
    }
}

impl PointFn for IndexFunction {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64]) -> f64 {
        let base = match &self.kind {
            IndexKind::Constant(c) => *c,
            IndexKind::Indicator(u) => {
                if x.iter().zip(u).all(|(x, u)| x < u) {
                    1.0
                } else {
                    0.0
                }
            }
            IndexKind::Mgf(t) => mgf_value(t, x),
            IndexKind::Monomial(a) => x.iter().zip(a).map(|(x, &p)| x.powi(p as i32)).product(),
            IndexKind::Step => return self.step.as_ref().expect("step representation").eval(x),
        };
        base + self.offset
    }

    fn as_step(&self) -> Option<&GridStepFunction> {
        self.step.as_ref()
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn mgf_value(t: &[f64], x: &[f64]) -> f64 {
    t.iter().zip(x).map(|(t, x)| t * x).sum::<f64>().exp()
}

fn monomial_partial(a: &[u32], x: &[f64], subset: IndexSet) -> f64 {
    let mut v = 1.0;
    for (j, (&p, &xj)) in a.iter().zip(x).enumerate() {
        if subset.contains(j) {
            if p == 0 {
                return 0.0;
            }
            v *= p as f64 * xj.powi(p as i32 - 1);
        } else {
            v *= xj.powi(p as i32);
        }
    }
    v
}

/// `∫_0^1 e^{s x} dx`.
fn exp_mean(s: f64) -> f64 {
    if s.abs() < 1e-8 {
        1.0 + s / 2.0 + s * s / 6.0
    } else {
        s.exp_m1() / s
    }
}

/// `∫_0^1 u^a (1-u)^b du = a! b! / (a+b+1)!`.
fn beta_integer(a: u32, b: u32) -> f64 {
    let fact = |k: u32| (1..=k).map(f64::from).product::<f64>();
    fact(a) * fact(b) / fact(a + b + 1)
}

/// `Σ_cells value · P(U ∈ cell)`, cells being `[lo, hi)` per axis.
fn step_expectation(step: &GridStepFunction, model: &CopulaModel) -> f64 {
    let d = step.dim();
    let shape = step.shape();
    let mut total = 0.0;
    let mut corner = vec![0.0; d];
    crate::bv::for_each_index(&shape, |idx| {
        let value = step.value_at_cell(idx);
        if value == 0.0 {
            return;
        }
        let mut prob = 0.0;
        for s in IndexSet::all(d) {
            for j in 0..d {
                let b = &step.axis_breaks()[j];
                let lo = b[idx[j]];
                let hi = b.get(idx[j] + 1).copied().unwrap_or(1.0);
                corner[j] = if s.contains(j) { lo } else { hi };
            }
            prob += s.sign() * model.cdf(&corner);
        }
        total += value * prob;
    });
    total
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClassKind {
    Constant,
    Indicator,
    Mgf,
    Polynomial,
    Step,
}

/// A parsed class specification.
#[derive(Clone, Debug, PartialEq)]
pub enum ClassSpec {
    Constant { dim: usize, c: f64 },
    Indicator { dim: usize, grid: usize },
    Mgf { dim: usize, grid: usize },
    Polynomial { dim: usize, degree: u32 },
    Step { dim: usize, res: usize, count: usize, cap: f64, seed: u64 },
}

impl ClassSpec {
    pub fn dim(&self) -> usize {
        match *self {
            ClassSpec::Constant { dim, .. }
            | ClassSpec::Indicator { dim, .. }
            | ClassSpec::Mgf { dim, .. }
            | ClassSpec::Polynomial { dim, .. }
            | ClassSpec::Step { dim, .. } => dim,
        }
    }

    /// The same spec in dimension `dim`.
    pub fn with_dim(mut self, d: usize) -> Self {
        match &mut self {
            ClassSpec::Constant { dim, .. }
            | ClassSpec::Indicator { dim, .. }
            | ClassSpec::Mgf { dim, .. }
            | ClassSpec::Polynomial { dim, .. }
            | ClassSpec::Step { dim, .. } => *dim = d,
        }
        self
    }
}

impl fmt::Display for ClassSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassSpec::Constant { dim, c } => write!(f, "const:c={c},d={dim}"),
            ClassSpec::Indicator { dim, grid } => write!(f, "indicator:grid={grid},d={dim}"),
            ClassSpec::Mgf { dim, grid } => write!(f, "mgf:grid={grid},d={dim}"),
            ClassSpec::Polynomial { dim, degree } => write!(f, "poly:deg={degree},d={dim}"),
            ClassSpec::Step { dim, res, count, cap, seed } => {
                write!(f, "step:res={res},count={count},T={cap},seed={seed},d={dim}")
            }
        }
    }
}

fn count_param(token: &str, params: &[(String, f64)], key: &str, default: Option<f64>) -> Result<usize> {
    let v = take_param(token, params, key, default)?;
    if v < 0.0 || v.fract() != 0.0 || v > u32::MAX as f64 {
        return Err(parse_err(token, format!("`{key}` must be a non-negative integer")));
    }
    Ok(v as usize)
}

impl FromStr for ClassSpec {
    type Err = Error;

    /// `indicator:grid=5`, `mgf:grid=3`, `poly:deg=2`,
    /// `step:res=8,count=20,T=5,seed=7`, `const:c=1`; each accepts `d=`
    /// (default 2).
    fn from_str(s: &str) -> Result<Self> {
        let (tag, body) = s.split_once(':').unwrap_or((s, ""));
        let params = parse_params(s, body)?;
        let dim = count_param(s, &params, "d", Some(2.0))?;
        if dim == 0 || dim > crate::bv::MAX_DIM {
            return Err(parse_err(s, format!("d must lie in 1..={}", crate::bv::MAX_DIM)));
        }
        let spec = match tag.trim() {
            "const" => {
                reject_unknown(s, &params, &["c", "d"])?;
                ClassSpec::Constant { dim, c: take_param(s, &params, "c", Some(1.0))? }
            }
            "indicator" => {
                reject_unknown(s, &params, &["grid", "d"])?;
                ClassSpec::Indicator { dim, grid: count_param(s, &params, "grid", None)? }
            }
            "mgf" => {
                reject_unknown(s, &params, &["grid", "d"])?;
                ClassSpec::Mgf { dim, grid: count_param(s, &params, "grid", None)? }
            }
            "poly" => {
                reject_unknown(s, &params, &["deg", "d"])?;
                ClassSpec::Polynomial { dim, degree: count_param(s, &params, "deg", Some(2.0))? as u32 }
            }
            "step" => {
                reject_unknown(s, &params, &["res", "count", "T", "seed", "d"])?;
                ClassSpec::Step {
                    dim,
                    res: count_param(s, &params, "res", None)?,
                    count: count_param(s, &params, "count", None)?,
                    cap: take_param(s, &params, "T", None)?,
                    seed: count_param(s, &params, "seed", None)? as u64,
                }
            }
            other => return Err(parse_err(other, "unknown index class")),
        };
        Ok(spec)
    }
}

/// A finite class `𝒢` of index functions sharing dimension and capabilities.
#[derive(Clone, Debug)]
pub struct IndexClass {
    kind: ClassKind,
    spec: String,
    functions: Vec<IndexFunction>,
}

impl IndexClass {
    pub fn new(kind: ClassKind, spec: impl Into<String>, functions: Vec<IndexFunction>) -> Result<Self> {
        let Some(first) = functions.first() else {
            return Err(Error::InvalidParameter("index class is empty".into()));
        };
        let d = first.dim;
        for g in &functions {
            check_dim(d, g.dim)?;
        }
        Ok(Self {
            kind,
            spec: spec.into(),
            functions,
        })
    }

    pub fn kind(&self) -> ClassKind {
        self.kind
    }

    pub fn spec(&self) -> &str {
        &self.spec
    }

    pub fn functions(&self) -> &[IndexFunction] {
        &self.functions
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.functions[0].dim
    }

    pub fn has_gradients(&self) -> bool {
        self.functions.iter().all(IndexFunction::has_gradient)
    }

    /// Every member shifted by `c`.
    pub fn shifted(&self, c: f64) -> Self {
        Self {
            kind: self.kind,
            spec: format!("{}+{c}", self.spec),
            functions: self.functions.iter().map(|g| g.shifted(c)).collect(),
        }
    }
}

/// Interior grid `k/(grid+1)`, `k = 1..=grid`.
fn interior_grid(grid: usize) -> Vec<f64> {
    (1..=grid).map(|k| k as f64 / (grid + 1) as f64).collect()
}

/// `grid` equispaced points covering `[0,1]`; a single point is `1`.
fn closed_grid(grid: usize) -> Vec<f64> {
    if grid == 1 {
        return vec![1.0];
    }
    (0..grid).map(|k| k as f64 / (grid - 1) as f64).collect()
}

fn product_grid(axis: &[f64], dim: usize) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::with_capacity(dim)];
    for _ in 0..dim {
        out = out
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&x| {
                    let mut q = p.clone();
                    q.push(x);
                    q
                })
            })
            .collect();
    }
    out
}

fn multi_indices(dim: usize, max_total: u32) -> Vec<Vec<u32>> {
    let mut out = vec![vec![]];
    for _ in 0..dim {
        out = out
            .into_iter()
            .flat_map(|p: Vec<u32>| {
                let used: u32 = p.iter().sum();
                (0..=max_total - used).map(move |a| {
                    let mut q = p.clone();
                    q.push(a);
                    q
                })
            })
            .collect();
    }
    out
}

pub fn build_class(spec: &ClassSpec) -> Result<IndexClass> {
    let text = spec.to_string();
    match *spec {
        ClassSpec::Constant { dim, c } => {
            IndexClass::new(ClassKind::Constant, text, vec![IndexFunction::constant(dim, c)])
        }
        ClassSpec::Indicator { dim, grid } => {
            if grid == 0 {
                return Err(Error::InvalidParameter("indicator grid is empty".into()));
            }
            let fns = product_grid(&interior_grid(grid), dim)
                .iter()
                .map(|u| IndexFunction::indicator(u))
                .collect::<Result<_>>()?;
            IndexClass::new(ClassKind::Indicator, text, fns)
        }
        ClassSpec::Mgf { dim, grid } => {
            if grid == 0 {
                return Err(Error::InvalidParameter("mgf grid is empty".into()));
            }
            let fns = product_grid(&closed_grid(grid), dim)
                .iter()
                .map(|t| IndexFunction::mgf(t))
                .collect::<Result<_>>()?;
            IndexClass::new(ClassKind::Mgf, text, fns)
        }
        ClassSpec::Polynomial { dim, degree } => {
            if degree > MAX_POLY_DEGREE {
                return Err(Error::InvalidParameter(format!(
                    "polynomial degree {degree} exceeds {MAX_POLY_DEGREE}"
                )));
            }
            let fns = multi_indices(dim, degree)
                .iter()
                .map(|a| IndexFunction::monomial(a))
                .collect::<Result<_>>()?;
            IndexClass::new(ClassKind::Polynomial, text, fns)
        }
        ClassSpec::Step { dim, res, count, cap, seed } => {
            if res == 0 || count == 0 {
                return Err(Error::InvalidParameter("step class needs res ≥ 1 and count ≥ 1".into()));
            }
            if !(cap > 0.0 && cap.is_finite()) {
                return Err(Error::InvalidParameter(format!("variation cap T = {cap} must be positive")));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut fns = Vec::with_capacity(count);
            for i in 0..count {
                let mut step = random_step_function(&mut rng, dim, res, 0.5);
                let hk = hk_variation(&step, VariationMode::Exact)?.value;
                if hk > cap {
                    // a hair below the cap so rounding in the rescaled sum stays under it
                    step = step.scaled(cap / hk * (1.0 - 1e-12));
                }
                fns.push(IndexFunction::step(format!("step{i}"), step)?);
            }
            IndexClass::new(ClassKind::Step, text, fns)
        }
    }
}

/// The class constant `T`: the largest member variation bound.
pub fn class_hk_bound(class: &IndexClass) -> f64 {
    class.functions.iter().map(IndexFunction::hk_bound).fold(0.0, f64::max)
}

/// Largest Hardy-Krause variation over the class, recomputed: exactly for
/// members with a step representation, by ladder refinement otherwise.
pub fn class_hk_variation(class: &IndexClass, tol: f64, max_depth: u32) -> Result<crate::bv::Variation> {
    let mut best = crate::bv::Variation {
        value: 0.0,
        converged: true,
        depth: None,
    };
    for g in &class.functions {
        let v = match g.step_repr() {
            Some(step) => hk_variation(step, VariationMode::Exact)?,
            None => hk_variation(g, VariationMode::Refine { tol, max_depth })?,
        };
        best.converged &= v.converged;
        if v.value > best.value {
            best.value = v.value;
            best.depth = v.depth;
        }
    }
    Ok(best)
}
