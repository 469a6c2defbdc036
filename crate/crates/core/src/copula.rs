//! Copula evaluators and samplers.
//!
//! The catalogue mixes smooth families (independence, Gaussian) with
//! non-differentiable ones (Fréchet-Hoeffding bounds, Marshall-Olkin,
//! Cuadras-Augé, δ-constructions). Samplers are seeded and reentrant.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use statrs::function::erf::erfc;

use crate::bv::PointFn;
use crate::error::{check_dim, parse_err, Error, Result};

/// A diagonal-type function `δ: [0,1] → [0,1]`.
pub type DeltaFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DeltaForm {
    /// `min(u, v, (δ(u) + δ(v)) / 2)`.
    Min,
    /// `u - inf_{u ≤ x ≤ v} (x - δ(x))` for `u ≤ v`, symmetric otherwise.
    Inf,
}

#[derive(Clone)]
pub enum Family {
    Independence,
    /// Fréchet-Hoeffding upper bound `M`.
    Upper,
    /// Fréchet-Hoeffding lower bound `W`, bivariate only.
    Lower,
    MarshallOlkin { alpha: f64, beta: f64 },
    CuadrasAuge { theta: f64 },
    Gaussian { rho: f64 },
    Delta {
        delta: DeltaFn,
        form: DeltaForm,
        /// Printed form of `delta` for reports.
        label: String,
    },
}

impl fmt::Debug for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Independence => write!(f, "Independence"),
            Family::Upper => write!(f, "Upper"),
            Family::Lower => write!(f, "Lower"),
            Family::MarshallOlkin { alpha, beta } => {
                write!(f, "MarshallOlkin {{ alpha: {alpha}, beta: {beta} }}")
            }
            Family::CuadrasAuge { theta } => write!(f, "CuadrasAuge {{ theta: {theta} }}"),
            Family::Gaussian { rho } => write!(f, "Gaussian {{ rho: {rho} }}"),
            Family::Delta { form, label, .. } => write!(f, "Delta {{ {form:?}, {label} }}"),
        }
    }
}

/// A named copula family with parameters and dimension.
#[derive(Clone, Debug)]
pub struct CopulaModel {
    family: Family,
    dim: usize,
}

/// Mesh of the grid on which the inf-form δ-construction takes its infimum.
const DELTA_INF_MESH: f64 = 1e-4;

impl CopulaModel {
    pub fn independence(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        Ok(Self {
            family: Family::Independence,
            dim,
        })
    }

    pub fn upper(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        Ok(Self {
            family: Family::Upper,
            dim,
        })
    }

    pub fn lower() -> Self {
        Self {
            family: Family::Lower,
            dim: 2,
        }
    }

    pub fn marshall_olkin(alpha: f64, beta: f64) -> Result<Self> {
        unit_param("alpha", alpha)?;
        unit_param("beta", beta)?;
        Ok(Self {
            family: Family::MarshallOlkin { alpha, beta },
            dim: 2,
        })
    }

    pub fn cuadras_auge(theta: f64) -> Result<Self> {
        unit_param("theta", theta)?;
        Ok(Self {
            family: Family::CuadrasAuge { theta },
            dim: 2,
        })
    }

    pub fn gaussian(rho: f64) -> Result<Self> {
        if !(rho > -1.0 && rho < 1.0) {
            return Err(Error::InvalidParameter(format!("rho = {rho} outside (-1, 1)")));
        }
        Ok(Self {
            family: Family::Gaussian { rho },
            dim: 2,
        })
    }

    /// Evaluator-only construction from a user-supplied δ. Whether δ yields
    /// a copula is not checked.
    pub fn delta(delta: DeltaFn, form: DeltaForm, label: impl Into<String>) -> Self {
        Self {
            family: Family::Delta {
                delta,
                form,
                label: label.into(),
            },
            dim: 2,
        }
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn has_sampler(&self) -> bool {
        !matches!(self.family, Family::Delta { .. })
    }

    /// `C(u)`.
    pub fn cdf(&self, u: &[f64]) -> f64 {
        debug_assert_eq!(u.len(), self.dim);
        if u.iter().any(|&x| x <= 0.0) {
            return 0.0;
        }
        match &self.family {
            Family::Independence => u.iter().product(),
            Family::Upper => u.iter().copied().fold(1.0, f64::min),
            Family::Lower => (u[0] + u[1] - 1.0).max(0.0),
            Family::MarshallOlkin { alpha, beta } => marshall_olkin_cdf(*alpha, *beta, u[0], u[1]),
            Family::CuadrasAuge { theta } => marshall_olkin_cdf(*theta, *theta, u[0], u[1]),
            Family::Gaussian { rho } => gaussian_copula_cdf(*rho, u[0], u[1]),
            Family::Delta { delta, form, .. } => delta_cdf(delta.as_ref(), *form, u[0], u[1]),
        }
    }

    /// `n` i.i.d. draws, deterministic in `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<SampleMatrix> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_with(n, &mut rng)
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<SampleMatrix> {
        let d = self.dim;
        let mut values = Vec::with_capacity(n * d);
        for _ in 0..n {
            self.draw_into(rng, &mut values)?;
        }
        SampleMatrix::new(n, d, values)
    }

    fn draw_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<f64>) -> Result<()> {
        match &self.family {
            Family::Independence => out.extend((0..self.dim).map(|_| rng.random::<f64>())),
            Family::Upper => {
                let u = rng.random::<f64>();
                out.extend(std::iter::repeat_n(u, self.dim));
            }
            Family::Lower => {
                let u = rng.random::<f64>();
                out.extend([u, 1.0 - u]);
            }
            Family::MarshallOlkin { alpha, beta } => {
                out.extend(marshall_olkin_draw(rng, *alpha, *beta));
            }
            Family::CuadrasAuge { theta } => {
                out.extend(marshall_olkin_draw(rng, *theta, *theta));
            }
            Family::Gaussian { rho } => {
                let z1: f64 = rng.sample(StandardNormal);
                let z2: f64 = rng.sample(StandardNormal);
                let z2 = rho * z1 + (1.0 - rho * rho).sqrt() * z2;
                out.extend([normal_cdf(z1), normal_cdf(z2)]);
            }
            Family::Delta { .. } => return Err(Error::NoSampler(self.to_string())),
        }
        Ok(())
    }

    /// A stationary, geometrically mixing sequence whose rows all have the
    /// Gaussian copula of `self`.
    ///
    /// Each coordinate follows a latent AR(1) chain with coefficient
    /// `mixing_rho`; innovations carry the cross-sectional correlation, and
    /// the chain starts in its stationary law.
    pub fn sample_stationary(&self, mixing_rho: f64, n: usize, seed: u64) -> Result<SampleMatrix> {
        let Family::Gaussian { rho } = self.family else {
            return Err(Error::InvalidParameter(
                "stationary sampler needs a Gaussian base copula".into(),
            ));
        };
        if !(mixing_rho > 0.0 && mixing_rho < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "mixing_rho = {mixing_rho} outside (0, 1)"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let correlated = |rng: &mut ChaCha8Rng| {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            [a, rho * a + (1.0 - rho * rho).sqrt() * b]
        };
        let scale = (1.0 - mixing_rho * mixing_rho).sqrt();
        let mut state = correlated(&mut rng);
        let mut values = Vec::with_capacity(2 * n);
        for t in 0..n {
            if t > 0 {
                let e = correlated(&mut rng);
                state = [
                    mixing_rho * state[0] + scale * e[0],
                    mixing_rho * state[1] + scale * e[1],
                ];
            }
            values.extend([normal_cdf(state[0]), normal_cdf(state[1])]);
        }
        SampleMatrix::new(n, 2, values)
    }
}

impl PointFn for CopulaModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.cdf(x)
    }
}

impl fmt::Display for CopulaModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.family {
            Family::Independence => write!(f, "indep:d={}", self.dim),
            Family::Upper if self.dim == 2 => write!(f, "m"),
            Family::Upper => write!(f, "m:d={}", self.dim),
            Family::Lower => write!(f, "w"),
            Family::MarshallOlkin { alpha, beta } => write!(f, "mo:alpha={alpha},beta={beta}"),
            Family::CuadrasAuge { theta } => write!(f, "ca:theta={theta}"),
            Family::Gaussian { rho } => write!(f, "gauss:rho={rho}"),
            Family::Delta { form, label, .. } => {
                let form = match form {
                    DeltaForm::Min => "min",
                    DeltaForm::Inf => "inf",
                };
                write!(f, "delta:form={form},{label}")
            }
        }
    }
}

/// Parses `key=value,key=value` after the family tag.
pub(crate) fn parse_params(token: &str, body: &str) -> Result<Vec<(String, f64)>> {
    body.split(',')
        .filter(|s| !s.is_empty())
        .map(|kv| {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| parse_err(token, format!("expected key=value, got `{kv}`")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| parse_err(token, format!("`{v}` is not a number")))?;
            Ok((k.trim().to_string(), v))
        })
        .collect()
}

pub(crate) fn take_param(
    token: &str,
    params: &[(String, f64)],
    key: &str,
    default: Option<f64>,
) -> Result<f64> {
    params
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| *v)
        .or(default)
        .ok_or_else(|| parse_err(token, format!("missing `{key}`")))
}

pub(crate) fn reject_unknown(token: &str, params: &[(String, f64)], known: &[&str]) -> Result<()> {
    match params.iter().find(|(k, _)| !known.contains(&k.as_str())) {
        Some((k, _)) => Err(parse_err(token, format!("unknown parameter `{k}`"))),
        None => Ok(()),
    }
}

fn dim_param(token: &str, params: &[(String, f64)]) -> Result<usize> {
    let d = take_param(token, params, "d", Some(2.0))?;
    if d < 1.0 || d.fract() != 0.0 {
        return Err(parse_err(token, "d must be a positive integer"));
    }
    Ok(d as usize)
}

impl FromStr for CopulaModel {
    type Err = Error;

    /// `indep:d=3`, `m`, `w`, `mo:alpha=0.5,beta=0.5`, `ca:theta=0.3`,
    /// `gauss:rho=0.4`, `delta:form=min,power=2`.
    fn from_str(s: &str) -> Result<Self> {
        let (tag, body) = s.split_once(':').unwrap_or((s, ""));
        let params = if tag.trim() == "delta" { Vec::new() } else { parse_params(s, body)? };
        let model = match tag.trim() {
            "indep" => {
                reject_unknown(s, &params, &["d"])?;
                Self::independence(dim_param(s, &params)?)?
            }
            "m" => {
                reject_unknown(s, &params, &["d"])?;
                Self::upper(dim_param(s, &params)?)?
            }
            "w" => {
                reject_unknown(s, &params, &[])?;
                Self::lower()
            }
            "mo" => {
                reject_unknown(s, &params, &["alpha", "beta"])?;
                Self::marshall_olkin(
                    take_param(s, &params, "alpha", None)?,
                    take_param(s, &params, "beta", None)?,
                )?
            }
            "ca" => {
                reject_unknown(s, &params, &["theta"])?;
                Self::cuadras_auge(take_param(s, &params, "theta", None)?)?
            }
            "gauss" => {
                reject_unknown(s, &params, &["rho"])?;
                Self::gaussian(take_param(s, &params, "rho", None)?)?
            }
            "delta" => {
                let form = match body.split(',').find_map(|kv| kv.strip_prefix("form=")) {
                    Some("min") => DeltaForm::Min,
                    Some("inf") => DeltaForm::Inf,
                    _ => return Err(parse_err(s, "delta needs form=min or form=inf")),
                };
                let numeric = parse_params(
                    s,
                    &body
                        .split(',')
                        .filter(|kv| !kv.starts_with("form="))
                        .collect::<Vec<_>>()
                        .join(","),
                )?;
                reject_unknown(s, &numeric, &["power"])?;
                let p = take_param(s, &numeric, "power", Some(2.0))?;
                if p < 1.0 {
                    return Err(parse_err(s, "power must be at least 1"));
                }
                Self::delta(Arc::new(move |t: f64| t.powf(p)), form, format!("power={p}"))
            }
            other => return Err(parse_err(other, "unknown copula family")),
        };
        Ok(model)
    }
}

fn unit_param(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} = {v} outside [0, 1]")))
    }
}

fn marshall_olkin_cdf(alpha: f64, beta: f64, u: f64, v: f64) -> f64 {
    (u.powf(1.0 - alpha) * v).min(u * v.powf(1.0 - beta))
}

/// Exponential shock construction with rates `λ1 = (1-α)/α`, `λ2 = (1-β)/β`
/// and a common shock of rate 1; each lifetime is mapped through its own
/// survival function. A zero rate is an infinite shock.
fn marshall_olkin_draw<R: Rng + ?Sized>(rng: &mut R, alpha: f64, beta: f64) -> [f64; 2] {
    let e1: f64 = rng.sample(Exp1);
    let e2: f64 = rng.sample(Exp1);
    let e12: f64 = rng.sample(Exp1);
    if alpha == 0.0 || beta == 0.0 {
        // no common shock: the copula is the product copula
        return [(-e1).exp(), (-e2).exp()];
    }
    let lifetime = |own_rate: f64, own: f64| {
        let own_time = if own_rate > 0.0 { own / own_rate } else { f64::INFINITY };
        own_time.min(e12)
    };
    let l1 = (1.0 - alpha) / alpha;
    let l2 = (1.0 - beta) / beta;
    [
        (-(l1 + 1.0) * lifetime(l1, e1)).exp(),
        (-(l2 + 1.0) * lifetime(l2, e2)).exp(),
    ]
}

fn delta_cdf(delta: &(dyn Fn(f64) -> f64 + Send + Sync), form: DeltaForm, u: f64, v: f64) -> f64 {
    match form {
        DeltaForm::Min => u.min(v).min(0.5 * (delta(u) + delta(v))),
        DeltaForm::Inf => {
            let (lo, hi) = if u <= v { (u, v) } else { (v, u) };
            let phi = |x: f64| x - delta(x);
            let mut inf = phi(lo).min(phi(hi));
            let first = (lo / DELTA_INF_MESH).ceil() as i64;
            let last = (hi / DELTA_INF_MESH).floor() as i64;
            for k in first..=last {
                inf = inf.min(phi(k as f64 * DELTA_INF_MESH));
            }
            lo - inf
        }
    }
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn gaussian_copula_cdf(rho: f64, u: f64, v: f64) -> f64 {
    if u >= 1.0 {
        return v.min(1.0);
    }
    if v >= 1.0 {
        return u;
    }
    bivariate_normal_cdf(normal_quantile(u), normal_quantile(v), rho)
}

/// `Φ⁻¹(p)`, polished with Newton steps against [`normal_cdf`].
pub fn normal_quantile(p: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    let mut x = Normal::standard().inverse_cdf(p);
    if x.is_finite() {
        for _ in 0..2 {
            let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
            if pdf > 0.0 {
                x -= (normal_cdf(x) - p) / pdf;
            }
        }
    }
    x
}

/// `P(X ≤ h, Y ≤ k)` for a standard bivariate normal with correlation `rho`,
/// following Genz's BVNU routine (Drezner-Wesolowsky with Gauss-Legendre
/// quadrature; absolute error around 1e-15).
pub fn bivariate_normal_cdf(h: f64, k: f64, rho: f64) -> f64 {
    if h == f64::NEG_INFINITY || k == f64::NEG_INFINITY {
        return 0.0;
    }
    if h == f64::INFINITY {
        return normal_cdf(k);
    }
    if k == f64::INFINITY {
        return normal_cdf(h);
    }
    bvnu(-h, -k, rho)
}

pub(crate) const GL6: ([f64; 3], [f64; 3]) = (
    [0.171_324_492_379_170_5, 0.360_761_573_048_138_4, 0.467_913_934_572_690_4],
    [-0.932_469_514_203_152_2, -0.661_209_386_466_264_7, -0.238_619_186_083_197],
);
const GL12: ([f64; 6], [f64; 6]) = (
    [
        0.047_175_336_386_511_77,
        0.106_939_325_995_318_3,
        0.160_078_328_543_346_4,
        0.203_167_426_723_065_9,
        0.233_492_536_538_354_7,
        0.249_147_045_813_402_9,
    ],
    [
        -0.981_560_634_246_719_1,
        -0.904_117_256_370_475,
        -0.769_902_674_194_305,
        -0.587_317_954_286_617_1,
        -0.367_831_498_998_180_2,
        -0.125_233_408_511_469_2,
    ],
);
const GL20: ([f64; 10], [f64; 10]) = (
    [
        0.017_614_007_139_152_12,
        0.040_601_429_800_386_94,
        0.062_672_048_334_109_06,
        0.083_276_741_576_704_75,
        0.101_930_119_817_240_4,
        0.118_194_531_961_518_4,
        0.131_688_638_449_176_6,
        0.142_096_109_318_382_1,
        0.149_172_986_472_603_7,
        0.152_753_387_130_725_9,
    ],
    [
        -0.993_128_599_185_094_9,
        -0.963_971_927_277_913_8,
        -0.912_234_428_251_325_9,
        -0.839_116_971_822_218_8,
        -0.746_331_906_460_150_8,
        -0.636_053_680_726_515,
        -0.510_867_001_950_827_1,
        -0.373_706_088_715_419_6,
        -0.227_785_851_141_645_1,
        -0.076_526_521_133_497_33,
    ],
);

/// Upper orthant probability `P(X > dh, Y > dk)`.
fn bvnu(dh: f64, dk: f64, r: f64) -> f64 {
    let (w, x): (&[f64], &[f64]) = if r.abs() < 0.3 {
        (&GL6.0, &GL6.1)
    } else if r.abs() < 0.75 {
        (&GL12.0, &GL12.1)
    } else {
        (&GL20.0, &GL20.1)
    };
    let two_pi = 2.0 * std::f64::consts::PI;
    let h = dh;
    let mut k = dk;
    let mut hk = h * k;
    let mut bvn = 0.0;
    if r.abs() < 0.925 {
        let hs = (h * h + k * k) / 2.0;
        let asr = r.asin();
        for i in 0..w.len() {
            for s in [1.0, -1.0] {
                let sn = (asr * (1.0 + s * x[i]) / 2.0).sin();
                bvn += w[i] * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
            }
        }
        return bvn * asr / (2.0 * two_pi) + normal_cdf(-h) * normal_cdf(-k);
    }
    if r < 0.0 {
        k = -k;
        hk = -hk;
    }
    if r.abs() < 1.0 {
        let as_ = (1.0 - r) * (1.0 + r);
        let mut a = as_.sqrt();
        let bs = (h - k) * (h - k);
        let c = (4.0 - hk) / 8.0;
        let d = (12.0 - hk) / 16.0;
        bvn = a
            * (-(bs / as_ + hk) / 2.0).exp()
            * (1.0 - c * (bs - as_) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as_ * as_ / 5.0);
        if hk > -160.0 {
            let b = bs.sqrt();
            bvn -= (-hk / 2.0).exp()
                * two_pi.sqrt()
                * normal_cdf(-b / a)
                * b
                * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
        }
        a /= 2.0;
        for i in 0..w.len() {
            for s in [-1.0, 1.0] {
                let xs = (a * (s * x[i] + 1.0)).powi(2);
                let rs = (1.0 - xs).sqrt();
                let asr = -(bs / xs + hk) / 2.0;
                if asr > -100.0 {
                    bvn += a
                        * w[i]
                        * asr.exp()
                        * ((-hk * (1.0 - rs) / (2.0 * (1.0 + rs))).exp() / rs
                            - (1.0 + c * xs * (1.0 + d * xs)));
                }
            }
        }
        bvn = -bvn / two_pi;
    }
    if r > 0.0 {
        bvn + normal_cdf(-h.max(k))
    } else {
        bvn = -bvn;
        if k > h {
            if h < 0.0 {
                bvn += normal_cdf(k) - normal_cdf(h);
            } else {
                bvn += normal_cdf(-h) - normal_cdf(-k);
            }
        }
        bvn
    }
}

/// An `n × d` sample stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleMatrix {
    n: usize,
    dim: usize,
    values: Vec<f64>,
}

impl SampleMatrix {
    pub fn new(n: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("sample dimension must be positive".into()));
        }
        check_dim(n * dim, values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("sample contains non-finite values".into()));
        }
        Ok(Self { n, dim, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map(Vec::len).unwrap_or(0);
        let mut values = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            check_dim(dim, r.len())?;
            values.extend_from_slice(r);
        }
        Self::new(rows.len(), dim, values)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dim)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    /// Applies `t` to every entry of column `j`.
    pub fn map_column<T: Fn(f64) -> f64>(&self, j: usize, t: T) -> Self {
        let mut out = self.clone();
        for r in out.values.chunks_exact_mut(self.dim) {
            r[j] = t(r[j]);
        }
        out
    }

    /// Rows `idx[0], idx[1], ...` of `self`.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut values = Vec::with_capacity(idx.len() * self.dim);
        for &i in idx {
            values.extend_from_slice(self.row(i));
        }
        Self {
            n: idx.len(),
            dim: self.dim,
            values,
        }
    }

    /// CSV with header `x1,…,xd`, LF line endings, 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record((1..=self.dim).map(|j| format!("x{j}")))?;
        for r in self.rows() {
            w.write_record(r.iter().map(|&v| format_g17(v)))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let dim = rd.headers()?.len();
        let mut values = Vec::new();
        let mut n = 0;
        for rec in rd.records() {
            let rec = rec?;
            check_dim(dim, rec.len())?;
            for field in rec.iter() {
                values.push(
                    field
                        .parse::<f64>()
                        .map_err(|_| parse_err(field, "not a real number"))?,
                );
            }
            n += 1;
        }
        Self::new(n, dim, values)
    }
}

/// `%.17g`-style formatting: 17 significant digits, trailing zeros dropped.
pub fn format_g17(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-5..17).contains(&exp) {
        let decimals = (16 - exp).max(0) as usize;
        let fixed = format!("{x:.decimals$}");
        if fixed.contains('.') {
            fixed.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            fixed
        }
    } else {
        let mantissa = if mantissa.contains('.') {
            mantissa.trim_end_matches('0').trim_end_matches('.')
        } else {
            mantissa
        };
        format!("{mantissa}e{exp}")
    }
}
