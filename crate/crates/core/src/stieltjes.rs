//! Lebesgue-Stieltjes integrals against atomic measures and the
//! multivariate integration-by-parts formula.
//!
//! For right-continuous `f, g` of bounded Hardy-Krause variation on `[a, b]`,
//!
//! ```text
//! ∫_(a,b] f dg = Σ_{I1+I2+I3 = {1..d}} (-1)^{|I1|+|I2|}
//!                  ∫_(a_I1, b_I1] g(x_I1- ; a_I2 : b_I3) df(x_I1 ; a_I2 : b_I3)
//! ```
//!
//! where a term with `I1 = ∅` is the corner product `(fg)(a_I2 : b_I3)`.
//! There are `3^d` terms. When `g` vanishes on every lower face only the
//! `I2 = ∅` terms survive, leaving `2^d`.
//!
//! All inner integrals are exact sums over the atoms of the projected
//! measures of `f`; nothing here uses quadrature.

use serde::{Deserialize, Serialize};

use crate::bv::{
    concat, projection_measure_weight, for_each_index, GridStepFunction, HalfOpenBox, IndexSet,
    PointFn, SignedMeasure,
};
use crate::error::{check_dim, Error, Result};

/// `Σ_atoms f(loc) · w`.
pub fn integrate<F: PointFn + ?Sized>(f: &F, mu: &SignedMeasure) -> Result<f64> {
    check_dim(f.dim(), mu.dim())?;
    Ok(mu.atoms().iter().map(|a| f.eval(&a.loc) * a.w).sum())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IbpMode {
    /// All `3^d` partitions.
    General,
    /// The `2^d` terms left when `g` vanishes on the lower faces.
    VanishingFaces,
}

/// How `g` is read at the atoms of `f`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitRule {
    /// Left limit in the integrated coordinates (the exact formula).
    Left,
    /// Plain value; exact only when `f` or `g` is continuous.
    Value,
}

/// One signed term of the partition sum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IbpTerm {
    /// Integrated coordinates `I1`.
    pub integrated: IndexSet,
    /// Coordinates pinned at the lower corner, `I2`.
    pub at_lower: IndexSet,
    /// Coordinates pinned at the upper corner, `I3`.
    pub at_upper: IndexSet,
    /// Contribution including the sign `(-1)^{|I1|+|I2|}`.
    pub value: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IbpReport {
    /// `∫ f dg` computed from the atoms of `g`.
    pub lhs: f64,
    /// The partition sum.
    pub rhs: f64,
    pub term_count: usize,
    pub max_term_magnitude: f64,
    pub abs_diff: f64,
}

/// The signed terms of the integration-by-parts sum, in enumeration order:
/// `I1` in binary counting order, then `I2` over subsets of `-I1`.
pub fn ibp_terms(
    f: &GridStepFunction,
    g: &GridStepFunction,
    bx: &HalfOpenBox,
    mode: IbpMode,
    limits: LimitRule,
) -> Result<Vec<IbpTerm>> {
    let d = f.dim();
    check_dim(d, g.dim())?;
    check_dim(d, bx.dim())?;
    if mode == IbpMode::VanishingFaces {
        g.check_vanishing_lower_faces(bx)?;
    }
    let full = IndexSet::full(d);
    let mut terms = Vec::new();
    for i1 in IndexSet::all(d) {
        let rest = i1.complement(d);
        let lower_choices: Vec<IndexSet> = match mode {
            IbpMode::General => rest.subsets().collect(),
            IbpMode::VanishingFaces => vec![IndexSet::empty()],
        };
        for i2 in lower_choices {
            let i3 = IndexSet::from_bits(full.bits() & !i1.bits() & !i2.bits());
            let anchor: Vec<f64> = (0..d)
                .map(|j| if i2.contains(j) { bx.lower()[j] } else { bx.upper()[j] })
                .collect();
            let sign = if (i1.len() + i2.len()) % 2 == 0 { 1.0 } else { -1.0 };
            let raw = if i1.is_empty() {
                f.eval(&anchor) * g.eval(&anchor)
            } else {
                projected_integral(f, g, i1, &anchor, bx, limits)?
            };
            terms.push(IbpTerm {
                integrated: i1,
                at_lower: i2,
                at_upper: i3,
                value: sign * raw,
            });
        }
    }
    Ok(terms)
}

/// `∫_(a_I, b_I] g(x_I- ; c) df(x_I ; c)` over the atoms of the projection.
fn projected_integral(
    f: &GridStepFunction,
    g: &GridStepFunction,
    subset: IndexSet,
    anchor: &[f64],
    bx: &HalfOpenBox,
    limits: LimitRule,
) -> Result<f64> {
    let members: Vec<usize> = subset.members().collect();
    // Break indices k >= 1 with a_j < b_k <= b_j; the atom at b_k collects
    // the jump over (b_{k-1}, b_k].
    let candidates: Vec<Vec<usize>> = members
        .iter()
        .map(|&j| {
            let breaks = &f.axis_breaks()[j];
            (1..breaks.len())
                .filter(|&k| breaks[k] > bx.lower()[j] && breaks[k] <= bx.upper()[j])
                .collect()
        })
        .collect();
    let shape: Vec<usize> = candidates.iter().map(Vec::len).collect();
    let mut total = 0.0;
    let mut failure = None;
    for_each_index(&shape, |rel| {
        if failure.is_some() {
            return;
        }
        let mut lo = Vec::with_capacity(members.len());
        let mut hi = Vec::with_capacity(members.len());
        for (m, &j) in members.iter().enumerate() {
            let k = candidates[m][rel[m]];
            lo.push(f.axis_breaks()[j][k - 1]);
            hi.push(f.axis_breaks()[j][k]);
        }
        let cell = match HalfOpenBox::new(lo, hi.clone()) {
            Ok(c) => c,
            Err(e) => {
                failure = Some(e);
                return;
            }
        };
        let w = match projection_measure_weight(f, subset, &cell, anchor) {
            Ok(w) => w,
            Err(e) => {
                failure = Some(e);
                return;
            }
        };
        if w != 0.0 {
            let x = concat(subset, &hi, anchor);
            let gx = match limits {
                LimitRule::Left => g.eval_left(&x, subset),
                LimitRule::Value => g.eval(&x),
            };
            total += gx * w;
        }
    });
    match failure {
        Some(e) => Err(e),
        None => Ok(total),
    }
}

/// Right-hand side of the integration-by-parts formula.
pub fn ibp_rhs(
    f: &GridStepFunction,
    g: &GridStepFunction,
    bx: &HalfOpenBox,
    mode: IbpMode,
) -> Result<f64> {
    Ok(ibp_terms(f, g, bx, mode, LimitRule::Left)?
        .iter()
        .map(|t| t.value)
        .sum())
}

/// Compares `∫ f dg` computed from the atoms of `g` with the partition sum.
pub fn ibp_check(
    f: &GridStepFunction,
    g: &GridStepFunction,
    bx: &HalfOpenBox,
    mode: IbpMode,
) -> Result<IbpReport> {
    let terms = ibp_terms(f, g, bx, mode, LimitRule::Left)?;
    let lhs = integrate(f, &g.as_measure().restrict(bx)?)?;
    let rhs: f64 = terms.iter().map(|t| t.value).sum();
    let max_term_magnitude = terms.iter().map(|t| t.value.abs()).fold(0.0, f64::max);
    if !lhs.is_finite() || !rhs.is_finite() {
        return Err(Error::NonFinite("ibp_check".into()));
    }
    Ok(IbpReport {
        lhs,
        rhs,
        term_count: terms.len(),
        max_term_magnitude,
        abs_diff: (lhs - rhs).abs(),
    })
}

/// `Γ(G, f) = Σ_I (-1)^{|I|} ∫_(0_I, 1_I] G(x_I ; 1_{-I}) df(x_I ; 1_{-I})`,
/// the functional through which a process `G` vanishing on the lower faces
/// acts on an integrand `f`. It is linear in `G` and Lipschitz with constant
/// `V_HK(f)` in the sup norm.
pub fn gamma_functional(process: &GridStepFunction, f: &GridStepFunction) -> Result<f64> {
    let d = f.dim();
    check_dim(d, process.dim())?;
    let unit = HalfOpenBox::unit(d);
    let ones = vec![1.0; d];
    let mut total = 0.0;
    for subset in IndexSet::all(d) {
        let raw = if subset.is_empty() {
            process.eval(&ones) * f.eval(&ones)
        } else {
            projected_integral(f, process, subset, &ones, &unit, LimitRule::Value)?
        };
        total += subset.sign() * raw;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bv::{random_step_function, Atom, Point};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn staircase(res: usize) -> GridStepFunction {
        // right-continuous step approximation of x on [0,1]
        let breaks: Vec<f64> = (0..res).map(|k| k as f64 / res as f64).collect();
        GridStepFunction::from_cells(vec![breaks.clone()], |idx| breaks[idx[0]]).unwrap()
    }

    #[test]
    fn integrate_weighted_sum() {
        let mu = SignedMeasure::new(
            1,
            vec![
                Atom {
                    loc: Point::new(vec![0.2]).unwrap(),
                    w: 0.5,
                },
                Atom {
                    loc: Point::new(vec![0.6]).unwrap(),
                    w: 0.5,
                },
            ],
        )
        .unwrap();
        let id = crate::bv::from_fn(1, |x: &[f64]| x[0]);
        assert!((integrate(&id, &mu).unwrap() - 0.4).abs() < 1e-15);
        let one = crate::bv::from_fn(1, |_: &[f64]| 1.0);
        assert_eq!(integrate(&one, &mu).unwrap(), mu.total_mass());
        let two = crate::bv::from_fn(2, |_: &[f64]| 1.0);
        assert!(integrate(&two, &mu).is_err());
    }

    #[test]
    fn integrate_matches_atom_pairing() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let f = random_step_function(&mut rng, 2, 6, 0.5);
            let g = random_step_function(&mut rng, 2, 6, 0.5);
            let mu = g.as_measure();
            let mut oracle = 0.0;
            for a in mu.atoms() {
                oracle += f.eval(&a.loc) * a.w;
            }
            assert!((integrate(&f, &mu).unwrap() - oracle).abs() < 1e-12);
        }
    }

    #[test]
    fn one_dimensional_reduction_tends_to_half() {
        let mut previous_err = f64::INFINITY;
        for res in [8, 32, 128, 512] {
            let x = staircase(res);
            let rhs = ibp_rhs(&x, &x, &HalfOpenBox::unit(1), IbpMode::General).unwrap();
            let err = (rhs - 0.5).abs();
            assert!(err < previous_err);
            previous_err = err;
        }
        assert!(previous_err < 2e-3);
    }

    #[test]
    fn zero_integrator_gives_zero_terms() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = random_step_function(&mut rng, 2, 5, 0.7);
        let g = GridStepFunction::constant(2, 0.0);
        let terms = ibp_terms(&f, &g, &HalfOpenBox::unit(2), IbpMode::General, LimitRule::Left)
            .unwrap();
        assert_eq!(terms.len(), 9);
        assert!(terms.iter().all(|t| t.value == 0.0));
    }

    #[test]
    fn constant_integrand() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = random_step_function(&mut rng, 2, 5, 0.7);
        let f = GridStepFunction::constant(2, 1.5);
        let bx = HalfOpenBox::unit(2);
        let report = ibp_check(&f, &g, &bx, IbpMode::General).unwrap();
        let mass = g.as_measure().mass(&bx).unwrap();
        assert!((report.lhs - 1.5 * mass).abs() < 1e-12);
        assert!(report.abs_diff < 1e-12);
    }

    #[test]
    fn identity_holds_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for d in 1..=3 {
            for _ in 0..30 {
                let f = random_step_function(&mut rng, d, 5, 0.6);
                let g = random_step_function(&mut rng, d, 5, 0.6);
                let r = ibp_check(&f, &g, &HalfOpenBox::unit(d), IbpMode::General).unwrap();
                assert_eq!(r.term_count, 3usize.pow(d as u32));
                assert!(r.abs_diff <= 1e-9 * (1.0 + r.lhs.abs()), "{r:?}");
            }
        }
    }

    #[test]
    fn identity_holds_on_inner_boxes() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..30 {
            let f = random_step_function(&mut rng, 2, 6, 0.6);
            let g = random_step_function(&mut rng, 2, 6, 0.6);
            let lo: Vec<f64> = (0..2).map(|_| rng.random_range(0..3) as f64 / 6.0).collect();
            let hi: Vec<f64> = (0..2).map(|_| rng.random_range(3..=6) as f64 / 6.0).collect();
            let bx = HalfOpenBox::new(lo, hi).unwrap();
            let r = ibp_check(&f, &g, &bx, IbpMode::General).unwrap();
            assert!(r.abs_diff <= 1e-9 * (1.0 + r.lhs.abs()), "{r:?}");
        }
    }

    #[test]
    fn vanishing_mode_rejects_nonzero_face() {
        let f = GridStepFunction::constant(2, 1.0);
        let g = GridStepFunction::constant(2, 1.0);
        let err = ibp_rhs(&f, &g, &HalfOpenBox::unit(2), IbpMode::VanishingFaces).unwrap_err();
        assert!(matches!(err, Error::LowerFaceViolation { axis: 1, .. }));
    }

    #[test]
    fn gamma_is_lipschitz_in_the_process() {
        use crate::bv::{hk_variation, VariationMode};
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let f = random_step_function(&mut rng, 2, 5, 0.6);
            let x = random_step_function(&mut rng, 2, 5, 0.6);
            let y = random_step_function(&mut rng, 2, 5, 0.6);
            let gap = gamma_functional(&x, &f).unwrap() - gamma_functional(&y, &f).unwrap();
            let sup = x
                .cell_values()
                .iter()
                .zip(y.cell_values())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let sup = if x.axis_breaks() == y.axis_breaks() { sup } else { 2.0 };
            let t = hk_variation(&f, VariationMode::Exact).unwrap().value;
            assert!(gap.abs() <= t * sup + 1e-12);
        }
    }
}
