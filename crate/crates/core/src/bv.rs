//! Bounded-variation calculus on the unit cube.
//!
//! Functions of bounded Hardy-Krause variation are represented canonically by
//! right-continuous [`GridStepFunction`]s, whose induced signed measure is
//! atomic and can be enumerated exactly. Arbitrary point-evaluable functions
//! enter through [`PointFn`] and are handled by dyadic ladder refinement.
//!
//! Coordinates are 0-based in code; [`IndexSet`] displays them 1-based.

use std::fmt;
use std::ops::Deref;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Largest ambient dimension an [`IndexSet`] bitmask can address.
pub const MAX_DIM: usize = 16;

/// Largest lattice (number of evaluation points) a refinement pass may build.
const MAX_LATTICE: usize = 1 << 24;

/// A real function on `[0,1]^d` that can be evaluated pointwise.
pub trait PointFn: Sync {
    fn dim(&self) -> usize;

    fn eval(&self, x: &[f64]) -> f64;

    /// The exact step representation, when the function has one.
    fn as_step(&self) -> Option<&GridStepFunction> {
        None
    }
}

impl<T: PointFn + ?Sized> PointFn for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn eval(&self, x: &[f64]) -> f64 {
        (**self).eval(x)
    }

    fn as_step(&self) -> Option<&GridStepFunction> {
        (**self).as_step()
    }
}

/// Closure adaptor for [`PointFn`].
#[derive(Clone, Copy)]
pub struct FnPoint<F> {
    dim: usize,
    f: F,
}

pub fn from_fn<F>(dim: usize, f: F) -> FnPoint<F>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    FnPoint { dim, f }
}

impl<F> PointFn for FnPoint<F>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

/// A point of `[0,1]^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidPoint("a point needs at least one coordinate".into()));
        }
        if let Some(c) = coords.iter().find(|c| !(0.0..=1.0).contains(*c)) {
            return Err(Error::InvalidPoint(format!("coordinate {c} outside [0,1]")));
        }
        Ok(Self(coords))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn ones(dim: usize) -> Self {
        Self(vec![1.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for Point {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for Point {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Point::new(v)
    }
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Self {
        p.0
    }
}

/// The half-open cell `(lower, upper]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HalfOpenBox {
    lower: Point,
    upper: Point,
}

impl HalfOpenBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let lower = Point::new(lower)?;
        let upper = Point::new(upper)?;
        check_dim(lower.dim(), upper.dim())?;
        if lower.iter().zip(upper.iter()).any(|(a, b)| a > b) {
            return Err(Error::InvalidBox(format!(
                "lower {:?} not below upper {:?}",
                lower.0, upper.0
            )));
        }
        Ok(Self { lower, upper })
    }

    /// `(0, 1]^d`.
    pub fn unit(dim: usize) -> Self {
        Self {
            lower: Point::zeros(dim),
            upper: Point::ones(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.dim()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Strict on the lower end, inclusive on the upper end.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(self.upper.iter()))
                .all(|(x, (a, b))| a < x && x <= b)
    }

    /// Splits along `axis` at `at` into `(lower, at]` and `(at, upper]`.
    pub fn split(&self, axis: usize, at: f64) -> Result<(Self, Self)> {
        if axis >= self.dim() || at < self.lower[axis] || at > self.upper[axis] {
            return Err(Error::InvalidBox(format!("cannot split axis {axis} at {at}")));
        }
        let mut left_upper = self.upper.0.clone();
        left_upper[axis] = at;
        let mut right_lower = self.lower.0.clone();
        right_lower[axis] = at;
        Ok((
            Self::new(self.lower.0.clone(), left_upper)?,
            Self::new(right_lower, self.upper.0.clone())?,
        ))
    }
}

/// A subset of the coordinates `{0, .., d-1}`, stored as a bitmask.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IndexSet(u32);

impl IndexSet {
    pub fn empty() -> Self {
        Self(0)
    }

    pub fn full(dim: usize) -> Self {
        assert!(dim <= MAX_DIM, "dimension {dim} exceeds {MAX_DIM}");
        Self(((1u64 << dim) - 1) as u32)
    }

    pub fn from_bits(bits: u32) -> Self {
        Self(bits)
    }

    pub fn from_members(members: &[usize]) -> Self {
        Self(members.iter().fold(0, |acc, &j| acc | (1 << j)))
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn contains(self, j: usize) -> bool {
        self.0 >> j & 1 == 1
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn with(self, j: usize) -> Self {
        Self(self.0 | (1 << j))
    }

    pub fn complement(self, dim: usize) -> Self {
        Self(Self::full(dim).0 & !self.0)
    }

    pub fn union(self, other: Self) -> Self {
        Self(self.0 | other.0)
    }

    pub fn is_subset_of(self, other: Self) -> bool {
        self.0 & !other.0 == 0
    }

    /// Members in increasing order.
    pub fn members(self) -> impl Iterator<Item = usize> {
        let bits = self.0;
        (0..32).filter(move |j| bits >> j & 1 == 1)
    }

    /// `(-1)^{|I|}`.
    pub fn sign(self) -> f64 {
        if self.len() % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// All subsets of `self`, in binary counting order over its members.
    pub fn subsets(self) -> impl Iterator<Item = IndexSet> {
        let members: Vec<usize> = self.members().collect();
        (0u32..(1u32 << members.len())).map(move |m| {
            IndexSet(
                members
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| m >> k & 1 == 1)
                    .fold(0, |acc, (_, &j)| acc | (1 << j)),
            )
        })
    }

    /// All subsets of `{0, .., dim-1}`, in binary counting order.
    pub fn all(dim: usize) -> impl Iterator<Item = IndexSet> {
        Self::full(dim).subsets()
    }
}

impl fmt::Display for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let members: Vec<String> = self.members().map(|j| (j + 1).to_string()).collect();
        write!(f, "{{{}}}", members.join(","))
    }
}

/// Assembles `x_I : c_{-I}`: coordinates in `subset` come from `inner`
/// (in increasing member order), the rest from `anchor`.
pub fn concat(subset: IndexSet, inner: &[f64], anchor: &[f64]) -> Vec<f64> {
    let mut out = anchor.to_vec();
    for (k, j) in subset.members().enumerate() {
        out[j] = inner[k];
    }
    out
}

/// A multivariate ladder: per-axis cut points in `(0,1)`.
///
/// The cells generated by a ladder are `(y, y⁺]` with `y` ranging over
/// `{0} ∪ cuts`, where the successor of the last cut is 1.
#[derive(Clone, Debug, PartialEq)]
pub struct Ladder {
    cuts: Vec<Vec<f64>>,
}

impl Ladder {
    pub fn new(cuts: Vec<Vec<f64>>) -> Result<Self> {
        if cuts.is_empty() {
            return Err(Error::InvalidLadder("zero-dimensional ladder".into()));
        }
        for (axis, c) in cuts.iter().enumerate() {
            if c.iter().any(|y| !(*y > 0.0 && *y < 1.0)) {
                return Err(Error::InvalidLadder(format!("axis {axis}: cut outside (0,1)")));
            }
            if c.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidLadder(format!(
                    "axis {axis}: cuts not strictly increasing"
                )));
            }
        }
        Ok(Self { cuts })
    }

    /// Cuts at `k / 2^depth` on every axis.
    pub fn dyadic(dim: usize, depth: u32) -> Self {
        let m = 1usize << depth;
        let axis: Vec<f64> = (1..m).map(|k| k as f64 / m as f64).collect();
        Self {
            cuts: vec![axis; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.cuts.len()
    }

    pub fn cuts(&self, axis: usize) -> &[f64] {
        &self.cuts[axis]
    }

    /// The next cut after `y` on `axis`, or 1.
    pub fn successor(&self, axis: usize, y: f64) -> f64 {
        let c = &self.cuts[axis];
        let k = c.partition_point(|&t| t <= y);
        c.get(k).copied().unwrap_or(1.0)
    }

    fn nodes(&self) -> Vec<Vec<f64>> {
        self.cuts
            .iter()
            .map(|c| {
                let mut v = Vec::with_capacity(c.len() + 2);
                v.push(0.0);
                v.extend_from_slice(c);
                v.push(1.0);
                v
            })
            .collect()
    }
}

/// Sum of `|Δ_f|` over the cells of `ladder`.
pub fn ladder_sum<F: PointFn + ?Sized>(f: &F, ladder: &Ladder) -> Result<f64> {
    check_dim(f.dim(), ladder.dim())?;
    let nodes = ladder.nodes();
    let (values, shape) = evaluate_lattice(f, &nodes);
    let cells = difference_all_axes(values, &shape);
    Ok(cells.iter().map(|v| v.abs()).sum())
}

fn evaluate_lattice<F: PointFn + ?Sized>(f: &F, nodes: &[Vec<f64>]) -> (Vec<f64>, Vec<usize>) {
    let shape: Vec<usize> = nodes.iter().map(Vec::len).collect();
    let total: usize = shape.iter().product();
    let mut values = Vec::with_capacity(total);
    let mut idx = vec![0usize; shape.len()];
    let mut x: Vec<f64> = nodes.iter().map(|n| n[0]).collect();
    for _ in 0..total {
        values.push(f.eval(&x));
        // odometer, last axis fastest
        for axis in (0..shape.len()).rev() {
            idx[axis] += 1;
            if idx[axis] < shape[axis] {
                x[axis] = nodes[axis][idx[axis]];
                break;
            }
            idx[axis] = 0;
            x[axis] = nodes[axis][0];
        }
    }
    (values, shape)
}

/// Applies the forward difference along every axis of a row-major lattice.
/// The result holds the generalized volume of every lattice cell.
fn difference_all_axes(mut values: Vec<f64>, shape: &[usize]) -> Vec<f64> {
    let mut shape = shape.to_vec();
    for axis in 0..shape.len() {
        let inner: usize = shape[axis + 1..].iter().product();
        let outer: usize = shape[..axis].iter().product();
        let len = shape[axis];
        let mut next = Vec::with_capacity(outer * (len - 1) * inner);
        for o in 0..outer {
            for i in 0..len - 1 {
                for k in 0..inner {
                    let base = o * len * inner;
                    next.push(values[base + (i + 1) * inner + k] - values[base + i * inner + k]);
                }
            }
        }
        values = next;
        shape[axis] = len - 1;
    }
    values
}

/// A right-continuous piecewise-constant function on `[0,1]^d`.
///
/// Axis `j` is cut at `axis_breaks[j]` (starting at 0); the function is
/// constant on every product of half-open intervals `[b_k, b_{k+1})`, with
/// the last interval closed at 1. `cell_values` is row-major, last axis
/// fastest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StepRepr", into = "StepRepr")]
pub struct GridStepFunction {
    dim: usize,
    axis_breaks: Vec<Vec<f64>>,
    cell_values: Vec<f64>,
    strides: Vec<usize>,
}

#[derive(Clone, Serialize, Deserialize)]
struct StepRepr {
    dim: usize,
    axis_breaks: Vec<Vec<f64>>,
    cell_values: Vec<f64>,
}

impl TryFrom<StepRepr> for GridStepFunction {
    type Error = Error;

    fn try_from(r: StepRepr) -> Result<Self> {
        check_dim(r.dim, r.axis_breaks.len())?;
        GridStepFunction::new(r.axis_breaks, r.cell_values)
    }
}

impl From<GridStepFunction> for StepRepr {
    fn from(f: GridStepFunction) -> Self {
        StepRepr {
            dim: f.dim,
            axis_breaks: f.axis_breaks,
            cell_values: f.cell_values,
        }
    }
}

impl GridStepFunction {
    pub fn new(axis_breaks: Vec<Vec<f64>>, cell_values: Vec<f64>) -> Result<Self> {
        let dim = axis_breaks.len();
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidStepFunction(format!("dimension {dim} unsupported")));
        }
        for (axis, b) in axis_breaks.iter().enumerate() {
            if b.first() != Some(&0.0) {
                return Err(Error::InvalidStepFunction(format!(
                    "axis {axis}: breaks must start at 0"
                )));
            }
            if b.windows(2).any(|w| !(w[0] < w[1])) || b.last().is_some_and(|&t| t >= 1.0) {
                return Err(Error::InvalidStepFunction(format!(
                    "axis {axis}: breaks must be strictly increasing in [0,1)"
                )));
            }
        }
        let shape: Vec<usize> = axis_breaks.iter().map(Vec::len).collect();
        let n_cells: usize = shape.iter().product();
        if cell_values.len() != n_cells {
            return Err(Error::InvalidStepFunction(format!(
                "expected {n_cells} cell values, found {}",
                cell_values.len()
            )));
        }
        if cell_values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidStepFunction("non-finite cell value".into()));
        }
        let mut strides = vec![1usize; dim];
        for axis in (0..dim.saturating_sub(1)).rev() {
            strides[axis] = strides[axis + 1] * shape[axis + 1];
        }
        Ok(Self {
            dim,
            axis_breaks,
            cell_values,
            strides,
        })
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Self::new(vec![vec![0.0]; dim], vec![c]).expect("constant step function")
    }

    /// `x ↦ 1{x < u}` coordinatewise, for `u ∈ (0,1)^d`.
    pub fn indicator_below(u: &[f64]) -> Result<Self> {
        if let Some(c) = u.iter().find(|c| !(**c > 0.0 && **c < 1.0)) {
            return Err(Error::InvalidParameter(format!(
                "indicator corner coordinate {c} must lie in (0,1)"
            )));
        }
        let breaks: Vec<Vec<f64>> = u.iter().map(|&c| vec![0.0, c]).collect();
        Self::from_cells(breaks, |idx| {
            if idx.iter().all(|&k| k == 0) {
                1.0
            } else {
                0.0
            }
        })
    }

    /// Builds a step function by evaluating `value` on every cell index.
    pub fn from_cells<V>(axis_breaks: Vec<Vec<f64>>, mut value: V) -> Result<Self>
    where
        V: FnMut(&[usize]) -> f64,
    {
        let shape: Vec<usize> = axis_breaks.iter().map(Vec::len).collect();
        let mut values = Vec::with_capacity(shape.iter().product());
        for_each_index(&shape, |idx| values.push(value(idx)));
        Self::new(axis_breaks, values)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn axis_breaks(&self) -> &[Vec<f64>] {
        &self.axis_breaks
    }

    pub fn cell_values(&self) -> &[f64] {
        &self.cell_values
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axis_breaks.iter().map(Vec::len).collect()
    }

    /// Index of the cell containing `x` along `axis`.
    pub fn cell_index(&self, axis: usize, x: f64) -> usize {
        let b = &self.axis_breaks[axis];
        b.partition_point(|&t| t <= x).max(1) - 1
    }

    /// Index of the cell just below `x` along `axis`; at 0 this is cell 0.
    pub fn left_cell_index(&self, axis: usize, x: f64) -> usize {
        let b = &self.axis_breaks[axis];
        b.partition_point(|&t| t < x).max(1) - 1
    }

    pub fn value_at_cell(&self, idx: &[usize]) -> f64 {
        let flat: usize = idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum();
        self.cell_values[flat]
    }

    /// Left limit in the coordinates of `left`, ordinary value elsewhere.
    pub fn eval_left(&self, x: &[f64], left: IndexSet) -> f64 {
        let flat: usize = (0..self.dim)
            .map(|j| {
                let k = if left.contains(j) {
                    self.left_cell_index(j, x[j])
                } else {
                    self.cell_index(j, x[j])
                };
                k * self.strides[j]
            })
            .sum();
        self.cell_values[flat]
    }

    /// The lower-dimensional projection `x_I ↦ f(x_I : c_{-I})`.
    pub fn project(&self, subset: IndexSet, anchor: &[f64]) -> Result<Self> {
        check_dim(self.dim, anchor.len())?;
        if subset.is_empty() {
            return Err(Error::EmptyIndexSet);
        }
        let members: Vec<usize> = subset.members().collect();
        if members.iter().any(|&j| j >= self.dim) {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: members.last().copied().unwrap_or(0) + 1,
            });
        }
        let fixed: Vec<usize> = (0..self.dim).map(|j| self.cell_index(j, anchor[j])).collect();
        let breaks: Vec<Vec<f64>> = members.iter().map(|&j| self.axis_breaks[j].clone()).collect();
        let mut full = fixed.clone();
        Self::from_cells(breaks, |idx| {
            for (k, &j) in members.iter().enumerate() {
                full[j] = idx[k];
            }
            self.value_at_cell(&full)
        })
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.cell_values.iter_mut().for_each(|v| *v *= c);
        out
    }

    pub fn shifted(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.cell_values.iter_mut().for_each(|v| *v += c);
        out
    }

    /// Errors naming the first lower face `x_j = box.lower_j` of `bx` on
    /// which the function is not identically zero.
    pub fn check_vanishing_lower_faces(&self, bx: &HalfOpenBox) -> Result<()> {
        check_dim(self.dim, bx.dim())?;
        let lo: Vec<usize> = (0..self.dim).map(|j| self.cell_index(j, bx.lower()[j])).collect();
        let hi: Vec<usize> = (0..self.dim).map(|j| self.cell_index(j, bx.upper()[j])).collect();
        let extent: Vec<usize> = lo.iter().zip(&hi).map(|(l, h)| h - l + 1).collect();
        for axis in 0..self.dim {
            let mut face = extent.clone();
            face[axis] = 1;
            let mut bad = false;
            for_each_index(&face, |rel| {
                let idx: Vec<usize> = rel.iter().zip(&lo).map(|(r, l)| r + l).collect();
                if self.value_at_cell(&idx) != 0.0 {
                    bad = true;
                }
            });
            if bad {
                return Err(Error::LowerFaceViolation {
                    axis: axis + 1,
                    value: bx.lower()[axis],
                });
            }
        }
        Ok(())
    }

    /// The signed measure `Δ_f` with `Δ_f([0, x]) = f(x)`.
    ///
    /// Atoms sit at grid corners; the weight of the corner with cell index
    /// `k` is the alternating sum of the cell values at `k - e_I` over the
    /// axes `I` with `k_j > 0`. Zero weights are dropped.
    pub fn as_measure(&self) -> SignedMeasure {
        let shape = self.shape();
        let mut atoms = Vec::new();
        let mut below = vec![0usize; self.dim];
        for_each_index(&shape, |idx| {
            let movable = IndexSet::from_members(
                &(0..self.dim).filter(|&j| idx[j] > 0).collect::<Vec<_>>(),
            );
            let mut w = 0.0;
            for sub in movable.subsets() {
                for j in 0..self.dim {
                    below[j] = idx[j] - usize::from(sub.contains(j));
                }
                w += sub.sign() * self.value_at_cell(&below);
            }
            if w != 0.0 {
                let loc: Vec<f64> = (0..self.dim).map(|j| self.axis_breaks[j][idx[j]]).collect();
                atoms.push(Atom {
                    loc: Point(loc),
                    w,
                });
            }
        });
        SignedMeasure {
            dim: self.dim,
            atoms,
        }
    }
}

impl PointFn for GridStepFunction {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64]) -> f64 {
        let flat: usize = (0..self.dim)
            .map(|j| self.cell_index(j, x[j]) * self.strides[j])
            .sum();
        self.cell_values[flat]
    }

    fn as_step(&self) -> Option<&GridStepFunction> {
        Some(self)
    }
}

/// Calls `visit` on every multi-index of `shape` in row-major order.
pub(crate) fn for_each_index<V: FnMut(&[usize])>(shape: &[usize], mut visit: V) {
    if shape.iter().any(|&s| s == 0) {
        return;
    }
    let mut idx = vec![0usize; shape.len()];
    loop {
        visit(&idx);
        let mut axis = shape.len();
        loop {
            if axis == 0 {
                return;
            }
            axis -= 1;
            idx[axis] += 1;
            if idx[axis] < shape[axis] {
                break;
            }
            idx[axis] = 0;
        }
    }
}

/// A random step function: each axis keeps every interior point of the
/// `1/res` grid with probability `keep`, values uniform on `[-1, 1]`.
///
/// Drawing breaks from a shared grid lets independently drawn functions
/// share jump locations exactly.
pub fn random_step_function<R: Rng + ?Sized>(
    rng: &mut R,
    dim: usize,
    res: usize,
    keep: f64,
) -> GridStepFunction {
    let breaks: Vec<Vec<f64>> = (0..dim)
        .map(|_| {
            let mut b = vec![0.0];
            b.extend(
                (1..res)
                    .filter(|_| rng.random_bool(keep))
                    .map(|k| k as f64 / res as f64),
            );
            b
        })
        .collect();
    GridStepFunction::from_cells(breaks, |_| 2.0 * rng.random::<f64>() - 1.0)
        .expect("valid random step function")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub loc: Point,
    pub w: f64,
}

/// A finite atomic signed measure on `[0,1]^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignedMeasure {
    dim: usize,
    atoms: Vec<Atom>,
}

impl SignedMeasure {
    pub fn new(dim: usize, atoms: Vec<Atom>) -> Result<Self> {
        for a in &atoms {
            check_dim(dim, a.loc.dim())?;
        }
        let mut locs: Vec<&[f64]> = atoms.iter().map(|a| &a.loc[..]).collect();
        locs.sort_by(|a, b| lex_cmp(a, b));
        if locs.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter("atom locations must be distinct".into()));
        }
        Ok(Self { dim, atoms })
    }

    /// Merges equal locations by exact comparison and sums their weights.
    pub fn from_weighted_points(dim: usize, points: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        let mut points = points;
        points.sort_by(|a, b| lex_cmp(&a.0, &b.0));
        let mut atoms: Vec<Atom> = Vec::with_capacity(points.len());
        for (loc, w) in points {
            check_dim(dim, loc.len())?;
            match atoms.last_mut() {
                Some(last) if last.loc[..] == loc[..] => last.w += w,
                _ => atoms.push(Atom {
                    loc: Point::new(loc)?,
                    w,
                }),
            }
        }
        Ok(Self { dim, atoms })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn total_variation(&self) -> f64 {
        self.atoms.iter().map(|a| a.w.abs()).sum()
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.w).sum()
    }

    /// `μ([0, x])`.
    pub fn cdf(&self, x: &[f64]) -> f64 {
        self.atoms
            .iter()
            .filter(|a| a.loc.iter().zip(x).all(|(l, x)| l <= x))
            .map(|a| a.w)
            .sum()
    }

    /// Keeps the atoms inside the half-open box.
    pub fn restrict(&self, bx: &HalfOpenBox) -> Result<Self> {
        check_dim(self.dim, bx.dim())?;
        Ok(Self {
            dim: self.dim,
            atoms: self
                .atoms
                .iter()
                .filter(|a| bx.contains(&a.loc))
                .cloned()
                .collect(),
        })
    }

    pub fn mass(&self, bx: &HalfOpenBox) -> Result<f64> {
        Ok(self.restrict(bx)?.total_mass())
    }
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

/// `Σ_I (-1)^{|I|} f(a_I : b_{-I})` over the corners of `(a, b]`.
pub fn generalized_volume<F: PointFn + ?Sized>(f: &F, bx: &HalfOpenBox) -> Result<f64> {
    check_dim(f.dim(), bx.dim())?;
    let d = bx.dim();
    let mut corner = vec![0.0; d];
    let mut total = 0.0;
    for sub in IndexSet::all(d) {
        for (j, c) in corner.iter_mut().enumerate() {
            *c = if sub.contains(j) { bx.lower()[j] } else { bx.upper()[j] };
        }
        total += sub.sign() * f.eval(&corner);
    }
    Ok(total)
}

/// Weight that the projection `f(·; c_{-I})` assigns to `(a_I, b_I]`.
///
/// `box_i` has dimension `|I|` (coordinates in increasing member order);
/// `anchor` has full dimension and only its `-I` entries are read.
pub fn projection_measure_weight<F: PointFn + ?Sized>(
    f: &F,
    subset: IndexSet,
    box_i: &HalfOpenBox,
    anchor: &[f64],
) -> Result<f64> {
    if subset.is_empty() {
        return Err(Error::EmptyIndexSet);
    }
    let d = f.dim();
    check_dim(d, anchor.len())?;
    if !subset.is_subset_of(IndexSet::full(d)) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: subset.members().last().unwrap_or(0) + 1,
        });
    }
    check_dim(subset.len(), box_i.dim())?;
    let mut point = anchor.to_vec();
    let members: Vec<usize> = subset.members().collect();
    let mut total = 0.0;
    for sub in subset.subsets() {
        for (k, &j) in members.iter().enumerate() {
            point[j] = if sub.contains(j) {
                box_i.lower()[k]
            } else {
                box_i.upper()[k]
            };
        }
        total += sub.sign() * f.eval(&point);
    }
    Ok(total)
}

/// How a variation is computed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariationMode {
    /// Exact atom sum; requires a step representation.
    Exact,
    /// Dyadic ladder refinement until successive sums differ by less than
    /// `tol`, or `max_depth` halvings.
    Refine { tol: f64, max_depth: u32 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Variation {
    pub value: f64,
    /// False when refinement stopped without meeting its tolerance.
    pub converged: bool,
    /// Deepest dyadic level reached (refine mode only).
    pub depth: Option<u32>,
}

/// Vitali variation of `f` over `[0,1]^d`.
pub fn vitali_variation<F: PointFn + ?Sized>(f: &F, mode: VariationMode) -> Result<Variation> {
    match mode {
        VariationMode::Exact => {
            let step = f.as_step().ok_or(Error::NotAStepFunction)?;
            Ok(Variation {
                value: exact_vitali(step),
                converged: true,
                depth: None,
            })
        }
        VariationMode::Refine { tol, max_depth } => refine_vitali(f, tol, max_depth),
    }
}

fn exact_vitali(f: &GridStepFunction) -> f64 {
    // Atoms with a zero coordinate lie outside every ladder cell.
    f.as_measure()
        .atoms
        .iter()
        .filter(|a| a.loc.iter().all(|&c| c > 0.0))
        .map(|a| a.w.abs())
        .sum()
}

fn refine_vitali<F: PointFn + ?Sized>(f: &F, tol: f64, max_depth: u32) -> Result<Variation> {
    if !(tol > 0.0) || max_depth == 0 {
        return Err(Error::InvalidParameter(
            "refine mode needs tol > 0 and max_depth >= 1".into(),
        ));
    }
    let d = f.dim();
    let mut previous: Option<f64> = None;
    let mut reached = Variation {
        value: 0.0,
        converged: false,
        depth: None,
    };
    for depth in 1..=max_depth {
        let side = (1usize << depth) + 1;
        if side.checked_pow(d as u32).is_none_or(|n| n > MAX_LATTICE) {
            break;
        }
        let value = ladder_sum(f, &Ladder::dyadic(d, depth))?;
        if !value.is_finite() {
            return Err(Error::NonFinite("vitali_variation".into()));
        }
        reached = Variation {
            value,
            converged: false,
            depth: Some(depth),
        };
        if let Some(prev) = previous {
            if (value - prev).abs() < tol {
                reached.converged = true;
                return Ok(reached);
            }
        }
        previous = Some(value);
    }
    Ok(reached)
}

/// `x_I ↦ f(x_I : c_{-I})` for an arbitrary [`PointFn`].
struct Anchored<'a, F: ?Sized> {
    f: &'a F,
    subset: IndexSet,
    anchor: Vec<f64>,
}

impl<F: PointFn + ?Sized> PointFn for Anchored<'_, F> {
    fn dim(&self) -> usize {
        self.subset.len()
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.f.eval(&concat(self.subset, x, &self.anchor))
    }
}

/// Hardy-Krause variation: the Vitali variations of all projections
/// anchored at 1, with `|f(1)|` standing in for the empty index set.
pub fn hk_variation<F: PointFn + ?Sized>(f: &F, mode: VariationMode) -> Result<Variation> {
    let d = f.dim();
    let ones = vec![1.0; d];
    let mut total = Variation {
        value: f.eval(&ones).abs(),
        converged: true,
        depth: None,
    };
    for subset in IndexSet::all(d).filter(|s| !s.is_empty()) {
        let term = match mode {
            VariationMode::Exact => {
                let step = f.as_step().ok_or(Error::NotAStepFunction)?;
                vitali_variation(&step.project(subset, &ones)?, mode)?
            }
            VariationMode::Refine { .. } => {
                let proj = Anchored {
                    f,
                    subset,
                    anchor: ones.clone(),
                };
                vitali_variation(&proj, mode)?
            }
        };
        total.value += term.value;
        total.converged &= term.converged;
        total.depth = total.depth.max(term.depth);
    }
    Ok(total)
}
