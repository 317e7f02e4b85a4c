//! Data model shared by every solver: finitely supported measures on
//! `R^d`, coupling tables between two of them, and sampled monotone curves.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Largest support any constructor in this crate will materialize.
pub const MAX_SUPPORT: usize = 1_000_000;

const WEIGHT_SUM_TOL: f64 = 1e-12;
const MARGINAL_TOL: f64 = 1e-10;

/// A finitely supported probability measure on `R^d`.
///
/// Points are pairwise distinct (exact comparison) and weights sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeasureFile", into = "MeasureFile")]
pub struct DiscreteMeasure {
    dim: usize,
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

/// On-disk layout: `{"dim": d, "points": [[...], ...], "weights": [...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeasureFile {
    pub dim: usize,
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl TryFrom<MeasureFile> for DiscreteMeasure {
    type Error = Error;

    fn try_from(file: MeasureFile) -> Result<Self> {
        let m = DiscreteMeasure::new(file.points, file.weights)?;
        if m.dim != file.dim {
            return Err(Error::DimensionMismatch {
                index: 0,
                expected: file.dim,
                found: m.dim,
            });
        }
        Ok(m)
    }
}

impl From<DiscreteMeasure> for MeasureFile {
    fn from(m: DiscreteMeasure) -> Self {
        MeasureFile {
            dim: m.dim,
            points: m.points,
            weights: m.weights,
        }
    }
}

impl DiscreteMeasure {
    /// Validates `points`/`weights` and builds the measure.
    ///
    /// A weight sum off from one by more than summation noise but less than
    /// `1e-12` is renormalized; any larger deviation is rejected.
    pub fn new(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptySupport);
        }
        if points.len() != weights.len() {
            return Err(Error::LengthMismatch {
                points: points.len(),
                weights: weights.len(),
            });
        }
        let dim = points[0].len();
        if dim == 0 {
            return Err(Error::InvalidArgument(
                "points must have dimension >= 1".into(),
            ));
        }
        for (index, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    index,
                    expected: dim,
                    found: p.len(),
                });
            }
            if p.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite { index });
            }
        }
        for (index, &w) in weights.iter().enumerate() {
            if !w.is_finite() {
                return Err(Error::NonFinite { index });
            }
            if w < 0.0 {
                return Err(Error::NegativeWeight { index, value: w });
            }
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() >= WEIGHT_SUM_TOL {
            return Err(Error::WeightSumMismatch { sum });
        }
        let weights = if (sum - 1.0).abs() <= weights.len() as f64 * f64::EPSILON {
            weights
        } else {
            weights.into_iter().map(|w| w / sum).collect()
        };
        if let Some((first, second)) = find_duplicate(&points) {
            return Err(Error::DuplicatePoint { first, second });
        }
        Ok(DiscreteMeasure {
            dim,
            points,
            weights,
        })
    }

    /// Unit mass at `point`.
    pub fn point_mass(point: Vec<f64>) -> Result<Self> {
        Self::new(vec![point], vec![1.0])
    }

    /// Equal weights on the given points.
    pub fn uniform(points: Vec<Vec<f64>>) -> Result<Self> {
        let m = points.len();
        if m == 0 {
            return Err(Error::EmptySupport);
        }
        Self::new(points, vec![1.0 / m as f64; m])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    /// `sum_i w_i ||x_i||^2`.
    pub fn second_moment(&self) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * norm_sq(p))
            .sum()
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.dim];
        for (p, w) in self.points.iter().zip(&self.weights) {
            for (m, x) in mean.iter_mut().zip(p) {
                *m += w * x;
            }
        }
        mean
    }

    /// Shannon entropy in nats, with `0 ln 0 = 0`.
    pub fn entropy(&self) -> f64 {
        entropy(&self.weights)
    }

    /// `E_{mu x mu} ||X - X'||^2`, the distortion of the independent coupling.
    pub fn independent_distortion(&self) -> f64 {
        let mut acc = 0.0;
        for (p, wp) in self.points.iter().zip(&self.weights) {
            for (q, wq) in self.points.iter().zip(&self.weights) {
                acc += wp * wq * sq_dist(p, q);
            }
        }
        acc
    }
}

fn find_duplicate(points: &[Vec<f64>]) -> Option<(usize, usize)> {
    // adding 0.0 maps -0.0 to 0.0 so total_cmp agrees with ==
    let key = |i: usize| points[i].iter().map(|x| x + 0.0);
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        key(a)
            .zip(key(b))
            .map(|(x, y)| x.total_cmp(&y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    order
        .windows(2)
        .find(|w| points[w[0]] == points[w[1]])
        .map(|w| (w[0].min(w[1]), w[0].max(w[1])))
}

pub(crate) fn norm_sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub(crate) fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Shannon entropy of a probability vector in nats.
pub fn entropy(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum()
}

/// Standard normal on `R^dim`, quantized into `bins_per_axis` equiprobable
/// quantile bins per axis.
///
/// Each bin is represented by the conditional mean of the standard normal on
/// that bin, so all weights are equal to `bins^-dim` (a rational measure with
/// `N = bins^dim`).
pub fn quantize_gaussian(dim: usize, bins_per_axis: usize) -> Result<DiscreteMeasure> {
    if dim == 0 || bins_per_axis == 0 {
        return Err(Error::InvalidArgument(
            "dim and bins_per_axis must be positive".into(),
        ));
    }
    let size = (bins_per_axis as u128)
        .checked_pow(dim as u32)
        .unwrap_or(u128::MAX);
    if size > MAX_SUPPORT as u128 {
        return Err(Error::SupportTooLarge {
            size,
            limit: MAX_SUPPORT,
        });
    }
    let axis = gaussian_axis(bins_per_axis);
    let mut measure = axis.clone();
    for _ in 1..dim {
        measure = product_measure(&measure, &axis)?;
    }
    Ok(measure)
}

fn gaussian_axis(bins: usize) -> DiscreteMeasure {
    let normal = Normal::standard();
    let b = bins as f64;
    // density at the k-th quantile edge; the outer edges are at +-inf
    let edge_pdf = |k: usize| {
        if k == 0 || k == bins {
            0.0
        } else {
            normal.pdf(normal.inverse_cdf(k as f64 / b))
        }
    };
    let mut reps = vec![0.0; bins];
    for k in 0..bins / 2 {
        // E[Z | Z in bin k] = (pdf(lo) - pdf(hi)) / P(bin)
        let r = b * (edge_pdf(k) - edge_pdf(k + 1));
        reps[k] = r;
        reps[bins - 1 - k] = -r;
    }
    DiscreteMeasure {
        dim: 1,
        points: reps.into_iter().map(|r| vec![r]).collect(),
        weights: vec![1.0 / b; bins],
    }
}

/// Product measure with concatenated coordinates; index `i * |b| + j`.
pub fn product_measure(a: &DiscreteMeasure, b: &DiscreteMeasure) -> Result<DiscreteMeasure> {
    let size = a.len() as u128 * b.len() as u128;
    if size > MAX_SUPPORT as u128 {
        return Err(Error::SupportTooLarge {
            size,
            limit: MAX_SUPPORT,
        });
    }
    let mut points = Vec::with_capacity(size as usize);
    let mut weights = Vec::with_capacity(size as usize);
    for (p, wp) in a.points.iter().zip(&a.weights) {
        for (q, wq) in b.points.iter().zip(&b.weights) {
            let mut x = p.clone();
            x.extend_from_slice(q);
            points.push(x);
            weights.push(wp * wq);
        }
    }
    Ok(DiscreteMeasure {
        dim: a.dim + b.dim,
        points,
        weights,
    })
}

/// Joint probability table with prescribed marginals, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix {
    rows: DiscreteMeasure,
    cols: DiscreteMeasure,
    table: Vec<f64>,
}

impl CouplingMatrix {
    /// Checks nonnegativity and both marginals at `1e-10`.
    pub fn new(rows: DiscreteMeasure, cols: DiscreteMeasure, table: Vec<f64>) -> Result<Self> {
        let (m, k) = (rows.len(), cols.len());
        if table.len() != m * k {
            return Err(Error::InvalidArgument(format!(
                "table has {} entries, expected {}x{}",
                table.len(),
                m,
                k
            )));
        }
        if let Some(index) = table.iter().position(|p| !p.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        if let Some(index) = table.iter().position(|&p| p < 0.0) {
            return Err(Error::NegativeWeight {
                index,
                value: table[index],
            });
        }
        let c = CouplingMatrix { rows, cols, table };
        let violation = c.marginal_violation();
        if violation > MARGINAL_TOL {
            return Err(Error::MarginalViolation { violation });
        }
        Ok(c)
    }

    /// Independent coupling `a x b`.
    pub fn product(rows: DiscreteMeasure, cols: DiscreteMeasure) -> Self {
        let table = rows
            .weights
            .iter()
            .flat_map(|a| cols.weights.iter().map(move |b| a * b))
            .collect();
        CouplingMatrix { rows, cols, table }
    }

    pub fn rows(&self) -> &DiscreteMeasure {
        &self.rows
    }

    pub fn cols(&self) -> &DiscreteMeasure {
        &self.cols
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.table[i * self.cols.len() + j]
    }

    /// Largest absolute deviation of a row or column sum from its marginal.
    pub fn marginal_violation(&self) -> f64 {
        let k = self.cols.len();
        let mut worst: f64 = 0.0;
        let mut col_sums = vec![0.0; k];
        for (i, row) in self.table.chunks(k).enumerate() {
            worst = worst.max((row.iter().sum::<f64>() - self.rows.weights[i]).abs());
            for (c, p) in col_sums.iter_mut().zip(row) {
                *c += p;
            }
        }
        for (c, b) in col_sums.iter().zip(&self.cols.weights) {
            worst = worst.max((c - b).abs());
        }
        worst
    }

    /// `sum p_ij ln(p_ij / (a_i b_j))` with `0 ln 0 = 0`.
    pub fn mutual_information(&self) -> f64 {
        let k = self.cols.len();
        let mut acc = 0.0;
        for (i, row) in self.table.chunks(k).enumerate() {
            let a = self.rows.weights[i];
            for (j, &p) in row.iter().enumerate() {
                if p > 0.0 {
                    acc += p * (p / (a * self.cols.weights[j])).ln();
                }
            }
        }
        acc.max(0.0)
    }

    /// `E <Y, Z>` under the coupling.
    pub fn inner_product(&self) -> f64 {
        self.expect(dot)
    }

    /// `E ||Y - Z||^2` under the coupling.
    pub fn squared_distortion(&self) -> f64 {
        self.expect(sq_dist)
    }

    pub fn expect<F: Fn(&[f64], &[f64]) -> f64>(&self, f: F) -> f64 {
        let k = self.cols.len();
        let mut acc = 0.0;
        for (i, row) in self.table.chunks(k).enumerate() {
            for (j, &p) in row.iter().enumerate() {
                if p > 0.0 {
                    acc += p * f(self.rows.point(i), self.cols.point(j));
                }
            }
        }
        acc
    }
}

/// Sampled nonincreasing, nonnegative function on `(0, inf)`.
///
/// Evaluation is piecewise linear between knots, equal to `left_limit` below
/// the first knot, linear from the last knot down to zero at `support_end`,
/// and zero from `support_end` on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneCurve {
    abscissas: Vec<f64>,
    values: Vec<f64>,
    left_limit: f64,
    support_end: f64,
}

/// One linear piece of a [`MonotoneCurve`] on `[x0, x1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub x0: f64,
    pub x1: f64,
    pub v0: f64,
    pub v1: f64,
}

impl Segment {
    pub fn slope(&self) -> f64 {
        if self.x1 > self.x0 {
            (self.v1 - self.v0) / (self.x1 - self.x0)
        } else {
            0.0
        }
    }

    pub fn at(&self, x: f64) -> f64 {
        self.v0 + self.slope() * (x - self.x0)
    }
}

impl MonotoneCurve {
    pub fn new(
        abscissas: Vec<f64>,
        values: Vec<f64>,
        left_limit: f64,
        support_end: f64,
    ) -> Result<Self> {
        if abscissas.len() != values.len() {
            return Err(Error::LengthMismatch {
                points: abscissas.len(),
                weights: values.len(),
            });
        }
        if !(left_limit.is_finite() && left_limit >= 0.0) {
            return Err(Error::InvalidArgument(
                "left_limit must be finite and >= 0".into(),
            ));
        }
        if !(support_end.is_finite() && support_end >= 0.0) {
            return Err(Error::InvalidArgument(
                "support_end must be finite and >= 0".into(),
            ));
        }
        let mut prev_x = 0.0;
        let mut prev_v = left_limit;
        for (i, (&x, &v)) in abscissas.iter().zip(&values).enumerate() {
            if !(x.is_finite() && x > prev_x) {
                return Err(Error::InvalidArgument(format!(
                    "abscissa {i} is not positive and strictly increasing"
                )));
            }
            if !(v.is_finite() && v >= 0.0 && v <= prev_v) {
                return Err(Error::InvalidArgument(format!(
                    "value {i} breaks monotonicity or nonnegativity"
                )));
            }
            if x >= support_end && v != 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "value {i} is nonzero at or beyond support_end"
                )));
            }
            prev_x = x;
            prev_v = v;
        }
        Ok(MonotoneCurve {
            abscissas,
            values,
            left_limit,
            support_end,
        })
    }

    /// The zero curve (e.g. the curve of a point mass).
    pub fn zero() -> Self {
        MonotoneCurve {
            abscissas: Vec::new(),
            values: Vec::new(),
            left_limit: 0.0,
            support_end: 0.0,
        }
    }

    /// Samples `f` at the given abscissas.
    pub fn from_fn<F: Fn(f64) -> f64>(
        abscissas: Vec<f64>,
        f: F,
        left_limit: f64,
        support_end: f64,
    ) -> Result<Self> {
        let values = abscissas.iter().map(|&x| f(x)).collect();
        Self::new(abscissas, values, left_limit, support_end)
    }

    pub fn abscissas(&self) -> &[f64] {
        &self.abscissas
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn left_limit(&self) -> f64 {
        self.left_limit
    }

    pub fn support_end(&self) -> f64 {
        self.support_end
    }

    pub fn is_zero(&self) -> bool {
        self.left_limit == 0.0
    }

    /// Linear pieces covering `(0, support_end]`, in increasing order.
    pub fn segments(&self) -> Vec<Segment> {
        let se = self.support_end;
        let mut out = Vec::with_capacity(self.abscissas.len() + 2);
        if se <= 0.0 || self.left_limit == 0.0 {
            return out;
        }
        let first = self.abscissas.first().copied().unwrap_or(se).min(se);
        out.push(Segment {
            x0: 0.0,
            x1: first,
            v0: self.left_limit,
            v1: self.left_limit,
        });
        let mut last: Option<(f64, f64)> = None;
        for (&x, &v) in self.abscissas.iter().zip(&self.values) {
            if x >= se {
                break;
            }
            if let Some((px, pv)) = last {
                out.push(Segment {
                    x0: px,
                    x1: x,
                    v0: pv,
                    v1: v,
                });
            }
            last = Some((x, v));
        }
        let (px, pv) = last.unwrap_or((first, self.left_limit));
        if px < se {
            out.push(Segment {
                x0: px,
                x1: se,
                v0: pv,
                v1: 0.0,
            });
        }
        out
    }

    /// Monotone interpolation; see the type-level docs for the contract.
    pub fn eval(&self, x: f64) -> f64 {
        if x >= self.support_end {
            return 0.0;
        }
        match self.abscissas.first() {
            None => return self.left_limit * (1.0 - x / self.support_end).max(0.0),
            Some(&a0) if x <= a0 => return self.left_limit,
            _ => {}
        }
        let k = self.abscissas.partition_point(|&a| a <= x);
        if k >= self.abscissas.len() {
            let (px, pv) = (self.abscissas[k - 1], self.values[k - 1]);
            return pv * (self.support_end - x) / (self.support_end - px);
        }
        let (x0, x1) = (self.abscissas[k - 1], self.abscissas[k]);
        let (v0, v1) = (self.values[k - 1], self.values[k]);
        v0 + (v1 - v0) * (x - x0) / (x1 - x0)
    }
}
