//! Vitali and Hardy–Krause variation on the unit cube.
//!
//! Two estimates are provided. Ladder sums give lower bounds on the Vitali variation
//! (the variation is their supremum over ladders). The mixed-partial recursion
//! `V̂(f) = ∫|∂_1…∂_d f| + Σ_i V̂(f|_{y_i = 1})`, with total variation as the
//! one-dimensional base case, bounds the Hardy–Krause variation from above and is
//! exact when the mixed partials are continuous.

use crate::error::{Error, Result};

/// Largest cell count accepted by [`vitali_variation_on_ladder`].
pub const MAX_LADDER_CELLS: usize = 1_000_000;

/// Largest dimension accepted by [`hardy_krause_upper_bound`].
pub const MAX_RECURSION_DIM: usize = 4;

/// Largest tensor grid (`mesh^d` samples) the recursion will allocate.
pub const MAX_RECURSION_SAMPLES: usize = 1 << 24;

/// A scalar function on the closed unit cube.
pub trait GridFunction: Sync {
    fn dim(&self) -> usize;

    fn eval(&self, y: &[f64]) -> f64;

    /// Analytic `∂^d f / ∂y_1…∂y_d`, when known.
    fn mixed_partial(&self, _y: &[f64]) -> Option<f64> {
        None
    }
}

/// Closure-backed [`GridFunction`].
pub struct FnGrid<F, P = fn(&[f64]) -> f64> {
    dim: usize,
    f: F,
    partial: Option<P>,
}

impl<F: Fn(&[f64]) -> f64 + Sync> FnGrid<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self {
            dim,
            f,
            partial: None,
        }
    }
}

impl<F, P> FnGrid<F, P>
where
    F: Fn(&[f64]) -> f64 + Sync,
    P: Fn(&[f64]) -> f64 + Sync,
{
    pub fn with_mixed_partial(dim: usize, f: F, partial: P) -> Self {
        Self {
            dim,
            f,
            partial: Some(partial),
        }
    }
}

impl<F, P> GridFunction for FnGrid<F, P>
where
    F: Fn(&[f64]) -> f64 + Sync,
    P: Fn(&[f64]) -> f64 + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, y: &[f64]) -> f64 {
        (self.f)(y)
    }

    fn mixed_partial(&self, y: &[f64]) -> Option<f64> {
        self.partial.as_ref().map(|p| p(y))
    }
}

/// `f` with coordinate `axis` pinned to `value`; a function of the remaining coordinates.
struct Pinned<'a> {
    inner: &'a dyn GridFunction,
    axis: usize,
    value: f64,
}

impl GridFunction for Pinned<'_> {
    fn dim(&self) -> usize {
        self.inner.dim() - 1
    }

    fn eval(&self, y: &[f64]) -> f64 {
        let mut full = Vec::with_capacity(y.len() + 1);
        full.extend_from_slice(&y[..self.axis]);
        full.push(self.value);
        full.extend_from_slice(&y[self.axis..]);
        self.inner.eval(&full)
    }
}

/// Per-dimension split points on a box `[a, b]`.
///
/// Each list is strictly increasing inside `[a_j, b_j)`; the successor of the largest
/// value is `b_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ladder {
    lower: Vec<f64>,
    upper: Vec<f64>,
    values: Vec<Vec<f64>>,
}

impl Ladder {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if lower.len() != values.len() || upper.len() != values.len() || values.is_empty() {
            return Err(Error::InvalidArgument(
                "ladder bounds and value lists must share a positive dimension".into(),
            ));
        }
        for (j, vals) in values.iter().enumerate() {
            let (a, b) = (lower[j], upper[j]);
            if !(a < b) {
                return Err(Error::InvalidArgument(format!("empty interval in dimension {j}")));
            }
            if vals.is_empty() {
                return Err(Error::InvalidArgument(format!("no ladder values in dimension {j}")));
            }
            if vals.iter().any(|&v| !(a..b).contains(&v)) {
                return Err(Error::InvalidArgument(format!(
                    "ladder value outside [{a}, {b}) in dimension {j}"
                )));
            }
            if vals.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidArgument(format!(
                    "ladder values not strictly increasing in dimension {j}"
                )));
            }
        }
        Ok(Self {
            lower,
            upper,
            values,
        })
    }

    /// Ladder on the unit cube.
    pub fn unit(values: Vec<Vec<f64>>) -> Result<Self> {
        let d = values.len();
        Self::new(vec![0.0; d], vec![1.0; d], values)
    }

    /// `{0, 1/m, …, (m-1)/m}` in every dimension.
    pub fn uniform(dim: usize, m: usize) -> Result<Self> {
        let vals: Vec<f64> = (0..m).map(|k| k as f64 / m as f64).collect();
        Self::unit(vec![vals; dim])
    }

    /// `{0, 1/(2m), …, (m-1)/(2m)}` in every dimension: the family on which Owen's
    /// kinked functions show unbounded variation.
    pub fn owen_family(dim: usize, m: usize) -> Result<Self> {
        let vals: Vec<f64> = (0..m).map(|k| k as f64 / (2 * m) as f64).collect();
        Self::unit(vec![vals; dim])
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self, j: usize) -> &[f64] {
        &self.values[j]
    }

    /// Successor of the `k`-th value in dimension `j`.
    pub fn successor(&self, j: usize, k: usize) -> f64 {
        self.values[j].get(k + 1).copied().unwrap_or(self.upper[j])
    }

    pub fn cell_count(&self) -> Option<usize> {
        self.values
            .iter()
            .try_fold(1usize, |acc, v| acc.checked_mul(v.len()))
    }

    /// Adds `value` to dimension `j` (no-op if already present).
    pub fn refine(&self, j: usize, value: f64) -> Result<Self> {
        let mut values = self.values.clone();
        if let Err(pos) = values[j].binary_search_by(|v| v.total_cmp(&value)) {
            values[j].insert(pos, value);
        }
        Self::new(self.lower.clone(), self.upper.clone(), values)
    }

    fn nodes(&self, j: usize) -> Vec<f64> {
        let mut n = self.values[j].clone();
        n.push(self.upper[j]);
        n
    }
}

/// Row-major samples of a function on a tensor grid.
struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    fn sample(f: &dyn GridFunction, axes: &[Vec<f64>]) -> Self {
        let shape: Vec<usize> = axes.iter().map(Vec::len).collect();
        let total: usize = shape.iter().product();
        let d = axes.len();
        let mut data = Vec::with_capacity(total);
        let mut idx = vec![0usize; d];
        let mut y: Vec<f64> = axes.iter().map(|a| a[0]).collect();
        for _ in 0..total {
            data.push(f.eval(&y));
            // Row-major increment: last axis fastest.
            for j in (0..d).rev() {
                idx[j] += 1;
                if idx[j] < shape[j] {
                    y[j] = axes[j][idx[j]];
                    break;
                }
                idx[j] = 0;
                y[j] = axes[j][0];
            }
        }
        Self { shape, data }
    }

    /// Applies a linear operator along `axis`, mapping lines of length `n` to `out_len`.
    fn along(&self, axis: usize, out_len: usize, op: impl Fn(&[f64], &mut [f64])) -> Self {
        let n = self.shape[axis];
        let inner: usize = self.shape[axis + 1..].iter().product();
        let outer: usize = self.shape[..axis].iter().product();
        let mut shape = self.shape.clone();
        shape[axis] = out_len;
        let mut data = vec![0.0; outer * out_len * inner];
        let mut line = vec![0.0; n];
        let mut out = vec![0.0; out_len];
        for o in 0..outer {
            for i in 0..inner {
                for (k, l) in line.iter_mut().enumerate() {
                    *l = self.data[(o * n + k) * inner + i];
                }
                op(&line, &mut out);
                for (k, v) in out.iter().enumerate() {
                    data[(o * out_len + k) * inner + i] = *v;
                }
            }
        }
        Self { shape, data }
    }

    fn abs_sum(&self) -> f64 {
        self.data.iter().map(|v| v.abs()).sum()
    }
}

/// `Σ_cells |Σ_{v ⊆ 1:d} (-1)^{|v|} f(y^v : y_+^{-v})|` over the ladder's cells.
pub fn vitali_variation_on_ladder(f: &dyn GridFunction, ladder: &Ladder) -> Result<f64> {
    let d = f.dim();
    if d == 0 || ladder.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: ladder.dim(),
        });
    }
    match ladder.cell_count() {
        Some(c) if c <= MAX_LADDER_CELLS => {}
        _ => {
            return Err(Error::TooLarge(format!(
                "ladder grid exceeds {MAX_LADDER_CELLS} cells"
            )))
        }
    }
    let axes: Vec<Vec<f64>> = (0..d).map(|j| ladder.nodes(j)).collect();
    let mut t = Tensor::sample(f, &axes);
    // The alternating corner sum is the d-fold forward difference.
    for axis in 0..d {
        let n = t.shape[axis];
        t = t.along(axis, n - 1, |line, out| {
            for (k, o) in out.iter_mut().enumerate() {
                *o = line[k + 1] - line[k];
            }
        });
    }
    Ok(t.abs_sum())
}

/// Ladder lower bound on the Hardy–Krause variation: the Vitali sums of `f` and of all
/// its restrictions to upper faces `y_u = 1`, each on the uniform `m`-ladder.
pub fn hardy_krause_ladder_lower_bound(f: &dyn GridFunction, m: usize) -> Result<f64> {
    let d = f.dim();
    if d == 0 || m == 0 {
        return Err(Error::InvalidArgument("dimension and ladder size must be positive".into()));
    }
    if d > 20 {
        return Err(Error::TooLarge(format!("{d} dimensions have too many faces")));
    }
    let mut total = 0.0;
    for mask in 1u32..(1 << d) {
        let free: Vec<usize> = (0..d).filter(|j| mask >> j & 1 == 1).collect();
        let face = Face {
            inner: f,
            free: &free,
        };
        total += vitali_variation_on_ladder(&face, &Ladder::uniform(free.len(), m)?)?;
    }
    Ok(total)
}

/// `f` on the face where every coordinate outside `free` equals 1.
struct Face<'a> {
    inner: &'a dyn GridFunction,
    free: &'a [usize],
}

impl GridFunction for Face<'_> {
    fn dim(&self) -> usize {
        self.free.len()
    }

    fn eval(&self, y: &[f64]) -> f64 {
        let mut full = vec![1.0; self.inner.dim()];
        for (&j, &v) in self.free.iter().zip(y) {
            full[j] = v;
        }
        self.inner.eval(&full)
    }
}

/// Upper bound `V̂_HK` from the mixed-partial recursion.
///
/// The integral uses the midpoint rule on `mesh^d` cells. Without an analytic mixed
/// partial, each derivative is a central difference with step `1/mesh` between
/// neighbouring midpoints, one-sided in the first and last cell. The one-dimensional
/// base case is the total variation of `f` sampled at `k/mesh`.
pub fn hardy_krause_upper_bound(f: &dyn GridFunction, mesh: usize) -> Result<f64> {
    let d = f.dim();
    if d == 0 || d > MAX_RECURSION_DIM {
        return Err(Error::UnsupportedDimension {
            kind: "Hardy-Krause recursion".into(),
            dim: d,
        });
    }
    if mesh < 2 {
        return Err(Error::InvalidArgument(format!("mesh {mesh} < 2")));
    }
    if (mesh as f64).powi(d as i32) > MAX_RECURSION_SAMPLES as f64 {
        return Err(Error::TooLarge(format!("mesh {mesh} in dimension {d}")));
    }
    Ok(recursion(f, mesh, true))
}

fn recursion(f: &dyn GridFunction, mesh: usize, top: bool) -> f64 {
    let d = f.dim();
    if d == 1 {
        let nodes: Vec<f64> = (0..=mesh).map(|k| k as f64 / mesh as f64).collect();
        let vals: Vec<f64> = nodes.iter().map(|&x| f.eval(&[x])).collect();
        return vals.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    }
    let h = 1.0 / mesh as f64;
    let mids: Vec<f64> = (0..mesh).map(|k| (k as f64 + 0.5) * h).collect();
    let cell_volume = h.powi(d as i32);

    let analytic = top && f.mixed_partial(&vec![0.5; d]).is_some();
    let integral = if analytic {
        let axes = vec![mids; d];
        let partial = PartialOf(f);
        Tensor::sample(&partial, &axes).abs_sum() * cell_volume
    } else {
        let mut t = Tensor::sample(f, &vec![mids; d]);
        for axis in 0..d {
            t = t.along(axis, mesh, |line, out| {
                let n = line.len();
                for k in 0..n {
                    out[k] = if k == 0 {
                        (line[1] - line[0]) / h
                    } else if k == n - 1 {
                        (line[n - 1] - line[n - 2]) / h
                    } else {
                        (line[k + 1] - line[k - 1]) / (2.0 * h)
                    };
                }
            });
        }
        t.abs_sum() * cell_volume
    };

    let faces: f64 = (0..d)
        .map(|axis| {
            let pinned = Pinned {
                inner: f,
                axis,
                value: 1.0,
            };
            recursion(&pinned, mesh, false)
        })
        .sum();
    integral + faces
}

struct PartialOf<'a>(&'a dyn GridFunction);

impl GridFunction for PartialOf<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn eval(&self, y: &[f64]) -> f64 {
        self.0.mixed_partial(y).unwrap_or(f64::NAN)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xy() -> FnGrid<impl Fn(&[f64]) -> f64 + Sync> {
        FnGrid::new(2, |y: &[f64]| y[0] * y[1])
    }

    #[test]
    fn constant_has_no_variation() {
        let c = FnGrid::new(3, |_: &[f64]| 4.2);
        let ladder = Ladder::uniform(3, 5).unwrap();
        assert_eq!(vitali_variation_on_ladder(&c, &ladder).unwrap(), 0.0);
        assert_eq!(hardy_krause_upper_bound(&c, 16).unwrap(), 0.0);
    }

    #[test]
    fn product_on_half_ladder() {
        let ladder = Ladder::unit(vec![vec![0.5], vec![0.5]]).unwrap();
        // One cell [1/2, 1]^2: 1 - 1/2 - 1/2 + 1/4.
        assert_eq!(vitali_variation_on_ladder(&xy(), &ladder).unwrap(), 0.25);
        let full = Ladder::unit(vec![vec![0.0, 0.5], vec![0.0, 0.5]]).unwrap();
        assert_eq!(vitali_variation_on_ladder(&xy(), &full).unwrap(), 1.0);
    }

    #[test]
    fn product_recursion_is_three() {
        let v = hardy_krause_upper_bound(&xy(), 128).unwrap();
        assert!((v - 3.0).abs() < 1e-12, "{v}");
        let analytic = FnGrid::with_mixed_partial(2, |y: &[f64]| y[0] * y[1], |_: &[f64]| 1.0);
        assert!((hardy_krause_upper_bound(&analytic, 8).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn recursion_preconditions() {
        let six = FnGrid::new(6, |y: &[f64]| y.iter().map(|v| (4.0 * std::f64::consts::PI * v).sin()).sum());
        assert!(matches!(
            hardy_krause_upper_bound(&six, 8),
            Err(Error::UnsupportedDimension { .. })
        ));
        assert!(hardy_krause_upper_bound(&xy(), 1).is_err());
    }

    #[test]
    fn ladder_validation() {
        assert!(Ladder::unit(vec![vec![0.5, 0.25]]).is_err());
        assert!(Ladder::unit(vec![vec![1.0]]).is_err());
        assert!(Ladder::unit(vec![vec![]]).is_err());
        let l = Ladder::unit(vec![vec![0.0, 0.25]]).unwrap();
        assert_eq!(l.successor(0, 0), 0.25);
        assert_eq!(l.successor(0, 1), 1.0);
    }

    #[test]
    fn oversized_ladder_rejected() {
        let l = Ladder::uniform(3, 101).unwrap();
        let f = FnGrid::new(3, |y: &[f64]| y[0]);
        assert!(matches!(
            vitali_variation_on_ladder(&f, &l),
            Err(Error::TooLarge(_))
        ));
    }

    #[test]
    fn ladder_hardy_krause_of_product() {
        let v = hardy_krause_ladder_lower_bound(&xy(), 7).unwrap();
        assert!((v - 3.0).abs() < 1e-12);
    }
}
