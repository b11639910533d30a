//! Star discrepancy `D*_N = sup_z |#{y_n in [0, z)} / N - vol([0, z))|`.
//!
//! The supremum is attained on the critical grid: each `z_j` is a point coordinate or 1.
//! At a grid corner `g` the volume excess uses the strict count `#{y < g}` and the count
//! excess uses the closed count `#{y <= g}` (the limit of boxes shrinking onto `g`).

use super::PointSet;
use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// Work budget for exact enumeration, counted as `N * (N + 1)^(d - 1)` point visits.
const EXACT_WORK_LIMIT: f64 = (1u64 << 31) as f64;

/// Largest dimension accepted by [`star_discrepancy_exact`].
pub const EXACT_MAX_DIM: usize = 3;

fn critical_grid(ps: &PointSet) -> Vec<Vec<f64>> {
    (0..ps.dim())
        .map(|j| {
            let mut g: Vec<f64> = ps.iter().map(|p| p[j]).collect();
            g.push(1.0);
            g.sort_by(f64::total_cmp);
            g.dedup();
            g
        })
        .collect()
}

/// `|R_N|` at corner `z`, taking the larger of the open-box and closed-box deviations.
pub fn local_discrepancy(ps: &PointSet, z: &[f64]) -> f64 {
    let n = ps.len() as f64;
    let (mut open, mut closed) = (0usize, 0usize);
    for p in ps.iter() {
        if p.iter().zip(z).all(|(y, g)| y <= g) {
            closed += 1;
            if p.iter().zip(z).all(|(y, g)| y < g) {
                open += 1;
            }
        }
    }
    let vol: f64 = z.iter().product();
    (vol - open as f64 / n).max(closed as f64 / n - vol)
}

/// Exact star discrepancy by critical-grid enumeration, for `d <= 3`.
pub fn star_discrepancy_exact(ps: &PointSet) -> Result<f64> {
    let (n, d) = (ps.len(), ps.dim());
    if n == 0 {
        return Err(Error::EmptyPointSet);
    }
    let work = n as f64 * (n as f64 + 1.0).powi(d as i32 - 1);
    if d > EXACT_MAX_DIM || work > EXACT_WORK_LIMIT {
        return Err(Error::TooLarge(format!(
            "exact discrepancy of {n} points in dimension {d}"
        )));
    }
    let grid = critical_grid(ps);
    let last = d - 1;

    // Points ordered by last coordinate; subsets keep this order while filtering.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| ps.point(a)[last].total_cmp(&ps.point(b)[last]));

    let mut best = 0.0f64;
    let mut scan = Scan {
        ps,
        grid: &grid,
        n: n as f64,
        best: &mut best,
    };
    scan.descend(0, &order, &order, 1.0);
    Ok(best)
}

struct Scan<'a> {
    ps: &'a PointSet,
    grid: &'a [Vec<f64>],
    n: f64,
    best: &'a mut f64,
}

impl Scan<'_> {
    /// `open` holds points strictly below the corner in dimensions `< j`, `closed` those
    /// at or below it. Both are sorted by the last coordinate.
    fn descend(&mut self, j: usize, open: &[usize], closed: &[usize], vol: f64) {
        let last = self.grid.len() - 1;
        if j == last {
            self.sweep_last(open, closed, vol);
            return;
        }
        let mut sub_open = Vec::with_capacity(open.len());
        let mut sub_closed = Vec::with_capacity(closed.len());
        for &g in &self.grid[j] {
            sub_open.clear();
            sub_closed.clear();
            sub_open.extend(open.iter().copied().filter(|&i| self.ps.point(i)[j] < g));
            sub_closed.extend(closed.iter().copied().filter(|&i| self.ps.point(i)[j] <= g));
            self.descend(j + 1, &sub_open, &sub_closed, vol * g);
        }
    }

    fn sweep_last(&mut self, open: &[usize], closed: &[usize], vol: f64) {
        let last = self.grid.len() - 1;
        let (mut io, mut ic) = (0usize, 0usize);
        for &g in &self.grid[last] {
            while io < open.len() && self.ps.point(open[io])[last] < g {
                io += 1;
            }
            while ic < closed.len() && self.ps.point(closed[ic])[last] <= g {
                ic += 1;
            }
            let v = vol * g;
            let dev = (v - io as f64 / self.n).max(ic as f64 / self.n - v);
            if dev > *self.best {
                *self.best = dev;
            }
        }
    }
}

/// Certified lower bound on `D*_N` from `trials` random critical-grid corners.
///
/// When `trials` covers the whole critical grid the grid is enumerated instead, which
/// reproduces the exact value.
pub fn star_discrepancy_lower_bound(ps: &PointSet, trials: usize, seed: u64) -> f64 {
    if trials == 0 || ps.is_empty() {
        return 0.0;
    }
    let grid = critical_grid(ps);
    let cells = grid
        .iter()
        .try_fold(1usize, |acc, g| acc.checked_mul(g.len()));
    let mut z = vec![0.0; ps.dim()];
    let mut best = 0.0f64;
    match cells {
        Some(total) if total <= trials => {
            let mut idx = vec![0usize; ps.dim()];
            for _ in 0..total {
                for (j, &k) in idx.iter().enumerate() {
                    z[j] = grid[j][k];
                }
                best = best.max(local_discrepancy(ps, &z));
                for (j, k) in idx.iter_mut().enumerate() {
                    *k += 1;
                    if *k < grid[j].len() {
                        break;
                    }
                    *k = 0;
                }
            }
        }
        _ => {
            let mut rng = SplitMix64::new(seed);
            for _ in 0..trials {
                for (j, g) in grid.iter().enumerate() {
                    z[j] = g[rng.below(g.len() as u64) as usize];
                }
                best = best.max(local_discrepancy(ps, &z));
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lds::{generate, SamplerKind};

    fn pts(dim: usize, rows: &[&[f64]]) -> PointSet {
        let rows: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
        PointSet::from_rows(dim, &rows).unwrap()
    }

    #[test]
    fn single_midpoint() {
        let ps = pts(1, &[&[0.5]]);
        assert_eq!(star_discrepancy_exact(&ps).unwrap(), 0.5);
    }

    #[test]
    fn van_der_corput_three_points() {
        let ps = pts(1, &[&[0.5], &[0.25], &[0.75]]);
        assert!((star_discrepancy_exact(&ps).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn empty_box_contributes_nothing() {
        let ps = generate(SamplerKind::Sobol, 2, 16).unwrap();
        assert_eq!(local_discrepancy(&ps, &[0.0, 0.0]), 0.0);
    }

    #[test]
    fn zero_trials_give_zero() {
        let ps = generate(SamplerKind::Halton, 3, 20).unwrap();
        assert_eq!(star_discrepancy_lower_bound(&ps, 0, 1), 0.0);
    }

    #[test]
    fn exhaustive_trials_match_exact_in_one_dimension() {
        let ps = generate(SamplerKind::UniformRandom { seed: 5 }, 1, 40).unwrap();
        let exact = star_discrepancy_exact(&ps).unwrap();
        assert_eq!(star_discrepancy_lower_bound(&ps, 41, 0), exact);
    }

    #[test]
    fn rejects_large_instances() {
        let ps = generate(SamplerKind::Sobol, 4, 8).unwrap();
        assert!(matches!(star_discrepancy_exact(&ps), Err(Error::TooLarge(_))));
        let ps = generate(SamplerKind::Sobol, 3, 4096).unwrap();
        assert!(matches!(star_discrepancy_exact(&ps), Err(Error::TooLarge(_))));
    }
}
