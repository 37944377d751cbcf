//! Discrete Hardy–Littlewood maximal operator.
//!
//! Averages of `|f|` are taken over the grid points of closed periodic balls
//! `{y : |y - x| ≤ r}` (periodic distance, every torus point counted once).
//! The radius set is `r = 0` (the point itself, so `Mf ≥ |f|`) followed by
//! `h·2^i` for `i = 0, 1, ...` up to the first radius whose ball covers the
//! whole torus: `N/2` cells in 1D, `N` cells in 2D. Every ball sum is a
//! fixed-order sum of non-negative terms, which keeps the operator exactly
//! monotone in floating point.

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::field::RealField;
use crate::spectral::lp_norm;

pub fn maximal_function(f: &RealField) -> RealField {
    maximal_with_radii(f, &dyadic_radii(f.grid().n(), f.grid().dim()))
}

/// Same operator over every integer radius up to the covering radius
/// instead of the dyadic ones. Quadratic cost per point.
pub fn maximal_function_all_radii(f: &RealField) -> RealField {
    let top = covering_radius(f.grid().n(), f.grid().dim());
    let radii: Vec<usize> = (0..=top).collect();
    maximal_with_radii(f, &radii)
}

fn maximal_with_radii(f: &RealField, radii: &[usize]) -> RealField {
    let abs: Vec<f64> = f.values().iter().map(|v| v.abs()).collect();
    let grid = *f.grid();
    let values = match grid.dim() {
        1 => maximal_1d(&abs, grid.n(), radii),
        _ => maximal_2d(&abs, grid.n(), radii),
    };
    RealField::new(grid, values).expect("grid length preserved")
}

/// Smallest radius (in cells) whose closed ball is the whole torus.
fn covering_radius(n: usize, dim: usize) -> usize {
    if dim == 1 {
        n / 2
    } else {
        // n/√2 rounded up to a power of two
        n
    }
}

fn dyadic_radii(n: usize, dim: usize) -> Vec<usize> {
    let top = covering_radius(n, dim).trailing_zeros();
    std::iter::once(0).chain((0..=top).map(|i| 1usize << i)).collect()
}

/// Offsets `m` with `|m| ≤ r`, one representative per torus point:
/// `[max(-r, 1 - N/2), min(r, N/2)]`.
fn offset_range(r: usize, n: usize) -> (isize, isize) {
    let half = (n / 2) as isize;
    let r = r as isize;
    ((-r).max(1 - half), r.min(half))
}

/// `radii` must be increasing and start at 0.
fn maximal_1d(abs: &[f64], n: usize, radii: &[usize]) -> Vec<f64> {
    (0..n)
        .into_par_iter()
        .map(|x| {
            let at = |m: isize| abs[(x as isize + m).rem_euclid(n as isize) as usize];
            let mut sum = at(0);
            let (mut lo, mut hi) = (0isize, 0isize);
            let mut best = sum;
            for &r in radii.iter().skip(1) {
                let (new_lo, new_hi) = offset_range(r, n);
                for m in hi + 1..=new_hi {
                    sum += at(m);
                }
                for m in (new_lo..lo).rev() {
                    sum += at(m);
                }
                (lo, hi) = (new_lo, new_hi);
                best = best.max(sum / (hi - lo + 1) as f64);
            }
            best
        })
        .collect()
}

/// Sum tree over a doubled periodic row, so every wrapped window is one
/// contiguous range.
struct RowTree {
    size: usize,
    nodes: Vec<f64>,
}

impl RowTree {
    fn new(row: &[f64]) -> Self {
        let size = 2 * row.len();
        let mut nodes = vec![0.0; 2 * size];
        for i in 0..size {
            nodes[size + i] = row[i % row.len()];
        }
        for i in (1..size).rev() {
            nodes[i] = nodes[2 * i] + nodes[2 * i + 1];
        }
        Self { size, nodes }
    }

    /// Sum over `[lo, hi)` of the doubled row.
    fn range(&self, lo: usize, hi: usize) -> f64 {
        let (mut l, mut r) = (lo + self.size, hi + self.size);
        let (mut left, mut right) = (0.0, 0.0);
        while l < r {
            if l & 1 == 1 {
                left += self.nodes[l];
                l += 1;
            }
            if r & 1 == 1 {
                r -= 1;
                right += self.nodes[r];
            }
            l >>= 1;
            r >>= 1;
        }
        left + right
    }
}

fn maximal_2d(abs: &[f64], n: usize, radii: &[usize]) -> Vec<f64> {
    let trees: Vec<RowTree> = abs.chunks(n).map(RowTree::new).collect();
    // per disc: (row offset, column offset range) covering each torus point once
    let discs: Vec<Vec<(isize, isize, isize)>> = radii
        .iter()
        .filter(|&&r| r > 0)
        .map(|&r| {
            let r2 = (r * r) as isize;
            let (a_lo, a_hi) = offset_range(r, n);
            (a_lo..=a_hi)
                .map(|a| {
                    let mut w = 0isize;
                    while (w + 1) * (w + 1) + a * a <= r2 {
                        w += 1;
                    }
                    let (b_lo, b_hi) = offset_range(w as usize, n);
                    (a, b_lo, b_hi)
                })
                .collect()
        })
        .collect();
    (0..n * n)
        .into_par_iter()
        .map(|idx| {
            let (x, y) = ((idx / n) as isize, (idx % n) as isize);
            let mut best = abs[idx];
            for disc in &discs {
                let mut sum = 0.0;
                let mut count = 0usize;
                for &(a, b_lo, b_hi) in disc {
                    let row = (x + a).rem_euclid(n as isize) as usize;
                    let lo = (y + b_lo).rem_euclid(n as isize) as usize;
                    let len = (b_hi - b_lo + 1) as usize;
                    sum += trees[row].range(lo, lo + len);
                    count += len;
                }
                best = best.max(sum / count as f64);
            }
            best
        })
        .collect()
}

/// `‖(M f_j)_j‖_{L^p(l^q)}`; `q = ∞` takes the pointwise supremum.
pub fn vector_maximal_norm(fs: &[RealField], p: f64, q: f64) -> Result<f64> {
    if q.is_nan() || q <= 1.0 {
        return Err(invalid("q", format!("need 1 < q <= inf, got {q}")));
    }
    let maximals: Vec<RealField> = fs.iter().map(maximal_function).collect();
    lp_lq_norm(&maximals, p, q)
}

/// `‖(f_j)_j‖_{L^p(l^q)}` without the maximal operator; `1 < p < ∞`,
/// `1 ≤ q ≤ ∞`.
pub fn lp_lq_norm(fs: &[RealField], p: f64, q: f64) -> Result<f64> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(invalid("p", format!("need 1 < p < inf, got {p}")));
    }
    if q.is_nan() || q < 1.0 {
        return Err(invalid("q", format!("need 1 <= q <= inf, got {q}")));
    }
    let first = fs.first().ok_or_else(|| invalid("fs", "empty sequence"))?;
    if fs.iter().any(|f| f.grid() != first.grid()) {
        return Err(Error::GridMismatch);
    }
    let aggregate = pointwise_lq(fs, q);
    lp_norm(&aggregate, p)
}

/// Pointwise `l^q` aggregate over a sequence of fields on one grid.
pub(crate) fn pointwise_lq(fs: &[RealField], q: f64) -> RealField {
    let grid = *fs[0].grid();
    let values = (0..grid.len())
        .map(|i| {
            if q.is_infinite() {
                fs.iter().fold(0.0f64, |m, f| m.max(f.values()[i].abs()))
            } else if q == 2.0 {
                fs.iter().map(|f| f.values()[i].powi(2)).sum::<f64>().sqrt()
            } else {
                fs.iter()
                    .map(|f| f.values()[i].abs().powf(q))
                    .sum::<f64>()
                    .powf(1.0 / q)
            }
        })
        .collect();
    RealField::new(grid, values).expect("grid length preserved")
}
