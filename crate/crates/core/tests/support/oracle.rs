//! Brute-force reference implementations.

use std::collections::BTreeSet;

use kronkge::{DenseMatrix, TieBreak};
use rand::Rng;

/// `(X ⊗ Z) v` from the block definition, one entry at a time.
pub fn block_product(x: &DenseMatrix, z: &DenseMatrix, v: &[f64]) -> Vec<f64> {
    let (p, q) = (z.rows(), z.cols());
    let mut out = vec![0.0; x.rows() * p];
    for i in 0..x.rows() {
        for k in 0..p {
            for j in 0..x.cols() {
                for l in 0..q {
                    out[i * p + k] += x.get(i, j) * z.get(k, l) * v[j * q + l];
                }
            }
        }
    }
    out
}

/// `h ∘ (r ⊗ r) · t`, decompressing `r` by hand.
pub fn kd_rel_score(h: &[f64], r: &[f64], t: &[f64]) -> f64 {
    let m = r.len();
    (0..m * m).map(|k| h[k] * r[k / m] * r[k % m] * t[k]).sum()
}

/// `Σ_i Σ_j M[i][j]·t[j]` with `M[i][j] = (h⊗h)[i·m+j]·(r⊗r)[i·m+j]`.
pub fn kd_full_score(h: &[f64], r: &[f64], t: &[f64]) -> f64 {
    let m = h.len();
    let mut total = 0.0;
    for i in 0..m {
        for j in 0..m {
            total += h[i] * h[j] * r[i] * r[j] * t[j];
        }
    }
    total
}

/// Expanded form of `((a,b)⊗(a,b)) ∘ ((c,d)⊗(c,d)) · ((e,f)⊗(e,f))`.
pub fn symbolic_expansion([a, b, c, d, e, f]: [f64; 6]) -> f64 {
    a * a * c * c * e * e + 2.0 * (a * b * c * d * e * f) + b * b * d * d * f * f
}

/// Rank by sorting: drop filtered competitors, order by descending score,
/// and put the target ahead of (optimistic) or behind (pessimistic) ties.
pub fn sort_rank(scores: &[f64], target: usize, filter: &BTreeSet<usize>, tie: TieBreak) -> usize {
    let mut pool: Vec<usize> = (0..scores.len())
        .filter(|x| *x == target || !filter.contains(x))
        .collect();
    pool.sort_by(|&a, &b| {
        scores[b].partial_cmp(&scores[a]).unwrap().then_with(|| {
            let key = |x: usize| match (x == target, tie) {
                (true, TieBreak::Optimistic) => 0,
                (true, TieBreak::Pessimistic) => 2,
                (false, _) => 1,
            };
            key(a).cmp(&key(b))
        })
    });
    pool.iter().position(|&x| x == target).unwrap() + 1
}

/// Scores on a few distinct levels (so ties are common) with a filter of
/// random density.
pub fn ranking_case(rng: &mut impl Rng) -> (Vec<f64>, usize, BTreeSet<usize>) {
    let n = rng.gen_range(1..60);
    let levels = rng.gen_range(1..6);
    let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(0..levels) as f64 * 0.25).collect();
    let target = rng.gen_range(0..n);
    let density: f64 = rng.gen_range(0.0..1.0);
    let filter = (0..n).filter(|&x| x != target && rng.gen_bool(density)).collect();
    (scores, target, filter)
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> DenseMatrix {
    DenseMatrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-2.0..2.0)).collect()).unwrap()
}

pub fn random_vec(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect()
}
