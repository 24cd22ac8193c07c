//! Local-polytope references: vertex generation, small brute-force maxima and
//! an exact active-set projection onto a convex hull.

use nalgebra::{DMatrix, DVector};

/// Correlation vectors of every deterministic ±1 strategy for `shape`, with
/// tuples in row-major `(i, j, k)` order. Duplicates are kept.
pub fn local_vertices(shape: [usize; 3]) -> Vec<Vec<f64>> {
    let bits = shape[0] + shape[1] + shape[2];
    let mut out = Vec::with_capacity(1 << bits);
    for code in 0u64..(1u64 << bits) {
        let sign = |pos: usize| if (code >> pos) & 1 == 1 { -1.0 } else { 1.0 };
        let mut v = Vec::new();
        for i in 0..shape[0] {
            for j in 0..shape[1] {
                for k in 0..shape[2] {
                    v.push(sign(i) * sign(shape[0] + j) * sign(shape[0] + shape[1] + k));
                }
            }
        }
        out.push(v);
    }
    out
}

/// Maximum of `Σ c[x][y] a_x b_y` over the 16 two-party deterministic strategies.
pub fn two_party_max(coeffs: [[f64; 2]; 2]) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for code in 0..16u32 {
        let s = |b: u32| if (code >> b) & 1 == 1 { -1.0 } else { 1.0 };
        let a = [s(0), s(1)];
        let b = [s(2), s(3)];
        let mut v = 0.0;
        for x in 0..2 {
            for y in 0..2 {
                v += coeffs[x][y] * a[x] * b[y];
            }
        }
        best = best.max(v);
    }
    best
}

fn dedup(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for p in points {
        if !out
            .iter()
            .any(|q| q.iter().zip(p).all(|(a, b)| (a - b).abs() < 1e-12))
        {
            out.push(p.clone());
        }
    }
    out
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Exact `min ||x − target||²` over `x ∈ conv(points)`.
///
/// Enumerates every support set of at most `dim + 1` distinct points, solves
/// the affine-hull projection through its KKT system, and keeps candidates
/// whose barycentric weights are nonnegative. Each candidate is re-evaluated
/// from its (clamped) weights, so every value considered is attained by a
/// genuine hull point and the minimum is the exact optimum.
pub fn hull_projection_sq_distance(points: &[Vec<f64>], target: &[f64]) -> f64 {
    let pts = dedup(points);
    let m = pts.len();
    let dim = target.len();
    assert!(
        m <= 24,
        "brute-force support enumeration is limited to 24 distinct points"
    );
    let max_support = (dim + 1).min(m);
    let mut best = f64::INFINITY;
    for mask in 1u32..(1u32 << m) {
        let size = mask.count_ones() as usize;
        if size > max_support {
            continue;
        }
        let idx: Vec<usize> = (0..m).filter(|&i| (mask >> i) & 1 == 1).collect();
        // [2 GᵀG  1; 1ᵀ 0] [w; μ] = [2 Gᵀ t; 1]
        let n = size + 1;
        let mut kkt = DMatrix::<f64>::zeros(n, n);
        let mut rhs = DVector::<f64>::zeros(n);
        for (r, &a) in idx.iter().enumerate() {
            for (s, &b) in idx.iter().enumerate() {
                kkt[(r, s)] = 2.0 * pts[a].iter().zip(&pts[b]).map(|(x, y)| x * y).sum::<f64>();
            }
            kkt[(r, size)] = 1.0;
            kkt[(size, r)] = 1.0;
            rhs[r] = 2.0 * pts[a].iter().zip(target).map(|(x, y)| x * y).sum::<f64>();
        }
        rhs[size] = 1.0;
        let Some(sol) = kkt.lu().solve(&rhs) else {
            continue;
        };
        let w: Vec<f64> = (0..size).map(|r| sol[r]).collect();
        if w.iter().any(|&x| !x.is_finite() || x < -1e-9) {
            continue;
        }
        let total: f64 = w.iter().map(|&x| x.max(0.0)).sum();
        if total <= 0.0 {
            continue;
        }
        let mut x = vec![0.0; dim];
        for (r, &a) in idx.iter().enumerate() {
            let wr = w[r].max(0.0) / total;
            for d in 0..dim {
                x[d] += wr * pts[a][d];
            }
        }
        best = best.min(sq_dist(&x, target));
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_of_interior_point_is_zero() {
        let square = vec![
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 1.0],
        ];
        assert!(hull_projection_sq_distance(&square, &[0.3, 0.6]) < 1e-20);
    }

    #[test]
    fn projection_onto_edge_and_corner() {
        let square = vec![
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 1.0],
        ];
        assert!((hull_projection_sq_distance(&square, &[0.5, 2.0]) - 1.0).abs() < 1e-12);
        assert!((hull_projection_sq_distance(&square, &[2.0, 2.0]) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn chsh_two_party_max_is_two() {
        assert_eq!(two_party_max([[1.0, 1.0], [1.0, -1.0]]), 2.0);
    }

    #[test]
    fn mermin_vertices_are_sixteen_distinct() {
        assert_eq!(local_vertices([2, 2, 2]).len(), 64);
        assert_eq!(dedup(&local_vertices([2, 2, 2])).len(), 16);
    }
}
