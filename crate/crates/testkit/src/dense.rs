//! Element-wise dense algebra for three qubits (party 1 = most significant bit).

use num_complex::Complex64;

pub type Rows = Vec<Vec<Complex64>>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// `(|000> + |111>)(<000| + <111|) / 2`, expanded by hand.
pub fn ghz_density() -> Rows {
    let mut rho = vec![vec![c(0.0, 0.0); 8]; 8];
    let amp = [(0usize, 1.0 / 2f64.sqrt()), (7usize, 1.0 / 2f64.sqrt())];
    for &(i, ai) in &amp {
        for &(j, aj) in &amp {
            rho[i][j] += c(ai * aj, 0.0);
        }
    }
    rho
}

/// Swaps qubits `a` and `b` (0 = party 1): returns `P ρ Pᵀ`.
pub fn permute_qubits(rho: &Rows, a: usize, b: usize) -> Rows {
    let perm = |idx: usize| {
        let bits: Vec<usize> = (0..3).map(|q| (idx >> (2 - q)) & 1).collect();
        let mut swapped = bits.clone();
        swapped.swap(a, b);
        swapped.iter().fold(0, |acc, &x| acc * 2 + x)
    };
    let mut out = vec![vec![c(0.0, 0.0); 8]; 8];
    for i in 0..8 {
        for j in 0..8 {
            out[perm(i)][perm(j)] = rho[i][j];
        }
    }
    out
}

fn spin(n: [f64; 3]) -> [[Complex64; 2]; 2] {
    // σx = [[0,1],[1,0]], σy = [[0,-i],[i,0]], σz = [[1,0],[0,-1]]
    let mut m = [[c(0.0, 0.0); 2]; 2];
    m[0][1] += c(n[0], 0.0);
    m[1][0] += c(n[0], 0.0);
    m[0][1] += c(0.0, -n[1]);
    m[1][0] += c(0.0, n[1]);
    m[0][0] += c(n[2], 0.0);
    m[1][1] += c(-n[2], 0.0);
    m
}

/// `Tr[ρ (n1·σ ⊗ n2·σ ⊗ n3·σ)]` by direct index summation.
pub fn correlation(rho: &Rows, dirs: [[f64; 3]; 3]) -> f64 {
    let ops: Vec<_> = dirs.iter().map(|&d| spin(d)).collect();
    let bit = |idx: usize, q: usize| (idx >> (2 - q)) & 1;
    let mut acc = c(0.0, 0.0);
    for i in 0..8 {
        for j in 0..8 {
            let mut k = c(1.0, 0.0);
            for (q, op) in ops.iter().enumerate() {
                k *= op[bit(j, q)][bit(i, q)];
            }
            acc += rho[i][j] * k;
        }
    }
    acc.re
}
