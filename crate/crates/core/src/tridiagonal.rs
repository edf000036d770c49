//! Symmetric tridiagonal eigensolvers.
//!
//! A matrix is passed as its diagonal `d` (length `n`) and its sub-diagonal
//! `e` (length `n - 1`). Eigenvalues come from the implicit-shift QL
//! iteration; eigenvectors either from the same iteration with accumulated
//! rotations ([`eigen_with_vectors`], `O(n^3)`) or from inverse iteration on
//! the selected eigenvalues ([`lowest_eigenpairs`], `O(n)` per vector).

const MAX_SWEEPS: usize = 60;

/// Eigenvalues of a symmetric tridiagonal matrix, sorted ascending.
pub fn eigenvalues(d: &[f64], e: &[f64]) -> Vec<f64> {
    let mut d = d.to_vec();
    let mut e = padded_offdiag(e, d.len());
    ql_implicit(&mut d, &mut e, None);
    d.sort_by(f64::total_cmp);
    d
}

/// Eigenvalues (ascending) and orthonormal eigenvectors. `vectors[k]` is the
/// eigenvector of `values[k]`.
pub fn eigen_with_vectors(d: &[f64], e: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = d.len();
    let mut d = d.to_vec();
    let mut e = padded_offdiag(e, n);
    // z is stored row-major: z[row * n + col], column k is eigenvector k.
    let mut z = vec![0.0; n * n];
    for i in 0..n {
        z[i * n + i] = 1.0;
    }
    ql_implicit(&mut d, &mut e, Some(&mut z));

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let values = order.iter().map(|&k| d[k]).collect();
    let vectors = order
        .iter()
        .map(|&k| (0..n).map(|row| z[row * n + k]).collect())
        .collect();
    (values, vectors)
}

/// The `count` smallest eigenpairs: QL eigenvalues, then inverse iteration.
pub fn lowest_eigenpairs(d: &[f64], e: &[f64], count: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = d.len();
    let count = count.min(n);
    let values: Vec<f64> = eigenvalues(d, e).into_iter().take(count).collect();
    let scale = d
        .iter()
        .map(|x| x.abs())
        .chain(e.iter().map(|x| 2.0 * x.abs()))
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);

    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(count);
    for &lambda in &values {
        let v = inverse_iteration(d, e, lambda, scale, &vectors);
        vectors.push(v);
    }
    (values, vectors)
}

fn padded_offdiag(e: &[f64], n: usize) -> Vec<f64> {
    assert_eq!(e.len() + 1, n.max(1), "sub-diagonal must have length n - 1");
    let mut out = e.to_vec();
    out.push(0.0);
    out
}

fn ql_implicit(d: &mut [f64], e: &mut [f64], mut z: Option<&mut [f64]>) {
    let n = d.len();
    if n <= 1 {
        return;
    }
    for l in 0..n {
        let mut sweeps = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            sweeps += 1;
            assert!(sweeps <= MAX_SWEEPS, "QL iteration failed to converge");

            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if let Some(z) = z.as_deref_mut() {
                    for row in 0..n {
                        let zf = z[row * n + i + 1];
                        let zi = z[row * n + i];
                        z[row * n + i + 1] = s * zi + c * zf;
                        z[row * n + i] = c * zi - s * zf;
                    }
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
}

/// Inverse iteration for the eigenvector of a simple eigenvalue `lambda`,
/// kept orthogonal to `previous`.
fn inverse_iteration(
    d: &[f64],
    e: &[f64],
    lambda: f64,
    scale: f64,
    previous: &[Vec<f64>],
) -> Vec<f64> {
    let n = d.len();
    if n == 1 {
        return vec![1.0];
    }
    let shift = lambda + 4.0 * f64::EPSILON * scale;
    let lu = TridiagonalLu::factor(d, e, shift, scale);

    // Deterministic, non-degenerate start vector.
    let mut x: Vec<f64> = (0..n)
        .map(|i| 1.0 + 0.5 * ((i as f64) * 0.618_033_988_749_895).fract())
        .collect();
    for _ in 0..4 {
        orthogonalize(&mut x, previous);
        lu.solve(&mut x);
        orthogonalize(&mut x, previous);
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        x.iter_mut().for_each(|v| *v /= norm);
    }
    x
}

fn orthogonalize(x: &mut [f64], previous: &[Vec<f64>]) {
    for q in previous {
        let dot: f64 = x.iter().zip(q).map(|(a, b)| a * b).sum();
        x.iter_mut().zip(q).for_each(|(a, b)| *a -= dot * b);
    }
}

/// LU factorization with partial pivoting of `T - shift I` (LAPACK `gttrf`).
struct TridiagonalLu {
    dl: Vec<f64>,
    d: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    swapped: Vec<bool>,
}

impl TridiagonalLu {
    fn factor(diag: &[f64], off: &[f64], shift: f64, scale: f64) -> Self {
        let n = diag.len();
        let mut d: Vec<f64> = diag.iter().map(|v| v - shift).collect();
        let mut dl = off.to_vec();
        let mut du = off.to_vec();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        let tiny = f64::EPSILON * scale;

        for i in 0..n - 1 {
            if d[i].abs() >= dl[i].abs() {
                if d[i] == 0.0 {
                    d[i] = tiny;
                }
                let fact = dl[i] / d[i];
                dl[i] = fact;
                d[i + 1] -= fact * du[i];
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] *= -fact;
                }
                swapped[i] = true;
            }
        }
        if d[n - 1] == 0.0 {
            d[n - 1] = tiny;
        }
        Self {
            dl,
            d,
            du,
            du2,
            swapped,
        }
    }

    fn solve(&self, b: &mut [f64]) {
        let n = self.d.len();
        for i in 0..n - 1 {
            if self.swapped[i] {
                b.swap(i, i + 1);
            }
            b[i + 1] -= self.dl[i] * b[i];
        }
        b[n - 1] /= self.d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }
}
