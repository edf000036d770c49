//! Gauss rules and adaptive Gauss–Kronrod integration.

use crate::tridiagonal;

/// Nodes and weights of a one-dimensional quadrature rule.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// Affine transport of a rule on `[-1, 1]` to `[a, b]`.
    pub fn on_interval(&self, a: f64, b: f64) -> GaussRule {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        GaussRule {
            nodes: self.nodes.iter().map(|t| mid + half * t).collect(),
            weights: self.weights.iter().map(|w| w * half).collect(),
        }
    }
}

/// `n`-point Gauss–Legendre rule on `[-1, 1]` by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> GaussRule {
    assert!(n >= 1, "a Gauss rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi's initial guess for the i-th largest root.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    GaussRule { nodes, weights }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

/// Gauss–Hermite rule for the standard normal law (weights sum to one),
/// from the Jacobi matrix of the probabilists' Hermite polynomials.
pub fn gauss_hermite(n: usize) -> GaussRule {
    assert!(n >= 1, "a Gauss rule needs at least one node");
    let diag = vec![0.0; n];
    let off: Vec<f64> = (1..n).map(|k| (k as f64).sqrt()).collect();
    let (nodes, vectors) = tridiagonal::eigen_with_vectors(&diag, &off);
    let mut weights: Vec<f64> = vectors.iter().map(|v| v[0] * v[0]).collect();
    // Symmetrize away round-off.
    for i in 0..n / 2 {
        let w = 0.5 * (weights[i] + weights[n - 1 - i]);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    let mut nodes = nodes;
    for i in 0..n / 2 {
        let x = 0.5 * (nodes[n - 1 - i] - nodes[i]);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    GaussRule { nodes, weights }
}

/// Composite Gauss–Legendre rule with `per_piece` nodes on each interval
/// between consecutive breakpoints.
pub fn composite_legendre(breaks: &[f64], per_piece: usize) -> GaussRule {
    let base = gauss_legendre(per_piece);
    let mut nodes = Vec::with_capacity(per_piece * breaks.len());
    let mut weights = Vec::with_capacity(per_piece * breaks.len());
    for pair in breaks.windows(2) {
        if pair[1] > pair[0] {
            let piece = base.on_interval(pair[0], pair[1]);
            nodes.extend(piece.nodes);
            weights.extend(piece.weights);
        }
    }
    GaussRule { nodes, weights }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Adaptive Gauss–Kronrod (7/15) integral of `f` over `[a, b]`; either end
/// may be infinite. `tol` is an absolute tolerance on the whole integral.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    if a > b {
        return -integrate(f, b, a, tol);
    }
    match (a.is_finite(), b.is_finite()) {
        (true, true) => adaptive(&f, a, b, tol),
        (true, false) => adaptive(
            &|t: f64| {
                let s = 1.0 - t;
                f(a + t / s) / (s * s)
            },
            0.0,
            1.0,
            tol,
        ),
        (false, true) => adaptive(
            &|t: f64| {
                let s = 1.0 - t;
                f(b - t / s) / (s * s)
            },
            0.0,
            1.0,
            tol,
        ),
        (false, false) => adaptive(
            &|t: f64| {
                let s = 1.0 - t * t;
                f(t / s) * (1.0 + t * t) / (s * s)
            },
            -1.0,
            1.0,
            tol,
        ),
    }
}

fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    const MAX_SEGMENTS: usize = 4000;
    let (v, err) = kronrod15(f, a, b);
    let mut segments = vec![(a, b, v, err)];
    let mut total_err = err;
    while total_err > tol && segments.len() < MAX_SEGMENTS {
        // Split the segment with the largest error estimate.
        let (idx, _) = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (lo, hi, val, e) = segments.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // Segment below floating-point resolution; keep it as is.
            segments.push((lo, hi, val, 0.0));
            total_err -= e;
            continue;
        }
        let (v1, e1) = kronrod15(f, lo, mid);
        let (v2, e2) = kronrod15(f, mid, hi);
        total_err += e1 + e2 - e;
        segments.push((lo, mid, v1, e1));
        segments.push((mid, hi, v2, e2));
    }
    segments.iter().map(|s| s.2).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn golub_welsch_legendre(n: usize) -> GaussRule {
        let diag = vec![0.0; n];
        let off: Vec<f64> = (1..n)
            .map(|k| {
                let k = k as f64;
                k / (4.0 * k * k - 1.0).sqrt()
            })
            .collect();
        let (nodes, vecs) = tridiagonal::eigen_with_vectors(&diag, &off);
        let weights = vecs.iter().map(|v| 2.0 * v[0] * v[0]).collect();
        GaussRule { nodes, weights }
    }

    #[test]
    fn legendre_newton_agrees_with_golub_welsch() {
        for n in [1, 2, 5, 16, 40] {
            let a = gauss_legendre(n);
            let b = golub_welsch_legendre(n);
            for i in 0..n {
                assert!((a.nodes[i] - b.nodes[i]).abs() < 1e-13, "n={n}");
                assert!((a.weights[i] - b.weights[i]).abs() < 1e-13, "n={n}");
            }
        }
    }

    #[test]
    fn legendre_exact_for_polynomials() {
        let rule = gauss_legendre(6);
        for k in 0..12 {
            let exact = if k % 2 == 0 {
                2.0 / (k as f64 + 1.0)
            } else {
                0.0
            };
            let got = rule.integrate(|x| x.powi(k));
            assert!((got - exact).abs() < 1e-14, "k={k}");
        }
    }

    #[test]
    fn hermite_moments() {
        let rule = gauss_hermite(20);
        // E[Z^{2k}] = (2k - 1)!!
        let mut dfact = 1.0;
        for k in 0..10 {
            if k > 0 {
                dfact *= (2 * k - 1) as f64;
            }
            let got = rule.integrate(|x| x.powi(2 * k));
            assert!(
                (got - dfact).abs() < 1e-9 * dfact,
                "k={k}: {got} vs {dfact}"
            );
            assert!(rule.integrate(|x| x.powi(2 * k + 1)).abs() < 1e-9 * dfact);
        }
    }

    #[test]
    fn adaptive_finite_and_infinite() {
        let v = integrate(|x| x.sin(), 0.0, PI, 1e-12);
        assert!((v - 2.0).abs() < 1e-12);
        let g = integrate(
            |x| (-0.5 * x * x).exp(),
            f64::NEG_INFINITY,
            f64::INFINITY,
            1e-12,
        );
        assert!((g - (2.0 * PI).sqrt()).abs() < 1e-10);
        let e = integrate(|x| (-x).exp(), 0.0, f64::INFINITY, 1e-12);
        assert!((e - 1.0).abs() < 1e-11);
        let c = integrate(|x| 1.0 / (1.0 + x * x), f64::NEG_INFINITY, 0.0, 1e-12);
        assert!((c - PI / 2.0).abs() < 1e-10);
    }

    #[test]
    fn adaptive_handles_kinks() {
        let v = integrate(|x: f64| x.abs().sqrt(), -1.0, 1.0, 1e-12);
        assert!((v - 4.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn composite_splits_at_breaks() {
        let rule = composite_legendre(&[-0.5, 0.0, 0.5], 4);
        let v = rule.integrate(|x: f64| x.abs());
        assert!((v - 0.25).abs() < 1e-15);
    }
}
