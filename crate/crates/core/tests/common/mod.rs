#![allow(dead_code)]

use poincare_sobol::spectral::{closed_form_spectrum, solve_spectrum};
use poincare_sobol::testfunctions::{Monomial, Polynomial};
use poincare_sobol::{Distribution1D, ModelFunction, SpectralBasis, Weight};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::OnceLock;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Input {
    Uniform01,
    UniformCentered,
    TruncNormal,
    TruncNormalSkewed,
    StdNormal,
}

pub const ALL_INPUTS: [Input; 5] = [
    Input::Uniform01,
    Input::UniformCentered,
    Input::TruncNormal,
    Input::TruncNormalSkewed,
    Input::StdNormal,
];

impl Input {
    pub fn dist(self) -> Distribution1D {
        let n = || Distribution1D::normal(0.0, 1.0).unwrap();
        match self {
            Input::Uniform01 => Distribution1D::uniform(0.0, 1.0).unwrap(),
            Input::UniformCentered => Distribution1D::uniform(-0.5, 0.5).unwrap(),
            Input::TruncNormal => n().truncate(-3.0, 3.0).unwrap(),
            Input::TruncNormalSkewed => n().truncate(-2.0, 3.0).unwrap(),
            Input::StdNormal => n(),
        }
    }

    /// First two non-constant eigenpairs; numerical bases are solved once.
    pub fn basis(self) -> SpectralBasis {
        static TRUNC: OnceLock<SpectralBasis> = OnceLock::new();
        static SKEWED: OnceLock<SpectralBasis> = OnceLock::new();
        let solve = |i: Input| solve_spectrum(&i.dist(), 2, 2000, &Weight::Identity).unwrap();
        match self {
            Input::TruncNormal => TRUNC.get_or_init(|| solve(self)).clone(),
            Input::TruncNormalSkewed => SKEWED.get_or_init(|| solve(self)).clone(),
            _ => closed_form_spectrum(&self.dist(), 2).unwrap(),
        }
    }

    pub fn has_score(self) -> bool {
        !matches!(self, Input::Uniform01 | Input::UniformCentered)
    }
}

/// Every monomial of total degree `<= degree` with a coefficient uniform on
/// `[-1, 1]`.
pub fn random_polynomial(dim: usize, degree: u32, seed: u64) -> Polynomial {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut terms = Vec::new();
    let mut powers = vec![0u32; dim];
    loop {
        if powers.iter().sum::<u32>() <= degree {
            terms.push(Monomial {
                coef: rng.random_range(-1.0..1.0),
                powers: powers.clone(),
            });
        }
        let mut k = 0;
        loop {
            if k == dim {
                return Polynomial::new(dim, terms).unwrap();
            }
            powers[k] += 1;
            if powers[k] <= degree {
                break;
            }
            powers[k] = 0;
            k += 1;
        }
    }
}

/// `D_i^tot = (1/2) E[(h(x) - h(x'_i, x_{-i}))²]` by nested tensor
/// quadrature over `(x, x'_i)`.
pub fn jansen_total_by_quadrature(
    model: &dyn ModelFunction,
    dists: &[Distribution1D],
    i: usize,
    nodes: usize,
) -> f64 {
    let rules: Vec<_> = dists
        .iter()
        .map(|d| d.quadrature_rule(nodes, &[]))
        .collect();
    let d = dists.len();
    let total: usize = rules.iter().map(|r| r.len()).product();
    let mut sum = 0.0;
    let mut digits = vec![0usize; d];
    let mut x = vec![0.0; d];
    for _ in 0..total {
        let mut w = 1.0;
        for k in 0..d {
            x[k] = rules[k].nodes[digits[k]];
            w *= rules[k].weights[digits[k]];
        }
        let h = model.evaluate(&x);
        let mut y = x.clone();
        for (t, wt) in rules[i].nodes.iter().zip(&rules[i].weights) {
            y[i] = *t;
            sum += 0.5 * w * wt * (h - model.evaluate(&y)).powi(2);
        }
        for k in (0..d).rev() {
            digits[k] += 1;
            if digits[k] < rules[k].len() {
                break;
            }
            digits[k] = 0;
        }
    }
    sum
}
