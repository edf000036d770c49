mod common;

use common::{jansen_total_by_quadrature, random_polynomial, Input, ALL_INPUTS};
use poincare_sobol::estimators::{
    bootstrap_ci, center, dgsm, dgsm_upper_bound, fisher_lower_bound, gc_coefficients,
    gc_lower_bound, monomial_lower_bound, monte_carlo_sample, pdo_der_lower_bound, pdo_lower_bound,
    quadrature_sample, AnovaOracle,
};
use poincare_sobol::testfunctions::{LinearInteraction, Monomial, Polynomial};
use poincare_sobol::{BoundKind, Distribution1D, ModelFunction, MultiIndex, SpectralBasis};
use proptest::prelude::*;

const NODES: usize = 30;

fn setup(input: Input, dim: usize) -> (Vec<Distribution1D>, Vec<SpectralBasis>) {
    (vec![input.dist(); dim], vec![input.basis(); dim])
}

fn input_strategy() -> impl Strategy<Value = Input> {
    (0..ALL_INPUTS.len()).prop_map(|k| ALL_INPUTS[k])
}

fn without_input(p: &Polynomial, i: usize) -> Polynomial {
    let terms = p
        .terms
        .iter()
        .filter(|t| t.powers[i] == 0)
        .cloned()
        .collect();
    Polynomial::new(p.dim, terms).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn oracle_agrees_with_independent_jansen_quadrature(
        seed in any::<u64>(), dim in 1usize..=3, degree in 1u32..=4, input in input_strategy()
    ) {
        let model = random_polynomial(dim, degree, seed);
        let (dists, _) = setup(input, dim);
        let oracle = AnovaOracle::new(&model, &dists, NODES).unwrap();
        let mut closed_sum = 0.0;
        for i in 0..dim {
            let jansen = jansen_total_by_quadrature(&model, &dists, i, NODES);
            let total = oracle.total(&[i]).unwrap();
            prop_assert!((total - jansen).abs() <= 1e-10 * (1.0 + jansen), "{total} vs {jansen}");
            closed_sum += oracle.partial(&[i]).unwrap();
        }
        prop_assert!(closed_sum <= oracle.variance() + 1e-10);
    }

    #[test]
    fn bounds_are_dominated_by_exact_total_variance(
        seed in any::<u64>(), dim in 1usize..=3, degree in 1u32..=4, input in input_strategy()
    ) {
        let model = random_polynomial(dim, degree, seed);
        let (dists, bases) = setup(input, dim);
        let q = quadrature_sample(&model, &dists, NODES).unwrap();
        let qc = center(&q);
        let oracle = AnovaOracle::new(&model, &dists, NODES).unwrap();
        for i in 0..dim {
            let truth = oracle.total(&[i]).unwrap();
            let mut lower = Vec::new();
            for k in 1..=2 {
                lower.push(pdo_lower_bound(&qc, &bases, i, k).unwrap());
                lower.push(pdo_der_lower_bound(&q, &bases, i, k).unwrap());
            }
            if input.has_score() {
                lower.push(fisher_lower_bound(&q, &dists, i).unwrap());
            }
            if input == Input::Uniform01 {
                for m in 1..=3 {
                    lower.push(monomial_lower_bound(&q, &model, &dists, i, m).unwrap());
                }
            }
            for b in &lower {
                prop_assert!(b.value <= truth + 1e-8, "{:?} {} > {truth}", b.kind, b.value);
            }
            let cp = bases[i].poincare_constant().unwrap();
            let upper = dgsm_upper_bound(dgsm(&q, i).unwrap(), cp, i);
            prop_assert!(upper.value >= truth - 1e-8, "upper {} < {truth}", upper.value);
        }
    }

    #[test]
    fn function_and_derivative_forms_coincide_under_quadrature(
        seed in any::<u64>(), dim in 1usize..=3, degree in 1u32..=3,
        input in prop_oneof![Just(Input::UniformCentered), Just(Input::Uniform01), Just(Input::StdNormal)]
    ) {
        let model = random_polynomial(dim, degree, seed);
        let (dists, bases) = setup(input, dim);
        let q = quadrature_sample(&model, &dists, NODES).unwrap();
        for i in 0..dim {
            for k in 1..=2 {
                let f = pdo_lower_bound(&center(&q), &bases, i, k).unwrap();
                let g = pdo_der_lower_bound(&q, &bases, i, k).unwrap();
                prop_assert!((f.value - g.value).abs() <= 1e-10 * (1.0 + f.value), "{} vs {}", f.value, g.value);
            }
        }
    }

    #[test]
    fn fisher_matches_first_eigenvalue_bound_for_normal_inputs(
        seed in any::<u64>(), dim in 1usize..=3, degree in 1u32..=4
    ) {
        let model = random_polynomial(dim, degree, seed);
        let (dists, bases) = setup(Input::StdNormal, dim);
        let q = quadrature_sample(&model, &dists, NODES).unwrap();
        for i in 0..dim {
            let f = fisher_lower_bound(&q, &dists, i).unwrap();
            let p = pdo_der_lower_bound(&q, &bases, i, 1).unwrap();
            prop_assert!((f.value - p.value).abs() <= 1e-10 * (1.0 + p.value));
        }
    }

    #[test]
    fn fisher_equality_case(alpha in -3.0f64..3.0, beta in -3.0f64..3.0, g1 in -2.0f64..2.0, g2 in -2.0f64..2.0) {
        // alpha Z_1 + beta Z_1 Z_2 + g(x_2) with Z = -x for standard normals.
        let model = Polynomial::new(2, vec![
            Monomial { coef: -alpha, powers: vec![1, 0] },
            Monomial { coef: beta, powers: vec![1, 1] },
            Monomial { coef: g1, powers: vec![0, 1] },
            Monomial { coef: g2, powers: vec![0, 3] },
        ]).unwrap();
        let (dists, _) = setup(Input::StdNormal, 2);
        let q = quadrature_sample(&model, &dists, NODES).unwrap();
        let truth = AnovaOracle::new(&model, &dists, NODES).unwrap().total(&[0]).unwrap();
        let f = fisher_lower_bound(&q, &dists, 0).unwrap();
        prop_assert!((f.value - truth).abs() <= 1e-8, "{} vs {truth}", f.value);
    }

    #[test]
    fn parseval_is_exact_for_quadratics_in_hermite_bases(seed in any::<u64>(), dim in 1usize..=3) {
        let model = random_polynomial(dim, 2, seed);
        let (dists, bases) = setup(Input::StdNormal, dim);
        let q = quadrature_sample(&model, &dists, NODES).unwrap();
        let mut sum = 0.0;
        for i in 0..dim {
            // Every ℓ in {0,1,2}^d whose first active coordinate is i.
            let set: Vec<MultiIndex> = (0..3usize.pow(dim as u32))
                .map(|code| MultiIndex((0..dim).map(|k| code / 3usize.pow(k as u32) % 3).collect()))
                .filter(|l| l.support().first() == Some(&i))
                .collect();
            let c = gc_coefficients(&q, &bases, &set, false, i).unwrap();
            sum += c.values().map(|v| v * v).sum::<f64>();
        }
        let var = q.output_variance();
        prop_assert!((sum - var).abs() <= 1e-10 * (1.0 + var), "{sum} vs {var}");
    }

    #[test]
    fn enlarging_the_index_set_never_decreases_the_bound(
        seed in any::<u64>(), dim in 2usize..=3, mask in 1u32..64
    ) {
        let model = random_polynomial(dim, 4, seed);
        let (dists, bases) = setup(Input::UniformCentered, dim);
        let q = center(&quadrature_sample(&model, &dists, NODES).unwrap());
        let all: Vec<MultiIndex> = (0..3usize.pow(dim as u32))
            .map(|code| MultiIndex((0..dim).map(|k| code / 3usize.pow(k as u32) % 3).collect()))
            .filter(|l| l.0[0] > 0)
            .collect();
        let small: Vec<MultiIndex> = all.iter().enumerate()
            .filter(|(j, _)| mask >> (j % 6) & 1 == 1).map(|(_, l)| l.clone()).collect();
        let c_small = gc_coefficients(&q, &bases, &small, false, 0).unwrap();
        let c_all = gc_coefficients(&q, &bases, &all, false, 0).unwrap();
        let lo = gc_lower_bound(&c_small, 0, BoundKind::Pdo).unwrap().value;
        let hi = gc_lower_bound(&c_all, 0, BoundKind::Pdo).unwrap().value;
        prop_assert!(lo <= hi);
    }

    #[test]
    fn eigenfunction_signs_do_not_matter(
        seed in any::<u64>(), dim in 1usize..=3, input in input_strategy(), flips in 0u8..8
    ) {
        let model = random_polynomial(dim, 3, seed);
        let (dists, bases) = setup(input, dim);
        let mut flipped = bases.clone();
        for (k, b) in flipped.iter_mut().enumerate() {
            if flips >> k & 1 == 1 {
                b.flip_sign(1);
                b.flip_sign(2);
            }
        }
        let q = quadrature_sample(&model, &dists, 12).unwrap();
        for i in 0..dim {
            for k in 1..=2 {
                let a = pdo_der_lower_bound(&q, &bases, i, k).unwrap().value;
                let b = pdo_der_lower_bound(&q, &flipped, i, k).unwrap().value;
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a));
            }
        }
    }

    #[test]
    fn screening_returns_exact_zeros(seed in any::<u64>(), dim in 2usize..=3, i in 0usize..2) {
        let model = without_input(&random_polynomial(dim, 4, seed), i);
        for input in [Input::StdNormal, Input::TruncNormal, Input::UniformCentered] {
            let (dists, bases) = setup(input, dim);
            let samples = [
                quadrature_sample(&model, &dists, 10).unwrap(),
                monte_carlo_sample(&model, &dists, 500, seed).unwrap(),
            ];
            for s in &samples {
                prop_assert_eq!(pdo_der_lower_bound(s, &bases, i, 1).unwrap().value, 0.0);
                prop_assert_eq!(dgsm(s, i).unwrap(), 0.0);
                if input == Input::StdNormal {
                    prop_assert_eq!(fisher_lower_bound(s, &dists, i).unwrap().value, 0.0);
                }
            }
        }
    }
}

#[test]
fn function_and_derivative_bootstrap_intervals_overlap() {
    let dists = vec![Input::UniformCentered.dist(); 2];
    let bases = vec![Input::UniformCentered.basis(); 2];
    let s = monte_carlo_sample(&LinearInteraction::new(1.0), &dists, 10_000, 21).unwrap();
    let f = bootstrap_ci(
        |t| Ok(pdo_lower_bound(&center(t), &bases, 0, 1)?.value),
        &s,
        200,
        0.9,
        1,
    )
    .unwrap();
    let g = bootstrap_ci(
        |t| Ok(pdo_der_lower_bound(t, &bases, 0, 1)?.value),
        &s,
        200,
        0.9,
        2,
    )
    .unwrap();
    assert!(f.lo <= g.hi && g.lo <= f.hi, "{f:?} vs {g:?}");
}

#[test]
fn screened_input_of_a_named_model() {
    let m = LinearInteraction::new(0.0);
    let dists = vec![Input::StdNormal.dist(); 2];
    let q = quadrature_sample(&m, &dists, 10).unwrap();
    assert_eq!(dgsm(&q, 1).unwrap(), 0.0);
    assert_eq!(fisher_lower_bound(&q, &dists, 1).unwrap().value, 0.0);
    assert_eq!(m.gradient(&[0.3, 0.2]).unwrap()[1], 0.0);
}
