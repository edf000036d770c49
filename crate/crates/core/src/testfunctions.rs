//! Benchmark models with exact gradients.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::f64::consts::PI;

use crate::distributions::Distribution1D;
use crate::error::{Error, Result};

/// A deterministic model `h: R^d -> R`.
pub trait ModelFunction: Send + Sync {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    fn evaluate(&self, x: &[f64]) -> f64;

    /// Exact gradient, if the model provides one.
    fn gradient(&self, _x: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// `h` with coordinate `i` replaced by `value`.
    fn face_evaluate(&self, i: usize, value: f64, x: &[f64]) -> f64 {
        let mut y = x.to_vec();
        y[i] = value;
        self.evaluate(&y)
    }

    /// Domain check for a design point.
    fn check_point(&self, _x: &[f64]) -> Result<()> {
        Ok(())
    }

    /// Parameter block, as accepted by [`build_model`].
    fn params(&self) -> Value;

    /// Abscissae where `h` is not smooth in coordinate `i`; quadratures split
    /// there.
    fn kinks(&self, _i: usize) -> Vec<f64> {
        Vec::new()
    }
}

/// `g(x_1, x_2) = x_1 + a x_1 x_2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearInteraction {
    pub a: f64,
}

impl LinearInteraction {
    pub fn new(a: f64) -> Self {
        Self { a }
    }
}

impl ModelFunction for LinearInteraction {
    fn name(&self) -> &str {
        "linear_interaction"
    }

    fn dim(&self) -> usize {
        2
    }

    fn evaluate(&self, x: &[f64]) -> f64 {
        x[0] + self.a * x[0] * x[1]
    }

    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        Some(vec![1.0 + self.a * x[1], self.a * x[0]])
    }

    fn params(&self) -> Value {
        json!({ "a": self.a })
    }
}

/// `∏ (1 + (4|x_i| - 1) / (1 + a_i))` on `[-1/2, 1/2]^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GSobol {
    pub a: Vec<f64>,
}

impl GSobol {
    pub fn new(a: Vec<f64>) -> Result<Self> {
        if a.is_empty() || a.iter().any(|&v| !(v > -1.0)) {
            return Err(Error::InvalidParameter("g-Sobol needs a_i > -1".into()));
        }
        Ok(Self { a })
    }

    fn factor(&self, i: usize, t: f64) -> f64 {
        1.0 + (4.0 * t.abs() - 1.0) / (1.0 + self.a[i])
    }
}

fn sign(t: f64) -> f64 {
    if t > 0.0 {
        1.0
    } else if t < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl ModelFunction for GSobol {
    fn name(&self) -> &str {
        "g_sobol"
    }

    fn dim(&self) -> usize {
        self.a.len()
    }

    fn evaluate(&self, x: &[f64]) -> f64 {
        (0..self.dim()).map(|i| self.factor(i, x[i])).product()
    }

    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        let f: Vec<f64> = (0..self.dim()).map(|i| self.factor(i, x[i])).collect();
        Some(
            (0..self.dim())
                .map(|i| {
                    let others: f64 = (0..self.dim()).filter(|&j| j != i).map(|j| f[j]).product();
                    4.0 * sign(x[i]) / (1.0 + self.a[i]) * others
                })
                .collect(),
        )
    }

    fn params(&self) -> Value {
        json!({ "a": self.a })
    }

    fn kinks(&self, _i: usize) -> Vec<f64> {
        vec![0.0]
    }
}

/// River flood cost model with inputs `(Q, K_s, Z_v, Z_m, H_d, C_b, L, B)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Flood;

pub const FLOOD_INPUTS: [&str; 8] = ["Q", "Ks", "Zv", "Zm", "Hd", "Cb", "L", "B"];

impl Flood {
    pub fn new() -> Self {
        Flood
    }

    /// Overflow height `S`; positive means the dyke is overtopped.
    pub fn overflow(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        Ok(Self::overflow_unchecked(x))
    }

    fn overflow_unchecked(x: &[f64]) -> f64 {
        let [q, ks, zv, zm, hd, cb, l, b] = [x[0], x[1], x[2], x[3], x[4], x[5], x[6], x[7]];
        Self::height(q, ks, zv, zm, l, b) + zv - hd - cb
    }

    fn height(q: f64, ks: f64, zv: f64, zm: f64, l: f64, b: f64) -> f64 {
        (q / (b * ks * ((zm - zv) / l).sqrt())).powf(0.6)
    }

    /// Default input laws. `K_s` is a half-truncated normal; callers sampling
    /// or solving spectra should pass each law through `bounded()`.
    pub fn default_inputs() -> Vec<Distribution1D> {
        let tri = |a, m, b| Distribution1D::triangular(a, m, b).expect("valid triangular");
        vec![
            Distribution1D::gumbel(1013.0, 558.0)
                .and_then(|d| d.truncate(500.0, 3000.0))
                .expect("valid Q law"),
            Distribution1D::normal(30.0, 8.0)
                .and_then(|d| d.truncate(15.0, f64::INFINITY))
                .expect("valid Ks law"),
            tri(49.0, 50.0, 51.0),
            tri(54.0, 55.0, 56.0),
            Distribution1D::uniform(7.0, 9.0).expect("valid Hd law"),
            tri(55.0, 55.5, 56.0),
            tri(4990.0, 5000.0, 5010.0),
            tri(295.0, 300.0, 305.0),
        ]
    }
}

impl ModelFunction for Flood {
    fn name(&self) -> &str {
        "flood"
    }

    fn dim(&self) -> usize {
        8
    }

    fn evaluate(&self, x: &[f64]) -> f64 {
        let s = Self::overflow_unchecked(x);
        let hd = x[4];
        let cost = if s > 0.0 {
            1.0
        } else {
            0.2 + 0.8 * (1.0 - (-1000.0 / s.powi(4)).exp())
        };
        cost + if hd > 8.0 { hd } else { 8.0 } / 20.0
    }

    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        let [q, ks, zv, zm, hd, _cb, l, b] = [x[0], x[1], x[2], x[3], x[4], x[5], x[6], x[7]];
        let t = Self::height(q, ks, zv, zm, l, b);
        let s = t + zv - hd - x[5];
        let dy_ds = if s < 0.0 {
            -0.8 * (-1000.0 / s.powi(4)).exp() * 4000.0 / s.powi(5)
        } else {
            0.0
        };
        let dz = zm - zv;
        let ds = [
            0.6 * t / q,
            -0.6 * t / ks,
            0.3 * t / dz + 1.0,
            -0.3 * t / dz,
            -1.0,
            -1.0,
            0.3 * t / l,
            -0.6 * t / b,
        ];
        let mut g: Vec<f64> = ds.iter().map(|d| dy_ds * d).collect();
        if hd > 8.0 {
            g[4] += 1.0 / 20.0;
        }
        Some(g)
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != 8 {
            return Err(Error::DimensionMismatch {
                expected: 8,
                got: x.len(),
            });
        }
        let [ks, zv, zm, l, b] = [x[1], x[2], x[3], x[6], x[7]];
        if !(ks > 0.0 && b > 0.0 && l > 0.0 && zm > zv) {
            return Err(Error::InvalidPhysicalParams(format!(
                "need Ks > 0, B > 0, L > 0, Zm > Zv; got Ks={ks}, B={b}, L={l}, Zm={zm}, Zv={zv}"
            )));
        }
        Ok(())
    }

    fn params(&self) -> Value {
        json!({})
    }

    fn kinks(&self, i: usize) -> Vec<f64> {
        if i == 4 {
            vec![8.0]
        } else {
            Vec::new()
        }
    }
}

/// Sparse polynomial `Σ c_k ∏ x_j^{p_kj}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    pub dim: usize,
    pub terms: Vec<Monomial>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coef: f64,
    pub powers: Vec<u32>,
}

impl Polynomial {
    pub fn new(dim: usize, terms: Vec<Monomial>) -> Result<Self> {
        if dim == 0 || terms.iter().any(|t| t.powers.len() != dim) {
            return Err(Error::InvalidParameter(
                "every monomial needs one exponent per input".into(),
            ));
        }
        Ok(Self { dim, terms })
    }

    /// Total degree.
    pub fn degree(&self) -> u32 {
        self.terms
            .iter()
            .map(|t| t.powers.iter().sum())
            .max()
            .unwrap_or(0)
    }
}

impl ModelFunction for Polynomial {
    fn name(&self) -> &str {
        "polynomial"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn evaluate(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                t.coef
                    * t.powers
                        .iter()
                        .zip(x)
                        .map(|(&p, &v)| v.powi(p as i32))
                        .product::<f64>()
            })
            .sum()
    }

    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        let mut g = vec![0.0; self.dim];
        for t in &self.terms {
            for (i, gi) in g.iter_mut().enumerate() {
                let p = t.powers[i];
                if p == 0 {
                    continue;
                }
                let mut v = t.coef * p as f64 * x[i].powi(p as i32 - 1);
                for (j, (&q, &xj)) in t.powers.iter().zip(x).enumerate() {
                    if j != i {
                        v *= xj.powi(q as i32);
                    }
                }
                *gi += v;
            }
        }
        Some(g)
    }

    fn params(&self) -> Value {
        serde_json::to_value(self).expect("polynomial serializes")
    }
}

/// Build a model from its name and parameter block.
pub fn build_model(name: &str, params: &Value) -> Result<Box<dyn ModelFunction>> {
    let field = |k: &str| params.get(k).cloned().unwrap_or(Value::Null);
    let bad = |e: serde_json::Error| Error::InvalidParameter(format!("{name}: {e}"));
    match name {
        "linear_interaction" => {
            let a = match field("a") {
                Value::Null => 1.0,
                v => serde_json::from_value(v).map_err(bad)?,
            };
            Ok(Box::new(LinearInteraction::new(a)))
        }
        "g_sobol" => {
            let a: Vec<f64> = serde_json::from_value(field("a")).map_err(bad)?;
            Ok(Box::new(GSobol::new(a)?))
        }
        "flood" => Ok(Box::new(Flood)),
        "polynomial" => {
            let p: Polynomial = serde_json::from_value(params.clone()).map_err(bad)?;
            Ok(Box::new(Polynomial::new(p.dim, p.terms)?))
        }
        other => Err(Error::InvalidParameter(format!("unknown model `{other}`"))),
    }
}

/// Closed-form reference values for one input of a benchmark model.
///
/// `lb_first` and `lb_total` are the values of the first-eigenvalue bounds
/// under exact integration: the single-term bound on `D_i` and the bound with
/// second-order tensor terms on `D_i^tot`. For the g-Sobol function these use
/// the second eigenfunction, the first one being orthogonal to every factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticIndices {
    pub d_first: f64,
    pub d_total: f64,
    pub variance: f64,
    pub lb_first: f64,
    pub lb_total: f64,
}

/// Reference values for `linear_interaction` (inputs uniform on
/// `[-1/2, 1/2]^2`) and `g_sobol`.
pub fn analytic_indices(name: &str, params: &Value, i: usize) -> Result<AnalyticIndices> {
    match name {
        "linear_interaction" => {
            let a = params.get("a").and_then(Value::as_f64).unwrap_or(1.0);
            let inter = a * a / 144.0;
            let lb_inter = 64.0 * a * a / PI.powi(8);
            let main = 1.0 / 12.0;
            let lb_main = 8.0 / PI.powi(4);
            let variance = main + inter;
            match i {
                0 => Ok(AnalyticIndices {
                    d_first: main,
                    d_total: main + inter,
                    variance,
                    lb_first: lb_main,
                    lb_total: lb_main + lb_inter,
                }),
                1 => Ok(AnalyticIndices {
                    d_first: 0.0,
                    d_total: inter,
                    variance,
                    lb_first: 0.0,
                    lb_total: lb_inter,
                }),
                _ => Err(Error::OutOfRange(format!("input {i} of a 2-input model"))),
            }
        }
        "g_sobol" => {
            let a: Vec<f64> =
                serde_json::from_value(params.get("a").cloned().unwrap_or(Value::Null))
                    .map_err(|e| Error::InvalidParameter(format!("g_sobol: {e}")))?;
            let g = GSobol::new(a)?;
            if i >= g.a.len() {
                return Err(Error::OutOfRange(format!(
                    "input {i} of a {}-input model",
                    g.a.len()
                )));
            }
            let d: Vec<f64> =
                g.a.iter()
                    .map(|a| 1.0 / (3.0 * (1.0 + a).powi(2)))
                    .collect();
            let lb: Vec<f64> =
                g.a.iter()
                    .map(|a| 32.0 / PI.powi(4) / (1.0 + a).powi(2))
                    .collect();
            let others = |v: &[f64]| -> f64 {
                v.iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, x)| x)
                    .sum()
            };
            let prod_others: f64 = (0..d.len())
                .filter(|&j| j != i)
                .map(|j| 1.0 + d[j])
                .product();
            Ok(AnalyticIndices {
                d_first: d[i],
                d_total: d[i] * prod_others,
                variance: d.iter().map(|x| 1.0 + x).product::<f64>() - 1.0,
                lb_first: lb[i],
                lb_total: lb[i] + lb[i] * others(&lb),
            })
        }
        other => Err(Error::NoAnalyticForm(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn central_difference(m: &dyn ModelFunction, x: &[f64], i: usize) -> f64 {
        let h = 1e-5 * (1.0 + x[i].abs());
        let mut p = x.to_vec();
        let mut q = x.to_vec();
        p[i] += h;
        q[i] -= h;
        (m.evaluate(&p) - m.evaluate(&q)) / (2.0 * h)
    }

    fn check_gradient(m: &dyn ModelFunction, draw: impl Fn(&mut ChaCha8Rng) -> Option<Vec<f64>>) {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut checked = 0;
        while checked < 100 {
            let Some(x) = draw(&mut rng) else { continue };
            let g = m.gradient(&x).unwrap();
            for (i, gi) in g.iter().enumerate() {
                let fd = central_difference(m, &x, i);
                let scale = gi.abs().max(fd.abs()).max(1e-6);
                assert!(
                    (gi - fd).abs() <= 1e-4 * scale,
                    "{} at {x:?}, i={i}: {gi} vs {fd}",
                    m.name()
                );
            }
            checked += 1;
        }
    }

    #[test]
    fn linear_interaction_examples() {
        let m = LinearInteraction::new(1.0);
        assert_eq!(m.evaluate(&[0.5, 0.5]), 0.75);
        assert_eq!(
            LinearInteraction::new(2.0).gradient(&[0.0, 0.5]).unwrap()[0],
            2.0
        );
        check_gradient(&m, |r| {
            Some(vec![r.random_range(-0.5..0.5), r.random_range(-0.5..0.5)])
        });
    }

    #[test]
    fn g_sobol_examples_and_gradient() {
        let a = vec![0.0, 1.0, 4.5, 9.0];
        let m = GSobol::new(a.clone()).unwrap();
        let expected: f64 = a.iter().map(|v| 1.0 - 1.0 / (1.0 + v)).product();
        assert_eq!(m.evaluate(&[0.0; 4]), expected);
        assert_eq!(m.gradient(&[0.0, 0.1, 0.1, 0.1]).unwrap()[0], 0.0);
        check_gradient(&m, |r| {
            let x: Vec<f64> = (0..4).map(|_| r.random_range(-0.5..0.5)).collect();
            x.iter().all(|v: &f64| v.abs() >= 1e-3).then_some(x)
        });
        assert!(GSobol::new(vec![0.0, -1.0]).is_err());
    }

    #[test]
    fn g_sobol_factors_are_centered() {
        let m = GSobol::new(vec![0.0, 2.0]).unwrap();
        let u = Distribution1D::uniform(-0.5, 0.5).unwrap();
        for i in 0..2 {
            let xs = u.sample(100_000, 40 + i as u64);
            let f: Vec<f64> = xs.iter().map(|&t| m.factor(i, t) - 1.0).collect();
            let n = f.len() as f64;
            let mean = f.iter().sum::<f64>() / n;
            let sd = (f.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            assert!(mean.abs() < 4.0 * sd / n.sqrt(), "mean {mean}");
        }
    }

    fn flood_point(q: f64, hd: f64) -> Vec<f64> {
        vec![q, 30.0, 50.0, 55.0, hd, 55.5, 5000.0, 300.0]
    }

    #[test]
    fn flood_worked_example() {
        let x = flood_point(1000.0, 3.0);
        let s = Flood.overflow(&x).unwrap();
        assert_relative_eq!(s, -6.37453237435728, max_relative = 1e-13);
        assert_relative_eq!(Flood.evaluate(&x), 0.9634151646973329, max_relative = 1e-13);
    }

    #[test]
    fn flood_limits_and_branches() {
        // Deep negative S: cost tends to 0.2, plus the 8/20 height floor.
        let deep = vec![500.0, 30.0, 50.0, 55.0, 3.0, 500.0, 5000.0, 300.0];
        assert_relative_eq!(Flood.evaluate(&deep), 0.2 + 0.4, max_relative = 1e-6);
        // Overtopped: cost 1.
        let over = vec![3000.0, 15.0, 51.0, 54.0, 7.0, 45.0, 5000.0, 300.0];
        assert!(Flood.overflow(&over).unwrap() > 0.0);
        assert_eq!(Flood.evaluate(&over), 1.0 + 8.0 / 20.0);
        let high = vec![3000.0, 15.0, 51.0, 54.0, 9.0, 45.0, 5000.0, 300.0];
        assert_eq!(Flood.evaluate(&high), 1.0 + 9.0 / 20.0);
        assert_eq!(Flood.gradient(&high).unwrap()[4], 1.0 / 20.0);
        // Hd = 8 uses the lower branch.
        let edge = vec![3000.0, 15.0, 51.0, 54.0, 8.0, 45.0, 5000.0, 300.0];
        assert_eq!(Flood.gradient(&edge).unwrap()[4], 0.0);
        assert!(matches!(
            Flood.overflow(&[1000.0, 30.0, 55.0, 50.0, 3.0, 55.5, 5000.0, 300.0]),
            Err(Error::InvalidPhysicalParams(_))
        ));
        assert!(matches!(
            Flood.check_point(&[1000.0, -1.0, 50.0, 55.0, 3.0, 55.5, 5000.0, 300.0]),
            Err(Error::InvalidPhysicalParams(_))
        ));
    }

    #[test]
    fn flood_gradient_matches_finite_differences() {
        let laws: Vec<Distribution1D> = Flood::default_inputs()
            .iter()
            .map(|d| d.bounded().unwrap())
            .collect();
        check_gradient(&Flood, |r| {
            let x: Vec<f64> = laws
                .iter()
                .map(|d| d.quantile(r.random_range(0.001..0.999)))
                .collect();
            let s = Flood::overflow_unchecked(&x);
            (s.abs() >= 1e-3 && (x[4] - 8.0).abs() >= 1e-3).then_some(x)
        });
    }

    #[test]
    fn flood_output_is_bounded_over_the_box() {
        let laws: Vec<Distribution1D> = Flood::default_inputs()
            .iter()
            .map(|d| d.bounded().unwrap())
            .collect();
        let cols: Vec<Vec<f64>> = laws
            .iter()
            .enumerate()
            .map(|(j, d)| d.sample(20_000, j as u64))
            .collect();
        let hd_max = laws[4].support().1;
        for r in 0..20_000 {
            let x: Vec<f64> = cols.iter().map(|c| c[r]).collect();
            let y = Flood.evaluate(&x);
            assert!((0.2..=1.0 + hd_max / 20.0).contains(&y), "{y}");
        }
    }

    #[test]
    fn polynomial_gradient() {
        let p = Polynomial::new(
            3,
            vec![
                Monomial {
                    coef: 1.5,
                    powers: vec![2, 1, 0],
                },
                Monomial {
                    coef: -0.7,
                    powers: vec![0, 0, 4],
                },
                Monomial {
                    coef: 2.0,
                    powers: vec![1, 1, 1],
                },
                Monomial {
                    coef: 0.3,
                    powers: vec![0, 0, 0],
                },
            ],
        )
        .unwrap();
        assert_eq!(p.degree(), 4);
        assert_relative_eq!(p.evaluate(&[1.0, 2.0, -1.0]), 3.0 - 0.7 - 4.0 + 0.3);
        check_gradient(&p, |r| {
            Some((0..3).map(|_| r.random_range(-2.0..2.0)).collect())
        });
    }

    #[test]
    fn build_model_by_name() {
        let m = build_model("g_sobol", &json!({ "a": [0.0, 1.0] })).unwrap();
        assert_eq!(m.dim(), 2);
        assert_eq!(build_model("flood", &json!({})).unwrap().dim(), 8);
        assert_eq!(
            build_model("linear_interaction", &json!({ "a": 2.0 }))
                .unwrap()
                .params()["a"],
            2.0
        );
        let poly = build_model(
            "polynomial",
            &json!({ "dim": 2, "terms": [{ "coef": 1.0, "powers": [1, 1] }] }),
        )
        .unwrap();
        assert_eq!(poly.evaluate(&[2.0, 3.0]), 6.0);
        assert!(build_model("melody", &json!({})).is_err());
    }

    #[test]
    fn analytic_reference_values() {
        let li = analytic_indices("linear_interaction", &json!({ "a": 1.0 }), 0).unwrap();
        assert_relative_eq!(li.d_first, 1.0 / 12.0);
        assert_relative_eq!(li.d_total, 1.0 / 12.0 + 1.0 / 144.0);
        assert_relative_eq!(li.lb_first, 8.0 / PI.powi(4));
        assert_relative_eq!(li.lb_total, 8.0 / PI.powi(4) + 64.0 / PI.powi(8));

        let g = analytic_indices("g_sobol", &json!({ "a": [0.0, 0.0] }), 0).unwrap();
        assert_relative_eq!(g.d_total, (1.0 / 3.0) * (1.0 + 1.0 / 3.0));

        let far = analytic_indices("g_sobol", &json!({ "a": [1e12, 0.0] }), 0).unwrap();
        assert!(far.d_first < 1e-20 && far.d_total < 1e-20 && far.lb_total < 1e-20);

        assert!(matches!(
            analytic_indices("flood", &json!({}), 0),
            Err(Error::NoAnalyticForm(_))
        ));
    }
}
