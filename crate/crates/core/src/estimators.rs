//! Sensitivity estimators over evaluation samples.
//!
//! Every inner product is an expectation under the product input law,
//! estimated as a weighted mean over the rows of an [`EvaluationSample`]:
//! equal weights for Monte Carlo samples, tensor Gauss weights for the
//! quadrature designs built by [`quadrature_sample`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::distributions::{Distribution1D, Family};
use crate::error::{Error, Result};
use crate::quadrature::GaussRule;
use crate::spectral::SpectralBasis;
use crate::testfunctions::ModelFunction;

/// Model evaluations on a design, with optional gradients and weights.
///
/// Storage is row-major: `design[j * dim + k]` is input `k` of row `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationSample {
    dim: usize,
    design: Vec<f64>,
    outputs: Vec<f64>,
    gradients: Option<Vec<f64>>,
    weights: Option<Vec<f64>>,
    centered: bool,
    seed: Option<u64>,
}

impl EvaluationSample {
    pub fn new(
        dim: usize,
        design: Vec<f64>,
        outputs: Vec<f64>,
        gradients: Option<Vec<f64>>,
    ) -> Result<Self> {
        let n = outputs.len();
        if dim == 0 || n == 0 {
            return Err(Error::MalformedSample("empty sample".into()));
        }
        if design.len() != n * dim {
            return Err(Error::MalformedSample(format!(
                "design has {} values, expected {n} x {dim}",
                design.len()
            )));
        }
        if let Some(g) = &gradients {
            if g.len() != n * dim {
                return Err(Error::MalformedSample(format!(
                    "gradients have {} values, expected {n} x {dim}",
                    g.len()
                )));
            }
        }
        Ok(Self {
            dim,
            design,
            outputs,
            gradients,
            weights: None,
            centered: false,
            seed: None,
        })
    }

    /// Attach quadrature weights; they are normalized to sum to one.
    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if weights.len() != self.len() || weights.iter().any(|w| !(*w >= 0.0)) || !(total > 0.0) {
            return Err(Error::MalformedSample(
                "weights must be non-negative, one per row".into(),
            ));
        }
        self.weights = Some(weights.iter().map(|w| w / total).collect());
        Ok(self)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.design[j * self.dim..(j + 1) * self.dim]
    }

    pub fn x(&self, j: usize, k: usize) -> f64 {
        self.design[j * self.dim + k]
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        (0..self.len()).map(|j| self.x(j, k)).collect()
    }

    pub fn outputs(&self) -> &[f64] {
        &self.outputs
    }

    pub fn has_gradients(&self) -> bool {
        self.gradients.is_some()
    }

    pub fn gradient_row(&self, j: usize) -> Option<&[f64]> {
        self.gradients
            .as_ref()
            .map(|g| &g[j * self.dim..(j + 1) * self.dim])
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    /// Whether this is a weighted (quadrature) design rather than an
    /// equally weighted Monte Carlo sample.
    pub fn is_weighted(&self) -> bool {
        self.weights.is_some()
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn mean_output(&self) -> f64 {
        weighted_means(self, 1, |j, o| o[0] = self.outputs[j])[0]
    }

    /// Output variance: unbiased sample variance for Monte Carlo samples,
    /// the weighted variance for quadrature designs.
    pub fn output_variance(&self) -> f64 {
        let m = self.mean_output();
        let v = weighted_means(self, 1, |j, o| o[0] = (self.outputs[j] - m).powi(2))[0];
        match self.weights {
            Some(_) => v,
            None if self.len() > 1 => v * self.len() as f64 / (self.len() - 1) as f64,
            None => 0.0,
        }
    }

    /// Rows `indices`, in order, as an unweighted sample.
    pub fn resample(&self, indices: &[usize]) -> Self {
        let d = self.dim;
        let mut design = Vec::with_capacity(indices.len() * d);
        let mut outputs = Vec::with_capacity(indices.len());
        let mut gradients = self
            .gradients
            .as_ref()
            .map(|_| Vec::with_capacity(indices.len() * d));
        for &j in indices {
            design.extend_from_slice(self.row(j));
            outputs.push(self.outputs[j]);
            if let (Some(g), Some(src)) = (gradients.as_mut(), self.gradient_row(j)) {
                g.extend_from_slice(src);
            }
        }
        Self {
            dim: d,
            design,
            outputs,
            gradients,
            weights: None,
            centered: false,
            seed: self.seed,
        }
    }

    /// Read a CSV with header `x1..xd,y[,dy1..dyd]`.
    pub fn read_csv<P: AsRef<Path>>(path: P) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let header: Vec<String> = rdr
            .headers()?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        let dim = header.iter().take_while(|h| h.starts_with('x')).count();
        let expect = |prefix: &str, k: usize| format!("{prefix}{}", k + 1);
        let ok_x = (0..dim).all(|k| header[k] == expect("x", k));
        let has_y = header.get(dim).map(String::as_str) == Some("y");
        let rest = header.len() - dim - usize::from(has_y);
        let with_grad =
            has_y && rest == dim && (0..dim).all(|k| header[dim + 1 + k] == expect("dy", k));
        if dim == 0 || !ok_x || !has_y || !(rest == 0 || with_grad) {
            return Err(Error::MalformedSample(format!(
                "header must be x1..xd,y[,dy1..dyd]; got {}",
                header.join(",")
            )));
        }
        let mut design = Vec::new();
        let mut outputs = Vec::new();
        let mut gradients = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != header.len() {
                return Err(Error::MalformedSample(format!(
                    "row {} has {} fields",
                    line + 2,
                    rec.len()
                )));
            }
            let vals: Vec<f64> = rec
                .iter()
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::MalformedSample(format!("row {}: {e}", line + 2)))?;
            design.extend_from_slice(&vals[..dim]);
            outputs.push(vals[dim]);
            if with_grad {
                gradients.extend_from_slice(&vals[dim + 1..]);
            }
        }
        Self::new(dim, design, outputs, with_grad.then_some(gradients))
    }

    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<String> = (1..=self.dim).map(|k| format!("x{k}")).collect();
        header.push("y".into());
        if self.has_gradients() {
            header.extend((1..=self.dim).map(|k| format!("dy{k}")));
        }
        w.write_record(&header)?;
        for j in 0..self.len() {
            let mut rec: Vec<String> = self.row(j).iter().map(|v| v.to_string()).collect();
            rec.push(self.outputs[j].to_string());
            if let Some(g) = self.gradient_row(j) {
                rec.extend(g.iter().map(|v| v.to_string()));
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

const CHUNK: usize = 4096;

/// Weighted means of `width` per-row quantities. Rows are reduced in fixed
/// chunks so the result does not depend on the thread schedule.
fn weighted_means<F>(s: &EvaluationSample, width: usize, row: F) -> Vec<f64>
where
    F: Fn(usize, &mut [f64]) + Sync,
{
    let n = s.len();
    let partials: Vec<Vec<f64>> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![0.0; width];
            let mut buf = vec![0.0; width];
            for j in c * CHUNK..((c + 1) * CHUNK).min(n) {
                row(j, &mut buf);
                let w = s.weights.as_ref().map_or(1.0, |w| w[j]);
                acc.iter_mut().zip(&buf).for_each(|(a, b)| *a += w * b);
            }
            acc
        })
        .collect();
    let mut out = vec![0.0; width];
    for p in partials {
        out.iter_mut().zip(p).for_each(|(o, v)| *o += v);
    }
    if s.weights.is_none() {
        out.iter_mut().for_each(|o| *o /= n as f64);
    }
    out
}

/// Subtract the (weighted) output mean. Gradients are untouched.
pub fn center(s: &EvaluationSample) -> EvaluationSample {
    if s.centered {
        return s.clone();
    }
    let m = s.mean_output();
    let mut out = s.clone();
    out.outputs.iter_mut().for_each(|y| *y -= m);
    out.centered = true;
    out
}

/// Multi-index `ℓ` of a tensor basis function `∏ e_{j, ℓ_j}(x_j)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MultiIndex(pub Vec<usize>);

impl MultiIndex {
    /// `k` in position `i`, zero elsewhere.
    pub fn unit(dim: usize, i: usize, k: usize) -> Self {
        let mut l = vec![0; dim];
        l[i] = k;
        MultiIndex(l)
    }

    /// `k` in positions `i` and `j`, zero elsewhere.
    pub fn pair(dim: usize, i: usize, j: usize, k: usize) -> Self {
        let mut l = vec![0; dim];
        l[i] = k;
        l[j] = k;
        MultiIndex(l)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Positions with a non-zero order.
    pub fn support(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &l)| l > 0)
            .map(|(i, _)| i)
            .collect()
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|l| l.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

impl FromStr for MultiIndex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.split(',')
            .map(|p| p.trim().parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(MultiIndex)
            .map_err(|e| Error::InvalidParameter(format!("multi-index `{s}`: {e}")))
    }
}

impl Serialize for MultiIndex {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ser.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MultiIndex {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Pdo,
    PdoDer,
    Fisher,
    Monomial,
    MonomialLiterature,
    DgsmUpper,
    PickFreezeTotal,
    OracleExact,
}

impl BoundKind {
    /// Whether the value is the sum of its terms.
    pub fn is_additive(self) -> bool {
        !matches!(
            self,
            BoundKind::DgsmUpper | BoundKind::PickFreezeTotal | BoundKind::OracleExact
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Target {
    #[serde(rename = "D_i")]
    First,
    #[serde(rename = "D_i_tot")]
    Total,
    #[serde(rename = "S_i")]
    FirstIndex,
    #[serde(rename = "S_i_tot")]
    TotalIndex,
}

impl Target {
    fn normalized(self) -> Self {
        match self {
            Target::First | Target::FirstIndex => Target::FirstIndex,
            Target::Total | Target::TotalIndex => Target::TotalIndex,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub lo: f64,
    pub hi: f64,
    pub level: f64,
}

/// One bound (or reference value) for one input variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundEstimate {
    pub kind: BoundKind,
    pub target: Target,
    pub variable: usize,
    pub value: f64,
    pub terms: BTreeMap<MultiIndex, f64>,
    pub ci: Option<ConfidenceInterval>,
    pub n_used: usize,
    pub seed: Option<u64>,
}

impl BoundEstimate {
    fn scalar(
        kind: BoundKind,
        target: Target,
        variable: usize,
        value: f64,
        s: Option<&EvaluationSample>,
    ) -> Self {
        BoundEstimate {
            kind,
            target,
            variable,
            value,
            terms: BTreeMap::new(),
            ci: None,
            n_used: s.map_or(0, EvaluationSample::len),
            seed: s.and_then(EvaluationSample::seed),
        }
    }

    fn from_terms(
        kind: BoundKind,
        target: Target,
        variable: usize,
        terms: BTreeMap<MultiIndex, f64>,
        s: &EvaluationSample,
    ) -> Self {
        BoundEstimate {
            kind,
            target,
            variable,
            value: terms.values().sum(),
            terms,
            ci: None,
            n_used: s.len(),
            seed: s.seed(),
        }
    }

    /// Attach an interval, widened if needed so that it contains the value.
    pub fn with_ci(mut self, ci: ConfidenceInterval) -> Self {
        self.ci = Some(ConfidenceInterval {
            lo: ci.lo.min(self.value),
            hi: ci.hi.max(self.value),
            level: ci.level,
        });
        self
    }

    /// The same bound divided by the output variance.
    pub fn normalized(&self, variance: f64) -> Self {
        let mut out = self.clone();
        out.target = self.target.normalized();
        out.value /= variance;
        out.terms.values_mut().for_each(|v| *v /= variance);
        if let Some(ci) = &mut out.ci {
            ci.lo /= variance;
            ci.hi /= variance;
        }
        out
    }
}

fn check_dim(s: &EvaluationSample, d: usize) -> Result<()> {
    if s.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: s.dim(),
            got: d,
        });
    }
    Ok(())
}

/// Values of `e_{k,l}` (or its derivative) on column `k` of the sample.
fn basis_column(
    s: &EvaluationSample,
    basis: &SpectralBasis,
    k: usize,
    l: usize,
    der: bool,
) -> Result<Vec<f64>> {
    (0..s.len())
        .map(|j| basis.eval(l, s.x(j, k), der))
        .collect()
}

/// Generalized-chaos coefficients of the sample outputs.
///
/// Function form: `E[h ∏ e_{j, ℓ_j}(x_j)]`. Derivative form:
/// `E[∂_i h e'_{i, ℓ_i}(x_i) ∏_{j≠i} e_{j, ℓ_j}(x_j)] / λ_{i, ℓ_i}`, equal to the
/// former under exact integration.
pub fn gc_coefficients(
    s: &EvaluationSample,
    bases: &[SpectralBasis],
    set: &[MultiIndex],
    use_derivatives: bool,
    i: usize,
) -> Result<BTreeMap<MultiIndex, f64>> {
    let d = s.dim();
    check_dim(s, bases.len())?;
    if i >= d {
        return Err(Error::OutOfRange(format!(
            "variable {i} of a {d}-input sample"
        )));
    }
    if use_derivatives && !s.has_gradients() {
        return Err(Error::MissingGradients);
    }
    for l in set {
        if l.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: l.dim(),
            });
        }
        if l.0[i] == 0 {
            return Err(Error::InactiveIndex(l.to_string(), i));
        }
    }

    // Distinct basis columns needed by the set.
    let mut keys: Vec<(usize, usize, bool)> = Vec::new();
    for l in set {
        for k in l.support() {
            let key = (k, l.0[k], use_derivatives && k == i);
            if !keys.contains(&key) {
                keys.push(key);
            }
        }
    }
    let columns: Vec<Vec<f64>> = keys
        .iter()
        .map(|&(k, order, der)| basis_column(s, &bases[k], k, order, der))
        .collect::<Result<_>>()?;
    let plan: Vec<(Vec<usize>, f64)> = set
        .iter()
        .map(|l| {
            let cols = l
                .support()
                .iter()
                .map(|&k| {
                    let key = (k, l.0[k], use_derivatives && k == i);
                    keys.iter()
                        .position(|x| *x == key)
                        .expect("collected above")
                })
                .collect();
            let scale = if use_derivatives {
                1.0 / bases[i].eigenvalues()[l.0[i]]
            } else {
                1.0
            };
            (cols, scale)
        })
        .collect();

    let means = weighted_means(s, set.len(), |j, out| {
        let base = if use_derivatives {
            s.gradient_row(j).expect("checked above")[i]
        } else {
            s.outputs[j]
        };
        for (o, (cols, _)) in out.iter_mut().zip(&plan) {
            *o = cols.iter().fold(base, |acc, &c| acc * columns[c][j]);
        }
    });
    Ok(set
        .iter()
        .zip(means)
        .zip(&plan)
        .map(|((l, m), (_, scale))| (l.clone(), m * scale))
        .collect())
}

/// Sum of squared coefficients. All multi-indices must involve `variable`;
/// if they all involve exactly the same inputs the bound targets that
/// group's own variance, otherwise the total variance of `variable`.
pub fn gc_lower_bound(
    coeffs: &BTreeMap<MultiIndex, f64>,
    variable: usize,
    kind: BoundKind,
) -> Result<BoundEstimate> {
    let supports: Vec<Vec<usize>> = coeffs.keys().map(MultiIndex::support).collect();
    if let Some((l, _)) = coeffs
        .iter()
        .zip(&supports)
        .find(|(_, sup)| !sup.contains(&variable))
    {
        return Err(Error::MixedPattern(format!(
            "{} does not involve input {variable}",
            l.0
        )));
    }
    let first_only = !supports.is_empty() && supports.iter().all(|sup| sup == &[variable]);
    let terms: BTreeMap<MultiIndex, f64> = coeffs.iter().map(|(l, c)| (l.clone(), c * c)).collect();
    Ok(BoundEstimate {
        kind,
        target: if first_only {
            Target::First
        } else {
            Target::Total
        },
        variable,
        value: terms.values().sum(),
        terms,
        ci: None,
        n_used: 0,
        seed: None,
    })
}

/// `{k e_i} ∪ {k e_i + k e_j : j ≠ i}`: eigen-index `k` in every direction,
/// first- and second-order tensors only.
pub fn simplest_set(dim: usize, i: usize, k: usize) -> Vec<MultiIndex> {
    std::iter::once(MultiIndex::unit(dim, i, k))
        .chain(
            (0..dim)
                .filter(|&j| j != i)
                .map(|j| MultiIndex::pair(dim, i, j, k)),
        )
        .collect()
}

fn pdo_bound(
    s: &EvaluationSample,
    bases: &[SpectralBasis],
    i: usize,
    k: usize,
    der: bool,
) -> Result<BoundEstimate> {
    let set = simplest_set(s.dim(), i, k);
    let coeffs = gc_coefficients(s, bases, &set, der, i)?;
    let kind = if der {
        BoundKind::PdoDer
    } else {
        BoundKind::Pdo
    };
    let mut b = gc_lower_bound(&coeffs, i, kind)?;
    b.n_used = s.len();
    b.seed = s.seed();
    Ok(b)
}

/// Derivative-free lower bound of `D_i^tot` from eigenfunction `k` of each
/// input basis (`k = 1` for the simplest bound).
pub fn pdo_lower_bound(
    s: &EvaluationSample,
    bases: &[SpectralBasis],
    i: usize,
    k: usize,
) -> Result<BoundEstimate> {
    pdo_bound(s, bases, i, k, false)
}

/// Derivative-based twin of [`pdo_lower_bound`].
pub fn pdo_der_lower_bound(
    s: &EvaluationSample,
    bases: &[SpectralBasis],
    i: usize,
    k: usize,
) -> Result<BoundEstimate> {
    pdo_bound(s, bases, i, k, true)
}

fn score_column(s: &EvaluationSample, dist: &Distribution1D, k: usize) -> Result<Vec<f64>> {
    (0..s.len()).map(|j| dist.score(s.x(j, k))).collect()
}

/// Weight-free lower bound `c_i² / I_i + Σ_j c_ij² / (I_i I_j)` of `D_i^tot`
/// built on the input scores `Z`.
///
/// With gradients and a density vanishing at both ends of input `i`, the
/// coefficients are `c_i = -E[∂_i h]` and `c_ij = -E[∂_i h Z_j]`; otherwise
/// `c_i = E[h Z_i]` and `c_ij = E[h Z_i Z_j]`.
pub fn fisher_lower_bound(
    s: &EvaluationSample,
    dists: &[Distribution1D],
    i: usize,
) -> Result<BoundEstimate> {
    let d = s.dim();
    check_dim(s, dists.len())?;
    for dist in dists {
        dist.check_score_support()?;
    }
    let info: Vec<f64> = dists
        .iter()
        .map(|x| x.fisher_information())
        .collect::<Result<_>>()?;
    let derivative_form = s.has_gradients() && dists[i].vanishes_at_boundary();
    let scores: Vec<Vec<f64>> = (0..d)
        .map(|k| {
            if derivative_form && k == i {
                Ok(Vec::new())
            } else {
                score_column(s, &dists[k], k)
            }
        })
        .collect::<Result<_>>()?;
    let others: Vec<usize> = (0..d).filter(|&j| j != i).collect();

    let means = weighted_means(s, d, |row, out| {
        let base = if derivative_form {
            -s.gradient_row(row).expect("checked above")[i]
        } else {
            s.outputs[row] * scores[i][row]
        };
        out[0] = base;
        for (o, &j) in out[1..].iter_mut().zip(&others) {
            *o = base * scores[j][row];
        }
    });

    let mut terms = BTreeMap::new();
    terms.insert(MultiIndex::unit(d, i, 1), means[0] * means[0] / info[i]);
    for (m, &j) in means[1..].iter().zip(&others) {
        terms.insert(MultiIndex::pair(d, i, j, 1), m * m / (info[i] * info[j]));
    }
    Ok(BoundEstimate::from_terms(
        BoundKind::Fisher,
        Target::Total,
        i,
        terms,
        s,
    ))
}

fn monomial_integral(
    s: &EvaluationSample,
    model: &dyn ModelFunction,
    dists: &[Distribution1D],
    i: usize,
    m: u32,
) -> Result<f64> {
    check_dim(s, dists.len())?;
    let is_unit =
        matches!(dists[i].family(), Family::Uniform { lo, hi } if *lo == 0.0 && *hi == 1.0);
    if !is_unit || dists[i].is_truncated() {
        return Err(Error::NotUniform01(i));
    }
    if m == 0 {
        return Err(Error::InvalidParameter(
            "monomial degree must be >= 1".into(),
        ));
    }
    if !s.has_gradients() {
        return Err(Error::MissingGradients);
    }
    if model.dim() != s.dim() {
        return Err(Error::DimensionMismatch {
            expected: s.dim(),
            got: model.dim(),
        });
    }
    let means = weighted_means(s, 1, |j, out| {
        let x = s.row(j);
        let face = model.face_evaluate(i, 1.0, x);
        let dh = s.gradient_row(j).expect("checked above")[i];
        out[0] = face - s.outputs[j] - dh * x[i].powi(m as i32 + 1);
    });
    Ok(means[0])
}

fn monomial_estimate(
    s: &EvaluationSample,
    i: usize,
    m: u32,
    value: f64,
    kind: BoundKind,
) -> BoundEstimate {
    let mut terms = BTreeMap::new();
    terms.insert(MultiIndex::unit(s.dim(), i, m as usize), value);
    BoundEstimate::from_terms(kind, Target::Total, i, terms, s)
}

/// Projection bound of `D_i^tot` onto `x_i^m - 1/(m+1)` for an input uniform
/// on `[0, 1]`: `(2m+1)/m² (E[h(1, x_{-i}) - h(x)] - E[∂_i h x_i^{m+1}])²`.
pub fn monomial_lower_bound(
    s: &EvaluationSample,
    model: &dyn ModelFunction,
    dists: &[Distribution1D],
    i: usize,
    m: u32,
) -> Result<BoundEstimate> {
    let w = monomial_integral(s, model, dists, i, m)?;
    let mf = m as f64;
    let value = (2.0 * mf + 1.0) / (mf * mf) * w * w;
    Ok(monomial_estimate(s, i, m, value, BoundKind::Monomial))
}

/// Same integral with the earlier constant `(2m+1)/(m+1)²`.
pub fn monomial_literature_bound(
    s: &EvaluationSample,
    model: &dyn ModelFunction,
    dists: &[Distribution1D],
    i: usize,
    m: u32,
) -> Result<BoundEstimate> {
    let w = monomial_integral(s, model, dists, i, m)?;
    let mf = m as f64;
    let value = (2.0 * mf + 1.0) / ((mf + 1.0) * (mf + 1.0)) * w * w;
    Ok(monomial_estimate(
        s,
        i,
        m,
        value,
        BoundKind::MonomialLiterature,
    ))
}

/// `ν_i = E[(∂_i h)²]`.
pub fn dgsm(s: &EvaluationSample, i: usize) -> Result<f64> {
    if !s.has_gradients() {
        return Err(Error::MissingGradients);
    }
    if i >= s.dim() {
        return Err(Error::OutOfRange(format!(
            "variable {i} of a {}-input sample",
            s.dim()
        )));
    }
    Ok(weighted_means(s, 1, |j, out| {
        out[0] = s.gradient_row(j).expect("checked")[i].powi(2)
    })[0])
}

/// Upper bound `C_P ν_i` of `D_i^tot`.
pub fn dgsm_upper_bound(nu: f64, poincare_constant: f64, variable: usize) -> BoundEstimate {
    BoundEstimate::scalar(
        BoundKind::DgsmUpper,
        Target::Total,
        variable,
        poincare_constant * nu,
        None,
    )
}

/// [`dgsm_upper_bound`] estimated on a sample.
pub fn dgsm_upper_bound_from_sample(
    s: &EvaluationSample,
    poincare_constant: f64,
    i: usize,
) -> Result<BoundEstimate> {
    let nu = dgsm(s, i)?;
    Ok(BoundEstimate::scalar(
        BoundKind::DgsmUpper,
        Target::Total,
        i,
        poincare_constant * nu,
        Some(s),
    ))
}

/// Stream-specific seed derived from a base seed (SplitMix64 finalizer).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    mix(mix(seed) ^ stream.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

fn draw_design(dists: &[Distribution1D], n: usize, seed: u64, stream_offset: u64) -> Vec<Vec<f64>> {
    dists
        .iter()
        .enumerate()
        .map(|(k, d)| d.sample(n, derive_seed(seed, stream_offset + k as u64)))
        .collect()
}

fn evaluate_rows(
    model: &dyn ModelFunction,
    dim: usize,
    design: &[f64],
    with_gradients: bool,
) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
    let rows: Vec<(f64, Option<Vec<f64>>)> = design
        .par_chunks(dim)
        .map(|x| {
            model.check_point(x)?;
            let g = if with_gradients {
                model.gradient(x)
            } else {
                None
            };
            Ok((model.evaluate(x), g))
        })
        .collect::<Result<_>>()?;
    let outputs = rows.iter().map(|r| r.0).collect();
    let gradients = if with_gradients && rows.iter().all(|r| r.1.is_some()) {
        Some(
            rows.into_iter()
                .flat_map(|r| r.1.expect("checked"))
                .collect(),
        )
    } else {
        None
    };
    Ok((outputs, gradients))
}

/// Crude Monte Carlo sample of `n` rows, with gradients when the model has
/// them. Column `k` is drawn from its own seed stream.
pub fn monte_carlo_sample(
    model: &dyn ModelFunction,
    dists: &[Distribution1D],
    n: usize,
    seed: u64,
) -> Result<EvaluationSample> {
    let d = model.dim();
    if dists.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: dists.len(),
        });
    }
    let cols = draw_design(dists, n, seed, 0);
    let design: Vec<f64> = (0..n)
        .flat_map(|j| cols.iter().map(move |c| c[j]))
        .collect();
    let (outputs, gradients) = evaluate_rows(model, d, &design, true)?;
    Ok(EvaluationSample::new(d, design, outputs, gradients)?.with_seed(seed))
}

/// Nodes per piece of the default tensor quadrature.
pub const DEFAULT_QUADRATURE_NODES: usize = 20;
/// Largest dimension handled by tensor quadrature.
pub const MAX_TENSOR_DIM: usize = 4;

fn tensor_rules(
    model: &dyn ModelFunction,
    dists: &[Distribution1D],
    per_piece: usize,
) -> Result<Vec<GaussRule>> {
    let d = model.dim();
    if dists.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: dists.len(),
        });
    }
    if d > MAX_TENSOR_DIM {
        return Err(Error::DimensionTooLarge {
            got: d,
            max: MAX_TENSOR_DIM,
        });
    }
    Ok(dists
        .iter()
        .enumerate()
        .map(|(k, dist)| dist.quadrature_rule(per_piece, &model.kinks(k)))
        .collect())
}

fn tensor_design(rules: &[GaussRule]) -> (Vec<f64>, Vec<f64>) {
    let d = rules.len();
    let total: usize = rules.iter().map(GaussRule::len).product();
    let mut design = Vec::with_capacity(total * d);
    let mut weights = Vec::with_capacity(total);
    let mut digits = vec![0usize; d];
    for _ in 0..total {
        let mut w = 1.0;
        for (k, r) in rules.iter().enumerate() {
            design.push(r.nodes[digits[k]]);
            w *= r.weights[digits[k]];
        }
        weights.push(w);
        for k in (0..d).rev() {
            digits[k] += 1;
            if digits[k] < rules[k].len() {
                break;
            }
            digits[k] = 0;
        }
    }
    (design, weights)
}

/// Tensor Gauss design carrying the product law as weights. Composite
/// Gauss–Legendre on bounded supports (split at density and model kinks),
/// Gauss–Hermite for untruncated normal inputs.
pub fn quadrature_sample(
    model: &dyn ModelFunction,
    dists: &[Distribution1D],
    per_piece: usize,
) -> Result<EvaluationSample> {
    let rules = tensor_rules(model, dists, per_piece)?;
    let (design, weights) = tensor_design(&rules);
    let (outputs, gradients) = evaluate_rows(model, model.dim(), &design, true)?;
    EvaluationSample::new(model.dim(), design, outputs, gradients)?.with_weights(weights)
}

/// Jansen pick-freeze estimate of `D_i^tot` and `S_i^tot`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PickFreeze {
    pub total: BoundEstimate,
    pub index: BoundEstimate,
    pub variance: f64,
}

/// `(1/2n) Σ (h(x) - h(x^{(i)}))²` where `x^{(i)}` redraws coordinate `i`.
pub fn pick_freeze_total(
    model: &dyn ModelFunction,
    dists: &[Distribution1D],
    i: usize,
    n: usize,
    seed: u64,
) -> Result<PickFreeze> {
    let d = model.dim();
    if dists.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: dists.len(),
        });
    }
    if i >= d {
        return Err(Error::OutOfRange(format!(
            "variable {i} of a {d}-input model"
        )));
    }
    if n < 2 {
        return Err(Error::InvalidParameter("pick-freeze needs n >= 2".into()));
    }
    let cols = draw_design(dists, n, seed, 0);
    let fresh = dists[i].sample(n, derive_seed(seed, 1_000 + i as u64));
    let design: Vec<f64> = (0..n)
        .flat_map(|j| cols.iter().map(move |c| c[j]))
        .collect();
    let mut frozen = design.clone();
    for j in 0..n {
        frozen[j * d + i] = fresh[j];
    }
    let (y, _) = evaluate_rows(model, d, &design, false)?;
    let (y_i, _) = evaluate_rows(model, d, &frozen, false)?;
    let s = EvaluationSample::new(d, design, y.clone(), None)?.with_seed(seed);
    let half_sq = weighted_means(&s, 1, |j, o| o[0] = 0.5 * (y[j] - y_i[j]).powi(2))[0];
    let variance = s.output_variance();
    let total = BoundEstimate::scalar(
        BoundKind::PickFreezeTotal,
        Target::Total,
        i,
        half_sq,
        Some(&s),
    );
    let index = if variance > 0.0 {
        total.normalized(variance)
    } else {
        BoundEstimate {
            target: Target::TotalIndex,
            value: 0.0,
            ..total.clone()
        }
    };
    Ok(PickFreeze {
        total,
        index,
        variance,
    })
}

/// Exact ANOVA variances by tensor quadrature (`d <= 4`).
///
/// The closed variances `V_J = var(E[h | X_J])` of every subset are computed
/// on the tensor grid; `D_I` follows by inclusion–exclusion and `D_I^tot` as
/// the sum of `D_J` over all `J ⊇ I`.
#[derive(Debug, Clone)]
pub struct AnovaOracle {
    dim: usize,
    variance: f64,
    // Partial variance D_J indexed by the bit mask of J.
    partial: Vec<f64>,
}

impl AnovaOracle {
    pub fn new(
        model: &dyn ModelFunction,
        dists: &[Distribution1D],
        per_piece: usize,
    ) -> Result<Self> {
        let rules = tensor_rules(model, dists, per_piece)?;
        let d = rules.len();
        let (design, weights) = tensor_design(&rules);
        let values: Vec<f64> = design.par_chunks(d).map(|x| model.evaluate(x)).collect();
        let mean: f64 = values.iter().zip(&weights).map(|(v, w)| v * w).sum();
        let sizes: Vec<usize> = rules.iter().map(GaussRule::len).collect();

        let masks = 1usize << d;
        let mut closed = vec![0.0; masks];
        for (mask, slot) in closed.iter_mut().enumerate().skip(1) {
            let dims: Vec<usize> = (0..d).filter(|k| mask >> k & 1 == 1).collect();
            let sub: usize = dims.iter().map(|&k| sizes[k]).product();
            let mut acc = vec![0.0; sub];
            let mut digits = vec![0usize; d];
            for (v, w) in values.iter().zip(&weights) {
                let key = dims.iter().fold(0, |key, &k| key * sizes[k] + digits[k]);
                acc[key] += w * v;
                for k in (0..d).rev() {
                    digits[k] += 1;
                    if digits[k] < sizes[k] {
                        break;
                    }
                    digits[k] = 0;
                }
            }
            // Marginal weight of each sub-grid node.
            let mut second = 0.0;
            let mut sub_digits = vec![0usize; dims.len()];
            for a in &acc {
                let w: f64 = dims
                    .iter()
                    .zip(&sub_digits)
                    .map(|(&k, &t)| rules[k].weights[t])
                    .product();
                if w > 0.0 {
                    second += a * a / w;
                }
                for t in (0..dims.len()).rev() {
                    sub_digits[t] += 1;
                    if sub_digits[t] < sizes[dims[t]] {
                        break;
                    }
                    sub_digits[t] = 0;
                }
            }
            *slot = second - mean * mean;
        }

        let mut partial = vec![0.0; masks];
        for (mask, p) in partial.iter_mut().enumerate().skip(1) {
            // Sum over sub-masks of mask, with sign by size difference.
            let mut sub = mask;
            let mut total = 0.0;
            loop {
                let sign = if (mask.count_ones() - sub.count_ones()) % 2 == 0 {
                    1.0
                } else {
                    -1.0
                };
                total += sign * closed[sub];
                if sub == 0 {
                    break;
                }
                sub = (sub - 1) & mask;
            }
            *p = total;
        }
        Ok(Self {
            dim: d,
            variance: closed[masks - 1],
            partial,
        })
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    fn mask(&self, subset: &[usize]) -> Result<usize> {
        if subset.is_empty() {
            return Err(Error::InvalidParameter("empty input subset".into()));
        }
        subset.iter().try_fold(0usize, |m, &k| {
            if k >= self.dim {
                Err(Error::OutOfRange(format!(
                    "input {k} of a {}-input model",
                    self.dim
                )))
            } else {
                Ok(m | 1 << k)
            }
        })
    }

    /// `D_I`.
    pub fn partial(&self, subset: &[usize]) -> Result<f64> {
        Ok(self.partial[self.mask(subset)?])
    }

    /// `D_I^tot = Σ_{J ⊇ I} D_J`.
    pub fn total(&self, subset: &[usize]) -> Result<f64> {
        let m = self.mask(subset)?;
        Ok(self
            .partial
            .iter()
            .enumerate()
            .filter(|&(j, _)| j & m == m)
            .map(|(_, v)| v)
            .sum())
    }

    pub fn estimate(&self, variable: usize, total: bool) -> Result<BoundEstimate> {
        let value = if total {
            self.total(&[variable])?
        } else {
            self.partial(&[variable])?
        };
        let target = if total { Target::Total } else { Target::First };
        Ok(BoundEstimate::scalar(
            BoundKind::OracleExact,
            target,
            variable,
            value,
            None,
        ))
    }
}

/// `D_I` (or `D_I^tot` when `total`) by tensor quadrature.
pub fn anova_oracle(
    model: &dyn ModelFunction,
    dists: &[Distribution1D],
    subset: &[usize],
    total: bool,
    per_piece: usize,
) -> Result<f64> {
    let oracle = AnovaOracle::new(model, dists, per_piece)?;
    if total {
        oracle.total(subset)
    } else {
        oracle.partial(subset)
    }
}

/// Sorted bootstrap replicates of `statistic` from `replicates` resamples of
/// the rows (outputs and gradients stay paired). Replicate `b` draws its rows
/// from a stream seeded by `derive_seed(seed, b)`.
pub fn bootstrap_replicates<F>(
    statistic: F,
    s: &EvaluationSample,
    replicates: usize,
    seed: u64,
) -> Result<Vec<f64>>
where
    F: Fn(&EvaluationSample) -> Result<f64> + Sync,
{
    if replicates < 100 {
        return Err(Error::InvalidParameter(format!(
            "need >= 100 bootstrap replicates, got {replicates}"
        )));
    }
    if s.is_weighted() {
        return Err(Error::InvalidParameter(
            "bootstrap needs an unweighted Monte Carlo sample".into(),
        ));
    }
    let n = s.len();
    let mut values: Vec<f64> = (0..replicates as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, b));
            let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            statistic(&s.resample(&idx))
        })
        .collect::<Result<_>>()?;
    values.sort_by(f64::total_cmp);
    Ok(values)
}

/// Percentile bootstrap interval of `statistic`; see [`bootstrap_replicates`].
pub fn bootstrap_ci<F>(
    statistic: F,
    s: &EvaluationSample,
    replicates: usize,
    level: f64,
    seed: u64,
) -> Result<ConfidenceInterval>
where
    F: Fn(&EvaluationSample) -> Result<f64> + Sync,
{
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "confidence level {level} not in (0, 1)"
        )));
    }
    let values = bootstrap_replicates(statistic, s, replicates, seed)?;
    let alpha = 0.5 * (1.0 - level);
    Ok(ConfidenceInterval {
        lo: percentile(&values, alpha),
        hi: percentile(&values, 1.0 - alpha),
        level,
    })
}

/// Linear-interpolation percentile of sorted values.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}
