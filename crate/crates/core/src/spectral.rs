//! Eigenbases of the one-dimensional Poincaré operator.
//!
//! For an input law with density `p = exp(-V)` on a bounded interval and a
//! positive weight `w`, the operator `L h = w h'' + (w' - w V') h'` with
//! Neumann conditions has a simple spectrum `0 = λ_0 < λ_1 < ...` whose
//! eigenfunctions form an orthonormal basis of `L²(μ)` starting with the
//! constant. [`solve_spectrum`] discretizes the weak form
//! `∫ h' g' w dμ = λ ∫ h g dμ` with continuous piecewise-linear elements:
//! stiffness and mass are assembled with two-point Gauss rules per cell and
//! the mass is lumped, so that the pencil reduces by a diagonal Cholesky
//! factor to a symmetric tridiagonal matrix solved by implicit QL.
//!
//! Uniform and normal laws also have closed forms (Fourier and Hermite bases)
//! available through [`closed_form_spectrum`].

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::distributions::{Distribution1D, Family};
use crate::error::{Error, Result};
use crate::spline::{CubicSpline, EndSlope};
use crate::tridiagonal;

/// Weight of the weighted Poincaré inequality `var(h) <= C ∫ h'² w dμ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Weight {
    /// `w ≡ 1`: the plain Poincaré operator.
    #[default]
    Identity,
    /// `w(x) = x`, the Laguerre weight for Gamma laws.
    #[serde(rename = "x")]
    Linear,
    /// `w(x) = 1 - x²`, the Jacobi weight for Beta laws on `[-1, 1]`.
    #[serde(rename = "one_minus_x2")]
    OneMinusSquare,
    /// Piecewise-linear interpolation of `(x, w)` pairs, constant outside.
    Tabulated { x: Vec<f64>, w: Vec<f64> },
}

impl Weight {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Weight::Identity => 1.0,
            Weight::Linear => t,
            Weight::OneMinusSquare => 1.0 - t * t,
            Weight::Tabulated { x, w } => {
                if t <= x[0] {
                    return w[0];
                }
                let n = x.len();
                if t >= x[n - 1] {
                    return w[n - 1];
                }
                let j = x.partition_point(|&v| v <= t) - 1;
                let s = (t - x[j]) / (x[j + 1] - x[j]);
                w[j] + s * (w[j + 1] - w[j])
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if let Weight::Tabulated { x, w } = self {
            let ok = x.len() >= 2
                && x.len() == w.len()
                && x.windows(2).all(|p| p[1] > p[0])
                && w.iter().all(|&v| v >= 0.0 && v.is_finite());
            if !ok {
                return Err(Error::InvalidParameter(
                    "tabulated weight needs >= 2 increasing nodes and non-negative values".into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectralSource {
    NumericalGrid,
    ClosedFormFourier,
    ClosedFormHermite,
}

/// Eigenvalues and orthonormal eigenfunctions of the operator for one input.
///
/// `eigenfunctions[k][j]` is `e_k(grid[j])`. Numerical bases are evaluated
/// off-grid through clamped cubic splines of the tables; closed-form bases
/// are evaluated exactly and carry a tabulation for serialization only.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    distribution: Distribution1D,
    weight: Weight,
    grid: Vec<f64>,
    eigenvalues: Vec<f64>,
    eigenfunctions: Vec<Vec<f64>>,
    derivatives: Vec<Vec<f64>>,
    source: SpectralSource,
    signs: Vec<f64>,
    splines: Vec<CubicSpline>,
}

/// JSON record of a [`SpectralBasis`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralRecord {
    #[serde(flatten)]
    pub distribution: Distribution1D,
    pub weight: Weight,
    pub source: SpectralSource,
    pub grid: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    pub eigenfunctions: Vec<Vec<f64>>,
    pub derivatives: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signs: Option<Vec<f64>>,
}

/// Equispaced grid with `m` cells on `[a, b]`.
pub fn uniform_grid(a: f64, b: f64, m: usize) -> Vec<f64> {
    let h = (b - a) / m as f64;
    let mut g: Vec<f64> = (0..=m).map(|j| a + h * j as f64).collect();
    g[m] = b;
    g
}

/// Chebyshev–Lobatto grid with `m` cells on `[a, b]`, clustered at both ends.
pub fn chebyshev_grid(a: f64, b: f64, m: usize) -> Vec<f64> {
    let mut g: Vec<f64> = (0..=m)
        .map(|j| {
            let t = -(PI * j as f64 / m as f64).cos();
            0.5 * (a + b) + 0.5 * (b - a) * t
        })
        .collect();
    g[0] = a;
    g[m] = b;
    g
}

/// Lowest `k + 1` eigenpairs on an equispaced grid of `m` cells.
///
/// The support must be bounded (see [`Distribution1D::bounded`]) and
/// `m >= 10 k`.
pub fn solve_spectrum(
    dist: &Distribution1D,
    k: usize,
    m: usize,
    weight: &Weight,
) -> Result<SpectralBasis> {
    if k < 1 {
        return Err(Error::InvalidParameter(
            "need at least one non-constant eigenpair".into(),
        ));
    }
    if m < 10 * k {
        return Err(Error::InvalidParameter(format!(
            "grid of {m} cells is too coarse for {k} eigenpairs (need >= {})",
            10 * k
        )));
    }
    if !dist.is_bounded() {
        return Err(Error::UnboundedSupport);
    }
    let (a, b) = dist.support();
    solve_spectrum_on_grid(dist, k, uniform_grid(a, b, m), weight)
}

/// Same as [`solve_spectrum`] on a caller-supplied grid spanning the support.
pub fn solve_spectrum_on_grid(
    dist: &Distribution1D,
    k: usize,
    grid: Vec<f64>,
    weight: &Weight,
) -> Result<SpectralBasis> {
    if !dist.is_bounded() {
        return Err(Error::UnboundedSupport);
    }
    weight.validate()?;
    let (a, b) = dist.support();
    let nodes = grid.len();
    if nodes < 3 || grid[0] != a || grid[nodes - 1] != b || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(
            "grid must be strictly increasing and span the support".into(),
        ));
    }
    if k + 1 > nodes {
        return Err(Error::InvalidParameter(
            "more eigenpairs requested than grid nodes".into(),
        ));
    }

    let (mass, stiff_diag, stiff_off) = assemble(dist, &grid, weight)?;

    let scaled_diag: Vec<f64> = stiff_diag.iter().zip(&mass).map(|(s, m)| s / m).collect();
    let scaled_off: Vec<f64> = stiff_off
        .iter()
        .enumerate()
        .map(|(j, s)| s / (mass[j] * mass[j + 1]).sqrt())
        .collect();
    let (values, vectors) = tridiagonal::lowest_eigenpairs(&scaled_diag, &scaled_off, k + 1);

    let mut eigenvalues = Vec::with_capacity(k + 1);
    let mut eigenfunctions = Vec::with_capacity(k + 1);
    eigenvalues.push(0.0);
    eigenfunctions.push(vec![1.0; nodes]);
    for (lambda, y) in values.iter().zip(&vectors).skip(1) {
        let mut v: Vec<f64> = y.iter().zip(&mass).map(|(yj, mj)| yj / mj.sqrt()).collect();
        if v[0] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        eigenvalues.push(*lambda);
        eigenfunctions.push(v);
    }
    if eigenvalues.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::DegenerateSpectrum(eigenvalues[1]));
    }

    let mut basis = SpectralBasis {
        distribution: *dist,
        weight: weight.clone(),
        grid,
        eigenvalues,
        eigenfunctions,
        derivatives: Vec::new(),
        source: SpectralSource::NumericalGrid,
        signs: vec![1.0; k + 1],
        splines: Vec::new(),
    };
    basis.rebuild_splines();
    Ok(basis)
}

/// Lumped mass, stiffness diagonal and stiffness off-diagonal.
fn assemble(
    dist: &Distribution1D,
    grid: &[f64],
    weight: &Weight,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let nodes = grid.len();
    let mut mass = vec![0.0; nodes];
    let mut diag = vec![0.0; nodes];
    let mut off = vec![0.0; nodes - 1];
    let g = 0.5 / 3f64.sqrt();
    for j in 0..nodes - 1 {
        let (t0, t1) = (grid[j], grid[j + 1]);
        let h = t1 - t0;
        let mid = 0.5 * (t0 + t1);
        let mut cell_stiff = 0.0;
        let mut cell_mass = 0.0;
        for s in [-g, g] {
            let t = mid + s * h;
            let p = dist.pdf(t);
            let phi_right = 0.5 + s;
            let phi_left = 0.5 - s;
            mass[j] += 0.5 * h * p * phi_left;
            mass[j + 1] += 0.5 * h * p * phi_right;
            let wt = weight.eval(t);
            if !(wt > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "weight must be positive inside the support; w({t}) = {wt}"
                )));
            }
            cell_mass += p;
            cell_stiff += 0.5 * h * wt * p / (h * h);
        }
        if !(cell_mass > 0.0) || !cell_mass.is_finite() {
            return Err(Error::SingularMass { cell: j });
        }
        diag[j] += cell_stiff;
        diag[j + 1] += cell_stiff;
        off[j] -= cell_stiff;
    }
    Ok((mass, diag, off))
}

/// Grid layout for numerical solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    #[default]
    Uniform,
    Chebyshev,
}

/// Basis for an input law: the closed form when one exists for the plain
/// operator, otherwise a numerical solve with `m` cells on the law (bounded
/// first if its support is not). Also returns the law the basis is
/// orthonormal under, which is the law to sample from.
pub fn default_basis(
    dist: &Distribution1D,
    k: usize,
    m: usize,
    weight: &Weight,
    grid: GridKind,
) -> Result<(Distribution1D, SpectralBasis)> {
    if *weight == Weight::Identity {
        if let Ok(b) = closed_form_spectrum(dist, k) {
            return Ok((*dist, b));
        }
    }
    let law = if dist.is_bounded() {
        *dist
    } else {
        dist.bounded()?
    };
    let basis = match grid {
        GridKind::Uniform => solve_spectrum(&law, k, m, weight)?,
        GridKind::Chebyshev => {
            if k < 1 || m < 10 * k {
                return solve_spectrum(&law, k, m, weight).map(|b| (law, b));
            }
            let (a, b) = law.support();
            solve_spectrum_on_grid(&law, k, chebyshev_grid(a, b, m), weight)?
        }
    };
    Ok((law, basis))
}

/// Fourier basis for uniform laws, Hermite basis for normal laws.
pub fn closed_form_spectrum(dist: &Distribution1D, k: usize) -> Result<SpectralBasis> {
    const TABLE_CELLS: usize = 200;
    let (source, grid, eigenvalues) = match (*dist.family(), dist.is_truncated()) {
        (Family::Uniform { lo, hi }, false) => {
            let len = hi - lo;
            let vals = (0..=k).map(|l| (l as f64 * PI / len).powi(2)).collect();
            (
                SpectralSource::ClosedFormFourier,
                uniform_grid(lo, hi, TABLE_CELLS),
                vals,
            )
        }
        (Family::Normal { mean, sd }, false) => {
            let vals = (0..=k).map(|n| n as f64 / (sd * sd)).collect();
            let grid = uniform_grid(mean - 8.0 * sd, mean + 8.0 * sd, TABLE_CELLS);
            (SpectralSource::ClosedFormHermite, grid, vals)
        }
        _ => return Err(Error::NoClosedForm(dist.describe())),
    };
    let mut basis = SpectralBasis {
        distribution: *dist,
        weight: Weight::Identity,
        grid,
        eigenvalues,
        eigenfunctions: Vec::new(),
        derivatives: Vec::new(),
        source,
        signs: vec![1.0; k + 1],
        splines: Vec::new(),
    };
    basis.tabulate_closed_form();
    Ok(basis)
}

impl SpectralBasis {
    pub fn distribution(&self) -> &Distribution1D {
        &self.distribution
    }

    pub fn weight(&self) -> &Weight {
        &self.weight
    }

    pub fn source(&self) -> SpectralSource {
        self.source
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenfunctions(&self) -> &[Vec<f64>] {
        &self.eigenfunctions
    }

    pub fn eigenfunction_derivatives(&self) -> &[Vec<f64>] {
        &self.derivatives
    }

    /// Highest eigen-index `K` available.
    pub fn max_index(&self) -> usize {
        self.eigenvalues.len() - 1
    }

    pub fn eigenvalue(&self, k: usize) -> Result<f64> {
        self.eigenvalues
            .get(k)
            .copied()
            .ok_or_else(|| Error::OutOfRange(format!("eigen-index {k} > {}", self.max_index())))
    }

    /// Inverse spectral gap `1 / λ_1`.
    pub fn poincare_constant(&self) -> Result<f64> {
        match self.eigenvalues.get(1) {
            Some(&l) if l > 0.0 => Ok(1.0 / l),
            Some(&l) => Err(Error::DegenerateSpectrum(l)),
            None => Err(Error::DegenerateSpectrum(0.0)),
        }
    }

    /// `e_k(x)` or `e_k'(x)`.
    pub fn eval(&self, k: usize, x: f64, derivative: bool) -> Result<f64> {
        if k > self.max_index() {
            return Err(Error::OutOfRange(format!(
                "eigen-index {k} > {}",
                self.max_index()
            )));
        }
        let (a, b) = self.distribution.support();
        let slack = 1e-12 * (1.0 + a.abs().max(b.abs()));
        if !(x >= a - slack && x <= b + slack) {
            return Err(Error::OutOfRange(format!("x = {x} outside [{a}, {b}]")));
        }
        Ok(self.eval_unchecked(k, x.clamp(a, b), derivative))
    }

    pub(crate) fn eval_unchecked(&self, k: usize, x: f64, derivative: bool) -> f64 {
        if k == 0 {
            return if derivative { 0.0 } else { 1.0 };
        }
        let raw = match self.source {
            SpectralSource::NumericalGrid => {
                let s = &self.splines[k];
                return if derivative {
                    s.derivative(x)
                } else {
                    s.value(x)
                };
            }
            SpectralSource::ClosedFormFourier => {
                let (lo, hi) = self.distribution.support();
                let freq = k as f64 * PI / (hi - lo);
                let arg = freq * (x - lo);
                if derivative {
                    -std::f64::consts::SQRT_2 * freq * arg.sin()
                } else {
                    std::f64::consts::SQRT_2 * arg.cos()
                }
            }
            SpectralSource::ClosedFormHermite => {
                let Family::Normal { mean, sd } = *self.distribution.family() else {
                    unreachable!("Hermite basis on a non-normal law")
                };
                let z = (x - mean) / sd;
                if derivative {
                    (k as f64).sqrt() * normalized_hermite(k - 1, z) / sd
                } else {
                    normalized_hermite(k, z)
                }
            }
        };
        self.signs[k] * raw
    }

    /// Flip the sign of `e_k` (eigenfunctions are defined up to sign).
    pub fn flip_sign(&mut self, k: usize) {
        if k == 0 || k > self.max_index() {
            return;
        }
        self.eigenfunctions[k].iter_mut().for_each(|v| *v = -*v);
        self.derivatives[k].iter_mut().for_each(|v| *v = -*v);
        match self.source {
            SpectralSource::NumericalGrid => self.rebuild_splines(),
            _ => self.signs[k] = -self.signs[k],
        }
    }

    fn rebuild_splines(&mut self) {
        let (pa, pb) = self.distribution.boundary_density();
        let (a, b) = self.distribution.support();
        // Neumann ends where the flux weight w p does not vanish.
        let end = |flux: f64| {
            if flux > 0.0 {
                EndSlope::Clamped(0.0)
            } else {
                EndSlope::Estimated
            }
        };
        let left = end(pa * self.weight.eval(a));
        let right = end(pb * self.weight.eval(b));
        self.splines = self
            .eigenfunctions
            .iter()
            .map(|e| CubicSpline::new(&self.grid, e, left, right))
            .collect();
        self.derivatives = self
            .splines
            .iter()
            .enumerate()
            .map(|(k, s)| {
                if k == 0 {
                    vec![0.0; self.grid.len()]
                } else {
                    self.grid.iter().map(|&t| s.derivative(t)).collect()
                }
            })
            .collect();
    }

    fn tabulate_closed_form(&mut self) {
        let k_max = self.max_index();
        self.eigenfunctions = (0..=k_max)
            .map(|k| {
                self.grid
                    .iter()
                    .map(|&t| self.eval_unchecked(k, t, false))
                    .collect()
            })
            .collect();
        self.derivatives = (0..=k_max)
            .map(|k| {
                self.grid
                    .iter()
                    .map(|&t| self.eval_unchecked(k, t, true))
                    .collect()
            })
            .collect();
    }

    pub fn to_record(&self) -> SpectralRecord {
        SpectralRecord {
            distribution: self.distribution,
            weight: self.weight.clone(),
            source: self.source,
            grid: self.grid.clone(),
            eigenvalues: self.eigenvalues.clone(),
            eigenfunctions: self.eigenfunctions.clone(),
            derivatives: self.derivatives.clone(),
            signs: match self.source {
                SpectralSource::NumericalGrid => None,
                _ => Some(self.signs.clone()),
            },
        }
    }

    pub fn from_record(rec: SpectralRecord) -> Result<Self> {
        let k1 = rec.eigenvalues.len();
        let shape_ok = k1 >= 2
            && rec.eigenfunctions.len() == k1
            && rec.eigenfunctions.iter().all(|e| e.len() == rec.grid.len())
            && rec.grid.len() >= 3;
        if !shape_ok {
            return Err(Error::InvalidParameter(
                "inconsistent spectral record shapes".into(),
            ));
        }
        let mut basis = SpectralBasis {
            distribution: rec.distribution,
            weight: rec.weight,
            grid: rec.grid,
            eigenvalues: rec.eigenvalues,
            eigenfunctions: rec.eigenfunctions,
            derivatives: rec.derivatives,
            source: rec.source,
            signs: rec.signs.unwrap_or_else(|| vec![1.0; k1]),
            splines: Vec::new(),
        };
        match basis.source {
            SpectralSource::NumericalGrid => basis.rebuild_splines(),
            _ => {
                if basis.signs.len() != k1 {
                    return Err(Error::InvalidParameter(
                        "sign vector length mismatch".into(),
                    ));
                }
                basis.tabulate_closed_form();
            }
        }
        Ok(basis)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_record())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_record(serde_json::from_str(s)?)
    }
}

/// `He_n(z) / sqrt(n!)`, orthonormal under the standard normal law.
fn normalized_hermite(n: usize, z: f64) -> f64 {
    // Normalized three-term recurrence avoids factorial overflow.
    let mut prev = 0.0;
    let mut cur = 1.0;
    for j in 0..n {
        let jf = j as f64;
        let next = (z * cur - jf.sqrt() * prev) / (jf + 1.0).sqrt();
        prev = cur;
        cur = next;
    }
    cur
}
