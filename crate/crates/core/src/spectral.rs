//! Companion-matrix spectra for CARMA autoregressive polynomials.
//!
//! The autoregressive part of a CARMA(p,q) state is described by the monic
//! polynomial
//!
//! ```text
//! a(z) = z^p + a_1 z^{p-1} + ... + a_p
//! ```
//!
//! whose roots are the eigenvalues of the companion matrix `A`. When the roots
//! are distinct, `A = S Λ S⁻¹` with `S` the Vandermonde matrix whose columns
//! are `[1, λ_j, ..., λ_j^{p-1}]`. Everything the simulator needs is expressed
//! through that factorisation without ever inverting `S` numerically:
//!
//! * row `j` of `S⁻¹` holds the coefficients of the Lagrange basis polynomial
//!   `a(z) / ((z - λ_j) a'(λ_j))`, so `S⁻¹ v` is a synthetic division per root;
//! * in particular `S⁻¹ e = [1 / a'(λ_j)]_j` for `e = [0, ..., 0, 1]`;
//! * `e^{A t} v = S diag(e^{λ_j t}) S⁻¹ v` is exact for every `t ≥ 0`.

use num_complex::Complex64;
use thiserror::Error;

/// Relative distance below which two roots are treated as one eigenvalue.
pub const DISTINCTNESS_TOLERANCE: f64 = 1e-7;

/// Relative bound on `|a(λ_j)|` accepted from the root finder.
pub const ROOT_RESIDUAL_TOLERANCE: f64 = 1e-9;

const ABERTH_MAX_ITER: usize = 500;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("autoregressive polynomial must have at least one coefficient")]
    EmptyPolynomial,
    #[error("coefficient {index} is not finite ({value})")]
    NonFiniteCoefficient { index: usize, value: f64 },
    #[error("eigenvalues are not distinct: min pairwise distance {min_distance:e} < tolerance {tolerance:e}")]
    DegenerateEigenvalues { min_distance: f64, tolerance: f64 },
    #[error("root finding failed: residual {residual:e} exceeds tolerance {tolerance:e}")]
    RootFindingFailure { residual: f64, tolerance: f64 },
    #[error("matrix exponential overflows for dt = {dt}")]
    NumericalOverflow { dt: f64 },
    #[error("vector length {got} does not match order {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("time step must be finite and non-negative, got {0}")]
    InvalidTimeStep(f64),
    #[error("bound constant forms disagree: spectral {spectral} vs norm product {norm_product}")]
    BoundFormDisagreement { spectral: f64, norm_product: f64 },
}

/// Coefficients `a_1..a_p` of the monic autoregressive polynomial.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyCoeffs(Vec<f64>);

impl PolyCoeffs {
    pub fn new(a: Vec<f64>) -> Result<Self, SpectralError> {
        if a.is_empty() {
            return Err(SpectralError::EmptyPolynomial);
        }
        if let Some((index, &value)) = a.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(SpectralError::NonFiniteCoefficient { index, value });
        }
        Ok(Self(a))
    }

    pub fn order(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// `a(z)` by Horner's rule.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.0
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, &c| acc * z + c)
    }

    /// `a'(z) = p z^{p-1} + (p-1) a_1 z^{p-2} + ... + a_{p-1}`.
    pub fn eval_derivative(&self, z: Complex64) -> Complex64 {
        let p = self.0.len();
        self.0[..p - 1]
            .iter()
            .enumerate()
            .fold(Complex64::new(p as f64, 0.0), |acc, (i, &c)| {
                acc * z + c * (p - 1 - i) as f64
            })
    }

    fn scale(&self) -> f64 {
        self.0.iter().fold(1.0f64, |m, c| m.max(c.abs()))
    }
}

/// Evaluates `b(z) = b_0 + b_1 z + ... + b_{p-1} z^{p-1}`.
pub fn eval_ma(b: &[f64], z: Complex64) -> Complex64 {
    b.iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
}

/// The `p × p` companion matrix, row-major.
///
/// Ones on the superdiagonal and `[-a_p, ..., -a_1]` on the last row; for
/// `p = 1` this is the scalar `[-a_1]`.
pub fn build_companion(a: &PolyCoeffs) -> Vec<Vec<f64>> {
    let p = a.order();
    let mut m = vec![vec![0.0; p]; p];
    for (i, row) in m.iter_mut().enumerate().take(p - 1) {
        row[i + 1] = 1.0;
    }
    for (j, entry) in m[p - 1].iter_mut().enumerate() {
        *entry = -a.as_slice()[p - 1 - j];
    }
    m
}

/// Eigen-structure of a diagonalisable companion matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralData {
    coeffs: PolyCoeffs,
    eigenvalues: Vec<Complex64>,
    aprime: Vec<Complex64>,
    sinv_e: Vec<Complex64>,
    decay: f64,
}

impl SpectralData {
    /// Roots of `a(z)` together with `a'(λ_j)`, `S⁻¹e` and `λ(A) = max Re λ_j`.
    pub fn decompose(a: &PolyCoeffs) -> Result<Self, SpectralError> {
        let eigenvalues = polynomial_roots(a)?;
        // a'(λ_j) = Π_{k≠j} (λ_j - λ_k)
        let aprime: Vec<Complex64> = eigenvalues
            .iter()
            .enumerate()
            .map(|(j, &z)| {
                eigenvalues
                    .iter()
                    .enumerate()
                    .filter(|&(k, _)| k != j)
                    .map(|(_, &w)| z - w)
                    .product()
            })
            .collect();
        let sinv_e = aprime.iter().map(|d| d.inv()).collect();
        let decay = eigenvalues
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(Self {
            coeffs: a.clone(),
            eigenvalues,
            aprime,
            sinv_e,
            decay,
        })
    }

    pub fn order(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn coeffs(&self) -> &PolyCoeffs {
        &self.coeffs
    }

    pub fn eigenvalues(&self) -> &[Complex64] {
        &self.eigenvalues
    }

    /// `a'(λ_j)` for each eigenvalue.
    pub fn aprime(&self) -> &[Complex64] {
        &self.aprime
    }

    /// `S⁻¹ e`, i.e. `1 / a'(λ_j)`.
    pub fn sinv_e(&self) -> &[Complex64] {
        &self.sinv_e
    }

    /// `λ(A)`, the largest real part among the eigenvalues.
    pub fn decay(&self) -> f64 {
        self.decay
    }

    /// `S⁻¹ v` by synthetic division of `a(z)` by `(z - λ_j)`.
    pub fn to_spectral(&self, v: &[Complex64]) -> Result<Vec<Complex64>, SpectralError> {
        self.check_len(v.len())?;
        let a = self.coeffs.as_slice();
        let p = a.len();
        Ok(self
            .eigenvalues
            .iter()
            .zip(&self.sinv_e)
            .map(|(&lambda, &w)| {
                // quotient coefficients from the top: q_{p-1} = 1, q_{k-1} = a_{p-k} + λ q_k
                let mut q = Complex64::new(1.0, 0.0);
                let mut acc = q * v[p - 1];
                for k in (0..p - 1).rev() {
                    q = q * lambda + a[p - 2 - k];
                    acc += q * v[k];
                }
                acc * w
            })
            .collect())
    }

    /// `S c`, i.e. `Σ_j c_j [1, λ_j, ..., λ_j^{p-1}]`.
    pub fn from_spectral(&self, c: &[Complex64]) -> Result<Vec<Complex64>, SpectralError> {
        self.check_len(c.len())?;
        let mut out = vec![Complex64::new(0.0, 0.0); self.order()];
        for (&lambda, &cj) in self.eigenvalues.iter().zip(c) {
            let mut term = cj;
            for o in out.iter_mut() {
                *o += term;
                term *= lambda;
            }
        }
        Ok(out)
    }

    /// `e^{A dt} v` without discarding the imaginary residue.
    pub fn exp_action_complex(
        &self,
        v: &[Complex64],
        dt: f64,
    ) -> Result<Vec<Complex64>, SpectralError> {
        if !(dt.is_finite() && dt >= 0.0) {
            return Err(SpectralError::InvalidTimeStep(dt));
        }
        let mut c = self.to_spectral(v)?;
        for (cj, lambda) in c.iter_mut().zip(&self.eigenvalues) {
            let growth = (lambda * dt).exp();
            if !growth.is_finite() {
                return Err(SpectralError::NumericalOverflow { dt });
            }
            *cj *= growth;
        }
        let out = self.from_spectral(&c)?;
        if out.iter().any(|z| !z.is_finite()) {
            return Err(SpectralError::NumericalOverflow { dt });
        }
        Ok(out)
    }

    /// `e^{A dt} v` for a real vector `v`; the imaginary rounding residue is dropped.
    pub fn exp_action(&self, v: &[f64], dt: f64) -> Result<Vec<f64>, SpectralError> {
        let vc: Vec<Complex64> = v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        Ok(self
            .exp_action_complex(&vc, dt)?
            .into_iter()
            .map(|z| z.re)
            .collect())
    }

    /// `b(λ_j)` for each eigenvalue, i.e. the row vector `b^T S`.
    pub fn ma_at_eigenvalues(&self, b: &[f64]) -> Result<Vec<Complex64>, SpectralError> {
        self.check_len(b.len())?;
        Ok(self.eigenvalues.iter().map(|&z| eval_ma(b, z)).collect())
    }

    /// The Vandermonde eigenvector matrix `S`, row-major.
    pub fn eigenvector_matrix(&self) -> Vec<Vec<Complex64>> {
        let p = self.order();
        let mut s = vec![vec![Complex64::new(0.0, 0.0); p]; p];
        for (j, &lambda) in self.eigenvalues.iter().enumerate() {
            let mut pow = Complex64::new(1.0, 0.0);
            for row in s.iter_mut() {
                row[j] = pow;
                pow *= lambda;
            }
        }
        s
    }

    fn check_len(&self, len: usize) -> Result<(), SpectralError> {
        if len != self.order() {
            return Err(SpectralError::DimensionMismatch {
                expected: self.order(),
                got: len,
            });
        }
        Ok(())
    }
}

/// `K = ‖b^T S‖₂ ‖S⁻¹ e‖₂`, the per-event jump of the dominating intensity.
///
/// Computed twice: once from the sums `Σ|b(λ_j)|²` and `Σ|1/a'(λ_j)|²`, once
/// by materialising `S` and solving `S y = e` by elimination. The two must
/// agree; the spectral form is returned.
pub fn bound_constant(s: &SpectralData, b: &[f64]) -> Result<f64, SpectralError> {
    let spectral = bound_constant_spectral(s, b)?;
    let norm_product = bound_constant_norm_product(s, b)?;
    let scale = spectral.abs().max(norm_product.abs()).max(f64::MIN_POSITIVE);
    if (spectral - norm_product).abs() > 1e-6 * scale {
        return Err(SpectralError::BoundFormDisagreement {
            spectral,
            norm_product,
        });
    }
    Ok(spectral)
}

/// `sqrt(Σ_j |b(λ_j)|²) · sqrt(Σ_j |1/a'(λ_j)|²)`.
pub fn bound_constant_spectral(s: &SpectralData, b: &[f64]) -> Result<f64, SpectralError> {
    let row = s.ma_at_eigenvalues(b)?;
    Ok(l2_norm(&row) * l2_norm(s.sinv_e()))
}

/// `‖b^T S‖₂ ‖S⁻¹ e‖₂` with `S` built explicitly and `S⁻¹ e` from elimination.
pub fn bound_constant_norm_product(s: &SpectralData, b: &[f64]) -> Result<f64, SpectralError> {
    Ok(ma_row_norm_dense(s, b)? * sinv_e_norm_dense(s))
}

/// `‖b^T S‖₂` from the explicit Vandermonde matrix.
pub fn ma_row_norm_dense(s: &SpectralData, b: &[f64]) -> Result<f64, SpectralError> {
    s.check_len(b.len())?;
    let p = s.order();
    let smat = s.eigenvector_matrix();
    let row: Vec<Complex64> = (0..p)
        .map(|j| (0..p).map(|k| smat[k][j] * b[k]).sum())
        .collect();
    Ok(l2_norm(&row))
}

/// `‖S⁻¹ e‖₂` by solving `S y = e` with partial pivoting.
pub fn sinv_e_norm_dense(s: &SpectralData) -> f64 {
    let p = s.order();
    let mut e = vec![Complex64::new(0.0, 0.0); p];
    e[p - 1] = Complex64::new(1.0, 0.0);
    l2_norm(&solve_dense(s.eigenvector_matrix(), e))
}

pub(crate) fn l2_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

// Gaussian elimination with partial pivoting; the matrix is square and non-singular.
fn solve_dense(mut m: Vec<Vec<Complex64>>, mut rhs: Vec<Complex64>) -> Vec<Complex64> {
    let n = rhs.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i][col].norm().total_cmp(&m[j][col].norm()))
            .unwrap_or(col);
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        let d = m[col][col];
        for r in col + 1..n {
            let f = m[r][col] / d;
            if f == Complex64::new(0.0, 0.0) {
                continue;
            }
            for c in col..n {
                let delta = f * m[col][c];
                m[r][c] -= delta;
            }
            let delta = f * rhs[col];
            rhs[r] -= delta;
        }
    }
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for r in (0..n).rev() {
        let s: Complex64 = (r + 1..n).map(|c| m[r][c] * x[c]).sum();
        x[r] = (rhs[r] - s) / m[r][r];
    }
    x
}

/// Roots of the monic polynomial, conjugate-symmetric and sorted by
/// decreasing real part (then decreasing imaginary part).
pub fn polynomial_roots(a: &PolyCoeffs) -> Result<Vec<Complex64>, SpectralError> {
    let p = a.order();
    let mut roots = if p == 1 {
        vec![Complex64::new(-a.as_slice()[0], 0.0)]
    } else {
        aberth(a)
    };

    let magnitude = roots.iter().fold(1.0f64, |m, z| m.max(z.norm()));
    let distinct_tol = DISTINCTNESS_TOLERANCE * magnitude;
    symmetrize(a, &mut roots, 0.5 * distinct_tol)?;

    let residual_tol = ROOT_RESIDUAL_TOLERANCE * a.scale();
    let residual = roots.iter().map(|&z| a.eval(z).norm()).fold(0.0, f64::max);
    if !(residual <= residual_tol) {
        return Err(SpectralError::RootFindingFailure {
            residual,
            tolerance: residual_tol,
        });
    }

    let mut min_distance = f64::INFINITY;
    for i in 0..p {
        for j in i + 1..p {
            min_distance = min_distance.min((roots[i] - roots[j]).norm());
        }
    }
    if min_distance < distinct_tol {
        return Err(SpectralError::DegenerateEigenvalues {
            min_distance,
            tolerance: distinct_tol,
        });
    }

    roots.sort_by(|x, y| y.re.total_cmp(&x.re).then(y.im.total_cmp(&x.im)));
    Ok(roots)
}

// Aberth–Ehrlich simultaneous iteration started on a circle enclosing all roots.
fn aberth(a: &PolyCoeffs) -> Vec<Complex64> {
    let p = a.order();
    let coeffs = a.as_slice();
    // Fujiwara bound on root moduli.
    let radius = coeffs
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let c = if i == p - 1 { c.abs() / 2.0 } else { c.abs() };
            c.powf(1.0 / (i + 1) as f64)
        })
        .fold(0.0f64, f64::max)
        .max(1e-3)
        * 2.0;
    let mut z: Vec<Complex64> = (0..p)
        .map(|k| {
            let theta = std::f64::consts::TAU * k as f64 / p as f64 + 0.4;
            Complex64::from_polar(radius, theta)
        })
        .collect();

    for _ in 0..ABERTH_MAX_ITER {
        let mut max_step = 0.0f64;
        for i in 0..p {
            let f = a.eval(z[i]);
            if f == Complex64::new(0.0, 0.0) {
                continue;
            }
            let ratio = f / a.eval_derivative(z[i]);
            let repulsion: Complex64 = (0..p)
                .filter(|&j| j != i)
                .map(|j| (z[i] - z[j]).inv())
                .sum();
            let step = ratio / (Complex64::new(1.0, 0.0) - ratio * repulsion);
            if step.is_finite() {
                z[i] -= step;
                max_step = max_step.max(step.norm() / z[i].norm().max(1.0));
            }
        }
        if max_step < 1e-15 {
            break;
        }
    }
    z
}

// Snap near-real roots onto the real axis and make complex roots exact
// conjugate pairs, polishing each with Newton steps.
fn symmetrize(a: &PolyCoeffs, roots: &mut [Complex64], real_tol: f64) -> Result<(), SpectralError> {
    let mut upper = Vec::new();
    let mut lower = Vec::new();
    for (i, z) in roots.iter().enumerate() {
        if z.im.abs() < real_tol {
            continue;
        } else if z.im > 0.0 {
            upper.push(i);
        } else {
            lower.push(i);
        }
    }
    if upper.len() != lower.len() {
        let residual = roots.iter().map(|&z| a.eval(z).norm()).fold(0.0, f64::max);
        return Err(SpectralError::RootFindingFailure {
            residual,
            tolerance: ROOT_RESIDUAL_TOLERANCE * a.scale(),
        });
    }

    let is_complex = |i: &usize| upper.contains(i) || lower.contains(i);
    for i in 0..roots.len() {
        if !is_complex(&i) {
            roots[i] = Complex64::new(newton_polish(a, Complex64::new(roots[i].re, 0.0)).re, 0.0);
        }
    }

    let mut unmatched = lower.clone();
    for &u in &upper {
        let target = roots[u].conj();
        let (pos, _) = unmatched
            .iter()
            .enumerate()
            .min_by(|(_, &x), (_, &y)| {
                (roots[x] - target)
                    .norm()
                    .total_cmp(&(roots[y] - target).norm())
            })
            .expect("equal counts");
        let l = unmatched.swap_remove(pos);
        let mid = Complex64::new(
            0.5 * (roots[u].re + roots[l].re),
            0.5 * (roots[u].im - roots[l].im),
        );
        let polished = newton_polish(a, mid);
        roots[u] = polished;
        roots[l] = polished.conj();
    }
    Ok(())
}

fn newton_polish(a: &PolyCoeffs, mut z: Complex64) -> Complex64 {
    let mut best = eval_compensated(a, z).norm();
    for _ in 0..6 {
        let step = eval_compensated(a, z) / a.eval_derivative(z);
        if !step.is_finite() || step.norm() == 0.0 {
            break;
        }
        let candidate = z - step;
        let r = eval_compensated(a, candidate).norm();
        if r <= best {
            z = candidate;
            best = r;
        } else {
            break;
        }
    }
    z
}

/// `a(z)` by Horner's rule in double-double arithmetic, rounded once at the
/// end. Accurate near clustered roots, where plain Horner is dominated by
/// rounding.
fn eval_compensated(a: &PolyCoeffs, z: Complex64) -> Complex64 {
    let mut re = Dd::from(1.0);
    let mut im = Dd::from(0.0);
    for &c in a.as_slice() {
        let next_re = re.mul(z.re).add(im.mul(-z.im)).add(Dd::from(c));
        let next_im = re.mul(z.im).add(im.mul(z.re));
        re = next_re;
        im = next_im;
    }
    Complex64::new(re.value(), im.value())
}

#[derive(Debug, Clone, Copy)]
struct Dd {
    hi: f64,
    lo: f64,
}

impl From<f64> for Dd {
    fn from(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }
}

impl Dd {
    fn value(self) -> f64 {
        self.hi + self.lo
    }

    fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let (hi, lo) = fast_two_sum(s, e + self.lo + o.lo);
        Dd { hi, lo }
    }

    fn mul(self, x: f64) -> Dd {
        let p = self.hi * x;
        let e = self.hi.mul_add(x, -p);
        let (hi, lo) = fast_two_sum(p, e + self.lo * x);
        Dd { hi, lo }
    }
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn fast_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}
