//! CARMA(p,q)-Hawkes intensities, exact state evolution and compensators.
//!
//! Both the univariate and the bivariate model are handled by one
//! representation: a list of autoregressive *blocks*, block `j` being the
//! state driven by events of mark `j`, and for every pair (component `i`,
//! block `j`) an MA vector `b_ij`. The intensity of component `i` is
//!
//! ```text
//! λ_i(t) = μ_i + Σ_j b_ij^T e^{A_j (t - t_e)} x_j(t_e)
//! ```
//!
//! where `t_e` is the last event time. The state of each block is kept in
//! spectral coordinates `c_j = S_j⁻¹ x_j`, which turns every propagation
//! into an element-wise product with `e^{λ_jk Δt}`.

mod spec;
mod validate;

pub use spec::{
    BivariateConfig, BivariateSpec, ModelConfig, ModelSpec, SpecError, UnivariateConfig,
    UnivariateSpec,
};
pub use validate::{validate, ValidationIssue, ValidationReport, KERNEL_GRID_POINTS};

use num_complex::Complex64;
use thiserror::Error;

use crate::spectral::{self, PolyCoeffs, SpectralData, SpectralError};

/// Upper limit on the number of marks.
pub const MAX_COMPONENTS: usize = 2;

/// Slack allowed below the baseline before an admissible model reports a
/// negative intensity.
pub const INTENSITY_TOLERANCE: f64 = 1e-9;

// Grid spacing, relative to the fastest mode, for locating negative intensity.
const NEGATIVE_PART_STEP: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("spectral decomposition of block {block}: {source}")]
    Spectral {
        block: usize,
        #[source]
        source: SpectralError,
    },
    #[error("time {t} precedes the last event at {last_event}")]
    TimeBeforeLastEvent { t: f64, last_event: f64 },
    #[error("invalid interval [{t0}, {t1}]")]
    InvalidInterval { t0: f64, t1: f64 },
    #[error("mark {mark} is out of range for a model with {components} component(s)")]
    InvalidMark { mark: u8, components: usize },
    #[error("intensity of component {component} is {value}, below its baseline {baseline}")]
    NegativeIntensity {
        component: usize,
        value: f64,
        baseline: f64,
    },
    #[error("state overflow while propagating to t = {t}")]
    Overflow { t: f64 },
}

/// Per-component intensities (or compensator increments).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intensity {
    values: [f64; MAX_COMPONENTS],
    len: usize,
}

impl Intensity {
    fn zeros(len: usize) -> Self {
        Self {
            values: [0.0; MAX_COMPONENTS],
            len,
        }
    }

    /// Value for a 1-based component.
    pub fn get(&self, component: usize) -> f64 {
        assert!(component >= 1 && component <= self.len, "component {component} out of range");
        self.values[component - 1]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values[..self.len]
    }

    pub fn total(&self) -> f64 {
        self.as_slice().iter().sum()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

/// Solution `X_t` of the state equation at the most recent event,
/// inclusive of that event's jump.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessState {
    x: Vec<f64>,
    coords: Vec<Complex64>,
    last_event_time: f64,
}

impl ProcessState {
    /// Concatenated state vector (`p`, or `p1 + p2` entries).
    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn last_event_time(&self) -> f64 {
        self.last_event_time
    }
}

#[derive(Debug, Clone)]
struct Block {
    spectral: SpectralData,
    offset: usize,
    // weights[k][i] = b_ij(λ_k) for component i
    weights: Vec<[Complex64; MAX_COMPONENTS]>,
}

/// Dominating-intensity constants: decay rate, baseline sum and per-mark jump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundConstants {
    pub decay: f64,
    pub base: f64,
    pub jumps: [f64; MAX_COMPONENTS],
    pub components: usize,
}

/// A CARMA(p,q)-Hawkes process ready for evaluation and simulation.
#[derive(Debug, Clone)]
pub struct CarmaHawkes {
    spec: ModelSpec,
    mu: [f64; MAX_COMPONENTS],
    blocks: Vec<Block>,
    bound: BoundConstants,
    report: ValidationReport,
    admissible: bool,
}

impl CarmaHawkes {
    pub fn new(spec: ModelSpec) -> Result<Self, ModelError> {
        let n = spec.components();
        let polys: Vec<&PolyCoeffs> = match &spec {
            ModelSpec::Univariate(u) => vec![u.a()],
            ModelSpec::Bivariate(b) => vec![b.a1(), b.a2()],
        };
        let mut blocks = Vec::with_capacity(polys.len());
        let mut offset = 0;
        for (j, a) in polys.into_iter().enumerate() {
            let spectral = SpectralData::decompose(a)
                .map_err(|source| ModelError::Spectral { block: j + 1, source })?;
            let mut weights = vec![[Complex64::new(0.0, 0.0); MAX_COMPONENTS]; spectral.order()];
            for i in 0..n {
                let b = ma_vector(&spec, i + 1, j + 1);
                for (k, w) in spectral.ma_at_eigenvalues(b).expect("padded").into_iter().enumerate() {
                    weights[k][i] = w;
                }
            }
            let p = spectral.order();
            blocks.push(Block {
                spectral,
                offset,
                weights,
            });
            offset += p;
        }

        let mut mu = [0.0; MAX_COMPONENTS];
        match &spec {
            ModelSpec::Univariate(u) => mu[0] = u.mu(),
            ModelSpec::Bivariate(b) => mu = b.mu(),
        }

        let bound = compute_bound_constants(&spec, &blocks, &mu)?;
        let mut model = Self {
            spec,
            mu,
            blocks,
            bound,
            report: ValidationReport::empty(n),
            admissible: false,
        };
        model.report = validate::compute_report(&model);
        model.admissible = model.report.issues.is_empty();
        Ok(model)
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        Self::new(ModelSpec::from_json(text)?)
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn components(&self) -> usize {
        self.spec.components()
    }

    /// Baseline of a 1-based component.
    pub fn mu(&self, component: usize) -> f64 {
        self.mu[component - 1]
    }

    /// Spectral data of the block driven by `mark`.
    pub fn spectral(&self, mark: usize) -> &SpectralData {
        &self.blocks[mark - 1].spectral
    }

    pub fn bound_constants(&self) -> BoundConstants {
        self.bound
    }

    pub fn report(&self) -> &ValidationReport {
        &self.report
    }

    /// True when validation raised no issue (stationary, non-negative kernels).
    pub fn is_admissible(&self) -> bool {
        self.admissible
    }

    /// Padded MA vector for (component, source), both 1-based.
    pub fn ma(&self, component: usize, source: usize) -> &[f64] {
        ma_vector(&self.spec, component, source)
    }

    /// `X_0 = 0` with no events.
    pub fn initial_state(&self) -> ProcessState {
        let dim: usize = self.blocks.iter().map(|b| b.spectral.order()).sum();
        ProcessState {
            x: vec![0.0; dim],
            coords: vec![Complex64::new(0.0, 0.0); dim],
            last_event_time: 0.0,
        }
    }

    /// Kernel `h_ij(t) = b_ij^T e^{A_j t} e_j`, the effect on component `i` of
    /// an event of mark `j` that occurred `t` ago.
    pub fn kernel_value(&self, component: usize, source: usize, t: f64) -> f64 {
        self.kernel_value_complex(component, source, t).re
    }

    pub fn kernel_value_complex(&self, component: usize, source: usize, t: f64) -> Complex64 {
        let block = &self.blocks[source - 1];
        block
            .weights
            .iter()
            .zip(block.spectral.eigenvalues())
            .zip(block.spectral.sinv_e())
            .map(|((w, &lambda), &s)| w[component - 1] * s * (lambda * t).exp())
            .sum()
    }

    /// `λ_t = μ + B e^{Ā (t - t_e)} X_{t_e}` for `t ≥ t_e`.
    pub fn intensity_at(&self, state: &ProcessState, t: f64) -> Result<Intensity, ModelError> {
        if !(t >= state.last_event_time) {
            return Err(ModelError::TimeBeforeLastEvent {
                t,
                last_event: state.last_event_time,
            });
        }
        let out = self.intensity_unchecked(state, t);
        if self.admissible {
            for (i, &v) in out.as_slice().iter().enumerate() {
                if !(v >= self.mu[i] - INTENSITY_TOLERANCE) {
                    return Err(ModelError::NegativeIntensity {
                        component: i + 1,
                        value: v,
                        baseline: self.mu[i],
                    });
                }
            }
        }
        Ok(out)
    }

    pub(crate) fn intensity_unchecked(&self, state: &ProcessState, t: f64) -> Intensity {
        let n = self.components();
        let dt = t - state.last_event_time;
        let mut out = Intensity::zeros(n);
        out.values = self.mu;
        for block in &self.blocks {
            let coords = &state.coords[block.offset..block.offset + block.spectral.order()];
            for ((c, &lambda), w) in coords.iter().zip(block.spectral.eigenvalues()).zip(&block.weights) {
                let f = c * decay_factor(lambda, dt);
                for i in 0..n {
                    out.values[i] += (w[i] * f).re;
                }
            }
        }
        out
    }

    /// Propagates the state to `t` and adds the jump `e_mark`.
    pub fn apply_event(
        &self,
        state: &ProcessState,
        t: f64,
        mark: u8,
    ) -> Result<ProcessState, ModelError> {
        let mut next = state.clone();
        self.apply_event_mut(&mut next, t, mark)?;
        Ok(next)
    }

    pub fn apply_event_mut(
        &self,
        state: &mut ProcessState,
        t: f64,
        mark: u8,
    ) -> Result<(), ModelError> {
        let n = self.components();
        if mark == 0 || mark as usize > n {
            return Err(ModelError::InvalidMark { mark, components: n });
        }
        if !(t >= state.last_event_time) || !t.is_finite() {
            return Err(ModelError::TimeBeforeLastEvent {
                t,
                last_event: state.last_event_time,
            });
        }
        let dt = t - state.last_event_time;
        for (j, block) in self.blocks.iter().enumerate() {
            let range = block.offset..block.offset + block.spectral.order();
            let coords = &mut state.coords[range.clone()];
            for (c, &lambda) in coords.iter_mut().zip(block.spectral.eigenvalues()) {
                *c *= decay_factor(lambda, dt);
            }
            if j + 1 == mark as usize {
                for (c, s) in coords.iter_mut().zip(block.spectral.sinv_e()) {
                    *c += s;
                }
            }
            if coords.iter().any(|c| !c.is_finite()) {
                return Err(ModelError::Overflow { t });
            }
            let x = block.spectral.from_spectral(coords).expect("block dimension");
            for (dst, z) in state.x[range].iter_mut().zip(x) {
                *dst = z.re;
            }
        }
        state.last_event_time = t;
        Ok(())
    }

    /// `Λ_i(t1) - Λ_i(t0) = ∫_{t0}^{t1} λ_i(s) ds` in closed form, assuming no
    /// events in `(t0, t1)`.
    pub fn compensator_increment(
        &self,
        state: &ProcessState,
        t0: f64,
        t1: f64,
    ) -> Result<Intensity, ModelError> {
        if !(t0 >= state.last_event_time) {
            return Err(ModelError::TimeBeforeLastEvent {
                t: t0,
                last_event: state.last_event_time,
            });
        }
        if !(t1 >= t0) || !t1.is_finite() {
            return Err(ModelError::InvalidInterval { t0, t1 });
        }
        let n = self.components();
        let (s0, s1) = (t0 - state.last_event_time, t1 - state.last_event_time);
        let mut out = Intensity::zeros(n);
        for i in 0..n {
            out.values[i] = self.mu[i] * (t1 - t0);
        }
        for block in &self.blocks {
            let coords = &state.coords[block.offset..block.offset + block.spectral.order()];
            for ((c, &lambda), w) in coords.iter().zip(block.spectral.eigenvalues()).zip(&block.weights) {
                let integral = if lambda == Complex64::new(0.0, 0.0) {
                    Complex64::new(t1 - t0, 0.0)
                } else {
                    (decay_factor(lambda, s1) - decay_factor(lambda, s0)) / lambda
                };
                let f = c * integral;
                for i in 0..n {
                    out.values[i] += (w[i] * f).re;
                }
            }
        }
        Ok(out)
    }

    /// `∫_{t0}^{t1} max(λ_i(s), 0) ds`, the compensator of the process the
    /// thinning loop actually simulates. Equal to [`Self::compensator_increment`]
    /// for admissible models; otherwise the negative part is located on a grid
    /// and integrated numerically.
    pub fn floored_compensator_increment(
        &self,
        state: &ProcessState,
        t0: f64,
        t1: f64,
    ) -> Result<Intensity, ModelError> {
        let mut out = self.compensator_increment(state, t0, t1)?;
        if self.admissible {
            return Ok(out);
        }
        let fastest = self
            .blocks
            .iter()
            .flat_map(|b| b.spectral.eigenvalues())
            .map(|l| l.norm())
            .fold(1.0, f64::max);
        let step = NEGATIVE_PART_STEP / fastest;
        for i in 0..self.components() {
            // past `quiet`, |λ_i - μ_i| < μ_i, so λ_i stays positive
            let quiet = self.settling_time(state, i).min(t1);
            let mut a = t0;
            while a < quiet {
                let b = (a + step).min(quiet);
                let neg = |s: f64| (-self.intensity_unchecked(state, s).values[i]).max(0.0);
                if neg(a) > 0.0 || neg(0.5 * (a + b)) > 0.0 || neg(b) > 0.0 {
                    out.values[i] += crate::quad::integrate(neg, a, b, 1e-13);
                }
                a = b;
            }
        }
        Ok(out)
    }

    // First time after which Σ_k |w_k c_k| e^{Re λ_k (t - t_e)} < μ_i.
    fn settling_time(&self, state: &ProcessState, i: usize) -> f64 {
        let terms: Vec<(f64, f64)> = self
            .blocks
            .iter()
            .flat_map(|block| {
                let coords = &state.coords[block.offset..block.offset + block.spectral.order()];
                coords
                    .iter()
                    .zip(block.spectral.eigenvalues())
                    .zip(&block.weights)
                    .map(move |((c, l), w)| ((w[i] * c).norm(), l.re))
            })
            .collect();
        let envelope = |dt: f64| terms.iter().map(|&(m, r)| m * (r * dt).exp()).sum::<f64>();
        if envelope(0.0) < self.mu[i] {
            return state.last_event_time;
        }
        if terms.iter().any(|&(m, r)| m > 0.0 && r >= 0.0) {
            return f64::INFINITY;
        }
        let mut hi = 1.0;
        while envelope(hi) >= self.mu[i] {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if envelope(mid) >= self.mu[i] {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        state.last_event_time + hi
    }

    /// Branching matrix `G_ij = ∫_0^∞ h_ij = b_ij^(0) / a_{j,p_j}`.
    pub fn branching_matrix(&self) -> Vec<Vec<f64>> {
        let n = self.components();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let a = self.blocks[j].spectral.coeffs().as_slice();
                        self.ma(i + 1, j + 1)[0] / a[a.len() - 1]
                    })
                    .collect()
            })
            .collect()
    }

    /// Long-run event rates `(I - G)⁻¹ μ`, or `None` when not stationary.
    pub fn stationary_rates(&self) -> Option<Vec<f64>> {
        let stationary = !self
            .report
            .issues
            .iter()
            .any(|i| matches!(i, ValidationIssue::NonStationary { .. }));
        if !stationary {
            return None;
        }
        let g = self.branching_matrix();
        match self.components() {
            1 => Some(vec![self.mu[0] / (1.0 - g[0][0])]),
            _ => {
                let (m00, m01, m10, m11) = (1.0 - g[0][0], -g[0][1], -g[1][0], 1.0 - g[1][1]);
                let det = m00 * m11 - m01 * m10;
                Some(vec![
                    (m11 * self.mu[0] - m01 * self.mu[1]) / det,
                    (-m10 * self.mu[0] + m00 * self.mu[1]) / det,
                ])
            }
        }
    }

    /// Jump sizes `‖1^T B S‖₂ ‖S⁻¹ ē_m‖₂` recomputed with dense Vandermonde
    /// blocks and elimination; an independent route to [`BoundConstants::jumps`].
    pub fn bound_jumps_norm_product(&self) -> [f64; MAX_COMPONENTS] {
        let row_sq: f64 = self
            .blocks
            .iter()
            .enumerate()
            .map(|(j, block)| {
                spectral::ma_row_norm_dense(&block.spectral, &summed_ma(&self.spec, j + 1))
                    .expect("padded")
                    .powi(2)
            })
            .sum();
        let mut jumps = [0.0; MAX_COMPONENTS];
        for (m, block) in self.blocks.iter().enumerate() {
            jumps[m] = row_sq.sqrt() * spectral::sinv_e_norm_dense(&block.spectral);
        }
        jumps
    }
}

#[inline]
fn decay_factor(lambda: Complex64, dt: f64) -> Complex64 {
    if lambda.im == 0.0 {
        Complex64::new((lambda.re * dt).exp(), 0.0)
    } else {
        (lambda * dt).exp()
    }
}

fn ma_vector(spec: &ModelSpec, component: usize, source: usize) -> &[f64] {
    match spec {
        ModelSpec::Univariate(u) => {
            assert!(component == 1 && source == 1, "univariate model has one component");
            u.b()
        }
        ModelSpec::Bivariate(b) => b.b(component, source),
    }
}

// Σ_i b_ij, the block-j slice of 1^T B.
fn summed_ma(spec: &ModelSpec, source: usize) -> Vec<f64> {
    let n = spec.components();
    let mut out = ma_vector(spec, 1, source).to_vec();
    for i in 2..=n {
        for (o, v) in out.iter_mut().zip(ma_vector(spec, i, source)) {
            *o += v;
        }
    }
    out
}

fn compute_bound_constants(
    spec: &ModelSpec,
    blocks: &[Block],
    mu: &[f64; MAX_COMPONENTS],
) -> Result<BoundConstants, ModelError> {
    let n = spec.components();
    let decay = blocks
        .iter()
        .map(|b| b.spectral.decay())
        .fold(f64::NEG_INFINITY, f64::max);
    let mut jumps = [0.0; MAX_COMPONENTS];
    match spec {
        ModelSpec::Univariate(u) => {
            jumps[0] = spectral::bound_constant(&blocks[0].spectral, u.b())
                .map_err(|source| ModelError::Spectral { block: 1, source })?;
        }
        ModelSpec::Bivariate(_) => {
            let mut row_sq = 0.0;
            for (j, block) in blocks.iter().enumerate() {
                let row = block.spectral.ma_at_eigenvalues(&summed_ma(spec, j + 1)).expect("padded");
                row_sq += spectral::l2_norm(&row).powi(2);
            }
            for (m, block) in blocks.iter().enumerate() {
                jumps[m] = row_sq.sqrt() * spectral::l2_norm(block.spectral.sinv_e());
            }
        }
    }
    Ok(BoundConstants {
        decay,
        base: mu[..n].iter().sum(),
        jumps,
        components: n,
    })
}
