use serde::Serialize;

use super::{CarmaHawkes, ModelError, ModelSpec};
use crate::quad;

/// Points in the kernel non-negativity grid (including `t = 0`).
pub const KERNEL_GRID_POINTS: usize = 4000;

/// Kernel values below this count as negative.
pub const KERNEL_NEGATIVITY_THRESHOLD: f64 = -1e-12;

/// The grid spans `[0, KERNEL_GRID_SPAN / |decay|]`.
const KERNEL_GRID_SPAN: f64 = 20.0;

/// The branching quadrature spans `[0, QUADRATURE_SPAN / |decay|]`.
const QUADRATURE_SPAN: f64 = 50.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum ValidationIssue {
    NonStationary { branching: f64, decay: f64 },
    KernelNegative { kernel_min: f64 },
    DegenerateEigenvalues { block: usize, message: String },
    RootFindingFailure { block: usize, message: String },
    InvalidSpec { message: String },
}

/// Admissibility summary for a model.
///
/// Numeric fields are `None` when the spectral decomposition itself failed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub components: usize,
    /// Closed-form `∫h_ij`; a 1×1 matrix for univariate models.
    pub branching_matrix: Option<Vec<Vec<f64>>>,
    /// Numerical quadrature of each kernel, as a cross-check.
    pub branching_quadrature: Option<Vec<Vec<f64>>>,
    /// Spectral radius of the branching matrix.
    pub branching: Option<f64>,
    pub decay: Option<f64>,
    pub kernel_min: Option<f64>,
    /// Per block, `[re, im]` of each eigenvalue.
    pub eigenvalues: Option<Vec<Vec<[f64; 2]>>>,
    /// Dominating-intensity jump per mark.
    pub bound_constants: Option<Vec<f64>>,
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub(super) fn empty(components: usize) -> Self {
        Self {
            components,
            branching_matrix: None,
            branching_quadrature: None,
            branching: None,
            decay: None,
            kernel_min: None,
            eigenvalues: None,
            bound_constants: None,
            issues: Vec::new(),
        }
    }

    pub fn is_admissible(&self) -> bool {
        self.issues.is_empty()
    }
}

/// Checks stationarity, kernel non-negativity and eigenvalue distinctness.
/// Failures are reported as issues, never as errors.
pub fn validate(spec: &ModelSpec) -> ValidationReport {
    match CarmaHawkes::new(spec.clone()) {
        Ok(model) => model.report().clone(),
        Err(err) => {
            let mut report = ValidationReport::empty(spec.components());
            report.issues.push(issue_from_error(err));
            report
        }
    }
}

pub(crate) fn issue_from_error(err: ModelError) -> ValidationIssue {
    use crate::spectral::SpectralError;
    match err {
        ModelError::Spectral { block, source } => match source {
            SpectralError::DegenerateEigenvalues { .. } => ValidationIssue::DegenerateEigenvalues {
                block,
                message: source.to_string(),
            },
            _ => ValidationIssue::RootFindingFailure {
                block,
                message: source.to_string(),
            },
        },
        other => ValidationIssue::InvalidSpec {
            message: other.to_string(),
        },
    }
}

pub(super) fn compute_report(model: &CarmaHawkes) -> ValidationReport {
    let n = model.components();
    let g = model.branching_matrix();
    let branching = spectral_radius(&g);
    let decay = model.bound_constants().decay;

    let mut quadrature = vec![vec![f64::NAN; n]; n];
    let mut kernel_min = f64::INFINITY;
    for j in 1..=n {
        let block_decay = model.spectral(j).decay();
        let grid = kernel_grid(block_decay);
        for i in 1..=n {
            for &t in &grid {
                kernel_min = kernel_min.min(model.kernel_value(i, j, t));
            }
            if block_decay < 0.0 {
                let upper = QUADRATURE_SPAN / block_decay.abs();
                quadrature[i - 1][j - 1] =
                    quad::integrate(|t| model.kernel_value(i, j, t), 0.0, upper, 1e-11);
            }
        }
    }

    let mut issues = Vec::new();
    if !(branching < 1.0 && decay < 0.0) {
        issues.push(ValidationIssue::NonStationary { branching, decay });
    }
    if kernel_min < KERNEL_NEGATIVITY_THRESHOLD {
        issues.push(ValidationIssue::KernelNegative { kernel_min });
    }

    let eigenvalues = (1..=n)
        .map(|j| {
            model
                .spectral(j)
                .eigenvalues()
                .iter()
                .map(|z| [z.re, z.im])
                .collect()
        })
        .collect();

    ValidationReport {
        components: n,
        branching_matrix: Some(g),
        branching_quadrature: Some(quadrature),
        branching: Some(branching),
        decay: Some(decay),
        kernel_min: Some(kernel_min),
        eigenvalues: Some(eigenvalues),
        bound_constants: Some(model.bound_constants().jumps[..n].to_vec()),
        issues,
    }
}

/// `t = 0` followed by log-spaced points up to `20 / |decay|`.
pub(crate) fn kernel_grid(decay: f64) -> Vec<f64> {
    let upper = if decay < 0.0 {
        KERNEL_GRID_SPAN / decay.abs()
    } else {
        KERNEL_GRID_SPAN
    };
    let lower = upper * 1e-6;
    let steps = (KERNEL_GRID_POINTS - 2) as f64;
    let ratio = (upper / lower).ln() / steps;
    std::iter::once(0.0)
        .chain((0..KERNEL_GRID_POINTS - 1).map(|k| lower * (ratio * k as f64).exp()))
        .collect()
}

fn spectral_radius(g: &[Vec<f64>]) -> f64 {
    match g.len() {
        1 => g[0][0].abs(),
        _ => {
            let tr = g[0][0] + g[1][1];
            let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
            let disc = 0.25 * tr * tr - det;
            if disc >= 0.0 {
                let s = disc.sqrt();
                (0.5 * tr + s).abs().max((0.5 * tr - s).abs())
            } else {
                det.sqrt()
            }
        }
    }
}
