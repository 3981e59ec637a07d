//! Reference parameter sets: three univariate and three bivariate models.

use std::f64::consts::PI;

use crate::model::{BivariateConfig, BivariateSpec, ModelSpec, UnivariateSpec};

/// Exponential Hawkes: `μ = 0.3`, `b = [1]`, `a = [3]`.
pub fn exponential_hawkes() -> ModelSpec {
    ModelSpec::Univariate(UnivariateSpec::new(0.3, vec![3.0], vec![1.0]).expect("valid preset"))
}

/// CARMA(2,1): `μ = 0.3`, `b = [1, 0.3]`, `a = [3, 2]`.
pub fn carma21() -> ModelSpec {
    ModelSpec::Univariate(
        UnivariateSpec::new(0.3, vec![3.0, 2.0], vec![1.0, 0.3]).expect("valid preset"),
    )
}

/// CARMA(3,1): `μ = 0.3`, `b = [0.2, 0.3]`,
/// `a = [1.3, 0.34 + π²/4, 0.025 + 0.025π²]`.
pub fn carma31() -> ModelSpec {
    let pi2 = PI * PI;
    ModelSpec::Univariate(
        UnivariateSpec::new(
            0.3,
            vec![1.3, 0.34 + pi2 / 4.0, 0.025 + 0.025 * pi2],
            vec![0.2, 0.3],
        )
        .expect("valid preset"),
    )
}

/// Two independent exponential Hawkes processes, `p = [1, 1]`.
pub fn bivariate_independent() -> ModelSpec {
    bivariate(BivariateConfig {
        mu: [0.3, 0.3],
        a1: vec![3.0],
        a2: vec![2.0],
        b11: vec![1.0],
        b12: vec![],
        b21: vec![],
        b22: vec![1.0],
    })
}

/// Cross-exciting model with `p = [2, 1]`, `q = [1, 0, 0, 0]`.
pub fn bivariate_cross_21() -> ModelSpec {
    bivariate(BivariateConfig {
        mu: [0.3, 0.3],
        a1: vec![3.0, 2.0],
        a2: vec![4.0],
        b11: vec![1.0, 0.7],
        b12: vec![1.0],
        b21: vec![1.0],
        b22: vec![0.3],
    })
}

/// Cross-exciting model with `p = [1, 2]`, `q = [0, 1, 0, 1]`.
///
/// Its `b12` and `b22` kernels integrate to zero and dip below zero, so the
/// model fails the non-negativity check and must be simulated with the
/// validation override.
pub fn bivariate_cross_12() -> ModelSpec {
    bivariate(BivariateConfig {
        mu: [0.3, 0.3],
        a1: vec![1.0],
        a2: vec![4.0, 2.0],
        b11: vec![0.5],
        b12: vec![0.0, 0.8],
        b21: vec![0.0],
        b22: vec![0.0, 1.0],
    })
}

/// All six sets with short names, univariate first.
pub fn all() -> Vec<(&'static str, ModelSpec)> {
    vec![
        ("hawkes", exponential_hawkes()),
        ("carma21", carma21()),
        ("carma31", carma31()),
        ("bivariate_independent", bivariate_independent()),
        ("bivariate_cross_21", bivariate_cross_21()),
        ("bivariate_cross_12", bivariate_cross_12()),
    ]
}

fn bivariate(cfg: BivariateConfig) -> ModelSpec {
    ModelSpec::Bivariate(BivariateSpec::new(cfg).expect("valid preset"))
}
