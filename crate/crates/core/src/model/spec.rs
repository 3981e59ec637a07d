use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::spectral::{PolyCoeffs, SpectralError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecError {
    #[error("baseline intensity {name} must be finite and positive, got {value}")]
    NonPositiveBaseline { name: &'static str, value: f64 },
    #[error("autoregressive coefficients {name}: {source}")]
    InvalidAr {
        name: &'static str,
        #[source]
        source: SpectralError,
    },
    #[error("moving-average vector {name} has {len} entries but its order is {p} (need q < p)")]
    MaTooLong { name: &'static str, len: usize, p: usize },
    #[error("moving-average vector {name} has a non-finite entry")]
    NonFiniteMa { name: &'static str },
    #[error("moving-average vector b must be non-empty with b0 > 0, got {0:?}")]
    NonPositiveLeadingMa(Vec<f64>),
    #[error("malformed model file: {0}")]
    Parse(String),
}

/// Univariate model as written in a model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnivariateConfig {
    pub mu: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

/// Bivariate model as written in a model file.
///
/// `b11`, `b21` act on the state driven by the first component and have length
/// at most `p1`; `b12`, `b22` act on the state driven by the second component
/// and have length at most `p2`. An empty vector means no excitation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BivariateConfig {
    pub mu: [f64; 2],
    pub a1: Vec<f64>,
    pub a2: Vec<f64>,
    #[serde(default)]
    pub b11: Vec<f64>,
    #[serde(default)]
    pub b12: Vec<f64>,
    #[serde(default)]
    pub b21: Vec<f64>,
    #[serde(default)]
    pub b22: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ModelConfig {
    Univariate(UnivariateConfig),
    Bivariate(BivariateConfig),
}

/// A validated CARMA(p,q)-Hawkes intensity.
#[derive(Debug, Clone, PartialEq)]
pub struct UnivariateSpec {
    mu: f64,
    a: PolyCoeffs,
    b: Vec<f64>,
    q: usize,
}

impl UnivariateSpec {
    /// `b` holds `b_0..b_q`; it is zero-padded to length `p`.
    pub fn new(mu: f64, a: Vec<f64>, b: Vec<f64>) -> Result<Self, SpecError> {
        check_baseline("mu", mu)?;
        let a = PolyCoeffs::new(a).map_err(|source| SpecError::InvalidAr { name: "a", source })?;
        if b.first().is_none_or(|&b0| !(b0 > 0.0)) {
            return Err(SpecError::NonPositiveLeadingMa(b));
        }
        let q = b.len() - 1;
        let b = pad_ma("b", b, a.order())?;
        Ok(Self { mu, a, b, q })
    }

    pub fn p(&self) -> usize {
        self.a.order()
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn a(&self) -> &PolyCoeffs {
        &self.a
    }

    /// MA coefficients zero-padded to length `p`.
    pub fn b(&self) -> &[f64] {
        &self.b
    }
}

/// Two mutually exciting CARMA(p,q)-Hawkes components.
#[derive(Debug, Clone, PartialEq)]
pub struct BivariateSpec {
    mu: [f64; 2],
    a1: PolyCoeffs,
    a2: PolyCoeffs,
    b11: Vec<f64>,
    b12: Vec<f64>,
    b21: Vec<f64>,
    b22: Vec<f64>,
    q: [Option<usize>; 4],
}

impl BivariateSpec {
    pub fn new(cfg: BivariateConfig) -> Result<Self, SpecError> {
        check_baseline("mu1", cfg.mu[0])?;
        check_baseline("mu2", cfg.mu[1])?;
        let a1 = PolyCoeffs::new(cfg.a1).map_err(|source| SpecError::InvalidAr { name: "a1", source })?;
        let a2 = PolyCoeffs::new(cfg.a2).map_err(|source| SpecError::InvalidAr { name: "a2", source })?;
        let (p1, p2) = (a1.order(), a2.order());
        let q = [
            cfg.b11.len().checked_sub(1),
            cfg.b12.len().checked_sub(1),
            cfg.b21.len().checked_sub(1),
            cfg.b22.len().checked_sub(1),
        ];
        Ok(Self {
            mu: cfg.mu,
            b11: pad_ma("b11", cfg.b11, p1)?,
            b12: pad_ma("b12", cfg.b12, p2)?,
            b21: pad_ma("b21", cfg.b21, p1)?,
            b22: pad_ma("b22", cfg.b22, p2)?,
            a1,
            a2,
            q,
        })
    }

    pub fn p(&self) -> [usize; 2] {
        [self.a1.order(), self.a2.order()]
    }

    /// `[q1, q12, q21, q2]`; `None` for a vector supplied empty.
    pub fn q(&self) -> [Option<usize>; 4] {
        self.q
    }

    pub fn mu(&self) -> [f64; 2] {
        self.mu
    }

    pub fn a1(&self) -> &PolyCoeffs {
        &self.a1
    }

    pub fn a2(&self) -> &PolyCoeffs {
        &self.a2
    }

    /// Padded MA vector acting on `component`'s intensity from the state
    /// driven by `source` (both 1-based).
    pub fn b(&self, component: usize, source: usize) -> &[f64] {
        match (component, source) {
            (1, 1) => &self.b11,
            (1, 2) => &self.b12,
            (2, 1) => &self.b21,
            (2, 2) => &self.b22,
            _ => panic!("bivariate indices are 1 or 2, got ({component}, {source})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Univariate(UnivariateSpec),
    Bivariate(BivariateSpec),
}

impl ModelSpec {
    pub fn from_config(cfg: ModelConfig) -> Result<Self, SpecError> {
        match cfg {
            ModelConfig::Univariate(u) => UnivariateSpec::new(u.mu, u.a, u.b).map(Self::Univariate),
            ModelConfig::Bivariate(b) => BivariateSpec::new(b).map(Self::Bivariate),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, SpecError> {
        let cfg: ModelConfig =
            serde_json::from_str(text).map_err(|e| SpecError::Parse(e.to_string()))?;
        Self::from_config(cfg)
    }

    /// Number of marks: 1 or 2.
    pub fn components(&self) -> usize {
        match self {
            Self::Univariate(_) => 1,
            Self::Bivariate(_) => 2,
        }
    }

    /// The model-file form with MA vectors zero-padded to full length.
    pub fn to_config(&self) -> ModelConfig {
        match self {
            Self::Univariate(u) => ModelConfig::Univariate(UnivariateConfig {
                mu: u.mu,
                a: u.a.as_slice().to_vec(),
                b: u.b.clone(),
            }),
            Self::Bivariate(b) => ModelConfig::Bivariate(BivariateConfig {
                mu: b.mu,
                a1: b.a1.as_slice().to_vec(),
                a2: b.a2.as_slice().to_vec(),
                b11: b.b11.clone(),
                b12: b.b12.clone(),
                b21: b.b21.clone(),
                b22: b.b22.clone(),
            }),
        }
    }

    /// Hex SHA-256 of the canonical padded JSON form; recorded in run metadata
    /// so a log can be matched against the model that produced it.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(&self.to_config()).expect("config serializes");
        Sha256::digest(canonical.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

fn check_baseline(name: &'static str, value: f64) -> Result<(), SpecError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(SpecError::NonPositiveBaseline { name, value })
    }
}

fn pad_ma(name: &'static str, mut b: Vec<f64>, p: usize) -> Result<Vec<f64>, SpecError> {
    if b.len() > p {
        return Err(SpecError::MaTooLong { name, len: b.len(), p });
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(SpecError::NonFiniteMa { name });
    }
    b.resize(p, 0.0);
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn univariate_padding_and_orders() {
        let s = UnivariateSpec::new(0.3, vec![3.0, 2.0], vec![1.0]).unwrap();
        assert_eq!(s.b(), &[1.0, 0.0]);
        assert_eq!((s.p(), s.q()), (2, 0));
        let s = UnivariateSpec::new(0.3, vec![3.0, 2.0], vec![1.0, 0.3]).unwrap();
        assert_eq!((s.p(), s.q()), (2, 1));
    }

    #[test]
    fn univariate_rejections() {
        assert!(matches!(
            UnivariateSpec::new(0.0, vec![3.0], vec![1.0]),
            Err(SpecError::NonPositiveBaseline { .. })
        ));
        assert!(matches!(
            UnivariateSpec::new(0.3, vec![3.0], vec![-1.0]),
            Err(SpecError::NonPositiveLeadingMa(_))
        ));
        assert!(matches!(
            UnivariateSpec::new(0.3, vec![3.0], vec![]),
            Err(SpecError::NonPositiveLeadingMa(_))
        ));
        assert!(matches!(
            UnivariateSpec::new(0.3, vec![3.0], vec![1.0, 0.5]),
            Err(SpecError::MaTooLong { .. })
        ));
        assert!(matches!(
            UnivariateSpec::new(0.3, vec![], vec![1.0]),
            Err(SpecError::InvalidAr { .. })
        ));
    }

    #[test]
    fn parses_both_schemas() {
        let u = ModelSpec::from_json(r#"{"type":"univariate","mu":0.3,"a":[3,2],"b":[1,0.3]}"#)
            .unwrap();
        assert_eq!(u.components(), 1);
        let b = ModelSpec::from_json(
            r#"{"type":"bivariate","mu":[0.3,0.3],"a1":[3,2],"a2":[4],
                "b11":[1,0.7],"b12":[1],"b21":[1],"b22":[0.3]}"#,
        )
        .unwrap();
        let ModelSpec::Bivariate(bs) = &b else { panic!() };
        assert_eq!(bs.p(), [2, 1]);
        assert_eq!(bs.q(), [Some(1), Some(0), Some(0), Some(0)]);
        assert_eq!(bs.b(2, 1), &[1.0, 0.0]);
    }

    #[test]
    fn malformed_files_rejected() {
        assert!(matches!(ModelSpec::from_json("{"), Err(SpecError::Parse(_))));
        assert!(matches!(
            ModelSpec::from_json(r#"{"type":"trivariate","mu":1}"#),
            Err(SpecError::Parse(_))
        ));
        assert!(matches!(
            ModelSpec::from_json(r#"{"type":"univariate","mu":0.3,"a":[3],"b":[1],"c":2}"#),
            Err(SpecError::Parse(_))
        ));
    }

    #[test]
    fn hash_ignores_explicit_trailing_zeros() {
        let x = ModelSpec::from_json(r#"{"type":"univariate","mu":0.3,"a":[3,2],"b":[1]}"#).unwrap();
        let y = ModelSpec::from_json(r#"{"type":"univariate","mu":0.3,"a":[3,2],"b":[1,0]}"#).unwrap();
        let z = ModelSpec::from_json(r#"{"type":"univariate","mu":0.4,"a":[3,2],"b":[1]}"#).unwrap();
        assert_eq!(x.hash(), y.hash());
        assert_ne!(x.hash(), z.hash());
        assert_eq!(x.hash().len(), 64);
    }
}
