use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A source of i.i.d. uniforms on the open interval `(0, 1)`.
pub trait UniformSource {
    fn next_uniform(&mut self) -> f64;
}

/// Seeded ChaCha8 stream.
///
/// The seed is expanded with `SeedableRng::seed_from_u64` and each uniform is
/// drawn with rand's `Open01` distribution, so output never hits 0 or 1 and is
/// reproducible bit for bit on every platform.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Stream for replication `index` of a batch started at `seed_base`.
    pub fn for_replication(seed_base: u64, index: u64) -> Self {
        Self::new(seed_base.wrapping_add(index))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

impl UniformSource for RngStream {
    #[inline]
    fn next_uniform(&mut self) -> f64 {
        self.inner.sample(Open01)
    }
}

/// Replays a fixed list of uniforms; for hand-traced runs.
///
/// Panics when the script is exhausted.
#[derive(Debug, Clone)]
pub struct ScriptedUniforms {
    values: Vec<f64>,
    pos: usize,
}

impl ScriptedUniforms {
    pub fn new(values: Vec<f64>) -> Self {
        assert!(
            values.iter().all(|&u| u > 0.0 && u < 1.0),
            "scripted uniforms must lie in (0, 1)"
        );
        Self { values, pos: 0 }
    }

    pub fn consumed(&self) -> usize {
        self.pos
    }
}

impl UniformSource for ScriptedUniforms {
    fn next_uniform(&mut self) -> f64 {
        let u = *self
            .values
            .get(self.pos)
            .unwrap_or_else(|| panic!("scripted uniforms exhausted after {} draws", self.pos));
        self.pos += 1;
        u
    }
}
