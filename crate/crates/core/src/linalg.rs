//! Real-vector primitives, orthogonal projection and seeded Gaussian sampling.
//!
//! Every random quantity in the crate is drawn from a [`SeededRng`], a ChaCha8
//! stream addressed by `(root_seed, stream_id)`. ChaCha is counter based, so a
//! stream can be re-created from its address alone and trials can run in any
//! order on any number of threads.

use std::ops::Deref;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for floating-point comparisons.
pub const REL_TOL: f64 = 1e-9;

/// A finite real vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct RealVec(Vec<f64>);

impl RealVec {
    /// Wraps `entries`, rejecting NaN and infinite values.
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if let Some(i) = entries.iter().position(|v| !v.is_finite()) {
            return Err(Error::param(format!(
                "vector entry {i} is not finite ({})",
                entries[i]
            )));
        }
        Ok(RealVec(entries))
    }

    pub fn zeros(n: usize) -> Self {
        RealVec(vec![0.0; n])
    }

    /// Internal constructor for values produced by finite arithmetic.
    pub(crate) fn from_raw(entries: Vec<f64>) -> Self {
        debug_assert!(entries.iter().all(|v| v.is_finite()));
        RealVec(entries)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Inner product; panics on a length mismatch. Use [`inner`] for the
    /// checked version.
    pub fn dot(&self, other: &RealVec) -> f64 {
        assert_eq!(self.len(), other.len(), "dot: length mismatch");
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn add(&self, other: &RealVec) -> RealVec {
        assert_eq!(self.len(), other.len(), "add: length mismatch");
        RealVec(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &RealVec) -> RealVec {
        assert_eq!(self.len(), other.len(), "sub: length mismatch");
        RealVec(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn scaled(&self, c: f64) -> RealVec {
        RealVec(self.0.iter().map(|a| a * c).collect())
    }

    /// `self + c * other`.
    pub fn add_scaled(&self, c: f64, other: &RealVec) -> RealVec {
        assert_eq!(self.len(), other.len(), "add_scaled: length mismatch");
        RealVec(self.0.iter().zip(&other.0).map(|(a, b)| a + c * b).collect())
    }

    pub fn dist_sq(&self, other: &RealVec) -> f64 {
        assert_eq!(self.len(), other.len(), "dist_sq: length mismatch");
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }
}

impl Deref for RealVec {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for RealVec {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        RealVec::new(v)
    }
}

impl From<RealVec> for Vec<f64> {
    fn from(v: RealVec) -> Self {
        v.0
    }
}

fn check_len(u: &RealVec, v: &RealVec) -> Result<()> {
    if u.len() != v.len() {
        return Err(Error::Dimension {
            expected: u.len(),
            got: v.len(),
        });
    }
    Ok(())
}

/// Euclidean inner product.
pub fn inner(u: &RealVec, v: &RealVec) -> Result<f64> {
    check_len(u, v)?;
    Ok(u.dot(v))
}

/// Decomposes `s = -alpha * z + s_perp` with `s_perp` orthogonal to `z`.
pub fn project_perp(s: &RealVec, z: &RealVec) -> Result<(f64, RealVec)> {
    check_len(s, z)?;
    let zz = z.norm_sq();
    if zz == 0.0 {
        return Err(Error::Degenerate(
            "cannot project onto the complement of a zero vector".into(),
        ));
    }
    let alpha = -s.dot(z) / zz;
    Ok((alpha, s.add_scaled(alpha, z)))
}

/// splitmix64 finalizer; used to derive stream ids from structured labels.
fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Hashes a sequence of labels into a single stream id.
pub fn stream_id(labels: &[u64]) -> u64 {
    labels
        .iter()
        .fold(0x5EED_0F7C_0DE5u64, |acc, &l| mix64(acc ^ mix64(l)))
}

/// Reproducible random stream addressed by `(root_seed, stream_id)`.
#[derive(Clone, Debug)]
pub struct SeededRng {
    root_seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(root_seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(root_seed);
        inner.set_stream(stream_id);
        SeededRng {
            root_seed,
            stream_id,
            inner,
        }
    }

    /// Stream addressed by hashing `labels` (e.g. trial index and role).
    pub fn derive(root_seed: u64, labels: &[u64]) -> Self {
        SeededRng::new(root_seed, stream_id(labels))
    }

    pub fn root_seed(&self) -> u64 {
        self.root_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Uniform index in `0..bound`.
    pub fn index(&mut self, bound: usize) -> usize {
        self.inner.random_range(0..bound)
    }
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Draws `n` i.i.d. `N(0, variance)` entries.
pub fn sample_gaussian(n: usize, variance: f64, rng: &mut SeededRng) -> Result<RealVec> {
    if !(variance >= 0.0) || !variance.is_finite() {
        return Err(Error::param(format!(
            "Gaussian variance must be finite and nonnegative, got {variance}"
        )));
    }
    let sd = variance.sqrt();
    Ok(RealVec::from_raw(
        (0..n).map(|_| sd * rng.standard_normal()).collect(),
    ))
}

/// Uniformly distributed unit vector in `R^n` (`n >= 1`).
pub fn sample_unit_vector(n: usize, rng: &mut SeededRng) -> RealVec {
    loop {
        let g: Vec<f64> = (0..n).map(|_| rng.standard_normal()).collect();
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            return RealVec::from_raw(g.into_iter().map(|v| v / norm).collect());
        }
    }
}

/// `|a - b| <= tol * max(1, |a|, |b|)`.
pub fn approx_eq(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * 1f64.max(a.abs()).max(b.abs())
}

/// Natural log of the volume of the unit ball in `R^n`.
pub fn ln_unit_ball_volume(n: usize) -> f64 {
    // V_0 = 1, V_1 = 2, V_n = V_{n-2} * 2 pi / n
    let mut ln_v = if n.is_multiple_of(2) { 0.0 } else { 2f64.ln() };
    let mut k = if n.is_multiple_of(2) { 2 } else { 3 };
    while k <= n {
        ln_v += (2.0 * std::f64::consts::PI / k as f64).ln();
        k += 2;
    }
    ln_v
}

pub fn unit_ball_volume(n: usize) -> f64 {
    ln_unit_ball_volume(n).exp()
}

/// Normal-approximation 95% interval for a binomial proportion, clamped to
/// `[0, 1]`.
pub fn binomial_ci95(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let p = successes as f64 / trials as f64;
    let half = 1.96 * (p * (1.0 - p) / trials as f64).sqrt();
    ((p - half).max(0.0), (p + half).min(1.0))
}
