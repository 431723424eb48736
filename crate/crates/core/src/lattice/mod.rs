//! Full-rank lattices: Construction-A builders, closest-point quantization,
//! sphere enumeration, point-count bounds and radii.
//!
//! A lattice is stored by its generator matrix (columns are basis vectors)
//! together with a QR factorization. Enumeration is Fincke-Pohst over the
//! triangular factor; Babai's nearest plane uses the same factor.

mod code;
mod radii;
mod spec;

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{ln_unit_ball_volume, RealVec};

pub use code::{is_prime, LinearCode};
pub use radii::LatticeRadii;
pub use spec::LatticeSpec;

/// Default cap on the number of points an enumeration may produce.
pub const DEFAULT_BUDGET: u64 = 10_000_000;
/// Largest dimension at which `quantize` runs exact enumeration.
pub const DEFAULT_EXACT_CVP_DIM: usize = 12;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Integer,
    ScaledInteger { scale: f64 },
    ConstructionA { q: u64, k: usize, rank: usize, scale: f64 },
    NestedFine { q: u64, k: usize, rank: usize },
    Explicit,
}

/// Result of a closest-point query.
#[derive(Clone, Debug, PartialEq)]
pub struct ClosestPoint {
    pub point: RealVec,
    pub coeffs: Vec<i64>,
    /// False when Babai's nearest plane was used above the exact cut-off.
    pub exact: bool,
}

/// Volume-based sandwich on the number of lattice points in a ball.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CountBounds {
    pub lower: f64,
    pub upper: f64,
    pub r_cov: f64,
    /// False when `r_cov` is only a sampled estimate.
    pub r_cov_exact: bool,
}

#[derive(Clone, Debug)]
pub struct Lattice {
    n: usize,
    basis: DMatrix<f64>,
    inverse: DMatrix<f64>,
    q_t: DMatrix<f64>,
    r: DMatrix<f64>,
    diagonal: Option<Vec<f64>>,
    ln_covolume: f64,
    provenance: Provenance,
    seed_code: Option<LinearCode>,
    nested_coarse: Option<Box<Lattice>>,
    exact_cvp_dim: usize,
    budget: u64,
    covering: OnceLock<Option<f64>>,
}

impl PartialEq for Lattice {
    fn eq(&self, other: &Self) -> bool {
        self.basis == other.basis
    }
}

impl Lattice {
    /// Lattice generated by the columns of `basis`.
    pub fn from_basis(basis: DMatrix<f64>) -> Result<Self> {
        Self::build(basis, Provenance::Explicit)
    }

    fn build(mut basis: DMatrix<f64>, provenance: Provenance) -> Result<Self> {
        let n = basis.nrows();
        if n == 0 || basis.ncols() != n {
            return Err(Error::Structure(format!(
                "basis must be square and nonempty, got {}x{}",
                basis.nrows(),
                basis.ncols()
            )));
        }
        if basis.iter().any(|v| !v.is_finite()) {
            return Err(Error::Structure("basis has non-finite entries".into()));
        }
        let is_diag = (0..n).all(|i| (0..n).all(|j| i == j || basis[(i, j)] == 0.0));
        if is_diag {
            for i in 0..n {
                basis[(i, i)] = basis[(i, i)].abs();
            }
        }
        let qr = basis.clone().qr();
        let r = qr.r();
        let q_t = qr.q().transpose();
        let max_col = (0..n)
            .map(|j| basis.column(j).norm())
            .fold(0.0f64, f64::max);
        let ln_covolume: f64 = (0..n).map(|i| r[(i, i)].abs().ln()).sum();
        // numerical rank deficiency shows up as a vanishing pivot
        let min_pivot = (0..n).map(|i| r[(i, i)].abs()).fold(f64::INFINITY, f64::min);
        if !ln_covolume.is_finite() || min_pivot <= 1e-12 * max_col {
            return Err(Error::Structure("basis is singular".into()));
        }
        let inverse = basis
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Structure("basis is singular".into()))?;
        let diagonal = is_diag.then(|| (0..n).map(|i| basis[(i, i)]).collect());
        Ok(Lattice {
            n,
            basis,
            inverse,
            q_t,
            r,
            diagonal,
            ln_covolume,
            provenance,
            seed_code: None,
            nested_coarse: None,
            exact_cvp_dim: DEFAULT_EXACT_CVP_DIM,
            budget: DEFAULT_BUDGET,
            covering: OnceLock::new(),
        })
    }

    /// `Z^n`.
    pub fn integer(n: usize) -> Result<Self> {
        Self::build(DMatrix::identity(n, n), Provenance::Integer)
    }

    /// `a Z^n`.
    pub fn scaled_integer(n: usize, a: f64) -> Result<Self> {
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::param(format!("scale must be positive, got {a}")));
        }
        Self::build(
            DMatrix::identity(n, n) * a,
            Provenance::ScaledInteger { scale: a },
        )
    }

    /// `scale * ((1/q) Phi(C) + Z^n)`.
    pub fn construction_a(code: &LinearCode, scale: f64) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::param(format!("scale must be positive, got {scale}")));
        }
        let integer = construction_a_integer_basis(code);
        let basis = integer.map(|v| v as f64 * scale / code.q() as f64);
        let mut l = Self::build(
            basis,
            Provenance::ConstructionA {
                q: code.q(),
                k: code.k(),
                rank: code.rank(),
                scale,
            },
        )?;
        l.seed_code = Some(code.clone());
        Ok(l)
    }

    /// Fine lattice `G0 ((1/q) Phi(C) + Z^n)` over the coarse lattice with
    /// generator `G0`. Returns `(fine, coarse)`.
    pub fn nested_construction_a(coarse: &Lattice, code: &LinearCode) -> Result<(Lattice, Lattice)> {
        if code.n() != coarse.n {
            return Err(Error::Dimension {
                expected: coarse.n,
                got: code.n(),
            });
        }
        let integer = construction_a_integer_basis(code);
        let inner = integer.map(|v| v as f64 / code.q() as f64);
        let basis = &coarse.basis * inner;
        let mut fine = Self::build(
            basis,
            Provenance::NestedFine {
                q: code.q(),
                k: code.k(),
                rank: code.rank(),
            },
        )?;
        fine.seed_code = Some(code.clone());
        fine.nested_coarse = Some(Box::new(coarse.clone()));
        fine.exact_cvp_dim = coarse.exact_cvp_dim;
        fine.budget = coarse.budget;
        Ok((fine, coarse.clone()))
    }

    /// `a * self`.
    pub fn scaled(&self, a: f64) -> Result<Self> {
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::param(format!("scale must be positive, got {a}")));
        }
        let provenance = match &self.provenance {
            Provenance::Integer => Provenance::ScaledInteger { scale: a },
            Provenance::ScaledInteger { scale } => Provenance::ScaledInteger { scale: scale * a },
            Provenance::ConstructionA { q, k, rank, scale } => Provenance::ConstructionA {
                q: *q,
                k: *k,
                rank: *rank,
                scale: scale * a,
            },
            _ => Provenance::Explicit,
        };
        let mut l = Self::build(&self.basis * a, provenance)?;
        l.exact_cvp_dim = self.exact_cvp_dim;
        l.budget = self.budget;
        if matches!(l.provenance, Provenance::ConstructionA { .. }) {
            l.seed_code = self.seed_code.clone();
        }
        Ok(l)
    }

    pub fn with_budget(mut self, budget: u64) -> Self {
        self.budget = budget;
        self
    }

    pub fn with_exact_cvp_dim(mut self, dim: usize) -> Self {
        self.exact_cvp_dim = dim;
        self
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn seed_code(&self) -> Option<&LinearCode> {
        self.seed_code.as_ref()
    }

    pub fn budget(&self) -> u64 {
        self.budget
    }

    pub fn exact_cvp_dim(&self) -> usize {
        self.exact_cvp_dim
    }

    /// Coordinate scales when the basis is diagonal.
    pub fn diagonal(&self) -> Option<&[f64]> {
        self.diagonal.as_deref()
    }

    pub fn ln_covolume(&self) -> f64 {
        self.ln_covolume
    }

    pub fn covolume(&self) -> f64 {
        self.ln_covolume.exp()
    }

    /// Normalized logarithmic density `(1/n) log2(1/covolume)`.
    pub fn nld(&self) -> f64 {
        -self.ln_covolume / (self.n as f64 * std::f64::consts::LN_2)
    }

    fn check(&self, x: &RealVec) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// `B u`.
    pub fn point(&self, u: &[i64]) -> RealVec {
        assert_eq!(u.len(), self.n);
        let mut out = vec![0.0; self.n];
        for (j, &uj) in u.iter().enumerate() {
            if uj != 0 {
                let c = uj as f64;
                for (i, o) in out.iter_mut().enumerate() {
                    *o += self.basis[(i, j)] * c;
                }
            }
        }
        RealVec::from_raw(out)
    }

    /// Real coordinates `B^{-1} x`.
    pub fn coordinates(&self, x: &RealVec) -> Result<Vec<f64>> {
        self.check(x)?;
        let v = &self.inverse * DVector::from_column_slice(x.as_slice());
        Ok(v.iter().copied().collect())
    }

    /// Integer coefficients of `x` if it is a lattice point (to 1e-6).
    pub fn coefficients(&self, x: &RealVec) -> Result<Option<Vec<i64>>> {
        let c = self.coordinates(x)?;
        let mut out = Vec::with_capacity(self.n);
        for v in c {
            let r = v.round();
            if (v - r).abs() > 1e-6 * r.abs().max(1.0) {
                return Ok(None);
            }
            out.push(r as i64);
        }
        Ok(Some(out))
    }

    pub fn contains(&self, x: &RealVec) -> Result<bool> {
        Ok(self.coefficients(x)?.is_some())
    }

    /// `Q^T x`, the center in the triangular frame.
    fn rotated(&self, x: &[f64]) -> Vec<f64> {
        let v = &self.q_t * DVector::from_column_slice(x);
        v.iter().copied().collect()
    }

    fn babai_coeffs(&self, y: &[f64]) -> Vec<i64> {
        let n = self.n;
        let mut u = vec![0i64; n];
        for i in (0..n).rev() {
            let mut s = y[i];
            for (j, &uj) in u.iter().enumerate().skip(i + 1) {
                s -= self.r[(i, j)] * uj as f64;
            }
            u[i] = (s / self.r[(i, i)] + 0.5).floor() as i64;
        }
        u
    }

    fn residual_sq(&self, y: &[f64], u: &[i64]) -> f64 {
        let n = self.n;
        (0..n)
            .map(|i| {
                let s: f64 = y[i] - (i..n).map(|j| self.r[(i, j)] * u[j] as f64).sum::<f64>();
                s * s
            })
            .sum()
    }

    /// Depth-first Fincke-Pohst enumeration of all `u` with
    /// `||y - R u||^2 <= *bound`. `visit` may shrink the bound.
    fn search(
        &self,
        y: &[f64],
        bound: &mut f64,
        node_limit: u64,
        visit: &mut dyn FnMut(&[i64], f64, &mut f64),
    ) -> Result<()> {
        let mut u = vec![0i64; self.n];
        let mut nodes = 0u64;
        self.descend(self.n, &mut u, 0.0, y, bound, &mut nodes, node_limit, visit)
    }

    #[allow(clippy::too_many_arguments)]
    fn descend(
        &self,
        level: usize,
        u: &mut [i64],
        partial: f64,
        y: &[f64],
        bound: &mut f64,
        nodes: &mut u64,
        node_limit: u64,
        visit: &mut dyn FnMut(&[i64], f64, &mut f64),
    ) -> Result<()> {
        let i = level - 1;
        let mut s = y[i];
        for (j, &uj) in u.iter().enumerate().skip(i + 1) {
            s -= self.r[(i, j)] * uj as f64;
        }
        let rii = self.r[(i, i)];
        let rem = *bound - partial;
        if rem < 0.0 {
            return Ok(());
        }
        let c = s / rii;
        let w = (rem / (rii * rii)).sqrt();
        let lo = (c - w).ceil() as i64;
        let hi = (c + w).floor() as i64;
        if lo > hi {
            return Ok(());
        }
        // zig-zag from the nearest integer outwards
        let mid = (c.round() as i64).clamp(lo, hi);
        let up_first = c >= mid as f64;
        let span = (hi - mid).max(mid - lo);
        let order = (0..=span).flat_map(|k| {
            let (a, b) = if up_first { (mid + k, mid - k) } else { (mid - k, mid + k) };
            let second = (k > 0).then_some(b);
            std::iter::once(a).chain(second)
        });
        for v in order.filter(|v| (lo..=hi).contains(v)) {
            *nodes += 1;
            if *nodes > node_limit {
                return Err(Error::Capacity {
                    estimated: *nodes as f64,
                    budget: self.budget,
                });
            }
            let e = s - rii * v as f64;
            let d = partial + e * e;
            if d > *bound {
                continue;
            }
            u[i] = v;
            if i == 0 {
                visit(u, d, bound);
            } else {
                self.descend(i, u, d, y, bound, nodes, node_limit, visit)?;
            }
        }
        u[i] = 0;
        Ok(())
    }

    fn node_limit(&self) -> u64 {
        self.budget.saturating_mul(64).max(1_000_000)
    }

    /// Closest lattice point. Diagonal bases round half up per coordinate;
    /// other bases enumerate exactly up to `exact_cvp_dim` and fall back to
    /// Babai's nearest plane above it. Among equidistant points the first one
    /// in enumeration order (nearest coordinate first, upward on ties)
    /// wins.
    pub fn closest_point(&self, x: &RealVec) -> Result<ClosestPoint> {
        self.check(x)?;
        if let Some(d) = &self.diagonal {
            let coeffs: Vec<i64> = x
                .iter()
                .zip(d)
                .map(|(xi, di)| (xi / di + 0.5).floor() as i64)
                .collect();
            let point = RealVec::from_raw(coeffs.iter().zip(d).map(|(&u, di)| u as f64 * di).collect());
            return Ok(ClosestPoint {
                point,
                coeffs,
                exact: true,
            });
        }
        let y = self.rotated(x);
        let babai = self.babai_coeffs(&y);
        if self.n > self.exact_cvp_dim {
            return Ok(ClosestPoint {
                point: self.point(&babai),
                coeffs: babai,
                exact: false,
            });
        }
        let babai_d = self.residual_sq(&y, &babai);
        let mut bound = babai_d * (1.0 + 1e-9) + 1e-300;
        let mut best: Option<(Vec<i64>, f64)> = None;
        self.search(&y, &mut bound, self.node_limit(), &mut |u, d, bound| {
            let better = match &best {
                None => true,
                Some((_, b)) => d < *b - 1e-12 * b.max(1.0),
            };
            if better {
                best = Some((u.to_vec(), d));
                *bound = bound.min(d * (1.0 + 1e-9) + 1e-300);
            }
        })?;
        let coeffs = best.map(|(u, _)| u).unwrap_or(babai);
        Ok(ClosestPoint {
            point: self.point(&coeffs),
            coeffs,
            exact: true,
        })
    }

    pub fn quantize(&self, x: &RealVec) -> Result<RealVec> {
        Ok(self.closest_point(x)?.point)
    }

    /// Quantization error `x - Q(x)`.
    pub fn mod_lattice(&self, x: &RealVec) -> Result<RealVec> {
        Ok(x.sub(&self.quantize(x)?))
    }

    /// Heuristic number of points in a ball: `V_n r^n / covolume`.
    pub fn expected_count(&self, radius: f64) -> f64 {
        if radius <= 0.0 {
            return 0.0;
        }
        (ln_unit_ball_volume(self.n) + self.n as f64 * radius.ln() - self.ln_covolume).exp()
    }

    /// Integer coefficients and squared distances of every lattice point in
    /// the closed ball, in enumeration order.
    pub fn enumerate_coeffs_in_ball(
        &self,
        center: &RealVec,
        radius: f64,
    ) -> Result<Vec<(Vec<i64>, f64)>> {
        self.check(center)?;
        if !(radius >= 0.0) || !radius.is_finite() {
            return Err(Error::param(format!("radius must be nonnegative, got {radius}")));
        }
        let est = self.expected_count(radius);
        if est > self.budget as f64 {
            return Err(Error::Capacity {
                estimated: est,
                budget: self.budget,
            });
        }
        let mut out = Vec::new();
        let budget = self.budget;
        let mut overflow = false;
        self.visit_ball(center, radius, &mut |u, d| {
            out.push((u.to_vec(), d));
            overflow = out.len() as u64 > budget;
            !overflow
        })?;
        if overflow {
            return Err(Error::Capacity {
                estimated: est.max(budget as f64 + 1.0),
                budget,
            });
        }
        Ok(out)
    }

    /// Calls `f(coeffs, dist_sq)` for lattice points within `radius` of
    /// `center` in enumeration order until it returns `false`. Only the
    /// node limit guards the search, so large balls are fine when the
    /// visitor stops early.
    pub fn visit_ball(
        &self,
        center: &RealVec,
        radius: f64,
        f: &mut dyn FnMut(&[i64], f64) -> bool,
    ) -> Result<()> {
        self.check(center)?;
        if !(radius >= 0.0) || !radius.is_finite() {
            return Err(Error::param(format!("radius must be nonnegative, got {radius}")));
        }
        let r2 = radius * radius;
        let slack = 1e-9 * (r2 + self.r[(0, 0)].powi(2));
        let mut bound = r2 + slack;
        let y = self.rotated(center);
        let tol = r2 + 1e-12 * r2.max(1e-300);
        self.search(&y, &mut bound, self.node_limit(), &mut |u, _, bound| {
            let d = self.point(u).dist_sq(center);
            if (d <= tol || d == 0.0) && !f(u, d) {
                // a negative bound prunes the rest of the tree
                *bound = -1.0;
            }
        })
    }

    /// Every lattice point within `radius` of `center`.
    pub fn enumerate_in_ball(&self, center: &RealVec, radius: f64) -> Result<Vec<RealVec>> {
        Ok(self
            .enumerate_coeffs_in_ball(center, radius)?
            .into_iter()
            .map(|(u, _)| self.point(&u))
            .collect())
    }

    /// `V_n max(r - r_cov, 0)^n / covolume <= |L cap B| <= V_n (r + r_cov)^n / covolume`.
    pub fn count_bounds(&self, center: &RealVec, radius: f64) -> Result<CountBounds> {
        self.check(center)?;
        if !(radius >= 0.0) {
            return Err(Error::param(format!("radius must be nonnegative, got {radius}")));
        }
        let (r_cov, r_cov_exact) = match self.covering_radius_exact() {
            Some(r) => (r, true),
            None => (self.covering_radius_sampled(100_000, 0), false),
        };
        let lower = self.expected_count((radius - r_cov).max(0.0));
        let upper = self.expected_count(radius + r_cov);
        Ok(CountBounds {
            lower,
            upper,
            r_cov,
            r_cov_exact,
        })
    }

    /// True when every point of `self` lies in `fine`.
    pub fn is_sublattice_of(&self, fine: &Lattice) -> bool {
        if fine.n != self.n {
            return false;
        }
        let m = &fine.inverse * &self.basis;
        m.iter()
            .all(|v| (v - v.round()).abs() <= 1e-6 * v.abs().max(1.0))
    }

    /// Representatives of `fine / self` as integer combinations of the fine
    /// basis, via the Hermite normal form of the coarse basis in fine
    /// coordinates.
    pub(crate) fn coset_representatives(&self, fine: &Lattice, limit: u64) -> Result<Vec<Vec<i64>>> {
        if !self.is_sublattice_of(fine) {
            return Err(Error::Structure(
                "coarse lattice is not contained in the fine lattice".into(),
            ));
        }
        let n = self.n;
        let m = &fine.inverse * &self.basis;
        let mut h: Vec<Vec<i128>> = (0..n)
            .map(|i| (0..n).map(|j| m[(i, j)].round() as i128).collect())
            .collect();
        hermite_lower(&mut h);
        let diag: Vec<i128> = (0..n).map(|i| h[i][i]).collect();
        let index: f64 = diag.iter().map(|&d| d as f64).product();
        if index > limit as f64 {
            return Err(Error::Capacity {
                estimated: index,
                budget: limit,
            });
        }
        let mut reps = vec![vec![0i64; n]];
        for i in 0..n {
            let mut next = Vec::with_capacity(reps.len() * diag[i] as usize);
            for r in &reps {
                for v in 0..diag[i] as i64 {
                    let mut r2 = r.clone();
                    r2[i] = v;
                    next.push(r2);
                }
            }
            reps = next;
        }
        Ok(reps)
    }

    pub(crate) fn nested_parts(&self) -> Option<(&Lattice, &LinearCode)> {
        Some((self.nested_coarse.as_deref()?, self.seed_code.as_ref()?))
    }
}

/// Integer basis of `Phi(C) + q Z^n`: reduced code rows at the pivot columns
/// and `q e_j` elsewhere. Lower triangular up to the column order.
fn construction_a_integer_basis(code: &LinearCode) -> DMatrix<i64> {
    let n = code.n();
    let q = code.q() as i64;
    let (rows, pivots) = code.rref_basis();
    let mut b = DMatrix::<i64>::zeros(n, n);
    let mut next_row = 0;
    for j in 0..n {
        if next_row < pivots.len() && pivots[next_row] == j {
            for i in 0..n {
                b[(i, j)] = rows[next_row][i] as i64;
            }
            next_row += 1;
        } else {
            b[(j, j)] = q;
        }
    }
    b
}

/// In-place column-style Hermite reduction to lower-triangular form with a
/// positive diagonal.
fn hermite_lower(h: &mut [Vec<i128>]) {
    let n = h.len();
    for i in 0..n {
        for j in i + 1..n {
            while h[i][j] != 0 {
                let t = h[i][i].div_euclid(h[i][j]);
                for row in h.iter_mut() {
                    row[i] -= t * row[j];
                }
                for row in h.iter_mut() {
                    row.swap(i, j);
                }
            }
        }
        if h[i][i] < 0 {
            for row in h.iter_mut() {
                row[i] = -row[i];
            }
        }
    }
}
