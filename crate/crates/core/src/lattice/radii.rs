//! Effective, packing and covering radii.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::Lattice;
use crate::linalg::{ln_unit_ball_volume, RealVec, SeededRng};

/// Largest dimension for which the covering radius is computed exactly from
/// the Voronoi vertices.
const EXACT_COVERING_DIM: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LatticeRadii {
    pub r_eff: f64,
    /// Half the minimum distance; `None` above the exact enumeration cut-off.
    pub r_pack: Option<f64>,
    pub r_pack_exact: bool,
    /// Sampled covering radius. Always a lower bound on the true value.
    pub r_cov: f64,
    pub r_cov_estimate: bool,
    pub r_cov_samples: u64,
    /// Exact covering radius where it can be certified.
    pub r_cov_exact: Option<f64>,
    /// `r_cov^2 / n`, from the exact covering radius when available.
    pub omega: f64,
    /// `r_eff^2 / n`.
    pub tau: f64,
}

impl Lattice {
    /// Radius of the ball with the same volume as a Voronoi cell.
    pub fn effective_radius(&self) -> f64 {
        ((self.ln_covolume - ln_unit_ball_volume(self.n)) / self.n as f64).exp()
    }

    /// Half the length of a shortest nonzero vector.
    pub fn packing_radius(&self) -> Option<f64> {
        if let Some(d) = &self.diagonal {
            return Some(0.5 * d.iter().copied().fold(f64::INFINITY, f64::min));
        }
        if self.n > self.exact_cvp_dim {
            return None;
        }
        let shortest_col = (0..self.n)
            .map(|j| self.basis.column(j).norm_squared())
            .fold(f64::INFINITY, f64::min);
        let y = vec![0.0; self.n];
        let mut bound = shortest_col * (1.0 + 1e-9);
        let mut best = shortest_col;
        self.search(&y, &mut bound, self.node_limit(), &mut |u, d, bound| {
            if u.iter().any(|&v| v != 0) && d < best {
                best = d;
                *bound = d * (1.0 + 1e-9);
            }
        })
        .ok()?;
        Some(0.5 * best.sqrt())
    }

    /// Exact covering radius for diagonal bases (analytic) and for
    /// dimensions up to 4 (maximum vertex norm of the Voronoi cell).
    pub fn covering_radius_exact(&self) -> Option<f64> {
        *self.covering.get_or_init(|| {
            if let Some(d) = &self.diagonal {
                return Some(0.5 * d.iter().map(|v| v * v).sum::<f64>().sqrt());
            }
            if self.n > EXACT_COVERING_DIM {
                return None;
            }
            self.voronoi_covering_radius()
        })
    }

    fn voronoi_covering_radius(&self) -> Option<f64> {
        let n = self.n;
        // covering radius of the Babai cell bounds the true one
        let r_ub = 0.5 * (0..n).map(|i| self.r[(i, i)].powi(2)).sum::<f64>().sqrt();
        let zero = RealVec::zeros(n);
        let cands: Vec<RealVec> = self
            .enumerate_coeffs_in_ball(&zero, 2.0 * r_ub * (1.0 + 1e-9))
            .ok()?
            .into_iter()
            .filter(|(u, _)| u.iter().any(|&v| v != 0))
            .map(|(u, _)| self.point(&u))
            .collect();
        // v is Voronoi-relevant iff <w, v> < |w|^2 for every other nonzero w
        let relevant: Vec<&RealVec> = cands
            .iter()
            .filter(|v| {
                cands.iter().all(|w| {
                    std::ptr::eq(*v, w) || v.dot(w) < w.norm_sq() * (1.0 - 1e-9)
                })
            })
            .collect();
        let half: Vec<f64> = relevant.iter().map(|v| 0.5 * v.norm_sq()).collect();
        let mut best = 0.0f64;
        let mut idx: Vec<usize> = (0..n).collect();
        let m = relevant.len();
        if m < n {
            return None;
        }
        loop {
            let a = DMatrix::from_fn(n, n, |r, c| relevant[idx[r]][c]);
            let b = DVector::from_fn(n, |r, _| half[idx[r]]);
            if let Some(x) = a.lu().solve(&b) {
                let x: Vec<f64> = x.iter().copied().collect();
                let feasible = relevant.iter().zip(&half).all(|(v, h)| {
                    let ip: f64 = v.iter().zip(&x).map(|(a, b)| a * b).sum();
                    ip <= h + 1e-9 * h.max(1e-300)
                });
                if feasible && x.iter().all(|v| v.is_finite()) {
                    best = best.max(x.iter().map(|v| v * v).sum::<f64>().sqrt());
                }
            }
            // next n-subset in lexicographic order
            let mut i = n;
            loop {
                if i == 0 {
                    return Some(best);
                }
                i -= 1;
                if idx[i] < m - n + i {
                    break;
                }
            }
            idx[i] += 1;
            for j in i + 1..n {
                idx[j] = idx[j - 1] + 1;
            }
        }
    }

    /// Maximum of `||x mod L||` over `samples` uniform points of the
    /// fundamental parallelepiped. A lower bound on the covering radius when
    /// the quantizer is exact.
    pub fn covering_radius_sampled(&self, samples: u64, seed: u64) -> f64 {
        let mut rng = SeededRng::new(seed, 0xC0DE);
        let mut best = 0.0f64;
        for _ in 0..samples {
            let u = DVector::from_fn(self.n, |_, _| rng.uniform());
            let x = &self.basis * u;
            let x = RealVec::from_raw(x.iter().copied().collect());
            if let Ok(e) = self.mod_lattice(&x) {
                best = best.max(e.norm());
            }
        }
        best
    }

    pub fn radii(&self, sample_budget: u64) -> LatticeRadii {
        let n = self.n as f64;
        let r_eff = self.effective_radius();
        let r_pack = self.packing_radius();
        let r_cov = self.covering_radius_sampled(sample_budget, 0);
        let r_cov_exact = self.covering_radius_exact();
        let rc = r_cov_exact.unwrap_or(r_cov);
        LatticeRadii {
            r_eff,
            r_pack_exact: r_pack.is_some(),
            r_pack,
            r_cov,
            r_cov_estimate: true,
            r_cov_samples: sample_budget,
            r_cov_exact,
            omega: rc * rc / n,
            tau: r_eff * r_eff / n,
        }
    }
}
