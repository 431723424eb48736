//! q-ary linear codes used as Construction-A seeds.

use rand::RngCore;
use serde::Serialize;

use crate::error::{Error, Result};

pub fn is_prime(q: u64) -> bool {
    if q < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= q {
        if q.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

fn pow_mod(mut b: u64, mut e: u64, q: u64) -> u64 {
    let mut acc = 1u64;
    b %= q;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * b % q;
        }
        b = b * b % q;
        e >>= 1;
    }
    acc
}

/// Linear code over `F_q` given by an `n x k` generator matrix; codewords
/// are `G m` for `m` in `F_q^k`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LinearCode {
    q: u64,
    n: usize,
    k: usize,
    /// Row-major `n x k`.
    g: Vec<u64>,
}

impl LinearCode {
    pub fn new(q: u64, n: usize, k: usize, g: Vec<u64>) -> Result<Self> {
        if !is_prime(q) {
            return Err(Error::param(format!("field size q = {q} is not prime")));
        }
        if q >= 1 << 31 {
            return Err(Error::param(format!("field size q = {q} is too large")));
        }
        if n == 0 {
            return Err(Error::param("code length must be positive"));
        }
        if k > n {
            return Err(Error::param(format!("code dimension k = {k} exceeds n = {n}")));
        }
        if g.len() != n * k {
            return Err(Error::Dimension {
                expected: n * k,
                got: g.len(),
            });
        }
        if let Some(v) = g.iter().find(|&&v| v >= q) {
            return Err(Error::param(format!("generator entry {v} is not in 0..{q}")));
        }
        Ok(LinearCode { q, n, k, g })
    }

    /// Generator with i.i.d. uniform entries.
    pub fn random(q: u64, n: usize, k: usize, rng: &mut impl RngCore) -> Result<Self> {
        if !is_prime(q) {
            return Err(Error::param(format!("field size q = {q} is not prime")));
        }
        let g = (0..n * k).map(|_| rng.next_u64() % q).collect();
        LinearCode::new(q, n, k, g)
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn generator(&self) -> &[u64] {
        &self.g
    }

    pub fn entry(&self, i: usize, j: usize) -> u64 {
        self.g[i * self.k + j]
    }

    /// Codeword `G m mod q`.
    pub fn encode(&self, m: &[u64]) -> Vec<u64> {
        assert_eq!(m.len(), self.k);
        (0..self.n)
            .map(|i| {
                (0..self.k).fold(0u64, |acc, j| (acc + self.entry(i, j) * (m[j] % self.q)) % self.q)
            })
            .collect()
    }

    /// Reduced row-echelon basis of the code (rows in `F_q^n`) together with
    /// the pivot column of each row.
    pub fn rref_basis(&self) -> (Vec<Vec<u64>>, Vec<usize>) {
        let q = self.q;
        // rows of G^T span the code
        let mut rows: Vec<Vec<u64>> = (0..self.k)
            .map(|j| (0..self.n).map(|i| self.entry(i, j)).collect())
            .collect();
        let mut pivots = Vec::new();
        let mut r = 0;
        for col in 0..self.n {
            if r == rows.len() {
                break;
            }
            let Some(p) = (r..rows.len()).find(|&i| rows[i][col] != 0) else {
                continue;
            };
            rows.swap(r, p);
            let inv = pow_mod(rows[r][col], q - 2, q);
            for v in rows[r].iter_mut() {
                *v = *v * inv % q;
            }
            for i in 0..rows.len() {
                if i != r && rows[i][col] != 0 {
                    let f = rows[i][col];
                    let pivot = rows[r].clone();
                    for (v, &p) in rows[i].iter_mut().zip(&pivot) {
                        *v = (*v + q * q - f * p % q) % q;
                    }
                }
            }
            pivots.push(col);
            r += 1;
        }
        rows.truncate(r);
        (rows, pivots)
    }

    pub fn rank(&self) -> usize {
        self.rref_basis().1.len()
    }

    /// Distinct codewords, in order of the message `m` read as a base-`q`
    /// number. Only sensible for small `q^k`.
    pub fn codewords(&self) -> Vec<Vec<u64>> {
        let (basis, _) = self.rref_basis();
        let r = basis.len();
        let total = (self.q as usize).pow(r as u32);
        (0..total)
            .map(|mut idx| {
                let mut w = vec![0u64; self.n];
                for row in &basis {
                    let coef = (idx % self.q as usize) as u64;
                    idx /= self.q as usize;
                    for (wi, &b) in w.iter_mut().zip(row) {
                        *wi = (*wi + coef * b) % self.q;
                    }
                }
                w
            })
            .collect()
    }
}
