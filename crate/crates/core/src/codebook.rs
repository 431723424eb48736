//! Finite codebooks carved from lattices: ball shaping, Voronoi shaping,
//! seeded expurgation and message indexing.
//!
//! Explicit codes hold every codeword sorted lexicographically, so message
//! `m` is the `m`-th smallest codeword. Large cubic-lattice ball codes are
//! kept implicit ([`IntegerBallCode`]): they are sampled exactly and tested
//! for membership but carry no message index.

use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Lattice, LatticeSpec};
use crate::linalg::{RealVec, SeededRng};

/// Relative slack on the power constraint when deciding ball membership.
pub(crate) const POWER_SLACK: f64 = 1e-12;

/// Coordinates an explicit cubic codebook may hold before the implicit
/// representation is used instead.
pub const EXPLICIT_ENTRY_LIMIT: f64 = (1u64 << 24) as f64;

#[derive(Clone, Debug)]
pub enum Shaping {
    Ball { power: f64 },
    Voronoi { coarse: Box<Lattice> },
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

/// Explicit lattice code with deterministic lexicographic indexing.
#[derive(Clone, Debug)]
pub struct LatticeCode {
    lattice: Lattice,
    shaping: Shaping,
    codewords: Vec<RealVec>,
    index: HashMap<Vec<i64>, usize>,
}

impl LatticeCode {
    fn from_points(lattice: Lattice, shaping: Shaping, mut pts: Vec<(Vec<i64>, RealVec)>) -> Result<Self> {
        if pts.is_empty() {
            return Err(Error::DegenerateCode("shaping region holds no lattice point".into()));
        }
        pts.sort_by(|a, b| lex_cmp(&a.1, &b.1));
        pts.dedup_by(|a, b| a.0 == b.0);
        let index = pts.iter().enumerate().map(|(i, (u, _))| (u.clone(), i)).collect();
        Ok(LatticeCode {
            lattice,
            shaping,
            codewords: pts.into_iter().map(|(_, x)| x).collect(),
            index,
        })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn shaping(&self) -> &Shaping {
        &self.shaping
    }

    pub fn n(&self) -> usize {
        self.lattice.dim()
    }

    pub fn len(&self) -> usize {
        self.codewords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codewords.is_empty()
    }

    pub fn codewords(&self) -> &[RealVec] {
        &self.codewords
    }

    /// `(1/n) log2 |C|`.
    pub fn rate(&self) -> f64 {
        (self.len() as f64).log2() / self.n() as f64
    }

    pub fn encode(&self, m: usize) -> Result<RealVec> {
        self.codewords.get(m).cloned().ok_or(Error::Index {
            index: m,
            size: self.len(),
        })
    }

    /// Message index of `x`, if it is a codeword.
    pub fn find_index(&self, x: &RealVec) -> Option<usize> {
        let u = self.lattice.coefficients(x).ok()??;
        self.index.get(&u).copied()
    }
}

/// `C = L cap B(0, sqrt(nP))`, boundary included.
pub fn build_ball_code(lattice: &Lattice, power: f64) -> Result<LatticeCode> {
    if !(power > 0.0) || !power.is_finite() {
        return Err(Error::param(format!("power must be positive, got {power}")));
    }
    let n = lattice.dim() as f64;
    let limit = n * power * (1.0 + POWER_SLACK);
    let pts = lattice
        .enumerate_coeffs_in_ball(&RealVec::zeros(lattice.dim()), limit.sqrt())?
        .into_iter()
        .map(|(u, _)| {
            let x = lattice.point(&u);
            (u, x)
        })
        .filter(|(_, x)| x.norm_sq() <= limit)
        .collect();
    LatticeCode::from_points(lattice.clone(), Shaping::Ball { power }, pts)
}

/// `C = fine cap V(coarse)`: one representative of each coset of the coarse
/// lattice, reduced into its Voronoi cell.
pub fn build_voronoi_code(fine: &Lattice, coarse: &Lattice) -> Result<LatticeCode> {
    if fine.dim() != coarse.dim() {
        return Err(Error::Dimension {
            expected: fine.dim(),
            got: coarse.dim(),
        });
    }
    if !coarse.is_sublattice_of(fine) {
        return Err(Error::Structure(
            "coarse lattice is not a sublattice of the fine lattice".into(),
        ));
    }
    if coarse.diagonal().is_none() && coarse.dim() > coarse.exact_cvp_dim() {
        return Err(Error::Structure(
            "Voronoi shaping needs an exact quantizer for the coarse lattice".into(),
        ));
    }
    let reps: Vec<RealVec> = match fine.nested_parts() {
        Some((c, code)) if c == coarse => {
            let q = code.q() as f64;
            let limit = fine.budget();
            let est = (code.q() as f64).powi(code.rank() as i32);
            if est > limit as f64 {
                return Err(Error::Capacity {
                    estimated: est,
                    budget: limit,
                });
            }
            code.codewords()
                .into_iter()
                .map(|w| {
                    let frac: Vec<f64> = w.iter().map(|&v| v as f64 / q).collect();
                    let p = coarse.basis() * nalgebra::DVector::from_vec(frac);
                    RealVec::from_raw(p.iter().copied().collect())
                })
                .collect()
        }
        _ => coarse
            .coset_representatives(fine, fine.budget())?
            .iter()
            .map(|u| fine.point(u))
            .collect(),
    };
    let mut pts = Vec::with_capacity(reps.len());
    for p in reps {
        let x = coarse.mod_lattice(&p)?;
        let u = fine.coefficients(&x)?.ok_or_else(|| {
            Error::Structure("reduced coset representative left the fine lattice".into())
        })?;
        pts.push((u, x));
    }
    LatticeCode::from_points(
        fine.clone(),
        Shaping::Voronoi {
            coarse: Box::new(coarse.clone()),
        },
        pts,
    )
}

/// Seeded keep mask: entry `i` is kept with probability `2^{-gamma n}`,
/// independently across entries.
pub fn expurgation_mask(size: usize, gamma: f64, n: usize, seed: u64) -> Result<Vec<bool>> {
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::param(format!("gamma must be nonnegative, got {gamma}")));
    }
    let p = (-gamma * n as f64).exp2();
    let mut rng = SeededRng::new(seed, 0xE2B6);
    Ok((0..size).map(|_| rng.uniform() < p).collect())
}

#[derive(Clone, Debug)]
pub struct ExpurgatedCode {
    base: LatticeCode,
    gamma: f64,
    seed: u64,
    keep_mask: Vec<bool>,
    kept: Vec<usize>,
    position: HashMap<usize, usize>,
}

impl ExpurgatedCode {
    pub fn base(&self) -> &LatticeCode {
        &self.base
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn keep_mask(&self) -> &[bool] {
        &self.keep_mask
    }

    /// Base indices of the surviving codewords, in order.
    pub fn kept(&self) -> &[usize] {
        &self.kept
    }

    pub fn len(&self) -> usize {
        self.kept.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kept.is_empty()
    }

    pub fn rate(&self) -> f64 {
        (self.len() as f64).log2() / self.base.n() as f64
    }

    pub fn encode(&self, m: usize) -> Result<RealVec> {
        let i = *self.kept.get(m).ok_or(Error::Index {
            index: m,
            size: self.len(),
        })?;
        self.base.encode(i)
    }

    pub fn find_index(&self, x: &RealVec) -> Option<usize> {
        self.position.get(&self.base.find_index(x)?).copied()
    }
}

pub fn expurgate(code: LatticeCode, gamma: f64, seed: u64) -> Result<ExpurgatedCode> {
    let keep_mask = expurgation_mask(code.len(), gamma, code.n(), seed)?;
    let kept: Vec<usize> = (0..code.len()).filter(|&i| keep_mask[i]).collect();
    if kept.is_empty() {
        return Err(Error::DegenerateCode(format!(
            "expurgation with gamma = {gamma} removed all {} codewords",
            code.len()
        )));
    }
    let position = kept.iter().enumerate().map(|(m, &i)| (i, m)).collect();
    Ok(ExpurgatedCode {
        base: code,
        gamma,
        seed,
        keep_mask,
        kept,
        position,
    })
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// `a Z^n cap B(0, sqrt(nP))` without storing the codewords.
///
/// `ln_counts[k][t]` is the log of the number of integer vectors in `Z^k`
/// with squared norm at most `t`; it drives exact uniform sampling one
/// coordinate at a time.
#[derive(Clone, Debug)]
pub struct IntegerBallCode {
    n: usize,
    scale: f64,
    power: f64,
    t_max: usize,
    lattice: Lattice,
    ln_counts: Vec<Vec<f64>>,
}

impl IntegerBallCode {
    pub fn new(n: usize, scale: f64, power: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("blocklength must be positive"));
        }
        if !(power > 0.0) || !power.is_finite() {
            return Err(Error::param(format!("power must be positive, got {power}")));
        }
        let lattice = Lattice::scaled_integer(n, scale)?;
        let t_real = (n as f64 * power * (1.0 + POWER_SLACK) / (scale * scale)).floor();
        if t_real > 5e6 {
            return Err(Error::Capacity {
                estimated: t_real,
                budget: 5_000_000,
            });
        }
        let t_max = t_real as usize;
        let mut ln_counts = vec![vec![0.0f64; t_max + 1]];
        for _ in 1..=n {
            let prev = ln_counts.last().unwrap();
            let row: Vec<f64> = (0..=t_max)
                .map(|t| {
                    let mut acc = f64::NEG_INFINITY;
                    let mut j = 0usize;
                    while j * j <= t {
                        let term = prev[t - j * j];
                        acc = log_add(acc, term);
                        if j > 0 {
                            acc = log_add(acc, term);
                        }
                        j += 1;
                    }
                    acc
                })
                .collect();
            ln_counts.push(row);
        }
        Ok(IntegerBallCode {
            n,
            scale,
            power,
            t_max,
            lattice,
            ln_counts,
        })
    }

    /// Largest scale whose code still has at least `2^{n rate}` codewords.
    pub fn scale_for_rate(n: usize, power: f64, rate: f64) -> Result<f64> {
        let target = n as f64 * rate;
        let log2_count = |s: f64| -> Result<f64> { Ok(IntegerBallCode::new(n, s, power)?.log2_size()) };
        // volume heuristic for the starting point
        let ln_vol = crate::linalg::ln_unit_ball_volume(n) + 0.5 * n as f64 * (n as f64 * power).ln();
        let s0 = ((ln_vol - target * std::f64::consts::LN_2) / n as f64).exp();
        bisect_scale(s0, target, log2_count)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn log2_size(&self) -> f64 {
        self.ln_counts[self.n][self.t_max] / std::f64::consts::LN_2
    }

    pub fn rate(&self) -> f64 {
        self.log2_size() / self.n as f64
    }

    /// Largest `||x||^2 / n` over the code.
    pub fn max_power(&self) -> f64 {
        // the largest integer squared norm <= t_max that is attained
        let row = &self.ln_counts[self.n];
        let t = (0..=self.t_max)
            .rev()
            .find(|&t| t == 0 || row[t] > row[t - 1])
            .unwrap_or(0);
        t as f64 * self.scale * self.scale / self.n as f64
    }

    pub fn contains(&self, x: &RealVec) -> bool {
        if x.len() != self.n {
            return false;
        }
        let mut t = 0.0;
        for &v in x.iter() {
            let u = v / self.scale;
            if (u - u.round()).abs() > 1e-6 {
                return false;
            }
            t += u.round() * u.round();
        }
        t <= self.t_max as f64
    }

    /// Calls `f` on codewords within squared distance `radius_sq` of
    /// `center`, nearest coordinates first, until it returns `false`.
    /// Branches are pruned with Lagrangian combinations of the power and
    /// distance constraints; more than `node_limit` search nodes is a
    /// capacity error.
    pub fn visit_in_ball(
        &self,
        center: &RealVec,
        radius_sq: f64,
        node_limit: u64,
        f: &mut dyn FnMut(&RealVec) -> bool,
    ) -> Result<()> {
        if center.len() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                got: center.len(),
            });
        }
        if !(radius_sq >= 0.0) {
            return Err(Error::param(format!("squared radius must be nonnegative, got {radius_sq}")));
        }
        let b = radius_sq * (1.0 + 1e-12) + 1e-300;
        if self.t_max == 0 {
            let zero = RealVec::zeros(self.n);
            if zero.dist_sq(center) <= b {
                f(&zero);
            }
            return Ok(());
        }
        let mut search = BallSearch {
            a: self.scale,
            t: self.t_max as f64,
            b,
            c: center.as_slice(),
            suffix: Vec::new(),
            u: vec![0i64; self.n],
            nodes: 0,
            node_limit,
            stop: false,
        };
        search.suffix = LAMBDAS
            .iter()
            .map(|&l| {
                let mut acc = vec![0.0; self.n + 1];
                for i in (0..self.n).rev() {
                    acc[i] = acc[i + 1] + search.coord_min(l, center[i]);
                }
                acc
            })
            .collect();
        let mut partial = [0.0; 3];
        let mut visit = |u: &[i64]| f(&RealVec::from_raw(u.iter().map(|&v| v as f64 * self.scale).collect()));
        search.descend(0, 0.0, 0.0, &mut partial, &mut visit)
    }

    /// Exactly uniform codeword.
    pub fn sample(&self, rng: &mut SeededRng) -> RealVec {
        let mut t = self.t_max;
        let mut out = Vec::with_capacity(self.n);
        for i in 0..self.n {
            let k = self.n - i;
            let total = self.ln_counts[k][t];
            let prev = &self.ln_counts[k - 1];
            let mut u = rng.uniform();
            let mut chosen = 0i64;
            let mut j = 0usize;
            'outer: while j * j <= t {
                let p = (prev[t - j * j] - total).exp();
                let signs: &[i64] = if j == 0 { &[0] } else { &[-1, 1] };
                for &sg in signs {
                    chosen = sg * j as i64;
                    if u < p {
                        break 'outer;
                    }
                    u -= p;
                }
                j += 1;
            }
            t -= (chosen * chosen) as usize;
            out.push(chosen as f64 * self.scale);
        }
        RealVec::from_raw(out)
    }
}

const LAMBDAS: [f64; 3] = [0.25, 0.5, 0.75];

/// Depth-first search over `a Z^n cap B(0, sqrt(t) a) cap B(c, sqrt(b))`.
struct BallSearch<'a> {
    a: f64,
    t: f64,
    b: f64,
    c: &'a [f64],
    /// Per multiplier, suffix sums of the relaxed per-coordinate minima.
    suffix: Vec<Vec<f64>>,
    u: Vec<i64>,
    nodes: u64,
    node_limit: u64,
    stop: bool,
}

impl BallSearch<'_> {
    /// `lambda u^2 / t + (1 - lambda)(a u - c)^2 / b`.
    fn term(&self, lambda: f64, u: f64, c: f64) -> f64 {
        let e = self.a * u - c;
        lambda * u * u / self.t + (1.0 - lambda) * e * e / self.b
    }

    fn coord_min(&self, lambda: f64, c: f64) -> f64 {
        let w = 1.0 - lambda;
        let u = w * self.a * c / self.b / (lambda / self.t + w * self.a * self.a / self.b);
        self.term(lambda, u, c)
    }

    fn descend(
        &mut self,
        i: usize,
        p_pow: f64,
        p_dist: f64,
        partial: &mut [f64; 3],
        f: &mut dyn FnMut(&[i64]) -> bool,
    ) -> Result<()> {
        let n = self.u.len();
        if i == n {
            if !f(&self.u) {
                self.stop = true;
            }
            return Ok(());
        }
        let c = self.c[i];
        let pw = ((self.t - p_pow).max(0.0)).sqrt();
        let dw = ((self.b - p_dist).max(0.0)).sqrt();
        let lo = (-pw).max((c - dw) / self.a).ceil() as i64;
        let hi = pw.min((c + dw) / self.a).floor() as i64;
        if lo > hi {
            return Ok(());
        }
        let target = c / self.a;
        let mid = (target.round() as i64).clamp(lo, hi);
        let up_first = target >= mid as f64;
        let span = (hi - mid).max(mid - lo);
        for k in 0..=span {
            for side in 0..2 {
                if k == 0 && side == 1 {
                    continue;
                }
                let v = if (side == 0) == up_first { mid + k } else { mid - k };
                if v < lo || v > hi {
                    continue;
                }
                self.nodes += 1;
                if self.nodes > self.node_limit {
                    return Err(Error::Capacity {
                        estimated: self.nodes as f64,
                        budget: self.node_limit,
                    });
                }
                let vf = v as f64;
                let np = p_pow + vf * vf;
                let e = self.a * vf - c;
                let nd = p_dist + e * e;
                if np > self.t || nd > self.b {
                    continue;
                }
                let saved = *partial;
                let mut feasible = true;
                for (j, &l) in LAMBDAS.iter().enumerate() {
                    partial[j] += self.term(l, vf, c);
                    if partial[j] + self.suffix[j][i + 1] > 1.0 + 1e-12 {
                        feasible = false;
                    }
                }
                if feasible {
                    self.u[i] = v;
                    self.descend(i + 1, np, nd, partial, f)?;
                    self.u[i] = 0;
                }
                *partial = saved;
                if self.stop {
                    return Ok(());
                }
            }
        }
        Ok(())
    }
}

/// Finds the largest scale `s` with `log2_count(s) >= target`, given a
/// starting guess. `log2_count` must be nonincreasing in `s`.
fn bisect_scale(s0: f64, target: f64, log2_count: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    let mut lo = s0;
    let mut tries = 0;
    while log2_count(lo)? < target {
        lo /= 2.0;
        tries += 1;
        if tries > 60 {
            return Err(Error::domain("no scale reaches the target rate"));
        }
    }
    let mut hi = s0.max(lo) * 2.0;
    tries = 0;
    while log2_count(hi)? >= target {
        hi *= 2.0;
        tries += 1;
        if tries > 60 {
            return Err(Error::domain("code size does not decrease with scale"));
        }
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if log2_count(mid)? >= target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    Ok(lo)
}

/// Largest `s` such that the ball code of `s L` at power `P` has at least
/// `2^{n rate}` codewords. Brackets with the volume sandwich, then confirms
/// every step with exact counts.
pub fn scale_for_rate(lattice: &Lattice, power: f64, rate: f64) -> Result<f64> {
    let n = lattice.dim();
    let target = n as f64 * rate;
    let radius = (n as f64 * power).sqrt();
    let zero = RealVec::zeros(n);
    let b = lattice.count_bounds(&zero, radius)?;
    // the volume estimate scales like s^{-n}
    let est = 0.5 * (b.lower.max(1.0).log2() + b.upper.log2());
    let s0 = ((est - target) / n as f64).exp2();
    bisect_scale(s0, target, |s| {
        let l = lattice.scaled(s)?;
        let count = l
            .enumerate_coeffs_in_ball(&zero, radius * (1.0 + POWER_SLACK).sqrt())?
            .into_iter()
            .filter(|(u, _)| l.point(u).norm_sq() <= n as f64 * power * (1.0 + POWER_SLACK))
            .count();
        Ok((count as f64).log2())
    })
}

/// A codebook of any representation.
#[derive(Clone, Debug)]
pub enum Codebook {
    Explicit(LatticeCode),
    Expurgated(ExpurgatedCode),
    IntegerBall(IntegerBallCode),
}

impl Codebook {
    pub fn n(&self) -> usize {
        match self {
            Codebook::Explicit(c) => c.n(),
            Codebook::Expurgated(c) => c.base.n(),
            Codebook::IntegerBall(c) => c.n,
        }
    }

    pub fn lattice(&self) -> &Lattice {
        match self {
            Codebook::Explicit(c) => &c.lattice,
            Codebook::Expurgated(c) => &c.base.lattice,
            Codebook::IntegerBall(c) => &c.lattice,
        }
    }

    /// Number of codewords for explicit representations.
    pub fn len(&self) -> Option<usize> {
        match self {
            Codebook::Explicit(c) => Some(c.len()),
            Codebook::Expurgated(c) => Some(c.len()),
            Codebook::IntegerBall(_) => None,
        }
    }

    pub fn is_empty(&self) -> Option<bool> {
        self.len().map(|l| l == 0)
    }

    pub fn log2_size(&self) -> f64 {
        match self {
            Codebook::IntegerBall(c) => c.log2_size(),
            _ => (self.len().unwrap() as f64).log2(),
        }
    }

    pub fn rate(&self) -> f64 {
        self.log2_size() / self.n() as f64
    }

    pub fn encode(&self, m: usize) -> Result<RealVec> {
        match self {
            Codebook::Explicit(c) => c.encode(m),
            Codebook::Expurgated(c) => c.encode(m),
            Codebook::IntegerBall(_) => Err(Error::Structure(
                "implicit integer-ball codes carry no message index".into(),
            )),
        }
    }

    pub fn find_index(&self, x: &RealVec) -> Option<usize> {
        match self {
            Codebook::Explicit(c) => c.find_index(x),
            Codebook::Expurgated(c) => c.find_index(x),
            Codebook::IntegerBall(_) => None,
        }
    }

    pub fn contains(&self, x: &RealVec) -> bool {
        match self {
            Codebook::IntegerBall(c) => c.contains(x),
            _ => self.find_index(x).is_some(),
        }
    }

    /// Uniformly drawn message and its codeword.
    pub fn draw(&self, rng: &mut SeededRng) -> (Option<usize>, RealVec) {
        match self {
            Codebook::IntegerBall(c) => (None, c.sample(rng)),
            _ => {
                let m = rng.index(self.len().unwrap());
                (Some(m), self.encode(m).expect("index in range"))
            }
        }
    }

    /// Every codeword of an explicit code, in message order.
    pub fn codewords(&self) -> Option<Vec<RealVec>> {
        match self {
            Codebook::Explicit(c) => Some(c.codewords.clone()),
            Codebook::Expurgated(c) => Some(c.kept.iter().map(|&i| c.base.codewords[i].clone()).collect()),
            Codebook::IntegerBall(_) => None,
        }
    }

    /// Average codeword (zero for the symmetric implicit code).
    pub fn mean(&self) -> RealVec {
        match self.codewords() {
            None => RealVec::zeros(self.n()),
            Some(cw) => {
                let mut acc = RealVec::zeros(self.n());
                for x in &cw {
                    acc = acc.add(x);
                }
                acc.scaled(1.0 / cw.len() as f64)
            }
        }
    }

    /// Largest per-symbol codeword power `max ||x||^2 / n`.
    pub fn max_power(&self) -> f64 {
        match self {
            Codebook::IntegerBall(c) => c.max_power(),
            _ => {
                let n = self.n() as f64;
                self.codewords()
                    .unwrap()
                    .iter()
                    .map(|x| x.norm_sq() / n)
                    .fold(0.0, f64::max)
            }
        }
    }

    /// Codewords within `radius` of `center`, with their message indices.
    pub fn in_ball(&self, center: &RealVec, radius: f64) -> Result<Vec<(Option<usize>, RealVec)>> {
        let l = self.lattice();
        let mut out = Vec::new();
        for (u, _) in l.enumerate_coeffs_in_ball(center, radius)? {
            let x = l.point(&u);
            match self {
                Codebook::IntegerBall(c) => {
                    if c.contains(&x) {
                        out.push((None, x));
                    }
                }
                _ => {
                    if let Some(m) = self.find_index(&x) {
                        out.push((Some(m), x));
                    }
                }
            }
        }
        out.sort_by_key(|(m, _)| *m);
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ShapingSpec {
    Ball {
        power: f64,
    },
    /// The coarse lattice defaults to the coarse part of a `nested_fine`
    /// lattice description.
    Voronoi {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        coarse: Option<LatticeSpec>,
    },
}

/// Codebook description; codewords are re-derived from it on load.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodebookSpec {
    pub lattice: LatticeSpec,
    pub shaping: ShapingSpec,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default)]
    pub seed: u64,
}

impl CodebookSpec {
    /// Cubic lattices with ball shaping become implicit codes when the
    /// expected size exceeds the enumeration budget or the codeword table
    /// would hold more than `EXPLICIT_ENTRY_LIMIT` coordinates.
    pub fn build(&self) -> Result<Codebook> {
        let lattice = self.lattice.build()?;
        let code = match &self.shaping {
            ShapingSpec::Ball { power } => {
                let cubic = match &self.lattice {
                    LatticeSpec::Integer { n } => Some((*n, 1.0)),
                    LatticeSpec::ScaledInteger { n, scale } => Some((*n, *scale)),
                    _ => None,
                };
                let radius = (lattice.dim() as f64 * power).sqrt();
                match cubic {
                    Some((n, scale))
                        if lattice.expected_count(radius) > lattice.budget() as f64
                            || lattice.expected_count(radius) * n as f64 > EXPLICIT_ENTRY_LIMIT =>
                    {
                        if self.gamma > 0.0 {
                            return Err(Error::Config(
                                "expurgation needs an explicitly enumerable code".into(),
                            ));
                        }
                        return Ok(Codebook::IntegerBall(IntegerBallCode::new(n, scale, *power)?));
                    }
                    _ => build_ball_code(&lattice, *power)?,
                }
            }
            ShapingSpec::Voronoi { coarse } => {
                let coarse = match (coarse, self.lattice.coarse()) {
                    (Some(c), _) | (None, Some(c)) => c.build()?,
                    (None, None) => {
                        return Err(Error::Config(
                            "voronoi shaping needs a coarse lattice".into(),
                        ))
                    }
                };
                build_voronoi_code(&lattice, &coarse)?
            }
        };
        if self.gamma > 0.0 {
            Ok(Codebook::Expurgated(expurgate(code, self.gamma, self.seed)?))
        } else {
            Ok(Codebook::Explicit(code))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LinearCode;
    use std::collections::BTreeSet;

    fn v(x: &[f64]) -> RealVec {
        RealVec::new(x.to_vec()).unwrap()
    }

    #[test]
    fn ball_code_on_integers() {
        let c = build_ball_code(&Lattice::integer(1).unwrap(), 4.0).unwrap();
        let pts: Vec<f64> = c.codewords().iter().map(|x| x[0]).collect();
        assert_eq!(pts, vec![-2.0, -1.0, 0.0, 1.0, 2.0]);
        assert!((c.rate() - 5f64.log2()).abs() < 1e-12);
        assert_eq!(c.encode(0).unwrap()[0], -2.0);
    }

    #[test]
    fn tiny_power_leaves_origin() {
        let l = Lattice::integer(3).unwrap();
        let c = build_ball_code(&l, 0.2 / 3.0).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.rate(), 0.0);
        assert_eq!(c.encode(0).unwrap().norm(), 0.0);
    }

    #[test]
    fn ball_code_size_within_count_bounds() {
        let mut rng = SeededRng::new(2, 2);
        for _ in 0..20 {
            let n = 1 + rng.index(4);
            let code = LinearCode::random(3, n, rng.index(n + 1), &mut rng).unwrap();
            let l = Lattice::construction_a(&code, 1.0 + rng.uniform()).unwrap();
            let p = 0.5 + 3.0 * rng.uniform();
            let c = build_ball_code(&l, p).unwrap();
            let b = l.count_bounds(&RealVec::zeros(n), (n as f64 * p).sqrt()).unwrap();
            let size = c.len() as f64;
            assert!(b.lower <= size && size <= b.upper);
            let max = c.codewords().iter().map(|x| x.norm_sq()).fold(0.0, f64::max);
            assert!(max <= n as f64 * p + 1e-9);
        }
    }

    #[test]
    fn codewords_sorted_distinct_and_round_trip() {
        let l = Lattice::integer(3).unwrap();
        let c = build_ball_code(&l, 2.0).unwrap();
        for w in c.codewords().windows(2) {
            assert_eq!(lex_cmp(&w[0], &w[1]), Ordering::Less);
        }
        for m in 0..c.len() {
            assert_eq!(c.find_index(&c.encode(m).unwrap()), Some(m));
        }
        assert!(matches!(c.encode(c.len()), Err(Error::Index { .. })));
    }

    #[test]
    fn voronoi_one_dimensional() {
        let fine = Lattice::integer(1).unwrap();
        let coarse = Lattice::scaled_integer(1, 3.0).unwrap();
        let c = build_voronoi_code(&fine, &coarse).unwrap();
        let pts: Vec<f64> = c.codewords().iter().map(|x| x[0]).collect();
        assert_eq!(pts, vec![-1.0, 0.0, 1.0]);
        // same code through the nested builder
        let code = LinearCode::new(3, 1, 1, vec![1]).unwrap();
        let (f2, c2) = Lattice::nested_construction_a(&coarse, &code).unwrap();
        let c_nested = build_voronoi_code(&f2, &c2).unwrap();
        let pts2: Vec<f64> = c_nested.codewords().iter().map(|x| x[0]).collect();
        assert_eq!(pts2, pts);
    }

    #[test]
    fn voronoi_trivial_and_checkerboard() {
        let l = Lattice::scaled_integer(2, 2.0).unwrap();
        assert_eq!(build_voronoi_code(&l, &l).unwrap().len(), 1);
        let code = LinearCode::new(2, 2, 1, vec![1, 1]).unwrap();
        let (fine, coarse) = Lattice::nested_construction_a(&l, &code).unwrap();
        let c = build_voronoi_code(&fine, &coarse).unwrap();
        assert_eq!(c.len(), 2);
        for x in c.codewords() {
            // inside the Voronoi cell of 2Z^2
            assert!(x.iter().all(|v| v.abs() <= 1.0 + 1e-12));
        }
    }

    #[test]
    fn voronoi_paths_agree_on_skewed_coarse() {
        let b = nalgebra::DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 3f64.sqrt()]);
        let coarse = Lattice::from_basis(b).unwrap();
        let code = LinearCode::new(5, 2, 1, vec![1, 3]).unwrap();
        let (fine, coarse) = Lattice::nested_construction_a(&coarse, &code).unwrap();
        let a = build_voronoi_code(&fine, &coarse).unwrap();
        let plain_fine = Lattice::from_basis(fine.basis().clone()).unwrap();
        let b = build_voronoi_code(&plain_fine, &coarse).unwrap();
        assert_eq!(a.len(), 5);
        for (x, y) in a.codewords().iter().zip(b.codewords()) {
            assert!(x.dist_sq(y) < 1e-20);
        }
        for x in a.codewords() {
            assert!(coarse.quantize(x).unwrap().norm() < 1e-9 || {
                // boundary points: distance to origin equals distance to the nearest coarse point
                let q = coarse.quantize(x).unwrap();
                (x.norm_sq() - x.dist_sq(&q)).abs() < 1e-9
            });
        }
    }

    #[test]
    fn non_nested_pair_is_structure_error() {
        let fine = Lattice::integer(1).unwrap();
        let coarse = Lattice::scaled_integer(1, 2.5).unwrap();
        assert!(matches!(
            build_voronoi_code(&fine, &coarse),
            Err(Error::Structure(_))
        ));
    }

    #[test]
    fn expurgation_gamma_zero_keeps_all() {
        let c = build_ball_code(&Lattice::integer(2).unwrap(), 2.0).unwrap();
        let size = c.len();
        let e = expurgate(c, 0.0, 9).unwrap();
        assert_eq!(e.len(), size);
    }

    #[test]
    fn expurgation_count_concentrates() {
        let size = 1_000_000;
        let expected = size as f64 / 16.0;
        let seeds = 100;
        let good = (0..seeds)
            .filter(|&s| {
                let kept = expurgation_mask(size, 0.25, 16, s).unwrap().iter().filter(|&&b| b).count() as f64;
                (kept - expected).abs() <= 0.05 * expected
            })
            .count();
        assert!(good as f64 >= 0.99 * seeds as f64);
    }

    #[test]
    fn expurgation_masks_independent_across_seeds() {
        let size = 200_000;
        let a = expurgation_mask(size, 0.5, 2, 1).unwrap();
        let b = expurgation_mask(size, 0.5, 2, 2).unwrap();
        let both = a.iter().zip(&b).filter(|(x, y)| **x && **y).count() as f64 / size as f64;
        assert!((both - 0.25).abs() <= 0.025, "{both}");
        assert_eq!(a, expurgation_mask(size, 0.5, 2, 1).unwrap());
    }

    #[test]
    fn expurgation_to_nothing_is_an_error() {
        let c = build_ball_code(&Lattice::integer(1).unwrap(), 1.0).unwrap();
        assert!(matches!(expurgate(c, 50.0, 1), Err(Error::DegenerateCode(_))));
        let c = build_ball_code(&Lattice::integer(1).unwrap(), 1.0).unwrap();
        assert!(expurgate(c, -1.0, 1).is_err());
    }

    #[test]
    fn expurgated_indices_are_contiguous() {
        let c = build_ball_code(&Lattice::integer(3).unwrap(), 3.0).unwrap();
        let e = expurgate(c, 0.3, 4).unwrap();
        for m in 0..e.len() {
            let x = e.encode(m).unwrap();
            assert_eq!(e.find_index(&x), Some(m));
            assert_eq!(e.base().find_index(&x), Some(e.kept()[m]));
        }
        assert!(e.encode(e.len()).is_err());
    }

    #[test]
    fn expurgation_rate_loss_is_bounded() {
        let base = build_ball_code(&Lattice::integer(4).unwrap(), 7.0).unwrap();
        let (gamma, n) = (0.5, 4.0);
        let ok = (0..200)
            .filter(|&s| {
                let e = expurgate(base.clone(), gamma, s).unwrap();
                e.rate() <= base.rate() && e.rate() >= base.rate() - gamma - 1.0 / n
            })
            .count();
        assert!(ok >= 190, "{ok}");
    }

    fn brute_ball_count(n: usize, t: i64) -> usize {
        let r = (t as f64).sqrt() as i64;
        let mut count = 0;
        let mut u = vec![-r; n];
        loop {
            if u.iter().map(|x| x * x).sum::<i64>() <= t {
                count += 1;
            }
            let mut i = 0;
            loop {
                if i == n {
                    return count;
                }
                if u[i] < r {
                    u[i] += 1;
                    break;
                }
                u[i] = -r;
                i += 1;
            }
        }
    }

    #[test]
    fn integer_ball_counts_match_brute_force() {
        for n in 1..=4 {
            for t in [1i64, 2, 5, 9] {
                let code = IntegerBallCode::new(n, 0.5, t as f64 * 0.25 / n as f64).unwrap();
                let exact = brute_ball_count(n, t) as f64;
                assert!((code.log2_size() - exact.log2()).abs() < 1e-9, "n={n} t={t}");
            }
        }
    }

    #[test]
    fn integer_ball_sampling_is_uniform() {
        let code = IntegerBallCode::new(2, 1.0, 2.5).unwrap(); // t = 5
        let explicit = build_ball_code(&Lattice::integer(2).unwrap(), 2.5).unwrap();
        let size = explicit.len();
        assert_eq!(size, 21);
        let mut counts = vec![0usize; size];
        let mut rng = SeededRng::new(1, 1);
        let draws = 42_000;
        for _ in 0..draws {
            let x = code.sample(&mut rng);
            assert!(code.contains(&x));
            counts[explicit.find_index(&x).unwrap()] += 1;
        }
        let expect = draws as f64 / size as f64;
        let sigma = (expect * (1.0 - 1.0 / size as f64)).sqrt();
        for c in counts {
            assert!((c as f64 - expect).abs() < 4.5 * sigma);
        }
    }

    #[test]
    fn integer_ball_power_and_membership() {
        let code = IntegerBallCode::new(64, 0.4, 1.0).unwrap();
        assert!(code.max_power() <= 1.0 + 1e-12);
        assert!(code.max_power() > 0.99);
        let mut rng = SeededRng::new(3, 0);
        for _ in 0..100 {
            let x = code.sample(&mut rng);
            assert!(x.norm_sq() <= 64.0 * (1.0 + 1e-9));
        }
        assert!(!code.contains(&RealVec::new(vec![0.1; 64]).unwrap()));
    }

    #[test]
    fn shell_concentration_at_n256() {
        let code = IntegerBallCode::new(256, 0.45, 1.0).unwrap();
        let mut rng = SeededRng::new(10, 0);
        let inner = (0..2000)
            .filter(|_| code.sample(&mut rng).norm_sq() <= 0.9 * 256.0)
            .count();
        assert!((inner as f64) / 2000.0 < 0.01);
    }

    #[test]
    fn scale_for_rate_hits_target() {
        let s = IntegerBallCode::scale_for_rate(16, 1.0, 1.0).unwrap();
        let c = IntegerBallCode::new(16, s, 1.0).unwrap();
        assert!(c.rate() >= 1.0);
        assert!(IntegerBallCode::new(16, s * 1.001, 1.0).unwrap().rate() < 1.0);

        let code = LinearCode::new(3, 3, 1, vec![1, 2, 1]).unwrap();
        let l = Lattice::construction_a(&code, 1.0).unwrap();
        let s = scale_for_rate(&l, 1.0, 1.5).unwrap();
        let c = build_ball_code(&l.scaled(s).unwrap(), 1.0).unwrap();
        assert!(c.rate() >= 1.5 - 1e-12);
        let c2 = build_ball_code(&l.scaled(s * 1.001).unwrap(), 1.0).unwrap();
        assert!(c2.rate() < 1.5);
    }

    #[test]
    fn spec_builds_each_representation() {
        let s: CodebookSpec = serde_json::from_str(
            r#"{"lattice":{"kind":"integer","n":1},"shaping":{"kind":"ball","power":4.0}}"#,
        )
        .unwrap();
        assert_eq!(s.build().unwrap().len(), Some(5));

        let s: CodebookSpec = serde_json::from_str(
            r#"{"lattice":{"kind":"scaled_integer","n":128,"scale":0.5},"shaping":{"kind":"ball","power":1.0}}"#,
        )
        .unwrap();
        assert!(matches!(s.build().unwrap(), Codebook::IntegerBall(_)));

        let s: CodebookSpec = serde_json::from_str(
            r#"{"lattice":{"kind":"nested_fine","coarse":{"kind":"scaled_integer","n":2,"scale":2.0},"q":2,"k":1,"G":[1,1]},"shaping":{"kind":"voronoi"}}"#,
        )
        .unwrap();
        assert_eq!(s.build().unwrap().len(), Some(2));

        let s: CodebookSpec = serde_json::from_str(
            r#"{"lattice":{"kind":"integer","n":3},"shaping":{"kind":"ball","power":3.0},"gamma":0.2,"seed":5}"#,
        )
        .unwrap();
        let c = s.build().unwrap();
        assert!(matches!(c, Codebook::Expurgated(_)));
        assert!(c.len().unwrap() < 123);

        assert!(serde_json::from_str::<CodebookSpec>(
            r#"{"lattice":{"kind":"integer","n":1},"shaping":{"kind":"ball","power":4.0},"extra":1}"#
        )
        .is_err());
    }

    #[test]
    fn in_ball_filters_to_codewords() {
        let c = Codebook::Explicit(build_ball_code(&Lattice::integer(1).unwrap(), 4.0).unwrap());
        let found: BTreeSet<usize> = c
            .in_ball(&v(&[0.2]), 1.0)
            .unwrap()
            .into_iter()
            .map(|(m, _)| m.unwrap())
            .collect();
        // codewords 0 and 1 sit at indices 2 and 3
        assert_eq!(found, BTreeSet::from([2, 3]));
        let far = c.in_ball(&v(&[10.0]), 3.0).unwrap();
        assert!(far.is_empty());
    }

    #[test]
    fn mean_of_symmetric_code_is_zero() {
        let c = Codebook::Explicit(build_ball_code(&Lattice::integer(2).unwrap(), 3.0).unwrap());
        assert!(c.mean().norm() < 1e-12);
        assert!(c.max_power() <= 3.0);
    }

    #[test]
    fn integer_ball_search_matches_brute_force() {
        let code = IntegerBallCode::new(3, 0.7, 2.0).unwrap();
        let l = Lattice::scaled_integer(3, 0.7).unwrap();
        let all: Vec<RealVec> = l
            .enumerate_in_ball(&RealVec::zeros(3), (6.0f64).sqrt() + 1.0)
            .unwrap()
            .into_iter()
            .filter(|x| code.contains(x))
            .collect();
        let mut rng = SeededRng::new(14, 0);
        for _ in 0..300 {
            let c = RealVec::new((0..3).map(|_| 6.0 * rng.uniform() - 3.0).collect()).unwrap();
            let r2 = 4.0 * rng.uniform();
            let mut got = Vec::new();
            code.visit_in_ball(&c, r2, 1_000_000, &mut |x| {
                got.push(x.clone());
                true
            })
            .unwrap();
            let mut want: Vec<RealVec> = all.iter().filter(|x| x.dist_sq(&c) <= r2).cloned().collect();
            let key = |v: &RealVec| v.iter().map(|x| (x * 1e6).round() as i64).collect::<Vec<_>>();
            got.sort_by_key(key);
            want.sort_by_key(key);
            assert_eq!(got.len(), want.len());
            for (a, b) in got.iter().zip(&want) {
                assert!(a.dist_sq(b) < 1e-20);
            }
            let mut first = 0;
            code.visit_in_ball(&c, r2, 1_000_000, &mut |_| {
                first += 1;
                false
            })
            .unwrap();
            assert_eq!(first, want.len().min(1));
        }
    }
}
