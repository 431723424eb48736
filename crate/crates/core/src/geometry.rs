//! Sumset and strip geometry as executable checks: UFO pair counting, the
//! equatorial strip and its sampler, extremal angles, the average
//! effective radius, and Monte Carlo rates of the error events.

use rayon::prelude::*;
use serde::Serialize;

use crate::adversary::{apply_attack, AttackSpec, ChannelParams};
use crate::codebook::{Codebook, LatticeCode, Shaping, POWER_SLACK};
use crate::decoder::{c2_for, clamp_alpha, estimate_alpha, estimate_r_dec, r_bar, ToleranceProfile};
use crate::error::{Error, Result};
use crate::linalg::{binomial_ci95, project_perp, RealVec, SeededRng};

/// `B(0, sqrt(nP)) cap B(z, sqrt(nP))`: the codewords consistent with `z`.
#[derive(Clone, Debug, PartialEq)]
pub struct Ufo {
    z: RealVec,
    power: f64,
}

impl Ufo {
    pub fn new(z: RealVec, power: f64) -> Result<Self> {
        if !(power > 0.0) || !power.is_finite() {
            return Err(Error::param(format!("power must be positive, got {power}")));
        }
        Ok(Ufo { z, power })
    }

    pub fn z(&self) -> &RealVec {
        &self.z
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    fn radius_sq(&self) -> f64 {
        self.z.len() as f64 * self.power
    }

    pub fn is_nonempty(&self) -> bool {
        self.z.norm_sq() <= 4.0 * self.radius_sq()
    }

    /// Squared radius `nP - ||z||^2/4` of the equatorial section.
    pub fn equator_radius_sq(&self) -> f64 {
        self.radius_sq() - self.z.norm_sq() / 4.0
    }

    pub fn contains(&self, x: &RealVec) -> bool {
        let r2 = self.radius_sq() * (1.0 + POWER_SLACK);
        x.len() == self.z.len() && x.norm_sq() <= r2 && x.dist_sq(&self.z) <= r2
    }
}

/// The slab `|<x - z/2, z>| <= ||z|| sqrt(n eps)/2` of the UFO, minus the
/// cylinder of radius `r sqrt(1 - rho)` around the `z` axis, where
/// `r^2 = nP - ||z||^2/4`.
#[derive(Clone, Debug, PartialEq)]
pub struct Strip {
    ufo: Ufo,
    rho: f64,
    eps: f64,
    z_hat: RealVec,
    z_norm: f64,
    r: f64,
}

impl Strip {
    pub fn new(z: RealVec, power: f64, rho: f64, eps: f64) -> Result<Self> {
        if !(rho > 0.0 && rho < 1.0) || !(eps > 0.0) {
            return Err(Error::param(format!("strip needs rho in (0,1) and eps > 0, got {rho}, {eps}")));
        }
        if z.len() < 2 {
            return Err(Error::domain("a strip needs dimension at least 2"));
        }
        let ufo = Ufo::new(z, power)?;
        let r2 = ufo.equator_radius_sq();
        if !(r2 > 0.0) {
            return Err(Error::domain(format!("degenerate strip: r^2 = {r2} <= 0")));
        }
        let z_norm = ufo.z.norm();
        if z_norm == 0.0 {
            return Err(Error::domain("strip around z = 0 has no axis"));
        }
        let z_hat = ufo.z.scaled(1.0 / z_norm);
        Ok(Strip {
            ufo,
            rho,
            eps,
            z_hat,
            z_norm,
            r: r2.sqrt(),
        })
    }

    pub fn ufo(&self) -> &Ufo {
        &self.ufo
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn inner_radius(&self) -> f64 {
        self.r * (1.0 - self.rho).sqrt()
    }

    /// Largest axial offset from `z/2`.
    pub fn half_width(&self) -> f64 {
        (self.dim() as f64 * self.eps).sqrt() / 2.0
    }

    fn dim(&self) -> usize {
        self.ufo.z.len()
    }

    /// `(axial offset from z/2, distance from the z axis)`.
    fn cylinder_coords(&self, x: &RealVec) -> (f64, f64) {
        let t = x.dot(&self.z_hat) - self.z_norm / 2.0;
        let along = self.z_hat.scaled(x.dot(&self.z_hat));
        (t, x.sub(&along).norm())
    }

    pub fn contains(&self, x: &RealVec) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        let (t, radial) = self.cylinder_coords(x);
        t.abs() <= self.half_width() && radial >= self.inner_radius() && self.ufo.contains(x)
    }

    /// Uniform point of the strip: axial offset and annulus radius are drawn
    /// from the exact slice volumes, the direction uniformly in `z^perp`.
    pub fn sample(&self, rng: &mut SeededRng) -> Result<RealVec> {
        let n = self.dim();
        let m = (n - 1) as f64;
        let w = self.half_width();
        let lo = self.inner_radius();
        let np = n as f64 * self.ufo.power;
        let ln_full = ln_annulus(self.r, lo, m);
        for _ in 0..1_000_000 {
            let t = w * (2.0 * rng.uniform() - 1.0);
            let rt2 = np - (self.z_norm / 2.0 + t.abs()).powi(2);
            if !(rt2 > lo * lo) {
                continue;
            }
            let rt = rt2.sqrt();
            if rng.uniform().ln() > ln_annulus(rt, lo, m) - ln_full {
                continue;
            }
            let q = (lo / rt).powf(m);
            let radial = rt * (q + rng.uniform() * (1.0 - q)).powf(1.0 / m);
            let dir = perp_direction(&self.z_hat, rng);
            return Ok(self
                .ufo
                .z
                .scaled(0.5)
                .add_scaled(t, &self.z_hat)
                .add_scaled(radial, &dir));
        }
        Err(Error::domain("strip sampler acceptance rate is too low"))
    }
}

/// `ln(hi^m - lo^m)` for `hi > lo >= 0`.
fn ln_annulus(hi: f64, lo: f64, m: f64) -> f64 {
    m * hi.ln() + (-(lo / hi).powf(m)).ln_1p()
}

/// Uniform unit vector orthogonal to the unit vector `axis`.
fn perp_direction(axis: &RealVec, rng: &mut SeededRng) -> RealVec {
    loop {
        let g = RealVec::from_raw((0..axis.len()).map(|_| rng.standard_normal()).collect());
        let p = g.add_scaled(-g.dot(axis), axis);
        let nrm = p.norm();
        if nrm > 1e-12 {
            return p.scaled(1.0 / nrm);
        }
    }
}

/// `|{(x_A, x_B) in C x C : x_A + x_B = z}|`. Ball-shaped codes count
/// lattice points of the UFO, enumerating the ball around `z/2` that
/// contains it; other codes fall back to [`count_sum_pairs_scan`].
pub fn count_sum_pairs(code: &LatticeCode, z: &RealVec) -> Result<u64> {
    if z.len() != code.n() {
        return Err(Error::Dimension {
            expected: code.n(),
            got: z.len(),
        });
    }
    let power = match code.shaping() {
        Shaping::Ball { power } => *power,
        _ => return count_sum_pairs_scan(code, z),
    };
    let r2 = code.n() as f64 * power * (1.0 + POWER_SLACK) - z.norm_sq() / 4.0;
    if r2 < 0.0 {
        return Ok(0);
    }
    let l = code.lattice();
    let mut count = 0;
    for (u, _) in l.enumerate_coeffs_in_ball(&z.scaled(0.5), r2.sqrt() * (1.0 + 1e-12))? {
        let x = l.point(&u);
        if code.find_index(&x).is_some() && code.find_index(&z.sub(&x)).is_some() {
            count += 1;
        }
    }
    Ok(count)
}

/// Same count by looking up `z - x` for every codeword `x`.
pub fn count_sum_pairs_scan(code: &LatticeCode, z: &RealVec) -> Result<u64> {
    if z.len() != code.n() {
        return Err(Error::Dimension {
            expected: code.n(),
            got: z.len(),
        });
    }
    Ok(code
        .codewords()
        .iter()
        .filter(|x| code.find_index(&z.sub(x)).is_some())
        .count() as u64)
}

/// `#{x in C_A : z - x in C_B}` for explicit codes.
pub fn count_pairs(code_a: &Codebook, code_b: &Codebook, z: &RealVec) -> Result<u64> {
    let words = code_a
        .codewords()
        .ok_or_else(|| Error::Structure("pair counting needs explicit codes".into()))?;
    if code_b.len().is_none() {
        return Err(Error::Structure("pair counting needs explicit codes".into()));
    }
    Ok(words.iter().filter(|x| code_b.find_index(&z.sub(x)).is_some()).count() as u64)
}

/// Constants of the pair-count lower bound, with `tau = r_eff^2/n` and
/// `omega = r_cov^2/n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SumsetBoundConstants {
    /// `2 sqrt(P omega) - omega + P delta/2`.
    pub c_omega: f64,
    /// `1/sqrt(2 pi (P/2 - c_omega))`.
    pub c1: f64,
    /// `1/2 log2(P/2 - c_omega) + 1/2 log2(1/tau)`.
    pub f1: f64,
}

impl SumsetBoundConstants {
    pub fn new(p: f64, tau: f64, omega: f64, delta: f64) -> Result<Self> {
        if !(p > 0.0) || !(tau > 0.0) || !(omega >= 0.0) || !(delta >= 0.0) {
            return Err(Error::param("sumset bound needs P, tau > 0 and omega, delta >= 0"));
        }
        let c_omega = 2.0 * (p * omega).sqrt() - omega + p * delta / 2.0;
        let a = p / 2.0 - c_omega;
        if !(a > 0.0) {
            return Err(Error::domain(format!("P/2 = {} does not exceed c_omega = {c_omega}", p / 2.0)));
        }
        Ok(SumsetBoundConstants {
            c_omega,
            c1: 1.0 / (2.0 * std::f64::consts::PI * a).sqrt(),
            f1: 0.5 * a.log2() + 0.5 * (1.0 / tau).log2(),
        })
    }
}

/// `C_1 ((P/2 - c_omega)/tau)^{n/2}`.
pub fn sumset_lower_bound(p: f64, tau: f64, omega: f64, delta: f64, n: usize) -> Result<f64> {
    let k = SumsetBoundConstants::new(p, tau, omega, delta)?;
    Ok(k.c1 * 2f64.powf(n as f64 * k.f1))
}

pub fn strip_membership(strip: &Strip, x: &RealVec) -> bool {
    strip.contains(x)
}

/// `(cos angle_min, cos angle_max)` with `1 - ||z||^2/(2nP)` and
/// `1 - ||z||^2 / (2((1-rho) nP + rho ||z||^2/4))`; the cosine of every
/// strip pair summing to `z` lies in `[-cos angle_min, -cos angle_max]`.
pub fn extremal_cos(z_norm_sq: f64, n: usize, p: f64, rho: f64) -> Result<(f64, f64)> {
    let np = n as f64 * p;
    if !(z_norm_sq >= 0.0) || z_norm_sq > 4.0 * np {
        return Err(Error::domain(format!("||z||^2 = {z_norm_sq} exceeds 4nP = {}", 4.0 * np)));
    }
    let cos_min = 1.0 - z_norm_sq / (2.0 * np);
    let cos_max = 1.0 - z_norm_sq / (2.0 * ((1.0 - rho) * np + rho * z_norm_sq / 4.0));
    Ok((cos_min, cos_max))
}

pub fn cos_angle(a: &RealVec, b: &RealVec) -> f64 {
    a.dot(b) / (a.norm() * b.norm())
}

/// `(||x~||^2/n)(1 - (||x~||^2 + <x~,s>)^2 / (||x~ + s||^2 ||x~||^2))`, the
/// squared sine of the angle between `x~` and `x~ + s`, scaled.
pub fn avg_effective_radius_sample(x_tilde: &RealVec, s_perp: &RealVec) -> Result<f64> {
    if x_tilde.len() != s_perp.len() {
        return Err(Error::Dimension {
            expected: x_tilde.len(),
            got: s_perp.len(),
        });
    }
    let xx = x_tilde.norm_sq();
    let xs = x_tilde.dot(s_perp);
    let yy = x_tilde.add(s_perp).norm_sq();
    if !(yy > 0.0 && xx > 0.0) {
        return Err(Error::Degenerate("received vector or signal is zero".into()));
    }
    let n = x_tilde.len() as f64;
    Ok(((xx / n) * (1.0 - (xx + xs).powi(2) / (yy * xx))).max(0.0))
}

/// Outcome of sampling strip pairs `(x, z - x)` against the angle bracket.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AngleCheck {
    pub samples: u64,
    /// `[-cos angle_min, -cos angle_max]`.
    pub bracket: (f64, f64),
    pub min_cos: f64,
    pub max_cos: f64,
    /// Pairs outside the bracket widened by `slack`.
    pub violations: u64,
}

/// Samples `samples` strip points around a random `z` with
/// `||z||^2 = z_ratio * 2nP` and checks each pair's cosine.
#[allow(clippy::too_many_arguments)]
pub fn strip_angle_check(
    n: usize,
    p: f64,
    rho: f64,
    eps: f64,
    z_ratio: f64,
    samples: u64,
    slack: f64,
    rng: &mut SeededRng,
) -> Result<AngleCheck> {
    let g = crate::linalg::sample_unit_vector(n, rng);
    let z = g.scaled((z_ratio * 2.0 * n as f64 * p).sqrt());
    let strip = Strip::new(z.clone(), p, rho, eps)?;
    let (cmin, cmax) = extremal_cos(z.norm_sq(), n, p, rho)?;
    let bracket = (-cmin, -cmax);
    let (mut lo, mut hi, mut violations) = (f64::INFINITY, f64::NEG_INFINITY, 0);
    for _ in 0..samples {
        let x = strip.sample(rng)?;
        let c = cos_angle(&x, &z.sub(&x));
        lo = lo.min(c);
        hi = hi.max(c);
        violations += (c < bracket.0 - slack || c > bracket.1 + slack) as u64;
    }
    Ok(AngleCheck {
        samples,
        bracket,
        min_cos: lo,
        max_cos: hi,
        violations,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RadiusCheck {
    pub samples: u64,
    pub mean: f64,
    /// `P~ N~ / (P~ + N~)`.
    pub target: f64,
    pub rel_err: f64,
}

/// Mean of [`avg_effective_radius_sample`] with `x~` uniform on the strip
/// around a typical `z` (`||z||^2 = 2nP`, `P~ = P`) and `s_perp` Gaussian
/// of variance `N~` projected orthogonally to `z`.
#[allow(clippy::too_many_arguments)]
pub fn avg_radius_check(
    n: usize,
    p: f64,
    n_tilde: f64,
    rho: f64,
    eps: f64,
    samples: u64,
    rng: &mut SeededRng,
) -> Result<RadiusCheck> {
    if samples == 0 || !(n_tilde > 0.0) {
        return Err(Error::param("need samples >= 1 and N~ > 0"));
    }
    let z = crate::linalg::sample_unit_vector(n, rng).scaled((2.0 * n as f64 * p).sqrt());
    let z_hat = z.scaled(1.0 / z.norm());
    let strip = Strip::new(z, p, rho, eps)?;
    let mut acc = 0.0;
    for _ in 0..samples {
        let x = strip.sample(rng)?;
        let g = crate::linalg::sample_gaussian(n, n_tilde, rng)?;
        let sp = g.add_scaled(-g.dot(&z_hat), &z_hat);
        acc += avg_effective_radius_sample(&x, &sp)?;
    }
    let mean = acc / samples as f64;
    let target = r_bar(p, n_tilde);
    Ok(RadiusCheck {
        samples,
        mean,
        target,
        rel_err: (mean - target).abs() / target,
    })
}

/// Frequency with its 95% interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Rate {
    pub count: u64,
    pub trials: u64,
    pub freq: f64,
    pub ci95: (f64, f64),
}

impl Rate {
    pub fn new(count: u64, trials: u64) -> Self {
        Rate {
            count,
            trials,
            freq: if trials == 0 { 0.0 } else { count as f64 / trials as f64 },
            ci95: binomial_ci95(count, trials),
        }
    }
}

/// The error events of the analysis, in table order.
pub const EVENTS: [&str; 14] = [
    "E_len", "E_inprod", "E_z", "E_zz", "E", "E_sumset", "E_T", "E_1", "E_2", "E_3", "E_prime", "E_alpha",
    "E_decrad", "E_avgrad",
];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EventRate {
    pub name: &'static str,
    /// Trials on which the event could be evaluated.
    pub rate: Rate,
}

/// An inclusion `event ⊆ union(cover)` checked trial by trial.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ImplicationCheck {
    pub event: &'static str,
    pub cover: Vec<&'static str>,
    /// False when the tolerance profile violates the inclusion's premise;
    /// violations are still counted.
    pub premise_holds: bool,
    pub violations: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EventTable {
    pub trials: u64,
    pub events: Vec<EventRate>,
    pub implications: Vec<ImplicationCheck>,
}

impl EventTable {
    pub fn rate(&self, name: &str) -> Option<&Rate> {
        self.events.iter().find(|e| e.name == name).map(|e| &e.rate)
    }
}

/// Per-trial event indicators; `None` where an event is undefined.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct EventFlags {
    flags: [Option<bool>; 14],
    /// Realized `alpha = -<s,z>/||z||^2`.
    pub alpha: f64,
}

impl EventFlags {
    pub fn get(&self, name: &str) -> Option<bool> {
        EVENTS.iter().position(|e| *e == name).and_then(|i| self.flags[i])
    }

    fn set(&mut self, name: &str, v: Option<bool>) {
        self.flags[EVENTS.iter().position(|e| *e == name).expect("known event")] = v;
    }
}

fn outside(v: f64, lo: f64, hi: f64) -> bool {
    v < lo || v > hi
}

/// Evaluates every event except `E_sumset` on one realization, for codeword
/// power `p` and nominal jamming power `noise` per symbol.
pub fn trial_events(
    xa: &RealVec,
    xb: &RealVec,
    s: &RealVec,
    p: f64,
    noise: f64,
    tol: &ToleranceProfile,
) -> Result<EventFlags> {
    let n = xa.len();
    if xb.len() != n || s.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: if xb.len() != n { xb.len() } else { s.len() },
        });
    }
    let nf = n as f64;
    let z = xa.add(xb);
    let y = z.add(s);
    let mut ev = EventFlags::default();

    let len_lo = nf * p * (1.0 - tol.zeta1);
    let e_len = xa.norm_sq() <= len_lo || xb.norm_sq() <= len_lo;
    ev.set("E_len", Some(e_len));
    let ip = xa.dot(xb);
    let e_inprod = ip.abs() >= nf * p * tol.zeta1;
    ev.set("E_inprod", Some(e_inprod));
    let z2 = z.norm_sq();
    let e_z = outside(z2, 2.0 * nf * p * (1.0 - tol.delta), 2.0 * nf * p * (1.0 + tol.delta));
    ev.set("E_z", Some(e_z));
    ev.set("E", Some(e_len || e_inprod || e_z));

    let (alpha, s_perp) = if z2 > 0.0 { project_perp(s, &z)? } else { (0.0, s.clone()) };
    ev.alpha = alpha;
    let a2 = alpha * alpha;
    let sp2 = s_perp.norm_sq();
    ev.set(
        "E_zz",
        Some(outside(
            sp2,
            nf * (noise - 2.0 * a2 * p * (1.0 + tol.delta)),
            nf * (noise - 2.0 * a2 * p * (1.0 - tol.delta)),
        )),
    );

    let strip = Strip::new(z.clone(), p, tol.rho, tol.eps_strip).ok();
    let e_t = strip.as_ref().is_none_or(|st| !st.contains(xa) || !st.contains(xb));
    ev.set("E_T", Some(e_t));
    let e1 = (z2 <= 4.0 * nf * p).then(|| {
        let lo = nf * (p - c2_for(z2, n, p, tol.rho, tol.eps_strip));
        xa.norm_sq() <= lo || xb.norm_sq() <= lo
    });
    ev.set("E_1", e1);
    let e2 = ip.abs() >= nf * p * tol.theta();
    ev.set("E_2", Some(e2));
    let e3 = xa.dot(&s_perp).abs() >= nf * tol.zeta || xb.dot(&s_perp).abs() >= nf * tol.zeta;
    ev.set("E_3", Some(e3));
    ev.set("E_prime", Some(e1.unwrap_or(true) || e2 || e3));

    let alpha_hat = clamp_alpha(estimate_alpha(&y, xb, p)?).0;
    ev.set("E_alpha", Some((alpha_hat - alpha).abs() > tol.xi));
    let r_dec = estimate_r_dec(&y, xb, alpha_hat)?;
    ev.set(
        "E_decrad",
        Some(outside(
            r_dec,
            nf * (noise - 2.0 * a2 * p * (1.0 + tol.delta) - tol.mu),
            nf * (noise - 2.0 * a2 * p * (1.0 - tol.delta) + tol.mu),
        )),
    );
    let p_tilde = (1.0 - alpha).powi(2) * p;
    let n_tilde = noise - 2.0 * a2 * p;
    let x_tilde = xa.scaled(1.0 - alpha);
    let e_avg = if n_tilde >= 0.0 && p_tilde > 0.0 && x_tilde.add(&s_perp).norm_sq() > 0.0 {
        let r = avg_effective_radius_sample(&x_tilde, &s_perp)?;
        Some((r - r_bar(p_tilde, n_tilde)).abs() > tol.nu)
    } else {
        None
    };
    ev.set("E_avgrad", e_avg);
    Ok(ev)
}

/// Monte Carlo frequencies of the error events at Bob's receiver on a
/// symmetric channel. Codewords are drawn uniformly and James plays
/// `attack`; the nominal jamming power is 0 for the silent jammer and `N`
/// otherwise. `E_sumset` is evaluated for explicit codes only.
pub fn empirical_event_rates(
    code_a: &Codebook,
    code_b: &Codebook,
    params: &ChannelParams,
    attack: &AttackSpec,
    tol: &ToleranceProfile,
    trials: u64,
    root_seed: u64,
) -> Result<EventTable> {
    if trials == 0 {
        return Err(Error::param("trials must be at least 1"));
    }
    if !params.is_symmetric() {
        return Err(Error::param("event rates are defined for symmetric channels"));
    }
    tol.validate()?;
    attack.validate(params)?;
    let nf = params.n as f64;
    let p = params.pa;
    let noise = if matches!(attack, AttackSpec::Silent {}) { 0.0 } else { params.nb };
    let sumset_threshold = if code_a.len().is_some() && code_b.len().is_some() {
        let radii = code_a.lattice().radii(10_000);
        SumsetBoundConstants::new(p, radii.tau, radii.omega, tol.delta)
            .ok()
            .map(|k| 2f64.powf(nf * k.f1))
    } else {
        None
    };

    let per_trial = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = SeededRng::derive(root_seed, &[t, 0x6576]);
            let (_, xa) = code_a.draw(&mut rng);
            let (_, xb) = code_b.draw(&mut rng);
            let z = xa.add(&xb);
            let jam = apply_attack(attack, &z, code_a, code_b, params, None, &mut rng)?;
            let mut ev = trial_events(&xa, &xb, &jam.s, p, noise, tol)?;
            if let Some(threshold) = sumset_threshold {
                ev.set("E_sumset", Some((count_pairs(code_a, code_b, &z)? as f64) <= threshold));
            }
            Ok(ev)
        })
        .collect::<Result<Vec<_>>>()?;

    let events = EVENTS
        .iter()
        .map(|&name| {
            let defined: Vec<bool> = per_trial.iter().filter_map(|e| e.get(name)).collect();
            EventRate {
                name,
                rate: Rate::new(defined.iter().filter(|&&b| b).count() as u64, defined.len() as u64),
            }
        })
        .collect();

    let violations = |event: &str, cover: &[&str], gate: &dyn Fn(f64) -> bool| -> u64 {
        per_trial
            .iter()
            .filter(|e| {
                gate(e.alpha)
                    && e.get(event) == Some(true)
                    && cover.iter().all(|c| e.get(c) == Some(false))
            })
            .count() as u64
    };
    let always = |_: f64| true;
    let c2_sup = tol.c2_bound(p);
    // the alpha estimate is good once xi >= (zeta + (1-alpha)(P theta + c_2))/P
    let xi_ok = |alpha: f64| tol.xi >= (tol.zeta + (1.0 - alpha) * (p * tol.theta() + c2_sup)) / p;
    let xi_premise = per_trial.iter().all(|e| xi_ok(e.alpha));
    let mut implications = Vec::new();
    for (event, cover) in [
        ("E_len", vec!["E"]),
        ("E_inprod", vec!["E"]),
        ("E_z", vec!["E"]),
        ("E_1", vec!["E_prime"]),
        ("E_2", vec!["E_prime"]),
        ("E_3", vec!["E_prime"]),
        ("E_1", vec!["E_z", "E_T"]),
        ("E_2", vec!["E_z", "E_T"]),
    ] {
        implications.push(ImplicationCheck {
            event,
            violations: violations(event, &cover, &always),
            cover,
            premise_holds: true,
        });
    }
    let cover = vec!["E_z", "E_T", "E_prime"];
    implications.push(ImplicationCheck {
        event: "E_alpha",
        violations: violations("E_alpha", &cover, &xi_ok),
        cover,
        premise_holds: xi_premise,
    });
    Ok(EventTable {
        trials,
        events,
        implications,
    })
}

/// One row per labelled configuration, one column per event frequency.
pub fn event_csv(rows: &[(String, EventTable)]) -> String {
    let mut out = String::from("config,trials");
    for e in EVENTS {
        out.push(',');
        out.push_str(e);
    }
    out.push('\n');
    for (label, table) in rows {
        out.push_str(&format!("{label},{}", table.trials));
        for e in EVENTS {
            match table.rate(e) {
                Some(r) if r.trials > 0 => out.push_str(&format!(",{}", r.freq)),
                _ => out.push(','),
            }
        }
        out.push('\n');
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OrthogonalityStats {
    /// `<x_1, x_2> > n eta`.
    pub one_sided: Rate,
    /// `|<x_1, x_2>| > n eta`.
    pub two_sided: Rate,
}

/// Monte Carlo estimate over independent uniform draws from both codes.
pub fn empirical_orthogonality(
    code_a: &Codebook,
    code_b: &Codebook,
    eta: f64,
    trials: u64,
    rng: &mut SeededRng,
) -> Result<OrthogonalityStats> {
    check_codes(code_a, code_b)?;
    let thr = code_a.n() as f64 * eta;
    let (mut one, mut two) = (0, 0);
    for _ in 0..trials {
        let ip = code_a.draw(rng).1.dot(&code_b.draw(rng).1);
        one += (ip > thr) as u64;
        two += (ip.abs() > thr) as u64;
    }
    Ok(OrthogonalityStats {
        one_sided: Rate::new(one, trials),
        two_sided: Rate::new(two, trials),
    })
}

/// Exact fractions over all pairs of two explicit codes.
pub fn orthogonality_exhaustive(code_a: &Codebook, code_b: &Codebook, eta: f64) -> Result<OrthogonalityStats> {
    check_codes(code_a, code_b)?;
    let (wa, wb) = match (code_a.codewords(), code_b.codewords()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::Structure("exhaustive enumeration needs explicit codes".into())),
    };
    let thr = code_a.n() as f64 * eta;
    let (mut one, mut two) = (0, 0);
    for a in &wa {
        for b in &wb {
            let ip = a.dot(b);
            one += (ip > thr) as u64;
            two += (ip.abs() > thr) as u64;
        }
    }
    let total = (wa.len() * wb.len()) as u64;
    Ok(OrthogonalityStats {
        one_sided: Rate::new(one, total),
        two_sided: Rate::new(two, total),
    })
}

/// Frequency with which some pair among one draw from each code has
/// `|<x_i, x_j>| > n eta`.
pub fn kwise_orthogonality(codes: &[&Codebook], eta: f64, trials: u64, rng: &mut SeededRng) -> Result<Rate> {
    if codes.len() < 2 {
        return Err(Error::param("k-wise orthogonality needs at least two codes"));
    }
    for c in &codes[1..] {
        check_codes(codes[0], c)?;
    }
    let thr = codes[0].n() as f64 * eta;
    let mut hits = 0;
    for _ in 0..trials {
        let xs: Vec<RealVec> = codes.iter().map(|c| c.draw(rng).1).collect();
        let bad = (0..xs.len()).any(|i| (i + 1..xs.len()).any(|j| xs[i].dot(&xs[j]).abs() > thr));
        hits += bad as u64;
    }
    Ok(Rate::new(hits, trials))
}

fn check_codes(a: &Codebook, b: &Codebook) -> Result<()> {
    if a.n() != b.n() {
        return Err(Error::Dimension {
            expected: a.n(),
            got: b.n(),
        });
    }
    if a.len() == Some(0) || b.len() == Some(0) {
        return Err(Error::DegenerateCode("empty codebook".into()));
    }
    Ok(())
}
