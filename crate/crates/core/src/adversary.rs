//! James: jamming strategies that map the observation `z = x_A + x_B` to a
//! power-limited vector `s`.
//!
//! All strategies here attack Bob's receiver, so the jamming budget is
//! `n N_B`. Use [`ChannelParams::toward_alice`] to attack Alice instead.

use serde::{Deserialize, Serialize};

use crate::bounds::optimize_alpha;
use crate::codebook::Codebook;
use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::linalg::{binomial_ci95, sample_gaussian, RealVec, SeededRng};

/// Relative slack used by the power audit.
pub const POWER_TOL: f64 = 1e-9;

/// Blocklength and per-symbol power budgets.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelParams {
    pub n: usize,
    pub pa: f64,
    pub pb: f64,
    pub na: f64,
    pub nb: f64,
}

impl ChannelParams {
    pub fn new(n: usize, pa: f64, pb: f64, na: f64, nb: f64) -> Result<Self> {
        let p = ChannelParams { n, pa, pb, na, nb };
        p.validate()?;
        Ok(p)
    }

    pub fn symmetric(n: usize, p: f64, noise: f64) -> Result<Self> {
        Self::new(n, p, p, noise, noise)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::param("blocklength must be positive"));
        }
        for (name, v) in [("pa", self.pa), ("pb", self.pb), ("na", self.na), ("nb", self.nb)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::param(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn is_symmetric(&self) -> bool {
        self.pa == self.pb && self.na == self.nb
    }

    /// Roles swapped, so that Bob-side routines describe Alice's receiver.
    pub fn toward_alice(&self) -> Self {
        ChannelParams {
            n: self.n,
            pa: self.pb,
            pb: self.pa,
            na: self.nb,
            nb: self.na,
        }
    }

    /// `n N_B`, the squared-norm budget of the jamming vector.
    pub fn jam_budget(&self) -> f64 {
        self.n as f64 * self.nb
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum User {
    A,
    B,
}

/// Serializable description of a jammer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AttackSpec {
    Silent {},
    ScaleAndBabble {
        /// Defaults to the worst case `N_B / (P_A + P_B)`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha: Option<f64>,
        eps: f64,
        #[serde(default)]
        center_correction: bool,
    },
    ZAwareSymmetrization {
        victim: User,
    },
    RandomCodeword {
        victim: User,
    },
    GaussianBabble {
        /// Defaults to `0.95 N_B`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        variance: Option<f64>,
    },
    NetSearch {
        eta_prime: f64,
    },
}

impl AttackSpec {
    pub fn validate(&self, params: &ChannelParams) -> Result<()> {
        match self {
            AttackSpec::ScaleAndBabble { alpha, eps, .. } => {
                let a = alpha.unwrap_or_else(|| optimize_alpha(params).0);
                babble_variance(params, a, *eps).map(|_| ())
            }
            AttackSpec::GaussianBabble { variance: Some(v) } if !(*v >= 0.0) => {
                Err(Error::param(format!("babble variance must be nonnegative, got {v}")))
            }
            AttackSpec::NetSearch { eta_prime } if !(*eta_prime > 0.0) => {
                Err(Error::param(format!("net spacing eta' must be positive, got {eta_prime}")))
            }
            _ => Ok(()),
        }
    }

    /// The scaling parameter James commits to, where there is one.
    pub fn alpha(&self, params: &ChannelParams) -> Option<f64> {
        match self {
            AttackSpec::ScaleAndBabble { alpha, .. } => Some(alpha.unwrap_or_else(|| optimize_alpha(params).0)),
            _ => None,
        }
    }
}

/// Projects onto the sphere of squared radius `budget_sq` when outside it.
/// A vector exactly on the sphere is not truncated.
pub fn clamp_to_sphere(s_tilde: RealVec, budget_sq: f64) -> (RealVec, bool) {
    let nrm = s_tilde.norm_sq();
    if nrm > budget_sq {
        let c = (budget_sq / nrm).sqrt();
        (s_tilde.scaled(c), true)
    } else {
        (s_tilde, false)
    }
}

/// `gamma^2 = N_B - alpha^2 (P_A + P_B)(1 + 2 eps)`; in the symmetric case
/// `N - 2 alpha^2 P (1 + 2 eps)`.
pub fn babble_variance(params: &ChannelParams, alpha: f64, eps: f64) -> Result<f64> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::param(format!("eps must be positive, got {eps}")));
    }
    if !alpha.is_finite() {
        return Err(Error::param("alpha must be finite"));
    }
    let g2 = params.nb - alpha * alpha * (params.pa + params.pb) * (1.0 + 2.0 * eps);
    if g2 < 0.0 {
        return Err(Error::param(format!(
            "scale-and-babble infeasible: gamma^2 = {g2} < 0 for alpha = {alpha}, eps = {eps}"
        )));
    }
    Ok(g2)
}

/// `s~ = -alpha z + g`, `g ~ N(0, gamma^2 I)`, clamped to the power sphere.
pub fn scale_and_babble(
    z: &RealVec,
    params: &ChannelParams,
    alpha: f64,
    eps: f64,
    rng: &mut SeededRng,
) -> Result<(RealVec, bool)> {
    let g2 = babble_variance(params, alpha, eps)?;
    let g = sample_gaussian(z.len(), g2, rng)?;
    Ok(clamp_to_sphere(g.add_scaled(-alpha, z), params.jam_budget()))
}

/// Scale-and-babble around the codebook means: `s~ = -alpha (z - a - b) + g`.
#[allow(clippy::too_many_arguments)]
pub fn scale_and_babble_centered(
    z: &RealVec,
    params: &ChannelParams,
    alpha: f64,
    eps: f64,
    mean_a: &RealVec,
    mean_b: &RealVec,
    rng: &mut SeededRng,
) -> Result<(RealVec, bool)> {
    if mean_a.len() != z.len() || mean_b.len() != z.len() {
        return Err(Error::Dimension {
            expected: z.len(),
            got: mean_a.len().min(mean_b.len()),
        });
    }
    scale_and_babble(&z.sub(mean_a).sub(mean_b), params, alpha, eps, rng)
}

/// Z-aware symmetrization: draw a spoof codeword `x'` from the victim's
/// code and send `s~ = -(z - x')/2`. Returns the clamped vector, the
/// truncation flag, the spoof index (explicit codes only) and `x'`.
pub fn z_aware_symmetrization(
    z: &RealVec,
    victim: &Codebook,
    params: &ChannelParams,
    rng: &mut SeededRng,
) -> Result<(RealVec, bool, Option<usize>, RealVec)> {
    if victim.n() != z.len() {
        return Err(Error::Dimension {
            expected: z.len(),
            got: victim.n(),
        });
    }
    let (m, x_spoof) = victim.draw(rng);
    let s_tilde = x_spoof.sub(z).scaled(0.5);
    let (s, t) = clamp_to_sphere(s_tilde, params.jam_budget());
    Ok((s, t, m, x_spoof))
}

/// A uniformly drawn victim codeword, independent of `z`.
pub fn random_codeword_attack(victim: &Codebook, params: &ChannelParams, rng: &mut SeededRng) -> (RealVec, bool) {
    let (_, x) = victim.draw(rng);
    clamp_to_sphere(x, params.jam_budget())
}

/// `s ~ N(0, v I)` clamped to the sphere; `v` defaults to `0.95 N_B`.
pub fn gaussian_babble(params: &ChannelParams, variance: Option<f64>, rng: &mut SeededRng) -> Result<(RealVec, bool)> {
    let v = variance.unwrap_or(0.95 * params.nb);
    let g = sample_gaussian(params.n, v, rng)?;
    Ok(clamp_to_sphere(g, params.jam_budget()))
}

/// What a decoder makes of a received word.
pub trait DecodeObjective {
    /// `(error, margin)`: whether decoding `y` fails, and a score that
    /// decreases as `y` approaches an error.
    fn evaluate(&self, y: &RealVec) -> Result<(bool, f64)>;
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetSearchOutcome {
    pub s: RealVec,
    pub margin: f64,
    pub causes_error: bool,
    pub net_size: usize,
}

/// Exhaustive search over the net `a Z^n` (`a = 2 sqrt(eta')`, covering
/// radius `sqrt(n eta')`) of the jamming ball; net points outside the ball
/// are projected onto its sphere. Returns the first point that causes a
/// decoding error, or else the one with the smallest margin.
pub fn net_search_attack(
    z: &RealVec,
    objective: &dyn DecodeObjective,
    params: &ChannelParams,
    eta_prime: f64,
    budget: u64,
) -> Result<NetSearchOutcome> {
    if !(eta_prime > 0.0) {
        return Err(Error::param(format!("net spacing eta' must be positive, got {eta_prime}")));
    }
    let n = z.len();
    let est = ((params.nb / eta_prime).sqrt() + 1.0).powi(n as i32);
    if est > budget as f64 {
        return Err(Error::Capacity { estimated: est, budget });
    }
    let a = 2.0 * eta_prime.sqrt();
    let net = Lattice::scaled_integer(n, a)?.with_budget(budget);
    let radius = params.jam_budget().sqrt() + (n as f64 * eta_prime).sqrt();
    let pts = net.enumerate_coeffs_in_ball(&RealVec::zeros(n), radius)?;
    let net_size = pts.len();
    let mut best: Option<(RealVec, f64)> = None;
    for (u, _) in pts {
        let (s, _) = clamp_to_sphere(net.point(&u), params.jam_budget());
        let (err, margin) = objective.evaluate(&z.add(&s))?;
        if err {
            return Ok(NetSearchOutcome {
                s,
                margin,
                causes_error: true,
                net_size,
            });
        }
        if best.as_ref().is_none_or(|(_, m)| margin < *m) {
            best = Some((s, margin));
        }
    }
    let (s, margin) = best.expect("net contains the origin");
    Ok(NetSearchOutcome {
        s,
        margin,
        causes_error: false,
        net_size,
    })
}

/// Output of one jamming step.
#[derive(Clone, Debug, PartialEq)]
pub struct JamOutcome {
    pub s: RealVec,
    pub truncated: bool,
    pub spoof_index: Option<usize>,
    pub spoof: Option<RealVec>,
}

/// Runs the strategy described by `spec` against Bob. `objective` is
/// required by the net search only.
pub fn apply_attack(
    spec: &AttackSpec,
    z: &RealVec,
    code_a: &Codebook,
    code_b: &Codebook,
    params: &ChannelParams,
    objective: Option<&dyn DecodeObjective>,
    rng: &mut SeededRng,
) -> Result<JamOutcome> {
    let plain = |(s, truncated): (RealVec, bool)| JamOutcome {
        s,
        truncated,
        spoof_index: None,
        spoof: None,
    };
    let victim = |u: &User| match u {
        User::A => code_a,
        User::B => code_b,
    };
    match spec {
        AttackSpec::Silent {} => Ok(plain((RealVec::zeros(z.len()), false))),
        AttackSpec::ScaleAndBabble {
            eps,
            center_correction,
            ..
        } => {
            let alpha = spec.alpha(params).expect("scale-and-babble has alpha");
            if *center_correction {
                scale_and_babble_centered(z, params, alpha, *eps, &code_a.mean(), &code_b.mean(), rng).map(plain)
            } else {
                scale_and_babble(z, params, alpha, *eps, rng).map(plain)
            }
        }
        AttackSpec::ZAwareSymmetrization { victim: u } => {
            let (s, truncated, m, x) = z_aware_symmetrization(z, victim(u), params, rng)?;
            Ok(JamOutcome {
                s,
                truncated,
                spoof_index: m,
                spoof: Some(x),
            })
        }
        AttackSpec::RandomCodeword { victim: u } => Ok(plain(random_codeword_attack(victim(u), params, rng))),
        AttackSpec::GaussianBabble { variance } => gaussian_babble(params, *variance, rng).map(plain),
        AttackSpec::NetSearch { eta_prime } => {
            let obj = objective.ok_or_else(|| Error::Config("net search needs a decoder objective".into()))?;
            let out = net_search_attack(z, obj, params, *eta_prime, code_a.lattice().budget())?;
            Ok(plain((out.s, false)))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TruncationStats {
    pub trials: u64,
    pub truncated: u64,
    pub q_hat: f64,
    pub ci95: (f64, f64),
}

/// Monte Carlo estimate of the probability that the strategy has to be
/// projected onto the power sphere. Trial `t` draws from stream `t` of the
/// seed carried by `rng`.
pub fn estimate_truncation_q(
    spec: &AttackSpec,
    code_a: &Codebook,
    code_b: &Codebook,
    params: &ChannelParams,
    trials: u64,
    rng: &SeededRng,
) -> Result<TruncationStats> {
    if trials == 0 {
        return Err(Error::param("trials must be at least 1"));
    }
    if matches!(spec, AttackSpec::NetSearch { .. }) {
        return Err(Error::param("net search never truncates; nothing to estimate"));
    }
    spec.validate(params)?;
    let mut truncated = 0u64;
    for t in 0..trials {
        let mut r = SeededRng::derive(rng.root_seed(), &[rng.stream_id(), t]);
        let (_, xa) = code_a.draw(&mut r);
        let (_, xb) = code_b.draw(&mut r);
        let out = apply_attack(spec, &xa.add(&xb), code_a, code_b, params, None, &mut r)?;
        truncated += out.truncated as u64;
    }
    Ok(TruncationStats {
        trials,
        truncated,
        q_hat: truncated as f64 / trials as f64,
        ci95: binomial_ci95(truncated, trials),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codebook::{build_ball_code, IntegerBallCode};
    use crate::lattice::Lattice;

    fn v(x: &[f64]) -> RealVec {
        RealVec::new(x.to_vec()).unwrap()
    }

    fn ball(n: usize, scale: f64, p: f64) -> Codebook {
        Codebook::IntegerBall(IntegerBallCode::new(n, scale, p).unwrap())
    }

    #[test]
    fn params_validation() {
        assert!(ChannelParams::new(0, 1.0, 1.0, 1.0, 1.0).is_err());
        assert!(ChannelParams::new(4, 1.0, -1.0, 1.0, 1.0).is_err());
        let p = ChannelParams::symmetric(4, 2.0, 1.0).unwrap();
        assert!(p.is_symmetric());
        let q = ChannelParams::new(4, 2.0, 1.0, 0.5, 0.7).unwrap();
        assert_eq!(q.toward_alice().toward_alice(), q);
        assert_eq!(q.toward_alice().nb, 0.5);
    }

    #[test]
    fn babble_variance_example() {
        let p = ChannelParams::symmetric(1, 1.0, 0.5).unwrap();
        let g2 = babble_variance(&p, 0.25, 0.01).unwrap();
        assert!((g2 - 0.3725).abs() < 1e-12);
        assert!(babble_variance(&p, 0.6, 0.01).is_err());
        assert!(babble_variance(&p, 0.1, 0.0).is_err());
    }

    #[test]
    fn zero_babble_is_pure_scaling() {
        // N = 2 alpha^2 P (1 + 2 eps) leaves gamma = 0
        let (alpha, eps, pw) = (0.3, 0.05, 1.0);
        let noise = 2.0 * alpha * alpha * pw * (1.0 + 2.0 * eps);
        let p = ChannelParams::symmetric(2, pw, noise).unwrap();
        let z = v(&[1.0, 1.0]); // |z|^2 = 2 = 2nP/2
        let (s, t) = scale_and_babble(&z, &p, alpha, eps, &mut SeededRng::new(1, 1)).unwrap();
        assert!(!t);
        assert!(s.dist_sq(&z.scaled(-alpha)) < 1e-30);
    }

    #[test]
    fn silent_attack_is_zero() {
        let p = ChannelParams::symmetric(3, 1.0, 1.0).unwrap();
        let c = ball(3, 1.0, 1.0);
        let out = apply_attack(&AttackSpec::Silent {}, &v(&[1.0, 0.0, 0.0]), &c, &c, &p, None, &mut SeededRng::new(0, 0)).unwrap();
        assert_eq!(out.s.norm(), 0.0);
        assert!(!out.truncated);
        let q = estimate_truncation_q(&AttackSpec::Silent {}, &c, &c, &p, 50, &SeededRng::new(0, 0)).unwrap();
        assert_eq!(q.q_hat, 0.0);
    }

    #[test]
    fn clamping_rule() {
        let (s, t) = clamp_to_sphere(v(&[3.0, 4.0]), 25.0);
        assert!(!t);
        assert_eq!(s.as_slice(), &[3.0, 4.0]);
        let (s, t) = clamp_to_sphere(v(&[6.0, 8.0]), 25.0);
        assert!(t);
        assert!((s.norm() - 5.0).abs() < 1e-12);
        assert!((s[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn reconstruction_identity_without_truncation() {
        let n = 64;
        let p = ChannelParams::symmetric(n, 1.0, 0.3).unwrap();
        let code = ball(n, 0.5, 1.0);
        let (alpha, eps) = (0.15, 0.05);
        let mut hits = 0;
        for t in 0..200 {
            let mut r = SeededRng::new(3, t);
            let xa = code.draw(&mut r).1;
            let xb = code.draw(&mut r).1;
            let z = xa.add(&xb);
            let mut r1 = SeededRng::new(9, t);
            let mut r2 = r1.clone();
            let (s, trunc) = scale_and_babble(&z, &p, alpha, eps, &mut r1).unwrap();
            assert!(s.norm_sq() <= p.jam_budget() * (1.0 + POWER_TOL));
            if !trunc {
                hits += 1;
                let g = sample_gaussian(n, babble_variance(&p, alpha, eps).unwrap(), &mut r2).unwrap();
                let y = z.add(&s);
                let resid = y.add_scaled(-(1.0 - alpha), &xb).add_scaled(-(1.0 - alpha), &xa);
                assert!(resid.dist_sq(&g) < 1e-20);
            }
        }
        assert!(hits > 0);
    }

    #[test]
    fn centered_reduces_to_plain_for_zero_means() {
        let p = ChannelParams::symmetric(8, 1.0, 0.5).unwrap();
        let z = RealVec::new((0..8).map(|i| i as f64 * 0.1).collect()).unwrap();
        let zero = RealVec::zeros(8);
        let a = scale_and_babble(&z, &p, 0.2, 0.05, &mut SeededRng::new(5, 5)).unwrap();
        let b = scale_and_babble_centered(&z, &p, 0.2, 0.05, &zero, &zero, &mut SeededRng::new(5, 5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn centered_cancels_exactly_on_the_means() {
        let p = ChannelParams::symmetric(8, 1.0, 0.5).unwrap();
        let a = RealVec::new(vec![0.3; 8]).unwrap();
        let b = RealVec::new(vec![-0.1; 8]).unwrap();
        let z = a.add(&b);
        let (s, _) = scale_and_babble_centered(&z, &p, 0.2, 0.05, &a, &b, &mut SeededRng::new(6, 6)).unwrap();
        let g = sample_gaussian(8, babble_variance(&p, 0.2, 0.05).unwrap(), &mut SeededRng::new(6, 6)).unwrap();
        let (g, _) = clamp_to_sphere(g, p.jam_budget());
        assert!(s.dist_sq(&g) < 1e-24);
    }

    #[test]
    fn centered_on_shifted_codes_matches_plain_on_zero_mean_codes() {
        let n = 128;
        let p = ChannelParams::symmetric(n, 1.0, 0.3).unwrap();
        let code = ball(n, 0.5, 0.8);
        let shift_a = RealVec::new(vec![0.2; n]).unwrap();
        let shift_b = RealVec::new(vec![-0.15; n]).unwrap();
        let mut trunc_plain = 0;
        let mut trunc_centered = 0;
        for t in 0..300 {
            let mut r = SeededRng::new(12, t);
            let xa = code.draw(&mut r).1;
            let xb = code.draw(&mut r).1;
            let z = xa.add(&xb);
            let z_shifted = xa.add(&shift_a).add(&xb).add(&shift_b);
            let (s1, t1) = scale_and_babble(&z, &p, 0.1, 0.05, &mut SeededRng::new(13, t)).unwrap();
            let (s2, t2) =
                scale_and_babble_centered(&z_shifted, &p, 0.1, 0.05, &shift_a, &shift_b, &mut SeededRng::new(13, t))
                    .unwrap();
            assert!(s1.dist_sq(&s2) < 1e-18);
            trunc_plain += t1 as u32;
            trunc_centered += t2 as u32;
        }
        assert_eq!(trunc_plain, trunc_centered);
    }

    #[test]
    fn symmetrization_collision_gives_consistent_view() {
        let l = Lattice::integer(2).unwrap();
        let single = Codebook::Explicit(build_ball_code(&l, 0.1).unwrap()); // {0}
        let p = ChannelParams::symmetric(2, 1.0, 1.5).unwrap();
        let xa = RealVec::zeros(2);
        let xb = v(&[0.6, -0.8]);
        let z = xa.add(&xb);
        let (s, t, m, xs) = z_aware_symmetrization(&z, &single, &p, &mut SeededRng::new(0, 0)).unwrap();
        assert_eq!(m, Some(0));
        assert!(!t);
        assert_eq!(xs, xa);
        assert!(s.dist_sq(&xb.scaled(-0.5)) < 1e-30);
        let y = z.add(&s);
        let expect = xa.add(&xs).scaled(0.5).add(&xb.scaled(0.5));
        assert!(y.dist_sq(&expect) < 1e-30);
    }

    #[test]
    fn symmetrization_energy_and_truncation() {
        let n = 256;
        let pw = 1.0;
        let code = ball(n, 0.45, pw);
        let p = ChannelParams::symmetric(n, pw, 1.5 * pw).unwrap();
        let trials = 400;
        let mut energy = 0.0;
        let mut truncated = 0;
        for t in 0..trials {
            let mut r = SeededRng::new(21, t);
            let z = code.draw(&mut r).1.add(&code.draw(&mut r).1);
            let (s, tr, _, xs) = z_aware_symmetrization(&z, &code, &p, &mut r).unwrap();
            energy += xs.sub(&z).scaled(0.5).norm_sq();
            truncated += tr as u32;
            assert!(s.norm_sq() <= p.jam_budget() * (1.0 + POWER_TOL));
        }
        let mean = energy / trials as f64;
        assert!(mean <= 0.75 * n as f64 * pw, "{mean}");
        assert!(truncated as f64 / trials as f64 <= 0.5);
    }

    #[test]
    fn random_codeword_attack_properties() {
        let l = Lattice::integer(2).unwrap();
        let single = Codebook::Explicit(build_ball_code(&l, 0.1).unwrap());
        let p = ChannelParams::symmetric(2, 1.0, 1.0).unwrap();
        let (s, _) = random_codeword_attack(&single, &p, &mut SeededRng::new(1, 0));
        assert_eq!(s.norm(), 0.0);

        let code = Codebook::Explicit(build_ball_code(&l, 1.0).unwrap()); // 5 points
        let m = code.len().unwrap();
        let draws = 10_000;
        let mut counts = vec![0usize; m];
        let mut rng = SeededRng::new(2, 0);
        for _ in 0..draws {
            let (s, t) = random_codeword_attack(&code, &p, &mut rng);
            assert!(!t);
            counts[code.find_index(&s).unwrap()] += 1;
        }
        let e = draws as f64 / m as f64;
        let sigma = (e * (1.0 - 1.0 / m as f64)).sqrt();
        for c in counts {
            assert!((c as f64 - e).abs() <= 3.0 * sigma);
        }
    }

    #[test]
    fn gaussian_babble_degenerate_and_power() {
        let p = ChannelParams::symmetric(512, 1.0, 0.4).unwrap();
        let (s, t) = gaussian_babble(&p, Some(0.0), &mut SeededRng::new(0, 0)).unwrap();
        assert_eq!(s.norm(), 0.0);
        assert!(!t);
        let mut rng = SeededRng::new(1, 0);
        let (s, _) = gaussian_babble(&p, None, &mut rng).unwrap();
        let per = s.norm_sq() / 512.0;
        assert!((per - 0.95 * 0.4).abs() <= 0.1 * 0.95 * 0.4);
        assert!(gaussian_babble(&p, Some(-1.0), &mut rng).is_err());
    }

    #[test]
    fn gaussian_babble_clamp_frequency() {
        let p = ChannelParams::symmetric(512, 1.0, 0.4).unwrap();
        let trials = 2000;
        let clamped = (0..trials)
            .filter(|&t| gaussian_babble(&p, None, &mut SeededRng::new(44, t)).unwrap().1)
            .count();
        assert!(clamped as f64 / trials as f64 <= 0.05, "clamp frequency {}", clamped as f64 / trials as f64);
    }

    struct MinDist1D {
        words: Vec<f64>,
        truth: usize,
    }

    impl DecodeObjective for MinDist1D {
        fn evaluate(&self, y: &RealVec) -> Result<(bool, f64)> {
            let d: Vec<f64> = self.words.iter().map(|w| (y[0] - w).powi(2)).collect();
            let winner = (0..d.len()).fold(0, |b, i| if d[i] < d[b] { i } else { b });
            let other = (0..d.len())
                .filter(|&i| i != self.truth)
                .map(|i| d[i])
                .fold(f64::INFINITY, f64::min);
            Ok((winner != self.truth, other - d[self.truth]))
        }
    }

    #[test]
    fn net_search_finds_the_flip_in_one_dimension() {
        let p = ChannelParams::symmetric(1, 1.0, 1.0).unwrap();
        let obj = MinDist1D {
            words: vec![-1.0, 1.0],
            truth: 1,
        };
        let z = v(&[1.0]);
        let out = net_search_attack(&z, &obj, &p, 0.01, 1_000_000).unwrap();
        assert!(out.causes_error);
        assert!(out.s[0] <= 0.0 && out.s.norm_sq() <= 1.0 + 1e-12);
    }

    #[test]
    fn net_search_without_error_returns_margin_minimizer() {
        let p = ChannelParams::symmetric(1, 1.0, 1.0).unwrap();
        let obj = MinDist1D {
            words: vec![0.0],
            truth: 0,
        };
        let out = net_search_attack(&v(&[0.0]), &obj, &p, 0.01, 1_000_000).unwrap();
        assert!(!out.causes_error);
        assert!(out.margin.is_infinite());
    }

    #[test]
    fn net_search_is_worst_case_up_to_lipschitz_slack() {
        // codewords 3 apart: no flip possible with N = 1
        let p = ChannelParams::symmetric(1, 1.0, 1.0).unwrap();
        let obj = MinDist1D {
            words: vec![-2.0, 1.0],
            truth: 1,
        };
        let eta: f64 = 0.01;
        let z = v(&[1.0]);
        let out = net_search_attack(&z, &obj, &p, eta, 1_000_000).unwrap();
        assert!(!out.causes_error);
        // margin(s) = (1+s+2)^2 - s^2 = 9 + 6 s, Lipschitz 6 on the ball
        let slack = 6.0 * eta.sqrt();
        for i in 0..=2000 {
            let s = -1.0 + i as f64 / 1000.0;
            let (_, m) = obj.evaluate(&v(&[1.0 + s])).unwrap();
            assert!(m >= out.margin - slack - 1e-9);
        }
    }

    #[test]
    fn net_covers_the_ball_in_two_dimensions() {
        let eta: f64 = 0.02;
        let p = ChannelParams::symmetric(2, 1.0, 1.0).unwrap();
        let a = 2.0 * eta.sqrt();
        let net = Lattice::scaled_integer(2, a).unwrap();
        let radius = p.jam_budget().sqrt() + (2.0 * eta).sqrt();
        let pts: Vec<RealVec> = net
            .enumerate_in_ball(&RealVec::zeros(2), radius)
            .unwrap()
            .into_iter()
            .map(|x| clamp_to_sphere(x, p.jam_budget()).0)
            .collect();
        let mut rng = SeededRng::new(8, 0);
        for _ in 0..1000 {
            let dir = crate::linalg::sample_unit_vector(2, &mut rng);
            let s = dir.scaled(p.jam_budget().sqrt() * rng.uniform().sqrt());
            let d = pts.iter().map(|q| q.dist_sq(&s)).fold(f64::INFINITY, f64::min);
            assert!(d <= 2.0 * eta + 1e-12);
        }
    }

    #[test]
    fn net_search_budget() {
        let p = ChannelParams::symmetric(8, 1.0, 1.0).unwrap();
        let obj = MinDist1D {
            words: vec![0.0],
            truth: 0,
        };
        let err = net_search_attack(&RealVec::zeros(8), &obj, &p, 1e-4, 1000).unwrap_err();
        assert!(err.is_capacity());
    }

    #[test]
    fn truncation_median_when_babble_fills_budget() {
        // alpha = 0 and gamma^2 = N: |g|^2 > nN about half the time
        let n = 1024;
        let p = ChannelParams::symmetric(n, 1.0, 1.0).unwrap();
        let code = ball(n, 0.5, 1.0);
        let spec = AttackSpec::ScaleAndBabble {
            alpha: Some(0.0),
            eps: 0.05,
            center_correction: false,
        };
        let q = estimate_truncation_q(&spec, &code, &code, &p, 1000, &SeededRng::new(3, 0)).unwrap();
        assert!((q.q_hat - 0.5).abs() <= 0.05, "{}", q.q_hat);
        assert!(q.ci95.0 <= q.q_hat && q.q_hat <= q.ci95.1);
    }

    #[test]
    fn attack_spec_round_trip_and_validation() {
        let text = r#"{"kind":"scale_and_babble","eps":0.05}"#;
        let spec: AttackSpec = serde_json::from_str(text).unwrap();
        let p = ChannelParams::symmetric(4, 1.0, 0.5).unwrap();
        assert_eq!(spec.alpha(&p), Some(0.25));
        assert!(spec.validate(&p).is_ok());
        let bad = AttackSpec::ScaleAndBabble {
            alpha: Some(0.9),
            eps: 0.05,
            center_correction: false,
        };
        assert!(bad.validate(&p).unwrap_err().is_config());
        let z: AttackSpec = serde_json::from_str(r#"{"kind":"z_aware_symmetrization","victim":"A"}"#).unwrap();
        assert_eq!(z, AttackSpec::ZAwareSymmetrization { victim: User::A });
        assert!(serde_json::from_str::<AttackSpec>(r#"{"kind":"silent","x":1}"#).is_err());
    }
}
