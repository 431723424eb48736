//! Bob's decoders: the estimation-based decoder, a minimum-distance
//! baseline and an exact list decoder. Alice's side is the same with the
//! roles swapped.

use serde::{Deserialize, Serialize};

use crate::adversary::{ChannelParams, DecodeObjective};
use crate::codebook::Codebook;
use crate::error::{Error, Result};
use crate::linalg::RealVec;

/// Bound on `|alpha_hat|` used downstream of the estimator.
pub const ALPHA_CLAMP: f64 = 1.0 - 1e-6;

/// Relative slack added to the raw decoding radius.
pub const RAW_SLACK: f64 = 1e-9;

/// Slack constants of the error analysis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToleranceProfile {
    pub delta: f64,
    pub zeta: f64,
    pub zeta1: f64,
    pub rho: f64,
    pub eps_strip: f64,
    /// Derived from `delta` and `rho` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    pub xi: f64,
    pub mu: f64,
    pub nu: f64,
    pub eta_prime: f64,
}

impl Default for ToleranceProfile {
    fn default() -> Self {
        ToleranceProfile {
            delta: 0.1,
            zeta: 0.05,
            zeta1: 0.05,
            rho: 0.05,
            eps_strip: 0.01,
            theta: None,
            xi: 0.02,
            mu: 0.1,
            nu: 0.1,
            eta_prime: 0.01,
        }
    }
}

/// `((rho+delta) - rho(1+delta)/2) / ((1-rho) + rho(1+delta)/2)`, the
/// largest inner-product ratio of consistent pairs in the strip.
pub fn theta_from(delta: f64, rho: f64) -> f64 {
    ((rho + delta) - rho * (1.0 + delta) / 2.0) / ((1.0 - rho) + rho * (1.0 + delta) / 2.0)
}

impl ToleranceProfile {
    pub fn theta(&self) -> f64 {
        self.theta.unwrap_or_else(|| theta_from(self.delta, self.rho))
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("delta", self.delta),
            ("zeta", self.zeta),
            ("zeta1", self.zeta1),
            ("rho", self.rho),
            ("eps_strip", self.eps_strip),
            ("theta", self.theta()),
            ("xi", self.xi),
            ("mu", self.mu),
            ("nu", self.nu),
            ("eta_prime", self.eta_prime),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::param(format!("tolerance {name} must lie in (0, 1), got {v}")));
            }
        }
        if self.theta() < self.delta {
            return Err(Error::param(format!(
                "theta = {} is below delta = {}",
                self.theta(),
                self.delta
            )));
        }
        Ok(())
    }

    /// `zeta / (P N)`, as the inner-product lemma defines it.
    pub fn zeta_prime(&self, p: f64, n: f64) -> f64 {
        self.zeta / (p * n)
    }

    /// Supremum of `c_2` over typical `z`:
    /// `(P/2)(1+delta) rho + sqrt(P(1+delta) eps / 2) - eps/4`.
    pub fn c2_bound(&self, p: f64) -> f64 {
        let d = 1.0 + self.delta;
        0.5 * p * d * self.rho + (p * d * self.eps_strip / 2.0).sqrt() - self.eps_strip / 4.0
    }

    /// `(1-alpha) theta sqrt(P) + (1-alpha) c_2 / sqrt(P) + zeta / sqrt(P)`.
    pub fn beta1(&self, p: f64, alpha: f64) -> f64 {
        let sp = p.sqrt();
        (1.0 - alpha) * self.theta() * sp + (1.0 - alpha) * self.c2_bound(p) / sp + self.zeta / sp
    }
}

/// `c_2` for a given `z`: `(nP - ||x_min||^2)/n` with
/// `||x_min||^2 = r^2 (1-rho) + (||z||/2 - sqrt(n eps)/2)^2`.
pub fn c2_for(z_norm_sq: f64, n: usize, p: f64, rho: f64, eps: f64) -> f64 {
    let nf = n as f64;
    let r2 = nf * p - z_norm_sq / 4.0;
    let axial = z_norm_sq.sqrt() / 2.0 - (nf * eps).sqrt() / 2.0;
    (nf * p - (r2 * (1.0 - rho) + axial * axial)) / nf
}

/// `1 - <y, x_B> / (nP)`, unclamped.
pub fn estimate_alpha(y: &RealVec, x_b: &RealVec, p: f64) -> Result<f64> {
    check_pair(y, x_b)?;
    Ok(1.0 - y.dot(x_b) / (y.len() as f64 * p))
}

/// Clamps to `[-ALPHA_CLAMP, ALPHA_CLAMP]`; the flag records a change.
pub fn clamp_alpha(alpha: f64) -> (f64, bool) {
    let c = alpha.clamp(-ALPHA_CLAMP, ALPHA_CLAMP);
    (c, c != alpha)
}

/// `||y||^2 - 2 (1 - alpha_hat) <y, x_B>`, in squared-norm units.
pub fn estimate_r_dec(y: &RealVec, x_b: &RealVec, alpha_hat: f64) -> Result<f64> {
    check_pair(y, x_b)?;
    Ok(y.norm_sq() - 2.0 * (1.0 - alpha_hat) * y.dot(x_b))
}

/// `y - (1 - alpha_hat) x_B`.
pub fn effective_received(y: &RealVec, x_b: &RealVec, alpha_hat: f64) -> Result<RealVec> {
    check_pair(y, x_b)?;
    Ok(y.add_scaled(-(1.0 - alpha_hat), x_b))
}

fn check_pair(y: &RealVec, x_b: &RealVec) -> Result<()> {
    if y.len() != x_b.len() {
        return Err(Error::Dimension {
            expected: y.len(),
            got: x_b.len(),
        });
    }
    if x_b.norm_sq() == 0.0 {
        return Err(Error::Degenerate("own codeword is zero".into()));
    }
    Ok(())
}

/// How the decoding radius is derived from `r_dec`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadiusMode {
    /// `n (sqrt(max(r_dec/n, 0) + mu) + beta_1)^2`, absorbing the estimation
    /// and cross-term errors.
    #[default]
    Robust,
    /// `max(r_dec, 0)` with a relative slack of `RAW_SLACK`. Unlike the
    /// robust radius, whose tolerances carry absolute units, this mode is
    /// invariant under rescaling the whole channel.
    Raw,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Decoded { index: Option<usize> },
    Ambiguous,
    Empty,
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Decoded { .. } => "decoded",
            Verdict::Ambiguous => "ambiguous",
            Verdict::Empty => "empty",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecodeDiagnostics {
    /// Raw estimate.
    pub alpha_hat: f64,
    /// Value used for decoding.
    pub alpha_used: f64,
    pub alpha_clamped: bool,
    /// Raw estimator value, possibly negative.
    pub r_dec: f64,
    pub search_radius_sq: f64,
    pub effective_y: RealVec,
    /// Counted up to 2; the search stops once decoding is ambiguous.
    pub candidates_found: usize,
    pub verdict: Verdict,
    /// The unique candidate, when decoding succeeded.
    pub decoded: Option<RealVec>,
}

/// Accepts `x` in the code with `||(1 - alpha_hat) x - y~||^2 <= R^2`, and
/// decodes iff exactly one codeword qualifies.
pub fn decode_unique(
    code: &Codebook,
    y: &RealVec,
    x_b: &RealVec,
    p: f64,
    tol: &ToleranceProfile,
    mode: RadiusMode,
) -> Result<DecodeDiagnostics> {
    if code.n() != y.len() {
        return Err(Error::Dimension {
            expected: y.len(),
            got: code.n(),
        });
    }
    let n = y.len() as f64;
    let alpha_hat = estimate_alpha(y, x_b, p)?;
    let (alpha, alpha_clamped) = clamp_alpha(alpha_hat);
    let r_dec = estimate_r_dec(y, x_b, alpha)?;
    let y_eff = effective_received(y, x_b, alpha)?;
    let radius_sq = match mode {
        RadiusMode::Robust => {
            let r = (r_dec.max(0.0) / n + tol.mu).sqrt() + tol.beta1(p, alpha);
            n * r * r
        }
        RadiusMode::Raw => r_dec.max(0.0) * (1.0 + RAW_SLACK),
    };
    let scale = 1.0 - alpha;
    let accept = |x: &RealVec| x.scaled(scale).dist_sq(&y_eff) <= radius_sq;
    let mut found: Vec<(Option<usize>, RealVec)> = Vec::new();
    match code.codewords() {
        Some(words) => {
            for (i, x) in words.into_iter().enumerate() {
                if accept(&x) {
                    found.push((Some(i), x));
                    if found.len() > 1 {
                        break;
                    }
                }
            }
        }
        None => {
            let center = y_eff.scaled(1.0 / scale);
            let radius = radius_sq.sqrt() / scale.abs();
            let visit = &mut |x: &RealVec| {
                if accept(x) {
                    found.push((None, x.clone()));
                }
                found.len() < 2
            };
            match code {
                Codebook::IntegerBall(c) => {
                    c.visit_in_ball(&center, radius * radius * (1.0 + 1e-12), code.lattice().budget(), visit)?
                }
                _ => unreachable!("explicit codes are scanned"),
            }
        }
    }
    let candidates_found = found.len();
    let (verdict, decoded) = match candidates_found {
        0 => (Verdict::Empty, None),
        1 => {
            let (m, x) = found.pop().unwrap();
            (Verdict::Decoded { index: m }, Some(x))
        }
        _ => (Verdict::Ambiguous, None),
    };
    Ok(DecodeDiagnostics {
        alpha_hat,
        alpha_used: alpha,
        alpha_clamped,
        r_dec,
        search_radius_sq: radius_sq,
        effective_y: y_eff,
        candidates_found,
        verdict,
        decoded,
    })
}

/// `argmin_m ||y - x_m - x_B||`; the lowest index wins ties.
pub fn decode_min_distance(code: &Codebook, y: &RealVec, x_b: &RealVec) -> Result<usize> {
    let words = code.codewords().ok_or_else(|| {
        Error::Structure("minimum-distance decoding needs an explicit codebook".into())
    })?;
    if words.is_empty() {
        return Err(Error::DegenerateCode("empty codebook".into()));
    }
    if x_b.len() != y.len() || code.n() != y.len() {
        return Err(Error::Dimension {
            expected: y.len(),
            got: x_b.len().min(code.n()),
        });
    }
    let target = y.sub(x_b);
    let mut best = (0, f64::INFINITY);
    for (i, x) in words.iter().enumerate() {
        let d = target.dist_sq(x);
        if d < best.1 {
            best = (i, d);
        }
    }
    Ok(best.0)
}

/// All codewords within squared distance `radius_sq` of `center`, found by
/// lattice enumeration.
pub fn list_decode_words(code: &Codebook, center: &RealVec, radius_sq: f64) -> Result<Vec<(Option<usize>, RealVec)>> {
    if !(radius_sq >= 0.0) {
        return Err(Error::param(format!("squared radius must be nonnegative, got {radius_sq}")));
    }
    let tol = 1e-12 * radius_sq.max(1.0);
    let mut found = code.in_ball(center, (radius_sq + tol).sqrt())?;
    found.retain(|(_, x)| x.dist_sq(center) <= radius_sq + tol);
    Ok(found)
}

/// Message indices of [`list_decode_words`], sorted.
pub fn list_decode(code: &Codebook, center: &RealVec, radius_sq: f64) -> Result<Vec<usize>> {
    if code.len().is_none() {
        return Err(Error::Structure("implicit codes carry no message index".into()));
    }
    Ok(list_decode_words(code, center, radius_sq)?
        .into_iter()
        .map(|(m, _)| m.expect("explicit code"))
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EffectiveChannel {
    pub p_tilde: f64,
    pub n_tilde: f64,
    pub p_tilde_prime: f64,
    pub n_tilde_prime: f64,
    pub r_bar: f64,
}

impl EffectiveChannel {
    /// `P~ / N~`.
    pub fn naive_snr(&self) -> f64 {
        self.p_tilde / self.n_tilde
    }

    /// `P~ / r_bar`: the signal `P` against the average residual `r_bar`
    /// rescaled by `1/(1-alpha)^2`.
    pub fn average_snr(&self) -> f64 {
        self.p_tilde / self.r_bar
    }
}

/// `P~ N~ / (P~ + N~)`.
pub fn r_bar(p_tilde: f64, n_tilde: f64) -> f64 {
    p_tilde * n_tilde / (p_tilde + n_tilde)
}

/// Bob's effective channel under scale-and-babble with parameter `alpha`:
/// `P~ = (1-alpha)^2 P_A`, `N~ = N_B - alpha^2 (P_A + P_B)`, and the robust
/// `P~' = (1-alpha-xi)^2 (P_A - c_2)`,
/// `N~' = (sqrt(N_B - alpha^2 (P_A+P_B)(1-delta) + mu) + beta_1)^2`.
pub fn effective_channel(params: &ChannelParams, alpha: f64, tol: &ToleranceProfile) -> Result<EffectiveChannel> {
    let s = params.pa + params.pb;
    let n_tilde = params.nb - alpha * alpha * s;
    if !(n_tilde >= 0.0) {
        return Err(Error::param(format!("alpha = {alpha} is infeasible: N~ = {n_tilde} < 0")));
    }
    let p = params.pa;
    let p_tilde = (1.0 - alpha).powi(2) * p;
    let p_tilde_prime = (1.0 - alpha - tol.xi).powi(2) * (p - tol.c2_bound(p));
    let inner = params.nb - alpha * alpha * s * (1.0 - tol.delta) + tol.mu;
    let n_tilde_prime = (inner.sqrt() + tol.beta1(p, alpha)).powi(2);
    Ok(EffectiveChannel {
        p_tilde,
        n_tilde,
        p_tilde_prime,
        n_tilde_prime,
        r_bar: r_bar(p_tilde, n_tilde),
    })
}

/// Minimum-distance decoding of a known message, as seen by a jammer
/// searching for an error. The margin is the gap between the closest wrong
/// codeword and the true one.
pub struct MinDistanceObjective<'a> {
    pub code: &'a Codebook,
    pub words: Vec<RealVec>,
    pub x_b: RealVec,
    pub truth: usize,
}

impl<'a> MinDistanceObjective<'a> {
    pub fn new(code: &'a Codebook, x_b: RealVec, truth: usize) -> Result<Self> {
        let words = code.codewords().ok_or_else(|| {
            Error::Structure("minimum-distance decoding needs an explicit codebook".into())
        })?;
        if truth >= words.len() {
            return Err(Error::Index {
                index: truth,
                size: words.len(),
            });
        }
        Ok(MinDistanceObjective {
            code,
            words,
            x_b,
            truth,
        })
    }
}

impl DecodeObjective for MinDistanceObjective<'_> {
    fn evaluate(&self, y: &RealVec) -> Result<(bool, f64)> {
        let winner = decode_min_distance(self.code, y, &self.x_b)?;
        let target = y.sub(&self.x_b);
        let d_true = target.dist_sq(&self.words[self.truth]);
        let d_other = self
            .words
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != self.truth)
            .map(|(_, x)| target.dist_sq(x))
            .fold(f64::INFINITY, f64::min);
        Ok((winner != self.truth, d_other - d_true))
    }
}
