//! Closed-form rates: two-way capacity, list-decoding and AWGN references,
//! the scale-and-babble rate and its worst-case `alpha`, and the
//! symmetrization thresholds.
//!
//! Suffix `_a` marks quantities at Alice's receiver (she decodes Bob against
//! jamming power `N_A`), `_b` those at Bob's receiver.

use serde::Serialize;

use crate::adversary::ChannelParams;
use crate::error::{Error, Result};

fn half_log2_plus(x: f64) -> f64 {
    (0.5 * x.log2()).max(0.0)
}

fn check_pos(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::param(format!("{name} must be positive, got {v}")));
    }
    Ok(())
}

/// `[1/2 log2(1/2 + P/N)]^+`.
pub fn capacity_symmetric(p: f64, n: f64) -> Result<f64> {
    check_pos("P", p)?;
    check_pos("N", n)?;
    Ok(half_log2_plus(0.5 + p / n))
}

/// `(C_A, C_B)` with `C_A = [1/2 log2(P_A/(P_A+P_B) + P_B/N_A)]^+` and the
/// mirror image for Bob.
pub fn capacity_asymmetric(params: &ChannelParams) -> (f64, f64) {
    let s = params.pa + params.pb;
    (
        half_log2_plus(params.pa / s + params.pb / params.na),
        half_log2_plus(params.pb / s + params.pa / params.nb),
    )
}

/// `[1/2 log2(P/N)]^+`.
pub fn list_dec_capacity(p: f64, n: f64) -> Result<f64> {
    check_pos("P", p)?;
    check_pos("N", n)?;
    Ok(half_log2_plus(p / n))
}

/// `1/2 log2(1 + P/N)`.
pub fn awgn_capacity(p: f64, n: f64) -> Result<f64> {
    check_pos("P", p)?;
    check_pos("N", n)?;
    Ok(half_log2_plus(1.0 + p / n))
}

/// Rate Bob sees when James plays scale-and-babble with parameter `alpha`:
/// `1/2 log2(1 + (1-alpha)^2 P_A / (N_B - alpha^2 (P_A+P_B)))`.
pub fn scale_babble_rate(alpha: f64, params: &ChannelParams) -> Result<f64> {
    let denom = params.nb - alpha * alpha * (params.pa + params.pb);
    if !(denom > 0.0) {
        return Err(Error::domain(format!(
            "alpha = {alpha} leaves no babble power (N_B - alpha^2 (P_A+P_B) = {denom})"
        )));
    }
    Ok(0.5 * (1.0 + (1.0 - alpha).powi(2) * params.pa / denom).log2())
}

/// James' best `alpha` against Bob: the minimizer `N_B/(P_A+P_B)` of the
/// scale-and-babble rate, and the rate it leaves. When `N_B >= P_A+P_B`
/// James can cancel the signal outright (`alpha = 1`, rate 0).
pub fn optimize_alpha(params: &ChannelParams) -> (f64, f64) {
    let s = params.pa + params.pb;
    let a = params.nb / s;
    if a >= 1.0 {
        return (1.0, 0.0);
    }
    (a, scale_babble_rate(a, params).expect("interior point is feasible"))
}

/// Grid minimization of the scale-and-babble rate over the feasible
/// `alpha in [0, sqrt(N_B/(P_A+P_B)))`.
pub fn grid_search_alpha(params: &ChannelParams, step: f64) -> (f64, f64) {
    let hi = (params.nb / (params.pa + params.pb)).sqrt();
    let mut best = (0.0, f64::INFINITY);
    let mut i = 0u64;
    loop {
        let a = i as f64 * step;
        if a >= hi {
            break;
        }
        if let Ok(v) = scale_babble_rate(a, params) {
            if v < best.1 {
                best = (a, v);
            }
        }
        i += 1;
    }
    best
}

/// `(zero_rate_A, zero_rate_B)`: `N_A > (2P_B + P_A)/4` and
/// `N_B > (2P_A + P_B)/4`.
pub fn symmetrization_threshold(params: &ChannelParams) -> (bool, bool) {
    (
        params.na > (2.0 * params.pb + params.pa) / 4.0,
        params.nb > (2.0 * params.pa + params.pb) / 4.0,
    )
}

/// At `N = 3P(1+eps)/4`, codes with at least `2(1+eps)/eps` codewords have
/// average error at least `eps/(4(1+eps))`. Returns `(min_code_size,
/// error_lb)`.
pub fn symmetrization_error_lb(eps: f64) -> Result<(f64, f64)> {
    check_pos("eps", eps)?;
    if eps.is_infinite() {
        return Ok((2.0, 0.25));
    }
    Ok((2.0 * (1.0 + eps) / eps, eps / (4.0 * (1.0 + eps))))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub params: ChannelParams,
    pub capacity_a: f64,
    pub capacity_b: f64,
    pub awgn_capacity_a: f64,
    pub awgn_capacity_b: f64,
    pub list_dec_capacity_a: f64,
    pub list_dec_capacity_b: f64,
    pub alpha_star_a: f64,
    pub alpha_star_b: f64,
    pub zero_rate_a: bool,
    pub zero_rate_b: bool,
    /// The achievability formula is positive but symmetrization forces
    /// zero rate: the bounds disagree here.
    pub open_regime_a: bool,
    pub open_regime_b: bool,
    /// Symmetric channels above the threshold only.
    pub symm_error_lb: Option<f64>,
}

pub fn bound_report(params: &ChannelParams) -> BoundReport {
    let (capacity_a, capacity_b) = capacity_asymmetric(params);
    let (zero_rate_a, zero_rate_b) = symmetrization_threshold(params);
    let (alpha_star_b, _) = optimize_alpha(params);
    let (alpha_star_a, _) = optimize_alpha(&params.toward_alice());
    let symm_error_lb = (params.is_symmetric() && zero_rate_b).then(|| {
        let eps = 4.0 * params.nb / (3.0 * params.pa) - 1.0;
        symmetrization_error_lb(eps).expect("eps > 0 above threshold").1
    });
    BoundReport {
        params: *params,
        capacity_a,
        capacity_b,
        awgn_capacity_a: half_log2_plus(1.0 + params.pb / params.na),
        awgn_capacity_b: half_log2_plus(1.0 + params.pa / params.nb),
        list_dec_capacity_a: half_log2_plus(params.pb / params.na),
        list_dec_capacity_b: half_log2_plus(params.pa / params.nb),
        alpha_star_a,
        alpha_star_b,
        zero_rate_a,
        zero_rate_b,
        open_regime_a: capacity_a > 0.0 && zero_rate_a,
        open_regime_b: capacity_b > 0.0 && zero_rate_b,
        symm_error_lb,
    }
}

/// Reports over a linear grid of `snr = P_A / N_B`. Transmit powers are
/// scaled together; jamming powers stay fixed.
pub fn snr_sweep(params: &ChannelParams, lo: f64, hi: f64, steps: usize) -> Result<Vec<(f64, BoundReport)>> {
    check_pos("snr lower end", lo)?;
    if !(hi >= lo) || !hi.is_finite() {
        return Err(Error::param(format!("sweep range {lo}..{hi} is empty")));
    }
    if steps == 0 {
        return Err(Error::param("sweep needs at least one step"));
    }
    (0..steps)
        .map(|i| {
            let snr = if steps == 1 {
                lo
            } else {
                lo + (hi - lo) * i as f64 / (steps - 1) as f64
            };
            let c = snr * params.nb / params.pa;
            let p = ChannelParams::new(params.n, params.pa * c, params.pb * c, params.na, params.nb)?;
            Ok((snr, bound_report(&p)))
        })
        .collect()
}

pub const SWEEP_CSV_HEADER: &str = "snr,pa,pb,na,nb,capacity_a,capacity_b,list_dec_capacity_a,list_dec_capacity_b,awgn_capacity_a,awgn_capacity_b,zero_rate_a,zero_rate_b,open_regime_a,open_regime_b";

pub fn sweep_csv(rows: &[(f64, BoundReport)]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for (snr, r) in rows {
        let p = &r.params;
        out.push_str(&format!(
            "{snr},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            p.pa,
            p.pb,
            p.na,
            p.nb,
            r.capacity_a,
            r.capacity_b,
            r.list_dec_capacity_a,
            r.list_dec_capacity_b,
            r.awgn_capacity_a,
            r.awgn_capacity_b,
            r.zero_rate_a,
            r.zero_rate_b,
            r.open_regime_a,
            r.open_regime_b
        ));
    }
    out
}
