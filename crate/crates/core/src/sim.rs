//! Experiment orchestration: channel composition, Monte Carlo estimation of
//! Bob's error probability, parameter sweeps and output files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversary::{apply_attack, AttackSpec, ChannelParams, POWER_TOL};
use crate::bounds::bound_report;
use crate::codebook::{Codebook, CodebookSpec, IntegerBallCode, ShapingSpec};
use crate::decoder::{
    clamp_alpha, decode_min_distance, decode_unique, estimate_alpha, estimate_r_dec, MinDistanceObjective,
    RadiusMode, ToleranceProfile, Verdict,
};
use crate::error::{Error, Result};
use crate::lattice::LatticeSpec;
use crate::linalg::{binomial_ci95, project_perp, RealVec, SeededRng};

/// Stream labels of the per-trial generators.
const ROLE_MESSAGE_A: u64 = 0;
const ROLE_MESSAGE_B: u64 = 1;
const ROLE_ATTACK: u64 = 2;

/// Fixed-point resolution of the accumulated error magnitudes.
const FIXED_POINT: f64 = (1u64 << 40) as f64;

pub const TRIALS_CSV_HEADER: &str = "trial,mA,mB,alpha_true,alpha_hat,r_dec,truncated,verdict,correct";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DecoderSpec {
    MinDistance {},
    Estimation {
        #[serde(default)]
        tolerances: ToleranceProfile,
        #[serde(default)]
        mode: RadiusMode,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_summary")]
    pub summary: String,
    #[serde(default = "default_trials_csv")]
    pub trials_csv: String,
}

fn default_summary() -> String {
    "summary.json".into()
}

fn default_trials_csv() -> String {
    "trials.csv".into()
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            summary: default_summary(),
            trials_csv: default_trials_csv(),
        }
    }
}

/// Everything a run depends on. `code_b` defaults to `code_a`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub params: ChannelParams,
    pub code_a: CodebookSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code_b: Option<CodebookSpec>,
    pub attack: AttackSpec,
    pub decoder: DecoderSpec,
    pub trials: u64,
    pub root_seed: u64,
    #[serde(default)]
    pub outputs: OutputSpec,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn code_b_spec(&self) -> &CodebookSpec {
        self.code_b.as_ref().unwrap_or(&self.code_a)
    }
}

/// A validated configuration with its codebooks built.
#[derive(Debug)]
pub struct Experiment {
    config: ExperimentConfig,
    code_a: Codebook,
    code_b: Codebook,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: u64,
    /// `None` for implicit codes, which have no message indexing.
    pub m_a: Option<usize>,
    pub m_b: Option<usize>,
    /// Realized `-<s,z>/||z||^2`; `None` when `z = 0`.
    pub alpha_true: Option<f64>,
    /// `None` when `x_B = 0`, where the estimators are undefined.
    pub alpha_hat: Option<f64>,
    pub r_dec: Option<f64>,
    /// `||s_perp||^2`; `None` when `z = 0`.
    pub s_perp_sq: Option<f64>,
    pub truncated: bool,
    pub verdict: Verdict,
    pub correct: bool,
    pub candidates_found: Option<usize>,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        let params = config.params;
        params.validate().map_err(config_err)?;
        if config.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        config.attack.validate(&params).map_err(config_err)?;
        if let DecoderSpec::Estimation { tolerances, .. } = &config.decoder {
            tolerances.validate().map_err(config_err)?;
        }
        let code_a = config.code_a.build()?;
        let code_b = config.code_b_spec().build()?;
        for (name, code, power) in [("code_a", &code_a, params.pa), ("code_b", &code_b, params.pb)] {
            if code.n() != params.n {
                return Err(Error::Config(format!(
                    "{name} has dimension {}, the channel has n = {}",
                    code.n(),
                    params.n
                )));
            }
            if code.max_power() > power * (1.0 + POWER_TOL) {
                return Err(Error::Config(format!(
                    "{name} has codewords of power {} above the budget {power}",
                    code.max_power()
                )));
            }
        }
        let needs_explicit = matches!(config.decoder, DecoderSpec::MinDistance {})
            || matches!(config.attack, AttackSpec::NetSearch { .. });
        if needs_explicit && code_a.len().is_none() {
            return Err(Error::Config(
                "minimum-distance decoding and net search need an enumerable code_a".into(),
            ));
        }
        Ok(Experiment { config, code_a, code_b })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn code_a(&self) -> &Codebook {
        &self.code_a
    }

    pub fn code_b(&self) -> &Codebook {
        &self.code_b
    }

    /// Bob's decoding of Alice's message on trial `trial`. A pure function of
    /// the configuration and the index.
    pub fn run_trial(&self, trial: u64) -> Result<TrialRecord> {
        self.trial_inner(trial).map_err(|e| Error::Trial {
            trial,
            source: Box::new(e),
        })
    }

    fn trial_inner(&self, trial: u64) -> Result<TrialRecord> {
        let cfg = &self.config;
        let params = cfg.params;
        let nf = params.n as f64;
        let stream = |role| SeededRng::derive(cfg.root_seed, &[trial, role]);
        let (m_a, xa) = self.code_a.draw(&mut stream(ROLE_MESSAGE_A));
        let (m_b, xb) = self.code_b.draw(&mut stream(ROLE_MESSAGE_B));
        audit("x_A", xa.norm_sq(), nf * params.pa)?;
        audit("x_B", xb.norm_sq(), nf * params.pb)?;
        let z = xa.add(&xb);

        let objective = match (&cfg.attack, m_a) {
            (AttackSpec::NetSearch { .. }, Some(m)) => Some(MinDistanceObjective::new(&self.code_a, xb.clone(), m)?),
            _ => None,
        };
        let jam = apply_attack(
            &cfg.attack,
            &z,
            &self.code_a,
            &self.code_b,
            &params,
            objective.as_ref().map(|o| o as _),
            &mut stream(ROLE_ATTACK),
        )?;
        audit("s", jam.s.norm_sq(), params.jam_budget())?;
        let y = z.add(&jam.s);

        let (alpha_true, s_perp_sq) = match project_perp(&jam.s, &z) {
            Ok((a, sp)) => (Some(a), Some(sp.norm_sq())),
            Err(_) => (None, None),
        };
        let (alpha_hat, r_dec) = if xb.norm_sq() > 0.0 {
            let a = estimate_alpha(&y, &xb, params.pa)?;
            (Some(a), Some(estimate_r_dec(&y, &xb, clamp_alpha(a).0)?))
        } else {
            (None, None)
        };

        let (verdict, correct, candidates_found) = match &cfg.decoder {
            DecoderSpec::MinDistance {} => {
                let m = decode_min_distance(&self.code_a, &y, &xb)?;
                (Verdict::Decoded { index: Some(m) }, Some(m) == m_a, None)
            }
            DecoderSpec::Estimation { .. } if alpha_hat.is_none() => (Verdict::Empty, false, Some(0)),
            DecoderSpec::Estimation { tolerances, mode } => {
                let d = decode_unique(&self.code_a, &y, &xb, params.pa, tolerances, *mode)?;
                let correct = match (&d.verdict, &d.decoded) {
                    (Verdict::Decoded { index: Some(m) }, _) => Some(*m) == m_a,
                    (Verdict::Decoded { index: None }, Some(x)) => x.dist_sq(&xa) <= 1e-18 * (1.0 + xa.norm_sq()),
                    _ => false,
                };
                (d.verdict, correct, Some(d.candidates_found))
            }
        };
        Ok(TrialRecord {
            trial,
            m_a,
            m_b,
            alpha_true,
            alpha_hat,
            r_dec,
            s_perp_sq,
            truncated: jam.truncated,
            verdict,
            correct,
            candidates_found,
        })
    }
}

fn config_err(e: Error) -> Error {
    match e {
        Error::Parameter(m) | Error::Domain(m) => Error::Config(m),
        other => other,
    }
}

fn audit(what: &str, norm_sq: f64, budget: f64) -> Result<()> {
    if norm_sq > budget * (1.0 + POWER_TOL) {
        return Err(Error::Power(format!("||{what}||^2 = {norm_sq} exceeds {budget}")));
    }
    Ok(())
}

/// Counts and fixed-point sums; merging is associative and commutative, so
/// any partition of the trials yields the same summary.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Tally {
    pub trials: u64,
    pub errors: u64,
    pub truncated: u64,
    alpha_err: i128,
    alpha_count: u64,
    rdec_err: i128,
    rdec_count: u64,
}

fn fixed(v: f64) -> i128 {
    (v * FIXED_POINT).round() as i128
}

impl Tally {
    pub fn record(rec: &TrialRecord, n: usize) -> Self {
        let mut t = Tally {
            trials: 1,
            errors: (!rec.correct) as u64,
            truncated: rec.truncated as u64,
            ..Tally::default()
        };
        if let (Some(a), Some(ah)) = (rec.alpha_true, rec.alpha_hat) {
            t.alpha_err = fixed((ah - a).abs());
            t.alpha_count = 1;
        }
        if let (Some(sp), Some(r)) = (rec.s_perp_sq, rec.r_dec) {
            t.rdec_err = fixed((r - sp).abs() / n as f64);
            t.rdec_count = 1;
        }
        t
    }

    pub fn merge(self, o: Tally) -> Tally {
        Tally {
            trials: self.trials + o.trials,
            errors: self.errors + o.errors,
            truncated: self.truncated + o.truncated,
            alpha_err: self.alpha_err + o.alpha_err,
            alpha_count: self.alpha_count + o.alpha_count,
            rdec_err: self.rdec_err + o.rdec_err,
            rdec_count: self.rdec_count + o.rdec_count,
        }
    }

    pub fn summary(&self) -> RunSummary {
        let mean = |sum: i128, count: u64| {
            if count == 0 {
                0.0
            } else {
                sum as f64 / FIXED_POINT / count as f64
            }
        };
        let frac = |k: u64| if self.trials == 0 { 0.0 } else { k as f64 / self.trials as f64 };
        RunSummary {
            trials: self.trials,
            errors: self.errors,
            pe_hat: frac(self.errors),
            ci95: binomial_ci95(self.errors, self.trials),
            mean_alpha_err: mean(self.alpha_err, self.alpha_count),
            mean_rdec_err: mean(self.rdec_err, self.rdec_count),
            q_hat: frac(self.truncated),
            wall_time: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub trials: u64,
    pub errors: u64,
    pub pe_hat: f64,
    pub ci95: (f64, f64),
    /// Mean `|alpha_hat - alpha|`.
    pub mean_alpha_err: f64,
    /// Mean `|r_dec - ||s_perp||^2| / n`.
    pub mean_rdec_err: f64,
    /// Fraction of truncated jamming vectors.
    pub q_hat: f64,
    /// Seconds; excluded from the JSON so outputs stay reproducible.
    #[serde(skip)]
    pub wall_time: f64,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub records: Vec<TrialRecord>,
}

impl RunOutput {
    pub fn summary_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.summary).expect("summary serializes");
        s.push('\n');
        s
    }

    pub fn trials_csv(&self) -> String {
        trials_csv(&self.records)
    }
}

/// Runs every trial on `threads` workers (the global pool when `None`).
pub fn run_experiment(exp: &Experiment, threads: Option<usize>) -> Result<RunOutput> {
    let start = Instant::now();
    let n = exp.config.params.n;
    let work = || -> Result<(Vec<TrialRecord>, Tally)> {
        let records = (0..exp.config.trials)
            .into_par_iter()
            .map(|t| exp.run_trial(t))
            .collect::<Result<Vec<_>>>()?;
        let tally = records
            .par_iter()
            .map(|r| Tally::record(r, n))
            .reduce(Tally::default, Tally::merge);
        Ok((records, tally))
    };
    let (records, tally) = match threads {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k.max(1))
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(work)?,
        None => work()?,
    };
    let mut summary = tally.summary();
    summary.wall_time = start.elapsed().as_secs_f64();
    Ok(RunOutput { summary, records })
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn trials_csv(records: &[TrialRecord]) -> String {
    let mut out = String::from(TRIALS_CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.trial,
            opt(r.m_a),
            opt(r.m_b),
            opt(r.alpha_true),
            opt(r.alpha_hat),
            opt(r.r_dec),
            r.truncated,
            r.verdict.label(),
            r.correct
        ));
    }
    out
}

/// Writes the summary JSON and trials CSV under `out_dir`, returning both
/// paths.
pub fn write_outputs(out: &RunOutput, outputs: &OutputSpec, out_dir: &Path) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(out_dir)?;
    let summary = out_dir.join(&outputs.summary);
    let trials = out_dir.join(&outputs.trials_csv);
    std::fs::write(&summary, out.summary_json())?;
    std::fs::write(&trials, out.trials_csv())?;
    Ok((summary, trials))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// `P/N`, with `N_A`, `N_B` recomputed from the transmit powers.
    Snr,
    /// Code rate in bits per channel use; cubic ball-shaped codes only.
    Rate,
    /// The scale-and-babble parameter.
    Alpha,
    /// Blocklength.
    N,
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "snr" => Ok(SweepAxis::Snr),
            "rate" => Ok(SweepAxis::Rate),
            "alpha" => Ok(SweepAxis::Alpha),
            "n" => Ok(SweepAxis::N),
            other => Err(Error::Config(format!("unknown sweep axis {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub rate: f64,
    pub summary: RunSummary,
    pub capacity: f64,
    pub list_dec_capacity: f64,
    pub awgn_capacity: f64,
}

/// `config` with one parameter moved to `value`.
pub fn with_axis(config: &ExperimentConfig, axis: SweepAxis, value: f64) -> Result<ExperimentConfig> {
    let mut c = config.clone();
    match axis {
        SweepAxis::Snr => {
            if !(value > 0.0) {
                return Err(Error::Config(format!("snr must be positive, got {value}")));
            }
            c.params.nb = c.params.pa / value;
            c.params.na = c.params.pb / value;
        }
        SweepAxis::Rate => {
            c.code_a = with_rate(&c.code_a, value)?;
            c.code_b = c.code_b.as_ref().map(|b| with_rate(b, value)).transpose()?;
        }
        SweepAxis::Alpha => match &mut c.attack {
            AttackSpec::ScaleAndBabble { alpha, .. } => *alpha = Some(value),
            _ => return Err(Error::Config("the alpha axis needs a scale-and-babble attack".into())),
        },
        SweepAxis::N => {
            if !(value >= 1.0) || value.fract() != 0.0 {
                return Err(Error::Config(format!("blocklength must be a positive integer, got {value}")));
            }
            let n = value as usize;
            c.params.n = n;
            set_dim(&mut c.code_a.lattice, n)?;
            if let ShapingSpec::Voronoi { coarse: Some(l) } = &mut c.code_a.shaping {
                set_dim(l, n)?;
            }
            if let Some(b) = &mut c.code_b {
                set_dim(&mut b.lattice, n)?;
                if let ShapingSpec::Voronoi { coarse: Some(l) } = &mut b.shaping {
                    set_dim(l, n)?;
                }
            }
        }
    }
    Ok(c)
}

fn with_rate(spec: &CodebookSpec, rate: f64) -> Result<CodebookSpec> {
    let power = match spec.shaping {
        ShapingSpec::Ball { power } => power,
        _ => return Err(Error::Config("the rate axis needs ball shaping".into())),
    };
    let n = match spec.lattice {
        LatticeSpec::Integer { n } | LatticeSpec::ScaledInteger { n, .. } => n,
        _ => return Err(Error::Config("the rate axis needs a (scaled) integer lattice".into())),
    };
    let scale = IntegerBallCode::scale_for_rate(n, power, rate).map_err(config_err)?;
    Ok(CodebookSpec {
        lattice: LatticeSpec::ScaledInteger { n, scale },
        ..spec.clone()
    })
}

fn set_dim(spec: &mut LatticeSpec, new_n: usize) -> Result<()> {
    match spec {
        LatticeSpec::Integer { n } | LatticeSpec::ScaledInteger { n, .. } => *n = new_n,
        LatticeSpec::ConstructionA { n, g: None, .. } => *n = new_n,
        LatticeSpec::NestedFine { coarse, g: None, .. } => set_dim(coarse, new_n)?,
        _ => {
            return Err(Error::Config(
                "the n axis needs lattices without explicit generators or bases".into(),
            ))
        }
    }
    Ok(())
}

/// One run per grid point, in grid order.
pub fn sweep(config: &ExperimentConfig, axis: SweepAxis, grid: &[f64], threads: Option<usize>) -> Result<Vec<SweepRow>> {
    if grid.is_empty() {
        return Err(Error::Config("sweep grid is empty".into()));
    }
    grid.iter()
        .map(|&value| {
            let exp = Experiment::new(with_axis(config, axis, value)?)?;
            let out = run_experiment(&exp, threads)?;
            let report = bound_report(&exp.config.params);
            Ok(SweepRow {
                value,
                rate: exp.code_a.rate(),
                summary: out.summary,
                capacity: report.capacity_b,
                list_dec_capacity: report.list_dec_capacity_b,
                awgn_capacity: report.awgn_capacity_b,
            })
        })
        .collect()
}

pub fn sweep_csv(axis: SweepAxis, rows: &[SweepRow]) -> String {
    let name = serde_json::to_value(axis).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
    let mut out = format!(
        "{name},code_rate,trials,pe_hat,ci_lo,ci_hi,mean_alpha_err,mean_rdec_err,q_hat,capacity,list_dec_capacity,awgn_capacity\n"
    );
    for r in rows {
        let s = &r.summary;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.value,
            r.rate,
            s.trials,
            s.pe_hat,
            s.ci95.0,
            s.ci95.1,
            s.mean_alpha_err,
            s.mean_rdec_err,
            s.q_hat,
            r.capacity,
            r.list_dec_capacity,
            r.awgn_capacity
        ));
    }
    out
}

/// Verdict counts, keyed by label.
pub fn verdict_counts(records: &[TrialRecord]) -> BTreeMap<&'static str, u64> {
    let mut m = BTreeMap::new();
    for r in records {
        *m.entry(r.verdict.label()).or_insert(0) += 1;
    }
    m
}

/// Convenience for tests and tools: the codeword pair and jamming vector of
/// a trial, regenerated from its streams.
pub fn replay_signals(exp: &Experiment, trial: u64) -> Result<(RealVec, RealVec, RealVec)> {
    let cfg = &exp.config;
    let stream = |role| SeededRng::derive(cfg.root_seed, &[trial, role]);
    let (m_a, xa) = exp.code_a.draw(&mut stream(ROLE_MESSAGE_A));
    let (_, xb) = exp.code_b.draw(&mut stream(ROLE_MESSAGE_B));
    let z = xa.add(&xb);
    let objective = match (&cfg.attack, m_a) {
        (AttackSpec::NetSearch { .. }, Some(m)) => Some(MinDistanceObjective::new(&exp.code_a, xb.clone(), m)?),
        _ => None,
    };
    let jam = apply_attack(
        &cfg.attack,
        &z,
        &exp.code_a,
        &exp.code_b,
        &cfg.params,
        objective.as_ref().map(|o| o as _),
        &mut stream(ROLE_ATTACK),
    )?;
    Ok((xa, xb, jam.s))
}

/// Names accepted by [`run_geometry_check`].
pub const GEOMETRY_CHECKS: [&str; 6] = [
    "event-rates",
    "orthogonality",
    "sum-pairs",
    "sumset-bound",
    "strip-angles",
    "avg-radius",
];

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EventRatesCheck {
    params: ChannelParams,
    code_a: CodebookSpec,
    #[serde(default)]
    code_b: Option<CodebookSpec>,
    attack: AttackSpec,
    #[serde(default)]
    tolerances: ToleranceProfile,
    trials: u64,
    root_seed: u64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct OrthogonalityCheck {
    code_a: CodebookSpec,
    #[serde(default)]
    code_b: Option<CodebookSpec>,
    eta: f64,
    trials: u64,
    root_seed: u64,
    /// Codes drawn per trial for the k-wise variant.
    #[serde(default)]
    k: Option<usize>,
    #[serde(default)]
    exhaustive: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SumPairsCheck {
    code: CodebookSpec,
    z: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SumsetBoundCheck {
    p: f64,
    tau: f64,
    omega: f64,
    delta: f64,
    n: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StripAnglesCheck {
    n: usize,
    p: f64,
    rho: f64,
    eps: f64,
    #[serde(default = "one")]
    z_ratio: f64,
    samples: u64,
    #[serde(default = "default_slack")]
    slack: f64,
    root_seed: u64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AvgRadiusCheck {
    n: usize,
    p: f64,
    n_tilde: f64,
    rho: f64,
    eps: f64,
    samples: u64,
    root_seed: u64,
}

fn one() -> f64 {
    1.0
}

fn default_slack() -> f64 {
    1e-9
}

fn parse<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
}

fn to_json<T: Serialize>(v: &T) -> Result<serde_json::Value> {
    Ok(serde_json::to_value(v)?)
}

/// Runs the named geometric check on a JSON configuration and returns its
/// report.
pub fn run_geometry_check(name: &str, config: &str) -> Result<serde_json::Value> {
    use crate::geometry as g;
    match name {
        "event-rates" => {
            let c: EventRatesCheck = parse(config)?;
            let a = c.code_a.build()?;
            let b = c.code_b.as_ref().map(|s| s.build()).transpose()?;
            let table = g::empirical_event_rates(
                &a,
                b.as_ref().unwrap_or(&a),
                &c.params,
                &c.attack,
                &c.tolerances,
                c.trials,
                c.root_seed,
            )
            .map_err(config_err)?;
            let csv = g::event_csv(&[("run".into(), table.clone())]);
            Ok(serde_json::json!({ "table": to_json(&table)?, "csv": csv }))
        }
        "orthogonality" => {
            let c: OrthogonalityCheck = parse(config)?;
            let a = c.code_a.build()?;
            let b = c.code_b.as_ref().map(|s| s.build()).transpose()?;
            let b = b.as_ref().unwrap_or(&a);
            let mut rng = SeededRng::new(c.root_seed, 0);
            let mc = g::empirical_orthogonality(&a, b, c.eta, c.trials, &mut rng)?;
            let mut report = serde_json::json!({ "monte_carlo": to_json(&mc)? });
            if let Some(k) = c.k {
                let codes: Vec<&Codebook> = std::iter::once(&a).chain(std::iter::repeat_n(b, k.saturating_sub(1))).collect();
                report["kwise"] = to_json(&g::kwise_orthogonality(&codes, c.eta, c.trials, &mut rng).map_err(config_err)?)?;
            }
            if c.exhaustive {
                report["exhaustive"] = to_json(&g::orthogonality_exhaustive(&a, b, c.eta)?)?;
            }
            Ok(report)
        }
        "sum-pairs" => {
            let c: SumPairsCheck = parse(config)?;
            let code = match c.code.build()? {
                Codebook::Explicit(code) => code,
                _ => return Err(Error::Config("sum-pairs needs an explicit code without expurgation".into())),
            };
            let z = RealVec::new(c.z).map_err(config_err)?;
            Ok(serde_json::json!({
                "count": g::count_sum_pairs(&code, &z)?,
                "scan": g::count_sum_pairs_scan(&code, &z)?,
            }))
        }
        "sumset-bound" => {
            let c: SumsetBoundCheck = parse(config)?;
            let k = g::SumsetBoundConstants::new(c.p, c.tau, c.omega, c.delta).map_err(config_err)?;
            let bound = g::sumset_lower_bound(c.p, c.tau, c.omega, c.delta, c.n).map_err(config_err)?;
            Ok(serde_json::json!({ "constants": to_json(&k)?, "bound": bound }))
        }
        "strip-angles" => {
            let c: StripAnglesCheck = parse(config)?;
            let mut rng = SeededRng::new(c.root_seed, 0);
            to_json(
                &g::strip_angle_check(c.n, c.p, c.rho, c.eps, c.z_ratio, c.samples, c.slack, &mut rng)
                    .map_err(config_err)?,
            )
        }
        "avg-radius" => {
            let c: AvgRadiusCheck = parse(config)?;
            let mut rng = SeededRng::new(c.root_seed, 0);
            to_json(&g::avg_radius_check(c.n, c.p, c.n_tilde, c.rho, c.eps, c.samples, &mut rng).map_err(config_err)?)
        }
        other => Err(Error::Config(format!(
            "unknown geometry check {other:?}; expected one of {}",
            GEOMETRY_CHECKS.join(", ")
        ))),
    }
}

/// Structural summary of a lattice description.
pub fn lattice_info(spec: &LatticeSpec) -> Result<serde_json::Value> {
    let l = spec.build().map_err(config_err)?;
    let radii = l.radii(10_000);
    Ok(serde_json::json!({
        "n": l.dim(),
        "provenance": format!("{:?}", l.provenance()),
        "covolume": l.covolume(),
        "ln_covolume": l.ln_covolume(),
        "nld": l.nld(),
        "radii": to_json(&radii)?,
        "coarse_is_sublattice": spec.coarse().map(|c| c.build().map(|c| c.is_sublattice_of(&l))).transpose()?,
    }))
}
