//! Monte Carlo runner comparing empirical detection rates with the
//! closed-form predictions.
//!
//! Trial `i` of a run with seed `s` draws all of its randomness from ChaCha8
//! seeded with `s` on stream `i`, so results do not depend on how trials are
//! scheduled across workers. Tallies are integer counts reduced with `+`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::BinarySymmetricChannel;
use crate::gf2n::{canonical_spec, FieldSpec, MAX_WIDTH};
use crate::hashing::{HashFunction, DEFAULT_DEGREE};
use crate::protocol::{AdversaryStrategy, Channels, EdgeNoise, Scenario, Watcher};
use crate::theory::{Prediction, TheoryParams};
use crate::watchdog::{Engine, TRELLIS_MAX_WIDTH};
use crate::Word;

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

/// Value of the `schema` field in JSON reports.
pub const REPORT_SCHEMA: &str = "algebraic-watchdog/sim-report/v1";

const CRN_NOTE: &str = "common random numbers: honest and malicious arms share hash, sources, \
coefficients and interference noise within each trial";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {}", .0.join("; "))]
    Validation(Vec<String>),
    #[error("unknown sweep axis `{0}`")]
    UnknownAxis(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl HarnessError {
    pub fn is_validation(&self) -> bool {
        matches!(self, HarnessError::Validation(_) | HarnessError::UnknownAxis(_))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceDistribution {
    #[default]
    Uniform,
    Fixed([Word; 2]),
}

fn default_degree() -> usize {
    DEFAULT_DEGREE
}

/// Experiment description; the JSON config file uses these field names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub n: u32,
    pub h: u32,
    #[serde(default = "default_degree")]
    pub d: usize,
    pub p12: f64,
    pub p21: f64,
    pub p31: f64,
    pub p32: f64,
    pub epsilon: f64,
    pub adversary: AdversaryStrategy,
    #[serde(default)]
    pub engine: Engine,
    pub trials: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub sources: SourceDistribution,
    /// Permit zero coding coefficients.
    #[serde(default)]
    pub allow_zero_coefficients: bool,
}

impl SimConfig {
    /// Same crossover on every interference edge.
    pub fn uniform(n: u32, h: u32, p: f64, epsilon: f64, adversary: AdversaryStrategy, trials: u64, seed: u64) -> Self {
        Self {
            n,
            h,
            d: DEFAULT_DEGREE,
            p12: p,
            p21: p,
            p31: p,
            p32: p,
            epsilon,
            adversary,
            engine: Engine::Algebraic,
            trials,
            seed,
            sources: SourceDistribution::Uniform,
            allow_zero_coefficients: false,
        }
    }

    pub fn crossovers(&self) -> [f64; 4] {
        [self.p12, self.p21, self.p31, self.p32]
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let mut bad = Vec::new();
        if !(2..=u32::from(MAX_WIDTH)).contains(&self.n) {
            bad.push(format!("n = {} outside 2..={MAX_WIDTH}", self.n));
        }
        if self.h == 0 || self.h > self.n {
            bad.push(format!("h = {} outside 1..=n", self.h));
        }
        for (name, p) in [("p12", self.p12), ("p21", self.p21), ("p31", self.p31), ("p32", self.p32)] {
            if !(0.0..=0.5).contains(&p) {
                bad.push(format!("{name} = {p} outside [0, 0.5]"));
            }
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            bad.push(format!("epsilon = {} outside (0, 1)", self.epsilon));
        }
        if self.trials == 0 {
            bad.push("trials must be >= 1".into());
        }
        if self.n <= u32::from(MAX_WIDTH) {
            if let Err(e) = self.adversary.validate(self.n as u8) {
                bad.push(format!("adversary: {e}"));
            }
        }
        if let Engine::Trellis { threshold } = self.engine {
            if self.n > u32::from(TRELLIS_MAX_WIDTH) {
                bad.push(format!("engine: trellis needs n <= {TRELLIS_MAX_WIDTH}"));
            }
            if !(0.0..=1.0).contains(&threshold) {
                bad.push(format!("engine: threshold {threshold} outside [0, 1]"));
            }
        }
        if let SourceDistribution::Fixed(x) = self.sources {
            if x.iter().any(|&v| u64::from(v) >> self.n.min(32) != 0) {
                bad.push(format!("sources: {x:?} do not fit in n bits"));
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(HarnessError::Validation(bad))
        }
    }

    pub fn theory_params(&self) -> TheoryParams {
        TheoryParams::from_channels(self.n, self.h, self.crossovers(), self.epsilon)
            .expect("validated config yields valid radii")
    }

    fn channels(&self) -> Channels {
        let ch = |p| BinarySymmetricChannel::new(p).expect("validated crossover");
        Channels {
            p12: ch(self.p12),
            p21: ch(self.p21),
            p31: ch(self.p31),
            p32: ch(self.p32),
        }
    }

    fn noiseless(&self) -> bool {
        self.crossovers().iter().all(|&p| p == 0.0)
    }
}

/// Execution knobs that must not influence results.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
    /// Write one CSV row per trial here.
    pub trial_log: Option<PathBuf>,
}

/// Rounds to 12 significant digits, the precision used in reports.
pub fn round12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().expect("formatted float parses")
}

/// Proportion with a Wilson 95% score interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub count: u64,
    pub trials: u64,
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl Estimate {
    pub fn wilson(count: u64, trials: u64) -> Self {
        assert!(trials > 0 && count <= trials);
        let n = trials as f64;
        let phat = count as f64 / n;
        let z2 = Z95 * Z95;
        let denom = 1.0 + z2 / n;
        let center = (phat + z2 / (2.0 * n)) / denom;
        let half = Z95 / denom * (phat * (1.0 - phat) / n + z2 / (4.0 * n * n)).sqrt();
        Self {
            count,
            trials,
            rate: round12(phat),
            ci_low: if count == 0 { 0.0 } else { round12((center - half).max(0.0)) },
            ci_high: if count == trials { 1.0 } else { round12((center + half).min(1.0)) },
        }
    }

    pub fn half_width(&self) -> f64 {
        (self.ci_high - self.ci_low) / 2.0
    }
}

/// Flag/pass counts for one relay behaviour.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArmTally {
    /// Flagged by at least one watcher.
    pub flagged: u64,
    /// Passed by both watchers.
    pub passed: u64,
    pub flagged_v1: u64,
    pub flagged_v2: u64,
}

impl ArmTally {
    fn record(&mut self, flags: [bool; 2]) {
        if flags[0] || flags[1] {
            self.flagged += 1;
        } else {
            self.passed += 1;
        }
        self.flagged_v1 += u64::from(flags[0]);
        self.flagged_v2 += u64::from(flags[1]);
    }

    fn merge(self, o: Self) -> Self {
        Self {
            flagged: self.flagged + o.flagged,
            passed: self.passed + o.passed,
            flagged_v1: self.flagged_v1 + o.flagged_v1,
            flagged_v2: self.flagged_v2 + o.flagged_v2,
        }
    }

    pub fn total(&self) -> u64 {
        self.flagged + self.passed
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Tally {
    honest: ArmTally,
    malicious: ArmTally,
}

impl Tally {
    fn merge(self, o: Self) -> Self {
        Self {
            honest: self.honest.merge(o.honest),
            malicious: self.malicious.merge(o.malicious),
        }
    }
}

/// Per-trial result, also the row format of the trial log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub x1: Word,
    pub x2: Word,
    pub alpha1: Word,
    pub alpha2: Word,
    pub error: Word,
    pub honest_flag_v1: bool,
    pub honest_flag_v2: bool,
    pub malicious_flag_v1: Option<bool>,
    pub malicious_flag_v2: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Radii {
    pub r12: u32,
    pub r21: u32,
    pub r31: u32,
    pub r32: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub schema: String,
    pub config: SimConfig,
    pub adversary: String,
    pub engine: String,
    pub radii: Radii,
    pub honest: ArmTally,
    /// Honest relay flagged by either watcher.
    pub gamma: Estimate,
    pub gamma_v1: Estimate,
    pub gamma_v2: Estimate,
    pub malicious: Option<ArmTally>,
    /// Malicious relay passed by both watchers.
    pub beta: Option<Estimate>,
    pub beta_v1: Option<Estimate>,
    pub beta_v2: Option<Estimate>,
    pub predicted: Prediction,
    pub variance_reduction: String,
    pub trial_log: Option<String>,
    pub wall_time_secs: f64,
}

fn rng_for(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

fn run_trial(cfg: &SimConfig, spec: FieldSpec, channels: &Channels, index: u64) -> TrialRecord {
    let mut rng = rng_for(cfg.seed, index);
    let n = cfg.n;
    let hash = HashFunction::sample(&mut rng, cfg.d, spec, cfg.h as u8).expect("validated widths");
    let [x1, x2] = match cfg.sources {
        SourceDistribution::Uniform => [rng.random_range(0..spec.order()), rng.random_range(0..spec.order())],
        SourceDistribution::Fixed(x) => x,
    };
    let lo = if cfg.allow_zero_coefficients { 0 } else { 1 };
    let a1 = rng.random_range(lo..spec.order());
    let a2 = rng.random_range(lo..spec.order());
    let noise = EdgeNoise::draw(channels, n, &mut rng);
    let el = |v| spec.element(v).expect("in range");
    let scn = Scenario::new_unchecked(hash, [el(x1), el(x2)], [el(a1), el(a2)], *channels, cfg.epsilon);
    let src = scn.source_packets();

    let verdicts = |e: Word| {
        let relay = scn.relay_packet_with_error(e);
        Watcher::BOTH.map(|w| cfg.engine.check(&scn.observe_with_noise(w, &src, &relay, &noise)).flagged())
    };
    let honest = verdicts(0);
    if cfg.noiseless() {
        assert!(
            !honest[0] && !honest[1],
            "honest relay flagged on noiseless channels (trial {index}, seed {})",
            cfg.seed
        );
    }
    let (error, malicious) = if cfg.adversary.is_malicious() {
        let e = scn.choose_error(cfg.adversary, &mut rng).expect("validated strategy");
        (e, Some(verdicts(e)))
    } else {
        (0, None)
    };
    TrialRecord {
        trial: index,
        x1,
        x2,
        alpha1: a1,
        alpha2: a2,
        error,
        honest_flag_v1: honest[0],
        honest_flag_v2: honest[1],
        malicious_flag_v1: malicious.map(|m| m[0]),
        malicious_flag_v2: malicious.map(|m| m[1]),
    }
}

fn tally_of(rec: &TrialRecord) -> Tally {
    let mut t = Tally::default();
    t.honest.record([rec.honest_flag_v1, rec.honest_flag_v2]);
    if let (Some(a), Some(b)) = (rec.malicious_flag_v1, rec.malicious_flag_v2) {
        t.malicious.record([a, b]);
    }
    t
}

pub fn run_trials(cfg: &SimConfig) -> Result<SimReport, HarnessError> {
    run_trials_with(cfg, &RunOptions::default())
}

pub fn run_trials_with(cfg: &SimConfig, opts: &RunOptions) -> Result<SimReport, HarnessError> {
    cfg.validate()?;
    let started = Instant::now();
    let spec = canonical_spec(cfg.n).expect("validated width");
    let channels = cfg.channels();

    let work = || -> Result<Tally, HarnessError> {
        if let Some(path) = &opts.trial_log {
            let records: Vec<TrialRecord> = (0..cfg.trials)
                .into_par_iter()
                .map(|i| run_trial(cfg, spec, &channels, i))
                .collect();
            let mut w = csv::Writer::from_path(path)?;
            for r in &records {
                w.serialize(r)?;
            }
            w.flush()?;
            Ok(records.iter().map(tally_of).fold(Tally::default(), Tally::merge))
        } else {
            Ok((0..cfg.trials)
                .into_par_iter()
                .map(|i| tally_of(&run_trial(cfg, spec, &channels, i)))
                .reduce(Tally::default, Tally::merge))
        }
    };
    let tally = match opts.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .expect("thread pool")
            .install(work)?,
        None => work()?,
    };
    debug_assert_eq!(tally.honest.total(), cfg.trials);

    let tp = cfg.theory_params();
    let mut predicted = Prediction::new(&tp, cfg.epsilon);
    predicted.gamma_bound = round12(predicted.gamma_bound);
    predicted.gamma_bound_per_watcher = round12(predicted.gamma_bound_per_watcher);
    predicted.beta = round12(predicted.beta);
    predicted.beta_v1 = round12(predicted.beta_v1);
    predicted.beta_v2 = round12(predicted.beta_v2);

    let t = cfg.trials;
    let malicious = cfg.adversary.is_malicious().then_some(tally.malicious);
    Ok(SimReport {
        schema: REPORT_SCHEMA.into(),
        config: cfg.clone(),
        adversary: cfg.adversary.name(),
        engine: cfg.engine.name().into(),
        radii: Radii {
            r12: tp.r12,
            r21: tp.r21,
            r31: tp.r31,
            r32: tp.r32,
        },
        honest: tally.honest,
        gamma: Estimate::wilson(tally.honest.flagged, t),
        gamma_v1: Estimate::wilson(tally.honest.flagged_v1, t),
        gamma_v2: Estimate::wilson(tally.honest.flagged_v2, t),
        malicious,
        beta: malicious.map(|m| Estimate::wilson(m.passed, t)),
        beta_v1: malicious.map(|m| Estimate::wilson(t - m.flagged_v1, t)),
        beta_v2: malicious.map(|m| Estimate::wilson(t - m.flagged_v2, t)),
        predicted,
        variance_reduction: CRN_NOTE.into(),
        trial_log: opts.trial_log.as_ref().map(|p| p.display().to_string()),
        wall_time_secs: round12(started.elapsed().as_secs_f64()),
    })
}

/// Numeric configuration fields a sweep can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    N,
    H,
    D,
    P12,
    P21,
    P31,
    P32,
    /// All four crossovers at once.
    P,
    Epsilon,
    Trials,
    Threshold,
}

impl std::str::FromStr for Axis {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "n" => Axis::N,
            "h" => Axis::H,
            "d" => Axis::D,
            "p12" => Axis::P12,
            "p21" => Axis::P21,
            "p31" => Axis::P31,
            "p32" => Axis::P32,
            "p" => Axis::P,
            "epsilon" => Axis::Epsilon,
            "trials" => Axis::Trials,
            "threshold" => Axis::Threshold,
            _ => return Err(HarnessError::UnknownAxis(s.into())),
        })
    }
}

fn as_count(axis: &str, v: f64) -> Result<u64, HarnessError> {
    if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
        Ok(v as u64)
    } else {
        Err(HarnessError::Validation(vec![format!("{axis} = {v} is not a nonnegative integer")]))
    }
}

impl Axis {
    pub fn apply(&self, cfg: &mut SimConfig, v: f64) -> Result<(), HarnessError> {
        match self {
            Axis::N => cfg.n = as_count("n", v)? as u32,
            Axis::H => cfg.h = as_count("h", v)? as u32,
            Axis::D => cfg.d = as_count("d", v)? as usize,
            Axis::P12 => cfg.p12 = v,
            Axis::P21 => cfg.p21 = v,
            Axis::P31 => cfg.p31 = v,
            Axis::P32 => cfg.p32 = v,
            Axis::P => {
                cfg.p12 = v;
                cfg.p21 = v;
                cfg.p31 = v;
                cfg.p32 = v;
            }
            Axis::Epsilon => cfg.epsilon = v,
            Axis::Trials => cfg.trials = as_count("trials", v)?,
            Axis::Threshold => cfg.engine = Engine::Trellis { threshold: v },
        }
        Ok(())
    }
}

/// Configs for each sweep point; point `i` runs with `seed ^ i`.
pub fn sweep_configs(base: &SimConfig, axis: &str, values: &[f64]) -> Result<Vec<SimConfig>, HarnessError> {
    let axis: Axis = axis.parse()?;
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let mut cfg = base.clone();
            axis.apply(&mut cfg, v)?;
            cfg.seed = base.seed ^ i as u64;
            cfg.validate()?;
            Ok(cfg)
        })
        .collect()
}

pub fn sweep(base: &SimConfig, axis: &str, values: &[f64]) -> Result<Vec<SimReport>, HarnessError> {
    sweep_with(base, axis, values, &RunOptions::default())
}

pub fn sweep_with(
    base: &SimConfig,
    axis: &str,
    values: &[f64],
    opts: &RunOptions,
) -> Result<Vec<SimReport>, HarnessError> {
    sweep_configs(base, axis, values)?
        .iter()
        .map(|cfg| run_trials_with(cfg, opts))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(format!("unknown report format `{other}` (json|csv)")),
        }
    }
}

/// Column names of the CSV report, in order.
pub const CSV_HEADER: [&str; 36] = [
    "n",
    "h",
    "d",
    "p12",
    "p21",
    "p31",
    "p32",
    "epsilon",
    "adversary",
    "engine",
    "threshold",
    "trials",
    "seed",
    "r12",
    "r21",
    "r31",
    "r32",
    "gamma",
    "gamma_ci_low",
    "gamma_ci_high",
    "gamma_v1",
    "gamma_v2",
    "beta",
    "beta_ci_low",
    "beta_ci_high",
    "beta_v1",
    "beta_v2",
    "predicted_gamma_bound",
    "predicted_gamma_bound_per_watcher",
    "predicted_beta",
    "predicted_beta_v1",
    "predicted_beta_v2",
    "honest_flagged",
    "malicious_passed",
    "wall_time_secs",
    "variance_reduction",
];

fn num(x: f64) -> String {
    format!("{}", round12(x))
}

fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn csv_row(r: &SimReport) -> Vec<String> {
    let c = &r.config;
    vec![
        c.n.to_string(),
        c.h.to_string(),
        c.d.to_string(),
        num(c.p12),
        num(c.p21),
        num(c.p31),
        num(c.p32),
        num(c.epsilon),
        r.adversary.clone(),
        r.engine.clone(),
        opt_num(c.engine.threshold()),
        c.trials.to_string(),
        c.seed.to_string(),
        r.radii.r12.to_string(),
        r.radii.r21.to_string(),
        r.radii.r31.to_string(),
        r.radii.r32.to_string(),
        num(r.gamma.rate),
        num(r.gamma.ci_low),
        num(r.gamma.ci_high),
        num(r.gamma_v1.rate),
        num(r.gamma_v2.rate),
        opt_num(r.beta.map(|b| b.rate)),
        opt_num(r.beta.map(|b| b.ci_low)),
        opt_num(r.beta.map(|b| b.ci_high)),
        opt_num(r.beta_v1.map(|b| b.rate)),
        opt_num(r.beta_v2.map(|b| b.rate)),
        num(r.predicted.gamma_bound),
        num(r.predicted.gamma_bound_per_watcher),
        num(r.predicted.beta),
        num(r.predicted.beta_v1),
        num(r.predicted.beta_v2),
        r.honest.flagged.to_string(),
        r.malicious.map(|m| m.passed.to_string()).unwrap_or_default(),
        num(r.wall_time_secs),
        "crn".into(),
    ]
}

/// JSON document for a set of reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSet {
    pub schema: String,
    pub reports: Vec<SimReport>,
}

fn create(path: &Path) -> Result<BufWriter<File>, HarnessError> {
    Ok(BufWriter::new(File::create(path)?))
}

pub fn write_report(rep: &SimReport, path: &Path, format: ReportFormat) -> Result<(), HarnessError> {
    match format {
        ReportFormat::Json => {
            let mut w = create(path)?;
            serde_json::to_writer_pretty(&mut w, rep)?;
            writeln!(w)?;
            w.flush()?;
            Ok(())
        }
        ReportFormat::Csv => write_reports(std::slice::from_ref(rep), path, format),
    }
}

pub fn write_reports(reps: &[SimReport], path: &Path, format: ReportFormat) -> Result<(), HarnessError> {
    let mut w = create(path)?;
    match format {
        ReportFormat::Json => {
            let set = ReportSet {
                schema: REPORT_SCHEMA.into(),
                reports: reps.to_vec(),
            };
            serde_json::to_writer_pretty(&mut w, &set)?;
            writeln!(w)?;
        }
        ReportFormat::Csv => {
            let mut cw = csv::Writer::from_writer(&mut w);
            cw.write_record(CSV_HEADER)?;
            for r in reps {
                cw.write_record(csv_row(r))?;
            }
            cw.flush()?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Report as a JSON string, as written by [`write_report`].
pub fn report_json(rep: &SimReport) -> Result<String, HarnessError> {
    Ok(serde_json::to_string_pretty(rep)?)
}
