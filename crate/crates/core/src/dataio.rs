//! Plain-text record and config formats, exports, and the synthetic cohort
//! generator.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::eval::{metrics_report_csv, FoldResult};
use crate::features::{FeatureConfig, FeatureMatrix, EPOCH_S};
use crate::learner::{BoostConfig, DEFAULT_SQI_THRESHOLD};
use crate::persistence::{diagrams_to_csv, PersistenceDiagram};
use crate::signal::TimeSeries;
use crate::stage::{SleepStage, Stage};

pub const AIRFLOW_FILE: &str = "airflow.txt";
pub const STAGES_FILE: &str = "stages.txt";
pub const MIN_RATE_HZ: f64 = 8.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SubjectRecord {
    pub subject_id: String,
    pub airflow: TimeSeries,
    pub stages: Vec<SleepStage>,
}

impl SubjectRecord {
    pub fn new(subject_id: impl Into<String>, airflow: TimeSeries, stages: Vec<SleepStage>) -> Result<Self> {
        let subject_id = subject_id.into();
        if subject_id.is_empty() || subject_id.contains([',', '\n', '\r']) {
            return Err(Error::invalid(format!("subject id `{subject_id}` must be non-empty without commas")));
        }
        if airflow.rate_hz() < MIN_RATE_HZ {
            return Err(Error::invalid(format!(
                "airflow rate {} Hz below the {MIN_RATE_HZ} Hz minimum",
                airflow.rate_hz()
            )));
        }
        let expected = epoch_count(&airflow);
        if stages.len() != expected {
            return Err(Error::SchemaMismatch(format!(
                "{} stage labels for {expected} whole epochs of airflow",
                stages.len()
            )));
        }
        Ok(Self {
            subject_id,
            airflow,
            stages,
        })
    }
}

fn epoch_count(airflow: &TimeSeries) -> usize {
    airflow.len() / (EPOCH_S * airflow.rate_hz()).round() as usize
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

/// Header `rate_hz=<real>`, then one finite sample per line.
pub fn parse_airflow(text: &str, path: &Path) -> Result<TimeSeries> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| parse_err(path, 1, "empty file"))?;
    let rate: f64 = header
        .strip_prefix("rate_hz=")
        .and_then(|v| v.trim().parse().ok())
        .filter(|r: &f64| r.is_finite() && *r > 0.0)
        .ok_or_else(|| parse_err(path, 1, "expected header `rate_hz=<positive real>`"))?;
    let samples = lines
        .enumerate()
        .map(|(i, l)| {
            l.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(path, i + 2, format!("bad sample `{l}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    if samples.is_empty() {
        return Err(parse_err(path, 2, "no samples"));
    }
    TimeSeries::new(samples, rate)
}

/// One label from `W, R, N1, N2, N3` per line.
pub fn parse_stages(text: &str, path: &Path) -> Result<Vec<SleepStage>> {
    text.lines()
        .enumerate()
        .map(|(i, l)| {
            l.trim()
                .parse::<SleepStage>()
                .map_err(|_| parse_err(path, i + 1, format!("unknown stage label `{}`", l.trim())))
        })
        .collect()
}

/// Loads a record; the subject id is the name of the airflow file's directory.
pub fn load_record(airflow_path: &Path, stages_path: &Path) -> Result<SubjectRecord> {
    let airflow = parse_airflow(&read(airflow_path)?, airflow_path)?;
    let stages = parse_stages(&read(stages_path)?, stages_path)?;
    let expected = epoch_count(&airflow);
    if stages.len() != expected {
        return Err(Error::Schema {
            path: stages_path.display().to_string(),
            msg: format!(
                "{} stage labels but the airflow holds {expected} whole epochs",
                stages.len()
            ),
        });
    }
    let id = airflow_path
        .parent()
        .and_then(Path::file_name)
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "subject".into());
    SubjectRecord::new(id, airflow, stages)
}

pub fn load_record_dir(dir: &Path) -> Result<SubjectRecord> {
    load_record(&dir.join(AIRFLOW_FILE), &dir.join(STAGES_FILE))
}

/// All record subdirectories of `data_dir`, sorted by name.
pub fn list_records(data_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(data_dir)
        .map_err(|e| Error::io(data_dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(AIRFLOW_FILE).is_file())
        .collect();
    dirs.sort();
    Ok(dirs)
}

pub fn airflow_text(ts: &TimeSeries) -> String {
    let mut out = format!("rate_hz={}\n", ts.rate_hz());
    for v in ts.samples() {
        let _ = writeln!(out, "{v}");
    }
    out
}

pub fn stages_text(stages: &[SleepStage]) -> String {
    stages.iter().map(|s| format!("{}\n", s.label())).collect()
}

/// Writes `dir/<subject_id>/{airflow,stages}.txt`.
pub fn write_record(dir: &Path, rec: &SubjectRecord) -> Result<PathBuf> {
    let sub = dir.join(&rec.subject_id);
    fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
    write_text(&sub.join(AIRFLOW_FILE), &airflow_text(&rec.airflow))?;
    write_text(&sub.join(STAGES_FILE), &stages_text(&rec.stages))?;
    Ok(sub)
}

pub fn export_pd(diagrams: &[PersistenceDiagram], path: &Path) -> Result<()> {
    write_text(path, &diagrams_to_csv(diagrams))
}

pub fn export_features(m: &FeatureMatrix, path: &Path) -> Result<()> {
    write_text(path, &m.to_csv())
}

pub fn load_features(path: &Path) -> Result<FeatureMatrix> {
    FeatureMatrix::from_csv(&read(path)?, &path.display().to_string())
}

pub fn export_metrics(folds: &[FoldResult], path: &Path) -> Result<()> {
    write_text(path, &metrics_report_csv(folds))
}

/// Settings read from a flat `key=value` config file.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub boost: BoostConfig,
    pub sqi_threshold: f64,
    /// Drop low-SQI training rows; disabling it is an ablation.
    pub sqi_filter: bool,
    pub features: FeatureConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            boost: BoostConfig::default(),
            sqi_threshold: DEFAULT_SQI_THRESHOLD,
            sqi_filter: true,
            features: FeatureConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let err = |msg: String| Error::Parse {
                path: source.to_string(),
                line: i + 1,
                msg,
            };
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected key=value, found `{line}`")))?;
            let (k, v) = (k.trim(), v.trim());
            cfg.set(k, v).map_err(|e| err(e.to_string()))?;
        }
        cfg.boost.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read(path)?, &path.display().to_string())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if self.boost.set(key, value)? {
            return Ok(());
        }
        let bad = || Error::invalid(format!("bad value `{value}` for `{key}`"));
        let flag = |v: &str| match v {
            "true" => Ok(true),
            "false" => Ok(false),
            _ => Err(bad()),
        };
        match key {
            "sqi_threshold" => self.sqi_threshold = value.parse().map_err(|_| bad())?,
            "sqi_filter" => self.sqi_filter = flag(value)?,
            "epy_m_literal" => self.features.vectorize.epy_m_literal = flag(value)?,
            "rips_h1_source" => self.features.rips_h1_source = value.parse()?,
            "n_perm" => self.features.n_perm = value.parse().map_err(|_| bad())?,
            _ => return Err(Error::invalid(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    /// Canonical `key=value` text; identical settings give identical text.
    pub fn to_kv(&self) -> String {
        format!(
            "{}sqi_threshold={}\nsqi_filter={}\n{}",
            self.boost.to_kv(),
            self.sqi_threshold,
            self.sqi_filter,
            self.features.canonical()
        )
    }

    pub fn sqi_threshold(&self) -> Option<f64> {
        self.sqi_filter.then_some(self.sqi_threshold)
    }
}

/// Breathing-pattern parameters for one stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageParams {
    /// Mean breathing rate, cycles per minute.
    pub base_rate_cpm: f64,
    /// Breath-to-breath rate standard deviation, cycles per minute.
    pub rate_jitter_cpm: f64,
    pub amplitude: f64,
    /// Relative breath-to-breath amplitude standard deviation.
    pub amp_jitter: f64,
    /// Probability that an epoch of this stage carries a movement burst.
    pub artifact_prob: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_subjects: usize,
    pub epochs_per_subject: usize,
    pub seed: u64,
    pub rate_hz: f64,
    /// Row-stochastic, rows and columns in `Stage` order.
    pub transition: [[f64; 3]; 3],
    pub initial: Stage,
    /// Indexed by `Stage::index`.
    pub stages: [StageParams; 3],
    /// Per-subject offset of every base rate (standard deviation, cpm).
    pub subject_rate_sd: f64,
    /// Per-subject log-amplitude scale standard deviation.
    pub subject_amp_log_sd: f64,
    /// White measurement noise, relative to unit amplitude.
    pub noise_sd: f64,
    /// Movement burst noise standard deviation.
    pub artifact_sd: f64,
    /// Burst length range in seconds.
    pub artifact_len_s: (f64, f64),
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_subjects: 8,
            epochs_per_subject: 240,
            seed: 0,
            rate_hz: 100.0,
            transition: [
                [0.95, 0.01, 0.04],
                [0.02, 0.94, 0.04],
                [0.02, 0.015, 0.965],
            ],
            initial: Stage::Wake,
            stages: [
                StageParams {
                    base_rate_cpm: 18.0,
                    rate_jitter_cpm: 3.5,
                    amplitude: 1.1,
                    amp_jitter: 0.35,
                    artifact_prob: 0.3,
                },
                StageParams {
                    base_rate_cpm: 17.0,
                    rate_jitter_cpm: 2.5,
                    amplitude: 0.6,
                    amp_jitter: 0.25,
                    artifact_prob: 0.0,
                },
                StageParams {
                    base_rate_cpm: 14.0,
                    rate_jitter_cpm: 0.4,
                    amplitude: 1.0,
                    amp_jitter: 0.05,
                    artifact_prob: 0.0,
                },
            ],
            subject_rate_sd: 1.0,
            subject_amp_log_sd: 0.2,
            noise_sd: 0.05,
            artifact_sd: 2.0,
            artifact_len_s: (2.0, 8.0),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        for row in &self.transition {
            if row.iter().any(|p| !(*p >= 0.0)) || (row.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(Error::invalid("transition rows must be non-negative and sum to 1"));
            }
        }
        let sds = self.stages.iter().flat_map(|s| [s.rate_jitter_cpm, s.amp_jitter]).chain([
            self.subject_rate_sd,
            self.subject_amp_log_sd,
            self.noise_sd,
            self.artifact_sd,
        ]);
        for v in sds {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::invalid("standard deviations must be finite and non-negative"));
            }
        }
        if self.stages.iter().any(|s| !(s.base_rate_cpm > 0.0) || !(s.amplitude > 0.0)) {
            return Err(Error::invalid("base rates and amplitudes must be positive"));
        }
        if self.stages.iter().any(|s| !(0.0..=1.0).contains(&s.artifact_prob)) {
            return Err(Error::invalid("artifact probabilities must lie in [0, 1]"));
        }
        if self.rate_hz < MIN_RATE_HZ {
            return Err(Error::invalid(format!("synthetic rate must be at least {MIN_RATE_HZ} Hz")));
        }
        let (lo, hi) = self.artifact_len_s;
        if !(lo > 0.0 && lo <= hi && hi <= EPOCH_S) {
            return Err(Error::invalid("artifact length range must lie within one epoch"));
        }
        Ok(())
    }

    /// Stationary distribution of the transition matrix.
    pub fn stationary(&self) -> [f64; 3] {
        let mut pi = [1.0 / 3.0; 3];
        for _ in 0..100_000 {
            let mut next = [0.0; 3];
            for i in 0..3 {
                for j in 0..3 {
                    next[j] += pi[i] * self.transition[i][j];
                }
            }
            let delta: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
            pi = next;
            if delta < 1e-15 {
                break;
            }
        }
        pi
    }
}

/// Synthetic class labels map back to a representative scored label.
fn scored(stage: Stage, rng: &mut ChaCha8Rng) -> SleepStage {
    match stage {
        Stage::Wake => SleepStage::W,
        Stage::Rem => SleepStage::R,
        Stage::Nrem => [SleepStage::N1, SleepStage::N2, SleepStage::N2, SleepStage::N3][rng.random_range(0..4)],
    }
}

fn next_stage(cfg: &SynthConfig, from: Stage, rng: &mut ChaCha8Rng) -> Stage {
    let u: f64 = rng.random();
    let row = cfg.transition[from.index()];
    let mut acc = 0.0;
    for (j, p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return Stage::from_index(j).expect("three classes");
        }
    }
    Stage::from_index(row.iter().rposition(|p| *p > 0.0).unwrap_or(2)).expect("three classes")
}

pub fn synth_subject_id(i: usize) -> String {
    format!("s{:02}", i + 1)
}

fn subject_rng(seed: u64, subject: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(subject as u64 + 1);
    rng
}

/// Stage sequence only; exposed for checking the chain.
pub fn synth_stage_chain(cfg: &SynthConfig, n_epochs: usize, rng: &mut ChaCha8Rng) -> Vec<Stage> {
    let mut out = Vec::with_capacity(n_epochs);
    let mut s = cfg.initial;
    for e in 0..n_epochs {
        if e > 0 {
            s = next_stage(cfg, s, rng);
        }
        out.push(s);
    }
    out
}

fn synth_subject(cfg: &SynthConfig, index: usize) -> Result<SubjectRecord> {
    let mut rng = subject_rng(cfg.seed, index);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let classes = synth_stage_chain(cfg, cfg.epochs_per_subject, &mut rng);
    let stages: Vec<SleepStage> = classes.iter().map(|&c| scored(c, &mut rng)).collect();

    let rate_offset = cfg.subject_rate_sd * std_normal.sample(&mut rng);
    let amp_scale = (cfg.subject_amp_log_sd * std_normal.sample(&mut rng)).exp();
    let fs = cfg.rate_hz;
    let per_epoch = (EPOCH_S * fs).round() as usize;
    let n = per_epoch * cfg.epochs_per_subject;
    let mut x = vec![0.0; n];

    // Breath by breath: the stage at the breath onset sets its period and
    // depth; each breath is one period of -A sin, so onsets are downward
    // zero crossings.
    let mut t0 = 0usize;
    while t0 < n {
        let p = &cfg.stages[classes[t0 / per_epoch].index()];
        let rate = (p.base_rate_cpm + rate_offset + p.rate_jitter_cpm * std_normal.sample(&mut rng))
            .clamp(5.0, 40.0);
        let len = ((60.0 / rate) * fs).round().max(2.0) as usize;
        let amp = p.amplitude * amp_scale * (1.0 + p.amp_jitter * std_normal.sample(&mut rng)).max(0.1);
        for k in 0..len.min(n - t0) {
            let phase = k as f64 / len as f64;
            x[t0 + k] = -amp * (2.0 * std::f64::consts::PI * phase).sin();
        }
        t0 += len;
    }
    for v in x.iter_mut() {
        *v += cfg.noise_sd * std_normal.sample(&mut rng);
    }
    for (e, c) in classes.iter().enumerate() {
        if !(rng.random::<f64>() < cfg.stages[c.index()].artifact_prob) {
            continue;
        }
        let (lo, hi) = cfg.artifact_len_s;
        let len = ((lo + (hi - lo) * rng.random::<f64>()) * fs).round() as usize;
        let start = e * per_epoch + rng.random_range(0..=per_epoch - len.min(per_epoch));
        for k in 0..len {
            let envelope = (std::f64::consts::PI * k as f64 / len as f64).sin();
            x[start + k] += cfg.artifact_sd * envelope * std_normal.sample(&mut rng);
        }
    }
    SubjectRecord::new(synth_subject_id(index), TimeSeries::new(x, fs)?, stages)
}

/// Deterministic cohort; each subject draws from its own stream of the seed.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<Vec<SubjectRecord>> {
    cfg.validate()?;
    (0..cfg.n_subjects).into_par_iter().map(|i| synth_subject(cfg, i)).collect()
}

/// Stage of every epoch reduced to the three classes.
pub fn classes(stages: &[SleepStage]) -> Vec<Stage> {
    stages.iter().map(|s| s.class()).collect()
}
