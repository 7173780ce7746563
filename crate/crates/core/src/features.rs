//! Per-epoch feature vectors built from six-epoch (180 s) windows of airflow
//! and IRR: the topological block (78 values) and a classical block.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;

use crate::dataio::SubjectRecord;
use crate::error::{Error, Result};
use crate::persistence::{
    diameter, maxmin_subsample, rips_pd_with_cap, sublevel_pd0, takens_embed, PersistenceDiagram,
    DEFAULT_RIPS_CAP,
};
use crate::respiration::{
    build_irr, detect_breath_cycles, sqi, BreathConfig, IRR_RATE_HZ, RESP_BAND_HZ,
    SQI_BANDPASS_ORDER,
};
use crate::signal::{butter_bandpass, power_spectrum, TimeSeries};
use crate::stage::{SleepStage, Stage};
use crate::stats::{mean_std, sample_entropy, Moments};
use crate::vectorize::{finitize, hepc, persistence_stats, VectorizeConfig, HEPC_LEN, PS_LEN, PS_NAMES};

pub const EPOCH_S: f64 = 30.0;
pub const WINDOW_EPOCHS: usize = 6;
pub const TDA_LEN: usize = 3 * PS_LEN + 3 * HEPC_LEN;

pub const CLASSIC_NAMES: [&str; 16] = [
    "breath_interval_mean",
    "breath_interval_std",
    "breath_interval_skew",
    "breath_interval_kurt",
    "irr_mean",
    "irr_std",
    "irr_min",
    "irr_max",
    "irr_range",
    "spectral_peak_hz",
    "spectral_peak_fraction",
    "band_ratio_0_10_0_20",
    "band_ratio_0_20_0_40",
    "band_ratio_0_40_0_75",
    "irr_sample_entropy",
    "sqi",
];
pub const CLASSIC_LEN: usize = CLASSIC_NAMES.len();

/// Signal the dimension-1 Rips diagram is computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RipsH1Source {
    Irr,
    Airflow,
}

impl RipsH1Source {
    pub fn as_str(self) -> &'static str {
        match self {
            RipsH1Source::Irr => "irr",
            RipsH1Source::Airflow => "airflow",
        }
    }
}

impl FromStr for RipsH1Source {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "irr" => Ok(RipsH1Source::Irr),
            "airflow" => Ok(RipsH1Source::Airflow),
            other => Err(Error::invalid(format!("rips_h1_source must be irr or airflow, got `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureSet {
    Tda,
    Cla,
    All,
}

impl FeatureSet {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureSet::Tda => "tda",
            FeatureSet::Cla => "cla",
            FeatureSet::All => "all",
        }
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tda" => Ok(FeatureSet::Tda),
            "cla" | "ntda" => Ok(FeatureSet::Cla),
            "all" => Ok(FeatureSet::All),
            other => Err(Error::invalid(format!("unknown feature set `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureConfig {
    pub breath: BreathConfig,
    pub vectorize: VectorizeConfig,
    pub rips_h1_source: RipsH1Source,
    pub embed_dim: usize,
    pub delay_s: f64,
    /// Landmarks kept by maxmin subsampling before Rips.
    pub n_perm: usize,
    pub rips_cap: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            breath: BreathConfig::default(),
            vectorize: VectorizeConfig::default(),
            rips_h1_source: RipsH1Source::Irr,
            embed_dim: 3,
            delay_s: 1.0,
            n_perm: 125,
            rips_cap: DEFAULT_RIPS_CAP,
        }
    }
}

impl FeatureConfig {
    /// Canonical text used for hashing cache keys. Every field is listed.
    pub fn canonical(&self) -> String {
        let b = &self.breath;
        format!(
            "breath.lowpass_hz={:?}\nbreath.lowpass_order={}\nbreath.min_cycle_s={:?}\n\
             breath.amp_frac={:?}\nbreath.min_onsets={}\nbreath.min_duration_s={:?}\n\
             epy_m_literal={}\nsigma={:?}\nrips_h1_source={}\nembed_dim={}\ndelay_s={:?}\n\
             n_perm={}\nrips_cap={}\n",
            b.lowpass_hz,
            b.lowpass_order,
            b.min_cycle_s,
            b.amp_frac,
            b.min_onsets,
            b.min_duration_s,
            self.vectorize.epy_m_literal,
            self.vectorize.sigma,
            self.rips_h1_source.as_str(),
            self.embed_dim,
            self.delay_s,
            self.n_perm,
            self.rips_cap,
        )
    }
}

/// Six epochs of signal ending at epoch `epoch_index` (one-based, > 5).
#[derive(Debug, Clone)]
pub struct EpochWindow {
    pub epoch_index: usize,
    pub airflow: TimeSeries,
    /// `None` when breath detection failed over the whole record.
    pub irr: Option<TimeSeries>,
    pub sqi: f64,
    pub stage: Stage,
}

/// Splits a record into one window per epoch index `6..=n_epochs`. The IRR
/// is built once over the whole record and then sliced.
pub fn build_windows(
    airflow: &TimeSeries,
    stages: &[SleepStage],
    cfg: &FeatureConfig,
) -> Result<Vec<EpochWindow>> {
    let rate = airflow.rate_hz();
    let per_epoch = (EPOCH_S * rate).round() as usize;
    let n_epochs = airflow.len() / per_epoch;
    if n_epochs < WINDOW_EPOCHS {
        return Err(Error::invalid(format!(
            "record of {:.1} s is shorter than {WINDOW_EPOCHS} epochs",
            airflow.duration_s()
        )));
    }
    if stages.len() != n_epochs {
        return Err(Error::SchemaMismatch(format!(
            "{} stage labels for {n_epochs} epochs",
            stages.len()
        )));
    }
    let irr = detect_breath_cycles(airflow, &cfg.breath)
        .and_then(|c| build_irr(&c, airflow.duration_s()))
        .ok();
    let irr_per_epoch = (EPOCH_S * IRR_RATE_HZ).round() as usize;
    (WINDOW_EPOCHS..=n_epochs)
        .map(|i| {
            let first = i - WINDOW_EPOCHS;
            let air = airflow.slice(first * per_epoch, WINDOW_EPOCHS * per_epoch)?;
            let irr_w = match &irr {
                Some(r) => Some(r.slice(first * irr_per_epoch, WINDOW_EPOCHS * irr_per_epoch)?),
                None => None,
            };
            Ok(EpochWindow {
                epoch_index: i,
                sqi: sqi(&air)?,
                airflow: air,
                irr: irr_w,
                stage: stages[i - 1].class(),
            })
        })
        .collect()
}

fn block_names(prefix: &str, names: &[&str]) -> Vec<String> {
    names.iter().map(|n| format!("{prefix}_{n}")).collect()
}

fn hepc_names(prefix: &str) -> Vec<String> {
    (0..HEPC_LEN).map(|n| format!("{prefix}_hepc_{n:02}")).collect()
}

pub fn tda_names(cfg: &FeatureConfig) -> Vec<String> {
    let h1 = match cfg.rips_h1_source {
        RipsH1Source::Irr => "rips1_irr",
        RipsH1Source::Airflow => "rips1_air",
    };
    let mut names = block_names("sub_irr_ps", &PS_NAMES);
    names.extend(hepc_names("sub_irr"));
    names.extend(hepc_names("rips0_air"));
    names.extend(block_names(&format!("{h1}_ps"), &PS_NAMES));
    names.extend(block_names("sub_air_ps", &PS_NAMES));
    names.extend(hepc_names("sub_air"));
    names
}

pub fn classic_names() -> Vec<String> {
    CLASSIC_NAMES.iter().map(|s| s.to_string()).collect()
}

/// Column names for a feature set; `all` is `cla` followed by `tda`.
pub fn feature_names(set: FeatureSet, cfg: &FeatureConfig) -> Vec<String> {
    match set {
        FeatureSet::Tda => tda_names(cfg),
        FeatureSet::Cla => classic_names(),
        FeatureSet::All => {
            let mut n = classic_names();
            n.extend(tda_names(cfg));
            n
        }
    }
}

/// Window pieces shared by both feature blocks.
struct Prepared<'a> {
    irr: &'a TimeSeries,
    band: TimeSeries,
    intervals: Vec<f64>,
}

fn prepare<'a>(w: &'a EpochWindow, cfg: &FeatureConfig) -> Result<Prepared<'a>> {
    let cycles = detect_breath_cycles(&w.airflow, &cfg.breath)?;
    let irr = w.irr.as_ref().ok_or(Error::InsufficientBreaths {
        found: 0,
        needed: cfg.breath.min_onsets,
    })?;
    let band = butter_bandpass(&w.airflow, RESP_BAND_HZ.0, RESP_BAND_HZ.1, SQI_BANDPASS_ORDER)?;
    Ok(Prepared {
        irr,
        band,
        intervals: cycles.intervals_s(),
    })
}

fn delay_samples(cfg: &FeatureConfig, rate_hz: f64) -> usize {
    ((cfg.delay_s * rate_hz).round() as usize).max(1)
}

/// Finitized sublevel diagram, capped at the signal maximum.
fn sublevel_diagram(x: &TimeSeries) -> Result<PersistenceDiagram> {
    finitize(&sublevel_pd0(x)?, x.max())
}

/// Finitized Rips diagrams of the maxmin-subsampled delay embedding, capped
/// at the subsample's largest pairwise distance.
fn rips_diagrams(x: &TimeSeries, max_dim: usize, cfg: &FeatureConfig) -> Result<Vec<PersistenceDiagram>> {
    let cloud = takens_embed(x.samples(), cfg.embed_dim, delay_samples(cfg, x.rate_hz()))?;
    let landmarks = maxmin_subsample(&cloud, cfg.n_perm, 0)?;
    let cap = diameter(&landmarks);
    rips_pd_with_cap(&landmarks, max_dim, cfg.rips_cap)?
        .iter()
        .map(|d| finitize(d, cap))
        .collect()
}

fn tda_block(p: &Prepared, cfg: &FeatureConfig) -> Result<Vec<f64>> {
    let vc = &cfg.vectorize;
    let sub_r = sublevel_diagram(p.irr)?;
    let sub_f = sublevel_diagram(&p.band)?;
    let (rips0_f, rips1) = match cfg.rips_h1_source {
        RipsH1Source::Irr => {
            let f = rips_diagrams(&p.band, 0, cfg)?;
            let r = rips_diagrams(p.irr, 1, cfg)?;
            (f[0].clone(), r[1].clone())
        }
        RipsH1Source::Airflow => {
            let f = rips_diagrams(&p.band, 1, cfg)?;
            (f[0].clone(), f[1].clone())
        }
    };
    let mut out = Vec::with_capacity(TDA_LEN);
    out.extend(persistence_stats(&sub_r, vc)?.values);
    out.extend(hepc(&sub_r)?.values);
    out.extend(hepc(&rips0_f)?.values);
    out.extend(persistence_stats(&rips1, vc)?.values);
    out.extend(persistence_stats(&sub_f, vc)?.values);
    out.extend(hepc(&sub_f)?.values);
    Ok(out)
}

fn classic_block(p: &Prepared, w: &EpochWindow) -> Result<Vec<f64>> {
    let bi = Moments::of(&p.intervals);
    let r = p.irr.samples();
    let (irr_mean, irr_std) = mean_std(r);
    let (irr_min, irr_max) = (p.irr.min(), p.irr.max());

    let spec = power_spectrum(&p.band)?;
    let bins = spec.bins_in(RESP_BAND_HZ.0, RESP_BAND_HZ.1);
    let mut peak = *bins.start();
    let mut parts = [0.0f64; 3];
    for l in bins {
        let pw = spec.power[l];
        if pw > spec.power[peak] {
            peak = l;
        }
        let f = spec.frequency(l);
        let slot = if f < 0.2 {
            0
        } else if f < 0.4 {
            1
        } else {
            2
        };
        parts[slot] += pw;
    }
    let total: f64 = parts.iter().sum();
    let (peak_frac, ratios) = if total > 0.0 {
        (spec.power[peak] / total, parts.map(|v| v / total))
    } else {
        (0.0, [0.0; 3])
    };

    Ok(vec![
        bi.mean,
        bi.std,
        bi.skew,
        bi.kurt,
        irr_mean,
        irr_std,
        irr_min,
        irr_max,
        irr_max - irr_min,
        spec.frequency(peak),
        peak_frac,
        ratios[0],
        ratios[1],
        ratios[2],
        sample_entropy(r, 2, 0.2 * irr_std),
        w.sqi,
    ])
}

/// Topological block: 78 values. Windows without enough breaths are
/// rejected with `InsufficientBreaths`.
pub fn tda_features(w: &EpochWindow, cfg: &FeatureConfig) -> Result<Vec<f64>> {
    tda_block(&prepare(w, cfg)?, cfg)
}

/// Classical block: breath-interval moments, IRR summaries, spectral shape,
/// IRR sample entropy and the window SQI.
pub fn classic_features(w: &EpochWindow, cfg: &FeatureConfig) -> Result<Vec<f64>> {
    classic_block(&prepare(w, cfg)?, w)
}

pub fn window_features(w: &EpochWindow, set: FeatureSet, cfg: &FeatureConfig) -> Result<Vec<f64>> {
    let p = prepare(w, cfg)?;
    match set {
        FeatureSet::Tda => tda_block(&p, cfg),
        FeatureSet::Cla => classic_block(&p, w),
        FeatureSet::All => {
            let mut v = classic_block(&p, w)?;
            v.extend(tda_block(&p, cfg)?);
            Ok(v)
        }
    }
}

/// Diagram families exposed for inspection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PdKind {
    SubAir,
    SubIrr,
    RipsAir,
    RipsIrr,
}

impl FromStr for PdKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sub-air" => Ok(PdKind::SubAir),
            "sub-irr" => Ok(PdKind::SubIrr),
            "rips-air" => Ok(PdKind::RipsAir),
            "rips-irr" => Ok(PdKind::RipsIrr),
            other => Err(Error::invalid(format!("unknown diagram kind `{other}`"))),
        }
    }
}

/// Raw (unfinitized) diagrams of one window, as fed to the TDA block. Rips
/// kinds return dimensions 0 and 1.
pub fn window_diagrams(w: &EpochWindow, kind: PdKind, cfg: &FeatureConfig) -> Result<Vec<PersistenceDiagram>> {
    let p = prepare(w, cfg)?;
    let rips = |x: &TimeSeries| -> Result<Vec<PersistenceDiagram>> {
        let cloud = takens_embed(x.samples(), cfg.embed_dim, delay_samples(cfg, x.rate_hz()))?;
        rips_pd_with_cap(&maxmin_subsample(&cloud, cfg.n_perm, 0)?, 1, cfg.rips_cap)
    };
    match kind {
        PdKind::SubAir => Ok(vec![sublevel_pd0(&p.band)?]),
        PdKind::SubIrr => Ok(vec![sublevel_pd0(p.irr)?]),
        PdKind::RipsAir => rips(&p.band),
        PdKind::RipsIrr => rips(p.irr),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub subject_id: String,
    pub epoch_index: usize,
    pub stage: Stage,
    pub sqi: f64,
    pub values: Vec<f64>,
}

/// Feature rows sharing one column schema.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub names: Vec<String>,
    pub rows: Vec<FeatureRow>,
    /// Windows dropped as invalid: `(subject_id, epoch_index, reason)`.
    pub excluded: Vec<(String, usize, String)>,
}

pub const FEATURE_META_COLUMNS: [&str; 4] = ["subject_id", "epoch_index", "stage", "sqi"];

impl FeatureMatrix {
    pub fn new(names: Vec<String>) -> Self {
        Self {
            names,
            rows: Vec::new(),
            excluded: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Appends the rows of `other`, which must share the schema.
    pub fn append(&mut self, other: FeatureMatrix) -> Result<()> {
        if other.names != self.names {
            return Err(Error::SchemaMismatch("feature matrices have different columns".into()));
        }
        self.rows.extend(other.rows);
        self.excluded.extend(other.excluded);
        Ok(())
    }

    /// Keeps the named columns, in the given order.
    pub fn select(&self, names: &[String]) -> Result<FeatureMatrix> {
        let idx = names
            .iter()
            .map(|n| {
                self.names
                    .iter()
                    .position(|m| m == n)
                    .ok_or_else(|| Error::SchemaMismatch(format!("missing feature column `{n}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FeatureMatrix {
            names: names.to_vec(),
            rows: self
                .rows
                .iter()
                .map(|r| FeatureRow {
                    values: idx.iter().map(|&i| r.values[i]).collect(),
                    ..r.clone()
                })
                .collect(),
            excluded: self.excluded.clone(),
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = FEATURE_META_COLUMNS.join(",");
        for n in &self.names {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for r in &self.rows {
            let _ = write!(out, "{},{},{},{:.16e}", r.subject_id, r.epoch_index, r.stage, r.sqi);
            for v in &r.values {
                let _ = write!(out, ",{v:.16e}");
            }
            out.push('\n');
        }
        out
    }

    /// Parses the CSV export. Malformed input is rejected with the line number.
    pub fn from_csv(text: &str, source: &str) -> Result<Self> {
        let err = |line: usize, msg: String| Error::Parse {
            path: source.to_string(),
            line,
            msg,
        };
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| err(1, "missing header".into()))?;
        let cols: Vec<&str> = header.split(',').collect();
        if cols.len() < FEATURE_META_COLUMNS.len() || cols[..4] != FEATURE_META_COLUMNS {
            return Err(err(1, format!("header must start with `{}`", FEATURE_META_COLUMNS.join(","))));
        }
        let names: Vec<String> = cols[4..].iter().map(|s| s.to_string()).collect();
        let mut seen = std::collections::HashSet::new();
        if let Some(d) = names.iter().find(|n| n.is_empty() || !seen.insert(n.as_str())) {
            return Err(err(1, format!("empty or duplicate column `{d}`")));
        }
        let mut m = FeatureMatrix::new(names);
        for (i, line) in lines.enumerate() {
            let ln = i + 2;
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != cols.len() {
                return Err(err(ln, format!("expected {} fields, found {}", cols.len(), f.len())));
            }
            if f[0].is_empty() {
                return Err(err(ln, "empty subject id".into()));
            }
            let epoch_index = f[1]
                .parse::<usize>()
                .map_err(|e| err(ln, format!("bad epoch index `{}`: {e}", f[1])))?;
            let stage = f[2].parse::<Stage>().map_err(|e| err(ln, e.to_string()))?;
            let num = |s: &str| {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| err(ln, format!("bad number `{s}`")))
            };
            let sqi = num(f[3])?;
            let values = f[4..].iter().map(|s| num(s)).collect::<Result<Vec<_>>>()?;
            m.rows.push(FeatureRow {
                subject_id: f[0].to_string(),
                epoch_index,
                stage,
                sqi,
                values,
            });
        }
        Ok(m)
    }
}

/// Features for every window of a record. Invalid windows are listed in
/// `excluded` and produce no row. Windows run in parallel; row order follows
/// the epoch index.
pub fn featurize_record(
    record: &SubjectRecord,
    set: FeatureSet,
    cfg: &FeatureConfig,
) -> Result<FeatureMatrix> {
    let windows = build_windows(&record.airflow, &record.stages, cfg)?;
    let results: Vec<(usize, Stage, f64, Result<Vec<f64>>)> = windows
        .par_iter()
        .map(|w| (w.epoch_index, w.stage, w.sqi, window_features(w, set, cfg)))
        .collect();
    let mut m = FeatureMatrix::new(feature_names(set, cfg));
    for (epoch_index, stage, sqi, res) in results {
        match res {
            Ok(values) => m.rows.push(FeatureRow {
                subject_id: record.subject_id.clone(),
                epoch_index,
                stage,
                sqi,
                values,
            }),
            Err(e @ Error::InsufficientBreaths { .. }) => {
                m.excluded.push((record.subject_id.clone(), epoch_index, e.to_string()))
            }
            Err(e) => return Err(e),
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sine(freq: f64, amp: f64, rate: f64, secs: f64) -> TimeSeries {
        let n = (rate * secs).round() as usize;
        TimeSeries::new(
            (0..n).map(|i| amp * (2.0 * PI * freq * i as f64 / rate).sin()).collect(),
            rate,
        )
        .unwrap()
    }

    fn stages(n: usize) -> Vec<SleepStage> {
        vec![SleepStage::N2; n]
    }

    #[test]
    fn names_are_unique_and_sized() {
        let cfg = FeatureConfig::default();
        let all = feature_names(FeatureSet::All, &cfg);
        assert_eq!(feature_names(FeatureSet::Tda, &cfg).len(), 78);
        assert_eq!(all.len(), 78 + CLASSIC_LEN);
        let uniq: std::collections::HashSet<_> = all.iter().collect();
        assert_eq!(uniq.len(), all.len());
        assert_eq!(all[..CLASSIC_LEN], classic_names()[..]);
    }

    #[test]
    fn window_count_and_indexing() {
        let x = sine(0.25, 1.0, 10.0, 300.0);
        let mut st = stages(10);
        st[..5].fill(SleepStage::W);
        st[5] = SleepStage::N1;
        let w = build_windows(&x, &st, &FeatureConfig::default()).unwrap();
        assert_eq!(w.len(), 5);
        assert_eq!(w[0].epoch_index, 6);
        assert_eq!(w[0].stage, Stage::Nrem);
        for win in &w {
            assert_eq!(win.airflow.start_time_s(), 30.0 * (win.epoch_index - 6) as f64);
            assert_eq!(win.airflow.len(), 1800);
            assert_eq!(win.irr.as_ref().unwrap().len(), 720);
        }
    }

    #[test]
    fn short_record_and_label_mismatch() {
        let x = sine(0.25, 1.0, 10.0, 150.0);
        assert!(build_windows(&x, &stages(5), &FeatureConfig::default()).is_err());
        let y = sine(0.25, 1.0, 10.0, 300.0);
        assert!(build_windows(&y, &stages(9), &FeatureConfig::default()).is_err());
    }

    #[test]
    fn constant_window_is_invalid() {
        let x = TimeSeries::new(vec![0.5; 1800], 10.0).unwrap();
        let w = build_windows(&x, &stages(6), &FeatureConfig::default()).unwrap();
        assert!(matches!(
            tda_features(&w[0], &FeatureConfig::default()),
            Err(Error::InsufficientBreaths { .. })
        ));
        assert!(classic_features(&w[0], &FeatureConfig::default()).is_err());
    }

    #[test]
    fn classic_on_regular_breathing() {
        let x = sine(0.25, 1.0, 20.0, 180.0);
        let cfg = FeatureConfig::default();
        let w = build_windows(&x, &stages(6), &cfg).unwrap();
        let v = classic_features(&w[0], &cfg).unwrap();
        assert_eq!(v.len(), CLASSIC_LEN);
        // Filter transients at the record ends move crossings by microseconds.
        assert!(v[1] < 1e-6, "interval std {}", v[1]);
        assert!(v[8] < 1e-4, "irr range {}", v[8]);
        let ratios = v[11] + v[12] + v[13];
        assert!((ratios - 1.0).abs() < 1e-9);
    }

    #[test]
    fn spectral_peak_within_one_bin() {
        let x = sine(0.3, 1.0, 20.0, 180.0);
        let cfg = FeatureConfig::default();
        let w = build_windows(&x, &stages(6), &cfg).unwrap();
        let v = classic_features(&w[0], &cfg).unwrap();
        assert!((v[9] - 0.3).abs() <= 1.0 / 180.0, "peak {}", v[9]);
    }

    #[test]
    fn feature_csv_round_trip() {
        let mut m = FeatureMatrix::new(vec!["a".into(), "b".into()]);
        m.rows.push(FeatureRow {
            subject_id: "s1".into(),
            epoch_index: 6,
            stage: Stage::Rem,
            sqi: 0.1 + 0.2,
            values: vec![1.0 / 3.0, -2.5e-300],
        });
        let back = FeatureMatrix::from_csv(&m.to_csv(), "mem").unwrap();
        assert_eq!(back, m);
        let bad = "subject_id,epoch_index,stage,sqi,a\ns1,6,REM,0.5\n";
        assert!(matches!(FeatureMatrix::from_csv(bad, "x"), Err(Error::Parse { line: 2, .. })));
    }
}
