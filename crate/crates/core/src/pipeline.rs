//! End-to-end runs: load records, featurize (with a content-addressed
//! cache), cross-validate each feature set, compare sets and write reports
//! with a manifest.

use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::dataio::{
    airflow_text, list_records, load_record_dir, stages_text, write_text, RunConfig, SubjectRecord,
    AIRFLOW_FILE, STAGES_FILE,
};
use crate::error::{Error, Result};
use crate::eval::{
    aggregate_importance, confusion_report_csv, importance_csv, losocv, metrics_report_csv,
    summarize, summary_text, wilcoxon_signed_rank, LosocvOutcome, Summary, WilcoxonResult,
};
use crate::features::{feature_names, featurize_record, FeatureConfig, FeatureMatrix, FeatureSet};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Digest of a record's canonical text form.
pub fn record_digest(rec: &SubjectRecord) -> String {
    let mut h = Sha256::new();
    h.update(rec.subject_id.as_bytes());
    h.update(b"\n");
    h.update(airflow_text(&rec.airflow).as_bytes());
    h.update(stages_text(&rec.stages).as_bytes());
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheStatus {
    Hit,
    Miss,
    /// An entry existed but could not be used.
    Corrupt,
    Disabled,
}

pub fn cache_key(rec_digest: &str, set: FeatureSet, cfg: &FeatureConfig) -> String {
    sha256_hex(format!("{rec_digest}\n{set}\n{}", cfg.canonical()).as_bytes())
}

fn excluded_text(m: &FeatureMatrix) -> String {
    m.excluded.iter().map(|(_, e, why)| format!("{e},{why}\n")).collect()
}

fn read_cached(csv: &Path, side: &Path, rec: &SubjectRecord, expected: &[String]) -> Result<FeatureMatrix> {
    let text = std::fs::read_to_string(csv).map_err(|e| Error::io(csv, e))?;
    let mut m = FeatureMatrix::from_csv(&text, &csv.display().to_string())?;
    if m.names != expected {
        return Err(Error::SchemaMismatch("cached columns differ".into()));
    }
    if m.rows.iter().any(|r| r.subject_id != rec.subject_id) {
        return Err(Error::SchemaMismatch("cached rows belong to another subject".into()));
    }
    let side_text = std::fs::read_to_string(side).map_err(|e| Error::io(side, e))?;
    for (i, l) in side_text.lines().enumerate() {
        let (e, why) = l.split_once(',').ok_or_else(|| Error::Parse {
            path: side.display().to_string(),
            line: i + 1,
            msg: "expected `epoch,reason`".into(),
        })?;
        let epoch = e.parse().map_err(|_| Error::Parse {
            path: side.display().to_string(),
            line: i + 1,
            msg: format!("bad epoch `{e}`"),
        })?;
        m.excluded.push((rec.subject_id.clone(), epoch, why.to_string()));
    }
    Ok(m)
}

fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    write_text(&tmp, text)?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Features of one record, read from or stored in `cache_dir` when given.
/// Entries are keyed by record digest, feature set and feature config.
pub fn cache_features(
    rec: &SubjectRecord,
    set: FeatureSet,
    cfg: &FeatureConfig,
    cache_dir: Option<&Path>,
) -> Result<(FeatureMatrix, CacheStatus)> {
    let Some(dir) = cache_dir else {
        return Ok((featurize_record(rec, set, cfg)?, CacheStatus::Disabled));
    };
    let key = cache_key(&record_digest(rec), set, cfg);
    let csv = dir.join(format!("{key}.csv"));
    let side = dir.join(format!("{key}.excluded"));
    let mut status = CacheStatus::Miss;
    if csv.exists() {
        match read_cached(&csv, &side, rec, &feature_names(set, cfg)) {
            Ok(m) => return Ok((m, CacheStatus::Hit)),
            Err(e) => {
                warn!("cache entry {} unusable ({e}); recomputing", csv.display());
                status = CacheStatus::Corrupt;
            }
        }
    }
    let m = featurize_record(rec, set, cfg)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_atomic(&side, &excluded_text(&m))?;
    write_atomic(&csv, &m.to_csv())?;
    Ok((m, status))
}

/// Ordered `key=value` lines written next to every report.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunManifest {
    pub entries: Vec<(String, String)>,
}

impl RunManifest {
    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) {
        self.entries.push((key.into(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn to_text(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }
}

pub const MODULES: [&str; 9] = [
    "signal",
    "respiration",
    "persistence",
    "vectorize",
    "features",
    "learner",
    "eval",
    "dataio",
    "pipeline",
];

#[derive(Debug, Clone)]
pub struct SetResult {
    pub set: FeatureSet,
    pub outcome: LosocvOutcome,
    pub summary: Summary,
    pub importance: Vec<(String, f64)>,
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub better: FeatureSet,
    pub worse: FeatureSet,
    /// `None` when fewer than five paired folds exist.
    pub kappa_test: Option<WilcoxonResult>,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub sets: Vec<SetResult>,
    pub comparisons: Vec<Comparison>,
    /// Subjects dropped before cross-validation: `(subject_id, reason)`.
    pub excluded_subjects: Vec<(String, String)>,
    pub excluded_windows: usize,
    pub manifest: RunManifest,
}

impl ExperimentReport {
    pub fn set(&self, set: FeatureSet) -> Option<&SetResult> {
        self.sets.iter().find(|s| s.set == set)
    }
}

/// Inputs for an experiment: records plus optional digests of their source
/// files for the manifest.
pub struct Cohort {
    pub records: Vec<SubjectRecord>,
    pub input_digests: Vec<(String, String)>,
}

pub fn load_cohort(data_dir: &Path) -> Result<Cohort> {
    let dirs = list_records(data_dir)?;
    if dirs.is_empty() {
        return Err(Error::invalid(format!("no records under {}", data_dir.display())));
    }
    let loaded: Vec<Result<(SubjectRecord, Vec<(String, String)>)>> = dirs
        .par_iter()
        .map(|d| {
            let rec = load_record_dir(d)?;
            let mut digests = Vec::new();
            for f in [AIRFLOW_FILE, STAGES_FILE] {
                let p = d.join(f);
                let bytes = std::fs::read(&p).map_err(|e| Error::io(&p, e))?;
                digests.push((format!("input.{}.{f}", rec.subject_id), sha256_hex(&bytes)));
            }
            Ok((rec, digests))
        })
        .collect();
    let mut cohort = Cohort {
        records: Vec::new(),
        input_digests: Vec::new(),
    };
    for r in loaded {
        let (rec, d) = r.map_err(|e| e.in_stage("ingest"))?;
        cohort.records.push(rec);
        cohort.input_digests.extend(d);
    }
    Ok(cohort)
}

fn featurization_set(sets: &[FeatureSet]) -> FeatureSet {
    match sets {
        [only] => *only,
        _ => FeatureSet::All,
    }
}

/// Cross-validates every requested set on one shared featurization and runs
/// one-sided signed-rank tests of kappa for `all` against `cla` and `tda`.
pub fn run_experiment(
    cohort: &Cohort,
    sets: &[FeatureSet],
    cfg: &RunConfig,
    cache_dir: Option<&Path>,
) -> Result<ExperimentReport> {
    if sets.is_empty() {
        return Err(Error::invalid("no feature set requested"));
    }
    let mut manifest = RunManifest::default();
    manifest.push("tool", format!("breathtopo {}", env!("CARGO_PKG_VERSION")));
    for m in MODULES {
        manifest.push(format!("module.{m}"), env!("CARGO_PKG_VERSION"));
    }
    manifest.push("config_sha256", sha256_hex(cfg.to_kv().as_bytes()));
    manifest.push("feature_sets", sets.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(","));
    for (k, v) in &cohort.input_digests {
        manifest.push(k.clone(), v);
    }

    let base = featurization_set(sets);
    let started = Instant::now();
    let featurized: Vec<Result<(FeatureMatrix, CacheStatus)>> = cohort
        .records
        .par_iter()
        .map(|r| cache_features(r, base, &cfg.features, cache_dir))
        .collect();
    let mut matrices = Vec::new();
    let mut excluded_subjects = Vec::new();
    let (mut hits, mut misses) = (0, 0);
    for (rec, res) in cohort.records.iter().zip(featurized) {
        match res {
            Ok((m, status)) => {
                match status {
                    CacheStatus::Hit => hits += 1,
                    CacheStatus::Miss | CacheStatus::Corrupt => misses += 1,
                    CacheStatus::Disabled => {}
                }
                matrices.push(m);
            }
            Err(e) => {
                warn!("subject {} excluded: {e}", rec.subject_id);
                excluded_subjects.push((rec.subject_id.clone(), e.to_string()));
            }
        }
    }
    manifest.push("stage.featurize.seconds", format!("{:.3}", started.elapsed().as_secs_f64()));
    manifest.push("cache.hits", hits);
    manifest.push("cache.misses", misses);
    let excluded_windows = matrices.iter().map(|m| m.excluded.len()).sum();
    info!("featurized {} subjects", matrices.len());
    if matrices.len() < 2 {
        return Err(Error::invalid("fewer than two subjects left after featurization").in_stage("featurize"));
    }

    let mut results = Vec::new();
    for &set in sets {
        let started = Instant::now();
        let names = feature_names(set, &cfg.features);
        let subset = matrices
            .iter()
            .map(|m| if set == base { Ok(m.clone()) } else { m.select(&names) })
            .collect::<Result<Vec<_>>>()?;
        let outcome = losocv(&subset, &cfg.boost, cfg.sqi_threshold())
            .map_err(|e| e.in_stage(format!("losocv[{set}]")))?;
        manifest.push(format!("stage.losocv.{set}.seconds"), format!("{:.3}", started.elapsed().as_secs_f64()));
        results.push(SetResult {
            set,
            summary: summarize(&outcome.folds),
            importance: aggregate_importance(&outcome.models),
            outcome,
        });
    }

    let mut comparisons = Vec::new();
    let all = results.iter().find(|r| r.set == FeatureSet::All);
    for other in [FeatureSet::Cla, FeatureSet::Tda] {
        let (Some(a), Some(b)) = (all, results.iter().find(|r| r.set == other)) else {
            continue;
        };
        let mut ka = Vec::new();
        let mut kb = Vec::new();
        for fa in &a.outcome.folds {
            if let Some(fb) = b.outcome.folds.iter().find(|f| f.subject_id == fa.subject_id) {
                ka.push(fa.metrics.kappa);
                kb.push(fb.metrics.kappa);
            }
        }
        let kappa_test = if ka.len() >= 5 { Some(wilcoxon_signed_rank(&ka, &kb)?) } else { None };
        comparisons.push(Comparison {
            better: FeatureSet::All,
            worse: other,
            kappa_test,
        });
    }

    Ok(ExperimentReport {
        sets: results,
        comparisons,
        excluded_subjects,
        excluded_windows,
        manifest,
    })
}

/// Loads `data_dir` and runs [`run_experiment`].
pub fn run_losocv_experiment(
    data_dir: &Path,
    sets: &[FeatureSet],
    cfg: &RunConfig,
    cache_dir: Option<&Path>,
) -> Result<ExperimentReport> {
    let cohort = load_cohort(data_dir)?;
    run_experiment(&cohort, sets, cfg, cache_dir)
}

fn sibling(report: &Path, suffix: &str) -> PathBuf {
    let mut s = report.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn comparisons_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("alternative,metric,n_pairs,w_plus,p_value,exact,degenerate\n");
    for c in &report.comparisons {
        match &c.kappa_test {
            Some(t) => out.push_str(&format!(
                "{}>{},kappa,{},{},{:.16e},{},{}\n",
                c.better, c.worse, t.n_used, t.w_plus, t.p_value, t.exact, t.degenerate
            )),
            None => out.push_str(&format!("{}>{},kappa,,,,,\n", c.better, c.worse)),
        }
    }
    out
}

/// Writes the first set's metrics to `report`, with sibling files for the
/// confusion matrices, importance, summary and manifest. Further sets go to
/// `<report>.<set>.csv` (and their own siblings); set comparisons to
/// `<report>.wilcoxon.csv`. Returns the written paths.
pub fn write_report(report: &mut ExperimentReport, path: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<(PathBuf, String)> = Vec::new();
    for (i, r) in report.sets.iter().enumerate() {
        let base = if i == 0 { path.to_path_buf() } else { sibling(path, &format!(".{}.csv", r.set)) };
        let mut summary = format!("feature_set: {}\n", r.set);
        summary += &summary_text(&r.outcome.folds);
        for (id, why) in report.excluded_subjects.iter().chain(&r.outcome.skipped) {
            summary += &format!("excluded {id}: {why}\n");
        }
        summary += &format!("excluded_windows: {}\n", report.excluded_windows);
        files.push((base.clone(), metrics_report_csv(&r.outcome.folds)));
        files.push((sibling(&base, ".confusion.csv"), confusion_report_csv(&r.outcome.folds)));
        files.push((sibling(&base, ".importance.csv"), importance_csv(&r.importance)));
        files.push((sibling(&base, ".summary.txt"), summary));
    }
    if !report.comparisons.is_empty() {
        files.push((sibling(path, ".wilcoxon.csv"), comparisons_csv(report)));
    }
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut written = Vec::new();
    for (p, text) in files {
        write_text(&p, &text)?;
        let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        report.manifest.push(format!("output.{name}"), sha256_hex(text.as_bytes()));
        written.push(p);
    }
    let manifest_path = sibling(path, ".manifest");
    write_text(&manifest_path, &report.manifest.to_text())?;
    written.push(manifest_path);
    Ok(written)
}
