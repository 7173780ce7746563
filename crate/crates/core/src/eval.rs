//! Leave-one-subject-out evaluation, confusion-matrix metrics and the
//! Wilcoxon signed-rank test.

use std::collections::HashMap;
use std::fmt::Write as _;

use log::warn;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::learner::{filter_low_quality, fit_matrix, BoostConfig, BoostedModel};
use crate::stage::Stage;
use crate::stats::{mean_std, sample_std};
use crate::vectorize::normal_cdf;

const K: usize = Stage::COUNT;

/// Rows are true classes, columns predicted, in `Stage` order.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ConfusionMatrix {
    pub counts: [[f64; K]; K],
}

impl ConfusionMatrix {
    pub fn new(counts: [[f64; K]; K]) -> Result<Self> {
        if counts.iter().flatten().any(|c| !(*c >= 0.0) || !c.is_finite()) {
            return Err(Error::invalid("confusion counts must be finite and non-negative"));
        }
        Ok(Self { counts })
    }

    pub fn from_labels(truth: &[Stage], predicted: &[Stage]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::invalid("label sequences differ in length"));
        }
        let mut cm = Self::default();
        for (t, p) in truth.iter().zip(predicted) {
            cm.counts[t.index()][p.index()] += 1.0;
        }
        Ok(cm)
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sum(&self, c: usize) -> f64 {
        self.counts[c].iter().sum()
    }

    pub fn col_sum(&self, c: usize) -> f64 {
        self.counts.iter().map(|r| r[c]).sum()
    }

    /// Element-wise mean of several matrices.
    pub fn mean(ms: &[ConfusionMatrix]) -> Self {
        let mut out = Self::default();
        if ms.is_empty() {
            return out;
        }
        for m in ms {
            for i in 0..K {
                for j in 0..K {
                    out.counts[i][j] += m.counts[i][j];
                }
            }
        }
        for v in out.counts.iter_mut().flatten() {
            *v /= ms.len() as f64;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    /// `None` for classes absent from the true labels.
    pub sensitivity: [Option<f64>; K],
    pub accuracy: f64,
    pub balanced_accuracy: f64,
    pub kappa: f64,
}

pub fn metrics(cm: &ConfusionMatrix) -> Result<Metrics> {
    let total = cm.total();
    if !(total > 0.0) {
        return Err(Error::invalid("metrics of an empty confusion matrix"));
    }
    let mut sensitivity = [None; K];
    for (c, s) in sensitivity.iter_mut().enumerate() {
        let rs = cm.row_sum(c);
        if rs > 0.0 {
            *s = Some(cm.counts[c][c] / rs);
        }
    }
    let present: Vec<f64> = sensitivity.iter().flatten().copied().collect();
    let balanced_accuracy = present.iter().sum::<f64>() / present.len() as f64;
    let trace: f64 = (0..K).map(|c| cm.counts[c][c]).sum();
    let p_o = trace / total;
    let p_e: f64 = (0..K).map(|c| cm.row_sum(c) * cm.col_sum(c)).sum::<f64>() / (total * total);
    let kappa = if 1.0 - p_e <= f64::EPSILON {
        0.0
    } else {
        (p_o - p_e) / (1.0 - p_e)
    };
    Ok(Metrics {
        sensitivity,
        accuracy: p_o,
        balanced_accuracy,
        kappa,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldResult {
    pub subject_id: String,
    pub n_train: usize,
    pub n_test: usize,
    pub metrics: Metrics,
    pub confusion: ConfusionMatrix,
}

#[derive(Debug, Clone)]
pub struct LosocvOutcome {
    pub folds: Vec<FoldResult>,
    pub models: Vec<BoostedModel>,
    /// Subjects without a fold: `(subject_id, reason)`.
    pub skipped: Vec<(String, String)>,
}

/// Holds out each subject in turn. `sqi_threshold` filters training rows
/// only; `None` trains on every row.
pub fn losocv(
    subjects: &[FeatureMatrix],
    cfg: &BoostConfig,
    sqi_threshold: Option<f64>,
) -> Result<LosocvOutcome> {
    if subjects.len() < 2 {
        return Err(Error::invalid("leave-one-subject-out needs at least two subjects"));
    }
    let names = &subjects[0].names;
    if subjects.iter().any(|s| &s.names != names) {
        return Err(Error::SchemaMismatch("subjects use different feature columns".into()));
    }
    let ids: Vec<String> = subjects
        .iter()
        .map(|s| s.rows.first().map(|r| r.subject_id.clone()).unwrap_or_default())
        .collect();

    let outcomes: Vec<Result<Option<(FoldResult, BoostedModel)>>> = (0..subjects.len())
        .into_par_iter()
        .map(|held| {
            let test = &subjects[held];
            if test.is_empty() {
                return Ok(None);
            }
            let mut train = FeatureMatrix::new(names.clone());
            for (i, s) in subjects.iter().enumerate() {
                if i != held {
                    train.rows.extend(s.rows.iter().cloned());
                }
            }
            debug_assert!(train.rows.iter().all(|r| r.subject_id != ids[held]));
            let train = match sqi_threshold {
                Some(t) => filter_low_quality(&train, t)?,
                None => train,
            };
            let model = fit_matrix(&train, cfg)?;
            let pred = model.predict_matrix(test)?;
            let truth: Vec<Stage> = test.rows.iter().map(|r| r.stage).collect();
            let confusion = ConfusionMatrix::from_labels(&truth, &pred.labels)?;
            Ok(Some((
                FoldResult {
                    subject_id: ids[held].clone(),
                    n_train: train.len(),
                    n_test: test.len(),
                    metrics: metrics(&confusion)?,
                    confusion,
                },
                model,
            )))
        })
        .collect();

    let mut out = LosocvOutcome {
        folds: Vec::new(),
        models: Vec::new(),
        skipped: Vec::new(),
    };
    for (i, o) in outcomes.into_iter().enumerate() {
        match o.map_err(|e| e.in_stage(format!("fold {}", i + 1)))? {
            Some((fold, model)) => {
                out.folds.push(fold);
                out.models.push(model);
            }
            None => {
                let id = if ids[i].is_empty() { format!("#{}", i + 1) } else { ids[i].clone() };
                warn!("subject {id} has no valid test rows; fold skipped");
                out.skipped.push((id, "no valid test rows".into()));
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spread {
    pub mean: f64,
    pub std_population: f64,
    pub std_sample: f64,
}

impl Spread {
    pub fn of(v: &[f64]) -> Self {
        let (mean, std_population) = mean_std(v);
        Self {
            mean,
            std_population,
            std_sample: sample_std(v),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub accuracy: Spread,
    pub balanced_accuracy: Spread,
    pub kappa: Spread,
}

pub fn summarize(folds: &[FoldResult]) -> Summary {
    let pick = |f: fn(&Metrics) -> f64| -> Vec<f64> { folds.iter().map(|r| f(&r.metrics)).collect() };
    Summary {
        accuracy: Spread::of(&pick(|m| m.accuracy)),
        balanced_accuracy: Spread::of(&pick(|m| m.balanced_accuracy)),
        kappa: Spread::of(&pick(|m| m.kappa)),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.16e}")).unwrap_or_default()
}

pub const METRICS_HEADER: &str =
    "subject_id,n_train,n_test,accuracy,balanced_accuracy,kappa,sens_wake,sens_rem,sens_nrem";

/// One row per fold, then a `mean` row averaging each column over the folds
/// where it is defined.
pub fn metrics_report_csv(folds: &[FoldResult]) -> String {
    let mut out = format!("{METRICS_HEADER}\n");
    for f in folds {
        let m = &f.metrics;
        let _ = writeln!(
            out,
            "{},{},{},{:.16e},{:.16e},{:.16e},{},{},{}",
            f.subject_id,
            f.n_train,
            f.n_test,
            m.accuracy,
            m.balanced_accuracy,
            m.kappa,
            opt(m.sensitivity[0]),
            opt(m.sensitivity[1]),
            opt(m.sensitivity[2]),
        );
    }
    let s = summarize(folds);
    let sens: Vec<Option<f64>> = (0..K)
        .map(|c| {
            let v: Vec<f64> = folds.iter().filter_map(|f| f.metrics.sensitivity[c]).collect();
            (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
        })
        .collect();
    let n_train: usize = folds.iter().map(|f| f.n_train).sum();
    let n_test: usize = folds.iter().map(|f| f.n_test).sum();
    let _ = writeln!(
        out,
        "mean,{n_train},{n_test},{:.16e},{:.16e},{:.16e},{},{},{}",
        s.accuracy.mean,
        s.balanced_accuracy.mean,
        s.kappa.mean,
        opt(sens[0]),
        opt(sens[1]),
        opt(sens[2]),
    );
    out
}

/// Per-fold confusion matrices followed by their element-wise mean.
pub fn confusion_report_csv(folds: &[FoldResult]) -> String {
    let mut out = String::from("subject_id,true_stage,pred_wake,pred_rem,pred_nrem\n");
    let mut write = |id: &str, cm: &ConfusionMatrix| {
        for s in Stage::ALL {
            let r = cm.counts[s.index()];
            let _ = writeln!(out, "{id},{s},{:.16e},{:.16e},{:.16e}", r[0], r[1], r[2]);
        }
    };
    for f in folds {
        write(&f.subject_id, &f.confusion);
    }
    let cms: Vec<ConfusionMatrix> = folds.iter().map(|f| f.confusion).collect();
    write("mean", &ConfusionMatrix::mean(&cms));
    out
}

pub fn summary_text(folds: &[FoldResult]) -> String {
    let s = summarize(folds);
    let line = |name: &str, sp: &Spread| {
        format!(
            "{name}: mean={:.6} std_population={:.6} std_sample={:.6}\n",
            sp.mean, sp.std_population, sp.std_sample
        )
    };
    let mut out = format!("folds: {}\n", folds.len());
    out += &line("accuracy", &s.accuracy);
    out += &line("balanced_accuracy", &s.balanced_accuracy);
    out += &line("kappa", &s.kappa);
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WilcoxonResult {
    /// One-sided p-value for the alternative "a > b".
    pub p_value: f64,
    /// Sum of ranks of positive differences.
    pub w_plus: f64,
    /// Pairs left after dropping zero differences.
    pub n_used: usize,
    pub exact: bool,
    /// All differences were zero.
    pub degenerate: bool,
}

pub const WILCOXON_EXACT_MAX_N: usize = 12;

/// Midranks (1-based) of `v`.
pub fn midranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// One-sided Wilcoxon signed-rank test of "a > b" on paired samples.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    if a.len() != b.len() {
        return Err(Error::invalid("paired samples differ in length"));
    }
    if a.len() < 5 {
        return Err(Error::invalid("signed-rank test needs at least 5 pairs"));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    let n = d.len();
    if n == 0 {
        return Ok(WilcoxonResult {
            p_value: 1.0,
            w_plus: 0.0,
            n_used: 0,
            exact: true,
            degenerate: true,
        });
    }
    let abs: Vec<f64> = d.iter().map(|x| x.abs()).collect();
    let ranks = midranks(&abs);
    let w_plus: f64 = d.iter().zip(&ranks).filter(|(x, _)| **x > 0.0).map(|(_, r)| r).sum();

    if n <= WILCOXON_EXACT_MAX_N {
        // Doubled midranks are integers, so the null distribution of 2W+ is a
        // subset-sum count over them.
        let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
        let max: usize = doubled.iter().sum();
        let mut ways = vec![0u64; max + 1];
        ways[0] = 1;
        for &r in &doubled {
            for s in (r..=max).rev() {
                ways[s] += ways[s - r];
            }
        }
        let observed = (2.0 * w_plus).round() as usize;
        let tail: u64 = ways[observed..].iter().sum();
        return Ok(WilcoxonResult {
            p_value: tail as f64 / (1u64 << n) as f64,
            w_plus,
            n_used: n,
            exact: true,
            degenerate: false,
        });
    }
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let mut ties: HashMap<u64, f64> = HashMap::new();
    for r in &ranks {
        *ties.entry(r.to_bits()).or_default() += 1.0;
    }
    let tie_term: f64 = ties.values().map(|t| t * t * t - t).sum::<f64>() / 48.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term;
    let z = (w_plus - mean) / var.sqrt();
    Ok(WilcoxonResult {
        p_value: normal_cdf(-z),
        w_plus,
        n_used: n,
        exact: false,
        degenerate: false,
    })
}

/// Mean of per-model normalized gains, renormalized and sorted descending.
/// Features are the union over models in first-seen order before sorting.
pub fn aggregate_importance(models: &[BoostedModel]) -> Vec<(String, f64)> {
    let mut names: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut acc: Vec<f64> = Vec::new();
    for m in models {
        for (name, g) in m.feature_importance() {
            let i = *index.entry(name.clone()).or_insert_with(|| {
                names.push(name);
                acc.push(0.0);
                acc.len() - 1
            });
            acc[i] += g;
        }
    }
    let total: f64 = acc.iter().sum();
    let mut out: Vec<(String, f64)> = names
        .into_iter()
        .zip(acc)
        .map(|(n, g)| (n, if total > 0.0 { g / total } else { 0.0 }))
        .collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1));
    out
}

pub fn importance_csv(importance: &[(String, f64)]) -> String {
    let mut out = String::from("feature,importance\n");
    for (n, g) in importance {
        let _ = writeln!(out, "{n},{g:.16e}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_diagonal() {
        let cm = ConfusionMatrix::new([[3.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 7.0]]).unwrap();
        let m = metrics(&cm).unwrap();
        assert_eq!((m.accuracy, m.kappa, m.balanced_accuracy), (1.0, 1.0, 1.0));
        assert!(m.sensitivity.iter().all(|s| *s == Some(1.0)));
    }

    #[test]
    fn independent_predictions_have_zero_kappa() {
        let r = [2.0, 3.0, 5.0];
        let c = [1.0, 4.0, 5.0];
        let mut counts = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                counts[i][j] = r[i] * c[j];
            }
        }
        let m = metrics(&ConfusionMatrix::new(counts).unwrap()).unwrap();
        assert!(m.kappa.abs() < 1e-9);
    }

    #[test]
    fn single_cell_kappa_is_zero() {
        let mut counts = [[0.0; 3]; 3];
        counts[2][2] = 5.0;
        let m = metrics(&ConfusionMatrix::new(counts).unwrap()).unwrap();
        assert_eq!(m.kappa, 0.0);
        assert_eq!(m.sensitivity[0], None);
        assert_eq!(m.balanced_accuracy, 1.0);
    }

    #[test]
    fn midranks_with_ties() {
        assert_eq!(midranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn wilcoxon_all_positive_five() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b = [0.0; 5];
        let r = wilcoxon_signed_rank(&a, &b).unwrap();
        assert_eq!(r.p_value, 0.03125);
        assert!(r.exact);
        let same = wilcoxon_signed_rank(&a, &a).unwrap();
        assert!(same.degenerate);
        assert_eq!(same.p_value, 1.0);
        assert!(wilcoxon_signed_rank(&a[..4], &b[..4]).is_err());
    }

    #[test]
    fn spread_both_ways() {
        let s = Spread::of(&[1.0, 3.0]);
        assert_eq!((s.mean, s.std_population), (2.0, 1.0));
        assert!((s.std_sample - 2f64.sqrt()).abs() < 1e-15);
    }
}
