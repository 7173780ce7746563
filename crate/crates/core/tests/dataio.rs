use std::fs;
use std::path::Path;

use breathtopo::dataio::{
    classes, export_features, export_metrics, export_pd, generate_synthetic, load_features, load_record,
    load_record_dir, write_record, SynthConfig,
};
use breathtopo::eval::losocv;
use breathtopo::features::{featurize_record, EPOCH_S};
use breathtopo::respiration::{detect_breath_cycles, BreathConfig};
use breathtopo::stats::sample_std;
use breathtopo::{
    BoostConfig, Error, FeatureConfig, FeatureSet, FiltrationKind, PersistenceDiagram, Stage,
};

fn write_pair(dir: &Path, seconds: usize, labels: &[&str]) -> (std::path::PathBuf, std::path::PathBuf) {
    let sub = dir.join("p01");
    fs::create_dir_all(&sub).unwrap();
    let mut air = String::from("rate_hz=100\n");
    for i in 0..seconds * 100 {
        air.push_str(&format!("{}\n", (i as f64 * 0.0157).sin()));
    }
    let (a, s) = (sub.join("airflow.txt"), sub.join("stages.txt"));
    fs::write(&a, air).unwrap();
    fs::write(&s, labels.iter().map(|l| format!("{l}\n")).collect::<String>()).unwrap();
    (a, s)
}

#[test]
fn record_label_count_and_parsing() {
    let dir = tempfile::tempdir().unwrap();
    let labels = ["W", "W", "N1", "N2", "N2", "N3", "N3", "R", "R", "N2"];
    let (a, s) = write_pair(dir.path(), 300, &labels);
    let rec = load_record(&a, &s).unwrap();
    assert_eq!(rec.subject_id, "p01");
    assert_eq!(rec.stages.len(), 10);
    assert_eq!(rec.airflow.len(), 30_000);

    let (a, s) = write_pair(dir.path(), 300, &labels[..9]);
    assert!(matches!(load_record(&a, &s), Err(Error::Schema { .. })));

    let mut bad = labels.to_vec();
    bad[3] = "N4";
    let (a, s) = write_pair(dir.path(), 300, &bad);
    match load_record(&a, &s) {
        Err(Error::Parse { line, msg, .. }) => {
            assert_eq!(line, 4);
            assert!(msg.contains("N4"));
        }
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn synthetic_round_trips_through_files() {
    let cfg = SynthConfig {
        n_subjects: 2,
        epochs_per_subject: 8,
        seed: 5,
        ..SynthConfig::default()
    };
    let a = generate_synthetic(&cfg).unwrap();
    assert_eq!(a, generate_synthetic(&cfg).unwrap());
    let other = generate_synthetic(&SynthConfig { seed: 6, ..cfg.clone() }).unwrap();
    assert_ne!(a[0].airflow, other[0].airflow);

    let dir = tempfile::tempdir().unwrap();
    for rec in &a {
        let sub = write_record(dir.path(), rec).unwrap();
        assert_eq!(&load_record_dir(&sub).unwrap(), rec);
    }
}

/// Breath intervals grouped by the epoch holding their closing onset.
fn interval_std_per_epoch(rec: &breathtopo::SubjectRecord) -> Vec<Option<f64>> {
    let onsets = detect_breath_cycles(&rec.airflow, &BreathConfig::default()).unwrap();
    let mut per: Vec<Vec<f64>> = vec![Vec::new(); rec.stages.len()];
    for w in onsets.onsets_s().windows(2) {
        let e = (w[1] / EPOCH_S) as usize;
        if e < per.len() {
            per[e].push(w[1] - w[0]);
        }
    }
    per.iter().map(|v| (v.len() >= 3).then(|| sample_std(v))).collect()
}

#[test]
fn nrem_breathing_is_steadier_than_rem() {
    let recs = generate_synthetic(&SynthConfig::default()).unwrap();
    for rec in &recs {
        let stds = interval_std_per_epoch(rec);
        let cls = classes(&rec.stages);
        let pick = |c: Stage| -> Vec<f64> {
            cls.iter().zip(&stds).filter(|(s, _)| **s == c).filter_map(|(_, v)| *v).collect()
        };
        let (nrem, rem) = (pick(Stage::Nrem), pick(Stage::Rem));
        if rem.is_empty() {
            continue;
        }
        let pairs = (nrem.len() * rem.len()) as f64;
        let wins = nrem.iter().map(|n| rem.iter().filter(|r| n < *r).count()).sum::<usize>() as f64;
        assert!(wins / pairs >= 0.95, "{}: {:.3} of pairs", rec.subject_id, wins / pairs);
    }
}

#[test]
fn stage_frequencies_approach_stationary() {
    let cfg = SynthConfig {
        n_subjects: 8,
        epochs_per_subject: 2000,
        rate_hz: 8.0,
        ..SynthConfig::default()
    };
    let pi = cfg.stationary();
    let mut counts = [0usize; 3];
    let mut total = 0;
    for rec in generate_synthetic(&cfg).unwrap() {
        for c in classes(&rec.stages) {
            counts[c.index()] += 1;
            total += 1;
        }
    }
    for k in 0..3 {
        let f = counts[k] as f64 / total as f64;
        assert!((f - pi[k]).abs() <= 0.05, "class {k}: {f:.3} vs {:.3}", pi[k]);
    }
}

#[test]
fn default_cohort_has_breaths_in_nearly_every_epoch() {
    let recs = generate_synthetic(&SynthConfig::default()).unwrap();
    let (mut ok, mut total) = (0, 0);
    for rec in &recs {
        let onsets = detect_breath_cycles(&rec.airflow, &BreathConfig::default()).unwrap();
        let mut per = vec![0usize; rec.stages.len()];
        for t in onsets.onsets_s() {
            let e = (t / EPOCH_S) as usize;
            if e < per.len() {
                per[e] += 1;
            }
        }
        ok += per.iter().filter(|n| **n >= 3).count();
        total += per.len();
    }
    assert!(ok as f64 >= 0.99 * total as f64, "{ok} of {total} epochs");
}

#[test]
fn exports() {
    let dir = tempfile::tempdir().unwrap();
    let empty = PersistenceDiagram::new(0, FiltrationKind::Sublevel, Vec::new());
    let p = dir.path().join("pd.csv");
    export_pd(&[empty], &p).unwrap();
    assert_eq!(fs::read_to_string(&p).unwrap().lines().count(), 1);

    let cfg = SynthConfig {
        n_subjects: 3,
        epochs_per_subject: 12,
        seed: 9,
        transition: [[0.5, 0.25, 0.25], [0.25, 0.5, 0.25], [0.25, 0.25, 0.5]],
        ..SynthConfig::default()
    };
    let mut subjects = Vec::new();
    for rec in generate_synthetic(&cfg).unwrap() {
        let m = featurize_record(&rec, FeatureSet::Cla, &FeatureConfig::default()).unwrap();
        let f = dir.path().join(format!("{}.csv", rec.subject_id));
        export_features(&m, &f).unwrap();
        let back = load_features(&f).unwrap();
        assert_eq!(back.names, m.names);
        assert_eq!(back.rows, m.rows);
        subjects.push(m);
    }
    let out = losocv(&subjects, &BoostConfig { n_rounds: 5, ..BoostConfig::default() }, None).unwrap();
    let p = dir.path().join("metrics.csv");
    export_metrics(&out.folds, &p).unwrap();
    let text = fs::read_to_string(&p).unwrap();
    assert_eq!(text.lines().count() - 1, out.folds.len() + 1);
}
