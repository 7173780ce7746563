//! Second-order gradient-boosted trees on the multiclass softmax objective.

use std::fmt::Write as _;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::stage::Stage;

const N_CLASSES: usize = Stage::COUNT;
const MIN_HESSIAN: f64 = 1e-16;
pub const DEFAULT_SQI_THRESHOLD: f64 = 0.25;
const MODEL_MAGIC: &str = "breathtopo-gbdt 1";

#[derive(Debug, Clone, PartialEq)]
pub struct BoostConfig {
    pub learning_rate: f64,
    pub max_depth: usize,
    /// Per-round row sampling rate.
    pub subsample: f64,
    /// Per-tree feature sampling rate.
    pub colsample_bytree: f64,
    pub n_rounds: usize,
    pub l2_reg: f64,
    /// Minimum hessian mass in each child.
    pub min_child_weight: f64,
    pub seed: u64,
    /// Instance weights indexed by `Stage::index`.
    pub class_weights: [f64; N_CLASSES],
}

impl Default for BoostConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.07,
            max_depth: 5,
            subsample: 0.2,
            colsample_bytree: 0.5,
            n_rounds: 100,
            l2_reg: 1.0,
            min_child_weight: 1.0,
            seed: 0,
            class_weights: [4.0, 4.0, 1.0],
        }
    }
}

impl BoostConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| v > 0.0 && v <= 1.0;
        if !unit(self.learning_rate) {
            return Err(Error::invalid("learning_rate must lie in (0, 1]"));
        }
        if !unit(self.subsample) || !unit(self.colsample_bytree) {
            return Err(Error::invalid("subsample and colsample_bytree must lie in (0, 1]"));
        }
        if self.max_depth == 0 {
            return Err(Error::invalid("max_depth must be at least 1"));
        }
        if !(self.l2_reg >= 0.0) || !(self.min_child_weight >= 0.0) {
            return Err(Error::invalid("l2_reg and min_child_weight must be non-negative"));
        }
        if self.class_weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::invalid("class weights must be positive"));
        }
        Ok(())
    }

    /// `key=value` lines, one per field, in a fixed order.
    pub fn to_kv(&self) -> String {
        format!(
            "learning_rate={}\nmax_depth={}\nsubsample={}\ncolsample_bytree={}\nn_rounds={}\n\
             l2_reg={}\nmin_child_weight={}\nseed={}\nweight_wake={}\nweight_rem={}\nweight_nrem={}\n",
            self.learning_rate,
            self.max_depth,
            self.subsample,
            self.colsample_bytree,
            self.n_rounds,
            self.l2_reg,
            self.min_child_weight,
            self.seed,
            self.class_weights[0],
            self.class_weights[1],
            self.class_weights[2],
        )
    }

    /// Applies one `key=value` setting. Returns `Ok(false)` for keys that do
    /// not belong to the booster.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::invalid(format!("bad value `{value}` for `{key}`")))
        }
        match key {
            "learning_rate" => self.learning_rate = num(key, value)?,
            "max_depth" => self.max_depth = num(key, value)?,
            "subsample" => self.subsample = num(key, value)?,
            "colsample_bytree" => self.colsample_bytree = num(key, value)?,
            "n_rounds" => self.n_rounds = num(key, value)?,
            "l2_reg" => self.l2_reg = num(key, value)?,
            "min_child_weight" => self.min_child_weight = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "weight_wake" => self.class_weights[0] = num(key, value)?,
            "weight_rem" => self.class_weights[1] = num(key, value)?,
            "weight_nrem" => self.class_weights[2] = num(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }
}

/// Drops training rows whose window SQI is strictly below `threshold`.
pub fn filter_low_quality(m: &FeatureMatrix, threshold: f64) -> Result<FeatureMatrix> {
    let rows: Vec<_> = m.rows.iter().filter(|r| !(r.sqi < threshold)).cloned().collect();
    if rows.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    Ok(FeatureMatrix {
        names: m.names.clone(),
        rows,
        excluded: m.excluded.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node {
    /// Rows with `x[feature] < threshold` go to `left`.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    /// Root at index 0.
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf(v) => return v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] < threshold { left } else { right },
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoostedModel {
    pub config: BoostConfig,
    pub feature_names: Vec<String>,
    /// `n_rounds` groups of one tree per class, class-minor.
    pub trees: Vec<Tree>,
    /// Total split gain accumulated per feature.
    pub gains: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub labels: Vec<Stage>,
    pub probabilities: Vec<[f64; N_CLASSES]>,
}

fn softmax(scores: &[f64; N_CLASSES]) -> [f64; N_CLASSES] {
    let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e = scores.map(|s| (s - m).exp());
    let z: f64 = e.iter().sum();
    e.map(|v| v / z)
}

fn argmax(p: &[f64; N_CLASSES]) -> Stage {
    let mut best = 0;
    for k in 1..N_CLASSES {
        if p[k] > p[best] {
            best = k;
        }
    }
    Stage::from_index(best).expect("class index in range")
}

struct SplitChoice {
    feature: usize,
    threshold: f64,
    gain: f64,
}

struct Grower<'a> {
    x: &'a [Vec<f64>],
    g: &'a [f64],
    h: &'a [f64],
    cfg: &'a BoostConfig,
    /// In-bag rows sorted by value for each sampled feature.
    sorted: Vec<(usize, Vec<usize>)>,
    in_node: Vec<bool>,
    nodes: Vec<Node>,
    gains: &'a mut [f64],
}

impl Grower<'_> {
    fn score(&self, g: f64, h: f64) -> f64 {
        g * g / (h + self.cfg.l2_reg)
    }

    fn best_split(&self, g_tot: f64, h_tot: f64) -> Option<SplitChoice> {
        let parent = self.score(g_tot, h_tot);
        let mut best: Option<SplitChoice> = None;
        for (feature, order) in &self.sorted {
            let (mut gl, mut hl) = (0.0, 0.0);
            let mut prev: Option<f64> = None;
            for &r in order.iter().filter(|&&r| self.in_node[r]) {
                let v = self.x[r][*feature];
                if let Some(pv) = prev {
                    if v > pv
                        && hl >= self.cfg.min_child_weight
                        && h_tot - hl >= self.cfg.min_child_weight
                    {
                        let gain = 0.5
                            * (self.score(gl, hl) + self.score(g_tot - gl, h_tot - hl) - parent);
                        if gain > 0.0 && best.as_ref().is_none_or(|b| gain > b.gain) {
                            best = Some(SplitChoice {
                                feature: *feature,
                                threshold: v,
                                gain,
                            });
                        }
                    }
                }
                gl += self.g[r];
                hl += self.h[r];
                prev = Some(v);
            }
        }
        best
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf(0.0));
        let g_tot: f64 = rows.iter().map(|&r| self.g[r]).sum();
        let h_tot: f64 = rows.iter().map(|&r| self.h[r]).sum();
        let leaf = -g_tot / (h_tot + self.cfg.l2_reg) * self.cfg.learning_rate;

        let split = if depth < self.cfg.max_depth && rows.len() > 1 {
            for &r in &rows {
                self.in_node[r] = true;
            }
            let s = self.best_split(g_tot, h_tot);
            for &r in &rows {
                self.in_node[r] = false;
            }
            s
        } else {
            None
        };
        let Some(s) = split else {
            self.nodes[id] = Node::Leaf(leaf);
            return id;
        };
        self.gains[s.feature] += s.gain;
        let (lrows, rrows): (Vec<usize>, Vec<usize>) =
            rows.into_iter().partition(|&r| self.x[r][s.feature] < s.threshold);
        let left = self.grow(lrows, depth + 1);
        let right = self.grow(rrows, depth + 1);
        self.nodes[id] = Node::Split {
            feature: s.feature,
            threshold: s.threshold,
            left,
            right,
        };
        id
    }
}

fn check_matrix(x: &[Vec<f64>], width: usize) -> Result<()> {
    for (i, row) in x.iter().enumerate() {
        if row.len() != width {
            return Err(Error::invalid(format!(
                "row {i} has {} features, expected {width}",
                row.len()
            )));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("row {i} has a non-finite feature")));
        }
    }
    Ok(())
}

/// Trains `n_rounds × 3` trees. Rows are `x[i]`, labels `y[i]`.
pub fn fit(x: &[Vec<f64>], y: &[Stage], names: &[String], cfg: &BoostConfig) -> Result<BoostedModel> {
    cfg.validate()?;
    let n = x.len();
    let p = names.len();
    if n != y.len() {
        return Err(Error::invalid(format!("{n} rows but {} labels", y.len())));
    }
    if n == 0 {
        return Err(Error::EmptyTrainingSet);
    }
    check_matrix(x, p)?;
    let mut present = [false; N_CLASSES];
    for s in y {
        present[s.index()] = true;
    }
    if present.iter().filter(|&&b| b).count() < 2 {
        return Err(Error::DegenerateModel("training labels contain a single class".into()));
    }

    let weight: Vec<f64> = y.iter().map(|s| cfg.class_weights[s.index()]).collect();
    let mut scores = vec![[0.0f64; N_CLASSES]; n];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut trees = Vec::with_capacity(cfg.n_rounds * N_CLASSES);
    let mut gains = vec![0.0; p];
    let n_cols = ((cfg.colsample_bytree * p as f64).round() as usize).clamp(1, p.max(1));
    let mut g = vec![0.0; n];
    let mut h = vec![0.0; n];

    for _ in 0..cfg.n_rounds {
        let bag: Vec<usize> = if cfg.subsample >= 1.0 {
            (0..n).collect()
        } else {
            (0..n).filter(|_| rng.random::<f64>() < cfg.subsample).collect()
        };
        let probs: Vec<[f64; N_CLASSES]> = scores.iter().map(softmax).collect();
        for k in 0..N_CLASSES {
            for i in 0..n {
                let pk = probs[i][k];
                let target = if y[i].index() == k { 1.0 } else { 0.0 };
                g[i] = weight[i] * (pk - target);
                h[i] = weight[i] * (2.0 * pk * (1.0 - pk)).max(MIN_HESSIAN);
            }
            let mut cols: Vec<usize> = if n_cols >= p {
                (0..p).collect()
            } else {
                index::sample(&mut rng, p, n_cols).into_vec()
            };
            cols.sort_unstable();
            let tree = if bag.is_empty() || p == 0 {
                Tree {
                    nodes: vec![Node::Leaf(0.0)],
                }
            } else {
                let sorted = cols
                    .iter()
                    .map(|&j| {
                        let mut order = bag.clone();
                        order.sort_by(|&a, &b| x[a][j].total_cmp(&x[b][j]).then(a.cmp(&b)));
                        (j, order)
                    })
                    .collect();
                let mut grower = Grower {
                    x,
                    g: &g,
                    h: &h,
                    cfg,
                    sorted,
                    in_node: vec![false; n],
                    nodes: Vec::new(),
                    gains: &mut gains,
                };
                grower.grow(bag.clone(), 0);
                Tree {
                    nodes: grower.nodes,
                }
            };
            for (i, s) in scores.iter_mut().enumerate() {
                s[k] += tree.eval(&x[i]);
            }
            trees.push(tree);
        }
    }
    Ok(BoostedModel {
        config: cfg.clone(),
        feature_names: names.to_vec(),
        trees,
        gains,
    })
}

pub fn fit_matrix(m: &FeatureMatrix, cfg: &BoostConfig) -> Result<BoostedModel> {
    let x: Vec<Vec<f64>> = m.rows.iter().map(|r| r.values.clone()).collect();
    let y: Vec<Stage> = m.rows.iter().map(|r| r.stage).collect();
    fit(&x, &y, &m.names, cfg)
}

/// Weighted training softmax loss, `-sum w_i ln p_i[y_i] / sum w_i`.
pub fn weighted_log_loss(model: &BoostedModel, x: &[Vec<f64>], y: &[Stage]) -> Result<f64> {
    let pred = model.predict(x)?;
    let (mut num, mut den) = (0.0, 0.0);
    for (p, s) in pred.probabilities.iter().zip(y) {
        let w = model.config.class_weights[s.index()];
        num -= w * p[s.index()].ln();
        den += w;
    }
    Ok(num / den)
}

impl BoostedModel {
    pub fn n_rounds(&self) -> usize {
        self.trees.len() / N_CLASSES
    }

    pub fn raw_scores(&self, row: &[f64]) -> [f64; N_CLASSES] {
        let mut s = [0.0; N_CLASSES];
        for (t, tree) in self.trees.iter().enumerate() {
            s[t % N_CLASSES] += tree.eval(row);
        }
        s
    }

    pub fn predict(&self, x: &[Vec<f64>]) -> Result<Prediction> {
        check_matrix(x, self.feature_names.len())?;
        let probabilities: Vec<[f64; N_CLASSES]> =
            x.iter().map(|r| softmax(&self.raw_scores(r))).collect();
        Ok(Prediction {
            labels: probabilities.iter().map(argmax).collect(),
            probabilities,
        })
    }

    pub fn predict_matrix(&self, m: &FeatureMatrix) -> Result<Prediction> {
        if m.names != self.feature_names {
            return Err(Error::invalid("feature columns do not match the model schema"));
        }
        let x: Vec<Vec<f64>> = m.rows.iter().map(|r| r.values.clone()).collect();
        self.predict(&x)
    }

    /// Total split gain per feature, normalized to sum one (all zeros when
    /// the model never split).
    pub fn feature_importance(&self) -> Vec<(String, f64)> {
        let total: f64 = self.gains.iter().sum();
        self.feature_names
            .iter()
            .zip(&self.gains)
            .map(|(n, &g)| (n.clone(), if total > 0.0 { g / total } else { 0.0 }))
            .collect()
    }

    /// Self-describing text format. Floats use shortest round-trip notation.
    pub fn to_text(&self) -> String {
        let mut out = format!("{MODEL_MAGIC}\n[config]\n{}", self.config.to_kv());
        let _ = writeln!(out, "[features] {}", self.feature_names.len());
        for (name, g) in self.feature_names.iter().zip(&self.gains) {
            let _ = writeln!(out, "{name},{g:?}");
        }
        let _ = writeln!(out, "[trees] {}", self.trees.len());
        for tree in &self.trees {
            let _ = writeln!(out, "tree {}", tree.nodes.len());
            for node in &tree.nodes {
                match *node {
                    Node::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    } => {
                        let _ = writeln!(out, "{feature},{threshold:?},{left},{right},0.0");
                    }
                    Node::Leaf(v) => {
                        let _ = writeln!(out, "-1,0.0,0,0,{v:?}");
                    }
                }
            }
        }
        out
    }

    pub fn from_text(text: &str, source: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut last_line = 0;
        let err = |line: usize, msg: String| Error::Parse {
            path: source.to_string(),
            line,
            msg,
        };
        let mut next = |what: &str| -> Result<(usize, &str)> {
            let item = lines.next();
            if let Some((ln, _)) = item {
                last_line = ln;
            }
            item.ok_or_else(|| err(last_line + 1, format!("unexpected end of file, expected {what}")))
        };
        let (ln, magic) = next("header")?;
        if magic != MODEL_MAGIC {
            return Err(err(ln, format!("expected `{MODEL_MAGIC}`")));
        }
        let (ln, l) = next("[config]")?;
        if l != "[config]" {
            return Err(err(ln, "expected `[config]`".into()));
        }
        let mut config = BoostConfig::default();
        let (mut ln, mut l) = next("config entry")?;
        while let Some((k, v)) = l.split_once('=') {
            if !config.set(k, v).map_err(|e| err(ln, e.to_string()))? {
                return Err(err(ln, format!("unknown config key `{k}`")));
            }
            (ln, l) = next("config entry")?;
        }
        let count = |ln: usize, l: &str, tag: &str| -> Result<usize> {
            l.strip_prefix(tag)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| err(ln, format!("expected `{tag} <count>`")))
        };
        let n_features = count(ln, l, "[features]")?;
        let mut feature_names = Vec::with_capacity(n_features);
        let mut gains = Vec::with_capacity(n_features);
        for _ in 0..n_features {
            let (ln, l) = next("feature")?;
            let (name, g) = l
                .rsplit_once(',')
                .ok_or_else(|| err(ln, "expected `name,gain`".into()))?;
            feature_names.push(name.to_string());
            gains.push(g.parse::<f64>().map_err(|e| err(ln, format!("bad gain: {e}")))?);
        }
        let (ln, l) = next("[trees]")?;
        let n_trees = count(ln, l, "[trees]")?;
        let mut trees = Vec::with_capacity(n_trees);
        for _ in 0..n_trees {
            let (ln, l) = next("tree")?;
            let n_nodes = count(ln, l, "tree")?;
            let mut nodes = Vec::with_capacity(n_nodes);
            for _ in 0..n_nodes {
                let (ln, l) = next("node")?;
                let f: Vec<&str> = l.split(',').collect();
                if f.len() != 5 {
                    return Err(err(ln, format!("expected 5 node fields, found {}", f.len())));
                }
                let bad = |what: &str| err(ln, format!("bad {what}"));
                let feature: i64 = f[0].parse().map_err(|_| bad("feature"))?;
                let node = if feature < 0 {
                    Node::Leaf(f[4].parse().map_err(|_| bad("leaf value"))?)
                } else {
                    let (left, right): (usize, usize) = (
                        f[2].parse().map_err(|_| bad("left child"))?,
                        f[3].parse().map_err(|_| bad("right child"))?,
                    );
                    if feature as usize >= n_features || left >= n_nodes || right >= n_nodes {
                        return Err(err(ln, "node index out of range".into()));
                    }
                    if left <= nodes.len() || right <= nodes.len() {
                        return Err(err(ln, "child must follow its parent".into()));
                    }
                    Node::Split {
                        feature: feature as usize,
                        threshold: f[1].parse().map_err(|_| bad("threshold"))?,
                        left,
                        right,
                    }
                };
                nodes.push(node);
            }
            if nodes.is_empty() {
                return Err(err(ln, "empty tree".into()));
            }
            trees.push(Tree { nodes });
        }
        if let Some((ln, l)) = lines.find(|(_, l)| !l.trim().is_empty()) {
            return Err(err(ln, format!("trailing content `{l}`")));
        }
        if trees.len() % N_CLASSES != 0 {
            return Err(err(1, format!("{} trees is not a multiple of {N_CLASSES}", trees.len())));
        }
        config.validate()?;
        Ok(Self {
            config,
            feature_names,
            trees,
            gains,
        })
    }
}
