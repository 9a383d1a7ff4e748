//! Sparse binary logistic regression.
//!
//! The training objective is
//!
//! ```text
//! J(w, b) = Σ_i s_i · [softplus(z_i) − y_i z_i] + (l2 / 2) · ‖w‖²,   z_i = w·x_i + b
//! ```
//!
//! with per-row weights `s_i` (1, or inverse class frequency) and an
//! unregularized bias. It is minimized by deterministic full-batch gradient
//! descent from zero, Armijo backtracking, and a Barzilai–Borwein trial step.
//! Columns are max-abs scaled during training; the stored weights are
//! mapped back to the original feature units.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Instance, Label};
use crate::error::{Error, Result};
use crate::features::{target_token_count, FeatureSet, FeatureVector};

/// Fitted constants that feature extraction depends on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalizers {
    pub mean_target_tokens: f64,
}

impl Normalizers {
    /// Leaves `len_tokens_norm` equal to `len_tokens`.
    pub fn identity() -> Self {
        Normalizers {
            mean_target_tokens: 1.0,
        }
    }

    /// Mean number of target tokens over training instances.
    pub fn fit<'a>(instances: impl IntoIterator<Item = &'a Instance>) -> Self {
        let (sum, n) = instances
            .into_iter()
            .fold((0usize, 0usize), |(s, n), inst| (s + target_token_count(inst), n + 1));
        if n == 0 || sum == 0 {
            return Self::identity();
        }
        Normalizers {
            mean_target_tokens: sum as f64 / n as f64,
        }
    }
}

/// Feature name ↔ column bijection, assigned in first-seen order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureIndex {
    names: Vec<String>,
    columns: HashMap<String, usize>,
}

pub type SparseRow = Vec<(usize, f64)>;

impl FeatureIndex {
    pub fn fit<'a>(vectors: impl IntoIterator<Item = &'a FeatureVector>) -> Self {
        let mut index = FeatureIndex::default();
        for v in vectors {
            for (name, _) in v.iter() {
                index.insert(name);
            }
        }
        index
    }

    fn insert(&mut self, name: &str) -> usize {
        if let Some(&col) = self.columns.get(name) {
            return col;
        }
        let col = self.names.len();
        self.names.push(name.to_string());
        self.columns.insert(name.to_string(), col);
        col
    }

    pub fn dimension(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.get(name).copied()
    }

    pub fn name(&self, column: usize) -> &str {
        &self.names[column]
    }

    /// Column-sorted sparse row; names the index has not seen are dropped.
    pub fn vectorize(&self, v: &FeatureVector) -> SparseRow {
        let mut row: SparseRow = v.iter().filter_map(|(k, x)| self.column(k).map(|c| (c, x))).collect();
        row.sort_unstable_by_key(|&(c, _)| c);
        row
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassWeighting {
    None,
    InverseFrequency,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scaling {
    None,
    MaxAbs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub l2_strength: f64,
    pub max_iterations: usize,
    /// Stop once the max-norm of the per-row gradient falls below this.
    pub tolerance: f64,
    pub class_weighting: ClassWeighting,
    pub scaling: Scaling,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            l2_strength: 1.0,
            max_iterations: 1000,
            tolerance: 1e-6,
            class_weighting: ClassWeighting::None,
            scaling: Scaling::MaxAbs,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.l2_strength >= 0.0 && self.l2_strength.is_finite()) {
            return Err(Error::Config("l2_strength must be a finite value >= 0".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::Config("tolerance must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainStats {
    pub iterations: usize,
    pub converged: bool,
    pub final_loss: f64,
    /// Objective after every accepted step, starting at the zero model.
    #[serde(skip)]
    pub loss_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub index: FeatureIndex,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub normalizers: Normalizers,
    pub config: TrainConfig,
    pub feature_set: Option<FeatureSet>,
    pub stats: TrainStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl Gradient {
    pub fn max_norm(&self) -> f64 {
        self.weights.iter().fold(self.bias.abs(), |m, g| m.max(g.abs()))
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn dot(weights: &[f64], row: &[(usize, f64)]) -> f64 {
    row.iter().map(|&(c, x)| weights[c] * x).sum()
}

const CHUNK: usize = 2048;

/// Objective and gradient with optional per-row weights. Row chunks are
/// reduced in a fixed order, so the result does not depend on thread count.
fn objective(
    weights: &[f64],
    bias: f64,
    rows: &[SparseRow],
    targets: &[f64],
    row_weights: Option<&[f64]>,
    l2: f64,
) -> (f64, Gradient) {
    let dim = weights.len();
    let partials: Vec<(f64, Vec<f64>, f64)> = rows
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(chunk, block)| {
            let mut loss = 0.0;
            let mut grad = vec![0.0; dim];
            let mut grad_b = 0.0;
            for (k, row) in block.iter().enumerate() {
                let i = chunk * CHUNK + k;
                let s = row_weights.map_or(1.0, |w| w[i]);
                let z = dot(weights, row) + bias;
                loss += s * (softplus(z) - targets[i] * z);
                let r = s * (sigmoid(z) - targets[i]);
                for &(c, x) in row {
                    grad[c] += r * x;
                }
                grad_b += r;
            }
            (loss, grad, grad_b)
        })
        .collect();

    let mut loss = 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>();
    let mut grad: Vec<f64> = weights.iter().map(|w| l2 * w).collect();
    let mut grad_b = 0.0;
    for (l, g, gb) in partials {
        loss += l;
        grad.iter_mut().zip(g).for_each(|(a, b)| *a += b);
        grad_b += gb;
    }
    (
        loss,
        Gradient {
            weights: grad,
            bias: grad_b,
        },
    )
}

/// Objective value and analytic gradient for unweighted rows.
pub fn loss_and_gradient(weights: &[f64], bias: f64, rows: &[SparseRow], labels: &[Label], l2: f64) -> (f64, Gradient) {
    let targets: Vec<f64> = labels.iter().map(|l| f64::from(u8::from(l.is_complex()))).collect();
    objective(weights, bias, rows, &targets, None, l2)
}

const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1e-20;

pub fn train(vectors: &[FeatureVector], labels: &[Label], config: &TrainConfig) -> Result<LinearModel> {
    config.validate()?;
    if vectors.len() != labels.len() {
        return Err(Error::Training(format!(
            "{} feature vectors but {} labels",
            vectors.len(),
            labels.len()
        )));
    }
    if vectors.is_empty() {
        return Err(Error::Training("no training instances".into()));
    }
    let n = labels.len();
    let n_pos = labels.iter().filter(|l| l.is_complex()).count();
    if n_pos == 0 || n_pos == n {
        return Err(Error::Training("training labels contain a single class".into()));
    }

    let index = FeatureIndex::fit(vectors);
    let dim = index.dimension();
    let mut rows: Vec<SparseRow> = vectors.iter().map(|v| index.vectorize(v)).collect();

    let mut scales = vec![1.0; dim];
    if config.scaling == Scaling::MaxAbs {
        for row in &rows {
            for &(c, x) in row {
                scales[c] = f64::max(scales[c], x.abs());
            }
        }
        // columns whose largest magnitude is below one are left unscaled
        for row in &mut rows {
            for (c, x) in row.iter_mut() {
                *x /= scales[*c];
            }
        }
    }

    let targets: Vec<f64> = labels.iter().map(|l| f64::from(u8::from(l.is_complex()))).collect();
    let row_weights: Option<Vec<f64>> = match config.class_weighting {
        ClassWeighting::None => None,
        ClassWeighting::InverseFrequency => {
            let w_pos = n as f64 / (2.0 * n_pos as f64);
            let w_neg = n as f64 / (2.0 * (n - n_pos) as f64);
            Some(labels.iter().map(|l| if l.is_complex() { w_pos } else { w_neg }).collect())
        }
    };
    let eval = |w: &[f64], b: f64| objective(w, b, &rows, &targets, row_weights.as_deref(), config.l2_strength);

    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let (mut f, mut g) = eval(&w, b);
    let mut history = vec![f];
    let mut step = 1.0 / n as f64;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < config.max_iterations {
        if g.max_norm() / n as f64 <= config.tolerance {
            converged = true;
            break;
        }
        let g_sq = g.weights.iter().map(|x| x * x).sum::<f64>() + g.bias * g.bias;
        let accepted = loop {
            let w_next: Vec<f64> = w.iter().zip(&g.weights).map(|(wi, gi)| wi - step * gi).collect();
            let b_next = b - step * g.bias;
            let (f_next, g_next) = eval(&w_next, b_next);
            if f_next.is_nan() {
                return Err(Error::Training("objective became NaN".into()));
            }
            if f_next <= f - ARMIJO * step * g_sq {
                break Some((w_next, b_next, f_next, g_next));
            }
            step *= 0.5;
            if step < MIN_STEP {
                break None;
            }
        };
        let Some((w_next, b_next, f_next, g_next)) = accepted else {
            // no descent possible at machine precision
            converged = true;
            break;
        };

        // Barzilai–Borwein trial step for the next iteration
        let mut s_dot_y = 0.0;
        let mut s_dot_s = 0.0;
        for ((wn, wo), (gn, go)) in w_next.iter().zip(&w).zip(g_next.weights.iter().zip(&g.weights)) {
            s_dot_y += (wn - wo) * (gn - go);
            s_dot_s += (wn - wo) * (wn - wo);
        }
        s_dot_y += (b_next - b) * (g_next.bias - g.bias);
        s_dot_s += (b_next - b) * (b_next - b);
        step = if s_dot_y > 0.0 { s_dot_s / s_dot_y } else { step * 2.0 };
        step = step.clamp(1e-12, 1e12);

        w = w_next;
        b = b_next;
        f = f_next;
        g = g_next;
        history.push(f);
        iterations += 1;
    }
    if !f.is_finite() || w.iter().any(|x| !x.is_finite()) {
        return Err(Error::Training("training diverged".into()));
    }

    let weights = w.iter().zip(&scales).map(|(wi, s)| wi / s).collect();
    Ok(LinearModel {
        index,
        weights,
        bias: b,
        normalizers: Normalizers::identity(),
        config: config.clone(),
        feature_set: None,
        stats: TrainStats {
            iterations,
            converged,
            final_loss: f,
            loss_history: history,
        },
    })
}

impl LinearModel {
    /// A model whose every weight is zero.
    pub fn zero(index: FeatureIndex, config: TrainConfig) -> Self {
        let dim = index.dimension();
        LinearModel {
            index,
            weights: vec![0.0; dim],
            bias: 0.0,
            normalizers: Normalizers::identity(),
            config,
            feature_set: None,
            stats: TrainStats::default(),
        }
    }

    pub fn decision(&self, v: &FeatureVector) -> f64 {
        dot(&self.weights, &self.index.vectorize(v)) + self.bias
    }

    pub fn predict_proba(&self, v: &FeatureVector) -> f64 {
        sigmoid(self.decision(v))
    }

    /// Complex iff the probability is at least one half.
    pub fn predict(&self, v: &FeatureVector) -> Label {
        Label::from_bool(self.decision(v) >= 0.0)
    }

    /// Named weights, largest magnitude first. The bias is in `self.bias`.
    pub fn coefficients(&self) -> Vec<(String, f64)> {
        let mut out: Vec<(String, f64)> = self
            .weights
            .iter()
            .enumerate()
            .map(|(c, &w)| (self.index.name(c).to_string(), w))
            .collect();
        out.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()).then_with(|| a.0.cmp(&b.0)));
        out
    }

    pub fn coefficient(&self, name: &str) -> f64 {
        self.index.column(name).map_or(0.0, |c| self.weights[c])
    }
}

const MAGIC: &str = "cwi-linear-model 1";

fn fmt_class_weighting(c: ClassWeighting) -> &'static str {
    match c {
        ClassWeighting::None => "none",
        ClassWeighting::InverseFrequency => "inverse_frequency",
    }
}

fn fmt_scaling(s: Scaling) -> &'static str {
    match s {
        Scaling::None => "none",
        Scaling::MaxAbs => "max_abs",
    }
}

impl LinearModel {
    /// Versioned text format: `key = value` header, then one
    /// `name<TAB>weight` line per column.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let c = &self.config;
        let _ = writeln!(s, "{MAGIC}");
        if let Some(set) = &self.feature_set {
            let _ = writeln!(s, "feature_set_name = {}", set.name);
            let _ = writeln!(s, "feature_set = {}", set.describe());
        }
        let _ = writeln!(s, "l2_strength = {:?}", c.l2_strength);
        let _ = writeln!(s, "max_iterations = {}", c.max_iterations);
        let _ = writeln!(s, "tolerance = {:?}", c.tolerance);
        let _ = writeln!(s, "class_weighting = {}", fmt_class_weighting(c.class_weighting));
        let _ = writeln!(s, "scaling = {}", fmt_scaling(c.scaling));
        let _ = writeln!(s, "mean_target_tokens = {:?}", self.normalizers.mean_target_tokens);
        let _ = writeln!(s, "iterations = {}", self.stats.iterations);
        let _ = writeln!(s, "converged = {}", self.stats.converged);
        let _ = writeln!(s, "final_loss = {:?}", self.stats.final_loss);
        let _ = writeln!(s, "bias = {:?}", self.bias);
        let _ = writeln!(s, "weights = {}", self.weights.len());
        for (c, w) in self.weights.iter().enumerate() {
            let _ = writeln!(s, "{}\t{:?}", self.index.name(c), w);
        }
        s
    }

    pub fn from_text<R: BufRead>(reader: R) -> Result<Self> {
        let bad = |m: String| Error::ModelFormat(m);
        let mut lines = reader.lines();
        let mut next = || -> Result<Option<String>> {
            lines
                .next()
                .transpose()
                .map_err(|e| Error::ModelFormat(e.to_string()))
        };
        if next()?.as_deref().map(str::trim) != Some(MAGIC) {
            return Err(bad(format!("missing header {MAGIC:?}")));
        }
        let mut header: HashMap<String, String> = HashMap::new();
        let n_weights: usize = loop {
            let line = next()?.ok_or_else(|| bad("unexpected end of header".into()))?;
            let (k, v) = line
                .split_once(" = ")
                .ok_or_else(|| bad(format!("malformed header line {line:?}")))?;
            if k == "weights" {
                break v.trim().parse().map_err(|_| bad(format!("bad weight count {v:?}")))?;
            }
            header.insert(k.to_string(), v.to_string());
        };
        let get = |k: &str| header.get(k).ok_or_else(|| bad(format!("missing key {k}")));
        let float = |k: &str| -> Result<f64> { get(k)?.parse().map_err(|_| bad(format!("{k} is not a number"))) };
        let int = |k: &str| -> Result<usize> { get(k)?.parse().map_err(|_| bad(format!("{k} is not an integer"))) };

        let config = TrainConfig {
            l2_strength: float("l2_strength")?,
            max_iterations: int("max_iterations")?,
            tolerance: float("tolerance")?,
            class_weighting: match get("class_weighting")?.as_str() {
                "none" => ClassWeighting::None,
                "inverse_frequency" => ClassWeighting::InverseFrequency,
                other => return Err(bad(format!("unknown class_weighting {other:?}"))),
            },
            scaling: match get("scaling")?.as_str() {
                "none" => Scaling::None,
                "max_abs" => Scaling::MaxAbs,
                other => return Err(bad(format!("unknown scaling {other:?}"))),
            },
        };
        let feature_set = match (header.get("feature_set_name"), header.get("feature_set")) {
            (Some(name), Some(list)) => {
                let mut set = FeatureSet::parse(list)?;
                set.name = name.clone();
                Some(set)
            }
            _ => None,
        };

        let mut index = FeatureIndex::default();
        let mut weights = Vec::with_capacity(n_weights);
        for _ in 0..n_weights {
            let line = next()?.ok_or_else(|| bad("fewer weights than declared".into()))?;
            let (name, w) = line
                .rsplit_once('\t')
                .ok_or_else(|| bad(format!("malformed weight line {line:?}")))?;
            let w: f64 = w.parse().map_err(|_| bad(format!("bad weight {w:?}")))?;
            if !w.is_finite() {
                return Err(bad(format!("non-finite weight for {name}")));
            }
            if index.column(name).is_some() {
                return Err(bad(format!("duplicate feature {name:?}")));
            }
            index.insert(name);
            weights.push(w);
        }
        Ok(LinearModel {
            index,
            weights,
            bias: float("bias")?,
            normalizers: Normalizers {
                mean_target_tokens: float("mean_target_tokens")?,
            },
            config,
            feature_set,
            stats: TrainStats {
                iterations: int("iterations")?,
                converged: get("converged")? == "true",
                final_loss: float("final_loss")?,
                loss_history: Vec::new(),
            },
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_text().as_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(std::io::BufReader::new(f))
    }
}
