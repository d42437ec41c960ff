//! Linear soft-margin SVMs, one-vs-one multi-class voting and per-class
//! evaluation.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::descriptor::Reader;
use crate::{Error, Result};

pub const DEFAULT_C: f64 = 1.0;
pub const DEFAULT_GAP_TOLERANCE: f64 = 1e-4;
pub const MODEL_MAGIC: &[u8; 4] = b"STVM";
pub const MODEL_VERSION: u32 = 1;

/// Curvature floor for degenerate pairs in the SMO step.
const MIN_CURVATURE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SvmOptions {
    pub c: f64,
    /// Target for primal minus dual objective.
    pub gap_tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SvmOptions {
    fn default() -> Self {
        SvmOptions {
            c: DEFAULT_C,
            gap_tolerance: DEFAULT_GAP_TOLERANCE,
            max_iterations: 10_000_000,
        }
    }
}

impl SvmOptions {
    pub fn with_c(c: f64) -> Self {
        SvmOptions {
            c,
            ..Default::default()
        }
    }
}

/// Decision function `w·x + b`; positive values mean `classes.0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub classes: (String, String),
}

impl LinearModel {
    pub fn decision(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.weights.len() {
            return Err(Error::DimensionMismatch {
                expected: self.weights.len(),
                got: x.len(),
            });
        }
        Ok(dot(&self.weights, x) + self.bias)
    }

    pub fn predict(&self, x: &[f64]) -> Result<&str> {
        Ok(if self.decision(x)? >= 0.0 {
            &self.classes.0
        } else {
            &self.classes.1
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainStats {
    pub iterations: usize,
    /// Dual objective ½αᵀQα − Σα after each solver step (non-increasing).
    pub objective_history: Vec<f64>,
    /// ½‖w‖² + C·Σ hinge at the returned (w, b).
    pub primal: f64,
    /// Σα − ½‖w‖².
    pub dual: f64,
    pub duality_gap: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Soft-margin primal objective.
pub fn primal_objective(w: &[f64], b: f64, x: &[Vec<f64>], y: &[f64], c: f64) -> f64 {
    let hinge: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, &yi)| (1.0 - yi * (dot(w, xi) + b)).max(0.0))
        .sum();
    0.5 * dot(w, w) + c * hinge
}

/// Bias minimizing the hinge sum for fixed `w`. The loss is convex and
/// piecewise linear with kinks at `yᵢ − sᵢ`; among minimizers the one
/// closest to `hint` is returned.
pub fn optimal_bias(scores: &[f64], y: &[f64], hint: f64) -> f64 {
    let loss = |b: f64| -> f64 {
        scores
            .iter()
            .zip(y)
            .map(|(&s, &yi)| (1.0 - yi * (s + b)).max(0.0))
            .sum()
    };
    let mut kinks: Vec<f64> = scores.iter().zip(y).map(|(&s, &yi)| yi - s).collect();
    kinks.sort_by(f64::total_cmp);
    let values: Vec<f64> = kinks.iter().map(|&b| loss(b)).collect();
    let best = values.iter().copied().fold(f64::INFINITY, f64::min);
    let tol = 1e-12 * best.abs().max(1.0);
    let lo = kinks[values.iter().position(|&v| v <= best + tol).unwrap()];
    let hi = kinks[values.iter().rposition(|&v| v <= best + tol).unwrap()];
    hint.clamp(lo, hi)
}

struct Smo<'a> {
    y: &'a [f64],
    gram: Vec<f64>,
    n: usize,
    c: f64,
    alpha: Vec<f64>,
    /// Gradient of the dual objective: (Qα)ᵢ − 1.
    grad: Vec<f64>,
}

impl Smo<'_> {
    fn k(&self, i: usize, j: usize) -> f64 {
        self.gram[i * self.n + j]
    }

    fn objective(&self) -> f64 {
        // ½αᵀQα − Σα = ½ Σ αᵢ (Gᵢ − 1)
        0.5 * self
            .alpha
            .iter()
            .zip(&self.grad)
            .map(|(a, g)| a * (g - 1.0))
            .sum::<f64>()
    }

    /// Maximal violating pair with second-order choice of the second index,
    /// or `None` once the KKT violation is below `eps`.
    fn select(&self, eps: f64) -> Option<(usize, usize)> {
        let (c, y, a, g) = (self.c, self.y, &self.alpha, &self.grad);
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..self.n {
            let v = -y[t] * g[t];
            let up = if y[t] > 0.0 { a[t] < c } else { a[t] > 0.0 };
            if up && v >= gmax {
                gmax = v;
                i = t;
            }
        }
        if i == usize::MAX {
            return None;
        }
        let mut gmax2 = f64::NEG_INFINITY;
        let mut best = (usize::MAX, f64::INFINITY);
        for t in 0..self.n {
            let low = if y[t] > 0.0 { a[t] > 0.0 } else { a[t] < c };
            if !low {
                continue;
            }
            let v = y[t] * g[t];
            gmax2 = gmax2.max(v);
            let diff = gmax + v;
            if diff > 0.0 {
                let quad = (self.k(i, i) + self.k(t, t) - 2.0 * self.k(i, t)).max(MIN_CURVATURE);
                let obj = -diff * diff / quad;
                if obj <= best.1 {
                    best = (t, obj);
                }
            }
        }
        if gmax + gmax2 < eps || best.0 == usize::MAX {
            None
        } else {
            Some((i, best.0))
        }
    }

    fn step(&mut self, i: usize, j: usize) {
        let (c, y) = (self.c, self.y);
        let quad = (self.k(i, i) + self.k(j, j) - 2.0 * self.k(i, j)).max(MIN_CURVATURE);
        let (old_i, old_j) = (self.alpha[i], self.alpha[j]);
        let (mut ai, mut aj) = (old_i, old_j);
        if y[i] != y[j] {
            let delta = (-self.grad[i] - self.grad[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let delta = (self.grad[i] - self.grad[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }
        self.alpha[i] = ai;
        self.alpha[j] = aj;
        let (di, dj) = (ai - old_i, aj - old_j);
        for t in 0..self.n {
            self.grad[t] += y[t] * (y[i] * self.k(t, i) * di + y[j] * self.k(t, j) * dj);
        }
    }

    /// Bias from the KKT conditions: mean over free vectors, midpoint of
    /// the feasible interval otherwise.
    fn kkt_bias(&self) -> f64 {
        let (mut sum, mut free) = (0.0, 0usize);
        let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
        for t in 0..self.n {
            let yg = self.y[t] * self.grad[t];
            let a = self.alpha[t];
            if a > 0.0 && a < self.c {
                sum += yg;
                free += 1;
            } else if (a == 0.0) == (self.y[t] > 0.0) {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        }
        let rho = if free > 0 {
            sum / free as f64
        } else if ub.is_finite() && lb.is_finite() {
            0.5 * (ub + lb)
        } else {
            0.0
        };
        -rho
    }
}

/// Solves the soft-margin problem for labels `y ∈ {−1, +1}`, tightening the
/// KKT tolerance until the duality gap falls below `opts.gap_tolerance`.
pub fn solve_svm(
    x: &[Vec<f64>],
    y: &[f64],
    opts: &SvmOptions,
) -> Result<(Vec<f64>, f64, TrainStats)> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y.len(),
        });
    }
    if !(opts.c > 0.0 && opts.c.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "C must be positive, got {}",
            opts.c
        )));
    }
    if let Some(bad) = y.iter().find(|&&v| v != 1.0 && v != -1.0) {
        return Err(Error::InvalidParameter(format!(
            "labels must be ±1, got {bad}"
        )));
    }
    if !(y.contains(&1.0) && y.contains(&-1.0)) {
        return Err(Error::SingleClass("binary problem".into()));
    }
    let dim = x[0].len();
    if let Some(bad) = x.iter().find(|xi| xi.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: bad.len(),
        });
    }
    let gram: Vec<f64> = (0..n * n)
        .into_par_iter()
        .map(|k| dot(&x[k / n], &x[k % n]))
        .collect();
    let mut smo = Smo {
        y,
        gram,
        n,
        c: opts.c,
        alpha: vec![0.0; n],
        grad: vec![-1.0; n],
    };
    let mut history = vec![0.0];
    let mut iterations = 0;
    let mut eps = 1e-3;
    loop {
        while iterations < opts.max_iterations {
            match smo.select(eps) {
                Some((i, j)) => smo.step(i, j),
                None => break,
            }
            iterations += 1;
            history.push(smo.objective());
        }
        let mut w = vec![0.0; dim];
        for (t, xt) in x.iter().enumerate() {
            let coef = smo.alpha[t] * y[t];
            if coef != 0.0 {
                w.iter_mut().zip(xt).for_each(|(wk, xk)| *wk += coef * xk);
            }
        }
        let scores: Vec<f64> = x.iter().map(|xi| dot(&w, xi)).collect();
        let b = optimal_bias(&scores, y, smo.kkt_bias());
        let primal = primal_objective(&w, b, x, y, opts.c);
        let dual = smo.alpha.iter().sum::<f64>() - 0.5 * dot(&w, &w);
        let gap = primal - dual;
        if gap < opts.gap_tolerance || eps < 1e-14 || iterations >= opts.max_iterations {
            if gap >= opts.gap_tolerance {
                log::warn!("svm stopped with duality gap {gap:.3e} after {iterations} steps");
            }
            let stats = TrainStats {
                iterations,
                objective_history: history,
                primal,
                dual,
                duality_gap: gap,
            };
            return Ok((w, b, stats));
        }
        eps *= 0.1;
    }
}

/// Binary model for `classes.0` (label `true`) against `classes.1`.
pub fn train_binary(
    x: &[Vec<f64>],
    positive: &[bool],
    classes: (String, String),
    opts: &SvmOptions,
) -> Result<(LinearModel, TrainStats)> {
    let y: Vec<f64> = positive
        .iter()
        .map(|&p| if p { 1.0 } else { -1.0 })
        .collect();
    let (weights, bias, stats) = solve_svm(x, &y, opts)?;
    Ok((
        LinearModel {
            weights,
            bias,
            classes,
        },
        stats,
    ))
}

/// One linear model per unordered class pair.
#[derive(Debug, Clone, PartialEq)]
pub struct OvoModel {
    pub classes: Vec<String>,
    pub dimension: usize,
    pub c: f64,
    /// Models for pairs (i, j), i < j, in lexicographic order of (i, j);
    /// positive decisions vote for class i.
    pub pairs: Vec<((usize, usize), LinearModel)>,
}

/// Trains every pair of the sorted set of labels, in parallel.
pub fn train_ovo(x: &[Vec<f64>], labels: &[String], opts: &SvmOptions) -> Result<OvoModel> {
    if x.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: labels.len(),
        });
    }
    let classes: Vec<String> = labels
        .iter()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if classes.len() < 2 {
        return Err(Error::SingleClass(format!(
            "one-vs-one training ({} classes)",
            classes.len()
        )));
    }
    let dimension = x[0].len();
    let mut pair_ids = Vec::new();
    for i in 0..classes.len() {
        for j in i + 1..classes.len() {
            pair_ids.push((i, j));
        }
    }
    let pairs = pair_ids
        .par_iter()
        .map(|&(i, j)| {
            let (mut xs, mut pos) = (Vec::new(), Vec::new());
            for (xi, l) in x.iter().zip(labels) {
                if *l == classes[i] || *l == classes[j] {
                    xs.push(xi.clone());
                    pos.push(*l == classes[i]);
                }
            }
            let names = (classes[i].clone(), classes[j].clone());
            train_binary(&xs, &pos, names, opts).map(|(m, _)| ((i, j), m))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OvoModel {
        classes,
        dimension,
        c: opts.c,
        pairs,
    })
}

/// Votes and summed |decision| per class for one input.
#[derive(Debug, Clone, PartialEq)]
pub struct VoteTally {
    pub votes: Vec<usize>,
    pub strength: Vec<f64>,
}

impl OvoModel {
    pub fn tally(&self, x: &[f64]) -> Result<VoteTally> {
        let n = self.classes.len();
        let mut tally = VoteTally {
            votes: vec![0; n],
            strength: vec![0.0; n],
        };
        for ((i, j), m) in &self.pairs {
            let f = m.decision(x)?;
            let winner = if f >= 0.0 { *i } else { *j };
            tally.votes[winner] += 1;
            tally.strength[winner] += f.abs();
        }
        Ok(tally)
    }

    /// Majority vote; ties go to the larger summed |decision|, then to the
    /// earlier class.
    pub fn predict(&self, x: &[f64]) -> Result<&str> {
        let t = self.tally(x)?;
        let mut best = 0;
        for k in 1..self.classes.len() {
            if t.votes[k] > t.votes[best]
                || (t.votes[k] == t.votes[best] && t.strength[k] > t.strength[best])
            {
                best = k;
            }
        }
        Ok(&self.classes[best])
    }

    /// Header `STVM` + u32 version, f64 C, u32 dimension, u32 class count,
    /// each class as u32 length + UTF-8; then per pair u32 i, u32 j,
    /// f64 bias, dimension × f64 weights.
    pub fn write_binary(&self, mut w: impl Write) -> Result<()> {
        w.write_all(MODEL_MAGIC)?;
        w.write_all(&MODEL_VERSION.to_le_bytes())?;
        w.write_all(&self.c.to_le_bytes())?;
        w.write_all(&(self.dimension as u32).to_le_bytes())?;
        w.write_all(&(self.classes.len() as u32).to_le_bytes())?;
        for c in &self.classes {
            w.write_all(&(c.len() as u32).to_le_bytes())?;
            w.write_all(c.as_bytes())?;
        }
        for ((i, j), m) in &self.pairs {
            w.write_all(&(*i as u32).to_le_bytes())?;
            w.write_all(&(*j as u32).to_le_bytes())?;
            w.write_all(&m.bias.to_le_bytes())?;
            for v in &m.weights {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_binary(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, "model file");
        r.header(MODEL_MAGIC, MODEL_VERSION)?;
        let c = r.f64()?;
        let dimension = r.u32()? as usize;
        let n = r.u32()? as usize;
        let classes = (0..n).map(|_| r.string()).collect::<Result<Vec<_>>>()?;
        let mut pairs = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let (fi, fj) = (r.u32()? as usize, r.u32()? as usize);
                if (fi, fj) != (i, j) {
                    return Err(Error::malformed(
                        "model file",
                        format!("expected pair ({i}, {j}), found ({fi}, {fj})"),
                    ));
                }
                let bias = r.f64()?;
                let weights = (0..dimension)
                    .map(|_| r.f64())
                    .collect::<Result<Vec<_>>>()?;
                let model = LinearModel {
                    weights,
                    bias,
                    classes: (classes[i].clone(), classes[j].clone()),
                };
                pairs.push(((i, j), model));
            }
        }
        if !r.at_end() {
            return Err(Error::malformed("model file", "trailing bytes"));
        }
        Ok(OvoModel {
            classes,
            dimension,
            c,
            pairs,
        })
    }
}

/// Per-class recall, confusion matrix and accuracy of a test run.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub classes: Vec<String>,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    pub recall: Vec<f64>,
    pub accuracy: f64,
}

impl EvalReport {
    pub fn from_predictions(truth: &[String], predicted: &[String]) -> Result<Self> {
        if truth.is_empty() {
            return Err(Error::InvalidParameter("empty test set".into()));
        }
        if truth.len() != predicted.len() {
            return Err(Error::DimensionMismatch {
                expected: truth.len(),
                got: predicted.len(),
            });
        }
        let classes: Vec<String> = truth
            .iter()
            .chain(predicted)
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let idx = |s: &String| classes.binary_search(s).expect("collected above");
        let n = classes.len();
        let mut confusion = vec![vec![0usize; n]; n];
        for (t, p) in truth.iter().zip(predicted) {
            confusion[idx(t)][idx(p)] += 1;
        }
        let recall = (0..n)
            .map(|k| {
                let support: usize = confusion[k].iter().sum();
                if support == 0 {
                    0.0
                } else {
                    confusion[k][k] as f64 / support as f64
                }
            })
            .collect();
        let correct: usize = (0..n).map(|k| confusion[k][k]).sum();
        Ok(EvalReport {
            classes,
            confusion,
            recall,
            accuracy: correct as f64 / truth.len() as f64,
        })
    }

    pub fn support(&self, k: usize) -> usize {
        self.confusion[k].iter().sum()
    }

    pub fn recall_of(&self, class: &str) -> Option<f64> {
        self.classes
            .iter()
            .position(|c| c == class)
            .map(|k| self.recall[k])
    }

    /// Aligned table of recall per class followed by the confusion matrix.
    pub fn to_text(&self) -> String {
        let w = self
            .classes
            .iter()
            .map(|c| c.len())
            .max()
            .unwrap_or(0)
            .max(8);
        let mut out = String::new();
        let _ = writeln!(out, "{:<w$}  {:>7}  {:>7}", "class", "recall", "support");
        for (k, c) in self.classes.iter().enumerate() {
            let _ = writeln!(
                out,
                "{:<w$}  {:>6.1}%  {:>7}",
                c,
                100.0 * self.recall[k],
                self.support(k)
            );
        }
        let _ = writeln!(out, "{:<w$}  {:>6.1}%", "accuracy", 100.0 * self.accuracy);
        out.push('\n');
        let _ = write!(out, "{:<w$}", "true\\pred");
        for c in &self.classes {
            let _ = write!(out, "  {:>w$}", c);
        }
        out.push('\n');
        for (k, c) in self.classes.iter().enumerate() {
            let _ = write!(out, "{:<w$}", c);
            for v in &self.confusion[k] {
                let _ = write!(out, "  {:>w$}", v);
            }
            out.push('\n');
        }
        out
    }

    /// `class recall support` rows, then the confusion matrix as
    /// `confusion true predicted count` rows.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("class\trecall\tsupport\n");
        for (k, c) in self.classes.iter().enumerate() {
            let _ = writeln!(out, "{c}\t{}\t{}", self.recall[k], self.support(k));
        }
        let _ = writeln!(
            out,
            "accuracy\t{}\t{}",
            self.accuracy,
            self.confusion.iter().flatten().sum::<usize>()
        );
        for (t, row) in self.classes.iter().zip(&self.confusion) {
            for (p, v) in self.classes.iter().zip(row) {
                let _ = writeln!(out, "confusion\t{t}\t{p}\t{v}");
            }
        }
        out
    }
    /// Inverse of [`EvalReport::to_tsv`].
    pub fn parse_tsv(text: &str) -> Result<Self> {
        let bad = |m: String| Error::malformed("report tsv", m);
        let mut lines = text.lines();
        if lines.next() != Some("class\trecall\tsupport") {
            return Err(bad("missing header".into()));
        }
        let (mut classes, mut recall, mut accuracy) = (Vec::new(), Vec::new(), None);
        let mut cells = Vec::new();
        for line in lines {
            let f: Vec<&str> = line.split('\t').collect();
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| bad(format!("bad number {s:?}")))
            };
            match f[..] {
                ["accuracy", a, _] => accuracy = Some(num(a)?),
                ["confusion", _, _, v] => cells.push(
                    v.parse::<usize>()
                        .map_err(|_| bad(format!("bad count {v:?}")))?,
                ),
                [c, r, _] if accuracy.is_none() => {
                    classes.push(c.to_string());
                    recall.push(num(r)?);
                }
                _ => return Err(bad(format!("unexpected line {line:?}"))),
            }
        }
        let n = classes.len();
        if cells.len() != n * n {
            return Err(bad(format!(
                "expected {} confusion cells, got {}",
                n * n,
                cells.len()
            )));
        }
        Ok(EvalReport {
            confusion: cells.chunks(n.max(1)).map(|r| r.to_vec()).collect(),
            classes,
            recall,
            accuracy: accuracy.ok_or_else(|| bad("missing accuracy".into()))?,
        })
    }
}

pub fn evaluate(model: &OvoModel, x: &[Vec<f64>], labels: &[String]) -> Result<EvalReport> {
    if x.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: labels.len(),
        });
    }
    let predicted = x
        .iter()
        .map(|xi| model.predict(xi).map(str::to_string))
        .collect::<Result<Vec<_>>>()?;
    EvalReport::from_predictions(labels, &predicted)
}

/// Recall per class for several descriptor runs side by side, one column
/// per run, with a mean row.
pub fn comparison_table(runs: &[(&str, &EvalReport)]) -> String {
    let classes: BTreeSet<&String> = runs.iter().flat_map(|(_, r)| &r.classes).collect();
    let w = classes.iter().map(|c| c.len()).max().unwrap_or(0).max(8);
    let cw = runs.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max(7);
    let mut out = String::new();
    let _ = write!(out, "{:<w$}", "class");
    for (name, _) in runs {
        let _ = write!(out, "  {:>cw$}", name);
    }
    out.push('\n');
    for c in &classes {
        let _ = write!(out, "{:<w$}", c);
        for (_, r) in runs {
            match r.recall_of(c) {
                Some(v) => {
                    let _ = write!(out, "  {:>cw$}", format!("{:.1}%", 100.0 * v));
                }
                None => {
                    let _ = write!(out, "  {:>cw$}", "-");
                }
            }
        }
        out.push('\n');
    }
    let _ = write!(out, "{:<w$}", "mean");
    for (_, r) in runs {
        let mean = r.recall.iter().sum::<f64>() / r.recall.len() as f64;
        let _ = write!(out, "  {:>cw$}", format!("{:.1}%", 100.0 * mean));
    }
    out.push('\n');
    out
}

/// Stratified k-fold cross-validation accuracy for each candidate C; returns
/// the best C (smallest on ties) and all mean accuracies.
pub fn select_c(
    x: &[Vec<f64>],
    labels: &[String],
    grid: &[f64],
    folds: usize,
    seed: u64,
) -> Result<(f64, Vec<f64>)> {
    if grid.is_empty() || folds < 2 {
        return Err(Error::InvalidParameter(
            "cross-validation needs a non-empty grid and at least 2 folds".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![0usize; x.len()];
    let classes: BTreeSet<&String> = labels.iter().collect();
    let mut next = 0;
    for c in classes {
        let mut idx: Vec<usize> = (0..x.len()).filter(|&i| labels[i] == *c).collect();
        idx.shuffle(&mut rng);
        for i in idx {
            fold_of[i] = next % folds;
            next += 1;
        }
    }
    let mut scores = Vec::with_capacity(grid.len());
    for &c in grid {
        let opts = SvmOptions::with_c(c);
        let mut correct = 0usize;
        let mut total = 0usize;
        for f in 0..folds {
            let (mut tx, mut ty, mut vx, mut vy) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
            for i in 0..x.len() {
                if fold_of[i] == f {
                    vx.push(x[i].clone());
                    vy.push(labels[i].clone());
                } else {
                    tx.push(x[i].clone());
                    ty.push(labels[i].clone());
                }
            }
            if vx.is_empty() {
                continue;
            }
            let model = train_ovo(&tx, &ty, &opts)?;
            for (xi, yi) in vx.iter().zip(&vy) {
                correct += (model.predict(xi)? == yi) as usize;
                total += 1;
            }
        }
        scores.push(correct as f64 / total.max(1) as f64);
    }
    let mut best = 0;
    for k in 1..grid.len() {
        if scores[k] > scores[best] || (scores[k] == scores[best] && grid[k] < grid[best]) {
            best = k;
        }
    }
    Ok((grid[best], scores))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &str) -> String {
        v.to_string()
    }

    #[test]
    fn two_point_separable() {
        let x = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let (m, stats) = train_binary(
            &x,
            &[true, false],
            (s("a"), s("b")),
            &SvmOptions::with_c(1e3),
        )
        .unwrap();
        assert!(m.decision(&x[0]).unwrap() >= 1.0 - 1e-3);
        assert!(m.decision(&x[1]).unwrap() <= -1.0 + 1e-3);
        assert!(stats.duality_gap < 1e-4);
        // w = (1, −1), b = 0
        assert!((m.weights[0] - 1.0).abs() < 1e-6 && (m.weights[1] + 1.0).abs() < 1e-6);
        assert!(m.bias.abs() < 1e-6);
    }

    #[test]
    fn conflicting_duplicates_train() {
        let x = vec![vec![0.5, 0.5]; 4];
        let (m, stats) = train_binary(
            &x,
            &[true, false, true, false],
            (s("a"), s("b")),
            &SvmOptions::default(),
        )
        .unwrap();
        assert!(m.weights.iter().all(|w| w.is_finite()) && m.bias.is_finite());
        assert!(stats.duality_gap < 1e-4);
    }

    #[test]
    fn objective_never_increases() {
        let x: Vec<Vec<f64>> = (0..30)
            .map(|i| {
                vec![
                    (i as f64 * 0.37).sin(),
                    (i as f64 * 0.91).cos(),
                    0.1 * i as f64,
                ]
            })
            .collect();
        let y: Vec<bool> = (0..30).map(|i| (i * 7) % 3 == 0).collect();
        let (_, stats) = train_binary(&x, &y, (s("a"), s("b")), &SvmOptions::default()).unwrap();
        for w in stats.objective_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
        assert!(stats.duality_gap < 1e-4 && stats.duality_gap > -1e-9);
    }

    #[test]
    fn binary_errors() {
        let x = vec![vec![1.0], vec![2.0]];
        assert!(matches!(
            train_binary(&x, &[true, true], (s("a"), s("b")), &SvmOptions::default()),
            Err(Error::SingleClass(_))
        ));
        let ragged = vec![vec![1.0], vec![2.0, 3.0]];
        assert!(matches!(
            train_binary(
                &ragged,
                &[true, false],
                (s("a"), s("b")),
                &SvmOptions::default()
            ),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn bias_scan_finds_flat_minimum() {
        // separable with slack: any b in [−0.5, 0.5] gives zero hinge
        let b = optimal_bias(&[1.5, -1.5], &[1.0, -1.0], 3.0);
        assert_eq!(b, 0.5);
        let b = optimal_bias(&[1.5, -1.5], &[1.0, -1.0], 0.1);
        assert_eq!(b, 0.1);
    }

    fn clusters() -> (Vec<Vec<f64>>, Vec<String>) {
        let centres = [(0.0, 0.0), (5.0, 0.0), (0.0, 5.0)];
        let mut x = Vec::new();
        let mut l = Vec::new();
        for (k, (cx, cy)) in centres.iter().enumerate() {
            for i in 0..6 {
                let a = i as f64;
                x.push(vec![cx + 0.3 * a.sin(), cy + 0.3 * a.cos()]);
                l.push(format!("c{k}"));
            }
        }
        (x, l)
    }

    #[test]
    fn ovo_on_separable_clusters() {
        let (x, l) = clusters();
        let m = train_ovo(&x, &l, &SvmOptions::with_c(10.0)).unwrap();
        assert_eq!(m.pairs.len(), 3);
        for (xi, li) in x.iter().zip(&l) {
            assert_eq!(m.predict(xi).unwrap(), li);
        }
        let report = evaluate(&m, &x, &l).unwrap();
        assert!(report.recall.iter().all(|&r| r == 1.0));
        assert_eq!(report.accuracy, 1.0);
        assert!(m.predict(&[1.0]).is_err());
    }

    #[test]
    fn vote_cycle_uses_decision_strength() {
        let lm = |w: f64, b: f64, a: &str, c: &str| LinearModel {
            weights: vec![w],
            bias: b,
            classes: (s(a), s(c)),
        };
        // a beats b, b beats c, c beats a; each class gets one vote
        let m = OvoModel {
            classes: vec![s("a"), s("b"), s("c")],
            dimension: 1,
            c: 1.0,
            pairs: vec![
                ((0, 1), lm(1.0, 0.0, "a", "b")),
                ((0, 2), lm(-2.0, 0.0, "a", "c")),
                ((1, 2), lm(3.0, 0.0, "b", "c")),
            ],
        };
        let t = m.tally(&[1.0]).unwrap();
        assert_eq!(t.votes, vec![1, 1, 1]);
        assert_eq!(m.predict(&[1.0]).unwrap(), "b");
        assert_eq!(m.predict(&[1.0]).unwrap(), "b");
    }

    #[test]
    fn report_shapes() {
        let truth = vec![s("a"), s("a"), s("b"), s("c")];
        let pred = vec![s("a"), s("a"), s("a"), s("a")];
        let r = EvalReport::from_predictions(&truth, &pred).unwrap();
        assert_eq!(r.recall, vec![1.0, 0.0, 0.0]);
        assert_eq!(r.confusion[0], vec![2, 0, 0]);
        assert_eq!(r.support(1), 1);
        assert!(r.to_text().contains("accuracy"));
        assert!(r.to_tsv().starts_with("class\trecall\tsupport\na\t1\t2\n"));
        assert_eq!(EvalReport::parse_tsv(&r.to_tsv()).unwrap(), r);
        assert!(EvalReport::from_predictions(&[], &[]).is_err());
        let table = comparison_table(&[("hoghof", &r), ("huestip", &r)]);
        assert_eq!(table.lines().count(), 1 + 3 + 1);
    }

    #[test]
    fn model_file_round_trip() {
        let (x, l) = clusters();
        let m = train_ovo(&x, &l, &SvmOptions::default()).unwrap();
        let mut buf = Vec::new();
        m.write_binary(&mut buf).unwrap();
        assert_eq!(OvoModel::read_binary(&buf).unwrap(), m);
        assert!(OvoModel::read_binary(&buf[..buf.len() - 8]).is_err());
    }

    #[test]
    fn cross_validation_picks_from_grid() {
        let (x, l) = clusters();
        let (c, scores) = select_c(&x, &l, &[0.1, 1.0, 10.0], 3, 7).unwrap();
        assert!([0.1, 1.0, 10.0].contains(&c));
        assert_eq!(scores.len(), 3);
    }
}
