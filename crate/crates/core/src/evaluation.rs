//! Error estimates for the cluster-then-classify pipeline.
//!
//! The error for one held-out function is the utility loss it suffers when
//! it follows the best strategy of the prototype the tree assigns it, asking
//! the tree's questions of its own utility values. Errors are averaged over
//! the test functions of a run and then over runs.
//!
//! Runs are independent and execute in parallel. Run `r` draws its split
//! from a ChaCha stream seeded with `seed` on stream `r`, so reports are
//! bit-identical for a fixed seed regardless of thread scheduling.

use std::fmt::Write as _;
use std::ops::RangeInclusive;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::DecisionModel;
use crate::pipeline::Elicitor;
use crate::utility::{utility_loss, UtilityDatabase};

pub const DEFAULT_TRAIN_FRACTION: f64 = 0.8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    /// Training-set size or cluster count, depending on the protocol.
    pub x: usize,
    pub mean_error: f64,
    /// Mean error of each run (or fold), in run order.
    pub run_errors: Vec<f64>,
    pub mean_questions: f64,
    pub max_questions: usize,
    pub max_depth: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalParams {
    pub k: Option<usize>,
    pub gap: f64,
    pub train_sizes: Vec<usize>,
    pub runs: usize,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub protocol: String,
    pub history: usize,
    pub params: EvalParams,
    pub points: Vec<EvalPoint>,
}

impl EvalReport {
    /// Mean of the per-point errors.
    pub fn mean_error(&self) -> f64 {
        self.points.iter().map(|p| p.mean_error).sum::<f64>() / self.points.len().max(1) as f64
    }

    pub fn point(&self, x: usize) -> Option<&EvalPoint> {
        self.points.iter().find(|p| p.x == x)
    }

    fn x_name(&self) -> &'static str {
        if self.protocol == "loocv" {
            "k"
        } else {
            "train_size"
        }
    }

    /// One row per data point.
    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "protocol,history,{},mean_error,runs,mean_questions,max_questions,max_depth\n",
            self.x_name()
        );
        for p in &self.points {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                self.protocol,
                self.history,
                p.x,
                p.mean_error,
                p.run_errors.len(),
                p.mean_questions,
                p.max_questions,
                p.max_depth
            );
        }
        out
    }

    pub fn summary(&self, model: &DecisionModel) -> String {
        let label = model
            .histories()
            .get(self.history)
            .map_or("?", |h| h.label.as_str());
        let mut out = format!("== {} (history {label}) ==\n", self.protocol);
        if let Some(k) = self.params.k {
            let _ = writeln!(out, "k = {k}");
        }
        let _ = writeln!(
            out,
            "gap = {}, runs = {}",
            self.params.gap, self.params.runs
        );
        for p in &self.points {
            let _ = writeln!(
                out,
                "{} = {:>3}  mean UL = {:.6}  questions: mean {:.2}, max {} (depth {})",
                self.x_name(),
                p.x,
                p.mean_error,
                p.mean_questions,
                p.max_questions,
                p.max_depth
            );
        }
        let _ = writeln!(out, "overall mean UL = {:.6}", self.mean_error());
        out
    }

    /// A minimal line chart of mean error against `x`.
    pub fn to_svg(&self) -> String {
        let (w, h, pad) = (480.0, 320.0, 40.0);
        let xs: Vec<f64> = self.points.iter().map(|p| p.x as f64).collect();
        let ys: Vec<f64> = self.points.iter().map(|p| p.mean_error).collect();
        let (x0, x1) = (
            xs.iter().copied().fold(f64::INFINITY, f64::min),
            xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        );
        let y1 = ys.iter().copied().fold(0.0, f64::max).max(1e-12);
        let sx = |x: f64| pad + (x - x0) / (x1 - x0).max(1.0) * (w - 2.0 * pad);
        let sy = |y: f64| h - pad - y / y1 * (h - 2.0 * pad);
        let points: Vec<String> = xs
            .iter()
            .zip(&ys)
            .map(|(&x, &y)| format!("{:.1},{:.1}", sx(x), sy(y)))
            .collect();
        format!(
            concat!(
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\">\n",
                "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
                "<line x1=\"{pad}\" y1=\"{base}\" x2=\"{right}\" y2=\"{base}\" stroke=\"black\"/>\n",
                "<line x1=\"{pad}\" y1=\"{pad}\" x2=\"{pad}\" y2=\"{base}\" stroke=\"black\"/>\n",
                "<text x=\"{pad}\" y=\"20\" font-size=\"12\">{title}: mean UL (max {ymax:.4})</text>\n",
                "<text x=\"{right}\" y=\"{label_y}\" font-size=\"12\" text-anchor=\"end\">{xname}</text>\n",
                "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"{pts}\"/>\n",
                "</svg>\n"
            ),
            w = w,
            h = h,
            pad = pad,
            base = h - pad,
            right = w - pad,
            label_y = h - 10.0,
            title = self.protocol,
            ymax = y1,
            xname = self.x_name(),
            pts = points.join(" "),
        )
    }
}

struct RunOutcome {
    errors: Vec<f64>,
    questions: Vec<usize>,
    depth: usize,
}

fn run_split(
    db: &UtilityDatabase,
    model: &DecisionModel,
    history: usize,
    k: usize,
    gap: f64,
    train: &[usize],
    test: &[usize],
) -> Result<RunOutcome> {
    let elicitor = Elicitor::train(&db.subset(train), model, history, k, gap)?;
    let mut errors = Vec::with_capacity(test.len());
    let mut questions = Vec::with_capacity(test.len());
    for &t in test {
        let user = &db.functions()[t];
        let c = elicitor.classify_function(&user.values);
        let prototype = elicitor.prototype(c.label);
        errors.push(utility_loss(model, user, prototype, history)?);
        questions.push(c.questions_asked);
    }
    Ok(RunOutcome {
        errors,
        questions,
        depth: elicitor.tree.depth(),
    })
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len().max(1) as f64
}

fn summarize(x: usize, runs: Vec<RunOutcome>) -> EvalPoint {
    let run_errors: Vec<f64> = runs.iter().map(|r| mean(&r.errors)).collect();
    let all_questions: Vec<usize> = runs
        .iter()
        .flat_map(|r| r.questions.iter().copied())
        .collect();
    EvalPoint {
        x,
        mean_error: mean(&run_errors),
        run_errors,
        mean_questions: all_questions.iter().sum::<usize>() as f64
            / all_questions.len().max(1) as f64,
        max_questions: all_questions.iter().copied().max().unwrap_or(0),
        max_depth: runs.iter().map(|r| r.depth).max().unwrap_or(0),
    }
}

#[allow(clippy::too_many_arguments)]
fn random_splits(
    db: &UtilityDatabase,
    model: &DecisionModel,
    history: usize,
    k: usize,
    gap: f64,
    train_size: usize,
    runs: usize,
    seed: u64,
) -> Result<EvalPoint> {
    let n = db.len();
    if train_size < k {
        return Err(Error::InvalidEvaluation(format!(
            "training size {train_size} is smaller than k = {k}"
        )));
    }
    if train_size >= n {
        return Err(Error::InvalidEvaluation(format!(
            "training size {train_size} leaves no test functions out of {n}"
        )));
    }
    let outcomes = (0..runs)
        .into_par_iter()
        .map(|run| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(run as u64);
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            let (train, test) = order.split_at(train_size);
            let mut train = train.to_vec();
            train.sort_unstable();
            run_split(db, model, history, k, gap, &train, test)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(train_size, outcomes))
}

fn check_common(
    db: &UtilityDatabase,
    model: &DecisionModel,
    history: usize,
    runs: usize,
) -> Result<()> {
    model.check_history(history)?;
    if db.is_empty() {
        return Err(Error::EmptyDatabase);
    }
    if runs == 0 {
        return Err(Error::InvalidEvaluation("runs must be at least 1".into()));
    }
    Ok(())
}

/// Repeated random train/test splits with `train_fraction` of the database
/// used for training.
#[allow(clippy::too_many_arguments)]
pub fn holdout_error(
    db: &UtilityDatabase,
    model: &DecisionModel,
    history: usize,
    k: usize,
    gap: f64,
    train_fraction: f64,
    runs: usize,
    seed: u64,
) -> Result<EvalReport> {
    check_common(db, model, history, runs)?;
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidEvaluation(format!(
            "train fraction {train_fraction} must lie in (0, 1)"
        )));
    }
    let n = db.len();
    let train_size =
        ((train_fraction * n as f64).round() as usize).clamp(1, n.saturating_sub(1).max(1));
    let point = random_splits(db, model, history, k, gap, train_size, runs, seed)?;
    Ok(EvalReport {
        protocol: "holdout".into(),
        history,
        params: EvalParams {
            k: Some(k),
            gap,
            train_sizes: vec![train_size],
            runs,
            seed: Some(seed),
        },
        points: vec![point],
    })
}

/// Holdout error at each training-set size; the rest of the database is the
/// test set.
#[allow(clippy::too_many_arguments)]
pub fn learning_curve(
    db: &UtilityDatabase,
    model: &DecisionModel,
    history: usize,
    k: usize,
    gap: f64,
    train_sizes: &[usize],
    runs: usize,
    seed: u64,
) -> Result<EvalReport> {
    check_common(db, model, history, runs)?;
    let points = train_sizes
        .iter()
        .map(|&size| random_splits(db, model, history, k, gap, size, runs, seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport {
        protocol: "learning_curve".into(),
        history,
        params: EvalParams {
            k: Some(k),
            gap,
            train_sizes: train_sizes.to_vec(),
            runs,
            seed: Some(seed),
        },
        points,
    })
}

/// Leave-one-out error for each cluster count in `k_range`.
pub fn loocv_over_k(
    db: &UtilityDatabase,
    model: &DecisionModel,
    history: usize,
    k_range: RangeInclusive<usize>,
    gap: f64,
) -> Result<EvalReport> {
    check_common(db, model, history, 1)?;
    let n = db.len();
    if k_range.is_empty() || *k_range.start() < 1 || *k_range.end() > n.saturating_sub(1) {
        return Err(Error::InvalidEvaluation(format!(
            "k range {}..={} must lie within 1..={}",
            k_range.start(),
            k_range.end(),
            n.saturating_sub(1)
        )));
    }
    let points = k_range
        .clone()
        .map(|k| {
            let folds = (0..n)
                .into_par_iter()
                .map(|held_out| {
                    let train: Vec<usize> = (0..n).filter(|&i| i != held_out).collect();
                    run_split(db, model, history, k, gap, &train, &[held_out])
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(summarize(k, folds))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport {
        protocol: "loocv".into(),
        history,
        params: EvalParams {
            k: None,
            gap,
            train_sizes: vec![n - 1],
            runs: n,
            seed: None,
        },
        points,
    })
}
