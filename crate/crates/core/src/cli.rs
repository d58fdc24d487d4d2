//! Command-line front end. The binary only forwards to [`run`].

use std::ffi::OsString;
use std::io::{BufRead, Write};
use std::net::SocketAddr;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use crate::clustering::hac;
use crate::corpus::{load_database, save_database, save_labels, GeneratorSpec};
use crate::error::{Error, Result};
use crate::evaluation::{self, EvalReport, DEFAULT_TRAIN_FRACTION};
use crate::model::DecisionModel;
use crate::pipeline::Elicitor;
use crate::service::{self, ServeOptions};
use crate::session::{Artifacts, QuestionView, SessionManager};
use crate::tree::{ElicitationTree, DEFAULT_GAP};
use crate::utility::UtilityDatabase;

#[derive(Parser, Debug)]
#[command(
    name = "elicit",
    version,
    about = "Cluster utility functions and elicit preferences with a question tree"
)]
pub struct Cli {
    /// Decision model JSON; the bundled prenatal-testing model if omitted.
    #[arg(long, global = true)]
    pub model: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Synthesize a utility database from a generator spec.
    Gen(GenArgs),
    /// Cluster the database for one or all histories.
    Cluster(ClusterArgs),
    /// Grow and export the question tree for one history.
    Tree(TreeArgs),
    /// Answer tree questions on the terminal and get a recommendation.
    Elicit(ElicitArgs),
    /// Holdout, learning-curve, and leave-one-out reports.
    Eval(EvalArgs),
    /// Run the HTTP session service.
    Serve(ServeArgs),
}

#[derive(Args, Debug)]
pub struct DbArgs {
    /// Utility database CSV; the bundled synthetic corpus if omitted.
    #[arg(long)]
    pub db: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct GenArgs {
    /// Generator spec JSON; the bundled four-archetype spec if omitted.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Use the bundled high-noise spec.
    #[arg(long, conflicts_with = "spec")]
    pub noisy: bool,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write ground-truth archetype labels here.
    #[arg(long)]
    pub labels: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ClusterArgs {
    #[command(flatten)]
    pub db: DbArgs,
    /// History index or label, or `all`.
    #[arg(long, default_value = "all")]
    pub history: String,
    #[arg(long)]
    pub k: usize,
    /// Output JSON; stdout if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TreeArgs {
    #[command(flatten)]
    pub db: DbArgs,
    #[arg(long)]
    pub history: String,
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value_t = DEFAULT_GAP)]
    pub gap: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ElicitArgs {
    #[command(flatten)]
    pub db: DbArgs,
    #[arg(long)]
    pub history: String,
    #[arg(long, default_value_t = 4)]
    pub k: usize,
    #[arg(long, default_value_t = DEFAULT_GAP)]
    pub gap: f64,
    /// Use a previously exported tree instead of growing one.
    #[arg(long)]
    pub tree: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[command(subcommand)]
    pub protocol: EvalProtocol,
}

#[derive(Args, Debug)]
pub struct EvalCommon {
    #[command(flatten)]
    pub db: DbArgs,
    #[arg(long, default_value = "all")]
    pub history: String,
    #[arg(long, default_value_t = DEFAULT_GAP)]
    pub gap: f64,
    /// CSV report; stdout if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Line chart of the report (single history only).
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum EvalProtocol {
    /// Repeated random train/test splits.
    Holdout {
        #[command(flatten)]
        common: EvalCommon,
        #[arg(long, default_value_t = 4)]
        k: usize,
        #[arg(long, default_value_t = DEFAULT_TRAIN_FRACTION)]
        train_fraction: f64,
        #[arg(long, default_value_t = 1000)]
        runs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Holdout error as a function of training-set size.
    LearningCurve {
        #[command(flatten)]
        common: EvalCommon,
        #[arg(long, default_value_t = 4)]
        k: usize,
        /// Comma-separated training sizes.
        #[arg(long, value_delimiter = ',', required = true)]
        train_sizes: Vec<usize>,
        #[arg(long, default_value_t = 1000)]
        runs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Leave-one-out error as a function of the cluster count.
    Loocv {
        #[command(flatten)]
        common: EvalCommon,
        /// Inclusive range such as `1..10`.
        #[arg(long, value_parser = parse_k_range)]
        k_range: RangeInclusive<usize>,
    },
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    #[command(flatten)]
    pub db: DbArgs,
    #[arg(long, default_value_t = 4)]
    pub k: usize,
    #[arg(long, default_value_t = DEFAULT_GAP)]
    pub gap: f64,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
    /// Grow every history's tree before accepting requests.
    #[arg(long)]
    pub warm_up: bool,
    /// Prebuilt tree files to serve instead of growing them.
    #[arg(long = "tree")]
    pub trees: Vec<PathBuf>,
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
    #[arg(long)]
    pub cors: bool,
    /// Keep sessions in this JSON file across restarts.
    #[arg(long)]
    pub snapshot: Option<PathBuf>,
}

/// Parses `a..b` or `a..=b`, both inclusive.
pub fn parse_k_range(s: &str) -> std::result::Result<RangeInclusive<usize>, String> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| format!("expected a range like 1..10, got {s:?}"))?;
    let b = b.strip_prefix('=').unwrap_or(b);
    let a: usize = a
        .trim()
        .parse()
        .map_err(|e| format!("bad range start: {e}"))?;
    let b: usize = b
        .trim()
        .parse()
        .map_err(|e| format!("bad range end: {e}"))?;
    if a > b {
        return Err(format!("empty range {s:?}"));
    }
    Ok(a..=b)
}

fn load_model(path: Option<&Path>) -> Result<DecisionModel> {
    match path {
        Some(p) => DecisionModel::load(p),
        None => Ok(DecisionModel::mini_panda()),
    }
}

fn load_db(args: &DbArgs, model: &DecisionModel, err: &mut dyn Write) -> Result<UtilityDatabase> {
    match &args.db {
        Some(p) => {
            let loaded = load_database(p, model)?;
            if loaded.dropped > 0 {
                let _ = writeln!(err, "warning: dropped {} incomplete rows", loaded.dropped);
            }
            Ok(loaded.db)
        }
        None => Ok(GeneratorSpec::bundled().generate()?.0),
    }
}

fn histories(model: &DecisionModel, selector: &str) -> Result<Vec<usize>> {
    if selector.eq_ignore_ascii_case("all") {
        return Ok((0..model.histories().len()).collect());
    }
    model
        .find_history(selector)
        .map(|h| vec![h])
        .ok_or_else(|| Error::UnknownHistory(selector.to_string()))
}

fn one_history(model: &DecisionModel, selector: &str) -> Result<usize> {
    model
        .find_history(selector)
        .ok_or_else(|| Error::UnknownHistory(selector.to_string()))
}

fn write_output(path: Option<&Path>, text: &str, out: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => out
            .write_all(text.as_bytes())
            .map_err(|e| Error::io("<stdout>", e)),
    }
}

/// Parses `args` (including the program name) and runs the subcommand.
/// Returns the process exit code.
pub fn run<I, T>(args: I, input: &mut dyn BufRead, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match execute(cli, input, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

fn execute(
    cli: Cli,
    input: &mut dyn BufRead,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<()> {
    let model = load_model(cli.model.as_deref())?;
    match cli.command {
        Command::Gen(a) => gen(&a, err),
        Command::Cluster(a) => cluster(&a, &model, out, err),
        Command::Tree(a) => tree(&a, &model, out, err),
        Command::Elicit(a) => elicit(&a, &model, input, out, err),
        Command::Eval(a) => eval(a, &model, out, err),
        Command::Serve(a) => serve(a, model, err),
    }
}

fn gen(a: &GenArgs, err: &mut dyn Write) -> Result<()> {
    let mut spec = match (&a.spec, a.noisy) {
        (Some(p), _) => GeneratorSpec::load(p)?,
        (None, true) => GeneratorSpec::bundled_noisy(),
        (None, false) => GeneratorSpec::bundled(),
    };
    if let Some(n) = a.samples {
        spec.samples = n;
    }
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    for w in spec.validate()? {
        let _ = writeln!(err, "warning: {w}");
    }
    let (db, labels) = spec.generate()?;
    save_database(&db, &a.out)?;
    if let Some(p) = &a.labels {
        save_labels(&db, &labels, p)?;
    }
    let _ = writeln!(
        err,
        "wrote {} utility functions to {}",
        db.len(),
        a.out.display()
    );
    Ok(())
}

fn cluster(
    a: &ClusterArgs,
    model: &DecisionModel,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<()> {
    let db = load_db(&a.db, model, err)?;
    let hs = histories(model, &a.history)?;
    let exports = hs
        .iter()
        .map(|&h| hac(&db, model, h, a.k).map(|c| c.export()))
        .collect::<Result<Vec<_>>>()?;
    let text = if exports.len() == 1 {
        serde_json::to_string_pretty(&exports[0])?
    } else {
        serde_json::to_string_pretty(&exports)?
    };
    write_output(a.out.as_deref(), &(text + "\n"), out)
}

fn tree(
    a: &TreeArgs,
    model: &DecisionModel,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<()> {
    let db = load_db(&a.db, model, err)?;
    let h = one_history(model, &a.history)?;
    let e = Elicitor::train(&db, model, h, a.k, a.gap)?;
    let _ = writeln!(
        err,
        "tree for {}: depth {}, {} leaves",
        model.histories()[h].label,
        e.tree.depth(),
        e.tree.root.leaves().len()
    );
    write_output(a.out.as_deref(), &(e.tree.to_json()? + "\n"), out)
}

fn elicit(
    a: &ElicitArgs,
    model: &DecisionModel,
    input: &mut dyn BufRead,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<()> {
    let db = load_db(&a.db, model, err)?;
    let h = one_history(model, &a.history)?;
    let artifacts = Artifacts::new(model.clone(), db, a.k, a.gap)?;
    if let Some(p) = &a.tree {
        let t = ElicitationTree::load(p)?;
        if t.history != h {
            return Err(Error::InvalidSpec(format!(
                "tree in {} is for history {}, not {h}",
                p.display(),
                t.history
            )));
        }
        artifacts.insert_tree(t)?;
    }
    let manager = SessionManager::new(Arc::new(artifacts));
    let stdout = |e| Error::io("<stdout>", e);
    let mut s = manager.create_session(&h.to_string())?;
    writeln!(out, "history: {}", model.histories()[h].label).map_err(stdout)?;
    while !s.is_complete() {
        let q: QuestionView = manager.get_question(&s.id)?;
        writeln!(out, "Q: {} [y/n/why]", q.text).map_err(stdout)?;
        out.flush().map_err(stdout)?;
        let mut line = String::new();
        if input
            .read_line(&mut line)
            .map_err(|e| Error::io("<stdin>", e))?
            == 0
        {
            return Err(Error::InvalidSpec(
                "input ended before the session completed".into(),
            ));
        }
        match line.trim().to_ascii_lowercase().as_str() {
            "y" | "yes" => s = manager.submit_answer(&s.id, true)?,
            "n" | "no" => s = manager.submit_answer(&s.id, false)?,
            "why" | "?" => writeln!(out, "   {}", q.rationale()).map_err(stdout)?,
            other => {
                writeln!(out, "   please answer y, n, or why (got {other:?})").map_err(stdout)?
            }
        }
    }
    let r = s.result.expect("complete sessions carry a result");
    let strategy = &model.strategies()[r.strategy];
    writeln!(out, "questions asked: {}", s.transcript.len()).map_err(stdout)?;
    writeln!(out, "cluster: {}", r.label).map_err(stdout)?;
    writeln!(out, "prototype: {}", r.prototype).map_err(stdout)?;
    writeln!(out, "strategy: {} {}", r.strategy, strategy.label).map_err(stdout)?;
    writeln!(out, "plan: {}", strategy.description).map_err(stdout)?;
    writeln!(out, "expected utility: {:.6}", r.expected_utility).map_err(stdout)?;
    Ok(())
}

fn eval(
    a: EvalArgs,
    model: &DecisionModel,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<()> {
    let common = match &a.protocol {
        EvalProtocol::Holdout { common, .. }
        | EvalProtocol::LearningCurve { common, .. }
        | EvalProtocol::Loocv { common, .. } => common,
    };
    let db = load_db(&common.db, model, err)?;
    let hs = histories(model, &common.history)?;
    let reports = hs
        .iter()
        .map(|&h| match &a.protocol {
            EvalProtocol::Holdout {
                k,
                train_fraction,
                runs,
                seed,
                ..
            } => evaluation::holdout_error(
                &db,
                model,
                h,
                *k,
                common.gap,
                *train_fraction,
                *runs,
                *seed,
            ),
            EvalProtocol::LearningCurve {
                k,
                train_sizes,
                runs,
                seed,
                ..
            } => {
                evaluation::learning_curve(&db, model, h, *k, common.gap, train_sizes, *runs, *seed)
            }
            EvalProtocol::Loocv { k_range, .. } => {
                evaluation::loocv_over_k(&db, model, h, k_range.clone(), common.gap)
            }
        })
        .collect::<Result<Vec<EvalReport>>>()?;
    let mut csv = String::new();
    for (i, r) in reports.iter().enumerate() {
        let _ = err.write_all(r.summary(model).as_bytes());
        let body = r.to_csv();
        csv.push_str(if i == 0 {
            &body
        } else {
            body.split_once('\n').map_or("", |(_, rest)| rest)
        });
    }
    if let Some(p) = &common.svg {
        if reports.len() != 1 {
            return Err(Error::InvalidSpec("--svg needs a single --history".into()));
        }
        std::fs::write(p, reports[0].to_svg()).map_err(|e| Error::io(p, e))?;
    }
    write_output(common.out.as_deref(), &csv, out)
}

fn serve(a: ServeArgs, model: DecisionModel, err: &mut dyn Write) -> Result<()> {
    let db = load_db(&a.db, &model, err)?;
    let artifacts = Artifacts::new(model, db, a.k, a.gap)?;
    for p in &a.trees {
        artifacts.insert_tree(ElicitationTree::load(p)?)?;
    }
    if a.warm_up {
        artifacts.warm_up()?;
    }
    let mut manager = SessionManager::new(Arc::new(artifacts));
    if let Some(p) = &a.snapshot {
        manager = manager.with_snapshot(p)?;
    }
    let options = ServeOptions {
        static_dir: a.static_dir,
        cors: a.cors,
    };
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Error::io("<runtime>", e))?;
    runtime
        .block_on(service::serve(Arc::new(manager), a.addr, options))
        .map_err(|e| Error::io(a.addr.to_string(), e))
}
