//! Command-line front end. [`run`] returns the process exit code: 0 on
//! success, 2 for usage errors, 1 for data and convergence errors.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::data::{split_dataset, FeatureBag, PredictionSet, Split, SplitRatios, TaskKind};
use crate::decision::{dca_curve, default_grid, missed_at_specificity, pool_markers, triage_sweep, TriageOperatingPoint};
use crate::error::{Error, Result};
use crate::format::{read_bag, read_bag_dir, read_predictions_file, read_split, write_bag, write_predictions_file, write_split};
use crate::metrics::{ovr_auc, per_class_youden};
use crate::mil::{predict_set, read_model, train, write_model, TrainConfig, DEFAULT_DROPOUT, DEFAULT_HIDDEN};
use crate::reader::{rct_report, read_readers_file};
use crate::report::{fmt3, fmt_ci, manifest_path, sidecar_path, to_json, write_json, Interval, RunManifest};
use crate::resample::{case_bootstrap, holm, paired_delta_ci, paired_wilcoxon, MetricKind, ReplicatePlan, DEFAULT_REPS};
use crate::survival::{c_index_of, km_estimate, logrank, median_split, risk_scores, RiskGroup};
use crate::synth::{generate_bags, SynthConfig};
use crate::tiling::{patch_grid, write_coords_csv, GridOptions, Magnification, SlideGeometry, TissueMask};

pub const DEFAULT_SEED: u64 = 0;
pub const THREADS_ENV: &str = "PPB_THREADS";

#[derive(Debug, Parser, Serialize)]
#[command(name = "milstat", version, about = "Slide-level MIL training and clinical evaluation statistics")]
struct Cli {
    /// Seed for every random draw (default 0).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; falls back to $PPB_THREADS, then all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
enum Command {
    /// Patch grid over a slide extent.
    Tile(TileArgs),
    /// Synthetic bags with planted signal.
    Synth(SynthArgs),
    /// Train an attention MIL model.
    Train(TrainArgs),
    /// Write predictions for a bag directory.
    Predict(PredictArgs),
    /// Per-patch attention for one bag.
    Attend(AttendArgs),
    /// Cohort metrics with bootstrap intervals.
    Eval(EvalArgs),
    /// Bootstrap one metric.
    Bootstrap(BootstrapArgs),
    /// Paired comparison of two prediction files.
    Compare(CompareArgs),
    /// Decision-curve net benefit.
    Dca(DcaArgs),
    /// PPV-floor triage operating point.
    Triage(TriageArgs),
    /// Pool triage points across markers.
    TriagePool(TriagePoolArgs),
    /// C-index, Kaplan-Meier and log-rank.
    Survival(SurvivalArgs),
    /// Crossover reader-study analysis.
    Rct(RctArgs),
}

#[derive(Debug, Args, Serialize)]
struct TileArgs {
    #[arg(long)]
    width: u32,
    #[arg(long)]
    height: u32,
    /// 20, 40 or 80 (an `x` suffix is accepted).
    #[arg(long)]
    mag: Magnification,
    #[arg(long, default_value = "slide")]
    slide_id: String,
    /// Grayscale tissue mask; brighter than mid-grey is tissue.
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Level-0 pixels per mask pixel.
    #[arg(long, default_value_t = 16)]
    downsample: u32,
    #[arg(long)]
    min_foreground: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct SynthArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory for `*.pfb` bags and `ground_truth.json`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct TrainArgs {
    #[arg(long)]
    bags: PathBuf,
    /// binary, multiclass:K or survival:B.
    #[arg(long)]
    task: TaskKind,
    /// Existing split CSV; a stratified 70/10/20 split is drawn otherwise.
    #[arg(long)]
    split: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_HIDDEN)]
    hidden: usize,
    #[arg(long, default_value_t = DEFAULT_DROPOUT)]
    dropout: f64,
    #[arg(long, default_value_t = 2e-4)]
    lr: f64,
    #[arg(long, default_value_t = 1e-5)]
    weight_decay: f64,
    /// L2 added to the gradient instead of decoupled decay.
    #[arg(long)]
    coupled_decay: bool,
    #[arg(long, default_value_t = 25)]
    patience: usize,
    #[arg(long, default_value_t = 200)]
    max_epochs: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    bags: PathBuf,
    #[arg(long, requires = "subset")]
    split: Option<PathBuf>,
    /// train, val or test; needs --split.
    #[arg(long, requires = "split")]
    subset: Option<Split>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct AttendArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    bag: PathBuf,
    /// Keep only the highest-weighted patches.
    #[arg(long)]
    top: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct EvalArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long, default_value_t = DEFAULT_REPS)]
    reps: usize,
    #[arg(long, alias = "out")]
    report: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct BootstrapArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long, default_value = "macro_auc")]
    metric: MetricKind,
    #[arg(long, default_value_t = DEFAULT_REPS)]
    reps: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct CompareArgs {
    #[arg(long)]
    pred_a: PathBuf,
    #[arg(long)]
    pred_b: PathBuf,
    /// Repeatable; every applicable metric when absent.
    #[arg(long)]
    metric: Vec<MetricKind>,
    #[arg(long, default_value_t = DEFAULT_REPS)]
    reps: usize,
    /// Holm-adjust the p-values across the compared metrics.
    #[arg(long)]
    holm: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct DcaArgs {
    #[arg(long)]
    pred: PathBuf,
    /// Class scored as positive.
    #[arg(long, default_value_t = 1)]
    positive_class: usize,
    /// Curve CSV with columns p_t,nb_model,nb_all,nb_none.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct TriageArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long, default_value_t = 1)]
    positive_class: usize,
    #[arg(long, default_value_t = 0.99)]
    ppv_floor: f64,
    /// Also report positives missed at this specificity.
    #[arg(long)]
    spec_floor: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct TriagePoolArgs {
    /// Point files written by `triage`.
    #[arg(long, num_args = 1.., required = true)]
    points: Vec<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct SurvivalArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long, default_value_t = DEFAULT_REPS)]
    reps: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct RctArgs {
    #[arg(long)]
    readers: PathBuf,
    #[arg(long, default_value_t = DEFAULT_REPS)]
    reps: usize,
    #[arg(long, default_value_t = 10_000)]
    perms: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parses `argv` (program name first), runs the command and returns the
/// exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => {
            v.trim().parse().map(Some).map_err(|_| Error::invalid(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))
        }
        _ => Ok(None),
    }
}

fn execute(cli: &Cli) -> Result<()> {
    let threads = thread_count(cli.threads)?;
    if threads == Some(0) {
        return Err(Error::invalid("--threads must be positive"));
    }
    let ctx = Ctx { seed: cli.seed.unwrap_or(DEFAULT_SEED), seed_flag: cli.seed, threads };
    match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::invalid(format!("thread pool: {e}")))?
            .install(|| dispatch(cli, &ctx)),
        None => dispatch(cli, &ctx),
    }
}

struct Ctx {
    seed: u64,
    seed_flag: Option<u64>,
    threads: Option<usize>,
}

impl Ctx {
    fn manifest(&self, command: &str, args: &impl Serialize) -> Result<RunManifest> {
        let config = json!({ "args": args, "threads": self.threads });
        RunManifest::new(command, &config, self.seed)
    }
}

fn dispatch(cli: &Cli, ctx: &Ctx) -> Result<()> {
    match &cli.command {
        Command::Tile(a) => tile(a, ctx),
        Command::Synth(a) => synth(a, ctx),
        Command::Train(a) => train_cmd(a, ctx),
        Command::Predict(a) => predict(a, ctx),
        Command::Attend(a) => attend(a, ctx),
        Command::Eval(a) => eval(a, ctx),
        Command::Bootstrap(a) => bootstrap(a, ctx),
        Command::Compare(a) => compare(a, ctx),
        Command::Dca(a) => dca(a, ctx),
        Command::Triage(a) => triage(a, ctx),
        Command::TriagePool(a) => triage_pool(a, ctx),
        Command::Survival(a) => survival(a, ctx),
        Command::Rct(a) => rct(a, ctx),
    }
}

/// Writes `report` to `out` (or stdout) and the manifest beside it (or to
/// stderr).
fn emit(out: Option<&Path>, report: &impl Serialize, manifest: &RunManifest) -> Result<()> {
    match out {
        Some(path) => {
            write_json(path, report)?;
            write_json(&manifest_path(path), manifest)
        }
        None => {
            std::io::stdout().write_all(to_json(report)?.as_bytes())?;
            eprint!("{}", to_json(manifest)?);
            Ok(())
        }
    }
}

fn tile(a: &TileArgs, ctx: &Ctx) -> Result<()> {
    let mut m = ctx.manifest("tile", a)?;
    let mask = match &a.mask {
        Some(p) => {
            m.add_input("mask", p)?;
            Some(TissueMask::load(p, a.downsample)?)
        }
        None => None,
    };
    let mut opts = GridOptions::default();
    if let Some(f) = a.min_foreground {
        opts.min_foreground = f;
    }
    let geometry = SlideGeometry { slide_id: a.slide_id.clone(), width: a.width, height: a.height, magnification: a.mag };
    let coords = m.stage("grid", || patch_grid(&geometry, mask.as_ref(), opts))?;
    write_coords_csv(&coords, fs::File::create(&a.out)?)?;
    log::info!("{} tiles written to {}", coords.len(), a.out.display());
    write_json(&manifest_path(&a.out), &m)
}

fn synth(a: &SynthArgs, ctx: &Ctx) -> Result<()> {
    let mut m = ctx.manifest("synth", a)?;
    m.add_input("config", &a.config)?;
    let mut cfg: SynthConfig = serde_json::from_slice(&fs::read(&a.config)?)?;
    if let Some(s) = ctx.seed_flag {
        cfg.seed = s;
    }
    m.seed = cfg.seed;
    m.config["resolved"] = serde_json::to_value(&cfg)?;
    let data = m.stage("generate", || generate_bags(&cfg))?;
    fs::create_dir_all(&a.out)?;
    m.stage("write", || -> Result<()> {
        for bag in &data.bags {
            write_bag(bag, a.out.join(format!("{}.pfb", bag.case_id)))?;
        }
        write_json(&a.out.join("ground_truth.json"), &json!({ "config": cfg, "directions": data.directions, "cases": data.truth }))
    })?;
    write_json(&a.out.join("synth.manifest.json"), &m)
}

fn load_bags(dir: &Path, m: &mut RunManifest) -> Result<Vec<FeatureBag>> {
    m.add_input("bags", dir)?;
    let bags = m.stage("load", || read_bag_dir(dir))?;
    if bags.is_empty() {
        return Err(Error::invalid(format!("no .pfb bags in {}", dir.display())));
    }
    Ok(bags)
}

fn train_cmd(a: &TrainArgs, ctx: &Ctx) -> Result<()> {
    let mut m = ctx.manifest("train", a)?;
    let bags = load_bags(&a.bags, &mut m)?;
    let split = match &a.split {
        Some(p) => {
            m.add_input("split", p)?;
            read_split(fs::File::open(p)?)?
        }
        None => {
            let s = split_dataset(&bags, SplitRatios::default(), ctx.seed, true)?;
            let path = sidecar_path(&a.out, ".split.csv");
            write_split(&s, fs::File::create(&path)?)?;
            s
        }
    };
    let cfg = TrainConfig {
        hidden: a.hidden,
        dropout: a.dropout,
        learning_rate: a.lr,
        weight_decay: a.weight_decay,
        decoupled_weight_decay: !a.coupled_decay,
        patience: a.patience,
        max_epochs: a.max_epochs,
        seed: ctx.seed,
        ..TrainConfig::new(a.task)
    };
    let (model, report) = m.stage("train", || train(&bags, &split, &cfg))?;
    write_model(&model, &a.out)?;
    write_json(
        &sidecar_path(&a.out, ".train.json"),
        &json!({
            "best_epoch": report.best_epoch,
            "epochs": report.epochs(),
            "stop_reason": report.stop_reason.to_string(),
            "best_val_loss": report.best_val_loss(),
            "train_loss": report.train_loss,
            "val_loss": report.val_loss,
        }),
    )?;
    write_json(&manifest_path(&a.out), &m)
}

fn predict(a: &PredictArgs, ctx: &Ctx) -> Result<()> {
    let mut m = ctx.manifest("predict", a)?;
    m.add_input("model", &a.model)?;
    let model = read_model(&a.model)?;
    let mut bags = load_bags(&a.bags, &mut m)?;
    if let (Some(path), Some(subset)) = (&a.split, a.subset) {
        m.add_input("split", path)?;
        let split = read_split(fs::File::open(path)?)?;
        bags.retain(|b| split.get(&b.case_id) == Some(subset));
        if bags.is_empty() {
            return Err(Error::invalid(format!("no bags in the {subset} split")));
        }
    }
    let pred = m.stage("predict", || predict_set(&model, &bags))?;
    write_predictions_file(&pred, &a.out)?;
    write_json(&manifest_path(&a.out), &m)
}

#[derive(Serialize)]
struct AttentionRow {
    patch_index: usize,
    slide_id: String,
    x: u32,
    y: u32,
    patch_size: u32,
    weight: f64,
    rank: usize,
}

fn attend(a: &AttendArgs, ctx: &Ctx) -> Result<()> {
    let mut m = ctx.manifest("attend", a)?;
    m.add_input("model", &a.model)?;
    m.add_input("bag", &a.bag)?;
    let model = read_model(&a.model)?;
    let bag = read_bag(&a.bag)?;
    let mut records = m.stage("attention", || model.export_attention(&bag))?;
    if let Some(k) = a.top {
        records.truncate(k);
    }
    let mut w = csv::Writer::from_path(&a.out)?;
    for r in records {
        w.serialize(AttentionRow {
            patch_index: r.patch_index,
            slide_id: r.slide_id,
            x: r.coord.x,
            y: r.coord.y,
            patch_size: r.coord.patch_size,
            weight: r.weight,
            rank: r.rank,
        })?;
    }
    w.flush()?;
    write_json(&manifest_path(&a.out), &m)
}

fn load_predictions(path: &Path, label: &str, m: &mut RunManifest) -> Result<PredictionSet> {
    m.add_input(label, path)?;
    read_predictions_file(path)
}

fn applicable_metrics(pred: &PredictionSet) -> Vec<MetricKind> {
    let survival = pred.n_classes().is_none();
    MetricKind::ALL.into_iter().filter(|k| k.is_survival() == survival).collect()
}

fn check_metric(pred: &PredictionSet, metric: MetricKind) -> Result<()> {
    if metric.is_survival() != pred.n_classes().is_none() {
        return Err(Error::invalid(format!("metric {metric} does not apply to these predictions")));
    }
    Ok(())
}

fn eval(a: &EvalArgs, ctx: &Ctx) -> Result<()> {
    let mut m = ctx.manifest("eval", a)?;
    let pred = load_predictions(&a.pred, "pred", &mut m)?;
    let plan = ReplicatePlan::new(ctx.seed, a.reps)?;
    let mut metrics = BTreeMap::new();
    let mut undefined = Vec::new();
    for kind in applicable_metrics(&pred) {
        let result = m.stage(kind.name(), || case_bootstrap(&pred, |p| kind.evaluate(p), &plan, None));
        match result {
            Ok(b) => match Interval::from_bootstrap(&b) {
                Some(i) => {
                    metrics.insert(kind.name(), i);
                }
                None => undefined.push(kind.name()),
            },
            Err(e) if e.is_undefined_metric() => undefined.push(kind.name()),
            Err(e) => return Err(e),
        }
    }
    let mut report = json!({
        "n_cases": pred.len(),
        "reps": a.reps,
        "seed": ctx.seed,
        "metrics": metrics,
        "undefined": undefined,
    });
    if let Some(k) = pred.n_classes() {
        let labels = pred.labels();
        let per_class: BTreeMap<String, Option<f64>> = (0..k)
            .map(|c| {
                let y: Vec<bool> = labels.iter().map(|&l| l == c).collect();
                (c.to_string(), ovr_auc(&pred.class_scores(c), &y).ok())
            })
            .collect();
        report["per_class_auc"] = json!(per_class);
        if let Ok(points) = per_class_youden(&pred) {
            report["youden_thresholds"] = json!(points.iter().map(|(c, p)| (c.to_string(), p.threshold)).collect::<BTreeMap<_, _>>());
        }
    }
    if let Some(path) = &a.report {
        let mut w = csv::Writer::from_path(sidecar_path(path, ".metrics.csv"))?;
        w.write_record(["metric", "value", "ci_lo", "ci_hi", "text"])?;
        for (name, i) in &metrics {
            w.write_record([name.to_string(), i.value.to_string(), i.ci_lo.to_string(), i.ci_hi.to_string(), i.text.clone()])?;
        }
        w.flush()?;
    }
    emit(a.report.as_deref(), &report, &m)
}

fn bootstrap(a: &BootstrapArgs, ctx: &Ctx) -> Result<()> {
    let mut m = ctx.manifest("bootstrap", a)?;
    let pred = load_predictions(&a.pred, "pred", &mut m)?;
    check_metric(&pred, a.metric)?;
    let plan = ReplicatePlan::new(ctx.seed, a.reps)?;
    let b = m.stage("bootstrap", || case_bootstrap(&pred, |p| a.metric.evaluate(p), &plan, None))?;
    let report = json!({
        "metric": a.metric.name(),
        "seed": ctx.seed,
        "reps": a.reps,
        "interval": Interval::from_bootstrap(&b),
        "result": b,
    });
    emit(a.out.as_deref(), &report, &m)
}

fn compare(a: &CompareArgs, ctx: &Ctx) -> Result<()> {
    let mut m = ctx.manifest("compare", a)?;
    let pa = load_predictions(&a.pred_a, "pred_a", &mut m)?;
    let pb = load_predictions(&a.pred_b, "pred_b", &mut m)?;
    if pa.kind != pb.kind {
        return Err(Error::invalid("the two prediction files have different kinds"));
    }
    let ids = |p: &PredictionSet| {
        let mut v: Vec<(String, String)> = p.cases.iter().map(|c| (c.case_id.clone(), format!("{:?}", c.target))).collect();
        v.sort();
        v
    };
    if ids(&pa) != ids(&pb) {
        return Err(Error::invalid("paired comparison needs the same cases with the same targets in both files"));
    }
    let metrics = if a.metric.is_empty() { applicable_metrics(&pa) } else { a.metric.clone() };
    let plan = ReplicatePlan::new(ctx.seed, a.reps)?;
    let mut rows = Vec::new();
    let mut pvalues = Vec::new();
    for kind in &metrics {
        check_metric(&pa, *kind)?;
        let (ba, bb) = m.stage(kind.name(), || -> Result<_> {
            Ok((case_bootstrap(&pa, |p| kind.evaluate(p), &plan, None)?, case_bootstrap(&pb, |p| kind.evaluate(p), &plan, None)?))
        })?;
        let delta = paired_delta_ci(&ba, &bb)?;
        let (ra, rb): (Vec<f64>, Vec<f64>) =
            ba.replicates.iter().zip(&bb.replicates).filter_map(|(x, y)| Some(((*x)?, (*y)?))).unzip();
        let w = paired_wilcoxon(&ra, &rb)?;
        pvalues.push(w.p_value);
        rows.push(json!({
            "metric": kind.name(),
            "a": Interval::from_bootstrap(&ba),
            "b": Interval::from_bootstrap(&bb),
            "delta": delta,
            "delta_text": fmt_ci(delta.delta, delta.ci_lo, delta.ci_hi),
            "wilcoxon": w,
            "p_raw": w.p_value,
        }));
    }
    if a.holm {
        for (row, adj) in rows.iter_mut().zip(holm(&pvalues)?) {
            row["p_holm"] = json!(adj);
        }
    }
    let report = json!({ "seed": ctx.seed, "reps": a.reps, "comparisons": rows });
    emit(a.out.as_deref(), &report, &m)
}

/// Positive-class scores and labels, one-vs-rest for multiclass sets.
fn binary_view(pred: &PredictionSet, positive: usize) -> Result<(Vec<f64>, Vec<bool>)> {
    let k = pred.n_classes().ok_or_else(|| Error::invalid("this command needs classification predictions"))?;
    if positive >= k {
        return Err(Error::invalid(format!("positive class {positive} out of range for {k} classes")));
    }
    Ok((pred.class_scores(positive), pred.labels().into_iter().map(|l| l == positive).collect()))
}

fn dca(a: &DcaArgs, ctx: &Ctx) -> Result<()> {
    let mut m = ctx.manifest("dca", a)?;
    let pred = load_predictions(&a.pred, "pred", &mut m)?;
    let (p, y) = binary_view(&pred, a.positive_class)?;
    let curve = m.stage("dca", || dca_curve(&p, &y, &default_grid()))?;
    let mut w = csv::Writer::from_path(&a.out)?;
    w.write_record(["p_t", "nb_model", "nb_all", "nb_none"])?;
    for pt in curve {
        w.write_record([pt.p_t, pt.nb_model, pt.nb_treat_all, pt.nb_treat_none].map(|v| v.to_string()))?;
    }
    w.flush()?;
    write_json(&manifest_path(&a.out), &m)
}

fn triage(a: &TriageArgs, ctx: &Ctx) -> Result<()> {
    let mut m = ctx.manifest("triage", a)?;
    let pred = load_predictions(&a.pred, "pred", &mut m)?;
    let (p, y) = binary_view(&pred, a.positive_class)?;
    let point = m.stage("sweep", || triage_sweep(&p, &y, a.ppv_floor))?;
    let mut report = json!({
        "ppv_floor": a.ppv_floor,
        "point": point,
        "text": {
            "threshold": fmt3(point.threshold),
            "deferred": format!("{}/{} ({:.1}%)", point.deferred_count, point.total_count, 100.0 * point.defer_fraction),
            "ppv": fmt3(point.ppv),
            "sensitivity": fmt3(point.sensitivity),
        },
    });
    if let Some(floor) = a.spec_floor {
        report["missed_at_specificity"] = json!(missed_at_specificity(&p, &y, floor)?);
        report["spec_floor"] = json!(floor);
    }
    emit(a.out.as_deref(), &report, &m)
}

fn triage_pool(a: &TriagePoolArgs, ctx: &Ctx) -> Result<()> {
    let mut m = ctx.manifest("triage-pool", a)?;
    let mut points = Vec::new();
    for (i, path) in a.points.iter().enumerate() {
        m.add_input(&format!("points[{i}]"), path)?;
        let v: Value = serde_json::from_slice(&fs::read(path)?)?;
        let point: TriageOperatingPoint = serde_json::from_value(v.get("point").cloned().unwrap_or(v))?;
        points.push(point);
    }
    let pooled = pool_markers(&points)?;
    let report = json!({
        "markers": points.len(),
        "pooled": pooled,
        "text": {
            "deferred": format!("{}/{} ({:.1}%)", pooled.deferred, pooled.total, 100.0 * pooled.defer_fraction),
            "ppv": fmt3(pooled.ppv),
        },
    });
    emit(a.out.as_deref(), &report, &m)
}

fn survival(a: &SurvivalArgs, ctx: &Ctx) -> Result<()> {
    let mut m = ctx.manifest("survival", a)?;
    let pred = load_predictions(&a.pred, "pred", &mut m)?;
    if pred.n_classes().is_some() {
        return Err(Error::invalid("survival needs survival predictions"));
    }
    let plan = ReplicatePlan::new(ctx.seed, a.reps)?;
    let c = m.stage("c_index", || case_bootstrap(&pred, c_index_of, &plan, None))?;
    let risks: Vec<f64> = risk_scores(&pred)?.into_iter().map(|r| r.r).collect();
    let groups = median_split(&risks)?;
    let records = pred.survival_records();
    let pick = |g: RiskGroup| records.iter().zip(&groups).filter(|(_, x)| **x == g).map(|(r, _)| *r).collect::<Vec<_>>();
    let (low, high) = (pick(RiskGroup::Low), pick(RiskGroup::High));
    let km_low = km_estimate(&low)?;
    let km_high = if high.is_empty() { None } else { Some(km_estimate(&high)?) };
    let lr = if high.is_empty() { None } else { logrank(&low, &high).ok() };
    let report = json!({
        "n_cases": pred.len(),
        "reps": a.reps,
        "seed": ctx.seed,
        "c_index": Interval::from_bootstrap(&c),
        "groups": { "low": low.len(), "high": high.len() },
        "logrank": lr,
        "km": { "low": km_low, "high": km_high },
    });
    if let Some(out) = &a.out {
        let mut w = csv::Writer::from_path(sidecar_path(out, ".km.csv"))?;
        w.write_record(["group", "time", "survival", "at_risk", "events"])?;
        for (name, curve) in [("low", Some(&km_low)), ("high", km_high.as_ref())] {
            let Some(curve) = curve else { continue };
            for i in 0..curve.times.len() {
                w.write_record([
                    name.to_string(),
                    curve.times[i].to_string(),
                    curve.survival[i].to_string(),
                    curve.at_risk[i].to_string(),
                    curve.events[i].to_string(),
                ])?;
            }
        }
        w.flush()?;
    }
    emit(a.out.as_deref(), &report, &m)
}

fn rct(a: &RctArgs, ctx: &Ctx) -> Result<()> {
    let mut m = ctx.manifest("rct", a)?;
    m.add_input("readers", &a.readers)?;
    let obs = read_readers_file(&a.readers)?;
    let r = m.stage("analysis", || rct_report(&obs, a.reps, a.perms, ctx.seed))?;

    let mut tables = json!({});
    if let Some(row) = r.accuracy.row(None, None) {
        tables["primary"] = json!({
            "unassisted_accuracy": format!("{:.1}%", 100.0 * row.unassisted.accuracy().unwrap_or(f64::NAN)),
            "assisted_accuracy": format!("{:.1}%", 100.0 * row.assisted.accuracy().unwrap_or(f64::NAN)),
            "change_points": format!("{:+.1}", row.delta_points),
        });
    }
    let models: BTreeMap<&str, Value> = r
        .models
        .iter()
        .map(|mr| {
            let text = match &mr.effect {
                Some(e) if mr.measure == "difference" => json!(fmt_ci(e.beta, e.beta_lo, e.beta_hi)),
                Some(e) => json!(fmt_ci(e.ratio, e.ratio_lo, e.ratio_hi)),
                None => json!(mr.error),
            };
            (mr.model.as_str(), text)
        })
        .collect();
    tables["secondary"] = json!(models);
    if let Some(k) = &r.agreement {
        tables["interrater"] = json!({
            "unassisted": fmt_ci(k.unassisted.kappa, k.unassisted.ci_lo, k.unassisted.ci_hi),
            "assisted": fmt_ci(k.assisted.kappa, k.assisted.ci_lo, k.assisted.ci_hi),
            "delta": fmt_ci(k.delta, k.delta_ci_lo, k.delta_ci_hi),
            "p": fmt3(k.p_value),
        });
    }
    if let Some(u) = &r.utility {
        let c = &u.counts;
        let pct = |n: usize| format!("{n} ({:.1}%)", c.percent(n));
        tables["ai_utility"] = json!({
            "improved": pct(c.improved),
            "confirmed": pct(c.confirmed),
            "resilient": pct(c.resilient),
            "failed": pct(c.failed),
            "missed_opportunity": pct(c.missed_opportunity),
            "accuracy_loss": pct(c.accuracy_loss),
            "strict_harm": pct(c.strict_harm),
            "both_failed": pct(c.both_failed),
            "mcnemar_p": u.mcnemar_p,
        });
    }
    let report = json!({ "seed": ctx.seed, "tables": tables, "detail": r });
    emit(a.out.as_deref(), &report, &m)
}
