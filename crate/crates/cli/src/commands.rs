//! Subcommand definitions and their implementations.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use pointmatch_core::evaluation::{
    image_counts, Aggregate, ClassCounts, Dataset, EvalReport, ProtocolComparison, DEFAULT_RADIUS,
};
use pointmatch_core::synth::{figure3_fixture, gen_dataset, identity_confusion, PerturbationModel};
use pointmatch_core::train_match::{build_cost_matrix, losses_for, match_hybrid};
use pointmatch_core::{EvalConfig, LabeledPoint, LossBreakdown, MatchConfig, MatchOutcome, PredictedPoint, Protocol};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::CliError;
use crate::manifest::RunManifest;
use crate::pointfile::{FileFormat, Layout, PointFile, PointRecord};
use crate::report::{pretty, render_comparison, render_eval, ClassNames, OutputFormat};

#[derive(Debug, Parser)]
#[command(name = "pointmatch", version, about = "Point-set matching, evaluation and synthetic data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score predictions against ground truth under one protocol.
    Evaluate(EvaluateArgs),
    /// Score under all three protocols with deltas relative to `matched`.
    Compare(CompareArgs),
    /// Run the training matcher and report pairs and losses per image.
    Match(MatchArgs),
    /// Generate ground truth and perturbed predictions.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Ground-truth point file (`-` for stdin). With neither file given, a
    /// bundle from `synth` is read from stdin.
    #[arg(long)]
    pub gt: Option<PathBuf>,
    /// Prediction point file (`-` for stdin).
    #[arg(long)]
    pub pred: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// table, json or csv.
    #[arg(long, default_value = "table")]
    pub format: String,
    /// Write the report here instead of stdout.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScoringArgs {
    /// Match radius in pixels.
    #[arg(long, default_value_t = DEFAULT_RADIUS, allow_negative_numbers = true)]
    pub radius: f64,
    /// dataset-counts or per-image-mean.
    #[arg(long, default_value = "dataset-counts")]
    pub aggregate: String,
    /// Comma-separated class names bound to ids 1, 2, ...
    #[arg(long)]
    pub classes: Option<String>,
    /// Comma-separated class ids to score. Defaults to the ids named by
    /// --classes, else every id present in the inputs.
    #[arg(long)]
    pub class_ids: Option<String>,
    /// Worker threads for per-image scoring (0 = all cores).
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub scoring: ScoringArgs,
    /// matched, raw-hungarian or greedy.
    #[arg(long, default_value = "matched")]
    pub protocol: String,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub scoring: ScoringArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct MatchArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Weight of the pixel distance in the matching cost.
    #[arg(long, default_value_t = pointmatch_core::train_match::DEFAULT_TAU)]
    pub tau: f64,
    /// Proposals per ground truth in the one-to-many branch.
    #[arg(long, default_value_t = pointmatch_core::train_match::DEFAULT_BETA)]
    pub beta: usize,
    #[arg(long, default_value_t = pointmatch_core::train_match::DEFAULT_BG_WEIGHT)]
    pub bg_weight: f64,
    /// Cross-entropy weight shared by all foreground classes.
    #[arg(long, default_value_t = pointmatch_core::train_match::DEFAULT_FG_WEIGHT)]
    pub fg_weight: f64,
    #[arg(long, default_value_t = pointmatch_core::train_match::DEFAULT_REG_WEIGHT)]
    pub reg_weight: f64,
    #[arg(long, default_value_t = pointmatch_core::train_match::DEFAULT_ONE2MANY_WEIGHT)]
    pub one2many_weight: f64,
    /// table or json print every pair; csv prints one loss row per image.
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Emit a named fixture instead of sampling (only `figure3`).
    #[arg(long)]
    pub fixture: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Per-axis Gaussian jitter in pixels.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub jitter: f64,
    /// Probability of dropping each ground-truth point.
    #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
    pub drop: f64,
    /// Expected spurious predictions per image.
    #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
    pub spurious: f64,
    /// Expected ground-truth points per image.
    #[arg(long, default_value_t = 30.0, allow_negative_numbers = true)]
    pub density: f64,
    #[arg(long, default_value_t = 224.0, allow_negative_numbers = true)]
    pub width: f64,
    #[arg(long, default_value_t = 224.0, allow_negative_numbers = true)]
    pub height: f64,
    #[arg(long, default_value_t = 4)]
    pub num_classes: usize,
    #[arg(long, default_value_t = 1)]
    pub images: usize,
    /// Write gt, pred and model files here; otherwise a JSON bundle goes to stdout.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Point-file format inside --out-dir: csv or json.
    #[arg(long, default_value = "csv")]
    pub format: String,
}

/// Runs a parsed command, reading bundles from `stdin` and writing reports to `stdout`.
pub fn run(cli: Cli, stdin: &mut dyn Read, stdout: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Evaluate(args) => evaluate(args, stdin, stdout),
        Command::Compare(args) => compare(args, stdin, stdout),
        Command::Match(args) => run_match(args, stdin, stdout),
        Command::Synth(args) => synth(args, stdout),
    }
}

struct Inputs {
    gt: PointFile,
    pred: PointFile,
    manifest_inputs: Vec<(String, Vec<u8>)>,
}

fn load_inputs(args: &InputArgs, stdin: &mut dyn Read) -> Result<Inputs, CliError> {
    match (&args.gt, &args.pred) {
        (Some(g), Some(p)) => {
            if g == Path::new("-") && p == Path::new("-") {
                return Err(CliError::Config("--gt and --pred cannot both read stdin".into()));
            }
            let (gt, gt_bytes) = PointFile::read(g)?;
            let (pred, pred_bytes) = PointFile::read(p)?;
            Ok(Inputs {
                gt,
                pred,
                manifest_inputs: vec![("gt".into(), gt_bytes), ("pred".into(), pred_bytes)],
            })
        }
        (None, None) => {
            let mut bytes = Vec::new();
            stdin
                .read_to_end(&mut bytes)
                .map_err(|e| CliError::io(Path::new("-"), e))?;
            let (gt, pred) = parse_bundle(&bytes)?;
            Ok(Inputs {
                gt,
                pred,
                manifest_inputs: vec![("bundle".into(), bytes)],
            })
        }
        _ => Err(CliError::Config("--gt and --pred must be given together".into())),
    }
}

/// Splits a `{model, gt, pred}` bundle into its two point files.
pub fn parse_bundle(bytes: &[u8]) -> Result<(PointFile, PointFile), CliError> {
    let stdin = Path::new("<stdin>");
    let value: Value = serde_json::from_slice(bytes).map_err(|e| {
        CliError::Parse {
            file: Some(stdin.into()),
            line: Some(e.line() as u64),
            message: format!("invalid bundle: {e}"),
        }
    })?;
    let side = |key: &str| -> Result<PointFile, CliError> {
        let records = value
            .get(key)
            .ok_or_else(|| CliError::parse(format!("bundle has no {key:?} array")).in_file(stdin))?;
        let raw = serde_json::to_vec(records).expect("value serializes");
        PointFile::parse_json(&raw).map_err(|e| e.in_file(stdin))
    };
    Ok((side("gt")?, side("pred")?))
}

fn parse_id_list(list: &str) -> Result<Vec<u32>, CliError> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<u32>()
                .map_err(|_| CliError::Config(format!("invalid class id {s:?}")))
        })
        .collect()
}

fn resolve_class_ids(scoring: &ScoringArgs, names: &ClassNames, dataset: &Dataset) -> Result<Vec<u32>, CliError> {
    if let Some(list) = &scoring.class_ids {
        return parse_id_list(list);
    }
    if !names.0.is_empty() {
        return Ok(names.0.keys().copied().collect());
    }
    let found = dataset.class_ids();
    Ok(if found.is_empty() { vec![1] } else { found })
}

fn dataset_of(inputs: &Inputs) -> Result<Dataset, CliError> {
    Ok(Dataset::from_collections(
        inputs.gt.labeled_by_image(),
        inputs.pred.labeled_by_image(),
    )?)
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {jobs} workers: {e}")))
}

fn score(dataset: &Dataset, config: &EvalConfig, pool: &rayon::ThreadPool) -> Result<EvalReport, CliError> {
    config.validate()?;
    let images: Vec<_> = dataset.images().map(|(_, img)| img).collect();
    let per_image: Vec<Vec<ClassCounts>> = pool.install(|| {
        images
            .par_iter()
            .map(|img| image_counts(img, config))
            .collect::<Result<_, _>>()
    })?;
    Ok(EvalReport::from_image_counts(&per_image, config))
}

fn emit(output: &OutputArgs, text: &str, stdout: &mut dyn Write) -> Result<(), CliError> {
    match &output.output {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::io(path, e)),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| CliError::io(Path::new("<stdout>"), e)),
    }
}

fn manifest_for(config: &impl Serialize, inputs: &Inputs) -> RunManifest {
    let mut manifest = RunManifest::new(config);
    for (name, bytes) in &inputs.manifest_inputs {
        manifest.add_input(name.clone(), bytes);
    }
    manifest
}

fn names_of(scoring: &ScoringArgs) -> ClassNames {
    scoring.classes.as_deref().map(ClassNames::from_list).unwrap_or_default()
}

fn evaluate(args: EvaluateArgs, stdin: &mut dyn Read, stdout: &mut dyn Write) -> Result<(), CliError> {
    let format: OutputFormat = args.output.format.parse()?;
    let protocol: Protocol = args.protocol.parse()?;
    let aggregate: Aggregate = args.scoring.aggregate.parse()?;
    let inputs = load_inputs(&args.input, stdin)?;
    let dataset = dataset_of(&inputs)?;
    let names = names_of(&args.scoring);
    let config = EvalConfig {
        radius: args.scoring.radius,
        protocol,
        class_ids: resolve_class_ids(&args.scoring, &names, &dataset)?,
        aggregate,
    };
    config.validate()?;
    let report = score(&dataset, &config, &pool(args.scoring.jobs)?)?;
    let manifest = manifest_for(&config, &inputs);
    emit(&args.output, &render_eval(&report, &names, &manifest, format), stdout)
}

fn compare(args: CompareArgs, stdin: &mut dyn Read, stdout: &mut dyn Write) -> Result<(), CliError> {
    let format: OutputFormat = args.output.format.parse()?;
    let aggregate: Aggregate = args.scoring.aggregate.parse()?;
    let inputs = load_inputs(&args.input, stdin)?;
    let dataset = dataset_of(&inputs)?;
    let names = names_of(&args.scoring);
    let class_ids = resolve_class_ids(&args.scoring, &names, &dataset)?;
    let workers = pool(args.scoring.jobs)?;
    let reports = Protocol::ALL
        .iter()
        .map(|&protocol| {
            let config = EvalConfig {
                radius: args.scoring.radius,
                protocol,
                class_ids: class_ids.clone(),
                aggregate,
            };
            score(&dataset, &config, &workers)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let cmp = ProtocolComparison::from_reports(reports);
    let echo = json!({
        "radius": args.scoring.radius,
        "protocols": Protocol::ALL,
        "class_ids": class_ids,
        "aggregate": aggregate,
    });
    let manifest = manifest_for(&echo, &inputs);
    emit(&args.output, &render_comparison(&cmp, &names, &manifest, format), stdout)
}

#[derive(Debug, Serialize)]
struct PairRow {
    gt: usize,
    pred: usize,
    distance: f64,
    cost: f64,
}

#[derive(Debug, Serialize)]
struct BranchDump {
    pairs: Vec<PairRow>,
    negatives: Vec<usize>,
}

#[derive(Debug, Serialize)]
struct ImageDump {
    image_id: String,
    gts: usize,
    proposals: usize,
    one2one: BranchDump,
    one2many: BranchDump,
    losses: LossBreakdown,
}

fn branch_dump(outcome: &MatchOutcome, gts: &[LabeledPoint], preds: &[PredictedPoint], costs: &pointmatch_core::CostMatrix) -> BranchDump {
    BranchDump {
        pairs: outcome
            .matched
            .iter()
            .map(|&(i, j)| PairRow {
                gt: i,
                pred: j,
                distance: gts[i].distance_to(preds[j].x, preds[j].y),
                cost: costs.get(i, j),
            })
            .collect(),
        negatives: outcome.negatives.clone(),
    }
}

fn run_match(args: MatchArgs, stdin: &mut dyn Read, stdout: &mut dyn Write) -> Result<(), CliError> {
    let format: OutputFormat = args.output.format.parse()?;
    let inputs = load_inputs(&args.input, stdin)?;
    let (num_classes, one_class) = match inputs.pred.layout() {
        Layout::PerClass(t) => (t, false),
        Layout::Single => (1, true),
        Layout::Plain => {
            return Err(CliError::parse("prediction file needs confidence columns for matching"));
        }
    };
    let mut config = MatchConfig::with_defaults(num_classes);
    config.tau = args.tau;
    config.beta = args.beta;
    config.class_weights[0] = args.bg_weight;
    for w in &mut config.class_weights[1..] {
        *w = args.fg_weight;
    }
    config.reg_weight = args.reg_weight;
    config.one2many_weight = args.one2many_weight;
    config.validate()?;

    let preds_by_image = inputs.pred.predicted_by_image()?;
    let mut gts_by_image = inputs.gt.labeled_by_image();
    if one_class {
        // single-confidence predictions carry no per-class scores
        for (_, pts) in &mut gts_by_image {
            for p in pts.iter_mut() {
                p.class_id = 1;
            }
        }
    }
    let ids: BTreeSet<String> = gts_by_image
        .iter()
        .map(|(id, _)| id.clone())
        .chain(preds_by_image.iter().map(|(id, _)| id.clone()))
        .collect();

    let mut dumps = Vec::with_capacity(ids.len());
    for id in ids {
        let gts = gts_by_image
            .iter()
            .find(|(k, _)| *k == id)
            .map(|(_, v)| v.clone())
            .unwrap_or_default();
        let preds = preds_by_image
            .iter()
            .find(|(k, _)| *k == id)
            .map(|(_, v)| v.clone())
            .unwrap_or_default();
        let costs = build_cost_matrix(&gts, &preds, config.tau)?;
        let (one, many) = match_hybrid(&gts, &preds, &config)?;
        let losses = losses_for(&one, &many, &gts, &preds, &config)?;
        dumps.push(ImageDump {
            one2one: branch_dump(&one, &gts, &preds, &costs),
            one2many: branch_dump(&many, &gts, &preds, &costs),
            gts: gts.len(),
            proposals: preds.len(),
            image_id: id,
            losses,
        });
    }

    let manifest = manifest_for(&config, &inputs);
    let text = match format {
        OutputFormat::Json => pretty(&json!({ "images": dumps, "manifest": manifest })),
        OutputFormat::Csv => {
            let mut out = manifest.comment_lines();
            out.push_str("image_id,gts,proposals,pairs_1v1,pairs_1vn,cls_1v1,reg_1v1,cls_1vn,reg_1vn,combined\n");
            for d in &dumps {
                let l = d.losses;
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{}",
                    d.image_id,
                    d.gts,
                    d.proposals,
                    d.one2one.pairs.len(),
                    d.one2many.pairs.len(),
                    l.cls_1v1,
                    l.reg_1v1,
                    l.cls_1vn,
                    l.reg_1vn,
                    l.combined
                );
            }
            out
        }
        OutputFormat::Table => match_table(&dumps, &manifest),
    };
    emit(&args.output, &text, stdout)
}

fn match_table(dumps: &[ImageDump], manifest: &RunManifest) -> String {
    let mut out = String::new();
    for d in dumps {
        let _ = writeln!(out, "image {}: {} gts, {} proposals", d.image_id, d.gts, d.proposals);
        for (name, branch) in [("one-to-one", &d.one2one), ("one-to-many", &d.one2many)] {
            let _ = writeln!(out, "  {name}");
            let _ = writeln!(out, "  {:>6}{:>6}{:>12}{:>12}", "gt", "pred", "distance", "cost");
            for p in &branch.pairs {
                let _ = writeln!(out, "  {:>6}{:>6}{:>12.4}{:>12.4}", p.gt, p.pred, p.distance, p.cost);
            }
            let negs: Vec<String> = branch.negatives.iter().map(usize::to_string).collect();
            let _ = writeln!(out, "  negatives: [{}]", negs.join(", "));
        }
        let l = d.losses;
        let _ = writeln!(
            out,
            "  loss: cls_1v1 {:.6}  reg_1v1 {:.6}  cls_1vn {:.6}  reg_1vn {:.6}  combined {:.6}\n",
            l.cls_1v1, l.reg_1v1, l.cls_1vn, l.reg_1vn, l.combined
        );
    }
    out.push_str(&manifest.comment_lines());
    out
}

fn synth(args: SynthArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let file_format = match args.format.as_str() {
        "csv" => FileFormat::Csv,
        "json" => FileFormat::Json,
        other => return Err(CliError::Config(format!("unknown format {other:?}"))),
    };
    let (echo, gt, pred) = match args.fixture.as_deref() {
        Some("figure3") => {
            let (g, p) = figure3_fixture();
            let to_file = |pts: &[LabeledPoint]| PointFile::new(pts.iter().map(|q| PointRecord::labeled("0", q)).collect());
            (json!({ "fixture": "figure3" }), to_file(&g), to_file(&p))
        }
        Some(other) => return Err(CliError::Config(format!("unknown fixture {other:?}"))),
        None => {
            if args.num_classes == 0 {
                return Err(CliError::Config("--num-classes must be >= 1".into()));
            }
            let model = PerturbationModel {
                seed: args.seed,
                jitter_sigma: args.jitter,
                drop_rate: args.drop,
                spurious_rate: args.spurious,
                confusion: identity_confusion(args.num_classes),
                extent: (args.width, args.height),
                density: args.density,
            };
            model.validate()?;
            let mut gt = Vec::new();
            let mut pred = Vec::new();
            for (id, g, p) in gen_dataset(&model, args.images)? {
                gt.extend(g.iter().map(|q| PointRecord::labeled(id.clone(), q)));
                pred.extend(p.iter().map(|q| PointRecord::labeled(id.clone(), q)));
            }
            (json!({ "model": model, "images": args.images }), PointFile::new(gt), PointFile::new(pred))
        }
    };

    match &args.out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
            let ext = match file_format {
                FileFormat::Csv => "csv",
                FileFormat::Json => "json",
            };
            gt.write(&dir.join(format!("gt.{ext}")))?;
            pred.write(&dir.join(format!("pred.{ext}")))?;
            let model_path = dir.join("model.json");
            std::fs::write(&model_path, pretty(&echo)).map_err(|e| CliError::io(&model_path, e))
        }
        None => {
            let bundle = json!({ "model": echo, "gt": gt.records, "pred": pred.records });
            stdout
                .write_all(pretty(&bundle).as_bytes())
                .map_err(|e| CliError::io(Path::new("<stdout>"), e))
        }
    }
}
