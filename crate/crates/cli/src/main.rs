use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use scenegame::features::{extract_features, feature_names};
use scenegame::harness::{self, keyframe_indices, label_to_action, KeyframePolicy, PriorKind, RunConfig, Solver};
use scenegame::image::{read_pnm, write_pnm, SCENE_CLASSES};
use scenegame::mrf::{
    build_registration_game, build_segmentation_game, displacement_regularity, initial_labeling, nash_check, solve_anneal,
    solve_icm, trace_to_csv, EnergyModel, Prior, SmoothnessField,
};
use scenegame::net::{self, load_checkpoint, save_checkpoint, Dataset, NetSpec};
use scenegame::{gmm, DisplacementLabelSet, Image, LabelField};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Game-theoretic MRF labeling and synthetic scene recognition.
#[derive(Parser)]
#[command(name = "scenegame", version)]
struct Cli {
    /// Master seed; overrides `seed` in the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file. Text outputs go to stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Flat `key = value` config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Enhance a grayscale PGM (equalize, lowpass, highpass, haar or none).
    Preprocess(PreprocessArgs),
    /// Fit a 1-D Gaussian mixture to the intensities of a PGM.
    GmmFit(GmmFitArgs),
    /// Segment a PGM with the labeling game over mixture components.
    Segment(SegmentArgs),
    /// Register two PGMs with the displacement labeling game.
    Register(RegisterArgs),
    /// Extract block features from one or more PGMs as CSV.
    Features(FeaturesArgs),
    /// Train the scene classifier on synthetic scenes and save a checkpoint.
    Train(TrainArgs),
    /// Classify PGMs with a checkpoint, or score it on fresh synthetic scenes.
    Eval(EvalArgs),
    /// Run the accuracy experiment and write the report CSV.
    Experiment,
    /// List keyframe indices for a video of `total` frames.
    Keyframes(KeyframesArgs),
}

#[derive(Args)]
struct PreprocessArgs {
    input: PathBuf,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    cutoff: Option<f64>,
}

#[derive(Args)]
struct GmmFitArgs {
    input: PathBuf,
    #[arg(long)]
    components: Option<usize>,
}

#[derive(Args)]
struct SegmentArgs {
    input: PathBuf,
    #[arg(long)]
    components: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    /// icm or anneal.
    #[arg(long)]
    solver: Option<String>,
    /// Write the per-sweep energy trace CSV here.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct RegisterArgs {
    fixed: PathBuf,
    moving: PathBuf,
    #[arg(long)]
    radius: Option<u32>,
    #[arg(long)]
    beta: Option<f64>,
}

#[derive(Args)]
struct FeaturesArgs {
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, default_value_t = 20)]
    size: usize,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    images_per_class: Option<usize>,
    /// Write the per-epoch loss CSV here.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    /// Images to classify; without them the model is scored on synthetic scenes.
    inputs: Vec<PathBuf>,
}

#[derive(Args)]
struct KeyframesArgs {
    total: usize,
    #[arg(long)]
    fps: Option<f64>,
    #[arg(long)]
    interval: Option<f64>,
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Preprocess(_) => "preprocess",
        Command::GmmFit(_) => "gmm-fit",
        Command::Segment(_) => "segment",
        Command::Register(_) => "register",
        Command::Features(_) => "features",
        Command::Train(_) => "train",
        Command::Eval(_) => "eval",
        Command::Experiment => "experiment",
        Command::Keyframes(_) => "keyframes",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = command_name(&cli.command);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let chain: Vec<String> = err.chain().map(ToString::to_string).collect();
            eprintln!("{}", serde_json::json!({ "status": "error", "command": name, "error": chain.join(": ") }));
            ExitCode::FAILURE
        }
    }
}

struct Ctx {
    cfg: RunConfig,
    out: Option<PathBuf>,
}

impl Ctx {
    fn set<T: ToString>(&mut self, key: &str, value: Option<T>) -> Result<()> {
        if let Some(v) = value {
            self.cfg.set(key, &v.to_string())?;
        }
        Ok(())
    }

    fn emit_text(&self, text: &str) -> Result<()> {
        match &self.out {
            Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }

    fn require_out(&self) -> Result<&Path> {
        self.out.as_deref().context("--out is required for this command")
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            RunConfig::parse(&text).with_context(|| format!("config {}", path.display()))?
        }
        None => RunConfig::default(),
    };
    let mut ctx = Ctx { cfg, out: cli.out };
    ctx.set("seed", cli.seed)?;
    match cli.command {
        Command::Preprocess(a) => {
            ctx.set("enhancement", a.method)?;
            ctx.set("cutoff", a.cutoff)?;
            ctx.cfg.validate()?;
            let img = read_gray(&a.input)?;
            let out = ctx.cfg.enhance(&img)?;
            write_image(ctx.require_out()?, &out)
        }
        Command::GmmFit(a) => {
            ctx.set("components", a.components)?;
            ctx.cfg.validate()?;
            let img = read_gray(&a.input)?;
            let (params, trace) =
                gmm::fit(&img.normalized(), ctx.cfg.components, ctx.cfg.em_epsilon, ctx.cfg.em_max_iters, ctx.cfg.seed)?;
            let mut csv = String::from("component,weight,mean,variance\n");
            for m in 0..params.components() {
                writeln!(csv, "{m},{},{},{}", params.weights()[m], params.means()[m], params.variances()[m])?;
            }
            eprintln!(
                "iterations={} converged={} loglik={}",
                trace.iterations_used,
                trace.converged,
                trace.loglik_per_iter.last().copied().unwrap_or(f64::NAN)
            );
            ctx.emit_text(&csv)
        }
        Command::Segment(a) => {
            ctx.set("components", a.components)?;
            ctx.set("beta", a.beta)?;
            ctx.set("solver", a.solver)?;
            ctx.cfg.validate()?;
            let img = read_gray(&a.input)?;
            let c = &ctx.cfg;
            let (params, _) = gmm::fit(&img.normalized(), c.components, c.em_epsilon, c.em_max_iters, c.seed)?;
            let prior = match c.prior {
                PriorKind::Potts => Prior::Potts,
                PriorKind::Quadratic => Prior::Quadratic,
            };
            let model = build_segmentation_game(&img, &params, c.beta, prior)?;
            let labels = solve(&ctx.cfg, &model, initial_labeling(&model, None)?, &a.trace)?;
            write_image(ctx.require_out()?, &labels.to_image())
        }
        Command::Register(a) => {
            ctx.set("radius", a.radius)?;
            ctx.set("beta", a.beta)?;
            ctx.cfg.validate()?;
            let fixed = read_gray(&a.fixed)?;
            let moving = read_gray(&a.moving)?;
            let set = DisplacementLabelSet::square(ctx.cfg.radius);
            let field = SmoothnessField::identity(fixed.width(), fixed.height(), ctx.cfg.ellipticity)?;
            let model = build_registration_game(&fixed, &moving, &set, ctx.cfg.beta, &field)?;
            let init = initial_labeling(&model, Some(set.zero_index()))?;
            let labels = solve(&ctx.cfg, &model, init, &None)?;
            let regularity = displacement_regularity(&field, &labels, &set)?;
            eprintln!("regularity={regularity}");
            let mut csv = String::from("x,y,dx,dy\n");
            for (p, &l) in labels.labels().iter().enumerate() {
                let (dx, dy) = set.offsets()[l];
                writeln!(csv, "{},{},{dx},{dy}", p % fixed.width(), p / fixed.width())?;
            }
            ctx.emit_text(&csv)
        }
        Command::Features(a) => {
            let mut header = vec!["file".to_string()];
            header.extend(feature_names());
            let mut csv = header.join(",");
            csv.push('\n');
            for path in &a.inputs {
                let f = extract_features(&read_gray(path)?)?;
                let cells: Vec<String> = f.values.iter().map(f64::to_string).collect();
                writeln!(csv, "{},{}", path.display(), cells.join(","))?;
            }
            ctx.emit_text(&csv)
        }
        Command::Train(a) => {
            ctx.set("epochs", a.epochs)?;
            ctx.set("images_per_class", a.images_per_class)?;
            ctx.cfg.validate()?;
            let out = ctx.require_out()?.to_path_buf();
            let (raw, labels) = harness::synthetic_dataset(a.size, 1, ctx.cfg.images_per_class, ctx.cfg.seed)?;
            let images = raw.iter().map(|i| ctx.cfg.enhance(i)).collect::<Result<Vec<_>, _>>()?;
            let net = NetSpec::default_architecture(a.size, ctx.cfg.seed)?;
            let (trained, trace) = net::train(&net, &Dataset::new(images, labels)?, &ctx.cfg.train_config(ctx.cfg.seed)?)?;
            fs::write(&out, save_checkpoint(&trained)).with_context(|| format!("writing {}", out.display()))?;
            if let Some(path) = a.trace {
                let mut csv = String::from("epoch,loss\n");
                for (e, l) in trace.iter().enumerate() {
                    writeln!(csv, "{},{l}", e + 1)?;
                }
                fs::write(&path, csv).with_context(|| format!("writing {}", path.display()))?;
            }
            eprintln!("final_loss={}", trace.last().copied().unwrap_or(f64::NAN));
            Ok(())
        }
        Command::Eval(a) => {
            ctx.cfg.validate()?;
            let bytes = fs::read(&a.model).with_context(|| format!("reading {}", a.model.display()))?;
            let model = load_checkpoint(&bytes)?;
            let mut text = String::new();
            if a.inputs.is_empty() {
                let size = model.input_shape().w;
                let seed = ctx.cfg.seed ^ 0x5EED_0E7A;
                let (raw, labels) = harness::synthetic_dataset(size, 1, ctx.cfg.images_per_class.min(50), seed)?;
                let mut correct = 0;
                for (img, &label) in raw.iter().zip(&labels) {
                    correct += (net::predict(&model, &ctx.cfg.enhance(img)?)?.0 == label) as usize;
                }
                writeln!(text, "accuracy,{:.4}", correct as f64 / labels.len() as f64)?;
            } else {
                text.push_str("file,class,scene,action\n");
                for path in &a.inputs {
                    let img = ctx.cfg.enhance(&read_gray(path)?)?;
                    let (class, _) = net::predict(&model, &img)?;
                    let scene = SCENE_CLASSES[class].name();
                    writeln!(text, "{},{class},{scene},{}", path.display(), label_to_action(class)?)?;
                }
            }
            ctx.emit_text(&text)
        }
        Command::Experiment => {
            let report = harness::run_experiment(&ctx.cfg)?;
            ctx.emit_text(&report.to_csv())?;
            let failed = report.failures();
            if let Some(first) = failed.first() {
                let reason = first.accuracy.as_ref().err().cloned().unwrap_or_default();
                bail!("{} experiment cell(s) failed; first: {reason}", failed.len());
            }
            Ok(())
        }
        Command::Keyframes(a) => {
            ctx.set("fps", a.fps)?;
            ctx.set("interval_s", a.interval)?;
            ctx.cfg.validate()?;
            let policy = KeyframePolicy::new(ctx.cfg.fps, ctx.cfg.interval_s)?;
            let text: String = keyframe_indices(&policy, a.total).iter().map(|i| format!("{i}\n")).collect();
            ctx.emit_text(&text)
        }
    }
}

fn solve(cfg: &RunConfig, model: &EnergyModel, init: LabelField, trace_path: &Option<PathBuf>) -> Result<LabelField> {
    let game = cfg.game_config();
    let outcome = match cfg.solver {
        Solver::Icm => solve_icm(model, &init, &game)?,
        Solver::Anneal => solve_anneal(model, &init, &game)?,
    };
    let nash = nash_check(model, &outcome.labels)?;
    eprintln!("energy={} converged={} nash={}", outcome.energy(), outcome.converged, nash.is_nash);
    if let Some(path) = trace_path {
        fs::write(path, trace_to_csv(&outcome.trace)).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(outcome.labels)
}

fn read_gray(path: &Path) -> Result<Image> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let img = read_pnm(&bytes).with_context(|| format!("decoding {}", path.display()))?;
    Ok(if img.is_gray() { img } else { img.to_gray() })
}

fn write_image(path: &Path, img: &Image) -> Result<()> {
    fs::write(path, write_pnm(img)).with_context(|| format!("writing {}", path.display()))
}
