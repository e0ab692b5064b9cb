//! Command-line interface.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use tactdiff_core::control::CalibrationParams;
use tactdiff_core::dataset::fixtures::{NOVEL_OBJECTS, SEEN_OBJECTS};
use tactdiff_core::dataset::{stratified_split, verify_alignment, Partition, SynthStyleParams, DEFAULT_RATIOS};
use tactdiff_core::geometry::{parse_stl, validate_pose, ValidationMode};
use tactdiff_core::metrics::Extractor;
use tactdiff_core::prompts::{PromptSchema, TemplateTable};
use tactdiff_core::render::{OrthoCamera, DEFAULT_FAR_MM, DEFAULT_NEAR_MM, DEFAULT_RESOLUTION};
use tactdiff_core::diffusion::{SamplerConfig, TrainConfig};

use crate::controlset::{build_control_set, ControlRecord, ControlSet};
use crate::error::{CliError, Result};
use crate::exec::Pool;
use crate::{corpus, io, model};

#[derive(Debug, Parser)]
#[command(name = "tactdiff", version, about = "Pose-aligned control images and toy dual-conditioned diffusion for tactile images")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// JSON run configuration (hyperparameters, seeds, style).
    #[arg(long, global = true, env = "TACTDIFF_CONFIG")]
    pub config: Option<PathBuf>,
    /// Seed for every random stream; overrides the config.
    #[arg(long, global = true, env = "TACTDIFF_SEED")]
    pub seed: Option<u64>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true, env = "TACTDIFF_THREADS")]
    pub threads: Option<usize>,
    /// Omit timestamps so reruns are byte-identical.
    #[arg(long, global = true, env = "TACTDIFF_REPRODUCIBLE")]
    pub reproducible: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ObjectSet {
    Seen,
    Novel,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Schema {
    Short,
    Long,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl From<Split> for Partition {
    fn from(s: Split) -> Self {
        match s {
            Split::Train => Partition::Train,
            Split::Val => Partition::Val,
            Split::Test => Partition::Test,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the procedural fixture STLs, pose logs and default configs.
    MakeFixtures {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        poses: usize,
        #[arg(long, value_enum, default_value_t = ObjectSet::All)]
        objects: ObjectSet,
    },
    /// Render pose-aligned control images from STLs and pose logs.
    RenderControl {
        /// STL file; the object id is the file stem. Repeat with --poses.
        #[arg(long, required = true)]
        stl: Vec<PathBuf>,
        /// Pose CSV, paired with --stl in order.
        #[arg(long, required = true)]
        poses: Vec<PathBuf>,
        #[arg(long)]
        calib: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_RESOLUTION)]
        resolution: usize,
        /// Clamp out-of-range poses instead of rejecting their frames.
        #[arg(long)]
        permissive: bool,
    },
    /// Write one structured prompt per control frame and modality.
    GenPrompts {
        /// Control manifest from render-control.
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum, default_value_t = Schema::Short)]
        schema: Schema,
        #[arg(long)]
        templates: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Synthesize the three modality targets and the sample manifest.
    SynthTargets {
        /// Control manifest from render-control.
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        prompts: PathBuf,
        #[arg(long)]
        style: Option<PathBuf>,
        #[arg(long, default_value_t = 64)]
        size: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Stratified train/val/test split over (object, frame) keys.
    Split {
        #[arg(long)]
        manifest: PathBuf,
        /// Three comma-separated ratios summing to 1.
        #[arg(long, value_delimiter = ',')]
        ratios: Option<Vec<f64>>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train codec, base denoiser and control branch.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        max_steps: Option<usize>,
    },
    /// Sample images from a checkpoint.
    Sample {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Sample every record of the manifest selection into --out.
        #[arg(long, conflicts_with_all = ["prompt", "control"])]
        manifest: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Split::Test)]
        partition: Split,
        #[arg(long)]
        limit: Option<usize>,
        /// Single-image mode: prompt JSON.
        #[arg(long, required_unless_present = "manifest")]
        prompt: Option<PathBuf>,
        /// Single-image mode: control PNG (null control when absent).
        #[arg(long)]
        control: Option<PathBuf>,
        /// Single-image mode: initial-latent key.
        #[arg(long, default_value_t = 0)]
        key: u64,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        w_cfg: Option<f64>,
        /// Output PNG (single) or directory (manifest).
        #[arg(long)]
        out: PathBuf,
    },
    /// Score generated images against the manifest targets.
    Evaluate {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        generated: PathBuf,
        #[arg(long, value_enum, default_value_t = Split::Test)]
        partition: Split,
        #[arg(long)]
        limit: Option<usize>,
        /// Report JSON path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Hyperparameters and seeds shared by the subcommands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub threads: Option<usize>,
    pub train: TrainConfig,
    pub sampler: SamplerConfig,
    pub style: SynthStyleParams,
    pub split_ratios: [f64; 3],
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            threads: None,
            train: TrainConfig::default(),
            sampler: SamplerConfig::default(),
            style: SynthStyleParams::default(),
            split_ratios: DEFAULT_RATIOS,
        }
    }
}

impl RunConfig {
    /// Config file (if any) with the global flags applied; the seed flows
    /// into the training and sampling configs.
    pub fn resolve(g: &Global) -> Result<Self> {
        let mut c: RunConfig = match &g.config {
            Some(p) => {
                require(p)?;
                io::read_json(p).map_err(|e| CliError::usage(e))?
            }
            None => RunConfig::default(),
        };
        if let Some(s) = g.seed {
            c.seed = s;
        }
        if g.threads.is_some() {
            c.threads = g.threads;
        }
        c.train.seed = c.seed;
        c.sampler.seed = c.seed;
        Ok(c)
    }
}

/// Outcome of a subcommand that ran to completion.
#[derive(Debug, Clone, PartialEq)]
pub enum Status {
    Success,
    /// Finished, but with rejects or a partial report (exit 1).
    Flagged(String),
}

fn require(p: &Path) -> Result<()> {
    if p.exists() {
        Ok(())
    } else {
        Err(CliError::usage(format!("input not found: {}", p.display())))
    }
}

fn timestamp(reproducible: bool) -> Option<String> {
    if reproducible {
        return None;
    }
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    Some(format!("unix:{secs}"))
}

fn object_id(stl: &Path) -> Result<String> {
    stl.file_stem()
        .and_then(|s| s.to_str())
        .map(str::to_owned)
        .ok_or_else(|| CliError::usage(format!("cannot derive an object id from {}", stl.display())))
}

pub fn run(cli: &Cli) -> Result<Status> {
    let cfg = RunConfig::resolve(&cli.global)?;
    let pool = Pool::new(cfg.threads)?;
    match &cli.command {
        Command::MakeFixtures { out, poses, objects } => {
            let ids: Vec<&str> = match objects {
                ObjectSet::Seen => SEEN_OBJECTS.to_vec(),
                ObjectSet::Novel => NOVEL_OBJECTS.to_vec(),
                ObjectSet::All => SEEN_OBJECTS.into_iter().chain(NOVEL_OBJECTS).collect(),
            };
            let f = corpus::make_fixtures(out, &ids, *poses, cfg.seed)?;
            println!("wrote {} fixtures with {poses} poses each to {}", f.objects.len(), out.display());
            Ok(Status::Success)
        }
        Command::RenderControl {
            stl,
            poses,
            calib,
            out,
            resolution,
            permissive,
        } => {
            if stl.len() != poses.len() {
                return Err(CliError::usage("--stl and --poses must be given the same number of times"));
            }
            for p in stl.iter().chain(poses).chain([calib]) {
                require(p)?;
            }
            let cal: CalibrationParams = io::read_json(calib).map_err(CliError::usage)?;
            cal.validate().map_err(CliError::usage)?;
            let camera = OrthoCamera::new(*resolution, *resolution, cal.mm_per_pixel_x, DEFAULT_NEAR_MM, DEFAULT_FAR_MM);
            let mut all = ControlSet::default();
            for (s, p) in stl.iter().zip(poses) {
                let id = object_id(s)?;
                let mesh = parse_stl(&io::read(s)?).map_err(|e| CliError::format(s, e))?;
                let mut rows = io::parse_pose_rows(&io::read(p)?).map_err(|e| CliError::format(p, e))?;
                if *permissive {
                    for r in &mut rows {
                        r.pose = validate_pose(r.pose, ValidationMode::Permissive)?.0;
                    }
                }
                let set = build_control_set(&mesh, &id, &rows, &cal, &camera, out, out, &pool)?;
                all.accepted.extend(set.accepted);
                all.rejects.extend(set.rejects);
            }
            io::write(&out.join("manifest.jsonl"), &io::jsonl(&all.accepted))?;
            io::write(&out.join("rejects.jsonl"), &io::jsonl(&all.rejects))?;
            println!("{} control images, {} rejects", all.accepted.len(), all.rejects.len());
            if all.rejects.is_empty() {
                Ok(Status::Success)
            } else {
                Ok(Status::Flagged(format!("{} frames rejected (see rejects.jsonl)", all.rejects.len())))
            }
        }
        Command::GenPrompts {
            manifest,
            schema,
            templates,
            out,
        } => {
            require(manifest)?;
            let table = match templates {
                Some(t) => {
                    require(t)?;
                    io::read_json(t).map_err(CliError::usage)?
                }
                None => TemplateTable::default(),
            };
            let controls: Vec<ControlRecord> = io::read_jsonl(manifest)?;
            let schema = match schema {
                Schema::Short => PromptSchema::Short,
                Schema::Long => PromptSchema::Long,
            };
            let written = corpus::gen_prompts(&controls, schema, &table, out)?;
            println!("wrote {} prompts", written.len());
            Ok(Status::Success)
        }
        Command::SynthTargets {
            manifest,
            prompts,
            style,
            size,
            out,
        } => {
            require(manifest)?;
            require(prompts)?;
            let style = match style {
                Some(s) => {
                    require(s)?;
                    io::read_json(s).map_err(CliError::usage)?
                }
                None => cfg.style,
            };
            if *size == 0 {
                return Err(CliError::usage("--size must be positive"));
            }
            let controls: Vec<ControlRecord> = io::read_jsonl(manifest)?;
            let corpus = corpus::build_corpus(&controls, &io::base_dir(manifest), prompts, &style, *size, out, out, &pool)?;
            io::write_manifest(&out.join("manifest.jsonl"), &corpus)?;
            println!("wrote {} targets", corpus.records.len());
            Ok(Status::Success)
        }
        Command::Split { manifest, ratios, out } => {
            require(manifest)?;
            let ratios = match ratios.as_deref() {
                Some(&[a, b, c]) => [a, b, c],
                Some(r) => return Err(CliError::usage(format!("--ratios takes three values, got {}", r.len()))),
                None => cfg.split_ratios,
            };
            let sum: f64 = ratios.iter().sum();
            if ratios.iter().any(|r| !(*r >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
                return Err(CliError::usage(format!("split ratios must be non-negative and sum to 1, got {ratios:?}")));
            }
            let m = io::read_manifest(manifest)?;
            let report = verify_alignment(&m);
            if !report.is_aligned() {
                return Err(CliError::Domain(format!("manifest is not aligned: {:?}", report.keys())));
            }
            let mut split = stratified_split(&m, ratios, cfg.seed)?;
            let base_in = io::base_dir(manifest);
            let base_out = io::base_dir(out);
            for r in &mut split.records {
                for p in [&mut r.control_path, &mut r.prompt_path, &mut r.target_path] {
                    *p = io::relative(&base_in.join(&*p), &base_out);
                }
            }
            io::write_manifest(out, &split)?;
            let c = split.partition_counts();
            let n = |p| c.get(&p).copied().unwrap_or(0);
            println!("train {} / val {} / test {}", n(Partition::Train), n(Partition::Val), n(Partition::Test));
            Ok(Status::Success)
        }
        Command::Train { manifest, out, max_steps } => {
            require(manifest)?;
            let mut tc = cfg.train.clone();
            if max_steps.is_some() {
                tc.max_steps = *max_steps;
            }
            tc.validate().map_err(CliError::usage)?;
            let m = io::read_manifest(manifest)?;
            let eval_every = tc.eval_every;
            let trained = model::train(tc, &m, &io::base_dir(manifest), timestamp(cli.global.reproducible), &pool, &mut |r| {
                if let Some(v) = r.val_loss {
                    eprintln!("{} step {} loss {:.5} val {:.5}", r.stage.name(), r.step, r.train_loss, v);
                } else if eval_every == 0 && r.step % 100 == 0 {
                    eprintln!("{} step {} loss {:.5}", r.stage.name(), r.step, r.train_loss);
                }
            })?;
            io::write(&out.join("model.ckpt"), &trained.model.to_checkpoint(&trained.meta))?;
            io::write(&out.join("loss.csv"), &model::loss_csv(&trained.losses))?;
            println!("trained {} steps; checkpoint {}", trained.losses.len(), out.join("model.ckpt").display());
            Ok(Status::Success)
        }
        Command::Sample {
            checkpoint,
            manifest,
            partition,
            limit,
            prompt,
            control,
            key,
            steps,
            w_cfg,
            out,
        } => {
            require(checkpoint)?;
            let mut sc = cfg.sampler;
            if let Some(s) = steps {
                sc.steps = *s;
            }
            if let Some(w) = w_cfg {
                sc.w_cfg = *w;
            }
            let (mdl, _) = model::load_checkpoint(checkpoint)?;
            sc.timesteps(&mdl.schedule).map_err(CliError::usage)?;
            match (manifest, prompt) {
                (Some(mp), _) => {
                    require(mp)?;
                    let m = io::read_manifest(mp)?;
                    let sel = model::select(&m, Some((*partition).into()), *limit);
                    let written = model::sample_manifest(&mdl, &sc, &io::base_dir(mp), &sel, out, &pool)?;
                    println!("sampled {} images into {}", written.len(), out.display());
                }
                (None, Some(pp)) => {
                    require(pp)?;
                    let cond = model::load_prompt(pp)?;
                    let ctrl = match control {
                        Some(c) => {
                            require(c)?;
                            Some(io::read_gray(c)?)
                        }
                        None => None,
                    };
                    let img = model::sample_one(&mdl, &sc, &cond, ctrl.as_ref(), *key)?;
                    io::write_rgb8(out, &img)?;
                    println!("wrote {}", out.display());
                }
                (None, None) => return Err(CliError::usage("give --manifest or --prompt")),
            }
            Ok(Status::Success)
        }
        Command::Evaluate {
            manifest,
            generated,
            partition,
            limit,
            out,
        } => {
            require(manifest)?;
            require(generated)?;
            let m = io::read_manifest(manifest)?;
            let sel = model::select(&m, Some((*partition).into()), *limit);
            let report = model::evaluate(&sel, &io::base_dir(manifest), generated, Extractor::default(), &pool)?;
            if let Some(o) = out {
                io::write_json(o, &report)?;
            }
            print!("{}", report.to_table());
            if report.partial {
                Ok(Status::Flagged(format!("{} generated images missing", report.missing.len())))
            } else {
                Ok(Status::Success)
            }
        }
    }
}

/// Parse arguments, run, and map the outcome to the exit code contract:
/// 0 success, 1 domain failure, 2 usage error.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(Status::Success) => ExitCode::SUCCESS,
        Ok(Status::Flagged(msg)) => {
            eprintln!("tactdiff: {msg}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("tactdiff: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
