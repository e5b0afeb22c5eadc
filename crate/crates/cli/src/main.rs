use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ucmtrack::grid::{ContourMap, ForegroundMask};
use ucmtrack::ilp::{export_lp, SolveStatus};
use ucmtrack::linking::format_links;
use ucmtrack::metrics::evaluate;
use ucmtrack::pipeline::{self, PipelineConfig};
use ucmtrack::preprocess::{ensemble_combine, labels_to_maps};
use ucmtrack::synth::{generate_timelapse, SynthConfig};
use ucmtrack::tensor_io::{Tensor, TrackTable};
use ucmtrack::Error;

#[derive(Parser)]
#[command(name = "ucmtrack", version, about = "Joint cell segmentation and tracking over watershed hierarchies")]
struct Cli {
    /// Print the default pipeline configuration and exit.
    #[arg(long)]
    defaults: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic timelapse with ground truth.
    Synth(SynthArgs),
    /// Intensity frames to foreground and contour maps.
    Preprocess(PreprocessArgs),
    /// Combine several label stacks into one pair of maps.
    Ensemble(EnsembleArgs),
    /// Track from foreground and contour maps.
    Track(TrackArgs),
    /// Write the whole-sequence program in LP format.
    ExportLp(ExportArgs),
    /// Score a prediction against ground truth.
    Metrics(MetricsArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one parameter, e.g. `--set window=20`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<PipelineConfig, Error> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::parse(&read_text(p)?)?,
            None => PipelineConfig::default(),
        };
        for kv in &self.overrides {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::InvalidParam(format!("--set expects KEY=VALUE, got {kv:?}")))?;
            cfg.set(k.trim(), v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    /// Frame size, slowest axis first, e.g. `128,128`.
    #[arg(long, default_value = "128,128", value_delimiter = ',')]
    dims: Vec<usize>,
    #[arg(long, default_value_t = 30)]
    frames: usize,
    #[arg(long, default_value_t = 20)]
    cells: usize,
    #[arg(long, default_value_t = 1.0)]
    step: f64,
    #[arg(long, default_value_t = 0.01)]
    division_prob: f64,
    #[arg(long, default_value_t = 5.0)]
    radius_min: f64,
    #[arg(long, default_value_t = 7.0)]
    radius_max: f64,
    #[arg(long, default_value_t = 0.0)]
    noise: f32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct PreprocessArgs {
    /// `.ucmt` intensity stack.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct EnsembleArgs {
    /// `.ucmt` label stacks; give the flag once per source.
    #[arg(long = "labels", required = true)]
    labels: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MapArgs {
    #[arg(long)]
    foreground: PathBuf,
    #[arg(long)]
    contour: PathBuf,
}

#[derive(Args)]
struct TrackArgs {
    #[command(flatten)]
    maps: MapArgs,
    #[arg(long)]
    out: PathBuf,
    /// Also write the candidate links.
    #[arg(long)]
    links: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct ExportArgs {
    #[command(flatten)]
    maps: MapArgs,
    #[arg(long)]
    out: PathBuf,
    /// Solve the program and write `name value` lines here.
    #[arg(long)]
    solution: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct MetricsArgs {
    #[arg(long)]
    pred_labels: PathBuf,
    #[arg(long)]
    pred_tracks: PathBuf,
    #[arg(long)]
    gt_labels: PathBuf,
    #[arg(long)]
    gt_tracks: PathBuf,
    /// Write the report here as well as to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read_text(p: &Path) -> Result<String, Error> {
    fs::read_to_string(p).map_err(|e| io_err(p, e))
}

fn write_text(p: &Path, s: &str) -> Result<(), Error> {
    fs::write(p, s).map_err(|e| io_err(p, e))
}

fn io_err(p: &Path, source: std::io::Error) -> Error {
    Error::Io { path: p.to_path_buf(), source }
}

fn out_dir(p: &Path) -> Result<(), Error> {
    fs::create_dir_all(p).map_err(|e| io_err(p, e))
}

fn read_maps(m: &MapArgs) -> Result<Vec<(ForegroundMask, ContourMap)>, Error> {
    let fg = Tensor::read(&m.foreground)?.to_mask_frames()?;
    let contour = Tensor::read(&m.contour)?.to_f32_frames()?;
    if fg.len() != contour.len() {
        return Err(Error::Shape(format!(
            "{} foreground frames vs {} contour frames",
            fg.len(),
            contour.len()
        )));
    }
    Ok(fg.into_iter().zip(contour).collect())
}

fn write_maps(dir: &Path, maps: &[(ForegroundMask, ContourMap)]) -> Result<(), Error> {
    out_dir(dir)?;
    let (fg, c): (Vec<_>, Vec<_>) = maps.iter().cloned().unzip();
    Tensor::from_mask_frames(&fg)?.write(dir.join("foreground.ucmt"))?;
    Tensor::from_f32_frames(&c)?.write(dir.join("contour.ucmt"))
}

fn run(cmd: Command) -> Result<(), Error> {
    match cmd {
        Command::Synth(a) => {
            let cfg = SynthConfig {
                dims: a.dims,
                frames: a.frames,
                cells: a.cells,
                step_sigma: a.step,
                division_prob: a.division_prob,
                radius_min: a.radius_min,
                radius_max: a.radius_max,
                noise: a.noise,
                seed: a.seed,
                ..SynthConfig::default()
            };
            let t = generate_timelapse(&cfg)?;
            out_dir(&a.out)?;
            Tensor::from_f32_frames(&t.images)?.write(a.out.join("images.ucmt"))?;
            Tensor::from_label_frames(&t.truth.labels)?.write(a.out.join("labels.ucmt"))?;
            t.truth.tracks.write(a.out.join("tracks.txt"))?;
            log::info!("wrote {} frames with {} tracks to {}", cfg.frames, t.truth.tracks.len(), a.out.display());
        }
        Command::Preprocess(a) => {
            let cfg = a.config.load()?;
            let images = Tensor::read(&a.input)?.to_f32_frames()?;
            let maps = pipeline::preprocess_frames(&images, &cfg, &cfg.executor()?)?;
            write_maps(&a.out, &maps)?;
        }
        Command::Ensemble(a) => {
            let stacks = a
                .labels
                .iter()
                .map(|p| Tensor::read(p)?.to_label_frames())
                .collect::<Result<Vec<_>, _>>()?;
            let frames = stacks[0].len();
            if let Some((i, s)) = stacks.iter().enumerate().find(|(_, s)| s.len() != frames) {
                return Err(Error::Shape(format!("source {i} has {} frames, source 0 has {frames}", s.len())));
            }
            let maps = (0..frames)
                .map(|t| {
                    let per: Vec<_> = stacks.iter().map(|s| labels_to_maps(&s[t])).collect();
                    ensemble_combine(&per)
                })
                .collect::<Result<Vec<_>, _>>()?;
            write_maps(&a.out, &maps)?;
        }
        Command::Track(a) => {
            let cfg = a.config.load()?;
            let maps = read_maps(&a.maps)?;
            let ex = cfg.executor()?;
            let out = pipeline::track_maps(&maps, &cfg, &ex, None)?;
            for w in &out.solution.reports {
                if w.status != SolveStatus::Optimal {
                    log::warn!("window {} [{}, {}) finished {}", w.index, w.start, w.end, w.status);
                }
            }
            out_dir(&a.out)?;
            Tensor::from_label_frames(&out.lineage.labels)?.write(a.out.join("masks.ucmt"))?;
            out.lineage.tracks.write(a.out.join("tracks.txt"))?;
            if let Some(p) = &a.links {
                write_text(p, &format_links(&out.links))?;
            }
            println!("tracks={}", out.lineage.tracks.len());
            println!("objective={}", out.solution.objective);
        }
        Command::ExportLp(a) => {
            let cfg = a.config.load()?;
            let maps = read_maps(&a.maps)?;
            let ex = cfg.executor()?;
            let cands = pipeline::extract_candidates(&maps, &cfg.hierarchy, &ex)?;
            let links = pipeline::link_frames(&cands, &cfg.linking, &ex)?;
            let tm = pipeline::full_model(&cands, &links, &cfg)?;
            export_lp(&tm.model, &a.out)?;
            if let Some(p) = &a.solution {
                let sol = tm.solve(&cfg.solve_options());
                if sol.status == SolveStatus::Infeasible {
                    return Err(Error::Infeasible("the exported program has no solution".into()));
                }
                write_text(p, &sol.dump(&tm.model))?;
            }
        }
        Command::Metrics(a) => {
            let pred = Tensor::read(&a.pred_labels)?.to_label_frames()?;
            let gt = Tensor::read(&a.gt_labels)?.to_label_frames()?;
            let report = evaluate(&pred, &TrackTable::read(&a.pred_tracks)?, &gt, &TrackTable::read(&a.gt_tracks)?)?;
            let text = report.to_key_values();
            print!("{text}");
            if let Some(p) = &a.out {
                write_text(p, &text)?;
            }
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidParam(_) | Error::Parse { .. } | Error::Shape(_) | Error::Validation(_) => 1,
        Error::Infeasible(_) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if cli.defaults {
        print!("{}", PipelineConfig::default().to_text());
        return ExitCode::SUCCESS;
    }
    let Some(cmd) = cli.command else {
        eprintln!("error: no subcommand given; see --help");
        return ExitCode::from(1);
    };
    match run(cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
