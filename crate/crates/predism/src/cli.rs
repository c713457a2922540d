//! `predism` subcommands.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use predism_core::damagemap::{evaluate, parse_geojson, render_png};
use predism_core::{GeoBounds, HazardAttribute, HazardAttributes, LossKind, TrainConfig};

use crate::config::AppConfig;
use crate::error::AppError;
use crate::pipeline::{self, HeadKind};

#[derive(Parser, Debug)]
#[command(name = "predism", version, about = "Forecast building damage maps for hypothetical hazards")]
pub struct Cli {
    /// JSON config file; overrides PREDISM_CONFIG.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub chip_size: Option<usize>,
    /// Confidence floor below which a building is unclassified.
    #[arg(long, global = true)]
    pub tau: Option<f64>,
    /// Trained model file.
    #[arg(long, global = true)]
    pub model: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Summarize a labelled event tree.
    Ingest {
        #[arg(long)]
        data: PathBuf,
    },
    /// Score hazard attributes into a 1-5 level.
    HazardScore {
        #[command(flatten)]
        attrs: AttrArgs,
        /// Print per-attribute levels as JSON instead of the overall level.
        #[arg(long)]
        json: bool,
    },
    /// Train one head per disaster type.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value = "ce")]
        loss: LossArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "ordinal")]
        head: HeadArg,
        /// Fraction of each disaster type used for training.
        #[arg(long, default_value_t = 0.8)]
        ratio: f64,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long, default_value = "model-out")]
        out: PathBuf,
    },
    /// Predict a damage map for one scene.
    Predict {
        #[command(flatten)]
        scene: SceneArgs,
        #[arg(long)]
        hazard_level: Option<i64>,
        #[command(flatten)]
        attrs: AttrArgs,
        /// Output file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Predict maps for several hazard levels and write GeoJSON, PNG and a manifest.
    Sweep {
        #[command(flatten)]
        scene: SceneArgs,
        /// Comma-separated levels, such as 3,4,5.
        #[arg(long, value_delimiter = ',', required = true)]
        levels: Vec<i64>,
        #[command(flatten)]
        attrs: AttrArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a GeoJSON damage map over its scene as PNG.
    Render {
        #[command(flatten)]
        scene: SceneArgs,
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare a GeoJSON damage map with gold labels.
    Evaluate {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        labels: PathBuf,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        listen: Option<String>,
        #[arg(long)]
        artifacts_dir: Option<PathBuf>,
        #[arg(long)]
        data_root: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
pub struct SceneArgs {
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    /// Disaster type; defaults to the label file's metadata.
    #[arg(long = "type")]
    pub disaster_type: Option<String>,
    /// Geographic bounds as lat_min,lat_max,lng_min,lng_max.
    #[arg(long, value_parser = parse_bounds)]
    pub bounds: Option<GeoBounds>,
}

#[derive(Args, Debug, Default)]
pub struct AttrArgs {
    #[arg(long)]
    pub fatality: Option<f64>,
    #[arg(long)]
    pub injury: Option<f64>,
    #[arg(long)]
    pub land_impaired: Option<f64>,
    #[arg(long)]
    pub direct_damage: Option<f64>,
    #[arg(long)]
    pub indirect_damage: Option<f64>,
    #[arg(long)]
    pub water_disruption: Option<f64>,
    #[arg(long)]
    pub energy_disruption: Option<f64>,
}

impl AttrArgs {
    pub fn to_attributes(&self) -> HazardAttributes {
        use HazardAttribute::*;
        let mut a = HazardAttributes::default();
        for (k, v) in [
            (Fatality, self.fatality),
            (Injury, self.injury),
            (LandImpaired, self.land_impaired),
            (DirectDamage, self.direct_damage),
            (IndirectDamage, self.indirect_damage),
            (WaterDisruption, self.water_disruption),
            (EnergyDisruption, self.energy_disruption),
        ] {
            a.set(k, v);
        }
        a
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum LossArg {
    Ce,
    OrdinalCe,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum HeadArg {
    Ordinal,
    Softmax,
}

fn parse_bounds(s: &str) -> Result<GeoBounds, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    let [lat_min, lat_max, lng_min, lng_max] = v[..] else {
        return Err("expected lat_min,lat_max,lng_min,lng_max".into());
    };
    Ok(GeoBounds {
        lat_min,
        lat_max,
        lng_min,
        lng_max,
    })
}

/// Parses `argv` and runs it, returning the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli, &mut std::io::stdout().lock()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("predism: {}: {}", e.code, e.message);
            e.exit_code()
        }
    }
}

/// Config file (or PREDISM_CONFIG), then individual flags on top.
pub fn effective_config(cli: &Cli) -> Result<AppConfig, AppError> {
    let mut cfg = AppConfig::resolve(cli.config.as_deref())?;
    if let Some(c) = cli.chip_size {
        cfg.chip_size = c;
    }
    if let Some(t) = cli.tau {
        cfg.tau = t;
    }
    if let Some(m) = &cli.model {
        cfg.model_path = Some(m.clone());
    }
    if let Command::Serve {
        listen,
        artifacts_dir,
        data_root,
    } = &cli.command
    {
        if let Some(l) = listen {
            cfg.listen = l.clone();
        }
        if let Some(a) = artifacts_dir {
            cfg.artifacts_dir = a.clone();
        }
        if let Some(d) = data_root {
            cfg.data_root = Some(d.clone());
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), AppError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| pipeline::io_error(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| pipeline::io_error(path, e))
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), AppError> {
    out.write_all(text.as_bytes())
        .map_err(|e| AppError::internal(format!("stdout: {e}")))
}

struct LoadedScene {
    scene: predism_core::Scene,
    labels: predism_core::dataset::LabelDocument,
    footprints: Vec<predism_core::Footprint>,
    disaster_type: predism_core::DisasterType,
}

fn load(args: &SceneArgs) -> Result<LoadedScene, AppError> {
    let scene = pipeline::load_scene(&args.scene, args.bounds)?;
    let labels = pipeline::read_labels(&args.labels)?;
    let footprints = labels.footprints()?;
    let disaster_type = pipeline::resolve_type(args.disaster_type.as_deref(), &labels)?;
    Ok(LoadedScene {
        scene,
        labels,
        footprints,
        disaster_type,
    })
}

pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<(), AppError> {
    let cfg = effective_config(&cli)?;
    match cli.command {
        Command::Ingest { data } => {
            let catalog = pipeline::load_catalog(&data)?;
            emit(out, &pipeline::to_pretty_json(&catalog.summary()))
        }
        Command::HazardScore { attrs, json } => {
            let a = attrs.to_attributes();
            let score = pipeline::hazard_score(&a, &cfg.threshold_table()?)?;
            if json {
                emit(out, &pipeline::to_pretty_json(&score))
            } else {
                emit(out, &format!("{}\n", score.overall.get()))
            }
        }
        Command::Train {
            data,
            loss,
            seed,
            head,
            ratio,
            epochs,
            out: out_dir,
        } => {
            let catalog = pipeline::load_catalog(&data)?;
            let mut tc = TrainConfig {
                seed,
                loss: match loss {
                    LossArg::Ce => LossKind::CrossEntropy,
                    LossArg::OrdinalCe => LossKind::OrdinalCrossEntropy,
                },
                ..TrainConfig::default()
            };
            if let Some(e) = epochs {
                tc.epochs = e;
            }
            let kind = match head {
                HeadArg::Ordinal => HeadKind::Ordinal,
                HeadArg::Softmax => HeadKind::Softmax,
            };
            let art = pipeline::train_catalog(&catalog, kind, &tc, ratio, cfg.chip_size, &cfg.threshold_table()?)?;
            let model_text = art.model.to_json();
            write_file(&out_dir.join("model.json"), model_text.as_bytes())?;
            write_file(
                &out_dir.join("history.json"),
                pipeline::to_pretty_json(&art.history).as_bytes(),
            )?;
            let report = pipeline::to_pretty_json(&art.report);
            write_file(&out_dir.join("report.json"), report.as_bytes())?;
            emit(out, &report)
        }
        Command::Predict {
            scene,
            hazard_level,
            attrs,
            out: dest,
        } => {
            let s = load(&scene)?;
            let hazard = pipeline::resolve_hazard(hazard_level, Some(attrs.to_attributes()), Some(&s.labels))?;
            let map = cfg
                .predictor()?
                .predict_scene(&s.scene, &s.footprints, s.disaster_type, &hazard)?;
            let text = pipeline::to_pretty_json(&map);
            match dest {
                Some(p) => write_file(&p, text.as_bytes()),
                None => emit(out, &text),
            }
        }
        Command::Sweep {
            scene,
            levels,
            attrs,
            out: dir,
        } => {
            let s = load(&scene)?;
            let levels = pipeline::parse_levels(&levels)?;
            let a = attrs.to_attributes();
            let (manifest, _) = pipeline::write_sweep(
                &cfg.predictor()?,
                &cfg.palette,
                &s.scene,
                &s.footprints,
                s.disaster_type,
                (!a.is_empty()).then_some(&a),
                &levels,
                &dir,
            )?;
            emit(out, &pipeline::to_pretty_json(&manifest))
        }
        Command::Render { scene, map, out: dest } => {
            let s = load(&scene)?;
            let text = fs::read_to_string(&map).map_err(|e| pipeline::io_error(&map, e))?;
            let m = parse_geojson(&text)?;
            write_file(&dest, &render_png(&m, &s.scene, &s.footprints, &cfg.palette)?)
        }
        Command::Evaluate { map, labels } => {
            let text = fs::read_to_string(&map).map_err(|e| pipeline::io_error(&map, e))?;
            let m = parse_geojson(&text)?;
            let gold = pipeline::read_labels(&labels)?.buildings()?;
            emit(out, &pipeline::to_pretty_json(&evaluate(&m, &gold)?))
        }
        Command::Serve { .. } => {
            let state = crate::http::AppState::new(cfg)?;
            let rt = tokio::runtime::Runtime::new().map_err(|e| AppError::internal(e.to_string()))?;
            rt.block_on(crate::http::serve(state))
        }
    }
}
