use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::Args;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;
use volgraph_core::container::{write_volume, Grid, Payload};
use volgraph_core::graph::{encode_graph, EncodeConfig, Provenance};
use volgraph_core::graph_io::write_graphs;
use volgraph_core::neural::{read_checkpoint, write_checkpoint};
use volgraph_core::reduction::mean_project;
use volgraph_core::segmentation::{slic, smooth_by_segment, GridRef, SlicConfig};
use volgraph_core::synth::{make_dataset, write_manifest, DomainKind, ManifestRecord, SynthConfig};
use volgraph_core::training::{
    accuracy, prepare_input, render_table, rows, run_experiment_observed, split_dataset,
    train_seed, transfer_experiments, write_csv, DataVariant, EpochMetrics, ExperimentConfig,
    ExperimentRecord, PrepareConfig, TransferMode,
};
use volgraph_core::{Error, Input, MapVariant, Result};

use crate::data::{self, load_config};
use crate::Common;

fn parse_enum<T: DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

/// Experiment settings plus input preparation, read from one JSON file.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    #[serde(flatten)]
    pub experiment: ExperimentConfig,
    pub prepare: PrepareConfig,
}

impl RunConfig {
    fn load(common: &Common) -> Result<Self> {
        let mut cfg: RunConfig = load_config(common.config.as_deref())?;
        if let Some(s) = common.seed {
            let n = cfg.experiment.seeds.len() as u64;
            cfg.experiment.seeds = (s..s + n).collect();
        }
        Ok(cfg)
    }
}

fn emit(line: serde_json::Value) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer(&mut out, &line)?;
    out.write_all(b"\n")?;
    Ok(())
}

fn metrics_line(seed: Option<u64>, m: &EpochMetrics) {
    let mut v = serde_json::to_value(m).expect("metrics serialize");
    if let Some(s) = seed {
        v["seed"] = json!(s);
    }
    // A closed stdout should not abort training.
    let _ = emit(v);
}

#[derive(Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    common: Common,
    /// Output directory for volumes and manifest.jsonl.
    #[arg(long)]
    out: PathBuf,
    /// Samples per (class, domain).
    #[arg(long, default_value_t = 10)]
    per_class: usize,
    /// healthy, unhealthy, or both (comma separated).
    #[arg(long, value_delimiter = ',', default_value = "healthy", value_parser = parse_enum::<DomainKind>)]
    domains: Vec<DomainKind>,
    /// full or thresholded.
    #[arg(long, default_value = "full", value_parser = parse_enum::<MapVariant>)]
    map: MapVariant,
}

pub fn generate(a: GenerateArgs) -> Result<()> {
    let cfg: SynthConfig = load_config(a.common.config.as_deref())?;
    let samples = make_dataset(
        &cfg,
        a.per_class,
        &a.domains,
        a.map,
        a.common.seed.unwrap_or(0),
    )?;
    fs::create_dir_all(&a.out)?;
    let mut records = Vec::with_capacity(samples.len());
    for (i, s) in samples.iter().enumerate() {
        let name = format!("{i:05}_{}_{}.vgr", s.domain.name(), s.label.name());
        write_volume(&s.volume, a.out.join(&name))?;
        records.push(ManifestRecord {
            path: name,
            label: s.label,
            domain: s.domain,
            variant: s.variant,
            seed: s.seed,
        });
    }
    write_manifest(fs::File::create(a.out.join("manifest.jsonl"))?, &records)?;
    eprintln!("wrote {} samples to {}", records.len(), a.out.display());
    Ok(())
}

#[derive(Args)]
pub struct ReduceArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    manifest: PathBuf,
    /// gray3d, binary3d, gray2d, binary2d, sca_stack, superpixels, supervoxels.
    #[arg(long, value_parser = parse_enum::<DataVariant>)]
    variant: DataVariant,
    #[arg(long)]
    out: PathBuf,
}

fn input_grid(x: Input<f32>, binary: bool) -> Result<Grid> {
    let Input::Grid {
        channels,
        dims,
        ndim,
        data,
    } = x
    else {
        return Err(Error::Param(
            "graph variants are produced by `encode`".into(),
        ));
    };
    let mut gdims = dims[..ndim].to_vec();
    if channels > 1 {
        gdims.push(channels);
    }
    let payload = if binary {
        Payload::U8(data.iter().map(|&v| v as u8).collect())
    } else {
        Payload::F32(data)
    };
    Ok(Grid {
        dims: gdims,
        stack: channels > 1,
        payload,
    })
}

pub fn reduce(a: ReduceArgs) -> Result<()> {
    if a.variant.is_graph() {
        return Err(Error::Param(
            "graph variants are produced by `encode`".into(),
        ));
    }
    let prep: PrepareConfig = load_config(a.common.config.as_deref())?;
    let samples = data::load_samples(&a.manifest)?;
    let binary = matches!(
        a.variant,
        DataVariant::Binary3d | DataVariant::Binary2d | DataVariant::ScaStack
    );
    fs::create_dir_all(&a.out)?;
    let mut index = Vec::new();
    for (i, s) in samples.iter().enumerate() {
        let grid = input_grid(prepare_input(s, a.variant, &prep)?, binary)?;
        let name = format!("{i:05}_{}.vgr", s.label.name());
        grid.write(a.out.join(&name))?;
        index.push(json!({"path": name, "label": s.label, "seed": s.seed, "variant": a.variant}));
    }
    let mut f = fs::File::create(a.out.join("index.jsonl"))?;
    for line in index {
        writeln!(f, "{line}")?;
    }
    Ok(())
}

#[derive(Args)]
pub struct SegmentArgs {
    #[command(flatten)]
    common: Common,
    /// VGR1 f32 volume or image.
    #[arg(long)]
    input: PathBuf,
    /// Output VGR1 label grid (u32).
    #[arg(long)]
    out: PathBuf,
    /// Also write the segment-mean smoothed grid here.
    #[arg(long)]
    smoothed: Option<PathBuf>,
}

pub fn segment(a: SegmentArgs) -> Result<()> {
    let grid = Grid::read(&a.input)?;
    let Payload::F32(values) = &grid.payload else {
        return Err(Error::Param("segment expects an f32 grid".into()));
    };
    let ndim = grid.dims.len();
    if grid.stack || !(2..=3).contains(&ndim) {
        return Err(Error::Param(format!(
            "segment expects a 2D or 3D grid, got {:?}",
            grid.dims
        )));
    }
    let cfg = match &a.common.config {
        Some(_) => load_config::<SlicConfig>(a.common.config.as_deref())?,
        None if ndim == 2 => SlicConfig::superpixels(),
        None => SlicConfig::supervoxels(),
    };
    let mut dims = [1usize; 3];
    dims[..ndim].copy_from_slice(&grid.dims);
    let g = GridRef::new(dims, ndim, values)?;
    let labels = slic(g, &cfg)?;
    Grid::from(&labels).write(&a.out)?;
    if let Some(p) = a.smoothed {
        Grid {
            dims: grid.dims.clone(),
            stack: false,
            payload: Payload::F32(smooth_by_segment(g, &labels)?),
        }
        .write(p)?;
    }
    eprintln!("{} segments", labels.segment_count());
    Ok(())
}

#[derive(Args)]
pub struct EncodeArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    manifest: PathBuf,
    /// Output VGP1 file; provenance goes to `<out>.provenance.json`.
    #[arg(long)]
    out: PathBuf,
    /// Encode the mean projection as a superpixel graph.
    #[arg(long)]
    two_d: bool,
}

pub fn encode(a: EncodeArgs) -> Result<()> {
    let cfg = match &a.common.config {
        Some(_) => load_config::<EncodeConfig>(a.common.config.as_deref())?,
        None if a.two_d => EncodeConfig::superpixels(),
        None => EncodeConfig::default(),
    };
    let samples = data::load_samples(&a.manifest)?;
    let graphs = samples
        .iter()
        .map(|s| {
            if a.two_d {
                let img = mean_project(&s.volume);
                encode_graph(GridRef::from(&img), s.label, &cfg)
            } else {
                encode_graph(GridRef::from(&s.volume), s.label, &cfg)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    write_graphs(&graphs, &a.out)?;
    let provenance = Provenance {
        sample_seeds: samples.iter().map(|s| s.seed).collect(),
        encode: cfg,
    };
    let mut side = a.out.clone().into_os_string();
    side.push(".provenance.json");
    data::write_json(&PathBuf::from(side), &provenance)?;
    eprintln!("encoded {} graphs", graphs.len());
    Ok(())
}

#[derive(Args)]
pub struct TrainArgs {
    #[command(flatten)]
    common: Common,
    /// Manifest, or a .vgp graph file.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "graph", value_parser = parse_enum::<DataVariant>)]
    variant: DataVariant,
    /// Checkpoint path for a single run with `--seed`.
    #[arg(long, required_unless_present = "record")]
    out: Option<PathBuf>,
    /// Run every configured seed and write the experiment record here.
    #[arg(long)]
    record: Option<PathBuf>,
}

pub fn train(a: TrainArgs) -> Result<()> {
    let cfg = RunConfig::load(&a.common)?;
    let set = data::load_set(&a.data, a.variant, &cfg.prepare)?;
    if let Some(path) = &a.record {
        let label = a.variant.label();
        let rec =
            run_experiment_observed(&set, &cfg.experiment, label, "healthy-healthy", &|s, m| {
                metrics_line(Some(s), m)
            })?;
        data::write_json(path, &vec![rec])?;
    }
    if let Some(path) = &a.out {
        let seed = a.common.seed.unwrap_or(0);
        let (out, split) = train_seed(&set, &cfg.experiment, seed, |m| metrics_line(None, m))?;
        write_checkpoint(&out.model, path)?;
        let test = set.examples(&split.test);
        if !test.is_empty() {
            eprintln!(
                "best epoch {:?}, test accuracy {:.4}",
                out.best_epoch,
                accuracy(&out.model, &test)?
            );
        }
    }
    Ok(())
}

#[derive(Args)]
pub struct EvalArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "graph", value_parser = parse_enum::<DataVariant>)]
    variant: DataVariant,
    /// Score every sample instead of the test split for `--seed`.
    #[arg(long)]
    all: bool,
}

pub fn eval(a: EvalArgs) -> Result<()> {
    let cfg = RunConfig::load(&a.common)?;
    let model = read_checkpoint(&a.model)?;
    let set = data::load_set(&a.data, a.variant, &cfg.prepare)?;
    let idx: Vec<usize> = if a.all {
        (0..set.len()).collect()
    } else {
        split_dataset(
            &set.labels,
            cfg.experiment.ratios,
            a.common.seed.unwrap_or(0),
        )?
        .test
    };
    let ex = set.examples(&idx);
    let acc = accuracy(&model, &ex)?;
    emit(json!({
        "accuracy": acc,
        "correct": (acc * ex.len() as f64).round() as usize,
        "total": ex.len(),
    }))
}

#[derive(Args)]
pub struct TransferArgs {
    #[command(flatten)]
    common: Common,
    /// Manifest holding both healthy and unhealthy samples.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "graph", value_parser = parse_enum::<DataVariant>)]
    variant: DataVariant,
    /// Output JSON array of experiment records.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "brute,pretrained", value_parser = parse_enum::<TransferMode>)]
    modes: Vec<TransferMode>,
}

pub fn transfer(a: TransferArgs) -> Result<()> {
    let cfg = RunConfig::load(&a.common)?;
    let samples = data::load_samples(&a.data)?;
    let (healthy, unhealthy): (Vec<_>, Vec<_>) =
        samples.into_iter().partition(|s| s.domain.is_healthy());
    if healthy.is_empty() || unhealthy.is_empty() {
        return Err(Error::Param(
            "transfer needs healthy and unhealthy samples".into(),
        ));
    }
    let source = data::labeled(&healthy, a.variant, &cfg.prepare)?;
    let target = data::labeled(&unhealthy, a.variant, &cfg.prepare)?;
    let recs = transfer_experiments(
        &a.modes,
        &source,
        &target,
        &cfg.experiment,
        a.variant.label(),
        &|s, m| metrics_line(Some(s), m),
    )?;
    data::write_json(&a.out, &recs)
}

#[derive(Args)]
pub struct ReportArgs {
    #[command(flatten)]
    common: Common,
    /// Record files written by `train --record` or `transfer`.
    #[arg(long, num_args = 1.., required = true)]
    records: Vec<PathBuf>,
    /// Directory for report.csv and report.txt.
    #[arg(long)]
    out_dir: PathBuf,
}

pub fn report(a: ReportArgs) -> Result<()> {
    let mut records: Vec<ExperimentRecord> = Vec::new();
    for p in &a.records {
        let text = fs::read_to_string(p)?;
        let parsed: serde_json::Value = serde_json::from_str(&text)?;
        if parsed.is_array() {
            records.extend(serde_json::from_value::<Vec<ExperimentRecord>>(parsed)?);
        } else {
            records.push(serde_json::from_value(parsed)?);
        }
    }
    if records.is_empty() {
        return Err(Error::Param("no records to report".into()));
    }
    let rows = rows(&records);
    fs::create_dir_all(&a.out_dir)?;
    write_csv(fs::File::create(a.out_dir.join("report.csv"))?, &rows)?;
    let table = render_table(&rows);
    fs::write(a.out_dir.join("report.txt"), &table)?;
    print!("{table}");
    Ok(())
}
