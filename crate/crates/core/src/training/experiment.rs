use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::split::{split_dataset, Split, DEFAULT_RATIOS};
use super::trainer::{accuracy, train_model, EpochMetrics, Example, TrainConfig, TrainOutcome};
use crate::error::{Error, Result};
use crate::graph::{encode_graph, EncodeConfig};
use crate::neural::{param_count, GraphInput, Input, InputNorm, Model, ModelSpec};
use crate::reduction::{
    binarize, mean_project, or_project, sca_stack, Plane, DEFAULT_BINARIZE_THRESHOLD,
};
use crate::segmentation::{slic, smooth_image, smooth_volume, GridRef, SlicConfig};
use crate::synth::derive_seed;
use crate::volume::{ClassLabel, Sample};

/// Representation a model is trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataVariant {
    Gray3d,
    Binary3d,
    /// Mean projection along the axial axis.
    Gray2d,
    /// Axial OR projection of the binarized volume.
    Binary2d,
    /// Three orthogonal OR projections as channels.
    ScaStack,
    /// Gray 2D image smoothed over superpixels.
    Superpixels,
    /// Gray volume smoothed over supervoxels.
    Supervoxels,
    /// Supervoxel region graph.
    Graph,
    /// Superpixel region graph of the mean projection.
    Graph2d,
}

impl DataVariant {
    pub const ALL: [DataVariant; 9] = [
        DataVariant::Gray3d,
        DataVariant::Binary3d,
        DataVariant::Gray2d,
        DataVariant::Binary2d,
        DataVariant::ScaStack,
        DataVariant::Superpixels,
        DataVariant::Supervoxels,
        DataVariant::Graph,
        DataVariant::Graph2d,
    ];

    pub fn is_graph(self) -> bool {
        matches!(self, DataVariant::Graph | DataVariant::Graph2d)
    }

    pub fn label(self) -> &'static str {
        match self {
            DataVariant::Gray3d => "3D gray",
            DataVariant::Binary3d => "3D binary",
            DataVariant::Gray2d => "2D gray",
            DataVariant::Binary2d => "2D binary",
            DataVariant::ScaStack => "2D SCA stack",
            DataVariant::Superpixels => "superpixels",
            DataVariant::Supervoxels => "supervoxels",
            DataVariant::Graph => "graph 3D",
            DataVariant::Graph2d => "graph 2D",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrepareConfig {
    pub binarize_threshold: f32,
    pub supervoxels: SlicConfig,
    pub superpixels: SlicConfig,
    pub graph3d: EncodeConfig,
    pub graph2d: EncodeConfig,
}

impl Default for PrepareConfig {
    fn default() -> Self {
        Self {
            binarize_threshold: DEFAULT_BINARIZE_THRESHOLD,
            supervoxels: SlicConfig::supervoxels(),
            superpixels: SlicConfig::superpixels(),
            graph3d: EncodeConfig::default(),
            graph2d: EncodeConfig::superpixels(),
        }
    }
}

fn grid(channels: usize, dims: [usize; 3], ndim: usize, data: Vec<f32>) -> Input<f32> {
    Input::Grid {
        channels,
        dims,
        ndim,
        data,
    }
}

/// Turn one sample into model input for `variant`.
pub fn prepare_input(s: &Sample, variant: DataVariant, cfg: &PrepareConfig) -> Result<Input<f32>> {
    let v = &s.volume;
    let d = v.dims();
    Ok(match variant {
        DataVariant::Gray3d => grid(1, d, 3, v.data().to_vec()),
        DataVariant::Binary3d => {
            let b = binarize(v, cfg.binarize_threshold)?;
            grid(1, d, 3, b.data().iter().map(|&x| x as f32).collect())
        }
        DataVariant::Gray2d => {
            let img = mean_project(v);
            let [w, h] = img.dims();
            grid(1, [w, h, 1], 2, img.into_data())
        }
        DataVariant::Binary2d => {
            let img = or_project(&binarize(v, cfg.binarize_threshold)?, Plane::Axial);
            let [w, h] = img.dims();
            grid(
                1,
                [w, h, 1],
                2,
                img.data().iter().map(|&x| x as f32).collect(),
            )
        }
        DataVariant::ScaStack => {
            let st = sca_stack(&binarize(v, cfg.binarize_threshold)?);
            let [w, h] = st.dims();
            grid(3, [w, h, 1], 2, st.to_f32())
        }
        DataVariant::Superpixels => {
            let img = mean_project(v);
            let labels = slic(GridRef::from(&img), &cfg.superpixels)?;
            let img = smooth_image(&img, &labels)?;
            let [w, h] = img.dims();
            grid(1, [w, h, 1], 2, img.into_data())
        }
        DataVariant::Supervoxels => {
            let labels = slic(GridRef::from(v), &cfg.supervoxels)?;
            grid(1, d, 3, smooth_volume(v, &labels)?.into_data())
        }
        DataVariant::Graph => {
            let g = encode_graph(GridRef::from(v), s.label, &cfg.graph3d)?;
            Input::Graph(GraphInput::from(&g))
        }
        DataVariant::Graph2d => {
            let img = mean_project(v);
            let g = encode_graph(GridRef::from(&img), s.label, &cfg.graph2d)?;
            Input::Graph(GraphInput::from(&g))
        }
    })
}

/// Prepare a whole dataset in parallel, preserving order.
pub fn prepare_inputs(
    samples: &[Sample],
    variant: DataVariant,
    cfg: &PrepareConfig,
) -> Result<Vec<Input<f32>>> {
    samples
        .par_iter()
        .map(|s| prepare_input(s, variant, cfg))
        .collect()
}

/// Default architecture for the shape of `input`.
pub fn default_spec_for(input: &Input<f32>) -> Result<ModelSpec> {
    match input {
        Input::Grid {
            channels,
            dims,
            ndim,
            ..
        } => ModelSpec::default_cnn(*channels, &dims[..*ndim]),
        Input::Graph(g) => ModelSpec::default_gnn(g.feature_dim, g.pseudo_dim),
    }
}

fn input_signature(x: &Input<f32>) -> (usize, usize, bool) {
    match x {
        Input::Grid { channels, ndim, .. } => (*channels, *ndim, false),
        Input::Graph(g) => (g.feature_dim, g.pseudo_dim, true),
    }
}

/// Inputs with class indices.
#[derive(Debug, Clone)]
pub struct LabeledSet {
    pub inputs: Vec<Input<f32>>,
    pub labels: Vec<ClassLabel>,
}

impl LabeledSet {
    pub fn new(inputs: Vec<Input<f32>>, labels: Vec<ClassLabel>) -> Result<Self> {
        if inputs.len() != labels.len() {
            return Err(Error::param(format!(
                "{} inputs but {} labels",
                inputs.len(),
                labels.len()
            )));
        }
        if let Some(first) = inputs.first() {
            let sig = input_signature(first);
            if inputs.iter().any(|x| input_signature(x) != sig) {
                return Err(Error::param("inputs are not encoded uniformly"));
            }
        }
        Ok(Self { inputs, labels })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn examples(&self, idx: &[usize]) -> Vec<Example<'_>> {
        idx.iter()
            .map(|&i| (&self.inputs[i], self.labels[i].index()))
            .collect()
    }

    fn signature(&self) -> Option<(usize, usize, bool)> {
        self.inputs.first().map(input_signature)
    }

    /// Node-feature statistics over the graphs at `idx`; `None` for grids.
    pub fn fit_graph_norm(&self, idx: &[usize]) -> Result<Option<InputNorm>> {
        let Some((width, _, true)) = self.signature() else {
            return Ok(None);
        };
        let rows = idx.iter().flat_map(|&i| match &self.inputs[i] {
            Input::Graph(g) => g.features.chunks(width),
            Input::Grid { .. } => unreachable!("uniform encoding"),
        });
        InputNorm::fit(width, rows).map(Some)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub train: TrainConfig,
    /// Extra training applied on the target domain in pretrained transfer.
    pub finetune: TrainConfig,
    pub seeds: Vec<u64>,
    pub ratios: [f64; 3],
    /// Overrides the default architecture.
    pub spec: Option<ModelSpec>,
    /// Standardize graph node features with training-split statistics.
    pub normalize_graph_features: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            finetune: TrainConfig::default(),
            seeds: vec![0, 1, 2, 3, 4],
            ratios: DEFAULT_RATIOS,
            spec: None,
            normalize_graph_features: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracySummary {
    pub mean: f64,
    pub std: f64,
}

/// Mean and sample standard deviation over per-seed accuracies.
pub fn summarize(accs: &[f64]) -> Result<AccuracySummary> {
    if accs.len() < 3 {
        return Err(Error::param(format!(
            "need at least 3 seeds for a standard deviation, got {}",
            accs.len()
        )));
    }
    let n = accs.len() as f64;
    let mean = accs.iter().sum::<f64>() / n;
    let var = accs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(AccuracySummary {
        mean,
        std: var.sqrt(),
    })
}

/// Test accuracy of one model per seed, summarized.
pub fn evaluate(runs: &[(&Model<f32>, &[Example])]) -> Result<AccuracySummary> {
    if runs.len() < 3 {
        return Err(Error::param(format!(
            "need at least 3 seeds for a standard deviation, got {}",
            runs.len()
        )));
    }
    let accs = runs
        .iter()
        .map(|(m, set)| {
            if set.is_empty() {
                Err(Error::param("empty test set"))
            } else {
                accuracy(m, set)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    summarize(&accs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub data: String,
    pub train_test: String,
    pub model: String,
    pub accuracies: Vec<f64>,
    pub summary: Option<AccuracySummary>,
    pub params: usize,
    pub wall_clock_secs: f64,
    pub config: ExperimentConfig,
}

impl ExperimentRecord {
    fn finish(
        data: &str,
        train_test: &str,
        spec: &ModelSpec,
        accuracies: Vec<f64>,
        started: Instant,
        config: &ExperimentConfig,
    ) -> Result<Self> {
        let summary = if accuracies.len() >= 3 {
            Some(summarize(&accuracies)?)
        } else {
            None
        };
        Ok(Self {
            data: data.to_string(),
            train_test: train_test.to_string(),
            model: format!("{:?}", spec.kind).to_uppercase(),
            accuracies,
            summary,
            params: param_count(spec)?.total,
            wall_clock_secs: started.elapsed().as_secs_f64(),
            config: config.clone(),
        })
    }
}

fn resolve_spec(cfg: &ExperimentConfig, set: &LabeledSet) -> Result<ModelSpec> {
    let spec = match &cfg.spec {
        Some(s) => s.clone(),
        None => default_spec_for(
            set.inputs
                .first()
                .ok_or_else(|| Error::param("empty dataset"))?,
        )?,
    };
    spec.validate()?;
    Ok(spec)
}

/// The spec for one seed, with input statistics from `train` when enabled.
fn spec_for_split(
    spec: &ModelSpec,
    cfg: &ExperimentConfig,
    set: &LabeledSet,
    train: &[usize],
) -> Result<ModelSpec> {
    let mut spec = spec.clone();
    if cfg.normalize_graph_features && spec.input_norm.is_none() {
        spec.input_norm = set.fit_graph_norm(train)?;
    }
    Ok(spec)
}

fn seeded(cfg: &TrainConfig, seed: u64) -> TrainConfig {
    TrainConfig {
        seed: derive_seed(seed, 0x0054_5241_494e),
        ..cfg.clone()
    }
}

fn init_seed(seed: u64) -> u64 {
    derive_seed(seed, 0x494e_4954)
}

/// Per-epoch callback receiving the run seed. Seeds may run concurrently.
pub type Observer = dyn Fn(u64, &EpochMetrics) + Sync;

/// Per seed: split, train with early stopping on validation, test.
pub fn run_experiment(
    set: &LabeledSet,
    cfg: &ExperimentConfig,
    data: &str,
    train_test: &str,
) -> Result<ExperimentRecord> {
    run_experiment_observed(set, cfg, data, train_test, &|_, _| {})
}

pub fn run_experiment_observed(
    set: &LabeledSet,
    cfg: &ExperimentConfig,
    data: &str,
    train_test: &str,
    observer: &Observer,
) -> Result<ExperimentRecord> {
    let started = Instant::now();
    let spec = resolve_spec(cfg, set)?;
    let accs = cfg
        .seeds
        .par_iter()
        .map(|&seed| -> Result<f64> {
            let (out, split) = train_split(&spec, set, cfg, seed, |m| observer(seed, m))?;
            accuracy(&out.model, &set.examples(&split.test))
        })
        .collect::<Result<Vec<_>>>()?;
    ExperimentRecord::finish(data, train_test, &spec, accs, started, cfg)
}

fn train_split(
    spec: &ModelSpec,
    set: &LabeledSet,
    cfg: &ExperimentConfig,
    seed: u64,
    on_epoch: impl FnMut(&EpochMetrics),
) -> Result<(TrainOutcome, Split)> {
    let split = split_dataset(&set.labels, cfg.ratios, seed)?;
    let spec = spec_for_split(spec, cfg, set, &split.train)?;
    let model = Model::init(spec, init_seed(seed))?;
    let out = train_model(
        model,
        &set.examples(&split.train),
        &set.examples(&split.validation),
        &seeded(&cfg.train, seed),
        on_epoch,
    )?;
    Ok((out, split))
}

/// One run of [`run_experiment`]: the split for `seed` and the trained model.
pub fn train_seed(
    set: &LabeledSet,
    cfg: &ExperimentConfig,
    seed: u64,
    on_epoch: impl FnMut(&EpochMetrics),
) -> Result<(TrainOutcome, Split)> {
    let spec = resolve_spec(cfg, set)?;
    train_split(&spec, set, cfg, seed, on_epoch)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransferMode {
    /// Train on the source domain, test on the target domain.
    Brute,
    /// As brute, then fine-tune all layers on the target train split.
    Pretrained,
}

impl TransferMode {
    pub fn train_test(self) -> &'static str {
        match self {
            TransferMode::Brute => "healthy-unhealthy",
            TransferMode::Pretrained => "healthy+unhealthy-unhealthy",
        }
    }
}

/// Healthy → unhealthy transfer. For each seed both domains are split with
/// the same seed, so brute and pretrained runs share source models and
/// target test sets.
pub fn transfer_experiment(
    mode: TransferMode,
    source: &LabeledSet,
    target: &LabeledSet,
    cfg: &ExperimentConfig,
    data: &str,
) -> Result<ExperimentRecord> {
    let mut r = transfer_experiments(&[mode], source, target, cfg, data, &|_, _| {})?;
    Ok(r.remove(0))
}

/// Both transfer modes from one set of source models, one record per mode.
pub fn transfer_experiments(
    modes: &[TransferMode],
    source: &LabeledSet,
    target: &LabeledSet,
    cfg: &ExperimentConfig,
    data: &str,
    observer: &Observer,
) -> Result<Vec<ExperimentRecord>> {
    let started = Instant::now();
    if source.signature() != target.signature() {
        return Err(Error::param(format!(
            "source and target encodings differ: {:?} vs {:?}",
            source.signature(),
            target.signature()
        )));
    }
    let spec = resolve_spec(cfg, source)?;
    let per_seed = cfg
        .seeds
        .par_iter()
        .map(|&seed| -> Result<Vec<f64>> {
            let s_split = split_dataset(&source.labels, cfg.ratios, seed)?;
            let t_split: Split = split_dataset(&target.labels, cfg.ratios, seed)?;
            let spec = spec_for_split(&spec, cfg, source, &s_split.train)?;
            let model = Model::init(spec, init_seed(seed))?;
            let pre = train_model(
                model,
                &source.examples(&s_split.train),
                &source.examples(&s_split.validation),
                &seeded(&cfg.train, seed),
                |m| observer(seed, m),
            )?
            .model;
            let test = target.examples(&t_split.test);
            modes
                .iter()
                .map(|mode| match mode {
                    TransferMode::Brute => accuracy(&pre, &test),
                    TransferMode::Pretrained => {
                        let tuned = train_model(
                            pre.clone(),
                            &target.examples(&t_split.train),
                            &target.examples(&t_split.validation),
                            &seeded(&cfg.finetune, derive_seed(seed, 1)),
                            |m| observer(seed, m),
                        )?;
                        accuracy(&tuned.model, &test)
                    }
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;
    modes
        .iter()
        .enumerate()
        .map(|(mi, mode)| {
            let accs = per_seed.iter().map(|a| a[mi]).collect();
            ExperimentRecord::finish(data, mode.train_test(), &spec, accs, started, cfg)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_uses_sample_std() {
        let s = summarize(&[0.5, 0.7, 0.9]).unwrap();
        assert!((s.mean - 0.7).abs() < 1e-12);
        assert!((s.std - 0.2).abs() < 1e-12);
        assert!(summarize(&[1.0, 1.0]).is_err());
        let p = summarize(&[1.0; 5]).unwrap();
        assert_eq!((p.mean, p.std), (1.0, 0.0));
    }
}
