//! Loading configs, manifests and datasets from disk.

use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use volgraph_core::container::read_volume;
use volgraph_core::graph_io::read_graphs;
use volgraph_core::neural::GraphInput;
use volgraph_core::synth::{read_manifest, ManifestRecord};
use volgraph_core::training::{prepare_inputs, DataVariant, LabeledSet, PrepareConfig};
use volgraph_core::{Error, Input, Result, Sample};

pub fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = fs::read_to_string(p)?;
            serde_json::from_str(&text).map_err(|e| Error::Param(format!("{}: {e}", p.display())))
        }
    }
}

pub fn load_manifest(path: &Path) -> Result<Vec<ManifestRecord>> {
    read_manifest(BufReader::new(File::open(path)?))
}

fn resolve(manifest: &Path, entry: &str) -> PathBuf {
    manifest.parent().unwrap_or(Path::new(".")).join(entry)
}

pub fn load_samples(manifest: &Path) -> Result<Vec<Sample>> {
    load_manifest(manifest)?
        .into_iter()
        .map(|r| {
            Ok(Sample {
                volume: read_volume(resolve(manifest, &r.path))?,
                label: r.label,
                domain: r.domain,
                variant: r.variant,
                seed: r.seed,
            })
        })
        .collect()
}

pub fn is_graph_file(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "vgp")
}

/// A `.vgp` graph file, or a manifest prepared as `variant`.
pub fn load_set(path: &Path, variant: DataVariant, prep: &PrepareConfig) -> Result<LabeledSet> {
    if is_graph_file(path) {
        let graphs = read_graphs(path)?;
        let labels = graphs.iter().map(|g| g.label).collect();
        let inputs = graphs
            .iter()
            .map(|g| Input::Graph(GraphInput::from(g)))
            .collect();
        return LabeledSet::new(inputs, labels);
    }
    let samples = load_samples(path)?;
    labeled(&samples, variant, prep)
}

pub fn labeled(
    samples: &[Sample],
    variant: DataVariant,
    prep: &PrepareConfig,
) -> Result<LabeledSet> {
    let inputs = prepare_inputs(samples, variant, prep)?;
    LabeledSet::new(inputs, samples.iter().map(|s| s.label).collect())
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}
