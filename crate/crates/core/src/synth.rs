//! Synthetic activation-volume generator.
//!
//! Each class owns two or three canonical blob centers (normalized
//! coordinates, versioned in `assets/synth_v1.json`). A sample is the sum of
//! isotropic Gaussian blobs with per-sample amplitude and width, plus clamped
//! additive noise, min-max normalized. Unhealthy samples get a zeroed lesion
//! sphere and jittered blob centers.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{
    normalize_in_place, threshold_volume, ClassLabel, Domain, Lesion, MapVariant, Sample, Volume,
};

const SHIPPED_CONFIG: &str = include_str!("../assets/synth_v1.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub version: u32,
    pub dims: [usize; 3],
    pub amplitude_range: [f32; 2],
    pub sigma_range: [f32; 2],
    pub noise_sigma: f32,
    pub threshold: f32,
    pub unhealthy_jitter: f32,
    pub lesion_radius_range: [f32; 2],
    pub centers: BTreeMap<ClassLabel, Vec<[f32; 3]>>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        serde_json::from_str(SHIPPED_CONFIG).expect("shipped synth config is valid")
    }
}

impl SynthConfig {
    pub fn with_dims(mut self, dims: [usize; 3]) -> Self {
        self.dims = dims;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.contains(&0) {
            return Err(Error::param("synth dims must be positive"));
        }
        for c in ClassLabel::ALL {
            match self.centers.get(&c) {
                Some(cs) if !cs.is_empty() => {}
                _ => return Err(Error::param(format!("no blob centers for class {c}"))),
            }
        }
        if self.noise_sigma < 0.0 || self.sigma_range[0] <= 0.0 {
            return Err(Error::param("noise and blob widths must be positive"));
        }
        Ok(())
    }

    /// Canonical centers of `label` in voxel coordinates.
    pub fn voxel_centers(&self, label: ClassLabel) -> Vec<[f32; 3]> {
        self.centers[&label]
            .iter()
            .map(|c| {
                let mut v = [0.0; 3];
                for a in 0..3 {
                    v[a] = c[a] * (self.dims[a] - 1) as f32;
                }
                v
            })
            .collect()
    }
}

/// SplitMix64 finalizer; used to derive independent per-sample seeds.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the `counter`-th sample under `master`.
pub fn derive_seed(master: u64, counter: u64) -> u64 {
    splitmix64(master ^ splitmix64(counter))
}

fn uniform(rng: &mut ChaCha8Rng, range: [f32; 2]) -> f32 {
    if range[1] > range[0] {
        rng.gen_range(range[0]..=range[1])
    } else {
        range[0]
    }
}

/// Generate one sample. Deterministic in all arguments.
pub fn synth_generate(
    cfg: &SynthConfig,
    label: ClassLabel,
    domain: Domain,
    variant: MapVariant,
    seed: u64,
) -> Result<Sample> {
    cfg.validate()?;
    let dims = cfg.dims;
    if let Domain::Unhealthy { lesion } = &domain {
        lesion.validate(dims)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    struct Blob {
        center: [f32; 3],
        amplitude: f32,
        inv_two_var: f32,
    }
    let blobs: Vec<Blob> = cfg
        .voxel_centers(label)
        .into_iter()
        .map(|mut center| {
            let amplitude = uniform(&mut rng, cfg.amplitude_range);
            let sigma = uniform(&mut rng, cfg.sigma_range);
            if !domain.is_healthy() && cfg.unhealthy_jitter > 0.0 {
                let j = cfg.unhealthy_jitter;
                let mut d = [0f32; 3];
                for v in d.iter_mut() {
                    *v = rng.gen_range(-j..=j);
                }
                let norm = d.iter().map(|v| v * v).sum::<f32>().sqrt();
                let scale = if norm > j { j / norm } else { 1.0 };
                for a in 0..3 {
                    center[a] += d[a] * scale;
                }
            }
            Blob {
                center,
                amplitude,
                inv_two_var: 1.0 / (2.0 * sigma * sigma),
            }
        })
        .collect();

    let mut vol = Volume::filled(dims, 0.0)?;
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                let mut s = 0.0f32;
                for b in &blobs {
                    let dx = x as f32 - b.center[0];
                    let dy = y as f32 - b.center[1];
                    let dz = z as f32 - b.center[2];
                    s += b.amplitude * (-(dx * dx + dy * dy + dz * dz) * b.inv_two_var).exp();
                }
                vol.set(x, y, z, s);
            }
        }
    }

    if let Domain::Unhealthy { lesion } = &domain {
        for z in 0..dims[2] {
            for y in 0..dims[1] {
                for x in 0..dims[0] {
                    if lesion.contains(x, y, z) {
                        vol.set(x, y, z, 0.0);
                    }
                }
            }
        }
    }

    if cfg.noise_sigma > 0.0 {
        let noise = Normal::new(0.0f32, cfg.noise_sigma)
            .map_err(|e| Error::param(format!("noise sigma: {e}")))?;
        for v in vol.data_mut() {
            *v = (*v + noise.sample(&mut rng)).clamp(0.0, 1.0);
        }
    }
    normalize_in_place(vol.data_mut());

    let volume = match variant {
        MapVariant::Full => vol,
        MapVariant::Thresholded => threshold_volume(&vol, cfg.threshold)?,
    };
    Ok(Sample {
        volume,
        label,
        domain,
        variant,
        seed,
    })
}

/// Draw a lesion that intersects the grid, from its own seed stream.
pub fn random_lesion(cfg: &SynthConfig, seed: u64) -> Lesion {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x4c45_5349_4f4e));
    let center = [
        rng.gen_range(0..cfg.dims[0]),
        rng.gen_range(0..cfg.dims[1]),
        rng.gen_range(0..cfg.dims[2]),
    ];
    Lesion {
        center,
        radius: uniform(&mut rng, cfg.lesion_radius_range),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainKind {
    Healthy,
    Unhealthy,
}

/// Balanced dataset: `n` samples per (class, domain).
///
/// Samples are ordered domain-major, then class, then repeat index `i`.
/// Sample seeds come from a counter scheme:
/// `counter = (domain_pos * 7 + class_index) * n + i`, where `domain_pos` is
/// 0 for healthy and 1 for unhealthy, and `seed = derive_seed(master, counter)`.
/// Unhealthy lesions are drawn by [`random_lesion`] from the sample seed.
pub fn make_dataset(
    cfg: &SynthConfig,
    n: usize,
    domains: &[DomainKind],
    variant: MapVariant,
    master_seed: u64,
) -> Result<Vec<Sample>> {
    if n == 0 {
        return Err(Error::param("samples per (class, domain) must be >= 1"));
    }
    cfg.validate()?;
    let mut jobs = Vec::with_capacity(domains.len() * 7 * n);
    for &dk in domains {
        let dpos = match dk {
            DomainKind::Healthy => 0u64,
            DomainKind::Unhealthy => 1,
        };
        for c in ClassLabel::ALL {
            for i in 0..n {
                let counter = (dpos * 7 + c.index() as u64) * n as u64 + i as u64;
                jobs.push((dk, c, derive_seed(master_seed, counter)));
            }
        }
    }
    jobs.into_par_iter()
        .map(|(dk, c, seed)| {
            let domain = match dk {
                DomainKind::Healthy => Domain::Healthy,
                DomainKind::Unhealthy => Domain::Unhealthy {
                    lesion: random_lesion(cfg, seed),
                },
            };
            synth_generate(cfg, c, domain, variant, seed)
        })
        .collect()
}

/// One line of the JSON-lines dataset manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub path: String,
    pub label: ClassLabel,
    pub domain: Domain,
    pub variant: MapVariant,
    pub seed: u64,
}

pub fn write_manifest<W: Write>(mut w: W, records: &[ManifestRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_manifest<R: BufRead>(r: R) -> Result<Vec<ManifestRecord>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}
