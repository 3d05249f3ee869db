//! Volume and sample types plus the intensity operators shared by every stage.
//!
//! Axis convention: `x` is the sagittal index, `y` coronal and `z` axial.
//! Linear layout is x-fastest, z-slowest: `idx = (z * Y + y) * X + x`.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Default acquisition grid (sagittal × coronal × axial).
pub const DEFAULT_DIMS: [usize; 3] = [42, 51, 34];

/// Dense 3D scalar grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    dims: [usize; 3],
    data: Vec<f32>,
}

impl Volume {
    pub fn new(dims: [usize; 3], data: Vec<f32>) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::param(format!(
                "volume dims must be positive, got {dims:?}"
            )));
        }
        let n = checked_len(&dims)?;
        if data.len() != n {
            return Err(Error::Shape(format!(
                "volume {dims:?} needs {n} values, got {}",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn filled(dims: [usize; 3], value: f32) -> Result<Self> {
        let n = checked_len(&dims)?;
        Self::new(dims, vec![value; n])
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        (z * self.dims[1] + y) * self.dims[0] + x
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> f32 {
        self.data[self.index(x, y, z)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, z: usize, v: f32) {
        let i = self.index(x, y, z);
        self.data[i] = v;
    }

    pub fn min_max(&self) -> (f32, f32) {
        min_max(&self.data)
    }
}

pub(crate) fn checked_len(dims: &[usize]) -> Result<usize> {
    dims.iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::param(format!("dims {dims:?} overflow")))
}

pub(crate) fn min_max(data: &[f32]) -> (f32, f32) {
    data.iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        })
}

/// Min-max rescale to `[0, 1]`. A constant volume maps to all zeros.
pub fn normalize_intensity(v: &Volume) -> Volume {
    let mut out = v.clone();
    normalize_in_place(&mut out.data);
    out
}

pub(crate) fn normalize_in_place(data: &mut [f32]) {
    let (lo, hi) = min_max(data);
    let range = hi - lo;
    if range.is_nan() || range <= 0.0 {
        data.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    for v in data.iter_mut() {
        *v = (*v - lo) / range;
    }
}

/// Keep values `>= t`, zero the rest.
pub fn threshold_volume(v: &Volume, t: f32) -> Result<Volume> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::param(format!(
            "threshold must lie in (0, 1], got {t}"
        )));
    }
    let data = v
        .data
        .iter()
        .map(|&x| if x >= t { x } else { 0.0 })
        .collect();
    Ok(Volume { dims: v.dims, data })
}

/// The seven functional-network classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ClassLabel {
    #[serde(rename = "DMN")]
    Dmn,
    #[serde(rename = "LANG")]
    Lang,
    #[serde(rename = "rFPCN")]
    RFpcn,
    #[serde(rename = "lFPCN")]
    LFpcn,
    #[serde(rename = "SAL")]
    Sal,
    #[serde(rename = "DAN")]
    Dan,
    #[serde(rename = "VAN")]
    Van,
}

pub const NUM_CLASSES: usize = 7;

impl ClassLabel {
    pub const ALL: [ClassLabel; NUM_CLASSES] = [
        ClassLabel::Dmn,
        ClassLabel::Lang,
        ClassLabel::RFpcn,
        ClassLabel::LFpcn,
        ClassLabel::Sal,
        ClassLabel::Dan,
        ClassLabel::Van,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Self> {
        Self::ALL
            .get(i)
            .copied()
            .ok_or_else(|| Error::param(format!("class index {i} out of range 0..{NUM_CLASSES}")))
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassLabel::Dmn => "DMN",
            ClassLabel::Lang => "LANG",
            ClassLabel::RFpcn => "rFPCN",
            ClassLabel::LFpcn => "lFPCN",
            ClassLabel::Sal => "SAL",
            ClassLabel::Dan => "DAN",
            ClassLabel::Van => "VAN",
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::param(format!("unknown class label {s:?}")))
    }
}

/// Spherical lesion mask, in voxel units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lesion {
    pub center: [usize; 3],
    pub radius: f32,
}

impl Lesion {
    pub fn contains(&self, x: usize, y: usize, z: usize) -> bool {
        let d2: f32 = [x, y, z]
            .iter()
            .zip(self.center.iter())
            .map(|(&a, &c)| {
                let d = a as f32 - c as f32;
                d * d
            })
            .sum();
        d2 <= self.radius * self.radius
    }

    /// The sphere must reach at least one voxel of the grid.
    pub fn validate(&self, dims: [usize; 3]) -> Result<()> {
        if self.radius.is_nan() || self.radius < 0.0 {
            return Err(Error::param("lesion radius must be non-negative"));
        }
        // Closest in-grid point to the center.
        let d2: f32 = (0..3)
            .map(|a| {
                let c = self.center[a] as f32;
                let hi = (dims[a] - 1) as f32;
                let d = if c > hi { c - hi } else { 0.0 };
                d * d
            })
            .sum();
        if d2 > self.radius * self.radius {
            return Err(Error::param(format!(
                "lesion at {:?} r={} misses the {dims:?} grid",
                self.center, self.radius
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Domain {
    Healthy,
    Unhealthy { lesion: Lesion },
}

impl Domain {
    pub fn is_healthy(&self) -> bool {
        matches!(self, Domain::Healthy)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Domain::Healthy => "healthy",
            Domain::Unhealthy { .. } => "unhealthy",
        }
    }
}

/// Full connectivity map or its thresholded counterpart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MapVariant {
    Full,
    Thresholded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub volume: Volume,
    pub label: ClassLabel,
    pub domain: Domain,
    pub variant: MapVariant,
    pub seed: u64,
}
