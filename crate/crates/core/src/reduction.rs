//! Spatial dimension reduction: mean and OR projections, binarization and
//! the sagittal/coronal/axial binary stack.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::Volume;

pub const DEFAULT_BINARIZE_THRESHOLD: f32 = 0.25;

/// Row-major 2D scalar image, x-fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Image2D {
    dims: [usize; 2],
    data: Vec<f32>,
}

impl Image2D {
    pub fn new(dims: [usize; 2], data: Vec<f32>) -> Result<Self> {
        if dims.contains(&0) || data.len() != dims[0] * dims[1] {
            return Err(Error::Shape(format!(
                "image {dims:?} with {} values",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn dims(&self) -> [usize; 2] {
        self.dims
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.dims[0] + x]
    }

    /// View as a single-slice volume (`Z = 1`).
    pub fn to_volume(&self) -> Volume {
        Volume::new([self.dims[0], self.dims[1], 1], self.data.clone())
            .expect("image dims are valid volume dims")
    }
}

/// 3D grid restricted to `{0, 1}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryVolume {
    dims: [usize; 3],
    data: Vec<u8>,
}

impl BinaryVolume {
    pub fn new(dims: [usize; 3], data: Vec<u8>) -> Result<Self> {
        if dims.contains(&0) || data.len() != dims.iter().product::<usize>() {
            return Err(Error::Shape(format!(
                "binary volume {dims:?} with {} values",
                data.len()
            )));
        }
        if data.iter().any(|&b| b > 1) {
            return Err(Error::param("binary volume values must be 0 or 1"));
        }
        Ok(Self { dims, data })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> u8 {
        self.data[(z * self.dims[1] + y) * self.dims[0] + x]
    }

    pub fn to_volume(&self) -> Volume {
        Volume::new(self.dims, self.data.iter().map(|&b| b as f32).collect()).expect("same dims")
    }

    /// Elementwise OR with another volume of the same shape.
    pub fn or(&self, other: &BinaryVolume) -> Result<BinaryVolume> {
        if self.dims != other.dims {
            return Err(Error::Shape("OR of mismatched binary volumes".into()));
        }
        Ok(BinaryVolume {
            dims: self.dims,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a | b)
                .collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryImage2D {
    dims: [usize; 2],
    data: Vec<u8>,
}

impl BinaryImage2D {
    pub fn new(dims: [usize; 2], data: Vec<u8>) -> Result<Self> {
        if dims.contains(&0) || data.len() != dims[0] * dims[1] {
            return Err(Error::Shape(format!(
                "binary image {dims:?} with {} values",
                data.len()
            )));
        }
        if data.iter().any(|&b| b > 1) {
            return Err(Error::param("binary image values must be 0 or 1"));
        }
        Ok(Self { dims, data })
    }

    pub fn dims(&self) -> [usize; 2] {
        self.dims
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.dims[0] + x]
    }

    pub fn to_image(&self) -> Image2D {
        Image2D::new(self.dims, self.data.iter().map(|&b| b as f32).collect()).expect("same dims")
    }

    /// Nearest-neighbor resample with center alignment:
    /// `src = floor((dst + 0.5) * src_len / dst_len)`.
    pub fn resample_nearest(&self, dims: [usize; 2]) -> BinaryImage2D {
        let [w, h] = dims;
        let map = |dst: usize, src_len: usize, dst_len: usize| {
            (((2 * dst + 1) * src_len) / (2 * dst_len)).min(src_len - 1)
        };
        let mut data = Vec::with_capacity(w * h);
        for y in 0..h {
            let sy = map(y, self.dims[1], h);
            for x in 0..w {
                let sx = map(x, self.dims[0], w);
                data.push(self.get(sx, sy));
            }
        }
        BinaryImage2D { dims, data }
    }
}

/// Projection planes, named by the plane the image lies in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Plane {
    Sagittal,
    Coronal,
    Axial,
}

impl Plane {
    /// (collapsed axis, image width axis, image height axis)
    fn axes(self) -> (usize, usize, usize) {
        match self {
            Plane::Sagittal => (0, 1, 2),
            Plane::Coronal => (1, 0, 2),
            Plane::Axial => (2, 0, 1),
        }
    }
}

/// Voxelwise `v >= t`.
pub fn binarize(v: &Volume, t: f32) -> Result<BinaryVolume> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::param(format!(
            "binarize threshold must lie in (0, 1), got {t}"
        )));
    }
    Ok(BinaryVolume {
        dims: v.dims(),
        data: v.data().iter().map(|&x| u8::from(x >= t)).collect(),
    })
}

/// Mean over the axial axis; output dims `(X, Y)`.
pub fn mean_project(v: &Volume) -> Image2D {
    let [nx, ny, nz] = v.dims();
    let plane = nx * ny;
    let mut acc = vec![0f64; plane];
    for slice in v.data().chunks_exact(plane) {
        for (a, &s) in acc.iter_mut().zip(slice) {
            *a += s as f64;
        }
    }
    let data = acc.into_iter().map(|a| (a / nz as f64) as f32).collect();
    Image2D {
        dims: [nx, ny],
        data,
    }
}

/// Logical OR collapsing the axis perpendicular to `plane`.
pub fn or_project(b: &BinaryVolume, plane: Plane) -> BinaryImage2D {
    let dims = b.dims();
    let (_, wa, ha) = plane.axes();
    let (w, h) = (dims[wa], dims[ha]);
    let mut data = vec![0u8; w * h];
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                let c = [x, y, z];
                data[c[ha] * w + c[wa]] |= b.get(x, y, z);
            }
        }
    }
    BinaryImage2D { dims: [w, h], data }
}

/// Three OR projections in (sagittal, coronal, axial) order, resampled to a
/// common `(max W, max H)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScaStack {
    channels: [BinaryImage2D; 3],
}

impl ScaStack {
    pub fn from_channels(channels: [BinaryImage2D; 3]) -> Result<Self> {
        let d = channels[0].dims();
        if channels.iter().any(|c| c.dims() != d) {
            return Err(Error::Shape("stack channels must share dims".into()));
        }
        Ok(Self { channels })
    }

    pub fn dims(&self) -> [usize; 2] {
        self.channels[0].dims()
    }

    pub fn channel(&self, plane: Plane) -> &BinaryImage2D {
        match plane {
            Plane::Sagittal => &self.channels[0],
            Plane::Coronal => &self.channels[1],
            Plane::Axial => &self.channels[2],
        }
    }

    pub fn channels(&self) -> &[BinaryImage2D; 3] {
        &self.channels
    }

    /// Channel-major `[3, H, W]` float data.
    pub fn to_f32(&self) -> Vec<f32> {
        self.channels
            .iter()
            .flat_map(|c| c.data().iter().map(|&b| b as f32))
            .collect()
    }
}

pub fn sca_stack(b: &BinaryVolume) -> ScaStack {
    let planes = [Plane::Sagittal, Plane::Coronal, Plane::Axial];
    let projs = planes.map(|p| or_project(b, p));
    let w = projs.iter().map(|p| p.dims()[0]).max().unwrap_or(1);
    let h = projs.iter().map(|p| p.dims()[1]).max().unwrap_or(1);
    ScaStack {
        channels: projs.map(|p| p.resample_nearest([w, h])),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn binvol(dims: [usize; 3], ones: &[[usize; 3]]) -> BinaryVolume {
        let mut data = vec![0u8; dims.iter().product()];
        for p in ones {
            data[(p[2] * dims[1] + p[1]) * dims[0] + p[0]] = 1;
        }
        BinaryVolume::new(dims, data).unwrap()
    }

    #[test]
    fn binarize_definition() {
        let v = Volume::new([3, 1, 1], vec![0.2, 0.5, 0.7]).unwrap();
        let b = binarize(&v, 0.5).unwrap();
        assert_eq!(b.data(), &[0, 1, 1]);
        assert_eq!(binarize(&b.to_volume(), 0.5).unwrap(), b);
        assert!(binarize(&v, 0.0).is_err());
        assert!(binarize(&v, 1.0).is_err());
        let z = Volume::filled([2, 2, 2], 0.0).unwrap();
        assert!(binarize(&z, 0.25).unwrap().data().iter().all(|&b| b == 0));
    }

    #[test]
    fn mean_projection_examples() {
        let c = Volume::filled([3, 4, 5], 0.3).unwrap();
        assert!(mean_project(&c)
            .data()
            .iter()
            .all(|&v| (v - 0.3).abs() < 1e-7));

        let mut two = Volume::filled([3, 3, 2], 0.0).unwrap();
        for y in 0..3 {
            for x in 0..3 {
                two.set(x, y, 1, 1.0);
            }
        }
        assert!(mean_project(&two).data().iter().all(|&v| v == 0.5));

        let mut one = Volume::filled([6, 6, 34], 0.0).unwrap();
        one.set(3, 4, 17, 1.0);
        let img = mean_project(&one);
        assert_eq!(img.dims(), [6, 6]);
        assert_eq!(img.get(3, 4), (1.0f64 / 34.0) as f32);
        assert_eq!(img.data().iter().filter(|&&v| v != 0.0).count(), 1);
    }

    #[test]
    fn or_projection_dims_and_examples() {
        let b = binvol([4, 5, 6], &[[1, 2, 5]]);
        let a = or_project(&b, Plane::Axial);
        assert_eq!(a.dims(), [4, 5]);
        assert_eq!(a.get(1, 2), 1);
        assert_eq!(a.data().iter().filter(|&&v| v == 1).count(), 1);
        assert_eq!(or_project(&b, Plane::Coronal).dims(), [4, 6]);
        assert_eq!(or_project(&b, Plane::Sagittal).dims(), [5, 6]);

        for p in [Plane::Sagittal, Plane::Coronal, Plane::Axial] {
            let zero = binvol([3, 4, 5], &[]);
            assert!(or_project(&zero, p).data().iter().all(|&v| v == 0));
            let ones = BinaryVolume::new([3, 4, 5], vec![1; 60]).unwrap();
            assert!(or_project(&ones, p).data().iter().all(|&v| v == 1));
        }
    }

    #[test]
    fn sca_single_voxel_cube() {
        let b = binvol([8, 8, 8], &[[1, 2, 5]]);
        let s = sca_stack(&b);
        assert_eq!(s.dims(), [8, 8]);
        let ones = |img: &BinaryImage2D| {
            let mut v = vec![];
            for y in 0..img.dims()[1] {
                for x in 0..img.dims()[0] {
                    if img.get(x, y) == 1 {
                        v.push((x, y));
                    }
                }
            }
            v
        };
        assert_eq!(ones(s.channel(Plane::Axial)), vec![(1, 2)]);
        assert_eq!(ones(s.channel(Plane::Sagittal)), vec![(2, 5)]);
        assert_eq!(ones(s.channel(Plane::Coronal)), vec![(1, 5)]);
    }

    #[test]
    fn sca_single_voxel_downsampled_channel() {
        // Sagittal (Y, Z) = (4, 12) and axial (X, Y) = (12, 4) give a 12×12 stack;
        // coronal (X, Z) = (12, 12) is untouched. A 12 → 12 map is the identity;
        // 4 → 12 nearest neighbor replicates each source pixel over 3 targets.
        let b = binvol([12, 4, 12], &[[1, 2, 5]]);
        let s = sca_stack(&b);
        assert_eq!(s.dims(), [12, 12]);
        let count = |img: &BinaryImage2D| img.data().iter().filter(|&&v| v == 1).count();
        assert_eq!(count(s.channel(Plane::Coronal)), 1);
        assert_eq!(s.channel(Plane::Coronal).get(1, 5), 1);
        // source y = 2 covers targets y with floor((2y+1)*4/24) = 2, i.e. y in 6..9
        assert_eq!(count(s.channel(Plane::Sagittal)), 3);
        for y in 6..9 {
            assert_eq!(s.channel(Plane::Sagittal).get(y, 5), 1);
        }
        assert_eq!(count(s.channel(Plane::Axial)), 3);
    }

    #[test]
    fn sca_zero_and_idempotent() {
        let z = binvol([5, 6, 7], &[]);
        let s = sca_stack(&z);
        assert!(s
            .channels()
            .iter()
            .all(|c| c.data().iter().all(|&v| v == 0)));
        let b = binvol([5, 6, 7], &[[0, 0, 0], [4, 5, 6], [2, 3, 1]]);
        assert_eq!(sca_stack(&b.or(&b).unwrap()), sca_stack(&b));
    }

    proptest! {
        #[test]
        fn or_project_matches_brute_force(
            dims in prop::array::uniform3(1usize..=8),
            seed in any::<u64>(),
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = dims.iter().product();
            let data: Vec<u8> = (0..n).map(|_| u8::from(rng.gen_bool(0.15))).collect();
            let b = BinaryVolume::new(dims, data).unwrap();
            for plane in [Plane::Sagittal, Plane::Coronal, Plane::Axial] {
                let img = or_project(&b, plane);
                let [w, h] = img.dims();
                for q in 0..h {
                    for p in 0..w {
                        let any = match plane {
                            Plane::Axial => (0..dims[2]).any(|z| b.get(p, q, z) == 1),
                            Plane::Coronal => (0..dims[1]).any(|y| b.get(p, y, q) == 1),
                            Plane::Sagittal => (0..dims[0]).any(|x| b.get(x, p, q) == 1),
                        };
                        prop_assert_eq!(img.get(p, q) == 1, any);
                    }
                }
            }
        }

        #[test]
        fn mean_project_bounded(data in prop::collection::vec(0f32..=1.0, 60)) {
            let v = Volume::new([3, 4, 5], data).unwrap();
            let (lo, hi) = v.min_max();
            for &p in mean_project(&v).data() {
                prop_assert!(p >= lo && p <= hi);
            }
        }

        #[test]
        fn binarize_monotone(
            data in prop::collection::vec(0f32..=1.0, 27),
            t1 in 0.01f32..0.99,
            t2 in 0.01f32..0.99,
        ) {
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            let v = Volume::new([3, 3, 3], data).unwrap();
            let a = binarize(&v, lo).unwrap();
            let b = binarize(&v, hi).unwrap();
            prop_assert!(a.data().iter().zip(b.data()).all(|(x, y)| y <= x));
        }
    }
}
