//! `VGR1` grid container.
//!
//! Layout (little-endian): magic `VGR1`, `u32 ndim`, `u32 dims[ndim]`
//! (x first), `u8 dtype`, then the payload in x-fastest order.
//! dtype: 1 = f32, 2 = u8, 3 = u32 (segment labels). Bit 7 of the dtype byte
//! marks a channel stack, where the last dim counts channels.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::reduction::{BinaryImage2D, BinaryVolume, Image2D, ScaStack};
use crate::segmentation::LabelMap;
use crate::volume::Volume;

pub const MAGIC: &[u8; 4] = b"VGR1";
const STACK_FLAG: u8 = 0x80;
/// Refuse payloads above 2^31 elements.
const MAX_ELEMENTS: u64 = 1 << 31;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum DType {
    F32 = 1,
    U8 = 2,
    U32 = 3,
}

impl DType {
    fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(DType::F32),
            2 => Some(DType::U8),
            3 => Some(DType::U32),
            _ => None,
        }
    }

    fn width(self) -> usize {
        match self {
            DType::F32 | DType::U32 => 4,
            DType::U8 => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    F32(Vec<f32>),
    U8(Vec<u8>),
    U32(Vec<u32>),
}

impl Payload {
    pub fn dtype(&self) -> DType {
        match self {
            Payload::F32(_) => DType::F32,
            Payload::U8(_) => DType::U8,
            Payload::U32(_) => DType::U32,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Payload::F32(v) => v.len(),
            Payload::U8(v) => v.len(),
            Payload::U32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A decoded container: dims, stack flag and payload.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub dims: Vec<usize>,
    pub stack: bool,
    pub payload: Payload,
}

impl Grid {
    pub fn encode(&self) -> Result<Vec<u8>> {
        let n: usize = self.dims.iter().product();
        if n != self.payload.len() {
            return Err(Error::Shape(format!(
                "dims {:?} need {n} elements, payload has {}",
                self.dims,
                self.payload.len()
            )));
        }
        let mut out =
            Vec::with_capacity(9 + 4 * self.dims.len() + n * self.payload.dtype().width());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.dims.len() as u32).to_le_bytes());
        for &d in &self.dims {
            let d = u32::try_from(d).map_err(|_| Error::param(format!("dim {d} exceeds u32")))?;
            out.extend_from_slice(&d.to_le_bytes());
        }
        let mut code = self.payload.dtype() as u8;
        if self.stack {
            code |= STACK_FLAG;
        }
        out.push(code);
        match &self.payload {
            Payload::F32(v) => v
                .iter()
                .for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            Payload::U8(v) => out.extend_from_slice(v),
            Payload::U32(v) => v
                .iter()
                .for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        let magic = r.take(4, "magic")?;
        if magic != MAGIC {
            return Err(Error::format(
                0,
                format!("bad magic {magic:?}, expected VGR1"),
            ));
        }
        let ndim_at = r.pos;
        let ndim = r.u32("ndim")? as usize;
        if ndim == 0 || ndim > 4 {
            return Err(Error::format(
                ndim_at as u64,
                format!("unsupported ndim {ndim}"),
            ));
        }
        let dims_at = r.pos;
        let mut dims = Vec::with_capacity(ndim);
        let mut total: u64 = 1;
        for _ in 0..ndim {
            let d = r.u32("dims")? as u64;
            if d == 0 {
                return Err(Error::format(dims_at as u64, "zero-sized dimension"));
            }
            total = total.saturating_mul(d);
            dims.push(d as usize);
        }
        if total > MAX_ELEMENTS {
            return Err(Error::format(
                dims_at as u64,
                format!("dims {dims:?} overflow the {MAX_ELEMENTS}-element limit"),
            ));
        }
        let dtype_at = r.pos;
        let code = r.take(1, "dtype")?[0];
        let stack = code & STACK_FLAG != 0;
        let dtype = DType::from_code(code & !STACK_FLAG)
            .ok_or_else(|| Error::format(dtype_at as u64, format!("unknown dtype {code}")))?;
        let n = total as usize;
        let payload_at = r.pos;
        let need = n * dtype.width();
        if bytes.len() - payload_at < need {
            return Err(Error::format(
                bytes.len() as u64,
                format!(
                    "truncated payload: expected {need} bytes from offset {payload_at}, found {}",
                    bytes.len() - payload_at
                ),
            ));
        }
        if bytes.len() - payload_at > need {
            return Err(Error::format(
                (payload_at + need) as u64,
                "trailing bytes after payload",
            ));
        }
        let raw = &bytes[payload_at..];
        let payload = match dtype {
            DType::F32 => Payload::F32(
                raw.chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            ),
            DType::U8 => Payload::U8(raw.to_vec()),
            DType::U32 => Payload::U32(
                raw.chunks_exact(4)
                    .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            ),
        };
        Ok(Grid {
            dims,
            stack,
            payload,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.encode()?)?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::decode(&fs::read(path)?)
    }
}

pub(crate) struct Reader<'a> {
    pub bytes: &'a [u8],
    pub pos: usize,
}

impl<'a> Reader<'a> {
    pub fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::format(
                self.pos as u64,
                format!("truncated while reading {what}"),
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    pub fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }
}

fn expect(grid: &Grid, ndim: usize, dtype: DType, stack: bool) -> Result<()> {
    if grid.dims.len() != ndim || grid.payload.dtype() != dtype || grid.stack != stack {
        return Err(Error::param(format!(
            "expected ndim={ndim} dtype={dtype:?} stack={stack}, file has ndim={} dtype={:?} stack={}",
            grid.dims.len(),
            grid.payload.dtype(),
            grid.stack
        )));
    }
    Ok(())
}

impl From<&Volume> for Grid {
    fn from(v: &Volume) -> Self {
        Grid {
            dims: v.dims().to_vec(),
            stack: false,
            payload: Payload::F32(v.data().to_vec()),
        }
    }
}

impl TryFrom<Grid> for Volume {
    type Error = Error;

    fn try_from(g: Grid) -> Result<Self> {
        expect(&g, 3, DType::F32, false)?;
        match g.payload {
            Payload::F32(d) => Volume::new([g.dims[0], g.dims[1], g.dims[2]], d),
            _ => unreachable!(),
        }
    }
}

pub fn write_volume(v: &Volume, path: impl AsRef<Path>) -> Result<()> {
    Grid::from(v).write(path)
}

pub fn read_volume(path: impl AsRef<Path>) -> Result<Volume> {
    Grid::read(path)?.try_into()
}

impl From<&BinaryVolume> for Grid {
    fn from(v: &BinaryVolume) -> Self {
        Grid {
            dims: v.dims().to_vec(),
            stack: false,
            payload: Payload::U8(v.data().to_vec()),
        }
    }
}

impl TryFrom<Grid> for BinaryVolume {
    type Error = Error;

    fn try_from(g: Grid) -> Result<Self> {
        expect(&g, 3, DType::U8, false)?;
        match g.payload {
            Payload::U8(d) => BinaryVolume::new([g.dims[0], g.dims[1], g.dims[2]], d),
            _ => unreachable!(),
        }
    }
}

impl From<&Image2D> for Grid {
    fn from(v: &Image2D) -> Self {
        Grid {
            dims: v.dims().to_vec(),
            stack: false,
            payload: Payload::F32(v.data().to_vec()),
        }
    }
}

impl TryFrom<Grid> for Image2D {
    type Error = Error;

    fn try_from(g: Grid) -> Result<Self> {
        expect(&g, 2, DType::F32, false)?;
        match g.payload {
            Payload::F32(d) => Image2D::new([g.dims[0], g.dims[1]], d),
            _ => unreachable!(),
        }
    }
}

impl From<&BinaryImage2D> for Grid {
    fn from(v: &BinaryImage2D) -> Self {
        Grid {
            dims: v.dims().to_vec(),
            stack: false,
            payload: Payload::U8(v.data().to_vec()),
        }
    }
}

impl TryFrom<Grid> for BinaryImage2D {
    type Error = Error;

    fn try_from(g: Grid) -> Result<Self> {
        expect(&g, 2, DType::U8, false)?;
        match g.payload {
            Payload::U8(d) => BinaryImage2D::new([g.dims[0], g.dims[1]], d),
            _ => unreachable!(),
        }
    }
}

impl From<&ScaStack> for Grid {
    fn from(s: &ScaStack) -> Self {
        let [w, h] = s.dims();
        Grid {
            dims: vec![w, h, 3],
            stack: true,
            payload: Payload::U8(
                s.channels()
                    .iter()
                    .flat_map(|c| c.data().to_vec())
                    .collect(),
            ),
        }
    }
}

impl TryFrom<Grid> for ScaStack {
    type Error = Error;

    fn try_from(g: Grid) -> Result<Self> {
        expect(&g, 3, DType::U8, true)?;
        if g.dims[2] != 3 {
            return Err(Error::param(format!(
                "SCA stack needs 3 channels, found {}",
                g.dims[2]
            )));
        }
        let (w, h) = (g.dims[0], g.dims[1]);
        let Payload::U8(d) = g.payload else {
            unreachable!()
        };
        let mut it = d.chunks_exact(w * h);
        let mut next = || BinaryImage2D::new([w, h], it.next().unwrap().to_vec());
        ScaStack::from_channels([next()?, next()?, next()?])
    }
}

impl From<&LabelMap> for Grid {
    fn from(l: &LabelMap) -> Self {
        Grid {
            dims: l.dims()[..l.ndim()].to_vec(),
            stack: false,
            payload: Payload::U32(l.labels().to_vec()),
        }
    }
}

impl TryFrom<Grid> for LabelMap {
    type Error = Error;

    fn try_from(g: Grid) -> Result<Self> {
        if g.stack || g.payload.dtype() != DType::U32 || !(2..=3).contains(&g.dims.len()) {
            return Err(Error::param("label map must be a 2D or 3D u32 grid"));
        }
        let dims = [g.dims[0], g.dims[1], g.dims.get(2).copied().unwrap_or(1)];
        let ndim = g.dims.len();
        let Payload::U32(d) = g.payload else {
            unreachable!()
        };
        LabelMap::new(dims, ndim, d)
    }
}
