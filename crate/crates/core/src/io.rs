//! DTF1 tensor files, binary PPM images, and seeded generators for masks
//! and synthetic tensors.
//!
//! DTF1 layout: `b"DTF1"`, `u32` order `N`, `N × u32` dims, then `∏dims`
//! `f64` values in first-index-fastest order. Every integer and float is
//! little-endian and the file ends exactly after the payload.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{DenseTensor, ObservationMask};

pub const DTF_MAGIC: &[u8; 4] = b"DTF1";

/// Serializes a tensor to DTF1 bytes.
pub fn encode_tensor(t: &DenseTensor) -> Result<Vec<u8>> {
    let order = u32::try_from(t.order()).map_err(|_| Error::InvalidDims("order exceeds u32".into()))?;
    let mut out = Vec::with_capacity(8 + 4 * t.order() + 8 * t.len());
    out.extend_from_slice(DTF_MAGIC);
    out.extend_from_slice(&order.to_le_bytes());
    for &d in t.dims() {
        let d = u32::try_from(d).map_err(|_| Error::InvalidDims(format!("dimension {d} exceeds u32")))?;
        out.extend_from_slice(&d.to_le_bytes());
    }
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

fn read_u32(bytes: &[u8], at: usize, what: &str) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_le_bytes(b.try_into().expect("4-byte slice")))
        .ok_or_else(|| Error::Truncated(format!("file ends inside the {what}")))
}

/// Parses DTF1 bytes.
pub fn decode_tensor(bytes: &[u8]) -> Result<DenseTensor> {
    let magic = bytes.get(..4).ok_or_else(|| Error::Truncated("file shorter than the magic".into()))?;
    if magic != DTF_MAGIC {
        return Err(Error::BadMagic {
            expected: String::from_utf8_lossy(DTF_MAGIC).into_owned(),
            found: String::from_utf8_lossy(magic).into_owned(),
        });
    }
    let order = read_u32(bytes, 4, "order field")? as usize;
    let mut dims = Vec::with_capacity(order.min(64));
    for n in 0..order {
        dims.push(read_u32(bytes, 8 + 4 * n, "dimension list")? as usize);
    }
    let count = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::InvalidDims(format!("dims {dims:?} overflow the element count")))?;
    let header = 8 + 4 * order;
    let expected = count
        .checked_mul(8)
        .and_then(|p| p.checked_add(header))
        .ok_or_else(|| Error::InvalidDims(format!("dims {dims:?} overflow the payload size")))?;
    if bytes.len() < expected {
        return Err(Error::Truncated(format!(
            "header declares {count} values but only {} payload bytes follow",
            bytes.len().saturating_sub(header)
        )));
    }
    if bytes.len() > expected {
        return Err(Error::Format(format!("{} trailing bytes after the payload", bytes.len() - expected)));
    }
    let data = bytes[header..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
    DenseTensor::new(dims, data)
}

/// Writes via a temporary sibling file and a rename, so readers never see
/// a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path.file_name().ok_or_else(|| Error::Format(format!("{} has no file name", path.display())))?;
    let mut tmp_name = file_name.to_os_string();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_tensor(t: &DenseTensor, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &encode_tensor(t)?)
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<DenseTensor> {
    decode_tensor(&fs::read(path)?)
}

/// Masks are DTF1 tensors holding exactly 0.0 or 1.0.
pub fn write_mask(mask: &ObservationMask, path: impl AsRef<Path>) -> Result<()> {
    write_tensor(&mask.to_tensor(), path)
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<ObservationMask> {
    ObservationMask::from_tensor(&read_tensor(path)?)
}

struct PpmHeader {
    width: usize,
    height: usize,
    data_start: usize,
}

fn parse_ppm_header(bytes: &[u8]) -> Result<PpmHeader> {
    if bytes.get(..2) != Some(b"P6") {
        return Err(Error::BadMagic {
            expected: "P6".into(),
            found: String::from_utf8_lossy(&bytes[..bytes.len().min(2)]).into_owned(),
        });
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(Error::Truncated("PPM header ends early".into())),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format("PPM header field is not a number".into()));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .expect("ascii digits")
            .parse()
            .map_err(|_| Error::Format("PPM header field out of range".into()))?;
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(Error::Format("PPM maxval must be followed by one whitespace byte".into())),
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(Error::Format(format!("PPM maxval must be 255, got {maxval}")));
    }
    if width == 0 || height == 0 {
        return Err(Error::InvalidDims(format!("PPM image is {width}x{height}")));
    }
    Ok(PpmHeader { width, height, data_start: pos })
}

/// Parses a binary P6 image into an `H × W × 3` tensor with values `v/255`.
pub fn decode_ppm(bytes: &[u8]) -> Result<DenseTensor> {
    let PpmHeader { width, height, data_start } = parse_ppm_header(bytes)?;
    let need = width
        .checked_mul(height)
        .and_then(|p| p.checked_mul(3))
        .ok_or_else(|| Error::InvalidDims("PPM size overflows".into()))?;
    let pixels = &bytes[data_start..];
    if pixels.len() < need {
        return Err(Error::Truncated(format!("PPM needs {need} pixel bytes, found {}", pixels.len())));
    }
    let mut t = DenseTensor::zeros(&[height, width, 3])?;
    for r in 0..height {
        for c in 0..width {
            for ch in 0..3 {
                let v = pixels[3 * (r * width + c) + ch] as f64 / 255.0;
                let off = t.offset(&[r, c, ch]);
                t.data_mut()[off] = v;
            }
        }
    }
    Ok(t)
}

/// Encodes an `H × W × 3` tensor as P6, clipping to `[0, 1]` and rounding
/// `v · 255` to the nearest byte.
pub fn encode_ppm(t: &DenseTensor) -> Result<Vec<u8>> {
    let (height, width) = match *t.dims() {
        [h, w, 3] => (h, w),
        _ => return Err(Error::Shape(format!("PPM export needs H x W x 3, got {:?}", t.dims()))),
    };
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    out.reserve(3 * width * height);
    for r in 0..height {
        for c in 0..width {
            for ch in 0..3 {
                let v = t.get(&[r, c, ch]);
                let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
                out.push((v * 255.0).round() as u8);
            }
        }
    }
    Ok(out)
}

pub fn read_ppm(path: impl AsRef<Path>) -> Result<DenseTensor> {
    decode_ppm(&fs::read(path)?)
}

pub fn write_ppm(t: &DenseTensor, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &encode_ppm(t)?)
}

/// Uniformly random mask with exactly `round(sample_ratio · ∏dims)`
/// observed entries.
pub fn gen_mask(dims: &[usize], sample_ratio: f64, seed: u64) -> Result<ObservationMask> {
    if !(0.0..=1.0).contains(&sample_ratio) {
        return Err(Error::Config(format!("sample ratio must lie in [0, 1], got {sample_ratio}")));
    }
    let total: usize = dims.iter().product();
    let keep = ((sample_ratio * total as f64).round() as usize).min(total);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut observed = vec![false; total];
    for i in index::sample(&mut rng, total, keep) {
        observed[i] = true;
    }
    ObservationMask::new(dims.to_vec(), observed)
}

/// Sum of `num_bumps` isotropic Gaussians on the unit grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub dims: Vec<usize>,
    pub num_bumps: usize,
    pub width: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self { dims: vec![30, 30, 30], num_bumps: 3, width: 0.2, seed: 0 }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dims.is_empty() || self.dims.iter().any(|&d| d < 2) {
            return Err(Error::InvalidDims(format!("every synthetic dimension must be at least 2, got {:?}", self.dims)));
        }
        if self.num_bumps == 0 {
            return Err(Error::Config("num_bumps must be positive".into()));
        }
        if !(self.width > 0.0 && self.width.is_finite()) {
            return Err(Error::Config(format!("width must be positive, got {}", self.width)));
        }
        Ok(())
    }

    /// Bump centers in `[0, 1]^N`, one row per bump.
    pub fn centers(&self) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..self.num_bumps).map(|_| (0..self.dims.len()).map(|_| rng.random::<f64>()).collect()).collect()
    }
}

/// `t(i) = Σ_m exp(−Σ_d (x_d − c_{m,d})² / (2 w²))` with `x_d = i_d / (I_d − 1)`.
pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<DenseTensor> {
    spec.validate()?;
    synthetic_with_centers(&spec.dims, &spec.centers(), spec.width)
}

/// [`gen_synthetic`] with explicit bump centers.
pub fn synthetic_with_centers(dims: &[usize], centers: &[Vec<f64>], width: f64) -> Result<DenseTensor> {
    if dims.iter().any(|&d| d < 2) {
        return Err(Error::InvalidDims(format!("every synthetic dimension must be at least 2, got {dims:?}")));
    }
    if centers.iter().any(|c| c.len() != dims.len()) {
        return Err(Error::Shape("bump center length differs from the tensor order".into()));
    }
    let inv = 1.0 / (2.0 * width * width);
    // per-mode, per-bump 1-D factors: the Gaussian is separable
    let profiles: Vec<Vec<Vec<f64>>> = centers
        .iter()
        .map(|c| {
            dims.iter()
                .enumerate()
                .map(|(d, &size)| {
                    (0..size)
                        .map(|i| {
                            let x = i as f64 / (size - 1) as f64;
                            (-(x - c[d]).powi(2) * inv).exp()
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let mut t = DenseTensor::zeros(dims)?;
    let mut idx = vec![0usize; dims.len()];
    for v in t.data_mut().iter_mut() {
        *v = profiles.iter().map(|p| idx.iter().enumerate().map(|(d, &i)| p[d][i]).product::<f64>()).sum();
        for (d, i) in idx.iter_mut().enumerate() {
            *i += 1;
            if *i < dims[d] {
                break;
            }
            *i = 0;
        }
    }
    Ok(t)
}
