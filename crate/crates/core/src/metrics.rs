//! Completion quality metrics: MPSNR, MSSIM, MAPE, NMAE and RSE.
//!
//! Slice-wise metrics treat the last of three modes as the slice index ("band"
//! or "channel"); each slice is an `I₁ × I₂` image.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{frobenius_norm, DenseTensor, ObservationMask};

/// SSIM window edge.
pub const SSIM_WINDOW: usize = 8;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

/// Final quality of an estimate against ground truth. A field is `None`
/// when the metric is undefined for the instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    /// dB over missing entries; `inf` for an exact fit.
    #[serde(with = "inf_as_string")]
    pub mpsnr: Option<f64>,
    /// dB over every entry.
    #[serde(with = "inf_as_string")]
    pub mpsnr_all: Option<f64>,
    pub mssim: Option<f64>,
    /// Percent, over missing entries with non-zero truth.
    pub mape: Option<f64>,
    /// Missing entries skipped by MAPE because their truth is zero.
    pub mape_excluded: usize,
    pub nmae: Option<f64>,
    pub rse: Option<f64>,
}

impl QualityReport {
    pub fn evaluate(est: &DenseTensor, truth: &DenseTensor, mask: &ObservationMask) -> Result<Self> {
        check_pair(est, truth)?;
        mask.check_dims(truth.dims())?;
        let sliced = truth.order() == 3;
        let (t_miss, e_miss) = missing_values(est, truth, mask)?;
        let mape_result = mape(&t_miss, &e_miss).ok();
        Ok(Self {
            mpsnr: if sliced { mpsnr(est, truth, mask).ok() } else { None },
            mpsnr_all: if sliced { mpsnr_all(est, truth).ok() } else { None },
            mssim: if sliced { mssim(est, truth).ok() } else { None },
            mape: mape_result.map(|m| m.value),
            mape_excluded: mape_result.map_or(0, |m| m.excluded),
            nmae: nmae(&t_miss, &e_miss).ok(),
            rse: rse(est, truth).ok(),
        })
    }
}

fn check_pair(est: &DenseTensor, truth: &DenseTensor) -> Result<()> {
    if est.dims() != truth.dims() {
        return Err(Error::Shape(format!("estimate dims {:?} vs truth dims {:?}", est.dims(), truth.dims())));
    }
    Ok(())
}

fn check_order3(t: &DenseTensor) -> Result<(usize, usize, usize)> {
    match *t.dims() {
        [a, b, c] => Ok((a, b, c)),
        _ => Err(Error::Shape(format!("slice metrics need an order-3 tensor, got order {}", t.order()))),
    }
}

/// `(truth, estimate)` values at the missing entries, in linear order.
pub fn missing_values(
    est: &DenseTensor,
    truth: &DenseTensor,
    mask: &ObservationMask,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_pair(est, truth)?;
    mask.check_dims(truth.dims())?;
    let (t, e) = (0..truth.len()).filter(|&i| !mask.is_observed(i)).map(|i| (truth.data()[i], est.data()[i])).unzip();
    Ok((t, e))
}

fn psnr(peak: f64, sq_err: f64, count: usize) -> f64 {
    if sq_err == 0.0 {
        return f64::INFINITY;
    }
    10.0 * (peak * peak / (sq_err / count as f64)).log10()
}

fn slice_psnrs(
    est: &DenseTensor,
    truth: &DenseTensor,
    include: impl Fn(usize) -> bool,
) -> Result<Vec<f64>> {
    check_pair(est, truth)?;
    let (a, b, c) = check_order3(truth)?;
    let peak = truth.data().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let plane = a * b;
    let mut out = Vec::with_capacity(c);
    for k in 0..c {
        let (mut sq, mut count) = (0.0, 0usize);
        for i in k * plane..(k + 1) * plane {
            if include(i) {
                let d = est.data()[i] - truth.data()[i];
                sq += d * d;
                count += 1;
            }
        }
        if count > 0 {
            out.push(psnr(peak, sq, count));
        }
    }
    Ok(out)
}

/// Per-slice PSNR over each slice's missing entries. Slices without
/// missing entries are skipped.
pub fn slice_psnr(est: &DenseTensor, truth: &DenseTensor, mask: &ObservationMask) -> Result<Vec<f64>> {
    mask.check_dims(truth.dims())?;
    slice_psnrs(est, truth, |i| !mask.is_observed(i))
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Mean PSNR over mode-3 slices, error measured on the missing entries.
/// The peak is the global maximum of `truth`.
pub fn mpsnr(est: &DenseTensor, truth: &DenseTensor, mask: &ObservationMask) -> Result<f64> {
    if mask.count_missing() == 0 {
        return Err(Error::UndefinedMetric("MPSNR needs at least one missing entry"));
    }
    Ok(mean(&slice_psnr(est, truth, mask)?))
}

/// Mean PSNR over mode-3 slices, error measured on every entry.
pub fn mpsnr_all(est: &DenseTensor, truth: &DenseTensor) -> Result<f64> {
    let values = slice_psnrs(est, truth, |_| true)?;
    if values.is_empty() {
        return Err(Error::UndefinedMetric("MPSNR of an empty tensor"));
    }
    Ok(mean(&values))
}

/// SSIM of one window given its five moments.
fn ssim_formula(mx: f64, my: f64, vx: f64, vy: f64, cxy: f64, c1: f64, c2: f64) -> f64 {
    let num = (2.0 * mx * my + c1) * (2.0 * cxy + c2);
    let den = (mx * mx + my * my + c1) * (vx + vy + c2);
    if den == 0.0 {
        1.0
    } else {
        num / den
    }
}

/// SSIM of one `rows × cols` column-major image pair, averaged over every
/// `8 × 8` window (stride 1). Smaller images use one window covering the
/// whole image.
pub fn ssim_2d(x: &[f64], y: &[f64], rows: usize, cols: usize, c1: f64, c2: f64) -> Result<f64> {
    if x.len() != rows * cols || y.len() != rows * cols || x.is_empty() {
        return Err(Error::Shape(format!("ssim image buffers do not match {rows}x{cols}")));
    }
    let (wr, wc) = if rows < SSIM_WINDOW || cols < SSIM_WINDOW { (rows, cols) } else { (SSIM_WINDOW, SSIM_WINDOW) };
    let n = (wr * wc) as f64;
    let mut total = 0.0;
    let mut windows = 0usize;
    for j0 in 0..=cols - wc {
        for i0 in 0..=rows - wr {
            let (mut sx, mut sy) = (0.0, 0.0);
            for j in j0..j0 + wc {
                for i in i0..i0 + wr {
                    sx += x[i + j * rows];
                    sy += y[i + j * rows];
                }
            }
            let (mx, my) = (sx / n, sy / n);
            let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
            for j in j0..j0 + wc {
                for i in i0..i0 + wr {
                    let dx = x[i + j * rows] - mx;
                    let dy = y[i + j * rows] - my;
                    vx += dx * dx;
                    vy += dy * dy;
                    cxy += dx * dy;
                }
            }
            total += ssim_formula(mx, my, vx / n, vy / n, cxy / n, c1, c2);
            windows += 1;
        }
    }
    Ok(total / windows as f64)
}

/// SSIM stabilizers `(C₁, C₂)` for dynamic range `L` of both tensors
/// together. A constant pair falls back to `L = 1`.
pub fn ssim_constants(est: &DenseTensor, truth: &DenseTensor) -> (f64, f64) {
    let (lo, hi) = est
        .data()
        .iter()
        .chain(truth.data())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = if hi > lo { hi - lo } else { 1.0 };
    ((SSIM_K1 * range).powi(2), (SSIM_K2 * range).powi(2))
}

/// Mean SSIM over mode-3 slices.
pub fn mssim(est: &DenseTensor, truth: &DenseTensor) -> Result<f64> {
    check_pair(est, truth)?;
    let (a, b, c) = check_order3(truth)?;
    if a * b * c == 0 {
        return Err(Error::UndefinedMetric("MSSIM of an empty tensor"));
    }
    let (c1, c2) = ssim_constants(est, truth);
    let plane = a * b;
    let mut total = 0.0;
    for k in 0..c {
        let range = k * plane..(k + 1) * plane;
        total += ssim_2d(&est.data()[range.clone()], &truth.data()[range], a, b, c1, c2)?;
    }
    Ok(total / c as f64)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mape {
    /// Percent.
    pub value: f64,
    /// Entries skipped because their truth value is zero.
    pub excluded: usize,
}

/// Mean absolute percentage error, skipping zero-truth entries.
pub fn mape(truth: &[f64], est: &[f64]) -> Result<Mape> {
    if truth.len() != est.len() {
        return Err(Error::Shape(format!("mape: {} truth values vs {} estimates", truth.len(), est.len())));
    }
    let (mut sum, mut used) = (0.0, 0usize);
    for (&y, &yh) in truth.iter().zip(est) {
        if y != 0.0 {
            sum += ((y - yh) / y).abs();
            used += 1;
        }
    }
    if used == 0 {
        return Err(Error::UndefinedMetric("MAPE needs a non-zero truth value"));
    }
    Ok(Mape { value: 100.0 * sum / used as f64, excluded: truth.len() - used })
}

/// `Σ|y − ŷ| / Σ|y|`.
pub fn nmae(truth: &[f64], est: &[f64]) -> Result<f64> {
    if truth.len() != est.len() {
        return Err(Error::Shape(format!("nmae: {} truth values vs {} estimates", truth.len(), est.len())));
    }
    let den: f64 = truth.iter().map(|y| y.abs()).sum();
    if den == 0.0 {
        return Err(Error::UndefinedMetric("NMAE with all-zero truth"));
    }
    let num: f64 = truth.iter().zip(est).map(|(y, yh)| (y - yh).abs()).sum();
    Ok(num / den)
}

/// `‖est − truth‖_F / ‖truth‖_F`.
pub fn rse(est: &DenseTensor, truth: &DenseTensor) -> Result<f64> {
    check_pair(est, truth)?;
    let base = frobenius_norm(truth);
    if base == 0.0 {
        return Err(Error::UndefinedMetric("RSE with zero-norm truth"));
    }
    Ok(frobenius_norm(&est.sub(truth)?) / base)
}

/// Optional reals with infinities written as the strings `"inf"`/`"-inf"`.
pub mod inf_as_string {
    use serde::de::{self, Deserializer, Visitor};
    use serde::Serializer;

    pub fn serialize<S: Serializer>(value: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match value {
            None => s.serialize_none(),
            Some(v) if *v == f64::INFINITY => s.serialize_str("inf"),
            Some(v) if *v == f64::NEG_INFINITY => s.serialize_str("-inf"),
            Some(v) => s.serialize_f64(*v),
        }
    }

    struct InfVisitor;

    impl<'de> Visitor<'de> for InfVisitor {
        type Value = Option<f64>;

        fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
            f.write_str("a number, \"inf\", \"-inf\" or null")
        }

        fn visit_none<E: de::Error>(self) -> Result<Self::Value, E> {
            Ok(None)
        }

        fn visit_unit<E: de::Error>(self) -> Result<Self::Value, E> {
            Ok(None)
        }

        fn visit_some<D: Deserializer<'de>>(self, d: D) -> Result<Self::Value, D::Error> {
            d.deserialize_any(self)
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> Result<Self::Value, E> {
            Ok(Some(v))
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<Self::Value, E> {
            Ok(Some(v as f64))
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<Self::Value, E> {
            Ok(Some(v as f64))
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<Self::Value, E> {
            match v {
                "inf" => Ok(Some(f64::INFINITY)),
                "-inf" => Ok(Some(f64::NEG_INFINITY)),
                other => Err(E::custom(format!("unexpected string {other:?}"))),
            }
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        d.deserialize_option(InfVisitor)
    }
}
