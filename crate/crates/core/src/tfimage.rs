//! Time-frequency feature construction: FrFT sinogram, filtered
//! back-projection, and the stacked dual-polarization image.
//!
//! The scan row at order `a` is the Radon projection of the signal's
//! Wigner distribution at angle `theta = a*pi/2`. Rows with negative
//! order map to `theta + pi` with the radial axis flipped, giving uniform
//! coverage of [0, pi); the duplicated projection pair (a = -1 / a = +1)
//! is deduplicated before back-projection. In the reconstructed image the
//! column axis is time (left to right) and the row axis is frequency
//! (increasing upward), so a clean order-p training chirp appears as a
//! ridge tilted `p * 90` degrees from vertical.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelRealization;
use crate::fft::{fft_in_place, ifft_in_place};
use crate::frame::{extract_ts, FrameLayout};
use crate::frft;
use crate::num::{Real, C};
use crate::signal::DualPolSignal;
use crate::{Error, Result};

/// Order-indexed projection matrix, one plane per polarization.
#[derive(Debug, Clone, PartialEq)]
pub struct Sinogram<T: Real> {
    orders: Vec<f64>,
    x_plane: Array2<T>,
    y_plane: Array2<T>,
}

impl<T: Real> Sinogram<T> {
    pub fn new(orders: Vec<f64>, x_plane: Array2<T>, y_plane: Array2<T>) -> Result<Self> {
        if x_plane.nrows() != orders.len() || y_plane.nrows() != orders.len() {
            return Err(Error::invalid_argument("sinogram: row count must match orders"));
        }
        if x_plane.ncols() != y_plane.ncols() {
            return Err(Error::invalid_argument("sinogram: planes must share width"));
        }
        Ok(Sinogram { orders, x_plane, y_plane })
    }

    pub fn orders(&self) -> &[f64] {
        &self.orders
    }

    pub fn radial_bins(&self) -> usize {
        self.x_plane.ncols()
    }

    pub fn x_plane(&self) -> &Array2<T> {
        &self.x_plane
    }

    pub fn y_plane(&self) -> &Array2<T> {
        &self.y_plane
    }

    /// Linear-interpolation resampling of each row to `bins` radial bins,
    /// re-normalized to unit sum.
    pub fn resample_radial(&self, bins: usize) -> Result<Sinogram<T>> {
        if bins < 2 {
            return Err(Error::invalid_argument("resample_radial: bins must be >= 2"));
        }
        let resample_plane = |plane: &Array2<T>| -> Array2<T> {
            let n = plane.ncols();
            let mut out = Array2::<T>::zeros((plane.nrows(), bins));
            for r in 0..plane.nrows() {
                let mut sum = T::zero();
                for b in 0..bins {
                    let pos = b as f64 * (n - 1) as f64 / (bins - 1) as f64;
                    let i0 = (pos.floor() as usize).min(n - 2);
                    let w = T::from_f64c(pos - i0 as f64);
                    let v = plane[(r, i0)] * (T::one() - w) + plane[(r, i0 + 1)] * w;
                    out[(r, b)] = v;
                    sum += v;
                }
                if sum > T::zero() {
                    for b in 0..bins {
                        out[(r, b)] /= sum;
                    }
                }
            }
            out
        };
        Sinogram::new(
            self.orders.clone(),
            resample_plane(&self.x_plane),
            resample_plane(&self.y_plane),
        )
    }
}

/// The reconstructed feature image: two size x size planes (x, y
/// polarization), values in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct TfImage<T: Real> {
    pub x_plane: Array2<T>,
    pub y_plane: Array2<T>,
}

impl<T: Real> TfImage<T> {
    pub fn size(&self) -> usize {
        self.x_plane.nrows()
    }

    /// Serialize as row-major little-endian f32, x plane then y plane.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        let mut out = Vec ::with_capacity(2 * self.size() * self.size() * 4);
        for plane in [&self.x_plane, &self.y_plane] {
            for v in plane.iter() {
                out.extend_from_slice(&(v.to_f64c() as f32).to_le_bytes());
            }
        }
        out
    }

    pub fn from_le_bytes(bytes: &[u8], size: usize) -> Result<Self> {
        if bytes.len() != 2 * size * size * 4 {
            return Err(Error::invalid_argument("tfimage: byte length mismatch"));
        }
        let mut vals = bytes
            .chunks_exact(4)
            .map(|b| T::from_f64c(f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64));
        let mut x_plane = Array2::<T>::zeros((size, size));
        let mut y_plane = Array2::<T>::zeros((size, size));
        for v in x_plane.iter_mut() {
            *v = vals.next().expect("length checked");
        }
        for v in y_plane.iter_mut() {
            *v = vals.next().expect("length checked");
        }
        Ok(TfImage { x_plane, y_plane })
    }
}

/// Feature-extraction parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    /// FrFT scan orders, ascending.
    pub orders: Vec<f64>,
    pub radial_bins: usize,
    pub image_size: usize,
    /// Normalize both planes by a shared maximum instead of per-plane.
    pub joint_normalize: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            orders: frft::default_scan_orders(),
            radial_bins: 100,
            image_size: 100,
            joint_normalize: false,
        }
    }
}

/// Scan the received training sequence and resample rows to the radial
/// bin count.
pub fn build_sinogram<T: Real>(
    ts_rx: &DualPolSignal<T>,
    orders: &[f64],
    radial_bins: usize,
) -> Result<Sinogram<T>> {
    if ts_rx.len() < 64 {
        return Err(Error::invalid_argument("build_sinogram: need >= 64 samples"));
    }
    frft::frft_scan(ts_rx, orders)?.resample_radial(radial_bins)
}

/// Ram-Lak filter one projection row (length n), zero-padded FFT.
fn ramp_filter<T: Real>(row: &[T]) -> Vec<T> {
    let n = row.len();
    let pad = (2 * n).next_power_of_two();
    let mut buf: Vec<C<T>> = row
        .iter()
        .map(|&v| C::new(v, T::zero()))
        .chain(std::iter::repeat(C::new(T::zero(), T::zero())))
        .take(pad)
        .collect();
    fft_in_place(&mut buf);
    for (k, v) in buf.iter_mut().enumerate() {
        let f = if k <= pad / 2 { k as f64 } else { pad as f64 - k as f64 } / pad as f64;
        *v = v.scale(T::from_f64c(2.0 * f));
    }
    ifft_in_place(&mut buf);
    buf[..n].iter().map(|c| c.re).collect()
}

/// Filtered back-projection of the sinogram onto a `size x size` grid.
///
/// Ramp filter per row, linear interpolation along the radial
/// coordinate, scaled by pi / n_angles; negative values clipped, planes
/// max-normalized to [0, 1] (all-zero planes stay zero).
pub fn inverse_radon<T: Real>(sino: &Sinogram<T>, size: usize, joint_normalize: bool) -> Result<TfImage<T>> {
    let nb = sino.radial_bins();
    // unique projection angles in [0, pi): theta = a*pi/2, negative
    // orders shifted by pi with the radial axis flipped
    let mut seen = std::collections::BTreeSet::new();
    let mut entries: Vec<(f64, usize, bool)> = Vec::new(); // (theta, row, flip)
    for (r, &a) in sino.orders().iter().enumerate() {
        let mut theta = a * std::f64::consts::FRAC_PI_2;
        let mut flip = false;
        if theta < -1e-12 {
            theta += std::f64::consts::PI;
            flip = true;
        }
        let key = (theta / std::f64::consts::PI * 1e9).round() as i64;
        if seen.insert(key) {
            entries.push((theta, r, flip));
        }
    }
    if entries.len() < 8 {
        return Err(Error::invalid_argument("inverse_radon: need >= 8 projection angles"));
    }
    let thetas: Vec<f64> = entries.iter().map(|e| e.0).collect();
    let span = thetas.iter().cloned().fold(f64::MIN, f64::max)
        - thetas.iter().cloned().fold(f64::MAX, f64::min);
    if span < 150.0_f64.to_radians() {
        return Err(Error::invalid_argument(
            "inverse_radon: projections must span >= 150 degrees",
        ));
    }

    let mut planes = Vec::with_capacity(2);
    for plane in [sino.x_plane(), sino.y_plane()] {
        let mut img = Array2::<T>::zeros((size, size));
        for &(theta, r, flip) in &entries {
            let mut row: Vec<T> = plane.row(r).to_vec();
            if flip {
                row.reverse();
            }
            let filt = ramp_filter(&row);
            let (sin_t, cos_t) = theta.sin_cos();
            for ir in 0..size {
                // row 0 is the top of the image: frequency increases upward
                let yv = -(-1.0 + 2.0 * ir as f64 / (size - 1) as f64);
                for ic in 0..size {
                    let xv = -1.0 + 2.0 * ic as f64 / (size - 1) as f64;
                    let s = xv * cos_t + yv * sin_t;
                    let idx = (s + 1.0) / 2.0 * (nb - 1) as f64;
                    if idx < 0.0 || idx > (nb - 1) as f64 {
                        continue;
                    }
                    let i0 = (idx.floor() as usize).min(nb - 2);
                    let w = T::from_f64c(idx - i0 as f64);
                    let v = filt[i0] * (T::one() - w) + filt[i0 + 1] * w;
                    img[(ir, ic)] += v;
                }
            }
        }
        let scale = T::from_f64c(std::f64::consts::PI / entries.len() as f64);
        img.mapv_inplace(|v| (v * scale).max(T::zero()));
        planes.push(img);
    }
    let y_plane = planes.pop().expect("two planes");
    let x_plane = planes.pop().expect("two planes");
    let mut image = TfImage { x_plane, y_plane };
    if joint_normalize {
        let mx = image
            .x_plane
            .iter()
            .chain(image.y_plane.iter())
            .cloned()
            .fold(T::zero(), T::max);
        if mx > T::zero() {
            image.x_plane.mapv_inplace(|v| v / mx);
            image.y_plane.mapv_inplace(|v| v / mx);
        }
    } else {
        for plane in [&mut image.x_plane, &mut image.y_plane] {
            let mx = plane.iter().cloned().fold(T::zero(), T::max);
            if mx > T::zero() {
                plane.mapv_inplace(|v| v / mx);
            }
        }
    }
    Ok(image)
}

/// Full feature path: extract the training sequence, scan, reconstruct.
pub fn make_feature<T: Real>(
    realization: &ChannelRealization<T>,
    layout: &FrameLayout,
    fc: &FeatureConfig,
) -> Result<TfImage<T>> {
    let ts = extract_ts(&realization.received, layout)?;
    let sino = build_sinogram(&ts, &fc.orders, fc.radial_bins)?;
    inverse_radon(&sino, fc.image_size, fc.joint_normalize)
}

/// Principal-axis orientation of an image plane, in degrees from the
/// vertical (frequency) axis. Signed so that a positive-order training
/// chirp reports a positive tilt.
pub fn principal_angle_deg<T: Real>(plane: &Array2<T>) -> f64 {
    let size = plane.nrows();
    let c = (size - 1) as f64 / 2.0;
    let mut m = 0.0;
    let (mut cx, mut cy) = (0.0, 0.0);
    for ((r, col), v) in plane.indexed_iter() {
        let w = v.to_f64c();
        let x = col as f64 - c;
        let y = r as f64 - c;
        m += w;
        cx += w * x;
        cy += w * y;
    }
    cx /= m;
    cy /= m;
    let (mut mu20, mut mu02, mut mu11) = (0.0, 0.0, 0.0);
    for ((r, col), v) in plane.indexed_iter() {
        let w = v.to_f64c();
        let x = col as f64 - c - cx;
        let y = r as f64 - c - cy;
        mu20 += w * x * x;
        mu02 += w * y * y;
        mu11 += w * x * y;
    }
    let ang_from_x = 0.5 * (2.0 * mu11).atan2(mu20 - mu02);
    let deg = ang_from_x.to_degrees();
    if deg >= 0.0 {
        90.0 - deg
    } else {
        -90.0 - deg
    }
}
