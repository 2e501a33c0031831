//! Thin FFT helpers over rustfft: normalized inverse, frequency grids,
//! band-limited resampling, and zero-padded linear convolution.

use crate::num::{Real, C};
use crate::{Error, Result};
use rustfft::FftPlanner;

/// Forward FFT in place (unnormalized, DFT convention `sum x_k e^{-2pi j k m / N}`).
pub fn fft_in_place<T: Real>(buf: &mut [C<T>]) {
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(buf.len());
    fft.process(buf);
}

/// Inverse FFT in place, normalized by 1/N.
pub fn ifft_in_place<T: Real>(buf: &mut [C<T>]) {
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_inverse(buf.len());
    fft.process(buf);
    let scale = T::one() / T::from_f64c(buf.len() as f64);
    for v in buf.iter_mut() {
        *v = v.scale(scale);
    }
}

/// FFT-bin frequencies in Hz for a given sample rate (numpy `fftfreq` layout).
pub fn fft_freqs<T: Real>(n: usize, sample_rate: T) -> Vec<T> {
    let nf = T::from_f64c(n as f64);
    let df = sample_rate / nf;
    (0..n)
        .map(|k| {
            let k = if k <= (n - 1) / 2 { k as isize } else { k as isize - n as isize };
            T::from_f64c(k as f64) * df
        })
        .collect()
}

/// Band-limited (trigonometric) resampling from `n` to `m` samples.
///
/// Spectrum is truncated or zero-padded around DC. The negative-Nyquist bin
/// keeps full weight, matching the interpolation convention used by the
/// fractional Fourier quadrature.
pub fn resample<T: Real>(x: &[C<T>], m: usize) -> Result<Vec<C<T>>> {
    let n = x.len();
    if n == 0 || m == 0 {
        return Err(Error::invalid_argument("resample: empty signal"));
    }
    if n == m {
        return Ok(x.to_vec());
    }
    let mut spec = x.to_vec();
    fft_in_place(&mut spec);
    let mut out = vec![C::<T>::new(T::zero(), T::zero()); m];
    // number of positive-side and negative-side bins to carry over
    let keep = n.min(m);
    let pos = keep / 2; // bins [0, pos)
    let neg = keep - pos; // bins [-neg, -1]
    out[..pos].copy_from_slice(&spec[..pos]);
    for i in 0..neg {
        out[m - 1 - i] = spec[n - 1 - i];
    }
    ifft_in_place(&mut out);
    let scale = T::from_f64c(m as f64 / n as f64);
    for v in out.iter_mut() {
        *v = v.scale(scale);
    }
    Ok(out)
}

/// Linear convolution of `x` and `h` via zero-padded FFTs.
/// Output length is `x.len() + h.len() - 1`.
pub fn linear_convolve<T: Real>(x: &[C<T>], h: &[C<T>]) -> Vec<C<T>> {
    let out_len = x.len() + h.len() - 1;
    let n = out_len.next_power_of_two();
    let mut a = vec![C::<T>::new(T::zero(), T::zero()); n];
    let mut b = a.clone();
    a[..x.len()].copy_from_slice(x);
    b[..h.len()].copy_from_slice(h);
    fft_in_place(&mut a);
    fft_in_place(&mut b);
    for (va, vb) in a.iter_mut().zip(b.iter()) {
        *va *= *vb;
    }
    ifft_in_place(&mut a);
    a.truncate(out_len);
    a
}
