//! Signal carriers: single- and dual-polarization complex sample streams.

use crate::fft;
use crate::num::{Real, C};
use crate::{Error, Result};

/// A complex baseband waveform with its sample rate in Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSignal<T: Real> {
    pub samples: Vec<C<T>>,
    pub sample_rate: T,
}

impl<T: Real> ComplexSignal<T> {
    pub fn new(samples: Vec<C<T>>, sample_rate: T) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid_argument("signal must be non-empty"));
        }
        if sample_rate <= T::zero() || sample_rate.is_nan() {
            return Err(Error::invalid_argument("sample_rate must be > 0"));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Total energy: sum of |s|^2.
    pub fn energy(&self) -> T {
        self.samples.iter().fold(T::zero(), |acc, s| acc + s.norm_sqr())
    }

    /// Mean sample power: energy / length.
    pub fn mean_power(&self) -> T {
        self.energy() / T::from_f64c(self.len() as f64)
    }

    pub fn scale(&mut self, k: T) {
        for s in self.samples.iter_mut() {
            *s = s.scale(k);
        }
    }

    /// Band-limited resampling to a new rate. The new length is
    /// `round(len * new_rate / rate)` and must map back exactly.
    pub fn resample_to(&self, new_rate: T) -> Result<Self> {
        if self.sample_rate == new_rate {
            return Ok(self.clone());
        }
        let ratio = (new_rate / self.sample_rate).to_f64c();
        let m = (self.len() as f64 * ratio).round() as usize;
        if m == 0 {
            return Err(Error::invalid_argument("resample_to: target too short"));
        }
        let samples = fft::resample(&self.samples, m)?;
        ComplexSignal::new(samples, new_rate)
    }
}

/// Two aligned polarization tributaries sharing a sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPolSignal<T: Real> {
    pub x_pol: ComplexSignal<T>,
    pub y_pol: ComplexSignal<T>,
}

impl<T: Real> DualPolSignal<T> {
    pub fn new(x_pol: ComplexSignal<T>, y_pol: ComplexSignal<T>) -> Result<Self> {
        if x_pol.len() != y_pol.len() {
            return Err(Error::invalid_argument("polarizations must share length"));
        }
        if x_pol.sample_rate != y_pol.sample_rate {
            return Err(Error::invalid_argument("polarizations must share sample rate"));
        }
        Ok(Self { x_pol, y_pol })
    }

    pub fn len(&self) -> usize {
        self.x_pol.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x_pol.is_empty()
    }

    pub fn sample_rate(&self) -> T {
        self.x_pol.sample_rate
    }

    /// Combined energy over both polarizations.
    pub fn energy(&self) -> T {
        self.x_pol.energy() + self.y_pol.energy()
    }

    /// Mean combined power per sample instant: mean(|x|^2 + |y|^2).
    pub fn mean_power(&self) -> T {
        self.energy() / T::from_f64c(self.len() as f64)
    }

    pub fn scale(&mut self, k: T) {
        self.x_pol.scale(k);
        self.y_pol.scale(k);
    }

    pub fn resample_to(&self, new_rate: T) -> Result<Self> {
        DualPolSignal::new(self.x_pol.resample_to(new_rate)?, self.y_pol.resample_to(new_rate)?)
    }

    /// Apply one function to both polarization sample buffers.
    pub fn map_pols<F: FnMut(&mut Vec<C<T>>)>(&mut self, mut f: F) {
        f(&mut self.x_pol.samples);
        f(&mut self.y_pol.samples);
    }
}
