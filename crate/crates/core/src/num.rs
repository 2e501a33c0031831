//! Scalar abstraction: everything numeric is generic over [`Real`],
//! instantiable at `f32` or `f64`.

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};

/// Floating-point scalar usable across FFTs, signals and tensors.
pub trait Real:
    Float + FloatConst + FromPrimitive + NumAssign + rustfft::FftNum + Send + Sync + 'static
{
    /// Lossless-enough conversion from `f64` for constants and config values.
    fn from_f64c(v: f64) -> Self {
        Self::from_f64(v).expect("constant conversion")
    }
    fn to_f64c(self) -> f64 {
        self.to_f64().expect("scalar widens to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub type C<T> = Complex<T>;

pub fn db_to_linear<T: Real>(db: T) -> T {
    T::from_f64c(10.0).powf(db / T::from_f64c(10.0))
}

pub fn linear_to_db<T: Real>(lin: T) -> T {
    T::from_f64c(10.0) * lin.log10()
}

/// dBm to watts.
pub fn dbm_to_watts<T: Real>(dbm: T) -> T {
    db_to_linear(dbm) * T::from_f64c(1e-3)
}

/// Error function, used by the exact GELU and the Maxwellian CDF.
pub fn erf<T: Real>(x: T) -> T {
    T::from_f64c(statrs::function::erf::erf(x.to_f64c()))
}
