//! Gaussian-envelope control pulses: evaluation, analytic spectrum, fluence
//! and effective duration.

use std::io::Write;
use std::path::Path;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qsystem::LevelSystem;
use crate::scalar::{erf, lit, Real};

pub const DEFAULT_HORIZON: f64 = 200.0;
pub const DEFAULT_WIDTH: f64 = 30.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Real")]
pub struct FieldComponent<T> {
    pub amplitude: T,
    pub phase: T,
    pub carrier: T,
}

/// `E(t) = s(t) * sum_l A_l cos(w_l t + theta_l)` with a Gaussian envelope
/// `s(t) = exp(-(t - center)^2 / (2 width^2))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Real")]
pub struct ControlField<T> {
    pub components: Vec<FieldComponent<T>>,
    pub center_time: T,
    pub width: T,
    pub horizon: T,
}

/// Wraps an angle into [0, 2 pi).
pub fn wrap_phase<T: Real>(theta: T) -> T {
    let two_pi = T::TAU();
    let w = theta % two_pi;
    let w = if w < T::zero() { w + two_pi } else { w };
    if w >= two_pi {
        T::zero()
    } else {
        w
    }
}

impl<T: Real> ControlField<T> {
    pub fn new(components: Vec<FieldComponent<T>>, center_time: T, width: T, horizon: T) -> Result<Self> {
        let mut field = ControlField { components, center_time, width, horizon };
        for c in &mut field.components {
            c.phase = wrap_phase(c.phase);
        }
        field.validate()?;
        Ok(field)
    }

    /// Field on the given carriers with the default window (T = 200 fs,
    /// sigma = 30 fs, centred at T/2).
    pub fn resonant(carriers: &[T], amplitudes: &[T], phases: &[T]) -> Result<Self> {
        if amplitudes.len() != carriers.len() || phases.len() != carriers.len() {
            return Err(Error::DimensionMismatch { expected: carriers.len(), found: amplitudes.len().min(phases.len()) });
        }
        let components = carriers
            .iter()
            .zip(amplitudes)
            .zip(phases)
            .map(|((&carrier, &amplitude), &phase)| FieldComponent { amplitude, phase, carrier })
            .collect();
        let horizon: T = lit(DEFAULT_HORIZON);
        Self::new(components, horizon * lit(0.5), lit(DEFAULT_WIDTH), horizon)
    }

    /// All-zero field on the system's resonant carriers.
    pub fn zero_for(system: &LevelSystem<T>) -> Self {
        let carriers = system.carriers();
        let zeros = vec![T::zero(); carriers.len()];
        Self::resonant(&carriers, &zeros, &zeros).expect("zero field is valid")
    }

    pub fn with_window(mut self, center_time: T, width: T, horizon: T) -> Result<Self> {
        self.center_time = center_time;
        self.width = width;
        self.horizon = horizon;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, c) in self.components.iter().enumerate() {
            if !(c.amplitude >= T::zero()) || !c.amplitude.is_finite() {
                return Err(Error::config(format!("component {i}: amplitude must be >= 0")));
            }
            if !(c.carrier > T::zero()) || !c.carrier.is_finite() {
                return Err(Error::config(format!("component {i}: carrier must be > 0")));
            }
            if !(c.phase >= T::zero() && c.phase < T::TAU()) {
                return Err(Error::config(format!("component {i}: phase outside [0, 2pi)")));
            }
        }
        if !(self.width > T::zero()) || !(self.horizon > T::zero()) || !self.center_time.is_finite() {
            return Err(Error::config("width and horizon must be > 0"));
        }
        Ok(())
    }

    pub fn amplitudes(&self) -> Vec<T> {
        self.components.iter().map(|c| c.amplitude).collect()
    }

    pub fn phases(&self) -> Vec<T> {
        self.components.iter().map(|c| c.phase).collect()
    }

    pub fn carriers(&self) -> Vec<T> {
        self.components.iter().map(|c| c.carrier).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(|c| c.amplitude == T::zero())
    }

    #[inline]
    pub fn envelope(&self, t: T) -> T {
        let d = t - self.center_time;
        (-(d * d) / (lit::<T>(2.0) * self.width * self.width)).exp()
    }

    #[inline]
    pub fn evaluate(&self, t: T) -> T {
        let carrier_sum: T = self
            .components
            .iter()
            .map(|c| c.amplitude * (c.carrier * t + c.phase).cos())
            .sum();
        self.envelope(t) * carrier_sum
    }

    /// Fourier transform of the envelope, `g(v) = int s(t) e^{-i v t} dt`.
    pub fn envelope_transform(&self, nu: T) -> Complex<T> {
        let sigma = self.width;
        let mag = sigma * T::TAU().sqrt() * (-(sigma * sigma * nu * nu) * lit(0.5)).exp();
        Complex::from_polar(mag, -nu * self.center_time)
    }

    /// `eps(w) = int E(t) e^{-i w t} dt` over the whole real line.
    pub fn spectrum_at(&self, omega: T) -> Complex<T> {
        let half: T = lit(0.5);
        self.components.iter().fold(Complex::new(T::zero(), T::zero()), |acc, c| {
            let a = c.amplitude * half;
            let plus = self.envelope_transform(omega - c.carrier) * Complex::from_polar(a, c.phase);
            let minus = self.envelope_transform(omega + c.carrier) * Complex::from_polar(a, -c.phase);
            acc + plus + minus
        })
    }

    pub fn analytic_spectrum(&self, omega_grid: &[T]) -> Spectrum<T> {
        Spectrum {
            omega: omega_grid.to_vec(),
            values: omega_grid.iter().map(|&w| self.spectrum_at(w)).collect(),
        }
    }

    /// |eps(w_l)|^2 at each component's own carrier.
    pub fn carrier_powers(&self) -> Vec<T> {
        self.components.iter().map(|c| self.spectrum_at(c.carrier).norm_sqr()).collect()
    }

    /// F = sum_l A_l^2.
    pub fn fluence(&self) -> T {
        self.components.iter().map(|c| c.amplitude * c.amplitude).sum()
    }

    /// T_e = int_0^horizon s(t) dt, in closed form.
    pub fn effective_duration(&self) -> T {
        let sigma = self.width;
        let root2_sigma = T::SQRT_2() * sigma;
        let upper = erf((self.horizon - self.center_time) / root2_sigma);
        let lower = erf(self.center_time / root2_sigma);
        sigma * (T::PI() * lit(0.5)).sqrt() * (upper + lower)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse { what: "field".into(), message: e.to_string() })
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let mut field: Self = toml::from_str(s)
            .map_err(|e| Error::Parse { what: "field".into(), message: e.to_string() })?;
        for c in &mut field.components {
            c.phase = wrap_phase(c.phase);
        }
        field.validate()?;
        Ok(field)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Parse { message, .. } => Error::Parse { what: path.display().to_string(), message },
            other => other,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_toml_string()?)?;
        Ok(())
    }
}

/// Complex spectrum sampled on a frequency grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum<T> {
    pub omega: Vec<T>,
    pub values: Vec<Complex<T>>,
}

impl<T: Real> Spectrum<T> {
    pub fn power(&self) -> Vec<T> {
        self.values.iter().map(|z| z.norm_sqr()).collect()
    }

    pub fn max_power(&self) -> T {
        self.power().into_iter().fold(T::zero(), T::max)
    }

    /// CSV with columns omega, re, im, power.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["omega", "re", "im", "power"])?;
        for (omega, z) in self.omega.iter().zip(&self.values) {
            w.write_record([
                format!("{omega:e}"),
                format!("{:e}", z.re),
                format!("{:e}", z.im),
                format!("{:e}", z.norm_sqr()),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `n` equally spaced points from `lo` to `hi` inclusive.
pub fn uniform_grid<T: Real>(lo: T, hi: T, n: usize) -> Vec<T> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / lit((n - 1) as f64);
            (0..n).map(|i| lo + step * lit(i as f64)).collect()
        }
    }
}
