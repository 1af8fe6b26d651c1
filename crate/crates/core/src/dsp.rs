//! Block signal container and FFT helpers.
//!
//! A [`SlotSignal`] holds one slot of complex baseband samples in the
//! frequency domain (the unnormalized DFT of the block). Every filter in the
//! receiver is a brickwall mask over whole bins, so most of the pipeline never
//! leaves the frequency domain; time samples are produced on demand.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};

use crate::error::{Result, UwasError};

pub type C64 = Complex64;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    })
}

/// Unnormalized forward DFT.
pub fn fft(samples: &[C64]) -> Vec<C64> {
    let mut buf = samples.to_vec();
    if !buf.is_empty() {
        plan(buf.len(), false).process(&mut buf);
    }
    buf
}

/// Inverse DFT including the `1/n` factor.
pub fn ifft(spectrum: &[C64]) -> Vec<C64> {
    let mut buf = spectrum.to_vec();
    let n = buf.len();
    if n > 0 {
        plan(n, true).process(&mut buf);
        let s = 1.0 / n as f64;
        buf.iter_mut().for_each(|v| *v *= s);
    }
    buf
}

/// In-place unnormalized inverse DFT.
pub fn ifft_unscaled_in_place(buf: &mut [C64]) {
    if !buf.is_empty() {
        plan(buf.len(), true).process(buf);
    }
}

/// Circular complex Gaussian sample with the given variance.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re * s, im * s)
}

pub fn energy(samples: &[C64]) -> f64 {
    samples.iter().map(|v| v.norm_sqr()).sum()
}

/// Wraps an angle to (-pi, pi].
pub fn wrap_phase(x: f64) -> f64 {
    use std::f64::consts::PI;
    let mut y = x % (2.0 * PI);
    if y <= -PI {
        y += 2.0 * PI;
    } else if y > PI {
        y -= 2.0 * PI;
    }
    y
}

/// One slot of samples, stored as its DFT.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotSignal {
    spectrum: Vec<C64>,
}

impl SlotSignal {
    pub fn zeros(n: usize) -> Self {
        Self {
            spectrum: vec![C64::new(0.0, 0.0); n],
        }
    }

    pub fn from_samples(samples: &[C64]) -> Self {
        Self {
            spectrum: fft(samples),
        }
    }

    pub fn from_spectrum(spectrum: Vec<C64>) -> Self {
        Self { spectrum }
    }

    pub fn len(&self) -> usize {
        self.spectrum.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spectrum.is_empty()
    }

    pub fn spectrum(&self) -> &[C64] {
        &self.spectrum
    }

    pub fn spectrum_mut(&mut self) -> &mut [C64] {
        &mut self.spectrum
    }

    pub fn into_spectrum(self) -> Vec<C64> {
        self.spectrum
    }

    /// Time-domain samples of the block.
    pub fn samples(&self) -> Vec<C64> {
        ifft(&self.spectrum)
    }

    /// Time-domain energy, via Parseval.
    pub fn energy(&self) -> f64 {
        energy(&self.spectrum) / self.len().max(1) as f64
    }

    /// Time-domain energy restricted to bins `lo..hi`.
    pub fn energy_in(&self, lo: usize, hi: usize) -> f64 {
        energy(&self.spectrum[lo..hi]) / self.len().max(1) as f64
    }

    /// Brickwall mask keeping bins `lo..hi`.
    pub fn band_pass(&self, lo: usize, hi: usize) -> Self {
        let mut out = Self::zeros(self.len());
        out.spectrum[lo..hi].copy_from_slice(&self.spectrum[lo..hi]);
        out
    }

    pub fn scaled(mut self, factor: C64) -> Self {
        self.spectrum.iter_mut().for_each(|v| *v *= factor);
        self
    }

    pub fn add_assign(&mut self, other: &SlotSignal) -> Result<()> {
        if other.len() != self.len() {
            return Err(UwasError::LengthMismatch {
                expected: self.len(),
                actual: other.len(),
            });
        }
        for (a, b) in self.spectrum.iter_mut().zip(&other.spectrum) {
            *a += b;
        }
        Ok(())
    }

    /// Adds `factor * other` restricted to bins `lo..hi`.
    pub fn add_scaled_range(&mut self, other: &SlotSignal, factor: C64, lo: usize, hi: usize) {
        for (a, b) in self.spectrum[lo..hi]
            .iter_mut()
            .zip(&other.spectrum[lo..hi])
        {
            *a += b * factor;
        }
    }

    /// Power per bin, normalized so that the periodogram sums to the mean
    /// sample power.
    pub fn periodogram(&self) -> Vec<f64> {
        let n2 = (self.len() * self.len()).max(1) as f64;
        self.spectrum.iter().map(|v| v.norm_sqr() / n2).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn fft_round_trip() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let x: Vec<C64> = (0..100).map(|_| complex_gaussian(&mut rng, 1.0)).collect();
        let y = ifft(&fft(&x));
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn parseval_energy() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let x: Vec<C64> = (0..256).map(|_| complex_gaussian(&mut rng, 2.0)).collect();
        let s = SlotSignal::from_samples(&x);
        assert!((s.energy() - energy(&x)).abs() < 1e-9 * energy(&x));
        let p: f64 = s.periodogram().iter().sum();
        assert!((p - energy(&x) / 256.0).abs() < 1e-9);
    }

    #[test]
    fn wrap_phase_range() {
        use std::f64::consts::PI;
        assert!((wrap_phase(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_phase(-PI) - PI).abs() < 1e-12);
        assert!((wrap_phase(0.5) - 0.5).abs() < 1e-15);
        assert!((wrap_phase(2.0 * PI + 0.1) - 0.1).abs() < 1e-12);
    }
}
