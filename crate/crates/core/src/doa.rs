//! Difference co-array MUSIC.
//!
//! The antenna covariance `R_zz` is folded onto the co-array lags
//! `m = p_a - p_b`, spatially smoothed into an `L_s x L_s` matrix and searched
//! with MUSIC over a half-degree grid. Steering vectors use element index
//! `q = 0..L_s-1` with phase `2 pi f q d cos(theta) / c`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::array::ArrayGeometry;
use crate::dsp::C64;
use crate::error::{Result, UwasError};
use crate::plan::SPEED_OF_LIGHT;

/// Grid resolution of the MUSIC search, degrees.
pub const GRID_STEP_DEG: f64 = 0.5;
/// Minimum peak height over the spectrum median (3 dB).
pub const PEAK_PROMINENCE: f64 = 1.995_262_314_968_879_5;

/// Angles of the search grid, `0..=180` degrees.
pub fn angle_grid() -> Vec<f64> {
    let steps = (180.0 / GRID_STEP_DEG).round() as usize;
    (0..=steps).map(|i| i as f64 * GRID_STEP_DEG).collect()
}

/// Time-averaged covariance `(1/T) sum_t z[t] z[t]^H` of per-antenna sequences.
pub fn sample_covariance(z: &[Vec<C64>]) -> Result<DMatrix<C64>> {
    let l = z.len();
    let t = z.first().map_or(0, |s| s.len());
    for s in z {
        if s.len() != t {
            return Err(UwasError::LengthMismatch {
                expected: t,
                actual: s.len(),
            });
        }
    }
    if t < l {
        log::warn!("covariance from {t} snapshots over {l} antennas is rank deficient");
    }
    let mut r = DMatrix::from_element(l, l, C64::new(0.0, 0.0));
    if t == 0 {
        return Ok(r);
    }
    for a in 0..l {
        for b in a..l {
            let v: C64 = z[a]
                .iter()
                .zip(&z[b])
                .map(|(x, y)| x * y.conj())
                .sum::<C64>()
                / t as f64;
            r[(a, b)] = v;
            r[(b, a)] = v.conj();
        }
    }
    Ok(r)
}

/// Redundancy-averaged co-array lags.
#[derive(Debug, Clone, PartialEq)]
pub struct CoarrayCovariance {
    /// `r_{-(L_s-1)} .. r_{L_s-1}` in ascending lag order.
    pub r_lags: Vec<C64>,
    pub aperture: usize,
}

impl CoarrayCovariance {
    /// Lag `m`, `|m| < L_s`.
    pub fn lag(&self, m: isize) -> C64 {
        self.r_lags[(m + self.aperture as isize - 1) as usize]
    }
}

/// Averages every covariance entry sharing the same position difference.
pub fn coarray_extract(r_zz: &DMatrix<C64>, geometry: &ArrayGeometry) -> Result<CoarrayCovariance> {
    let l = geometry.len();
    if r_zz.shape() != (l, l) {
        return Err(UwasError::LengthMismatch {
            expected: l,
            actual: r_zz.nrows(),
        });
    }
    let ls = geometry.aperture();
    let mut sum = vec![C64::new(0.0, 0.0); 2 * ls - 1];
    let mut count = vec![0usize; 2 * ls - 1];
    let p = geometry.positions();
    for a in 0..l {
        for b in 0..l {
            let m = p[a] as isize - p[b] as isize;
            let idx = (m + ls as isize - 1) as usize;
            sum[idx] += r_zz[(a, b)];
            count[idx] += 1;
        }
    }
    if count.iter().any(|&c| c == 0) {
        return Err(UwasError::IncompleteCoarray(p.to_vec()));
    }
    let r_lags = sum
        .into_iter()
        .zip(count)
        .map(|(s, c)| s / c as f64)
        .collect();
    Ok(CoarrayCovariance {
        r_lags,
        aperture: ls,
    })
}

/// `R_Ls = (1/L_s) sum_ls r_ls r_ls^H` with windows
/// `r_ls = [r_{ls-(L_s-1)}, .., r_ls]`.
pub fn spatial_smooth(co: &CoarrayCovariance) -> DMatrix<C64> {
    let ls = co.aperture;
    let mut r = DMatrix::from_element(ls, ls, C64::new(0.0, 0.0));
    for shift in 0..ls {
        let w = DVector::from_fn(ls, |q, _| co.r_lags[shift + q]);
        r += &w * w.adjoint();
    }
    r / C64::new(ls as f64, 0.0)
}

/// Steering model for one frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Steering {
    pub carrier_hz: f64,
    pub unit_spacing_m: f64,
}

impl Steering {
    /// Inter-element phase step at `theta`.
    pub fn phase_step(&self, doa_deg: f64) -> f64 {
        2.0 * PI * self.carrier_hz * self.unit_spacing_m / SPEED_OF_LIGHT
            * doa_deg.to_radians().cos()
    }

    pub fn vector(&self, dim: usize, doa_deg: f64) -> DVector<C64> {
        let w = self.phase_step(doa_deg);
        DVector::from_fn(dim, |q, _| C64::from_polar(1.0, w * q as f64))
    }
}

/// MUSIC result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoaEstimate {
    /// Peak angles, strongest first.
    pub angles_deg: Vec<f64>,
    /// `P(theta)` over [`angle_grid`].
    pub spectrum: Vec<f64>,
}

/// Eigenvectors of a Hermitian matrix, sorted by ascending eigenvalue.
fn sorted_eigen(r: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let eig = r.clone().symmetric_eigen();
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(r.nrows(), idx.len(), |row, c| {
        eig.eigenvectors[(row, idx[c])]
    });
    (vals, vecs)
}

/// Pseudo-spectrum `1 / (e^H V_n V_n^H e)` over the grid.
pub fn music_spectrum(r: &DMatrix<C64>, steering: &Steering, n_sources: usize) -> Vec<f64> {
    let dim = r.nrows();
    let (_, vecs) = sorted_eigen(r);
    let noise = vecs.columns(0, dim - n_sources).adjoint();
    let mut e = vec![C64::new(0.0, 0.0); dim];
    angle_grid()
        .iter()
        .map(|&theta| {
            let step = C64::from_polar(1.0, steering.phase_step(theta));
            let mut z = C64::new(1.0, 0.0);
            for v in e.iter_mut() {
                *v = z;
                z *= step;
            }
            let denom: f64 = noise
                .row_iter()
                .map(|row| {
                    row.iter()
                        .zip(&e)
                        .map(|(a, b)| a * b)
                        .sum::<C64>()
                        .norm_sqr()
                })
                .sum();
            1.0 / denom.max(f64::MIN_POSITIVE)
        })
        .collect()
}

/// Interior local maxima at least [`PEAK_PROMINENCE`] times the median,
/// strongest first (ties toward the smaller angle).
pub fn pick_peaks(spectrum: &[f64], count: usize) -> Vec<usize> {
    if spectrum.len() < 3 || count == 0 {
        return Vec::new();
    }
    let mut sorted = spectrum.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    let mut peaks: Vec<usize> = (1..spectrum.len() - 1)
        .filter(|&i| {
            spectrum[i] > spectrum[i - 1]
                && spectrum[i] >= spectrum[i + 1]
                && spectrum[i] >= PEAK_PROMINENCE * median
        })
        .collect();
    peaks.sort_by(|&a, &b| spectrum[b].total_cmp(&spectrum[a]).then(a.cmp(&b)));
    peaks.truncate(count);
    peaks
}

/// MUSIC on a smoothed co-array (or any uniform-array) covariance.
pub fn music(r: &DMatrix<C64>, steering: &Steering, n_sources: usize) -> Result<DoaEstimate> {
    let dim = r.nrows();
    if n_sources >= dim {
        return Err(UwasError::SensingFailure {
            sources: n_sources,
            aperture: dim,
        });
    }
    let spectrum = music_spectrum(r, steering, n_sources);
    let grid = angle_grid();
    let angles_deg = pick_peaks(&spectrum, n_sources)
        .into_iter()
        .map(|i| grid[i])
        .collect();
    Ok(DoaEstimate {
        angles_deg,
        spectrum,
    })
}

/// Covariance -> co-array -> smoothing -> MUSIC.
pub fn coarray_music(
    r_zz: &DMatrix<C64>,
    geometry: &ArrayGeometry,
    carrier_hz: f64,
    n_sources: usize,
) -> Result<DoaEstimate> {
    let co = coarray_extract(r_zz, geometry)?;
    let r = spatial_smooth(&co);
    music(
        &r,
        &Steering {
            carrier_hz,
            unit_spacing_m: geometry.unit_spacing_m(),
        },
        n_sources,
    )
}

/// Analytic antenna covariance `sum_i p_i a_i a_i^H + sigma2 I` for
/// uncorrelated sources `(doa_deg, carrier_hz, power)`.
pub fn model_covariance(
    geometry: &ArrayGeometry,
    sources: &[(f64, f64, f64)],
    sigma2: f64,
) -> DMatrix<C64> {
    let l = geometry.len();
    let mut r = DMatrix::from_element(l, l, C64::new(0.0, 0.0));
    for &(theta, f, p) in sources {
        let st = Steering {
            carrier_hz: f,
            unit_spacing_m: geometry.unit_spacing_m(),
        };
        let w = st.phase_step(theta);
        let a = DVector::from_fn(l, |i, _| {
            C64::from_polar(1.0, w * geometry.positions()[i] as f64)
        });
        r += (&a * a.adjoint()) * C64::new(p, 0.0);
    }
    for i in 0..l {
        r[(i, i)] += sigma2;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    const F: f64 = 2.4e9;

    fn sparse4() -> ArrayGeometry {
        ArrayGeometry::sparse_ruler(4, 0.0625).unwrap()
    }

    #[test]
    fn grid_has_361_points() {
        let g = angle_grid();
        assert_eq!(g.len(), 361);
        assert_eq!(g[180], 90.0);
    }

    #[test]
    fn broadside_covariance_is_all_ones() {
        let z = vec![vec![C64::new(1.0, 0.0); 8]; 3];
        let r = sample_covariance(&z).unwrap();
        assert!(r.iter().all(|v| (v - C64::new(1.0, 0.0)).norm() < 1e-12));
    }

    #[test]
    fn coarray_lags_of_sparse_ruler() {
        let g = sparse4();
        let co = coarray_extract(&DMatrix::identity(4, 4), &g).unwrap();
        assert_eq!(co.r_lags.len(), 11);
        assert_eq!(co.lag(0), C64::new(1.0, 0.0));
        for m in 1..6 {
            assert_eq!(co.lag(m), C64::new(0.0, 0.0));
        }
    }

    #[test]
    fn delta_lags_smooth_to_scaled_identity() {
        let mut r_lags = vec![C64::new(0.0, 0.0); 11];
        r_lags[5] = C64::new(1.0, 0.0);
        let r = spatial_smooth(&CoarrayCovariance {
            r_lags,
            aperture: 6,
        });
        assert_eq!(r.shape(), (6, 6));
        let expected = DMatrix::<C64>::identity(6, 6) / C64::new(6.0, 0.0);
        assert!((r - expected).norm() < 1e-15);
    }

    #[test]
    fn broadside_peak() {
        let g = sparse4();
        let r = model_covariance(&g, &[(90.0, F, 1.0)], 0.01);
        let est = coarray_music(&r, &g, F, 1).unwrap();
        assert_eq!(est.angles_deg, vec![90.0]);
    }

    #[test]
    fn two_and_three_sources() {
        let g = sparse4();
        for truth in [vec![18.0, 62.0], vec![42.0, 87.0, 145.0]] {
            let src: Vec<_> = truth.iter().map(|&t| (t, F, 1.0)).collect();
            let r = model_covariance(&g, &src, 0.0);
            let mut est = coarray_music(&r, &g, F, truth.len()).unwrap().angles_deg;
            est.sort_by(f64::total_cmp);
            assert_eq!(est, truth);
        }
    }

    #[test]
    fn too_many_sources_is_a_failure() {
        let g = sparse4();
        let r = model_covariance(&g, &[(30.0, F, 1.0)], 0.0);
        assert!(matches!(
            coarray_music(&r, &g, F, 6),
            Err(UwasError::SensingFailure { .. })
        ));
    }
}
