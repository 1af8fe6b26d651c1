//! Occupancy recovery from the sub-Nyquist branch outputs.
//!
//! The first antenna's `K` branches form the multiple-measurement system
//! `Z = gamma C`, where row `b` of `C` is band `beta[b]`'s baseband content.
//! Orthogonal matching pursuit picks atoms (columns of `gamma`) while the best
//! remaining one is statistically distinguishable from folded noise.
//!
//! A second test counts sources across all antennas and branches to flag a
//! sensing failure when the busy count reaches the virtual aperture, which the
//! single-antenna residual cannot reveal once `K` atoms are in use.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::array::ArrayGeometry;
use crate::doa::{angle_grid, Steering};
use crate::dsp::C64;
use crate::error::Result;
use crate::sns::SnsOutput;

/// Stopping rule parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensingParams {
    /// An atom is accepted when its score exceeds the noise-only mean by this
    /// many standard deviations.
    pub significance_sigmas: f64,
    /// Scores below this fraction of the input energy are treated as zero.
    pub relative_floor: f64,
    /// Eigenvalues of the whitened stacked covariance above this multiple of
    /// the largest noise eigenvalue count as sources.
    pub rank_factor: f64,
}

impl Default for SensingParams {
    fn default() -> Self {
        Self {
            significance_sigmas: 6.0,
            relative_floor: 1e-6,
            rank_factor: 2.0,
        }
    }
}

/// Recovered support over the selected bands.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportEstimate {
    /// One flag per entry of `beta`.
    pub s_hat_beta: Vec<bool>,
    /// Selected columns in order of selection.
    pub atoms: Vec<usize>,
    pub residual_energy: f64,
    /// Residual energy after each accepted atom.
    pub residual_trace: Vec<f64>,
    pub iterations_used: usize,
    /// A significant atom remained after `max_support` atoms were chosen.
    pub overflow: bool,
}

/// Band state as seen by the receiver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BandStatus {
    Vacant,
    Busy,
    Unsensed,
}

impl BandStatus {
    pub fn symbol(self) -> char {
        match self {
            BandStatus::Vacant => '0',
            BandStatus::Busy => '1',
            BandStatus::Unsensed => '-',
        }
    }

    pub fn from_symbol(c: char) -> Option<Self> {
        match c {
            '0' => Some(BandStatus::Vacant),
            '1' => Some(BandStatus::Busy),
            '-' => Some(BandStatus::Unsensed),
            _ => None,
        }
    }
}

fn column_norms(gamma: &DMatrix<C64>) -> DMatrix<C64> {
    let mut g = gamma.clone();
    for mut c in g.column_iter_mut() {
        let n = c.norm();
        if n > 0.0 {
            c /= C64::new(n, 0.0);
        }
    }
    g
}

fn project_out(v: &DVector<C64>, basis: &[DVector<C64>]) -> DVector<C64> {
    let mut r = v.clone();
    for q in basis {
        let c = q.dotc(&r);
        r -= q * c;
    }
    r
}

/// Orthonormal basis of the residual's signal subspace: eigenvectors of
/// `R R^H` whose eigenvalues clear the noise edge.
fn residual_signal_basis(residual: &DMatrix<C64>, noise_floor: f64) -> Vec<DVector<C64>> {
    let eig = (residual * residual.adjoint()).symmetric_eigen();
    (0..eig.eigenvalues.len())
        .filter(|&i| eig.eigenvalues[i] > noise_floor)
        .map(|i| eig.eigenvectors.column(i).into_owned())
        .collect()
}

/// Multiple-measurement OMP with rank-aware atom selection.
///
/// `z` is `K x J` (branches by baseband bins), `gamma` is `K x |beta|`, and
/// `bin_noise` is the noise variance of one Nyquist-rate bin (`n sigma^2`);
/// zero disables the statistical test. Noise in `z` is taken to have
/// covariance `bin_noise * gamma gamma^H`.
///
/// Candidates are ranked by how much of their component orthogonal to the
/// chosen atoms lies in the residual's signal subspace. An atom is accepted
/// only if its correlation energy with the residual is significant against
/// folded noise.
pub fn omp_recover(
    z: &DMatrix<C64>,
    gamma: &DMatrix<C64>,
    bin_noise: f64,
    max_support: usize,
    params: &SensingParams,
) -> SupportEstimate {
    let k = gamma.nrows();
    let cols = gamma.ncols();
    let j = z.ncols() as f64;
    let g = column_norms(gamma);
    let cov = gamma * gamma.adjoint();
    let cov_max = cov.clone().symmetric_eigenvalues().max().max(0.0);
    let input_energy = z.norm_squared();
    let max_support = max_support.min(k).min(cols);
    let edge = (1.0 + (k as f64 / j.max(1.0)).sqrt()).powi(2);
    let noise_floor = (params.rank_factor * edge * j * bin_noise * cov_max)
        .max(params.relative_floor * input_energy);

    let mut basis: Vec<DVector<C64>> = Vec::new();
    let mut atoms: Vec<usize> = Vec::new();
    let mut residual = z.clone();
    let mut trace = Vec::new();
    let mut overflow = false;

    if input_energy > 0.0 {
        loop {
            let signal = residual_signal_basis(&residual, noise_floor);
            let mut best: Option<(usize, f64, DVector<C64>)> = None;
            for c in 0..cols {
                if atoms.contains(&c) {
                    continue;
                }
                let pg = project_out(&g.column(c).into_owned(), &basis);
                let norm2 = pg.norm_squared();
                if norm2 < 1e-20 {
                    continue;
                }
                let rank = if signal.is_empty() {
                    (pg.adjoint() * &residual).norm_squared() / norm2
                } else {
                    signal.iter().map(|u| u.dotc(&pg).norm_sqr()).sum::<f64>() / norm2
                };
                if best.as_ref().map_or(true, |(_, s, _)| rank > *s) {
                    best = Some((c, rank, pg));
                }
            }
            let Some((c, _, pg)) = best else { break };
            let score = (pg.adjoint() * &residual).norm_squared();
            let noise_mean = j * bin_noise * (pg.adjoint() * &cov * &pg)[(0, 0)].re;
            let threshold = (noise_mean * (1.0 + params.significance_sigmas / j.sqrt()))
                .max(params.relative_floor * input_energy);
            if score <= threshold {
                break;
            }
            if atoms.len() == max_support {
                overflow = true;
                break;
            }
            let q = &pg / C64::new(pg.norm(), 0.0);
            let coeff = q.adjoint() * &residual;
            residual -= &q * coeff;
            basis.push(q);
            atoms.push(c);
            trace.push(residual.norm_squared());
        }
    }

    let mut s_hat_beta = vec![false; cols];
    for &a in &atoms {
        s_hat_beta[a] = true;
    }
    SupportEstimate {
        s_hat_beta,
        iterations_used: atoms.len(),
        atoms,
        residual_energy: residual.norm_squared(),
        residual_trace: trace,
        overflow,
    }
}

/// Maps local support flags to global band indices `1..=n_bands`
/// (returned vector index `i` is band `i + 1`).
pub fn status_from_support(s_hat_beta: &[bool], beta: &[usize], n_bands: usize) -> Vec<BandStatus> {
    let mut out = vec![BandStatus::Unsensed; n_bands];
    for (&b, &busy) in beta.iter().zip(s_hat_beta) {
        out[b - 1] = if busy {
            BandStatus::Busy
        } else {
            BandStatus::Vacant
        };
    }
    out
}

/// Whitened covariance of the stacked `K x L` outputs and its eigen-structure.
///
/// The stacked per-bin vector `[z_{k,l}]` has noise covariance
/// `n sigma^2 (gamma gamma^H kron I_L)`. After whitening on the range of
/// `gamma` the noise is white and each busy band `i` contributes the rank-one
/// direction `(T gamma_i) kron a(theta_i)`, so busy bands show up as
/// eigenvalues above the noise bulk.
#[derive(Debug, Clone)]
pub struct StackedSubspace {
    /// Whitening transform `T` (`r x K`).
    pub whitening: DMatrix<C64>,
    /// Eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    /// Matching eigenvectors as columns.
    pub eigenvectors: DMatrix<C64>,
    pub source_count: usize,
}

pub fn stacked_subspace(
    out: &SnsOutput,
    bin_noise: f64,
    params: &SensingParams,
) -> StackedSubspace {
    let k = out.k_branches();
    let l = out.antennas();
    let gamma = &out.mixing.gamma;
    let svd = gamma.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let kept: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > 1e-10 * smax)
        .collect();
    let r = kept.len();
    let t = DMatrix::from_fn(r, k, |row, kk| {
        let i = kept[row];
        u[(kk, i)].conj() / svd.singular_values[i]
    });

    let j = out.bins(0, 0).len();
    let d = r * l;
    let mut rows = vec![vec![C64::new(0.0, 0.0); j]; d];
    for row in 0..r {
        for kk in 0..k {
            let w = t[(row, kk)];
            for ll in 0..l {
                for (acc, v) in rows[row * l + ll].iter_mut().zip(out.bins(kk, ll)) {
                    *acc += w * v;
                }
            }
        }
    }
    let mut cov = DMatrix::from_element(d, d, C64::new(0.0, 0.0));
    for a in 0..d {
        for b in a..d {
            let v: C64 = rows[a]
                .iter()
                .zip(&rows[b])
                .map(|(x, y)| x * y.conj())
                .sum();
            cov[(a, b)] = v;
            cov[(b, a)] = v.conj();
        }
    }
    let eig = cov.symmetric_eigen();
    let mut idx: Vec<usize> = (0..d).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues: Vec<f64> = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let eigenvectors = DMatrix::from_fn(d, d, |row, c| eig.eigenvectors[(row, idx[c])]);
    let lmax = eigenvalues.first().copied().unwrap_or(0.0).max(0.0);
    let source_count = if lmax <= 0.0 {
        0
    } else {
        let edge = (1.0 + (d as f64 / j.max(1) as f64).sqrt()).powi(2);
        let threshold = (params.rank_factor * edge * j as f64 * bin_noise).max(1e-9 * lmax);
        eigenvalues.iter().filter(|&&e| e > threshold).count()
    };
    StackedSubspace {
        whitening: t,
        eigenvalues,
        eigenvectors,
        source_count,
    }
}

/// Estimated number of busy selected bands.
pub fn estimate_source_count(out: &SnsOutput, bin_noise: f64, params: &SensingParams) -> usize {
    stacked_subspace(out, bin_noise, params).source_count
}

/// Ranks the selected bands by how well their best-fitting array response
/// lies in the stacked signal subspace, and keeps the top `count`.
///
/// `carriers_hz[c]` is the RF carrier of column `c` of `gamma`.
pub fn subspace_support(
    out: &SnsOutput,
    sub: &StackedSubspace,
    geometry: &ArrayGeometry,
    carriers_hz: &[f64],
    count: usize,
) -> Vec<usize> {
    let l = out.antennas();
    let gamma = &out.mixing.gamma;
    let signal = sub
        .eigenvectors
        .columns(0, count.min(sub.eigenvectors.ncols()));
    let grid = angle_grid();
    let mut scores: Vec<(usize, f64)> = (0..gamma.ncols())
        .map(|c| {
            let tg = &sub.whitening * gamma.column(c);
            let steer = Steering {
                carrier_hz: carriers_hz[c],
                unit_spacing_m: geometry.unit_spacing_m(),
            };
            let best = grid
                .iter()
                .map(|&theta| {
                    let w = steer.phase_step(theta);
                    let a: Vec<C64> = geometry
                        .positions()
                        .iter()
                        .map(|&p| C64::from_polar(1.0, w * p as f64))
                        .collect();
                    let v = DVector::from_fn(tg.len() * l, |i, _| tg[i / l] * a[i % l]);
                    let norm = v.norm_squared();
                    if norm > 0.0 {
                        (signal.adjoint() * &v).norm_squared() / norm
                    } else {
                        0.0
                    }
                })
                .fold(0.0, f64::max);
            (c, best)
        })
        .collect();
    scores.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut picked: Vec<usize> = scores.into_iter().take(count).map(|(c, _)| c).collect();
    picked.sort_unstable();
    picked
}

/// Full sensing result for one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingOutcome {
    /// Support over `beta`; replaced by the subspace ranking when the
    /// single-antenna system is not identifiable.
    pub s_hat_beta: Vec<bool>,
    pub omp: SupportEstimate,
    pub source_count: usize,
    /// Sensing failure: the slot cannot be characterized.
    pub failure: bool,
}

/// OMP on the first antenna, source counting on all antennas.
///
/// When the count reaches `K` the first antenna alone cannot identify the
/// support (every `K` columns of `gamma` span the branch space), so the
/// support is taken from [`subspace_support`] instead.
pub fn sense(
    out: &SnsOutput,
    sigma2: f64,
    geometry: &ArrayGeometry,
    carriers_hz: &[f64],
    n: usize,
    params: &SensingParams,
) -> Result<SensingOutcome> {
    let k = out.k_branches();
    let aperture = geometry.aperture();
    let j = out.bins(0, 0).len();
    let z = DMatrix::from_fn(k, j, |r, c| out.bins(r, 0)[c]);
    let bin_noise = sigma2 * n as f64;
    let sub = stacked_subspace(out, bin_noise, params);
    let source_count = sub.source_count;
    // Folded noise has covariance bin_noise * gamma gamma^H; whiten it first.
    let omp = omp_recover(
        &(&sub.whitening * z),
        &(&sub.whitening * &out.mixing.gamma),
        bin_noise,
        aperture.saturating_sub(1).max(1),
        params,
    );
    let failure = omp.overflow || source_count >= aperture;
    let s_hat_beta = if !failure && source_count >= k && source_count > 0 {
        let mut flags = vec![false; out.mixing.gamma.ncols()];
        for c in subspace_support(out, &sub, geometry, carriers_hz, source_count) {
            flags[c] = true;
        }
        flags
    } else {
        omp.s_hat_beta.clone()
    };
    Ok(SensingOutcome {
        s_hat_beta,
        omp,
        source_count,
        failure,
    })
}

/// Energy detector for the Nyquist-rate reference: `bands[c][l]` holds
/// the baseband bins of selected band `c` at antenna `l`.
pub fn energy_detect(bands: &[Vec<Vec<C64>>], bin_noise: f64, params: &SensingParams) -> Vec<bool> {
    bands
        .iter()
        .map(|per_antenna| {
            let dof: usize = per_antenna.iter().map(|b| b.len()).sum();
            let energy: f64 = per_antenna
                .iter()
                .flat_map(|b| b.iter())
                .map(|v| v.norm_sqr())
                .sum();
            let mean = dof as f64 * bin_noise;
            let threshold = mean * (1.0 + params.significance_sigmas / (dof.max(1) as f64).sqrt());
            energy > threshold && energy > 0.0
        })
        .collect()
}
