//! SpotFi-style joint angle/delay MUSIC over a spatially smoothed CSI
//! matrix.
//!
//! Smoothing needs shift-invariance in both dimensions: antennas must form
//! a uniform linear array and subcarriers a uniform grid. The DC and pilot
//! gaps in the reported subcarrier set are filled by linear interpolation
//! between neighbours before smoothing.
//!
//! A linear array cannot tell a bearing from its mirror image across the
//! array axis, so only the half-plane to the right of the axis direction is
//! searched (for [`ArrayGeometry::uniform_linear`], `|theta| <= pi/2`).
//! Bearings outside it score zero.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{check_frame, AoaConfig, AoaError, Result};
use crate::csi::{
    steering_vector, ArrayGeometry, ChannelSpec, CsiFrame, Profile2D, SPEED_OF_LIGHT,
    SUBCARRIER_SPACING_HZ,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathEstimate {
    pub theta: f64,
    pub tau_s: f64,
    /// Pseudospectrum value, relative to the strongest grid cell.
    pub power: f64,
}

/// Every subcarrier index from the lowest to the highest reported one.
pub fn uniform_subcarrier_grid(chanspec: &ChannelSpec) -> Vec<i32> {
    let idx = chanspec.subcarrier_indices();
    (idx[0]..=idx[idx.len() - 1]).collect()
}

/// Resamples `n_rx x n_sub` CSI onto the uniform grid.
fn interpolate_gaps(w: &DMatrix<Complex64>, indices: &[i32]) -> DMatrix<Complex64> {
    let grid: Vec<i32> = (indices[0]..=indices[indices.len() - 1]).collect();
    let mut out = DMatrix::zeros(w.nrows(), grid.len());
    let mut upper = 0;
    for (g, &k) in grid.iter().enumerate() {
        while indices[upper] < k {
            upper += 1;
        }
        if indices[upper] == k {
            out.set_column(g, &w.column(upper));
            continue;
        }
        let lower = upper - 1;
        let t = f64::from(k - indices[lower]) / f64::from(indices[upper] - indices[lower]);
        for i in 0..w.nrows() {
            out[(i, g)] = w[(i, lower)] * (1.0 - t) + w[(i, upper)] * t;
        }
    }
    out
}

struct Plan {
    n_ant_sub: usize,
    n_sub_sub: usize,
    /// Steering of the first `n_ant_sub` antennas, per bearing; `None` for
    /// bearings outside the searched half-plane.
    steer: Vec<Option<Vec<Complex64>>>,
}

fn plan(geom: &ArrayGeometry, chanspec: &ChannelSpec, cfg: &AoaConfig) -> Result<Plan> {
    cfg.validate()?;
    let (axis, _) = geom.uniform_linear_axis().ok_or_else(|| {
        AoaError::UnsupportedGeometry(
            "spatial smoothing needs a uniform linear array of at least 2 antennas".into(),
        )
    })?;
    let n_uniform = uniform_subcarrier_grid(chanspec).len();
    let n_ant_sub = cfg.smoothing.n_ant_sub;
    let n_sub_sub = cfg.smoothing.n_sub_sub.unwrap_or(n_uniform / 2);
    if n_ant_sub > geom.len() || n_sub_sub > n_uniform || n_sub_sub == 0 {
        return Err(AoaError::Config(format!(
            "sub-array {n_ant_sub}x{n_sub_sub} does not fit {}x{n_uniform}",
            geom.len()
        )));
    }
    let lambda = chanspec.wavelength();
    let normal = [axis[1], -axis[0]];
    let steer = cfg
        .theta_grid
        .iter()
        .map(|&theta| {
            let (s, c) = theta.sin_cos();
            (normal[0] * c + normal[1] * s >= -1e-12).then(|| {
                let mut v = steering_vector(theta, geom, lambda);
                v.truncate(n_ant_sub);
                v
            })
        })
        .collect();
    Ok(Plan {
        n_ant_sub,
        n_sub_sub,
        steer,
    })
}

/// Covariance of all overlapping `n_ant_sub x n_sub_sub` sub-blocks,
/// summed over transmit antennas.
fn smoothed_covariance(frame: &CsiFrame, plan: &Plan) -> DMatrix<Complex64> {
    let indices = frame.chanspec().subcarrier_indices();
    let (na, ns) = (plan.n_ant_sub, plan.n_sub_sub);
    let m = na * ns;
    let mut r = DMatrix::<Complex64>::zeros(m, m);
    for tx in 0..frame.n_tx() {
        let w = interpolate_gaps(&frame.tx_slice(tx), &indices);
        let shifts_a = w.nrows() - na + 1;
        let shifts_b = w.ncols() - ns + 1;
        let mut x = DMatrix::<Complex64>::zeros(m, shifts_a * shifts_b);
        for a in 0..shifts_a {
            for b in 0..shifts_b {
                let col = a * shifts_b + b;
                for i in 0..na {
                    for j in 0..ns {
                        x[(i * ns + j, col)] = w[(a + i, b + j)];
                    }
                }
            }
        }
        r += &x * x.adjoint();
    }
    r
}

/// Joint (bearing, delay) pseudospectrum on the config grids, normalized to
/// max 1.
pub fn spotfi_profile(
    frame: &CsiFrame,
    geom: &ArrayGeometry,
    cfg: &AoaConfig,
) -> Result<Profile2D> {
    check_frame(frame, geom)?;
    let chanspec = frame.chanspec();
    let plan = plan(geom, &chanspec, cfg)?;
    let (na, ns) = (plan.n_ant_sub, plan.n_sub_sub);
    let m = na * ns;
    if cfg.sources >= m {
        return Err(AoaError::Config(format!(
            "{} sources leave no noise subspace in a {m}-element sub-array",
            cfg.sources
        )));
    }

    let mut r = smoothed_covariance(frame, &plan);
    r = (&r + r.adjoint()) * Complex64::new(0.5, 0.0);
    let trace: f64 = (0..m).map(|i| r[(i, i)].re).sum();
    if !(trace > 0.0) {
        return Err(AoaError::Degenerate("zero-power frame".into()));
    }
    let eig = r.symmetric_eigen();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    // For each signal eigenvector e and delay tau:
    //   F[i][tau] = sum_j conj(e[i, j]) exp(-j 2 pi df j tau)
    // so that e^H a(theta, tau) = sum_i s_i(theta) F[i][tau].
    let taus = cfg.tau_grid();
    let folded: Vec<DMatrix<Complex64>> = order[..cfg.sources]
        .iter()
        .map(|&k| {
            let e = eig.eigenvectors.column(k);
            DMatrix::from_fn(na, taus.len(), |i, t| {
                (0..ns)
                    .map(|j| {
                        e[i * ns + j].conj()
                            * Complex64::from_polar(
                                1.0,
                                -2.0 * PI * SUBCARRIER_SPACING_HZ * j as f64 * taus[t],
                            )
                    })
                    .sum()
            })
        })
        .collect();

    let norm = m as f64;
    let floor = 1e-12 * norm;
    let mut values = DMatrix::zeros(cfg.theta_grid.len(), taus.len());
    for (ti, steer) in plan.steer.iter().enumerate() {
        let Some(s) = steer else { continue };
        for t in 0..taus.len() {
            let captured: f64 = folded
                .iter()
                .map(|f| {
                    (0..na)
                        .map(|i| s[i] * f[(i, t)])
                        .sum::<Complex64>()
                        .norm_sqr()
                })
                .sum();
            values[(ti, t)] = 1.0 / (norm - captured).max(floor);
        }
    }
    let mut p = Profile2D::new(values, cfg.theta_grid.clone(), cfg.dist_grid.clone())?;
    p.normalize();
    Ok(p)
}

/// Up to `cfg.sources` local maxima of the joint pseudospectrum, strongest
/// first.
pub fn spotfi_estimate(
    frame: &CsiFrame,
    geom: &ArrayGeometry,
    cfg: &AoaConfig,
) -> Result<Vec<PathEstimate>> {
    let p = spotfi_profile(frame, geom, cfg)?;
    let mut peaks = local_maxima(&p.values);
    peaks.sort_by(|a, b| p.values[*b].total_cmp(&p.values[*a]).then(a.cmp(b)));
    Ok(peaks
        .into_iter()
        .take(cfg.sources)
        .map(|(i, j)| PathEstimate {
            theta: p.theta_grid[i],
            tau_s: p.dist_grid[j] / SPEED_OF_LIGHT,
            power: p.values[(i, j)],
        })
        .collect())
}

/// Cells at least as large as their 8 neighbours and strictly larger than
/// the ones before them in row-major order (one cell per plateau).
pub(crate) fn local_maxima(v: &DMatrix<f64>) -> Vec<(usize, usize)> {
    let (nr, nc) = v.shape();
    let mut out = Vec::new();
    for i in 0..nr {
        for j in 0..nc {
            let x = v[(i, j)];
            if x <= 0.0 {
                continue;
            }
            let mut is_max = true;
            'nb: for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let (a, b) = (i as i64 + di, j as i64 + dj);
                    if a < 0 || b < 0 || a >= nr as i64 || b >= nc as i64 {
                        continue;
                    }
                    let y = v[(a as usize, b as usize)];
                    let earlier = (a, b) < (i as i64, j as i64);
                    if y > x || (earlier && y == x) {
                        is_max = false;
                        break 'nb;
                    }
                }
            }
            if is_max {
                out.push((i, j));
            }
        }
    }
    out
}
