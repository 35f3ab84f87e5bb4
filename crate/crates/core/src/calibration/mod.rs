//! Wireless phase calibration from a robot trajectory.
//!
//! Each frame is divided by the CSI the array should have measured for the
//! known transmitter bearing, leaving (mostly) the hardware phase offset.
//! The strongest principal component of those residuals is the coarse
//! estimate; Levenberg-Marquardt then finds the unit-modulus vector closest
//! to that component, i.e. the one with the least energy outside it.
//!
//! The stored calibration is the correction `C` with `C . W ~ W_hat`, with
//! antenna 0 pinned to zero phase. Calibrations are only defined up to a
//! per-subcarrier phase common to every antenna, which no bearing estimator
//! can observe.

pub mod file;
pub mod lm;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

use crate::csi::{
    expected_csi, wrap_angle, ArrayGeometry, CalibrationMatrix, ChannelSpec, CsiError, CsiFrame,
    Pose2D,
};
use lm::{minimize, DampedLeastSquares, LmSettings};

pub const DEFAULT_MIN_PAIRS: usize = 50;
pub const DEFAULT_MIN_SPECTRAL_GAP: f64 = 3.0;

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("too few pose/frame pairs: {got} < {min}")]
    TooFewPairs { got: usize, min: usize },
    #[error("inconsistent dataset: {0}")]
    Inconsistent(String),
    #[error("degenerate data: {0}")]
    Degenerate(String),
    #[error(
        "low confidence: spectral gap {gap:.3} below {threshold} (line of sight not dominant?)"
    )]
    LowConfidence { gap: f64, threshold: f64 },
    #[error("calibration file: {0}")]
    File(String),
    #[error(transparent)]
    Csi(#[from] CsiError),
}

pub type Result<T> = std::result::Result<T, CalibrationError>;

#[derive(Debug, Clone)]
pub struct CalibrationDataset {
    pub pairs: Vec<(Pose2D, CsiFrame)>,
    pub tx_location: [f64; 2],
    pub geom: ArrayGeometry,
    pub chanspec: ChannelSpec,
}

#[derive(Debug, Clone)]
pub struct CalibrationOptions {
    pub min_pairs: usize,
    pub min_spectral_gap: f64,
    pub lm: LmSettings,
    pub tx_index: usize,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            min_pairs: DEFAULT_MIN_PAIRS,
            min_spectral_gap: DEFAULT_MIN_SPECTRAL_GAP,
            lm: LmSettings::default(),
            tx_index: 0,
        }
    }
}

/// `W . conj(W_hat)` for one transmit slice.
pub fn suppress_bearing(
    w: &DMatrix<Complex64>,
    pose: &Pose2D,
    tx: [f64; 2],
    geom: &ArrayGeometry,
    chanspec: &ChannelSpec,
) -> Result<DMatrix<Complex64>> {
    if w.nrows() != geom.len() || w.ncols() != chanspec.n_sub() {
        return Err(CalibrationError::Inconsistent(format!(
            "slice {}x{} does not match array ({}) and chanspec {chanspec}",
            w.nrows(),
            w.ncols(),
            geom.len()
        )));
    }
    let w_hat = expected_csi(pose, tx, geom, chanspec)?;
    Ok(w.zip_map(&w_hat, |a, b| a * b.conj()))
}

/// Removes the packet's arbitrary common phase by rotating the reference
/// element (antenna 0, middle subcarrier) onto the real axis.
pub fn normalize_common_phase(w: &mut DMatrix<Complex64>) {
    let r = w[(0, w.ncols() / 2)];
    if r.norm() > 0.0 {
        let rot = (r / r.norm()).conj();
        *w *= rot;
    }
}

/// Removes the best-fit phase slope shared by all antennas across
/// subcarrier `indices`, pivoting on the middle subcarrier.
pub fn remove_linear_phase(w: &mut DMatrix<Complex64>, indices: &[i32]) {
    let slope = common_phase_slope(w, indices);
    let pivot = indices[indices.len() / 2];
    for (j, &k) in indices.iter().enumerate() {
        let rot = Complex64::from_polar(1.0, -slope * f64::from(k - pivot));
        for i in 0..w.nrows() {
            w[(i, j)] *= rot;
        }
    }
}

/// Phase advance per subcarrier index, from adjacent-subcarrier products.
pub fn common_phase_slope(w: &DMatrix<Complex64>, indices: &[i32]) -> f64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..indices.len().saturating_sub(1) {
        if indices[j + 1] - indices[j] == 1 {
            for i in 0..w.nrows() {
                acc += w[(i, j + 1)] * w[(i, j)].conj();
            }
        }
    }
    acc.arg()
}

/// Row-major flatten of an `n_rx x n_sub` matrix.
fn flatten(w: &DMatrix<Complex64>) -> DVector<Complex64> {
    DVector::from_iterator(
        w.len(),
        (0..w.nrows()).flat_map(|i| (0..w.ncols()).map(move |j| w[(i, j)])),
    )
}

fn reshape_real(v: &[f64], n_rx: usize, n_sub: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(n_rx, n_sub, v)
}

fn flatten_real(m: &DMatrix<f64>) -> Vec<f64> {
    (0..m.nrows())
        .flat_map(|i| (0..m.ncols()).map(move |j| m[(i, j)]))
        .collect()
}

#[derive(Debug, Clone)]
pub struct CoarseResult {
    pub phi_coarse: DMatrix<f64>,
    /// Full `N x N` unitary left-singular basis, strongest component first.
    pub basis: DMatrix<Complex64>,
    /// Descending.
    pub singular_values: Vec<f64>,
}

impl CoarseResult {
    pub fn principal(&self) -> DVector<Complex64> {
        self.basis.column(0).into_owned()
    }

    /// `sigma_1 / sigma_2`; infinite for a single non-zero component.
    pub fn spectral_gap(&self) -> f64 {
        match self.singular_values.as_slice() {
            [s1, s2, ..] if *s2 > 0.0 => s1 / s2,
            [s1, ..] if *s1 > 0.0 => f64::INFINITY,
            _ => 0.0,
        }
    }

    fn shape(&self) -> (usize, usize) {
        (self.phi_coarse.nrows(), self.phi_coarse.ncols())
    }
}

/// Extends an orthonormal `N x r` set to a full unitary `N x N` basis.
fn complete_basis(u: DMatrix<Complex64>) -> DMatrix<Complex64> {
    let (n, r) = u.shape();
    if r >= n {
        return u;
    }
    let qr = u.clone().qr();
    let mut qh = DMatrix::<Complex64>::identity(n, n);
    qr.q_tr_mul(&mut qh);
    let q = qh.adjoint();
    let mut full = DMatrix::zeros(n, n);
    full.columns_mut(0, r).copy_from(&u);
    full.columns_mut(r, n - r).copy_from(&q.columns(r, n - r));
    full
}

/// PCA of the stacked suppressed snapshots.
pub fn coarse_calibration(sups: &[DMatrix<Complex64>]) -> Result<CoarseResult> {
    if sups.len() < 2 {
        return Err(CalibrationError::TooFewPairs {
            got: sups.len(),
            min: 2,
        });
    }
    let (n_rx, n_sub) = sups[0].shape();
    if sups.iter().any(|s| s.shape() != (n_rx, n_sub)) {
        return Err(CalibrationError::Inconsistent(
            "snapshots differ in shape".into(),
        ));
    }
    let n = n_rx * n_sub;
    let mut stacked = DMatrix::<Complex64>::zeros(n, sups.len());
    for (t, s) in sups.iter().enumerate() {
        stacked.set_column(t, &flatten(s));
    }
    if stacked.iter().all(|z| z.norm() == 0.0) {
        return Err(CalibrationError::Degenerate(
            "all snapshots are zero".into(),
        ));
    }
    if stacked
        .iter()
        .any(|z| !z.re.is_finite() || !z.im.is_finite())
    {
        return Err(CalibrationError::Degenerate("non-finite snapshot".into()));
    }
    let svd = stacked.svd(true, false);
    let singular_values: Vec<f64> = svd.singular_values.iter().copied().collect();
    let u = svd
        .u
        .ok_or_else(|| CalibrationError::Degenerate("SVD did not produce U".into()))?;
    let basis = complete_basis(u);
    let phases: Vec<f64> = basis.column(0).iter().map(|z| z.arg()).collect();
    Ok(CoarseResult {
        phi_coarse: reshape_real(&phases, n_rx, n_sub),
        basis,
        singular_values,
    })
}

/// `||P x||^2` with `P = I - u u^H`, `x = exp(j phi)`; the energy of `x`
/// outside the principal component.
pub struct PhaseProjection {
    principal: Vec<Complex64>,
}

impl PhaseProjection {
    pub fn new(principal: &DVector<Complex64>) -> Self {
        Self {
            principal: principal.iter().copied().collect(),
        }
    }

    fn unit(params: &[f64]) -> Vec<Complex64> {
        params
            .iter()
            .map(|&p| Complex64::from_polar(1.0, p))
            .collect()
    }

    fn coefficient(&self, x: &[Complex64]) -> Complex64 {
        self.principal
            .iter()
            .zip(x)
            .map(|(u, x)| u.conj() * x)
            .sum()
    }

    fn residual(&self, x: &[Complex64]) -> Vec<Complex64> {
        let c = self.coefficient(x);
        x.iter()
            .zip(&self.principal)
            .map(|(x, u)| x - u * c)
            .collect()
    }

    /// `|u^H x|^2`, the quantity the fit maximizes.
    pub fn captured_energy(&self, params: &[f64]) -> f64 {
        self.coefficient(&Self::unit(params)).norm_sqr()
    }
}

impl DampedLeastSquares for PhaseProjection {
    fn objective(&self, params: &[f64]) -> f64 {
        self.residual(&Self::unit(params))
            .iter()
            .map(|r| r.norm_sqr())
            .sum()
    }

    fn gradient(&self, params: &[f64]) -> Vec<f64> {
        let x = Self::unit(params);
        let r = self.residual(&x);
        x.iter().zip(&r).map(|(x, r)| (x.conj() * r).im).collect()
    }

    fn damped_step(&self, params: &[f64], lambda: f64, gradient: &[f64]) -> Vec<f64> {
        // J^T J = I - a a^T - b b^T with a + jb = -j conj(x) . u, so the
        // damped system is a rank-2 update of a scaled identity.
        let x = Self::unit(params);
        let v: Vec<Complex64> = x
            .iter()
            .zip(&self.principal)
            .map(|(x, u)| -Complex64::i() * x.conj() * u)
            .collect();
        let s = 1.0 + lambda;
        let (mut aa, mut ab, mut bb, mut ag, mut bg) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (v, g) in v.iter().zip(gradient) {
            aa += v.re * v.re;
            ab += v.re * v.im;
            bb += v.im * v.im;
            ag += v.re * g;
            bg += v.im * g;
        }
        // K = s I - A^T A, solve K y = A^T g
        let (k11, k12, k22) = (s - aa, -ab, s - bb);
        let det = k11 * k22 - k12 * k12;
        let y1 = (k22 * ag - k12 * bg) / det;
        let y2 = (k11 * bg - k12 * ag) / det;
        v.iter()
            .zip(gradient)
            .map(|(v, g)| -(g + v.re * y1 + v.im * y2) / s)
            .collect()
    }
}

/// `||U_[1:]^H flatten(exp(j phi))||^2` evaluated with the explicit basis.
pub fn projection_objective(basis: &DMatrix<Complex64>, phi: &DMatrix<f64>) -> f64 {
    let x = DVector::from_iterator(
        phi.len(),
        flatten_real(phi)
            .into_iter()
            .map(|p| Complex64::from_polar(1.0, p)),
    );
    let rest = basis.columns(1, basis.ncols() - 1);
    (rest.adjoint() * x).norm_squared()
}

#[derive(Debug, Clone)]
pub struct FineTuneResult {
    pub phi: DMatrix<f64>,
    pub objective_initial: f64,
    pub objective_final: f64,
    pub iterations: usize,
    /// False when the iteration budget ran out; `phi` is then the best iterate.
    pub converged: bool,
}

pub fn fine_tune(coarse: &CoarseResult) -> FineTuneResult {
    fine_tune_with(coarse, &LmSettings::default())
}

pub fn fine_tune_with(coarse: &CoarseResult, settings: &LmSettings) -> FineTuneResult {
    let (n_rx, n_sub) = coarse.shape();
    let problem = PhaseProjection::new(&coarse.principal());
    let init = flatten_real(&coarse.phi_coarse);

    #[cfg(debug_assertions)]
    {
        let n = init.len() as f64;
        let split = projection_objective(&coarse.basis, &coarse.phi_coarse)
            + problem.captured_energy(&init);
        debug_assert!(
            (split - n).abs() <= 1e-6 * n,
            "basis is not unitary: {split} vs {n}"
        );
    }

    let out = minimize(&problem, &init, settings);
    FineTuneResult {
        phi: reshape_real(
            &out.params
                .iter()
                .map(|&p| wrap_angle(p))
                .collect::<Vec<_>>(),
            n_rx,
            n_sub,
        ),
        objective_initial: out.initial_objective,
        objective_final: out.objective,
        iterations: out.iterations,
        converged: out.converged,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationReport {
    pub pairs_used: usize,
    pub spectral_gap: f64,
    pub singular_values: Vec<f64>,
    pub objective_coarse: f64,
    pub objective_fine: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// The preprocessed snapshots fed to the PCA, one per pair.
pub fn suppressed_snapshots(
    dataset: &CalibrationDataset,
    tx_index: usize,
) -> Result<Vec<DMatrix<Complex64>>> {
    let indices = dataset.chanspec.subcarrier_indices();
    dataset
        .pairs
        .iter()
        .map(|(pose, frame)| {
            if tx_index >= frame.n_tx() {
                return Err(CalibrationError::Inconsistent(format!(
                    "frame has {} tx antennas, calibrating on index {tx_index}",
                    frame.n_tx()
                )));
            }
            let mut w = frame.tx_slice(tx_index);
            normalize_common_phase(&mut w);
            let mut sup = suppress_bearing(
                &w,
                pose,
                dataset.tx_location,
                &dataset.geom,
                &dataset.chanspec,
            )?;
            remove_linear_phase(&mut sup, &indices);
            Ok(sup)
        })
        .collect()
}

pub fn calibrate(dataset: &CalibrationDataset) -> Result<CalibrationMatrix> {
    calibrate_with_report(dataset, &CalibrationOptions::default()).map(|(c, _)| c)
}

pub fn calibrate_with_report(
    dataset: &CalibrationDataset,
    opts: &CalibrationOptions,
) -> Result<(CalibrationMatrix, CalibrationReport)> {
    let got = dataset.pairs.len();
    let min = opts.min_pairs.max(2);
    if got < min {
        return Err(CalibrationError::TooFewPairs { got, min });
    }
    for (_, f) in &dataset.pairs {
        if f.chanspec() != dataset.chanspec {
            return Err(CalibrationError::Inconsistent(format!(
                "frame on {} in a {} dataset",
                f.chanspec(),
                dataset.chanspec
            )));
        }
        if f.n_rx() != dataset.geom.len() {
            return Err(CalibrationError::Inconsistent(format!(
                "frame has {} rx antennas, array has {}",
                f.n_rx(),
                dataset.geom.len()
            )));
        }
    }

    let sups = suppressed_snapshots(dataset, opts.tx_index)?;
    let coarse = coarse_calibration(&sups)?;
    let gap = coarse.spectral_gap();
    if !(gap >= opts.min_spectral_gap) {
        return Err(CalibrationError::LowConfidence {
            gap,
            threshold: opts.min_spectral_gap,
        });
    }
    let fine = fine_tune_with(&coarse, &opts.lm);

    // The fit recovers the hardware offset; the correction is its conjugate.
    let cal = CalibrationMatrix::new(-&fine.phi, dataset.chanspec)?.relative_to_reference();
    let report = CalibrationReport {
        pairs_used: got,
        spectral_gap: gap,
        singular_values: coarse.singular_values.iter().take(8).copied().collect(),
        objective_coarse: fine.objective_initial,
        objective_fine: fine.objective_final,
        iterations: fine.iterations,
        converged: fine.converged,
    };
    Ok((cal, report))
}
