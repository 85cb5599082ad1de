//! Estimator family: LS/MVU, optimally scaled LS, closed-form MMSE
//! shrinkage, generic LMMSE, the silent-protocol baseline estimators, the
//! multi-user LS, and the CRLB reference.
//!
//! All estimates are stored on the stacked-channel scale, i.e. column 0 is
//! the direct channel and column k >= 1 estimates `sqrt(alpha) h_k`; metrics
//! remove the known reflection factor before comparing against the cascaded
//! channels themselves.

use ndarray::Array2;
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fading::BetaMoments;
use crate::linalg;
use crate::pilots::PilotMatrix;
use crate::scalar::Real;
use crate::sysmodel::SilentRx;
use crate::{CMat, CVec};

/// Which estimator produced a [`ChannelEstimate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Ls,
    ScaledLs,
    Mmse,
    Lmmse,
    SilentLs,
    SilentLmmse,
}

impl EstimatorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EstimatorKind::Ls => "ls",
            EstimatorKind::ScaledLs => "scaled_ls",
            EstimatorKind::Mmse => "mmse",
            EstimatorKind::Lmmse => "lmmse",
            EstimatorKind::SilentLs => "silent_ls",
            EstimatorKind::SilentLmmse => "silent_lmmse",
        }
    }

    /// Whether this estimator runs on the silent-baseline received signal.
    pub fn is_silent(&self) -> bool {
        matches!(self, EstimatorKind::SilentLs | EstimatorKind::SilentLmmse)
    }
}

impl std::fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ls" => Ok(EstimatorKind::Ls),
            "scaled_ls" => Ok(EstimatorKind::ScaledLs),
            "mmse" => Ok(EstimatorKind::Mmse),
            "lmmse" => Ok(EstimatorKind::Lmmse),
            "silent_ls" => Ok(EstimatorKind::SilentLs),
            "silent_lmmse" => Ok(EstimatorKind::SilentLmmse),
            other => Err(Error::Config(format!("unknown estimator '{other}'"))),
        }
    }
}

/// Estimated stacked channel matrix plus estimator-specific scalars.
#[derive(Debug, Clone)]
pub struct ChannelEstimate<T: Real> {
    /// M x (K+1) estimate of `[h_0, sqrt(alpha) h_1, ...]`.
    pub stacked_est: CMat<T>,
    pub estimator: EstimatorKind,
    /// Scale factor of the scaled-LS estimator, when applicable.
    pub gamma0: Option<T>,
    /// Per-column shrinkage factors of the MMSE estimator, when applicable.
    pub gammas: Option<Vec<T>>,
}

impl<T: Real> ChannelEstimate<T> {
    pub fn num_antennas(&self) -> usize {
        self.stacked_est.nrows()
    }

    pub fn num_tags(&self) -> usize {
        self.stacked_est.ncols() - 1
    }
}

/// Lower bound on the error variance of any unbiased estimator: white with
/// per-element variance `sigma^2 / (p tau)`.
#[derive(Debug, Clone)]
pub struct CrlbReport<T: Real> {
    pub per_element_variance: T,
    pub covariance_diag: Vec<T>,
}

/// Least-squares (equivalently minimum-variance unbiased) estimate:
/// `Hbar_hat = Y' Xbar^H (Xbar Xbar^H)^-1` with `Xbar = sqrt(p) X`.
/// For valid designs the Gram matrix is `p tau I`, but the pseudo-inverse is
/// computed generally so any full-row-rank pilot works.
pub fn ls_estimate<T: Real>(
    projected: &CMat<T>,
    pilots: &PilotMatrix<T>,
    p: T,
) -> Result<ChannelEstimate<T>> {
    if projected.ncols() != pilots.tau() {
        return Err(Error::Dimension(format!(
            "projected columns {} != pilot length {}",
            projected.ncols(),
            pilots.tau()
        )));
    }
    if p <= T::zero() {
        return Err(Error::Config("power must be positive".into()));
    }
    let xh = linalg::hermitian(pilots.matrix());
    let scale = Complex::new(p, T::zero());
    // Gram = Xbar Xbar^H = p X X^H
    let mut gram = linalg::matmul(pilots.matrix(), &xh);
    gram.mapv_inplace(|z| z * scale);
    // B = Y' Xbar^H = sqrt(p) Y' X^H
    let sqrt_p = Complex::new(p.sqrt(), T::zero());
    let mut b = linalg::matmul(projected, &xh);
    b.mapv_inplace(|z| z * sqrt_p);
    // H = B G^-1, via G X = B^H (G is Hermitian)
    let solved = linalg::solve(&gram, &linalg::hermitian(&b))
        .map_err(|_| Error::Singular("pilot matrix is rank deficient".into()))?;
    Ok(ChannelEstimate {
        stacked_est: linalg::hermitian(&solved),
        estimator: EstimatorKind::Ls,
        gamma0: None,
        gammas: None,
    })
}

/// Optimal scaling of the LS estimate. The scale
/// `gamma_0 = Tr{R} / (sigma^2 M Tr{(Xbar Xbar^H)^-1} + Tr{R})`
/// uses the consistent sample estimate `Tr{R} = Tr{H_LS^H H_LS}` computed
/// from this trial's LS output.
pub fn scaled_ls_estimate<T: Real>(
    ls: &ChannelEstimate<T>,
    pilots: &PilotMatrix<T>,
    p: T,
    sigma2: T,
) -> Result<ChannelEstimate<T>> {
    let m = ls.num_antennas();
    let xh = linalg::hermitian(pilots.matrix());
    let scale = Complex::new(p, T::zero());
    let mut gram = linalg::matmul(pilots.matrix(), &xh);
    gram.mapv_inplace(|z| z * scale);
    let gram_inv = linalg::inverse(&gram)
        .map_err(|_| Error::Singular("pilot matrix is rank deficient".into()))?;
    let tr_inv = (0..gram_inv.nrows()).map(|i| gram_inv[(i, i)].re).fold(T::zero(), |s, v| s + v);
    let tr_r = ls.stacked_est.iter().map(|z| z.norm_sqr()).fold(T::zero(), |s, v| s + v);
    let gamma0 = tr_r / (sigma2 * T::of_usize(m) * tr_inv + tr_r);
    let g = Complex::new(gamma0, T::zero());
    Ok(ChannelEstimate {
        stacked_est: ls.stacked_est.mapv(|z| z * g),
        estimator: EstimatorKind::ScaledLs,
        gamma0: Some(gamma0),
        gammas: None,
    })
}

/// Per-column second moments on the stacked scale: `beta_0` for the direct
/// column and `alpha beta_k` for the cascaded columns.
fn stacked_betas<T: Real>(betas: &BetaMoments<T>, alpha: T) -> Result<Vec<T>> {
    let mut out = Vec::with_capacity(betas.cascaded.len() + 1);
    out.push(betas.direct);
    for b in &betas.cascaded {
        out.push(alpha * *b);
    }
    if out.iter().any(|b| !(*b > T::zero())) {
        return Err(Error::Config("channel second moments must be positive".into()));
    }
    Ok(out)
}

/// Closed-form MMSE shrinkage of the de-spread block: column j is scaled by
/// `sqrt(p) beta_j / (p beta_j + sigma_p^2)` where `beta_j` is the stacked
/// second moment of that column. Records the per-column MSE factors
/// `gamma_j = p beta_j^2 / (p beta_j + sigma_p^2)`.
pub fn mmse_estimate<T: Real>(
    despread: &CMat<T>,
    betas: &BetaMoments<T>,
    p: T,
    alpha: T,
    sigma_p2: T,
) -> Result<ChannelEstimate<T>> {
    let col_betas = stacked_betas(betas, alpha)?;
    if despread.ncols() != col_betas.len() {
        return Err(Error::Dimension(format!(
            "despread width {} != K+1 = {}",
            despread.ncols(),
            col_betas.len()
        )));
    }
    let mut est = despread.clone();
    let mut gammas = Vec::with_capacity(col_betas.len());
    for (j, beta) in col_betas.iter().enumerate() {
        let coeff = p.sqrt() * *beta / (p * *beta + sigma_p2);
        gammas.push(p * *beta * *beta / (p * *beta + sigma_p2));
        let c = Complex::new(coeff, T::zero());
        for v in est.column_mut(j).iter_mut() {
            *v = *v * c;
        }
    }
    Ok(ChannelEstimate {
        stacked_est: est,
        estimator: EstimatorKind::Mmse,
        gamma0: None,
        gammas: Some(gammas),
    })
}

/// Generic LMMSE column estimate:
/// `h_hat = mu + sqrt(p) C (p C + sigma_p^2 I)^-1 (y - sqrt(p) mu)`.
pub fn lmmse_estimate<T: Real>(
    y: &CVec<T>,
    prior_mean: &CVec<T>,
    prior_cov: &CMat<T>,
    p: T,
    sigma_p2: T,
) -> Result<CVec<T>> {
    let m = y.len();
    if prior_mean.len() != m || prior_cov.nrows() != m || prior_cov.ncols() != m {
        return Err(Error::Dimension("LMMSE prior dimensions must match the data".into()));
    }
    let sqrt_p = Complex::new(p.sqrt(), T::zero());
    let innovation = ndarray::Array1::from_iter(
        y.iter().zip(prior_mean.iter()).map(|(yi, mi)| *yi - sqrt_p * *mi),
    );
    // A = p C + sigma_p^2 I
    let mut a = prior_cov.mapv(|z| z * Complex::new(p, T::zero()));
    for i in 0..m {
        a[(i, i)] = a[(i, i)] + Complex::new(sigma_p2, T::zero());
    }
    let mut rhs = Array2::from_elem((m, 1), Complex::new(T::zero(), T::zero()));
    for i in 0..m {
        rhs[(i, 0)] = innovation[i];
    }
    let solved = linalg::solve(&a, &rhs)
        .map_err(|_| Error::Singular("p C + sigma_p^2 I is singular".into()))?;
    let solved_vec = ndarray::Array1::from_iter((0..m).map(|i| solved[(i, 0)]));
    let gain = linalg::matvec(prior_cov, &solved_vec);
    Ok(ndarray::Array1::from_iter(
        prior_mean.iter().zip(gain.iter()).map(|(mi, gi)| *mi + sqrt_p * *gi),
    ))
}

/// LMMSE applied column-wise to the de-spread block with the default prior
/// (zero mean, `C = beta I` per column on the stacked scale). Numerically
/// identical to [`mmse_estimate`] but exercised through the generic matrix
/// path.
pub fn lmmse_stacked_estimate<T: Real>(
    despread: &CMat<T>,
    betas: &BetaMoments<T>,
    p: T,
    alpha: T,
    sigma_p2: T,
) -> Result<ChannelEstimate<T>> {
    let col_betas = stacked_betas(betas, alpha)?;
    if despread.ncols() != col_betas.len() {
        return Err(Error::Dimension(format!(
            "despread width {} != K+1 = {}",
            despread.ncols(),
            col_betas.len()
        )));
    }
    let m = despread.nrows();
    let zero_mean =
        ndarray::Array1::from_elem(m, Complex::new(T::zero(), T::zero()));
    let mut est = despread.clone();
    for (j, beta) in col_betas.iter().enumerate() {
        let mut cov = Array2::from_elem((m, m), Complex::new(T::zero(), T::zero()));
        for i in 0..m {
            cov[(i, i)] = Complex::new(*beta, T::zero());
        }
        let y = despread.column(j).to_owned();
        let col = lmmse_estimate(&y, &zero_mean, &cov, p, sigma_p2)?;
        for (i, v) in col.iter().enumerate() {
            est[(i, j)] = *v;
        }
    }
    Ok(ChannelEstimate {
        stacked_est: est,
        estimator: EstimatorKind::Lmmse,
        gamma0: None,
        gammas: None,
    })
}

/// Which per-slot estimator the silent baseline uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SilentMethod {
    Ls,
    Lmmse,
}

/// Silent-baseline estimator. Slot 0 yields the direct channel; slot k
/// yields the combined channel `h_0 + sqrt(alpha) h_k`, and subtraction
/// recovers the stacked cascaded column — propagating the slot-0 error into
/// every cascaded estimate. With [`SilentMethod::Lmmse`] each slot average
/// is first shrunk with its own prior variance (`beta_0` for slot 0,
/// `beta_0 + alpha beta_k` for the combined channel of slot k).
pub fn silent_estimate<T: Real>(
    rx: &SilentRx<T>,
    p: T,
    betas: &BetaMoments<T>,
    alpha: T,
    method: SilentMethod,
) -> Result<ChannelEstimate<T>> {
    let k = rx.slots.len().checked_sub(1).ok_or_else(|| Error::Config("no slots".into()))?;
    if rx.slots.iter().any(|s| s.ncols() == 0) {
        return Err(Error::Config("empty silent slot".into()));
    }
    if betas.cascaded.len() != k {
        return Err(Error::Dimension(format!(
            "beta count {} != K = {k}",
            betas.cascaded.len()
        )));
    }
    let m = rx.slots[0].nrows();
    let sqrt_p = p.sqrt();
    let mut est = Array2::from_elem((m, k + 1), Complex::new(T::zero(), T::zero()));

    // per-slot column averages and LMMSE shrink factors
    let mut slot_est = Vec::with_capacity(k + 1);
    for (i, slot) in rx.slots.iter().enumerate() {
        let t_i = T::of_usize(slot.ncols());
        let slot_noise = rx.noise_var / t_i;
        let coeff = match method {
            SilentMethod::Ls => T::one() / sqrt_p,
            SilentMethod::Lmmse => {
                let beta = if i == 0 {
                    betas.direct
                } else {
                    betas.direct + alpha * betas.cascaded[i - 1]
                };
                sqrt_p * beta / (p * beta + slot_noise)
            }
        };
        let c = Complex::new(coeff, T::zero());
        let inv_cols = Complex::new(T::one() / t_i, T::zero());
        let col = ndarray::Array1::from_iter((0..m).map(|row| {
            let mut acc = Complex::new(T::zero(), T::zero());
            for j in 0..slot.ncols() {
                acc = acc + slot[(row, j)];
            }
            acc * inv_cols * c
        }));
        slot_est.push(col);
    }

    for row in 0..m {
        est[(row, 0)] = slot_est[0][row];
        for i in 1..=k {
            // stacked-scale cascaded estimate: combined minus direct
            est[(row, i)] = slot_est[i][row] - slot_est[0][row];
        }
    }
    Ok(ChannelEstimate {
        stacked_est: est,
        estimator: match method {
            SilentMethod::Ls => EstimatorKind::SilentLs,
            SilentMethod::Lmmse => EstimatorKind::SilentLmmse,
        },
        gamma0: None,
        gammas: None,
    })
}

/// CRLB of the time-spread protocol: white per-element variance
/// `sigma^2 / (p tau)`, independent of M and K.
pub fn crlb_reference<T: Real>(
    p: T,
    tau: usize,
    sigma2: T,
    m: usize,
    k: usize,
) -> Result<CrlbReport<T>> {
    if tau < k + 1 {
        return Err(Error::Infeasible(format!("tau = {tau} < K+1 = {}", k + 1)));
    }
    if p <= T::zero() {
        return Err(Error::Config("power must be positive".into()));
    }
    let v = sigma2 / (p * T::of_usize(tau));
    Ok(CrlbReport { per_element_variance: v, covariance_diag: vec![v; m * (k + 1)] })
}

/// Multi-user LS: `Hbar_hat_n = Ytilde_n X^H / (sqrt(tau' p) Q)`, with
/// per-element error variance `sigma^2 / (p tau' Q)`.
pub fn multiuser_ls_estimate<T: Real>(
    stacked_rx: &CMat<T>,
    tag_pilots: &PilotMatrix<T>,
    p: T,
    sub_len: usize,
) -> Result<ChannelEstimate<T>> {
    let q = tag_pilots.tau();
    if stacked_rx.ncols() != q {
        return Err(Error::Dimension(format!(
            "stacked RX width {} != Q = {q}",
            stacked_rx.ncols()
        )));
    }
    let xh = linalg::hermitian(tag_pilots.matrix());
    let mut est = linalg::matmul(stacked_rx, &xh);
    let denom = Complex::new((T::of_usize(sub_len) * p).sqrt() * T::of_usize(q), T::zero());
    est.mapv_inplace(|z| z / denom);
    Ok(ChannelEstimate {
        stacked_est: est,
        estimator: EstimatorKind::Ls,
        gamma0: None,
        gammas: None,
    })
}
