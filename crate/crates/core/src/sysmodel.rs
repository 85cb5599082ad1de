//! Received-signal synthesis for the three training protocols: the
//! time-spread scheme (all tags reflect orthogonal sequences at once), the
//! silent baseline (tags take turns), and the multi-user extension, plus the
//! two post-processing projections (source de-rotation and tag de-spreading).

use ndarray::{Array1, Array2};
use num_complex::Complex;
use rand::Rng;

use crate::error::{Error, Result};
use crate::fading::ChannelSet;
use crate::pilots::{validate_pilot, PilotMatrix, DEFAULT_TOLERANCE};
use crate::scalar::Real;
use crate::{CMat, CVec};

/// Pilot sequence of the RF source: unit-modulus symbols and transmit power.
#[derive(Debug, Clone)]
pub struct SourcePilot<T: Real> {
    symbols: CVec<T>,
    power: T,
}

impl<T: Real> SourcePilot<T> {
    /// Arbitrary unit-modulus sequence.
    pub fn new(symbols: CVec<T>, power: T) -> Result<Self> {
        if power <= T::zero() {
            return Err(Error::Config("source power must be positive".into()));
        }
        if symbols.is_empty() {
            return Err(Error::Config("source pilot must be non-empty".into()));
        }
        let tol = T::of(1e-12);
        for (i, s) in symbols.iter().enumerate() {
            if (s.norm() - T::one()).abs() > tol {
                return Err(Error::Config(format!(
                    "source pilot symbol {i} is not unit modulus: |s| = {}",
                    s.norm()
                )));
            }
        }
        Ok(Self { symbols, power })
    }

    /// Constant all-ones sequence (the default: the de-rotation step makes
    /// results invariant to the unit-modulus choice).
    pub fn ones(tau: usize, power: T) -> Result<Self> {
        let one = Complex::new(T::one(), T::zero());
        Self::new(Array1::from_elem(tau, one), power)
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn power(&self) -> T {
        self.power
    }

    pub fn symbols(&self) -> &CVec<T> {
        &self.symbols
    }
}

/// Received pilot block of the time-spread protocol together with both
/// post-processing stages.
#[derive(Debug, Clone)]
pub struct RxBlock<T: Real> {
    /// Raw block Y (M x tau).
    pub raw: CMat<T>,
    /// Source-de-rotated block Y' = Y S^H (M x tau).
    pub source_projected: CMat<T>,
    /// De-spread block Y_p = Y' X^H / tau (M x (K+1)).
    pub despread: CMat<T>,
    /// Noise variance per raw element.
    pub noise_var: T,
    /// Noise variance per de-spread element, sigma^2 / tau.
    pub despread_noise_var: T,
}

/// Received slots of the silent baseline. Slot 0 (direct-channel slot)
/// absorbs the `tau mod (K+1)` leftover symbols, so it may be wider than
/// `slot_len`.
#[derive(Debug, Clone)]
pub struct SilentRx<T: Real> {
    /// K+1 blocks; slot 0 is M x (t + remainder), slots 1..=K are M x t.
    pub slots: Vec<CMat<T>>,
    /// Base slot length t = floor(tau / (K+1)).
    pub slot_len: usize,
    /// Noise variance per element.
    pub noise_var: T,
}

/// Received blocks of the multi-user extension.
#[derive(Debug, Clone)]
pub struct MultiUserRx<T: Real> {
    /// Q raw blocks Y_i (M x tau').
    pub per_slot: Vec<CMat<T>>,
    /// Per-user stacks after projection onto s_n^H: N matrices (M x Q).
    pub projected: Vec<CMat<T>>,
    pub num_users: usize,
    /// Sub-slot length tau'.
    pub sub_len: usize,
    /// Noise variance per element (preserved by the orthonormal projection).
    pub noise_var: T,
}

/// One circular complex Gaussian sample with total variance `sigma2`
/// (real and imaginary parts each carry `sigma2 / 2`).
pub fn complex_noise<T: Real, R: Rng + ?Sized>(sigma2: T, rng: &mut R) -> Complex<T> {
    if sigma2 <= T::zero() {
        return Complex::new(T::zero(), T::zero());
    }
    let s = (sigma2 / T::of(2.0)).sqrt();
    Complex::new(s * T::normal_sample(rng), s * T::normal_sample(rng))
}

fn noise_matrix<T: Real, R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    sigma2: T,
    rng: &mut R,
) -> CMat<T> {
    let mut n = Array2::from_elem((rows, cols), Complex::new(T::zero(), T::zero()));
    if sigma2 > T::zero() {
        for v in n.iter_mut() {
            *v = complex_noise(sigma2, rng);
        }
    }
    n
}

/// Synthesize one time-spread training block:
/// `Y = sqrt(p) Hbar X diag(s) + N`, then fill in the de-rotated and
/// de-spread stages.
pub fn synth_timespread_rx<T: Real, R: Rng + ?Sized>(
    channels: &ChannelSet<T>,
    pilots: &PilotMatrix<T>,
    source: &SourcePilot<T>,
    sigma2: T,
    rng: &mut R,
) -> Result<RxBlock<T>> {
    let tau = pilots.tau();
    if source.len() != tau {
        return Err(Error::Dimension(format!(
            "source pilot length {} != pilot columns {tau}",
            source.len()
        )));
    }
    if channels.stacked.ncols() != pilots.rows() {
        return Err(Error::Dimension(format!(
            "stacked channel width {} != pilot rows {}",
            channels.stacked.ncols(),
            pilots.rows()
        )));
    }
    let m = channels.num_antennas();
    let sqrt_p = Complex::new(source.power().sqrt(), T::zero());

    // sqrt(p) Hbar X, then rotate column j by s_j and add noise.
    let mut raw = crate::linalg::matmul(&channels.stacked, pilots.matrix());
    for mut col in raw.columns_mut().into_iter() {
        for v in col.iter_mut() {
            *v = *v * sqrt_p;
        }
    }
    for (j, s) in source.symbols().iter().enumerate() {
        for i in 0..m {
            raw[(i, j)] = raw[(i, j)] * *s;
        }
    }
    if sigma2 > T::zero() {
        let n = noise_matrix(m, tau, sigma2, rng);
        raw = &raw + &n;
    }

    let source_projected = project_source(&raw, source)?;
    let despread = despread(&source_projected, pilots)?;
    Ok(RxBlock {
        raw,
        source_projected,
        despread,
        noise_var: sigma2,
        despread_noise_var: sigma2 / T::of_usize(tau),
    })
}

/// De-rotate the source pilot: `Y' = Y S^H` with `S = diag(s)`. Unit-modulus
/// symbols make this a unitary rotation, so noise statistics are unchanged.
pub fn project_source<T: Real>(raw: &CMat<T>, source: &SourcePilot<T>) -> Result<CMat<T>> {
    if raw.ncols() != source.len() {
        return Err(Error::Dimension(format!(
            "raw columns {} != source pilot length {}",
            raw.ncols(),
            source.len()
        )));
    }
    let mut out = raw.clone();
    for (j, s) in source.symbols().iter().enumerate() {
        let c = s.conj();
        for v in out.column_mut(j).iter_mut() {
            *v = *v * c;
        }
    }
    Ok(out)
}

/// De-spread the tag pilots: `Y_p = Y' X^H / tau`. Requires a pilot matrix
/// that passes validation; a contaminated design would leak cascaded energy
/// into the direct-channel column.
pub fn despread<T: Real>(projected: &CMat<T>, pilots: &PilotMatrix<T>) -> Result<CMat<T>> {
    let report = validate_pilot(pilots, T::of(DEFAULT_TOLERANCE));
    if !report.passed {
        return Err(Error::InvalidPilot(format!(
            "pilot fails orthogonality (source defect {:e}, mutual defect {:e})",
            report.source_orthogonality_defect, report.mutual_orthogonality_defect
        )));
    }
    if projected.ncols() != pilots.tau() {
        return Err(Error::Dimension(format!(
            "projected columns {} != pilot length {}",
            projected.ncols(),
            pilots.tau()
        )));
    }
    let xh = crate::linalg::hermitian(pilots.matrix());
    let mut out = crate::linalg::matmul(projected, &xh);
    let inv_tau = Complex::new(T::one() / T::of_usize(pilots.tau()), T::zero());
    for v in out.iter_mut() {
        *v = *v * inv_tau;
    }
    Ok(out)
}

/// Synthesize the silent baseline: tag i reflects alone (symbol 1) during
/// slot i while the others stay quiet. Slot 0 carries only the direct
/// channel plus the leftover `tau mod (K+1)` symbols.
pub fn synth_silent_rx<T: Real, R: Rng + ?Sized>(
    channels: &ChannelSet<T>,
    tau: usize,
    p: T,
    sigma2: T,
    rng: &mut R,
) -> Result<SilentRx<T>> {
    let k = channels.num_tags();
    if tau < k + 1 {
        return Err(Error::Infeasible(format!(
            "silent protocol needs tau >= K+1 (tau = {tau}, K = {k})"
        )));
    }
    let m = channels.num_antennas();
    let t = tau / (k + 1);
    let remainder = tau - t * (k + 1);
    let sqrt_p = Complex::new(p.sqrt(), T::zero());
    let sqrt_alpha = Complex::new(channels.alpha.sqrt(), T::zero());

    let mut slots = Vec::with_capacity(k + 1);
    for i in 0..=k {
        let cols = if i == 0 { t + remainder } else { t };
        let mut slot = noise_matrix(m, cols, sigma2, rng);
        for row in 0..m {
            let mut signal = sqrt_p * channels.direct[row];
            if i >= 1 {
                signal = signal + sqrt_p * sqrt_alpha * channels.cascaded[(row, i - 1)];
            }
            for c in 0..cols {
                slot[(row, c)] = slot[(row, c)] + signal;
            }
        }
        slots.push(slot);
    }
    Ok(SilentRx { slots, slot_len: t, noise_var: sigma2 })
}

/// Stack the per-user effective channels `[h_n, alpha^e f_1 g_{n,1}, ...]`.
/// The multi-user model as printed carries `alpha` (e = 1) on the cascaded
/// columns where the single-user model carries `sqrt(alpha)`; the exponent
/// is a knob so either reading can be run.
pub fn multiuser_stacked<T: Real>(channels: &ChannelSet<T>, alpha_exponent: T) -> CMat<T> {
    let m = channels.num_antennas();
    let k = channels.num_tags();
    let scale = Complex::new(channels.alpha.powf(alpha_exponent), T::zero());
    let mut stacked = Array2::from_elem((m, k + 1), Complex::new(T::zero(), T::zero()));
    for row in 0..m {
        stacked[(row, 0)] = channels.direct[row];
        for col in 0..k {
            stacked[(row, col + 1)] = scale * channels.cascaded[(row, col)];
        }
    }
    stacked
}

/// Synthesize the multi-user training phase. Slot i of length tau' carries
/// `Y_i = sqrt(tau' p) sum_n Hbar_n x_i s_n^T + N_i`; projecting onto
/// `s_n^H` separates user n and stacking the Q slots yields
/// `Ytilde_n = sqrt(tau' p) Hbar_n X + Ntilde_n`.
pub fn synth_multiuser_rx<T: Real, R: Rng + ?Sized>(
    per_user_stacked: &[CMat<T>],
    user_pilots: &[CVec<T>],
    tag_pilots: &PilotMatrix<T>,
    p: T,
    sigma2: T,
    rng: &mut R,
) -> Result<MultiUserRx<T>> {
    let n_users = per_user_stacked.len();
    if n_users == 0 || user_pilots.len() != n_users {
        return Err(Error::Config("need one user pilot per user".into()));
    }
    let sub_len = user_pilots[0].len();
    if sub_len < n_users {
        return Err(Error::Infeasible(format!(
            "sub-slot length {sub_len} < number of users {n_users}"
        )));
    }
    let q = tag_pilots.tau();
    let width = tag_pilots.rows();
    if q < width {
        return Err(Error::Infeasible(format!("Q = {q} < K+1 = {width}")));
    }
    let m = per_user_stacked[0].nrows();
    for h in per_user_stacked {
        if h.nrows() != m || h.ncols() != width {
            return Err(Error::Dimension("per-user stacks must share (M, K+1)".into()));
        }
    }
    let tol = T::of(1e-10);
    for (a, sa) in user_pilots.iter().enumerate() {
        if sa.len() != sub_len {
            return Err(Error::Dimension("user pilots must share length tau'".into()));
        }
        for (b, sb) in user_pilots.iter().enumerate() {
            let mut inner = Complex::new(T::zero(), T::zero());
            for (x, y) in sa.iter().zip(sb.iter()) {
                inner = inner + *x * y.conj();
            }
            let target = if a == b { T::one() } else { T::zero() };
            if (inner.norm() - target).abs() > tol {
                return Err(Error::Config(format!(
                    "user pilots {a},{b} are not orthonormal (|<s_a,s_b>| = {})",
                    inner.norm()
                )));
            }
        }
    }

    let amp = Complex::new((T::of_usize(sub_len) * p).sqrt(), T::zero());
    let mut per_slot = Vec::with_capacity(q);
    for i in 0..q {
        let mut slot = noise_matrix(m, sub_len, sigma2, rng);
        for (h, s) in per_user_stacked.iter().zip(user_pilots.iter()) {
            // hx = Hbar_n x_i (column i of the tag pilot matrix)
            let mut hx = vec![Complex::new(T::zero(), T::zero()); m];
            for row in 0..m {
                let mut acc = Complex::new(T::zero(), T::zero());
                for c in 0..width {
                    acc = acc + h[(row, c)] * tag_pilots.matrix()[(c, i)];
                }
                hx[row] = amp * acc;
            }
            for row in 0..m {
                for j in 0..sub_len {
                    slot[(row, j)] = slot[(row, j)] + hx[row] * s[j];
                }
            }
        }
        per_slot.push(slot);
    }

    let mut projected = Vec::with_capacity(n_users);
    for s in user_pilots {
        let mut stack = Array2::from_elem((m, q), Complex::new(T::zero(), T::zero()));
        for (i, slot) in per_slot.iter().enumerate() {
            for row in 0..m {
                let mut acc = Complex::new(T::zero(), T::zero());
                for j in 0..sub_len {
                    acc = acc + slot[(row, j)] * s[j].conj();
                }
                stack[(row, i)] = acc;
            }
        }
        projected.push(stack);
    }

    Ok(MultiUserRx { per_slot, projected, num_users: n_users, sub_len, noise_var: sigma2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fading::{
        gen_channels, ChannelStats, FadingParams, FadingShapes, LinkGeometry, PowerConvention,
    };
    use crate::pilots::{dft_pilot, hadamard_pilot, modified_zc_pilot};
    use ndarray::Array1;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn stats(k: usize) -> ChannelStats<f64> {
        let geometry = LinkGeometry {
            d_direct: 10.0,
            d_forward: vec![6.0; k],
            d_back: vec![6.0; k],
            carrier_hz: 3.0e9,
            bandwidth_hz: 10.0e6,
            noise_figure_db: 20.0,
        };
        ChannelStats::from_geometry(
            &geometry,
            &FadingShapes::uniform(3.0),
            PowerConvention::SpreadScaledByShape,
        )
        .unwrap()
    }

    /// Unit-power channels keep numbers O(1) in structural tests.
    fn unit_stats(k: usize) -> ChannelStats<f64> {
        let p = FadingParams::new(3.0, 1.0, PowerConvention::Conventional).unwrap();
        ChannelStats { direct: p, forward: vec![p; k], backscatter: vec![p; k] }
    }

    fn phase_ramp_source(tau: usize, power: f64) -> SourcePilot<f64> {
        let symbols = Array1::from_iter(
            (0..tau).map(|n| Complex::from_polar(1.0, 0.7 * n as f64)),
        );
        SourcePilot::new(symbols, power).unwrap()
    }

    #[test]
    fn noiseless_despread_recovers_scaled_channels() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        for pilots in [
            hadamard_pilot::<f64>(7),
            modified_zc_pilot::<f64>(7, 11).unwrap(),
            dft_pilot::<f64>(7, 8).unwrap(),
        ] {
            let ch = gen_channels(&unit_stats(7), 0.6, 4, &mut rng).unwrap();
            let p = 2.5;
            let source = phase_ramp_source(pilots.tau(), p);
            let rx = synth_timespread_rx(&ch, &pilots, &source, 0.0, &mut rng).unwrap();
            let sqrt_p = p.sqrt();
            for row in 0..4 {
                for col in 0..8 {
                    let want = ch.stacked[(row, col)] * sqrt_p;
                    let err = (rx.despread[(row, col)] - want).norm();
                    assert!(err < 1e-12, "{:?} ({row},{col}): err {err:e}", pilots.design());
                }
            }
        }
    }

    #[test]
    fn constant_source_reduces_to_superposition_form() {
        // s = 1: Y = sqrt(p) h0 1^T + sqrt(p alpha) sum_k h_k c_k + 0
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let ch = gen_channels(&unit_stats(3), 0.6, 2, &mut rng).unwrap();
        let pilots = hadamard_pilot::<f64>(3);
        let p = 1.7;
        let source = SourcePilot::ones(4, p).unwrap();
        let rx = synth_timespread_rx(&ch, &pilots, &source, 0.0, &mut rng).unwrap();
        let sqrt_p = p.sqrt();
        let sqrt_pa = (p * 0.6).sqrt();
        for row in 0..2 {
            for n in 0..4 {
                let mut want = ch.direct[row] * sqrt_p;
                for k in 0..3 {
                    want += ch.cascaded[(row, k)] * sqrt_pa * pilots.matrix()[(k + 1, n)];
                }
                assert!((rx.raw[(row, n)] - want).norm() < 1e-12);
            }
        }
        // s = 1 also makes the de-rotation an identity
        assert!(crate::linalg::max_abs(&(&rx.raw - &rx.source_projected)) < 1e-15);
    }

    #[test]
    fn despread_noise_variance_is_sigma2_over_tau() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let ch = gen_channels(&unit_stats(3), 0.6, 2, &mut rng).unwrap();
        let pilots = hadamard_pilot::<f64>(3);
        let p = 1.0;
        let source = phase_ramp_source(4, p);
        let sigma2 = 0.8;
        let trials = 30_000;
        let mut acc = 0.0;
        let mut count = 0usize;
        let sqrt_p = p.sqrt();
        for _ in 0..trials {
            let rx = synth_timespread_rx(&ch, &pilots, &source, sigma2, &mut rng).unwrap();
            for row in 0..2 {
                for col in 0..4 {
                    let resid = rx.despread[(row, col)] - ch.stacked[(row, col)] * sqrt_p;
                    acc += resid.norm_sqr();
                    count += 1;
                }
            }
        }
        let var = acc / count as f64;
        let want = sigma2 / 4.0;
        assert!((var - want).abs() / want < 0.03, "var {var} want {want}");
    }

    #[test]
    fn noise_is_circular() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let sigma2 = 1.3;
        let n = 200_000;
        let mut pseudo = Complex::new(0.0, 0.0);
        let mut power = 0.0;
        for _ in 0..n {
            let z = complex_noise(sigma2, &mut rng);
            pseudo += z * z;
            power += z.norm_sqr();
        }
        let pseudo_var = (pseudo / n as f64).norm();
        let var = power / n as f64;
        assert!((var - sigma2).abs() / sigma2 < 0.02, "var {var}");
        assert!(pseudo_var < 0.01 * sigma2, "pseudo variance {pseudo_var}");
    }

    #[test]
    fn source_projection_is_unitary() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let ch = gen_channels(&unit_stats(3), 0.6, 3, &mut rng).unwrap();
        let pilots = hadamard_pilot::<f64>(3);
        let source = phase_ramp_source(4, 1.0);
        let rx = synth_timespread_rx(&ch, &pilots, &source, 0.5, &mut rng).unwrap();

        // power preserved
        let before = crate::linalg::fro_norm(&rx.raw);
        let after = crate::linalg::fro_norm(&rx.source_projected);
        assert!((before - after).abs() < 1e-12);

        // de-rotating, then rotating by the conjugate sequence, round-trips
        let conj = SourcePilot::new(source.symbols().mapv(|z| z.conj()), 1.0).unwrap();
        let back = project_source(&rx.source_projected, &conj).unwrap();
        assert!(crate::linalg::max_abs(&(&back - &rx.raw)) < 1e-12);
    }

    #[test]
    fn despread_rejects_contaminated_design() {
        use crate::pilots::{cyclic_shift, zc_sequence, PilotDesign, PilotMatrix};
        // raw (uncorrected) ZC shifts: mutually orthogonal but not orthogonal
        // to the all-ones source row
        let z0 = zc_sequence::<f64>(1, 5).unwrap();
        let mut entries =
            Array2::from_elem((3, 5), Complex::new(0.0, 0.0));
        for n in 0..5 {
            entries[(0, n)] = Complex::new(1.0, 0.0);
        }
        for k in 1..3 {
            let row = cyclic_shift(&z0, k);
            for n in 0..5 {
                entries[(k, n)] = row[n];
            }
        }
        let bad = PilotMatrix::from_matrix_unchecked(entries, PilotDesign::Custom);
        let y = Array2::from_elem((2, 5), Complex::new(1.0, 0.0));
        assert!(matches!(despread(&y, &bad), Err(Error::InvalidPilot(_))));
    }

    #[test]
    fn silent_slot_layout() {
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        // K=2, tau=3: three single-symbol slots
        let ch = gen_channels(&unit_stats(2), 0.6, 2, &mut rng).unwrap();
        let rx = synth_silent_rx(&ch, 3, 1.0, 0.0, &mut rng).unwrap();
        assert_eq!(rx.slots.len(), 3);
        assert_eq!(rx.slot_len, 1);
        assert!(rx.slots.iter().all(|s| s.ncols() == 1));

        // K=7, tau=8: one symbol per slot
        let ch = gen_channels(&unit_stats(7), 0.6, 2, &mut rng).unwrap();
        let rx = synth_silent_rx(&ch, 8, 1.0, 0.0, &mut rng).unwrap();
        assert_eq!(rx.slots.len(), 8);
        assert_eq!(rx.slot_len, 1);

        // K=31, tau=33 (ZC length): the extra symbol goes to the direct slot
        let ch = gen_channels(&unit_stats(31), 0.6, 2, &mut rng).unwrap();
        let rx = synth_silent_rx(&ch, 33, 1.0, 0.0, &mut rng).unwrap();
        assert_eq!(rx.slots.len(), 32);
        assert_eq!(rx.slots[0].ncols(), 2);
        assert!(rx.slots[1..].iter().all(|s| s.ncols() == 1));
    }

    #[test]
    fn silent_noiseless_content() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let ch = gen_channels(&unit_stats(2), 0.36, 3, &mut rng).unwrap();
        let p = 4.0;
        let rx = synth_silent_rx(&ch, 7, p, 0.0, &mut rng).unwrap();
        let sqrt_p = p.sqrt();
        let sqrt_alpha = 0.6; // sqrt(0.36)
        for row in 0..3 {
            for c in 0..rx.slots[0].ncols() {
                let want = ch.direct[row] * sqrt_p;
                assert!((rx.slots[0][(row, c)] - want).norm() < 1e-12);
            }
            for i in 1..=2 {
                let want = (ch.direct[row] + ch.cascaded[(row, i - 1)] * sqrt_alpha) * sqrt_p;
                for c in 0..rx.slots[i].ncols() {
                    assert!((rx.slots[i][(row, c)] - want).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn silent_rejects_short_training() {
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let ch = gen_channels(&stats(3), 0.6, 2, &mut rng).unwrap();
        assert!(matches!(
            synth_silent_rx(&ch, 3, 1.0, 0.0, &mut rng),
            Err(Error::Infeasible(_))
        ));
    }

    fn dft_user_pilots(n: usize, sub_len: usize) -> Vec<CVec<f64>> {
        // orthonormal rows of the sub_len-point DFT
        (0..n)
            .map(|u| {
                Array1::from_iter((0..sub_len).map(|j| {
                    Complex::from_polar(
                        (sub_len as f64).sqrt().recip(),
                        -2.0 * std::f64::consts::PI * (u * j) as f64 / sub_len as f64,
                    )
                }))
            })
            .collect()
    }

    #[test]
    fn multiuser_noiseless_exact_and_leakage_free() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let tag_pilots = hadamard_pilot::<f64>(3);
        let q = tag_pilots.tau();
        let p = 1.9;
        let sub_len = 2;
        let users = dft_user_pilots(2, sub_len);
        let stacks: Vec<_> = (0..2)
            .map(|_| {
                multiuser_stacked(&gen_channels(&unit_stats(3), 0.6, 4, &mut rng).unwrap(), 1.0)
            })
            .collect();
        let rx = synth_multiuser_rx(&stacks, &users, &tag_pilots, p, 0.0, &mut rng).unwrap();
        let amp = (sub_len as f64 * p).sqrt();
        for (n, stack) in stacks.iter().enumerate() {
            // Ytilde_n X^H / Q should return amp * Hbar_n exactly; any
            // cross-user residual would break the equality
            let xh = crate::linalg::hermitian(tag_pilots.matrix());
            let mut est = crate::linalg::matmul(&rx.projected[n], &xh);
            est.mapv_inplace(|z| z / q as f64);
            for row in 0..4 {
                for col in 0..4 {
                    let err = (est[(row, col)] - stack[(row, col)] * amp).norm();
                    assert!(err < 1e-10, "user {n} ({row},{col}): {err:e}");
                }
            }
        }
    }

    #[test]
    fn multiuser_single_user_degenerates_to_timespread() {
        let mut rng = ChaCha12Rng::seed_from_u64(10);
        let ch = gen_channels(&unit_stats(3), 0.6, 2, &mut rng).unwrap();
        let tag_pilots = hadamard_pilot::<f64>(3);
        let users = vec![Array1::from_elem(1, Complex::new(1.0, 0.0))];
        let stack = multiuser_stacked(&ch, 0.5);
        // alpha exponent 1/2 reproduces the single-user stacking
        assert!(crate::linalg::max_abs(&(&stack - &ch.stacked)) < 1e-14);
        let rx =
            synth_multiuser_rx(&[stack], &users, &tag_pilots, 2.0, 0.0, &mut rng).unwrap();
        // with tau' = 1 the projected stack is sqrt(p) Hbar X, i.e. the
        // single-user noiseless raw block with s = 1
        let source = SourcePilot::ones(4, 2.0).unwrap();
        let single = synth_timespread_rx(&ch, &tag_pilots, &source, 0.0, &mut rng).unwrap();
        assert!(crate::linalg::max_abs(&(&rx.projected[0] - &single.raw)) < 1e-12);
    }

    #[test]
    fn multiuser_rejects_bad_inputs() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let ch = gen_channels(&unit_stats(3), 0.6, 2, &mut rng).unwrap();
        let stack = multiuser_stacked(&ch, 1.0);
        let tag_pilots = hadamard_pilot::<f64>(3);

        // non-orthogonal user pilots
        let s = Array1::from_elem(2, Complex::new(std::f64::consts::FRAC_1_SQRT_2, 0.0));
        let bad = vec![s.clone(), s];
        assert!(synth_multiuser_rx(
            &[stack.clone(), stack.clone()],
            &bad,
            &tag_pilots,
            1.0,
            0.0,
            &mut rng
        )
        .is_err());

        // more users than sub-slot symbols
        let users = dft_user_pilots(2, 2);
        assert!(synth_multiuser_rx(
            &[stack.clone(), stack.clone(), stack.clone()],
            &[users[0].clone(), users[1].clone(), users[0].clone()],
            &tag_pilots,
            1.0,
            0.0,
            &mut rng
        )
        .is_err());
    }

    #[test]
    fn multiuser_projection_preserves_noise_variance() {
        let mut rng = ChaCha12Rng::seed_from_u64(12);
        let tag_pilots = hadamard_pilot::<f64>(1);
        let users = dft_user_pilots(2, 2);
        let sigma2 = 0.9;
        let trials = 20_000;
        let mut acc = 0.0;
        let mut count = 0usize;
        let zero_stack = Array2::from_elem((2, 2), Complex::new(0.0, 0.0));
        let stacks = vec![zero_stack.clone(), zero_stack];
        for _ in 0..trials {
            let rx =
                synth_multiuser_rx(&stacks, &users, &tag_pilots, 1.0, sigma2, &mut rng).unwrap();
            for proj in &rx.projected {
                for z in proj.iter() {
                    acc += z.norm_sqr();
                    count += 1;
                }
            }
        }
        let var = acc / count as f64;
        assert!((var - sigma2).abs() / sigma2 < 0.03, "var {var}");
    }
}
