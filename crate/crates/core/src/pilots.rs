//! Pilot matrix construction and verification.
//!
//! The pilot matrix `X` has K+1 rows of length tau: row 0 is the all-ones
//! sequence carried implicitly by the RF source (the "hidden tag"), rows
//! 1..=K are the tag spreading sequences. Estimation is contamination-free
//! when every tag row is orthogonal to the all-ones row and the rows are
//! mutually orthogonal; the estimator variance is minimized when
//! `X Xᴴ = tau I`.

use ndarray::{Array1, Array2};
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::{CMat, CVec};

/// Default validation tolerance. The designs are analytically exact, so any
/// defect is pure floating-point round-off.
pub const DEFAULT_TOLERANCE: f64 = 1e-10;

/// Supported pilot sequence families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PilotDesign {
    Hadamard,
    ModifiedZc,
    Dft,
    Custom,
}

impl std::fmt::Display for PilotDesign {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            PilotDesign::Hadamard => "hadamard",
            PilotDesign::ModifiedZc => "zc",
            PilotDesign::Dft => "dft",
            PilotDesign::Custom => "custom",
        };
        f.write_str(s)
    }
}

/// A (K+1) x tau pilot matrix with unit-modulus entries and all-ones row 0.
#[derive(Debug, Clone)]
pub struct PilotMatrix<T: Real> {
    entries: CMat<T>,
    design: PilotDesign,
}

impl<T: Real> PilotMatrix<T> {
    /// Wrap an arbitrary complex matrix without invariant checks. Meant for
    /// validator inputs and tests; use [`custom_pilot`] for checked ingestion.
    pub fn from_matrix_unchecked(entries: CMat<T>, design: PilotDesign) -> Self {
        Self { entries, design }
    }

    /// Number of rows, K+1.
    pub fn rows(&self) -> usize {
        self.entries.nrows()
    }

    /// Sequence length tau.
    pub fn tau(&self) -> usize {
        self.entries.ncols()
    }

    /// Number of tags K.
    pub fn num_tags(&self) -> usize {
        self.rows().saturating_sub(1)
    }

    pub fn design(&self) -> PilotDesign {
        self.design
    }

    pub fn matrix(&self) -> &CMat<T> {
        &self.entries
    }

    /// Row `k` (0 = the hidden-tag all-ones sequence).
    pub fn row(&self, k: usize) -> CVec<T> {
        self.entries.row(k).to_owned()
    }

    /// Serialize as CSV text: one row per sequence, entries as `re+imj`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.entries.outer_iter() {
            let cells: Vec<String> = row.iter().map(|z| format_complex(*z)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// Parse the CSV form written by [`PilotMatrix::to_csv`].
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rows: Vec<Vec<Complex<T>>> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let row: Result<Vec<Complex<T>>> = line
                .split(',')
                .map(|cell| parse_complex(cell.trim()).ok_or_else(|| {
                    Error::Parse(format!("bad complex entry {:?} on line {}", cell, i + 1))
                }))
                .collect();
            rows.push(row?);
        }
        if rows.is_empty() {
            return Err(Error::Parse("empty pilot CSV".into()));
        }
        let tau = rows[0].len();
        if rows.iter().any(|r| r.len() != tau) {
            return Err(Error::Parse("ragged pilot CSV".into()));
        }
        let flat: Vec<Complex<T>> = rows.into_iter().flatten().collect();
        let entries = Array2::from_shape_vec((flat.len() / tau, tau), flat)
            .map_err(|e| Error::Parse(e.to_string()))?;
        Ok(Self::from_matrix_unchecked(entries, PilotDesign::Custom))
    }
}

/// Defects of the three Theorem-style orthogonality conditions.
#[derive(Debug, Clone)]
pub struct PilotValidationReport<T: Real> {
    /// max over tags of |1_tau c_kᴴ|.
    pub source_orthogonality_defect: T,
    /// max off-diagonal |c_i c_kᴴ| among tag rows.
    pub mutual_orthogonality_defect: T,
    /// max-norm of X Xᴴ - tau I.
    pub gram_defect: T,
    pub passed: bool,
}

fn ones_row<T: Real>(tau: usize) -> Vec<Complex<T>> {
    vec![Complex::new(T::one(), T::zero()); tau]
}

/// Smallest power of two >= n (n >= 1).
pub fn next_power_of_two(n: usize) -> usize {
    n.next_power_of_two()
}

/// Smallest odd prime >= n; 3 for n <= 3.
pub fn next_odd_prime(n: usize) -> usize {
    fn is_prime(v: usize) -> bool {
        if v < 2 {
            return false;
        }
        let mut d = 2;
        while d * d <= v {
            if v % d == 0 {
                return false;
            }
            d += 1;
        }
        true
    }
    let mut v = n.max(3);
    if v % 2 == 0 {
        v += 1;
    }
    while !is_prime(v) {
        v += 2;
    }
    v
}

/// Minimal training length for each design family given K tags.
pub fn default_tau(design: PilotDesign, num_tags: usize) -> usize {
    match design {
        PilotDesign::Hadamard => next_power_of_two(num_tags + 1),
        PilotDesign::ModifiedZc => next_odd_prime(num_tags + 1),
        PilotDesign::Dft | PilotDesign::Custom => num_tags + 1,
    }
}

/// First K+1 rows of the Sylvester Hadamard matrix of order
/// `m = next_power_of_two(K+1)`; entries are exact +-1 and tau = m.
pub fn hadamard_pilot<T: Real>(num_tags: usize) -> PilotMatrix<T> {
    hadamard_pilot_with_tau(num_tags, next_power_of_two(num_tags + 1))
        .expect("minimal Hadamard length is always feasible")
}

/// First K+1 rows of the Sylvester Hadamard matrix of order `tau`, for any
/// power-of-two `tau >= K+1` (longer sequences trade training time for
/// estimation variance).
pub fn hadamard_pilot_with_tau<T: Real>(num_tags: usize, tau: usize) -> Result<PilotMatrix<T>> {
    if !tau.is_power_of_two() {
        return Err(Error::Config(format!("Hadamard length must be a power of two, got {tau}")));
    }
    if tau < num_tags + 1 {
        return Err(Error::Infeasible(format!("tau = {tau} < K+1 = {}", num_tags + 1)));
    }
    let m = tau;
    // Sylvester doubling over sign bits.
    let mut h: Vec<Vec<i8>> = vec![vec![1]];
    let mut order = 1;
    while order < m {
        let mut next = vec![vec![0i8; 2 * order]; 2 * order];
        for i in 0..order {
            for j in 0..order {
                let v = h[i][j];
                next[i][j] = v;
                next[i][j + order] = v;
                next[i + order][j] = v;
                next[i + order][j + order] = -v;
            }
        }
        h = next;
        order *= 2;
    }
    let rows = num_tags + 1;
    let mut entries = Array2::from_elem((rows, m), Complex::new(T::zero(), T::zero()));
    for i in 0..rows {
        for j in 0..m {
            let v = if h[i][j] > 0 { T::one() } else { -T::one() };
            entries[(i, j)] = Complex::new(v, T::zero());
        }
    }
    Ok(PilotMatrix { entries, design: PilotDesign::Hadamard })
}

/// Zadoff-Chu sequence `z_q(n) = exp(-j pi q n(n+1) / tau)` for odd `tau` and
/// root `1 <= q <= tau-1`.
pub fn zc_sequence<T: Real>(root: usize, tau: usize) -> Result<CVec<T>> {
    if tau % 2 == 0 {
        return Err(Error::Config(format!("ZC length must be odd, got {tau}")));
    }
    if root == 0 || root >= tau {
        return Err(Error::Config(format!("ZC root must be in 1..tau, got {root}")));
    }
    let t = T::of_usize(tau);
    let seq: Vec<Complex<T>> = (0..tau)
        .map(|n| {
            // phase exponent reduced mod 2*tau before the float divide so long
            // sequences do not lose precision
            let e = (root * n * (n + 1)) % (2 * tau);
            let phase = -T::PI() * T::of_usize(e) / t;
            Complex::from_polar(T::one(), phase)
        })
        .collect();
    Ok(Array1::from_vec(seq))
}

/// Cyclic left shift by `k`: out(n) = v((n+k) mod len).
pub fn cyclic_shift<T: Real>(v: &CVec<T>, k: usize) -> CVec<T> {
    let n = v.len();
    Array1::from_iter((0..n).map(|i| v[(i + k) % n]))
}

/// Modified Zadoff-Chu pilot with root index 1.
pub fn modified_zc_pilot<T: Real>(num_tags: usize, tau: usize) -> Result<PilotMatrix<T>> {
    modified_zc_pilot_with_root(num_tags, tau, 1)
}

/// Modified Zadoff-Chu pilot: the K cyclic shifts of `z_root` are rotated by
/// `Q = diag(z_root)^-1`, which forces orthogonality to the all-ones row
/// while preserving mutual orthogonality. Row k becomes
/// `c_k(n) = z(n+k) * conj(z(n))`.
pub fn modified_zc_pilot_with_root<T: Real>(
    num_tags: usize,
    tau: usize,
    root: usize,
) -> Result<PilotMatrix<T>> {
    if tau < num_tags + 1 {
        return Err(Error::Infeasible(format!(
            "tau {tau} too short for {num_tags} tags (need tau >= K+1)"
        )));
    }
    let z0 = zc_sequence::<T>(root, tau)?;
    let mut entries = Array2::from_elem((num_tags + 1, tau), Complex::new(T::zero(), T::zero()));
    for (j, v) in ones_row::<T>(tau).into_iter().enumerate() {
        entries[(0, j)] = v;
    }
    for k in 1..=num_tags {
        let shifted = cyclic_shift(&z0, k);
        for j in 0..tau {
            entries[(k, j)] = shifted[j] * z0[j].conj();
        }
    }
    Ok(PilotMatrix { entries, design: PilotDesign::ModifiedZc })
}

/// DFT pilot: row k entry j is `W^(jk)` with `W = exp(j 2 pi / tau)`.
pub fn dft_pilot<T: Real>(num_tags: usize, tau: usize) -> Result<PilotMatrix<T>> {
    if tau < num_tags + 1 {
        return Err(Error::Infeasible(format!(
            "tau {tau} too short for {num_tags} tags (need tau >= K+1)"
        )));
    }
    let t = T::of_usize(tau);
    let two_pi = T::PI() + T::PI();
    let mut entries = Array2::from_elem((num_tags + 1, tau), Complex::new(T::zero(), T::zero()));
    for k in 0..=num_tags {
        for j in 0..tau {
            let e = (j * k) % tau;
            let phase = two_pi * T::of_usize(e) / t;
            entries[(k, j)] = Complex::from_polar(T::one(), phase);
        }
    }
    Ok(PilotMatrix { entries, design: PilotDesign::Dft })
}

/// Ingest a caller-provided matrix: checks unit modulus, the all-ones first
/// row, tau >= K+1, and the orthogonality conditions at `DEFAULT_TOLERANCE`.
pub fn custom_pilot<T: Real>(entries: CMat<T>) -> Result<PilotMatrix<T>> {
    let tol = T::of(1e-12);
    if entries.nrows() > entries.ncols() {
        return Err(Error::InvalidPilot(format!(
            "{} rows exceed length {}",
            entries.nrows(),
            entries.ncols()
        )));
    }
    for z in entries.row(0).iter() {
        if (*z - Complex::new(T::one(), T::zero())).norm() > tol {
            return Err(Error::InvalidPilot("first row must be all-ones".into()));
        }
    }
    for z in entries.iter() {
        if (z.norm() - T::one()).abs() > tol {
            return Err(Error::InvalidPilot("entries must have unit modulus".into()));
        }
    }
    let pilot = PilotMatrix { entries, design: PilotDesign::Custom };
    let report = validate_pilot(&pilot, T::of(DEFAULT_TOLERANCE));
    if !report.passed {
        return Err(Error::InvalidPilot(format!(
            "orthogonality defects: source {:e}, mutual {:e}, gram {:e}",
            report.source_orthogonality_defect,
            report.mutual_orthogonality_defect,
            report.gram_defect
        )));
    }
    Ok(pilot)
}

/// Check the contamination-avoidance conditions and the `X Xᴴ = tau I`
/// optimality condition; all pairwise row inner products are examined.
pub fn validate_pilot<T: Real>(x: &PilotMatrix<T>, tolerance: T) -> PilotValidationReport<T> {
    let m = x.matrix();
    let rows = m.nrows();
    let tau = T::of_usize(m.ncols());
    let mut source = T::zero();
    let mut mutual = T::zero();
    let mut gram = T::zero();
    for i in 0..rows {
        for k in 0..rows {
            let mut inner = Complex::new(T::zero(), T::zero());
            for j in 0..m.ncols() {
                inner = inner + m[(i, j)] * m[(k, j)].conj();
            }
            let target = if i == k { tau } else { T::zero() };
            gram = gram.max((inner - Complex::new(target, T::zero())).norm());
            if i == 0 && k >= 1 {
                source = source.max(inner.norm());
            }
            if i >= 1 && k >= 1 && i != k {
                mutual = mutual.max(inner.norm());
            }
        }
    }
    let passed = source < tolerance && mutual < tolerance && gram < tolerance;
    PilotValidationReport {
        source_orthogonality_defect: source,
        mutual_orthogonality_defect: mutual,
        gram_defect: gram,
        passed,
    }
}

/// Format a complex number as `re+imj` text.
pub fn format_complex<T: Real>(z: Complex<T>) -> String {
    if z.im < T::zero() {
        format!("{}{}j", z.re, z.im)
    } else {
        format!("{}+{}j", z.re, z.im)
    }
}

/// Parse `re+imj` text.
pub fn parse_complex<T: Real>(s: &str) -> Option<Complex<T>> {
    let body = s.strip_suffix('j')?;
    // split at the sign of the imaginary part: last '+' or '-' that is not
    // the leading sign and not part of an exponent
    let bytes = body.as_bytes();
    let mut split = None;
    for i in (1..bytes.len()).rev() {
        let b = bytes[i];
        if (b == b'+' || b == b'-') && bytes[i - 1] != b'e' && bytes[i - 1] != b'E' {
            split = Some(i);
            break;
        }
    }
    let i = split?;
    let re: f64 = body[..i].parse().ok()?;
    let im: f64 = body[i..].parse().ok()?;
    Some(Complex::new(T::of(re), T::of(im)))
}
