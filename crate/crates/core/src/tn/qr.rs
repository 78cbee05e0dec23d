use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use super::TnError;
use crate::seed;

pub type CMatrix = DMatrix<Complex64>;

const RANK_TOL: f64 = 1e-10;
const JITTER_RETRIES: usize = 3;

/// Standard-normal complex matrix.
pub fn random_complex<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

/// Left-canonical projection: the `Q` factor of a thin QR with every
/// diagonal entry of `R` made real and positive.
///
/// Rank-deficient inputs are perturbed with seeded jitter of relative size
/// `1e-8` and retried; `M = I` maps to `I`.
pub fn qr_isometry(m: &CMatrix) -> Result<CMatrix, TnError> {
    let (rows, cols) = m.shape();
    if rows < cols || cols == 0 {
        return Err(TnError::Shape(format!(
            "qr_isometry needs m >= n >= 1, got {rows}x{cols}"
        )));
    }
    if m.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(TnError::NonFinite("qr_isometry input".into()));
    }
    let scale = m.iter().map(|c| c.norm()).fold(0.0, f64::max).max(1.0);
    let mut rng = seed::rng(seed::derive_named(rows as u64 * 1_000_003 + cols as u64, "qr-jitter"));
    let mut current = m.clone();
    for attempt in 0..=JITTER_RETRIES {
        let qr = current.clone().qr();
        let (q, r) = (qr.q(), qr.r());
        let diag: Vec<f64> = (0..cols).map(|j| r[(j, j)].norm()).collect();
        let max = diag.iter().cloned().fold(0.0, f64::max);
        if max > 0.0 && diag.iter().all(|&v| v > RANK_TOL * max) {
            let mut q = q;
            for j in 0..cols {
                let phase = r[(j, j)] / r[(j, j)].norm();
                for i in 0..rows {
                    q[(i, j)] *= phase;
                }
            }
            return Ok(q);
        }
        if attempt == JITTER_RETRIES {
            break;
        }
        current = m + random_complex(rows, cols, &mut rng) * Complex64::new(1e-8 * scale, 0.0);
    }
    Err(TnError::RankDeficient { rows, cols })
}

/// `max |Q†Q − I|`.
pub fn isometry_error(q: &CMatrix) -> f64 {
    let g = q.adjoint() * q;
    let n = g.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - Complex64::new(target, 0.0)).norm());
        }
    }
    worst
}

/// `max(|U†U − I|, |UU† − I|)` for a square map.
pub fn unitarity_error(u: &CMatrix) -> f64 {
    isometry_error(u).max(isometry_error(&u.adjoint()))
}
