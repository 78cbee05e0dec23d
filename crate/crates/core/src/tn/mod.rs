//! Tensor-network frontends mapping a 28×28 image to a real latent vector.
//!
//! All three encoders share the same tail: the final complex state is
//! realified as `[Re ψ; Im ψ]` and sent through a fixed seeded linear
//! projection to `d`. Isometric cores are stored as tall `m × n` matrices
//! `Q` with `Q†Q = I`; merges apply `Q†` to the concatenated children.

mod mps;
mod qr;
mod tree;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::params::{Bundle, BundleError};

pub use mps::{MpsParams, MPS_KIND};
pub use qr::{isometry_error, qr_isometry, random_complex, unitarity_error, CMatrix};
pub use tree::{MeraParams, TreeParams, MERA_KIND, TTN_KIND};

pub const IMAGE_SIDE: usize = 28;
pub const IMAGE_LEN: usize = IMAGE_SIDE * IMAGE_SIDE;
/// Tolerance for the isometry checks run on construction and load.
pub const ISOMETRY_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum TnError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("non-finite values in {0}")]
    NonFinite(String),
    #[error("matrix {rows}x{cols} stays rank deficient after jitter")]
    RankDeficient { rows: usize, cols: usize },
    #[error("invalid frontend configuration: {0}")]
    Config(String),
    #[error("invariant '{name}' violated: deviation {deviation:.3e}")]
    Invariant { name: String, deviation: f64 },
    #[error(transparent)]
    Bundle(#[from] BundleError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrontendKind {
    Mps,
    Ttn,
    Mera,
}

impl std::str::FromStr for FrontendKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mps" => Ok(FrontendKind::Mps),
            "ttn" => Ok(FrontendKind::Ttn),
            "mera" => Ok(FrontendKind::Mera),
            other => Err(format!("unknown frontend '{other}' (expected mps, ttn or mera)")),
        }
    }
}

impl std::fmt::Display for FrontendKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FrontendKind::Mps => "mps",
            FrontendKind::Ttn => "ttn",
            FrontendKind::Mera => "mera",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontendConfig {
    pub kind: FrontendKind,
    /// Latent dimension.
    pub d: usize,
    /// MPS pre-feature width.
    pub h: usize,
    pub l_sites: usize,
    pub d_loc: usize,
    pub d_phys: usize,
    pub bond: usize,
    /// Side of the square patches.
    pub patch: usize,
    pub d_p: usize,
    pub seed: u64,
}

impl Default for FrontendConfig {
    fn default() -> Self {
        Self {
            kind: FrontendKind::Ttn,
            d: 64,
            h: 256,
            l_sites: 16,
            d_loc: 16,
            d_phys: 8,
            bond: 8,
            patch: 7,
            d_p: 32,
            seed: 0,
        }
    }
}

impl FrontendConfig {
    pub fn with_kind(kind: FrontendKind, seed: u64) -> Self {
        Self {
            kind,
            seed,
            ..Self::default()
        }
    }

    pub fn n_patches(&self) -> usize {
        let side = IMAGE_SIDE / self.patch.max(1);
        side * side
    }

    pub fn validate(&self) -> Result<(), TnError> {
        let bad = |m: String| Err(TnError::Config(m));
        if self.d == 0 {
            return bad("d must be positive".into());
        }
        match self.kind {
            FrontendKind::Mps => {
                if self.l_sites == 0 || self.h == 0 || self.h % self.l_sites != 0 {
                    return bad(format!("h={} must be a positive multiple of L_sites={}", self.h, self.l_sites));
                }
                if self.d_phys == 0 || self.bond == 0 {
                    return bad("d_phys and bond must be positive".into());
                }
            }
            FrontendKind::Ttn | FrontendKind::Mera => {
                if self.patch == 0 || IMAGE_SIDE % self.patch != 0 {
                    return bad(format!("patch side {} must divide {IMAGE_SIDE}", self.patch));
                }
                if !self.n_patches().is_power_of_two() || self.n_patches() < 2 {
                    return bad(format!("patch count {} must be a power of two ≥ 2", self.n_patches()));
                }
                if !self.d_loc.is_power_of_two() {
                    return bad(format!("d_loc={} must be a power of two", self.d_loc));
                }
                if self.d_p == 0 {
                    return bad("d_p must be positive".into());
                }
            }
        }
        Ok(())
    }
}

/// Row-major non-overlapping `patch × patch` blocks, each flattened
/// row-major.
pub fn patchify(image: &[f64], patch: usize) -> Result<Vec<Vec<f64>>, TnError> {
    if image.len() != IMAGE_LEN {
        return Err(TnError::Shape(format!("image has {} pixels, expected {IMAGE_LEN}", image.len())));
    }
    if patch == 0 || IMAGE_SIDE % patch != 0 {
        return Err(TnError::Shape(format!("patch side {patch} does not divide {IMAGE_SIDE}")));
    }
    let per_side = IMAGE_SIDE / patch;
    let mut out = Vec::with_capacity(per_side * per_side);
    for pr in 0..per_side {
        for pc in 0..per_side {
            let mut p = Vec::with_capacity(patch * patch);
            for i in 0..patch {
                let row = (pr * patch + i) * IMAGE_SIDE + pc * patch;
                p.extend_from_slice(&image[row..row + patch]);
            }
            out.push(p);
        }
    }
    Ok(out)
}

pub fn unpatchify(patches: &[Vec<f64>], patch: usize) -> Result<Vec<f64>, TnError> {
    let per_side = IMAGE_SIDE / patch.max(1);
    if patch == 0 || patches.len() != per_side * per_side || patches.iter().any(|p| p.len() != patch * patch) {
        return Err(TnError::Shape("patch set does not tile the image".into()));
    }
    let mut image = vec![0.0; IMAGE_LEN];
    for (idx, p) in patches.iter().enumerate() {
        let (pr, pc) = (idx / per_side, idx % per_side);
        for i in 0..patch {
            let row = (pr * patch + i) * IMAGE_SIDE + pc * patch;
            image[row..row + patch].copy_from_slice(&p[i * patch..(i + 1) * patch]);
        }
    }
    Ok(image)
}

/// `[Re ψ; Im ψ]`.
pub fn realify(psi: &[Complex64]) -> Vec<f64> {
    psi.iter().map(|c| c.re).chain(psi.iter().map(|c| c.im)).collect()
}

pub(crate) fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// Scales to unit norm; the zero vector is left unchanged.
pub(crate) fn normalize(v: &mut [Complex64]) {
    let n = norm(v);
    if n > 0.0 {
        for c in v {
            *c /= n;
        }
    }
}

pub(crate) fn check_input(x: &[f64]) -> Result<(), TnError> {
    if x.len() != IMAGE_LEN {
        return Err(TnError::Shape(format!("input has {} entries, expected {IMAGE_LEN}", x.len())));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(TnError::NonFinite("encoder input".into()));
    }
    Ok(())
}

/// `M v` for a matrix stored densely.
pub(crate) fn matvec(m: &CMatrix, v: &[Complex64]) -> Vec<Complex64> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)] * v[j]).sum())
        .collect()
}

/// `M† v`.
pub(crate) fn adjoint_matvec(m: &CMatrix, v: &[Complex64]) -> Vec<Complex64> {
    (0..m.ncols())
        .map(|j| (0..m.nrows()).map(|i| m[(i, j)].conj() * v[i]).sum())
        .collect()
}

/// Any of the three frontends.
#[derive(Debug, Clone, PartialEq)]
pub enum FrontendParams {
    Mps(MpsParams),
    Ttn(TreeParams),
    Mera(MeraParams),
}

impl FrontendParams {
    pub fn seeded(cfg: &FrontendConfig) -> Result<Self, TnError> {
        cfg.validate()?;
        Ok(match cfg.kind {
            FrontendKind::Mps => FrontendParams::Mps(MpsParams::seeded(cfg)?),
            FrontendKind::Ttn => FrontendParams::Ttn(TreeParams::seeded(cfg)?),
            FrontendKind::Mera => FrontendParams::Mera(MeraParams::seeded(cfg)?),
        })
    }

    pub fn config(&self) -> &FrontendConfig {
        match self {
            FrontendParams::Mps(p) => &p.config,
            FrontendParams::Ttn(p) => &p.config,
            FrontendParams::Mera(p) => &p.tree.config,
        }
    }

    pub fn kind(&self) -> FrontendKind {
        self.config().kind
    }

    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>, TnError> {
        match self {
            FrontendParams::Mps(p) => p.encode(x),
            FrontendParams::Ttn(p) => p.encode(x),
            FrontendParams::Mera(p) => p.encode(x),
        }
    }

    pub fn encode_batch(&self, xs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, TnError> {
        xs.par_iter().map(|x| self.encode(x)).collect()
    }

    /// Named deviation of every isometric or unitary core.
    pub fn isometry_report(&self) -> Vec<(String, f64)> {
        match self {
            FrontendParams::Mps(p) => p.isometry_report(),
            FrontendParams::Ttn(p) => p.isometry_report(),
            FrontendParams::Mera(p) => p.isometry_report(),
        }
    }

    /// Fails on the first core whose deviation exceeds [`ISOMETRY_TOL`].
    pub fn check_isometries(&self) -> Result<(), TnError> {
        match self
            .isometry_report()
            .into_iter()
            .find(|(_, dev)| !(*dev <= ISOMETRY_TOL))
        {
            Some((name, deviation)) => Err(TnError::Invariant { name, deviation }),
            None => Ok(()),
        }
    }

    pub fn to_bundle(&self) -> Bundle {
        let mut b = match self {
            FrontendParams::Mps(p) => p.to_bundle(),
            FrontendParams::Ttn(p) => p.to_bundle(),
            FrontendParams::Mera(p) => p.to_bundle(),
        };
        b.config = Some(serde_json::to_value(self.config()).expect("config serializes"));
        b
    }

    /// Rebuilds from a bundle and re-checks every isometry.
    pub fn from_bundle(bundle: &Bundle) -> Result<Self, TnError> {
        let cfg: FrontendConfig = match &bundle.config {
            Some(v) => serde_json::from_value(v.clone()).map_err(BundleError::from)?,
            None => return Err(TnError::Config("bundle header lacks a frontend config".into())),
        };
        cfg.validate()?;
        let p = match cfg.kind {
            FrontendKind::Mps => FrontendParams::Mps(MpsParams::from_bundle(bundle, &cfg)?),
            FrontendKind::Ttn => FrontendParams::Ttn(TreeParams::from_bundle(bundle, &cfg)?),
            FrontendKind::Mera => FrontendParams::Mera(MeraParams::from_bundle(bundle, &cfg)?),
        };
        p.check_isometries()?;
        Ok(p)
    }
}

pub(crate) fn matrix_to_vec(m: &CMatrix) -> Vec<Complex64> {
    // row-major
    (0..m.nrows())
        .flat_map(|i| (0..m.ncols()).map(move |j| m[(i, j)]))
        .collect()
}

pub(crate) fn matrix_from_vec(rows: usize, cols: usize, data: &[Complex64]) -> CMatrix {
    CMatrix::from_row_slice(rows, cols, data)
}
