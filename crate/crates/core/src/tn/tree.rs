use num_complex::Complex64;

use super::{
    adjoint_matvec, check_input, isometry_error, matrix_from_vec, matrix_to_vec, matvec, normalize, patchify,
    qr_isometry, random_complex, realify, unitarity_error, CMatrix, FrontendConfig, TnError,
};
use crate::nn::{stem, Linear};
use crate::params::Bundle;
use crate::seed;

pub const TTN_KIND: &str = "tn-ttn";
pub const MERA_KIND: &str = "tn-mera";

/// Binary tree over patch leaves with one shared isometry per level.
///
/// Level-`ℓ` parents are `normalize(W_ℓ† [a; b])` for sibling pairs
/// `(2j, 2j+1)`, with `W_ℓ` a `2·d_loc × d_loc` isometry.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeParams {
    pub config: FrontendConfig,
    pub stem: Linear,
    pub leaf_re: Linear,
    pub leaf_im: Linear,
    pub isometries: Vec<CMatrix>,
    pub projection: Linear,
}

fn levels(cfg: &FrontendConfig) -> usize {
    cfg.n_patches().trailing_zeros() as usize
}

impl TreeParams {
    pub fn seeded(cfg: &FrontendConfig) -> Result<Self, TnError> {
        let mut rng = seed::rng(seed::derive_named(cfg.seed, "tree"));
        let patch_len = cfg.patch * cfg.patch;
        let stem = Linear::seeded(patch_len, cfg.d_p, &mut rng);
        let leaf_re = Linear::seeded(cfg.d_p, cfg.d_loc, &mut rng);
        let leaf_im = Linear::seeded(cfg.d_p, cfg.d_loc, &mut rng);
        let isometries = (0..levels(cfg))
            .map(|_| qr_isometry(&random_complex(2 * cfg.d_loc, cfg.d_loc, &mut rng)))
            .collect::<Result<_, _>>()?;
        let mut projection = Linear::seeded(2 * cfg.d_loc, cfg.d, &mut rng);
        projection.bias.iter_mut().for_each(|b| *b = 0.0);
        Ok(Self {
            config: *cfg,
            stem,
            leaf_re,
            leaf_im,
            isometries,
            projection,
        })
    }

    /// Unit-norm complex leaf per patch.
    pub fn leaves(&self, x: &[f64]) -> Result<Vec<Vec<Complex64>>, TnError> {
        check_input(x)?;
        Ok(patchify(x, self.config.patch)?
            .iter()
            .map(|p| {
                let h = stem(&self.stem, p);
                let mut leaf: Vec<Complex64> = self
                    .leaf_re
                    .forward(&h)
                    .into_iter()
                    .zip(self.leaf_im.forward(&h))
                    .map(|(a, b)| Complex64::new(a, b))
                    .collect();
                normalize(&mut leaf);
                leaf
            })
            .collect())
    }

    /// One coarse-graining level.
    pub fn merge(&self, level: usize, sites: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
        sites
            .chunks_exact(2)
            .map(|pair| {
                let joined: Vec<Complex64> = pair[0].iter().chain(&pair[1]).cloned().collect();
                let mut parent = adjoint_matvec(&self.isometries[level], &joined);
                normalize(&mut parent);
                parent
            })
            .collect()
    }

    pub fn root(&self, x: &[f64]) -> Result<Vec<Complex64>, TnError> {
        let mut sites = self.leaves(x)?;
        for level in 0..self.isometries.len() {
            sites = self.merge(level, &sites);
        }
        Ok(sites.pop().expect("tree has a root"))
    }

    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>, TnError> {
        Ok(self.projection.forward(&realify(&self.root(x)?)))
    }

    pub fn isometry_report(&self) -> Vec<(String, f64)> {
        self.isometries
            .iter()
            .enumerate()
            .map(|(l, w)| (format!("isometry.{l}"), isometry_error(w)))
            .collect()
    }

    fn push_into(&self, b: &mut Bundle) {
        let c = &self.config;
        b.push_linear("stem", &self.stem);
        b.push_linear("leaf_re", &self.leaf_re);
        b.push_linear("leaf_im", &self.leaf_im);
        for (l, w) in self.isometries.iter().enumerate() {
            b.push_complex(format!("isometry.{l}"), vec![2 * c.d_loc, c.d_loc], matrix_to_vec(w));
        }
        b.push_linear("projection", &self.projection);
    }

    pub fn to_bundle(&self) -> Bundle {
        let mut b = Bundle::new(TTN_KIND, self.config.seed);
        self.push_into(&mut b);
        b
    }

    fn read(b: &Bundle, c: &FrontendConfig) -> Result<Self, TnError> {
        let isometries = (0..levels(c))
            .map(|l| {
                b.complex(&format!("isometry.{l}"), &[2 * c.d_loc, c.d_loc])
                    .map(|d| matrix_from_vec(2 * c.d_loc, c.d_loc, &d))
            })
            .collect::<Result<_, _>>()?;
        Ok(Self {
            config: *c,
            stem: b.linear("stem", c.patch * c.patch, c.d_p)?,
            leaf_re: b.linear("leaf_re", c.d_p, c.d_loc)?,
            leaf_im: b.linear("leaf_im", c.d_p, c.d_loc)?,
            isometries,
            projection: b.linear("projection", 2 * c.d_loc, c.d)?,
        })
    }

    pub fn from_bundle(b: &Bundle, c: &FrontendConfig) -> Result<Self, TnError> {
        b.expect_kind(TTN_KIND)?;
        Self::read(b, c)
    }
}

/// Tree with one unitary disentangler per level applied to even pairs and
/// then odd pairs (no wrap-around) before each coarse-graining step.
#[derive(Debug, Clone, PartialEq)]
pub struct MeraParams {
    pub tree: TreeParams,
    pub disentanglers: Vec<CMatrix>,
}

impl MeraParams {
    pub fn seeded(cfg: &FrontendConfig) -> Result<Self, TnError> {
        let tree = TreeParams::seeded(cfg)?;
        let mut rng = seed::rng(seed::derive_named(cfg.seed, "mera"));
        let disentanglers = (0..levels(cfg))
            .map(|_| qr_isometry(&random_complex(2 * cfg.d_loc, 2 * cfg.d_loc, &mut rng)))
            .collect::<Result<_, _>>()?;
        Ok(Self { tree, disentanglers })
    }

    /// Identity disentanglers on top of the given tree.
    pub fn identity(tree: TreeParams) -> Self {
        let n = 2 * tree.config.d_loc;
        let disentanglers = vec![CMatrix::identity(n, n); tree.isometries.len()];
        Self { tree, disentanglers }
    }

    fn disentangle_pair(u: &CMatrix, sites: &mut [Vec<Complex64>], i: usize) {
        let d = sites[i].len();
        let joined: Vec<Complex64> = sites[i].iter().chain(&sites[i + 1]).cloned().collect();
        let out = matvec(u, &joined);
        sites[i].copy_from_slice(&out[..d]);
        sites[i + 1].copy_from_slice(&out[d..]);
    }

    /// Even pairs `(0,1), (2,3), …` then odd pairs `(1,2), (3,4), …`.
    pub fn disentangle(&self, level: usize, sites: &mut [Vec<Complex64>]) {
        let u = &self.disentanglers[level];
        for start in [0usize, 1] {
            let mut i = start;
            while i + 1 < sites.len() {
                Self::disentangle_pair(u, sites, i);
                i += 2;
            }
        }
    }

    pub fn root(&self, x: &[f64]) -> Result<Vec<Complex64>, TnError> {
        let mut sites = self.tree.leaves(x)?;
        for level in 0..self.tree.isometries.len() {
            self.disentangle(level, &mut sites);
            sites = self.tree.merge(level, &sites);
        }
        Ok(sites.pop().expect("tree has a root"))
    }

    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>, TnError> {
        Ok(self.tree.projection.forward(&realify(&self.root(x)?)))
    }

    pub fn isometry_report(&self) -> Vec<(String, f64)> {
        let mut r = self.tree.isometry_report();
        r.extend(
            self.disentanglers
                .iter()
                .enumerate()
                .map(|(l, u)| (format!("disentangler.{l}"), unitarity_error(u))),
        );
        r
    }

    pub fn to_bundle(&self) -> Bundle {
        let c = &self.tree.config;
        let mut b = Bundle::new(MERA_KIND, c.seed);
        self.tree.push_into(&mut b);
        for (l, u) in self.disentanglers.iter().enumerate() {
            b.push_complex(format!("disentangler.{l}"), vec![2 * c.d_loc, 2 * c.d_loc], matrix_to_vec(u));
        }
        b
    }

    pub fn from_bundle(b: &Bundle, c: &FrontendConfig) -> Result<Self, TnError> {
        b.expect_kind(MERA_KIND)?;
        let tree = TreeParams::read(b, c)?;
        let n = 2 * c.d_loc;
        let disentanglers = (0..levels(c))
            .map(|l| {
                b.complex(&format!("disentangler.{l}"), &[n, n])
                    .map(|d| matrix_from_vec(n, n, &d))
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { tree, disentanglers })
    }
}
