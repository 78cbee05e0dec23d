use num_complex::Complex64;

use super::{
    check_input, isometry_error, matrix_from_vec, matrix_to_vec, normalize, qr_isometry, random_complex, realify,
    CMatrix, FrontendConfig, TnError, IMAGE_LEN,
};
use crate::nn::{stem, Linear};
use crate::params::Bundle;
use crate::seed;

pub const MPS_KIND: &str = "tn-mps";

/// Sequential MPS encoder.
///
/// Core `k` is stored as its `(r·d_phys) × r` matricization with row index
/// `α·d_phys + s`, so the update reads
/// `v'_β = Σ_{α,s} v_α A[α·d_phys+s, β] z_s` followed by normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct MpsParams {
    pub config: FrontendConfig,
    pub pre: Linear,
    pub embed_re: Vec<Linear>,
    pub embed_im: Vec<Linear>,
    pub cores: Vec<CMatrix>,
    pub projection: Linear,
}

impl MpsParams {
    pub fn seeded(cfg: &FrontendConfig) -> Result<Self, TnError> {
        Self::seeded_with_input(cfg, IMAGE_LEN)
    }

    /// Same construction with a custom input width, used by small oracles.
    pub fn seeded_with_input(cfg: &FrontendConfig, inputs: usize) -> Result<Self, TnError> {
        let mut rng = seed::rng(seed::derive_named(cfg.seed, "mps"));
        let block = cfg.h / cfg.l_sites;
        let pre = Linear::seeded(inputs, cfg.h, &mut rng);
        let embed_re = (0..cfg.l_sites).map(|_| Linear::seeded(block, cfg.d_phys, &mut rng)).collect();
        let embed_im = (0..cfg.l_sites).map(|_| Linear::seeded(block, cfg.d_phys, &mut rng)).collect();
        let cores = (0..cfg.l_sites)
            .map(|_| qr_isometry(&random_complex(cfg.bond * cfg.d_phys, cfg.bond, &mut rng)))
            .collect::<Result<_, _>>()?;
        let mut projection = Linear::seeded(2 * cfg.bond, cfg.d, &mut rng);
        projection.bias.iter_mut().for_each(|b| *b = 0.0);
        Ok(Self {
            config: *cfg,
            pre,
            embed_re,
            embed_im,
            cores,
            projection,
        })
    }

    /// Complex site vectors `z̃^(k)`.
    pub fn site_vectors(&self, x: &[f64]) -> Vec<Vec<Complex64>> {
        let h = stem(&self.pre, x);
        let block = self.config.h / self.config.l_sites;
        h.chunks_exact(block)
            .zip(self.embed_re.iter().zip(&self.embed_im))
            .map(|(b, (re, im))| {
                re.forward(b)
                    .into_iter()
                    .zip(im.forward(b))
                    .map(|(a, c)| Complex64::new(a, c))
                    .collect()
            })
            .collect()
    }

    /// Final bond state `v^(L)`, unit norm.
    pub fn contract(&self, sites: &[Vec<Complex64>]) -> Vec<Complex64> {
        let (r, dp) = (self.config.bond, self.config.d_phys);
        let mut v = vec![Complex64::new(0.0, 0.0); r];
        v[0] = Complex64::new(1.0, 0.0);
        for (core, z) in self.cores.iter().zip(sites) {
            let mut next = vec![Complex64::new(0.0, 0.0); r];
            for (alpha, va) in v.iter().enumerate() {
                for (s, zs) in z.iter().enumerate() {
                    let w = va * zs;
                    let row = alpha * dp + s;
                    for (beta, n) in next.iter_mut().enumerate() {
                        *n += w * core[(row, beta)];
                    }
                }
            }
            normalize(&mut next);
            v = next;
        }
        v
    }

    /// State before realification and projection.
    pub fn state(&self, x: &[f64]) -> Vec<Complex64> {
        self.contract(&self.site_vectors(x))
    }

    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>, TnError> {
        check_input(x)?;
        Ok(self.projection.forward(&realify(&self.state(x))))
    }

    pub fn isometry_report(&self) -> Vec<(String, f64)> {
        self.cores
            .iter()
            .enumerate()
            .map(|(k, c)| (format!("mps.core.{k}"), isometry_error(c)))
            .collect()
    }

    pub fn to_bundle(&self) -> Bundle {
        let c = &self.config;
        let mut b = Bundle::new(MPS_KIND, c.seed);
        b.push_linear("pre", &self.pre);
        for (k, (re, im)) in self.embed_re.iter().zip(&self.embed_im).enumerate() {
            b.push_linear(&format!("embed_re.{k}"), re);
            b.push_linear(&format!("embed_im.{k}"), im);
        }
        for (k, core) in self.cores.iter().enumerate() {
            b.push_complex(format!("mps.core.{k}"), vec![c.bond, c.d_phys, c.bond], matrix_to_vec(core));
        }
        b.push_linear("projection", &self.projection);
        b
    }

    pub fn from_bundle(b: &Bundle, c: &FrontendConfig) -> Result<Self, TnError> {
        b.expect_kind(MPS_KIND)?;
        let block = c.h / c.l_sites;
        let mut embed_re = Vec::with_capacity(c.l_sites);
        let mut embed_im = Vec::with_capacity(c.l_sites);
        let mut cores = Vec::with_capacity(c.l_sites);
        for k in 0..c.l_sites {
            embed_re.push(b.linear(&format!("embed_re.{k}"), block, c.d_phys)?);
            embed_im.push(b.linear(&format!("embed_im.{k}"), block, c.d_phys)?);
            let data = b.complex(&format!("mps.core.{k}"), &[c.bond, c.d_phys, c.bond])?;
            cores.push(matrix_from_vec(c.bond * c.d_phys, c.bond, &data));
        }
        Ok(Self {
            config: *c,
            pre: b.linear("pre", IMAGE_LEN, c.h)?,
            embed_re,
            embed_im,
            cores,
            projection: b.linear("projection", 2 * c.bond, c.d)?,
        })
    }
}
