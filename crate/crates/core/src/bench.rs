//! Communication-cost benchmark for the protected aggregation pipeline.
//!
//! Scenarios (passive / active):
//!
//! | id | security | protected functionality                |
//! |----|----------|----------------------------------------|
//! | 0  | none     | plaintext upload to one server         |
//! | 1/4| passive/active | weighted aggregation `WF`, `W`   |
//! | 2/5| passive/active | + normalization `x = WF/(W+ε)`   |
//! | 3/6| passive/active | + one `d×d` protected transformation |
//!
//! [`run_scenario`] evaluates the closed form; [`verify_against_meter`]
//! executes the same computation with [`mpc`](crate::mpc) and compares the
//! metered counters bit for bit. Scenarios 2/5 open the normalized aggregate
//! `x` right after normalization; scenarios 3/6 open only the transformed
//! vector.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mpc::{run_protocol, CostReport, Instr, MpcError, ProgramBuilder, ProtocolConfig, Reg, SecurityMode, Session};
use crate::ring::FixedPointCodec;
use crate::seed;

/// Public stabilizer `ε` added to the total weight.
pub const STABILIZER: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid scenario id {0} (expected 0..=6)")]
    InvalidScenario(u8),
    #[error("invalid benchmark configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Mpc(#[from] MpcError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Functionality {
    Aggregation,
    Normalization,
    Transformation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Scenario(u8);

impl Scenario {
    pub const ALL: [Scenario; 7] = [
        Scenario(0),
        Scenario(1),
        Scenario(2),
        Scenario(3),
        Scenario(4),
        Scenario(5),
        Scenario(6),
    ];

    pub fn new(id: u8) -> Result<Self, BenchError> {
        if id <= 6 {
            Ok(Scenario(id))
        } else {
            Err(BenchError::InvalidScenario(id))
        }
    }

    pub fn id(self) -> u8 {
        self.0
    }

    /// `None` for the insecure baseline.
    pub fn security(self) -> Option<SecurityMode> {
        match self.0 {
            0 => None,
            1..=3 => Some(SecurityMode::Passive),
            _ => Some(SecurityMode::Active),
        }
    }

    pub fn functionality(self) -> Functionality {
        match self.0 {
            0 | 1 | 4 => Functionality::Aggregation,
            2 | 5 => Functionality::Normalization,
            _ => Functionality::Transformation,
        }
    }

    /// The passive scenario with the same functionality.
    pub fn passive_counterpart(self) -> Scenario {
        if self.0 >= 4 {
            Scenario(self.0 - 3)
        } else {
            self
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "S{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DivisionStrategy {
    PerElement,
    /// One reciprocal `1/(W+ε)` followed by `d` fixed-point products.
    #[default]
    ReciprocalOnce,
}

impl fmt::Display for DivisionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DivisionStrategy::PerElement => "per-element",
            DivisionStrategy::ReciprocalOnce => "reciprocal-once",
        })
    }
}

impl FromStr for DivisionStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "per-element" => Ok(DivisionStrategy::PerElement),
            "reciprocal-once" => Ok(DivisionStrategy::ReciprocalOnce),
            other => Err(format!("unknown division strategy '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub n: usize,
    pub d: usize,
    pub k: u32,
    pub theta: u32,
    pub frac_bits: u32,
    pub strategy: DivisionStrategy,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            n: 16,
            d: 64,
            k: 64,
            theta: 5,
            frac_bits: 20,
            strategy: DivisionStrategy::ReciprocalOnce,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::InvalidConfig(m));
        if self.n == 0 {
            return bad("n must be at least 1".into());
        }
        if self.d == 0 {
            return bad("d must be at least 1".into());
        }
        if self.theta == 0 {
            return bad("theta must be at least 1".into());
        }
        if self.k == 0 || self.k > 64 {
            return bad(format!("k={} outside 1..=64", self.k));
        }
        if self.frac_bits == 0 || self.frac_bits >= self.k {
            return bad(format!("F={} must satisfy 0 < F < k", self.frac_bits));
        }
        Ok(())
    }
}

/// Closed-form costs in bits for `(client→node, node↔node, reconstruction)`,
/// passive security.
fn passive_counters(cfg: &BenchConfig, f: Functionality) -> (u64, u64, u64) {
    let (n, d, k) = (cfg.n as u64, cfg.d as u64, cfg.k as u64);
    let theta = cfg.theta as u64;
    let sharing = n * (d + 1) * 6 * k;
    let aggregation = n * d * 9 * k;
    let division = 3 * k * (k + 4 * theta + 2);
    let normalization = match cfg.strategy {
        DivisionStrategy::ReciprocalOnce => division + d * 9 * k,
        DivisionStrategy::PerElement => d * division,
    };
    match f {
        Functionality::Aggregation => (sharing, aggregation, (d + 1) * 3 * k),
        Functionality::Normalization => (sharing, aggregation + normalization, d * 3 * k),
        Functionality::Transformation => (
            sharing,
            aggregation + normalization + d * d * 9 * k,
            d * 3 * k,
        ),
    }
}

/// Closed-form cost report for one scenario.
pub fn run_scenario(cfg: &BenchConfig, s: Scenario) -> Result<CostReport, BenchError> {
    cfg.validate()?;
    let Some(mode) = s.security() else {
        // plaintext (f_i, w_i) words to a single server
        let bits = cfg.n as u64 * (cfg.d as u64 + 1) * cfg.k as u64;
        return Ok(CostReport::new(cfg.k, SecurityMode::Passive, bits, 0, 0));
    };
    let (c, m, r) = passive_counters(cfg, s.functionality());
    let x = mode.factor();
    Ok(CostReport::new(cfg.k, mode, c * x, m * x, r * x))
}

/// Builds the protected program of a secure scenario on seeded synthetic
/// client data. Transformation weights are dealt at setup.
pub fn scenario_program(cfg: &BenchConfig, s: Scenario, data_seed: u64) -> Result<crate::mpc::Program, BenchError> {
    cfg.validate()?;
    let f = s.functionality();
    let mut rng = seed::rng(data_seed);
    let mut b = ProgramBuilder::new();
    let mut feats: Vec<Vec<Reg>> = Vec::with_capacity(cfg.n);
    let mut weights = Vec::with_capacity(cfg.n);
    for _ in 0..cfg.n {
        feats.push((0..cfg.d).map(|_| b.input(rng.random_range(0.0..1.0))).collect());
        weights.push(b.input(rng.random_range(0.5..1.5)));
    }
    let transform: Vec<Vec<Reg>> = if f == Functionality::Transformation {
        (0..cfg.d)
            .map(|_| (0..cfg.d).map(|_| b.dealt(rng.random_range(-0.5..0.5))).collect())
            .collect()
    } else {
        Vec::new()
    };

    let mut wf: Vec<Option<Reg>> = vec![None; cfg.d];
    let mut total: Option<Reg> = None;
    for (fi, &wi) in feats.iter().zip(&weights) {
        for (j, &fij) in fi.iter().enumerate() {
            let p = b.push(Instr::Mul(wi, fij));
            wf[j] = Some(match wf[j] {
                None => p,
                Some(acc) => b.push(Instr::Add(acc, p)),
            });
        }
        total = Some(match total {
            None => wi,
            Some(acc) => b.push(Instr::Add(acc, wi)),
        });
    }
    let wf: Vec<Reg> = wf.into_iter().map(Option::unwrap).collect();
    let total = total.unwrap();

    if f == Functionality::Aggregation {
        for &r in &wf {
            b.output(r);
        }
        b.output(total);
        return Ok(b.build());
    }

    let den = b.push(Instr::AddConst(total, STABILIZER));
    let x: Vec<Reg> = match cfg.strategy {
        DivisionStrategy::ReciprocalOnce => {
            let one = b.push(Instr::Const(1.0));
            let recip = b.push(Instr::Div {
                num: one,
                den,
                iterations: cfg.theta,
            });
            wf.iter().map(|&r| b.push(Instr::Mul(r, recip))).collect()
        }
        DivisionStrategy::PerElement => wf
            .iter()
            .map(|&r| {
                b.push(Instr::Div {
                    num: r,
                    den,
                    iterations: cfg.theta,
                })
            })
            .collect(),
    };
    if f == Functionality::Normalization {
        for r in x {
            b.output(r);
        }
        return Ok(b.build());
    }
    for row in &transform {
        let mut acc: Option<Reg> = None;
        for (&m, &xj) in row.iter().zip(&x) {
            let p = b.push(Instr::Mul(m, xj));
            acc = Some(match acc {
                None => p,
                Some(a) => b.push(Instr::Add(a, p)),
            });
        }
        b.output(acc.unwrap());
    }
    Ok(b.build())
}

/// Executes the scenario with the metered protocol and compares every
/// counter with [`run_scenario`].
pub fn verify_against_meter(cfg: &BenchConfig, s: Scenario) -> Result<bool, BenchError> {
    let expected = run_scenario(cfg, s)?;
    let Some(mode) = s.security() else {
        return Ok(true);
    };
    let program = scenario_program(cfg, s, seed::derive(0x5eed, cfg.n as u64 * 1000 + cfg.d as u64))?;
    let pcfg = ProtocolConfig {
        codec: FixedPointCodec::new(cfg.k, cfg.frac_bits).map_err(MpcError::from)?,
        mode,
        seed: 1,
    };
    let out = run_protocol(&program, &pcfg)?;
    Ok(out.report.same_counters(&expected))
}

/// Runs the weighted-aggregation-plus-normalization pipeline on explicit
/// client features and weights, returning the opened `x` and its cost.
pub fn secure_normalized_aggregate(
    features: &[Vec<f64>],
    weights: &[f64],
    cfg: &BenchConfig,
    seed: u64,
) -> Result<(Vec<f64>, CostReport), BenchError> {
    let codec = FixedPointCodec::new(cfg.k, cfg.frac_bits).map_err(MpcError::from)?;
    let mut s = Session::new(codec, SecurityMode::Passive, seed);
    let d = cfg.d;
    let mut values = Vec::with_capacity(features.len() * (d + 1));
    for (f, &w) in features.iter().zip(weights) {
        values.extend_from_slice(f);
        values.push(w);
    }
    let shared = s.input_many(&values)?;
    let mut lhs = Vec::with_capacity(features.len() * d);
    let mut rhs = Vec::with_capacity(features.len() * d);
    for client in shared.chunks(d + 1) {
        for fij in &client[..d] {
            lhs.push(client[d].clone());
            rhs.push(fij.clone());
        }
    }
    let products = s.fixed_mul_many(&lhs, &rhs)?;
    let mut wf: Vec<_> = products[..d].to_vec();
    for client in products[d..].chunks(d) {
        for (acc, p) in wf.iter_mut().zip(client) {
            *acc = s.add(acc, p);
        }
    }
    let mut total = shared[d].clone();
    for client in shared.chunks(d + 1).skip(1) {
        total = s.add(&total, &client[d]);
    }
    let den = s.add_const(&total, STABILIZER)?;
    let x = match cfg.strategy {
        DivisionStrategy::ReciprocalOnce => {
            let r = s.reciprocal(&den, cfg.theta)?;
            let rs = vec![r; d];
            s.fixed_mul_many(&wf, &rs)?
        }
        DivisionStrategy::PerElement => s.div_many(&wf, &den, cfg.theta)?,
    };
    let opened = s.open_many(&x)?;
    Ok((opened, s.report()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRanges {
    pub n_min: usize,
    pub n_max: usize,
    pub dims: Vec<usize>,
    pub k: u32,
    pub theta: u32,
    pub frac_bits: u32,
    pub strategy: DivisionStrategy,
}

impl Default for SweepRanges {
    fn default() -> Self {
        Self {
            n_min: 1,
            n_max: 30,
            dims: vec![64, 784],
            k: 64,
            theta: 5,
            frac_bits: 20,
            strategy: DivisionStrategy::ReciprocalOnce,
        }
    }
}

/// One CSV row; field order is the CSV column order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepRow {
    pub scenario: u8,
    pub n: usize,
    pub d: usize,
    pub k: u32,
    pub theta: u32,
    pub strategy: DivisionStrategy,
    pub client_to_node_bits: u64,
    pub node_to_node_bits: u64,
    pub reconstruction_bits: u64,
    pub total_bits: u64,
}

pub const CSV_HEADER: &str =
    "scenario,n,d,k,theta,strategy,client_to_node_bits,node_to_node_bits,reconstruction_bits,total_bits";

/// Every (scenario, d, n) grid point, scenario-major.
pub fn sweep(ranges: &SweepRanges) -> Result<Vec<SweepRow>, BenchError> {
    if ranges.n_min == 0 || ranges.n_min > ranges.n_max {
        return Err(BenchError::InvalidConfig(format!(
            "client range {}..={} is empty or starts at 0",
            ranges.n_min, ranges.n_max
        )));
    }
    let mut rows = Vec::new();
    for s in Scenario::ALL {
        for &d in &ranges.dims {
            for n in ranges.n_min..=ranges.n_max {
                let cfg = BenchConfig {
                    n,
                    d,
                    k: ranges.k,
                    theta: ranges.theta,
                    frac_bits: ranges.frac_bits,
                    strategy: ranges.strategy,
                };
                let r = run_scenario(&cfg, s)?;
                rows.push(SweepRow {
                    scenario: s.id(),
                    n,
                    d,
                    k: cfg.k,
                    theta: cfg.theta,
                    strategy: cfg.strategy,
                    client_to_node_bits: r.client_to_node_bits,
                    node_to_node_bits: r.node_to_node_bits,
                    reconstruction_bits: r.reconstruction_bits,
                    total_bits: r.total_bits,
                });
            }
        }
    }
    Ok(rows)
}

pub fn write_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(CSV_HEADER.split(','))?;
    }
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
