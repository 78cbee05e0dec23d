use serde::{Deserialize, Serialize};

use super::meter::{CostReport, SecurityMode};
use super::session::{Session, Shared};
use super::MpcError;
use crate::ring::FixedPointCodec;

/// Register index. Inputs come first, then dealt values, then one register
/// per instruction in program order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Reg(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Instr {
    /// Trivially shared public constant.
    Const(f64),
    Add(Reg, Reg),
    Sub(Reg, Reg),
    AddConst(Reg, f64),
    /// Public integer scaling, local.
    ScaleInt(Reg, i64),
    /// Public real scaling with truncation.
    MulConst(Reg, f64),
    /// Ring product without truncation (result at scale `2^(2F)`).
    MulRing(Reg, Reg),
    Trunc(Reg),
    /// Fixed-point product.
    Mul(Reg, Reg),
    Div { num: Reg, den: Reg, iterations: u32 },
}

impl Instr {
    fn operands(&self) -> Vec<Reg> {
        match *self {
            Instr::Const(_) => vec![],
            Instr::AddConst(a, _) | Instr::ScaleInt(a, _) | Instr::MulConst(a, _) | Instr::Trunc(a) => vec![a],
            Instr::Add(a, b) | Instr::Sub(a, b) | Instr::MulRing(a, b) | Instr::Mul(a, b) => vec![a, b],
            Instr::Div { num, den, .. } => vec![num, den],
        }
    }
}

/// A straight-line secure computation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Program {
    /// Client secrets, shared at run time (`6k` bits each).
    pub inputs: Vec<f64>,
    /// Values dealt to the nodes during setup, not charged.
    pub dealt: Vec<f64>,
    pub instrs: Vec<Instr>,
    /// Registers opened at the end (`3k` bits each).
    pub outputs: Vec<Reg>,
}

impl Program {
    pub fn validate(&self) -> Result<(), MpcError> {
        let mut defined = self.inputs.len() + self.dealt.len();
        for (pc, instr) in self.instrs.iter().enumerate() {
            if let Some(bad) = instr.operands().into_iter().find(|r| r.0 >= defined) {
                return Err(MpcError::InvalidProgram(format!(
                    "instruction {pc} reads undefined register {}",
                    bad.0
                )));
            }
            if let Instr::Div { iterations: 0, .. } = instr {
                return Err(MpcError::InvalidProgram(format!(
                    "instruction {pc} divides with zero iterations"
                )));
            }
            defined += 1;
        }
        if let Some(bad) = self.outputs.iter().find(|r| r.0 >= defined) {
            return Err(MpcError::InvalidProgram(format!(
                "output references undefined register {}",
                bad.0
            )));
        }
        Ok(())
    }

    pub fn register_count(&self) -> usize {
        self.inputs.len() + self.dealt.len() + self.instrs.len()
    }
}

/// Incremental construction with register bookkeeping.
///
/// All inputs and dealt values must be declared before the first
/// instruction.
#[derive(Debug, Default)]
pub struct ProgramBuilder {
    program: Program,
}

impl ProgramBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn input(&mut self, v: f64) -> Reg {
        assert!(
            self.program.instrs.is_empty() && self.program.dealt.is_empty(),
            "inputs must precede dealt values and instructions"
        );
        self.program.inputs.push(v);
        Reg(self.program.inputs.len() - 1)
    }

    pub fn dealt(&mut self, v: f64) -> Reg {
        assert!(self.program.instrs.is_empty(), "dealt values must precede instructions");
        self.program.dealt.push(v);
        Reg(self.program.inputs.len() + self.program.dealt.len() - 1)
    }

    pub fn push(&mut self, instr: Instr) -> Reg {
        self.program.instrs.push(instr);
        Reg(self.program.register_count() - 1)
    }

    pub fn output(&mut self, r: Reg) {
        self.program.outputs.push(r);
    }

    pub fn build(self) -> Program {
        self.program
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub codec: FixedPointCodec,
    pub mode: SecurityMode,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolOutput {
    pub outputs: Vec<f64>,
    pub report: CostReport,
}

/// Shares the inputs, runs every instruction, opens the outputs.
pub fn run_protocol(program: &Program, cfg: &ProtocolConfig) -> Result<ProtocolOutput, MpcError> {
    program.validate()?;
    let mut s = Session::new(cfg.codec, cfg.mode, cfg.seed);
    let mut regs: Vec<Shared> = Vec::with_capacity(program.register_count());
    if !program.inputs.is_empty() {
        regs.extend(s.input_many(&program.inputs)?);
    }
    for &v in &program.dealt {
        regs.push(s.deal(v)?);
    }
    for instr in &program.instrs {
        let r = |reg: Reg| &regs[reg.0];
        let next = match *instr {
            Instr::Const(c) => s.constant(c)?,
            Instr::Add(a, b) => s.add(r(a), r(b)),
            Instr::Sub(a, b) => s.sub(r(a), r(b)),
            Instr::AddConst(a, c) => s.add_const(r(a), c)?,
            Instr::ScaleInt(a, c) => s.scale_int(r(a), c),
            Instr::MulConst(a, c) => {
                let x = r(a).clone();
                s.mul_const(&x, c)?
            }
            Instr::MulRing(a, b) => {
                let (x, y) = (r(a).clone(), r(b).clone());
                s.mul(&x, &y)?
            }
            Instr::Trunc(a) => {
                let x = r(a).clone();
                s.truncate(&x)?
            }
            Instr::Mul(a, b) => {
                let (x, y) = (r(a).clone(), r(b).clone());
                s.fixed_mul(&x, &y)?
            }
            Instr::Div { num, den, iterations } => {
                let (x, y) = (r(num).clone(), r(den).clone());
                s.div(&x, &y, iterations)?
            }
        };
        regs.push(next);
    }
    let opened: Vec<Shared> = program.outputs.iter().map(|r| regs[r.0].clone()).collect();
    let outputs = if opened.is_empty() {
        Vec::new()
    } else {
        s.open_many(&opened)?
    };
    Ok(ProtocolOutput {
        outputs,
        report: s.report(),
    })
}
