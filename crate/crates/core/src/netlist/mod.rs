//! Gate-level boolean programs.
//!
//! A [`Netlist`] is a single-assignment list of two-input AND/OR/XOR gates and
//! inverters, kept in leveled order so that evaluating the list front to back
//! never reads a net before it is written. Every net carries a 32-bit word, so
//! one pass over the gate list runs 32 independent copies of the circuit.

mod builder;
mod circuits;
mod program;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use builder::{Bit, Builder};
pub use circuits::{
    build_butterfly, build_mod_adder, build_mod_multiplier, build_mod_subtractor, build_pointwise_accumulator,
    build_pointwise_multiplier, CircuitKind,
};
pub use program::{emit_program, interpret_program, Program};

pub type NetId = u32;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NetlistError {
    #[error("net `{0}` is not bound")]
    UnboundNet(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("group `{group}` expects {expected} words, got {got}")]
    Width { group: String, expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GateOp {
    #[serde(rename = "AND2")]
    And2,
    #[serde(rename = "OR2")]
    Or2,
    #[serde(rename = "XOR2")]
    Xor2,
    #[serde(rename = "NOT1")]
    Not1,
}

impl GateOp {
    pub const ALL: [GateOp; 4] = [GateOp::And2, GateOp::Or2, GateOp::Xor2, GateOp::Not1];

    pub fn mnemonic(self) -> &'static str {
        match self {
            GateOp::And2 => "AND2",
            GateOp::Or2 => "OR2",
            GateOp::Xor2 => "XOR2",
            GateOp::Not1 => "NOT1",
        }
    }

    pub fn from_mnemonic(s: &str) -> Option<GateOp> {
        GateOp::ALL.into_iter().find(|op| op.mnemonic() == s)
    }

    pub fn arity(self) -> usize {
        match self {
            GateOp::Not1 => 1,
            _ => 2,
        }
    }

    #[inline(always)]
    pub fn apply(self, a: u32, b: u32) -> u32 {
        match self {
            GateOp::And2 => a & b,
            GateOp::Or2 => a | b,
            GateOp::Xor2 => a ^ b,
            GateOp::Not1 => !a,
        }
    }
}

impl fmt::Display for GateOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.mnemonic())
    }
}

/// One gate. For `NOT1` both operand slots hold the same net.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Gate {
    pub op: GateOp,
    pub inputs: [NetId; 2],
    pub output: NetId,
}

impl Gate {
    pub fn operands(&self) -> &[NetId] {
        &self.inputs[..self.op.arity()]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetGroup {
    pub name: String,
    pub nets: Vec<NetId>,
}

impl NetGroup {
    pub fn width(&self) -> usize {
        self.nets.len()
    }
}

/// Forces the output word of one gate during one evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GateOverride {
    pub gate: usize,
    pub word: u32,
}

/// A leveled gate list with named input, state and output groups.
///
/// Net ids `0..input_net_count()` belong to the input groups followed by the
/// state group; gate `i` writes net `input_net_count() + i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Netlist {
    name: String,
    inputs: Vec<NetGroup>,
    state: Option<NetGroup>,
    outputs: Vec<NetGroup>,
    gates: Vec<Gate>,
    levels: Vec<u32>,
}

impl Netlist {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn inputs(&self) -> &[NetGroup] {
        &self.inputs
    }

    pub fn state(&self) -> Option<&NetGroup> {
        self.state.as_ref()
    }

    pub fn outputs(&self) -> &[NetGroup] {
        &self.outputs
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    /// Logic depth of each gate, parallel to [`Netlist::gates`].
    pub fn levels(&self) -> &[u32] {
        &self.levels
    }

    pub fn depth(&self) -> u32 {
        self.levels.last().copied().unwrap_or(0)
    }

    pub fn input_net_count(&self) -> usize {
        self.bound_groups().map(NetGroup::width).sum()
    }

    pub fn net_count(&self) -> usize {
        self.input_net_count() + self.gates.len()
    }

    /// Input groups then the state group, in net-id order.
    pub fn bound_groups(&self) -> impl Iterator<Item = &NetGroup> {
        self.inputs.iter().chain(self.state.iter())
    }

    /// Checks single assignment and leveled order.
    pub fn validate(&self) -> Result<(), String> {
        let base = self.input_net_count();
        let mut next = 0u32;
        for group in self.bound_groups() {
            for &n in &group.nets {
                if n != next {
                    return Err(format!("input net {n} of `{}` out of order", group.name));
                }
                next += 1;
            }
        }
        for (i, g) in self.gates.iter().enumerate() {
            if g.output as usize != base + i {
                return Err(format!("gate {i} writes net {} out of sequence", g.output));
            }
            if g.op == GateOp::Not1 && g.inputs[0] != g.inputs[1] {
                return Err(format!("NOT1 gate {i} has two distinct operands"));
            }
            if let Some(&bad) = g.operands().iter().find(|&&n| n >= g.output) {
                return Err(format!("gate {i} reads net {bad} before it is written"));
            }
        }
        for group in &self.outputs {
            if let Some(&bad) = group.nets.iter().find(|&&n| n as usize >= self.net_count()) {
                return Err(format!("output `{}` refers to missing net {bad}", group.name));
            }
        }
        Ok(())
    }

    /// Runs the gate list over `values`, whose first `input_net_count()`
    /// entries must already hold the input words.
    pub fn run(&self, values: &mut Vec<u32>, fault: Option<GateOverride>) {
        let base = self.input_net_count();
        values.resize(self.net_count(), 0);
        match fault {
            Some(GateOverride { gate, word }) if gate < self.gates.len() => {
                run_gates(&self.gates[..gate], values);
                values[base + gate] = word;
                run_gates(&self.gates[gate + 1..], values);
            }
            _ => run_gates(&self.gates, values),
        }
    }

    /// Evaluates on 32-word blocks. `inputs` follow [`Netlist::bound_groups`]
    /// order; `outputs` follow [`Netlist::outputs`].
    pub fn eval_words(
        &self,
        inputs: &[&[u32]],
        outputs: &mut [&mut [u32]],
        scratch: &mut Vec<u32>,
        fault: Option<GateOverride>,
    ) {
        scratch.clear();
        for (group, words) in self.bound_groups().zip(inputs) {
            debug_assert_eq!(group.width(), words.len());
            scratch.extend_from_slice(words);
        }
        debug_assert_eq!(scratch.len(), self.input_net_count());
        self.run(scratch, fault);
        for (group, out) in self.outputs.iter().zip(outputs.iter_mut()) {
            for (slot, &net) in out.iter_mut().zip(&group.nets) {
                *slot = scratch[net as usize];
            }
        }
    }

    /// Evaluates against a named environment, returning it extended with
    /// every output group.
    pub fn evaluate(&self, env: &WordEnv) -> Result<WordEnv, NetlistError> {
        let mut values = Vec::with_capacity(self.net_count());
        for group in self.bound_groups() {
            let words = env.get(&group.name).ok_or_else(|| NetlistError::UnboundNet(format!("{}[0]", group.name)))?;
            if words.len() < group.width() {
                return Err(NetlistError::UnboundNet(format!("{}[{}]", group.name, words.len())));
            }
            values.extend_from_slice(&words[..group.width()]);
        }
        self.run(&mut values, None);
        let mut out = env.clone();
        for group in &self.outputs {
            out.bind(&group.name, group.nets.iter().map(|&n| values[n as usize]).collect());
        }
        Ok(out)
    }
}

#[inline]
fn run_gates(gates: &[Gate], values: &mut [u32]) {
    for g in gates {
        let a = values[g.inputs[0] as usize];
        let b = values[g.inputs[1] as usize];
        values[g.output as usize] = g.op.apply(a, b);
    }
}

/// Gate counts by operation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateHistogram {
    #[serde(rename = "AND2")]
    pub and2: usize,
    #[serde(rename = "OR2")]
    pub or2: usize,
    #[serde(rename = "XOR2")]
    pub xor2: usize,
    #[serde(rename = "NOT1")]
    pub not1: usize,
}

impl GateHistogram {
    pub fn total(&self) -> usize {
        self.and2 + self.or2 + self.xor2 + self.not1
    }

    pub fn count(&self, op: GateOp) -> usize {
        match op {
            GateOp::And2 => self.and2,
            GateOp::Or2 => self.or2,
            GateOp::Xor2 => self.xor2,
            GateOp::Not1 => self.not1,
        }
    }
}

pub fn gate_histogram(netlist: &Netlist) -> GateHistogram {
    let mut h = GateHistogram::default();
    for g in netlist.gates() {
        match g.op {
            GateOp::And2 => h.and2 += 1,
            GateOp::Or2 => h.or2 += 1,
            GateOp::Xor2 => h.xor2 += 1,
            GateOp::Not1 => h.not1 += 1,
        }
    }
    h
}

/// Named word groups; each word holds one bit of 32 parallel slices.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WordEnv {
    groups: BTreeMap<String, Vec<u32>>,
}

impl WordEnv {
    pub fn new() -> WordEnv {
        WordEnv::default()
    }

    pub fn with(mut self, name: &str, words: Vec<u32>) -> WordEnv {
        self.bind(name, words);
        self
    }

    pub fn bind(&mut self, name: &str, words: Vec<u32>) {
        self.groups.insert(name.to_owned(), words);
    }

    pub fn get(&self, name: &str) -> Option<&[u32]> {
        self.groups.get(name).map(Vec::as_slice)
    }

    pub fn groups(&self) -> impl Iterator<Item = (&str, &[u32])> {
        self.groups.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }
}
