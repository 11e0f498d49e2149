//! Fault injection into the transform pipelines and outcome classification.

mod campaign;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{BufferId, CircuitId, Control, Engine, NoHook, Op, Pipeline, SlicedPolyState};
use crate::field::Poly;
use crate::netlist::GateOverride;
use crate::slicing::{Direction, Layout};

pub use campaign::{
    run_campaign, run_campaign_with, CampaignConfig, CampaignReport, Execution, SiteStrategy, SummaryRow, TrialRecord,
    CRASH_NOTE,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FaultError {
    #[error("invalid fault site: {0}")]
    InvalidSite(String),
    #[error("invalid campaign config: {0}")]
    InvalidConfig(String),
}

/// Which transform a fault is injected into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    #[default]
    Ntt,
    Intt,
    NttUnprotected,
    InttUnprotected,
}

impl Target {
    pub fn layout(self) -> Layout {
        match self {
            Target::Ntt | Target::Intt => Layout::Redundant,
            Target::NttUnprotected | Target::InttUnprotected => Layout::Plain,
        }
    }

    pub fn direction(self) -> Direction {
        match self {
            Target::Ntt | Target::NttUnprotected => Direction::Forward,
            Target::Intt | Target::InttUnprotected => Direction::Inverse,
        }
    }

    pub fn pipeline(self, engine: &Engine) -> &Pipeline {
        engine.pipeline(self.layout(), self.direction())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultModel {
    BitFlip,
    StuckAt0,
    StuckAt1,
    SkipOp,
    WordCorrupt,
}

impl FaultModel {
    pub fn name(self) -> &'static str {
        match self {
            FaultModel::BitFlip => "bit_flip",
            FaultModel::StuckAt0 => "stuck_at_0",
            FaultModel::StuckAt1 => "stuck_at_1",
            FaultModel::SkipOp => "skip_op",
            FaultModel::WordCorrupt => "word_corrupt",
        }
    }
}

/// One fault: a model, the trace hook it fires at, and its site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum FaultSpec {
    BitFlip {
        time: usize,
        buffer: BufferId,
        word: usize,
        bit: u32,
    },
    WordCorrupt {
        time: usize,
        buffer: BufferId,
        word: usize,
        pattern: u32,
    },
    #[serde(rename = "stuck_at_0")]
    StuckAt0 {
        time: usize,
        netlist: CircuitId,
        gate: usize,
    },
    #[serde(rename = "stuck_at_1")]
    StuckAt1 {
        time: usize,
        netlist: CircuitId,
        gate: usize,
    },
    SkipOp {
        time: usize,
    },
}

impl FaultSpec {
    pub fn model(&self) -> FaultModel {
        match self {
            FaultSpec::BitFlip { .. } => FaultModel::BitFlip,
            FaultSpec::WordCorrupt { .. } => FaultModel::WordCorrupt,
            FaultSpec::StuckAt0 { .. } => FaultModel::StuckAt0,
            FaultSpec::StuckAt1 { .. } => FaultModel::StuckAt1,
            FaultSpec::SkipOp { .. } => FaultModel::SkipOp,
        }
    }

    pub fn time(&self) -> usize {
        match *self {
            FaultSpec::BitFlip { time, .. }
            | FaultSpec::WordCorrupt { time, .. }
            | FaultSpec::StuckAt0 { time, .. }
            | FaultSpec::StuckAt1 { time, .. }
            | FaultSpec::SkipOp { time } => time,
        }
    }

    /// Two simultaneous flips at bit `b` and `b + 16` of one word.
    pub fn aligned_pair(time: usize, buffer: BufferId, word: usize, bit: u32) -> FaultSpec {
        FaultSpec::WordCorrupt { time, buffer, word, pattern: (1 << bit) | (1 << (bit + 16)) }
    }

    pub fn validate(&self, pipeline: &Pipeline, engine: &Engine) -> Result<(), FaultError> {
        let ops = pipeline.ops();
        let words = pipeline.layout().blocks() * crate::slicing::WORDS;
        let time = self.time();
        match *self {
            FaultSpec::BitFlip { word, bit, .. } => {
                if time > ops.len() {
                    return Err(FaultError::InvalidSite(format!("time {time} beyond hook {}", ops.len())));
                }
                if word >= words || bit >= 32 {
                    return Err(FaultError::InvalidSite(format!("word {word} bit {bit} outside {words}x32")));
                }
            }
            FaultSpec::WordCorrupt { word, .. } => {
                if time > ops.len() {
                    return Err(FaultError::InvalidSite(format!("time {time} beyond hook {}", ops.len())));
                }
                if word >= words {
                    return Err(FaultError::InvalidSite(format!("word {word} outside {words}")));
                }
            }
            FaultSpec::StuckAt0 { netlist, gate, .. } | FaultSpec::StuckAt1 { netlist, gate, .. } => {
                let op =
                    ops.get(time).ok_or_else(|| FaultError::InvalidSite(format!("no operation at time {time}")))?;
                if op.circuit() != Some(netlist) {
                    return Err(FaultError::InvalidSite(format!("operation {time} is {}, not {netlist:?}", op.kind())));
                }
                let gates = engine.netlist(netlist).gates().len();
                if gate >= gates {
                    return Err(FaultError::InvalidSite(format!("gate {gate} outside {gates}")));
                }
            }
            FaultSpec::SkipOp { .. } => {
                if time >= ops.len() {
                    return Err(FaultError::InvalidSite(format!("no operation at time {time}")));
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for FaultSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FaultSpec::BitFlip { time, buffer, word, bit } => write!(f, "bit_flip@{time} {buffer}[{word}].{bit}"),
            FaultSpec::WordCorrupt { time, buffer, word, pattern } => {
                write!(f, "word_corrupt@{time} {buffer}[{word}]^{pattern:#010x}")
            }
            FaultSpec::StuckAt0 { time, netlist, gate } => write!(f, "stuck_at_0@{time} {netlist:?}#{gate}"),
            FaultSpec::StuckAt1 { time, netlist, gate } => write!(f, "stuck_at_1@{time} {netlist:?}#{gate}"),
            FaultSpec::SkipOp { time } => write!(f, "skip_op@{time}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    NoEffect,
    FaultDetected,
    FaultNotDetected,
}

impl Classification {
    pub fn name(self) -> &'static str {
        match self {
            Classification::NoEffect => "no_effect",
            Classification::FaultDetected => "fault_detected",
            Classification::FaultNotDetected => "fault_not_detected",
        }
    }

    pub fn of(output: &Poly, golden: &Poly, detected: bool) -> Classification {
        if detected {
            Classification::FaultDetected
        } else if output == golden {
            Classification::NoEffect
        } else {
            Classification::FaultNotDetected
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FaultOutcome {
    pub classification: Classification,
    /// Undetected, different from golden, and non-zero.
    pub exploitable: bool,
    pub output: Poly,
    pub detected: bool,
}

impl FaultOutcome {
    fn new(output: Poly, detected: bool, golden: &Poly) -> FaultOutcome {
        let classification = Classification::of(&output, golden, detected);
        let exploitable = classification == Classification::FaultNotDetected && !output.is_zero();
        FaultOutcome { classification, exploitable, output, detected }
    }
}

/// Fault-free protected forward transform.
pub fn golden_run(input: &Poly) -> Poly {
    Engine::shared().protected_ntt256(input).value
}

/// Injects `spec` into the protected forward transform of `input`.
pub fn run_with_fault(input: &Poly, spec: &FaultSpec) -> Result<FaultOutcome, FaultError> {
    Simulator::new(Engine::shared(), Target::Ntt, input.clone()).run(spec)
}

/// A golden run of one target and input, kept as per-hook snapshots so a
/// faulty run resumes at the hook it fires at.
pub struct Simulator<'e> {
    engine: &'e Engine,
    pipeline: &'e Pipeline,
    target: Target,
    input: Poly,
    golden: Poly,
    snapshots: Vec<SlicedPolyState>,
}

impl<'e> Simulator<'e> {
    pub fn new(engine: &'e Engine, target: Target, input: Poly) -> Simulator<'e> {
        let pipeline = target.pipeline(engine);
        let mut snapshots = Vec::with_capacity(pipeline.hook_count());
        let mut record = |_: usize, _: Option<&Op>, s: &mut SlicedPolyState| {
            snapshots.push(s.clone());
            Control::Run
        };
        let (golden, detected) = pipeline.run(&engine.circuits(), &input, &mut record);
        assert!(!detected, "fault-free run flagged a fault");
        Simulator { engine, pipeline, target, input, golden, snapshots }
    }

    pub fn target(&self) -> Target {
        self.target
    }

    pub fn input(&self) -> &Poly {
        &self.input
    }

    pub fn golden(&self) -> &Poly {
        &self.golden
    }

    pub fn pipeline(&self) -> &Pipeline {
        self.pipeline
    }

    pub fn run(&self, spec: &FaultSpec) -> Result<FaultOutcome, FaultError> {
        spec.validate(self.pipeline, self.engine)?;
        let time = spec.time();
        let mut state = self.snapshots[time].clone();
        let mut at_fault: Control = Control::Run;
        match *spec {
            FaultSpec::BitFlip { buffer, word, bit, .. } => state.buffer_mut(buffer)[word] ^= 1 << bit,
            FaultSpec::WordCorrupt { buffer, word, pattern, .. } => state.buffer_mut(buffer)[word] ^= pattern,
            FaultSpec::StuckAt0 { gate, .. } => at_fault = Control::RunWithGateFault(GateOverride { gate, word: 0 }),
            FaultSpec::StuckAt1 { gate, .. } => {
                at_fault = Control::RunWithGateFault(GateOverride { gate, word: u32::MAX })
            }
            FaultSpec::SkipOp { .. } => at_fault = Control::Skip,
        }

        // Once the buffers rejoin the golden run the remainder is determined.
        let snapshots = &self.snapshots;
        let mut hook = |i: usize, _: Option<&Op>, s: &mut SlicedPolyState| {
            if i == time {
                at_fault
            } else if *s == snapshots[i] {
                Control::Halt
            } else {
                Control::Run
            }
        };
        let halted = if at_fault == Control::Run && state == snapshots[time] {
            Some(time)
        } else {
            self.pipeline.execute_from(&self.engine.circuits(), &mut state, time, &mut hook)
        };
        if halted.is_some() {
            return Ok(FaultOutcome::new(self.golden.clone(), false, &self.golden));
        }
        let (output, detected) = self.pipeline.unload(&state);
        Ok(FaultOutcome::new(output, detected, &self.golden))
    }

    /// Reference path without snapshots or early exit, for cross-checks.
    pub fn run_full(&self, spec: &FaultSpec) -> Result<FaultOutcome, FaultError> {
        spec.validate(self.pipeline, self.engine)?;
        let time = spec.time();
        let spec = *spec;
        let mut hook = move |i: usize, _: Option<&Op>, s: &mut SlicedPolyState| {
            if i != time {
                return Control::Run;
            }
            match spec {
                FaultSpec::BitFlip { buffer, word, bit, .. } => s.buffer_mut(buffer)[word] ^= 1 << bit,
                FaultSpec::WordCorrupt { buffer, word, pattern, .. } => s.buffer_mut(buffer)[word] ^= pattern,
                FaultSpec::StuckAt0 { gate, .. } => return Control::RunWithGateFault(GateOverride { gate, word: 0 }),
                FaultSpec::StuckAt1 { gate, .. } => {
                    return Control::RunWithGateFault(GateOverride { gate, word: u32::MAX })
                }
                FaultSpec::SkipOp { .. } => return Control::Skip,
            }
            Control::Run
        };
        let (output, detected) = self.pipeline.run(&self.engine.circuits(), &self.input, &mut hook);
        Ok(FaultOutcome::new(output, detected, &self.golden))
    }

    /// Fault-free run through the hook machinery, for checking the snapshots.
    pub fn replay(&self) -> Poly {
        self.pipeline.run(&self.engine.circuits(), &self.input, &mut NoHook).0
    }
}
