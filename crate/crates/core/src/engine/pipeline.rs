use std::fmt;

use serde::{Deserialize, Serialize};

use crate::field::{Poly, N};
use crate::netlist::{GateOverride, Netlist};
use crate::slicing::{
    bit_reversal_permute, redundancy_check, slice_shuffle, Direction, Layout, Segment, Side, SliceBlock,
    StageShuffleParams, TwiddleTables, WORDS,
};

/// The four working buffers of a transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BufferId {
    TransIn1,
    TransIn2,
    TransOut1,
    TransOut2,
}

impl BufferId {
    pub const ALL: [BufferId; 4] = [BufferId::TransIn1, BufferId::TransIn2, BufferId::TransOut1, BufferId::TransOut2];

    pub fn name(self) -> &'static str {
        match self {
            BufferId::TransIn1 => "trans_in1",
            BufferId::TransIn2 => "trans_in2",
            BufferId::TransOut1 => "trans_out1",
            BufferId::TransOut2 => "trans_out2",
        }
    }

    fn input(side: Side) -> BufferId {
        match side {
            Side::First => BufferId::TransIn1,
            Side::Second => BufferId::TransIn2,
        }
    }

    fn output(side: Side) -> BufferId {
        match side {
            Side::First => BufferId::TransOut1,
            Side::Second => BufferId::TransOut2,
        }
    }
}

impl fmt::Display for BufferId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Working buffers of one transform, `blocks x 32` words each.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlicedPolyState {
    layout: Layout,
    buffers: [Vec<u32>; 4],
}

impl SlicedPolyState {
    pub fn new(layout: Layout) -> SlicedPolyState {
        let len = layout.blocks() * WORDS;
        SlicedPolyState { layout, buffers: std::array::from_fn(|_| vec![0; len]) }
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn block_count(&self) -> usize {
        self.layout.blocks()
    }

    pub fn buffer(&self, id: BufferId) -> &[u32] {
        &self.buffers[id as usize]
    }

    pub fn buffer_mut(&mut self, id: BufferId) -> &mut [u32] {
        &mut self.buffers[id as usize]
    }

    pub fn block(&self, id: BufferId, block: usize) -> [u32; WORDS] {
        self.buffers[id as usize][block * WORDS..(block + 1) * WORDS].try_into().unwrap()
    }

    fn set_block(&mut self, id: BufferId, block: usize, words: &[u32; WORDS]) {
        self.buffers[id as usize][block * WORDS..(block + 1) * WORDS].copy_from_slice(words);
    }
}

/// A circuit slot in an [`Op`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CircuitId {
    Butterfly,
    PointwiseMultiplier,
}

/// Address of a 32-word block in the working buffers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Slot {
    pub buffer: BufferId,
    pub block: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Op {
    /// In-place multiply of one block by a table block.
    Scale {
        at: Slot,
        table: usize,
    },
    Butterfly {
        u: Slot,
        v: Slot,
        out_u: Slot,
        out_v: Slot,
        table: usize,
    },
    /// Regroups `trans_out1/2` of one block into `trans_in1/2`.
    Shuffle {
        block: usize,
        params: StageShuffleParams,
    },
    /// `trans_out1/2` into `trans_in1/2`, every block.
    Copy,
}

impl Op {
    pub fn circuit(&self) -> Option<CircuitId> {
        match self {
            Op::Scale { .. } => Some(CircuitId::PointwiseMultiplier),
            Op::Butterfly { .. } => Some(CircuitId::Butterfly),
            _ => None,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Op::Scale { .. } => "pointwisemultiplier",
            Op::Butterfly { .. } => "butterflyCompute",
            Op::Shuffle { .. } => "shuffle",
            Op::Copy => "copy",
        }
    }
}

/// What the engine should do with the next operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Run,
    Skip,
    RunWithGateFault(GateOverride),
    /// Stop before this operation; the buffers are left as they are.
    Halt,
}

/// Interception point between operations.
///
/// `before_op(i, ..)` is called before operation `i` and once more with
/// `i == ops.len()` after the last one, so hook `i` sees the buffers produced
/// by operations `0..i`.
pub trait TraceHook {
    fn before_op(&mut self, index: usize, op: Option<&Op>, state: &mut SlicedPolyState) -> Control;
}

pub struct NoHook;

impl TraceHook for NoHook {
    fn before_op(&mut self, _: usize, _: Option<&Op>, _: &mut SlicedPolyState) -> Control {
        Control::Run
    }
}

impl<F: FnMut(usize, Option<&Op>, &mut SlicedPolyState) -> Control> TraceHook for F {
    fn before_op(&mut self, index: usize, op: Option<&Op>, state: &mut SlicedPolyState) -> Control {
        self(index, op, state)
    }
}

/// The circuits a pipeline evaluates.
pub struct Circuits<'a> {
    pub butterfly: &'a Netlist,
    pub multiplier: &'a Netlist,
}

/// One fixed transform: load, a straight-line list of operations, unload.
#[derive(Debug, Clone)]
pub struct Pipeline {
    layout: Layout,
    direction: Direction,
    tables: Vec<SliceBlock>,
    ops: Vec<Op>,
}

impl Pipeline {
    pub fn new(tables: &TwiddleTables) -> Pipeline {
        let layout = tables.layout;
        let blocks = layout.blocks();
        let mut consts: Vec<SliceBlock> = Vec::new();
        let mut ops = Vec::new();
        let mut push_table = |b: &SliceBlock| {
            consts.push(*b);
            consts.len() - 1
        };

        let scale_ops = |push: &mut dyn FnMut(&SliceBlock) -> usize, ops: &mut Vec<Op>, out: bool| {
            for block in 0..blocks {
                for side in [Side::First, Side::Second] {
                    let buffer = if out { BufferId::output(side) } else { BufferId::input(side) };
                    let table = push(&tables.scale(side)[block]);
                    ops.push(Op::Scale { at: Slot { buffer, block }, table });
                }
            }
        };

        if tables.direction == Direction::Forward {
            scale_ops(&mut push_table, &mut ops, false);
        }

        let local: Vec<usize> = tables.local.iter().map(&mut push_table).collect();
        let stages = local.len();
        for block in 0..blocks {
            for (s, &table) in local.iter().enumerate() {
                ops.push(Op::Butterfly {
                    u: Slot { buffer: BufferId::TransIn1, block },
                    v: Slot { buffer: BufferId::TransIn2, block },
                    out_u: Slot { buffer: BufferId::TransOut1, block },
                    out_v: Slot { buffer: BufferId::TransOut2, block },
                    table,
                });
                if s + 1 < stages {
                    ops.push(Op::Shuffle { block, params: StageShuffleParams::for_stage(s as u32) });
                }
            }
        }

        for merge in &tables.merges {
            ops.push(Op::Copy);
            for call in &merge.calls {
                let table = push_table(&call.twiddle);
                let slot = |seg: Segment, out: bool| Slot {
                    buffer: if out { BufferId::output(seg.side) } else { BufferId::input(seg.side) },
                    block: seg.block,
                };
                ops.push(Op::Butterfly {
                    u: slot(call.u, false),
                    v: slot(call.v, false),
                    out_u: slot(call.u, true),
                    out_v: slot(call.v, true),
                    table,
                });
            }
        }

        if tables.direction == Direction::Inverse {
            scale_ops(&mut push_table, &mut ops, true);
        }

        Pipeline { layout, direction: tables.direction, tables: consts, ops }
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn ops(&self) -> &[Op] {
        &self.ops
    }

    /// Number of trace hooks, `ops().len() + 1`.
    pub fn hook_count(&self) -> usize {
        self.ops.len() + 1
    }

    pub fn count(&self, circuit: CircuitId) -> usize {
        self.ops.iter().filter(|op| op.circuit() == Some(circuit)).count()
    }

    /// Bit-reverses, splits into butterfly operands and transposes.
    pub fn load(&self, poly: &Poly) -> SlicedPolyState {
        let layout = self.layout;
        let b = bit_reversal_permute(poly);
        let mut state = SlicedPolyState::new(layout);
        for block in 0..layout.blocks() {
            for side in [Side::First, Side::Second] {
                let seg = Segment { side, block };
                let vals: Vec<u32> = (0..layout.lanes()).map(|p| b.coeffs()[seg.input_index(layout, p)]).collect();
                state.set_block(BufferId::input(side), block, &layout.encode(&vals).0);
            }
        }
        state
    }

    /// Redundancy check over the output buffers, then reverse transpose.
    pub fn unload(&self, state: &SlicedPolyState) -> (Poly, bool) {
        let layout = self.layout;
        let detected = layout == Layout::Redundant
            && (redundancy_check(state.buffer(BufferId::TransOut1))
                || redundancy_check(state.buffer(BufferId::TransOut2)));
        let mut coeffs = [0u32; N];
        for block in 0..layout.blocks() {
            for side in [Side::First, Side::Second] {
                let seg = Segment { side, block };
                let vals = layout.decode(&SliceBlock(state.block(BufferId::output(side), block)));
                let base = seg.base(layout);
                coeffs[base..base + layout.lanes()].copy_from_slice(&vals);
            }
        }
        // A faulted slice can hold any 32-bit word; it is read as a residue.
        (Poly::from_fn(|i| coeffs[i]), detected)
    }

    /// Runs operations `start..` with `hook` consulted before each. Returns
    /// the hook index at which the hook halted, if it did.
    pub fn execute_from(
        &self,
        circuits: &Circuits<'_>,
        state: &mut SlicedPolyState,
        start: usize,
        hook: &mut dyn TraceHook,
    ) -> Option<usize> {
        let mut scratch = Vec::new();
        for index in start..self.ops.len() {
            let op = &self.ops[index];
            match hook.before_op(index, Some(op), state) {
                Control::Run => self.apply(circuits, op, state, &mut scratch, None),
                Control::Skip => {}
                Control::RunWithGateFault(f) => self.apply(circuits, op, state, &mut scratch, Some(f)),
                Control::Halt => return Some(index),
            }
        }
        match hook.before_op(self.ops.len(), None, state) {
            Control::Halt => Some(self.ops.len()),
            _ => None,
        }
    }

    pub fn run(&self, circuits: &Circuits<'_>, poly: &Poly, hook: &mut dyn TraceHook) -> (Poly, bool) {
        let mut state = self.load(poly);
        self.execute_from(circuits, &mut state, 0, hook);
        self.unload(&state)
    }

    fn apply(
        &self,
        circuits: &Circuits<'_>,
        op: &Op,
        state: &mut SlicedPolyState,
        scratch: &mut Vec<u32>,
        fault: Option<GateOverride>,
    ) {
        match *op {
            Op::Scale { at, table } => {
                let x = state.block(at.buffer, at.block);
                let mut out = [0u32; WORDS];
                circuits.multiplier.eval_words(&[&x, &self.tables[table].0], &mut [&mut out], scratch, fault);
                state.set_block(at.buffer, at.block, &out);
            }
            Op::Butterfly { u, v, out_u, out_v, table } => {
                let x = state.block(u.buffer, u.block);
                let y = state.block(v.buffer, v.block);
                let (mut o1, mut o2) = ([0u32; WORDS], [0u32; WORDS]);
                circuits.butterfly.eval_words(
                    &[&x, &y, &self.tables[table].0],
                    &mut [&mut o1, &mut o2],
                    scratch,
                    fault,
                );
                state.set_block(out_u.buffer, out_u.block, &o1);
                state.set_block(out_v.buffer, out_v.block, &o2);
            }
            Op::Shuffle { block, params } => {
                let o1 = state.block(BufferId::TransOut1, block);
                let o2 = state.block(BufferId::TransOut2, block);
                let mut i1 = [0u32; WORDS];
                let mut i2 = [0u32; WORDS];
                for w in 0..WORDS {
                    (i1[w], i2[w]) = slice_shuffle(o1[w], o2[w], &params);
                }
                state.set_block(BufferId::TransIn1, block, &i1);
                state.set_block(BufferId::TransIn2, block, &i2);
            }
            Op::Copy => {
                let [in1, in2, out1, out2] = &mut state.buffers;
                in1.copy_from_slice(out1);
                in2.copy_from_slice(out2);
            }
        }
    }
}
