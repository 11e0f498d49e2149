//! Bit-sliced data layout: transposition, stage shuffles, bit reversal,
//! redundant packing and the transposed twiddle tables.
//!
//! A [`SliceBlock`] holds 32 coefficients transposed into 32 words: word `i`
//! carries bit `i` of every coefficient, and coefficient `k` lives in bit
//! position `k` of each word. In the redundant layout bit positions 0..16 are
//! the original data slices and 16..32 their copies.

use crate::field::{fq_mul, fq_pow, FieldParams, Poly, LOG_N, N};

pub const WORDS: usize = 32;
pub const HALF: usize = 16;
const HALF_MASK: u32 = 0xFFFF;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct SliceBlock(pub [u32; WORDS]);

impl SliceBlock {
    pub const ZERO: SliceBlock = SliceBlock([0; WORDS]);

    /// Transposes 32 values (one per slice) into bit-sliced form.
    pub fn from_values(values: &[u32; WORDS]) -> SliceBlock {
        transpose(&SliceBlock(*values))
    }

    /// The value carried by each slice.
    pub fn values(&self) -> [u32; WORDS] {
        reverse_transpose(self).0
    }

    pub fn words(&self) -> &[u32; WORDS] {
        &self.0
    }
}

/// Bit-matrix transpose: output word `i`, bit `j` is input word `j`, bit `i`.
///
/// Five rounds of masked swaps; round `j` exchanges the off-diagonal
/// `j x j` sub-blocks of every `2j x 2j` tile.
pub fn transpose(block: &SliceBlock) -> SliceBlock {
    let mut a = block.0;
    let mut width = 16;
    let mut mask = 0x0000_FFFFu32;
    while width != 0 {
        let mut k = 0;
        while k < WORDS {
            for r in k..k + width {
                let t = ((a[r] >> width) ^ a[r + width]) & mask;
                a[r] ^= t << width;
                a[r + width] ^= t;
            }
            k += 2 * width;
        }
        width >>= 1;
        mask ^= mask << width;
    }
    SliceBlock(a)
}

/// Inverse of [`transpose`]; a square bit-matrix transpose is an involution.
pub fn reverse_transpose(block: &SliceBlock) -> SliceBlock {
    transpose(block)
}

/// Reverses the low `bits` bits of `i`.
pub fn bit_reverse(i: usize, bits: u32) -> usize {
    (0..bits).fold(0, |acc, j| acc | ((i >> j) & 1) << (bits - 1 - j))
}

/// `b[i] = a[bit_reverse(i)]` over the low 8 index bits.
pub fn bit_reversal_permute(a: &Poly) -> Poly {
    let c = a.coeffs();
    Poly::from_fn(|i| c[bit_reverse(i, LOG_N)])
}

/// Routing between butterfly stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageShuffleParams {
    pub stage: u32,
    pub mask: u32,
    pub inv_mask: u32,
    pub shift: u32,
}

pub const SHUFFLE_MASKS: [u32; 5] = [0x5555_5555, 0x3333_3333, 0x0F0F_0F0F, 0x00FF_00FF, 0x0000_FFFF];
pub const SHUFFLE_INV_MASKS: [u32; 5] = [0xAAAA_AAAA, 0xCCCC_CCCC, 0xF0F0_F0F0, 0xFF00_FF00, 0xFFFF_0000];

impl StageShuffleParams {
    pub fn for_stage(stage: u32) -> StageShuffleParams {
        assert!(stage < 5, "shuffles exist for stages 0..5");
        StageShuffleParams {
            stage,
            mask: SHUFFLE_MASKS[stage as usize],
            inv_mask: SHUFFLE_INV_MASKS[stage as usize],
            shift: 1 << stage,
        }
    }
}

/// Regroups one word of butterfly outputs into next-stage inputs.
#[inline]
pub fn slice_shuffle(out1: u32, out2: u32, p: &StageShuffleParams) -> (u32, u32) {
    let in1 = (out1 & p.mask) | ((out2 & p.mask) << p.shift);
    let in2 = (out2 & p.inv_mask) | ((out1 & p.inv_mask) >> p.shift);
    (in1, in2)
}

/// A slice block whose upper half mirrors its lower half.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RedundantBlock(pub SliceBlock);

/// Places 16 values in the original slices and copies in the redundant ones.
pub fn pack_redundant(values: &[u32; HALF]) -> RedundantBlock {
    let doubled: [u32; WORDS] = std::array::from_fn(|k| values[k % HALF]);
    RedundantBlock(SliceBlock::from_values(&doubled))
}

pub fn unpack_ods(block: &RedundantBlock) -> [u32; HALF] {
    let v = block.0.values();
    std::array::from_fn(|k| v[k])
}

pub fn unpack_rds(block: &RedundantBlock) -> [u32; HALF] {
    let v = block.0.values();
    std::array::from_fn(|k| v[HALF + k])
}

/// True iff some word's halves disagree.
pub fn redundancy_check(words: &[u32]) -> bool {
    words.iter().any(|&w| ((w >> HALF) ^ w) & HALF_MASK != 0)
}

/// How coefficients map onto slices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Layout {
    /// 32 independent slices per block, four 64-point sub-transforms.
    Plain,
    /// 16 original plus 16 mirrored slices, eight 32-point sub-transforms.
    Redundant,
}

impl Layout {
    /// Distinct butterflies per circuit call.
    pub const fn lanes(self) -> usize {
        match self {
            Layout::Plain => WORDS,
            Layout::Redundant => HALF,
        }
    }

    pub const fn blocks(self) -> usize {
        N / 2 / self.lanes()
    }

    /// Butterfly stages inside one sub-transform.
    pub const fn local_stages(self) -> u32 {
        (2 * self.lanes()).trailing_zeros()
    }

    /// Spreads `lanes()` values over a full block, duplicating when redundant.
    pub fn encode(self, values: &[u32]) -> SliceBlock {
        debug_assert_eq!(values.len(), self.lanes());
        let full: [u32; WORDS] = std::array::from_fn(|k| values[k % self.lanes()]);
        SliceBlock::from_values(&full)
    }

    /// Values of the original slices.
    pub fn decode(self, block: &SliceBlock) -> Vec<u32> {
        block.values()[..self.lanes()].to_vec()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Forward,
    Inverse,
}

/// Which operand side of the butterfly a block belongs to (`in1`/`out1` or
/// `in2`/`out2`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    First,
    Second,
}

/// One 32-word block of a side buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Segment {
    pub side: Side,
    pub block: usize,
}

impl Segment {
    /// Index (in the natural-order output) of the coefficient in slice 0 once
    /// the local stages are done. Slice `p` holds `base + p`.
    pub fn base(self, layout: Layout) -> usize {
        let lanes = layout.lanes();
        2 * lanes * self.block + if self.side == Side::Second { lanes } else { 0 }
    }

    /// Index into the bit-reversed input held by slice `p` before the first
    /// stage.
    pub fn input_index(self, layout: Layout, p: usize) -> usize {
        2 * layout.lanes() * self.block + 2 * p + usize::from(self.side == Side::Second)
    }
}

/// A butterfly call that merges two sub-transforms.
#[derive(Debug, Clone)]
pub struct MergeCall {
    pub u: Segment,
    pub v: Segment,
    pub twiddle: SliceBlock,
}

#[derive(Debug, Clone)]
pub struct MergeStage {
    /// Distance between paired coefficient indices.
    pub span: usize,
    pub calls: Vec<MergeCall>,
}

/// Every precomputed transposed constant one transform needs.
#[derive(Debug, Clone)]
pub struct TwiddleTables {
    pub layout: Layout,
    pub direction: Direction,
    /// One table per local stage, shared by every block.
    pub local: Vec<SliceBlock>,
    pub merges: Vec<MergeStage>,
    /// Per-block scale factors for the first-side segments: powers of psi
    /// applied to the inputs (forward) or `n^-1 psi^-i` applied to the
    /// outputs (inverse).
    pub scale1: Vec<SliceBlock>,
    pub scale2: Vec<SliceBlock>,
}

impl TwiddleTables {
    pub fn scale(&self, side: Side) -> &[SliceBlock] {
        match side {
            Side::First => &self.scale1,
            Side::Second => &self.scale2,
        }
    }

    /// All table blocks, for range and redundancy checks.
    pub fn blocks(&self) -> impl Iterator<Item = &SliceBlock> {
        self.local
            .iter()
            .chain(self.merges.iter().flat_map(|m| m.calls.iter().map(|c| &c.twiddle)))
            .chain(&self.scale1)
            .chain(&self.scale2)
    }
}

/// Exponent `j` of `omega_{2m}^j` used by each lane in each local stage.
///
/// Tracks which coefficient index every lane holds as the stage shuffles
/// route it, so the tables follow directly from the shuffle network. Panics
/// if the network does not implement the decimation-in-time pairing.
pub fn local_schedule(lanes: usize) -> Vec<Vec<usize>> {
    let stages = (2 * lanes).trailing_zeros();
    let mut in1: Vec<usize> = (0..lanes).map(|p| 2 * p).collect();
    let mut in2: Vec<usize> = (0..lanes).map(|p| 2 * p + 1).collect();
    let mut exps = Vec::with_capacity(stages as usize);
    for s in 0..stages {
        let m = 1usize << s;
        let stage: Vec<usize> = (0..lanes)
            .map(|p| {
                assert!(in1[p] & m == 0 && in2[p] == in1[p] + m, "stage {s} lane {p} mispaired");
                in1[p] & (m - 1)
            })
            .collect();
        exps.push(stage);
        if s + 1 < stages {
            let (out1, out2) = (in1.clone(), in2.clone());
            for p in 0..lanes {
                let upper = (p >> s) & 1 == 1;
                in1[p] = if upper { out2[p - m] } else { out1[p] };
                in2[p] = if upper { out2[p] } else { out1[p + m] };
            }
        }
    }
    for p in 0..lanes {
        assert!(in1[p] == p && in2[p] == lanes + p, "sub-transform output out of order");
    }
    exps
}

pub fn gen_twiddle_tables(params: &FieldParams, direction: Direction, layout: Layout) -> TwiddleTables {
    let root = match direction {
        Direction::Forward => params.omega,
        Direction::Inverse => params.omega_inv,
    };
    // omega_{2m}^j = omega^{j * n / 2m}
    let twiddle = |m: usize, j: usize| fq_pow(root, (j * (N / (2 * m))) as u64);
    let lanes = layout.lanes();

    let local = local_schedule(lanes)
        .iter()
        .enumerate()
        .map(|(s, exps)| {
            let vals: Vec<u32> = exps.iter().map(|&j| twiddle(1 << s, j)).collect();
            layout.encode(&vals)
        })
        .collect();

    let segments: Vec<Segment> = (0..layout.blocks())
        .flat_map(|block| [Side::First, Side::Second].map(|side| Segment { side, block }))
        .collect();
    let mut merges = Vec::new();
    let mut span = 2 * lanes;
    while span < N {
        let mut calls: Vec<MergeCall> = segments
            .iter()
            .filter(|u| u.base(layout) & span == 0)
            .map(|&u| {
                let target = u.base(layout) + span;
                let v = *segments.iter().find(|s| s.base(layout) == target).expect("partner segment");
                let offset = u.base(layout) % (2 * span);
                let vals: Vec<u32> = (0..lanes).map(|p| twiddle(span, offset + p)).collect();
                MergeCall { u, v, twiddle: layout.encode(&vals) }
            })
            .collect();
        calls.sort_by_key(|c| c.u.base(layout));
        merges.push(MergeStage { span, calls });
        span *= 2;
    }

    let scale_for = |side: Side| -> Vec<SliceBlock> {
        (0..layout.blocks())
            .map(|block| {
                let seg = Segment { side, block };
                let vals: Vec<u32> = (0..lanes)
                    .map(|p| match direction {
                        Direction::Forward => {
                            let original = bit_reverse(seg.input_index(layout, p), LOG_N);
                            fq_pow(params.psi, original as u64)
                        }
                        Direction::Inverse => {
                            let i = seg.base(layout) + p;
                            fq_mul(params.n_inv, fq_pow(params.psi_inv, i as u64))
                        }
                    })
                    .collect();
                layout.encode(&vals)
            })
            .collect()
    };

    TwiddleTables { layout, direction, local, merges, scale1: scale_for(Side::First), scale2: scale_for(Side::Second) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Q;
    use proptest::prelude::*;

    fn naive_transpose(a: &[u32; 32]) -> [u32; 32] {
        std::array::from_fn(|i| (0..32).fold(0, |w, j| w | ((a[j] >> i) & 1) << j))
    }

    #[test]
    fn transpose_examples() {
        assert_eq!(transpose(&SliceBlock::ZERO), SliceBlock::ZERO);
        let diag = SliceBlock(std::array::from_fn(|i| 1 << i));
        assert_eq!(transpose(&diag), diag);
        let col0 = SliceBlock(std::array::from_fn(|i| i as u32 & 1));
        assert_eq!(transpose(&col0).0[0], 0xAAAA_AAAA);
    }

    #[test]
    fn bit_reverse_examples() {
        assert_eq!(bit_reverse(0, 8), 0);
        assert_eq!(bit_reverse(1, 8), 128);
        assert_eq!(bit_reverse(0b0000_0110, 8), 0b0110_0000);
        let a = Poly::from_fn(|i| i as u32 * 3);
        assert_eq!(bit_reversal_permute(&bit_reversal_permute(&a)), a);
        assert_eq!(bit_reversal_permute(&a).coeffs()[1], a.coeffs()[128]);
    }

    #[test]
    fn shuffle_examples() {
        let p0 = StageShuffleParams::for_stage(0);
        assert_eq!(slice_shuffle(0xAAAA_AAAA, 0x5555_5555, &p0), (0xAAAA_AAAA, 0x5555_5555));
        let p4 = StageShuffleParams::for_stage(4);
        assert_eq!(slice_shuffle(0x0000_FFFF, 0, &p4), (0x0000_FFFF, 0));
        for s in 0..5 {
            let p = StageShuffleParams::for_stage(s);
            assert_eq!(slice_shuffle(0, 0, &p), (0, 0));
            assert_eq!(p.inv_mask, !p.mask);
            assert_eq!(p.shift, 1 << s);
        }
    }

    #[test]
    fn redundancy_examples() {
        let zero = pack_redundant(&[0; HALF]);
        assert_eq!(zero.0, SliceBlock::ZERO);
        let block = pack_redundant(&std::array::from_fn(|i| i as u32));
        assert!(!redundancy_check(&block.0 .0));
        let mut one = block.0 .0;
        one[7] ^= 1 << 3;
        assert!(redundancy_check(&one));
        one[7] ^= 1 << 19;
        assert!(!redundancy_check(&one));
    }

    #[test]
    fn schedules_are_consistent() {
        for lanes in [HALF, WORDS] {
            let exps = local_schedule(lanes);
            assert_eq!(exps.len(), (2 * lanes).trailing_zeros() as usize);
            assert!(exps[0].iter().all(|&j| j == 0));
        }
    }

    #[test]
    fn twiddle_tables_are_canonical() {
        let params = FieldParams::get();
        for layout in [Layout::Plain, Layout::Redundant] {
            for dir in [Direction::Forward, Direction::Inverse] {
                let t = gen_twiddle_tables(params, dir, layout);
                assert_eq!(t.local.len(), layout.local_stages() as usize);
                for b in t.blocks() {
                    assert!(b.values().iter().all(|&v| v < Q));
                    if layout == Layout::Redundant {
                        assert!(!redundancy_check(&b.0));
                    }
                }
                if dir == Direction::Forward {
                    assert!(t.local[0].values().iter().all(|&v| v == 1));
                }
                let calls: usize = t.merges.iter().map(|m| m.calls.len()).sum();
                let expected = match layout {
                    Layout::Plain => 2 * 4,
                    Layout::Redundant => 3 * 8,
                };
                assert_eq!(calls, expected);
            }
        }
    }

    proptest! {
        #[test]
        fn transpose_matches_naive_and_is_involution(words in prop::array::uniform32(any::<u32>())) {
            let b = SliceBlock(words);
            let t = transpose(&b);
            prop_assert_eq!(t.0, naive_transpose(&words));
            prop_assert_eq!(reverse_transpose(&t), b);
        }

        #[test]
        fn shuffle_preserves_popcount(a in any::<u32>(), b in any::<u32>(), s in 0u32..5) {
            let (x, y) = slice_shuffle(a, b, &StageShuffleParams::for_stage(s));
            prop_assert_eq!(x.count_ones() + y.count_ones(), a.count_ones() + b.count_ones());
        }

        #[test]
        fn pack_unpack(values in prop::array::uniform16(0..Q)) {
            let block = pack_redundant(&values);
            prop_assert_eq!(unpack_ods(&block), values);
            prop_assert_eq!(unpack_rds(&block), values);
            prop_assert!(!redundancy_check(&block.0 .0));
        }

        #[test]
        fn single_flip_detected_unless_aligned(
            values in prop::array::uniform16(0..Q),
            word in 0usize..32,
            bit in 0u32..32,
            aligned in any::<bool>(),
        ) {
            let mut w = pack_redundant(&values).0 .0;
            w[word] ^= 1 << bit;
            if aligned {
                w[word] ^= 1 << ((bit + 16) % 32);
            }
            prop_assert_eq!(redundancy_check(&w), !aligned);
        }
    }
}
