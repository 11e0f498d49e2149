//! Generators for the modular-arithmetic circuits over `q = 2^23 - 2^13 + 1`.
//!
//! Operands travel in 32-net groups; only the low 23 nets of each operand are
//! read, and output nets 23..31 are constant zero.

use std::fmt;
use std::str::FromStr;

use super::builder::{constant, resize, shl, Bit, Builder};
use super::Netlist;
use crate::field::{fq_add, fq_mul, fq_sub, Q};

pub const GROUP_WIDTH: usize = 32;
const VALUE_BITS: usize = 23;

/// `floor(2^46 / q)`.
pub const BARRETT_MU: u64 = (1u64 << 46) / Q as u64;

fn operand(b: &mut Builder, name: &str) -> Vec<Bit> {
    let word = b.input(name, GROUP_WIDTH);
    word[..VALUE_BITS].to_vec()
}

fn widen(bits: &[Bit]) -> Vec<Bit> {
    resize(bits, GROUP_WIDTH)
}

/// `(x + y) mod q` by conditional subtraction.
pub(crate) fn mod_add(b: &mut Builder, x: &[Bit], y: &[Bit]) -> Vec<Bit> {
    let (mut sum, carry) = b.add(x, y, Bit::Zero);
    sum.push(carry);
    let (reduced, borrow) = b.sub(&sum, &constant(Q as u64, VALUE_BITS + 1), VALUE_BITS + 1);
    let out = b.mux_word(borrow, &sum, &reduced);
    out[..VALUE_BITS].to_vec()
}

/// `(x - y) mod q` by conditional addition.
pub(crate) fn mod_sub(b: &mut Builder, x: &[Bit], y: &[Bit]) -> Vec<Bit> {
    let (diff, borrow) = b.sub(x, y, VALUE_BITS);
    let (wrapped, _) = b.add(&diff, &constant(Q as u64, VALUE_BITS), Bit::Zero);
    b.mux_word(borrow, &wrapped, &diff)
}

/// `r - q` if that does not borrow, else `r`.
fn reduce_once(b: &mut Builder, r: &[Bit]) -> Vec<Bit> {
    let (d, borrow) = b.sub(r, &constant(Q as u64, r.len()), r.len());
    b.mux_word(borrow, r, &d)
}

/// `(x * y) mod q`: array multiplier followed by Barrett reduction with
/// `k = 46`, `mu = floor(2^46 / q)` and two correction steps.
pub(crate) fn mod_mul(b: &mut Builder, x: &[Bit], y: &[Bit]) -> Vec<Bit> {
    let product = b.mul(x, y);
    debug_assert_eq!(product.len(), 2 * VALUE_BITS);
    // quotient estimate: ((x >> 22) * mu) >> 24
    let q1 = &product[VALUE_BITS - 1..];
    let q2 = b.mul_const(q1, BARRETT_MU, 48);
    let q3 = q2[VALUE_BITS + 1..].to_vec();
    // q3 * q mod 2^25, with q = 2^23 - 2^13 + 1
    const R: usize = VALUE_BITS + 2;
    let (t, _) = b.add(&resize(&q3, R), &shl(&q3, 23, R), Bit::Zero);
    let (q3q, _) = b.sub(&t, &shl(&q3, 13, R), R);
    let (r, _) = b.sub(&product[..R], &q3q, R);
    let r = reduce_once(b, &r);
    let r = reduce_once(b, &r);
    r[..VALUE_BITS].to_vec()
}

pub fn build_mod_adder() -> Netlist {
    let mut b = Builder::new("modadd");
    let x = operand(&mut b, "a");
    let y = operand(&mut b, "b");
    let s = mod_add(&mut b, &x, &y);
    b.finish(vec![("out", widen(&s))])
}

pub fn build_mod_subtractor() -> Netlist {
    let mut b = Builder::new("modsub");
    let x = operand(&mut b, "a");
    let y = operand(&mut b, "b");
    let d = mod_sub(&mut b, &x, &y);
    b.finish(vec![("out", widen(&d))])
}

pub fn build_mod_multiplier() -> Netlist {
    let mut b = Builder::new("modmul");
    let x = operand(&mut b, "a");
    let y = operand(&mut b, "b");
    let p = mod_mul(&mut b, &x, &y);
    b.finish(vec![("out", widen(&p))])
}

/// `out1 = in1 + in2*w`, `out2 = in1 - in2*w` (mod q).
pub fn build_butterfly() -> Netlist {
    let mut b = Builder::new("butterfly");
    let in1 = operand(&mut b, "in1");
    let in2 = operand(&mut b, "in2");
    let w = operand(&mut b, "w");
    let t = mod_mul(&mut b, &in2, &w);
    let out1 = mod_add(&mut b, &in1, &t);
    let out2 = mod_sub(&mut b, &in1, &t);
    b.finish(vec![("out1", widen(&out1)), ("out2", widen(&out2))])
}

/// Coefficient-wise product `out = in1 * in2 mod q`.
pub fn build_pointwise_multiplier() -> Netlist {
    let mut b = Builder::new("pointwisemultiplier");
    let x = operand(&mut b, "in1");
    let y = operand(&mut b, "in2");
    let p = mod_mul(&mut b, &x, &y);
    b.finish(vec![("out", widen(&p))])
}

/// `state_next = (state + in) mod q`; the caller threads the state group.
pub fn build_pointwise_accumulator() -> Netlist {
    let mut b = Builder::new("pointwiseaccumulator");
    let x = operand(&mut b, "in");
    let state = b.state_input("state", GROUP_WIDTH);
    let s = mod_add(&mut b, &x, &state[..VALUE_BITS]);
    b.finish(vec![("state_next", widen(&s))])
}

/// The circuits this crate knows how to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CircuitKind {
    ModAdder,
    ModSubtractor,
    ModMultiplier,
    Butterfly,
    PointwiseMultiplier,
    PointwiseAccumulator,
}

impl CircuitKind {
    pub const ALL: [CircuitKind; 6] = [
        CircuitKind::ModAdder,
        CircuitKind::ModSubtractor,
        CircuitKind::ModMultiplier,
        CircuitKind::Butterfly,
        CircuitKind::PointwiseMultiplier,
        CircuitKind::PointwiseAccumulator,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CircuitKind::ModAdder => "modadd",
            CircuitKind::ModSubtractor => "modsub",
            CircuitKind::ModMultiplier => "modmul",
            CircuitKind::Butterfly => "butterfly",
            CircuitKind::PointwiseMultiplier => "pointwise",
            CircuitKind::PointwiseAccumulator => "accumulator",
        }
    }

    pub fn build(self) -> Netlist {
        match self {
            CircuitKind::ModAdder => build_mod_adder(),
            CircuitKind::ModSubtractor => build_mod_subtractor(),
            CircuitKind::ModMultiplier => build_mod_multiplier(),
            CircuitKind::Butterfly => build_butterfly(),
            CircuitKind::PointwiseMultiplier => build_pointwise_multiplier(),
            CircuitKind::PointwiseAccumulator => build_pointwise_accumulator(),
        }
    }

    /// Scalar semantics of one slice: arguments in bound-group order
    /// (inputs, then state), results in output-group order.
    pub fn scalar(self, args: &[u32]) -> Vec<u32> {
        match self {
            CircuitKind::ModAdder | CircuitKind::PointwiseAccumulator => vec![fq_add(args[0], args[1])],
            CircuitKind::ModSubtractor => vec![fq_sub(args[0], args[1])],
            CircuitKind::ModMultiplier | CircuitKind::PointwiseMultiplier => {
                vec![fq_mul(args[0], args[1])]
            }
            CircuitKind::Butterfly => {
                let t = fq_mul(args[1], args[2]);
                vec![fq_add(args[0], t), fq_sub(args[0], t)]
            }
        }
    }
}

impl fmt::Display for CircuitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CircuitKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CircuitKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| format!("unknown circuit `{s}`"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::WordEnv;
    use crate::slicing::{transpose, SliceBlock};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // Same Barrett steps on plain integers; used to confirm the remainder
    // before correction stays below 3q.
    fn barrett_scalar(x: u64) -> (u64, u64) {
        let q3 = ((x >> 22) * BARRETT_MU) >> 24;
        let r = x - q3 * Q as u64;
        (r, r % Q as u64)
    }

    #[test]
    fn barrett_constant_and_bound() {
        assert_eq!(BARRETT_MU, 0x80_2007);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let extremes = [0u64, 1, (Q as u64 - 1).pow(2), ((1u64 << 23) - 1).pow(2)];
        for x in extremes.into_iter().chain((0..100_000).map(|_| rng.gen_range(0..1u64 << 46))) {
            let (r, reduced) = barrett_scalar(x);
            assert!(r < 3 * Q as u64, "x = {x}");
            assert_eq!(reduced, x % Q as u64);
        }
    }

    fn eval_scalar_slices(n: &Netlist, args: &[[u32; 32]]) -> Vec<[u32; 32]> {
        let mut env = WordEnv::new();
        for (g, a) in n.bound_groups().zip(args) {
            env.bind(&g.name, transpose(&SliceBlock(*a)).0.to_vec());
        }
        let out = n.evaluate(&env).unwrap();
        n.outputs()
            .iter()
            .map(|g| {
                let words: [u32; 32] = out.get(&g.name).unwrap().try_into().unwrap();
                transpose(&SliceBlock(words)).0
            })
            .collect()
    }

    fn splat_args(kind: CircuitKind, vals: &[u32]) -> Vec<u32> {
        let n = kind.build();
        let args: Vec<[u32; 32]> = vals.iter().map(|&v| [v; 32]).collect();
        eval_scalar_slices(&n, &args).into_iter().map(|w| w[0]).collect()
    }

    #[test]
    fn named_examples() {
        use CircuitKind::*;
        assert_eq!(splat_args(ModAdder, &[0, 0]), vec![0]);
        assert_eq!(splat_args(ModAdder, &[Q - 1, 1]), vec![0]);
        assert_eq!(splat_args(ModSubtractor, &[12345, 12345]), vec![0]);
        assert_eq!(splat_args(ModSubtractor, &[0, 1]), vec![8_380_416]);
        assert_eq!(splat_args(ModMultiplier, &[1, 777]), vec![777]);
        assert_eq!(splat_args(ModMultiplier, &[Q - 1, Q - 1]), vec![1]);
        assert_eq!(splat_args(PointwiseMultiplier, &[Q - 1, Q - 1]), vec![1]);
        assert_eq!(splat_args(Butterfly, &[1, 1, 1]), vec![2, 0]);
        assert_eq!(splat_args(Butterfly, &[0, 0, 4242]), vec![0, 0]);
        assert_eq!(splat_args(PointwiseAccumulator, &[99, 0]), vec![99]);
    }

    #[test]
    fn accumulator_threads_state() {
        let n = build_pointwise_accumulator();
        let x = 5_000_000;
        let once = eval_scalar_slices(&n, &[[x; 32], [0; 32]])[0];
        let twice = eval_scalar_slices(&n, &[[x; 32], once])[0];
        assert_eq!(twice[7], fq_add(x, x));
    }

    #[test]
    fn random_slices_match_scalar_semantics() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for kind in CircuitKind::ALL {
            let n = kind.build();
            assert_eq!(n.validate(), Ok(()));
            for _ in 0..50 {
                let args: Vec<[u32; 32]> =
                    n.bound_groups().map(|_| std::array::from_fn(|_| rng.gen_range(0..Q))).collect();
                let got = eval_scalar_slices(&n, &args);
                for s in 0..32 {
                    let scalar_args: Vec<u32> = args.iter().map(|a| a[s]).collect();
                    let want = kind.scalar(&scalar_args);
                    for (o, w) in got.iter().zip(&want) {
                        assert_eq!(o[s], *w, "{kind} slice {s} args {scalar_args:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn io_groups_are_32_wide() {
        for kind in CircuitKind::ALL {
            let n = kind.build();
            assert!(n.bound_groups().chain(n.outputs()).all(|g| g.width() == GROUP_WIDTH));
        }
    }
}
