//! Bit-sliced transforms and multiplications over the generated circuits.

mod pipeline;

use std::sync::OnceLock;

use thiserror::Error;

use crate::field::{FieldParams, Poly, N};
use crate::netlist::{build_butterfly, build_pointwise_accumulator, build_pointwise_multiplier, Netlist};
use crate::slicing::{gen_twiddle_tables, redundancy_check, Direction, Layout, SliceBlock};

pub use pipeline::{BufferId, CircuitId, Circuits, Control, NoHook, Op, Pipeline, SlicedPolyState, Slot, TraceHook};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Output of a redundant computation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtectedResult<T = Poly> {
    pub value: T,
    pub fault_detected: bool,
}

/// Circuits plus the four transform pipelines. Read-only once built.
pub struct Engine {
    butterfly: Netlist,
    multiplier: Netlist,
    accumulator: Netlist,
    pipelines: [Pipeline; 4],
}

impl Engine {
    pub fn new() -> Engine {
        let params = FieldParams::get();
        let pipelines = [
            (Layout::Plain, Direction::Forward),
            (Layout::Plain, Direction::Inverse),
            (Layout::Redundant, Direction::Forward),
            (Layout::Redundant, Direction::Inverse),
        ]
        .map(|(layout, dir)| Pipeline::new(&gen_twiddle_tables(params, dir, layout)));
        Engine {
            butterfly: build_butterfly(),
            multiplier: build_pointwise_multiplier(),
            accumulator: build_pointwise_accumulator(),
            pipelines,
        }
    }

    /// Process-wide instance.
    pub fn shared() -> &'static Engine {
        static ENGINE: OnceLock<Engine> = OnceLock::new();
        ENGINE.get_or_init(Engine::new)
    }

    pub fn circuits(&self) -> Circuits<'_> {
        Circuits { butterfly: &self.butterfly, multiplier: &self.multiplier }
    }

    pub fn netlist(&self, id: CircuitId) -> &Netlist {
        match id {
            CircuitId::Butterfly => &self.butterfly,
            CircuitId::PointwiseMultiplier => &self.multiplier,
        }
    }

    pub fn pipeline(&self, layout: Layout, direction: Direction) -> &Pipeline {
        let i = match (layout, direction) {
            (Layout::Plain, Direction::Forward) => 0,
            (Layout::Plain, Direction::Inverse) => 1,
            (Layout::Redundant, Direction::Forward) => 2,
            (Layout::Redundant, Direction::Inverse) => 3,
        };
        &self.pipelines[i]
    }

    pub fn transform(
        &self,
        layout: Layout,
        direction: Direction,
        poly: &Poly,
        hook: &mut dyn TraceHook,
    ) -> (Poly, bool) {
        self.pipeline(layout, direction).run(&self.circuits(), poly, hook)
    }

    pub fn ntt256(&self, a: &Poly) -> Poly {
        self.transform(Layout::Plain, Direction::Forward, a, &mut NoHook).0
    }

    pub fn intt256(&self, a_hat: &Poly) -> Poly {
        self.transform(Layout::Plain, Direction::Inverse, a_hat, &mut NoHook).0
    }

    pub fn pointwise_mul(&self, a_hat: &Poly, b_hat: &Poly) -> Poly {
        self.pointwise_in(Layout::Plain, a_hat, b_hat).0
    }

    pub fn poly_mul(&self, a: &Poly, b: &Poly) -> Poly {
        self.poly_mul_in(Layout::Plain, a, b).0
    }

    pub fn matvec_mul(&self, m: &[Vec<Poly>], v: &[Poly]) -> Result<Vec<Poly>, EngineError> {
        let (rows, _) = self.matvec_in(Layout::Plain, m, v)?;
        Ok(rows)
    }

    pub fn protected_ntt256(&self, a: &Poly) -> ProtectedResult {
        let (value, fault_detected) = self.transform(Layout::Redundant, Direction::Forward, a, &mut NoHook);
        ProtectedResult { value, fault_detected }
    }

    pub fn protected_intt256(&self, a_hat: &Poly) -> ProtectedResult {
        let (value, fault_detected) = self.transform(Layout::Redundant, Direction::Inverse, a_hat, &mut NoHook);
        ProtectedResult { value, fault_detected }
    }

    pub fn protected_pointwise_mul(&self, a_hat: &Poly, b_hat: &Poly) -> ProtectedResult {
        let (value, fault_detected) = self.pointwise_in(Layout::Redundant, a_hat, b_hat);
        ProtectedResult { value, fault_detected }
    }

    pub fn protected_poly_mul(&self, a: &Poly, b: &Poly) -> ProtectedResult {
        let (value, fault_detected) = self.poly_mul_in(Layout::Redundant, a, b);
        ProtectedResult { value, fault_detected }
    }

    pub fn protected_matvec_mul(&self, m: &[Vec<Poly>], v: &[Poly]) -> Result<ProtectedResult<Vec<Poly>>, EngineError> {
        let (value, fault_detected) = self.matvec_in(Layout::Redundant, m, v)?;
        Ok(ProtectedResult { value, fault_detected })
    }

    fn pointwise_in(&self, layout: Layout, a: &Poly, b: &Poly) -> (Poly, bool) {
        let (x, y) = (slice_groups(layout, a), slice_groups(layout, b));
        let mut scratch = Vec::new();
        let out: Vec<SliceBlock> = x
            .iter()
            .zip(&y)
            .map(|(x, y)| {
                let mut o = SliceBlock::ZERO;
                self.multiplier.eval_words(&[&x.0, &y.0], &mut [&mut o.0], &mut scratch, None);
                o
            })
            .collect();
        unslice_groups(layout, &out)
    }

    fn poly_mul_in(&self, layout: Layout, a: &Poly, b: &Poly) -> (Poly, bool) {
        let (a_hat, d1) = self.transform(layout, Direction::Forward, a, &mut NoHook);
        let (b_hat, d2) = self.transform(layout, Direction::Forward, b, &mut NoHook);
        let (c_hat, d3) = self.pointwise_in(layout, &a_hat, &b_hat);
        let (c, d4) = self.transform(layout, Direction::Inverse, &c_hat, &mut NoHook);
        (c, d1 | d2 | d3 | d4)
    }

    fn matvec_in(&self, layout: Layout, m: &[Vec<Poly>], v: &[Poly]) -> Result<(Vec<Poly>, bool), EngineError> {
        if m.is_empty() {
            return Err(EngineError::DimensionMismatch("matrix has no rows".into()));
        }
        if let Some((r, row)) = m.iter().enumerate().find(|(_, row)| row.len() != v.len()) {
            return Err(EngineError::DimensionMismatch(format!(
                "row {r} has {} entries, vector has {}",
                row.len(),
                v.len()
            )));
        }
        let v_sliced: Vec<Vec<SliceBlock>> = v.iter().map(|p| slice_groups(layout, p)).collect();
        let mut scratch = Vec::new();
        let mut detected = false;
        let mut rows = Vec::with_capacity(m.len());
        for row in m {
            let mut state = vec![SliceBlock::ZERO; N / layout.lanes()];
            for (entry, vs) in row.iter().zip(&v_sliced) {
                let ms = slice_groups(layout, entry);
                for ((st, x), y) in state.iter_mut().zip(&ms).zip(vs) {
                    let mut prod = SliceBlock::ZERO;
                    self.multiplier.eval_words(&[&x.0, &y.0], &mut [&mut prod.0], &mut scratch, None);
                    let mut next = SliceBlock::ZERO;
                    self.accumulator.eval_words(&[&prod.0, &st.0], &mut [&mut next.0], &mut scratch, None);
                    *st = next;
                }
            }
            let (acc, d1) = unslice_groups(layout, &state);
            let (out, d2) = self.transform(layout, Direction::Inverse, &acc, &mut NoHook);
            detected |= d1 | d2;
            rows.push(out);
        }
        Ok((rows, detected))
    }
}

impl Default for Engine {
    fn default() -> Self {
        Engine::new()
    }
}

/// Natural-order groups of `lanes()` coefficients, one block each.
fn slice_groups(layout: Layout, p: &Poly) -> Vec<SliceBlock> {
    p.coeffs().chunks(layout.lanes()).map(|c| layout.encode(c)).collect()
}

fn unslice_groups(layout: Layout, blocks: &[SliceBlock]) -> (Poly, bool) {
    let detected = layout == Layout::Redundant && blocks.iter().any(|b| redundancy_check(&b.0));
    let vals: Vec<u32> = blocks.iter().flat_map(|b| layout.decode(b)).collect();
    (Poly::from_fn(|i| vals[i]), detected)
}
