//! Bit-sliced negacyclic NTT over `Z_q[x]/(x^256 + 1)`, `q = 8380417`, built
//! from generated gate-level circuits, with a dual-redundant variant and a
//! fault-injection simulator.

pub mod cli;
pub mod engine;
pub mod faultsim;
pub mod field;
pub mod netlist;
pub mod slicing;
