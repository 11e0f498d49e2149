use std::collections::HashMap;

use super::{Gate, GateOp, NetGroup, NetId, Netlist};

/// A signal during construction: a known constant or a net.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Bit {
    Zero,
    One,
    Net(NetId),
}

impl Bit {
    pub fn from_bool(b: bool) -> Bit {
        if b {
            Bit::One
        } else {
            Bit::Zero
        }
    }
}

/// Incremental netlist construction with constant folding and structural
/// hashing. Constants never reach the gate list; [`Builder::finish`] removes
/// dead gates and levels the rest.
pub struct Builder {
    name: String,
    inputs: Vec<NetGroup>,
    state: Option<NetGroup>,
    next_net: NetId,
    gates: Vec<Gate>,
    memo: HashMap<(GateOp, NetId, NetId), NetId>,
    inverse: HashMap<NetId, NetId>,
}

impl Builder {
    pub fn new(name: &str) -> Builder {
        Builder {
            name: name.to_owned(),
            inputs: Vec::new(),
            state: None,
            next_net: 0,
            gates: Vec::new(),
            memo: HashMap::new(),
            inverse: HashMap::new(),
        }
    }

    fn declare(&mut self, name: &str, width: usize) -> NetGroup {
        assert!(self.gates.is_empty(), "declare all inputs before adding gates");
        let nets: Vec<NetId> = (self.next_net..self.next_net + width as NetId).collect();
        self.next_net += width as NetId;
        NetGroup { name: name.to_owned(), nets }
    }

    pub fn input(&mut self, name: &str, width: usize) -> Vec<Bit> {
        assert!(self.state.is_none(), "inputs precede the state group");
        let group = self.declare(name, width);
        let bits = group.nets.iter().map(|&n| Bit::Net(n)).collect();
        self.inputs.push(group);
        bits
    }

    pub fn state_input(&mut self, name: &str, width: usize) -> Vec<Bit> {
        assert!(self.state.is_none(), "at most one state group");
        let group = self.declare(name, width);
        let bits = group.nets.iter().map(|&n| Bit::Net(n)).collect();
        self.state = Some(group);
        bits
    }

    fn gate(&mut self, op: GateOp, a: NetId, b: NetId) -> NetId {
        let key = if op == GateOp::Not1 { (op, a, a) } else { (op, a.min(b), a.max(b)) };
        if let Some(&n) = self.memo.get(&key) {
            return n;
        }
        let output = self.next_net;
        self.next_net += 1;
        self.gates.push(Gate { op, inputs: [key.1, key.2], output });
        self.memo.insert(key, output);
        output
    }

    pub fn not(&mut self, a: Bit) -> Bit {
        match a {
            Bit::Zero => Bit::One,
            Bit::One => Bit::Zero,
            Bit::Net(n) => {
                if let Some(&m) = self.inverse.get(&n) {
                    return Bit::Net(m);
                }
                let m = self.gate(GateOp::Not1, n, n);
                self.inverse.insert(n, m);
                self.inverse.insert(m, n);
                Bit::Net(m)
            }
        }
    }

    pub fn and(&mut self, a: Bit, b: Bit) -> Bit {
        match (a, b) {
            (Bit::Zero, _) | (_, Bit::Zero) => Bit::Zero,
            (Bit::One, x) | (x, Bit::One) => x,
            (Bit::Net(x), Bit::Net(y)) if x == y => a,
            (Bit::Net(x), Bit::Net(y)) if self.inverse.get(&x) == Some(&y) => Bit::Zero,
            (Bit::Net(x), Bit::Net(y)) => Bit::Net(self.gate(GateOp::And2, x, y)),
        }
    }

    pub fn or(&mut self, a: Bit, b: Bit) -> Bit {
        match (a, b) {
            (Bit::One, _) | (_, Bit::One) => Bit::One,
            (Bit::Zero, x) | (x, Bit::Zero) => x,
            (Bit::Net(x), Bit::Net(y)) if x == y => a,
            (Bit::Net(x), Bit::Net(y)) if self.inverse.get(&x) == Some(&y) => Bit::One,
            (Bit::Net(x), Bit::Net(y)) => Bit::Net(self.gate(GateOp::Or2, x, y)),
        }
    }

    pub fn xor(&mut self, a: Bit, b: Bit) -> Bit {
        match (a, b) {
            (Bit::Zero, x) | (x, Bit::Zero) => x,
            (Bit::One, x) | (x, Bit::One) => self.not(x),
            (Bit::Net(x), Bit::Net(y)) if x == y => Bit::Zero,
            (Bit::Net(x), Bit::Net(y)) if self.inverse.get(&x) == Some(&y) => Bit::One,
            (Bit::Net(x), Bit::Net(y)) => Bit::Net(self.gate(GateOp::Xor2, x, y)),
        }
    }

    /// `sel ? when_one : when_zero`
    pub fn mux(&mut self, sel: Bit, when_one: Bit, when_zero: Bit) -> Bit {
        let diff = self.xor(when_one, when_zero);
        let pick = self.and(sel, diff);
        self.xor(when_zero, pick)
    }

    pub fn full_add(&mut self, a: Bit, b: Bit, cin: Bit) -> (Bit, Bit) {
        let ab = self.xor(a, b);
        let sum = self.xor(ab, cin);
        let g = self.and(a, b);
        let p = self.and(ab, cin);
        (sum, self.or(g, p))
    }

    /// Ripple-carry addition over `max(len)` bits; returns sum and carry-out.
    pub fn add(&mut self, a: &[Bit], b: &[Bit], cin: Bit) -> (Vec<Bit>, Bit) {
        let width = a.len().max(b.len());
        let mut carry = cin;
        let mut sum = Vec::with_capacity(width);
        for i in 0..width {
            let x = a.get(i).copied().unwrap_or(Bit::Zero);
            let y = b.get(i).copied().unwrap_or(Bit::Zero);
            let (s, c) = self.full_add(x, y, carry);
            sum.push(s);
            carry = c;
        }
        (sum, carry)
    }

    /// `a - b` over `width` bits (two's complement); returns the difference
    /// and a borrow flag that is one iff `a < b`.
    pub fn sub(&mut self, a: &[Bit], b: &[Bit], width: usize) -> (Vec<Bit>, Bit) {
        let a = resize(a, width);
        let nb: Vec<Bit> = resize(b, width).into_iter().map(|x| self.not(x)).collect();
        let (diff, carry) = self.add(&a, &nb, Bit::One);
        let borrow = self.not(carry);
        (diff, borrow)
    }

    pub fn mux_word(&mut self, sel: Bit, when_one: &[Bit], when_zero: &[Bit]) -> Vec<Bit> {
        let width = when_one.len().max(when_zero.len());
        let (x, y) = (resize(when_one, width), resize(when_zero, width));
        x.into_iter().zip(y).map(|(p, q)| self.mux(sel, p, q)).collect()
    }

    /// Unsigned array multiplier: AND partial products summed row by row.
    pub fn mul(&mut self, a: &[Bit], b: &[Bit]) -> Vec<Bit> {
        let width = a.len() + b.len();
        let mut acc = vec![Bit::Zero; width];
        for (i, &bi) in b.iter().enumerate() {
            let row: Vec<Bit> = a.iter().map(|&aj| self.and(aj, bi)).collect();
            let (sum, carry) = self.add(&acc[i..i + a.len()], &row, Bit::Zero);
            acc[i..i + a.len()].copy_from_slice(&sum);
            if i + a.len() < width {
                acc[i + a.len()] = carry;
            }
        }
        acc
    }

    /// Multiplies by a constant via shift-and-add over its set bits,
    /// truncated to `width` bits.
    pub fn mul_const(&mut self, a: &[Bit], k: u64, width: usize) -> Vec<Bit> {
        let mut acc = vec![Bit::Zero; width];
        for s in (0..64).filter(|s| k >> s & 1 == 1) {
            let shifted = shl(a, s, width);
            acc = self.add(&acc, &shifted, Bit::Zero).0;
        }
        acc
    }

    /// Materializes `bits` as dedicated gate outputs, drops unreachable gates
    /// and sorts the remainder by logic level.
    pub fn finish(mut self, outputs: Vec<(&str, Vec<Bit>)>) -> Netlist {
        let input_nets = self.next_net as usize - self.gates.len();
        let mut claimed = vec![false; self.gates.len()];
        let mut out_groups = Vec::with_capacity(outputs.len());
        for (name, bits) in outputs {
            let mut nets = Vec::with_capacity(bits.len());
            for bit in bits {
                nets.push(self.dedicated(bit, input_nets, &mut claimed));
            }
            out_groups.push(NetGroup { name: name.to_owned(), nets });
        }
        self.compact(input_nets, out_groups)
    }

    // Output nets must be written by a gate of their own.
    fn dedicated(&mut self, bit: Bit, input_nets: usize, claimed: &mut Vec<bool>) -> NetId {
        if let Bit::Net(n) = bit {
            let idx = n as usize;
            if idx >= input_nets && !claimed[idx - input_nets] {
                claimed[idx - input_nets] = true;
                return n;
            }
        }
        let anchor = self.inputs.first().or(self.state.as_ref()).and_then(|g| g.nets.first()).copied();
        let (op, a, b) = match bit {
            Bit::Net(n) => (GateOp::Or2, n, n),
            Bit::Zero => {
                let a = anchor.expect("constant outputs need at least one input net");
                (GateOp::Xor2, a, a)
            }
            Bit::One => {
                let a = anchor.expect("constant outputs need at least one input net");
                let na = match self.not(Bit::Net(a)) {
                    Bit::Net(m) => m,
                    _ => unreachable!(),
                };
                claimed.resize(self.gates.len(), false);
                (GateOp::Or2, a, na)
            }
        };
        let output = self.next_net;
        self.next_net += 1;
        self.gates.push(Gate { op, inputs: [a, b], output });
        claimed.push(true);
        output
    }

    fn compact(self, input_nets: usize, mut outputs: Vec<NetGroup>) -> Netlist {
        let gate_of = |n: NetId| (n as usize).checked_sub(input_nets);
        let mut live = vec![false; self.gates.len()];
        let mut stack: Vec<usize> = outputs.iter().flat_map(|g| g.nets.iter()).filter_map(|&n| gate_of(n)).collect();
        while let Some(i) = stack.pop() {
            if std::mem::replace(&mut live[i], true) {
                continue;
            }
            stack.extend(self.gates[i].operands().iter().filter_map(|&n| gate_of(n)));
        }

        // Gates were appended in dependency order, so one forward pass
        // assigns every level.
        let mut level = vec![0u32; self.gates.len()];
        for (i, g) in self.gates.iter().enumerate() {
            level[i] = 1 + g.operands().iter().filter_map(|&n| gate_of(n).map(|j| level[j])).max().unwrap_or(0);
        }
        let mut order: Vec<usize> = (0..self.gates.len()).filter(|&i| live[i]).collect();
        order.sort_by_key(|&i| level[i]);

        let mut renamed: Vec<NetId> = (0..self.next_net).collect();
        for (pos, &i) in order.iter().enumerate() {
            renamed[input_nets + i] = (input_nets + pos) as NetId;
        }
        let gates = order
            .iter()
            .map(|&i| {
                let g = self.gates[i];
                Gate {
                    op: g.op,
                    inputs: [renamed[g.inputs[0] as usize], renamed[g.inputs[1] as usize]],
                    output: renamed[g.output as usize],
                }
            })
            .collect();
        let levels = order.iter().map(|&i| level[i]).collect();
        for group in &mut outputs {
            for n in &mut group.nets {
                *n = renamed[*n as usize];
            }
        }
        let netlist = Netlist { name: self.name, inputs: self.inputs, state: self.state, outputs, gates, levels };
        debug_assert_eq!(netlist.validate(), Ok(()));
        netlist
    }
}

pub fn resize(bits: &[Bit], width: usize) -> Vec<Bit> {
    let mut v: Vec<Bit> = bits.iter().copied().take(width).collect();
    v.resize(width, Bit::Zero);
    v
}

pub fn shl(bits: &[Bit], by: usize, width: usize) -> Vec<Bit> {
    let mut v = vec![Bit::Zero; by.min(width)];
    v.extend(bits.iter().copied());
    resize(&v, width)
}

pub fn constant(value: u64, width: usize) -> Vec<Bit> {
    (0..width).map(|i| Bit::from_bool(value >> i & 1 == 1)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folding_keeps_constants_out_of_the_gate_list() {
        let mut b = Builder::new("fold");
        let x = b.input("x", 4);
        let k = constant(0b1010, 4);
        let (s, _) = b.add(&x, &k, Bit::Zero);
        let y = b.xor(x[0], x[0]);
        assert_eq!(y, Bit::Zero);
        let n = b.finish(vec![("s", s)]);
        assert!(n.validate().is_ok());
        // x + 0b1010 over 4 bits: bit 0 passes through and needs a buffer.
        assert!(n.gates().len() < 16);
    }

    #[test]
    fn leveled_order_is_sorted_by_level() {
        let mut b = Builder::new("lv");
        let x = b.input("x", 8);
        let y = b.input("y", 8);
        let p = b.mul(&x, &y);
        let n = b.finish(vec![("p", p)]);
        assert!(n.levels().windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(n.validate(), Ok(()));
    }
}
