//! Straight-line program text for a netlist.
//!
//! ```text
//! # butterfly
//! IN in1 32
//! IN in2 32
//! IN w 32
//! OUT out1 32
//! OUT out2 32
//! NOT1 t0 w[0]
//! AND2 t1 in2[0] w[21]
//! XOR2 out1[3] t7 t9
//! ```
//!
//! Header lines declare groups; every other line is one gate. Nets are
//! `group[index]` or `t<number>`; `#` starts a comment.

use std::collections::HashMap;
use std::fmt::Write as _;

use super::{GateOp, Netlist, NetlistError, WordEnv};

/// Emits one header line per group and one instruction line per gate.
pub fn emit_program(netlist: &Netlist) -> String {
    let mut names: Vec<String> = Vec::with_capacity(netlist.net_count());
    for group in netlist.bound_groups() {
        names.extend((0..group.width()).map(|i| format!("{}[{i}]", group.name)));
    }
    let base = names.len();
    names.extend((0..netlist.gates().len()).map(|i| format!("t{i}")));
    for group in netlist.outputs() {
        for (i, &net) in group.nets.iter().enumerate() {
            names[net as usize] = format!("{}[{i}]", group.name);
        }
    }
    debug_assert!(netlist.outputs().iter().flat_map(|g| &g.nets).all(|&n| n as usize >= base));

    let mut out = String::new();
    let _ = writeln!(out, "# {}", netlist.name());
    for g in netlist.inputs() {
        let _ = writeln!(out, "IN {} {}", g.name, g.width());
    }
    if let Some(g) = netlist.state() {
        let _ = writeln!(out, "STATE {} {}", g.name, g.width());
    }
    for g in netlist.outputs() {
        let _ = writeln!(out, "OUT {} {}", g.name, g.width());
    }
    for gate in netlist.gates() {
        let dst = &names[gate.output as usize];
        match gate.op {
            GateOp::Not1 => {
                let _ = writeln!(out, "NOT1 {dst} {}", names[gate.inputs[0] as usize]);
            }
            op => {
                let _ =
                    writeln!(out, "{op} {dst} {} {}", names[gate.inputs[0] as usize], names[gate.inputs[1] as usize]);
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum GroupKind {
    Input,
    State,
    Output,
}

#[derive(Debug, Clone)]
struct Decl {
    kind: GroupKind,
    name: String,
    width: usize,
    base: usize,
}

#[derive(Debug, Clone)]
struct Instr {
    op: GateOp,
    dst: usize,
    a: usize,
    b: usize,
}

/// A parsed program with every net resolved to a slot index.
#[derive(Debug, Clone)]
pub struct Program {
    decls: Vec<Decl>,
    slots: usize,
    instrs: Vec<Instr>,
}

fn parse_err(line: usize, message: impl Into<String>) -> NetlistError {
    NetlistError::Parse { line, message: message.into() }
}

impl Program {
    pub fn parse(text: &str) -> Result<Program, NetlistError> {
        let mut decls: Vec<Decl> = Vec::new();
        let mut slots = 0usize;
        let mut temps: HashMap<String, usize> = HashMap::new();
        let mut written: Vec<bool> = Vec::new();
        let mut instrs = Vec::new();

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let kind = match fields[0] {
                "IN" => Some(GroupKind::Input),
                "STATE" => Some(GroupKind::State),
                "OUT" => Some(GroupKind::Output),
                _ => None,
            };
            if let Some(kind) = kind {
                if !instrs.is_empty() {
                    return Err(parse_err(line_no, "group declaration after first instruction"));
                }
                let [_, name, width] = fields[..] else {
                    return Err(parse_err(line_no, "expected `<KIND> <group> <width>`"));
                };
                let width: usize = width.parse().map_err(|_| parse_err(line_no, format!("bad width `{width}`")))?;
                if decls.iter().any(|d| d.name == name) {
                    return Err(parse_err(line_no, format!("group `{name}` declared twice")));
                }
                if kind == GroupKind::State && decls.iter().any(|d| d.kind == GroupKind::State) {
                    return Err(parse_err(line_no, "more than one STATE group"));
                }
                decls.push(Decl { kind, name: name.to_owned(), width, base: slots });
                slots += width;
                written.resize(slots, kind != GroupKind::Output);
                continue;
            }

            let op = GateOp::from_mnemonic(fields[0])
                .ok_or_else(|| parse_err(line_no, format!("unknown instruction `{}`", fields[0])))?;
            if fields.len() != 2 + op.arity() {
                return Err(parse_err(line_no, format!("{op} takes {} operands", op.arity())));
            }
            let read = |name: &str| -> Result<usize, NetlistError> {
                let slot = resolve(&decls, &temps, name)
                    .map_err(|m| parse_err(line_no, m))?
                    .ok_or_else(|| NetlistError::UnboundNet(name.to_owned()))?;
                if !written[slot] {
                    return Err(NetlistError::UnboundNet(name.to_owned()));
                }
                Ok(slot)
            };
            let a = read(fields[2])?;
            let b = if op.arity() == 2 { read(fields[3])? } else { a };

            let dst_name = fields[1];
            let dst = match resolve(&decls, &temps, dst_name).map_err(|m| parse_err(line_no, m))? {
                Some(slot) => {
                    let decl = decls.iter().find(|d| (d.base..d.base + d.width).contains(&slot));
                    if decl.map(|d| d.kind) != Some(GroupKind::Output) || written[slot] {
                        return Err(parse_err(line_no, format!("`{dst_name}` assigned twice")));
                    }
                    slot
                }
                None => {
                    if !is_temp(dst_name) {
                        return Err(parse_err(line_no, format!("bad destination `{dst_name}`")));
                    }
                    temps.insert(dst_name.to_owned(), slots);
                    written.push(false);
                    slots += 1;
                    slots - 1
                }
            };
            written[dst] = true;
            instrs.push(Instr { op, dst, a, b });
        }

        for d in decls.iter().filter(|d| d.kind == GroupKind::Output) {
            if let Some(i) = (0..d.width).find(|&i| !written[d.base + i]) {
                return Err(NetlistError::UnboundNet(format!("{}[{i}]", d.name)));
            }
        }
        Ok(Program { decls, slots, instrs })
    }

    pub fn instruction_count(&self) -> usize {
        self.instrs.len()
    }

    pub fn run(&self, env: &WordEnv) -> Result<WordEnv, NetlistError> {
        let mut values = vec![0u32; self.slots];
        for d in self.decls.iter().filter(|d| d.kind != GroupKind::Output) {
            let words = env.get(&d.name).ok_or_else(|| NetlistError::UnboundNet(format!("{}[0]", d.name)))?;
            if words.len() < d.width {
                return Err(NetlistError::UnboundNet(format!("{}[{}]", d.name, words.len())));
            }
            values[d.base..d.base + d.width].copy_from_slice(&words[..d.width]);
        }
        for ins in &self.instrs {
            values[ins.dst] = ins.op.apply(values[ins.a], values[ins.b]);
        }
        let mut out = env.clone();
        for d in self.decls.iter().filter(|d| d.kind == GroupKind::Output) {
            out.bind(&d.name, values[d.base..d.base + d.width].to_vec());
        }
        Ok(out)
    }
}

fn is_temp(name: &str) -> bool {
    name.len() > 1 && name.starts_with('t') && name[1..].bytes().all(|c| c.is_ascii_digit())
}

// Ok(None) means a well-formed temporary that has not been defined yet.
fn resolve(decls: &[Decl], temps: &HashMap<String, usize>, name: &str) -> Result<Option<usize>, String> {
    if let Some(open) = name.find('[') {
        let group = &name[..open];
        let index: usize = name[open + 1..]
            .strip_suffix(']')
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| format!("malformed net `{name}`"))?;
        let decl = decls.iter().find(|d| d.name == group).ok_or_else(|| format!("undeclared group `{group}`"))?;
        if index >= decl.width {
            return Err(format!("`{name}` exceeds width {}", decl.width));
        }
        Ok(Some(decl.base + index))
    } else if is_temp(name) {
        Ok(temps.get(name).copied())
    } else {
        Err(format!("malformed net `{name}`"))
    }
}

/// Parses and executes program text over `env`.
pub fn interpret_program(text: &str, env: &WordEnv) -> Result<WordEnv, NetlistError> {
    Program::parse(text)?.run(env)
}
