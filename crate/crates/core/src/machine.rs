//! Population machines: registers, finite-domain pointers and a flat
//! instruction list.
//!
//! Register operands of moves and tests are virtual names; at run time
//! `x` denotes the register stored in pointer `Virt(x)`.
//!
//! Encoded configuration: `regs[0..q], ptr[0..p]` where each pointer word
//! is an index into that pointer's domain.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multiset::for_each_composition;
use crate::system::{word, Output, Successors, TransitionSystem, Word};

pub const OF: &str = "OF";
pub const CF: &str = "CF";
pub const IP: &str = "IP";
pub const SWAP_TMP: &str = "Virt(□)";

pub fn virt(reg: &str) -> String {
    format!("Virt({reg})")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pointer {
    pub name: String,
    pub domain: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum MInstruction {
    Move {
        x: String,
        y: String,
    },
    Maybe {
        x: String,
    },
    Assign {
        #[serde(rename = "X")]
        target: String,
        #[serde(rename = "Y")]
        source: String,
        /// `f`, as a map from source values to target values.
        table: BTreeMap<String, String>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Machine {
    pub registers: Vec<String>,
    pub pointers: Vec<Pointer>,
    pub instructions: Vec<MInstruction>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MachineSize {
    pub n_registers: usize,
    pub n_pointers: usize,
    pub domain_total: usize,
    pub n_instructions: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MDiagnostic {
    DuplicateRegister(String),
    DuplicatePointer(String),
    MissingPointer(String),
    BadDomain { pointer: String, reason: String },
    UnknownRegister { instr: usize, name: String },
    UnknownPointer { instr: usize, name: String },
    MoveToSelf { instr: usize },
    PartialTable { instr: usize, missing: String },
    TableOutOfDomain { instr: usize, value: String },
}

impl fmt::Display for MDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MDiagnostic::DuplicateRegister(r) => write!(f, "register `{r}` declared twice"),
            MDiagnostic::DuplicatePointer(p) => write!(f, "pointer `{p}` declared twice"),
            MDiagnostic::MissingPointer(p) => write!(f, "required pointer `{p}` is missing"),
            MDiagnostic::BadDomain { pointer, reason } => write!(f, "pointer `{pointer}`: {reason}"),
            MDiagnostic::UnknownRegister { instr, name } => write!(f, "instruction {}: unknown register `{name}`", instr + 1),
            MDiagnostic::UnknownPointer { instr, name } => write!(f, "instruction {}: unknown pointer `{name}`", instr + 1),
            MDiagnostic::MoveToSelf { instr } => write!(f, "instruction {}: move from a register to itself", instr + 1),
            MDiagnostic::PartialTable { instr, missing } => {
                write!(f, "instruction {}: table has no entry for `{missing}`", instr + 1)
            }
            MDiagnostic::TableOutOfDomain { instr, value } => {
                write!(f, "instruction {}: table value `{value}` is outside the target domain", instr + 1)
            }
        }
    }
}

fn is_bool_domain(d: &[String]) -> bool {
    let s: BTreeSet<&str> = d.iter().map(String::as_str).collect();
    d.len() == 2 && s == BTreeSet::from(["false", "true"])
}

/// All problems found in `m`; empty iff `m` is well formed.
pub fn validate_machine(m: &Machine) -> Vec<MDiagnostic> {
    let mut out = Vec::new();
    let mut regs = BTreeSet::new();
    for r in &m.registers {
        if !regs.insert(r.as_str()) {
            out.push(MDiagnostic::DuplicateRegister(r.clone()));
        }
    }
    let mut ptrs: HashMap<&str, &Pointer> = HashMap::new();
    for p in &m.pointers {
        if ptrs.insert(p.name.as_str(), p).is_some() {
            out.push(MDiagnostic::DuplicatePointer(p.name.clone()));
        }
        let distinct: BTreeSet<&String> = p.domain.iter().collect();
        if p.domain.is_empty() {
            out.push(MDiagnostic::BadDomain { pointer: p.name.clone(), reason: "empty domain".into() });
        } else if distinct.len() != p.domain.len() {
            out.push(MDiagnostic::BadDomain { pointer: p.name.clone(), reason: "repeated domain value".into() });
        }
    }
    let mut require = |name: &str, check: &dyn Fn(&Pointer) -> Option<String>| match ptrs.get(name) {
        None => out.push(MDiagnostic::MissingPointer(name.into())),
        Some(p) => {
            if let Some(reason) = check(p) {
                out.push(MDiagnostic::BadDomain { pointer: name.into(), reason });
            }
        }
    };
    let bool_check = |p: &Pointer| (!is_bool_domain(&p.domain)).then(|| "domain must be {false, true}".to_string());
    require(OF, &bool_check);
    require(CF, &bool_check);
    let l = m.instructions.len();
    require(IP, &|p: &Pointer| {
        let want: Vec<String> = (1..=l).map(|i| i.to_string()).collect();
        (p.domain != want).then(|| format!("domain must be 1..{l} in order"))
    });
    for r in &m.registers {
        require(&virt(r), &|p: &Pointer| {
            if !p.domain.contains(r) {
                Some(format!("domain must contain `{r}`"))
            } else {
                p.domain.iter().find(|v| !regs.contains(v.as_str())).map(|v| format!("`{v}` is not a register"))
            }
        });
    }
    require(SWAP_TMP, &|p: &Pointer| {
        p.domain.iter().find(|v| !regs.contains(v.as_str())).map(|v| format!("`{v}` is not a register"))
    });

    for (i, ins) in m.instructions.iter().enumerate() {
        let mut reg = |x: &str| {
            if !regs.contains(x) {
                out.push(MDiagnostic::UnknownRegister { instr: i, name: x.into() });
            }
        };
        match ins {
            MInstruction::Move { x, y } => {
                reg(x);
                reg(y);
                if x == y {
                    out.push(MDiagnostic::MoveToSelf { instr: i });
                }
            }
            MInstruction::Maybe { x } => reg(x),
            MInstruction::Assign { target, source, table } => {
                let (tp, sp) = (ptrs.get(target.as_str()), ptrs.get(source.as_str()));
                if tp.is_none() {
                    out.push(MDiagnostic::UnknownPointer { instr: i, name: target.clone() });
                }
                if sp.is_none() {
                    out.push(MDiagnostic::UnknownPointer { instr: i, name: source.clone() });
                }
                if let (Some(tp), Some(sp)) = (tp, sp) {
                    for v in &sp.domain {
                        match table.get(v) {
                            None => out.push(MDiagnostic::PartialTable { instr: i, missing: v.clone() }),
                            Some(w) if !tp.domain.contains(w) => {
                                out.push(MDiagnostic::TableOutOfDomain { instr: i, value: w.clone() })
                            }
                            _ => {}
                        }
                    }
                }
            }
        }
    }
    out
}

impl Machine {
    pub fn size(&self) -> MachineSize {
        let n_registers = self.registers.len();
        let n_pointers = self.pointers.len();
        let domain_total = self.pointers.iter().map(|p| p.domain.len()).sum();
        let n_instructions = self.instructions.len();
        MachineSize {
            n_registers,
            n_pointers,
            domain_total,
            n_instructions,
            total: n_registers + n_pointers + domain_total + n_instructions,
        }
    }

    pub fn pointer(&self, name: &str) -> Option<&Pointer> {
        self.pointers.iter().find(|p| p.name == name)
    }

    /// 1-based indices of the assignments `Virt(y) := Virt(□)`. For a
    /// lowered machine these are exactly the swap completions of its
    /// lowering map.
    pub fn swap_completions(&self) -> Vec<usize> {
        (1..=self.instructions.len())
            .filter(|&i| {
                matches!(&self.instructions[i - 1], MInstruction::Assign { target, source, .. }
                    if source == SWAP_TMP && target.starts_with("Virt(") && target != SWAP_TMP)
            })
            .collect()
    }

    pub fn check(&self) -> Result<()> {
        let d = validate_machine(self);
        if d.is_empty() {
            Ok(())
        } else {
            Err(Error::Invalid(d.iter().map(|x| x.to_string()).collect()))
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> Result<String> {
        crate::canonical_json(self)
    }
}

/// Typed machine configuration: register values and pointer values, in
/// declaration order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MConfig {
    pub registers: Vec<u64>,
    pub pointers: Vec<String>,
}

#[derive(Debug, Clone)]
enum Ins {
    Move { vx: usize, vy: usize },
    Maybe { vx: usize },
    Assign { target: usize, source: usize, table: Vec<Word> },
}

/// Index-resolved machine with the exact one-step semantics.
pub struct MachineSemantics {
    machine: Machine,
    q: usize,
    domains: Vec<Vec<String>>,
    /// For pointers whose values are registers: register index per value.
    reg_values: Vec<Option<Vec<usize>>>,
    ins: Vec<Ins>,
    of: usize,
    cf: usize,
    ip: usize,
    of_true: Word,
    cf_true: Word,
    cf_false: Word,
    /// `Virt(x)` pointer of register `x`.
    virt: Vec<usize>,
    /// Instruction indices (0-based) at which the register map may be
    /// transiently non-injective.
    map_exempt: Vec<bool>,
}

impl MachineSemantics {
    pub fn new(m: &Machine) -> Result<Self> {
        m.check()?;
        let q = m.registers.len();
        let pidx: HashMap<&str, usize> = m.pointers.iter().enumerate().map(|(i, p)| (p.name.as_str(), i)).collect();
        let ridx: HashMap<&str, usize> = m.registers.iter().enumerate().map(|(i, r)| (r.as_str(), i)).collect();
        let domains: Vec<Vec<String>> = m.pointers.iter().map(|p| p.domain.clone()).collect();
        let reg_values: Vec<Option<Vec<usize>>> = m
            .pointers
            .iter()
            .map(|p| p.domain.iter().map(|v| ridx.get(v.as_str()).copied()).collect::<Option<Vec<_>>>())
            .collect();
        let virt: Vec<usize> = m.registers.iter().map(|r| pidx[virt(r).as_str()]).collect();
        let ins = m
            .instructions
            .iter()
            .map(|i| match i {
                MInstruction::Move { x, y } => Ins::Move { vx: virt[ridx[x.as_str()]], vy: virt[ridx[y.as_str()]] },
                MInstruction::Maybe { x } => Ins::Maybe { vx: virt[ridx[x.as_str()]] },
                MInstruction::Assign { target, source, table } => {
                    let (t, s) = (pidx[target.as_str()], pidx[source.as_str()]);
                    let tbl = domains[s]
                        .iter()
                        .map(|v| domains[t].iter().position(|w| *w == table[v]).unwrap() as Word)
                        .collect();
                    Ins::Assign { target: t, source: s, table: tbl }
                }
            })
            .collect();
        let pos = |p: usize, v: &str| domains[p].iter().position(|w| w == v).unwrap() as Word;
        let (of, cf, ip) = (pidx[OF], pidx[CF], pidx[IP]);
        Ok(Self {
            q,
            of_true: pos(of, "true"),
            cf_true: pos(cf, "true"),
            cf_false: pos(cf, "false"),
            of,
            cf,
            ip,
            domains,
            reg_values,
            ins,
            virt,
            map_exempt: vec![false; m.instructions.len()],
            machine: m.clone(),
        })
    }

    /// Marks instructions (0-based) before which the register map need not
    /// be a permutation.
    pub fn with_map_exemptions(mut self, instrs: impl IntoIterator<Item = usize>) -> Self {
        for i in instrs {
            self.map_exempt[i] = true;
        }
        self
    }

    pub fn machine(&self) -> &Machine {
        &self.machine
    }

    pub fn n_registers(&self) -> usize {
        self.q
    }

    fn reg_of(&self, c: &[Word], ptr: usize) -> usize {
        self.reg_values[ptr].as_ref().expect("register-valued pointer")[c[self.q + ptr] as usize]
    }

    pub fn encode(&self, cfg: &MConfig) -> Result<Vec<Word>> {
        let mut v = Vec::with_capacity(self.q + self.domains.len());
        for &r in &cfg.registers {
            v.push(word(r)?);
        }
        for (p, val) in cfg.pointers.iter().enumerate() {
            let i = self.domains[p]
                .iter()
                .position(|w| w == val)
                .ok_or_else(|| Error::Bound(format!("`{val}` is outside the domain of {}", self.machine.pointers[p].name)))?;
            v.push(i as Word);
        }
        Ok(v)
    }

    pub fn decode(&self, c: &[Word]) -> MConfig {
        MConfig {
            registers: c[..self.q].iter().map(|&w| w as u64).collect(),
            pointers: c[self.q..].iter().enumerate().map(|(p, &i)| self.domains[p][i as usize].clone()).collect(),
        }
    }

    pub fn successors_of(&self, cfg: &MConfig) -> Result<Vec<MConfig>> {
        let c = self.encode(cfg)?;
        let mut out = Successors::new();
        self.successors(&c, &mut out);
        Ok(out.iter().map(|s| self.decode(s)).collect())
    }

    /// Every initial configuration of population size `m`: `IP = 1`,
    /// `Virt(x) = x`, and all other pointers arbitrary.
    pub fn initials(&self, m: u64) -> Vec<Vec<Word>> {
        let fixed: HashMap<usize, Word> = std::iter::once((self.ip, 0))
            .chain(self.virt.iter().enumerate().map(|(r, &p)| {
                let reg = &self.machine.registers[r];
                (p, self.domains[p].iter().position(|v| v == reg).unwrap() as Word)
            }))
            .collect();
        let mut ptr_choices: Vec<Vec<Word>> = vec![Vec::new()];
        for p in 0..self.domains.len() {
            let vals: Vec<Word> = match fixed.get(&p) {
                Some(&v) => vec![v],
                None => (0..self.domains[p].len() as Word).collect(),
            };
            ptr_choices = ptr_choices
                .into_iter()
                .flat_map(|prefix| {
                    vals.iter().map(move |&v| {
                        let mut x = prefix.clone();
                        x.push(v);
                        x
                    })
                })
                .collect();
        }
        let mut out = Vec::new();
        for_each_composition(m, self.q, |regs| {
            for ptrs in &ptr_choices {
                let mut c: Vec<Word> = regs.iter().map(|&r| r as Word).collect();
                c.extend_from_slice(ptrs);
                out.push(c);
            }
        });
        out
    }

    /// Register map as register indices, `Virt(x)` for every `x` in order.
    fn map_image(&self, c: &[Word]) -> Vec<usize> {
        self.virt.iter().map(|&p| self.reg_of(c, p)).collect()
    }
}

impl TransitionSystem for MachineSemantics {
    fn successors(&self, c: &[Word], out: &mut Successors) {
        let q = self.q;
        let ip = c[q + self.ip] as usize;
        let last = ip + 1 == self.ins.len();
        let before = out.len();
        match &self.ins[ip] {
            Ins::Move { vx, vy } => {
                let (rx, ry) = (self.reg_of(c, *vx), self.reg_of(c, *vy));
                if c[rx] > 0 && !last && rx != ry {
                    out.push_edit(c, |x| {
                        x[rx] -= 1;
                        x[ry] += 1;
                        x[q + self.ip] += 1;
                    });
                }
            }
            Ins::Maybe { vx } => {
                if !last {
                    let rx = self.reg_of(c, *vx);
                    out.push_edit(c, |x| {
                        x[q + self.cf] = self.cf_false;
                        x[q + self.ip] += 1;
                    });
                    if c[rx] > 0 {
                        out.push_edit(c, |x| {
                            x[q + self.cf] = self.cf_true;
                            x[q + self.ip] += 1;
                        });
                    }
                }
            }
            Ins::Assign { target, source, table } => {
                let v = table[c[q + source] as usize];
                if *target == self.ip {
                    out.push_edit(c, |x| x[q + self.ip] = v);
                } else if !last {
                    out.push_edit(c, |x| {
                        x[q + target] = v;
                        x[q + self.ip] += 1;
                    });
                }
            }
        }
        if out.len() == before {
            out.push(c);
        }
    }

    fn output(&self, c: &[Word]) -> Output {
        Output::from_bool(c[self.q + self.of] == self.of_true)
    }

    fn describe(&self, c: &[Word]) -> String {
        let q = self.q;
        let mut s = String::from("{");
        let mut first = true;
        for (i, &v) in c[..q].iter().enumerate() {
            if v > 0 {
                if !first {
                    s.push_str(", ");
                }
                first = false;
                let _ = write!(s, "{}: {v}", self.machine.registers[i]);
            }
        }
        s.push('}');
        for (p, ptr) in self.machine.pointers.iter().enumerate() {
            let val = &self.domains[p][c[q + p] as usize];
            let identity = ptr.name.strip_prefix("Virt(").and_then(|r| r.strip_suffix(')')) == Some(val.as_str());
            if !identity {
                let _ = write!(s, " {}={val}", ptr.name);
            }
        }
        s
    }

    fn check_step(&self, c: &[Word], succs: &Successors) -> Result<(), String> {
        if succs.is_empty() {
            return Err("no successor".into());
        }
        let q = self.q;
        let total: u64 = c[..q].iter().map(|&w| w as u64).sum();
        for s in succs.iter() {
            let t: u64 = s[..q].iter().map(|&w| w as u64).sum();
            if t != total {
                return Err(format!("register total changed from {total} to {t}"));
            }
            for (p, d) in self.domains.iter().enumerate() {
                if s[q + p] as usize >= d.len() {
                    return Err(format!("pointer {} left its domain", self.machine.pointers[p].name));
                }
            }
        }
        let ip = c[q + self.ip] as usize;
        if !self.map_exempt[ip] {
            let mut image = self.map_image(c);
            image.sort_unstable();
            if image.iter().enumerate().any(|(i, &r)| i != r) {
                return Err("register map is not a permutation".into());
            }
        }
        let distinct = succs.iter().filter(|s| *s != c).count();
        match &self.ins[ip] {
            Ins::Maybe { vx } if ip + 1 < self.ins.len() => {
                let has_true = succs.iter().any(|s| s[q + self.cf] == self.cf_true && s[q + self.ip] as usize == ip + 1);
                if has_true != (c[self.reg_of(c, *vx)] > 0) {
                    return Err("maybe true-branch does not match register value".into());
                }
            }
            _ => {
                if succs.len() != 1 {
                    return Err(format!("{distinct} successors for a deterministic instruction"));
                }
            }
        }
        Ok(())
    }
}
