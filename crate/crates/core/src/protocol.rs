//! Population protocols and their compilation from population machines.
//!
//! Every pointer is held by a single agent whose state records the value
//! and the stage of the instruction being executed; registers are counted
//! by anonymous agents. Agents elect one holder per pointer, and a final
//! wrapper broadcasts the output flag through an opinion bit.
//!
//! Encoded configuration: the sorted list of agent states.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::machine::{MInstruction, Machine, CF, IP, OF};
use crate::system::{word, Output, Successors, TransitionSystem, Word};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Protocol {
    pub states: Vec<String>,
    pub initial: Vec<String>,
    pub accepting: Vec<String>,
    /// `[q, r, q2, r2]`: an agent in `q` meeting one in `r` move to `q2`, `r2`.
    pub transitions: Vec<[String; 4]>,
}

impl Protocol {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> Result<String> {
        crate::canonical_json(self)
    }
}

/// Typed protocol configuration: agent count per state.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PConfig {
    pub counts: BTreeMap<String, u64>,
}

impl PConfig {
    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }
}

pub const STAGES_IP: [&str; 3] = ["none", "wait", "half"];
pub const STAGES_VIRT: [&str; 7] = ["none", "done", "emit", "take", "test", "true", "false"];
pub const STAGES_OTHER: [&str; 2] = ["none", "done"];

/// Stage set of a pointer. `Virt(x)` for a register `x` runs moves and
/// tests; `Virt(□)` only takes part in assignments.
pub fn stages(pointer: &str, registers: &[String]) -> &'static [&'static str] {
    if pointer == IP {
        &STAGES_IP
    } else if registers.iter().any(|r| pointer == crate::machine::virt(r)) {
        &STAGES_VIRT
    } else {
        &STAGES_OTHER
    }
}

/// `IP` last, the other pointers in declaration order.
pub fn pointer_order(m: &Machine) -> Vec<usize> {
    let ip = m.pointers.iter().position(|p| p.name == IP);
    let mut v: Vec<usize> = (0..m.pointers.len()).filter(|&i| Some(i) != ip).collect();
    v.extend(ip);
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolStats {
    pub n_registers: usize,
    pub n_pointers: usize,
    pub domain_total: usize,
    pub n_instructions: usize,
    /// `|Q*|`, states before the broadcast wrapper.
    pub inner_states: usize,
    /// `|Q'|`, states of the final protocol.
    pub states: usize,
    pub inner_transitions: usize,
    pub transitions: usize,
    /// `|Q| + 7·Σ|F_X| + L`.
    pub state_bound: usize,
    pub bound_holds: bool,
}

/// Counts `|Q*|` and its bound without building transitions.
pub fn protocol_states(m: &Machine) -> Result<(usize, usize)> {
    m.check()?;
    let q = m.registers.len();
    let per_pointer: usize = m.pointers.iter().map(|p| p.domain.len() * stages(&p.name, &m.registers).len()).sum();
    let maps = m.instructions.iter().filter(|i| matches!(i, MInstruction::Assign { .. })).count();
    let s = m.size();
    Ok((q + per_pointer + maps, q + 7 * s.domain_total + s.n_instructions))
}

/// Identifies the schema row a concrete transition instantiates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RowKey {
    pub schema: Schema,
    pub row: u8,
    /// Elect: family position. Rows that depend on the instruction: its
    /// 1-based index. Other rows: the pointer they act on.
    pub param: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schema {
    Elect,
    Move,
    Test,
    Pointer,
    PointerJump,
    PointerSelf,
}

#[derive(Debug, Clone)]
pub struct Compiled {
    /// The final protocol with opinion bits.
    pub protocol: Protocol,
    /// The simulating protocol before the broadcast wrapper.
    pub inner: Protocol,
    /// Pointer names in election order, `IP` last.
    pub pointers: Vec<String>,
    /// Election family (index into `pointers`) of each inner state; `None`
    /// for register agents.
    pub family: Vec<Option<u16>>,
    /// Concrete inner transitions per schema row.
    pub rows: BTreeMap<RowKey, usize>,
    /// Concrete transitions produced by more than one schema row.
    pub overlaps: usize,
    pub stats: ProtocolStats,
}

impl Compiled {
    /// Families of the wrapped states, for the election measure check.
    pub fn wrapped_families(&self) -> Vec<Option<u16>> {
        self.family.iter().flat_map(|&f| [f, f]).collect()
    }

    /// Semantics of the final protocol with the election measure attached.
    pub fn semantics(&self) -> Result<ProtocolSemantics> {
        Ok(ProtocolSemantics::new(&self.protocol)?.with_families(self.wrapped_families()))
    }
}

struct PtrInfo {
    name: String,
    domain: Vec<String>,
    stages: &'static [&'static str],
    base: u32,
}

struct Builder {
    names: Vec<String>,
    family: Vec<Option<u16>>,
    ptrs: Vec<PtrInfo>,
    by_name: HashMap<String, usize>,
    map_state: Vec<Option<u32>>,
    delta: BTreeMap<[u32; 4], RowKey>,
    rows: BTreeMap<RowKey, usize>,
    overlaps: usize,
}

impl Builder {
    fn p(&self, name: &str) -> usize {
        self.by_name[name]
    }

    fn st(&self, p: usize, v: usize, stage: &str) -> u32 {
        let info = &self.ptrs[p];
        let s = info.stages.iter().position(|x| *x == stage).expect("stage exists for pointer");
        info.base + (v * info.stages.len() + s) as u32
    }

    fn val(&self, p: usize, v: &str) -> usize {
        self.ptrs[p].domain.iter().position(|d| d == v).expect("value in domain")
    }

    /// All states `X^v_*` of pointer `p` with value index `v`.
    fn any_stage(&self, p: usize, v: usize) -> impl Iterator<Item = u32> + '_ {
        let info = &self.ptrs[p];
        (0..info.stages.len()).map(move |s| info.base + (v * info.stages.len() + s) as u32)
    }

    fn family_states(&self, p: usize) -> std::ops::Range<u32> {
        let info = &self.ptrs[p];
        info.base..info.base + (info.domain.len() * info.stages.len()) as u32
    }

    fn add(&mut self, key: RowKey, a: u32, b: u32, a2: u32, b2: u32) {
        let (a, b, a2, b2) = norm(a, b, a2, b2);
        if (a, b) == (a2, b2) {
            return;
        }
        match self.delta.get(&[a, b, a2, b2]) {
            Some(k) if *k != key => self.overlaps += 1,
            Some(_) => {}
            None => {
                self.delta.insert([a, b, a2, b2], key);
                *self.rows.entry(key).or_default() += 1;
            }
        }
    }
}

fn norm(a: u32, b: u32, a2: u32, b2: u32) -> (u32, u32, u32, u32) {
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    let (a2, b2) = if a2 <= b2 { (a2, b2) } else { (b2, a2) };
    (a, b, a2, b2)
}

struct StateSpace {
    names: Vec<String>,
    family: Vec<Option<u16>>,
    ptrs: Vec<PtrInfo>,
    by_name: HashMap<String, usize>,
    map_state: Vec<Option<u32>>,
}

/// Registers, then `X^v_s` per pointer in election order, then one map
/// state per assignment.
fn state_space(m: &Machine) -> Result<StateSpace> {
    m.check()?;
    let regs = &m.registers;
    let q = regs.len();
    let order = pointer_order(m);
    let mut names: Vec<String> = regs.clone();
    let mut family: Vec<Option<u16>> = vec![None; q];
    let mut ptrs = Vec::new();
    let mut by_name = HashMap::new();
    for (fi, &pi) in order.iter().enumerate() {
        let p = &m.pointers[pi];
        let st = stages(&p.name, regs);
        let base = names.len() as u32;
        for v in &p.domain {
            for s in st {
                names.push(format!("{}^{v}_{s}", p.name));
                family.push(Some(fi as u16));
            }
        }
        by_name.insert(p.name.clone(), fi);
        ptrs.push(PtrInfo { name: p.name.clone(), domain: p.domain.clone(), stages: st, base });
    }
    let mut map_state = vec![None; m.instructions.len()];
    for (i, ins) in m.instructions.iter().enumerate() {
        if let MInstruction::Assign { target, .. } = ins {
            map_state[i] = Some(names.len() as u32);
            names.push(format!("{target}^{}_map", i + 1));
            family.push(Some(by_name[target] as u16));
        }
    }
    let distinct: BTreeSet<&String> = names.iter().collect();
    if distinct.len() != names.len() {
        return Err(Error::Invalid(vec!["register names collide with pointer state names".into()]));
    }
    Ok(StateSpace { names, family, ptrs, by_name, map_state })
}

fn wrapped_name(inner: &str, bit: bool) -> String {
    format!("({inner},{bit})")
}

/// State names of the compiled protocol (`Q*`, then `Q'`) without building
/// transitions. Same order as [`compile_protocol`].
pub fn compiled_states(m: &Machine) -> Result<(Vec<String>, Vec<String>)> {
    let inner = state_space(m)?.names;
    let wrapped = inner.iter().flat_map(|s| [wrapped_name(s, false), wrapped_name(s, true)]).collect();
    Ok((inner, wrapped))
}

/// Compiles a valid machine into a protocol deciding the shifted predicate
/// `x ≥ |F| ∧ φ(x − |F|)`.
pub fn compile_protocol(m: &Machine) -> Result<Compiled> {
    let StateSpace { names, family, ptrs, by_name, map_state } = state_space(m)?;
    let regs = &m.registers;
    let q = regs.len();

    let mut b = Builder {
        names,
        family,
        ptrs,
        by_name,
        map_state,
        delta: BTreeMap::new(),
        rows: BTreeMap::new(),
        overlaps: 0,
    };
    let nf = b.ptrs.len();
    let l = m.instructions.len();
    let fixed = regs.iter().enumerate().min_by_key(|(_, r)| *r).map(|(i, _)| i as u32).expect("at least one register");
    let z = fixed;

    // Initial values v_i.
    let init_val: Vec<usize> = b
        .ptrs
        .iter()
        .map(|p| {
            if p.name == IP {
                0
            } else if let Some(r) = p.name.strip_prefix("Virt(").and_then(|s| s.strip_suffix(')')) {
                p.domain.iter().position(|d| d == r).unwrap_or(0)
            } else {
                0
            }
        })
        .collect();
    let fresh: Vec<u32> = (0..nf).map(|f| b.st(f, init_val[f], "none")).collect();

    // (elect)
    for f in 0..nf {
        let key = RowKey { schema: Schema::Elect, row: 0, param: f as u32 };
        let fam = b.family_states(f);
        for s1 in fam.clone() {
            for s2 in fam.clone().filter(|&s| s >= s1) {
                if f + 1 < nf {
                    b.add(key, s1, s2, fresh[f], fresh[f + 1]);
                } else {
                    b.add(key, s1, s2, fresh[0], fixed);
                }
            }
        }
    }

    let ip = b.p(IP);
    let cf = b.p(CF);
    let reg_idx = |name: &str| regs.iter().position(|r| r == name).expect("register") as u32;
    for (i0, ins) in m.instructions.iter().enumerate() {
        let i = i0 + 1;
        let last = i == l;
        let ipn = |b: &Builder, j: usize, s: &str| b.st(ip, j - 1, s);
        let k = |schema, row, param: usize| RowKey { schema, row, param: param as u32 };
        match ins {
            MInstruction::Move { x, y } => {
                let (px, py) = (b.p(&crate::machine::virt(x)), b.p(&crate::machine::virt(y)));
                for v in 0..b.ptrs[px].domain.len() {
                    let reg = reg_idx(&b.ptrs[px].domain[v].clone());
                    let any: Vec<u32> = b.any_stage(px, v).collect();
                    for s in any {
                        let (t1, t2) = (ipn(&b, i, "none"), ipn(&b, i, "wait"));
                        let e = b.st(px, v, "emit");
                        b.add(k(Schema::Move, 1, i), t1, s, t2, e);
                    }
                    let (e, d, nn) = (b.st(px, v, "emit"), b.st(px, v, "done"), b.st(px, v, "none"));
                    b.add(k(Schema::Move, 2, px), e, reg, d, z);
                    let (w, h) = (ipn(&b, i, "wait"), ipn(&b, i, "half"));
                    b.add(k(Schema::Move, 3, i), w, d, h, nn);
                }
                for v in 0..b.ptrs[py].domain.len() {
                    let reg = reg_idx(&b.ptrs[py].domain[v].clone());
                    let any: Vec<u32> = b.any_stage(py, v).collect();
                    let (h, w) = (ipn(&b, i, "half"), ipn(&b, i, "wait"));
                    let (t, d, nn) = (b.st(py, v, "take"), b.st(py, v, "done"), b.st(py, v, "none"));
                    for s in any {
                        b.add(k(Schema::Move, 4, i), h, s, w, t);
                    }
                    b.add(k(Schema::Move, 5, py), t, z, d, reg);
                    if !last {
                        let next = ipn(&b, i + 1, "none");
                        b.add(k(Schema::Move, 6, i), w, d, next, nn);
                    }
                }
            }
            MInstruction::Maybe { x } => {
                let px = b.p(&crate::machine::virt(x));
                let n_states = b.names.len() as u32;
                for v in 0..b.ptrs[px].domain.len() {
                    let reg = reg_idx(&b.ptrs[px].domain[v].clone());
                    let (t1, t2) = (ipn(&b, i, "none"), ipn(&b, i, "wait"));
                    let test = b.st(px, v, "test");
                    let any: Vec<u32> = b.any_stage(px, v).collect();
                    for s in any {
                        b.add(k(Schema::Test, 1, i), t1, s, t2, test);
                    }
                    let (yes, no, d, nn) = (b.st(px, v, "true"), b.st(px, v, "false"), b.st(px, v, "done"), b.st(px, v, "none"));
                    b.add(k(Schema::Test, 2, px), test, reg, yes, reg);
                    for other in (0..n_states).filter(|&s| s != reg) {
                        b.add(k(Schema::Test, 3, px), test, other, no, other);
                    }
                    for (res, bit) in [(yes, "true"), (no, "false")] {
                        let target = b.st(cf, b.val(cf, bit), "none");
                        for c in b.family_states(cf) {
                            b.add(k(Schema::Test, 4, px), res, c, d, target);
                        }
                    }
                    if !last {
                        let next = ipn(&b, i + 1, "none");
                        b.add(k(Schema::Test, 5, i), t2, d, next, nn);
                    }
                }
            }
            MInstruction::Assign { target, source, table } => {
                let (px, py) = (b.p(target), b.p(source));
                let none = ipn(&b, i, "none");
                if py == ip {
                    // The source value is `i`, so `f` is a constant.
                    let c = table[&i.to_string()].clone();
                    if px == ip {
                        let to = b.st(ip, b.val(ip, &c), "none");
                        for v in 0..b.ptrs[cf].domain.len() {
                            let any: Vec<u32> = b.any_stage(cf, v).collect();
                            let nn = b.st(cf, v, "none");
                            for s in any {
                                b.add(k(Schema::PointerJump, 0, i), none, s, to, nn);
                            }
                        }
                    } else if !last {
                        let cv = b.val(px, &c);
                        let next = ipn(&b, i + 1, "none");
                        let to = b.st(px, cv, "none");
                        for s in b.family_states(px).collect::<Vec<_>>() {
                            b.add(k(Schema::PointerSelf, 0, i), none, s, next, to);
                        }
                    }
                } else if px == ip {
                    for v in 0..b.ptrs[py].domain.len() {
                        let j = b.val(ip, &table[&b.ptrs[py].domain[v]]);
                        let to = b.st(ip, j, "none");
                        let nn = b.st(py, v, "none");
                        for s in b.any_stage(py, v).collect::<Vec<_>>() {
                            b.add(k(Schema::PointerJump, 0, i), none, s, to, nn);
                        }
                    }
                } else if px == py {
                    if !last {
                        let next = ipn(&b, i + 1, "none");
                        for v in 0..b.ptrs[py].domain.len() {
                            let fv = b.val(px, &table[&b.ptrs[py].domain[v]]);
                            let to = b.st(px, fv, "none");
                            for s in b.any_stage(py, v).collect::<Vec<_>>() {
                                b.add(k(Schema::PointerSelf, 0, i), none, s, next, to);
                            }
                        }
                    }
                } else {
                    let map = b.map_state[i0].expect("assign has a map state");
                    let wait = ipn(&b, i, "wait");
                    if !last {
                        for s in b.family_states(px).collect::<Vec<_>>() {
                            b.add(k(Schema::Pointer, 1, i), none, s, wait, map);
                        }
                    }
                    for v in 0..b.ptrs[py].domain.len() {
                        let fv = b.val(px, &table[&b.ptrs[py].domain[v]]);
                        let done = b.st(px, fv, "done");
                        let nn = b.st(py, v, "none");
                        for s in b.any_stage(py, v).collect::<Vec<_>>() {
                            b.add(k(Schema::Pointer, 2, i), map, s, done, nn);
                        }
                    }
                    if !last {
                        let next = ipn(&b, i + 1, "none");
                        for w in 0..b.ptrs[px].domain.len() {
                            let (d, nn) = (b.st(px, w, "done"), b.st(px, w, "none"));
                            b.add(k(Schema::Pointer, 3, i), wait, d, next, nn);
                        }
                    }
                }
            }
        }
    }

    let n = b.names.len();
    let of = b.p(OF);
    // Opinion carried by each inner state: `Some(b)` for `OF^b_*`.
    let mut opinion: Vec<Option<u32>> = vec![None; n];
    for v in 0..b.ptrs[of].domain.len() {
        let bit = (b.ptrs[of].domain[v] == "true") as u32;
        for s in b.any_stage(of, v).collect::<Vec<_>>() {
            opinion[s as usize] = Some(bit);
        }
    }

    let inner_accepting: Vec<u32> = (0..n as u32).filter(|&s| opinion[s as usize] == Some(1)).collect();
    let inner = Protocol {
        states: b.names.clone(),
        initial: vec![b.names[fresh[0] as usize].clone()],
        accepting: inner_accepting.iter().map(|&s| b.names[s as usize].clone()).collect(),
        transitions: b.delta.keys().map(|t| t.map(|s| b.names[s as usize].clone())).collect(),
    };

    // Broadcast wrapper over δ and the identity pairs.
    let w = |s: u32, bit: u32| 2 * s + bit;
    let mut wrapped: BTreeSet<[u32; 4]> = BTreeSet::new();
    let mut push = |a: u32, bb: u32, a2: u32, b2: u32| {
        let (a, bb, a2, b2) = norm(a, bb, a2, b2);
        if (a, bb) != (a2, b2) {
            wrapped.insert([a, bb, a2, b2]);
        }
    };
    let mut wrap_one = |t: [u32; 4]| {
        let [q1, q2, q1n, q2n] = t;
        let bits: BTreeSet<u32> = [opinion[q1n as usize], opinion[q2n as usize]].into_iter().flatten().collect();
        for b1 in 0..2 {
            for b2 in 0..2 {
                if bits.is_empty() {
                    push(w(q1, b1), w(q2, b2), w(q1n, b1), w(q2n, b2));
                }
                for &bit in &bits {
                    push(w(q1, b1), w(q2, b2), w(q1n, bit), w(q2n, bit));
                }
            }
        }
    };
    for t in b.delta.keys() {
        wrap_one(*t);
    }
    for s1 in 0..n as u32 {
        for s2 in s1..n as u32 {
            if opinion[s1 as usize].is_some() || opinion[s2 as usize].is_some() {
                wrap_one([s1, s2, s1, s2]);
            }
        }
    }
    let wname = |s: u32| wrapped_name(&b.names[(s / 2) as usize], s % 2 == 1);
    let protocol = Protocol {
        states: (0..2 * n as u32).map(wname).collect(),
        initial: vec![wname(w(fresh[0], 0))],
        accepting: (0..n as u32).map(|s| wname(w(s, 1))).collect(),
        transitions: wrapped.iter().map(|t| t.map(wname)).collect(),
    };

    let size = m.size();
    let state_bound = q + 7 * size.domain_total + size.n_instructions;
    let stats = ProtocolStats {
        n_registers: q,
        n_pointers: nf,
        domain_total: size.domain_total,
        n_instructions: l,
        inner_states: n,
        states: protocol.states.len(),
        inner_transitions: inner.transitions.len(),
        transitions: protocol.transitions.len(),
        state_bound,
        bound_holds: n <= state_bound,
    };
    Ok(Compiled {
        protocol,
        inner,
        pointers: b.ptrs.iter().map(|p| p.name.clone()).collect(),
        family: b.family,
        rows: b.rows,
        overlaps: b.overlaps,
        stats,
    })
}

/// Largest state count for which the dense pair table is built.
const MAX_DENSE_STATES: usize = 8192;

/// Indexed protocol with multiset semantics over sorted agent lists.
pub struct ProtocolSemantics {
    names: Vec<String>,
    index: HashMap<String, Word>,
    accepting: Vec<bool>,
    initial: Vec<Word>,
    /// Outcomes of the unordered pair `{a, b}`, `a ≤ b`, at `a·n + b`.
    start: Vec<u32>,
    outcomes: Vec<(Word, Word)>,
    /// Bit `a·n + b` is set when `{a, b}` has an outcome (both orders).
    active: Vec<u64>,
    family: Option<(Vec<Option<u16>>, usize)>,
}

impl ProtocolSemantics {
    pub fn new(p: &Protocol) -> Result<Self> {
        let n = p.states.len();
        if n == 0 {
            return Err(Error::Invalid(vec!["protocol has no states".into()]));
        }
        if n > MAX_DENSE_STATES {
            return Err(Error::Bound(format!("{n} states exceed the pair-table limit of {MAX_DENSE_STATES}")));
        }
        let mut index = HashMap::with_capacity(n);
        for (i, s) in p.states.iter().enumerate() {
            if index.insert(s.clone(), i as Word).is_some() {
                return Err(Error::Invalid(vec![format!("state `{s}` declared twice")]));
            }
        }
        let look = |s: &String| index.get(s).copied().ok_or_else(|| Error::UnknownName(s.clone()));
        let mut accepting = vec![false; n];
        for s in &p.accepting {
            accepting[look(s)? as usize] = true;
        }
        let initial = p.initial.iter().map(look).collect::<Result<Vec<_>>>()?;
        let mut buckets: Vec<Vec<(Word, Word)>> = vec![Vec::new(); n * n];
        for t in &p.transitions {
            let [a, b, a2, b2] = [look(&t[0])?, look(&t[1])?, look(&t[2])?, look(&t[3])?];
            let (a, b, a2, b2) = norm(a as u32, b as u32, a2 as u32, b2 as u32);
            if (a, b) != (a2, b2) {
                buckets[a as usize * n + b as usize].push((a2 as Word, b2 as Word));
            }
        }
        let mut start = Vec::with_capacity(n * n + 1);
        let mut outcomes = Vec::new();
        for bucket in &mut buckets {
            bucket.sort_unstable();
            bucket.dedup();
            start.push(outcomes.len() as u32);
            outcomes.extend_from_slice(bucket);
        }
        start.push(outcomes.len() as u32);
        let mut active = vec![0u64; (n * n).div_ceil(64)];
        for a in 0..n {
            for b in a..n {
                if start[a * n + b] < start[a * n + b + 1] {
                    for k in [a * n + b, b * n + a] {
                        active[k / 64] |= 1 << (k % 64);
                    }
                }
            }
        }
        Ok(Self { names: p.states.clone(), index, accepting, initial, start, outcomes, active, family: None })
    }

    /// Attaches election families (one per state, `None` for register
    /// agents) so that [`TransitionSystem::check_step`] verifies the
    /// election measure.
    pub fn with_families(mut self, family: Vec<Option<u16>>) -> Self {
        let nf = family.iter().flatten().map(|&f| f as usize + 1).max().unwrap_or(0);
        self.family = Some((family, nf));
        self
    }

    pub fn n_states(&self) -> usize {
        self.names.len()
    }

    pub fn state_name(&self, s: Word) -> &str {
        &self.names[s as usize]
    }

    pub fn is_accepting(&self, s: Word) -> bool {
        self.accepting[s as usize]
    }

    /// Outcomes of an interaction between agents in states `a` and `b`.
    pub fn outcomes(&self, a: Word, b: Word) -> &[(Word, Word)] {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        let k = a as usize * self.names.len() + b as usize;
        &self.outcomes[self.start[k] as usize..self.start[k + 1] as usize]
    }

    /// Whether agents in states `a` and `b` have any outcome.
    pub fn interacts(&self, a: Word, b: Word) -> bool {
        let k = a as usize * self.names.len() + b as usize;
        self.active[k / 64] >> (k % 64) & 1 == 1
    }

    /// All `m` agents in the first initial state.
    pub fn initial_config(&self, m: u64) -> Result<Vec<Word>> {
        let s = *self.initial.first().ok_or_else(|| Error::Invalid(vec!["protocol has no initial state".into()]))?;
        Ok(vec![s; usize::try_from(m).map_err(|_| Error::Bound("population too large".into()))?])
    }

    pub fn encode(&self, c: &PConfig) -> Result<Vec<Word>> {
        let mut v = Vec::new();
        for (s, &k) in &c.counts {
            let i = *self.index.get(s).ok_or_else(|| Error::UnknownName(s.clone()))?;
            word(k)?;
            v.extend(std::iter::repeat_n(i, k as usize));
        }
        v.sort_unstable();
        Ok(v)
    }

    pub fn decode(&self, c: &[Word]) -> PConfig {
        let mut counts = BTreeMap::new();
        for &s in c {
            *counts.entry(self.names[s as usize].clone()).or_insert(0) += 1;
        }
        PConfig { counts }
    }

    pub fn successors_of(&self, c: &PConfig) -> Result<Vec<PConfig>> {
        let e = self.encode(c)?;
        let mut out = Successors::new();
        self.successors(&e, &mut out);
        Ok(out.iter().map(|s| self.decode(s)).collect())
    }

    /// `(pointer agents, agents per family)`, compared lexicographically.
    fn measure(&self, c: &[Word]) -> Option<(usize, Vec<u32>)> {
        let (family, nf) = self.family.as_ref()?;
        let mut counts = vec![0u32; *nf];
        let mut total = 0;
        for &s in c {
            if let Some(f) = family[s as usize] {
                counts[f as usize] += 1;
                total += 1;
            }
        }
        Some((total, counts))
    }
}

/// `c` with the agents at positions `i < j` replaced by `a`, `b`, sorted.
fn replace_pair(c: &[Word], i: usize, j: usize, a: Word, b: Word, buf: &mut Vec<Word>) {
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    let pending = [a, b];
    let mut k = 0;
    for (p, &s) in c.iter().enumerate() {
        if p == i || p == j {
            continue;
        }
        while k < 2 && pending[k] <= s {
            buf.push(pending[k]);
            k += 1;
        }
        buf.push(s);
    }
    while k < 2 {
        buf.push(pending[k]);
        k += 1;
    }
}

impl TransitionSystem for ProtocolSemantics {
    fn successors(&self, c: &[Word], out: &mut Successors) {
        let m = c.len();
        let before = out.len();
        let mut i = 0;
        while i < m {
            let a = c[i];
            let mut prev = None;
            for j in i + 1..m {
                let b = c[j];
                if prev == Some(b) {
                    continue;
                }
                prev = Some(b);
                for &(a2, b2) in self.outcomes(a, b) {
                    out.push_with(|buf| replace_pair(c, i, j, a2, b2, buf));
                }
            }
            while i < m && c[i] == a {
                i += 1;
            }
        }
        if out.len() == before {
            out.push(c);
        }
    }

    /// The empty population outputs false.
    fn output(&self, c: &[Word]) -> Output {
        let acc = c.iter().filter(|&&s| self.accepting[s as usize]).count();
        if acc == c.len() && acc > 0 {
            Output::True
        } else if acc == 0 {
            Output::False
        } else {
            Output::Undefined
        }
    }

    fn describe(&self, c: &[Word]) -> String {
        let mut s = String::from("{");
        let mut i = 0;
        while i < c.len() {
            let mut j = i;
            while j < c.len() && c[j] == c[i] {
                j += 1;
            }
            if i > 0 {
                s.push_str(", ");
            }
            let _ = write!(s, "{}: {}", self.names[c[i] as usize], j - i);
            i = j;
        }
        s.push('}');
        s
    }

    fn check_step(&self, c: &[Word], succs: &Successors) -> Result<(), String> {
        if succs.is_empty() {
            return Err("no successor".into());
        }
        let before = self.measure(c);
        for s in succs.iter() {
            if s.len() != c.len() {
                return Err(format!("agent count changed from {} to {}", c.len(), s.len()));
            }
            if let (Some(b), Some(a)) = (&before, self.measure(s)) {
                if a > *b {
                    return Err(format!("election measure grew from {b:?} to {a:?}"));
                }
            }
        }
        Ok(())
    }
}

/// Output of a typed configuration.
pub fn pconfig_output(p: &ProtocolSemantics, c: &PConfig) -> Result<Output> {
    Ok(p.output(&p.encode(c)?))
}
