//! Small-step semantics of programs.
//!
//! Every procedure body is flattened into a control graph whose nodes are the
//! instructions that take a step: moves, swaps, flag updates, restarts,
//! returns, `maybe` atoms and call atoms. Branching, negation, short-circuit
//! and loop back-edges are folded into the edges, so they take no step. A loop
//! made only of such edges (`while true {}`) becomes a node that steps to
//! itself.
//!
//! Encoded configuration: `regs[0..q], flags, depth, stack[0..depth]` where
//! every stack entry is a node id; entries below the top sit on call nodes.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{validate::static_value, Condition, Program, Stmt};
use crate::error::Result;
use crate::multiset::{for_each_composition, Multiset};
use crate::system::{word, Output, Successors, TransitionSystem, Word};

pub(crate) const OF: Word = 1;
pub(crate) const HALTED: Word = 2;
pub(crate) const HUB: Word = 4;
pub(crate) const RETURNED: Word = 8;
pub(crate) const RET_TRUE: Word = 16;
pub(crate) const RET_FALSE: Word = 32;
pub(crate) const RESTARTED: Word = 64;
const TERMINAL: Word = HALTED | RETURNED | RESTARTED;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Node {
    Move { src: u16, dst: u16, next: u16 },
    Swap { a: u16, b: u16, next: u16 },
    SetOf { value: bool, next: u16 },
    Maybe { reg: u16, on_true: u16, on_false: u16 },
    Call { callee: u16, on_true: u16, on_false: u16 },
    Return { value: Option<bool> },
    Restart,
    Spin,
}

/// Source position of a control node: the statement path inside the
/// procedure body, and the index of the condition atom being evaluated
/// (zero for plain statements).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Location {
    pub proc: String,
    pub path: Vec<usize>,
    pub cursor: usize,
}

pub type Frame = Location;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ProgConfig {
    pub registers: Multiset,
    pub of: bool,
    pub frames: Vec<Frame>,
    pub halted: bool,
}

/// How restarts and procedure exits are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    /// Restart steps to every register configuration of equal total.
    Exact,
    /// Restart steps to one hub configuration per output flag, which then
    /// steps to every register configuration. Reachability and bottom
    /// components are the same as in `Exact`, with far fewer edges.
    Hub,
    /// Returning from the outermost frame and restarting both end the run
    /// in absorbing outcome configurations.
    Post,
}

pub struct ProgramSemantics {
    program: Program,
    pub(crate) nodes: Vec<Node>,
    locations: Vec<Location>,
    loc_index: HashMap<Location, u16>,
    pub(crate) entries: Vec<u16>,
    proc_index: HashMap<String, u16>,
    n_regs: usize,
    main: u16,
    mode: RunMode,
}

impl ProgramSemantics {
    /// Validates, expands `for` loops and builds the control graph.
    pub fn new(p: &Program) -> Result<Self> {
        p.check()?;
        let program = p.expand_for();
        let mut b = Builder::new(&program);
        let mut raw_entries = Vec::new();
        for (pi, proc) in program.procedures.iter().enumerate() {
            b.proc = pi;
            let end = b.emit(BNode::Return(None), vec![proc.body.len()], 0);
            raw_entries.push(b.block(&proc.body, end, &[]));
        }
        let (nodes, locations, remap) = b.finish()?;
        let entries: Vec<u16> = raw_entries.iter().map(|&e| remap(e)).collect();
        let loc_index = locations.iter().enumerate().map(|(i, l)| (l.clone(), i as u16)).collect();
        let proc_index: HashMap<String, u16> =
            program.procedures.iter().enumerate().map(|(i, p)| (p.name.clone(), i as u16)).collect();
        let main = proc_index[&program.main];
        Ok(Self {
            n_regs: program.registers.len(),
            program,
            nodes,
            locations,
            loc_index,
            entries,
            proc_index,
            main,
            mode: RunMode::Exact,
        })
    }

    pub fn with_mode(mut self, mode: RunMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn mode(&self) -> RunMode {
        self.mode
    }

    /// The for-expanded program this semantics runs.
    pub fn program(&self) -> &Program {
        &self.program
    }

    pub fn n_registers(&self) -> usize {
        self.n_regs
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn proc_id(&self, name: &str) -> Option<usize> {
        self.proc_index.get(name).map(|&i| i as usize)
    }

    pub(crate) fn main_id(&self) -> u16 {
        self.main
    }

    pub fn location(&self, node: u16) -> &Location {
        &self.locations[node as usize]
    }

    /// Encoded configuration with a single frame at the entry of `proc`.
    pub fn encode_start(&self, regs: &[u64], of: bool, proc: usize) -> Result<Vec<Word>> {
        let mut v = Vec::with_capacity(self.n_regs + 3);
        for &r in regs {
            v.push(word(r)?);
        }
        v.push(if of { OF } else { 0 });
        v.push(1);
        v.push(self.entries[proc]);
        Ok(v)
    }

    /// Encoded initial configuration: one frame at the entry of main.
    pub fn encode_initial(&self, regs: &[u64], of: bool) -> Result<Vec<Word>> {
        self.encode_start(regs, of, self.main as usize)
    }

    pub fn initial(&self, registers: Multiset, of: bool) -> ProgConfig {
        ProgConfig {
            registers,
            of,
            frames: vec![self.locations[self.entries[self.main as usize] as usize].clone()],
            halted: false,
        }
    }

    pub fn encode(&self, d: &ProgConfig) -> Result<Vec<Word>> {
        let mut v = Vec::new();
        for r in d.registers.to_dense(self.n_regs) {
            v.push(word(r)?);
        }
        let mut flags = if d.of { OF } else { 0 };
        if d.halted {
            flags |= HALTED;
        }
        v.push(flags);
        v.push(word(d.frames.len() as u64)?);
        for f in &d.frames {
            let id = self
                .loc_index
                .get(f)
                .ok_or_else(|| crate::Error::UnknownName(format!("{}@{:?}:{}", f.proc, f.path, f.cursor)))?;
            v.push(*id);
        }
        Ok(v)
    }

    pub fn decode(&self, c: &[Word]) -> ProgConfig {
        let q = self.n_regs;
        let depth = c[q + 1] as usize;
        ProgConfig {
            registers: Multiset::from_dense(&c[..q]),
            of: c[q] & OF != 0,
            frames: c[q + 2..q + 2 + depth].iter().map(|&n| self.locations[n as usize].clone()).collect(),
            halted: c[q] & HALTED != 0,
        }
    }

    /// One-step successors of a typed configuration.
    pub fn successors_of(&self, d: &ProgConfig) -> Result<Vec<ProgConfig>> {
        let c = self.encode(d)?;
        let mut out = Successors::new();
        self.successors(&c, &mut out);
        Ok(out.iter().map(|s| self.decode(s)).collect())
    }

    /// Outcome carried by an absorbing configuration in `Post` mode.
    pub(crate) fn outcome(&self, c: &[Word]) -> Outcome {
        let flags = c[self.n_regs];
        if flags & RESTARTED != 0 {
            Outcome::Restart
        } else if flags & RETURNED != 0 {
            let value = if flags & RET_TRUE != 0 {
                Some(true)
            } else if flags & RET_FALSE != 0 {
                Some(false)
            } else {
                None
            };
            Outcome::Return(c[..self.n_regs].iter().map(|&w| w as u64).collect(), value)
        } else {
            Outcome::Running
        }
    }

    fn push_restarts(&self, total: u64, of: Word, out: &mut Successors) {
        let entry = self.entries[self.main as usize];
        for_each_composition(total, self.n_regs, |comp| {
            out.push_with(|buf| {
                buf.extend(comp.iter().map(|&x| x as Word));
                buf.extend([of, 1, entry]);
            })
        });
    }

    /// Absorbing configuration that keeps the register total in slot 0.
    fn push_marker(&self, total: u64, flags: Word, out: &mut Successors) {
        let q = self.n_regs;
        out.push_with(|buf| {
            let start = buf.len();
            buf.resize(start + q, 0);
            if q > 0 {
                buf[start] = total as Word;
            }
            buf.extend([flags, 0]);
        });
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Outcome {
    Running,
    Return(Vec<u64>, Option<bool>),
    Restart,
}

impl TransitionSystem for ProgramSemantics {
    fn successors(&self, c: &[Word], out: &mut Successors) {
        let q = self.n_regs;
        let flags = c[q];
        if flags & TERMINAL != 0 {
            out.push(c);
            return;
        }
        if flags & HUB != 0 {
            let total = if q > 0 { c[0] as u64 } else { 0 };
            self.push_restarts(total, flags & OF, out);
            return;
        }
        let depth = c[q + 1] as usize;
        let top = q + 1 + depth;
        match self.nodes[c[top] as usize] {
            Node::Move { src, dst, next } => {
                let (s, d) = (src as usize, dst as usize);
                if c[s] > 0 {
                    out.push_edit(c, |x| {
                        x[s] -= 1;
                        x[d] += 1;
                        x[top] = next;
                    });
                } else {
                    out.push_edit(c, |x| x[q] |= HALTED);
                }
            }
            Node::Swap { a, b, next } => out.push_edit(c, |x| {
                x.swap(a as usize, b as usize);
                x[top] = next;
            }),
            Node::SetOf { value, next } => out.push_edit(c, |x| {
                x[q] = if value { x[q] | OF } else { x[q] & !OF };
                x[top] = next;
            }),
            Node::Maybe { reg, on_true, on_false } => {
                out.push_edit(c, |x| x[top] = on_false);
                if c[reg as usize] > 0 {
                    out.push_edit(c, |x| x[top] = on_true);
                }
            }
            Node::Call { callee, .. } => {
                let entry = self.entries[callee as usize];
                out.push_with(|buf| {
                    let start = buf.len();
                    buf.extend_from_slice(c);
                    buf[start + q + 1] += 1;
                    buf.push(entry);
                });
            }
            Node::Return { value } => {
                if depth == 1 {
                    if self.mode == RunMode::Post {
                        let v = match value {
                            Some(true) => RET_TRUE,
                            Some(false) => RET_FALSE,
                            None => 0,
                        };
                        out.push_with(|buf| {
                            buf.extend_from_slice(&c[..q]);
                            buf.extend([RETURNED | v, 0]);
                        });
                    } else {
                        out.push_edit(c, |x| x[q] |= HALTED);
                    }
                } else {
                    let target = match self.nodes[c[top - 1] as usize] {
                        Node::Call { on_true, on_false, .. } => {
                            if value == Some(true) {
                                on_true
                            } else {
                                on_false
                            }
                        }
                        _ => unreachable!("caller frame is not at a call"),
                    };
                    out.push_with(|buf| {
                        let start = buf.len();
                        buf.extend_from_slice(&c[..top]);
                        buf[start + q + 1] -= 1;
                        buf[start + top - 1] = target;
                    });
                }
            }
            Node::Restart => {
                let total: u64 = c[..q].iter().map(|&w| w as u64).sum();
                match self.mode {
                    RunMode::Exact => self.push_restarts(total, flags & OF, out),
                    RunMode::Hub => self.push_marker(total, HUB | (flags & OF), out),
                    RunMode::Post => self.push_marker(total, RESTARTED, out),
                }
            }
            Node::Spin => out.push(c),
        }
    }

    fn output(&self, c: &[Word]) -> Output {
        Output::from_bool(c[self.n_regs] & OF != 0)
    }

    fn describe(&self, c: &[Word]) -> String {
        let q = self.n_regs;
        let flags = c[q];
        let mut s = String::from("{");
        let mut first = true;
        for (i, &v) in c[..q].iter().enumerate() {
            if v > 0 {
                if !first {
                    s.push_str(", ");
                }
                first = false;
                let _ = write!(s, "{}: {v}", self.program.registers[i]);
            }
        }
        let _ = write!(s, "}} OF={}", flags & OF != 0);
        if flags & HUB != 0 {
            s.push_str(" [restarting]");
            return s;
        }
        if flags & RESTARTED != 0 {
            s.push_str(" [restart]");
            return s;
        }
        if flags & RETURNED != 0 {
            let _ = write!(s, " [returned {:?}]", self.outcome(c));
            return s;
        }
        if flags & HALTED != 0 {
            s.push_str(" [halted]");
        }
        let depth = c[q + 1] as usize;
        s.push_str(" stack=[");
        for (k, &n) in c[q + 2..q + 2 + depth].iter().enumerate() {
            if k > 0 {
                s.push_str(", ");
            }
            let l = &self.locations[n as usize];
            let _ = write!(s, "{}{:?}:{}", l.proc, l.path, l.cursor);
        }
        s.push(']');
        s
    }

    fn check_step(&self, c: &[Word], succs: &Successors) -> Result<(), String> {
        if succs.is_empty() {
            return Err("no successor".into());
        }
        let q = self.n_regs;
        let total: u64 = c[..q].iter().map(|&w| w as u64).sum();
        for s in succs.iter() {
            let t: u64 = s[..q].iter().map(|&w| w as u64).sum();
            if t != total {
                return Err(format!("register total changed from {total} to {t}"));
            }
        }
        if c[q] & (TERMINAL | HUB) == 0 {
            let depth = c[q + 1] as usize;
            let top = q + 1 + depth;
            if let Node::Maybe { reg, on_true, on_false } = self.nodes[c[top] as usize] {
                if on_true != on_false {
                    let has_true = succs.iter().any(|s| s[q + 1] as usize == depth && s[top] == on_true);
                    if has_true != (c[reg as usize] > 0) {
                        return Err("maybe true-branch does not match register value".into());
                    }
                }
            }
        }
        Ok(())
    }
}

enum BNode {
    Move(u16, u16, u32),
    Swap(u16, u16, u32),
    SetOf(bool, u32),
    Maybe(u16, u32, u32),
    Call(u16, u32, u32),
    Return(Option<bool>),
    Restart,
    Jump(u32),
    Spin,
}

struct Builder<'a> {
    program: &'a Program,
    proc: usize,
    nodes: Vec<BNode>,
    locs: Vec<Location>,
}

const UNSET: u32 = u32::MAX;

impl<'a> Builder<'a> {
    fn new(program: &'a Program) -> Self {
        Self { program, proc: 0, nodes: Vec::new(), locs: Vec::new() }
    }

    fn emit(&mut self, n: BNode, path: Vec<usize>, cursor: usize) -> u32 {
        self.nodes.push(n);
        self.locs.push(Location { proc: self.program.procedures[self.proc].name.clone(), path, cursor });
        (self.nodes.len() - 1) as u32
    }

    fn reg(&self, r: &str) -> u16 {
        self.program.register_index(r).expect("validated register") as u16
    }

    fn callee(&self, p: &str) -> u16 {
        self.program.procedures.iter().position(|q| q.name == p).expect("validated procedure") as u16
    }

    fn block(&mut self, stmts: &[Stmt], mut next: u32, prefix: &[usize]) -> u32 {
        for (i, s) in stmts.iter().enumerate().rev() {
            let mut path = prefix.to_vec();
            path.push(i);
            next = self.stmt(s, next, path);
        }
        next
    }

    fn stmt(&mut self, s: &Stmt, next: u32, path: Vec<usize>) -> u32 {
        match s {
            Stmt::Move { src, dst } => {
                let n = BNode::Move(self.reg(src), self.reg(dst), next);
                self.emit(n, path, 0)
            }
            Stmt::Swap { a, b } => {
                let n = BNode::Swap(self.reg(a), self.reg(b), next);
                self.emit(n, path, 0)
            }
            Stmt::SetOf { value } => self.emit(BNode::SetOf(*value, next), path, 0),
            Stmt::Restart => self.emit(BNode::Restart, path, 0),
            Stmt::Return { value } => self.emit(BNode::Return(*value), path, 0),
            Stmt::Call { proc } => {
                let n = BNode::Call(self.callee(proc), next, next);
                self.emit(n, path, 0)
            }
            Stmt::If { cond, then, otherwise } => {
                let mut tp = path.clone();
                tp.push(0);
                let t = self.block(then, next, &tp);
                let mut ep = path.clone();
                ep.push(1);
                let e = self.block(otherwise, next, &ep);
                self.cond(cond, t, e, &path, 0)
            }
            Stmt::While { cond, body } => {
                let spin_cursor = cond.atoms().len();
                let head = self.emit(BNode::Jump(UNSET), path.clone(), spin_cursor);
                let b = self.block(body, head, &path);
                let entry = if static_value(cond) == Some(true) { b } else { self.cond(cond, b, next, &path, 0) };
                self.nodes[head as usize] = BNode::Jump(entry);
                head
            }
            Stmt::For { count, body } => {
                // Only reached for programs built without prior expansion.
                let mut next = next;
                for _ in 0..*count {
                    next = self.block(body, next, &path);
                }
                next
            }
        }
    }

    /// Compiles `c` so that control reaches `t` when it holds and `f` otherwise.
    fn cond(&mut self, c: &Condition, t: u32, f: u32, path: &[usize], base: usize) -> u32 {
        match c {
            Condition::True => t,
            Condition::Maybe(r) => {
                let n = BNode::Maybe(self.reg(r), t, f);
                self.emit(n, path.to_vec(), base)
            }
            Condition::Call(p) => {
                let n = BNode::Call(self.callee(p), t, f);
                self.emit(n, path.to_vec(), base)
            }
            Condition::Not(inner) => self.cond(inner, f, t, path, base),
            Condition::And(a, b) => {
                let eb = self.cond(b, t, f, path, base + a.atoms().len());
                self.cond(a, eb, f, path, base)
            }
            Condition::Or(a, b) => {
                let eb = self.cond(b, t, f, path, base + a.atoms().len());
                self.cond(a, t, eb, path, base)
            }
        }
    }

    /// Removes jump nodes, turning jump-only cycles into spin nodes, and
    /// renumbers the remaining nodes densely.
    #[allow(clippy::type_complexity)]
    fn finish(mut self) -> Result<(Vec<Node>, Vec<Location>, impl Fn(u32) -> u16)> {
        let n = self.nodes.len();
        let mut target: Vec<u32> = (0..n as u32).collect();
        let mut done = vec![false; n];
        for j in 0..n {
            if done[j] || !matches!(self.nodes[j], BNode::Jump(_)) {
                continue;
            }
            let mut chain = Vec::new();
            let mut cur = j as u32;
            let end = loop {
                let c = cur as usize;
                match self.nodes[c] {
                    BNode::Jump(_) if done[c] => break target[c],
                    BNode::Jump(_) if chain.contains(&cur) => {
                        self.nodes[c] = BNode::Spin;
                        break cur;
                    }
                    BNode::Jump(t) => {
                        chain.push(cur);
                        cur = t;
                    }
                    _ => break cur,
                }
            };
            for c in chain {
                target[c as usize] = end;
                done[c as usize] = true;
            }
        }
        let mut new_id = vec![u32::MAX; n];
        let mut count = 0u32;
        for (i, node) in self.nodes.iter().enumerate() {
            if !matches!(node, BNode::Jump(_)) {
                new_id[i] = count;
                count += 1;
            }
        }
        if count as usize > Word::MAX as usize {
            return Err(crate::Error::Bound(format!("program has {count} control nodes")));
        }
        let remap = move |t: u32| -> u16 { new_id[target[t as usize] as usize] as u16 };
        let mut nodes = Vec::with_capacity(count as usize);
        let mut locs = Vec::with_capacity(count as usize);
        for (i, node) in self.nodes.iter().enumerate() {
            let out = match *node {
                BNode::Jump(_) => continue,
                BNode::Move(s, d, nx) => Node::Move { src: s, dst: d, next: remap(nx) },
                BNode::Swap(a, b, nx) => Node::Swap { a, b, next: remap(nx) },
                BNode::SetOf(v, nx) => Node::SetOf { value: v, next: remap(nx) },
                BNode::Maybe(r, t, f) => Node::Maybe { reg: r, on_true: remap(t), on_false: remap(f) },
                BNode::Call(p, t, f) => Node::Call { callee: p, on_true: remap(t), on_false: remap(f) },
                BNode::Return(v) => Node::Return { value: v },
                BNode::Restart => Node::Restart,
                BNode::Spin => Node::Spin,
            };
            nodes.push(out);
            locs.push(self.locs[i].clone());
        }
        Ok((nodes, locs, remap))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::build::*;
    use crate::program::Procedure;

    fn prog(registers: &[&str], procs: Vec<Procedure>) -> Program {
        Program { registers: registers.iter().map(|s| s.to_string()).collect(), main: "Main".into(), procedures: procs }
    }

    fn succ(sem: &ProgramSemantics, c: &[Word]) -> Vec<Vec<Word>> {
        let mut out = Successors::new();
        sem.successors(c, &mut out);
        out.iter().map(|s| s.to_vec()).collect()
    }

    #[test]
    fn move_advances_and_hangs() {
        let p = prog(&["x", "y"], vec![procedure("Main", false, vec![mv("x", "y"), set_of(true)])]);
        let sem = ProgramSemantics::new(&p).unwrap();
        let c = sem.encode_initial(&[1, 0], false).unwrap();
        let s = succ(&sem, &c);
        assert_eq!(s.len(), 1);
        let d = sem.decode(&s[0]);
        assert_eq!(d.registers, Multiset::from_pairs([(1, 1)]));
        assert_eq!(d.frames[0].path, vec![1]);
        let c0 = sem.encode_initial(&[0, 0], true).unwrap();
        let s = succ(&sem, &c0);
        let d = sem.decode(&s[0]);
        assert!(d.halted && d.of);
        assert_eq!(succ(&sem, &s[0]), vec![s[0].clone()]);
    }

    #[test]
    fn maybe_on_zero_has_one_successor() {
        let p = prog(&["x"], vec![procedure("Main", false, vec![if_(maybe("x"), vec![set_of(true)])])]);
        let sem = ProgramSemantics::new(&p).unwrap();
        assert_eq!(succ(&sem, &sem.encode_initial(&[0], false).unwrap()).len(), 1);
        assert_eq!(succ(&sem, &sem.encode_initial(&[2], false).unwrap()).len(), 2);
    }

    #[test]
    fn restart_enumerates_compositions() {
        let p = prog(&["x", "y"], vec![procedure("Main", false, vec![restart()])]);
        let sem = ProgramSemantics::new(&p).unwrap();
        let d = sem.initial(Multiset::from_pairs([(0, 1), (1, 1)]), true);
        let s = sem.successors_of(&d).unwrap();
        let regs: Vec<Vec<u64>> = s.iter().map(|d| d.registers.to_dense(2)).collect();
        assert_eq!(regs, vec![vec![2, 0], vec![1, 1], vec![0, 2]]);
        assert!(s.iter().all(|d| d.of && d.frames.len() == 1 && !d.halted));
    }

    #[test]
    fn call_and_return_value() {
        let p = prog(
            &["x"],
            vec![
                procedure("Main", false, vec![if_else(not(calls("T")), vec![set_of(false)], vec![set_of(true)])]),
                procedure("T", true, vec![ret(true)]),
            ],
        );
        let sem = ProgramSemantics::new(&p).unwrap();
        let c = sem.encode_initial(&[0], false).unwrap();
        let s1 = succ(&sem, &c);
        assert_eq!(sem.decode(&s1[0]).frames.len(), 2);
        let s2 = succ(&sem, &s1[0]);
        let s3 = succ(&sem, &s2[0]);
        let s4 = succ(&sem, &s3[0]);
        assert_eq!(sem.decode(&s2[0]).frames.len(), 1);
        assert!(sem.decode(&s3[0]).of);
        // Falling off the end of main halts.
        assert!(sem.decode(&s4[0]).halted);
    }

    #[test]
    fn empty_infinite_loop_spins() {
        let p = prog(&["x"], vec![procedure("Main", false, vec![set_of(true), while_(tt(), vec![])])]);
        let sem = ProgramSemantics::new(&p).unwrap();
        let c = sem.encode_initial(&[3], false).unwrap();
        let s = succ(&sem, &c);
        assert_eq!(succ(&sem, &s[0]), vec![s[0].clone()]);
        assert!(!sem.decode(&s[0]).halted);
    }

    #[test]
    fn nested_static_loops_spin() {
        let p = prog(&["x"], vec![procedure("Main", false, vec![while_(tt(), vec![while_(not(not(tt())), vec![])])])]);
        let sem = ProgramSemantics::new(&p).unwrap();
        let c = sem.encode_initial(&[0], false).unwrap();
        assert_eq!(succ(&sem, &c), vec![c.clone()]);
    }

    #[test]
    fn typed_round_trip() {
        let p = prog(&["x", "y"], vec![procedure("Main", false, vec![while_(or(maybe("x"), maybe("y")), vec![swap("x", "y")])])]);
        let sem = ProgramSemantics::new(&p).unwrap();
        let d = sem.initial(Multiset::from_pairs([(0, 2)]), false);
        for s in sem.successors_of(&d).unwrap() {
            assert_eq!(sem.decode(&sem.encode(&s).unwrap()), s);
        }
        assert_eq!(d.frames[0], Location { proc: "Main".into(), path: vec![0], cursor: 0 });
    }
}
