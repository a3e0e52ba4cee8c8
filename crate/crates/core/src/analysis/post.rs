//! Post-sets of procedure executions, and program verification that
//! summarizes every call by its post-set.
//!
//! A call from register configuration `C` has three kinds of outcome: it
//! returns with some `C'` and value, it restarts, or some fair execution
//! never leaves it (written ⊥). The last case holds exactly when the
//! execution graph of the call, with exits made absorbing, has a reachable
//! bottom component that is not an exit. Summaries are memoized per
//! `(procedure, registers)`, so a callee is explored once however many
//! caller contexts reach it.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::rc::Rc;
use std::time::Instant;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use super::explore::{bottom_analysis, explore, ExploreOptions, GraphBuilder};
use super::verify::{report_from_graph, MReport, VerifyOptions};
use crate::error::{Error, Result};
use crate::multiset::{for_each_composition, Multiset};
use crate::predicate::Predicate;
use crate::program::semantics::{Node, Outcome, HALTED, HUB, OF, RESTARTED, RETURNED, RET_FALSE, RET_TRUE};
use crate::program::{Program, ProgramSemantics, RunMode};
use crate::system::{word, Output, Word};

const DIVERGED: Word = 128;
const EXIT: Word = RETURNED | RESTARTED;
const ABSORBING: Word = EXIT | HALTED | DIVERGED;

/// Outcomes of running one procedure from one register configuration.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PostSet {
    /// `(C', b)` for every reachable return; `b` is `None` for procedures
    /// without a return value.
    pub returns: BTreeSet<(Vec<u64>, Option<bool>)>,
    pub restart: bool,
    /// ⊥: some fair execution hangs or never leaves the procedure.
    pub bottom: bool,
}

#[derive(Serialize, Deserialize)]
struct ReturnJson {
    registers: serde_json::Value,
    value: Option<bool>,
}

impl PostSet {
    pub fn only_returns(returns: impl IntoIterator<Item = (Vec<u64>, Option<bool>)>) -> Self {
        Self { returns: returns.into_iter().collect(), restart: false, bottom: false }
    }

    pub fn to_json(&self, registers: &[String]) -> serde_json::Value {
        let symbols = crate::multiset::Symbols::from_names(registers.iter().cloned());
        let returns: Vec<ReturnJson> = self
            .returns
            .iter()
            .map(|(c, v)| ReturnJson { registers: Multiset::from_dense(c).to_json(&symbols), value: *v })
            .collect();
        serde_json::json!({ "returns": returns, "restart": self.restart, "bottom": self.bottom })
    }
}

struct Summary {
    returns: Vec<(Vec<Word>, Option<bool>)>,
    restart: bool,
    bottom: bool,
}

/// Memoizing post-set computation over one program.
pub struct Summarizer<'a> {
    sem: &'a ProgramSemantics,
    memo: FxHashMap<(u16, Vec<Word>), Rc<Summary>>,
    cap: usize,
    /// Nodes explored over all summaries so far.
    pub explored_nodes: usize,
}

fn emit(b: &mut GraphBuilder, key: &mut Vec<Word>, regs: &[Word], flags: Word, node: Word, top: bool) {
    key.clear();
    key.extend_from_slice(regs);
    key.push(flags);
    key.push(node);
    let out = if top {
        Output::from_bool(flags & OF != 0)
    } else {
        Output::from_bool(flags & EXIT != 0)
    };
    b.successor(key, || out);
}

impl<'a> Summarizer<'a> {
    /// `cap` bounds the execution graph of each single summary.
    pub fn new(sem: &'a ProgramSemantics, cap: usize) -> Self {
        Self { sem, memo: FxHashMap::default(), cap, explored_nodes: 0 }
    }

    /// Post-set of `proc` started with a single frame on registers `regs`.
    pub fn post(&mut self, proc: &str, regs: &[u64]) -> Result<PostSet> {
        let pid = self.sem.proc_id(proc).ok_or_else(|| Error::UnknownName(proc.into()))?;
        if regs.len() != self.sem.n_registers() {
            return Err(Error::Bound(format!("expected {} registers, got {}", self.sem.n_registers(), regs.len())));
        }
        let words = regs.iter().map(|&r| word(r)).collect::<Result<Vec<_>>>()?;
        let s = self.summary(pid as u16, &words)?;
        Ok(PostSet {
            returns: s.returns.iter().map(|(c, v)| (c.iter().map(|&w| w as u64).collect(), *v)).collect(),
            restart: s.restart,
            bottom: s.bottom,
        })
    }

    fn summary(&mut self, proc: u16, regs: &[Word]) -> Result<Rc<Summary>> {
        if let Some(s) = self.memo.get(&(proc, regs.to_vec())) {
            return Ok(s.clone());
        }
        let q = regs.len();
        let mut b = GraphBuilder::new();
        let mut key = regs.to_vec();
        key.extend([0, self.sem.entries[proc as usize]]);
        let root = b.add_root(&key, || Output::False);
        let mut cur = Vec::new();
        while b.expanded() < b.len() {
            if b.len() > self.cap {
                return Err(Error::CapExceeded { cap: self.cap });
            }
            let v = b.expanded() as u32;
            cur.clear();
            cur.extend_from_slice(b.config(v));
            self.expand(&mut b, &mut key, &cur, v, false)?;
            b.end_row();
        }
        let g = b.finish(false);
        self.explored_nodes += g.n_nodes();
        let ba = bottom_analysis(&g);
        // Exits are absorbing singletons with output true, so any bottom
        // component with a false node is a non-exit one.
        let r = ba.reach[ba.comp_of(root) as usize];
        let mut s = Summary { returns: Vec::new(), restart: false, bottom: r[1].is_some() || r[2].is_some() };
        for v in 0..g.n_nodes() as u32 {
            let c = g.config(v);
            let flags = c[q];
            if flags & RETURNED != 0 {
                let value = match flags & (RET_TRUE | RET_FALSE) {
                    RET_TRUE => Some(true),
                    RET_FALSE => Some(false),
                    _ => None,
                };
                s.returns.push((c[..q].to_vec(), value));
            } else if flags & RESTARTED != 0 {
                s.restart = true;
            }
        }
        s.returns.sort();
        let s = Rc::new(s);
        self.memo.insert((proc, regs.to_vec()), s.clone());
        Ok(s)
    }

    /// Successors of one node of a summary graph (`top == false`) or of the
    /// main-level graph (`top == true`). Layout: `regs, flags, node`.
    fn expand(&mut self, b: &mut GraphBuilder, key: &mut Vec<Word>, cur: &[Word], v: u32, top: bool) -> Result<()> {
        let q = self.sem.n_registers();
        let flags = cur[q];
        let of = flags & OF;
        let regs = &cur[..q];
        let zeros = vec![0; q];
        if flags & ABSORBING != 0 {
            b.edge(v);
            return Ok(());
        }
        if flags & HUB != 0 {
            let entry = self.sem.entries[self.sem.main_id() as usize];
            let total = regs.first().copied().unwrap_or(0) as u64;
            for_each_composition(total, q, |c| {
                let c: Vec<Word> = c.iter().map(|&x| x as Word).collect();
                emit(b, key, &c, of, entry, true);
            });
            return Ok(());
        }
        let node = cur[q + 1];
        let restart = |b: &mut GraphBuilder, key: &mut Vec<Word>| {
            if top {
                let mut marker = zeros.clone();
                if q > 0 {
                    marker[0] = regs.iter().sum();
                }
                emit(b, key, &marker, HUB | of, 0, true);
            } else {
                emit(b, key, &zeros, RESTARTED, 0, false);
            }
        };
        match self.sem.nodes[node as usize] {
            Node::Move { src, dst, next } => {
                if regs[src as usize] > 0 {
                    let mut r = regs.to_vec();
                    r[src as usize] -= 1;
                    r[dst as usize] += 1;
                    emit(b, key, &r, of, next, top);
                } else {
                    emit(b, key, regs, of | HALTED, node, top);
                }
            }
            Node::Swap { a, b: c, next } => {
                let mut r = regs.to_vec();
                r.swap(a as usize, c as usize);
                emit(b, key, &r, of, next, top);
            }
            Node::SetOf { value, next } => {
                let f = if top && value { OF } else { 0 };
                emit(b, key, regs, f, next, top);
            }
            Node::Maybe { reg, on_true, on_false } => {
                emit(b, key, regs, of, on_false, top);
                if regs[reg as usize] > 0 {
                    emit(b, key, regs, of, on_true, top);
                }
            }
            Node::Call { callee, on_true, on_false } => {
                let s = self.summary(callee, regs)?;
                for (r, value) in &s.returns {
                    emit(b, key, r, of, if *value == Some(true) { on_true } else { on_false }, top);
                }
                if s.restart {
                    restart(b, key);
                }
                if s.bottom {
                    emit(b, key, &zeros, DIVERGED | of, 0, top);
                }
            }
            Node::Return { value } => {
                if top {
                    emit(b, key, regs, of | HALTED, node, top);
                } else {
                    let bits = match value {
                        Some(true) => RET_TRUE,
                        Some(false) => RET_FALSE,
                        None => 0,
                    };
                    emit(b, key, regs, RETURNED | bits, 0, top);
                }
            }
            Node::Restart => restart(b, key),
            Node::Spin => b.edge(v),
        }
        Ok(())
    }

    fn describe_top(&self, c: &[Word]) -> String {
        let q = self.sem.n_registers();
        let names = &self.sem.program().registers;
        let mut s = String::from("{");
        let mut first = true;
        for (i, &v) in c[..q].iter().enumerate() {
            if v > 0 {
                if !first {
                    s.push_str(", ");
                }
                first = false;
                let _ = write!(s, "{}: {v}", names[i]);
            }
        }
        let flags = c[q];
        let _ = write!(s, "}} OF={}", flags & OF != 0);
        if flags & HUB != 0 {
            s.push_str(" [restarting]");
        } else if flags & DIVERGED != 0 {
            s.push_str(" [diverged in call]");
        } else {
            if flags & HALTED != 0 {
                s.push_str(" [halted]");
            }
            let l = self.sem.location(c[q + 1]);
            let _ = write!(s, " at {}{:?}:{}", l.proc, l.path, l.cursor);
        }
        s
    }
}

/// Exact post-set of `proc` from registers `regs`.
pub fn explore_post(sem: &ProgramSemantics, proc: &str, regs: &[u64], cap: usize) -> Result<PostSet> {
    Summarizer::new(sem, cap).post(proc, regs)
}

/// The same post-set computed on the flat configuration graph, without
/// summaries. Used to cross-check [`explore_post`].
pub fn explore_post_flat(p: &Program, proc: &str, regs: &[u64], cap: usize) -> Result<PostSet> {
    let sem = ProgramSemantics::new(p)?.with_mode(RunMode::Post);
    let pid = sem.proc_id(proc).ok_or_else(|| Error::UnknownName(proc.into()))?;
    let start = sem.encode_start(regs, false, pid)?;
    let g = explore(&sem, &[start], ExploreOptions { cap, check_invariants: false });
    if g.truncated {
        return Err(Error::CapExceeded { cap });
    }
    let ba = bottom_analysis(&g);
    let mut post = PostSet::default();
    for v in 0..g.n_nodes() as u32 {
        let c = g.config(v);
        match sem.outcome(c) {
            Outcome::Return(r, value) => {
                post.returns.insert((r, value));
            }
            Outcome::Restart => post.restart = true,
            Outcome::Running => {
                if ba.bottom[ba.comp_of(v) as usize] {
                    post.bottom = true;
                }
            }
        }
    }
    Ok(post)
}

/// Every register configuration of total `m`, with both output flags, as
/// encoded initial program configurations.
pub fn program_initials(sem: &ProgramSemantics, m: u64) -> Vec<Vec<Word>> {
    let mut v = Vec::new();
    for_each_composition(m, sem.n_registers(), |c| {
        for of in [false, true] {
            v.push(sem.encode_initial(c, of).expect("population fits a configuration word"));
        }
    });
    v
}

/// Program-level verdicts for population size `m`, with calls summarized by
/// their post-sets. Requires that only the main procedure writes the
/// output flag and that main is never called.
pub fn verify_program(sem: &ProgramSemantics, m: u64, expected: &Predicate, opts: VerifyOptions) -> Result<MReport> {
    let t0 = Instant::now();
    let p = sem.program();
    for proc in &p.procedures {
        let called = p.procedures.iter().any(|other| other.name != proc.name && p.callees(&other.name).contains(&proc.name));
        if proc.name == p.main && called {
            return Err(Error::Invalid(vec![format!("main procedure `{}` is called", p.main)]));
        }
        if proc.name != p.main && writes_output(&proc.body) {
            return Err(Error::Invalid(vec![format!("procedure `{}` writes the output flag", proc.name)]));
        }
    }
    let q = sem.n_registers();
    let entry = sem.entries[sem.main_id() as usize];
    let mut s = Summarizer::new(sem, opts.cap);
    let mut b = GraphBuilder::new();
    for_each_composition(m, q, |c| {
        for of in [0, OF] {
            let mut key: Vec<Word> = c.iter().map(|&x| x as Word).collect();
            key.extend([of, entry]);
            b.add_root(&key, || Output::from_bool(of != 0));
        }
    });
    let mut key = Vec::new();
    let mut cur = Vec::new();
    let mut truncated = false;
    while b.expanded() < b.len() {
        if b.len() > opts.cap {
            truncated = true;
            break;
        }
        let v = b.expanded() as u32;
        cur.clear();
        cur.extend_from_slice(b.config(v));
        s.expand(&mut b, &mut key, &cur, v, true)?;
        b.end_row();
    }
    let g = b.finish(truncated);
    let mut r = report_from_graph(&g, &|c| s.describe_top(c), m, expected, opts);
    r.summarized_nodes = s.explored_nodes;
    r.seconds = t0.elapsed().as_secs_f64();
    Ok(r)
}

fn writes_output(body: &[crate::program::Stmt]) -> bool {
    use crate::program::Stmt;
    body.iter().any(|s| match s {
        Stmt::SetOf { .. } => true,
        Stmt::While { body, .. } | Stmt::For { body, .. } => writes_output(body),
        Stmt::If { then, otherwise, .. } => writes_output(then) || writes_output(otherwise),
        _ => false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construction::{build_example_program, build_threshold_program};
    use crate::program::build::*;

    fn sem(p: &Program) -> ProgramSemantics {
        ProgramSemantics::new(p).unwrap()
    }

    #[test]
    fn test_procedure_post() {
        let p = build_example_program();
        let s = sem(&p);
        let post = explore_post(&s, "Test@4", &[5, 0, 0], 1000).unwrap();
        assert!(!post.restart && !post.bottom);
        let expected: BTreeSet<_> = [
            (vec![5, 0, 0], Some(false)),
            (vec![4, 1, 0], Some(false)),
            (vec![3, 2, 0], Some(false)),
            (vec![2, 3, 0], Some(false)),
            (vec![1, 4, 0], Some(true)),
        ]
        .into();
        assert_eq!(post.returns, expected);
    }

    #[test]
    fn clean_restarts_on_z() {
        let p = build_example_program();
        let s = sem(&p);
        let post = explore_post(&s, "Clean", &[1, 1, 1], 1000).unwrap();
        assert!(post.restart && !post.bottom);
        let post = explore_post(&s, "Clean", &[1, 1, 0], 1000).unwrap();
        assert!(!post.restart);
        assert_eq!(post.returns.len(), 2);
    }

    #[test]
    fn hang_and_spin_are_bottom() {
        let p = Program {
            registers: vec!["a".into(), "b".into()],
            main: "Main".into(),
            procedures: vec![
                procedure("Main", false, vec![call("H"), call("S")]),
                procedure("H", false, vec![mv("a", "b")]),
                procedure("S", false, vec![if_(maybe("a"), vec![while_(tt(), vec![])])]),
            ],
        };
        let s = sem(&p);
        assert!(explore_post(&s, "H", &[0, 1], 100).unwrap().bottom);
        assert!(!explore_post(&s, "H", &[1, 0], 100).unwrap().bottom);
        let post = explore_post(&s, "S", &[1, 0], 100).unwrap();
        assert!(post.bottom);
        assert_eq!(post.returns.len(), 1);
        assert!(!explore_post(&s, "S", &[0, 1], 100).unwrap().bottom);
    }

    #[test]
    fn summarized_matches_flat() {
        let p = build_threshold_program(1);
        let s = sem(&p);
        let mut sum = Summarizer::new(&s, 100_000);
        for t in 0..=4 {
            for_each_composition(t, 5, |c| {
                for proc in ["Zero@x1", "Large@xb1", "IncrPair@x1y1", "CheckProper@1", "CheckEmpty@1", "Main"] {
                    let a = sum.post(proc, c).unwrap();
                    let b = explore_post_flat(&p, proc, c, 100_000).unwrap();
                    assert_eq!(a, b, "{proc} on {c:?}");
                }
            });
        }
    }

    #[test]
    fn summarized_verdicts_match_flat() {
        use super::super::verify::verify_decides;
        for (p, pred, ms) in [
            (build_example_program(), Predicate::range(4u32, 6u32), 0..=9u64),
            (build_threshold_program(1), Predicate::threshold(2u32), 0..=7),
        ] {
            let s = sem(&p);
            let hub = ProgramSemantics::new(&p).unwrap().with_mode(RunMode::Hub);
            for m in ms {
                let a = verify_program(&s, m, &pred, VerifyOptions::default()).unwrap();
                let b = verify_decides(&hub, &program_initials(&hub, m), m, &pred, VerifyOptions::default());
                assert_eq!(a.verdict, b.verdict, "m={m}");
                assert!(a.matches && b.matches, "m={m}");
            }
        }
    }

    #[test]
    fn output_writes_outside_main_are_rejected() {
        let p = Program {
            registers: vec!["a".into()],
            main: "Main".into(),
            procedures: vec![procedure("Main", false, vec![call("P")]), procedure("P", false, vec![set_of(true)])],
        };
        let s = sem(&p);
        assert!(verify_program(&s, 1, &Predicate::threshold(0u32), VerifyOptions::default()).is_err());
    }
}
