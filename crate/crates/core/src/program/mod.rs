//! Structured population programs.
//!
//! A program manipulates natural-valued registers through unit moves,
//! nondeterministic nonzero tests and swaps, raises an output flag, and may
//! restart itself from an arbitrary register configuration of equal total.

pub(crate) mod semantics;
mod validate;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use semantics::{Frame, Location, ProgConfig, ProgramSemantics, RunMode};
pub use validate::{validate, Diagnostic};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Program {
    pub registers: Vec<String>,
    pub main: String,
    pub procedures: Vec<Procedure>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Procedure {
    pub name: String,
    #[serde(rename = "returns")]
    pub returns_value: bool,
    pub body: Vec<Stmt>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Stmt {
    Move { src: String, dst: String },
    Swap { a: String, b: String },
    SetOf { value: bool },
    Restart,
    Return { value: Option<bool> },
    While { cond: Condition, body: Vec<Stmt> },
    If {
        cond: Condition,
        then: Vec<Stmt>,
        #[serde(rename = "else", default)]
        otherwise: Vec<Stmt>,
    },
    For { count: u32, body: Vec<Stmt> },
    Call { proc: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// `maybe x > 0`
    Maybe(String),
    /// Value returned by a procedure call.
    Call(String),
    True,
    Not(Box<Condition>),
    And(Box<Condition>, Box<Condition>),
    Or(Box<Condition>, Box<Condition>),
}

impl Condition {
    pub fn binary_ops(&self) -> usize {
        match self {
            Condition::Maybe(_) | Condition::Call(_) | Condition::True => 0,
            Condition::Not(c) => c.binary_ops(),
            Condition::And(a, b) | Condition::Or(a, b) => 1 + a.binary_ops() + b.binary_ops(),
        }
    }

    /// Atoms that execute as instructions, left to right.
    pub fn atoms(&self) -> Vec<&Condition> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<&'a Condition>) {
        match self {
            Condition::Maybe(_) | Condition::Call(_) => out.push(self),
            Condition::True => {}
            Condition::Not(c) => c.collect_atoms(out),
            Condition::And(a, b) | Condition::Or(a, b) => {
                a.collect_atoms(out);
                b.collect_atoms(out);
            }
        }
    }
}

/// Shorthand constructors used by the builders and tests.
pub mod build {
    use super::{Condition, Procedure, Stmt};

    pub fn mv(src: &str, dst: &str) -> Stmt {
        Stmt::Move { src: src.into(), dst: dst.into() }
    }
    pub fn swap(a: &str, b: &str) -> Stmt {
        Stmt::Swap { a: a.into(), b: b.into() }
    }
    pub fn set_of(value: bool) -> Stmt {
        Stmt::SetOf { value }
    }
    pub fn restart() -> Stmt {
        Stmt::Restart
    }
    pub fn ret(value: bool) -> Stmt {
        Stmt::Return { value: Some(value) }
    }
    pub fn ret_none() -> Stmt {
        Stmt::Return { value: None }
    }
    pub fn call(p: &str) -> Stmt {
        Stmt::Call { proc: p.into() }
    }
    pub fn while_(cond: Condition, body: Vec<Stmt>) -> Stmt {
        Stmt::While { cond, body }
    }
    pub fn if_(cond: Condition, then: Vec<Stmt>) -> Stmt {
        Stmt::If { cond, then, otherwise: Vec::new() }
    }
    pub fn if_else(cond: Condition, then: Vec<Stmt>, otherwise: Vec<Stmt>) -> Stmt {
        Stmt::If { cond, then, otherwise }
    }
    pub fn for_(count: u32, body: Vec<Stmt>) -> Stmt {
        Stmt::For { count, body }
    }
    pub fn maybe(r: &str) -> Condition {
        Condition::Maybe(r.into())
    }
    pub fn calls(p: &str) -> Condition {
        Condition::Call(p.into())
    }
    pub fn tt() -> Condition {
        Condition::True
    }
    pub fn not(c: Condition) -> Condition {
        Condition::Not(Box::new(c))
    }
    pub fn and(a: Condition, b: Condition) -> Condition {
        Condition::And(Box::new(a), Box::new(b))
    }
    pub fn or(a: Condition, b: Condition) -> Condition {
        Condition::Or(Box::new(a), Box::new(b))
    }
    pub fn procedure(name: &str, returns_value: bool, body: Vec<Stmt>) -> Procedure {
        Procedure { name: name.into(), returns_value, body }
    }
}

/// `|Q| + L + S`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeBreakdown {
    pub n_registers: usize,
    pub n_instructions: usize,
    pub swap_size: usize,
    pub total: usize,
}

impl Program {
    pub fn procedure(&self, name: &str) -> Option<&Procedure> {
        self.procedures.iter().find(|p| p.name == name)
    }

    pub fn register_index(&self, name: &str) -> Option<usize> {
        self.registers.iter().position(|r| r == name)
    }

    pub fn from_json(text: &str) -> Result<Program> {
        Ok(serde_json::from_str(text)?)
    }

    /// Canonical JSON text (sorted keys, pretty-printed).
    pub fn to_json(&self) -> String {
        crate::canonical_json(self).expect("programs always serialize")
    }

    /// Validates and fails with every diagnostic at once.
    pub fn check(&self) -> Result<()> {
        let d = validate(self);
        if d.is_empty() {
            Ok(())
        } else {
            Err(Error::Invalid(d.iter().map(|d| d.to_string()).collect()))
        }
    }

    /// Replaces every `For(k, B)` by `k` consecutive copies of `B`.
    pub fn expand_for(&self) -> Program {
        let mut p = self.clone();
        for proc in &mut p.procedures {
            proc.body = expand_block(&proc.body);
        }
        p
    }

    pub fn has_for(&self) -> bool {
        fn any(block: &[Stmt]) -> bool {
            block.iter().any(|s| match s {
                Stmt::For { .. } => true,
                Stmt::While { body, .. } => any(body),
                Stmt::If { then, otherwise, .. } => any(then) || any(otherwise),
                _ => false,
            })
        }
        self.procedures.iter().any(|p| any(&p.body))
    }

    /// Size of the for-expanded program.
    pub fn size(&self) -> SizeBreakdown {
        let expanded = self.expand_for();
        let mut instructions = 0;
        let mut swaps = Vec::new();
        for p in &expanded.procedures {
            count_block(&p.body, &mut instructions, &mut swaps);
        }
        let swap_size = swap_components(&self.registers, &swaps)
            .iter()
            .map(|c| c.len() * (c.len() - 1))
            .sum();
        let n_registers = self.registers.len();
        SizeBreakdown {
            n_registers,
            n_instructions: instructions,
            swap_size,
            total: n_registers + instructions + swap_size,
        }
    }

    /// Every `Swap(a, b)` in the program as a pair of register names.
    pub fn swap_pairs(&self) -> Vec<(String, String)> {
        fn walk(block: &[Stmt], out: &mut Vec<(String, String)>) {
            for s in block {
                match s {
                    Stmt::Swap { a, b } => out.push((a.clone(), b.clone())),
                    Stmt::While { body, .. } | Stmt::For { body, .. } => walk(body, out),
                    Stmt::If { then, otherwise, .. } => {
                        walk(then, out);
                        walk(otherwise, out);
                    }
                    _ => {}
                }
            }
        }
        let mut out = Vec::new();
        for p in &self.procedures {
            walk(&p.body, &mut out);
        }
        out
    }

    /// Procedures called anywhere in `name`'s body.
    pub fn callees(&self, name: &str) -> BTreeSet<String> {
        fn cond(c: &Condition, out: &mut BTreeSet<String>) {
            match c {
                Condition::Call(p) => {
                    out.insert(p.clone());
                }
                Condition::Not(c) => cond(c, out),
                Condition::And(a, b) | Condition::Or(a, b) => {
                    cond(a, out);
                    cond(b, out);
                }
                _ => {}
            }
        }
        fn walk(block: &[Stmt], out: &mut BTreeSet<String>) {
            for s in block {
                match s {
                    Stmt::Call { proc } => {
                        out.insert(proc.clone());
                    }
                    Stmt::While { cond: c, body } => {
                        cond(c, out);
                        walk(body, out);
                    }
                    Stmt::If { cond: c, then, otherwise } => {
                        cond(c, out);
                        walk(then, out);
                        walk(otherwise, out);
                    }
                    Stmt::For { body, .. } => walk(body, out),
                    _ => {}
                }
            }
        }
        let mut out = BTreeSet::new();
        if let Some(p) = self.procedure(name) {
            walk(&p.body, &mut out);
        }
        out
    }

    /// Procedures reachable from `main` through calls, in discovery order.
    pub fn reachable_procedures(&self) -> Vec<String> {
        let mut seen = vec![self.main.clone()];
        let mut i = 0;
        while i < seen.len() {
            for c in self.callees(&seen[i]) {
                if !seen.contains(&c) {
                    seen.push(c);
                }
            }
            i += 1;
        }
        seen
    }
}

fn expand_block(block: &[Stmt]) -> Vec<Stmt> {
    let mut out = Vec::new();
    for s in block {
        match s {
            Stmt::For { count, body } => {
                let inner = expand_block(body);
                for _ in 0..*count {
                    out.extend(inner.iter().cloned());
                }
            }
            Stmt::While { cond, body } => out.push(Stmt::While { cond: cond.clone(), body: expand_block(body) }),
            Stmt::If { cond, then, otherwise } => out.push(Stmt::If {
                cond: cond.clone(),
                then: expand_block(then),
                otherwise: expand_block(otherwise),
            }),
            other => out.push(other.clone()),
        }
    }
    out
}

fn count_block(block: &[Stmt], n: &mut usize, swaps: &mut Vec<(String, String)>) {
    for s in block {
        match s {
            Stmt::Move { .. } | Stmt::SetOf { .. } | Stmt::Restart | Stmt::Return { .. } | Stmt::Call { .. } => *n += 1,
            Stmt::Swap { a, b } => {
                *n += 1;
                swaps.push((a.clone(), b.clone()));
            }
            Stmt::While { cond, body } => {
                *n += cond.atoms().len();
                count_block(body, n, swaps);
            }
            Stmt::If { cond, then, otherwise } => {
                *n += cond.atoms().len();
                count_block(then, n, swaps);
                count_block(otherwise, n, swaps);
            }
            Stmt::For { body, .. } => count_block(body, n, swaps),
        }
    }
}

/// Connected components of the undirected swap graph, each sorted by
/// register order; singleton components included.
pub fn swap_components(registers: &[String], swaps: &[(String, String)]) -> Vec<Vec<usize>> {
    let n = registers.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (a, b) in swaps {
        let (Some(a), Some(b)) = (
            registers.iter().position(|r| r == a),
            registers.iter().position(|r| r == b),
        ) else {
            continue;
        };
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let mut comps: Vec<Vec<usize>> = Vec::new();
    let mut index_of_root = vec![usize::MAX; n];
    for r in 0..n {
        let root = find(&mut parent, r);
        if index_of_root[root] == usize::MAX {
            index_of_root[root] = comps.len();
            comps.push(Vec::new());
        }
        comps[index_of_root[root]].push(r);
    }
    comps
}

#[cfg(test)]
mod tests {
    use super::build::*;
    use super::*;

    fn prog(registers: &[&str], procs: Vec<Procedure>) -> Program {
        Program {
            registers: registers.iter().map(|s| s.to_string()).collect(),
            main: "Main".into(),
            procedures: procs,
        }
    }

    #[test]
    fn for_expansion() {
        let p = prog(&["x", "y"], vec![procedure("Main", false, vec![for_(2, vec![mv("x", "y")])])]);
        assert_eq!(p.expand_for().procedures[0].body, vec![mv("x", "y"), mv("x", "y")]);
        let p = prog(&["x", "y"], vec![procedure("Main", false, vec![for_(0, vec![mv("x", "y")])])]);
        assert!(p.expand_for().procedures[0].body.is_empty());
    }

    #[test]
    fn expansion_is_idempotent() {
        let p = prog(
            &["x", "y"],
            vec![procedure("Main", false, vec![while_(tt(), vec![for_(3, vec![if_(maybe("x"), vec![for_(2, vec![mv("x", "y")])])])])])],
        );
        let once = p.expand_for();
        assert!(!once.has_for());
        assert_eq!(once.expand_for(), once);
    }

    #[test]
    fn swap_size_closure() {
        let p = prog(&["x", "y"], vec![procedure("Main", false, vec![swap("x", "y")])]);
        assert_eq!(p.size().swap_size, 2);
        let p = prog(&["x", "y", "z"], vec![procedure("Main", false, vec![swap("x", "y"), swap("y", "z")])]);
        assert_eq!(p.size().swap_size, 6);
        let p = prog(&["x", "y", "z", "w"], vec![procedure("Main", false, vec![swap("x", "y"), swap("z", "w")])]);
        assert_eq!(p.size().swap_size, 4);
    }

    #[test]
    fn instruction_count() {
        let p = prog(
            &["x", "y"],
            vec![procedure(
                "Main",
                false,
                vec![set_of(true), while_(and(maybe("x"), not(maybe("y"))), vec![mv("x", "y")]), while_(tt(), vec![])],
            )],
        );
        let s = p.size();
        assert_eq!(s.n_instructions, 4);
        assert_eq!(s.total, 2 + 4);
    }

    #[test]
    fn json_round_trip_is_byte_stable() {
        let p = prog(
            &["x", "y"],
            vec![
                procedure("Main", false, vec![set_of(false), while_(not(calls("T")), vec![call("C")]), restart()]),
                procedure("T", true, vec![if_else(or(maybe("x"), tt()), vec![ret(true)], vec![ret(false)])]),
                procedure("C", false, vec![swap("x", "y"), for_(2, vec![mv("y", "x")]), ret_none()]),
            ],
        );
        let text = p.to_json();
        let back = Program::from_json(&text).unwrap();
        assert_eq!(back, p);
        assert_eq!(back.to_json(), text);
        assert!(text.contains("\"op\": \"move\""));
    }
}
