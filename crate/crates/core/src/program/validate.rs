use std::collections::{BTreeMap, HashSet};
use std::fmt;

use super::{Condition, Program, Stmt};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Diagnostic {
    DuplicateRegister(String),
    DuplicateProcedure(String),
    MissingMain(String),
    MainReturnsValue(String),
    UnknownRegister { proc: String, name: String },
    UnknownProcedure { proc: String, name: String },
    CyclicCall(Vec<String>),
    ConditionArity { proc: String, ops: usize },
    VoidCallInCondition { proc: String, callee: String },
    ReturnValueMismatch { proc: String },
    MissingReturn { proc: String },
    MoveToSelf { proc: String, reg: String },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::DuplicateRegister(r) => write!(f, "register `{r}` declared twice"),
            Diagnostic::DuplicateProcedure(p) => write!(f, "procedure `{p}` declared twice"),
            Diagnostic::MissingMain(m) => write!(f, "main procedure `{m}` does not exist"),
            Diagnostic::MainReturnsValue(m) => write!(f, "main procedure `{m}` must not return a value"),
            Diagnostic::UnknownRegister { proc, name } => write!(f, "{proc}: unknown register `{name}`"),
            Diagnostic::UnknownProcedure { proc, name } => write!(f, "{proc}: unknown procedure `{name}`"),
            Diagnostic::CyclicCall(cycle) => write!(f, "cyclic call: {}", cycle.join(" -> ")),
            Diagnostic::ConditionArity { proc, ops } => {
                write!(f, "{proc}: condition has {ops} binary operators, at most one allowed")
            }
            Diagnostic::VoidCallInCondition { proc, callee } => {
                write!(f, "{proc}: `{callee}` returns no value but is used in a condition")
            }
            Diagnostic::ReturnValueMismatch { proc } => {
                write!(f, "{proc}: return statement does not match the declared return kind")
            }
            Diagnostic::MissingReturn { proc } => write!(f, "{proc}: control can reach the end without returning a value"),
            Diagnostic::MoveToSelf { proc, reg } => write!(f, "{proc}: move from `{reg}` to itself"),
        }
    }
}

/// All problems found in `p`; empty iff `p` is well formed.
pub fn validate(p: &Program) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut regs = HashSet::new();
    for r in &p.registers {
        if !regs.insert(r.as_str()) {
            out.push(Diagnostic::DuplicateRegister(r.clone()));
        }
    }
    let mut procs: BTreeMap<&str, bool> = BTreeMap::new();
    for proc in &p.procedures {
        if procs.insert(proc.name.as_str(), proc.returns_value).is_some() {
            out.push(Diagnostic::DuplicateProcedure(proc.name.clone()));
        }
    }
    match procs.get(p.main.as_str()) {
        None => out.push(Diagnostic::MissingMain(p.main.clone())),
        Some(true) => out.push(Diagnostic::MainReturnsValue(p.main.clone())),
        Some(false) => {}
    }

    for proc in &p.procedures {
        let mut cx = Checker { name: &proc.name, returns: proc.returns_value, regs: &regs, procs: &procs, out: &mut out };
        cx.block(&proc.body);
        if proc.returns_value && completes(&proc.body) {
            out.push(Diagnostic::MissingReturn { proc: proc.name.clone() });
        }
    }

    if let Some(cycle) = find_cycle(p, &procs) {
        out.push(Diagnostic::CyclicCall(cycle));
    }
    out
}

struct Checker<'a> {
    name: &'a str,
    returns: bool,
    regs: &'a HashSet<&'a str>,
    procs: &'a BTreeMap<&'a str, bool>,
    out: &'a mut Vec<Diagnostic>,
}

impl Checker<'_> {
    fn reg(&mut self, r: &str) {
        if !self.regs.contains(r) {
            self.out.push(Diagnostic::UnknownRegister { proc: self.name.into(), name: r.into() });
        }
    }

    fn callee(&mut self, c: &str) -> Option<bool> {
        let r = self.procs.get(c).copied();
        if r.is_none() {
            self.out.push(Diagnostic::UnknownProcedure { proc: self.name.into(), name: c.into() });
        }
        r
    }

    fn cond(&mut self, c: &Condition) {
        let ops = c.binary_ops();
        if ops > 1 {
            self.out.push(Diagnostic::ConditionArity { proc: self.name.into(), ops });
        }
        for a in c.atoms() {
            match a {
                Condition::Maybe(r) => self.reg(r),
                Condition::Call(p) => {
                    if self.callee(p) == Some(false) {
                        self.out.push(Diagnostic::VoidCallInCondition { proc: self.name.into(), callee: p.clone() });
                    }
                }
                _ => {}
            }
        }
    }

    fn block(&mut self, block: &[Stmt]) {
        for s in block {
            match s {
                Stmt::Move { src, dst } => {
                    self.reg(src);
                    self.reg(dst);
                    if src == dst {
                        self.out.push(Diagnostic::MoveToSelf { proc: self.name.into(), reg: src.clone() });
                    }
                }
                Stmt::Swap { a, b } => {
                    self.reg(a);
                    self.reg(b);
                }
                Stmt::SetOf { .. } | Stmt::Restart => {}
                Stmt::Return { value } => {
                    if value.is_some() != self.returns {
                        self.out.push(Diagnostic::ReturnValueMismatch { proc: self.name.into() });
                    }
                }
                Stmt::While { cond, body } => {
                    self.cond(cond);
                    self.block(body);
                }
                Stmt::If { cond, then, otherwise } => {
                    self.cond(cond);
                    self.block(then);
                    self.block(otherwise);
                }
                Stmt::For { body, .. } => self.block(body),
                Stmt::Call { proc } => {
                    self.callee(proc);
                }
            }
        }
    }
}

/// Constant value of a condition, if it has one syntactically.
pub(crate) fn static_value(c: &Condition) -> Option<bool> {
    match c {
        Condition::True => Some(true),
        Condition::Maybe(_) | Condition::Call(_) => None,
        Condition::Not(c) => static_value(c).map(|b| !b),
        Condition::And(a, b) => match (static_value(a), static_value(b)) {
            (Some(false), _) | (_, Some(false)) => Some(false),
            (Some(true), Some(true)) => Some(true),
            _ => None,
        },
        Condition::Or(a, b) => match (static_value(a), static_value(b)) {
            (Some(true), _) | (_, Some(true)) => Some(true),
            (Some(false), Some(false)) => Some(false),
            _ => None,
        },
    }
}

/// Whether control can fall off the end of `block`.
fn completes(block: &[Stmt]) -> bool {
    block.iter().all(|s| match s {
        Stmt::Restart | Stmt::Return { .. } => false,
        Stmt::While { cond, .. } => static_value(cond) != Some(true),
        Stmt::If { cond, then, otherwise } => match static_value(cond) {
            Some(true) => completes(then),
            Some(false) => completes(otherwise),
            None => completes(then) || completes(otherwise),
        },
        Stmt::For { count, body } => *count == 0 || completes(body),
        _ => true,
    })
}

fn find_cycle(p: &Program, procs: &BTreeMap<&str, bool>) -> Option<Vec<String>> {
    // Iterative DFS with colours over the call graph.
    let names: Vec<&str> = procs.keys().copied().collect();
    let index = |n: &str| names.iter().position(|&m| m == n);
    let edges: Vec<Vec<usize>> = names
        .iter()
        .map(|n| p.callees(n).iter().filter_map(|c| index(c)).collect())
        .collect();
    let mut colour = vec![0u8; names.len()];
    for start in 0..names.len() {
        if colour[start] != 0 {
            continue;
        }
        let mut stack = vec![(start, 0usize)];
        colour[start] = 1;
        while let Some(&mut (v, ref mut next)) = stack.last_mut() {
            if *next < edges[v].len() {
                let w = edges[v][*next];
                *next += 1;
                match colour[w] {
                    0 => {
                        colour[w] = 1;
                        stack.push((w, 0));
                    }
                    1 => {
                        let from = stack.iter().position(|&(u, _)| u == w).unwrap();
                        let mut cycle: Vec<String> = stack[from..].iter().map(|&(u, _)| names[u].to_string()).collect();
                        cycle.push(names[w].to_string());
                        return Some(cycle);
                    }
                    _ => {}
                }
            } else {
                colour[v] = 2;
                stack.pop();
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::super::build::*;
    use super::*;
    use crate::program::Procedure;

    fn prog(procs: Vec<Procedure>) -> Program {
        Program { registers: vec!["a".into(), "b".into(), "c".into()], main: "Main".into(), procedures: procs }
    }

    #[test]
    fn self_call_is_cyclic() {
        let p = prog(vec![procedure("Main", false, vec![call("P")]), procedure("P", false, vec![call("P")])]);
        assert!(validate(&p).iter().any(|d| matches!(d, Diagnostic::CyclicCall(_))));
    }

    #[test]
    fn two_binary_operators_rejected() {
        let c = or(and(maybe("a"), maybe("b")), maybe("c"));
        let p = prog(vec![procedure("Main", false, vec![if_(c, vec![])])]);
        assert_eq!(validate(&p), vec![Diagnostic::ConditionArity { proc: "Main".into(), ops: 2 }]);
    }

    #[test]
    fn negations_are_free() {
        let c = not(or(not(maybe("a")), not(not(maybe("b")))));
        let p = prog(vec![procedure("Main", false, vec![while_(c, vec![])])]);
        assert!(validate(&p).is_empty());
    }

    #[test]
    fn references_and_returns() {
        let p = prog(vec![
            procedure("Main", false, vec![mv("a", "q"), if_(calls("V"), vec![]), call("Nope")]),
            procedure("V", false, vec![ret(true)]),
            procedure("F", true, vec![if_(maybe("a"), vec![ret(true)])]),
        ]);
        let d = validate(&p);
        assert!(d.contains(&Diagnostic::UnknownRegister { proc: "Main".into(), name: "q".into() }));
        assert!(d.contains(&Diagnostic::VoidCallInCondition { proc: "Main".into(), callee: "V".into() }));
        assert!(d.contains(&Diagnostic::UnknownProcedure { proc: "Main".into(), name: "Nope".into() }));
        assert!(d.contains(&Diagnostic::ReturnValueMismatch { proc: "V".into() }));
        assert!(d.contains(&Diagnostic::MissingReturn { proc: "F".into() }));
    }

    #[test]
    fn infinite_loop_needs_no_return() {
        let p = prog(vec![
            procedure("Main", false, vec![if_(calls("F"), vec![])]),
            procedure("F", true, vec![while_(tt(), vec![if_(maybe("a"), vec![ret(false)])])]),
        ]);
        assert!(validate(&p).is_empty());
    }

    #[test]
    fn main_must_exist_and_be_void() {
        let mut p = prog(vec![procedure("Main", true, vec![ret(true)])]);
        assert!(validate(&p).contains(&Diagnostic::MainReturnsValue("Main".into())));
        p.main = "Other".into();
        assert!(validate(&p).contains(&Diagnostic::MissingMain("Other".into())));
    }
}
