//! Lowering of structured programs to population machines.
//!
//! Control flow becomes jumps on `IP` driven by `CF`, every procedure gets a
//! return-address pointer `Ret(P)`, swaps rewrite the register map, and a
//! restart becomes a jump to a helper that redistributes the registers and
//! then sets `IP := 1`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::analysis::{verify_decides, verify_program, MReport, Verdict, VerifyOptions};
use crate::error::{Error, Result};
use crate::machine::{virt, MInstruction, Machine, MachineSemantics, Pointer, CF, IP, OF, SWAP_TMP};
use crate::predicate::Predicate;
use crate::program::{swap_components, Condition, Program, ProgramSemantics, Stmt};

pub fn ret_pointer(proc: &str) -> String {
    format!("Ret({proc})")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallSite {
    pub caller: String,
    pub callee: String,
    /// Instruction the callee returns to (1-based).
    pub return_index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub proc: String,
    /// Statement path in the `for`-expanded body.
    pub path: Vec<usize>,
    /// Inclusive 1-based instruction range; `first > last` when empty.
    pub first: usize,
    pub last: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoweringMap {
    pub entries: BTreeMap<String, usize>,
    pub call_sites: Vec<CallSite>,
    pub spans: Vec<Span>,
    pub trailer: usize,
    pub restart_helper: Option<usize>,
    /// Instructions `Virt(y) := Virt(□)` that complete a swap (1-based).
    /// Just before them the register map is not injective.
    pub swap_completions: Vec<usize>,
}

impl LoweringMap {
    /// Machine semantics with the mid-swap exemptions of this lowering.
    pub fn semantics(&self, m: &Machine) -> Result<MachineSemantics> {
        Ok(MachineSemantics::new(m)?.with_map_exemptions(self.swap_completions.iter().map(|i| i - 1)))
    }
}

type Label = usize;

#[derive(Debug, Clone)]
enum Value {
    Lit(&'static str),
    At(Label),
}

#[derive(Debug, Clone)]
enum PIns {
    Move(String, String),
    Maybe(String),
    Jump(Label),
    /// `IP := CF ? t : f`
    Branch(Label, Label),
    /// `X := c`, read from `X` itself.
    Set(String, Value),
    /// `IP := Ret(P)`
    Return(String),
    /// `X := Y` between register-map pointers.
    Copy(String, String),
}

struct Lowerer<'a> {
    program: &'a Program,
    code: Vec<PIns>,
    labels: Vec<Option<usize>>,
    entry: BTreeMap<String, Label>,
    calls: Vec<(String, String, Label)>,
    spans: Vec<(String, Vec<usize>, usize, usize)>,
    swap_done: Vec<usize>,
    helper: Option<Label>,
    proc: String,
}

impl<'a> Lowerer<'a> {
    fn label(&mut self) -> Label {
        self.labels.push(None);
        self.labels.len() - 1
    }

    fn place(&mut self, l: Label) {
        self.labels[l] = Some(self.code.len());
    }

    fn here(&mut self) -> Label {
        let l = self.label();
        self.place(l);
        l
    }

    fn emit(&mut self, i: PIns) {
        self.code.push(i);
    }

    fn call(&mut self, p: &str) {
        let back = self.label();
        self.emit(PIns::Set(ret_pointer(p), Value::At(back)));
        self.emit(PIns::Jump(self.entry[p]));
        self.place(back);
        self.calls.push((self.proc.clone(), p.to_string(), back));
    }

    fn cond(&mut self, c: &Condition, t: Label, f: Label) {
        match c {
            Condition::True => self.emit(PIns::Jump(t)),
            Condition::Maybe(x) => {
                self.emit(PIns::Maybe(x.clone()));
                self.emit(PIns::Branch(t, f));
            }
            Condition::Call(p) => {
                self.call(p);
                self.emit(PIns::Branch(t, f));
            }
            Condition::Not(inner) => self.cond(inner, f, t),
            Condition::And(a, b) => {
                let mid = self.label();
                self.cond(a, mid, f);
                self.place(mid);
                self.cond(b, t, f);
            }
            Condition::Or(a, b) => {
                let mid = self.label();
                self.cond(a, t, mid);
                self.place(mid);
                self.cond(b, t, f);
            }
        }
    }

    fn block(&mut self, stmts: &[Stmt], prefix: &[usize]) {
        for (i, s) in stmts.iter().enumerate() {
            let mut path = prefix.to_vec();
            path.push(i);
            let first = self.code.len();
            self.stmt(s, &path);
            self.spans.push((self.proc.clone(), path, first + 1, self.code.len()));
        }
    }

    fn stmt(&mut self, s: &Stmt, path: &[usize]) {
        match s {
            Stmt::Move { src, dst } => self.emit(PIns::Move(src.clone(), dst.clone())),
            Stmt::Swap { a, b } => {
                self.emit(PIns::Copy(SWAP_TMP.into(), virt(a)));
                self.emit(PIns::Copy(virt(a), virt(b)));
                self.swap_done.push(self.code.len() + 1);
                self.emit(PIns::Copy(virt(b), SWAP_TMP.into()));
            }
            Stmt::SetOf { value } => self.emit(PIns::Set(OF.into(), Value::Lit(bool_str(*value)))),
            Stmt::Restart => {
                let h = *self.helper.get_or_insert_with(|| {
                    self.labels.push(None);
                    self.labels.len() - 1
                });
                self.emit(PIns::Jump(h));
            }
            Stmt::Return { value } => {
                if let Some(v) = value {
                    self.emit(PIns::Set(CF.into(), Value::Lit(bool_str(*v))));
                }
                self.emit(PIns::Return(ret_pointer(&self.proc)));
            }
            Stmt::Call { proc } => self.call(proc),
            Stmt::While { cond, body } => {
                let head = self.here();
                let (b, exit) = (self.label(), self.label());
                self.cond(cond, b, exit);
                self.place(b);
                self.block(body, path);
                self.emit(PIns::Jump(head));
                self.place(exit);
            }
            Stmt::If { cond, then, otherwise } => {
                let (t, e, end) = (self.label(), self.label(), self.label());
                self.cond(cond, t, e);
                self.place(t);
                let mut tp = path.to_vec();
                tp.push(0);
                self.block(then, &tp);
                self.emit(PIns::Jump(end));
                self.place(e);
                let mut ep = path.to_vec();
                ep.push(1);
                self.block(otherwise, &ep);
                self.place(end);
            }
            Stmt::For { .. } => unreachable!("for loops are expanded before lowering"),
        }
    }
}

fn bool_str(b: bool) -> &'static str {
    if b {
        "true"
    } else {
        "false"
    }
}

/// Lowers a valid program. Only procedures reachable from main are emitted.
pub fn lower(p: &Program) -> Result<(Machine, LoweringMap)> {
    p.check()?;
    if p.registers.is_empty() {
        return Err(Error::Invalid(vec!["a machine needs at least one register".into()]));
    }
    let program = p.expand_for();
    let procs = program.reachable_procedures();
    let mut lw = Lowerer {
        program: &program,
        code: Vec::new(),
        labels: Vec::new(),
        entry: BTreeMap::new(),
        calls: Vec::new(),
        spans: Vec::new(),
        swap_done: Vec::new(),
        helper: None,
        proc: program.main.clone(),
    };
    let start = lw.here();
    for name in &procs {
        let l = lw.label();
        lw.entry.insert(name.clone(), l);
    }

    // 1: Ret(Main) := 3, 2: IP := entry(Main), 3: IP := 3.
    let trailer = lw.label();
    lw.emit(PIns::Set(ret_pointer(&program.main), Value::At(trailer)));
    lw.emit(PIns::Jump(lw.entry[&program.main]));
    lw.place(trailer);
    lw.emit(PIns::Jump(trailer));
    lw.calls.push((String::new(), program.main.clone(), trailer));

    for name in &procs {
        let proc = lw.program.procedure(name).expect("reachable procedure exists");
        lw.proc = name.clone();
        lw.place(lw.entry[name]);
        lw.block(&proc.body, &[]);
        if !proc.returns_value {
            lw.emit(PIns::Return(ret_pointer(name)));
        }
    }

    if let Some(h) = lw.helper {
        lw.place(h);
        let x = program.registers.iter().min().expect("registers are non-empty").clone();
        let pairs = program
            .registers
            .iter()
            .map(|y| (y.clone(), x.clone()))
            .chain(program.registers.iter().map(|z| (x.clone(), z.clone())))
            .filter(|(a, b)| a != b);
        for (y, z) in pairs {
            let head = lw.here();
            let (b, exit) = (lw.label(), lw.label());
            lw.emit(PIns::Maybe(y.clone()));
            lw.emit(PIns::Branch(b, exit));
            lw.place(b);
            lw.emit(PIns::Move(y, z));
            lw.emit(PIns::Jump(head));
            lw.place(exit);
        }
        lw.emit(PIns::Jump(start));
    }

    finish(&program, lw)
}

fn finish(program: &Program, lw: Lowerer<'_>) -> Result<(Machine, LoweringMap)> {
    let resolve = |l: Label| lw.labels[l].expect("every label is placed") + 1;
    let n = lw.code.len();
    let ip_domain: Vec<String> = (1..=n).map(|i| i.to_string()).collect();
    let bools = vec!["false".to_string(), "true".to_string()];

    let mut ret_domains: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
    for (_, callee, back) in &lw.calls {
        ret_domains.entry(callee.clone()).or_default().insert(resolve(*back));
    }

    let comps = swap_components(&program.registers, &program.swap_pairs());
    let mut virt_domain = vec![Vec::new(); program.registers.len()];
    let mut tmp_domain = Vec::new();
    for c in &comps {
        let names: Vec<String> = c.iter().map(|&r| program.registers[r].clone()).collect();
        for &r in c {
            virt_domain[r] = names.clone();
        }
        if c.len() > 1 {
            tmp_domain.extend(c.iter().copied());
        }
    }
    tmp_domain.sort_unstable();
    let tmp_domain: Vec<String> = if tmp_domain.is_empty() {
        vec![program.registers[0].clone()]
    } else {
        tmp_domain.iter().map(|&r| program.registers[r].clone()).collect()
    };

    let mut pointers = vec![
        Pointer { name: OF.into(), domain: bools.clone() },
        Pointer { name: CF.into(), domain: bools.clone() },
    ];
    for (r, d) in program.registers.iter().zip(&virt_domain) {
        pointers.push(Pointer { name: virt(r), domain: d.clone() });
    }
    pointers.push(Pointer { name: SWAP_TMP.into(), domain: tmp_domain });
    for name in program.reachable_procedures() {
        if let Some(d) = ret_domains.get(&name) {
            pointers.push(Pointer { name: ret_pointer(&name), domain: d.iter().map(|i| i.to_string()).collect() });
        }
    }
    pointers.push(Pointer { name: IP.into(), domain: ip_domain });
    let domain = |name: &str| -> &Vec<String> { &pointers.iter().find(|p| p.name == name).expect("declared pointer").domain };

    let constant = |src: &str, v: String| -> BTreeMap<String, String> {
        domain(src).iter().map(|d| (d.clone(), v.clone())).collect()
    };
    let mut instructions = Vec::with_capacity(n);
    for ins in &lw.code {
        instructions.push(match ins {
            PIns::Move(x, y) => MInstruction::Move { x: x.clone(), y: y.clone() },
            PIns::Maybe(x) => MInstruction::Maybe { x: x.clone() },
            PIns::Jump(l) => MInstruction::Assign {
                target: IP.into(),
                source: CF.into(),
                table: constant(CF, resolve(*l).to_string()),
            },
            PIns::Branch(t, f) => MInstruction::Assign {
                target: IP.into(),
                source: CF.into(),
                table: [("true".to_string(), resolve(*t).to_string()), ("false".to_string(), resolve(*f).to_string())]
                    .into_iter()
                    .collect(),
            },
            PIns::Set(x, v) => {
                let v = match v {
                    Value::Lit(s) => s.to_string(),
                    Value::At(l) => resolve(*l).to_string(),
                };
                MInstruction::Assign { target: x.clone(), source: x.clone(), table: constant(x, v) }
            }
            PIns::Return(r) => MInstruction::Assign {
                target: IP.into(),
                source: r.clone(),
                table: domain(r).iter().map(|d| (d.clone(), d.clone())).collect(),
            },
            PIns::Copy(x, y) => {
                let tx = domain(x);
                let table = domain(y)
                    .iter()
                    .map(|d| (d.clone(), if tx.contains(d) { d.clone() } else { tx[0].clone() }))
                    .collect();
                MInstruction::Assign { target: x.clone(), source: y.clone(), table }
            }
        });
    }
    let machine = Machine { registers: program.registers.clone(), pointers, instructions };
    machine.check()?;

    let map = LoweringMap {
        entries: lw.entry.iter().map(|(p, &l)| (p.clone(), resolve(l))).collect(),
        call_sites: lw
            .calls
            .iter()
            .filter(|(caller, ..)| !caller.is_empty())
            .map(|(caller, callee, back)| CallSite {
                caller: caller.clone(),
                callee: callee.clone(),
                return_index: resolve(*back),
            })
            .collect(),
        spans: lw
            .spans
            .iter()
            .map(|(proc, path, first, last)| Span { proc: proc.clone(), path: path.clone(), first: *first, last: *last })
            .collect(),
        trailer: 3,
        restart_helper: lw.helper.map(resolve),
        swap_completions: lw.swap_done.clone(),
    };
    Ok((machine, map))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PreservationRow {
    pub total: u64,
    pub program: MReport,
    pub machine: MReport,
    pub equal: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PreservationReport {
    pub rows: Vec<PreservationRow>,
}

impl PreservationReport {
    pub fn all_equal(&self) -> bool {
        self.rows.iter().all(|r| r.equal)
    }
}

/// Compares program-level and machine-level verdicts for every register
/// total up to `max_total`.
pub fn decided_predicate_preserved(
    p: &Program,
    m: &Machine,
    map: &LoweringMap,
    max_total: u64,
    expected: &Predicate,
    opts: VerifyOptions,
) -> Result<PreservationReport> {
    use rayon::prelude::*;
    let psem = ProgramSemantics::new(p)?;
    let msem = map.semantics(m)?;
    let rows = (0..=max_total)
        .into_par_iter()
        .map(|t| -> Result<PreservationRow> {
            let program = verify_program(&psem, t, expected, opts)?;
            let machine = verify_decides(&msem, &msem.initials(t), t, expected, opts);
            let equal = !program.truncated
                && !machine.truncated
                && program.verdict.is_some()
                && program.verdict == machine.verdict
                && machine.invariant_violation.is_none();
            Ok(PreservationRow { total: t, program, machine, equal })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PreservationReport { rows })
}

/// Shared verdict per total, for quick comparisons in tests.
pub fn verdicts(r: &PreservationReport) -> Vec<(u64, Option<Verdict>, Option<Verdict>)> {
    r.rows.iter().map(|x| (x.total, x.program.verdict, x.machine.verdict)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construction::build_example_program;
    use crate::machine::validate_machine;
    use crate::program::build::*;

    fn prog(registers: &[&str], procs: Vec<crate::program::Procedure>) -> Program {
        Program {
            registers: registers.iter().map(|s| s.to_string()).collect(),
            main: "Main".into(),
            procedures: procs,
        }
    }

    fn assign_targets(m: &Machine, i: usize) -> (String, String, Vec<(String, String)>) {
        match &m.instructions[i - 1] {
            MInstruction::Assign { target, source, table } => {
                (target.clone(), source.clone(), table.iter().map(|(a, b)| (a.clone(), b.clone())).collect())
            }
            other => panic!("instruction {i} is {other:?}"),
        }
    }

    #[test]
    fn while_loop_shape() {
        let p = prog(&["x", "y"], vec![procedure("Main", false, vec![while_(not(maybe("x")), vec![mv("x", "y")])])]);
        let (m, map) = lower(&p).unwrap();
        let e = map.entries["Main"];
        assert_eq!(m.instructions[e - 1], MInstruction::Maybe { x: "x".into() });
        let (t, s, tbl) = assign_targets(&m, e + 1);
        assert_eq!((t.as_str(), s.as_str()), (IP, CF));
        // CF = true leaves the loop; CF = false runs the body.
        assert_eq!(tbl, vec![("false".into(), (e + 2).to_string()), ("true".into(), (e + 4).to_string())]);
        assert_eq!(m.instructions[e + 1], MInstruction::Move { x: "x".into(), y: "y".into() });
        let (_, _, back) = assign_targets(&m, e + 3);
        assert!(back.iter().all(|(_, v)| *v == e.to_string()));
    }

    #[test]
    fn procedure_shape() {
        let p = prog(
            &["x", "y"],
            vec![
                procedure("Main", false, vec![call("AddTwo")]),
                procedure("AddTwo", true, vec![mv("x", "y"), mv("x", "y"), ret(true)]),
            ],
        );
        let (m, map) = lower(&p).unwrap();
        let back = map.call_sites[0].return_index;
        assert_eq!(m.pointer("Ret(AddTwo)").unwrap().domain, vec![back.to_string()]);
        let (t, _, tbl) = assign_targets(&m, back - 2);
        assert_eq!(t, "Ret(AddTwo)");
        assert!(tbl.iter().all(|(_, v)| *v == back.to_string()));
        let e = map.entries["AddTwo"];
        let body: Vec<_> = m.instructions[e - 1..e + 3].to_vec();
        assert!(matches!(body[0], MInstruction::Move { .. }));
        assert!(matches!(body[1], MInstruction::Move { .. }));
        assert_eq!(assign_targets(&m, e + 2).0, CF);
        assert_eq!(assign_targets(&m, e + 3), (IP.into(), "Ret(AddTwo)".into(), vec![(back.to_string(), back.to_string())]));
    }

    #[test]
    fn example_register_map_domains() {
        let p = build_example_program();
        let (m, _) = lower(&p).unwrap();
        assert!(validate_machine(&m).is_empty());
        let d = |n: &str| m.pointer(n).unwrap().domain.clone();
        assert_eq!(d("Virt(x)"), vec!["x", "y"]);
        assert_eq!(d("Virt(y)"), vec!["x", "y"]);
        assert_eq!(d("Virt(z)"), vec!["z"]);
        assert_eq!(m.pointers.last().unwrap().name, IP);
        assert_eq!(m.pointers[0].name, OF);
    }

    #[test]
    fn swap_completions_recovered_from_machine() {
        for p in [build_example_program(), crate::construction::build_threshold_program(2)] {
            let (m, map) = lower(&p).unwrap();
            assert!(!map.swap_completions.is_empty());
            assert_eq!(m.swap_completions(), map.swap_completions);
        }
    }

    #[test]
    fn restart_helper_drains_and_jumps_to_start() {
        let p = prog(&["b", "a", "c"], vec![procedure("Main", false, vec![restart()])]);
        let (m, map) = lower(&p).unwrap();
        let h = map.restart_helper.unwrap();
        // Two drain loops into `a`, two out of it, 4 instructions each.
        assert_eq!(m.instructions.len(), h - 1 + 16 + 1);
        assert_eq!(m.instructions[h + 1], MInstruction::Move { x: "b".into(), y: "a".into() });
        assert_eq!(m.instructions[h + 13], MInstruction::Move { x: "a".into(), y: "c".into() });
        let (_, _, last) = assign_targets(&m, m.instructions.len());
        assert!(last.iter().all(|(_, v)| v == "1"));
    }

    #[test]
    fn small_programs_preserve_verdicts() {
        // Decides x >= 1 with a restart-driven retry.
        let p = prog(
            &["x", "y"],
            vec![procedure(
                "Main",
                false,
                vec![set_of(false), if_else(maybe("x"), vec![set_of(true), while_(tt(), vec![])], vec![restart()])],
            )],
        );
        let (m, map) = lower(&p).unwrap();
        let r = decided_predicate_preserved(&p, &m, &map, 4, &Predicate::threshold(1u32), VerifyOptions::default()).unwrap();
        assert!(r.all_equal(), "{:?}", verdicts(&r));
    }
}
