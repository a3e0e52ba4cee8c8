//! Stabilization verdicts from bottom strongly connected components.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::explore::{bottom_analysis, explore, CompKind, ExploreOptions, ReachGraph};
use super::post::{program_initials, verify_program};
use crate::error::{Error, Result};
use crate::machine::{Machine, MachineSemantics};
use crate::predicate::Predicate;
use crate::program::{Program, ProgramSemantics};
use crate::protocol::{Protocol, ProtocolSemantics};
use crate::system::{TransitionSystem, Word};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    StabilizesTrue,
    StabilizesFalse,
    /// Some reachable bottom component has non-uniform or undefined output.
    NonStabilizing,
    /// Bottom components of both uniform outputs are reachable.
    Mixed,
}

impl Verdict {
    pub fn stable_value(self) -> Option<bool> {
        match self {
            Verdict::StabilizesTrue => Some(true),
            Verdict::StabilizesFalse => Some(false),
            _ => None,
        }
    }

    fn from_reach(r: &[Option<u32>; 3]) -> Verdict {
        match (r[0].is_some(), r[1].is_some(), r[2].is_some()) {
            (_, _, true) => Verdict::NonStabilizing,
            (true, true, false) => Verdict::Mixed,
            (true, false, false) => Verdict::StabilizesTrue,
            (false, true, false) => Verdict::StabilizesFalse,
            (false, false, false) => unreachable!("every node reaches a bottom component"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InitialVerdict {
    pub config: String,
    pub verdict: Verdict,
    /// A configuration of one reachable bottom component.
    pub witness: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Counterexample {
    pub initial: String,
    /// Shortest path from the initial configuration into a bottom
    /// component whose output differs from the expected one.
    pub path: Vec<String>,
}

/// Result for all initial configurations of one population size.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MReport {
    pub m: u64,
    pub expected: bool,
    pub n_initials: usize,
    pub nodes: usize,
    pub edges: usize,
    /// Nodes explored inside call summaries, when calls are summarized.
    #[serde(default)]
    pub summarized_nodes: usize,
    pub bottom_components: usize,
    pub truncated: bool,
    /// Verdict shared by all initial configurations, if they agree.
    pub verdict: Option<Verdict>,
    pub matches: bool,
    pub invariant_violation: Option<String>,
    pub counterexample: Option<Counterexample>,
    pub initials: Vec<InitialVerdict>,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyReport {
    pub level: String,
    pub expected: String,
    pub cap: usize,
    pub per_m: Vec<MReport>,
}

impl VerifyReport {
    pub fn all_match(&self) -> bool {
        self.per_m.iter().all(|r| r.matches)
    }

    pub fn any_truncated(&self) -> bool {
        self.per_m.iter().any(|r| r.truncated)
    }

    /// `m -> stable value` table (`None` for unstable or truncated).
    pub fn table(&self) -> Vec<(u64, Option<bool>)> {
        self.per_m.iter().map(|r| (r.m, r.verdict.and_then(Verdict::stable_value))).collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    pub cap: usize,
    pub check_invariants: bool,
    /// Keep per-initial verdicts in the report.
    pub keep_initials: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { cap: super::explore::DEFAULT_CAP, check_invariants: true, keep_initials: false }
    }
}

/// Explores all `initials` (which share the population size `m`) and
/// compares each verdict with `expected.eval(m)`.
pub fn verify_decides<S: TransitionSystem + ?Sized>(
    sys: &S,
    initials: &[Vec<Word>],
    m: u64,
    expected: &Predicate,
    opts: VerifyOptions,
) -> MReport {
    let t0 = Instant::now();
    let g = explore(sys, initials, ExploreOptions { cap: opts.cap, check_invariants: opts.check_invariants });
    let mut r = report_from_graph(&g, &|c| sys.describe(c), m, expected, opts);
    r.seconds = t0.elapsed().as_secs_f64();
    r
}

/// Verdicts for the roots of an explored graph; `roots()[i]` is the `i`-th
/// initial configuration.
pub(crate) fn report_from_graph(
    g: &ReachGraph,
    describe: &dyn Fn(&[Word]) -> String,
    m: u64,
    expected: &Predicate,
    opts: VerifyOptions,
) -> MReport {
    let want = expected.eval_u64(m);
    let mut report = MReport {
        m,
        expected: want,
        n_initials: g.roots().len(),
        nodes: g.n_nodes(),
        edges: g.n_edges(),
        summarized_nodes: 0,
        bottom_components: 0,
        truncated: g.truncated,
        verdict: None,
        matches: false,
        invariant_violation: g.violation.as_ref().map(|(v, e)| format!("{e} at {}", describe(g.config(*v)))),
        counterexample: None,
        initials: Vec::new(),
        seconds: 0.0,
    };
    if g.truncated {
        return report;
    }
    let b = bottom_analysis(g);
    if let Err(e) = b.self_check(g) {
        report.invariant_violation.get_or_insert(e);
    }
    report.bottom_components = b.bottom.iter().filter(|&&x| x).count();

    let mut shared: Option<Option<Verdict>> = None;
    let mut all_ok = true;
    for &root in g.roots() {
        let r = b.reach[b.comp_of(root) as usize];
        let verdict = Verdict::from_reach(&r);
        shared = match shared {
            None => Some(Some(verdict)),
            Some(Some(v)) if v == verdict => Some(Some(v)),
            _ => Some(None),
        };
        let ok = verdict.stable_value() == Some(want);
        if !ok && report.counterexample.is_none() {
            let bad = |v: u32| {
                let c = b.comp_of(v) as usize;
                b.bottom[c] && b.kind[c] != if want { CompKind::True } else { CompKind::False }
            };
            let path = g.shortest_path_from(root, bad).unwrap_or_default();
            report.counterexample = Some(Counterexample {
                initial: describe(g.config(root)),
                path: path.iter().map(|&v| describe(g.config(v))).collect(),
            });
        }
        all_ok &= ok;
        if opts.keep_initials {
            let wc = r.iter().flatten().next().copied().expect("reachable bottom");
            report.initials.push(InitialVerdict {
                config: describe(g.config(root)),
                verdict,
                witness: describe(g.config(b.repr[wc as usize])),
            });
        }
    }
    report.verdict = shared.flatten();
    report.matches = all_ok && report.invariant_violation.is_none();
    report
}

/// Runs [`verify_decides`] for every `m` in `ms`, in parallel, ordered by `m`.
pub fn verify_range<S, F>(
    sys: &S,
    level: &str,
    ms: impl IntoIterator<Item = u64>,
    initials: F,
    expected: &Predicate,
    opts: VerifyOptions,
) -> VerifyReport
where
    S: TransitionSystem + ?Sized,
    F: Fn(u64) -> Vec<Vec<Word>> + Sync,
{
    let ms: Vec<u64> = ms.into_iter().collect();
    let per_m: Vec<MReport> =
        ms.par_iter().map(|&m| verify_decides(sys, &initials(m), m, expected, opts)).collect();
    VerifyReport { level: level.into(), expected: expected.to_string(), cap: opts.cap, per_m }
}

/// Which kind of artifact a verification runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Program,
    Machine,
    Protocol,
}

impl std::str::FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "program" => Ok(Level::Program),
            "machine" => Ok(Level::Machine),
            "protocol" => Ok(Level::Protocol),
            _ => Err(Error::Parse(format!("unknown level `{s}`"))),
        }
    }
}

impl Level {
    pub fn name(self) -> &'static str {
        match self {
            Level::Program => "program",
            Level::Machine => "machine",
            Level::Protocol => "protocol",
        }
    }
}

/// Parses an artifact of the given level from JSON and verifies it for
/// every `m` in `ms`, in parallel, ordered by `m`.
///
/// Programs use call summaries when their shape allows it and plain
/// exploration otherwise. Machines exempt the swap completions from the
/// register-map check. Protocols start from their first initial state.
pub fn verify_artifact(level: Level, json: &str, ms: &[u64], expected: &Predicate, opts: VerifyOptions) -> Result<VerifyReport> {
    let per_m: Vec<MReport> = match level {
        Level::Program => {
            let p = Program::from_json(json)?;
            p.check()?;
            let sem = ProgramSemantics::new(&p)?;
            ms.par_iter()
                .map(|&m| match verify_program(&sem, m, expected, opts) {
                    Err(Error::Invalid(_)) => Ok(verify_decides(&sem, &program_initials(&sem, m), m, expected, opts)),
                    other => other,
                })
                .collect::<Result<_>>()?
        }
        Level::Machine => {
            let m = Machine::from_json(json)?;
            let exempt = m.swap_completions().into_iter().map(|i| i - 1);
            let sem = MachineSemantics::new(&m)?.with_map_exemptions(exempt);
            ms.par_iter().map(|&t| verify_decides(&sem, &sem.initials(t), t, expected, opts)).collect()
        }
        Level::Protocol => {
            let sem = ProtocolSemantics::new(&Protocol::from_json(json)?)?;
            ms.par_iter()
                .map(|&m| Ok(verify_decides(&sem, &[sem.initial_config(m)?], m, expected, opts)))
                .collect::<Result<_>>()?
        }
    };
    Ok(VerifyReport { level: level.name().into(), expected: expected.to_string(), cap: opts.cap, per_m })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{Output, Successors};

    /// Counts down to zero; output is whether the start value was even,
    /// except that odd starts above 4 oscillate.
    struct Parity;

    impl TransitionSystem for Parity {
        fn successors(&self, c: &[Word], out: &mut Successors) {
            let (v, tag) = (c[0], c[1]);
            if tag == 2 {
                out.push(&[v, 3]);
            } else if tag == 3 {
                out.push(&[v, 2]);
            } else if v == 0 {
                out.push(c);
            } else if v > 4 && tag == 0 {
                out.push(&[v, 2]);
            } else {
                out.push(&[v - 1, tag]);
            }
        }
        fn output(&self, c: &[Word]) -> Output {
            match c[1] {
                1 => Output::True,
                3 => Output::True,
                _ => Output::False,
            }
        }
        fn describe(&self, c: &[Word]) -> String {
            format!("{c:?}")
        }
    }

    fn initials(m: u64) -> Vec<Vec<Word>> {
        vec![vec![m as Word, if m % 2 == 0 { 1 } else { 0 }]]
    }

    #[test]
    fn verdict_table() {
        let p = Predicate::range(0u32, 4u32);
        let r = verify_range(&Parity, "toy", 0..8, initials, &p, VerifyOptions::default());
        let v: Vec<Option<Verdict>> = r.per_m.iter().map(|x| x.verdict).collect();
        use Verdict::*;
        assert_eq!(v[0], Some(StabilizesTrue));
        assert_eq!(v[1], Some(StabilizesFalse));
        assert_eq!(v[5], Some(NonStabilizing));
        assert!(!r.per_m[1].matches);
        let cx = r.per_m[5].counterexample.as_ref().unwrap();
        assert_eq!(cx.path.len(), 2);
    }

    #[test]
    fn one_state_protocol_is_true() {
        struct One;
        impl TransitionSystem for One {
            fn successors(&self, c: &[Word], out: &mut Successors) {
                out.push(c);
            }
            fn output(&self, _: &[Word]) -> Output {
                Output::True
            }
            fn describe(&self, _: &[Word]) -> String {
                "q".into()
            }
        }
        let r = verify_range(&One, "toy", 1..4, |m| vec![vec![m as Word]], &Predicate::threshold(0u32), Default::default());
        assert!(r.all_match());
    }
}
