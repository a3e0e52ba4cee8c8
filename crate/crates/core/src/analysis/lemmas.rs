//! Closed-form oracles for the procedures of the threshold construction.
//!
//! For every register configuration up to a total, each procedure instance
//! is run through [`Summarizer::post`] and the resulting post-set is
//! compared with the set its lemma predicts. Robustness clauses are
//! checked on every configuration that is `j`-high for some level `j`:
//! there is no ⊥, and every return is again `j`-high or is `j`-proper.
//! Returns of the second kind are legitimate (an increment can complete a
//! weakly proper counter) but fall outside the literal definition of
//! robustness, so they are listed separately in `proper_exits`.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::explore::DEFAULT_CAP;
use super::post::{PostSet, Summarizer};
use crate::construction::{build_threshold_program, classify, level_constant_u64, names, Classification, LevelLayout, Role};
use crate::error::{Error, Result};
use crate::multiset::for_each_composition;
use crate::program::ProgramSemantics;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LemmaCounterexample {
    /// Clause id such as `3b` or `4c`.
    pub clause: String,
    pub procedure: String,
    pub config: BTreeMap<String, u64>,
    pub expected: String,
    pub actual: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LemmaReport {
    pub layout_n: u32,
    pub max_total: u64,
    pub configs: usize,
    /// Number of (configuration, instance) pairs whose hypothesis held,
    /// per clause.
    pub checked: BTreeMap<String, usize>,
    /// Every failure is kept, in discovery order.
    pub counterexamples: Vec<LemmaCounterexample>,
    /// Robustness checks where a `j`-high start returned a `j`-proper
    /// configuration.
    pub proper_exits: Vec<LemmaCounterexample>,
    pub summarized_nodes: usize,
    pub seconds: f64,
}

impl LemmaReport {
    pub fn passed(&self) -> bool {
        self.counterexamples.is_empty()
    }
}

fn show(p: &PostSet, regs: &[String]) -> String {
    p.to_json(regs).to_string()
}

struct Suite<'a> {
    layout: LevelLayout,
    regs: Vec<String>,
    sum: Summarizer<'a>,
    checked: BTreeMap<String, usize>,
    failures: Vec<LemmaCounterexample>,
    proper_exits: Vec<LemmaCounterexample>,
}

impl Suite<'_> {
    fn config(&self, c: &[u64]) -> BTreeMap<String, u64> {
        self.regs.iter().cloned().zip(c.iter().copied()).filter(|&(_, v)| v > 0).collect()
    }

    fn record(&mut self, clause: &str, proc: &str, c: &[u64], ok: bool, expected: impl FnOnce() -> String, actual: impl FnOnce() -> String) {
        *self.checked.entry(clause.into()).or_default() += 1;
        if !ok {
            let cx = LemmaCounterexample {
                clause: clause.into(),
                procedure: proc.into(),
                config: self.config(c),
                expected: expected(),
                actual: actual(),
            };
            self.failures.push(cx);
        }
    }

    fn exact(&mut self, clause: &str, proc: &str, c: &[u64], post: &PostSet, want: PostSet) {
        let regs = self.regs.clone();
        self.record(clause, proc, c, *post == want, || show(&want, &regs), || show(post, &regs));
    }

    /// `j`-robustness for every `j ≤ max_level` at which `c` is `j`-high.
    fn robust(&mut self, clause: &str, proc: &str, c: &[u64], cls: &Classification, post: &PostSet, max_level: u32) {
        for j in 1..=max_level {
            if !cls.high(j) {
                continue;
            }
            let after: Vec<Classification> = post.returns.iter().map(|(c2, _)| classify(c2, self.layout)).collect();
            let ok = !post.bottom && after.iter().all(|a| a.high(j) || a.proper(j));
            let regs = self.regs.clone();
            let expected = || format!("no bottom and every return {j}-high or {j}-proper");
            self.record(clause, proc, c, ok, expected, || show(post, &regs));
            if ok && after.iter().any(|a| !a.high(j)) {
                self.proper_exits.push(LemmaCounterexample {
                    clause: clause.into(),
                    procedure: proc.into(),
                    config: self.config(c),
                    expected: format!("every return {j}-high"),
                    actual: show(post, &regs),
                });
            }
        }
    }

    fn post(&mut self, proc: &str, c: &[u64]) -> Result<PostSet> {
        self.sum.post(proc, c)
    }

    fn run(&mut self, c: &[u64]) -> Result<()> {
        let l = self.layout;
        let n = l.n;
        let cls = classify(c, l);
        let reg = |r: Role, i: u32| l.index(r, i);

        // CheckEmpty
        for i in 1..=n + 1 {
            let proc = names::check_empty(i);
            let post = self.post(&proc, c)?;
            let want = PostSet { returns: BTreeSet::from([(c.to_vec(), None)]), restart: !cls.empty(i), bottom: false };
            self.exact("1", &proc, c, &post, want);
            self.robust("1-robust", &proc, c, &cls, &post, n);
        }

        for i in 1..=n {
            let ni = level_constant_u64(i);
            let below = cls.proper(i - 1);

            // CheckProper
            let proc = names::check_proper(i);
            let post = self.post(&proc, c)?;
            if cls.proper(i) || cls.low(i) {
                self.exact("2a", &proc, c, &post, PostSet::only_returns([(c.to_vec(), None)]));
            }
            if (1..=i).any(|j| cls.high(j)) {
                self.record("2b", &proc, c, post.restart, || "restart".into(), || "no restart".into());
            }
            let off = [Role::X, Role::Y].iter().any(|&r| c[reg(r, i)] > 0 || c[reg(r.bar(), i)] > ni);
            if below && off {
                self.record("2c", &proc, c, post.restart, || "restart".into(), || "no restart".into());
            }
            self.robust("2d", &proc, c, &cls, &post, n);

            for r in Role::ALL {
                let (x, xb) = (reg(r, i), reg(r.bar(), i));
                let name = l.name(r, i);

                // Zero
                let proc = names::zero(&name);
                let post = self.post(&proc, c)?;
                if cls.weakly_proper(i) {
                    self.exact("3a", &proc, c, &post, PostSet::only_returns([(c.to_vec(), Some(c[x] == 0))]));
                }
                if below && c[x] + c[xb] >= ni {
                    let mut want = BTreeSet::new();
                    if c[x] > 0 {
                        want.insert((c.to_vec(), Some(false)));
                    }
                    if c[xb] >= ni {
                        let mut c2 = c.to_vec();
                        c2[xb] = c[x] + ni;
                        c2[x] = c[xb] - ni;
                        want.insert((c2, Some(true)));
                    }
                    self.exact("3b", &proc, c, &post, PostSet::only_returns(want));
                }
                let ok = post.returns.iter().all(|(c2, v)| *v != Some(false) || c2[x] > 0);
                let regs = self.regs.clone();
                self.record("3c", &proc, c, ok, || "false only with x > 0".into(), || show(&post, &regs));
                self.robust("3d", &proc, c, &cls, &post, n);

                // Large
                let proc = names::large(&name);
                let post = self.post(&proc, c)?;
                if cls.weakly_proper(i) {
                    let want = [(c.to_vec(), Some(false)), (c.to_vec(), Some(c[x] >= ni))];
                    self.exact("5a", &proc, c, &post, PostSet::only_returns(want));
                }
                if below {
                    let mut want = BTreeSet::from([(c.to_vec(), Some(false))]);
                    if c[x] >= ni {
                        let mut c2 = c.to_vec();
                        c2[x] = c[xb] + ni;
                        c2[xb] = c[x] - ni;
                        want.insert((c2, Some(true)));
                    }
                    self.exact("5b", &proc, c, &post, PostSet::only_returns(want));
                }
                self.robust("5c", &proc, c, &cls, &post, n);
            }

            // IncrPair
            for (rx, ry) in [(Role::X, Role::Y), (Role::Xb, Role::Yb)] {
                let (x, y, xb, yb) = (reg(rx, i), reg(ry, i), reg(rx.bar(), i), reg(ry.bar(), i));
                let proc = names::incr_pair(&l.name(rx, i), &l.name(ry, i));
                let back = names::incr_pair(&l.name(rx.bar(), i), &l.name(ry.bar(), i));
                let post = self.post(&proc, c)?;
                if cls.weakly_proper(i) {
                    let base = ni + 1;
                    let v = (c[x] * base + c[y] + 1) % (base * base);
                    let mut c2 = c.to_vec();
                    c2[x] = v / base;
                    c2[y] = v % base;
                    c2[xb] = ni - c2[x];
                    c2[yb] = ni - c2[y];
                    self.exact("4a", &proc, c, &post, PostSet::only_returns([(c2, None)]));
                }
                let wide = [Role::X, Role::Y].iter().all(|&r| c[reg(r, i)] + c[reg(r.bar(), i)] >= ni);
                if below && wide {
                    let level: BTreeSet<usize> = Role::ALL.iter().map(|&r| reg(r, i)).collect();
                    for (c2, _) in post.returns.clone() {
                        let same = (0..c.len()).filter(|z| !level.contains(z)).all(|z| c2[z] == c[z]);
                        let undo = self.post(&back, &c2)?;
                        let ok = same && undo.returns.contains(&(c.to_vec(), None));
                        let regs = self.regs.clone();
                        self.record(
                            "4b",
                            &proc,
                            c,
                            ok,
                            || format!("{back} from {c2:?} returns the start, other levels unchanged"),
                            || show(&undo, &regs),
                        );
                    }
                }
                self.robust("4c", &proc, c, &cls, &post, i);
            }
        }
        Ok(())
    }
}

/// Checks every lemma clause on all configurations of the `layout_n`-level
/// construction with at most `max_total` agents.
pub fn lemma_oracle_suite(layout_n: u32, max_total: u64) -> Result<LemmaReport> {
    if !(1..=2).contains(&layout_n) {
        return Err(Error::Bound(format!("layout must have 1 or 2 levels, got {layout_n}")));
    }
    let t0 = Instant::now();
    let layout = LevelLayout::new(layout_n);
    let program = build_threshold_program(layout_n);
    let sem = ProgramSemantics::new(&program)?;
    let mut suite = Suite {
        layout,
        regs: program.registers.clone(),
        sum: Summarizer::new(&sem, DEFAULT_CAP),
        checked: BTreeMap::new(),
        failures: Vec::new(),
        proper_exits: Vec::new(),
    };
    let q = layout.n_registers();
    let mut configs = Vec::new();
    for total in 0..=max_total {
        for_each_composition(total, q, |c| configs.push(c.to_vec()));
    }
    for c in &configs {
        suite.run(c)?;
    }
    Ok(LemmaReport {
        layout_n,
        max_total,
        configs: configs.len(),
        checked: suite.checked,
        counterexamples: suite.failures,
        proper_exits: suite.proper_exits,
        summarized_nodes: suite.sum.explored_nodes,
        seconds: t0.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_level_small_totals() {
        let r = lemma_oracle_suite(1, 3).unwrap();
        assert_eq!(r.configs, 1 + 5 + 15 + 35);
        assert!(r.passed(), "{:?}", r.counterexamples.first());
        for clause in ["1", "2a", "2b", "2c", "5a", "5b", "5c", "1-robust"] {
            assert!(r.checked.get(clause).copied().unwrap_or(0) > 0, "clause {clause} never applied");
        }
        // x1 = y1 = 1: the counter is at its maximum and wraps to proper.
        assert!(r.proper_exits.iter().any(|e| e.procedure == "IncrPair@x1y1" && e.config.get("x1") == Some(&1)));
        assert!(r.proper_exits.iter().all(|e| e.clause == "4c"));
    }

    #[test]
    fn rejects_large_layouts() {
        assert!(lemma_oracle_suite(3, 1).is_err());
    }
}
