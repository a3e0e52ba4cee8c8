//! Seeded random runs.
//!
//! Protocols use the uniform pair scheduler: each step picks an ordered
//! pair of distinct agents and one of their enabled transitions. Other
//! systems pick a successor uniformly, which is only a surrogate for
//! fairness.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::protocol::ProtocolSemantics;
use crate::system::{Output, Successors, TransitionSystem, Word};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimOptions {
    pub max_steps: u64,
    /// A run has converged once its output is defined and unchanged for
    /// this many steps. The run stops there.
    pub window: u64,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self { max_steps: 100_000_000, window: 2_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimResult {
    pub seed: u64,
    pub steps: u64,
    pub output: Output,
    /// Step after which the output last changed.
    pub last_change: u64,
    pub converged: bool,
}

/// Agent states with, per agent, the set of other agents it can interact
/// with. Drawing an interacting ordered pair and updating one agent both
/// take time linear in the population.
struct Pool<'a> {
    p: &'a ProtocolSemantics,
    agent: Vec<Word>,
    /// Row `i` (`words` words) has bit `j` set when agents `i` and `j`
    /// (`i ≠ j`) have an enabled transition.
    enabled: Vec<u64>,
    /// Set bits per row.
    degree: Vec<u64>,
    words: usize,
}

impl<'a> Pool<'a> {
    fn new(p: &'a ProtocolSemantics, c0: &[Word]) -> Self {
        let m = c0.len();
        let words = m.div_ceil(64).max(1);
        let mut pool = Pool { p, agent: c0.to_vec(), enabled: vec![0; m * words], degree: vec![0; m], words };
        for i in 0..m {
            for j in i + 1..m {
                if p.interacts(c0[i], c0[j]) {
                    pool.flip(i, j);
                    pool.flip(j, i);
                }
            }
        }
        pool
    }

    fn bit(&self, i: usize, j: usize) -> bool {
        self.enabled[i * self.words + j / 64] >> (j % 64) & 1 == 1
    }

    fn flip(&mut self, i: usize, j: usize) {
        let on = self.bit(i, j);
        self.enabled[i * self.words + j / 64] ^= 1 << (j % 64);
        if on {
            self.degree[i] -= 1;
        } else {
            self.degree[i] += 1;
        }
    }

    fn set(&mut self, i: usize, s: Word) {
        self.agent[i] = s;
        for j in 0..self.agent.len() {
            if j != i && self.p.interacts(s, self.agent[j]) != self.bit(i, j) {
                self.flip(i, j);
                self.flip(j, i);
            }
        }
    }

    /// Ordered pairs of distinct agents with an enabled transition.
    fn weight(&self) -> u64 {
        self.degree.iter().sum()
    }

    fn draw(&self, rng: &mut ChaCha8Rng, total: u64) -> (usize, usize) {
        let mut r = rng.random_range(0..total);
        let mut i = 0;
        while r >= self.degree[i] {
            r -= self.degree[i];
            i += 1;
        }
        for (w, &word) in self.enabled[i * self.words..(i + 1) * self.words].iter().enumerate() {
            let ones = word.count_ones() as u64;
            if r < ones {
                let mut x = word;
                for _ in 0..r {
                    x &= x - 1;
                }
                return (i, w * 64 + x.trailing_zeros() as usize);
            }
            r -= ones;
        }
        unreachable!("degree counts the set bits of the row")
    }
}

/// Runs the pair scheduler from `c0` (any agent order).
///
/// Interactions without an enabled transition are not drawn one by one:
/// their number before the next effective interaction is geometric, so the
/// step counts have the same distribution as the naive scheduler.
pub fn simulate(p: &ProtocolSemantics, c0: &[Word], seed: u64, opts: SimOptions) -> SimResult {
    let m = c0.len() as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool = Pool::new(p, c0);
    let mut accepting: u64 = c0.iter().filter(|&&s| p.is_accepting(s)).count() as u64;
    let out_of = |acc: u64| {
        if acc == m {
            Output::True
        } else if acc == 0 {
            Output::False
        } else {
            Output::Undefined
        }
    };
    let mut output = out_of(accepting);
    let mut last_change = 0;
    let mut steps = 0;
    let pairs_total = (m * m.saturating_sub(1)) as f64;
    // ln(1 - p) for the last seen weight.
    let mut log_miss = (0, 0.0);
    loop {
        // Step at which the run stops if the output does not change.
        let horizon = if output == Output::Undefined {
            opts.max_steps
        } else {
            opts.max_steps.min(last_change + opts.window)
        };
        if steps >= horizon {
            break;
        }
        let weight = pool.weight();
        if weight == 0 {
            steps = horizon;
            break;
        }
        if log_miss.0 != weight {
            log_miss = (weight, (-(weight as f64 / pairs_total)).ln_1p());
        }
        let skip = if weight as f64 >= pairs_total {
            0
        } else {
            let u: f64 = rng.random();
            ((1.0 - u).ln() / log_miss.1).floor() as u64
        };
        if skip >= horizon - steps {
            steps = horizon;
            break;
        }
        steps += skip + 1;
        let (i, j) = pool.draw(&mut rng, weight);
        let (a, b) = (pool.agent[i], pool.agent[j]);
        let outs = p.outcomes(a, b);
        let (a2, b2) = outs[if outs.len() == 1 { 0 } else { rng.random_range(0..outs.len()) }];
        for (s, d) in [(a, -1), (b, -1), (a2, 1), (b2, 1)] {
            if p.is_accepting(s) {
                accepting = accepting.wrapping_add_signed(d);
            }
        }
        pool.set(i, a2);
        pool.set(j, b2);
        let o = out_of(accepting);
        if o != output {
            output = o;
            last_change = steps;
        }
    }
    SimResult { seed, steps, output, last_change, converged: output != Output::Undefined && steps - last_change >= opts.window }
}

/// [`simulate`] for every seed, in parallel, ordered by seed.
pub fn simulate_seeds(p: &ProtocolSemantics, c0: &[Word], seeds: impl IntoIterator<Item = u64>, opts: SimOptions) -> Vec<SimResult> {
    let seeds: Vec<u64> = seeds.into_iter().collect();
    seeds.par_iter().map(|&s| simulate(p, c0, s, opts)).collect()
}

/// Uniform choice among successors for any transition system.
pub fn simulate_system<S: TransitionSystem + ?Sized>(sys: &S, c0: &[Word], seed: u64, opts: SimOptions) -> SimResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cur = c0.to_vec();
    let mut buf = Successors::new();
    let mut output = sys.output(&cur);
    let mut last_change = 0;
    let mut steps = 0;
    while steps < opts.max_steps {
        if output != Output::Undefined && steps - last_change >= opts.window {
            break;
        }
        steps += 1;
        buf.clear();
        sys.successors(&cur, &mut buf);
        let k = rng.random_range(0..buf.len());
        cur.clear();
        cur.extend_from_slice(buf.get(k));
        let o = sys.output(&cur);
        if o != output {
            output = o;
            last_change = steps;
        }
    }
    SimResult { seed, steps, output, last_change, converged: output != Output::Undefined && steps - last_change >= opts.window }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::Protocol;

    fn proto(transitions: &[[&str; 4]]) -> ProtocolSemantics {
        ProtocolSemantics::new(&Protocol {
            states: vec!["a".into(), "b".into()],
            initial: vec!["b".into()],
            accepting: vec!["a".into()],
            transitions: transitions.iter().map(|t| t.map(String::from)).collect(),
        })
        .unwrap()
    }

    #[test]
    fn no_transitions_converge_immediately() {
        let p = proto(&[]);
        let r = simulate(&p, &[1, 1, 1], 7, SimOptions { max_steps: 1000, window: 50 });
        assert!(r.converged);
        assert_eq!(r.output, Output::False);
        assert_eq!(r.steps, 50);
    }

    #[test]
    fn epidemic_converges_and_is_reproducible() {
        let p = proto(&[["a", "b", "a", "a"]]);
        let c0 = [0, 1, 1, 1, 1, 1];
        let opts = SimOptions { max_steps: 100_000, window: 500 };
        let r = simulate(&p, &c0, 3, opts);
        assert!(r.converged);
        assert_eq!(r.output, Output::True);
        assert_eq!(r, simulate(&p, &c0, 3, opts));
        let all = simulate_seeds(&p, &c0, 0..8, opts);
        assert!(all.iter().all(|x| x.output == Output::True));
        assert_eq!(all[3], r);
    }

    #[test]
    fn generic_runner_on_protocol() {
        let p = proto(&[["a", "b", "a", "a"]]);
        let r = simulate_system(&p, &[0, 1, 1], 1, SimOptions { max_steps: 10_000, window: 100 });
        assert!(r.converged);
        assert_eq!(r.output, Output::True);
    }
}
