//! Semantic invariants on random walks and random inputs.
//!
//! Each walk starts from a random initial configuration and follows random
//! successors. The checks here decode configurations themselves rather than
//! relying on the built-in step checker.

use popforge::analysis::explore_post;
use popforge::construction::{build_example_program, build_threshold_program};
use popforge::lowering::lower;
use popforge::machine::{Machine, MInstruction, MachineSemantics, CF};
use popforge::multiset::{composition_count, for_each_composition};
use popforge::program::build::*;
use popforge::program::{Program, ProgramSemantics};
use popforge::protocol::{compile_protocol, ProtocolSemantics};
use popforge::system::Word;
use popforge::{ms_apply, Multiset, Predicate, Successors, TransitionSystem};
use proptest::prelude::*;
use std::sync::OnceLock;

struct Lowered {
    machine: Machine,
    sem: MachineSemantics,
    completions: Vec<usize>,
}

fn lowered(which: usize) -> &'static Lowered {
    static CELLS: [OnceLock<Lowered>; 2] = [OnceLock::new(), OnceLock::new()];
    CELLS[which].get_or_init(|| {
        let p = if which == 0 { build_example_program() } else { build_threshold_program(1) };
        let (machine, map) = lower(&p).unwrap();
        let sem = map.semantics(&machine).unwrap();
        Lowered { completions: map.swap_completions.clone(), machine, sem }
    })
}

fn threshold_protocol() -> &'static ProtocolSemantics {
    static P: OnceLock<ProtocolSemantics> = OnceLock::new();
    P.get_or_init(|| {
        let (m, _) = lower(&build_threshold_program(1)).unwrap();
        compile_protocol(&m).unwrap().semantics().unwrap()
    })
}

fn pick(succ: &Successors, r: u64) -> Vec<Word> {
    succ.get((r % succ.len() as u64) as usize).to_vec()
}

/// Walks `steps` random successors of machine `which` from the initial
/// configuration selected by `seed`, checking every step.
fn machine_walk(which: usize, total: u64, seed: u64, choices: &[u64]) -> Result<(), TestCaseError> {
    let l = lowered(which);
    let m = &l.machine;
    let q = m.registers.len();
    let initials = l.sem.initials(total);
    let mut c = initials[(seed % initials.len() as u64) as usize].clone();
    let ip = m.pointers.iter().position(|p| p.name == "IP").unwrap();
    let cf = m.pointers.iter().position(|p| p.name == CF).unwrap();
    let virt: Vec<usize> =
        m.registers.iter().map(|r| m.pointers.iter().position(|p| p.name == format!("Virt({r})")).unwrap()).collect();
    let reg_of = |c: &[Word], p: usize| m.registers.iter().position(|r| *r == m.pointers[p].domain[c[q + p] as usize]).unwrap();
    let mut succ = Successors::new();
    for &r in choices {
        // Pointer-domain membership.
        for (p, ptr) in m.pointers.iter().enumerate() {
            prop_assert!((c[q + p] as usize) < ptr.domain.len(), "{} out of domain", ptr.name);
        }
        // Register map is a permutation outside swap completions.
        let at = c[q + ip] as usize + 1;
        if !l.completions.contains(&at) {
            let mut image: Vec<usize> = virt.iter().map(|&p| reg_of(&c, p)).collect();
            image.sort_unstable();
            image.dedup();
            prop_assert_eq!(image.len(), q, "register map not injective before instruction {}", at);
        }
        succ.clear();
        l.sem.successors(&c, &mut succ);
        prop_assert!(!succ.is_empty(), "no successor");
        for s in succ.iter() {
            let sum: u64 = s[..q].iter().map(|&w| w as u64).sum();
            prop_assert_eq!(sum, total);
            if let MInstruction::Maybe { x } = &m.instructions[at - 1] {
                let rx = reg_of(&c, virt[m.registers.iter().position(|r| r == x).unwrap()]);
                if m.pointers[cf].domain[s[q + cf] as usize] == "true" && s != c.as_slice() {
                    prop_assert!(c[rx] > 0, "maybe {} > 0 succeeded on an empty register", x);
                }
            }
        }
        c = pick(&succ, r);
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn example_machine_walks(total in 0u64..8, seed in any::<u64>(), choices in prop::collection::vec(any::<u64>(), 1..400)) {
        machine_walk(0, total, seed, &choices)?;
    }

    #[test]
    fn threshold_machine_walks(total in 0u64..6, seed in any::<u64>(), choices in prop::collection::vec(any::<u64>(), 1..400)) {
        machine_walk(1, total, seed, &choices)?;
    }

    #[test]
    fn protocol_walks_conserve_agents(m in 2u64..24, choices in prop::collection::vec(any::<u64>(), 1..300)) {
        let p = threshold_protocol();
        let mut c = p.initial_config(m).unwrap();
        let mut succ = Successors::new();
        for r in choices {
            succ.clear();
            p.successors(&c, &mut succ);
            prop_assert!(!succ.is_empty());
            for s in succ.iter() {
                prop_assert_eq!(p.decode(s).total(), m);
                prop_assert!(s.windows(2).all(|w| w[0] <= w[1]), "agent list not sorted");
            }
            c = pick(&succ, r);
        }
    }

    #[test]
    fn program_walks_conserve_registers(split in prop::collection::vec(0u64..3, 3), of in any::<bool>(), choices in prop::collection::vec(any::<u64>(), 1..300)) {
        let p = build_example_program();
        let sem = ProgramSemantics::new(&p).unwrap();
        let total: u64 = split.iter().sum();
        let mut c = sem.encode_initial(&split, of).unwrap();
        let mut succ = Successors::new();
        for r in choices {
            succ.clear();
            sem.successors(&c, &mut succ);
            prop_assert!(!succ.is_empty());
            for s in succ.iter() {
                prop_assert_eq!(sem.decode(s).registers.total(), total);
            }
            c = pick(&succ, r);
        }
    }

    /// `if maybe x > 0 then return true else return false`: true only when
    /// `x > 0`, and false always possible.
    #[test]
    fn maybe_true_branch_is_sound(x in 0u64..5, y in 0u64..5) {
        let prog = Program {
            registers: vec!["x".into(), "y".into()],
            main: "Main".into(),
            procedures: vec![
                procedure("Main", false, vec![while_(tt(), vec![])]),
                procedure("T", true, vec![if_else(maybe("x"), vec![ret(true)], vec![ret(false)])]),
            ],
        };
        let sem = ProgramSemantics::new(&prog).unwrap();
        let post = explore_post(&sem, "T", &[x, y], 10_000).unwrap();
        let values: Vec<Option<bool>> = post.returns.iter().map(|(_, v)| *v).collect();
        prop_assert!(values.contains(&Some(false)));
        prop_assert_eq!(values.contains(&Some(true)), x > 0);
        prop_assert!(post.returns.iter().all(|(c, _)| c == &vec![x, y]));
    }

    #[test]
    fn ms_apply_conserves_totals(a in prop::collection::vec(0u64..6, 4), r in prop::collection::vec(0u64..6, 4), add in prop::collection::vec(0u64..6, 4)) {
        let (a, r, add) = (Multiset::from_dense(&a), Multiset::from_dense(&r), Multiset::from_dense(&add));
        match ms_apply(&a, &r, &add) {
            Ok(out) => {
                prop_assert!(r.le(&a));
                prop_assert_eq!(out.total() + r.total(), a.total() + add.total());
                prop_assert_eq!(out.minus(&add).unwrap().plus(&r), a);
            }
            Err(_) => prop_assert!(!r.le(&a)),
        }
    }

    #[test]
    fn compositions_are_distinct_and_counted(total in 0u64..7, parts in 1usize..5) {
        let mut seen = std::collections::BTreeSet::new();
        for_each_composition(total, parts, |c| {
            assert_eq!(c.iter().sum::<u64>(), total);
            assert!(seen.insert(c.to_vec()));
        });
        // Stars and bars.
        let mut binom: u128 = 1;
        for i in 0..(parts as u128 - 1) {
            binom = binom * (total as u128 + parts as u128 - 1 - i) / (i + 1);
        }
        prop_assert_eq!(seen.len() as u128, binom);
        prop_assert_eq!(composition_count(total, parts), binom);
    }

    #[test]
    fn predicate_text_round_trips(lo in 0u64..50, width in 0u64..50, k0 in 0u64..30) {
        for p in [
            Predicate::threshold(lo),
            Predicate::range(lo, lo + width),
            Predicate::shifted(k0, Predicate::range(lo, lo + width)),
        ] {
            let back: Predicate = p.to_string().parse().unwrap();
            prop_assert_eq!(back, p);
        }
    }
}
