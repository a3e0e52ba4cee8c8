//! Concrete programs: the threshold construction with `n` levels and the
//! three-register range example, plus the register classifications used to
//! state what each procedure of the construction does.

use num_traits::{One, ToPrimitive, Zero};

use crate::bignat::BigNat;
use crate::program::build::*;
use crate::program::{Condition, Procedure, Program, Stmt};

/// `N_1 = 1`, `N_{i+1} = (N_i + 1)^2`.
pub fn level_constant(i: u32) -> BigNat {
    assert!(i >= 1, "levels start at 1");
    let mut n = BigNat::one();
    for _ in 1..i {
        let t = &n + 1u32;
        n = &t * &t;
    }
    n
}

/// `k = 2 · (N_1 + … + N_n)`, the threshold decided by the `n`-level program.
pub fn threshold_k(n: u32) -> BigNat {
    let mut sum = BigNat::zero();
    for i in 1..=n {
        sum += level_constant(i);
    }
    sum * 2u32
}

/// `N_i` as a machine word, saturating for levels far beyond desk scale.
pub fn level_constant_u64(i: u32) -> u64 {
    level_constant(i).to_u64().unwrap_or(u64::MAX)
}

/// Register layout of the `n`-level construction: per level `x_i, y_i,
/// xb_i, yb_i` (in this order), then `R`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LevelLayout {
    pub n: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    X,
    Y,
    Xb,
    Yb,
}

impl Role {
    pub fn bar(self) -> Role {
        match self {
            Role::X => Role::Xb,
            Role::Xb => Role::X,
            Role::Y => Role::Yb,
            Role::Yb => Role::Y,
        }
    }

    fn prefix(self) -> &'static str {
        match self {
            Role::X => "x",
            Role::Y => "y",
            Role::Xb => "xb",
            Role::Yb => "yb",
        }
    }

    pub const ALL: [Role; 4] = [Role::X, Role::Y, Role::Xb, Role::Yb];
}

impl LevelLayout {
    pub fn new(n: u32) -> Self {
        assert!(n >= 1, "the construction needs at least one level");
        Self { n }
    }

    pub fn n_registers(&self) -> usize {
        4 * self.n as usize + 1
    }

    pub fn index(&self, role: Role, level: u32) -> usize {
        debug_assert!((1..=self.n).contains(&level));
        4 * (level as usize - 1) + Role::ALL.iter().position(|&r| r == role).unwrap()
    }

    pub fn r_index(&self) -> usize {
        4 * self.n as usize
    }

    pub fn name(&self, role: Role, level: u32) -> String {
        format!("{}{level}", role.prefix())
    }

    pub fn register_names(&self) -> Vec<String> {
        let mut v = Vec::with_capacity(self.n_registers());
        for i in 1..=self.n {
            for r in Role::ALL {
                v.push(self.name(r, i));
            }
        }
        v.push("R".into());
        v
    }

    /// Role and level of a level register; `None` for `R`.
    pub fn role_of(&self, idx: usize) -> Option<(Role, u32)> {
        if idx >= self.r_index() {
            return None;
        }
        Some((Role::ALL[idx % 4], (idx / 4) as u32 + 1))
    }

    pub fn bar(&self, idx: usize) -> usize {
        let (role, level) = self.role_of(idx).expect("R has no bar");
        self.index(role.bar(), level)
    }
}

/// Classification flags of one level.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LevelFlags {
    pub proper: bool,
    pub weakly_proper: bool,
    pub low: bool,
    pub high: bool,
    pub empty: bool,
}

/// Flags for levels `1..=n`, plus `empty` for level `n + 1` (only `R`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Classification {
    levels: Vec<LevelFlags>,
    empty_top: bool,
}

impl Classification {
    /// Flags of level `i ∈ 1..=n`.
    pub fn level(&self, i: u32) -> LevelFlags {
        self.levels[i as usize - 1]
    }

    /// `i`-proper; `0`-proper always holds.
    pub fn proper(&self, i: u32) -> bool {
        i == 0 || self.level(i).proper
    }

    pub fn weakly_proper(&self, i: u32) -> bool {
        self.level(i).weakly_proper
    }

    pub fn low(&self, i: u32) -> bool {
        self.level(i).low
    }

    pub fn high(&self, i: u32) -> bool {
        self.level(i).high
    }

    /// `i`-empty for `i ∈ 1..=n+1`.
    pub fn empty(&self, i: u32) -> bool {
        if i as usize == self.levels.len() + 1 {
            self.empty_top
        } else {
            self.level(i).empty
        }
    }
}

/// Classifies a dense register vector over `layout`.
pub fn classify(c: &[u64], layout: LevelLayout) -> Classification {
    let n = layout.n;
    let at = |r: Role, i: u32| c[layout.index(r, i)];
    let mut levels = Vec::with_capacity(n as usize);
    let mut below_proper = true; // (i-1)-proper
    for i in 1..=n {
        let ni = level_constant_u64(i);
        let (x, y, xb, yb) = (at(Role::X, i), at(Role::Y, i), at(Role::Xb, i), at(Role::Yb, i));
        let proper = below_proper && x == 0 && y == 0 && xb == ni && yb == ni;
        let weakly_proper = below_proper && x.saturating_add(xb) == ni && y.saturating_add(yb) == ni;
        let low = below_proper && !proper && x == 0 && y == 0 && xb <= ni && yb <= ni;
        let high = below_proper && !proper && x.saturating_add(xb) >= ni && y.saturating_add(yb) >= ni;
        let empty = c[layout.index(Role::X, i)..].iter().all(|&v| v == 0);
        levels.push(LevelFlags { proper, weakly_proper, low, high, empty });
        below_proper = proper;
    }
    Classification { levels, empty_top: c[layout.r_index()] == 0 }
}

/// `C(x) · (N_i + 1) + C(y)`.
pub fn ctr(c: &[u64], x: usize, y: usize, level: u32) -> BigNat {
    BigNat::from(c[x]) * (level_constant(level) + 1u32) + BigNat::from(c[y])
}

fn p_check_empty(i: u32) -> String {
    format!("CheckEmpty@{i}")
}
fn p_check_proper(i: u32) -> String {
    format!("CheckProper@{i}")
}
fn p_zero(reg: &str) -> String {
    format!("Zero@{reg}")
}
fn p_large(reg: &str) -> String {
    format!("Large@{reg}")
}
fn p_incr(x: &str, y: &str) -> String {
    format!("IncrPair@{x}{y}")
}

/// Procedure names of the construction, by kind.
pub mod names {
    pub fn check_empty(i: u32) -> String {
        super::p_check_empty(i)
    }
    pub fn check_proper(i: u32) -> String {
        super::p_check_proper(i)
    }
    pub fn zero(reg: &str) -> String {
        super::p_zero(reg)
    }
    pub fn large(reg: &str) -> String {
        super::p_large(reg)
    }
    pub fn incr_pair(x: &str, y: &str) -> String {
        super::p_incr(x, y)
    }
}

/// The `n`-level program deciding `x ≥ threshold_k(n)`.
pub fn build_threshold_program(n: u32) -> Program {
    let l = LevelLayout::new(n);
    let name = |r: Role, i: u32| l.name(r, i);
    let mut procs = Vec::new();

    // Main
    let mut main = vec![set_of(false)];
    for i in 1..=n {
        main.push(while_(
            or(not(calls(&p_large(&name(Role::Xb, i)))), not(calls(&p_large(&name(Role::Yb, i))))),
            vec![call(&p_check_proper(i)), call(&p_check_empty(i + 1))],
        ));
    }
    main.push(set_of(true));
    main.push(while_(tt(), vec![call(&p_check_proper(n))]));
    procs.push(procedure("Main", false, main));

    // CheckEmpty
    for i in 1..=n {
        let mut body = vec![call(&p_check_empty(i + 1))];
        for r in Role::ALL {
            body.push(if_(maybe(&name(r, i)), vec![restart()]));
        }
        procs.push(procedure(&p_check_empty(i), false, body));
    }
    procs.push(procedure(&p_check_empty(n + 1), false, vec![if_(maybe("R"), vec![restart()])]));

    // CheckProper
    for i in 1..=n {
        let mut body = Vec::new();
        if i > 1 {
            body.push(call(&p_check_proper(i - 1)));
        }
        for r in [Role::X, Role::Y] {
            let x = name(r, i);
            body.push(if_(maybe(&x), vec![restart()]));
            body.push(call(&p_large(&name(r.bar(), i))));
            body.push(if_(maybe(&x), vec![restart()]));
        }
        procs.push(procedure(&p_check_proper(i), false, body));
    }

    for i in 1..=n {
        // Zero
        for r in Role::ALL {
            let x = name(r, i);
            let mut body = Vec::new();
            if i > 1 {
                body.push(call(&p_check_proper(i - 1)));
            }
            body.push(if_(maybe(&x), vec![ret(false)]));
            body.push(if_(calls(&p_large(&name(r.bar(), i))), vec![ret(true)]));
            procs.push(procedure(&p_zero(&x), true, vec![while_(tt(), body)]));
        }

        // IncrPair on (x, y) and on the barred pair
        for (rx, ry) in [(Role::X, Role::Y), (Role::Xb, Role::Yb)] {
            let (x, y, xb, yb) = (name(rx, i), name(ry, i), name(rx.bar(), i), name(ry.bar(), i));
            let body = vec![if_else(
                calls(&p_zero(&yb)),
                vec![
                    swap(&y, &yb),
                    if_else(calls(&p_zero(&xb)), vec![swap(&x, &xb)], vec![mv(&xb, &x)]),
                ],
                vec![mv(&yb, &y)],
            )];
            procs.push(procedure(&p_incr(&x, &y), false, body));
        }

        // Large
        for r in Role::ALL {
            let x = name(r, i);
            let xb = name(r.bar(), i);
            let body = if i == 1 {
                vec![if_else(maybe(&x), vec![mv(&x, &xb), swap(&x, &xb), ret(true)], vec![ret(false)])]
            } else {
                large_upper(&l, i, &x, &xb)
            };
            procs.push(procedure(&p_large(&x), true, body));
        }
    }

    Program { registers: l.register_names(), main: "Main".into(), procedures: procs }
}

fn large_upper(l: &LevelLayout, i: u32, x: &str, xb: &str) -> Vec<Stmt> {
    let (xl, yl) = (l.name(Role::X, i - 1), l.name(Role::Y, i - 1));
    let (xbl, ybl) = (l.name(Role::Xb, i - 1), l.name(Role::Yb, i - 1));
    let both_zero = || -> Condition { and(calls(&p_zero(&xl)), calls(&p_zero(&yl))) };
    let mut body = Vec::new();
    if i > 2 {
        body.push(call(&p_check_proper(i - 2)));
    }
    body.push(if_else(
        maybe(x),
        vec![mv(x, xb), call(&p_incr(&xl, &yl)), if_(both_zero(), vec![swap(x, xb), ret(true)])],
        vec![
            if_(both_zero(), vec![ret(false)]),
            if_(maybe(xb), vec![mv(xb, x), call(&p_incr(&xbl, &ybl))]),
        ],
    ));
    vec![
        if_(or(not(calls(&p_zero(&xl))), not(calls(&p_zero(&yl)))), vec![restart()]),
        while_(tt(), body),
    ]
}

/// The three-register program deciding `4 ≤ x ≤ 7`.
pub fn build_example_program() -> Program {
    let test = |i: u32| -> Procedure {
        procedure(
            &format!("Test@{i}"),
            true,
            vec![for_(i, vec![if_else(maybe("x"), vec![mv("x", "y")], vec![ret(false)])]), ret(true)],
        )
    };
    Program {
        registers: vec!["x".into(), "y".into(), "z".into()],
        main: "Main".into(),
        procedures: vec![
            procedure(
                "Main",
                false,
                vec![
                    set_of(false),
                    while_(not(calls("Test@4")), vec![call("Clean")]),
                    set_of(true),
                    while_(not(calls("Test@7")), vec![call("Clean")]),
                    set_of(false),
                    while_(tt(), vec![call("Clean")]),
                ],
            ),
            test(4),
            test(7),
            procedure(
                "Clean",
                false,
                vec![if_(maybe("z"), vec![restart()]), swap("x", "y"), while_(maybe("y"), vec![mv("y", "x")])],
            ),
        ],
    }
}
