//! Explicit-state exploration into a compact graph, and strongly connected
//! components.

use std::hash::{BuildHasher, Hash, Hasher};

use hashbrown::HashTable;
use rustc_hash::FxBuildHasher;

use crate::system::{Output, Successors, TransitionSystem, Word};

pub const DEFAULT_CAP: usize = 5_000_000;

const NO_PARENT: u32 = u32::MAX;

/// Reachable part of a transition system, stored with successor lists in
/// compressed rows. Node ids follow discovery order, roots first; `roots()[i]`
/// is the node of the `i`-th root passed to [`explore`].
pub struct ReachGraph {
    arena: Vec<Word>,
    starts: Vec<u32>,
    edge_start: Vec<u32>,
    edges: Vec<u32>,
    parent: Vec<u32>,
    outputs: Vec<Output>,
    roots: Vec<u32>,
    /// Some node was left unexpanded because the cap was reached.
    pub truncated: bool,
    /// First failed `check_step`, with the offending configuration.
    pub violation: Option<(u32, String)>,
}

#[derive(Debug, Clone, Copy)]
pub struct ExploreOptions {
    pub cap: usize,
    pub check_invariants: bool,
}

impl Default for ExploreOptions {
    fn default() -> Self {
        Self { cap: DEFAULT_CAP, check_invariants: false }
    }
}

fn hash_of(c: &[Word]) -> u64 {
    let mut h = FxBuildHasher.build_hasher();
    c.hash(&mut h);
    h.finish()
}

impl ReachGraph {
    pub fn n_nodes(&self) -> usize {
        self.starts.len() - 1
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn config(&self, v: u32) -> &[Word] {
        &self.arena[self.starts[v as usize] as usize..self.starts[v as usize + 1] as usize]
    }

    pub fn successors(&self, v: u32) -> &[u32] {
        &self.edges[self.edge_start[v as usize] as usize..self.edge_start[v as usize + 1] as usize]
    }

    pub fn output(&self, v: u32) -> Output {
        self.outputs[v as usize]
    }

    pub fn roots(&self) -> &[u32] {
        &self.roots
    }

    /// Discovery tree path from some root to `v`; shortest from the root set.
    pub fn path_to(&self, v: u32) -> Vec<u32> {
        let mut p = vec![v];
        let mut cur = v;
        while self.parent[cur as usize] != NO_PARENT {
            cur = self.parent[cur as usize];
            p.push(cur);
        }
        p.reverse();
        p
    }

    /// Shortest path from `root` to any node satisfying `goal`.
    pub fn shortest_path_from(&self, root: u32, goal: impl Fn(u32) -> bool) -> Option<Vec<u32>> {
        let n = self.n_nodes();
        let mut pred = vec![NO_PARENT; n];
        let mut seen = vec![false; n];
        let mut queue = std::collections::VecDeque::from([root]);
        seen[root as usize] = true;
        while let Some(v) = queue.pop_front() {
            if goal(v) {
                let mut p = vec![v];
                let mut cur = v;
                while pred[cur as usize] != NO_PARENT {
                    cur = pred[cur as usize];
                    p.push(cur);
                }
                p.reverse();
                return Some(p);
            }
            for &w in self.successors(v) {
                if !seen[w as usize] {
                    seen[w as usize] = true;
                    pred[w as usize] = v;
                    queue.push_back(w);
                }
            }
        }
        None
    }

    /// Looks up an encoded configuration by linear scan; for tests.
    pub fn find(&self, c: &[Word]) -> Option<u32> {
        (0..self.n_nodes() as u32).find(|&v| self.config(v) == c)
    }
}

/// Incremental construction of a [`ReachGraph`]: intern configurations, then
/// emit successor rows in node order.
pub struct GraphBuilder {
    g: ReachGraph,
    table: HashTable<u32>,
    // stamp[v] == row + 1 marks v as already listed in the current row.
    stamp: Vec<u32>,
    row_open: bool,
}

impl Default for GraphBuilder {
    fn default() -> Self {
        Self::new()
    }
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self {
            g: ReachGraph {
                arena: Vec::new(),
                starts: vec![0],
                edge_start: vec![0],
                edges: Vec::new(),
                parent: Vec::new(),
                outputs: Vec::new(),
                roots: Vec::new(),
                truncated: false,
                violation: None,
            },
            table: HashTable::new(),
            stamp: Vec::new(),
            row_open: false,
        }
    }

    pub fn len(&self) -> usize {
        self.g.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of nodes whose successor rows are complete.
    pub fn expanded(&self) -> usize {
        self.g.edge_start.len() - 1
    }

    pub fn config(&self, v: u32) -> &[Word] {
        self.g.config(v)
    }

    /// Id of `c`, adding it with the given output if new.
    pub fn intern(&mut self, c: &[Word], parent: u32, output: impl FnOnce() -> Output) -> (u32, bool) {
        let g = &mut self.g;
        let h = hash_of(c);
        let found = self.table.find(h, |&v| {
            let v = v as usize;
            &g.arena[g.starts[v] as usize..g.starts[v + 1] as usize] == c
        });
        if let Some(&v) = found {
            return (v, false);
        }
        let id = g.parent.len() as u32;
        g.arena.extend_from_slice(c);
        g.starts.push(g.arena.len() as u32);
        g.parent.push(parent);
        g.outputs.push(output());
        let (arena, starts) = (&g.arena, &g.starts);
        self.table.insert_unique(h, id, |&v| {
            let v = v as usize;
            hash_of(&arena[starts[v] as usize..starts[v + 1] as usize])
        });
        (id, true)
    }

    pub fn add_root(&mut self, c: &[Word], output: impl FnOnce() -> Output) -> u32 {
        let (id, _) = self.intern(c, NO_PARENT, output);
        self.g.roots.push(id);
        id
    }

    /// Adds an edge from the node currently being expanded to `to`.
    pub fn edge(&mut self, to: u32) {
        self.row_open = true;
        let row = self.expanded() as u32 + 1;
        if self.stamp.len() <= to as usize {
            self.stamp.resize(to as usize + 1, 0);
        }
        if self.stamp[to as usize] != row {
            self.stamp[to as usize] = row;
            self.g.edges.push(to);
        }
    }

    /// Interns `c` as a successor of the node being expanded and adds the edge.
    pub fn successor(&mut self, c: &[Word], output: impl FnOnce() -> Output) -> u32 {
        let from = self.expanded() as u32;
        let (id, _) = self.intern(c, from, output);
        self.edge(id);
        id
    }

    /// Closes the row of the node being expanded.
    pub fn end_row(&mut self) {
        self.row_open = false;
        self.g.edge_start.push(self.g.edges.len() as u32);
    }

    pub fn set_violation(&mut self, v: u32, e: String) {
        if self.g.violation.is_none() {
            self.g.violation = Some((v, e));
        }
    }

    pub fn finish(mut self, truncated: bool) -> ReachGraph {
        debug_assert!(!self.row_open);
        self.g.truncated = truncated;
        // Unexpanded nodes get empty rows so indexing stays total.
        while self.g.edge_start.len() < self.g.starts.len() {
            self.g.edge_start.push(self.g.edges.len() as u32);
        }
        self.g
    }
}

/// Breadth-first exploration from `roots`.
pub fn explore<S: TransitionSystem + ?Sized>(sys: &S, roots: &[Vec<Word>], opts: ExploreOptions) -> ReachGraph {
    let mut b = GraphBuilder::new();
    for r in roots {
        b.add_root(r, || sys.output(r));
    }
    let mut succs = Successors::new();
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
        succs.clear();
        sys.successors(&cur, &mut succs);
        if opts.check_invariants {
            if let Err(e) = sys.check_step(&cur, &succs) {
                b.set_violation(v, e);
            }
        }
        for s in succs.iter() {
            b.successor(s, || sys.output(s));
        }
        b.end_row();
    }
    b.finish(truncated)
}

/// Strongly connected components. `comp[v]` is the component of `v`;
/// components are numbered in the order Tarjan's algorithm completes them,
/// so every edge between components goes from a higher to a lower number.
pub struct Sccs {
    pub comp: Vec<u32>,
    pub count: usize,
}

pub fn sccs(g: &ReachGraph) -> Sccs {
    let n = g.n_nodes();
    const UNVISITED: u32 = u32::MAX;
    let mut index = vec![UNVISITED; n];
    let mut low = vec![0u32; n];
    let mut on_stack = vec![false; n];
    let mut comp = vec![UNVISITED; n];
    let mut stack: Vec<u32> = Vec::new();
    let mut call: Vec<(u32, u32)> = Vec::new();
    let mut counter = 0u32;
    let mut count = 0u32;

    for s in 0..n as u32 {
        if index[s as usize] != UNVISITED {
            continue;
        }
        call.push((s, 0));
        index[s as usize] = counter;
        low[s as usize] = counter;
        counter += 1;
        stack.push(s);
        on_stack[s as usize] = true;
        while let Some(&mut (v, ref mut i)) = call.last_mut() {
            let succ = g.successors(v);
            if (*i as usize) < succ.len() {
                let w = succ[*i as usize];
                *i += 1;
                if index[w as usize] == UNVISITED {
                    index[w as usize] = counter;
                    low[w as usize] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w as usize] = true;
                    call.push((w, 0));
                } else if on_stack[w as usize] {
                    low[v as usize] = low[v as usize].min(index[w as usize]);
                }
            } else {
                call.pop();
                if let Some(&(u, _)) = call.last() {
                    low[u as usize] = low[u as usize].min(low[v as usize]);
                }
                if low[v as usize] == index[v as usize] {
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w as usize] = false;
                        comp[w as usize] = count;
                        if w == v {
                            break;
                        }
                    }
                    count += 1;
                }
            }
        }
    }
    Sccs { comp, count: count as usize }
}

/// Summary of one component.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompKind {
    /// Uniform output `true`.
    True,
    /// Uniform output `false`.
    False,
    /// Outputs differ or are undefined somewhere.
    Mixed,
}

/// Bottom components and, per component, one reachable bottom component of
/// each kind.
pub struct BottomAnalysis {
    pub sccs: Sccs,
    pub bottom: Vec<bool>,
    pub kind: Vec<CompKind>,
    /// `reach[c][k]`: some bottom component of kind `k` reachable from `c`.
    pub reach: Vec<[Option<u32>; 3]>,
    /// A node of each component.
    pub repr: Vec<u32>,
}

fn kind_slot(k: CompKind) -> usize {
    match k {
        CompKind::True => 0,
        CompKind::False => 1,
        CompKind::Mixed => 2,
    }
}

pub fn bottom_analysis(g: &ReachGraph) -> BottomAnalysis {
    let sccs = sccs(g);
    let c = sccs.count;
    let mut bottom = vec![true; c];
    let mut out_t = vec![false; c];
    let mut out_f = vec![false; c];
    let mut out_u = vec![false; c];
    let mut repr = vec![u32::MAX; c];
    for v in 0..g.n_nodes() as u32 {
        let cv = sccs.comp[v as usize] as usize;
        if repr[cv] == u32::MAX {
            repr[cv] = v;
        }
        match g.output(v) {
            Output::True => out_t[cv] = true,
            Output::False => out_f[cv] = true,
            Output::Undefined => out_u[cv] = true,
        }
        for &w in g.successors(v) {
            if sccs.comp[w as usize] as usize != cv {
                bottom[cv] = false;
            }
        }
    }
    let kind: Vec<CompKind> = (0..c)
        .map(|i| match (out_t[i], out_f[i], out_u[i]) {
            (true, false, false) => CompKind::True,
            (false, true, false) => CompKind::False,
            _ => CompKind::Mixed,
        })
        .collect();

    // Successor components are completed first, so a forward pass over the
    // components suffices. Nodes are bucketed by component for that pass.
    let mut bucket_start = vec![0u32; c + 1];
    for &cv in &sccs.comp {
        bucket_start[cv as usize + 1] += 1;
    }
    for i in 0..c {
        bucket_start[i + 1] += bucket_start[i];
    }
    let mut fill = bucket_start.clone();
    let mut members = vec![0u32; g.n_nodes()];
    for v in 0..g.n_nodes() as u32 {
        let cv = sccs.comp[v as usize] as usize;
        members[fill[cv] as usize] = v;
        fill[cv] += 1;
    }
    let mut reach = vec![[None; 3]; c];
    for i in 0..c {
        if bottom[i] {
            reach[i][kind_slot(kind[i])] = Some(i as u32);
            continue;
        }
        let mut r = [None; 3];
        for &v in &members[bucket_start[i] as usize..bucket_start[i + 1] as usize] {
            for &w in g.successors(v) {
                let j = sccs.comp[w as usize] as usize;
                if j != i {
                    for k in 0..3 {
                        if r[k].is_none() {
                            r[k] = reach[j][k];
                        }
                    }
                }
            }
        }
        reach[i] = r;
    }
    BottomAnalysis { sccs, bottom, kind, reach, repr }
}

impl BottomAnalysis {
    /// Checks that every node has a component and that bottom components
    /// have no leaving edge.
    pub fn self_check(&self, g: &ReachGraph) -> Result<(), String> {
        for v in 0..g.n_nodes() as u32 {
            let cv = self.sccs.comp[v as usize];
            if cv as usize >= self.sccs.count {
                return Err(format!("node {v} has no component"));
            }
            if self.bottom[cv as usize] && g.successors(v).iter().any(|&w| self.sccs.comp[w as usize] != cv) {
                return Err(format!("bottom component {cv} has a leaving edge"));
            }
            if g.successors(v).is_empty() && !g.truncated {
                return Err(format!("node {v} has no successor"));
            }
        }
        Ok(())
    }

    pub fn comp_of(&self, v: u32) -> u32 {
        self.sccs.comp[v as usize]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `x` counts down to 0, with a branch at 2 into a two-cycle.
    struct Toy;

    impl TransitionSystem for Toy {
        fn successors(&self, c: &[Word], out: &mut Successors) {
            match c[0] {
                0 => out.push(c),
                2 => {
                    out.push(&[1]);
                    out.push(&[10]);
                }
                10 => out.push(&[11]),
                11 => out.push(&[10]),
                x => out.push(&[x - 1]),
            }
        }
        fn output(&self, c: &[Word]) -> Output {
            match c[0] {
                0 => Output::True,
                10 => Output::False,
                11 => Output::Undefined,
                _ => Output::False,
            }
        }
        fn describe(&self, c: &[Word]) -> String {
            c[0].to_string()
        }
    }

    #[test]
    fn bottom_components_of_toy() {
        let g = explore(&Toy, &[vec![4]], ExploreOptions::default());
        assert_eq!(g.n_nodes(), 7);
        let b = bottom_analysis(&g);
        b.self_check(&g).unwrap();
        let bottoms: Vec<usize> = (0..b.sccs.count).filter(|&c| b.bottom[c]).collect();
        assert_eq!(bottoms.len(), 2);
        let root = b.comp_of(g.roots()[0]) as usize;
        assert!(b.reach[root][0].is_some());
        assert!(b.reach[root][2].is_some());
        assert!(b.reach[root][1].is_none());
        let p = g.path_to(g.find(&[11]).unwrap());
        let cfgs: Vec<Word> = p.iter().map(|&v| g.config(v)[0]).collect();
        assert_eq!(cfgs, [4, 3, 2, 10, 11]);
    }

    #[test]
    fn cap_truncates() {
        let g = explore(&Toy, &[vec![100]], ExploreOptions { cap: 10, check_invariants: false });
        assert!(g.truncated);
    }

    #[test]
    fn tarjan_edges_point_down() {
        let g = explore(&Toy, &[vec![5], vec![2]], ExploreOptions::default());
        let s = sccs(&g);
        for v in 0..g.n_nodes() as u32 {
            for &w in g.successors(v) {
                assert!(s.comp[w as usize] <= s.comp[v as usize]);
            }
        }
        assert_eq!(g.roots().len(), 2);
    }
}
