//! Matching engines: bipartite Hall matchings, dense perfect matchings via
//! random bipartition, minimum-degree bipartite matchings, general maximum
//! matchings, and (g,f)-factors.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hypercore::SimpleGraph;
use crate::rng::Rng;

pub const NONE: usize = usize::MAX;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MatchError {
    #[error("Hall violation: {} vertices with {} neighbours", violator.len(), neighbourhood)]
    HallViolation { violator: Vec<usize>, neighbourhood: usize },
    #[error("precondition unmet: {0}")]
    PreconditionUnmet(String),
    #[error("graph has odd order {0}")]
    OddOrder(usize),
    #[error("no perfect matching found after {0} retries")]
    RetriesExhausted(usize),
    #[error("no perfect matching exists")]
    NoPerfectMatching,
}

/// Maximum bipartite matching (Hopcroft–Karp). `adj[a]` lists the `B`-side
/// neighbours of `a`. Returns `(mate_a, mate_b)` with `NONE` for unmatched.
pub fn hopcroft_karp(na: usize, nb: usize, adj: &[Vec<usize>]) -> (Vec<usize>, Vec<usize>) {
    let mut mate_a = vec![NONE; na];
    let mut mate_b = vec![NONE; nb];
    let mut dist = vec![0usize; na];
    loop {
        let mut queue = VecDeque::new();
        for a in 0..na {
            if mate_a[a] == NONE {
                dist[a] = 0;
                queue.push_back(a);
            } else {
                dist[a] = usize::MAX;
            }
        }
        let mut found = false;
        while let Some(a) = queue.pop_front() {
            for &b in &adj[a] {
                let a2 = mate_b[b];
                if a2 == NONE {
                    found = true;
                } else if dist[a2] == usize::MAX {
                    dist[a2] = dist[a] + 1;
                    queue.push_back(a2);
                }
            }
        }
        if !found {
            break;
        }
        let mut it = vec![0usize; na];
        for a in 0..na {
            if mate_a[a] == NONE {
                augment_hk(a, adj, &mut mate_a, &mut mate_b, &mut dist, &mut it);
            }
        }
    }
    (mate_a, mate_b)
}

fn augment_hk(
    root: usize,
    adj: &[Vec<usize>],
    mate_a: &mut [usize],
    mate_b: &mut [usize],
    dist: &mut [usize],
    it: &mut [usize],
) -> bool {
    // Iterative DFS over the layered graph.
    let mut stack = vec![root];
    let mut path_b: Vec<usize> = Vec::new();
    while let Some(&a) = stack.last() {
        let mut advanced = false;
        while it[a] < adj[a].len() {
            let b = adj[a][it[a]];
            it[a] += 1;
            let a2 = mate_b[b];
            if a2 == NONE {
                path_b.push(b);
                // Flip along the stack.
                for (i, &x) in stack.iter().enumerate() {
                    let y = path_b[i];
                    mate_a[x] = y;
                    mate_b[y] = x;
                }
                return true;
            }
            if dist[a2] == dist[a] + 1 {
                path_b.push(b);
                stack.push(a2);
                advanced = true;
                break;
            }
        }
        if !advanced {
            dist[a] = usize::MAX;
            stack.pop();
            path_b.pop();
        }
    }
    false
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HallOutcome {
    /// Pairs `(a, b)` covering every `a`.
    Matching(Vec<(usize, usize)>),
    /// `S ⊆ A` with fewer than `|S|` neighbours.
    Violator { set: Vec<usize>, neighbourhood: Vec<usize> },
}

/// A matching covering `A`, or a Hall violator.
pub fn hall_bipartite(na: usize, nb: usize, adj: &[Vec<usize>]) -> HallOutcome {
    let (mate_a, mate_b) = hopcroft_karp(na, nb, adj);
    let Some(root) = (0..na).find(|&a| mate_a[a] == NONE) else {
        return HallOutcome::Matching((0..na).map(|a| (a, mate_a[a])).collect());
    };
    // Alternating search from an exposed vertex: reachable A-vertices form
    // the violator and their neighbourhood is the reachable B-vertices.
    let mut seen_a = vec![false; na];
    let mut seen_b = vec![false; nb];
    let mut queue = VecDeque::from([root]);
    seen_a[root] = true;
    while let Some(a) = queue.pop_front() {
        for &b in &adj[a] {
            if !seen_b[b] {
                seen_b[b] = true;
                let a2 = mate_b[b];
                debug_assert!(a2 != NONE, "maximum matching has no augmenting path");
                if a2 != NONE && !seen_a[a2] {
                    seen_a[a2] = true;
                    queue.push_back(a2);
                }
            }
        }
    }
    let set: Vec<usize> = (0..na).filter(|&a| seen_a[a]).collect();
    let neighbourhood: Vec<usize> = (0..nb).filter(|&b| seen_b[b]).collect();
    debug_assert!(neighbourhood.len() < set.len());
    HallOutcome::Violator { set, neighbourhood }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrossingOutcome {
    pub matching: Vec<(usize, usize)>,
    pub preconditions_met: bool,
    pub greedy: bool,
}

/// Matching covering `A` in a bipartite graph meeting the upper-regularity
/// hypotheses; `n` is the ambient vertex count. Small `A` is matched greedily.
pub fn crossing_match(
    na: usize,
    nb: usize,
    adj: &[Vec<usize>],
    rho: f64,
    xi: f64,
    n: usize,
) -> Result<CrossingOutcome, MatchError> {
    let min_deg = adj.iter().map(Vec::len).min().unwrap_or(usize::MAX);
    let preconditions_met = na == 0 || min_deg as f64 >= 2.0 * rho * na as f64;
    if (na as f64) < xi * n as f64 / rho && preconditions_met {
        let mut used = vec![false; nb];
        let mut matching = Vec::with_capacity(na);
        for (a, nbrs) in adj.iter().enumerate() {
            if let Some(&b) = nbrs.iter().find(|&&b| !used[b]) {
                used[b] = true;
                matching.push((a, b));
            }
        }
        if matching.len() == na {
            return Ok(CrossingOutcome { matching, preconditions_met, greedy: true });
        }
    }
    match hall_bipartite(na, nb, adj) {
        HallOutcome::Matching(matching) => Ok(CrossingOutcome { matching, preconditions_met, greedy: false }),
        HallOutcome::Violator { set, neighbourhood } => {
            Err(MatchError::HallViolation { violator: set, neighbourhood: neighbourhood.len() })
        }
    }
}

/// Matching covering `A` under `|A| <= |B|` and `δ_A + δ_B >= |A|`.
pub fn min_deg_bipartite_match(na: usize, nb: usize, adj: &[Vec<usize>]) -> Result<Vec<(usize, usize)>, MatchError> {
    if na == 0 {
        return Ok(Vec::new());
    }
    let delta_a = adj.iter().map(Vec::len).min().unwrap_or(0);
    let mut deg_b = vec![0usize; nb];
    for nbrs in adj {
        for &b in nbrs {
            deg_b[b] += 1;
        }
    }
    let delta_b = deg_b.iter().copied().min().unwrap_or(0);
    if na > nb || delta_a + delta_b < na {
        return Err(MatchError::PreconditionUnmet(format!("|A|={na}, |B|={nb}, delta_A={delta_a}, delta_B={delta_b}")));
    }
    match hall_bipartite(na, nb, adj) {
        HallOutcome::Matching(m) => Ok(m),
        HallOutcome::Violator { set, neighbourhood } => {
            Err(MatchError::HallViolation { violator: set, neighbourhood: neighbourhood.len() })
        }
    }
}

/// Perfect matching of `G[verts]` using edges of `g` (returned as edge ids).
/// Random balanced bipartitions are matched with Hall's engine; after
/// `retries` failures, graphs on at most 20 vertices are searched exhaustively.
pub fn dense_perfect_match(
    g: &SimpleGraph,
    verts: &[usize],
    allowed: &dyn Fn(usize) -> bool,
    retries: usize,
    rng: &mut Rng,
) -> Result<Vec<usize>, MatchError> {
    let m = verts.len();
    if m % 2 == 1 {
        return Err(MatchError::OddOrder(m));
    }
    if m == 0 {
        return Ok(Vec::new());
    }
    let mut pos = vec![NONE; g.n];
    let mut order = verts.to_vec();
    for _ in 0..retries {
        order.shuffle(rng);
        for (i, &v) in order.iter().enumerate() {
            pos[v] = i;
        }
        let half = m / 2;
        // A side: order[..half]; B side: order[half..].
        let adj: Vec<Vec<usize>> = order[..half]
            .iter()
            .map(|&v| {
                g.adj[v]
                    .iter()
                    .filter(|&&(w, id)| pos[w] != NONE && pos[w] >= half && allowed(id))
                    .map(|&(w, _)| pos[w] - half)
                    .collect()
            })
            .collect();
        let (mate_a, _) = hopcroft_karp(half, m - half, &adj);
        let done = mate_a.iter().all(|&b| b != NONE);
        if done {
            let out = (0..half)
                .map(|a| {
                    let (u, w) = (order[a], order[half + mate_a[a]]);
                    g.adj[u].iter().find(|&&(x, id)| x == w && allowed(id)).unwrap().1
                })
                .collect();
            for &v in verts {
                pos[v] = NONE;
            }
            return Ok(out);
        }
    }
    for &v in verts {
        pos[v] = NONE;
    }
    if m <= 20 {
        return exhaustive_perfect_matching(g, verts, allowed).ok_or(MatchError::NoPerfectMatching);
    }
    Err(MatchError::RetriesExhausted(retries))
}

/// Exhaustive search: match the lowest unmatched vertex with each neighbour.
pub fn exhaustive_perfect_matching(
    g: &SimpleGraph,
    verts: &[usize],
    allowed: &dyn Fn(usize) -> bool,
) -> Option<Vec<usize>> {
    let mut inside = vec![false; g.n];
    for &v in verts {
        inside[v] = true;
    }
    let mut sorted = verts.to_vec();
    sorted.sort_unstable();
    let mut matched = vec![false; g.n];
    let mut out = Vec::new();
    fn rec(
        g: &SimpleGraph,
        sorted: &[usize],
        inside: &[bool],
        matched: &mut [bool],
        allowed: &dyn Fn(usize) -> bool,
        out: &mut Vec<usize>,
    ) -> bool {
        let Some(&v) = sorted.iter().find(|&&v| !matched[v]) else {
            return true;
        };
        matched[v] = true;
        for &(w, id) in &g.adj[v] {
            if inside[w] && !matched[w] && allowed(id) {
                matched[w] = true;
                out.push(id);
                if rec(g, sorted, inside, matched, allowed, out) {
                    return true;
                }
                out.pop();
                matched[w] = false;
            }
        }
        matched[v] = false;
        false
    }
    rec(g, &sorted, &inside, &mut matched, allowed, &mut out).then_some(out)
}

/// Maximum matching in a general graph (Edmonds' blossom algorithm).
/// Returns `mate` with `NONE` for exposed vertices.
pub fn max_matching_general(n: usize, adj: &[Vec<usize>]) -> Vec<usize> {
    let mut mate = vec![NONE; n];
    for v in 0..n {
        if mate[v] == NONE {
            if let Some(&w) = adj[v].iter().find(|&&w| mate[w] == NONE && w != v) {
                mate[v] = w;
                mate[w] = v;
            }
        }
    }
    let mut blossom = Blossom::new(n);
    for root in 0..n {
        if mate[root] == NONE {
            blossom.augment_from(root, adj, &mut mate);
        }
    }
    mate
}

struct Blossom {
    parent: Vec<usize>,
    base: Vec<usize>,
    used: Vec<bool>,
    in_blossom: Vec<bool>,
    in_path: Vec<bool>,
}

impl Blossom {
    fn new(n: usize) -> Self {
        Self {
            parent: vec![NONE; n],
            base: (0..n).collect(),
            used: vec![false; n],
            in_blossom: vec![false; n],
            in_path: vec![false; n],
        }
    }

    fn lca(&mut self, mut a: usize, mut b: usize, mate: &[usize]) -> usize {
        self.in_path.iter_mut().for_each(|x| *x = false);
        loop {
            a = self.base[a];
            self.in_path[a] = true;
            if mate[a] == NONE {
                break;
            }
            a = self.parent[mate[a]];
        }
        loop {
            b = self.base[b];
            if self.in_path[b] {
                return b;
            }
            b = self.parent[mate[b]];
        }
    }

    fn mark_path(&mut self, mut v: usize, b: usize, mut child: usize, mate: &[usize]) {
        while self.base[v] != b {
            self.in_blossom[self.base[v]] = true;
            self.in_blossom[self.base[mate[v]]] = true;
            self.parent[v] = child;
            child = mate[v];
            v = self.parent[mate[v]];
        }
    }

    fn augment_from(&mut self, root: usize, adj: &[Vec<usize>], mate: &mut [usize]) -> bool {
        let n = mate.len();
        self.used.iter_mut().for_each(|x| *x = false);
        self.parent.iter_mut().for_each(|x| *x = NONE);
        for i in 0..n {
            self.base[i] = i;
        }
        self.used[root] = true;
        let mut queue = VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            for &to in &adj[v] {
                if self.base[v] == self.base[to] || mate[v] == to {
                    continue;
                }
                if to == root || (mate[to] != NONE && self.parent[mate[to]] != NONE) {
                    let cur = self.lca(v, to, mate);
                    self.in_blossom.iter_mut().for_each(|x| *x = false);
                    self.mark_path(v, cur, to, mate);
                    self.mark_path(to, cur, v, mate);
                    for i in 0..n {
                        if self.in_blossom[self.base[i]] {
                            self.base[i] = cur;
                            if !self.used[i] {
                                self.used[i] = true;
                                queue.push_back(i);
                            }
                        }
                    }
                } else if self.parent[to] == NONE {
                    self.parent[to] = v;
                    if mate[to] == NONE {
                        let mut u = to;
                        while u != NONE {
                            let pv = self.parent[u];
                            let ppv = mate[pv];
                            mate[u] = pv;
                            mate[pv] = u;
                            u = ppv;
                        }
                        return true;
                    }
                    self.used[mate[to]] = true;
                    queue.push_back(mate[to]);
                }
            }
        }
        false
    }
}

/// Dinic max-flow on an explicit arc list.
struct Flow {
    head: Vec<usize>,
    to: Vec<usize>,
    cap: Vec<i64>,
    next: Vec<usize>,
    level: Vec<usize>,
    it: Vec<usize>,
}

impl Flow {
    fn new(n: usize) -> Self {
        Self {
            head: vec![NONE; n],
            to: Vec::new(),
            cap: Vec::new(),
            next: Vec::new(),
            level: vec![0; n],
            it: vec![0; n],
        }
    }

    fn add(&mut self, u: usize, v: usize, c: i64) -> usize {
        let id = self.to.len();
        self.to.push(v);
        self.cap.push(c);
        self.next.push(self.head[u]);
        self.head[u] = id;
        self.to.push(u);
        self.cap.push(0);
        self.next.push(self.head[v]);
        self.head[v] = id + 1;
        id
    }

    fn bfs(&mut self, s: usize, t: usize) -> bool {
        self.level.iter_mut().for_each(|x| *x = usize::MAX);
        self.level[s] = 0;
        let mut q = VecDeque::from([s]);
        while let Some(u) = q.pop_front() {
            let mut a = self.head[u];
            while a != NONE {
                let v = self.to[a];
                if self.cap[a] > 0 && self.level[v] == usize::MAX {
                    self.level[v] = self.level[u] + 1;
                    q.push_back(v);
                }
                a = self.next[a];
            }
        }
        self.level[t] != usize::MAX
    }

    fn dfs(&mut self, u: usize, t: usize, f: i64) -> i64 {
        if u == t {
            return f;
        }
        while self.it[u] != NONE {
            let a = self.it[u];
            let v = self.to[a];
            if self.cap[a] > 0 && self.level[v] == self.level[u] + 1 {
                let d = self.dfs(v, t, f.min(self.cap[a]));
                if d > 0 {
                    self.cap[a] -= d;
                    self.cap[a ^ 1] += d;
                    return d;
                }
            }
            self.it[u] = self.next[a];
        }
        0
    }

    fn max_flow(&mut self, s: usize, t: usize) -> i64 {
        let mut total = 0;
        while self.bfs(s, t) {
            self.it.clone_from(&self.head);
            loop {
                let f = self.dfs(s, t, i64::MAX);
                if f == 0 {
                    break;
                }
                total += f;
            }
        }
        total
    }

    fn reachable(&self, s: usize) -> Vec<bool> {
        let mut seen = vec![false; self.head.len()];
        seen[s] = true;
        let mut q = VecDeque::from([s]);
        while let Some(u) = q.pop_front() {
            let mut a = self.head[u];
            while a != NONE {
                let v = self.to[a];
                if self.cap[a] > 0 && !seen[v] {
                    seen[v] = true;
                    q.push_back(v);
                }
                a = self.next[a];
            }
        }
        seen
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum GfWitness {
    /// Residual-reachable sets of the relaxation's min cut: vertices whose
    /// "out" copy and whose "in" copy lie on the source side.
    Cut { out_side: Vec<usize>, in_side: Vec<usize> },
    /// The relaxation is feasible but the exact reduction found no factor
    /// (a parity obstruction).
    Parity,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GfError {
    #[error("no (g,f)-factor: {0:?}")]
    Infeasible(GfWitness),
    #[error("g exceeds f at vertex {0}")]
    BadBounds(usize),
    #[error("instance too large for the exact reduction and the repair heuristic stalled")]
    Unresolved,
}

/// Largest gadget (vertex count) handed to the exact blossom reduction.
pub const GF_EXACT_LIMIT: usize = 1500;

/// A spanning edge set `F` with `g(w) <= d_F(w) <= f(w)`.
///
/// The bipartite double cover relaxation (each vertex split into an out-copy
/// and an in-copy, each edge usable in both directions) is solved by max-flow
/// with lower bounds; its infeasibility is a certificate. Otherwise the factor
/// is found exactly by reduction to maximum matching when the gadget is small,
/// or by augmenting-path repair of a greedy start.
pub fn gf_factor(g: &SimpleGraph, lo: &[usize], hi: &[usize]) -> Result<Vec<usize>, GfError> {
    let n = g.n;
    if let Some(v) = (0..n).find(|&v| lo[v] > hi[v]) {
        return Err(GfError::BadBounds(v));
    }
    if let Some(w) = relaxation_witness(g, lo, hi) {
        return Err(GfError::Infeasible(w));
    }
    let gadget_size: usize = (0..n).map(|v| 2 * g.degree(v) - lo[v].min(g.degree(v))).sum::<usize>() + 1;
    if gadget_size <= GF_EXACT_LIMIT {
        return gf_exact(g, lo, hi).ok_or(GfError::Infeasible(GfWitness::Parity));
    }
    gf_repair(g, lo, hi).ok_or(GfError::Unresolved)
}

fn relaxation_witness(g: &SimpleGraph, lo: &[usize], hi: &[usize]) -> Option<GfWitness> {
    let n = g.n;
    // Nodes: s=0, t=1, out(v)=2+v, in(v)=2+n+v, S*=2+2n, T*=3+2n.
    let (s, t, ss, tt) = (0, 1, 2 + 2 * n, 3 + 2 * n);
    let out = |v: usize| 2 + v;
    let inn = |v: usize| 2 + n + v;
    let mut fl = Flow::new(4 + 2 * n);
    let mut excess = vec![0i64; 4 + 2 * n];
    for v in 0..n {
        let (l, u) = (lo[v] as i64, hi[v].min(g.degree(v)) as i64);
        if l > u {
            return Some(GfWitness::Cut { out_side: vec![v], in_side: vec![] });
        }
        fl.add(s, out(v), u - l);
        excess[s] -= l;
        excess[out(v)] += l;
        fl.add(inn(v), t, u - l);
        excess[inn(v)] -= l;
        excess[t] += l;
    }
    for &(a, b) in &g.edges {
        fl.add(out(a), inn(b), 1);
        fl.add(out(b), inn(a), 1);
    }
    fl.add(t, s, i64::MAX / 4);
    let mut need = 0;
    for (x, &e) in excess.iter().enumerate() {
        if e > 0 {
            fl.add(ss, x, e);
            need += e;
        } else if e < 0 {
            fl.add(x, tt, -e);
        }
    }
    if fl.max_flow(ss, tt) == need {
        return None;
    }
    let seen = fl.reachable(ss);
    Some(GfWitness::Cut {
        out_side: (0..n).filter(|&v| seen[out(v)]).collect(),
        in_side: (0..n).filter(|&v| seen[inn(v)]).collect(),
    })
}

/// Exact reduction: vertex `v` becomes one port per incident edge, `d - f`
/// mandatory absorbers and `f - g` optional absorbers, each adjacent to all
/// ports of `v`; edge `uv` joins the two corresponding ports. A matching
/// covering all ports and mandatory absorbers is a factor. Optional absorbers
/// are made skippable by a clique of dummies attached to all of them.
fn gf_exact(g: &SimpleGraph, lo: &[usize], hi: &[usize]) -> Option<Vec<usize>> {
    let n = g.n;
    let mut port = vec![Vec::new(); n];
    let mut next = 0usize;
    for v in 0..n {
        for _ in 0..g.degree(v) {
            port[v].push(next);
            next += 1;
        }
    }
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); next];
    let link = |adj: &mut Vec<Vec<usize>>, a: usize, b: usize| {
        adj[a].push(b);
        adj[b].push(a);
    };
    // Port pairs for edges.
    let mut edge_ports = Vec::with_capacity(g.m());
    let mut slot = vec![0usize; n];
    for &(a, b) in &g.edges {
        let pa = port[a][slot[a]];
        let pb = port[b][slot[b]];
        slot[a] += 1;
        slot[b] += 1;
        link(&mut adj, pa, pb);
        edge_ports.push((pa, pb));
    }
    let mut mandatory = 0usize;
    let mut optional = Vec::new();
    for v in 0..n {
        let d = g.degree(v);
        let f = hi[v].min(d);
        let gl = lo[v];
        for k in 0..(d - gl) {
            let x = adj.len();
            adj.push(Vec::new());
            for &p in &port[v] {
                link(&mut adj, x, p);
            }
            if k < d - f {
                mandatory += 1;
            } else {
                optional.push(x);
            }
        }
    }
    let must = next + mandatory;
    let dummies = optional.len() + must % 2;
    let first_dummy = adj.len();
    for _ in 0..dummies {
        adj.push(Vec::new());
    }
    for i in 0..dummies {
        for &o in &optional {
            link(&mut adj, first_dummy + i, o);
        }
        for j in i + 1..dummies {
            link(&mut adj, first_dummy + i, first_dummy + j);
        }
    }
    let mate = max_matching_general(adj.len(), &adj);
    if mate.iter().any(|&m| m == NONE) {
        return None;
    }
    Some(edge_ports.iter().enumerate().filter(|(_, &(pa, pb))| mate[pa] == pb).map(|(i, _)| i).collect())
}

/// Greedy start followed by alternating-path repair on the original graph.
fn gf_repair(g: &SimpleGraph, lo: &[usize], hi: &[usize]) -> Option<Vec<usize>> {
    let n = g.n;
    let mut in_f = vec![false; g.m()];
    let mut deg = vec![0usize; n];
    // Greedy start: neediest vertices first, each taking its neediest neighbours.
    let need = |v: usize, deg: &[usize]| lo[v] as i64 - deg[v] as i64;
    let mut verts: Vec<usize> = (0..n).collect();
    verts.sort_by_key(|&v| (std::cmp::Reverse(lo[v]), v));
    for &v in &verts {
        let mut nbrs: Vec<(usize, usize)> = g.adj[v].clone();
        nbrs.sort_by_key(|&(w, id)| (std::cmp::Reverse(need(w, &deg)), id));
        for (w, id) in nbrs {
            if deg[v] >= lo[v] {
                break;
            }
            if !in_f[id] && deg[w] < hi[w] {
                in_f[id] = true;
                deg[v] += 1;
                deg[w] += 1;
            }
        }
    }
    let deficit: usize = (0..n).map(|v| lo[v].saturating_sub(deg[v])).sum();
    let mut skipped = vec![false; n];
    // Alternating BFS: from a deficient vertex, alternate non-F / F edges
    // until reaching a vertex that can take one more edge.
    for _round in 0..2 * deficit + 10 {
        let Some(root) = (0..n).find(|&v| deg[v] < lo[v] && !skipped[v]) else {
            if (0..n).all(|v| deg[v] >= lo[v]) {
                return Some((0..g.m()).filter(|&i| in_f[i]).collect());
            }
            return None;
        };
        let mut prev: Vec<(usize, usize)> = vec![(NONE, NONE); 2 * n];
        // State (v, parity): parity 0 = reached by F-edge (or root), needs a non-F edge next.
        let mut seen = vec![false; 2 * n];
        seen[root * 2] = true;
        let mut q = VecDeque::from([(root, 0usize)]);
        let mut end = None;
        while let Some((v, par)) = q.pop_front() {
            for &(w, id) in &g.adj[v] {
                let want_f = par == 1;
                if in_f[id] != want_f {
                    continue;
                }
                let np = 1 - par;
                if seen[w * 2 + np] {
                    continue;
                }
                seen[w * 2 + np] = true;
                prev[w * 2 + np] = (v * 2 + par, id);
                // Reached w by a non-F edge: done if w can take one more.
                if np == 1 && w != root && deg[w] < hi[w] {
                    end = Some(w * 2 + np);
                    break;
                }
                q.push_back((w, np));
            }
            if end.is_some() {
                break;
            }
        }
        let Some(mut cur) = end else {
            skipped[root] = true;
            continue;
        };
        let mut flipped = Vec::new();
        let mut simple = true;
        while cur != root * 2 {
            let (p, id) = prev[cur];
            if flipped.contains(&id) {
                simple = false;
                break;
            }
            flipped.push(id);
            cur = p;
        }
        if !simple {
            skipped[root] = true;
            continue;
        }
        for &id in &flipped {
            let (a, b) = g.edges[id];
            if in_f[id] {
                deg[a] -= 1;
                deg[b] -= 1;
            } else {
                deg[a] += 1;
                deg[b] += 1;
            }
            in_f[id] = !in_f[id];
        }
        if (0..n).any(|v| deg[v] > hi[v]) {
            return None;
        }
        skipped.iter_mut().for_each(|x| *x = false);
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn cycle(n: usize) -> SimpleGraph {
        SimpleGraph::new(n, (0..n).map(|i| (i, (i + 1) % n)).collect())
    }

    #[test]
    fn hall_basic() {
        let adj = vec![vec![0], vec![1]];
        assert_eq!(hall_bipartite(2, 2, &adj), HallOutcome::Matching(vec![(0, 0), (1, 1)]));
        let adj = vec![vec![0], vec![0]];
        match hall_bipartite(2, 2, &adj) {
            HallOutcome::Violator { set, neighbourhood } => {
                assert_eq!(set, vec![0, 1]);
                assert_eq!(neighbourhood, vec![0]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn crossing_small_and_complete() {
        let out = crossing_match(1, 3, &[vec![2]], 0.3, 0.01, 100).unwrap();
        assert_eq!(out.matching, vec![(0, 2)]);
        let adj: Vec<Vec<usize>> = (0..10).map(|_| (0..10).collect()).collect();
        assert_eq!(crossing_match(10, 10, &adj, 0.3, 0.01, 20).unwrap().matching.len(), 10);
    }

    #[test]
    fn dense_perfect_cases() {
        let mut rng = seeded(1);
        let c4 = cycle(4);
        let pm = dense_perfect_match(&c4, &[0, 1, 2, 3], &|_| true, 10, &mut rng).unwrap();
        assert_eq!(pm.len(), 2);
        let mut edges = Vec::new();
        for a in 0..6 {
            for b in a + 1..6 {
                if !(a % 2 == 0 && b == a + 1) {
                    edges.push((a, b));
                }
            }
        }
        let g = SimpleGraph::new(6, edges);
        assert_eq!(dense_perfect_match(&g, &[0, 1, 2, 3, 4, 5], &|_| true, 10, &mut rng).unwrap().len(), 3);
        assert_eq!(dense_perfect_match(&c4, &[0, 1, 2], &|_| true, 10, &mut rng), Err(MatchError::OddOrder(3)));
    }

    #[test]
    fn min_degree_match() {
        let adj = vec![vec![0, 1], vec![1, 2], vec![0, 2]];
        assert_eq!(min_deg_bipartite_match(3, 3, &adj).unwrap().len(), 3);
        let adj = vec![vec![0], vec![0], vec![1]];
        assert!(matches!(min_deg_bipartite_match(3, 3, &adj), Err(MatchError::PreconditionUnmet(_))));
    }

    #[test]
    fn blossom_on_odd_cycles() {
        let c5 = cycle(5);
        let adj: Vec<Vec<usize>> = (0..5).map(|v| c5.adj[v].iter().map(|p| p.0).collect()).collect();
        let mate = max_matching_general(5, &adj);
        assert_eq!(mate.iter().filter(|&&m| m != NONE).count(), 4);
        // Two triangles joined by an edge: perfect matching exists.
        let g = SimpleGraph::new(6, vec![(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (2, 3)]);
        let adj: Vec<Vec<usize>> = (0..6).map(|v| g.adj[v].iter().map(|p| p.0).collect()).collect();
        assert!(max_matching_general(6, &adj).iter().all(|&m| m != NONE));
    }

    #[test]
    fn gf_examples() {
        let c4 = cycle(4);
        let f = gf_factor(&c4, &[1; 4], &[1; 4]).unwrap();
        assert_eq!(f.len(), 2);
        let p3 = SimpleGraph::new(3, vec![(0, 1), (1, 2)]);
        assert!(matches!(gf_factor(&p3, &[1; 3], &[1; 3]), Err(GfError::Infeasible(_))));
        let tri = cycle(3);
        assert_eq!(gf_factor(&tri, &[1; 3], &[1; 3]), Err(GfError::Infeasible(GfWitness::Parity)));
    }

    #[test]
    fn gf_repair_on_dense_graph() {
        let n = 40;
        let mut edges = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                if (a * 7 + b * 3) % 5 != 0 {
                    edges.push((a, b));
                }
            }
        }
        let g = SimpleGraph::new(n, edges);
        let f = gf_repair(&g, &vec![1; n], &vec![3; n]).unwrap();
        let mut deg = vec![0; n];
        for &i in &f {
            deg[g.edges[i].0] += 1;
            deg[g.edges[i].1] += 1;
        }
        assert!(deg.iter().all(|&d| (1..=3).contains(&d)));
    }
}
