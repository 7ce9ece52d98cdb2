//! Graph-edge finishing: Vizing's algorithm, the forbidden-list Hall
//! colorer, Δ-edge-coloring attempts, and the exact chromatic-index oracle.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::greedy::dsatur_vertices;
use crate::hypercore::{line_graph, EdgeColoring, LinearHypergraph, SimpleGraph};
use crate::matching::{hall_bipartite, min_deg_bipartite_match, HallOutcome, MatchError};
use crate::rng::Rng;

const NONE: usize = usize::MAX;

/// Partial edge coloring with palette `0..k` and a per-vertex color table.
struct Partial<'a> {
    g: &'a SimpleGraph,
    k: usize,
    color: Vec<usize>,
    at: Vec<u32>,
}

impl<'a> Partial<'a> {
    fn new(g: &'a SimpleGraph, k: usize) -> Self {
        Self { g, k, color: vec![NONE; g.m()], at: vec![0; g.n * k] }
    }

    fn other(&self, e: usize, v: usize) -> usize {
        let (a, b) = self.g.edges[e];
        if a == v {
            b
        } else {
            a
        }
    }

    fn edge_at(&self, v: usize, c: usize) -> Option<usize> {
        let x = self.at[v * self.k + c];
        (x != 0).then(|| x as usize - 1)
    }

    fn is_free(&self, v: usize, c: usize) -> bool {
        self.at[v * self.k + c] == 0
    }

    fn free_color(&self, v: usize) -> Option<usize> {
        (0..self.k).find(|&c| self.is_free(v, c))
    }

    fn set(&mut self, e: usize, c: usize) {
        let (a, b) = self.g.edges[e];
        debug_assert!(self.is_free(a, c) && self.is_free(b, c));
        self.color[e] = c;
        self.at[a * self.k + c] = e as u32 + 1;
        self.at[b * self.k + c] = e as u32 + 1;
    }

    fn unset(&mut self, e: usize) {
        let c = self.color[e];
        if c == NONE {
            return;
        }
        let (a, b) = self.g.edges[e];
        self.at[a * self.k + c] = 0;
        self.at[b * self.k + c] = 0;
        self.color[e] = NONE;
    }

    /// Colors the uncolored edge `e0` with fan center `u` (Misra–Gries step).
    /// Fails only if some fan vertex has no free color.
    fn color_edge(&mut self, u: usize, e0: usize) -> Result<(), ()> {
        let v0 = self.other(e0, u);
        if let Some(c) = (0..self.k).find(|&c| self.is_free(u, c) && self.is_free(v0, c)) {
            self.set(e0, c);
            return Ok(());
        }
        let mut fan = vec![v0];
        let mut fan_edges = vec![e0];
        loop {
            let last = *fan.last().unwrap();
            let mut ext = None;
            for c in 0..self.k {
                if !self.is_free(last, c) {
                    continue;
                }
                if let Some(f) = self.edge_at(u, c) {
                    let x = self.other(f, u);
                    if !fan.contains(&x) {
                        ext = Some((x, f));
                        break;
                    }
                }
            }
            match ext {
                Some((x, f)) => {
                    fan.push(x);
                    fan_edges.push(f);
                }
                None => break,
            }
        }
        let c = self.free_color(u).ok_or(())?;
        let d = self.free_color(*fan.last().unwrap()).ok_or(())?;
        if c != d {
            let mut path = Vec::new();
            let (mut cur, mut col) = (u, d);
            while let Some(f) = self.edge_at(cur, col) {
                path.push(f);
                cur = self.other(f, cur);
                col = if col == d { c } else { d };
            }
            let old: Vec<usize> = path.iter().map(|&f| self.color[f]).collect();
            for &f in &path {
                self.unset(f);
            }
            for (&f, &oc) in path.iter().zip(&old) {
                self.set(f, if oc == c { d } else { c });
            }
        }
        let mut w = None;
        for i in 0..fan.len() {
            if i > 0 {
                let ci = self.color[fan_edges[i]];
                if ci == NONE || !self.is_free(fan[i - 1], ci) {
                    break;
                }
            }
            if self.is_free(fan[i], d) {
                w = Some(i);
                break;
            }
        }
        let w = w.ok_or(())?;
        for j in 0..w {
            let cj = self.color[fan_edges[j + 1]];
            self.unset(fan_edges[j + 1]);
            self.set(fan_edges[j], cj);
        }
        if !self.is_free(u, d) || !self.is_free(fan[w], d) {
            return Err(());
        }
        self.set(fan_edges[w], d);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VizingResult {
    /// Color per edge, in `0..palette`.
    pub colors: Vec<usize>,
    pub palette: usize,
    pub delta: usize,
    pub max_degree_vertices: usize,
}

/// Proper edge coloring with at most Δ+1 colors; exactly Δ colors when at
/// most two vertices attain Δ. Otherwise a few Δ-color passes in shuffled
/// edge orders are tried before falling back to Δ+1.
pub fn vizing(g: &SimpleGraph) -> VizingResult {
    let delta = g.max_degree();
    let tops: Vec<usize> = (0..g.n).filter(|&v| g.degree(v) == delta && delta > 0).collect();
    if delta == 0 {
        return VizingResult { colors: Vec::new(), palette: 0, delta, max_degree_vertices: 0 };
    }
    if tops.len() <= 2 {
        let colors = color_with_delta_few_tops(g, delta, &tops)
            .expect("Δ colors suffice when at most two vertices have maximum degree");
        return VizingResult { colors, palette: delta, delta, max_degree_vertices: tops.len() };
    }
    // Misra–Gries passes with Δ colors in a bounded number of edge orders.
    let tries = if g.m() <= 256 { 64 } else { 2 };
    let mut order: Vec<usize> = (0..g.m()).collect();
    order.sort_by_key(|&e| std::cmp::Reverse(g.degree(g.edges[e].0) + g.degree(g.edges[e].1)));
    let mut rng = crate::rng::seeded(g.m() as u64);
    for _ in 0..tries {
        if let Some(colors) = try_k_colors(g, delta, &order) {
            return VizingResult { colors, palette: delta, delta, max_degree_vertices: tops.len() };
        }
        order.shuffle(&mut rng);
    }
    let mut p = Partial::new(g, delta + 1);
    for e in 0..g.m() {
        p.color_edge(g.edges[e].0, e).expect("Δ+1 colors always leave a free color");
    }
    assert!(p.color.iter().all(|&c| c <= delta));
    VizingResult { colors: p.color, palette: delta + 1, delta, max_degree_vertices: tops.len() }
}

/// Colors with `delta` colors when the maximum-degree vertices are `tops`
/// (at most two). Edges at those vertices are colored last so every fan
/// vertex keeps a free color.
fn color_with_delta_few_tops(g: &SimpleGraph, delta: usize, tops: &[usize]) -> Option<Vec<usize>> {
    let is_top = |v: usize| tops.contains(&v);
    let mut p = Partial::new(g, delta);
    for (e, &(a, b)) in g.edges.iter().enumerate() {
        if !is_top(a) && !is_top(b) {
            p.color_edge(a, e).ok()?;
        }
    }
    let mut joint = None;
    for &t in tops {
        for &(x, e) in &g.adj[t] {
            if is_top(x) {
                joint = Some((t, e));
            } else {
                p.color_edge(t, e).ok()?;
            }
        }
    }
    if let Some((t, e)) = joint {
        p.color_edge(t, e).ok()?;
    }
    Some(p.color)
}

/// Attempts a `k`-edge-coloring with the Misra–Gries step in the given edge
/// order. Returns `None` if a fan vertex runs out of free colors.
fn try_k_colors(g: &SimpleGraph, k: usize, order: &[usize]) -> Option<Vec<usize>> {
    let mut p = Partial::new(g, k);
    for &e in order {
        let (a, b) = g.edges[e];
        let (u, _) = if g.degree(a) >= g.degree(b) { (a, b) } else { (b, a) };
        if p.color_edge(u, e).is_err() {
            p.color_edge(p.other(e, u), e).ok()?;
        }
    }
    Some(p.color)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FinishError {
    #[error("precondition unmet: {0}")]
    PreconditionUnmet(String),
    #[error("no matching for the edges at vertex {0}")]
    MatchFailed(usize),
    #[error("edge {0} meets no vertex of U")]
    EdgeMissesU(usize),
}

/// Checks the hypotheses of the forbidden-list Hall colorer.
pub fn hall_finish_preconditions(
    g: &SimpleGraph,
    palette: &[usize],
    forbidden: &[Vec<usize>],
    u: &[usize],
    delta: f64,
) -> Result<(), FinishError> {
    let n = g.n as f64;
    let bound = delta * n + 1e-9;
    let fail = |s: String| Err(FinishError::PreconditionUnmet(s));
    if (palette.len() as f64) < 7.0 * delta * n - 1e-9 {
        return fail(format!("|C|={} < 7δn", palette.len()));
    }
    let in_pal: std::collections::HashSet<usize> = palette.iter().copied().collect();
    let mut mult: std::collections::HashMap<usize, usize> = Default::default();
    for w in 0..g.n {
        let cw: std::collections::HashSet<usize> =
            forbidden[w].iter().copied().filter(|c| in_pal.contains(c)).collect();
        if g.degree(w) + cw.len() > palette.len() {
            return fail(format!("deg + forbidden exceeds |C| at vertex {w}"));
        }
        if cw.len() as f64 > bound {
            return fail(format!("more than δn forbidden colors at vertex {w}"));
        }
        for c in cw {
            *mult.entry(c).or_default() += 1;
        }
    }
    if let Some((c, _)) = mult.iter().find(|(_, &k)| k as f64 > bound) {
        return fail(format!("color {c} forbidden at more than δn vertices"));
    }
    if u.len() as f64 > bound {
        return fail(format!("|U|={} > δn", u.len()));
    }
    let mut in_u = vec![false; g.n];
    for &x in u {
        in_u[x] = true;
    }
    if let Some(e) = (0..g.m()).find(|&e| !in_u[g.edges[e].0] && !in_u[g.edges[e].1]) {
        return fail(format!("edge {e} misses U"));
    }
    Ok(())
}

/// Proper coloring from `palette` with `φ(vw) ∉ forbidden[v] ∪ forbidden[w]`,
/// after checking the hypotheses.
pub fn hall_finish(
    g: &SimpleGraph,
    palette: &[usize],
    forbidden: &[Vec<usize>],
    u: &[usize],
    delta: f64,
) -> Result<Vec<usize>, FinishError> {
    hall_finish_preconditions(g, palette, forbidden, u, delta)?;
    hall_finish_unchecked(g, palette, forbidden, u)
}

/// The colorer itself: vertices of `U` are processed in order; the uncolored
/// edges at `u_i` are matched to colors avoiding both endpoints' forbidden
/// and already-used colors.
pub fn hall_finish_unchecked(
    g: &SimpleGraph,
    palette: &[usize],
    forbidden: &[Vec<usize>],
    u: &[usize],
) -> Result<Vec<usize>, FinishError> {
    let p = palette.len();
    let index: std::collections::HashMap<usize, usize> = palette.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    // blocked[v][c]: c forbidden at v or already used at v.
    let mut blocked = vec![vec![false; p]; g.n];
    for (v, fv) in forbidden.iter().enumerate() {
        for c in fv {
            if let Some(&i) = index.get(c) {
                blocked[v][i] = true;
            }
        }
    }
    let mut color = vec![NONE; g.m()];
    for &ui in u {
        let a: Vec<(usize, usize)> = g.adj[ui].iter().copied().filter(|&(_, e)| color[e] == NONE).collect();
        if a.is_empty() {
            continue;
        }
        let b: Vec<usize> = (0..p).filter(|&c| !blocked[ui][c]).collect();
        let adj: Vec<Vec<usize>> =
            a.iter().map(|&(v, _)| (0..b.len()).filter(|&j| !blocked[v][b[j]]).collect()).collect();
        let matching = match min_deg_bipartite_match(a.len(), b.len(), &adj) {
            Ok(m) => m,
            Err(MatchError::PreconditionUnmet(_)) => match hall_bipartite(a.len(), b.len(), &adj) {
                HallOutcome::Matching(m) => m,
                HallOutcome::Violator { .. } => return Err(FinishError::MatchFailed(ui)),
            },
            Err(_) => return Err(FinishError::MatchFailed(ui)),
        };
        for (i, j) in matching {
            let (v, e) = a[i];
            let c = b[j];
            color[e] = palette[c];
            blocked[ui][c] = true;
            blocked[v][c] = true;
        }
    }
    if let Some(e) = color.iter().position(|&c| c == NONE) {
        return Err(FinishError::EdgeMissesU(e));
    }
    Ok(color)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DeltaMethod {
    Vizing,
    Exact,
    Heuristic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum DeltaColorOutcome {
    Colored { colors: Vec<usize>, delta: usize, method: DeltaMethod, hypotheses_held: bool },
    NotApplicable { reason: String, fallback: Vec<usize>, palette: usize },
}

/// Largest vertex count for which the Δ-coloring attempt uses exact search.
pub const DELTA_EXACT_VERTICES: usize = 14;

/// Attempts a Δ-edge-coloring. The hypotheses (at least Δ vertices of degree
/// below Δ, sampled lower regularity with density `p` and error `eps`) are
/// checked and reported; the attempt is made regardless. Falls back to
/// Vizing's Δ+1 colors.
pub fn delta_edge_color(g: &SimpleGraph, p: f64, eps: f64, rng: &mut Rng) -> DeltaColorOutcome {
    let delta = g.max_degree();
    let low = (0..g.n).filter(|&v| g.degree(v) < delta).count();
    let hypothesis_failure = if low < delta {
        Some(format!("only {low} vertices below Δ={delta}"))
    } else {
        sampled_lower_regularity(g, p, eps, 32, rng)
    };
    let hypotheses_held = hypothesis_failure.is_none();
    let v = vizing(g);
    if v.palette == delta {
        return DeltaColorOutcome::Colored { colors: v.colors, delta, method: DeltaMethod::Vizing, hypotheses_held };
    }
    let not_applicable = |why: String, v: VizingResult| {
        let reason = match &hypothesis_failure {
            Some(h) => format!("{h}; {why}"),
            None => why,
        };
        DeltaColorOutcome::NotApplicable { reason, fallback: v.colors, palette: v.palette }
    };
    if g.n <= DELTA_EXACT_VERTICES {
        let adj = graph_line_adjacency(g);
        return match k_colorable(&adj, delta, 20_000_000) {
            KColoring::Colorable(colors) => {
                DeltaColorOutcome::Colored { colors, delta, method: DeltaMethod::Exact, hypotheses_held }
            }
            KColoring::NotColorable => not_applicable(format!("χ' = Δ+1 = {} by exact search", delta + 1), v),
            KColoring::BudgetExceeded => not_applicable("exact search budget exceeded".into(), v),
        };
    }
    let mut order: Vec<usize> = (0..g.m()).collect();
    for _ in 0..20 {
        if let Some(colors) = try_k_colors(g, delta, &order) {
            return DeltaColorOutcome::Colored { colors, delta, method: DeltaMethod::Heuristic, hypotheses_held };
        }
        order.shuffle(rng);
    }
    not_applicable("heuristic Δ-coloring failed".into(), v)
}

/// Samples disjoint pairs `S, T` of size `⌈eps·n⌉` and checks
/// `e(S,T) ≥ (p − eps)|S||T|`; returns a description of the first failure.
pub fn sampled_lower_regularity(g: &SimpleGraph, p: f64, eps: f64, samples: usize, rng: &mut Rng) -> Option<String> {
    let n = g.n;
    let s = ((eps * n as f64).ceil() as usize).max(1);
    if 2 * s > n {
        return None;
    }
    let mut nbr = vec![Vec::new(); n];
    for &(a, b) in &g.edges {
        nbr[a].push(b);
        nbr[b].push(a);
    }
    let mut verts: Vec<usize> = (0..n).collect();
    let mut side = vec![0u8; n];
    for _ in 0..samples {
        let (chosen, _) = verts.partial_shuffle(rng, 2 * s);
        let chosen = chosen.to_vec();
        for &v in &chosen[..s] {
            side[v] = 1;
        }
        for &v in &chosen[s..] {
            side[v] = 2;
        }
        let e: usize = chosen[..s].iter().map(|&v| nbr[v].iter().filter(|&&w| side[w] == 2).count()).sum();
        for &v in &chosen {
            side[v] = 0;
        }
        if (e as f64) < (p - eps) * (s * s) as f64 - 1e-9 {
            return Some(format!("lower regularity fails: e(S,T)={e} for |S|=|T|={s}"));
        }
    }
    None
}

fn graph_line_adjacency(g: &SimpleGraph) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); g.m()];
    for v in 0..g.n {
        for (i, &(_, e)) in g.adj[v].iter().enumerate() {
            for &(_, f) in &g.adj[v][i + 1..] {
                adj[e].push(f);
                adj[f].push(e);
            }
        }
    }
    adj
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KColoring {
    Colorable(Vec<usize>),
    NotColorable,
    BudgetExceeded,
}

/// Backtracking `k`-coloring with DSATUR branching and color-symmetry
/// breaking. `budget` caps the number of search nodes.
pub fn k_colorable(adj: &[Vec<usize>], k: usize, budget: u64) -> KColoring {
    k_colorable_with(adj, None, k, budget)
}

/// `k`-edge-coloring of `h` as vertex coloring of its line graph `adj`, with
/// the extra cut that every color can still take at most
/// `⌊eligible vertices / r_min⌋` more edges.
pub fn k_edge_colorable(h: &LinearHypergraph, adj: &[Vec<usize>], k: usize, budget: u64) -> KColoring {
    let cap = Capacity {
        edges: h.edges(),
        n: h.n(),
        r_min: h.edges().iter().map(Vec::len).min().unwrap_or(1).max(1),
        covered: vec![false; h.n() * k],
        stamp: vec![0; h.n()],
        gen: 0,
    };
    k_colorable_with(adj, Some(cap), k, budget)
}

fn k_colorable_with(adj: &[Vec<usize>], cap: Option<Capacity<'_>>, k: usize, budget: u64) -> KColoring {
    let n = adj.len();
    if n == 0 {
        return KColoring::Colorable(Vec::new());
    }
    if k == 0 {
        return KColoring::NotColorable;
    }
    let mut s =
        Search { adj, k, color: vec![NONE; n], forb: vec![0u16; n * k], sat: vec![0; n], nodes: 0, budget, cap };
    match s.rec(0, 0) {
        Some(true) => KColoring::Colorable(s.color),
        Some(false) => KColoring::NotColorable,
        None => KColoring::BudgetExceeded,
    }
}

struct Search<'a> {
    adj: &'a [Vec<usize>],
    k: usize,
    color: Vec<usize>,
    forb: Vec<u16>,
    sat: Vec<usize>,
    nodes: u64,
    budget: u64,
    cap: Option<Capacity<'a>>,
}

struct Capacity<'a> {
    edges: &'a [Vec<usize>],
    n: usize,
    r_min: usize,
    /// `covered[c * n + v]`: some edge at `v` has color `c`.
    covered: Vec<bool>,
    stamp: Vec<usize>,
    gen: usize,
}

impl Search<'_> {
    /// Upper bound on how many more edges the `k` classes can take.
    fn capacity_ok(&mut self, remaining: usize) -> bool {
        let Some(cap) = self.cap.as_mut() else { return true };
        let mut total = 0;
        for c in 0..self.k {
            cap.gen += 1;
            let mut eligible = 0;
            for (e, edge) in cap.edges.iter().enumerate() {
                if self.color[e] != NONE || self.forb[e * self.k + c] != 0 {
                    continue;
                }
                for &v in edge {
                    if cap.stamp[v] != cap.gen && !cap.covered[c * cap.n + v] {
                        cap.stamp[v] = cap.gen;
                        eligible += 1;
                    }
                }
            }
            total += eligible / cap.r_min;
            if total >= remaining {
                return true;
            }
        }
        total >= remaining
    }

    fn assign(&mut self, v: usize, c: usize) {
        self.color[v] = c;
        if let Some(cap) = self.cap.as_mut() {
            for &x in &cap.edges[v] {
                cap.covered[c * cap.n + x] = true;
            }
        }
        let adj = self.adj;
        for &w in &adj[v] {
            let slot = &mut self.forb[w * self.k + c];
            if *slot == 0 {
                self.sat[w] += 1;
            }
            *slot += 1;
        }
    }

    fn unassign(&mut self, v: usize, c: usize) {
        self.color[v] = NONE;
        if let Some(cap) = self.cap.as_mut() {
            for &x in &cap.edges[v] {
                cap.covered[c * cap.n + x] = false;
            }
        }
        let adj = self.adj;
        for &w in &adj[v] {
            let slot = &mut self.forb[w * self.k + c];
            *slot -= 1;
            if *slot == 0 {
                self.sat[w] -= 1;
            }
        }
    }

    /// `Some(true)` when colored, `Some(false)` when refuted, `None` on budget.
    fn rec(&mut self, done: usize, used: usize) -> Option<bool> {
        if done == self.adj.len() {
            return Some(true);
        }
        self.nodes += 1;
        if self.nodes > self.budget {
            return None;
        }
        if !self.capacity_ok(self.adj.len() - done) {
            return Some(false);
        }
        let mut best = NONE;
        let mut key = (0usize, 0usize);
        for v in 0..self.adj.len() {
            if self.color[v] != NONE {
                continue;
            }
            let kv = (self.sat[v], self.adj[v].len());
            if best == NONE || kv > key {
                best = v;
                key = kv;
            }
        }
        let v = best;
        if self.sat[v] >= self.k {
            return Some(false);
        }
        let top = (used + 1).min(self.k);
        for c in 0..top {
            if self.forb[v * self.k + c] != 0 {
                continue;
            }
            self.assign(v, c);
            let r = self.rec(done + 1, used.max(c + 1));
            if r != Some(false) {
                if r.is_none() {
                    self.unassign(v, c);
                }
                return r;
            }
            self.unassign(v, c);
        }
        Some(false)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExactConfig {
    /// Largest edge count accepted.
    pub limit: usize,
    /// Search-node budget per decision problem.
    pub node_budget: u64,
}

impl Default for ExactConfig {
    fn default() -> Self {
        Self { limit: 24, node_budget: 50_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExactResult {
    pub chromatic_index: usize,
    pub coloring: EdgeColoring,
    pub lower_bound: usize,
    pub upper_bound: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExactError {
    #[error("{edges} edges exceed the limit {limit}")]
    TooLarge { edges: usize, limit: usize },
    #[error("search budget exceeded; χ' in [{lower}, {upper}]")]
    BudgetExceeded { lower: usize, upper: usize, best: EdgeColoring },
}

/// Exact chromatic index by branch-and-bound on the line graph, between the
/// clique lower bound and the DSATUR upper bound.
pub fn exact_chromatic_index(h: &LinearHypergraph, cfg: &ExactConfig) -> Result<ExactResult, ExactError> {
    if h.m() > cfg.limit {
        return Err(ExactError::TooLarge { edges: h.m(), limit: cfg.limit });
    }
    let adj = line_graph(h);
    let upper_colors = dsatur_vertices(&adj);
    let upper = upper_colors.iter().map(|&c| c + 1).max().unwrap_or(0);
    let lower = h.max_degree().max(greedy_clique(&adj)).max(counting_bound(h));
    let mut best = upper_colors;
    let mut chi = upper;
    for k in lower..upper {
        match k_edge_colorable(h, &adj, k, cfg.node_budget) {
            KColoring::Colorable(c) => {
                best = c;
                chi = k;
                break;
            }
            KColoring::NotColorable => {}
            KColoring::BudgetExceeded => {
                return Err(ExactError::BudgetExceeded { lower: k, upper, best: EdgeColoring::from_colors(best) });
            }
        }
    }
    Ok(ExactResult {
        chromatic_index: chi,
        coloring: EdgeColoring::from_colors(best),
        lower_bound: lower,
        upper_bound: upper,
    })
}

/// A color class is a matching, so inside a vertex set `S` it holds at most
/// `⌊|S| / r_min⌋` edges lying in `S`. Tried for `S = V` and `S = V − v`.
fn counting_bound(h: &LinearHypergraph) -> usize {
    let n = h.n();
    let within = |skip: Option<usize>| -> usize {
        let inside: Vec<&Vec<usize>> = h.edges().iter().filter(|e| skip.is_none_or(|v| !e.contains(&v))).collect();
        let r_min = inside.iter().map(|e| e.len()).min().unwrap_or(1).max(1);
        let verts = n - usize::from(skip.is_some());
        inside.len().div_ceil((verts / r_min).max(1))
    };
    (0..n).map(Some).chain([None]).map(within).max().unwrap_or(0)
}

/// Size of a greedily grown clique, trying every start vertex.
pub fn greedy_clique(adj: &[Vec<usize>]) -> usize {
    let n = adj.len();
    let mut is_nbr = vec![false; n];
    let mut best = usize::from(n > 0);
    for v in 0..n {
        let mut cand: Vec<usize> = adj[v].clone();
        cand.sort_by_key(|&w| std::cmp::Reverse(adj[w].len()));
        let mut clique = vec![v];
        for w in cand {
            for &x in &adj[w] {
                is_nbr[x] = true;
            }
            if clique.iter().all(|&x| is_nbr[x]) {
                clique.push(w);
            }
            for &x in &adj[w] {
                is_nbr[x] = false;
            }
        }
        best = best.max(clique.len());
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{complete, degenerate, projective_plane};
    use crate::hypercore::verify_coloring;
    use crate::rng::seeded;
    use rand::Rng as _;

    fn check_proper(g: &SimpleGraph, colors: &[usize]) {
        for v in 0..g.n {
            let mut cs: Vec<usize> = g.adj[v].iter().map(|&(_, e)| colors[e]).collect();
            cs.sort_unstable();
            cs.dedup();
            assert_eq!(cs.len(), g.degree(v), "conflict at {v}");
        }
    }

    fn cycle(n: usize) -> SimpleGraph {
        SimpleGraph::new(n, (0..n).map(|i| (i, (i + 1) % n)).collect())
    }

    #[test]
    fn vizing_small_cases() {
        let r = vizing(&cycle(5));
        check_proper(&cycle(5), &r.colors);
        assert_eq!(r.palette, 3);
        let star = SimpleGraph::new(5, (1..5).map(|i| (0, i)).collect());
        let r = vizing(&star);
        assert_eq!(r.palette, 4);
        check_proper(&star, &r.colors);
    }

    #[test]
    fn vizing_random_dense() {
        let mut rng = seeded(3);
        for _ in 0..30 {
            let n = 20;
            let mut edges = Vec::new();
            for a in 0..n {
                for b in a + 1..n {
                    if rng.gen_bool(0.4) {
                        edges.push((a, b));
                    }
                }
            }
            let g = SimpleGraph::new(n, edges);
            let r = vizing(&g);
            check_proper(&g, &r.colors);
            assert!(r.palette <= g.max_degree() + 1);
        }
    }

    #[test]
    fn hall_finish_star_avoids_forbidden() {
        let star = SimpleGraph::new(5, (1..5).map(|i| (0, i)).collect());
        let mut forbidden = vec![Vec::new(); 5];
        forbidden[0] = vec![1];
        let palette: Vec<usize> = (0..5).collect();
        let c = hall_finish_unchecked(&star, &palette, &forbidden, &[0]).unwrap();
        check_proper(&star, &c);
        assert!(!c.contains(&1));
    }

    #[test]
    fn exact_known_values() {
        let cfg = ExactConfig::default();
        assert_eq!(exact_chromatic_index(&projective_plane(2).unwrap(), &cfg).unwrap().chromatic_index, 7);
        assert_eq!(exact_chromatic_index(&complete(5), &cfg).unwrap().chromatic_index, 5);
        let d6 = degenerate(6).unwrap();
        let r = exact_chromatic_index(&d6, &cfg).unwrap();
        assert_eq!(r.chromatic_index, 6);
        verify_coloring(&d6, &r.coloring).unwrap();
    }

    #[test]
    fn capacity_cut_keeps_answers() {
        let mut rng = seeded(12);
        for _ in 0..200 {
            let n = rng.gen_range(3..9);
            let mut edges = Vec::new();
            for a in 0..n {
                for b in a + 1..n {
                    if rng.gen_bool(0.6) {
                        edges.push((a, b));
                    }
                }
            }
            let h = SimpleGraph::new(n, edges).as_hypergraph();
            let adj = line_graph(&h);
            for k in h.max_degree()..=h.max_degree() + 1 {
                let plain = matches!(k_colorable(&adj, k, u64::MAX), KColoring::Colorable(_));
                let cut = matches!(k_edge_colorable(&h, &adj, k, u64::MAX), KColoring::Colorable(_));
                assert_eq!(plain, cut, "k={k} on {:?}", h.edges());
            }
        }
    }

    #[test]
    fn odd_complete_graphs_are_settled() {
        let cfg = ExactConfig { limit: 66, ..Default::default() };
        assert_eq!(exact_chromatic_index(&complete(11), &cfg).unwrap().chromatic_index, 11);
        assert_eq!(exact_chromatic_index(&complete(9), &cfg).unwrap().chromatic_index, 9);
    }

    #[test]
    fn delta_on_k4_and_c5() {
        let mut rng = seeded(1);
        let k4 = SimpleGraph::new(4, vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
        // K4 has no vertex below Δ, so the hypotheses fail, yet χ'(K4)=Δ.
        match delta_edge_color(&k4, 0.5, 0.1, &mut rng) {
            DeltaColorOutcome::Colored { colors, delta, hypotheses_held, .. } => {
                assert_eq!(delta, 3);
                assert!(!hypotheses_held);
                check_proper(&k4, &colors);
                assert!(colors.iter().all(|&c| c < 3));
            }
            other => panic!("{other:?}"),
        }
        let c5 = cycle(5);
        match delta_edge_color(&c5, 0.5, 0.1, &mut rng) {
            DeltaColorOutcome::NotApplicable { palette, fallback, .. } => {
                assert_eq!(palette, 3);
                check_proper(&c5, &fallback);
            }
            other => panic!("{other:?}"),
        }
    }
}
