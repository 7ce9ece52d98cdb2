//! Colorings with at most two edges per color for hypergraphs whose edges
//! all have size about `√n` or more: useful pairs, pairings from matchings in
//! the complement of the line graph, and the case ladder that finds them.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hypercore::{verify_coloring, EdgeColoring, LinearHypergraph};
use crate::matching::max_matching_general;

/// Edge pairs sharing a color, plus the edges colored alone.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PairingPlan {
    pub pairs: Vec<(usize, usize)>,
    pub singles: Vec<usize>,
}

impl PairingPlan {
    /// Plan whose singles are all edges not in `pairs`.
    pub fn from_pairs(m: usize, pairs: Vec<(usize, usize)>) -> Self {
        let paired: BTreeSet<usize> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
        let singles = (0..m).filter(|e| !paired.contains(e)).collect();
        Self { pairs, singles }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExtremalError {
    #[error("plan has {have} pairs but e(H) - n = {need}")]
    PlanTooSmall { need: usize, have: usize },
    #[error("paired edges {0} and {1} intersect")]
    PairNotDisjoint(usize, usize),
    #[error("plan does not partition the edges")]
    PlanNotPartition,
    #[error("no chain of useful pairs found")]
    NotFound,
    #[error("every step of the case ladder failed")]
    CaseLadderExhausted,
}

/// Number of edges meeting both `e` and `f`, other than `e` and `f`.
pub fn common_neighbours(h: &LinearHypergraph, e: usize, f: usize) -> usize {
    let ne: BTreeSet<usize> = h.neighbors(e).into_iter().collect();
    h.neighbors(f).into_iter().filter(|g| *g != e && ne.contains(g)).count()
}

/// `e ≠ f`, `e ∩ f ≠ ∅` and `|N(e) ∩ N(f)| ≤ n − 2`.
pub fn useful_pair(h: &LinearHypergraph, e: usize, f: usize) -> bool {
    e != f && h.intersects(e, f) && common_neighbours(h, e, f) + 2 <= h.n()
}

/// The `k` with `(k−1)² + k + 1 ≤ n ≤ k² + k + 1`, taken as
/// `⌈(−1 + √(4n−3)) / 2⌉`.
pub fn size_threshold(n: usize) -> usize {
    if n <= 1 {
        return 1;
    }
    let mut k = ((-1.0 + (4.0 * n as f64 - 3.0).sqrt()) / 2.0).ceil() as usize;
    while k * k + k + 1 < n {
        k += 1;
    }
    while k > 1 && (k - 1) * (k - 1) + (k - 1) + 1 >= n {
        k -= 1;
    }
    k
}

/// The sufficient condition for a useful pair: `e`, `f` intersect at `w`,
/// both have size at most `k`, and one of them is smaller than `k` or `w`
/// lies in at most `1/(3δ)` edges of size below `k`.
pub fn useful_by_size(h: &LinearHypergraph, e: usize, f: usize, delta: f64) -> bool {
    if e == f || !h.intersects(e, f) {
        return false;
    }
    let k = size_threshold(h.n());
    let (se, sf) = (h.edge(e).len(), h.edge(f).len());
    if se > k || sf > k {
        return false;
    }
    if se < k || sf < k {
        return true;
    }
    let w = *h.edge(e).iter().find(|v| h.edge(f).contains(v)).expect("edges intersect");
    let m = h.incident(w).iter().filter(|&&g| h.edge(g).len() < k).count();
    m as f64 <= 1.0 / (3.0 * delta) + 1e-9
}

/// Vertices in at least `1/(4δ)` edges of size below `k`.
pub fn v_bad(h: &LinearHypergraph, delta: f64) -> Vec<usize> {
    let k = size_threshold(h.n());
    let thr = 1.0 / (4.0 * delta);
    (0..h.n())
        .filter(|&x| h.incident(x).iter().filter(|&&g| h.edge(g).len() < k).count() as f64 >= thr - 1e-9)
        .collect()
}

/// One color per pair and per single.
pub fn pair_color(h: &LinearHypergraph, plan: &PairingPlan) -> Result<EdgeColoring, ExtremalError> {
    let m = h.m();
    let mut seen = vec![false; m];
    for &e in plan.pairs.iter().flat_map(|(a, b)| [a, b]).chain(plan.singles.iter()) {
        if e >= m || seen[e] {
            return Err(ExtremalError::PlanNotPartition);
        }
        seen[e] = true;
    }
    if seen.iter().any(|s| !s) {
        return Err(ExtremalError::PlanNotPartition);
    }
    let need = m.saturating_sub(h.n());
    if plan.pairs.len() < need {
        return Err(ExtremalError::PlanTooSmall { need, have: plan.pairs.len() });
    }
    if let Some(&(a, b)) = plan.pairs.iter().find(|&&(a, b)| h.intersects(a, b)) {
        return Err(ExtremalError::PairNotDisjoint(a, b));
    }
    let mut col = EdgeColoring::uncolored(m);
    for (c, &(a, b)) in plan.pairs.iter().enumerate() {
        col.set(a, c);
        col.set(b, c);
    }
    for (i, &e) in plan.singles.iter().enumerate() {
        col.set(e, plan.pairs.len() + i);
    }
    Ok(col)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsefulChain {
    /// `e_1, …, e_2t`: pairwise intersecting, `{e_2i−1, e_2i}` useful.
    pub edges: Vec<usize>,
    /// `z_i` misses `e_2i−1` or `e_2i`.
    pub z: Vec<usize>,
    /// The pairs `{z_i, e_2i−1 or e_2i}`, a matching of the complement of the
    /// line graph.
    pub plan: PairingPlan,
}

/// Picks `z_1, …, z_t` for a chain and builds the induced pairing.
pub fn select_z(h: &LinearHypergraph, chain: &[usize]) -> Result<UsefulChain, ExtremalError> {
    let in_chain: BTreeSet<usize> = chain.iter().copied().collect();
    let mut taken = BTreeSet::new();
    let mut z = Vec::new();
    let mut pairs = Vec::new();
    for p in chain.chunks(2) {
        let (a, b) = (p[0], p[1]);
        let pick = (0..h.m())
            .find(|&g| !in_chain.contains(&g) && !taken.contains(&g) && (!h.intersects(g, a) || !h.intersects(g, b)));
        let g = pick.ok_or(ExtremalError::NotFound)?;
        taken.insert(g);
        z.push(g);
        pairs.push(if h.intersects(g, a) { (b, g) } else { (a, g) });
    }
    Ok(UsefulChain { edges: chain.to_vec(), z, plan: PairingPlan::from_pairs(h.m(), pairs) })
}

/// Pairs up `pool` (assumed pairwise intersecting) into `t` useful pairs,
/// greedily in order.
fn pair_pool(h: &LinearHypergraph, pool: &[usize], t: usize) -> Option<Vec<usize>> {
    let mut used = vec![false; pool.len()];
    let mut chain = Vec::new();
    for i in 0..pool.len() {
        if chain.len() == 2 * t {
            break;
        }
        if used[i] {
            continue;
        }
        if let Some(j) = (i + 1..pool.len()).find(|&j| !used[j] && useful_pair(h, pool[i], pool[j])) {
            used[i] = true;
            used[j] = true;
            chain.push(pool[i]);
            chain.push(pool[j]);
        }
    }
    (chain.len() == 2 * t).then_some(chain)
}

/// Searches for `2t` pairwise intersecting edges with consecutive useful
/// pairs, then selects the `z_i`. The search grows cliques of the line graph
/// by backtracking with a node budget.
pub fn useful_chain(h: &LinearHypergraph, t: usize) -> Result<UsefulChain, ExtremalError> {
    if t == 0 {
        return Ok(UsefulChain { edges: Vec::new(), z: Vec::new(), plan: PairingPlan::from_pairs(h.m(), Vec::new()) });
    }
    let nbrs: Vec<BTreeSet<usize>> = (0..h.m()).map(|e| h.neighbors(e).into_iter().collect()).collect();
    let mut budget = 200_000usize;
    let mut chain = Vec::new();
    fn rec(
        h: &LinearHypergraph,
        nbrs: &[BTreeSet<usize>],
        t: usize,
        chain: &mut Vec<usize>,
        cands: Vec<usize>,
        budget: &mut usize,
    ) -> bool {
        if chain.len() == 2 * t {
            return true;
        }
        if *budget == 0 || cands.len() < 2 * t - chain.len() {
            return false;
        }
        *budget -= 1;
        for (i, &a) in cands.iter().enumerate() {
            for &b in &cands[i + 1..] {
                if !nbrs[a].contains(&b) || !useful_pair(h, a, b) {
                    continue;
                }
                let next: Vec<usize> = cands[i + 1..]
                    .iter()
                    .copied()
                    .filter(|&g| g != b && nbrs[a].contains(&g) && nbrs[b].contains(&g))
                    .collect();
                chain.push(a);
                chain.push(b);
                if rec(h, nbrs, t, chain, next, budget) {
                    return true;
                }
                chain.truncate(chain.len() - 2);
                if *budget == 0 {
                    return false;
                }
            }
        }
        false
    }
    if !rec(h, &nbrs, t, &mut chain, (0..h.m()).collect(), &mut budget) {
        return Err(ExtremalError::NotFound);
    }
    select_z(h, &chain)
}

/// Greedy maximal matching of the complement of the line graph, in edge
/// index order.
pub fn maximal_complement_matching(h: &LinearHypergraph) -> Vec<(usize, usize)> {
    let mut matched = vec![false; h.m()];
    let mut out = Vec::new();
    for a in 0..h.m() {
        if matched[a] {
            continue;
        }
        if let Some(b) = (a + 1..h.m()).find(|&b| !matched[b] && !h.intersects(a, b)) {
            matched[a] = true;
            matched[b] = true;
            out.push((a, b));
        }
    }
    out
}

/// Complement-of-line-graph instances up to this many edges are matched
/// exactly when the ladder fails.
pub const EXACT_PAIRING_LIMIT: usize = 1500;

/// Which rung of the case ladder produced the pairing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LadderStep {
    /// `e(H) ≤ n`: every edge gets its own color.
    Trivial,
    /// Few edges below size `k`: pairs from `A⁻ ∪ A⁺`.
    FewSmall,
    /// Few edges of size exactly `k`: pairs from `A⁻`.
    FewExact,
    /// A maximal complement matching was already large enough.
    MaximalMatching,
    /// Useful pairs at vertices outside `V_bad`.
    BadVertexFiltering,
    /// Maximum matching of the complement of the line graph.
    ExactMatching,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremalOutcome {
    pub coloring: EdgeColoring,
    pub plan: PairingPlan,
    pub step: LadderStep,
    /// Whether every edge has size at least `(1−δ)√n`.
    pub precondition_held: bool,
    /// Counting facts of the ladder, logged rather than asserted.
    pub log: Vec<String>,
}

/// Proposition-style step: maximal complement matching, else `2t` pairwise
/// intersecting useful pairs from the unmatched part of `a`.
fn pairs_from_part(h: &LinearHypergraph, a: &[usize], t: usize) -> Option<PairingPlan> {
    let n_match = maximal_complement_matching(h);
    if n_match.len() >= t {
        return Some(PairingPlan::from_pairs(h.m(), n_match[..t].to_vec()));
    }
    let covered: BTreeSet<usize> = n_match.iter().flat_map(|&(x, y)| [x, y]).collect();
    let pool: Vec<usize> = a.iter().copied().filter(|e| !covered.contains(e)).collect();
    let chain = pair_pool(h, &pool, t)?;
    select_z(h, &chain).ok().map(|c| c.plan)
}

fn try_plan(h: &LinearHypergraph, plan: Option<PairingPlan>) -> Option<(EdgeColoring, PairingPlan)> {
    let plan = plan?;
    let col = pair_color(h, &plan).ok()?;
    verify_coloring(h, &col).ok()?;
    Some((col, plan))
}

/// Runs the case ladder and returns the first plan that works.
pub fn extremal_plan(h: &LinearHypergraph, delta: f64) -> Result<ExtremalOutcome, ExtremalError> {
    let n = h.n();
    let m = h.m();
    let root = (n as f64).sqrt();
    let precondition_held = h.edges().iter().all(|e| e.len() as f64 >= (1.0 - delta) * root - 1e-9);
    let mut log = Vec::new();
    let done = |col, plan, step, log| Ok(ExtremalOutcome { coloring: col, plan, step, precondition_held, log });
    if m <= n {
        let plan = PairingPlan::from_pairs(m, Vec::new());
        let col = pair_color(h, &plan)?;
        return done(col, plan, LadderStep::Trivial, log);
    }
    let t = m - n;
    let k = size_threshold(n);
    let a_minus: Vec<usize> = (0..m).filter(|&e| h.edge(e).len() < k).collect();
    let a_plus: Vec<usize> = (0..m).filter(|&e| h.edge(e).len() == k).collect();
    log.push(format!("k={k}, t={t}, |A-|={}, |A+|={}", a_minus.len(), a_plus.len()));

    if a_minus.len() <= 300 {
        let a: Vec<usize> = a_minus.iter().chain(a_plus.iter()).copied().collect();
        if let Some((col, plan)) = try_plan(h, pairs_from_part(h, &a, t)) {
            return done(col, plan, LadderStep::FewSmall, log);
        }
        log.push("few-small step failed".into());
    } else if (a_plus.len() as f64) <= root * a_minus.len() as f64 / 15.0 {
        if let Some((col, plan)) = try_plan(h, pairs_from_part(h, &a_minus, t)) {
            return done(col, plan, LadderStep::FewExact, log);
        }
        log.push("few-exact step failed".into());
    } else {
        let n_match = maximal_complement_matching(h);
        if n_match.len() >= t {
            let plan = PairingPlan::from_pairs(m, n_match[..t].to_vec());
            if let Some((col, plan)) = try_plan(h, Some(plan)) {
                return done(col, plan, LadderStep::MaximalMatching, log);
            }
        }
        let bad: BTreeSet<usize> = v_bad(h, delta).into_iter().collect();
        let star_thr = (delta * n as f64).sqrt();
        let a_star: BTreeSet<usize> = a_plus
            .iter()
            .copied()
            .filter(|&e| h.edge(e).iter().filter(|v| bad.contains(v)).count() as f64 >= star_thr - 1e-9)
            .collect();
        log.push(format!("|V_bad|={}, |A*|={}, |A+|/20={:.1}", bad.len(), a_star.len(), a_plus.len() as f64 / 20.0));
        let covered: BTreeSet<usize> = n_match.iter().flat_map(|&(x, y)| [x, y]).collect();
        let mut avail: BTreeSet<usize> =
            a_plus.iter().copied().filter(|e| !a_star.contains(e) && !covered.contains(e)).collect();
        let mut chain = Vec::new();
        'outer: while chain.len() < 2 * t {
            for w in (0..n).filter(|w| !bad.contains(w)) {
                let at_w: Vec<usize> = h.incident(w).iter().copied().filter(|e| avail.contains(e)).collect();
                for (i, &a) in at_w.iter().enumerate() {
                    if let Some(&b) = at_w[i + 1..].iter().find(|&&b| useful_pair(h, a, b)) {
                        avail.remove(&a);
                        avail.remove(&b);
                        chain.push(a);
                        chain.push(b);
                        continue 'outer;
                    }
                }
            }
            break;
        }
        if chain.len() == 2 * t {
            if let Some((col, plan)) = try_plan(h, select_z(h, &chain).ok().map(|c| c.plan)) {
                return done(col, plan, LadderStep::BadVertexFiltering, log);
            }
        }
        log.push("bad-vertex step failed".into());
    }

    if m <= EXACT_PAIRING_LIMIT {
        let comp: Vec<Vec<usize>> =
            (0..m).map(|a| (0..m).filter(|&b| b != a && !h.intersects(a, b)).collect()).collect();
        let mate = max_matching_general(m, &comp);
        let pairs: Vec<(usize, usize)> =
            (0..m).filter(|&a| mate[a] != usize::MAX && a < mate[a]).map(|a| (a, mate[a])).take(t).collect();
        if pairs.len() == t {
            if let Some((col, plan)) = try_plan(h, Some(PairingPlan::from_pairs(m, pairs))) {
                return done(col, plan, LadderStep::ExactMatching, log);
            }
        }
    }
    Err(ExtremalError::CaseLadderExhausted)
}

/// Proper coloring with at most `n` colors and at most two edges per color.
pub fn extremal_color(h: &LinearHypergraph, delta: f64) -> Result<EdgeColoring, ExtremalError> {
    extremal_plan(h, delta).map(|o| o.coloring)
}
