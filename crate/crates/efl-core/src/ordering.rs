//! Edge orderings, forward degrees, the neighbourhood-size audit and the
//! reordering search.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hypercore::{volume, LinearHypergraph};

/// A permutation of edge indices: `perm[i]` is the `i`-th edge.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeOrdering {
    perm: Vec<usize>,
    pos: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OrderingError {
    #[error("not a permutation of 0..{0}")]
    NotAPermutation(usize),
}

impl EdgeOrdering {
    pub fn from_perm(perm: Vec<usize>) -> Result<Self, OrderingError> {
        let m = perm.len();
        let mut pos = vec![usize::MAX; m];
        for (i, &e) in perm.iter().enumerate() {
            if e >= m || pos[e] != usize::MAX {
                return Err(OrderingError::NotAPermutation(m));
            }
            pos[e] = i;
        }
        Ok(Self { perm, pos })
    }

    pub fn identity(m: usize) -> Self {
        Self { perm: (0..m).collect(), pos: (0..m).collect() }
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn position(&self, e: usize) -> usize {
        self.pos[e]
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    pub fn precedes(&self, f: usize, e: usize) -> bool {
        self.pos[f] < self.pos[e]
    }

    /// Moves the edge at position `from` to position `to` (shifting others).
    fn move_to(&mut self, from: usize, to: usize) {
        let e = self.perm.remove(from);
        self.perm.insert(to, e);
        let (lo, hi) = (from.min(to), from.max(to));
        for i in lo..=hi {
            self.pos[self.perm[i]] = i;
        }
    }
}

/// Non-increasing sizes, ties by edge index.
pub fn size_order(h: &LinearHypergraph) -> EdgeOrdering {
    let mut perm: Vec<usize> = (0..h.m()).collect();
    perm.sort_by_key(|&e| (std::cmp::Reverse(h.edge(e).len()), e));
    EdgeOrdering::from_perm(perm).expect("sorted indices form a permutation")
}

/// Number of earlier edges meeting `e`.
pub fn fwddeg(h: &LinearHypergraph, ord: &EdgeOrdering, e: usize) -> usize {
    h.neighbors(e).into_iter().filter(|&f| ord.precedes(f, e)).count()
}

/// Forward degree of every edge, indexed by edge.
pub fn fwddeg_all(h: &LinearHypergraph, ord: &EdgeOrdering) -> Vec<usize> {
    (0..h.m()).map(|e| fwddeg(h, ord, e)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRow {
    pub edge: usize,
    pub m1: usize,
    pub m2: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    /// Whether the far-neighbour bound applied (`m1 + m2 ≥ (1−τ)n`, `α1 > 0`).
    pub far_checked: bool,
    pub far_holds: bool,
}

/// For each edge `e` of size `r > 1 + α2`: with `m1` neighbours of size at
/// least `(1+α1)r` and `m2` of size in `[r/(1+α2), (1+α1)r)`, checks
/// `(1+α1)m1 + m2/(1+α2) ≤ n + (1+α2)n/(r−1−α2)`, and when
/// `m1 + m2 ≥ (1−τ)n` with `α1 > 0`, checks
/// `m1 ≤ (τ + (1+α2)(1+α2 r)/(r−1−α2)) n/α1`.
pub fn audit_fwd_inequalities(h: &LinearHypergraph, alpha1: f64, alpha2: f64, tau: f64) -> Vec<AuditRow> {
    let n = h.n() as f64;
    let mut rows = Vec::new();
    for e in 0..h.m() {
        let r = h.edge(e).len() as f64;
        if r <= 1.0 + alpha2 {
            continue;
        }
        let (mut m1, mut m2) = (0usize, 0usize);
        for f in h.neighbors(e) {
            let s = h.edge(f).len() as f64;
            if s >= (1.0 + alpha1) * r - 1e-12 {
                m1 += 1;
            } else if s >= r / (1.0 + alpha2) - 1e-12 {
                m2 += 1;
            }
        }
        let lhs = (1.0 + alpha1) * m1 as f64 + m2 as f64 / (1.0 + alpha2);
        let rhs = n + (1.0 + alpha2) * n / (r - 1.0 - alpha2);
        let far_checked = alpha1 > 0.0 && (m1 + m2) as f64 >= (1.0 - tau) * n;
        let far_holds = !far_checked
            || m1 as f64 <= (tau + (1.0 + alpha2) * (1.0 + alpha2 * r) / (r - 1.0 - alpha2)) * n / alpha1 + 1e-9;
        rows.push(AuditRow { edge: e, m1, m2, lhs, rhs, holds: lhs <= rhs + 1e-9, far_checked, far_holds });
    }
    rows
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowStats {
    pub max_size: usize,
    pub min_size: usize,
    pub volume: f64,
    /// Volume target `(1−τ−7τ^{1/4}/K)² / (1+3τ^{1/4}K⁴)`; reported only.
    pub volume_target: f64,
    pub max_fwddeg_after: usize,
    pub fwddeg_e_star: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ReorderOutcome {
    /// Every edge has forward degree at most `(1−τ)n`.
    Good(EdgeOrdering),
    /// `e_star` closes the size-monotone prefix; `w` holds the prefix edges
    /// of size at most `(1+3τ^{1/4}K⁴)|e_star|`.
    Window { ordering: EdgeOrdering, w: Vec<usize>, e_star: usize, stats: WindowStats },
}

impl ReorderOutcome {
    pub fn ordering(&self) -> &EdgeOrdering {
        match self {
            Self::Good(o) => o,
            Self::Window { ordering, .. } => ordering,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReorderError {
    #[error("invalid parameters: {0}")]
    BadParameters(String),
    #[error("edge {0} has fewer than two vertices")]
    SmallEdge(usize),
    #[error("iteration cap exceeded; best ordering is not certified")]
    IterCapExceeded(EdgeOrdering),
}

/// Default iteration cap `20·e(H)²`.
pub fn default_iter_cap(h: &LinearHypergraph) -> usize {
    20 * h.m() * h.m() + 1
}

/// Search from the back: start from the size order with `e*` the last edge.
/// While `e*` has forward degree above `(1−τ)n`, move an earlier neighbour
/// `e` of `e*` with at most `(1−τ)n` neighbours up to `e*` to just after `e*`
/// (smallest forward degree first, then lowest index); if `e*`'s forward
/// degree is small, step `e*` back one place. Every step shortens the prefix.
pub fn reorder(h: &LinearHypergraph, tau: f64, k: f64, iter_cap: usize) -> Result<ReorderOutcome, ReorderError> {
    if !(tau > 0.0 && tau < 1.0) || k < 1.0 {
        return Err(ReorderError::BadParameters(format!("tau={tau}, K={k}")));
    }
    if let Some(e) = (0..h.m()).find(|&e| h.edge(e).len() < 2) {
        return Err(ReorderError::SmallEdge(e));
    }
    let limit = (1.0 - tau) * h.n() as f64 + 1e-9;
    let mut ord = size_order(h);
    if h.m() == 0 {
        return Ok(ReorderOutcome::Good(ord));
    }
    let mut nbr_cache: Vec<Option<Vec<usize>>> = vec![None; h.m()];
    let mut nbrs = |e: usize| -> Vec<usize> { nbr_cache[e].get_or_insert_with(|| h.neighbors(e)).clone() };
    let mut p = h.m() - 1;
    let mut iters = 0usize;
    loop {
        iters += 1;
        if iters > iter_cap {
            return Err(ReorderError::IterCapExceeded(ord));
        }
        if p == 0 {
            break;
        }
        let e_star = ord.perm[p];
        let star_nbrs = nbrs(e_star);
        let fd = star_nbrs.iter().filter(|&&f| ord.pos[f] < p).count();
        if fd as f64 <= limit {
            p -= 1;
            continue;
        }
        let mut best: Option<(usize, usize)> = None;
        for &e in &star_nbrs {
            if ord.pos[e] >= p {
                continue;
            }
            let ne = nbrs(e);
            let ahead = ne.iter().filter(|&&f| ord.pos[f] <= p).count();
            if ahead as f64 <= limit {
                let fde = ne.iter().filter(|&&f| ord.pos[f] < ord.pos[e]).count();
                if best.is_none_or(|b| (fde, e) < b) {
                    best = Some((fde, e));
                }
            }
        }
        match best {
            Some((_, e)) => {
                ord.move_to(ord.pos[e], p);
                p -= 1;
            }
            None => {
                let r = h.edge(e_star).len() as f64;
                let cap = (1.0 + 3.0 * tau.powf(0.25) * k.powi(4)) * r;
                let w: Vec<usize> =
                    ord.perm[..=p].iter().copied().filter(|&f| h.edge(f).len() as f64 <= cap + 1e-9).collect();
                let sizes = w.iter().map(|&f| h.edge(f).len());
                let fwd = fwddeg_all(h, &ord);
                let stats = WindowStats {
                    max_size: sizes.clone().max().unwrap_or(0),
                    min_size: sizes.min().unwrap_or(0),
                    volume: volume(h, &w),
                    volume_target: (1.0 - tau - 7.0 * tau.powf(0.25) / k).powi(2)
                        / (1.0 + 3.0 * tau.powf(0.25) * k.powi(4)),
                    max_fwddeg_after: ord.perm[p + 1..].iter().map(|&f| fwd[f]).max().unwrap_or(0),
                    fwddeg_e_star: fwd[e_star],
                };
                let out = ReorderOutcome::Window { ordering: ord, w, e_star, stats };
                check_outcome(h, &out, tau, k).expect("window postconditions");
                return Ok(out);
            }
        }
    }
    let out = ReorderOutcome::Good(ord);
    check_outcome(h, &out, tau, k).expect("good postcondition");
    Ok(out)
}

/// Verifies the exact postconditions of a reorder outcome.
pub fn check_outcome(h: &LinearHypergraph, out: &ReorderOutcome, tau: f64, k: f64) -> Result<(), String> {
    let limit = ((1.0 - tau) * h.n() as f64 + 1e-9).floor() as usize;
    let ord = out.ordering();
    if ord.len() != h.m() || EdgeOrdering::from_perm(ord.perm.clone()).is_err() {
        return Err("ordering is not a permutation of the edges".into());
    }
    let fwd = fwddeg_all(h, ord);
    match out {
        ReorderOutcome::Good(_) => match (0..h.m()).find(|&e| fwd[e] > limit) {
            Some(e) => Err(format!("edge {e} has forward degree {} > {limit}", fwd[e])),
            None => Ok(()),
        },
        ReorderOutcome::Window { w, e_star, .. } => {
            let p = ord.position(*e_star);
            if let Some(&f) = ord.perm[p + 1..].iter().find(|&&f| fwd[f] > limit) {
                return Err(format!("edge {f} after e* has forward degree {} > {limit}", fwd[f]));
            }
            for i in 1..=p {
                if h.edge(ord.perm[i]).len() > h.edge(ord.perm[i - 1]).len() {
                    return Err(format!("sizes increase at position {i} before e*"));
                }
            }
            let cap = (1.0 + 3.0 * tau.powf(0.25) * k.powi(4)) * h.edge(*e_star).len() as f64 + 1e-9;
            let expected: Vec<usize> =
                ord.perm[..=p].iter().copied().filter(|&f| h.edge(f).len() as f64 <= cap).collect();
            if &expected != w {
                return Err("window membership differs from the size rule".into());
            }
            if w.last() != Some(e_star) {
                return Err("e* is not the last edge of the window".into());
            }
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{degenerate, projective_plane};

    #[test]
    fn size_order_examples() {
        let h = LinearHypergraph::build(8, vec![vec![0, 1], vec![2, 3, 4, 5, 6], vec![0, 2, 7]], false).unwrap();
        let o = size_order(&h);
        let sizes: Vec<usize> = o.perm().iter().map(|&e| h.edge(e).len()).collect();
        assert_eq!(sizes, vec![5, 3, 2]);
        let d = degenerate(6).unwrap();
        assert_eq!(d.edge(size_order(&d).perm()[0]).len(), 5);
    }

    #[test]
    fn fano_forward_degrees() {
        let h = projective_plane(2).unwrap();
        let o = size_order(&h);
        assert_eq!(fwddeg(&h, &o, o.perm()[0]), 0);
        assert_eq!(fwddeg(&h, &o, o.perm()[6]), 6);
        for row in audit_fwd_inequalities(&h, 0.0, 0.0, 0.0) {
            assert_eq!(row.m1, 6);
            assert!((row.rhs - 10.5).abs() < 1e-9 && row.holds);
        }
    }

    #[test]
    fn reorder_disjoint_is_good() {
        let h = LinearHypergraph::build(20, (0..10).map(|i| vec![2 * i, 2 * i + 1]).collect(), false).unwrap();
        assert!(matches!(reorder(&h, 0.5, 1.0, 1000).unwrap(), ReorderOutcome::Good(_)));
    }

    #[test]
    fn reorder_fano_window() {
        let h = projective_plane(2).unwrap();
        let out = reorder(&h, 0.9, 1.0, default_iter_cap(&h)).unwrap();
        match &out {
            ReorderOutcome::Window { w, e_star, .. } => {
                assert_eq!(w.last(), Some(e_star));
            }
            other => panic!("{other:?}"),
        }
        check_outcome(&h, &out, 0.9, 1.0).unwrap();
    }
}
