//! Instance families: projective planes, degenerate planes, complete graphs,
//! random linear hypergraphs, near-regular uniform hypergraphs, and the
//! uniformizing embedding.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hypercore::LinearHypergraph;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenError {
    #[error("{0} is not prime")]
    NotPrime(usize),
    #[error("infeasible parameters: {0}")]
    InfeasibleParams(String),
    #[error("degree spread unreachable: achieved degrees in [{min}, {max}]")]
    DegreeSpreadUnreachable { min: usize, max: usize },
    #[error("slack {got} below the minimum {min}")]
    SlackTooSmall { got: usize, min: usize },
    #[error("uniform embedding impossible: {0}")]
    UniformityImpossible(String),
}

/// A discrete distribution over edge sizes given as `(size, weight)` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeLaw(pub Vec<(usize, f64)>);

impl SizeLaw {
    pub fn fixed(r: usize) -> Self {
        Self(vec![(r, 1.0)])
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let total: f64 = self.0.iter().map(|p| p.1).sum();
        let mut x = rng.gen::<f64>() * total;
        for &(k, w) in &self.0 {
            if x < w {
                return k;
            }
            x -= w;
        }
        self.0.last().map(|p| p.0).unwrap_or(2)
    }

    /// Parses `2:1,3:0.5` style laws.
    pub fn parse(s: &str) -> Result<Self, String> {
        let mut out = Vec::new();
        for part in s.split(',') {
            let (k, w) = part.split_once(':').unwrap_or((part, "1"));
            let k = k.trim().parse::<usize>().map_err(|e| e.to_string())?;
            let w = w.trim().parse::<f64>().map_err(|e| e.to_string())?;
            if k == 0 || w < 0.0 {
                return Err(format!("bad size law entry `{part}`"));
            }
            out.push((k, w));
        }
        if out.is_empty() || out.iter().all(|p| p.1 == 0.0) {
            return Err("empty size law".into());
        }
        Ok(Self(out))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FamilySpec {
    ProjectivePlane { q: usize },
    Degenerate { n: usize },
    Complete { n: usize },
    RandomLinear { n: usize, sizes: SizeLaw, m: usize, seed: u64 },
    UniformNearRegular { n: usize, r: usize, d: usize, kappa: f64, seed: u64 },
}

pub fn generate(spec: &FamilySpec) -> Result<LinearHypergraph, GenError> {
    match spec {
        FamilySpec::ProjectivePlane { q } => projective_plane(*q),
        FamilySpec::Degenerate { n } => degenerate(*n),
        FamilySpec::Complete { n } => Ok(complete(*n)),
        FamilySpec::RandomLinear { n, sizes, m, seed } => random_linear(*n, sizes, *m, *seed),
        FamilySpec::UniformNearRegular { n, r, d, kappa, seed } => uniform_near_regular(*n, *r, *d, *kappa, *seed),
    }
}

pub fn is_prime(q: usize) -> bool {
    q >= 2 && (2..).take_while(|d| d * d <= q).all(|d| q % d != 0)
}

fn next_prime(mut p: usize) -> usize {
    p = p.max(2);
    while !is_prime(p) {
        p += 1;
    }
    p
}

/// Points of PG(2,q) as normalized vectors over GF(q): the last nonzero
/// coordinate is 1.
fn pg2_points(q: usize) -> Vec<[usize; 3]> {
    let mut pts = Vec::with_capacity(q * q + q + 1);
    for x in 0..q {
        for y in 0..q {
            pts.push([x, y, 1]);
        }
    }
    for x in 0..q {
        pts.push([x, 1, 0]);
    }
    pts.push([1, 0, 0]);
    pts
}

/// The projective plane of prime order `q`: `q²+q+1` points and lines.
pub fn projective_plane(q: usize) -> Result<LinearHypergraph, GenError> {
    if !is_prime(q) {
        return Err(GenError::NotPrime(q));
    }
    let pts = pg2_points(q);
    let lines: Vec<Vec<usize>> = pts
        .iter()
        .map(|l| (0..pts.len()).filter(|&i| (0..3).map(|k| l[k] * pts[i][k]).sum::<usize>() % q == 0).collect())
        .collect();
    Ok(LinearHypergraph::build(pts.len(), lines, false).expect("projective plane is linear"))
}

/// Pairs `{0,v}` for `v = 1..n` followed by the edge `{1,..,n-1}`.
pub fn degenerate(n: usize) -> Result<LinearHypergraph, GenError> {
    if n < 3 {
        return Err(GenError::InfeasibleParams(format!("degenerate plane needs n >= 3, got {n}")));
    }
    let mut edges: Vec<Vec<usize>> = (1..n).map(|v| vec![0, v]).collect();
    edges.push((1..n).collect());
    Ok(LinearHypergraph::build(n, edges, false).expect("degenerate plane is linear"))
}

pub fn complete(n: usize) -> LinearHypergraph {
    let mut edges = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for a in 0..n {
        for b in a + 1..n {
            edges.push(vec![a, b]);
        }
    }
    LinearHypergraph::build(n, edges, false).expect("complete graph is linear")
}

/// Pair-usage table for incremental linearity checks.
struct PairTable {
    n: usize,
    words: usize,
    bits: Vec<u64>,
}

impl PairTable {
    fn new(n: usize) -> Self {
        let words = n.div_ceil(64);
        Self { n, words, bits: vec![0; n * words] }
    }

    fn used(&self, a: usize, b: usize) -> bool {
        self.bits[a * self.words + b / 64] >> (b % 64) & 1 == 1
    }

    fn set(&mut self, a: usize, b: usize) {
        self.bits[a * self.words + b / 64] |= 1 << (b % 64);
        self.bits[b * self.words + a / 64] |= 1 << (a % 64);
    }

    fn compatible(&self, chosen: &[usize], v: usize) -> bool {
        debug_assert!(v < self.n);
        chosen.iter().all(|&c| c != v && !self.used(c, v))
    }

    fn insert(&mut self, e: &[usize]) {
        for i in 0..e.len() {
            for j in i + 1..e.len() {
                self.set(e[i], e[j]);
            }
        }
    }
}

/// Random greedy insertion of `m` edges with sizes drawn from `sizes`;
/// candidates breaking linearity are rejected, at most `50 m` attempts.
pub fn random_linear(n: usize, sizes: &SizeLaw, m: usize, seed: u64) -> Result<LinearHypergraph, GenError> {
    if sizes.0.iter().any(|&(k, w)| w > 0.0 && k > n) {
        return Err(GenError::InfeasibleParams("edge size exceeds n".into()));
    }
    let mut rng = rng::seeded(seed);
    let mut table = PairTable::new(n);
    let mut singles = vec![false; n];
    let mut edges: Vec<Vec<usize>> = Vec::with_capacity(m);
    let verts: Vec<usize> = (0..n).collect();
    let mut attempts = 0;
    while edges.len() < m && attempts < 50 * m.max(1) {
        attempts += 1;
        let k = sizes.sample(&mut rng);
        let mut e: Vec<usize> = verts.choose_multiple(&mut rng, k).copied().collect();
        e.sort_unstable();
        let ok = if k == 1 { !singles[e[0]] } else { (0..k).all(|i| (i + 1..k).all(|j| !table.used(e[i], e[j]))) };
        if ok {
            if k == 1 {
                singles[e[0]] = true;
            }
            table.insert(&e);
            edges.push(e);
        }
    }
    if edges.len() < m {
        return Err(GenError::InfeasibleParams(format!(
            "placed {} of {m} edges within {attempts} attempts",
            edges.len()
        )));
    }
    Ok(LinearHypergraph::build(n, edges, false).expect("insertion keeps linearity"))
}

/// An `r`-uniform linear hypergraph with every degree in `(1 ± kappa) D`.
pub fn uniform_near_regular(n: usize, r: usize, d: usize, kappa: f64, seed: u64) -> Result<LinearHypergraph, GenError> {
    if d == 0 {
        return Ok(LinearHypergraph::empty(n));
    }
    if r < 2 || r > n {
        return Err(GenError::InfeasibleParams(format!("edge size {r} with n = {n}")));
    }
    if ((r - 1) * d) as f64 > (1.0 + kappa) * (n - 1) as f64 {
        return Err(GenError::InfeasibleParams(format!("(r-1)D = {} exceeds (1+kappa)(n-1)", (r - 1) * d)));
    }
    let lo = ((1.0 - kappa) * d as f64).ceil() as usize;
    let hi = ((1.0 + kappa) * d as f64).floor() as usize;
    let mut best = (0, 0);
    for attempt in 0..10u64 {
        let edges = near_regular_attempt(n, r, d, seed.wrapping_add(attempt.wrapping_mul(0x9E37_79B9)));
        let mut deg = vec![0usize; n];
        for e in &edges {
            for &v in e {
                deg[v] += 1;
            }
        }
        let (min, max) = (*deg.iter().min().unwrap(), *deg.iter().max().unwrap());
        if min >= lo && max <= hi {
            return Ok(LinearHypergraph::build(n, edges, false).expect("insertion keeps linearity"));
        }
        if attempt == 0 || min > best.0 {
            best = (min, max);
        }
    }
    Err(GenError::DegreeSpreadUnreachable { min: best.0, max: best.1 })
}

fn near_regular_attempt(n: usize, r: usize, d: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = rng::seeded(seed);
    let mut table = PairTable::new(n);
    let mut deg = vec![0usize; n];
    let mut edges = Vec::new();
    // Passes over a shuffled list of deficient vertices, grouping compatible ones.
    for _ in 0..d + 2 {
        let mut pool: Vec<usize> = (0..n).filter(|&v| deg[v] < d).collect();
        if pool.len() < r {
            break;
        }
        pool.shuffle(&mut rng);
        let mut taken = vec![false; pool.len()];
        let mut added = 0;
        for i in 0..pool.len() {
            if taken[i] {
                continue;
            }
            let mut chosen = vec![pool[i]];
            let mut idx = vec![i];
            for j in i + 1..pool.len() {
                if chosen.len() == r {
                    break;
                }
                if !taken[j] && table.compatible(&chosen, pool[j]) {
                    chosen.push(pool[j]);
                    idx.push(j);
                }
            }
            if chosen.len() == r {
                for &j in &idx {
                    taken[j] = true;
                }
                chosen.sort_unstable();
                table.insert(&chosen);
                for &v in &chosen {
                    deg[v] += 1;
                }
                edges.push(chosen);
                added += 1;
            }
        }
        if added == 0 {
            break;
        }
    }
    // Cleanup: complete deficient vertices against any deficient partners.
    let mut progress = true;
    while progress {
        progress = false;
        let mut order: Vec<usize> = (0..n).filter(|&v| deg[v] < d).collect();
        order.sort_by_key(|&v| (deg[v], v));
        for &v in &order {
            if deg[v] >= d {
                continue;
            }
            let mut chosen = vec![v];
            let mut cands: Vec<usize> = (0..n).filter(|&w| w != v && deg[w] < d).collect();
            cands.sort_by_key(|&w| (deg[w], w));
            for w in cands {
                if chosen.len() == r {
                    break;
                }
                if table.compatible(&chosen, w) {
                    chosen.push(w);
                }
            }
            if chosen.len() == r {
                chosen.sort_unstable();
                table.insert(&chosen);
                for &x in &chosen {
                    deg[x] += 1;
                }
                edges.push(chosen);
                progress = true;
            }
        }
    }
    edges
}

/// Result of [`embed_uniform`].
#[derive(Debug, Clone)]
pub struct Embedding {
    pub h_unif: LinearHypergraph,
    /// Vertex `v` of the input is vertex `injection[v]` of `h_unif`.
    pub injection: Vec<usize>,
    /// Edge `e` of the input is the restriction of edge `edge_map[e]`.
    pub edge_map: Vec<usize>,
    pub min_degree: usize,
    pub max_degree: usize,
}

pub fn min_embedding_slack(r: usize) -> usize {
    r * r + r
}

/// Embeds `h` into an `r`-uniform linear hypergraph whose degrees lie in
/// `[D - C, D]`, keeping the degree of every vertex with `d(v) >= D - C`.
///
/// Edges are first padded to size `r` with fresh vertices. The padded
/// hypergraph is copied `T = r p` times (`p` the least prime `>= max(D, r)`),
/// the first copy being the original, and the `T` clones of every vertex of
/// low degree receive a `(D - d)`-regular grid design: clone `(i, y)` for
/// `i < r`, `y < p` lies on the lines `{(i, a + b i mod p)}` with slopes
/// `b < D - d`.
pub fn embed_uniform(h: &LinearHypergraph, r: usize, d: usize, c: usize) -> Result<Embedding, GenError> {
    let min = min_embedding_slack(r);
    if c < min {
        return Err(GenError::SlackTooSmall { got: c, min });
    }
    if r < 2 {
        return Err(GenError::UniformityImpossible("r must be at least 2".into()));
    }
    if let Some(e) = h.edges().iter().find(|e| e.len() > r) {
        return Err(GenError::UniformityImpossible(format!("edge of size {} > r", e.len())));
    }
    if h.max_degree() > d {
        return Err(GenError::UniformityImpossible(format!("max degree {} > D", h.max_degree())));
    }
    let n = h.n();
    let mut padded: Vec<Vec<usize>> = Vec::with_capacity(h.m());
    let mut n_star = n;
    for e in h.edges() {
        let mut e2 = e.clone();
        for _ in e.len()..r {
            e2.push(n_star);
            n_star += 1;
        }
        padded.push(e2);
    }
    let mut deg_star = vec![0usize; n_star];
    for e in &padded {
        for &v in e {
            deg_star[v] += 1;
        }
    }
    let p = next_prime(d.max(r));
    let t = r * p;
    let total = t * n_star;
    let bound = r as u128 * ((r - 1) * (r - 1)) as u128 * (d as u128).pow(3) * n as u128;
    if total as u128 > bound {
        return Err(GenError::UniformityImpossible(format!("{total} vertices would exceed r(r-1)^2 D^3 N = {bound}")));
    }
    let id = |copy: usize, x: usize| copy * n_star + x;
    let mut edges = Vec::with_capacity(t * padded.len());
    for copy in 0..t {
        for e in &padded {
            edges.push(e.iter().map(|&x| id(copy, x)).collect::<Vec<_>>());
        }
    }
    for x in 0..n_star {
        if deg_star[x] + c >= d {
            continue;
        }
        let extra = d - deg_star[x];
        for b in 0..extra {
            for a in 0..p {
                let line: Vec<usize> = (0..r).map(|i| id(i * p + (a + b * i) % p, x)).collect();
                edges.push(line);
            }
        }
    }
    let h_unif =
        LinearHypergraph::build(total, edges, false).map_err(|e| GenError::UniformityImpossible(e.to_string()))?;
    let degrees: Vec<usize> = (0..total).map(|v| h_unif.degree(v)).collect();
    Ok(Embedding {
        injection: (0..n).collect(),
        edge_map: (0..h.m()).collect(),
        min_degree: *degrees.iter().min().unwrap_or(&0),
        max_degree: *degrees.iter().max().unwrap_or(&0),
        h_unif,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypercore::volume;

    #[test]
    fn fano_from_q2() {
        let h = projective_plane(2).unwrap();
        assert_eq!((h.n(), h.m()), (7, 7));
        assert!(h.edges().iter().all(|e| e.len() == 3));
        assert!((volume(&h, &(0..7).collect::<Vec<_>>()) - 1.0).abs() < 1e-12);
        assert!(matches!(projective_plane(4), Err(GenError::NotPrime(4))));
    }

    #[test]
    fn planes_cover_pairs_once() {
        for q in [2, 3, 5, 7] {
            let h = projective_plane(q).unwrap();
            let n = q * q + q + 1;
            let mut seen = vec![0u8; n * n];
            for e in h.edges() {
                for &a in e {
                    for &b in e {
                        if a < b {
                            seen[a * n + b] += 1;
                        }
                    }
                }
            }
            for a in 0..n {
                assert_eq!(h.degree(a), q + 1);
                for b in a + 1..n {
                    assert_eq!(seen[a * n + b], 1);
                }
            }
        }
    }

    #[test]
    fn degenerate_shape() {
        let h = degenerate(6).unwrap();
        assert_eq!(h.m(), 6);
        assert_eq!(h.degree(0), 5);
        assert_eq!(h.edge(5).len(), 5);
    }

    #[test]
    fn complete_counts() {
        assert_eq!(complete(5).m(), 10);
    }

    #[test]
    fn random_linear_is_seeded() {
        let law = SizeLaw(vec![(2, 1.0), (3, 1.0)]);
        let a = random_linear(20, &law, 25, 7).unwrap();
        let b = random_linear(20, &law, 25, 7).unwrap();
        assert_eq!(a.to_lhg(), b.to_lhg());
        assert!(random_linear(4, &SizeLaw::fixed(3), 10, 1).is_err());
    }

    #[test]
    fn near_regular_window() {
        let h = uniform_near_regular(300, 3, 20, 0.05, 3).unwrap();
        for v in 0..300 {
            assert!((19..=21).contains(&h.degree(v)));
        }
        assert_eq!(uniform_near_regular(10, 3, 0, 0.1, 1).unwrap().m(), 0);
        let k = uniform_near_regular(9, 2, 8, 0.0, 1).unwrap();
        assert_eq!(k.m(), 36);
    }

    #[test]
    fn embedding_single_edge() {
        let h = LinearHypergraph::build(3, vec![vec![0, 1, 2]], false).unwrap();
        let emb = embed_uniform(&h, 3, 4, 12).unwrap();
        assert!(emb.h_unif.edges().iter().all(|e| e.len() == 3));
        assert!(emb.max_degree <= 4);
        assert!(matches!(embed_uniform(&h, 3, 4, 4), Err(GenError::SlackTooSmall { .. })));
    }
}
