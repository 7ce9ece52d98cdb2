//! Acceptance suite: one line per criterion, nonzero exit on any failure.
//!
//! Run with `cargo test -p efl-cli --test acceptance` (release mode is much
//! faster: add `--release`).

use std::collections::HashSet;
use std::path::Path;
use std::time::{Duration, Instant};

use efl_core::absorb::{absorb_batch, synthetic_batch, synthetic_host, AbsorbBranch, AbsorbParams};
use efl_core::extremal::{maximal_complement_matching, pair_color, PairingPlan};
use efl_core::finish::{
    exact_chromatic_index, hall_finish, hall_finish_preconditions, vizing, ExactConfig, ExactError,
};
use efl_core::generators::{complete, degenerate, generate, projective_plane, random_linear, FamilySpec, SizeLaw};
use efl_core::hypercore::{verify_coloring, CoverageStatus, EdgeColoring, Hierarchy, LinearHypergraph, SimpleGraph};
use efl_core::matching::{gf_factor, GfError};
use efl_core::nibble::{pseudorandom_matching, NibbleError, PrConfig};
use efl_core::ordering::{audit_fwd_inequalities, check_outcome, default_iter_cap, reorder};
use efl_core::pipeline::efl_color;
use efl_core::rng;
use rand::seq::SliceRandom;
use rand::Rng;

type Verdict = Result<String, String>;

fn main() {
    let criteria: Vec<(usize, fn() -> Verdict)> = vec![
        (1, tight_families),
        (2, tiny_random),
        (3, pipeline_totality),
        (4, pairing_property),
        (5, reordering),
        (6, nibble_statistics),
        (7, absorption),
        (8, vizing_bounds),
        (9, hall_finish_corpus),
        (10, gf_agreement),
        (11, determinism),
    ];
    let only: Option<Vec<usize>> =
        std::env::var("EFL_CRITERIA").ok().map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut failed = 0;
    for (i, f) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&i)) {
            continue;
        }
        let t = Instant::now();
        let v = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t.elapsed().as_secs_f64();
        match v {
            Ok(d) => println!("criterion {i}: PASS ({secs:.1}s) {d}"),
            Err(d) => {
                failed += 1;
                println!("criterion {i}: FAIL ({secs:.1}s) {d}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

fn within(t: Instant, limit: Duration, what: &str) -> Result<(), String> {
    if t.elapsed() > limit {
        Err(format!("{what} took {:.1}s, limit {}s", t.elapsed().as_secs_f64(), limit.as_secs()))
    } else {
        Ok(())
    }
}

fn proper(h: &LinearHypergraph, col: &EdgeColoring) -> bool {
    col.is_complete() && verify_coloring(h, col).is_ok()
}

fn tight_families() -> Verdict {
    let t = Instant::now();
    let mut cases = vec![
        ("projective-plane(2)", projective_plane(2).unwrap()),
        ("projective-plane(3)", projective_plane(3).unwrap()),
        ("complete(5)", complete(5)),
        ("complete(7)", complete(7)),
    ];
    for n in 6..=9 {
        cases.push(("degenerate", degenerate(n).unwrap()));
    }
    let hier = Hierarchy::default();
    for (name, h) in &cases {
        let n = h.n();
        let ex = exact_chromatic_index(h, &ExactConfig { limit: 64, ..Default::default() })
            .map_err(|e| format!("{name} n={n}: exact failed: {e}"))?;
        if ex.chromatic_index != n || !proper(h, &ex.coloring) {
            return Err(format!("{name} n={n}: exact gives {}", ex.chromatic_index));
        }
        let (col, _) = efl_color(h, &hier, 1);
        if !proper(h, &col) || col.num_colors_used() != n {
            return Err(format!("{name} n={n}: pipeline uses {} colors", col.num_colors_used()));
        }
    }
    within(t, Duration::from_secs(60), "tight families")?;
    Ok(format!("{} instances, exact and pipeline both give n", cases.len()))
}

/// A random linear hypergraph on `n` vertices from random candidate edges.
fn random_small(rng: &mut rng::Rng, n: usize) -> LinearHypergraph {
    let tries = rng.gen_range(n..=n * n);
    let max_size = rng.gen_range(2..=n.min(5));
    let verts: Vec<usize> = (0..n).collect();
    let mut edges: Vec<Vec<usize>> = Vec::new();
    // Sometimes seed with one big edge, the shape of the tight families.
    if n > 3 && rng.gen_bool(0.2) {
        let k = rng.gen_range(3..n);
        let mut e: Vec<usize> = verts.choose_multiple(rng, k).copied().collect();
        e.sort_unstable();
        edges.push(e);
    }
    for _ in 0..tries {
        let k = if rng.gen_bool(0.5) { 2 } else { rng.gen_range(2..=max_size) };
        let mut e: Vec<usize> = verts.choose_multiple(rng, k).copied().collect();
        e.sort_unstable();
        if edges.iter().all(|f| f.iter().filter(|x| e.contains(x)).count() <= 1) {
            edges.push(e);
        }
    }
    LinearHypergraph::build(n, edges, false).unwrap()
}

fn tiny_random() -> Verdict {
    let t = Instant::now();
    let mut rng = rng::seeded(2);
    let cfg = ExactConfig { limit: 64, node_budget: 2_000_000 };
    let (mut exact, mut bounded, mut tight, mut edges) = (0, 0, 0, 0);
    for i in 0..5000 {
        let n = rng.gen_range(2..=9);
        let h = random_small(&mut rng, n);
        edges += h.m();
        match exact_chromatic_index(&h, &cfg) {
            Ok(r) => {
                if !proper(&h, &r.coloring) || r.chromatic_index > n {
                    return Err(format!("potential counterexample at instance {i}: {}", h.to_lhg()));
                }
                exact += 1;
                tight += usize::from(r.chromatic_index == n);
            }
            Err(ExactError::BudgetExceeded { upper, best, .. }) => {
                // The verified upper bound alone already settles χ' <= n.
                if upper > n || !proper(&h, &best) || best.num_colors_used() > n {
                    return Err(format!("undecided instance {i} with upper bound {upper}: {}", h.to_lhg()));
                }
                bounded += 1;
            }
            Err(e) => return Err(format!("instance {i}: {e}")),
        }
    }
    within(t, Duration::from_secs(600), "tiny corpus")?;
    Ok(format!(
        "5000 instances ({:.1} edges on average), {exact} solved exactly ({tight} with χ' = n), {bounded} settled by a verified coloring",
        edges as f64 / 5000.0
    ))
}

fn random_graph(rng: &mut rng::Rng, n: usize, p: f64) -> SimpleGraph {
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.gen_bool(p) {
                edges.push((a, b));
            }
        }
    }
    SimpleGraph::new(n, edges)
}

fn mixed_corpus() -> Vec<(String, LinearHypergraph, bool)> {
    let mut rng = rng::seeded(3);
    let mut out = Vec::new();
    let law = SizeLaw::parse("2:4,3:3,4:1,8:0.2,20:0.02").unwrap();
    let mut s = 0u64;
    while out.len() < 60 {
        s += 1;
        let n = rng.gen_range(100..=2000);
        let m = rng.gen_range(n / 2..=2 * n);
        if let Ok(h) = random_linear(n, &law, m, s) {
            out.push((format!("random-linear n={n} m={m} seed={s}"), h, false));
        }
    }
    while out.len() < 90 {
        s += 1;
        let n = 3 * rng.gen_range(40..=300);
        let d = rng.gen_range(5..=20);
        if let Ok(h) = generate(&FamilySpec::UniformNearRegular { n, r: 3, d, kappa: 0.1, seed: s }) {
            out.push((format!("uniform-near-regular n={n} d={d} seed={s}"), h, false));
        }
    }
    for _ in 0..40 {
        let n = rng.gen_range(100..=400);
        let p = rng.gen_range(0.01..0.3);
        out.push((format!("graph n={n} p={p:.3}"), random_graph(&mut rng, n, p).as_hypergraph(), true));
    }
    for n in (100..=150).step_by(6) {
        out.push((format!("complete({n})"), complete(n), true));
    }
    for q in [11, 13, 17, 19, 23, 29, 31, 37, 41, 43] {
        out.push((format!("projective-plane({q})"), projective_plane(q).unwrap(), true));
    }
    while out.len() < 200 {
        let n = rng.gen_range(100..=2000);
        out.push((format!("degenerate({n})"), degenerate(n).unwrap(), true));
    }
    out
}

fn pipeline_totality() -> Verdict {
    let hier = Hierarchy::default();
    let corpus = mixed_corpus();
    let mut tight = 0;
    for (i, (name, h, bounded)) in corpus.iter().enumerate() {
        let (col, _) = efl_color(h, &hier, i as u64);
        if !proper(h, &col) {
            return Err(format!("{name}: coloring not proper"));
        }
        if *bounded {
            tight += 1;
            if col.num_colors_used() > h.n() {
                return Err(format!("{name}: {} colors for n={}", col.num_colors_used(), h.n()));
            }
        }
    }
    Ok(format!("{} instances proper, {tight} graph/plane instances within n", corpus.len()))
}

fn pairing_property() -> Verdict {
    let mut rng = rng::seeded(4);
    let (mut found, mut total, mut beyond_n) = (0, 0, 0);
    while total < 2000 {
        let n = rng.gen_range(5..=30);
        let h = if rng.gen_bool(0.3) {
            {
                let p = rng.gen_range(0.2..0.9);
                random_graph(&mut rng, n, p)
            }
            .as_hypergraph()
        } else {
            random_small(&mut rng, n)
        };
        total += 1;
        let pairs = maximal_complement_matching(&h);
        if pairs.len() < h.m().saturating_sub(h.n()) {
            continue;
        }
        found += 1;
        beyond_n += usize::from(h.m() > h.n());
        let col = pair_color(&h, &PairingPlan::from_pairs(h.m(), pairs)).map_err(|e| format!("{}: {e}", h.to_lhg()))?;
        let biggest = col.classes().values().map(Vec::len).max().unwrap_or(0);
        if !proper(&h, &col) || col.num_colors_used() > h.n() || biggest > 2 {
            return Err(format!("bad pair coloring on {}", h.to_lhg()));
        }
    }
    Ok(format!(
        "{found} of {total} fuzz instances had a large enough pairing ({beyond_n} with e(H) > n), all proper within n"
    ))
}

fn reordering() -> Verdict {
    let mut rng = rng::seeded(5);
    let (mut windows, mut rows) = (0, 0);
    for i in 0..1000 {
        let n = rng.gen_range(6..=80);
        let big = (n / 3).max(3);
        let law = SizeLaw::parse(&format!("2:4,3:3,4:1,{big}:0.05")).unwrap();
        let mut m = rng.gen_range(1..=3) * n;
        let h = loop {
            if let Ok(h) = random_linear(n, &law, m, i) {
                break h;
            }
            m = m * 2 / 3;
        };
        let tau = rng.gen_range(0.05..0.95);
        let k = rng.gen_range(1.0..3.0);
        let out = reorder(&h, tau, k, default_iter_cap(&h)).map_err(|e| format!("instance {i}: {e}"))?;
        check_outcome(&h, &out, tau, k).map_err(|e| format!("instance {i}: {e}"))?;
        if matches!(out, efl_core::ordering::ReorderOutcome::Window { .. }) {
            windows += 1;
        }
        let (a1, a2) = (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
        for row in audit_fwd_inequalities(&h, a1, a2, tau) {
            rows += 1;
            if !row.holds {
                return Err(format!("instance {i}: audit fails at edge {}", row.edge));
            }
        }
    }
    Ok(format!("1000 instances ({windows} windows), {rows} audit rows hold"))
}

fn nibble_statistics() -> Verdict {
    let t = Instant::now();
    let (gamma, kappa) = (0.2, 0.05);
    let h = generate(&FamilySpec::UniformNearRegular { n: 2000, r: 3, d: 60, kappa, seed: 6 })
        .map_err(|e| e.to_string())?;
    let all: Vec<usize> = (0..h.n()).collect();
    let cfg = PrConfig { retries: 1, ..PrConfig::new(gamma, kappa) };
    let (lo, hi) = (gamma - 4.0 * kappa, gamma + 4.0 * kappa);
    let mut hits = 0;
    for seed in 0..50 {
        let frac = match pseudorandom_matching(&h, &cfg, std::slice::from_ref(&all), seed) {
            Ok(pm) => {
                let covered: HashSet<usize> = pm.matching.iter().flat_map(|&e| h.edge(e).iter().copied()).collect();
                1.0 - covered.len() as f64 / h.n() as f64
            }
            Err(NibbleError::StatMiss(s)) => s[0].value / s[0].size as f64,
            Err(e) => return Err(e.to_string()),
        };
        if frac >= lo - 1e-12 && frac <= hi + 1e-12 {
            hits += 1;
        }
    }
    within(t, Duration::from_secs(300), "nibble statistics")?;
    if hits * 10 >= 50 * 9 {
        Ok(format!("{hits}/50 seeds in [{lo:.2}, {hi:.2}]"))
    } else {
        Err(format!("only {hits}/50 seeds in [{lo:.2}, {hi:.2}]"))
    }
}

fn absorption() -> Verdict {
    let params = AbsorbParams::default();
    let internal_host = synthetic_host(1000, 1000, 0.0, 1);
    let mut ok = 0;
    let mut notes = Vec::new();
    for seed in 0..100u64 {
        let crossing_host;
        let h = if seed % 2 == 0 {
            crossing_host = synthetic_host(1000, 10, params.rho, seed);
            &crossing_host
        } else {
            &internal_host
        };
        let batch = synthetic_batch(h, &params, 5, seed);
        let res = match absorb_batch(h, &batch.matchings, &batch.reservoir, &batch.defects, &params, seed) {
            Ok(r) => r,
            Err(e) => {
                notes.push(format!("seed {seed}: {e}"));
                continue;
            }
        };
        let expected = match res.branch {
            AbsorbBranch::Internal if !res.perfect_required => {
                matches!(res.coverage.status, CoverageStatus::Perfect | CoverageStatus::NearlyPerfect)
            }
            _ => res.coverage.status == CoverageStatus::Perfect,
        };
        if !expected {
            notes.push(format!("seed {seed}: {:?} under {:?}", res.coverage.status, res.branch));
            continue;
        }
        // Every success must extend its input by reservoir edges only, and
        // stay a family of edge-disjoint matchings.
        let reservoir: HashSet<usize> = batch.reservoir.iter().copied().collect();
        let mut used = HashSet::new();
        for (old, new) in batch.matchings.iter().zip(&res.matchings) {
            let new_set: HashSet<usize> = new.iter().copied().collect();
            if !old.iter().all(|e| new_set.contains(e)) {
                return Err(format!("seed {seed}: an input edge was dropped"));
            }
            let old_set: HashSet<usize> = old.iter().copied().collect();
            if new.iter().any(|e| !old_set.contains(e) && !reservoir.contains(e)) {
                return Err(format!("seed {seed}: added edge outside R"));
            }
            let mut seen = HashSet::new();
            if !new.iter().flat_map(|&e| h.edge(e).iter()).all(|&v| seen.insert(v)) {
                return Err(format!("seed {seed}: extension is not a matching"));
            }
            if !new.iter().all(|&e| used.insert(e)) {
                return Err(format!("seed {seed}: matchings share an edge"));
            }
        }
        ok += 1;
    }
    if ok >= 95 {
        Ok(format!("{ok}/100 seeds reach the expected status"))
    } else {
        Err(format!("{ok}/100 seeds; first misses: {:?}", &notes[..notes.len().min(3)]))
    }
}

fn vizing_bounds() -> Verdict {
    let mut rng = rng::seeded(8);
    let check = |g: &SimpleGraph| -> Result<usize, String> {
        let res = vizing(g);
        let col = EdgeColoring::from_colors(res.colors.clone());
        let h = g.as_hypergraph();
        if !proper(&h, &col) || res.palette > res.delta + 1 || col.num_colors_used() > res.palette {
            return Err(format!("bad vizing result on graph with edges {:?}", g.edges));
        }
        Ok(res.palette)
    };
    for _ in 0..10_000 {
        let n = rng.gen_range(1..=60);
        let g = {
            let p = rng.gen_range(0.0..1.0);
            random_graph(&mut rng, n, p)
        };
        check(&g)?;
    }
    for i in 0..500 {
        let n = rng.gen_range(1..=12);
        let g = {
            let p = rng.gen_range(0.0..1.0);
            random_graph(&mut rng, n, p)
        };
        let palette = check(&g)?;
        let chi = exact_chromatic_index(&g.as_hypergraph(), &ExactConfig { limit: 66, ..Default::default() })
            .map_err(|e| format!("oracle failed on graph {i}: {e}; edges {:?}", g.edges))?
            .chromatic_index;
        if palette != chi {
            return Err(format!("graph {i}: vizing {palette} vs oracle {chi}, edges {:?}", g.edges));
        }
    }
    Ok("10000 graphs within Δ+1, 500 small graphs match the oracle".into())
}

/// A forbidden-list instance built to satisfy the colorer's hypotheses.
fn hall_instance(rng: &mut rng::Rng) -> (SimpleGraph, Vec<usize>, Vec<Vec<usize>>, Vec<usize>, f64) {
    let n = rng.gen_range(100..=400);
    let delta = rng.gen_range(0.02..0.1);
    let cap = (delta * n as f64).floor() as usize;
    let colors = (7.0 * delta * n as f64).ceil() as usize + rng.gen_range(0..5);
    let palette: Vec<usize> = (0..colors).map(|c| 3 * c + 1).collect();
    let mut mult = vec![0usize; colors];
    let forbidden: Vec<Vec<usize>> = (0..n)
        .map(|_| {
            let want = rng.gen_range(0..=cap);
            let mut cw = Vec::new();
            for c in rand::seq::index::sample(rng, colors, colors).into_iter() {
                if cw.len() == want {
                    break;
                }
                if mult[c] < cap {
                    mult[c] += 1;
                    cw.push(palette[c]);
                }
            }
            cw
        })
        .collect();
    let mut verts: Vec<usize> = (0..n).collect();
    verts.shuffle(rng);
    let u: Vec<usize> = verts[..rng.gen_range(1..=cap.max(1))].to_vec();
    let p = rng.gen_range(0.1..1.0);
    let mut deg = vec![0usize; n];
    let mut seen = HashSet::new();
    let mut edges = Vec::new();
    for &a in &u {
        for b in 0..n {
            let key = (a.min(b), a.max(b));
            let room = |v: usize, deg: &[usize]| deg[v] + forbidden[v].len() < colors;
            if a != b && !seen.contains(&key) && rng.gen_bool(p) && room(a, &deg) && room(b, &deg) {
                seen.insert(key);
                deg[a] += 1;
                deg[b] += 1;
                edges.push(key);
            }
        }
    }
    (SimpleGraph::new(n, edges), palette, forbidden, u, delta)
}

fn hall_finish_corpus() -> Verdict {
    let mut rng = rng::seeded(9);
    for i in 0..500 {
        let (g, palette, forbidden, u, delta) = hall_instance(&mut rng);
        hall_finish_preconditions(&g, &palette, &forbidden, &u, delta)
            .map_err(|e| format!("generator produced a bad instance {i}: {e}"))?;
        let colors = hall_finish(&g, &palette, &forbidden, &u, delta).map_err(|e| format!("instance {i}: {e}"))?;
        let pal: HashSet<usize> = palette.iter().copied().collect();
        for (e, &(a, b)) in g.edges.iter().enumerate() {
            let c = colors[e];
            if !pal.contains(&c) || forbidden[a].contains(&c) || forbidden[b].contains(&c) {
                return Err(format!("instance {i}: edge {e} gets forbidden color {c}"));
            }
        }
        let col = EdgeColoring::from_colors(colors);
        if verify_coloring(&g.as_hypergraph(), &col).is_err() {
            return Err(format!("instance {i}: coloring not proper"));
        }
    }
    Ok("500 instances colored, all forbidden lists respected".into())
}

/// Whether some spanning subgraph has every degree in `[lo, hi]`.
fn brute_gf(g: &SimpleGraph, lo: &[usize], hi: &[usize]) -> bool {
    fn rec(g: &SimpleGraph, i: usize, deg: &mut [usize], rest: &mut [usize], lo: &[usize], hi: &[usize]) -> bool {
        if i == g.m() {
            return (0..g.n).all(|v| deg[v] >= lo[v] && deg[v] <= hi[v]);
        }
        let (a, b) = g.edges[i];
        rest[a] -= 1;
        rest[b] -= 1;
        let mut found = false;
        if deg[a] < hi[a] && deg[b] < hi[b] {
            deg[a] += 1;
            deg[b] += 1;
            found = rec(g, i + 1, deg, rest, lo, hi);
            deg[a] -= 1;
            deg[b] -= 1;
        }
        if !found && deg[a] + rest[a] >= lo[a] && deg[b] + rest[b] >= lo[b] {
            found = rec(g, i + 1, deg, rest, lo, hi);
        }
        rest[a] += 1;
        rest[b] += 1;
        found
    }
    let mut rest: Vec<usize> = (0..g.n).map(|v| g.degree(v)).collect();
    if (0..g.n).any(|v| rest[v] < lo[v]) {
        return false;
    }
    rec(g, 0, &mut vec![0; g.n], &mut rest, lo, hi)
}

fn gf_agreement() -> Verdict {
    let mut rng = rng::seeded(10);
    let mut feasible = 0;
    for i in 0..300 {
        let n = rng.gen_range(1..=12);
        let g = {
            let p = rng.gen_range(0.1..0.6);
            random_graph(&mut rng, n, p)
        };
        let lo: Vec<usize> = (0..n).map(|_| rng.gen_range(0..4)).collect();
        let hi: Vec<usize> = lo.iter().map(|&l| l + rng.gen_range(0..3)).collect();
        let expected = brute_gf(&g, &lo, &hi);
        match gf_factor(&g, &lo, &hi) {
            Ok(f) => {
                let mut deg = vec![0; n];
                for &e in &f {
                    deg[g.edges[e].0] += 1;
                    deg[g.edges[e].1] += 1;
                }
                if !expected || (0..n).any(|v| deg[v] < lo[v] || deg[v] > hi[v]) {
                    return Err(format!("pair {i}: factor returned but search disagrees or bounds broken"));
                }
                feasible += 1;
            }
            Err(GfError::Infeasible(_)) if !expected => {}
            Err(e) => return Err(format!("pair {i}: {e} (search says feasible: {expected})")),
        }
    }
    Ok(format!("300 pairs agree ({feasible} feasible)"))
}

/// Runs the CLI and returns its exit code, stdout and stderr.
fn cli(args: &[&str]) -> (i32, Vec<u8>, Vec<u8>) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let mut full = vec!["efl"];
    full.extend_from_slice(args);
    let code = efl_cli::run_with(full, &mut out, &mut err);
    (code, out, err)
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let read = |path: &str| std::fs::read(Path::new(path)).unwrap_or_default();
    let inst = p("inst.lhg");
    let small = p("small.lhg");
    let plane = p("plane.lhg");
    let plane_col = p("plane_col.json");
    let setup: [Vec<&str>; 4] = [
        vec![
            "gen",
            "--family",
            "random-linear",
            "--n",
            "120",
            "--m",
            "200",
            "--sizes",
            "2:3,3:2,5:1",
            "--seed",
            "11",
            "--out",
            &inst,
        ],
        vec![
            "gen",
            "--family",
            "random-linear",
            "--n",
            "9",
            "--m",
            "12",
            "--sizes",
            "2:2,3:1",
            "--seed",
            "4",
            "--out",
            &small,
        ],
        vec!["gen", "--family", "projective-plane", "--q", "3", "--out", &plane],
        vec!["color", "--algo", "dsatur", "--in", &plane, "--out", &plane_col],
    ];
    for a in &setup {
        let (code, _, err) = cli(a);
        if code != 0 {
            return Err(format!("setup {:?} exited {code}: {}", a, String::from_utf8_lossy(&err)));
        }
    }
    let gen_again = p("inst2.lhg");
    cli(&[
        "gen",
        "--family",
        "random-linear",
        "--n",
        "120",
        "--m",
        "200",
        "--sizes",
        "2:3,3:2,5:1",
        "--seed",
        "11",
        "--out",
        &gen_again,
    ]);
    if read(&inst) != read(&gen_again) {
        return Err("gen output differs between runs".into());
    }
    let (col_out, rep_out) = (p("col.json"), p("rep.json"));
    let mut runs: Vec<Vec<String>> = Vec::new();
    for algo in ["pipeline", "greedy", "dsatur", "extremal", "stability", "sublinear"] {
        for file in [&inst, &plane] {
            runs.push(
                ["color", "--algo", algo, "--in", file, "--seed", "7", "--out", &col_out, "--report", &rep_out]
                    .map(String::from)
                    .to_vec(),
            );
        }
    }
    runs.push(
        ["color", "--algo", "exact", "--in", &small, "--out", &col_out, "--report", &rep_out]
            .map(String::from)
            .to_vec(),
    );
    runs.push(["exact", "--in", &small].map(String::from).to_vec());
    runs.push(["order", "--in", &inst, "--tau", "0.3", "--k", "2"].map(String::from).to_vec());
    runs.push(["verify", "--in", &plane, "--coloring", &plane_col].map(String::from).to_vec());
    runs.push(
        ["nibble-sim", "--n", "600", "--d", "20", "--trials", "4", "--colors", "25", "--seed", "3"]
            .map(String::from)
            .to_vec(),
    );
    runs.push(
        [
            "bench",
            "--families",
            "projective-plane:3,random-linear:150,degenerate:40",
            "--seeds",
            "0..3",
            "--algos",
            "pipeline,dsatur,greedy",
            "--no-timing",
        ]
        .map(String::from)
        .to_vec(),
    );
    for args in &runs {
        let a: Vec<&str> = args.iter().map(String::as_str).collect();
        let _ = std::fs::remove_file(&col_out);
        let _ = std::fs::remove_file(&rep_out);
        let first = cli(&a);
        let files = (read(&col_out), read(&rep_out));
        let _ = std::fs::remove_file(&col_out);
        let _ = std::fs::remove_file(&rep_out);
        let second = cli(&a);
        if first != second || files != (read(&col_out), read(&rep_out)) {
            return Err(format!("{:?} differs between runs", a));
        }
    }
    Ok(format!("{} CLI invocations byte-identical across runs", runs.len() + 1))
}
