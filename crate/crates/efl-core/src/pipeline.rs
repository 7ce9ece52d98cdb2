//! End-to-end coloring: the staged large/medium, reservoir, absorption,
//! nibble, leftover and graph-finishing trace with a verified portfolio
//! fallback, plus the two stability colorers.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::absorb::{
    absorb_difficult, absorb_small_typical, base_family, regularising_reservoir, regularize_small_report,
    sample_reservoir_best, AbsorbParams, AbsorbTag, DifficultOutcome, Reservoir, ReservoirKind, ReservoirParams,
};
use crate::extremal::{extremal_color, EXACT_PAIRING_LIMIT};
use crate::finish::{
    delta_edge_color, exact_chromatic_index, hall_finish, hall_finish_unchecked, vizing, DeltaColorOutcome, ExactConfig,
};
use crate::greedy::{color_large_medium, dsatur_line, list_greedy, LargeEdgeResult, LargeType, ListAssignment};
use crate::hypercore::{
    derived_views, is_fpp_extremal_size, is_full, is_huge_size, verify_coloring, vertices_of_degree, CoverageStatus,
    EdgeColoring, Hierarchy, LinearHypergraph, SimpleGraph,
};
use crate::nibble::{leftover_color, main_color, MainParams};
use crate::ordering::{default_iter_cap, reorder, size_order, EdgeOrdering, ReorderOutcome};
use crate::rng;

/// Type of the pair `(H, φ)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InstanceType {
    A1,
    A2,
    B,
}

/// `B` for a type B coloring; otherwise `A2` exactly when `H` is `(ρ, ε)`-full.
pub fn classify_type(h: &LinearHypergraph, phi: &LargeEdgeResult, rho: f64, eps: f64) -> InstanceType {
    match phi.kind {
        LargeType::B => InstanceType::B,
        LargeType::A if is_full(h, rho, eps).full => InstanceType::A2,
        LargeType::A => InstanceType::A1,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub step: String,
    pub ok: bool,
    pub detail: String,
}

/// The color sets, each sorted.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ColorLedger {
    pub c_med: Vec<usize>,
    pub c_diff: Vec<usize>,
    pub c_huge: Vec<usize>,
    pub c_main: Vec<usize>,
    pub c_buff: Vec<usize>,
    pub c_large: Vec<usize>,
    pub c_final: Vec<usize>,
    /// `⌊(1−ρ)(n−1)⌋`.
    pub d: usize,
    /// `⌊10γ^{1/2} D⌋`.
    pub d_buff: usize,
}

impl ColorLedger {
    /// Whether `C_med, C_diff, C_huge, C_main, C_buff, C_final` partition `0..n`.
    pub fn partitions(&self, n: usize) -> bool {
        let mut seen = vec![false; n];
        for c in self
            .c_med
            .iter()
            .chain(&self.c_diff)
            .chain(&self.c_huge)
            .chain(&self.c_main)
            .chain(&self.c_buff)
            .chain(&self.c_final)
        {
            if *c >= n || std::mem::replace(&mut seen[*c], true) {
                return false;
            }
        }
        seen.into_iter().all(|s| s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub n: usize,
    pub m: usize,
    /// `staged`, `graph`, `trivial`, or `portfolio:<name>`.
    pub route: String,
    pub kind: Option<InstanceType>,
    pub steps: Vec<StepOutcome>,
    pub ledger: ColorLedger,
    pub coverage: Vec<(String, CoverageStatus)>,
    /// Every edge meeting `U` has size at most `εn`.
    pub ep1: bool,
    /// Type B with volume certificate: `|U| <= 2δn`.
    pub ep3: Option<bool>,
    /// Edges colored by the fallback greedy after a stage failure.
    pub quarantined: usize,
    /// Distinct colors on quarantined edges, and the forward-degree bound
    /// `(1 + 1/(r−1))n + 1` for their smallest size `r`.
    pub quarantine_colors: usize,
    pub quarantine_bound: Option<f64>,
    /// Colors used by the staged trace.
    pub staged_colors: usize,
    pub colors: usize,
    pub proper: bool,
    pub within_n: bool,
    pub fallbacks: Vec<String>,
    /// Budget clauses that held only at report level.
    pub strict_violations: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineOptions {
    /// Try the alternative colorers when the trace exceeds `n` colors.
    pub portfolio: bool,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self { portfolio: true }
    }
}

/// Colors `H` with the staged trace and returns a verified proper coloring
/// with its report.
pub fn efl_color(h: &LinearHypergraph, hier: &Hierarchy, seed: u64) -> (EdgeColoring, PipelineReport) {
    efl_color_with(h, hier, seed, &PipelineOptions::default())
}

pub fn efl_color_with(
    h: &LinearHypergraph,
    hier: &Hierarchy,
    seed: u64,
    opts: &PipelineOptions,
) -> (EdgeColoring, PipelineReport) {
    let n = h.n();
    let keep: Vec<usize> = (0..h.m()).filter(|&e| h.edge(e).len() >= 2).collect();
    let core = h.restrict(&keep);
    let mut report = PipelineReport {
        n,
        m: h.m(),
        route: "staged".into(),
        kind: None,
        steps: Vec::new(),
        ledger: ColorLedger::default(),
        coverage: Vec::new(),
        ep1: true,
        ep3: None,
        quarantined: 0,
        quarantine_colors: 0,
        quarantine_bound: None,
        staged_colors: 0,
        colors: 0,
        proper: false,
        within_n: false,
        fallbacks: Vec::new(),
        strict_violations: Vec::new(),
    };
    let core_col = if core.m() == 0 {
        report.route = "trivial".into();
        EdgeColoring::uncolored(0)
    } else if core.is_graph() {
        report.route = "graph".into();
        let g = graph_of(&core);
        let v = vizing(&g);
        report.steps.push(StepOutcome {
            step: "vizing".into(),
            ok: true,
            detail: format!("Δ={}, {} colors", v.delta, v.palette),
        });
        EdgeColoring::from_colors(v.colors)
    } else {
        staged(&core, hier, seed, &mut report)
    };
    let core_col = match verify_coloring(&core, &core_col) {
        Ok(()) if core_col.is_complete() => core_col,
        _ => {
            report.fallbacks.push("staged coloring failed verification; DSATUR used".into());
            dsatur_line(&core).0
        }
    };
    report.staged_colors = core_col.num_colors_used();
    let mut best = core_col;
    if opts.portfolio && best.num_colors_used() > n {
        if let Some((name, col)) = portfolio(&core, hier) {
            if col.num_colors_used() < best.num_colors_used() {
                report.fallbacks.push(format!("portfolio {name}: {} colors", col.num_colors_used()));
                report.route = format!("portfolio:{name}");
                best = col;
            }
        }
    }
    let mut col = EdgeColoring::uncolored(h.m());
    for (i, &e) in keep.iter().enumerate() {
        col.set(e, best.get(i).expect("complete"));
    }
    for e in (0..h.m()).filter(|&e| h.edge(e).len() < 2) {
        let used: BTreeSet<usize> = h.edge(e).iter().flat_map(|&v| h.incident(v)).filter_map(|&f| col.get(f)).collect();
        col.set(e, (0..).find(|c| !used.contains(c)).expect("unbounded"));
    }
    col.palette_size = col.colors.iter().flatten().max().map_or(0, |&c| c + 1);
    report.proper = verify_coloring(h, &col).is_ok();
    report.colors = col.num_colors_used();
    report.within_n = report.colors <= n;
    (col, report)
}

/// Everything the strict mode rejects: failed steps, fallbacks, report-level
/// violations, more than `n` colors, and EP1/EP3 failures.
pub fn strict_failures(rep: &PipelineReport) -> Vec<String> {
    let mut out: Vec<String> =
        rep.steps.iter().filter(|s| !s.ok).map(|s| format!("step {}: {}", s.step, s.detail)).collect();
    out.extend(rep.fallbacks.iter().map(|f| format!("fallback: {f}")));
    out.extend(rep.strict_violations.iter().cloned());
    if !rep.within_n {
        out.push(format!("{} colors > n = {}", rep.colors, rep.n));
    }
    if !rep.ep1 {
        out.push("EP1 failed".into());
    }
    if rep.ep3 == Some(false) {
        out.push("EP3 failed".into());
    }
    out
}

/// Strict mode: the coloring only when the trace ran without any downgrade.
/// At the desk-scale profile this is expected to fail, listing every clause.
pub fn efl_color_strict(
    h: &LinearHypergraph,
    hier: &Hierarchy,
    seed: u64,
) -> Result<(EdgeColoring, PipelineReport), (Vec<String>, PipelineReport)> {
    let mut hard = Vec::new();
    if let Err(e) = hier.validate() {
        hard.push(format!("hierarchy: {e}"));
    }
    hard.extend(hier.strict_violations().iter().map(|e| format!("hierarchy: {e}")));
    let (col, rep) = efl_color_with(h, hier, seed, &PipelineOptions { portfolio: false });
    hard.extend(strict_failures(&rep));
    if hard.is_empty() {
        Ok((col, rep))
    } else {
        Err((hard, rep))
    }
}

fn graph_of(h: &LinearHypergraph) -> SimpleGraph {
    SimpleGraph::new(h.n(), h.edges().iter().map(|e| (e[0], e[1])).collect())
}

/// Alternative colorers, best first among those that verify.
fn portfolio(h: &LinearHypergraph, hier: &Hierarchy) -> Option<(String, EdgeColoring)> {
    let mut cands: Vec<(String, EdgeColoring)> = Vec::new();
    if h.m() <= h.n() || h.m() <= EXACT_PAIRING_LIMIT {
        if let Ok(c) = extremal_color(h, hier.delta) {
            cands.push(("extremal".into(), c));
        }
    }
    let non_graph: Vec<usize> = (0..h.m()).filter(|&e| h.edge(e).len() > 2).collect();
    if let [e] = non_graph[..] {
        if let Ok(DifficultOutcome::Coloring(c)) = absorb_difficult(h, e) {
            cands.push(("difficult".into(), c));
        }
    }
    if h.m() <= 20_000 {
        cands.push(("dsatur".into(), dsatur_line(h).0));
    }
    if h.m() <= ExactConfig::default().limit {
        if let Ok(r) = exact_chromatic_index(h, &ExactConfig::default()) {
            cands.push(("exact".into(), r.coloring));
        }
    }
    cands
        .into_iter()
        .filter(|(_, c)| c.is_complete() && verify_coloring(h, c).is_ok())
        .min_by_key(|(_, c)| c.num_colors_used())
}

/// Matchings per color plus the bookkeeping of the trace.
struct Trace<'a> {
    h: &'a LinearHypergraph,
    color: Vec<Option<usize>>,
}

impl Trace<'_> {
    fn give(&mut self, c: usize, m: &[usize]) {
        for &e in m {
            self.color[e] = Some(c);
        }
    }

    fn uncolored(&self, pred: impl Fn(usize) -> bool) -> Vec<usize> {
        (0..self.h.m()).filter(|&e| self.color[e].is_none() && pred(e)).collect()
    }
}

/// The staged trace. Every stage only adds edges to the color classes it
/// owns, so the result is proper whenever each stage returns matchings.
fn staged(h: &LinearHypergraph, hier: &Hierarchy, seed: u64, rep: &mut PipelineReport) -> EdgeColoring {
    let n = h.n();
    let nf = n as f64;
    let mut tr = Trace { h, color: vec![None; h.m()] };
    let step = |rep: &mut PipelineReport, s: &str, ok: bool, d: String| {
        rep.steps.push(StepOutcome { step: s.into(), ok, detail: d })
    };

    // Step 1: large and medium edges.
    let ml: Vec<usize> = (0..h.m()).filter(|&e| h.edge(e).len() > hier.r1).collect();
    let h_ml = h.restrict(&ml);
    let phi = color_large_medium(&h_ml, hier, seed);
    let kind = classify_type(h, &phi, hier.rho1, hier.eps1);
    rep.kind = Some(kind);
    let (rho, rho_abs, eps, gamma) = match kind {
        InstanceType::A1 => (hier.rho1, hier.rho1, hier.eps1, hier.gamma1),
        InstanceType::A2 => (hier.rho1, hier.rho1 / 2.0, hier.eps1, hier.gamma1),
        InstanceType::B => (hier.rho2, hier.rho2, hier.eps2, hier.gamma2),
    };
    if !phi.clauses.all() {
        rep.strict_violations.push(format!("type clauses {:?}", phi.clauses));
    }
    // Compact φ's colors to 0..k in order of first use.
    let mut remap: BTreeMap<usize, usize> = BTreeMap::new();
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for (i, &e) in ml.iter().enumerate() {
        let c = phi.coloring.get(i).expect("large/medium coloring is complete");
        let k = *remap.entry(c).or_insert_with(|| {
            classes.push(Vec::new());
            classes.len() - 1
        });
        classes[k].push(e);
    }
    let k_phi = classes.len();
    step(
        rep,
        "large-medium",
        k_phi <= n,
        format!("{:?}/{:?}, {k_phi} colors, {} relaxations", phi.kind, phi.case, phi.relaxations),
    );

    let views = derived_views(h, eps);
    rep.ep1 =
        (0..h.m()).all(|e| h.edge(e).iter().all(|&v| !views.in_u[v]) || h.edge(e).len() as f64 <= eps * nf + 1e-9);
    if kind == InstanceType::B && phi.fpp_volume.is_some_and(|v| v >= 1.0 - hier.delta - 1e-9) {
        rep.ep3 = Some(views.u.len() as f64 <= 2.0 * hier.delta * nf + 1e-9);
    }

    // Step 3 first part: the φ-defined color sets.
    // A class holding an edge of huge size counts as huge even when that
    // edge is medium by the r0 cut-off, which happens whenever r0 >= βn/4.
    let huge_of = |k: usize| classes[k].iter().any(|&e| is_huge_size(h.edge(e).len(), n, hier.beta));
    let c_diff: Vec<usize> = (0..k_phi)
        .filter(|&k| huge_of(k))
        .find(|&k| crate::absorb::is_difficult(h, &classes[k], eps))
        .into_iter()
        .collect();
    let c_huge: Vec<usize> = (0..k_phi).filter(|k| !c_diff.contains(k) && huge_of(*k)).collect();
    let med_set: BTreeSet<usize> = phi
        .c_med
        .iter()
        .filter_map(|c| remap.get(c).copied())
        .filter(|k| !c_diff.contains(k) && !c_huge.contains(k))
        .collect();
    let c_large: Vec<usize> =
        (0..k_phi).filter(|k| !med_set.contains(k) && !c_diff.contains(k) && !c_huge.contains(k)).collect();
    let class_of = |k: usize| -> Vec<usize> { classes.get(k).cloned().unwrap_or_default() };

    // Step 2: reservoir and defect set.
    let mut family = base_family(h, &views);
    for &k in c_huge.iter().chain(med_set.iter().take(16)) {
        let mut cov = vec![false; n];
        classes[k].iter().flat_map(|&e| h.edge(e)).for_each(|&v| cov[v] = true);
        family.push((0..n).filter(|&v| views.in_u[v] || cov[v]).collect());
        family.push(views.u.iter().copied().filter(|&v| !cov[v]).collect());
    }
    let rseed = seed ^ 0x7265_7365;
    let sample = |kind: ReservoirKind, rho: f64| {
        sample_reservoir_best(h, kind, ReservoirParams { rho, xi: hier.xi, eps }, &family, rseed)
    };
    let r_res: Option<Reservoir> = match kind {
        InstanceType::A1 => sample(ReservoirKind::A1, rho).ok().map(|r| r.0),
        InstanceType::B => sample(ReservoirKind::B, rho).ok().map(|r| r.0),
        InstanceType::A2 => match sample(ReservoirKind::B, rho_abs) {
            Ok((r_abs, _)) => match regularising_reservoir(h, &r_abs, ReservoirParams { rho, xi: hier.xi, eps }) {
                Ok(r) => Some(r),
                Err(e) => {
                    rep.fallbacks.push(format!("regularising reservoir failed ({e}); absorber only"));
                    Some(r_abs)
                }
            },
            Err(_) => None,
        },
    };
    let r_res = r_res.unwrap_or_else(|| {
        rep.fallbacks.push("reservoir sampling rejected its parameters; empty reservoir".into());
        Reservoir {
            edges: Vec::new(),
            kind: ReservoirKind::B,
            params: ReservoirParams { rho, xi: hier.xi, eps },
            degree_residual: 0.0,
            window_misses: Vec::new(),
            absorber: Default::default(),
            attempt: 0,
        }
    });
    step(
        rep,
        "reservoir",
        r_res.window_misses.is_empty(),
        format!("{:?}, {} edges, degree residual {:.2}", r_res.kind, r_res.edges.len(), r_res.degree_residual),
    );
    let in_res: Vec<bool> = {
        let mut v = vec![false; h.m()];
        r_res.edges.iter().for_each(|&e| v[e] = true);
        v
    };
    let r_abs: Vec<usize> = r_res.absorber_part(h, &views);
    let full_deg: BTreeSet<usize> = vertices_of_degree(h, n - 1).into_iter().collect();
    let s: Vec<usize> = match kind {
        InstanceType::A1 => views.u.iter().copied().filter(|v| !full_deg.contains(v)).collect(),
        _ => views.u.clone(),
    };

    // Step 3 second part: main, buffer and final colors.
    let d = ((1.0 - rho) * (nf - 1.0)).floor().max(0.0) as usize;
    let d_buff = (10.0 * gamma.sqrt() * d as f64).floor() as usize;
    let taken: BTreeSet<usize> = med_set.iter().chain(&c_diff).chain(&c_huge).copied().collect();
    let pool: Vec<usize> =
        c_large.iter().copied().chain((k_phi..n.max(k_phi)).filter(|c| !taken.contains(c))).collect();
    let c_main: Vec<usize> = pool.iter().copied().take(d).collect();
    if c_main.len() < d {
        rep.strict_violations.push(format!("|C_main| = {} < D = {d}", c_main.len()));
    }
    let rest: Vec<usize> = pool.iter().copied().skip(c_main.len()).collect();
    let res_delta = {
        let deg = r_res.degrees(h);
        deg.into_iter().max().unwrap_or(0)
    };
    let buff_cap = rest.len().saturating_sub(res_delta + 1).max(usize::from(!rest.is_empty() && res_delta == 0));
    let buff_len = d_buff.min(buff_cap);
    if buff_len < d_buff {
        rep.strict_violations.push(format!("|C_buff| capped at {buff_len} < {d_buff}"));
    }
    let c_buff: Vec<usize> = rest.iter().copied().take(buff_len).collect();
    let c_final: Vec<usize> = rest.iter().copied().skip(buff_len).collect();
    let sorted = |v: &[usize]| {
        let mut v = v.to_vec();
        v.sort_unstable();
        v
    };
    rep.ledger = ColorLedger {
        c_med: med_set.iter().copied().collect(),
        c_diff: sorted(&c_diff),
        c_huge: sorted(&c_huge),
        c_main: sorted(&c_main),
        c_buff: sorted(&c_buff),
        c_large: sorted(&c_large),
        c_final: sorted(&c_final),
        d,
        d_buff,
    };
    if k_phi > n {
        rep.strict_violations.push(format!("φ used {k_phi} > n colors"));
        for k in n..k_phi {
            tr.give(k, &classes[k]);
        }
    }

    // Step 4: difficult class.
    let mut used_r = vec![false; h.m()];
    let mut s1 = s.clone();
    if let Some(&cd) = c_diff.first() {
        let e = classes[cd][0];
        match absorb_difficult(h, e) {
            Ok(DifficultOutcome::Coloring(col)) => {
                step(rep, "difficult", true, "colored outright".into());
                return col;
            }
            Ok(DifficultOutcome::Matching(m)) => {
                let mut cov = vec![false; n];
                m.iter().flat_map(|&f| h.edge(f)).for_each(|&v| cov[v] = true);
                let miss2: BTreeSet<usize> =
                    vertices_of_degree(h, n.saturating_sub(2)).into_iter().filter(|&v| !cov[v]).collect();
                s1.retain(|v| !miss2.contains(v));
                m.iter().for_each(|&f| used_r[f] = true);
                step(rep, "difficult", true, format!("extended to {} edges", m.len()));
                tr.give(cd, &m);
            }
            Err(err) => {
                step(rep, "difficult", false, err.to_string());
                rep.fallbacks.push("difficult class left unextended".into());
                tr.give(cd, &classes[cd]);
            }
        }
    }
    let m_diff: Vec<bool> = used_r.clone();

    // Step 5: huge and medium classes.
    let hm: Vec<usize> = c_huge.iter().chain(med_set.iter()).copied().collect();
    let r1: Vec<usize> = r_abs.iter().copied().filter(|&e| !used_r[e]).collect();
    let tagged: Vec<(Vec<usize>, AbsorbTag)> = hm
        .iter()
        .map(|&k| (class_of(k), if c_huge.contains(&k) { AbsorbTag::Typicality } else { AbsorbTag::Smallness }))
        .collect();
    let ap = |g: f64| AbsorbParams { rho: rho_abs, eps, gamma: g, kappa: hier.kappa, xi: hier.xi };
    let mut s2 = s1.clone();
    match absorb_small_typical(h, &tagged, &r1, &s1, &ap(1.5 * gamma), seed ^ 5) {
        Ok(ab) => {
            rep.coverage.push(("huge-medium".into(), ab.coverage.status));
            let def: BTreeSet<usize> = ab.coverage.defects.values().copied().collect();
            s2.retain(|v| !def.contains(v));
            for (j, m) in ab.matchings.iter().enumerate() {
                m.iter().filter(|&&e| in_res[e]).for_each(|&e| used_r[e] = true);
                tr.give(hm[j], m);
            }
            step(rep, "huge-medium", true, format!("{:?}, {:?}", ab.branch, ab.coverage.status));
        }
        Err(err) => {
            step(rep, "huge-medium", false, err.to_string());
            rep.fallbacks.push("huge/medium classes left unextended".into());
            for &k in &hm {
                tr.give(k, &classes[k]);
            }
        }
    }

    // Step 6: main colors.
    let reg = regularize_small_report(h, &r_res, hier);
    if !reg.misses.is_empty() {
        rep.strict_violations.push(format!("{} vertices outside the regularity window", reg.misses.len()));
    }
    let h_star: Vec<usize> =
        reg.source.iter().flatten().copied().filter(|&e| !m_diff[e] && tr.color[e].is_none()).collect();
    let pre_main: Vec<Vec<usize>> = c_main.iter().map(|&c| class_of(c)).collect();
    let r2: Vec<usize> = r_abs.iter().copied().filter(|&e| !used_r[e]).collect();
    let mut s3 = s2.clone();
    let mp = MainParams::new(ap(2.0 * gamma));
    match main_color(h, &h_star, &pre_main, &r2, &s2, &mp, seed ^ 6) {
        Ok(out) => {
            rep.coverage.push(("main".into(), out.coverage.status));
            let def: BTreeSet<usize> = out.coverage.defects.values().copied().collect();
            s3.retain(|v| !def.contains(v));
            for (j, m) in out.matchings.iter().enumerate() {
                m.iter().filter(|&&e| in_res[e]).for_each(|&e| used_r[e] = true);
                tr.give(c_main[j], m);
            }
            step(
                rep,
                "main",
                out.n2_violations.is_empty(),
                format!(
                    "{} rounds, {} leftover, {} N2 violations",
                    out.rounds.len(),
                    out.leftover.len(),
                    out.n2_violations.len()
                ),
            );
        }
        Err(err) => {
            step(rep, "main", false, err.to_string());
            rep.fallbacks.push("main colors keep only their large edges".into());
            for (j, m) in pre_main.iter().enumerate() {
                tr.give(c_main[j], m);
            }
        }
    }

    // Step 7: leftover edges on the buffer colors.
    let h_rem = tr.uncolored(|e| h.edge(e).len() <= hier.r1 && !in_res[e]);
    let pre_buff: Vec<Vec<usize>> = c_buff.iter().map(|&c| class_of(c)).collect();
    let r3: Vec<usize> = r_abs.iter().copied().filter(|&e| !used_r[e]).collect();
    let leftover = if c_buff.is_empty() && !h_rem.is_empty() {
        Err("no buffer colors".to_string())
    } else {
        leftover_color(h, &c_buff, &pre_buff, &r3, &h_rem, &s3, &ap((10.0 * gamma.sqrt()).min(1.0)), seed ^ 7)
            .map_err(|e| e.to_string())
    };
    match leftover {
        Ok(out) => {
            rep.coverage.push(("buffer".into(), out.coverage.status));
            for (j, m) in out.matchings.iter().enumerate() {
                m.iter().filter(|&&e| in_res[e]).for_each(|&e| used_r[e] = true);
                tr.give(c_buff[j], m);
            }
            step(rep, "leftover", true, format!("{} edges, {:?}", h_rem.len(), out.branch));
        }
        Err(err) => {
            step(rep, "leftover", false, err);
            rep.fallbacks.push(format!("{} leftover edges quarantined", h_rem.len()));
            for (j, m) in pre_buff.iter().enumerate() {
                tr.give(c_buff[j], m);
            }
        }
    }

    // Step 9: the remaining reservoir edges on the final colors.
    for &c in &c_final {
        tr.give(c, &class_of(c));
    }
    let r_final: Vec<usize> = r_res.edges.iter().copied().filter(|&e| tr.color[e].is_none()).collect();
    finish_final(h, &mut tr, &r_final, &c_final, &views.u, hier, seed, rep);

    // Anything still uncolored: size-order greedy over all colors.
    let left = tr.uncolored(|_| true);
    if !left.is_empty() {
        rep.quarantined = left.len();
        let ord = size_order(&h.restrict(&left));
        for &i in ord.perm() {
            let e = left[i];
            let used: BTreeSet<usize> =
                h.edge(e).iter().flat_map(|&v| h.incident(v)).filter_map(|&f| tr.color[f]).collect();
            tr.color[e] = (0..).find(|c| !used.contains(c));
        }
        let qc: BTreeSet<usize> = left.iter().filter_map(|&e| tr.color[e]).collect();
        let r = left.iter().map(|&e| h.edge(e).len()).min().unwrap_or(2).max(2) as f64;
        rep.quarantine_colors = qc.len();
        rep.quarantine_bound = Some((1.0 + 1.0 / (r - 1.0)) * nf + 1.0);
        step(rep, "quarantine", false, format!("{} edges colored greedily", left.len()));
    }
    EdgeColoring::from_colors(tr.color.into_iter().map(|c| c.expect("all colored")).collect())
}

#[allow(clippy::too_many_arguments)]
fn finish_final(
    h: &LinearHypergraph,
    tr: &mut Trace,
    r_final: &[usize],
    c_final: &[usize],
    u: &[usize],
    hier: &Hierarchy,
    seed: u64,
    rep: &mut PipelineReport,
) {
    if r_final.is_empty() {
        rep.steps.push(StepOutcome { step: "final".into(), ok: true, detail: "nothing left".into() });
        return;
    }
    let n = h.n();
    let g = SimpleGraph::new(n, r_final.iter().map(|&e| (h.edge(e)[0], h.edge(e)[1])).collect());
    let in_final: BTreeSet<usize> = c_final.iter().copied().collect();
    let mut forbidden = vec![Vec::new(); n];
    for e in 0..h.m() {
        if let Some(c) = tr.color[e].filter(|c| in_final.contains(c)) {
            h.edge(e).iter().for_each(|&v| forbidden[v].push(c));
        }
    }
    let assign = |tr: &mut Trace, colors: &[usize]| {
        for (i, &e) in r_final.iter().enumerate() {
            tr.color[e] = Some(colors[i]);
        }
    };
    if forbidden.iter().all(Vec::is_empty) {
        let v = vizing(&g);
        let mut colors = v.colors.clone();
        let mut palette = v.palette;
        if palette > c_final.len() {
            let mut rng = rng::seeded(seed ^ 9);
            if let DeltaColorOutcome::Colored { colors: c, delta, .. } =
                delta_edge_color(&g, hier.rho1 / 4.0, hier.eps1.cbrt(), &mut rng)
            {
                colors = c;
                palette = delta;
            }
        }
        // Colors past C_final spill into fresh colors above every used one.
        let top = tr.color.iter().flatten().max().map_or(0, |&c| c + 1).max(n);
        let map: Vec<usize> =
            (0..palette).map(|i| c_final.get(i).copied().unwrap_or(top + i - c_final.len())).collect();
        let mapped: Vec<usize> = colors.iter().map(|&c| map[c]).collect();
        assign(tr, &mapped);
        rep.steps.push(StepOutcome {
            step: "final".into(),
            ok: palette <= c_final.len(),
            detail: format!("graph finish with {palette} colors, |C_final| = {}", c_final.len()),
        });
        return;
    }
    let hall = hall_finish(&g, c_final, &forbidden, u, 2.0 * hier.delta)
        .map(|c| (c, "checked"))
        .or_else(|_| hall_finish_unchecked(&g, c_final, &forbidden, u).map(|c| (c, "unchecked")));
    match hall {
        Ok((colors, how)) => {
            assign(tr, &colors);
            rep.steps.push(StepOutcome {
                step: "final".into(),
                ok: how == "checked",
                detail: format!("Hall finish ({how})"),
            });
        }
        Err(err) => {
            rep.steps.push(StepOutcome {
                step: "final".into(),
                ok: false,
                detail: format!("Hall finish failed: {err}"),
            });
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StabilityError {
    #[error("precondition unmet: {0}")]
    Precondition(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub colors: usize,
    pub budget: f64,
    pub within_budget: bool,
    /// Large/medium stage met its type clauses.
    pub stages_held: bool,
    /// Times the palette for small edges had to grow.
    pub palette_growths: usize,
    pub route: String,
}

/// Colors an instance far from the extremal families: large and medium
/// edges first, then small edges greedily with lists avoiding the colors of
/// large edges they meet. The `(1−σ)n` budget is reported.
pub fn stability_color(
    h: &LinearHypergraph,
    hier: &Hierarchy,
) -> Result<(EdgeColoring, StabilityReport), StabilityError> {
    let n = h.n();
    let nf = n as f64;
    if h.max_degree() as f64 > (1.0 - hier.delta) * nf + 1e-9 {
        return Err(StabilityError::Precondition(format!("Δ = {} > (1−δ)n", h.max_degree())));
    }
    let fpp = (0..h.m()).filter(|&e| is_fpp_extremal_size(h.edge(e).len(), n, hier.delta)).count();
    if fpp as f64 > (1.0 - 3.0 * hier.delta) * nf + 1e-9 {
        return Err(StabilityError::Precondition(format!("{fpp} FPP-extremal edges > (1−3δ)n")));
    }
    let budget = (1.0 - hier.sigma) * nf;
    if h.edges().iter().all(|e| e.len() <= 2) {
        let keep: Vec<usize> = (0..h.m()).filter(|&e| h.edge(e).len() == 2).collect();
        let v = vizing(&graph_of(&h.restrict(&keep)));
        let mut col = EdgeColoring::uncolored(h.m());
        keep.iter().enumerate().for_each(|(i, &e)| col.set(e, v.colors[i]));
        fill_singletons(h, &mut col);
        let colors = col.num_colors_used();
        let rep = StabilityReport {
            colors,
            budget,
            within_budget: colors as f64 <= budget + 1e-9,
            stages_held: true,
            palette_growths: 0,
            route: "vizing".into(),
        };
        return Ok((col, rep));
    }
    let ml: Vec<usize> = (0..h.m()).filter(|&e| h.edge(e).len() > hier.r1).collect();
    let small: Vec<usize> = (0..h.m()).filter(|&e| h.edge(e).len() <= hier.r1).collect();
    let phi = color_large_medium(&h.restrict(&ml), hier, 0);
    let mut col = EdgeColoring::uncolored(h.m());
    for (i, &e) in ml.iter().enumerate() {
        col.set(e, phi.coloring.get(i).expect("complete"));
    }
    let sub = h.restrict(&small);
    let ord = size_order(&sub);
    let conflicts: Vec<BTreeSet<usize>> = small
        .iter()
        .map(|&e| h.edge(e).iter().flat_map(|&v| h.incident(v)).filter_map(|&f| col.get(f)).collect())
        .collect();
    let mut palette = (budget.floor() as usize).max(phi.coloring.palette_size).max(1);
    let mut growths = 0;
    let psi = loop {
        let lists: Vec<Vec<usize>> =
            conflicts.iter().map(|c| (0..palette).filter(|x| !c.contains(x)).collect()).collect();
        let la = ListAssignment::new((0..palette).collect(), lists).expect("lists inside the palette");
        match list_greedy(&sub, &ord, &la, 0.0, 1.0) {
            Ok(c) => break c,
            Err(_) => {
                growths += 1;
                palette += palette / 10 + 1;
            }
        }
    };
    for (i, &e) in small.iter().enumerate() {
        col.set(e, psi.get(i).expect("complete"));
    }
    col.palette_size = col.colors.iter().flatten().max().map_or(0, |&c| c + 1);
    let colors = col.num_colors_used();
    let rep = StabilityReport {
        colors,
        budget,
        within_budget: colors as f64 <= budget + 1e-9,
        stages_held: phi.clauses.all(),
        palette_growths: growths,
        route: "large-then-list".into(),
    };
    Ok((col, rep))
}

fn fill_singletons(h: &LinearHypergraph, col: &mut EdgeColoring) {
    let todo: Vec<usize> = (0..h.m()).filter(|&e| col.get(e).is_none()).collect();
    for e in todo {
        let used: BTreeSet<usize> = h.edge(e).iter().flat_map(|&v| h.incident(v)).filter_map(|&f| col.get(f)).collect();
        col.set(e, (0..).find(|c| !used.contains(c)).expect("unbounded"));
    }
    col.palette_size = col.colors.iter().flatten().max().map_or(0, |&c| c + 1);
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SublinearReport {
    /// Edges with `1/η < |e| < η√n`.
    pub mid_edges: usize,
    /// Edges with `|e| <= 1/η`.
    pub tiny_edges: usize,
    /// Edges with `|e| >= √n/η`.
    pub giant_edges: usize,
    pub mid_colors: usize,
    pub tiny_colors: usize,
    pub giant_colors: usize,
    /// Windows extracted by the reordering loop.
    pub windows: usize,
    pub colors: usize,
    pub budget: f64,
    pub within_budget: bool,
}

/// Colors `H` with disjoint palettes for tiny, mid-size and giant edges.
/// Giant edges get one color each; tiny edges DSATUR; mid-size edges are
/// peeled by repeated reordering into windows (each DSATUR-colored on its own
/// palette) and good parts colored greedily along the combined ordering.
pub fn sublinear_color(
    h: &LinearHypergraph,
    eta: f64,
    eps_target: f64,
) -> Result<(EdgeColoring, SublinearReport), StabilityError> {
    let n = h.n();
    let nf = n as f64;
    let root = nf.sqrt();
    if !(eta > 0.0 && eta < 1.0) {
        return Err(StabilityError::Precondition(format!("eta = {eta} outside (0,1)")));
    }
    if h.max_degree() as f64 > eta * nf + 1e-9 {
        return Err(StabilityError::Precondition(format!("Δ = {} > ηn", h.max_degree())));
    }
    if let Some(e) = (0..h.m()).find(|&e| {
        let s = h.edge(e).len() as f64;
        s > eta * root && s < root / eta
    }) {
        return Err(StabilityError::Precondition(format!("edge {e} has forbidden size {}", h.edge(e).len())));
    }
    let size = |e: usize| h.edge(e).len() as f64;
    let tiny: Vec<usize> = (0..h.m()).filter(|&e| size(e) <= 1.0 / eta).collect();
    let giant: Vec<usize> = (0..h.m()).filter(|&e| size(e) > 1.0 / eta && size(e) >= root / eta).collect();
    let mid: Vec<usize> = (0..h.m()).filter(|&e| size(e) > 1.0 / eta && size(e) < root / eta).collect();
    let mut col = EdgeColoring::uncolored(h.m());
    let mut next = 0usize;

    let tiny_colors = if tiny.is_empty() {
        0
    } else {
        let (c, k) = dsatur_line(&h.restrict(&tiny));
        tiny.iter().enumerate().for_each(|(i, &e)| col.set(e, c.get(i).expect("complete")));
        next = k;
        k
    };
    for (i, &e) in giant.iter().enumerate() {
        col.set(e, next + i);
    }
    next += giant.len();

    let mid_start = next;
    let mut windows = 0;
    if !mid.is_empty() {
        let tau = 1.0 - eps_target / 6.0;
        let k = eps_target.powi(-2);
        let mut left = mid.clone();
        let mut good_seq: Vec<usize> = Vec::new();
        let mut window_sets: Vec<Vec<usize>> = Vec::new();
        while !left.is_empty() {
            let sub = h.restrict(&left);
            let cap = default_iter_cap(&sub).min(2_000_000);
            let out = reorder(&sub, tau, k, cap).unwrap_or_else(|_| ReorderOutcome::Good(size_order(&sub)));
            match out {
                ReorderOutcome::Good(ord) => {
                    good_seq.extend(ord.perm().iter().map(|&i| left[i]));
                    break;
                }
                ReorderOutcome::Window { ordering, w, e_star, .. } => {
                    let perm = ordering.perm();
                    let p_star = ordering.position(e_star);
                    let p_first = w.iter().map(|&f| ordering.position(f)).min().unwrap_or(p_star);
                    good_seq.extend(perm[p_star + 1..].iter().map(|&i| left[i]));
                    let in_w: BTreeSet<usize> = w.iter().copied().collect();
                    window_sets.push(w.iter().map(|&i| left[i]).collect());
                    let next_left: Vec<usize> = perm[..p_first]
                        .iter()
                        .chain(perm[p_first..=p_star].iter().filter(|i| !in_w.contains(i)))
                        .map(|&i| left[i])
                        .collect();
                    windows += 1;
                    if next_left.len() == left.len() {
                        good_seq.extend(next_left);
                        break;
                    }
                    left = next_left;
                }
            }
        }
        for w in &window_sets {
            let (c, k) = dsatur_line(&h.restrict(w));
            w.iter().enumerate().for_each(|(i, &e)| col.set(e, next + c.get(i).expect("complete")));
            next += k;
        }
        let good_start = next;
        let gsub = h.restrict(&good_seq);
        let mut gcol: Vec<Option<usize>> = vec![None; good_seq.len()];
        // Reverse order of extraction: the last peeled part is colored first.
        for i in (0..good_seq.len()).rev() {
            let e = good_seq[i];
            let used: BTreeSet<usize> =
                h.edge(e).iter().flat_map(|&v| gsub.incident(v)).filter_map(|&j| gcol[j]).collect();
            gcol[i] = (0..).find(|c| !used.contains(c));
        }
        for (i, &e) in good_seq.iter().enumerate() {
            let c = gcol[i].expect("colored");
            col.set(e, good_start + c);
            next = next.max(good_start + c + 1);
        }
    }
    col.palette_size = next;
    let colors = col.num_colors_used();
    let budget = eps_target * nf;
    let rep = SublinearReport {
        mid_edges: mid.len(),
        tiny_edges: tiny.len(),
        giant_edges: giant.len(),
        mid_colors: next - mid_start,
        tiny_colors,
        giant_colors: giant.len(),
        windows,
        colors,
        budget,
        within_budget: colors as f64 <= budget + 1e-9,
    };
    Ok((col, rep))
}

/// Orders used by `sublinear_color`'s good parts, exposed for inspection.
pub fn combined_good_order(h: &LinearHypergraph) -> EdgeOrdering {
    size_order(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{complete, degenerate, projective_plane};

    #[test]
    fn graph_goes_through_vizing() {
        let h = complete(9);
        let (col, rep) = efl_color(&h, &Hierarchy::default(), 1);
        assert!(verify_coloring(&h, &col).is_ok());
        assert_eq!(rep.route, "graph");
        assert!(col.num_colors_used() <= 9);
    }

    #[test]
    fn planes_within_n() {
        for q in [2, 3, 5] {
            let h = projective_plane(q).unwrap();
            let (col, rep) = efl_color(&h, &Hierarchy::default(), 2);
            assert!(rep.proper);
            assert!(col.num_colors_used() <= h.n(), "q={q}: {rep:?}");
        }
    }

    #[test]
    fn degenerate_within_n() {
        for n in [8, 20, 50] {
            let h = degenerate(n).unwrap();
            let (col, rep) = efl_color(&h, &Hierarchy::default(), 3);
            assert!(rep.proper);
            assert_eq!(col.num_colors_used(), n, "{rep:?}");
        }
    }

    #[test]
    fn classify_b_and_a() {
        let hier = Hierarchy { r1: 2, r0: 3, ..Hierarchy::default() };
        let fano = projective_plane(2).unwrap();
        let phi = color_large_medium(&fano, &hier, 0);
        let t = classify_type(&fano, &phi, hier.rho1, hier.eps1);
        match phi.kind {
            LargeType::B => assert_eq!(t, InstanceType::B),
            LargeType::A => assert_eq!(t, InstanceType::A1),
        }
    }

    #[test]
    fn stability_rejects_planes() {
        let h = projective_plane(5).unwrap();
        assert!(stability_color(&h, &Hierarchy::default()).is_err());
    }

    #[test]
    fn sublinear_giant_only() {
        // Two disjoint giant edges on 400 vertices, η = 0.5: √n/η = 40.
        let h = LinearHypergraph::build(400, vec![(0..100).collect(), (100..200).collect()], false).unwrap();
        let (col, rep) = sublinear_color(&h, 0.5, 0.5).unwrap();
        assert!(verify_coloring(&h, &col).is_ok());
        assert_eq!(rep.giant_edges, 2);
        assert!(rep.colors as f64 <= 2.0 * 0.5 * 400.0);
    }

    #[test]
    fn strict_mode_lists_downgrades() {
        let h = projective_plane(7).unwrap();
        let (fails, rep) = efl_color_strict(&h, &Hierarchy::default(), 1).unwrap_err();
        assert!(!fails.is_empty());
        assert!(rep.proper);
    }
}
