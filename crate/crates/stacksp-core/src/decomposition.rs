//! Two-phase decomposition of a bought path into source-sink segments and
//! verification of the revenue bounds that hold on each piece.
//!
//! Phase 1 cuts out the maximal runs that contain shortcut edges (role S).
//! Phase 2 scans gadgets left to right and moves to role T every span that
//! induces a shortcut between two remaining R segments. What survives in R
//! is shortcut-free in both senses, which is what lets an assignment be
//! decoded from it without conflicts.
//!
//! Per-segment facts checked here, writing `len` for the gadget span:
//! - R: every pricable edge on the segment costs at most 1;
//! - S: revenue ≤ (len+1)/2, with the contained shortcuts telescoping to
//!   exactly (len−1)/2;
//! - T: revenue ≤ (len−1)/2 + 2, from the inducing shortcut plus the two
//!   end edges;
//! - far mode: S and T segments each span more than the far window, so
//!   their counts are below ⌈1/δ⌉.

use crate::buyer::{best_response, BuyerError};
use crate::instance::{
    make_witness, EdgeId, EdgeKind, PathError, PathWitness, PriceAssignment, PricingInstance,
    VertexId,
};
use crate::reduction::{GadgetMap, GadgetVertexRole, ShortcutMode};
use crate::scalar::{fmt_rat, rat, rat_int, Price, Rat};
use num::bigint::BigInt;
use num::{One, Zero};
use std::collections::HashMap;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    R,
    S,
    T,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Role::R => write!(f, "R"),
            Role::S => write!(f, "S"),
            Role::T => write!(f, "T"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub role: Role,
    /// 1-based first and last gadget of the span.
    pub start_gadget: usize,
    pub end_gadget: usize,
    /// Contiguous slice of the decomposed path.
    pub edges: Vec<EdgeId>,
    pub revenue: Rat,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.end_gadget - self.start_gadget + 1
    }

    pub fn is_empty(&self) -> bool {
        false // a segment always spans at least one gadget
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decomposition {
    pub segments: Vec<Segment>,
    pub path: PathWitness,
    /// Answer index used by the path at each gadget, if any (0-based slot
    /// per 1-based position − 1).
    pub gadget_answer: Vec<Option<usize>>,
    vseq: Vec<VertexId>,
    source_idx: Vec<Option<usize>>,
    sink_idx: Vec<Option<usize>>,
}

impl Decomposition {
    /// Segment index covering a gadget position.
    pub fn segment_of(&self, position: usize) -> Option<usize> {
        self.segments
            .iter()
            .position(|s| s.start_gadget <= position && position <= s.end_gadget)
    }
}

#[derive(Debug, Error)]
pub enum DecomposeError {
    #[error("path is not the verified best response (cost {got_cost}, expected {want_cost})")]
    NotBestResponse { got_cost: String, want_cost: String },
    #[error(transparent)]
    Buyer(#[from] BuyerError),
    #[error("invalid path: {0}")]
    Path(#[from] PathError),
    #[error("instance is not reduction-shaped: {0}")]
    NotReductionShaped(String),
    #[error("gadget {0} boundary vertex missing from the path")]
    MissingBoundary(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PathEdge {
    Bypass,
    IntraIn,
    Answer,
    IntraOut,
    Chain,
    Shortcut,
}

struct PathView {
    vseq: Vec<VertexId>,
    kinds: Vec<PathEdge>,
    source_idx: Vec<Option<usize>>,
    sink_idx: Vec<Option<usize>>,
    gadget_answer: Vec<Option<usize>>,
}

fn classify_path(
    inst: &PricingInstance,
    map: &GadgetMap,
    witness: &PathWitness,
) -> Result<PathView, DecomposeError> {
    let roles = map.roles();
    let m = map.gadget_count();
    let vseq = witness.vertex_sequence(inst);
    let mut kinds = Vec::with_capacity(witness.edges.len());
    let mut source_idx = vec![None; m + 1];
    let mut sink_idx = vec![None; m + 1];
    let mut gadget_answer = vec![None; m];

    for (idx, &v) in vseq.iter().enumerate() {
        match roles.get(&v) {
            Some(GadgetVertexRole::Source(p)) => source_idx[*p] = Some(idx),
            Some(GadgetVertexRole::Sink(p)) => sink_idx[*p] = Some(idx),
            Some(_) => {}
            None => {
                return Err(DecomposeError::NotReductionShaped(format!(
                    "vertex {v} is not in the gadget map"
                )))
            }
        }
    }

    for (e, &id) in witness.edges.iter().enumerate() {
        let tail = roles[&vseq[e]];
        let head = roles[&vseq[e + 1]];
        let kind = match (tail, head, id.kind) {
            (GadgetVertexRole::Source(i), GadgetVertexRole::Sink(j), EdgeKind::Fixed) if i == j => {
                PathEdge::Bypass
            }
            (GadgetVertexRole::Source(i), GadgetVertexRole::AnswerU(j, _), EdgeKind::Fixed)
                if i == j =>
            {
                PathEdge::IntraIn
            }
            (GadgetVertexRole::AnswerU(i, a), GadgetVertexRole::AnswerV(j, b), EdgeKind::Var)
                if i == j && a == b =>
            {
                gadget_answer[i - 1] = Some(a);
                PathEdge::Answer
            }
            (GadgetVertexRole::AnswerV(i, _), GadgetVertexRole::Sink(j), EdgeKind::Fixed)
                if i == j =>
            {
                PathEdge::IntraOut
            }
            (GadgetVertexRole::Sink(i), GadgetVertexRole::Source(j), EdgeKind::Fixed)
                if j == i + 1 =>
            {
                PathEdge::Chain
            }
            (GadgetVertexRole::AnswerV(i, _), GadgetVertexRole::AnswerU(j, _), EdgeKind::Fixed)
                if j > i =>
            {
                PathEdge::Shortcut
            }
            _ => {
                return Err(DecomposeError::NotReductionShaped(format!(
                    "edge {id} does not fit the gadget layout"
                )))
            }
        };
        kinds.push(kind);
    }
    Ok(PathView {
        vseq,
        kinds,
        source_idx,
        sink_idx,
        gadget_answer,
    })
}

#[derive(Debug, Clone, Copy)]
struct Interval {
    role: Role,
    start: usize,
    end: usize,
}

fn segment_revenue(inst: &PricingInstance, prices: &PriceAssignment, edges: &[EdgeId]) -> Rat {
    let mut revenue = Rat::zero();
    for &id in edges {
        if id.kind == EdgeKind::Var {
            let label = &inst.variable_edges[id.index].label;
            if let Some(Price::Finite(p)) = prices.get(label) {
                revenue += p;
            }
        }
    }
    revenue
}

fn materialize(
    inst: &PricingInstance,
    prices: &PriceAssignment,
    witness: &PathWitness,
    view: &PathView,
    intervals: &[Interval],
) -> Result<Decomposition, DecomposeError> {
    let mut segments = Vec::with_capacity(intervals.len());
    for iv in intervals {
        let lo = view.source_idx[iv.start].ok_or(DecomposeError::MissingBoundary(iv.start))?;
        let hi = view.sink_idx[iv.end].ok_or(DecomposeError::MissingBoundary(iv.end))?;
        let edges: Vec<EdgeId> = witness.edges[lo..hi].to_vec();
        let revenue = segment_revenue(inst, prices, &edges);
        segments.push(Segment {
            role: iv.role,
            start_gadget: iv.start,
            end_gadget: iv.end,
            edges,
            revenue,
        });
    }
    Ok(Decomposition {
        segments,
        path: witness.clone(),
        gadget_answer: view.gadget_answer.clone(),
        vseq: view.vseq.clone(),
        source_idx: view.source_idx.clone(),
        sink_idx: view.sink_idx.clone(),
    })
}

fn run_phase1(
    inst: &PricingInstance,
    map: &GadgetMap,
    prices: &PriceAssignment,
    witness: &PathWitness,
) -> Result<Decomposition, DecomposeError> {
    let view = classify_path(inst, map, witness)?;
    let m = map.gadget_count();
    let roles = map.roles();
    let mut intervals = vec![Interval {
        role: Role::R,
        start: 1,
        end: m,
    }];

    // Contained shortcuts, left to right along the path.
    for (e, kind) in view.kinds.iter().enumerate() {
        if *kind != PathEdge::Shortcut {
            continue;
        }
        // Last source before the shortcut tail, first sink after its head.
        let mut i = None;
        for idx in (0..=e).rev() {
            if let Some(GadgetVertexRole::Source(p)) = roles.get(&view.vseq[idx]) {
                i = Some(*p);
                break;
            }
        }
        let mut j = None;
        for idx in (e + 1)..view.vseq.len() {
            if let Some(GadgetVertexRole::Sink(p)) = roles.get(&view.vseq[idx]) {
                j = Some(*p);
                break;
            }
        }
        let (i, j) = (
            i.expect("path starts at a source"),
            j.expect("path ends at a sink"),
        );
        let Some(slot) = intervals.iter().position(|iv| iv.start <= i && j <= iv.end) else {
            // Inside an already-cut S span.
            continue;
        };
        if intervals[slot].role != Role::R {
            continue;
        }
        let old = intervals[slot];
        let mut replacement = Vec::new();
        if i > old.start {
            replacement.push(Interval {
                role: Role::R,
                start: old.start,
                end: i - 1,
            });
        }
        replacement.push(Interval {
            role: Role::S,
            start: i,
            end: j,
        });
        if j + 1 <= old.end {
            replacement.push(Interval {
                role: Role::R,
                start: j + 1,
                end: old.end,
            });
        }
        intervals.splice(slot..=slot, replacement);
    }
    materialize(inst, prices, witness, &view, &intervals)
}

/// Phase 1 on a verified best response.
pub fn phase1(
    inst: &PricingInstance,
    map: &GadgetMap,
    prices: &PriceAssignment,
    witness: &PathWitness,
) -> Result<Decomposition, DecomposeError> {
    let reference = best_response(inst, prices)?;
    if reference.edges != witness.edges {
        return Err(DecomposeError::NotBestResponse {
            got_cost: fmt_rat(&witness.cost),
            want_cost: fmt_rat(&reference.cost),
        });
    }
    run_phase1(inst, map, prices, witness)
}

/// Phase 1 on an arbitrary (still structurally valid) source-sink path.
/// The revenue bounds proved for best responses need not hold here; this
/// entry point exists to trace hypothetical paths.
pub fn phase1_trace(
    inst: &PricingInstance,
    map: &GadgetMap,
    prices: &PriceAssignment,
    edges: Vec<EdgeId>,
) -> Result<Decomposition, DecomposeError> {
    let witness = make_witness(inst, prices, edges)?;
    run_phase1(inst, map, prices, &witness)
}

/// Phase 2: absorb spans that induce shortcuts between R segments.
pub fn phase2(
    inst: &PricingInstance,
    map: &GadgetMap,
    prices: &PriceAssignment,
    decomp: &Decomposition,
) -> Result<Decomposition, DecomposeError> {
    let m = map.gadget_count();
    let shortcut_index = map.shortcuts_from();
    let path_edges: std::collections::HashSet<(VertexId, VertexId)> = decomp
        .path
        .edges
        .iter()
        .map(|&id| inst.edge_endpoints(id))
        .collect();
    let vertex_of: HashMap<(usize, usize, bool), VertexId> = map
        .gadgets
        .iter()
        .flat_map(|g| {
            g.answers.iter().enumerate().flat_map(move |(a, ans)| {
                [
                    ((g.position, a, false), ans.u),
                    ((g.position, a, true), ans.v),
                ]
            })
        })
        .collect();

    let mut intervals: Vec<Interval> = decomp
        .segments
        .iter()
        .map(|s| Interval {
            role: s.role,
            start: s.start_gadget,
            end: s.end_gadget,
        })
        .collect();

    let covering = |intervals: &[Interval], p: usize| -> Option<usize> {
        intervals.iter().position(|iv| iv.start <= p && p <= iv.end)
    };

    let mut i = 1usize;
    while i <= m {
        let Some(slot) = covering(&intervals, i) else {
            i += 1;
            continue;
        };
        if intervals[slot].role != Role::R {
            i += 1;
            continue;
        }
        let Some(a_i) = decomp.gadget_answer[i - 1] else {
            i += 1;
            continue;
        };
        // Shortcuts leaving v_i^{a_i} toward a u vertex that the path uses
        // inside an R segment; take the farthest target.
        let mut target: Option<(usize, usize)> = None;
        if let Some(list) = shortcut_index.get(&(i, a_i)) {
            for sc in list {
                let j = sc.to_pos;
                if decomp.gadget_answer[j - 1] != Some(sc.to_answer) {
                    continue;
                }
                let Some(tslot) = covering(&intervals, j) else {
                    continue;
                };
                if intervals[tslot].role != Role::R {
                    continue;
                }
                // Skip shortcuts that are edges of the path itself.
                let tail = vertex_of[&(i, a_i, true)];
                let head = vertex_of[&(j, sc.to_answer, false)];
                if path_edges.contains(&(tail, head)) {
                    continue;
                }
                if target.map_or(true, |(tj, _)| j > tj) {
                    target = Some((j, sc.to_answer));
                }
            }
        }
        let Some((j, _)) = target else {
            i += 1;
            continue;
        };
        // Remove everything intersecting [i..j]; keep the outer remnants.
        let left_slot = covering(&intervals, i).unwrap();
        let right_slot = covering(&intervals, j).unwrap();
        let left = intervals[left_slot];
        let right = intervals[right_slot];
        let mut replacement = Vec::new();
        if left.start < i {
            replacement.push(Interval {
                role: Role::R,
                start: left.start,
                end: i - 1,
            });
        }
        replacement.push(Interval {
            role: Role::T,
            start: i,
            end: j,
        });
        if right.end > j {
            replacement.push(Interval {
                role: Role::R,
                start: j + 1,
                end: right.end,
            });
        }
        intervals.splice(left_slot..=right_slot, replacement);
        i += 1;
    }

    let view = PathView {
        vseq: decomp.vseq.clone(),
        kinds: Vec::new(),
        source_idx: decomp.source_idx.clone(),
        sink_idx: decomp.sink_idx.clone(),
        gadget_answer: decomp.gadget_answer.clone(),
    };
    materialize(inst, prices, &decomp.path, &view, &intervals)
}

/// Best response plus both phases.
pub fn decompose(
    inst: &PricingInstance,
    map: &GadgetMap,
    prices: &PriceAssignment,
) -> Result<(PathWitness, Decomposition), DecomposeError> {
    let witness = best_response(inst, prices)?;
    let d1 = run_phase1(inst, map, prices, &witness)?;
    let d2 = phase2(inst, map, prices, &d1)?;
    Ok((witness, d2))
}

#[derive(Debug, Clone)]
pub struct PropertyCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct PropertyReport {
    pub checks: Vec<PropertyCheck>,
}

impl PropertyReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn ceil_inverse(delta: &Rat) -> BigInt {
    // ⌈1/δ⌉ for δ = n/d.
    let n = delta.numer();
    let d = delta.denom();
    (d + n - BigInt::one()) / n
}

/// Checks the decomposition facts (a)–(g). Far-window cardinality and the
/// aggregate bound only apply in far mode; all-shortcut instances admit
/// short spans that defeat them.
pub fn verify_properties(
    inst: &PricingInstance,
    map: &GadgetMap,
    prices: &PriceAssignment,
    decomp: &Decomposition,
    delta: &Rat,
    mode: ShortcutMode,
) -> PropertyReport {
    let m = map.gadget_count();
    let mut checks = Vec::new();

    // (a) Contiguous source-sink partition covering [1..M].
    let mut partition_ok = !decomp.segments.is_empty()
        && decomp.segments.first().map(|s| s.start_gadget) == Some(1)
        && decomp.segments.last().map(|s| s.end_gadget) == Some(m);
    let mut len_sum = 0usize;
    for (idx, seg) in decomp.segments.iter().enumerate() {
        len_sum += seg.len();
        if idx > 0 && decomp.segments[idx - 1].end_gadget + 1 != seg.start_gadget {
            partition_ok = false;
        }
    }
    partition_ok &= len_sum == m;
    checks.push(PropertyCheck {
        name: "a_partition",
        passed: partition_ok,
        detail: format!(
            "segments {}, total len {len_sum} of {m}",
            decomp.segments.len()
        ),
    });

    // (b) Prices on R segments are at most 1.
    let mut max_r_price: Option<Rat> = None;
    let mut b_ok = true;
    for seg in decomp.segments.iter().filter(|s| s.role == Role::R) {
        for &id in &seg.edges {
            if id.kind == EdgeKind::Var {
                let label = &inst.variable_edges[id.index].label;
                if let Some(Price::Finite(p)) = prices.get(label) {
                    if *p > rat_int(1) {
                        b_ok = false;
                    }
                    max_r_price = Some(match max_r_price.take() {
                        None => p.clone(),
                        Some(old) => old.max(p.clone()),
                    });
                }
            }
        }
    }
    checks.push(PropertyCheck {
        name: "b_price_cap",
        passed: b_ok,
        detail: match &max_r_price {
            Some(p) => format!("max R price {}", fmt_rat(p)),
            None => "no pricable edges in R".into(),
        },
    });

    // (c) No instance shortcut joins two pricable edges that both lie in R.
    let role_of_pos =
        |p: usize| -> Option<Role> { decomp.segment_of(p).map(|s| decomp.segments[s].role) };
    let mut c_ok = true;
    let mut c_witness = String::from("none");
    for sc in &map.shortcuts {
        let from_used = decomp.gadget_answer[sc.from_pos - 1] == Some(sc.from_answer)
            && role_of_pos(sc.from_pos) == Some(Role::R);
        let to_used = decomp.gadget_answer[sc.to_pos - 1] == Some(sc.to_answer)
            && role_of_pos(sc.to_pos) == Some(Role::R);
        if from_used && to_used {
            c_ok = false;
            c_witness = format!("shortcut {}->{}", sc.from_pos, sc.to_pos);
        }
    }
    checks.push(PropertyCheck {
        name: "c_no_r_shortcut",
        passed: c_ok,
        detail: c_witness,
    });

    // (d) Each S segment: rev ≤ (len+1)/2.
    let mut d_ok = true;
    let mut d_detail = String::from("no S segments");
    for seg in decomp.segments.iter().filter(|s| s.role == Role::S) {
        let bound = rat((seg.len() + 1) as i64, 2);
        if seg.revenue > bound {
            d_ok = false;
        }
        d_detail = format!(
            "last S [{}..{}] rev {} bound {}",
            seg.start_gadget,
            seg.end_gadget,
            fmt_rat(&seg.revenue),
            fmt_rat(&bound)
        );
    }
    checks.push(PropertyCheck {
        name: "d_s_revenue",
        passed: d_ok,
        detail: d_detail,
    });

    // (e) Each T segment: rev ≤ (len−1)/2 + 2.
    let mut e_ok = true;
    let mut e_detail = String::from("no T segments");
    for seg in decomp.segments.iter().filter(|s| s.role == Role::T) {
        let bound = rat((seg.len() - 1) as i64, 2) + rat_int(2);
        if seg.revenue > bound {
            e_ok = false;
        }
        e_detail = format!(
            "last T [{}..{}] rev {} bound {}",
            seg.start_gadget,
            seg.end_gadget,
            fmt_rat(&seg.revenue),
            fmt_rat(&bound)
        );
    }
    checks.push(PropertyCheck {
        name: "e_t_revenue",
        passed: e_ok,
        detail: e_detail,
    });

    let s_count = decomp.segments.iter().filter(|s| s.role == Role::S).count();
    let t_count = decomp.segments.iter().filter(|s| s.role == Role::T).count();

    if mode == ShortcutMode::Far {
        // (f) Segment counts against the far window.
        let cap = ceil_inverse(delta);
        let f_ok = BigInt::from(s_count) <= cap && BigInt::from(t_count) <= cap;
        checks.push(PropertyCheck {
            name: "f_cardinality",
            passed: f_ok,
            detail: format!("|S|={s_count} |T|={t_count} cap {cap}"),
        });

        // (g) Aggregate bound over S ∪ T.
        let mut rev_sum = Rat::zero();
        let mut len_sum = 0usize;
        for seg in decomp.segments.iter().filter(|s| s.role != Role::R) {
            rev_sum += &seg.revenue;
            len_sum += seg.len();
        }
        let bound = rat(len_sum as i64, 2) + rat(s_count as i64, 2) + rat_int(2 * t_count as i64);
        checks.push(PropertyCheck {
            name: "g_aggregate",
            passed: rev_sum <= bound,
            detail: format!("rev {} bound {}", fmt_rat(&rev_sum), fmt_rat(&bound)),
        });
    }

    PropertyReport { checks }
}

/// Contained shortcut costs on each S segment telescope to (len−1)/2.
pub fn telescoping_ok(inst: &PricingInstance, map: &GadgetMap, decomp: &Decomposition) -> bool {
    let roles = map.roles();
    for seg in decomp.segments.iter().filter(|s| s.role == Role::S) {
        let mut shortcut_total = Rat::zero();
        for &id in &seg.edges {
            if id.kind != EdgeKind::Fixed {
                continue;
            }
            let (tail, head) = inst.edge_endpoints(id);
            if let (Some(GadgetVertexRole::AnswerV(i, _)), Some(GadgetVertexRole::AnswerU(j, _))) =
                (roles.get(&tail), roles.get(&head))
            {
                if j > i {
                    shortcut_total += &inst.fixed_edges[id.index].cost;
                }
            }
        }
        if shortcut_total != rat((seg.len() - 1) as i64, 2) {
            return false;
        }
    }
    true
}
