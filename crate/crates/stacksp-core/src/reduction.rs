//! Building pricing instances from ordered constraint sequences.
//!
//! Gadget `i` has a source `s_i`, a sink `t_i`, a cost-1 bypass edge, and
//! one pricable edge `u_i^a -> v_i^a` per first-prover answer `a`. Gadgets
//! chain through cost-0 edges `t_i -> s_{i+1}`. Shortcuts are fixed edges
//! `v_i^{a_i} -> u_j^{a_j}` of cost `(j-i)/2` between positions that share
//! a query and carry inconsistent answers; in far mode they are emitted
//! only when both positions are δ-far.
//!
//! Vertex ids are laid out gadget-major (`s, u^0, v^0, u^1, v^1, …, t`), so
//! construction directly emits the canonical sorted edge order and the
//! files are byte-reproducible.

use crate::csp::{ConstraintSystem, GlobalAssignment};
use crate::farseq::{delta_far_flags, SequenceOrder};
use crate::instance::{FixedEdge, PriceAssignment, PricingInstance, VarEdge, VertexId};
use crate::scalar::{fmt_rat, parse_rat, rat, rat_int, Price, Rat};
use num::BigUint;
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShortcutMode {
    Far,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderMode {
    Identity,
    Random,
    Derandomized,
}

#[derive(Debug, Clone)]
pub struct GenParams {
    pub ell: usize,
    pub delta: Rat,
    pub gamma: Rat,
    pub shortcut_mode: ShortcutMode,
    pub order_mode: OrderMode,
    pub seed: u64,
    pub max_vertices: usize,
    pub max_paths: u128,
}

impl GenParams {
    /// The analyzed parameter scaling for a target gap slack ε:
    /// δ = (ε/10)·5^(−ℓ) and γ = ε/3. ε itself is never consumed by the
    /// construction; δ, γ and ℓ are the authoritative inputs.
    pub fn epsilon_scaling(ell: usize, epsilon: &Rat) -> (Rat, Rat) {
        let five_pow = Rat::from_integer(num::BigInt::from(5u32).pow(ell as u32));
        let delta = epsilon / rat_int(10) / five_pow;
        let gamma = epsilon / rat_int(3);
        (delta, gamma)
    }

    pub fn desk_defaults(ell: usize, delta: Rat, gamma: Rat) -> Self {
        GenParams {
            ell,
            delta,
            gamma,
            shortcut_mode: ShortcutMode::Far,
            order_mode: OrderMode::Identity,
            seed: 0,
            max_vertices: 1 << 20,
            max_paths: 1 << 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnswerVertices {
    pub u: VertexId,
    pub v: VertexId,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GadgetInfo {
    /// 1-based position in the sequence.
    pub position: usize,
    /// 1-based canonical constraint id.
    pub constraint_id: usize,
    pub far: bool,
    pub source: VertexId,
    pub sink: VertexId,
    pub answers: Vec<AnswerVertices>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Shortcut {
    pub from_pos: usize,
    pub from_answer: usize,
    pub to_pos: usize,
    pub to_answer: usize,
    pub cost: Rat,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GadgetMap {
    pub gadgets: Vec<GadgetInfo>,
    pub shortcuts: Vec<Shortcut>,
}

/// Role of a vertex inside the gadget layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GadgetVertexRole {
    Source(usize),
    Sink(usize),
    AnswerU(usize, usize),
    AnswerV(usize, usize),
}

impl GadgetMap {
    pub fn gadget_count(&self) -> usize {
        self.gadgets.len()
    }

    pub fn roles(&self) -> HashMap<VertexId, GadgetVertexRole> {
        let mut roles = HashMap::new();
        for g in &self.gadgets {
            roles.insert(g.source, GadgetVertexRole::Source(g.position));
            roles.insert(g.sink, GadgetVertexRole::Sink(g.position));
            for (a, answer) in g.answers.iter().enumerate() {
                roles.insert(answer.u, GadgetVertexRole::AnswerU(g.position, a));
                roles.insert(answer.v, GadgetVertexRole::AnswerV(g.position, a));
            }
        }
        roles
    }

    /// Shortcuts indexed by their source (position, answer).
    pub fn shortcuts_from(&self) -> HashMap<(usize, usize), Vec<&Shortcut>> {
        let mut index: HashMap<(usize, usize), Vec<&Shortcut>> = HashMap::new();
        for sc in &self.shortcuts {
            index
                .entry((sc.from_pos, sc.from_answer))
                .or_default()
                .push(sc);
        }
        index
    }

    pub fn serialize(&self) -> String {
        let mut out = String::from("# stacksp-map v1\n");
        for g in &self.gadgets {
            out.push_str(&format!(
                "gadget {} constraint {} far {} s {} t {}\n",
                g.position,
                g.constraint_id,
                u8::from(g.far),
                g.source,
                g.sink
            ));
            for (a, answer) in g.answers.iter().enumerate() {
                out.push_str(&format!(
                    "answer {} {} u {} v {} label {}\n",
                    g.position, a, answer.u, answer.v, answer.label
                ));
            }
        }
        for sc in &self.shortcuts {
            out.push_str(&format!(
                "shortcut {} {} {} {} {}\n",
                sc.from_pos,
                sc.from_answer,
                sc.to_pos,
                sc.to_answer,
                fmt_rat(&sc.cost)
            ));
        }
        out
    }

    pub fn parse(text: &str) -> Result<GadgetMap, ReductionError> {
        let mut gadgets: Vec<GadgetInfo> = Vec::new();
        let mut shortcuts = Vec::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let tokens: Vec<&str> = line.split_whitespace().collect();
            let bad = |msg: &str| ReductionError::MapFormat {
                line: no + 1,
                message: msg.into(),
            };
            match tokens[0] {
                "gadget" => {
                    if tokens.len() != 10 || tokens[2] != "constraint" || tokens[4] != "far" {
                        return Err(bad("malformed gadget line"));
                    }
                    gadgets.push(GadgetInfo {
                        position: tokens[1].parse().map_err(|_| bad("bad position"))?,
                        constraint_id: tokens[3].parse().map_err(|_| bad("bad constraint id"))?,
                        far: tokens[5] == "1",
                        source: tokens[7].parse().map_err(|_| bad("bad source"))?,
                        sink: tokens[9].parse().map_err(|_| bad("bad sink"))?,
                        answers: Vec::new(),
                    });
                }
                "answer" => {
                    if tokens.len() != 9 {
                        return Err(bad("malformed answer line"));
                    }
                    let pos: usize = tokens[1].parse().map_err(|_| bad("bad position"))?;
                    let gadget = gadgets
                        .iter_mut()
                        .find(|g| g.position == pos)
                        .ok_or_else(|| bad("answer before its gadget"))?;
                    let index: usize = tokens[2].parse().map_err(|_| bad("bad answer index"))?;
                    if index != gadget.answers.len() {
                        return Err(bad("answers out of order"));
                    }
                    gadget.answers.push(AnswerVertices {
                        u: tokens[4].parse().map_err(|_| bad("bad u"))?,
                        v: tokens[6].parse().map_err(|_| bad("bad v"))?,
                        label: tokens[8].to_string(),
                    });
                }
                "shortcut" => {
                    if tokens.len() != 6 {
                        return Err(bad("malformed shortcut line"));
                    }
                    shortcuts.push(Shortcut {
                        from_pos: tokens[1].parse().map_err(|_| bad("bad from position"))?,
                        from_answer: tokens[2].parse().map_err(|_| bad("bad from answer"))?,
                        to_pos: tokens[3].parse().map_err(|_| bad("bad to position"))?,
                        to_answer: tokens[4].parse().map_err(|_| bad("bad to answer"))?,
                        cost: parse_rat(tokens[5]).map_err(|_| bad("bad cost"))?,
                    });
                }
                other => {
                    return Err(ReductionError::MapFormat {
                        line: no + 1,
                        message: format!("unknown keyword `{other}`"),
                    })
                }
            }
        }
        Ok(GadgetMap { gadgets, shortcuts })
    }
}

#[derive(Debug, Error)]
pub enum ReductionError {
    #[error("order length {got} does not match constraint count {expected}")]
    OrderMismatch { got: usize, expected: usize },
    #[error("projected size exceeds budget: {vertices} vertices > {max_vertices}")]
    BudgetExceeded {
        vertices: BigUint,
        max_vertices: usize,
    },
    #[error("map line {line}: {message}")]
    MapFormat { line: usize, message: String },
    #[error("assignment misses query of gadget {position}")]
    MissingQuery { position: usize },
    #[error("width must be 2 or 3")]
    BadWidth,
    #[error("clause count required: width-3 regular count 5n/3 needs n divisible by 3")]
    ClauseCountRequired,
}

/// Builds the pricing instance and its gadget map from an ordered sequence.
pub fn build_instance(
    cs: &ConstraintSystem,
    order: &SequenceOrder,
    params: &GenParams,
) -> Result<(PricingInstance, GadgetMap), ReductionError> {
    let m = cs.constraint_count();
    if order.len() != m {
        return Err(ReductionError::OrderMismatch {
            got: order.len(),
            expected: m,
        });
    }
    let k = cs.prover1_answer_count(0);
    debug_assert!((0..m).all(|r| cs.prover1_answer_count(r) == k));
    let per_gadget = 2 * k + 2;
    let vertices = BigUint::from(m) * BigUint::from(per_gadget);
    if vertices > BigUint::from(params.max_vertices) {
        return Err(ReductionError::BudgetExceeded {
            vertices,
            max_vertices: params.max_vertices,
        });
    }
    let vertex_count = m * per_gadget;

    let far = delta_far_flags(cs, order);
    let base = |pos: usize| (pos - 1) * per_gadget; // 1-based position
    let s_of = |pos: usize| base(pos);
    let u_of = |pos: usize, a: usize| base(pos) + 1 + 2 * a;
    let v_of = |pos: usize, a: usize| base(pos) + 2 + 2 * a;
    let t_of = |pos: usize| base(pos) + 2 * k + 1;

    // Positions j > i sharing a query with i, per position.
    let neighbors = cs.shared_neighbors();
    let mut pos_of_constraint = vec![0usize; m];
    for (idx, &c) in order.perm.iter().enumerate() {
        pos_of_constraint[c] = idx + 1;
    }
    let mut later_sharing: Vec<Vec<usize>> = vec![Vec::new(); m + 1];
    for i in 1..=m {
        let r = order.perm[i - 1];
        let mut list: Vec<usize> = neighbors[r]
            .iter()
            .map(|&s| pos_of_constraint[s])
            .filter(|&j| j > i)
            .collect();
        list.sort_unstable();
        later_sharing[i] = list;
    }

    let mut fixed_edges = Vec::new();
    let mut variable_edges = Vec::new();
    let mut map_shortcuts = Vec::new();
    let mut gadgets = Vec::with_capacity(m);

    for i in 1..=m {
        let r = order.perm[i - 1];
        // Source block: s -> u^a for every a, then the bypass s -> t.
        for a in 0..k {
            fixed_edges.push(FixedEdge {
                tail: s_of(i),
                head: u_of(i, a),
                cost: rat_int(0),
            });
        }
        fixed_edges.push(FixedEdge {
            tail: s_of(i),
            head: t_of(i),
            cost: rat_int(1),
        });

        let mut answers = Vec::with_capacity(k);
        for a in 0..k {
            let label = format!("g{i}:a{a}");
            variable_edges.push(VarEdge {
                tail: u_of(i, a),
                head: v_of(i, a),
                label: label.clone(),
            });
            answers.push(AnswerVertices {
                u: u_of(i, a),
                v: v_of(i, a),
                label,
            });

            // v^a -> t, then shortcuts out of v^a in (j, b) order.
            fixed_edges.push(FixedEdge {
                tail: v_of(i, a),
                head: t_of(i),
                cost: rat_int(0),
            });
            for &j in &later_sharing[i] {
                if params.shortcut_mode == ShortcutMode::Far && !(far[i - 1] && far[j - 1]) {
                    continue;
                }
                let rj = order.perm[j - 1];
                let cost = rat((j - i) as i64, 2);
                let q1_shared = cs.q1_id[r] == cs.q1_id[rj];
                for b in 0..k {
                    let inconsistent = if q1_shared {
                        a != b
                    } else {
                        cs.project(r, a).unwrap() != cs.project(rj, b).unwrap()
                    };
                    if inconsistent {
                        fixed_edges.push(FixedEdge {
                            tail: v_of(i, a),
                            head: u_of(j, b),
                            cost: cost.clone(),
                        });
                        map_shortcuts.push(Shortcut {
                            from_pos: i,
                            from_answer: a,
                            to_pos: j,
                            to_answer: b,
                            cost: cost.clone(),
                        });
                    }
                }
            }
        }
        if i < m {
            fixed_edges.push(FixedEdge {
                tail: t_of(i),
                head: s_of(i + 1),
                cost: rat_int(0),
            });
        }
        gadgets.push(GadgetInfo {
            position: i,
            constraint_id: r + 1,
            far: far[i - 1],
            source: s_of(i),
            sink: t_of(i),
            answers,
        });
    }

    map_shortcuts.sort_by_key(|sc| (sc.from_pos, sc.from_answer, sc.to_pos, sc.to_answer));
    let instance = PricingInstance {
        vertex_count,
        source: s_of(1),
        sink: t_of(m),
        fixed_edges,
        variable_edges,
        meta: Vec::new(),
    };
    debug_assert_eq!(
        instance,
        instance.canonical(),
        "construction must be canonical"
    );
    Ok((
        instance,
        GadgetMap {
            gadgets,
            shortcuts: map_shortcuts,
        },
    ))
}

/// Pricing that realizes a satisfying assignment: price 1 on the answer
/// edge selected by the assignment in each gadget, infinity elsewhere.
pub fn yes_pricing(
    cs: &ConstraintSystem,
    map: &GadgetMap,
    assignment: &GlobalAssignment,
) -> Result<PriceAssignment, ReductionError> {
    let mut prices = PriceAssignment::new();
    for g in &map.gadgets {
        let r = g.constraint_id - 1;
        let chosen = *assignment
            .q1
            .get(cs.q1_key(r))
            .ok_or(ReductionError::MissingQuery {
                position: g.position,
            })?;
        for (a, answer) in g.answers.iter().enumerate() {
            let price = if a == chosen {
                Price::Finite(rat_int(1))
            } else {
                Price::Inf
            };
            prices.set(answer.label.clone(), price);
        }
    }
    Ok(prices)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeConflict {
    pub position: usize,
    pub query: String,
    pub existing: usize,
    pub conflicting: usize,
}

#[derive(Debug, Clone)]
pub struct DecodeOutcome {
    pub assignment: GlobalAssignment,
    pub satisfied: usize,
    pub conflicts: Vec<DecodeConflict>,
    /// Far-gadget pricable edges found on R segments (the decoded set).
    pub far_edges: usize,
}

/// Reads an assignment back off the R segments: each pricable edge at a far
/// position fixes the first prover's answer there and, via the projection,
/// the second prover's. Conflicting forced answers are reported; on a
/// verified decomposition of a best response there are none.
pub fn decode_assignment(
    cs: &ConstraintSystem,
    map: &GadgetMap,
    decomp: &crate::decomposition::Decomposition,
) -> DecodeOutcome {
    let mut assignment = GlobalAssignment::default();
    let mut conflicts = Vec::new();
    let mut far_edges = 0usize;
    for seg in decomp
        .segments
        .iter()
        .filter(|s| s.role == crate::decomposition::Role::R)
    {
        for position in seg.start_gadget..=seg.end_gadget {
            let gadget = &map.gadgets[position - 1];
            debug_assert_eq!(gadget.position, position);
            if !gadget.far {
                continue;
            }
            let Some(answer) = decomp.gadget_answer[position - 1] else {
                continue;
            };
            far_edges += 1;
            let r = gadget.constraint_id - 1;
            let q1 = cs.q1_key(r).to_vec();
            match assignment.q1.get(&q1) {
                Some(&existing) if existing != answer => conflicts.push(DecodeConflict {
                    position,
                    query: format!("q1 {q1:?}"),
                    existing,
                    conflicting: answer,
                }),
                _ => {
                    assignment.q1.insert(q1, answer);
                }
            }
            let projected = cs.project(r, answer).expect("answer on the built instance");
            let q2 = cs.q2_key(r);
            match assignment.q2.get(&q2) {
                Some(&existing) if existing != projected => conflicts.push(DecodeConflict {
                    position,
                    query: format!("q2 {q2:?}"),
                    existing,
                    conflicting: projected,
                }),
                _ => {
                    assignment.q2.insert(q2, projected);
                }
            }
        }
    }
    let satisfied = crate::csp::count_satisfied(cs, &assignment);
    DecodeOutcome {
        assignment,
        satisfied,
        conflicts,
        far_edges,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SizeReport {
    pub constraint_count: BigUint,
    pub vertices_per_gadget: BigUint,
    pub total_vertices: BigUint,
    pub gadget_edges_per_gadget: BigUint,
    pub chain_edges: BigUint,
    pub shortcut_pair_bound: BigUint,
}

/// Predicted construction sizes. For width 3 the regular clause count 5n/3
/// is assumed when `clauses` is not given; width 2 requires it.
pub fn size_report(
    n: usize,
    ell: usize,
    width: usize,
    clauses: Option<usize>,
) -> Result<SizeReport, ReductionError> {
    if width != 2 && width != 3 {
        return Err(ReductionError::BadWidth);
    }
    let clause_count = match clauses {
        Some(c) => c,
        None if width == 3 && n % 3 == 0 => 5 * n / 3,
        None => return Err(ReductionError::ClauseCountRequired),
    };
    let answers_per_clause = (1usize << width) - 1;
    let m = BigUint::from(width * clause_count).pow(ell as u32);
    let k = BigUint::from(answers_per_clause).pow(ell as u32);
    let vertices_per_gadget = BigUint::from(2u32) + BigUint::from(2u32) * &k;
    let total_vertices = &m * &vertices_per_gadget;
    let gadget_edges_per_gadget = BigUint::from(1u32) + BigUint::from(3u32) * &k;
    let chain_edges = &m - BigUint::from(1u32).min(m.clone());
    let shortcut_pair_bound = &k * &k;
    Ok(SizeReport {
        constraint_count: m,
        vertices_per_gadget,
        total_vertices,
        gadget_edges_per_gadget,
        chain_edges,
        shortcut_pair_bound,
    })
}
