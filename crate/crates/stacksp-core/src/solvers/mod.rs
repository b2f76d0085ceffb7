//! Pricing solvers: the exact path-fixing optimum, the half-price
//! 2-approximation over block-structured instances, and brute-force
//! oracles.
//!
//! The exact solver enumerates candidate bought paths. For a candidate `P`
//! every off-path pricable edge is priced infinite, so the client's
//! alternatives live in the graph restricted to fixed edges plus `P`'s own
//! pricable edges; one linear constraint per alternative keeps `P` weakly
//! cheapest, and the revenue program is solved exactly. Any optimal
//! solution survives this transformation, so scanning candidates is
//! complete. Candidates sharing a pricable-edge set give the same program,
//! and only the fixed-cost-minimal one is feasible, so paths are grouped
//! before solving.

pub mod simplex;

use crate::buyer::{best_response, count_paths, enumerate_paths, fixed_baseline_cost, BuyerError};
use crate::instance::{
    EdgeId, EdgeKind, FixedEdge, PathWitness, PriceAssignment, PricingInstance, VarEdge, VertexId,
};
use crate::reduction::{GadgetMap, GadgetVertexRole};
use crate::scalar::{fmt_rat, parse_rat, rat_int, Price, Rat};
use num::bigint::BigInt;
use num::{BigUint, Integer, One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use simplex::{maximize, LpOutcome, LpProblem};
use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::atomic::{AtomicBool, Ordering as AtomicOrdering};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("path count {count} exceeds budget {budget}")]
    BudgetExceeded { budget: u128, count: BigUint },
    #[error(transparent)]
    Buyer(#[from] BuyerError),
    #[error("candidate grid size {size} exceeds budget {budget}")]
    GridBudgetExceeded { size: BigUint, budget: u128 },
    #[error("not a valid candidate path: {0}")]
    BadPath(String),
    #[error("instance is not reduction-shaped: {0}")]
    NotReductionShaped(String),
    #[error("invalid block instance: {0}")]
    BadCsInstance(String),
    #[error("cs line {line}: {message}")]
    CsFormat { line: usize, message: String },
    #[error("solver self-check failed: {0}")]
    SelfCheck(String),
}

// ---------------------------------------------------------------------------
// Block-structured (constraint satisfaction) instances

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsBlock {
    pub cost: Rat,
    pub path_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsShortcut {
    /// 1-based block and path indices; blocks strictly increase.
    pub from_block: usize,
    pub from_path: usize,
    pub to_block: usize,
    pub to_path: usize,
    pub cost: Rat,
}

/// A fixed-cost spine with parallel pricable constraint paths per block and
/// forward shortcut edges between constraint-path vertices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsInstance {
    pub blocks: Vec<CsBlock>,
    pub shortcuts: Vec<CsShortcut>,
}

impl CsInstance {
    pub fn total_cost(&self) -> Rat {
        self.blocks.iter().fold(Rat::zero(), |acc, b| acc + &b.cost)
    }

    pub fn validate(&self) -> Result<(), SolveError> {
        if self.blocks.is_empty() {
            return Err(SolveError::BadCsInstance("no blocks".into()));
        }
        for (i, b) in self.blocks.iter().enumerate() {
            if b.cost <= Rat::zero() {
                return Err(SolveError::BadCsInstance(format!(
                    "block {} cost not positive",
                    i + 1
                )));
            }
            if b.path_count == 0 {
                return Err(SolveError::BadCsInstance(format!(
                    "block {} has no paths",
                    i + 1
                )));
            }
        }
        for sc in &self.shortcuts {
            if sc.from_block >= sc.to_block {
                return Err(SolveError::BadCsInstance(format!(
                    "shortcut {} -> {} must go strictly forward",
                    sc.from_block, sc.to_block
                )));
            }
            let ok = sc.from_block >= 1
                && sc.to_block <= self.blocks.len()
                && sc.from_path >= 1
                && sc.from_path <= self.blocks[sc.from_block - 1].path_count
                && sc.to_path >= 1
                && sc.to_path <= self.blocks[sc.to_block - 1].path_count;
            if !ok {
                return Err(SolveError::BadCsInstance(
                    "shortcut indices out of range".into(),
                ));
            }
            if sc.cost.is_negative() {
                return Err(SolveError::BadCsInstance("negative shortcut cost".into()));
            }
        }
        Ok(())
    }

    pub fn serialize(&self) -> String {
        let mut out = String::from("# stacksp-cs v1\n");
        out.push_str(&format!("blocks {}\n", self.blocks.len()));
        for (i, b) in self.blocks.iter().enumerate() {
            out.push_str(&format!(
                "block {} {} {}\n",
                i + 1,
                fmt_rat(&b.cost),
                b.path_count
            ));
        }
        for sc in &self.shortcuts {
            out.push_str(&format!(
                "shortcut {} {} {} {} {}\n",
                sc.from_block,
                sc.from_path,
                sc.to_block,
                sc.to_path,
                fmt_rat(&sc.cost)
            ));
        }
        out
    }

    pub fn parse(text: &str) -> Result<CsInstance, SolveError> {
        let mut blocks: Vec<CsBlock> = Vec::new();
        let mut shortcuts = Vec::new();
        let mut declared: Option<usize> = None;
        for (no, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let tokens: Vec<&str> = line.split_whitespace().collect();
            let bad = |m: &str| SolveError::CsFormat {
                line: no + 1,
                message: m.into(),
            };
            match tokens[0] {
                "blocks" => {
                    declared = Some(
                        tokens
                            .get(1)
                            .and_then(|t| t.parse().ok())
                            .ok_or_else(|| bad("bad count"))?,
                    )
                }
                "block" => {
                    if tokens.len() != 4 {
                        return Err(bad("malformed block line"));
                    }
                    let index: usize = tokens[1].parse().map_err(|_| bad("bad index"))?;
                    if index != blocks.len() + 1 {
                        return Err(bad("blocks out of order"));
                    }
                    blocks.push(CsBlock {
                        cost: parse_rat(tokens[2]).map_err(|_| bad("bad cost"))?,
                        path_count: tokens[3].parse().map_err(|_| bad("bad path count"))?,
                    });
                }
                "shortcut" => {
                    if tokens.len() != 6 {
                        return Err(bad("malformed shortcut line"));
                    }
                    shortcuts.push(CsShortcut {
                        from_block: tokens[1].parse().map_err(|_| bad("bad index"))?,
                        from_path: tokens[2].parse().map_err(|_| bad("bad index"))?,
                        to_block: tokens[3].parse().map_err(|_| bad("bad index"))?,
                        to_path: tokens[4].parse().map_err(|_| bad("bad index"))?,
                        cost: parse_rat(tokens[5]).map_err(|_| bad("bad cost"))?,
                    });
                }
                other => return Err(bad(&format!("unknown keyword `{other}`"))),
            }
        }
        if let Some(d) = declared {
            if d != blocks.len() {
                return Err(SolveError::BadCsInstance("blocks count mismatch".into()));
            }
        }
        let cs = CsInstance { blocks, shortcuts };
        cs.validate()?;
        Ok(cs)
    }
}

/// Map from block structure to the vertices of the converted instance.
#[derive(Debug, Clone)]
pub struct CsLayout {
    pub spine: Vec<VertexId>,
    /// Per block, per path: (u, v, label).
    pub paths: Vec<Vec<(VertexId, VertexId, String)>>,
}

/// Converts a block instance to a pricing instance. Labels are `b<i>:p<j>`.
pub fn cs_to_pricing_instance(cs: &CsInstance) -> Result<(PricingInstance, CsLayout), SolveError> {
    cs.validate()?;
    let m = cs.blocks.len();
    let mut spine = Vec::with_capacity(m + 1);
    let mut paths: Vec<Vec<(VertexId, VertexId, String)>> = Vec::with_capacity(m);
    let mut next_id = 0usize;
    spine.push(next_id);
    next_id += 1;
    for (i, block) in cs.blocks.iter().enumerate() {
        let mut block_paths = Vec::with_capacity(block.path_count);
        for j in 0..block.path_count {
            block_paths.push((next_id, next_id + 1, format!("b{}:p{}", i + 1, j + 1)));
            next_id += 2;
        }
        paths.push(block_paths);
        spine.push(next_id);
        next_id += 1;
    }

    let mut fixed_edges = Vec::new();
    let mut variable_edges = Vec::new();
    for (i, block) in cs.blocks.iter().enumerate() {
        for &(u, _, _) in &paths[i] {
            fixed_edges.push(FixedEdge {
                tail: spine[i],
                head: u,
                cost: rat_int(0),
            });
        }
        fixed_edges.push(FixedEdge {
            tail: spine[i],
            head: spine[i + 1],
            cost: block.cost.clone(),
        });
        for &(u, v, ref label) in &paths[i] {
            variable_edges.push(VarEdge {
                tail: u,
                head: v,
                label: label.clone(),
            });
            fixed_edges.push(FixedEdge {
                tail: v,
                head: spine[i + 1],
                cost: rat_int(0),
            });
            for sc in &cs.shortcuts {
                if sc.from_block == i + 1 && paths[i][sc.from_path - 1].1 == v {
                    let head = paths[sc.to_block - 1][sc.to_path - 1].0;
                    fixed_edges.push(FixedEdge {
                        tail: v,
                        head,
                        cost: sc.cost.clone(),
                    });
                }
            }
        }
    }
    let instance = PricingInstance {
        vertex_count: next_id,
        source: spine[0],
        sink: spine[m],
        fixed_edges,
        variable_edges,
        meta: Vec::new(),
    }
    .canonical();
    Ok((instance, CsLayout { spine, paths }))
}

/// Views a generated reduction instance as a block instance: one block per
/// gadget with unit spine cost, one constraint path per answer, shortcuts
/// carried over. Fails on anything that does not match the gadget shape.
pub fn reduction_to_cs(inst: &PricingInstance, map: &GadgetMap) -> Result<CsInstance, SolveError> {
    let roles = map.roles();
    let m = map.gadget_count();
    let shape = |msg: String| SolveError::NotReductionShaped(msg);

    let expected_vertices = map
        .gadgets
        .iter()
        .map(|g| 2 + 2 * g.answers.len())
        .sum::<usize>();
    if inst.vertex_count != expected_vertices {
        return Err(shape("vertex count mismatch".into()));
    }

    let mut shortcut_costs: HashMap<(usize, usize, usize, usize), Rat> = HashMap::new();
    for sc in &map.shortcuts {
        shortcut_costs.insert(
            (sc.from_pos, sc.from_answer, sc.to_pos, sc.to_answer),
            sc.cost.clone(),
        );
    }

    let mut bypass_seen = vec![false; m + 1];
    let mut chain_seen = vec![false; m + 1];
    let mut shortcuts_seen = 0usize;
    for e in &inst.fixed_edges {
        let (Some(&tail), Some(&head)) = (roles.get(&e.tail), roles.get(&e.head)) else {
            return Err(shape(format!(
                "fixed edge {} -> {} outside gadgets",
                e.tail, e.head
            )));
        };
        match (tail, head) {
            (GadgetVertexRole::Source(i), GadgetVertexRole::Sink(j)) if i == j => {
                if e.cost != rat_int(1) {
                    return Err(shape(format!(
                        "bypass of gadget {i} has cost {}",
                        fmt_rat(&e.cost)
                    )));
                }
                bypass_seen[i] = true;
            }
            (GadgetVertexRole::Source(i), GadgetVertexRole::AnswerU(j, _)) if i == j => {
                if !e.cost.is_zero() {
                    return Err(shape(format!("entry edge in gadget {i} not free")));
                }
            }
            (GadgetVertexRole::AnswerV(i, _), GadgetVertexRole::Sink(j)) if i == j => {
                if !e.cost.is_zero() {
                    return Err(shape(format!("exit edge in gadget {i} not free")));
                }
            }
            (GadgetVertexRole::Sink(i), GadgetVertexRole::Source(j)) if j == i + 1 => {
                if !e.cost.is_zero() {
                    return Err(shape(format!("chain edge {i} not free")));
                }
                chain_seen[i] = true;
            }
            (GadgetVertexRole::AnswerV(i, a), GadgetVertexRole::AnswerU(j, b)) if j > i => {
                match shortcut_costs.get(&(i, a, j, b)) {
                    Some(cost) if *cost == e.cost => shortcuts_seen += 1,
                    _ => return Err(shape(format!("unregistered shortcut {i}->{j}"))),
                }
            }
            _ => {
                return Err(shape(format!(
                    "edge {} -> {} has no gadget role",
                    e.tail, e.head
                )))
            }
        }
    }
    if shortcuts_seen != map.shortcuts.len() {
        return Err(shape("missing shortcut edges".into()));
    }
    if !(1..=m).all(|i| bypass_seen[i]) || !(1..m).all(|i| chain_seen[i]) {
        return Err(shape("missing bypass or chain edges".into()));
    }
    for e in &inst.variable_edges {
        match (roles.get(&e.tail), roles.get(&e.head)) {
            (Some(GadgetVertexRole::AnswerU(i, a)), Some(GadgetVertexRole::AnswerV(j, b)))
                if i == j && a == b => {}
            _ => return Err(shape(format!("pricable edge `{}` misplaced", e.label))),
        }
    }

    let blocks = map
        .gadgets
        .iter()
        .map(|g| CsBlock {
            cost: rat_int(1),
            path_count: g.answers.len(),
        })
        .collect();
    let shortcuts = map
        .shortcuts
        .iter()
        .map(|sc| CsShortcut {
            from_block: sc.from_pos,
            from_path: sc.from_answer + 1,
            to_block: sc.to_pos,
            to_path: sc.to_answer + 1,
            cost: sc.cost.clone(),
        })
        .collect();
    let cs = CsInstance { blocks, shortcuts };
    cs.validate()?;
    Ok(cs)
}

/// Half-price strategy on a block instance: every pricable edge in block i
/// is priced c_i/2. Labels follow `cs_to_pricing_instance`.
pub fn half_pricing(cs: &CsInstance) -> PriceAssignment {
    let mut prices = PriceAssignment::new();
    for (i, block) in cs.blocks.iter().enumerate() {
        let half = &block.cost / rat_int(2);
        for j in 0..block.path_count {
            prices.set(
                format!("b{}:p{}", i + 1, j + 1),
                Price::Finite(half.clone()),
            );
        }
    }
    prices
}

/// The same strategy expressed on a reduction instance's own labels.
pub fn half_pricing_for_reduction(cs: &CsInstance, map: &GadgetMap) -> PriceAssignment {
    let mut prices = PriceAssignment::new();
    for (g, block) in map.gadgets.iter().zip(&cs.blocks) {
        let half = &block.cost / rat_int(2);
        for answer in &g.answers {
            prices.set(answer.label.clone(), Price::Finite(half.clone()));
        }
    }
    prices
}

// ---------------------------------------------------------------------------
// Exact path-fixing solver

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PathRevenue {
    Priced {
        prices: Vec<(String, Rat)>,
        revenue: Rat,
    },
    /// Some on-path price appears in no constraint: revenue grows without
    /// bound (no fixed alternative anywhere).
    Unbounded,
    /// The path cannot be weakly shortest under any nonnegative pricing of
    /// its own edges (a strictly cheaper fixed-cost alternative exists).
    Infeasible,
}

/// Maximum revenue collectable on a fixed bought path: off-path pricable
/// edges priced infinite, one constraint per alternative path in the
/// restricted graph, solved exactly.
pub fn fixed_path_max_revenue(
    inst: &PricingInstance,
    path: &[EdgeId],
    path_budget: u128,
) -> Result<PathRevenue, SolveError> {
    // Validate the path and collect its pieces.
    let mut inf_prices = PriceAssignment::new();
    for e in &inst.variable_edges {
        inf_prices.set(e.label.clone(), Price::Finite(Rat::zero()));
    }
    let witness = crate::instance::make_witness(inst, &inf_prices, path.to_vec())
        .map_err(|e| SolveError::BadPath(e.to_string()))?;
    let path_vars: Vec<usize> = witness
        .edges
        .iter()
        .filter(|id| id.kind == EdgeKind::Var)
        .map(|id| id.index)
        .collect();
    let path_fixed: Rat = witness.cost; // all prices were zero above

    // Restricted instance: fixed edges plus the path's own pricable edges.
    let allowed: HashSet<usize> = path_vars.iter().copied().collect();
    let restricted = PricingInstance {
        vertex_count: inst.vertex_count,
        source: inst.source,
        sink: inst.sink,
        fixed_edges: inst.fixed_edges.clone(),
        variable_edges: inst
            .variable_edges
            .iter()
            .enumerate()
            .filter(|(i, _)| allowed.contains(i))
            .map(|(_, e)| e.clone())
            .collect(),
        meta: Vec::new(),
    };
    let alternatives = enumerate_paths(&restricted, path_budget).map_err(|e| match e {
        BuyerError::TooManyPaths { limit, count } => SolveError::BudgetExceeded {
            budget: limit,
            count,
        },
        other => SolveError::Buyer(other),
    })?;

    // Map restricted var indices back to original ones.
    let restricted_var_orig: Vec<usize> = inst
        .variable_edges
        .iter()
        .enumerate()
        .filter(|(i, _)| allowed.contains(i))
        .map(|(i, _)| i)
        .collect();

    // Tightest rhs per left-hand-side subset.
    let mut tightest: BTreeMap<Vec<usize>, Rat> = BTreeMap::new();
    for alt in &alternatives {
        let mut fixed_cost = Rat::zero();
        let mut used: HashSet<usize> = HashSet::new();
        for id in alt {
            match id.kind {
                EdgeKind::Fixed => fixed_cost += &restricted.fixed_edges[id.index].cost,
                EdgeKind::Var => {
                    used.insert(restricted_var_orig[id.index]);
                }
            }
        }
        let lhs: Vec<usize> = path_vars
            .iter()
            .enumerate()
            .filter(|(_, orig)| !used.contains(orig))
            .map(|(slot, _)| slot)
            .collect();
        let rhs = &fixed_cost - &path_fixed;
        if lhs.is_empty() {
            if rhs.is_negative() {
                return Ok(PathRevenue::Infeasible);
            }
            continue;
        }
        match tightest.get_mut(&lhs) {
            Some(existing) => {
                if rhs < *existing {
                    *existing = rhs;
                }
            }
            None => {
                tightest.insert(lhs, rhs);
            }
        }
    }
    if tightest.values().any(|rhs| rhs.is_negative()) {
        return Ok(PathRevenue::Infeasible);
    }

    if path_vars.is_empty() {
        return Ok(PathRevenue::Priced {
            prices: Vec::new(),
            revenue: Rat::zero(),
        });
    }

    let problem = LpProblem {
        objective: vec![rat_int(1); path_vars.len()],
        constraints: tightest
            .into_iter()
            .map(|(lhs, rhs)| {
                (
                    lhs.into_iter().map(|slot| (slot, rat_int(1))).collect(),
                    rhs,
                )
            })
            .collect(),
    };
    match maximize(&problem) {
        LpOutcome::Unbounded => Ok(PathRevenue::Unbounded),
        LpOutcome::Optimal {
            objective,
            solution,
        } => {
            let prices = path_vars
                .iter()
                .zip(solution)
                .map(|(&orig, value)| (inst.variable_edges[orig].label.clone(), value))
                .collect();
            Ok(PathRevenue::Priced {
                prices,
                revenue: objective,
            })
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimalPricing {
    pub prices: PriceAssignment,
    pub witness: PathWitness,
    pub revenue: Rat,
}

#[derive(Debug, Clone)]
pub enum OptimalOutcome {
    Priced(OptimalPricing),
    Unbounded,
}

/// Minimum fixed-cost part over all source-sink paths, per pricable-edge
/// set, by a forward dynamic program over (vertex, edge set) states. Every
/// key is the pricable-edge set of some path.
fn min_fixed_by_var_set(inst: &PricingInstance) -> Result<BTreeMap<Vec<usize>, Rat>, SolveError> {
    let order = inst
        .topological_order()
        .map_err(|_| SolveError::Buyer(BuyerError::Cyclic))?;
    let mut reach: Vec<HashMap<Vec<usize>, Rat>> = vec![HashMap::new(); inst.vertex_count];
    reach[inst.source].insert(Vec::new(), Rat::zero());
    let adjacency = inst.adjacency();
    for &v in &order {
        if reach[v].is_empty() {
            continue;
        }
        let states: Vec<(Vec<usize>, Rat)> = reach[v]
            .iter()
            .map(|(k, c)| (k.clone(), c.clone()))
            .collect();
        for (id, head) in adjacency[v].iter().copied() {
            for (key, cost) in &states {
                let (new_key, new_cost) = match id.kind {
                    EdgeKind::Fixed => (key.clone(), cost + &inst.fixed_edges[id.index].cost),
                    EdgeKind::Var => {
                        let mut k = key.clone();
                        let pos = k.binary_search(&id.index).unwrap_err();
                        k.insert(pos, id.index);
                        (k, cost.clone())
                    }
                };
                match reach[head].get_mut(&new_key) {
                    Some(existing) => {
                        if new_cost < *existing {
                            *existing = new_cost;
                        }
                    }
                    None => {
                        reach[head].insert(new_key, new_cost);
                    }
                }
            }
        }
    }
    Ok(reach[inst.sink].drain().collect())
}

/// Exact optimum by scanning pricable-edge sets of candidate paths. For a
/// candidate set S (off-set edges priced infinite), the client's
/// alternatives have pricable sets T ⊆ S, and only the minimum fixed cost
/// per T matters, so one global dynamic program supplies every group's
/// constraint set. Deterministic: ties between equal-revenue groups go to
/// the lexicographically smallest edge set, and the scan may stop early
/// once some group attains the fixed-only baseline (an upper bound on any
/// revenue).
pub fn optimal_pricing(
    inst: &PricingInstance,
    path_budget: u128,
) -> Result<OptimalOutcome, SolveError> {
    let total = count_paths(inst)?;
    if total > BigUint::from(path_budget) {
        return Err(SolveError::BudgetExceeded {
            budget: path_budget,
            count: total,
        });
    }
    let g = min_fixed_by_var_set(inst)?;
    let baseline = g.get(&Vec::new()).cloned();

    let mut best: Option<(Rat, Vec<usize>, Vec<Rat>)> = None;
    'groups: for (set, set_fixed) in &g {
        // Quick bound: each price is capped by its own single-edge exchange.
        if let Some((best_rev, _, _)) = &best {
            let mut bound = Rat::zero();
            let mut bound_total = true;
            for (slot, _) in set.iter().enumerate() {
                let mut without = set.clone();
                without.remove(slot);
                match g.get(&without) {
                    Some(alt) => bound += alt - set_fixed,
                    None => {
                        bound_total = false;
                        break;
                    }
                }
            }
            if bound_total && bound <= *best_rev {
                continue 'groups;
            }
        }

        let width = set.len();
        let mut constraints: Vec<(u64, Rat)> = Vec::new();
        if width <= 20 {
            // Every subset of S that some path realizes contributes the
            // tightest exchange constraint for its complement mask.
            for mask in 0u64..(1u64 << width) {
                if mask == 0 {
                    continue;
                }
                let kept: Vec<usize> = (0..width)
                    .filter(|k| mask & (1 << k) == 0)
                    .map(|k| set[k])
                    .collect();
                if let Some(alt_fixed) = g.get(&kept) {
                    let rhs = alt_fixed - set_fixed;
                    if rhs.is_negative() {
                        continue 'groups; // a strictly cheaper alternative
                    }
                    constraints.push((mask, rhs));
                }
            }
        } else {
            // Wide candidate sets: materialize alternatives by restricted
            // enumeration instead of the subset scan.
            let on: HashSet<usize> = set.iter().copied().collect();
            let slot_of: HashMap<usize, usize> = set
                .iter()
                .enumerate()
                .map(|(slot, &orig)| (orig, slot))
                .collect();
            let restricted = PricingInstance {
                vertex_count: inst.vertex_count,
                source: inst.source,
                sink: inst.sink,
                fixed_edges: inst.fixed_edges.clone(),
                variable_edges: inst
                    .variable_edges
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| on.contains(i))
                    .map(|(_, e)| e.clone())
                    .collect(),
                meta: Vec::new(),
            };
            let origs: Vec<usize> = inst
                .variable_edges
                .iter()
                .enumerate()
                .filter(|(i, _)| on.contains(i))
                .map(|(i, _)| i)
                .collect();
            let mut tightest: HashMap<u64, Rat> = HashMap::new();
            for alt in enumerate_paths(&restricted, path_budget)? {
                let mut fixed_cost = Rat::zero();
                let mut mask = (1u64 << width) - 1;
                for id in &alt {
                    match id.kind {
                        EdgeKind::Fixed => fixed_cost += &restricted.fixed_edges[id.index].cost,
                        EdgeKind::Var => mask &= !(1 << slot_of[&origs[id.index]]),
                    }
                }
                let rhs = &fixed_cost - set_fixed;
                if mask == 0 {
                    if rhs.is_negative() {
                        continue 'groups;
                    }
                    continue;
                }
                match tightest.get_mut(&mask) {
                    Some(existing) => {
                        if rhs < *existing {
                            *existing = rhs;
                        }
                    }
                    None => {
                        tightest.insert(mask, rhs);
                    }
                }
            }
            if tightest.values().any(|rhs| rhs.is_negative()) {
                continue 'groups;
            }
            constraints = tightest.into_iter().collect();
            constraints.sort_by(|a, b| a.0.cmp(&b.0));
        }

        // Constraints implied by summing single-edge caps are redundant.
        let mut singleton: Vec<Option<Rat>> = vec![None; width];
        for (mask, rhs) in &constraints {
            if mask.count_ones() == 1 {
                singleton[mask.trailing_zeros() as usize] = Some(rhs.clone());
            }
        }
        let mut kept: Vec<(u64, Rat)> = Vec::new();
        'cons: for (mask, rhs) in constraints {
            if mask.count_ones() > 1 {
                let mut cap = Rat::zero();
                for k in 0..width {
                    if mask & (1 << k) != 0 {
                        match &singleton[k] {
                            Some(c) => cap += c,
                            None => {
                                kept.push((mask, rhs));
                                continue 'cons;
                            }
                        }
                    }
                }
                if cap <= rhs {
                    continue;
                }
            }
            kept.push((mask, rhs));
        }

        let problem = LpProblem {
            objective: vec![rat_int(1); width],
            constraints: kept
                .into_iter()
                .map(|(mask, rhs)| {
                    let coeffs = (0..width)
                        .filter(|k| mask & (1 << k) != 0)
                        .map(|k| (k, rat_int(1)))
                        .collect();
                    (coeffs, rhs)
                })
                .collect(),
        };
        match maximize(&problem) {
            LpOutcome::Unbounded => return Ok(OptimalOutcome::Unbounded),
            LpOutcome::Optimal {
                objective,
                solution,
            } => {
                let better = match &best {
                    None => true,
                    Some((rev, key, _)) => objective > *rev || (objective == *rev && set < key),
                };
                if better {
                    let at_ceiling = baseline.as_ref() == Some(&objective);
                    best = Some((objective, set.clone(), solution));
                    if at_ceiling {
                        break 'groups;
                    }
                }
            }
        }
    }

    let Some((revenue, set, solution)) = best else {
        return Err(SolveError::SelfCheck("no feasible candidate".into()));
    };
    let bought_cost = g[&set].clone() + &revenue;

    let mut prices = PriceAssignment::new();
    let on_path: HashSet<usize> = set.iter().copied().collect();
    for (i, e) in inst.variable_edges.iter().enumerate() {
        if !on_path.contains(&i) {
            prices.set(e.label.clone(), Price::Inf);
        }
    }
    for (slot, &orig) in set.iter().enumerate() {
        prices.set(
            inst.variable_edges[orig].label.clone(),
            Price::Finite(solution[slot].clone()),
        );
    }

    let witness = best_response(inst, &prices)?;
    if witness.revenue != revenue || witness.cost != bought_cost {
        return Err(SolveError::SelfCheck(format!(
            "best response collects {} at cost {}, solver expected {} at {}",
            fmt_rat(&witness.revenue),
            fmt_rat(&witness.cost),
            fmt_rat(&revenue),
            fmt_rat(&bought_cost)
        )));
    }
    Ok(OptimalOutcome::Priced(OptimalPricing {
        prices,
        witness,
        revenue,
    }))
}

// ---------------------------------------------------------------------------
// Grid oracle

/// Default candidate set: zero, every pairwise difference of the paths'
/// fixed-cost parts, and their halves, ascending, capped. These are the
/// values at which exchanging one path for another changes sign.
pub fn default_candidate_grid(
    inst: &PricingInstance,
    path_budget: u128,
    cap: usize,
) -> Result<Vec<Rat>, SolveError> {
    let paths = enumerate_paths(inst, path_budget).map_err(|e| match e {
        BuyerError::TooManyPaths { limit, count } => SolveError::BudgetExceeded {
            budget: limit,
            count,
        },
        other => SolveError::Buyer(other),
    })?;
    let mut costs: std::collections::BTreeSet<Rat> = std::collections::BTreeSet::new();
    for path in &paths {
        let mut c = Rat::zero();
        for id in path {
            if id.kind == EdgeKind::Fixed {
                c += &inst.fixed_edges[id.index].cost;
            }
        }
        costs.insert(c);
    }
    let mut set: std::collections::BTreeSet<Rat> = std::collections::BTreeSet::new();
    set.insert(Rat::zero());
    for a in &costs {
        for b in &costs {
            if a >= b {
                let d = a - b;
                set.insert(d.clone());
                set.insert(d / rat_int(2));
            }
        }
    }
    Ok(set.into_iter().take(cap).collect())
}

/// Revenue of the half-price strategy evaluated through the best response.
pub fn half_pricing_revenue(
    inst: &PricingInstance,
    prices: &PriceAssignment,
) -> Result<Rat, SolveError> {
    Ok(best_response(inst, prices)?.revenue)
}

/// Integer-scaled view of the instance for fast repeated best responses.
struct ScaledGraph {
    rev_topo: Vec<VertexId>,
    /// Fixed out-edges per vertex: (head, scaled cost).
    fixed_out: Vec<Vec<(usize, i128)>>,
    /// Pricable out-edges per vertex: (head, var index).
    var_out: Vec<Vec<(usize, usize)>>,
    scale: BigInt,
}

impl ScaledGraph {
    fn build(
        inst: &PricingInstance,
        candidates: &[Price],
    ) -> Result<(Self, Vec<Option<i128>>), SolveError> {
        let mut scale = BigInt::one();
        for e in &inst.fixed_edges {
            scale = scale.lcm(e.cost.denom());
        }
        for c in candidates {
            if let Price::Finite(v) = c {
                scale = scale.lcm(v.denom());
            }
        }
        let to_scaled = |v: &Rat| -> Result<i128, SolveError> {
            let scaled = v * Rat::from_integer(scale.clone());
            scaled
                .to_integer()
                .to_i128()
                .ok_or_else(|| SolveError::SelfCheck("scaled weight overflow".into()))
        };
        let order = inst
            .topological_order()
            .map_err(|_| SolveError::Buyer(BuyerError::Cyclic))?;
        let mut fixed_out = vec![Vec::new(); inst.vertex_count];
        for e in &inst.fixed_edges {
            fixed_out[e.tail].push((e.head, to_scaled(&e.cost)?));
        }
        let mut var_out = vec![Vec::new(); inst.vertex_count];
        for (i, e) in inst.variable_edges.iter().enumerate() {
            var_out[e.tail].push((e.head, i));
        }
        let scaled_candidates: Vec<Option<i128>> = candidates
            .iter()
            .map(|c| match c {
                Price::Inf => Ok(None),
                Price::Finite(v) => to_scaled(v).map(Some),
            })
            .collect::<Result<_, _>>()?;
        let mut rev_topo = order;
        rev_topo.reverse();
        Ok((
            ScaledGraph {
                rev_topo,
                fixed_out,
                var_out,
                scale,
            },
            scaled_candidates,
        ))
    }

    /// Best response value (cost, revenue) under a digit assignment, or
    /// None when the sink is unreachable.
    fn evaluate(
        &self,
        inst: &PricingInstance,
        digits: &[usize],
        scaled_candidates: &[Option<i128>],
        best: &mut [Option<(i128, i128)>],
    ) -> Option<(i128, i128)> {
        for slot in best.iter_mut() {
            *slot = None;
        }
        best[inst.sink] = Some((0, 0));
        for &v in &self.rev_topo {
            if v == inst.sink {
                continue;
            }
            let mut chosen: Option<(i128, i128)> = None;
            for &(head, w) in &self.fixed_out[v] {
                if let Some((c, r)) = best[head] {
                    let cand = (c + w, r);
                    if chosen.map_or(true, |cur| {
                        cand.0 < cur.0 || (cand.0 == cur.0 && cand.1 > cur.1)
                    }) {
                        chosen = Some(cand);
                    }
                }
            }
            for &(head, var) in &self.var_out[v] {
                if let (Some(p), Some((c, r))) = (scaled_candidates[digits[var]], best[head]) {
                    let cand = (c + p, r + p);
                    if chosen.map_or(true, |cur| {
                        cand.0 < cur.0 || (cand.0 == cur.0 && cand.1 > cur.1)
                    }) {
                        chosen = Some(cand);
                    }
                }
            }
            best[v] = chosen;
        }
        best[inst.source]
    }
}

/// Brute force over all pricings drawn from the candidate set (infinity is
/// always included): the maximum revenue any of them collects.
///
/// Sound early exit: revenue can never exceed the fixed-only baseline cost,
/// so the scan stops once some pricing attains it. To reach that point
/// early the odometer runs over candidates sorted descending with infinity
/// first; the maximum does not depend on scan order.
pub fn grid_oracle(
    inst: &PricingInstance,
    candidate_prices: &[Rat],
    budget: u128,
) -> Result<Rat, SolveError> {
    let mut finite: Vec<Rat> = candidate_prices.to_vec();
    finite.sort();
    finite.dedup();
    finite.reverse();
    let mut candidates: Vec<Price> = vec![Price::Inf];
    candidates.extend(finite.into_iter().map(Price::Finite));
    let m = inst.variable_edges.len();
    let size = BigUint::from(candidates.len()).pow(m as u32);
    if size > BigUint::from(budget) {
        return Err(SolveError::GridBudgetExceeded { size, budget });
    }
    let (graph, scaled_candidates) = ScaledGraph::build(inst, &candidates)?;
    let ceiling: Option<i128> = match fixed_baseline_cost(inst) {
        Ok(c) => {
            let scaled = &c * Rat::from_integer(graph.scale.clone());
            scaled.to_integer().to_i128()
        }
        Err(_) => None,
    };

    let total = size.to_u128().expect("within budget");
    let base = candidates.len() as u128;
    let workers = rayon::current_num_threads().max(1) as u128;
    let chunk = total.div_ceil(workers * 8).max(1);
    let starts: Vec<u128> = (0..total).step_by(chunk.max(1) as usize).collect();
    let stop = AtomicBool::new(false);

    let best_scaled = starts
        .par_iter()
        .map(|&start| {
            let end = (start + chunk).min(total);
            let mut digits = vec![0usize; m];
            let mut index = start;
            for slot in (0..m).rev() {
                digits[slot] = (index % base) as usize;
                index /= base;
            }
            let mut best_table: Vec<Option<(i128, i128)>> = vec![None; inst.vertex_count];
            let mut local_best: Option<i128> = None;
            let mut at = start;
            while at < end {
                if stop.load(AtomicOrdering::Relaxed) {
                    break;
                }
                if let Some((_, revenue)) =
                    graph.evaluate(inst, &digits, &scaled_candidates, &mut best_table)
                {
                    if local_best.map_or(true, |b| revenue > b) {
                        local_best = Some(revenue);
                        if ceiling == Some(revenue) {
                            stop.store(true, AtomicOrdering::Relaxed);
                            break;
                        }
                    }
                }
                at += 1;
                // Odometer step, rightmost digit fastest.
                for slot in (0..m).rev() {
                    digits[slot] += 1;
                    if digits[slot] < base as usize {
                        break;
                    }
                    digits[slot] = 0;
                }
            }
            local_best
        })
        .reduce(
            || None,
            |a, b| match (a, b) {
                (None, x) | (x, None) => x,
                (Some(x), Some(y)) => Some(x.max(y)),
            },
        );

    let best_scaled = best_scaled.unwrap_or(0).max(0);
    Ok(Rat::new(BigInt::from(best_scaled), graph.scale))
}
