//! The client's side of the game: minimum-cost source-sink path with
//! seller-favorable tie-breaking.
//!
//! On a DAG the best response is a dynamic program over the key
//! `(cost, -revenue, vertex sequence)`: minimize cost, then maximize
//! revenue, then take the lexicographically smallest vertex sequence.
//! The last key exists only to make the witness deterministic.

use crate::instance::{EdgeId, PathWitness, PriceAssignment, PricingInstance, VertexId};
use crate::scalar::{Price, Rat};
use num::{BigUint, Zero};
use std::cmp::Ordering;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BuyerError {
    #[error("instance is cyclic")]
    Cyclic,
    #[error("sink unreachable after deleting inf-priced edges")]
    SinkUnreachable,
    #[error("no fixed-only source-sink path")]
    NoFixedBaseline,
    #[error("pricing incomplete: {0}")]
    BadPricing(String),
    #[error("path count {count} exceeds limit {limit}")]
    TooManyPaths { limit: u128, count: BigUint },
}

/// Finite out-edges under a pricing: fixed edges plus variable edges whose
/// price is finite. Weight is the cost, `rev` the revenue contribution.
fn finite_adjacency(
    inst: &PricingInstance,
    prices: &PriceAssignment,
) -> Result<Vec<Vec<(EdgeId, VertexId, Rat, Rat)>>, BuyerError> {
    let mut adj: Vec<Vec<(EdgeId, VertexId, Rat, Rat)>> = vec![Vec::new(); inst.vertex_count];
    for (i, e) in inst.fixed_edges.iter().enumerate() {
        adj[e.tail].push((EdgeId::fixed(i), e.head, e.cost.clone(), Rat::zero()));
    }
    for (i, e) in inst.variable_edges.iter().enumerate() {
        match prices.get(&e.label) {
            None => {
                return Err(BuyerError::BadPricing(format!(
                    "no price for `{}`",
                    e.label
                )))
            }
            Some(Price::Inf) => {}
            Some(Price::Finite(p)) => {
                adj[e.tail].push((EdgeId::var(i), e.head, p.clone(), p.clone()));
            }
        }
    }
    for list in &mut adj {
        list.sort_by(|a, b| (a.1, a.0.kind, a.0.index).cmp(&(b.1, b.0.kind, b.0.index)));
    }
    Ok(adj)
}

/// Best value from each vertex to the sink: minimal cost, then maximal
/// revenue. `None` means the sink is unreachable from that vertex.
fn backward_table(
    inst: &PricingInstance,
    adj: &[Vec<(EdgeId, VertexId, Rat, Rat)>],
) -> Result<Vec<Option<(Rat, Rat)>>, BuyerError> {
    let order = inst.topological_order().map_err(|_| BuyerError::Cyclic)?;
    let mut best: Vec<Option<(Rat, Rat)>> = vec![None; inst.vertex_count];
    best[inst.sink] = Some((Rat::zero(), Rat::zero()));
    for &v in order.iter().rev() {
        if v == inst.sink {
            continue;
        }
        let mut chosen: Option<(Rat, Rat)> = None;
        for (_, head, weight, rev) in &adj[v] {
            if let Some((tail_cost, tail_rev)) = &best[*head] {
                let cost = weight + tail_cost;
                let revenue = rev + tail_rev;
                let better = match &chosen {
                    None => true,
                    Some((c, r)) => match cost.cmp(c) {
                        Ordering::Less => true,
                        Ordering::Greater => false,
                        Ordering::Equal => revenue > *r,
                    },
                };
                if better {
                    chosen = Some((cost, revenue));
                }
            }
        }
        best[v] = chosen;
    }
    Ok(best)
}

/// The client's purchase: cheapest path, ties broken toward maximum
/// revenue, then the lexicographically smallest vertex sequence.
pub fn best_response(
    inst: &PricingInstance,
    prices: &PriceAssignment,
) -> Result<PathWitness, BuyerError> {
    prices
        .check_complete_for(inst)
        .map_err(|e| BuyerError::BadPricing(e.to_string()))?;
    let adj = finite_adjacency(inst, prices)?;
    let best = backward_table(inst, &adj)?;
    let (total_cost, total_rev) = match &best[inst.source] {
        Some(pair) => pair.clone(),
        None => return Err(BuyerError::SinkUnreachable),
    };
    // Forward walk: at each vertex take the smallest next vertex that stays
    // on an optimal continuation. Adjacency is sorted by head, so the first
    // consistent edge is the lexicographic choice.
    let mut edges = Vec::new();
    let mut at = inst.source;
    let mut need = best[inst.source].clone().unwrap();
    while at != inst.sink {
        let mut advanced = false;
        for (id, head, weight, rev) in &adj[at] {
            if let Some((tail_cost, tail_rev)) = &best[*head] {
                if weight + tail_cost == need.0 && rev + tail_rev == need.1 {
                    edges.push(*id);
                    at = *head;
                    need = (tail_cost.clone(), tail_rev.clone());
                    advanced = true;
                    break;
                }
            }
        }
        debug_assert!(advanced, "optimal continuation must exist");
        if !advanced {
            return Err(BuyerError::SinkUnreachable);
        }
    }
    Ok(PathWitness {
        edges,
        cost: total_cost,
        revenue: total_rev,
    })
}

/// Minimum cost of a source-sink path using fixed edges only.
pub fn fixed_baseline_cost(inst: &PricingInstance) -> Result<Rat, BuyerError> {
    let mut adj: Vec<Vec<(EdgeId, VertexId, Rat, Rat)>> = vec![Vec::new(); inst.vertex_count];
    for (i, e) in inst.fixed_edges.iter().enumerate() {
        adj[e.tail].push((EdgeId::fixed(i), e.head, e.cost.clone(), Rat::zero()));
    }
    let best = backward_table(inst, &adj)?;
    match &best[inst.source] {
        Some((cost, _)) => Ok(cost.clone()),
        None => Err(BuyerError::NoFixedBaseline),
    }
}

/// Number of distinct source-sink paths (edge sequences) in the DAG.
pub fn count_paths(inst: &PricingInstance) -> Result<BigUint, BuyerError> {
    let order = inst.topological_order().map_err(|_| BuyerError::Cyclic)?;
    let adj = inst.adjacency();
    let mut counts: Vec<BigUint> = vec![BigUint::zero(); inst.vertex_count];
    counts[inst.sink] = BigUint::from(1u32);
    for &v in order.iter().rev() {
        if v == inst.sink {
            continue;
        }
        let mut total = BigUint::zero();
        for &(_, head) in &adj[v] {
            total += &counts[head];
        }
        counts[v] = total;
    }
    Ok(counts[inst.source].clone())
}

/// Every simple source-sink path, in deterministic (DFS over sorted
/// adjacency) order. Refuses to start if the exact count exceeds `limit`.
pub fn enumerate_paths(
    inst: &PricingInstance,
    limit: u128,
) -> Result<Vec<Vec<EdgeId>>, BuyerError> {
    let count = count_paths(inst)?;
    if count > BigUint::from(limit) {
        return Err(BuyerError::TooManyPaths { limit, count });
    }
    let adj = inst.adjacency();
    let mut paths = Vec::new();
    let mut stack: Vec<(VertexId, usize)> = vec![(inst.source, 0)];
    let mut edges: Vec<EdgeId> = Vec::new();
    while let Some(&mut (v, ref mut idx)) = stack.last_mut() {
        if v == inst.sink {
            paths.push(edges.clone());
            stack.pop();
            edges.pop();
            continue;
        }
        if *idx < adj[v].len() {
            let (id, head) = adj[v][*idx];
            *idx += 1;
            stack.push((head, 0));
            edges.push(id);
        } else {
            stack.pop();
            edges.pop();
        }
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{FixedEdge, VarEdge};
    use crate::scalar::{rat, rat_int};

    fn gadget(k: usize) -> PricingInstance {
        // One gadget: source 0, sink 2k+1, bypass cost 1, k answer routes.
        let sink = 2 * k + 1;
        let mut fixed = vec![FixedEdge {
            tail: 0,
            head: sink,
            cost: rat_int(1),
        }];
        let mut variable = Vec::new();
        for a in 0..k {
            let u = 1 + 2 * a;
            let v = 2 + 2 * a;
            fixed.push(FixedEdge {
                tail: 0,
                head: u,
                cost: rat_int(0),
            });
            fixed.push(FixedEdge {
                tail: v,
                head: sink,
                cost: rat_int(0),
            });
            variable.push(VarEdge {
                tail: u,
                head: v,
                label: format!("g1:a{a}"),
            });
        }
        PricingInstance {
            vertex_count: sink + 1,
            source: 0,
            sink,
            fixed_edges: fixed,
            variable_edges: variable,
            meta: vec![],
        }
    }

    #[test]
    fn single_gadget_path_count() {
        let inst = gadget(3);
        assert_eq!(count_paths(&inst).unwrap(), BigUint::from(4u32));
        assert_eq!(enumerate_paths(&inst, 10).unwrap().len(), 4);
    }

    #[test]
    fn limit_exceeded_reports_count() {
        let inst = gadget(3);
        match enumerate_paths(&inst, 3) {
            Err(BuyerError::TooManyPaths { limit, count }) => {
                assert_eq!(limit, 3);
                assert_eq!(count, BigUint::from(4u32));
            }
            other => panic!("expected limit error, got {other:?}"),
        }
    }

    #[test]
    fn baseline_of_single_gadget_is_one() {
        let inst = gadget(3);
        assert_eq!(fixed_baseline_cost(&inst).unwrap(), rat_int(1));
    }

    #[test]
    fn ties_break_toward_revenue() {
        let inst = gadget(2);
        let mut prices = PriceAssignment::new();
        prices.set("g1:a0", Price::Finite(rat_int(1)));
        prices.set("g1:a1", Price::Finite(rat(1, 2)));
        // Cheapest is the 1/2 edge, not the bypass or the price-1 edge.
        let w = best_response(&inst, &prices).unwrap();
        assert_eq!(w.cost, rat(1, 2));
        assert_eq!(w.revenue, rat(1, 2));

        // At price 1 both the bypass and the edge cost 1; revenue wins.
        let mut prices2 = PriceAssignment::new();
        prices2.set("g1:a0", Price::Finite(rat_int(1)));
        prices2.set("g1:a1", Price::Inf);
        let w2 = best_response(&inst, &prices2).unwrap();
        assert_eq!(w2.cost, rat_int(1));
        assert_eq!(w2.revenue, rat_int(1));
    }

    #[test]
    fn all_inf_leaves_fixed_chain() {
        let inst = gadget(2);
        let mut prices = PriceAssignment::new();
        prices.set("g1:a0", Price::Inf);
        prices.set("g1:a1", Price::Inf);
        let w = best_response(&inst, &prices).unwrap();
        assert_eq!(w.cost, rat_int(1));
        assert_eq!(w.revenue, rat_int(0));
        assert_eq!(w.edges, vec![EdgeId::fixed(0)]);
    }

    #[test]
    fn unreachable_after_inf_is_error() {
        let inst = PricingInstance {
            vertex_count: 3,
            source: 0,
            sink: 2,
            fixed_edges: vec![FixedEdge {
                tail: 0,
                head: 1,
                cost: rat_int(0),
            }],
            variable_edges: vec![VarEdge {
                tail: 1,
                head: 2,
                label: "x".into(),
            }],
            meta: vec![],
        };
        let mut prices = PriceAssignment::new();
        prices.set("x", Price::Inf);
        assert!(matches!(
            best_response(&inst, &prices),
            Err(BuyerError::SinkUnreachable)
        ));
    }

    /// Brute-force oracle: minimum cost over all enumerated paths, maximum
    /// revenue among the minimum-cost ones.
    pub(crate) fn oracle_best(
        inst: &PricingInstance,
        prices: &PriceAssignment,
    ) -> Option<(Rat, Rat)> {
        let paths = enumerate_paths(inst, 1_000_000).unwrap();
        let mut best: Option<(Rat, Rat)> = None;
        for path in paths {
            let Ok(cost) = crate::instance::path_cost(inst, prices, &path) else {
                continue;
            };
            let revenue = crate::instance::path_revenue(inst, prices, &path).unwrap();
            best = match best {
                None => Some((cost, revenue)),
                Some((bc, br)) => {
                    if cost < bc || (cost == bc && revenue > br) {
                        Some((cost, revenue))
                    } else {
                        Some((bc, br))
                    }
                }
            };
        }
        best
    }

    #[test]
    fn matches_enumeration_oracle_on_random_pricings() {
        let inst = gadget(3);
        let grid = [
            Price::Finite(rat_int(0)),
            Price::Finite(rat(1, 2)),
            Price::Finite(rat(3, 4)),
            Price::Finite(rat_int(1)),
            Price::Finite(rat(3, 2)),
            Price::Inf,
        ];
        let labels: Vec<String> = inst
            .variable_edges
            .iter()
            .map(|e| e.label.clone())
            .collect();
        let mut rng = crate::rng::SplitMix64::new(7);
        for _ in 0..200 {
            let mut prices = PriceAssignment::new();
            for label in &labels {
                let pick = rng.next_below(grid.len() as u64) as usize;
                prices.set(label.clone(), grid[pick].clone());
            }
            let expected = oracle_best(&inst, &prices).unwrap();
            let got = best_response(&inst, &prices).unwrap();
            assert_eq!((got.cost, got.revenue), expected);
        }
    }
}
