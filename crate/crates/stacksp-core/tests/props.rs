//! Property tests for the serialization contracts and the constraint
//! system's structural invariants.

use proptest::prelude::*;
use stacksp_core::csp::{build_constraints, Clause, Formula, Literal};
use stacksp_core::instance::{
    parse_instance, serialize_instance, validate_instance, FixedEdge, PriceAssignment,
    PricingInstance, VarEdge,
};
use stacksp_core::scalar::{rat, Price};

/// Random DAG instances: edges only go from lower to higher vertex ids, so
/// acyclicity holds by construction.
fn instance_strategy() -> impl Strategy<Value = PricingInstance> {
    (3usize..10).prop_flat_map(|n| {
        let fixed = proptest::collection::vec(
            (0usize..n - 1, 1usize..n, 0i64..8, 1i64..4).prop_map(|(a, b, numer, denom)| {
                let (tail, head) = if a < b { (a, b) } else { (b, a.max(b - 1) + 1) };
                FixedEdge {
                    tail,
                    head: head.max(tail + 1),
                    cost: rat(numer, denom),
                }
            }),
            1..12,
        );
        let vars = proptest::collection::vec((0usize..n - 1, 1usize..n), 0..6);
        (fixed, vars).prop_map(move |(fixed_edges, var_pairs)| {
            let variable_edges = var_pairs
                .into_iter()
                .enumerate()
                .map(|(i, (a, b))| {
                    let (tail, head) = if a < b { (a, b) } else { (b, a.max(b - 1) + 1) };
                    VarEdge {
                        tail,
                        head: head.max(tail + 1),
                        label: format!("e{i}"),
                    }
                })
                .collect();
            PricingInstance {
                vertex_count: n,
                source: 0,
                sink: n - 1,
                fixed_edges,
                variable_edges,
                meta: vec!["generated".to_string()],
            }
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// parse ∘ serialize is the canonical form, and serialization is a
    /// fixed point on it.
    #[test]
    fn serialize_parse_round_trip(inst in instance_strategy()) {
        let text = serialize_instance(&inst);
        let parsed = parse_instance(&text).unwrap();
        prop_assert_eq!(&parsed, &inst.canonical());
        prop_assert_eq!(serialize_instance(&parsed), text);
        // Validation never panics and cycles are impossible here.
        let report = validate_instance(&parsed);
        prop_assert!(report.problems.iter().all(|p| !p.contains("cycle")));
    }

    /// Pricing files round-trip and preserve every entry.
    #[test]
    fn pricing_round_trip(entries in proptest::collection::btree_map(
        "[a-z][a-z0-9]{0,6}",
        prop_oneof![
            (0i64..10, 1i64..5).prop_map(|(n, d)| Price::Finite(rat(n, d))),
            Just(Price::Inf),
        ],
        0..10,
    )) {
        let mut prices = PriceAssignment::new();
        for (label, price) in &entries {
            prices.set(label.clone(), price.clone());
        }
        let parsed = PriceAssignment::parse(&prices.serialize()).unwrap();
        prop_assert_eq!(parsed, prices);
    }
}

fn formula_strategy() -> impl Strategy<Value = Formula> {
    (2usize..3, 3usize..7, 1usize..5).prop_flat_map(|(_, n, clauses)| {
        proptest::collection::vec(
            (
                proptest::sample::subsequence((0..n).collect::<Vec<_>>(), 2),
                any::<bool>(),
                any::<bool>(),
            ),
            clauses..=clauses,
        )
        .prop_map(move |specs| Formula {
            variable_count: n,
            width: 2,
            clauses: specs
                .into_iter()
                .map(|(vars, s0, s1)| Clause {
                    literals: vec![
                        Literal {
                            var: vars[0],
                            positive: s0,
                        },
                        Literal {
                            var: vars[1],
                            positive: s1,
                        },
                    ],
                })
                .collect(),
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Projections are total and land in the second prover's answer set;
    /// answer-set sizes follow the widths.
    #[test]
    fn projection_total_and_sized(formula in formula_strategy(), ell in 1usize..3) {
        let cs = build_constraints(&formula, ell, 1 << 16).unwrap();
        let m = cs.constraint_count();
        prop_assert_eq!(m, (2 * formula.clauses.len()).pow(ell as u32));
        for r in 0..m {
            prop_assert_eq!(cs.prover1_answer_count(r), 3usize.pow(ell as u32));
            for a in 0..cs.prover1_answer_count(r) {
                let projected = cs.project(r, a).unwrap();
                prop_assert!(projected < cs.prover2_answer_count());
            }
        }
    }
}
