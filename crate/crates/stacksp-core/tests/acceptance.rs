//! Acceptance suite: one test per criterion, each printing a PASS/FAIL
//! line. Criteria 1–4 pin the worked example's exact numbers, 5 pins the
//! unsatisfiable eight-constraint instance, 6–9 are property batteries.
//!
//! Two checks are deliberately red; the model refutes them and the test
//! messages carry the argument:
//! - criterion 3 demands that a path with adjacent-gadget shortcuts be a
//!   best response, but such a path always costs exactly 1 more than the
//!   free chain detour using the same pricable edges;
//! - criterion 5 demands a strict revenue gap at M=8, but adjacent
//!   same-clause positions let a pairwise-consistent selection of price-1
//!   edges collect the full baseline, so the exact optimum is 8.

use num::{BigUint, One, Signed, Zero};
use stacksp_core::buyer::{best_response, count_paths, enumerate_paths, fixed_baseline_cost};
use stacksp_core::csp::{
    build_constraints, global_from_assignment, parse_dimacs, ConstraintSystem, Formula,
};
use stacksp_core::decomposition::{
    decompose, phase1_trace, telescoping_ok, verify_properties, Role,
};
use stacksp_core::farseq::{
    delta_far_flags, derandomized_far_order, far_fraction, non_far_count, random_far_order,
    SequenceOrder,
};
use stacksp_core::instance::{
    path_cost, validate_instance, EdgeId, EdgeKind, PriceAssignment, PricingInstance,
};
use stacksp_core::reduction::{
    build_instance, decode_assignment, size_report, yes_pricing, GadgetMap, GenParams, ShortcutMode,
};
use stacksp_core::rng::SplitMix64;
use stacksp_core::scalar::{fmt_rat, rat, rat_int, Price, Rat};
use stacksp_core::solvers::{
    fixed_path_max_revenue, grid_oracle, half_pricing_for_reduction, optimal_pricing,
    reduction_to_cs, OptimalOutcome, PathRevenue,
};
use std::time::Instant;

fn data(name: &str) -> String {
    std::fs::read_to_string(format!("{}/tests/data/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

struct Criterion {
    number: u32,
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Criterion {
    fn new(number: u32) -> Self {
        Criterion {
            number,
            failures: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, label: &str) {
        if ok {
            self.notes.push(label.to_string());
        } else {
            self.failures.push(label.to_string());
        }
    }

    fn finish(self) {
        if self.failures.is_empty() {
            println!("criterion {} PASS ({})", self.number, self.notes.join("; "));
        } else {
            println!(
                "criterion {} FAIL ({})",
                self.number,
                self.failures.join("; ")
            );
            panic!(
                "criterion {} failed: {}",
                self.number,
                self.failures.join("; ")
            );
        }
    }
}

/// The worked example: (x1 ∨ x2) ∧ (x1 ∨ x3), ℓ = 1, four constraints.
fn example(mode: ShortcutMode) -> (ConstraintSystem, PricingInstance, GadgetMap) {
    let formula = parse_dimacs(&data("max2sat_example.cnf")).unwrap();
    let cs = build_constraints(&formula, 1, 1 << 20).unwrap();
    let order = SequenceOrder::identity(4, rat(1, 4)).unwrap();
    let mut params = GenParams::desk_defaults(1, rat(1, 4), rat(1, 3));
    params.shortcut_mode = mode;
    let (inst, map) = build_instance(&cs, &order, &params).unwrap();
    (cs, inst, map)
}

fn inf_everywhere(inst: &PricingInstance) -> PriceAssignment {
    let mut prices = PriceAssignment::new();
    for e in &inst.variable_edges {
        prices.set(e.label.clone(), Price::Inf);
    }
    prices
}

fn uses_shortcut(inst: &PricingInstance, map: &GadgetMap, edges: &[EdgeId]) -> bool {
    let roles = map.roles();
    edges.iter().any(|&id| {
        if id.kind != EdgeKind::Fixed {
            return false;
        }
        let (tail, head) = inst.edge_endpoints(id);
        matches!(
            (roles.get(&tail), roles.get(&head)),
            (
                Some(stacksp_core::reduction::GadgetVertexRole::AnswerV(i, _)),
                Some(stacksp_core::reduction::GadgetVertexRole::AnswerU(j, _))
            ) if j > i
        )
    })
}

#[test]
fn criterion_1_yes_instance_revenue() {
    let start = Instant::now();
    let mut c = Criterion::new(1);
    let (cs, inst, map) = example(ShortcutMode::All);
    let assignment = global_from_assignment(&cs, &[true, true, false]).unwrap();
    let prices = yes_pricing(&cs, &map, &assignment).unwrap();
    let witness = best_response(&inst, &prices).unwrap();
    c.check(witness.cost == rat_int(4), "cost 4");
    c.check(witness.revenue == rat_int(4), "revenue 4 = M");
    c.check(
        !uses_shortcut(&inst, &map, &witness.edges),
        "no shortcut on bought path",
    );
    c.check(start.elapsed().as_secs() < 1, "under 1s");
    c.finish();
}

#[test]
fn criterion_2_exact_optimum_and_grid_agreement() {
    let start = Instant::now();
    let mut c = Criterion::new(2);
    let (_, inst, _) = example(ShortcutMode::All);
    match optimal_pricing(&inst, 1 << 20).unwrap() {
        OptimalOutcome::Priced(opt) => {
            c.check(opt.revenue == rat_int(4), "exact optimum 4");
            c.check(
                opt.revenue == fixed_baseline_cost(&inst).unwrap(),
                "matches baseline",
            );
        }
        OptimalOutcome::Unbounded => c.check(false, "solver returned unbounded"),
    }
    let grid = grid_oracle(
        &inst,
        &[rat_int(0), rat(1, 2), rat(3, 4), rat_int(1)],
        1 << 40,
    )
    .unwrap();
    c.check(
        grid == rat_int(4),
        "grid oracle over {0,1/2,3/4,1,inf} agrees",
    );
    c.check(start.elapsed().as_secs() < 10, "under 10s");
    c.finish();
}

/// Deliberately red. The claimed best response contains two adjacent-gadget
/// shortcuts of cost 1/2; replacing each by the free chain detour
/// v→t→s→u yields a path with the same pricable edges costing exactly 1
/// less, so the claimed path loses under every pricing. The realizable
/// numbers are pinned in `p1_reference_path_behavior` below.
#[test]
fn criterion_3_p1_bound() {
    let mut c = Criterion::new(3);
    let (_, inst, map) = example(ShortcutMode::All);
    let mut prices = inf_everywhere(&inst);
    for label in ["g1:a2", "g2:a1", "g3:a1", "g4:a2"] {
        prices.set(label, Price::Finite(rat(3, 4)));
    }
    let witness = best_response(&inst, &prices).unwrap();
    c.check(witness.revenue == rat_int(3), "revenue 3");
    c.check(
        witness.cost == rat_int(4),
        "cost 4 (actual best response is the shortcut-free chain at cost 3: \
         each contained adjacent shortcut costs 1/2 while its chain detour is free)",
    );
    c.check(
        uses_shortcut(&inst, &map, &witness.edges),
        "bought path contains the two cost-1/2 shortcuts (structurally impossible \
         for a cheapest path; the chain using the same pricable edges is cheaper by 1)",
    );
    let (_, decomp) = decompose(&inst, &map, &prices).unwrap();
    let s_segments: Vec<_> = decomp
        .segments
        .iter()
        .filter(|s| s.role == Role::S)
        .collect();
    c.check(
        s_segments.len() == 2
            && s_segments
                .iter()
                .all(|s| s.revenue == rat(3, 2) && s.len() == 2),
        "two S segments at the (len+1)/2 boundary (actual decomposition has none: \
         no best response ever contains an adjacent shortcut)",
    );
    c.finish();
}

/// The realizable side of the two-shortcut path: traced as a hypothetical
/// path it splits into two S segments at the boundary, and the real best
/// response under the same prices collects the same revenue 3.
#[test]
fn p1_reference_path_behavior() {
    let (_, inst, map) = example(ShortcutMode::All);
    let mut prices = inf_everywhere(&inst);
    for label in ["g1:a2", "g2:a1", "g3:a1", "g4:a2"] {
        prices.set(label, Price::Finite(rat(3, 4)));
    }
    let witness = best_response(&inst, &prices).unwrap();
    assert_eq!(witness.cost, rat_int(3));
    assert_eq!(witness.revenue, rat_int(3));
    assert!(!uses_shortcut(&inst, &map, &witness.edges));

    // The hypothetical two-shortcut path, traced directly.
    let p1 = vec![0usize, 5, 6, 11, 12, 15, 16, 19, 20, 29, 30, 31];
    let edges = path_by_vertices(&inst, &p1);
    assert_eq!(path_cost(&inst, &prices, &edges).unwrap(), rat_int(4));
    let decomp = phase1_trace(&inst, &map, &prices, edges).unwrap();
    let spans: Vec<(Role, usize, usize)> = decomp
        .segments
        .iter()
        .map(|s| (s.role, s.start_gadget, s.end_gadget))
        .collect();
    assert_eq!(spans, vec![(Role::S, 1, 2), (Role::S, 3, 4)]);
    for seg in &decomp.segments {
        assert_eq!(seg.revenue, rat(3, 2));
        assert_eq!(seg.revenue, rat((seg.len() + 1) as i64, 2));
    }
    assert!(telescoping_ok(&inst, &map, &decomp));
}

fn path_by_vertices(inst: &PricingInstance, vs: &[usize]) -> Vec<EdgeId> {
    let mut edges = Vec::new();
    'pairs: for pair in vs.windows(2) {
        for (i, e) in inst.variable_edges.iter().enumerate() {
            if e.tail == pair[0] && e.head == pair[1] {
                edges.push(EdgeId::var(i));
                continue 'pairs;
            }
        }
        for (i, e) in inst.fixed_edges.iter().enumerate() {
            if e.tail == pair[0] && e.head == pair[1] {
                edges.push(EdgeId::fixed(i));
                continue 'pairs;
            }
        }
        panic!("no edge {} -> {}", pair[0], pair[1]);
    }
    edges
}

#[test]
fn criterion_4_p2_boundary() {
    let mut c = Criterion::new(4);
    let (_, inst, map) = example(ShortcutMode::All);
    let mut prices = inf_everywhere(&inst);
    prices.set("g1:a2", Price::Finite(rat_int(1)));
    prices.set("g2:a2", Price::Finite(rat(3, 4)));
    prices.set("g3:a0", Price::Finite(rat(3, 4)));
    prices.set("g4:a0", Price::Finite(rat_int(1)));
    let (witness, decomp) = decompose(&inst, &map, &prices).unwrap();
    c.check(witness.revenue == rat(7, 2), "revenue 7/2");
    let t_segments: Vec<_> = decomp
        .segments
        .iter()
        .filter(|s| s.role == Role::T)
        .collect();
    c.check(
        t_segments.len() == 1 && decomp.segments.len() == 1,
        "single T segment",
    );
    if let Some(seg) = t_segments.first() {
        let bound = rat((seg.len() - 1) as i64, 2) + rat_int(2);
        c.check(
            seg.revenue == rat(7, 2) && seg.revenue == bound,
            "rev = (len-1)/2 + 2 exactly",
        );
    }
    let report = verify_properties(&inst, &map, &prices, &decomp, &rat(1, 4), ShortcutMode::All);
    c.check(report.all_pass(), "property checks");
    c.finish();
}

/// Deliberately red on the strict upper bound. Both positions of every
/// clause are adjacent in the canonical order, so a pairwise-consistent
/// selection of price-1 edges (one per gadget, disagreeing only across
/// adjacent same-clause pairs whose shortcut never undercuts the free
/// chain) collects the full baseline 8. The exact solver confirms R* = 8;
/// `unsat_m8_reference_values` pins it.
#[test]
fn criterion_5_gap_sandwich() {
    let start = Instant::now();
    let mut c = Criterion::new(5);
    let (inst, map) = unsat_m8();
    let cs_blocks = reduction_to_cs(&inst, &map).unwrap();
    let half = half_pricing_for_reduction(&cs_blocks, &map);
    let half_revenue = best_response(&inst, &half).unwrap().revenue;
    c.check(half_revenue == rat_int(4), "half-pricing exactly 4 = M/2");
    let r_star = match optimal_pricing(&inst, 1 << 24).unwrap() {
        OptimalOutcome::Priced(opt) => opt.revenue,
        OptimalOutcome::Unbounded => panic!("unbounded on a baseline instance"),
    };
    c.check(r_star >= rat_int(4), "R* >= M/2");
    c.check(
        r_star < rat_int(8),
        &format!(
            "R* < 8 (exact solver returns R* = {}: adjacent same-clause positions \
             admit a pairwise-consistent full-price selection, so no gap exists at M=8)",
            fmt_rat(&r_star)
        ),
    );
    c.check(start.elapsed().as_secs() < 60, "under 60s");
    c.finish();
}

fn unsat_m8() -> (PricingInstance, GadgetMap) {
    let formula = parse_dimacs(&data("unsat2.cnf")).unwrap();
    let cs = build_constraints(&formula, 1, 1 << 20).unwrap();
    let order = SequenceOrder::identity(8, rat(1, 8)).unwrap();
    let mut params = GenParams::desk_defaults(1, rat(1, 8), rat(1, 3));
    params.shortcut_mode = ShortcutMode::All;
    build_instance(&cs, &order, &params).unwrap()
}

/// The honest numbers for the eight-constraint unsatisfiable instance.
#[test]
fn unsat_m8_reference_values() {
    let (inst, _map) = unsat_m8();
    assert_eq!(fixed_baseline_cost(&inst).unwrap(), rat_int(8));
    let r_star = match optimal_pricing(&inst, 1 << 24).unwrap() {
        OptimalOutcome::Priced(opt) => {
            // Self-check inside the solver already replayed the pricing
            // through the best response.
            assert_eq!(opt.witness.cost, rat_int(8));
            opt.revenue
        }
        OptimalOutcome::Unbounded => unreachable!(),
    };
    assert_eq!(r_star, rat_int(8));
}

/// Seeded random formula with distinct variables per clause.
fn random_formula(rng: &mut SplitMix64, width: usize, n: usize, clauses: usize) -> Formula {
    let mut text = format!("p cnf {n} {clauses}\n");
    for _ in 0..clauses {
        let mut vars: Vec<usize> = Vec::new();
        while vars.len() < width {
            let v = rng.next_below(n as u64) as usize + 1;
            if !vars.contains(&v) {
                vars.push(v);
            }
        }
        let lits: Vec<String> = vars
            .iter()
            .map(|&v| {
                if rng.next_below(2) == 0 {
                    format!("{v}")
                } else {
                    format!("-{v}")
                }
            })
            .collect();
        text.push_str(&format!("{} 0\n", lits.join(" ")));
    }
    parse_dimacs(&text).unwrap()
}

/// Seeded regular 3SAT(5) formula: 5n/3 clauses, every variable in exactly
/// five, distinct variables per clause (configuration model with whole-pool
/// rejection).
fn regular_3sat5(rng: &mut SplitMix64, n: usize) -> Formula {
    assert_eq!(n % 3, 0);
    'retry: for _ in 0..10_000 {
        let mut pool: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat(v).take(5)).collect();
        stacksp_core::rng::shuffle(&mut pool, rng);
        let mut text = format!("p cnf {n} {}\n", 5 * n / 3);
        for clause in pool.chunks(3) {
            if clause[0] == clause[1] || clause[0] == clause[2] || clause[1] == clause[2] {
                continue 'retry;
            }
            let lits: Vec<String> = clause
                .iter()
                .map(|&v| {
                    if rng.next_below(2) == 0 {
                        format!("{}", v + 1)
                    } else {
                        format!("-{}", v + 1)
                    }
                })
                .collect();
            text.push_str(&format!("{} 0\n", lits.join(" ")));
        }
        let formula = parse_dimacs(&text).unwrap();
        assert!(stacksp_core::csp::check_3sat5_regularity(&formula).is_regular);
        return formula;
    }
    panic!("could not draw a regular formula");
}

#[test]
fn criterion_6_half_pricing_identity() {
    let mut c = Criterion::new(6);
    let mut rng = SplitMix64::new(0xC6);
    let mut runs = 0usize;
    let mut all_exact = true;
    while runs < 50 {
        let n = 4 + rng.next_below(6) as usize; // 4..=9
        let clauses = 3 + rng.next_below(6) as usize; // 3..=8
        let formula = random_formula(&mut rng, 3, n, clauses);
        let cs = build_constraints(&formula, 1, 1 << 20).unwrap();
        let m = cs.constraint_count();
        let delta = rat(1, m as i64);
        let order = if runs % 3 == 0 {
            SequenceOrder::identity(m, delta.clone()).unwrap()
        } else {
            random_far_order(&cs, &delta, &rat_int(1), rng.next_u64(), 5)
                .unwrap()
                .order
        };
        let mut params = GenParams::desk_defaults(1, delta, rat(1, 3));
        params.shortcut_mode = if runs % 2 == 0 {
            ShortcutMode::Far
        } else {
            ShortcutMode::All
        };
        let (inst, map) = build_instance(&cs, &order, &params).unwrap();
        let blocks = reduction_to_cs(&inst, &map).unwrap();
        let prices = half_pricing_for_reduction(&blocks, &map);
        let witness = best_response(&inst, &prices).unwrap();
        let target = rat(m as i64, 2);
        if witness.revenue != target {
            all_exact = false;
        }
        runs += 1;
    }
    c.check(runs >= 50, "50 generated instances");
    c.check(
        all_exact,
        "half-pricing revenue = M/2 exactly on every instance",
    );
    c.finish();
}

#[test]
fn criterion_7_far_sequence_guarantees() {
    let mut c = Criterion::new(7);
    let mut rng = SplitMix64::new(0xC7);
    let mut formulas = 0usize;
    let mut derandomized_ok = true;
    let mut traces_ok = true;
    let mut bound_ok = true;
    let mut trials = 0usize;
    let mut trial_successes = 0usize;
    for k in 0..20usize {
        let n = 18 + 3 * k; // M = 5n in 90..=375
        let formula = regular_3sat5(&mut rng, n);
        let cs = build_constraints(&formula, 1, 1 << 20).unwrap();
        let m = cs.constraint_count();
        assert_eq!(m, 5 * n);
        let delta = rat(2, m as i64); // > 1/M
        let gamma = rat(80, m as i64); // = 40δ, the regime boundary
        assert!(gamma <= rat_int(1));

        let out = derandomized_far_order(&cs, &delta).unwrap();
        if out.fraction < rat_int(1) - &gamma {
            derandomized_ok = false;
        }
        if !out.trace.windows(2).all(|w| w[1] <= w[0]) {
            traces_ok = false;
        }
        if rat_int(non_far_count(&cs, &out.order) as i64) > *out.trace.last().unwrap() {
            bound_ok = false;
        }

        for _ in 0..50 {
            trials += 1;
            if random_far_order(&cs, &delta, &gamma, rng.next_u64(), 10).is_ok() {
                trial_successes += 1;
            }
        }
        formulas += 1;
    }
    c.check(formulas == 20, "20 regular formulas, M ≤ 2000");
    c.check(
        derandomized_ok,
        "derandomized fraction ≥ 1 − γ on 100% of formulas",
    );
    c.check(traces_ok, "estimator traces non-increasing");
    c.check(bound_ok, "non-far count ≤ final estimator");
    let success_rate_ok = trial_successes * 100 >= trials * 99;
    c.check(
        success_rate_ok,
        &format!("randomized within 10 retries: {trial_successes}/{trials}"),
    );
    c.finish();
}

/// Far-mode instance battery: random width-3 and width-2 formulas plus the
/// regular one, random and identity orders.
fn battery_instances(
    rng: &mut SplitMix64,
) -> Vec<(ConstraintSystem, PricingInstance, GadgetMap, Rat)> {
    let mut out = Vec::new();
    for k in 0..10usize {
        let formula = match k % 3 {
            0 => {
                let n = 4 + rng.next_below(5) as usize;
                let clauses = 3 + rng.next_below(4) as usize;
                random_formula(rng, 2, n, clauses)
            }
            1 => {
                let n = 4 + rng.next_below(6) as usize;
                let clauses = 3 + rng.next_below(5) as usize;
                random_formula(rng, 3, n, clauses)
            }
            _ => parse_dimacs(&data("regular3sat5_n3.cnf")).unwrap(),
        };
        let ell = if k == 9 { 2 } else { 1 };
        let formula = if ell == 2 {
            // Keep the two-repetition system small.
            parse_dimacs(&data("max2sat_example.cnf")).unwrap()
        } else {
            formula
        };
        let cs = build_constraints(&formula, ell, 1 << 20).unwrap();
        let m = cs.constraint_count();
        let delta = rat(1, 1 + rng.next_below(m as u64 - 1) as i64);
        let order = if k % 2 == 0 {
            SequenceOrder::identity(m, delta.clone()).unwrap()
        } else {
            random_far_order(&cs, &delta, &rat_int(1), rng.next_u64(), 5)
                .unwrap()
                .order
        };
        let params = GenParams::desk_defaults(ell, delta.clone(), rat(1, 3));
        let (inst, map) = build_instance(&cs, &order, &params).unwrap();
        assert!(validate_instance(&inst).is_clean());
        out.push((cs, inst, map, delta));
    }
    out
}

fn sample_pricing(rng: &mut SplitMix64, inst: &PricingInstance) -> PriceAssignment {
    let grid = [
        Price::Finite(rat_int(0)),
        Price::Finite(rat(1, 4)),
        Price::Finite(rat(1, 2)),
        Price::Finite(rat(3, 4)),
        Price::Finite(rat_int(1)),
        Price::Finite(rat(3, 2)),
        Price::Inf,
    ];
    let mut prices = PriceAssignment::new();
    for e in &inst.variable_edges {
        let pick = rng.next_below(grid.len() as u64) as usize;
        prices.set(e.label.clone(), grid[pick].clone());
    }
    prices
}

#[test]
fn criterion_8_decomposition_property_suite() {
    let mut c = Criterion::new(8);
    let mut rng = SplitMix64::new(0xC8);
    let instances = battery_instances(&mut rng);
    let mut pairs = 0usize;
    let mut property_failures = 0usize;
    let mut conflict_failures = 0usize;
    for (cs, inst, map, delta) in &instances {
        for _ in 0..20 {
            let prices = sample_pricing(&mut rng, inst);
            let (_, decomp) = decompose(inst, map, &prices).unwrap();
            let report = verify_properties(inst, map, &prices, &decomp, delta, ShortcutMode::Far);
            if !report.all_pass() {
                property_failures += 1;
                eprintln!("property failure: {report:?}");
            }
            let outcome = decode_assignment(cs, map, &decomp);
            if !outcome.conflicts.is_empty() || outcome.satisfied < outcome.far_edges {
                conflict_failures += 1;
            }
            pairs += 1;
        }
    }
    c.check(pairs >= 200, &format!("{pairs} (instance, pricing) pairs"));
    c.check(property_failures == 0, "checks (a)-(g) pass on every pair");
    c.check(
        conflict_failures == 0,
        "decode: zero conflicts, satisfied ≥ |F|",
    );
    c.finish();
}

/// Exhaustive best-response oracle: minimum cost, then maximum revenue.
fn oracle_best(inst: &PricingInstance, prices: &PriceAssignment) -> Option<(Rat, Rat)> {
    let paths = enumerate_paths(inst, 10_000).unwrap();
    let mut best: Option<(Rat, Rat)> = None;
    for path in paths {
        let Ok(cost) = path_cost(inst, prices, &path) else {
            continue;
        };
        let mut revenue = Rat::zero();
        for id in &path {
            if id.kind == EdgeKind::Var {
                if let Some(Price::Finite(p)) = prices.get(&inst.variable_edges[id.index].label) {
                    revenue += p;
                }
            }
        }
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

/// Grid oracle restricted to one bought path: the maximum of Σ p over grid
/// pricings of the path's own edges under which the path stays weakly
/// cheapest (checked through the independent best response).
fn grid_oracle_on_path(inst: &PricingInstance, path: &[EdgeId], grid: &[Rat]) -> Option<Rat> {
    let vars: Vec<usize> = path
        .iter()
        .filter(|id| id.kind == EdgeKind::Var)
        .map(|id| id.index)
        .collect();
    let mut best: Option<Rat> = None;
    let mut digits = vec![0usize; vars.len()];
    loop {
        let mut prices = PriceAssignment::new();
        for e in &inst.variable_edges {
            prices.set(e.label.clone(), Price::Inf);
        }
        let mut total = Rat::zero();
        for (slot, &var) in vars.iter().enumerate() {
            let value = grid[digits[slot]].clone();
            total += &value;
            prices.set(inst.variable_edges[var].label.clone(), Price::Finite(value));
        }
        if let Ok(witness) = best_response(inst, &prices) {
            if path_cost(inst, &prices, path).unwrap() == witness.cost
                && best.as_ref().map_or(true, |b| total > *b)
            {
                best = Some(total);
            }
        }
        // Odometer.
        let mut slot = vars.len();
        loop {
            if slot == 0 {
                return best;
            }
            slot -= 1;
            digits[slot] += 1;
            if digits[slot] < grid.len() {
                break;
            }
            digits[slot] = 0;
            if slot == 0 {
                return best;
            }
        }
    }
}

#[test]
fn criterion_9_oracle_equivalences() {
    let mut c = Criterion::new(9);
    let mut rng = SplitMix64::new(0xC9);

    // (i) Best response against exhaustive enumeration, on everything with
    // at most ten thousand paths.
    let mut br_checks = 0usize;
    let mut br_failures = 0usize;
    let mut small: Vec<PricingInstance> = Vec::new();
    let (_, ex_all, _) = example(ShortcutMode::All);
    let (_, ex_far, _) = example(ShortcutMode::Far);
    small.push(ex_all.clone());
    small.push(ex_far);
    for k in 0..8usize {
        let formula = if k % 2 == 0 {
            let n = 3 + rng.next_below(3) as usize;
            let clauses = 2 + rng.next_below(2) as usize;
            random_formula(&mut rng, 2, n, clauses)
        } else {
            random_formula(&mut rng, 3, 4, 1)
        };
        let cs = build_constraints(&formula, 1, 1 << 20).unwrap();
        let m = cs.constraint_count();
        let delta = rat(1, m as i64);
        let order = SequenceOrder::identity(m, delta.clone()).unwrap();
        let mut params = GenParams::desk_defaults(1, delta, rat(1, 3));
        params.shortcut_mode = if k % 2 == 0 {
            ShortcutMode::All
        } else {
            ShortcutMode::Far
        };
        let (inst, _) = build_instance(&cs, &order, &params).unwrap();
        if count_paths(&inst).unwrap() <= BigUint::from(10_000u32) {
            small.push(inst);
        }
    }
    for _ in 0..4 {
        let blocks = (0..(2 + rng.next_below(2) as usize))
            .map(|_| stacksp_core::solvers::CsBlock {
                cost: rat(1 + rng.next_below(4) as i64, 2),
                path_count: 1 + rng.next_below(3) as usize,
            })
            .collect::<Vec<_>>();
        let mut shortcuts = Vec::new();
        if blocks.len() > 1 && rng.next_below(2) == 0 {
            shortcuts.push(stacksp_core::solvers::CsShortcut {
                from_block: 1,
                from_path: 1,
                to_block: blocks.len(),
                to_path: 1,
                cost: rat(rng.next_below(4) as i64, 2),
            });
        }
        let cs = stacksp_core::solvers::CsInstance { blocks, shortcuts };
        let (inst, _) = stacksp_core::solvers::cs_to_pricing_instance(&cs).unwrap();
        small.push(inst);
    }
    for inst in &small {
        for _ in 0..15 {
            let prices = sample_pricing(&mut rng, inst);
            let oracle = oracle_best(inst, &prices);
            let got = best_response(inst, &prices)
                .ok()
                .map(|w| (w.cost, w.revenue));
            if oracle != got {
                br_failures += 1;
            }
            br_checks += 1;
        }
    }
    c.check(
        br_checks >= 100 && br_failures == 0,
        &format!("best response = enumeration oracle on {br_checks} runs"),
    );

    // (ii) Fixed-path revenue program against the grid oracle.
    let mut lp_checks = 0usize;
    let mut lp_failures = 0usize;
    'outer: for inst in &small {
        let paths = enumerate_paths(inst, 10_000).unwrap();
        for path in paths.iter().filter(|p| {
            let vars = p.iter().filter(|id| id.kind == EdgeKind::Var).count();
            vars >= 1 && vars <= 3
        }) {
            match fixed_path_max_revenue(inst, path, 1 << 20).unwrap() {
                PathRevenue::Priced { prices, revenue } => {
                    // Quarter grid up to the baseline plus the program's own
                    // optimal levels, so the optimum is representable.
                    let mut grid: Vec<Rat> = (0..=16).map(|k| rat(k, 4)).collect();
                    for (_, value) in &prices {
                        if !grid.contains(value) {
                            grid.push(value.clone());
                        }
                    }
                    let oracle = grid_oracle_on_path(inst, path, &grid);
                    if oracle != Some(revenue.clone()) {
                        lp_failures += 1;
                        eprintln!("lp mismatch: {oracle:?}");
                    }
                    // Replay: the returned pricing keeps the path weakly
                    // cheapest and the client pays exactly the program's
                    // revenue back to the seller.
                    let mut full = inf_everywhere(inst);
                    for (label, value) in &prices {
                        full.set(label.clone(), Price::Finite(value.clone()));
                    }
                    let replay = best_response(inst, &full).unwrap();
                    if replay.revenue != revenue
                        || replay.cost != path_cost(inst, &full, path).unwrap()
                    {
                        lp_failures += 1;
                    }
                    lp_checks += 1;
                    if lp_checks >= 60 {
                        break 'outer;
                    }
                }
                PathRevenue::Infeasible => continue,
                PathRevenue::Unbounded => {
                    lp_failures += 1;
                    lp_checks += 1;
                }
            }
        }
    }
    c.check(
        lp_checks >= 50 && lp_failures == 0,
        &format!("fixed-path program = grid oracle on {lp_checks} tiny cases"),
    );

    // (iii) Size report equals constructed counts on every generated
    // instance.
    let mut size_ok = true;
    for (cs, inst, map, _) in battery_instances(&mut rng) {
        let report = size_report(
            cs.formula.variable_count,
            cs.ell,
            cs.formula.width,
            Some(cs.formula.clauses.len()),
        )
        .unwrap();
        let m = map.gadget_count();
        size_ok &= report.constraint_count == BigUint::from(m);
        size_ok &= report.total_vertices == BigUint::from(inst.vertex_count);
        let local =
            inst.fixed_edges.len() + inst.variable_edges.len() - (m - 1) - map.shortcuts.len();
        size_ok &=
            report.gadget_edges_per_gadget.clone() * BigUint::from(m) == BigUint::from(local);
        size_ok &= report.chain_edges == BigUint::from(m - 1);
        // Shortcut bound is per sharing pair.
        let mut per_pair = std::collections::HashMap::new();
        for sc in &map.shortcuts {
            *per_pair.entry((sc.from_pos, sc.to_pos)).or_insert(0usize) += 1;
        }
        size_ok &= per_pair
            .values()
            .all(|&count| BigUint::from(count) <= report.shortcut_pair_bound);
    }
    c.check(size_ok, "size report matches every generated instance");
    c.finish();
}

/// Revenue dominance ladder and the baseline ceiling on the worked example.
#[test]
fn solver_dominance_invariants() {
    let (cs, inst, map) = example(ShortcutMode::All);
    let baseline = fixed_baseline_cost(&inst).unwrap();
    let optimal = match optimal_pricing(&inst, 1 << 20).unwrap() {
        OptimalOutcome::Priced(opt) => opt.revenue,
        OptimalOutcome::Unbounded => unreachable!(),
    };
    assert!(optimal <= baseline);

    let grid = grid_oracle(&inst, &[rat_int(0), rat(1, 2), rat_int(1)], 1 << 40).unwrap();
    assert!(optimal >= grid);

    let blocks = reduction_to_cs(&inst, &map).unwrap();
    let half = half_pricing_for_reduction(&blocks, &map);
    let half_rev = best_response(&inst, &half).unwrap().revenue;
    assert!(optimal >= half_rev);

    let assignment = global_from_assignment(&cs, &[true, true, false]).unwrap();
    let yes = yes_pricing(&cs, &map, &assignment).unwrap();
    let yes_rev = best_response(&inst, &yes).unwrap().revenue;
    assert!(optimal >= yes_rev);

    // Revenue ≤ cost ≤ baseline on arbitrary pricings.
    let mut rng = SplitMix64::new(11);
    for _ in 0..50 {
        let prices = sample_pricing(&mut rng, &inst);
        let w = best_response(&inst, &prices).unwrap();
        assert!(w.revenue <= w.cost);
        assert!(w.cost <= baseline);
    }
}

/// The far-fraction/theorem regime sanity on the in-repo regular formula,
/// including the shared-pair degree cap.
#[test]
fn regular_formula_shared_degree_cap() {
    let formula = parse_dimacs(&data("regular3sat5_n3.cnf")).unwrap();
    let cs = build_constraints(&formula, 1, 1 << 20).unwrap();
    for list in cs.shared_neighbors() {
        assert!(list.len() + 1 <= 3 + 5);
    }
    let order = SequenceOrder::identity(15, rat(1, 15)).unwrap();
    let flags = delta_far_flags(&cs, &order);
    assert_eq!(flags.len(), 15);
    assert!(far_fraction(&cs, &order) <= rat_int(1));
}

/// Width-2 regular check is rejected by the width gate.
#[test]
fn width2_formula_not_3sat5_regular() {
    let formula = parse_dimacs(&data("max2sat_example.cnf")).unwrap();
    let report = stacksp_core::csp::check_3sat5_regularity(&formula);
    assert!(!report.is_width3);
    assert!(!report.is_regular);
}

/// Bruteforce satisfaction bound on the unsatisfiable system is 7 of 8.
#[test]
fn unsat_system_bruteforce_bound() {
    let formula = parse_dimacs(&data("unsat2.cnf")).unwrap();
    let cs = build_constraints(&formula, 1, 1 << 20).unwrap();
    let best = stacksp_core::csp::max_satisfiable_bruteforce(&cs, 1 << 30).unwrap();
    assert_eq!(best, 7);
    assert!(best < cs.constraint_count());
}

/// A generated instance's lowest-level invariant: revenue components.
#[test]
fn witness_arithmetic_invariants() {
    let (_, inst, _) = example(ShortcutMode::All);
    let mut rng = SplitMix64::new(5);
    for _ in 0..30 {
        let prices = sample_pricing(&mut rng, &inst);
        let w = best_response(&inst, &prices).unwrap();
        let fixed_part: Rat = w
            .edges
            .iter()
            .filter(|id| id.kind == EdgeKind::Fixed)
            .map(|id| inst.fixed_edges[id.index].cost.clone())
            .fold(Rat::zero(), |a, b| a + b);
        assert_eq!(&w.cost - &w.revenue, fixed_part);
        assert!(!w.revenue.is_negative());
        assert!(BigUint::one() > BigUint::zero()); // keep num imports honest
    }
}
