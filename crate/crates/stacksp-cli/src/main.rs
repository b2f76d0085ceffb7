//! `stacksp`: generate, price, evaluate, solve, decompose, and verify
//! Stackelberg shortest-path pricing instances.
//!
//! Exit codes: 0 success, 2 invalid input, 3 infeasible or unbounded,
//! 4 budget exceeded.

use clap::{Args, Parser, Subcommand, ValueEnum};
use stacksp_core::buyer::{best_response, fixed_baseline_cost, BuyerError};
use stacksp_core::csp::{
    build_constraints, global_from_assignment, parse_dimacs, ConstraintSystem, Formula,
};
use stacksp_core::decomposition::{decompose, verify_properties, DecomposeError};
use stacksp_core::farseq::{
    delta_far_flags, derandomized_far_order, far_fraction, random_far_order, SequenceOrder,
};
use stacksp_core::instance::{
    parse_instance, serialize_instance, PriceAssignment, PricingInstance,
};
use stacksp_core::reduction::{
    build_instance, decode_assignment, size_report, yes_pricing, GadgetMap, GenParams, OrderMode,
    ShortcutMode,
};
use stacksp_core::rng::SplitMix64;
use stacksp_core::scalar::{fmt_rat, parse_rat, rat_int, Price, Rat};
use stacksp_core::solvers::{
    cs_to_pricing_instance, default_candidate_grid, half_pricing, half_pricing_for_reduction,
    optimal_pricing, reduction_to_cs, CsInstance, OptimalOutcome, SolveError,
};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_INVALID: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_BUDGET: u8 = 4;

#[derive(Parser)]
#[command(name = "stacksp", about = "Stackelberg shortest-path pricing toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OrderArg {
    Identity,
    Random,
    Derandomized,
}

#[derive(Clone, Copy, ValueEnum)]
enum ShortcutArg {
    Far,
    All,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    cnf: PathBuf,
    #[arg(long, default_value_t = 1)]
    ell: usize,
    /// Far-window parameter δ, a rational like 1/8.
    #[arg(long, default_value = "1/8")]
    delta: String,
    /// Far-fraction slack γ for random ordering.
    #[arg(long, default_value = "1/3")]
    gamma: String,
    #[arg(long, value_enum, default_value_t = OrderArg::Identity)]
    order: OrderArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = ShortcutArg::Far)]
    shortcuts: ShortcutArg,
    #[arg(long, default_value_t = 1 << 20)]
    max_vertices: usize,
    #[arg(long, default_value_t = 20)]
    retries: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    map: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Build a pricing instance from a CNF formula.
    Gen(GenArgs),
    /// Emit the price function realizing a satisfying assignment.
    YesPrice {
        #[arg(long)]
        cnf: PathBuf,
        #[arg(long, default_value_t = 1)]
        ell: usize,
        #[arg(long)]
        map: PathBuf,
        /// Assignment bits, most significant = variable 1 (default: first
        /// satisfying assignment by brute force).
        #[arg(long)]
        assignment: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a pricing: best-response cost, revenue, optional path.
    Eval {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        prices: PathBuf,
        #[arg(long, default_value_t = false)]
        print_path: bool,
    },
    /// Exact optimal pricing by candidate-path scanning.
    SolveExact {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value_t = 1 << 24)]
        max_paths: u128,
        #[arg(long)]
        out_prices: Option<PathBuf>,
    },
    /// Half-price strategy on a block instance (or a generated instance).
    TwoApprox {
        #[arg(long)]
        cs: Option<PathBuf>,
        #[arg(long)]
        instance: Option<PathBuf>,
        #[arg(long)]
        map: Option<PathBuf>,
    },
    /// Decompose the best response and check the per-segment bounds.
    Decompose {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        prices: PathBuf,
        /// δ for the far-window cardinality checks.
        #[arg(long)]
        delta: Option<String>,
        #[arg(long, value_enum, default_value_t = ShortcutArg::Far)]
        shortcuts: ShortcutArg,
    },
    /// Decode an assignment from the decomposition's R segments.
    Decode {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        prices: PathBuf,
        #[arg(long)]
        cnf: PathBuf,
        #[arg(long, default_value_t = 1)]
        ell: usize,
    },
    /// Order constraints into a far sequence and report flags.
    Farseq {
        #[arg(long)]
        cnf: PathBuf,
        #[arg(long, default_value_t = 1)]
        ell: usize,
        #[arg(long, default_value = "1/8")]
        delta: String,
        #[arg(long, default_value = "1/3")]
        gamma: String,
        #[arg(long, value_enum, default_value_t = OrderArg::Identity)]
        order: OrderArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        retries: usize,
    },
    /// Predicted construction sizes.
    Size {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        ell: usize,
        #[arg(long, default_value_t = 3)]
        width: usize,
        #[arg(long)]
        clauses: Option<usize>,
    },
    /// End-to-end pipeline: generate, price, solve, decompose, report.
    Verify {
        #[arg(long)]
        cnf: PathBuf,
        #[arg(long, default_value_t = 1)]
        ell: usize,
        #[arg(long, default_value = "1/8")]
        delta: String,
        #[arg(long, default_value = "1/3")]
        gamma: String,
        #[arg(long, value_enum, default_value_t = OrderArg::Identity)]
        order: OrderArg,
        #[arg(long, value_enum, default_value_t = ShortcutArg::Far)]
        shortcuts: ShortcutArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1 << 24)]
        max_paths: u128,
        /// Number of random pricings in the decomposition battery.
        #[arg(long, default_value_t = 10)]
        battery: usize,
    },
}

#[derive(Debug)]
struct CmdError {
    code: u8,
    message: String,
}

impl CmdError {
    fn invalid(message: impl Into<String>) -> Self {
        CmdError {
            code: EXIT_INVALID,
            message: message.into(),
        }
    }
    fn infeasible(message: impl Into<String>) -> Self {
        CmdError {
            code: EXIT_INFEASIBLE,
            message: message.into(),
        }
    }
    fn budget(message: impl Into<String>) -> Self {
        CmdError {
            code: EXIT_BUDGET,
            message: message.into(),
        }
    }
}

impl From<BuyerError> for CmdError {
    fn from(e: BuyerError) -> Self {
        match e {
            BuyerError::TooManyPaths { .. } => CmdError::budget(e.to_string()),
            BuyerError::SinkUnreachable | BuyerError::NoFixedBaseline => {
                CmdError::infeasible(e.to_string())
            }
            other => CmdError::invalid(other.to_string()),
        }
    }
}

impl From<SolveError> for CmdError {
    fn from(e: SolveError) -> Self {
        match e {
            SolveError::BudgetExceeded { .. } | SolveError::GridBudgetExceeded { .. } => {
                CmdError::budget(e.to_string())
            }
            SolveError::Buyer(inner) => inner.into(),
            other => CmdError::invalid(other.to_string()),
        }
    }
}

impl From<DecomposeError> for CmdError {
    fn from(e: DecomposeError) -> Self {
        match e {
            DecomposeError::Buyer(inner) => inner.into(),
            other => CmdError::invalid(other.to_string()),
        }
    }
}

fn read_file(path: &Path) -> Result<String, CmdError> {
    std::fs::read_to_string(path)
        .map_err(|e| CmdError::invalid(format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CmdError> {
    std::fs::write(path, contents)
        .map_err(|e| CmdError::invalid(format!("cannot write {}: {e}", path.display())))
}

fn parse_rat_arg(text: &str, name: &str) -> Result<Rat, CmdError> {
    parse_rat(text).map_err(|e| CmdError::invalid(format!("bad --{name}: {e}")))
}

fn load_formula(path: &Path) -> Result<Formula, CmdError> {
    parse_dimacs(&read_file(path)?).map_err(|e| CmdError::invalid(e.to_string()))
}

fn load_instance(path: &Path) -> Result<PricingInstance, CmdError> {
    parse_instance(&read_file(path)?).map_err(|e| CmdError::invalid(e.to_string()))
}

fn load_prices(path: &Path, inst: &PricingInstance) -> Result<PriceAssignment, CmdError> {
    let prices =
        PriceAssignment::parse(&read_file(path)?).map_err(|e| CmdError::invalid(e.to_string()))?;
    prices
        .check_complete_for(inst)
        .map_err(|e| CmdError::invalid(e.to_string()))?;
    Ok(prices)
}

fn load_map(path: &Path) -> Result<GadgetMap, CmdError> {
    GadgetMap::parse(&read_file(path)?).map_err(|e| CmdError::invalid(e.to_string()))
}

fn build_cs(formula: &Formula, ell: usize) -> Result<ConstraintSystem, CmdError> {
    build_constraints(formula, ell, 1 << 24).map_err(|e| match e {
        stacksp_core::csp::CspError::BudgetExceeded { .. } => CmdError::budget(e.to_string()),
        other => CmdError::invalid(other.to_string()),
    })
}

fn make_order(
    cs: &ConstraintSystem,
    order: OrderArg,
    delta: &Rat,
    gamma: &Rat,
    seed: u64,
    retries: usize,
) -> Result<(SequenceOrder, usize), CmdError> {
    let m = cs.constraint_count();
    match order {
        OrderArg::Identity => Ok((
            SequenceOrder::identity(m, delta.clone())
                .map_err(|e| CmdError::invalid(e.to_string()))?,
            0,
        )),
        OrderArg::Random => {
            let outcome = random_far_order(cs, delta, gamma, seed, retries)
                .map_err(|e| CmdError::infeasible(e.to_string()))?;
            Ok((outcome.order, outcome.attempts))
        }
        OrderArg::Derandomized => {
            let outcome =
                derandomized_far_order(cs, delta).map_err(|e| CmdError::invalid(e.to_string()))?;
            Ok((outcome.order, 0))
        }
    }
}

fn shortcut_mode(arg: ShortcutArg) -> ShortcutMode {
    match arg {
        ShortcutArg::Far => ShortcutMode::Far,
        ShortcutArg::All => ShortcutMode::All,
    }
}

fn path_line(inst: &PricingInstance, witness: &stacksp_core::PathWitness) -> String {
    witness
        .vertex_sequence(inst)
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

fn cmd_gen(args: GenArgs) -> Result<(), CmdError> {
    let delta = parse_rat_arg(&args.delta, "delta")?;
    let gamma = parse_rat_arg(&args.gamma, "gamma")?;
    let formula = load_formula(&args.cnf)?;
    let cs = build_cs(&formula, args.ell)?;
    let (order, _) = make_order(&cs, args.order, &delta, &gamma, args.seed, args.retries)?;
    let params = GenParams {
        ell: args.ell,
        delta: delta.clone(),
        gamma,
        shortcut_mode: shortcut_mode(args.shortcuts),
        order_mode: match args.order {
            OrderArg::Identity => OrderMode::Identity,
            OrderArg::Random => OrderMode::Random,
            OrderArg::Derandomized => OrderMode::Derandomized,
        },
        seed: args.seed,
        max_vertices: args.max_vertices,
        max_paths: 1 << 24,
    };
    let (inst, map) = build_instance(&cs, &order, &params).map_err(|e| match e {
        stacksp_core::reduction::ReductionError::BudgetExceeded { .. } => {
            CmdError::budget(e.to_string())
        }
        other => CmdError::invalid(other.to_string()),
    })?;
    write_file(&args.out, &serialize_instance(&inst))?;
    write_file(&args.map, &map.serialize())?;
    println!(
        "M {} vertices {} fixed_edges {} variable_edges {} shortcuts {} far_fraction {}",
        map.gadget_count(),
        inst.vertex_count,
        inst.fixed_edges.len(),
        inst.variable_edges.len(),
        map.shortcuts.len(),
        fmt_rat(&far_fraction(&cs, &order))
    );
    Ok(())
}

fn parse_assignment_bits(text: &str, n: usize) -> Result<Vec<bool>, CmdError> {
    if text.len() != n || !text.chars().all(|c| c == '0' || c == '1') {
        return Err(CmdError::invalid(format!(
            "--assignment must be {n} bits of 0/1"
        )));
    }
    Ok(text.chars().map(|c| c == '1').collect())
}

fn cmd_yes_price(
    cnf: &Path,
    ell: usize,
    map_path: &Path,
    assignment: Option<String>,
    out: &Path,
) -> Result<(), CmdError> {
    let formula = load_formula(cnf)?;
    let cs = build_cs(&formula, ell)?;
    let map = load_map(map_path)?;
    if map.gadget_count() != cs.constraint_count() {
        return Err(CmdError::invalid(
            "map does not match the constraint system",
        ));
    }
    let bits = match assignment {
        Some(text) => {
            let bits = parse_assignment_bits(&text, formula.variable_count)?;
            if !formula.satisfied_by(&bits) {
                return Err(CmdError::infeasible(
                    "assignment does not satisfy the formula",
                ));
            }
            bits
        }
        None => formula
            .first_satisfying_assignment()
            .ok_or_else(|| CmdError::infeasible("formula is unsatisfiable"))?,
    };
    let global =
        global_from_assignment(&cs, &bits).map_err(|e| CmdError::invalid(e.to_string()))?;
    let prices = yes_pricing(&cs, &map, &global).map_err(|e| CmdError::invalid(e.to_string()))?;
    write_file(out, &prices.serialize())?;
    let bit_text: String = bits.iter().map(|&b| if b { '1' } else { '0' }).collect();
    println!("assignment {bit_text} priced_edges {}", map.gadget_count());
    Ok(())
}

fn cmd_eval(instance: &Path, prices: &Path, print_path: bool) -> Result<(), CmdError> {
    let inst = load_instance(instance)?;
    let prices = load_prices(prices, &inst)?;
    let witness = best_response(&inst, &prices)?;
    if print_path {
        println!(
            "cost {} revenue {} path {}",
            fmt_rat(&witness.cost),
            fmt_rat(&witness.revenue),
            path_line(&inst, &witness)
        );
    } else {
        println!(
            "cost {} revenue {}",
            fmt_rat(&witness.cost),
            fmt_rat(&witness.revenue)
        );
    }
    Ok(())
}

fn cmd_solve_exact(
    instance: &Path,
    max_paths: u128,
    out_prices: Option<&Path>,
) -> Result<(), CmdError> {
    let inst = load_instance(instance)?;
    match optimal_pricing(&inst, max_paths)? {
        OptimalOutcome::Unbounded => Err(CmdError::infeasible("revenue is unbounded")),
        OptimalOutcome::Priced(opt) => {
            println!(
                "revenue {} cost {} path {}",
                fmt_rat(&opt.revenue),
                fmt_rat(&opt.witness.cost),
                path_line(&inst, &opt.witness)
            );
            if let Some(path) = out_prices {
                write_file(path, &opt.prices.serialize())?;
            }
            Ok(())
        }
    }
}

fn cmd_two_approx(
    cs_path: Option<&Path>,
    instance: Option<&Path>,
    map_path: Option<&Path>,
) -> Result<(), CmdError> {
    let (inst, prices, total) = match (cs_path, instance, map_path) {
        (Some(cs_path), None, None) => {
            let cs = CsInstance::parse(&read_file(cs_path)?)?;
            let (inst, _) = cs_to_pricing_instance(&cs)?;
            let prices = half_pricing(&cs);
            let total = cs.total_cost();
            (inst, prices, total)
        }
        (None, Some(instance), Some(map_path)) => {
            let inst = load_instance(instance)?;
            let map = load_map(map_path)?;
            let cs = reduction_to_cs(&inst, &map)?;
            let prices = half_pricing_for_reduction(&cs, &map);
            let total = cs.total_cost();
            (inst, prices, total)
        }
        _ => {
            return Err(CmdError::invalid(
                "pass either --cs, or --instance together with --map",
            ))
        }
    };
    let witness = best_response(&inst, &prices)?;
    let half = &total / rat_int(2);
    let shortfall = witness.revenue < half;
    println!(
        "c_total {} half {} revenue {} shortfall {}",
        fmt_rat(&total),
        fmt_rat(&half),
        fmt_rat(&witness.revenue),
        u8::from(shortfall)
    );
    Ok(())
}

fn cmd_decompose(
    instance: &Path,
    map_path: &Path,
    prices_path: &Path,
    delta: Option<String>,
    shortcuts: ShortcutArg,
) -> Result<(), CmdError> {
    let inst = load_instance(instance)?;
    let map = load_map(map_path)?;
    let prices = load_prices(prices_path, &inst)?;
    let (_, decomp) = decompose(&inst, &map, &prices)?;
    for seg in &decomp.segments {
        println!(
            "seg {} {} {} len {} rev {}",
            seg.role,
            seg.start_gadget,
            seg.end_gadget,
            seg.len(),
            fmt_rat(&seg.revenue)
        );
    }
    // Without a window parameter the cardinality checks are skipped, as in
    // all-shortcut mode.
    let (delta, mode) = match delta {
        Some(text) => (parse_rat_arg(&text, "delta")?, shortcut_mode(shortcuts)),
        None => (rat_int(1), ShortcutMode::All),
    };
    let report = verify_properties(&inst, &map, &prices, &decomp, &delta, mode);
    for check in &report.checks {
        println!(
            "{} {} {}",
            check.name,
            if check.passed { "PASS" } else { "FAIL" },
            check.detail
        );
    }
    if report.all_pass() {
        Ok(())
    } else {
        Err(CmdError::invalid("decomposition property check failed"))
    }
}

fn cmd_decode(
    instance: &Path,
    map_path: &Path,
    prices_path: &Path,
    cnf: &Path,
    ell: usize,
) -> Result<(), CmdError> {
    let inst = load_instance(instance)?;
    let map = load_map(map_path)?;
    let prices = load_prices(prices_path, &inst)?;
    let formula = load_formula(cnf)?;
    let cs = build_cs(&formula, ell)?;
    if map.gadget_count() != cs.constraint_count() {
        return Err(CmdError::invalid(
            "map does not match the constraint system",
        ));
    }
    let (_, decomp) = decompose(&inst, &map, &prices)?;
    let outcome = decode_assignment(&cs, &map, &decomp);
    print!("{}", outcome.assignment.serialize(cs.ell));
    println!(
        "satisfied {} of {} far_edges {} conflicts {}",
        outcome.satisfied,
        cs.constraint_count(),
        outcome.far_edges,
        outcome.conflicts.len()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_farseq(
    cnf: &Path,
    ell: usize,
    delta: String,
    gamma: String,
    order: OrderArg,
    seed: u64,
    retries: usize,
) -> Result<(), CmdError> {
    let delta = parse_rat_arg(&delta, "delta")?;
    let gamma = parse_rat_arg(&gamma, "gamma")?;
    let formula = load_formula(cnf)?;
    let cs = build_cs(&formula, ell)?;
    let (order, attempts) = make_order(&cs, order, &delta, &gamma, seed, retries)?;
    let flags = delta_far_flags(&cs, &order);
    for (k, (&constraint, &far)) in order.perm.iter().zip(&flags).enumerate() {
        println!(
            "pos {} constraint {} far {}",
            k + 1,
            constraint + 1,
            u8::from(far)
        );
    }
    if attempts > 0 {
        println!("attempts {attempts}");
    }
    println!("fraction {}", fmt_rat(&far_fraction(&cs, &order)));
    Ok(())
}

fn cmd_size(n: usize, ell: usize, width: usize, clauses: Option<usize>) -> Result<(), CmdError> {
    let report =
        size_report(n, ell, width, clauses).map_err(|e| CmdError::invalid(e.to_string()))?;
    println!(
        "M {} gadget_vertices {} total_vertices {} gadget_edges {} chain_edges {} shortcut_pair_bound {}",
        report.constraint_count,
        report.vertices_per_gadget,
        report.total_vertices,
        report.gadget_edges_per_gadget,
        report.chain_edges,
        report.shortcut_pair_bound
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_verify(
    cnf: &Path,
    ell: usize,
    delta_text: String,
    gamma_text: String,
    order: OrderArg,
    shortcuts: ShortcutArg,
    seed: u64,
    max_paths: u128,
    battery: usize,
) -> Result<(), CmdError> {
    let delta = parse_rat_arg(&delta_text, "delta")?;
    let gamma = parse_rat_arg(&gamma_text, "gamma")?;
    let formula = load_formula(cnf)?;
    let cs = build_cs(&formula, ell)?;
    let (seq, _) = make_order(&cs, order, &delta, &gamma, seed, 20)?;
    let mode = shortcut_mode(shortcuts);
    let params = GenParams {
        ell,
        delta: delta.clone(),
        gamma,
        shortcut_mode: mode,
        order_mode: OrderMode::Identity,
        seed,
        max_vertices: 1 << 20,
        max_paths,
    };
    let (inst, map) = build_instance(&cs, &seq, &params).map_err(|e| match e {
        stacksp_core::reduction::ReductionError::BudgetExceeded { .. } => {
            CmdError::budget(e.to_string())
        }
        other => CmdError::invalid(other.to_string()),
    })?;
    let m = map.gadget_count();
    println!(
        "M {} vertices {} fixed_edges {} variable_edges {} shortcuts {} far_fraction {}",
        m,
        inst.vertex_count,
        inst.fixed_edges.len(),
        inst.variable_edges.len(),
        map.shortcuts.len(),
        fmt_rat(&far_fraction(&cs, &seq))
    );

    let m_rat = rat_int(m as i64);
    let satisfying = formula.first_satisfying_assignment();
    println!("satisfiable {}", u8::from(satisfying.is_some()));

    let mut battery_pricings: Vec<PriceAssignment> = Vec::new();

    if let Some(bits) = &satisfying {
        let global =
            global_from_assignment(&cs, bits).map_err(|e| CmdError::invalid(e.to_string()))?;
        let prices =
            yes_pricing(&cs, &map, &global).map_err(|e| CmdError::invalid(e.to_string()))?;
        let witness = best_response(&inst, &prices)?;
        let pass = witness.revenue == m_rat && witness.cost == m_rat;
        println!(
            "check yes_pricing {} revenue {}",
            if pass { "PASS" } else { "FAIL" },
            fmt_rat(&witness.revenue)
        );
        battery_pricings.push(prices);
    }

    let baseline = fixed_baseline_cost(&inst)?;
    let optimal = match optimal_pricing(&inst, max_paths)? {
        OptimalOutcome::Unbounded => return Err(CmdError::infeasible("revenue is unbounded")),
        OptimalOutcome::Priced(opt) => opt,
    };
    println!("exact_optimal revenue {}", fmt_rat(&optimal.revenue));

    let csi = reduction_to_cs(&inst, &map)?;
    let half_prices = half_pricing_for_reduction(&csi, &map);
    let half_witness = best_response(&inst, &half_prices)?;
    let half_target = csi.total_cost() / rat_int(2);
    let half_pass = half_witness.revenue == half_target;
    println!(
        "check half_pricing {} revenue {} target {}",
        if half_pass { "PASS" } else { "FAIL" },
        fmt_rat(&half_witness.revenue),
        fmt_rat(&half_target)
    );

    let bounds_pass = half_witness.revenue <= optimal.revenue && optimal.revenue <= baseline;
    println!(
        "check revenue_bounds {} half {} optimal {} baseline {}",
        if bounds_pass { "PASS" } else { "FAIL" },
        fmt_rat(&half_witness.revenue),
        fmt_rat(&optimal.revenue),
        fmt_rat(&baseline)
    );

    // Decomposition battery: the named pricings plus seeded draws from the
    // default candidate grid.
    battery_pricings.push(half_prices);
    battery_pricings.push(optimal.prices.clone());
    let grid = default_candidate_grid(&inst, max_paths, 16)?;
    let mut rng = SplitMix64::new(seed ^ 0x5eed_f00d);
    for _ in 0..battery {
        let mut prices = PriceAssignment::new();
        for e in &inst.variable_edges {
            let pick = rng.next_below(grid.len() as u64 + 1) as usize;
            let price = if pick == grid.len() {
                Price::Inf
            } else {
                Price::Finite(grid[pick].clone())
            };
            prices.set(e.label.clone(), price);
        }
        battery_pricings.push(prices);
    }
    let mut battery_checks = 0usize;
    let mut battery_failures = 0usize;
    for prices in &battery_pricings {
        let (_, decomp) = decompose(&inst, &map, prices)?;
        let report = verify_properties(&inst, &map, prices, &decomp, &delta, mode);
        battery_checks += report.checks.len();
        battery_failures += report.checks.iter().filter(|c| !c.passed).count();
        let outcome = decode_assignment(&cs, &map, &decomp);
        battery_checks += 1;
        if !outcome.conflicts.is_empty() || outcome.satisfied < outcome.far_edges {
            battery_failures += 1;
        }
    }
    println!(
        "check decomposition {} pricings {} checks {} failures {}",
        if battery_failures == 0 {
            "PASS"
        } else {
            "FAIL"
        },
        battery_pricings.len(),
        battery_checks,
        battery_failures
    );

    println!("ratio {}", fmt_rat(&(m_rat / &optimal.revenue)));
    Ok(())
}

fn run(cli: Cli) -> Result<(), CmdError> {
    match cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::YesPrice {
            cnf,
            ell,
            map,
            assignment,
            out,
        } => cmd_yes_price(&cnf, ell, &map, assignment, &out),
        Command::Eval {
            instance,
            prices,
            print_path,
        } => cmd_eval(&instance, &prices, print_path),
        Command::SolveExact {
            instance,
            max_paths,
            out_prices,
        } => cmd_solve_exact(&instance, max_paths, out_prices.as_deref()),
        Command::TwoApprox { cs, instance, map } => {
            cmd_two_approx(cs.as_deref(), instance.as_deref(), map.as_deref())
        }
        Command::Decompose {
            instance,
            map,
            prices,
            delta,
            shortcuts,
        } => cmd_decompose(&instance, &map, &prices, delta, shortcuts),
        Command::Decode {
            instance,
            map,
            prices,
            cnf,
            ell,
        } => cmd_decode(&instance, &map, &prices, &cnf, ell),
        Command::Farseq {
            cnf,
            ell,
            delta,
            gamma,
            order,
            seed,
            retries,
        } => cmd_farseq(&cnf, ell, delta, gamma, order, seed, retries),
        Command::Size {
            n,
            ell,
            width,
            clauses,
        } => cmd_size(n, ell, width, clauses),
        Command::Verify {
            cnf,
            ell,
            delta,
            gamma,
            order,
            shortcuts,
            seed,
            max_paths,
            battery,
        } => cmd_verify(
            &cnf, ell, delta, gamma, order, shortcuts, seed, max_paths, battery,
        ),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
