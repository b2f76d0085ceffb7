//! CNF formulas and the two-prover constraint system built from them.
//!
//! A constraint pairs a tuple of `ell` clauses (the first prover's query)
//! with one chosen variable per clause (the second prover's query). The
//! first prover answers with a satisfying assignment per clause, the second
//! with one bit per chosen variable; the constraint is satisfied when the
//! projection of the first answer agrees with the second.
//!
//! Conventions, pinned for reproducibility:
//! - answer bits are ordered by ascending variable index within a clause,
//!   and satisfying assignments are listed in ascending binary value;
//! - constraints are enumerated lexicographically by (clause tuple,
//!   position tuple), positions indexing the clause's literal list;
//! - tuple coordinates are most-significant-first in all derived indices.

use num::{BigUint, One};
use std::collections::{BTreeMap, HashMap};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Literal {
    pub var: usize,
    pub positive: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clause {
    pub literals: Vec<Literal>,
}

impl Clause {
    /// Variables of the clause in ascending index order; answer bits follow
    /// this order, most significant first.
    pub fn sorted_vars(&self) -> Vec<usize> {
        let mut vars: Vec<usize> = self.literals.iter().map(|l| l.var).collect();
        vars.sort_unstable();
        vars
    }

    pub fn width(&self) -> usize {
        self.literals.len()
    }

    fn satisfied_by_value(&self, value: u8) -> bool {
        let vars = self.sorted_vars();
        let w = vars.len();
        self.literals.iter().any(|lit| {
            let pos = vars.iter().position(|&v| v == lit.var).unwrap();
            let bit = (value >> (w - 1 - pos)) & 1 == 1;
            bit == lit.positive
        })
    }

    /// The 2^w − 1 satisfying assignments, ascending.
    pub fn satisfying_assignments(&self) -> Vec<u8> {
        let w = self.width();
        (0..(1u8 << w))
            .filter(|&v| self.satisfied_by_value(v))
            .collect()
    }

    /// Bit of `var` inside an answer value.
    pub fn var_bit(&self, value: u8, var: usize) -> bool {
        let vars = self.sorted_vars();
        let w = vars.len();
        let pos = vars.iter().position(|&v| v == var).expect("var in clause");
        (value >> (w - 1 - pos)) & 1 == 1
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Formula {
    pub variable_count: usize,
    pub width: usize,
    pub clauses: Vec<Clause>,
}

#[derive(Debug, Error)]
pub enum FormulaError {
    #[error("malformed DIMACS header")]
    Header,
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("clause {0} repeats a variable")]
    RepeatedVariable(usize),
    #[error("mixed clause widths: clause {clause} has width {got}, expected {expected}")]
    MixedWidth {
        clause: usize,
        got: usize,
        expected: usize,
    },
    #[error("clause width {0} unsupported (must be 2 or 3)")]
    BadWidth(usize),
    #[error("no clauses")]
    Empty,
    #[error("declared {declared} clauses, found {found}")]
    ClauseCountMismatch { declared: usize, found: usize },
}

impl Formula {
    pub fn occurrence_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.variable_count];
        for clause in &self.clauses {
            for lit in &clause.literals {
                counts[lit.var] += 1;
            }
        }
        counts
    }

    pub fn satisfied_by(&self, bits: &[bool]) -> bool {
        self.clauses
            .iter()
            .all(|c| c.literals.iter().any(|lit| bits[lit.var] == lit.positive))
    }

    /// First satisfying assignment in ascending binary order (variable 0 is
    /// the most significant bit), or `None` if unsatisfiable.
    pub fn first_satisfying_assignment(&self) -> Option<Vec<bool>> {
        let n = self.variable_count;
        assert!(n <= 24, "brute-force satisfiability only at desk scale");
        for v in 0u64..(1u64 << n) {
            let bits: Vec<bool> = (0..n).map(|i| (v >> (n - 1 - i)) & 1 == 1).collect();
            if self.satisfied_by(&bits) {
                return Some(bits);
            }
        }
        None
    }
}

/// Parses standard DIMACS CNF with uniform clause width 2 or 3.
pub fn parse_dimacs(text: &str) -> Result<Formula, FormulaError> {
    let mut variable_count: Option<usize> = None;
    let mut declared_clauses: Option<usize> = None;
    let mut clauses: Vec<Clause> = Vec::new();
    let mut current: Vec<Literal> = Vec::new();

    for (no, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') || line.starts_with('%') {
            continue;
        }
        if line.starts_with('p') {
            let mut tokens = line.split_whitespace();
            let _p = tokens.next();
            if tokens.next() != Some("cnf") {
                return Err(FormulaError::Header);
            }
            let n = tokens
                .next()
                .and_then(|t| t.parse::<usize>().ok())
                .ok_or(FormulaError::Header)?;
            let m = tokens
                .next()
                .and_then(|t| t.parse::<usize>().ok())
                .ok_or(FormulaError::Header)?;
            variable_count = Some(n);
            declared_clauses = Some(m);
            continue;
        }
        let n = variable_count.ok_or(FormulaError::Header)?;
        for token in line.split_whitespace() {
            let lit: i64 = token.parse().map_err(|_| FormulaError::Line {
                line: no + 1,
                message: format!("bad literal `{token}`"),
            })?;
            if lit == 0 {
                if !current.is_empty() {
                    clauses.push(Clause {
                        literals: std::mem::take(&mut current),
                    });
                }
            } else {
                let var = lit.unsigned_abs() as usize - 1;
                if var >= n {
                    return Err(FormulaError::Line {
                        line: no + 1,
                        message: format!("variable {} out of range", lit.abs()),
                    });
                }
                current.push(Literal {
                    var,
                    positive: lit > 0,
                });
            }
        }
    }
    if !current.is_empty() {
        clauses.push(Clause { literals: current });
    }
    if clauses.is_empty() {
        return Err(FormulaError::Empty);
    }
    if let Some(m) = declared_clauses {
        if m != clauses.len() {
            return Err(FormulaError::ClauseCountMismatch {
                declared: m,
                found: clauses.len(),
            });
        }
    }
    let width = clauses[0].width();
    if width != 2 && width != 3 {
        return Err(FormulaError::BadWidth(width));
    }
    for (i, clause) in clauses.iter().enumerate() {
        if clause.width() != width {
            return Err(FormulaError::MixedWidth {
                clause: i + 1,
                got: clause.width(),
                expected: width,
            });
        }
        let mut vars = clause.sorted_vars();
        vars.dedup();
        if vars.len() != width {
            return Err(FormulaError::RepeatedVariable(i + 1));
        }
    }
    Ok(Formula {
        variable_count: variable_count.unwrap(),
        width,
        clauses,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegularityReport {
    pub is_width3: bool,
    pub expected_clauses: Option<usize>,
    pub clause_count: usize,
    pub is_regular: bool,
    pub off_count_variables: Vec<(usize, usize)>,
}

/// Regular means: width 3, clause count 5n/3, every variable in exactly 5
/// clauses. Non-regular formulas stay usable downstream; callers treat this
/// as a warning signal only.
pub fn check_3sat5_regularity(formula: &Formula) -> RegularityReport {
    let is_width3 = formula.width == 3;
    let n = formula.variable_count;
    let expected_clauses = if n % 3 == 0 { Some(5 * n / 3) } else { None };
    let counts = formula.occurrence_counts();
    let off: Vec<(usize, usize)> = counts
        .iter()
        .enumerate()
        .filter(|&(_, &c)| c != 5)
        .map(|(v, &c)| (v, c))
        .collect();
    let is_regular = is_width3 && expected_clauses == Some(formula.clauses.len()) && off.is_empty();
    RegularityReport {
        is_width3,
        expected_clauses,
        clause_count: formula.clauses.len(),
        is_regular,
        off_count_variables: off,
    }
}

/// One verifier constraint: `ell` clause indices and, per clause, the
/// position (into the literal list) of the chosen variable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub clauses: Vec<usize>,
    pub positions: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct ConstraintSystem {
    pub ell: usize,
    pub formula: Formula,
    pub constraints: Vec<Constraint>,
    /// Satisfying assignments per clause, ascending.
    pub clause_answers: Vec<Vec<u8>>,
    /// Interned query ids: constraints share a query iff ids are equal.
    pub q1_id: Vec<usize>,
    pub q2_id: Vec<usize>,
    pub q1_key_count: usize,
    pub q2_key_count: usize,
}

#[derive(Debug, Error)]
pub enum CspError {
    #[error("ell must be at least 1")]
    BadEll,
    #[error("constraint count {count} exceeds budget {budget}")]
    BudgetExceeded { count: BigUint, budget: u128 },
    #[error("assignment space {space} exceeds budget {budget}")]
    SpaceExceeded { space: BigUint, budget: u128 },
    #[error("index out of range")]
    OutOfRange,
    #[error("clause {0} not satisfied by the given assignment")]
    UnsatisfiedClause(usize),
}

impl ConstraintSystem {
    pub fn constraint_count(&self) -> usize {
        self.constraints.len()
    }

    pub fn q1_key(&self, r: usize) -> &[usize] {
        &self.constraints[r].clauses
    }

    /// Variable tuple queried from the second prover.
    pub fn q2_key(&self, r: usize) -> Vec<usize> {
        let c = &self.constraints[r];
        c.clauses
            .iter()
            .zip(&c.positions)
            .map(|(&ci, &pi)| self.formula.clauses[ci].literals[pi].var)
            .collect()
    }

    /// Per-coordinate answer-list sizes for the first prover (all equal to
    /// 2^w − 1).
    fn coordinate_sizes(&self, r: usize) -> Vec<usize> {
        self.constraints[r]
            .clauses
            .iter()
            .map(|&c| self.clause_answers[c].len())
            .collect()
    }

    pub fn prover1_answer_count(&self, r: usize) -> usize {
        self.coordinate_sizes(r).iter().product()
    }

    pub fn prover2_answer_count(&self) -> usize {
        1usize << self.ell
    }

    /// Splits a prover-1 answer index into per-coordinate answer values.
    pub fn answer_values(&self, r: usize, mut answer: usize) -> Vec<u8> {
        let sizes = self.coordinate_sizes(r);
        let mut digits = vec![0u8; self.ell];
        for k in (0..self.ell).rev() {
            let size = sizes[k];
            let digit = answer % size;
            answer /= size;
            digits[k] = self.clause_answers[self.constraints[r].clauses[k]][digit];
        }
        digits
    }

    /// Inverse of `answer_values`: per-coordinate values to an index.
    pub fn answer_index(&self, r: usize, values: &[u8]) -> Option<usize> {
        let c = &self.constraints[r];
        let mut index = 0usize;
        for (k, &value) in values.iter().enumerate() {
            let answers = &self.clause_answers[c.clauses[k]];
            let digit = answers.iter().position(|&a| a == value)?;
            index = index * answers.len() + digit;
        }
        Some(index)
    }

    /// Projection to the second prover: the chosen variables' bits,
    /// coordinate 0 most significant.
    pub fn project(&self, r: usize, answer: usize) -> Result<usize, CspError> {
        if r >= self.constraints.len() || answer >= self.prover1_answer_count(r) {
            return Err(CspError::OutOfRange);
        }
        let values = self.answer_values(r, answer);
        let c = &self.constraints[r];
        let mut bits = 0usize;
        for k in 0..self.ell {
            let clause = &self.formula.clauses[c.clauses[k]];
            let var = clause.literals[c.positions[k]].var;
            let bit = clause.var_bit(values[k], var);
            bits = (bits << 1) | usize::from(bit);
        }
        Ok(bits)
    }

    /// Constraints grouped by shared query: `shared[r]` lists every other
    /// constraint with the same q1 or the same q2, ascending.
    pub fn shared_neighbors(&self) -> Vec<Vec<usize>> {
        let m = self.constraint_count();
        let mut by_q1: HashMap<usize, Vec<usize>> = HashMap::new();
        let mut by_q2: HashMap<usize, Vec<usize>> = HashMap::new();
        for r in 0..m {
            by_q1.entry(self.q1_id[r]).or_default().push(r);
            by_q2.entry(self.q2_id[r]).or_default().push(r);
        }
        let mut shared: Vec<Vec<usize>> = vec![Vec::new(); m];
        for group in by_q1.values().chain(by_q2.values()) {
            for &a in group {
                for &b in group {
                    if a != b {
                        shared[a].push(b);
                    }
                }
            }
        }
        for list in &mut shared {
            list.sort_unstable();
            list.dedup();
        }
        shared
    }
}

/// Enumerates all `(w·#clauses)^ell` constraints in canonical order.
pub fn build_constraints(
    formula: &Formula,
    ell: usize,
    budget: u128,
) -> Result<ConstraintSystem, CspError> {
    if ell == 0 {
        return Err(CspError::BadEll);
    }
    let m_clauses = formula.clauses.len();
    let w = formula.width;
    let count = BigUint::from(w * m_clauses).pow(ell as u32);
    if count > BigUint::from(budget) {
        return Err(CspError::BudgetExceeded { count, budget });
    }

    let clause_answers: Vec<Vec<u8>> = formula
        .clauses
        .iter()
        .map(|c| c.satisfying_assignments())
        .collect();

    // Odometer over (clause, position) digits, clause tuple outermost so the
    // order is lexicographic by (clause tuple, position tuple).
    let total: usize = (w * m_clauses).pow(ell as u32);
    let mut constraints = Vec::with_capacity(total);
    let mut digits = vec![0usize; ell];
    loop {
        let clauses: Vec<usize> = digits.iter().map(|&d| d / w).collect();
        let positions: Vec<usize> = digits.iter().map(|&d| d % w).collect();
        constraints.push(Constraint { clauses, positions });
        let mut k = ell;
        loop {
            if k == 0 {
                break;
            }
            k -= 1;
            digits[k] += 1;
            if digits[k] < w * m_clauses {
                break;
            }
            digits[k] = 0;
            if k == 0 {
                break;
            }
        }
        if digits.iter().all(|&d| d == 0) {
            break;
        }
    }
    debug_assert_eq!(constraints.len(), total);

    // The digit encoding is clause-major per coordinate, which does NOT sort
    // tuples by (clause tuple, position tuple) for ell > 1; fix by sorting.
    constraints.sort_by(|a, b| {
        a.clauses
            .cmp(&b.clauses)
            .then_with(|| a.positions.cmp(&b.positions))
    });

    let mut q1_intern: HashMap<Vec<usize>, usize> = HashMap::new();
    let mut q2_intern: HashMap<Vec<usize>, usize> = HashMap::new();
    let mut q1_id = Vec::with_capacity(total);
    let mut q2_id = Vec::with_capacity(total);
    for c in &constraints {
        let next = q1_intern.len();
        let id = *q1_intern.entry(c.clauses.clone()).or_insert(next);
        q1_id.push(id);
        let vars: Vec<usize> = c
            .clauses
            .iter()
            .zip(&c.positions)
            .map(|(&ci, &pi)| formula.clauses[ci].literals[pi].var)
            .collect();
        let next = q2_intern.len();
        let id = *q2_intern.entry(vars).or_insert(next);
        q2_id.push(id);
    }

    Ok(ConstraintSystem {
        ell,
        formula: formula.clone(),
        constraints,
        clause_answers,
        q1_key_count: q1_intern.len(),
        q2_key_count: q2_intern.len(),
        q1_id,
        q2_id,
    })
}

/// Assignment of answers to queries, keyed by the query tuples.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GlobalAssignment {
    pub q1: BTreeMap<Vec<usize>, usize>,
    pub q2: BTreeMap<Vec<usize>, usize>,
}

impl GlobalAssignment {
    pub fn is_empty(&self) -> bool {
        self.q1.is_empty() && self.q2.is_empty()
    }

    /// File form: `q1 <clause-tuple> <answer-index>` / `q2 <var-tuple> <bits>`
    /// with 1-based comma-separated tuples.
    pub fn serialize(&self, ell: usize) -> String {
        let mut out = String::from("# stacksp-assignment v1\n");
        for (key, answer) in &self.q1 {
            let tuple: Vec<String> = key.iter().map(|&c| (c + 1).to_string()).collect();
            out.push_str(&format!("q1 {} {}\n", tuple.join(","), answer));
        }
        for (key, bits) in &self.q2 {
            let tuple: Vec<String> = key.iter().map(|&v| (v + 1).to_string()).collect();
            let bit_string: String = (0..ell)
                .map(|k| {
                    if (bits >> (ell - 1 - k)) & 1 == 1 {
                        '1'
                    } else {
                        '0'
                    }
                })
                .collect();
            out.push_str(&format!("q2 {} {}\n", tuple.join(","), bit_string));
        }
        out
    }

    pub fn parse(text: &str) -> Result<GlobalAssignment, String> {
        let mut assignment = GlobalAssignment::default();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut tokens = line.split_whitespace();
            let kind = tokens.next().unwrap();
            let tuple_tok = tokens
                .next()
                .ok_or(format!("line {}: missing tuple", no + 1))?;
            let value_tok = tokens
                .next()
                .ok_or(format!("line {}: missing value", no + 1))?;
            let tuple: Result<Vec<usize>, _> = tuple_tok
                .split(',')
                .map(|t| t.parse::<usize>().map(|v| v - 1))
                .collect();
            let tuple = tuple.map_err(|_| format!("line {}: bad tuple", no + 1))?;
            match kind {
                "q1" => {
                    let answer: usize = value_tok
                        .parse()
                        .map_err(|_| format!("line {}: bad answer index", no + 1))?;
                    assignment.q1.insert(tuple, answer);
                }
                "q2" => {
                    let mut bits = 0usize;
                    for ch in value_tok.chars() {
                        bits = (bits << 1)
                            | match ch {
                                '0' => 0,
                                '1' => 1,
                                _ => return Err(format!("line {}: bad bits", no + 1)),
                            };
                    }
                    assignment.q2.insert(tuple, bits);
                }
                other => return Err(format!("line {}: unknown kind `{other}`", no + 1)),
            }
        }
        Ok(assignment)
    }
}

/// Number of constraints whose two queries are assigned consistently.
/// Unassigned queries count as unsatisfied.
pub fn count_satisfied(cs: &ConstraintSystem, assignment: &GlobalAssignment) -> usize {
    let mut satisfied = 0usize;
    for r in 0..cs.constraint_count() {
        let Some(&a) = assignment.q1.get(cs.q1_key(r)) else {
            continue;
        };
        if a >= cs.prover1_answer_count(r) {
            continue;
        }
        let Some(&b) = assignment.q2.get(&cs.q2_key(r)) else {
            continue;
        };
        if cs.project(r, a).ok() == Some(b) {
            satisfied += 1;
        }
    }
    satisfied
}

/// Exact maximum of `count_satisfied` over all total assignments.
///
/// Enumerates first-prover assignments; for a fixed one, the best
/// second-prover answer decomposes per query as a majority vote over the
/// projections, so the second prover never needs explicit enumeration.
pub fn max_satisfiable_bruteforce(cs: &ConstraintSystem, budget: u128) -> Result<usize, CspError> {
    let mut space = BigUint::one();
    let mut q1_sizes: BTreeMap<usize, usize> = BTreeMap::new();
    for r in 0..cs.constraint_count() {
        q1_sizes
            .entry(cs.q1_id[r])
            .or_insert_with(|| cs.prover1_answer_count(r));
    }
    for &size in q1_sizes.values() {
        space *= BigUint::from(size);
    }
    let full_space = &space * BigUint::from(cs.prover2_answer_count()).pow(cs.q2_key_count as u32);
    if full_space > BigUint::from(budget) {
        return Err(CspError::SpaceExceeded {
            space: full_space,
            budget,
        });
    }

    // Constraints grouped by q1 id, and q2 ids per constraint.
    let mut by_q1: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for r in 0..cs.constraint_count() {
        by_q1.entry(cs.q1_id[r]).or_default().push(r);
    }
    let q1_ids: Vec<usize> = by_q1.keys().copied().collect();
    let sizes: Vec<usize> = q1_ids.iter().map(|id| q1_sizes[id]).collect();

    let mut digits = vec![0usize; q1_ids.len()];
    let mut best = 0usize;
    loop {
        // votes[q2 id][bits] over this first-prover assignment
        let mut votes: HashMap<(usize, usize), usize> = HashMap::new();
        for (slot, id) in q1_ids.iter().enumerate() {
            for &r in &by_q1[id] {
                let projected = cs.project(r, digits[slot]).expect("valid digits");
                *votes.entry((cs.q2_id[r], projected)).or_insert(0) += 1;
            }
        }
        let mut per_q2: HashMap<usize, usize> = HashMap::new();
        for (&(q2, _), &count) in &votes {
            let entry = per_q2.entry(q2).or_insert(0);
            *entry = (*entry).max(count);
        }
        let total: usize = per_q2.values().sum();
        best = best.max(total);

        let mut k = digits.len();
        loop {
            if k == 0 {
                return Ok(best);
            }
            k -= 1;
            digits[k] += 1;
            if digits[k] < sizes[k] {
                break;
            }
            digits[k] = 0;
            if k == 0 {
                return Ok(best);
            }
        }
    }
}

/// Derives the provers' canonical strategy from a satisfying assignment of
/// the formula: each clause answered with its restriction, each variable
/// with its bit.
pub fn global_from_assignment(
    cs: &ConstraintSystem,
    bits: &[bool],
) -> Result<GlobalAssignment, CspError> {
    let mut assignment = GlobalAssignment::default();
    for r in 0..cs.constraint_count() {
        let c = &cs.constraints[r];
        let mut values = Vec::with_capacity(cs.ell);
        for &ci in &c.clauses {
            let clause = &cs.formula.clauses[ci];
            let vars = clause.sorted_vars();
            let w = vars.len();
            let mut value = 0u8;
            for (pos, &var) in vars.iter().enumerate() {
                if bits[var] {
                    value |= 1 << (w - 1 - pos);
                }
            }
            if !cs.clause_answers[ci].contains(&value) {
                return Err(CspError::UnsatisfiedClause(ci + 1));
            }
            values.push(value);
        }
        let answer = cs
            .answer_index(r, &values)
            .expect("restriction is a valid answer");
        assignment.q1.insert(c.clauses.clone(), answer);
        let q2_bits = cs.project(r, answer).expect("projection of valid answer");
        assignment.q2.insert(cs.q2_key(r), q2_bits);
    }
    Ok(assignment)
}
