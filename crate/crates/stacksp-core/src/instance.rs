//! Data model for pricing instances: a DAG with fixed-cost and pricable
//! edges, plus price assignments and path witnesses.
//!
//! File formats (line-oriented, UTF-8):
//!
//! ```text
//! # stacksp-instance v1
//! vertices <N>
//! source <vid>
//! sink <vid>
//! edge f <tail> <head> <cost>        # cost: integer or a/b, nonnegative
//! edge v <tail> <head> <label>
//! meta <free text>
//! ```
//!
//! ```text
//! # stacksp-pricing v1
//! price <label> <rational|inf>
//! ```
//!
//! Serialization is canonical: edge sections are sorted and rationals are in
//! lowest terms, so two serializations of equal instances are byte-identical.

use crate::scalar::{fmt_rat, is_nonnegative, parse_rat, Price, Rat};
use num::Zero;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use thiserror::Error;

pub type VertexId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EdgeKind {
    Fixed,
    Var,
}

/// Positional edge identity: `(kind, index into that kind's list)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeId {
    pub kind: EdgeKind,
    pub index: usize,
}

impl EdgeId {
    pub fn fixed(index: usize) -> Self {
        EdgeId {
            kind: EdgeKind::Fixed,
            index,
        }
    }
    pub fn var(index: usize) -> Self {
        EdgeId {
            kind: EdgeKind::Var,
            index,
        }
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            EdgeKind::Fixed => write!(f, "f{}", self.index),
            EdgeKind::Var => write!(f, "v{}", self.index),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixedEdge {
    pub tail: VertexId,
    pub head: VertexId,
    pub cost: Rat,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarEdge {
    pub tail: VertexId,
    pub head: VertexId,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PricingInstance {
    pub vertex_count: usize,
    pub source: VertexId,
    pub sink: VertexId,
    pub fixed_edges: Vec<FixedEdge>,
    pub variable_edges: Vec<VarEdge>,
    pub meta: Vec<String>,
}

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("missing or bad header: expected `# stacksp-instance v1`")]
    Header,
    #[error("missing `{0}` declaration")]
    MissingField(&'static str),
    #[error("graph is cyclic: {0}")]
    Cyclic(String),
}

fn line_err(line: usize, message: impl Into<String>) -> ParseError {
    ParseError::Line {
        line: line + 1,
        message: message.into(),
    }
}

impl PricingInstance {
    pub fn edge_endpoints(&self, id: EdgeId) -> (VertexId, VertexId) {
        match id.kind {
            EdgeKind::Fixed => {
                let e = &self.fixed_edges[id.index];
                (e.tail, e.head)
            }
            EdgeKind::Var => {
                let e = &self.variable_edges[id.index];
                (e.tail, e.head)
            }
        }
    }

    /// Outgoing adjacency sorted by `(head, kind, index)`; the fixed order
    /// makes every traversal in the crate deterministic.
    pub fn adjacency(&self) -> Vec<Vec<(EdgeId, VertexId)>> {
        let mut adj: Vec<Vec<(EdgeId, VertexId)>> = vec![Vec::new(); self.vertex_count];
        for (i, e) in self.fixed_edges.iter().enumerate() {
            adj[e.tail].push((EdgeId::fixed(i), e.head));
        }
        for (i, e) in self.variable_edges.iter().enumerate() {
            adj[e.tail].push((EdgeId::var(i), e.head));
        }
        for list in &mut adj {
            list.sort_by_key(|&(id, head)| (head, id.kind, id.index));
        }
        adj
    }

    /// Topological order, or a witness cycle (as a vertex sequence).
    pub fn topological_order(&self) -> Result<Vec<VertexId>, Vec<VertexId>> {
        let mut indegree = vec![0usize; self.vertex_count];
        let adj = self.adjacency();
        for list in &adj {
            for &(_, head) in list {
                indegree[head] += 1;
            }
        }
        let mut queue: Vec<VertexId> = (0..self.vertex_count)
            .filter(|&v| indegree[v] == 0)
            .collect();
        queue.sort_unstable();
        let mut order = Vec::with_capacity(self.vertex_count);
        let mut next = std::collections::BinaryHeap::new();
        for v in queue {
            next.push(std::cmp::Reverse(v));
        }
        while let Some(std::cmp::Reverse(v)) = next.pop() {
            order.push(v);
            for &(_, head) in &adj[v] {
                indegree[head] -= 1;
                if indegree[head] == 0 {
                    next.push(std::cmp::Reverse(head));
                }
            }
        }
        if order.len() == self.vertex_count {
            Ok(order)
        } else {
            Err(self.find_cycle(&adj))
        }
    }

    fn find_cycle(&self, adj: &[Vec<(EdgeId, VertexId)>]) -> Vec<VertexId> {
        // Iterative DFS with colors; returns the first closed walk found.
        #[derive(Clone, Copy, PartialEq)]
        enum Color {
            White,
            Gray,
            Black,
        }
        let mut color = vec![Color::White; self.vertex_count];
        let mut parent: Vec<Option<VertexId>> = vec![None; self.vertex_count];
        for start in 0..self.vertex_count {
            if color[start] != Color::White {
                continue;
            }
            let mut stack = vec![(start, 0usize)];
            color[start] = Color::Gray;
            while let Some(&mut (v, ref mut idx)) = stack.last_mut() {
                if *idx < adj[v].len() {
                    let (_, head) = adj[v][*idx];
                    *idx += 1;
                    match color[head] {
                        Color::White => {
                            color[head] = Color::Gray;
                            parent[head] = Some(v);
                            stack.push((head, 0));
                        }
                        Color::Gray => {
                            // Found a back edge v -> head; unwind the cycle.
                            let mut cycle = vec![head];
                            let mut cur = v;
                            while cur != head {
                                cycle.push(cur);
                                cur = parent[cur].expect("gray vertices have parents");
                            }
                            cycle.push(head);
                            cycle.reverse();
                            return cycle;
                        }
                        Color::Black => {}
                    }
                } else {
                    color[v] = Color::Black;
                    stack.pop();
                }
            }
        }
        Vec::new()
    }

    pub fn label_index(&self) -> HashMap<&str, usize> {
        self.variable_edges
            .iter()
            .enumerate()
            .map(|(i, e)| (e.label.as_str(), i))
            .collect()
    }

    /// Canonical copy: both edge sections sorted. Positional identities are
    /// renumbered accordingly.
    pub fn canonical(&self) -> PricingInstance {
        let mut fixed = self.fixed_edges.clone();
        fixed.sort_by(|a, b| {
            (a.tail, a.head)
                .cmp(&(b.tail, b.head))
                .then_with(|| a.cost.cmp(&b.cost))
        });
        let mut variable = self.variable_edges.clone();
        variable.sort_by(|a, b| {
            (a.tail, a.head, a.label.as_str()).cmp(&(b.tail, b.head, b.label.as_str()))
        });
        PricingInstance {
            vertex_count: self.vertex_count,
            source: self.source,
            sink: self.sink,
            fixed_edges: fixed,
            variable_edges: variable,
            meta: self.meta.clone(),
        }
    }
}

/// Parses the `stacksp-instance v1` format, validating as it goes.
pub fn parse_instance(text: &str) -> Result<PricingInstance, ParseError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, first)) if first.trim() == "# stacksp-instance v1" => {}
        _ => return Err(ParseError::Header),
    }
    let mut vertex_count: Option<usize> = None;
    let mut source: Option<VertexId> = None;
    let mut sink: Option<VertexId> = None;
    let mut fixed_edges = Vec::new();
    let mut variable_edges = Vec::new();
    let mut meta = Vec::new();
    let mut labels_seen: HashMap<String, usize> = HashMap::new();

    let check_vertex =
        |no: usize, token: &str, count: Option<usize>| -> Result<VertexId, ParseError> {
            let v: usize = token
                .parse()
                .map_err(|_| line_err(no, format!("bad vertex id `{token}`")))?;
            match count {
                Some(n) if v >= n => Err(line_err(
                    no,
                    format!("unknown vertex id {v} (vertices {n})"),
                )),
                Some(_) => Ok(v),
                None => Err(line_err(no, "edge before `vertices` declaration")),
            }
        };

    for (no, raw) in lines {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let keyword = tokens.next().unwrap();
        match keyword {
            "vertices" => {
                let n: usize = tokens
                    .next()
                    .ok_or_else(|| line_err(no, "missing vertex count"))?
                    .parse()
                    .map_err(|_| line_err(no, "bad vertex count"))?;
                if n == 0 {
                    return Err(line_err(no, "vertex count must be positive"));
                }
                vertex_count = Some(n);
            }
            "source" => {
                let token = tokens
                    .next()
                    .ok_or_else(|| line_err(no, "missing source id"))?;
                source = Some(check_vertex(no, token, vertex_count)?);
            }
            "sink" => {
                let token = tokens
                    .next()
                    .ok_or_else(|| line_err(no, "missing sink id"))?;
                sink = Some(check_vertex(no, token, vertex_count)?);
            }
            "edge" => {
                let kind = tokens
                    .next()
                    .ok_or_else(|| line_err(no, "missing edge kind"))?;
                let tail_tok = tokens.next().ok_or_else(|| line_err(no, "missing tail"))?;
                let head_tok = tokens.next().ok_or_else(|| line_err(no, "missing head"))?;
                let tail = check_vertex(no, tail_tok, vertex_count)?;
                let head = check_vertex(no, head_tok, vertex_count)?;
                match kind {
                    "f" => {
                        let cost_tok = tokens.next().ok_or_else(|| line_err(no, "missing cost"))?;
                        let cost = parse_rat(cost_tok)
                            .map_err(|e| line_err(no, format!("bad cost: {e}")))?;
                        if !is_nonnegative(&cost) {
                            return Err(line_err(no, format!("negative cost `{cost_tok}`")));
                        }
                        fixed_edges.push(FixedEdge { tail, head, cost });
                    }
                    "v" => {
                        let label = tokens
                            .next()
                            .ok_or_else(|| line_err(no, "missing label"))?
                            .to_string();
                        if let Some(prev) = labels_seen.insert(label.clone(), no) {
                            return Err(line_err(
                                no,
                                format!("duplicate label `{label}` (first on line {})", prev + 1),
                            ));
                        }
                        variable_edges.push(VarEdge { tail, head, label });
                    }
                    other => return Err(line_err(no, format!("unknown edge kind `{other}`"))),
                }
            }
            "meta" => {
                let rest = line.strip_prefix("meta").unwrap().trim_start();
                meta.push(rest.to_string());
            }
            other => return Err(line_err(no, format!("unknown keyword `{other}`"))),
        }
    }

    let instance = PricingInstance {
        vertex_count: vertex_count.ok_or(ParseError::MissingField("vertices"))?,
        source: source.ok_or(ParseError::MissingField("source"))?,
        sink: sink.ok_or(ParseError::MissingField("sink"))?,
        fixed_edges,
        variable_edges,
        meta,
    };
    if let Err(cycle) = instance.topological_order() {
        let witness = cycle
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(" ");
        return Err(ParseError::Cyclic(witness));
    }
    Ok(instance)
}

/// Canonical serialization; `parse_instance(serialize_instance(x)) == x.canonical()`.
pub fn serialize_instance(inst: &PricingInstance) -> String {
    let canon = inst.canonical();
    let mut out = String::new();
    out.push_str("# stacksp-instance v1\n");
    out.push_str(&format!("vertices {}\n", canon.vertex_count));
    out.push_str(&format!("source {}\n", canon.source));
    out.push_str(&format!("sink {}\n", canon.sink));
    for e in &canon.fixed_edges {
        out.push_str(&format!(
            "edge f {} {} {}\n",
            e.tail,
            e.head,
            fmt_rat(&e.cost)
        ));
    }
    for e in &canon.variable_edges {
        out.push_str(&format!("edge v {} {} {}\n", e.tail, e.head, e.label));
    }
    for m in &canon.meta {
        out.push_str(&format!("meta {m}\n"));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineStatus {
    Reachable,
    NoFixedBaseline,
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub problems: Vec<String>,
    pub baseline: BaselineStatus,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.problems.is_empty()
    }
}

/// Checks every structural invariant; violations become report entries
/// rather than errors so callers can show all of them at once.
pub fn validate_instance(inst: &PricingInstance) -> ValidationReport {
    let mut problems = Vec::new();
    if inst.source >= inst.vertex_count {
        problems.push(format!("source {} out of range", inst.source));
    }
    if inst.sink >= inst.vertex_count {
        problems.push(format!("sink {} out of range", inst.sink));
    }
    for (i, e) in inst.fixed_edges.iter().enumerate() {
        if e.tail >= inst.vertex_count || e.head >= inst.vertex_count {
            problems.push(format!("fixed edge {i} has endpoint out of range"));
        }
        if !is_nonnegative(&e.cost) {
            problems.push(format!(
                "fixed edge {i} has negative cost {}",
                fmt_rat(&e.cost)
            ));
        }
    }
    let mut labels = HashSet::new();
    for (i, e) in inst.variable_edges.iter().enumerate() {
        if e.tail >= inst.vertex_count || e.head >= inst.vertex_count {
            problems.push(format!("variable edge {i} has endpoint out of range"));
        }
        if !labels.insert(e.label.as_str()) {
            problems.push(format!("duplicate label `{}`", e.label));
        }
    }
    if !problems.iter().any(|p| p.contains("out of range")) {
        if let Err(cycle) = inst.topological_order() {
            let witness = cycle
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(" ");
            problems.push(format!("cycle: {witness}"));
        } else {
            // Reachability of the sink over all edges.
            let adj = inst.adjacency();
            let mut seen = vec![false; inst.vertex_count];
            let mut stack = vec![inst.source];
            seen[inst.source] = true;
            while let Some(v) = stack.pop() {
                for &(_, head) in &adj[v] {
                    if !seen[head] {
                        seen[head] = true;
                        stack.push(head);
                    }
                }
            }
            if !seen[inst.sink] {
                problems.push("sink unreachable".to_string());
            }
        }
    }
    let baseline = if fixed_baseline_reachable(inst) {
        BaselineStatus::Reachable
    } else {
        BaselineStatus::NoFixedBaseline
    };
    ValidationReport { problems, baseline }
}

fn fixed_baseline_reachable(inst: &PricingInstance) -> bool {
    if inst.source >= inst.vertex_count || inst.sink >= inst.vertex_count {
        return false;
    }
    let mut adj: Vec<Vec<VertexId>> = vec![Vec::new(); inst.vertex_count];
    for e in &inst.fixed_edges {
        if e.tail < inst.vertex_count && e.head < inst.vertex_count {
            adj[e.tail].push(e.head);
        }
    }
    let mut seen = vec![false; inst.vertex_count];
    let mut stack = vec![inst.source];
    seen[inst.source] = true;
    while let Some(v) = stack.pop() {
        if v == inst.sink {
            return true;
        }
        for &head in &adj[v] {
            if !seen[head] {
                seen[head] = true;
                stack.push(head);
            }
        }
    }
    seen[inst.sink]
}

/// Price assignment keyed by variable-edge label.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PriceAssignment {
    prices: BTreeMap<String, Price>,
}

#[derive(Debug, Error)]
pub enum PricingError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("missing or bad header: expected `# stacksp-pricing v1`")]
    Header,
    #[error("no price for label `{0}`")]
    MissingLabel(String),
    #[error("price for unknown label `{0}`")]
    UnknownLabel(String),
    #[error("negative price for label `{0}`")]
    NegativePrice(String),
}

impl PriceAssignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, label: impl Into<String>, price: Price) {
        self.prices.insert(label.into(), price);
    }

    pub fn get(&self, label: &str) -> Option<&Price> {
        self.prices.get(label)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Price)> {
        self.prices.iter()
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    /// Every variable-edge label priced exactly once, all finite prices ≥ 0.
    pub fn check_complete_for(&self, inst: &PricingInstance) -> Result<(), PricingError> {
        for e in &inst.variable_edges {
            match self.prices.get(&e.label) {
                None => return Err(PricingError::MissingLabel(e.label.clone())),
                Some(Price::Finite(v)) if !is_nonnegative(v) => {
                    return Err(PricingError::NegativePrice(e.label.clone()))
                }
                Some(_) => {}
            }
        }
        let labels = inst.label_index();
        for label in self.prices.keys() {
            if !labels.contains_key(label.as_str()) {
                return Err(PricingError::UnknownLabel(label.clone()));
            }
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<PriceAssignment, PricingError> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, first)) if first.trim() == "# stacksp-pricing v1" => {}
            _ => return Err(PricingError::Header),
        }
        let mut prices = BTreeMap::new();
        for (no, raw) in lines {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut tokens = line.split_whitespace();
            match tokens.next() {
                Some("price") => {
                    let label = tokens
                        .next()
                        .ok_or_else(|| PricingError::Line {
                            line: no + 1,
                            message: "missing label".into(),
                        })?
                        .to_string();
                    let value_tok = tokens.next().ok_or_else(|| PricingError::Line {
                        line: no + 1,
                        message: "missing price".into(),
                    })?;
                    let price = Price::parse(value_tok).map_err(|e| PricingError::Line {
                        line: no + 1,
                        message: format!("bad price: {e}"),
                    })?;
                    if let Price::Finite(v) = &price {
                        if !is_nonnegative(v) {
                            return Err(PricingError::NegativePrice(label));
                        }
                    }
                    if prices.insert(label.clone(), price).is_some() {
                        return Err(PricingError::Line {
                            line: no + 1,
                            message: format!("duplicate price for `{label}`"),
                        });
                    }
                }
                Some(other) => {
                    return Err(PricingError::Line {
                        line: no + 1,
                        message: format!("unknown keyword `{other}`"),
                    })
                }
                None => {}
            }
        }
        Ok(PriceAssignment { prices })
    }

    pub fn serialize(&self) -> String {
        let mut out = String::from("# stacksp-pricing v1\n");
        for (label, price) in &self.prices {
            out.push_str(&format!("price {label} {price}\n"));
        }
        out
    }
}

/// A simple source-sink path together with its exact cost and revenue.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathWitness {
    pub edges: Vec<EdgeId>,
    pub cost: Rat,
    pub revenue: Rat,
}

impl PathWitness {
    pub fn vertex_sequence(&self, inst: &PricingInstance) -> Vec<VertexId> {
        let mut seq = vec![inst.source];
        for &e in &self.edges {
            let (_, head) = inst.edge_endpoints(e);
            seq.push(head);
        }
        seq
    }
}

#[derive(Debug, Error)]
pub enum PathError {
    #[error("path does not start at the source")]
    BadStart,
    #[error("path does not end at the sink")]
    BadEnd,
    #[error("broken chain at edge {0}")]
    BrokenChain(usize),
    #[error("repeated vertex {0} (path must be simple)")]
    RepeatedVertex(VertexId),
    #[error("edge {0} is priced inf")]
    InfinitePrice(String),
    #[error("no price for label `{0}`")]
    MissingPrice(String),
    #[error("edge index out of range")]
    BadEdge,
}

fn walk_path(
    inst: &PricingInstance,
    prices: &PriceAssignment,
    edges: &[EdgeId],
) -> Result<(Rat, Rat), PathError> {
    let mut cost = Rat::zero();
    let mut revenue = Rat::zero();
    let mut at = inst.source;
    let mut visited = HashSet::new();
    visited.insert(at);
    for (i, &id) in edges.iter().enumerate() {
        let in_range = match id.kind {
            EdgeKind::Fixed => id.index < inst.fixed_edges.len(),
            EdgeKind::Var => id.index < inst.variable_edges.len(),
        };
        if !in_range {
            return Err(PathError::BadEdge);
        }
        let (tail, head) = inst.edge_endpoints(id);
        if tail != at {
            return Err(if i == 0 {
                PathError::BadStart
            } else {
                PathError::BrokenChain(i)
            });
        }
        if !visited.insert(head) {
            return Err(PathError::RepeatedVertex(head));
        }
        match id.kind {
            EdgeKind::Fixed => cost += &inst.fixed_edges[id.index].cost,
            EdgeKind::Var => {
                let label = &inst.variable_edges[id.index].label;
                match prices.get(label) {
                    None => return Err(PathError::MissingPrice(label.clone())),
                    Some(Price::Inf) => return Err(PathError::InfinitePrice(label.clone())),
                    Some(Price::Finite(p)) => {
                        cost += p;
                        revenue += p;
                    }
                }
            }
        }
        at = head;
    }
    if at != inst.sink {
        return Err(PathError::BadEnd);
    }
    Ok((cost, revenue))
}

/// Exact cost of a simple source-sink path under a pricing.
pub fn path_cost(
    inst: &PricingInstance,
    prices: &PriceAssignment,
    edges: &[EdgeId],
) -> Result<Rat, PathError> {
    walk_path(inst, prices, edges).map(|(cost, _)| cost)
}

/// Exact revenue (sum of prices over variable edges) of a path.
pub fn path_revenue(
    inst: &PricingInstance,
    prices: &PriceAssignment,
    edges: &[EdgeId],
) -> Result<Rat, PathError> {
    walk_path(inst, prices, edges).map(|(_, revenue)| revenue)
}

/// Builds a checked witness from an edge list.
pub fn make_witness(
    inst: &PricingInstance,
    prices: &PriceAssignment,
    edges: Vec<EdgeId>,
) -> Result<PathWitness, PathError> {
    let (cost, revenue) = walk_path(inst, prices, &edges)?;
    Ok(PathWitness {
        edges,
        cost,
        revenue,
    })
}
