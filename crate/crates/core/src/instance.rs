//! Directed Steiner Tree instances, the text file format, metric closure and
//! the reduction to ℓ-layered acyclic instances.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap, HashSet, VecDeque};
use std::fmt::Write as _;

use num_traits::{Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::{format_rational, parse_rational, Rational};

pub type NodeId = usize;
pub type EdgeId = usize;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Edge {
    pub tail: NodeId,
    pub head: NodeId,
    pub cost: Rational,
}

/// A validated DST instance.
///
/// Edge ids are canonical: edges are sorted by `(tail, head)` where node ids
/// follow declaration order. Terminals are sorted by node id.
#[derive(Clone, Debug)]
pub struct DstInstance {
    names: Vec<String>,
    edges: Vec<Edge>,
    root: NodeId,
    terminals: Vec<NodeId>,
    out_edges: Vec<Vec<EdgeId>>,
    in_edges: Vec<Vec<EdgeId>>,
}

impl DstInstance {
    /// Builds and validates an instance. Parallel edges are merged keeping the
    /// minimum cost.
    pub fn new(
        names: Vec<String>,
        edges: impl IntoIterator<Item = (NodeId, NodeId, Rational)>,
        root: NodeId,
        terminals: impl IntoIterator<Item = NodeId>,
    ) -> Result<Self> {
        let n = names.len();
        let mut seen = HashSet::new();
        for name in &names {
            if !seen.insert(name.as_str()) {
                return Err(Error::Semantic(format!("duplicate node {name:?}")));
            }
        }
        if root >= n {
            return Err(Error::Semantic(format!("root id {root} out of range")));
        }
        let mut merged: BTreeMap<(NodeId, NodeId), Rational> = BTreeMap::new();
        for (tail, head, cost) in edges {
            if tail >= n || head >= n {
                return Err(Error::Semantic(format!(
                    "edge ({tail},{head}) has unknown endpoint"
                )));
            }
            if tail == head {
                return Err(Error::Semantic(format!("self-loop at {:?}", names[tail])));
            }
            if cost.is_negative() {
                return Err(Error::Semantic(format!(
                    "negative cost {} on {:?}->{:?}",
                    format_rational(&cost),
                    names[tail],
                    names[head]
                )));
            }
            merged
                .entry((tail, head))
                .and_modify(|c| {
                    if cost < *c {
                        *c = cost.clone();
                    }
                })
                .or_insert(cost);
        }
        let edges: Vec<Edge> = merged
            .into_iter()
            .map(|((tail, head), cost)| Edge { tail, head, cost })
            .collect();

        let mut terminals: Vec<NodeId> = terminals.into_iter().collect();
        terminals.sort_unstable();
        terminals.dedup();
        if terminals.is_empty() {
            return Err(Error::Semantic("no terminals".into()));
        }
        if let Some(&t) = terminals.iter().find(|&&t| t >= n) {
            return Err(Error::Semantic(format!("terminal id {t} out of range")));
        }
        if terminals.contains(&root) {
            return Err(Error::Semantic("root cannot be a terminal".into()));
        }

        let mut out_edges = vec![Vec::new(); n];
        let mut in_edges = vec![Vec::new(); n];
        for (id, e) in edges.iter().enumerate() {
            out_edges[e.tail].push(id);
            in_edges[e.head].push(id);
        }
        let inst = DstInstance {
            names,
            edges,
            root,
            terminals,
            out_edges,
            in_edges,
        };
        let reach = inst.reachable_from(inst.root, |_| true);
        if let Some(&t) = inst.terminals.iter().find(|&&t| !reach[t]) {
            return Err(Error::Semantic(format!(
                "terminal {:?} is unreachable from the root",
                inst.names[t]
            )));
        }
        Ok(inst)
    }

    pub fn num_nodes(&self) -> usize {
        self.names.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: EdgeId) -> &Edge {
        &self.edges[id]
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn terminals(&self) -> &[NodeId] {
        &self.terminals
    }

    pub fn is_terminal(&self, v: NodeId) -> bool {
        self.terminals.binary_search(&v).is_ok()
    }

    pub fn name(&self, v: NodeId) -> &str {
        &self.names[v]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn node_by_name(&self, name: &str) -> Option<NodeId> {
        self.names.iter().position(|n| n == name)
    }

    pub fn out_edges(&self, v: NodeId) -> &[EdgeId] {
        &self.out_edges[v]
    }

    pub fn in_edges(&self, v: NodeId) -> &[EdgeId] {
        &self.in_edges[v]
    }

    pub fn find_edge(&self, tail: NodeId, head: NodeId) -> Option<EdgeId> {
        self.out_edges[tail]
            .iter()
            .copied()
            .find(|&e| self.edges[e].head == head)
    }

    /// Looks up an edge by endpoint names.
    pub fn edge_by_names(&self, tail: &str, head: &str) -> Option<EdgeId> {
        self.find_edge(self.node_by_name(tail)?, self.node_by_name(head)?)
    }

    /// Total cost of a set of edges, each counted once.
    pub fn cost_of(&self, edges: &[EdgeId]) -> Rational {
        let unique: HashSet<EdgeId> = edges.iter().copied().collect();
        unique
            .into_iter()
            .fold(Rational::zero(), |acc, e| acc + &self.edges[e].cost)
    }

    pub fn edge_label(&self, e: EdgeId) -> String {
        let edge = &self.edges[e];
        format!("{}->{}", self.names[edge.tail], self.names[edge.head])
    }

    /// Nodes reachable from `source` using only edges accepted by `allow`.
    pub fn reachable_from(&self, source: NodeId, allow: impl Fn(EdgeId) -> bool) -> Vec<bool> {
        let mut seen = vec![false; self.num_nodes()];
        let mut queue = VecDeque::from([source]);
        seen[source] = true;
        while let Some(u) = queue.pop_front() {
            for &e in &self.out_edges[u] {
                let v = self.edges[e].head;
                if !seen[v] && allow(e) {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen
    }

    /// Single-source shortest paths. Returns per-node distance and the edge
    /// used to enter each node on a shortest path.
    pub fn dijkstra(&self, source: NodeId) -> (Vec<Option<Rational>>, Vec<Option<EdgeId>>) {
        let n = self.num_nodes();
        let mut dist: Vec<Option<Rational>> = vec![None; n];
        let mut pred: Vec<Option<EdgeId>> = vec![None; n];
        let mut done = vec![false; n];
        let mut heap = BinaryHeap::new();
        dist[source] = Some(Rational::zero());
        heap.push(Reverse((Rational::zero(), source)));
        while let Some(Reverse((d, u))) = heap.pop() {
            if done[u] {
                continue;
            }
            done[u] = true;
            for &e in &self.out_edges[u] {
                let edge = &self.edges[e];
                let cand = &d + &edge.cost;
                let better = match &dist[edge.head] {
                    None => true,
                    Some(old) => cand < *old,
                };
                if better && !done[edge.head] {
                    dist[edge.head] = Some(cand.clone());
                    pred[edge.head] = Some(e);
                    heap.push(Reverse((cand, edge.head)));
                }
            }
        }
        (dist, pred)
    }

    /// Serializes in the instance file format. Parsing the output yields an
    /// identical instance.
    pub fn to_dst_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "dst {} {}", self.num_nodes(), self.num_edges());
        for name in &self.names {
            let _ = writeln!(out, "node {name}");
        }
        let _ = writeln!(out, "root {}", self.names[self.root]);
        for &t in &self.terminals {
            let _ = writeln!(out, "terminal {}", self.names[t]);
        }
        for e in &self.edges {
            let _ = writeln!(
                out,
                "edge {} {} {}",
                self.names[e.tail],
                self.names[e.head],
                format_rational(&e.cost)
            );
        }
        out
    }
}

/// Parses the line-oriented instance format:
///
/// ```text
/// dst <n_nodes> <n_edges>
/// node <id>          (one per node)
/// root <id>
/// terminal <id>      (one per terminal)
/// edge <tail> <head> <cost>
/// ```
///
/// Costs are decimals or `p/q`. `#` starts a comment. The header counts must
/// match the number of `node` and `edge` lines.
pub fn parse_instance(text: &str) -> Result<DstInstance> {
    let mut header: Option<(usize, usize, usize)> = None;
    let mut names: Vec<String> = Vec::new();
    let mut index: HashMap<String, NodeId> = HashMap::new();
    let mut root: Option<(String, usize)> = None;
    let mut terminals: Vec<(String, usize)> = Vec::new();
    let mut edges: Vec<(String, String, Rational, usize)> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let expect = |k: usize| -> Result<()> {
            if fields.len() != k {
                Err(Error::syntax(
                    line_no,
                    format!("`{}` takes {} argument(s)", fields[0], k - 1),
                ))
            } else {
                Ok(())
            }
        };
        if header.is_none() {
            if fields[0] != "dst" {
                return Err(Error::syntax(
                    line_no,
                    "expected header `dst <n_nodes> <n_edges>`",
                ));
            }
            expect(3)?;
            let n = fields[1]
                .parse()
                .map_err(|_| Error::syntax(line_no, "bad node count"))?;
            let m = fields[2]
                .parse()
                .map_err(|_| Error::syntax(line_no, "bad edge count"))?;
            header = Some((n, m, line_no));
            continue;
        }
        match fields[0] {
            "dst" => return Err(Error::syntax(line_no, "duplicate header")),
            "node" => {
                expect(2)?;
                let name = fields[1].to_string();
                if index.contains_key(&name) {
                    return Err(Error::syntax(line_no, format!("duplicate node {name:?}")));
                }
                index.insert(name.clone(), names.len());
                names.push(name);
            }
            "root" => {
                expect(2)?;
                if root.is_some() {
                    return Err(Error::syntax(line_no, "duplicate root"));
                }
                root = Some((fields[1].to_string(), line_no));
            }
            "terminal" => {
                expect(2)?;
                terminals.push((fields[1].to_string(), line_no));
            }
            "edge" => {
                expect(4)?;
                let cost = parse_rational(fields[3])
                    .map_err(|_| Error::syntax(line_no, format!("bad cost {:?}", fields[3])))?;
                edges.push((fields[1].to_string(), fields[2].to_string(), cost, line_no));
            }
            other => {
                return Err(Error::syntax(
                    line_no,
                    format!("unknown directive {other:?}"),
                ));
            }
        }
    }

    let (n, m, header_line) = header.ok_or_else(|| Error::syntax(1, "missing header"))?;
    if names.len() != n {
        return Err(Error::syntax(
            header_line,
            format!("header declares {n} nodes, found {}", names.len()),
        ));
    }
    if edges.len() != m {
        return Err(Error::syntax(
            header_line,
            format!("header declares {m} edges, found {}", edges.len()),
        ));
    }
    let lookup = |name: &str, line: usize| -> Result<NodeId> {
        index
            .get(name)
            .copied()
            .ok_or_else(|| Error::Semantic(format!("line {line}: unknown node {name:?}")))
    };
    let (root_name, root_line) = root.ok_or_else(|| Error::Semantic("missing root".into()))?;
    let root = lookup(&root_name, root_line)?;
    let terminals = terminals
        .iter()
        .map(|(t, l)| lookup(t, *l))
        .collect::<Result<Vec<_>>>()?;
    let edges = edges
        .into_iter()
        .map(|(u, v, c, l)| Ok((lookup(&u, l)?, lookup(&v, l)?, c)))
        .collect::<Result<Vec<_>>>()?;
    DstInstance::new(names, edges, root, terminals)
}

/// All-pairs shortest paths with witness paths.
#[derive(Clone, Debug)]
pub struct MetricClosure {
    dist: Vec<Vec<Option<Rational>>>,
    pred: Vec<Vec<Option<EdgeId>>>,
    tails: Vec<NodeId>,
}

impl MetricClosure {
    /// Shortest-path cost from `u` to `v`; `None` when unreachable.
    pub fn cost(&self, u: NodeId, v: NodeId) -> Option<&Rational> {
        self.dist[u][v].as_ref()
    }

    /// Edges of a shortest `u`-`v` path, in order. Empty for `u == v`.
    pub fn path(&self, u: NodeId, v: NodeId) -> Option<Vec<EdgeId>> {
        self.dist[u][v].as_ref()?;
        let mut path = Vec::new();
        let mut cur = v;
        while cur != u {
            let e = self.pred[u][cur]?;
            path.push(e);
            cur = self.tails[e];
        }
        path.reverse();
        Some(path)
    }

    pub fn num_nodes(&self) -> usize {
        self.dist.len()
    }
}

/// Exact all-pairs shortest paths (one Dijkstra per source).
pub fn metric_closure(inst: &DstInstance) -> MetricClosure {
    let (dist, pred) = (0..inst.num_nodes()).map(|s| inst.dijkstra(s)).unzip();
    MetricClosure {
        dist,
        pred,
        tails: inst.edges().iter().map(|e| e.tail).collect(),
    }
}

/// An `r`-rooted path given by its edges.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct PathRecord {
    pub edges: Vec<EdgeId>,
    pub start: NodeId,
    pub end: NodeId,
    #[serde(with = "crate::scalar::serde_rational")]
    pub cost: Rational,
}

impl PathRecord {
    /// Builds a path, checking consecutive incidence.
    pub fn from_edges(inst: &DstInstance, start: NodeId, edges: Vec<EdgeId>) -> Result<Self> {
        let mut cur = start;
        let mut cost = Rational::zero();
        for &e in &edges {
            let edge = inst
                .edges
                .get(e)
                .ok_or_else(|| Error::Semantic(format!("unknown edge id {e}")))?;
            if edge.tail != cur {
                return Err(Error::Semantic(format!(
                    "edge {} does not continue the path at {:?}",
                    inst.edge_label(e),
                    inst.name(cur)
                )));
            }
            cost += &edge.cost;
            cur = edge.head;
        }
        Ok(PathRecord {
            edges,
            start,
            end: cur,
            cost,
        })
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

/// An instance whose nodes are partitioned into levels `V_0 = {r}, ..., V_ℓ`
/// with every edge running between consecutive levels and `V_ℓ` equal to the
/// terminal set.
///
/// `graph` is the layered graph itself. `base` is the instance it was built
/// from; each layered node remembers the base node it copies and each layered
/// edge the base path it stands for (empty for cost-0 copy edges).
#[derive(Clone, Debug)]
pub struct LayeredInstance {
    graph: DstInstance,
    base: DstInstance,
    ell: usize,
    level_of: Vec<usize>,
    provenance: Vec<NodeId>,
    edge_witness: Vec<Vec<EdgeId>>,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct LevelizeOptions {
    /// Drop nodes and edges that lie on no root-terminal path.
    pub prune: bool,
}

impl LayeredInstance {
    /// Wraps an instance that is already layered, with levels supplied by the
    /// caller (generators know them). Validates every layering invariant.
    pub fn with_levels(inst: DstInstance, ell: usize, level_of: Vec<usize>) -> Result<Self> {
        if ell == 0 {
            return Err(Error::Precondition("ell must be at least 1".into()));
        }
        if level_of.len() != inst.num_nodes() {
            return Err(Error::Dimension {
                expected: inst.num_nodes(),
                actual: level_of.len(),
            });
        }
        for (v, &lvl) in level_of.iter().enumerate() {
            if lvl > ell {
                return Err(Error::Semantic(format!(
                    "node {:?} has level {lvl} > {ell}",
                    inst.name(v)
                )));
            }
            if (lvl == 0) != (v == inst.root()) {
                return Err(Error::Semantic(
                    "level 0 must contain exactly the root".into(),
                ));
            }
            if (lvl == ell) != inst.is_terminal(v) {
                return Err(Error::Semantic(format!(
                    "level {ell} must equal the terminal set (node {:?})",
                    inst.name(v)
                )));
            }
        }
        for (id, e) in inst.edges().iter().enumerate() {
            if level_of[e.head] != level_of[e.tail] + 1 {
                return Err(Error::Semantic(format!(
                    "edge {} does not run between consecutive levels",
                    inst.edge_label(id)
                )));
            }
        }
        let provenance = (0..inst.num_nodes()).collect();
        let edge_witness = (0..inst.num_edges()).map(|e| vec![e]).collect();
        Ok(LayeredInstance {
            base: inst.clone(),
            graph: inst,
            ell,
            level_of,
            provenance,
            edge_witness,
        })
    }

    /// Recognizes an instance that is already layered: levels are BFS depths
    /// from the root and must satisfy every layering invariant.
    pub fn detect(inst: DstInstance) -> Result<Self> {
        let n = inst.num_nodes();
        let mut level: Vec<Option<usize>> = vec![None; n];
        level[inst.root()] = Some(0);
        let mut queue = VecDeque::from([inst.root()]);
        while let Some(u) = queue.pop_front() {
            for &e in inst.out_edges(u) {
                let v = inst.edge(e).head;
                if level[v].is_none() {
                    level[v] = Some(level[u].unwrap_or(0) + 1);
                    queue.push_back(v);
                }
            }
        }
        let level_of = level
            .iter()
            .enumerate()
            .map(|(v, l)| {
                l.ok_or_else(|| {
                    Error::Semantic(format!(
                        "cannot infer a level for unreachable node {:?}",
                        inst.name(v)
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let ell = inst
            .terminals()
            .iter()
            .map(|&t| level_of[t])
            .max()
            .unwrap_or(0);
        Self::with_levels(inst, ell, level_of)
    }

    pub fn graph(&self) -> &DstInstance {
        &self.graph
    }

    pub fn base(&self) -> &DstInstance {
        &self.base
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn level_of(&self, v: NodeId) -> usize {
        self.level_of[v]
    }

    /// Nodes of level `j`, ascending.
    pub fn level(&self, j: usize) -> Vec<NodeId> {
        (0..self.graph.num_nodes())
            .filter(|&v| self.level_of[v] == j)
            .collect()
    }

    pub fn provenance(&self, v: NodeId) -> NodeId {
        self.provenance[v]
    }

    /// Base-instance edges a layered edge stands for.
    pub fn witness(&self, e: EdgeId) -> &[EdgeId] {
        &self.edge_witness[e]
    }

    /// Layered node of the base terminal `t`.
    pub fn terminal_copy(&self, t: NodeId) -> Option<NodeId> {
        self.graph
            .terminals()
            .iter()
            .copied()
            .find(|&v| self.provenance[v] == t)
    }
}

/// Builds the ℓ-layered instance: ℓ+1 copies of the node set (level 0 holds
/// only the root, level ℓ only the terminals), cost-0 edges between
/// consecutive copies of a node, and a closure edge `u@j-1 -> v@j` of
/// shortest-path cost for every ordered pair with `v` reachable from `u`.
pub fn levelize(inst: &DstInstance, ell: usize, opts: LevelizeOptions) -> Result<LayeredInstance> {
    if ell == 0 {
        return Err(Error::Precondition("ell must be at least 1".into()));
    }
    let closure = metric_closure(inst);
    let root = inst.root();

    let mut names = Vec::new();
    let mut level_of = Vec::new();
    let mut provenance = Vec::new();
    let mut copies: Vec<Vec<(NodeId, NodeId)>> = Vec::with_capacity(ell + 1);
    for j in 0..=ell {
        let members: Vec<NodeId> = (0..inst.num_nodes())
            .filter(|&v| match j {
                0 => v == root,
                _ if j == ell => inst.is_terminal(v),
                _ => v != root,
            })
            .collect();
        let mut layer = Vec::with_capacity(members.len());
        for v in members {
            layer.push((v, names.len()));
            names.push(format!("{}@{j}", inst.name(v)));
            level_of.push(j);
            provenance.push(v);
        }
        copies.push(layer);
    }

    let mut edges = Vec::new();
    let mut witness_of: HashMap<(NodeId, NodeId), Vec<EdgeId>> = HashMap::new();
    for j in 1..=ell {
        for &(u, lu) in &copies[j - 1] {
            for &(v, lv) in &copies[j] {
                let (cost, witness) = if u == v {
                    (Rational::zero(), Vec::new())
                } else {
                    match closure.cost(u, v) {
                        Some(c) => (c.clone(), closure.path(u, v).unwrap_or_default()),
                        None => continue,
                    }
                };
                edges.push((lu, lv, cost));
                witness_of.insert((lu, lv), witness);
            }
        }
    }
    let terminals: Vec<NodeId> = copies[ell].iter().map(|&(_, l)| l).collect();
    let graph = DstInstance::new(names, edges, 0, terminals)?;
    let edge_witness = graph
        .edges()
        .iter()
        .map(|e| witness_of.remove(&(e.tail, e.head)).unwrap_or_default())
        .collect();
    let layered = LayeredInstance {
        graph,
        base: inst.clone(),
        ell,
        level_of,
        provenance,
        edge_witness,
    };
    Ok(if opts.prune { prune(layered)? } else { layered })
}

fn prune(li: LayeredInstance) -> Result<LayeredInstance> {
    let g = &li.graph;
    let forward = g.reachable_from(g.root(), |_| true);
    // Backward reachability from the terminals.
    let mut backward = vec![false; g.num_nodes()];
    let mut queue: VecDeque<NodeId> = g.terminals().iter().copied().collect();
    for &t in g.terminals() {
        backward[t] = true;
    }
    while let Some(v) = queue.pop_front() {
        for &e in g.in_edges(v) {
            let u = g.edge(e).tail;
            if !backward[u] {
                backward[u] = true;
                queue.push_back(u);
            }
        }
    }
    let keep: Vec<bool> = (0..g.num_nodes())
        .map(|v| forward[v] && backward[v])
        .collect();
    let mut new_id = vec![usize::MAX; g.num_nodes()];
    let mut names = Vec::new();
    let mut level_of = Vec::new();
    let mut provenance = Vec::new();
    for v in 0..g.num_nodes() {
        if keep[v] {
            new_id[v] = names.len();
            names.push(g.name(v).to_string());
            level_of.push(li.level_of[v]);
            provenance.push(li.provenance[v]);
        }
    }
    let mut edges = Vec::new();
    let mut witness_of = HashMap::new();
    for (id, e) in g.edges().iter().enumerate() {
        if keep[e.tail] && keep[e.head] {
            edges.push((new_id[e.tail], new_id[e.head], e.cost.clone()));
            witness_of.insert(
                (new_id[e.tail], new_id[e.head]),
                li.edge_witness[id].clone(),
            );
        }
    }
    let terminals: Vec<NodeId> = g.terminals().iter().map(|&t| new_id[t]).collect();
    let graph = DstInstance::new(names, edges, new_id[g.root()], terminals)?;
    let edge_witness = graph
        .edges()
        .iter()
        .map(|e| witness_of.remove(&(e.tail, e.head)).unwrap_or_default())
        .collect();
    Ok(LayeredInstance {
        graph,
        base: li.base,
        ell: li.ell,
        level_of,
        provenance,
        edge_witness,
    })
}

/// Maps a feasible layered solution back to the base instance: copy edges
/// vanish and closure edges expand to their witness paths. The result is
/// deduplicated and sorted, so its cost never exceeds the layered cost.
pub fn map_back(layered_solution: &[EdgeId], li: &LayeredInstance) -> Result<Vec<EdgeId>> {
    let g = li.graph();
    if let Some(&e) = layered_solution.iter().find(|&&e| e >= g.num_edges()) {
        return Err(Error::Semantic(format!("unknown layered edge id {e}")));
    }
    let chosen: HashSet<EdgeId> = layered_solution.iter().copied().collect();
    let reach = g.reachable_from(g.root(), |e| chosen.contains(&e));
    if let Some(&t) = g.terminals().iter().find(|&&t| !reach[t]) {
        return Err(Error::Infeasible(format!(
            "layered solution does not connect terminal {:?}",
            g.name(t)
        )));
    }
    let mut out: Vec<EdgeId> = chosen
        .iter()
        .flat_map(|&e| li.witness(e).iter().copied())
        .collect();
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// Cheapest root-`s` path in the layered graph (`s` is a layered node id).
pub fn shortest_path(li: &LayeredInstance, s: NodeId) -> Result<PathRecord> {
    let g = li.graph();
    if s >= g.num_nodes() {
        return Err(Error::Semantic(format!("unknown node id {s}")));
    }
    let (dist, pred) = g.dijkstra(g.root());
    if dist[s].is_none() {
        return Err(Error::Infeasible(format!(
            "{:?} is unreachable from the root",
            g.name(s)
        )));
    }
    let mut edges = Vec::new();
    let mut cur = s;
    while cur != g.root() {
        let e = pred[cur].ok_or_else(|| Error::Infeasible("broken predecessor chain".into()))?;
        edges.push(e);
        cur = g.edge(e).tail;
    }
    edges.reverse();
    PathRecord::from_edges(g, g.root(), edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::scalar::int;

    #[test]
    fn parses_figure_one() {
        let inst = fixtures::figure_one();
        assert_eq!(inst.num_nodes(), 12);
        assert_eq!(inst.num_edges(), 17);
        assert_eq!(inst.terminals().len(), 4);
        assert_eq!(inst.name(inst.root()), "r");
    }

    #[test]
    fn minimal_instance() {
        let inst =
            parse_instance("dst 2 1\nnode r\nnode s\nroot r\nterminal s\nedge r s 5\n").unwrap();
        assert_eq!(inst.num_edges(), 1);
        assert_eq!(inst.edge(0).cost, int(5));
    }

    #[test]
    fn rejects_bad_files() {
        let unknown = "dst 2 1\nnode r\nnode s\nroot r\nterminal s\nedge r x 5\n";
        assert!(matches!(parse_instance(unknown), Err(Error::Semantic(_))));
        let negative = "dst 2 1\nnode r\nnode s\nroot r\nterminal s\nedge r s -1\n";
        assert!(matches!(parse_instance(negative), Err(Error::Semantic(_))));
        let unreachable =
            "dst 3 1\nnode r\nnode s\nnode t\nroot r\nterminal s\nterminal t\nedge r s 1\n";
        assert!(matches!(
            parse_instance(unreachable),
            Err(Error::Semantic(_))
        ));
        let syntax = "dst 2 1\nnode r\nnode s\nroot r\nterminal s\nedge r s\n";
        assert!(matches!(
            parse_instance(syntax),
            Err(Error::Syntax { line: 6, .. })
        ));
        let counts = "dst 3 1\nnode r\nnode s\nroot r\nterminal s\nedge r s 1\n";
        assert!(matches!(
            parse_instance(counts),
            Err(Error::Syntax { line: 1, .. })
        ));
        let self_loop = "dst 2 2\nnode r\nnode s\nroot r\nterminal s\nedge r s 1\nedge s s 1\n";
        assert!(parse_instance(self_loop).is_err());
        let root_terminal = "dst 2 1\nnode r\nnode s\nroot r\nterminal r\nedge r s 1\n";
        assert!(parse_instance(root_terminal).is_err());
    }

    #[test]
    fn merges_parallel_edges_and_strips_comments() {
        let text = "# two copies\ndst 2 2\nnode r\nnode s\nroot r # root\nterminal s\nedge r s 7\nedge r s 3/2\n";
        let inst = parse_instance(text).unwrap();
        assert_eq!(inst.num_edges(), 1);
        assert_eq!(inst.edge(0).cost, crate::scalar::rat(3, 2));
    }

    #[test]
    fn dst_string_round_trips() {
        let inst = fixtures::figure_one();
        let again = parse_instance(&inst.to_dst_string()).unwrap();
        assert_eq!(again.to_dst_string(), inst.to_dst_string());
        assert_eq!(again.edges(), inst.edges());
    }

    #[test]
    fn closure_on_figure_one_and_triangle() {
        let inst = fixtures::figure_one();
        let mc = metric_closure(&inst);
        let r = inst.node_by_name("r").unwrap();
        let s4 = inst.node_by_name("s4").unwrap();
        assert_eq!(mc.cost(r, s4), Some(&int(5)));
        let path = mc.path(r, s4).unwrap();
        let labels: Vec<String> = path.iter().map(|&e| inst.edge_label(e)).collect();
        assert_eq!(labels, ["r->u3", "u3->v4", "v4->s4"]);

        let tri = fixtures::triangle();
        let mc = metric_closure(&tri);
        let (r, b) = (
            tri.node_by_name("r").unwrap(),
            tri.node_by_name("b").unwrap(),
        );
        assert_eq!(mc.cost(r, b), Some(&int(2)));
        assert_eq!(mc.cost(b, r), None);
        assert_eq!(mc.path(r, r), Some(vec![]));
    }

    #[test]
    fn levelize_single_edge() {
        let inst = fixtures::single_edge(5);
        let li = levelize(&inst, 1, LevelizeOptions::default()).unwrap();
        let g = li.graph();
        assert_eq!(g.num_edges(), 1);
        assert_eq!(g.edge_label(0), "r@0->s@1");
        assert_eq!(g.edge(0).cost, int(5));
        assert!(levelize(&inst, 0, LevelizeOptions::default()).is_err());
    }

    #[test]
    fn levelize_two_hop_path_uses_closure() {
        let inst = fixtures::two_hop_path();
        let li = levelize(&inst, 1, LevelizeOptions::default()).unwrap();
        let g = li.graph();
        let e = g.edge_by_names("r@0", "s@1").unwrap();
        assert_eq!(g.edge(e).cost, int(2));
        let back = map_back(&[e], &li).unwrap();
        let labels: Vec<String> = back.iter().map(|&b| inst.edge_label(b)).collect();
        assert_eq!(labels, ["r->a", "a->s"]);
        assert_eq!(inst.cost_of(&back), int(2));
    }

    #[test]
    fn layered_edges_join_consecutive_levels() {
        let inst = fixtures::figure_one();
        for ell in 1..=3 {
            for prune in [false, true] {
                let li = levelize(&inst, ell, LevelizeOptions { prune }).unwrap();
                let g = li.graph();
                for e in g.edges() {
                    assert_eq!(li.level_of(e.head), li.level_of(e.tail) + 1);
                }
                assert_eq!(li.level(0), vec![g.root()]);
                assert_eq!(li.level(ell), g.terminals().to_vec());
            }
        }
    }

    #[test]
    fn detect_recognizes_figure_one() {
        let li = LayeredInstance::detect(fixtures::figure_one()).unwrap();
        assert_eq!(li.ell(), 3);
        assert_eq!(li.level(1).len(), 3);
        assert_eq!(li.level(2).len(), 4);
        let tri = fixtures::triangle();
        assert!(LayeredInstance::detect(tri).is_err());
    }

    #[test]
    fn map_back_identity_on_layered_input() {
        let li = LayeredInstance::detect(fixtures::figure_one()).unwrap();
        let black = fixtures::figure_one_optimum(li.graph());
        let back = map_back(&black, &li).unwrap();
        assert_eq!(back, black);
        assert_eq!(li.base().cost_of(&back), int(19));
        assert!(matches!(
            map_back(&black[..3], &li),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn shortest_paths_on_figure_one() {
        let li = LayeredInstance::detect(fixtures::figure_one()).unwrap();
        let g = li.graph();
        let s4 = shortest_path(&li, g.node_by_name("s4").unwrap()).unwrap();
        assert_eq!(s4.cost, int(5));
        let labels: Vec<String> = s4.edges.iter().map(|&e| g.edge_label(e)).collect();
        assert_eq!(labels, ["r->u3", "u3->v4", "v4->s4"]);
        let s2 = shortest_path(&li, g.node_by_name("s2").unwrap()).unwrap();
        assert_eq!(s2.cost, int(8));

        let single = LayeredInstance::detect(fixtures::single_edge(5)).unwrap();
        let p = shortest_path(&single, 1).unwrap();
        assert_eq!((p.edges.clone(), p.cost), (vec![0], int(5)));
    }

    #[test]
    fn path_record_checks_incidence() {
        let inst = fixtures::figure_one();
        let r = inst.root();
        let e1 = inst.edge_by_names("r", "u1").unwrap();
        let e2 = inst.edge_by_names("u3", "v4").unwrap();
        assert!(PathRecord::from_edges(&inst, r, vec![e1, e2]).is_err());
    }
}
