//! Mention and retweet graphs, their largest strongly connected component,
//! and numeric assortativity of attitude attributes.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::attitude::{AttitudeScore, Group};
use crate::corpus::{PostKind, RawPost};
use crate::error::{Error, Result};
use crate::factorizer::FactorModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphKind {
    Mention,
    Retweet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub source: usize,
    pub target: usize,
    pub weight: u64,
}

/// Weighted directed user graph. Node ids are kept sorted; edges are unique
/// per ordered pair, sorted, and never self-loops.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionGraph {
    pub kind: GraphKind,
    nodes: Vec<String>,
    attitudes: Vec<Option<AttitudeScore>>,
    edges: Vec<Edge>,
}

impl InteractionGraph {
    /// Builds from node ids and `(source, target, weight)` triples. Unknown
    /// endpoints are added as nodes, self-loops and zero weights are dropped,
    /// repeated pairs are merged by summing weights.
    pub fn from_edges<N, S>(kind: GraphKind, nodes: N, edges: &[(&str, &str, u64)]) -> Self
    where
        N: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut weights: BTreeMap<(String, String), u64> = BTreeMap::new();
        let mut ids: BTreeSet<String> = nodes.into_iter().map(Into::into).collect();
        for &(s, t, w) in edges {
            ids.insert(s.to_string());
            ids.insert(t.to_string());
            if s != t && w > 0 {
                *weights.entry((s.to_string(), t.to_string())).or_insert(0) += w;
            }
        }
        Self::assemble(kind, ids, weights)
    }

    fn assemble(kind: GraphKind, ids: BTreeSet<String>, weights: BTreeMap<(String, String), u64>) -> Self {
        let nodes: Vec<String> = ids.into_iter().collect();
        let index: HashMap<&str, usize> = nodes.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        let mut edges: Vec<Edge> = weights
            .iter()
            .map(|((s, t), &w)| Edge {
                source: index[s.as_str()],
                target: index[t.as_str()],
                weight: w,
            })
            .collect();
        edges.sort();
        InteractionGraph {
            kind,
            attitudes: vec![None; nodes.len()],
            nodes,
            edges,
        }
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.nodes.binary_search_by(|n| n.as_str().cmp(id)).ok()
    }

    pub fn weight(&self, source: &str, target: &str) -> Option<u64> {
        let (s, t) = (self.node_index(source)?, self.node_index(target)?);
        self.edges
            .binary_search_by(|e| (e.source, e.target).cmp(&(s, t)))
            .ok()
            .map(|k| self.edges[k].weight)
    }

    pub fn attitude(&self, node: usize) -> Option<AttitudeScore> {
        self.attitudes[node]
    }

    pub fn set_attitude(&mut self, node: usize, score: Option<AttitudeScore>) {
        self.attitudes[node] = score;
    }

    /// Attaches model associations; users without a model row stay
    /// unscored and are skipped by assortativity.
    pub fn attach_attitudes(&mut self, model: &FactorModel) {
        for (i, id) in self.nodes.iter().enumerate() {
            self.attitudes[i] = model.user_score_by_id(id);
        }
    }

    /// Same nodes and attitudes, every edge reversed.
    pub fn reversed(&self) -> Self {
        let mut edges: Vec<Edge> = self
            .edges
            .iter()
            .map(|e| Edge {
                source: e.target,
                target: e.source,
                weight: e.weight,
            })
            .collect();
        edges.sort();
        InteractionGraph {
            kind: self.kind,
            nodes: self.nodes.clone(),
            attitudes: self.attitudes.clone(),
            edges,
        }
    }

    /// Subgraph induced by `keep` (indices into this graph).
    pub fn induced(&self, keep: &BTreeSet<usize>) -> Self {
        let remap: HashMap<usize, usize> = keep.iter().enumerate().map(|(new, &old)| (old, new)).collect();
        let edges = self
            .edges
            .iter()
            .filter_map(|e| {
                Some(Edge {
                    source: *remap.get(&e.source)?,
                    target: *remap.get(&e.target)?,
                    weight: e.weight,
                })
            })
            .collect();
        InteractionGraph {
            kind: self.kind,
            nodes: keep.iter().map(|&i| self.nodes[i].clone()).collect(),
            attitudes: keep.iter().map(|&i| self.attitudes[i]).collect(),
            edges,
        }
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            adj[e.source].push(e.target);
        }
        adj
    }
}

fn authors(posts: &[RawPost]) -> BTreeSet<String> {
    posts.iter().map(|p| p.author_id.clone()).collect()
}

/// Edge `u → v` weighted by the number of `u`'s posts that mention `v`.
pub fn build_mention_graph(posts: &[RawPost]) -> InteractionGraph {
    let mut weights: BTreeMap<(String, String), u64> = BTreeMap::new();
    let mut ids = authors(posts);
    for post in posts {
        let targets: BTreeSet<&String> = post.mentioned_author_ids.iter().collect();
        for target in targets {
            if *target == post.author_id {
                continue;
            }
            ids.insert(target.clone());
            *weights.entry((post.author_id.clone(), target.clone())).or_insert(0) += 1;
        }
    }
    InteractionGraph::assemble(GraphKind::Mention, ids, weights)
}

/// Edge `u → v` weighted by the number of times `u` retweets `v`.
pub fn build_retweet_graph(posts: &[RawPost]) -> InteractionGraph {
    let mut weights: BTreeMap<(String, String), u64> = BTreeMap::new();
    let mut ids = authors(posts);
    for post in posts.iter().filter(|p| p.kind == PostKind::Retweet) {
        let Some(original) = &post.retweeted_author_id else {
            continue;
        };
        if *original == post.author_id {
            continue;
        }
        ids.insert(original.clone());
        *weights.entry((post.author_id.clone(), original.clone())).or_insert(0) += 1;
    }
    InteractionGraph::assemble(GraphKind::Retweet, ids, weights)
}

/// Strongly connected components (Tarjan, iterative). Each component is
/// returned as a sorted set of node indices.
pub fn strongly_connected_components(graph: &InteractionGraph) -> Vec<BTreeSet<usize>> {
    let adj = graph.adjacency();
    let n = adj.len();
    const UNSEEN: usize = usize::MAX;
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut components = Vec::new();
    let mut counter = 0;

    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        // (node, next child position)
        let mut call: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(&(v, child)) = call.last() {
            if let Some(&w) = adj[v].get(child) {
                call.last_mut().expect("frame present").1 += 1;
                if index[w] == UNSEEN {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let mut component = BTreeSet::new();
                loop {
                    let w = stack.pop().expect("tarjan stack underflow");
                    on_stack[w] = false;
                    component.insert(w);
                    if w == v {
                        break;
                    }
                }
                components.push(component);
            }
        }
    }
    components
}

/// Induced subgraph on the largest strongly connected component. Among
/// equally large components the one whose sorted id list is
/// lexicographically smallest wins.
pub fn largest_scc(graph: &InteractionGraph) -> Result<InteractionGraph> {
    if graph.node_count() == 0 {
        return Err(Error::EmptyGraph);
    }
    let ids = |c: &BTreeSet<usize>| -> Vec<&str> { c.iter().map(|&i| graph.nodes[i].as_str()).collect() };
    let best = strongly_connected_components(graph)
        .into_iter()
        .max_by(|a, b| a.len().cmp(&b.len()).then_with(|| ids(b).cmp(&ids(a))))
        .expect("non-empty graph has a component");
    Ok(graph.induced(&best))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeAttribute {
    Empathy,
    Threat,
    Tendency,
}

impl NodeAttribute {
    pub const ALL: [NodeAttribute; 3] = [NodeAttribute::Empathy, NodeAttribute::Threat, NodeAttribute::Tendency];

    pub fn of(&self, score: AttitudeScore) -> f64 {
        match self {
            NodeAttribute::Empathy => score.empathy,
            NodeAttribute::Threat => score.threat,
            NodeAttribute::Tendency => score.tendency(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeWeighting {
    /// One pair per directed edge.
    #[default]
    Unweighted,
    /// Each pair counted `weight` times.
    Weighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssortativityResult {
    pub attribute: NodeAttribute,
    pub coefficient: f64,
    /// Edges that contributed a pair.
    pub n_edges: usize,
}

/// Weighted Pearson correlation of paired samples. `None` when fewer than
/// two pairs are given or either side is constant.
pub fn pearson(pairs: &[(f64, f64, f64)]) -> Option<f64> {
    if pairs.len() < 2 {
        return None;
    }
    let total: f64 = pairs.iter().map(|p| p.2).sum();
    if !(total > 0.0) {
        return None;
    }
    let mx = pairs.iter().map(|p| p.2 * p.0).sum::<f64>() / total;
    let my = pairs.iter().map(|p| p.2 * p.1).sum::<f64>() / total;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y, w) in pairs {
        let (dx, dy) = (x - mx, y - my);
        sxy += w * dx * dy;
        sxx += w * dx * dx;
        syy += w * dy * dy;
    }
    if !(sxx > 0.0 && syy > 0.0) {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Assortativity of an arbitrary node attribute: Pearson correlation of
/// `(value(source), value(target))` over the edge list. Edges touching a
/// node whose value is `None` are skipped.
pub fn assortativity_by<F>(graph: &InteractionGraph, weighting: EdgeWeighting, value: F) -> Result<(f64, usize)>
where
    F: Fn(usize) -> Option<f64>,
{
    if graph.node_count() == 0 {
        return Err(Error::EmptyGraph);
    }
    let pairs: Vec<(f64, f64, f64)> = graph
        .edges
        .iter()
        .filter_map(|e| {
            let w = match weighting {
                EdgeWeighting::Unweighted => 1.0,
                EdgeWeighting::Weighted => e.weight as f64,
            };
            Some((value(e.source)?, value(e.target)?, w))
        })
        .collect();
    let r = pearson(&pairs).ok_or(Error::DegenerateAttribute)?;
    Ok((r, pairs.len()))
}

pub fn assortativity(
    graph: &InteractionGraph,
    attribute: NodeAttribute,
    weighting: EdgeWeighting,
) -> Result<AssortativityResult> {
    let (coefficient, n_edges) =
        assortativity_by(graph, weighting, |i| graph.attitudes[i].map(|s| attribute.of(s)))?;
    Ok(AssortativityResult {
        attribute,
        coefficient,
        n_edges,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub source: String,
    pub target: String,
    pub weight: u64,
    pub source_tendency: Option<f64>,
    pub source_group: Option<Group>,
}

pub fn edge_records(graph: &InteractionGraph) -> Vec<EdgeRecord> {
    graph
        .edges
        .iter()
        .map(|e| {
            let score = graph.attitudes[e.source];
            EdgeRecord {
                source: graph.nodes[e.source].clone(),
                target: graph.nodes[e.target].clone(),
                weight: e.weight,
                source_tendency: score.map(|s| s.tendency()),
                source_group: score.map(|s| Group::from_tendency(s.tendency())),
            }
        })
        .collect()
}

pub fn write_edge_list(writer: impl std::io::Write, graph: &InteractionGraph) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    for r in edge_records(graph) {
        out.serialize(r)?;
    }
    out.flush().map_err(|e| Error::io("<edge csv>", e))?;
    Ok(())
}

pub fn write_edge_list_csv(path: &Path, graph: &InteractionGraph) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_edge_list(file, graph)
}

/// Summary of one interaction network, as written to the metrics JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSummary {
    pub kind: GraphKind,
    pub nodes: usize,
    pub edges: usize,
    pub scc_nodes: usize,
    pub scc_edges: usize,
    /// Attribute name to coefficient; `None` where undefined.
    pub assortativity: BTreeMap<String, Option<f64>>,
    pub assortativity_edges: BTreeMap<String, usize>,
    pub weighting: EdgeWeighting,
}

/// Builds the largest SCC of `graph` and measures every attribute on it.
pub fn summarize(graph: &InteractionGraph, weighting: EdgeWeighting) -> (NetworkSummary, Option<InteractionGraph>) {
    let scc = largest_scc(graph).ok();
    let mut coefficients = BTreeMap::new();
    let mut counts = BTreeMap::new();
    for attr in NodeAttribute::ALL {
        let name = serde_json::to_value(attr)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default();
        let result = scc.as_ref().and_then(|g| assortativity(g, attr, weighting).ok());
        coefficients.insert(name.clone(), result.map(|r| r.coefficient));
        counts.insert(name, result.map(|r| r.n_edges).unwrap_or(0));
    }
    let summary = NetworkSummary {
        kind: graph.kind,
        nodes: graph.node_count(),
        edges: graph.edge_count(),
        scc_nodes: scc.as_ref().map_or(0, |g| g.node_count()),
        scc_edges: scc.as_ref().map_or(0, |g| g.edge_count()),
        assortativity: coefficients,
        assortativity_edges: counts,
        weighting,
    };
    (summary, scc)
}
