use std::collections::HashMap;

use super::{Anchor, CorpusError, FamilyRecord, FamilyTable, Issue, RawEdge, Source};

/// Dense node index into a [`CitationNetwork`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Which families may appear as citing or cited endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct NetworkPolicy {
    pub require_us_utility: bool,
    pub require_granted: bool,
}

impl NetworkPolicy {
    /// Restricted: both ends hold a USPTO utility patent. Extended: both
    /// ends were granted somewhere.
    pub fn default_for(source: Source) -> Self {
        match source {
            Source::Restricted => NetworkPolicy {
                require_us_utility: true,
                require_granted: false,
            },
            Source::Extended => NetworkPolicy {
                require_us_utility: false,
                require_granted: true,
            },
        }
    }

    pub fn admits(&self, family: &FamilyRecord) -> bool {
        (!self.require_us_utility || family.has_us_utility)
            && (!self.require_granted || family.granted_anywhere)
    }
}

/// Family-level directed citation graph (citing → cited) for one source.
///
/// Nodes are sorted by family id. Both adjacency directions are stored in
/// CSR form with sorted, duplicate-free neighbour lists; there are no
/// self-loops. The structure is immutable once built.
#[derive(Debug, Clone)]
pub struct CitationNetwork {
    source: Source,
    ids: Vec<String>,
    index: HashMap<String, NodeId>,
    pub_year: Vec<i32>,
    filing_year: Vec<Option<i32>>,
    back_offsets: Vec<usize>,
    back_targets: Vec<NodeId>,
    fwd_offsets: Vec<usize>,
    fwd_targets: Vec<NodeId>,
}

/// A node description for [`CitationNetwork::from_family_edges`].
#[derive(Debug, Clone)]
pub struct NodeSpec {
    pub family_id: String,
    pub pub_year: i32,
    pub filing_year: Option<i32>,
}

impl CitationNetwork {
    /// Builds a network directly from family-level edges. Self-loops and
    /// duplicates are removed; an endpoint missing from `nodes` is an error.
    pub fn from_family_edges(
        source: Source,
        nodes: impl IntoIterator<Item = NodeSpec>,
        edges: &[(String, String)],
    ) -> Result<Self, CorpusError> {
        let mut nodes: Vec<NodeSpec> = nodes.into_iter().collect();
        nodes.sort_by(|a, b| a.family_id.cmp(&b.family_id));
        nodes.dedup_by(|a, b| a.family_id == b.family_id);
        let index: HashMap<String, NodeId> = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.family_id.clone(), NodeId(i as u32)))
            .collect();
        let mut pairs = Vec::with_capacity(edges.len());
        for (citing, cited) in edges {
            let a = *index
                .get(citing)
                .ok_or_else(|| CorpusError::UnknownFamily(citing.clone()))?;
            let b = *index
                .get(cited)
                .ok_or_else(|| CorpusError::UnknownFamily(cited.clone()))?;
            pairs.push((a, b));
        }
        Ok(Self::assemble(source, nodes, index, pairs))
    }

    fn assemble(
        source: Source,
        nodes: Vec<NodeSpec>,
        index: HashMap<String, NodeId>,
        mut pairs: Vec<(NodeId, NodeId)>,
    ) -> Self {
        pairs.retain(|(a, b)| a != b);
        pairs.sort_unstable();
        pairs.dedup();
        let n = nodes.len();
        let (back_offsets, back_targets) = csr(n, pairs.iter().copied());
        let mut reversed: Vec<(NodeId, NodeId)> = pairs.iter().map(|&(a, b)| (b, a)).collect();
        reversed.sort_unstable();
        let (fwd_offsets, fwd_targets) = csr(n, reversed.into_iter());
        let mut ids = Vec::with_capacity(n);
        let mut pub_year = Vec::with_capacity(n);
        let mut filing_year = Vec::with_capacity(n);
        for node in nodes {
            ids.push(node.family_id);
            pub_year.push(node.pub_year);
            filing_year.push(node.filing_year);
        }
        CitationNetwork {
            source,
            ids,
            index,
            pub_year,
            filing_year,
            back_offsets,
            back_targets,
            fwd_offsets,
            fwd_targets,
        }
    }

    pub fn source(&self) -> Source {
        self.source
    }

    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.back_targets.len()
    }

    pub fn node(&self, family_id: &str) -> Option<NodeId> {
        self.index.get(family_id).copied()
    }

    pub fn contains(&self, family_id: &str) -> bool {
        self.index.contains_key(family_id)
    }

    pub fn family_id(&self, node: NodeId) -> &str {
        &self.ids[node.index()]
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.ids.len() as u32).map(NodeId)
    }

    /// Families cited by `node` (its backward references), sorted.
    pub fn cites(&self, node: NodeId) -> &[NodeId] {
        let i = node.index();
        &self.back_targets[self.back_offsets[i]..self.back_offsets[i + 1]]
    }

    /// Families citing `node` (its forward citations), sorted.
    pub fn cited_by(&self, node: NodeId) -> &[NodeId] {
        let i = node.index();
        &self.fwd_targets[self.fwd_offsets[i]..self.fwd_offsets[i + 1]]
    }

    pub fn has_edge(&self, citing: NodeId, cited: NodeId) -> bool {
        self.cites(citing).binary_search(&cited).is_ok()
    }

    pub fn anchor_year(&self, node: NodeId, anchor: Anchor) -> Option<i32> {
        match anchor {
            Anchor::Publication => Some(self.pub_year[node.index()]),
            Anchor::Filing => self.filing_year[node.index()],
        }
    }

    /// All edges as family-id pairs, sorted.
    pub fn edge_ids(&self) -> Vec<(String, String)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for a in self.nodes() {
            for &b in self.cites(a) {
                out.push((self.family_id(a).to_string(), self.family_id(b).to_string()));
            }
        }
        out
    }
}

fn csr(n: usize, sorted_pairs: impl Iterator<Item = (NodeId, NodeId)>) -> (Vec<usize>, Vec<NodeId>) {
    let mut offsets = vec![0usize; n + 1];
    let mut targets = Vec::new();
    for (a, b) in sorted_pairs {
        offsets[a.index() + 1] += 1;
        targets.push(b);
    }
    for i in 0..n {
        offsets[i + 1] += offsets[i];
    }
    (offsets, targets)
}

/// Result of [`build_network`] with the bookkeeping of what was dropped.
#[derive(Debug, Clone)]
pub struct NetworkBuild {
    pub network: CitationNetwork,
    pub issues: Vec<Issue>,
    pub within_family: usize,
    pub policy_dropped: usize,
    pub duplicates: usize,
}

/// Maps patent-level citations onto families and builds the network.
///
/// Within-family links vanish, parallel links collapse to one edge, and
/// edges whose endpoints fail `policy` are dropped. An endpoint patent with
/// no family record is reported and its edge dropped.
pub fn build_network(
    families: &FamilyTable,
    edges: &[RawEdge],
    source: Source,
    policy: NetworkPolicy,
) -> NetworkBuild {
    let nodes: Vec<NodeSpec> = families
        .families
        .values()
        .filter(|f| policy.admits(f))
        .map(|f| NodeSpec {
            family_id: f.family_id.clone(),
            pub_year: f.earliest_pub_year,
            filing_year: f.earliest_filing_year,
        })
        .collect();
    let index: HashMap<String, NodeId> = nodes
        .iter()
        .enumerate()
        .map(|(i, n)| (n.family_id.clone(), NodeId(i as u32)))
        .collect();

    let mut issues = Vec::new();
    let mut pairs = Vec::with_capacity(edges.len());
    let (mut within_family, mut policy_dropped) = (0, 0);
    for edge in edges {
        let resolve = |pid: &str| {
            families
                .patent_to_family
                .get(pid)
                .filter(|fid| families.families.contains_key(*fid))
        };
        let (citing, cited) = match (resolve(&edge.citing), resolve(&edge.cited)) {
            (Some(a), Some(b)) => (a, b),
            (a, b) => {
                let missing = if a.is_none() { &edge.citing } else { &edge.cited };
                let _ = b;
                issues.push(Issue::new(
                    edge.row_number,
                    "unknown_family",
                    format!("{source}: patent {missing} has no family record"),
                ));
                continue;
            }
        };
        if citing == cited {
            within_family += 1;
            continue;
        }
        match (index.get(citing), index.get(cited)) {
            (Some(&a), Some(&b)) => pairs.push((a, b)),
            _ => policy_dropped += 1,
        }
    }
    let before = pairs.len();
    let network = CitationNetwork::assemble(source, nodes, index, pairs);
    NetworkBuild {
        duplicates: before - network.edge_count(),
        network,
        issues,
        within_family,
        policy_dropped,
    }
}
