use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest dimension for which all vines are enumerated.
pub const MAX_ENUM_DIM: usize = 5;

/// An edge `a, b | D` with 1-based variable labels.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VineEdge {
    pub conditioned: [usize; 2],
    #[serde(default)]
    pub conditioning: Vec<usize>,
}

impl VineEdge {
    /// Builds an edge with `a < b` and a sorted conditioning set.
    pub fn new(a: usize, b: usize, mut conditioning: Vec<usize>) -> Self {
        conditioning.sort_unstable();
        VineEdge {
            conditioned: [a.min(b), a.max(b)],
            conditioning,
        }
    }

    /// `{a, b} union D`.
    pub fn constraint_set(&self) -> BTreeSet<usize> {
        self.conditioned.iter().chain(&self.conditioning).copied().collect()
    }

    fn canonical(&self) -> VineEdge {
        VineEdge::new(self.conditioned[0], self.conditioned[1], self.conditioning.clone())
    }
}

impl fmt::Display for VineEdge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.conditioned[0], self.conditioned[1])?;
        if !self.conditioning.is_empty() {
            let d: Vec<String> = self.conditioning.iter().map(|v| v.to_string()).collect();
            write!(f, "|{}", d.join(","))?;
        }
        Ok(())
    }
}

/// A regular vine on variables `1..=d`: trees `T_1, ..., T_{d-1}` given by their edges.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VineStructure {
    pub d: usize,
    pub trees: Vec<Vec<VineEdge>>,
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.0[i] != i {
            self.0[i] = self.0[self.0[i]];
            i = self.0[i];
        }
        i
    }

    /// False if `a` and `b` were already connected.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.0[ra] = rb;
        true
    }
}

fn invalid<T>(msg: String) -> Result<T> {
    Err(Error::InvalidStructure(msg))
}

impl VineStructure {
    /// Canonicalizes edge order and validates.
    pub fn new(d: usize, trees: Vec<Vec<VineEdge>>) -> Result<Self> {
        let v = VineStructure { d, trees }.canonical();
        v.validate()?;
        Ok(v)
    }

    /// Same vine with sorted labels inside edges and sorted edges inside trees.
    pub fn canonical(&self) -> VineStructure {
        VineStructure {
            d: self.d,
            trees: self
                .trees
                .iter()
                .map(|t| {
                    let mut t: Vec<VineEdge> = t.iter().map(VineEdge::canonical).collect();
                    t.sort();
                    t
                })
                .collect(),
        }
    }

    /// Edges of trees `T_2, ..., T_{d-1}` (those with a conditioning set).
    pub fn conditional_edges(&self) -> impl Iterator<Item = &VineEdge> {
        self.trees.iter().skip(1).flatten()
    }

    /// Checks the tree sizes, edge labels, spanning-tree property of every
    /// tree and the proximity condition.
    pub fn validate(&self) -> Result<()> {
        let d = self.d;
        if d < 2 {
            return invalid(format!("dimension must be at least 2, got {d}"));
        }
        if self.trees.len() != d - 1 {
            return invalid(format!(
                "expected {} trees for d = {d}, got {}",
                d - 1,
                self.trees.len()
            ));
        }
        // Nodes of T_k (0-based k) as pairs of T_{k-1} node indices; T_1 nodes are variables.
        let mut prev_sets: Vec<BTreeSet<usize>> = (1..=d).map(|v| BTreeSet::from([v])).collect();
        let mut prev_nodes: Option<Vec<[usize; 2]>> = None;
        for (k, tree) in self.trees.iter().enumerate() {
            let level = k + 1;
            if tree.len() != d - level {
                return invalid(format!(
                    "tree {level} must have {} edges, has {}",
                    d - level,
                    tree.len()
                ));
            }
            let index: HashMap<&BTreeSet<usize>, usize> = prev_sets.iter().enumerate().map(|(i, s)| (s, i)).collect();
            if index.len() != prev_sets.len() {
                return invalid(format!("tree {} has repeated edges", level.saturating_sub(1).max(1)));
            }
            let mut uf = UnionFind::new(prev_sets.len());
            let mut sets = Vec::with_capacity(tree.len());
            let mut nodes = Vec::with_capacity(tree.len());
            for e in tree {
                let [a, b] = e.conditioned;
                let labels = || e.conditioned.iter().chain(&e.conditioning);
                if labels().any(|&v| v == 0 || v > d) {
                    return invalid(format!("edge {e} in tree {level} uses a label outside 1..={d}"));
                }
                if e.conditioning.len() != level - 1 {
                    return invalid(format!(
                        "edge {e} in tree {level} must have {} conditioning variable(s)",
                        level - 1
                    ));
                }
                let u = e.constraint_set();
                if a == b || u.len() != level + 1 {
                    return invalid(format!("edge {e} in tree {level} repeats a label"));
                }
                let mut with_a: BTreeSet<usize> = e.conditioning.iter().copied().collect();
                with_a.insert(a);
                let mut with_b: BTreeSet<usize> = e.conditioning.iter().copied().collect();
                with_b.insert(b);
                let (Some(&f), Some(&g)) = (index.get(&with_a), index.get(&with_b)) else {
                    return invalid(format!(
                        "edge {e} in tree {level} does not join two nodes of tree {}",
                        level - 1
                    ));
                };
                if let Some(pn) = &prev_nodes {
                    let (nf, ng) = (pn[f], pn[g]);
                    if !nf.iter().any(|x| ng.contains(x)) {
                        return invalid(format!("edge {e} in tree {level} violates the proximity condition"));
                    }
                }
                if !uf.union(f, g) {
                    return invalid(format!("tree {level} contains a cycle at edge {e}"));
                }
                sets.push(u);
                nodes.push([f, g]);
            }
            prev_sets = sets;
            prev_nodes = Some(nodes);
        }
        Ok(())
    }
}

impl fmt::Display for VineStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let trees: Vec<String> = self
            .trees
            .iter()
            .map(|t| t.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(" "))
            .collect();
        write!(f, "{}", trees.join(" / "))
    }
}

/// `d!/2 * 2^((d-2)(d-3)/2)` for `d >= 3`, and 1 for `d = 2`.
pub fn vine_count(d: usize) -> u128 {
    match d {
        0 | 1 => 0,
        2 => 1,
        _ => {
            let fact: u128 = (1..=d as u128).product();
            fact / 2 * (1u128 << ((d - 2) * (d - 3) / 2))
        }
    }
}

/// All spanning trees of the graph on `n` nodes with edge list `edges`, as edge-index sets.
fn spanning_trees(n: usize, edges: &[[usize; 2]]) -> Vec<Vec<usize>> {
    fn rec(n: usize, edges: &[[usize; 2]], start: usize, chosen: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if chosen.len() == n - 1 {
            let mut uf = UnionFind::new(n);
            if chosen.iter().all(|&i| uf.union(edges[i][0], edges[i][1])) {
                out.push(chosen.clone());
            }
            return;
        }
        for i in start..edges.len() {
            if edges.len() - i < n - 1 - chosen.len() {
                break;
            }
            chosen.push(i);
            rec(n, edges, i + 1, chosen, out);
            chosen.pop();
        }
    }
    let mut out = Vec::new();
    if n >= 1 {
        rec(n, edges, 0, &mut Vec::new(), &mut out);
    }
    out
}

fn extend(d: usize, trees: &mut Vec<Vec<VineEdge>>, nodes: &[[usize; 2]], out: &mut Vec<VineStructure>) {
    let prev = trees.last().expect("at least T_1").clone();
    if prev.len() == 1 {
        out.push(
            VineStructure {
                d,
                trees: trees.clone(),
            }
            .canonical(),
        );
        return;
    }
    // Candidate edges of the next tree join nodes that share a node of the tree below.
    let mut candidates = Vec::new();
    for i in 0..prev.len() {
        for j in (i + 1)..prev.len() {
            if nodes[i].iter().any(|x| nodes[j].contains(x)) {
                candidates.push([i, j]);
            }
        }
    }
    for st in spanning_trees(prev.len(), &candidates) {
        let mut tree = Vec::with_capacity(st.len());
        for &c in &st {
            let [i, j] = candidates[c];
            let (si, sj) = (prev[i].constraint_set(), prev[j].constraint_set());
            let cond: Vec<usize> = si.intersection(&sj).copied().collect();
            let a = *si.difference(&sj).next().expect("sets differ in one element");
            let b = *sj.difference(&si).next().expect("sets differ in one element");
            tree.push(VineEdge::new(a, b, cond));
        }
        let next_nodes: Vec<[usize; 2]> = st.iter().map(|&c| candidates[c]).collect();
        trees.push(tree);
        extend(d, trees, &next_nodes, out);
        trees.pop();
    }
}

/// All labeled regular vines on `d` variables, sorted and without duplicates.
pub fn enumerate_vines(d: usize) -> Result<Vec<VineStructure>> {
    if d > MAX_ENUM_DIM {
        return Err(Error::DimensionTooLarge { d, max: MAX_ENUM_DIM });
    }
    if d < 2 {
        return Err(Error::InvalidParameter(format!(
            "dimension must be at least 2, got {d}"
        )));
    }
    let pairs: Vec<[usize; 2]> = (0..d).flat_map(|a| ((a + 1)..d).map(move |b| [a, b])).collect();
    let mut out = Vec::new();
    for st in spanning_trees(d, &pairs) {
        let t1: Vec<VineEdge> = st
            .iter()
            .map(|&c| VineEdge::new(pairs[c][0] + 1, pairs[c][1] + 1, vec![]))
            .collect();
        let nodes: Vec<[usize; 2]> = st.iter().map(|&c| pairs[c]).collect();
        extend(d, &mut vec![t1], &nodes, &mut out);
    }
    out.sort();
    out.dedup();
    Ok(out)
}
