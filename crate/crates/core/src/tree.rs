//! Adaptation trees and the stacked per-node weight vectors they index.
//!
//! Leaves are target domains. Every node owns a weight vector; the root is
//! anchored to the source weights and every other node to its parent. Nodes
//! are laid out in pre-order with children in declaration order, and that
//! order fixes the layout of the flat vector the solver works on.

use std::collections::{HashMap, HashSet};
use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, TreeError};

/// Unvalidated tree description, as found in tree config and model files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<TreeSpec>,
}

impl TreeSpec {
    pub fn leaf(name: impl Into<String>, domain: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            domain: Some(domain.into()),
            children: Vec::new(),
        }
    }

    pub fn node(name: impl Into<String>, children: Vec<TreeSpec>) -> Self {
        Self {
            name: name.into(),
            domain: None,
            children,
        }
    }

    /// Parses bracket notation such as `[W,[D,C]]`: every bracket is an
    /// internal node (named `N0`, `N1`, ... in pre-order) and every bare
    /// token is a leaf whose name and domain are the token. A bare token
    /// alone is a single-leaf tree.
    pub fn parse_brackets(text: &str) -> Result<Self> {
        let mut parser = BracketParser {
            chars: text.chars().filter(|c| !c.is_whitespace()).collect(),
            pos: 0,
            next_internal: 0,
        };
        let tree = parser.parse_node()?;
        if parser.pos != parser.chars.len() {
            return Err(parser.error("trailing input"));
        }
        Ok(tree)
    }
}

struct BracketParser {
    chars: Vec<char>,
    pos: usize,
    next_internal: usize,
}

impl BracketParser {
    fn error(&self, what: &str) -> Error {
        Error::Config(format!("tree notation: {what} at offset {}", self.pos))
    }

    fn parse_node(&mut self) -> Result<TreeSpec> {
        if self.chars.get(self.pos) == Some(&'[') {
            self.pos += 1;
            let name = format!("N{}", self.next_internal);
            self.next_internal += 1;
            let mut children = vec![self.parse_node()?];
            loop {
                match self.chars.get(self.pos) {
                    Some(',') => {
                        self.pos += 1;
                        children.push(self.parse_node()?);
                    }
                    Some(']') => {
                        self.pos += 1;
                        break;
                    }
                    _ => return Err(self.error("expected `,` or `]`")),
                }
            }
            Ok(TreeSpec::node(name, children))
        } else {
            let start = self.pos;
            while let Some(c) = self.chars.get(self.pos) {
                if matches!(c, '[' | ']' | ',') {
                    break;
                }
                self.pos += 1;
            }
            if start == self.pos {
                return Err(self.error("expected a domain name"));
            }
            let token: String = self.chars[start..self.pos].iter().collect();
            Ok(TreeSpec::leaf(token.clone(), token))
        }
    }
}

/// Tree config file: `{"root": {name, domain?, children?}}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeFile {
    #[serde(default)]
    pub root: Option<TreeSpec>,
}

impl TreeFile {
    pub fn validate(&self) -> Result<AdaptationTree, TreeError> {
        match &self.root {
            Some(root) => validate_tree(root),
            None => Err(TreeError::Empty),
        }
    }
}

/// A validated node. Leaves carry exactly one domain; internal nodes none.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeNode {
    pub name: String,
    pub children: Vec<TreeNode>,
    pub domain: Option<String>,
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct NodeEntry {
    name: String,
    parent: Option<usize>,
    children: Vec<usize>,
    domain: Option<String>,
    /// Domains of the leaves at or below this node, pre-order.
    leaf_domains: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdaptationTree {
    root: TreeNode,
    nodes: Vec<NodeEntry>,
    index: HashMap<String, usize>,
    domain_of_leaf: IndexMap<String, String>,
}

/// Checks the tree invariants and builds the pre-order index.
pub fn validate_tree(spec: &TreeSpec) -> Result<AdaptationTree, TreeError> {
    let mut names = HashSet::new();
    let mut domains: HashMap<String, String> = HashMap::new();
    let root = check_node(spec, &mut names, &mut domains)?;

    let mut nodes = Vec::new();
    index_node(&root, None, &mut nodes);
    let index = nodes.iter().enumerate().map(|(i, n)| (n.name.clone(), i)).collect();
    let domain_of_leaf = nodes
        .iter()
        .filter_map(|n| n.domain.as_ref().map(|d| (n.name.clone(), d.clone())))
        .collect();
    Ok(AdaptationTree {
        root,
        nodes,
        index,
        domain_of_leaf,
    })
}

fn check_node(
    spec: &TreeSpec,
    names: &mut HashSet<String>,
    domains: &mut HashMap<String, String>,
) -> Result<TreeNode, TreeError> {
    if spec.name.is_empty() {
        return Err(TreeError::EmptyName);
    }
    if !names.insert(spec.name.clone()) {
        return Err(TreeError::DuplicateName(spec.name.clone()));
    }
    let domain = spec.domain.clone().filter(|d| !d.is_empty());
    if spec.children.is_empty() {
        let domain = domain.ok_or_else(|| TreeError::LeafWithoutDomain(spec.name.clone()))?;
        if let Some(first) = domains.insert(domain.clone(), spec.name.clone()) {
            return Err(TreeError::DuplicateDomain {
                domain,
                first,
                second: spec.name.clone(),
            });
        }
        return Ok(TreeNode {
            name: spec.name.clone(),
            children: Vec::new(),
            domain: Some(domain),
        });
    }
    if domain.is_some() {
        return Err(TreeError::DomainOnInternalNode(spec.name.clone()));
    }
    let children = spec
        .children
        .iter()
        .map(|c| check_node(c, names, domains))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TreeNode {
        name: spec.name.clone(),
        children,
        domain: None,
    })
}

fn index_node(node: &TreeNode, parent: Option<usize>, out: &mut Vec<NodeEntry>) -> usize {
    let me = out.len();
    out.push(NodeEntry {
        name: node.name.clone(),
        parent,
        children: Vec::new(),
        domain: node.domain.clone(),
        leaf_domains: node.domain.iter().cloned().collect(),
    });
    for child in &node.children {
        let c = index_node(child, Some(me), out);
        out[me].children.push(c);
        let below = out[c].leaf_domains.clone();
        out[me].leaf_domains.extend(below);
    }
    me
}

impl AdaptationTree {
    pub fn new(spec: &TreeSpec) -> Result<Self, TreeError> {
        validate_tree(spec)
    }

    /// Root `root_name` with one leaf per domain; leaves are named after
    /// their domains.
    pub fn flat<S: AsRef<str>>(root_name: &str, domains: &[S]) -> Result<Self, TreeError> {
        let children = domains.iter().map(|d| TreeSpec::leaf(d.as_ref(), d.as_ref())).collect();
        validate_tree(&TreeSpec::node(root_name, children))
    }

    pub fn root(&self) -> &TreeNode {
        &self.root
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Node names in canonical pre-order.
    pub fn node_names(&self) -> impl Iterator<Item = &str> {
        self.nodes.iter().map(|n| n.name.as_str())
    }

    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, node: usize) -> &str {
        &self.nodes[node].name
    }

    pub fn parent(&self, node: usize) -> Option<usize> {
        self.nodes[node].parent
    }

    pub fn children(&self, node: usize) -> &[usize] {
        &self.nodes[node].children
    }

    pub fn domain(&self, node: usize) -> Option<&str> {
        self.nodes[node].domain.as_deref()
    }

    /// Domains of the leaves at or below `node`.
    pub fn leaf_domains(&self, node: usize) -> &[String] {
        &self.nodes[node].leaf_domains
    }

    /// Leaf name to domain, pre-order.
    pub fn domain_of_leaf(&self) -> &IndexMap<String, String> {
        &self.domain_of_leaf
    }

    /// All leaf domains, pre-order.
    pub fn domains(&self) -> &[String] {
        &self.nodes[0].leaf_domains
    }

    pub fn leaf_for_domain(&self, domain: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.domain.as_deref() == Some(domain))
    }

    /// Root-to-node depth (root is 0).
    pub fn depth(&self, mut node: usize) -> usize {
        let mut d = 0;
        while let Some(p) = self.nodes[node].parent {
            node = p;
            d += 1;
        }
        d
    }

    pub fn to_spec(&self) -> TreeSpec {
        fn go(n: &TreeNode) -> TreeSpec {
            TreeSpec {
                name: n.name.clone(),
                domain: n.domain.clone(),
                children: n.children.iter().map(go).collect(),
            }
        }
        go(&self.root)
    }
}

impl fmt::Display for AdaptationTree {
    /// Bracket notation with node names, e.g. `N0[T1,N1[T2,T3]]`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn go(n: &TreeNode, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            f.write_str(&n.name)?;
            if !n.children.is_empty() {
                f.write_str("[")?;
                for (i, c) in n.children.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    go(c, f)?;
                }
                f.write_str("]")?;
            }
            Ok(())
        }
        go(&self.root, f)
    }
}

/// One weight vector per tree node, keyed by node name in pre-order.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightStack {
    per_node: IndexMap<String, Vec<f64>>,
}

impl WeightStack {
    /// Every node starts at a copy of `w`.
    pub fn uniform(tree: &AdaptationTree, w: &[f64]) -> Self {
        Self {
            per_node: tree.node_names().map(|name| (name.to_string(), w.to_vec())).collect(),
        }
    }

    /// Builds a stack from named vectors, checking the key set against the
    /// tree and every length against `len`.
    pub fn from_named(tree: &AdaptationTree, mut named: IndexMap<String, Vec<f64>>, len: usize) -> Result<Self> {
        if named.len() != tree.node_count() {
            return Err(Error::dim("weight stack node count", tree.node_count(), named.len()));
        }
        let mut per_node = IndexMap::with_capacity(named.len());
        for name in tree.node_names() {
            let w = named
                .swap_remove(name)
                .ok_or_else(|| Error::CorruptModel(format!("no weights for node `{name}`")))?;
            if w.len() != len {
                return Err(Error::dim("node weight length", len, w.len()));
            }
            per_node.insert(name.to_string(), w);
        }
        Ok(Self { per_node })
    }

    pub fn get(&self, node: &str) -> Option<&[f64]> {
        self.per_node.get(node).map(Vec::as_slice)
    }

    pub fn by_index(&self, node: usize) -> &[f64] {
        &self.per_node[node]
    }

    pub fn node_order(&self) -> impl Iterator<Item = &str> {
        self.per_node.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.per_node.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn node_count(&self) -> usize {
        self.per_node.len()
    }

    pub fn slot_len(&self) -> usize {
        self.per_node.first().map_or(0, |(_, v)| v.len())
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.per_node.values().flatten().copied().collect()
    }

    /// Inverse of [`WeightStack::flatten`] for a tree with `k` categories over
    /// `n` features.
    pub fn unflatten(flat: &[f64], tree: &AdaptationTree, k: usize, n: usize) -> Result<Self> {
        let len = k * n;
        let expected = tree.node_count() * len;
        if flat.len() != expected || len == 0 {
            return Err(Error::dim("flat weight vector", expected, flat.len()));
        }
        Ok(Self {
            per_node: tree
                .node_names()
                .zip(flat.chunks_exact(len))
                .map(|(name, chunk)| (name.to_string(), chunk.to_vec()))
                .collect(),
        })
    }
}
