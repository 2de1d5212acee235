//! Line-oriented instance files.
//!
//! Tree files: `edge <parent> <child>` with non-negative integer labels,
//! seller = 0; `#` starts a comment, blank lines are ignored. Labels may be
//! sparse; the loader canonicalizes them to dense ids in ascending label
//! order. Valuation files: `<buyer> <decimal in [0,1]>`. Action files:
//! `<buyer> -> <comma-separated children>` or `<buyer> -> nil`; omitted
//! buyers diffuse fully.

use std::collections::BTreeMap;
use std::fmt;

use fpdm::mechanisms::ValuationProfile;
use fpdm::network::{Action, ActionProfile, NodeId, ProfileValidation, SocialTree};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileError {
    pub path: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for FileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "{}:{}: {}", self.path, line, self.message),
            None => write!(f, "{}: {}", self.path, self.message),
        }
    }
}

impl std::error::Error for FileError {}

fn err(path: &str, line: usize, message: impl Into<String>) -> FileError {
    FileError { path: path.to_string(), line: Some(line), message: message.into() }
}

fn err_file(path: &str, message: impl Into<String>) -> FileError {
    FileError { path: path.to_string(), line: None, message: message.into() }
}

/// A tree with its original labels; label 0 is the seller.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoadedTree {
    pub tree: SocialTree,
    /// Dense id -> original label; entry 0 is 0.
    pub labels: Vec<u64>,
    id_of_label: BTreeMap<u64, NodeId>,
}

impl LoadedTree {
    /// Pairs an in-memory tree with explicit labels (dense id -> label).
    pub fn with_labels(tree: SocialTree, labels: Vec<u64>) -> Self {
        let id_of_label = labels.iter().enumerate().map(|(i, &l)| (l, i)).collect();
        LoadedTree { tree, labels, id_of_label }
    }

    pub fn label(&self, id: NodeId) -> u64 {
        self.labels[id]
    }

    pub fn id(&self, label: u64) -> Option<NodeId> {
        self.id_of_label.get(&label).copied()
    }
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            None
        } else {
            Some((i + 1, line))
        }
    })
}

pub fn parse_tree(path: &str, text: &str) -> Result<LoadedTree, FileError> {
    let mut raw_edges: Vec<(u64, u64)> = Vec::new();
    for (line, body) in content_lines(text) {
        let mut tokens = body.split_whitespace();
        match tokens.next() {
            Some("edge") => {}
            Some(other) => return Err(err(path, line, format!("unknown directive `{other}`"))),
            None => continue,
        }
        let parent: u64 = tokens
            .next()
            .ok_or_else(|| err(path, line, "edge needs <parent> <child>"))?
            .parse()
            .map_err(|_| err(path, line, "parent id must be a non-negative integer"))?;
        let child: u64 = tokens
            .next()
            .ok_or_else(|| err(path, line, "edge needs <parent> <child>"))?
            .parse()
            .map_err(|_| err(path, line, "child id must be a non-negative integer"))?;
        if tokens.next().is_some() {
            return Err(err(path, line, "edge takes exactly two ids"));
        }
        raw_edges.push((parent, child));
    }

    let mut labels: Vec<u64> = raw_edges.iter().flat_map(|&(p, c)| [p, c]).collect();
    labels.push(0);
    labels.sort_unstable();
    labels.dedup();
    if labels[0] != 0 {
        return Err(err_file(path, "the seller (id 0) must appear"));
    }
    let id_of_label: BTreeMap<u64, NodeId> =
        labels.iter().enumerate().map(|(i, &l)| (l, i)).collect();
    let edges: Vec<(NodeId, NodeId)> =
        raw_edges.iter().map(|&(p, c)| (id_of_label[&p], id_of_label[&c])).collect();
    let tree = SocialTree::from_edges(&edges).map_err(|e| {
        let described = match e {
            fpdm::Error::DuplicateParent { child } => {
                format!("node {} has more than one parent", labels[child])
            }
            fpdm::Error::Disconnected { node } => {
                format!("node {} is not connected to the seller", labels[node])
            }
            fpdm::Error::CycleDetected => "edge list contains a cycle".to_string(),
            other => other.to_string(),
        };
        err_file(path, described)
    })?;
    Ok(LoadedTree { tree, labels, id_of_label })
}

pub fn print_tree(loaded: &LoadedTree) -> String {
    let mut out = String::new();
    for child in 1..=loaded.tree.buyer_count() {
        let parent = loaded.tree.parent(child).unwrap();
        out.push_str(&format!("edge {} {}\n", loaded.label(parent), loaded.label(child)));
    }
    out
}

pub fn parse_valuations(
    path: &str,
    text: &str,
    loaded: &LoadedTree,
) -> Result<ValuationProfile<f64>, FileError> {
    let mut vals = ValuationProfile::empty(loaded.tree.buyer_count());
    for (line, body) in content_lines(text) {
        let mut tokens = body.split_whitespace();
        let label: u64 = tokens
            .next()
            .unwrap()
            .parse()
            .map_err(|_| err(path, line, "buyer id must be a non-negative integer"))?;
        let value: f64 = tokens
            .next()
            .ok_or_else(|| err(path, line, "valuation line needs <buyer> <value>"))?
            .parse()
            .map_err(|_| err(path, line, "valuation must be a decimal"))?;
        if tokens.next().is_some() {
            return Err(err(path, line, "valuation line takes exactly two fields"));
        }
        let id = loaded
            .id(label)
            .filter(|&id| id != 0)
            .ok_or_else(|| err(path, line, format!("unknown buyer {label}")))?;
        if vals.get(id).is_some() {
            return Err(err(path, line, format!("duplicate valuation for buyer {label}")));
        }
        vals.set(id, value)
            .map_err(|_| err(path, line, format!("valuation for buyer {label} outside [0, 1]")))?;
    }
    Ok(vals)
}

pub fn print_valuations(loaded: &LoadedTree, vals: &ValuationProfile<f64>) -> String {
    let mut out = String::new();
    for buyer in 1..=loaded.tree.buyer_count() {
        if let Some(v) = vals.get(buyer) {
            out.push_str(&format!("{} {}\n", loaded.label(buyer), v));
        }
    }
    out
}

pub fn parse_actions(
    path: &str,
    text: &str,
    loaded: &LoadedTree,
    validation: ProfileValidation,
) -> Result<ActionProfile, FileError> {
    let mut overrides: Vec<(NodeId, Action)> = Vec::new();
    let mut line_of_buyer: BTreeMap<NodeId, usize> = BTreeMap::new();
    for (line, body) in content_lines(text) {
        let (lhs, rhs) = body
            .split_once("->")
            .ok_or_else(|| err(path, line, "action line needs `<buyer> -> <children|nil>`"))?;
        let label: u64 = lhs
            .trim()
            .parse()
            .map_err(|_| err(path, line, "buyer id must be a non-negative integer"))?;
        let buyer = loaded
            .id(label)
            .filter(|&id| id != 0)
            .ok_or_else(|| err(path, line, format!("unknown buyer {label}")))?;
        if line_of_buyer.insert(buyer, line).is_some() {
            return Err(err(path, line, format!("duplicate action for buyer {label}")));
        }
        let rhs = rhs.trim();
        let action = if rhs == "nil" {
            Action::Nil
        } else {
            let mut children = Vec::new();
            for part in rhs.split(',').map(str::trim).filter(|p| !p.is_empty()) {
                let child_label: u64 = part
                    .parse()
                    .map_err(|_| err(path, line, format!("bad child id `{part}`")))?;
                let child = loaded
                    .id(child_label)
                    .filter(|&id| id != 0)
                    .ok_or_else(|| err(path, line, format!("unknown child {child_label}")))?;
                if !loaded.tree.children(buyer).contains(&child) {
                    return Err(err(
                        path,
                        line,
                        format!("{child_label} is not a child of buyer {label}"),
                    ));
                }
                children.push(child);
            }
            Action::Report(children)
        };
        overrides.push((buyer, action));
    }
    let profile = ActionProfile::with_overrides(&loaded.tree, &overrides)
        .map_err(|e| err_file(path, e.to_string()))?;
    // Explicit reports for buyers the profile leaves uninformed contradict
    // the file; point at the offending line.
    for &(buyer, ref action) in &overrides {
        if !action.is_nil() && profile.action(buyer).is_nil() {
            return Err(err(
                path,
                line_of_buyer[&buyer],
                format!("buyer {} is not informed under this profile", loaded.label(buyer)),
            ));
        }
    }
    profile.participant_mask(&loaded.tree, validation).map_err(|e| match e {
        fpdm::Error::InfeasibleAction { buyer, reason } => {
            let message = format!("infeasible action for buyer {}: {reason}", loaded.label(buyer));
            match line_of_buyer.get(&buyer) {
                Some(&line) => err(path, line, message),
                None => err_file(path, message),
            }
        }
        other => err_file(path, other.to_string()),
    })?;
    Ok(profile)
}

pub fn print_actions(loaded: &LoadedTree, profile: &ActionProfile) -> String {
    let mut out = String::new();
    for buyer in 1..=loaded.tree.buyer_count() {
        match profile.action(buyer) {
            Action::Nil => out.push_str(&format!("{} -> nil\n", loaded.label(buyer))),
            Action::Report(children) => {
                let list: Vec<String> =
                    children.iter().map(|&c| loaded.label(c).to_string()).collect();
                out.push_str(&format!("{} -> {}\n", loaded.label(buyer), list.join(",")));
            }
        }
    }
    out
}
