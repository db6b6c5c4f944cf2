//! Dense-to-vanilla tree conversion, post-hoc pruning, DOT export, and JSON
//! model serialization with the embedded preprocessor state.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use ndarray::{ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::cart::CartNode;
use crate::data::Preprocessor;
use crate::ensemble::Ensemble;
use crate::error::{GradTreeError, Result};
use crate::tree::{entmax_row, softmax_row, DenseTree};

/// Classic recursive decision tree. Condition `x_feature >= threshold`
/// routes to the left child.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum VanillaNode {
    Internal {
        feature: usize,
        threshold: f64,
        name: String,
        left: Box<VanillaNode>,
        right: Box<VanillaNode>,
    },
    Leaf {
        probabilities: Vec<f64>,
        label: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VanillaTree {
    pub root: VanillaNode,
    pub n_features: usize,
    pub n_classes: usize,
}

impl VanillaNode {
    fn validate(&self, n: usize, c: usize) -> Result<()> {
        match self {
            VanillaNode::Leaf {
                probabilities,
                label,
            } => {
                if probabilities.len() != c || *label >= c {
                    return Err(GradTreeError::ModelLoad("leaf shape mismatch".into()));
                }
                if probabilities.iter().any(|p| !p.is_finite()) {
                    return Err(GradTreeError::ModelLoad("non-finite leaf probability".into()));
                }
                let sum: f64 = probabilities.iter().sum();
                if (sum - 1.0).abs() > 1e-9 {
                    return Err(GradTreeError::ModelLoad(format!(
                        "leaf probabilities sum to {sum}"
                    )));
                }
                Ok(())
            }
            VanillaNode::Internal {
                feature,
                threshold,
                left,
                right,
                ..
            } => {
                if *feature >= n || !threshold.is_finite() {
                    return Err(GradTreeError::ModelLoad("bad internal node".into()));
                }
                left.validate(n, c)?;
                right.validate(n, c)
            }
        }
    }

    pub fn n_internal(&self) -> usize {
        match self {
            VanillaNode::Leaf { .. } => 0,
            VanillaNode::Internal { left, right, .. } => {
                1 + left.n_internal() + right.n_internal()
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            VanillaNode::Leaf { .. } => 1,
            VanillaNode::Internal { left, right, .. } => left.n_leaves() + right.n_leaves(),
        }
    }
}

impl VanillaTree {
    pub fn validate(&self) -> Result<()> {
        if self.n_features == 0 || self.n_classes < 2 {
            return Err(GradTreeError::ModelLoad("bad vanilla tree dims".into()));
        }
        self.root.validate(self.n_features, self.n_classes)
    }

    pub fn predict_proba_row(&self, x: ArrayView1<f64>) -> &[f64] {
        let mut node = &self.root;
        loop {
            match node {
                VanillaNode::Leaf { probabilities, .. } => return probabilities,
                VanillaNode::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    node = if x[*feature] >= *threshold { left } else { right };
                }
            }
        }
    }

    pub fn predict_row(&self, x: ArrayView1<f64>) -> usize {
        let mut node = &self.root;
        loop {
            match node {
                VanillaNode::Leaf { label, .. } => return *label,
                VanillaNode::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    node = if x[*feature] >= *threshold { left } else { right };
                }
            }
        }
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Vec<usize> {
        (0..x.nrows()).map(|s| self.predict_row(x.row(s))).collect()
    }

    pub fn n_internal(&self) -> usize {
        self.root.n_internal()
    }
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0usize;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

fn feature_label(names: Option<&[String]>, i: usize) -> String {
    names
        .and_then(|n| n.get(i).cloned())
        .unwrap_or_else(|| format!("x{i}"))
}

/// Convert a dense tree to the equivalent vanilla tree: each internal node
/// takes the hardmax feature of its entmax row and that feature's threshold;
/// each leaf takes the softmax of its logits. Traversal reproduces the
/// hard-mode forward pass exactly.
pub fn to_vanilla(tree: &DenseTree, feature_names: Option<&[String]>) -> Result<VanillaTree> {
    tree.validate()?;
    fn build(
        tree: &DenseTree,
        names: Option<&[String]>,
        node: usize,
        depth: usize,
        leaf_lo: usize,
        leaf_hi: usize,
    ) -> VanillaNode {
        if depth == tree.depth {
            let probabilities = softmax_row(tree.leaf_logits.row(leaf_lo)).to_vec();
            let label = argmax(&probabilities);
            return VanillaNode::Leaf {
                probabilities,
                label,
            };
        }
        let sel = entmax_row(tree.index_logits.row(node).as_slice().unwrap());
        let feature = argmax(&sel);
        let threshold = tree.thresholds[[node, feature]];
        let mid = (leaf_lo + leaf_hi) / 2;
        VanillaNode::Internal {
            feature,
            threshold,
            name: feature_label(names, feature),
            left: Box::new(build(tree, names, 2 * node + 1, depth + 1, leaf_lo, mid)),
            right: Box::new(build(tree, names, 2 * node + 2, depth + 1, mid, leaf_hi)),
        }
    }
    let root = build(tree, feature_names, 0, 0, 0, tree.n_leaves());
    Ok(VanillaTree {
        root,
        n_features: tree.n_features,
        n_classes: tree.n_classes,
    })
}

/// Convert a greedily induced tree to the shared vanilla representation,
/// deriving leaf probabilities from the training class counts.
pub fn cart_to_vanilla(
    node: &CartNode,
    n_features: usize,
    n_classes: usize,
    feature_names: Option<&[String]>,
) -> Result<VanillaTree> {
    fn build(node: &CartNode, names: Option<&[String]>) -> Result<VanillaNode> {
        Ok(match node {
            CartNode::Leaf { label, counts } => {
                let total: usize = counts.iter().sum();
                if total == 0 {
                    return Err(GradTreeError::Argument("leaf with empty counts".into()));
                }
                VanillaNode::Leaf {
                    probabilities: counts.iter().map(|&k| k as f64 / total as f64).collect(),
                    label: *label,
                }
            }
            CartNode::Internal {
                feature,
                threshold,
                left,
                right,
            } => VanillaNode::Internal {
                feature: *feature,
                threshold: *threshold,
                name: feature_label(names, *feature),
                left: Box::new(build(left, names)?),
                right: Box::new(build(right, names)?),
            },
        })
    }
    let tree = VanillaTree {
        root: build(node, feature_names)?,
        n_features,
        n_classes,
    };
    tree.validate()?;
    Ok(tree)
}

/// Remove every subtree that receives zero training samples, splicing the
/// populated sibling into the parent's place. Training predictions are
/// unchanged by construction: each sample keeps following its original path.
pub fn prune(tree: &VanillaTree, x_train: ArrayView2<f64>) -> Result<VanillaTree> {
    if x_train.nrows() == 0 {
        return Err(GradTreeError::Argument("prune needs training rows".into()));
    }
    if x_train.ncols() != tree.n_features {
        return Err(GradTreeError::Argument(format!(
            "prune data has {} features, tree expects {}",
            x_train.ncols(),
            tree.n_features
        )));
    }
    fn walk(node: &VanillaNode, rows: Vec<usize>, x: ArrayView2<f64>) -> VanillaNode {
        match node {
            VanillaNode::Leaf { .. } => node.clone(),
            VanillaNode::Internal {
                feature,
                threshold,
                name,
                left,
                right,
            } => {
                let (l_rows, r_rows): (Vec<usize>, Vec<usize>) = rows
                    .into_iter()
                    .partition(|&s| x[[s, *feature]] >= *threshold);
                if l_rows.is_empty() {
                    return walk(right, r_rows, x);
                }
                if r_rows.is_empty() {
                    return walk(left, l_rows, x);
                }
                VanillaNode::Internal {
                    feature: *feature,
                    threshold: *threshold,
                    name: name.clone(),
                    left: Box::new(walk(left, l_rows, x)),
                    right: Box::new(walk(right, r_rows, x)),
                }
            }
        }
    }
    let rows: Vec<usize> = (0..x_train.nrows()).collect();
    Ok(VanillaTree {
        root: walk(&tree.root, rows, x_train),
        n_features: tree.n_features,
        n_classes: tree.n_classes,
    })
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Graphviz text for a vanilla tree: internal nodes labeled `name >= t`,
/// edges labeled True (left) / False (right), leaves labeled with class and
/// probability. `class_names` substitutes label indices when given.
pub fn export_dot(tree: &VanillaTree, class_names: Option<&[String]>) -> String {
    let mut out = String::from("digraph tree {\n  node [shape=box];\n");
    let mut next_id = 0usize;
    fn walk(
        node: &VanillaNode,
        out: &mut String,
        next_id: &mut usize,
        class_names: Option<&[String]>,
    ) -> usize {
        let id = *next_id;
        *next_id += 1;
        match node {
            VanillaNode::Leaf {
                probabilities,
                label,
            } => {
                let class = class_names
                    .and_then(|n| n.get(*label).cloned())
                    .unwrap_or_else(|| format!("class {label}"));
                let _ = writeln!(
                    out,
                    "  n{id} [label=\"{} (p={:.3})\"];",
                    dot_escape(&class),
                    probabilities[*label]
                );
            }
            VanillaNode::Internal {
                threshold,
                name,
                left,
                right,
                ..
            } => {
                let _ = writeln!(
                    out,
                    "  n{id} [label=\"{} >= {:.4}\"];",
                    dot_escape(name),
                    threshold
                );
                let l = walk(left, out, next_id, class_names);
                let _ = writeln!(out, "  n{id} -> n{l} [label=\"True\"];");
                let r = walk(right, out, next_id, class_names);
                let _ = writeln!(out, "  n{id} -> n{r} [label=\"False\"];");
            }
        }
        id
    }
    walk(&tree.root, &mut out, &mut next_id, class_names);
    out.push_str("}\n");
    out
}

const MODEL_FORMAT: &str = "gradtree-v1";

/// The model payload: a dense tree, a converted vanilla tree, or a full
/// ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    Dense { tree: DenseTree },
    Vanilla { tree: VanillaTree },
    Ensemble { ensemble: Ensemble },
}

/// On-disk model: format tag, payload, optional fitted preprocessor, and
/// free-form metadata (seeds, class names, training settings).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Model {
    pub format: String,
    #[serde(flatten)]
    pub kind: ModelKind,
    pub preprocessor: Option<Preprocessor>,
    pub metadata: BTreeMap<String, serde_json::Value>,
}

impl Model {
    pub fn new(kind: ModelKind) -> Self {
        Model {
            format: MODEL_FORMAT.to_string(),
            kind,
            preprocessor: None,
            metadata: BTreeMap::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.format != MODEL_FORMAT {
            return Err(GradTreeError::ModelLoad(format!(
                "unknown model format '{}', expected '{MODEL_FORMAT}'",
                self.format
            )));
        }
        match &self.kind {
            ModelKind::Dense { tree } => {
                tree.validate().map_err(|e| GradTreeError::ModelLoad(e.to_string()))
            }
            ModelKind::Vanilla { tree } => tree.validate(),
            ModelKind::Ensemble { ensemble } => ensemble
                .validate()
                .map_err(|e| GradTreeError::ModelLoad(e.to_string())),
        }
    }

    /// Pretty JSON with deterministic key order.
    pub fn to_json(&self) -> Result<String> {
        self.validate()?;
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

pub fn save_model(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, model.to_json()?)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Model> {
    let text = std::fs::read_to_string(path)?;
    let model: Model =
        serde_json::from_str(&text).map_err(|e| GradTreeError::ModelLoad(e.to_string()))?;
    model.validate()?;
    Ok(model)
}
