//! Greedy CART induction over numeric matrices with Gini and entropy
//! criteria. Split semantics match the rest of the crate: `x_i >= t` routes
//! to the left child.

use ndarray::{ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{GradTreeError, Result};

/// Node-purity criterion for split selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Gini,
    Entropy,
}

impl std::str::FromStr for Criterion {
    type Err = GradTreeError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gini" => Ok(Criterion::Gini),
            "entropy" => Ok(Criterion::Entropy),
            other => Err(GradTreeError::Argument(format!(
                "unknown criterion '{other}' (expected gini|entropy)"
            ))),
        }
    }
}

/// Greedily induced tree node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CartNode {
    Internal {
        feature: usize,
        threshold: f64,
        left: Box<CartNode>,
        right: Box<CartNode>,
    },
    Leaf {
        label: usize,
        counts: Vec<usize>,
    },
}

impl CartNode {
    pub fn predict_row(&self, x: ArrayView1<f64>) -> usize {
        match self {
            CartNode::Leaf { label, .. } => *label,
            CartNode::Internal {
                feature,
                threshold,
                left,
                right,
            } => {
                if x[*feature] >= *threshold {
                    left.predict_row(x)
                } else {
                    right.predict_row(x)
                }
            }
        }
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Vec<usize> {
        (0..x.nrows()).map(|s| self.predict_row(x.row(s))).collect()
    }

    pub fn n_internal(&self) -> usize {
        match self {
            CartNode::Leaf { .. } => 0,
            CartNode::Internal { left, right, .. } => 1 + left.n_internal() + right.n_internal(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            CartNode::Leaf { .. } => 0,
            CartNode::Internal { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

fn check_counts(counts: &[usize]) -> Result<usize> {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(GradTreeError::Argument("empty node".into()));
    }
    Ok(total)
}

/// `1 - sum_c p_c^2` over the class-count vector.
pub fn gini_impurity(counts: &[usize]) -> Result<f64> {
    let total = check_counts(counts)? as f64;
    Ok(1.0 - counts.iter().map(|&k| (k as f64 / total).powi(2)).sum::<f64>())
}

/// Shannon entropy in bits, `-sum_c p_c log2 p_c`.
pub fn entropy(counts: &[usize]) -> Result<f64> {
    let total = check_counts(counts)? as f64;
    Ok(counts
        .iter()
        .filter(|&&k| k > 0)
        .map(|&k| {
            let p = k as f64 / total;
            -p * p.log2()
        })
        .sum())
}

fn child_consistency(parent: &[usize], left: &[usize], right: &[usize]) -> Result<()> {
    if parent.len() != left.len() || parent.len() != right.len() {
        return Err(GradTreeError::Argument("count vector lengths differ".into()));
    }
    for c in 0..parent.len() {
        if left[c] + right[c] != parent[c] {
            return Err(GradTreeError::Argument(
                "child counts do not sum to parent counts".into(),
            ));
        }
    }
    Ok(())
}

/// Decrease in Gini impurity: `I(parent) - m_L/m I(left) - m_R/m I(right)`.
/// An empty child contributes zero impurity.
pub fn gini_decrease(parent: &[usize], left: &[usize], right: &[usize]) -> Result<f64> {
    child_consistency(parent, left, right)?;
    weighted_gain(parent, left, right, gini_impurity)
}

/// Information gain with the entropy criterion, in bits.
pub fn entropy_gain(parent: &[usize], left: &[usize], right: &[usize]) -> Result<f64> {
    child_consistency(parent, left, right)?;
    weighted_gain(parent, left, right, entropy)
}

fn weighted_gain(
    parent: &[usize],
    left: &[usize],
    right: &[usize],
    impurity: fn(&[usize]) -> Result<f64>,
) -> Result<f64> {
    let m = check_counts(parent)? as f64;
    let ml: usize = left.iter().sum();
    let mr: usize = right.iter().sum();
    let il = if ml > 0 { impurity(left)? } else { 0.0 };
    let ir = if mr > 0 { impurity(right)? } else { 0.0 };
    Ok(impurity(parent)? - (ml as f64 / m) * il - (mr as f64 / m) * ir)
}

fn class_counts(y: &[usize], idx: &[usize], c: usize) -> Vec<usize> {
    let mut counts = vec![0usize; c];
    for &s in idx {
        counts[y[s]] += 1;
    }
    counts
}

/// Impurity gain of splitting rows `idx` on `x_feature >= threshold`.
pub fn evaluate_split(
    x: ArrayView2<f64>,
    y: &[usize],
    idx: &[usize],
    feature: usize,
    threshold: f64,
    criterion: Criterion,
    n_classes: usize,
) -> Result<f64> {
    let parent = class_counts(y, idx, n_classes);
    let mut left = vec![0usize; n_classes];
    let mut right = vec![0usize; n_classes];
    for &s in idx {
        if x[[s, feature]] >= threshold {
            left[y[s]] += 1;
        } else {
            right[y[s]] += 1;
        }
    }
    match criterion {
        Criterion::Gini => gini_decrease(&parent, &left, &right),
        Criterion::Entropy => entropy_gain(&parent, &left, &right),
    }
}

/// Candidate thresholds for one feature over the given rows: midpoints of
/// consecutive distinct sorted values.
pub fn candidate_thresholds(x: ArrayView2<f64>, idx: &[usize], feature: usize) -> Vec<f64> {
    let mut vals: Vec<f64> = idx.iter().map(|&s| x[[s, feature]]).collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    vals.dedup();
    vals.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
}

fn best_split(
    x: ArrayView2<f64>,
    y: &[usize],
    idx: &[usize],
    criterion: Criterion,
    n_classes: usize,
) -> Result<Option<(usize, f64, f64)>> {
    let mut best: Option<(usize, f64, f64)> = None;
    for feature in 0..x.ncols() {
        for threshold in candidate_thresholds(x, idx, feature) {
            let gain = evaluate_split(x, y, idx, feature, threshold, criterion, n_classes)?;
            // ties broken by lower feature index, then lower threshold,
            // which the enumeration order already guarantees
            let better = match best {
                None => gain > 0.0,
                Some((_, _, bg)) => gain > bg,
            };
            if better {
                best = Some((feature, threshold, gain));
            }
        }
    }
    Ok(best)
}

fn majority_label(counts: &[usize]) -> usize {
    let mut best = 0usize;
    for (c, &k) in counts.iter().enumerate() {
        if k > counts[best] {
            best = c;
        }
    }
    best
}

fn fit_node(
    x: ArrayView2<f64>,
    y: &[usize],
    idx: &[usize],
    depth_left: usize,
    criterion: Criterion,
    min_samples: usize,
    n_classes: usize,
) -> Result<CartNode> {
    let counts = class_counts(y, idx, n_classes);
    let leaf = |counts: Vec<usize>| CartNode::Leaf {
        label: majority_label(&counts),
        counts,
    };
    let pure = counts.iter().filter(|&&k| k > 0).count() <= 1;
    if pure || depth_left == 0 || idx.len() < min_samples.max(2) {
        return Ok(leaf(counts));
    }
    let Some((feature, threshold, _)) = best_split(x, y, idx, criterion, n_classes)? else {
        return Ok(leaf(counts));
    };
    let (li, ri): (Vec<usize>, Vec<usize>) =
        idx.iter().copied().partition(|&s| x[[s, feature]] >= threshold);
    if li.is_empty() || ri.is_empty() {
        return Ok(leaf(counts));
    }
    Ok(CartNode::Internal {
        feature,
        threshold,
        left: Box::new(fit_node(x, y, &li, depth_left - 1, criterion, min_samples, n_classes)?),
        right: Box::new(fit_node(x, y, &ri, depth_left - 1, criterion, min_samples, n_classes)?),
    })
}

/// Recursive best-first CART induction. Stops on purity, depth, node size
/// below `min_samples`, or the absence of any positive-gain split.
pub fn cart_fit(
    x: ArrayView2<f64>,
    y: &[usize],
    n_classes: usize,
    max_depth: usize,
    criterion: Criterion,
    min_samples: usize,
) -> Result<CartNode> {
    let m = x.nrows();
    if m == 0 {
        return Err(GradTreeError::Argument("empty dataset".into()));
    }
    if y.len() != m {
        return Err(GradTreeError::Argument(format!(
            "{m} rows with {} labels",
            y.len()
        )));
    }
    if let Some(&bad) = y.iter().find(|&&l| l >= n_classes) {
        return Err(GradTreeError::Argument(format!(
            "label {bad} out of range for {n_classes} classes"
        )));
    }
    let idx: Vec<usize> = (0..m).collect();
    fit_node(x, y, &idx, max_depth, criterion, min_samples, n_classes)
}
