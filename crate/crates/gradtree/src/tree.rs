//! Dense decision-tree representation and the hard/soft forward pass.
//!
//! A tree of depth `d` over `n` features and `c` classes is parameterized by
//! three matrices: index logits `I` of shape `(2^d - 1) x n`, per-feature
//! thresholds `T` of the same shape, and leaf logits `L` of shape `2^d x c`.
//! Internal nodes are enumerated breadth-first; routing a sample is pure
//! index arithmetic over the leaf id, so a whole batch reduces to matrix
//! operations over `(batch x nodes)`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{GradTreeError, Result};

/// Differentiable split activation mapping R -> (0, 1), monotone, 0 -> 0.5.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitActivation {
    Sigmoid,
    Softsign,
    /// Two-class 1.5-entmax over `[z, 0]`.
    Entmoid,
}

impl SplitActivation {
    pub fn value(self, z: f64) -> f64 {
        match self {
            SplitActivation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            SplitActivation::Softsign => 0.5 * (z / (1.0 + z.abs()) + 1.0),
            SplitActivation::Entmoid => entmax_row(&[z, 0.0])[0],
        }
    }

    pub fn derivative(self, z: f64) -> f64 {
        match self {
            SplitActivation::Sigmoid => {
                let s = self.value(z);
                s * (1.0 - s)
            }
            SplitActivation::Softsign => {
                let a = 1.0 + z.abs();
                0.5 / (a * a)
            }
            SplitActivation::Entmoid => {
                // Jacobian-vector product of entmax([z, 0]) with tangent [1, 0].
                let p = entmax_row(&[z, 0.0]);
                let g0 = p[0].sqrt();
                let g1 = p[1].sqrt();
                if g0 == 0.0 || g1 == 0.0 {
                    0.0
                } else {
                    g0 * g1 / (g0 + g1)
                }
            }
        }
    }
}

impl std::str::FromStr for SplitActivation {
    type Err = GradTreeError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sigmoid" => Ok(SplitActivation::Sigmoid),
            "softsign" => Ok(SplitActivation::Softsign),
            "entmoid" => Ok(SplitActivation::Entmoid),
            other => Err(GradTreeError::Argument(format!(
                "unknown activation '{other}' (expected sigmoid|softsign|entmoid)"
            ))),
        }
    }
}

/// Forward-pass discretization mode.
///
/// `Hard` applies hardmax after entmax and rounds split outputs (the
/// straight-through forward); `Soft` omits both discretizations and exists
/// for gradient checking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ForwardMode {
    Hard,
    Soft,
}

/// Trainable dense tree parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseTree {
    pub depth: usize,
    pub n_features: usize,
    pub n_classes: usize,
    /// Index logits, `(2^d - 1) x n`.
    pub index_logits: Array2<f64>,
    /// Per-feature thresholds, `(2^d - 1) x n`.
    pub thresholds: Array2<f64>,
    /// Leaf logits, `2^d x c`.
    pub leaf_logits: Array2<f64>,
}

impl DenseTree {
    pub fn new(
        depth: usize,
        n_features: usize,
        n_classes: usize,
        index_logits: Array2<f64>,
        thresholds: Array2<f64>,
        leaf_logits: Array2<f64>,
    ) -> Result<Self> {
        if depth == 0 {
            return Err(GradTreeError::Argument("depth must be positive".into()));
        }
        if n_features == 0 {
            return Err(GradTreeError::Argument("n_features must be positive".into()));
        }
        if n_classes < 2 {
            return Err(GradTreeError::Argument("n_classes must be >= 2".into()));
        }
        let tree = DenseTree {
            depth,
            n_features,
            n_classes,
            index_logits,
            thresholds,
            leaf_logits,
        };
        tree.validate()?;
        Ok(tree)
    }

    /// All-zero parameters with the correct shapes.
    pub fn zeros(depth: usize, n_features: usize, n_classes: usize) -> Result<Self> {
        let internal = (1usize << depth) - 1;
        let leaves = 1usize << depth;
        DenseTree::new(
            depth,
            n_features,
            n_classes,
            Array2::zeros((internal, n_features)),
            Array2::zeros((internal, n_features)),
            Array2::zeros((leaves, n_classes)),
        )
    }

    pub fn n_internal(&self) -> usize {
        (1 << self.depth) - 1
    }

    pub fn n_leaves(&self) -> usize {
        1 << self.depth
    }

    pub fn validate(&self) -> Result<()> {
        let internal = self.n_internal();
        let leaves = self.n_leaves();
        if self.index_logits.dim() != (internal, self.n_features) {
            return Err(GradTreeError::Argument(format!(
                "index logits shape {:?}, expected ({internal}, {})",
                self.index_logits.dim(),
                self.n_features
            )));
        }
        if self.thresholds.dim() != (internal, self.n_features) {
            return Err(GradTreeError::Argument(format!(
                "threshold shape {:?}, expected ({internal}, {})",
                self.thresholds.dim(),
                self.n_features
            )));
        }
        if self.leaf_logits.dim() != (leaves, self.n_classes) {
            return Err(GradTreeError::Argument(format!(
                "leaf logits shape {:?}, expected ({leaves}, {})",
                self.leaf_logits.dim(),
                self.n_classes
            )));
        }
        let finite = self.index_logits.iter().all(|v| v.is_finite())
            && self.thresholds.iter().all(|v| v.is_finite())
            && self.leaf_logits.iter().all(|v| v.is_finite());
        if !finite {
            return Err(GradTreeError::Numeric("non-finite tree parameter".into()));
        }
        Ok(())
    }
}

/// Index of the internal node preceding leaf `l` at depth level `j`,
/// for internal nodes enumerated breadth-first.
pub fn internal_index(l: usize, j: usize, d: usize) -> Result<usize> {
    if d == 0 || l >= (1 << d) || j >= d {
        return Err(GradTreeError::Argument(format!(
            "internal_index out of range: l={l}, j={j}, d={d}"
        )));
    }
    Ok((1 << j) + l / (1 << (d - j)) - 1)
}

/// Branch taken at depth level `j` on the path to leaf `l`:
/// 0 = left (split condition true), 1 = right.
pub fn path_side(l: usize, j: usize, d: usize) -> Result<u8> {
    if d == 0 || l >= (1 << d) || j >= d {
        return Err(GradTreeError::Argument(format!(
            "path_side out of range: l={l}, j={j}, d={d}"
        )));
    }
    Ok(((l / (1 << (d - (j + 1)))) % 2) as u8)
}

/// Soft split value `act(i . x - i . t)` in (0, 1).
pub fn split_soft(
    x: ArrayView1<f64>,
    i_row: ArrayView1<f64>,
    t_row: ArrayView1<f64>,
    act: SplitActivation,
) -> Result<f64> {
    if x.len() != i_row.len() || x.len() != t_row.len() {
        return Err(GradTreeError::Argument(format!(
            "split_soft shape mismatch: x={}, i={}, t={}",
            x.len(),
            i_row.len(),
            t_row.len()
        )));
    }
    let pre: f64 = x
        .iter()
        .zip(i_row.iter())
        .zip(t_row.iter())
        .map(|((&xi, &ii), &ti)| ii * (xi - ti))
        .sum();
    Ok(act.value(pre))
}

/// Round a soft split to a hard decision; exactly 0.5 rounds to 1
/// so the composition with a one-hot selector realizes `x >= t`.
pub fn split_hard(value: f64) -> f64 {
    if value >= 0.5 {
        1.0
    } else {
        0.0
    }
}

/// 1.5-entmax of a logit vector, computed by bisection on the threshold
/// equation. Output is a probability vector that may contain exact zeros.
pub fn entmax_row(z: &[f64]) -> Vec<f64> {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    // entmax15(z)_i = max(0, z_i/2 - tau)^2 with tau such that the sum is 1.
    let half: Vec<f64> = z.iter().map(|&v| v / 2.0 - max / 2.0).collect();
    let mass = |tau: f64| -> f64 {
        half.iter()
            .map(|&h| {
                let t = (h - tau).max(0.0);
                t * t
            })
            .sum()
    };
    let mut lo = -1.0; // mass(lo) >= 1 since the max term alone is 1
    let mut hi = 0.0; // mass(hi) = 0
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if mass(mid) >= 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    let tau = 0.5 * (lo + hi);
    let mut out: Vec<f64> = half
        .iter()
        .map(|&h| {
            let t = (h - tau).max(0.0);
            t * t
        })
        .collect();
    let sum: f64 = out.iter().sum();
    if sum > 0.0 {
        for v in &mut out {
            *v /= sum;
        }
    }
    out
}

/// One-hot vector at the arg-max; ties break toward the lowest index.
pub fn hardmax_st(p: &[f64]) -> Vec<f64> {
    let mut best = 0usize;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    let mut out = vec![0.0; p.len()];
    out[best] = 1.0;
    out
}

pub fn softmax_row(z: ArrayView1<f64>) -> Array1<f64> {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Array1<f64> = z.map(|&v| (v - max).exp());
    let sum = out.sum();
    out.mapv_inplace(|v| v / sum);
    out
}

/// Cached per-sample, per-node forward quantities used by the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub mode: ForwardMode,
    pub activation: SplitActivation,
    /// Entmax of each node's index-logit row, `nodes x n`.
    pub entmax_rows: Array2<f64>,
    /// Selector actually used in the forward pass (one-hot in Hard mode).
    pub selectors: Array2<f64>,
    /// Pre-activation `sel . x - sel . t`, `batch x nodes`.
    pub pre_activations: Array2<f64>,
    /// `act(pre)`, `batch x nodes`.
    pub soft_splits: Array2<f64>,
    /// Split values used downstream (rounded in Hard mode), `batch x nodes`.
    pub splits: Array2<f64>,
    /// Per-leaf indicator products, `batch x leaves`.
    pub indicators: Array2<f64>,
    /// Accumulated leaf-logit sums (pre-softmax), `batch x c`.
    pub logit_sums: Array2<f64>,
    /// Softmax output, `batch x c`.
    pub probabilities: Array2<f64>,
}

/// Batched tree pass: per-node selector via entmax (+ hardmax in Hard mode),
/// split values via the activation (+ rounding in Hard mode), per-leaf
/// indicator products, and the softmax over accumulated leaf logits.
pub fn tree_forward(
    tree: &DenseTree,
    x: ArrayView2<f64>,
    act: SplitActivation,
    mode: ForwardMode,
) -> Result<(Array2<f64>, ForwardTrace)> {
    tree.validate()?;
    if x.ncols() != tree.n_features {
        return Err(GradTreeError::Argument(format!(
            "input has {} columns, tree expects {}",
            x.ncols(),
            tree.n_features
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(GradTreeError::Numeric("non-finite input feature".into()));
    }
    let batch = x.nrows();
    let nodes = tree.n_internal();
    let leaves = tree.n_leaves();
    let d = tree.depth;
    let n = tree.n_features;
    let c = tree.n_classes;

    let mut entmax_rows = Array2::zeros((nodes, n));
    let mut selectors = Array2::zeros((nodes, n));
    for v in 0..nodes {
        let row: Vec<f64> = tree.index_logits.row(v).to_vec();
        let p = entmax_row(&row);
        let sel = match mode {
            ForwardMode::Hard => hardmax_st(&p),
            ForwardMode::Soft => p.clone(),
        };
        for i in 0..n {
            entmax_rows[[v, i]] = p[i];
            selectors[[v, i]] = sel[i];
        }
    }

    let mut pre_activations = Array2::zeros((batch, nodes));
    let mut soft_splits = Array2::zeros((batch, nodes));
    let mut splits = Array2::zeros((batch, nodes));
    for s in 0..batch {
        for v in 0..nodes {
            let mut a = 0.0;
            for i in 0..n {
                a += selectors[[v, i]] * (x[[s, i]] - tree.thresholds[[v, i]]);
            }
            let soft = act.value(a);
            pre_activations[[s, v]] = a;
            soft_splits[[s, v]] = soft;
            splits[[s, v]] = match mode {
                ForwardMode::Hard => split_hard(soft),
                ForwardMode::Soft => soft,
            };
        }
    }

    let mut indicators = Array2::zeros((batch, leaves));
    let mut logit_sums = Array2::zeros((batch, c));
    for s in 0..batch {
        for l in 0..leaves {
            let mut p = 1.0;
            for j in 0..d {
                let v = internal_index(l, j, d)?;
                let side = path_side(l, j, d)? as f64;
                let sv = splits[[s, v]];
                p *= (1.0 - side) * sv + side * (1.0 - sv);
            }
            indicators[[s, l]] = p;
            for k in 0..c {
                logit_sums[[s, k]] += tree.leaf_logits[[l, k]] * p;
            }
        }
    }

    let mut probabilities = Array2::zeros((batch, c));
    for s in 0..batch {
        let sm = softmax_row(logit_sums.row(s));
        probabilities.row_mut(s).assign(&sm);
    }

    let trace = ForwardTrace {
        mode,
        activation: act,
        entmax_rows,
        selectors,
        pre_activations,
        soft_splits,
        splits,
        indicators,
        logit_sums,
        probabilities: probabilities.clone(),
    };
    Ok((probabilities, trace))
}

/// Index of the unique leaf a sample reaches under hard-mode semantics.
pub fn leaf_assignment(tree: &DenseTree, x: ArrayView1<f64>) -> Result<usize> {
    if x.len() != tree.n_features {
        return Err(GradTreeError::Argument(format!(
            "input has {} features, tree expects {}",
            x.len(),
            tree.n_features
        )));
    }
    let d = tree.depth;
    let mut leaf = 0usize;
    for j in 0..d {
        let v = internal_index(leaf << (d - j), j, d)?;
        let row: Vec<f64> = tree.index_logits.row(v).to_vec();
        let sel = hardmax_st(&entmax_row(&row));
        let feat = sel.iter().position(|&s| s == 1.0).unwrap();
        let cond = x[feat] >= tree.thresholds[[v, feat]];
        // condition true => left => path bit 0
        leaf = (leaf << 1) | usize::from(!cond);
    }
    Ok(leaf)
}
