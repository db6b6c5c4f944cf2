//! Reverse-mode gradients through the hard forward pass.
//!
//! The computation graph per (depth, features, classes) is static, so the
//! backward pass is hand-derived rather than taped. Discrete operations use
//! straight-through semantics: the rounding step and the hardmax step both
//! have identity Jacobians, with gradients flowing through the activation
//! derivative at the cached pre-activation and through the entmax Jacobian
//! respectively. Everything else (products, sums, dot products) uses exact
//! derivatives evaluated at the forward values actually used.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{GradTreeError, Result};
use crate::tree::{internal_index, path_side, DenseTree, ForwardTrace};

/// Minibatch-accumulated gradients mirroring the tree parameter shapes.
#[derive(Debug, Clone)]
pub struct TreeGradients {
    pub d_index: Array2<f64>,
    pub d_thresholds: Array2<f64>,
    pub d_leaf: Array2<f64>,
}

impl TreeGradients {
    pub fn zeros(tree: &DenseTree) -> Self {
        TreeGradients {
            d_index: Array2::zeros(tree.index_logits.dim()),
            d_thresholds: Array2::zeros(tree.thresholds.dim()),
            d_leaf: Array2::zeros(tree.leaf_logits.dim()),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.d_index.iter().all(|v| v.is_finite())
            && self.d_thresholds.iter().all(|v| v.is_finite())
            && self.d_leaf.iter().all(|v| v.is_finite())
    }
}

/// Exact Jacobian-vector product of 1.5-entmax at output `p`, applied to `v`.
/// Zero off the support; on the support with `g = sqrt(p)`:
/// `(J v)_i = g_i * (v_i - (sum v g) / (sum g))`.
pub fn entmax_jacobian_vector_product(p: ArrayView1<f64>, v: ArrayView1<f64>) -> Array1<f64> {
    let g: Vec<f64> = p.iter().map(|&pi| if pi > 0.0 { pi.sqrt() } else { 0.0 }).collect();
    let num: f64 = v.iter().zip(g.iter()).map(|(&vi, &gi)| vi * gi).sum();
    let den: f64 = g.iter().sum();
    let q = if den > 0.0 { num / den } else { 0.0 };
    Array1::from_iter(
        v.iter()
            .zip(g.iter())
            .map(|(&vi, &gi)| if gi > 0.0 { gi * (vi - q) } else { 0.0 }),
    )
}

/// Pull a gradient w.r.t. softmax outputs back to the pre-softmax logits.
pub fn softmax_backward(probs: ArrayView1<f64>, grad_probs: ArrayView1<f64>) -> Array1<f64> {
    let dot: f64 = probs.iter().zip(grad_probs.iter()).map(|(&p, &g)| p * g).sum();
    Array1::from_iter(
        probs
            .iter()
            .zip(grad_probs.iter())
            .map(|(&p, &g)| p * (g - dot)),
    )
}

/// Gradients of the loss w.r.t. I, T, L given the upstream gradient w.r.t.
/// the pre-softmax leaf-logit sums (`batch x c`).
pub fn backward(
    tree: &DenseTree,
    trace: &ForwardTrace,
    grad_logits: ArrayView2<f64>,
    x: ArrayView2<f64>,
) -> Result<TreeGradients> {
    backward_with_indicator_grad(tree, trace, grad_logits, None, x)
}

/// As [`backward`], with an optional extra upstream gradient on the per-leaf
/// indicators (`batch x leaves`). The ensemble weight path feeds in here.
pub fn backward_with_indicator_grad(
    tree: &DenseTree,
    trace: &ForwardTrace,
    grad_logits: ArrayView2<f64>,
    grad_indicators: Option<ArrayView2<f64>>,
    x: ArrayView2<f64>,
) -> Result<TreeGradients> {
    let batch = trace.indicators.nrows();
    let nodes = tree.n_internal();
    let leaves = tree.n_leaves();
    let d = tree.depth;
    let n = tree.n_features;
    let c = tree.n_classes;
    if grad_logits.dim() != (batch, c) {
        return Err(GradTreeError::Argument(format!(
            "upstream gradient shape {:?} does not match trace batch ({batch}, {c})",
            grad_logits.dim()
        )));
    }
    if trace.indicators.ncols() != leaves || trace.selectors.dim() != (nodes, n) {
        return Err(GradTreeError::Argument(
            "trace does not match tree dimensions".into(),
        ));
    }
    if let Some(gi) = grad_indicators {
        if gi.dim() != (batch, leaves) {
            return Err(GradTreeError::Argument(format!(
                "indicator gradient shape {:?}, expected ({batch}, {leaves})",
                gi.dim()
            )));
        }
    }
    if x.dim() != (batch, n) {
        return Err(GradTreeError::Argument(format!(
            "input shape {:?} does not match trace ({batch}, {n})",
            x.dim()
        )));
    }

    let mut grads = TreeGradients::zeros(tree);
    // gradient w.r.t. the selector rows, accumulated over the batch
    let mut d_selectors = Array2::<f64>::zeros((nodes, n));
    let mut terms = vec![0.0; d];

    for s in 0..batch {
        // dL[l, k] += ind[s, l] * dyhat[s, k];  dind[l] = L[l] . dyhat[s]
        let dyhat = grad_logits.row(s);
        let mut d_splits = vec![0.0; nodes];
        for l in 0..leaves {
            let ind = trace.indicators[[s, l]];
            let mut d_ind = 0.0;
            for k in 0..c {
                grads.d_leaf[[l, k]] += ind * dyhat[k];
                d_ind += tree.leaf_logits[[l, k]] * dyhat[k];
            }
            if let Some(gi) = grad_indicators {
                d_ind += gi[[s, l]];
            }
            if d_ind == 0.0 {
                continue;
            }
            // product rule over the d path terms
            for (j, term) in terms.iter_mut().enumerate() {
                let v = internal_index(l, j, d)?;
                let side = path_side(l, j, d)? as f64;
                let sv = trace.splits[[s, v]];
                *term = (1.0 - side) * sv + side * (1.0 - sv);
            }
            for j in 0..d {
                let v = internal_index(l, j, d)?;
                let side = path_side(l, j, d)? as f64;
                let mut rest = 1.0;
                for (jj, &t) in terms.iter().enumerate() {
                    if jj != j {
                        rest *= t;
                    }
                }
                // d term / d split = 1 - 2 * side
                d_splits[v] += d_ind * rest * (1.0 - 2.0 * side);
            }
        }

        // splits -> pre-activation (rounding is identity under ST) -> T, selector
        for v in 0..nodes {
            let ds = d_splits[v];
            if ds == 0.0 {
                continue;
            }
            let da = ds * trace.activation.derivative(trace.pre_activations[[s, v]]);
            for i in 0..n {
                let sel = trace.selectors[[v, i]];
                grads.d_thresholds[[v, i]] -= da * sel;
                d_selectors[[v, i]] += da * (x[[s, i]] - tree.thresholds[[v, i]]);
            }
        }
    }

    // selector -> index logits: hardmax is identity under ST, entmax is exact
    for v in 0..nodes {
        let di = entmax_jacobian_vector_product(trace.entmax_rows.row(v), d_selectors.row(v));
        grads.d_index.row_mut(v).assign(&di);
    }

    if !grads.is_finite() {
        return Err(GradTreeError::Numeric("non-finite gradient".into()));
    }
    Ok(grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::{cross_entropy_loss, LossConfig};
    use crate::tree::{tree_forward, DenseTree, ForwardMode, SplitActivation};
    use ndarray::{array, Array2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tree(rng: &mut ChaCha8Rng, d: usize, n: usize, c: usize) -> DenseTree {
        let mut tree = DenseTree::zeros(d, n, c).unwrap();
        tree.index_logits.mapv_inplace(|_| rng.gen_range(-1.5..1.5));
        tree.thresholds.mapv_inplace(|_| rng.gen_range(-1.0..1.0));
        tree.leaf_logits.mapv_inplace(|_| rng.gen_range(-1.0..1.0));
        tree
    }

    fn loss_of(tree: &DenseTree, x: &Array2<f64>, y: &[usize], mode: ForwardMode) -> f64 {
        let (probs, _) = tree_forward(tree, x.view(), SplitActivation::Sigmoid, mode).unwrap();
        let cfg = LossConfig::default();
        cross_entropy_loss(probs.view(), y, &cfg).unwrap().0
    }

    fn analytic_grads(
        tree: &DenseTree,
        x: &Array2<f64>,
        y: &[usize],
        mode: ForwardMode,
    ) -> TreeGradients {
        let (probs, trace) = tree_forward(tree, x.view(), SplitActivation::Sigmoid, mode).unwrap();
        let cfg = LossConfig::default();
        let (_, grad_logits) = cross_entropy_loss(probs.view(), y, &cfg).unwrap();
        backward(tree, &trace, grad_logits.view(), x.view()).unwrap()
    }

    /// Central finite differences of the full soft-mode loss.
    fn fd_check(tree: &DenseTree, x: &Array2<f64>, y: &[usize]) -> f64 {
        let h = 1e-5;
        let grads = analytic_grads(tree, x, y, ForwardMode::Soft);
        let mut max_rel = 0.0f64;
        let mut check = |analytic: f64, plus: f64, minus: f64| {
            let fd = (plus - minus) / (2.0 * h);
            let denom = analytic.abs().max(fd.abs()).max(1e-8);
            max_rel = max_rel.max((analytic - fd).abs() / denom);
        };
        for v in 0..tree.n_internal() {
            for i in 0..tree.n_features {
                let mut tp = tree.clone();
                tp.index_logits[[v, i]] += h;
                let mut tm = tree.clone();
                tm.index_logits[[v, i]] -= h;
                check(
                    grads.d_index[[v, i]],
                    loss_of(&tp, x, y, ForwardMode::Soft),
                    loss_of(&tm, x, y, ForwardMode::Soft),
                );
                let mut tp = tree.clone();
                tp.thresholds[[v, i]] += h;
                let mut tm = tree.clone();
                tm.thresholds[[v, i]] -= h;
                check(
                    grads.d_thresholds[[v, i]],
                    loss_of(&tp, x, y, ForwardMode::Soft),
                    loss_of(&tm, x, y, ForwardMode::Soft),
                );
            }
        }
        for l in 0..tree.n_leaves() {
            for k in 0..tree.n_classes {
                let mut tp = tree.clone();
                tp.leaf_logits[[l, k]] += h;
                let mut tm = tree.clone();
                tm.leaf_logits[[l, k]] -= h;
                check(
                    grads.d_leaf[[l, k]],
                    loss_of(&tp, x, y, ForwardMode::Soft),
                    loss_of(&tm, x, y, ForwardMode::Soft),
                );
            }
        }
        max_rel
    }

    #[test]
    fn soft_mode_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for round in 0..10 {
            let d = rng.gen_range(1..=3);
            let n = rng.gen_range(1..=5);
            let c = rng.gen_range(2..=3);
            let tree = random_tree(&mut rng, d, n, c);
            let batch = rng.gen_range(1..=8);
            let x = Array2::from_shape_fn((batch, n), |_| rng.gen_range(-2.0..2.0));
            let y: Vec<usize> = (0..batch).map(|_| rng.gen_range(0..c)).collect();
            let max_rel = fd_check(&tree, &x, &y);
            assert!(max_rel < 1e-4, "round {round}: max rel err {max_rel}");
        }
    }

    #[test]
    fn hard_mode_unselected_leaf_gradients_are_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let tree = random_tree(&mut rng, 3, 4, 2);
        let x = Array2::from_shape_fn((4, 4), |_| rng.gen_range(-2.0..2.0));
        let y = vec![0, 1, 0, 1];
        let (probs, trace) =
            tree_forward(&tree, x.view(), SplitActivation::Sigmoid, ForwardMode::Hard).unwrap();
        let cfg = LossConfig::default();
        let (_, gl) = cross_entropy_loss(probs.view(), &y, &cfg).unwrap();
        let grads = backward(&tree, &trace, gl.view(), x.view()).unwrap();
        for l in 0..tree.n_leaves() {
            let touched = (0..4).any(|s| trace.indicators[[s, l]] != 0.0);
            if !touched {
                assert!(grads.d_leaf.row(l).iter().all(|&g| g == 0.0), "leaf {l}");
            }
        }
    }

    #[test]
    fn hard_mode_single_sample_leaf_gradient_is_softmax_ce() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let tree = random_tree(&mut rng, 2, 3, 3);
        let x = Array2::from_shape_fn((1, 3), |_| rng.gen_range(-2.0..2.0));
        let y = vec![2usize];
        let (probs, trace) =
            tree_forward(&tree, x.view(), SplitActivation::Sigmoid, ForwardMode::Hard).unwrap();
        let cfg = LossConfig::default();
        let (_, gl) = cross_entropy_loss(probs.view(), &y, &cfg).unwrap();
        let grads = backward(&tree, &trace, gl.view(), x.view()).unwrap();
        let leaf = (0..tree.n_leaves())
            .find(|&l| trace.indicators[[0, l]] == 1.0)
            .unwrap();
        for k in 0..3 {
            let expected = probs[[0, k]] - if k == 2 { 1.0 } else { 0.0 };
            assert!((grads.d_leaf[[leaf, k]] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn entmax_jvp_properties() {
        // saturated output has zero sensitivity
        let p = array![1.0, 0.0, 0.0];
        let v = array![0.7, -0.3, 0.1];
        let out = entmax_jacobian_vector_product(p.view(), v.view());
        assert!(out.iter().all(|&o| o == 0.0));

        // uniform over 2, antisymmetric upstream -> nonzero antisymmetric output
        let p = array![0.5, 0.5];
        let v = array![1.0, -1.0];
        let out = entmax_jacobian_vector_product(p.view(), v.view());
        assert!(out[0] > 0.0);
        assert!((out[0] + out[1]).abs() < 1e-12);

        // constant upstream annihilates on the support
        let p = ndarray::Array1::from(crate::tree::entmax_row(&[0.4, 0.1, -2.0]));
        let v = array![3.0, 3.0, 3.0];
        let out = entmax_jacobian_vector_product(p.view(), v.view());
        assert!(out.iter().sum::<f64>().abs() < 1e-9);
    }

    #[test]
    fn entmax_jvp_matches_finite_differences() {
        let z = [0.6, -0.2, 0.1, -1.0];
        let p = ndarray::Array1::from(crate::tree::entmax_row(&z));
        let h = 1e-6;
        for i in 0..z.len() {
            // column i of the Jacobian by forward finite differences
            let mut zp = z;
            zp[i] += h;
            let mut zm = z;
            zm[i] -= h;
            let pp = crate::tree::entmax_row(&zp);
            let pm = crate::tree::entmax_row(&zm);
            let mut e = ndarray::Array1::zeros(z.len());
            e[i] = 1.0;
            let jvp = entmax_jacobian_vector_product(p.view(), e.view());
            for k in 0..z.len() {
                let fd = (pp[k] - pm[k]) / (2.0 * h);
                assert!((jvp[k] - fd).abs() < 1e-5, "i={i} k={k} jvp={} fd={fd}", jvp[k]);
            }
        }
    }

    #[test]
    fn batch_gradient_is_sum_of_per_sample_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let tree = random_tree(&mut rng, 2, 3, 2);
        let x = Array2::from_shape_fn((6, 3), |_| rng.gen_range(-2.0..2.0));
        let (probs, trace) =
            tree_forward(&tree, x.view(), SplitActivation::Sigmoid, ForwardMode::Hard).unwrap();
        // arbitrary upstream gradient, unscaled so the sum decomposes exactly
        let grad = Array2::from_shape_fn((6, 2), |_| rng.gen_range(-1.0..1.0));
        let full = backward(&tree, &trace, grad.view(), x.view()).unwrap();
        let mut acc = TreeGradients::zeros(&tree);
        for s in 0..6 {
            let xs = x.row(s).insert_axis(ndarray::Axis(0)).to_owned();
            let (_, ts) =
                tree_forward(&tree, xs.view(), SplitActivation::Sigmoid, ForwardMode::Hard)
                    .unwrap();
            let gs = grad.row(s).insert_axis(ndarray::Axis(0)).to_owned();
            let g = backward(&tree, &ts, gs.view(), xs.view()).unwrap();
            acc.d_index += &g.d_index;
            acc.d_thresholds += &g.d_thresholds;
            acc.d_leaf += &g.d_leaf;
        }
        let _ = probs;
        for (a, b) in full.d_index.iter().zip(acc.d_index.iter()) {
            assert!((a - b).abs() < 1e-10);
        }
        for (a, b) in full.d_thresholds.iter().zip(acc.d_thresholds.iter()) {
            assert!((a - b).abs() < 1e-10);
        }
        for (a, b) in full.d_leaf.iter().zip(acc.d_leaf.iter()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_upstream_gradient_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let tree = random_tree(&mut rng, 2, 3, 2);
        let x = Array2::from_shape_fn((3, 3), |_| rng.gen_range(-2.0..2.0));
        let (_, trace) =
            tree_forward(&tree, x.view(), SplitActivation::Sigmoid, ForwardMode::Hard).unwrap();
        let zero = Array2::zeros((3, 2));
        let grads = backward(&tree, &trace, zero.view(), x.view()).unwrap();
        assert!(grads.d_index.iter().all(|&g| g == 0.0));
        assert!(grads.d_thresholds.iter().all(|&g| g == 0.0));
        assert!(grads.d_leaf.iter().all(|&g| g == 0.0));
    }

    /// Independently written recursive-traversal backward for d <= 2,
    /// following the tree structure instead of the leaf-product formula.
    fn recursive_backward(
        tree: &DenseTree,
        trace: &ForwardTrace,
        grad_logits: ArrayView2<f64>,
        x: ArrayView2<f64>,
    ) -> TreeGradients {
        let mut grads = TreeGradients::zeros(tree);
        let mut d_sel = Array2::<f64>::zeros(trace.selectors.dim());
        let n = tree.n_features;
        for s in 0..x.nrows() {
            // recursion: node v at depth j covers leaves [lo, hi)
            // weight = product of split terms above it
            fn walk(
                tree: &DenseTree,
                trace: &ForwardTrace,
                s: usize,
                v: usize,
                j: usize,
                lo: usize,
                hi: usize,
                weight: f64,
                dyhat: ArrayView1<f64>,
                grads: &mut TreeGradients,
                d_sel: &mut Array2<f64>,
                x: ArrayView2<f64>,
            ) -> f64 {
                // returns d loss / d weight for this subtree
                if j == tree.depth {
                    let l = lo;
                    let mut d_weight = 0.0;
                    for k in 0..tree.n_classes {
                        grads.d_leaf[[l, k]] += weight * dyhat[k];
                        d_weight += tree.leaf_logits[[l, k]] * dyhat[k];
                    }
                    return d_weight;
                }
                let sv = trace.splits[[s, v]];
                let mid = (lo + hi) / 2;
                let dl = walk(
                    tree, trace, s, 2 * v + 1, j + 1, lo, mid, weight * sv, dyhat, grads, d_sel, x,
                );
                let dr = walk(
                    tree,
                    trace,
                    s,
                    2 * v + 2,
                    j + 1,
                    mid,
                    hi,
                    weight * (1.0 - sv),
                    dyhat,
                    grads,
                    d_sel,
                    x,
                );
                // d/d sv of (left weight, right weight) contributions
                let d_sv = weight * dl - weight * dr;
                let da = d_sv * trace.activation.derivative(trace.pre_activations[[s, v]]);
                for i in 0..tree.n_features {
                    grads.d_thresholds[[v, i]] -= da * trace.selectors[[v, i]];
                    d_sel[[v, i]] += da * (x[[s, i]] - tree.thresholds[[v, i]]);
                }
                dl * sv + dr * (1.0 - sv)
            }
            walk(
                tree,
                trace,
                s,
                0,
                0,
                0,
                tree.n_leaves(),
                1.0,
                grad_logits.row(s),
                &mut grads,
                &mut d_sel,
                x,
            );
        }
        for v in 0..tree.n_internal() {
            let di = entmax_jacobian_vector_product(trace.entmax_rows.row(v), d_sel.row(v));
            grads.d_index.row_mut(v).assign(&di);
        }
        let _ = n;
        grads
    }

    #[test]
    fn hard_mode_matches_independent_recursive_backward() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let d = rng.gen_range(1..=2);
            let n = rng.gen_range(1..=4);
            let c = rng.gen_range(2..=3);
            let tree = random_tree(&mut rng, d, n, c);
            let batch = rng.gen_range(1..=5);
            let x = Array2::from_shape_fn((batch, n), |_| rng.gen_range(-2.0..2.0));
            let y: Vec<usize> = (0..batch).map(|_| rng.gen_range(0..c)).collect();
            let (probs, trace) =
                tree_forward(&tree, x.view(), SplitActivation::Sigmoid, ForwardMode::Hard)
                    .unwrap();
            let cfg = LossConfig::default();
            let (_, gl) = cross_entropy_loss(probs.view(), &y, &cfg).unwrap();
            let a = backward(&tree, &trace, gl.view(), x.view()).unwrap();
            let b = recursive_backward(&tree, &trace, gl.view(), x.view());
            for (av, bv) in a.d_index.iter().zip(b.d_index.iter()) {
                assert!((av - bv).abs() < 1e-12);
            }
            for (av, bv) in a.d_thresholds.iter().zip(b.d_thresholds.iter()) {
                assert!((av - bv).abs() < 1e-12);
            }
            for (av, bv) in a.d_leaf.iter().zip(b.d_leaf.iter()) {
                assert!((av - bv).abs() < 1e-12);
            }
        }
    }
}
