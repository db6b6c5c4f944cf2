//! End-to-end trained tree ensembles with instance-wise leaf weighting,
//! per-estimator feature/data subsetting, and estimator dropout.
//!
//! Each estimator contributes its hard-mode prediction and one scalar weight
//! chosen by the leaf the sample lands in; a softmax over the chosen weights
//! (restricted to the active estimators) blends the predictions per sample.

use ndarray::{Array1, Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GradTreeError, Result};
use crate::grad::{backward_with_indicator_grad, softmax_backward, TreeGradients};
use crate::optim::{
    adamw_step, cross_entropy_on_probs, init_tree, AdamState, EpochRecord, RestartSummary,
    SwaRing, TrainConfig, TrainReport,
};
use crate::tree::{tree_forward, DenseTree, ForwardMode, ForwardTrace, SplitActivation};

/// Sentinel index logit excluding a masked feature from entmax entirely.
const MASK_LOGIT: f64 = -1e30;

/// Ensemble hyperparameters. `train` carries the shared optimizer settings;
/// its `activation` and `patience` defaults are overridden here to the
/// ensemble-appropriate values.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleConfig {
    pub estimators: usize,
    pub dropout: f64,
    pub feature_fraction: f64,
    pub sample_fraction: f64,
    pub with_replacement: bool,
    pub train: TrainConfig,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            estimators: 8,
            dropout: 0.0,
            feature_fraction: 1.0,
            sample_fraction: 1.0,
            with_replacement: false,
            train: TrainConfig {
                activation: SplitActivation::Softsign,
                patience: 25,
                ..TrainConfig::default()
            },
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if self.estimators == 0 {
            return Err(GradTreeError::Config("estimators must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(GradTreeError::Config("dropout must be in [0, 1)".into()));
        }
        for (name, f) in [
            ("feature_fraction", self.feature_fraction),
            ("sample_fraction", self.sample_fraction),
        ] {
            if !(f > 0.0 && f <= 1.0) {
                return Err(GradTreeError::Config(format!("{name} must be in (0, 1]")));
            }
        }
        Ok(())
    }
}

/// Trained ensemble: `E` dense trees of identical shape, an `E x 2^d` leaf
/// weight matrix, and per-estimator feature masks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub trees: Vec<DenseTree>,
    pub weights: Array2<f64>,
    pub feature_masks: Vec<Vec<bool>>,
    pub activation: SplitActivation,
}

impl Ensemble {
    pub fn n_estimators(&self) -> usize {
        self.trees.len()
    }

    pub fn validate(&self) -> Result<()> {
        let Some(first) = self.trees.first() else {
            return Err(GradTreeError::Argument("ensemble has no trees".into()));
        };
        let leaves = first.n_leaves();
        for t in &self.trees {
            t.validate()?;
            if (t.depth, t.n_features, t.n_classes)
                != (first.depth, first.n_features, first.n_classes)
            {
                return Err(GradTreeError::Argument("trees differ in shape".into()));
            }
        }
        if self.weights.dim() != (self.trees.len(), leaves) {
            return Err(GradTreeError::Argument(format!(
                "weight matrix is {:?}, expected ({}, {leaves})",
                self.weights.dim(),
                self.trees.len()
            )));
        }
        if self.weights.iter().any(|w| !w.is_finite()) {
            return Err(GradTreeError::Argument("non-finite leaf weight".into()));
        }
        if self.feature_masks.len() != self.trees.len() {
            return Err(GradTreeError::Argument("feature mask count mismatch".into()));
        }
        for mask in &self.feature_masks {
            if mask.len() != first.n_features {
                return Err(GradTreeError::Argument("feature mask length mismatch".into()));
            }
            if !mask.iter().any(|&b| b) {
                return Err(GradTreeError::Argument(
                    "feature mask excludes every feature".into(),
                ));
            }
        }
        Ok(())
    }

    /// Tree `e` with masked features forced out of the entmax support.
    fn masked_tree(&self, e: usize) -> DenseTree {
        let mut t = self.trees[e].clone();
        for (i, &keep) in self.feature_masks[e].iter().enumerate() {
            if !keep {
                t.index_logits.column_mut(i).fill(MASK_LOGIT);
            }
        }
        t
    }
}

/// Everything the backward pass needs from one forward evaluation.
pub struct EnsembleForward {
    /// Final blended probabilities, `batch x c`.
    pub probs: Array2<f64>,
    /// Post-softmax per-sample estimator weights, `batch x E` (zero for
    /// inactive estimators; each row sums to 1 over the active set).
    pub post_weights: Array2<f64>,
    /// Per-estimator predicted probabilities, `batch x c` each.
    pub tree_probs: Vec<Array2<f64>>,
    /// Per-estimator forward traces (`None` for inactive estimators).
    pub traces: Vec<Option<ForwardTrace>>,
    /// Raw selected weights `batch x E` before the softmax.
    pub raw_weights: Array2<f64>,
}

/// Blend per-estimator probability rows with a softmax over the raw selected
/// weights of the active estimators.
pub fn combine_predictions(
    raw_weights: &[f64],
    tree_probs: &[Vec<f64>],
    active: &[bool],
) -> Result<(Vec<f64>, Vec<f64>)> {
    if raw_weights.len() != tree_probs.len() || raw_weights.len() != active.len() {
        return Err(GradTreeError::Argument("combine length mismatch".into()));
    }
    if !active.iter().any(|&a| a) {
        return Err(GradTreeError::Argument("no active estimator".into()));
    }
    let mx = raw_weights
        .iter()
        .zip(active)
        .filter(|(_, &a)| a)
        .map(|(&w, _)| w)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut post = vec![0.0; raw_weights.len()];
    let mut z = 0.0;
    for (e, &w) in raw_weights.iter().enumerate() {
        if active[e] {
            post[e] = (w - mx).exp();
            z += post[e];
        }
    }
    for p in &mut post {
        *p /= z;
    }
    let c = tree_probs.first().map_or(0, Vec::len);
    let mut out = vec![0.0; c];
    for (e, probs) in tree_probs.iter().enumerate() {
        if active[e] {
            for (o, &p) in out.iter_mut().zip(probs) {
                *o += post[e] * p;
            }
        }
    }
    Ok((out, post))
}

/// Full ensemble forward pass. `active` restricts the softmax to a dropout
/// subset; `None` means all estimators participate.
pub fn ensemble_forward(
    ens: &Ensemble,
    x: ArrayView2<f64>,
    mode: ForwardMode,
    active: Option<&[bool]>,
) -> Result<EnsembleForward> {
    ens.validate()?;
    let e_count = ens.n_estimators();
    let all_active = vec![true; e_count];
    let active = active.unwrap_or(&all_active);
    if active.len() != e_count {
        return Err(GradTreeError::Argument("active mask length mismatch".into()));
    }
    if !active.iter().any(|&a| a) {
        return Err(GradTreeError::Argument("no active estimator".into()));
    }
    let batch = x.nrows();
    let c = ens.trees[0].n_classes;
    let leaves = ens.trees[0].n_leaves();

    let mut tree_probs = Vec::with_capacity(e_count);
    let mut traces: Vec<Option<ForwardTrace>> = Vec::with_capacity(e_count);
    let mut raw_weights = Array2::<f64>::zeros((batch, e_count));
    for e in 0..e_count {
        if !active[e] {
            tree_probs.push(Array2::zeros((batch, c)));
            traces.push(None);
            continue;
        }
        let masked = ens.masked_tree(e);
        let (probs, trace) = tree_forward(&masked, x, ens.activation, mode)?;
        for s in 0..batch {
            let mut w = 0.0;
            for l in 0..leaves {
                w += ens.weights[[e, l]] * trace.indicators[[s, l]];
            }
            raw_weights[[s, e]] = w;
        }
        tree_probs.push(probs);
        traces.push(Some(trace));
    }

    let mut probs = Array2::<f64>::zeros((batch, c));
    let mut post_weights = Array2::<f64>::zeros((batch, e_count));
    for s in 0..batch {
        let raw: Vec<f64> = (0..e_count).map(|e| raw_weights[[s, e]]).collect();
        let per_tree: Vec<Vec<f64>> = tree_probs.iter().map(|p| p.row(s).to_vec()).collect();
        let (out, post) = combine_predictions(&raw, &per_tree, active)?;
        for k in 0..c {
            probs[[s, k]] = out[k];
        }
        for e in 0..e_count {
            post_weights[[s, e]] = post[e];
        }
    }
    Ok(EnsembleForward {
        probs,
        post_weights,
        tree_probs,
        traces,
        raw_weights,
    })
}

/// Gradients for every tree parameter block plus the leaf-weight matrix.
pub struct EnsembleGradients {
    pub trees: Vec<Option<TreeGradients>>,
    pub d_weights: Array2<f64>,
}

/// Backward pass through the blending softmax, the per-tree prediction path,
/// and the leaf-weight selection path. `grad_out` is the upstream gradient
/// w.r.t. the blended probabilities. `row_masks[e]`, when present, zeroes the
/// contribution of batch rows outside estimator `e`'s data subset.
pub fn ensemble_backward(
    ens: &Ensemble,
    x: ArrayView2<f64>,
    fwd: &EnsembleForward,
    grad_out: ArrayView2<f64>,
    row_masks: Option<&[Vec<bool>]>,
) -> Result<EnsembleGradients> {
    let e_count = ens.n_estimators();
    let batch = x.nrows();
    let c = ens.trees[0].n_classes;
    let leaves = ens.trees[0].n_leaves();
    if grad_out.dim() != (batch, c) {
        return Err(GradTreeError::Argument(format!(
            "grad_out shape {:?}, expected ({batch}, {c})",
            grad_out.dim()
        )));
    }
    if let Some(masks) = row_masks {
        if masks.len() != e_count || masks.iter().any(|m| m.len() != batch) {
            return Err(GradTreeError::Argument("row mask shape mismatch".into()));
        }
    }

    // per-sample softmax Jacobian over the post weights
    // dpost[e] = grad_out . p_e;  draw = softmax_backward(post, dpost)
    let mut draw = Array2::<f64>::zeros((batch, e_count));
    for s in 0..batch {
        let mut dpost = Array1::<f64>::zeros(e_count);
        for e in 0..e_count {
            if fwd.traces[e].is_some() {
                let mut acc = 0.0;
                for k in 0..c {
                    acc += grad_out[[s, k]] * fwd.tree_probs[e][[s, k]];
                }
                dpost[e] = acc;
            }
        }
        let post = fwd.post_weights.row(s);
        let d = softmax_backward(post, dpost.view());
        draw.row_mut(s).assign(&d);
    }

    let mut d_weights = Array2::<f64>::zeros((e_count, leaves));
    let mut tree_grads: Vec<Option<TreeGradients>> = Vec::with_capacity(e_count);
    for e in 0..e_count {
        let Some(trace) = &fwd.traces[e] else {
            tree_grads.push(None);
            continue;
        };
        let included =
            |s: usize| row_masks.is_none_or(|m| m[e][s]);
        // prediction path: upstream on tree probabilities, pulled back
        // through the tree's own softmax
        let mut grad_logits = Array2::<f64>::zeros((batch, c));
        // weight path: upstream on the leaf indicators
        let mut grad_ind = Array2::<f64>::zeros((batch, leaves));
        for s in 0..batch {
            if !included(s) {
                continue;
            }
            let mut dprob = Array1::<f64>::zeros(c);
            for k in 0..c {
                dprob[k] = fwd.post_weights[[s, e]] * grad_out[[s, k]];
            }
            let gl = softmax_backward(fwd.tree_probs[e].row(s), dprob.view());
            grad_logits.row_mut(s).assign(&gl);
            let dr = draw[[s, e]];
            for l in 0..leaves {
                let ind = trace.indicators[[s, l]];
                d_weights[[e, l]] += dr * ind;
                grad_ind[[s, l]] = dr * ens.weights[[e, l]];
            }
        }
        let masked = ens.masked_tree(e);
        let g = backward_with_indicator_grad(
            &masked,
            trace,
            grad_logits.view(),
            Some(grad_ind.view()),
            x,
        )?;
        tree_grads.push(Some(g));
    }
    Ok(EnsembleGradients {
        trees: tree_grads,
        d_weights,
    })
}

/// Seeded dropout mask keeping `ceil((1 - p) * E)` estimators, at least one.
pub fn dropout_mask(e_count: usize, p: f64, rng: &mut ChaCha8Rng) -> Result<Vec<bool>> {
    if !(0.0..1.0).contains(&p) {
        return Err(GradTreeError::Argument("dropout fraction must be in [0, 1)".into()));
    }
    let keep = (((1.0 - p) * e_count as f64).ceil() as usize).clamp(1, e_count);
    let mut idx: Vec<usize> = (0..e_count).collect();
    idx.shuffle(rng);
    let mut mask = vec![false; e_count];
    for &e in &idx[..keep] {
        mask[e] = true;
    }
    Ok(mask)
}

/// Deterministic per-estimator row subset and feature mask.
pub fn subsample(
    m: usize,
    n: usize,
    feature_fraction: f64,
    sample_fraction: f64,
    with_replacement: bool,
    seed: u64,
    estimator: usize,
) -> Result<(Vec<usize>, Vec<bool>)> {
    for (name, f) in [
        ("feature_fraction", feature_fraction),
        ("sample_fraction", sample_fraction),
    ] {
        if !(f > 0.0 && f <= 1.0) {
            return Err(GradTreeError::Argument(format!("{name} must be in (0, 1]")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(estimator as u64 + 1);
    let n_keep = ((n as f64 * feature_fraction).round() as usize).clamp(1, n);
    let mut feat_idx: Vec<usize> = (0..n).collect();
    feat_idx.shuffle(&mut rng);
    let mut mask = vec![false; n];
    for &i in &feat_idx[..n_keep] {
        mask[i] = true;
    }
    let m_keep = ((m as f64 * sample_fraction).round() as usize).clamp(1, m);
    let rows = if with_replacement {
        (0..m_keep).map(|_| rng.gen_range(0..m)).collect()
    } else {
        let mut rows: Vec<usize> = (0..m).collect();
        rows.shuffle(&mut rng);
        rows.truncate(m_keep);
        rows.sort_unstable();
        rows
    };
    Ok((rows, mask))
}

fn ensemble_params(ens: &Ensemble) -> Vec<Array2<f64>> {
    let mut out = Vec::with_capacity(ens.trees.len() * 3 + 1);
    for t in &ens.trees {
        out.push(t.index_logits.clone());
        out.push(t.thresholds.clone());
        out.push(t.leaf_logits.clone());
    }
    out.push(ens.weights.clone());
    out
}

fn set_ensemble_params(ens: &mut Ensemble, params: Vec<Array2<f64>>) {
    let mut it = params.into_iter();
    for t in &mut ens.trees {
        t.index_logits = it.next().unwrap();
        t.thresholds = it.next().unwrap();
        t.leaf_logits = it.next().unwrap();
    }
    ens.weights = it.next().unwrap();
}

fn eval_ensemble_loss(
    ens: &Ensemble,
    x: ArrayView2<f64>,
    y: &[usize],
    cfg: &EnsembleConfig,
) -> Result<f64> {
    let fwd = ensemble_forward(ens, x, ForwardMode::Hard, None)?;
    Ok(cross_entropy_on_probs(fwd.probs.view(), y, &cfg.train.loss)?.0)
}

/// Hard-mode classification accuracy of an ensemble.
pub fn ensemble_accuracy(ens: &Ensemble, x: ArrayView2<f64>, y: &[usize]) -> Result<f64> {
    let fwd = ensemble_forward(ens, x, ForwardMode::Hard, None)?;
    let mut correct = 0usize;
    for s in 0..x.nrows() {
        let pred = fwd
            .probs
            .row(s)
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(k, _)| k)
            .unwrap();
        correct += (pred == y[s]) as usize;
    }
    Ok(correct as f64 / x.nrows() as f64)
}

struct EnsembleRestart {
    ensemble: Ensemble,
    valid_loss: f64,
    epochs: Vec<EpochRecord>,
    epochs_run: usize,
    failed: bool,
}

#[allow(clippy::too_many_lines)]
fn run_ensemble_restart(
    x: ArrayView2<f64>,
    y: &[usize],
    n_classes: usize,
    cfg: &EnsembleConfig,
    seed: u64,
) -> Result<EnsembleRestart> {
    let m = x.nrows();
    let n = x.ncols();
    let tc = &cfg.train;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut trees = Vec::with_capacity(cfg.estimators);
    for _ in 0..cfg.estimators {
        trees.push(init_tree(tc.depth, n, n_classes, &mut rng)?);
    }
    let leaves = trees[0].n_leaves();
    let mut ens = Ensemble {
        trees,
        weights: Array2::zeros((cfg.estimators, leaves)),
        feature_masks: vec![vec![true; n]; cfg.estimators],
        activation: tc.activation,
    };

    // validation split
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut rng);
    let n_valid = ((m as f64 * tc.validation_fraction).round() as usize).clamp(1, m - 1);
    let (valid_idx, train_idx) = order.split_at(n_valid);
    let take = |idx: &[usize]| -> (Array2<f64>, Vec<usize>) {
        let xs = Array2::from_shape_fn((idx.len(), n), |(r, c)| x[[idx[r], c]]);
        (xs, idx.iter().map(|&r| y[r]).collect())
    };
    let (x_train, y_train) = take(train_idx);
    let (x_valid, y_valid) = take(valid_idx);
    let m_train = x_train.nrows();

    // fixed per-estimator row subsets and feature masks
    let mut row_sets: Vec<Vec<bool>> = Vec::with_capacity(cfg.estimators);
    for e in 0..cfg.estimators {
        let (rows, mask) = subsample(
            m_train,
            n,
            cfg.feature_fraction,
            cfg.sample_fraction,
            cfg.with_replacement,
            seed,
            e,
        )?;
        let mut members = vec![false; m_train];
        for r in rows {
            members[r] = true;
        }
        row_sets.push(members);
        ens.feature_masks[e] = mask;
    }

    let mut opt: Vec<[AdamState; 3]> = ens
        .trees
        .iter()
        .map(|t| {
            [
                AdamState::new(t.index_logits.dim(), tc.lr_index, tc.weight_decay),
                AdamState::new(t.thresholds.dim(), tc.lr_values, tc.weight_decay),
                AdamState::new(t.leaf_logits.dim(), tc.lr_leaf, tc.weight_decay),
            ]
        })
        .collect();
    let mut opt_w = AdamState::new(ens.weights.dim(), tc.lr_weights, tc.weight_decay);

    let mut swa = SwaRing::new(tc.swa_checkpoints);
    let mut best_valid = f64::INFINITY;
    let mut best_train = f64::INFINITY;
    let mut valid_at_best = f64::INFINITY;
    let mut best_params: Option<Vec<Array2<f64>>> = None;
    let mut since_improvement = 0usize;
    let mut epochs = Vec::new();
    let mut step = 0usize;
    let mut failed = false;
    let mut epochs_run = 0usize;
    let mut batch_order: Vec<usize> = (0..m_train).collect();

    'epochs: for epoch in 0..tc.epochs {
        batch_order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut n_batches = 0usize;
        let mut factor = 1.0;
        for chunk in batch_order.chunks(tc.batch_size) {
            factor = tc.schedule.factor(step);
            let xb = Array2::from_shape_fn((chunk.len(), n), |(r, c)| x_train[[chunk[r], c]]);
            let yb: Vec<usize> = chunk.iter().map(|&r| y_train[r]).collect();
            let active = dropout_mask(cfg.estimators, cfg.dropout, &mut rng)?;
            let fwd = ensemble_forward(&ens, xb.view(), ForwardMode::Hard, Some(&active))?;
            let (loss, grad_out) = cross_entropy_on_probs(fwd.probs.view(), &yb, &tc.loss)?;
            if !loss.is_finite() {
                failed = true;
                break 'epochs;
            }
            let masks: Vec<Vec<bool>> = (0..cfg.estimators)
                .map(|e| chunk.iter().map(|&r| row_sets[e][r]).collect())
                .collect();
            let grads =
                ensemble_backward(&ens, xb.view(), &fwd, grad_out.view(), Some(&masks))?;
            for (e, g) in grads.trees.iter().enumerate() {
                let Some(g) = g else { continue };
                let t = &mut ens.trees[e];
                adamw_step(&mut opt[e][0], &mut t.index_logits, &g.d_index, factor)?;
                adamw_step(&mut opt[e][1], &mut t.thresholds, &g.d_thresholds, factor)?;
                adamw_step(&mut opt[e][2], &mut t.leaf_logits, &g.d_leaf, factor)?;
            }
            adamw_step(&mut opt_w, &mut ens.weights, &grads.d_weights, factor)?;
            epoch_loss += loss;
            n_batches += 1;
            step += 1;
        }
        epochs_run = epoch + 1;
        // Same snapshot policy as the single-tree loop: keep the weight
        // average with the lowest full-batch training loss, early-stop on the
        // validation loss.
        swa.push(ensemble_params(&ens));
        let avg = swa.average()?;
        let mut swa_ens = ens.clone();
        set_ensemble_params(&mut swa_ens, avg.clone());
        let swa_train_loss = eval_ensemble_loss(&swa_ens, x_train.view(), &y_train, cfg)?;
        let valid_loss = eval_ensemble_loss(&swa_ens, x_valid.view(), &y_valid, cfg)?;
        if !valid_loss.is_finite() || !swa_train_loss.is_finite() {
            failed = true;
            break;
        }
        epochs.push(EpochRecord {
            epoch,
            train_loss: epoch_loss / n_batches.max(1) as f64,
            valid_loss,
            lr: tc.lr_index * factor,
        });
        if swa_train_loss < best_train - 1e-6 {
            best_train = swa_train_loss;
            best_params = Some(avg);
            valid_at_best = valid_loss;
        }
        if valid_loss < best_valid - 1e-6 {
            best_valid = valid_loss;
            since_improvement = 0;
        } else {
            since_improvement += 1;
            if since_improvement >= tc.patience {
                break;
            }
        }
    }

    let mut final_ens = ens.clone();
    if let Some(params) = best_params {
        set_ensemble_params(&mut final_ens, params);
    }
    Ok(EnsembleRestart {
        ensemble: final_ens,
        valid_loss: valid_at_best,
        epochs,
        epochs_run,
        failed: failed || !valid_at_best.is_finite(),
    })
}

/// Train a full ensemble (trees plus leaf weights) end to end with restarts,
/// early stopping, and weight averaging, mirroring [`crate::optim::train_tree`].
pub fn train_ensemble(
    x: ArrayView2<f64>,
    y: &[usize],
    n_classes: usize,
    cfg: &EnsembleConfig,
) -> Result<(Ensemble, TrainReport)> {
    cfg.validate()?;
    let tc = &cfg.train;
    let m = x.nrows();
    if m < 2 || y.len() != m {
        return Err(GradTreeError::Argument(format!(
            "{m} rows with {} labels",
            y.len()
        )));
    }
    if n_classes < 2 {
        return Err(GradTreeError::Config("need at least 2 classes".into()));
    }
    if y.iter().all(|&l| l == y[0]) {
        return Err(GradTreeError::Config(
            "all labels identical; nothing to learn".into(),
        ));
    }
    if tc.epochs == 0 {
        return Err(GradTreeError::Config("ensemble training needs epochs >= 1".into()));
    }

    let mut best: Option<(usize, EnsembleRestart)> = None;
    let mut summaries = Vec::with_capacity(tc.restarts);
    for r in 0..tc.restarts {
        let seed = tc.seed.wrapping_add(r as u64);
        let outcome = run_ensemble_restart(x, y, n_classes, cfg, seed)?;
        summaries.push(RestartSummary {
            restart: r,
            seed,
            valid_loss: outcome.valid_loss,
            epochs_run: outcome.epochs_run,
            failed: outcome.failed,
        });
        if outcome.failed {
            continue;
        }
        if best.as_ref().is_none_or(|(_, b)| outcome.valid_loss < b.valid_loss) {
            best = Some((r, outcome));
        }
    }
    let (chosen, outcome) =
        best.ok_or_else(|| GradTreeError::Training("all restarts failed".into()))?;
    Ok((
        outcome.ensemble,
        TrainReport {
            seed: tc.seed,
            chosen_restart: chosen,
            restarts: summaries,
            epochs: outcome.epochs,
        },
    ))
}
