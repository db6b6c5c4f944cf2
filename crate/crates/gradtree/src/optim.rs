//! Loss functions, Adam / AdamW, weight averaging, learning-rate schedules,
//! and the full gradient-descent training loop for a single dense tree.

use std::collections::VecDeque;

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GradTreeError, Result};
use crate::grad::backward;
use crate::tree::{tree_forward, DenseTree, ForwardMode, SplitActivation};

/// Classification loss configuration. `focal_factor = 0` disables the focal
/// term and reduces to (optionally class-weighted) cross-entropy.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossConfig {
    #[serde(default)]
    pub focal_factor: f64,
    #[serde(default)]
    pub class_weights: Option<Vec<f64>>,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            focal_factor: 0.0,
            class_weights: None,
        }
    }
}

impl LossConfig {
    fn validate(&self, c: usize) -> Result<()> {
        if self.focal_factor < 0.0 || !self.focal_factor.is_finite() {
            return Err(GradTreeError::Config(
                "focal_factor must be finite and nonnegative".into(),
            ));
        }
        if let Some(w) = &self.class_weights {
            if w.len() != c {
                return Err(GradTreeError::Config(format!(
                    "class_weights has length {}, expected {c}",
                    w.len()
                )));
            }
            if w.iter().any(|&wi| wi <= 0.0 || !wi.is_finite()) {
                return Err(GradTreeError::Config("class_weights must be positive".into()));
            }
        }
        Ok(())
    }

    fn weight(&self, class: usize) -> f64 {
        self.class_weights.as_ref().map_or(1.0, |w| w[class])
    }
}

const PROB_FLOOR: f64 = 1e-12;

/// Focal loss value and its derivative w.r.t. the true-class probability.
/// `L = -w (1-p)^g ln p`.
fn focal_terms(p: f64, w: f64, gamma: f64) -> (f64, f64) {
    let p = p.max(PROB_FLOOR);
    if gamma == 0.0 {
        (-w * p.ln(), -w / p)
    } else {
        let q = 1.0 - p;
        let loss = -w * q.powf(gamma) * p.ln();
        let dp = w * (gamma * q.powf(gamma - 1.0) * p.ln() - q.powf(gamma) / p);
        (loss, dp)
    }
}

/// Mean focal cross-entropy over a batch of probability rows, with the
/// gradient w.r.t. the pre-softmax logits (softmax Jacobian folded in
/// analytically).
pub fn cross_entropy_loss(
    pred: ArrayView2<f64>,
    y: &[usize],
    cfg: &LossConfig,
) -> Result<(f64, Array2<f64>)> {
    let (batch, c) = pred.dim();
    check_loss_inputs(pred, y, cfg)?;
    let gamma = cfg.focal_factor;
    let mut loss = 0.0;
    let mut grad = Array2::<f64>::zeros((batch, c));
    for s in 0..batch {
        let py = pred[[s, y[s]]];
        let (l, dl_dpy) = focal_terms(py, cfg.weight(y[s]), gamma);
        loss += l;
        // chain through the softmax Jacobian: dz_k = dl_dpy * p_y (d_yk - p_k)
        let py_used = py.max(PROB_FLOOR);
        for k in 0..c {
            let delta = if k == y[s] { 1.0 } else { 0.0 };
            grad[[s, k]] = dl_dpy * py_used * (delta - pred[[s, k]]) / batch as f64;
        }
    }
    Ok((loss / batch as f64, grad))
}

/// As [`cross_entropy_loss`] but the gradient is taken w.r.t. the
/// probabilities themselves. Used when the model output is already a convex
/// combination of softmaxes (the ensemble) rather than a single softmax.
pub fn cross_entropy_on_probs(
    pred: ArrayView2<f64>,
    y: &[usize],
    cfg: &LossConfig,
) -> Result<(f64, Array2<f64>)> {
    let (batch, c) = pred.dim();
    check_loss_inputs(pred, y, cfg)?;
    let mut loss = 0.0;
    let mut grad = Array2::<f64>::zeros((batch, c));
    for s in 0..batch {
        let (l, dl_dpy) = focal_terms(pred[[s, y[s]]], cfg.weight(y[s]), cfg.focal_factor);
        loss += l;
        grad[[s, y[s]]] = dl_dpy / batch as f64;
    }
    Ok((loss / batch as f64, grad))
}

fn check_loss_inputs(pred: ArrayView2<f64>, y: &[usize], cfg: &LossConfig) -> Result<()> {
    let (batch, c) = pred.dim();
    if batch == 0 || c == 0 {
        return Err(GradTreeError::Argument("empty prediction batch".into()));
    }
    if y.len() != batch {
        return Err(GradTreeError::Argument(format!(
            "{} labels for a batch of {batch}",
            y.len()
        )));
    }
    if let Some(&bad) = y.iter().find(|&&l| l >= c) {
        return Err(GradTreeError::Argument(format!(
            "label {bad} out of range for {c} classes"
        )));
    }
    cfg.validate(c)
}

/// Adam / AdamW moment state for one parameter group.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: Array2<f64>,
    pub v: Array2<f64>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub lr: f64,
    pub weight_decay: f64,
}

impl AdamState {
    pub fn new(shape: (usize, usize), lr: f64, weight_decay: f64) -> Self {
        AdamState {
            m: Array2::zeros(shape),
            v: Array2::zeros(shape),
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            lr,
            weight_decay,
        }
    }

    fn check(&self, params: &Array2<f64>, grads: &Array2<f64>) -> Result<()> {
        if params.dim() != self.m.dim() || grads.dim() != self.m.dim() {
            return Err(GradTreeError::Argument(format!(
                "adam shapes disagree: state {:?}, params {:?}, grads {:?}",
                self.m.dim(),
                params.dim(),
                grads.dim()
            )));
        }
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(GradTreeError::Numeric("non-finite gradient in adam step".into()));
        }
        Ok(())
    }
}

/// One Adam update with bias correction. `lr_scale` multiplies the stored
/// learning rate (used by schedules). Rejects non-finite gradients without
/// touching the state.
pub fn adam_step(
    state: &mut AdamState,
    params: &mut Array2<f64>,
    grads: &Array2<f64>,
    lr_scale: f64,
) -> Result<()> {
    state.check(params, grads)?;
    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    let eta = state.lr * lr_scale;
    for ((m, v), (p, &g)) in state
        .m
        .iter_mut()
        .zip(state.v.iter_mut())
        .zip(params.iter_mut().zip(grads.iter()))
    {
        *m = state.beta1 * *m + (1.0 - state.beta1) * g;
        *v = state.beta2 * *v + (1.0 - state.beta2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p -= eta * m_hat / (v_hat.sqrt() + state.epsilon);
    }
    Ok(())
}

/// Adam plus decoupled weight decay applied directly to the parameters,
/// outside the adaptive scaling.
pub fn adamw_step(
    state: &mut AdamState,
    params: &mut Array2<f64>,
    grads: &Array2<f64>,
    lr_scale: f64,
) -> Result<()> {
    let decay = state.lr * lr_scale * state.weight_decay;
    adam_step(state, params, grads, lr_scale)?;
    if decay != 0.0 {
        params.mapv_inplace(|p| p - decay * p);
    }
    Ok(())
}

/// Ring buffer of the most recent parameter snapshots for stochastic weight
/// averaging. Each snapshot is a list of parameter matrices.
#[derive(Debug, Clone)]
pub struct SwaRing {
    k: usize,
    snapshots: VecDeque<Vec<Array2<f64>>>,
}

impl SwaRing {
    pub fn new(k: usize) -> Self {
        SwaRing {
            k: k.max(1),
            snapshots: VecDeque::new(),
        }
    }

    pub fn push(&mut self, snapshot: Vec<Array2<f64>>) {
        if self.snapshots.len() == self.k {
            self.snapshots.pop_front();
        }
        self.snapshots.push_back(snapshot);
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    /// Arithmetic mean of the stored snapshots.
    pub fn average(&self) -> Result<Vec<Array2<f64>>> {
        let first = self
            .snapshots
            .front()
            .ok_or_else(|| GradTreeError::Argument("swa average of zero snapshots".into()))?;
        let mut acc: Vec<Array2<f64>> = first.iter().map(|a| Array2::zeros(a.dim())).collect();
        for snap in &self.snapshots {
            for (a, s) in acc.iter_mut().zip(snap.iter()) {
                *a += s;
            }
        }
        let n = self.snapshots.len() as f64;
        for a in &mut acc {
            a.mapv_inplace(|v| v / n);
        }
        Ok(acc)
    }
}

/// Learning-rate schedule as a multiplier on the per-group base rates.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, rename_all = "snake_case", tag = "kind")]
pub enum Schedule {
    Constant,
    CosineDecay {
        steps: usize,
        #[serde(default)]
        warmup: usize,
    },
}

impl Schedule {
    pub fn factor(&self, step: usize) -> f64 {
        match *self {
            Schedule::Constant => 1.0,
            Schedule::CosineDecay { steps, warmup } => {
                if warmup > 0 && step < warmup {
                    return (step + 1) as f64 / warmup as f64;
                }
                if steps <= warmup {
                    return 1.0;
                }
                let progress =
                    ((step - warmup) as f64 / (steps - warmup) as f64).clamp(0.0, 1.0);
                0.5 * (1.0 + (std::f64::consts::PI * progress).cos())
            }
        }
    }
}

/// Hyperparameters of the single-tree training loop.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub depth: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub patience: usize,
    pub restarts: usize,
    pub lr_index: f64,
    pub lr_values: f64,
    pub lr_leaf: f64,
    pub lr_weights: f64,
    pub weight_decay: f64,
    pub activation: SplitActivation,
    pub swa_checkpoints: usize,
    pub schedule: Schedule,
    pub validation_fraction: f64,
    pub seed: u64,
    pub loss: LossConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            depth: 3,
            epochs: 1000,
            batch_size: 64,
            patience: 200,
            restarts: 3,
            lr_index: 0.01,
            lr_values: 0.01,
            lr_leaf: 0.05,
            lr_weights: 0.005,
            weight_decay: 0.0,
            activation: SplitActivation::Softsign,
            swa_checkpoints: 5,
            schedule: Schedule::Constant,
            validation_fraction: 0.2,
            seed: 42,
            loss: LossConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 {
            return Err(GradTreeError::Config("depth must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(GradTreeError::Config("batch_size must be >= 1".into()));
        }
        if self.restarts == 0 {
            return Err(GradTreeError::Config("restarts must be >= 1".into()));
        }
        for (name, lr) in [
            ("lr_index", self.lr_index),
            ("lr_values", self.lr_values),
            ("lr_leaf", self.lr_leaf),
            ("lr_weights", self.lr_weights),
        ] {
            if lr <= 0.0 || !lr.is_finite() {
                return Err(GradTreeError::Config(format!("{name} must be > 0")));
            }
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(GradTreeError::Config(
                "validation_fraction must be in (0, 1)".into(),
            ));
        }
        if self.weight_decay < 0.0 {
            return Err(GradTreeError::Config("weight_decay must be >= 0".into()));
        }
        Ok(())
    }
}

/// One per-epoch record of the training report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub valid_loss: f64,
    pub lr: f64,
}

/// Outcome of one random restart.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RestartSummary {
    pub restart: usize,
    pub seed: u64,
    pub valid_loss: f64,
    pub epochs_run: usize,
    pub failed: bool,
}

/// Full training report: per-epoch curve of the selected restart plus a
/// summary line per restart.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub seed: u64,
    pub chosen_restart: usize,
    pub restarts: Vec<RestartSummary>,
    pub epochs: Vec<EpochRecord>,
}

impl TrainReport {
    /// One JSON object per line, one line per epoch of the chosen restart.
    pub fn to_json_lines(&self) -> Result<String> {
        let mut out = String::new();
        for rec in &self.epochs {
            out.push_str(&serde_json::to_string(rec)?);
            out.push('\n');
        }
        Ok(out)
    }
}

/// Uniform initialization ranges from the dense-tree training algorithm.
pub fn init_tree(depth: usize, n: usize, c: usize, rng: &mut ChaCha8Rng) -> Result<DenseTree> {
    let mut tree = DenseTree::zeros(depth, n, c)?;
    let bound_it = (6.0 / (2f64.powi(2 * depth as i32 - 1) + n as f64)).sqrt();
    let bound_l = (6.0 / (2f64.powi(2 * depth as i32) + c as f64)).sqrt();
    tree.index_logits
        .mapv_inplace(|_| rng.gen_range(-bound_it..bound_it));
    tree.thresholds
        .mapv_inplace(|_| rng.gen_range(-bound_it..bound_it));
    tree.leaf_logits
        .mapv_inplace(|_| rng.gen_range(-bound_l..bound_l));
    Ok(tree)
}

fn tree_params(tree: &DenseTree) -> Vec<Array2<f64>> {
    vec![
        tree.index_logits.clone(),
        tree.thresholds.clone(),
        tree.leaf_logits.clone(),
    ]
}

fn set_tree_params(tree: &mut DenseTree, params: Vec<Array2<f64>>) {
    let mut it = params.into_iter();
    tree.index_logits = it.next().unwrap();
    tree.thresholds = it.next().unwrap();
    tree.leaf_logits = it.next().unwrap();
}

fn eval_loss(
    tree: &DenseTree,
    x: ArrayView2<f64>,
    y: &[usize],
    cfg: &TrainConfig,
) -> Result<f64> {
    let (probs, _) = tree_forward(tree, x, cfg.activation, ForwardMode::Hard)?;
    Ok(cross_entropy_loss(probs.view(), y, &cfg.loss)?.0)
}

/// Hard-mode classification accuracy of a dense tree.
pub fn tree_accuracy(
    tree: &DenseTree,
    x: ArrayView2<f64>,
    y: &[usize],
    activation: SplitActivation,
) -> Result<f64> {
    let (probs, _) = tree_forward(tree, x, activation, ForwardMode::Hard)?;
    let mut correct = 0usize;
    for s in 0..x.nrows() {
        let pred = probs
            .row(s)
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(k, _)| k)
            .unwrap();
        if pred == y[s] {
            correct += 1;
        }
    }
    Ok(correct as f64 / x.nrows() as f64)
}

struct RestartOutcome {
    tree: DenseTree,
    valid_loss: f64,
    epochs: Vec<EpochRecord>,
    epochs_run: usize,
    failed: bool,
}

fn run_restart(
    x: ArrayView2<f64>,
    y: &[usize],
    n_classes: usize,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<RestartOutcome> {
    let m = x.nrows();
    let n = x.ncols();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tree = init_tree(cfg.depth, n, n_classes, &mut rng)?;

    // held-out validation split, seeded per restart
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut rng);
    let n_valid = ((m as f64 * cfg.validation_fraction).round() as usize).clamp(1, m - 1);
    let (valid_idx, train_idx) = order.split_at(n_valid);
    let take = |idx: &[usize]| -> (Array2<f64>, Vec<usize>) {
        let xs = Array2::from_shape_fn((idx.len(), n), |(r, c)| x[[idx[r], c]]);
        let ys = idx.iter().map(|&r| y[r]).collect();
        (xs, ys)
    };
    let (x_train, y_train) = take(train_idx);
    let (x_valid, y_valid) = take(valid_idx);

    let mut opt_index = AdamState::new(tree.index_logits.dim(), cfg.lr_index, cfg.weight_decay);
    let mut opt_thresh = AdamState::new(tree.thresholds.dim(), cfg.lr_values, cfg.weight_decay);
    let mut opt_leaf = AdamState::new(tree.leaf_logits.dim(), cfg.lr_leaf, cfg.weight_decay);

    let mut swa = SwaRing::new(cfg.swa_checkpoints);
    let mut best_valid = f64::INFINITY;
    let mut best_train = f64::INFINITY;
    let mut valid_at_best = f64::INFINITY;
    let mut best_params: Option<Vec<Array2<f64>>> = None;
    let mut since_improvement = 0usize;
    let mut epochs = Vec::new();
    let mut step = 0usize;
    let mut failed = false;
    let mut epochs_run = 0usize;
    let mut batch_order: Vec<usize> = (0..x_train.nrows()).collect();

    'epochs: for epoch in 0..cfg.epochs {
        batch_order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut n_batches = 0usize;
        let mut factor = 1.0;
        for chunk in batch_order.chunks(cfg.batch_size) {
            let (xb, yb) = take_batch(&x_train, &y_train, chunk);
            factor = cfg.schedule.factor(step);
            let (probs, trace) = tree_forward(&tree, xb.view(), cfg.activation, ForwardMode::Hard)?;
            let (loss, grad_logits) = cross_entropy_loss(probs.view(), &yb, &cfg.loss)?;
            if !loss.is_finite() {
                failed = true;
                break 'epochs;
            }
            let grads = backward(&tree, &trace, grad_logits.view(), xb.view())?;
            adamw_step(&mut opt_index, &mut tree.index_logits, &grads.d_index, factor)?;
            adamw_step(&mut opt_thresh, &mut tree.thresholds, &grads.d_thresholds, factor)?;
            adamw_step(&mut opt_leaf, &mut tree.leaf_logits, &grads.d_leaf, factor)?;
            epoch_loss += loss;
            n_batches += 1;
            step += 1;
        }
        epochs_run = epoch + 1;
        // Evaluate the running weight average each epoch. The restart keeps
        // the averaged parameters with the lowest training loss seen so far
        // (the trajectory can drift out of a good configuration late in
        // training); the validation loss drives early stopping and, via the
        // loss recorded at the kept snapshot, the selection across restarts.
        swa.push(tree_params(&tree));
        let avg = swa.average()?;
        let mut swa_tree = tree.clone();
        set_tree_params(&mut swa_tree, avg.clone());
        let swa_train_loss = eval_loss(&swa_tree, x_train.view(), &y_train, cfg)?;
        let valid_loss = eval_loss(&swa_tree, x_valid.view(), &y_valid, cfg)?;
        if !valid_loss.is_finite() || !swa_train_loss.is_finite() {
            failed = true;
            break;
        }
        epochs.push(EpochRecord {
            epoch,
            train_loss: epoch_loss / n_batches.max(1) as f64,
            valid_loss,
            lr: cfg.lr_index * factor,
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
            if since_improvement >= cfg.patience {
                break;
            }
        }
    }

    let mut final_tree = tree.clone();
    if let Some(params) = best_params {
        set_tree_params(&mut final_tree, params);
    }
    Ok(RestartOutcome {
        tree: final_tree,
        valid_loss: valid_at_best,
        epochs,
        epochs_run,
        failed: failed || !valid_at_best.is_finite(),
    })
}

fn take_batch(x: &Array2<f64>, y: &[usize], idx: &[usize]) -> (Array2<f64>, Vec<usize>) {
    let xb = Array2::from_shape_fn((idx.len(), x.ncols()), |(r, c)| x[[idx[r], c]]);
    let yb = idx.iter().map(|&r| y[r]).collect();
    (xb, yb)
}

/// Train a single dense tree with random restarts, early stopping, and SWA.
/// Returns the SWA parameters of the restart with the lowest validation loss.
pub fn train_tree(
    x: ArrayView2<f64>,
    y: &[usize],
    n_classes: usize,
    cfg: &TrainConfig,
) -> Result<(DenseTree, TrainReport)> {
    cfg.validate()?;
    let m = x.nrows();
    if m == 0 || y.len() != m {
        return Err(GradTreeError::Argument(format!(
            "{m} rows with {} labels",
            y.len()
        )));
    }
    if n_classes < 2 {
        return Err(GradTreeError::Config("need at least 2 classes".into()));
    }
    let first = y[0];
    if y.iter().all(|&l| l == first) {
        return Err(GradTreeError::Config(
            "all labels identical; nothing to learn".into(),
        ));
    }
    if let Some(&bad) = y.iter().find(|&&l| l >= n_classes) {
        return Err(GradTreeError::Argument(format!(
            "label {bad} out of range for {n_classes} classes"
        )));
    }
    if m < 2 {
        return Err(GradTreeError::Argument("need at least 2 rows".into()));
    }

    if cfg.epochs == 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let tree = init_tree(cfg.depth, x.ncols(), n_classes, &mut rng)?;
        return Ok((
            tree,
            TrainReport {
                seed: cfg.seed,
                chosen_restart: 0,
                restarts: vec![RestartSummary {
                    restart: 0,
                    seed: cfg.seed,
                    valid_loss: f64::NAN,
                    epochs_run: 0,
                    failed: false,
                }],
                epochs: Vec::new(),
            },
        ));
    }

    let mut best: Option<(usize, RestartOutcome)> = None;
    let mut summaries = Vec::with_capacity(cfg.restarts);
    for r in 0..cfg.restarts {
        let seed = cfg.seed.wrapping_add(r as u64);
        let outcome = run_restart(x, y, n_classes, cfg, seed)?;
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
        let better = match &best {
            None => true,
            Some((_, b)) => outcome.valid_loss < b.valid_loss,
        };
        if better {
            best = Some((r, outcome));
        }
    }
    let (chosen, outcome) =
        best.ok_or_else(|| GradTreeError::Training("all restarts failed".into()))?;
    Ok((
        outcome.tree,
        TrainReport {
            seed: cfg.seed,
            chosen_restart: chosen,
            restarts: summaries,
            epochs: outcome.epochs,
        },
    ))
}
