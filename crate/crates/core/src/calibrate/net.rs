//! Partially monotone network for `r̂(γ; x)`.
//!
//! Two parallel stacks of equal widths:
//!
//! - the feature stack, `z_{l+1} = relu(W_l z_l + b_l)` with `z_0` the
//!   standardized features, unconstrained;
//! - the monotone stack, `m_{l+1} = tanh(softplus(P_l) m_l + Q_l z_{l+1} + c_l)`
//!   with `m_0 = γ`.
//!
//! The output is `sigmoid(softplus(p) · m_L + q · z_L + c)`. Every path from `γ`
//! to the output runs through nonnegative weights and increasing activations,
//! so the prediction is nondecreasing in `γ` for every `x` and every value of
//! the parameters. Training minimizes the squared error against the augmented
//! indicators `W` with AdamW.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{augment, feature_moments, AugmentedCalibrationSet, Backend, CalibrateError, CalibrationSet, PitCdfModel, PitRegression};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MonotoneNetConfig {
    pub hidden_layers: Vec<usize>,
    pub learning_rate: f64,
    /// Multiplicative learning-rate factor per epoch.
    pub lr_decay: f64,
    pub weight_decay: f64,
    /// Rows per mini-batch; batches hold whole calibration points.
    pub batch_size: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub val_fraction: f64,
    pub max_epochs: usize,
    /// Size of the fixed γ-grid on which validation loss is computed.
    pub val_grid: usize,
    pub seed: u64,
}

impl Default for MonotoneNetConfig {
    fn default() -> Self {
        Self {
            hidden_layers: vec![32, 32],
            learning_rate: 1e-3,
            lr_decay: 0.95,
            weight_decay: 0.01,
            batch_size: 2048,
            patience: 10,
            val_fraction: 0.1,
            max_epochs: 100,
            val_grid: 41,
            seed: 0,
        }
    }
}

impl MonotoneNetConfig {
    pub fn validate(&self) -> Result<(), CalibrateError> {
        let bad = |m: &str| Err(CalibrateError::InvalidConfig(m.into()));
        if self.hidden_layers.is_empty() || self.hidden_layers.iter().any(|&w| w == 0) {
            return bad("hidden layer widths must be at least 1");
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return bad("val_fraction must lie in (0, 1)");
        }
        if self.patience == 0 {
            return bad("patience must be at least 1");
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.val_grid == 0 {
            return bad("batch_size, max_epochs and val_grid must be positive");
        }
        if !(self.learning_rate > 0.0) || !(self.lr_decay > 0.0) || self.weight_decay < 0.0 {
            return bad("learning_rate and lr_decay must be positive, weight_decay nonnegative");
        }
        Ok(())
    }

    /// The fixed validation grid `g / (G + 1)`, `g = 1..G`.
    pub fn validation_gammas(&self) -> Vec<f64> {
        let g = self.val_grid;
        (1..=g).map(|i| i as f64 / (g + 1) as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub learning_rate: f64,
    pub train_mse: f64,
    pub val_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingReport {
    pub epochs: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_val_mse: f64,
}

/// Offsets of each parameter tensor in the flat parameter vector.
#[derive(Debug, Clone)]
struct Layout {
    widths: Vec<usize>,
    in_x: Vec<usize>,
    in_m: Vec<usize>,
    wx: Vec<usize>,
    bx: Vec<usize>,
    q: Vec<usize>,
    c: Vec<usize>,
    p: Vec<usize>,
    out_p: usize,
    out_q: usize,
    out_c: usize,
    total: usize,
}

impl Layout {
    fn new(dim: usize, widths: &[usize]) -> Self {
        let mut off = 0;
        let mut take = |k: usize| {
            let o = off;
            off += k;
            o
        };
        let (mut in_x, mut in_m) = (Vec::new(), Vec::new());
        let (mut wx, mut bx, mut q, mut c, mut p) = (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (l, &h) in widths.iter().enumerate() {
            let ix = if l == 0 { dim } else { widths[l - 1] };
            let im = if l == 0 { 1 } else { widths[l - 1] };
            in_x.push(ix);
            in_m.push(im);
            wx.push(take(h * ix));
            bx.push(take(h));
            q.push(take(h * h));
            c.push(take(h));
            p.push(take(h * im));
        }
        let last = *widths.last().expect("at least one layer");
        let out_p = take(last);
        let out_q = take(last);
        let out_c = take(1);
        Self {
            widths: widths.to_vec(),
            in_x,
            in_m,
            wx,
            bx,
            q,
            c,
            p,
            out_p,
            out_q,
            out_c,
            total: off,
        }
    }

    fn depth(&self) -> usize {
        self.widths.len()
    }

    fn last_width(&self) -> usize {
        self.widths[self.widths.len() - 1]
    }

    /// Ranges of parameters that pass through softplus.
    fn monotone_ranges(&self) -> Vec<std::ops::Range<usize>> {
        let mut r: Vec<_> = (0..self.depth())
            .map(|l| self.p[l]..self.p[l] + self.widths[l] * self.in_m[l])
            .collect();
        r.push(self.out_p..self.out_p + self.last_width());
        r
    }
}

#[inline]
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn inverse_softplus(a: f64) -> f64 {
    if a > 30.0 {
        a
    } else {
        a.exp_m1().ln()
    }
}

/// `out = W v + b` for row-major `W` of shape `out.len() × v.len()`.
#[inline]
fn affine(w: &[f64], b: &[f64], v: &[f64], out: &mut [f64]) {
    let cols = v.len();
    for (i, o) in out.iter_mut().enumerate() {
        let row = &w[i * cols..(i + 1) * cols];
        let mut s = b[i];
        for (a, x) in row.iter().zip(v) {
            s += a * x;
        }
        *o = s;
    }
}

/// Fitted network.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonotoneNet {
    config: MonotoneNetConfig,
    dim: usize,
    x_mean: Vec<f64>,
    x_scale: Vec<f64>,
    /// Flat raw parameters; monotone weights are stored before softplus.
    params: Vec<f64>,
    report: TrainingReport,
}

/// Feature-stack activations for one point.
struct FeatureState {
    /// `z_0 ..= z_L`.
    z: Vec<Vec<f64>>,
    /// x-contribution to each monotone pre-activation.
    u: Vec<Vec<f64>>,
    u_out: f64,
}

/// Smallest raw-output span `N(1) − N(0)` used as a divisor.
const MIN_SPAN: f64 = 1e-9;

/// Raw outputs at `γ = 0` and `γ = 1` for one point.
///
/// The fitted map is `r = (N(γ) − N(0)) / (N(1) − N(0))`, so `r(0) = 0` and
/// `r(1) = 1` hold exactly. `free` is false when the span is clamped to
/// [`MIN_SPAN`] and no gradient flows through `N(1)`.
struct Endpoints {
    n0: f64,
    n1: f64,
    inv: f64,
    free: bool,
}

impl Endpoints {
    fn output(&self, n: f64) -> f64 {
        (n - self.n0) * self.inv
    }
}

/// Effective (post-softplus) monotone weights.
struct MonotoneWeights {
    a: Vec<Vec<f64>>,
    a_out: Vec<f64>,
}

impl MonotoneNet {
    fn layout(&self) -> Layout {
        Layout::new(self.dim, &self.config.hidden_layers)
    }

    pub fn config(&self) -> &MonotoneNetConfig {
        &self.config
    }

    pub fn report(&self) -> &TrainingReport {
        &self.report
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    fn standardize(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim).map(|j| (x[j] - self.x_mean[j]) / self.x_scale[j]).collect()
    }

    fn monotone_weights(layout: &Layout, params: &[f64]) -> MonotoneWeights {
        let a = (0..layout.depth())
            .map(|l| {
                let n = layout.widths[l] * layout.in_m[l];
                params[layout.p[l]..layout.p[l] + n].iter().map(|&r| softplus(r)).collect()
            })
            .collect();
        let a_out = params[layout.out_p..layout.out_p + layout.last_width()]
            .iter()
            .map(|&r| softplus(r))
            .collect();
        MonotoneWeights { a, a_out }
    }

    fn feature_forward(layout: &Layout, params: &[f64], xs: &[f64]) -> FeatureState {
        let depth = layout.depth();
        let mut z = Vec::with_capacity(depth + 1);
        z.push(xs.to_vec());
        let mut u = Vec::with_capacity(depth);
        for l in 0..depth {
            let h = layout.widths[l];
            let ix = layout.in_x[l];
            let mut next = vec![0.0; h];
            affine(
                &params[layout.wx[l]..layout.wx[l] + h * ix],
                &params[layout.bx[l]..layout.bx[l] + h],
                &z[l],
                &mut next,
            );
            for v in &mut next {
                *v = v.max(0.0);
            }
            let mut ul = vec![0.0; h];
            affine(
                &params[layout.q[l]..layout.q[l] + h * h],
                &params[layout.c[l]..layout.c[l] + h],
                &next,
                &mut ul,
            );
            z.push(next);
            u.push(ul);
        }
        let last = layout.last_width();
        let zl = &z[depth];
        let u_out = params[layout.out_c]
            + params[layout.out_q..layout.out_q + last]
                .iter()
                .zip(zl)
                .map(|(a, b)| a * b)
                .sum::<f64>();
        FeatureState { z, u, u_out }
    }

    /// Monotone stack; fills `m` (`m_0 ..= m_L`) and returns the output probability.
    fn monotone_forward(
        layout: &Layout,
        weights: &MonotoneWeights,
        feat: &FeatureState,
        gamma: f64,
        m: &mut [Vec<f64>],
    ) -> f64 {
        m[0][0] = gamma;
        for l in 0..layout.depth() {
            let (head, tail) = m.split_at_mut(l + 1);
            affine(&weights.a[l], &feat.u[l], &head[l], &mut tail[0]);
            for v in tail[0].iter_mut() {
                *v = v.tanh();
            }
        }
        let ml = &m[layout.depth()];
        let o = feat.u_out + weights.a_out.iter().zip(ml).map(|(a, b)| a * b).sum::<f64>();
        sigmoid(o)
    }

    /// `N(0; x)` and the reciprocal span `1 / (N(1; x) − N(0; x))` of the raw output.
    fn endpoints(layout: &Layout, weights: &MonotoneWeights, feat: &FeatureState, m: &mut [Vec<f64>]) -> Endpoints {
        let n0 = Self::monotone_forward(layout, weights, feat, 0.0, m);
        let n1 = Self::monotone_forward(layout, weights, feat, 1.0, m);
        let span = n1 - n0;
        let (inv, free) = if span > MIN_SPAN { (1.0 / span, true) } else { (1.0 / MIN_SPAN, false) };
        Endpoints { n0, n1, inv, free }
    }

    fn activation_buffers(layout: &Layout) -> Vec<Vec<f64>> {
        std::iter::once(vec![0.0; 1])
            .chain(layout.widths.iter().map(|&h| vec![0.0; h]))
            .collect()
    }
}

impl PitCdfModel for MonotoneNet {
    fn predict(&self, gamma: f64, x: &[f64]) -> f64 {
        self.predict_curve(&[gamma], x)[0]
    }

    fn predict_curve(&self, gammas: &[f64], x: &[f64]) -> Vec<f64> {
        let layout = self.layout();
        let weights = Self::monotone_weights(&layout, &self.params);
        let feat = Self::feature_forward(&layout, &self.params, &self.standardize(x));
        let mut m = Self::activation_buffers(&layout);
        let ends = Self::endpoints(&layout, &weights, &feat, &mut m);
        gammas
            .iter()
            .map(|&g| {
                ends.output(Self::monotone_forward(&layout, &weights, &feat, g, &mut m))
                    .clamp(0.0, 1.0)
            })
            .collect()
    }

    fn backend(&self) -> Backend {
        Backend::MonotoneNet
    }
}

fn init_params(layout: &Layout, rng: &mut impl Rng) -> Vec<f64> {
    let mut params = vec![0.0; layout.total];
    let normal = |rng: &mut dyn rand::RngCore| -> f64 { StandardNormal.sample(rng) };
    for l in 0..layout.depth() {
        let h = layout.widths[l];
        let ix = layout.in_x[l];
        let im = layout.in_m[l];
        let he = (2.0 / ix.max(1) as f64).sqrt();
        for v in &mut params[layout.wx[l]..layout.wx[l] + h * ix] {
            *v = he * normal(rng);
        }
        let qs = (0.5 / h as f64).sqrt();
        for v in &mut params[layout.q[l]..layout.q[l] + h * h] {
            *v = qs * normal(rng);
        }
        if l == 0 {
            // Spread the tanh transitions of the first monotone layer across γ ∈ (0, 1).
            for j in 0..h {
                let slope = (rng.random::<f64>() * (10.0f64).ln()).exp() * 2.0;
                params[layout.p[0] + j] = inverse_softplus(slope);
                params[layout.c[0] + j] = -slope * rng.random::<f64>();
            }
        } else {
            for v in &mut params[layout.p[l]..layout.p[l] + h * im] {
                let a = (0.5 + 1.5 * rng.random::<f64>()) / im as f64;
                *v = inverse_softplus(a);
            }
        }
    }
    let last = layout.last_width();
    for v in &mut params[layout.out_p..layout.out_p + last] {
        let a = 6.0 / last as f64 * (0.5 + rng.random::<f64>());
        *v = inverse_softplus(a);
    }
    params
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64, weight_decay: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = Self::BETA1 * self.m[i] + (1.0 - Self::BETA1) * g;
            self.v[i] = Self::BETA2 * self.v[i] + (1.0 - Self::BETA2) * g * g;
            let mhat = self.m[i] / c1;
            let vhat = self.v[i] / c2;
            params[i] -= lr * weight_decay * params[i];
            params[i] -= lr * mhat / (vhat.sqrt() + Self::EPS);
        }
    }
}

/// Reusable buffers for [`backward_monotone`].
struct Scratch {
    dm_next: Vec<f64>,
    dm: Vec<f64>,
    dpre: Vec<f64>,
}

impl Scratch {
    fn new(layout: &Layout) -> Self {
        let widest = layout.widths.iter().copied().max().unwrap_or(1);
        Self {
            dm_next: Vec::with_capacity(widest),
            dm: vec![0.0; widest],
            dpre: vec![0.0; widest],
        }
    }
}

/// Backpropagates `g_o = ∂L/∂(output logit)` through the monotone stack whose
/// activations for the current `γ` are in `m`.
#[allow(clippy::too_many_arguments)]
fn backward_monotone(
    layout: &Layout,
    weights: &MonotoneWeights,
    m: &[Vec<f64>],
    g_o: f64,
    du: &mut [Vec<f64>],
    du_out: &mut f64,
    ga: &mut [Vec<f64>],
    ga_out: &mut [f64],
    s: &mut Scratch,
) {
    let depth = layout.depth();
    *du_out += g_o;
    let ml = &m[depth];
    for j in 0..ml.len() {
        ga_out[j] += g_o * ml[j];
    }
    s.dm_next.clear();
    s.dm_next.extend(weights.a_out.iter().map(|a| g_o * a));
    for l in (0..depth).rev() {
        let h = layout.widths[l];
        let im = layout.in_m[l];
        let out = &m[l + 1];
        let inp = &m[l];
        let dpre = &mut s.dpre[..h];
        for j in 0..h {
            dpre[j] = s.dm_next[j] * (1.0 - out[j] * out[j]);
        }
        let gal = &mut ga[l];
        for j in 0..h {
            let d = dpre[j];
            du[l][j] += d;
            let row = &mut gal[j * im..(j + 1) * im];
            for (g, v) in row.iter_mut().zip(inp) {
                *g += d * v;
            }
        }
        if l > 0 {
            let a = &weights.a[l];
            let dm = &mut s.dm[..im];
            dm.iter_mut().for_each(|v| *v = 0.0);
            for j in 0..h {
                let d = dpre[j];
                let row = &a[j * im..(j + 1) * im];
                for (acc, w) in dm.iter_mut().zip(row) {
                    *acc += d * w;
                }
            }
            s.dm_next.clear();
            s.dm_next.extend_from_slice(dm);
        }
    }
}

/// Accumulates squared-error gradients of one calibration point's rows.
///
/// Returns the summed squared error of those rows.
#[allow(clippy::too_many_arguments)]
fn accumulate_point(
    layout: &Layout,
    params: &[f64],
    weights: &MonotoneWeights,
    xs: &[f64],
    rows: impl Iterator<Item = (f64, f64)>,
    scale: f64,
    grad: &mut [f64],
    ga: &mut [Vec<f64>],
    ga_out: &mut [f64],
    m: &mut [Vec<f64>],
) -> f64 {
    let depth = layout.depth();
    let feat = MonotoneNet::feature_forward(layout, params, xs);
    let mut du: Vec<Vec<f64>> = layout.widths.iter().map(|&h| vec![0.0; h]).collect();
    let mut du_out = 0.0;
    let mut scratch = Scratch::new(layout);
    let ends = MonotoneNet::endpoints(layout, weights, &feat, m);
    let (mut c0, mut c1) = (0.0, 0.0);
    let mut sse = 0.0;

    for (gamma, target) in rows {
        let n = MonotoneNet::monotone_forward(layout, weights, &feat, gamma, m);
        let r = ends.output(n);
        let err = r - target;
        sse += err * err;
        let g_r = 2.0 * err * scale;
        if g_r == 0.0 {
            continue;
        }
        // r = (N − N0)·inv with inv = 1 / (N1 − N0).
        if ends.free {
            c0 += g_r * (r - 1.0) * ends.inv;
            c1 -= g_r * r * ends.inv;
        } else {
            c0 -= g_r * ends.inv;
        }
        let g_o = g_r * ends.inv * n * (1.0 - n);
        backward_monotone(layout, weights, m, g_o, &mut du, &mut du_out, ga, ga_out, &mut scratch);
    }
    for (gamma, n, c) in [(0.0, ends.n0, c0), (1.0, ends.n1, c1)] {
        if c != 0.0 {
            MonotoneNet::monotone_forward(layout, weights, &feat, gamma, m);
            backward_monotone(layout, weights, m, c * n * (1.0 - n), &mut du, &mut du_out, ga, ga_out, &mut scratch);
        }
    }

    // Feature stack, once per point.
    let last = layout.last_width();
    grad[layout.out_c] += du_out;
    let zl = &feat.z[depth];
    for j in 0..last {
        grad[layout.out_q + j] += du_out * zl[j];
    }
    let mut dz: Vec<Vec<f64>> = feat.z.iter().map(|z| vec![0.0; z.len()]).collect();
    for j in 0..last {
        dz[depth][j] += du_out * params[layout.out_q + j];
    }
    for l in (0..depth).rev() {
        let h = layout.widths[l];
        let ix = layout.in_x[l];
        let zn = &feat.z[l + 1];
        for j in 0..h {
            let d = du[l][j];
            grad[layout.c[l] + j] += d;
            let qrow = layout.q[l] + j * h;
            for k in 0..h {
                grad[qrow + k] += d * zn[k];
                dz[l + 1][k] += d * params[qrow + k];
            }
        }
        let zp = &feat.z[l];
        let mut dprev = vec![0.0; ix];
        for j in 0..h {
            if zn[j] <= 0.0 {
                continue;
            }
            let d = dz[l + 1][j];
            grad[layout.bx[l] + j] += d;
            let wrow = layout.wx[l] + j * ix;
            for k in 0..ix {
                grad[wrow + k] += d * zp[k];
                dprev[k] += d * params[wrow + k];
            }
        }
        if l > 0 {
            for k in 0..ix {
                dz[l][k] += dprev[k];
            }
        }
    }
    sse
}

/// Trains the network on an augmented calibration set.
///
/// Calibration points (not rows) are split into training and validation
/// parts, so validation measures generalization across `x`. Validation loss is
/// the squared error of `r̂(γ; x)` against `1{PIT ≤ γ}` on the fixed γ-grid;
/// the parameters with the lowest validation loss are kept.
pub fn fit_monotone_net(
    aug: &AugmentedCalibrationSet,
    config: &MonotoneNetConfig,
) -> Result<MonotoneNet, CalibrateError> {
    config.validate()?;
    let n = aug.n_points();
    if n < 2 {
        return Err(CalibrateError::InsufficientData { needed: 2, available: n });
    }
    let dim = aug.dim();
    let k = aug.k_factor();
    let (x_mean, x_scale) = feature_moments(aug.features(), dim);
    let xs: Vec<f64> = if dim == 0 {
        Vec::new()
    } else {
        aug.features()
            .chunks_exact(dim)
            .flat_map(|row| (0..dim).map(|j| (row[j] - x_mean[j]) / x_scale[j]).collect::<Vec<_>>())
            .collect()
    };
    let point_x = |i: usize| &xs[i * dim..(i + 1) * dim];

    let layout = Layout::new(dim, &config.hidden_layers);
    let mut rng = rng::stream(rng::derive(config.seed, "monotone-net"));
    let mut params = init_params(&layout, &mut rng);

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let n_val = ((n as f64 * config.val_fraction).round() as usize).clamp(1, n - 1);
    let val_points: Vec<usize> = order[..n_val].to_vec();
    let mut train_points: Vec<usize> = order[n_val..].to_vec();
    let val_gammas = config.validation_gammas();

    let points_per_batch = ((config.batch_size as f64 / k as f64).round() as usize).max(1);
    let monotone_ranges = layout.monotone_ranges();
    let mut adam = Adam::new(layout.total);
    let mut grad = vec![0.0; layout.total];
    let mut m_buf = MonotoneNet::activation_buffers(&layout);

    let mut report = TrainingReport {
        best_val_mse: f64::INFINITY,
        ..Default::default()
    };
    let mut best = params.clone();
    let mut since_best = 0;

    for epoch in 0..config.max_epochs {
        let lr = config.learning_rate * config.lr_decay.powi(epoch as i32);
        train_points.shuffle(&mut rng);
        let mut sse = 0.0;
        for batch in train_points.chunks(points_per_batch) {
            let weights = MonotoneNet::monotone_weights(&layout, &params);
            let mut ga: Vec<Vec<f64>> = weights.a.iter().map(|a| vec![0.0; a.len()]).collect();
            let mut ga_out = vec![0.0; layout.last_width()];
            grad.iter_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / (batch.len() * k) as f64;
            for &i in batch {
                let rows = (i * k..(i + 1) * k).map(|r| (aug.gammas()[r], f64::from(u8::from(aug.indicators()[r]))));
                sse += accumulate_point(
                    &layout,
                    &params,
                    &weights,
                    point_x(i),
                    rows,
                    scale,
                    &mut grad,
                    &mut ga,
                    &mut ga_out,
                    &mut m_buf,
                );
            }
            // Chain rule through softplus: d softplus(r) / dr = sigmoid(r).
            for (l, range) in monotone_ranges.iter().enumerate() {
                let src: &[f64] = if l < ga.len() { &ga[l] } else { &ga_out };
                for (off, g) in range.clone().zip(src) {
                    grad[off] += g * sigmoid(params[off]);
                }
            }
            adam.step(&mut params, &grad, lr, config.weight_decay);
        }
        let train_mse = sse / (train_points.len() * k) as f64;

        let weights = MonotoneNet::monotone_weights(&layout, &params);
        let mut val_sse = 0.0;
        for &i in &val_points {
            let feat = MonotoneNet::feature_forward(&layout, &params, point_x(i));
            let ends = MonotoneNet::endpoints(&layout, &weights, &feat, &mut m_buf);
            let pit = aug.point_pit(i);
            for &g in &val_gammas {
                let r = ends.output(MonotoneNet::monotone_forward(&layout, &weights, &feat, g, &mut m_buf));
                let target = if pit <= g { 1.0 } else { 0.0 };
                val_sse += (r - target) * (r - target);
            }
        }
        let val_mse = val_sse / (val_points.len() * val_gammas.len()) as f64;
        if !train_mse.is_finite() || !val_mse.is_finite() {
            return Err(CalibrateError::TrainingDiverged { epoch });
        }
        report.epochs.push(EpochStats {
            epoch,
            learning_rate: lr,
            train_mse,
            val_mse,
        });
        if val_mse < report.best_val_mse {
            report.best_val_mse = val_mse;
            report.best_epoch = epoch;
            best.copy_from_slice(&params);
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                break;
            }
        }
    }

    Ok(MonotoneNet {
        config: config.clone(),
        dim,
        x_mean,
        x_scale,
        params: best,
        report,
    })
}

/// Network backend as a fit procedure: augment with factor `k_factor`, then train.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetRegression {
    pub config: MonotoneNetConfig,
    pub k_factor: usize,
}

impl NetRegression {
    /// Like [`PitRegression::fit`], returning the concrete network.
    pub fn fit_net(&self, cal: &CalibrationSet, pit_values: &[f64], seed: u64) -> Result<MonotoneNet, CalibrateError> {
        let aug = augment(cal, pit_values, self.k_factor, rng::derive(seed, "augment"))?;
        let config = MonotoneNetConfig {
            seed: rng::derive(seed, "net"),
            ..self.config.clone()
        };
        fit_monotone_net(&aug, &config)
    }
}

impl PitRegression for NetRegression {
    fn fit(
        &self,
        cal: &CalibrationSet,
        pit_values: &[f64],
        seed: u64,
    ) -> Result<Box<dyn PitCdfModel>, CalibrateError> {
        Ok(Box::new(self.fit_net(cal, pit_values, seed)?))
    }

    fn backend(&self) -> Backend {
        Backend::MonotoneNet
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> MonotoneNetConfig {
        MonotoneNetConfig {
            hidden_layers: vec![6, 5],
            max_epochs: 3,
            seed: 3,
            ..Default::default()
        }
    }

    fn tiny_aug(n: usize) -> AugmentedCalibrationSet {
        let mut cal = CalibrationSet::new(2);
        let mut pits = Vec::new();
        for i in 0..n {
            let a = rng::uniform_open(1, i as u64, 0);
            let b = rng::uniform_open(1, i as u64, 1);
            cal.push(&[a, b], 0.0).unwrap();
            pits.push(rng::uniform_open(2, i as u64, 0).powf(1.0 + a));
        }
        augment(&cal, &pits, 10, 5).unwrap()
    }

    /// Squared-error loss of the whole augmented set, evaluated independently
    /// of the backward pass.
    fn total_loss(net: &MonotoneNet, aug: &AugmentedCalibrationSet) -> f64 {
        aug.rows()
            .map(|(x, g, w)| {
                let r = net.predict(g, x);
                let t = if w { 1.0 } else { 0.0 };
                (r - t) * (r - t)
            })
            .sum::<f64>()
            / aug.len() as f64
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let aug = tiny_aug(12);
        let config = tiny_config();
        let (x_mean, x_scale) = feature_moments(aug.features(), 2);
        let layout = Layout::new(2, &config.hidden_layers);
        let mut rng = rng::stream(11);
        let params = init_params(&layout, &mut rng);
        let mut net = MonotoneNet {
            config: config.clone(),
            dim: 2,
            x_mean: x_mean.clone(),
            x_scale: x_scale.clone(),
            params: params.clone(),
            report: TrainingReport::default(),
        };

        let weights = MonotoneNet::monotone_weights(&layout, &params);
        let mut grad = vec![0.0; layout.total];
        let mut ga: Vec<Vec<f64>> = weights.a.iter().map(|a| vec![0.0; a.len()]).collect();
        let mut ga_out = vec![0.0; layout.last_width()];
        let mut m = MonotoneNet::activation_buffers(&layout);
        let k = aug.k_factor();
        let scale = 1.0 / aug.len() as f64;
        for i in 0..aug.n_points() {
            let xs: Vec<f64> = (0..2).map(|j| (aug.point_features(i)[j] - x_mean[j]) / x_scale[j]).collect();
            let rows = (i * k..(i + 1) * k).map(|r| (aug.gammas()[r], f64::from(u8::from(aug.indicators()[r]))));
            accumulate_point(&layout, &params, &weights, &xs, rows, scale, &mut grad, &mut ga, &mut ga_out, &mut m);
        }
        for (l, range) in layout.monotone_ranges().iter().enumerate() {
            let src: &[f64] = if l < ga.len() { &ga[l] } else { &ga_out };
            for (off, g) in range.clone().zip(src) {
                grad[off] += g * sigmoid(params[off]);
            }
        }

        let h = 1e-6;
        for idx in (0..layout.total).step_by(3) {
            net.params[idx] = params[idx] + h;
            let up = total_loss(&net, &aug);
            net.params[idx] = params[idx] - h;
            let down = total_loss(&net, &aug);
            net.params[idx] = params[idx];
            let numeric = (up - down) / (2.0 * h);
            assert!(
                (numeric - grad[idx]).abs() <= 1e-6 + 1e-4 * numeric.abs(),
                "param {idx}: analytic {} numeric {numeric}",
                grad[idx]
            );
        }
    }

    #[test]
    fn monotone_for_arbitrary_parameters() {
        let layout = Layout::new(3, &[8, 8, 4]);
        let mut rng = rng::stream(21);
        let params: Vec<f64> = (0..layout.total).map(|_| { let z: f64 = StandardNormal.sample(&mut rng); 3.0 * z }).collect();
        let net = MonotoneNet {
            config: MonotoneNetConfig {
                hidden_layers: vec![8, 8, 4],
                ..Default::default()
            },
            dim: 3,
            x_mean: vec![0.0; 3],
            x_scale: vec![1.0; 3],
            params,
            report: TrainingReport::default(),
        };
        let gammas: Vec<f64> = (0..=200).map(|i| i as f64 / 200.0).collect();
        for t in 0..50u64 {
            let x: Vec<f64> = (0..3).map(|j| 4.0 * rng::uniform_open(8, t, j) - 2.0).collect();
            let c = net.predict_curve(&gammas, &x);
            assert!(c.windows(2).all(|w| w[1] >= w[0]));
            assert!(c.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn curve_is_pinned_at_the_ends() {
        let layout = Layout::new(2, &[6, 5]);
        let mut rng = rng::stream(5);
        for trial in 0..20u64 {
            let params: Vec<f64> = (0..layout.total).map(|_| StandardNormal.sample(&mut rng)).collect();
            let net = MonotoneNet {
                config: MonotoneNetConfig {
                    hidden_layers: vec![6, 5],
                    ..Default::default()
                },
                dim: 2,
                x_mean: vec![0.0; 2],
                x_scale: vec![1.0; 2],
                params,
                report: TrainingReport::default(),
            };
            let x = [rng::uniform_open(9, trial, 0), rng::uniform_open(9, trial, 1)];
            assert_eq!(net.predict(0.0, &x), 0.0);
            assert!((net.predict(1.0, &x) - 1.0).abs() < 1e-12);
            let c = net.predict_curve(&[0.0, 0.5, 1.0], &x);
            assert_eq!(c[0], 0.0);
            assert!((c[2] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn training_is_deterministic_and_reduces_loss() {
        let aug = tiny_aug(200);
        let config = MonotoneNetConfig {
            hidden_layers: vec![8, 8],
            max_epochs: 15,
            learning_rate: 1e-2,
            seed: 4,
            batch_size: 256,
            ..Default::default()
        };
        let a = fit_monotone_net(&aug, &config).unwrap();
        let b = fit_monotone_net(&aug, &config).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.report, b.report);
        let first = a.report.epochs[0].train_mse;
        let last = a.report.epochs.last().unwrap().train_mse;
        assert!(last < first, "{first} -> {last}");
    }

    #[test]
    fn early_stopping_respects_patience() {
        let aug = tiny_aug(100);
        let config = MonotoneNetConfig {
            hidden_layers: vec![4],
            max_epochs: 500,
            patience: 2,
            learning_rate: 0.05,
            seed: 9,
            ..Default::default()
        };
        let net = fit_monotone_net(&aug, &config).unwrap();
        let r = net.report();
        assert!(r.epochs.len() < 500);
        assert_eq!(r.epochs.len(), r.best_epoch + 1 + config.patience);
    }

    #[test]
    fn divergence_is_reported() {
        let aug = tiny_aug(50);
        let config = MonotoneNetConfig {
            hidden_layers: vec![4],
            learning_rate: f64::MAX,
            max_epochs: 5,
            ..Default::default()
        };
        assert!(matches!(
            fit_monotone_net(&aug, &config),
            Err(CalibrateError::TrainingDiverged { .. })
        ));
    }

    #[test]
    fn config_validation() {
        let mut c = MonotoneNetConfig::default();
        assert!(c.validate().is_ok());
        c.val_fraction = 1.0;
        assert!(c.validate().is_err());
        let c = MonotoneNetConfig {
            hidden_layers: vec![4, 0],
            ..Default::default()
        };
        assert!(c.validate().is_err());
        let c = MonotoneNetConfig {
            patience: 0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        assert_eq!(MonotoneNetConfig::default().validation_gammas().len(), 41);
    }

    #[test]
    fn serde_round_trip_preserves_predictions() {
        let aug = tiny_aug(60);
        let net = fit_monotone_net(&aug, &tiny_config()).unwrap();
        let json = serde_json::to_string(&net).unwrap();
        let back: MonotoneNet = serde_json::from_str(&json).unwrap();
        for g in [0.1, 0.5, 0.9] {
            assert_eq!(net.predict(g, &[0.3, 0.2]), back.predict(g, &[0.3, 0.2]));
        }
    }
}
