//! Soft-margin SVM dual solver and the trained model.
//!
//! The dual is solved in its minimization form
//!
//! ```text
//! min_a  f(a) = 1/2 a^T Q a - e^T a,   Q_ij = y_i y_j K(x_i, x_j)
//! s.t.   y^T a = 0,  0 <= a_i <= C
//! ```
//!
//! by SMO with maximal-violating-pair working sets. The reported
//! `dual_objective` is `-f(a)`, the value of the usual maximization form.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datasets::{Dataset, RescaleMap};
use crate::error::{OrcaError, Result};
use crate::kernel::{self, GramMatrix, KernelSpec, UnivariateTable};
use crate::orthopoly::{JacobiParams, OrthonormalBasis};

/// Hard cap on SMO pair updates, whatever the pass budget.
pub const MAX_UPDATES: usize = 10_000_000;

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SvmConfig {
    /// Box bound `C`.
    pub cost: f64,
    /// Stopping tolerance on the maximal KKT violation.
    pub kkt_tol: f64,
    /// Budget in full working-set sweeps of `m` pair updates each; `None`
    /// means `10 m`. Never exceeds [`MAX_UPDATES`] updates in total.
    pub max_passes: Option<usize>,
    /// Seeds the scan order used to break ties in working-set selection.
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            cost: 1.0,
            kkt_tol: 1e-6,
            max_passes: None,
            seed: 0,
        }
    }
}

impl SvmConfig {
    pub fn with_cost(cost: f64) -> Self {
        Self {
            cost,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.cost > 0.0) || !self.cost.is_finite() {
            return Err(OrcaError::InvalidConfig(format!(
                "cost must be positive, got {}",
                self.cost
            )));
        }
        if !(self.kkt_tol > 0.0) {
            return Err(OrcaError::InvalidConfig(format!(
                "kkt_tol must be positive, got {}",
                self.kkt_tol
            )));
        }
        Ok(())
    }
}

/// A trained classifier `g(x) = sum_i s_i K(x_i, x) + b` with `s_i = a_i y_i`.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    spec: KernelSpec,
    rescale: RescaleMap,
    inputs: Vec<Vec<f64>>,
    signed_duals: Vec<f64>,
    bias: f64,
    cost: f64,
    dual_objective: f64,
    converged: bool,
    table: UnivariateTable,
}

impl TrainedModel {
    /// Assembles a model from its parts. `inputs` must already be rescaled.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        spec: KernelSpec,
        rescale: RescaleMap,
        inputs: Vec<Vec<f64>>,
        signed_duals: Vec<f64>,
        bias: f64,
        cost: f64,
        dual_objective: f64,
        converged: bool,
    ) -> Result<Self> {
        if inputs.len() != signed_duals.len() {
            return Err(OrcaError::DimensionMismatch {
                expected: inputs.len(),
                actual: signed_duals.len(),
            });
        }
        if rescale.dim() != spec.dim() {
            return Err(OrcaError::DimensionMismatch {
                expected: spec.dim(),
                actual: rescale.dim(),
            });
        }
        let table = UnivariateTable::new(&spec, &inputs)?;
        Ok(Self {
            spec,
            rescale,
            inputs,
            signed_duals,
            bias,
            cost,
            dual_objective,
            converged,
            table,
        })
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn rescale_map(&self) -> &RescaleMap {
        &self.rescale
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn signed_duals(&self) -> &[f64] {
        &self.signed_duals
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn cost(&self) -> f64 {
        self.cost
    }

    pub fn dual_objective(&self) -> f64 {
        self.dual_objective
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn support_vector_count(&self) -> usize {
        self.signed_duals.iter().filter(|&&s| s != 0.0).count()
    }

    pub(crate) fn table(&self) -> &UnivariateTable {
        &self.table
    }

    /// `g` at a raw (unscaled) point.
    pub fn decision_function(&self, x_raw: &[f64]) -> Result<f64> {
        let x = self.rescale.apply(x_raw)?;
        self.decision_function_scaled(&x)
    }

    /// `g` at a point already mapped into `[-1, 1]^d`.
    pub fn decision_function_scaled(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.spec.dim() {
            return Err(OrcaError::DimensionMismatch {
                expected: self.spec.dim(),
                actual: x.len(),
            });
        }
        let phi = x
            .iter()
            .map(|&v| self.spec.basis().evaluate_all(v))
            .collect::<Result<Vec<_>>>()?;
        let mut acc = 0.0;
        for (i, &s) in self.signed_duals.iter().enumerate() {
            if s != 0.0 {
                acc += s * self.table.kernel_with(i, &phi);
            }
        }
        Ok(acc + self.bias)
    }

    /// Predicted label at a raw point; `g = 0` maps to `+1`.
    pub fn predict(&self, x_raw: &[f64]) -> Result<f64> {
        Ok(sign(self.decision_function(x_raw)?))
    }

    /// Fraction of `data` classified correctly, using its rescaled rows.
    pub fn accuracy(&self, data: &Dataset) -> Result<f64> {
        let mut hits = 0usize;
        for (x, &y) in data.rescaled().iter().zip(data.labels()) {
            if sign(self.decision_function_scaled(x)?) == y {
                hits += 1;
            }
        }
        Ok(hits as f64 / data.len() as f64)
    }

    /// Largest violation of the KKT conditions over the training inputs,
    /// given their labels. Each `a_i` is read off as `|s_i|`.
    pub fn kkt_residual(&self, labels: &[f64]) -> Result<f64> {
        let gram = kernel::gram_from_rows(&self.spec, &self.inputs)?;
        Ok(kkt_residual_with(
            &gram,
            &self.signed_duals,
            labels,
            self.bias,
            self.cost,
        ))
    }

    pub fn to_document(&self) -> ModelDocument {
        let p = self.spec.params();
        ModelDocument {
            jacobi: JacobiDoc {
                alpha: p.alpha,
                beta: p.beta,
            },
            degree: self.spec.degree(),
            d: self.spec.dim(),
            cost: self.cost,
            bias: self.bias,
            rescale: self.rescale.clone(),
            samples: self.inputs.clone(),
            signed_duals: self.signed_duals.clone(),
            dual_objective: self.dual_objective,
            converged: self.converged,
        }
    }

    pub fn from_document(doc: ModelDocument) -> Result<Self> {
        let params = JacobiParams::new(doc.jacobi.alpha, doc.jacobi.beta)?;
        let spec = KernelSpec::new(OrthonormalBasis::new(params, doc.degree)?, doc.d)?;
        Self::from_parts(
            spec,
            doc.rescale,
            doc.samples,
            doc.signed_duals,
            doc.bias,
            doc.cost,
            doc.dual_objective,
            doc.converged,
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_document(serde_json::from_str(text)?)
    }
}

pub fn sign(g: f64) -> f64 {
    if g >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JacobiDoc {
    pub alpha: f64,
    pub beta: f64,
}

/// On-disk JSON form of a [`TrainedModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub jacobi: JacobiDoc,
    pub degree: usize,
    pub d: usize,
    pub cost: f64,
    pub bias: f64,
    pub rescale: RescaleMap,
    pub samples: Vec<Vec<f64>>,
    pub signed_duals: Vec<f64>,
    pub dual_objective: f64,
    pub converged: bool,
}

fn kkt_residual_with(gram: &GramMatrix, s: &[f64], y: &[f64], bias: f64, cost: f64) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..s.len() {
        let f: f64 = kernel::dot(gram.row(i), s);
        let margin = y[i] * (f + bias);
        let a = s[i] * y[i];
        let v = if a <= 0.0 {
            (1.0 - margin).max(0.0)
        } else if a >= cost {
            (margin - 1.0).max(0.0)
        } else {
            (margin - 1.0).abs()
        };
        worst = worst.max(v);
    }
    worst
}

struct Smo<'a> {
    gram: &'a GramMatrix,
    y: &'a [f64],
    cost: f64,
    alpha: Vec<f64>,
    grad: Vec<f64>,
    order: Vec<usize>,
}

impl<'a> Smo<'a> {
    fn new(gram: &'a GramMatrix, y: &'a [f64], cost: f64, seed: u64) -> Self {
        let m = y.len();
        let mut order: Vec<usize> = (0..m).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        Self {
            gram,
            y,
            cost,
            alpha: vec![0.0; m],
            grad: vec![-1.0; m],
            order,
        }
    }

    fn q(&self, i: usize, j: usize) -> f64 {
        self.y[i] * self.y[j] * self.gram.get(i, j)
    }

    fn in_up(&self, t: usize) -> bool {
        (self.y[t] > 0.0 && self.alpha[t] < self.cost) || (self.y[t] < 0.0 && self.alpha[t] > 0.0)
    }

    fn in_low(&self, t: usize) -> bool {
        (self.y[t] < 0.0 && self.alpha[t] < self.cost) || (self.y[t] > 0.0 && self.alpha[t] > 0.0)
    }

    /// Maximal violating pair and the gap `m(a) - M(a)`.
    fn select(&self) -> Option<(usize, usize, f64)> {
        let mut up = None;
        let mut up_val = f64::NEG_INFINITY;
        let mut low = None;
        let mut low_val = f64::INFINITY;
        for &t in &self.order {
            let v = -self.y[t] * self.grad[t];
            if self.in_up(t) && v > up_val {
                up_val = v;
                up = Some(t);
            }
            if self.in_low(t) && v < low_val {
                low_val = v;
                low = Some(t);
            }
        }
        Some((up?, low?, up_val - low_val))
    }

    fn objective(&self) -> f64 {
        0.5 * self
            .alpha
            .iter()
            .zip(&self.grad)
            .map(|(a, g)| a * (g - 1.0))
            .sum::<f64>()
    }

    fn refresh_gradient(&mut self) {
        let m = self.y.len();
        for t in 0..m {
            let mut acc = 0.0;
            for l in 0..m {
                if self.alpha[l] != 0.0 {
                    acc += self.q(t, l) * self.alpha[l];
                }
            }
            self.grad[t] = acc - 1.0;
        }
    }

    /// Two-variable subproblem on `(i, j)`, following the clipping scheme
    /// of LIBSVM's solver.
    fn update(&mut self, i: usize, j: usize) {
        let c = self.cost;
        let (yi, yj) = (self.y[i], self.y[j]);
        let (old_i, old_j) = (self.alpha[i], self.alpha[j]);
        let qii = self.gram.get(i, i);
        let qjj = self.gram.get(j, j);
        let qij = self.q(i, j);
        let (gi, gj) = (self.grad[i], self.grad[j]);
        let (mut ai, mut aj) = (old_i, old_j);
        if yi != yj {
            let quad = (qii + qjj + 2.0 * qij).max(TAU);
            let delta = (-gi - gj) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let quad = (qii + qjj - 2.0 * qij).max(TAU);
            let delta = (gi - gj) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }
        ai = ai.clamp(0.0, c);
        aj = aj.clamp(0.0, c);
        let (di, dj) = (ai - old_i, aj - old_j);

        #[cfg(debug_assertions)]
        {
            let change = gi * di + gj * dj + 0.5 * (qii * di * di + qjj * dj * dj) + qij * di * dj;
            let scale = (qii + qjj).max(1.0) * (di.abs() + dj.abs()).powi(2)
                + gi.abs() * di.abs()
                + gj.abs() * dj.abs();
            debug_assert!(
                change <= 1e-9 * scale.max(1e-300),
                "dual objective decreased by {change}"
            );
        }

        self.alpha[i] = ai;
        self.alpha[j] = aj;
        if di == 0.0 && dj == 0.0 {
            return;
        }
        for t in 0..self.y.len() {
            self.grad[t] += self.q(t, i) * di + self.q(t, j) * dj;
        }
    }

    /// Snaps multipliers within rounding of a bound onto it, then pulls
    /// `y^T a` back to zero by moving one free variable. Touching a bounded
    /// one would make it look free and skew the bias.
    fn restore_equality(&mut self) {
        let c = self.cost;
        let snap = 1e-12 * c;
        for a in &mut self.alpha {
            if *a < snap {
                *a = 0.0;
            } else if *a > c - snap {
                *a = c;
            }
        }
        let r: f64 = self.alpha.iter().zip(self.y).map(|(a, y)| a * y).sum();
        if r == 0.0 {
            return;
        }
        let free_fit = |a: f64, target: f64| a > 0.0 && a < c && target > 0.0 && target < c;
        let any_fit = |_: f64, target: f64| (0.0..=c).contains(&target);
        for fits in [&free_fit as &dyn Fn(f64, f64) -> bool, &any_fit] {
            for &t in &self.order {
                let target = self.alpha[t] - self.y[t] * r;
                if fits(self.alpha[t], target) {
                    self.alpha[t] = target;
                    return;
                }
            }
        }
    }
}

/// Trains a soft-margin SVM on the rescaled rows of `data`.
///
/// Models that exhaust the update budget are returned with
/// `converged() == false` rather than as an error.
pub fn train(spec: &KernelSpec, data: &Dataset, config: &SvmConfig) -> Result<TrainedModel> {
    config.validate()?;
    if data.dim() != spec.dim() {
        return Err(OrcaError::DimensionMismatch {
            expected: spec.dim(),
            actual: data.dim(),
        });
    }
    let y = data.labels();
    if !(y.iter().any(|&v| v > 0.0) && y.iter().any(|&v| v < 0.0)) {
        return Err(OrcaError::SingleClassData);
    }
    let gram = kernel::gram(spec, data)?;
    let m = data.len();
    let cap = config
        .max_passes
        .unwrap_or(10 * m)
        .saturating_mul(m)
        .min(MAX_UPDATES);
    let mut smo = Smo::new(&gram, y, config.cost, config.seed);

    let mut updates = 0usize;
    let mut refreshes = 0usize;
    let mut hit_cap = false;
    while let Some((i, j, gap)) = smo.select() {
        if gap <= config.kkt_tol {
            // Incremental gradients drift; confirm against a fresh one.
            smo.refresh_gradient();
            refreshes += 1;
            match smo.select() {
                Some((_, _, fresh)) if fresh > config.kkt_tol && refreshes < 20 => continue,
                _ => break,
            }
        }
        if updates >= cap {
            hit_cap = true;
            break;
        }
        smo.update(i, j);
        updates += 1;
    }
    smo.restore_equality();
    smo.refresh_gradient();

    let bias = bias_from_gradient(&smo);
    let signed: Vec<f64> = smo.alpha.iter().zip(y).map(|(a, y)| a * y).collect();
    let dual_objective = -smo.objective();
    let residual = kkt_residual_with(&gram, &signed, y, bias, config.cost);
    let converged = if hit_cap {
        residual <= 10.0 * config.kkt_tol
    } else {
        true
    };
    log::debug!(
        "smo: {updates} updates, {refreshes} gradient refreshes, kkt residual {residual:.3e}"
    );
    if !converged {
        log::warn!("SMO hit the update cap with KKT residual {residual:.3e}");
    }
    TrainedModel::from_parts(
        spec.clone(),
        data.rescale_map().clone(),
        data.rescaled().to_vec(),
        signed,
        bias,
        config.cost,
        dual_objective,
        converged,
    )
}

/// Average of `y_i - f(x_i)` over free variables, or the midpoint of the
/// interval of biases consistent with the bounded ones.
fn bias_from_gradient(smo: &Smo<'_>) -> f64 {
    let c = smo.cost;
    let mut free_sum = 0.0;
    let mut free = 0usize;
    let mut lower = f64::NEG_INFINITY;
    let mut upper = f64::INFINITY;
    for t in 0..smo.y.len() {
        // -y_t G_t = y_t - f(x_t)
        let v = -smo.y[t] * smo.grad[t];
        let a = smo.alpha[t];
        if a > 0.0 && a < c {
            free_sum += v;
            free += 1;
        } else if (a <= 0.0) == (smo.y[t] > 0.0) {
            lower = lower.max(v);
        } else {
            upper = upper.min(v);
        }
    }
    if free > 0 {
        return free_sum / free as f64;
    }
    match (lower.is_finite(), upper.is_finite()) {
        (true, true) => 0.5 * (lower + upper),
        (true, false) => lower,
        (false, true) => upper,
        (false, false) => 0.0,
    }
}
