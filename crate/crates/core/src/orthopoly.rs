//! Orthonormal Jacobi polynomials on `[-1, 1]`.
//!
//! The family `p_0, p_1, ...` is orthonormal with respect to the weight
//! `w(x) = (1 - x)^alpha (1 + x)^beta`. Values are produced by a forward
//! three-term recurrence whose coefficients come from the classical Jacobi
//! recurrence rescaled by ratios of the squared norms `h_k`. The norms
//! themselves involve Gamma functions that overflow long before the degrees
//! we support, so everything normalization-related is done in log space.
//!
//! ```
//! use orca_core::orthopoly::{JacobiParams, OrthonormalBasis};
//!
//! let basis = OrthonormalBasis::new(JacobiParams::legendre(), 2).unwrap();
//! let p = basis.evaluate_all(0.0).unwrap();
//! assert!((p[0] - 0.5f64.sqrt()).abs() < 1e-15);
//! assert!(p[1].abs() < 1e-15);
//! assert!((p[2] + (5.0f64 / 8.0).sqrt()).abs() < 1e-15);
//! ```

pub mod quadrature;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{OrcaError, Result};

/// Largest truncation degree accepted by [`OrthonormalBasis::new`].
pub const MAX_DEGREE: usize = 200;

/// Inputs may overshoot `[-1, 1]` by this much (rescaling round-off) and
/// are clamped; anything further out is rejected.
pub const DOMAIN_SLACK: f64 = 1e-9;

/// Exponents of the Jacobi weight `(1 - x)^alpha (1 + x)^beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JacobiParams {
    pub alpha: f64,
    pub beta: f64,
}

impl JacobiParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        // NaN fails both comparisons and is rejected as well.
        if !(alpha > -1.0 && beta > -1.0) || !alpha.is_finite() || !beta.is_finite() {
            return Err(OrcaError::InvalidParams { alpha, beta });
        }
        Ok(Self { alpha, beta })
    }

    pub const fn legendre() -> Self {
        Self {
            alpha: 0.0,
            beta: 0.0,
        }
    }

    pub fn is_legendre(&self) -> bool {
        self.alpha == 0.0 && self.beta == 0.0
    }

    /// Weight density at `x`.
    pub fn weight(&self, x: f64) -> f64 {
        (1.0 - x).powf(self.alpha) * (1.0 + x).powf(self.beta)
    }

    /// `ln h_k`, the log squared norm of the classical polynomial `P_k`.
    pub fn ln_norm_sq(&self, k: usize) -> f64 {
        let (a, b) = (self.alpha, self.beta);
        let ab = a + b;
        let k = k as f64;
        let lead = (ab + 1.0) * std::f64::consts::LN_2;
        if k == 0.0 {
            // (2k + ab + 1) Gamma(k + ab + 1) collapses to Gamma(ab + 2), which
            // stays finite when ab = -1.
            return lead + ln_gamma(a + 1.0) + ln_gamma(b + 1.0) - ln_gamma(ab + 2.0);
        }
        lead + ln_gamma(k + a + 1.0) + ln_gamma(k + b + 1.0)
            - (2.0 * k + ab + 1.0).ln()
            - ln_gamma(k + 1.0)
            - ln_gamma(k + ab + 1.0)
    }

    /// `h_k`. Finite for every supported degree, though the Gamma factors
    /// inside it are not.
    pub fn norm_sq(&self, k: usize) -> f64 {
        self.ln_norm_sq(k).exp()
    }

    /// `ln(h_k / h_{k+1})`, reduced to logs of the linear factors left over
    /// once the Gamma ratios telescope.
    fn ln_norm_ratio(&self, k: usize) -> f64 {
        let (a, b) = (self.alpha, self.beta);
        let ab = a + b;
        let k = k as f64;
        if k == 0.0 {
            return (ab + 3.0).ln() - (a + 1.0).ln() - (b + 1.0).ln();
        }
        (2.0 * k + ab + 3.0).ln() + (k + 1.0).ln() + (k + ab + 1.0).ln()
            - (2.0 * k + ab + 1.0).ln()
            - (k + a + 1.0).ln()
            - (k + b + 1.0).ln()
    }

    /// Classical recurrence `P_{k+1} = (a x + b) P_k - c P_{k-1}`.
    fn classical_recurrence(&self, k: usize) -> (f64, f64, f64) {
        let (a, b) = (self.alpha, self.beta);
        let ab = a + b;
        if k == 0 {
            return ((ab + 2.0) / 2.0, (a - b) / 2.0, 0.0);
        }
        let k = k as f64;
        let s = 2.0 * k + ab;
        let den = 2.0 * (k + 1.0) * (k + ab + 1.0) * s;
        (
            (s + 1.0) * (s + 2.0) * s / den,
            (s + 1.0) * (a * a - b * b) / den,
            2.0 * (k + a) * (k + b) * (s + 2.0) / den,
        )
    }
}

/// Orthonormal Jacobi family `p_0..p_n`, plus enough data to produce
/// `p_{n+1}` for the Christoffel–Darboux closed form.
///
/// The orthonormal recurrence reads
/// `p_{k+1}(x) = (recur_a[k] x + recur_b[k]) p_k(x) - recur_c[k] p_{k-1}(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthonormalBasis {
    params: JacobiParams,
    n: usize,
    recur_a: Vec<f64>,
    recur_b: Vec<f64>,
    recur_c: Vec<f64>,
    leading: Vec<f64>,
    p0: f64,
}

impl OrthonormalBasis {
    pub fn new(params: JacobiParams, n: usize) -> Result<Self> {
        let params = JacobiParams::new(params.alpha, params.beta)?;
        if n > MAX_DEGREE {
            return Err(OrcaError::DegreeTooLarge(n));
        }
        let mut recur_a = Vec::with_capacity(n + 1);
        let mut recur_b = Vec::with_capacity(n + 1);
        let mut recur_c = Vec::with_capacity(n + 1);
        let mut prev_ratio = 0.0;
        for k in 0..=n {
            let (a, b, c) = params.classical_recurrence(k);
            let ratio = params.ln_norm_ratio(k);
            // sqrt(h_k / h_{k+1}) and sqrt(h_{k-1} / h_{k+1})
            let r1 = (0.5 * ratio).exp();
            let r2 = (0.5 * (ratio + prev_ratio)).exp();
            recur_a.push(a * r1);
            recur_b.push(b * r1);
            recur_c.push(if k == 0 { 0.0 } else { c * r2 });
            prev_ratio = ratio;
        }
        let p0 = (-0.5 * params.ln_norm_sq(0)).exp();
        let mut leading = Vec::with_capacity(n + 2);
        leading.push(p0);
        for k in 0..=n {
            leading.push(leading[k] * recur_a[k]);
        }
        Ok(Self {
            params,
            n,
            recur_a,
            recur_b,
            recur_c,
            leading,
            p0,
        })
    }

    pub fn params(&self) -> JacobiParams {
        self.params
    }

    /// Truncation degree `n`.
    pub fn degree(&self) -> usize {
        self.n
    }

    /// Number of modes, `n + 1`.
    pub fn len(&self) -> usize {
        self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn recur_a(&self) -> &[f64] {
        &self.recur_a
    }

    pub fn recur_b(&self) -> &[f64] {
        &self.recur_b
    }

    pub fn recur_c(&self) -> &[f64] {
        &self.recur_c
    }

    /// Leading coefficients `kappa_0..kappa_{n+1}`, all positive.
    pub fn leading(&self) -> &[f64] {
        &self.leading
    }

    /// The constant `p_0 = 1 / sqrt(h_0)`.
    pub fn constant_mode(&self) -> f64 {
        self.p0
    }

    /// Validates `x` against `[-1, 1]` with [`DOMAIN_SLACK`] and clamps it.
    pub fn check_domain(x: f64) -> Result<f64> {
        if !(-1.0 - DOMAIN_SLACK..=1.0 + DOMAIN_SLACK).contains(&x) {
            return Err(OrcaError::OutOfDomain { value: x });
        }
        Ok(x.clamp(-1.0, 1.0))
    }

    /// `[p_0(x), ..., p_n(x)]`.
    pub fn evaluate_all(&self, x: f64) -> Result<Vec<f64>> {
        let x = Self::check_domain(x)?;
        let mut out = vec![0.0; self.n + 1];
        self.fill(x, &mut out);
        Ok(out)
    }

    /// Writes `p_0(x)..p_{out.len()-1}(x)` into `out` without any domain
    /// check. `out.len()` may be at most `n + 2`.
    pub fn fill(&self, x: f64, out: &mut [f64]) {
        debug_assert!(out.len() <= self.n + 2);
        if out.is_empty() {
            return;
        }
        out[0] = self.p0;
        let mut prev = 0.0;
        for k in 1..out.len() {
            let j = k - 1;
            let next = (self.recur_a[j] * x + self.recur_b[j]) * out[j] - self.recur_c[j] * prev;
            prev = out[j];
            out[k] = next;
        }
    }

    /// Single value `p_k(x)`, `k <= n + 1`.
    pub fn evaluate(&self, k: usize, x: f64) -> Result<f64> {
        assert!(k <= self.n + 1, "degree {k} beyond basis data");
        let x = Self::check_domain(x)?;
        let mut buf = vec![0.0; k + 1];
        self.fill(x, &mut buf);
        Ok(buf[k])
    }

    /// `K_n(x, z)` through the Christoffel–Darboux identity
    ///
    /// ```text
    /// K_n(x, z) = (kappa_n / kappa_{n+1}) (p_{n+1}(x) p_n(z) - p_n(x) p_{n+1}(z)) / (x - z)
    /// ```
    ///
    /// Used as an independent check on the summation form; the kernel module
    /// never calls it.
    ///
    /// The quotient is not formed literally. Writing the numerator as
    /// `p_n(z) D_{n+1} - p_{n+1}(z) D_n` with divided differences
    /// `D_k = (p_k(x) - p_k(z)) / (x - z)`, the `D_k` obey their own
    /// recurrence and never subtract nearly equal values, so the result
    /// stays accurate for close pairs. At `x == z` the same recurrence is
    /// the first-derivative recurrence, so the diagonal needs no special case.
    pub fn cd_closed_form(&self, x: f64, z: f64) -> Result<f64> {
        let x = Self::check_domain(x)?;
        let z = Self::check_domain(z)?;
        let n = self.n;
        let ratio = self.leading[n] / self.leading[n + 1];
        let mut pz = vec![0.0; n + 2];
        self.fill(z, &mut pz);
        // D_{k+1} = (a_k x + b_k) D_k + a_k p_k(z) - c_k D_{k-1}, D_0 = 0
        let mut dd = vec![0.0; n + 2];
        for k in 0..=n {
            let prev = if k == 0 { 0.0 } else { dd[k - 1] };
            dd[k + 1] = (self.recur_a[k] * x + self.recur_b[k]) * dd[k] + self.recur_a[k] * pz[k]
                - self.recur_c[k] * prev;
        }
        Ok(ratio * (pz[n] * dd[n + 1] - pz[n + 1] * dd[n]))
    }
}
