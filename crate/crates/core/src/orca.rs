//! Orthogonal Kernel Contribution (OKC) indices.
//!
//! Every coefficient `c_k` of the expansion is filed under two integers:
//! the interaction order `q(k)`, the number of coordinates the mode
//! actually depends on, and the total degree `N(k) = sum_j k_j`. The squared
//! norm `sum_k c_k^2` then splits into blocks `C_N^(q)`, and everything in
//! an [`OrcaReport`] is a normalized roll-up of those blocks or of the
//! modes active on exactly one or two coordinates.
//!
//! A mode with `q` active coordinates has total degree between `q` and
//! `q n`, so the `(q, N)` table is zero outside that band.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{OrcaError, Result};
use crate::expansion::CoefficientTensor;

/// Thresholds reported when none are requested.
pub const DEFAULT_EPSILONS: [f64; 3] = [0.10, 0.05, 0.01];

/// Number of strictly positive entries of `k`.
pub fn interaction_order(k: &[usize]) -> usize {
    k.iter().filter(|&&kj| kj > 0).count()
}

/// Sum of the entries of `k`.
pub fn total_degree(k: &[usize]) -> usize {
    k.iter().sum()
}

/// Spectral threshold for one `epsilon`: the least `t_eps` with cumulative
/// mass `coverage = F(t_eps) >= 1 - epsilon`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub epsilon: f64,
    pub t_eps: usize,
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrcaReport {
    /// `block[q][N]`, shape `(d+1) x (dn+1)`.
    pub block: Vec<Vec<f64>>,
    pub by_order: Vec<f64>,
    pub by_degree: Vec<f64>,
    pub marginal: Vec<f64>,
    /// `pairwise[i][j]` for `i < j`; zero on and below the diagonal.
    pub pairwise: Vec<Vec<f64>>,
    pub even_mass: f64,
    pub odd_mass: f64,
    pub spectral_peak: usize,
    pub thresholds: Vec<Threshold>,
    pub norm_sq: f64,
}

/// Raw (unnormalized) sums for a contiguous run of modes.
#[derive(Debug, Clone)]
struct Partial {
    block: Vec<Vec<f64>>,
    marginal: Vec<f64>,
    pairwise: Vec<Vec<f64>>,
    total: f64,
}

impl Partial {
    fn new(n: usize, d: usize) -> Self {
        Self {
            block: vec![vec![0.0; d * n + 1]; d + 1],
            marginal: vec![0.0; d],
            pairwise: vec![vec![0.0; d]; d],
            total: 0.0,
        }
    }

    fn merge(&mut self, other: &Partial) {
        for (a, b) in self.block.iter_mut().zip(&other.block) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (x, y) in self.marginal.iter_mut().zip(&other.marginal) {
            *x += y;
        }
        for (a, b) in self.pairwise.iter_mut().zip(&other.pairwise) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        self.total += other.total;
    }
}

/// Streams one slab of modes: those whose first entry equals `k0`.
fn scan_slab(coeffs: &[f64], k0: usize, n: usize, d: usize) -> Partial {
    let mut part = Partial::new(n, d);
    let mut digits = vec![0usize; d];
    digits[0] = k0;
    let mut q = usize::from(k0 > 0);
    let mut total_deg = k0;
    for (pos, &c) in coeffs.iter().enumerate() {
        if pos > 0 {
            // Odometer step on digits 1..d, updating q and N from the carries.
            let mut j = d - 1;
            loop {
                if digits[j] == n {
                    digits[j] = 0;
                    total_deg -= n;
                    if n > 0 {
                        q -= 1;
                    }
                    j -= 1;
                } else {
                    if digits[j] == 0 {
                        q += 1;
                    }
                    digits[j] += 1;
                    total_deg += 1;
                    break;
                }
            }
        }
        let e = c * c;
        part.total += e;
        part.block[q][total_deg] += e;
        match q {
            1 => {
                let i = digits.iter().position(|&v| v > 0).expect("q = 1");
                part.marginal[i] += e;
            }
            2 => {
                let mut active = digits
                    .iter()
                    .enumerate()
                    .filter(|(_, &v)| v > 0)
                    .map(|(i, _)| i);
                let (a, b) = (active.next().expect("q = 2"), active.next().expect("q = 2"));
                part.pairwise[a][b] += e;
            }
            _ => {}
        }
    }
    part
}

fn validate_epsilons(epsilons: &[f64]) -> Result<Vec<f64>> {
    let mut eps = epsilons.to_vec();
    if let Some(bad) = eps.iter().find(|&&e| !(e > 0.0 && e < 1.0)) {
        return Err(OrcaError::InvalidConfig(format!(
            "epsilon {bad} is not in (0, 1)"
        )));
    }
    eps.sort_by(|a, b| b.total_cmp(a));
    eps.dedup();
    Ok(eps)
}

/// Computes every OKC index of `tensor` in one pass over its coefficients.
pub fn analyze(tensor: &CoefficientTensor, epsilons: &[f64]) -> Result<OrcaReport> {
    let epsilons = validate_epsilons(epsilons)?;
    let (n, d) = (tensor.degree(), tensor.dim());
    let coeffs = tensor.coeffs();
    let slab = coeffs.len() / (n + 1);
    let partials: Vec<Partial> = coeffs
        .par_chunks(slab)
        .enumerate()
        .map(|(k0, chunk)| scan_slab(chunk, k0, n, d))
        .collect();
    let mut acc = Partial::new(n, d);
    for p in &partials {
        acc.merge(p);
    }
    let norm_sq = acc.total;
    if !(norm_sq > 0.0) {
        return Err(OrcaError::DegenerateModel);
    }

    let scale = |v: &mut f64| *v /= norm_sq;
    let mut block = acc.block;
    block.iter_mut().flatten().for_each(scale);
    let mut marginal = acc.marginal;
    marginal.iter_mut().for_each(scale);
    let mut pairwise = acc.pairwise;
    pairwise.iter_mut().flatten().for_each(scale);

    let by_order: Vec<f64> = block.iter().map(|row| row.iter().sum()).collect();
    let by_degree: Vec<f64> = (0..=d * n)
        .map(|deg| block.iter().map(|row| row[deg]).sum())
        .collect();
    let even_mass = by_degree.iter().step_by(2).sum();
    let odd_mass = by_degree.iter().skip(1).step_by(2).sum();

    // First maximum wins, so ties resolve toward the smaller degree.
    let spectral_peak = by_degree
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (deg, &v)| {
            if v > best.1 {
                (deg, v)
            } else {
                best
            }
        })
        .0;

    let cumulative = cumulate(&by_degree);
    let thresholds = epsilons
        .iter()
        .map(|&epsilon| {
            let t_eps = cumulative
                .iter()
                .position(|&f| f >= 1.0 - epsilon)
                .unwrap_or(cumulative.len() - 1);
            Threshold {
                epsilon,
                t_eps,
                coverage: cumulative[t_eps],
            }
        })
        .collect();

    Ok(OrcaReport {
        block,
        by_order,
        by_degree,
        marginal,
        pairwise,
        even_mass,
        odd_mass,
        spectral_peak,
        thresholds,
        norm_sq,
    })
}

fn cumulate(values: &[f64]) -> Vec<f64> {
    values
        .iter()
        .scan(0.0, |run, &v| {
            *run += v;
            Some(*run)
        })
        .collect()
}

/// `F[T] = sum_{N <= T} OKC_N`.
pub fn degree_profile_cumulative(report: &OrcaReport) -> Vec<f64> {
    cumulate(&report.by_degree)
}

/// Normalized mass of the modes whose active set is exactly `subset`
/// (0-based coordinate indices).
pub fn subset_contribution(tensor: &CoefficientTensor, subset: &[usize]) -> Result<f64> {
    let (n, d) = (tensor.degree(), tensor.dim());
    let mut members = subset.to_vec();
    members.sort_unstable();
    members.dedup();
    if members.is_empty() || members.len() != subset.len() || members.iter().any(|&i| i >= d) {
        return Err(OrcaError::InvalidConfig(format!(
            "subset {subset:?} must be nonempty, distinct and within 0..{d}"
        )));
    }
    let norm_sq = tensor.rkhs_norm_sq();
    if !(norm_sq > 0.0) {
        return Err(OrcaError::DegenerateModel);
    }
    if n == 0 {
        return Ok(0.0);
    }
    // Walk every assignment of 1..=n to the members, zeros elsewhere.
    let mut k = vec![0usize; d];
    for &i in &members {
        k[i] = 1;
    }
    let mut mass = 0.0;
    loop {
        let c = tensor.get(&k);
        mass += c * c;
        let mut pos = members.len();
        loop {
            if pos == 0 {
                return Ok(mass / norm_sq);
            }
            pos -= 1;
            let i = members[pos];
            if k[i] < n {
                k[i] += 1;
                break;
            }
            k[i] = 1;
        }
    }
}

fn eps_tag(eps: f64) -> String {
    let hundredths = eps * 100.0;
    if (hundredths - hundredths.round()).abs() < 1e-9 {
        format!("{:03}", hundredths.round() as u64)
    } else {
        eps.to_string().replace('.', "p")
    }
}

impl OrcaReport {
    pub fn dim(&self) -> usize {
        self.marginal.len()
    }

    pub fn degree(&self) -> usize {
        match self.dim() {
            0 => 0,
            d => (self.by_degree.len() - 1) / d,
        }
    }

    /// Header of the flat CSV layout.
    pub fn csv_header(&self) -> Vec<String> {
        let d = self.dim();
        let mut cols = vec!["n".to_string(), "even".into(), "odd".into()];
        cols.extend((0..=d).map(|q| format!("okc_q{q}")));
        cols.extend((1..=d).map(|i| format!("okc_{i}")));
        cols.push("n_star".into());
        cols.extend(
            self.thresholds
                .iter()
                .map(|t| format!("t_{}", eps_tag(t.epsilon))),
        );
        cols.extend(
            self.thresholds
                .iter()
                .map(|t| format!("f_{}", eps_tag(t.epsilon))),
        );
        cols
    }

    /// One CSV row in [`csv_header`](Self::csv_header) order.
    pub fn csv_row(&self) -> Vec<String> {
        let mut row = vec![
            self.degree().to_string(),
            self.even_mass.to_string(),
            self.odd_mass.to_string(),
        ];
        row.extend(self.by_order.iter().map(f64::to_string));
        row.extend(self.marginal.iter().map(f64::to_string));
        row.push(self.spectral_peak.to_string());
        row.extend(self.thresholds.iter().map(|t| t.t_eps.to_string()));
        row.extend(self.thresholds.iter().map(|t| t.coverage.to_string()));
        row
    }

    /// The same row rounded for terminal display, with the coverage next to
    /// each threshold.
    pub fn display_row(&self) -> String {
        let mut out = format!(
            "{:>3} {:.4} {:.4}",
            self.degree(),
            self.even_mass,
            self.odd_mass
        );
        for v in self.by_order.iter().chain(&self.marginal) {
            out.push_str(&format!(" {v:.4}"));
        }
        out.push_str(&format!(" {:>3}", self.spectral_peak));
        for t in &self.thresholds {
            out.push_str(&format!(" {:>3} ({:.4})", t.t_eps, t.coverage));
        }
        out
    }

    /// Header matching [`display_row`](Self::display_row).
    pub fn display_header(&self) -> String {
        let d = self.dim();
        let mut out = format!("{:>3} {:>6} {:>6}", "n", "even", "odd");
        for q in 0..=d {
            out.push_str(&format!(" {:>6}", format!("q{q}")));
        }
        for i in 1..=d {
            out.push_str(&format!(" {:>6}", format!("okc_{i}")));
        }
        out.push_str(&format!(" {:>3}", "N*"));
        for t in &self.thresholds {
            out.push_str(&format!(" {:>12}", format!("T_{}", t.epsilon)));
        }
        out
    }
}
