//! Exact orthogonal expansion of a trained separator.
//!
//! The RKHS part of the decision function, `h(x) = sum_i s_i K(x_i, x)`, is
//! a finite combination of tensor-product basis functions
//! `p_k(x) = prod_j p_{k_j}(x_j)`:
//!
//! ```text
//! h(x) = sum_k c_k p_k(x),      c_k = sum_i s_i p_k(x_i),
//! ```
//!
//! i.e. `c = P^T s` with `P` the tensor design matrix. Coefficients are
//! stored densely in odometer order: the last coordinate of the
//! multi-index varies fastest, so `flat(k) = sum_j k_j (n+1)^(d-1-j)`.
//!
//! For `d = 5`, `n = 25` that is `26^5 = 11 881 376` coefficients, about
//! 95 MB of `f64`. The dense design matrix for the same case would need
//! `m` times as much, which is why extraction streams over samples instead.

use std::io::{Read, Write};

use rayon::prelude::*;

use crate::error::{OrcaError, Result};
use crate::kernel::{GramMatrix, KernelSpec, UnivariateTable};
use crate::orthopoly::OrthonormalBasis;
use crate::svm::TrainedModel;

/// Default cap on `m * (n+1)^d` for [`design_matrix`].
pub const DESIGN_ELEMENT_CAP: u128 = 1 << 31;

/// Magic bytes opening a binary coefficient dump.
pub const DUMP_MAGIC: &[u8; 8] = b"ORCACOEF";
pub const DUMP_VERSION: u32 = 1;

/// Coefficients `c_k` over `{0..n}^d` in odometer order.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTensor {
    n: usize,
    d: usize,
    coeffs: Vec<f64>,
    rkhs_norm_sq: f64,
}

impl CoefficientTensor {
    pub fn from_coeffs(n: usize, d: usize, coeffs: Vec<f64>) -> Result<Self> {
        let expected = mode_count(n, d)?;
        if coeffs.len() != expected {
            return Err(OrcaError::DimensionMismatch {
                expected,
                actual: coeffs.len(),
            });
        }
        let rkhs_norm_sq = coeffs.iter().map(|c| c * c).sum();
        Ok(Self {
            n,
            d,
            coeffs,
            rkhs_norm_sq,
        })
    }

    pub fn zeros(n: usize, d: usize) -> Result<Self> {
        Self::from_coeffs(n, d, vec![0.0; mode_count(n, d)?])
    }

    pub fn degree(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `sum_k c_k^2`, the squared RKHS norm of `h`.
    pub fn rkhs_norm_sq(&self) -> f64 {
        self.rkhs_norm_sq
    }

    /// Flat position of multi-index `k`.
    pub fn flat_index(&self, k: &[usize]) -> usize {
        assert_eq!(k.len(), self.d);
        k.iter().fold(0, |acc, &kj| {
            assert!(kj <= self.n, "multi-index entry {kj} > n = {}", self.n);
            acc * (self.n + 1) + kj
        })
    }

    /// Multi-index at flat position `flat`.
    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let width = self.n + 1;
        let mut k = vec![0; self.d];
        for slot in k.iter_mut().rev() {
            *slot = flat % width;
            flat /= width;
        }
        k
    }

    pub fn get(&self, k: &[usize]) -> f64 {
        self.coeffs[self.flat_index(k)]
    }

    /// Writes the binary dump: magic, version, `n`, `d` (little-endian
    /// `u32`s), then the coefficients as little-endian `f64` in odometer
    /// order.
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(DUMP_MAGIC)?;
        out.write_all(&DUMP_VERSION.to_le_bytes())?;
        out.write_all(&(self.n as u32).to_le_bytes())?;
        out.write_all(&(self.d as u32).to_le_bytes())?;
        for c in &self.coeffs {
            out.write_all(&c.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != DUMP_MAGIC {
            return Err(OrcaError::BadDump("wrong magic".into()));
        }
        let mut word = [0u8; 4];
        let mut next_u32 = |input: &mut R| -> Result<u32> {
            input.read_exact(&mut word)?;
            Ok(u32::from_le_bytes(word))
        };
        let version = next_u32(&mut input)?;
        if version != DUMP_VERSION {
            return Err(OrcaError::BadDump(format!("unsupported version {version}")));
        }
        let n = next_u32(&mut input)? as usize;
        let d = next_u32(&mut input)? as usize;
        let len = mode_count(n, d)?;
        let mut coeffs = Vec::with_capacity(len);
        let mut buf = [0u8; 8];
        for _ in 0..len {
            input.read_exact(&mut buf)?;
            coeffs.push(f64::from_le_bytes(buf));
        }
        Self::from_coeffs(n, d, coeffs)
    }
}

/// `(n+1)^d`, checked.
pub fn mode_count(n: usize, d: usize) -> Result<usize> {
    (n + 1)
        .checked_pow(d as u32)
        .ok_or_else(|| OrcaError::BudgetExceeded {
            requested: (n as u128 + 1).saturating_pow(d as u32),
            cap: usize::MAX as u128,
        })
}

/// Dense tensor design matrix, row-major `m x (n+1)^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<f64>,
}

impl DesignMatrix {
    pub fn get(&self, i: usize, col: usize) -> f64 {
        self.entries[i * self.cols + col]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    /// `P^T s`.
    pub fn transpose_times(&self, s: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (i, &si) in s.iter().enumerate() {
            for (o, p) in out.iter_mut().zip(self.row(i)) {
                *o += si * p;
            }
        }
        out
    }
}

/// Builds `P` with `P[i, flat(k)] = p_k(x_i)`, refusing if it would hold
/// more than `cap` elements.
pub fn design_matrix(spec: &KernelSpec, inputs: &[Vec<f64>], cap: u128) -> Result<DesignMatrix> {
    let cols = mode_count(spec.degree(), spec.dim())?;
    let requested = inputs.len() as u128 * cols as u128;
    if requested > cap {
        return Err(OrcaError::BudgetExceeded { requested, cap });
    }
    let table = UnivariateTable::new(spec, inputs)?;
    let mut entries = vec![0.0; inputs.len() * cols];
    for (i, row) in entries
        .chunks_mut(cols.max(1))
        .enumerate()
        .take(inputs.len())
    {
        let factors: Vec<&[f64]> = (0..spec.dim()).map(|j| table.features(i, j)).collect();
        add_outer(row, 1.0, &factors);
    }
    Ok(DesignMatrix {
        rows: inputs.len(),
        cols,
        entries,
    })
}

/// `dst += scale * (f_0 ⊗ f_1 ⊗ ...)`, with `dst` in odometer layout.
fn add_outer(dst: &mut [f64], scale: f64, factors: &[&[f64]]) {
    match factors {
        [] => dst[0] += scale,
        [last] => {
            for (o, v) in dst.iter_mut().zip(last.iter()) {
                *o += scale * v;
            }
        }
        [first, rest @ ..] => {
            let stride = dst.len() / first.len();
            for (chunk, &v) in dst.chunks_mut(stride).zip(first.iter()) {
                add_outer(chunk, scale * v, rest);
            }
        }
    }
}

/// `c = P^T s` for a trained model, without forming `P`.
///
/// Work is split across threads by the first multi-index entry; each output
/// coefficient is still accumulated over samples in their original order,
/// so the result does not depend on the thread count.
pub fn extract_coefficients(model: &TrainedModel) -> Result<CoefficientTensor> {
    let spec = model.spec();
    let (n, d) = (spec.degree(), spec.dim());
    let len = mode_count(n, d)?;
    let width = n + 1;
    let slab = len / width;
    let table = model.table();
    let duals = model.signed_duals();
    let mut coeffs = vec![0.0; len];
    coeffs
        .par_chunks_mut(slab)
        .enumerate()
        .for_each(|(k0, out)| {
            for (i, &s) in duals.iter().enumerate() {
                if s == 0.0 {
                    continue;
                }
                let lead = s * table.features(i, 0)[k0];
                let rest: Vec<&[f64]> = (1..d).map(|j| table.features(i, j)).collect();
                add_outer(out, lead, &rest);
            }
        });
    CoefficientTensor::from_coeffs(n, d, coeffs)
}

/// `s^T K s`, the squared RKHS norm computed from the Gram matrix.
pub fn rkhs_norm_sq_via_gram(model: &TrainedModel, gram: &GramMatrix) -> Result<f64> {
    let s = model.signed_duals();
    if gram.size() != s.len() {
        return Err(OrcaError::DimensionMismatch {
            expected: s.len(),
            actual: gram.size(),
        });
    }
    Ok(s.iter()
        .enumerate()
        .map(|(i, &si)| si * crate::kernel::dot(gram.row(i), s))
        .sum())
}

/// `h(x) = sum_k c_k p_k(x)` by contracting one coordinate at a time,
/// last coordinate first.
pub fn evaluate_expansion(
    tensor: &CoefficientTensor,
    basis: &OrthonormalBasis,
    x: &[f64],
) -> Result<f64> {
    if x.len() != tensor.d {
        return Err(OrcaError::DimensionMismatch {
            expected: tensor.d,
            actual: x.len(),
        });
    }
    if basis.degree() != tensor.n {
        return Err(OrcaError::DimensionMismatch {
            expected: tensor.n,
            actual: basis.degree(),
        });
    }
    let phi = x
        .iter()
        .map(|&v| basis.evaluate_all(v))
        .collect::<Result<Vec<_>>>()?;
    Ok(contract(&tensor.coeffs, &phi))
}

/// Contracts a dense odometer tensor against per-coordinate feature
/// vectors.
pub(crate) fn contract(coeffs: &[f64], phi: &[Vec<f64>]) -> f64 {
    let Some((last, rest)) = phi.split_last() else {
        return coeffs[0];
    };
    let width = last.len();
    let reduced: Vec<f64> = coeffs
        .chunks(width)
        .map(|chunk| crate::kernel::dot(chunk, last))
        .collect();
    contract(&reduced, rest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{generate_spiral, Dataset, RescaleMap, SpiralConfig};
    use crate::kernel::{gram_from_rows, kernel_nd};
    use crate::orthopoly::JacobiParams;
    use crate::svm::{train, SvmConfig};
    use proptest::prelude::*;

    fn legendre(n: usize, d: usize) -> KernelSpec {
        KernelSpec::jacobi(JacobiParams::legendre(), n, d).unwrap()
    }

    fn hand_model(spec: KernelSpec, inputs: Vec<Vec<f64>>, duals: Vec<f64>) -> TrainedModel {
        let d = spec.dim();
        TrainedModel::from_parts(
            spec,
            RescaleMap::identity(d),
            inputs,
            duals,
            0.0,
            1.0,
            0.0,
            true,
        )
        .unwrap()
    }

    #[test]
    fn design_row_one_dimensional() {
        let p = design_matrix(&legendre(1, 1), &[vec![0.0]], DESIGN_ELEMENT_CAP).unwrap();
        assert_eq!(p.cols, 2);
        assert!((p.get(0, 0) - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(p.get(0, 1), 0.0);
    }

    #[test]
    fn design_row_odometer_order() {
        let spec = legendre(1, 2);
        let (a, b) = (0.3, -0.6);
        let p = design_matrix(&spec, &[vec![a, b]], DESIGN_ELEMENT_CAP).unwrap();
        let pa = spec.basis().evaluate_all(a).unwrap();
        let pb = spec.basis().evaluate_all(b).unwrap();
        let want = [pa[0] * pb[0], pa[0] * pb[1], pa[1] * pb[0], pa[1] * pb[1]];
        for (got, w) in p.row(0).iter().zip(want) {
            assert!((got - w).abs() < 1e-15);
        }
    }

    #[test]
    fn design_row_norm_is_kernel_diagonal() {
        let spec = KernelSpec::jacobi(JacobiParams::new(2.5, 1.2).unwrap(), 4, 3).unwrap();
        let rows = vec![vec![0.1, -0.9, 0.55], vec![1.0, -1.0, 0.0]];
        let p = design_matrix(&spec, &rows, DESIGN_ELEMENT_CAP).unwrap();
        for (i, row) in rows.iter().enumerate() {
            let sq: f64 = p.row(i).iter().map(|v| v * v).sum();
            let k = kernel_nd(&spec, row, row).unwrap();
            assert!((sq - k).abs() < 1e-12 * k);
        }
    }

    #[test]
    fn design_budget_enforced() {
        let spec = legendre(9, 3);
        let rows = vec![vec![0.0; 3]; 4];
        assert!(matches!(
            design_matrix(&spec, &rows, 3999),
            Err(OrcaError::BudgetExceeded {
                requested: 4000,
                cap: 3999
            })
        ));
        assert!(design_matrix(&spec, &rows, 4000).is_ok());
    }

    #[test]
    fn zero_duals_zero_coefficients() {
        let model = hand_model(
            legendre(3, 2),
            vec![vec![0.2, 0.1], vec![-0.3, 0.8]],
            vec![0.0, 0.0],
        );
        let c = extract_coefficients(&model).unwrap();
        assert!(c.coeffs().iter().all(|&v| v == 0.0));
        assert_eq!(c.rkhs_norm_sq(), 0.0);
        let gram = gram_from_rows(model.spec(), model.inputs()).unwrap();
        assert_eq!(rkhs_norm_sq_via_gram(&model, &gram).unwrap(), 0.0);
    }

    #[test]
    fn streaming_matches_dense_hand_model() {
        let spec = legendre(2, 2);
        let inputs = vec![vec![0.2, -0.7], vec![-1.0, 0.35], vec![0.9, 0.9]];
        let duals = vec![0.4, -1.1, 0.7];
        let model = hand_model(spec.clone(), inputs.clone(), duals.clone());
        let c = extract_coefficients(&model).unwrap();
        let dense = design_matrix(&spec, &inputs, DESIGN_ELEMENT_CAP)
            .unwrap()
            .transpose_times(&duals);
        let scale = dense.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, b) in c.coeffs().iter().zip(&dense) {
            assert!((a - b).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn single_sample_norm_is_kernel_diagonal() {
        let spec = legendre(3, 2);
        let x = vec![0.45, -0.2];
        let model = hand_model(spec.clone(), vec![x.clone()], vec![1.0]);
        let gram = gram_from_rows(&spec, model.inputs()).unwrap();
        let k = kernel_nd(&spec, &x, &x).unwrap();
        assert!((rkhs_norm_sq_via_gram(&model, &gram).unwrap() - k).abs() < 1e-14 * k);
        let c = extract_coefficients(&model).unwrap();
        assert!((c.rkhs_norm_sq() - k).abs() < 1e-12 * k);
    }

    #[test]
    fn indicator_tensor_evaluates_one_mode() {
        let spec = KernelSpec::jacobi(JacobiParams::new(0.5, 1.5).unwrap(), 3, 3).unwrap();
        let mut t = CoefficientTensor::zeros(3, 3).unwrap();
        let k = [2, 0, 3];
        let flat = t.flat_index(&k);
        t.coeffs[flat] = 1.0;
        assert_eq!(t.multi_index(flat), k.to_vec());
        let x = [0.3, -0.8, 0.6];
        let want: f64 = (0..3)
            .map(|j| spec.basis().evaluate(k[j], x[j]).unwrap())
            .product();
        let got = evaluate_expansion(&t, spec.basis(), &x).unwrap();
        assert!((got - want).abs() < 1e-14);
        let zero = CoefficientTensor::zeros(3, 3).unwrap();
        assert_eq!(evaluate_expansion(&zero, spec.basis(), &x).unwrap(), 0.0);
        assert!(evaluate_expansion(&zero, spec.basis(), &x[..2]).is_err());
    }

    #[test]
    fn spiral_expansion_matches_kernel_sum() {
        let data = generate_spiral(&SpiralConfig::default()).unwrap();
        let spec = legendre(8, 2);
        let model = train(&spec, &data, &SvmConfig::default()).unwrap();
        let c = extract_coefficients(&model).unwrap();
        assert!(
            c.coeffs()[0].abs()
                < 1e-9 * (1.0 + c.coeffs().iter().fold(0.0f64, |m, v| m.max(v.abs())))
        );
        let gram = gram_from_rows(&spec, model.inputs()).unwrap();
        let via_gram = rkhs_norm_sq_via_gram(&model, &gram).unwrap();
        assert!((via_gram - c.rkhs_norm_sq()).abs() <= 1e-8 * via_gram);
        for i in 0..20 {
            let x = [-1.0 + 0.1 * i as f64, 0.95 - 0.09 * i as f64];
            let g = model.decision_function_scaled(&x).unwrap();
            let e = evaluate_expansion(&c, spec.basis(), &x).unwrap() + model.bias();
            assert!((g - e).abs() <= 1e-8 * g.abs().max(1.0));
        }
    }

    #[test]
    fn binary_dump_layout() {
        let t = CoefficientTensor::from_coeffs(1, 2, vec![1.0, -2.0, 0.5, 3.25]).unwrap();
        let mut buf = Vec::new();
        t.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 8 + 12 + 32);
        assert_eq!(&buf[..8], b"ORCACOEF");
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(buf[12..16].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(buf[16..20].try_into().unwrap()), 2);
        assert_eq!(f64::from_le_bytes(buf[28..36].try_into().unwrap()), -2.0);
        assert_eq!(CoefficientTensor::read_binary(&buf[..]).unwrap(), t);
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(CoefficientTensor::read_binary(&bad[..]).is_err());
        assert!(CoefficientTensor::read_binary(&buf[..40]).is_err());
    }

    #[test]
    fn extraction_is_bit_identical_across_thread_counts() {
        let data = generate_spiral(&SpiralConfig {
            points_per_class: 30,
            ..Default::default()
        })
        .unwrap();
        let raw: Vec<Vec<f64>> = data
            .rescaled()
            .iter()
            .map(|r| vec![r[0], r[1], r[0] * r[1]])
            .collect();
        let data3 = Dataset::prescaled("three", raw, data.labels().to_vec()).unwrap();
        let model = train(&legendre(5, 3), &data3, &SvmConfig::default()).unwrap();
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let four = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap();
        let a = one.install(|| extract_coefficients(&model)).unwrap();
        let b = four.install(|| extract_coefficients(&model)).unwrap();
        assert!(a
            .coeffs()
            .iter()
            .zip(b.coeffs())
            .all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    proptest! {
        #[test]
        fn flat_index_round_trip(n in 0usize..6, d in 1usize..5, seed in 0usize..10_000) {
            let t = CoefficientTensor::zeros(n, d).unwrap();
            let flat = seed % t.len();
            prop_assert_eq!(t.flat_index(&t.multi_index(flat)), flat);
        }
    }
}
