//! Support vector machines with truncated Jacobi polynomial kernels, and the
//! ORCA diagnostics computed from their exact orthogonal expansion.
//!
//! The pipeline is:
//!
//! 1. [`orthopoly`] builds the orthonormal Jacobi family `p_0..p_n`.
//! 2. [`kernel`] turns it into the tensor-product kernel `K_n^{(d)}`.
//! 3. [`svm`] solves the soft-margin dual with SMO.
//! 4. [`expansion`] rewrites the trained separator as `sum_k c_k p_k(x) + b`.
//! 5. [`orca`] splits `sum_k c_k^2` into Orthogonal Kernel Contribution
//!    indices by interaction order and total degree.
//!
//! ```
//! use orca_core::datasets::{generate_spiral, SpiralConfig};
//! use orca_core::expansion::extract_coefficients;
//! use orca_core::kernel::KernelSpec;
//! use orca_core::orca::{analyze, DEFAULT_EPSILONS};
//! use orca_core::orthopoly::JacobiParams;
//! use orca_core::svm::{train, SvmConfig};
//!
//! let data = generate_spiral(&SpiralConfig { points_per_class: 40, ..Default::default() }).unwrap();
//! let spec = KernelSpec::jacobi(JacobiParams::legendre(), 3, 2).unwrap();
//! let model = train(&spec, &data, &SvmConfig::with_cost(1.0)).unwrap();
//! let report = analyze(&extract_coefficients(&model).unwrap(), &DEFAULT_EPSILONS).unwrap();
//! assert!((report.by_order.iter().sum::<f64>() - 1.0).abs() < 1e-10);
//! assert!(report.by_order[0] < 1e-12);
//! ```
//!
//! The guide under `book/` walks through each stage; its code listings are
//! compiled and run as doc-tests of this crate.

// `!(a <= b)` is deliberate throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod datasets;
pub mod error;
pub mod expansion;
pub mod kernel;
pub mod orca;
pub mod orthopoly;
pub mod svm;

pub use error::{OrcaError, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/polynomials.md")]
    mod polynomials {}
    #[doc = include_str!("../../../book/src/kernels.md")]
    mod kernels {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/expansion.md")]
    mod expansion {}
    #[doc = include_str!("../../../book/src/indices.md")]
    mod indices {}
    #[doc = include_str!("../../../book/src/datasets.md")]
    mod datasets {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
