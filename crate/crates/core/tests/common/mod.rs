//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use orca_core::datasets::{generate_spiral, Dataset, SpiralConfig};
use orca_core::expansion::CoefficientTensor;
use orca_core::kernel::{kernel_nd, KernelSpec};
use orca_core::orthopoly::JacobiParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Uniform points in `[-1, 1]^d`.
pub fn random_points(seed: u64, m: usize, d: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..m)
        .map(|_| (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect())
        .collect()
}

/// `Q_ij = y_i y_j K(x_i, x_j)`, entry by entry from the kernel definition.
pub fn dual_hessian(spec: &KernelSpec, data: &Dataset) -> Vec<Vec<f64>> {
    let (x, y) = (data.rescaled(), data.labels());
    (0..x.len())
        .map(|i| {
            (0..x.len())
                .map(|j| y[i] * y[j] * kernel_nd(spec, &x[i], &x[j]).unwrap())
                .collect()
        })
        .collect()
}

/// `sum a - a^T Q a / 2`.
pub fn dual_value(q: &[Vec<f64>], a: &[f64]) -> f64 {
    let quad: f64 = (0..a.len())
        .map(|i| a[i] * (0..a.len()).map(|j| q[i][j] * a[j]).sum::<f64>())
        .sum();
    a.iter().sum::<f64>() - 0.5 * quad
}

/// Euclidean projection onto `{0 <= a <= c, y . a = 0}`: bisection on the
/// multiplier of the equality constraint.
fn project(v: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    let at = |lam: f64| -> Vec<f64> {
        v.iter()
            .zip(y)
            .map(|(vi, yi)| (vi - lam * yi).clamp(0.0, c))
            .collect()
    };
    let residual = |a: &[f64]| -> f64 { a.iter().zip(y).map(|(ai, yi)| ai * yi).sum() };
    let bound = v.iter().fold(0.0f64, |m, x| m.max(x.abs())) + c + 1.0;
    let (mut lo, mut hi) = (-bound, bound);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if residual(&at(mid)) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi))
}

/// Maximum of the SVM dual by accelerated projected gradient (FISTA with
/// restarts). Slow but simple; fine for a dozen variables.
pub fn qp_oracle(q: &[Vec<f64>], y: &[f64], c: f64) -> f64 {
    let m = y.len();
    // Row-sum bound on the largest eigenvalue.
    let lip = q
        .iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
        .max(1e-300);
    let grad = |a: &[f64]| -> Vec<f64> {
        (0..m)
            .map(|i| 1.0 - (0..m).map(|j| q[i][j] * a[j]).sum::<f64>())
            .collect()
    };
    let mut a = vec![0.0; m];
    let mut z = a.clone();
    let mut t = 1.0f64;
    let mut best = dual_value(q, &a);
    let mut checkpoint = best;
    for iter in 1..=200_000 {
        if iter % 5000 == 0 {
            if best - checkpoint <= 1e-15 * best.abs() {
                break;
            }
            checkpoint = best;
        }
        let g = grad(&z);
        let step: Vec<f64> = z.iter().zip(&g).map(|(zi, gi)| zi + gi / lip).collect();
        let next = project(&step, y, c);
        let value = dual_value(q, &next);
        if value < best {
            // restart momentum
            t = 1.0;
            z = a.clone();
            continue;
        }
        best = value;
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        z = next
            .iter()
            .zip(&a)
            .map(|(n, o)| n + (t - 1.0) / t_next * (n - o))
            .collect();
        a = next;
        t = t_next;
    }
    best
}

/// Naive ORCA: classify every mode by decoding its flat index and add its
/// share to the matching buckets.
pub struct NaiveOrca {
    pub by_order: Vec<f64>,
    pub by_degree: Vec<f64>,
    pub marginal: Vec<f64>,
    pub pairwise: Vec<Vec<f64>>,
}

pub fn naive_orca(t: &CoefficientTensor) -> NaiveOrca {
    let (n, d) = (t.degree(), t.dim());
    let total: f64 = t.coeffs().iter().map(|c| c * c).sum();
    let mut out = NaiveOrca {
        by_order: vec![0.0; d + 1],
        by_degree: vec![0.0; d * n + 1],
        marginal: vec![0.0; d],
        pairwise: vec![vec![0.0; d]; d],
    };
    for flat in 0..t.len() {
        let mut k = vec![0; d];
        let mut rest = flat;
        for j in (0..d).rev() {
            k[j] = rest % (n + 1);
            rest /= n + 1;
        }
        let share = t.coeffs()[flat].powi(2) / total;
        let active: Vec<usize> = (0..d).filter(|&j| k[j] > 0).collect();
        out.by_order[active.len()] += share;
        out.by_degree[k.iter().sum::<usize>()] += share;
        if let [j] = active[..] {
            out.marginal[j] += share;
        }
        if let [i, j] = active[..] {
            out.pairwise[i][j] += share;
        }
    }
    out
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// A small fixed training problem.
pub struct Instance {
    pub name: &'static str,
    pub data: Dataset,
    pub params: JacobiParams,
    pub n: usize,
    pub cost: f64,
}

fn labels_by(points: &[Vec<f64>], rule: impl Fn(&[f64]) -> bool) -> Vec<f64> {
    let mut y: Vec<f64> = points
        .iter()
        .map(|p| if rule(p) { 1.0 } else { -1.0 })
        .collect();
    // keep both classes present
    if y.iter().all(|&v| v == y[0]) {
        y[0] = -y[0];
    }
    y
}

/// Seven problems with at most 12 samples, for checking the solver.
pub fn solver_instances() -> Vec<Instance> {
    let jac = |a, b| JacobiParams::new(a, b).unwrap();
    let mut out = Vec::new();

    let xor = vec![
        vec![-0.5, -0.5],
        vec![0.5, 0.5],
        vec![-0.5, 0.5],
        vec![0.5, -0.5],
    ];
    out.push(Instance {
        name: "xor",
        data: Dataset::prescaled("xor", xor, vec![1.0, 1.0, -1.0, -1.0]).unwrap(),
        params: JacobiParams::legendre(),
        n: 2,
        cost: 1.0,
    });

    let pts = random_points(1, 6, 1);
    let y = vec![1.0, -1.0, 1.0, -1.0, 1.0, -1.0];
    out.push(Instance {
        name: "alternating-1d",
        data: Dataset::prescaled("a", pts, y).unwrap(),
        params: JacobiParams::legendre(),
        n: 3,
        cost: 1.0,
    });

    let pts = random_points(2, 10, 2);
    let y = labels_by(&pts, |p| p[0] + 0.3 * p[1] > 0.1);
    out.push(Instance {
        name: "asymmetric-jacobi",
        data: Dataset::prescaled("b", pts, y).unwrap(),
        params: jac(2.5, 1.2),
        n: 3,
        cost: 0.5,
    });

    let pts = random_points(3, 12, 3);
    let y = labels_by(&pts, |p| p[0] * p[1] - p[2] > 0.0);
    out.push(Instance {
        name: "gegenbauer-3d",
        data: Dataset::prescaled("c", pts, y).unwrap(),
        params: jac(0.5, 0.5),
        n: 2,
        cost: 10.0,
    });

    let spiral = generate_spiral(&SpiralConfig {
        points_per_class: 6,
        ..Default::default()
    })
    .unwrap();
    out.push(Instance {
        name: "spiral-12",
        data: spiral,
        params: JacobiParams::legendre(),
        n: 4,
        cost: 1.0,
    });

    let pts = random_points(4, 8, 1);
    let y = labels_by(&pts, |p| p[0] > 0.0);
    let mut y_noisy = y.clone();
    y_noisy[0] = -y_noisy[0];
    y_noisy[3] = -y_noisy[3];
    out.push(Instance {
        name: "overlapping-small-c",
        data: Dataset::prescaled("d", pts, y_noisy).unwrap(),
        params: JacobiParams::legendre(),
        n: 1,
        cost: 0.1,
    });

    let pts = random_points(5, 9, 2);
    let y = labels_by(&pts, |p| p[0] * p[0] + p[1] * p[1] < 0.5);
    out.push(Instance {
        name: "disc",
        data: Dataset::prescaled("e", pts, y).unwrap(),
        params: jac(1.0, 1.0),
        n: 2,
        cost: 2.0,
    });

    out
}
