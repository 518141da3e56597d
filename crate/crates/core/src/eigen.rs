//! Smallest eigenpair of a dense symmetric matrix.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Above this dimension the Lanczos solver is used instead of a full
/// decomposition.
pub const DENSE_EIGEN_LIMIT: usize = 3000;

#[derive(Debug, Clone, PartialEq)]
pub struct SmallestEigen {
    pub value: f64,
    /// Second smallest eigenvalue (`+inf` for 1x1 input).
    pub second: f64,
    /// Unit-norm eigenvector of `value`.
    pub vector: DVector<f64>,
}

pub fn smallest_eigenpair(a: &DMatrix<f64>, dense_limit: usize) -> SmallestEigen {
    assert!(a.is_square() && a.nrows() > 0, "need a nonempty square matrix");
    if a.nrows() <= dense_limit {
        dense_smallest(a)
    } else {
        lanczos_smallest(a, 1e-10, 200)
    }
}

fn two_smallest(values: &DVector<f64>) -> (usize, f64) {
    let mut best = 0;
    for i in 1..values.len() {
        if values[i] < values[best] {
            best = i;
        }
    }
    let second = values
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != best)
        .map(|(_, &v)| v)
        .fold(f64::INFINITY, f64::min);
    (best, second)
}

fn dense_smallest(a: &DMatrix<f64>) -> SmallestEigen {
    let eig = SymmetricEigen::new(a.clone());
    let (i, second) = two_smallest(&eig.eigenvalues);
    SmallestEigen {
        value: eig.eigenvalues[i],
        second,
        vector: eig.eigenvectors.column(i).normalize(),
    }
}

/// Restarted Lanczos with full reorthogonalization. Each restart seeds the
/// Krylov space with the current Ritz vector.
fn lanczos_smallest(a: &DMatrix<f64>, tol: f64, max_restarts: usize) -> SmallestEigen {
    let n = a.nrows();
    let m = n.min(80);
    let scale = a.amax().max(f64::MIN_POSITIVE);
    // deterministic, generic start vector
    let mut start = DVector::from_fn(n, |i, _| 1.0 + ((i * 7919) % 104_729) as f64 / 104_729.0);
    start.normalize_mut();

    let mut best = None;
    for _ in 0..max_restarts {
        let mut basis: Vec<DVector<f64>> = vec![start.clone()];
        let mut alpha = Vec::with_capacity(m);
        let mut beta: Vec<f64> = Vec::with_capacity(m);
        for j in 0..m {
            let mut w = a * &basis[j];
            let aj = basis[j].dot(&w);
            alpha.push(aj);
            for _ in 0..2 {
                for q in &basis {
                    let c = q.dot(&w);
                    w.axpy(-c, q, 1.0);
                }
            }
            let bj = w.norm();
            if j + 1 == m || bj <= 1e-13 * scale {
                break;
            }
            beta.push(bj);
            basis.push(w / bj);
        }
        let k = alpha.len();
        let t = DMatrix::from_fn(k, k, |r, c| {
            if r == c {
                alpha[r]
            } else if r + 1 == c {
                beta[r]
            } else if c + 1 == r {
                beta[c]
            } else {
                0.0
            }
        });
        let teig = SymmetricEigen::new(t);
        let (i, second) = two_smallest(&teig.eigenvalues);
        let theta = teig.eigenvalues[i];
        let y = teig.eigenvectors.column(i);
        let mut x = DVector::zeros(n);
        for (c, q) in y.iter().zip(&basis) {
            x.axpy(*c, q, 1.0);
        }
        x.normalize_mut();
        let residual = (a * &x - &x * theta).norm();
        let converged = residual <= tol * scale;
        best = Some(SmallestEigen {
            value: theta,
            second,
            vector: x.clone(),
        });
        if converged || k < m {
            break;
        }
        start = x;
    }
    best.expect("at least one Lanczos pass")
}
