//! Small dense linear algebra and root finding.
//!
//! Everything here works on matrices of at most [`MAX_DIM`] rows and columns:
//! the annihilators behind the output twists and the F×F kinematic Jacobians.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 8;

/// Relative singular-value floor below which a direction counts as null.
const RANK_TOL: f64 = 1e-10;
/// Components smaller than this never decide the sign of a null vector.
const SIGN_TOL: f64 = 1e-8;

fn check_small(a: &DMatrix<f64>) -> Result<()> {
    if a.nrows() == 0 || a.ncols() == 0 || a.nrows() > MAX_DIM || a.ncols() > MAX_DIM {
        return Err(Error::Contract(format!(
            "matrix shape {}x{} outside 1..={MAX_DIM}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Contract("matrix has non-finite entries".into()));
    }
    Ok(())
}

/// Flip `v` so its first significant component is positive.
pub fn canonical_sign(mut v: DVector<f64>) -> DVector<f64> {
    if let Some(first) = v.iter().find(|c| c.abs() > SIGN_TOL) {
        if *first < 0.0 {
            v.neg_mut();
        }
    }
    v
}

/// Unit vector spanning the one-dimensional null space of an `(n-1)×n` matrix.
///
/// The matrix is padded with a zero row and decomposed with a full SVD; the
/// right singular vector of the smallest singular value is the answer. If the
/// next singular value is also negligible the null space is at least two
/// dimensional and [`Error::DegenerateAnnihilator`] is returned.
pub fn null_unit(a: &DMatrix<f64>) -> Result<DVector<f64>> {
    check_small(a)?;
    let (m, n) = a.shape();
    if m + 1 != n {
        return Err(Error::Contract(format!(
            "null_unit expects an (n-1)xn matrix, got {m}x{n}"
        )));
    }
    let mut square = DMatrix::zeros(n, n);
    square.rows_mut(0, m).copy_from(a);
    let svd = square.svd(false, true);
    let v_t = svd.v_t.as_ref().expect("v_t requested");

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let smallest = svd.singular_values[order[0]];
    let second = svd.singular_values[order[1]];
    let largest = svd.singular_values[order[n - 1]];
    if largest == 0.0 || second <= RANK_TOL * largest {
        return Err(Error::DegenerateAnnihilator(smallest, second));
    }

    let v: DVector<f64> = v_t.row(order[0]).transpose();
    Ok(canonical_sign(v.normalize()))
}

/// Central-difference Jacobian of `f` at `x`, one column per coordinate.
pub fn fd_jacobian<F>(f: F, x: &DVector<f64>, step: f64) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let mut cols = Vec::with_capacity(x.len());
    let mut xp = x.clone();
    for k in 0..x.len() {
        xp[k] = x[k] + step;
        let fp = f(&xp);
        xp[k] = x[k] - step;
        let fm = f(&xp);
        xp[k] = x[k];
        cols.push((fp - fm) / (2.0 * step));
    }
    DMatrix::from_columns(&cols)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    /// Convergence threshold on the infinity norm of the residual.
    pub tol: f64,
    pub max_iter: usize,
    /// Maximum number of step halvings per iteration.
    pub max_halvings: usize,
    pub fd_step: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: 1e-10,
            max_iter: 50,
            max_halvings: 20,
            fd_step: 1e-6,
        }
    }
}

fn solve_step(j: DMatrix<f64>, r: &DVector<f64>) -> Option<DVector<f64>> {
    let rhs = -r;
    if let Some(dx) = j.clone().lu().solve(&rhs) {
        if dx.iter().all(|v| v.is_finite()) {
            return Some(dx);
        }
    }
    // Rank-deficient Jacobian: least-squares step.
    j.svd(true, true).solve(&rhs, 1e-14).ok()
}

/// Damped Newton iteration on a square system using finite-difference Jacobians.
pub fn newton_solve<F>(residual: F, x0: &DVector<f64>, opts: &NewtonOptions) -> Result<DVector<f64>>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    newton_solve_with(&residual, |x| fd_jacobian(&residual, x, opts.fd_step), x0, opts)
}

/// Damped Newton iteration with a caller-supplied Jacobian.
pub fn newton_solve_with<F, J>(
    residual: F,
    jacobian: J,
    x0: &DVector<f64>,
    opts: &NewtonOptions,
) -> Result<DVector<f64>>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
    J: Fn(&DVector<f64>) -> DMatrix<f64>,
{
    let mut x = x0.clone();
    let mut r = residual(&x);
    if r.len() != x.len() {
        return Err(Error::Contract(format!(
            "newton_solve needs a square system, got {} residuals for {} unknowns",
            r.len(),
            x.len()
        )));
    }
    for _ in 0..opts.max_iter {
        let norm = r.amax();
        if !norm.is_finite() {
            break;
        }
        if norm <= opts.tol {
            return Ok(x);
        }
        let Some(dx) = solve_step(jacobian(&x), &r) else {
            break;
        };
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let trial = &x + &dx * lambda;
            let rt = residual(&trial);
            if rt.amax() < norm {
                accepted = Some((trial, rt));
                break;
            }
            lambda *= 0.5;
        }
        match accepted {
            Some((xn, rn)) => {
                x = xn;
                r = rn;
            }
            None => break,
        }
    }
    let norm = r.amax();
    if norm <= opts.tol {
        return Ok(x);
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        residual: norm,
    })
}
