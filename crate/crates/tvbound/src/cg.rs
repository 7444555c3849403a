//! Conjugate gradients for symmetric positive (semi-)definite systems.
//!
//! The operator is supplied matrix-free as a closure, so the same routine
//! serves the regularized normal equations of the model subproblem, the
//! Tikhonov baseline, and the least-squares selection inside the
//! stationarity measure.

/// Outcome of a CG run.
#[derive(Debug, Clone, Copy)]
pub struct CgReport {
    /// Iterations actually performed.
    pub iterations: usize,
    /// True if a zero/negative-curvature direction was hit; the solution
    /// slot then holds the last valid iterate.
    pub breakdown: bool,
    /// Euclidean norm of the final residual.
    pub residual_norm: f64,
}

/// Solve `A x = rhs` in place, warm-starting from the incoming `x`.
///
/// `apply` computes `out = A v`. Stops after `max_iters` iterations, when the
/// residual drops below `rel_tol * ||rhs||`, or on curvature breakdown.
pub fn cg_solve<F>(apply: F, rhs: &[f64], x: &mut [f64], max_iters: usize, rel_tol: f64) -> CgReport
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = rhs.len();
    debug_assert_eq!(x.len(), n);

    let mut r = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut ap = vec![0.0; n];

    apply(x, &mut ap);
    for i in 0..n {
        r[i] = rhs[i] - ap[i];
    }
    p.copy_from_slice(&r);

    let rhs_norm = norm(rhs);
    let stop = rel_tol * rhs_norm;
    let mut rs_old = dot(&r, &r);

    if rs_old.sqrt() <= stop {
        return CgReport {
            iterations: 0,
            breakdown: false,
            residual_norm: rs_old.sqrt(),
        };
    }

    for iter in 0..max_iters {
        apply(&p, &mut ap);
        let p_ap = dot(&p, &ap);
        if !(p_ap > 0.0) || !p_ap.is_finite() {
            return CgReport {
                iterations: iter,
                breakdown: true,
                residual_norm: rs_old.sqrt(),
            };
        }
        let alpha = rs_old / p_ap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rs_new = dot(&r, &r);
        if rs_new.sqrt() <= stop {
            return CgReport {
                iterations: iter + 1,
                breakdown: false,
                residual_norm: rs_new.sqrt(),
            };
        }
        let beta = rs_new / rs_old;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rs_old = rs_new;
    }

    CgReport {
        iterations: max_iters,
        breakdown: false,
        residual_norm: rs_old.sqrt(),
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
