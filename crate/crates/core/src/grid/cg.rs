use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgStats {
    pub iterations: usize,
    /// Final residual infinity norm.
    pub residual: f64,
}

fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn remove_mean(x: &mut [f64]) {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    x.iter_mut().for_each(|v| *v -= m);
}

/// Matrix-free conjugate gradients for a symmetric positive (semi-)definite
/// operator, stopping when the residual infinity norm drops below `tol_abs`.
///
/// `apply(x, out)` writes `A x` into `out`. With `singular_mean` the operator
/// is assumed to have the constants as its null space (periodic or Neumann
/// Poisson); the mean is projected out of the residual and the iterate.
pub fn conjugate_gradient<A: Fn(&[f64], &mut [f64])>(
    apply: A,
    rhs: &[f64],
    x: &mut [f64],
    tol_abs: f64,
    max_iter: usize,
    singular_mean: bool,
) -> Result<CgStats> {
    let n = rhs.len();
    let mut r = vec![0.0; n];
    let mut ap = vec![0.0; n];
    apply(x, &mut ap);
    for i in 0..n {
        r[i] = rhs[i] - ap[i];
    }
    if singular_mean {
        remove_mean(&mut r);
    }
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let mut res = max_abs(&r);
    let mut it = 0;
    while res > tol_abs {
        if it == max_iter {
            return Err(Error::Solver { residual: res, iterations: it });
        }
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::Solver { residual: res, iterations: it });
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if singular_mean {
            remove_mean(&mut r);
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        res = max_abs(&r);
        it += 1;
    }
    if singular_mean {
        remove_mean(x);
    }
    Ok(CgStats { iterations: it, residual: res })
}
