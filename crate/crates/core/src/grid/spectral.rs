//! Separable fast solvers for box-mode elliptic problems.
//!
//! Each axis is diagonalised by the trigonometric transform matching its
//! boundary treatment:
//!
//! * `Cosine` (DCT-II): cell-centered unknowns, homogeneous Neumann.
//! * `SineNode` (DST-I): unknowns on interior nodes, Dirichlet at both ends.
//! * `SineCell` (DST-II): cell-centered unknowns with reflected ghosts
//!   (Dirichlet on the wall half a cell away).

use std::cell::RefCell;

use rustdct::DctPlanner;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Basis {
    Cosine,
    SineNode,
    SineCell,
}

thread_local! {
    static PLANNER: RefCell<DctPlanner<f64>> = RefCell::new(DctPlanner::new());
}

impl Basis {
    /// Eigenvalue of the 1D negative second-difference operator for mode `k`
    /// on `len` unknowns with spacing `h`.
    pub(crate) fn eigenvalue(self, k: usize, len: usize, h: f64) -> f64 {
        let theta = match self {
            Basis::Cosine => std::f64::consts::PI * k as f64 / len as f64,
            Basis::SineNode => std::f64::consts::PI * (k + 1) as f64 / (len + 1) as f64,
            Basis::SineCell => std::f64::consts::PI * (k + 1) as f64 / len as f64,
        };
        let s = (0.5 * theta).sin();
        4.0 * s * s / (h * h)
    }

    fn forward(self, buf: &mut [f64]) {
        let len = buf.len();
        PLANNER.with(|p| {
            let mut p = p.borrow_mut();
            match self {
                Basis::Cosine => p.plan_dct2(len).process_dct2(buf),
                Basis::SineNode => p.plan_dst1(len).process_dst1(buf),
                Basis::SineCell => p.plan_dst2(len).process_dst2(buf),
            }
        });
    }

    fn inverse(self, buf: &mut [f64]) {
        let len = buf.len();
        let scale = PLANNER.with(|p| {
            let mut p = p.borrow_mut();
            match self {
                Basis::Cosine => {
                    p.plan_dct3(len).process_dct3(buf);
                    2.0 / len as f64
                }
                Basis::SineNode => {
                    p.plan_dst1(len).process_dst1(buf);
                    2.0 / (len + 1) as f64
                }
                Basis::SineCell => {
                    p.plan_dst3(len).process_dst3(buf);
                    2.0 / len as f64
                }
            }
        });
        buf.iter_mut().for_each(|v| *v *= scale);
    }
}

fn along_axis(data: &mut [f64], shape: [usize; 3], axis: usize, mut f: impl FnMut(&mut [f64])) {
    let n = shape[axis];
    let stride = match axis {
        0 => 1,
        1 => shape[0],
        _ => shape[0] * shape[1],
    };
    let mut line = vec![0.0; n];
    let (o1, o2) = match axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    for b in 0..shape[o2] {
        for a in 0..shape[o1] {
            let mut ijk = [0; 3];
            ijk[o1] = a;
            ijk[o2] = b;
            let base = ijk[0] + shape[0] * (ijk[1] + shape[1] * ijk[2]);
            for (t, slot) in line.iter_mut().enumerate() {
                *slot = data[base + t * stride];
            }
            f(&mut line);
            for (t, v) in line.iter().enumerate() {
                data[base + t * stride] = *v;
            }
        }
    }
}

/// Solves `(alpha + beta * L) x = rhs` in place, where `L` is the separable
/// negative Laplacian described by `bases` on an array of `shape`. Modes with
/// a vanishing denominator are set to zero (the mean for a pure Neumann
/// Poisson problem).
pub(crate) fn solve_separable(
    data: &mut [f64],
    shape: [usize; 3],
    dim: usize,
    bases: [Basis; 3],
    h: [f64; 3],
    alpha: f64,
    beta: f64,
) {
    for a in 0..dim {
        along_axis(data, shape, a, |l| bases[a].forward(l));
    }
    let eig: Vec<Vec<f64>> = (0..3)
        .map(|a| {
            if a < dim {
                (0..shape[a]).map(|k| bases[a].eigenvalue(k, shape[a], h[a])).collect()
            } else {
                vec![0.0]
            }
        })
        .collect();
    for k in 0..shape[2] {
        for j in 0..shape[1] {
            for i in 0..shape[0] {
                let lam = eig[0][i] + eig[1][j] + eig[2][k];
                let d = alpha + beta * lam;
                let idx = i + shape[0] * (j + shape[1] * k);
                data[idx] = if d.abs() > 1e-300 { data[idx] / d } else { 0.0 };
            }
        }
    }
    for a in 0..dim {
        along_axis(data, shape, a, |l| bases[a].inverse(l));
    }
}
