//! Closed-form oracles: the Neumann heat equation cosine series on a box and
//! the Barenblatt source solution of the porous medium equation.

use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CosineMode {
    pub k: [usize; 3],
    pub amplitude: f64,
}

/// Sum of cosine modes on `[0, L]^d` evolving under `u_t = Δu` with
/// homogeneous Neumann walls. Uses the continuum eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesSolution {
    pub dim: usize,
    pub lengths: [f64; 3],
    pub modes: Vec<CosineMode>,
}

impl SeriesSolution {
    pub fn new(dim: usize, lengths: [f64; 3], modes: Vec<CosineMode>) -> Self {
        SeriesSolution { dim, lengths, modes }
    }

    pub fn eigenvalue(&self, k: [usize; 3]) -> f64 {
        (0..self.dim).map(|a| (k[a] as f64 * PI / self.lengths[a]).powi(2)).sum()
    }

    pub fn value(&self, x: [f64; 3], t: f64) -> f64 {
        heat_neumann_solution(self.dim, self.lengths, &self.modes, x, t)
    }
}

pub fn heat_neumann_solution(dim: usize, lengths: [f64; 3], modes: &[CosineMode], x: [f64; 3], t: f64) -> f64 {
    modes
        .iter()
        .map(|mode| {
            let mut v = mode.amplitude;
            let mut lam = 0.0;
            for a in 0..dim {
                let w = mode.k[a] as f64 * PI / lengths[a];
                v *= (w * x[a]).cos();
                lam += w * w;
            }
            v * (-lam * t).exp()
        })
        .sum()
}

/// Barenblatt–Pattle source solution of `n_t = ∇·(a n^(m-1) ∇n)`, which is
/// `n_t = (a/m) Δ(n^m)`. In the rescaled time `τ = (a/m) t`:
///
/// ```text
/// n = τ^(-α) (C - k |x - x0|² τ^(-2β))_+^(1/(m-1))
/// α = d / (d(m-1) + 2),  β = α / d,  k = β (m-1) / (2m)
/// ```
///
/// with `C` fixed by the total mass through
/// `M = C^(p + d/2) k^(-d/2) π^(d/2) Γ(p+1) / Γ(p+1+d/2)`, `p = 1/(m-1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Barenblatt {
    pub m: f64,
    pub a: f64,
    pub dim: usize,
    pub center: [f64; 3],
    pub total_mass: f64,
    alpha: f64,
    beta: f64,
    k: f64,
    c: f64,
}

impl Barenblatt {
    pub fn new(m: f64, a: f64, total_mass: f64, dim: usize, center: [f64; 3]) -> Result<Barenblatt> {
        if !(m > 1.0) {
            return Err(Error::InvalidParameter(format!("Barenblatt profile needs m > 1, got {m}")));
        }
        if !(a > 0.0) || !(total_mass > 0.0) || !(1..=3).contains(&dim) {
            return Err(Error::InvalidParameter("Barenblatt needs a > 0, mass > 0, dim in 1..=3".into()));
        }
        let d = dim as f64;
        let alpha = d / (d * (m - 1.0) + 2.0);
        let beta = alpha / d;
        let k = beta * (m - 1.0) / (2.0 * m);
        let p = 1.0 / (m - 1.0);
        let shape = PI.powf(d / 2.0) * libm::tgamma(p + 1.0) / libm::tgamma(p + 1.0 + d / 2.0);
        let c = (total_mass * k.powf(d / 2.0) / shape).powf(1.0 / (p + d / 2.0));
        Ok(Barenblatt { m, a, dim, center, total_mass, alpha, beta, k, c })
    }

    /// Growth exponent of the support radius, `1/(d(m-1)+2)`.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    fn tau(&self, t: f64) -> f64 {
        self.a / self.m * t
    }

    pub fn support_radius(&self, t: f64) -> f64 {
        (self.c / self.k).sqrt() * self.tau(t).powf(self.beta)
    }

    pub fn value(&self, x: [f64; 3], t: f64) -> f64 {
        let tau = self.tau(t);
        let r2: f64 = (0..self.dim).map(|i| (x[i] - self.center[i]).powi(2)).sum();
        let inner = self.c - self.k * r2 * tau.powf(-2.0 * self.beta);
        if inner <= 0.0 {
            0.0
        } else {
            tau.powf(-self.alpha) * inner.powf(1.0 / (self.m - 1.0))
        }
    }
}

/// Point evaluation of the Barenblatt profile centered at the origin.
pub fn barenblatt(m: f64, a: f64, total_mass: f64, x: [f64; 3], t: f64, dim: usize) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!("Barenblatt time must be positive, got {t}")));
    }
    Ok(Barenblatt::new(m, a, total_mass, dim, [0.0; 3])?.value(x, t))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_mode_is_stationary() {
        let s = SeriesSolution::new(2, [1.0, 2.0, 1.0], vec![CosineMode { k: [0, 0, 0], amplitude: 0.7 }]);
        for t in [0.0, 0.3, 10.0] {
            assert_eq!(s.value([0.2, 1.1, 0.0], t), 0.7);
        }
    }

    #[test]
    fn single_mode_decays_by_e_at_unit_time_scale() {
        let lx: f64 = 1.7;
        let s = SeriesSolution::new(2, [lx, 1.0, 1.0], vec![CosineMode { k: [1, 0, 0], amplitude: 1.0 }]);
        let t = lx * lx / (PI * PI);
        assert!((s.value([0.0, 0.4, 0.0], t) - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn superposition() {
        let a = vec![CosineMode { k: [1, 2, 0], amplitude: 0.5 }];
        let b = vec![CosineMode { k: [3, 0, 0], amplitude: -1.5 }];
        let ab: Vec<_> = a.iter().chain(&b).copied().collect();
        let x = [0.3, 0.8, 0.0];
        let l = [1.0, 1.0, 1.0];
        let lhs = heat_neumann_solution(2, l, &ab, x, 0.01);
        let rhs = heat_neumann_solution(2, l, &a, x, 0.01) + heat_neumann_solution(2, l, &b, x, 0.01);
        assert!((lhs - rhs).abs() < 1e-15);
    }

    #[test]
    fn series_maximum_principle() {
        let s = SeriesSolution::new(
            2,
            [1.0, 1.0, 1.0],
            vec![
                CosineMode { k: [0, 0, 0], amplitude: 1.0 },
                CosineMode { k: [1, 1, 0], amplitude: 0.4 },
                CosineMode { k: [2, 0, 0], amplitude: -0.3 },
            ],
        );
        let pts: Vec<[f64; 3]> = (0..=20)
            .flat_map(|i| (0..=20).map(move |j| [i as f64 / 20.0, j as f64 / 20.0, 0.0]))
            .collect();
        let max0 = pts.iter().map(|&x| s.value(x, 0.0).abs()).fold(0.0, f64::max);
        for t in [0.001, 0.01, 0.1] {
            let mt = pts.iter().map(|&x| s.value(x, t).abs()).fold(0.0, f64::max);
            assert!(mt <= max0);
        }
    }

    fn radial_mass(b: &Barenblatt, t: f64) -> f64 {
        // integrate in polar coordinates over the support
        let r_max = b.support_radius(t);
        let d = b.dim as f64;
        let surface = 2.0 * PI.powf(d / 2.0) / libm::tgamma(d / 2.0);
        let n = 200_000;
        let h = r_max / n as f64;
        (0..n)
            .map(|i| {
                let r = (i as f64 + 0.5) * h;
                let mut x = b.center;
                x[0] += r;
                b.value(x, t) * surface * r.powf(d - 1.0) * h
            })
            .sum()
    }

    #[test]
    fn barenblatt_carries_its_mass() {
        for (m, a, dim) in [(2.0, 2.0, 2), (2.0, 1.0, 2), (1.5, 0.7, 2), (3.0, 3.0, 3), (2.0, 1.0, 1)] {
            let b = Barenblatt::new(m, a, 0.8, dim, [0.0; 3]).unwrap();
            for t in [0.01, 0.5, 4.0] {
                let mass = radial_mass(&b, t);
                assert!((mass - 0.8).abs() < 1e-6 * 0.8, "m={m} dim={dim} t={t}: {mass}");
            }
        }
    }

    #[test]
    fn barenblatt_scaling_laws() {
        let b = Barenblatt::new(2.0, 2.0, 1.0, 2, [0.0; 3]).unwrap();
        assert!((b.beta() - 0.25).abs() < 1e-15);
        let t = 0.37;
        let t2 = 2f64.powf(1.0 / b.beta()) * t;
        assert!((b.support_radius(t2) / b.support_radius(t) - 2.0).abs() < 1e-6);
        let d = 2.0;
        let ratio = b.value([0.0; 3], 4.0 * t) / b.value([0.0; 3], t);
        assert!((ratio - 4f64.powf(-d * b.beta())).abs() < 1e-12);
    }

    /// Finite-difference residual of n_t - ∇·(a n^(m-1) ∇n) inside the support.
    #[test]
    fn barenblatt_satisfies_the_pde() {
        for (m, a, dim) in [(2.0, 2.0, 2usize), (1.5, 0.7, 2), (3.0, 1.0, 3)] {
            let b = Barenblatt::new(m, a, 1.0, dim, [0.0; 3]).unwrap();
            let t = 0.2;
            let r = b.support_radius(t);
            let flux = |x: [f64; 3], axis: usize, h: f64| {
                let mut xp = x;
                xp[axis] += 0.5 * h;
                let mut xm = x;
                xm[axis] -= 0.5 * h;
                let mid = 0.5 * (b.value(xp, t) + b.value(xm, t));
                a * mid.powf(m - 1.0) * (b.value(xp, t) - b.value(xm, t)) / h
            };
            for frac in [0.0, 0.3, 0.6] {
                let x = [frac * r * 0.8, frac * r * 0.5, 0.0];
                let mut x3 = x;
                if dim == 3 {
                    x3[2] = 0.1 * r;
                }
                let h = 1e-4 * r;
                let dt = 1e-6 * t;
                let nt = (b.value(x3, t + dt) - b.value(x3, t - dt)) / (2.0 * dt);
                let mut div = 0.0;
                for axis in 0..dim {
                    let mut xp = x3;
                    xp[axis] += 0.5 * h;
                    let mut xm = x3;
                    xm[axis] -= 0.5 * h;
                    div += (flux(xp, axis, h) - flux(xm, axis, h)) / h;
                }
                let scale = nt.abs().max(div.abs()).max(1e-3);
                assert!((nt - div).abs() < 1e-4 * scale, "m={m}: {nt} vs {div}");
            }
        }
    }

    #[test]
    fn barenblatt_shape() {
        let b = Barenblatt::new(2.0, 1.0, 1.0, 2, [0.5, 0.5, 0.0]).unwrap();
        let t = 0.05;
        let r = b.support_radius(t);
        assert_eq!(b.value([0.5 + 1.01 * r, 0.5, 0.0], t), 0.0);
        assert!(b.value([0.5 + 0.99 * r, 0.5, 0.0], t) > 0.0);
        // continuity at the free boundary
        assert!(b.value([0.5 + 0.999999 * r, 0.5, 0.0], t) < 1e-4);
        assert!(Barenblatt::new(1.0, 1.0, 1.0, 2, [0.0; 3]).is_err());
        assert!(barenblatt(2.0, 1.0, 1.0, [0.0; 3], 0.0, 2).is_err());
    }
}
