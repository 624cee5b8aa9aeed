use super::{lin, BcMode, Grid, ScalarField, VectorField};
use crate::error::{Error, Result};

impl Grid {
    /// Visits every face of the `axis` array with its linear index, its
    /// `(i, j, k)` position and the linear indices of the two adjacent cells
    /// (`None` on box walls).
    #[inline]
    pub(crate) fn for_each_face<F: FnMut(usize, [usize; 3], Option<(usize, usize)>)>(&self, axis: usize, mut f: F) {
        let s = self.face_shape(axis);
        let cs = self.cells();
        let stride = [1, cs[0], cs[0] * cs[1]][axis];
        let mut idx = 0;
        for k in 0..s[2] {
            for j in 0..s[1] {
                for i in 0..s[0] {
                    let ijk = [i, j, k];
                    let p = ijk[axis];
                    // interior faces always have p < n, so the cell (i, j, k) exists
                    let nb = self.face_cells(axis, p).map(|(l, r)| {
                        let base = lin(&cs, i, j, k) - p * stride;
                        (base + l * stride, base + r * stride)
                    });
                    f(idx, ijk, nb);
                    idx += 1;
                }
            }
        }
    }

    /// Visits every cell with its linear index, position and, per axis, the
    /// linear indices of its left and right faces in that axis' face array.
    #[inline]
    pub(crate) fn for_each_cell<F: FnMut(usize, [usize; 3], [(usize, usize); 3])>(&self, mut f: F) {
        let cs = self.cells();
        let shapes = [self.face_shape(0), self.face_shape(1), self.face_shape(2)];
        for k in 0..cs[2] {
            for j in 0..cs[1] {
                for i in 0..cs[0] {
                    let ijk = [i, j, k];
                    let mut faces = [(0, 0); 3];
                    for (a, slot) in faces.iter_mut().enumerate().take(self.dim()) {
                        let (l, r) = self.cell_faces(a, ijk[a]);
                        let mut lo = ijk;
                        lo[a] = l;
                        let mut hi = ijk;
                        hi[a] = r;
                        let s = &shapes[a];
                        *slot = (lin(s, lo[0], lo[1], lo[2]), lin(s, hi[0], hi[1], hi[2]));
                    }
                    f(lin(&cs, i, j, k), ijk, faces);
                }
            }
        }
    }

    /// Two-point difference onto faces; zero normal gradient on box walls.
    pub fn gradient(&self, s: &ScalarField) -> Result<VectorField> {
        self.check_scalar(s)?;
        let mut out = self.zeros_vector();
        for a in 0..self.dim() {
            let inv_h = 1.0 / self.spacing()[a];
            let comp = &mut out.comps[a];
            self.for_each_face(a, |f, _, nb| {
                if let Some((l, r)) = nb {
                    comp[f] = (s.data[r] - s.data[l]) * inv_h;
                }
            });
        }
        Ok(out)
    }

    /// Sum of face differences over spacings. Box-wall fluxes are used as
    /// supplied.
    pub fn divergence(&self, v: &VectorField) -> Result<ScalarField> {
        self.check_vector(v)?;
        let mut out = self.zeros();
        let h = self.spacing();
        let dim = self.dim();
        self.for_each_cell(|c, _, faces| {
            let mut acc = 0.0;
            for a in 0..dim {
                let (l, r) = faces[a];
                acc += (v.comps[a][r] - v.comps[a][l]) / h[a];
            }
            out.data[c] = acc;
        });
        Ok(out)
    }

    /// Neumann (box) or periodic 5/7-point Laplacian; equals divergence∘gradient.
    pub fn laplacian(&self, s: &ScalarField) -> Result<ScalarField> {
        self.check_scalar(s)?;
        let mut out = self.zeros();
        self.laplacian_into(&s.data, &mut out.data);
        Ok(out)
    }

    pub(crate) fn laplacian_into(&self, x: &[f64], out: &mut [f64]) {
        let cs = self.cells();
        let h = self.spacing();
        let periodic = self.bc() == BcMode::Periodic;
        let stride = [1, cs[0], cs[0] * cs[1]];
        for k in 0..cs[2] {
            for j in 0..cs[1] {
                for i in 0..cs[0] {
                    let ijk = [i, j, k];
                    let c = lin(&cs, i, j, k);
                    let mut acc = 0.0;
                    for a in 0..self.dim() {
                        let inv_h2 = 1.0 / (h[a] * h[a]);
                        let p = ijk[a];
                        let n = cs[a];
                        let lo = if p > 0 {
                            Some(c - stride[a])
                        } else if periodic {
                            Some(c + (n - 1) * stride[a])
                        } else {
                            None
                        };
                        let hi = if p + 1 < n {
                            Some(c + stride[a])
                        } else if periodic {
                            Some(c - (n - 1) * stride[a])
                        } else {
                            None
                        };
                        if let Some(l) = lo {
                            acc += (x[l] - x[c]) * inv_h2;
                        }
                        if let Some(r) = hi {
                            acc += (x[r] - x[c]) * inv_h2;
                        }
                    }
                    out[c] = acc;
                }
            }
        }
    }

    /// Vector Laplacian of one velocity component on its face array with
    /// no-slip walls: wall faces are held at zero and tangential neighbours
    /// beyond a wall are reflected (ghost = -value).
    pub(crate) fn face_laplacian_into(&self, axis: usize, x: &[f64], out: &mut [f64]) {
        let s = self.face_shape(axis);
        let h = self.spacing();
        let periodic = self.bc() == BcMode::Periodic;
        let stride = [1, s[0], s[0] * s[1]];
        for k in 0..s[2] {
            for j in 0..s[1] {
                for i in 0..s[0] {
                    let ijk = [i, j, k];
                    let c = lin(&s, i, j, k);
                    if !periodic && (ijk[axis] == 0 || ijk[axis] == s[axis] - 1) {
                        out[c] = 0.0;
                        continue;
                    }
                    let mut acc = 0.0;
                    for b in 0..self.dim() {
                        let inv_h2 = 1.0 / (h[b] * h[b]);
                        let p = ijk[b];
                        let n = s[b];
                        let lo = if p > 0 {
                            x[c - stride[b]]
                        } else if periodic {
                            x[c + (n - 1) * stride[b]]
                        } else {
                            -x[c]
                        };
                        let hi = if p + 1 < n {
                            x[c + stride[b]]
                        } else if periodic {
                            x[c - (n - 1) * stride[b]]
                        } else {
                            -x[c]
                        };
                        acc += (lo - 2.0 * x[c] + hi) * inv_h2;
                    }
                    out[c] = acc;
                }
            }
        }
    }

    pub fn vector_laplacian(&self, v: &VectorField) -> Result<VectorField> {
        self.check_vector(v)?;
        let mut out = self.zeros_vector();
        for a in 0..self.dim() {
            self.face_laplacian_into(a, &v.comps[a], &mut out.comps[a]);
        }
        Ok(out)
    }

    /// First-order upwind face flux `vel * q_donor`; zero on box walls.
    pub fn upwind_flux(&self, q: &ScalarField, vel: &VectorField) -> Result<VectorField> {
        self.check_scalar(q)?;
        self.check_vector(vel)?;
        let mut out = self.zeros_vector();
        for a in 0..self.dim() {
            let va = &vel.comps[a];
            let comp = &mut out.comps[a];
            self.for_each_face(a, |f, _, nb| {
                if let Some((l, r)) = nb {
                    let v = va[f];
                    comp[f] = if v > 0.0 { v * q.data[l] } else { v * q.data[r] };
                }
            });
        }
        Ok(out)
    }

    /// Largest dt satisfying `dt * max|vel_a| / h_a <= 1` on every axis.
    pub fn advective_dt_bound(&self, vel: &VectorField) -> f64 {
        (0..self.dim())
            .map(|a| self.spacing()[a] / vel.component_max_abs(a))
            .fold(f64::INFINITY, f64::min)
    }

    /// Conservative first-order upwind transport of cell averages.
    pub fn upwind_advect(&self, q: &ScalarField, vel: &VectorField, dt: f64) -> Result<ScalarField> {
        let bound = self.advective_dt_bound(vel);
        if dt > bound {
            return Err(Error::Cfl { dt, bound });
        }
        let flux = self.upwind_flux(q, vel)?;
        let div = self.divergence(&flux)?;
        Ok(q.axpy(-dt, &div))
    }

    /// Arithmetic mean of the two adjacent cells on every interior face;
    /// box walls take the value of the single adjacent cell.
    pub fn face_average(&self, s: &ScalarField) -> Result<VectorField> {
        self.check_scalar(s)?;
        let mut out = self.zeros_vector();
        let cs = self.cells();
        for a in 0..self.dim() {
            let comp = &mut out.comps[a];
            self.for_each_face(a, |f, ijk, nb| match nb {
                Some((l, r)) => comp[f] = 0.5 * (s.data[l] + s.data[r]),
                None => {
                    let mut c = ijk;
                    c[a] = c[a].min(cs[a] - 1);
                    comp[f] = s.data[lin(&cs, c[0], c[1], c[2])];
                }
            });
        }
        Ok(out)
    }

    /// Average of the two bounding faces, per component, at cell centers.
    pub fn cell_average(&self, v: &VectorField) -> Result<[ScalarField; 3]> {
        self.check_vector(v)?;
        let mut out = [self.zeros(), self.zeros(), self.zeros()];
        let dim = self.dim();
        self.for_each_cell(|c, _, faces| {
            for a in 0..dim {
                let (l, r) = faces[a];
                out[a].data[c] = 0.5 * (v.comps[a][l] + v.comps[a][r]);
            }
        });
        Ok(out)
    }
}
