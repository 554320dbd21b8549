//! Triangle meshes of surfaces in `R^3` with a cotangent Laplacian.

use std::collections::HashMap;

use nalgebra::Vector3;

use crate::error::{Error, Result};

/// Triangles below this area relative to the squared mean edge are degenerate.
const DEGENERATE_TOL: f64 = 1e-14;

#[derive(Debug, Clone)]
pub struct TriMesh {
    pub vertices: Vec<Vector3<f64>>,
    pub triangles: Vec<[usize; 3]>,
}

/// Cotangent stiffness rows and mixed-Voronoi masses.
#[derive(Debug, Clone)]
pub struct CotanLaplacian {
    /// `(j, w_ij)` with `w_ij = (cot a + cot b) / 2`.
    pub rows: Vec<Vec<(usize, f64)>>,
    pub mass: Vec<f64>,
    pub boundary: Vec<bool>,
}

impl CotanLaplacian {
    /// `(Lf)_i = (1 / A_i) sum_j w_ij (f_j - f_i)`; meaningful at interior vertices.
    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        if f.len() != self.mass.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mass.len(),
                got: f.len(),
            });
        }
        Ok(self
            .rows
            .iter()
            .enumerate()
            .map(|(i, row)| row.iter().map(|(j, w)| w * (f[*j] - f[i])).sum::<f64>() / self.mass[i])
            .collect())
    }
}

fn cot(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    a.dot(b) / a.cross(b).norm()
}

impl TriMesh {
    pub fn new(vertices: Vec<Vector3<f64>>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        if triangles.is_empty() {
            return Err(Error::param("triangles", "mesh has no triangles"));
        }
        for t in &triangles {
            if t.iter().any(|&i| i >= vertices.len()) || t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                return Err(Error::param("triangles", format!("bad triangle {t:?}")));
            }
        }
        Ok(TriMesh { vertices, triangles })
    }

    /// Icosahedron subdivided `level` times and projected to the unit sphere.
    pub fn icosphere(level: usize) -> Self {
        let p = (1.0 + 5f64.sqrt()) / 2.0;
        let mut v: Vec<Vector3<f64>> = [
            [-1.0, p, 0.0],
            [1.0, p, 0.0],
            [-1.0, -p, 0.0],
            [1.0, -p, 0.0],
            [0.0, -1.0, p],
            [0.0, 1.0, p],
            [0.0, -1.0, -p],
            [0.0, 1.0, -p],
            [p, 0.0, -1.0],
            [p, 0.0, 1.0],
            [-p, 0.0, -1.0],
            [-p, 0.0, 1.0],
        ]
        .iter()
        .map(|a| Vector3::new(a[0], a[1], a[2]).normalize())
        .collect();
        let mut t: Vec<[usize; 3]> = vec![
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ];
        for _ in 0..level {
            let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
            let mut midpoint = |a: usize, b: usize, v: &mut Vec<Vector3<f64>>| {
                let key = (a.min(b), a.max(b));
                *mid.entry(key).or_insert_with(|| {
                    v.push(((v[a] + v[b]) * 0.5).normalize());
                    v.len() - 1
                })
            };
            let mut next = Vec::with_capacity(t.len() * 4);
            for [a, b, c] in t {
                let ab = midpoint(a, b, &mut v);
                let bc = midpoint(b, c, &mut v);
                let ca = midpoint(c, a, &mut v);
                next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
            }
            t = next;
        }
        TriMesh { vertices: v, triangles: t }
    }

    /// Polar cap `{geodesic distance to (0, 0, 1) < cap}` of a subdivided
    /// icosphere: triangles with all vertices inside.
    pub fn sphere_cap(level: usize, cap: f64) -> Result<Self> {
        if !(cap > 0.0 && cap < std::f64::consts::PI) {
            return Err(Error::param("cap", "must lie in (0, pi)"));
        }
        let full = TriMesh::icosphere(level);
        let inside: Vec<bool> = full
            .vertices
            .iter()
            .map(|x| x[2].clamp(-1.0, 1.0).acos() < cap)
            .collect();
        let mut map = vec![usize::MAX; full.vertices.len()];
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for t in &full.triangles {
            if t.iter().all(|&i| inside[i]) {
                let mut nt = [0; 3];
                for (k, &i) in t.iter().enumerate() {
                    if map[i] == usize::MAX {
                        map[i] = vertices.len();
                        vertices.push(full.vertices[i]);
                    }
                    nt[k] = map[i];
                }
                triangles.push(nt);
            }
        }
        TriMesh::new(vertices, triangles)
    }

    /// Annulus `{r_in <= r <= r_out}` around the pole `(0, 0, 1)` of the unit
    /// sphere: `rings` circles of `n` vertices, alternate circles rotated by
    /// half a step, joined by isosceles triangles.
    pub fn polar_annulus(r_in: f64, r_out: f64, rings: usize, n: usize) -> Result<Self> {
        if !(r_in > 0.0 && r_out > r_in && r_out < std::f64::consts::PI) {
            return Err(Error::param("r_out", "need 0 < r_in < r_out < pi"));
        }
        if rings < 2 || n < 3 {
            return Err(Error::param("rings", "need at least 2 rings of 3 vertices"));
        }
        let dr = (r_out - r_in) / (rings - 1) as f64;
        let step = 2.0 * std::f64::consts::PI / n as f64;
        let mut vertices = Vec::with_capacity(rings * n);
        for k in 0..rings {
            let r = r_in + dr * k as f64;
            let shift = if k % 2 == 0 { 0.0 } else { 0.5 };
            for j in 0..n {
                let th = step * (j as f64 + shift);
                vertices.push(Vector3::new(r.sin() * th.cos(), r.sin() * th.sin(), r.cos()));
            }
        }
        let id = |k: usize, j: usize| k * n + j % n;
        let mut triangles = Vec::with_capacity(2 * (rings - 1) * n);
        for k in 0..rings - 1 {
            for j in 0..n {
                if k % 2 == 0 {
                    // outer vertex j sits between inner j and j + 1
                    triangles.push([id(k, j), id(k, j + 1), id(k + 1, j)]);
                    triangles.push([id(k, j + 1), id(k + 1, j + 1), id(k + 1, j)]);
                } else {
                    // inner vertex j sits between outer j and j + 1
                    triangles.push([id(k, j), id(k + 1, j + 1), id(k + 1, j)]);
                    triangles.push([id(k, j), id(k, j + 1), id(k + 1, j + 1)]);
                }
            }
        }
        TriMesh::new(vertices, triangles)
    }

    /// Vertices on edges used by exactly one triangle.
    pub fn boundary_vertices(&self) -> Vec<bool> {
        let mut count: HashMap<(usize, usize), usize> = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *count.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        let mut out = vec![false; self.vertices.len()];
        for ((a, b), c) in count {
            if c == 1 {
                out[a] = true;
                out[b] = true;
            }
        }
        out
    }

    /// Cotangent weights with mixed-Voronoi lumped mass.
    pub fn cotan_laplacian(&self) -> Result<CotanLaplacian> {
        let n = self.vertices.len();
        let mut acc: Vec<HashMap<usize, f64>> = vec![HashMap::new(); n];
        let mut mass = vec![0.0; n];
        let mean_edge2 = self
            .triangles
            .iter()
            .map(|t| (self.vertices[t[0]] - self.vertices[t[1]]).norm_squared())
            .sum::<f64>()
            / self.triangles.len() as f64;
        for (ti, t) in self.triangles.iter().enumerate() {
            let p = [self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]]];
            let area = 0.5 * (p[1] - p[0]).cross(&(p[2] - p[0])).norm();
            if !(area > DEGENERATE_TOL * mean_edge2) {
                return Err(Error::param("mesh", format!("degenerate triangle {ti}")));
            }
            // angle at corner k is opposite edge (k+1, k+2)
            let mut cots = [0.0; 3];
            let mut obtuse = None;
            for k in 0..3 {
                let a = p[(k + 1) % 3] - p[k];
                let b = p[(k + 2) % 3] - p[k];
                cots[k] = cot(&a, &b);
                if a.dot(&b) < 0.0 {
                    obtuse = Some(k);
                }
            }
            for k in 0..3 {
                let (i, j) = (t[(k + 1) % 3], t[(k + 2) % 3]);
                *acc[i].entry(j).or_insert(0.0) += 0.5 * cots[k];
                *acc[j].entry(i).or_insert(0.0) += 0.5 * cots[k];
            }
            for k in 0..3 {
                let share = match obtuse {
                    None => {
                        let e1 = (p[(k + 1) % 3] - p[k]).norm_squared();
                        let e2 = (p[(k + 2) % 3] - p[k]).norm_squared();
                        (e1 * cots[(k + 2) % 3] + e2 * cots[(k + 1) % 3]) / 8.0
                    }
                    Some(o) if o == k => area / 2.0,
                    Some(_) => area / 4.0,
                };
                mass[t[k]] += share;
            }
        }
        let rows = acc
            .into_iter()
            .map(|m| {
                let mut r: Vec<(usize, f64)> = m.into_iter().collect();
                r.sort_by_key(|e| e.0);
                r
            })
            .collect();
        Ok(CotanLaplacian {
            rows,
            mass,
            boundary: self.boundary_vertices(),
        })
    }
}
