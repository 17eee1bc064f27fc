//! Triangulated fibers with per-face holomorphic charts.
//!
//! Every vertex has a *home* chart coordinate. Every face carries its own
//! chart: the positions of its three corners in that chart, together with
//! the derivative of the home-chart to face-chart transition at each
//! corner. All operators are assembled face by face in face charts, so a
//! surface that cannot be embedded in a single chart (any closed surface)
//! is handled without special cases.

pub mod field;
pub mod io;
pub mod ops;

pub use field::{Bundle, Cells, FormField};
pub use io::{load_fiber, parse_fiber, write_fiber};
pub use ops::{HarmonicSpace, LogJet, Metric, Operators};

use crate::{Error, Result, C64};
use std::collections::HashMap;

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub v: [usize; 2],
    pub length: f64,
}

/// One triangle. `v` is counter-clockwise in the face chart.
#[derive(Clone, Debug, PartialEq)]
pub struct Face {
    pub v: [usize; 3],
    pub e: [usize; 3],
    /// Corner positions in the face chart.
    pub z: [C64; 3],
    /// d(face coordinate)/d(home coordinate) at each corner.
    pub dz: [C64; 3],
    /// Second derivative of the same transition at each corner.
    pub d2z: [C64; 3],
}

impl Face {
    /// Signed euclidean area in the face chart.
    pub fn area(&self) -> f64 {
        let a = self.z[1] - self.z[0];
        let b = self.z[2] - self.z[0];
        0.5 * (a.re * b.im - a.im * b.re)
    }

    /// Complex gradients of the three barycentric coordinates: entry `c`
    /// is `∂_x λ_c + i ∂_y λ_c`.
    pub fn grads(&self) -> [C64; 3] {
        let a2 = 2.0 * self.area();
        let i = C64::new(0.0, 1.0);
        [0, 1, 2].map(|c| i * (self.z[(c + 2) % 3] - self.z[(c + 1) % 3]) / a2)
    }

    /// Circumcentric dual-cell areas of the three corners (Voronoi
    /// areas, with the mixed-area rule for obtuse triangles). They sum to
    /// the face area.
    pub fn dual_areas(&self) -> [f64; 3] {
        let a = self.area();
        let ang = [0, 1, 2].map(|c| {
            let u = self.z[(c + 1) % 3] - self.z[c];
            let v = self.z[(c + 2) % 3] - self.z[c];
            (v / u).arg().abs()
        });
        if let Some(c) = (0..3).find(|&c| ang[c] > std::f64::consts::FRAC_PI_2) {
            let mut w = [a / 4.0; 3];
            w[c] = a / 2.0;
            return w;
        }
        [0, 1, 2].map(|c| {
            let (j, k) = ((c + 1) % 3, (c + 2) % 3);
            let cot = |t: f64| 1.0 / t.tan();
            ((self.z[c] - self.z[k]).norm_sqr() * cot(ang[j]) + (self.z[c] - self.z[j]).norm_sqr() * cot(ang[k])) / 8.0
        })
    }

    pub fn centroid(&self) -> C64 {
        (self.z[0] + self.z[1] + self.z[2]) / 3.0
    }
}

/// Face description used by [`Fiber::from_faces`].
#[derive(Clone, Debug)]
pub struct CornerData {
    pub v: [usize; 3],
    pub z: [C64; 3],
    pub dz: [C64; 3],
    pub d2z: [C64; 3],
}

#[derive(Clone, Debug)]
pub struct Fiber {
    pub home: Vec<C64>,
    pub edges: Vec<Edge>,
    pub faces: Vec<Face>,
    pub genus: usize,
    /// Faces incident to each vertex, with the local corner index.
    pub vertex_faces: Vec<Vec<(usize, usize)>>,
    /// The two faces sharing each edge.
    pub edge_faces: Vec<[usize; 2]>,
}

impl Fiber {
    /// Builds a fiber from faces given as vertex triples with corner data
    /// (positions, first and second transition derivatives). Edges are
    /// derived, with the longest chart length as edge length.
    pub fn from_faces(home: Vec<C64>, faces: Vec<CornerData>, min_genus: usize) -> Result<Fiber> {
        let mut index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges = Vec::new();
        let mut out = Vec::with_capacity(faces.len());
        for CornerData { v, z, dz, d2z } in faces {
            let mut e = [0; 3];
            for c in 0..3 {
                let (a, b) = (v[(c + 1) % 3], v[(c + 2) % 3]);
                let key = (a.min(b), a.max(b));
                e[c] = *index.entry(key).or_insert_with(|| {
                    edges.push(Edge { v: [key.0, key.1], length: 0.0 });
                    edges.len() - 1
                });
                let len = (z[(c + 1) % 3] - z[(c + 2) % 3]).norm();
                edges[e[c]].length = edges[e[c]].length.max(len);
            }
            out.push(Face { v, e, z, dz, d2z });
        }
        Fiber::new(home, edges, out, min_genus)
    }

    /// Validates topology and geometry. Edge `e[c]` of a face must join
    /// the two corners other than `c`.
    pub fn new(home: Vec<C64>, edges: Vec<Edge>, faces: Vec<Face>, min_genus: usize) -> Result<Fiber> {
        let nv = home.len();
        let mut uses: Vec<Vec<(usize, usize, usize)>> = vec![Vec::new(); edges.len()];
        let mut vertex_faces = vec![Vec::new(); nv];
        for (fi, f) in faces.iter().enumerate() {
            if f.v.iter().any(|&v| v >= nv) || f.e.iter().any(|&e| e >= edges.len()) {
                return Err(Error::Topology(format!("face {fi} references a missing cell")));
            }
            if f.v[0] == f.v[1] || f.v[1] == f.v[2] || f.v[0] == f.v[2] {
                return Err(Error::Topology(format!("face {fi} repeats a vertex")));
            }
            for c in 0..3 {
                let (a, b) = (f.v[(c + 1) % 3], f.v[(c + 2) % 3]);
                let ev = edges[f.e[c]].v;
                if !(ev == [a, b] || ev == [b, a]) {
                    return Err(Error::Topology(format!("face {fi}: edge {} does not join {a} and {b}", f.e[c])));
                }
                uses[f.e[c]].push((fi, a, b));
                vertex_faces[f.v[c]].push((fi, c));
            }
            if !(f.area() > 0.0) {
                return Err(Error::Topology(format!("face {fi} is degenerate or clockwise in its chart")));
            }
            if f.dz.iter().any(|d| !(d.norm() > 0.0) || !d.re.is_finite() || !d.im.is_finite()) {
                return Err(Error::Topology(format!("face {fi} has a singular corner transition")));
            }
            let l = f.e.map(|e| edges[e].length);
            for c in 0..3 {
                if l[c] >= l[(c + 1) % 3] + l[(c + 2) % 3] {
                    return Err(Error::Topology(format!("face {fi} violates the triangle inequality")));
                }
            }
        }
        for (ei, (e, u)) in edges.iter().zip(&uses).enumerate() {
            if !(e.length > 0.0) {
                return Err(Error::Topology(format!("edge {ei} has non-positive length")));
            }
            if u.len() != 2 {
                return Err(Error::Topology(format!("edge {ei} has {} incident faces; surface is not closed", u.len())));
            }
            // consistent orientation: the two faces run the edge in opposite directions
            if u[0].1 != u[1].2 || u[0].2 != u[1].1 {
                return Err(Error::Topology(format!("edge {ei} is not consistently oriented")));
            }
        }
        if let Some(v) = vertex_faces.iter().position(|f| f.is_empty()) {
            return Err(Error::Topology(format!("vertex {v} is isolated")));
        }
        let chi = nv as i64 - edges.len() as i64 + faces.len() as i64;
        if chi > 2 || chi % 2 != 0 {
            return Err(Error::Topology(format!("Euler characteristic {chi} is not that of a closed orientable surface")));
        }
        let genus = ((2 - chi) / 2) as usize;
        if genus < min_genus {
            return Err(Error::Topology(format!("genus {genus} is below the required {min_genus}")));
        }
        let edge_faces = uses.iter().map(|u| [u[0].0, u[1].0]).collect();
        Ok(Fiber { home, edges, faces, genus, vertex_faces, edge_faces })
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.home.len() as i64 - self.edges.len() as i64 + self.faces.len() as i64
    }

    pub fn nv(&self) -> usize {
        self.home.len()
    }

    pub fn nf(&self) -> usize {
        self.faces.len()
    }

    /// Longest chart edge, the mesh size used in convergence studies.
    pub fn mesh_size(&self) -> f64 {
        self.edges.iter().map(|e| e.length).fold(0.0, f64::max)
    }
}
