use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

use super::lv::LvShape;

/// Boundary tag of a facet.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tag {
    Epi,
    Endo,
    Base,
}

impl Tag {
    pub const ALL: [Tag; 3] = [Tag::Epi, Tag::Endo, Tag::Base];

    pub fn as_str(self) -> &'static str {
        match self {
            Tag::Epi => "EPI",
            Tag::Endo => "ENDO",
            Tag::Base => "BASE",
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Tag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "EPI" => Ok(Tag::Epi),
            "ENDO" => Ok(Tag::Endo),
            "BASE" => Ok(Tag::Base),
            other => Err(Error::InvalidInput(format!("unknown facet tag {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundaryFacet {
    pub cell: usize,
    /// Local face: 0/1 = ξ low/high, 2/3 = η low/high, 4/5 = ζ low/high.
    pub face: u8,
    pub tag: Tag,
}

/// Local vertex ids of each face, ordered `(0,0), (1,0), (0,1), (1,1)` in the
/// two in-face reference directions. The in-face directions are chosen so that
/// `∂x/∂u × ∂x/∂v` points out of the cell.
pub const FACE_VERTICES: [[usize; 4]; 6] = [
    [0, 4, 2, 6], // ξ=0: u=ζ, v=η
    [1, 3, 5, 7], // ξ=1: u=η, v=ζ
    [0, 1, 4, 5], // η=0: u=ξ, v=ζ
    [2, 6, 3, 7], // η=1: u=ζ, v=ξ
    [0, 2, 1, 3], // ζ=0: u=η, v=ξ
    [4, 5, 6, 7], // ζ=1: u=ξ, v=η
];

/// Maps in-face coordinates `(u, v)` of `face` to cell reference coordinates.
pub fn face_to_cell(face: u8, u: f64, v: f64) -> [f64; 3] {
    match face {
        0 => [0.0, v, u],
        1 => [1.0, u, v],
        2 => [u, 0.0, v],
        3 => [v, 1.0, u],
        4 => [v, u, 0.0],
        5 => [u, v, 1.0],
        _ => unreachable!("local face index out of range"),
    }
}

/// Unstructured hexahedral mesh. Vertices are in millimetres. Cell vertices
/// follow the lexicographic order `i + 2j + 4k` over the reference cube.
#[derive(Clone, Debug, PartialEq)]
pub struct HexMesh {
    pub vertices: Vec<[f64; 3]>,
    pub cells: Vec<[usize; 8]>,
    pub boundary_facets: Vec<BoundaryFacet>,
    pub level: u32,
    /// Analytic parametrization, present for generated ventricles.
    pub shape: Option<LvShape>,
}

impl HexMesh {
    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn cell_coords(&self, cell: usize) -> [[f64; 3]; 8] {
        self.cells[cell].map(|v| self.vertices[v])
    }

    pub fn facets_with(&self, tag: Tag) -> impl Iterator<Item = &BoundaryFacet> {
        self.boundary_facets.iter().filter(move |f| f.tag == tag)
    }

    /// Mean over cells of the maximum vertex-to-vertex distance (mm).
    pub fn mesh_size(&self) -> f64 {
        if self.cells.is_empty() {
            return 0.0;
        }
        let total: f64 = (0..self.n_cells())
            .map(|c| {
                let x = self.cell_coords(c);
                let mut dmax = 0.0_f64;
                for a in 0..8 {
                    for b in a + 1..8 {
                        dmax = dmax.max(dist(x[a], x[b]));
                    }
                }
                dmax
            })
            .sum();
        total / self.n_cells() as f64
    }

    /// Checks connectivity ranges and facet tags.
    pub fn validate(&self) -> Result<()> {
        if self.cells.is_empty() {
            return Err(Error::InvalidInput("mesh has no cells".into()));
        }
        let nv = self.vertices.len();
        for (c, cell) in self.cells.iter().enumerate() {
            if let Some(v) = cell.iter().find(|&&v| v >= nv) {
                return Err(Error::InvalidInput(format!(
                    "cell {c} references vertex {v} but mesh has {nv} vertices"
                )));
            }
        }
        for f in &self.boundary_facets {
            if f.cell >= self.cells.len() || f.face > 5 {
                return Err(Error::InvalidInput(format!(
                    "facet ({}, {}) out of range",
                    f.cell, f.face
                )));
            }
        }
        Ok(())
    }

    /// Faces (cell, local face) not shared with any other cell and not
    /// collapsed to zero area.
    pub fn exterior_faces(&self) -> Vec<(usize, u8)> {
        let mut count: HashMap<Vec<usize>, (usize, usize, u8)> = HashMap::new();
        for (c, cell) in self.cells.iter().enumerate() {
            for (f, fv) in FACE_VERTICES.iter().enumerate() {
                let mut key: Vec<usize> = fv.iter().map(|&l| cell[l]).collect();
                key.sort_unstable();
                key.dedup();
                if key.len() < 3 {
                    continue;
                }
                let e = count.entry(key).or_insert((0, c, f as u8));
                e.0 += 1;
            }
        }
        let mut out: Vec<(usize, u8)> = count
            .into_values()
            .filter(|&(n, _, _)| n == 1)
            .map(|(_, c, f)| (c, f))
            .collect();
        out.sort_unstable();
        out
    }

    /// Outward area vector `∫ n dA` of a boundary face, by Gauss quadrature of
    /// the bilinear face map (mm²).
    pub fn face_area_vector(&self, cell: usize, face: u8) -> [f64; 3] {
        let x = self.cell_coords(cell);
        let fv = FACE_VERTICES[face as usize];
        let p = fv.map(|l| x[l]);
        // Bilinear patch: area vector integrates exactly with 2x2 Gauss.
        let g = [0.5 - 0.5 / 3f64.sqrt(), 0.5 + 0.5 / 3f64.sqrt()];
        let mut a = [0.0; 3];
        for &u in &g {
            for &v in &g {
                let (xu, xv) = bilinear_tangents(&p, u, v);
                let n = cross(xu, xv);
                for k in 0..3 {
                    a[k] += 0.25 * n[k];
                }
            }
        }
        a
    }
}

/// Tangents of the bilinear patch through `p = [p00, p10, p01, p11]`.
pub(crate) fn bilinear_tangents(p: &[[f64; 3]; 4], u: f64, v: f64) -> ([f64; 3], [f64; 3]) {
    let mut xu = [0.0; 3];
    let mut xv = [0.0; 3];
    for k in 0..3 {
        xu[k] = (1.0 - v) * (p[1][k] - p[0][k]) + v * (p[3][k] - p[2][k]);
        xv[k] = (1.0 - u) * (p[2][k] - p[0][k]) + u * (p[3][k] - p[1][k]);
    }
    (xu, xv)
}

pub(crate) fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Structured box `[0,lx]×[0,ly]×[0,lz]` (mm) with `n` cells per direction.
/// The faces x=0 and x=lx are tagged ENDO and EPI, z=lz is BASE and the
/// remaining sides EPI, which gives slab problems a complete tagging.
pub fn box_mesh(n: [usize; 3], l: [f64; 3]) -> Result<HexMesh> {
    if n.iter().any(|&k| k == 0) || l.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::InvalidInput("box mesh needs positive counts and lengths".into()));
    }
    let [nx, ny, nz] = n;
    let vid = |i: usize, j: usize, k: usize| i + (nx + 1) * (j + (ny + 1) * k);
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
    for k in 0..=nz {
        for j in 0..=ny {
            for i in 0..=nx {
                vertices.push([
                    l[0] * i as f64 / nx as f64,
                    l[1] * j as f64 / ny as f64,
                    l[2] * k as f64 / nz as f64,
                ]);
            }
        }
    }
    let mut cells = Vec::with_capacity(nx * ny * nz);
    let mut boundary_facets = Vec::new();
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let c = cells.len();
                let mut cell = [0; 8];
                for (loc, v) in cell.iter_mut().enumerate() {
                    *v = vid(i + (loc & 1), j + ((loc >> 1) & 1), k + ((loc >> 2) & 1));
                }
                cells.push(cell);
                let mut tag = |face: u8, t: Tag| boundary_facets.push(BoundaryFacet { cell: c, face, tag: t });
                if i == 0 {
                    tag(0, Tag::Endo);
                }
                if i == nx - 1 {
                    tag(1, Tag::Epi);
                }
                if j == 0 {
                    tag(2, Tag::Epi);
                }
                if j == ny - 1 {
                    tag(3, Tag::Epi);
                }
                if k == 0 {
                    tag(4, Tag::Epi);
                }
                if k == nz - 1 {
                    tag(5, Tag::Base);
                }
            }
        }
    }
    Ok(HexMesh {
        vertices,
        cells,
        boundary_facets,
        level: 0,
        shape: None,
    })
}
