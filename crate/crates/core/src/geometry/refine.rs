use std::collections::HashMap;

use crate::error::{Error, Result};

use super::mesh::{BoundaryFacet, HexMesh};

/// Location of a fine cell inside its coarse ancestor: the ancestor id and the
/// integer offset of the fine cell in the `2^k` subdivision of each axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParentEntry {
    pub coarse: usize,
    pub offset: [u32; 3],
}

impl ParentEntry {
    /// Child index in `0..8^k`, `ox + 2^k·oy + 4^k·oz`.
    pub fn child_index(&self, depth: u32) -> usize {
        let n = 1usize << depth;
        self.offset[0] as usize + n * (self.offset[1] as usize + n * self.offset[2] as usize)
    }
}

/// A coarse mesh and its `k`-fold octree refinement.
#[derive(Clone, Debug)]
pub struct NestedMeshes {
    pub coarse: HexMesh,
    pub fine: HexMesh,
    pub depth: u32,
    pub parent_map: Vec<ParentEntry>,
}

impl NestedMeshes {
    pub fn ratio(&self) -> usize {
        1 << self.depth
    }

    /// Coarse cell and coarse reference coordinates of a fine-cell point.
    pub fn to_coarse(&self, fine_cell: usize, xi: [f64; 3]) -> (usize, [f64; 3]) {
        let p = self.parent_map[fine_cell];
        let n = self.ratio() as f64;
        (p.coarse, [0, 1, 2].map(|d| (p.offset[d] as f64 + xi[d]) / n))
    }

    /// Fine cell and fine reference coordinates of a coarse-cell point. Points
    /// on internal child boundaries go to the lower child.
    pub fn to_fine(&self, coarse_cell: usize, xi: [f64; 3]) -> (usize, [f64; 3]) {
        let n = self.ratio();
        let nf = n as f64;
        let mut off = [0usize; 3];
        let mut loc = [0.0; 3];
        for d in 0..3 {
            let s = xi[d] * nf;
            let mut o = s.floor();
            // A point exactly on a child boundary belongs to the lower child,
            // which mirrors the lowest-cell-id rule for nested numbering.
            if o == s && o > 0.0 {
                o -= 1.0;
            }
            let o = (o.max(0.0) as usize).min(n - 1);
            off[d] = o;
            loc[d] = s - o as f64;
        }
        let mut id = coarse_cell;
        for l in (0..self.depth).rev() {
            let b = |d: usize| (off[d] >> l) & 1;
            id = id * 8 + b(0) + 2 * b(1) + 4 * b(2);
        }
        (id, loc)
    }

    /// Fine cells of one coarse cell.
    pub fn children(&self, coarse_cell: usize) -> std::ops::Range<usize> {
        let m = 1usize << (3 * self.depth);
        coarse_cell * m..(coarse_cell + 1) * m
    }
}

/// Parent-vertex multiset of the half-lattice point `idx ∈ {0,1,2}³` of a
/// cell, and its unique sorted key. Degenerate entities of collapsed cells
/// share keys with the lower-dimensional entity they coincide with.
pub(crate) fn half_lattice_entity(cell: &[usize; 8], idx: [usize; 3]) -> (Vec<usize>, Vec<usize>) {
    let choices = |i: usize| -> &'static [usize] {
        match i {
            0 => &[0],
            2 => &[1],
            _ => &[0, 1],
        }
    };
    let mut multiset = Vec::with_capacity(8);
    for &c in choices(idx[2]) {
        for &b in choices(idx[1]) {
            for &a in choices(idx[0]) {
                multiset.push(cell[a + 2 * b + 4 * c]);
            }
        }
    }
    let mut key = multiset.clone();
    key.sort_unstable();
    key.dedup();
    (multiset, key)
}

fn refine_once(mesh: &HexMesh) -> (HexMesh, Vec<[u32; 3]>) {
    let mut vertices = mesh.vertices.clone();
    let mut index: HashMap<Vec<usize>, usize> = HashMap::new();
    let mut lattice_ids = Vec::with_capacity(mesh.n_cells());
    for cell in &mesh.cells {
        let mut ids = [0usize; 27];
        for r in 0..3 {
            for q in 0..3 {
                for p in 0..3 {
                    let (multiset, key) = half_lattice_entity(cell, [p, q, r]);
                    let id = if key.len() == 1 {
                        key[0]
                    } else {
                        *index.entry(key).or_insert_with(|| {
                            let mut x = [0.0; 3];
                            for &v in &multiset {
                                for k in 0..3 {
                                    x[k] += mesh.vertices[v][k];
                                }
                            }
                            let n = multiset.len() as f64;
                            vertices.push(x.map(|s| s / n));
                            vertices.len() - 1
                        })
                    };
                    ids[p + 3 * q + 9 * r] = id;
                }
            }
        }
        lattice_ids.push(ids);
    }
    let mut cells = Vec::with_capacity(8 * mesh.n_cells());
    let mut offsets = Vec::with_capacity(8 * mesh.n_cells());
    for ids in &lattice_ids {
        for ch in 0..8 {
            let o = [ch & 1, (ch >> 1) & 1, (ch >> 2) & 1];
            let mut cell = [0usize; 8];
            for (loc, v) in cell.iter_mut().enumerate() {
                let (a, b, c) = (loc & 1, (loc >> 1) & 1, (loc >> 2) & 1);
                *v = ids[(o[0] + a) + 3 * (o[1] + b) + 9 * (o[2] + c)];
            }
            cells.push(cell);
            offsets.push(o.map(|x| x as u32));
        }
    }
    let mut boundary_facets = Vec::with_capacity(4 * mesh.boundary_facets.len());
    for f in &mesh.boundary_facets {
        let (dim, side) = ((f.face / 2) as usize, (f.face % 2) as usize);
        for ch in 0..8 {
            if (ch >> dim) & 1 == side {
                boundary_facets.push(BoundaryFacet {
                    cell: 8 * f.cell + ch,
                    face: f.face,
                    tag: f.tag,
                });
            }
        }
    }
    let fine = HexMesh {
        vertices,
        cells,
        boundary_facets,
        level: mesh.level + 1,
        shape: mesh.shape,
    };
    (fine, offsets)
}

/// Splits every cell into `8^k` children by repeated midpoint subdivision of
/// the trilinear cell maps. The fine mesh describes exactly the same geometry.
pub fn refine_octree(mesh: &HexMesh, k: u32) -> Result<NestedMeshes> {
    if k == 0 {
        return Err(Error::InvalidInput("refinement depth must be at least 1".into()));
    }
    mesh.validate()?;
    let mut current = mesh.clone();
    let mut parent_map: Vec<ParentEntry> = (0..mesh.n_cells())
        .map(|c| ParentEntry {
            coarse: c,
            offset: [0; 3],
        })
        .collect();
    for _ in 0..k {
        let (fine, offsets) = refine_once(&current);
        parent_map = offsets
            .iter()
            .enumerate()
            .map(|(fc, o)| {
                let p = parent_map[fc / 8];
                ParentEntry {
                    coarse: p.coarse,
                    offset: [0, 1, 2].map(|d| 2 * p.offset[d] + o[d]),
                }
            })
            .collect();
        current = fine;
    }
    Ok(NestedMeshes {
        coarse: mesh.clone(),
        fine: current,
        depth: k,
        parent_map,
    })
}
