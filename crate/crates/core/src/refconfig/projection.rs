//! Transfer of a displacement from an independent (non-nested) mesh by point
//! location, with closest-point values for targets outside that mesh.

use nalgebra::{Matrix3, Vector2, Vector3};

use crate::error::{Error, Result};
use crate::fem::FeSpace;
use crate::geometry::{face_to_cell, trilinear_jacobian, trilinear_map};
use crate::par;

/// Reference-coordinate slack for accepting a point as inside a cell.
const INSIDE_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Location {
    Inside { cell: usize, xi: [f64; 3] },
    /// Closest point on the boundary, at `distance` (m).
    Outside { cell: usize, xi: [f64; 3], distance: f64 },
}

impl Location {
    pub fn cell_xi(&self) -> (usize, [f64; 3]) {
        match *self {
            Location::Inside { cell, xi } | Location::Outside { cell, xi, .. } => (cell, xi),
        }
    }

    pub fn is_inside(&self) -> bool {
        matches!(self, Location::Inside { .. })
    }
}

#[derive(Clone, Copy, Debug)]
struct Aabb {
    lo: [f64; 3],
    hi: [f64; 3],
}

impl Aabb {
    fn of(points: &[[f64; 3]]) -> Self {
        let mut b = Aabb {
            lo: [f64::INFINITY; 3],
            hi: [f64::NEG_INFINITY; 3],
        };
        for p in points {
            for k in 0..3 {
                b.lo[k] = b.lo[k].min(p[k]);
                b.hi[k] = b.hi[k].max(p[k]);
            }
        }
        b
    }

    fn inflate(mut self, h: f64) -> Self {
        for k in 0..3 {
            self.lo[k] -= h;
            self.hi[k] += h;
        }
        self
    }

    fn contains(&self, x: [f64; 3]) -> bool {
        (0..3).all(|k| x[k] >= self.lo[k] && x[k] <= self.hi[k])
    }

    fn distance(&self, x: [f64; 3]) -> f64 {
        (0..3)
            .map(|k| (self.lo[k] - x[k]).max(0.0).max(x[k] - self.hi[k]).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// Cell search structure: per-cell boxes binned on a uniform grid, plus the
/// exterior faces for closest-point queries.
pub struct PointLocator<'a> {
    space: &'a FeSpace,
    bounds: Aabb,
    dims: [usize; 3],
    bins: Vec<Vec<usize>>,
    faces: Vec<(usize, u8, Aabb)>,
}

impl<'a> PointLocator<'a> {
    pub fn new(space: &'a FeSpace) -> Result<Self> {
        let n = space.n_cells();
        if n == 0 {
            return Err(Error::InvalidInput("point location on an empty mesh".into()));
        }
        let boxes: Vec<Aabb> = (0..n).map(|c| Aabb::of(&space.cell_coords(c))).collect();
        let all = Aabb::of(&boxes.iter().flat_map(|b| [b.lo, b.hi]).collect::<Vec<_>>());
        let diam = (0..3).map(|k| all.hi[k] - all.lo[k]).fold(0.0, f64::max);
        let pad = 1e-9 * diam;
        let bounds = all.inflate(pad);
        let per = ((n as f64).cbrt().ceil() as usize).max(1);
        let dims = [per; 3];
        let mut bins = vec![Vec::new(); per * per * per];
        let grid = GridIndex { bounds, dims };
        for (c, b) in boxes.iter().enumerate() {
            let b = b.inflate(pad);
            let lo = grid.cell_of(b.lo);
            let hi = grid.cell_of(b.hi);
            for k in lo[2]..=hi[2] {
                for j in lo[1]..=hi[1] {
                    for i in lo[0]..=hi[0] {
                        bins[i + per * (j + per * k)].push(c);
                    }
                }
            }
        }
        let faces = space
            .mesh()
            .exterior_faces()
            .into_iter()
            .map(|(c, f)| {
                let xs = space.cell_coords(c);
                let corners: Vec<[f64; 3]> = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)]
                    .iter()
                    .map(|&(u, v)| trilinear_map(&xs, face_to_cell(f, u, v)))
                    .collect();
                (c, f, Aabb::of(&corners))
            })
            .collect();
        Ok(PointLocator {
            space,
            bounds,
            dims,
            bins,
            faces,
        })
    }

    /// Cell and reference coordinates containing `x` (m), if any.
    pub fn find_cell(&self, x: [f64; 3]) -> Option<(usize, [f64; 3])> {
        if !self.bounds.contains(x) {
            return None;
        }
        let g = GridIndex {
            bounds: self.bounds,
            dims: self.dims,
        };
        let [i, j, k] = g.cell_of(x);
        let per = self.dims[0];
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for &c in &self.bins[i + per * (j + per * k)] {
            let xs = self.space.cell_coords(c);
            if let Some(xi) = inverse_map(&xs, x) {
                let out = xi.iter().map(|&t| (-t).max(t - 1.0).max(0.0)).fold(0.0, f64::max);
                if out <= INSIDE_TOL && best.is_none_or(|b| out < b.2) {
                    best = Some((c, xi.map(|t| t.clamp(0.0, 1.0)), out));
                }
            }
        }
        best.map(|(c, xi, _)| (c, xi))
    }

    /// Closest point on the boundary of the mesh.
    pub fn closest_boundary_point(&self, x: [f64; 3]) -> (usize, [f64; 3], f64) {
        let mut order: Vec<(f64, usize)> = self
            .faces
            .iter()
            .enumerate()
            .map(|(i, f)| (f.2.distance(x), i))
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut best = (0, [0.0; 3], f64::INFINITY);
        for (lb, i) in order {
            if lb > best.2 {
                break;
            }
            let (c, f, _) = self.faces[i];
            let xs = self.space.cell_coords(c);
            let (uv, dist) = closest_on_face(&xs, f, x);
            if dist < best.2 {
                best = (c, face_to_cell(f, uv[0], uv[1]), dist);
            }
        }
        best
    }

    pub fn locate(&self, x: [f64; 3]) -> Location {
        match self.find_cell(x) {
            Some((cell, xi)) => Location::Inside { cell, xi },
            None => {
                let (cell, xi, distance) = self.closest_boundary_point(x);
                Location::Outside { cell, xi, distance }
            }
        }
    }
}

struct GridIndex {
    bounds: Aabb,
    dims: [usize; 3],
}

impl GridIndex {
    fn cell_of(&self, x: [f64; 3]) -> [usize; 3] {
        std::array::from_fn(|k| {
            let w = self.bounds.hi[k] - self.bounds.lo[k];
            let t = if w > 0.0 { (x[k] - self.bounds.lo[k]) / w } else { 0.0 };
            ((t * self.dims[k] as f64).floor().max(0.0) as usize).min(self.dims[k] - 1)
        })
    }
}

/// Newton inversion of the trilinear map. Returns the reference point if the
/// iteration converges, whether or not it lies in the unit cube.
pub fn inverse_map(xs: &[[f64; 3]; 8], x: [f64; 3]) -> Option<[f64; 3]> {
    let target = Vector3::from(x);
    let mut xi = [0.5; 3];
    let scale = (Vector3::from(xs[7]) - Vector3::from(xs[0])).norm().max(1e-300);
    for _ in 0..40 {
        let r = Vector3::from(trilinear_map(xs, xi)) - target;
        let jac = trilinear_jacobian(xs, xi);
        let j = Matrix3::from_fn(|a, k| jac[a][k]);
        let step = j.try_inverse()? * r;
        for k in 0..3 {
            // Keep iterates near the cell so that a far-away solution of
            // the (nonlinear) map cannot be reached.
            xi[k] = (xi[k] - step[k]).clamp(-1.0, 2.0);
        }
        if step.norm() < 1e-15 {
            let res = (Vector3::from(trilinear_map(xs, xi)) - target).norm();
            return (res <= 1e-12 * scale).then_some(xi);
        }
    }
    let res = (Vector3::from(trilinear_map(xs, xi)) - target).norm();
    (res <= 1e-12 * scale).then_some(xi)
}

/// Closest point to `x` on a bilinear face; returns `(u, v)` and the distance.
pub fn closest_on_face(xs: &[[f64; 3]; 8], face: u8, x: [f64; 3]) -> ([f64; 2], f64) {
    let p = Vector3::from(x);
    let pos = |u: f64, v: f64| Vector3::from(trilinear_map(xs, face_to_cell(face, u, v)));
    let c00 = pos(0.0, 0.0);
    let c10 = pos(1.0, 0.0);
    let c01 = pos(0.0, 1.0);
    let c11 = pos(1.0, 1.0);
    // X(u, v) = a + b u + c v + e u v
    let (a, b, c, e) = (c00, c10 - c00, c01 - c00, c11 - c10 - c01 + c00);
    let eval = |u: f64, v: f64| a + b * u + c * v + e * (u * v);
    let dist = |u: f64, v: f64| (eval(u, v) - p).norm();
    let mut best = ([0.0, 0.0], f64::INFINITY);
    let consider = |u: f64, v: f64, best: &mut ([f64; 2], f64)| {
        let d = dist(u, v);
        if d < best.1 {
            *best = ([u, v], d);
        }
    };
    // Interior stationary points by Newton from several starts.
    for &(u0, v0) in &[(0.5, 0.5), (0.1, 0.1), (0.9, 0.1), (0.1, 0.9), (0.9, 0.9)] {
        let (mut u, mut v) = (u0, v0);
        for _ in 0..50 {
            let r = eval(u, v) - p;
            let xu = b + e * v;
            let xv = c + e * u;
            let g = Vector2::new(r.dot(&xu), r.dot(&xv));
            let h = nalgebra::Matrix2::new(xu.dot(&xu), xu.dot(&xv) + r.dot(&e), xu.dot(&xv) + r.dot(&e), xv.dot(&xv));
            let Some(hi) = h.try_inverse() else { break };
            let s = hi * g;
            u -= s[0];
            v -= s[1];
            if !(u.is_finite() && v.is_finite()) || s.norm() < 1e-15 {
                break;
            }
        }
        if (0.0..=1.0).contains(&u) && (0.0..=1.0).contains(&v) {
            consider(u, v, &mut best);
        }
    }
    // Edges: each is a straight segment.
    for (s, t) in [(c00, c10), (c10, c11), (c01, c11), (c00, c01)] {
        let dir = t - s;
        let len2 = dir.norm_squared();
        let w = if len2 > 0.0 { ((p - s).dot(&dir) / len2).clamp(0.0, 1.0) } else { 0.0 };
        let q = s + dir * w;
        let d = (q - p).norm();
        if d < best.1 {
            let uv = if s == c00 && t == c10 {
                [w, 0.0]
            } else if s == c10 && t == c11 {
                [1.0, w]
            } else if s == c01 && t == c11 {
                [w, 1.0]
            } else {
                [0.0, w]
            };
            best = (uv, d);
        }
    }
    best
}

/// Result of projecting a displacement onto target points.
#[derive(Clone, Debug)]
pub struct Projection {
    pub values: Vec<[f64; 3]>,
    pub locations: Vec<Location>,
}

impl Projection {
    pub fn n_internal(&self) -> usize {
        self.locations.iter().filter(|l| l.is_inside()).count()
    }

    pub fn n_external(&self) -> usize {
        self.locations.len() - self.n_internal()
    }

    /// `x₀ = x̃ − d̂` at the targets.
    pub fn recovered_reference(&self, targets: &[[f64; 3]]) -> Vec<[f64; 3]> {
        targets
            .iter()
            .zip(&self.values)
            .map(|(x, d)| [x[0] - d[0], x[1] - d[1], x[2] - d[2]])
            .collect()
    }
}

/// Evaluates the interleaved vector field `d` of `source` at `targets` (m):
/// by its finite element expansion inside the source mesh, and at the
/// closest boundary point outside it.
pub fn project_displacement(source: &FeSpace, d: &[f64], targets: &[[f64; 3]]) -> Result<Projection> {
    if d.len() != 3 * source.n_dofs() {
        return Err(Error::DimensionMismatch {
            expected: 3 * source.n_dofs(),
            got: d.len(),
        });
    }
    let loc = PointLocator::new(source)?;
    let locations: Vec<Location> = par::map_indexed(targets.len(), |i| loc.locate(targets[i]));
    let values = locations
        .iter()
        .map(|l| {
            let (c, xi) = l.cell_xi();
            source.eval_vector(c, xi, d)
        })
        .collect();
    Ok(Projection { values, locations })
}
