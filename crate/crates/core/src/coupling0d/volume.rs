//! Cavity volume enclosed by the deformed endocardium and a flat fan over
//! the basal endocardial ring, by the divergence theorem.

use std::collections::HashMap;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::geometry::FACE_VERTICES;
use crate::mechanics::surface::{current_geometry, dnormal};
use crate::mechanics::Mechanics;
use crate::units::ML_PER_M3;

pub struct CavityVolume {
    /// Ordered dofs of the basal ring; the fan normal points out of the cavity.
    ring: Vec<usize>,
}

impl CavityVolume {
    /// Finds the boundary loop of the endocardial surface. Requires a linear
    /// displacement space so that the ring edges are straight.
    pub fn new(mech: &Mechanics) -> Result<Self> {
        let space = mech.space();
        if space.degree() != 1 {
            return Err(Error::Unsupported("cavity volume needs a linear displacement space".into()));
        }
        let mut edges: HashMap<(usize, usize), (usize, usize, usize)> = HashMap::new();
        for f in space.mesh().facets_with(crate::geometry::Tag::Endo) {
            let dofs = space.dofs(f.cell);
            let fv = FACE_VERTICES[f.face as usize];
            // Corners in (u, v) order 00, 10, 01, 11; walk the perimeter.
            let loop_ = [fv[0], fv[1], fv[3], fv[2]];
            for k in 0..4 {
                let (a, b) = (dofs[loop_[k]], dofs[loop_[(k + 1) % 4]]);
                if a == b {
                    continue;
                }
                let key = (a.min(b), a.max(b));
                let e = edges.entry(key).or_insert((a, b, 0));
                e.2 += 1;
            }
        }
        let boundary: Vec<(usize, usize)> = edges.values().filter(|e| e.2 == 1).map(|e| (e.0, e.1)).collect();
        if boundary.len() < 3 {
            return Err(Error::OpenRing(format!("endocardium has {} boundary edges", boundary.len())));
        }
        let mut next: HashMap<usize, usize> = HashMap::new();
        for &(a, b) in &boundary {
            if next.insert(a, b).is_some() {
                return Err(Error::OpenRing(format!("vertex dof {a} starts two boundary edges")));
            }
        }
        let start = boundary.iter().map(|e| e.0).min().unwrap_or(0);
        let mut ring = vec![start];
        let mut cur = start;
        loop {
            let n = *next
                .get(&cur)
                .ok_or_else(|| Error::OpenRing(format!("boundary chain breaks at dof {cur}")))?;
            if n == start {
                break;
            }
            if ring.len() > boundary.len() {
                return Err(Error::OpenRing("boundary chain does not close".into()));
            }
            ring.push(n);
            cur = n;
        }
        if ring.len() != boundary.len() {
            return Err(Error::OpenRing(format!(
                "endocardial boundary has several loops ({} of {} edges chained)",
                ring.len(),
                boundary.len()
            )));
        }
        let mut cv = CavityVolume { ring };
        // Orient the fan so the closed surface has zero total vector area.
        let endo_area: Vector3<f64> = endo_vector_area(mech, None);
        if cv.cap_vector_area(mech, None).dot(&endo_area) < 0.0 {
            cv.ring.reverse();
        }
        Ok(cv)
    }

    pub fn ring(&self) -> &[usize] {
        &self.ring
    }

    fn ring_points(&self, mech: &Mechanics, d: Option<&[f64]>) -> Vec<Vector3<f64>> {
        let xs = mech.space().dof_points();
        self.ring
            .iter()
            .map(|&k| {
                let mut p = Vector3::from(xs[k]);
                if let Some(d) = d {
                    p += Vector3::new(d[3 * k], d[3 * k + 1], d[3 * k + 2]);
                }
                p
            })
            .collect()
    }

    fn cap_vector_area(&self, mech: &Mechanics, d: Option<&[f64]>) -> Vector3<f64> {
        let r = self.ring_points(mech, d);
        let c = r.iter().sum::<Vector3<f64>>() / r.len() as f64;
        (0..r.len()).map(|i| (r[i] - c).cross(&(r[(i + 1) % r.len()] - c)) * 0.5).sum()
    }

    /// Enclosed volume in mL.
    pub fn volume(&self, mech: &Mechanics, d: &[f64]) -> Result<f64> {
        check_len(mech, d)?;
        let space = mech.space();
        let mut v = 0.0;
        for fq in mech.endo_quadrature() {
            let dofs = space.dofs(fq.cell);
            for pt in &fq.points {
                let [x, xu, xv] = current_geometry(space, dofs, pt, Some(d));
                // The facet normal points into the cavity.
                v -= x.dot(&xu.cross(&xv)) * pt.weight;
            }
        }
        let r = self.ring_points(mech, Some(d));
        let c = r.iter().sum::<Vector3<f64>>() / r.len() as f64;
        for i in 0..r.len() {
            v += c.dot(&r[i].cross(&r[(i + 1) % r.len()])) * 0.5;
        }
        Ok(v / 3.0 * ML_PER_M3)
    }

    /// Exact gradient of [`volume`](Self::volume) with respect to the
    /// interleaved displacement (mL/m).
    pub fn gradient(&self, mech: &Mechanics, d: &[f64]) -> Result<Vec<f64>> {
        check_len(mech, d)?;
        let space = mech.space();
        let mut g = vec![0.0; d.len()];
        for fq in mech.endo_quadrature() {
            let dofs = space.dofs(fq.cell);
            for pt in &fq.points {
                let [x, xu, xv] = current_geometry(space, dofs, pt, Some(d));
                let n = xu.cross(&xv);
                for (b, &k) in dofs.iter().enumerate() {
                    if pt.phi[b] == 0.0 && pt.du[b] == 0.0 && pt.dv[b] == 0.0 {
                        continue;
                    }
                    for e in 0..3 {
                        let dn = dnormal(pt, b, e, &xu, &xv);
                        g[3 * k + e] -= (pt.phi[b] * n[e] + x.dot(&dn)) * pt.weight;
                    }
                }
            }
        }
        let r = self.ring_points(mech, Some(d));
        let m = r.len();
        let c = r.iter().sum::<Vector3<f64>>() / m as f64;
        let mut dc = Vector3::zeros();
        for i in 0..m {
            let (a, b) = (r[i], r[(i + 1) % m]);
            // ∂/∂· of c·(a × b)/2
            dc += a.cross(&b) * 0.5;
            let da = b.cross(&c) * 0.5;
            let db = c.cross(&a) * 0.5;
            for e in 0..3 {
                g[3 * self.ring[i] + e] += da[e];
                g[3 * self.ring[(i + 1) % m] + e] += db[e];
            }
        }
        for &k in &self.ring {
            for e in 0..3 {
                g[3 * k + e] += dc[e] / m as f64;
            }
        }
        g.iter_mut().for_each(|x| *x *= ML_PER_M3 / 3.0);
        Ok(g)
    }

    /// Vector area of the closed surface, zero up to quadrature error.
    pub fn closure_defect(&self, mech: &Mechanics, d: Option<&[f64]>) -> Vector3<f64> {
        self.cap_vector_area(mech, d) - endo_vector_area(mech, d)
    }
}

fn endo_vector_area(mech: &Mechanics, d: Option<&[f64]>) -> Vector3<f64> {
    let space = mech.space();
    let mut a = Vector3::zeros();
    for fq in mech.endo_quadrature() {
        let dofs = space.dofs(fq.cell);
        for pt in &fq.points {
            let [_, xu, xv] = current_geometry(space, dofs, pt, d);
            a += xu.cross(&xv) * pt.weight;
        }
    }
    a
}

fn check_len(mech: &Mechanics, d: &[f64]) -> Result<()> {
    if d.len() != mech.n_dofs() {
        return Err(Error::DimensionMismatch {
            expected: mech.n_dofs(),
            got: d.len(),
        });
    }
    Ok(())
}
