//! Line-oriented text format:
//!
//! ```text
//! LEVEL <k>
//! SHAPE <r_endo_short> <r_endo_long> <wall_thickness> <base_height>   (optional)
//! VERTICES <n>
//! <id> <x> <y> <z>
//! CELLS <n>
//! <id> <v0> ... <v7>
//! FACETS <n>
//! <cell> <local_face> <EPI|ENDO|BASE>
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. Floats are written in
//! shortest round-trip form, so write followed by read is lossless.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

use super::lv::LvShape;
use super::mesh::{BoundaryFacet, HexMesh, Tag};

pub fn format_mesh(mesh: &HexMesh) -> String {
    let mut s = String::with_capacity(64 * (mesh.n_vertices() + mesh.n_cells()));
    let _ = writeln!(s, "LEVEL {}", mesh.level);
    if let Some(sh) = mesh.shape {
        let _ = writeln!(
            s,
            "SHAPE {} {} {} {}",
            sh.r_endo_short, sh.r_endo_long, sh.wall_thickness, sh.base_height
        );
    }
    let _ = writeln!(s, "VERTICES {}", mesh.n_vertices());
    for (i, v) in mesh.vertices.iter().enumerate() {
        let _ = writeln!(s, "{i} {} {} {}", v[0], v[1], v[2]);
    }
    let _ = writeln!(s, "CELLS {}", mesh.n_cells());
    for (i, c) in mesh.cells.iter().enumerate() {
        let _ = write!(s, "{i}");
        for v in c {
            let _ = write!(s, " {v}");
        }
        s.push('\n');
    }
    let _ = writeln!(s, "FACETS {}", mesh.boundary_facets.len());
    for f in &mesh.boundary_facets {
        let _ = writeln!(s, "{} {} {}", f.cell, f.face, f.tag);
    }
    s
}

pub fn write_mesh(mesh: &HexMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_mesh(mesh)).map_err(|e| Error::io(path, e))
}

pub fn read_mesh(path: impl AsRef<Path>) -> Result<HexMesh> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_mesh(&text)
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Option<(usize, Vec<&'a str>)> {
        for (i, line) in self.inner.by_ref() {
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            return Some((i + 1, t.split_whitespace().collect()));
        }
        None
    }

    fn expect(&mut self, what: &str) -> Result<(usize, Vec<&'a str>)> {
        self.next().ok_or_else(|| Error::Parse {
            line: 0,
            msg: format!("unexpected end of file, expected {what}"),
        })
    }
}

fn num<T: std::str::FromStr>(tok: &str, line: usize) -> Result<T> {
    tok.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("bad number {tok:?}"),
    })
}

fn header(lines: &mut Lines<'_>, name: &str) -> Result<usize> {
    let (ln, toks) = lines.expect(name)?;
    if toks.len() != 2 || toks[0] != name {
        return Err(Error::Parse {
            line: ln,
            msg: format!("expected '{name} <count>'"),
        });
    }
    num(toks[1], ln)
}

fn arity(toks: &[&str], n: usize, line: usize) -> Result<()> {
    if toks.len() != n {
        return Err(Error::Parse {
            line,
            msg: format!("expected {n} fields, found {}", toks.len()),
        });
    }
    Ok(())
}

pub fn parse_mesh(text: &str) -> Result<HexMesh> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    let (ln, toks) = lines.expect("LEVEL")?;
    if toks.len() != 2 || toks[0] != "LEVEL" {
        return Err(Error::Parse {
            line: ln,
            msg: "expected 'LEVEL <k>'".into(),
        });
    }
    let level: u32 = num(toks[1], ln)?;

    let mut shape = None;
    let (ln, toks) = lines.expect("VERTICES")?;
    let nv: usize = if toks[0] == "SHAPE" {
        arity(&toks, 5, ln)?;
        shape = Some(LvShape {
            r_endo_short: num(toks[1], ln)?,
            r_endo_long: num(toks[2], ln)?,
            wall_thickness: num(toks[3], ln)?,
            base_height: num(toks[4], ln)?,
        });
        header(&mut lines, "VERTICES")?
    } else if toks[0] == "VERTICES" && toks.len() == 2 {
        num(toks[1], ln)?
    } else {
        return Err(Error::Parse {
            line: ln,
            msg: "expected SHAPE or VERTICES section".into(),
        });
    };

    let mut vertices = Vec::with_capacity(nv);
    for i in 0..nv {
        let (ln, t) = lines.expect("vertex record")?;
        arity(&t, 4, ln)?;
        let id: usize = num(t[0], ln)?;
        if id != i {
            return Err(Error::Parse {
                line: ln,
                msg: format!("vertex id {id} out of sequence, expected {i}"),
            });
        }
        vertices.push([num(t[1], ln)?, num(t[2], ln)?, num(t[3], ln)?]);
    }

    let nc = header(&mut lines, "CELLS")?;
    if nc == 0 {
        return Err(Error::Parse {
            line: 0,
            msg: "empty cell list".into(),
        });
    }
    let mut cells = Vec::with_capacity(nc);
    for i in 0..nc {
        let (ln, t) = lines.expect("cell record")?;
        arity(&t, 9, ln)?;
        let id: usize = num(t[0], ln)?;
        if id != i {
            return Err(Error::Parse {
                line: ln,
                msg: format!("cell id {id} out of sequence, expected {i}"),
            });
        }
        let mut c = [0usize; 8];
        for k in 0..8 {
            c[k] = num(t[k + 1], ln)?;
            if c[k] >= nv {
                return Err(Error::Parse {
                    line: ln,
                    msg: format!("vertex {} out of range", c[k]),
                });
            }
        }
        cells.push(c);
    }

    let nf = header(&mut lines, "FACETS")?;
    let mut boundary_facets = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (ln, t) = lines.expect("facet record")?;
        arity(&t, 3, ln)?;
        let cell: usize = num(t[0], ln)?;
        let face: u8 = num(t[1], ln)?;
        if cell >= nc || face > 5 {
            return Err(Error::Parse {
                line: ln,
                msg: format!("facet ({cell}, {face}) out of range"),
            });
        }
        let tag: Tag = t[2].parse().map_err(|_| Error::Parse {
            line: ln,
            msg: format!("unknown facet tag {:?}", t[2]),
        })?;
        boundary_facets.push(BoundaryFacet { cell, face, tag });
    }
    if let Some((ln, _)) = lines.next() {
        return Err(Error::Parse {
            line: ln,
            msg: "trailing data after FACETS section".into(),
        });
    }
    Ok(HexMesh {
        vertices,
        cells,
        boundary_facets,
        level,
        shape,
    })
}
