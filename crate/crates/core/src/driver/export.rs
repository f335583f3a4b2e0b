//! File output: CSV time series, legacy-VTK unstructured grids and a JSON
//! run report.
//!
//! CSV columns, in order:
//!
//! | column | unit |
//! |---|---|
//! | `t_s` | s |
//! | `p_lv_mmhg` | mmHg |
//! | `v_lv_3d_ml`, `v_lv_0d_ml` | mL |
//! | `solid_volume_ml` | mL, `∫ J dΩ₀` |
//! | `total_blood_ml` | mL |
//! | `mitral_open`, `aortic_open` | 0 or 1 |
//! | circulation state, `V_*_ml`, `p_*_mmhg`, `Q_*_ml_per_s` | |

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::coupling0d::{N_STATE, STATE_NAMES};
use crate::error::{Error, Result};
use crate::geometry::HexMesh;

use super::series::{Sample, TimeSeries};

pub fn csv_header() -> Vec<String> {
    let mut h: Vec<String> = [
        "t_s",
        "p_lv_mmhg",
        "v_lv_3d_ml",
        "v_lv_0d_ml",
        "solid_volume_ml",
        "total_blood_ml",
        "mitral_open",
        "aortic_open",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for name in STATE_NAMES {
        let unit = match &name[..1] {
            "V" => "ml",
            "p" => "mmhg",
            _ => "ml_per_s",
        };
        h.push(format!("{name}_{unit}"));
    }
    h
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        k => Error::Parse {
            line: 0,
            msg: format!("{}: {k:?}", path.display()),
        },
    }
}

pub fn write_series_csv(series: &TimeSeries, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(csv_header()).map_err(|e| csv_err(path, e))?;
    for s in &series.samples {
        let mut rec = vec![
            s.t.to_string(),
            s.p_lv.to_string(),
            s.v_lv_3d.to_string(),
            s.v_lv_0d.to_string(),
            s.solid_volume.to_string(),
            s.total_blood.to_string(),
            u8::from(s.mitral_open).to_string(),
            u8::from(s.aortic_open).to_string(),
        ];
        rec.extend(s.c1.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads samples written by [`write_series_csv`]. Beat summaries are not
/// stored in the CSV.
pub fn read_series_csv(path: impl AsRef<Path>) -> Result<Vec<Sample>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.iter().ne(csv_header().iter().map(String::as_str)) {
        return Err(Error::Parse {
            line: 1,
            msg: format!("{}: unexpected header", path.display()),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = i + 2;
        let v: Vec<f64> = rec
            .iter()
            .map(|x| {
                x.parse::<f64>().map_err(|e| Error::Parse {
                    line,
                    msg: format!("{x:?}: {e}"),
                })
            })
            .collect::<Result<_>>()?;
        let mut c1 = [0.0; N_STATE];
        c1.copy_from_slice(&v[8..8 + N_STATE]);
        out.push(Sample {
            t: v[0],
            p_lv: v[1],
            v_lv_3d: v[2],
            v_lv_0d: v[3],
            solid_volume: v[4],
            total_blood: v[5],
            mitral_open: v[6] != 0.0,
            aortic_open: v[7] != 0.0,
            c1,
        });
    }
    Ok(out)
}

/// Data attached to the vertices or cells of a field file.
#[derive(Clone, Debug, PartialEq)]
pub enum FieldData {
    Scalar(String, Vec<f64>),
    /// Interleaved 3-vectors.
    Vector(String, Vec<f64>),
}

impl FieldData {
    fn len(&self) -> usize {
        match self {
            FieldData::Scalar(_, v) => v.len(),
            FieldData::Vector(_, v) => v.len() / 3,
        }
    }

    fn write(&self, s: &mut String) {
        match self {
            FieldData::Scalar(name, v) => {
                let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
                for x in v {
                    let _ = writeln!(s, "{x}");
                }
            }
            FieldData::Vector(name, v) => {
                let _ = writeln!(s, "VECTORS {name} double");
                for c in v.chunks(3) {
                    let _ = writeln!(s, "{} {} {}", c[0], c[1], c[2]);
                }
            }
        }
    }
}

/// Legacy-VTK hexahedron node order from the lexicographic cell order.
const VTK_HEX: [usize; 8] = [0, 1, 3, 2, 4, 5, 7, 6];
const VTK_HEXAHEDRON: u8 = 12;

/// ASCII legacy-VTK unstructured grid. Coordinates are written as stored
/// (mm for meshes).
pub fn format_vtk(title: &str, mesh: &HexMesh, point_data: &[FieldData], cell_data: &[FieldData]) -> Result<String> {
    for f in point_data {
        if f.len() != mesh.n_vertices() {
            return Err(Error::DimensionMismatch {
                expected: mesh.n_vertices(),
                got: f.len(),
            });
        }
    }
    for f in cell_data {
        if f.len() != mesh.n_cells() {
            return Err(Error::DimensionMismatch {
                expected: mesh.n_cells(),
                got: f.len(),
            });
        }
    }
    let mut s = String::new();
    let title: String = title.chars().filter(|c| *c != '\n').take(255).collect();
    let _ = writeln!(s, "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {} double", mesh.n_vertices());
    for v in &mesh.vertices {
        let _ = writeln!(s, "{} {} {}", v[0], v[1], v[2]);
    }
    let _ = writeln!(s, "CELLS {} {}", mesh.n_cells(), 9 * mesh.n_cells());
    for c in &mesh.cells {
        let _ = write!(s, "8");
        for k in VTK_HEX {
            let _ = write!(s, " {}", c[k]);
        }
        s.push('\n');
    }
    let _ = writeln!(s, "CELL_TYPES {}", mesh.n_cells());
    for _ in &mesh.cells {
        let _ = writeln!(s, "{VTK_HEXAHEDRON}");
    }
    if !point_data.is_empty() {
        let _ = writeln!(s, "POINT_DATA {}", mesh.n_vertices());
        point_data.iter().for_each(|f| f.write(&mut s));
    }
    if !cell_data.is_empty() {
        let _ = writeln!(s, "CELL_DATA {}", mesh.n_cells());
        cell_data.iter().for_each(|f| f.write(&mut s));
    }
    Ok(s)
}

pub fn write_vtk(
    path: impl AsRef<Path>,
    title: &str,
    mesh: &HexMesh,
    point_data: &[FieldData],
    cell_data: &[FieldData],
) -> Result<()> {
    let path = path.as_ref();
    let s = format_vtk(title, mesh, point_data, cell_data)?;
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::InvalidInput(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
