//! Wavefront OBJ with per-vertex RGB appended to `v` lines (x y z r g b).
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! write/read cycle reproduces coordinates exactly and identical meshes
//! serialize to identical bytes.

use super::FaceMesh;
use crate::Vec3;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ObjError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub fn write_obj(path: &Path, mesh: &FaceMesh) -> Result<(), ObjError> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    write_obj_to(&mut w, mesh)?;
    w.flush()?;
    Ok(())
}

pub fn write_obj_to(w: &mut impl Write, mesh: &FaceMesh) -> Result<(), ObjError> {
    for (v, a) in mesh.vertices.iter().zip(&mesh.albedo) {
        writeln!(w, "v {} {} {} {} {} {}", v.x, v.y, v.z, a.x, a.y, a.z)?;
    }
    for t in &mesh.triangles {
        writeln!(w, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
    }
    Ok(())
}

pub fn read_obj(path: &Path) -> Result<FaceMesh, ObjError> {
    read_obj_from(&mut BufReader::new(std::fs::File::open(path)?))
}

pub fn read_obj_from(r: &mut impl BufRead) -> Result<FaceMesh, ObjError> {
    let mut vertices = Vec::new();
    let mut albedo = Vec::new();
    let mut triangles = Vec::new();
    for (idx, line) in r.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        let mut fields = line.split_whitespace();
        match fields.next() {
            Some("v") => {
                let nums: Vec<f64> = fields
                    .map(|f| {
                        f.parse::<f64>().map_err(|e| ObjError::Parse {
                            line: line_no,
                            message: format!("bad float `{f}`: {e}"),
                        })
                    })
                    .collect::<Result<_, _>>()?;
                if nums.len() != 3 && nums.len() != 6 {
                    return Err(ObjError::Parse {
                        line: line_no,
                        message: format!("vertex line has {} fields, expected 3 or 6", nums.len()),
                    });
                }
                vertices.push(Vec3::new(nums[0], nums[1], nums[2]));
                if nums.len() == 6 {
                    albedo.push(Vec3::new(nums[3], nums[4], nums[5]));
                } else {
                    albedo.push(Vec3::repeat(1.0));
                }
            }
            Some("f") => {
                let ids: Vec<usize> = fields
                    .map(|f| {
                        // Tolerate `v/vt/vn` references; only the vertex id matters.
                        let head = f.split('/').next().unwrap_or(f);
                        head.parse::<usize>().map_err(|e| ObjError::Parse {
                            line: line_no,
                            message: format!("bad index `{f}`: {e}"),
                        })
                    })
                    .collect::<Result<_, _>>()?;
                if ids.len() != 3 {
                    return Err(ObjError::Parse {
                        line: line_no,
                        message: format!("face has {} vertices, only triangles supported", ids.len()),
                    });
                }
                if ids.contains(&0) {
                    return Err(ObjError::Parse {
                        line: line_no,
                        message: "obj indices are 1-based".into(),
                    });
                }
                triangles.push([ids[0] - 1, ids[1] - 1, ids[2] - 1]);
            }
            // Comments, empty lines and unknown commands are skipped.
            _ => {}
        }
    }
    Ok(FaceMesh {
        vertices,
        triangles,
        albedo,
    })
}
