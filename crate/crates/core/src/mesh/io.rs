//! Plain-text mesh dumps.
//!
//! ```text
//! v <x> <y>        one line per vertex, in id order
//! t <i> <j> <k>    one line per leaf, vertex ids, newest vertex first
//! ```
//! Coordinates are written with 17 significant digits so that they round-trip.

use std::io::{self, BufRead, Write};

use super::{MeshError, Triangulation};
use crate::geometry::Point;

impl Triangulation {
    pub fn write_dump(&self, mut w: impl Write) -> io::Result<()> {
        for p in self.vertices() {
            writeln!(w, "v {:.16e} {:.16e}", p[0], p[1])?;
        }
        for &id in self.leaves() {
            let [a, b, c] = self.node(id).vertices;
            writeln!(w, "t {a} {b} {c}")?;
        }
        Ok(())
    }
}

/// Contents of a mesh dump.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MeshDump {
    pub vertices: Vec<Point>,
    pub triangles: Vec<[u32; 3]>,
}

pub fn read_mesh_dump(r: impl BufRead) -> Result<MeshDump, MeshError> {
    let mut dump = MeshDump::default();
    for (i, line) in r.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| MeshError::Parse { line: line_no, reason: e.to_string() })?;
        let mut parts = line.split_whitespace();
        let bad = |reason: &str| MeshError::Parse { line: line_no, reason: reason.to_string() };
        match parts.next() {
            None => continue,
            Some("v") => {
                let mut xy = [0.0; 2];
                for c in &mut xy {
                    *c = parts.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad("expected coordinate"))?;
                }
                dump.vertices.push(xy);
            }
            Some("t") => {
                let mut ids = [0u32; 3];
                for v in &mut ids {
                    *v = parts.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad("expected vertex id"))?;
                }
                if ids.iter().any(|&v| v as usize >= dump.vertices.len()) {
                    return Err(bad("vertex id out of range"));
                }
                dump.triangles.push(ids);
            }
            Some(other) => return Err(bad(&format!("unknown record `{other}`"))),
        }
    }
    Ok(dump)
}
