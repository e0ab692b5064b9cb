//! Binary and ASCII STL.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use super::mesh::TriangleMesh;
use crate::error::{Error, Result};

const HEADER_LEN: usize = 80;
const FACET_LEN: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StlFormat {
    Ascii,
    Binary,
}

/// Parses an STL buffer, detecting the encoding.
///
/// A buffer is ASCII iff it begins with `solid` and parses as ASCII. Binary
/// exporters sometimes write `solid` into the 80-byte header, so a failed
/// ASCII parse falls back to binary when the length is consistent with it.
pub fn parse_stl(bytes: &[u8]) -> Result<TriangleMesh> {
    parse_stl_with_format(bytes).map(|(mesh, _)| mesh)
}

pub(crate) fn parse_stl_with_format(bytes: &[u8]) -> Result<(TriangleMesh, StlFormat)> {
    if bytes.starts_with(b"solid") {
        match parse_ascii_facets(bytes) {
            Ok(facets) => return TriangleMesh::from_soup(&facets).map(|m| (m, StlFormat::Ascii)),
            Err(ascii_err) => {
                if binary_length_consistent(bytes) {
                    let facets = parse_binary_facets(bytes)?;
                    return TriangleMesh::from_soup(&facets).map(|m| (m, StlFormat::Binary));
                }
                return Err(ascii_err);
            }
        }
    }
    let facets = parse_binary_facets(bytes)?;
    TriangleMesh::from_soup(&facets).map(|m| (m, StlFormat::Binary))
}

fn binary_length_consistent(bytes: &[u8]) -> bool {
    bytes.len() >= HEADER_LEN + 4 && {
        let n = u32::from_le_bytes(bytes[80..84].try_into().unwrap()) as usize;
        bytes.len() == HEADER_LEN + 4 + FACET_LEN * n
    }
}

fn parse_binary_facets(bytes: &[u8]) -> Result<Vec<[[f64; 3]; 3]>> {
    if bytes.len() < HEADER_LEN + 4 {
        return Err(Error::TruncatedStl {
            declared: 0,
            expected: HEADER_LEN + 4,
            actual: bytes.len(),
        });
    }
    let declared = u32::from_le_bytes(bytes[80..84].try_into().unwrap());
    let expected = HEADER_LEN + 4 + FACET_LEN * declared as usize;
    if bytes.len() != expected {
        return Err(Error::TruncatedStl {
            declared,
            expected,
            actual: bytes.len(),
        });
    }
    let facets = bytes[HEADER_LEN + 4..]
        .chunks_exact(FACET_LEN)
        .map(|chunk| {
            let read = |o: usize| f32::from_le_bytes(chunk[o..o + 4].try_into().unwrap()) as f64;
            // skip the 12-byte stored normal; normals are recomputed
            let v = |k: usize| {
                let o = 12 + 12 * k;
                [read(o), read(o + 4), read(o + 8)]
            };
            [v(0), v(1), v(2)]
        })
        .collect();
    Ok(facets)
}

fn malformed(line: usize, reason: impl Into<String>) -> Error {
    Error::MalformedStl {
        line,
        reason: reason.into(),
    }
}

fn parse_ascii_facets(bytes: &[u8]) -> Result<Vec<[[f64; 3]; 3]>> {
    let text = core::str::from_utf8(bytes).map_err(|e| {
        let line = bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count() + 1;
        malformed(line, "invalid UTF-8")
    })?;

    #[derive(PartialEq)]
    enum State {
        Start,
        Solid,
        Facet,
        Loop(usize),
        EndLoop,
        Done,
    }

    let mut state = State::Start;
    let mut facets = Vec::new();
    let mut current = [[0.0; 3]; 3];
    let mut last_line = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        last_line = line;
        let mut tokens = raw.split_ascii_whitespace();
        let Some(keyword) = tokens.next() else {
            continue;
        };
        state = match (state, keyword) {
            (State::Start, "solid") => State::Solid,
            (State::Solid, "facet") => State::Facet,
            (State::Solid, "endsolid") => State::Done,
            (State::Facet, "outer") => {
                if tokens.next() != Some("loop") {
                    return Err(malformed(line, "expected `outer loop`"));
                }
                State::Loop(0)
            }
            (State::Loop(k), "vertex") if k < 3 => {
                let mut v = [0.0; 3];
                for slot in v.iter_mut() {
                    let tok = tokens
                        .next()
                        .ok_or_else(|| malformed(line, "vertex needs three coordinates"))?;
                    *slot = tok
                        .parse::<f64>()
                        .map_err(|_| malformed(line, format!("bad number `{tok}`")))?;
                    if !slot.is_finite() {
                        return Err(malformed(line, "non-finite coordinate"));
                    }
                }
                if tokens.next().is_some() {
                    return Err(malformed(line, "trailing tokens after vertex"));
                }
                current[k] = v;
                State::Loop(k + 1)
            }
            (State::Loop(3), "endloop") => State::EndLoop,
            (State::EndLoop, "endfacet") => {
                facets.push(current);
                State::Solid
            }
            (State::Done, _) => return Err(malformed(line, "content after endsolid")),
            (_, other) => return Err(malformed(line, format!("unexpected `{other}`"))),
        };
    }
    if state != State::Done {
        return Err(malformed(last_line, "missing endsolid"));
    }
    Ok(facets)
}

/// Encodes a mesh as binary STL (stored normals are the recomputed ones).
pub fn write_binary_stl(mesh: &TriangleMesh) -> Vec<u8> {
    let n = mesh.triangles().len();
    let mut out = Vec::with_capacity(HEADER_LEN + 4 + FACET_LEN * n);
    let mut header = [0u8; HEADER_LEN];
    let tag = b"binary STL written by tactdiff";
    header[..tag.len()].copy_from_slice(tag);
    out.extend_from_slice(&header);
    out.extend_from_slice(&(n as u32).to_le_bytes());
    for (facet, normal) in mesh.facets().zip(mesh.normals()) {
        for c in normal {
            out.extend_from_slice(&(*c as f32).to_le_bytes());
        }
        for v in facet {
            for c in v {
                out.extend_from_slice(&(c as f32).to_le_bytes());
            }
        }
        out.extend_from_slice(&0u16.to_le_bytes());
    }
    out
}

/// Encodes a mesh as ASCII STL. Coordinates are written with enough digits
/// to round-trip `f64` exactly.
pub fn write_ascii_stl(mesh: &TriangleMesh, name: &str) -> String {
    let mut out = String::new();
    let name = if name.is_empty() { "mesh" } else { name };
    let _ = writeln!(out, "solid {name}");
    for (facet, n) in mesh.facets().zip(mesh.normals()) {
        let _ = writeln!(out, "  facet normal {:e} {:e} {:e}", n[0], n[1], n[2]);
        out.push_str("    outer loop\n");
        for v in facet {
            let _ = writeln!(out, "      vertex {:e} {:e} {:e}", v[0], v[1], v[2]);
        }
        out.push_str("    endloop\n  endfacet\n");
    }
    let _ = writeln!(out, "endsolid {name}");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::primitives;
    use alloc::vec;

    fn unit_cube() -> TriangleMesh {
        primitives::cuboid(1.0, 1.0, 1.0)
    }

    #[test]
    fn binary_unit_cube() {
        let bytes = write_binary_stl(&unit_cube());
        assert_eq!(bytes.len(), 84 + 50 * 12);
        let (mesh, format) = parse_stl_with_format(&bytes).unwrap();
        assert_eq!(format, StlFormat::Binary);
        assert_eq!(mesh.triangles().len(), 12);
        let ext = mesh.bounds().extent();
        for e in ext {
            assert!((e - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ascii_zero_area_triangle_is_empty_mesh() {
        let text = "solid t\nfacet normal 0 0 0\nouter loop\nvertex 0 0 0\nvertex 1 1 1\nvertex 2 2 2\nendloop\nendfacet\nendsolid t\n";
        assert_eq!(parse_stl(text.as_bytes()).unwrap_err(), Error::EmptyMesh);
    }

    #[test]
    fn declared_count_exceeding_facets_is_truncated() {
        let mesh = TriangleMesh::from_soup(&vec![
            [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
            9
        ])
        .unwrap();
        let mut bytes = write_binary_stl(&mesh);
        bytes[80..84].copy_from_slice(&10u32.to_le_bytes());
        match parse_stl(&bytes) {
            Err(Error::TruncatedStl {
                declared,
                expected,
                actual,
            }) => {
                assert_eq!(declared, 10);
                assert_eq!(expected, 84 + 500);
                assert_eq!(actual, 84 + 450);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_ascii_reports_line() {
        let text = "solid t\nfacet normal 0 0 1\nouter loop\nvertex 0 0 zero\n";
        match parse_stl(text.as_bytes()) {
            Err(Error::MalformedStl { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn binary_header_starting_with_solid_still_parses() {
        let mut bytes = write_binary_stl(&unit_cube());
        bytes[..5].copy_from_slice(b"solid");
        let (mesh, format) = parse_stl_with_format(&bytes).unwrap();
        assert_eq!(format, StlFormat::Binary);
        assert_eq!(mesh.triangles().len(), 12);
    }

    #[test]
    fn ascii_round_trip_is_exact() {
        let mesh = primitives::uv_sphere(3.3, 12, 7);
        let text = write_ascii_stl(&mesh, "sphere");
        let back = parse_stl(text.as_bytes()).unwrap();
        let a: Vec<_> = mesh.facets().collect();
        let b: Vec<_> = back.facets().collect();
        assert_eq!(a, b);
    }

    #[test]
    fn binary_and_ascii_encodings_agree() {
        let mesh = primitives::pacman(7.0, 4.0, 48);
        let from_bin = parse_stl(&write_binary_stl(&mesh)).unwrap();
        let from_ascii = parse_stl(write_ascii_stl(&mesh, "p").as_bytes()).unwrap();
        assert_eq!(from_bin.triangles().len(), from_ascii.triangles().len());
        for (fa, fb) in from_bin.facets().zip(from_ascii.facets()) {
            for k in 0..3 {
                for c in 0..3 {
                    assert!((fa[k][c] - fb[k][c]).abs() < 1e-5);
                }
            }
        }
        // re-encoding the binary parse reproduces it bit for bit
        let again = parse_stl(&write_binary_stl(&from_bin)).unwrap();
        assert_eq!(again.facets().collect::<Vec<_>>(), from_bin.facets().collect::<Vec<_>>());
    }

    #[test]
    fn normals_are_unit_length() {
        let mesh = parse_stl(&write_binary_stl(&primitives::ring(8.0, 5.0, 4.0, 40))).unwrap();
        for n in mesh.recompute_normals() {
            let len = libm::sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]);
            assert!((len - 1.0).abs() < 1e-6);
        }
    }
}
