//! The `fiber-mesh v1` text format.
//!
//! ```text
//! fiber-mesh v1
//! # comment
//! VERTICES
//! <id> <x> <y>
//! EDGES
//! <v0> <v1> <length>
//! FACES
//! <e0> <e1> <e2> <orientation>
//! CORNERS
//! <face> <vertex> <x> <y> <dre> <dim> [<d2re> <d2im>]
//! ```
//!
//! Vertex ids must be `0..V` in order; edges and faces are numbered by
//! position. Corner `c` of a face is the vertex opposite edge `e_c`;
//! orientation `+1` says the corners run counter-clockwise in the face
//! chart, `-1` that they run clockwise. The optional CORNERS section
//! gives each corner's position in the face chart and the first and
//! (optionally) second derivative of the home-to-face transition there;
//! without it every face uses the home coordinates with identity
//! transitions.

use super::{Edge, Face, Fiber};
use crate::{Error, Result, C64};
use std::fmt::Write as _;
use std::path::Path;

pub fn load_fiber(path: &Path) -> Result<Fiber> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
    parse_fiber(&text)
}

#[derive(PartialEq, Clone, Copy)]
enum Section {
    None,
    Vertices,
    Edges,
    Faces,
    Corners,
}

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn nums<T: std::str::FromStr>(line: usize, tokens: &[&str], want: usize) -> Result<Vec<T>> {
    if tokens.len() != want {
        return Err(perr(line, format!("expected {want} fields, found {}", tokens.len())));
    }
    tokens
        .iter()
        .map(|t| t.parse::<T>().map_err(|_| perr(line, format!("cannot parse '{t}'"))))
        .collect()
}

pub fn parse_fiber(text: &str) -> Result<Fiber> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()));
    match lines.find(|(_, l)| !l.is_empty()) {
        Some((_, "fiber-mesh v1")) => {}
        Some((n, other)) => return Err(perr(n, format!("expected header 'fiber-mesh v1', found '{other}'"))),
        None => return Err(perr(0, "empty file")),
    }
    let mut section = Section::None;
    let mut home = Vec::new();
    let mut edges = Vec::new();
    let mut raw_faces: Vec<([usize; 3], i64, usize)> = Vec::new();
    let mut corners: Vec<(usize, usize, C64, C64, C64, usize)> = Vec::new();
    for (n, l) in lines {
        if l.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = l.split_whitespace().collect();
        let next = match tokens[0] {
            "VERTICES" => Some(Section::Vertices),
            "EDGES" => Some(Section::Edges),
            "FACES" => Some(Section::Faces),
            "CORNERS" => Some(Section::Corners),
            _ => None,
        };
        if let Some(s) = next {
            section = s;
            continue;
        }
        match section {
            Section::None => return Err(perr(n, "data before the first section")),
            Section::Vertices => {
                let id: usize = tokens[0].parse().map_err(|_| perr(n, "bad vertex id"))?;
                if id != home.len() {
                    return Err(perr(n, format!("vertex id {id} out of sequence")));
                }
                let xy: Vec<f64> = nums(n, &tokens[1..], 2)?;
                home.push(C64::new(xy[0], xy[1]));
            }
            Section::Edges => {
                let v: Vec<usize> = nums(n, &tokens[..2.min(tokens.len())], 2)?;
                let len: Vec<f64> = nums(n, &tokens[2..], 1)?;
                edges.push(Edge { v: [v[0], v[1]], length: len[0] });
            }
            Section::Faces => {
                let e: Vec<usize> = nums(n, &tokens[..3.min(tokens.len())], 3)?;
                let o: Vec<i64> = nums(n, &tokens[3..], 1)?;
                if o[0] != 1 && o[0] != -1 {
                    return Err(perr(n, "orientation must be +1 or -1"));
                }
                raw_faces.push(([e[0], e[1], e[2]], o[0], n));
            }
            Section::Corners => {
                let ids: Vec<usize> = nums(n, &tokens[..2.min(tokens.len())], 2)?;
                let want = if tokens.len() == 8 { 6 } else { 4 };
                let x: Vec<f64> = nums(n, &tokens[2..], want)?;
                let d2 = if want == 6 { C64::new(x[4], x[5]) } else { C64::new(0.0, 0.0) };
                corners.push((ids[0], ids[1], C64::new(x[0], x[1]), C64::new(x[2], x[3]), d2, n));
            }
        }
    }
    let mut faces = Vec::with_capacity(raw_faces.len());
    for (e, o, n) in raw_faces {
        let ev = |i: usize| -> Result<[usize; 2]> {
            edges.get(e[i]).map(|x: &Edge| x.v).ok_or_else(|| perr(n, format!("edge {} does not exist", e[i])))
        };
        let ends = [ev(0)?, ev(1)?, ev(2)?];
        let mut v = [0usize; 3];
        for c in 0..3 {
            let (a, b) = (ends[(c + 1) % 3], ends[(c + 2) % 3]);
            v[c] = *a.iter().find(|x| b.contains(x)).ok_or_else(|| perr(n, "face edges do not close up"))?;
        }
        let mut e = e;
        if o < 0 {
            v.swap(1, 2);
            e.swap(1, 2);
        }
        if v.iter().any(|&x| x >= home.len()) {
            return Err(perr(n, "face uses a missing vertex"));
        }
        let z = v.map(|x| home[x]);
        faces.push(Face { v, e, z, dz: [C64::new(1.0, 0.0); 3], d2z: [C64::new(0.0, 0.0); 3] });
    }
    let mut seen = vec![[false; 3]; faces.len()];
    for (f, vtx, z, d, d2, n) in corners {
        let face = faces.get_mut(f).ok_or_else(|| perr(n, format!("face {f} does not exist")))?;
        let c = face.v.iter().position(|&x| x == vtx).ok_or_else(|| perr(n, format!("vertex {vtx} is not a corner of face {f}")))?;
        if seen[f][c] {
            return Err(perr(n, "duplicate corner"));
        }
        seen[f][c] = true;
        face.z[c] = z;
        face.dz[c] = d;
        face.d2z[c] = d2;
    }
    let any = seen.iter().any(|s| s.iter().any(|&x| x));
    if any && seen.iter().any(|s| s.iter().any(|&x| !x)) {
        return Err(perr(0, "CORNERS section must cover every face corner"));
    }
    Fiber::new(home, edges, faces, 2)
}

/// Serializes a fiber; `parse_fiber(write_fiber(f))` reproduces `f`.
pub fn write_fiber(fiber: &Fiber, comment: &str) -> String {
    let mut s = String::from("fiber-mesh v1\n");
    for line in comment.lines() {
        let _ = writeln!(s, "# {line}");
    }
    let _ = writeln!(s, "VERTICES");
    for (i, z) in fiber.home.iter().enumerate() {
        let _ = writeln!(s, "{i} {} {}", z.re, z.im);
    }
    let _ = writeln!(s, "EDGES");
    for e in &fiber.edges {
        let _ = writeln!(s, "{} {} {}", e.v[0], e.v[1], e.length);
    }
    let _ = writeln!(s, "FACES");
    for f in &fiber.faces {
        let _ = writeln!(s, "{} {} {} 1", f.e[0], f.e[1], f.e[2]);
    }
    let _ = writeln!(s, "CORNERS");
    for (i, f) in fiber.faces.iter().enumerate() {
        for c in 0..3 {
            let (z, d, d2) = (f.z[c], f.dz[c], f.d2z[c]);
            let _ = writeln!(s, "{i} {} {} {} {} {} {} {}", f.v[c], z.re, z.im, d.re, d.im, d2.re, d2.im);
        }
    }
    s
}
