//! Unstructured tet4/hex8 meshes with named node sets.
//!
//! Text format (0-based indices, `#` starts a comment):
//!
//! ```text
//! nodes <count>
//! <x> <y> <z>
//! elements <count>
//! tet4 <i0> <i1> <i2> <i3>
//! hex8 <i0> ... <i7>
//! nodeset <name> <count>
//! <index> ...
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::element::{self, ElementError, ElementKind, Point};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeshError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("element {element}: node index {index} out of range (mesh has {count} nodes)")]
    IndexOutOfRange {
        element: usize,
        index: usize,
        count: usize,
    },
    #[error("node set '{name}': index {index} out of range (mesh has {count} nodes)")]
    SetIndexOutOfRange {
        name: String,
        index: usize,
        count: usize,
    },
    #[error("element {element} repeats node {index}")]
    RepeatedNode { element: usize, index: usize },
    #[error("element {element} is degenerate: {source}")]
    Degenerate {
        element: usize,
        #[source]
        source: ElementError,
    },
    #[error("duplicate node set name '{0}'")]
    DuplicateNodeSet(String),
    #[error("non-finite coordinate at node {0}")]
    NonFiniteCoordinate(usize),
    #[error("unknown node set '{0}'")]
    UnknownNodeSet(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Element {
    Tet4([usize; 4]),
    Hex8([usize; 8]),
}

impl Element {
    pub fn kind(&self) -> ElementKind {
        match self {
            Element::Tet4(_) => ElementKind::Tet4,
            Element::Hex8(_) => ElementKind::Hex8,
        }
    }

    pub fn nodes(&self) -> &[usize] {
        match self {
            Element::Tet4(n) => n,
            Element::Hex8(n) => n,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    nodes: Vec<Point>,
    elements: Vec<Element>,
    node_sets: BTreeMap<String, Vec<usize>>,
}

impl Mesh {
    /// Builds and validates a mesh. Node-set members are sorted and deduplicated.
    pub fn new(
        nodes: Vec<Point>,
        elements: Vec<Element>,
        node_sets: BTreeMap<String, Vec<usize>>,
    ) -> Result<Self, MeshError> {
        let node_sets = node_sets
            .into_iter()
            .map(|(k, mut v)| {
                v.sort_unstable();
                v.dedup();
                (k, v)
            })
            .collect();
        let mesh = Self {
            nodes,
            elements,
            node_sets,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    fn validate(&self) -> Result<(), MeshError> {
        let count = self.nodes.len();
        if let Some(i) = self.nodes.iter().position(|p| p.iter().any(|x| !x.is_finite())) {
            return Err(MeshError::NonFiniteCoordinate(i));
        }
        for (e, el) in self.elements.iter().enumerate() {
            let ids = el.nodes();
            if let Some(&index) = ids.iter().find(|&&i| i >= count) {
                return Err(MeshError::IndexOutOfRange {
                    element: e,
                    index,
                    count,
                });
            }
            for (a, &i) in ids.iter().enumerate() {
                if ids[..a].contains(&i) {
                    return Err(MeshError::RepeatedNode { element: e, index: i });
                }
            }
            element::element_volume(el.kind(), &self.element_coords(e))
                .map_err(|source| MeshError::Degenerate { element: e, source })?;
        }
        for (name, set) in &self.node_sets {
            if let Some(&index) = set.iter().find(|&&i| i >= count) {
                return Err(MeshError::SetIndexOutOfRange {
                    name: name.clone(),
                    index,
                    count,
                });
            }
        }
        Ok(())
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn node_sets(&self) -> &BTreeMap<String, Vec<usize>> {
        &self.node_sets
    }

    pub fn node_set(&self, name: &str) -> Result<&[usize], MeshError> {
        self.node_sets
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| MeshError::UnknownNodeSet(name.to_string()))
    }

    pub fn element_coords(&self, e: usize) -> Vec<Point> {
        self.elements[e].nodes().iter().map(|&i| self.nodes[i]).collect()
    }

    /// Volume measure of every element (`V_tet` or `8 det(J)`).
    pub fn element_volumes(&self) -> Vec<f64> {
        use rayon::prelude::*;
        (0..self.elements.len())
            .into_par_iter()
            .map(|e| {
                element::element_volume(self.elements[e].kind(), &self.element_coords(e))
                    .expect("validated at construction")
            })
            .collect()
    }

    pub fn total_volume(&self) -> f64 {
        self.element_volumes().iter().sum()
    }

    /// Equal split of each element's volume among its nodes.
    ///
    /// Each node's contributions are summed in ascending value order, so the
    /// result does not depend on element ordering.
    pub fn node_volume_shares(&self) -> Vec<f64> {
        let volumes = self.element_volumes();
        let mut contributions: Vec<Vec<f64>> = vec![Vec::new(); self.nodes.len()];
        for (el, v) in self.elements.iter().zip(&volumes) {
            let share = v / el.nodes().len() as f64;
            for &i in el.nodes() {
                contributions[i].push(share);
            }
        }
        contributions
            .into_iter()
            .map(|mut c| {
                c.sort_unstable_by(f64::total_cmp);
                c.into_iter().fold(0.0, |acc, x| acc + x)
            })
            .collect()
    }

    pub fn parse(text: &str) -> Result<Self, MeshError> {
        Parser::new(text).parse()
    }

    pub fn parse_bytes(bytes: &[u8]) -> Result<Self, MeshError> {
        let text = std::str::from_utf8(bytes).map_err(|e| MeshError::Syntax {
            line: 1 + bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count(),
            message: "invalid UTF-8".into(),
        })?;
        Self::parse(text)
    }

    /// Text form accepted by [`Mesh::parse`]; floats use shortest round-trip formatting.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "nodes {}", self.nodes.len());
        for p in &self.nodes {
            let _ = writeln!(out, "{:?} {:?} {:?}", p[0], p[1], p[2]);
        }
        let _ = writeln!(out, "elements {}", self.elements.len());
        for el in &self.elements {
            out.push_str(el.kind().keyword());
            for i in el.nodes() {
                let _ = write!(out, " {i}");
            }
            out.push('\n');
        }
        for (name, set) in &self.node_sets {
            let _ = writeln!(out, "nodeset {name} {}", set.len());
            for chunk in set.chunks(16) {
                let line: Vec<String> = chunk.iter().map(|i| i.to_string()).collect();
                let _ = writeln!(out, "{}", line.join(" "));
            }
        }
        out
    }
}

pub fn parse_mesh(text: &str) -> Result<Mesh, MeshError> {
    Mesh::parse(text)
}

pub fn node_volume_shares(mesh: &Mesh) -> Vec<f64> {
    mesh.node_volume_shares()
}

/// Token stream over the content lines, tracking line numbers.
struct Parser<'a> {
    lines: Vec<(usize, Vec<&'a str>)>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        let lines = text
            .lines()
            .enumerate()
            .filter_map(|(i, l)| {
                let content = l.split('#').next().unwrap_or("");
                let toks: Vec<&str> = content.split_whitespace().collect();
                (!toks.is_empty()).then_some((i + 1, toks))
            })
            .collect();
        Self { lines, pos: 0 }
    }

    fn err<T>(line: usize, message: impl Into<String>) -> Result<T, MeshError> {
        Err(MeshError::Syntax {
            line,
            message: message.into(),
        })
    }

    fn last_line(&self) -> usize {
        self.lines.last().map_or(1, |l| l.0)
    }

    fn next_line(&mut self, what: &str) -> Result<(usize, Vec<&'a str>), MeshError> {
        match self.lines.get(self.pos) {
            Some(l) => {
                self.pos += 1;
                Ok(l.clone())
            }
            None => Self::err(self.last_line(), format!("unexpected end of file, expected {what}")),
        }
    }

    fn header(&mut self, keyword: &str) -> Result<(usize, usize), MeshError> {
        let (line, toks) = self.next_line(&format!("'{keyword} <count>'"))?;
        if toks.len() != 2 || toks[0] != keyword {
            return Self::err(line, format!("expected '{keyword} <count>'"));
        }
        Ok((line, parse_index(line, toks[1])?))
    }

    fn parse(mut self) -> Result<Mesh, MeshError> {
        let (_, n_nodes) = self.header("nodes")?;
        let mut nodes = Vec::with_capacity(n_nodes.min(1 << 20));
        for _ in 0..n_nodes {
            let (line, toks) = self.next_line("node coordinates")?;
            if toks.len() != 3 {
                return Self::err(line, format!("expected 3 coordinates, found {}", toks.len()));
            }
            let mut p = [0.0; 3];
            for (d, t) in toks.iter().enumerate() {
                p[d] = t
                    .parse::<f64>()
                    .map_err(|_| MeshError::Syntax {
                        line,
                        message: format!("invalid coordinate '{t}'"),
                    })?;
            }
            nodes.push(p);
        }

        let (_, n_elems) = self.header("elements")?;
        let mut elements = Vec::with_capacity(n_elems.min(1 << 20));
        for _ in 0..n_elems {
            let (line, toks) = self.next_line("an element")?;
            let ids = toks[1..]
                .iter()
                .map(|t| parse_index(line, t))
                .collect::<Result<Vec<_>, _>>()?;
            let el = match toks[0] {
                "tet4" => ids.as_slice().try_into().map(Element::Tet4),
                "hex8" => ids.as_slice().try_into().map(Element::Hex8),
                other => return Self::err(line, format!("unknown element type '{other}'")),
            };
            match el {
                Ok(el) => elements.push(el),
                Err(_) => {
                    return Self::err(line, format!("{} expects {} node indices, found {}", toks[0], if toks[0] == "tet4" { 4 } else { 8 }, ids.len()))
                }
            }
        }

        let mut node_sets = BTreeMap::new();
        while self.pos < self.lines.len() {
            let (line, toks) = self.next_line("nodeset")?;
            if toks.len() != 3 || toks[0] != "nodeset" {
                return Self::err(line, "expected 'nodeset <name> <count>'");
            }
            let name = toks[1].to_string();
            let count = parse_index(line, toks[2])?;
            let mut members = Vec::with_capacity(count.min(1 << 20));
            while members.len() < count {
                let (line, toks) = self.next_line("node-set indices")?;
                if toks[0] == "nodeset" {
                    return Self::err(line, format!("node set '{name}' declares {count} members, found {}", members.len()));
                }
                for t in toks {
                    members.push(parse_index(line, t)?);
                }
                if members.len() > count {
                    return Self::err(line, format!("node set '{name}' has more than {count} members"));
                }
            }
            if node_sets.insert(name.clone(), members).is_some() {
                return Err(MeshError::DuplicateNodeSet(name));
            }
        }
        Mesh::new(nodes, elements, node_sets)
    }
}

fn parse_index(line: usize, tok: &str) -> Result<usize, MeshError> {
    tok.parse::<usize>().map_err(|_| MeshError::Syntax {
        line,
        message: format!("invalid index '{tok}'"),
    })
}
