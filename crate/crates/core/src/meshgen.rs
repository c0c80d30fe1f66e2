//! Structured box meshes, split into tetrahedra or kept as hexahedra.
//!
//! Node sets `xmin`, `xmax`, `ymin`, `ymax`, `zmin`, `zmax` hold the boundary
//! faces; `top_center` holds the centre node of the `zmax` face and its four
//! in-face neighbours.

use std::collections::BTreeMap;

use crate::element::{tet_signed_volume, ElementKind, Point};
use crate::mesh::{Element, Mesh};

/// Six path tetrahedra per cell, all sharing the 000-111 diagonal.
const KUHN_PATHS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

/// Box `[0,lx]×[0,ly]×[0,lz]` with `cells` subdivisions per axis.
pub fn box_mesh(kind: ElementKind, cells: [usize; 3], lengths: [f64; 3]) -> Mesh {
    box_mesh_with(cells, lengths, |_| kind)
}

/// Like [`box_mesh`] but the element kind is chosen per cell `(i, j, k)`.
/// Mixing kinds yields a non-conforming mesh, which is still a valid algebraic system.
pub fn box_mesh_with(cells: [usize; 3], lengths: [f64; 3], mut kind_of: impl FnMut([usize; 3]) -> ElementKind) -> Mesh {
    assert!(cells.iter().all(|&c| c >= 1), "need at least one cell per axis");
    let [nx, ny, nz] = cells;
    let id = |i: usize, j: usize, k: usize| i + (nx + 1) * (j + (ny + 1) * k);

    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
    for k in 0..=nz {
        for j in 0..=ny {
            for i in 0..=nx {
                nodes.push([
                    lengths[0] * i as f64 / nx as f64,
                    lengths[1] * j as f64 / ny as f64,
                    lengths[2] * k as f64 / nz as f64,
                ]);
            }
        }
    }

    let mut elements = Vec::new();
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let corner = |bits: usize| id(i + (bits & 1), j + ((bits >> 1) & 1), k + ((bits >> 2) & 1));
                match kind_of([i, j, k]) {
                    ElementKind::Hex8 => elements.push(Element::Hex8([
                        corner(0b000),
                        corner(0b001),
                        corner(0b011),
                        corner(0b010),
                        corner(0b100),
                        corner(0b101),
                        corner(0b111),
                        corner(0b110),
                    ])),
                    ElementKind::Tet4 => {
                        for path in KUHN_PATHS {
                            let b1 = 1 << path[0];
                            let b2 = b1 | (1 << path[1]);
                            let mut t = [corner(0), corner(b1), corner(b2), corner(0b111)];
                            if tet_signed_volume(&t.map(|n| nodes[n])) < 0.0 {
                                t.swap(2, 3);
                            }
                            elements.push(Element::Tet4(t));
                        }
                    }
                }
            }
        }
    }

    let mut sets: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for k in 0..=nz {
        for j in 0..=ny {
            for i in 0..=nx {
                let n = id(i, j, k);
                let faces = [
                    ("xmin", i == 0),
                    ("xmax", i == nx),
                    ("ymin", j == 0),
                    ("ymax", j == ny),
                    ("zmin", k == 0),
                    ("zmax", k == nz),
                ];
                for (name, on) in faces {
                    if on {
                        sets.entry(name.to_string()).or_default().push(n);
                    }
                }
            }
        }
    }
    let (cx, cy) = (nx / 2, ny / 2);
    let mut center = vec![id(cx, cy, nz)];
    if cx > 0 {
        center.push(id(cx - 1, cy, nz));
    }
    if cx < nx {
        center.push(id(cx + 1, cy, nz));
    }
    if cy > 0 {
        center.push(id(cx, cy - 1, nz));
    }
    if cy < ny {
        center.push(id(cx, cy + 1, nz));
    }
    sets.insert("top_center".to_string(), center);

    Mesh::new(nodes, elements, sets).expect("generated mesh is valid")
}

/// Cube of edge `size` with `n` cells per edge.
pub fn cube(kind: ElementKind, n: usize, size: f64) -> Mesh {
    box_mesh(kind, [n, n, n], [size; 3])
}

/// Moves interior (non-face) nodes by `offset(node)`. Panics if an element inverts.
pub fn perturbed(mesh: &Mesh, mut offset: impl FnMut(usize) -> Point) -> Mesh {
    let boundary: std::collections::BTreeSet<usize> = ["xmin", "xmax", "ymin", "ymax", "zmin", "zmax"]
        .iter()
        .filter_map(|s| mesh.node_sets().get(*s))
        .flatten()
        .copied()
        .collect();
    let nodes = mesh
        .nodes()
        .iter()
        .enumerate()
        .map(|(n, p)| {
            if boundary.contains(&n) {
                *p
            } else {
                let d = offset(n);
                [p[0] + d[0], p[1] + d[1], p[2] + d[2]]
            }
        })
        .collect();
    Mesh::new(nodes, mesh.elements().to_vec(), mesh.node_sets().clone()).expect("perturbation kept elements valid")
}
