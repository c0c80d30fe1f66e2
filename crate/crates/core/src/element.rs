//! Element geometry and the constant conduction matrices.
//!
//! For a linear tetrahedron the shape-function gradients are constant, so the
//! conductance integral is exact: `A = V * BᵀB`. The eight-node hexahedron is
//! integrated with a single Gauss point at the natural-coordinate centroid
//! (weight 8), giving `A = 8 det(J) * BᵀB` with `B` evaluated there.
//!
//! `B` is stored as `[gx, gy, gz]` per node, i.e. column `i` of the 3×N matrix.

use thiserror::Error;

pub type Point = [f64; 3];

/// Tetrahedra with a volume at or below this are rejected as degenerate.
pub const TET_VOLUME_TOL: f64 = 1e-16;

/// Natural coordinates of the hex8 vertices: bottom face counter-clockwise,
/// then the top face.
pub const HEX_NATURAL: [[f64; 3]; 8] = [
    [-1.0, -1.0, -1.0],
    [1.0, -1.0, -1.0],
    [1.0, 1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
    [1.0, -1.0, 1.0],
    [1.0, 1.0, 1.0],
    [-1.0, 1.0, 1.0],
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElementKind {
    Tet4,
    Hex8,
}

impl ElementKind {
    pub fn node_count(self) -> usize {
        match self {
            ElementKind::Tet4 => 4,
            ElementKind::Hex8 => 8,
        }
    }

    pub fn keyword(self) -> &'static str {
        match self {
            ElementKind::Tet4 => "tet4",
            ElementKind::Hex8 => "hex8",
        }
    }

    /// VTK legacy cell type id.
    pub fn vtk_cell_type(self) -> u8 {
        match self {
            ElementKind::Tet4 => 10,
            ElementKind::Hex8 => 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ElementError {
    #[error("degenerate tetrahedron: signed volume {volume:e} m^3 is not above {TET_VOLUME_TOL:e}")]
    DegenerateTet { volume: f64 },
    #[error("inverted or degenerate hexahedron: det(J) = {det:e} at the centroid")]
    DegenerateHex { det: f64 },
    #[error("{kind:?} needs {expected} nodes, got {got}")]
    WrongNodeCount {
        kind: ElementKind,
        expected: usize,
        got: usize,
    },
}

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Inverse-transpose of a 3×3 matrix together with its determinant.
fn inv_transpose3(m: &[[f64; 3]; 3]) -> ([[f64; 3]; 3], f64) {
    let det = det3(m);
    // cofactor matrix divided by det is the inverse transpose
    let mut cof = [[0.0; 3]; 3];
    for (r, row) in cof.iter_mut().enumerate() {
        for (c, out) in row.iter_mut().enumerate() {
            let (r1, r2) = ((r + 1) % 3, (r + 2) % 3);
            let (c1, c2) = ((c + 1) % 3, (c + 2) % 3);
            *out = (m[r1][c1] * m[r2][c2] - m[r1][c2] * m[r2][c1]) / det;
        }
    }
    (cof, det)
}

/// Signed volume of the tetrahedron; positive for the stored ordering when
/// node 3 lies on the positive side of the 0-1-2 face.
pub fn tet_signed_volume(c: &[Point; 4]) -> f64 {
    let m = [sub(c[1], c[0]), sub(c[2], c[0]), sub(c[3], c[0])];
    det3(&m) / 6.0
}

/// Shape-function gradients and volume of a linear tetrahedron.
pub fn tet_geometry(c: &[Point; 4]) -> Result<([Point; 4], f64), ElementError> {
    // rows of the Jacobian are the edge vectors from node 0
    let jac = [sub(c[1], c[0]), sub(c[2], c[0]), sub(c[3], c[0])];
    let (jinv_t, det) = inv_transpose3(&transpose(&jac));
    let volume = det / 6.0;
    if !(volume > TET_VOLUME_TOL) {
        return Err(ElementError::DegenerateTet { volume });
    }
    // natural gradients of N1..N3 are the unit vectors; N0 = 1 - sum
    let mut grads = [[0.0; 3]; 4];
    for a in 0..3 {
        for d in 0..3 {
            grads[a + 1][d] = jinv_t[d][a];
        }
    }
    for d in 0..3 {
        grads[0][d] = -(grads[1][d] + grads[2][d] + grads[3][d]);
    }
    Ok((grads, volume))
}

fn transpose(m: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut t = [[0.0; 3]; 3];
    for (r, row) in m.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            t[c][r] = *v;
        }
    }
    t
}

/// Jacobian matrix `J[a][b] = dx_a / dxi_b` at the hex centroid.
fn hex_centroid_jacobian(c: &[Point; 8]) -> [[f64; 3]; 3] {
    let mut jac = [[0.0; 3]; 3];
    for (x, xi) in c.iter().zip(HEX_NATURAL.iter()) {
        for a in 0..3 {
            for b in 0..3 {
                // dN_i/dxi_b at the centroid is xi_i[b] / 8
                jac[a][b] += x[a] * xi[b] / 8.0;
            }
        }
    }
    jac
}

/// Determinant of the hex Jacobian at the natural-coordinate centroid.
pub fn hex_centroid_det(c: &[Point; 8]) -> f64 {
    det3(&hex_centroid_jacobian(c))
}

/// Centroid shape-function gradients and det(J) for a reduced-integration hex8.
pub fn hex_geometry(c: &[Point; 8]) -> Result<([Point; 8], f64), ElementError> {
    let jac = hex_centroid_jacobian(c);
    let (jinv_t, det) = inv_transpose3(&jac);
    if !(det > 0.0) {
        return Err(ElementError::DegenerateHex { det });
    }
    let mut grads = [[0.0; 3]; 8];
    for (g, xi) in grads.iter_mut().zip(HEX_NATURAL.iter()) {
        for d in 0..3 {
            g[d] = (jinv_t[d][0] * xi[0] + jinv_t[d][1] * xi[1] + jinv_t[d][2] * xi[2]) / 8.0;
        }
    }
    Ok((grads, det))
}

/// Per-element data frozen before time stepping.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementPrecomp {
    pub kind: ElementKind,
    pub node_ids: Vec<usize>,
    /// Row-major N×N conduction matrix without the conductivity factor [m].
    pub a: Vec<f64>,
    /// `V_tet` for tets, `8 det(J)` for hexes [m^3].
    pub volume: f64,
}

impl ElementPrecomp {
    pub fn n(&self) -> usize {
        self.node_ids.len()
    }

    pub fn a_entry(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n() + j]
    }
}

fn gram<const N: usize>(grads: &[Point; N], weight: f64) -> Vec<f64> {
    let mut a = vec![0.0; N * N];
    for i in 0..N {
        for j in 0..N {
            let gi = grads[i];
            let gj = grads[j];
            a[i * N + j] = weight * (gi[0] * gj[0] + gi[1] * gj[1] + gi[2] * gj[2]);
        }
    }
    a
}

/// Geometric volume measure of an element (`V_tet` or `8 det(J)`).
pub fn element_volume(kind: ElementKind, coords: &[Point]) -> Result<f64, ElementError> {
    check_count(kind, coords.len())?;
    match kind {
        ElementKind::Tet4 => {
            let c: [Point; 4] = coords.try_into().expect("length checked");
            tet_geometry(&c).map(|(_, v)| v)
        }
        ElementKind::Hex8 => {
            let c: [Point; 8] = coords.try_into().expect("length checked");
            hex_geometry(&c).map(|(_, det)| 8.0 * det)
        }
    }
}

fn check_count(kind: ElementKind, got: usize) -> Result<(), ElementError> {
    if got != kind.node_count() {
        return Err(ElementError::WrongNodeCount {
            kind,
            expected: kind.node_count(),
            got,
        });
    }
    Ok(())
}

pub fn build_precomp(
    kind: ElementKind,
    node_ids: &[usize],
    coords: &[Point],
) -> Result<ElementPrecomp, ElementError> {
    check_count(kind, coords.len())?;
    check_count(kind, node_ids.len())?;
    let (a, volume) = match kind {
        ElementKind::Tet4 => {
            let c: [Point; 4] = coords.try_into().expect("length checked");
            let (grads, v) = tet_geometry(&c)?;
            (gram(&grads, v), v)
        }
        ElementKind::Hex8 => {
            let c: [Point; 8] = coords.try_into().expect("length checked");
            let (grads, det) = hex_geometry(&c)?;
            (gram(&grads, 8.0 * det), 8.0 * det)
        }
    };
    Ok(ElementPrecomp {
        kind,
        node_ids: node_ids.to_vec(),
        a,
        volume,
    })
}
