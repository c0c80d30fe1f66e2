//! Reference computations used to verify the explicit engine.
//!
//! The global conduction matrix is assembled explicitly and time is advanced
//! with backward Euler, `(C/Δt + K + K_b) T' = (C/Δt) T + Q`, solved by
//! unpreconditioned conjugate gradients. Temperature-dependent properties are
//! lagged one step. Everything here is single-threaded.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::element::{ElementKind, ElementPrecomp, HEX_NATURAL};
use crate::material::TissueMaterial;
use crate::mesh::Mesh;
use crate::precompute::{build_lumped, lumped_mass, LumpedSystem};
use crate::solver::{build_elements, element_conductivity, ResolvedBoundary, SolverError};

pub const DEFAULT_SIZE_CAP: usize = 10_000;
pub const DENSE_SIZE_CAP: usize = 300;
pub const CG_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("mesh has {nodes} nodes, oracle cap is {cap}")]
    SizeCap { nodes: usize, cap: usize },
    #[error("conjugate gradient did not converge in {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("eigenvalue iteration did not converge in {iterations} iterations")]
    EigenNoConvergence { iterations: usize },
    #[error("vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("reference vector is all zero")]
    ZeroReference,
    #[error("empty input")]
    Empty,
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl Csr {
    fn from_pattern(rows: Vec<BTreeSet<usize>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let mut cols = Vec::new();
        for r in rows {
            cols.extend(r);
            row_ptr.push(cols.len());
        }
        let vals = vec![0.0; cols.len()];
        Self { n, row_ptr, cols, vals }
    }

    fn position(&self, i: usize, j: usize) -> usize {
        let row = &self.cols[self.row_ptr[i]..self.row_ptr[i + 1]];
        self.row_ptr[i] + row.binary_search(&j).expect("entry in pattern")
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let row = &self.cols[self.row_ptr[i]..self.row_ptr[i + 1]];
        row.binary_search(&j).map_or(0.0, |p| self.vals[self.row_ptr[i] + p])
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        d
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MassMatrix {
    Lumped(Vec<f64>),
    Consistent(Csr),
}

impl MassMatrix {
    fn entry(&self, i: usize, j: usize) -> f64 {
        match self {
            MassMatrix::Lumped(c) => {
                if i == j {
                    c[i]
                } else {
                    0.0
                }
            }
            MassMatrix::Consistent(m) => m.get(i, j),
        }
    }

    /// Diagonal of the lumped mass, or row sums of the consistent one.
    pub fn row_sums(&self) -> Vec<f64> {
        match self {
            MassMatrix::Lumped(c) => c.clone(),
            MassMatrix::Consistent(m) => (0..m.n).map(|i| m.row(i).map(|(_, v)| v).sum()).collect(),
        }
    }
}

/// Global matrices at one temperature field. `K` carries the physical sign
/// (positive semidefinite).
#[derive(Debug, Clone, PartialEq)]
pub struct AssembledSystem {
    pub k: Csr,
    pub kb: Vec<f64>,
    pub mass: MassMatrix,
    /// Constant loads `Q_b + Q_m`, W.
    pub q: Vec<f64>,
}

impl AssembledSystem {
    pub fn n(&self) -> usize {
        self.k.n
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MassKind {
    #[default]
    Lumped,
    Consistent,
}

/// Holds the sparsity pattern so repeated assembly only refills values.
pub struct Assembler {
    elements: Vec<ElementPrecomp>,
    lumped: LumpedSystem,
    material: TissueMaterial,
    pattern: Csr,
    /// CSR position of every (element, i, j), flattened per element.
    positions: Vec<Vec<usize>>,
    consistent_shape: Vec<Vec<f64>>,
}

impl Assembler {
    pub fn new(mesh: &Mesh, material: &TissueMaterial) -> Result<Self, OracleError> {
        Self::with_cap(mesh, material, DEFAULT_SIZE_CAP)
    }

    pub fn with_cap(mesh: &Mesh, material: &TissueMaterial, cap: usize) -> Result<Self, OracleError> {
        if mesh.node_count() > cap {
            return Err(OracleError::SizeCap {
                nodes: mesh.node_count(),
                cap,
            });
        }
        let elements = build_elements(mesh).map_err(SolverError::from)?;
        let lumped = build_lumped(mesh, material);
        let mut rows = vec![BTreeSet::new(); mesh.node_count()];
        for (i, row) in rows.iter_mut().enumerate() {
            row.insert(i);
        }
        for el in &elements {
            for &a in &el.node_ids {
                for &b in &el.node_ids {
                    rows[a].insert(b);
                }
            }
        }
        let pattern = Csr::from_pattern(rows);
        let positions = elements
            .iter()
            .map(|el| {
                el.node_ids
                    .iter()
                    .flat_map(|&a| el.node_ids.iter().map(move |&b| (a, b)))
                    .map(|(a, b)| pattern.position(a, b))
                    .collect()
            })
            .collect();
        let consistent_shape = mesh
            .elements()
            .iter()
            .enumerate()
            .map(|(e, el)| consistent_mass_shape(el.kind(), &mesh.element_coords(e)))
            .collect();
        Ok(Self {
            elements,
            lumped,
            material: material.clone(),
            pattern,
            positions,
            consistent_shape,
        })
    }

    pub fn lumped(&self) -> &LumpedSystem {
        &self.lumped
    }

    pub fn elements(&self) -> &[ElementPrecomp] {
        &self.elements
    }

    /// Assembles `K(T)`, `C(T)`, `K_b` and the constant loads at `temperature`.
    pub fn assemble(&self, temperature: &[f64], mass_kind: MassKind) -> AssembledSystem {
        let mut k = self.pattern.clone();
        for (el, pos) in self.elements.iter().zip(&self.positions) {
            let kbar = element_conductivity(&self.material, temperature, &el.node_ids);
            for (a, &p) in el.a.iter().zip(pos) {
                k.vals[p] += kbar * a;
            }
        }
        let mass = match mass_kind {
            MassKind::Lumped => MassMatrix::Lumped(lumped_mass(&self.material, &self.lumped.node_volumes, temperature)),
            MassKind::Consistent => {
                let mut m = self.pattern.clone();
                for ((el, pos), shape) in self.elements.iter().zip(&self.positions).zip(&self.consistent_shape) {
                    let rc = el.node_ids.iter().map(|&n| self.material.heat_capacity(temperature[n])).sum::<f64>()
                        / el.n() as f64;
                    for (s, &p) in shape.iter().zip(pos) {
                        m.vals[p] += rc * s;
                    }
                }
                MassMatrix::Consistent(m)
            }
        };
        let q = self.lumped.qb.iter().zip(&self.lumped.qm).map(|(b, m)| b + m).collect();
        AssembledSystem {
            k,
            kb: self.lumped.kb_diag.clone(),
            mass,
            q,
        }
    }
}

/// `∫ N_i N_j dV` for one element, row-major.
fn consistent_mass_shape(kind: ElementKind, coords: &[[f64; 3]]) -> Vec<f64> {
    match kind {
        ElementKind::Tet4 => {
            let c: [[f64; 3]; 4] = coords.try_into().expect("tet4");
            let v = crate::element::tet_signed_volume(&c);
            (0..16)
                .map(|p| if p / 4 == p % 4 { v / 10.0 } else { v / 20.0 })
                .collect()
        }
        ElementKind::Hex8 => {
            let g = 1.0 / 3f64.sqrt();
            let mut m = vec![0.0; 64];
            for gp in HEX_NATURAL {
                let xi = gp.map(|s| s * g);
                let n: Vec<f64> = HEX_NATURAL
                    .iter()
                    .map(|v| (1.0 + v[0] * xi[0]) * (1.0 + v[1] * xi[1]) * (1.0 + v[2] * xi[2]) / 8.0)
                    .collect();
                let det = hex_det_at(coords, xi);
                for i in 0..8 {
                    for j in 0..8 {
                        m[i * 8 + j] += n[i] * n[j] * det;
                    }
                }
            }
            m
        }
    }
}

fn hex_det_at(coords: &[[f64; 3]], xi: [f64; 3]) -> f64 {
    let mut jac = [[0.0; 3]; 3];
    for (x, v) in coords.iter().zip(HEX_NATURAL.iter()) {
        let dn = [
            v[0] * (1.0 + v[1] * xi[1]) * (1.0 + v[2] * xi[2]) / 8.0,
            v[1] * (1.0 + v[0] * xi[0]) * (1.0 + v[2] * xi[2]) / 8.0,
            v[2] * (1.0 + v[0] * xi[0]) * (1.0 + v[1] * xi[1]) / 8.0,
        ];
        for a in 0..3 {
            for b in 0..3 {
                jac[a][b] += x[a] * dn[b];
            }
        }
    }
    jac[0][0] * (jac[1][1] * jac[2][2] - jac[1][2] * jac[2][1]) - jac[0][1] * (jac[1][0] * jac[2][2] - jac[1][2] * jac[2][0])
        + jac[0][2] * (jac[1][0] * jac[2][1] - jac[1][1] * jac[2][0])
}

pub fn assemble(mesh: &Mesh, material: &TissueMaterial, temperature: &[f64]) -> Result<AssembledSystem, OracleError> {
    Ok(Assembler::new(mesh, material)?.assemble(temperature, MassKind::Lumped))
}

/// One backward-Euler step with loads `Q + Q_r(t)` evaluated at the step start `t`.
pub fn implicit_step(
    system: &AssembledSystem,
    boundary: &ResolvedBoundary,
    temperature: &[f64],
    t: f64,
    dt: f64,
) -> Result<Vec<f64>, OracleError> {
    let n = system.n();
    if temperature.len() != n {
        return Err(OracleError::LengthMismatch(n, temperature.len()));
    }
    let fixed = boundary.dirichlet_mask(n);
    // solve for the increment so the residual tolerance is relative to the change, not to T
    let mut prescribed = vec![0.0; n];
    for &(i, v) in boundary.dirichlet() {
        prescribed[i] = v - temperature[i];
    }
    let qr = boundary.heat_input(n, t);
    let entry = |i: usize, j: usize, k: f64| {
        let mut v = k + system.mass.entry(i, j) / dt;
        if i == j {
            v += system.kb[i];
        }
        v
    };
    let kt = system.k.matvec(temperature);
    let mut rhs: Vec<f64> = (0..n)
        .map(|i| system.q[i] + qr[i] - kt[i] - system.kb[i] * temperature[i])
        .collect();
    for i in 0..n {
        if fixed[i] {
            rhs[i] = prescribed[i];
            continue;
        }
        for (j, k) in system.k.row(i) {
            if fixed[j] {
                rhs[i] -= entry(i, j, k) * prescribed[j];
            }
        }
    }
    let apply = |x: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| {
                if fixed[i] {
                    x[i]
                } else {
                    system
                        .k
                        .row(i)
                        .filter(|(j, _)| !fixed[*j])
                        .map(|(j, k)| entry(i, j, k) * x[j])
                        .sum()
                }
            })
            .collect()
    };
    let delta = conjugate_gradient(apply, &rhs, vec![0.0; n], CG_TOLERANCE, 10 * n.max(1))?;
    Ok(temperature.iter().zip(&delta).map(|(t, d)| t + d).collect())
}

/// Unpreconditioned CG for a symmetric positive definite operator.
pub fn conjugate_gradient(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    mut x: Vec<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>, OracleError> {
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        return Ok(vec![0.0; b.len()]);
    }
    let ax = apply(&x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    for _ in 0..max_iter {
        if rr.sqrt() <= tol * b_norm {
            return Ok(x);
        }
        let ap = apply(&p);
        let alpha = rr / dot(&p, &ap);
        for i in 0..x.len() {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        for i in 0..p.len() {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
    }
    if rr.sqrt() <= tol * b_norm {
        return Ok(x);
    }
    Err(OracleError::NoConvergence {
        iterations: max_iter,
        residual: rr.sqrt() / b_norm,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleControls {
    pub dt: f64,
    pub steps: u64,
    pub td_mode: bool,
    pub mass: MassKind,
}

/// Implicit reference trajectory; returns the final field.
pub fn run_implicit(
    mesh: &Mesh,
    material: &TissueMaterial,
    boundary: &ResolvedBoundary,
    initial: &[f64],
    controls: &OracleControls,
) -> Result<Vec<f64>, OracleError> {
    let assembler = Assembler::new(mesh, material)?;
    let mut t = initial.to_vec();
    boundary.apply_dirichlet(&mut t);
    let mut system = assembler.assemble(&t, controls.mass);
    for step in 0..controls.steps {
        if controls.td_mode && step > 0 {
            system = assembler.assemble(&t, controls.mass);
        }
        t = implicit_step(&system, boundary, &t, step as f64 * controls.dt, controls.dt)?;
    }
    Ok(t)
}

/// Largest eigenvalue of `C⁻¹ (K + K_b)` by power iteration on the dense
/// symmetric form `C^{-1/2} (K + K_b) C^{-1/2}`. Nodes with zero mass are skipped.
pub fn dense_lambda_max(system: &AssembledSystem) -> Result<f64, OracleError> {
    let n = system.n();
    if n > DENSE_SIZE_CAP {
        return Err(OracleError::SizeCap {
            nodes: n,
            cap: DENSE_SIZE_CAP,
        });
    }
    let mass = system.mass.row_sums();
    let active: Vec<usize> = (0..n).filter(|&i| mass[i] > 0.0).collect();
    let m = active.len();
    if m == 0 {
        return Err(OracleError::Empty);
    }
    let scale: Vec<f64> = active.iter().map(|&i| 1.0 / mass[i].sqrt()).collect();
    let dense = system.k.to_dense();
    let s: Vec<Vec<f64>> = (0..m)
        .map(|a| {
            (0..m)
                .map(|b| {
                    let (i, j) = (active[a], active[b]);
                    let kb = if i == j { system.kb[i] } else { 0.0 };
                    scale[a] * (dense[i][j] + kb) * scale[b]
                })
                .collect()
        })
        .collect();
    power_iteration(&s, 1e-8)
}

/// Dominant eigenvalue of a symmetric PSD matrix via power iteration with a
/// Rayleigh-quotient stopping test.
pub fn power_iteration(s: &[Vec<f64>], tol: f64) -> Result<f64, OracleError> {
    let m = s.len();
    // fixed pseudo-random start so no eigenvector is missed by symmetry
    let mut state = 0x2545_f491_4f6c_dd1du64;
    let mut x: Vec<f64> = (0..m)
        .map(|_| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 + 0.5
        })
        .collect();
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nx = norm(&x);
    x.iter_mut().for_each(|v| *v /= nx);
    let mut lambda = 0.0;
    let max_iter = 200_000;
    let mut settled = 0;
    for _ in 0..max_iter {
        let y: Vec<f64> = s.iter().map(|row| row.iter().zip(&x).map(|(a, b)| a * b).sum()).collect();
        let next: f64 = y.iter().zip(&x).map(|(a, b)| a * b).sum();
        let ny = norm(&y);
        if ny == 0.0 {
            return Ok(0.0);
        }
        x = y.into_iter().map(|v| v / ny).collect();
        // residual ||Sx - λx|| bounds the eigenvalue error for symmetric S
        if (next - lambda).abs() <= 1e-3 * tol * next.abs() {
            settled += 1;
            if settled >= 5 {
                return Ok(next);
            }
        } else {
            settled = 0;
        }
        lambda = next;
    }
    Err(OracleError::EigenNoConvergence { iterations: max_iter })
}

/// `sqrt(Σ (ref - T)² / Σ ref²)`.
pub fn relative_error(reference: &[f64], values: &[f64]) -> Result<f64, OracleError> {
    if reference.len() != values.len() {
        return Err(OracleError::LengthMismatch(reference.len(), values.len()));
    }
    let den: f64 = reference.iter().map(|r| r * r).sum();
    if den == 0.0 {
        return Err(OracleError::ZeroReference);
    }
    let num: f64 = reference.iter().zip(values).map(|(r, t)| (r - t) * (r - t)).sum();
    Ok((num / den).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stats {
    pub min: f64,
    pub max: f64,
    pub median: f64,
    pub rms: f64,
    pub q1: f64,
    pub q3: f64,
}

impl Stats {
    pub const HEADERS: [&'static str; 6] = ["Min", "Max", "Median", "RMS", "Q1", "Q3"];

    pub fn values(&self) -> [f64; 6] {
        [self.min, self.max, self.median, self.rms, self.q1, self.q3]
    }

    pub fn difference(&self, reference: &Stats) -> Stats {
        let (a, b) = (self.values(), reference.values());
        let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        Stats {
            min: d[0],
            max: d[1],
            median: d[2],
            rms: d[3],
            q1: d[4],
            q3: d[5],
        }
    }
}

/// Quantile of sorted data: `x[⌊h⌋] + (h − ⌊h⌋)(x[⌈h⌉] − x[⌊h⌋])`, `h = (n−1) q`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    sorted[lo] + (h - h.floor()) * (sorted[hi] - sorted[lo])
}

pub fn stats_summary(values: &[f64]) -> Result<Stats, OracleError> {
    if values.is_empty() {
        return Err(OracleError::Empty);
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let rms = (values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64).sqrt();
    Ok(Stats {
        min: sorted[0],
        max: sorted[sorted.len() - 1],
        median: quantile_sorted(&sorted, 0.5),
        rms,
        q1: quantile_sorted(&sorted, 0.25),
        q3: quantile_sorted(&sorted, 0.75),
    })
}
