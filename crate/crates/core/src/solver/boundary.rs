use serde::{Deserialize, Serialize};

use super::SolverError;
use crate::mesh::Mesh;

/// Prescribed temperature on every node of a named set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletSpec {
    pub set: String,
    /// °C
    pub temperature: f64,
}

/// Concentrated nodal heat input, active for step start times in `[start, end)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatLoadSpec {
    pub set: String,
    /// W per node
    pub power: f64,
    #[serde(default)]
    pub start: f64,
    #[serde(default = "forever")]
    pub end: f64,
}

fn forever() -> f64 {
    f64::INFINITY
}

/// Boundary conditions by node-set name. Nodes without an entry are adiabatic.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundarySpec {
    #[serde(default)]
    pub dirichlet: Vec<DirichletSpec>,
    #[serde(default)]
    pub heat_loads: Vec<HeatLoadSpec>,
}

impl BoundarySpec {
    pub fn resolve(&self, mesh: &Mesh) -> Result<ResolvedBoundary, SolverError> {
        let set = |name: &str| {
            mesh.node_set(name)
                .map(|s| s.to_vec())
                .map_err(|_| SolverError::UnknownNodeSet(name.to_string()))
        };
        let mut dirichlet = Vec::new();
        for d in &self.dirichlet {
            for n in set(&d.set)? {
                dirichlet.push((n, d.temperature));
            }
        }
        let loads = self
            .heat_loads
            .iter()
            .map(|l| {
                Ok(NodalLoad {
                    nodes: set(&l.set)?,
                    power: l.power,
                    start: l.start,
                    end: l.end,
                })
            })
            .collect::<Result<Vec<_>, SolverError>>()?;
        ResolvedBoundary::new(mesh.node_count(), dirichlet, loads)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodalLoad {
    pub nodes: Vec<usize>,
    pub power: f64,
    pub start: f64,
    pub end: f64,
}

impl NodalLoad {
    pub fn is_active(&self, t: f64) -> bool {
        self.start <= t && t < self.end
    }
}

/// Boundary conditions bound to node indices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResolvedBoundary {
    dirichlet: Vec<(usize, f64)>,
    loads: Vec<NodalLoad>,
}

impl ResolvedBoundary {
    pub fn new(node_count: usize, mut dirichlet: Vec<(usize, f64)>, loads: Vec<NodalLoad>) -> Result<Self, SolverError> {
        dirichlet.sort_by_key(|d| d.0);
        for w in dirichlet.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(SolverError::DuplicateDirichlet { node: w[0].0 });
            }
        }
        for &(node, t) in &dirichlet {
            if node >= node_count {
                return Err(SolverError::NodeOutOfRange { node, count: node_count });
            }
            if !t.is_finite() {
                return Err(SolverError::NonFinite("prescribed temperature"));
            }
        }
        for l in &loads {
            if !l.power.is_finite() {
                return Err(SolverError::NonFinite("heat load power"));
            }
            if !(l.start < l.end) || l.start.is_nan() {
                return Err(SolverError::BadLoadWindow {
                    start: l.start,
                    end: l.end,
                });
            }
            if let Some(&node) = l.nodes.iter().find(|&&n| n >= node_count) {
                return Err(SolverError::NodeOutOfRange { node, count: node_count });
            }
        }
        Ok(Self { dirichlet, loads })
    }

    /// Everything adiabatic.
    pub fn none() -> Self {
        Self::default()
    }

    /// `(node, T_Γ)` sorted by node.
    pub fn dirichlet(&self) -> &[(usize, f64)] {
        &self.dirichlet
    }

    pub fn loads(&self) -> &[NodalLoad] {
        &self.loads
    }

    pub fn dirichlet_mask(&self, node_count: usize) -> Vec<bool> {
        let mut mask = vec![false; node_count];
        for &(n, _) in &self.dirichlet {
            mask[n] = true;
        }
        mask
    }

    pub fn apply_dirichlet(&self, temperature: &mut [f64]) {
        for &(n, t) in &self.dirichlet {
            temperature[n] = t;
        }
    }

    /// Nodal heat input at time `t`, summed over active loads in declaration order.
    pub fn heat_input_into(&self, t: f64, out: &mut [f64]) {
        out.fill(0.0);
        for l in self.loads.iter().filter(|l| l.is_active(t)) {
            for &n in &l.nodes {
                out[n] += l.power;
            }
        }
    }

    pub fn heat_input(&self, node_count: usize, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; node_count];
        self.heat_input_into(t, &mut out);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::element::ElementKind;
    use crate::meshgen;

    #[test]
    fn resolves_sets() {
        let mesh = meshgen::cube(ElementKind::Tet4, 2, 0.1);
        let spec = BoundarySpec {
            dirichlet: vec![DirichletSpec {
                set: "zmin".into(),
                temperature: 37.0,
            }],
            heat_loads: vec![HeatLoadSpec {
                set: "top_center".into(),
                power: 2.0,
                start: 0.0,
                end: 3.0,
            }],
        };
        let b = spec.resolve(&mesh).unwrap();
        assert_eq!(b.dirichlet().len(), 9);
        assert!(b.dirichlet().windows(2).all(|w| w[0].0 < w[1].0));
        let q = b.heat_input(mesh.node_count(), 0.0);
        assert_eq!(q.iter().sum::<f64>(), 10.0);
        assert_eq!(b.heat_input(mesh.node_count(), 3.0).iter().sum::<f64>(), 0.0);
        assert_eq!(b.heat_input(mesh.node_count(), 2.999).iter().sum::<f64>(), 10.0);
    }

    #[test]
    fn rejects_bad_boundaries() {
        let mesh = meshgen::cube(ElementKind::Tet4, 2, 0.1);
        let d = |set: &str| DirichletSpec {
            set: set.into(),
            temperature: 37.0,
        };
        let spec = BoundarySpec {
            dirichlet: vec![d("nope")],
            ..Default::default()
        };
        assert!(matches!(spec.resolve(&mesh), Err(SolverError::UnknownNodeSet(_))));
        let spec = BoundarySpec {
            dirichlet: vec![d("zmin"), d("xmin")],
            ..Default::default()
        };
        assert!(matches!(spec.resolve(&mesh), Err(SolverError::DuplicateDirichlet { .. })));
        let spec = BoundarySpec {
            heat_loads: vec![HeatLoadSpec {
                set: "zmin".into(),
                power: 1.0,
                start: 3.0,
                end: 3.0,
            }],
            ..Default::default()
        };
        assert!(matches!(spec.resolve(&mesh), Err(SolverError::BadLoadWindow { .. })));
        assert!(ResolvedBoundary::new(3, vec![(5, 37.0)], vec![]).is_err());
    }
}
