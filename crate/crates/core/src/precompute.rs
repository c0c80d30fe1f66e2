//! Constant lumped nodal vectors built before time stepping.

use rayon::prelude::*;

use crate::material::TissueMaterial;
use crate::mesh::Mesh;

/// Diagonal perfusion stiffness, perfusion and metabolic heat flows, and the
/// geometric node volumes the lumped mass is built from.
#[derive(Debug, Clone, PartialEq)]
pub struct LumpedSystem {
    /// W/°C
    pub kb_diag: Vec<f64>,
    /// W
    pub qb: Vec<f64>,
    /// W
    pub qm: Vec<f64>,
    /// m³
    pub node_volumes: Vec<f64>,
}

impl LumpedSystem {
    pub fn from_volumes(node_volumes: Vec<f64>, material: &TissueMaterial) -> Self {
        let wc = material.perfusion_rate * material.blood_specific_heat;
        let kb_diag: Vec<f64> = node_volumes.iter().map(|v| wc * v).collect();
        let qb = kb_diag.iter().map(|k| k * material.arterial_temperature).collect();
        let qm = node_volumes.iter().map(|v| material.metabolic_rate * v).collect();
        Self {
            kb_diag,
            qb,
            qm,
            node_volumes,
        }
    }

    pub fn len(&self) -> usize {
        self.node_volumes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_volumes.is_empty()
    }
}

pub fn build_lumped(mesh: &Mesh, material: &TissueMaterial) -> LumpedSystem {
    LumpedSystem::from_volumes(mesh.node_volume_shares(), material)
}

/// Nodal lumped thermal mass `C_i = ρ(T_i) c(T_i) v_i` in J/°C.
pub fn lumped_mass(material: &TissueMaterial, node_volumes: &[f64], temperature: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; node_volumes.len()];
    lumped_mass_into(material, node_volumes, temperature, &mut out);
    out
}

pub fn lumped_mass_into(material: &TissueMaterial, node_volumes: &[f64], temperature: &[f64], out: &mut [f64]) {
    assert_eq!(node_volumes.len(), temperature.len());
    out.par_iter_mut()
        .with_min_len(4096)
        .zip(node_volumes.par_iter().zip(temperature.par_iter()))
        .for_each(|(c, (v, t))| *c = material.heat_capacity(*t) * v);
}
