//! Explicit lumped-mass time stepping with element-level conduction loads.
//!
//! Each step:
//! 1. (TD mode) nodal ρc and k are re-evaluated at the current temperatures;
//!    element conductivity is the mean of its nodal k values.
//! 2. Element phase: `F_e = k̄ A T_e`, scattered as net inflow `F = -Σ F_e`.
//! 3. Node phase: `T += (Δt / C) (F - K_b T + Q_b + Q_m + Q_r)`, then Dirichlet
//!    nodes are overwritten with their prescribed values.
//!
//! The conduction term carries the physical (decaying) sign: stiffness times
//! temperature enters the balance negatively.

mod boundary;
mod scatter;

use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

pub use boundary::{BoundarySpec, DirichletSpec, HeatLoadSpec, NodalLoad, ResolvedBoundary};
pub use scatter::CHUNK_ELEMENTS;
use scatter::ScatterPlan;

use crate::element::{build_precomp, ElementError, ElementPrecomp};
use crate::material::TissueMaterial;
use crate::mesh::Mesh;
use crate::precompute::{build_lumped, lumped_mass_into, LumpedSystem};

/// Temperatures beyond this magnitude (°C) abort the run.
pub const DEFAULT_RUNAWAY_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("unknown node set '{0}'")]
    UnknownNodeSet(String),
    #[error("node {node} appears in more than one Dirichlet entry")]
    DuplicateDirichlet { node: usize },
    #[error("node {node} out of range (mesh has {count} nodes)")]
    NodeOutOfRange { node: usize, count: usize },
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("heat load window [{start}, {end}) is empty")]
    BadLoadWindow { start: f64, end: f64 },
    #[error("time step must be positive and finite, got {0}")]
    BadTimeStep(f64),
    #[error("free node {node} has zero thermal mass (not attached to any element)")]
    ZeroMass { node: usize },
    #[error("initial field has {got} values, mesh has {expected} nodes")]
    FieldLength { expected: usize, got: usize },
    #[error(
        "numerical instability at step {step}: node {node} reached T = {value}; reduce the time step (critical estimate {critical_dt:e} s)"
    )]
    Instability {
        step: u64,
        node: usize,
        value: f64,
        critical_dt: f64,
    },
    #[error(transparent)]
    Element(#[from] ElementError),
    #[error("failed to build thread pool: {0}")]
    ThreadPool(String),
}

/// Mean of the nodal conductivities `k(T_n)` over the element's nodes.
pub fn element_conductivity(material: &TissueMaterial, temperature: &[f64], node_ids: &[usize]) -> f64 {
    mean_over(node_ids, |n| material.conductivity.eval(temperature[n]))
}

fn mean_over(node_ids: &[usize], value: impl Fn(usize) -> f64) -> f64 {
    let mut sum = 0.0;
    for &n in node_ids {
        sum += value(n);
    }
    sum / node_ids.len() as f64
}

/// `F_e = k̄ · A · T_local`.
pub fn element_loads(precomp: &ElementPrecomp, conductivity: f64, local_temperature: &[f64]) -> Vec<f64> {
    let n = precomp.n();
    assert_eq!(local_temperature.len(), n);
    precomp
        .a
        .chunks_exact(n)
        .map(|row| conductivity * row.iter().zip(local_temperature).map(|(a, t)| a * t).sum::<f64>())
        .collect()
}

/// One forward-Euler nodal update.
#[allow(clippy::too_many_arguments)]
#[inline]
pub fn nodal_update(t: f64, mass: f64, dt: f64, conduction: f64, kb: f64, qb: f64, qm: f64, qr: f64) -> f64 {
    (dt / mass) * (conduction - kb * t + qb + qm + qr) + t
}

pub fn build_elements(mesh: &Mesh) -> Result<Vec<ElementPrecomp>, ElementError> {
    (0..mesh.elements().len())
        .into_par_iter()
        .map(|e| {
            let el = &mesh.elements()[e];
            build_precomp(el.kind(), el.nodes(), &mesh.element_coords(e))
        })
        .collect()
}

/// Gershgorin bound on the largest eigenvalue of `C⁻¹ (K + K_b)`, with the
/// row sums of `|K|` bounded element by element.
pub fn gershgorin_lambda(elements: &[ElementPrecomp], conductivity: &[f64], kb_diag: &[f64], mass: &[f64]) -> f64 {
    let mut row = kb_diag.to_vec();
    for (el, &k) in elements.iter().zip(conductivity) {
        let n = el.n();
        for (i, a_row) in el.a.chunks_exact(n).enumerate() {
            row[el.node_ids[i]] += k * a_row.iter().map(|a| a.abs()).sum::<f64>();
        }
    }
    row.iter()
        .zip(mass)
        .filter(|(_, &c)| c > 0.0)
        .map(|(r, c)| r / c)
        .fold(0.0, f64::max)
}

/// Safe critical time step `2 / λ̂` at the temperature field `temperature`.
pub fn estimate_critical_dt(
    elements: &[ElementPrecomp],
    lumped: &LumpedSystem,
    material: &TissueMaterial,
    temperature: &[f64],
) -> f64 {
    let conductivity: Vec<f64> = elements
        .iter()
        .map(|e| element_conductivity(material, temperature, &e.node_ids))
        .collect();
    let mut mass = vec![0.0; lumped.len()];
    lumped_mass_into(material, &lumped.node_volumes, temperature, &mut mass);
    critical_dt_from_lambda(gershgorin_lambda(elements, &conductivity, &lumped.kb_diag, &mass))
}

fn critical_dt_from_lambda(lambda: f64) -> f64 {
    if lambda > 0.0 {
        2.0 / lambda
    } else {
        f64::INFINITY
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    /// °C per node
    pub temperature: Vec<f64>,
    pub step: u64,
    pub t0: f64,
    pub dt: f64,
    /// Net nodal conduction inflow of the last step, W.
    pub loads: Vec<f64>,
}

impl SimState {
    /// Current time, derived from the step count.
    pub fn time(&self) -> f64 {
        self.t0 + self.step as f64 * self.dt
    }
}

/// The explicit engine: frozen element data, lumped vectors, and scratch space.
pub struct Engine {
    material: TissueMaterial,
    elements: Vec<ElementPrecomp>,
    lumped: LumpedSystem,
    boundary: ResolvedBoundary,
    plan: ScatterPlan,
    td_mode: bool,
    mass: Vec<f64>,
    conductivity: Vec<f64>,
    node_k: Vec<f64>,
    heat_input: Vec<f64>,
    buffers: Vec<Vec<f64>>,
    is_dirichlet: Vec<bool>,
    pool: rayon::ThreadPool,
    runaway_limit: f64,
}

impl Engine {
    /// Pre-computation: element matrices, lumped vectors and the scatter plan.
    /// Properties are evaluated at `initial` until the first TD update.
    pub fn new(
        mesh: &Mesh,
        material: &TissueMaterial,
        boundary: ResolvedBoundary,
        td_mode: bool,
        workers: usize,
        initial: &[f64],
    ) -> Result<Self, SolverError> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| SolverError::ThreadPool(e.to_string()))?;
        let n = mesh.node_count();
        if initial.len() != n {
            return Err(SolverError::FieldLength {
                expected: n,
                got: initial.len(),
            });
        }
        let (elements, lumped) = pool.install(|| Ok::<_, SolverError>((build_elements(mesh)?, build_lumped(mesh, material))))?;
        let is_dirichlet = boundary.dirichlet_mask(n);
        if let Some(node) = (0..n).find(|&i| !is_dirichlet[i] && !(lumped.node_volumes[i] > 0.0)) {
            return Err(SolverError::ZeroMass { node });
        }
        let plan = ScatterPlan::new(&elements, n);
        let buffers = plan.buffers();
        let mut engine = Self {
            material: material.clone(),
            conductivity: vec![0.0; elements.len()],
            elements,
            lumped,
            boundary,
            plan,
            td_mode,
            mass: vec![0.0; n],
            node_k: vec![0.0; n],
            heat_input: vec![0.0; n],
            buffers,
            is_dirichlet,
            pool,
            runaway_limit: DEFAULT_RUNAWAY_LIMIT,
        };
        let mut start = initial.to_vec();
        engine.boundary.apply_dirichlet(&mut start);
        engine.evaluate_properties(&start);
        Ok(engine)
    }

    pub fn with_runaway_limit(mut self, limit: f64) -> Self {
        self.runaway_limit = limit;
        self
    }

    pub fn elements(&self) -> &[ElementPrecomp] {
        &self.elements
    }

    pub fn lumped(&self) -> &LumpedSystem {
        &self.lumped
    }

    pub fn boundary(&self) -> &ResolvedBoundary {
        &self.boundary
    }

    pub fn material(&self) -> &TissueMaterial {
        &self.material
    }

    /// Current lumped mass `C`.
    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    /// Current per-element conductivity `k̄`.
    pub fn conductivity(&self) -> &[f64] {
        &self.conductivity
    }

    pub fn td_mode(&self) -> bool {
        self.td_mode
    }

    pub fn workers(&self) -> usize {
        self.pool.current_num_threads()
    }

    /// Initial state with Dirichlet values applied.
    pub fn initial_state(&self, initial: &[f64], t0: f64, dt: f64) -> Result<SimState, SolverError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(SolverError::BadTimeStep(dt));
        }
        let mut temperature = initial.to_vec();
        self.boundary.apply_dirichlet(&mut temperature);
        Ok(SimState {
            loads: vec![0.0; temperature.len()],
            temperature,
            step: 0,
            t0,
            dt,
        })
    }

    /// Re-evaluates nodal k, C and element k̄ at `temperature`.
    pub fn evaluate_properties(&mut self, temperature: &[f64]) {
        let material = &self.material;
        let node_k = &mut self.node_k;
        let mass = &mut self.mass;
        let conductivity = &mut self.conductivity;
        let elements = &self.elements;
        let volumes = &self.lumped.node_volumes;
        self.pool.install(|| {
            node_k
                .par_iter_mut()
                .with_min_len(4096)
                .zip(temperature.par_iter())
                .for_each(|(k, t)| *k = material.conductivity.eval(*t));
            lumped_mass_into(material, volumes, temperature, mass);
            let node_k = &*node_k;
            conductivity
                .par_iter_mut()
                .with_min_len(4096)
                .zip(elements.par_iter())
                .for_each(|(k, el)| *k = mean_over(&el.node_ids, |n| node_k[n]));
        });
    }

    /// Net conduction inflow `-K(T) T` with the current element conductivities.
    pub fn scatter_loads(&mut self, temperature: &[f64], out: &mut [f64]) {
        let (plan, elements, conductivity, buffers) = (&self.plan, &self.elements, &self.conductivity, &mut self.buffers);
        self.pool
            .install(|| plan.scatter(elements, conductivity, temperature, buffers, out));
    }

    /// Gershgorin critical step for the current properties.
    pub fn critical_dt(&self) -> f64 {
        critical_dt_from_lambda(gershgorin_lambda(
            &self.elements,
            &self.conductivity,
            &self.lumped.kb_diag,
            &self.mass,
        ))
    }

    /// Advances `state` by one step of size `state.dt`.
    pub fn step(&mut self, state: &mut SimState) -> Result<(), SolverError> {
        if self.td_mode {
            self.evaluate_properties(&state.temperature);
        }
        let t = state.time();
        self.boundary.heat_input_into(t, &mut self.heat_input);
        let mut loads = std::mem::take(&mut state.loads);
        self.scatter_loads(&state.temperature, &mut loads);
        state.loads = loads;

        let dt = state.dt;
        let (mass, lumped, heat_input, is_dirichlet) = (&self.mass, &self.lumped, &self.heat_input, &self.is_dirichlet);
        let loads = &state.loads;
        let limit = self.runaway_limit;
        let bad = self.pool.install(|| {
            state
                .temperature
                .par_iter_mut()
                .with_min_len(4096)
                .enumerate()
                .for_each(|(i, temp)| {
                    if !is_dirichlet[i] {
                        *temp = nodal_update(
                            *temp,
                            mass[i],
                            dt,
                            loads[i],
                            lumped.kb_diag[i],
                            lumped.qb[i],
                            lumped.qm[i],
                            heat_input[i],
                        );
                    }
                });
            state
                .temperature
                .par_iter()
                .with_min_len(4096)
                .position_first(|t| !(t.is_finite() && t.abs() <= limit))
        });
        self.boundary.apply_dirichlet(&mut state.temperature);
        state.step += 1;
        if let Some(node) = bad {
            return Err(SolverError::Instability {
                step: state.step,
                node,
                value: state.temperature[node],
                critical_dt: self.critical_dt(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeStep {
    Fixed(f64),
    /// Fraction of the Gershgorin critical step at the initial field.
    Auto(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunControls {
    pub time_step: TimeStep,
    pub steps: u64,
    pub td_mode: bool,
    pub probe_nodes: Vec<usize>,
    /// Probe every this many steps (step 0 included).
    pub probe_interval: u64,
    /// TD mode re-estimates the critical step this often; 0 disables.
    pub dt_check_interval: u64,
    pub workers: usize,
    pub runaway_limit: f64,
}

impl Default for RunControls {
    fn default() -> Self {
        Self {
            time_step: TimeStep::Auto(0.9),
            steps: 1,
            td_mode: false,
            probe_nodes: Vec::new(),
            probe_interval: 1,
            dt_check_interval: 100,
            workers: 0,
            runaway_limit: DEFAULT_RUNAWAY_LIMIT,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProbeHistory {
    pub nodes: Vec<usize>,
    pub times: Vec<f64>,
    /// One row per probe time, one column per probe node.
    pub values: Vec<Vec<f64>>,
}

impl ProbeHistory {
    fn record(&mut self, state: &SimState) {
        self.times.push(state.time());
        self.values
            .push(self.nodes.iter().map(|&n| state.temperature[n]).collect());
    }

    pub fn series(&self, column: usize) -> Vec<f64> {
        self.values.iter().map(|row| row[column]).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Timing {
    pub precompute_s: f64,
    pub total_s: f64,
    /// Wall time of each step, seconds.
    pub step_s: Vec<f64>,
}

impl Timing {
    pub fn median_step_s(&self) -> f64 {
        crate::oracle::stats_summary(&self.step_s).map_or(0.0, |s| s.median)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub state: SimState,
    pub probes: ProbeHistory,
    pub dt: f64,
    /// Gershgorin estimate at the initial field.
    pub critical_dt: f64,
    /// Number of TD re-estimates that came out below the running step.
    pub dt_warnings: usize,
    pub workers: usize,
    pub timing: Timing,
}

/// Full run: pre-computation, initialisation, then the step loop.
/// `observer` sees the state after initialisation and after every step.
pub fn run(
    mesh: &Mesh,
    material: &TissueMaterial,
    boundary: ResolvedBoundary,
    initial: &[f64],
    controls: &RunControls,
    mut observer: impl FnMut(&SimState),
) -> Result<RunOutput, SolverError> {
    let started = Instant::now();
    if let Some(&node) = controls.probe_nodes.iter().find(|&&n| n >= mesh.node_count()) {
        return Err(SolverError::NodeOutOfRange {
            node,
            count: mesh.node_count(),
        });
    }
    let engine = Engine::new(mesh, material, boundary, controls.td_mode, controls.workers, initial)?;
    let mut engine = engine.with_runaway_limit(controls.runaway_limit);
    let critical_dt = engine.critical_dt();
    let dt = match controls.time_step {
        TimeStep::Fixed(dt) => {
            if dt > critical_dt {
                log::warn!("time step {dt:e} s exceeds the critical estimate {critical_dt:e} s");
            }
            dt
        }
        TimeStep::Auto(safety) => safety * critical_dt,
    };
    let mut state = engine.initial_state(initial, 0.0, dt)?;
    let precompute_s = started.elapsed().as_secs_f64();

    let mut probes = ProbeHistory {
        nodes: controls.probe_nodes.clone(),
        ..Default::default()
    };
    let interval = controls.probe_interval.max(1);
    probes.record(&state);
    observer(&state);

    let mut step_s = Vec::with_capacity(controls.steps as usize);
    let mut dt_warnings = 0;
    for _ in 0..controls.steps {
        let t = Instant::now();
        engine.step(&mut state)?;
        step_s.push(t.elapsed().as_secs_f64());
        if state.step % interval == 0 {
            probes.record(&state);
        }
        if engine.td_mode() && controls.dt_check_interval > 0 && state.step % controls.dt_check_interval == 0 {
            let current = engine.critical_dt();
            if dt > current {
                dt_warnings += 1;
                log::warn!(
                    "step {}: time step {dt:e} s exceeds the current critical estimate {current:e} s",
                    state.step
                );
            }
        }
        observer(&state);
    }

    Ok(RunOutput {
        dt,
        critical_dt,
        dt_warnings,
        workers: engine.workers(),
        timing: Timing {
            precompute_s,
            total_s: started.elapsed().as_secs_f64(),
            step_s,
        },
        probes,
        state,
    })
}
