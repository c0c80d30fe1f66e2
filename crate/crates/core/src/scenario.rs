//! Scenario files: a TOML description of mesh, material, boundary conditions,
//! time stepping, probes and output, plus the drivers that run them.
//!
//! ```toml
//! initial_temperature = 37.0
//! td_mode = false
//!
//! [mesh]
//! kind = "tet"          # or: path = "liver.mesh" (relative to this file)
//! cells = 11
//! size = 0.05
//!
//! [material]
//! density = 1060.0
//! specific_heat = 3700.0
//! conductivity = [[37.0, 0.53], [65.0, 0.57]]
//!
//! [time]
//! dt = 0.005            # or: auto_dt = 0.9
//! steps = 2000
//!
//! [[dirichlet]]
//! set = "zmin"
//! temperature = 37.0
//!
//! [[heat_load]]
//! set = "top_center"
//! power = 2.0
//! end = 3.0
//!
//! [probes]
//! sets = ["top_center"]
//! interval = 10
//!
//! [output]
//! directory = "out"
//! field_interval = 0
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::element::ElementKind;
use crate::material::{MaterialError, PropertyCurve, TissueMaterial};
use crate::mesh::{Mesh, MeshError};
use crate::meshgen;
use crate::oracle::{self, MassKind, OracleControls, OracleError, Stats};
use crate::output;
use crate::precompute::build_lumped;
use crate::solver::{
    self, build_elements, estimate_critical_dt, BoundarySpec, DirichletSpec, HeatLoadSpec, ResolvedBoundary,
    RunControls, RunOutput, SimState, SolverError, TimeStep, DEFAULT_RUNAWAY_LIMIT,
};

pub const THREADS_ENV: &str = "FEDHEAT_THREADS";

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{origin}: {message}")]
    Config { origin: String, message: String },
    #[error("{path}: {source}")]
    Mesh {
        path: PathBuf,
        #[source]
        source: MeshError,
    },
    #[error("material: {0}")]
    Material(#[from] MaterialError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("oracle: {0}")]
    Oracle(#[from] OracleError),
}

impl ScenarioError {
    fn config(origin: impl Into<String>, message: impl Into<String>) -> Self {
        ScenarioError::Config {
            origin: origin.into(),
            message: message.into(),
        }
    }

    pub fn is_instability(&self) -> bool {
        matches!(
            self,
            ScenarioError::Solver(SolverError::Instability { .. })
                | ScenarioError::Oracle(OracleError::Solver(SolverError::Instability { .. }))
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum OneOrThree<T> {
    One(T),
    Three([T; 3]),
}

impl<T: Copy> OneOrThree<T> {
    fn expand(self) -> [T; 3] {
        match self {
            OneOrThree::One(v) => [v; 3],
            OneOrThree::Three(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeshSource {
    File(PathBuf),
    Box {
        kind: ElementKind,
        cells: [usize; 3],
        size: [f64; 3],
    },
}

impl MeshSource {
    pub fn load(&self) -> Result<Mesh, ScenarioError> {
        match self {
            MeshSource::File(path) => {
                let bytes = fs::read(path).map_err(|source| ScenarioError::Io {
                    path: path.clone(),
                    source,
                })?;
                Mesh::parse_bytes(&bytes).map_err(|source| ScenarioError::Mesh {
                    path: path.clone(),
                    source,
                })
            }
            MeshSource::Box { kind, cells, size } => Ok(meshgen::box_mesh(*kind, *cells, *size)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeshFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kind: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cells: Option<OneOrThree<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    size: Option<OneOrThree<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum PropertyFile {
    Constant(f64),
    Table(Vec<(f64, f64)>),
}

impl PropertyFile {
    fn curve(self, name: &str) -> Result<PropertyCurve, ScenarioError> {
        let curve = match self {
            PropertyFile::Constant(v) => PropertyCurve::constant(v),
            PropertyFile::Table(points) => PropertyCurve::new(points),
        };
        curve.map_err(|e| ScenarioError::config(format!("material.{name}"), e.to_string()))
    }

    fn from_curve(curve: &PropertyCurve) -> Self {
        if curve.points().len() == 1 {
            PropertyFile::Constant(curve.points()[0].1)
        } else {
            PropertyFile::Table(curve.points().to_vec())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MaterialFile {
    density: PropertyFile,
    specific_heat: PropertyFile,
    conductivity: PropertyFile,
    #[serde(default)]
    perfusion_rate: f64,
    #[serde(default = "default_blood_specific_heat")]
    blood_specific_heat: f64,
    #[serde(default = "default_body_temperature")]
    arterial_temperature: f64,
    #[serde(default)]
    metabolic_rate: f64,
}

fn default_blood_specific_heat() -> f64 {
    3617.0
}

fn default_body_temperature() -> f64 {
    37.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TimeFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    auto_dt: Option<f64>,
    steps: u64,
    #[serde(default = "default_dt_check")]
    dt_check_interval: u64,
    #[serde(default = "default_runaway")]
    runaway_limit: f64,
}

fn default_dt_check() -> u64 {
    100
}

fn default_runaway() -> f64 {
    DEFAULT_RUNAWAY_LIMIT
}

fn default_interval() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    #[serde(default)]
    pub nodes: Vec<usize>,
    #[serde(default)]
    pub sets: Vec<String>,
    /// Steps between probe rows.
    #[serde(default = "default_interval")]
    pub interval: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            nodes: Vec::new(),
            sets: Vec::new(),
            interval: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_output_dir")]
    pub directory: PathBuf,
    /// Steps between VTK snapshots; 0 writes the initial and final fields only.
    #[serde(default)]
    pub field_interval: u64,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("output")
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: default_output_dir(),
            field_interval: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    #[serde(default = "default_body_temperature")]
    initial_temperature: f64,
    #[serde(default)]
    td_mode: bool,
    mesh: MeshFile,
    material: MaterialFile,
    time: TimeFile,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    dirichlet: Vec<DirichletSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    heat_load: Vec<HeatLoadSpec>,
    #[serde(default)]
    probes: ProbeConfig,
    #[serde(default)]
    output: OutputConfig,
    /// Results section written into run manifests; ignored on input.
    #[serde(default, skip_serializing)]
    #[allow(dead_code)]
    run: Option<toml::Table>,
}

/// A fully validated scenario. Relative paths are already resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub mesh: MeshSource,
    pub material: TissueMaterial,
    pub initial_temperature: f64,
    pub td_mode: bool,
    pub time_step: TimeStep,
    pub steps: u64,
    pub dt_check_interval: u64,
    pub runaway_limit: f64,
    pub boundary: BoundarySpec,
    pub probes: ProbeConfig,
    pub output: OutputConfig,
}

impl Scenario {
    pub fn from_file(path: &Path) -> Result<Self, ScenarioError> {
        let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base, &path.display().to_string())
    }

    /// Parses scenario text; `base` anchors relative mesh and output paths.
    pub fn parse(text: &str, base: &Path, origin: &str) -> Result<Self, ScenarioError> {
        let raw: ScenarioFile = toml::from_str(text).map_err(|e| ScenarioError::config(origin, e.to_string()))?;
        let err = |m: String| ScenarioError::config(origin, m);

        let mesh = match (raw.mesh.path, raw.mesh.kind) {
            (Some(p), None) => {
                if raw.mesh.cells.is_some() || raw.mesh.size.is_some() {
                    return Err(err("mesh: `cells`/`size` only apply to generated meshes".into()));
                }
                MeshSource::File(base.join(p))
            }
            (None, Some(kind)) => {
                let kind = match kind.as_str() {
                    "tet" | "tet4" => ElementKind::Tet4,
                    "hex" | "hex8" => ElementKind::Hex8,
                    other => return Err(err(format!("mesh: unknown kind `{other}` (expected tet or hex)"))),
                };
                let cells = raw.mesh.cells.ok_or_else(|| err("mesh: generated mesh needs `cells`".into()))?.expand();
                let size = raw.mesh.size.ok_or_else(|| err("mesh: generated mesh needs `size`".into()))?.expand();
                if cells.contains(&0) {
                    return Err(err("mesh: `cells` must be at least 1".into()));
                }
                if size.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
                    return Err(err("mesh: `size` must be positive".into()));
                }
                MeshSource::Box { kind, cells, size }
            }
            _ => return Err(err("mesh: give exactly one of `path` or `kind`".into())),
        };

        let m = raw.material;
        let material = TissueMaterial {
            density: m.density.curve("density")?,
            specific_heat: m.specific_heat.curve("specific_heat")?,
            conductivity: m.conductivity.curve("conductivity")?,
            perfusion_rate: m.perfusion_rate,
            blood_specific_heat: m.blood_specific_heat,
            arterial_temperature: m.arterial_temperature,
            metabolic_rate: m.metabolic_rate,
        }
        .validated()?;

        if !raw.initial_temperature.is_finite() {
            return Err(err("initial_temperature must be finite".into()));
        }
        let time_step = match (raw.time.dt, raw.time.auto_dt) {
            (Some(dt), None) if dt > 0.0 && dt.is_finite() => TimeStep::Fixed(dt),
            (Some(dt), None) => return Err(err(format!("time.dt must be positive, got {dt}"))),
            (None, Some(s)) if s > 0.0 && s <= 1.0 => TimeStep::Auto(s),
            (None, Some(s)) => return Err(err(format!("time.auto_dt must lie in (0, 1], got {s}"))),
            _ => return Err(err("time: give exactly one of `dt` or `auto_dt`".into())),
        };
        if raw.time.steps == 0 {
            return Err(err("time.steps must be at least 1".into()));
        }
        if !(raw.time.runaway_limit > 0.0) {
            return Err(err("time.runaway_limit must be positive".into()));
        }
        if raw.probes.interval == 0 {
            return Err(err("probes.interval must be at least 1".into()));
        }

        let mut output = raw.output;
        output.directory = base.join(output.directory);
        Ok(Self {
            mesh,
            material,
            initial_temperature: raw.initial_temperature,
            td_mode: raw.td_mode,
            time_step,
            steps: raw.time.steps,
            dt_check_interval: raw.time.dt_check_interval,
            runaway_limit: raw.time.runaway_limit,
            boundary: BoundarySpec {
                dirichlet: raw.dirichlet,
                heat_loads: raw.heat_load,
            },
            probes: raw.probes,
            output,
        })
    }

    /// Serialises back to scenario TOML. Paths are written as stored.
    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_file()).expect("scenario serialises")
    }

    fn to_file(&self) -> ScenarioFile {
        let mesh = match &self.mesh {
            MeshSource::File(p) => MeshFile {
                path: Some(p.clone()),
                kind: None,
                cells: None,
                size: None,
            },
            MeshSource::Box { kind, cells, size } => MeshFile {
                path: None,
                kind: Some(
                    match kind {
                        ElementKind::Tet4 => "tet",
                        ElementKind::Hex8 => "hex",
                    }
                    .to_string(),
                ),
                cells: Some(OneOrThree::Three(*cells)),
                size: Some(OneOrThree::Three(*size)),
            },
        };
        let m = &self.material;
        let (dt, auto_dt) = match self.time_step {
            TimeStep::Fixed(dt) => (Some(dt), None),
            TimeStep::Auto(s) => (None, Some(s)),
        };
        ScenarioFile {
            initial_temperature: self.initial_temperature,
            td_mode: self.td_mode,
            mesh,
            material: MaterialFile {
                density: PropertyFile::from_curve(&m.density),
                specific_heat: PropertyFile::from_curve(&m.specific_heat),
                conductivity: PropertyFile::from_curve(&m.conductivity),
                perfusion_rate: m.perfusion_rate,
                blood_specific_heat: m.blood_specific_heat,
                arterial_temperature: m.arterial_temperature,
                metabolic_rate: m.metabolic_rate,
            },
            time: TimeFile {
                dt,
                auto_dt,
                steps: self.steps,
                dt_check_interval: self.dt_check_interval,
                runaway_limit: self.runaway_limit,
            },
            dirichlet: self.boundary.dirichlet.clone(),
            heat_load: self.boundary.heat_loads.clone(),
            probes: self.probes.clone(),
            output: self.output.clone(),
            run: None,
        }
    }

    /// Loads the mesh and binds boundary conditions and probes to it.
    pub fn prepare(&self) -> Result<Prepared, ScenarioError> {
        let mesh = self.mesh.load()?;
        self.prepare_on(mesh)
    }

    /// Like [`Scenario::prepare`] with a caller-supplied mesh.
    pub fn prepare_on(&self, mesh: Mesh) -> Result<Prepared, ScenarioError> {
        let boundary = self.boundary.resolve(&mesh)?;
        let mut probes: Vec<usize> = Vec::new();
        for &n in &self.probes.nodes {
            if n >= mesh.node_count() {
                return Err(ScenarioError::config(
                    "probes",
                    format!("node {n} out of range ({} nodes)", mesh.node_count()),
                ));
            }
            probes.push(n);
        }
        for set in &self.probes.sets {
            let nodes = mesh
                .node_set(set)
                .map_err(|_| ScenarioError::config("probes", format!("unknown node set `{set}`")))?;
            probes.extend_from_slice(nodes);
        }
        let mut seen = std::collections::BTreeSet::new();
        probes.retain(|n| seen.insert(*n));
        let initial = vec![self.initial_temperature; mesh.node_count()];
        Ok(Prepared {
            mesh,
            boundary,
            initial,
            probes,
        })
    }

    pub fn controls(&self, probes: Vec<usize>, workers: usize) -> RunControls {
        RunControls {
            time_step: self.time_step,
            steps: self.steps,
            td_mode: self.td_mode,
            probe_nodes: probes,
            probe_interval: self.probes.interval,
            dt_check_interval: self.dt_check_interval,
            workers,
            runaway_limit: self.runaway_limit,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Prepared {
    pub mesh: Mesh,
    pub boundary: ResolvedBoundary,
    pub initial: Vec<f64>,
    pub probes: Vec<usize>,
}

/// Worker count: explicit request, then `FEDHEAT_THREADS`, then the hardware.
pub fn resolve_workers(requested: Option<usize>, env: Option<&str>) -> Result<usize, ScenarioError> {
    if let Some(n) = requested {
        if n == 0 {
            return Err(ScenarioError::config("--threads", "must be at least 1"));
        }
        return Ok(n);
    }
    if let Some(v) = env {
        return match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(ScenarioError::config(THREADS_ENV, format!("expected a positive integer, got `{v}`"))),
        };
    }
    Ok(hardware_threads())
}

pub fn hardware_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Runs the solver only, without touching the filesystem.
pub fn simulate(
    scenario: &Scenario,
    prepared: &Prepared,
    workers: usize,
    observer: impl FnMut(&SimState),
) -> Result<RunOutput, ScenarioError> {
    let controls = scenario.controls(prepared.probes.clone(), workers);
    Ok(solver::run(
        &prepared.mesh,
        &scenario.material,
        prepared.boundary.clone(),
        &prepared.initial,
        &controls,
        observer,
    )?)
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub output: RunOutput,
    pub stats: Stats,
    pub directory: PathBuf,
    pub files: Vec<PathBuf>,
}

/// Runs a scenario and writes VTK snapshots, the probe CSV, the final
/// statistics and a re-runnable manifest into the output directory.
pub fn run_scenario(scenario: &Scenario, workers: usize) -> Result<RunReport, ScenarioError> {
    let prepared = scenario.prepare()?;
    let dir = scenario.output.directory.clone();
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| ScenarioError::Io { path, source }
    };
    fs::create_dir_all(&dir).map_err(io(&dir))?;

    let mut files = Vec::new();
    let mut write_error = None;
    let interval = scenario.output.field_interval;
    let steps = scenario.steps;
    let out = simulate(scenario, &prepared, workers, |state| {
        let due = state.step == 0 || state.step == steps || (interval > 0 && state.step % interval == 0);
        if !due || write_error.is_some() {
            return;
        }
        let path = dir.join(format!("field_{:06}.vtk", state.step));
        match output::write_vtk_file(&path, &prepared.mesh, &state.temperature, state.time()) {
            Ok(()) => files.push(path),
            Err(e) => write_error = Some(ScenarioError::Io { path, source: e }),
        }
    })?;
    if let Some(e) = write_error {
        return Err(e);
    }

    let probe_path = dir.join("probes.csv");
    fs::write(&probe_path, output::probe_csv(&out.probes)).map_err(io(&probe_path))?;
    files.push(probe_path);

    let stats = oracle::stats_summary(&out.state.temperature)?;
    let rows = [("P", stats)];
    let txt = dir.join("stats.txt");
    fs::write(&txt, output::stats_table_text(&rows, None)).map_err(io(&txt))?;
    let csv = dir.join("stats.csv");
    fs::write(&csv, output::stats_table_csv(&rows, None)).map_err(io(&csv))?;
    files.extend([txt, csv]);

    let manifest = dir.join("manifest.toml");
    fs::write(&manifest, manifest_text(scenario, &prepared, &out)).map_err(io(&manifest))?;
    files.push(manifest);

    Ok(RunReport {
        output: out,
        stats,
        directory: dir,
        files,
    })
}

/// Scenario TOML with absolute paths and the time step actually used,
/// followed by a `[run]` table of results.
pub fn manifest_text(scenario: &Scenario, prepared: &Prepared, out: &RunOutput) -> String {
    let mut resolved = scenario.clone();
    if let MeshSource::File(p) = &resolved.mesh {
        resolved.mesh = MeshSource::File(fs::canonicalize(p).unwrap_or_else(|_| p.clone()));
    }
    resolved.output.directory =
        fs::canonicalize(&resolved.output.directory).unwrap_or_else(|_| resolved.output.directory.clone());
    resolved.time_step = TimeStep::Fixed(out.dt);

    let mut run = toml::Table::new();
    let mut put = |k: &str, v: toml::Value| {
        run.insert(k.to_string(), v);
    };
    put("version", env!("CARGO_PKG_VERSION").into());
    put(
        "requested_time_step",
        match scenario.time_step {
            TimeStep::Fixed(dt) => format!("dt = {dt:?}"),
            TimeStep::Auto(s) => format!("auto_dt = {s:?}"),
        }
        .into(),
    );
    put("dt", out.dt.into());
    put("critical_dt", out.critical_dt.into());
    put("dt_warnings", (out.dt_warnings as i64).into());
    put("workers", (out.workers as i64).into());
    put("nodes", (prepared.mesh.node_count() as i64).into());
    put("elements", (prepared.mesh.elements().len() as i64).into());
    put("final_time", out.state.time().into());
    put("precompute_s", out.timing.precompute_s.into());
    put("total_s", out.timing.total_s.into());
    put("median_step_s", out.timing.median_step_s().into());

    let mut text = resolved.to_toml();
    let mut wrapper = toml::Table::new();
    wrapper.insert("run".into(), toml::Value::Table(run));
    text.push('\n');
    text.push_str(&toml::to_string(&wrapper).expect("manifest serialises"));
    text
}

#[derive(Debug, Clone, PartialEq)]
pub struct DtEstimate {
    pub label: String,
    pub temperature: Option<f64>,
    pub critical_dt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DtReport {
    pub estimates: Vec<DtEstimate>,
    pub dt: f64,
    /// Smallest estimate, the one the verdict is based on.
    pub limit: f64,
}

impl DtReport {
    pub fn stable(&self) -> bool {
        self.dt <= self.limit
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for e in &self.estimates {
            s.push_str(&format!("critical dt ({}): {:.6e} s\n", e.label, e.critical_dt));
        }
        s.push_str(&format!("configured dt: {:.6e} s\n", self.dt));
        s.push_str(&format!(
            "verdict: {} (dt / critical = {:.4})\n",
            if self.stable() { "stable" } else { "unstable" },
            self.dt / self.limit
        ));
        s
    }
}

/// Gershgorin critical step at the initial field and, for temperature-dependent
/// materials, at uniform fields at both ends of the tabulated range.
pub fn check_dt(scenario: &Scenario, prepared: &Prepared) -> Result<DtReport, ScenarioError> {
    let elements = build_elements(&prepared.mesh).map_err(SolverError::from)?;
    let lumped = build_lumped(&prepared.mesh, &scenario.material);
    let mut initial = prepared.initial.clone();
    prepared.boundary.apply_dirichlet(&mut initial);
    let at_start = estimate_critical_dt(&elements, &lumped, &scenario.material, &initial);
    let mut estimates = vec![DtEstimate {
        label: format!("initial field, T0 = {} °C", scenario.initial_temperature),
        temperature: None,
        critical_dt: at_start,
    }];
    if scenario.td_mode {
        if let Some((lo, hi)) = scenario.material.tabulated_range() {
            for t in [lo, hi] {
                let field = vec![t; prepared.mesh.node_count()];
                estimates.push(DtEstimate {
                    label: format!("uniform {t} °C"),
                    temperature: Some(t),
                    critical_dt: estimate_critical_dt(&elements, &lumped, &scenario.material, &field),
                });
            }
        }
    }
    let dt = match scenario.time_step {
        TimeStep::Fixed(dt) => dt,
        TimeStep::Auto(s) => s * at_start,
    };
    let limit = estimates.iter().map(|e| e.critical_dt).fold(f64::INFINITY, f64::min);
    Ok(DtReport { estimates, dt, limit })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub oracle: Stats,
    pub proposed: Stats,
    pub error: f64,
    pub oracle_field: Vec<f64>,
    pub proposed_field: Vec<f64>,
}

impl Comparison {
    pub fn rows(&self) -> [(&'static str, Stats); 3] {
        [
            ("O", self.oracle),
            ("P", self.proposed),
            ("D", self.proposed.difference(&self.oracle)),
        ]
    }
}

/// Runs the explicit solver and the implicit oracle on the same scenario and
/// compares the final fields.
pub fn compare_oracle(
    scenario: &Scenario,
    prepared: &Prepared,
    workers: usize,
    mass: MassKind,
) -> Result<Comparison, ScenarioError> {
    let out = simulate(scenario, prepared, workers, |_| {})?;
    let controls = OracleControls {
        dt: out.dt,
        steps: scenario.steps,
        td_mode: scenario.td_mode,
        mass,
    };
    let reference = oracle::run_implicit(
        &prepared.mesh,
        &scenario.material,
        &prepared.boundary,
        &prepared.initial,
        &controls,
    )?;
    let error = oracle::relative_error(&reference, &out.state.temperature)?;
    Ok(Comparison {
        oracle: oracle::stats_summary(&reference)?,
        proposed: oracle::stats_summary(&out.state.temperature)?,
        error,
        oracle_field: reference,
        proposed_field: out.state.temperature,
    })
}
