//! Timing studies: worker scaling, per-step cost against mesh size, and the
//! TI/TD overhead.

use std::fmt::Write as _;

use crate::element::ElementKind;
use crate::meshgen;
use crate::scenario::{simulate, MeshSource, Prepared, Scenario, ScenarioError};

fn median(values: &mut [f64]) -> f64 {
    values.sort_unstable_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    /// Median over repetitions of the per-run median step time, seconds.
    pub step_s: f64,
    /// Median total run time, seconds.
    pub total_s: f64,
}

/// Runs the prepared scenario `reps` times and reports medians.
pub fn measure(scenario: &Scenario, prepared: &Prepared, workers: usize, reps: usize) -> Result<Sample, ScenarioError> {
    let mut step = Vec::with_capacity(reps);
    let mut total = Vec::with_capacity(reps);
    for _ in 0..reps.max(1) {
        let out = simulate(scenario, prepared, workers, |_| {})?;
        step.push(out.timing.median_step_s());
        total.push(out.timing.total_s);
    }
    Ok(Sample {
        step_s: median(&mut step),
        total_s: median(&mut total),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkerRow {
    pub workers: usize,
    pub sample: Sample,
    /// Step-time speedup against the first row.
    pub speedup: f64,
}

pub fn worker_scaling(
    scenario: &Scenario,
    prepared: &Prepared,
    workers: &[usize],
    reps: usize,
) -> Result<Vec<WorkerRow>, ScenarioError> {
    let mut rows: Vec<WorkerRow> = Vec::new();
    for &w in workers {
        let sample = measure(scenario, prepared, w, reps)?;
        let base = rows.first().map_or(sample.step_s, |r| r.sample.step_s);
        rows.push(WorkerRow {
            workers: w,
            sample,
            speedup: base / sample.step_s,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y ≈ slope·x + intercept`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(LinearFit {
        slope,
        intercept,
        r_squared,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub cells: usize,
    pub nodes: usize,
    pub elements: usize,
    pub sample: Sample,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub rows: Vec<SweepRow>,
    pub fit: Option<LinearFit>,
}

/// Per-step time on generated cubes with `cells` subdivisions per edge.
/// Boundary conditions must reference the generator's node sets.
pub fn mesh_sweep(
    scenario: &Scenario,
    kind: ElementKind,
    cells: &[usize],
    workers: usize,
    reps: usize,
) -> Result<Sweep, ScenarioError> {
    let size = match &scenario.mesh {
        MeshSource::Box { size, .. } => *size,
        MeshSource::File(_) => [0.05; 3],
    };
    let mut rows = Vec::new();
    for &n in cells {
        let mesh = meshgen::box_mesh(kind, [n; 3], size);
        let (nodes, elements) = (mesh.node_count(), mesh.elements().len());
        let prepared = scenario.prepare_on(mesh)?;
        rows.push(SweepRow {
            cells: n,
            nodes,
            elements,
            sample: measure(scenario, &prepared, workers, reps)?,
        });
    }
    let x: Vec<f64> = rows.iter().map(|r| r.nodes as f64).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.sample.step_s).collect();
    Ok(Sweep {
        fit: linear_fit(&x, &y),
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeComparison {
    pub ti: Sample,
    pub td: Sample,
}

pub fn ti_vs_td(
    scenario: &Scenario,
    prepared: &Prepared,
    workers: usize,
    reps: usize,
) -> Result<ModeComparison, ScenarioError> {
    let mut s = scenario.clone();
    s.td_mode = false;
    let ti = measure(&s, prepared, workers, reps)?;
    s.td_mode = true;
    let td = measure(&s, prepared, workers, reps)?;
    Ok(ModeComparison { ti, td })
}

pub fn workers_csv(rows: &[WorkerRow]) -> String {
    let mut s = String::from("workers,median_step_s,total_s,speedup\n");
    for r in rows {
        writeln!(s, "{},{:?},{:?},{:?}", r.workers, r.sample.step_s, r.sample.total_s, r.speedup).unwrap();
    }
    s
}

pub fn workers_text(rows: &[WorkerRow]) -> String {
    let mut s = format!("{:>8} {:>16} {:>12} {:>9}\n", "workers", "step (ms)", "total (s)", "speedup");
    for r in rows {
        writeln!(
            s,
            "{:>8} {:>16.4} {:>12.3} {:>9.3}",
            r.workers,
            r.sample.step_s * 1e3,
            r.sample.total_s,
            r.speedup
        )
        .unwrap();
    }
    s
}

pub fn sweep_csv(sweep: &Sweep) -> String {
    let mut s = String::from("cells,nodes,elements,median_step_s,total_s\n");
    for r in &sweep.rows {
        writeln!(s, "{},{},{},{:?},{:?}", r.cells, r.nodes, r.elements, r.sample.step_s, r.sample.total_s).unwrap();
    }
    s
}

pub fn sweep_text(sweep: &Sweep) -> String {
    let mut s = format!("{:>6} {:>9} {:>10} {:>16}\n", "cells", "nodes", "elements", "step (ms)");
    for r in &sweep.rows {
        writeln!(s, "{:>6} {:>9} {:>10} {:>16.4}", r.cells, r.nodes, r.elements, r.sample.step_s * 1e3).unwrap();
    }
    match sweep.fit {
        Some(f) => writeln!(
            s,
            "fit: step = {:.4e} s/node * nodes + {:.4e} s, R^2 = {:.4}",
            f.slope, f.intercept, f.r_squared
        )
        .unwrap(),
        None => s.push_str("fit: not enough distinct sizes\n"),
    }
    s
}

pub fn modes_text(m: &ModeComparison) -> String {
    format!(
        "TI step: {:.4} ms\nTD step: {:.4} ms\nTD / TI: {:.3}\n",
        m.ti.step_s * 1e3,
        m.td.step_s * 1e3,
        m.td.step_s / m.ti.step_s
    )
}
