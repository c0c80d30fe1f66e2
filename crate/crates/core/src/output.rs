//! File formats: legacy VTK fields, probe CSV and statistics tables.
//!
//! Floats are written with Rust's shortest round-trip formatting, so every
//! value parses back to the identical `f64`.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use crate::mesh::Mesh;
use crate::oracle::Stats;
use crate::solver::ProbeHistory;

/// VTK legacy ASCII 2.0 unstructured grid with point scalars `temperature`.
///
/// ```text
/// # vtk DataFile Version 2.0
/// fedheat temperature t=<time>
/// ASCII
/// DATASET UNSTRUCTURED_GRID
/// POINTS <n> double
/// <x> <y> <z>               (n lines)
/// CELLS <e> <e + total node refs>
/// <count> <ids...>           (e lines)
/// CELL_TYPES <e>
/// <10 | 12>                  (e lines)
/// POINT_DATA <n>
/// SCALARS temperature double 1
/// LOOKUP_TABLE default
/// <T>                        (n lines)
/// ```
pub fn write_vtk(out: &mut impl Write, mesh: &Mesh, temperature: &[f64], time: f64) -> io::Result<()> {
    assert_eq!(temperature.len(), mesh.node_count(), "one temperature per node");
    writeln!(out, "# vtk DataFile Version 2.0")?;
    writeln!(out, "fedheat temperature t={time:?}")?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {} double", mesh.node_count())?;
    for p in mesh.nodes() {
        writeln!(out, "{:?} {:?} {:?}", p[0], p[1], p[2])?;
    }
    let refs: usize = mesh.elements().iter().map(|e| e.nodes().len() + 1).sum();
    writeln!(out, "CELLS {} {refs}", mesh.elements().len())?;
    for e in mesh.elements() {
        write!(out, "{}", e.nodes().len())?;
        for n in e.nodes() {
            write!(out, " {n}")?;
        }
        writeln!(out)?;
    }
    writeln!(out, "CELL_TYPES {}", mesh.elements().len())?;
    for e in mesh.elements() {
        writeln!(out, "{}", e.kind().vtk_cell_type())?;
    }
    writeln!(out, "POINT_DATA {}", mesh.node_count())?;
    writeln!(out, "SCALARS temperature double 1")?;
    writeln!(out, "LOOKUP_TABLE default")?;
    for t in temperature {
        writeln!(out, "{t:?}")?;
    }
    Ok(())
}

pub fn write_vtk_file(path: &Path, mesh: &Mesh, temperature: &[f64], time: f64) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_vtk(&mut w, mesh, temperature, time)?;
    w.flush()
}

/// Reads back the temperature scalars of a file written by [`write_vtk`].
pub fn parse_vtk_temperature(text: &str) -> Result<Vec<f64>, String> {
    let mut lines = text.lines();
    let count: usize = lines
        .by_ref()
        .find_map(|l| l.strip_prefix("POINT_DATA "))
        .ok_or("no POINT_DATA section")?
        .trim()
        .parse()
        .map_err(|e| format!("bad POINT_DATA count: {e}"))?;
    let mut lines = lines.skip_while(|l| !l.starts_with("LOOKUP_TABLE"));
    lines.next().ok_or("no LOOKUP_TABLE line")?;
    let values: Vec<f64> = lines
        .take(count)
        .map(|l| l.trim().parse::<f64>().map_err(|e| format!("bad scalar `{l}`: {e}")))
        .collect::<Result<_, _>>()?;
    if values.len() != count {
        return Err(format!("expected {count} scalars, found {}", values.len()));
    }
    Ok(values)
}

/// Header `time_s,node_<id>,...`, one row per recorded probe time.
pub fn probe_csv(history: &ProbeHistory) -> String {
    let mut s = String::from("time_s");
    for n in &history.nodes {
        write!(s, ",node_{n}").unwrap();
    }
    s.push('\n');
    for (t, row) in history.times.iter().zip(&history.values) {
        write!(s, "{t:?}").unwrap();
        for v in row {
            write!(s, ",{v:?}").unwrap();
        }
        s.push('\n');
    }
    s
}

pub fn parse_probe_csv(text: &str) -> Result<ProbeHistory, String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty probe file")?;
    let mut cols = header.split(',');
    if cols.next() != Some("time_s") {
        return Err("header must start with time_s".into());
    }
    let nodes = cols
        .map(|c| {
            c.strip_prefix("node_")
                .and_then(|n| n.parse().ok())
                .ok_or_else(|| format!("bad column `{c}`"))
        })
        .collect::<Result<Vec<usize>, _>>()?;
    let mut history = ProbeHistory {
        nodes,
        ..Default::default()
    };
    for (i, line) in lines.enumerate() {
        let vals = line
            .split(',')
            .map(|v| v.parse::<f64>().map_err(|e| format!("row {}: {e}", i + 2)))
            .collect::<Result<Vec<_>, _>>()?;
        if vals.len() != history.nodes.len() + 1 {
            return Err(format!("row {} has {} columns", i + 2, vals.len()));
        }
        history.times.push(vals[0]);
        history.values.push(vals[1..].to_vec());
    }
    Ok(history)
}

/// Aligned plain-text table with columns Min, Max, Median, RMS, Q1, Q3 and an
/// optional trailing error row `E`.
pub fn stats_table_text(rows: &[(&str, Stats)], error: Option<f64>) -> String {
    let mut s = format!("{:<4}", "");
    for h in Stats::HEADERS {
        write!(s, "{:>14}", format!("{h} (°C)")).unwrap();
    }
    s.push('\n');
    for (label, stats) in rows {
        write!(s, "{label:<4}").unwrap();
        for v in stats.values() {
            write!(s, "{v:>14.4}").unwrap();
        }
        s.push('\n');
    }
    if let Some(e) = error {
        writeln!(s, "{:<4}{e:>14.4e}", "E").unwrap();
    }
    s
}

pub fn stats_table_csv(rows: &[(&str, Stats)], error: Option<f64>) -> String {
    let mut s = String::from("row,Min,Max,Median,RMS,Q1,Q3\n");
    for (label, stats) in rows {
        s.push_str(label);
        for v in stats.values() {
            write!(s, ",{v:?}").unwrap();
        }
        s.push('\n');
    }
    if let Some(e) = error {
        writeln!(s, "E,{e:?},,,,,").unwrap();
    }
    s
}
