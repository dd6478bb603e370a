//! CSV and report emitters. Values are written with 17 significant digits so
//! reruns of the same scenario produce byte-identical files.

use std::io::Write;
use std::path::Path;

use ni_core::network::NetworkAssembly;
use ni_core::trajectory::Trajectory;

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// Column layout: `t`, plant states `x_p<i>_<j>`, controller states
/// `x_c<k>_<j>`, plant outputs `y_p<i>` (`y_p<i>_<c>` when io_dim > 1),
/// `W_hat`, `consensus`.
pub fn trajectory_header(assembly: &NetworkAssembly<f64>) -> String {
    let mut cols = vec!["t".to_string()];
    for (i, plant) in assembly.plants().plants().iter().enumerate() {
        for j in 1..=plant.state_dim() {
            cols.push(format!("x_p{}_{j}", i + 1));
        }
    }
    for (k, unit) in assembly.controllers().units().iter().enumerate() {
        for j in 1..=unit.system.state_dim() {
            cols.push(format!("x_c{}_{j}", k + 1));
        }
    }
    let m = assembly.io_dim();
    for i in 1..=assembly.plants().len() {
        if m == 1 {
            cols.push(format!("y_p{i}"));
        } else {
            for c in 1..=m {
                cols.push(format!("y_p{i}_{c}"));
            }
        }
    }
    cols.push("W_hat".into());
    cols.push("consensus".into());
    cols.join(",")
}

pub fn write_trajectory_csv(
    path: &Path,
    assembly: &NetworkAssembly<f64>,
    traj: &Trajectory<f64>,
) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{}", trajectory_header(assembly))?;
    let storage = traj.storage_values.as_ref().expect("network run");
    let consensus = traj.consensus_values.as_ref().expect("network run");
    for k in 0..traj.len() {
        let mut row = Vec::with_capacity(2 + traj.states[k].len() + traj.outputs[k].len());
        row.push(fmt(traj.times[k]));
        row.extend(traj.states[k].iter().copied().map(fmt));
        row.extend(traj.outputs[k].iter().copied().map(fmt));
        row.push(fmt(storage[k]));
        row.push(fmt(consensus[k]));
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn write_summary_csv(path: &Path, traj: &Trajectory<f64>) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "t,W_hat,consensus")?;
    let storage = traj.storage_values.as_ref().expect("network run");
    let consensus = traj.consensus_values.as_ref().expect("network run");
    for k in 0..traj.len() {
        writeln!(
            out,
            "{},{},{}",
            fmt(traj.times[k]),
            fmt(storage[k]),
            fmt(consensus[k])
        )?;
    }
    Ok(())
}
