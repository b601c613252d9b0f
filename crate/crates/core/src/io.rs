//! Trajectory directories: `trajectory.json` plus one little-endian `f64`
//! file per time slice.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::geometry::{TargetInstance, TargetKind};
use crate::grid::{Grid, GridSpec};
use crate::wavemap::{FrameField, Trajectory};

pub const TRAJECTORY_INDEX: &str = "trajectory.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryIndex {
    pub target: TargetKind,
    pub frame_dim: usize,
    pub grid: GridSpec,
    pub dt: f64,
    pub times: Vec<f64>,
    pub slices: Vec<String>,
    pub config_hash: String,
}

fn missing(path: &Path) -> LabError {
    LabError::MissingArtifact(path.display().to_string())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n")?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|_| missing(path))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn save_trajectory(dir: &Path, traj: &Trajectory, config_hash: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let mut names = Vec::with_capacity(traj.len());
    for (j, slice) in traj.slices.iter().enumerate() {
        let name = format!("slice_{j:05}.bin");
        let mut w = BufWriter::new(fs::File::create(dir.join(&name))?);
        for comp in &slice.comps {
            for x in comp {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        w.flush()?;
        names.push(name);
    }
    let index = TrajectoryIndex {
        target: traj.target_kind,
        frame_dim: traj.frame.dim(),
        grid: traj.grid_spec(),
        dt: traj.dt,
        times: traj.times.clone(),
        slices: names,
        config_hash: config_hash.to_string(),
    };
    let path = dir.join(TRAJECTORY_INDEX);
    write_json(&path, &index)?;
    Ok(path)
}

pub fn load_trajectory(dir: &Path) -> Result<(Trajectory, TrajectoryIndex)> {
    let index: TrajectoryIndex = read_json(&dir.join(TRAJECTORY_INDEX))?;
    if index.times.len() != index.slices.len() {
        return Err(LabError::InvalidInput("trajectory index: times and slices differ in length".into()));
    }
    let grid = Grid::from_spec(&index.grid)?;
    let target = TargetInstance::from_kind(index.target, index.frame_dim);
    if target.dim() != index.frame_dim {
        return Err(LabError::InvalidInput(format!(
            "trajectory frame dimension {} does not match target {:?}",
            index.frame_dim, index.target
        )));
    }
    let mut slices = Vec::with_capacity(index.slices.len());
    for name in &index.slices {
        let path = dir.join(name);
        let bytes = fs::read(&path).map_err(|_| missing(&path))?;
        let mut field = FrameField::zeros(&grid, index.frame_dim);
        let expected = field.comps.len() * grid.len() * 8;
        if bytes.len() != expected {
            return Err(LabError::InvalidInput(format!(
                "{}: {} bytes, expected {expected}",
                path.display(),
                bytes.len()
            )));
        }
        let mut chunks = bytes.chunks_exact(8);
        for comp in &mut field.comps {
            for x in comp.iter_mut() {
                let b = chunks.next().expect("length checked");
                *x = f64::from_le_bytes(b.try_into().expect("8 bytes"));
            }
        }
        slices.push(field);
    }
    let traj = Trajectory {
        frame: target.frame().clone(),
        target_kind: index.target,
        grid,
        dt: index.dt,
        times: index.times.clone(),
        slices,
    };
    Ok((traj, index))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavemap::{evolve, make_initial_data, EvolveOptions, InitialDataSpec};

    #[test]
    fn trajectory_round_trip_is_exact() {
        let grid = Grid::cube(2, 16, std::f64::consts::TAU).unwrap();
        let t = TargetInstance::su2();
        let d = make_initial_data(&t, &grid, &InitialDataSpec::default(), 0.05, 3).unwrap();
        let ev = evolve(&d.state, &EvolveOptions::new(0.05, 3)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_trajectory(dir.path(), &ev.trajectory, "abc").unwrap();
        let (back, index) = load_trajectory(dir.path()).unwrap();
        assert_eq!(index.config_hash, "abc");
        assert_eq!(back.times, ev.trajectory.times);
        assert_eq!(back.frame, ev.trajectory.frame);
        for (a, b) in back.slices.iter().zip(&ev.trajectory.slices) {
            assert_eq!(a.comps, b.comps);
        }
    }

    #[test]
    fn missing_directory_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let e = load_trajectory(&dir.path().join("nope")).unwrap_err();
        assert!(matches!(e, LabError::MissingArtifact(_)));
    }
}
