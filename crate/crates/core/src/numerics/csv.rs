//! Plot-ready CSV dumps with 17 significant digits.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::numerics::{FdSolution, Trajectory};
use crate::Result;

fn write_columns(path: &Path, header: &str, a: &[f64], b: &[f64]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{header}")?;
    for (x, y) in a.iter().zip(b) {
        writeln!(out, "{x:.16e},{y:.16e}")?;
    }
    out.flush()?;
    Ok(())
}

/// Writes `t,h` rows.
pub fn write_trajectory_csv(path: impl AsRef<Path>, traj: &Trajectory) -> Result<()> {
    write_columns(path.as_ref(), "t,h", &traj.times, &traj.values)
}

/// Writes `z,phi` rows.
pub fn write_profile_csv(path: impl AsRef<Path>, sol: &FdSolution) -> Result<()> {
    write_columns(path.as_ref(), "z,phi", &sol.z, &sol.phi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trajectory_dump_keeps_full_precision() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.csv");
        let traj = Trajectory { times: vec![0.0, 0.1], values: vec![0.0, 1.0 / 3.0] };
        write_trajectory_csv(&path, &traj).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,h"));
        lines.next();
        let row: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(row, vec![0.1, 1.0 / 3.0]);
    }
}
