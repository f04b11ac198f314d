use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use gridsync::dynamics::Trajectory;
use serde::Serialize;

use crate::CliError;

pub const CSV_HEADER: &str = "t,delta,omega_hat,u_hat,y_tilde,energy";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

/// Writes one row per recorded sample, numbers with 17 significant digits.
pub fn write_trajectory_csv(path: &Path, tr: &Trajectory, energy: &[f64]) -> Result<(), CliError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let mut body = || -> std::io::Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        for (i, e) in energy.iter().enumerate().take(tr.len()) {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                tr.times[i], tr.delta[i], tr.omega_hat[i], tr.u_hat[i], tr.y_tilde[i], e
            )?;
        }
        w.flush()
    };
    body().map_err(io_err(path))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Config(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

/// File name for a run label, keeping only portable characters.
pub fn label_file(dir: &Path, label: &str, ext: &str) -> PathBuf {
    let clean: String = label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect();
    dir.join(format!("{clean}.{ext}"))
}
