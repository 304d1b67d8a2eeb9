use std::fmt::Write as _;
use std::path::Path;

use super::TrajectoryLog;
use crate::error::SimError;

/// Shortest round-trip text of `x`, in exponent form when very small or
/// large.
pub(crate) struct Num(pub f64);

impl std::fmt::Display for Num {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let a = self.0.abs();
        if a != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
            write!(f, "{:e}", self.0)
        } else {
            write!(f, "{}", self.0)
        }
    }
}

/// Column order of the trajectory CSV.
pub const CSV_HEADER: &str = "t,gx,gy,gz,wx,wy,ux,uy,uhx,uhy,vx,vy,psi,V";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    /// One row per sample, [`CSV_HEADER`] columns.
    Csv,
    /// `t,gx,gy,gz` rows followed by initial, desired and final markers.
    SpherePath,
    /// `key=value` lines of the terminal metrics.
    Summary,
}

impl OutputFormat {
    pub fn extension(&self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::SpherePath => "sphere.csv",
            OutputFormat::Summary => "summary.txt",
        }
    }
}

/// Renders `log` in `format`. Empty logs are refused.
pub fn render(log: &TrajectoryLog, format: OutputFormat) -> Result<String, SimError> {
    let (first, last) = match (log.samples.first(), log.samples.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(SimError::EmptyLog),
    };
    let mut out = String::new();
    match format {
        OutputFormat::Csv => {
            out.push_str(CSV_HEADER);
            out.push('\n');
            for s in &log.samples {
                let row = [
                    s.t, s.gamma.x, s.gamma.y, s.gamma.z, s.omega.x, s.omega.y, s.u.x, s.u.y, s.u_hat.x, s.u_hat.y,
                    s.v.x, s.v.y, s.psi, s.lyapunov,
                ];
                let cells: Vec<String> = row.iter().map(|x| Num(*x).to_string()).collect();
                out.push_str(&cells.join(","));
                out.push('\n');
            }
        }
        OutputFormat::SpherePath => {
            out.push_str("t,gx,gy,gz\n");
            for s in &log.samples {
                let _ = writeln!(out, "{},{},{},{}", Num(s.t), Num(s.gamma.x), Num(s.gamma.y), Num(s.gamma.z));
            }
            let gd = log.gamma_d.as_vec();
            let _ = writeln!(out, "# initial,{},{},{}", Num(first.gamma.x), Num(first.gamma.y), Num(first.gamma.z));
            let _ = writeln!(out, "# desired,{},{},{}", Num(gd.x), Num(gd.y), Num(gd.z));
            let _ = writeln!(out, "# final,{},{},{}", Num(last.gamma.x), Num(last.gamma.y), Num(last.gamma.z));
        }
        OutputFormat::Summary => {
            let m = &log.metrics;
            let _ = writeln!(out, "name={}", log.name);
            let _ = writeln!(out, "law={}", log.law);
            let _ = writeln!(out, "motor_dynamics={}", log.motor_dynamics);
            let _ = writeln!(out, "final_error_deg={}", Num(m.final_error_deg));
            match m.settle_time_s {
                Some(t) => {
                    let _ = writeln!(out, "settle_time_s={}", Num(t));
                }
                None => out.push_str("settle_time_s=never\n"),
            }
            let _ = writeln!(out, "path_length_rad={}", Num(m.path_length_rad));
            let _ = writeln!(out, "geodesic_rad={}", Num(m.geodesic_rad));
            let _ = writeln!(out, "efficiency={}", Num(m.efficiency));
            let _ = writeln!(out, "max_vdot={:e}", log.max_lyapunov_rate());
            let _ = writeln!(out, "lyapunov_monotone={}", log.lyapunov_monotone());
        }
    }
    Ok(out)
}

/// Writes `log` to `path`.
pub fn emit(log: &TrajectoryLog, format: OutputFormat, path: impl AsRef<Path>) -> Result<(), SimError> {
    let text = render(log, format)?;
    let path = path.as_ref();
    std::fs::write(path, text).map_err(|source| SimError::Io {
        path: path.to_path_buf(),
        source,
    })
}
