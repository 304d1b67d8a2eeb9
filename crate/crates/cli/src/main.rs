use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use spinaxis::analysis::{hurwitz, linearize_at, phase_portrait, square_grid, Equilibrium, PhasePortrait};
use spinaxis::controllers::{gain_check, Gains, Law};
use spinaxis::dynamics::BodyParams;
use spinaxis::sim::{compare, emit, load_scenario, render, run, OutputFormat, Scenario};
use spinaxis::{SimError, Vec2};

const CONFIG_ERROR: u8 = 2;

#[derive(Parser)]
#[command(name = "spinaxis", version, about = "Spin-axis control of a spinning rigid body")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and write its trajectory files.
    Run {
        config: PathBuf,
        /// Directory for <name>.csv, <name>.sphere.csv and <name>.summary.txt.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// Print the summary only, write nothing.
        #[arg(long)]
        no_files: bool,
    },
    /// Simulate several scenarios sharing start and target and tabulate them.
    Compare {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
        /// Print CSV instead of the aligned table.
        #[arg(long)]
        csv: bool,
    },
    /// Rate response of the damped gyroscope in the non-spinning frame.
    Portrait {
        #[arg(long)]
        kbar: f64,
        #[arg(long)]
        kd: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        ux: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        uy: f64,
        /// Initial conditions per grid side.
        #[arg(long, default_value_t = 5)]
        grid: usize,
        /// Half width of the initial-condition square, rad/s.
        #[arg(long, default_value_t = 1.0)]
        half_width: f64,
        #[arg(long, default_value_t = 2.0)]
        duration: f64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, value_enum, default_value_t = PortraitFormat::Csv)]
        format: PortraitFormat,
        /// Write trajectories here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Spectra of the linearized closed loop at both equilibria.
    Linearize {
        config: PathBuf,
        /// Cover every law instead of the scenario's.
        #[arg(long)]
        all_laws: bool,
        /// Also print the matrices.
        #[arg(long)]
        matrices: bool,
    },
    /// Check gains against each law's stability condition.
    GainsCheck {
        /// Scenario supplying gains and actuator constant.
        config: Option<PathBuf>,
        #[arg(long)]
        kp: Option<f64>,
        #[arg(long)]
        kd: Option<f64>,
        #[arg(long)]
        tau_m: Option<f64>,
        /// Restrict to one law.
        #[arg(long)]
        law: Option<Law>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PortraitFormat {
    Csv,
    Json,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        Failure {
            code: e.exit_code() as u8,
            message: e.to_string(),
        }
    }
}

fn config_error(message: impl Into<String>) -> Failure {
    Failure {
        code: CONFIG_ERROR,
        message: message.into(),
    }
}

// a config that cannot be read is a config problem, not an I/O failure of the run
fn load(path: &Path) -> Result<Scenario, Failure> {
    load_scenario(path).map_err(|e| match e {
        SimError::Io { .. } => config_error(e.to_string()),
        other => other.into(),
    })
}

// a closed pipe (`| head`) ends output quietly
fn stdout(text: &str) {
    use std::io::Write;
    let mut lock = std::io::stdout().lock();
    if let Err(e) = lock.write_all(text.as_bytes()).and_then(|_| lock.flush()) {
        if e.kind() != std::io::ErrorKind::BrokenPipe {
            eprintln!("error: writing output: {e}");
        }
    }
}

fn warn_all(sc: &Scenario) {
    for w in &sc.warnings {
        eprintln!("warning: {}: {w}", sc.name);
    }
}

fn cmd_run(config: &Path, out_dir: &Path, no_files: bool) -> Result<(), Failure> {
    let sc = load(config)?;
    warn_all(&sc);
    let log = run(&sc)?;
    for w in log.warnings.iter().filter(|w| !sc.warnings.contains(w)) {
        eprintln!("warning: {}: {w}", sc.name);
    }
    if !no_files {
        std::fs::create_dir_all(out_dir).map_err(|e| SimError::Io {
            path: out_dir.to_path_buf(),
            source: e,
        })?;
        for f in [OutputFormat::Csv, OutputFormat::SpherePath, OutputFormat::Summary] {
            let path = out_dir.join(format!("{}.{}", log.name, f.extension()));
            emit(&log, f, &path)?;
            eprintln!("wrote {}", path.display());
        }
    }
    stdout(&render(&log, OutputFormat::Summary)?);
    Ok(())
}

fn cmd_compare(configs: &[PathBuf], csv: bool) -> Result<(), Failure> {
    let scenarios = configs.iter().map(|p| load(p)).collect::<Result<Vec<_>, _>>()?;
    scenarios.iter().for_each(warn_all);
    let report = compare(&scenarios)?;
    if csv {
        stdout(&report.to_csv());
    } else {
        stdout(&report.to_table());
    }
    Ok(())
}

fn portrait_csv(p: &PhasePortrait) -> String {
    let mut out = String::from("trajectory,t,wx,wy\n");
    for (i, tr) in p.trajectories.iter().enumerate() {
        for (n, s) in tr.samples.iter().enumerate() {
            let _ = writeln!(out, "{i},{},{},{}", n as f64 * p.dt, s[0], s[1]);
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn cmd_portrait(
    kbar: f64,
    kd: f64,
    u: Vec2,
    grid: usize,
    half_width: f64,
    duration: f64,
    dt: f64,
    format: PortraitFormat,
    out: Option<&Path>,
) -> Result<(), Failure> {
    if grid == 0 || !(dt > 0.0) || !(duration > 0.0) || !(half_width >= 0.0) {
        return Err(config_error("grid must be >= 1 and dt, duration must be > 0"));
    }
    let ics = square_grid(grid, half_width);
    let p = phase_portrait(kbar, kd, &u, &ics, duration, dt).map_err(|e| config_error(e.to_string()))?;
    let text = match format {
        PortraitFormat::Csv => portrait_csv(&p),
        PortraitFormat::Json => serde_json::to_string_pretty(&p).expect("portrait serializes") + "\n",
    };
    eprintln!("steady_state={},{}", p.steady_state[0], p.steady_state[1]);
    match p.lag_angle {
        Some(a) => eprintln!("lag_deg={}", a.to_degrees()),
        None => eprintln!("lag_deg=undefined"),
    }
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| {
            Failure::from(SimError::Io {
                path: path.to_path_buf(),
                source: e,
            })
        })?,
        None => stdout(&text),
    }
    Ok(())
}

fn cmd_linearize(config: &Path, all_laws: bool, matrices: bool) -> Result<(), Failure> {
    let sc = load(config)?;
    warn_all(&sc);
    let laws: Vec<Law> = if all_laws { Law::ALL.to_vec() } else { vec![sc.law] };
    let mut out = String::new();
    for law in laws {
        let report = gain_check(law, &sc.gains, sc.body.tau_m);
        let _ = writeln!(
            out,
            "{law}: k_P = {}, k_D = {} ({})",
            sc.gains.k_p,
            sc.gains.k_d,
            if report.passed { "gains pass" } else { "gains FAIL" }
        );
        for eq in [Equilibrium::Desired, Equilibrium::Antipodal] {
            let lin = linearize_at(law, eq, &sc.reference, &sc.gains, &sc.body);
            let spec = hurwitz(&lin.matrix);
            let label = match eq {
                Equilibrium::Desired => "+gamma_d",
                Equilibrium::Antipodal => "-gamma_d",
            };
            let _ = writeln!(
            out,
                "  {label} {:?} hurwitz={} abscissa={:.6e}",
                lin.kind, spec.is_hurwitz, spec.abscissa
            );
            let mut eig = spec.eigenvalues.clone();
            eig.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
            for z in eig {
                let _ = writeln!(out, "    {:+.6e} {:+.6e}i", z.re, z.im);
            }
            if matrices {
                let _ = writeln!(out, "    coordinates: {}", lin.labels.join(", "));
                for r in 0..lin.matrix.nrows() {
                    let row: Vec<String> = lin.matrix.row(r).iter().map(|x| format!("{x:+.6e}")).collect();
                    let _ = writeln!(out, "    [{}]", row.join(" "));
                }
            }
        }
    }
    stdout(&out);
    Ok(())
}

fn cmd_gains_check(
    config: Option<&Path>,
    kp: Option<f64>,
    kd: Option<f64>,
    tau_m: Option<f64>,
    law: Option<Law>,
) -> Result<(), Failure> {
    let (mut gains, mut tau, scenario_law) = match config {
        Some(path) => {
            let sc = load(path)?;
            (sc.gains, sc.body.tau_m, Some(sc.law))
        }
        None => (Gains::default(), BodyParams::default().tau_m, None),
    };
    gains.k_p = kp.unwrap_or(gains.k_p);
    gains.k_d = kd.unwrap_or(gains.k_d);
    tau = tau_m.unwrap_or(tau);
    if !(tau > 0.0) {
        return Err(config_error(format!("tau_m must be > 0, got {tau}")));
    }
    let laws: Vec<Law> = match law.or(scenario_law) {
        Some(l) => vec![l],
        None => Law::ALL.to_vec(),
    };
    let mut all_pass = true;
    let mut out = String::new();
    for l in laws {
        let r = gain_check(l, &gains, tau);
        all_pass &= r.passed;
        let chain: Vec<String> = r.det_chain.iter().map(|d| format!("{d:.6e}")).collect();
        let _ = writeln!(
            out,
            "{:<18} {}  {}  margin={:+.6e}  minors=[{}]",
            l.name(),
            if r.passed { "PASS" } else { "FAIL" },
            r.condition,
            r.margin,
            chain.join(", ")
        );
    }
    stdout(&out);
    if all_pass {
        Ok(())
    } else {
        Err(config_error("gain condition not met"))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run {
            config,
            out_dir,
            no_files,
        } => cmd_run(config, out_dir, *no_files),
        Command::Compare { configs, csv } => cmd_compare(configs, *csv),
        Command::Portrait {
            kbar,
            kd,
            ux,
            uy,
            grid,
            half_width,
            duration,
            dt,
            format,
            out,
        } => cmd_portrait(*kbar, *kd, Vec2::new(*ux, *uy), *grid, *half_width, *duration, *dt, *format, out.as_deref()),
        Command::Linearize {
            config,
            all_laws,
            matrices,
        } => cmd_linearize(config, *all_laws, *matrices),
        Command::GainsCheck {
            config,
            kp,
            kd,
            tau_m,
            law,
        } => cmd_gains_check(config.as_deref(), *kp, *kd, *tau_m, *law),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(if f.code == 0 { 1 } else { f.code })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn numerical_code_matches_library() {
        let e = SimError::Numerical {
            t: 0.0,
            source: spinaxis::DynamicsError::InvalidStep(0.0),
        };
        assert_eq!(Failure::from(e).code, 3);
    }
}
