//! Scenario execution: certification plan, closed-loop simulation, artifact
//! emission, and the exit-status gate.

use std::io::Write;
use std::path::{Path, PathBuf};

use ni_core::certify::{self, CertReport, Tolerances};
use ni_core::network::NetworkAssembly;
use ni_core::sim;

use crate::artifacts;
use crate::scenario::{ConfigError, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Certification plus simulation plus artifacts.
    Full,
    /// Certification checks and report only.
    CertifyOnly,
}

/// Process-level failures, mapped to exit codes by the binary.
#[derive(Debug)]
pub enum RunFailure {
    /// Exit 2: the scenario cannot be parsed or validated.
    Config(ConfigError),
    /// Exit 3: the simulation failed (stiffness, step budget).
    Integration(String),
    /// Exit 3: artifacts could not be written.
    Io(String),
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunFailure::Config(e) => write!(f, "configuration error: {e}"),
            RunFailure::Integration(e) => write!(f, "integration error: {e}"),
            RunFailure::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

/// One certification line: which check, on which subject.
#[derive(Debug, Clone)]
pub struct CheckLine {
    pub subject: String,
    pub report: CertReport<f64>,
}

#[derive(Debug)]
pub struct RunSummary {
    pub reports: Vec<CheckLine>,
    pub consensus_final: Option<f64>,
    pub consensus_threshold: f64,
    pub out_dir: PathBuf,
}

impl RunSummary {
    pub fn certifications_passed(&self) -> bool {
        self.reports.iter().all(|l| l.report.passed())
    }

    pub fn consensus_reached(&self) -> bool {
        match self.consensus_final {
            Some(value) => value < self.consensus_threshold,
            None => true,
        }
    }

    /// Exit-0 condition: every enabled check passed and, for full runs, the
    /// final consensus metric beat the configured threshold.
    pub fn gate_ok(&self) -> bool {
        self.certifications_passed() && self.consensus_reached()
    }

    pub fn failing_lines(&self) -> Vec<String> {
        let mut lines: Vec<String> = self
            .reports
            .iter()
            .filter(|l| !l.report.passed())
            .map(|l| format!("{} # {}", l.report.summary_line(), l.subject))
            .collect();
        if let Some(value) = self.consensus_final {
            if value >= self.consensus_threshold {
                lines.push(format!(
                    "consensus fail metric={value:.6e} threshold={:.6e}",
                    self.consensus_threshold
                ));
            }
        }
        lines
    }
}

pub fn execute(scenario: &Scenario, out_dir: &Path, mode: Mode) -> Result<RunSummary, RunFailure> {
    let (assembly, x0) = scenario.build_assembly().map_err(RunFailure::Config)?;
    let cfg = scenario.integrator_config().map_err(RunFailure::Config)?;
    std::fs::create_dir_all(out_dir).map_err(|e| RunFailure::Io(e.to_string()))?;

    let reports = run_checks(scenario, &assembly);

    let mut consensus_final = None;
    if mode == Mode::Full {
        let traj = sim::integrate_closed_loop(&assembly, &x0, &cfg)
            .map_err(|e| RunFailure::Integration(e.to_string()))?;
        consensus_final = traj
            .consensus_values
            .as_ref()
            .and_then(|c| c.last().copied());
        artifacts::write_trajectory_csv(&out_dir.join("trajectory.csv"), &assembly, &traj)
            .map_err(|e| RunFailure::Io(e.to_string()))?;
        artifacts::write_summary_csv(&out_dir.join("summary.csv"), &traj)
            .map_err(|e| RunFailure::Io(e.to_string()))?;
    }

    let summary = RunSummary {
        reports,
        consensus_final,
        consensus_threshold: scenario.certification.consensus_threshold,
        out_dir: out_dir.to_path_buf(),
    };
    write_report(&out_dir.join("report.txt"), &summary)
        .map_err(|e| RunFailure::Io(e.to_string()))?;
    Ok(summary)
}

fn run_checks(scenario: &Scenario, assembly: &NetworkAssembly<f64>) -> Vec<CheckLine> {
    let cert = &scenario.certification;
    let tol = Tolerances::<f64> {
        dissipation_slack: cert.dissipation_slack,
        ..Default::default()
    };
    // excitation horizon is independent of the closed-loop horizon
    let cert_cfg = sim::IntegratorConfig::default_adaptive(5.0);
    let mut lines = Vec::new();
    let enabled = |name: &str| cert.enabled.iter().any(|e| e == name);

    if enabled("ni") {
        for (i, (plant, storage)) in assembly
            .plants()
            .plants()
            .iter()
            .zip(assembly.plants().storages())
            .enumerate()
        {
            let (signals, x0s) = certify::excitation_batch(plant, cert.runs, cert.seed);
            let report = certify::check_ni_trajectory(
                plant, storage, &signals, &x0s, &cert_cfg, &tol, cert.seed,
            );
            lines.push(CheckLine {
                subject: format!("plant {} `{}`", i + 1, plant.label()),
                report,
            });
        }
    }
    if enabled("osni") {
        for (k, unit) in assembly.controllers().units().iter().enumerate() {
            let (signals, x0s) = certify::excitation_batch(&unit.system, cert.runs, cert.seed);
            let report = certify::check_osni_trajectory(
                &unit.system,
                &unit.storage,
                &signals,
                &x0s,
                &cert_cfg,
                &tol,
                cert.seed,
            );
            lines.push(CheckLine {
                subject: format!("controller {} `{}`", k + 1, unit.system.label()),
                report,
            });
        }
    }
    if enabled("assumption_I") {
        let grid = certify::default_input_grid::<f64>(assembly.io_dim());
        for (i, plant) in assembly.plants().plants().iter().enumerate() {
            let report = certify::check_assumption_i(plant, &grid, &tol, cert.seed);
            lines.push(CheckLine {
                subject: format!("plant {} `{}`", i + 1, plant.label()),
                report,
            });
        }
    }
    if enabled("assumption_II") {
        let grid = certify::default_input_grid::<f64>(assembly.io_dim());
        for (k, unit) in assembly.controllers().units().iter().enumerate() {
            let report = certify::check_assumption_ii(&unit.system, &grid, &tol, cert.seed);
            lines.push(CheckLine {
                subject: format!("controller {} `{}`", k + 1, unit.system.label()),
                report,
            });
        }
    }
    if enabled("assumption_V") {
        let report = certify::check_assumption_v(
            assembly,
            16,
            &sim::IntegratorConfig::default_adaptive(20.0),
            &tol,
            cert.seed,
        );
        lines.push(CheckLine {
            subject: "networked plant".into(),
            report,
        });
    }
    if enabled("pd_storage") {
        let (value, dim) = edge_space_storage(assembly);
        let domain = vec![(-5.0, 5.0); dim];
        let report = certify::check_positive_definite(&value, &domain, 4096, cert.seed);
        lines.push(CheckLine {
            subject: "composite storage in edge coordinates (plant storages enter separately \
                      as certified nonnegative terms)"
                .into(),
            report,
        });
    }
    lines
}

/// The composite storage as a function of the edge-difference outputs and
/// controller states: `Σ V_ck(x_ck) − ŷᵀΠ_c − ½·ŷᵀD_cŷ`. The plant storage
/// sum is nonnegative (certified by the `ni` checks), so positivity of this
/// function makes the full composite storage positive away from the
/// consensus manifold.
fn edge_space_storage(
    assembly: &NetworkAssembly<f64>,
) -> (impl Fn(&[f64]) -> f64 + Sync + '_, usize) {
    let m = assembly.io_dim();
    let hat_dim = assembly.controllers().len() * m;
    let ctrl_dim = assembly.controller_state_dim();
    let value = move |z: &[f64]| {
        let (y_hat, x_c) = z.split_at(hat_dim);
        let mut w = 0.0;
        for (k, unit) in assembly.controllers().units().iter().enumerate() {
            let xk = assembly.controllers().state_of(x_c, k);
            w += unit.storage.eval(xk);
            let pi_k = unit.system.aux_output(xk).expect("dims");
            let y_k = &y_hat[k * m..(k + 1) * m];
            let d_y = unit.system.feedthrough().matvec(y_k);
            for c in 0..m {
                w -= y_k[c] * pi_k[c] + 0.5 * y_k[c] * d_y[c];
            }
        }
        w
    };
    (value, hat_dim + ctrl_dim)
}

fn write_report(path: &Path, summary: &RunSummary) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(
        out,
        "# sampling-based falsification: pass means no violation found at the stated \
         tolerances and sample sizes, not a proof"
    )?;
    for line in &summary.reports {
        writeln!(out, "{} # {}", line.report.summary_line(), line.subject)?;
    }
    if let Some(value) = summary.consensus_final {
        let verdict = if value < summary.consensus_threshold {
            "pass"
        } else {
            "fail"
        };
        writeln!(
            out,
            "consensus {verdict} metric={value:.6e} threshold={:.6e}",
            summary.consensus_threshold
        )?;
    }
    Ok(())
}

/// Checks that a dumped scenario reparses identically; used by the dump
/// subcommand so a written config is guaranteed to round-trip.
pub fn dump_scenario(scenario: &Scenario) -> Result<String, ConfigError> {
    let text = scenario.to_toml();
    let reparsed = Scenario::parse(&text)?;
    if &reparsed != scenario {
        return Err(ConfigError(
            "internal error: dumped scenario does not round-trip".into(),
        ));
    }
    Ok(text)
}
