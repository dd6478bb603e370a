//! Scenario configuration: a TOML file describing plants, topology,
//! controllers, integrator settings, and the certification plan.

use serde::{Deserialize, Serialize};
use std::sync::Arc;

use ni_core::catalog;
use ni_core::graph::{Edge, Topology};
use ni_core::network::{ControllerBank, ControllerUnit, NetworkAssembly, PlantBank};
use ni_core::sim::{IntegratorConfig, Method};
use ni_core::system::StorageFunction;

/// Parse/validation failure (exit code 2) with a location-bearing message.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// Common input/output dimension of every plant and controller.
    #[serde(default = "default_io_dim")]
    pub io_dim: usize,
    pub topology: TopologySpec,
    pub plants: Vec<UnitSpec>,
    pub controllers: Vec<UnitSpec>,
    pub integrator: IntegratorSpec,
    #[serde(default)]
    pub certification: CertificationSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

fn default_io_dim() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySpec {
    pub node_count: usize,
    /// Directed edges `[initial, terminal]`, 1-based. Writing the smaller
    /// node first is the conventional default orientation; any orientation
    /// yields the same Laplacian and the same plant trajectories.
    pub edges: Vec<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitSpec {
    /// Catalog family name (`cubic_integrator`, `cubic_damped_controller`, …).
    pub family: String,
    #[serde(default)]
    pub parameters: Vec<f64>,
    pub x0: Vec<f64>,
    /// Optional replacement storage certificate
    /// `V(x) = Σ quadratic[j]·x_j² + quartic[j]·x_j⁴`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub storage: Option<StorageSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StorageSpec {
    pub quadratic: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quartic: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSpec {
    /// `rk45_adaptive` or `rk4_fixed`.
    #[serde(default = "default_method")]
    pub method: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(default = "default_tol")]
    pub abs_tol: f64,
    #[serde(default = "default_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_min_step")]
    pub min_step: f64,
    /// Defaults to `t_end / 100` when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_step: Option<f64>,
    pub t_end: f64,
    #[serde(default = "default_stride")]
    pub record_stride: usize,
}

fn default_method() -> String {
    "rk45_adaptive".into()
}

fn default_tol() -> f64 {
    1e-9
}

fn default_min_step() -> f64 {
    1e-12
}

fn default_stride() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificationSpec {
    /// Checks to run and gate on: any of `ni`, `osni`, `assumption_I`,
    /// `assumption_II`, `assumption_V`, `pd_storage`.
    #[serde(default)]
    pub enabled: Vec<String>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Excitation runs per trajectory check.
    #[serde(default = "default_runs")]
    pub runs: usize,
    /// Dissipation slack scale (the default matches the library tolerance).
    #[serde(default = "default_slack")]
    pub dissipation_slack: f64,
    /// Final consensus-metric bound for exit status 0.
    #[serde(default = "default_consensus_threshold")]
    pub consensus_threshold: f64,
}

impl Default for CertificationSpec {
    fn default() -> Self {
        Self {
            enabled: Vec::new(),
            seed: default_seed(),
            runs: default_runs(),
            dissipation_slack: default_slack(),
            consensus_threshold: default_consensus_threshold(),
        }
    }
}

fn default_seed() -> u64 {
    42
}

fn default_runs() -> usize {
    100
}

fn default_slack() -> f64 {
    1e-7
}

fn default_consensus_threshold() -> f64 {
    2e-2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_out_dir")]
    pub dir: String,
}

fn default_out_dir() -> String {
    "out".into()
}

pub const KNOWN_CHECKS: [&str; 6] = [
    "ni",
    "osni",
    "assumption_I",
    "assumption_II",
    "assumption_V",
    "pd_storage",
];

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let scenario: Scenario =
            toml::from_str(text).map_err(|e| ConfigError(format!("config parse error: {e}")))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serializes")
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if self.io_dim == 0 {
            return Err(ConfigError("io_dim must be >= 1".into()));
        }
        if self.plants.len() != self.topology.node_count {
            return Err(ConfigError(format!(
                "{} plants declared for {} topology nodes",
                self.plants.len(),
                self.topology.node_count
            )));
        }
        if self.controllers.len() != self.topology.edges.len() {
            return Err(ConfigError(format!(
                "{} controllers declared for {} edges (one per edge, in edge order)",
                self.controllers.len(),
                self.topology.edges.len()
            )));
        }
        for name in &self.certification.enabled {
            if !KNOWN_CHECKS.contains(&name.as_str()) {
                return Err(ConfigError(format!(
                    "unknown certification check `{name}` (known: {})",
                    KNOWN_CHECKS.join(", ")
                )));
            }
        }
        match self.integrator.method.as_str() {
            "rk45_adaptive" | "rk4_fixed" => {}
            other => {
                return Err(ConfigError(format!(
                    "unknown integrator method `{other}` (use rk45_adaptive or rk4_fixed)"
                )))
            }
        }
        if self.integrator.method == "rk4_fixed" && self.integrator.step.is_none() {
            return Err(ConfigError("rk4_fixed requires a `step`".into()));
        }
        Ok(())
    }

    pub fn integrator_config(&self) -> Result<IntegratorConfig<f64>, ConfigError> {
        let spec = &self.integrator;
        let method = match spec.method.as_str() {
            "rk4_fixed" => Method::Rk4Fixed {
                step: spec.step.expect("validated"),
            },
            _ => Method::Rk45Adaptive {
                abs_tol: spec.abs_tol,
                rel_tol: spec.rel_tol,
                min_step: spec.min_step,
                max_step: spec.max_step.unwrap_or(spec.t_end / 100.0),
            },
        };
        let cfg = IntegratorConfig {
            method,
            t_end: spec.t_end,
            record_stride: spec.record_stride,
        };
        cfg.validate()
            .map_err(|e| ConfigError(format!("integrator config: {e}")))?;
        Ok(cfg)
    }

    /// Builds catalog entries for the plant list, applying storage overrides.
    pub fn build_plants(&self) -> Result<Vec<catalog::CatalogEntry<f64>>, ConfigError> {
        self.plants
            .iter()
            .enumerate()
            .map(|(i, spec)| build_unit(spec, &format!("plant {}", i + 1)))
            .collect()
    }

    pub fn build_controllers(&self) -> Result<Vec<catalog::CatalogEntry<f64>>, ConfigError> {
        self.controllers
            .iter()
            .enumerate()
            .map(|(k, spec)| build_unit(spec, &format!("controller {}", k + 1)))
            .collect()
    }

    pub fn build_topology(&self) -> Result<Topology, ConfigError> {
        let edges = self
            .topology
            .edges
            .iter()
            .map(|&[i, j]| Edge::new(i, j))
            .collect();
        Topology::new(self.topology.node_count, edges)
            .map_err(|e| ConfigError(format!("topology: {e}")))
    }

    /// Assembles the closed loop and the stacked initial state.
    pub fn build_assembly(&self) -> Result<(NetworkAssembly<f64>, Vec<f64>), ConfigError> {
        let topology = self.build_topology()?;
        let plant_entries = self.build_plants()?;
        let controller_entries = self.build_controllers()?;
        for (i, (entry, spec)) in plant_entries.iter().zip(&self.plants).enumerate() {
            check_unit(entry, spec, self.io_dim, &format!("plant {}", i + 1))?;
        }
        for (k, (entry, spec)) in controller_entries.iter().zip(&self.controllers).enumerate() {
            check_unit(entry, spec, self.io_dim, &format!("controller {}", k + 1))?;
        }
        let mut x0 = Vec::new();
        for spec in self.plants.iter().chain(&self.controllers) {
            x0.extend_from_slice(&spec.x0);
        }
        let plants = PlantBank::new(
            plant_entries
                .into_iter()
                .map(|e| (e.system, e.storage))
                .collect(),
        )
        .map_err(|e| ConfigError(e.to_string()))?;
        let controllers = ControllerBank::new(
            controller_entries
                .into_iter()
                .map(|e| ControllerUnit {
                    system: e.system,
                    storage: e.storage,
                    osni_epsilon: e.osni_epsilon,
                    steady_state_gamma: e.steady_state_gamma,
                })
                .collect(),
        )
        .map_err(|e| ConfigError(e.to_string()))?;
        let assembly = NetworkAssembly::new(topology, plants, controllers)
            .map_err(|e| ConfigError(e.to_string()))?;
        if x0.len() != assembly.total_state_dim() {
            return Err(ConfigError(format!(
                "stacked initial state has {} entries, assembly needs {}",
                x0.len(),
                assembly.total_state_dim()
            )));
        }
        Ok((assembly, x0))
    }
}

fn build_unit(spec: &UnitSpec, label: &str) -> Result<catalog::CatalogEntry<f64>, ConfigError> {
    let mut entry = catalog::from_name::<f64>(&spec.family, &spec.parameters)
        .map_err(|e| ConfigError(format!("{label}: {e}")))?;
    if let Some(storage) = &spec.storage {
        entry.storage = build_storage(storage, entry.system.state_dim(), entry.system.label())
            .map_err(|e| ConfigError(format!("{label}: {}", e.0)))?;
    }
    Ok(entry)
}

fn build_storage(
    spec: &StorageSpec,
    state_dim: usize,
    system_ref: &str,
) -> Result<StorageFunction<f64>, ConfigError> {
    if spec.quadratic.len() != state_dim {
        return Err(ConfigError(format!(
            "storage override has {} quadratic coefficients for state dimension {state_dim}",
            spec.quadratic.len()
        )));
    }
    if let Some(q) = &spec.quartic {
        if q.len() != state_dim {
            return Err(ConfigError(format!(
                "storage override has {} quartic coefficients for state dimension {state_dim}",
                q.len()
            )));
        }
    }
    let quad = spec.quadratic.clone();
    let quart = spec.quartic.clone().unwrap_or_else(|| vec![0.0; state_dim]);
    let (qv, rv) = (quad.clone(), quart.clone());
    let value = Arc::new(move |x: &[f64]| {
        x.iter()
            .enumerate()
            .map(|(j, &xj)| qv[j] * xj * xj + rv[j] * xj.powi(4))
            .sum()
    });
    let gradient = Arc::new(move |x: &[f64]| {
        x.iter()
            .enumerate()
            .map(|(j, &xj)| 2.0 * quad[j] * xj + 4.0 * quart[j] * xj.powi(3))
            .collect()
    });
    StorageFunction::new(system_ref, state_dim, value)
        .map(|s| s.with_gradient(gradient))
        .map_err(|e| ConfigError(e.to_string()))
}

fn check_unit(
    entry: &catalog::CatalogEntry<f64>,
    spec: &UnitSpec,
    io_dim: usize,
    label: &str,
) -> Result<(), ConfigError> {
    if entry.system.io_dim() != io_dim {
        return Err(ConfigError(format!(
            "{label}: family `{}` has io dimension {}, scenario declares {io_dim}",
            spec.family,
            entry.system.io_dim()
        )));
    }
    if spec.x0.len() != entry.system.state_dim() {
        return Err(ConfigError(format!(
            "{label}: x0 has {} entries, family `{}` has state dimension {}",
            spec.x0.len(),
            spec.family,
            entry.system.state_dim()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[topology]
node_count = 2
edges = [[1, 2]]

[[plants]]
family = "cubic_integrator"
parameters = [1.0]
x0 = [1.0]

[[plants]]
family = "cubic_integrator"
parameters = [2.0]
x0 = [-1.0]

[[controllers]]
family = "cubic_damped_controller"
parameters = [5.0, 3.0]
x0 = [0.0]

[integrator]
t_end = 10.0
"#;

    #[test]
    fn parses_and_builds_minimal_scenario() {
        let scenario = Scenario::parse(MINIMAL).unwrap();
        let (assembly, x0) = scenario.build_assembly().unwrap();
        assert_eq!(assembly.total_state_dim(), 3);
        assert_eq!(x0, vec![1.0, -1.0, 0.0]);
        let cfg = scenario.integrator_config().unwrap();
        assert_eq!(cfg.t_end, 10.0);
    }

    #[test]
    fn round_trips_through_toml() {
        let scenario = Scenario::parse(MINIMAL).unwrap();
        let dumped = scenario.to_toml();
        let reparsed = Scenario::parse(&dumped).unwrap();
        assert_eq!(scenario, reparsed);
    }

    #[test]
    fn rejects_controller_count_mismatch() {
        let text = MINIMAL.replace(
            "edges = [[1, 2]]",
            "edges = [[1, 2]]\n# a second edge would need a second controller",
        );
        // removing a controller instead
        let broken = text.replace(
            "[[controllers]]\nfamily = \"cubic_damped_controller\"\nparameters = [5.0, 3.0]\nx0 = [0.0]\n",
            "",
        );
        assert!(Scenario::parse(&broken).is_err());
    }

    #[test]
    fn parse_error_names_location() {
        let err = Scenario::parse("io_dim = \"three\"").unwrap_err();
        assert!(err.0.contains("line"), "{}", err.0);
    }

    #[test]
    fn storage_override_applies() {
        let text = MINIMAL.replace(
            "[[controllers]]\nfamily = \"cubic_damped_controller\"\nparameters = [5.0, 3.0]\nx0 = [0.0]",
            "[[controllers]]\nfamily = \"cubic_damped_controller\"\nparameters = [5.0, 3.0]\nx0 = [0.0]\n\n[controllers.storage]\nquadratic = [1.0]",
        );
        let scenario = Scenario::parse(&text).unwrap();
        let controllers = scenario.build_controllers().unwrap();
        // V = x² instead of (5/2)x² + (3/4)x⁴
        assert_eq!(controllers[0].storage.eval(&[2.0]), 4.0);
    }
}
