//! Shared fixtures for the integration suites.

use ni_core::catalog;
use ni_core::graph::{Edge, Topology};
use ni_core::network::{ControllerBank, ControllerUnit, NetworkAssembly, PlantBank, SingleLoop};

/// Three cubic-integrator plants (μ = 1, 3, 2) on the path 1-2-3 with the
/// two cubic damped controllers (a,b) = (5,3) and (8,2) on the edges.
pub fn bundled_assembly() -> NetworkAssembly<f64> {
    let topology = Topology::new(3, vec![Edge::new(1, 2), Edge::new(2, 3)]).unwrap();
    assembly_with_topology(topology)
}

pub fn assembly_with_topology(topology: Topology) -> NetworkAssembly<f64> {
    let plants = PlantBank::new(
        [1.0, 3.0, 2.0]
            .into_iter()
            .map(|mu| {
                let e = catalog::make_cubic_integrator(mu).unwrap();
                (e.system, e.storage)
            })
            .collect(),
    )
    .unwrap();
    let controllers = ControllerBank::new(
        [(5.0, 3.0), (8.0, 2.0)]
            .into_iter()
            .map(|(a, b)| {
                let e = catalog::make_cubic_damped_controller(a, b).unwrap();
                ControllerUnit {
                    system: e.system,
                    storage: e.storage,
                    osni_epsilon: e.osni_epsilon,
                    steady_state_gamma: e.steady_state_gamma,
                }
            })
            .collect(),
    )
    .unwrap();
    NetworkAssembly::new(topology, plants, controllers).unwrap()
}

/// Cubic-integrator plant (μ = 1) in positive feedback with controller 1.
pub fn desk_loop() -> SingleLoop<f64> {
    let plant = catalog::make_cubic_integrator(1.0).unwrap();
    let ctrl = catalog::make_cubic_damped_controller(5.0, 3.0).unwrap();
    SingleLoop::new(plant.system, plant.storage, ctrl.system, ctrl.storage).unwrap()
}

pub const BUNDLED_X0: [f64; 5] = [30.0, 2.0, -8.0, 0.0, 0.0];
