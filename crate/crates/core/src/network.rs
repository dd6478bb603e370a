//! Closed-loop composition: plants on graph nodes, controllers on edges,
//! wired in positive feedback through the incidence matrix.
//!
//! The networked plant view stacks the node systems behind `Q ⊗ I_m` /
//! `Qᵀ ⊗ I_m` so each edge controller sees the output difference of its two
//! plants and each plant receives the signed sum of its edge controllers'
//! outputs. Because plants have zero feedthrough the loop is explicit: no
//! algebraic solve is ever needed.

use crate::error::{Error, Result};
use crate::graph::Topology;
use crate::linalg::{self, Mat};
use crate::scalar::Real;
use crate::system::{StorageFunction, SystemModel};

/// Node systems with their storage certificates. Plants must share one io
/// dimension and have zero feedthrough.
#[derive(Debug, Clone)]
pub struct PlantBank<T: Real> {
    plants: Vec<SystemModel<T>>,
    storages: Vec<StorageFunction<T>>,
    io_dim: usize,
    state_offsets: Vec<usize>,
    total_state_dim: usize,
}

impl<T: Real> PlantBank<T> {
    pub fn new(members: Vec<(SystemModel<T>, StorageFunction<T>)>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::Assembly("plant bank is empty".into()));
        }
        let io_dim = members[0].0.io_dim();
        let mut state_offsets = Vec::with_capacity(members.len());
        let mut total = 0usize;
        for (i, (sys, storage)) in members.iter().enumerate() {
            if sys.io_dim() != io_dim {
                return Err(Error::Assembly(format!(
                    "plant {} (`{}`) has io_dim {}, expected {io_dim}",
                    i + 1,
                    sys.label(),
                    sys.io_dim()
                )));
            }
            if !sys.feedthrough().is_zero() {
                return Err(Error::Assembly(format!(
                    "plant {} (`{}`) has nonzero feedthrough; plants must be strictly proper",
                    i + 1,
                    sys.label()
                )));
            }
            if storage.state_dim() != sys.state_dim() {
                return Err(Error::Assembly(format!(
                    "plant {} storage dimension {} does not match state dimension {}",
                    i + 1,
                    storage.state_dim(),
                    sys.state_dim()
                )));
            }
            state_offsets.push(total);
            total += sys.state_dim();
        }
        let (plants, storages) = members.into_iter().unzip();
        Ok(Self {
            plants,
            storages,
            io_dim,
            state_offsets,
            total_state_dim: total,
        })
    }

    pub fn len(&self) -> usize {
        self.plants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plants.is_empty()
    }

    pub fn io_dim(&self) -> usize {
        self.io_dim
    }

    pub fn total_state_dim(&self) -> usize {
        self.total_state_dim
    }

    pub fn plants(&self) -> &[SystemModel<T>] {
        &self.plants
    }

    pub fn storages(&self) -> &[StorageFunction<T>] {
        &self.storages
    }

    pub fn state_of<'a>(&self, stacked: &'a [T], i: usize) -> &'a [T] {
        let start = self.state_offsets[i];
        &stacked[start..start + self.plants[i].state_dim()]
    }
}

/// One edge controller with its storage and certification records.
#[derive(Debug, Clone)]
pub struct ControllerUnit<T: Real> {
    pub system: SystemModel<T>,
    pub storage: StorageFunction<T>,
    pub osni_epsilon: Option<T>,
    pub steady_state_gamma: Option<T>,
}

/// Edge systems; the block feedthrough `D_c = diag{D_c1, …, D_cl}` is
/// symmetric because each member's feedthrough is.
#[derive(Debug, Clone)]
pub struct ControllerBank<T: Real> {
    units: Vec<ControllerUnit<T>>,
    io_dim: usize,
    state_offsets: Vec<usize>,
    total_state_dim: usize,
}

impl<T: Real> ControllerBank<T> {
    pub fn new(units: Vec<ControllerUnit<T>>) -> Result<Self> {
        if units.is_empty() {
            return Err(Error::Assembly("controller bank is empty".into()));
        }
        let io_dim = units[0].system.io_dim();
        let mut state_offsets = Vec::with_capacity(units.len());
        let mut total = 0usize;
        for (k, unit) in units.iter().enumerate() {
            if unit.system.io_dim() != io_dim {
                return Err(Error::Assembly(format!(
                    "controller {} (`{}`) has io_dim {}, expected {io_dim}",
                    k + 1,
                    unit.system.label(),
                    unit.system.io_dim()
                )));
            }
            if unit.storage.state_dim() != unit.system.state_dim() {
                return Err(Error::Assembly(format!(
                    "controller {} storage dimension mismatch",
                    k + 1
                )));
            }
            state_offsets.push(total);
            total += unit.system.state_dim();
        }
        Ok(Self {
            units,
            io_dim,
            state_offsets,
            total_state_dim: total,
        })
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn io_dim(&self) -> usize {
        self.io_dim
    }

    pub fn total_state_dim(&self) -> usize {
        self.total_state_dim
    }

    pub fn units(&self) -> &[ControllerUnit<T>] {
        &self.units
    }

    /// Smallest recorded output-strictness level, when every unit has one.
    pub fn epsilon_min(&self) -> Option<T> {
        self.units
            .iter()
            .map(|u| u.osni_epsilon)
            .try_fold(T::infinity(), |acc, e| e.map(|v| acc.min(v)))
    }

    pub fn state_of<'a>(&self, stacked: &'a [T], k: usize) -> &'a [T] {
        let start = self.state_offsets[k];
        &stacked[start..start + self.units[k].system.state_dim()]
    }
}

/// The closed-loop object: plants on the nodes of a connected topology,
/// one controller per edge, positive feedback through `Q ⊗ I_m`.
#[derive(Debug, Clone)]
pub struct NetworkAssembly<T: Real> {
    topology: Topology,
    plants: PlantBank<T>,
    controllers: ControllerBank<T>,
    q_kron: Mat<T>,
    qt_kron: Mat<T>,
}

impl<T: Real> NetworkAssembly<T> {
    pub fn new(
        topology: Topology,
        plants: PlantBank<T>,
        controllers: ControllerBank<T>,
    ) -> Result<Self> {
        if !topology.is_connected() {
            let node = topology.unreachable_node().unwrap_or(0);
            return Err(Error::Assembly(format!(
                "topology is not connected: node {node} is unreachable from node 1"
            )));
        }
        if plants.len() != topology.node_count() {
            return Err(Error::Assembly(format!(
                "{} plants for {} nodes",
                plants.len(),
                topology.node_count()
            )));
        }
        if controllers.len() != topology.edge_count() {
            return Err(Error::Assembly(format!(
                "{} controllers for {} edges",
                controllers.len(),
                topology.edge_count()
            )));
        }
        if plants.io_dim() != controllers.io_dim() {
            return Err(Error::Assembly(format!(
                "plant io_dim {} differs from controller io_dim {}",
                plants.io_dim(),
                controllers.io_dim()
            )));
        }
        let q = topology.incidence_matrix::<T>();
        let q_kron = q.kron_identity(plants.io_dim());
        let qt_kron = q.transpose().kron_identity(plants.io_dim());
        Ok(Self {
            topology,
            plants,
            controllers,
            q_kron,
            qt_kron,
        })
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn plants(&self) -> &PlantBank<T> {
        &self.plants
    }

    pub fn controllers(&self) -> &ControllerBank<T> {
        &self.controllers
    }

    pub fn io_dim(&self) -> usize {
        self.plants.io_dim()
    }

    pub fn plant_state_dim(&self) -> usize {
        self.plants.total_state_dim()
    }

    pub fn controller_state_dim(&self) -> usize {
        self.controllers.total_state_dim()
    }

    pub fn total_state_dim(&self) -> usize {
        self.plant_state_dim() + self.controller_state_dim()
    }

    /// Splits a stacked state into (plant states, controller states).
    pub fn split_state<'a>(&self, x: &'a [T]) -> (&'a [T], &'a [T]) {
        x.split_at(self.plant_state_dim())
    }

    /// Stacked plant outputs `Y_p = [h_p1(x_p1); …; h_pN(x_pN)]`.
    pub fn plant_outputs(&self, x_p: &[T]) -> Result<Vec<T>> {
        let mut y = Vec::with_capacity(self.plants.len() * self.io_dim());
        for (i, plant) in self.plants.plants().iter().enumerate() {
            y.extend(plant.aux_output(self.plants.state_of(x_p, i))?);
        }
        Ok(y)
    }

    /// Networked plant output `Ŷ_p = (Q ⊗ I_m)·Y_p`: per-edge output
    /// differences.
    pub fn hat_output(&self, x_p: &[T]) -> Result<Vec<T>> {
        Ok(self.q_kron.matvec(&self.plant_outputs(x_p)?))
    }

    /// Stacked controller auxiliary outputs `Π_c = [h_c1; …; h_cl]`.
    pub fn controller_aux(&self, x_c: &[T]) -> Result<Vec<T>> {
        let mut pi = Vec::with_capacity(self.controllers.len() * self.io_dim());
        for (k, unit) in self.controllers.units().iter().enumerate() {
            pi.extend(unit.system.aux_output(self.controllers.state_of(x_c, k))?);
        }
        Ok(pi)
    }

    /// Stacked controller outputs `Y_c = Π_c + D_c·U_c`.
    pub fn controller_outputs(&self, x_c: &[T], u_c: &[T]) -> Result<Vec<T>> {
        let m = self.io_dim();
        let mut y = Vec::with_capacity(self.controllers.len() * m);
        for (k, unit) in self.controllers.units().iter().enumerate() {
            y.extend(
                unit.system
                    .output(self.controllers.state_of(x_c, k), &u_c[k * m..(k + 1) * m])?,
            );
        }
        Ok(y)
    }

    /// Plant derivatives for the open networked-plant view: input `Û_p`
    /// enters through `U_p = (Qᵀ ⊗ I_m)·Û_p`. Used to certify the
    /// steady-state sign condition of the networked plant in isolation.
    pub fn networked_plant_rhs(&self, x_p: &[T], u_hat: &[T]) -> Result<Vec<T>> {
        if u_hat.len() != self.controllers.len() * self.io_dim() {
            return Err(Error::DimensionMismatch {
                context: "networked plant input",
                expected: self.controllers.len() * self.io_dim(),
                got: u_hat.len(),
            });
        }
        let u_p = self.qt_kron.matvec(u_hat);
        self.plant_derivatives(x_p, &u_p)
    }

    /// One evaluation of the closed loop:
    /// `Y_p → U_c = (Q⊗I)Y_p → Y_c = Π_c + D_c U_c → U_p = (Qᵀ⊗I)Y_c`,
    /// then the stacked plant and controller derivatives.
    pub fn closed_loop_rhs(&self, x_p: &[T], x_c: &[T]) -> Result<(Vec<T>, Vec<T>)> {
        let m = self.io_dim();
        let y_p = self.plant_outputs(x_p)?;
        let u_c = self.q_kron.matvec(&y_p);
        let y_c = self.controller_outputs(x_c, &u_c)?;
        let u_p = self.qt_kron.matvec(&y_c);
        let dx_p = self.plant_derivatives(x_p, &u_p)?;
        let mut dx_c = Vec::with_capacity(self.controller_state_dim());
        for (k, unit) in self.controllers.units().iter().enumerate() {
            dx_c.extend(
                unit.system
                    .derivative(self.controllers.state_of(x_c, k), &u_c[k * m..(k + 1) * m])?,
            );
        }
        Ok((dx_p, dx_c))
    }

    /// Closed-loop derivative of the full stacked state (plants first).
    pub fn rhs_stacked(&self, x: &[T]) -> Result<Vec<T>> {
        let (x_p, x_c) = self.split_state(x);
        let (mut dx_p, dx_c) = self.closed_loop_rhs(x_p, x_c)?;
        dx_p.extend(dx_c);
        Ok(dx_p)
    }

    /// Plant inputs `U_p` realised by the protocol at the given state.
    pub fn plant_inputs(&self, x_p: &[T], x_c: &[T]) -> Result<Vec<T>> {
        let y_p = self.plant_outputs(x_p)?;
        let u_c = self.q_kron.matvec(&y_p);
        let y_c = self.controller_outputs(x_c, &u_c)?;
        Ok(self.qt_kron.matvec(&y_c))
    }

    /// Composite storage
    /// `Ŵ = Σ V_pi + Σ V_ck − Ŷ_pᵀΠ_c − ½·Ŷ_pᵀ D_c Ŷ_p`.
    pub fn composite_storage(&self, x_p: &[T], x_c: &[T]) -> Result<T> {
        let m = self.io_dim();
        let mut w = T::zero();
        for (i, storage) in self.plants.storages().iter().enumerate() {
            w = w + storage.eval(self.plants.state_of(x_p, i));
        }
        for (k, unit) in self.controllers.units().iter().enumerate() {
            w = w + unit.storage.eval(self.controllers.state_of(x_c, k));
        }
        let y_hat = self.hat_output(x_p)?;
        let pi = self.controller_aux(x_c)?;
        w = w - linalg::dot(&y_hat, &pi);
        let half = T::from_f64_lit(0.5);
        for (k, unit) in self.controllers.units().iter().enumerate() {
            let block = &y_hat[k * m..(k + 1) * m];
            let d_block = unit.system.feedthrough().matvec(block);
            w = w - half * linalg::dot(block, &d_block);
        }
        Ok(w)
    }

    /// Maximum pairwise plant-output disagreement at the given plant state.
    pub fn consensus_metric_at(&self, x_p: &[T]) -> Result<T> {
        let y_p = self.plant_outputs(x_p)?;
        Ok(consensus_metric(&y_p, self.plants.len(), self.io_dim()))
    }

    fn plant_derivatives(&self, x_p: &[T], u_p: &[T]) -> Result<Vec<T>> {
        let m = self.io_dim();
        let mut dx = Vec::with_capacity(self.plant_state_dim());
        for (i, plant) in self.plants.plants().iter().enumerate() {
            dx.extend(plant.derivative(self.plants.state_of(x_p, i), &u_p[i * m..(i + 1) * m])?);
        }
        Ok(dx)
    }
}

/// Maximum over all node pairs of the Euclidean distance between their
/// output blocks; zero exactly on the consensus manifold.
pub fn consensus_metric<T: Real>(y_p: &[T], node_count: usize, io_dim: usize) -> T {
    debug_assert_eq!(y_p.len(), node_count * io_dim);
    let mut worst = T::zero();
    for i in 0..node_count {
        for j in i + 1..node_count {
            let a = &y_p[i * io_dim..(i + 1) * io_dim];
            let b = &y_p[j * io_dim..(j + 1) * io_dim];
            worst = worst.max(linalg::norm2(&linalg::sub(a, b)));
        }
    }
    worst
}

/// A single positive-feedback loop: strictly proper plant `H₁` against a
/// controller `H₂` with (symmetric) feedthrough `D₂`; `u₁ = y₂`, `u₂ = y₁`.
#[derive(Debug, Clone)]
pub struct SingleLoop<T: Real> {
    plant: SystemModel<T>,
    plant_storage: StorageFunction<T>,
    controller: SystemModel<T>,
    controller_storage: StorageFunction<T>,
}

impl<T: Real> SingleLoop<T> {
    pub fn new(
        plant: SystemModel<T>,
        plant_storage: StorageFunction<T>,
        controller: SystemModel<T>,
        controller_storage: StorageFunction<T>,
    ) -> Result<Self> {
        if plant.io_dim() != controller.io_dim() {
            return Err(Error::Assembly(format!(
                "loop io mismatch: plant {} vs controller {}",
                plant.io_dim(),
                controller.io_dim()
            )));
        }
        if !plant.feedthrough().is_zero() {
            return Err(Error::Assembly(
                "plant side of a single loop must have zero feedthrough".into(),
            ));
        }
        if plant_storage.state_dim() != plant.state_dim()
            || controller_storage.state_dim() != controller.state_dim()
        {
            return Err(Error::Assembly("storage dimension mismatch".into()));
        }
        Ok(Self {
            plant,
            plant_storage,
            controller,
            controller_storage,
        })
    }

    pub fn plant(&self) -> &SystemModel<T> {
        &self.plant
    }

    pub fn controller(&self) -> &SystemModel<T> {
        &self.controller
    }

    pub fn plant_state_dim(&self) -> usize {
        self.plant.state_dim()
    }

    pub fn total_state_dim(&self) -> usize {
        self.plant.state_dim() + self.controller.state_dim()
    }

    pub fn split_state<'a>(&self, x: &'a [T]) -> (&'a [T], &'a [T]) {
        x.split_at(self.plant.state_dim())
    }

    /// `y₁ = h₁(x₁)`, `u₂ = y₁`, `y₂ = h₂(x₂) + D₂u₂`, `u₁ = y₂`.
    pub fn rhs(&self, x1: &[T], x2: &[T]) -> Result<(Vec<T>, Vec<T>)> {
        let y1 = self.plant.aux_output(x1)?;
        let y2 = self.controller.output(x2, &y1)?;
        let dx1 = self.plant.derivative(x1, &y2)?;
        let dx2 = self.controller.derivative(x2, &y1)?;
        Ok((dx1, dx2))
    }

    pub fn rhs_stacked(&self, x: &[T]) -> Result<Vec<T>> {
        let (x1, x2) = self.split_state(x);
        let (mut dx1, dx2) = self.rhs(x1, x2)?;
        dx1.extend(dx2);
        Ok(dx1)
    }

    /// `W = V₁ + V₂ − h₁ᵀh₂ − ½·h₁ᵀD₂h₁`.
    pub fn storage(&self, x1: &[T], x2: &[T]) -> Result<T> {
        let h1 = self.plant.aux_output(x1)?;
        let h2 = self.controller.aux_output(x2)?;
        let d2h1 = self.controller.feedthrough().matvec(&h1);
        let half = T::from_f64_lit(0.5);
        Ok(
            self.plant_storage.eval(x1) + self.controller_storage.eval(x2)
                - linalg::dot(&h1, &h2)
                - half * linalg::dot(&h1, &d2h1),
        )
    }
}
