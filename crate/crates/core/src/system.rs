//! Nonlinear state-space systems `ẋ = f(x, u)`, `y = h(x) + D·u` and their
//! storage-function certificates.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::scalar::Real;

/// State derivative map `f(x, u)`.
pub type DynamicsFn<T> = Arc<dyn Fn(&[T], &[T]) -> Vec<T> + Send + Sync>;
/// Auxiliary output map `h(x)`.
pub type OutputFn<T> = Arc<dyn Fn(&[T]) -> Vec<T> + Send + Sync>;
/// Output Jacobian map `∂h/∂x`.
pub type OutputJacobianFn<T> = Arc<dyn Fn(&[T]) -> Mat<T> + Send + Sync>;
/// Scalar storage evaluation `V(x)`.
pub type StorageFn<T> = Arc<dyn Fn(&[T]) -> T + Send + Sync>;
/// Storage gradient `∇V(x)`.
pub type GradientFn<T> = Arc<dyn Fn(&[T]) -> Vec<T> + Send + Sync>;

/// Seed for the construction-time spot checks; fixed so that system
/// construction is deterministic.
const CONSTRUCTION_SEED: u64 = 0x5EED_CAFE;

/// An immutable nonlinear state-space system.
///
/// The feedthrough `D` must be symmetric; construction verifies this exactly
/// and spot-checks the declared dimensions (and, when present, the output
/// Jacobian against central finite differences) at seeded random points.
#[derive(Clone)]
pub struct SystemModel<T: Real> {
    label: String,
    state_dim: usize,
    io_dim: usize,
    dynamics: DynamicsFn<T>,
    output_map: OutputFn<T>,
    feedthrough: Mat<T>,
    output_jacobian: Option<OutputJacobianFn<T>>,
}

impl<T: Real> std::fmt::Debug for SystemModel<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SystemModel")
            .field("label", &self.label)
            .field("state_dim", &self.state_dim)
            .field("io_dim", &self.io_dim)
            .field("has_output_jacobian", &self.output_jacobian.is_some())
            .finish()
    }
}

impl<T: Real> SystemModel<T> {
    pub fn new(
        label: impl Into<String>,
        state_dim: usize,
        io_dim: usize,
        dynamics: DynamicsFn<T>,
        output_map: OutputFn<T>,
        feedthrough: Mat<T>,
    ) -> Result<Self> {
        let label = label.into();
        if state_dim == 0 || io_dim == 0 {
            return Err(Error::InvalidParameter(format!(
                "system `{label}` must have positive state and io dimensions"
            )));
        }
        if feedthrough.rows() != io_dim || feedthrough.cols() != io_dim {
            return Err(Error::DimensionMismatch {
                context: "feedthrough matrix",
                expected: io_dim,
                got: feedthrough.rows(),
            });
        }
        if !feedthrough.is_symmetric() {
            return Err(Error::AsymmetricFeedthrough { label });
        }
        let sys = Self {
            label,
            state_dim,
            io_dim,
            dynamics,
            output_map,
            feedthrough,
            output_jacobian: None,
        };
        sys.spot_check_dimensions()?;
        Ok(sys)
    }

    /// Attaches an analytic output Jacobian, spot-checking it against a
    /// central finite difference of `h` at seeded random states (relative
    /// tolerance 1e-5).
    pub fn with_output_jacobian(mut self, jacobian: OutputJacobianFn<T>) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(CONSTRUCTION_SEED);
        let tol = T::from_f64_lit(1e-5);
        for _ in 0..8 {
            let x: Vec<T> = (0..self.state_dim)
                .map(|_| T::from_f64_lit(rng.gen_range(-1.0..1.0)))
                .collect();
            let jac = jacobian(&x);
            assert_eq!(jac.rows(), self.io_dim, "output Jacobian row count");
            assert_eq!(jac.cols(), self.state_dim, "output Jacobian column count");
            let fd = finite_difference_jacobian(&*self.output_map, &x, self.io_dim);
            for i in 0..self.io_dim {
                for j in 0..self.state_dim {
                    let a = jac[(i, j)];
                    let b = fd[(i, j)];
                    let scale = T::one().max(a.abs());
                    if (a - b).abs() > tol * scale {
                        return Err(Error::JacobianMismatch {
                            label: self.label.clone(),
                            row: i,
                            col: j,
                            rel_err: ((a - b).abs() / scale).as_f64(),
                        });
                    }
                }
            }
        }
        self.output_jacobian = Some(jacobian);
        Ok(self)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn io_dim(&self) -> usize {
        self.io_dim
    }

    pub fn feedthrough(&self) -> &Mat<T> {
        &self.feedthrough
    }

    pub fn has_output_jacobian(&self) -> bool {
        self.output_jacobian.is_some()
    }

    /// State derivative `ẋ = f(x, u)`.
    pub fn derivative(&self, x: &[T], u: &[T]) -> Result<Vec<T>> {
        self.check_dims(x, u)?;
        let dx = (self.dynamics)(x, u);
        assert_eq!(dx.len(), self.state_dim, "dynamics returned wrong length");
        Ok(dx)
    }

    /// Auxiliary output `ỹ = h(x)`.
    pub fn aux_output(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.state_dim {
            return Err(Error::DimensionMismatch {
                context: "state vector",
                expected: self.state_dim,
                got: x.len(),
            });
        }
        let y = (self.output_map)(x);
        assert_eq!(y.len(), self.io_dim, "output map returned wrong length");
        Ok(y)
    }

    /// Full output `y = h(x) + D·u`.
    pub fn output(&self, x: &[T], u: &[T]) -> Result<Vec<T>> {
        self.check_dims(x, u)?;
        let h = self.aux_output(x)?;
        let du = self.feedthrough.matvec(u);
        Ok(h.iter().zip(&du).map(|(&a, &b)| a + b).collect())
    }

    /// Rate of the auxiliary output, `d/dt ỹ = (∂h/∂x)·f(x, u)`.
    ///
    /// Uses the analytic Jacobian when one was attached; otherwise a central
    /// difference of `h` along the direction `f(x, u)` with step
    /// `1e-6·(1 + |x|)`.
    pub fn output_rate(&self, x: &[T], u: &[T]) -> Result<Vec<T>> {
        let v = self.derivative(x, u)?;
        if let Some(jac) = &self.output_jacobian {
            return Ok(jac(x).matvec(&v));
        }
        let speed = linalg::norm2(&v);
        if speed == T::zero() {
            return Ok(vec![T::zero(); self.io_dim]);
        }
        let step = T::from_f64_lit(1e-6) * (T::one() + linalg::norm2(x));
        let dir: Vec<T> = v.iter().map(|&vi| vi / speed).collect();
        let fwd = self.aux_output(&linalg::axpy(step, &dir, x))?;
        let bwd = self.aux_output(&linalg::axpy(-step, &dir, x))?;
        Ok(fwd
            .iter()
            .zip(&bwd)
            .map(|(&a, &b)| speed * (a - b) / (step + step))
            .collect())
    }

    fn check_dims(&self, x: &[T], u: &[T]) -> Result<()> {
        if x.len() != self.state_dim {
            return Err(Error::DimensionMismatch {
                context: "state vector",
                expected: self.state_dim,
                got: x.len(),
            });
        }
        if u.len() != self.io_dim {
            return Err(Error::DimensionMismatch {
                context: "input vector",
                expected: self.io_dim,
                got: u.len(),
            });
        }
        Ok(())
    }

    fn spot_check_dimensions(&self) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(CONSTRUCTION_SEED);
        for _ in 0..3 {
            let x: Vec<T> = (0..self.state_dim)
                .map(|_| T::from_f64_lit(rng.gen_range(-1.0..1.0)))
                .collect();
            let u: Vec<T> = (0..self.io_dim)
                .map(|_| T::from_f64_lit(rng.gen_range(-1.0..1.0)))
                .collect();
            let dx = (self.dynamics)(&x, &u);
            if dx.len() != self.state_dim {
                return Err(Error::DimensionMismatch {
                    context: "dynamics output",
                    expected: self.state_dim,
                    got: dx.len(),
                });
            }
            let h = (self.output_map)(&x);
            if h.len() != self.io_dim {
                return Err(Error::DimensionMismatch {
                    context: "output map result",
                    expected: self.io_dim,
                    got: h.len(),
                });
            }
        }
        Ok(())
    }
}

/// Central finite-difference Jacobian of `h` at `x` (per-coordinate step
/// `1e-6·(1 + |x_j|)`).
pub fn finite_difference_jacobian<T: Real>(
    h: impl Fn(&[T]) -> Vec<T>,
    x: &[T],
    out_dim: usize,
) -> Mat<T> {
    let n = x.len();
    let mut jac = Mat::zeros(out_dim, n);
    let base = T::from_f64_lit(1e-6);
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    for j in 0..n {
        let step = base * (T::one() + x[j].abs());
        xp[j] = x[j] + step;
        xm[j] = x[j] - step;
        let fwd = h(&xp);
        let bwd = h(&xm);
        for i in 0..out_dim {
            jac[(i, j)] = (fwd[i] - bwd[i]) / (step + step);
        }
        xp[j] = x[j];
        xm[j] = x[j];
    }
    jac
}

/// A scalar storage-function certificate `V(x)` tied to a system by label.
///
/// Positive semidefiniteness is certified by sampling (see the certification
/// module); construction only enforces `V(0) = 0`.
#[derive(Clone)]
pub struct StorageFunction<T: Real> {
    value: StorageFn<T>,
    gradient: Option<GradientFn<T>>,
    system_ref: String,
    state_dim: usize,
}

impl<T: Real> std::fmt::Debug for StorageFunction<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StorageFunction")
            .field("system_ref", &self.system_ref)
            .field("state_dim", &self.state_dim)
            .field("has_gradient", &self.gradient.is_some())
            .finish()
    }
}

impl<T: Real> StorageFunction<T> {
    pub fn new(
        system_ref: impl Into<String>,
        state_dim: usize,
        value: StorageFn<T>,
    ) -> Result<Self> {
        let system_ref = system_ref.into();
        let origin = vec![T::zero(); state_dim];
        let v0 = value(&origin);
        if v0.abs() > T::from_f64_lit(1e-12) {
            return Err(Error::StorageNotZeroAtOrigin {
                label: system_ref,
                value: v0.as_f64(),
            });
        }
        Ok(Self {
            value,
            gradient: None,
            system_ref,
            state_dim,
        })
    }

    pub fn with_gradient(mut self, gradient: GradientFn<T>) -> Self {
        self.gradient = Some(gradient);
        self
    }

    pub fn system_ref(&self) -> &str {
        &self.system_ref
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn has_gradient(&self) -> bool {
        self.gradient.is_some()
    }

    pub fn eval(&self, x: &[T]) -> T {
        debug_assert_eq!(x.len(), self.state_dim);
        (self.value)(x)
    }

    /// `∇V(x)`, analytic when available, central finite difference otherwise.
    pub fn gradient_at(&self, x: &[T]) -> Vec<T> {
        if let Some(g) = &self.gradient {
            return g(x);
        }
        let base = T::from_f64_lit(1e-6);
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        (0..x.len())
            .map(|j| {
                let step = base * (T::one() + x[j].abs());
                xp[j] = x[j] + step;
                xm[j] = x[j] - step;
                let d = ((self.value)(&xp) - (self.value)(&xm)) / (step + step);
                xp[j] = x[j];
                xm[j] = x[j];
                d
            })
            .collect()
    }

    /// Storage rate `V̇ = ∇V(x)ᵀ·ẋ` along a state velocity.
    pub fn rate(&self, x: &[T], xdot: &[T]) -> T {
        linalg::dot(&self.gradient_at(x), xdot)
    }

    /// The identically-zero storage function (valid for any system).
    pub fn zero(system_ref: impl Into<String>, state_dim: usize) -> Self {
        Self {
            value: Arc::new(|_: &[T]| T::zero()),
            gradient: Some(Arc::new(move |x: &[T]| vec![T::zero(); x.len()])),
            system_ref: system_ref.into(),
            state_dim,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cubic_plant() -> SystemModel<f64> {
        // ẋ = u³, y = x
        SystemModel::new(
            "plant",
            1,
            1,
            Arc::new(|_x: &[f64], u: &[f64]| vec![u[0].powi(3)]),
            Arc::new(|x: &[f64]| vec![x[0]]),
            Mat::zeros(1, 1),
        )
        .unwrap()
        .with_output_jacobian(Arc::new(|_x: &[f64]| Mat::identity(1)))
        .unwrap()
    }

    fn controller_one() -> SystemModel<f64> {
        // ẋ = -5x - 3x³ + u, y = x - u
        let d = Mat::from_rows(&[vec![-1.0]]);
        SystemModel::new(
            "controller",
            1,
            1,
            Arc::new(|x: &[f64], u: &[f64]| vec![-5.0 * x[0] - 3.0 * x[0].powi(3) + u[0]]),
            Arc::new(|x: &[f64]| vec![x[0]]),
            d,
        )
        .unwrap()
        .with_output_jacobian(Arc::new(|_x: &[f64]| Mat::identity(1)))
        .unwrap()
    }

    #[test]
    fn output_includes_feedthrough() {
        // cubic plant has D = 0, so y = x
        let plant = cubic_plant();
        assert_eq!(plant.output(&[5.0], &[2.0]).unwrap(), vec![5.0]);
        // controller: y = x - u
        let ctrl = controller_one();
        assert_eq!(ctrl.output(&[3.0], &[1.0]).unwrap(), vec![2.0]);
        // origin maps to h(0) = 0
        assert_eq!(ctrl.output(&[0.0], &[0.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn output_rejects_bad_dimensions() {
        let plant = cubic_plant();
        assert!(matches!(
            plant.output(&[1.0, 2.0], &[0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            plant.output(&[1.0], &[]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn output_rate_via_jacobian() {
        // Controller 1 with h(x) = x: ẏ̃ = ẋ = -5·1 - 3·1 + 0 = -8.
        let ctrl = controller_one();
        let rate = ctrl.output_rate(&[1.0], &[0.0]).unwrap();
        assert!((rate[0] + 8.0).abs() < 1e-12);
    }

    #[test]
    fn output_rate_double_integrator() {
        let sys = SystemModel::new(
            "di",
            2,
            1,
            Arc::new(|x: &[f64], u: &[f64]| vec![x[1], u[0]]),
            Arc::new(|x: &[f64]| vec![x[0]]),
            Mat::zeros(1, 1),
        )
        .unwrap();
        // ẏ̃ = ẋ₁ = x₂ = 4, via the finite-difference fallback
        let rate = sys.output_rate(&[0.0, 4.0], &[0.0]).unwrap();
        assert!((rate[0] - 4.0).abs() < 1e-6);
    }

    #[test]
    fn output_rate_zero_at_equilibrium() {
        let ctrl = controller_one();
        // f(0, 0) = 0 ⇒ ẏ̃ = 0
        let rate = ctrl.output_rate(&[0.0], &[0.0]).unwrap();
        assert_eq!(rate, vec![0.0]);
    }

    #[test]
    fn asymmetric_feedthrough_rejected() {
        let d = Mat::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]);
        let r = SystemModel::new(
            "bad",
            1,
            2,
            Arc::new(|_: &[f64], _: &[f64]| vec![0.0]),
            Arc::new(|_: &[f64]| vec![0.0, 0.0]),
            d,
        );
        assert!(matches!(r, Err(Error::AsymmetricFeedthrough { .. })));
    }

    #[test]
    fn wrong_jacobian_rejected() {
        let r = SystemModel::new(
            "bad-jac",
            1,
            1,
            Arc::new(|x: &[f64], _: &[f64]| vec![-x[0]]),
            Arc::new(|x: &[f64]| vec![x[0] * x[0]]),
            Mat::zeros(1, 1),
        )
        .unwrap()
        .with_output_jacobian(Arc::new(|_x: &[f64]| Mat::identity(1)));
        assert!(matches!(r, Err(Error::JacobianMismatch { .. })));
    }

    #[test]
    fn storage_must_vanish_at_origin() {
        let bad = StorageFunction::<f64>::new("s", 1, Arc::new(|x: &[f64]| x[0] + 1.0));
        assert!(matches!(bad, Err(Error::StorageNotZeroAtOrigin { .. })));
    }

    #[test]
    fn storage_gradient_fallback_matches_analytic() {
        let v = StorageFunction::new("s", 1, Arc::new(|x: &[f64]| 2.5 * x[0] * x[0])).unwrap();
        let g = v.gradient_at(&[1.5]);
        assert!((g[0] - 7.5).abs() < 1e-6);
    }
}
