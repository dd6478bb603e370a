//! Built-in parametric system families with their storage certificates.
//!
//! Every family used in the networked consensus experiments is constructible
//! here by name and parameter list, together with the storage function that
//! certifies its dissipativity class and, where known, the output-strictness
//! and steady-state constants.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::scalar::Real;
use crate::system::{StorageFunction, SystemModel};

/// Family tags, addressable by the same snake_case names from config files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    SingleIntegrator,
    DoubleIntegrator,
    CubicIntegrator,
    CubicDampedController,
    LinearStateSpace,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::SingleIntegrator => "single_integrator",
            Family::DoubleIntegrator => "double_integrator",
            Family::CubicIntegrator => "cubic_integrator",
            Family::CubicDampedController => "cubic_damped_controller",
            Family::LinearStateSpace => "linear_state_space",
        }
    }
}

/// A system together with its storage certificate and any certification
/// constants known for the family.
#[derive(Debug, Clone)]
pub struct CatalogEntry<T: Real> {
    pub family: Family,
    pub system: SystemModel<T>,
    pub storage: StorageFunction<T>,
    /// Output-strictness level ε for OSNI families.
    pub osni_epsilon: Option<T>,
    /// Steady-state constant γ with `ūᵀȳ ≤ −γ|ū|²`, recorded from the
    /// steady-state oracle for families that admit one.
    pub steady_state_gamma: Option<T>,
}

/// `ẋ = u`, `y = x`, `V = 0`.
pub fn make_single_integrator<T: Real>() -> CatalogEntry<T> {
    let label = "single_integrator";
    let system = SystemModel::new(
        label,
        1,
        1,
        Arc::new(|_x: &[T], u: &[T]| vec![u[0]]),
        Arc::new(|x: &[T]| vec![x[0]]),
        Mat::zeros(1, 1),
    )
    .and_then(|s| s.with_output_jacobian(Arc::new(|_x: &[T]| Mat::identity(1))))
    .expect("single integrator construction");
    CatalogEntry {
        family: Family::SingleIntegrator,
        system,
        storage: StorageFunction::zero(label, 1),
        osni_epsilon: None,
        steady_state_gamma: None,
    }
}

/// `ẋ₁ = x₂`, `ẋ₂ = u`, `y = x₁`, `V = ½x₂²`.
pub fn make_double_integrator<T: Real>() -> CatalogEntry<T> {
    let label = "double_integrator";
    let system = SystemModel::new(
        label,
        2,
        1,
        Arc::new(|x: &[T], u: &[T]| vec![x[1], u[0]]),
        Arc::new(|x: &[T]| vec![x[0]]),
        Mat::zeros(1, 1),
    )
    .and_then(|s| {
        s.with_output_jacobian(Arc::new(|_x: &[T]| {
            Mat::from_rows(&[vec![T::one(), T::zero()]])
        }))
    })
    .expect("double integrator construction");
    let half = T::from_f64_lit(0.5);
    let storage = StorageFunction::new(label, 2, Arc::new(move |x: &[T]| half * x[1] * x[1]))
        .expect("double integrator storage")
        .with_gradient(Arc::new(|x: &[T]| vec![T::zero(), x[1]]));
    CatalogEntry {
        family: Family::DoubleIntegrator,
        system,
        storage,
        osni_epsilon: None,
        steady_state_gamma: None,
    }
}

/// `ẋ = μ·u³`, `y = x`, `V = 0`. Rejects `μ ≤ 0`.
pub fn make_cubic_integrator<T: Real>(mu: T) -> Result<CatalogEntry<T>> {
    if !(mu > T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "cubic integrator gain must be > 0, got {mu}"
        )));
    }
    let label = format!("cubic_integrator(mu={mu})");
    let system = SystemModel::new(
        label.clone(),
        1,
        1,
        Arc::new(move |_x: &[T], u: &[T]| vec![mu * u[0] * u[0] * u[0]]),
        Arc::new(|x: &[T]| vec![x[0]]),
        Mat::zeros(1, 1),
    )?
    .with_output_jacobian(Arc::new(|_x: &[T]| Mat::identity(1)))?;
    Ok(CatalogEntry {
        family: Family::CubicIntegrator,
        system,
        storage: StorageFunction::zero(label, 1),
        osni_epsilon: None,
        steady_state_gamma: None,
    })
}

/// `ẋ = −a·x − b·x³ + u`, `y = x − u` (so `h(x) = x`, `D = −1`),
/// `V = (a/2)x² + (b/4)x⁴`.
///
/// The output-strictness level is exactly ε = 1: the dissipation identity
/// `V̇ = (ax + bx³)ẋ = (u − ẋ)ẋ = u·ẏ̃ − |ẏ̃|²` holds pointwise because
/// `h(x) = x`. The steady-state constant γ is computed by the steady-state
/// oracle: solve `a·x̄ + b·x̄³ = ū` over a grid of inputs and record the
/// negated supremum of `ū·ȳ/|ū|²` (which approaches `(a−1)/a` as `ū → 0`).
pub fn make_cubic_damped_controller<T: Real>(a: T, b: T) -> Result<CatalogEntry<T>> {
    if !(a > T::zero()) || !(b > T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "cubic damped controller needs a > 0 and b > 0, got a={a}, b={b}"
        )));
    }
    let label = format!("cubic_damped_controller(a={a},b={b})");
    let system = SystemModel::new(
        label.clone(),
        1,
        1,
        Arc::new(move |x: &[T], u: &[T]| vec![-a * x[0] - b * x[0] * x[0] * x[0] + u[0]]),
        Arc::new(|x: &[T]| vec![x[0]]),
        Mat::from_rows(&[vec![-T::one()]]),
    )?
    .with_output_jacobian(Arc::new(|_x: &[T]| Mat::identity(1)))?;
    let half = T::from_f64_lit(0.5);
    let quarter = T::from_f64_lit(0.25);
    let storage = StorageFunction::new(
        label,
        1,
        Arc::new(move |x: &[T]| {
            let x2 = x[0] * x[0];
            half * a * x2 + quarter * b * x2 * x2
        }),
    )?
    .with_gradient(Arc::new(move |x: &[T]| {
        vec![a * x[0] + b * x[0] * x[0] * x[0]]
    }));

    let mut sup_ratio = T::neg_infinity();
    for ubar in gamma_oracle_grid::<T>() {
        let xbar = solve_cubic_steady_state(a, b, ubar);
        debug_assert!((a * xbar + b * xbar * xbar * xbar - ubar).abs() < T::from_f64_lit(1e-12));
        let ybar = xbar - ubar;
        sup_ratio = sup_ratio.max(ubar * ybar / (ubar * ubar));
    }
    let gamma = -sup_ratio;

    Ok(CatalogEntry {
        family: Family::CubicDampedController,
        system,
        storage,
        osni_epsilon: Some(T::one()),
        steady_state_gamma: Some(gamma),
    })
}

/// `ẋ = Ax + Bu`, `y = Cx + Du` with user-supplied quadratic storage
/// `V = ½xᵀPx`. `D` and `P` must be symmetric; positive semidefiniteness of
/// `V` along with the NI inequality is certified by sampling, not assumed.
pub fn make_linear_state_space<T: Real>(
    a: Mat<T>,
    b: Mat<T>,
    c: Mat<T>,
    d: Mat<T>,
    p: Mat<T>,
) -> Result<CatalogEntry<T>> {
    let n = a.rows();
    let m = b.cols();
    if a.cols() != n || b.rows() != n || c.rows() != m || c.cols() != n || p.rows() != n {
        return Err(Error::InvalidParameter(
            "linear state space matrix dimensions are inconsistent".into(),
        ));
    }
    if !p.is_symmetric() {
        return Err(Error::InvalidParameter(
            "storage matrix P must be symmetric".into(),
        ));
    }
    let label = "linear_state_space";
    let (af, bf) = (a.clone(), b.clone());
    let cf = c.clone();
    let cj = c.clone();
    let system = SystemModel::new(
        label,
        n,
        m,
        Arc::new(move |x: &[T], u: &[T]| {
            let mut dx = af.matvec(x);
            let bu = bf.matvec(u);
            for (d, s) in dx.iter_mut().zip(bu) {
                *d = *d + s;
            }
            dx
        }),
        Arc::new(move |x: &[T]| cf.matvec(x)),
        d,
    )?
    .with_output_jacobian(Arc::new(move |_x: &[T]| cj.clone()))?;
    let pv = p.clone();
    let pg = p;
    let half = T::from_f64_lit(0.5);
    let storage = StorageFunction::new(
        label,
        n,
        Arc::new(move |x: &[T]| half * crate::linalg::dot(&pv.matvec(x), x)),
    )?
    .with_gradient(Arc::new(move |x: &[T]| pg.matvec(x)));
    Ok(CatalogEntry {
        family: Family::LinearStateSpace,
        system,
        storage,
        osni_epsilon: None,
        steady_state_gamma: None,
    })
}

/// Builds a catalog entry from a family name and flat parameter list, the
/// form used by scenario config files. For `linear_state_space` the list is
/// `[n, m, A (n·n), B (n·m), C (m·n), D (m·m), P (n·n)]`, row-major.
pub fn from_name<T: Real>(family: &str, params: &[T]) -> Result<CatalogEntry<T>> {
    let need = |count: usize| -> Result<()> {
        if params.len() != count {
            return Err(Error::InvalidParameter(format!(
                "family `{family}` expects {count} parameters, got {}",
                params.len()
            )));
        }
        Ok(())
    };
    match family {
        "single_integrator" => {
            need(0)?;
            Ok(make_single_integrator())
        }
        "double_integrator" => {
            need(0)?;
            Ok(make_double_integrator())
        }
        "cubic_integrator" => {
            need(1)?;
            make_cubic_integrator(params[0])
        }
        "cubic_damped_controller" => {
            need(2)?;
            make_cubic_damped_controller(params[0], params[1])
        }
        "linear_state_space" => {
            if params.len() < 2 {
                return Err(Error::InvalidParameter(
                    "linear_state_space needs [n, m, A, B, C, D, P]".into(),
                ));
            }
            let n = params[0].as_f64() as usize;
            let m = params[1].as_f64() as usize;
            need(2 + n * n + n * m + m * n + m * m + n * n)?;
            let mut at = params[2..].iter().copied();
            let mut take = |rows: usize, cols: usize| {
                Mat::from_fn(rows, cols, |_, _| at.next().expect("checked length"))
            };
            let a = take(n, n);
            let b = take(n, m);
            let c = take(m, n);
            let d = take(m, m);
            let p = take(n, n);
            make_linear_state_space(a, b, c, d, p)
        }
        other => Err(Error::InvalidParameter(format!(
            "unknown catalog family `{other}`"
        ))),
    }
}

/// Input grid for the γ oracle: signed log-spaced magnitudes from 1e-3 to 8,
/// dense enough near zero to resolve the supremum.
fn gamma_oracle_grid<T: Real>() -> Vec<T> {
    let mut grid = Vec::new();
    let mut mag = 8.0f64;
    while mag >= 1e-3 {
        grid.push(T::from_f64_lit(mag));
        grid.push(T::from_f64_lit(-mag));
        mag /= 2.0;
    }
    grid
}

/// Newton on the strictly monotone map `x ↦ a·x + b·x³` (unique root for any
/// rhs since a, b > 0).
fn solve_cubic_steady_state<T: Real>(a: T, b: T, u: T) -> T {
    let three = T::from_f64_lit(3.0);
    let tol = T::from_f64_lit(1e-15) * (T::one() + u.abs());
    let mut x = u / a;
    for _ in 0..200 {
        let g = a * x + b * x * x * x - u;
        if g.abs() <= tol {
            break;
        }
        x = x - g / (a + three * b * x * x);
    }
    x
}
