//! Trajectory integration: classic fixed-step RK4 and adaptive
//! Dormand-Prince 5(4) with an embedded error estimate.

use crate::error::{Error, Result};
use crate::network::{NetworkAssembly, SingleLoop};
use crate::scalar::Real;
use crate::signal::TestSignal;
use crate::system::SystemModel;
use crate::trajectory::Trajectory;

/// Safety net against runaway integrations; generous for every problem in
/// this crate (the stiff network example needs a few thousand steps).
const MAX_STEPS: usize = 20_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method<T> {
    Rk4Fixed {
        step: T,
    },
    Rk45Adaptive {
        abs_tol: T,
        rel_tol: T,
        min_step: T,
        max_step: T,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig<T> {
    pub method: Method<T>,
    pub t_end: T,
    pub record_stride: usize,
}

impl<T: Real> IntegratorConfig<T> {
    /// Default adaptive configuration: `abs_tol = rel_tol = 1e-9`,
    /// `min_step = 1e-12`, `max_step = t_end/100`. Handles both the stiff
    /// start and the slow tail of the cubic consensus runs.
    pub fn default_adaptive(t_end: T) -> Self {
        Self {
            method: Method::Rk45Adaptive {
                abs_tol: T::from_f64_lit(1e-9),
                rel_tol: T::from_f64_lit(1e-9),
                min_step: T::from_f64_lit(1e-12),
                max_step: t_end / T::from_f64_lit(100.0),
            },
            t_end,
            record_stride: 1,
        }
    }

    /// Same grid of accepted steps at a tighter tolerance; used as the
    /// reference oracle for frozen trajectory expectations.
    pub fn reference_oracle(t_end: T) -> Self {
        Self {
            method: Method::Rk45Adaptive {
                abs_tol: T::from_f64_lit(1e-12),
                rel_tol: T::from_f64_lit(1e-12),
                min_step: T::from_f64_lit(1e-14),
                max_step: t_end / T::from_f64_lit(100.0),
            },
            t_end,
            record_stride: 1,
        }
    }

    pub fn fixed(step: T, t_end: T) -> Self {
        Self {
            method: Method::Rk4Fixed { step },
            t_end,
            record_stride: 1,
        }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.record_stride = stride;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_end > T::zero()) {
            return Err(Error::InvalidConfig("t_end must be > 0".into()));
        }
        if self.record_stride == 0 {
            return Err(Error::InvalidConfig("record_stride must be >= 1".into()));
        }
        match self.method {
            Method::Rk4Fixed { step } => {
                if !(step > T::zero()) {
                    return Err(Error::InvalidConfig("fixed step must be > 0".into()));
                }
            }
            Method::Rk45Adaptive {
                abs_tol,
                rel_tol,
                min_step,
                max_step,
            } => {
                if !(abs_tol > T::zero()) || !(rel_tol > T::zero()) {
                    return Err(Error::InvalidConfig("tolerances must be > 0".into()));
                }
                if !(min_step > T::zero()) || min_step > max_step {
                    return Err(Error::InvalidConfig("need 0 < min_step <= max_step".into()));
                }
            }
        }
        Ok(())
    }
}

/// Dormand-Prince 5(4) coefficients.
const DP_C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_B: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const DP_E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

struct Tableau<T> {
    c: [T; 7],
    a: [[T; 6]; 7],
    b: [T; 7],
    e: [T; 7],
}

impl<T: Real> Tableau<T> {
    fn new() -> Self {
        Self {
            c: DP_C.map(T::from_f64_lit),
            a: DP_A.map(|row| row.map(T::from_f64_lit)),
            b: DP_B.map(T::from_f64_lit),
            e: DP_E.map(T::from_f64_lit),
        }
    }
}

/// Drives one integration, invoking `record` at t = 0, at every
/// `record_stride`-th accepted step, and at t_end.
fn drive<T, F, R>(mut rhs: F, x0: &[T], cfg: &IntegratorConfig<T>, mut record: R) -> Result<()>
where
    T: Real,
    F: FnMut(T, &[T]) -> Result<Vec<T>>,
    R: FnMut(T, &[T]) -> Result<()>,
{
    cfg.validate()?;
    let mut t = T::zero();
    let mut x = x0.to_vec();
    record(t, &x)?;
    let mut accepted: usize = 0;

    match cfg.method {
        Method::Rk4Fixed { step } => {
            let mut steps_taken = 0usize;
            while t < cfg.t_end {
                let h = step.min(cfg.t_end - t);
                x = rk4_step(&mut rhs, t, &x, h)?;
                t = t + h;
                accepted += 1;
                steps_taken += 1;
                if steps_taken > MAX_STEPS {
                    return Err(Error::StepBudgetExceeded {
                        time: t.as_f64(),
                        max_steps: MAX_STEPS,
                    });
                }
                if accepted.is_multiple_of(cfg.record_stride) || t >= cfg.t_end {
                    record(t, &x)?;
                }
            }
        }
        Method::Rk45Adaptive {
            abs_tol,
            rel_tol,
            min_step,
            max_step,
        } => {
            let tableau = Tableau::new();
            let f0 = rhs(t, &x)?;
            let mut h = initial_step(&x, &f0, min_step, max_step, cfg.t_end);
            let mut attempts = 0usize;
            while t < cfg.t_end {
                attempts += 1;
                if attempts > MAX_STEPS {
                    return Err(Error::StepBudgetExceeded {
                        time: t.as_f64(),
                        max_steps: MAX_STEPS,
                    });
                }
                let h_trial = h.min(cfg.t_end - t);
                let (x_new, err) = dp_step(&mut rhs, t, &x, h_trial, &tableau, abs_tol, rel_tol)?;
                if err <= T::one() {
                    t = t + h_trial;
                    x = x_new;
                    accepted += 1;
                    if accepted.is_multiple_of(cfg.record_stride) || t >= cfg.t_end {
                        record(t, &x)?;
                    }
                    h = next_step(h_trial, err, min_step, max_step);
                } else {
                    let shrunk = next_step(h_trial, err, min_step, max_step);
                    if shrunk <= min_step && h_trial <= min_step * T::from_f64_lit(1.0 + 1e-9) {
                        return Err(Error::StepUnderflow {
                            time: t.as_f64(),
                            min_step: min_step.as_f64(),
                        });
                    }
                    h = shrunk;
                }
            }
        }
    }
    Ok(())
}

/// Crate-internal driver for callers that record something other than a
/// [`Trajectory`] (the certification module integrates the open networked
/// plant this way).
pub(crate) fn drive_custom<T, F, R>(
    rhs: F,
    x0: &[T],
    cfg: &IntegratorConfig<T>,
    record: R,
) -> Result<()>
where
    T: Real,
    F: FnMut(T, &[T]) -> Result<Vec<T>>,
    R: FnMut(T, &[T]) -> Result<()>,
{
    drive(rhs, x0, cfg, record)
}

fn initial_step<T: Real>(x0: &[T], f0: &[T], min_step: T, max_step: T, t_end: T) -> T {
    let xn = crate::linalg::norm2(x0);
    let fn_ = crate::linalg::norm2(f0);
    let guess = T::from_f64_lit(1e-2) * (T::one() + xn) / (T::one() + fn_);
    guess.min(max_step).min(t_end).max(min_step)
}

fn next_step<T: Real>(h: T, err: T, min_step: T, max_step: T) -> T {
    let safety = T::from_f64_lit(0.9);
    let exponent = T::from_f64_lit(-0.2);
    let factor = if err == T::zero() {
        T::from_f64_lit(5.0)
    } else {
        (safety * err.powf(exponent))
            .max(T::from_f64_lit(0.2))
            .min(T::from_f64_lit(5.0))
    };
    (h * factor).max(min_step).min(max_step)
}

fn rk4_step<T, F>(rhs: &mut F, t: T, x: &[T], h: T) -> Result<Vec<T>>
where
    T: Real,
    F: FnMut(T, &[T]) -> Result<Vec<T>>,
{
    let half = T::from_f64_lit(0.5);
    let sixth = T::from_f64_lit(1.0 / 6.0);
    let two = T::from_f64_lit(2.0);
    let k1 = rhs(t, x)?;
    let k2 = rhs(t + half * h, &crate::linalg::axpy(half * h, &k1, x))?;
    let k3 = rhs(t + half * h, &crate::linalg::axpy(half * h, &k2, x))?;
    let k4 = rhs(t + h, &crate::linalg::axpy(h, &k3, x))?;
    Ok(x.iter()
        .enumerate()
        .map(|(i, &xi)| xi + sixth * h * (k1[i] + two * k2[i] + two * k3[i] + k4[i]))
        .collect())
}

/// One Dormand-Prince attempt; returns the 5th-order solution and the
/// scaled error norm (accept iff ≤ 1).
fn dp_step<T, F>(
    rhs: &mut F,
    t: T,
    x: &[T],
    h: T,
    tb: &Tableau<T>,
    abs_tol: T,
    rel_tol: T,
) -> Result<(Vec<T>, T)>
where
    T: Real,
    F: FnMut(T, &[T]) -> Result<Vec<T>>,
{
    let n = x.len();
    let mut k: Vec<Vec<T>> = Vec::with_capacity(7);
    k.push(rhs(t, x)?);
    for s in 1..7 {
        let mut stage = x.to_vec();
        for (j, kj) in k.iter().enumerate() {
            let w = tb.a[s][j];
            if w == T::zero() {
                continue;
            }
            for i in 0..n {
                stage[i] = stage[i] + h * w * kj[i];
            }
        }
        k.push(rhs(t + tb.c[s] * h, &stage)?);
    }
    let mut x_new = x.to_vec();
    for (j, kj) in k.iter().enumerate() {
        let w = tb.b[j];
        if w == T::zero() {
            continue;
        }
        for i in 0..n {
            x_new[i] = x_new[i] + h * w * kj[i];
        }
    }
    let mut err_sq = T::zero();
    for i in 0..n {
        let mut e = T::zero();
        for (j, kj) in k.iter().enumerate() {
            e = e + tb.e[j] * kj[i];
        }
        e = e * h;
        let scale = abs_tol + rel_tol * x[i].abs().max(x_new[i].abs());
        let r = e / scale;
        err_sq = err_sq + r * r;
    }
    let err = (err_sq / T::from_usize(n).unwrap()).sqrt();
    Ok((x_new, err))
}

/// Integrates a single system under an excitation signal, recording states,
/// inputs, and outputs at the accepted record points.
pub fn integrate_open_loop<T: Real>(
    system: &SystemModel<T>,
    signal: &TestSignal<T>,
    x0: &[T],
    cfg: &IntegratorConfig<T>,
) -> Result<Trajectory<T>> {
    if x0.len() != system.state_dim() {
        return Err(Error::DimensionMismatch {
            context: "initial state",
            expected: system.state_dim(),
            got: x0.len(),
        });
    }
    if signal.io_dim() != system.io_dim() {
        return Err(Error::DimensionMismatch {
            context: "signal io_dim",
            expected: system.io_dim(),
            got: signal.io_dim(),
        });
    }
    let mut traj = Trajectory::with_capacity(128, false, false);
    drive(
        |t, x| system.derivative(x, &signal.eval(t)),
        x0,
        cfg,
        |t, x| {
            let u = signal.eval(t);
            let aux = system.aux_output(x)?;
            let y = system.output(x, &u)?;
            traj.times.push(t);
            traj.states.push(x.to_vec());
            traj.inputs.push(u);
            traj.outputs.push(y);
            traj.aux_outputs.push(aux);
            Ok(())
        },
    )?;
    Ok(traj)
}

/// Anything sim can integrate as an autonomous closed loop while recording
/// storage (and, for networks, consensus) samples.
pub trait ClosedLoopSystem<T: Real> {
    fn state_dim(&self) -> usize;
    fn derivative(&self, x: &[T]) -> Result<Vec<T>>;
    fn record_sample(&self, t: T, x: &[T], out: &mut Trajectory<T>) -> Result<()>;
    fn records_consensus(&self) -> bool;
}

impl<T: Real> ClosedLoopSystem<T> for NetworkAssembly<T> {
    fn state_dim(&self) -> usize {
        self.total_state_dim()
    }

    fn derivative(&self, x: &[T]) -> Result<Vec<T>> {
        self.rhs_stacked(x)
    }

    fn record_sample(&self, t: T, x: &[T], out: &mut Trajectory<T>) -> Result<()> {
        let (x_p, x_c) = self.split_state(x);
        let y_p = self.plant_outputs(x_p)?;
        let u_p = self.plant_inputs(x_p, x_c)?;
        let w = self.composite_storage(x_p, x_c)?;
        let metric = crate::network::consensus_metric(&y_p, self.plants().len(), self.io_dim());
        out.times.push(t);
        out.states.push(x.to_vec());
        out.inputs.push(u_p);
        out.aux_outputs.push(y_p.clone());
        out.outputs.push(y_p);
        out.storage_values
            .as_mut()
            .expect("storage enabled")
            .push(w);
        out.consensus_values
            .as_mut()
            .expect("consensus enabled")
            .push(metric);
        Ok(())
    }

    fn records_consensus(&self) -> bool {
        true
    }
}

impl<T: Real> ClosedLoopSystem<T> for SingleLoop<T> {
    fn state_dim(&self) -> usize {
        self.total_state_dim()
    }

    fn derivative(&self, x: &[T]) -> Result<Vec<T>> {
        self.rhs_stacked(x)
    }

    fn record_sample(&self, t: T, x: &[T], out: &mut Trajectory<T>) -> Result<()> {
        let (x1, x2) = self.split_state(x);
        let y1 = self.plant().aux_output(x1)?;
        let u1 = self.controller().output(x2, &y1)?;
        let w = self.storage(x1, x2)?;
        out.times.push(t);
        out.states.push(x.to_vec());
        out.inputs.push(u1);
        out.aux_outputs.push(y1.clone());
        out.outputs.push(y1);
        out.storage_values
            .as_mut()
            .expect("storage enabled")
            .push(w);
        Ok(())
    }

    fn records_consensus(&self) -> bool {
        false
    }
}

/// Integrates an assembled closed loop, recording the stacked state together
/// with storage-function samples (and the consensus metric for networks).
pub fn integrate_closed_loop<T: Real, S: ClosedLoopSystem<T>>(
    system: &S,
    x0: &[T],
    cfg: &IntegratorConfig<T>,
) -> Result<Trajectory<T>> {
    if x0.len() != system.state_dim() {
        return Err(Error::DimensionMismatch {
            context: "initial state",
            expected: system.state_dim(),
            got: x0.len(),
        });
    }
    let mut traj = Trajectory::with_capacity(128, true, system.records_consensus());
    drive(
        |_t, x| system.derivative(x),
        x0,
        cfg,
        |t, x| system.record_sample(t, x, &mut traj),
    )?;
    Ok(traj)
}
