//! Sampling-based certification of dissipativity properties.
//!
//! Every check here is falsification, not proof: a `pass` verdict means no
//! violation was found at the stated tolerances and sample sizes, and every
//! `fail` verdict carries a concrete witness that reproduces the violation
//! when re-evaluated. Batches are embarrassingly parallel; results merge by
//! deterministic reduction (minimum for estimates, first-by-index for
//! witnesses), so reports depend only on the seed.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::Result;
use crate::linalg::{self};
use crate::network::NetworkAssembly;
use crate::scalar::Real;
use crate::signal::TestSignal;
use crate::sim::{self, IntegratorConfig};
use crate::system::{finite_difference_jacobian, StorageFunction, SystemModel};

/// Which hypothesis a report certifies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Property {
    Ni,
    Osni,
    AssumptionI,
    AssumptionII,
    AssumptionIiiIv,
    AssumptionV,
    PdStorage,
}

impl Property {
    pub fn name(self) -> &'static str {
        match self {
            Property::Ni => "ni",
            Property::Osni => "osni",
            Property::AssumptionI => "assumption_I",
            Property::AssumptionII => "assumption_II",
            Property::AssumptionIiiIv => "assumption_III_IV",
            Property::AssumptionV => "assumption_V",
            Property::PdStorage => "pd_storage",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

/// A failing sample: re-evaluating the stored state/input reproduces the
/// violation `lhs > rhs` with the reported margin.
#[derive(Debug, Clone)]
pub struct FailWitness<T> {
    pub run_index: usize,
    pub time: T,
    pub state: Vec<T>,
    pub input: Vec<T>,
    pub lhs: T,
    pub rhs: T,
    pub margin: T,
}

#[derive(Debug, Clone)]
pub struct CertReport<T> {
    pub property: Property,
    pub verdict: Verdict,
    pub witness: Option<FailWitness<T>>,
    pub estimate: Option<T>,
    pub samples_used: usize,
    pub seed: u64,
    pub note: String,
}

impl<T: Real> CertReport<T> {
    fn pass(property: Property, estimate: Option<T>, samples: usize, seed: u64) -> Self {
        Self {
            property,
            verdict: Verdict::Pass,
            witness: None,
            estimate,
            samples_used: samples,
            seed,
            note: "no violation found at the stated tolerances and sample sizes \
                   (sampling-based falsification, not proof)"
                .into(),
        }
    }

    fn fail(
        property: Property,
        witness: FailWitness<T>,
        estimate: Option<T>,
        samples: usize,
        seed: u64,
        note: impl Into<String>,
    ) -> Self {
        Self {
            property,
            verdict: Verdict::Fail,
            witness: Some(witness),
            estimate,
            samples_used: samples,
            seed,
            note: note.into(),
        }
    }

    fn inconclusive(
        property: Property,
        samples: usize,
        seed: u64,
        note: impl Into<String>,
    ) -> Self {
        Self {
            property,
            verdict: Verdict::Inconclusive,
            witness: None,
            estimate: None,
            samples_used: samples,
            seed,
            note: note.into(),
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    /// The one-line report format: `<property> <verdict> <estimate|witness> seed=<n>`.
    pub fn summary_line(&self) -> String {
        let middle = if let Some(w) = &self.witness {
            format!(
                "witness=t:{:.6e},x:[{}],u:[{}],margin:{:.6e}",
                w.time.as_f64(),
                join(&w.state),
                join(&w.input),
                w.margin.as_f64()
            )
        } else if let Some(e) = self.estimate {
            format!("estimate={:.6e}", e.as_f64())
        } else {
            "-".into()
        };
        format!(
            "{} {} {} seed={}",
            self.property.name(),
            self.verdict.name(),
            middle,
            self.seed
        )
    }
}

impl<T: Real> std::fmt::Display for CertReport<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.summary_line())
    }
}

fn join<T: Real>(v: &[T]) -> String {
    v.iter()
        .map(|x| format!("{:.6e}", x.as_f64()))
        .collect::<Vec<_>>()
        .join(",")
}

/// Default tolerances; every field is overridable per run.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances<T> {
    /// Slack scale for the dissipation inequality: a violation must exceed
    /// `dissipation_slack · (1 + |uᵀẏ̃|)`.
    pub dissipation_slack: T,
    /// Minimum admissible output-strictness estimate.
    pub epsilon_floor: T,
    /// Minimum admissible steady-state constant.
    pub gamma_floor: T,
    /// Residual bound for accepted steady states.
    pub root_residual: T,
    /// Samples with `|ẏ̃|²` at or below this are excluded from ε̂.
    pub rate_floor: T,
    /// Allowed negativity of `ūᵀȳ` in the steady-state sign condition.
    pub steady_sign_slack: T,
    /// Allowed negativity of `Û_pᵀŶ_p` for settled networked-plant runs.
    pub network_sign_slack: T,
    /// Total-variation bound declaring a networked-plant output settled.
    pub settle_total_variation: T,
}

impl<T: Real> Default for Tolerances<T> {
    fn default() -> Self {
        Self {
            dissipation_slack: T::from_f64_lit(1e-7),
            epsilon_floor: T::from_f64_lit(0.01),
            gamma_floor: T::from_f64_lit(0.01),
            root_residual: T::from_f64_lit(1e-10),
            rate_floor: T::from_f64_lit(1e-10),
            steady_sign_slack: T::from_f64_lit(1e-10),
            network_sign_slack: T::from_f64_lit(1e-8),
            settle_total_variation: T::from_f64_lit(1e-6),
        }
    }
}

/// `V̇ − uᵀẏ̃` at a single point (negative or zero for an NI pair).
pub fn ni_residual<T: Real>(
    system: &SystemModel<T>,
    storage: &StorageFunction<T>,
    x: &[T],
    u: &[T],
) -> Result<(T, T)> {
    let xdot = system.derivative(x, u)?;
    let vdot = storage.rate(x, &xdot);
    let ydot = system.output_rate(x, u)?;
    Ok((vdot, linalg::dot(u, &ydot)))
}

/// `(uᵀẏ̃ − V̇) / |ẏ̃|²` when the output rate is above the exclusion floor.
pub fn osni_ratio<T: Real>(
    system: &SystemModel<T>,
    storage: &StorageFunction<T>,
    x: &[T],
    u: &[T],
    rate_floor: T,
) -> Result<Option<T>> {
    let xdot = system.derivative(x, u)?;
    let vdot = storage.rate(x, &xdot);
    let ydot = system.output_rate(x, u)?;
    let ydot_sq = linalg::dot(&ydot, &ydot);
    if ydot_sq <= rate_floor {
        return Ok(None);
    }
    Ok(Some((linalg::dot(u, &ydot) - vdot) / ydot_sq))
}

/// A seeded batch of excitation signals and initial states, mixing all four
/// signal kinds with log-uniform amplitudes.
pub fn excitation_batch<T: Real>(
    system: &SystemModel<T>,
    count: usize,
    seed: u64,
) -> (Vec<TestSignal<T>>, Vec<Vec<T>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = system.io_dim();
    let mut signals = Vec::with_capacity(count);
    let mut x0s = Vec::with_capacity(count);
    for r in 0..count {
        let amplitude = log_uniform(&mut rng, 0.5, 8.0);
        let frequency = log_uniform(&mut rng, 0.05, 2.0);
        let offset = rng.gen_range(-1.0..1.0);
        let sub_seed: u64 = rng.gen();
        let signal = match r % 4 {
            0 => TestSignal::constant(m, T::from_f64_lit(amplitude + offset)),
            1 => TestSignal::step(
                m,
                T::from_f64_lit(amplitude),
                T::from_f64_lit(1.0 / frequency),
                T::from_f64_lit(offset),
            )
            .expect("valid step"),
            2 => TestSignal::sinusoid(
                m,
                T::from_f64_lit(amplitude),
                T::from_f64_lit(frequency),
                T::from_f64_lit(offset),
            )
            .expect("valid sinusoid"),
            _ => TestSignal::smoothed_random(
                m,
                T::from_f64_lit(amplitude),
                T::from_f64_lit(frequency),
                T::from_f64_lit(offset),
                sub_seed,
            )
            .expect("valid smoothed random"),
        };
        signals.push(signal);
        x0s.push(
            (0..system.state_dim())
                .map(|_| T::from_f64_lit(rng.gen_range(-2.0..2.0)))
                .collect(),
        );
    }
    (signals, x0s)
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

struct TrajectoryScanOutcome<T> {
    violation: Option<FailWitness<T>>,
    min_ratio: Option<(T, FailWitness<T>)>,
    samples: usize,
    excited_samples: usize,
    integration_failed: bool,
}

fn scan_run<T: Real>(
    system: &SystemModel<T>,
    storage: &StorageFunction<T>,
    signal: &TestSignal<T>,
    x0: &[T],
    cfg: &IntegratorConfig<T>,
    tol: &Tolerances<T>,
    run_index: usize,
) -> TrajectoryScanOutcome<T> {
    let traj = match sim::integrate_open_loop(system, signal, x0, cfg) {
        Ok(t) => t,
        Err(_) => {
            return TrajectoryScanOutcome {
                violation: None,
                min_ratio: None,
                samples: 0,
                excited_samples: 0,
                integration_failed: true,
            }
        }
    };
    let mut violation = None;
    let mut min_ratio: Option<(T, FailWitness<T>)> = None;
    let mut excited = 0usize;
    for k in 0..traj.len() {
        let x = &traj.states[k];
        let u = &traj.inputs[k];
        let (vdot, supply) = ni_residual(system, storage, x, u).expect("dims fixed by trajectory");
        let slack_allow = tol.dissipation_slack * (T::one() + supply.abs());
        if violation.is_none() && vdot > supply + slack_allow {
            violation = Some(FailWitness {
                run_index,
                time: traj.times[k],
                state: x.clone(),
                input: u.clone(),
                lhs: vdot,
                rhs: supply + slack_allow,
                margin: vdot - (supply + slack_allow),
            });
        }
        if let Some(ratio) =
            osni_ratio(system, storage, x, u, tol.rate_floor).expect("dims fixed by trajectory")
        {
            excited += 1;
            let better = match &min_ratio {
                Some((best, _)) => ratio < *best,
                None => true,
            };
            if better {
                min_ratio = Some((
                    ratio,
                    FailWitness {
                        run_index,
                        time: traj.times[k],
                        state: x.clone(),
                        input: u.clone(),
                        lhs: ratio,
                        rhs: tol.epsilon_floor,
                        margin: tol.epsilon_floor - ratio,
                    },
                ));
            }
        }
    }
    TrajectoryScanOutcome {
        violation,
        min_ratio,
        samples: traj.len(),
        excited_samples: excited,
        integration_failed: false,
    }
}

fn scan_batch<T: Real>(
    system: &SystemModel<T>,
    storage: &StorageFunction<T>,
    signals: &[TestSignal<T>],
    x0s: &[Vec<T>],
    cfg: &IntegratorConfig<T>,
    tol: &Tolerances<T>,
) -> Vec<TrajectoryScanOutcome<T>> {
    assert_eq!(
        signals.len(),
        x0s.len(),
        "each excitation signal needs exactly one initial state"
    );
    assert!(!signals.is_empty(), "certification batch must be non-empty");
    signals
        .par_iter()
        .zip(x0s.par_iter())
        .enumerate()
        .map(|(r, (signal, x0))| scan_run(system, storage, signal, x0, cfg, tol, r))
        .collect()
}

/// Certifies the dissipation inequality `V̇ ≤ uᵀẏ̃` along every record point
/// of every excitation run.
pub fn check_ni_trajectory<T: Real>(
    system: &SystemModel<T>,
    storage: &StorageFunction<T>,
    signals: &[TestSignal<T>],
    x0s: &[Vec<T>],
    cfg: &IntegratorConfig<T>,
    tol: &Tolerances<T>,
    seed: u64,
) -> CertReport<T> {
    let outcomes = scan_batch(system, storage, signals, x0s, cfg, tol);
    let samples: usize = outcomes.iter().map(|o| o.samples).sum();
    if let Some(w) = outcomes.iter().find_map(|o| o.violation.clone()) {
        return CertReport::fail(
            Property::Ni,
            w,
            None,
            samples,
            seed,
            "dissipation inequality violated",
        );
    }
    if outcomes.iter().any(|o| o.integration_failed) {
        return CertReport::inconclusive(
            Property::Ni,
            samples,
            seed,
            "at least one excitation run failed to integrate",
        );
    }
    CertReport::pass(Property::Ni, None, samples, seed)
}

/// Estimates the output-strictness level
/// `ε̂ = inf (uᵀẏ̃ − V̇)/|ẏ̃|²` over excited samples; passes iff `ε̂` clears
/// the floor.
pub fn check_osni_trajectory<T: Real>(
    system: &SystemModel<T>,
    storage: &StorageFunction<T>,
    signals: &[TestSignal<T>],
    x0s: &[Vec<T>],
    cfg: &IntegratorConfig<T>,
    tol: &Tolerances<T>,
    seed: u64,
) -> CertReport<T> {
    let outcomes = scan_batch(system, storage, signals, x0s, cfg, tol);
    let samples: usize = outcomes.iter().map(|o| o.samples).sum();
    let excited: usize = outcomes.iter().map(|o| o.excited_samples).sum();
    let mut best: Option<(T, FailWitness<T>)> = None;
    for o in &outcomes {
        if let Some((ratio, w)) = &o.min_ratio {
            let better = match &best {
                Some((b, _)) => ratio < b,
                None => true,
            };
            if better {
                best = Some((*ratio, w.clone()));
            }
        }
    }
    match best {
        None => CertReport::inconclusive(
            Property::Osni,
            samples,
            seed,
            "insufficient excitation: no sample had |d/dt ỹ|² above the floor",
        ),
        Some((epsilon_hat, witness)) => {
            if outcomes.iter().any(|o| o.integration_failed) {
                return CertReport::inconclusive(
                    Property::Osni,
                    samples,
                    seed,
                    "at least one excitation run failed to integrate",
                );
            }
            if epsilon_hat > tol.epsilon_floor {
                let mut report = CertReport::pass(Property::Osni, Some(epsilon_hat), excited, seed);
                report.note = format!(
                    "estimate is an infimum over {excited} excited samples; {}",
                    report.note
                );
                report
            } else {
                CertReport::fail(
                    Property::Osni,
                    witness,
                    Some(epsilon_hat),
                    excited,
                    seed,
                    "output-strictness estimate at or below floor",
                )
            }
        }
    }
}

/// Damped Newton with a finite-difference Jacobian and seeded multi-start
/// (origin first, then 16 starts in [−10, 10]ⁿ). Returns a state with
/// `|f(x̄, ū)| < root_residual`, or `None`.
pub fn find_steady_state<T: Real>(
    system: &SystemModel<T>,
    u_bar: &[T],
    tol: &Tolerances<T>,
    seed: u64,
) -> Option<Vec<T>> {
    let n = system.state_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts = vec![vec![T::zero(); n]];
    for _ in 0..16 {
        starts.push(
            (0..n)
                .map(|_| T::from_f64_lit(rng.gen_range(-10.0..10.0)))
                .collect(),
        );
    }
    let residual = |x: &[T]| -> Vec<T> {
        system
            .derivative(x, u_bar)
            .expect("dimensions checked by caller")
    };
    for start in starts {
        if let Some(root) = damped_newton(&residual, &start, tol.root_residual) {
            return Some(root);
        }
    }
    None
}

fn damped_newton<T: Real>(
    residual: &(dyn Fn(&[T]) -> Vec<T> + Sync),
    start: &[T],
    root_tol: T,
) -> Option<Vec<T>> {
    let mut x = start.to_vec();
    let mut fx = residual(&x);
    for _ in 0..80 {
        let fnorm = linalg::norm2(&fx);
        if fnorm < root_tol {
            return Some(x);
        }
        let jac = finite_difference_jacobian(residual, &x, x.len());
        let neg_f: Vec<T> = fx.iter().map(|&v| -v).collect();
        let delta = match jac.solve(&neg_f) {
            Ok(d) => d,
            Err(_) => return None,
        };
        // backtracking line search on |f|
        let mut alpha = T::one();
        let mut advanced = false;
        for _ in 0..30 {
            let candidate = linalg::axpy(alpha, &delta, &x);
            let fc = residual(&candidate);
            if linalg::norm2(&fc) < fnorm {
                x = candidate;
                fx = fc;
                advanced = true;
                break;
            }
            alpha = alpha * T::from_f64_lit(0.5);
        }
        if !advanced {
            return None;
        }
    }
    if linalg::norm2(&fx) < root_tol {
        Some(x)
    } else {
        None
    }
}

/// Signed log-spaced grid, 16 points per input coordinate over [−8, 8]
/// (magnitudes 8·2⁻ᵏ, k = 0..7), each applied along one coordinate axis.
pub fn default_input_grid<T: Real>(io_dim: usize) -> Vec<Vec<T>> {
    let mut grid = Vec::new();
    for coord in 0..io_dim {
        let mut mag = 8.0f64;
        for _ in 0..8 {
            for sign in [1.0, -1.0] {
                let mut u = vec![T::zero(); io_dim];
                u[coord] = T::from_f64_lit(sign * mag);
                grid.push(u);
            }
            mag /= 2.0;
        }
    }
    grid
}

/// Steady-state sign condition `ūᵀȳ ≥ 0` at every steady state found on the
/// grid; vacuously passes when no grid input admits one.
pub fn check_assumption_i<T: Real>(
    system: &SystemModel<T>,
    u_grid: &[Vec<T>],
    tol: &Tolerances<T>,
    seed: u64,
) -> CertReport<T> {
    let mut found = 0usize;
    let mut min_product: Option<T> = None;
    for u_bar in u_grid {
        let Some(x_bar) = find_steady_state(system, u_bar, tol, seed) else {
            continue;
        };
        found += 1;
        let y_bar = system.output(&x_bar, u_bar).expect("dims");
        let product = linalg::dot(u_bar, &y_bar);
        min_product = Some(match min_product {
            Some(m) => m.min(product),
            None => product,
        });
        if product < -tol.steady_sign_slack {
            return CertReport::fail(
                Property::AssumptionI,
                FailWitness {
                    run_index: found - 1,
                    time: T::zero(),
                    state: x_bar,
                    input: u_bar.clone(),
                    lhs: -product,
                    rhs: tol.steady_sign_slack,
                    margin: -product - tol.steady_sign_slack,
                },
                min_product,
                found,
                seed,
                "steady-state product ūᵀȳ is negative",
            );
        }
    }
    if found == 0 {
        let mut report = CertReport::pass(Property::AssumptionI, None, 0, seed);
        report.note = format!(
            "vacuous: no grid input admits a steady state; {}",
            report.note
        );
        return report;
    }
    CertReport::pass(Property::AssumptionI, min_product, found, seed)
}

/// Steady-state constant `γ̂ = min −ūᵀȳ/|ū|²` over grid inputs that admit a
/// steady state; passes iff `γ̂` clears the floor.
pub fn check_assumption_ii<T: Real>(
    system: &SystemModel<T>,
    u_grid: &[Vec<T>],
    tol: &Tolerances<T>,
    seed: u64,
) -> CertReport<T> {
    let mut found = 0usize;
    let mut worst: Option<(T, FailWitness<T>)> = None;
    for u_bar in u_grid {
        let u_norm_sq = linalg::dot(u_bar, u_bar);
        if u_norm_sq == T::zero() {
            continue; // the grid must exclude ū = 0
        }
        let Some(x_bar) = find_steady_state(system, u_bar, tol, seed) else {
            continue;
        };
        found += 1;
        let y_bar = system.output(&x_bar, u_bar).expect("dims");
        let ratio = -linalg::dot(u_bar, &y_bar) / u_norm_sq;
        let better = match &worst {
            Some((w, _)) => ratio < *w,
            None => true,
        };
        if better {
            worst = Some((
                ratio,
                FailWitness {
                    run_index: found - 1,
                    time: T::zero(),
                    state: x_bar,
                    input: u_bar.clone(),
                    lhs: ratio,
                    rhs: tol.gamma_floor,
                    margin: tol.gamma_floor - ratio,
                },
            ));
        }
    }
    match worst {
        None => CertReport::inconclusive(
            Property::AssumptionII,
            0,
            seed,
            "no grid input admits a steady state",
        ),
        Some((gamma_hat, witness)) => {
            if gamma_hat > tol.gamma_floor {
                CertReport::pass(Property::AssumptionII, Some(gamma_hat), found, seed)
            } else {
                CertReport::fail(
                    Property::AssumptionII,
                    witness,
                    Some(gamma_hat),
                    found,
                    seed,
                    "steady-state constant at or below floor",
                )
            }
        }
    }
}

/// Networked-plant steady-state sign condition: for seeded constant inputs
/// `Û_p`, integrate the open networked plant; whenever `Ŷ_p` settles
/// (total variation below the bound over the final 10% of the run), assert
/// `Û_pᵀŶ_p ≥ 0` within slack. Non-settling runs are skipped.
pub fn check_assumption_v<T: Real>(
    assembly: &NetworkAssembly<T>,
    runs: usize,
    cfg: &IntegratorConfig<T>,
    tol: &Tolerances<T>,
    seed: u64,
) -> CertReport<T> {
    let hat_dim = assembly.controllers().len() * assembly.io_dim();
    let n = assembly.plant_state_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cases = vec![(vec![T::zero(); hat_dim], {
        (0..n)
            .map(|_| T::from_f64_lit(rng.gen_range(-2.0..2.0)))
            .collect::<Vec<T>>()
    })];
    for _ in 1..runs.max(1) {
        let u_hat: Vec<T> = (0..hat_dim)
            .map(|_| T::from_f64_lit(rng.gen_range(-0.5..0.5)))
            .collect();
        let x0: Vec<T> = (0..n)
            .map(|_| T::from_f64_lit(rng.gen_range(-2.0..2.0)))
            .collect();
        cases.push((u_hat, x0));
    }

    let outcomes: Vec<Option<(Vec<T>, Vec<T>)>> = cases
        .par_iter()
        .map(|(u_hat, x0)| settle_networked_plant(assembly, u_hat, x0, cfg, tol))
        .collect();

    let mut settled = 0usize;
    let mut min_product: Option<T> = None;
    for (idx, outcome) in outcomes.iter().enumerate() {
        let Some((u_hat, y_hat)) = outcome else {
            continue;
        };
        settled += 1;
        let product = linalg::dot(u_hat, y_hat);
        min_product = Some(match min_product {
            Some(m) => m.min(product),
            None => product,
        });
        if product < -tol.network_sign_slack {
            return CertReport::fail(
                Property::AssumptionV,
                FailWitness {
                    run_index: idx,
                    time: cfg.t_end,
                    state: y_hat.clone(),
                    input: u_hat.clone(),
                    lhs: -product,
                    rhs: tol.network_sign_slack,
                    margin: -product - tol.network_sign_slack,
                },
                min_product,
                settled,
                seed,
                "settled networked-plant run with Û_pᵀŶ_p < 0",
            );
        }
    }
    if settled == 0 {
        return CertReport::inconclusive(
            Property::AssumptionV,
            0,
            seed,
            "no constant-input run settled to a constant output",
        );
    }
    let mut report = CertReport::pass(Property::AssumptionV, min_product, settled, seed);
    report.note = format!(
        "{settled}/{} runs settled, the rest were skipped; {}",
        outcomes.len(),
        report.note
    );
    report
}

fn settle_networked_plant<T: Real>(
    assembly: &NetworkAssembly<T>,
    u_hat: &[T],
    x0: &[T],
    cfg: &IntegratorConfig<T>,
    tol: &Tolerances<T>,
) -> Option<(Vec<T>, Vec<T>)> {
    let mut records: Vec<(T, Vec<T>)> = Vec::new();
    let run = crate::sim::drive_custom(
        |_, x| assembly.networked_plant_rhs(x, u_hat),
        x0,
        cfg,
        |t, x| {
            records.push((t, assembly.hat_output(x)?));
            Ok(())
        },
    );
    if run.is_err() || records.len() < 3 {
        return None;
    }
    let t_cut = cfg.t_end * T::from_f64_lit(0.9);
    let tail: Vec<&(T, Vec<T>)> = records.iter().filter(|(t, _)| *t >= t_cut).collect();
    if tail.len() < 2 {
        return None;
    }
    let mut total_variation = T::zero();
    for pair in tail.windows(2) {
        total_variation = total_variation + linalg::norm2(&linalg::sub(&pair[1].1, &pair[0].1));
    }
    if total_variation < tol.settle_total_variation {
        Some((u_hat.to_vec(), tail.last().unwrap().1.clone()))
    } else {
        None
    }
}

/// Positive-definiteness check over a box: zero at the origin, strictly
/// positive at every sampled nonzero point (randomly shifted Halton samples
/// in the box plus a seeded sphere of radius 1e-3 around the origin).
pub fn check_positive_definite<T: Real>(
    value: &(dyn Fn(&[T]) -> T + Sync),
    domain: &[(T, T)],
    samples: usize,
    seed: u64,
) -> CertReport<T> {
    let dim = domain.len();
    let origin = vec![T::zero(); dim];
    let v0 = value(&origin);
    if v0.abs() > T::from_f64_lit(1e-12) {
        return CertReport::fail(
            Property::PdStorage,
            FailWitness {
                run_index: 0,
                time: T::zero(),
                state: origin,
                input: vec![],
                lhs: v0.abs(),
                rhs: T::zero(),
                margin: v0.abs(),
            },
            Some(v0),
            1,
            seed,
            "value at the origin is nonzero",
        );
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.0..1.0)).collect();
    let mut checked = 1usize;
    let mut min_value: Option<T> = None;
    let mut check = |x: Vec<T>, idx: usize| -> Option<CertReport<T>> {
        if linalg::norm2(&x) <= T::from_f64_lit(1e-12) {
            return None;
        }
        let v = value(&x);
        checked += 1;
        min_value = Some(match min_value {
            Some(m) => m.min(v),
            None => v,
        });
        if v <= T::zero() {
            Some(CertReport::fail(
                Property::PdStorage,
                FailWitness {
                    run_index: idx,
                    time: T::zero(),
                    state: x,
                    input: vec![],
                    lhs: -v,
                    rhs: T::zero(),
                    margin: -v,
                },
                Some(v),
                checked,
                seed,
                "nonpositive value at a nonzero point",
            ))
        } else {
            None
        }
    };

    for i in 0..samples {
        let x: Vec<T> = (0..dim)
            .map(|j| {
                let u = (halton(i as u64 + 1, PRIMES[j % PRIMES.len()]) + shift[j]).fract();
                let (lo, hi) = domain[j];
                lo + (hi - lo) * T::from_f64_lit(u)
            })
            .collect();
        if let Some(fail) = check(x, i) {
            return fail;
        }
    }
    let sphere_count = (samples / 8).max(64);
    let radius = T::from_f64_lit(1e-3);
    for i in 0..sphere_count {
        let mut dir: Vec<f64> = (0..dim).map(|_| gaussian(&mut rng)).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            dir[0] = 1.0;
        } else {
            for v in &mut dir {
                *v /= norm;
            }
        }
        let x: Vec<T> = dir.iter().map(|&v| radius * T::from_f64_lit(v)).collect();
        if let Some(fail) = check(x, samples + i) {
            return fail;
        }
    }
    CertReport::pass(Property::PdStorage, min_value, checked, seed)
}

const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

fn halton(mut index: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while index > 0 {
        f /= base as f64;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; two uniforms per call is plenty here.
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Diagnostic-only probe of the observability-style assumptions: on windows
/// where `d/dt h(x)` stays below 1e-8, the state and input rates should stay
/// below 1e-6. Not decidable from finitely many trajectories, so the verdict
/// is inconclusive by construction; the note carries the diagnostics.
pub fn check_assumption_iii_iv<T: Real>(
    system: &SystemModel<T>,
    signals: &[TestSignal<T>],
    x0s: &[Vec<T>],
    cfg: &IntegratorConfig<T>,
    seed: u64,
) -> CertReport<T> {
    assert_eq!(signals.len(), x0s.len());
    let window = 8usize;
    let quiet_rate = T::from_f64_lit(1e-8);
    let active_rate = T::from_f64_lit(1e-6);
    let mut windows_checked = 0usize;
    let mut implication_failures = 0usize;
    let mut witness: Option<FailWitness<T>> = None;
    let mut samples = 0usize;
    for (r, (signal, x0)) in signals.iter().zip(x0s).enumerate() {
        let Ok(traj) = sim::integrate_open_loop(system, signal, x0, cfg) else {
            continue;
        };
        samples += traj.len();
        if traj.len() < window + 1 {
            continue;
        }
        for start in (0..traj.len() - window).step_by(window) {
            let idx = start..start + window;
            let mut max_ydot = T::zero();
            let mut max_xdot = T::zero();
            let mut max_udot = T::zero();
            for k in idx.clone() {
                let x = &traj.states[k];
                let u = &traj.inputs[k];
                let ydot = system.output_rate(x, u).expect("dims");
                let xdot = system.derivative(x, u).expect("dims");
                max_ydot = max_ydot.max(linalg::norm2(&ydot));
                max_xdot = max_xdot.max(linalg::norm2(&xdot));
                if k + 1 < traj.len() {
                    let dt = traj.times[k + 1] - traj.times[k];
                    let du = linalg::sub(&traj.inputs[k + 1], &traj.inputs[k]);
                    max_udot = max_udot.max(linalg::norm2(&du) / dt);
                }
            }
            if max_ydot < quiet_rate {
                windows_checked += 1;
                if max_xdot >= active_rate || max_udot >= active_rate {
                    implication_failures += 1;
                    if witness.is_none() {
                        witness = Some(FailWitness {
                            run_index: r,
                            time: traj.times[start],
                            state: traj.states[start].clone(),
                            input: traj.inputs[start].clone(),
                            lhs: max_xdot.max(max_udot),
                            rhs: active_rate,
                            margin: max_xdot.max(max_udot) - active_rate,
                        });
                    }
                }
            }
        }
    }
    let mut report = CertReport::inconclusive(
        Property::AssumptionIiiIv,
        samples,
        seed,
        format!(
            "heuristic diagnostic only (not decidable from finitely many trajectories): \
             {windows_checked} quiet windows, {implication_failures} implication failures"
        ),
    );
    report.witness = witness;
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use std::sync::Arc;

    fn cert_cfg() -> IntegratorConfig<f64> {
        IntegratorConfig::default_adaptive(5.0)
    }

    #[test]
    fn ni_passes_for_cubic_integrator_and_double_integrator() {
        let tol = Tolerances::default();
        for entry in [
            catalog::make_cubic_integrator(2.0).unwrap(),
            catalog::make_double_integrator::<f64>(),
        ] {
            let (signals, x0s) = excitation_batch(&entry.system, 20, 11);
            let report = check_ni_trajectory(
                &entry.system,
                &entry.storage,
                &signals,
                &x0s,
                &cert_cfg(),
                &tol,
                11,
            );
            assert!(report.passed(), "{}: {}", entry.system.label(), report);
            assert!(report.samples_used > 0);
        }
    }

    #[test]
    fn ni_fails_with_reproducible_witness_for_wrong_storage() {
        // V = x₁² is not a storage function for the double integrator.
        let entry = catalog::make_double_integrator::<f64>();
        let wrong = StorageFunction::new("double_integrator", 2, Arc::new(|x: &[f64]| x[0] * x[0]))
            .unwrap()
            .with_gradient(Arc::new(|x: &[f64]| vec![2.0 * x[0], 0.0]));
        let (signals, x0s) = excitation_batch(&entry.system, 20, 12);
        let tol = Tolerances::default();
        let report =
            check_ni_trajectory(&entry.system, &wrong, &signals, &x0s, &cert_cfg(), &tol, 12);
        assert_eq!(report.verdict, Verdict::Fail);
        let w = report.witness.expect("fail carries witness");
        // re-evaluating the witness reproduces the violation by more than
        // half the reported margin
        let (vdot, supply) = ni_residual(&entry.system, &wrong, &w.state, &w.input).unwrap();
        let slack = tol.dissipation_slack * (1.0 + supply.abs());
        assert!(vdot - (supply + slack) > 0.5 * w.margin);
    }

    #[test]
    fn osni_estimates_unity_for_cubic_damped_controllers() {
        let tol = Tolerances::default();
        for (a, b) in [(5.0, 3.0), (8.0, 2.0)] {
            let entry = catalog::make_cubic_damped_controller(a, b).unwrap();
            let (signals, x0s) = excitation_batch(&entry.system, 30, 13);
            let report = check_osni_trajectory(
                &entry.system,
                &entry.storage,
                &signals,
                &x0s,
                &cert_cfg(),
                &tol,
                13,
            );
            assert!(report.passed(), "{report}");
            let eps = report.estimate.unwrap();
            assert!(
                (0.9..=1.0).contains(&eps),
                "controller ({a},{b}) gave eps={eps}"
            );
        }
    }

    #[test]
    fn osni_fails_for_double_integrator() {
        let entry = catalog::make_double_integrator::<f64>();
        let (signals, x0s) = excitation_batch(&entry.system, 20, 14);
        let tol = Tolerances::default();
        let report = check_osni_trajectory(
            &entry.system,
            &entry.storage,
            &signals,
            &x0s,
            &cert_cfg(),
            &tol,
            14,
        );
        assert_eq!(report.verdict, Verdict::Fail, "{report}");
        assert!(report.estimate.unwrap() < 0.01);
        // re-evaluating the witness reproduces the violating ratio
        let w = report.witness.unwrap();
        let ratio = osni_ratio(
            &entry.system,
            &entry.storage,
            &w.state,
            &w.input,
            tol.rate_floor,
        )
        .unwrap()
        .expect("witness is above the rate floor");
        assert!(tol.epsilon_floor - ratio > 0.5 * w.margin);
    }

    #[test]
    fn osni_estimate_is_monotone_in_batch_size() {
        let entry = catalog::make_cubic_damped_controller(5.0, 3.0).unwrap();
        let (signals, x0s) = excitation_batch(&entry.system, 60, 15);
        let tol = Tolerances::default();
        let mut last = f64::INFINITY;
        for count in [10, 30, 60] {
            let report = check_osni_trajectory(
                &entry.system,
                &entry.storage,
                &signals[..count],
                &x0s[..count],
                &cert_cfg(),
                &tol,
                15,
            );
            let eps = report.estimate.unwrap();
            assert!(eps <= last + 1e-15, "infimum grew: {last} -> {eps}");
            last = eps;
        }
    }

    #[test]
    fn gamma_estimate_is_monotone_in_grid_size() {
        let entry = catalog::make_cubic_damped_controller::<f64>(5.0, 3.0).unwrap();
        let tol = Tolerances::default();
        let grid = default_input_grid::<f64>(1);
        let mut last = f64::INFINITY;
        for count in [4, 8, 16] {
            let report = check_assumption_ii(&entry.system, &grid[..count], &tol, 7);
            let gamma = report.estimate.unwrap();
            assert!(gamma <= last + 1e-15, "infimum grew: {last} -> {gamma}");
            last = gamma;
        }
    }

    #[test]
    fn steady_state_solver_examples() {
        let tol = Tolerances::default();
        // f(x, 0) ≡ 0 for the cubic integrator: origin start returned as-is
        let plant = catalog::make_cubic_integrator(1.0).unwrap();
        let root = find_steady_state(&plant.system, &[0.0], &tol, 1).unwrap();
        assert_eq!(root, vec![0.0]);
        // no steady state for nonzero input
        assert!(find_steady_state(&plant.system, &[1.0], &tol, 1).is_none());
        // controller 1 with ū = 8: 5x̄ + 3x̄³ = 8 at x̄ = 1
        let ctrl = catalog::make_cubic_damped_controller::<f64>(5.0, 3.0).unwrap();
        let root = find_steady_state(&ctrl.system, &[8.0], &tol, 1).unwrap();
        assert!((root[0] - 1.0).abs() < 1e-9, "x̄ = {}", root[0]);
    }

    #[test]
    fn assumption_ii_constants_for_cubic_damped_controllers() {
        let tol = Tolerances::default();
        let grid: Vec<Vec<f64>> = [0.5, 1.0, 2.0, 4.0, 8.0]
            .iter()
            .flat_map(|&m| [vec![m], vec![-m]])
            .collect();
        let c1 = catalog::make_cubic_damped_controller(5.0, 3.0).unwrap();
        let r1 = check_assumption_ii(&c1.system, &grid, &tol, 2);
        assert!(r1.passed(), "{r1}");
        assert!(r1.estimate.unwrap() >= 0.79);
        let c2 = catalog::make_cubic_damped_controller(8.0, 2.0).unwrap();
        let r2 = check_assumption_ii(&c2.system, &grid, &tol, 2);
        assert!(r2.passed(), "{r2}");
        assert!(r2.estimate.unwrap() >= 0.86);
        // the single integrator has no steady state off ū = 0
        let si = catalog::make_single_integrator::<f64>();
        let r3 = check_assumption_ii(&si.system, &grid, &tol, 2);
        assert_eq!(r3.verdict, Verdict::Inconclusive);
    }

    #[test]
    fn assumption_i_examples() {
        let tol = Tolerances::default();
        let grid = default_input_grid::<f64>(1);
        // cubic integrator: vacuous pass on the nonzero grid
        let plant = catalog::make_cubic_integrator(1.0).unwrap();
        let r = check_assumption_i(&plant.system, &grid, &tol, 3);
        assert!(r.passed(), "{r}");
        assert_eq!(r.samples_used, 0);
        assert!(r.note.contains("vacuous"));
        // adding ū = 0 gives ūᵀȳ = 0 ≥ 0
        let mut with_zero = grid.clone();
        with_zero.push(vec![0.0]);
        let r = check_assumption_i(&plant.system, &with_zero, &tol, 3);
        assert!(r.passed());
        assert_eq!(r.samples_used, 1);
        // stable linear lag: x̄ = ū, ūᵀȳ = ū² ≥ 0
        let lag =
            catalog::from_name::<f64>("linear_state_space", &[1.0, 1.0, -1.0, 1.0, 1.0, 0.0, 1.0])
                .unwrap();
        let r = check_assumption_i(&lag.system, &[vec![2.0]], &tol, 3);
        assert!(r.passed());
        assert!((r.estimate.unwrap() - 4.0).abs() < 1e-8);
    }

    #[test]
    fn positive_definite_check_examples() {
        // planted counterexample: V = −|x|²
        let neg = |x: &[f64]| -(x[0] * x[0] + x[1] * x[1]);
        let report = check_positive_definite(&neg, &[(-5.0, 5.0), (-5.0, 5.0)], 256, 4);
        assert_eq!(report.verdict, Verdict::Fail);
        let w = report.witness.unwrap();
        assert!(neg(&w.state) <= 0.0 && linalg::norm2(&w.state) > 0.0);

        // W for cubic integrator + controller 1 (positive definite)
        let w_fn =
            |x: &[f64]| 2.5 * x[1] * x[1] + 0.75 * x[1].powi(4) - x[0] * x[1] + 0.5 * x[0] * x[0];
        let report = check_positive_definite(&w_fn, &[(-5.0, 5.0), (-5.0, 5.0)], 2048, 4);
        assert!(report.passed(), "{report}");
    }

    #[test]
    fn witness_summary_line_format() {
        let report: CertReport<f64> = CertReport::pass(Property::Osni, Some(0.997), 120, 9);
        let line = report.summary_line();
        assert!(line.starts_with("osni pass estimate="));
        assert!(line.ends_with("seed=9"));
    }
}
