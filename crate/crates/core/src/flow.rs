//! Time integration of the curvature flow `dr_i/dt = -K̃_i sinh r_i`,
//! convergence and decay diagnostics, and the regular-packing solver.
//!
//! The right side is smooth inside the all-real region and continuous but
//! only piecewise smooth across its boundary, so the integrators carry two
//! guards: a step that would drive any radius non-positive is retried at
//! half size (discretization artifact — the true flow preserves
//! positivity), and a step across a sign change of any tetrahedron's `Q`
//! is retried once at half size to limit the local error at the kink.

use crate::complex::{Complex, Packing};
use crate::energy;
use crate::error::{Error, Result};
use crate::geometry;
use nalgebra::{DMatrix, DVector};
use std::collections::VecDeque;
use std::f64::consts::PI;
use std::fmt::Write as _;

/// Stepping scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FlowMethod {
    /// Classical fixed-step fourth-order Runge–Kutta.
    Rk4Fixed { dt: f64 },
    /// Dormand–Prince 5(4) embedded pair with proportional step control.
    Adaptive { rel_tol: f64 },
}

/// Integration parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowConfig {
    pub method: FlowMethod,
    /// Integration horizon.
    pub t_max: f64,
    /// Convergence threshold on the sup norm of the curvature.
    pub stop_tol: f64,
    /// Toggle for the decay detector (total-collapse classification).
    pub detect_decay: bool,
    /// A sample is recorded every `stride` accepted steps (the initial and
    /// final states are always recorded).
    pub stride: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            method: FlowMethod::Rk4Fixed { dt: 1e-3 },
            t_max: 10.0,
            stop_tol: 1e-8,
            detect_decay: true,
            stride: 100,
        }
    }
}

impl FlowConfig {
    fn validate(&self) -> Result<()> {
        let bad = |reason: &str| {
            Err(Error::BadFlowConfig {
                reason: reason.to_string(),
            })
        };
        match self.method {
            FlowMethod::Rk4Fixed { dt } => {
                if !(dt.is_finite() && dt > 0.0) {
                    return bad("fixed step dt must be positive and finite");
                }
            }
            FlowMethod::Adaptive { rel_tol } => {
                if !(rel_tol > 0.0 && rel_tol < 1.0) {
                    return bad("adaptive rel_tol must lie in (0, 1)");
                }
            }
        }
        if !(self.t_max.is_finite() && self.t_max > 0.0) {
            return bad("t_max must be positive and finite");
        }
        if !(self.stop_tol > 0.0 && self.stop_tol < 1.0) {
            return bad("stop_tol must lie in (0, 1)");
        }
        if self.stride == 0 {
            return bad("stride must be at least 1");
        }
        Ok(())
    }
}

/// Terminal classification of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowStatus {
    /// Curvature sup norm under `stop_tol` and radii stabilized.
    ConvergedToFlat,
    /// All radii collapsed under the decay threshold with monotone maximum.
    DecayedToZero,
    TMaxReached,
    /// Step-size underflow, persistent positivity violations, or a state
    /// the curvature kernel rejects.
    NumericFailure,
}

impl FlowStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            FlowStatus::ConvergedToFlat => "converged_to_flat",
            FlowStatus::DecayedToZero => "decayed_to_zero",
            FlowStatus::TMaxReached => "t_max_reached",
            FlowStatus::NumericFailure => "numeric_failure",
        }
    }
}

/// One recorded state of a run.
#[derive(Debug, Clone)]
pub struct FlowSample {
    pub t: f64,
    pub r: Vec<f64>,
    pub curvature: Vec<f64>,
    pub s_rel: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub virtual_count: usize,
}

/// Recorded trajectory and terminal status.
#[derive(Debug, Clone)]
pub struct FlowTrace {
    pub samples: Vec<FlowSample>,
    pub status: FlowStatus,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl FlowTrace {
    pub fn final_sample(&self) -> &FlowSample {
        self.samples.last().expect("a trace records at least t = 0")
    }

    /// CSV with header `t,r_0..,K_0..,S_rel,r_min,r_max,virtual_count`;
    /// floats carry 17 significant digits so parsing them back is exact.
    pub fn to_csv(&self) -> String {
        let n = self.final_sample().r.len();
        let mut out = String::new();
        out.push('t');
        for i in 0..n {
            let _ = write!(out, ",r_{i}");
        }
        for i in 0..n {
            let _ = write!(out, ",K_{i}");
        }
        out.push_str(",S_rel,r_min,r_max,virtual_count\n");
        for s in &self.samples {
            let _ = write!(out, "{:.16e}", s.t);
            for &v in &s.r {
                let _ = write!(out, ",{v:.16e}");
            }
            for &v in &s.curvature {
                let _ = write!(out, ",{v:.16e}");
            }
            let _ = writeln!(
                out,
                ",{:.16e},{:.16e},{:.16e},{}",
                s.s_rel, s.r_min, s.r_max, s.virtual_count
            );
        }
        out
    }
}

/// Flow right side `(-K̃_i sinh r_i)_i`.
pub fn rhs(c: &Complex, p: &Packing) -> Result<Vec<f64>> {
    c.check_packing(p)?;
    rhs_slice(c, p.as_slice())
}

fn rhs_slice(c: &Complex, r: &[f64]) -> Result<Vec<f64>> {
    let k = energy::curvature_slice(c, r)?;
    Ok(k.iter()
        .zip(r.iter())
        .map(|(&ki, &ri)| -ki * ri.sinh())
        .collect())
}

/// Radii collapse threshold of the decay detector.
const DECAY_R_MAX: f64 = 1e-6;
/// The decay detector demands this many trailing accepted steps with
/// non-increasing maximum radius.
const DECAY_WINDOW: usize = 50;
/// Positivity violations halve the step at most this many times.
const MAX_HALVINGS: u32 = 60;
/// Below this step size the run is classified a numeric failure.
const H_UNDERFLOW: f64 = 1e-14;
/// Adaptive steps never exceed this length.
const H_MAX: f64 = 0.5;
/// Absolute floor in the adaptive error weight.
const ADAPTIVE_ATOL: f64 = 1e-12;

enum StepTry {
    Accepted { new: Vec<f64>, err_ratio: f64 },
    ErrorTooBig { err_ratio: f64 },
    /// Positivity violation at a stage or a state the kernels reject.
    Inadmissible,
}

fn all_positive_finite(r: &[f64]) -> bool {
    r.iter().all(|&x| x.is_finite() && x > 0.0)
}

fn combine(r: &[f64], h: f64, terms: &[(f64, &[f64])]) -> Vec<f64> {
    (0..r.len())
        .map(|i| {
            let mut acc = 0.0;
            for (a, k) in terms {
                acc += a * k[i];
            }
            r[i] + h * acc
        })
        .collect()
}

fn rk4_try(c: &Complex, r: &[f64], h: f64) -> StepTry {
    let eval = |state: &[f64]| -> Option<Vec<f64>> {
        if !all_positive_finite(state) {
            return None;
        }
        rhs_slice(c, state).ok()
    };
    let Some(k1) = eval(r) else { return StepTry::Inadmissible };
    let Some(k2) = eval(&combine(r, h, &[(0.5, &k1)])) else {
        return StepTry::Inadmissible;
    };
    let Some(k3) = eval(&combine(r, h, &[(0.5, &k2)])) else {
        return StepTry::Inadmissible;
    };
    let Some(k4) = eval(&combine(r, h, &[(1.0, &k3)])) else {
        return StepTry::Inadmissible;
    };
    let new = combine(
        r,
        h / 6.0,
        &[(1.0, &k1), (2.0, &k2), (2.0, &k3), (1.0, &k4)],
    );
    if !all_positive_finite(&new) {
        return StepTry::Inadmissible;
    }
    StepTry::Accepted {
        new,
        err_ratio: 0.0,
    }
}

fn dp54_try(c: &Complex, r: &[f64], h: f64, rel_tol: f64) -> StepTry {
    let eval = |state: &[f64]| -> Option<Vec<f64>> {
        if !all_positive_finite(state) {
            return None;
        }
        rhs_slice(c, state).ok()
    };
    let Some(k1) = eval(r) else { return StepTry::Inadmissible };
    let Some(k2) = eval(&combine(r, h, &[(1.0 / 5.0, &k1)])) else {
        return StepTry::Inadmissible;
    };
    let Some(k3) = eval(&combine(r, h, &[(3.0 / 40.0, &k1), (9.0 / 40.0, &k2)])) else {
        return StepTry::Inadmissible;
    };
    let Some(k4) = eval(&combine(
        r,
        h,
        &[(44.0 / 45.0, &k1), (-56.0 / 15.0, &k2), (32.0 / 9.0, &k3)],
    )) else {
        return StepTry::Inadmissible;
    };
    let Some(k5) = eval(&combine(
        r,
        h,
        &[
            (19372.0 / 6561.0, &k1),
            (-25360.0 / 2187.0, &k2),
            (64448.0 / 6561.0, &k3),
            (-212.0 / 729.0, &k4),
        ],
    )) else {
        return StepTry::Inadmissible;
    };
    let Some(k6) = eval(&combine(
        r,
        h,
        &[
            (9017.0 / 3168.0, &k1),
            (-355.0 / 33.0, &k2),
            (46732.0 / 5247.0, &k3),
            (49.0 / 176.0, &k4),
            (-5103.0 / 18656.0, &k5),
        ],
    )) else {
        return StepTry::Inadmissible;
    };
    let new = combine(
        r,
        h,
        &[
            (35.0 / 384.0, &k1),
            (500.0 / 1113.0, &k3),
            (125.0 / 192.0, &k4),
            (-2187.0 / 6784.0, &k5),
            (11.0 / 84.0, &k6),
        ],
    );
    if !all_positive_finite(&new) {
        return StepTry::Inadmissible;
    }
    let Some(k7) = eval(&new) else { return StepTry::Inadmissible };

    // Difference of the 5th- and embedded 4th-order solutions.
    const E: [f64; 7] = [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];
    let ks = [&k1, &k2, &k3, &k4, &k5, &k6, &k7];
    let mut err_ratio: f64 = 0.0;
    for i in 0..r.len() {
        let mut e = 0.0;
        for (w, k) in E.iter().zip(ks.iter()) {
            e += w * k[i];
        }
        e *= h;
        let scale = ADAPTIVE_ATOL + rel_tol * r[i].abs().max(new[i].abs());
        err_ratio = err_ratio.max((e / scale).abs());
    }
    if err_ratio > 1.0 {
        StepTry::ErrorTooBig { err_ratio }
    } else {
        StepTry::Accepted { new, err_ratio }
    }
}

/// Integrates the flow from `r0` until convergence, decay, the horizon, or
/// numeric failure. Errors are returned only for invalid inputs; runtime
/// breakdown ends the trace with [`FlowStatus::NumericFailure`].
pub fn integrate(c: &Complex, r0: &Packing, cfg: &FlowConfig) -> Result<FlowTrace> {
    cfg.validate()?;
    c.check_packing(r0)?;

    let mut state = r0.as_slice().to_vec();
    let mut t = 0.0_f64;
    let mut cur_k = energy::curvature_slice(c, &state)?;
    let mut cur_vc = energy::virtual_count_slice(c, &state)?;

    let mut samples = Vec::new();
    samples.push(make_sample(c, t, &state, &cur_k, cur_vc)?);
    let mut last_sample_t = t;

    let mut window: VecDeque<f64> = VecDeque::with_capacity(DECAY_WINDOW);
    let mut accepted = 0usize;
    let mut rejected = 0usize;
    let mut status: Option<FlowStatus> = None;

    if converged(&cur_k, &state, cfg.stop_tol) {
        status = Some(FlowStatus::ConvergedToFlat);
    }

    let mut h = match cfg.method {
        FlowMethod::Rk4Fixed { dt } => dt,
        FlowMethod::Adaptive { .. } => 1e-3,
    };

    while status.is_none() {
        if cfg.t_max - t <= H_UNDERFLOW {
            status = Some(FlowStatus::TMaxReached);
            break;
        }
        let mut h_cur = h.min(cfg.t_max - t);
        let mut halvings = 0u32;
        let mut kink_retried = false;

        // Attempt loop: shrink on rejection, retry once across a Q kink.
        let outcome = loop {
            if h_cur < H_UNDERFLOW {
                break None;
            }
            let step = match cfg.method {
                FlowMethod::Rk4Fixed { .. } => rk4_try(c, &state, h_cur),
                FlowMethod::Adaptive { rel_tol } => dp54_try(c, &state, h_cur, rel_tol),
            };
            match step {
                StepTry::Accepted { new, err_ratio } => {
                    match energy::virtual_count_slice(c, &new) {
                        Ok(vc_new) => {
                            if vc_new != cur_vc && !kink_retried {
                                kink_retried = true;
                                rejected += 1;
                                h_cur *= 0.5;
                                continue;
                            }
                            break Some((new, err_ratio, h_cur, vc_new));
                        }
                        Err(_) => {
                            halvings += 1;
                            rejected += 1;
                            if halvings > MAX_HALVINGS {
                                break None;
                            }
                            h_cur *= 0.5;
                        }
                    }
                }
                StepTry::ErrorTooBig { err_ratio } => {
                    rejected += 1;
                    let factor = (0.9 * err_ratio.powf(-0.2)).clamp(0.1, 0.9);
                    h_cur *= factor;
                }
                StepTry::Inadmissible => {
                    halvings += 1;
                    rejected += 1;
                    if halvings > MAX_HALVINGS {
                        break None;
                    }
                    h_cur *= 0.5;
                }
            }
        };

        let Some((new, err_ratio, h_used, vc_new)) = outcome else {
            status = Some(FlowStatus::NumericFailure);
            break;
        };
        // Monitors must be evaluable before the step commits; otherwise the
        // trace ends at the last good state.
        let Ok(k_new) = energy::curvature_slice(c, &new) else {
            status = Some(FlowStatus::NumericFailure);
            break;
        };

        state = new;
        t += h_used;
        cur_k = k_new;
        cur_vc = vc_new;
        accepted += 1;

        h = match cfg.method {
            FlowMethod::Rk4Fixed { dt } => dt,
            FlowMethod::Adaptive { .. } => {
                let grow = if err_ratio > 0.0 {
                    (0.9 * err_ratio.powf(-0.2)).clamp(0.2, 5.0)
                } else {
                    5.0
                };
                (h_used * grow).min(H_MAX)
            }
        };

        let r_max = state.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        if window.len() == DECAY_WINDOW {
            window.pop_front();
        }
        window.push_back(r_max);

        if converged(&cur_k, &state, cfg.stop_tol) {
            status = Some(FlowStatus::ConvergedToFlat);
        } else if cfg.detect_decay && r_max < DECAY_R_MAX && window.len() == DECAY_WINDOW {
            let monotone = window
                .iter()
                .zip(window.iter().skip(1))
                .all(|(a, b)| a >= b);
            if monotone {
                status = Some(FlowStatus::DecayedToZero);
            }
        }

        if accepted.is_multiple_of(cfg.stride) || status.is_some() {
            match make_sample(c, t, &state, &cur_k, cur_vc) {
                Ok(s) => {
                    samples.push(s);
                    last_sample_t = t;
                }
                Err(_) => {
                    status = Some(FlowStatus::NumericFailure);
                    break;
                }
            }
        }
    }

    if t != last_sample_t {
        if let Ok(s) = make_sample(c, t, &state, &cur_k, cur_vc) {
            samples.push(s);
        }
    }

    Ok(FlowTrace {
        samples,
        status: status.expect("loop exits only with a status"),
        accepted_steps: accepted,
        rejected_steps: rejected,
    })
}

/// Flatness plus stabilized radii: the velocity `|K̃_i| sinh r_i` must be
/// small relative to the radius scale.
fn converged(k: &[f64], r: &[f64], stop_tol: f64) -> bool {
    let k_inf = k.iter().fold(0.0_f64, |m, &x| m.max(x.abs()));
    if k_inf >= stop_tol {
        return false;
    }
    let r_max = r.iter().fold(0.0_f64, |m, &x| m.max(x));
    let v_inf = k
        .iter()
        .zip(r.iter())
        .fold(0.0_f64, |m, (&ki, &ri)| m.max((ki * ri.sinh()).abs()));
    v_inf < stop_tol * (1.0 + r_max)
}

fn make_sample(
    c: &Complex,
    t: f64,
    r: &[f64],
    k: &[f64],
    virtual_count: usize,
) -> Result<FlowSample> {
    let s_rel = energy::s_rel_slice(c, r)?;
    // Ties in min/max pick the lowest index implicitly (strict comparison).
    let mut r_min = f64::INFINITY;
    let mut r_max = f64::NEG_INFINITY;
    for &x in r {
        if x < r_min {
            r_min = x;
        }
        if x > r_max {
            r_max = x;
        }
    }
    Ok(FlowSample {
        t,
        r: r.to_vec(),
        curvature: k.to_vec(),
        s_rel,
        r_min,
        r_max,
        virtual_count,
    })
}

/// Decay-bound report for complexes with all degrees at most 22.
#[derive(Debug, Clone)]
pub struct DecayReport {
    /// Decay constant `4π − d_max · α₁^E` used in the bound.
    pub epsilon: f64,
    /// `tanh(r_max(t)/2) ≤ tanh(r_max(0)/2) · exp(−ε t)` at every sample.
    pub bound_holds: bool,
    /// Sample indices violating the bound.
    pub violations: Vec<usize>,
    /// Least-squares slope of `−log tanh(r_max/2)` over `t` (needs at
    /// least two samples).
    pub fitted_rate: Option<f64>,
}

/// Verifies the exponential decay bound along a trace of a complex with
/// `d_max ≤ 22`.
pub fn decay_bound_check(trace: &FlowTrace, d_max: usize) -> Result<DecayReport> {
    if d_max > 22 {
        return Err(Error::DegreeTooLargeForDecay { d_max });
    }
    let epsilon = 4.0 * PI - d_max as f64 * geometry::ALPHA1_EUCLIDEAN;
    let first = trace.samples.first().expect("traces are nonempty");
    let base = (first.r_max / 2.0).tanh();
    let t0 = first.t;
    let mut violations = Vec::new();
    for (i, s) in trace.samples.iter().enumerate() {
        let bound = base * (-epsilon * (s.t - t0)).exp();
        let actual = (s.r_max / 2.0).tanh();
        if actual > bound * (1.0 + 1e-9) + 1e-15 {
            violations.push(i);
        }
    }
    let fitted_rate = fit_decay_rate(trace);
    Ok(DecayReport {
        epsilon,
        bound_holds: violations.is_empty(),
        violations,
        fitted_rate,
    })
}

fn fit_decay_rate(trace: &FlowTrace) -> Option<f64> {
    let pts: Vec<(f64, f64)> = trace
        .samples
        .iter()
        .filter(|s| s.r_max > 0.0)
        .map(|s| (s.t, (s.r_max / 2.0).tanh().ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom <= 0.0 {
        return None;
    }
    Some(-(n * sxy - sx * sy) / denom)
}

/// Lower-bound report for complexes with all degrees at least 23.
#[derive(Debug, Clone)]
pub struct LowerBoundReport {
    /// Radius at which the degree-23 regular tetrahedron balances `4π`.
    pub c_constant: f64,
    /// `min(r_min(0), c_constant)`: the floor every sample must respect.
    pub floor: f64,
    pub bound_holds: bool,
    pub violations: Vec<usize>,
}

/// Verifies the minimum-radius floor along a trace of a complex with
/// `d_min ≥ 23`.
pub fn lower_bound_check(trace: &FlowTrace, d_min: usize) -> Result<LowerBoundReport> {
    if d_min < 23 {
        return Err(Error::DegreeTooSmallForLowerBound { d_min });
    }
    let c_constant = solve_regular(23)?;
    let first = trace.samples.first().expect("traces are nonempty");
    let floor = first.r_min.min(c_constant);
    let mut violations = Vec::new();
    for (i, s) in trace.samples.iter().enumerate() {
        if s.r_min < floor * (1.0 - 1e-9) {
            violations.push(i);
        }
    }
    Ok(LowerBoundReport {
        c_constant,
        floor,
        bound_holds: violations.is_empty(),
        violations,
    })
}

/// Radius `t₀` at which a degree-`d` tetra-regular complex is flat:
/// `regular_solid_angle(t₀) = 4π/d`. The angle decreases strictly from its
/// small-radius supremum to 0, so a root exists exactly when
/// `d · α₁^E > 4π`, i.e. `d ≥ 23`.
pub fn solve_regular(d: usize) -> Result<f64> {
    if d == 0 {
        return Err(Error::DegreeOutOfRange { degree: d });
    }
    if d <= 22 {
        return Err(Error::NoRegularSolution { degree: d });
    }
    let target = 4.0 * PI / d as f64;
    let f = |t: f64| geometry::regular_solid_angle(t) - target;
    let mut lo = geometry::RADIUS_MIN;
    let mut hi = geometry::RADIUS_MAX;
    debug_assert!(f(lo) > 0.0 && f(hi) < 0.0);
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Newton iteration cap; quadratic convergence makes this generous.
const MAX_NEWTON_ITERS: usize = 64;

/// Damped Newton refinement of a flat packing, staying inside the all-real
/// region. Requires every tetrahedron real at the start.
pub fn newton_refine(c: &Complex, p: &Packing, tol: f64) -> Result<Packing> {
    assert!(tol > 0.0, "tolerance must be positive");
    c.check_packing(p)?;
    let mut r = p.as_slice().to_vec();
    let mut k = energy::curvature_slice(c, &r)?;
    let mut k_inf = k.iter().fold(0.0_f64, |m, &x| m.max(x.abs()));
    if energy::virtual_count_slice(c, &r)? > 0 {
        return Err(Error::HessianAtVirtual {
            virtual_count: energy::virtual_count_slice(c, &r)?,
        });
    }
    for _ in 0..MAX_NEWTON_ITERS {
        if k_inf < tol {
            return Packing::new(r);
        }
        let h = energy::curvature_jacobian_slice(c, &r)?;
        let rhs = DVector::from_column_slice(&k);
        let delta = h.lu().solve(&rhs).ok_or(Error::SingularHessian)?;

        let mut lambda = 1.0_f64;
        let mut stepped = false;
        while lambda >= 1e-12 {
            let trial: Vec<f64> = r
                .iter()
                .zip(delta.iter())
                .map(|(&ri, &di)| ri - lambda * di)
                .collect();
            let admissible = trial
                .iter()
                .all(|&x| x > 0.0 && x <= crate::geometry::RADIUS_MAX)
                && matches!(energy::virtual_count_slice(c, &trial), Ok(0));
            if admissible {
                if let Ok(k_trial) = energy::curvature_slice(c, &trial) {
                    let k_trial_inf = k_trial.iter().fold(0.0_f64, |m, &x| m.max(x.abs()));
                    if k_trial_inf < k_inf {
                        r = trial;
                        k = k_trial;
                        k_inf = k_trial_inf;
                        stepped = true;
                        break;
                    }
                }
            }
            lambda *= 0.5;
        }
        if !stepped {
            return Err(Error::NewtonNoStep);
        }
    }
    Err(Error::NewtonNoStep)
}

/// Flatness threshold required of spectrum inputs.
pub const FLATNESS_TOL: f64 = 1e-8;

/// Eigenvalues of the linearized flow at a flat packing.
#[derive(Debug, Clone)]
pub struct SpectrumReport {
    /// Eigenvalues of `−diag(√sinh r) · ∂K/∂r · diag(√sinh r)`, ascending.
    pub eigenvalues: Vec<f64>,
    /// `|largest eigenvalue|`: the asymptotic convergence rate when all
    /// eigenvalues are negative.
    pub rate: f64,
}

/// Linearizes the flow at a flat all-real packing and returns the spectrum
/// of the symmetrized stability operator.
pub fn stability_spectrum(c: &Complex, p: &Packing) -> Result<SpectrumReport> {
    c.check_packing(p)?;
    let r = p.as_slice();
    let k = energy::curvature_slice(c, r)?;
    let k_inf = k.iter().fold(0.0_f64, |m, &x| m.max(x.abs()));
    if k_inf >= FLATNESS_TOL {
        return Err(Error::SpectrumNotFlat {
            k_inf,
            tol: FLATNESS_TOL,
        });
    }
    let virtual_count = energy::virtual_count_slice(c, r)?;
    if virtual_count > 0 {
        return Err(Error::SpectrumAtVirtual { virtual_count });
    }
    let h = energy::curvature_jacobian_slice(c, r)?;
    let n = c.vertex_count();
    let d = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            r[i].sinh().sqrt()
        } else {
            0.0
        }
    });
    let m = -(&d * h * &d);
    // Symmetrize against roundoff before the eigensolve.
    let sym = 0.5 * (&m + m.transpose());
    let mut eigenvalues: Vec<f64> = sym.symmetric_eigen().eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(f64::total_cmp);
    let rate = eigenvalues.last().expect("nonempty spectrum").abs();
    Ok(SpectrumReport { eigenvalues, rate })
}
