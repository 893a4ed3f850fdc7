//! Adaptive Gauss-Kronrod quadrature (15-point rule with embedded 7-point
//! Gauss estimate).
//!
//! Used for the per-tetra energy line integral and the radial coordinate
//! change. The integrands are piecewise smooth; callers split at known
//! kinks and hand each smooth piece to [`integrate`].

use crate::error::{Error, Result};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Kronrod abscissae on `[0, 1]` side of the symmetric rule.
const XGK: [f64; 8] = [
    0.99145537112081263921,
    0.94910791234275852453,
    0.86486442335976907279,
    0.74153118559939443986,
    0.58608723546769113029,
    0.40584515137739716691,
    0.20778495500789846760,
    0.0,
];

/// Kronrod weights matching `XGK`.
const WGK: [f64; 8] = [
    0.022935322010529224964,
    0.063092092629978553291,
    0.104790010322250183840,
    0.140653259715525918745,
    0.169004726639267902827,
    0.190350578064785409914,
    0.204432940075298892414,
    0.209482141084727828013,
];

/// Weights of the embedded 7-point Gauss rule (nodes `XGK[1], XGK[3],
/// XGK[5], XGK[7]`).
const WG: [f64; 4] = [
    0.12948496616886969327,
    0.27970539148927666790,
    0.38183005050511894495,
    0.41795918367346938776,
];

/// One 15-point panel: returns (integral, error estimate).
fn panel<F: FnMut(f64) -> f64>(f: &mut F, lo: f64, hi: f64) -> (f64, f64) {
    let c = 0.5 * (lo + hi);
    let h = 0.5 * (hi - lo);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let f1 = f(c - x);
        let f2 = f(c + x);
        kronrod += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            gauss += WG[(j - 1) / 2] * (f1 + f2);
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Smallest panel width the subdivision will split further; narrower
/// panels keep their error estimate as-is.
const MIN_WIDTH: f64 = 1e-14;

/// Hard cap on bisections per call. Near an integrable cusp the integrand
/// may be computable only to a position-dependent noise floor, so local
/// estimates there never look converged; the cap bounds the work spent
/// before the summed estimate (which such slivers barely touch) decides.
const MAX_SPLITS: usize = 100_000;

struct Panel {
    err: f64,
    lo: f64,
    hi: f64,
    value: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        // total order so heap pops are deterministic even on err ties
        self.err
            .total_cmp(&other.err)
            .then_with(|| self.lo.total_cmp(&other.lo))
            .then_with(|| self.hi.total_cmp(&other.hi))
    }
}

/// Adaptively integrates `f` over `[lo, hi]` to absolute tolerance `tol`.
///
/// Globally adaptive: the panel with the worst error estimate is bisected
/// until the sum of all panel estimates meets `tol`. A per-panel budget
/// would instead chase evaluation noise near integrable cusps, where the
/// local estimate has a floor no subdivision can beat. Errors out (with
/// the achieved estimate) only if the summed estimate still exceeds `tol`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    if lo == hi {
        return Ok(0.0);
    }
    debug_assert!(hi > lo && tol > 0.0);
    let make = |f: &mut F, a: f64, b: f64| {
        let (value, err) = panel(f, a, b);
        Panel { err, lo: a, hi: b, value }
    };
    let first = make(&mut f, lo, hi);
    let mut err_total = first.err;
    let mut queue = BinaryHeap::new();
    queue.push(first);
    // Panels too narrow to split; their estimates are final, so once they
    // alone exceed `tol` no further splitting can help.
    let mut done: Vec<Panel> = Vec::new();
    let mut done_err = 0.0;
    let mut splits = 0;
    while err_total > tol && done_err <= tol && splits < MAX_SPLITS {
        let Some(worst) = queue.pop() else { break };
        if worst.hi - worst.lo < MIN_WIDTH {
            done_err += worst.err;
            done.push(worst);
            continue;
        }
        let mid = 0.5 * (worst.lo + worst.hi);
        let left = make(&mut f, worst.lo, mid);
        let right = make(&mut f, mid, worst.hi);
        err_total += left.err + right.err - worst.err;
        queue.push(left);
        queue.push(right);
        splits += 1;
    }
    done.extend(queue);
    // Sum in interval order: the result depends only on the final panel
    // set, not on the order the queue retired them.
    done.sort_by(|p, q| p.lo.total_cmp(&q.lo));
    let total = done.iter().map(|p| p.value).sum();
    let achieved: f64 = done.iter().map(|p| p.err).sum();
    if achieved > tol {
        return Err(Error::QuadratureTolerance {
            requested: tol,
            achieved,
        });
    }
    Ok(total)
}
