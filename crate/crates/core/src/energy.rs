//! Global curvature and the variational structure of packings.
//!
//! The scalar curvature at a vertex is `4π` minus the sum of (extended)
//! solid angles the vertex carries over its incident tetrahedra. The total
//! functional reported here is relative to the unit packing: per
//! tetrahedron, the line integral of `Σ α̃_m dr_m` from `(1,1,1,1)` — a
//! closed 1-form, so the straight segment is as good as any path — and
//! globally `S_rel = Σ_i 4π(r_i − 1) − Σ_tet Ũ_rel`. Its gradient is the
//! curvature vector; its Hessian (defined only where every tetrahedron is
//! real) is the negated scatter of per-tetra solid-angle Jacobians.
//!
//! Per-tetra work may run on multiple threads; all reductions run in
//! ascending tetrahedron order afterwards, so results are bitwise
//! independent of thread count.

use crate::complex::{Complex, Packing};
use crate::error::{Error, Result};
use crate::geometry::{self, DomainGuard, Radii4, TetraClass};
use crate::quadrature;
use nalgebra::DMatrix;
use rayon::prelude::*;
use std::f64::consts::PI;

/// Extended scalar curvature, one entry per vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureVector {
    pub k: Vec<f64>,
}

impl CurvatureVector {
    pub fn len(&self) -> usize {
        self.k.len()
    }

    pub fn is_empty(&self) -> bool {
        self.k.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.k
    }

    pub fn inf_norm(&self) -> f64 {
        self.k.iter().fold(0.0_f64, |m, &x| m.max(x.abs()))
    }
}

/// Relative total functional, its gradient, and (on request, at all-real
/// packings) its Hessian `∂K/∂r`.
#[derive(Debug, Clone)]
pub struct EnergyReport {
    pub s_rel: f64,
    pub grad: CurvatureVector,
    pub hessian: Option<DMatrix<f64>>,
}

/// Below this tetrahedron count the per-tetra loops stay sequential; the
/// parallel and sequential paths produce identical bits either way.
const PAR_THRESHOLD: usize = 64;

fn per_tet_map<T, F>(c: &Complex, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, &[usize; 4]) -> Result<T> + Sync + Send,
{
    let tets = c.tets();
    if tets.len() < PAR_THRESHOLD {
        tets.iter().enumerate().map(|(t, tet)| f(t, tet)).collect()
    } else {
        tets.par_iter().enumerate().map(|(t, tet)| f(t, tet)).collect()
    }
}

fn tetra_radii(r: &[f64], tet: &[usize; 4]) -> Result<Radii4> {
    Radii4::with_guard(
        [r[tet[0]], r[tet[1]], r[tet[2]], r[tet[3]]],
        &DomainGuard::positivity_only(),
    )
}

/// Extended scalar curvature of a packing.
pub fn curvature(c: &Complex, p: &Packing) -> Result<CurvatureVector> {
    c.check_packing(p)?;
    Ok(CurvatureVector {
        k: curvature_slice(c, p.as_slice())?,
    })
}

/// Slice-level curvature kernel shared with the flow integrator. The
/// caller guarantees positive entries of the right length.
pub(crate) fn curvature_slice(c: &Complex, r: &[f64]) -> Result<Vec<f64>> {
    debug_assert_eq!(r.len(), c.vertex_count());
    let angles = per_tet_map(c, |_, tet| {
        let rad = tetra_radii(r, tet)?;
        geometry::extended_solid_angles(&rad).map(|sa| sa.angles)
    })?;
    let mut k = vec![4.0 * PI; c.vertex_count()];
    for (tet, a) in c.tets().iter().zip(&angles) {
        for m in 0..4 {
            k[tet[m]] -= a[m];
        }
    }
    Ok(k)
}

/// Number of tetrahedra classified virtual at `r`.
pub(crate) fn virtual_count_slice(c: &Complex, r: &[f64]) -> Result<usize> {
    let classes = per_tet_map(c, |_, tet| geometry::classify(&tetra_radii(r, tet)?))?;
    Ok(classes
        .iter()
        .filter(|cl| matches!(cl, TetraClass::Virtual(_)))
        .count())
}

/// Relative per-tetra functional: line integral of `Σ α̃_m dr_m` along the
/// straight segment from the unit quadruple to `r`, to absolute tolerance
/// `1e-10`. The integrand is continuous but only piecewise smooth — the
/// segment is split wherever `Q` changes sign before quadrature.
pub fn tetra_energy_rel(r: &Radii4) -> Result<f64> {
    segment_energy([1.0; 4], r.r())
}

/// Scan resolution used to bracket sign changes of `Q` along a segment.
const Q_SCAN_POINTS: usize = 64;

/// Width to which a bracketed sign change is refined before splitting.
const Q_CUT_WIDTH: f64 = 1e-12;

/// Absolute quadrature budget per segment.
const SEGMENT_TOL: f64 = 1e-10;

/// Line integral of the (extended) solid-angle one-form along the straight
/// segment from `a` to `b` in radius space. The one-form is exact, so this
/// is path independent; the segment is split at real/virtual crossings,
/// where the integrand is continuous but loses smoothness.
pub fn segment_energy(a: [f64; 4], b: [f64; 4]) -> Result<f64> {
    let dir = [b[0] - a[0], b[1] - a[1], b[2] - a[2], b[3] - a[3]];
    if dir == [0.0; 4] {
        return Ok(0.0);
    }
    let at = |s: f64| {
        [
            a[0] + s * dir[0],
            a[1] + s * dir[1],
            a[2] + s * dir[2],
            a[3] + s * dir[3],
        ]
    };
    // A convex combination of positive quadruples stays positive.
    let rad = |s: f64| {
        Radii4::with_guard(at(s), &DomainGuard::positivity_only())
            .expect("segment between positive quadruples stays positive")
    };
    let q_at = |s: f64| geometry::q_value(&rad(s));

    // Mandatory cuts wherever two radii tie along the segment. When the two
    // smallest radii swap roles, the quadruple is forced real in a window
    // that can be arbitrarily narrow, and the angle vector swings 2 pi
    // between components inside it — a scan would miss the whole event.
    // The tie locations are roots of six linear equations, so cut exactly.
    let mut ties = vec![0.0, 1.0];
    for m in 0..4 {
        for n in (m + 1)..4 {
            let da = a[m] - a[n];
            let db = b[m] - b[n];
            if da != db {
                let s = da / (da - db);
                if s > Q_CUT_WIDTH && s < 1.0 - Q_CUT_WIDTH {
                    ties.push(s);
                }
            }
        }
    }
    ties.sort_by(f64::total_cmp);
    ties.dedup();

    // Within each tie-free piece the virtual index cannot change, so sign
    // changes of Q are plain crossings: bracket them by scanning, refine by
    // bisection.
    let mut cuts = Vec::with_capacity(ties.len());
    for w in ties.windows(2) {
        cuts.push(w[0]);
        scan_q_flips(&q_at, w[0], w[1], &mut cuts);
    }
    cuts.push(1.0);

    let failure: std::cell::RefCell<Option<Error>> = std::cell::RefCell::new(None);
    let integrand = |s: f64| -> f64 {
        if failure.borrow().is_some() {
            return 0.0;
        }
        match geometry::extended_solid_angles(&rad(s)) {
            Ok(sa) => (0..4).map(|m| sa.angles[m] * dir[m]).sum(),
            Err(e) => {
                *failure.borrow_mut() = Some(e);
                0.0
            }
        }
    };
    let pieces = cuts.len() - 1;
    let tol = SEGMENT_TOL / pieces as f64;
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let piece = quadrature::integrate(&integrand, w[0], w[1], tol);
        if let Some(e) = failure.borrow_mut().take() {
            return Err(e);
        }
        total += piece?;
    }
    Ok(total)
}

/// Append the locations in `(lo, hi)` where `q_at` changes sign, each
/// refined to width [`Q_CUT_WIDTH`], sampling [`Q_SCAN_POINTS`] intervals.
fn scan_q_flips(q_at: &impl Fn(f64) -> f64, lo: f64, hi: f64, out: &mut Vec<f64>) {
    let mut prev_s = lo;
    let mut prev_q = q_at(lo);
    for j in 1..=Q_SCAN_POINTS {
        let s = lo + (hi - lo) * j as f64 / Q_SCAN_POINTS as f64;
        let q = q_at(s);
        if (prev_q > 0.0) != (q > 0.0) {
            let mut l = prev_s;
            let mut h = s;
            let l_pos = prev_q > 0.0;
            while h - l > Q_CUT_WIDTH {
                let mid = 0.5 * (l + h);
                if (q_at(mid) > 0.0) == l_pos {
                    l = mid;
                } else {
                    h = mid;
                }
            }
            out.push(0.5 * (l + h));
        }
        prev_s = s;
        prev_q = q;
    }
}

/// Hessian of the relative functional, i.e. `∂K/∂r`: the negated scatter of
/// per-tetra solid-angle Jacobians. Defined only when every tetrahedron is
/// real; refuses otherwise.
pub fn curvature_jacobian(c: &Complex, p: &Packing) -> Result<DMatrix<f64>> {
    c.check_packing(p)?;
    curvature_jacobian_slice(c, p.as_slice())
}

pub(crate) fn curvature_jacobian_slice(c: &Complex, r: &[f64]) -> Result<DMatrix<f64>> {
    let virtual_count = virtual_count_slice(c, r)?;
    if virtual_count > 0 {
        return Err(Error::HessianAtVirtual { virtual_count });
    }
    let blocks = per_tet_map(c, |_, tet| {
        geometry::solid_angle_jacobian(&tetra_radii(r, tet)?)
    })?;
    let n = c.vertex_count();
    let mut h = DMatrix::zeros(n, n);
    for (tet, block) in c.tets().iter().zip(&blocks) {
        for m in 0..4 {
            for q in 0..4 {
                h[(tet[m], tet[q])] -= block[(m, q)];
            }
        }
    }
    Ok(h)
}

/// Slice-level relative functional shared with the flow sampler.
pub(crate) fn s_rel_slice(c: &Complex, r: &[f64]) -> Result<f64> {
    let energies = per_tet_map(c, |_, tet| tetra_energy_rel(&tetra_radii(r, tet)?))?;
    let mut linear = 0.0;
    for &ri in r {
        linear += 4.0 * PI * (ri - 1.0);
    }
    let mut u = 0.0;
    for e in &energies {
        u += e;
    }
    Ok(linear - u)
}

/// Relative total functional with gradient and, on request, the Hessian.
pub fn total_energy_rel(c: &Complex, p: &Packing, want_hessian: bool) -> Result<EnergyReport> {
    c.check_packing(p)?;
    let r = p.as_slice();
    let s_rel = s_rel_slice(c, r)?;
    let grad = CurvatureVector {
        k: curvature_slice(c, r)?,
    };
    let hessian = if want_hessian {
        Some(curvature_jacobian_slice(c, r)?)
    } else {
        None
    };
    Ok(EnergyReport { s_rel, grad, hessian })
}

/// The radial coordinate change `w(r) = ∫₀^r ds/√(sinh s)`. Strictly
/// increasing with a finite limit at infinity; the integrable singularity
/// at 0 is removed by `s = u²`, under which the integrand tends to 2.
pub fn w_coordinate(r: f64) -> Result<f64> {
    assert!(r >= 0.0 && !r.is_nan(), "w-coordinate needs r >= 0");
    if r == 0.0 {
        return Ok(0.0);
    }
    let g = |u: f64| {
        if u == 0.0 {
            2.0
        } else {
            2.0 * u / (u * u).sinh().sqrt()
        }
    };
    quadrature::integrate(g, 0.0, r.sqrt(), 1e-12)
}

/// Largest argument the inverse accepts; `w` is evaluated on radii up to
/// the standard domain bound.
pub fn w_max() -> Result<f64> {
    w_coordinate(crate::geometry::RADIUS_MAX)
}

/// Inverse of [`w_coordinate`] by bisection on the radius domain.
pub fn w_inverse(w: f64) -> Result<f64> {
    let top = w_max()?;
    if !(0.0..=top).contains(&w) {
        return Err(Error::WCoordinateRange { value: w, max: top });
    }
    let mut lo = 0.0_f64;
    let mut hi = crate::geometry::RADIUS_MAX;
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if w_coordinate(mid)? < w {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::{generate, GeneratorKind};

    // Independently precomputed 20-digit reference values.
    const ALPHA1_UNIT: f64 = 0.19950604046311544782;
    const W_AT_1: f64 = 1.9679827368137717561;
    const W_AT_2: f64 = 2.6657086857752898666;
    const W_LIMIT: f64 = 3.7081493546027438369;

    fn pentachoron_packing(r: [f64; 5]) -> (Complex, Packing) {
        (
            generate(GeneratorKind::Pentachoron),
            Packing::new(r.to_vec()).unwrap(),
        )
    }

    #[test]
    fn unit_packing_curvature_is_symmetric() {
        let (c, p) = pentachoron_packing([1.0; 5]);
        let k = curvature(&c, &p).unwrap();
        let expected = 4.0 * PI - 4.0 * geometry::regular_solid_angle(1.0);
        for &ki in k.as_slice() {
            assert!((ki - expected).abs() < 1e-12, "k = {ki}, expected {expected}");
        }
        assert!(expected > 0.0);
    }

    #[test]
    fn unit_tetra_energy_vanishes() {
        let r = Radii4::new([1.0; 4]).unwrap();
        assert_eq!(tetra_energy_rel(&r).unwrap(), 0.0);
    }

    #[test]
    fn tetra_energy_directional_derivative_is_solid_angle() {
        let h = 1e-5;
        let up = Radii4::new([1.0 + h, 1.0, 1.0, 1.0]).unwrap();
        let dn = Radii4::new([1.0 - h, 1.0, 1.0, 1.0]).unwrap();
        let fd = (tetra_energy_rel(&up).unwrap() - tetra_energy_rel(&dn).unwrap()) / (2.0 * h);
        assert!(
            (fd - ALPHA1_UNIT).abs() < 1e-6 * ALPHA1_UNIT.abs(),
            "fd = {fd}"
        );
    }

    #[test]
    fn tetra_energy_is_path_independent() {
        let target = [1.3, 0.7, 2.1, 1.5];
        let mid = [2.0, 1.0, 1.0, 1.0];
        let direct = segment_energy([1.0; 4], target).unwrap();
        let two_leg =
            segment_energy([1.0; 4], mid).unwrap() + segment_energy(mid, target).unwrap();
        assert!(
            (direct - two_leg).abs() < 1e-8,
            "direct = {direct}, two-leg = {two_leg}"
        );
    }

    #[test]
    fn path_independence_across_virtual_region() {
        // One tiny radius makes the quadruple virtual; both paths cross the
        // boundary of the real region.
        let target = [0.05, 1.0, 1.2, 0.9];
        let mid = [0.6, 2.0, 0.8, 1.4];
        let direct = segment_energy([1.0; 4], target).unwrap();
        let two_leg =
            segment_energy([1.0; 4], mid).unwrap() + segment_energy(mid, target).unwrap();
        assert!(
            (direct - two_leg).abs() < 1e-8,
            "direct = {direct}, two-leg = {two_leg}"
        );
    }

    #[test]
    fn path_independence_across_virtual_index_switch() {
        // Both endpoints are virtual but at different vertices, so somewhere
        // along the direct segment the two smallest radii tie and the
        // quadruple passes through a real window only ~2e-3 wide in s, where
        // the angle vector swings 2 pi between components. The tie cuts must
        // catch it; a plain scan would integrate straight past.
        let a = [2.816133264079817, 3.9108947639415224, 0.01, 0.014651574628913238];
        let b = [0.05, 0.05, 3.3306750309572335, 0.01];
        let m = [0.05; 4];
        let direct = segment_energy(a, b).unwrap();
        let detour = segment_energy(a, m).unwrap() + segment_energy(m, b).unwrap();
        assert!(
            (direct - detour).abs() < 1e-8,
            "direct = {direct}, detour = {detour}"
        );
    }

    #[test]
    fn unit_packing_energy_is_zero_with_positive_curvature_gradient() {
        let (c, p) = pentachoron_packing([1.0; 5]);
        let report = total_energy_rel(&c, &p, false).unwrap();
        assert_eq!(report.s_rel, 0.0);
        let k = curvature(&c, &p).unwrap();
        assert_eq!(report.grad, k);
        assert!(report.hessian.is_none());
    }

    #[test]
    fn gradient_matches_finite_differences_at_real_packing() {
        let (c, p) = pentachoron_packing([0.9, 1.1, 1.0, 1.3, 0.8]);
        let report = total_energy_rel(&c, &p, false).unwrap();
        let h = 1e-5;
        for i in 0..5 {
            let mut up = p.as_slice().to_vec();
            let mut dn = up.clone();
            up[i] += h;
            dn[i] -= h;
            let su = total_energy_rel(&c, &Packing::new(up).unwrap(), false)
                .unwrap()
                .s_rel;
            let sd = total_energy_rel(&c, &Packing::new(dn).unwrap(), false)
                .unwrap()
                .s_rel;
            let fd = (su - sd) / (2.0 * h);
            let g = report.grad.k[i];
            assert!(
                (fd - g).abs() < 1e-5 * g.abs().max(1.0),
                "vertex {i}: fd = {fd}, grad = {g}"
            );
        }
    }

    #[test]
    fn gradient_matches_finite_differences_at_virtual_packing() {
        // Vertex 0 is deeply virtual in all four incident tetrahedra.
        let (c, p) = pentachoron_packing([0.05, 1.0, 1.2, 0.9, 1.1]);
        let report = total_energy_rel(&c, &p, false).unwrap();
        assert!((report.grad.k[0] + 4.0 * PI).abs() < 1e-12);
        let h = 1e-5;
        for i in 0..5 {
            let mut up = p.as_slice().to_vec();
            let mut dn = up.clone();
            up[i] += h;
            dn[i] -= h;
            let su = total_energy_rel(&c, &Packing::new(up).unwrap(), false)
                .unwrap()
                .s_rel;
            let sd = total_energy_rel(&c, &Packing::new(dn).unwrap(), false)
                .unwrap()
                .s_rel;
            let fd = (su - sd) / (2.0 * h);
            let g = report.grad.k[i];
            assert!(
                (fd - g).abs() < 1e-5 * g.abs().max(1.0),
                "vertex {i}: fd = {fd}, grad = {g}"
            );
        }
    }

    #[test]
    fn hessian_is_symmetric_positive_definite_and_matches_curvature_differences() {
        let (c, p) = pentachoron_packing([0.9, 1.1, 1.0, 1.3, 0.8]);
        let h = total_energy_rel(&c, &p, true).unwrap().hessian.unwrap();
        for i in 0..5 {
            for j in 0..5 {
                assert!((h[(i, j)] - h[(j, i)]).abs() < 1e-10);
            }
        }
        let eig = h.clone().symmetric_eigen();
        assert!(eig.eigenvalues.iter().all(|&l| l > 0.0), "{:?}", eig.eigenvalues);

        let step = 1e-6;
        for j in 0..5 {
            let mut up = p.as_slice().to_vec();
            let mut dn = up.clone();
            up[j] += step;
            dn[j] -= step;
            let ku = curvature(&c, &Packing::new(up).unwrap()).unwrap();
            let kd = curvature(&c, &Packing::new(dn).unwrap()).unwrap();
            for i in 0..5 {
                let fd = (ku.k[i] - kd.k[i]) / (2.0 * step);
                assert!(
                    (fd - h[(i, j)]).abs() < 1e-5 * h[(i, j)].abs().max(1.0),
                    "entry ({i},{j}): fd = {fd}, h = {}",
                    h[(i, j)]
                );
            }
        }
    }

    #[test]
    fn hessian_refused_at_virtual_packing() {
        let (c, p) = pentachoron_packing([0.05, 1.0, 1.2, 0.9, 1.1]);
        match total_energy_rel(&c, &p, true) {
            Err(Error::HessianAtVirtual { virtual_count }) => assert_eq!(virtual_count, 4),
            other => panic!("expected HessianAtVirtual, got {other:?}"),
        }
    }

    #[test]
    fn curvature_respects_degree_bounds() {
        let c = generate(GeneratorKind::SixteenCell);
        let p = Packing::new(vec![0.3, 2.5, 1.1, 0.9, 1.7, 0.05, 3.0, 0.6]).unwrap();
        let k = curvature(&c, &p).unwrap();
        for (i, &ki) in k.as_slice().iter().enumerate() {
            let d = c.degrees()[i] as f64;
            assert!(ki <= 4.0 * PI + 1e-12);
            assert!(ki >= 4.0 * PI - 2.0 * PI * d - 1e-12);
        }
    }

    #[test]
    fn w_coordinate_reference_values_and_round_trip() {
        assert_eq!(w_coordinate(0.0).unwrap(), 0.0);
        assert!((w_coordinate(1.0).unwrap() - W_AT_1).abs() < 1e-10);
        assert!((w_coordinate(2.0).unwrap() - W_AT_2).abs() < 1e-10);
        assert!((w_max().unwrap() - W_LIMIT).abs() < 1e-8);
        for r in [0.1, 1.0, 5.0] {
            let w = w_coordinate(r).unwrap();
            let back = w_inverse(w).unwrap();
            assert!((back - r).abs() < 1e-9, "r = {r}, back = {back}");
        }
        assert!(matches!(
            w_inverse(W_LIMIT + 0.1),
            Err(Error::WCoordinateRange { .. })
        ));
        assert!(matches!(
            w_inverse(-0.1),
            Err(Error::WCoordinateRange { .. })
        ));
    }
}
