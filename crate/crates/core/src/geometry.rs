//! Per-tetrahedron hyperbolic ball geometry.
//!
//! A tetrahedron carries four ball radii `r = (r_0, r_1, r_2, r_3)`; the edge
//! between vertices `m` and `n` has length `l_mn = r_m + r_n` (mutually
//! externally tangent balls). With `y_m = coth(r_m)`, the quadruple is
//! realizable as a non-degenerate hyperbolic tetrahedron exactly when
//!
//! ```text
//! Q(r) = (y_0 + y_1 + y_2 + y_3)^2 - 2(y_0^2 + y_1^2 + y_2^2 + y_3^2) + 4 > 0
//! ```
//!
//! Quadruples with `Q <= 0` are *virtual*: they fall into exactly one region
//! `D_i`, indexed by the strictly smallest radius, on which the solid angles
//! extend continuously by `alpha~_i = 2*pi` and `alpha~_m = 0` otherwise.
//!
//! Dihedral angles of real tetrahedra are computed by two independent
//! routes: cofactors of the 4x4 Gram matrix, and a closed-form expression in
//! the radii. Both are exposed; tests hold them to agreement within 1e-10.
//! Analytic first derivatives of the solid angles (the Jacobian
//! `d alpha / d r`) are closed-form as well, validated against
//! high-precision finite differences.

use crate::error::{Error, Result};
use nalgebra::Matrix4;
use std::f64::consts::PI;

/// Smallest radius accepted by [`Radii4::new`]: below this, `coth` loses all
/// relative precision in the non-degeneracy function.
pub const RADIUS_MIN: f64 = 1e-8;

/// Largest radius accepted by [`Radii4::new`]: `sinh` of triple radius sums
/// must stay finite in `f64`.
pub const RADIUS_MAX: f64 = 50.0;

/// Euclidean limit of the regular-family solid angle: `3*arccos(1/3) - pi`.
/// Strict upper bound for every hyperbolic solid angle at a max-radius
/// vertex, and the `t -> 0` limit of [`regular_solid_angle`].
pub const ALPHA1_EUCLIDEAN: f64 = 0.551285598432530808;

/// Relative tolerance of the strict-minimum guard in [`classify`].
const STRICT_MIN_REL_TOL: f64 = 1e-12;

/// `Q` values in `(0, Q_NEAR_DEGENERATE_REL * scale)` flag the result as
/// near-degenerate, where `scale = max(1, (sum y)^2)` tracks the conditioning
/// of the `Q` cancellation.
const Q_NEAR_DEGENERATE_REL: f64 = 1e-14;

/// Cosines may overshoot `[-1, 1]` by at most this much before the
/// computation is declared broken rather than clamped.
const COS_CLAMP_TOL: f64 = 1e-9;

/// Accepted radius range; the default is `[RADIUS_MIN, RADIUS_MAX]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainGuard {
    pub min: f64,
    pub max: f64,
}

impl Default for DomainGuard {
    fn default() -> Self {
        DomainGuard {
            min: RADIUS_MIN,
            max: RADIUS_MAX,
        }
    }
}

impl DomainGuard {
    /// Guard that demands only strict positivity below the standard upper
    /// bound. Global packings use it: a flow trajectory decaying to zero
    /// passes through radii far below [`RADIUS_MIN`], and those states are
    /// still perfectly well-conditioned for classification.
    pub fn positivity_only() -> Self {
        DomainGuard {
            min: f64::MIN_POSITIVE,
            max: RADIUS_MAX,
        }
    }
}

/// Four ball radii of one combinatorial tetrahedron.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Radii4 {
    r: [f64; 4],
}

impl Radii4 {
    /// Validates positivity and the default domain guard.
    pub fn new(r: [f64; 4]) -> Result<Self> {
        Self::with_guard(r, &DomainGuard::default())
    }

    pub fn with_guard(r: [f64; 4], guard: &DomainGuard) -> Result<Self> {
        for &v in &r {
            if !v.is_finite() || v < guard.min || v > guard.max {
                return Err(Error::RadiusDomain {
                    value: v,
                    min: guard.min,
                    max: guard.max,
                });
            }
        }
        Ok(Radii4 { r })
    }

    pub fn r(&self) -> [f64; 4] {
        self.r
    }

    /// `y_m = coth(r_m)`; every entry exceeds 1.
    pub fn y(&self) -> [f64; 4] {
        [coth(self.r[0]), coth(self.r[1]), coth(self.r[2]), coth(self.r[3])]
    }
}

/// Classification of a radius quadruple.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TetraClass {
    /// Realizable: `Q(r) > 0`.
    Real,
    /// Not realizable; the index is the strictly minimal radius.
    Virtual(usize),
}

/// The six dihedral angles and edge lengths of a real tetrahedron, indexed
/// by unordered vertex pairs.
#[derive(Debug, Clone, Copy)]
pub struct DihedralAngles {
    beta: [f64; 6],
    length: [f64; 6],
}

/// Unordered vertex pairs in the fixed storage order used throughout.
pub const VERTEX_PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

fn pair_index(i: usize, j: usize) -> usize {
    debug_assert!(i != j && i < 4 && j < 4);
    let (a, b) = if i < j { (i, j) } else { (j, i) };
    match (a, b) {
        (0, 1) => 0,
        (0, 2) => 1,
        (0, 3) => 2,
        (1, 2) => 3,
        (1, 3) => 4,
        _ => 5,
    }
}

/// The two indices completing `{i, j}` to `{0, 1, 2, 3}`, in ascending order.
fn complement(i: usize, j: usize) -> (usize, usize) {
    let mut out = [0usize; 2];
    let mut n = 0;
    for m in 0..4 {
        if m != i && m != j {
            out[n] = m;
            n += 1;
        }
    }
    (out[0], out[1])
}

impl DihedralAngles {
    /// Angle at the edge joining vertices `i` and `j`, in `(0, pi)`.
    pub fn beta(&self, i: usize, j: usize) -> f64 {
        self.beta[pair_index(i, j)]
    }

    /// Edge length `l_ij = r_i + r_j`.
    pub fn length(&self, i: usize, j: usize) -> f64 {
        self.length[pair_index(i, j)]
    }
}

/// Solid angles at the four vertices. For real tetrahedra each lies in
/// `(0, 2*pi)`; the extended form takes the values `2*pi` / `0` on virtual
/// quadruples.
#[derive(Debug, Clone, Copy)]
pub struct SolidAngles {
    pub angles: [f64; 4],
    /// Set when `0 < Q < 1e-14 * max(1, (sum y)^2)`: the values are still
    /// meaningful (the extension is continuous) but computed at the edge of
    /// cancellation; downstream consumers decide whether to trust them.
    pub near_degenerate: bool,
}

fn coth(x: f64) -> f64 {
    1.0 / x.tanh()
}

/// Non-degeneracy function `Q(r)`; positive exactly on real tetrahedra.
///
/// Evaluated with the largest `y` factored out, so the sign survives even
/// when `(sum y)^2` itself would overflow (radii near the positivity-only
/// guard's floor). The intrinsic cancellation has absolute error on the
/// order of `eps * (sum y)^2`; [`q_scale`]-based flags track this.
pub fn q_value(r: &Radii4) -> f64 {
    let y = r.y();
    let m = y[0].max(y[1]).max(y[2]).max(y[3]);
    let u = [y[0] / m, y[1] / m, y[2] / m, y[3] / m];
    let s = u[0] + u[1] + u[2] + u[3];
    let s2 = u[0] * u[0] + u[1] * u[1] + u[2] * u[2] + u[3] * u[3];
    (m * m) * (s * s - 2.0 * s2 + 4.0 / (m * m))
}

/// Conditioning scale of the `Q` cancellation at `r`.
fn q_scale(y: &[f64; 4]) -> f64 {
    let s = y[0] + y[1] + y[2] + y[3];
    (s * s).max(1.0)
}

/// Splits quadruples into real and virtual. A virtual quadruple always has a
/// strictly minimal radius; if the two smallest agree to within `1e-12`
/// relative, the input is numerically corrupt (equal minima force `Q > 0`)
/// and an error is returned instead of an arbitrary pick.
pub fn classify(r: &Radii4) -> Result<TetraClass> {
    let q = q_value(r);
    if q > 0.0 {
        return Ok(TetraClass::Real);
    }
    let rr = r.r();
    let mut order = [0usize, 1, 2, 3];
    order.sort_by(|&a, &b| rr[a].total_cmp(&rr[b]));
    let lo = rr[order[0]];
    let next = rr[order[1]];
    if next - lo <= STRICT_MIN_REL_TOL * next {
        return Err(Error::NearBoundaryTie { radii: rr });
    }
    Ok(TetraClass::Virtual(order[0]))
}

/// Radius `r_i` completing three radii to a quadruple on the real/virtual
/// boundary (`Q = 0`, on the branch where `r_i` is minimal):
/// `coth(r_i) = y_j + y_k + y_l + 2*sqrt(y_j y_k + y_k y_l + y_l y_j + 1)`.
pub fn boundary_radius(others: [f64; 3]) -> Result<f64> {
    for &v in &others {
        if !v.is_finite() || v <= 0.0 {
            return Err(Error::RadiusDomain {
                value: v,
                min: 0.0,
                max: f64::INFINITY,
            });
        }
    }
    let [yj, yk, yl] = [coth(others[0]), coth(others[1]), coth(others[2])];
    let f = yj + yk + yl + 2.0 * (yj * yk + yk * yl + yl * yj + 1.0).sqrt();
    Ok((1.0 / f).atanh())
}

fn require_real(r: &Radii4) -> Result<f64> {
    let q = q_value(r);
    if q <= 0.0 {
        return Err(Error::DegenerateTetra { q });
    }
    Ok(q)
}

/// Shifted Gram matrix of the tetrahedron. The Gram matrix proper is
/// `-(J + D)` with `J` all-ones and `D_mn = cosh(l_mn) - 1 = 2 sinh^2(l_mn/2)`
/// (zero diagonal). `D` is what this returns: storing the shift instead of
/// `1 + shift` keeps full relative precision at short edges, where `cosh`
/// collapses onto 1 and 3x3 minors would otherwise lose ~8 digits to
/// cancellation.
fn gram_shift(r: &Radii4) -> Matrix4<f64> {
    let rr = r.r();
    let mut d = Matrix4::zeros();
    for m in 0..4 {
        for n in 0..4 {
            if m != n {
                let s = (0.5 * (rr[m] + rr[n])).sinh();
                d[(m, n)] = 2.0 * s * s;
            }
        }
    }
    d
}

/// Signed cofactor `(-1)^(k+l) * minor(k, l)` of the Gram matrix `-(J + D)`,
/// from the shift `D`. A 3x3 minor block of `J + D` is `B + 11^T` with `B`
/// the matching block of `D`, and the rank-one determinant lemma gives
/// `det(B + 11^T) = det(B) + (sum of all nine cofactors of B)` — every term
/// built from shift entries at full relative precision. The `-1` on each of
/// the minor's three rows contributes a global `(-1)^3`.
fn gram_cofactor(d: &Matrix4<f64>, k: usize, l: usize) -> f64 {
    let b = d.remove_row(k).remove_column(l);
    let det_b = b[(0, 0)] * (b[(1, 1)] * b[(2, 2)] - b[(1, 2)] * b[(2, 1)])
        - b[(0, 1)] * (b[(1, 0)] * b[(2, 2)] - b[(1, 2)] * b[(2, 0)])
        + b[(0, 2)] * (b[(1, 0)] * b[(2, 1)] - b[(1, 1)] * b[(2, 0)]);
    let mut cof_sum = 0.0;
    for p in 0..3 {
        for q in 0..3 {
            let m2 = b.remove_row(p).remove_column(q);
            let det2 = m2[(0, 0)] * m2[(1, 1)] - m2[(0, 1)] * m2[(1, 0)];
            cof_sum += if (p + q) % 2 == 0 { det2 } else { -det2 };
        }
    }
    let det_jd = det_b + cof_sum;
    if (k + l).is_multiple_of(2) {
        -det_jd
    } else {
        det_jd
    }
}

/// Dihedral angle cosine at the edge `{i, j}` via Gram-matrix cofactors:
/// `cos beta_ij = c_kl / sqrt(c_kk * c_ll)` with `{k, l}` the complementary
/// pair. Independent of [`dihedral_cos_closed`]; kept as a second route.
pub fn dihedral_cos_cofactor(r: &Radii4, i: usize, j: usize) -> Result<f64> {
    assert!(i < 4 && j < 4 && i != j, "edge needs two distinct vertices");
    require_real(r)?;
    let (k, l) = complement(i, j);
    let d = gram_shift(r);
    let ckl = gram_cofactor(&d, k, l);
    let ckk = gram_cofactor(&d, k, k);
    let cll = gram_cofactor(&d, l, l);
    let prod = ckk * cll;
    if prod <= 0.0 {
        return Err(Error::CofactorSign { value: prod });
    }
    Ok(ckl / prod.sqrt())
}

/// Dihedral angle cosine at the edge `{i, j}` in closed form:
///
/// ```text
///                sinh r_i sinh r_j sqrt(sinh r_k sinh r_l)
/// cos beta_ij = --------------------------------------------- *
///                4 sqrt(sinh(r_i+r_j+r_k) sinh(r_i+r_j+r_l))
///                  (Q - (y_i + y_j)^2 + (y_k - y_l)^2)
/// ```
///
/// Triple sums are fed to `sinh` as sums, never as products of individual
/// hyperbolic factors, to avoid cancellation.
pub fn dihedral_cos_closed(r: &Radii4, i: usize, j: usize) -> Result<f64> {
    assert!(i < 4 && j < 4 && i != j, "edge needs two distinct vertices");
    let q = require_real(r)?;
    Ok(cos_beta_closed_raw(r, q, i, j))
}

/// Closed-form cosine without the realness check; `q` is `q_value(r)`.
fn cos_beta_closed_raw(r: &Radii4, q: f64, i: usize, j: usize) -> f64 {
    let (k, l) = complement(i, j);
    let rr = r.r();
    let y = r.y();
    let num = rr[i].sinh() * rr[j].sinh() * (rr[k].sinh() * rr[l].sinh()).sqrt();
    let den = 4.0 * ((rr[i] + rr[j] + rr[k]).sinh() * (rr[i] + rr[j] + rr[l]).sinh()).sqrt();
    let di = y[i] + y[j];
    let dk = y[k] - y[l];
    num / den * (q - di * di + dk * dk)
}

fn acos_clamped(c: f64) -> Result<f64> {
    if c.abs() <= 1.0 {
        return Ok(c.acos());
    }
    if c.abs() <= 1.0 + COS_CLAMP_TOL {
        return Ok(c.clamp(-1.0, 1.0).acos());
    }
    Err(Error::CosineOutOfRange { value: c })
}

/// All six dihedral angles and edge lengths of a real tetrahedron.
pub fn dihedral_angles(r: &Radii4) -> Result<DihedralAngles> {
    let q = require_real(r)?;
    let rr = r.r();
    let mut beta = [0.0; 6];
    let mut length = [0.0; 6];
    for (p, &(i, j)) in VERTEX_PAIRS.iter().enumerate() {
        beta[p] = acos_clamped(cos_beta_closed_raw(r, q, i, j))?;
        length[p] = rr[i] + rr[j];
    }
    Ok(DihedralAngles { beta, length })
}

/// Solid angles of a real tetrahedron: at vertex `m`, the three incident
/// dihedral angles minus `pi`. Each lies in `(0, 2*pi)`.
pub fn solid_angles(r: &Radii4) -> Result<SolidAngles> {
    let q = require_real(r)?;
    let y = r.y();
    let near_degenerate = q < Q_NEAR_DEGENERATE_REL * q_scale(&y);
    let mut angles = [0.0; 4];
    for (m, angle) in angles.iter_mut().enumerate() {
        let mut sum = 0.0;
        for j in 0..4 {
            if j != m {
                sum += acos_clamped(cos_beta_closed_raw(r, q, m, j))?;
            }
        }
        *angle = sum - PI;
    }
    Ok(SolidAngles {
        angles,
        near_degenerate,
    })
}

/// Continuous extension of the solid angles to all positive quadruples:
/// the real values on `Q > 0`, and `(2*pi at the minimal vertex, 0
/// elsewhere)` on virtual quadruples.
pub fn extended_solid_angles(r: &Radii4) -> Result<SolidAngles> {
    match classify(r)? {
        TetraClass::Real => solid_angles(r),
        TetraClass::Virtual(i) => {
            let mut angles = [0.0; 4];
            angles[i] = 2.0 * PI;
            Ok(SolidAngles {
                angles,
                near_degenerate: false,
            })
        }
    }
}

/// Partial derivatives `d beta_ij / d r_m` for all four `m`, closed form.
///
/// The two derivative kinds (in an edge endpoint `r_i` or `r_j`, and in an
/// opposite radius `r_k` or `r_l`) have separate expressions; both were
/// validated against 50-digit finite differences of the closed-form angle.
pub fn dihedral_angle_partials(r: &Radii4, i: usize, j: usize) -> Result<[f64; 4]> {
    assert!(i < 4 && j < 4 && i != j, "edge needs two distinct vertices");
    let q = require_real(r)?;
    let (k, l) = complement(i, j);
    let mut out = [0.0; 4];
    out[i] = dbeta_dendpoint(r, q, i, j);
    out[j] = dbeta_dendpoint(r, q, j, i);
    out[k] = dbeta_dopposite(r, q, i, j, k, l);
    out[l] = dbeta_dopposite(r, q, i, j, l, k);
    Ok(out)
}

/// `d beta_ij / d r_i` (derivative in an endpoint of the edge).
fn dbeta_dendpoint(r: &Radii4, q: f64, i: usize, j: usize) -> f64 {
    let (k, l) = complement(i, j);
    let rr = r.r();
    let y = r.y();
    let (yi, yj, yk, yl) = (y[i], y[j], y[k], y[l]);
    let pref = rr[j].sinh().powi(2) * rr[k].sinh() * rr[l].sinh()
        / (2.0
            * q.sqrt()
            * (rr[i] + rr[j] + rr[k]).sinh()
            * (rr[i] + rr[j] + rr[l]).sinh());
    let brace = yj * yj
        * (-yk * yk - yl * yl - 2.0 * (yi / yj) * (yi * yk + yi * yl + yk * yl * (2.0 + yi / yj))
            + (yj - yi) * (2.0 * yi + yk + yl))
        - 4.0
        + 2.0 * yj * yj
        + (yk - yl) * (yk - yl)
        - 3.0 * yj * (yk + yl)
        - 3.0 * yi * (2.0 * yj + yk + yl);
    pref * brace
}

/// `d beta_ij / d r_k` (derivative in a radius opposite to the edge);
/// `l` is the remaining vertex.
fn dbeta_dopposite(r: &Radii4, q: f64, i: usize, j: usize, k: usize, l: usize) -> f64 {
    let rr = r.r();
    let y = r.y();
    (rr[i] + rr[j]).sinh() / (2.0 * q.sqrt() * rr[k].sinh() * (rr[i] + rr[j] + rr[k]).sinh())
        * (y[i] + y[j] + y[k] - y[l])
}

/// Jacobian `d alpha / d r` of the solid angles of a real tetrahedron.
/// Symmetric (it is a second derivative matrix of the per-tetra energy) and
/// negative definite on the whole real region.
pub fn solid_angle_jacobian(r: &Radii4) -> Result<Matrix4<f64>> {
    let q = require_real(r)?;
    let mut m = Matrix4::zeros();
    for i in 0..4 {
        for j in (i + 1)..4 {
            let v = dalpha_doff(r, q, i, j);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
        m[(i, i)] = dalpha_ddiag(r, q, i);
    }
    Ok(m)
}

/// Off-diagonal entry `d alpha_i / d r_j`, closed form (symmetric in
/// `i <-> j` and in the complementary pair `{k, l}`).
fn dalpha_doff(r: &Radii4, q: f64, i: usize, j: usize) -> f64 {
    let (k, l) = complement(i, j);
    let rr = r.r();
    let y = r.y();
    let pref = rr[k].sinh() * rr[l].sinh()
        / (q.sqrt() * (rr[i] + rr[j] + rr[k]).sinh() * (rr[i] + rr[j] + rr[l]).sinh());
    let dk = y[k] - y[l];
    let brack =
        2.0 - dk * dk + y[i] * (y[j] + y[k] + y[l]) + y[j] * (y[i] + y[k] + y[l]);
    pref * brack
}

/// Diagonal entry `d alpha_i / d r_i`, closed form. The polynomial brace is
/// invariant under permutations of the three other vertices; validated
/// against 50-digit finite differences at generic and extreme radii.
fn dalpha_ddiag(r: &Radii4, q: f64, i: usize) -> f64 {
    let mut others = [0usize; 3];
    let mut n = 0;
    for m in 0..4 {
        if m != i {
            others[n] = m;
            n += 1;
        }
    }
    let [j, k, l] = others;
    let rr = r.r();
    let y = r.y();
    let (yi, yj, yk, yl) = (y[i], y[j], y[k], y[l]);

    let pref = -(rr[i].sinh()
        * rr[j].sinh().powi(2)
        * rr[k].sinh().powi(2)
        * rr[l].sinh().powi(2))
        / (q.sqrt()
            * (rr[i] + rr[j] + rr[k]).sinh()
            * (rr[i] + rr[j] + rr[l]).sinh()
            * (rr[i] + rr[k] + rr[l]).sinh());

    let bracket = 2.0 * yi
        + yj
        + yk
        + yl
        + (yi / yj) * (yi + yk + yl)
        + (yi / yk) * (yi + yj + yl)
        + (yi / yl) * (yi + yj + yk)
        + (2.0 / yi + 1.0 / yj + 1.0 / yk + 1.0 / yl) * q;

    let sum_jkl = yj + yk + yl;
    let brace = yi * yi * yj * yk * yl * bracket
        + 6.0
        - 2.0 * yk * yk
        + 6.0 * yk * yl
        - yk * yk * yk * yl
        - 2.0 * yl * yl
        + 2.0 * yk * yk * yl * yl
        - yk * yl * yl * yl
        - yj * yj * yj * (yk + yl)
        + 4.0 * yi * yi * sum_jkl * sum_jkl
        + 2.0 * yj * yj * (-1.0 + yk * yk + yk * yl + yl * yl)
        - yj * (yk * yk * yk - 2.0 * yk * yk * yl + yl * (-6.0 + yl * yl)
            - 2.0 * yk * (3.0 + yl * yl))
        + yi * (-2.0 * yj * yj * yj + 10.0 * yk - 2.0 * yk * yk * yk + 10.0 * yl
            + 3.0 * yk * yk * yl
            + 3.0 * yk * yl * yl
            - 2.0 * yl * yl * yl
            + 3.0 * yj * yj * (yk + yl)
            + yj * (10.0 + 3.0 * yk * yk + 16.0 * yk * yl + 3.0 * yl * yl));

    pref * brace
}

/// Solid angle of the regular family `t * (1,1,1,1)`:
/// `3 * arccos(cosh(2t) / (1 + 2 cosh(2t))) - pi`. Strictly decreasing,
/// from [`ALPHA1_EUCLIDEAN`] at `t -> 0` down to `0` at `t -> inf`.
pub fn regular_solid_angle(t: f64) -> f64 {
    debug_assert!(t > 0.0, "regular family needs a positive radius");
    let c = (2.0 * t).cosh();
    3.0 * (c / (1.0 + 2.0 * c)).acos() - PI
}

#[cfg(test)]
mod tests {
    use super::*;

    // Independently precomputed 20-digit reference values (high-precision
    // evaluation of the defining formulas, not of this implementation).
    const Q_UNIT: f64 = 17.792493287730483731;
    const COS_BETA_UNIT: f64 = 0.44134478608690081873;
    const ALPHA1_UNIT: f64 = 0.19950604046311544782;
    const JAC_C_UNIT: f64 = 0.040273906845312420131;
    const JAC_DIAG_UNIT: f64 = -0.45455495638961386854;
    const BOUNDARY_COTH_UNIT: f64 = 8.9078823589778272855;
    const BOUNDARY_R_UNIT: f64 = 0.11273530461305394822;

    fn radii(r: [f64; 4]) -> Radii4 {
        Radii4::new(r).unwrap()
    }

    #[test]
    fn q_value_at_unit_packing() {
        let q = q_value(&radii([1.0; 4]));
        assert!((q - Q_UNIT).abs() < 1e-12, "q = {q}");
    }

    #[test]
    fn regular_family_is_always_real() {
        for &t in &[1e-6, 1e-3, 0.1, 1.0, 5.0, 20.0, 49.0] {
            assert_eq!(classify(&radii([t; 4])).unwrap(), TetraClass::Real);
        }
    }

    #[test]
    fn dominant_y_quadruple_is_virtual_at_min() {
        let r = radii([1e-3, 10.0, 10.0, 10.0]);
        assert!(q_value(&r) < 0.0);
        assert_eq!(classify(&r).unwrap(), TetraClass::Virtual(0));
    }

    #[test]
    fn equal_minima_force_real() {
        // With the two smallest radii equal, Q = 4u(v+w) - (v-w)^2 + 4 in
        // the remaining coth values, which is positive since all exceed 1.
        // So a tie among minima can never coexist with Q <= 0.
        for &(a, b, c) in &[(1e-3, 5.0, 9.0), (0.02, 0.5, 30.0), (2.0, 2.0, 2.0)] {
            let r = radii([a, a, b, c]);
            assert_eq!(classify(&r).unwrap(), TetraClass::Real);
        }
    }

    #[test]
    fn radius_domain_guard_rejects_out_of_range() {
        assert!(Radii4::new([0.0, 1.0, 1.0, 1.0]).is_err());
        assert!(Radii4::new([1e-9, 1.0, 1.0, 1.0]).is_err());
        assert!(Radii4::new([1.0, 1.0, 1.0, 51.0]).is_err());
        assert!(Radii4::new([1.0, f64::NAN, 1.0, 1.0]).is_err());
        let loose = DomainGuard {
            min: 1e-12,
            max: 100.0,
        };
        assert!(Radii4::with_guard([1e-9, 1.0, 1.0, 60.0], &loose).is_ok());
    }

    #[test]
    fn boundary_radius_lands_on_q_zero() {
        let rb = boundary_radius([1.0, 1.0, 1.0]).unwrap();
        assert!((coth(rb) - BOUNDARY_COTH_UNIT).abs() < 1e-12);
        assert!((rb - BOUNDARY_R_UNIT).abs() < 1e-14);
        let q = q_value(&radii([rb, 1.0, 1.0, 1.0]));
        assert!(q.abs() < 1e-12, "q = {q}");
        assert!(rb < 1.0);

        let rb2 = boundary_radius([2.0, 2.0, 2.0]).unwrap();
        let q2 = q_value(&radii([rb2, 2.0, 2.0, 2.0]));
        assert!(q2.abs() < 1e-12, "q = {q2}");
        assert!(rb2 < 2.0);
    }

    #[test]
    fn dihedral_cos_matches_regular_closed_form() {
        for &t in &[0.3, 1.0, 2.5] {
            let r = radii([t; 4]);
            let expect = (2.0 * t).cosh() / (1.0 + 2.0 * (2.0 * t).cosh());
            for &(i, j) in &VERTEX_PAIRS {
                assert!((dihedral_cos_cofactor(&r, i, j).unwrap() - expect).abs() < 1e-12);
                assert!((dihedral_cos_closed(&r, i, j).unwrap() - expect).abs() < 1e-13);
            }
        }
        let c = dihedral_cos_closed(&radii([1.0; 4]), 0, 1).unwrap();
        assert!((c - COS_BETA_UNIT).abs() < 1e-13);
    }

    #[test]
    fn dihedral_routes_agree_on_generic_radii() {
        let samples = [
            [0.7, 1.3, 0.9, 2.1],
            [0.3, 0.4, 0.5, 0.6],
            [2.5, 0.2, 1.7, 0.8],
            [0.05, 0.07, 0.06, 0.04],
            [8.0, 9.0, 7.5, 10.0],
        ];
        for s in samples {
            let r = radii(s);
            if q_value(&r) <= 0.0 {
                continue;
            }
            for &(i, j) in &VERTEX_PAIRS {
                let a = dihedral_cos_cofactor(&r, i, j).unwrap();
                let b = dihedral_cos_closed(&r, i, j).unwrap();
                assert!((a - b).abs() < 1e-10, "pair ({i},{j}) at {s:?}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn dihedral_ops_reject_virtual_quadruples() {
        let r = radii([1e-3, 10.0, 10.0, 10.0]);
        assert!(matches!(
            dihedral_cos_cofactor(&r, 0, 1),
            Err(Error::DegenerateTetra { .. })
        ));
        assert!(matches!(
            dihedral_cos_closed(&r, 2, 3),
            Err(Error::DegenerateTetra { .. })
        ));
        assert!(matches!(solid_angles(&r), Err(Error::DegenerateTetra { .. })));
    }

    #[test]
    fn solid_angles_regular_family() {
        for &t in &[0.2, 1.0, 3.0] {
            let a = solid_angles(&radii([t; 4])).unwrap();
            let expect = regular_solid_angle(t);
            for m in 0..4 {
                assert!((a.angles[m] - expect).abs() < 1e-13);
            }
            assert!(!a.near_degenerate);
        }
        let a = solid_angles(&radii([1.0; 4])).unwrap();
        assert!((a.angles[0] - ALPHA1_UNIT).abs() < 1e-13);
    }

    #[test]
    fn solid_angles_permute_with_radii() {
        let base = [0.7, 1.3, 0.9, 2.1];
        let a = solid_angles(&radii(base)).unwrap();
        // swap vertices 1 and 3
        let swapped = [0.7, 2.1, 0.9, 1.3];
        let b = solid_angles(&radii(swapped)).unwrap();
        assert!((a.angles[0] - b.angles[0]).abs() < 1e-12);
        assert!((a.angles[1] - b.angles[3]).abs() < 1e-12);
        assert!((a.angles[2] - b.angles[2]).abs() < 1e-12);
        assert!((a.angles[3] - b.angles[1]).abs() < 1e-12);
    }

    #[test]
    fn extended_angles_on_virtual_quadruple() {
        let a = extended_solid_angles(&radii([1e-3, 10.0, 10.0, 10.0])).unwrap();
        assert_eq!(a.angles[0], 2.0 * PI);
        assert_eq!(a.angles[1], 0.0);
        assert_eq!(a.angles[2], 0.0);
        assert_eq!(a.angles[3], 0.0);
    }

    #[test]
    fn extended_angles_match_real_exactly() {
        let r = radii([0.7, 1.3, 0.9, 2.1]);
        let a = solid_angles(&r).unwrap();
        let b = extended_solid_angles(&r).unwrap();
        assert_eq!(a.angles, b.angles);
    }

    #[test]
    fn extended_angles_approach_limits_near_boundary() {
        // Approach a Q = 0 boundary point from the real side along the
        // minimal-radius direction; the distinguished angle climbs to 2*pi
        // and the others fall to 0.
        let rb = boundary_radius([1.0, 1.0, 1.0]).unwrap();
        let mut prev_dev = f64::INFINITY;
        for &delta in &[1e-2, 1e-4, 1e-6, 1e-8] {
            let a = extended_solid_angles(&radii([rb + delta, 1.0, 1.0, 1.0])).unwrap();
            let dev = (2.0 * PI - a.angles[0]).abs().max(
                a.angles[1].abs().max(a.angles[2].abs()).max(a.angles[3].abs()),
            );
            assert!(dev < prev_dev, "deviation not shrinking at delta = {delta}");
            prev_dev = dev;
        }
        assert!(prev_dev < 2e-3);
    }

    #[test]
    fn jacobian_at_unit_packing_matches_reference() {
        let j = solid_angle_jacobian(&radii([1.0; 4])).unwrap();
        let cosh2 = 2.0_f64.cosh();
        let sinh2 = 2.0_f64.sinh();
        let c = 2.0 * sinh2
            / ((cosh2 - 1.0) * (2.0 * cosh2 + 1.0) * (1.0 + 4.0 * cosh2 + 3.0 * cosh2 * cosh2).sqrt());
        assert!((c - JAC_C_UNIT).abs() < 1e-15);
        for a in 0..4 {
            for b in 0..4 {
                let expect = if a == b { -3.0 * c * cosh2 } else { c };
                assert!((j[(a, b)] - expect).abs() < 1e-13, "entry ({a},{b})");
            }
        }
        assert!((j[(0, 0)] - JAC_DIAG_UNIT).abs() < 1e-13);
    }

    #[test]
    fn jacobian_is_negative_definite_at_unit_packing() {
        let j = solid_angle_jacobian(&radii([1.0; 4])).unwrap();
        let eig = nalgebra::SymmetricEigen::new(j);
        for ev in eig.eigenvalues.iter() {
            assert!(*ev < 0.0, "eigenvalue {ev} not negative");
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let samples = [[0.7, 1.3, 0.9, 2.1], [0.3, 0.4, 0.5, 0.6], [1.1, 0.6, 1.9, 0.35]];
        let h = 1e-5;
        for s in samples {
            let j = solid_angle_jacobian(&radii(s)).unwrap();
            for col in 0..4 {
                let mut up = s;
                let mut dn = s;
                up[col] += h;
                dn[col] -= h;
                let au = solid_angles(&radii(up)).unwrap().angles;
                let ad = solid_angles(&radii(dn)).unwrap().angles;
                for row in 0..4 {
                    let fd = (au[row] - ad[row]) / (2.0 * h);
                    let err = (j[(row, col)] - fd).abs() / j[(row, col)].abs().max(1e-3);
                    assert!(err < 1e-6, "({row},{col}) at {s:?}: {} vs {fd}", j[(row, col)]);
                }
            }
        }
    }

    #[test]
    fn jacobian_agrees_with_dihedral_partial_assembly() {
        // Second analytic route: d alpha_i / d r_m is the sum over the three
        // edges at i of d beta_ij / d r_m.
        let samples = [[0.7, 1.3, 0.9, 2.1], [2.5, 0.2, 1.7, 0.8]];
        for s in samples {
            let r = radii(s);
            let j = solid_angle_jacobian(&r).unwrap();
            let mut assembled = Matrix4::<f64>::zeros();
            for i in 0..4 {
                for jj in 0..4 {
                    if i != jj {
                        let parts = dihedral_angle_partials(&r, i, jj).unwrap();
                        for m in 0..4 {
                            assembled[(i, m)] += parts[m];
                        }
                    }
                }
            }
            for a in 0..4 {
                for b in 0..4 {
                    assert!(
                        (j[(a, b)] - assembled[(a, b)]).abs() < 1e-10,
                        "entry ({a},{b}) at {s:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn regular_solid_angle_limits_and_monotonicity() {
        assert!((regular_solid_angle(1e-9) - ALPHA1_EUCLIDEAN).abs() < 1e-12);
        assert!(regular_solid_angle(10.0) < 1e-3);
        let mut prev = f64::INFINITY;
        for k in 1..200 {
            let v = regular_solid_angle(k as f64 * 0.05);
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn min_radius_vertex_has_positive_off_diagonal_jacobian_row() {
        // With r_0 minimal, growing any other radius opens the solid angle
        // at vertex 0.
        let r = radii([0.3, 1.3, 0.9, 2.1]);
        let j = solid_angle_jacobian(&r).unwrap();
        for col in 1..4 {
            assert!(j[(0, col)] > 0.0);
        }
    }
}
