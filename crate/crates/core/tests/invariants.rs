//! Property-based invariants: structural laws that must hold for every
//! input, checked over randomized draws with shrinking.

use proptest::prelude::*;
use std::f64::consts::PI;
use yamabe3h::complex::{generate, GeneratorKind};
use yamabe3h::energy::{curvature, segment_energy, total_energy_rel};
use yamabe3h::geometry::{
    classify, extended_solid_angles, q_value, solid_angle_jacobian, Radii4, TetraClass,
};
use yamabe3h::{Complex, Packing};

/// Radii spanning the well-conditioned band, with a side-channel of small
/// values so virtual configurations appear regularly.
fn radius() -> impl Strategy<Value = f64> {
    prop_oneof![4 => 0.05f64..5.0, 1 => 0.01f64..0.1]
}

fn quadruple() -> impl Strategy<Value = [f64; 4]> {
    [radius(), radius(), radius(), radius()]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, ..ProptestConfig::default() })]

    /// Classification partitions the domain through the sign of Q, and a
    /// virtual verdict always names the strict minimum radius.
    #[test]
    fn classification_partition(vals in quadruple()) {
        let r = Radii4::new(vals).unwrap();
        let q = q_value(&r);
        match classify(&r).unwrap() {
            TetraClass::Real => prop_assert!(q > 0.0),
            TetraClass::Virtual(i) => {
                prop_assert!(q <= 0.0);
                for m in 0..4 {
                    if m != i {
                        prop_assert!(vals[i] < vals[m]);
                    }
                }
            }
        }
    }

    /// The solid-angle Jacobian is symmetric: the angles are a gradient, so
    /// their Jacobian is a Hessian.
    #[test]
    fn jacobian_symmetry(vals in quadruple()) {
        let r = Radii4::new(vals).unwrap();
        if classify(&r).unwrap() != TetraClass::Real {
            return Ok(());
        }
        let j = solid_angle_jacobian(&r).unwrap();
        let scale = j.iter().fold(1.0_f64, |m, &v| m.max(v.abs()));
        for i in 0..4 {
            for k in (i + 1)..4 {
                prop_assert!(
                    (j[(i, k)] - j[(k, i)]).abs() <= 1e-10 * scale,
                    "asymmetry at ({}, {}): {} vs {}", i, k, j[(i, k)], j[(k, i)]
                );
            }
        }
    }

    /// Each extended angle lands in [0, 2pi]: bounded below by the
    /// degenerate collapse and above by the full-cone limit.
    #[test]
    fn extended_angles_bounded(vals in quadruple()) {
        let r = Radii4::new(vals).unwrap();
        let a = extended_solid_angles(&r).unwrap().angles;
        for &v in &a {
            prop_assert!((0.0..=2.0 * PI + 1e-12).contains(&v));
        }
    }

    /// Curvature respects the per-vertex bounds forced by the angle bounds:
    /// K_i = 4pi - sum of incident angles, each angle in [0, 2pi].
    #[test]
    fn curvature_bounds(vals in prop::collection::vec(radius(), 8)) {
        let c = generate(GeneratorKind::SixteenCell);
        let p = Packing::new(vals).unwrap();
        let k = curvature(&c, &p).unwrap();
        for (i, &ki) in k.k.iter().enumerate() {
            let d = c.degrees()[i] as f64;
            prop_assert!(ki <= 4.0 * PI + 1e-9);
            prop_assert!(ki >= 4.0 * PI - 2.0 * PI * d - 1e-9);
        }
    }

    /// Complex serialization round-trips exactly, including through random
    /// barycentric-style subdivisions, which also preserve the manifold
    /// checks and the degree-sum accounting sum(d_i) = 4 |T|.
    #[test]
    fn subdivision_and_roundtrip(steps in prop::collection::vec(0usize..64, 0..5)) {
        let mut c = generate(GeneratorKind::Pentachoron);
        for &s in &steps {
            c = c.subdivide_tet(s % c.tets().len()).unwrap();
        }
        let degree_sum: usize = c.degrees().iter().sum();
        prop_assert_eq!(degree_sum, 4 * c.tets().len());
        prop_assert!(yamabe3h::complex::validate(&c).passed());
        let back = Complex::parse(c.to_json().as_bytes()).unwrap();
        prop_assert_eq!(back.tets(), c.tets());
        prop_assert_eq!(back.vertex_count(), c.vertex_count());
    }

    /// Packing serialization round-trips bit-exactly.
    #[test]
    fn packing_roundtrip(vals in prop::collection::vec(radius(), 1..20)) {
        let p = Packing::new(vals).unwrap();
        let back = Packing::parse(p.to_json().as_bytes()).unwrap();
        prop_assert_eq!(back.as_slice(), p.as_slice());
    }
}

proptest! {
    // Quadrature-heavy properties: fewer, heavier cases.
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    /// The per-tetra energy is path independent: integrating the angle
    /// one-form directly matches any two-leg detour, including detours that
    /// cross the real/virtual boundary.
    #[test]
    fn energy_path_independence(a in quadruple(), b in quadruple(), m in quadruple()) {
        let direct = segment_energy(a, b).unwrap();
        let detour = segment_energy(a, m).unwrap() + segment_energy(m, b).unwrap();
        prop_assert!(
            (direct - detour).abs() < 1e-8,
            "direct {} vs detour {}", direct, detour
        );
    }

    /// The total energy is convex along straight segments in radius space:
    /// difference quotients are non-decreasing.
    #[test]
    fn energy_convex_along_segments(
        a in prop::collection::vec(0.2f64..3.0, 5),
        b in prop::collection::vec(0.2f64..3.0, 5),
    ) {
        let c = generate(GeneratorKind::Pentachoron);
        let at = |s: f64| {
            let r: Vec<f64> = a.iter().zip(&b).map(|(&x, &y)| (1.0 - s) * x + s * y).collect();
            total_energy_rel(&c, &Packing::new(r).unwrap(), false).map(|e| e.s_rel)
        };
        let ss = [0.0, 0.25, 0.5, 0.75, 1.0];
        let g: Vec<f64> = ss.iter().map(|&s| at(s)).collect::<Result<_, _>>().unwrap();
        let mut prev = f64::NEG_INFINITY;
        for w in g.windows(2) {
            let quot = (w[1] - w[0]) / 0.25;
            prop_assert!(quot >= prev - 1e-7, "difference quotients decreased: {} after {}", quot, prev);
            prev = quot;
        }
    }
}

/// Approaching the real/virtual boundary, the extended angles are continuous
/// but only Holder-1/2: the modulus of continuity at a boundary point decays
/// like sqrt(h), so halving the offset shrinks it by roughly sqrt(2) — well
/// below the factor 2 a differentiable function would show.
#[test]
fn continuity_refinement_across_boundary() {
    // Path from a real quadruple to a deeply virtual one.
    let a = [1.0, 1.0, 1.0, 1.0];
    let b = [0.02, 1.3, 0.9, 1.1];
    let point = |t: f64| {
        Radii4::new([
            (1.0 - t) * a[0] + t * b[0],
            (1.0 - t) * a[1] + t * b[1],
            (1.0 - t) * a[2] + t * b[2],
            (1.0 - t) * a[3] + t * b[3],
        ])
        .unwrap()
    };
    // Locate the crossing by bisection on Q.
    let mut lo = 0.0_f64; // real side
    let mut hi = 1.0_f64; // virtual side
    assert!(q_value(&point(lo)) > 0.0 && q_value(&point(hi)) < 0.0);
    while hi - lo > 1e-14 {
        let mid = 0.5 * (lo + hi);
        if q_value(&point(mid)) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let star = extended_solid_angles(&point(hi)).unwrap().angles;

    // Modulus of continuity on the real side at offsets h, h/2, h/4, ...
    let modulus = |h: f64| -> f64 {
        let ang = extended_solid_angles(&point(lo - h)).unwrap().angles;
        (0..4).fold(0.0_f64, |m, i| m.max((ang[i] - star[i]).abs()))
    };
    let mut h = 1e-3;
    let mut prev = modulus(h);
    for _ in 0..14 {
        h *= 0.5;
        let next = modulus(h);
        let ratio = prev / next;
        assert!(next < prev, "modulus must shrink: {prev} -> {next}");
        assert!(
            (1.25..=1.75).contains(&ratio),
            "halving ratio {ratio} incompatible with a sqrt modulus"
        );
        prev = next;
    }
    assert!(prev < 1e-2, "modulus at the smallest offset: {prev}");
}
