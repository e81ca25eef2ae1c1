use proptest::prelude::*;

use vlasov_renorm::diagnostics::fit_rate;
use vlasov_renorm::fields::{container, Axis, AxisKind, GridField};
use vlasov_renorm::kernels::{make_mollifier, mollify, MollifierProfile};
use vlasov_renorm::norms::{
    gagliardo_seminorm, lp_norm, sobolev_norm, theta_annular, theta_annular_bruteforce, Exponent, Rational, RegularityClass,
};
use vlasov_renorm::relativistic::{check_velocity_increment, check_velocity_mollification, velocity_jacobian};
use vlasov_renorm::solver::{perturbed_equilibrium, step, EquilibriumSpec, SchemeConfig};

fn exponent() -> impl Strategy<Value = Exponent> {
    prop_oneof![
        Just(Exponent::Finite(1.0)),
        Just(Exponent::Finite(2.0)),
        (1.0f64..6.0).prop_map(Exponent::Finite),
        Just(Exponent::Infinity),
    ]
}

/// A random field on a 1-D torus of `n` points.
fn field_1d(n: usize) -> impl Strategy<Value = GridField> {
    prop::collection::vec(-1.0f64..1.0, n).prop_map(move |v| {
        let x = Axis::periodic(AxisKind::X1, 1.0, n).unwrap();
        GridField::new(vec![x], v).unwrap()
    })
}

fn field_2d() -> impl Strategy<Value = GridField> {
    prop::collection::vec(-1.0f64..1.0, 32 * 16).prop_map(|v| {
        let axes = vec![Axis::periodic(AxisKind::X1, 1.0, 32).unwrap(), Axis::centered(AxisKind::S1, 2.0, 16).unwrap()];
        GridField::new(axes, v).unwrap()
    })
}

fn dot(a: &GridField, b: &GridField) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

fn momentum(d: usize) -> impl Strategy<Value = Vec<f64>> {
    (prop::collection::vec(-1.0f64..1.0, d), -3.0f64..3.0).prop_map(|(v, e)| {
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-12);
        v.into_iter().map(|a| a / n * 10f64.powf(e)).collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernel_has_unit_mass(n in 16usize..200, frac in 0.0f64..1.0) {
        let x = Axis::periodic(AxisKind::X1, 1.0, n).unwrap();
        let lo = 2.0 * x.spacing();
        let eps = lo + frac * (0.25 - lo);
        let k = make_mollifier(MollifierProfile::Friedrichs, eps, &[x]).unwrap();
        prop_assert!((k.mass() - 1.0).abs() < 1e-13);
        prop_assert!(k.weights().iter().all(|w| *w >= 0.0));
    }

    #[test]
    fn mollification_is_self_adjoint(f in field_2d(), g in field_2d(), e in 0.07f64..0.25, s in 0.3f64..0.5) {
        let axes = f.axes().to_vec();
        for (scale, axis) in [(e, axes[0]), (s, axes[1])] {
            let k = make_mollifier(MollifierProfile::Friedrichs, scale, &[axis]).unwrap();
            let lhs = dot(&mollify(&f, &k).unwrap(), &g);
            let rhs = dot(&f, &mollify(&g, &k).unwrap());
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()), "{} {}", lhs, rhs);
        }
    }

    #[test]
    fn mollification_contracts(f in field_1d(48), e in 0.05f64..0.25, theta in 0.05f64..0.95, p in exponent()) {
        let k = make_mollifier(MollifierProfile::Friedrichs, e, f.axes()).unwrap();
        let fe = mollify(&f, &k).unwrap();
        prop_assert!(lp_norm(&fe, p) <= lp_norm(&f, p) + 1e-12);
        prop_assert!(gagliardo_seminorm(&fe, theta, p).unwrap() <= gagliardo_seminorm(&f, theta, p).unwrap() + 1e-10);
    }

    #[test]
    fn mollifier_sees_only_the_annulus(n in 64usize..160, e in 0.04f64..0.2, at in 0usize..64) {
        let x = Axis::periodic(AxisKind::X1, 1.0, n).unwrap();
        let mut delta = GridField::zeros(vec![x]).unwrap();
        delta.data_mut()[at] = 1.0;
        let k = make_mollifier(MollifierProfile::Friedrichs, e, &[x]).unwrap();
        let out = mollify(&delta, &k).unwrap();
        let h = x.spacing();
        for (i, v) in out.data().iter().enumerate() {
            let lag = (i as isize - at as isize).rem_euclid(n as isize) as usize;
            let d = lag.min(n - lag) as f64 * h;
            if *v != 0.0 {
                prop_assert!(d >= e - 1e-12 && d <= 2.0 * e + 1e-12, "weight {} at distance {}", v, d);
            }
        }
    }

    #[test]
    fn banded_annulus_matches_the_double_sum(f in field_1d(96), e in 0.025f64..0.2, theta in 0.05f64..0.95, p in exponent()) {
        let a = theta_annular(&f, e, theta, p, &[AxisKind::X1]).unwrap();
        let b = theta_annular_bruteforce(&f, e, theta, p, &[AxisKind::X1]).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-300), "{} {}", a, b);
        prop_assert!(a <= sobolev_norm(&f, theta, p).unwrap().total + 1e-10);
    }

    #[test]
    fn seminorm_ignores_constants_and_translations(f in field_1d(32), c in -5.0f64..5.0, shift in 1usize..31, theta in 0.05f64..0.95, p in exponent()) {
        let base = gagliardo_seminorm(&f, theta, p).unwrap();
        let axes = f.axes().to_vec();
        let lifted = GridField::new(axes.clone(), f.data().iter().map(|v| v + c).collect()).unwrap();
        let n = f.len();
        let rolled = GridField::new(axes, (0..n).map(|i| f.data()[(i + shift) % n]).collect()).unwrap();
        for other in [lifted, rolled] {
            let g = gagliardo_seminorm(&other, theta, p).unwrap();
            prop_assert!((g - base).abs() <= 1e-11 * base.max(1.0));
        }
        let scaled = GridField::new(f.axes().to_vec(), f.data().iter().map(|v| -3.0 * v).collect()).unwrap();
        prop_assert!((gagliardo_seminorm(&scaled, theta, p).unwrap() - 3.0 * base).abs() <= 1e-11 * base.max(1.0));
    }

    #[test]
    fn velocity_bounds(s in momentum(3), w in momentum(3)) {
        let inc = check_velocity_increment(&s, &w).unwrap();
        prop_assert!(inc.difference <= inc.bound);
        prop_assert!(velocity_jacobian(&s).unwrap().operator_norm() <= 1.0 + 1e-12);
    }

    #[test]
    fn mollified_velocity_stays_close(s in prop::collection::vec(-8.0f64..8.0, 2), sigma in 0.04f64..0.25) {
        let axes = [Axis::centered(AxisKind::S1, 1.0, 64).unwrap(), Axis::centered(AxisKind::S2, 1.0, 64).unwrap()];
        let k = make_mollifier(MollifierProfile::Friedrichs, sigma, &axes).unwrap();
        let r = check_velocity_mollification(&s, &k).unwrap();
        prop_assert!(r.difference <= r.bound + 1e-10);
    }

    #[test]
    fn criticality_is_exact(tn in 1i64..12, td in 12i64..30, kn in 1i64..12, kd in 12i64..30) {
        let theta = Rational::new(tn, td).unwrap();
        let kappa = Rational::new(kn, kd).unwrap();
        let reg = RegularityClass::exact(theta, Exponent::Finite(2.0)).unwrap().with_field_exact(kappa, Exponent::Finite(2.0)).unwrap();
        let c = reg.criticality().unwrap();
        let (t, k) = (tn as f64 / td as f64, kn as f64 / kd as f64);
        prop_assert!((c.to_f64() - (t * k + k + 3.0 * t - 1.0)).abs() < 1e-12);
        // Cleared of the positive denominators td·kd.
        prop_assert_eq!(c.signum(), (tn * kn + kn * td + 3 * tn * kd - td * kd).signum());
        prop_assert!((reg.predicted_exponent().unwrap() - c.to_f64() / 2.0).abs() < 1e-15);
        let back: Rational = c.to_string().parse().unwrap();
        prop_assert_eq!(back, c);
    }

    #[test]
    fn fit_recovers_power_laws(slope in -2.0f64..2.0, c in 0.1f64..10.0, eps0 in 0.05f64..0.5, ratio in 1.5f64..3.0) {
        let pts: Vec<(f64, f64)> = (0..5).map(|i| {
            let e = eps0 / ratio.powi(i);
            (e, c * e.powf(slope))
        }).collect();
        let r = fit_rate(&pts).unwrap();
        prop_assert!((r.slope - slope).abs() < 1e-10);
        prop_assert!((r.intercept - c.ln()).abs() < 1e-9);
    }

    #[test]
    fn container_roundtrip_is_bit_exact(f in field_2d(), g in field_1d(16)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.vrnf");
        container::save(&path, &[("u", &f), ("e1", &g)]).unwrap();
        let back = container::load(&path).unwrap();
        prop_assert_eq!(back.len(), 2);
        prop_assert_eq!(&back[0].0, "u");
        prop_assert_eq!(&back[0].1, &f);
        prop_assert_eq!(&back[1].1, &g);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn one_step_conserves_mass_and_gauss(alpha in 0.0f64..0.2, k in 0.3f64..1.0, temperature in 0.05f64..0.3, dt in 0.01f64..0.06) {
        let spec = EquilibriumSpec { nx: 64, ns: 64, alpha, wavenumber: k, temperature, ..Default::default() };
        let mut s = perturbed_equilibrium(&spec).unwrap();
        let m0 = s.mass();
        let audit = step(&mut s, &SchemeConfig { dt, order: 2, cfl: 1.0 }).unwrap();
        prop_assert!((audit.mass - m0).abs() <= 1e-12 * m0);
        prop_assert!(s.u.data().iter().all(|v| *v >= 0.0));
        prop_assert!(audit.gauss_residual < 1e-8, "{}", audit.gauss_residual);
    }
}
