use proptest::prelude::*;
use tase_core::{locate_ep, track_branches, Direction, FieldPoint, LoopSpec, SystemParams};

fn direction() -> impl Strategy<Value = Direction> {
    prop_oneof![Just(Direction::Cw), Just(Direction::Ccw)]
}

/// Loops around the reference EP at (1, 0.2), some enclosing it and some not.
fn loops() -> impl Strategy<Value = LoopSpec> {
    (
        0.7..1.3f64,
        0.15..0.45f64,
        0.02..0.3f64,
        0.02..0.14f64,
        direction(),
        0.0..std::f64::consts::TAU,
    )
        .prop_map(|(w, e, a, b, d, phi)| LoopSpec::new(FieldPoint::new(w, e).unwrap(), a, b, d, 50.0, phi).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn loops_close_exactly(l in loops()) {
        prop_assert_eq!(l.field_at(0.0).unwrap(), l.field_at(l.duration).unwrap());
    }

    #[test]
    fn reversed_loop_retraces_the_path(l in loops(), s in 0.0..1.0f64) {
        let r = l.with_direction(l.direction.reversed());
        let a = l.field_at(s * l.duration).unwrap();
        let b = r.field_at((1.0 - s) * l.duration).unwrap();
        prop_assert!((a.omega - b.omega).abs() < 1e-12 && (a.eps0 - b.eps0).abs() < 1e-12);
    }

    #[test]
    fn winding_follows_rho_and_orientation(l in loops()) {
        let p = SystemParams::reference();
        let rho = l.rho(&locate_ep(&p).unwrap());
        prop_assume!(rho.abs() > 2e-3);
        let w = l.winding_number(&p, 4096).unwrap();
        let expected = if rho > 0.0 { if l.direction == Direction::Ccw { -1 } else { 1 } } else { 0 };
        prop_assert_eq!(w, expected);
        prop_assert_eq!(l.with_direction(l.direction.reversed()).winding_number(&p, 4096).unwrap(), -w);
    }

    #[test]
    fn winding_is_stable_under_resampling(l in loops()) {
        let p = SystemParams::reference();
        prop_assume!(l.rho(&locate_ep(&p).unwrap()).abs() > 0.01);
        let coarse = l.winding_number(&p, 256);
        prop_assume!(coarse.is_ok());
        prop_assert_eq!(coarse.unwrap(), l.winding_number(&p, 8192).unwrap());
    }

    #[test]
    fn branches_swap_exactly_when_the_ep_is_enclosed(l in loops()) {
        let p = SystemParams::reference();
        prop_assume!(l.rho(&locate_ep(&p).unwrap()).abs() > 5e-3);
        let w = l.winding_number(&p, 4096).unwrap();
        let tracked = track_branches(&p, &l, 4096).unwrap();
        prop_assert_eq!(tracked.swapped, w.abs() == 1);
    }
}
