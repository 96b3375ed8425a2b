use std::f64::consts::PI;

use hmm_emt::transforms::{
    inverse_park, inverse_park_matrix, park, park_matrix, park_norm_bound, park_norm_sampled, rotate_dq_diagonal,
};
use proptest::prelude::*;

#[test]
fn norm_bound_is_attained() {
    let sampled = park_norm_sampled(3600);
    assert!(sampled <= park_norm_bound() + 1e-12);
    assert!((sampled - park_norm_bound()).abs() < 1e-9);
}

proptest! {
    #[test]
    fn round_trip(theta in -100.0f64..100.0, a in -5.0f64..5.0, b in -5.0f64..5.0, c in -5.0f64..5.0) {
        let back = inverse_park(theta, park(theta, [a, b, c]));
        for (x, y) in [a, b, c].iter().zip(back) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn balanced_set_is_constant(mag in 0.1f64..2.0, phase in -PI..PI, t in 0.0f64..1.0) {
        // a positive-sequence set rotating with θ maps to fixed dq values
        let w = 2.0 * PI * 60.0;
        let th = w * t;
        let abc = [0.0, -2.0 * PI / 3.0, 2.0 * PI / 3.0].map(|s| mag * (th + phase + s).cos());
        let dq0 = park(th, abc);
        prop_assert!(dq0[0].abs() < 1e-12);
        prop_assert!((dq0[1] - mag * phase.cos()).abs() < 1e-12);
        prop_assert!((dq0[2] - mag * phase.sin()).abs() < 1e-12);
    }

    #[test]
    fn matrices_are_inverse(theta in -20.0f64..20.0) {
        let p = park_matrix(theta);
        let pi = inverse_park_matrix(theta);
        for (r, row) in pi.iter().enumerate() {
            for c in 0..3 {
                let v: f64 = row.iter().zip(&p).map(|(a, pk)| a * pk[c]).sum();
                let want = if r == c { 1.0 } else { 0.0 };
                prop_assert!((v - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn equal_dq_entries_give_rotation_invariant_operator(l in 0.01f64..1.0, l0 in 0.01f64..1.0, theta in -10.0f64..10.0) {
        // with L_d = L_q the abc operator no longer depends on θ
        let a = rotate_dq_diagonal([l0, l, l], theta);
        let b = rotate_dq_diagonal([l0, l, l], 0.0);
        for r in 0..3 {
            for c in 0..3 {
                prop_assert!((a[r][c] - b[r][c]).abs() < 1e-13);
            }
        }
    }
}
