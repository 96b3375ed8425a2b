use hmm_emt::dt::{
    defect_error, dt_product, dt_reciprocal, dt_sin_cos, select_step, DtSeries, MicroConfig, TapeBuilder,
};
use proptest::prelude::*;

fn coeffs(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, len)
}

#[test]
fn step_selection_inverts_the_defect() {
    let (q, eps1, order) = (3.7e40, 1e-2, 30);
    let h = select_step(q, eps1, order, 1e-9, 1.0);
    assert!((defect_error(q, h, order) / eps1 - 1.0).abs() < 1e-10);
    // unclamped h is about 0.038
    assert_eq!(select_step(q, eps1, order, 0.1, 1.0), 0.1);
    assert_eq!(select_step(q, eps1, order, 1e-6, 0.01), 0.01);
    assert_eq!(select_step(0.0, eps1, order, 1e-6, 330e-6), 330e-6);
}

#[test]
fn micro_config_validation() {
    assert!(MicroConfig::default().validate().is_ok());
    assert!(MicroConfig::fixed(0, 1e-5).validate().is_err());
    assert!(MicroConfig::fixed(10, 0.0).validate().is_err());
    assert!(MicroConfig::defect(30, 1e-2, 1e-3, 1e-6).validate().is_err());
    assert!(MicroConfig::defect(30, -1.0, 1e-6, 1e-3).validate().is_err());
}

#[test]
fn reciprocal_rejects_zero_leading_term() {
    let s = DtSeries::from_rows(&[vec![0.0, 1.0, 0.0]], 0.0).unwrap();
    assert!(dt_reciprocal(&s).is_err());
}

#[test]
fn harmonic_oscillator_series() {
    // x' = y, y' = -x from (1, 0): x = cos t
    let b = TapeBuilder::new();
    let (x, y) = (b.state(0), b.state(1));
    b.output(0, y);
    b.output(1, -x);
    let s = b.finish().expand(&[1.0, 0.0], 0.0, 25);
    let v = s.evaluate(0.7);
    assert!((v[0] - 0.7f64.cos()).abs() < 1e-14);
    assert!((v[1] + 0.7f64.sin()).abs() < 1e-14);
}

proptest! {
    #[test]
    fn product_evaluates_to_product(a in coeffs(8), b in coeffs(8), h in -0.5f64..0.5) {
        // degree-7 inputs need order 14 to hold the full product
        let pad = |v: &[f64]| { let mut r = v.to_vec(); r.resize(15, 0.0); r };
        let sa = DtSeries::from_rows(&[pad(&a)], 0.0).unwrap();
        let sb = DtSeries::from_rows(&[pad(&b)], 0.0).unwrap();
        let p = dt_product(&sa, &sb).unwrap();
        let want = sa.evaluate(h)[0] * sb.evaluate(h)[0];
        prop_assert!((p.evaluate(h)[0] - want).abs() < 1e-12 * (1.0 + want.abs()));
    }

    #[test]
    fn sin_cos_of_linear_angle(theta in -10.0f64..10.0, w in -400.0f64..400.0, h in 0.0f64..1e-3) {
        let angle = DtSeries::from_rows(&[{ let mut r = vec![0.0; 21]; r[0] = theta; r[1] = w; r }], 0.0).unwrap();
        let (s, c) = dt_sin_cos(&angle);
        let arg = theta + w * h;
        prop_assert!((s.evaluate(h)[0] - arg.sin()).abs() < 1e-12);
        prop_assert!((c.evaluate(h)[0] - arg.cos()).abs() < 1e-12);
    }

    #[test]
    fn reciprocal_times_series_is_one(a in coeffs(10), lead in 0.5f64..3.0) {
        let mut row = a.clone();
        row[0] = lead;
        let s = DtSeries::from_rows(&[row], 0.0).unwrap();
        let p = dt_product(&s, &dt_reciprocal(&s).unwrap()).unwrap();
        for k in 0..10 {
            let want = if k == 0 { 1.0 } else { 0.0 };
            prop_assert!((p.coeff(0, k) - want).abs() < 1e-9);
        }
    }

    #[test]
    fn derivative_of_evaluation(a in coeffs(12), h in -0.8f64..0.8) {
        let s = DtSeries::from_rows(std::slice::from_ref(&a), 0.0).unwrap();
        let (v, d) = s.evaluate_with_derivative(h);
        let want_d: f64 = a.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c * h.powi(k as i32 - 1)).sum();
        let want_v: f64 = a.iter().enumerate().map(|(k, c)| c * h.powi(k as i32)).sum();
        prop_assert!((v[0] - want_v).abs() < 1e-12 * (1.0 + want_v.abs()));
        prop_assert!((d[0] - want_d).abs() < 1e-11 * (1.0 + want_d.abs()));
    }
}
