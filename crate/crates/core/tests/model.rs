use std::path::PathBuf;

use hmm_emt::dt::{network_coefficients, system_coefficients};
use hmm_emt::hmm::{equilibrium_residual, initialize, EventSchedule, InitOptions};
use hmm_emt::model::{load_case, load_case_file, SystemModel};
use hmm_emt::network::TopologyEvent;

fn case_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(format!("../../cases/{name}.toml"))
}

fn model(name: &str) -> SystemModel {
    SystemModel::new(load_case_file(&case_path(name)).unwrap()).unwrap()
}

#[test]
fn two_area_dimensions() {
    let m = model("two_area");
    let l = m.layout();
    assert_eq!((l.n_nodes(), l.n_edges(), l.n_sources()), (11, 14, 4));
    assert_eq!((l.len(), l.n_slow(), l.n_fast()), (125, 38, 87));
    assert_eq!(l.n_fast(), 3 * l.n_triples());
    for name in ["gen2.domega", "v.bus8.a", "i.ibr1.c"] {
        assert!(l.index_of(name).is_some(), "{name}");
    }
    assert!(m.branch_between(7, 8).is_some());
    assert_eq!(m.branch_between(7, 8), m.branch_between(8, 7));
}

#[test]
fn initial_state_is_an_equilibrium() {
    for name in ["desk", "two_area"] {
        let m = model(name);
        let x0 = initialize(&m, &InitOptions::default()).unwrap();
        let (res, worst) = equilibrium_residual(&m, &x0, 0.0);
        assert!(res < 1e-6, "{name}: residual {res:.2e} at {}", m.layout().name(worst));
    }
}

#[test]
fn first_two_series_coefficients() {
    // X[1] = f(x, t) and X[2] = (d/dt) f / 2 along the solution
    let m = model("two_area");
    let x0 = initialize(&m, &InitOptions::default()).unwrap();
    let mut x: Vec<f64> = x0.iter().enumerate().map(|(i, v)| v + 1e-3 * (i as f64).sin()).collect();
    m.clamp_bounds(&mut x);
    let t0 = 0.013;
    let s = system_coefficients(&m, &x, t0, 4).unwrap();
    let f = m.rhs_vec(&x, t0);
    for (i, fi) in f.iter().enumerate() {
        assert!((s.coeff(i, 1) - fi).abs() <= 1e-10 * (1.0 + fi.abs()), "{}", m.layout().name(i));
    }
    let d = 1e-7;
    let shift = |sign: f64| -> Vec<f64> { x.iter().zip(&f).map(|(x, f)| x + sign * d * f).collect() };
    let fp = m.rhs_vec(&shift(1.0), t0 + d);
    let fm = m.rhs_vec(&shift(-1.0), t0 - d);
    for i in 0..x.len() {
        let want = (fp[i] - fm[i]) / (4.0 * d);
        let scale = 1.0 + want.abs() + f[i].abs();
        assert!((s.coeff(i, 2) - want).abs() <= 1e-4 * scale, "{}: {} vs {want}", m.layout().name(i), s.coeff(i, 2));
    }
}

#[test]
fn fault_apply_and_clear_restore_the_network() {
    let mut m = model("two_area");
    let before = m.network().clone();
    let mut x = m.operating_point().to_vec();
    let x_before = x.clone();
    let fault = TopologyEvent::ApplyFault { bus: 8, conductance: 0.0945 };
    m.apply_event(&hmm_emt::model::Event::Network(fault), 1.0, &mut x).unwrap();
    assert_ne!(m.network(), &before);
    m.apply_event(&hmm_emt::model::Event::Network(TopologyEvent::ClearFault { bus: 8 }), 1.1, &mut x)
        .unwrap();
    assert_eq!(m.network(), &before);
    assert_eq!(x, x_before);
}

#[test]
fn network_series_checks_dimensions() {
    let m = model("desk");
    let net = m.network();
    assert!(network_coefficients(net, &[0.0; 2], &[], 5).is_err());
    let psi = vec![0.0; net.dim()];
    assert!(network_coefficients(net, &psi, &[vec![0.0; 1]], 5).is_err());
    let (s, q) = network_coefficients(net, &psi, &[], 5).unwrap();
    assert_eq!(q, 0.0);
    assert_eq!(s.order(), 5);
}

#[test]
fn case_validation_errors() {
    let base = std::fs::read_to_string(case_path("desk")).unwrap();
    assert!(load_case(&base).is_ok());
    assert!(load_case(&format!("{base}\n[extra]\nkey = 1\n")).is_err());
    assert!(load_case(&base.replacen("nominal_kv", "nominal_kV", 1)).is_err());
    assert!(load_case("[system]\nbase_mva = 100.0\n").is_err());
}

#[test]
fn schedule_validation() {
    let ok = "[[events]]\ntime = 1.0\nkind = \"fault\"\nbus = 8\nconductance = 0.1\n\
              [[events]]\ntime = 1.1\nkind = \"clear_fault\"\nbus = 8\n";
    assert_eq!(EventSchedule::parse(ok).unwrap().events().len(), 2);
    let unordered = "[[events]]\ntime = 2.0\nkind = \"trip_line\"\nline = 1\n\
                     [[events]]\ntime = 1.0\nkind = \"trip_line\"\nline = 2\n";
    assert!(EventSchedule::parse(unordered).is_err());
    let uncleared = "[[events]]\ntime = 1.0\nkind = \"clear_fault\"\nbus = 8\n";
    assert!(EventSchedule::parse(uncleared).is_err());
    let twice = "[[events]]\ntime = 1.0\nkind = \"fault\"\nbus = 8\n\
                 [[events]]\ntime = 1.1\nkind = \"fault\"\nbus = 8\n";
    assert!(EventSchedule::parse(twice).is_err());
    assert!(EventSchedule::parse("").unwrap().is_empty());
}
