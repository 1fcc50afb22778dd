mod common;

use nalgebra::DMatrix;
use overcrit::model::{
    build_h0, build_potential, chiral_operator, h_of, Band, Boundary, ModelConfig, TwoBandModel,
};
use overcrit::scalar::frobenius;
use overcrit::spectral::eigenvalues;
use overcrit::{Lattice, Model};

fn model(cfg: &ModelConfig) -> Model {
    TwoBandModel::from_config(cfg).unwrap()
}

#[test]
fn h0_matches_difference_equation() {
    for boundary in [Boundary::Periodic, Boundary::Box] {
        let cfg = ModelConfig { boundary, ..common::small_config(24, 2) };
        let h = build_h0(&model(&cfg)).unwrap();
        let oracle = common::hamiltonian(&cfg, 0.0);
        assert!(frobenius(&(h.matrix() - &oracle)) < 1e-14, "{boundary:?}");
    }
}

#[test]
fn coupled_hamiltonian_matches_difference_equation() {
    let cfg = common::small_config(32, 3);
    let sys = Lattice::new(model(&cfg)).unwrap();
    let h = sys.h_lambda(0.73);
    assert!(frobenius(&(h.matrix() - common::hamiltonian(&cfg, 0.73))) < 1e-14);
}

#[test]
fn decoupled_sigma_z_spectrum() {
    for n in [4, 9, 16] {
        let cfg = ModelConfig { n_sites: n, hopping: 0.0, wilson: 0.0, well_halfwidth: 1, ..ModelConfig::reference() };
        let ev = eigenvalues(&build_h0(&model(&cfg)).unwrap()).unwrap();
        assert_eq!(ev.len(), 2 * n);
        assert!(ev[..n].iter().all(|e| (e + 0.5).abs() < 1e-14));
        assert!(ev[n..].iter().all(|e| (e - 0.5).abs() < 1e-14));
        let b = overcrit::model::band_edges(&ev, &model(&cfg)).unwrap();
        assert_eq!((b.lower_min, b.lower_max, b.upper_min, b.upper_max), (-0.5, -0.5, 0.5, 0.5));
    }
}

#[test]
fn eight_site_spectrum_matches_dispersion() {
    let cfg = ModelConfig { n_sites: 8, well_halfwidth: 1, ..ModelConfig::reference() };
    let ev = eigenvalues(&build_h0(&model(&cfg)).unwrap()).unwrap();
    let oracle = common::periodic_spectrum(&cfg);
    for (a, b) in ev.iter().zip(&oracle) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
}

#[test]
fn reference_band_edges_match_dispersion_extrema() {
    let cfg = ModelConfig::reference();
    let sys = Lattice::reference();
    let oracle = common::periodic_spectrum(&cfg);
    let n = cfg.n_sites;
    let b = sys.bands();
    assert!((b.lower_min - oracle[0]).abs() < 1e-12);
    assert!((b.lower_max - oracle[n - 1]).abs() < 1e-12);
    assert!((b.upper_min - oracle[n]).abs() < 1e-12);
    assert!((b.upper_max - oracle[2 * n - 1]).abs() < 1e-12);
    // Extrema at k = 0 and k = pi.
    assert!((b.upper_min - 0.5).abs() < 1e-12);
    assert!((b.upper_max - 2.5).abs() < 1e-12);
}

#[test]
fn box_band_edges_match_inertia_oracle() {
    let cfg = ModelConfig { boundary: Boundary::Box, ..common::small_config(40, 2) };
    let sys = Lattice::new(model(&cfg)).unwrap();
    let (b_minus, a_plus) = common::band_edges(&cfg);
    assert!((sys.bands().lower_max - b_minus).abs() < 1e-10);
    assert!((sys.bands().upper_min - a_plus).abs() < 1e-10);
}

#[test]
fn chiral_symmetry_mirrors_band_edges() {
    for (n, boundary) in [(12, Boundary::Periodic), (15, Boundary::Box), (64, Boundary::Periodic)] {
        let cfg = ModelConfig { n_sites: n, boundary, well_halfwidth: 1, ..ModelConfig::reference() };
        let m = model(&cfg);
        let h = build_h0(&m).unwrap();
        let g = chiral_operator::<f64>(n);
        assert!(frobenius(&(&g * h.matrix() * &g + h.matrix())) < 1e-13);
        let b = *Lattice::new(m).unwrap().bands();
        assert!((b.lower_max + b.upper_min).abs() < 1e-12);
        assert!((b.lower_min + b.upper_max).abs() < 1e-12);
    }
}

#[test]
fn h0_is_exactly_hermitian() {
    for cfg in [ModelConfig::reference(), ModelConfig { boundary: Boundary::Box, ..common::small_config(33, 5) }] {
        let h = build_h0(&model(&cfg)).unwrap();
        assert_eq!(frobenius(&(h.matrix() - h.matrix().adjoint())), 0.0);
    }
}

#[test]
fn reference_potential_trace_and_shape() {
    let m = Model::reference();
    let v = build_potential(&m).unwrap();
    let trace: f64 = v.matrix().diagonal().iter().map(|z| z.re).sum();
    assert_eq!(trace, -18.0);
    assert!(v.real_diagonal().is_some());
    assert!(v.matrix().iter().all(|z| z.im == 0.0));
    let off: f64 = v
        .matrix()
        .iter()
        .enumerate()
        .filter(|(i, _)| i % (m.dim() + 1) != 0)
        .map(|(_, z)| z.norm())
        .sum();
    assert_eq!(off, 0.0);
}

#[test]
fn zero_depth_gives_zero_potential() {
    let cfg = ModelConfig { well_depth: 0.0, ..common::small_config(16, 2) };
    let v = build_potential(&model(&cfg)).unwrap();
    assert_eq!(frobenius(v.matrix()), 0.0);
}

#[test]
fn coupling_enters_affinely() {
    let m = TwoBandModel::<f64>::from_config(&common::small_config(20, 2)).unwrap();
    let h0 = build_h0(&m).unwrap();
    let v = build_potential(&m).unwrap();
    assert_eq!(h_of(&h0, &v, 0.0).matrix(), h0.matrix());
    assert_eq!(h_of(&h0, &v, 1.0).matrix(), &(h0.matrix() + v.matrix()));
    let a = 0.37;
    let diff = h_of(&h0, &v, 2.0 * a).matrix() - h_of(&h0, &v, a).matrix();
    assert!(frobenius(&(diff - v.matrix() * nalgebra::Complex::new(a, 0.0))) < 1e-15);
}

#[test]
fn potential_is_a_nontrivial_perturbation() {
    let m = TwoBandModel::<f64>::from_config(&common::small_config(24, 2)).unwrap();
    let h0 = build_h0(&m).unwrap();
    let v = build_potential(&m).unwrap();
    let comm = v.matrix() * h0.matrix() - h0.matrix() * v.matrix();
    assert!(frobenius(&comm) > 0.1);
    // V commutes with the projection onto its support.
    let mut p = DMatrix::zeros(m.dim(), m.dim());
    for s in m.well_sites() {
        p[(2 * s, 2 * s)] = common::c(1.0, 0.0);
        p[(2 * s + 1, 2 * s + 1)] = common::c(1.0, 0.0);
    }
    assert_eq!(frobenius(&(v.matrix() * &p - &p * v.matrix())), 0.0);
}

#[test]
fn gap_open_for_reference_family() {
    for n in [64, 100, 256] {
        for mass in [0.1, 0.5, 1.0] {
            let cfg = ModelConfig { n_sites: n, mass, ..ModelConfig::reference() };
            let sys = Lattice::new(model(&cfg)).unwrap();
            assert!(sys.bands().gap_width() > 0.0);
            assert_eq!(sys.bands().classify(0.0), Band::Gap);
        }
    }
}

#[test]
fn invalid_models_rejected() {
    let bad = [
        ModelConfig { n_sites: 0, ..ModelConfig::reference() },
        ModelConfig { mass: f64::NAN, ..ModelConfig::reference() },
        ModelConfig { well_depth: -1.0, ..ModelConfig::reference() },
        ModelConfig { well_halfwidth: 200, ..ModelConfig::reference() },
        ModelConfig { well_center: Some(256), ..ModelConfig::reference() },
    ];
    for cfg in bad {
        assert!(TwoBandModel::<f64>::from_config(&cfg).is_err(), "{cfg:?}");
    }
}

#[test]
fn json_keys_are_exactly_the_model_fields() {
    let text = serde_json::to_string(&ModelConfig::reference()).unwrap();
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    let mut keys: Vec<_> = value.as_object().unwrap().keys().cloned().collect();
    keys.sort();
    assert_eq!(
        keys,
        ["boundary", "hopping", "mass", "n_sites", "well_center", "well_depth", "well_halfwidth", "wilson"]
    );
    let parsed: ModelConfig = serde_json::from_str(r#"{"boundary": "box", "n_sites": 32}"#).unwrap();
    assert_eq!(parsed.boundary, Boundary::Box);
    assert_eq!(parsed.mass, 0.5);
    assert!(serde_json::from_str::<ModelConfig>(r#"{"masss": 1}"#).is_err());
}

#[test]
fn reflection_time_of_reference_chain() {
    let m = Model::reference();
    // v_max = 1 at cos k = 2/3.
    assert!((m.max_group_velocity() - 1.0).abs() < 1e-6);
    assert!((m.reflection_time() - 128.0).abs() < 1e-3);
}

#[test]
fn single_precision_model_agrees() {
    let cfg = common::small_config(16, 1);
    let a = Lattice::new(model(&cfg)).unwrap();
    let b = overcrit::LatticeF32::new(TwoBandModel::from_config(&cfg).unwrap()).unwrap();
    for (x, y) in a.energies().iter().zip(b.energies()) {
        assert!((x - *y as f64).abs() < 1e-5);
    }
}
