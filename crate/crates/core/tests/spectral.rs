mod common;

use nalgebra::{Complex, DMatrix};
use overcrit::model::{Band, Boundary, HermitianOperator, ModelConfig, TwoBandModel, Window};
use overcrit::scalar::frobenius;
use overcrit::spectral::{
    decompose, dive_curve, find_lambda_c, gap_states, spectral_projector, DiveCurve,
};
use overcrit::{Error, Lattice};

fn lattice(cfg: &ModelConfig) -> Lattice {
    Lattice::new(TwoBandModel::from_config(cfg).unwrap()).unwrap()
}

/// Deterministic unitary from the Cayley transform of a fixed Hermitian
/// matrix.
fn known_unitary(n: usize) -> DMatrix<Complex<f64>> {
    let a = DMatrix::from_fn(n, n, |i, j| {
        let x = (i * 7 + j * 3) as f64;
        Complex::new((0.3 * x).sin(), (0.7 * x + 1.0).cos())
    });
    let h = (&a + a.adjoint()) * Complex::new(0.5, 0.0);
    let i = Complex::new(0.0, 1.0);
    let id = DMatrix::identity(n, n);
    let num = &id - &h * i;
    let den = (&id + &h * i).try_inverse().unwrap();
    num * den
}

#[test]
fn reconstruction_of_random_hermitian() {
    let u = known_unitary(8);
    let lambda = [-3.0, -1.25, -0.5, 0.0, 0.1, 0.7, 2.0, 4.5];
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(8, lambda.iter().map(|&x| Complex::new(x, 0.0))));
    let h = &u * d * u.adjoint();
    let h = (&h + h.adjoint()) * Complex::new(0.5, 0.0);
    let op = HermitianOperator::new(h.clone()).unwrap();
    let dec = decompose(&op).unwrap();
    assert!(dec.reconstruction_residual(&h) < 1e-12);
    assert!(dec.orthonormality_defect() < 1e-12);
    for (a, b) in dec.eigenvalues.iter().zip(lambda) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn projector_algebra_on_reference() {
    let sys = Lattice::reference();
    let b = *sys.bands();
    for lambda in [0.0, 0.6, 1.4] {
        let dec = decompose(&sys.h_lambda(lambda)).unwrap();
        // Half-line windows: bound states pushed below the lower band count
        // as sigma-.
        let pm = spectral_projector(&dec, b.classification_window(Band::Lower));
        let pg = spectral_projector(&dec, b.classification_window(Band::Gap));
        let pp = spectral_projector(&dec, b.classification_window(Band::Upper));
        let dim = sys.dim();
        let id = DMatrix::<Complex<f64>>::identity(dim, dim);
        assert!(frobenius(&(&pm.matrix + &pg.matrix + &pp.matrix - &id)) < 1e-10);
        for p in [&pm, &pg, &pp] {
            assert!(p.idempotence_defect() < 1e-10);
            assert!(p.hermiticity_defect() < 1e-10);
        }
        assert!(frobenius(&(&pm.matrix * &pp.matrix)) < 1e-10);
        assert!(frobenius(&(&pm.matrix * &pg.matrix)) < 1e-10);
        assert!(frobenius(&(&pg.matrix * &pp.matrix)) < 1e-10);
        if lambda == 0.0 {
            assert_eq!(pm.rank, 256);
            assert_eq!(pg.rank, 0);
            let all = spectral_projector(&dec, Window::everything());
            assert!(frobenius(&(&all.matrix - &id)) < 1e-10);
        }
    }
}

#[test]
fn critical_coupling_matches_scan_oracle() {
    let configs = [
        common::small_config(64, 2),
        common::small_config(64, 4),
        ModelConfig { well_depth: 0.7, ..common::small_config(80, 3) },
        ModelConfig { boundary: Boundary::Box, ..common::small_config(64, 3) },
    ];
    let tol = 1e-3;
    for cfg in &configs {
        let found = find_lambda_c(&lattice(cfg), tol).unwrap();
        let scan = common::scan_lambda_c(cfg, 0.02, tol / 10.0);
        assert!((found.lambda_c - scan).abs() <= tol, "{cfg:?}: {} vs {scan}", found.lambda_c);
        assert!(found.bracket.0 <= found.lambda_c && found.lambda_c <= found.bracket.1);
        assert!(found.bracket.1 - found.bracket.0 <= tol);
    }
}

#[test]
fn reference_critical_coupling() {
    // Frozen from the inertia-count scan at resolution 1e-7.
    let found = find_lambda_c(&Lattice::reference(), 1e-8).unwrap();
    assert!((found.lambda_c - 1.152_242_2).abs() < 1e-7, "{}", found.lambda_c);
    assert!((found.edge_margin - 1e-3).abs() < 1e-12);
}

#[test]
fn doubling_depth_halves_critical_coupling() {
    let cfg = common::small_config(64, 3);
    let deep = ModelConfig { well_depth: 2.0, ..cfg.clone() };
    let a = find_lambda_c(&lattice(&cfg), 1e-7).unwrap().lambda_c;
    let b = find_lambda_c(&lattice(&deep), 1e-7).unwrap().lambda_c;
    assert!((2.0 * b / a - 1.0).abs() < 0.01);
}

#[test]
fn zero_depth_never_dives() {
    let cfg = ModelConfig { well_depth: 0.0, ..common::small_config(32, 2) };
    assert!(matches!(find_lambda_c(&lattice(&cfg), 1e-6), Err(Error::NoDive { .. })));
}

#[test]
fn gap_states_match_birman_schwinger() {
    let cfg = ModelConfig::reference();
    let sys = Lattice::reference();
    let lambda_c = find_lambda_c(&sys, 1e-8).unwrap().lambda_c;
    for multiple in [0.5, 0.9] {
        let lambda = multiple * lambda_c;
        let dec = decompose(&sys.h_lambda(lambda)).unwrap();
        let found: Vec<f64> = gap_states(&dec, sys.bands()).into_iter().map(|(e, _)| e).collect();
        let oracle = common::birman_schwinger_levels(&cfg, lambda, 1e-12);
        assert_eq!(found.len(), oracle.len(), "{found:?} vs {oracle:?}");
        for (a, b) in found.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
        if multiple == 0.5 {
            let frozen = [0.0203, 0.2299, 0.4584];
            for (a, b) in found.iter().zip(frozen) {
                assert!((a - b).abs() < 1e-4);
            }
        }
    }
}

#[test]
fn no_gap_states_without_coupling() {
    let sys = Lattice::reference();
    assert!(gap_states(sys.h0_decomposition(), sys.bands()).is_empty());
}

#[test]
fn gap_state_just_below_critical_is_near_lower_edge() {
    let sys = Lattice::reference();
    let lc = find_lambda_c(&sys, 1e-8).unwrap().lambda_c;
    let dec = decompose(&sys.h_lambda(0.999 * lc)).unwrap();
    let states = gap_states(&dec, sys.bands());
    let b = sys.bands();
    let e = states.first().expect("a gap state below lambda_c").0;
    assert!(e > b.lower_max && e < b.lower_max + 0.1 * b.gap_width(), "{e}");
}

#[test]
fn weak_coupling_gap_state() {
    // At 0.1 lambda_c a single bound state has already detached by 0.0645
    // below a+, further than the 0.05 the weak-coupling picture suggests.
    let sys = Lattice::reference();
    let lc = find_lambda_c(&sys, 1e-8).unwrap().lambda_c;
    let dec = decompose(&sys.h_lambda(0.1 * lc)).unwrap();
    let states = gap_states(&dec, sys.bands());
    assert_eq!(states.len(), 1);
    let depth = sys.bands().upper_min - states[0].0;
    assert!((states[0].0 - 0.43555).abs() < 1e-5, "{}", states[0].0);
    assert!((depth - 0.0645).abs() < 1e-3);
}

fn grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect()
}

#[test]
fn dive_curve_crosses_the_gap() {
    let sys = Lattice::reference();
    let lc = find_lambda_c(&sys, 1e-8).unwrap().lambda_c;
    let curve = dive_curve(&sys, &grid(0.0, 2.0 * lc, 101)).unwrap();
    assert!(curve.dived);
    assert!(!curve.is_empty());
    let b = sys.bands();
    assert!(curve.energies.first().unwrap() < &b.upper_min);
    assert!(curve.energies.first().unwrap() > &(b.upper_min - 0.05));
    assert!(curve.energies.last().unwrap() <= &(b.lower_max + 1e-3 * b.gap_width()));
    assert!(curve.energies.windows(2).all(|w| w[1] < w[0]));
    assert!(curve.overlaps.iter().all(|&o| o >= 0.8));
    assert!(*curve.lambdas.last().unwrap() <= lc + 2.0 * lc / 100.0);
}

#[test]
fn dive_curve_is_grid_independent() {
    let cfg = common::small_config(64, 3);
    let sys = lattice(&cfg);
    let lc = find_lambda_c(&sys, 1e-8).unwrap().lambda_c;
    let coarse = dive_curve(&sys, &grid(0.0, 2.0 * lc, 51)).unwrap();
    let fine = dive_curve(&sys, &grid(0.0, 2.0 * lc, 101)).unwrap();
    let mut common_points = 0;
    for (i, l) in coarse.lambdas.iter().enumerate() {
        if let Some(j) = fine.lambdas.iter().position(|x| (x - l).abs() < 1e-12) {
            assert!((coarse.energies[i] - fine.energies[j]).abs() < 1e-6);
            common_points += 1;
        }
    }
    assert!(common_points > 10);
}

#[test]
fn dive_curve_empty_before_detachment() {
    let cfg = common::small_config(64, 3);
    let sys = lattice(&cfg);
    // Any attractive well binds in one dimension, so only lambda = 0 lies
    // below detachment.
    let curve = dive_curve(&sys, &[0.0]).unwrap();
    assert!(curve.is_empty());
    assert!(!curve.dived);
}

#[test]
fn dive_curve_csv_columns() {
    let curve = DiveCurve { lambdas: vec![0.5, 1.0], energies: vec![0.3, -0.2], overlaps: vec![1.0, 0.95], dived: true };
    let mut buf = Vec::new();
    curve.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next().unwrap(), "lambda,energy,overlap");
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn outputs_invariant_under_eigenvector_phases() {
    let sys = Lattice::reference();
    let dec = decompose(&sys.h_lambda(0.8)).unwrap();
    let mut rotated = dec.clone();
    for (j, mut col) in rotated.eigenvectors.column_iter_mut().enumerate() {
        col *= Complex::from_polar(1.0, 0.37 * j as f64 + 0.1);
    }
    let b = *sys.bands();
    for w in [b.sigma_minus(), b.gap(), b.sigma_plus()] {
        let p = spectral_projector(&dec, w);
        let q = spectral_projector(&rotated, w);
        assert_eq!(p.rank, q.rank);
        assert!(frobenius(&(&p.matrix - &q.matrix)) < 1e-12);
    }
    let v = sys.from_eigenbasis(&nalgebra::DVector::from_fn(sys.dim(), |i, _| Complex::new((i as f64).cos(), 0.0)));
    let gap = b.gap();
    assert!((dec.projected_norm(&v, &gap) - rotated.projected_norm(&v, &gap)).abs() < 1e-12);
}
