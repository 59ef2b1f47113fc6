mod common;

use approx::assert_relative_eq;
use common::{diagonal_error, exact_parabolic_z, exact_radial_dipole, radial_table_error, RADIAL_TABLE};
use mwion_core::stark::{self, radial_dipole};

#[test]
fn oracle_reproduces_known_closed_forms() {
    assert_relative_eq!(exact_radial_dipole(1, 0, 2, 1), 1.29027, max_relative = 1e-5);
    for &(n, l) in &[(2, 1), (5, 3), (10, 9)] {
        let same = 1.5 * f64::from(n) * f64::from(n * n - l * l).sqrt();
        assert_relative_eq!(exact_radial_dipole(n, l, n, l - 1), same, max_relative = 1e-14);
    }
}

#[test]
fn oracle_is_symmetric() {
    for &(n, l, n2, l2) in &RADIAL_TABLE {
        assert_relative_eq!(exact_radial_dipole(n, l, n2, l2), exact_radial_dipole(n2, l2, n, l), max_relative = 1e-15);
    }
}

#[test]
fn quadrature_matches_low_n_table() {
    let worst = radial_table_error();
    assert!(worst < 1e-8, "worst relative error {worst:e}");
}

#[test]
fn quadrature_matches_per_case_sign() {
    for &(n, l, n2, l2) in &RADIAL_TABLE {
        let got = radial_dipole(n, l, n2, l2).unwrap();
        let want = exact_radial_dipole(n, l, n2, l2);
        assert_eq!(got.signum(), want.signum(), "({n},{l})→({n2},{l2})");
    }
}

#[test]
fn extremal_diagonal_follows_linear_stark_shift() {
    for m in [0, 10, 25] {
        let worst = diagonal_error(m);
        assert!(worst < 1e-8, "m = {m}: worst relative error {worst:e}");
    }
}

#[test]
fn n37_m0_diagonal_is_1998() {
    let basis = stark::build_dipole_matrix(0, 36, 38).unwrap();
    let i = basis.index_of(37).unwrap();
    assert_relative_eq!(basis.z(i, i), 1998.0, max_relative = 1e-10);
}

#[test]
fn parabolic_oracle_gives_linear_stark_diagonal() {
    for (n, n1, n2, m) in [(3u32, 2u32, 0u32, 0i32), (5, 1, 2, 1), (12, 8, 0, 3)] {
        let want = 1.5 * f64::from(n) * (f64::from(n1) - f64::from(n2));
        assert_relative_eq!(exact_parabolic_z((n, n1, n2), (n, n1, n2), m), want, max_relative = 1e-13);
    }
}

#[test]
fn off_diagonal_couplings_match_parabolic_integration() {
    for m in [0, 10] {
        let (lo, hi) = (30u32, 34u32);
        let basis = stark::build_dipole_matrix(m, lo, hi).unwrap();
        let ns: Vec<u32> = (lo..=hi).collect();
        let state = |n: u32| {
            let s = stark::extremal_state(n, m).unwrap();
            (s.n, s.n1, s.n2)
        };
        let mut oracle = vec![vec![0.0; ns.len()]; ns.len()];
        for i in 0..ns.len() {
            for j in i..ns.len() {
                let z = exact_parabolic_z(state(ns[i]), state(ns[j]), m);
                oracle[i][j] = z;
                oracle[j][i] = z;
            }
        }
        let got = |i: usize, j: usize| basis.z(basis.index_of(ns[i]).unwrap(), basis.index_of(ns[j]).unwrap());
        for i in 0..ns.len() {
            for j in 0..ns.len() {
                assert_relative_eq!(got(i, j).abs(), oracle[i][j].abs(), max_relative = 1e-8);
            }
        }
        // Products around closed loops do not depend on per-state phases.
        for i in 0..ns.len() {
            for j in i + 1..ns.len() {
                for k in j + 1..ns.len() {
                    let a = got(i, j) * got(j, k) * got(k, i);
                    let b = oracle[i][j] * oracle[j][k] * oracle[k][i];
                    assert_eq!(a.signum(), b.signum(), "m={m} loop {} {} {}", ns[i], ns[j], ns[k]);
                }
            }
        }
    }
}
