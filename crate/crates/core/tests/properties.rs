use nalgebra::DMatrix;
use proptest::prelude::*;

use nmlr::io::{format_matrix_csv, parse_matrix_csv};
use nmlr::linalg::inner;
use nmlr::{
    frobenius_norm, lambda_max, nuclear_norm, project_spectral_ball, singular_values,
    spectral_norm, v1, v2, v3, AdmmConfig, Matrix, ReferenceSolution, Screener,
};

fn matrix(rows: std::ops::RangeInclusive<usize>, cols: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = DMatrix<f64>> {
    (rows, cols).prop_flat_map(|(r, c)| {
        proptest::collection::vec(-3.0f64..3.0, r * c).prop_map(move |v| DMatrix::from_vec(r, c, v))
    })
}

fn same_shape_pair() -> impl Strategy<Value = (DMatrix<f64>, DMatrix<f64>)> {
    (1usize..=7, 1usize..=7).prop_flat_map(|(r, c)| {
        let m = || proptest::collection::vec(-3.0f64..3.0, r * c).prop_map(move |v| DMatrix::from_vec(r, c, v));
        (m(), m())
    })
}

fn problem() -> impl Strategy<Value = (DMatrix<f64>, DMatrix<f64>)> {
    (4usize..=9, 2usize..=6, 2usize..=5).prop_flat_map(|(n, p, q)| {
        (
            proptest::collection::vec(-2.0f64..2.0, n * p).prop_map(move |v| DMatrix::from_vec(n, p, v)),
            proptest::collection::vec(-2.0f64..2.0, n * q).prop_map(move |v| DMatrix::from_vec(n, q, v)),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projection_lands_in_ball_and_is_idempotent(m in matrix(1..=8, 1..=8), radius in 0.05f64..4.0) {
        let p = project_spectral_ball(&m, radius).unwrap();
        prop_assert!(spectral_norm(&p).unwrap() <= radius * (1.0 + 1e-10));
        let again = project_spectral_ball(&p, radius).unwrap();
        prop_assert!((&again - &p).amax() <= 1e-10 * (1.0 + p.amax()));
        if spectral_norm(&m).unwrap() <= radius {
            prop_assert!((&p - &m).amax() <= 1e-10 * (1.0 + m.amax()));
        }
    }

    #[test]
    fn projection_is_firmly_nonexpansive((a, b) in same_shape_pair(), radius in 0.05f64..4.0) {
        let pa = project_spectral_ball(&a, radius).unwrap();
        let pb = project_spectral_ball(&b, radius).unwrap();
        let lhs = (&pa - &pb).norm_squared();
        prop_assert!(lhs <= inner(&(&pa - &pb), &(&a - &b)) + 1e-9);
        prop_assert!(lhs.sqrt() <= (&a - &b).norm() + 1e-9);
    }

    #[test]
    fn projection_satisfies_variational_inequality((a, w) in same_shape_pair(), radius in 0.05f64..4.0) {
        // any point of the ball makes an obtuse angle with A − P(A) at P(A)
        let pa = project_spectral_ball(&a, radius).unwrap();
        let inside = project_spectral_ball(&w, radius).unwrap();
        prop_assert!(inner(&(&a - &pa), &(&inside - &pa)) <= 1e-9 * (1.0 + a.norm_squared()));
    }

    #[test]
    fn weyl_sum_inequality((p, q) in same_shape_pair()) {
        let sp = singular_values(&p).unwrap();
        let sq = singular_values(&q).unwrap();
        let ss = singular_values(&(&p + &q)).unwrap();
        let k = ss.len();
        for i in 1..=k {
            for j in 1..=k + 1 - i {
                prop_assert!(ss[i + j - 2] <= sp[i - 1] + sq[j - 1] + 1e-10);
            }
        }
    }

    #[test]
    fn weyl_product_inequality(p in matrix(1..=6, 3..=3), q in matrix(3..=3, 1..=6)) {
        let sp = singular_values(&p).unwrap();
        let sq = singular_values(&q).unwrap();
        let sprod = singular_values(&(&p * &q)).unwrap();
        for i in 1..=sp.len() {
            for j in 1..=sq.len() {
                if i + j - 1 <= sprod.len() {
                    prop_assert!(sprod[i + j - 2] <= sp[i - 1] * sq[j - 1] + 1e-10);
                }
            }
        }
    }

    #[test]
    fn norm_ordering(m in matrix(1..=8, 1..=8)) {
        let spec = spectral_norm(&m).unwrap();
        let fro = frobenius_norm(&m);
        let nuc = nuclear_norm(&m).unwrap();
        let r = (m.nrows().min(m.ncols()) as f64).sqrt();
        let tol = 1e-10 * (1.0 + nuc);
        prop_assert!(spec <= fro + tol);
        prop_assert!(fro <= nuc + tol);
        prop_assert!(nuc <= r * fro + tol);
        prop_assert!(fro <= r * spec + tol);
        let s = singular_values(&m).unwrap();
        prop_assert!(s.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(s.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn csv_round_trip(m in matrix(1..=6, 1..=6)
        .prop_flat_map(|m| {
            let (r, c) = m.shape();
            proptest::collection::vec(proptest::num::f64::NORMAL | proptest::num::f64::ZERO | proptest::num::f64::SUBNORMAL, r * c)
                .prop_map(move |v| DMatrix::from_vec(r, c, v))
        }))
    {
        let m = Matrix::from_dmatrix(m).unwrap();
        let mut buf = Vec::new();
        format_matrix_csv(&m, &mut buf).unwrap();
        let back: Matrix<f64> = parse_matrix_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back, m);
    }

    #[test]
    fn first_threshold_is_lambda_max_at_the_top((x, y) in problem()) {
        let lmax = lambda_max(&x, &y).unwrap();
        prop_assume!(lmax > 1e-6);
        let reference = ReferenceSolution::at_lambda_max(&x, &y).unwrap();
        let screener = Screener::new(&x, &y, &reference).unwrap();
        for t in [screener.psr_threshold(1).unwrap(), screener.psrfn_threshold(1).unwrap()] {
            let value = t.value.unwrap();
            prop_assert!((value - lmax).abs() <= 1e-9 * lmax, "{} vs {}", value, lmax);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn v3_is_bounded_and_v1_v2_aligned((x, y) in problem(), frac in 0.3f64..0.9, mu in 0.05f64..0.95) {
        let lmax = lambda_max(&x, &y).unwrap();
        prop_assume!(lmax > 1e-3);
        let lambda0 = frac * lmax;
        let reference = ReferenceSolution::from_admm(&x, &y, lambda0, &AdmmConfig::default()).unwrap();
        let lambda = mu * lambda0;
        let first = v1(&reference, &y).unwrap();
        let second = v2(lambda, &reference, &y).unwrap();
        let third = v3(lambda, &reference, &y).unwrap();
        let u = 1.0 / lambda - 1.0 / lambda0;
        prop_assert!(third.norm() <= u * y.norm() * (1.0 + 1e-9) + 1e-9);
        prop_assert!(inner(&first, &second) >= -1e-6 * (1.0 + first.norm() * second.norm()));
    }
}
