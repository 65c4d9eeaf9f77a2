use extnet::lab::{case_coefficients, TruthRecord};
use extnet::linalg::spd_inverse;
use extnet::ptcc::*;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn pd_matrix() -> impl Strategy<Value = DMatrix<f64>> {
    (3usize..=8).prop_flat_map(|p| {
        prop::collection::vec(-1.0f64..1.0, p * p).prop_map(move |v| {
            let b = DMatrix::from_row_slice(p, p, &v);
            &b * b.transpose() + DMatrix::identity(p, p) * 0.1
        })
    })
}

proptest! {
    #[test]
    fn schur_matches_precision(sigma in pd_matrix()) {
        let p = sigma.nrows();
        let via_q = ptcc_matrix_from_precision(&spd_inverse(&sigma).unwrap()).unwrap();
        for i in 0..p {
            for k in 0..p {
                if i != k {
                    let v = ptcc_pair(&sigma, i, k).unwrap().value;
                    prop_assert!((v - via_q[(i, k)]).abs() < 1e-9);
                    prop_assert_eq!(v, ptcc_pair(&sigma, k, i).unwrap().value);
                }
            }
        }
    }

    #[test]
    fn residual_stays_positive_definite(sigma in pd_matrix()) {
        let r = residual_tpdm(&sigma, 0, 2).unwrap();
        prop_assert!(r.determinant() > 0.0);
        prop_assert_eq!(r[(0, 1)], r[(1, 0)]);
    }
}

#[test]
fn zero_ptcc_means_diagonal_residual() {
    for case in 1..=3 {
        let truth = TruthRecord::from_coefficients(&case_coefficients(case).unwrap(), 2.0).unwrap();
        let p = truth.sigma_true.nrows();
        for i in 0..p {
            for k in (i + 1)..p {
                let r = ptcc_pair(&truth.sigma_true, i, k).unwrap();
                let zero = r.value.abs() <= 1e-10;
                assert_eq!(zero, truth.q_true[(i, k)].abs() <= 1e-10, "case {case} ({i},{k})");
                if zero {
                    assert!(r.residual_tpdm[(0, 1)].abs() <= 1e-10);
                }
            }
        }
    }
}
