use extnet::tl::*;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn pos_vec(len: usize) -> impl Strategy<Value = PositiveVector> {
    prop::collection::vec(0.1f64..30.0, len).prop_map(|v| PositiveVector::new(v).unwrap())
}

proptest! {
    #[test]
    fn forward_round_trip(e in -8.0f64..50f64.log10()) {
        let x = 10f64.powf(e);
        prop_assert!(rel(transform(inverse_transform(x).unwrap()).unwrap(), x) <= 1e-12);
    }

    #[test]
    fn backward_round_trip(y in -30.0f64..50.0) {
        prop_assume!(y != 0.0);
        prop_assert!(rel(inverse_transform(transform(y).unwrap()).unwrap(), y) <= 1e-12);
    }

    #[test]
    fn addition_is_associative_and_commutative(
        (a, b, c) in (1usize..8).prop_flat_map(|n| (pos_vec(n), pos_vec(n), pos_vec(n)))
    ) {
        let l = vec_add(&vec_add(&a, &b).unwrap(), &c).unwrap();
        let r = vec_add(&a, &vec_add(&b, &c).unwrap()).unwrap();
        for (x, y) in l.values().iter().zip(r.values()) {
            prop_assert!(rel(*x, *y) <= 1e-10);
        }
        prop_assert_eq!(vec_add(&a, &b).unwrap(), vec_add(&b, &a).unwrap());
    }

    #[test]
    fn large_arguments_act_linearly(
        (p, q, entries, z) in (1usize..6, 1usize..6).prop_flat_map(|(p, q)| (
            Just(p),
            Just(q),
            prop::collection::vec(0.5f64..2.0, p * q),
            prop::collection::vec(50.0f64..1e4, q),
        ))
    ) {
        let a = DMatrix::from_row_slice(p, q, &entries);
        let got = matrix_apply(&CoefficientMatrix::new(a.clone()).unwrap(), &PositiveVector::new(z.clone()).unwrap()).unwrap();
        let zl = nalgebra::DVector::from_iterator(q, z.iter().map(|&v| inverse_transform(v).unwrap()));
        let lin = &a * zl;
        let diff = got.values().iter().zip(lin.iter()).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
        prop_assert!(diff / lin.amax() < 1e-10);
    }

    #[test]
    fn tpdm_is_the_sum_of_coefficient_products(entries in prop::collection::vec(0.0f64..3.0, 12)) {
        let mut a = DMatrix::from_row_slice(3, 4, &entries);
        for i in 0..3 {
            a[(i, i)] += 1.0;
        }
        let t = true_tpdm_from_coefficients(&CoefficientMatrix::new(a.clone()).unwrap()).unwrap();
        for i in 0..3 {
            for k in 0..3 {
                let mut s = 0.0;
                for j in 0..4 {
                    s += a[(i, j)] * a[(k, j)];
                }
                prop_assert!((t.sigma[(i, k)] - s).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn scalar_examples() {
    let x = PositiveVector::new(vec![20.0, 20.0]).unwrap();
    for v in scalar_mul(2.0, &x).unwrap().values() {
        assert!((v - 40.0).abs() < 1e-6);
    }
    assert_eq!(scalar_mul(0.0, &x).unwrap(), PositiveVector::zero(2));
    let ten = PositiveVector::new(vec![10.0, 10.0]).unwrap();
    for v in vec_add(&ten, &ten).unwrap().values() {
        assert!((v - 20.0).abs() < 1e-3);
    }
}

#[test]
fn linearization_example() {
    let a = CoefficientMatrix::from_rows(&[&[1.0, 1.0], &[1.0, 0.0]]).unwrap();
    let z = PositiveVector::new(vec![100.0, 100.0]).unwrap();
    let x = matrix_apply(&a, &z).unwrap();
    assert!(rel(x.values()[0], 200.0) < 1e-6);
    assert!(rel(x.values()[1], 100.0) < 1e-6);
}
