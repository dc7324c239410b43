//! Library linear algebra against nalgebra and explicit index loops.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use e2i2::amplitude::{contract, operator_schmidt, svd, tensor_product, CMatrix, Tensor4};
use e2i2::entanglement::bell_singlet;
use e2i2::C64;

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMatrix {
    let data = (0..rows * cols).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    CMatrix::from_rows(rows, cols, data).unwrap()
}

fn to_na(m: &CMatrix) -> DMatrix<C64> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

fn random_tensor(rng: &mut ChaCha8Rng, da: usize, db: usize) -> Tensor4 {
    Tensor4::from_joint_matrix(&random_matrix(rng, da * db, da * db), da, db).unwrap()
}

#[test]
fn singular_values_match_nalgebra() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (m, n) in [(2, 2), (4, 4), (4, 9), (9, 4), (16, 16)] {
        let a = random_matrix(&mut rng, m, n);
        let ours = svd(&a);
        let mut theirs: Vec<f64> = to_na(&a).singular_values().iter().copied().collect();
        theirs.sort_by(|x, y| y.total_cmp(x));
        assert_eq!(ours.singular_values.len(), theirs.len());
        for (s, t) in ours.singular_values.iter().zip(&theirs) {
            assert!((s - t).abs() < 1e-12 * theirs[0], "{m}x{n}: {s} vs {t}");
        }
        let back = ours.reconstruct(theirs.len());
        assert!(back.sub(&a).unwrap().max_abs() < 1e-12, "{m}x{n} reconstruction");
    }
}

#[test]
fn schmidt_values_match_nalgebra_on_the_realigned_matrix() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let t = random_tensor(&mut rng, 2, 3);
    // realignment built here by hand: row (a1, a2), column (b1, b2)
    let j = t.joint_matrix();
    let r = DMatrix::from_fn(4, 9, |row, col| {
        let (a1, a2, b1, b2) = (row / 2, row % 2, col / 3, col % 3);
        j[(a1 * 3 + b1, a2 * 3 + b2)]
    });
    let mut theirs: Vec<f64> = r.singular_values().iter().copied().collect();
    theirs.sort_by(|x, y| y.total_cmp(x));
    let ours = operator_schmidt(&t, 1e-9).unwrap();
    for (s, t) in ours.singular_values.iter().zip(&theirs) {
        assert!((s - t).abs() < 1e-12 * theirs[0]);
    }
    assert_eq!(ours.operator_schmidt_rank, 4);
}

#[test]
fn singlet_schmidt_spectrum() {
    // |psi><psi| for the singlet realigns to four equal singular values of 1/2
    let r = operator_schmidt(&bell_singlet(), 1e-9).unwrap();
    assert_eq!(r.operator_schmidt_rank, 4);
    for s in &r.singular_values {
        assert!((s - 0.5).abs() < 1e-14, "{s}");
    }
}

#[test]
fn contraction_matches_explicit_loops() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (da, db) in [(2, 2), (2, 3), (3, 2)] {
        let (x, y) = (random_tensor(&mut rng, da, db), random_tensor(&mut rng, da, db));
        let mut oracle = C64::new(0.0, 0.0);
        for a1 in 0..da {
            for b1 in 0..db {
                for a2 in 0..da {
                    for b2 in 0..db {
                        oracle += x.get(a1, b1, a2, b2) * y.get(a2, b2, a1, b1);
                    }
                }
            }
        }
        assert!((contract(&x, &y).unwrap() - oracle).norm() < 1e-13);
        // and the joint-matrix trace through nalgebra
        let t = (to_na(&x.joint_matrix()) * to_na(&y.joint_matrix())).trace();
        assert!((contract(&x, &y).unwrap() - t).norm() < 1e-13);
    }
}

#[test]
fn tensor_product_is_the_kronecker_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (a, b) = (random_matrix(&mut rng, 2, 2), random_matrix(&mut rng, 3, 3));
    let k = to_na(&a).kronecker(&to_na(&b));
    let t = tensor_product(&a, &b).unwrap().joint_matrix();
    for i in 0..6 {
        for j in 0..6 {
            assert_eq!(t[(i, j)], k[(i, j)]);
        }
    }
}

#[test]
fn mismatched_contraction_is_an_error() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    assert!(contract(&random_tensor(&mut rng, 2, 2), &random_tensor(&mut rng, 2, 3)).is_err());
}
