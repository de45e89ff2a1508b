use nalgebra::Cholesky;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use holodyn::linalg::{
    c, frobenius_norm, hermitian_defect, matrix_exponential, random_gaussian, random_hermitian,
    reorthonormalize, seeded_random_unitary, ComplexMatrix, Frame, I,
};

fn frob(m: &ComplexMatrix) -> f64 {
    frobenius_norm(m).unwrap()
}

fn anti_hermitian(dim: usize, seed: u64, scale: f64) -> ComplexMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_hermitian(dim, &mut rng).as_matrix() * c(0.0, scale)
}

/// Plain Taylor series with no scaling, valid for small norms.
fn taylor_oracle(a: &ComplexMatrix) -> ComplexMatrix {
    let n = a.nrows();
    let mut sum = ComplexMatrix::identity(n, n);
    let mut term = ComplexMatrix::identity(n, n);
    for k in 1..40 {
        term = &term * a / c(k as f64, 0.0);
        sum += &term;
    }
    sum
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn exp_of_anti_hermitian_is_unitary(dim in 2usize..=8, seed: u64, scale in 0.01f64..20.0) {
        let a = anti_hermitian(dim, seed, scale);
        let u = matrix_exponential(&a).unwrap();
        let defect = frob(&(u.adjoint() * &u - ComplexMatrix::identity(dim, dim)));
        prop_assert!(defect <= 1e-12, "defect {defect:e}");
    }

    #[test]
    fn exp_of_hermitian_is_hermitian_positive(dim in 2usize..=8, seed: u64, scale in 0.01f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = random_hermitian(dim, &mut rng).as_matrix().scale(scale);
        let e = matrix_exponential(&b).unwrap();
        prop_assert!(hermitian_defect(&e) <= 1e-12 * frob(&e).max(1.0));
        prop_assert!(Cholesky::new(e).is_some());
    }

    #[test]
    fn exp_matches_taylor_for_small_norm(dim in 2usize..=8, seed: u64, norm in 0.0f64..=1.0, kind in 0u8..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = match kind {
            0 => random_gaussian(dim, dim, &mut rng),
            1 => random_hermitian(dim, &mut rng).into_inner(),
            _ => random_hermitian(dim, &mut rng).into_inner() * I,
        };
        let a = g.scale(norm / frob(&g));
        let diff = frob(&(matrix_exponential(&a).unwrap() - taylor_oracle(&a)));
        prop_assert!(diff <= 1e-10, "diff {diff:e}");
    }

    #[test]
    fn reorthonormalize_is_idempotent(dim in 2usize..=8, rank_seed: u64, seed: u64) {
        let rank = 1 + (rank_seed as usize) % dim;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let once = reorthonormalize(&random_gaussian(dim, rank, &mut rng)).unwrap();
        prop_assert!(once.gram_defect() <= 1e-14);
        let twice = once.reorthonormalized().unwrap();
        prop_assert!(frob(&(once.columns() - twice.columns())) <= 1e-13);
    }

    #[test]
    fn random_unitary_is_unitary_and_deterministic(dim in 1usize..=8, seed: u64) {
        let u = seeded_random_unitary(dim, seed).unwrap();
        prop_assert!(frob(&(u.adjoint() * &u - ComplexMatrix::identity(dim, dim))) <= 1e-12);
        prop_assert_eq!(u, seeded_random_unitary(dim, seed).unwrap());
    }

    #[test]
    fn rotating_a_frame_keeps_its_projector(dim in 2usize..=6, seed: u64) {
        let rank = 1 + (seed as usize) % dim;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = reorthonormalize(&random_gaussian(dim, rank, &mut rng)).unwrap();
        let v = seeded_random_unitary(rank, seed ^ 0xabc).unwrap();
        let g: Frame = f.rotated(&v).unwrap();
        let p = f.columns() * f.columns().adjoint();
        let q = g.columns() * g.columns().adjoint();
        prop_assert!(frob(&(p - q)) <= 1e-13);
    }
}
