//! Structural invariants checked on random inputs.

use archkernel::copula::{box_volume, ArchimedeanCopula, Copula, KernelCopula};
use archkernel::generator::GeneratorFamily as F;
use archkernel::ConditionalCopula;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn family(i: usize, theta: f64) -> F {
    match i {
        0 => F::gumbel(1.0 + theta).unwrap(),
        1 => F::clayton(0.1 + theta).unwrap(),
        _ => F::frank(0.5 + 3.0 * theta).unwrap(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernel_is_a_distribution_function(
        fam in 0usize..3, theta in 0.0f64..4.0, d in 3usize..6, l_off in 0usize..4,
        x in proptest::collection::vec(0.01f64..0.99, 5),
        y in proptest::collection::vec(0.0f64..1.0, 5),
        bump in 0.0f64..0.3,
    ) {
        let c = ArchimedeanCopula::from_family(family(fam, theta), d).unwrap();
        let l = 1 + l_off % (d - 1);
        let (x, y) = (&x[..l], &y[..d - l]);
        let k = c.kernel(x, y).unwrap();
        prop_assert!((0.0..=1.0).contains(&k));
        let mut y2 = y.to_vec();
        y2[0] = (y2[0] + bump).min(1.0);
        prop_assert!(c.kernel(x, &y2).unwrap() >= k - 1e-12);
        prop_assert!((c.kernel(x, &vec![1.0; d - l]).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn conditional_copula_has_uniform_margins(
        fam in 0usize..3, theta in 0.0f64..4.0, x in 0.02f64..0.98, u in 0.0f64..1.0,
    ) {
        let c = ArchimedeanCopula::from_family(family(fam, theta), 4).unwrap();
        let cc = ConditionalCopula::new(&c, &[x]).unwrap();
        for j in 0..3 {
            let mut p = vec![1.0; 3];
            p[j] = u;
            prop_assert!((cc.cdf(&p).unwrap() - u).abs() < 1e-10);
            prop_assert!((cc.cdf_ratio(&p).unwrap() - u).abs() < 1e-10);
        }
    }

    #[test]
    fn boxes_have_nonnegative_mass(
        fam in 0usize..3, theta in 0.0f64..4.0,
        a in proptest::collection::vec(0.0f64..1.0, 3),
        w in proptest::collection::vec(0.0f64..1.0, 3),
    ) {
        let c = ArchimedeanCopula::from_family(family(fam, theta), 3).unwrap();
        let b: Vec<f64> = a.iter().zip(&w).map(|(a, w)| a + w * (1.0 - a)).collect();
        prop_assert!(box_volume(&c, &a, &b).unwrap() >= 0.0);
    }
}

#[test]
fn density_integrates_to_one() {
    let mut rng = ChaCha20Rng::seed_from_u64(99);
    for f in [F::clayton(0.5).unwrap(), F::frank(4.0).unwrap(), F::gumbel(1.5).unwrap()] {
        let c = ArchimedeanCopula::from_family(f, 3).unwrap();
        let n = 200_000;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let u: Vec<f64> = (0..3).map(|_| rng.random::<f64>()).collect();
            let v = c.density(&u).unwrap();
            s += v;
            s2 += v * v;
        }
        let mean = s / n as f64;
        let se = ((s2 / n as f64 - mean * mean) / n as f64).sqrt();
        assert!((mean - 1.0).abs() < 4.0 * se + 1e-3, "{f:?}: {mean} +- {se}");
    }
}
