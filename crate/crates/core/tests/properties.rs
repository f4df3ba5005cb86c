use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use sqrtreg::model::RegressionProblem;
use sqrtreg::norms::sorted::linear_sequence;
use sqrtreg::norms::{ConeSpec, Norm, NormSpec};
use sqrtreg::numeric::dot;
use sqrtreg::solver::{check_kkt, fit_with_norm, SolverConfig};
use sqrtreg::Error;

fn groups(p: usize, size: usize) -> Vec<Vec<usize>> {
    (0..p).collect::<Vec<_>>().chunks(size).map(<[usize]>::to_vec).collect()
}

fn spec(kind: usize, p: usize) -> NormSpec {
    match kind {
        0 => NormSpec::L1,
        1 => NormSpec::Group { groups: groups(p, 2) },
        2 => NormSpec::SortedL1 {
            lambda_seq: linear_sequence(1.0, 0.1, p),
        },
        3 => NormSpec::SparseGroup {
            l1_weight: 0.7,
            group_weight: 0.4,
            groups: groups(p, 3),
        },
        4 => NormSpec::Structured { cone: ConeSpec::Wedge },
        _ => NormSpec::Structured {
            cone: ConeSpec::Box {
                lower: vec![0.5; p],
                upper: vec![2.0; p],
            },
        },
    }
}

fn norm_and_vectors(count: usize) -> impl Strategy<Value = (Norm, Vec<Vec<f64>>)> {
    (0usize..6, 2usize..8).prop_flat_map(move |(kind, p)| {
        let vecs = prop::collection::vec(prop::collection::vec(-3.0f64..3.0, p), count);
        (Just(spec(kind, p).build(p).unwrap()), vecs)
    })
}

fn tol(scale: f64) -> f64 {
    1e-8 * (1.0 + scale)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn norm_axioms((norm, v) in norm_and_vectors(2), c in -4.0f64..4.0) {
        let (a, b) = (&v[0], &v[1]);
        let va = norm.value(a);
        prop_assert!(va >= 0.0);
        let scaled: Vec<f64> = a.iter().map(|x| c * x).collect();
        prop_assert!((norm.value(&scaled) - c.abs() * va).abs() <= tol(va));
        let sum: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + y).collect();
        let vb = norm.value(b);
        prop_assert!(norm.value(&sum) <= va + vb + tol(va + vb));
        prop_assert_eq!(norm.value(&vec![0.0; a.len()]), 0.0);
    }

    #[test]
    fn dual_pairing_bound((norm, v) in norm_and_vectors(2)) {
        let (z, b) = (&v[0], &v[1]);
        let bound = norm.value(b) * norm.dual(z);
        prop_assert!(dot(z, b).abs() <= bound + tol(bound));
    }

    #[test]
    fn subgradient_attains_the_norm((norm, v) in norm_and_vectors(1)) {
        let b = &v[0];
        let g = norm.subgradient(b);
        let val = norm.value(b);
        prop_assert!((dot(&g, b) - val).abs() <= 1e-7 * (1.0 + val));
        prop_assert!(norm.dual(&g) <= 1.0 + 1e-7);
    }

    #[test]
    fn prox_optimality((norm, v) in norm_and_vectors(2), step in 0.01f64..3.0) {
        let (y, d) = (&v[0], &v[1]);
        let x = norm.prox(y, step);
        // (y - x) / step is a subgradient at x
        let u: Vec<f64> = y.iter().zip(&x).map(|(a, b)| (a - b) / step).collect();
        let vx = norm.value(&x);
        prop_assert!(norm.dual(&u) <= 1.0 + 1e-6, "dual {}", norm.dual(&u));
        prop_assert!((dot(&u, &x) - vx).abs() <= 1e-6 * (1.0 + vx));
        let obj = |b: &[f64]| 0.5 * b.iter().zip(y).map(|(p, q)| (p - q).powi(2)).sum::<f64>() + step * norm.value(b);
        let nearby: Vec<f64> = x.iter().zip(d).map(|(a, b)| a + 0.01 * b).collect();
        prop_assert!(obj(&x) <= obj(&nearby) + 1e-9);
        prop_assert!(obj(&x) <= obj(y) + 1e-9);
    }

    #[test]
    fn rearrangement(b in prop::collection::vec(-3.0f64..3.0, 2..9), perm_seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let p = b.len();
        let w = linear_sequence(1.0, 0.1, p);
        let norm = NormSpec::SortedL1 { lambda_seq: w.clone() }.build(p).unwrap();
        let mut perm: Vec<usize> = (0..p).collect();
        perm.shuffle(&mut rand_chacha::ChaCha20Rng::seed_from_u64(perm_seed));
        let other: f64 = perm.iter().zip(&w).map(|(&j, wi)| wi * b[j].abs()).sum();
        prop_assert!(other <= norm.value(&b) + 1e-12);
    }

    #[test]
    fn weak_decomposability((norm, v) in norm_and_vectors(1), mask in any::<u16>()) {
        let b = &v[0];
        let s: Vec<usize> = (0..b.len()).filter(|j| mask >> j & 1 == 1).collect();
        match norm.complement(&s) {
            Ok(c) => prop_assert!(c.decomposition_slack(b) >= -1e-10),
            Err(Error::DisallowedSet(_)) => {}
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fits_satisfy_kkt(kind in 0usize..6, seed in any::<u64>(), lambda in 0.1f64..1.5) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
        let (n, p) = (25, 8);
        let x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
        let mut beta = DVector::zeros(p);
        beta[0] = 1.5;
        beta[1] = -1.0;
        let e = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
        let prob = RegressionProblem::new(x.clone(), x * beta + e).unwrap();
        let norm = spec(kind, p).build(p).unwrap();
        let fit = fit_with_norm(&prob, &norm, &SolverConfig::new(lambda)).unwrap();
        prop_assert!(fit.converged);
        let r = check_kkt(&prob, &norm, &fit.beta_vec(), lambda).unwrap();
        prop_assert!(r <= 1e-6, "kkt {r}");
        prop_assert!(fit.objective_trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }
}
