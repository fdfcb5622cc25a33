//! Cross-module checks: matching laws are valid moment sequences, sampling
//! is reproducible and batch-invariant, and the rate fit recognises both a
//! converging and a non-converging family.

use wpcert_core::cumulants::{self, gaussian_moments, hamburger_feasible, CumulantSeq, MomentSeq, Rational, Scalar};
use wpcert_core::matching::{build_match, choose_q, default_realize_order, MatchTarget, QChoice};
use wpcert_core::quadrature::atom_moments;
use wpcert_core::sim::{self, rate_experiment, GeneratorSpec, InnovationLaw, Kernel};

#[test]
fn bell_sums_agree_with_the_recursion_in_exact_arithmetic() {
    let kappa: Vec<Rational> = (1..=9).map(|j| Rational::from_i64(j * j - 7) / Rational::from_i64(j + 1)).collect();
    let kappa = CumulantSeq(kappa);
    let mu = cumulants::moments_from_cumulants(&kappa);
    let table = cumulants::bell_table(9, &kappa.0).unwrap();
    for n in 1..=9 {
        let mut via_bell = Rational::from_i64(0);
        for j in 1..=n {
            via_bell = via_bell + table[n][j].clone();
        }
        assert_eq!(&via_bell, mu.get(n), "μ_{n}");
    }
}

#[test]
fn gaussian_law_is_a_fixed_point() {
    let mu = gaussian_moments::<f64>(12);
    let kappa = cumulants::cumulants_from_moments(&mu).unwrap();
    assert_eq!(kappa.0[1], 1.0);
    for (j, k) in kappa.0.iter().enumerate().filter(|(j, _)| *j != 1) {
        assert!(k.abs() < 1e-9, "κ_{} = {k}", j + 1);
    }
    assert!(hamburger_feasible(&mu).unwrap().is_feasible());
}

#[test]
fn matched_laws_reproduce_their_targets() {
    for (p, u) in [(2.0, vec![0.004]), (3.0, vec![-0.01, 0.002]), (3.7, vec![0.003, -0.004, 0.0]), (1.5, vec![-0.008])] {
        let target = MatchTarget::new(p, u.clone(), 0.5).unwrap();
        let r = build_match(&target, default_realize_order(p)).unwrap();
        assert!(!r.gaussian_branch);
        let q = r.q.unwrap() as f64;
        let weights: f64 = r.atoms.iter().map(|a| a.weight).sum();
        assert!((weights - 1.0).abs() < 1e-12);
        assert!(r.atoms.iter().all(|a| a.weight > 0.0));
        let mu = atom_moments(&r.atoms, u.len() + 2);
        let kappa = cumulants::cumulants_from_moments(&MomentSeq(mu)).unwrap();
        assert!(kappa.get(1).abs() < 1e-10);
        assert!((kappa.get(2) - 1.0).abs() < 1e-10);
        for (j, uj) in u.iter().enumerate() {
            let want = q.powf((j + 1) as f64 / 2.0) * uj;
            assert!((kappa.get(j + 3) - want).abs() < 1e-8, "p = {p}, j = {j}");
        }
        assert!(r.abs_moment <= r.abs_moment_bound * (1.0 + 1e-12));
    }
}

#[test]
fn vanishing_targets_take_the_gaussian_branch() {
    let target = MatchTarget::new(2.0, vec![0.0], 0.5).unwrap();
    assert!(matches!(choose_q(&target).unwrap(), QChoice::Gaussian { .. }));
    let r = build_match(&target, default_realize_order(2.0)).unwrap();
    assert!(r.gaussian_branch);
}

#[test]
fn sampling_is_reproducible_and_batch_invariant() {
    let spec = GeneratorSpec::MdepMa { d: 2, side: 5, m: 1, law: InnovationLaw::Uniform };
    let a = sim::sample_w(&spec, 10_000, 3).unwrap();
    let b = sim::sample_w(&spec, 10_000, 3).unwrap();
    assert_eq!(a.sorted(), b.sorted());
    let mut pieces = Vec::new();
    for (batch, count) in sim::batches(10_000) {
        pieces.extend(sim::sample_w_batch(&spec, 3, batch, count).unwrap());
    }
    pieces.sort_by(f64::total_cmp);
    assert_eq!(pieces, a.sorted());
    let c = sim::sample_w(&spec, 10_000, 4).unwrap();
    assert_ne!(a.sorted(), c.sorted());
}

#[test]
fn standardised_sums_have_unit_variance() {
    for spec in [
        GeneratorSpec::MdepMa { d: 1, side: 40, m: 2, law: InnovationLaw::Rademacher },
        GeneratorSpec::MdepMa { d: 2, side: 6, m: 1, law: InnovationLaw::Gaussian },
        GeneratorSpec::UStat { kernel: Kernel::Sum, law: InnovationLaw::Uniform, n: 20 },
        GeneratorSpec::UStat { kernel: Kernel::Variance, law: InnovationLaw::Gaussian, n: 20 },
    ] {
        let w = sim::sample_w(&spec, 200_000, 1).unwrap();
        let n = w.len() as f64;
        let mean = w.sorted().iter().sum::<f64>() / n;
        let var = w.sorted().iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 0.02, "{spec:?}: mean {mean}");
        assert!((var - 1.0).abs() < 0.03, "{spec:?}: variance {var}");
    }
}

#[test]
fn rate_fit_separates_converging_and_fixed_families() {
    let sizes = [16, 32, 64, 128, 256];
    let ma = GeneratorSpec::MdepMa { d: 1, side: 16, m: 1, law: InnovationLaw::Rademacher };
    let fit = rate_experiment(&ma, &sizes, 1.0, 200_000, 9).unwrap();
    assert!((-0.65..=-0.35).contains(&fit.slope), "slope {}", fit.slope);
    assert!(!fit.non_normal);
    let fixed = GeneratorSpec::Fixed { law: InnovationLaw::Rademacher };
    let fit = rate_experiment(&fixed, &sizes, 1.0, 50_000, 9).unwrap();
    assert!(fit.slope.abs() < 0.1, "slope {}", fit.slope);
    assert!(fit.non_normal);
}
