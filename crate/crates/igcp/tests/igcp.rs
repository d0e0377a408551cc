mod common;

use approx::assert_relative_eq;
use igcp::igcp::{
    first_passage_density, first_passage_density_state_one, igcp_levy_measure, igcp_moments, igcp_ode_verify,
    igcp_pgf, igcp_pmf, igcp_pmf_vector, igcp_pmf_with_budget, igcp_transition_rates, nh_first_passage_cdf,
    nh_igcp_moments, nh_igcp_pmf, nh_increment_ode_verify, nh_increment_pmf, sample_nh_igcp_value,
};
use igcp::mc::{chi_square_gof, map_samples, tabulate, McConfig};
use igcp::{Error, GcpParams, IgcpParams, PmfVector, RateSchedule};
use proptest::prelude::*;

fn desk() -> IgcpParams<f64> {
    IgcpParams::from_rates(vec![1.0, 0.5], vec![0.7, 0.3]).unwrap()
}

#[test]
fn iterated_poisson_pgf_reduction() {
    // k = k₀ = 1: exp(μt(e^{−λ(1−u)} − 1))
    let (lam, mu, t) = (1.3f64, 0.8f64, 1.7f64);
    let p = IgcpParams::from_rates(vec![lam], vec![mu]).unwrap();
    for &u in &[0.0, 0.4, 0.9, -0.5] {
        let closed = (mu * t * ((-lam * (1.0 - u)).exp() - 1.0)).exp();
        assert_relative_eq!(igcp_pgf(&p, u, t).unwrap(), closed, epsilon = 1e-14);
    }
}

#[test]
fn iterated_poisson_first_passage_reduction() {
    // n = 1, k = k₀ = 1: μλe^{−λ} exp(−μs(1 − e^{−λ}))
    let (lam, mu) = (0.9f64, 1.4f64);
    let p = IgcpParams::from_rates(vec![lam], vec![mu]).unwrap();
    for &s in &[0.1, 1.0, 3.0] {
        let closed = mu * lam * (-lam).exp() * (-mu * s * (1.0 - (-lam).exp())).exp();
        assert_relative_eq!(first_passage_density(&p, 1, s, None).unwrap().value, closed, epsilon = 1e-12);
        assert_relative_eq!(first_passage_density_state_one(&p, s, None).value, closed, epsilon = 1e-12);
    }
}

#[test]
fn first_passage_density_matches_finite_difference() {
    // For n = 2 the density of the exact-hit time is the rate of entering 2
    // from 0 or 1: Σ_{m<2} p̂(m, s) Π̂(2 − m).
    let p = desk();
    let levy = common::levy_measure(&[1.0, 0.5], &[0.7, 0.3], 2);
    for &s in &[0.3, 1.2] {
        let pmf = common::igcp_pmf(&[1.0, 0.5], &[0.7, 0.3], s, 2);
        let expected = pmf[0] * levy[2] + pmf[1] * levy[1];
        assert_relative_eq!(first_passage_density(&p, 2, s, None).unwrap().value, expected, epsilon = 1e-12);
    }
}

#[test]
fn levy_measure_matches_compound_form() {
    let p = desk();
    let oracle = common::levy_measure(&[1.0, 0.5], &[0.7, 0.3], 20);
    for n in 1..=20u64 {
        assert_relative_eq!(igcp_levy_measure(&p, n).unwrap(), oracle[n as usize], epsilon = 1e-15);
    }
    assert_relative_eq!(-igcp_transition_rates(&p, 0), common::jump_rate(&[1.0, 0.5], &[0.7, 0.3]), epsilon = 1e-15);
}

#[test]
fn forward_equations_are_solved() {
    assert!(igcp_ode_verify(&desk(), 15, 2.0).unwrap() < 1e-6);
}

#[test]
fn moments_and_overdispersion() {
    let m = igcp_moments(&desk(), 0.5, 2.0).unwrap();
    let s = common::s_const(&[1.0, 0.5], &[0.7, 0.3]);
    let t = common::t_const(&[1.0, 0.5], &[0.7, 0.3]);
    assert_relative_eq!(m.mean, 2.0 * s);
    assert_relative_eq!(m.variance, 2.0 * t);
    assert_relative_eq!(m.covariance, 0.5 * t);
    assert!(m.overdispersion() > 0.0);
    assert!(igcp_moments(&desk(), 2.0, 1.0).is_err());
}

#[test]
fn work_budget_is_enforced() {
    let p = IgcpParams::from_rates(vec![1.0; 6], vec![1.0; 6]).unwrap();
    assert!(matches!(igcp_pmf_with_budget(&p, 40, 1.0, 10), Err(Error::Budget { .. })));
}

#[test]
fn nonhomogeneous_matches_time_averaged_rates() {
    let outer = GcpParams::new(vec![1.0f64, 0.5]).unwrap();
    let s = RateSchedule::new(vec![0.0, 1.0, 3.0], vec![vec![0.5, 1.5], vec![0.2, 0.0]]).unwrap();
    for &t in &[0.5, 1.0, 2.5] {
        let rho = s.rhos(t).unwrap();
        let oracle = common::igcp_pmf(&[1.0, 0.5], &rho, 1.0, 12);
        for n in 0..=12u64 {
            assert_relative_eq!(nh_igcp_pmf(&outer, &s, n, t).unwrap().value, oracle[n as usize], epsilon = 1e-12);
        }
        let (m, v) = nh_igcp_moments(&outer, &s, t).unwrap();
        assert_relative_eq!(m, common::s_const(&[1.0, 0.5], &rho), epsilon = 1e-12);
        assert_relative_eq!(v, common::t_const(&[1.0, 0.5], &rho), epsilon = 1e-12);
    }
}

#[test]
fn nonhomogeneous_increments_and_ode() {
    let outer = GcpParams::new(vec![1.0f64, 0.5]).unwrap();
    let s = RateSchedule::new(vec![0.0, 1.0, 3.0], vec![vec![0.5, 1.5], vec![0.2, 0.0]]).unwrap();
    let inc = s.increment_rhos(0.7, 1.5).unwrap();
    let oracle = common::igcp_pmf(&[1.0, 0.5], &inc, 1.0, 8);
    for n in 0..=8u64 {
        assert_relative_eq!(nh_increment_pmf(&outer, &s, n, 1.5, 0.7).unwrap().value, oracle[n as usize], epsilon = 1e-12);
    }
    assert!(nh_increment_ode_verify(&outer, &s, 10, 2.0, 0.5).unwrap() < 1e-6);
    assert!(nh_increment_ode_verify(&outer, &s, 10, 2.5, 0.0).unwrap() < 1e-6);
}

#[test]
fn nonhomogeneous_first_passage_is_tail_mass() {
    let outer = GcpParams::new(vec![1.0f64]).unwrap();
    let s = RateSchedule::constant(&[0.9f64], 4.0).unwrap();
    let pmf = common::igcp_pmf(&[1.0], &[0.9], 2.0, 3);
    let below: f64 = pmf[..3].iter().sum();
    assert_relative_eq!(nh_first_passage_cdf(&outer, &s, 3, 2.0).unwrap(), 1.0 - below, epsilon = 1e-12);
    assert!(nh_first_passage_cdf(&outer, &s, 0, 1.0).is_err());
}

#[test]
fn nonhomogeneous_sampler_matches_pmf() {
    let outer = GcpParams::new(vec![1.0f64, 0.5]).unwrap();
    let s = RateSchedule::new(vec![0.0, 1.0, 3.0], vec![vec![0.5, 1.5], vec![0.2, 0.0]]).unwrap();
    let xs = map_samples(|r| sample_nh_igcp_value(&outer, &s, 2.0, r).unwrap(), &McConfig::new(40_000, 3, 1)).unwrap();
    let oracle = PmfVector::new(common::igcp_pmf(&[1.0, 0.5], &s.rhos(2.0).unwrap(), 1.0, 120), 0.0);
    assert!(chi_square_gof(&tabulate(&xs), &oracle, 5.0).unwrap().p_value > 1e-3);
}

#[test]
fn single_precision_pmf_tracks_double() {
    let d = IgcpParams::<f64>::from_rates(vec![1.0, 0.5], vec![0.7, 0.3]).unwrap();
    let s = IgcpParams::<f32>::from_rates(vec![1.0, 0.5], vec![0.7, 0.3]).unwrap();
    for n in 0..8 {
        let a = igcp_pmf(&d, n, 1.0).unwrap().value;
        let b = igcp_pmf(&s, n, 1.0).unwrap().value;
        assert!((a - b as f64).abs() < 1e-5, "n={n}: {a} vs {b}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn pmf_matches_conditioning_oracle(
        outer in prop::collection::vec(0.1f64..1.5, 1..4),
        inner in prop::collection::vec(0.1f64..1.5, 1..4),
        t in 0.1f64..2.5,
    ) {
        let p = IgcpParams::from_rates(outer.clone(), inner.clone()).unwrap();
        let o = common::igcp_pmf(&outer, &inner, t, 10);
        for n in 0..=10u64 {
            let v = igcp_pmf(&p, n, t).unwrap();
            prop_assert!((v.value - o[n as usize]).abs() <= 1e-10 + v.tail_bound, "n={}: {} vs {}", n, v.value, o[n as usize]);
        }
    }

    #[test]
    fn pmf_vector_is_a_distribution(
        outer in prop::collection::vec(0.1f64..1.5, 1..3),
        inner in prop::collection::vec(0.1f64..1.5, 1..3),
        t in 0.1f64..2.0,
    ) {
        let p = IgcpParams::from_rates(outer, inner).unwrap();
        let v = igcp_pmf_vector(&p, t, p.truncation(t)).unwrap();
        prop_assert!(v.probs.iter().all(|&x| x >= 0.0));
        prop_assert!((1.0 - v.mass()).abs() <= v.tail_bound + 1e-10);
    }

    #[test]
    fn constants_are_positive_and_overdispersed(
        outer in prop::collection::vec(0.01f64..3.0, 1..5),
        inner in prop::collection::vec(0.01f64..3.0, 1..5),
        t in 0.01f64..10.0,
    ) {
        let p = IgcpParams::from_rates(outer, inner).unwrap();
        prop_assert!(p.s_const() > 0.0 && p.t_const() > 0.0);
        let m = igcp_moments(&p, t, t).unwrap();
        prop_assert!(m.variance > m.mean);
    }

    #[test]
    fn pgf_is_the_pmf_generating_function(u in -1.0f64..=1.0, t in 0.1f64..2.0) {
        let p = desk();
        let v = igcp_pmf_vector(&p, t, 80).unwrap();
        prop_assert!((igcp_pgf(&p, u, t).unwrap() - v.pgf(u)).abs() < 1e-10);
    }
}
