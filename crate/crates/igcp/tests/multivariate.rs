mod common;

use approx::assert_relative_eq;
use igcp::igcp::igcp_pmf;
use igcp::multivariate::{
    mv_codifference, mv_codifference_literal, mv_covariance, mv_covariance_matrix, mv_levy_measure, mv_ode_verify,
    mv_pgf, mv_pmf, mv_pmf_bell, mv_pmf_lattice, sample_mv_value,
};
use igcp::mc::{chi_square_gof, map_samples, tabulate, McConfig};
use igcp::{GcpParams, IgcpParams, MvIgcpParams, PmfVector};
use num_complex::Complex;
use proptest::prelude::*;

fn params() -> MvIgcpParams<f64> {
    MvIgcpParams::<f64>::new(
        vec![GcpParams::new(vec![0.6, 0.3]).unwrap(), GcpParams::new(vec![0.4]).unwrap()],
        GcpParams::new(vec![0.8, 0.2]).unwrap(),
    )
    .unwrap()
}

fn joint_oracle(n1: usize, n2: usize, t: f64) -> f64 {
    let inner = common::gcp_pmf(&[0.8, 0.2], t, common::cutoff(&[0.8, 0.2], t));
    inner
        .iter()
        .enumerate()
        .map(|(m, &w)| w * common::gcp_pmf(&[0.6, 0.3], m as f64, n1)[n1] * common::gcp_pmf(&[0.4], m as f64, n2)[n2])
        .sum()
}

#[test]
fn joint_pmf_matches_conditioning() {
    let p = params();
    for n1 in 0..6 {
        for n2 in 0..6 {
            let o = joint_oracle(n1, n2, 1.2);
            assert_relative_eq!(mv_pmf(&p, &[n1 as u64, n2 as u64], 1.2, None).unwrap().value, o, epsilon = 1e-13);
            assert_relative_eq!(mv_pmf_bell(&p, &[n1 as u64, n2 as u64], 1.2).unwrap().value, o, epsilon = 1e-10);
        }
    }
}

#[test]
fn marginals_are_igcps() {
    let p = params();
    let lattice = mv_pmf_lattice(&p, 1.0, Some(&[40, 40])).unwrap();
    let first = IgcpParams::new(p.components[0].clone(), p.inner.clone()).unwrap();
    for n in 0..8usize {
        let marginal: f64 = (0..=40).map(|j| lattice.get(&[n, j])).sum();
        assert_relative_eq!(marginal, igcp_pmf(&first, n as u64, 1.0).unwrap().value, epsilon = 1e-12);
    }
    assert!((1.0 - lattice.mass()).abs() < 1e-10);
}

#[test]
fn pgf_matches_lattice() {
    let p = params();
    let lattice = mv_pmf_lattice(&p, 0.7, Some(&[40, 40])).unwrap();
    let (u1, u2) = (0.3f64, 0.8f64);
    let mut acc = 0.0;
    for a in 0..=40usize {
        for b in 0..=40usize {
            acc += lattice.get(&[a, b]) * u1.powi(a as i32) * u2.powi(b as i32);
        }
    }
    assert_relative_eq!(mv_pgf(&p, &[u1, u2], 0.7).unwrap(), acc, epsilon = 1e-12);
    assert!(mv_pgf(&p, &[1.5, 0.0], 0.7).is_err());
    assert!(mv_pgf(&p, &[0.5], 0.7).is_err());
}

#[test]
fn covariance_matches_lattice_moments() {
    let p = params();
    let t = 0.9;
    let lattice = mv_pmf_lattice(&p, t, Some(&[60, 60])).unwrap();
    let mut e = [0.0; 2];
    let mut e2 = [[0.0; 2]; 2];
    for a in 0..=60usize {
        for b in 0..=60usize {
            let w = lattice.get(&[a, b]);
            let v = [a as f64, b as f64];
            for i in 0..2 {
                e[i] += w * v[i];
                for j in 0..2 {
                    e2[i][j] += w * v[i] * v[j];
                }
            }
        }
    }
    let cov = mv_covariance_matrix(&p, t);
    for i in 0..2 {
        for j in 0..2 {
            assert_relative_eq!(cov[i][j], e2[i][j] - e[i] * e[j], max_relative = 1e-9);
            assert_relative_eq!(mv_covariance(&p, i + 1, j + 1, t).unwrap(), cov[i][j]);
        }
    }
    assert!(cov[0][1] > 0.0);
    assert!(mv_covariance(&p, 0, 1, t).is_err());
    assert!(mv_covariance(&p, 1, 3, t).is_err());
}

#[test]
fn levy_measure_from_shared_jumps() {
    let p = params();
    // Π(n₁, n₂) = Σ μ_{j₀} Pr{M₁(j₀) = n₁} Pr{M₂(j₀) = n₂}
    for n1 in 0..4usize {
        for n2 in 0..4usize {
            if n1 + n2 == 0 {
                continue;
            }
            let o: f64 = [0.8, 0.2]
                .iter()
                .enumerate()
                .map(|(i, &mu)| {
                    let s = (i + 1) as f64;
                    mu * common::gcp_pmf(&[0.6, 0.3], s, n1)[n1] * common::gcp_pmf(&[0.4], s, n2)[n2]
                })
                .sum();
            assert_relative_eq!(mv_levy_measure(&p, &[n1 as u64, n2 as u64]).unwrap(), o, epsilon = 1e-15);
        }
    }
}

#[test]
fn forward_equations_hold_on_the_lattice() {
    assert!(mv_ode_verify(&params(), &[8, 8], 1.5).unwrap() < 1e-6);
}

#[test]
fn codifference_vanishes_at_zero() {
    let p = params();
    let z = mv_codifference(&p, 1, 2, Complex::new(0.0, 0.0), 1.0).unwrap();
    assert!(z.norm() < 1e-15);
    let lit = mv_codifference_literal(&p, 1, 2, Complex::new(0.0, 0.0), 1.0).unwrap();
    assert!(lit.norm().is_finite());
    assert!(mv_codifference(&p, 3, 1, Complex::new(0.1, 0.0), 1.0).is_err());
}

#[test]
fn imaginary_codifference_is_conjugate_symmetric() {
    let p = params();
    let a = mv_codifference(&p, 1, 2, Complex::new(0.0, 0.3), 1.0).unwrap();
    let b = mv_codifference(&p, 1, 2, Complex::new(0.0, -0.3), 1.0).unwrap();
    assert!((a - b.conj()).norm() < 1e-14);
}

#[test]
fn sampler_marginal_matches_igcp() {
    let p = params();
    let xs = map_samples(|r| sample_mv_value(&p, 1.0, r)[0], &McConfig::new(40_000, 9, 1)).unwrap();
    let oracle = PmfVector::new(common::igcp_pmf(&[0.6, 0.3], &[0.8, 0.2], 1.0, 100), 0.0);
    assert!(chi_square_gof(&tabulate(&xs), &oracle, 5.0).unwrap().p_value > 1e-3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn series_and_bell_forms_agree(
        a in prop::collection::vec(0.1f64..1.0, 1..3),
        b in prop::collection::vec(0.1f64..1.0, 1..3),
        inner in prop::collection::vec(0.1f64..1.0, 1..3),
        t in 0.2f64..1.5,
    ) {
        let p = MvIgcpParams::<f64>::new(vec![GcpParams::new(a).unwrap(), GcpParams::new(b).unwrap()], GcpParams::new(inner).unwrap()).unwrap();
        for n1 in 0..4u64 {
            for n2 in 0..4u64 {
                let x = mv_pmf(&p, &[n1, n2], t, None).unwrap().value;
                let y = mv_pmf_bell(&p, &[n1, n2], t).unwrap().value;
                prop_assert!((x - y).abs() < 1e-10, "{} vs {}", x, y);
            }
        }
    }

    #[test]
    fn covariance_matrix_is_positive_semidefinite(t in 0.1f64..3.0) {
        let c = mv_covariance_matrix(&params(), t);
        prop_assert!(c[0][0] > 0.0 && c[1][1] > 0.0);
        prop_assert!(c[0][0] * c[1][1] - c[0][1] * c[1][0] >= -1e-12);
        prop_assert!((c[0][1] - c[1][0]).abs() < 1e-14);
    }
}
