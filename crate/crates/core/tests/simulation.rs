mod common;

use bicurtail::simulator::replicate_records;
use bicurtail::*;
use common::local_design;

#[test]
fn monte_carlo_agrees_with_exact() {
    let d = BivariateDesign::new(121, 19, 18).unwrap();
    for (tx, ty, rho) in [(0.1, 0.2, 0.1), (0.05, 0.1, 0.1), (0.15, 0.12, -0.1)] {
        let p = make_params(tx, ty, rho).unwrap();
        let s = monte_carlo(&d, &p, 20_000, 99).unwrap();
        let pow = power_exact(&d, &p);
        assert!((s.power - pow).abs() < 4.0 * s.power_se.max(1e-3), "power {} vs {pow}", s.power);
        let asn = asn_exact(&d, &p);
        assert!((s.asn - asn).abs() < 4.0 * s.asn_se, "asn {} vs {asn}", s.asn);
        let ex = estimator_expectation_exact(&d, &p, Margin::X);
        assert!((s.mean_theta_hat_x - ex).abs() < 4.0 * s.bias_x_se);
        let (bx, by, bc) = stopping_pmf_exact(&d, &p).boundary_split();
        let split = [bx, by, bc];
        for i in 0..3 {
            assert!((s.boundary_split[i] - split[i]).abs() < 0.01, "boundary {i}");
        }
    }
}

#[test]
fn replicates_are_pure_functions_of_seed_and_index() {
    let d = BivariateDesign::new(80, 9, 12).unwrap();
    let p = make_params(0.1, 0.15, 0.2).unwrap();
    let a = replicate_records(&d, &p, 500, 5, 0.95, Execution::Sequential).unwrap();
    let b = replicate_records(&d, &p, 500, 5, 0.95, Execution::Parallel).unwrap();
    assert_eq!(a, b);
    // a longer study shares its prefix with a shorter one
    let c = replicate_records(&d, &p, 800, 5, 0.95, Execution::Parallel).unwrap();
    assert_eq!(&c[..500], &a[..]);
    let other = replicate_records(&d, &p, 500, 6, 0.95, Execution::Sequential).unwrap();
    assert_ne!(a, other);
    assert_eq!(
        monte_carlo_with(&d, &p, 500, 5, 0.95, Execution::Sequential).unwrap(),
        monte_carlo_with(&d, &p, 500, 5, 0.95, Execution::Parallel).unwrap()
    );
}

#[test]
fn sampled_cells_match_probabilities() {
    let p = make_params(0.2, 0.3, 0.25).unwrap();
    let n = 200_000;
    let mut c = LatticeCounts::default();
    for ev in sample_stream(&p, 3, n) {
        c.record(ev.x, ev.y);
    }
    let got = [c.n00, c.n10, c.n01, c.n11].map(|v| v as f64 / n as f64);
    for (g, w) in got.iter().zip(p.cells()) {
        assert!((g - w).abs() < 4.0 * (w * (1.0 - w) / n as f64).sqrt());
    }
}

#[test]
fn zero_cells_never_drawn() {
    // at the upper limit of rho an X event always comes with a Y event
    let (_, hi) = bicurtail::params::rho_bounds(0.2, 0.3);
    let p = make_params(0.2, 0.3, hi).unwrap();
    assert_eq!(p.p10(), 0.0);
    assert!(sample_stream(&p, 8, 10_000).iter().all(|e| !e.x || e.y));
}

#[test]
fn crossing_law_matches_simulation() {
    // X crosses long before Y can, so the joint law at the crossing is
    // the single-boundary limit
    let k = 150;
    let d = BivariateDesign::new(100_000, k, 50_000).unwrap();
    let p = make_params(0.2, 0.3, 0.35).unwrap();
    let law = gut_params(&p, k, Margin::X).unwrap();
    let recs = replicate_records(&d, &p, 20_000, 17, 0.95, Execution::default()).unwrap();
    let pts: Vec<[f64; 2]> = recs
        .iter()
        .map(|r| {
            assert_eq!(r.boundary, Boundary::X);
            [r.counts.s_y() as f64, r.m_star as f64]
        })
        .collect();
    let n = pts.len() as f64;
    let mean = [0, 1].map(|i| pts.iter().map(|v| v[i]).sum::<f64>() / n);
    for i in 0..2 {
        let se = (law.cov[i][i] / n).sqrt();
        assert!((mean[i] - law.mean[i]).abs() < 4.0 * se, "mean {i}: {} vs {}", mean[i], law.mean[i]);
        for j in 0..2 {
            let c = pts.iter().map(|v| (v[i] - mean[i]) * (v[j] - mean[j])).sum::<f64>() / (n - 1.0);
            let scale = (law.cov[i][i] * law.cov[j][j]).sqrt();
            assert!((c - law.cov[i][j]).abs() < 0.04 * scale, "cov {i}{j}: {c} vs {}", law.cov[i][j]);
        }
    }
}

#[test]
fn ellipse_coverage_near_nominal() {
    let d = local_design(0.05, 0.1, 0.1, Rounding::Nearest);
    let p = make_params(0.055, 0.11, 0.1).unwrap();
    let s = monte_carlo_with(&d, &p, 10_000, 31, 0.95, Execution::default()).unwrap();
    assert!((s.coverage - 0.95).abs() < 0.01, "coverage {}", s.coverage);
}
