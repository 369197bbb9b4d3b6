//! Estimation after the test stops: sample proportions, their plug-in
//! covariance, a Wald confidence ellipse and relative-risk intervals.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::exact::LatticeCounts;
use crate::params::rho_from_p11;
use crate::special::{chi2_quantile_2df, norm_quantile};

/// Point estimates at the terminal sample size `M*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PostTestEstimate {
    pub theta_hat_x: f64,
    pub theta_hat_y: f64,
    pub p11_hat: f64,
    /// Undefined when either margin estimate is 0 or 1.
    pub rho_hat: Option<f64>,
    pub m_star: u64,
    pub sigma_hat: [[f64; 2]; 2],
    /// Set when `sigma_hat` is singular.
    pub singular: bool,
}

/// Estimates from the terminal cell counts.
pub fn post_test_estimate(counts: &LatticeCounts, m_star: u64) -> Result<PostTestEstimate> {
    if m_star == 0 {
        return domain("m_star must be at least 1");
    }
    if counts.total() != m_star {
        return domain(format!("counts sum to {}, expected m_star = {m_star}", counts.total()));
    }
    let m = m_star as f64;
    let tx = counts.s_x() as f64 / m;
    let ty = counts.s_y() as f64 / m;
    let p11 = counts.n11 as f64 / m;
    let c = p11 - tx * ty;
    let sigma_hat = [[tx * (1.0 - tx), c], [c, ty * (1.0 - ty)]];
    let det = sigma_hat[0][0] * sigma_hat[1][1] - c * c;
    let interior = |t: f64| t > 0.0 && t < 1.0;
    let rho_hat = if interior(tx) && interior(ty) {
        Some(rho_from_p11(tx, ty, p11)?)
    } else {
        None
    };
    Ok(PostTestEstimate {
        theta_hat_x: tx,
        theta_hat_y: ty,
        p11_hat: p11,
        rho_hat,
        m_star,
        sigma_hat,
        singular: !(det > 1e-15),
    })
}

/// Joint confidence ellipse with its projections and Bonferroni intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceRegion {
    pub level: f64,
    pub center: [f64; 2],
    /// `(major, minor)` semi-axes.
    pub half_lengths: [f64; 2],
    /// Unit vector along the major axis.
    pub orientation: [f64; 2],
    pub simultaneous: [[f64; 2]; 2],
    pub bonferroni: [[f64; 2]; 2],
    /// Plug-in covariance scaled by `1 / M*`.
    pub scaled_cov: [[f64; 2]; 2],
    /// The covariance was singular; intervals collapse accordingly.
    pub singular: bool,
}

/// Eigenvalues (descending) and the leading eigenvector of a symmetric 2x2.
fn sym_eigen(a: [[f64; 2]; 2]) -> ([f64; 2], [f64; 2]) {
    let (p, q, r) = (a[0][0], a[0][1], a[1][1]);
    let mean = 0.5 * (p + r);
    let rad = (0.25 * (p - r) * (p - r) + q * q).sqrt();
    let l1 = mean + rad;
    let l2 = (mean - rad).max(0.0);
    let v = if q.abs() > 1e-300 {
        let (x, y) = (l1 - r, q);
        let n = x.hypot(y);
        [x / n, y / n]
    } else if p >= r {
        [1.0, 0.0]
    } else {
        [0.0, 1.0]
    };
    ([l1, l2], v)
}

/// Wald region `{theta : M* (theta_hat - theta)' Sigma^-1 (theta_hat - theta) <= c}`.
pub fn confidence_region(est: &PostTestEstimate, level: f64) -> Result<ConfidenceRegion> {
    let c = chi2_quantile_2df(level)?;
    let z = norm_quantile(1.0 - (1.0 - level) / 4.0)?;
    let m = est.m_star as f64;
    let s = est.sigma_hat;
    let scaled_cov = [[s[0][0] / m, s[0][1] / m], [s[1][0] / m, s[1][1] / m]];
    let (lam, v) = sym_eigen(s);
    let half_lengths = [(c * lam[0] / m).sqrt(), (c * lam[1] / m).sqrt()];
    let center = [est.theta_hat_x, est.theta_hat_y];
    let interval = |i: usize, mult: f64| {
        let h = mult * (s[i][i] / m).sqrt();
        [center[i] - h, center[i] + h]
    };
    Ok(ConfidenceRegion {
        level,
        center,
        half_lengths,
        orientation: v,
        simultaneous: [interval(0, c.sqrt()), interval(1, c.sqrt())],
        bonferroni: [interval(0, z), interval(1, z)],
        scaled_cov,
        singular: est.singular,
    })
}

impl ConfidenceRegion {
    /// `n` points evenly spaced in angle along the boundary.
    pub fn boundary_points(&self, n: usize) -> Vec<[f64; 2]> {
        let [a, b] = self.half_lengths;
        let [ux, uy] = self.orientation;
        (0..n)
            .map(|i| {
                let t = std::f64::consts::TAU * i as f64 / n as f64;
                let (p, q) = (a * t.cos(), b * t.sin());
                [self.center[0] + p * ux - q * uy, self.center[1] + p * uy + q * ux]
            })
            .collect()
    }

    /// Whether `theta` lies in the closed ellipse. A singular region
    /// contains only points on its degenerate support.
    pub fn contains(&self, theta: [f64; 2]) -> bool {
        let d = [theta[0] - self.center[0], theta[1] - self.center[1]];
        let [ux, uy] = self.orientation;
        // coordinates along the principal axes
        let p = d[0] * ux + d[1] * uy;
        let q = -d[0] * uy + d[1] * ux;
        let [a, b] = self.half_lengths;
        let tol = 1e-12;
        let along = |t: f64, h: f64| {
            if h > 0.0 {
                (t / h) * (t / h)
            } else if t.abs() <= tol {
                0.0
            } else {
                f64::INFINITY
            }
        };
        along(p, a) + along(q, b) <= 1.0 + 1e-12
    }
}

/// Ratio estimate with a delta-method interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelativeRiskEstimate {
    pub gamma_hat: f64,
    pub variance: f64,
    pub ci: [f64; 2],
    pub level: f64,
}

fn ratio(num: f64, den: f64, p11: f64, m: u64, level: f64, what: &'static str) -> Result<RelativeRiskEstimate> {
    if !(level > 0.0 && level < 1.0) {
        return domain(format!("level must lie in (0, 1), got {level}"));
    }
    if den == 0.0 {
        return Err(Error::ZeroDenominator(what));
    }
    let g = num / den;
    let variance = g * ((g + 1.0) / den - 2.0 * p11 / (den * den));
    let z = norm_quantile(0.5 * (1.0 + level))?;
    let h = z * (variance.max(0.0) / m as f64).sqrt();
    Ok(RelativeRiskEstimate {
        gamma_hat: g,
        variance,
        ci: [g - h, g + h],
        level,
    })
}

/// `gamma = theta_x / theta_y`.
pub fn relative_risk(est: &PostTestEstimate, level: f64) -> Result<RelativeRiskEstimate> {
    ratio(est.theta_hat_x, est.theta_hat_y, est.p11_hat, est.m_star, level, "theta_hat_y")
}

/// `nu = theta_y / theta_x`.
pub fn inverse_relative_risk(est: &PostTestEstimate, level: f64) -> Result<RelativeRiskEstimate> {
    ratio(est.theta_hat_y, est.theta_hat_x, est.p11_hat, est.m_star, level, "theta_hat_x")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(n00: u64, n10: u64, n01: u64, n11: u64) -> LatticeCounts {
        LatticeCounts { n00, n10, n01, n11 }
    }

    #[test]
    fn first_example_region() {
        let e = post_test_estimate(&counts(63, 18, 11, 25), 117).unwrap();
        assert!((e.theta_hat_x - 0.3675).abs() < 5e-5);
        assert!((e.rho_hat.unwrap() - 0.4521).abs() < 5e-5);
        let r = confidence_region(&e, 0.95).unwrap();
        assert!((r.half_lengths[0] - 0.1288).abs() < 5e-4);
        assert!((r.half_lengths[1] - 0.0790).abs() < 5e-4);
        assert!((r.simultaneous[0][0] - 0.2584).abs() < 5e-4);
        assert!((r.simultaneous[1][1] - 0.4121).abs() < 5e-4);
        let rr = relative_risk(&e, 0.95).unwrap();
        assert!((rr.ci[0] - 0.8740).abs() < 5e-4 && (rr.ci[1] - 1.5149).abs() < 5e-4);
    }

    #[test]
    fn projections_match_boundary_extremes() {
        let e = post_test_estimate(&counts(78, 26, 5, 8), 117).unwrap();
        let r = confidence_region(&e, 0.95).unwrap();
        let pts = r.boundary_points(200_000);
        for i in 0..2 {
            let lo = pts.iter().map(|p| p[i]).fold(f64::INFINITY, f64::min);
            let hi = pts.iter().map(|p| p[i]).fold(f64::NEG_INFINITY, f64::max);
            assert!((lo - r.simultaneous[i][0]).abs() < 1e-6);
            assert!((hi - r.simultaneous[i][1]).abs() < 1e-6);
        }
        assert!(r.contains(r.center));
        assert!(!r.contains([r.simultaneous[0][1] + 1e-3, r.center[1]]));
    }

    #[test]
    fn isotropic_covariance_gives_circle() {
        // theta_x = theta_y with p11 = theta^2
        let e = post_test_estimate(&counts(36, 12, 12, 4), 64).unwrap();
        assert_eq!(e.rho_hat, Some(0.0));
        let r = confidence_region(&e, 0.95).unwrap();
        assert!((r.half_lengths[0] - r.half_lengths[1]).abs() < 1e-12);
    }

    #[test]
    fn degenerate_counts_flagged() {
        let e = post_test_estimate(&counts(10, 0, 0, 0), 10).unwrap();
        assert!(e.singular);
        assert_eq!(e.rho_hat, None);
        let r = confidence_region(&e, 0.95).unwrap();
        assert_eq!(r.simultaneous[0], [0.0, 0.0]);
        assert!(matches!(relative_risk(&e, 0.95), Err(Error::ZeroDenominator(_))));
        assert!(post_test_estimate(&counts(1, 1, 1, 1), 5).is_err());
    }

    #[test]
    fn inverse_ratio_swaps_margins() {
        let e = post_test_estimate(&counts(63, 18, 11, 25), 117).unwrap();
        let nu = inverse_relative_risk(&e, 0.95).unwrap();
        let g = relative_risk(&e, 0.95).unwrap();
        assert!((nu.gamma_hat * g.gamma_hat - 1.0).abs() < 1e-12);
        let swapped = post_test_estimate(&counts(63, 11, 18, 25), 117).unwrap();
        let g2 = relative_risk(&swapped, 0.95).unwrap();
        assert!((g2.variance - nu.variance).abs() < 1e-14);
    }
}
