//! Joint Bernoulli parameters `(theta_x, theta_y, rho)` and the induced
//! four-cell multinomial probabilities.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

const FEAS_TOL: f64 = 1e-12;

/// Which feasibility restriction a parameter triple violates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConditionA {
    /// `rho < -sqrt(Omega_x Omega_y)`, i.e. `p11 < 0`.
    P11Negative,
    /// `rho > sqrt(Omega_x / Omega_y)`, i.e. `p10 < 0`.
    P10Negative,
    /// `rho > sqrt(Omega_y / Omega_x)`, i.e. `p01 < 0`.
    P01Negative,
    /// `p00 < 0`; only reachable when `theta_x + theta_y > 1`.
    P00Negative,
}

impl fmt::Display for ConditionA {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ConditionA::P11Negative => "rho below -sqrt(omega_x*omega_y) (p11 < 0)",
            ConditionA::P10Negative => "rho above sqrt(omega_x/omega_y) (p10 < 0)",
            ConditionA::P01Negative => "rho above sqrt(omega_y/omega_x) (p01 < 0)",
            ConditionA::P00Negative => "p00 < 0",
        };
        f.write_str(s)
    }
}

/// Odds `theta / (1 - theta)`.
fn odds(theta: f64) -> f64 {
    theta / (1.0 - theta)
}

/// Feasible correlation range `[lo, hi]` for the given margins.
pub fn rho_bounds(theta_x: f64, theta_y: f64) -> (f64, f64) {
    let (ox, oy) = (odds(theta_x), odds(theta_y));
    let lo = -(ox * oy).sqrt();
    let hi = (ox / oy).sqrt().min((oy / ox).sqrt());
    // p00 >= 0 adds a lower bound when the margins sum past one
    let sd = (theta_x * (1.0 - theta_x) * theta_y * (1.0 - theta_y)).sqrt();
    let lo00 = (theta_x + theta_y - 1.0 - theta_x * theta_y) / sd;
    (lo.max(lo00), hi)
}

/// Marginal probabilities, correlation and cell probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct JointBernoulliParams {
    theta_x: f64,
    theta_y: f64,
    rho: f64,
    p00: f64,
    p10: f64,
    p01: f64,
    p11: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    theta_x: f64,
    theta_y: f64,
    rho: f64,
}

impl TryFrom<RawParams> for JointBernoulliParams {
    type Error = Error;
    fn try_from(r: RawParams) -> Result<Self> {
        make_params(r.theta_x, r.theta_y, r.rho)
    }
}

impl From<JointBernoulliParams> for RawParams {
    fn from(p: JointBernoulliParams) -> Self {
        RawParams {
            theta_x: p.theta_x,
            theta_y: p.theta_y,
            rho: p.rho,
        }
    }
}

/// Validates `(theta_x, theta_y, rho)` and builds the cell probabilities.
pub fn make_params(theta_x: f64, theta_y: f64, rho: f64) -> Result<JointBernoulliParams> {
    for (name, t) in [("theta_x", theta_x), ("theta_y", theta_y)] {
        if !(t > 0.0 && t < 1.0) {
            return domain(format!("{name} must lie in (0, 1), got {t}"));
        }
    }
    if !(rho.abs() < 1.0) {
        return domain(format!("rho must lie in (-1, 1), got {rho}"));
    }
    let infeasible = |violated| Error::Infeasible {
        theta_x,
        theta_y,
        rho,
        violated,
    };
    let (ox, oy) = (odds(theta_x), odds(theta_y));
    if rho < -(ox * oy).sqrt() - FEAS_TOL {
        return Err(infeasible(ConditionA::P11Negative));
    }
    if rho > (ox / oy).sqrt() + FEAS_TOL {
        return Err(infeasible(ConditionA::P10Negative));
    }
    if rho > (oy / ox).sqrt() + FEAS_TOL {
        return Err(infeasible(ConditionA::P01Negative));
    }

    let sd = (theta_x * (1.0 - theta_x) * theta_y * (1.0 - theta_y)).sqrt();
    let p11 = rho * sd + theta_x * theta_y;
    let p00 = 1.0 - theta_x - theta_y + p11;
    if p00 < -FEAS_TOL {
        return Err(infeasible(ConditionA::P00Negative));
    }
    // clamp round-off at the closed boundaries
    let p11 = p11.clamp(0.0, theta_x.min(theta_y));
    Ok(JointBernoulliParams {
        theta_x,
        theta_y,
        rho,
        p00: (1.0 - theta_x - theta_y + p11).max(0.0),
        p10: theta_x - p11,
        p01: theta_y - p11,
        p11,
    })
}

/// Correlation implied by a joint probability `p11` and the margins.
pub fn rho_from_p11(theta_x: f64, theta_y: f64, p11: f64) -> Result<f64> {
    for (name, t) in [("theta_x", theta_x), ("theta_y", theta_y)] {
        if !(t > 0.0 && t < 1.0) {
            return domain(format!("{name} must lie in (0, 1), got {t}"));
        }
    }
    let lo = (theta_x + theta_y - 1.0).max(0.0);
    let hi = theta_x.min(theta_y);
    if !(p11 >= lo - FEAS_TOL && p11 <= hi + FEAS_TOL) {
        return domain(format!("p11={p11} incompatible with margins ({theta_x}, {theta_y})"));
    }
    let sd = (theta_x * (1.0 - theta_x) * theta_y * (1.0 - theta_y)).sqrt();
    Ok((p11 - theta_x * theta_y) / sd)
}

impl JointBernoulliParams {
    pub fn theta_x(&self) -> f64 {
        self.theta_x
    }
    pub fn theta_y(&self) -> f64 {
        self.theta_y
    }
    pub fn rho(&self) -> f64 {
        self.rho
    }
    pub fn p00(&self) -> f64 {
        self.p00
    }
    pub fn p10(&self) -> f64 {
        self.p10
    }
    pub fn p01(&self) -> f64 {
        self.p01
    }
    pub fn p11(&self) -> f64 {
        self.p11
    }

    /// Cell probabilities in the order `(p00, p10, p01, p11)`.
    pub fn cells(&self) -> [f64; 4] {
        [self.p00, self.p10, self.p01, self.p11]
    }

    /// The same law with the two margins exchanged.
    pub fn swapped(&self) -> Self {
        JointBernoulliParams {
            theta_x: self.theta_y,
            theta_y: self.theta_x,
            rho: self.rho,
            p00: self.p00,
            p10: self.p01,
            p01: self.p10,
            p11: self.p11,
        }
    }

    /// `Cov(X, Y) = p11 - theta_x theta_y`.
    pub fn covariance(&self) -> f64 {
        self.p11 - self.theta_x * self.theta_y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn independence_gives_product() {
        let p = make_params(0.3, 0.4, 0.0).unwrap();
        assert!((p.p11() - 0.12).abs() < 1e-15);
        assert!((p.cells().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_negative_correlation() {
        let e = make_params(0.05, 0.1, -0.1).unwrap_err();
        assert!(matches!(
            e,
            Error::Infeasible {
                violated: ConditionA::P11Negative,
                ..
            }
        ));
    }

    #[test]
    fn infeasible_positive_correlation() {
        // sqrt(Omega_x/Omega_y) is small when theta_x << theta_y
        let e = make_params(0.02, 0.3, 0.5).unwrap_err();
        assert!(matches!(
            e,
            Error::Infeasible {
                violated: ConditionA::P01Negative | ConditionA::P10Negative,
                ..
            }
        ));
        let e = make_params(0.3, 0.02, 0.5).unwrap_err();
        assert!(matches!(e, Error::Infeasible { .. }));
    }

    #[test]
    fn p00_violation_detected() {
        let (lo, _) = rho_bounds(0.9, 0.8);
        assert!(make_params(0.9, 0.8, lo).is_ok());
        let e = make_params(0.9, 0.8, lo - 0.01).unwrap_err();
        assert!(matches!(
            e,
            Error::Infeasible {
                violated: ConditionA::P00Negative,
                ..
            }
        ));
    }

    #[test]
    fn boundary_values_are_accepted() {
        let (lo, hi) = rho_bounds(0.1, 0.2);
        let a = make_params(0.1, 0.2, lo).unwrap();
        assert!(a.p11() >= 0.0 && a.p11() < 1e-15);
        let b = make_params(0.1, 0.2, hi).unwrap();
        assert!(b.p10() >= 0.0 && b.p10() < 1e-15);
    }

    #[test]
    fn example_estimates_correlation() {
        let r = rho_from_p11(25.0 / 117.0 + 18.0 / 117.0, 36.0 / 117.0, 25.0 / 117.0).unwrap();
        assert!((r - 0.4521).abs() < 5e-5);
        let r = rho_from_p11(34.0 / 117.0, 13.0 / 117.0, 8.0 / 117.0).unwrap();
        assert!((r - 0.2529).abs() < 5e-5);
        assert!(rho_from_p11(0.2, 0.3, 0.25).is_err());
    }

    #[test]
    fn serde_round_trip() {
        let p = make_params(0.1, 0.2, 0.1).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, r#"{"theta_x":0.1,"theta_y":0.2,"rho":0.1}"#);
        let q: JointBernoulliParams = serde_json::from_str(&s).unwrap();
        assert_eq!(p, q);
        assert!(serde_json::from_str::<JointBernoulliParams>(
            r#"{"theta_x":0.05,"theta_y":0.1,"rho":-0.1}"#
        )
        .is_err());
    }
}
