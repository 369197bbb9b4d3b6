//! Per-margin sample size and critical value, and the pooled bivariate design.

use serde::{Deserialize, Serialize};

use crate::asymptotic::{power_asymptotic, AsymptoticForm};
use crate::error::{domain, Error, Result};
use crate::exact::{lattice_forward_dp, power_exact};
use crate::params::JointBernoulliParams;
use crate::special::{binom_cdf, binom_upper_tail, norm_quantile};

/// Integer conversion applied to the closed-form sample size and critical value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rounding {
    #[default]
    Nearest,
    Floor,
}

impl Rounding {
    fn apply(self, x: f64) -> f64 {
        match self {
            Rounding::Nearest => x.round(),
            Rounding::Floor => x.floor(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DesignMethod {
    /// Normal approximation to the binomial.
    #[default]
    Approx,
    /// Smallest `N` whose binomial size and power constraints hold exactly.
    ExactRefine,
}

/// Single-margin fixed-sample design.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginalDesign {
    pub alpha_tilde: f64,
    pub beta: f64,
    pub theta0: f64,
    pub theta1: f64,
    pub n_star: usize,
    pub k_star: usize,
}

impl MarginalDesign {
    /// `P_{theta0}(S_N > k)`.
    pub fn attained_size(&self) -> f64 {
        binom_upper_tail(self.n_star as u64, self.k_star as u64 + 1, self.theta0)
    }

    /// `P_{theta1}(S_N <= k)`.
    pub fn attained_type2(&self) -> f64 {
        binom_cdf(self.n_star as u64, self.k_star as u64, self.theta1)
    }
}

fn check_rates(alpha_tilde: f64, beta: f64) -> Result<()> {
    if !(alpha_tilde > 0.0 && alpha_tilde < 0.5) {
        return domain(format!("alpha_tilde must lie in (0, 0.5), got {alpha_tilde}"));
    }
    if !(beta > 0.0 && beta < 0.5) {
        return domain(format!("beta must lie in (0, 0.5), got {beta}"));
    }
    Ok(())
}

fn check_prob(name: &str, t: f64) -> Result<()> {
    if !(t > 0.0 && t < 1.0) {
        return domain(format!("{name} must lie in (0, 1), got {t}"));
    }
    Ok(())
}

/// Critical value `[n (z sqrt(theta0 (1 - theta0) / n) + theta0) - 1/2]`.
pub fn critical_value_for_n(alpha_tilde: f64, theta0: f64, n: usize, rounding: Rounding) -> Result<usize> {
    if n == 0 {
        return domain("n must be at least 1");
    }
    if !(alpha_tilde > 0.0 && alpha_tilde < 1.0) {
        return domain(format!("alpha_tilde must lie in (0, 1), got {alpha_tilde}"));
    }
    check_prob("theta0", theta0)?;
    let z = norm_quantile(1.0 - alpha_tilde)?;
    let n = n as f64;
    let k = rounding.apply(n * (z * (theta0 * (1.0 - theta0) / n).sqrt() + theta0) - 0.5);
    Ok(k.clamp(0.0, n - 1.0) as usize)
}

/// Optimal `(N*, k*)` for one margin.
pub fn design_marginal(
    alpha_tilde: f64,
    beta: f64,
    theta0: f64,
    theta1: f64,
    method: DesignMethod,
    rounding: Rounding,
) -> Result<MarginalDesign> {
    check_rates(alpha_tilde, beta)?;
    check_prob("theta0", theta0)?;
    check_prob("theta1", theta1)?;
    if theta1 <= theta0 {
        return domain(format!("theta1 ({theta1}) must exceed theta0 ({theta0})"));
    }
    let za = norm_quantile(1.0 - alpha_tilde)?;
    let zb = norm_quantile(1.0 - beta)?;
    let root = (za * (theta0 * (1.0 - theta0)).sqrt() + zb * (theta1 * (1.0 - theta1)).sqrt())
        / (theta1 - theta0);
    let n_approx = (rounding.apply(root * root) as usize).max(1);
    let k_approx = critical_value_for_n(alpha_tilde, theta0, n_approx, rounding)?;
    let approx = MarginalDesign {
        alpha_tilde,
        beta,
        theta0,
        theta1,
        n_star: n_approx,
        k_star: k_approx,
    };
    match method {
        DesignMethod::Approx => Ok(approx),
        DesignMethod::ExactRefine => refine(approx),
    }
}

/// Smallest binomial `k` with `P_{theta0}(S_n > k) <= alpha_tilde`.
fn exact_critical_value(alpha_tilde: f64, theta0: f64, n: usize) -> usize {
    let mut k = (n as f64 * theta0).floor() as usize;
    while k > 0 && binom_upper_tail(n as u64, k as u64, theta0) <= alpha_tilde {
        k -= 1;
    }
    while binom_upper_tail(n as u64, k as u64 + 1, theta0) > alpha_tilde {
        k += 1;
    }
    k
}

fn refine(approx: MarginalDesign) -> Result<MarginalDesign> {
    let start = approx.n_star.saturating_sub(5).max(1);
    let limit = 4 * approx.n_star + 100;
    for n in start..=limit {
        let k = exact_critical_value(approx.alpha_tilde, approx.theta0, n);
        if k >= n {
            continue;
        }
        let d = MarginalDesign {
            n_star: n,
            k_star: k,
            ..approx
        };
        if d.attained_type2() <= approx.beta {
            return Ok(d);
        }
    }
    domain(format!("no exact design found for n up to {limit}"))
}

/// The curtailed bivariate test: pooled maximal sample size and one
/// critical value per margin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDesign", into = "RawDesign")]
pub struct BivariateDesign {
    n_star: usize,
    k_x: usize,
    k_y: usize,
    x: Option<MarginalDesign>,
    y: Option<MarginalDesign>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDesign {
    n_star: usize,
    k_x: usize,
    k_y: usize,
    #[serde(default)]
    k_lower: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    x: Option<MarginalDesign>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    y: Option<MarginalDesign>,
}

impl TryFrom<RawDesign> for BivariateDesign {
    type Error = Error;
    fn try_from(r: RawDesign) -> Result<Self> {
        let mut d = BivariateDesign::new(r.n_star, r.k_x, r.k_y)?;
        if let Some(kl) = r.k_lower {
            if kl != d.k_lower() {
                return domain(format!("k_lower {kl} disagrees with min(k_x, k_y) = {}", d.k_lower()));
            }
        }
        match (r.x, r.y) {
            (Some(x), Some(y)) => {
                if x.k_star != r.k_x || y.k_star != r.k_y || x.n_star.min(y.n_star) != r.n_star {
                    return domain("marginal designs disagree with the pooled design");
                }
                d.x = Some(x);
                d.y = Some(y);
            }
            (None, None) => {}
            _ => return domain("either both marginal designs or neither must be given"),
        }
        Ok(d)
    }
}

impl From<BivariateDesign> for RawDesign {
    fn from(d: BivariateDesign) -> Self {
        RawDesign {
            n_star: d.n_star,
            k_x: d.k_x,
            k_y: d.k_y,
            k_lower: Some(d.k_lower()),
            x: d.x,
            y: d.y,
        }
    }
}

impl BivariateDesign {
    /// A design given directly by `(N*, k*_x, k*_y)`.
    pub fn new(n_star: usize, k_x: usize, k_y: usize) -> Result<Self> {
        if n_star == 0 {
            return domain("n_star must be at least 1");
        }
        Ok(BivariateDesign {
            n_star,
            k_x,
            k_y,
            x: None,
            y: None,
        })
    }

    pub fn n_star(&self) -> usize {
        self.n_star
    }
    pub fn k_x(&self) -> usize {
        self.k_x
    }
    pub fn k_y(&self) -> usize {
        self.k_y
    }
    pub fn k_lower(&self) -> usize {
        self.k_x.min(self.k_y)
    }
    pub fn margins(&self) -> Option<(MarginalDesign, MarginalDesign)> {
        self.x.zip(self.y)
    }

    /// Critical values capped at `N*`; a margin with `k >= N*` can never cross.
    pub(crate) fn effective_k(&self) -> (usize, usize) {
        (self.k_x.min(self.n_star), self.k_y.min(self.n_star))
    }

    /// The design with the two margins exchanged.
    pub fn swapped(&self) -> Self {
        BivariateDesign {
            n_star: self.n_star,
            k_x: self.k_y,
            k_y: self.k_x,
            x: self.y,
            y: self.x,
        }
    }
}

/// Pools two marginal designs: `N* = min`, each margin keeps its own `k*`.
pub fn combine(x: MarginalDesign, y: MarginalDesign) -> BivariateDesign {
    BivariateDesign {
        n_star: x.n_star.min(y.n_star).max(1),
        k_x: x.k_star,
        k_y: y.k_star,
        x: Some(x),
        y: Some(y),
    }
}

/// Designs both margins at `alpha_tilde = alpha / 2` and pools them.
#[allow(clippy::too_many_arguments)]
pub fn design_bivariate(
    alpha: f64,
    beta: f64,
    theta_x0: f64,
    theta_x1: f64,
    theta_y0: f64,
    theta_y1: f64,
    method: DesignMethod,
    rounding: Rounding,
) -> Result<BivariateDesign> {
    let at = alpha / 2.0;
    let x = design_marginal(at, beta, theta_x0, theta_x1, method, rounding)?;
    let y = design_marginal(at, beta, theta_y0, theta_y1, method, rounding)?;
    Ok(combine(x, y))
}

/// How the rejection probability of a design is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PowerMethod {
    /// Closed-form multinomial sum.
    #[default]
    Exact,
    /// Forward lattice recursion.
    Dp,
    /// Bivariate normal approximation with continuity correction.
    CurtailedNormal,
    /// Boundary-crossing normal laws integrated to `N* + 1/2`.
    Gut,
}

/// Rejection probability under the chosen evaluation method.
pub fn power(design: &BivariateDesign, params: &JointBernoulliParams, method: PowerMethod) -> Result<f64> {
    match method {
        PowerMethod::Exact => Ok(power_exact(design, params)),
        PowerMethod::Dp => Ok(1.0 - lattice_forward_dp(design, params).continue_mass),
        PowerMethod::CurtailedNormal => power_asymptotic(design, params, AsymptoticForm::CurtailedNormal),
        PowerMethod::Gut => power_asymptotic(design, params, AsymptoticForm::Gut),
    }
}

/// Retrospective `(type I, type II)` error rates at a null and an alternative.
pub fn attained_errors(
    design: &BivariateDesign,
    null_params: &JointBernoulliParams,
    alt_params: &JointBernoulliParams,
    method: PowerMethod,
) -> Result<(f64, f64)> {
    let type1 = power(design, null_params, method)?;
    let type2 = 1.0 - power(design, alt_params, method)?;
    Ok((type1, type2))
}
