//! Bivariate normal approximations to the stopping time, power and
//! post-test estimator, for designs too large for the exact sums.

use serde::{Deserialize, Serialize};

use crate::design::BivariateDesign;
use crate::error::{Error, Result};
use crate::exact::{Margin, StoppingPmf};
use crate::par::{map_range, pairwise_sum, Execution};
use crate::params::JointBernoulliParams;
use crate::special::{bvn_partial_mean, bvn_rect, BivariateNormalParams};

const NEG_INF: f64 = f64::NEG_INFINITY;

/// Which normal approximation to use for the rejection probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AsymptoticForm {
    /// Joint normal law of `(S^x_N, S^y_N)` with continuity correction.
    #[default]
    CurtailedNormal,
    /// Boundary-crossing laws of `(other count, M)`, integrated to `N* + 1/2`.
    Gut,
}

/// Limit law of `(count on the other margin, stopping time)` when the
/// walk first crosses the boundary of `which`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GutLaw {
    pub which: Margin,
    pub mean: [f64; 2],
    pub cov: [[f64; 2]; 2],
}

impl GutLaw {
    pub fn normal(&self) -> Result<BivariateNormalParams> {
        BivariateNormalParams::new(self.mean, self.cov)
    }
}

/// Boundary-crossing law for margin `which` with critical value `k`.
pub fn gut_params(params: &JointBernoulliParams, k: usize, which: Margin) -> Result<GutLaw> {
    let p = match which {
        Margin::X => *params,
        Margin::Y => params.swapped(),
    };
    let (t, o, p11) = (p.theta_x(), p.theta_y(), p.p11());
    let eta2 = t * o * (t + o - 2.0 * p11);
    if !(eta2 > 0.0) {
        return Err(Error::DegenerateEta(eta2));
    }
    let k1 = (k + 1) as f64;
    let s = k1 / (t * t);
    let c = (o - p11) * s;
    Ok(GutLaw {
        which,
        mean: [o / t * k1, k1 / t],
        cov: [[o * (t + o - 2.0 * p11) * s, c], [c, (1.0 - t) * s]],
    })
}

/// Joint normal law of `(S^x_N, S^y_N)` after `n` observations.
fn sum_law(params: &JointBernoulliParams, n: usize) -> Result<BivariateNormalParams> {
    let n = n as f64;
    let (tx, ty) = (params.theta_x(), params.theta_y());
    let c = n * params.covariance();
    BivariateNormalParams::new([n * tx, n * ty], [[n * tx * (1.0 - tx), c], [c, n * ty * (1.0 - ty)]])
}

fn laws(design: &BivariateDesign, params: &JointBernoulliParams) -> Result<(BivariateNormalParams, BivariateNormalParams)> {
    let (kx, ky) = design.effective_k();
    let lx = gut_params(params, kx, Margin::X)?.normal()?;
    let ly = gut_params(params, ky, Margin::Y)?.normal()?;
    Ok((lx, ly))
}

/// Non-rejection mass `P(S^x_N <= kx, S^y_N <= ky)` under the normal law.
fn continue_mass(design: &BivariateDesign, params: &JointBernoulliParams) -> Result<f64> {
    let (kx, ky) = design.effective_k();
    let law = sum_law(params, design.n_star())?;
    bvn_rect(&law, [NEG_INF, NEG_INF], [kx as f64 + 0.5, ky as f64 + 0.5])
}

/// Approximate stopping-time distribution; the corner term is dropped.
pub fn stopping_pmf_asymptotic(design: &BivariateDesign, params: &JointBernoulliParams) -> Result<StoppingPmf> {
    stopping_pmf_asymptotic_with(design, params, Execution::default())
}

pub fn stopping_pmf_asymptotic_with(
    design: &BivariateDesign,
    params: &JointBernoulliParams,
    exec: Execution,
) -> Result<StoppingPmf> {
    let n = design.n_star();
    let (kx, ky) = design.effective_k();
    let kl = kx.min(ky);
    let (lx, ly) = laws(design, params)?;
    let per_m = map_range(exec, 0..n + 1, |m| -> Result<(f64, f64)> {
        if m <= kl {
            return Ok((0.0, 0.0));
        }
        let (a, b) = (m as f64 - 0.5, m as f64 + 0.5);
        let hx = bvn_rect(&lx, [NEG_INF, a], [ky as f64 + 0.5, b])?;
        let hy = bvn_rect(&ly, [NEG_INF, a], [kx as f64 + 0.5, b])?;
        Ok((hx, hy))
    });
    let mut hit_x = Vec::with_capacity(n + 1);
    let mut hit_y = Vec::with_capacity(n + 1);
    for r in per_m {
        let (hx, hy) = r?;
        hit_x.push(hx);
        hit_y.push(hy);
    }
    Ok(StoppingPmf {
        n_star: n,
        k_lower: design.k_lower().min(n),
        hit_x,
        hit_y,
        corner: vec![0.0; n + 1],
        continue_mass: continue_mass(design, params)?,
    })
}

/// Approximate rejection probability.
pub fn power_asymptotic(design: &BivariateDesign, params: &JointBernoulliParams, form: AsymptoticForm) -> Result<f64> {
    match form {
        AsymptoticForm::CurtailedNormal => Ok(1.0 - continue_mass(design, params)?),
        AsymptoticForm::Gut => {
            let (px, py) = boundary_hit_probs(design, params)?;
            Ok((px + py).min(1.0))
        }
    }
}

/// Probabilities that the X (resp. Y) boundary is crossed first, by `N*`.
pub fn boundary_hit_probs(design: &BivariateDesign, params: &JointBernoulliParams) -> Result<(f64, f64)> {
    let (kx, ky) = design.effective_k();
    let (lx, ly) = laws(design, params)?;
    let top = design.n_star() as f64 + 0.5;
    let px = bvn_rect(&lx, [NEG_INF, NEG_INF], [ky as f64 + 0.5, top])?;
    let py = bvn_rect(&ly, [NEG_INF, NEG_INF], [kx as f64 + 0.5, top])?;
    Ok((px, py))
}

/// Approximate `E[theta_hat]` for one margin.
///
/// The count on the crossing margin is fixed at `k + 1`; the count on the
/// other margin enters through its truncated first moment in closed form;
/// the stopping time is discretized on the integer grid with continuity
/// correction.
pub fn estimator_expectation_asymptotic(
    design: &BivariateDesign,
    params: &JointBernoulliParams,
    margin: Margin,
) -> Result<f64> {
    let (d, p) = match margin {
        Margin::X => (*design, *params),
        Margin::Y => (design.swapped(), params.swapped()),
    };
    let n = d.n_star();
    let (kx, ky) = d.effective_k();
    let kl = kx.min(ky);
    let (own, other) = laws(&d, &p)?;
    let (cx, cy) = (kx as f64 + 0.5, ky as f64 + 0.5);
    let mut terms = Vec::with_capacity(2 * n + 1);
    for m in kl + 1..=n {
        let (a, b) = (m as f64 - 0.5, m as f64 + 0.5);
        let mf = m as f64;
        // own boundary crossed: theta_hat = (k + 1) / m
        terms.push(bvn_rect(&own, [NEG_INF, a], [cy, b])? * (kx + 1) as f64 / mf);
        // other boundary crossed: theta_hat = S / m with S the free coordinate
        terms.push(bvn_partial_mean(&other, [NEG_INF, a], [cx, b])? / mf);
    }
    // no crossing by N*
    let law = sum_law(&p, n)?;
    terms.push(bvn_partial_mean(&law, [NEG_INF, NEG_INF], [cx, cy])? / n as f64);
    Ok(pairwise_sum(&terms))
}
