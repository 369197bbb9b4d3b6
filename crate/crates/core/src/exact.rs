//! Exact operating characteristics of the curtailed test.
//!
//! Two independent evaluations are provided: closed-form negative
//! multinomial sums over the terminal lattice states, and a forward
//! recursion over the alive region of the lattice. They agree to round-off
//! and serve as oracles for each other.

use serde::{Deserialize, Serialize};

use crate::design::BivariateDesign;
use crate::error::{Error, Result};
use crate::par::{map_range, pairwise_sum, Execution};
use crate::params::JointBernoulliParams;
use crate::special::{inc_beta, LnFactorials};

/// Which margin an estimator or boundary refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Margin {
    X,
    Y,
}

/// Counts of the four outcome cells after some number of observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct LatticeCounts {
    pub n00: u64,
    pub n10: u64,
    pub n01: u64,
    pub n11: u64,
}

impl LatticeCounts {
    pub fn total(&self) -> u64 {
        self.n00 + self.n10 + self.n01 + self.n11
    }
    /// Cumulative count of X events.
    pub fn s_x(&self) -> u64 {
        self.n10 + self.n11
    }
    /// Cumulative count of Y events.
    pub fn s_y(&self) -> u64 {
        self.n01 + self.n11
    }
    pub fn record(&mut self, x: bool, y: bool) {
        match (x, y) {
            (false, false) => self.n00 += 1,
            (true, false) => self.n10 += 1,
            (false, true) => self.n01 += 1,
            (true, true) => self.n11 += 1,
        }
    }
}

/// Distribution of the stopping time, split by the boundary that stopped it.
///
/// Vectors are indexed by the sample number `m` itself, `0..=n_star`; entry
/// 0 is always zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppingPmf {
    pub n_star: usize,
    pub k_lower: usize,
    pub hit_x: Vec<f64>,
    pub hit_y: Vec<f64>,
    pub corner: Vec<f64>,
    /// Probability of reaching `N*` without crossing, i.e. non-rejection.
    pub continue_mass: f64,
}

/// One support point of a [`StoppingPmf`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PmfRow {
    pub m: usize,
    pub p_hit_x: f64,
    pub p_hit_y: f64,
    pub p_corner: f64,
}

impl StoppingPmf {
    fn zeros(n_star: usize, k_lower: usize) -> Self {
        StoppingPmf {
            n_star,
            k_lower,
            hit_x: vec![0.0; n_star + 1],
            hit_y: vec![0.0; n_star + 1],
            corner: vec![0.0; n_star + 1],
            continue_mass: 0.0,
        }
    }

    /// `P(M = m, stopped by a boundary)`.
    pub fn stop_mass(&self, m: usize) -> f64 {
        if m > self.n_star {
            return 0.0;
        }
        self.hit_x[m] + self.hit_y[m] + self.corner[m]
    }

    /// Support rows `m = k_lower + 1 ..= n_star`.
    pub fn rows(&self) -> Vec<PmfRow> {
        (self.k_lower + 1..=self.n_star)
            .map(|m| PmfRow {
                m,
                p_hit_x: self.hit_x[m],
                p_hit_y: self.hit_y[m],
                p_corner: self.corner[m],
            })
            .collect()
    }

    pub fn rejection_prob(&self) -> f64 {
        let v: Vec<f64> = (0..=self.n_star).map(|m| self.stop_mass(m)).collect();
        pairwise_sum(&v)
    }

    /// Total boundary masses `(X, Y, corner)`.
    pub fn boundary_split(&self) -> (f64, f64, f64) {
        (pairwise_sum(&self.hit_x), pairwise_sum(&self.hit_y), pairwise_sum(&self.corner))
    }

    /// Distribution of the terminal sample size `M* = min(M, N*)`.
    pub fn terminal_pmf(&self) -> Vec<f64> {
        let mut p: Vec<f64> = (0..=self.n_star).map(|m| self.stop_mass(m)).collect();
        p[self.n_star] += self.continue_mass;
        p
    }

    /// `E[M*] = N* - sum (N* - m) P(M = m)`.
    pub fn asn(&self) -> f64 {
        let n = self.n_star as f64;
        let v: Vec<f64> = (0..self.n_star)
            .map(|m| (n - m as f64) * self.stop_mass(m))
            .collect();
        n - pairwise_sum(&v)
    }

    /// `E[M*^2] = N*^2 - sum (N*^2 - m^2) P(M = m)`.
    pub fn second_moment(&self) -> f64 {
        let n2 = (self.n_star * self.n_star) as f64;
        let v: Vec<f64> = (0..self.n_star)
            .map(|m| (n2 - (m * m) as f64) * self.stop_mass(m))
            .collect();
        n2 - pairwise_sum(&v)
    }

    /// Total variation distance between the two terminal laws, keeping the
    /// boundary labels and the non-rejection atom apart.
    pub fn tv_distance(&self, other: &StoppingPmf) -> f64 {
        let n = self.n_star.max(other.n_star);
        let get = |v: &Vec<f64>, m: usize| v.get(m).copied().unwrap_or(0.0);
        let mut d: Vec<f64> = (0..=n)
            .map(|m| {
                (get(&self.hit_x, m) - get(&other.hit_x, m)).abs()
                    + (get(&self.hit_y, m) - get(&other.hit_y, m)).abs()
                    + (get(&self.corner, m) - get(&other.corner, m)).abs()
            })
            .collect();
        d.push((self.continue_mass - other.continue_mass).abs());
        0.5 * pairwise_sum(&d)
    }

    /// Total variation distance between the distributions of `M*`,
    /// ignoring which boundary stopped the test.
    pub fn tv_distance_terminal(&self, other: &StoppingPmf) -> f64 {
        let a = self.terminal_pmf();
        let b = other.terminal_pmf();
        let n = a.len().max(b.len());
        let d: Vec<f64> = (0..n)
            .map(|m| (a.get(m).copied().unwrap_or(0.0) - b.get(m).copied().unwrap_or(0.0)).abs())
            .collect();
        0.5 * pairwise_sum(&d)
    }
}

/// Log-probability kernel for multinomial terms.
struct Kernel {
    lf: LnFactorials,
    ln_p: [f64; 4],
    p: [f64; 4],
}

impl Kernel {
    fn new(n_star: usize, params: &JointBernoulliParams) -> Self {
        let p = params.cells();
        Kernel {
            lf: LnFactorials::new(n_star),
            ln_p: p.map(f64::ln),
            p,
        }
    }

    /// `n ln p`, with `0 ln 0 = 0`.
    #[inline]
    fn xlnp(n: i64, ln_p: f64) -> f64 {
        if n == 0 {
            0.0
        } else {
            n as f64 * ln_p
        }
    }

    /// Probability of a specific multiset of `n` observations with cell
    /// counts `(n00, n10, n01, n11)`, including the multinomial coefficient.
    #[inline]
    fn multinomial(&self, n00: i64, n10: i64, n01: i64, n11: i64) -> f64 {
        if n00 < 0 || n10 < 0 || n01 < 0 || n11 < 0 {
            return 0.0;
        }
        let n = n00 + n10 + n01 + n11;
        let lp = self.lf.get(n) - self.lf.get(n00) - self.lf.get(n10) - self.lf.get(n01) - self.lf.get(n11)
            + Self::xlnp(n00, self.ln_p[0])
            + Self::xlnp(n10, self.ln_p[1])
            + Self::xlnp(n01, self.ln_p[2])
            + Self::xlnp(n11, self.ln_p[3]);
        lp.exp()
    }
}

/// Stopping masses at one `m`: probabilities and count-weighted probabilities.
#[derive(Debug, Clone, Copy, Default)]
struct StopTerms {
    hit_x: f64,
    hit_y: f64,
    corner: f64,
    /// `sum P * S^x` at the stop, over all three boundaries.
    sx: f64,
    /// `sum P * S^y` at the stop.
    sy: f64,
}

/// X-boundary terms at `m`: the walk sits at `S^x = kx`, `S^y <= ky` after
/// `m - 1` observations and the `m`-th carries an X event without also
/// pushing Y past `ky`. Returns `(probability, sum P * S^y)`.
///
/// With `p = [p00, p10, p01, p11]` this is the sum of the (1,1)-last term
/// (`n11 = i-1`, `n10 = kx+1-i`, `n01 = j`) and the (1,0)-last term
/// (`n11 = i`, `n10 = kx-i`, `n01 = j`). Passing the swapped cells and
/// critical values gives the Y-boundary terms.
fn margin_terms(ker: &Kernel, p: [f64; 4], m: usize, kx: usize, ky: usize, flip: bool) -> (f64, f64) {
    let (m, kx, ky) = (m as i64, kx as i64, ky as i64);
    let mult = |n10: i64, n01: i64, n11: i64| {
        let n00 = m - 1 - n10 - n01 - n11;
        let (a, b) = if flip { (n01, n10) } else { (n10, n01) };
        ker.multinomial(n00, a, b, n11)
    };
    let mut prob = Vec::new();
    let mut weighted = Vec::new();
    // last step (1,1), other margin stays at or below its critical value
    if p[3] > 0.0 {
        for i in 1..=(kx + 1).min(ky) {
            for j in 0..=(ky - i).min(m - kx - 1) {
                let t = mult(kx + 1 - i, j, i - 1) * p[3];
                prob.push(t);
                weighted.push(t * (i + j) as f64);
            }
        }
    }
    // last step (1,0) from the cross-margin's perspective
    if p[1] > 0.0 {
        for i in 0..=kx.min(ky) {
            for j in 0..=(ky - i).min(m - 1 - kx) {
                let t = mult(kx - i, j, i) * p[1];
                prob.push(t);
                weighted.push(t * (i + j) as f64);
            }
        }
    }
    (pairwise_sum(&prob), pairwise_sum(&weighted))
}

/// Corner term at `m`: `S^x = kx`, `S^y = ky` after `m - 1` observations,
/// then a (1,1) observation.
fn corner_terms(ker: &Kernel, m: usize, kx: usize, ky: usize) -> f64 {
    if ker.p[3] == 0.0 {
        return 0.0;
    }
    let (m, kx, ky) = (m as i64, kx as i64, ky as i64);
    let v: Vec<f64> = (1..=kx.min(ky) + 1)
        .map(|i| ker.multinomial(m - kx - ky - 2 + i, kx + 1 - i, ky + 1 - i, i - 1) * ker.p[3])
        .collect();
    pairwise_sum(&v)
}

fn stop_terms(ker: &Kernel, m: usize, kx: usize, ky: usize) -> StopTerms {
    let p = ker.p;
    let swapped = [p[0], p[2], p[1], p[3]];
    let (hx, hx_sy) = margin_terms(ker, p, m, kx, ky, false);
    let (hy, hy_sx) = margin_terms(ker, swapped, m, ky, kx, true);
    let hc = corner_terms(ker, m, kx, ky);
    StopTerms {
        hit_x: hx,
        hit_y: hy,
        corner: hc,
        sx: (hx + hc) * (kx + 1) as f64 + hy_sx,
        sy: (hy + hc) * (ky + 1) as f64 + hx_sy,
    }
}

/// Probability of reaching `N*` with `S^x <= kx` and `S^y <= ky`, together
/// with the count-weighted sums `E[S^x 1{..}]` and `E[S^y 1{..}]`.
fn alive_at_n(ker: &Kernel, n: usize, kx: usize, ky: usize, exec: Execution) -> (f64, f64, f64) {
    let (n, kxi, kyi) = (n as i64, kx as i64, ky as i64);
    let kl = kx.min(ky);
    let per_z = map_range(exec, 0..kl + 1, |z| {
        let z = z as i64;
        let mut p = Vec::new();
        let mut wx = Vec::new();
        let mut wy = Vec::new();
        for i in 0..=kxi - z {
            for j in 0..=(kyi - z).min(n - z - i) {
                let t = ker.multinomial(n - z - i - j, i, j, z);
                p.push(t);
                wx.push(t * (z + i) as f64);
                wy.push(t * (z + j) as f64);
            }
        }
        [pairwise_sum(&p), pairwise_sum(&wx), pairwise_sum(&wy)]
    });
    let col = |c: usize| pairwise_sum(&per_z.iter().map(|v| v[c]).collect::<Vec<_>>());
    (col(0), col(1), col(2))
}

/// `P(S^x_{N*} <= k*_x, S^y_{N*} <= k*_y)`.
pub fn non_rejection_prob(design: &BivariateDesign, params: &JointBernoulliParams) -> f64 {
    non_rejection_prob_with(design, params, Execution::default())
}

pub fn non_rejection_prob_with(design: &BivariateDesign, params: &JointBernoulliParams, exec: Execution) -> f64 {
    let (kx, ky) = design.effective_k();
    if kx >= design.n_star() && ky >= design.n_star() {
        // neither count can exceed its critical value
        return 1.0;
    }
    let ker = Kernel::new(design.n_star(), params);
    alive_at_n(&ker, design.n_star(), kx, ky, exec).0.clamp(0.0, 1.0)
}

/// Probability of rejecting the null hypothesis.
pub fn power_exact(design: &BivariateDesign, params: &JointBernoulliParams) -> f64 {
    (1.0 - non_rejection_prob(design, params)).clamp(0.0, 1.0)
}

pub fn power_exact_with(design: &BivariateDesign, params: &JointBernoulliParams, exec: Execution) -> f64 {
    (1.0 - non_rejection_prob_with(design, params, exec)).clamp(0.0, 1.0)
}

fn closed_form(design: &BivariateDesign, params: &JointBernoulliParams, exec: Execution) -> (StoppingPmf, [f64; 2]) {
    let n = design.n_star();
    let (kx, ky) = design.effective_k();
    let ker = Kernel::new(n, params);
    let kl = kx.min(ky);
    let per_m = map_range(exec, 0..n + 1, |m| {
        if m <= kl {
            StopTerms::default()
        } else {
            stop_terms(&ker, m, kx, ky)
        }
    });
    let (alive, ax, ay) = alive_at_n(&ker, n, kx, ky, exec);
    let mut pmf = StoppingPmf::zeros(n, design.k_lower().min(n));
    for (m, t) in per_m.iter().enumerate() {
        pmf.hit_x[m] = t.hit_x;
        pmf.hit_y[m] = t.hit_y;
        pmf.corner[m] = t.corner;
    }
    pmf.continue_mass = alive;
    let est = |f: fn(&StopTerms) -> f64, alive_w: f64| {
        let mut v: Vec<f64> = per_m
            .iter()
            .enumerate()
            .skip(1)
            .map(|(m, t)| f(t) / m as f64)
            .collect();
        v.push(alive_w / n as f64);
        pairwise_sum(&v)
    };
    let ex = est(|t| t.sx, ax);
    let ey = est(|t| t.sy, ay);
    (pmf, [ex, ey])
}

/// Stopping-time distribution from the closed-form multinomial sums.
pub fn stopping_pmf_exact(design: &BivariateDesign, params: &JointBernoulliParams) -> StoppingPmf {
    stopping_pmf_exact_with(design, params, Execution::default())
}

pub fn stopping_pmf_exact_with(design: &BivariateDesign, params: &JointBernoulliParams, exec: Execution) -> StoppingPmf {
    closed_form(design, params, exec).0
}

/// `E[theta_hat]` for one margin from the closed-form sums.
pub fn estimator_expectation_exact(design: &BivariateDesign, params: &JointBernoulliParams, margin: Margin) -> f64 {
    let e = closed_form(design, params, Execution::default()).1;
    match margin {
        Margin::X => e[0],
        Margin::Y => e[1],
    }
}

fn forward_dp(design: &BivariateDesign, params: &JointBernoulliParams) -> (StoppingPmf, [f64; 2]) {
    let n = design.n_star();
    let (kx, ky) = design.effective_k();
    let [p00, p10, p01, p11] = params.cells();
    let w = ky + 1;
    let mut layer = vec![0.0f64; (kx + 1) * w];
    layer[0] = 1.0;
    let mut pmf = StoppingPmf::zeros(n, design.k_lower().min(n));
    let mut ex = vec![0.0; n + 1];
    let mut ey = vec![0.0; n + 1];
    for step in 1..=n {
        // mass leaving through the boundaries at this step
        let mut hx = 0.0;
        let mut hx_sy = 0.0;
        for j in 0..=ky {
            let q = layer[kx * w + j];
            let out = q * p10 + if j < ky { q * p11 } else { 0.0 };
            hx += out;
            hx_sy += q * p10 * j as f64 + if j < ky { q * p11 * (j + 1) as f64 } else { 0.0 };
        }
        let mut hy = 0.0;
        let mut hy_sx = 0.0;
        for i in 0..=kx {
            let q = layer[i * w + ky];
            let out = q * p01 + if i < kx { q * p11 } else { 0.0 };
            hy += out;
            hy_sx += q * p01 * i as f64 + if i < kx { q * p11 * (i + 1) as f64 } else { 0.0 };
        }
        let hc = layer[kx * w + ky] * p11;
        pmf.hit_x[step] = hx;
        pmf.hit_y[step] = hy;
        pmf.corner[step] = hc;
        ex[step] = ((hx + hc) * (kx + 1) as f64 + hy_sx) / step as f64;
        ey[step] = ((hy + hc) * (ky + 1) as f64 + hx_sy) / step as f64;

        // in-place update, high indices first so sources are still old
        for i in (0..=kx).rev() {
            for j in (0..=ky).rev() {
                let mut v = layer[i * w + j] * p00;
                if i > 0 {
                    v += layer[(i - 1) * w + j] * p10;
                }
                if j > 0 {
                    v += layer[i * w + j - 1] * p01;
                }
                if i > 0 && j > 0 {
                    v += layer[(i - 1) * w + j - 1] * p11;
                }
                layer[i * w + j] = v;
            }
        }
    }
    pmf.continue_mass = pairwise_sum(&layer);
    let mut wx = Vec::with_capacity(layer.len());
    let mut wy = Vec::with_capacity(layer.len());
    for i in 0..=kx {
        for j in 0..=ky {
            wx.push(layer[i * w + j] * i as f64);
            wy.push(layer[i * w + j] * j as f64);
        }
    }
    ex[0] = pairwise_sum(&wx) / n as f64;
    ey[0] = pairwise_sum(&wy) / n as f64;
    (pmf, [pairwise_sum(&ex), pairwise_sum(&ey)])
}

/// Stopping-time distribution by forward recursion over the alive lattice.
pub fn lattice_forward_dp(design: &BivariateDesign, params: &JointBernoulliParams) -> StoppingPmf {
    forward_dp(design, params).0
}

/// `E[theta_hat]` for one margin by forward recursion.
pub fn estimator_expectation_dp(design: &BivariateDesign, params: &JointBernoulliParams, margin: Margin) -> f64 {
    let e = forward_dp(design, params).1;
    match margin {
        Margin::X => e[0],
        Margin::Y => e[1],
    }
}

/// Total probability of stopping at the corner, `P(both margins cross at M)`.
///
/// Only the corner sums are evaluated, so this stays cheap for large designs.
pub fn corner_mass_exact(design: &BivariateDesign, params: &JointBernoulliParams) -> f64 {
    let n = design.n_star();
    let (kx, ky) = design.effective_k();
    let ker = Kernel::new(n, params);
    let start = kx + ky + 2 - (kx.min(ky) + 1);
    let v = map_range(Execution::default(), start..n + 1, |m| corner_terms(&ker, m, kx, ky));
    pairwise_sum(&v)
}

/// Average sample number `E[M*]`.
pub fn asn_exact(design: &BivariateDesign, params: &JointBernoulliParams) -> f64 {
    stopping_pmf_exact(design, params).asn()
}

/// `E[M*^2]`.
pub fn second_moment_exact(design: &BivariateDesign, params: &JointBernoulliParams) -> f64 {
    stopping_pmf_exact(design, params).second_moment()
}

/// Variance and coefficient of variation of `M*`.
pub fn variance_cv(design: &BivariateDesign, params: &JointBernoulliParams) -> Result<(f64, f64)> {
    variance_cv_from(&stopping_pmf_exact(design, params))
}

pub fn variance_cv_from(pmf: &StoppingPmf) -> Result<(f64, f64)> {
    let i1 = pmf.asn();
    let var = pmf.second_moment() - i1 * i1;
    if var < -1e-9 {
        return Err(Error::Consistency(format!("negative variance {var:e}")));
    }
    let var = var.max(0.0);
    Ok((var, var.sqrt() / i1))
}

/// ASN of the single-margin curtailed test with critical value `k`.
pub fn marginal_asn(n: usize, k: usize, theta: f64) -> f64 {
    if k >= n {
        return n as f64;
    }
    let (nf, kf) = (n as f64, k as f64);
    nf * inc_beta(1.0 - theta, nf - kf, kf + 1.0) + (kf + 1.0) / theta * inc_beta(theta, kf + 2.0, nf - kf)
}

/// Lower bound built from the two marginal walks as if independent.
fn l1_bound(n: usize, kx: usize, ky: usize, tx: f64, ty: f64) -> f64 {
    // orient so that `ka >= kb`
    let (ka, kb, ta, tb) = if kx >= ky { (kx, ky, tx, ty) } else { (ky, kx, ty, tx) };
    let mut terms = vec![marginal_asn(n, ka, ta)];
    if kb < n {
        let kbf = kb as f64;
        for i in kb + 1..=ka.min(n - 1) {
            terms.push(-inc_beta(tb, kbf + 1.0, (i - kb) as f64));
        }
        for i in ka + 1..n {
            terms.push(
                -inc_beta(tb, kbf + 1.0, (i - kb) as f64) * inc_beta(1.0 - ta, (i - ka) as f64, ka as f64 + 1.0),
            );
        }
    }
    pairwise_sum(&terms)
}

/// ASN bounds `(lower, upper)`; the direction depends on the sign of `rho`.
pub fn asn_bounds(design: &BivariateDesign, params: &JointBernoulliParams) -> (f64, f64) {
    let n = design.n_star();
    let (kx, ky) = design.effective_k();
    let (tx, ty) = (params.theta_x(), params.theta_y());
    let l1 = l1_bound(n, kx, ky, tx, ty);
    let rho = params.rho();
    if rho > 0.0 {
        let u = marginal_asn(n, kx, tx).min(marginal_asn(n, ky, ty));
        (l1, u)
    } else if rho < 0.0 {
        ((design.k_lower() + 1).min(n) as f64, l1)
    } else {
        (l1, l1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::make_params;

    fn fig3() -> BivariateDesign {
        BivariateDesign::new(121, 19, 18).unwrap()
    }

    #[test]
    fn fig3_power() {
        let d = fig3();
        let p0 = power_exact(&d, &make_params(0.05, 0.1, 0.1).unwrap());
        let p1 = power_exact(&d, &make_params(0.1, 0.2, 0.1).unwrap());
        assert!((p0 - 0.0321).abs() < 5e-4, "{p0}");
        assert!((p1 - 0.9065).abs() < 5e-4, "{p1}");
    }

    #[test]
    fn closed_form_matches_dp() {
        let d = fig3();
        for (tx, ty, rho) in [(0.1, 0.2, 0.1), (0.25, 0.25, -0.1), (0.05, 0.3, 0.0), (0.2, 0.2, 0.9)] {
            let p = make_params(tx, ty, rho).unwrap();
            let a = stopping_pmf_exact(&d, &p);
            let b = lattice_forward_dp(&d, &p);
            assert!(a.tv_distance(&b) < 1e-10);
            for mg in [Margin::X, Margin::Y] {
                let ea = estimator_expectation_exact(&d, &p, mg);
                let eb = estimator_expectation_dp(&d, &p, mg);
                assert!((ea - eb).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn support_starts_after_k_lower() {
        let d = fig3();
        let p = make_params(0.3, 0.3, 0.2).unwrap();
        let pmf = stopping_pmf_exact(&d, &p);
        for m in 0..=18 {
            assert_eq!(pmf.stop_mass(m), 0.0);
        }
        assert!(pmf.stop_mass(19) > 0.0);
        let total = pmf.rejection_prob() + pmf.continue_mass;
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn table_asn_entries() {
        let d = fig3();
        let e = asn_exact(&d, &make_params(0.05, 0.1, 0.1).unwrap());
        assert!((e - 120.6653).abs() < 5e-4, "{e}");
        let e = asn_exact(&d, &make_params(0.25, 0.25, 0.1).unwrap());
        assert!((e - 69.7126).abs() < 5e-4, "{e}");
        let e = asn_exact(&d, &make_params(0.1, 0.1, -0.1).unwrap());
        assert!((e - 120.5035).abs() < 5e-4, "{e}");
    }

    #[test]
    fn bounds_at_table_point() {
        let d = fig3();
        let (lo, hi) = asn_bounds(&d, &make_params(0.25, 0.25, 0.1).unwrap());
        assert!((lo - 69.2791).abs() < 5e-4, "{lo}");
        assert!((hi - 75.9630).abs() < 5e-4, "{hi}");
        let (_, hi) = asn_bounds(&d, &make_params(0.25, 0.25, -0.1).unwrap());
        assert!((hi - 69.2791).abs() < 5e-4);
    }

    #[test]
    fn independence_collapses_bounds() {
        let d = fig3();
        for (tx, ty) in [(0.1, 0.2), (0.25, 0.1), (0.05, 0.05)] {
            let p = make_params(tx, ty, 0.0).unwrap();
            let (lo, hi) = asn_bounds(&d, &p);
            assert_eq!(lo, hi);
            assert!((lo - asn_exact(&d, &p)).abs() < 1e-6);
        }
    }

    #[test]
    fn variance_table_point() {
        let d = fig3();
        let (v, cv) = variance_cv(&d, &make_params(0.05, 0.1, 0.1).unwrap()).unwrap();
        assert!((v - 6.1438).abs() < 5e-3, "{v}");
        assert!((cv - 0.0205).abs() < 5e-4, "{cv}");
    }

    #[test]
    fn unreachable_boundaries() {
        let d = BivariateDesign::new(10, 9, 12).unwrap();
        let p = make_params(0.01, 0.01, 0.0).unwrap();
        let pmf = stopping_pmf_exact(&d, &p);
        assert!(pmf.hit_y.iter().all(|&v| v == 0.0));
        assert!((pmf.rejection_prob() + pmf.continue_mass - 1.0).abs() < 1e-12);
        assert!(pmf.tv_distance(&lattice_forward_dp(&d, &p)) < 1e-12);
    }

    #[test]
    fn lattice_counts_margins() {
        let mut c = LatticeCounts::default();
        c.record(true, true);
        c.record(true, false);
        c.record(false, false);
        assert_eq!((c.s_x(), c.s_y(), c.total()), (2, 1, 3));
    }
}
