//! Numerical primitives: log-gamma, the regularized incomplete beta function,
//! and univariate / bivariate normal distribution functions.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

const TWO_PI: f64 = 2.0 * PI;

/// Natural log of the gamma function for `x > 0`.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return domain(format!("ln_gamma requires x > 0, got {x}"));
    }
    Ok(lgamma(x))
}

#[inline]
pub(crate) fn lgamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

/// `ln n!` for `n = 0..=max`, tabulated once for the multinomial sums.
#[derive(Debug, Clone)]
pub(crate) struct LnFactorials(Vec<f64>);

impl LnFactorials {
    pub(crate) fn new(max: usize) -> Self {
        LnFactorials((0..=max).map(|n| lgamma(n as f64 + 1.0)).collect())
    }

    /// `ln n!`, or `-inf` (a vanishing multinomial coefficient) for negative `n`.
    #[inline]
    pub(crate) fn get(&self, n: i64) -> f64 {
        if n < 0 {
            f64::NEG_INFINITY
        } else {
            self.0[n as usize]
        }
    }
}

/// Regularized incomplete beta function `I_x(a, b)`.
pub fn reg_inc_beta(x: f64, a: f64, b: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return domain(format!("reg_inc_beta requires 0 <= x <= 1, got {x}"));
    }
    if !(a > 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite() {
        return domain(format!("reg_inc_beta requires a, b > 0, got a={a}, b={b}"));
    }
    Ok(inc_beta(x, a, b))
}

pub(crate) fn inc_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = a * x.ln() + b * (-x).ln_1p() - ln_beta(a, b);
    if x < (a + 1.0) / (a + b + 2.0) {
        (ln_front.exp() * beta_cf(x, a, b) / a).clamp(0.0, 1.0)
    } else {
        (1.0 - ln_front.exp() * beta_cf(1.0 - x, b, a) / b).clamp(0.0, 1.0)
    }
}

fn ln_beta(a: f64, b: f64) -> f64 {
    lgamma(a) + lgamma(b) - lgamma(a + b)
}

/// Continued fraction for the incomplete beta function (modified Lentz).
fn beta_cf(x: f64, a: f64, b: f64) -> f64 {
    const MAX_ITER: usize = 20_000;
    const EPS: f64 = 1e-16;
    const TINY: f64 = 1e-300;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Upper binomial tail `P(S_n >= k)` for `S_n ~ Bin(n, p)`.
pub(crate) fn binom_upper_tail(n: u64, k: u64, p: f64) -> f64 {
    if k == 0 {
        1.0
    } else if k > n {
        0.0
    } else {
        inc_beta(p, k as f64, (n - k + 1) as f64)
    }
}

/// Binomial cdf `P(S_n <= k)`.
pub(crate) fn binom_cdf(n: u64, k: u64, p: f64) -> f64 {
    if k >= n {
        1.0
    } else {
        inc_beta(1.0 - p, (n - k) as f64, (k + 1) as f64)
    }
}

/// Standard normal density.
pub fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / TWO_PI.sqrt()
}

/// Standard normal cdf.
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-z / SQRT_2)
}

/// Standard normal quantile for `0 < p < 1`.
pub fn norm_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return domain(format!("norm_quantile requires 0 < p < 1, got {p}"));
    }
    let mut z = -SQRT_2 * statrs::function::erf::erfc_inv(2.0 * p);
    // one Newton polish against our own cdf keeps the pair mutually inverse
    let dens = norm_pdf(z);
    if dens > 1e-300 {
        z -= (norm_cdf(z) - p) / dens;
    }
    Ok(z)
}

// Gauss-Legendre nodes (positive half) and weights of orders 6, 12 and 20.
const GL6: [(f64, f64); 3] = [
    (0.1713244923791705, 0.9324695142031522),
    (0.3607615730481384, 0.6612093864662647),
    (0.4679139345726904, 0.2386191860831970),
];
const GL12: [(f64, f64); 6] = [
    (0.04717533638651177, 0.9815606342467191),
    (0.1069393259953183, 0.9041172563704750),
    (0.1600783285433464, 0.7699026741943050),
    (0.2031674267230659, 0.5873179542866171),
    (0.2334925365383547, 0.3678314989981802),
    (0.2491470458134029, 0.1252334085114692),
];
const GL20: [(f64, f64); 10] = [
    (0.01761400713915212, 0.9931285991850949),
    (0.04060142980038694, 0.9639719272779138),
    (0.06267204833410906, 0.9122344282513259),
    (0.08327674157670475, 0.8391169718222188),
    (0.1019301198172404, 0.7463319064601508),
    (0.1181945319615184, 0.6360536807265150),
    (0.1316886384491766, 0.5108670019508271),
    (0.1420961093183821, 0.3737060887154196),
    (0.1491729864726037, 0.2277858511416451),
    (0.1527533871307259, 0.07652652113349733),
];

/// `P(U <= h, W <= k)` for a standard bivariate normal with correlation `rho`.
pub fn bvn_cdf(h: f64, k: f64, rho: f64) -> Result<f64> {
    if !(rho.abs() < 1.0) {
        return domain(format!("bvn_cdf requires |rho| < 1, got {rho}"));
    }
    if h.is_nan() || k.is_nan() {
        return domain("bvn_cdf limits must not be NaN");
    }
    Ok(bvn_lower(h, k, rho))
}

/// Lower-orthant probability; infinite limits allowed.
pub(crate) fn bvn_lower(h: f64, k: f64, rho: f64) -> f64 {
    bvn_upper(-h, -k, rho)
}

/// `P(U > h, W > k)`, Drezner-Wesolowsky reduction of the correlation
/// integral evaluated with fixed-order Gauss-Legendre rules (Genz 2004).
fn bvn_upper(h: f64, k: f64, r: f64) -> f64 {
    if h == f64::INFINITY || k == f64::INFINITY {
        return 0.0;
    }
    if h == f64::NEG_INFINITY {
        return if k == f64::NEG_INFINITY { 1.0 } else { norm_cdf(-k) };
    }
    if k == f64::NEG_INFINITY {
        return norm_cdf(-h);
    }
    if r == 0.0 {
        return norm_cdf(-h) * norm_cdf(-k);
    }

    let rule: &[(f64, f64)] = if r.abs() < 0.3 {
        &GL6
    } else if r.abs() < 0.75 {
        &GL12
    } else {
        &GL20
    };
    // nodes mapped from [-1, 1] to [0, 2]
    let nodes = rule
        .iter()
        .flat_map(|&(w, x)| [(w, 1.0 - x), (w, 1.0 + x)]);

    let mut hk = h * k;
    let mut bvn = 0.0;
    if r.abs() < 0.925 {
        let hs = 0.5 * (h * h + k * k);
        let asr = 0.5 * r.asin();
        for (w, x) in nodes {
            let sn = (asr * x).sin();
            bvn += w * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
        }
        bvn = bvn * asr / TWO_PI + norm_cdf(-h) * norm_cdf(-k);
    } else {
        let mut k = k;
        if r < 0.0 {
            k = -k;
            hk = -hk;
        }
        let as_ = (1.0 - r) * (1.0 + r);
        let mut a = as_.sqrt();
        let bs = (h - k) * (h - k);
        let c = (4.0 - hk) / 8.0;
        let d = (12.0 - hk) / 80.0;
        let asr = -0.5 * (bs / as_ + hk);
        if asr > -100.0 {
            bvn = a * asr.exp() * (1.0 - c * (bs - as_) * (1.0 - d * bs) / 3.0 + c * d * as_ * as_);
        }
        if hk > -100.0 {
            let b = bs.sqrt();
            let sp = TWO_PI.sqrt() * norm_cdf(-b / a);
            bvn -= (-0.5 * hk).exp() * sp * b * (1.0 - c * bs * (1.0 - d * bs) / 3.0);
        }
        a *= 0.5;
        let mut acc = 0.0;
        for (w, x) in nodes {
            let xs = (a * x) * (a * x);
            let asr = -0.5 * (bs / xs + hk);
            if asr > -100.0 {
                let sp = 1.0 + c * xs * (1.0 + 5.0 * d * xs);
                let rs = (1.0 - xs).sqrt();
                let ep = (-0.5 * hk * xs / ((1.0 + rs) * (1.0 + rs))).exp() / rs;
                acc += w * asr.exp() * (sp - ep);
            }
        }
        bvn = (a * acc - bvn) / TWO_PI;
        if r > 0.0 {
            bvn += norm_cdf(-h.max(k));
        } else if h >= k {
            bvn = -bvn;
        } else {
            let l = if h < 0.0 {
                norm_cdf(k) - norm_cdf(h)
            } else {
                norm_cdf(-h) - norm_cdf(-k)
            };
            bvn = l - bvn;
        }
    }
    bvn.clamp(0.0, 1.0)
}

/// Mean vector and covariance matrix of a bivariate normal law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BivariateNormalParams {
    pub mean: [f64; 2],
    pub cov: [[f64; 2]; 2],
}

impl BivariateNormalParams {
    /// Validates symmetry, positive variances and a nonnegative determinant.
    pub fn new(mean: [f64; 2], cov: [[f64; 2]; 2]) -> Result<Self> {
        let scale = cov[0][1].abs().max(cov[1][0].abs()).max(1.0);
        if (cov[0][1] - cov[1][0]).abs() > 1e-12 * scale {
            return domain("covariance matrix must be symmetric");
        }
        if !(cov[0][0] > 0.0 && cov[1][1] > 0.0) {
            return domain("covariance diagonal entries must be positive");
        }
        let p = BivariateNormalParams { mean, cov };
        if p.determinant() < 0.0 {
            return Err(Error::DegenerateCovariance {
                determinant: p.determinant(),
            });
        }
        Ok(p)
    }

    pub fn determinant(&self) -> f64 {
        self.cov[0][0] * self.cov[1][1] - self.cov[0][1] * self.cov[1][0]
    }

    pub fn sd(&self) -> [f64; 2] {
        [self.cov[0][0].sqrt(), self.cov[1][1].sqrt()]
    }

    pub fn correlation(&self) -> f64 {
        let [s1, s2] = self.sd();
        self.cov[0][1] / (s1 * s2)
    }

    fn standardized(&self) -> Result<(f64, [f64; 2], [f64; 2])> {
        let det = self.determinant();
        let r = self.correlation();
        if !(det > 0.0) || !(r.abs() < 1.0) {
            return Err(Error::DegenerateCovariance { determinant: det });
        }
        Ok((r, self.mean, self.sd()))
    }
}

fn standardize(x: f64, mu: f64, sd: f64) -> f64 {
    if x.is_infinite() {
        x
    } else {
        (x - mu) / sd
    }
}

fn check_box(lo: [f64; 2], hi: [f64; 2]) -> Result<()> {
    for i in 0..2 {
        if lo[i].is_nan() || hi[i].is_nan() || lo[i] > hi[i] {
            return domain(format!("rectangle bounds must satisfy lo <= hi, got {lo:?}, {hi:?}"));
        }
    }
    Ok(())
}

/// Probability of the rectangle `lo < (U, W) <= hi`; infinite bounds allowed.
pub fn bvn_rect(params: &BivariateNormalParams, lo: [f64; 2], hi: [f64; 2]) -> Result<f64> {
    check_box(lo, hi)?;
    let (r, mu, sd) = params.standardized()?;
    let a = [standardize(lo[0], mu[0], sd[0]), standardize(lo[1], mu[1], sd[1])];
    let b = [standardize(hi[0], mu[0], sd[0]), standardize(hi[1], mu[1], sd[1])];
    let p = bvn_lower(b[0], b[1], r) - bvn_lower(a[0], b[1], r) - bvn_lower(b[0], a[1], r)
        + bvn_lower(a[0], a[1], r);
    Ok(p.clamp(0.0, 1.0))
}

/// `E[Z1 1{Z1 <= h, Z2 <= k}]` for a standard bivariate normal.
fn std_partial_mean(h: f64, k: f64, r: f64) -> f64 {
    if h == f64::NEG_INFINITY || k == f64::NEG_INFINITY {
        return 0.0;
    }
    let s = (1.0 - r * r).sqrt();
    let first = if h == f64::INFINITY {
        0.0
    } else {
        let arg = if k == f64::INFINITY { f64::INFINITY } else { (k - r * h) / s };
        -norm_pdf(h) * norm_cdf(arg)
    };
    let second = if k == f64::INFINITY {
        0.0
    } else {
        let arg = if h == f64::INFINITY { f64::INFINITY } else { (h - r * k) / s };
        -r * norm_pdf(k) * norm_cdf(arg)
    };
    first + second
}

/// First partial moment `E[U 1{lo < (U, W) <= hi}]` of the first coordinate.
pub fn bvn_partial_mean(params: &BivariateNormalParams, lo: [f64; 2], hi: [f64; 2]) -> Result<f64> {
    check_box(lo, hi)?;
    let (r, mu, sd) = params.standardized()?;
    let a = [standardize(lo[0], mu[0], sd[0]), standardize(lo[1], mu[1], sd[1])];
    let b = [standardize(hi[0], mu[0], sd[0]), standardize(hi[1], mu[1], sd[1])];
    let g = |h, k| std_partial_mean(h, k, r);
    let z_part = g(b[0], b[1]) - g(a[0], b[1]) - g(b[0], a[1]) + g(a[0], a[1]);
    let prob = bvn_lower(b[0], b[1], r) - bvn_lower(a[0], b[1], r) - bvn_lower(b[0], a[1], r)
        + bvn_lower(a[0], a[1], r);
    Ok(mu[0] * prob + sd[0] * z_part)
}

/// Quantile of the chi-square distribution with two degrees of freedom.
pub fn chi2_quantile_2df(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return domain(format!("level must lie in (0, 1), got {level}"));
    }
    Ok(-2.0 * (-level).ln_1p())
}
