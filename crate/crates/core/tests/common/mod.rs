//! Shared helpers for the integration tests.
#![allow(dead_code)]

use bicurtail::{design_bivariate, BivariateDesign, DesignMethod, JointBernoulliParams, Rounding};

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct Compensated {
    sum: f64,
    carry: f64,
}

impl Compensated {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Everything the exhaustive enumeration reports about one design.
#[derive(Debug, Clone)]
pub struct Enumerated {
    pub hit_x: Vec<f64>,
    pub hit_y: Vec<f64>,
    pub corner: Vec<f64>,
    pub continue_mass: f64,
    pub asn: f64,
    pub second_moment: f64,
    pub e_theta_x: f64,
    pub e_theta_y: f64,
}

/// Walks every one of the `4^n` outcome sequences of length `N*` and
/// applies the stopping rule directly. Exponential; keep `N* <= 8`.
pub fn enumerate(n: usize, kx: usize, ky: usize, params: &JointBernoulliParams) -> Enumerated {
    let p = params.cells();
    let mut hit_x = vec![Compensated::default(); n + 1];
    let mut hit_y = hit_x.clone();
    let mut corner = hit_x.clone();
    let mut terminal = hit_x.clone();
    let mut cont = Compensated::default();
    let (mut ex, mut ey) = (Compensated::default(), Compensated::default());
    for code in 0..4usize.pow(n as u32) {
        let mut c = code;
        let mut prob = 1.0;
        let (mut sx, mut sy) = (0usize, 0usize);
        let mut stop = None;
        for m in 1..=n {
            let cell = c % 4;
            c /= 4;
            prob *= p[cell];
            if stop.is_none() {
                sx += (cell & 1 != 0) as usize;
                sy += (cell & 2 != 0) as usize;
                if sx > kx || sy > ky {
                    stop = Some((m, sx > kx, sy > ky, sx, sy));
                }
            }
        }
        if prob == 0.0 {
            continue;
        }
        let (m, tx, ty) = match stop {
            Some((m, bx, by, sx, sy)) => {
                match (bx, by) {
                    (true, true) => corner[m].add(prob),
                    (true, false) => hit_x[m].add(prob),
                    _ => hit_y[m].add(prob),
                }
                (m, sx as f64 / m as f64, sy as f64 / m as f64)
            }
            None => {
                cont.add(prob);
                (n, sx as f64 / n as f64, sy as f64 / n as f64)
            }
        };
        terminal[m].add(prob);
        ex.add(prob * tx);
        ey.add(prob * ty);
    }
    let mut asn = Compensated::default();
    let mut second = Compensated::default();
    for (m, t) in terminal.iter().enumerate() {
        asn.add(t.value() * m as f64);
        second.add(t.value() * (m * m) as f64);
    }
    let values = |v: &[Compensated]| v.iter().map(Compensated::value).collect::<Vec<_>>();
    Enumerated {
        hit_x: values(&hit_x),
        hit_y: values(&hit_y),
        corner: values(&corner),
        continue_mass: cont.value(),
        asn: asn.value(),
        second_moment: second.value(),
        e_theta_x: ex.value(),
        e_theta_y: ey.value(),
    }
}

/// Design of the local-alternative study: `theta1 = theta0 (1 + delta)` on
/// both margins, `alpha = 0.05` split evenly, `beta = 0.1`.
pub fn local_design(theta_x0: f64, theta_y0: f64, delta: f64, rounding: Rounding) -> BivariateDesign {
    design_bivariate(
        0.05,
        0.1,
        theta_x0,
        theta_x0 * (1.0 + delta),
        theta_y0,
        theta_y0 * (1.0 + delta),
        DesignMethod::Approx,
        rounding,
    )
    .unwrap()
}

/// `theta_x` grid of the bias study.
pub fn bias_grid() -> Vec<f64> {
    (0..=58).map(|i| 0.01 + 0.005 * i as f64).collect()
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}
