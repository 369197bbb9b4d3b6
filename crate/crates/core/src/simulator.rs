//! Running the test on observation streams, and Monte Carlo studies.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::design::BivariateDesign;
use crate::error::{Error, Result};
use crate::exact::LatticeCounts;
use crate::inference::{confidence_region, post_test_estimate};
use crate::par::{map_range, pairwise_sum, Execution};
use crate::params::JointBernoulliParams;

mod bit {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(u8::from(*v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        match u8::deserialize(d)? {
            0 => Ok(false),
            1 => Ok(true),
            v => Err(D::Error::custom(format!("expected 0 or 1, got {v}"))),
        }
    }
}

/// One observation: whether each side effect occurred.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    #[serde(with = "bit")]
    pub x: bool,
    #[serde(with = "bit")]
    pub y: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Reject,
    NotReject,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    X,
    Y,
    Corner,
    None,
}

/// State of a running test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Open,
    RejectedX,
    RejectedY,
    RejectedCorner,
    Exhausted,
}

impl Status {
    pub fn is_open(self) -> bool {
        self == Status::Open
    }

    pub fn boundary(self) -> Boundary {
        match self {
            Status::RejectedX => Boundary::X,
            Status::RejectedY => Boundary::Y,
            Status::RejectedCorner => Boundary::Corner,
            Status::Open | Status::Exhausted => Boundary::None,
        }
    }
}

/// Result of running the test to a decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub decision: Decision,
    pub m_star: u64,
    pub boundary: Boundary,
    pub counts: LatticeCounts,
}

/// Counts plus the stopping rule; shared by [`run_test`] and the monitor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestState {
    pub counts: LatticeCounts,
    pub status: Status,
}

impl Default for TestState {
    fn default() -> Self {
        TestState {
            counts: LatticeCounts::default(),
            status: Status::Open,
        }
    }
}

impl TestState {
    /// Status implied by `counts` under `design`, or an error if the counts
    /// could not have been produced by the stopping rule.
    pub fn from_counts(design: &BivariateDesign, counts: LatticeCounts) -> Result<Self> {
        let (kx, ky) = (design.k_x() as u64, design.k_y() as u64);
        let (sx, sy, n) = (counts.s_x(), counts.s_y(), counts.total());
        let bad = |msg: String| Err(Error::StateDocument(msg));
        if n > design.n_star() as u64 {
            return bad(format!("{n} observations exceed N* = {}", design.n_star()));
        }
        if sx > kx + 1 || sy > ky + 1 {
            return bad(format!("counts ({sx}, {sy}) overshoot the boundaries ({}, {})", kx + 1, ky + 1));
        }
        let status = match (sx > kx, sy > ky) {
            (true, true) => {
                // only a final (1,1) event can push both past at once
                if counts.n11 == 0 {
                    return bad("simultaneous crossing without a joint event".into());
                }
                Status::RejectedCorner
            }
            (true, false) => Status::RejectedX,
            (false, true) => Status::RejectedY,
            (false, false) if n == design.n_star() as u64 => Status::Exhausted,
            (false, false) => Status::Open,
        };
        Ok(TestState { counts, status })
    }

    /// Records one observation and applies the stopping rule.
    pub fn step(&mut self, design: &BivariateDesign, x: bool, y: bool) -> Result<Status> {
        if !self.status.is_open() {
            return Err(Error::Closed(format!("{:?}", self.status)));
        }
        self.counts.record(x, y);
        let cross_x = self.counts.s_x() > design.k_x() as u64;
        let cross_y = self.counts.s_y() > design.k_y() as u64;
        self.status = match (cross_x, cross_y) {
            (true, true) => Status::RejectedCorner,
            (true, false) => Status::RejectedX,
            (false, true) => Status::RejectedY,
            _ if self.counts.total() >= design.n_star() as u64 => Status::Exhausted,
            _ => Status::Open,
        };
        Ok(self.status)
    }

    pub fn outcome(&self) -> Option<TestOutcome> {
        let decision = match self.status {
            Status::Open => return None,
            Status::Exhausted => Decision::NotReject,
            _ => Decision::Reject,
        };
        Some(TestOutcome {
            decision,
            m_star: self.counts.total(),
            boundary: self.status.boundary(),
            counts: self.counts,
        })
    }
}

/// Runs the test over `stream`, consuming events until a decision.
///
/// Events must be numbered `1, 2, ...`. Events after the decision are not
/// read.
pub fn run_test<I>(design: &BivariateDesign, stream: I) -> Result<TestOutcome>
where
    I: IntoIterator<Item = Event>,
{
    let mut state = TestState::default();
    let mut expected = 1;
    for ev in stream {
        if ev.seq != expected {
            return Err(Error::Sequence { expected, got: ev.seq });
        }
        state.step(design, ev.x, ev.y)?;
        if let Some(out) = state.outcome() {
            return Ok(out);
        }
        expected += 1;
    }
    Err(Error::StreamUnderflow {
        consumed: state.counts.total(),
    })
}

/// Infinite i.i.d. event source. Replicate `r` of seed `s` uses ChaCha
/// stream `r` of key `s`, so it is a pure function of `(s, r)`.
#[derive(Debug, Clone)]
pub struct EventSampler {
    rng: ChaCha8Rng,
    cdf: [f64; 3],
    last: usize,
    seq: u64,
}

impl EventSampler {
    pub fn new(params: &JointBernoulliParams, seed: u64, replicate: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(replicate);
        let p = params.cells();
        let cdf = [p[0], p[0] + p[1], p[0] + p[1] + p[2]];
        let last = (0..4).rev().find(|&i| p[i] > 0.0).unwrap_or(0);
        EventSampler { rng, cdf, last, seq: 0 }
    }

    /// Draws a cell index in the order `(00, 10, 01, 11)`.
    #[inline]
    fn draw(&mut self) -> usize {
        let u: f64 = self.rng.random();
        // a zero-width cell is never selected: u < cdf is strict
        let cell = if u < self.cdf[0] {
            0
        } else if u < self.cdf[1] {
            1
        } else if u < self.cdf[2] {
            2
        } else {
            3
        };
        cell.min(self.last)
    }
}

impl Iterator for EventSampler {
    type Item = Event;
    fn next(&mut self) -> Option<Event> {
        let c = self.draw();
        self.seq += 1;
        Some(Event {
            seq: self.seq,
            x: c == 1 || c == 3,
            y: c == 2 || c == 3,
        })
    }
}

/// The first `max_n` events of replicate 0 for `seed`.
pub fn sample_stream(params: &JointBernoulliParams, seed: u64, max_n: usize) -> Vec<Event> {
    EventSampler::new(params, seed, 0).take(max_n).collect()
}

/// Per-replicate result of a Monte Carlo study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub m_star: u64,
    pub boundary: Boundary,
    pub counts: LatticeCounts,
    pub theta_hat_x: f64,
    pub theta_hat_y: f64,
    /// Whether the confidence ellipse covers the true proportions.
    pub covered: bool,
}

fn run_replicate(design: &BivariateDesign, params: &JointBernoulliParams, seed: u64, r: u64, level: f64) -> Result<ReplicateRecord> {
    let mut sampler = EventSampler::new(params, seed, r);
    let mut state = TestState::default();
    let out = loop {
        let c = sampler.draw();
        state.step(design, c == 1 || c == 3, c == 2 || c == 3)?;
        if let Some(o) = state.outcome() {
            break o;
        }
    };
    let est = post_test_estimate(&out.counts, out.m_star)?;
    let region = confidence_region(&est, level)?;
    Ok(ReplicateRecord {
        m_star: out.m_star,
        boundary: out.boundary,
        counts: out.counts,
        theta_hat_x: est.theta_hat_x,
        theta_hat_y: est.theta_hat_y,
        covered: region.contains([params.theta_x(), params.theta_y()]),
    })
}

/// Runs `reps` independent replicates and returns them in replicate order.
pub fn replicate_records(
    design: &BivariateDesign,
    params: &JointBernoulliParams,
    reps: u64,
    seed: u64,
    level: f64,
    exec: Execution,
) -> Result<Vec<ReplicateRecord>> {
    map_range(exec, 0..reps as usize, |r| run_replicate(design, params, seed, r as u64, level))
        .into_iter()
        .collect()
}

/// Summary of a Monte Carlo study. Standard errors are those of the
/// corresponding sample means.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSummary {
    pub reps: u64,
    pub seed: u64,
    pub power: f64,
    pub power_se: f64,
    pub asn: f64,
    pub asn_se: f64,
    pub mean_theta_hat_x: f64,
    pub mean_theta_hat_y: f64,
    pub bias_x: f64,
    pub bias_x_se: f64,
    pub bias_y: f64,
    pub bias_y_se: f64,
    /// Fractions stopped at the X boundary, Y boundary, corner, and not at all.
    pub boundary_split: [f64; 4],
    pub level: f64,
    pub coverage: f64,
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = pairwise_sum(v) / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let sq: Vec<f64> = v.iter().map(|x| (x - mean) * (x - mean)).collect();
    (mean, (pairwise_sum(&sq) / (n - 1.0) / n).sqrt())
}

/// Summarizes replicate records; reduction order is the record order.
pub fn summarize(records: &[ReplicateRecord], params: &JointBernoulliParams, seed: u64, level: f64) -> MonteCarloSummary {
    let col = |f: &dyn Fn(&ReplicateRecord) -> f64| records.iter().map(f).collect::<Vec<f64>>();
    let ind = |b: bool| if b { 1.0 } else { 0.0 };
    let (power, power_se) = mean_se(&col(&|r| ind(r.boundary != Boundary::None)));
    let (asn, asn_se) = mean_se(&col(&|r| r.m_star as f64));
    let (mx, sx) = mean_se(&col(&|r| r.theta_hat_x));
    let (my, sy) = mean_se(&col(&|r| r.theta_hat_y));
    let frac = |b: Boundary| mean_se(&col(&|r| ind(r.boundary == b))).0;
    MonteCarloSummary {
        reps: records.len() as u64,
        seed,
        power,
        power_se,
        asn,
        asn_se,
        mean_theta_hat_x: mx,
        mean_theta_hat_y: my,
        bias_x: mx - params.theta_x(),
        bias_x_se: sx,
        bias_y: my - params.theta_y(),
        bias_y_se: sy,
        boundary_split: [frac(Boundary::X), frac(Boundary::Y), frac(Boundary::Corner), frac(Boundary::None)],
        level,
        coverage: mean_se(&col(&|r| ind(r.covered))).0,
    }
}

/// Monte Carlo study with the default execution and a 95% coverage level.
pub fn monte_carlo(design: &BivariateDesign, params: &JointBernoulliParams, reps: u64, seed: u64) -> Result<MonteCarloSummary> {
    monte_carlo_with(design, params, reps, seed, 0.95, Execution::default())
}

pub fn monte_carlo_with(
    design: &BivariateDesign,
    params: &JointBernoulliParams,
    reps: u64,
    seed: u64,
    level: f64,
    exec: Execution,
) -> Result<MonteCarloSummary> {
    if reps == 0 {
        return crate::error::domain("reps must be at least 1");
    }
    let records = replicate_records(design, params, reps, seed, level, exec)?;
    Ok(summarize(&records, params, seed, level))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::make_params;

    fn fig3() -> BivariateDesign {
        BivariateDesign::new(121, 19, 18).unwrap()
    }

    fn stream(cells: impl IntoIterator<Item = (bool, bool)>) -> Vec<Event> {
        cells
            .into_iter()
            .enumerate()
            .map(|(i, (x, y))| Event { seq: i as u64 + 1, x, y })
            .collect()
    }

    #[test]
    fn joint_events_cross_y_first() {
        let out = run_test(&fig3(), stream(std::iter::repeat((true, true)).take(200))).unwrap();
        assert_eq!(out.decision, Decision::Reject);
        assert_eq!(out.m_star, 19);
        assert_eq!(out.boundary, Boundary::Y);
    }

    #[test]
    fn null_stream_exhausts() {
        let out = run_test(&fig3(), stream(std::iter::repeat((false, false)).take(121))).unwrap();
        assert_eq!(out.decision, Decision::NotReject);
        assert_eq!((out.m_star, out.boundary), (121, Boundary::None));
    }

    #[test]
    fn corner_crossing() {
        let d = BivariateDesign::new(10, 2, 2).unwrap();
        let mut cells = vec![(true, false), (false, true), (true, false), (false, true)];
        cells.push((true, true));
        let out = run_test(&d, stream(cells)).unwrap();
        assert_eq!((out.m_star, out.boundary), (5, Boundary::Corner));
    }

    #[test]
    fn stream_errors() {
        let d = fig3();
        let e = run_test(&d, stream(std::iter::repeat((false, false)).take(50))).unwrap_err();
        assert_eq!(e, Error::StreamUnderflow { consumed: 50 });
        let mut s = stream(std::iter::repeat((false, false)).take(5));
        s[3].seq = 7;
        assert_eq!(run_test(&d, s).unwrap_err(), Error::Sequence { expected: 4, got: 7 });
    }

    #[test]
    fn sampler_is_deterministic() {
        let p = make_params(0.1, 0.2, 0.1).unwrap();
        assert_eq!(sample_stream(&p, 7, 500), sample_stream(&p, 7, 500));
        assert_ne!(sample_stream(&p, 7, 500), sample_stream(&p, 8, 500));
    }

    #[test]
    fn boundary_params_never_emit_empty_cell() {
        let (lo, hi) = crate::params::rho_bounds(0.1, 0.2);
        let p = make_params(0.1, 0.2, lo).unwrap();
        assert!(sample_stream(&p, 1, 20_000).iter().all(|e| !(e.x && e.y)));
        let p = make_params(0.1, 0.2, hi).unwrap();
        assert!(sample_stream(&p, 1, 20_000).iter().all(|e| !(e.x && !e.y)));
    }

    #[test]
    fn event_json_uses_bits() {
        let e = Event { seq: 3, x: true, y: false };
        assert_eq!(serde_json::to_string(&e).unwrap(), r#"{"seq":3,"x":1,"y":0}"#);
        assert!(serde_json::from_str::<Event>(r#"{"seq":3,"x":2,"y":0}"#).is_err());
    }

    #[test]
    fn parallel_and_sequential_summaries_agree() {
        let p = make_params(0.1, 0.2, 0.1).unwrap();
        let d = fig3();
        let a = monte_carlo_with(&d, &p, 2000, 11, 0.95, Execution::Sequential).unwrap();
        let b = monte_carlo_with(&d, &p, 2000, 11, 0.95, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }
}
