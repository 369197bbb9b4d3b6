//! Resumable monitoring of a live event stream.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::design::BivariateDesign;
use crate::error::{Error, Result};
use crate::exact::LatticeCounts;
use crate::inference::{post_test_estimate, PostTestEstimate};
use crate::simulator::{Event, Status, TestState};

pub const STATE_VERSION: u32 = 1;

/// Monitor state between events.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonitorState {
    design: BivariateDesign,
    test: TestState,
}

/// What the monitor reports after each event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub seq: u64,
    pub s_x: u64,
    pub s_y: u64,
    pub k_x: usize,
    pub k_y: usize,
    pub n_star: usize,
    pub status: Status,
    /// Present once the status leaves `open`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimate: Option<PostTestEstimate>,
}

impl MonitorState {
    pub fn new(design: BivariateDesign) -> Self {
        MonitorState {
            design,
            test: TestState::default(),
        }
    }

    pub fn design(&self) -> &BivariateDesign {
        &self.design
    }
    pub fn counts(&self) -> LatticeCounts {
        self.test.counts
    }
    pub fn last_seq(&self) -> u64 {
        self.test.counts.total()
    }
    pub fn status(&self) -> Status {
        self.test.status
    }
    pub fn test_state(&self) -> TestState {
        self.test
    }
}

/// Applies one event. Errors leave `state` untouched.
pub fn monitor_step(state: &MonitorState, event: Event) -> Result<(MonitorState, DecisionRecord)> {
    if !state.status().is_open() {
        return Err(Error::Closed(format!("{:?}", state.status())));
    }
    let expected = state.last_seq() + 1;
    if event.seq != expected {
        return Err(Error::Sequence {
            expected,
            got: event.seq,
        });
    }
    let mut next = *state;
    let status = next.test.step(&state.design, event.x, event.y)?;
    let counts = next.test.counts;
    let estimate = if status.is_open() {
        None
    } else {
        Some(post_test_estimate(&counts, counts.total())?)
    };
    let record = DecisionRecord {
        seq: event.seq,
        s_x: counts.s_x(),
        s_y: counts.s_y(),
        k_x: state.design.k_x(),
        k_y: state.design.k_y(),
        n_star: state.design.n_star(),
        status,
        estimate,
    };
    Ok((next, record))
}

/// SHA-256 of the design's canonical JSON form.
pub fn design_hash(design: &BivariateDesign) -> String {
    let json = serde_json::to_string(design).expect("design serializes");
    hex::encode(Sha256::digest(json.as_bytes()))
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateDocument {
    version: u32,
    design: BivariateDesign,
    design_hash: String,
    counts: LatticeCounts,
    last_seq: u64,
    status: Status,
}

/// Serializes the state as a versioned JSON document.
pub fn state_save(state: &MonitorState) -> String {
    let doc = StateDocument {
        version: STATE_VERSION,
        design: state.design,
        design_hash: design_hash(&state.design),
        counts: state.counts(),
        last_seq: state.last_seq(),
        status: state.status(),
    };
    serde_json::to_string_pretty(&doc).expect("state serializes")
}

/// Restores and validates a saved state.
pub fn state_load(document: &str) -> Result<MonitorState> {
    let bad = |m: String| Error::StateDocument(m);
    let value: serde_json::Value = serde_json::from_str(document).map_err(|e| bad(e.to_string()))?;
    match value.get("version").and_then(|v| v.as_u64()) {
        Some(v) if v == STATE_VERSION as u64 => {}
        Some(v) => return Err(bad(format!("unsupported version {v}, expected {STATE_VERSION}"))),
        None => return Err(bad("missing version".into())),
    }
    let doc: StateDocument = serde_json::from_value(value).map_err(|e| bad(e.to_string()))?;
    if doc.design_hash != design_hash(&doc.design) {
        return Err(bad("design hash does not match the embedded design".into()));
    }
    if doc.last_seq != doc.counts.total() {
        return Err(bad(format!(
            "last_seq {} disagrees with {} recorded events",
            doc.last_seq,
            doc.counts.total()
        )));
    }
    let test = TestState::from_counts(&doc.design, doc.counts)?;
    if test.status != doc.status {
        return Err(bad(format!("status {:?} inconsistent with counts (implies {:?})", doc.status, test.status)));
    }
    Ok(MonitorState {
        design: doc.design,
        test,
    })
}

/// Restores a state and checks that it belongs to `design`.
pub fn state_load_for(document: &str, design: &BivariateDesign) -> Result<MonitorState> {
    let s = state_load(document)?;
    if design_hash(&s.design) != design_hash(design) {
        return Err(Error::StateDocument("state was saved under a different design".into()));
    }
    Ok(s)
}
