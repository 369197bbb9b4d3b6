use bicurtail::*;

/// Lays out a table of counts as a stream, joint events first.
fn stream_from_counts(c: LatticeCounts) -> Vec<Event> {
    let cells = [(true, true, c.n11), (true, false, c.n10), (false, true, c.n01), (false, false, c.n00)];
    let mut out = Vec::new();
    for (x, y, n) in cells {
        for _ in 0..n {
            out.push(Event { seq: out.len() as u64 + 1, x, y });
        }
    }
    out
}

#[test]
fn table_replay_runs_to_exhaustion() {
    let counts = LatticeCounts { n00: 63, n10: 18, n01: 11, n11: 25 };
    let design = BivariateDesign::new(117, 57, 57).unwrap();
    let stream = stream_from_counts(counts);
    let out = run_test(&design, stream.iter().copied()).unwrap();
    assert_eq!(out.decision, Decision::NotReject);
    assert_eq!(out.m_star, 117);
    assert_eq!((out.counts.s_x(), out.counts.s_y()), (43, 36));

    let mut state = MonitorState::new(design);
    let mut last = None;
    for ev in stream {
        let (s, r) = monitor_step(&state, ev).unwrap();
        state = s;
        last = Some(r);
    }
    let r = last.unwrap();
    assert_eq!(r.status, Status::Exhausted);
    assert_eq!(r.estimate.unwrap(), post_test_estimate(&counts, 117).unwrap());
}

#[test]
fn errors_leave_state_untouched() {
    let design = BivariateDesign::new(10, 1, 0).unwrap();
    let s = MonitorState::new(design);
    let (s, _) = monitor_step(&s, Event { seq: 1, x: true, y: false }).unwrap();
    let before = s;
    assert!(matches!(
        monitor_step(&s, Event { seq: 3, x: false, y: false }),
        Err(Error::Sequence { expected: 2, got: 3 })
    ));
    assert_eq!(s, before);
    let (s, r) = monitor_step(&s, Event { seq: 2, x: true, y: true }).unwrap();
    assert_eq!(r.status, Status::RejectedCorner);
    assert!(matches!(monitor_step(&s, Event { seq: 3, x: false, y: false }), Err(Error::Closed(_))));
}

#[test]
fn saved_state_rejects_overshoot() {
    let design = BivariateDesign::new(10, 1, 1).unwrap();
    let doc = state_save(&MonitorState::new(design));
    let mut v: serde_json::Value = serde_json::from_str(&doc).unwrap();
    v["counts"]["n10"] = 3.into();
    v["last_seq"] = 3.into();
    v["status"] = "rejected_x".into();
    assert!(matches!(state_load(&v.to_string()), Err(Error::StateDocument(_))));
}

#[test]
fn stream_underflow_reported() {
    let design = BivariateDesign::new(10, 3, 3).unwrap();
    let events = (1..=4).map(|seq| Event { seq, x: false, y: false });
    assert!(matches!(run_test(&design, events), Err(Error::StreamUnderflow { consumed: 4 })));
}
