//! Reference metrics by direct enumeration: every candidate threshold is
//! evaluated by counting scores one by one, with no sorting tricks.

pub const CEILING: f64 = 1.0 + f64::EPSILON;

pub fn candidates(groups: &[&[f64]]) -> Vec<f64> {
    let mut t = vec![0.0, CEILING];
    for g in groups {
        for &s in g.iter() {
            if !t.contains(&s) {
                t.push(s);
            }
        }
    }
    t.sort_by(|a, b| a.partial_cmp(b).unwrap());
    t
}

pub fn apcer(atk: &[f64], t: f64) -> f64 {
    let mut accepted = 0;
    for &s in atk {
        if s >= t {
            accepted += 1;
        }
    }
    accepted as f64 / atk.len() as f64
}

pub fn bpcer(bf: &[f64], t: f64) -> f64 {
    let mut rejected = 0;
    for &s in bf {
        if s < t {
            rejected += 1;
        }
    }
    rejected as f64 / bf.len() as f64
}

/// `(threshold, apcer, bpcer)` at every candidate.
pub fn curve(bf: &[f64], atk: &[f64]) -> Vec<(f64, f64, f64)> {
    candidates(&[bf, atk]).into_iter().map(|t| (t, apcer(atk, t), bpcer(bf, t))).collect()
}

/// `(eer, threshold)`.
pub fn eer(bf: &[f64], atk: &[f64]) -> (f64, f64) {
    let pts = curve(bf, atk);
    for &(t, a, b) in &pts {
        if a == b {
            return (a, t);
        }
    }
    for w in pts.windows(2) {
        let ((t0, a0, b0), (t1, a1, b1)) = (w[0], w[1]);
        if a0 - b0 > 0.0 && a1 - b1 < 0.0 {
            let (d0, d1) = (a0 - b0, a1 - b1);
            let f = d0 / (d0 - d1);
            return ((a0 + f * (a1 - a0)).clamp(0.0, 1.0), t0 + f * (t1 - t0));
        }
    }
    unreachable!("no crossing");
}

/// `(bpcer, threshold)` at the first candidate with APCER <= 1/ap.
pub fn bpcer_at(bf: &[f64], atk: &[f64], ap: u32) -> (f64, f64) {
    let target = 1.0 / ap as f64;
    for (t, a, b) in curve(bf, atk) {
        if a <= target {
            return (b, t);
        }
    }
    unreachable!("APCER is 0 at the ceiling");
}

/// Worst-case-species variant of [`bpcer_at`].
pub fn worst_case_bpcer_at(bf: &[f64], species: &[&[f64]], ap: u32) -> (f64, f64) {
    let target = 1.0 / ap as f64;
    let mut groups = vec![bf];
    groups.extend_from_slice(species);
    for t in candidates(&groups) {
        let worst = species.iter().map(|s| apcer(s, t)).fold(0.0, f64::max);
        if worst <= target {
            return (bpcer(bf, t), t);
        }
    }
    unreachable!()
}
