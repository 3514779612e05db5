use super::InteractionStateSequence;

/// Removes grasp-state flicker column by column.
///
/// Any maximal run shorter than `min_dwell_frames` takes the value of the run
/// before it. A short leading run has no predecessor and takes the value of
/// the run after it instead. Afterwards every run is at least
/// `min_dwell_frames` long unless the whole column is shorter than that.
/// The operation is idempotent. `min_dwell_frames` of 0 behaves like 1.
pub fn smooth_states(
    states: &InteractionStateSequence,
    min_dwell_frames: usize,
) -> InteractionStateSequence {
    let k = min_dwell_frames.max(1);
    let mut out = states.clone();
    for col in 0..2 {
        let column: Vec<u8> = states.column(col).collect();
        for (row, value) in out.states.iter_mut().zip(smooth_column(&column, k)) {
            row[col] = value;
        }
    }
    out
}

fn runs(values: &[u8]) -> Vec<(u8, usize)> {
    let mut runs: Vec<(u8, usize)> = Vec::new();
    for &v in values {
        match runs.last_mut() {
            Some((last, len)) if *last == v => *len += 1,
            _ => runs.push((v, 1)),
        }
    }
    runs
}

fn smooth_column(values: &[u8], k: usize) -> Vec<u8> {
    let mut merged: Vec<(u8, usize)> = Vec::new();
    for (value, len) in runs(values) {
        match merged.last_mut() {
            None => merged.push((value, len)),
            Some(last) if len < k || last.0 == value => last.1 += len,
            Some(_) => merged.push((value, len)),
        }
    }
    if merged.len() > 1 && merged[0].1 < k {
        let (_, head) = merged.remove(0);
        merged[0].1 += head;
    }
    merged
        .into_iter()
        .flat_map(|(v, len)| std::iter::repeat_n(v, len))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::FrameClock;

    fn seq(col: &[u8]) -> InteractionStateSequence {
        InteractionStateSequence::new(
            FrameClock::new(24.0, col.len()).unwrap(),
            col.iter().map(|&s| [s, s]).collect(),
        )
        .unwrap()
    }

    #[test]
    fn single_frame_spike_is_absorbed() {
        let out = smooth_states(&seq(&[0, 0, 0, 2, 0, 0, 0]), 3);
        assert_eq!(out, seq(&[0; 7]));
    }

    #[test]
    fn long_enough_runs_are_kept() {
        let s = seq(&[0, 0, 2, 2, 2, 0, 0]);
        assert_eq!(smooth_states(&s, 2), s);
    }

    #[test]
    fn short_leading_run_joins_successor() {
        let out = smooth_states(&seq(&[1, 2, 2, 2, 2]), 3);
        assert_eq!(out, seq(&[2; 5]));
    }

    #[test]
    fn columns_are_independent() {
        let s = InteractionStateSequence::new(
            FrameClock::new(24.0, 6).unwrap(),
            vec![[0, 2], [0, 2], [2, 2], [0, 0], [0, 0], [0, 0]],
        )
        .unwrap();
        let out = smooth_states(&s, 3);
        assert_eq!(
            out.states,
            vec![[0, 2], [0, 2], [0, 2], [0, 0], [0, 0], [0, 0]]
        );
    }

    #[test]
    fn short_column_is_untouched() {
        let s = seq(&[0, 2]);
        assert_eq!(smooth_states(&s, 5), seq(&[0, 0]));
        let single = seq(&[1]);
        assert_eq!(smooth_states(&single, 5), single);
    }
}
