use crate::error::{Error, Result};

/// Half-open interval `[start_s, end_s)` in whole seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Interval {
    pub start_s: u32,
    pub end_s: u32,
}

impl Interval {
    pub fn new(start_s: u32, end_s: u32) -> Result<Self> {
        if end_s <= start_s {
            return Err(Error::Shape(format!("empty interval [{start_s}, {end_s})")));
        }
        Ok(Interval { start_s, end_s })
    }

    pub fn duration_s(&self) -> u32 {
        self.end_s - self.start_s
    }

    /// Intersection with positive measure.
    pub fn overlaps(&self, other: &Interval) -> bool {
        self.start_s < other.end_s && other.start_s < self.end_s
    }
}

/// Sorted, pairwise-disjoint seizure events of one source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventTimeline {
    pub source: String,
    events: Vec<Interval>,
}

impl EventTimeline {
    pub fn empty(source: impl Into<String>) -> Self {
        EventTimeline {
            source: source.into(),
            events: Vec::new(),
        }
    }

    /// Sorts and merges overlapping or touching intervals.
    pub fn from_intervals(source: impl Into<String>, mut intervals: Vec<Interval>) -> Self {
        intervals.sort_unstable();
        let mut events: Vec<Interval> = Vec::with_capacity(intervals.len());
        for iv in intervals {
            match events.last_mut() {
                Some(last) if iv.start_s <= last.end_s => last.end_s = last.end_s.max(iv.end_s),
                _ => events.push(iv),
            }
        }
        EventTimeline {
            source: source.into(),
            events,
        }
    }

    /// Runs of `true` cells, each cell `cell_s` seconds long.
    pub fn from_mask(source: impl Into<String>, mask: &[bool], cell_s: u32) -> Self {
        let mut events = Vec::new();
        let mut start = None;
        for (i, &on) in mask.iter().enumerate() {
            match (on, start) {
                (true, None) => start = Some(i),
                (false, Some(s)) => {
                    events.push(Interval {
                        start_s: s as u32 * cell_s,
                        end_s: i as u32 * cell_s,
                    });
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            events.push(Interval {
                start_s: s as u32 * cell_s,
                end_s: mask.len() as u32 * cell_s,
            });
        }
        EventTimeline {
            source: source.into(),
            events,
        }
    }

    pub fn events(&self) -> &[Interval] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn overlaps_any(&self, iv: &Interval) -> bool {
        // events are sorted and disjoint, so end times are sorted too
        let first = self.events.partition_point(|e| e.end_s <= iv.start_s);
        self.events.get(first).is_some_and(|e| e.overlaps(iv))
    }

    pub fn retain(&mut self, f: impl FnMut(&Interval) -> bool) {
        self.events.retain(f);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(a: u32, b: u32) -> Interval {
        Interval::new(a, b).unwrap()
    }

    #[test]
    fn merges_overlapping_and_touching() {
        let t = EventTimeline::from_intervals("x", vec![iv(10, 20), iv(0, 5), iv(5, 8), iv(15, 30)]);
        assert_eq!(t.events(), &[iv(0, 8), iv(10, 30)]);
    }

    #[test]
    fn half_open_boundaries_do_not_overlap() {
        assert!(!iv(0, 10).overlaps(&iv(10, 20)));
        assert!(iv(0, 11).overlaps(&iv(10, 20)));
    }

    #[test]
    fn mask_runs() {
        let t = EventTimeline::from_mask("x", &[false, true, true, false, true], 4);
        assert_eq!(t.events(), &[iv(4, 12), iv(16, 20)]);
    }

    #[test]
    fn overlaps_any_uses_sorted_events() {
        let t = EventTimeline::from_intervals("x", vec![iv(0, 5), iv(10, 20), iv(40, 50)]);
        assert!(t.overlaps_any(&iv(19, 25)));
        assert!(!t.overlaps_any(&iv(20, 40)));
        assert!(t.overlaps_any(&iv(30, 41)));
        assert!(!t.overlaps_any(&iv(50, 60)));
    }

    #[test]
    fn rejects_empty_interval() {
        assert!(Interval::new(3, 3).is_err());
    }
}
