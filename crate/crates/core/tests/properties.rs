use proptest::prelude::*;

use neofuse::coredata::{EventTimeline, Interval};
use neofuse::metrics::{extract_events, overlap_average};
use neofuse::signal::design_cheby2_bandpass;

fn intervals() -> impl Strategy<Value = Vec<(u32, u32)>> {
    prop::collection::vec((0u32..500, 1u32..80), 0..12)
}

fn seconds_of(ivs: impl IntoIterator<Item = Interval>, len: usize) -> Vec<bool> {
    let mut mask = vec![false; len];
    for iv in ivs {
        for s in iv.start_s..iv.end_s {
            mask[s as usize] = true;
        }
    }
    mask
}

proptest! {
    #[test]
    fn merged_timeline_covers_the_same_seconds(raw in intervals()) {
        let ivs: Vec<Interval> = raw.iter().map(|&(a, d)| Interval::new(a, a + d).unwrap()).collect();
        let t = EventTimeline::from_intervals("t", ivs.clone());
        prop_assert_eq!(seconds_of(t.events().iter().copied(), 600), seconds_of(ivs, 600));
        for w in t.events().windows(2) {
            prop_assert!(w[0].end_s < w[1].start_s);
        }
    }

    #[test]
    fn overlap_average_of_a_constant_is_constant(n in 1usize..60, v in 0.0f64..=1.0) {
        let cells = overlap_average(&vec![Some(v); n]);
        prop_assert_eq!(cells.len(), n + 3);
        for c in cells {
            prop_assert!((c.unwrap() - v).abs() < 1e-12);
        }
    }

    #[test]
    fn raising_scores_never_removes_seconds(
        scores in prop::collection::vec(prop::option::weighted(0.9, 0.0f64..=1.0), 1..80),
        bump in 0.0f64..0.5,
    ) {
        let raised: Vec<Option<f64>> = scores.iter().map(|s| s.map(|v| (v + bump).min(1.0))).collect();
        let len = 4 * (scores.len() + 3);
        let low = extract_events("a", &overlap_average(&scores), 0.5, 0);
        let high = extract_events("b", &overlap_average(&raised), 0.5, 0);
        let (lo, hi) = (
            seconds_of(low.events().iter().copied(), len),
            seconds_of(high.events().iter().copied(), len),
        );
        prop_assert!(lo.iter().zip(&hi).all(|(&l, &h)| !l || h));
    }

    #[test]
    fn filter_is_linear(
        x in prop::collection::vec(-100.0f64..100.0, 1..400),
        y in prop::collection::vec(-100.0f64..100.0, 400),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
    ) {
        let f = design_cheby2_bandpass(6, 0.5, 16.0, 40.0, 256.0).unwrap();
        let y = &y[..x.len()];
        let mixed: Vec<f64> = x.iter().zip(y).map(|(p, q)| a * p + b * q).collect();
        let (fx, fy, fm) = (f.apply(&x), f.apply(y), f.apply(&mixed));
        for i in 0..x.len() {
            prop_assert!((fm[i] - (a * fx[i] + b * fy[i])).abs() < 1e-9);
        }
    }
}
