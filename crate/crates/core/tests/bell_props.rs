use std::collections::HashSet;

use lzbell::bell::{
    bell_summary, extract_strings, match_coincidences, read_events_from, write_events_to,
    CoincidencePair, EventRecord,
};
use proptest::prelude::*;

fn stream(max_len: usize) -> impl Strategy<Value = Vec<EventRecord>> {
    prop::collection::vec((0i64..2000, 0u8..=1, 0u8..=1), 0..max_len).prop_map(|mut v| {
        v.sort_by_key(|e| e.0);
        v.into_iter()
            .map(|(t, x, a)| EventRecord::new(t, x, a))
            .collect()
    })
}

fn swapped(p: &CoincidencePair) -> (i64, i64) {
    (p.t_b, p.t_a)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn matching_is_symmetric_under_station_swap(
        a in stream(60),
        b in stream(60),
        window in 1i64..40,
        offset in -20i64..20,
    ) {
        let ab = match_coincidences(&a, &b, window, offset).unwrap();
        let ba = match_coincidences(&b, &a, window, -offset).unwrap();
        let mut left: Vec<(i64, i64)> = ab.iter().map(|p| (p.t_a, p.t_b)).collect();
        let mut right: Vec<(i64, i64)> = ba.iter().map(swapped).collect();
        left.sort_unstable();
        right.sort_unstable();
        prop_assert_eq!(left, right);
    }

    #[test]
    fn every_event_used_at_most_once_and_within_window(
        a in stream(80),
        b in stream(80),
        window in 1i64..40,
        offset in -20i64..20,
    ) {
        let pairs = match_coincidences(&a, &b, window, offset).unwrap();
        prop_assert!(pairs.len() <= a.len().min(b.len()));
        for p in &pairs {
            prop_assert!((p.t_a - p.t_b - offset).abs() <= window);
        }
        // with distinct timestamps, each time tag identifies a single event
        let distinct_a: HashSet<i64> = a.iter().map(|e| e.time_ns).collect();
        let distinct_b: HashSet<i64> = b.iter().map(|e| e.time_ns).collect();
        if distinct_a.len() == a.len() && distinct_b.len() == b.len() {
            let ua: HashSet<i64> = pairs.iter().map(|p| p.t_a).collect();
            let ub: HashSet<i64> = pairs.iter().map(|p| p.t_b).collect();
            prop_assert_eq!(ua.len(), pairs.len());
            prop_assert_eq!(ub.len(), pairs.len());
        }
    }

    #[test]
    fn matching_is_maximal_for_the_greedy_rule(
        a in stream(40),
        b in stream(40),
        window in 1i64..30,
    ) {
        // no unused A event may still have an unused B event inside the window
        let pairs = match_coincidences(&a, &b, window, 0).unwrap();
        let mut used_a: Vec<i64> = pairs.iter().map(|p| p.t_a).collect();
        let mut used_b: Vec<i64> = pairs.iter().map(|p| p.t_b).collect();
        let take = |v: &mut Vec<i64>, t: i64| {
            v.iter().position(|&u| u == t).map(|k| v.swap_remove(k)).is_some()
        };
        let free_a: Vec<i64> = a.iter().map(|e| e.time_ns).filter(|&t| !take(&mut used_a, t)).collect();
        let free_b: Vec<i64> = b.iter().map(|e| e.time_ns).filter(|&t| !take(&mut used_b, t)).collect();
        for ta in &free_a {
            prop_assert!(free_b.iter().all(|tb| (ta - tb).abs() > window));
        }
    }

    #[test]
    fn event_csv_round_trip(a in stream(100)) {
        let mut buf = Vec::new();
        write_events_to(&mut buf, &a).unwrap();
        prop_assert_eq!(read_events_from(buf.as_slice()).unwrap(), a);
    }

    #[test]
    fn conditional_entropies_are_relabel_invariant(
        raw in prop::collection::vec((0u8..=1, 0u8..=1, 0u8..=1, 0u8..=1), 40..300),
    ) {
        let mut pairs: Vec<CoincidencePair> = raw
            .iter()
            .enumerate()
            .map(|(i, &(a, b, x, y))| CoincidencePair { a, b, x, y, t_a: i as i64, t_b: i as i64 })
            .collect();
        // make sure every setting combination is present
        for k in 0..4u8 {
            pairs.push(CoincidencePair { a: 0, b: 1, x: k / 2, y: k % 2, t_a: 0, t_b: 0 });
        }
        let flipped: Vec<CoincidencePair> = pairs
            .iter()
            .map(|p| CoincidencePair { a: p.a ^ 1, b: p.b ^ 1, ..*p })
            .collect();
        let s1 = bell_summary(&pairs, 10).unwrap();
        let s2 = bell_summary(&flipped, 10).unwrap();
        for (h1, h2) in s1.h_a_given_x.iter().chain(&s1.h_b_given_y).chain(&s1.h_ab_given_xy)
            .zip(s2.h_a_given_x.iter().chain(&s2.h_b_given_y).chain(&s2.h_ab_given_xy))
        {
            prop_assert!((h1 - h2).abs() < 1e-12);
        }
        prop_assert!((s1.s - s2.s).abs() < 1e-12);
        let strings = extract_strings(&pairs).unwrap();
        prop_assert_eq!(strings.mixed.len(), 2 * pairs.len());
        let (alice, bob) = strings.mixed.deinterleave();
        prop_assert_eq!(alice, strings.alice);
        prop_assert_eq!(bob, strings.bob);
    }
}
