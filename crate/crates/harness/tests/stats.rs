use bcm_harness::{quantile, Summary};
use proptest::prelude::*;

#[test]
fn quartile_examples() {
    let s = Summary::of(&[1.0, 2.0, 3.0, 4.0]).unwrap();
    assert_eq!(s.median, 2.5);
    assert_eq!(s.q1, 1.75);
    assert_eq!(s.q3, 3.25);
    assert_eq!(s.mean, 2.5);
    let one = Summary::of(&[0.7]).unwrap();
    assert_eq!((one.mean, one.median, one.q1, one.q3), (0.7, 0.7, 0.7, 0.7));
    assert!(Summary::of(&[]).is_none());
}

proptest! {
    #[test]
    fn quartiles_are_ordered(values in prop::collection::vec(-10.0f64..10.0, 1..50)) {
        let s = Summary::of(&values).unwrap();
        prop_assert!(s.q1 <= s.median && s.median <= s.q3);
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        prop_assert_eq!(quantile(&sorted, 0.0), sorted[0]);
        prop_assert_eq!(quantile(&sorted, 1.0), *sorted.last().unwrap());
    }
}
