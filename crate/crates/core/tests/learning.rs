mod common;

use common::two_device_world;

#[test]
fn learns_to_avoid_the_failing_device() {
    for seed in 0..10 {
        let o = two_device_world(seed, 200);
        assert!(o.greedy_good_at_end, "seed {seed}");
        assert!(o.greedy_share >= 0.95, "seed {seed}: {}", o.greedy_share);
        assert!(o.late_share >= 0.9, "seed {seed}: {}", o.late_share);
        assert!(o.settled_at.is_some_and(|i| i <= 200), "seed {seed}");
    }
}

#[test]
fn untrained_tie_break_prefers_the_faster_bad_device() {
    assert!(!two_device_world(0, 200).greedy_good_untrained);
}
