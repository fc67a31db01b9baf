mod common;

use common::*;
use surfelgrad_core::scenegen::{voxel_oracle_matches, IqttConfig};

#[test]
fn cube_rotation_oracle_agrees_with_library() {
    let config = IqttConfig::default();
    for i in 0..200 {
        let plan = iqtt_plan(8, i, &config);
        let p = &plan.provenance;
        for c in &p.candidates {
            assert_eq!(
                rotation_oracle(&p.reference, c),
                voxel_oracle_matches(&p.reference, c).unwrap()
            );
        }
    }
}

#[test]
fn answer_key_slots_and_regeneration() {
    let config = IqttConfig {
        image_size: 32,
        ..IqttConfig::default()
    };
    let n = 3000;
    let stats = iqtt_stats(2, n, 10, &config);
    assert_eq!(stats.oracle_failures, 0);
    assert_eq!(stats.regeneration_mismatches, 0);
    for count in stats.slot_counts {
        let freq = count as f64 / n as f64;
        assert!((freq - 1.0 / 3.0).abs() < 0.03, "{stats:?}");
    }
}
