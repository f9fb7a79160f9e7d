use proptest::prelude::*;
use qcfd_core::beat::{
    fiducial_windows, make_dataset, synthesize_beat, BeatLabel, BeatParams, SimProfile, R,
};
use qcfd_core::rng;

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

#[test]
fn st_segment_carries_the_class_offset() {
    let profile = SimProfile::default();
    let beats = make_dataset(256, &profile, 31).unwrap();
    let mut by_class = [Vec::new(), Vec::new()];
    for b in &beats {
        let f = b.fiducials.as_ref().unwrap();
        by_class[b.label.index()].push(mean(&b.samples[f.st.clone()]));
    }
    let shift = mean(&by_class[1]) - mean(&by_class[0]);
    assert!((shift - profile.st_offset).abs() < 0.02, "{shift}");
}

#[test]
fn labels_alternate() {
    let beats = make_dataset(5, &SimProfile::default(), 1).unwrap();
    for (i, b) in beats.iter().enumerate() {
        assert_eq!(b.label, BeatLabel::from_index(i % 2).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn jittered_beats_keep_r_inside_qrs(seed in any::<u64>()) {
        let profile = SimProfile::default();
        let mut r = rng::seeded(seed);
        for label in BeatLabel::ALL {
            let p = profile.class(label).jittered(&mut r).unwrap();
            let f = fiducial_windows(&p).unwrap();
            let r_idx = (p.waves[R].center * p.fs).round() as usize;
            prop_assert!(f.qrs.contains(&r_idx));
            prop_assert_eq!(f.qrs.end, f.st.start);
        }
    }

    #[test]
    fn synthesis_is_bit_reproducible(seed in any::<u64>(), sd in 0.0f64..0.1) {
        let p = BeatParams::desk(0.1);
        let a = synthesize_beat(&p, sd, seed).unwrap();
        prop_assert_eq!(&a, &synthesize_beat(&p, sd, seed).unwrap());
        prop_assert_eq!(a.label, BeatLabel::StShift);
        prop_assert_eq!(a.samples.len(), p.validate().unwrap());
    }
}
