use errp_bandit::archive::{load_trial_archive, save_trial_archive};
use errp_bandit::features::{extract_features, resize_bicubic, FeatureConfig};
use errp_bandit::split::{shuffled_train_count, split_indices, SplitSpec};
use errp_bandit::synth::{generate_subject, SynthConfig};
use errp_bandit::types::{Label, Matrix, Trial};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_trial(n_channels: usize, fs_hz: f64, seed: u64) -> Trial {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = (3.0 * fs_hz).round() as usize;
    let data = (0..n_channels * n).map(|_| rng.gen_range(-50.0..50.0)).collect();
    Trial {
        data: Matrix::from_vec(n_channels, n, data).unwrap(),
        label: Label::Left,
        errp_injected: false,
        subject_id: "p".into(),
        session_id: 1,
        trial_index: 0,
        window_s: (-1.0, 2.0),
        fs_hz,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn three_channel_trials_give_fixed_shape(seed in any::<u64>(), fs in prop::sample::select(vec![128.0, 250.0, 500.0])) {
        let names: Vec<String> = ["C3", "Cz", "C4"].iter().map(|s| s.to_string()).collect();
        let fv = extract_features(&random_trial(3, fs, seed), &names, &FeatureConfig::in_house()).unwrap();
        prop_assert_eq!(fv.dim(), 2880);
        prop_assert_eq!(fv.shape, [3, 2, 15, 32]);
        prop_assert!(fv.values.iter().all(|v| v.is_finite()));
    }
}

proptest! {
    #[test]
    fn same_size_resize_is_identity(data in prop::collection::vec(-1e3f64..1e3, 15 * 32)) {
        let m = Matrix::from_vec(15, 32, data).unwrap();
        let r = resize_bicubic(&m, 15, 32).unwrap();
        for (a, b) in m.data().iter().zip(r.data()) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn splits_partition_the_trials(sessions in prop::collection::vec(1u32..=5, 2..200), frac in 0.05f64..0.95, seed in any::<u64>()) {
        let n = sessions.len();
        let (train, eval) = split_indices(&sessions, &SplitSpec::shuffled(frac, seed)).unwrap();
        prop_assert_eq!(train.len(), shuffled_train_count(n, frac));
        let mut all: Vec<usize> = train.iter().chain(&eval).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());

        if let Ok((train, eval)) = split_indices(&sessions, &SplitSpec::by_session([1, 2, 3], [4, 5])) {
            prop_assert!(train.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(train.iter().all(|&i| sessions[i] <= 3));
            prop_assert!(eval.iter().all(|&i| sessions[i] >= 4));
            prop_assert_eq!(train.len() + eval.len(), n);
        }
    }
}

#[test]
fn single_trial_cannot_be_split() {
    assert!(split_indices(&[1], &SplitSpec::shuffled(0.5, 0)).is_err());
}

#[test]
fn archive_roundtrip_is_exact() {
    let ds = generate_subject(&SynthConfig {
        n_trials: 30,
        n_sessions: 3,
        seed: 9,
        ..SynthConfig::default()
    })
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_trial_archive(&ds, dir.path()).unwrap();
    let back = load_trial_archive(dir.path()).unwrap();
    assert_eq!(back, ds);
}
