use proptest::prelude::*;

use jpcp_core::metrics::{
    adjusted_rand_index, cpwer, cpwer_counts, normalized_mutual_information, text_der, LabeledTranscript,
    SpeakerMapping, TranscriptEntry,
};

fn transcript(speakers: &[usize], words: &[Vec<u8>], prefix: &str) -> LabeledTranscript {
    let entries = speakers
        .iter()
        .zip(words)
        .map(|(s, w)| TranscriptEntry {
            speaker: format!("{prefix}{s}"),
            words: w.iter().map(|c| ((b'a' + c) as char).to_string()).collect(),
        })
        .collect();
    LabeledTranscript::new("s", entries)
}

fn labelled_words(max_speakers: usize) -> impl Strategy<Value = (Vec<usize>, Vec<usize>, Vec<Vec<u8>>)> {
    (1usize..16).prop_flat_map(move |n| {
        (
            prop::collection::vec(0..max_speakers, n),
            prop::collection::vec(0..max_speakers, n),
            prop::collection::vec(prop::collection::vec(0u8..4, 1..4), n),
        )
    })
}

proptest! {
    #[test]
    fn partition_scores_ignore_label_names(
        (pred, truth, _) in labelled_words(5),
        shift in 1usize..5,
    ) {
        let renamed: Vec<usize> = pred.iter().map(|l| (l + shift) * 7).collect();
        prop_assert_eq!(adjusted_rand_index(&pred, &truth).unwrap(), adjusted_rand_index(&renamed, &truth).unwrap());
        prop_assert_eq!(adjusted_rand_index(&truth, &pred).unwrap(), adjusted_rand_index(&truth, &renamed).unwrap());
        let a = normalized_mutual_information(&pred, &truth).unwrap();
        let b = normalized_mutual_information(&renamed, &truth).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn self_comparison_is_error_free((speakers, _, words) in labelled_words(6)) {
        let t = transcript(&speakers, &words, "s");
        prop_assert_eq!(cpwer(&t, &t).unwrap(), 0.0);
        prop_assert_eq!(text_der(&t, &t).unwrap(), 0.0);
        let renamed = transcript(&speakers, &words, "other");
        prop_assert_eq!(text_der(&renamed, &t).unwrap(), 0.0);
    }

    #[test]
    fn text_der_is_a_rate((pred, truth, words) in labelled_words(6)) {
        let p = transcript(&pred, &words, "p");
        let t = transcript(&truth, &words, "t");
        let rate = text_der(&p, &t).unwrap();
        prop_assert!((0.0..=1.0).contains(&rate));
        let aligned = adjusted_rand_index(&pred, &truth).unwrap() == 1.0;
        prop_assert_eq!(rate == 0.0, aligned);
    }

    #[test]
    fn hungarian_matches_exhaustive_up_to_eight_speakers((pred, truth, words) in labelled_words(8)) {
        let p = transcript(&pred, &words, "p");
        let mut t = transcript(&truth, &words, "t");
        // perturb the reference so the costs are not all zero on the diagonal
        if let Some(e) = t.entries.first_mut() {
            e.words.push("z".into());
        }
        let h = cpwer_counts(&p, &t, SpeakerMapping::Hungarian).unwrap();
        let x = cpwer_counts(&p, &t, SpeakerMapping::Exhaustive).unwrap();
        prop_assert_eq!(h, x);
    }
}
