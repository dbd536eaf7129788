//! Continuation phrasing for batch captions.

use super::CaptionBatch;
use crate::error::{Error, Result};

const CONTINUES: &str = "The video continues";
const BEGIN_PHRASES: [&str; 2] = ["The video begins", "The video starts"];
const END_PHRASES: [&str; 2] = ["The video ends", "The video concludes"];
const SCENE_CONCLUDES: &str = "The scene concludes";

fn starts_with_ci(text: &str, phrase: &str) -> bool {
    text.get(..phrase.len()).is_some_and(|p| p.eq_ignore_ascii_case(phrase))
}

fn find_ci(haystack: &str, needle: &str) -> Option<usize> {
    let lower = haystack.to_ascii_lowercase();
    lower.find(&needle.to_ascii_lowercase())
}

/// Byte offset where the final sentence starts.
fn final_sentence_start(text: &str) -> usize {
    let body = text.trim_end().trim_end_matches(['.', '!', '?']);
    body.rfind(['.', '!', '?'])
        .map(|i| {
            let rest = &text[i + 1..];
            i + 1 + (rest.len() - rest.trim_start().len())
        })
        .unwrap_or(0)
}

/// Rewrite a batch caption so that only the true first batch opens the video
/// and only the true last batch ends it.
pub fn normalize_batch_text(text: &str, is_first: bool, is_last: bool) -> String {
    let mut out = text.trim().to_string();

    if !is_first {
        if let Some(phrase) = BEGIN_PHRASES.iter().find(|p| starts_with_ci(&out, p)) {
            out = format!("{CONTINUES}{}", &out[phrase.len()..]);
        } else if !starts_with_ci(&out, CONTINUES) {
            out = format!("{CONTINUES}. {out}");
        }
    }

    if !is_last {
        let start = final_sentence_start(&out);
        while let Some((pos, phrase)) = END_PHRASES
            .iter()
            .filter_map(|p| find_ci(&out[start..], p).map(|i| (i, *p)))
            .min_by_key(|(i, _)| *i)
        {
            let at = start + pos;
            let replacement = if out[at..].starts_with('t') {
                SCENE_CONCLUDES.to_ascii_lowercase()
            } else {
                SCENE_CONCLUDES.to_string()
            };
            out.replace_range(at..at + phrase.len(), &replacement);
        }
    }
    out
}

/// Normalize every batch and join them with single spaces, in batch order.
pub fn stitch(batches: &[CaptionBatch]) -> Result<String> {
    if batches.is_empty() {
        return Err(Error::invalid("no caption batches to stitch"));
    }
    let mut ordered: Vec<&CaptionBatch> = batches.iter().collect();
    ordered.sort_by_key(|b| b.batch_index);
    Ok(ordered
        .iter()
        .map(|b| normalize_batch_text(&b.text, b.is_first, b.is_last))
        .collect::<Vec<_>>()
        .join(" "))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn batch(i: usize, text: &str, first: bool, last: bool) -> CaptionBatch {
        CaptionBatch {
            batch_index: i,
            frame_indices: vec![i],
            text: text.into(),
            is_first: first,
            is_last: last,
        }
    }

    #[test]
    fn first_batch_untouched() {
        let t = "The video begins with a dog.";
        assert_eq!(normalize_batch_text(t, true, false), t);
    }

    #[test]
    fn begin_phrase_becomes_continuation() {
        assert_eq!(
            normalize_batch_text("The video begins with a dog.", false, false),
            "The video continues with a dog."
        );
        assert_eq!(
            normalize_batch_text("the video starts in a kitchen.", false, true),
            "The video continues in a kitchen."
        );
    }

    #[test]
    fn both_rules_apply() {
        assert_eq!(
            normalize_batch_text("A man walks. The video ends.", false, false),
            "The video continues. A man walks. The scene concludes."
        );
    }

    #[test]
    fn last_batch_keeps_its_ending() {
        assert_eq!(
            normalize_batch_text("A man walks. The video ends.", false, true),
            "The video continues. A man walks. The video ends."
        );
    }

    #[test]
    fn ending_only_checked_in_final_sentence() {
        let t = "The video ends up in a park. Kids play.";
        assert_eq!(normalize_batch_text(t, true, false), t);
        assert_eq!(
            normalize_batch_text("Kids play. Finally the video concludes with a wave.", true, false),
            "Kids play. Finally the scene concludes with a wave."
        );
    }

    #[test]
    fn stitch_examples() {
        assert!(stitch(&[]).is_err());
        assert_eq!(stitch(&[batch(0, "A.", true, true)]).unwrap(), "A.");
        let two = [batch(0, "A.", true, false), batch(1, "B.", false, true)];
        assert_eq!(stitch(&two).unwrap(), "A. The video continues. B.");
        let shuffled = [
            batch(2, "C.", false, true),
            batch(0, "A.", true, false),
            batch(1, "B.", false, false),
        ];
        assert_eq!(
            stitch(&shuffled).unwrap(),
            "A. The video continues. B. The video continues. C."
        );
    }

    proptest! {
        #[test]
        fn normalization_is_idempotent(
            words in prop::collection::vec(prop::sample::select(vec![
                "The video begins", "The video ends", "the video concludes", "The video continues",
                "a dog", "runs.", "walks!", "The video starts", "Then", "?", "."
            ]), 1..12),
            first: bool, last: bool)
        {
            let text = words.join(" ");
            let once = normalize_batch_text(&text, first, last);
            prop_assert_eq!(normalize_batch_text(&once, first, last), once.clone());
        }
    }
}
