use super::vocab::{END, SEP};
use crate::error::{Error, Result};

/// Drop OCR strings of a single character and keyboard residue.
pub fn ocr_filter(texts: &[String]) -> Vec<String> {
    texts.iter().filter(|t| t.chars().count() != 1 && !matches!(t.as_str(), "123" | "space" | "return")).cloned().collect()
}

/// `[video][SEP][ocr][SEP][intent][END]`, or `[video][SEP][intent][END]`
/// without OCR.
///
/// `position_ids` and `loss_mask` cover every slot, video first. The
/// leading SEP and the video slots carry no position; ids count from 0 at
/// the first OCR token, or at the first intent token when there is no OCR.
/// The mask is set on intent tokens and, optionally, END.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionSequence {
    pub video_slots: usize,
    pub text_ids: Vec<usize>,
    pub position_ids: Vec<Option<usize>>,
    pub loss_mask: Vec<bool>,
    /// Index into `text_ids` of the first intent token.
    pub intent_start: usize,
    /// OCR tokens dropped from the left to fit `max_len`.
    pub ocr_truncated: usize,
}

impl FusionSequence {
    pub fn len(&self) -> usize {
        self.video_slots + self.text_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn has_ocr(&self) -> bool {
        self.intent_start > 1
    }

    /// Next-token targets for input slots `0..len-1`: row `r` predicts slot
    /// `r + 1`. Returns `(targets, mask)`; targets at video rows are PAD.
    pub fn shifted_targets(&self) -> (Vec<usize>, Vec<bool>) {
        let n = self.len();
        let token = |slot: usize| if slot < self.video_slots { super::vocab::PAD } else { self.text_ids[slot - self.video_slots] };
        ((1..n).map(token).collect(), self.loss_mask[1..].to_vec())
    }

    /// Number of slots that carry loss.
    pub fn loss_count(&self) -> usize {
        self.loss_mask.iter().filter(|&&m| m).count()
    }
}

/// Lay out one fused sequence. With `intent` empty and `end` false this is
/// the generation prefix. OCR is truncated from the left when the total
/// would exceed `max_len`; the intent never is.
pub fn build_fusion(
    video_slots: usize,
    ocr: Option<&[usize]>,
    intent: &[usize],
    max_len: usize,
    end: bool,
    loss_on_end: bool,
) -> Result<FusionSequence> {
    let tail = intent.len() + usize::from(end);
    let fixed = video_slots + 1 + tail;
    let ocr = ocr.filter(|o| !o.is_empty());
    let mut ocr_truncated = 0;
    let ocr = match ocr {
        Some(o) if fixed + o.len() + 1 > max_len => {
            let room = max_len.saturating_sub(fixed + 1);
            ocr_truncated = o.len() - room.min(o.len());
            Some(&o[ocr_truncated..]).filter(|o| !o.is_empty())
        }
        other => other,
    };
    let total = fixed + ocr.map_or(0, |o| o.len() + 1);
    if total > max_len {
        return Err(Error::contract(format!("fused sequence of {total} slots exceeds max length {max_len}")));
    }

    let mut text_ids = vec![SEP];
    let mut positions = vec![None; video_slots + 1];
    let mut next = 0;
    let mut push = |ids: &mut Vec<usize>, pos: &mut Vec<Option<usize>>, t: usize| {
        ids.push(t);
        pos.push(Some(next));
        next += 1;
    };
    if let Some(o) = ocr {
        for &t in o {
            push(&mut text_ids, &mut positions, t);
        }
        push(&mut text_ids, &mut positions, SEP);
    }
    let intent_start = text_ids.len();
    for &t in intent {
        push(&mut text_ids, &mut positions, t);
    }
    if end {
        push(&mut text_ids, &mut positions, END);
    }
    let mut loss_mask = vec![false; video_slots + intent_start];
    loss_mask.extend((0..intent.len()).map(|_| true));
    if end {
        loss_mask.push(loss_on_end);
    }
    Ok(FusionSequence { video_slots, text_ids, position_ids: positions, loss_mask, intent_start, ocr_truncated })
}
