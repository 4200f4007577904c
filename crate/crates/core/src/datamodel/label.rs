use super::{iou, BoundingBox};

/// Minimum IoU for a proposal to count as a positive example.
pub const POSITIVE_IOU: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ProposalLabel {
    /// Best-matching annotation has IoU >= 0.5.
    Positive { class: usize, iou: f64 },
    /// No overlap with any annotation.
    Background,
    /// Partial overlap in (0, 0.5): neither positive nor background.
    Excluded { best_iou: f64 },
}

/// Labels each proposal by its best-IoU annotation (ties go to the earlier
/// annotation). `annotations` pairs each box with its class index.
pub fn label_proposals(proposals: &[BoundingBox], annotations: &[(BoundingBox, usize)]) -> Vec<(BoundingBox, ProposalLabel)> {
    proposals
        .iter()
        .map(|p| {
            let mut best: Option<(f64, usize)> = None;
            for &(a, class) in annotations {
                let v = iou(p, &a);
                if best.is_none_or(|(b, _)| v > b) {
                    best = Some((v, class));
                }
            }
            let label = match best {
                Some((v, class)) if v >= POSITIVE_IOU => ProposalLabel::Positive { class, iou: v },
                Some((v, _)) if v > 0.0 => ProposalLabel::Excluded { best_iou: v },
                _ => ProposalLabel::Background,
            };
            (*p, label)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_application() {
        let gt = [(BoundingBox::new(0, 0, 10, 10), 3)];
        // 10x6 inside the 10x10: IoU 0.6
        let out = label_proposals(
            &[BoundingBox::new(0, 0, 10, 6), BoundingBox::new(50, 50, 4, 4), BoundingBox::new(0, 0, 10, 3)],
            &gt,
        );
        assert_eq!(out[0].1, ProposalLabel::Positive { class: 3, iou: 0.6 });
        assert_eq!(out[1].1, ProposalLabel::Background);
        assert!(matches!(out[2].1, ProposalLabel::Excluded { best_iou } if (best_iou - 0.3).abs() < 1e-12));
    }

    #[test]
    fn no_annotations_means_background() {
        let out = label_proposals(&[BoundingBox::new(0, 0, 3, 3)], &[]);
        assert_eq!(out[0].1, ProposalLabel::Background);
    }

    #[test]
    fn ties_go_to_first_annotation() {
        let b = BoundingBox::new(0, 0, 4, 4);
        let out = label_proposals(&[b], &[(b, 1), (b, 2)]);
        assert_eq!(out[0].1, ProposalLabel::Positive { class: 1, iou: 1.0 });
    }
}
