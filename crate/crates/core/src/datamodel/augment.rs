use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::BoundingBox;

/// `n` copies of `bbox`, each translated by independent uniform integer
/// offsets in `[-max_shift, max_shift]` per axis. Translations are clamped so
/// the shifted box stays inside `extents` (a box larger than the image is
/// intersected with it instead).
pub fn augment_shifts(bbox: &BoundingBox, extents: (u32, u32), n: usize, max_shift: u32, seed: u64) -> Vec<BoundingBox> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (width, height) = extents;
    let m = max_shift as i32;
    (0..n)
        .map(|_| {
            let dx = rng.gen_range(-m..=m);
            let dy = rng.gen_range(-m..=m);
            let x = clamp_origin(bbox.x + dx, bbox.w, width);
            let y = clamp_origin(bbox.y + dy, bbox.h, height);
            let shifted = BoundingBox { x, y, ..*bbox };
            shifted.clip(width, height).unwrap_or(*bbox)
        })
        .collect()
}

fn clamp_origin(origin: i32, extent: u32, limit: u32) -> i32 {
    if extent >= limit {
        0
    } else {
        origin.clamp(0, (limit - extent) as i32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_shift_copies() {
        let b = BoundingBox::new(3, 4, 10, 12);
        assert_eq!(augment_shifts(&b, (64, 64), 5, 0, 1), vec![b; 5]);
    }

    #[test]
    fn stays_in_bounds_and_is_seeded() {
        let b = BoundingBox::new(0, 50, 20, 14);
        let out = augment_shifts(&b, (64, 64), 200, 9, 3);
        assert!(out.iter().all(|s| s.within(64, 64) && s.w == 20 && s.h == 14));
        assert!(out.iter().all(|s| (s.x - b.x).abs() <= 9 && (s.y - b.y).abs() <= 9));
        assert_eq!(out, augment_shifts(&b, (64, 64), 200, 9, 3));
        assert_ne!(out, augment_shifts(&b, (64, 64), 200, 9, 4));
    }

    #[test]
    fn oversized_box_is_clipped() {
        let b = BoundingBox::new(-2, -2, 100, 100);
        for s in augment_shifts(&b, (30, 40), 4, 3, 0) {
            assert_eq!(s, BoundingBox::new(0, 0, 30, 40));
        }
    }
}
