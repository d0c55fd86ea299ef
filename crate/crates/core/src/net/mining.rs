use super::{NetError, Triplet};
use crate::image::Image;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MinedTriplets {
    pub triplets: Vec<Triplet>,
    /// Anchors with no other sample of their class.
    pub skipped: Vec<usize>,
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(embeddings: &[Vec<f64>], anchor: usize, candidates: &[usize]) -> usize {
    let mut best = candidates[0];
    let mut best_d = squared_distance(&embeddings[anchor], &embeddings[best]);
    for &c in &candidates[1..] {
        let d = squared_distance(&embeddings[anchor], &embeddings[c]);
        if d < best_d {
            best = c;
            best_d = d;
        }
    }
    best
}

/// Up to `per_anchor` triplets per anchor. The first pairs the nearest
/// same-class positive with the nearest other-class negative; the rest
/// draw both at random from a generator seeded with `seed`.
pub fn mine_triplets(
    embeddings: &[Vec<f64>],
    labels: &[usize],
    per_anchor: usize,
    seed: u64,
) -> Result<MinedTriplets, NetError> {
    if embeddings.len() != labels.len() {
        return Err(NetError::DimensionMismatch(embeddings.len(), labels.len()));
    }
    let mut classes: Vec<usize> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(NetError::SingleClass);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = MinedTriplets { triplets: Vec::new(), skipped: Vec::new() };
    for anchor in 0..labels.len() {
        let positives: Vec<usize> = (0..labels.len()).filter(|&j| j != anchor && labels[j] == labels[anchor]).collect();
        if positives.is_empty() {
            out.skipped.push(anchor);
            continue;
        }
        let negatives: Vec<usize> = (0..labels.len()).filter(|&j| labels[j] != labels[anchor]).collect();
        for k in 0..per_anchor {
            let (positive, negative) = if k == 0 {
                (nearest(embeddings, anchor, &positives), nearest(embeddings, anchor, &negatives))
            } else {
                (*positives.choose(&mut rng).expect("non-empty"), *negatives.choose(&mut rng).expect("non-empty"))
            };
            out.triplets.push(Triplet { anchor, positive, negative });
        }
    }
    Ok(out)
}

/// Five `crop_w × crop_h` crops in the order top-left, top-right,
/// bottom-left, bottom-right, center. The center offset rounds down.
pub fn augment(img: &Image, crop_w: usize, crop_h: usize) -> Result<[Image; 5], NetError> {
    let (w, h) = (img.width(), img.height());
    if crop_w == 0 || crop_h == 0 || crop_w > w || crop_h > h {
        return Err(NetError::CropTooLarge { crop: (crop_w, crop_h), image: (w, h) });
    }
    let (rx, by) = (w - crop_w, h - crop_h);
    let origins = [(0, 0), (rx, 0), (0, by), (rx, by), (rx / 2, by / 2)];
    Ok(origins.map(|(x, y)| img.crop(x, y, crop_w, crop_h)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hardest_pairs_first() {
        let e = vec![vec![0.0], vec![1.0], vec![5.0], vec![0.5], vec![9.0]];
        let labels = [0, 0, 0, 1, 1];
        let m = mine_triplets(&e, &labels, 1, 0).unwrap();
        assert_eq!(m.triplets[0], Triplet { anchor: 0, positive: 1, negative: 3 });
        assert_eq!(m.triplets[2], Triplet { anchor: 2, positive: 1, negative: 4 });
        assert_eq!(m.triplets[3], Triplet { anchor: 3, positive: 4, negative: 0 });
        assert!(m.skipped.is_empty());
    }

    #[test]
    fn singleton_anchors_are_reported() {
        let e = vec![vec![0.0], vec![1.0], vec![2.0]];
        let m = mine_triplets(&e, &[0, 0, 1], 3, 7).unwrap();
        assert_eq!(m.skipped, vec![2]);
        assert_eq!(m.triplets.len(), 6);
        assert_eq!(m, mine_triplets(&e, &[0, 0, 1], 3, 7).unwrap());
        for t in &m.triplets {
            assert_eq!(t.negative, 2);
        }
    }

    #[test]
    fn one_class_is_an_error() {
        assert_eq!(mine_triplets(&[vec![0.0], vec![1.0]], &[3, 3], 1, 0), Err(NetError::SingleClass));
    }

    #[test]
    fn five_crops() {
        let img = Image::from_fn(5, 4, |x, y| (y * 5 + x) as u8).unwrap();
        let c = augment(&img, 2, 2).unwrap();
        let corners: Vec<u8> = c.iter().map(|i| i.get(0, 0)).collect();
        assert_eq!(corners, vec![0, 3, 10, 13, 6]);
        assert!(c.iter().all(|i| (i.width(), i.height()) == (2, 2)));
        assert!(augment(&img, 6, 1).is_err());
        let same = augment(&img, 5, 4).unwrap();
        assert!(same.iter().all(|i| i == &img));
    }
}
