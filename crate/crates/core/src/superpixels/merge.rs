use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{neighbors4, SegmentMap};
use crate::error::{check_same_dims, Error, Result};
use crate::image::{rgb_pixel_to_lab, RasterImage};

/// Greedily merges segments until at most `q` remain.
///
/// Each step takes the smallest segment (lowest id on ties) and folds it into
/// the 4-adjacent segment whose mean CIELAB color is nearest (lowest id on
/// ties). Surviving ids are renumbered in increasing order at the end.
pub fn merge_to_cap(image: &RasterImage, seg: &SegmentMap, q: usize) -> Result<SegmentMap> {
    check_same_dims(image.dims(), seg.dims())?;
    if q < 2 {
        return Err(Error::InvalidParameter(format!("q = {q} < 2")));
    }
    let n = seg.num_segments();
    if n <= q {
        return Ok(seg.clone());
    }
    let (w, h) = seg.dims();
    let ids = seg.segments();

    let mut size = vec![0usize; n];
    let mut lab_sum = vec![[0.0f64; 3]; n];
    for (p, rgb) in image.pixels().enumerate() {
        let s = ids[p] as usize;
        size[s] += 1;
        let lab = rgb_pixel_to_lab(rgb);
        for c in 0..3 {
            lab_sum[s][c] += lab[c];
        }
    }
    let mut adjacency: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for p in 0..w * h {
        for q in neighbors4(p, w, h) {
            if ids[p] != ids[q] {
                adjacency[ids[p] as usize].insert(ids[q] as usize);
            }
        }
    }

    let mean = |sum: &[f64; 3], count: usize| -> [f64; 3] {
        let c = count as f64;
        [sum[0] / c, sum[1] / c, sum[2] / c]
    };

    let mut merged_into: Vec<usize> = (0..n).collect();
    let mut queue: BTreeSet<(usize, usize)> = (0..n).map(|s| (size[s], s)).collect();
    let mut alive = n;
    while alive > q {
        let Some((_, small)) = queue.pop_first() else {
            break;
        };
        let m = mean(&lab_sum[small], size[small]);
        let mut best: Option<(f64, usize)> = None;
        for &nb in &adjacency[small] {
            let mn = mean(&lab_sum[nb], size[nb]);
            let d = (0..3).map(|c| (m[c] - mn[c]) * (m[c] - mn[c])).sum::<f64>();
            if best.map_or(true, |(bd, _)| d < bd) {
                best = Some((d, nb));
            }
        }
        // Only a segment covering the whole grid has no neighbor.
        let Some((_, target)) = best else { break };

        queue.remove(&(size[target], target));
        size[target] += size[small];
        for c in 0..3 {
            lab_sum[target][c] += lab_sum[small][c];
        }
        queue.insert((size[target], target));

        let neighbors = core::mem::take(&mut adjacency[small]);
        for nb in neighbors {
            adjacency[nb].remove(&small);
            if nb != target {
                adjacency[nb].insert(target);
                adjacency[target].insert(nb);
            }
        }
        merged_into[small] = target;
        alive -= 1;
    }

    let resolve = |mut s: usize| {
        while merged_into[s] != s {
            s = merged_into[s];
        }
        s
    };
    let mut new_id = vec![u32::MAX; n];
    let mut next = 0;
    for s in 0..n {
        if merged_into[s] == s {
            new_id[s] = next;
            next += 1;
        }
    }
    let segments = ids
        .iter()
        .map(|&s| new_id[resolve(s as usize)])
        .collect();
    SegmentMap::new(w, h, segments)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_op_when_under_cap() {
        let img = RasterImage::filled(4, 4, [9, 9, 9]).unwrap();
        let seg = SegmentMap::new(4, 4, (0..16).map(|i| (i % 4) / 2).collect()).unwrap();
        assert_eq!(merge_to_cap(&img, &seg, 2).unwrap(), seg);
        assert_eq!(merge_to_cap(&img, &seg, 5).unwrap(), seg);
    }

    #[test]
    fn singleton_joins_closest_colored_neighbor() {
        // 7x3 grid: id 1 fills columns 0..3, id 2 columns 4..6, except the
        // singleton id 0 at (3, 1); column 3 rows 0 and 2 belong to id 1.
        // Sizes: id0 = 1, id1 = 11, id2 = 9. Singleton color is near id 1.
        let w = 7;
        let ids: Vec<u32> = (0..21)
            .map(|i| {
                let (x, y) = (i % w, i / w);
                if (x, y) == (3, 1) {
                    0
                } else if x <= 3 {
                    1
                } else {
                    2
                }
            })
            .collect();
        let seg = SegmentMap::new(w, 3, ids.clone()).unwrap();
        let img = RasterImage::from_fn(w, 3, |x, y| match ids[y * w + x] {
            0 => [200, 40, 40],
            1 => [220, 30, 30],
            _ => [20, 20, 220],
        })
        .unwrap();
        let out = merge_to_cap(&img, &seg, 2).unwrap();
        assert_eq!(out.num_segments(), 2);
        // Old id 1 becomes 0 after compaction, old id 2 becomes 1.
        assert_eq!(out.get(3, 1), 0);
        assert_eq!(out.get(0, 0), 0);
        assert_eq!(out.get(6, 2), 1);
    }

    #[test]
    fn q_two_always_yields_two() {
        let img = RasterImage::from_fn(9, 9, |x, y| [(x * 28) as u8, (y * 28) as u8, 77]).unwrap();
        let seg = SegmentMap::new(9, 9, (0..81).collect()).unwrap();
        let out = merge_to_cap(&img, &seg, 2).unwrap();
        assert_eq!(out.num_segments(), 2);
        assert!(out.is_4_connected());
    }
}
