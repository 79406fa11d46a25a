use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use super::{neighbors4, SegmentMap};

/// Splits every segment into its 4-connected components and folds small
/// components into their largest neighbor.
///
/// A component is small when it has fewer than `w * h / (4 * num_segments)`
/// pixels. Ties between equally large neighbors go to the component found
/// first in raster order. Output ids are renumbered in raster order.
pub fn enforce_connectivity(seg: &SegmentMap) -> SegmentMap {
    let (w, h) = seg.dims();
    let n = w * h;
    let (comp, num_comps) = label_components(seg);

    let mut size = vec![0usize; num_comps];
    for &c in &comp {
        size[c] += 1;
    }
    let mut adjacency: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); num_comps];
    for p in 0..n {
        for q in neighbors4(p, w, h) {
            if comp[p] != comp[q] {
                adjacency[comp[p]].insert(comp[q]);
            }
        }
    }

    let min_size = n as f64 / (4 * seg.num_segments().max(1)) as f64;
    let mut parent: Vec<usize> = (0..num_comps).collect();
    for c in 0..num_comps {
        if parent[c] != c || (size[c] as f64) >= min_size {
            continue;
        }
        let mut target: Option<usize> = None;
        for &nb in &adjacency[c] {
            let r = find(&mut parent, nb);
            if r == c {
                continue;
            }
            target = match target {
                Some(t) if size[t] > size[r] || (size[t] == size[r] && t < r) => Some(t),
                _ => Some(r),
            };
        }
        let Some(t) = target else { continue };
        parent[c] = t;
        size[t] += size[c];
        let absorbed = core::mem::take(&mut adjacency[c]);
        adjacency[t].extend(absorbed.into_iter().filter(|&a| a != t));
        adjacency[t].remove(&c);
    }

    let labels: Vec<usize> = comp.iter().map(|&c| find(&mut parent, c)).collect();
    SegmentMap::from_labels(w, h, &labels).expect("labels sized to the grid")
}

/// Raster-order 4-connected component labelling of a segment map.
pub(crate) fn label_components(seg: &SegmentMap) -> (Vec<usize>, usize) {
    let (w, h) = seg.dims();
    let ids = seg.segments();
    let mut comp = vec![usize::MAX; w * h];
    let mut next = 0;
    let mut stack = Vec::new();
    for start in 0..w * h {
        if comp[start] != usize::MAX {
            continue;
        }
        comp[start] = next;
        stack.push(start);
        while let Some(p) = stack.pop() {
            for q in neighbors4(p, w, h) {
                if comp[q] == usize::MAX && ids[q] == ids[p] {
                    comp[q] = next;
                    stack.push(q);
                }
            }
        }
        next += 1;
    }
    (comp, next)
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(w: usize, h: usize, f: impl Fn(usize, usize) -> usize) -> SegmentMap {
        let labels: Vec<usize> = (0..w * h).map(|i| f(i % w, i / w)).collect();
        SegmentMap::from_labels(w, h, &labels).unwrap()
    }

    fn same_partition(a: &SegmentMap, b: &SegmentMap) -> bool {
        let (sa, sb) = (a.segments(), b.segments());
        (0..sa.len()).all(|i| (0..sa.len()).all(|j| (sa[i] == sa[j]) == (sb[i] == sb[j])))
    }

    #[test]
    fn connected_map_keeps_partition() {
        let m = map(8, 8, |x, y| (x / 4) + 2 * (y / 4));
        let out = enforce_connectivity(&m);
        assert_eq!(out.num_segments(), 4);
        assert!(same_partition(&m, &out));
    }

    #[test]
    fn split_segment_gets_two_ids() {
        // id 0 on the left and right thirds, id 1 in the middle.
        let m = map(12, 6, |x, _| usize::from((4..8).contains(&x)));
        assert_eq!(m.num_segments(), 2);
        let out = enforce_connectivity(&m);
        assert_eq!(out.num_segments(), 3);
        assert!(out.is_4_connected());
        assert_ne!(out.get(0, 0), out.get(11, 0));
    }

    #[test]
    fn single_pixel_orphan_is_absorbed() {
        // 32x32: two segments, threshold 1024 / 8 = 128 pixels.
        let m = map(32, 32, |x, y| usize::from((x, y) == (10, 10)));
        let out = enforce_connectivity(&m);
        assert_eq!(out.num_segments(), 1);
    }

    #[test]
    fn orphan_goes_to_largest_neighbor() {
        // The orphan at (8, 8) touches the left half (128 px) and the right
        // half (127 px); it joins the larger one.
        let m = map(16, 16, |x, y| {
            if (x, y) == (8, 8) {
                2
            } else {
                usize::from(x >= 8)
            }
        });
        let out = enforce_connectivity(&m);
        assert_eq!(out.num_segments(), 2);
        assert_eq!(out.get(8, 8), out.get(0, 0));
    }
}
