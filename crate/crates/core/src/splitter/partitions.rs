//! Enumeration of interval labelings up to relabeling of the parts.
//!
//! A labeling assigns each of the `n+1` intervals to one of `r` parts. One
//! representative per relabeling orbit is produced by restricted growth: the
//! part containing the smallest yet-unplaced interval always receives the
//! smallest unused label, so `label[0] = 0` and every later label is at most
//! `max(previous) + 1`. The labeling that puts everything in one part is
//! skipped: it balances only when every feature has zero total increment, and
//! in that case any labeling with fully degenerate cuts balances as well.
//!
//! When color blocks are attached, labelings where two intervals of the same
//! block share a part are pruned during generation.

/// Streams canonical labelings of `n_items` intervals into at most
/// `max_parts` parts.
///
/// `colormates[i]` lists the earlier positions sharing position `i`'s color
/// block; it may be empty for unconstrained enumeration.
pub(crate) struct LabelingIter {
    n_items: usize,
    max_parts: usize,
    colormates: Vec<Vec<usize>>,
    current: Option<Vec<usize>>,
}

impl LabelingIter {
    pub(crate) fn new(n_items: usize, max_parts: usize, colormates: Vec<Vec<usize>>) -> Self {
        debug_assert!(colormates.len() == n_items);
        let mut iter = LabelingIter { n_items, max_parts, colormates, current: None };
        if n_items > 0 && max_parts >= 2 {
            let mut first = vec![0; n_items];
            for i in 0..n_items {
                first[i] = iter.smallest_valid(&first, i);
            }
            if first.iter().all(|&v| v == 0) && !iter.advance(&mut first) {
                iter.current = None;
            } else {
                iter.current = Some(first);
            }
        }
        iter
    }

    /// Smallest label for position `i` that no earlier colormate uses.
    fn smallest_valid(&self, labels: &[usize], i: usize) -> usize {
        let mut v = 0;
        while self.colormates[i].iter().any(|&j| j < i && labels[j] == v) {
            v += 1;
        }
        debug_assert!(v < self.max_parts);
        v
    }

    /// Advances `labels` to the next canonical string. Returns false when the
    /// enumeration is exhausted.
    fn advance(&self, labels: &mut Vec<usize>) -> bool {
        for i in (1..self.n_items).rev() {
            let max_prefix = labels[..i].iter().copied().max().unwrap_or(0);
            let cap = (max_prefix + 1).min(self.max_parts - 1);
            let mut v = labels[i] + 1;
            while v <= cap {
                if !self.colormates[i].iter().any(|&j| j < i && labels[j] == v) {
                    labels[i] = v;
                    for k in i + 1..self.n_items {
                        labels[k] = self.smallest_valid(labels, k);
                    }
                    return true;
                }
                v += 1;
            }
        }
        false
    }
}

impl Iterator for LabelingIter {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.clone()?;
        let mut next = out.clone();
        self.current = if self.advance(&mut next) { Some(next) } else { None };
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn collect(n_items: usize, parts: usize, colormates: Option<Vec<Vec<usize>>>) -> Vec<Vec<usize>> {
        let mates = colormates.unwrap_or_else(|| vec![Vec::new(); n_items]);
        LabelingIter::new(n_items, parts, mates).collect()
    }

    #[test]
    fn two_items_two_parts_single_orbit() {
        assert_eq!(collect(2, 2, None), vec![vec![0, 1]]);
    }

    #[test]
    fn three_items_two_parts_three_orbits() {
        // Hand enumeration: {1,2}/{3}, {1,3}/{2}, {1}/{2,3}.
        assert_eq!(
            collect(3, 2, None),
            vec![vec![0, 0, 1], vec![0, 1, 0], vec![0, 1, 1]]
        );
    }

    #[test]
    fn three_items_three_parts() {
        assert_eq!(
            collect(3, 3, None),
            vec![vec![0, 0, 1], vec![0, 1, 0], vec![0, 1, 1], vec![0, 1, 2]]
        );
    }

    #[test]
    fn colored_prunes_same_block_pairs() {
        // Block {1,2} forces positions 0 and 1 apart.
        let mates = vec![vec![], vec![0], vec![]];
        assert_eq!(
            collect(3, 3, Some(mates)),
            vec![vec![0, 1, 0], vec![0, 1, 1], vec![0, 1, 2]]
        );
    }

    #[test]
    fn seven_items_three_parts_count() {
        // Stirling numbers: S(7,2) + S(7,3) = 63 + 301.
        assert_eq!(collect(7, 3, None).len(), 364);
    }

    #[test]
    fn strings_are_restricted_growth() {
        for labels in collect(5, 3, None) {
            assert_eq!(labels[0], 0);
            let mut max = 0;
            for &v in &labels {
                assert!(v <= max + 1 && v < 3);
                max = max.max(v);
            }
            assert!(labels.iter().any(|&v| v != 0));
        }
    }
}
