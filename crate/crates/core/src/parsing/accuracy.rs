use std::collections::HashMap;
use std::hash::Hash;

/// Loghub grouping accuracy: the share of lines whose predicted cluster is
/// exactly one ground-truth event group (same members, nothing extra).
///
/// Both slices are per-line labels in the same order. Returns 0 for empty
/// input.
pub fn grouping_accuracy<T: Eq + Hash, P: Eq + Hash>(truth: &[T], predicted: &[P]) -> f64 {
    assert_eq!(truth.len(), predicted.len(), "label slices must align");
    if truth.is_empty() {
        return 0.0;
    }
    let mut truth_sizes: HashMap<&T, usize> = HashMap::new();
    for t in truth {
        *truth_sizes.entry(t).or_default() += 1;
    }
    let mut clusters: HashMap<&P, Vec<usize>> = HashMap::new();
    for (i, p) in predicted.iter().enumerate() {
        clusters.entry(p).or_default().push(i);
    }
    let mut correct = 0usize;
    for members in clusters.values() {
        let first = &truth[members[0]];
        if members.iter().all(|&i| &truth[i] == first) && truth_sizes[first] == members.len() {
            correct += members.len();
        }
    }
    correct as f64 / truth.len() as f64
}
