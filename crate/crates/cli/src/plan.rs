//! Subject-level dataset splits and balanced morph-pair planning.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CliError, Result};
use crate::manifest::{Gender, Manifest, Split};

/// Bucket sizes for `n` items: `⌊ratio·n⌋` each, leftovers to the largest
/// remainders (ties to the earlier bucket).
pub fn bucket_sizes(ratios: [f64; 3], n: usize) -> [usize; 3] {
    let exact = ratios.map(|r| r * n as f64);
    let mut sizes = exact.map(|e| e.floor() as usize);
    let mut order = [0, 1, 2];
    order.sort_by(|&a, &b| {
        let (ra, rb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let mut left = n.saturating_sub(sizes.iter().sum());
    for &k in order.iter().cycle() {
        if left == 0 {
            break;
        }
        if ratios[k] > 0.0 {
            sizes[k] += 1;
            left -= 1;
        }
    }
    sizes
}

/// Assigns whole subjects to train/test/val. Subjects are shuffled by `seed`
/// from id order, then cut into consecutive buckets.
pub fn split_dataset(manifest: &Manifest, ratios: (f64, f64, f64), seed: u64) -> Result<Manifest> {
    let r = [ratios.0, ratios.1, ratios.2];
    if r.iter().any(|v| !v.is_finite() || *v < 0.0) || (r.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(CliError::Split(format!(
            "ratios {ratios:?} must be non-negative and sum to 1"
        )));
    }
    let mut subjects: Vec<&str> = manifest.by_subject().into_keys().collect();
    let buckets = r.iter().filter(|v| **v > 0.0).count();
    if subjects.len() < buckets {
        return Err(CliError::Split(format!(
            "{} subject(s) cannot fill {buckets} non-empty splits",
            subjects.len()
        )));
    }
    subjects.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let sizes = bucket_sizes(r, subjects.len());
    let mut assign: BTreeMap<&str, Split> = BTreeMap::new();
    let mut it = subjects.into_iter();
    for (split, size) in Split::ASSIGNED.into_iter().zip(sizes) {
        for s in it.by_ref().take(size) {
            assign.insert(s, split);
        }
    }
    let mut out = manifest.clone();
    for e in &mut out.entries {
        e.split = assign[e.subject_id.as_str()];
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PairPlan {
    /// Entry ids `(a, b)`.
    pub pairs: Vec<(String, String)>,
    /// Subject id → number of pairs it takes part in; covers every pairable
    /// subject, including unused ones.
    pub usage: BTreeMap<String, usize>,
}

impl PairPlan {
    pub fn usage_spread(&self) -> usize {
        let max = self.usage.values().max().copied().unwrap_or(0);
        let min = self.usage.values().min().copied().unwrap_or(0);
        max - min
    }
}

struct Subject<'a> {
    id: &'a str,
    key: (Gender, &'a str),
    images: Vec<&'a str>,
    first: usize,
}

/// Greedy least-used matching within `split`: the least-used subject (ties
/// by id) that still has an unmet compatible partner takes the least-used
/// such partner (ties by id), until `pairs_wanted` or exhaustion. The plan is
/// then cut back to its longest prefix whose usage spread is at most 1.
/// Each subject's images are used in rotation from a `seed`-chosen start.
pub fn plan_pairs(
    manifest: &Manifest,
    split: Split,
    pairs_wanted: usize,
    seed: u64,
) -> Result<PairPlan> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let subjects: Vec<Subject> = manifest
        .by_subject()
        .into_iter()
        .filter(|(_, es)| es[0].split == split)
        .map(|(id, es)| Subject {
            id,
            key: (es[0].gender, es[0].source_db.as_str()),
            images: es.iter().map(|e| e.id.as_str()).collect(),
            first: rng.gen_range(0..es.len()),
        })
        .collect();
    let compatible = |a: usize, b: usize| a != b && subjects[a].key == subjects[b].key;
    let pairable: Vec<usize> = (0..subjects.len())
        .filter(|&a| (0..subjects.len()).any(|b| compatible(a, b)))
        .collect();
    if pairable.len() < 2 {
        return Err(CliError::Pairing(format!(
            "split {split} has no two subjects with matching gender and source database"
        )));
    }

    let mut usage = vec![0usize; subjects.len()];
    let mut met: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut chosen: Vec<(usize, usize)> = Vec::new();
    // Length of the longest plan prefix with spread ≤ 1 (the empty plan has 0).
    let mut balanced = 0;
    while chosen.len() < pairs_wanted {
        let mut order = pairable.clone();
        order.sort_by_key(|&i| (usage[i], subjects[i].id));
        let found = order.iter().find_map(|&a| {
            order
                .iter()
                .find(|&&b| compatible(a, b) && !met.contains(&(a.min(b), a.max(b))))
                .map(|&b| (a, b))
        });
        let Some((a, b)) = found else { break };
        met.insert((a.min(b), a.max(b)));
        usage[a] += 1;
        usage[b] += 1;
        chosen.push((a, b));
        let used = pairable.iter().map(|&i| usage[i]);
        if used.clone().max().unwrap_or(0) - used.min().unwrap_or(0) <= 1 {
            balanced = chosen.len();
        }
    }
    if balanced < chosen.len() || chosen.len() < pairs_wanted {
        log::warn!(
            "split {split}: {balanced} of {pairs_wanted} pairs kept (greedy reached {}, balance holds up to {balanced})",
            chosen.len()
        );
    }

    let mut plan = PairPlan::default();
    let mut usage = vec![0usize; subjects.len()];
    for &(a, b) in &chosen[..balanced] {
        let pick = |s: usize, used: usize| {
            subjects[s].images[(subjects[s].first + used) % subjects[s].images.len()].to_string()
        };
        plan.pairs.push((pick(a, usage[a]), pick(b, usage[b])));
        usage[a] += 1;
        usage[b] += 1;
    }
    plan.usage = pairable
        .iter()
        .map(|&i| (subjects[i].id.to_string(), usage[i]))
        .collect();
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifest::ManifestEntry;

    fn manifest(subjects: &[(&str, Gender, &str)], per_subject: usize) -> Manifest {
        let entries = subjects
            .iter()
            .flat_map(|&(s, g, db)| {
                (0..per_subject).map(move |k| ManifestEntry {
                    id: format!("{s}_{k}"),
                    image_path: format!("{s}_{k}.png").into(),
                    landmarks_path: format!("{s}_{k}.lm").into(),
                    subject_id: s.into(),
                    gender: g,
                    source_db: db.into(),
                    split: Split::Train,
                })
            })
            .collect();
        Manifest::new(entries, ".").unwrap()
    }

    #[test]
    fn split_counts_follow_ratios() {
        let names: Vec<String> = (0..10).map(|i| format!("s{i}")).collect();
        let subjects: Vec<_> = names
            .iter()
            .map(|n| (n.as_str(), Gender::F, "db"))
            .collect();
        let m = manifest(&subjects, 1);
        let s = split_dataset(&m, (0.7, 0.2, 0.1), 3).unwrap();
        let count = |t: Split| s.entries.iter().filter(|e| e.split == t).count();
        assert_eq!(
            (count(Split::Train), count(Split::Test), count(Split::Val)),
            (7, 2, 1)
        );
        assert_eq!(split_dataset(&m, (0.7, 0.2, 0.1), 3).unwrap(), s);
        let all = split_dataset(&m, (1.0, 0.0, 0.0), 3).unwrap();
        assert!(all.entries.iter().all(|e| e.split == Split::Train));
    }

    #[test]
    fn split_keeps_subjects_together() {
        let names: Vec<String> = (0..9).map(|i| format!("s{i}")).collect();
        let subjects: Vec<_> = names
            .iter()
            .map(|n| (n.as_str(), Gender::M, "db"))
            .collect();
        let s = split_dataset(&manifest(&subjects, 3), (0.5, 0.25, 0.25), 1).unwrap();
        for (_, es) in s.by_subject() {
            assert!(es.iter().all(|e| e.split == es[0].split));
        }
    }

    #[test]
    fn split_errors() {
        let m = manifest(&[("a", Gender::F, "db"), ("b", Gender::F, "db")], 1);
        assert!(split_dataset(&m, (0.7, 0.2, 0.1), 0).is_err());
        assert!(split_dataset(&m, (0.7, 0.2, 0.2), 0).is_err());
        assert!(split_dataset(&m, (0.5, 0.5, 0.0), 0).is_ok());
    }

    #[test]
    fn largest_remainder() {
        assert_eq!(bucket_sizes([0.7, 0.2, 0.1], 10), [7, 2, 1]);
        assert_eq!(bucket_sizes([0.7, 0.2, 0.1], 60), [42, 12, 6]);
        assert_eq!(bucket_sizes([0.5, 0.25, 0.25], 9), [5, 2, 2]);
        assert_eq!(bucket_sizes([1.0, 0.0, 0.0], 7), [7, 0, 0]);
    }

    #[test]
    fn two_subjects_one_pair() {
        let m = manifest(&[("a", Gender::F, "db"), ("b", Gender::F, "db")], 1);
        let p = plan_pairs(&m, Split::Train, 1, 0).unwrap();
        assert_eq!(p.pairs, [("a_0".to_string(), "b_0".to_string())]);
        assert_eq!(plan_pairs(&m, Split::Train, 1, 99).unwrap(), p);
    }

    #[test]
    fn four_subjects_used_once_each() {
        let m = manifest(
            &[
                ("a", Gender::M, "db"),
                ("b", Gender::M, "db"),
                ("c", Gender::M, "db"),
                ("d", Gender::M, "db"),
            ],
            1,
        );
        let p = plan_pairs(&m, Split::Train, 2, 0).unwrap();
        assert_eq!(p.pairs.len(), 2);
        assert!(p.usage.values().all(|&u| u == 1));
        assert_eq!(p.pairs[0], ("a_0".to_string(), "b_0".to_string()));
        assert_eq!(p.pairs[1], ("c_0".to_string(), "d_0".to_string()));
    }

    #[test]
    fn different_databases_cannot_pair() {
        let m = manifest(&[("a", Gender::F, "db1"), ("b", Gender::F, "db2")], 1);
        assert!(matches!(
            plan_pairs(&m, Split::Train, 1, 0),
            Err(CliError::Pairing(_))
        ));
        let m = manifest(&[("a", Gender::F, "db"), ("b", Gender::M, "db")], 1);
        assert!(plan_pairs(&m, Split::Train, 1, 0).is_err());
    }

    #[test]
    fn images_rotate_and_exhaustion_stops() {
        let m = manifest(
            &[
                ("a", Gender::F, "db"),
                ("b", Gender::F, "db"),
                ("c", Gender::F, "db"),
            ],
            2,
        );
        let p = plan_pairs(&m, Split::Train, 10, 0).unwrap();
        // Only three distinct pairs exist among three subjects.
        assert_eq!(p.pairs.len(), 3);
        assert!(p.usage.values().all(|&u| u == 2));
        let mut uses_a: Vec<&str> = p
            .pairs
            .iter()
            .flat_map(|(x, y)| [x.as_str(), y.as_str()])
            .filter(|id| id.starts_with('a'))
            .collect();
        uses_a.sort();
        assert_eq!(uses_a, ["a_0", "a_1"]);
    }
}
