use std::collections::BTreeMap;

use log::warn;

use super::ManifestRecord;
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitAssignment {
    /// Sorted ascending.
    pub train: Vec<usize>,
    /// Sorted ascending.
    pub test: Vec<usize>,
    /// False when stratification was impossible (a class had no samples).
    pub stratified: bool,
}

fn check_ratio(ratio: f64) -> Result<()> {
    if ratio > 0.0 && ratio < 1.0 {
        Ok(())
    } else {
        Err(Error::Range(format!("split ratio {ratio} must lie in (0, 1)")))
    }
}

fn train_size(ratio: f64, n: usize) -> usize {
    // guard against 0.7 * 10 = 6.999…
    ((ratio * n as f64) + 1e-9).floor() as usize
}

/// Seeded split stratified by label with `|train| = floor(ratio · n)`.
///
/// Each class contributes `floor(ratio · n_c)`; the few samples left over
/// go to the classes with the largest fractional remainders.
pub fn split_indices(labels: &[u8], ratio: f64, seed: u64) -> Result<SplitAssignment> {
    check_ratio(ratio)?;
    let n = labels.len();
    let target = train_size(ratio, n);
    let mut rng = Rng::new(seed);
    let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, &l) in labels.iter().enumerate() {
        by_class
            .get_mut(l as usize)
            .ok_or_else(|| Error::Label(format!("label {l} at index {i}")))?
            .push(i);
    }

    let (mut train, mut test) = (Vec::new(), Vec::new());
    let stratified = by_class.iter().all(|c| !c.is_empty());
    if !stratified {
        warn!("a class has no samples; falling back to an unstratified split");
        let mut all: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut all);
        train.extend_from_slice(&all[..target]);
        test.extend_from_slice(&all[target..]);
    } else {
        let mut quota: Vec<usize> = by_class.iter().map(|c| train_size(ratio, c.len())).collect();
        let mut order: Vec<usize> = vec![0, 1];
        let frac = |c: usize| ratio * by_class[c].len() as f64 - quota[c] as f64;
        order.sort_by(|&a, &b| frac(b).total_cmp(&frac(a)).then(a.cmp(&b)));
        let mut missing = target - quota.iter().sum::<usize>();
        for &c in order.iter().cycle().take(4) {
            if missing == 0 {
                break;
            }
            if quota[c] < by_class[c].len() {
                quota[c] += 1;
                missing -= 1;
            }
        }
        for (class, members) in by_class.iter_mut().enumerate() {
            rng.shuffle(members);
            train.extend_from_slice(&members[..quota[class]]);
            test.extend_from_slice(&members[quota[class]..]);
        }
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitAssignment { train, test, stratified })
}

pub fn split_dataset(records: &[ManifestRecord], ratio: f64, seed: u64) -> Result<SplitAssignment> {
    let labels: Vec<u8> = records.iter().map(|r| r.label.index()).collect();
    split_indices(&labels, ratio, seed)
}

/// Split that keeps every subject's images on one side. Subjects are
/// shuffled and assigned to train until it holds at least
/// `floor(ratio · n)` images, so the train size is only approximate.
/// Records without a subject id count as their own subject.
pub fn split_by_subject(records: &[ManifestRecord], ratio: f64, seed: u64) -> Result<SplitAssignment> {
    check_ratio(ratio)?;
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        let key = r
            .subject_id
            .clone()
            .unwrap_or_else(|| format!("\u{0}{}", r.image_path.display()));
        groups.entry(key).or_default().push(i);
    }
    let mut groups: Vec<Vec<usize>> = groups.into_values().collect();
    Rng::new(seed).shuffle(&mut groups);
    let target = train_size(ratio, records.len());
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for g in groups {
        if train.len() < target {
            train.extend(g);
        } else {
            test.extend(g);
        }
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitAssignment { train, test, stratified: false })
}
