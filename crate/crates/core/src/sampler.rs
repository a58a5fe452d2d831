//! Deterministic 60/20/20 splitting and class-balanced, dataset-proportional sampling.
//!
//! For a task with datasets `D` and classes `CL`, the number of class-`c` instances
//! drawn from dataset `d` is `r(c, d) * n_sample / |CL|`, where
//! `r(c, d) = NumEl(c, d) / sum over d' of NumEl(c, d')`. Real-valued targets are
//! turned into integers by largest-remainder apportionment so that every class total
//! is exact.
//!
//! All randomness comes from ChaCha8 seeded with the SHA-256 digest of the user seed
//! and a stream label (dataset, split, class), so results do not depend on input
//! order, platform or thread scheduling.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::TaskInstance;
use crate::labels::{DatasetId, TaskId};
use crate::{Error, Result};

pub const DEFAULT_N_TRAIN: u64 = 4000;
pub const DEFAULT_N_VAL: u64 = 800;
pub const DEFAULT_N_TEST: u64 = 800;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Seeded generator for a named stream.
pub fn stream_rng(seed: u64, stream: &[&str]) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for part in stream {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part.as_bytes());
    }
    ChaCha8Rng::from_seed(h.finalize().into())
}

/// Largest-remainder apportionment.
///
/// `quotas` must sum to an integer. Each entry receives its floor, and the leftover
/// seats go to the largest fractional parts; equal remainders favour the earlier index.
pub fn largest_remainder(quotas: &[Ratio<u128>]) -> Vec<u64> {
    let total: Ratio<u128> = quotas.iter().copied().sum();
    assert!(total.is_integer(), "quotas must sum to a whole number");
    let mut seats: Vec<u64> = quotas.iter().map(|q| q.to_integer() as u64).collect();
    let assigned: u128 = seats.iter().map(|&s| s as u128).sum();
    let leftover = (total.to_integer() - assigned) as usize;
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    // Stable sort keeps index order among equal remainders.
    order.sort_by(|&a, &b| quotas[b].fract().cmp(&quotas[a].fract()));
    for &i in order.iter().take(leftover) {
        seats[i] += 1;
    }
    seats
}

/// Train/val/test sizes for `n` items: largest remainder over `(0.6n, 0.2n, 0.2n)`.
pub fn split_sizes(n: usize) -> [usize; 3] {
    let n = n as u128;
    let q = [Ratio::new(6 * n, 10), Ratio::new(2 * n, 10), Ratio::new(2 * n, 10)];
    let s = largest_remainder(&q);
    [s[0] as usize, s[1] as usize, s[2] as usize]
}

/// Split assignment for one dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub dataset: DatasetId,
    pub seed: u64,
    pub assignment: BTreeMap<String, Split>,
}

impl SplitManifest {
    pub fn count(&self, split: Split) -> usize {
        self.assignment.values().filter(|s| **s == split).count()
    }

    pub fn get(&self, id: &str) -> Option<Split> {
        self.assignment.get(id).copied()
    }
}

/// Splits the instances of a single dataset 60/20/20.
///
/// Ids are sorted, shuffled with a generator derived from `(seed, dataset)` and cut
/// into contiguous train/val/test blocks.
pub fn split(instances: &[TaskInstance], seed: u64) -> Result<SplitManifest> {
    let Some(first) = instances.first() else {
        return Err(Error::TooSmallToSplit(0));
    };
    let dataset = first.dataset;
    if let Some(other) = instances.iter().find(|i| i.dataset != dataset) {
        return Err(Error::InvalidRecord {
            id: other.id.clone(),
            reason: format!("split expects one dataset, found {dataset} and {}", other.dataset),
        });
    }
    let ids: BTreeSet<&str> = instances.iter().map(|i| i.id.as_str()).collect();
    if ids.len() != instances.len() {
        return Err(Error::InvalidRecord {
            id: dataset.to_string(),
            reason: "duplicate instance ids".into(),
        });
    }
    split_ids(ids.into_iter().collect(), dataset, seed)
}

fn split_ids(mut ids: Vec<&str>, dataset: DatasetId, seed: u64) -> Result<SplitManifest> {
    if ids.len() < 3 {
        return Err(Error::TooSmallToSplit(ids.len()));
    }
    ids.sort_unstable();
    let mut rng = stream_rng(seed, &["split", dataset.as_str()]);
    ids.shuffle(&mut rng);
    let [n_train, n_val, _] = split_sizes(ids.len());
    let assignment = ids
        .iter()
        .enumerate()
        .map(|(i, id)| {
            let s = if i < n_train {
                Split::Train
            } else if i < n_train + n_val {
                Split::Val
            } else {
                Split::Test
            };
            (id.to_string(), s)
        })
        .collect();
    Ok(SplitManifest {
        dataset,
        seed,
        assignment,
    })
}

/// Splits every dataset present in `instances` independently.
pub fn split_by_dataset(instances: &[TaskInstance], seed: u64) -> Result<BTreeMap<DatasetId, SplitManifest>> {
    let mut groups: BTreeMap<DatasetId, Vec<TaskInstance>> = BTreeMap::new();
    for inst in instances {
        groups.entry(inst.dataset).or_default().push(inst.clone());
    }
    groups
        .into_iter()
        .map(|(d, insts)| split(&insts, seed).map(|m| (d, m)))
        .collect()
}

/// Partitions instances by their split assignment. Instances missing from every
/// manifest are dropped.
pub fn partition(
    instances: &[TaskInstance],
    manifests: &BTreeMap<DatasetId, SplitManifest>,
) -> BTreeMap<Split, Vec<TaskInstance>> {
    let mut out: BTreeMap<Split, Vec<TaskInstance>> = Split::ALL.iter().map(|s| (*s, Vec::new())).collect();
    for inst in instances {
        if let Some(s) = manifests.get(&inst.dataset).and_then(|m| m.get(&inst.id)) {
            out.get_mut(&s).unwrap().push(inst.clone());
        }
    }
    out
}

/// `NumEl(c, d)` for one task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCountTable {
    pub task: TaskId,
    pub counts: BTreeMap<String, BTreeMap<DatasetId, u64>>,
}

impl ClassCountTable {
    pub fn new(task: TaskId) -> Self {
        ClassCountTable {
            task,
            counts: BTreeMap::new(),
        }
    }

    pub fn set(&mut self, class: &str, dataset: DatasetId, n: u64) -> Result<()> {
        if !self.task.has_label(class) {
            return Err(Error::InvalidParam(format!("{class:?} is not a {} label", self.task)));
        }
        if !dataset.feeds(self.task) {
            return Err(Error::InvalidParam(format!("{dataset} does not feed {}", self.task)));
        }
        self.counts.entry(class.to_string()).or_default().insert(dataset, n);
        Ok(())
    }

    pub fn from_instances(task: TaskId, instances: &[TaskInstance]) -> Self {
        let mut t = ClassCountTable::new(task);
        for inst in instances.iter().filter(|i| i.task == task) {
            *t.counts
                .entry(inst.primary_label().to_string())
                .or_default()
                .entry(inst.dataset)
                .or_default() += 1;
        }
        t
    }

    pub fn get(&self, class: &str, dataset: DatasetId) -> u64 {
        self.counts
            .get(class)
            .and_then(|m| m.get(&dataset))
            .copied()
            .unwrap_or(0)
    }

    pub fn class_total(&self, class: &str) -> u64 {
        self.counts.get(class).map(|m| m.values().sum()).unwrap_or(0)
    }

    /// Classes with at least one instance, in catalog order.
    pub fn classes(&self) -> Vec<&'static str> {
        self.task
            .labels()
            .iter()
            .copied()
            .filter(|c| self.class_total(c) > 0)
            .collect()
    }
}

/// Exact sampling ratio `r(c, d)`.
pub fn ratio(counts: &ClassCountTable, class: &str, dataset: DatasetId) -> Result<Ratio<u64>> {
    let total = counts.class_total(class);
    if total == 0 {
        return Err(Error::EmptyClass(class.to_string()));
    }
    Ok(Ratio::new(counts.get(class, dataset), total))
}

/// Integer per-(class, dataset) quotas.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplePlan {
    pub task: TaskId,
    pub n_sample: u64,
    /// Per-class totals after splitting `n_sample` evenly across classes.
    pub targets: BTreeMap<String, u64>,
    pub quotas: BTreeMap<String, BTreeMap<DatasetId, u64>>,
}

impl SamplePlan {
    pub fn quota(&self, class: &str, dataset: DatasetId) -> u64 {
        self.quotas
            .get(class)
            .and_then(|m| m.get(&dataset))
            .copied()
            .unwrap_or(0)
    }

    pub fn class_total(&self, class: &str) -> u64 {
        self.quotas.get(class).map(|m| m.values().sum()).unwrap_or(0)
    }
}

/// Computes quotas for drawing `n_sample` instances.
///
/// `n_sample` is divided evenly over the observed classes (largest remainder in catalog
/// order when it does not divide). Within a class, the real-valued quotas
/// `r(c, d) * target` are apportioned by largest remainder with ties going to the
/// lexicographically smaller dataset id.
pub fn plan(counts: &ClassCountTable, n_sample: u64) -> Result<SamplePlan> {
    if n_sample == 0 {
        return Err(Error::InvalidParam("n_sample must be positive".into()));
    }
    let classes = counts.classes();
    if classes.is_empty() {
        return Err(Error::EmptyClass(format!("every {} class", counts.task)));
    }
    let k = classes.len() as u128;
    let even = vec![Ratio::new(n_sample as u128, k); classes.len()];
    let class_targets = largest_remainder(&even);

    let mut targets = BTreeMap::new();
    let mut quotas = BTreeMap::new();
    for (class, target) in classes.iter().zip(class_targets) {
        let available = counts.class_total(class);
        if available < target {
            return Err(Error::Shortfall {
                class: class.to_string(),
                needed: target,
                available,
            });
        }
        let mut datasets: Vec<DatasetId> = counts.counts[*class].keys().copied().collect();
        datasets.sort_by_key(|d| d.as_str());
        let shares: Vec<Ratio<u128>> = datasets
            .iter()
            .map(|d| Ratio::new(counts.get(class, *d) as u128 * target as u128, available as u128))
            .collect();
        let seats = largest_remainder(&shares);
        targets.insert(class.to_string(), target);
        quotas.insert(
            class.to_string(),
            datasets.into_iter().zip(seats).collect::<BTreeMap<_, _>>(),
        );
    }
    Ok(SamplePlan {
        task: counts.task,
        n_sample,
        targets,
        quotas,
    })
}

/// Draws the planned number of instances from one split's population.
///
/// Each (class, dataset) cell is sampled uniformly without replacement using a
/// generator derived from `(seed, split, class, dataset)`. Output is grouped by class in
/// catalog order, then dataset, then instance id.
pub fn draw(population: &[TaskInstance], plan: &SamplePlan, split: Split, seed: u64) -> Result<Vec<TaskInstance>> {
    let mut cells: BTreeMap<(&str, DatasetId), Vec<&TaskInstance>> = BTreeMap::new();
    for inst in population.iter().filter(|i| i.task == plan.task) {
        cells
            .entry((inst.primary_label(), inst.dataset))
            .or_default()
            .push(inst);
    }
    let mut out = Vec::new();
    for class in plan.task.labels() {
        let Some(per_dataset) = plan.quotas.get(*class) else {
            continue;
        };
        for (dataset, &quota) in per_dataset {
            if quota == 0 {
                continue;
            }
            let mut cell = cells.remove(&(*class, *dataset)).unwrap_or_default();
            if (cell.len() as u64) < quota {
                return Err(Error::InfeasibleCell {
                    split: split.to_string(),
                    class: class.to_string(),
                    dataset: dataset.to_string(),
                    needed: quota,
                    available: cell.len() as u64,
                });
            }
            cell.sort_by(|a, b| a.id.cmp(&b.id));
            let mut rng = stream_rng(seed, &["draw", split.as_str(), class, dataset.as_str()]);
            let (picked, _) = cell.partial_shuffle(&mut rng, quota as usize);
            let mut picked: Vec<&TaskInstance> = picked.to_vec();
            picked.sort_by(|a, b| a.id.cmp(&b.id));
            out.extend(picked.into_iter().cloned());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn inst(id: &str, dataset: DatasetId, label: &str) -> TaskInstance {
        TaskInstance {
            task: TaskId::Cd,
            dataset,
            id: id.to_string(),
            inputs: BTreeMap::new(),
            gold: vec![label.to_string()],
        }
    }

    /// Independent apportionment oracle: enumerate every integer vector with the
    /// right total whose entries are floor or ceil of the quota, and pick the one
    /// favoured by the largest-remainder rule (maximise the sum of remainders of
    /// rounded-up entries, then prefer rounding up earlier indices).
    fn brute_force_apportion(quotas: &[f64], total: u64) -> Vec<u64> {
        let n = quotas.len();
        let mut best: Option<(Vec<u64>, Vec<f64>)> = None;
        for mask in 0u32..(1 << n) {
            let v: Vec<u64> = (0..n)
                .map(|i| quotas[i].floor() as u64 + ((mask >> i) & 1) as u64)
                .collect();
            if v.iter().sum::<u64>() != total {
                continue;
            }
            if (0..n).any(|i| (mask >> i) & 1 == 1 && quotas[i].fract() == 0.0) {
                continue;
            }
            // Sorted remainders of the rounded-up entries, largest first, compared
            // lexicographically; ties go to the lexicographically smallest index set.
            let mut rem: Vec<(f64, i64)> = (0..n)
                .filter(|i| (mask >> i) & 1 == 1)
                .map(|i| (quotas[i].fract(), -(i as i64)))
                .collect();
            rem.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let key: Vec<f64> = rem.iter().flat_map(|(r, i)| [*r, *i as f64]).collect();
            match &best {
                Some((_, k)) if k >= &key => {}
                _ => best = Some((v, key)),
            }
        }
        best.unwrap().0
    }

    #[test]
    fn oracle_agrees_on_small_cases() {
        assert_eq!(brute_force_apportion(&[4.2, 1.4, 1.4], 7), vec![4, 2, 1]);
        assert_eq!(brute_force_apportion(&[10.0 / 3.0; 3], 10), vec![4, 3, 3]);
    }

    #[test]
    fn split_sizes_ten_and_seven() {
        assert_eq!(split_sizes(10), [6, 2, 2]);
        // Frozen from brute_force_apportion(&[4.2, 1.4, 1.4], 7).
        assert_eq!(split_sizes(7), [4, 2, 1]);
        for n in 3..60 {
            let q = [0.6 * n as f64, 0.2 * n as f64, 0.2 * n as f64];
            let rounded: Vec<f64> = q.iter().map(|x| (x * 1e9).round() / 1e9).collect();
            let expect = brute_force_apportion(&rounded, n as u64);
            let got = split_sizes(n);
            assert_eq!(got.iter().map(|&x| x as u64).collect::<Vec<_>>(), expect, "n={n}");
        }
    }

    #[test]
    fn split_rejects_tiny_inputs() {
        let two = vec![inst("a", DatasetId::Iam, "Claim"), inst("b", DatasetId::Iam, "Claim")];
        assert!(matches!(split(&two, 1), Err(Error::TooSmallToSplit(2))));
        assert!(matches!(split(&[], 1), Err(Error::TooSmallToSplit(0))));
    }

    #[test]
    fn split_ignores_input_order() {
        let mut xs: Vec<TaskInstance> = (0..10)
            .map(|i| inst(&format!("i{i}"), DatasetId::Iam, "Claim"))
            .collect();
        let a = split(&xs, 42).unwrap();
        xs.reverse();
        xs.swap(2, 7);
        let b = split(&xs, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            (a.count(Split::Train), a.count(Split::Val), a.count(Split::Test)),
            (6, 2, 2)
        );
        assert_ne!(a, split(&xs, 43).unwrap());
    }

    fn table2_counts() -> ClassCountTable {
        let mut t = ClassCountTable::new(TaskId::Cd);
        for (class, counts) in [("Claim", [1659, 252, 89]), ("Non-claim", [1933, 54, 13])] {
            for (d, n) in [DatasetId::Iam, DatasetId::IbmClaim, DatasetId::IbmArgument]
                .into_iter()
                .zip(counts)
            {
                t.set(class, d, n).unwrap();
            }
        }
        t
    }

    #[test]
    fn ratios() {
        let t = table2_counts();
        assert_eq!(ratio(&t, "Claim", DatasetId::Iam).unwrap(), Ratio::new(1659, 2000));
        assert_eq!(ratio(&t, "Claim", DatasetId::IbmClaim).unwrap(), Ratio::new(252, 2000));
        assert_eq!(
            ratio(&t, "Claim", DatasetId::IbmArgument).unwrap(),
            Ratio::new(89, 2000)
        );
        assert!(matches!(ratio(&t, "Nope", DatasetId::Iam), Err(Error::EmptyClass(_))));

        let mut one = ClassCountTable::new(TaskId::Cd);
        one.set("Claim", DatasetId::Iam, 17).unwrap();
        assert_eq!(ratio(&one, "Claim", DatasetId::Iam).unwrap(), Ratio::from_integer(1));

        let mut sym = ClassCountTable::new(TaskId::Cd);
        sym.set("Claim", DatasetId::Iam, 1).unwrap();
        sym.set("Claim", DatasetId::IbmClaim, 1).unwrap();
        assert_eq!(ratio(&sym, "Claim", DatasetId::Iam).unwrap(), Ratio::new(1, 2));
    }

    #[test]
    fn plan_reproduces_table_two() {
        let p = plan(&table2_counts(), 4000).unwrap();
        assert_eq!(p.quota("Claim", DatasetId::Iam), 1659);
        assert_eq!(p.quota("Claim", DatasetId::IbmClaim), 252);
        assert_eq!(p.quota("Claim", DatasetId::IbmArgument), 89);
        assert_eq!(p.quota("Non-claim", DatasetId::Iam), 1933);
        assert_eq!(p.quota("Non-claim", DatasetId::IbmClaim), 54);
        assert_eq!(p.quota("Non-claim", DatasetId::IbmArgument), 13);
        assert_eq!(p.class_total("Claim"), 2000);
        assert_eq!(p.class_total("Non-claim"), 2000);
    }

    #[test]
    fn plan_simple_and_tie_break() {
        let mut t = ClassCountTable::new(TaskId::Cd);
        t.set("Claim", DatasetId::Iam, 50).unwrap();
        t.set("Non-claim", DatasetId::Iam, 50).unwrap();
        let p = plan(&t, 20).unwrap();
        assert_eq!(
            (p.quota("Claim", DatasetId::Iam), p.quota("Non-claim", DatasetId::Iam)),
            (10, 10)
        );

        // Equal thirds with a per-class quota of 10: the extra seat goes to the
        // lexicographically first dataset id ("iam" < "ibm_argument" < "ibm_claim").
        let mut t = ClassCountTable::new(TaskId::Cd);
        for d in [DatasetId::IbmClaim, DatasetId::Iam, DatasetId::IbmArgument] {
            t.set("Claim", d, 30).unwrap();
        }
        let p = plan(&t, 10).unwrap();
        let expect = brute_force_apportion(&[10.0 / 3.0; 3], 10);
        assert_eq!(
            vec![
                p.quota("Claim", DatasetId::Iam),
                p.quota("Claim", DatasetId::IbmArgument),
                p.quota("Claim", DatasetId::IbmClaim)
            ],
            expect
        );
        assert_eq!(expect, vec![4, 3, 3]);
    }

    #[test]
    fn plan_shortfall_names_class() {
        let mut t = ClassCountTable::new(TaskId::Cd);
        t.set("Claim", DatasetId::Iam, 5).unwrap();
        t.set("Non-claim", DatasetId::Iam, 50).unwrap();
        match plan(&t, 20) {
            Err(Error::Shortfall {
                class,
                needed,
                available,
            }) => {
                assert_eq!((class.as_str(), needed, available), ("Claim", 10, 5));
            }
            other => panic!("{other:?}"),
        }
    }

    fn population(n_per_class: usize) -> Vec<TaskInstance> {
        let mut v = Vec::new();
        for class in ["Claim", "Non-claim"] {
            for i in 0..n_per_class {
                v.push(inst(&format!("{class}-{i:03}"), DatasetId::Iam, class));
            }
        }
        v
    }

    #[test]
    fn draw_whole_cell_and_infeasible() {
        let pop = population(10);
        let p = plan(&ClassCountTable::from_instances(TaskId::Cd, &pop), 20).unwrap();
        let got = draw(&pop, &p, Split::Train, 5).unwrap();
        assert_eq!(got.len(), 20);
        let p = plan(&ClassCountTable::from_instances(TaskId::Cd, &pop), 20).unwrap();
        assert!(matches!(
            draw(&pop[..15], &p, Split::Val, 5),
            Err(Error::InfeasibleCell { .. })
        ));
    }

    #[test]
    fn draw_inclusion_is_uniform() {
        // Per-item inclusion over 2000 seeds vs Binomial(2000, quota/100), 3 sigma.
        let pop = population(100);
        let p = plan(&ClassCountTable::from_instances(TaskId::Cd, &pop), 60).unwrap();
        let trials = 2000u32;
        let mut hits: BTreeMap<String, u32> = BTreeMap::new();
        for seed in 0..trials {
            for i in draw(&pop, &p, Split::Train, seed as u64).unwrap() {
                *hits.entry(i.id).or_default() += 1;
            }
        }
        let prob = 30.0 / 100.0;
        let sigma = (prob * (1.0 - prob) / trials as f64).sqrt();
        for i in &pop {
            let freq = *hits.get(&i.id).unwrap_or(&0) as f64 / trials as f64;
            assert!((freq - prob).abs() <= 3.0 * sigma, "{}: {freq}", i.id);
        }
    }

    proptest! {
        #[test]
        fn plan_invariants(
            cells in prop::collection::vec((1u64..500, 1u64..500, 1u64..500), 2..=2),
            n in 1u64..400,
        ) {
            let mut t = ClassCountTable::new(TaskId::Cd);
            for (class, (a, b, c)) in ["Claim", "Non-claim"].iter().zip(&cells) {
                t.set(class, DatasetId::Iam, *a).unwrap();
                t.set(class, DatasetId::IbmClaim, *b).unwrap();
                t.set(class, DatasetId::IbmArgument, *c).unwrap();
            }
            match plan(&t, n) {
                Ok(p) => {
                    prop_assert_eq!(p.targets.values().sum::<u64>(), n);
                    for class in ["Claim", "Non-claim"] {
                        let target = p.targets[class];
                        prop_assert_eq!(p.class_total(class), target);
                        for d in [DatasetId::Iam, DatasetId::IbmClaim, DatasetId::IbmArgument] {
                            prop_assert!(p.quota(class, d) <= t.get(class, d));
                            if target > 0 {
                                let r = ratio(&t, class, d).unwrap();
                                let share = Ratio::new(p.quota(class, d), target);
                                let err = if share > r { share - r } else { r - share };
                                prop_assert!(err < Ratio::new(1, target));
                            }
                        }
                    }
                }
                Err(Error::Shortfall { .. }) => {}
                Err(e) => prop_assert!(false, "{e}"),
            }
        }

        #[test]
        fn split_is_a_partition(n in 3usize..200, seed in any::<u64>()) {
            let xs: Vec<TaskInstance> = (0..n).map(|i| inst(&format!("x{i}"), DatasetId::Fever, "For")).collect();
            let m = split(&xs, seed).unwrap();
            prop_assert_eq!(m.assignment.len(), n);
            let sizes = split_sizes(n);
            prop_assert_eq!(m.count(Split::Train), sizes[0]);
            prop_assert_eq!(m.count(Split::Val), sizes[1]);
            prop_assert_eq!(m.count(Split::Test), sizes[2]);
        }
    }
}
