//! Frequency-proportional stratified downsampling of a QA pool.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::qa::QaItem;
use crate::rng::SeedStream;

pub const OTHER: &str = "other";

/// Built-in taxonomy shipped with the crate.
pub const DEFAULT_TAXONOMY: &str = include_str!("../data/taxonomy.toml");

#[derive(Debug, thiserror::Error)]
pub enum BalanceError {
    #[error("taxonomy: {0}")]
    Taxonomy(String),
    #[error("fine class {class:?} listed under both {first} and {second}")]
    DuplicateClass { class: String, first: String, second: String },
    #[error("frequency table: {0}")]
    Frequency(String),
    #[error("frequency table csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoarseCategory {
    pub label: String,
    pub fine: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TaxonomyFile {
    coarse: BTreeMap<String, CoarseCategory>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Taxonomy {
    pub coarse: BTreeMap<String, CoarseCategory>,
    /// Normalised fine name → (display name, coarse key).
    fine: BTreeMap<String, (String, String)>,
}

/// Lookup key for class names: lowercase, single spaces, `_`/`-` as spaces.
pub fn normalize_class(name: &str) -> String {
    name.split(|c: char| c.is_whitespace() || c == '_' || c == '-')
        .filter(|s| !s.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

impl Taxonomy {
    pub fn parse(text: &str) -> Result<Self, BalanceError> {
        let file: TaxonomyFile = toml::from_str(text).map_err(|e| BalanceError::Taxonomy(e.to_string()))?;
        let mut fine: BTreeMap<String, (String, String)> = BTreeMap::new();
        for (key, cat) in &file.coarse {
            for name in &cat.fine {
                let norm = normalize_class(name);
                if norm == OTHER {
                    return Err(BalanceError::Taxonomy(format!("{OTHER:?} is reserved")));
                }
                if let Some((_, first)) = fine.get(&norm) {
                    return Err(BalanceError::DuplicateClass {
                        class: name.clone(),
                        first: first.clone(),
                        second: key.clone(),
                    });
                }
                fine.insert(norm, (name.clone(), key.clone()));
            }
        }
        Ok(Self { coarse: file.coarse, fine })
    }

    pub fn builtin() -> Self {
        Self::parse(DEFAULT_TAXONOMY).expect("built-in taxonomy is valid")
    }

    pub fn fine_count(&self) -> usize {
        self.fine.len()
    }

    /// Normalised class name, or `"other"` when the taxonomy does not list it.
    pub fn canonical(&self, class: &str) -> String {
        let norm = normalize_class(class);
        if self.fine.contains_key(&norm) {
            norm
        } else {
            OTHER.to_string()
        }
    }

    pub fn coarse_of(&self, class: &str) -> &str {
        self.fine.get(&normalize_class(class)).map(|(_, c)| c.as_str()).unwrap_or(OTHER)
    }

    pub fn fine_classes(&self) -> impl Iterator<Item = &str> {
        self.fine.keys().map(String::as_str)
    }
}

/// Relative frequency per fine class, keyed by normalised name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyTable(pub BTreeMap<String, f64>);

#[derive(Debug, Deserialize, Serialize)]
struct FrequencyRow {
    fine_class: String,
    frequency: f64,
}

impl FrequencyTable {
    pub fn new(entries: impl IntoIterator<Item = (String, f64)>) -> Result<Self, BalanceError> {
        let mut map = BTreeMap::new();
        for (class, f) in entries {
            let key = normalize_class(&class);
            if !f.is_finite() || f < 0.0 {
                return Err(BalanceError::Frequency(format!("{class:?} has frequency {f}")));
            }
            if map.insert(key, f).is_some() {
                return Err(BalanceError::Frequency(format!("{class:?} listed twice")));
            }
        }
        let sum: f64 = map.values().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(BalanceError::Frequency(format!("frequencies sum to {sum}, expected 1")));
        }
        Ok(Self(map))
    }

    /// CSV with header `fine_class,frequency`.
    pub fn from_csv(reader: impl Read) -> Result<Self, BalanceError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let rows = rdr.deserialize::<FrequencyRow>().map(|r| r.map(|r| (r.fine_class, r.frequency))).collect::<Result<Vec<_>, _>>()?;
        Self::new(rows)
    }

    pub fn to_csv(&self) -> Result<String, BalanceError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for (c, f) in &self.0 {
            w.serialize(FrequencyRow {
                fine_class: c.clone(),
                frequency: *f,
            })?;
        }
        let bytes = w.into_inner().map_err(|e| BalanceError::Frequency(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Integer per-class targets summing to `n`: floors of `freq·n`, then the
/// leftover units go to the largest fractional parts (name order on ties).
pub fn estimate_targets(freq: &FrequencyTable, n: usize) -> BTreeMap<String, usize> {
    let mut parts: Vec<(&String, usize, f64)> = freq
        .0
        .iter()
        .map(|(c, &f)| {
            let mut x = f * n as f64;
            // 0.29 * 100 lands just under 29.
            if (x - x.round()).abs() < 1e-9 {
                x = x.round();
            }
            (c, x.floor() as usize, x - x.floor())
        })
        .collect();
    let assigned: usize = parts.iter().map(|p| p.1).sum();
    // Stable sort keeps name order among equal remainders.
    let mut order: Vec<usize> = (0..parts.len()).collect();
    order.sort_by(|&a, &b| parts[b].2.total_cmp(&parts[a].2));
    if assigned <= n {
        for &i in order.iter().cycle().take(n - assigned) {
            parts[i].1 += 1;
        }
    } else {
        let mut excess = assigned - n;
        for &i in order.iter().rev() {
            if excess == 0 {
                break;
            }
            if parts[i].1 > 0 {
                parts[i].1 -= 1;
                excess -= 1;
            }
        }
    }
    parts.into_iter().map(|(c, k, _)| (c.clone(), k)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDeficit {
    pub class: String,
    pub target: usize,
    pub available: usize,
    pub deficit: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeficitReport {
    pub target_total: usize,
    pub realized_total: usize,
    pub deficits: Vec<ClassDeficit>,
    /// Pool items whose class has no target, by class.
    pub untargeted: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleOutcome {
    pub items: Vec<QaItem>,
    pub report: DeficitReport,
}

/// Class an item is balanced under: its fine label routed through the
/// taxonomy when one is given.
pub fn item_class(item: &QaItem, taxonomy: Option<&Taxonomy>) -> String {
    match (&item.category, taxonomy) {
        (Some(c), Some(t)) => t.canonical(c),
        (Some(c), None) => normalize_class(c),
        (None, _) => OTHER.to_string(),
    }
}

/// Seeded per-class sampling without replacement of `min(target, available)`
/// items. Shortfalls are reported, not redistributed. Survivors keep pool
/// order.
pub fn stratified_sample(pool: &[QaItem], targets: &BTreeMap<String, usize>, seed: u64, taxonomy: Option<&Taxonomy>) -> SampleOutcome {
    let mut by_class: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, item) in pool.iter().enumerate() {
        by_class.entry(item_class(item, taxonomy)).or_default().push(i);
    }
    let stream = SeedStream::new(seed).child("stratified_sample");
    let mut keep = BTreeSet::new();
    let mut deficits = Vec::new();
    for (class, &target) in targets {
        let members = by_class.get(class).map(Vec::as_slice).unwrap_or(&[]);
        let k = target.min(members.len());
        let mut rng = stream.child(class).rng();
        for j in rand::seq::index::sample(&mut rng, members.len(), k) {
            keep.insert(members[j]);
        }
        if k < target {
            deficits.push(ClassDeficit {
                class: class.clone(),
                target,
                available: members.len(),
                deficit: target - k,
            });
        }
    }
    let untargeted = by_class.iter().filter(|(c, _)| !targets.contains_key(*c)).map(|(c, v)| (c.clone(), v.len())).collect();
    let items: Vec<QaItem> = keep.into_iter().map(|i| pool[i].clone()).collect();
    SampleOutcome {
        report: DeficitReport {
            target_total: targets.values().sum(),
            realized_total: items.len(),
            deficits,
            untargeted,
        },
        items,
    }
}

/// Per-class histogram of a sample.
pub fn class_histogram(items: &[QaItem], taxonomy: Option<&Taxonomy>) -> BTreeMap<String, usize> {
    let mut h = BTreeMap::new();
    for it in items {
        *h.entry(item_class(it, taxonomy)).or_insert(0) += 1;
    }
    h
}

/// L1 distance between the realised class distribution and the table.
pub fn l1_to_table(hist: &BTreeMap<String, usize>, freq: &FrequencyTable) -> f64 {
    let total: usize = hist.values().sum();
    if total == 0 {
        return freq.0.values().sum();
    }
    let classes: BTreeSet<&String> = hist.keys().chain(freq.0.keys()).collect();
    classes
        .into_iter()
        .map(|c| {
            let p = hist.get(c).copied().unwrap_or(0) as f64 / total as f64;
            (p - freq.0.get(c).copied().unwrap_or(0.0)).abs()
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qa::{Ability, Answer, AnswerKind, Provenance, Variant};
    use proptest::prelude::*;

    fn table(entries: &[(&str, f64)]) -> FrequencyTable {
        FrequencyTable::new(entries.iter().map(|(c, f)| (c.to_string(), *f))).unwrap()
    }

    fn item(i: usize, class: &str) -> QaItem {
        QaItem {
            id: format!("q{i}"),
            video_id: "v".into(),
            question: "What color is it?".into(),
            answer: Answer::Text("red".into()),
            answer_kind: AnswerKind::OpenText,
            ability: Ability::Color,
            operands: vec![1],
            masks_ref: None,
            provenance: Provenance {
                template_id: "color".into(),
                phrasing_index: 0,
                fact_ids: vec![],
                rng_seed: 0,
                variant: Variant::Qualitative,
                note: None,
            },
            category: Some(class.into()),
        }
    }

    #[test]
    fn builtin_taxonomy_shape() {
        let t = Taxonomy::builtin();
        assert_eq!(t.coarse.len(), 12);
        assert_eq!(t.fine_count(), 128);
        assert_eq!(t.coarse_of("Light Switch"), "furniture");
        assert_eq!(t.coarse_of("light_switch"), "furniture");
        assert_eq!(t.coarse_of("calendar"), "stationery_office");
        assert_eq!(t.canonical("Spaceship"), OTHER);
        assert_eq!(t.coarse_of("Spaceship"), OTHER);
    }

    #[test]
    fn duplicate_fine_class_rejected() {
        let text = "[coarse.a]\nlabel=\"A\"\nfine=[\"Cup\"]\n[coarse.b]\nlabel=\"B\"\nfine=[\"cup\"]\n";
        assert!(matches!(Taxonomy::parse(text), Err(BalanceError::DuplicateClass { .. })));
    }

    #[test]
    fn target_rounding() {
        let t = estimate_targets(&table(&[("chair", 0.3), ("cup", 0.2), ("other", 0.5)]), 10);
        assert_eq!(t, BTreeMap::from([("chair".into(), 3), ("cup".into(), 2), ("other".into(), 5)]));
        let third = 1.0 / 3.0;
        let t = estimate_targets(&table(&[("a", third), ("b", third), ("c", third)]), 10);
        assert_eq!(t, BTreeMap::from([("a".into(), 4), ("b".into(), 3), ("c".into(), 3)]));
        let t = estimate_targets(&table(&[("a", 0.29), ("b", 0.71)]), 100);
        assert_eq!(t, BTreeMap::from([("a".into(), 29), ("b".into(), 71)]));
        assert!(estimate_targets(&table(&[("a", 0.5), ("b", 0.5)]), 0).values().all(|&v| v == 0));
    }

    #[test]
    fn frequency_validation_and_csv() {
        assert!(FrequencyTable::new([("a".to_string(), 0.5)]).is_err());
        assert!(FrequencyTable::new([("a".to_string(), -0.5), ("b".to_string(), 1.5)]).is_err());
        let t = FrequencyTable::from_csv("fine_class,frequency\nChair, 0.25\ncup,0.75\n".as_bytes()).unwrap();
        assert_eq!(t.0["chair"], 0.25);
        assert_eq!(FrequencyTable::from_csv(t.to_csv().unwrap().as_bytes()).unwrap(), t);
    }

    #[test]
    fn clamp_and_deficit() {
        let pool: Vec<_> = (0..30).map(|i| item(i, "cup")).chain((30..130).map(|i| item(i, "chair"))).collect();
        let targets = BTreeMap::from([("cup".to_string(), 50), ("chair".to_string(), 40)]);
        let out = stratified_sample(&pool, &targets, 3, None);
        let h = class_histogram(&out.items, None);
        assert_eq!(h["cup"], 30);
        assert_eq!(h["chair"], 40);
        assert_eq!(out.report.deficits, vec![ClassDeficit { class: "cup".into(), target: 50, available: 30, deficit: 20 }]);
        let ids: Vec<usize> = out.items.iter().map(|i| i.id[1..].parse().unwrap()).collect();
        assert!(ids.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn empty_pool() {
        let targets = BTreeMap::from([("cup".to_string(), 5), ("chair".to_string(), 2)]);
        let out = stratified_sample(&[], &targets, 0, None);
        assert!(out.items.is_empty());
        let d: BTreeMap<_, _> = out.report.deficits.iter().map(|d| (d.class.clone(), d.deficit)).collect();
        assert_eq!(d, BTreeMap::from([("cup".to_string(), 5), ("chair".to_string(), 2)]));
    }

    #[test]
    fn unmapped_classes_route_to_other() {
        let tax = Taxonomy::builtin();
        let pool = vec![item(0, "Spaceship"), item(1, "Cup"), item(2, "gizmo")];
        let targets = BTreeMap::from([("other".to_string(), 2), ("cup".to_string(), 1)]);
        let out = stratified_sample(&pool, &targets, 0, Some(&tax));
        assert_eq!(out.items.len(), 3);
        assert!(out.report.deficits.is_empty());
    }

    #[test]
    fn seeds_change_identity_not_counts() {
        let pool: Vec<_> = (0..200).map(|i| item(i, if i % 3 == 0 { "cup" } else { "bowl" })).collect();
        let targets = BTreeMap::from([("cup".to_string(), 20), ("bowl".to_string(), 30)]);
        let a = stratified_sample(&pool, &targets, 1, None);
        let b = stratified_sample(&pool, &targets, 2, None);
        assert_eq!(a, stratified_sample(&pool, &targets, 1, None));
        assert_eq!(class_histogram(&a.items, None), class_histogram(&b.items, None));
        assert_ne!(a.items, b.items);
    }

    proptest! {
        #[test]
        fn targets_sum_to_n(weights in proptest::collection::vec(0.0f64..1.0, 1..40), n in 0usize..20000) {
            let total: f64 = weights.iter().sum();
            prop_assume!(total > 1e-6);
            let t = FrequencyTable(weights.iter().enumerate().map(|(i, w)| (format!("c{i:02}"), w / total)).collect());
            let targets = estimate_targets(&t, n);
            prop_assert_eq!(targets.values().sum::<usize>(), n);
            for (c, &k) in &targets {
                prop_assert!((k as f64 - t.0[c] * n as f64).abs() < 1.0 + 1e-6);
            }
        }
    }
}
