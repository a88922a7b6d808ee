//! Answer scoring: exact accuracy, thresholded Wu-Palmer (WUPS), the
//! ten-annotator consensus score, and per-question-type tables.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::text::{normalize, tokenize};

/// Score multiplier for token pairs whose similarity is below the threshold.
pub const DEFAULT_DOWN_WEIGHT: f64 = 0.1;
pub const OTHERS: &str = "others";

/// Single-rooted tree read from `child<TAB>parent` lines.
#[derive(Debug, Clone)]
pub struct TaxonomyTree {
    parent: HashMap<String, String>,
    depth: HashMap<String, usize>,
    root: String,
}

impl TaxonomyTree {
    pub fn from_edges<'a>(edges: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self> {
        let mut parent: HashMap<String, String> = HashMap::new();
        let mut nodes: HashSet<String> = HashSet::new();
        for (child, par) in edges {
            let (child, par) = (normalize(child), normalize(par));
            ensure!(!child.is_empty() && !par.is_empty(), "taxonomy edge with an empty term");
            ensure!(child != par, "taxonomy node {child:?} is its own parent");
            if let Some(prev) = parent.get(&child) {
                ensure!(*prev == par, "taxonomy node {child:?} has two parents ({prev:?}, {par:?})");
            }
            nodes.insert(child.clone());
            nodes.insert(par.clone());
            parent.insert(child, par);
        }
        let mut roots: Vec<&String> = nodes.iter().filter(|n| !parent.contains_key(*n)).collect();
        roots.sort();
        if roots.len() != 1 {
            return Err(Error::Config(if roots.is_empty() {
                "taxonomy has a cycle and no root".into()
            } else {
                format!("taxonomy has {} roots: {:?}", roots.len(), roots)
            }));
        }
        let root = roots[0].clone();
        let mut depth = HashMap::with_capacity(nodes.len());
        depth.insert(root.clone(), 1);
        for node in &nodes {
            let mut chain = vec![node.as_str()];
            let mut cur = node.as_str();
            while !depth.contains_key(cur) {
                cur = parent[cur].as_str();
                if chain.contains(&cur) {
                    return Err(Error::Config(format!("taxonomy has a cycle through {cur:?}")));
                }
                chain.push(cur);
            }
            let mut d = depth[cur];
            for n in chain.iter().rev().skip(1) {
                d += 1;
                depth.insert((*n).to_string(), d);
            }
        }
        Ok(Self { parent, depth, root })
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut edges = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((c, p)) = line.split_once('\t') else {
                return Err(Error::Parse { path: path.into(), line: i + 1, msg: "expected child<TAB>parent".into() });
            };
            edges.push((c, p));
        }
        Self::from_edges(edges)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn root(&self) -> &str {
        &self.root
    }

    pub fn len(&self) -> usize {
        self.depth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.depth.is_empty()
    }

    pub fn contains(&self, term: &str) -> bool {
        self.depth.contains_key(term)
    }

    /// Root depth is 1.
    pub fn depth(&self, term: &str) -> Option<usize> {
        self.depth.get(term).copied()
    }

    pub fn parent(&self, term: &str) -> Option<&str> {
        self.parent.get(term).map(String::as_str)
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.depth.keys().map(String::as_str)
    }

    /// Deepest common ancestor (a node is its own ancestor).
    pub fn lcs(&self, a: &str, b: &str) -> Option<&str> {
        let mut ancestors = HashSet::new();
        let mut cur = self.depth.get_key_value(a)?.0.as_str();
        loop {
            ancestors.insert(cur);
            match self.parent(cur) {
                Some(p) => cur = p,
                None => break,
            }
        }
        let mut cur = self.depth.get_key_value(b)?.0.as_str();
        loop {
            if ancestors.contains(cur) {
                return Some(cur);
            }
            cur = self.parent(cur)?;
        }
    }
}

/// `2·depth(lcs) / (depth(a) + depth(b))`; 0 when either term is absent.
pub fn wup_similarity(tax: &TaxonomyTree, a: &str, b: &str) -> f64 {
    let (Some(da), Some(db)) = (tax.depth(a), tax.depth(b)) else { return 0.0 };
    let l = tax.lcs(a, b).and_then(|l| tax.depth(l)).expect("single-rooted tree");
    2.0 * l as f64 / (da + db) as f64
}

fn token_score(tax: &TaxonomyTree, a: &str, b: &str, tau: f64, down_weight: f64) -> f64 {
    if a == b {
        return 1.0;
    }
    let w = wup_similarity(tax, a, b);
    if w >= tau { w } else { down_weight * w }
}

/// Score of one prediction against one truth, both free text.
pub fn wups_pair(tax: &TaxonomyTree, prediction: &str, truth: &str, tau: f64, down_weight: f64) -> f64 {
    let p = tokenize(prediction);
    let t = tokenize(truth);
    if p.is_empty() || t.is_empty() {
        return if p.is_empty() && t.is_empty() { 1.0 } else { 0.0 };
    }
    let directed = |xs: &[String], ys: &[String]| -> f64 {
        xs.iter()
            .map(|x| ys.iter().map(|y| token_score(tax, x, y, tau, down_weight)).fold(0.0, f64::max))
            .fold(f64::INFINITY, f64::min)
    };
    directed(&p, &t).min(directed(&t, &p))
}

/// Sum that does not depend on input order.
fn ordered_sum(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs.into_iter().sum()
}

/// Mean pair score × 100, down-weighting sub-threshold tokens by 0.1.
pub fn wups_score<S: AsRef<str>, T: AsRef<str>>(
    predictions: &[S],
    ground_truths: &[T],
    tax: &TaxonomyTree,
    tau: f64,
) -> Result<f64> {
    wups_score_with(predictions, ground_truths, tax, tau, DEFAULT_DOWN_WEIGHT)
}

pub fn wups_score_with<S: AsRef<str>, T: AsRef<str>>(
    predictions: &[S],
    ground_truths: &[T],
    tax: &TaxonomyTree,
    tau: f64,
    down_weight: f64,
) -> Result<f64> {
    ensure!(predictions.len() == ground_truths.len(), "{} predictions for {} ground truths", predictions.len(), ground_truths.len());
    ensure!(!predictions.is_empty(), "nothing to score");
    ensure!((0.0..=1.0).contains(&tau), "threshold must be in [0, 1], got {tau}");
    let scores = predictions
        .iter()
        .zip(ground_truths)
        .map(|(p, t)| wups_pair(tax, p.as_ref(), t.as_ref(), tau, down_weight))
        .collect();
    Ok(100.0 * ordered_sum(scores) / predictions.len() as f64)
}

pub fn answers_match(a: &str, b: &str) -> bool {
    normalize(a) == normalize(b)
}

/// Case- and punctuation-insensitive equality rate × 100.
pub fn exact_accuracy<S: AsRef<str>, T: AsRef<str>>(predictions: &[S], ground_truths: &[T]) -> Result<f64> {
    ensure!(predictions.len() == ground_truths.len(), "{} predictions for {} ground truths", predictions.len(), ground_truths.len());
    ensure!(!predictions.is_empty(), "nothing to score");
    let hits = predictions.iter().zip(ground_truths).filter(|(p, t)| answers_match(p.as_ref(), t.as_ref())).count();
    Ok(100.0 * hits as f64 / predictions.len() as f64)
}

/// `min(#matching humans / 3, 1)`.
pub fn vqa_consensus<S: AsRef<str>>(prediction: &str, human_answers: &[S]) -> Result<f64> {
    ensure!(!human_answers.is_empty(), "consensus needs at least one human answer");
    let p = normalize(prediction);
    let count = human_answers.iter().filter(|h| normalize(h.as_ref()) == p).count();
    Ok((count as f64 / 3.0).min(1.0))
}

/// Question-type prefixes in report row order. Matching is on whole
/// tokens, so "what" does not claim "whatever".
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrefixTable {
    pub prefixes: Vec<String>,
}

impl Default for PrefixTable {
    fn default() -> Self {
        let rows = [
            "what is", "what color", "what kind", "what are", "what type", "is the", "is this", "how many", "are",
            "does", "where", "is there", "why", "which", "do", "what does", "what time", "who", "what sport",
            "what animal", "what brand",
        ];
        Self::new(rows)
    }
}

impl PrefixTable {
    pub fn new<S: AsRef<str>>(prefixes: impl IntoIterator<Item = S>) -> Self {
        let prefixes = prefixes.into_iter().map(|p| normalize(p.as_ref())).filter(|p| p != OTHERS && !p.is_empty()).collect();
        Self { prefixes }
    }

    /// Row labels: the prefixes followed by `others`.
    pub fn rows(&self) -> Vec<&str> {
        self.prefixes.iter().map(String::as_str).chain([OTHERS]).collect()
    }
}

/// Longest matching prefix, or `others`.
pub fn question_type(question: &str, table: &PrefixTable) -> String {
    let q = tokenize(question);
    table
        .prefixes
        .iter()
        .filter_map(|p| {
            let pt: Vec<&str> = p.split(' ').collect();
            (pt.len() <= q.len() && pt.iter().zip(&q).all(|(a, b)| *a == b)).then_some((pt.len(), p))
        })
        .max_by_key(|(n, _)| *n)
        .map(|(_, p)| p.clone())
        .unwrap_or_else(|| OTHERS.to_string())
}

/// One scored question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub question: String,
    pub prediction: String,
    pub truth: String,
    /// Ten annotator answers for consensus-style records.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub human_answers: Option<Vec<String>>,
    /// Overrides the prefix table when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question_type: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeRow {
    pub question_type: String,
    pub count: usize,
    /// `None` for types with no records.
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub total: usize,
    pub accuracy: f64,
    pub wups_09: f64,
    pub wups_00: f64,
    /// Mean consensus × 100 over records that carry human answers.
    pub consensus: Option<f64>,
    pub per_type: Vec<TypeRow>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub down_weight: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { down_weight: DEFAULT_DOWN_WEIGHT }
    }
}

pub fn build_report(records: &[EvalRecord], tax: &TaxonomyTree, table: &PrefixTable) -> Result<EvalReport> {
    build_report_with(records, tax, table, &EvalConfig::default())
}

pub fn build_report_with(records: &[EvalRecord], tax: &TaxonomyTree, table: &PrefixTable, config: &EvalConfig) -> Result<EvalReport> {
    ensure!(!records.is_empty(), "cannot report on zero records");
    let preds: Vec<&str> = records.iter().map(|r| r.prediction.as_str()).collect();
    let truths: Vec<&str> = records.iter().map(|r| r.truth.as_str()).collect();

    let rows = table.rows();
    let mut by_type: BTreeMap<&str, (usize, usize)> = rows.iter().map(|r| (*r, (0, 0))).collect();
    for r in records {
        let t = match &r.question_type {
            Some(t) if by_type.contains_key(normalize(t).as_str()) => normalize(t),
            _ => question_type(&r.question, table),
        };
        let entry = by_type.get_mut(t.as_str()).expect("question_type returns a table row");
        entry.0 += 1;
        entry.1 += usize::from(answers_match(&r.prediction, &r.truth));
    }
    let per_type = rows
        .iter()
        .map(|row| {
            let (count, hits) = by_type[row];
            TypeRow {
                question_type: row.to_string(),
                count,
                accuracy: (count > 0).then(|| 100.0 * hits as f64 / count as f64),
            }
        })
        .collect();

    let consensus_scores = records
        .iter()
        .filter_map(|r| r.human_answers.as_ref().map(|h| vqa_consensus(&r.prediction, h)))
        .collect::<Result<Vec<f64>>>()?;
    let consensus = (!consensus_scores.is_empty())
        .then(|| 100.0 * ordered_sum(consensus_scores.clone()) / consensus_scores.len() as f64);

    Ok(EvalReport {
        total: records.len(),
        accuracy: exact_accuracy(&preds, &truths)?,
        wups_09: wups_score_with(&preds, &truths, tax, 0.9, config.down_weight)?,
        wups_00: wups_score_with(&preds, &truths, tax, 0.0, config.down_weight)?,
        consensus,
        per_type,
    })
}

impl EvalReport {
    /// Fixed-width text table: overall scores, then one row per type.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<14}{:>8}{:>10}{:>10}{:>11}", "", "Acc(%)", "WUPS@0.9", "WUPS@0.0", "Consensus");
        let cons = self.consensus.map_or("-".to_string(), |c| format!("{c:.2}"));
        let _ = writeln!(s, "{:<14}{:>8.2}{:>10.2}{:>10.2}{:>11}", "overall", self.accuracy, self.wups_09, self.wups_00, cons);
        let _ = writeln!(s);
        let _ = writeln!(s, "{:<14}{:>8}{:>8}", "question type", "count", "acc(%)");
        for row in &self.per_type {
            let acc = row.accuracy.map_or("-".to_string(), |a| format!("{a:.2}"));
            let _ = writeln!(s, "{:<14}{:>8}{:>8}", row.question_type, row.count, acc);
        }
        let _ = writeln!(s, "{:<14}{:>8}", "total", self.total);
        s
    }
}

pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<EvalRecord>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse { path: path.into(), line: i + 1, msg: e.to_string() })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const TOY: &str = include_str!("../data/toy_taxonomy.tsv");

    fn toy() -> TaxonomyTree {
        TaxonomyTree::parse(TOY, Path::new("toy_taxonomy.tsv")).unwrap()
    }

    #[test]
    fn depths_and_lcs() {
        let t = toy();
        assert_eq!(t.root(), "entity");
        assert_eq!(t.depth("entity"), Some(1));
        assert_eq!(t.depth("dog"), Some(3));
        assert_eq!(t.depth("puppy"), Some(4));
        assert_eq!(t.lcs("puppy", "cat"), Some("animal"));
        assert_eq!(t.lcs("dog", "puppy"), Some("dog"));
        assert_eq!(t.lcs("red", "park"), Some("entity"));
    }

    #[test]
    fn wup_examples() {
        let t = toy();
        for x in t.terms() {
            assert_eq!(wup_similarity(&t, x, x), 1.0);
        }
        assert!((wup_similarity(&t, "dog", "cat") - 2.0 * 2.0 / (3.0 + 3.0)).abs() < 1e-12);
        assert_eq!(wup_similarity(&t, "dog", "zxq"), 0.0);
        // lcs at the root: 2·1/(3+3)
        assert!((wup_similarity(&t, "dog", "ball") - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn malformed_taxonomies_are_rejected() {
        assert!(TaxonomyTree::from_edges([("a", "b"), ("b", "a")]).is_err());
        assert!(TaxonomyTree::from_edges([("a", "b"), ("b", "c"), ("c", "a"), ("d", "e")]).is_err());
        assert!(TaxonomyTree::from_edges([("a", "r"), ("a", "s")]).is_err());
        assert!(TaxonomyTree::from_edges([("a", "r"), ("b", "s")]).is_err());
        assert!(TaxonomyTree::from_edges([("a", "a")]).is_err());
        assert!(matches!(TaxonomyTree::parse("dog animal\n", Path::new("t")), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn wups_examples() {
        let t = toy();
        assert_eq!(wups_score(&["dog", "red"], &["dog", "red"], &t, 0.9).unwrap(), 100.0);
        let at09 = wups_score(&["dog"], &["cat"], &t, 0.9).unwrap();
        assert!((at09 - 6.67).abs() < 0.01, "{at09}");
        let at00 = wups_score(&["dog"], &["cat"], &t, 0.0).unwrap();
        assert!((at00 - 66.67).abs() < 0.01, "{at00}");
        assert!(wups_score(&["dog"], &["cat", "dog"], &t, 0.9).is_err());
        // unknown words still match themselves
        assert_eq!(wups_score(&["zebra"], &["Zebra"], &t, 0.9).unwrap(), 100.0);
    }

    #[test]
    fn multiword_pairs_take_the_weaker_direction() {
        let t = toy();
        // "red dog" vs "dog": red→dog is weak, dog→dog is 1; min over the
        // longer side drags the pair down
        let s = wups_pair(&t, "red dog", "dog", 0.0, 0.1);
        assert!((s - wup_similarity(&t, "red", "dog")).abs() < 1e-12);
        assert_eq!(wups_pair(&t, "dog", "red dog", 0.0, 0.1), s);
        assert_eq!(wups_pair(&t, "", "", 0.9, 0.1), 1.0);
        assert_eq!(wups_pair(&t, "", "dog", 0.9, 0.1), 0.0);
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(exact_accuracy(&["a", "b"], &["a", "b"]).unwrap(), 100.0);
        assert_eq!(exact_accuracy(&["Dog"], &["dog"]).unwrap(), 100.0);
        assert_eq!(exact_accuracy(&["a", "b", "c", "d"], &["a", "x", "y", "z"]).unwrap(), 25.0);
        assert!(exact_accuracy(&["a"], &["a", "b"]).is_err());
    }

    #[test]
    fn consensus_examples() {
        let humans = |k: usize| -> Vec<String> { (0..10).map(|i| if i < k { "two".into() } else { format!("x{i}") }).collect() };
        assert_eq!(vqa_consensus("two", &humans(3)).unwrap(), 1.0);
        assert!((vqa_consensus("two", &humans(2)).unwrap() - 0.6667).abs() < 1e-4);
        assert_eq!(vqa_consensus("two", &humans(0)).unwrap(), 0.0);
        assert_eq!(vqa_consensus("Two.", &humans(10)).unwrap(), 1.0);
        assert!(vqa_consensus("two", &Vec::<String>::new()).is_err());
    }

    #[test]
    fn question_type_examples() {
        let t = PrefixTable::new(["what color", "what"]);
        assert_eq!(question_type("what color is the tablecloth?", &t), "what color");
        assert_eq!(question_type("What is the red fruit?", &t), "what");
        assert_eq!(question_type("whatever", &t), OTHERS);
        let d = PrefixTable::default();
        assert_eq!(question_type("why are the zebras in water?", &d), "why");
        assert_eq!(question_type("How many people in the photo?", &d), "how many");
        assert_eq!(question_type("zzz?", &d), OTHERS);
        assert_eq!(d.rows().last(), Some(&OTHERS));
    }

    fn rec(q: &str, p: &str, t: &str) -> EvalRecord {
        EvalRecord { question: q.into(), prediction: p.into(), truth: t.into(), human_answers: None, question_type: None }
    }

    #[test]
    fn report_aggregation() {
        let t = toy();
        let table = PrefixTable::default();
        let all = vec![rec("what color is it", "red", "red"), rec("how many dogs", "two", "two")];
        let r = build_report(&all, &t, &table).unwrap();
        assert_eq!((r.accuracy, r.wups_09, r.wups_00), (100.0, 100.0, 100.0));
        assert!(r.per_type.iter().filter_map(|row| row.accuracy).all(|a| a == 100.0));

        let one = vec![rec("why", "a", "a"), rec("why not", "b", "c"), rec("why so", "d", "d")];
        let r = build_report(&one, &t, &table).unwrap();
        let why = r.per_type.iter().find(|row| row.question_type == "why").unwrap();
        assert_eq!(why.accuracy, Some(r.accuracy));
        assert_eq!(r.per_type.iter().map(|row| row.count).sum::<usize>(), 3);
        assert!(r.render().contains("why"));
        assert!(build_report(&[], &t, &table).is_err());
    }

    #[test]
    fn report_matches_brute_force_recount() {
        let t = toy();
        let table = PrefixTable::default();
        let words = ["dog", "cat", "red", "blue", "ball", "park", "two"];
        let questions = ["what is this", "how many dogs", "what color is it", "why", "hmm"];
        let mut rng = crate::numkit::Rng::new(23);
        let records: Vec<EvalRecord> = (0..100)
            .map(|_| rec(questions[rng.below(5)], words[rng.below(7)], words[rng.below(7)]))
            .collect();
        let r = build_report(&records, &t, &table).unwrap();
        let mut hits = 0;
        for x in &records {
            if x.prediction == x.truth {
                hits += 1;
            }
        }
        assert_eq!(r.accuracy, hits as f64);
        assert_eq!(r.total, 100);
    }

    fn arb_records() -> impl Strategy<Value = Vec<EvalRecord>> {
        let word = prop::sample::select(vec!["dog", "cat", "puppy", "red", "blue", "ball", "park", "zebra", "red dog"]);
        let q = prop::sample::select(vec!["what is it", "how many", "why", "what color", "hm"]);
        prop::collection::vec((q, word.clone(), word), 1..30)
            .prop_map(|v| v.into_iter().map(|(q, p, t)| rec(q, p, t)).collect())
    }

    proptest! {
        #[test]
        fn wups_ordering(records in arb_records()) {
            let t = toy();
            let r = build_report(&records, &t, &PrefixTable::default()).unwrap();
            prop_assert!(r.wups_00 >= r.wups_09);
            prop_assert!(r.accuracy <= r.wups_09 + 1e-9);
            for v in [r.accuracy, r.wups_09, r.wups_00] {
                prop_assert!((0.0..=100.0).contains(&v));
            }
            prop_assert_eq!(r.per_type.iter().map(|row| row.count).sum::<usize>(), records.len());
        }

        #[test]
        fn report_is_permutation_invariant(records in arb_records(), seed in any::<u64>()) {
            let t = toy();
            let mut shuffled = records.clone();
            crate::numkit::Rng::new(seed).shuffle(&mut shuffled);
            let table = PrefixTable::default();
            prop_assert_eq!(build_report(&records, &t, &table).unwrap(), build_report(&shuffled, &t, &table).unwrap());
        }

        #[test]
        fn consensus_is_monotone(k in 0usize..10) {
            let humans = |k: usize| -> Vec<String> { (0..10).map(|i| if i < k { "yes".into() } else { "no".into() }).collect() };
            prop_assert!(vqa_consensus("yes", &humans(k)).unwrap() <= vqa_consensus("yes", &humans(k + 1)).unwrap());
        }
    }
}
