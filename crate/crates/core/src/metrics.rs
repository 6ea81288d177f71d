//! Clustering quality: B-cubed precision/recall/F1, adjusted mutual
//! information, adjusted Rand index, and the per-window evaluation protocol.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::engine::SlideReport;
use crate::model::{PaneIndex, StoryId};

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("partition is empty")]
    Empty,

    #[error("{metric} needs at least 2 items, got {n}")]
    TooFew { metric: &'static str, n: usize },

    #[error("item {0:?} appears more than once")]
    DuplicateItem(String),

    #[error("no gold label for {} article(s): {}", .0.len(), .0.join(", "))]
    MissingLabels(Vec<String>),
}

/// Items with a predicted and a gold cluster label each.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LabeledPartition {
    pub items: Vec<(String, String, String)>,
}

impl LabeledPartition {
    pub fn new(items: Vec<(String, String, String)>) -> Result<Self, MetricsError> {
        let mut seen = BTreeSet::new();
        for (id, _, _) in &items {
            if !seen.insert(id.as_str()) {
                return Err(MetricsError::DuplicateItem(id.clone()));
            }
        }
        Ok(Self { items })
    }

    /// Builds a partition from two parallel label slices, naming items by index.
    pub fn from_labels<P: ToString, G: ToString>(pred: &[P], gold: &[G]) -> Self {
        assert_eq!(pred.len(), gold.len(), "label slices differ in length");
        Self {
            items: pred
                .iter()
                .zip(gold)
                .enumerate()
                .map(|(i, (p, g))| (i.to_string(), p.to_string(), g.to_string()))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    fn contingency(&self) -> Contingency {
        Contingency::new(self.items.iter().map(|(_, p, g)| (p.as_str(), g.as_str())))
    }
}

/// Contingency table between predicted (rows) and gold (columns) clusters.
struct Contingency {
    n: usize,
    /// Nonzero cells as (row, column, count).
    cells: Vec<(usize, usize, usize)>,
    rows: Vec<usize>,
    cols: Vec<usize>,
}

impl Contingency {
    fn new<'a>(pairs: impl Iterator<Item = (&'a str, &'a str)>) -> Self {
        let mut row_ids: HashMap<&str, usize> = HashMap::new();
        let mut col_ids: HashMap<&str, usize> = HashMap::new();
        let mut joint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut n = 0;
        for (p, g) in pairs {
            let next = row_ids.len();
            let r = *row_ids.entry(p).or_insert(next);
            let next = col_ids.len();
            let c = *col_ids.entry(g).or_insert(next);
            *joint.entry((r, c)).or_insert(0) += 1;
            n += 1;
        }
        let mut rows = vec![0; row_ids.len()];
        let mut cols = vec![0; col_ids.len()];
        let mut keyed: Vec<_> = joint.into_iter().collect();
        keyed.sort_unstable();
        let mut cells = Vec::with_capacity(keyed.len());
        for ((r, c), k) in keyed {
            rows[r] += k;
            cols[c] += k;
            cells.push((r, c, k));
        }
        Self { n, cells, rows, cols }
    }

    /// Nonzero cells as (count, row sum, column sum).
    fn cells_with_margins(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        self.cells.iter().map(|&(r, c, k)| (k, self.rows[r], self.cols[c]))
    }

    /// The partitions agree up to renaming iff every row and column holds
    /// exactly one nonzero cell.
    fn identical(&self) -> bool {
        self.cells.len() == self.rows.len() && self.cells.len() == self.cols.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BCubed {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Per-item B-cubed precision and recall averaged over items, F1 their
/// harmonic mean.
pub fn b_cubed(p: &LabeledPartition) -> Result<BCubed, MetricsError> {
    if p.is_empty() {
        return Err(MetricsError::Empty);
    }
    let t = p.contingency();
    let n = t.n as f64;
    let (mut precision, mut recall) = (0.0, 0.0);
    for (k, row, col) in t.cells_with_margins() {
        let k = k as f64;
        precision += k * k / row as f64;
        recall += k * k / col as f64;
    }
    let (precision, recall) = (precision / n, recall / n);
    Ok(BCubed {
        precision,
        recall,
        f1: harmonic(precision, recall),
    })
}

fn choose2(k: usize) -> f64 {
    let k = k as f64;
    k * (k - 1.0) / 2.0
}

/// Adjusted Rand index. Two partitions that agree up to renaming score 1.
pub fn ari(p: &LabeledPartition) -> Result<f64, MetricsError> {
    if p.len() < 2 {
        return Err(MetricsError::TooFew { metric: "ARI", n: p.len() });
    }
    let t = p.contingency();
    if t.identical() {
        return Ok(1.0);
    }
    let index: f64 = t.cells.iter().map(|&(_, _, k)| choose2(k)).sum();
    let sum_rows: f64 = t.rows.iter().map(|&k| choose2(k)).sum();
    let sum_cols: f64 = t.cols.iter().map(|&k| choose2(k)).sum();
    let expected = sum_rows * sum_cols / choose2(t.n);
    let max = (sum_rows + sum_cols) / 2.0;
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmiNormalization {
    /// Mean of the two entropies.
    #[default]
    Arithmetic,
    /// Larger of the two entropies.
    Max,
}

fn entropy(sizes: &[usize], n: usize) -> f64 {
    let n = n as f64;
    sizes
        .iter()
        .filter(|&&k| k > 0)
        .map(|&k| {
            let q = k as f64 / n;
            -q * q.ln()
        })
        .sum()
}

fn mutual_information(t: &Contingency) -> f64 {
    let n = t.n as f64;
    t.cells_with_margins()
        .map(|(k, a, b)| {
            let k = k as f64;
            k / n * (n * k / (a as f64 * b as f64)).ln()
        })
        .sum()
}

/// Expected mutual information between two random partitions with the given
/// cluster sizes under the permutation (hypergeometric) model.
pub fn expected_mutual_information(rows: &[usize], cols: &[usize], n: usize) -> f64 {
    // ln k! for k = 0..=n
    let mut ln_fact = vec![0.0f64; n + 1];
    for k in 1..=n {
        ln_fact[k] = ln_fact[k - 1] + (k as f64).ln();
    }
    let nf = n as f64;
    let mut emi = 0.0;
    for &a in rows {
        for &b in cols {
            let lo = (a + b).saturating_sub(n).max(1);
            let hi = a.min(b);
            let fixed = ln_fact[a] + ln_fact[b] + ln_fact[n - a] + ln_fact[n - b] - ln_fact[n];
            for k in lo..=hi {
                let kf = k as f64;
                let ln_p = fixed - ln_fact[k] - ln_fact[a - k] - ln_fact[b - k] - ln_fact[n + k - a - b];
                emi += kf / nf * (nf * kf / (a as f64 * b as f64)).ln() * ln_p.exp();
            }
        }
    }
    emi
}

/// Adjusted mutual information: (MI − E[MI]) / (norm(H_pred, H_gold) − E[MI]).
/// Partitions that agree up to renaming score 1.
pub fn ami_with(p: &LabeledPartition, norm: AmiNormalization) -> Result<f64, MetricsError> {
    if p.len() < 2 {
        return Err(MetricsError::TooFew { metric: "AMI", n: p.len() });
    }
    let t = p.contingency();
    if t.identical() {
        return Ok(1.0);
    }
    let mi = mutual_information(&t);
    let emi = expected_mutual_information(&t.rows, &t.cols, t.n);
    let (h_pred, h_gold) = (entropy(&t.rows, t.n), entropy(&t.cols, t.n));
    let normalizer = match norm {
        AmiNormalization::Arithmetic => (h_pred + h_gold) / 2.0,
        AmiNormalization::Max => h_pred.max(h_gold),
    };
    let mut denominator = normalizer - emi;
    let eps = f64::EPSILON;
    denominator = if denominator < 0.0 { denominator.min(-eps) } else { denominator.max(eps) };
    Ok((mi - emi) / denominator)
}

pub fn ami(p: &LabeledPartition) -> Result<f64, MetricsError> {
    ami_with(p, AmiNormalization::Arithmetic)
}

/// How articles still unassigned at the end of a window are scored.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnassignedPolicy {
    /// Each unassigned article is its own predicted cluster.
    #[default]
    Singletons,
    /// Unassigned articles are left out of the window's partition.
    ExcludeUnassigned,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowRow {
    pub window_pane: PaneIndex,
    pub n_articles: usize,
    pub n_pred_clusters: usize,
    pub n_gold_clusters: usize,
    pub b3_p: f64,
    pub b3_r: f64,
    pub b3_f1: f64,
    pub ami: f64,
    pub ari: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricMeans {
    pub b3_p: f64,
    pub b3_r: f64,
    pub b3_f1: f64,
    pub ami: f64,
    pub ari: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WindowedEval {
    pub rows: Vec<WindowRow>,
    /// Unweighted mean over evaluated windows; zeros when none qualified.
    pub mean: MetricMeans,
    /// Windows skipped for holding fewer than two articles.
    pub skipped: Vec<PaneIndex>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub window_slides: u32,
    pub policy: UnassignedPolicy,
    pub normalization: AmiNormalization,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            window_slides: 7,
            policy: UnassignedPolicy::default(),
            normalization: AmiNormalization::default(),
        }
    }
}

pub fn evaluate_window(p: &LabeledPartition, window_pane: PaneIndex, norm: AmiNormalization) -> Result<WindowRow, MetricsError> {
    let b3 = b_cubed(p)?;
    let t = p.contingency();
    Ok(WindowRow {
        window_pane,
        n_articles: p.len(),
        n_pred_clusters: t.rows.len(),
        n_gold_clusters: t.cols.len(),
        b3_p: b3.precision,
        b3_r: b3.recall,
        b3_f1: b3.f1,
        ami: ami_with(p, norm)?,
        ari: ari(p)?,
    })
}

/// Replays slide reports and scores every window (one per report) against
/// gold labels. An article's predicted cluster is the story it belongs to at
/// the end of the window's last slide.
pub fn windowed_eval(
    reports: &[SlideReport],
    gold: &HashMap<String, String>,
    options: &EvalOptions,
) -> Result<WindowedEval, MetricsError> {
    let mut missing: Vec<String> = reports
        .iter()
        .flat_map(|r| r.arrivals.iter())
        .filter(|id| !gold.contains_key(id.as_str()))
        .cloned()
        .collect();
    if !missing.is_empty() {
        missing.sort();
        missing.dedup();
        return Err(MetricsError::MissingLabels(missing));
    }

    let span = i64::from(options.window_slides.max(1));
    let mut arrivals: BTreeMap<PaneIndex, Vec<&str>> = BTreeMap::new();
    let mut story_of: HashMap<&str, StoryId> = HashMap::new();
    let mut out = WindowedEval::default();

    for report in reports {
        arrivals.insert(report.pane, report.arrivals.iter().map(String::as_str).collect());
        for d in &report.assignments {
            if let Some(story) = d.chosen_story {
                story_of.insert(d.article_id.as_str(), story);
            }
        }
        for s in &report.new_stories {
            for m in &s.members {
                story_of.insert(m.as_str(), s.story_id);
            }
        }

        let oldest = report.pane - span + 1;
        let mut items = Vec::new();
        for ids in arrivals.range(oldest..=report.pane).map(|(_, ids)| ids) {
            for &id in ids {
                let pred = match story_of.get(id) {
                    Some(story) => format!("story:{story}"),
                    None if options.policy == UnassignedPolicy::Singletons => format!("article:{id}"),
                    None => continue,
                };
                items.push((id.to_string(), pred, gold[id].clone()));
            }
        }
        if items.len() < 2 {
            log::info!("window ending at pane {} has {} article(s); skipped", report.pane, items.len());
            out.skipped.push(report.pane);
            continue;
        }
        let partition = LabeledPartition { items };
        out.rows.push(evaluate_window(&partition, report.pane, options.normalization)?);
    }

    if !out.rows.is_empty() {
        let k = out.rows.len() as f64;
        let mean = |f: fn(&WindowRow) -> f64| out.rows.iter().map(f).sum::<f64>() / k;
        out.mean = MetricMeans {
            b3_p: mean(|r| r.b3_p),
            b3_r: mean(|r| r.b3_r),
            b3_f1: mean(|r| r.b3_f1),
            ami: mean(|r| r.ami),
            ari: mean(|r| r.ari),
        };
    }
    Ok(out)
}

pub const CSV_HEADER: &str = "window_pane,n_articles,n_pred_clusters,n_gold_clusters,b3_p,b3_r,b3_f1,ami,ari";

/// Writes one row per window followed by a `mean` row.
pub fn write_csv<W: Write>(mut w: W, eval: &WindowedEval) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in &eval.rows {
        writeln!(
            w,
            "{},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6}",
            r.window_pane, r.n_articles, r.n_pred_clusters, r.n_gold_clusters, r.b3_p, r.b3_r, r.b3_f1, r.ami, r.ari
        )?;
    }
    let m = &eval.mean;
    let n_articles = if eval.rows.is_empty() {
        0.0
    } else {
        eval.rows.iter().map(|r| r.n_articles as f64).sum::<f64>() / eval.rows.len() as f64
    };
    writeln!(
        w,
        "mean,{n_articles:.1},,,{:.6},{:.6},{:.6},{:.6},{:.6}",
        m.b3_p, m.b3_r, m.b3_f1, m.ami, m.ari
    )?;
    w.flush()
}
