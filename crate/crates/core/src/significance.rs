//! One-sided tests for subtrees associated with lower success, per model and
//! across models.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::model::{FeatureMatrix, OutcomeMatrix};
use crate::subtree::SubtreeCatalog;

pub const TEST_DESCRIPTION: &str = "pooled one-sided two-proportion z-test (H1: success rate with the subtree is lower); \
exact hypergeometric lower tail when any expected cell count is below 5";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SignificanceError {
    #[error("degenerate table: n_with = {n_with}, n_without = {n_without}")]
    DegenerateTable { n_with: u64, n_without: u64 },
    #[error("invalid table: successes exceed trials")]
    InvalidTable,
    #[error("no models given")]
    NoModels,
    #[error("unknown model id {0}")]
    UnknownModel(String),
    #[error("model {0} has no labelled question with features")]
    NoLabels(String),
    #[error("features were encoded against catalog {found}, expected {expected}")]
    CatalogMismatch { expected: String, found: String },
    #[error("alpha must lie in (0, 1)")]
    InvalidAlpha,
}

/// Success counts split by presence of one pattern, for one model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubtreeContingency {
    pub n_with: u64,
    pub succ_with: u64,
    pub n_without: u64,
    pub succ_without: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestMethod {
    Z,
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub p_value: f64,
    pub method: TestMethod,
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// P(X ≤ x) for X ~ Hypergeometric(population, successes, draws).
///
/// Probabilities are built by the ratio recurrence outward from the mode and
/// normalized, so no factorials or gamma functions are evaluated.
pub fn hypergeometric_cdf(population: u64, successes: u64, draws: u64, x: u64) -> f64 {
    assert!(successes <= population && draws <= population);
    let lo = (draws + successes).saturating_sub(population);
    let hi = draws.min(successes);
    if x < lo {
        return 0.0;
    }
    if x >= hi {
        return 1.0;
    }
    let (n, k, d) = (population as f64, successes as f64, draws as f64);
    // pmf(i + 1) / pmf(i)
    let ratio = |i: f64| (k - i) * (d - i) / ((i + 1.0) * (n - k - d + i + 1.0));
    let mode = (((d + 1.0) * (k + 1.0)) / (n + 2.0)).floor().clamp(lo as f64, hi as f64) as u64;
    let mut weights = vec![0.0; (hi - lo + 1) as usize];
    let at = |i: u64| (i - lo) as usize;
    weights[at(mode)] = 1.0;
    let mut w = 1.0;
    for i in mode..hi {
        w *= ratio(i as f64);
        weights[at(i + 1)] = w;
    }
    w = 1.0;
    for i in (lo..mode).rev() {
        w /= ratio(i as f64);
        weights[at(i)] = w;
    }
    // sum smallest terms first on each side of the mode
    let total: f64 = weights.iter().sum();
    let tail: f64 = weights[..=at(x)].iter().sum();
    (tail / total).min(1.0)
}

impl SubtreeContingency {
    fn check(&self) -> Result<(), SignificanceError> {
        if self.succ_with > self.n_with || self.succ_without > self.n_without {
            return Err(SignificanceError::InvalidTable);
        }
        if self.n_with == 0 || self.n_without == 0 {
            return Err(SignificanceError::DegenerateTable {
                n_with: self.n_with,
                n_without: self.n_without,
            });
        }
        Ok(())
    }

    /// Smallest of the four expected cell counts under the pooled null.
    pub fn min_expected(&self) -> f64 {
        let n = (self.n_with + self.n_without) as f64;
        let s = (self.succ_with + self.succ_without) as f64;
        let f = n - s;
        let (a, b) = (self.n_with as f64, self.n_without as f64);
        [a * s / n, a * f / n, b * s / n, b * f / n]
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    }

    /// Exact one-sided p-value: probability of at most `succ_with`
    /// successes among the with-pattern questions, margins fixed.
    pub fn exact_p(&self) -> f64 {
        hypergeometric_cdf(
            self.n_with + self.n_without,
            self.succ_with + self.succ_without,
            self.n_with,
            self.succ_with,
        )
    }

    /// Pooled z statistic; 0 when the pooled rate is 0 or 1.
    pub fn z(&self) -> f64 {
        let (a, b) = (self.n_with as f64, self.n_without as f64);
        let pooled = (self.succ_with + self.succ_without) as f64 / (a + b);
        let se = (pooled * (1.0 - pooled) * (1.0 / a + 1.0 / b)).sqrt();
        if se == 0.0 {
            return 0.0;
        }
        (self.succ_with as f64 / a - self.succ_without as f64 / b) / se
    }
}

/// One-sided p-value for "success is rarer with the pattern".
pub fn proportion_test(t: &SubtreeContingency) -> Result<TestResult, SignificanceError> {
    t.check()?;
    if t.min_expected() < 5.0 {
        Ok(TestResult {
            p_value: t.exact_p(),
            method: TestMethod::Exact,
        })
    } else {
        Ok(TestResult {
            p_value: normal_cdf(t.z()),
            method: TestMethod::Z,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignificanceOptions {
    pub alpha: f64,
    /// Divide alpha by the number of tested patterns per model.
    pub bonferroni: bool,
}

impl Default for SignificanceOptions {
    fn default() -> Self {
        SignificanceOptions {
            alpha: 0.01,
            bonferroni: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternTest {
    pub pattern: usize,
    #[serde(flatten)]
    pub table: SubtreeContingency,
    pub p_value: f64,
    pub method: TestMethod,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSignificance {
    pub model_id: String,
    pub n_labelled: usize,
    pub threshold: f64,
    pub tests: Vec<PatternTest>,
    /// Patterns present in every or in no labelled question.
    pub skipped: Vec<usize>,
    /// Ascending pattern indices with p-value below the threshold.
    pub significant: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VennRegion {
    /// Models whose significant set contains exactly these patterns' membership.
    pub models: Vec<String>,
    pub patterns: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternSummary {
    pub index: usize,
    pub canonical: String,
    pub pretty: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceReport {
    pub test: String,
    pub options: SignificanceOptions,
    pub catalog_fingerprint: String,
    pub models: Vec<ModelSignificance>,
    /// Patterns significant for every model.
    pub intersection: Vec<usize>,
    pub venn_regions: Vec<VennRegion>,
    /// Every pattern significant for at least one model.
    pub patterns: Vec<PatternSummary>,
}

impl SignificanceReport {
    pub fn significant_for(&self, model_id: &str) -> Option<&[usize]> {
        self.models
            .iter()
            .find(|m| m.model_id == model_id)
            .map(|m| m.significant.as_slice())
    }
}

/// Contingency tables of every catalog pattern for one model's outcomes.
pub fn contingencies(
    features: &FeatureMatrix,
    outcomes: &OutcomeMatrix,
    model_id: &str,
) -> Result<(usize, Vec<SubtreeContingency>), SignificanceError> {
    let column = outcomes
        .column(model_id)
        .map_err(|_| SignificanceError::UnknownModel(model_id.to_string()))?;
    let rows: HashMap<&str, usize> = features
        .question_ids
        .iter()
        .enumerate()
        .map(|(i, q)| (q.as_str(), i))
        .collect();
    let d = features.n_features;
    let mut n_with = vec![0u64; d];
    let mut succ_with = vec![0u64; d];
    let (mut n, mut succ) = (0u64, 0u64);
    for (q, ok) in &column {
        let Some(&i) = rows.get(q.as_str()) else {
            continue;
        };
        n += 1;
        succ += *ok as u64;
        for &k in &features.rows[i] {
            n_with[k as usize] += 1;
            succ_with[k as usize] += *ok as u64;
        }
    }
    if n == 0 {
        return Err(SignificanceError::NoLabels(model_id.to_string()));
    }
    let tables = (0..d)
        .map(|k| SubtreeContingency {
            n_with: n_with[k],
            succ_with: succ_with[k],
            n_without: n - n_with[k],
            succ_without: succ - succ_with[k],
        })
        .collect();
    Ok((n as usize, tables))
}

/// Per-model significant sets and their intersection.
pub fn significant_sets(
    catalog: &SubtreeCatalog,
    features: &FeatureMatrix,
    outcomes: &OutcomeMatrix,
    models: &[String],
    opts: SignificanceOptions,
) -> Result<SignificanceReport, SignificanceError> {
    if models.is_empty() {
        return Err(SignificanceError::NoModels);
    }
    if !(opts.alpha > 0.0 && opts.alpha < 1.0) {
        return Err(SignificanceError::InvalidAlpha);
    }
    let fingerprint = catalog.fingerprint();
    if features.catalog_fingerprint != fingerprint {
        return Err(SignificanceError::CatalogMismatch {
            expected: fingerprint,
            found: features.catalog_fingerprint.clone(),
        });
    }

    let mut per_model = Vec::with_capacity(models.len());
    for model_id in models {
        let (n_labelled, tables) = contingencies(features, outcomes, model_id)?;
        let mut tests = Vec::new();
        let mut skipped = Vec::new();
        for (k, table) in tables.into_iter().enumerate() {
            match proportion_test(&table) {
                Ok(r) => tests.push(PatternTest {
                    pattern: k,
                    table,
                    p_value: r.p_value,
                    method: r.method,
                }),
                Err(SignificanceError::DegenerateTable { .. }) => skipped.push(k),
                Err(e) => return Err(e),
            }
        }
        let threshold = if opts.bonferroni && !tests.is_empty() {
            opts.alpha / tests.len() as f64
        } else {
            opts.alpha
        };
        let significant = tests
            .iter()
            .filter(|t| t.p_value < threshold)
            .map(|t| t.pattern)
            .collect();
        per_model.push(ModelSignificance {
            model_id: model_id.clone(),
            n_labelled,
            threshold,
            tests,
            skipped,
            significant,
        });
    }

    let mut membership: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for m in &per_model {
        for &k in &m.significant {
            membership.entry(k).or_default().push(m.model_id.clone());
        }
    }
    let intersection = membership
        .iter()
        .filter(|(_, ms)| ms.len() == per_model.len())
        .map(|(&k, _)| k)
        .collect();
    let mut regions: BTreeMap<Vec<String>, Vec<usize>> = BTreeMap::new();
    for (&k, ms) in &membership {
        regions.entry(ms.clone()).or_default().push(k);
    }
    let venn_regions = regions
        .into_iter()
        .map(|(models, patterns)| VennRegion { models, patterns })
        .collect();
    let patterns = membership
        .keys()
        .map(|&k| {
            let p = catalog.pattern(k);
            PatternSummary {
                index: k,
                canonical: p.canonical().to_string(),
                pretty: p.pretty(),
            }
        })
        .collect();

    Ok(SignificanceReport {
        test: TEST_DESCRIPTION.to_string(),
        options: opts,
        catalog_fingerprint: fingerprint,
        models: per_model,
        intersection,
        venn_regions,
        patterns,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table(sw: u64, nw: u64, so: u64, no: u64) -> SubtreeContingency {
        SubtreeContingency {
            n_with: nw,
            succ_with: sw,
            n_without: no,
            succ_without: so,
        }
    }

    #[test]
    fn equal_proportions_give_one_half() {
        let r = proportion_test(&table(10, 50, 10, 50)).unwrap();
        assert_eq!(r.method, TestMethod::Z);
        assert_eq!(r.p_value, 0.5);
    }

    #[test]
    fn strong_effect_is_significant() {
        let r = proportion_test(&table(10, 50, 40, 50)).unwrap();
        assert_eq!(r.method, TestMethod::Z);
        assert!(r.p_value < 1e-8);
    }

    #[test]
    fn wrong_direction_exceeds_one_half() {
        let r = proportion_test(&table(40, 50, 10, 50)).unwrap();
        assert!(r.p_value > 0.5);
    }

    #[test]
    fn small_counts_use_exact_tail() {
        let r = proportion_test(&table(0, 3, 20, 30)).unwrap();
        assert_eq!(r.method, TestMethod::Exact);
        // all 3 draws must come from the 13 failures of 33
        let expected = (13.0 * 12.0 * 11.0) / (33.0 * 32.0 * 31.0);
        assert!((r.p_value - expected).abs() < 1e-15);
    }

    #[test]
    fn degenerate_tables() {
        assert!(matches!(
            proportion_test(&table(0, 0, 3, 10)),
            Err(SignificanceError::DegenerateTable { .. })
        ));
        assert!(matches!(
            proportion_test(&table(3, 2, 3, 10)),
            Err(SignificanceError::InvalidTable)
        ));
    }

    #[test]
    fn hypergeometric_edges() {
        assert_eq!(hypergeometric_cdf(10, 10, 4, 4), 1.0);
        assert_eq!(hypergeometric_cdf(10, 0, 4, 0), 1.0);
        assert_eq!(hypergeometric_cdf(10, 8, 4, 1), 0.0);
        let p = hypergeometric_cdf(4, 2, 2, 0);
        assert!((p - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn each_branch_is_monotone_in_successes_with() {
        for total in 2..=40u64 {
            for nw in 1..total {
                let no = total - nw;
                for so in 0..=no {
                    let t = |sw| table(sw, nw, so, no);
                    for sw in 1..=nw {
                        let (hi, lo) = (t(sw), t(sw - 1));
                        assert!(lo.exact_p() <= hi.exact_p() + 1e-15);
                        assert!(normal_cdf(lo.z()) <= normal_cdf(hi.z()) + 1e-15);
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn monotone_while_method_is_unchanged(
            nw in 1u64..200, no in 1u64..200, fw in 0.0f64..=1.0, fo in 0.0f64..=1.0,
        ) {
            let so = (fo * no as f64).floor() as u64;
            let sw = ((fw * nw as f64).floor() as u64).max(1);
            let hi = proportion_test(&table(sw, nw, so, no)).unwrap();
            let lo = proportion_test(&table(sw - 1, nw, so, no)).unwrap();
            prop_assert!((0.0..=1.0).contains(&hi.p_value));
            if hi.method == lo.method {
                prop_assert!(lo.p_value <= hi.p_value + 1e-15);
            }
        }
    }

    #[test]
    fn normal_cdf_values() {
        assert_eq!(normal_cdf(0.0), 0.5);
        assert!((normal_cdf(-2.326_347_874_040_841) - 0.01).abs() < 1e-12);
    }
}
