use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::lbfgs::{minimize, LbfgsOptions};
use super::{FeatureMatrix, ModelError, SoftLabels};

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + eᶻ) without overflow.
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Training set for the weighted soft-label logistic objective.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub n_features: usize,
    /// Sparse rows, ascending indices.
    pub rows: Vec<Vec<u32>>,
    pub labels: Vec<f64>,
    pub weights: Vec<f64>,
}

impl TrainingSet {
    /// Pairs each labelled question with its feature row.
    pub fn align(features: &FeatureMatrix, labels: &SoftLabels) -> Result<Self, ModelError> {
        let pos: HashMap<&str, usize> = features
            .question_ids
            .iter()
            .enumerate()
            .map(|(i, q)| (q.as_str(), i))
            .collect();
        let mut rows = Vec::with_capacity(labels.len());
        for q in &labels.question_ids {
            let i = *pos
                .get(q.as_str())
                .ok_or_else(|| ModelError::InvalidInput(format!("no feature row for question {q}")))?;
            rows.push(features.rows[i].clone());
        }
        Ok(TrainingSet {
            n_features: features.n_features,
            rows,
            labels: labels.labels.clone(),
            weights: labels.weights.clone(),
        })
    }

    fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Σᵢ ωᵢ·CE(σ(zᵢ), yᵢ)/Ω + ‖w‖²/(2·C·Ω) with zᵢ = w·xᵢ + b and Ω = Σᵢ ωᵢ.
/// `theta` holds the weights followed by the bias. The gradient is written
/// into `grad`. Summation order is fixed by row order.
pub fn objective(set: &TrainingSet, reg_c: f64, theta: &[f64], grad: &mut [f64]) -> f64 {
    let d = set.n_features;
    let (w, b) = (&theta[..d], theta[d]);
    let omega = set.total_weight();
    grad.iter_mut().for_each(|g| *g = 0.0);
    let mut loss = 0.0;
    for ((row, &y), &wt) in set.rows.iter().zip(&set.labels).zip(&set.weights) {
        let z = b + row.iter().map(|&k| w[k as usize]).sum::<f64>();
        // CE(σ(z), y) = softplus(z) − y·z
        loss += wt * (softplus(z) - y * z);
        let r = wt * (sigmoid(z) - y);
        for &k in row {
            grad[k as usize] += r;
        }
        grad[d] += r;
    }
    let lambda = 1.0 / (reg_c * omega);
    let mut penalty = 0.0;
    for k in 0..d {
        penalty += w[k] * w[k];
        grad[k] = grad[k] / omega + lambda * w[k];
    }
    grad[d] /= omega;
    loss / omega + 0.5 * lambda * penalty
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub objective: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub n_questions: usize,
    pub total_weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexityModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    #[serde(rename = "reg_C")]
    pub reg_c: f64,
    pub catalog_fingerprint: String,
    pub fit_report: FitReport,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub reg_c: f64,
    pub solver: LbfgsOptions,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            reg_c: 1.0,
            solver: LbfgsOptions::default(),
        }
    }
}

/// Fits the L2-regularized logistic model on soft labels.
pub fn fit(features: &FeatureMatrix, labels: &SoftLabels, opts: FitOptions) -> Result<ComplexityModel, ModelError> {
    let set = TrainingSet::align(features, labels)?;
    let mut model = fit_set(&set, opts)?;
    model.catalog_fingerprint = features.catalog_fingerprint.clone();
    Ok(model)
}

pub fn fit_set(set: &TrainingSet, opts: FitOptions) -> Result<ComplexityModel, ModelError> {
    if set.rows.is_empty() {
        return Err(ModelError::InvalidInput("no training questions".into()));
    }
    if !(opts.reg_c > 0.0 && opts.reg_c.is_finite()) {
        return Err(ModelError::InvalidInput("reg_C must be positive and finite".into()));
    }
    if set.weights.iter().any(|w| w.is_nan() || *w <= 0.0) || set.labels.iter().any(|y| !(0.0..=1.0).contains(y)) {
        return Err(ModelError::InvalidInput("weights must be positive and labels in [0, 1]".into()));
    }
    let d = set.n_features;
    let result = minimize(
        |theta, grad| objective(set, opts.reg_c, theta, grad),
        vec![0.0; d + 1],
        opts.solver,
    );
    if !result.converged {
        return Err(ModelError::NonConvergence {
            iterations: result.iterations,
            gradient_norm: result.gradient_norm,
        });
    }
    let mut theta = result.x;
    let bias = theta.pop().unwrap();
    Ok(ComplexityModel {
        weights: theta,
        bias,
        reg_c: opts.reg_c,
        catalog_fingerprint: String::new(),
        fit_report: FitReport {
            objective: result.value,
            gradient_norm: result.gradient_norm,
            iterations: result.iterations,
            n_questions: set.rows.len(),
            total_weight: set.total_weight(),
        },
    })
}

impl ComplexityModel {
    /// −σ(w·x + b) for a sparse row. Closer to 0 means harder.
    pub fn score_row(&self, row: &[u32]) -> f64 {
        let z = self.bias + row.iter().map(|&k| self.weights[k as usize]).sum::<f64>();
        -sigmoid(z)
    }

    /// Scores every row of `features`, in row order.
    pub fn score(&self, features: &FeatureMatrix) -> Result<Vec<(String, f64)>, ModelError> {
        if features.catalog_fingerprint != self.catalog_fingerprint {
            return Err(ModelError::CatalogMismatch {
                expected: self.catalog_fingerprint.clone(),
                found: features.catalog_fingerprint.clone(),
            });
        }
        if features.n_features != self.weights.len() {
            return Err(ModelError::InvalidInput(format!(
                "feature width {} does not match {} weights",
                features.n_features,
                self.weights.len()
            )));
        }
        Ok(features
            .question_ids
            .iter()
            .zip(&features.rows)
            .map(|(q, row)| (q.clone(), self.score_row(row)))
            .collect())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        serde_json::from_str(text).map_err(|e| ModelError::Json {
            line: e.line(),
            message: e.to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_set(seed: u64, n: usize, d: usize) -> TrainingSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = (0..n)
            .map(|_| (0..d as u32).filter(|_| rng.random_bool(0.4)).collect())
            .collect();
        let labels = (0..n).map(|_| rng.random_range(0..=4) as f64 / 4.0).collect();
        let weights = (0..n).map(|_| rng.random_range(1..=4) as f64).collect();
        TrainingSet {
            n_features: d,
            rows,
            labels,
            weights,
        }
    }

    #[test]
    fn sigmoid_and_softplus_are_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) == 1.0);
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(softplus(1000.0), 1000.0);
        assert!(softplus(-1000.0) >= 0.0);
    }

    #[test]
    fn zero_model_scores_minus_half() {
        let m = ComplexityModel {
            weights: vec![0.0; 3],
            bias: 0.0,
            reg_c: 1.0,
            catalog_fingerprint: "f".into(),
            fit_report: FitReport {
                objective: 0.0,
                gradient_norm: 0.0,
                iterations: 0,
                n_questions: 0,
                total_weight: 0.0,
            },
        };
        assert_eq!(m.score_row(&[0, 2]), -0.5);
        let easy = ComplexityModel { bias: -1e3, ..m.clone() };
        assert_eq!(easy.score_row(&[]), -0.0);
        let certain = ComplexityModel { bias: 40.0, ..m };
        assert!((certain.score_row(&[]) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn half_labels_give_zero_model() {
        let mut set = random_set(1, 40, 5);
        set.labels.iter_mut().for_each(|y| *y = 0.5);
        let m = fit_set(&set, FitOptions::default()).unwrap();
        assert!(m.weights.iter().all(|w| w.abs() < 1e-6) && m.bias.abs() < 1e-6);
    }

    #[test]
    fn duplicated_rows_equal_doubled_weights() {
        let set = random_set(2, 30, 6);
        let mut doubled = set.clone();
        doubled.rows.extend(set.rows.clone());
        doubled.labels.extend(set.labels.clone());
        doubled.weights.extend(set.weights.clone());
        let mut heavier = set.clone();
        heavier.weights.iter_mut().for_each(|w| *w *= 2.0);
        let a = fit_set(&heavier, FitOptions::default()).unwrap();
        let b = fit_set(&doubled, FitOptions::default()).unwrap();
        for (x, y) in a.weights.iter().zip(&b.weights) {
            assert!((x - y).abs() < 1e-6);
        }
        assert!((a.bias - b.bias).abs() < 1e-6);
    }

    #[test]
    fn scaling_weights_and_c_together_keeps_the_optimum() {
        let set = random_set(6, 30, 6);
        let mut heavier = set.clone();
        heavier.weights.iter_mut().for_each(|w| *w *= 3.0);
        let a = fit_set(&set, FitOptions::default()).unwrap();
        let b = fit_set(
            &heavier,
            FitOptions {
                reg_c: 1.0 / 3.0,
                ..FitOptions::default()
            },
        )
        .unwrap();
        for (x, y) in a.weights.iter().zip(&b.weights) {
            assert!((x - y).abs() < 1e-6);
        }
    }

    #[test]
    fn row_order_does_not_matter() {
        let set = random_set(3, 25, 4);
        let mut rev = set.clone();
        rev.rows.reverse();
        rev.labels.reverse();
        rev.weights.reverse();
        let a = fit_set(&set, FitOptions::default()).unwrap();
        let b = fit_set(&rev, FitOptions::default()).unwrap();
        for (x, y) in a.weights.iter().zip(&b.weights) {
            assert!((x - y).abs() < 1e-6);
        }
    }

    #[test]
    fn converged_fit_meets_gradient_tolerance() {
        let set = random_set(4, 60, 8);
        let m = fit_set(&set, FitOptions::default()).unwrap();
        let r = &m.fit_report;
        assert!(r.gradient_norm <= 1e-8 * r.objective.abs().max(1.0));
    }

    #[test]
    fn rejects_bad_inputs() {
        let set = random_set(5, 5, 2);
        let bad_c = FitOptions {
            reg_c: 0.0,
            ..FitOptions::default()
        };
        assert!(fit_set(&set, bad_c).is_err());
        let mut empty = set.clone();
        empty.rows.clear();
        assert!(fit_set(&empty, FitOptions::default()).is_err());
    }

    #[test]
    fn score_checks_catalog() {
        let fm = FeatureMatrix {
            question_ids: vec!["q".into()],
            catalog_fingerprint: "x".into(),
            n_features: 1,
            rows: vec![vec![0]],
        };
        let labels = SoftLabels {
            question_ids: vec!["q".into()],
            labels: vec![0.75],
            weights: vec![4.0],
            excluded: vec![],
        };
        let m = fit(&fm, &labels, FitOptions::default()).unwrap();
        assert_eq!(m.catalog_fingerprint, "x");
        let other = FeatureMatrix {
            catalog_fingerprint: "y".into(),
            ..fm.clone()
        };
        assert!(matches!(m.score(&other), Err(ModelError::CatalogMismatch { .. })));
        assert_eq!(m.score(&fm).unwrap().len(), 1);
        let text = m.to_json();
        assert!(text.contains("\"reg_C\""));
        assert_eq!(ComplexityModel::from_json(&text).unwrap(), m);
    }
}
