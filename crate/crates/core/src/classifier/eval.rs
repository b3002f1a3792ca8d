use serde::{Deserialize, Serialize};

use super::features::Feature130;
use super::network::{argmax, CnnModel};
use super::train::Example;
use super::ClassifierError;

const EVAL_BATCH: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub digit: usize,
    pub probabilities: Vec<f64>,
}

/// Most probable digit, lowest digit on ties. Dropout is off.
pub fn predict(model: &CnnModel, feature: &Feature130) -> Result<Prediction, ClassifierError> {
    let p = model.probabilities(&[feature.as_slice()])?.remove(0);
    Ok(Prediction {
        digit: argmax(&p),
        probabilities: p,
    })
}

pub fn predict_batch(model: &CnnModel, features: &[&Feature130]) -> Result<Vec<Prediction>, ClassifierError> {
    let mut out = Vec::with_capacity(features.len());
    for chunk in features.chunks(EVAL_BATCH) {
        let inputs: Vec<&[f32]> = chunk.iter().map(|f| f.as_slice()).collect();
        for p in model.probabilities(&inputs)? {
            out.push(Prediction {
                digit: argmax(&p),
                probabilities: p,
            });
        }
    }
    Ok(out)
}

/// Counts indexed `[true][predicted]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self {
            counts: vec![vec![0; classes]; classes],
        }
    }

    pub fn from_pairs(classes: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut m = Self::new(classes);
        for (t, p) in pairs {
            m.counts[t][p] += 1;
        }
        m
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..self.counts.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        let t = self.total();
        if t == 0 {
            0.0
        } else {
            self.correct() as f64 / t as f64
        }
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    /// Header `true\predicted,0,1,...` then one row per true class.
    pub fn to_csv(&self) -> String {
        let n = self.counts.len();
        let mut s = String::from("true\\predicted");
        for j in 0..n {
            s.push_str(&format!(",{j}"));
        }
        s.push('\n');
        for (i, row) in self.counts.iter().enumerate() {
            s.push_str(&i.to_string());
            for v in row {
                s.push_str(&format!(",{v}"));
            }
            s.push('\n');
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
}

pub fn evaluate(model: &CnnModel, data: &[Example]) -> Result<Evaluation, ClassifierError> {
    let refs: Vec<&Example> = data.iter().collect();
    evaluate_refs(model, &refs)
}

pub(crate) fn evaluate_refs(model: &CnnModel, data: &[&Example]) -> Result<Evaluation, ClassifierError> {
    if data.is_empty() {
        return Err(ClassifierError::EmptyDataset);
    }
    let classes = model.arch.classes;
    if let Some(e) = data.iter().find(|e| e.label >= classes) {
        return Err(ClassifierError::InvalidLabel(e.label));
    }
    let feats: Vec<&Feature130> = data.iter().map(|e| &e.feature).collect();
    let preds = predict_batch(model, &feats)?;
    let confusion = ConfusionMatrix::from_pairs(classes, data.iter().zip(&preds).map(|(e, p)| (e.label, p.digit)));
    Ok(Evaluation {
        accuracy: confusion.accuracy(),
        confusion,
    })
}

pub(crate) fn accuracy_of(model: &CnnModel, data: &[&Example]) -> Result<f64, ClassifierError> {
    Ok(evaluate_refs(model, data)?.accuracy)
}
