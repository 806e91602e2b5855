use crate::error::{Error, Result};
use crate::linalg::Mat;

/// Root mean squared error over every entry.
pub fn metric_rmse(pred: &Mat, truth: &Mat) -> Result<f64> {
    if pred.shape() != truth.shape() {
        return Err(Error::shape(
            "rmse inputs",
            format!("{}x{}", truth.nrows(), truth.ncols()),
            format!("{}x{}", pred.nrows(), pred.ncols()),
        ));
    }
    if pred.is_empty() {
        return Err(Error::EmptyInput("rmse of an empty prediction".into()));
    }
    Ok(((pred - truth).norm_squared() / pred.len() as f64).sqrt())
}

pub fn metric_accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::shape("accuracy labels", truth.len(), pred.len()));
    }
    if pred.is_empty() {
        return Err(Error::EmptyInput("accuracy of an empty prediction".into()));
    }
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / pred.len() as f64)
}

/// Recall of each class `0..n_classes`; `NaN` for a class absent from `truth`.
pub fn metric_per_class_accuracy(pred: &[usize], truth: &[usize], n_classes: usize) -> Result<Vec<f64>> {
    if pred.len() != truth.len() {
        return Err(Error::shape("per-class accuracy labels", truth.len(), pred.len()));
    }
    let mut hits = vec![0usize; n_classes];
    let mut support = vec![0usize; n_classes];
    for (&p, &t) in pred.iter().zip(truth) {
        if t >= n_classes {
            return Err(Error::Domain(format!("label {t} outside 0..{n_classes}")));
        }
        support[t] += 1;
        if p == t {
            hits[t] += 1;
        }
    }
    Ok(hits
        .iter()
        .zip(&support)
        .map(|(&h, &s)| if s == 0 { f64::NAN } else { h as f64 / s as f64 })
        .collect())
}

/// Min, lower quartile, median, upper quartile and max by linear
/// interpolation between order statistics.
pub fn five_numbers(values: &[f64]) -> Option<[f64; 5]> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let q = |p: f64| {
        let pos = p * (v.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
    };
    Some([v[0], q(0.25), q(0.5), q(0.75), v[v.len() - 1]])
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Some((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Some((mean, var.sqrt()))
}
