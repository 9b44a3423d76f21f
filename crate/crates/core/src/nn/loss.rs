use super::{NnError, Result};
use crate::DenseMatrix;

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(logits: &DenseMatrix) -> DenseMatrix {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
    out
}

/// Mean cross-entropy over rows and its gradient `(softmax − onehot) / n`.
pub fn softmax_cross_entropy(logits: &DenseMatrix, targets: &[usize]) -> Result<(f64, DenseMatrix)> {
    if targets.len() != logits.rows() {
        return Err(NnError::RowMismatch("target count"));
    }
    let classes = logits.cols();
    if let Some((row, &target)) = targets.iter().enumerate().find(|(_, &t)| t >= classes) {
        return Err(NnError::TargetOutOfRange { row, target, classes });
    }
    let n = logits.rows() as f64;
    let mut grad = DenseMatrix::zeros(logits.rows(), classes);
    let mut total = 0.0;
    for (r, &t) in targets.iter().enumerate() {
        let row = logits.row(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|&v| (v - max).exp()).sum();
        let log_sum = sum.ln();
        total += log_sum - (row[t] - max);
        let g = grad.row_mut(r);
        for (c, (gv, &v)) in g.iter_mut().zip(row).enumerate() {
            let p = (v - max).exp() / sum;
            *gv = (p - if c == t { 1.0 } else { 0.0 }) / n;
        }
    }
    Ok((total / n, grad))
}
