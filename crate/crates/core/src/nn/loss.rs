use super::matrix::{Matrix, ShapeError};

/// Mean negative log-likelihood of `gold` under probability rows.
pub fn cross_entropy(predicted: &Matrix, gold: &[usize]) -> Result<f64, ShapeError> {
    if predicted.rows() != gold.len() || gold.is_empty() {
        return Err(ShapeError::invalid("cross_entropy", format!("{} rows, {} targets", predicted.rows(), gold.len())));
    }
    let mut total = 0.0;
    for (r, &g) in gold.iter().enumerate() {
        if g >= predicted.cols() {
            return Err(ShapeError::invalid("cross_entropy", format!("class {g} out of {}", predicted.cols())));
        }
        total -= predicted.get(r, g).ln();
    }
    Ok(total / gold.len() as f64)
}
