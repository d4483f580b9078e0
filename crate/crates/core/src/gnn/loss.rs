use super::GnnError;

/// Dense row-major `f64` matrix; used for pairwise scores and their gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, GnnError> {
        if data.len() != rows * cols {
            return Err(GnnError::ShapeMismatch(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }
}

/// Binary label matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMatrix {
    pub rows: usize,
    pub cols: usize,
    data: Vec<u8>,
}

impl LabelMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<u8>) -> Result<Self, GnnError> {
        if data.len() != rows * cols {
            return Err(GnnError::ShapeMismatch(format!(
                "{} labels for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(&bad) = data.iter().find(|&&v| v > 1) {
            return Err(GnnError::InvalidLabel(bad));
        }
        Ok(Self { rows, cols, data })
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> u8 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, positive: bool) {
        self.data[r * self.cols + c] = u8::from(positive);
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.data
    }
}

/// Identity-pattern labels for `n` aligned positive pairs: pair `k` is the
/// positive of row `k`, every other job in the batch is a negative.
pub fn make_in_batch_labels(n: usize) -> LabelMatrix {
    let mut l = LabelMatrix::zeros(n, n);
    for k in 0..n {
        l.set(k, k, true);
    }
    l
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `-[y ln s(x) + (1-y) ln(1 - s(x))]` without forming the sigmoid.
#[inline]
pub fn bce_with_logit(score: f64, label: u8) -> f64 {
    let y = label as f64;
    score.max(0.0) - y * score + (-score.abs()).exp().ln_1p()
}

/// Summed binary cross-entropy over every (member, job) entry and its
/// gradient `sigmoid(s) - y` with respect to the scores.
pub fn loss_cross_entropy(scores: &Matrix, labels: &LabelMatrix) -> Result<(f64, Matrix), GnnError> {
    loss_cross_entropy_masked(scores, labels, None)
}

/// As [`loss_cross_entropy`], restricted to entries where `mask` is set.
/// Unobserved entries contribute neither loss nor gradient.
pub fn loss_cross_entropy_masked(
    scores: &Matrix,
    labels: &LabelMatrix,
    mask: Option<&[bool]>,
) -> Result<(f64, Matrix), GnnError> {
    if scores.rows != labels.rows || scores.cols != labels.cols {
        return Err(GnnError::ShapeMismatch(format!(
            "scores {}x{} vs labels {}x{}",
            scores.rows, scores.cols, labels.rows, labels.cols
        )));
    }
    if let Some(m) = mask {
        if m.len() != scores.data.len() {
            return Err(GnnError::ShapeMismatch("mask does not cover the score matrix".into()));
        }
    }
    let mut loss = 0.0;
    let mut grad = Matrix::zeros(scores.rows, scores.cols);
    for (i, (&s, &y)) in scores.data.iter().zip(labels.as_slice()).enumerate() {
        if mask.is_some_and(|m| !m[i]) {
            continue;
        }
        loss += bce_with_logit(s, y);
        grad.data[i] = sigmoid(s) - y as f64;
    }
    Ok((loss, grad))
}
