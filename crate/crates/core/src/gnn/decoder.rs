//! Pairwise decoders turning member and job embeddings into link scores.

use super::encoder::Embedding;
use super::loss::Matrix;
use super::mlp::{Mlp, MlpTape};
use super::params::Grads;
use super::GnnError;
use crate::scalar::{self, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Member,
    Job,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Side::Member => "member",
            Side::Job => "job",
        })
    }
}

/// A decoder with its parameters (only the MLP has any).
#[derive(Debug, Clone, PartialEq)]
pub enum Decoder<T> {
    Dot,
    Cosine,
    Mlp(Mlp<T>),
}

impl<T: Scalar> Decoder<T> {
    pub fn cast<U: Scalar>(&self) -> Decoder<U> {
        match self {
            Decoder::Dot => Decoder::Dot,
            Decoder::Cosine => Decoder::Cosine,
            Decoder::Mlp(m) => Decoder::Mlp(m.cast()),
        }
    }

    pub fn tensors(&self) -> Vec<&[T]> {
        match self {
            Decoder::Mlp(m) => m.tensors(),
            _ => Vec::new(),
        }
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        match self {
            Decoder::Mlp(m) => m.tensors_mut(),
            _ => Vec::new(),
        }
    }

    /// Scores every member against every job.
    pub fn decode(&self, members: &[Embedding<T>], jobs: &[Embedding<T>]) -> Result<Matrix, GnnError> {
        match self {
            Decoder::Dot => decode_dot(members, jobs),
            Decoder::Cosine => decode_cosine(members, jobs),
            Decoder::Mlp(m) => decode_mlp(members, jobs, m),
        }
    }
}

fn common_dim<T>(members: &[Embedding<T>], jobs: &[Embedding<T>]) -> Result<usize, GnnError> {
    let dim = members.first().or(jobs.first()).map_or(0, Vec::len);
    for e in members.iter().chain(jobs) {
        if e.len() != dim {
            return Err(GnnError::DimensionMismatch {
                expected: dim,
                got: e.len(),
            });
        }
    }
    Ok(dim)
}

/// `score(i, j) = M_i . J_j`.
pub fn decode_dot<T: Scalar>(members: &[Embedding<T>], jobs: &[Embedding<T>]) -> Result<Matrix, GnnError> {
    common_dim(members, jobs)?;
    let mut s = Matrix::zeros(members.len(), jobs.len());
    for (i, m) in members.iter().enumerate() {
        for (j, e) in jobs.iter().enumerate() {
            s.set(i, j, scalar::dot(m, e));
        }
    }
    Ok(s)
}

/// `score(i, j) = M_i . J_j / (|M_i| |J_j|)`.
pub fn decode_cosine<T: Scalar>(members: &[Embedding<T>], jobs: &[Embedding<T>]) -> Result<Matrix, GnnError> {
    common_dim(members, jobs)?;
    let mn = norms(members, Side::Member)?;
    let jn = norms(jobs, Side::Job)?;
    let mut s = Matrix::zeros(members.len(), jobs.len());
    for (i, m) in members.iter().enumerate() {
        for (j, e) in jobs.iter().enumerate() {
            s.set(i, j, (scalar::dot(m, e) / (mn[i] * jn[j])).clamp(-1.0, 1.0));
        }
    }
    Ok(s)
}

fn norms<T: Scalar>(v: &[Embedding<T>], side: Side) -> Result<Vec<f64>, GnnError> {
    v.iter()
        .enumerate()
        .map(|(index, e)| {
            let n = scalar::norm(e);
            if n == 0.0 {
                Err(GnnError::ZeroNormEmbedding { side, index })
            } else {
                Ok(n)
            }
        })
        .collect()
}

/// `score(i, j) = MLP([M_i || J_j])`, with no output nonlinearity.
pub fn decode_mlp<T: Scalar>(
    members: &[Embedding<T>],
    jobs: &[Embedding<T>],
    mlp: &Mlp<T>,
) -> Result<Matrix, GnnError> {
    let dim = common_dim(members, jobs)?;
    if mlp.input_dim() != 2 * dim {
        return Err(GnnError::ShapeMismatch(format!(
            "MLP decoder takes {} inputs, embeddings concatenate to {}",
            mlp.input_dim(),
            2 * dim
        )));
    }
    let m64 = mlp.cast::<f64>();
    let mut s = Matrix::zeros(members.len(), jobs.len());
    let mut input = vec![0.0; 2 * dim];
    for (i, m) in members.iter().enumerate() {
        for (j, e) in jobs.iter().enumerate() {
            concat(m, e, &mut input);
            s.set(i, j, m64.score(&input)?);
        }
    }
    Ok(s)
}

fn concat<T: Scalar>(a: &[T], b: &[T], out: &mut [f64]) {
    for (o, x) in out.iter_mut().zip(a.iter().chain(b)) {
        *o = x.as_f64();
    }
}

/// Forward state of a decoder evaluated inside a training step.
#[derive(Debug, Clone)]
pub(crate) enum DecoderCache {
    None,
    Cosine { member_norms: Vec<f64>, job_norms: Vec<f64> },
    Mlp(Vec<Option<MlpTape>>),
}

/// `f64` decoder forward used by training; entries outside `mask` are left 0.
pub(crate) fn forward(
    decoder: &Decoder<f64>,
    members: &[Vec<f64>],
    jobs: &[Vec<f64>],
    mask: Option<&[bool]>,
) -> Result<(Matrix, DecoderCache), GnnError> {
    let dim = common_dim(members, jobs)?;
    let (rows, cols) = (members.len(), jobs.len());
    let observed = |i: usize, j: usize| mask.is_none_or(|m| m[i * cols + j]);
    match decoder {
        Decoder::Dot => Ok((decode_dot(members, jobs)?, DecoderCache::None)),
        Decoder::Cosine => {
            let member_norms = norms(members, Side::Member)?;
            let job_norms = norms(jobs, Side::Job)?;
            let mut s = Matrix::zeros(rows, cols);
            for i in 0..rows {
                for j in 0..cols {
                    let v = scalar::dot(&members[i], &jobs[j]) / (member_norms[i] * job_norms[j]);
                    s.set(i, j, v);
                }
            }
            Ok((s, DecoderCache::Cosine { member_norms, job_norms }))
        }
        Decoder::Mlp(mlp) => {
            if mlp.input_dim() != 2 * dim {
                return Err(GnnError::ShapeMismatch("MLP decoder input width".into()));
            }
            let mut s = Matrix::zeros(rows, cols);
            let mut tapes = vec![None; rows * cols];
            let mut input = vec![0.0; 2 * dim];
            for i in 0..rows {
                for j in 0..cols {
                    if !observed(i, j) {
                        continue;
                    }
                    concat(&members[i], &jobs[j], &mut input);
                    let tape = mlp.forward(&input)?;
                    s.set(i, j, tape.output());
                    tapes[i * cols + j] = Some(tape);
                }
            }
            Ok((s, DecoderCache::Mlp(tapes)))
        }
    }
}

/// Back-propagates `d_scores` through the decoder. Returns gradients with
/// respect to each member and job embedding; decoder parameter gradients
/// are accumulated into `grads`.
pub(crate) fn backward(
    decoder: &Decoder<f64>,
    members: &[Vec<f64>],
    jobs: &[Vec<f64>],
    cache: &DecoderCache,
    scores: &Matrix,
    d_scores: &Matrix,
    grads: &mut Grads,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let dim = members.first().or(jobs.first()).map_or(0, Vec::len);
    let mut dm = vec![vec![0.0; dim]; members.len()];
    let mut dj = vec![vec![0.0; dim]; jobs.len()];
    for i in 0..members.len() {
        for j in 0..jobs.len() {
            let g = d_scores.get(i, j);
            if g == 0.0 {
                continue;
            }
            match (decoder, cache) {
                (Decoder::Dot, _) => {
                    for k in 0..dim {
                        dm[i][k] += g * jobs[j][k];
                        dj[j][k] += g * members[i][k];
                    }
                }
                (Decoder::Cosine, DecoderCache::Cosine { member_norms, job_norms }) => {
                    let (nm, nj) = (member_norms[i], job_norms[j]);
                    let s = scores.get(i, j);
                    for k in 0..dim {
                        dm[i][k] += g * (jobs[j][k] / (nm * nj) - s * members[i][k] / (nm * nm));
                        dj[j][k] += g * (members[i][k] / (nm * nj) - s * jobs[j][k] / (nj * nj));
                    }
                }
                (Decoder::Mlp(mlp), DecoderCache::Mlp(tapes)) => {
                    let tape = tapes[i * jobs.len() + j]
                        .as_ref()
                        .expect("gradient only flows to observed entries");
                    let dx = mlp.backward(tape, g, grads);
                    for k in 0..dim {
                        dm[i][k] += dx[k];
                        dj[j][k] += dx[dim + k];
                    }
                }
                _ => unreachable!("decoder cache does not match decoder"),
            }
        }
    }
    (dm, dj)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot_basis_cases() {
        let z = vec![vec![0.0f64; 3]];
        assert_eq!(decode_dot(&z, &z).unwrap().data, vec![0.0]);
        let e1 = vec![1.0, 0.0];
        let e2 = vec![0.0, 1.0];
        let s = decode_dot(&[e1.clone()], &[e2, e1]).unwrap();
        assert_eq!(s.data, vec![0.0, 1.0]);
    }

    #[test]
    fn dot_dimension_mismatch() {
        assert!(matches!(
            decode_dot(&[vec![1.0f32, 2.0]], &[vec![1.0]]),
            Err(GnnError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn cosine_self_and_antiparallel() {
        let v = vec![0.3f64, -1.2, 2.0];
        let w: Vec<f64> = v.iter().map(|x| -2.0 * x).collect();
        let s = decode_cosine(&[v.clone()], &[v.clone(), w]).unwrap();
        assert!((s.get(0, 0) - 1.0).abs() < 1e-12);
        assert!((s.get(0, 1) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn cosine_zero_norm_names_offender() {
        let v = vec![1.0f64, 0.0];
        let z = vec![0.0, 0.0];
        assert!(matches!(
            decode_cosine(&[v.clone()], &[v, z]),
            Err(GnnError::ZeroNormEmbedding { side: Side::Job, index: 1 })
        ));
    }

    #[test]
    fn mlp_zero_and_linear() {
        let m = vec![vec![1.0f64, 2.0]];
        let j = vec![vec![3.0, -1.0], vec![0.5, 0.5]];
        let zero: Mlp<f64> = Mlp::zeros(4, &[3]);
        assert_eq!(decode_mlp(&m, &j, &zero).unwrap().data, vec![0.0, 0.0]);
        let mut lin: Mlp<f64> = Mlp::zeros(4, &[]);
        lin.layers[0].weights = vec![1.0, -1.0, 2.0, 0.5];
        let s = decode_mlp(&m, &j, &lin).unwrap();
        assert_eq!(s.data, vec![(1.0 - 2.0) + (6.0 - 0.5), (1.0 - 2.0) + (1.0 + 0.25)]);
        let bad: Mlp<f64> = Mlp::zeros(3, &[]);
        assert!(matches!(decode_mlp(&m, &j, &bad), Err(GnnError::ShapeMismatch(_))));
    }
}
