use crate::error::{Error, Result};

/// Row-major `n_frames x dim` matrix of per-frame embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameEmbeddings {
    data: Vec<f32>,
    n_frames: usize,
    dim: usize,
}

impl FrameEmbeddings {
    pub fn new(data: Vec<f32>, n_frames: usize, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("embedding dimension must be positive"));
        }
        if data.len() != n_frames * dim {
            return Err(Error::invalid(format!(
                "embedding buffer has {} values, expected {n_frames}x{dim}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite embedding value at frame {}",
                pos / dim
            )));
        }
        Ok(Self { data, n_frames, dim })
    }

    pub fn from_rows(rows: &[Vec<f32>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::invalid("embedding rows have unequal lengths"));
        }
        Self::new(rows.concat(), rows.len(), dim)
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    /// Rows `range` widened to f64, one vector per frame.
    pub fn rows_f64(&self, range: std::ops::Range<usize>) -> Vec<Vec<f64>> {
        range.map(|i| self.row(i).iter().map(|&v| v as f64).collect()).collect()
    }

    /// Mean embedding of frames in `range`.
    pub fn mean(&self, range: std::ops::Range<usize>) -> Vec<f64> {
        let mut acc = vec![0.0; self.dim];
        let n = range.len() as f64;
        for i in range {
            for (a, &v) in acc.iter_mut().zip(self.row(i)) {
                *a += v as f64;
            }
        }
        acc.iter_mut().for_each(|a| *a /= n);
        acc
    }
}

/// Cosine similarity; zero-norm inputs give 0.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_checks() {
        assert!(FrameEmbeddings::new(vec![0.0; 5], 2, 2).is_err());
        assert!(FrameEmbeddings::new(vec![f32::NAN, 0.0], 1, 2).is_err());
        let e = FrameEmbeddings::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(e.row(1), &[3.0, 4.0]);
        assert_eq!(e.mean(0..2), vec![2.0, 3.0]);
    }

    #[test]
    fn cosine_cases() {
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[2.0, 0.0]), 1.0);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 3.0]), 0.0);
        assert_eq!(cosine_similarity(&[0.0, 0.0], &[1.0, 1.0]), 0.0);
    }
}
