//! Simplex class coding.
//!
//! Each of the `K` classes is represented by a unit vertex of a regular
//! simplex centred at the origin of `R^(K-1)`. A decision vector `f` is
//! mapped to a class by the least-angle rule, i.e. the vertex with the
//! largest inner product `<f, w_k>`.
//!
//! Class indices are zero-based throughout the library (`0..K`).

use crate::error::{invalid, Result};

/// The `K` simplex vertices together with their Gram matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexCode {
    k: usize,
    /// Row-major `K x (K-1)` vertex table.
    vertices: Vec<f64>,
    /// Row-major `K x K` table of `<w_a, w_b>`.
    gram: Vec<f64>,
    cos_theta: f64,
}

impl SimplexCode {
    /// Builds the vertex set for `k >= 2` classes.
    ///
    /// `w_1 = (K-1)^{-1/2} 1` and, for `j >= 2`,
    /// `w_j = -(1 + sqrt(K)) / (K-1)^{3/2} 1 + sqrt(K / (K-1)) e_{j-1}`.
    pub fn new(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(invalid(format!("simplex coding needs K >= 2, got {k}")));
        }
        let dim = k - 1;
        let km1 = dim as f64;
        let kf = k as f64;
        let first = km1.powf(-0.5);
        let shift = -(1.0 + kf.sqrt()) / km1.powf(1.5);
        let spike = (kf / km1).sqrt();

        let mut vertices = vec![0.0; k * dim];
        vertices[..dim].fill(first);
        for j in 1..k {
            let row = &mut vertices[j * dim..(j + 1) * dim];
            row.fill(shift);
            row[j - 1] += spike;
        }
        Ok(Self::from_vertices(k, vertices))
    }

    fn from_vertices(k: usize, vertices: Vec<f64>) -> Self {
        let dim = k - 1;
        let mut gram = vec![0.0; k * k];
        for a in 0..k {
            for b in 0..k {
                gram[a * k + b] = dot(
                    &vertices[a * dim..(a + 1) * dim],
                    &vertices[b * dim..(b + 1) * dim],
                );
            }
        }
        Self {
            k,
            vertices,
            gram,
            cos_theta: 1.0 / (1.0 - k as f64),
        }
    }

    /// Returns a code whose vertex `j` is vertex `order[j]` of `self`.
    ///
    /// `order` must be a permutation of `0..K`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.k];
        if order.len() != self.k {
            return Err(invalid("permutation length differs from K"));
        }
        for &o in order {
            if o >= self.k || std::mem::replace(&mut seen[o], true) {
                return Err(invalid("not a permutation of the class indices"));
            }
        }
        let mut vertices = Vec::with_capacity(self.vertices.len());
        for &o in order {
            vertices.extend_from_slice(self.vertex(o));
        }
        Ok(Self::from_vertices(self.k, vertices))
    }

    /// Number of classes.
    pub fn k(&self) -> usize {
        self.k
    }

    /// Dimension of the decision space, `K - 1`.
    pub fn dim(&self) -> usize {
        self.k - 1
    }

    /// `cos(theta_K) = 1 / (1 - K)`, the cosine between two distinct vertices.
    pub fn cos_theta(&self) -> f64 {
        self.cos_theta
    }

    pub fn vertex(&self, class: usize) -> &[f64] {
        let dim = self.dim();
        &self.vertices[class * dim..(class + 1) * dim]
    }

    pub fn vertices(&self) -> impl Iterator<Item = &[f64]> {
        self.vertices.chunks_exact(self.dim())
    }

    /// `<w_a, w_b>` as computed from the stored vertices.
    #[inline]
    pub fn gram(&self, a: usize, b: usize) -> f64 {
        self.gram[a * self.k + b]
    }

    /// The functional margins `(<f, w_1>, ..., <f, w_K>)`.
    pub fn scores(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(f)?;
        let mut out = vec![0.0; self.k];
        self.scores_into(f, &mut out);
        Ok(out)
    }

    /// Unchecked variant of [`scores`](Self::scores) writing into `out`.
    #[inline]
    pub fn scores_into(&self, f: &[f64], out: &mut [f64]) {
        for (o, w) in out.iter_mut().zip(self.vertices()) {
            *o = dot(f, w);
        }
    }

    /// Least-angle prediction; ties go to the smallest class index.
    pub fn predict(&self, f: &[f64]) -> Result<usize> {
        self.check_dim(f)?;
        Ok(argmax(self.vertices().map(|w| dot(f, w))))
    }

    pub(crate) fn check_dim(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.dim() {
            return Err(invalid(format!(
                "decision vector has dimension {}, expected {}",
                f.len(),
                self.dim()
            )));
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Index of the first maximum.
pub(crate) fn argmax(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, v) in values.into_iter().enumerate() {
        if v > best_val {
            best = i;
            best_val = v;
        }
    }
    best
}

/// Index of the first minimum.
pub(crate) fn argmin(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_val = f64::INFINITY;
    for (i, v) in values.into_iter().enumerate() {
        if v < best_val {
            best = i;
            best_val = v;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_classes_are_plus_minus_one() {
        let c = SimplexCode::new(2).unwrap();
        assert!((c.vertex(0)[0] - 1.0).abs() < 1e-12);
        assert!((c.vertex(1)[0] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn three_class_vertices() {
        let c = SimplexCode::new(3).unwrap();
        let expect = [[0.70711, 0.70711], [0.25882, -0.96593]];
        for (j, e) in expect.iter().enumerate() {
            for (a, b) in c.vertex(j).iter().zip(e) {
                assert!((a - b).abs() < 1e-4, "w_{} = {:?}", j + 1, c.vertex(j));
            }
        }
    }

    #[test]
    fn rejects_single_class() {
        assert!(SimplexCode::new(1).is_err());
        assert!(SimplexCode::new(0).is_err());
    }

    #[test]
    fn scores_examples() {
        let c2 = SimplexCode::new(2).unwrap();
        let s2 = c2.scores(&[0.5]).unwrap();
        assert!((s2[0] - 0.5).abs() < 1e-12 && (s2[1] + 0.5).abs() < 1e-12);

        let c3 = SimplexCode::new(3).unwrap();
        assert_eq!(c3.scores(&[0.0, 0.0]).unwrap(), vec![0.0; 3]);
        let s = c3.scores(c3.vertex(0)).unwrap();
        for (a, b) in s.iter().zip([1.0, -0.5, -0.5]) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(c3.scores(&[1.0]).is_err());
    }

    #[test]
    fn predict_examples() {
        let c4 = SimplexCode::new(4).unwrap();
        let f: Vec<f64> = c4.vertex(2).iter().map(|v| v * 3.7).collect();
        assert_eq!(c4.predict(&f).unwrap(), 2);
        assert_eq!(c4.predict(&[0.0; 3]).unwrap(), 0);
        let c3 = SimplexCode::new(3).unwrap();
        assert_eq!(c3.predict(&[0.70711, 0.70711]).unwrap(), 0);
        assert!(c3.predict(&[0.0; 3]).is_err());
    }

    #[test]
    fn permuted_code_reorders_vertices() {
        let c = SimplexCode::new(4).unwrap();
        let p = c.permuted(&[2, 0, 3, 1]).unwrap();
        assert_eq!(p.vertex(0), c.vertex(2));
        assert_eq!(p.vertex(3), c.vertex(1));
        assert!(c.permuted(&[0, 0, 1, 2]).is_err());
    }

    proptest! {
        #[test]
        fn scores_sum_to_zero(k in 2usize..12, seed in proptest::collection::vec(-5.0f64..5.0, 11)) {
            let c = SimplexCode::new(k).unwrap();
            let s = c.scores(&seed[..k - 1]).unwrap();
            prop_assert!(s.iter().sum::<f64>().abs() < 1e-10);
        }

        #[test]
        fn prediction_is_scale_invariant(
            k in 2usize..10,
            f in proptest::collection::vec(-3.0f64..3.0, 9),
            scale in 1e-3f64..1e3,
        ) {
            let c = SimplexCode::new(k).unwrap();
            let f = &f[..k - 1];
            let mut s = c.scores(f).unwrap();
            s.sort_by(|a, b| b.partial_cmp(a).unwrap());
            prop_assume!(s.len() < 2 || s[0] - s[1] > 1e-9);
            let g: Vec<f64> = f.iter().map(|v| v * scale).collect();
            prop_assert_eq!(c.predict(f).unwrap(), c.predict(&g).unwrap());
        }
    }
}
