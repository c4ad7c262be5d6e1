//! Dense symmetric positive-definite solves for small systems.

use crate::scalar::Scalar;

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct SquareMatrix<T> {
    pub n: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> SquareMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        SquareMatrix {
            n,
            data: vec![T::zero(); n * n],
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn get_mut(&mut self, i: usize, j: usize) -> &mut T {
        &mut self.data[i * self.n + j]
    }

    pub fn rows(&self) -> Vec<Vec<T>> {
        self.data.chunks(self.n.max(1)).map(<[T]>::to_vec).collect()
    }
}

/// Lower-triangular Cholesky factor `L` with `A = L L^T`.
pub(crate) struct Cholesky<T> {
    l: SquareMatrix<T>,
}

impl<T: Scalar> Cholesky<T> {
    /// Factorizes `a`; `Err(k)` names the first pivot that is not clearly positive.
    pub fn new(a: &SquareMatrix<T>) -> Result<Self, usize> {
        let n = a.n;
        let scale = (0..n).map(|i| a.get(i, i).abs()).fold(T::zero(), T::max);
        let floor = scale * T::epsilon() * T::count(n.max(1)) * T::lit(16.0);
        let mut l = SquareMatrix::zeros(n);
        for j in 0..n {
            let mut diag = a.get(j, j);
            for k in 0..j {
                diag -= l.get(j, k) * l.get(j, k);
            }
            if diag.is_nan() || diag <= floor {
                return Err(j);
            }
            let d = diag.sqrt();
            *l.get_mut(j, j) = d;
            for i in (j + 1)..n {
                let mut v = a.get(i, j);
                for k in 0..j {
                    v -= l.get(i, k) * l.get(j, k);
                }
                *l.get_mut(i, j) = v / d;
            }
        }
        Ok(Cholesky { l })
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.l.n;
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                let v = self.l.get(i, k) * y[k];
                y[i] -= v;
            }
            y[i] /= self.l.get(i, i);
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                let v = self.l.get(k, i) * y[k];
                y[i] -= v;
            }
            y[i] /= self.l.get(i, i);
        }
        y
    }

    pub fn inverse(&self) -> SquareMatrix<T> {
        let n = self.l.n;
        let mut inv = SquareMatrix::zeros(n);
        let mut e = vec![T::zero(); n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = T::zero());
            e[j] = T::one();
            let col = self.solve(&e);
            for (i, &v) in col.iter().enumerate() {
                *inv.get_mut(i, j) = v;
            }
        }
        // symmetrize rounding noise
        for i in 0..n {
            for j in (i + 1)..n {
                let m = (inv.get(i, j) + inv.get(j, i)) / T::lit(2.0);
                *inv.get_mut(i, j) = m;
                *inv.get_mut(j, i) = m;
            }
        }
        inv
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_and_inverts() {
        let a = SquareMatrix {
            n: 3,
            data: vec![4.0, 12.0, -16.0, 12.0, 37.0, -43.0, -16.0, -43.0, 98.0],
        };
        let c = Cholesky::new(&a).unwrap();
        let x = c.solve(&[1.0, 2.0, 3.0]);
        for i in 0..3 {
            let ax: f64 = (0..3).map(|j| a.get(i, j) * x[j]).sum();
            assert!((ax - [1.0, 2.0, 3.0][i]).abs() < 1e-10);
        }
        let inv = c.inverse();
        for i in 0..3 {
            for j in 0..3 {
                let v: f64 = (0..3).map(|k| a.get(i, k) * inv.get(k, j)).sum();
                assert!((v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn reports_singular_pivot() {
        let a = SquareMatrix {
            n: 2,
            data: vec![1.0, 1.0, 1.0, 1.0],
        };
        assert_eq!(Cholesky::new(&a).err(), Some(1));
    }
}
