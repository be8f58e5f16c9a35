//! Dense linear algebra for small lattice bases.
//!
//! Matrices are stored column-major because a lattice basis is a list of
//! column vectors and the samplers walk columns far more often than rows.

use std::fmt;
use std::ops::{Index, IndexMut};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};

/// Relative threshold below which a Gram-Schmidt norm counts as zero.
pub const SINGULAR_TOL: f64 = 1e-12;

#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds a matrix from row slices. Panics on ragged input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut m = Self::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c, "ragged rows");
            for (j, &v) in row.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// Builds a matrix whose j-th column is `cols[j]`. Panics on ragged input.
    pub fn from_columns(cols: &[Vec<f64>]) -> Self {
        let c = cols.len();
        let r = cols.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for col in cols {
            assert_eq!(col.len(), r, "ragged columns");
            data.extend_from_slice(col);
        }
        Self {
            rows: r,
            cols: c,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn column_mut(&mut self, j: usize) -> &mut [f64] {
        let r = self.rows;
        &mut self.data[j * r..(j + 1) * r]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.cols).map(|j| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for j in 0..self.cols {
            for i in 0..self.rows {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for j in 0..other.cols {
            for k in 0..self.cols {
                let b = other[(k, j)];
                if b == 0.0 {
                    continue;
                }
                let a = self.column(k);
                let o = out.column_mut(j);
                for i in 0..a.len() {
                    o[i] += a[i] * b;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols);
        let mut out = vec![0.0; self.rows];
        for (j, &x) in v.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.column(j)) {
                *o += a * x;
            }
        }
        out
    }

    pub fn mul_int(&self, v: &[i64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols);
        let mut out = vec![0.0; self.rows];
        for (j, &x) in v.iter().enumerate() {
            if x == 0 {
                continue;
            }
            let x = x as f64;
            for (o, a) in out.iter_mut().zip(self.column(j)) {
                *o += a * x;
            }
        }
        out
    }

    /// `selfᵀ · v`.
    pub fn tr_mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.rows);
        (0..self.cols).map(|j| dot(self.column(j), v)).collect()
    }

    pub fn scaled(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[j * self.rows + i]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[j * self.rows + i]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

/// QR factorization by modified Gram-Schmidt with one re-orthogonalization
/// pass. `R` has a strictly positive diagonal.
///
/// Works for tall matrices (`rows >= cols`); `Q` is `rows × cols`.
pub fn qr_decompose(b: &Matrix) -> Result<(Matrix, Matrix)> {
    let (rows, n) = (b.rows(), b.cols());
    if n == 0 || rows < n {
        return Err(Error::invalid(format!(
            "QR needs a non-empty matrix with rows >= cols, got {rows}x{n}"
        )));
    }
    if !b.is_finite() {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    let max_col = (0..n)
        .map(|j| norm_sq(b.column(j)).sqrt())
        .fold(0.0, f64::max);
    let mut q = Matrix::zeros(rows, n);
    let mut r = Matrix::zeros(n, n);
    let mut v = vec![0.0; rows];
    for k in 0..n {
        v.copy_from_slice(b.column(k));
        // twice is enough
        for _ in 0..2 {
            for j in 0..k {
                let s = dot(q.column(j), &v);
                r[(j, k)] += s;
                for (vi, qi) in v.iter_mut().zip(q.column(j)) {
                    *vi -= s * qi;
                }
            }
        }
        let rkk = norm_sq(&v).sqrt();
        if !(rkk > SINGULAR_TOL * max_col) {
            return Err(Error::Singular {
                column: k,
                value: rkk,
            });
        }
        r[(k, k)] = rkk;
        for (qi, vi) in q.column_mut(k).iter_mut().zip(&v) {
            *qi = vi / rkk;
        }
    }
    Ok((q, r))
}

/// A full-rank square basis together with its QR factors.
#[derive(Clone, Debug)]
pub struct LatticeBasis {
    basis: Matrix,
    q: Matrix,
    r: Matrix,
}

impl LatticeBasis {
    pub fn new(basis: Matrix) -> Result<Self> {
        if !basis.is_square() {
            return Err(Error::invalid(format!(
                "basis must be square, got {}x{}",
                basis.rows(),
                basis.cols()
            )));
        }
        let (q, r) = qr_decompose(&basis)?;
        Ok(Self { basis, q, r })
    }

    pub fn from_columns(cols: &[Vec<f64>]) -> Result<Self> {
        Self::new(Matrix::from_columns(cols))
    }

    pub fn identity(n: usize) -> Self {
        Self::new(Matrix::identity(n)).expect("identity is full rank")
    }

    pub fn dim(&self) -> usize {
        self.basis.cols()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.basis
    }

    pub fn q(&self) -> &Matrix {
        &self.q
    }

    pub fn r(&self) -> &Matrix {
        &self.r
    }

    pub fn column(&self, j: usize) -> &[f64] {
        self.basis.column(j)
    }

    /// The lattice point `B·x`.
    pub fn point(&self, x: &[i64]) -> Vec<f64> {
        self.basis.mul_int(x)
    }

    /// `Qᵀ·c`, the center expressed in the Gram-Schmidt frame.
    pub fn project(&self, c: &[f64]) -> Vec<f64> {
        self.q.tr_mul_vec(c)
    }

    pub fn gram_schmidt_norms(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.r[(i, i)].abs()).collect()
    }

    /// Absolute determinant, the product of the Gram-Schmidt norms.
    pub fn covolume(&self) -> f64 {
        self.gram_schmidt_norms().iter().product()
    }

    /// Solves `B·x = y` through the QR factors.
    pub fn solve(&self, y: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut x = self.project(y);
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.r[(i, j)] * x[j];
            }
            x[i] = s / self.r[(i, i)];
        }
        x
    }

    /// `B⁻¹`, column by column.
    pub fn inverse(&self) -> Matrix {
        let n = self.dim();
        let cols: Vec<Vec<f64>> = (0..n)
            .map(|j| {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                self.solve(&e)
            })
            .collect();
        Matrix::from_columns(&cols)
    }

    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::new(self.basis.scaled(s))
    }

    /// Parses the text format: a line with `n`, then `n` rows of `n` reals
    /// where row `i` holds the i-th coordinate of every basis column.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let (ln, first) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "empty basis file".into(),
        })?;
        let n: usize = first.parse().map_err(|_| Error::Parse {
            line: ln,
            message: format!("expected dimension, found {first:?}"),
        })?;
        if n == 0 {
            return Err(Error::Parse {
                line: ln,
                message: "dimension must be positive".into(),
            });
        }
        let mut rows = Vec::with_capacity(n);
        for (ln, line) in lines.by_ref().take(n) {
            let row = line
                .split_whitespace()
                .map(|t| {
                    t.parse::<f64>().map_err(|_| Error::Parse {
                        line: ln,
                        message: format!("invalid number {t:?}"),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            if row.len() != n {
                return Err(Error::Parse {
                    line: ln,
                    message: format!("expected {n} entries, found {}", row.len()),
                });
            }
            rows.push(row);
        }
        if rows.len() != n {
            return Err(Error::Parse {
                line: ln + rows.len() + 1,
                message: format!("expected {n} rows, found {}", rows.len()),
            });
        }
        if let Some((ln, _)) = lines.next() {
            return Err(Error::Parse {
                line: ln,
                message: "trailing content after basis rows".into(),
            });
        }
        Self::new(Matrix::from_rows(&rows))
    }

    pub fn to_text(&self) -> String {
        let n = self.dim();
        let mut s = format!("{n}\n");
        for i in 0..n {
            let row: Vec<String> = self.basis.row(i).iter().map(|v| v.to_string()).collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
        s
    }
}

/// Free-function form of [`LatticeBasis::gram_schmidt_norms`].
pub fn gram_schmidt_norms(b: &LatticeBasis) -> Vec<f64> {
    b.gram_schmidt_norms()
}

/// Column permutation `E`, stored as an index array: column `i` of `B·E` is
/// column `map[i]` of `B`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Permutation {
    map: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Self {
            map: (0..n).collect(),
        }
    }

    pub fn from_vec(map: Vec<usize>) -> Result<Self> {
        let n = map.len();
        let mut seen = vec![false; n];
        for &i in &map {
            if i >= n || std::mem::replace(&mut seen[i], true) {
                return Err(Error::invalid(format!("{map:?} is not a permutation")));
            }
        }
        Ok(Self { map })
    }

    /// Every permutation of `0..n`, in lexicographic order.
    pub fn all(n: usize) -> impl Iterator<Item = Permutation> {
        use itertools::Itertools;
        (0..n)
            .permutations(n)
            .map(|map| Permutation { map })
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.map
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.map.len()];
        for (i, &j) in self.map.iter().enumerate() {
            inv[j] = i;
        }
        Permutation { map: inv }
    }

    /// `z = E⁻¹·x`, i.e. `z[i] = x[map[i]]`.
    pub fn to_permuted<T: Copy>(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.map.len());
        self.map.iter().map(|&j| x[j]).collect()
    }

    /// `x = E·z`, the inverse of [`Permutation::to_permuted`].
    pub fn from_permuted<T: Copy + Default>(&self, z: &[T]) -> Vec<T> {
        assert_eq!(z.len(), self.map.len());
        let mut x = vec![T::default(); z.len()];
        for (i, &j) in self.map.iter().enumerate() {
            x[j] = z[i];
        }
        x
    }
}

/// Uniform random permutation (Fisher-Yates).
pub fn random_permutation<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Permutation {
    let mut map: Vec<usize> = (0..n).collect();
    map.shuffle(rng);
    Permutation { map }
}

/// `B·E`, re-factorized.
pub fn permute_basis(b: &LatticeBasis, e: &Permutation) -> Result<LatticeBasis> {
    if e.len() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: b.dim(),
            actual: e.len(),
        });
    }
    let cols: Vec<Vec<f64>> = e.as_slice().iter().map(|&j| b.column(j).to_vec()).collect();
    LatticeBasis::from_columns(&cols)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn assert_factorization(b: &Matrix) {
        let (q, r) = qr_decompose(b).unwrap();
        let resid = b.sub(&q.mul(&r)).frobenius_norm();
        assert!(resid <= 1e-10 * b.frobenius_norm(), "‖B-QR‖ = {resid}");
        let qtq = q.transpose().mul(&q);
        assert!(qtq.sub(&Matrix::identity(b.cols())).max_abs() <= 1e-10);
        for i in 0..r.rows() {
            assert!(r[(i, i)] > 0.0);
            for j in 0..i {
                assert_eq!(r[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn qr_identity() {
        let (q, r) = qr_decompose(&Matrix::identity(4)).unwrap();
        assert_eq!(q, Matrix::identity(4));
        assert_eq!(r, Matrix::identity(4));
    }

    #[test]
    fn qr_of_upper_triangular_is_trivial() {
        let b = Matrix::from_rows(&[vec![2.0, 1.0], vec![0.0, 1.0]]);
        let (q, r) = qr_decompose(&b).unwrap();
        assert!(q.sub(&Matrix::identity(2)).max_abs() < 1e-15);
        assert!(r.sub(&b).max_abs() < 1e-15);
    }

    #[test]
    fn gram_schmidt_of_sheared_square() {
        let b = LatticeBasis::from_columns(&[vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let gs = b.gram_schmidt_norms();
        assert!((gs[0] - 1.0).abs() < 1e-15 && (gs[1] - 1.0).abs() < 1e-15);
        assert_eq!(LatticeBasis::identity(5).gram_schmidt_norms(), vec![1.0; 5]);
    }

    #[test]
    fn gram_schmidt_norms_are_homogeneous() {
        let b = LatticeBasis::from_columns(&[vec![1.0, 0.3], vec![0.5, 2.0]]).unwrap();
        let s = b.scaled(3.5).unwrap();
        for (a, c) in b.gram_schmidt_norms().iter().zip(s.gram_schmidt_norms()) {
            assert!((3.5 * a - c).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_basis_is_rejected() {
        let b = Matrix::from_columns(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert!(matches!(qr_decompose(&b), Err(Error::Singular { column: 1, .. })));
        assert!(LatticeBasis::new(Matrix::zeros(3, 2)).is_err());
    }

    #[test]
    fn permutation_basics() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        assert_eq!(random_permutation(1, &mut rng), Permutation::identity(1));
        let a = random_permutation(4, &mut ChaCha20Rng::seed_from_u64(11));
        let b = random_permutation(4, &mut ChaCha20Rng::seed_from_u64(11));
        assert_eq!(a, b);
        assert!(Permutation::from_vec(vec![0, 0, 1]).is_err());
        assert!(Permutation::from_vec(vec![0, 3, 1]).is_err());
        assert_eq!(Permutation::all(3).count(), 6);
    }

    #[test]
    fn random_permutation_is_uniform() {
        let mut rng = ChaCha20Rng::seed_from_u64(2024);
        let perms: Vec<Permutation> = Permutation::all(3).collect();
        let mut counts = [0usize; 6];
        let draws = 60_000;
        for _ in 0..draws {
            let p = random_permutation(3, &mut rng);
            counts[perms.iter().position(|q| *q == p).unwrap()] += 1;
        }
        for c in counts {
            let f = c as f64 / draws as f64;
            assert!((f - 1.0 / 6.0).abs() <= 0.01, "frequency {f}");
        }
    }

    #[test]
    fn permute_basis_identity_and_involution() {
        let b = LatticeBasis::from_columns(&[vec![1.0, 0.2], vec![0.5, 1.0]]).unwrap();
        let same = permute_basis(&b, &Permutation::identity(2)).unwrap();
        assert_eq!(same.matrix(), b.matrix());
        let swap = Permutation::from_vec(vec![1, 0]).unwrap();
        let twice = permute_basis(&permute_basis(&b, &swap).unwrap(), &swap).unwrap();
        assert_eq!(twice.matrix(), b.matrix());
        assert!(permute_basis(&b, &Permutation::identity(3)).is_err());
    }

    #[test]
    fn parse_round_trip_and_errors() {
        let b = LatticeBasis::from_text("2\n1 0.5\n0 1\n").unwrap();
        assert_eq!(b.column(1), &[0.5, 1.0]);
        let again = LatticeBasis::from_text(&b.to_text()).unwrap();
        assert_eq!(again.matrix(), b.matrix());
        assert!(LatticeBasis::from_text("").is_err());
        assert!(LatticeBasis::from_text("2\n1 0\n").is_err());
        assert!(LatticeBasis::from_text("2\n1 0\n0 x\n").is_err());
        assert!(LatticeBasis::from_text("2\n1 0 0\n0 1\n").is_err());
        assert!(LatticeBasis::from_text("2\n1 0\n0 1\n3\n").is_err());
    }

    #[test]
    fn solve_and_inverse() {
        let b = LatticeBasis::from_columns(&[vec![2.0, 1.0, 0.0], vec![0.3, 1.0, 0.7], vec![-1.0, 0.0, 3.0]])
            .unwrap();
        let x = vec![1.5, -2.0, 0.25];
        let y = b.matrix().mul_vec(&x);
        for (a, e) in b.solve(&y).iter().zip(&x) {
            assert!((a - e).abs() < 1e-12);
        }
        let id = b.matrix().mul(&b.inverse());
        assert!(id.sub(&Matrix::identity(3)).max_abs() < 1e-12);
    }

    fn basis_strategy(n: usize) -> impl Strategy<Value = Matrix> {
        proptest::collection::vec(-3.0f64..3.0, n * n).prop_filter_map("ill-conditioned", move |v| {
            let cols: Vec<Vec<f64>> = v.chunks(n).map(|c| c.to_vec()).collect();
            let m = Matrix::from_columns(&cols);
            let b = LatticeBasis::new(m.clone()).ok()?;
            let gs = b.gram_schmidt_norms();
            let min = gs.iter().cloned().fold(f64::INFINITY, f64::min);
            (min > 1e-2).then_some(m)
        })
    }

    proptest! {
        #[test]
        fn qr_invariants_hold(m in (1usize..=6).prop_flat_map(basis_strategy)) {
            assert_factorization(&m);
        }

        #[test]
        fn permutation_preserves_lattice_and_covolume(
            m in basis_strategy(4),
            seed in any::<u64>(),
        ) {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let b = LatticeBasis::new(m).unwrap();
            let e = random_permutation(4, &mut rng);
            let be = permute_basis(&b, &e).unwrap();
            let rel = (be.covolume() - b.covolume()).abs() / b.covolume();
            prop_assert!(rel <= 1e-9);
            prop_assert_eq!(e.from_permuted(&e.to_permuted(&[1i64, 2, 3, 4])), vec![1, 2, 3, 4]);
            for _ in 0..100 {
                let x: Vec<i64> = (0..4).map(|_| rng.gen_range(-20..=20)).collect();
                let z = e.to_permuted(&x);
                let p1 = b.point(&x);
                let p2 = be.point(&z);
                for (a, c) in p1.iter().zip(&p2) {
                    prop_assert!((a - c).abs() <= 1e-12 * (1.0 + a.abs()));
                }
            }
        }
    }
}
