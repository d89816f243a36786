//! Compressed sparse row storage for Hermitian operators on grid functions.

use std::io::Write;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::scalar::{czero, Cx, Real};

#[derive(Clone, Debug)]
pub struct SparseHermitian<T: Real> {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<Cx<T>>,
    /// Volume element of the discrete inner product `<u,v> = w Σ u v̄`.
    cell_volume: T,
    hermitian: bool,
}

impl<T: Real> SparseHermitian<T> {
    /// Assembles from `(row, col, value)` triplets; duplicates are summed.
    /// The Hermitian flag is set by checking every stored entry against its
    /// transposed partner.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, Cx<T>)>, cell_volume: T) -> Self {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<Cx<T>> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < n && c < n, "triplet index out of range");
            if last == Some((r, c)) {
                *values.last_mut().expect("entry") += v;
                continue;
            }
            col_idx.push(c);
            values.push(v);
            row_ptr[r + 1] += 1;
            last = Some((r, c));
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        let mut m = Self { n, row_ptr, col_idx, values, cell_volume, hermitian: false };
        m.hermitian = m.check_hermitian();
        m
    }

    /// Diagonal matrix.
    pub fn diagonal(diag: &[T], cell_volume: T) -> Self {
        let trip = diag.iter().enumerate().map(|(i, &d)| (i, i, Cx::new(d, T::zero()))).collect();
        Self::from_triplets(diag.len(), trip, cell_volume)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn cell_volume(&self) -> T {
        self.cell_volume
    }

    #[inline]
    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn get(&self, row: usize, col: usize) -> Cx<T> {
        let range = self.row_ptr[row]..self.row_ptr[row + 1];
        match self.col_idx[range.clone()].binary_search(&col) {
            Ok(k) => self.values[range.start + k],
            Err(_) => czero(),
        }
    }

    pub fn row_entries(&self, row: usize) -> impl Iterator<Item = (usize, Cx<T>)> + '_ {
        let range = self.row_ptr[row]..self.row_ptr[row + 1];
        self.col_idx[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    fn check_hermitian(&self) -> bool {
        (0..self.n).all(|r| self.row_entries(r).all(|(c, v)| self.get(c, r) == v.conj()))
    }

    /// `y = A u`, summing each row in ascending column order.
    pub fn multiply(&self, u: &[Cx<T>]) -> Result<Vec<Cx<T>>> {
        let mut y = vec![czero(); self.n];
        self.multiply_into(u, &mut y)?;
        Ok(y)
    }

    pub fn multiply_into(&self, u: &[Cx<T>], y: &mut [Cx<T>]) -> Result<()> {
        if u.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: u.len() });
        }
        if y.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: y.len() });
        }
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = czero();
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * u[self.col_idx[k]];
            }
            *out = acc;
        }
        Ok(())
    }

    pub fn to_dense(&self) -> DenseMatrix<T> {
        let mut d = DenseMatrix::zeros(self.n, self.n);
        for r in 0..self.n {
            for (c, v) in self.row_entries(r) {
                d[(r, c)] = v;
            }
        }
        d
    }

    /// Gershgorin lower bound on the spectrum.
    pub fn gershgorin_lower(&self) -> T {
        (0..self.n)
            .map(|r| {
                let mut diag = T::zero();
                let mut radius = T::zero();
                for (c, v) in self.row_entries(r) {
                    if c == r {
                        diag = v.re;
                    } else {
                        radius += v.norm();
                    }
                }
                diag - radius
            })
            .fold(T::infinity(), T::min)
    }

    /// Gershgorin upper bound on the spectrum.
    pub fn gershgorin_upper(&self) -> T {
        (0..self.n)
            .map(|r| self.row_entries(r).map(|(c, v)| if c == r { v.re } else { v.norm() }).sum::<T>())
            .fold(T::neg_infinity(), T::max)
    }

    /// Text dump: header `n nnz`, then `row col re im` per stored entry with
    /// 17 significant digits.
    pub fn write_text<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{} {}", self.n, self.nnz())?;
        for r in 0..self.n {
            for (c, v) in self.row_entries(r) {
                writeln!(out, "{} {} {:.16e} {:.16e}", r, c, v.re.as_f64(), v.im.as_f64())?;
            }
        }
        Ok(())
    }

    /// Parses the text dump written by [`write_text`](Self::write_text).
    pub fn read_text(text: &str, cell_volume: T) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::Parse { line: 1, message: "empty matrix dump".into() })?;
        let mut h = header.split_whitespace().map(str::parse::<usize>);
        let (n, nnz) = match (h.next(), h.next()) {
            (Some(Ok(n)), Some(Ok(nnz))) => (n, nnz),
            _ => return Err(Error::Parse { line: 1, message: "expected `n nnz`".into() }),
        };
        let mut trip = Vec::with_capacity(nnz);
        for (ln, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            let bad = || Error::Parse { line: ln + 1, message: format!("malformed entry `{line}`") };
            if f.len() != 4 {
                return Err(bad());
            }
            let r: usize = f[0].parse().map_err(|_| bad())?;
            let c: usize = f[1].parse().map_err(|_| bad())?;
            let re: f64 = f[2].parse().map_err(|_| bad())?;
            let im: f64 = f[3].parse().map_err(|_| bad())?;
            trip.push((r, c, Cx::new(T::lit(re), T::lit(im))));
        }
        if trip.len() != nnz {
            return Err(Error::Parse { line: 1, message: format!("header declares {nnz} entries, found {}", trip.len()) });
        }
        Ok(Self::from_triplets(n, trip, cell_volume))
    }
}
