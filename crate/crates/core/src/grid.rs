//! Triangular lattice storage.
//!
//! Quantities indexed by (t, s) with 0 <= s <= t <= horizon live on a
//! triangular lattice of (horizon + 1)(horizon + 2)/2 cells. Rows are
//! stored contiguously, row t starting at offset t(t + 1)/2.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Dense triangular array over the success lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct TriGrid<T> {
    horizon: u32,
    data: Vec<T>,
}

#[inline]
fn row_offset(t: u32) -> usize {
    let t = t as usize;
    t * (t + 1) / 2
}

impl<T> TriGrid<T> {
    /// Largest t stored (rows run t = 0..=horizon).
    pub fn horizon(&self) -> u32 {
        self.horizon
    }

    /// Total number of cells.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, t: u32, s: u32) -> &T {
        debug_assert!(s <= t && t <= self.horizon);
        &self.data[row_offset(t) + s as usize]
    }

    #[inline]
    pub fn get_mut(&mut self, t: u32, s: u32) -> &mut T {
        debug_assert!(s <= t && t <= self.horizon);
        &mut self.data[row_offset(t) + s as usize]
    }

    /// Checked lookup for callers handling untrusted indices.
    pub fn try_get(&self, t: u32, s: u32) -> Result<&T> {
        if t > self.horizon || s > t {
            return Err(Error::OutOfLattice { t, s, horizon: self.horizon });
        }
        Ok(self.get(t, s))
    }

    /// Row t as a slice of length t + 1.
    pub fn row(&self, t: u32) -> &[T] {
        debug_assert!(t <= self.horizon);
        &self.data[row_offset(t)..row_offset(t) + t as usize + 1]
    }

    /// Iterator over (t, s, &value) in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (u32, u32, &T)> {
        (0..=self.horizon).flat_map(move |t| self.row(t).iter().enumerate().map(move |(s, v)| (t, s as u32, v)))
    }

    /// Reassemble from per-row vectors; row t must have length t + 1.
    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::domain("triangular grid needs at least row t = 0"));
        }
        let horizon = (rows.len() - 1) as u32;
        let mut data = Vec::with_capacity(row_offset(horizon) + rows.len());
        for (t, row) in rows.into_iter().enumerate() {
            if row.len() != t + 1 {
                return Err(Error::domain(format!(
                    "row {t} has length {}, expected {}",
                    row.len(),
                    t + 1
                )));
            }
            data.extend(row);
        }
        Ok(TriGrid { horizon, data })
    }

    /// Per-row views, cloning cells (used when serializing).
    pub fn to_rows(&self) -> Vec<Vec<T>>
    where
        T: Clone,
    {
        (0..=self.horizon).map(|t| self.row(t).to_vec()).collect()
    }
}

impl<T> TriGrid<Result<T>> {
    /// Lift per-cell results into a single result, keeping the first error.
    pub(crate) fn transpose(self) -> Result<TriGrid<T>> {
        let horizon = self.horizon;
        let data = self.data.into_iter().collect::<Result<Vec<T>>>()?;
        Ok(TriGrid { horizon, data })
    }
}

impl<T: Send> TriGrid<T> {
    /// Fill every cell from an independent per-cell function, rows in
    /// parallel. The fill is pure per cell, so the result does not depend
    /// on scheduling.
    pub fn build_par<F>(horizon: u32, f: F) -> Self
    where
        F: Fn(u32, u32) -> T + Sync,
    {
        let rows: Vec<Vec<T>> = (0..=horizon)
            .into_par_iter()
            .map(|t| (0..=t).map(|s| f(t, s)).collect())
            .collect();
        let mut data = Vec::with_capacity(row_offset(horizon) + horizon as usize + 1);
        for row in rows {
            data.extend(row);
        }
        TriGrid { horizon, data }
    }

    /// Sequential fill, for small lattices and deterministic profiling.
    pub fn build<F>(horizon: u32, mut f: F) -> Self
    where
        F: FnMut(u32, u32) -> T,
    {
        let mut data = Vec::with_capacity(row_offset(horizon) + horizon as usize + 1);
        for t in 0..=horizon {
            for s in 0..=t {
                data.push(f(t, s));
            }
        }
        TriGrid { horizon, data }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offsets_and_rows() {
        let g = TriGrid::build(3, |t, s| (t, s));
        assert_eq!(g.len(), 10);
        assert_eq!(g.row(0), &[(0, 0)]);
        assert_eq!(g.row(2), &[(2, 0), (2, 1), (2, 2)]);
        assert_eq!(*g.get(3, 2), (3, 2));
    }

    #[test]
    fn parallel_matches_sequential() {
        let a = TriGrid::build(40, |t, s| t as u64 * 1000 + s as u64);
        let b = TriGrid::build_par(40, |t, s| t as u64 * 1000 + s as u64);
        assert_eq!(a, b);
    }

    #[test]
    fn round_trip_rows() {
        let g = TriGrid::build(5, |t, s| t as f64 + s as f64 / 10.0);
        let back = TriGrid::from_rows(g.to_rows()).unwrap();
        assert_eq!(g, back);
    }

    #[test]
    fn from_rows_rejects_bad_shape() {
        assert!(TriGrid::from_rows(vec![vec![1.0, 2.0]]).is_err());
        assert!(TriGrid::<f64>::from_rows(vec![]).is_err());
    }

    #[test]
    fn try_get_bounds() {
        let g = TriGrid::build(2, |t, s| t + s);
        assert!(g.try_get(2, 2).is_ok());
        assert!(matches!(g.try_get(3, 0), Err(Error::OutOfLattice { .. })));
        assert!(matches!(g.try_get(1, 2), Err(Error::OutOfLattice { .. })));
    }
}
