use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};

/// A borrowed view of one dataset point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point<'a> {
    pub id: u32,
    pub coords: &'a [f32],
}

/// Immutable collection of `n` points of dimension `dim`, stored row-major.
///
/// A point's id is its insertion position.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    data: Vec<f32>,
}

impl Dataset {
    pub fn new(dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch { expected: dim, found: data.len() % dim });
        }
        if data.len() / dim > u32::MAX as usize {
            return Err(invalid("too many points for 32-bit ids"));
        }
        Ok(Dataset { dim, data })
    }

    pub fn from_rows<R: AsRef<[f32]>>(dim: usize, rows: &[R]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: row.len() });
            }
            data.extend_from_slice(row);
        }
        Dataset::new(dim, data)
    }

    pub fn empty(dim: usize) -> Result<Self> {
        Dataset::new(dim, Vec::new())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Coordinates of point `id`. Panics if out of range.
    #[inline]
    pub fn coords(&self, id: u32) -> &[f32] {
        let start = id as usize * self.dim;
        &self.data[start..start + self.dim]
    }

    pub fn get(&self, id: u32) -> Option<Point<'_>> {
        ((id as usize) < self.len()).then(|| Point { id, coords: self.coords(id) })
    }

    pub fn iter(&self) -> impl Iterator<Item = Point<'_>> + '_ {
        self.data.chunks_exact(self.dim).enumerate().map(|(i, coords)| Point { id: i as u32, coords })
    }

    pub fn raw(&self) -> &[f32] {
        &self.data
    }

    pub fn check_dim(&self, q: &[f32]) -> Result<()> {
        if q.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: q.len() });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_follow_insertion_order() {
        let ds = Dataset::from_rows(2, &[[0.0, 1.0], [2.0, 3.0]]).unwrap();
        assert_eq!(ds.len(), 2);
        let ids: Vec<u32> = ds.iter().map(|p| p.id).collect();
        assert_eq!(ids, [0, 1]);
        assert_eq!(ds.coords(1), &[2.0, 3.0]);
        assert!(ds.get(2).is_none());
    }

    #[test]
    fn rejects_ragged_rows() {
        let rows: [&[f32]; 2] = [&[0.0, 1.0], &[2.0]];
        assert!(matches!(Dataset::from_rows(2, &rows), Err(Error::DimensionMismatch { .. })));
        assert!(Dataset::new(0, Vec::new()).is_err());
    }
}
