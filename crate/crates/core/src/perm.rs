use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Uniformly random bijection between point ids and ranks `0..n`.
///
/// `rank` and `inverse` are kept mutually consistent across swaps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankPermutation {
    rank: Vec<u32>,
    inverse: Vec<u32>,
}

impl RankPermutation {
    /// Fisher-Yates shuffle of `0..n`.
    pub fn random(n: usize, rng: &mut SeededRng) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyPermutation);
        }
        let mut inverse: Vec<u32> = (0..n as u32).collect();
        inverse.shuffle(rng);
        Ok(Self::from_inverse(inverse))
    }

    pub fn identity(n: usize) -> Self {
        Self::from_inverse((0..n as u32).collect())
    }

    /// Builds from an explicit id -> rank table; errors unless it is a bijection.
    pub fn from_ranks(rank: Vec<u32>) -> Result<Self> {
        let n = rank.len();
        let mut inverse = alloc::vec![u32::MAX; n];
        for (id, &r) in rank.iter().enumerate() {
            let slot = inverse.get_mut(r as usize).ok_or(Error::IdOutOfRange { id: r as usize, n })?;
            if *slot != u32::MAX {
                return Err(crate::error::invalid("ranks are not a bijection"));
            }
            *slot = id as u32;
        }
        Ok(RankPermutation { rank, inverse })
    }

    fn from_inverse(inverse: Vec<u32>) -> Self {
        let mut rank = alloc::vec![0u32; inverse.len()];
        for (r, &id) in inverse.iter().enumerate() {
            rank[id as usize] = r as u32;
        }
        RankPermutation { rank, inverse }
    }

    pub fn len(&self) -> usize {
        self.rank.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rank.is_empty()
    }

    #[inline]
    pub fn rank(&self, id: u32) -> u32 {
        self.rank[id as usize]
    }

    /// The id holding rank `r`.
    #[inline]
    pub fn id_at(&self, r: u32) -> u32 {
        self.inverse[r as usize]
    }

    pub fn ranks(&self) -> &[u32] {
        &self.rank
    }

    /// Exchanges the ranks of two points.
    pub fn swap_ranks(&mut self, a: u32, b: u32) -> Result<()> {
        let n = self.len();
        for id in [a, b] {
            if id as usize >= n {
                return Err(Error::IdOutOfRange { id: id as usize, n });
            }
        }
        let (ra, rb) = (self.rank[a as usize], self.rank[b as usize]);
        self.rank.swap(a as usize, b as usize);
        self.inverse[ra as usize] = b;
        self.inverse[rb as usize] = a;
        Ok(())
    }

    /// True when `rank` and `inverse` compose to the identity both ways.
    pub fn is_consistent(&self) -> bool {
        self.rank.len() == self.inverse.len()
            && self.rank.iter().enumerate().all(|(id, &r)| self.inverse.get(r as usize) == Some(&(id as u32)))
    }
}
