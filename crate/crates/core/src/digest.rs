//! Order-sensitive 64-bit FNV-style digest used to compare structure states.
//! Integers are mixed a whole word at a time.

use core::hash::Hasher;

const PRIME: u64 = 0x0000_0100_0000_01b3;

#[derive(Debug, Clone)]
pub struct StateDigest(u64);

impl Default for StateDigest {
    fn default() -> Self {
        StateDigest(0xcbf2_9ce4_8422_2325)
    }
}

impl Hasher for StateDigest {
    fn finish(&self) -> u64 {
        self.0
    }

    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(PRIME);
        }
    }

    fn write_u32(&mut self, x: u32) {
        self.write_u64(x as u64);
    }

    fn write_u64(&mut self, x: u64) {
        self.0 = (self.0 ^ x).wrapping_mul(PRIME);
        self.0 ^= self.0 >> 29;
    }

    fn write_usize(&mut self, x: usize) {
        self.write_u64(x as u64);
    }
}

impl StateDigest {
    pub fn u32s(&mut self, xs: &[u32]) {
        self.write_usize(xs.len());
        for &x in xs {
            self.write_u32(x);
        }
    }

    pub fn u64s(&mut self, xs: &[u64]) {
        self.write_usize(xs.len());
        for &x in xs {
            self.write_u64(x);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_and_length_matter() {
        let d = |xs: &[u32]| {
            let mut h = StateDigest::default();
            h.u32s(xs);
            h.finish()
        };
        assert_ne!(d(&[1, 2]), d(&[2, 1]));
        assert_ne!(d(&[0]), d(&[0, 0]));
        assert_eq!(d(&[7, 8, 9]), d(&[7, 8, 9]));
    }
}
