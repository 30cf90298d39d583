use std::fmt;

/// Fixed-length classical bit string; index 0 is the first qubit of the layout.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitString {
    words: Vec<u64>,
    len: usize,
}

impl BitString {
    pub fn zeros(len: usize) -> Self {
        Self {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut s = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            s.set(i, b);
        }
        s
    }

    pub fn parse(text: &str) -> Self {
        let bits: Vec<bool> = text.chars().map(|c| c == '1').collect();
        Self::from_bools(&bits)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        debug_assert!(i < self.len);
        let mask = 1u64 << (i % 64);
        if value {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        self.words[i / 64] ^= 1u64 << (i % 64);
    }

    pub fn slice(&self, start: usize, len: usize) -> Vec<bool> {
        (start..start + len).map(|i| self.get(i)).collect()
    }

    pub fn write(&mut self, start: usize, bits: &[bool]) {
        for (k, &b) in bits.iter().enumerate() {
            self.set(start + k, b);
        }
    }

    /// Unsigned value of `len` bits starting at `start`, most significant first.
    pub fn read_uint(&self, start: usize, len: usize) -> u64 {
        debug_assert!(len <= 64);
        (start..start + len).fold(0, |acc, i| (acc << 1) | self.get(i) as u64)
    }

    pub fn write_uint(&mut self, start: usize, len: usize, value: u64) {
        for k in 0..len {
            self.set(start + k, (value >> (len - 1 - k)) & 1 == 1);
        }
    }

    pub fn any_in(&self, start: usize, len: usize) -> bool {
        (start..start + len).any(|i| self.get(i))
    }

    /// Grows or shrinks to `len` bits, zero-filling new positions.
    pub fn resized(&self, len: usize) -> Self {
        let mut out = Self::zeros(len);
        for i in 0..self.len.min(len) {
            out.set(i, self.get(i));
        }
        out
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({self})")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uint_roundtrip_msb_first() {
        let mut b = BitString::zeros(70);
        b.write_uint(62, 5, 0b10110);
        assert_eq!(b.read_uint(62, 5), 0b10110);
        assert!(b.get(62) && !b.get(63) && b.get(64));
        assert_eq!(b.to_string().len(), 70);
        assert_eq!(BitString::parse("0110").to_string(), "0110");
    }
}
