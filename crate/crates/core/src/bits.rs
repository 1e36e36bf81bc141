//! Packed bit vectors and incremental GF(2) elimination.

use std::fmt;

#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Bits {
    len: usize,
    words: Vec<u64>,
}

impl Bits {
    pub fn zeros(len: usize) -> Self {
        Bits {
            len,
            words: vec![0; len.div_ceil(64)],
        }
    }

    pub fn from_indices(len: usize, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut b = Bits::zeros(len);
        for i in indices {
            b.flip(i);
        }
        b
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
    pub fn set(&mut self, i: usize, v: bool) {
        debug_assert!(i < self.len);
        let mask = 1u64 << (i % 64);
        if v {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        debug_assert!(i < self.len);
        self.words[i / 64] ^= 1u64 << (i % 64);
    }

    pub fn xor_assign(&mut self, other: &Bits) {
        debug_assert_eq!(self.len, other.len);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= *b;
        }
    }

    /// Parity of the bitwise AND.
    pub fn and_parity(&self, other: &Bits) -> bool {
        debug_assert_eq!(self.len, other.len);
        let mut acc = 0u64;
        for (a, b) in self.words.iter().zip(&other.words) {
            acc ^= a & b;
        }
        acc.count_ones() % 2 == 1
    }

    pub fn intersects(&self, other: &Bits) -> bool {
        self.words.iter().zip(&other.words).any(|(a, b)| a & b != 0)
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn first_one(&self) -> Option<usize> {
        for (k, &w) in self.words.iter().enumerate() {
            if w != 0 {
                return Some(k * 64 + w.trailing_zeros() as usize);
            }
        }
        None
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(k, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let t = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(k * 64 + t)
            })
        })
    }

    /// Concatenation `self ++ other`.
    pub fn concat(&self, other: &Bits) -> Bits {
        let mut out = Bits::zeros(self.len + other.len);
        for i in self.iter_ones() {
            out.set(i, true);
        }
        for i in other.iter_ones() {
            out.set(self.len + i, true);
        }
        out
    }
}

impl fmt::Debug for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Bits[")?;
        for i in 0..self.len {
            write!(f, "{}", if self.get(i) { '1' } else { '0' })?;
        }
        write!(f, "]")
    }
}

/// Reduced row-echelon basis built one vector at a time.
///
/// Each stored row remembers which inserted vectors it is a sum of, so a
/// dependent insertion reports the subset of earlier insertions it equals.
#[derive(Clone, Debug)]
pub struct Eliminator {
    width: usize,
    inserted: usize,
    capacity: usize,
    rows: Vec<Row>,
}

#[derive(Clone, Debug)]
struct Row {
    pivot: usize,
    bits: Bits,
    combo: Bits,
}

/// Outcome of reducing a vector against the current basis.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Reduction {
    /// The vector was independent and now extends the basis.
    Independent,
    /// The vector equals the sum of these earlier insertions.
    Dependent(Vec<usize>),
}

impl Eliminator {
    /// `capacity` bounds how many vectors will be inserted.
    pub fn new(width: usize, capacity: usize) -> Self {
        Eliminator {
            width,
            inserted: 0,
            capacity,
            rows: Vec::new(),
        }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    fn reduce(&self, v: &Bits) -> (Bits, Bits) {
        let mut bits = v.clone();
        let mut combo = Bits::zeros(self.capacity);
        for r in &self.rows {
            if bits.get(r.pivot) {
                bits.xor_assign(&r.bits);
                combo.xor_assign(&r.combo);
            }
        }
        (bits, combo)
    }

    /// Express `v` as a sum of inserted vectors without modifying the basis.
    pub fn express(&self, v: &Bits) -> Option<Vec<usize>> {
        assert_eq!(v.len(), self.width);
        let (bits, combo) = self.reduce(v);
        bits.is_zero().then(|| combo.iter_ones().collect())
    }

    /// Canonical representative of `v` modulo the span: the fully reduced
    /// residue, equal for vectors that differ by a span element.
    pub fn residual(&self, v: &Bits) -> Bits {
        self.reduce(v).0
    }

    pub fn insert(&mut self, v: &Bits) -> Reduction {
        assert_eq!(v.len(), self.width);
        assert!(self.inserted < self.capacity, "eliminator capacity exceeded");
        let id = self.inserted;
        self.inserted += 1;
        let (bits, mut combo) = self.reduce(v);
        combo.flip(id);
        match bits.first_one() {
            None => {
                combo.flip(id);
                Reduction::Dependent(combo.iter_ones().collect())
            }
            Some(pivot) => {
                for r in &mut self.rows {
                    if r.bits.get(pivot) {
                        r.bits.xor_assign(&bits);
                        r.combo.xor_assign(&combo);
                    }
                }
                self.rows.push(Row { pivot, bits, combo });
                Reduction::Independent
            }
        }
    }
}

/// Basis of the null space `{c : Σ_k c_k rows[k] = 0}` for a list of rows.
pub fn left_null_space(rows: &[Bits]) -> Vec<Bits> {
    let width = rows.first().map_or(0, |r| r.len());
    let mut elim = Eliminator::new(width, rows.len());
    let mut out = Vec::new();
    for r in rows {
        if let Reduction::Dependent(subset) = elim.insert(r) {
            let mut c = Bits::from_indices(rows.len(), subset);
            c.flip(elim.inserted - 1);
            out.push(c);
        }
    }
    out
}
