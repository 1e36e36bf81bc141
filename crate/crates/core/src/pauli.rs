//! Phase-free Pauli operators on the spacetime grid.
//!
//! A circuit with `N` qubits and `T` timesteps has `N·T` spacetime qubits at
//! half-integer times `τ = layer + 0.5`, `layer ∈ [0, T)`. Operators are stored
//! as two bit planes indexed by `layer·N + qubit`, so index order is
//! `(layer, qubit)` lexicographic order.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::Bits;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PauliError {
    #[error("grid mismatch: {0:?} vs {1:?}")]
    GridMismatch(Grid, Grid),
    #[error("coordinate {0} outside grid of {1} qubits x {2} layers")]
    BadCoordinate(SpacetimeCoord, usize, usize),
    #[error("cannot parse Pauli token `{0}`")]
    BadToken(String),
}

/// Shape of the spacetime grid: `qubits` columns and `layers` error layers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Grid {
    pub qubits: usize,
    pub layers: usize,
}

impl Grid {
    pub fn new(qubits: usize, layers: usize) -> Self {
        Grid { qubits, layers }
    }

    pub fn sites(&self) -> usize {
        self.qubits * self.layers
    }

    #[inline]
    pub fn index(&self, c: SpacetimeCoord) -> usize {
        c.layer * self.qubits + c.qubit
    }

    #[inline]
    pub fn coord(&self, index: usize) -> SpacetimeCoord {
        SpacetimeCoord {
            qubit: index % self.qubits,
            layer: index / self.qubits,
        }
    }

    pub fn contains(&self, c: SpacetimeCoord) -> bool {
        c.qubit < self.qubits && c.layer < self.layers
    }

    fn check(&self, c: SpacetimeCoord) -> Result<(), PauliError> {
        if self.contains(c) {
            Ok(())
        } else {
            Err(PauliError::BadCoordinate(c, self.qubits, self.layers))
        }
    }
}

/// A spacetime qubit `(i, τ)` with `τ = layer + 0.5`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SpacetimeCoord {
    pub qubit: usize,
    pub layer: usize,
}

impl SpacetimeCoord {
    pub fn new(qubit: usize, layer: usize) -> Self {
        SpacetimeCoord { qubit, layer }
    }

    pub fn time(&self) -> f64 {
        self.layer as f64 + 0.5
    }
}

impl fmt::Display for SpacetimeCoord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}.5", self.qubit, self.layer)
    }
}

impl FromStr for SpacetimeCoord {
    type Err = PauliError;

    /// Parses `q@L.5`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || PauliError::BadToken(s.to_string());
        let (q, t) = s.split_once('@').ok_or_else(bad)?;
        let layer = t.strip_suffix(".5").ok_or_else(bad)?;
        Ok(SpacetimeCoord {
            qubit: q.parse().map_err(|_| bad())?,
            layer: layer.parse().map_err(|_| bad())?,
        })
    }
}

/// Single-qubit Pauli modulo phase.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    pub fn has_x(self) -> bool {
        matches!(self, Pauli::X | Pauli::Y)
    }

    pub fn has_z(self) -> bool {
        matches!(self, Pauli::Z | Pauli::Y)
    }

    pub fn mul(self, other: Pauli) -> Pauli {
        Pauli::from_bits(self.has_x() ^ other.has_x(), self.has_z() ^ other.has_z())
    }

    pub fn anticommutes(self, other: Pauli) -> bool {
        (self.has_x() && other.has_z()) ^ (self.has_z() && other.has_x())
    }

    /// Swaps X and Z, fixing Y.
    pub fn opposite(self) -> Pauli {
        Pauli::from_bits(self.has_z(), self.has_x())
    }

    pub fn symbol(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    pub fn from_symbol(c: char) -> Option<Pauli> {
        match c {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }
}

impl fmt::Display for Pauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct SpacetimePauli {
    grid: Grid,
    x: Bits,
    z: Bits,
}

impl SpacetimePauli {
    pub fn identity(grid: Grid) -> Self {
        SpacetimePauli {
            grid,
            x: Bits::zeros(grid.sites()),
            z: Bits::zeros(grid.sites()),
        }
    }

    pub fn single(grid: Grid, at: SpacetimeCoord, p: Pauli) -> Result<Self, PauliError> {
        Self::from_sites(grid, [(at, p)])
    }

    /// Builds an operator from a sparse site list; repeated sites multiply.
    pub fn from_sites(
        grid: Grid,
        sites: impl IntoIterator<Item = (SpacetimeCoord, Pauli)>,
    ) -> Result<Self, PauliError> {
        let mut out = Self::identity(grid);
        for (c, p) in sites {
            grid.check(c)?;
            out.mul_site(c, p);
        }
        Ok(out)
    }

    pub fn from_bits(grid: Grid, x: Bits, z: Bits) -> Self {
        assert_eq!(x.len(), grid.sites());
        assert_eq!(z.len(), grid.sites());
        SpacetimePauli { grid, x, z }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn x_bits(&self) -> &Bits {
        &self.x
    }

    pub fn z_bits(&self) -> &Bits {
        &self.z
    }

    /// The symplectic vector `x ++ z`.
    pub fn symplectic(&self) -> Bits {
        self.x.concat(&self.z)
    }

    pub fn get(&self, c: SpacetimeCoord) -> Pauli {
        let i = self.grid.index(c);
        Pauli::from_bits(self.x.get(i), self.z.get(i))
    }

    /// Multiplies a single-site Pauli into this operator.
    pub fn mul_site(&mut self, c: SpacetimeCoord, p: Pauli) {
        let i = self.grid.index(c);
        if p.has_x() {
            self.x.flip(i);
        }
        if p.has_z() {
            self.z.flip(i);
        }
    }

    pub fn is_identity(&self) -> bool {
        self.x.is_zero() && self.z.is_zero()
    }

    pub fn is_pure_x(&self) -> bool {
        self.z.is_zero()
    }

    pub fn is_pure_z(&self) -> bool {
        self.x.is_zero()
    }

    fn check_grid(&self, other: &Self) -> Result<(), PauliError> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(PauliError::GridMismatch(self.grid, other.grid))
        }
    }

    pub fn multiply(&self, other: &Self) -> Result<Self, PauliError> {
        let mut out = self.clone();
        out.mul_assign(other)?;
        Ok(out)
    }

    pub fn mul_assign(&mut self, other: &Self) -> Result<(), PauliError> {
        self.check_grid(other)?;
        self.x.xor_assign(&other.x);
        self.z.xor_assign(&other.z);
        Ok(())
    }

    /// `(−1)^(|a.x ∧ b.z| + |a.z ∧ b.x|)`.
    pub fn scalar_commutator(&self, other: &Self) -> Result<i8, PauliError> {
        self.check_grid(other)?;
        Ok(if self.anticommutes(other) { -1 } else { 1 })
    }

    /// Anticommutation test; operands must share a grid.
    #[inline]
    pub fn anticommutes(&self, other: &Self) -> bool {
        debug_assert_eq!(self.grid, other.grid);
        self.x.and_parity(&other.z) ^ self.z.and_parity(&other.x)
    }

    /// Support in `(layer, qubit)` lexicographic order.
    pub fn support(&self) -> Vec<SpacetimeCoord> {
        self.sites().map(|(c, _)| c).collect()
    }

    pub fn weight(&self) -> usize {
        self.sites().count()
    }

    /// Non-identity sites in `(layer, qubit)` order.
    pub fn sites(&self) -> impl Iterator<Item = (SpacetimeCoord, Pauli)> + '_ {
        let mut xs = self.x.iter_ones().peekable();
        let mut zs = self.z.iter_ones().peekable();
        std::iter::from_fn(move || {
            let i = match (xs.peek(), zs.peek()) {
                (None, None) => return None,
                (Some(&a), None) => a,
                (None, Some(&b)) => b,
                (Some(&a), Some(&b)) => a.min(b),
            };
            let hx = xs.next_if_eq(&i).is_some();
            let hz = zs.next_if_eq(&i).is_some();
            Some((self.grid.coord(i), Pauli::from_bits(hx, hz)))
        })
    }

    /// Parses whitespace-separated `P q@L.5` token pairs.
    pub fn parse_tokens(grid: Grid, text: &str) -> Result<Self, PauliError> {
        let toks: Vec<&str> = text.split_whitespace().collect();
        if toks.len() % 2 != 0 {
            return Err(PauliError::BadToken(text.to_string()));
        }
        let mut sites = Vec::new();
        for pair in toks.chunks(2) {
            let mut chars = pair[0].chars();
            let p = match (chars.next().and_then(Pauli::from_symbol), chars.next()) {
                (Some(p), None) => p,
                _ => return Err(PauliError::BadToken(pair[0].to_string())),
            };
            sites.push((pair[1].parse::<SpacetimeCoord>()?, p));
        }
        Self::from_sites(grid, sites)
    }
}

impl fmt::Display for SpacetimePauli {
    /// Renders `X 3@2.5 Z 4@0.5`; the identity renders as `I`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_identity() {
            return write!(f, "I");
        }
        let mut first = true;
        for (c, p) in self.sites() {
            if !first {
                write!(f, " ")?;
            }
            first = false;
            write!(f, "{p} {c}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for SpacetimePauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SpacetimePauli({self})")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g() -> Grid {
        Grid::new(4, 3)
    }

    fn at(q: usize, l: usize) -> SpacetimeCoord {
        SpacetimeCoord::new(q, l)
    }

    #[test]
    fn commutator_examples() {
        let x0 = SpacetimePauli::single(g(), at(0, 0), Pauli::X).unwrap();
        let z0 = SpacetimePauli::single(g(), at(0, 0), Pauli::Z).unwrap();
        let z1 = SpacetimePauli::single(g(), at(1, 0), Pauli::Z).unwrap();
        assert_eq!(x0.scalar_commutator(&z0), Ok(-1));
        assert_eq!(x0.scalar_commutator(&z1), Ok(1));
        let xz = SpacetimePauli::from_sites(g(), [(at(0, 0), Pauli::X), (at(1, 0), Pauli::Z)]).unwrap();
        let zx = SpacetimePauli::from_sites(g(), [(at(0, 0), Pauli::Z), (at(1, 0), Pauli::X)]).unwrap();
        assert_eq!(xz.scalar_commutator(&zx), Ok(1));
    }

    #[test]
    fn multiply_examples() {
        let x = SpacetimePauli::single(g(), at(2, 1), Pauli::X).unwrap();
        let z = SpacetimePauli::single(g(), at(2, 1), Pauli::Z).unwrap();
        assert!(x.multiply(&x).unwrap().is_identity());
        assert_eq!(x.multiply(&z).unwrap().get(at(2, 1)), Pauli::Y);
        assert_eq!(x.multiply(&SpacetimePauli::identity(g())).unwrap(), x);
    }

    #[test]
    fn grid_mismatch_is_reported() {
        let a = SpacetimePauli::identity(g());
        let b = SpacetimePauli::identity(Grid::new(2, 2));
        assert!(matches!(a.multiply(&b), Err(PauliError::GridMismatch(..))));
        assert!(matches!(a.scalar_commutator(&b), Err(PauliError::GridMismatch(..))));
    }

    #[test]
    fn support_examples() {
        assert!(SpacetimePauli::identity(g()).support().is_empty());
        let y = SpacetimePauli::single(Grid::new(4, 3), at(3, 2), Pauli::Y).unwrap();
        assert_eq!(y.support(), vec![at(3, 2)]);
        let xx = SpacetimePauli::from_sites(g(), [(at(0, 0), Pauli::X), (at(1, 0), Pauli::X)]).unwrap();
        assert_eq!(xx.support(), vec![at(0, 0), at(1, 0)]);
    }

    #[test]
    fn token_round_trip() {
        let p = SpacetimePauli::parse_tokens(g(), "X 3@2.5 Z 1@0.5 Y 0@1.5").unwrap();
        assert_eq!(p.to_string(), "Z 1@0.5 Y 0@1.5 X 3@2.5");
        assert_eq!(SpacetimePauli::parse_tokens(g(), &p.to_string()).unwrap(), p);
        assert!(SpacetimePauli::parse_tokens(g(), "X 9@0.5").is_err());
        assert!(SpacetimePauli::parse_tokens(g(), "X 1@0").is_err());
        assert!(SpacetimePauli::parse_tokens(g(), "W 1@0.5").is_err());
    }

    #[test]
    fn bad_coordinate_rejected() {
        assert!(matches!(
            SpacetimePauli::single(g(), at(0, 3), Pauli::X),
            Err(PauliError::BadCoordinate(..))
        ));
    }
}
