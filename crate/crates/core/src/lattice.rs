//! Lattice vectors in Z^d for d <= 3.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::{Add, Neg, Sub};

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 3;

/// A point of Z^d stored inline; unused trailing coordinates are zero.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LatticeVector {
    d: u8,
    c: [i64; MAX_DIM],
}

impl LatticeVector {
    pub fn new(coords: &[i64]) -> Result<Self> {
        if coords.is_empty() || coords.len() > MAX_DIM {
            return Err(Error::contract(format!(
                "lattice dimension {} outside 1..={MAX_DIM}",
                coords.len()
            )));
        }
        let mut c = [0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Ok(Self {
            d: coords.len() as u8,
            c,
        })
    }

    /// Panics on a bad dimension; for internal callers that already validated `d`.
    pub fn from_array(d: usize, c: [i64; MAX_DIM]) -> Self {
        assert!((1..=MAX_DIM).contains(&d));
        debug_assert!(c[d..].iter().all(|&x| x == 0));
        Self { d: d as u8, c }
    }

    pub fn zero(d: usize) -> Self {
        Self::from_array(d, [0; MAX_DIM])
    }

    pub fn unit(d: usize, axis: usize) -> Self {
        let mut c = [0; MAX_DIM];
        c[axis] = 1;
        Self::from_array(d, c)
    }

    pub fn dim(&self) -> usize {
        self.d as usize
    }

    pub fn coords(&self) -> &[i64] {
        &self.c[..self.d as usize]
    }

    pub fn raw(&self) -> [i64; MAX_DIM] {
        self.c
    }

    pub fn is_zero(&self) -> bool {
        self.c == [0; MAX_DIM]
    }

    /// Squared Euclidean norm, evaluated in floating point so huge jumps cannot overflow.
    pub fn norm2(&self) -> f64 {
        self.coords().iter().map(|&x| (x as f64) * (x as f64)).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm2().sqrt()
    }

    pub fn max_norm(&self) -> i64 {
        self.coords().iter().map(|x| x.abs()).max().unwrap_or(0)
    }

    pub fn dot(&self, a: &[f64]) -> f64 {
        self.coords()
            .iter()
            .zip(a)
            .map(|(&x, &y)| x as f64 * y)
            .sum()
    }
}

impl Add for LatticeVector {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        debug_assert_eq!(self.d, o.d);
        let mut c = self.c;
        for (x, y) in c.iter_mut().zip(o.c) {
            *x += y;
        }
        Self { d: self.d, c }
    }
}

impl Sub for LatticeVector {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self + (-o)
    }
}

impl Neg for LatticeVector {
    type Output = Self;
    fn neg(self) -> Self {
        let mut c = self.c;
        for x in c.iter_mut() {
            *x = -*x;
        }
        Self { d: self.d, c }
    }
}

impl fmt::Debug for LatticeVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.coords())
    }
}

impl fmt::Display for LatticeVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.coords().iter().map(|x| x.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_dimension() {
        assert!(LatticeVector::new(&[]).is_err());
        assert!(LatticeVector::new(&[1, 2, 3, 4]).is_err());
    }

    #[test]
    fn norms() {
        let z = LatticeVector::new(&[3, -4]).unwrap();
        assert_eq!(z.norm2(), 25.0);
        assert_eq!(z.max_norm(), 4);
        assert_eq!((-z).coords(), &[-3, 4]);
        assert!((z - z).is_zero());
    }
}
