//! Finite groups given by an explicit multiplication table.

use crate::error::{Result, SptError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteGroup {
    names: Vec<String>,
    table: Vec<Vec<usize>>,
    identity: usize,
    inverses: Vec<usize>,
}

impl FiniteGroup {
    /// Validate a Cayley table: `table[g][h]` is the index of g·h.
    pub fn new(names: Vec<String>, table: Vec<Vec<usize>>) -> Result<Self> {
        let n = names.len();
        if n == 0 {
            return Err(SptError::Validation("group has no elements".into()));
        }
        let mut sorted = names.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != n {
            return Err(SptError::Validation("element names must be distinct".into()));
        }
        if table.len() != n || table.iter().any(|row| row.len() != n) {
            return Err(SptError::Validation(format!("multiplication table must be {n}×{n}")));
        }
        if table.iter().flatten().any(|&x| x >= n) {
            return Err(SptError::Validation("multiplication table entry out of range".into()));
        }
        let identity = (0..n)
            .find(|&e| (0..n).all(|g| table[e][g] == g && table[g][e] == g))
            .ok_or_else(|| SptError::Validation("multiplication table has no identity".into()))?;
        for g in 0..n {
            for h in 0..n {
                for k in 0..n {
                    if table[table[g][h]][k] != table[g][table[h][k]] {
                        return Err(SptError::Validation(format!(
                            "multiplication is not associative on ({}, {}, {})",
                            names[g], names[h], names[k]
                        )));
                    }
                }
            }
        }
        let mut inverses = Vec::with_capacity(n);
        for g in 0..n {
            let inv = (0..n)
                .find(|&h| table[g][h] == identity && table[h][g] == identity)
                .ok_or_else(|| SptError::Validation(format!("element {} has no inverse", names[g])))?;
            inverses.push(inv);
        }
        Ok(FiniteGroup { names, table, identity, inverses })
    }

    /// Z_n with elements named "0", …, "n−1".
    pub fn cyclic(n: usize) -> Self {
        let names = (0..n).map(|i| i.to_string()).collect();
        let table = (0..n).map(|g| (0..n).map(|h| (g + h) % n).collect()).collect();
        FiniteGroup::new(names, table).expect("cyclic group table is valid")
    }

    /// Z2×Z2 = {e, x, y, z} with x·y = z and cyclic permutations.
    pub fn z2xz2() -> Self {
        let names = ["e", "x", "y", "z"].iter().map(|s| s.to_string()).collect();
        // bit encoding: e=00, x=01, y=10, z=11 and multiplication is XOR
        let table = (0..4).map(|g| (0..4).map(|h| g ^ h).collect()).collect();
        FiniteGroup::new(names, table).expect("Klein four-group table is valid")
    }

    pub fn order(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, g: usize) -> &str {
        &self.names[g]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn table(&self) -> &[Vec<usize>] {
        &self.table
    }

    pub fn mul(&self, g: usize, h: usize) -> usize {
        self.table[g][h]
    }

    pub fn identity(&self) -> usize {
        self.identity
    }

    pub fn inverse(&self, g: usize) -> usize {
        self.inverses[g]
    }

    pub fn is_abelian(&self) -> bool {
        (0..self.order()).all(|g| (0..self.order()).all(|h| self.table[g][h] == self.table[h][g]))
    }
}
