//! Circular substructure fingerprints and Tanimoto similarity.
//!
//! Each atom starts from an invariant built on (atomic number, heavy-atom
//! degree, formal charge, hydrogen count, ring flag). For every radius
//! iteration the invariant is rehashed together with the sorted list of
//! (bond order, neighbor invariant) pairs, so two atoms receive the same
//! identifier exactly when their bonded environments match up to that
//! radius. All identifiers collected along the way are folded into a fixed
//! width bit vector by reduction modulo the width.

use super::smiles::{BondOrder, ChemError, MolGraph};

/// Fixed-width bit vector produced by [`morgan_fingerprint`].
///
/// Bits are stored most-significant-first: bit `i` occupies bit
/// `63 - (i % 64)` of word `i / 64`, so the hex form reads left to right in
/// bit order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Fingerprint {
    nbits: usize,
    radius: u32,
    words: Vec<u64>,
}

impl Fingerprint {
    fn empty(nbits: usize, radius: u32) -> Result<Self, ChemError> {
        if nbits == 0 || nbits % 4 != 0 {
            return Err(ChemError::ZeroWidth);
        }
        Ok(Fingerprint {
            nbits,
            radius,
            words: vec![0; nbits.div_ceil(64)],
        })
    }

    /// Builds a fingerprint with exactly the given bits set.
    pub fn from_bits<I>(nbits: usize, radius: u32, bits: I) -> Result<Self, ChemError>
    where
        I: IntoIterator<Item = usize>,
    {
        let mut fp = Fingerprint::empty(nbits, radius)?;
        for bit in bits {
            if bit >= nbits {
                return Err(ChemError::BadHex(format!(
                    "bit {bit} out of range for width {nbits}"
                )));
            }
            fp.set(bit);
        }
        Ok(fp)
    }

    pub fn nbits(&self) -> usize {
        self.nbits
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn popcount(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    pub fn bit(&self, index: usize) -> bool {
        assert!(index < self.nbits, "bit index out of range");
        self.words[index / 64] & (1u64 << (63 - (index % 64))) != 0
    }

    fn set(&mut self, index: usize) {
        self.words[index / 64] |= 1u64 << (63 - (index % 64));
    }

    /// Indices of the set bits in ascending order.
    pub fn set_bits(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nbits).filter(move |&i| self.bit(i))
    }

    /// The bit vector as 0.0/1.0 features, one per bit.
    pub fn to_dense(&self) -> Vec<f64> {
        (0..self.nbits)
            .map(|i| if self.bit(i) { 1.0 } else { 0.0 })
            .collect()
    }

    /// Lowercase hex, one character per four bits, bit 0 first.
    pub fn to_hex(&self) -> String {
        let mut hex = String::with_capacity(self.nbits / 4);
        for word in &self.words {
            hex.push_str(&format!("{word:016x}"));
        }
        hex.truncate(self.nbits / 4);
        hex
    }

    /// Parses the hex form produced by [`Fingerprint::to_hex`]. The radius is
    /// not part of the hex encoding and must be supplied by the caller.
    pub fn from_hex(hex: &str, radius: u32) -> Result<Self, ChemError> {
        if hex.is_empty() {
            return Err(ChemError::BadHex("empty string".into()));
        }
        let mut fp = Fingerprint::empty(hex.len() * 4, radius)?;
        for (pos, ch) in hex.chars().enumerate() {
            let nibble = ch
                .to_digit(16)
                .ok_or_else(|| ChemError::BadHex(format!("invalid hex digit {ch:?}")))?;
            for k in 0..4 {
                if nibble & (1 << (3 - k)) != 0 {
                    fp.set(pos * 4 + k);
                }
            }
        }
        Ok(fp)
    }
}

/// Tanimoto similarity |a AND b| / |a OR b|; 0 when both are empty.
pub fn tanimoto(a: &Fingerprint, b: &Fingerprint) -> Result<f64, ChemError> {
    if a.nbits != b.nbits {
        return Err(ChemError::WidthMismatch {
            left: a.nbits,
            right: b.nbits,
        });
    }
    let mut intersection = 0u64;
    let mut union = 0u64;
    for (x, y) in a.words.iter().zip(&b.words) {
        intersection += (x & y).count_ones() as u64;
        union += (x | y).count_ones() as u64;
    }
    if union == 0 {
        Ok(0.0)
    } else {
        Ok(intersection as f64 / union as f64)
    }
}

/// Circular fingerprint of the given radius over `nbits` bits.
///
/// `nbits` must be a positive multiple of four so the fingerprint has an
/// exact hex form.
pub fn morgan_fingerprint(
    graph: &MolGraph,
    radius: u32,
    nbits: usize,
) -> Result<Fingerprint, ChemError> {
    let mut fp = Fingerprint::empty(nbits, radius)?;
    let n = graph.atom_count();
    let mut invariants: Vec<u64> = (0..n).map(|i| initial_invariant(graph, i)).collect();
    let mut identifiers: std::collections::HashSet<u64> = invariants.iter().copied().collect();

    let mut scratch: Vec<(u8, u64)> = Vec::new();
    for _ in 0..radius {
        let mut next = invariants.clone();
        for atom in 0..n {
            let neighbors = graph.neighbors(atom);
            if neighbors.is_empty() {
                continue;
            }
            scratch.clear();
            for &(nbr, bond) in neighbors {
                scratch.push((bond_code(graph.bonds()[bond].order), invariants[nbr]));
            }
            scratch.sort_unstable();
            let mut words = Vec::with_capacity(1 + 2 * scratch.len());
            words.push(invariants[atom]);
            for &(code, inv) in &scratch {
                words.push(code as u64);
                words.push(inv);
            }
            let id = hash_words(&words);
            next[atom] = id;
            identifiers.insert(id);
        }
        invariants = next;
    }

    for id in identifiers {
        fp.set((id % nbits as u64) as usize);
    }
    Ok(fp)
}

fn bond_code(order: BondOrder) -> u8 {
    match order {
        BondOrder::Single => 1,
        BondOrder::Double => 2,
        BondOrder::Triple => 3,
        BondOrder::Aromatic => 4,
    }
}

fn initial_invariant(graph: &MolGraph, atom: usize) -> u64 {
    let record = &graph.atoms()[atom];
    hash_words(&[
        record.atomic_number as u64,
        graph.heavy_degree(atom) as u64,
        record.formal_charge as i64 as u64,
        graph.implicit_hydrogens(atom) as u64,
        record.in_ring as u64,
    ])
}

use crate::util::mix64;

/// Order-sensitive hash of a word sequence, length folded in last.
fn hash_words(words: &[u64]) -> u64 {
    let mut h = 0x8c90_3d25_ecb1_d1edu64;
    for &w in words {
        h = mix64(h ^ w);
    }
    mix64(h ^ words.len() as u64)
}
