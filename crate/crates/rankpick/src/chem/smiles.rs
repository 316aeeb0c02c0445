//! SMILES parsing into molecular graphs.
//!
//! The supported grammar covers the organic subset (`B C N O P S F Cl Br I`),
//! lowercase aromatic atoms (`b c n o p s`), bracket atoms with isotope,
//! charge and hydrogen counts, bond symbols `- = # :`, branches, and ring
//! closures including the `%nn` two-digit form. Stereo markers (`/`, `\`,
//! `@`, `@@`) and atom maps are accepted and discarded. Dots separate
//! disconnected components.
//!
//! Implicit hydrogens are never materialized as atoms; they are derived on
//! demand from standard valences (see [`MolGraph::implicit_hydrogens`]).

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

/// Order of a bond between two atoms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Contribution of one bond of this order to an atom's valence, times two
    /// (aromatic counts as 1.5, kept integral by doubling).
    fn doubled_valence(self) -> u32 {
        match self {
            BondOrder::Single => 2,
            BondOrder::Double => 4,
            BondOrder::Triple => 6,
            BondOrder::Aromatic => 3,
        }
    }
}

/// A bond between two atoms, stored with `a < b` normalized endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
}

/// One atom of a parsed molecule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AtomRecord {
    /// Atomic number (1..=118).
    pub atomic_number: u8,
    pub formal_charge: i32,
    pub aromatic: bool,
    /// Hydrogen count given explicitly in a bracket atom; `None` for
    /// organic-subset atoms, where the count is derivable from valence.
    pub explicit_hydrogens: Option<u8>,
    /// Whether the atom lies on a cycle. Computed when the graph is built.
    pub in_ring: bool,
}

impl AtomRecord {
    pub fn symbol(&self) -> &'static str {
        ELEMENTS[(self.atomic_number - 1) as usize]
    }
}

/// Parsed molecular graph: atoms, bonds, and derived adjacency.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MolGraph {
    atoms: Vec<AtomRecord>,
    bonds: Vec<Bond>,
    adjacency: Vec<Vec<(usize, usize)>>,
}

/// Where in the input a parse error occurred, and what went wrong.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at byte {offset}")]
pub struct SmilesError {
    pub offset: usize,
    pub kind: SmilesErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SmilesErrorKind {
    #[error("empty SMILES")]
    Empty,
    #[error("unbalanced parenthesis")]
    UnbalancedParenthesis,
    #[error("unmatched ring closure {0}")]
    UnmatchedRingClosure(u16),
    #[error("unknown atom symbol")]
    UnknownAtomSymbol,
    #[error("bond symbol with no following atom")]
    DanglingBond,
    #[error("expected ']' to close bracket atom")]
    UnclosedBracket,
    #[error("ring closure bond orders disagree")]
    RingBondMismatch,
    #[error("duplicate bond between the same atom pair")]
    DuplicateBond,
    #[error("ring closure bonds an atom to itself")]
    SelfBond,
    #[error("aromatic bond on non-aromatic atom")]
    AromaticBondOnAliphatic,
    #[error("ring closure before any atom")]
    RingClosureWithoutAtom,
    #[error("branch before any atom")]
    BranchWithoutAtom,
    #[error("expected two digits after %")]
    BadPercentClosure,
    #[error("component separator inside a branch")]
    DotInBranch,
}

use SmilesErrorKind::*;

/// Errors from graph construction or fingerprint arithmetic.
#[derive(Debug, Error)]
pub enum ChemError {
    #[error(transparent)]
    Smiles(#[from] SmilesError),
    #[error("fingerprint width mismatch: {left} vs {right} bits")]
    WidthMismatch { left: usize, right: usize },
    #[error("fingerprint width must be positive")]
    ZeroWidth,
    #[error("invalid hex fingerprint: {0}")]
    BadHex(String),
    #[error("permutation is not a bijection over the atom indices")]
    BadPermutation,
    #[error("invalid molecular graph: {0}")]
    BadGraph(String),
}

/// Element symbols indexed by atomic number minus one.
const ELEMENTS: [&str; 118] = [
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al", "Si", "P", "S", "Cl",
    "Ar", "K", "Ca", "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As",
    "Se", "Br", "Kr", "Rb", "Sr", "Y", "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In",
    "Sn", "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd", "Pm", "Sm", "Eu", "Gd", "Tb",
    "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl",
    "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U", "Np", "Pu", "Am", "Cm", "Bk",
    "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs", "Mt", "Ds", "Rg", "Cn",
    "Nh", "Fl", "Mc", "Lv", "Ts", "Og",
];

fn atomic_number(symbol: &str) -> Option<u8> {
    ELEMENTS
        .iter()
        .position(|&s| s == symbol)
        .map(|i| (i + 1) as u8)
}

/// Standard valence lists used to derive implicit hydrogen counts.
fn default_valences(atomic_number: u8) -> &'static [u32] {
    match atomic_number {
        5 => &[3],        // B
        6 => &[4],        // C
        7 => &[3, 5],     // N
        8 => &[2],        // O
        15 => &[3, 5],    // P
        16 => &[2, 4, 6], // S
        9 | 17 | 35 | 53 => &[1],
        _ => &[],
    }
}

impl MolGraph {
    /// Builds a graph from atoms and bonds, validating the structural
    /// invariants and computing adjacency and ring flags.
    pub fn new(atoms: Vec<AtomRecord>, bonds: Vec<Bond>) -> Result<Self, ChemError> {
        let n = atoms.len();
        let mut seen = std::collections::HashSet::new();
        let mut normalized = Vec::with_capacity(bonds.len());
        for bond in bonds {
            if bond.a >= n || bond.b >= n {
                return Err(ChemError::BadGraph(format!(
                    "bond endpoint out of range: ({}, {})",
                    bond.a, bond.b
                )));
            }
            if bond.a == bond.b {
                return Err(ChemError::BadGraph(format!("self bond on atom {}", bond.a)));
            }
            let (a, b) = if bond.a < bond.b {
                (bond.a, bond.b)
            } else {
                (bond.b, bond.a)
            };
            if !seen.insert((a, b)) {
                return Err(ChemError::BadGraph(format!("duplicate bond ({a}, {b})")));
            }
            if bond.order == BondOrder::Aromatic && !(atoms[a].aromatic && atoms[b].aromatic) {
                return Err(ChemError::BadGraph(format!(
                    "aromatic bond ({a}, {b}) on non-aromatic atom"
                )));
            }
            normalized.push(Bond { a, b, order: bond.order });
        }
        let mut graph = MolGraph {
            atoms,
            bonds: normalized,
            adjacency: vec![Vec::new(); n],
        };
        for (idx, bond) in graph.bonds.iter().enumerate() {
            graph.adjacency[bond.a].push((bond.b, idx));
            graph.adjacency[bond.b].push((bond.a, idx));
        }
        graph.mark_rings();
        Ok(graph)
    }

    pub fn atoms(&self) -> &[AtomRecord] {
        &self.atoms
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn bond_count(&self) -> usize {
        self.bonds.len()
    }

    /// Neighbors of `atom` as `(neighbor index, bond index)` pairs.
    pub fn neighbors(&self, atom: usize) -> &[(usize, usize)] {
        &self.adjacency[atom]
    }

    /// Number of bonded neighbors that are not hydrogen.
    pub fn heavy_degree(&self, atom: usize) -> usize {
        self.adjacency[atom]
            .iter()
            .filter(|&&(nbr, _)| self.atoms[nbr].atomic_number > 1)
            .count()
    }

    /// Hydrogen count for an atom: the explicit bracket count when present,
    /// otherwise the smallest standard valence that accommodates the bond
    /// order sum (aromatic bonds count 1.5, the sum is rounded up).
    pub fn implicit_hydrogens(&self, atom: usize) -> u8 {
        if let Some(h) = self.atoms[atom].explicit_hydrogens {
            return h;
        }
        let doubled: u32 = self.adjacency[atom]
            .iter()
            .map(|&(_, bond)| self.bonds[bond].order.doubled_valence())
            .sum();
        let used = doubled.div_ceil(2);
        for &valence in default_valences(self.atoms[atom].atomic_number) {
            if valence >= used {
                return (valence - used) as u8;
            }
        }
        0
    }

    /// Relabels atoms so that new position `k` holds old atom `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<MolGraph, ChemError> {
        let n = self.atoms.len();
        if perm.len() != n {
            return Err(ChemError::BadPermutation);
        }
        let mut inverse = vec![usize::MAX; n];
        for (new_idx, &old_idx) in perm.iter().enumerate() {
            if old_idx >= n || inverse[old_idx] != usize::MAX {
                return Err(ChemError::BadPermutation);
            }
            inverse[old_idx] = new_idx;
        }
        let atoms = perm.iter().map(|&old| self.atoms[old].clone()).collect();
        let bonds = self
            .bonds
            .iter()
            .map(|bond| Bond {
                a: inverse[bond.a],
                b: inverse[bond.b],
                order: bond.order,
            })
            .collect();
        MolGraph::new(atoms, bonds)
    }

    /// Flags every atom that lies on a cycle. An atom is on a cycle exactly
    /// when one of its incident edges is not a bridge.
    fn mark_rings(&mut self) {
        let n = self.atoms.len();
        let mut disc = vec![usize::MAX; n];
        let mut low = vec![usize::MAX; n];
        let mut is_bridge = vec![false; self.bonds.len()];
        let mut timer = 0usize;

        for root in 0..n {
            if disc[root] != usize::MAX {
                continue;
            }
            // Iterative DFS: (vertex, incoming bond index, next adjacency slot).
            let mut stack: Vec<(usize, usize, usize)> = vec![(root, usize::MAX, 0)];
            disc[root] = timer;
            low[root] = timer;
            timer += 1;
            while let Some(&mut (v, in_bond, ref mut slot)) = stack.last_mut() {
                if *slot < self.adjacency[v].len() {
                    let (to, bond) = self.adjacency[v][*slot];
                    *slot += 1;
                    if bond == in_bond {
                        continue;
                    }
                    if disc[to] == usize::MAX {
                        disc[to] = timer;
                        low[to] = timer;
                        timer += 1;
                        stack.push((to, bond, 0));
                    } else {
                        low[v] = low[v].min(disc[to]);
                    }
                } else {
                    stack.pop();
                    if let Some(&mut (parent, _, _)) = stack.last_mut() {
                        low[parent] = low[parent].min(low[v]);
                        if low[v] > disc[parent] {
                            is_bridge[in_bond] = true;
                        }
                    }
                }
            }
        }

        for (idx, bond) in self.bonds.iter().enumerate() {
            if !is_bridge[idx] {
                self.atoms[bond.a].in_ring = true;
                self.atoms[bond.b].in_ring = true;
            }
        }
    }
}

impl fmt::Display for MolGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} atoms, {} bonds", self.atoms.len(), self.bonds.len())
    }
}

/// Parses a SMILES string into a [`MolGraph`].
pub fn parse_smiles(text: &str) -> Result<MolGraph, SmilesError> {
    Parser::new(text.as_bytes()).run()
}

struct Parser<'a> {
    input: &'a [u8],
    pos: usize,
    atoms: Vec<AtomRecord>,
    bonds: Vec<Bond>,
    bond_set: std::collections::HashSet<(usize, usize)>,
    prev: Option<usize>,
    pending: Option<(BondOrder, usize)>,
    branch_stack: Vec<(Option<usize>, usize)>,
    ring_open: HashMap<u16, (usize, Option<BondOrder>, usize)>,
}

impl<'a> Parser<'a> {
    fn new(input: &'a [u8]) -> Self {
        Parser {
            input,
            pos: 0,
            atoms: Vec::new(),
            bonds: Vec::new(),
            bond_set: std::collections::HashSet::new(),
            prev: None,
            pending: None,
            branch_stack: Vec::new(),
            ring_open: HashMap::new(),
        }
    }

    fn err(&self, offset: usize, kind: SmilesErrorKind) -> SmilesError {
        SmilesError { offset, kind }
    }

    fn run(mut self) -> Result<MolGraph, SmilesError> {
        if self.input.is_empty() {
            return Err(self.err(0, Empty));
        }
        while self.pos < self.input.len() {
            let offset = self.pos;
            match self.input[offset] {
                b'(' => {
                    if self.prev.is_none() {
                        return Err(self.err(offset, BranchWithoutAtom));
                    }
                    self.branch_stack.push((self.prev, offset));
                    self.pos += 1;
                }
                b')' => {
                    if let Some((bond, at)) = self.pending {
                        let _ = bond;
                        return Err(self.err(at, DanglingBond));
                    }
                    let (saved, _) = self
                        .branch_stack
                        .pop()
                        .ok_or_else(|| self.err(offset, UnbalancedParenthesis))?;
                    self.prev = saved;
                    self.pos += 1;
                }
                b'-' | b'=' | b'#' | b':' | b'/' | b'\\' => {
                    if let Some((_, at)) = self.pending {
                        return Err(self.err(at, DanglingBond));
                    }
                    let order = match self.input[offset] {
                        b'=' => BondOrder::Double,
                        b'#' => BondOrder::Triple,
                        b':' => BondOrder::Aromatic,
                        // `/` and `\` carry stereo information we discard.
                        _ => BondOrder::Single,
                    };
                    self.pending = Some((order, offset));
                    self.pos += 1;
                }
                b'.' => {
                    if let Some((_, at)) = self.pending {
                        return Err(self.err(at, DanglingBond));
                    }
                    if !self.branch_stack.is_empty() {
                        return Err(self.err(offset, DotInBranch));
                    }
                    self.prev = None;
                    self.pos += 1;
                }
                b'0'..=b'9' => {
                    let digit = (self.input[offset] - b'0') as u16;
                    self.pos += 1;
                    self.close_or_open_ring(digit, offset)?;
                }
                b'%' => {
                    if offset + 2 >= self.input.len()
                        || !self.input[offset + 1].is_ascii_digit()
                        || !self.input[offset + 2].is_ascii_digit()
                    {
                        return Err(self.err(offset, BadPercentClosure));
                    }
                    let digit = (self.input[offset + 1] - b'0') as u16 * 10
                        + (self.input[offset + 2] - b'0') as u16;
                    self.pos += 3;
                    self.close_or_open_ring(digit, offset)?;
                }
                b'[' => {
                    let atom = self.parse_bracket_atom()?;
                    self.add_atom(atom, offset)?;
                }
                _ => {
                    let atom = self.parse_bare_atom()?;
                    self.add_atom(atom, offset)?;
                }
            }
        }
        if let Some((_, at)) = self.pending {
            return Err(self.err(at, DanglingBond));
        }
        if let Some(&(_, offset)) = self.branch_stack.last() {
            return Err(self.err(offset, UnbalancedParenthesis));
        }
        if let Some((&digit, &(_, _, offset))) = self
            .ring_open
            .iter()
            .min_by_key(|(_, &(_, _, offset))| offset)
            .map(|(d, e)| (d, e))
        {
            return Err(self.err(offset, UnmatchedRingClosure(digit)));
        }
        if self.atoms.is_empty() {
            return Err(self.err(0, Empty));
        }
        MolGraph::new(self.atoms, self.bonds).map_err(|e| match e {
            ChemError::Smiles(err) => err,
            // Parser-side checks make other construction failures unreachable.
            other => unreachable!("parser produced an invalid graph: {other}"),
        })
    }

    fn parse_bare_atom(&mut self) -> Result<AtomRecord, SmilesError> {
        let offset = self.pos;
        let rest = &self.input[offset..];
        let (symbol, aromatic, len) = match rest {
            [b'C', b'l', ..] => ("Cl", false, 2),
            [b'B', b'r', ..] => ("Br", false, 2),
            [b'B', ..] => ("B", false, 1),
            [b'C', ..] => ("C", false, 1),
            [b'N', ..] => ("N", false, 1),
            [b'O', ..] => ("O", false, 1),
            [b'P', ..] => ("P", false, 1),
            [b'S', ..] => ("S", false, 1),
            [b'F', ..] => ("F", false, 1),
            [b'I', ..] => ("I", false, 1),
            [b'b', ..] => ("B", true, 1),
            [b'c', ..] => ("C", true, 1),
            [b'n', ..] => ("N", true, 1),
            [b'o', ..] => ("O", true, 1),
            [b'p', ..] => ("P", true, 1),
            [b's', ..] => ("S", true, 1),
            _ => return Err(self.err(offset, UnknownAtomSymbol)),
        };
        self.pos += len;
        Ok(AtomRecord {
            atomic_number: atomic_number(symbol).expect("organic subset symbol"),
            formal_charge: 0,
            aromatic,
            explicit_hydrogens: None,
            in_ring: false,
        })
    }

    fn parse_bracket_atom(&mut self) -> Result<AtomRecord, SmilesError> {
        let open = self.pos;
        self.pos += 1; // consume '['
        // Isotope label: parsed and discarded.
        while self.pos < self.input.len() && self.input[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        let sym_at = self.pos;
        let (atomic, aromatic) = self.parse_bracket_symbol(sym_at)?;
        // Chirality markers: parsed and discarded.
        while self.pos < self.input.len() && self.input[self.pos] == b'@' {
            self.pos += 1;
        }
        let mut hydrogens = 0u8;
        if self.pos < self.input.len() && self.input[self.pos] == b'H' {
            self.pos += 1;
            hydrogens = 1;
            if self.pos < self.input.len() && self.input[self.pos].is_ascii_digit() {
                hydrogens = self.input[self.pos] - b'0';
                self.pos += 1;
            }
        }
        let mut charge = 0i32;
        if self.pos < self.input.len() && (self.input[self.pos] == b'+' || self.input[self.pos] == b'-')
        {
            let sign: i32 = if self.input[self.pos] == b'+' { 1 } else { -1 };
            let symbol = self.input[self.pos];
            self.pos += 1;
            if self.pos < self.input.len() && self.input[self.pos].is_ascii_digit() {
                let mut magnitude = 0i32;
                while self.pos < self.input.len() && self.input[self.pos].is_ascii_digit() {
                    magnitude = magnitude * 10 + (self.input[self.pos] - b'0') as i32;
                    self.pos += 1;
                }
                charge = sign * magnitude;
            } else {
                charge = sign;
                while self.pos < self.input.len() && self.input[self.pos] == symbol {
                    charge += sign;
                    self.pos += 1;
                }
            }
        }
        // Atom map label: parsed and discarded.
        if self.pos < self.input.len() && self.input[self.pos] == b':' {
            self.pos += 1;
            while self.pos < self.input.len() && self.input[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
        }
        if self.pos >= self.input.len() || self.input[self.pos] != b']' {
            return Err(self.err(open, UnclosedBracket));
        }
        self.pos += 1;
        Ok(AtomRecord {
            atomic_number: atomic,
            formal_charge: charge,
            aromatic,
            explicit_hydrogens: Some(hydrogens),
            in_ring: false,
        })
    }

    fn parse_bracket_symbol(&mut self, offset: usize) -> Result<(u8, bool), SmilesError> {
        let rest = &self.input[offset..];
        match rest {
            [c @ (b'b' | b'c' | b'n' | b'o' | b'p' | b's'), ..] => {
                self.pos += 1;
                let symbol = (*c as char).to_ascii_uppercase().to_string();
                Ok((atomic_number(&symbol).expect("aromatic subset"), true))
            }
            [first @ b'A'..=b'Z', rest @ ..] => {
                if let [second @ b'a'..=b'z', ..] = rest {
                    let two = [*first, *second];
                    let two = std::str::from_utf8(&two).expect("ascii");
                    if let Some(z) = atomic_number(two) {
                        self.pos += 2;
                        return Ok((z, false));
                    }
                }
                let one = [*first];
                let one = std::str::from_utf8(&one).expect("ascii");
                match atomic_number(one) {
                    Some(z) => {
                        self.pos += 1;
                        Ok((z, false))
                    }
                    None => Err(self.err(offset, UnknownAtomSymbol)),
                }
            }
            _ => Err(self.err(offset, UnknownAtomSymbol)),
        }
    }

    fn add_atom(&mut self, atom: AtomRecord, offset: usize) -> Result<(), SmilesError> {
        let idx = self.atoms.len();
        self.atoms.push(atom);
        if let Some(prev) = self.prev {
            let order = match self.pending.take() {
                Some((order, at)) => {
                    self.check_aromatic_bond(order, prev, idx, at)?;
                    order
                }
                None => self.default_order(prev, idx),
            };
            self.add_bond(prev, idx, order, offset)?;
        } else if let Some((_, at)) = self.pending.take() {
            return Err(self.err(at, DanglingBond));
        }
        self.prev = Some(idx);
        Ok(())
    }

    fn default_order(&self, a: usize, b: usize) -> BondOrder {
        if self.atoms[a].aromatic && self.atoms[b].aromatic {
            BondOrder::Aromatic
        } else {
            BondOrder::Single
        }
    }

    fn check_aromatic_bond(
        &self,
        order: BondOrder,
        a: usize,
        b: usize,
        offset: usize,
    ) -> Result<(), SmilesError> {
        if order == BondOrder::Aromatic && !(self.atoms[a].aromatic && self.atoms[b].aromatic) {
            return Err(self.err(offset, AromaticBondOnAliphatic));
        }
        Ok(())
    }

    fn add_bond(
        &mut self,
        a: usize,
        b: usize,
        order: BondOrder,
        offset: usize,
    ) -> Result<(), SmilesError> {
        let key = (a.min(b), a.max(b));
        if !self.bond_set.insert(key) {
            return Err(self.err(offset, DuplicateBond));
        }
        self.bonds.push(Bond { a, b, order });
        Ok(())
    }

    fn close_or_open_ring(&mut self, digit: u16, offset: usize) -> Result<(), SmilesError> {
        let here = self.prev.ok_or_else(|| self.err(offset, RingClosureWithoutAtom))?;
        match self.ring_open.remove(&digit) {
            Some((other, open_bond, _)) => {
                if other == here {
                    return Err(self.err(offset, SelfBond));
                }
                let close_bond = self.pending.take().map(|(order, _)| order);
                let order = match (open_bond, close_bond) {
                    (None, None) => self.default_order(other, here),
                    (Some(order), None) | (None, Some(order)) => order,
                    (Some(x), Some(y)) if x == y => x,
                    _ => return Err(self.err(offset, RingBondMismatch)),
                };
                self.check_aromatic_bond(order, other, here, offset)?;
                self.add_bond(other, here, order, offset)
            }
            None => {
                let bond = self.pending.take().map(|(order, _)| order);
                self.ring_open.insert(digit, (here, bond, offset));
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(smiles: &str) -> (usize, usize) {
        let graph = parse_smiles(smiles).unwrap();
        (graph.atom_count(), graph.bond_count())
    }

    #[test]
    fn single_atom() {
        let graph = parse_smiles("C").unwrap();
        assert_eq!(graph.atom_count(), 1);
        assert_eq!(graph.bond_count(), 0);
        assert_eq!(graph.atoms()[0].symbol(), "C");
        assert!(!graph.atoms()[0].aromatic);
    }

    #[test]
    fn ethanol_chain() {
        let graph = parse_smiles("CCO").unwrap();
        assert_eq!(graph.atom_count(), 3);
        assert_eq!(graph.bond_count(), 2);
        assert!(graph
            .bonds()
            .iter()
            .all(|b| b.order == BondOrder::Single));
        assert_eq!(graph.neighbors(1).len(), 2);
    }

    #[test]
    fn benzene_is_one_aromatic_ring() {
        let graph = parse_smiles("c1ccccc1").unwrap();
        assert_eq!(graph.atom_count(), 6);
        assert_eq!(graph.bond_count(), 6);
        assert!(graph.atoms().iter().all(|a| a.aromatic && a.in_ring));
        assert!(graph
            .bonds()
            .iter()
            .all(|b| b.order == BondOrder::Aromatic));
        assert!((0..6).all(|i| graph.implicit_hydrogens(i) == 1));
    }

    #[test]
    fn unbalanced_parenthesis_reports_offset() {
        let err = parse_smiles("C(").unwrap_err();
        assert_eq!(err.offset, 1);
        assert_eq!(err.kind, UnbalancedParenthesis);
    }

    #[test]
    fn unmatched_ring_closure_reports_offset() {
        let err = parse_smiles("C1CC").unwrap_err();
        assert_eq!(err.kind, UnmatchedRingClosure(1));
        assert_eq!(err.offset, 1);
    }

    #[test]
    fn bond_with_no_following_atom() {
        let err = parse_smiles("CC=").unwrap_err();
        assert_eq!(err.kind, DanglingBond);
        assert_eq!(err.offset, 2);
    }

    #[test]
    fn unknown_symbol_offset() {
        let err = parse_smiles("CXC").unwrap_err();
        assert_eq!(err.kind, UnknownAtomSymbol);
        assert_eq!(err.offset, 1);
    }

    #[test]
    fn bracket_atoms() {
        let graph = parse_smiles("[13CH4]").unwrap();
        assert_eq!(graph.atom_count(), 1);
        assert_eq!(graph.atoms()[0].explicit_hydrogens, Some(4));
        assert_eq!(graph.atoms()[0].formal_charge, 0);

        let graph = parse_smiles("[NH4+]").unwrap();
        assert_eq!(graph.atoms()[0].formal_charge, 1);
        assert_eq!(graph.atoms()[0].explicit_hydrogens, Some(4));

        let graph = parse_smiles("[Fe+2]").unwrap();
        assert_eq!(graph.atoms()[0].symbol(), "Fe");
        assert_eq!(graph.atoms()[0].formal_charge, 2);

        let graph = parse_smiles("[O--]").unwrap();
        assert_eq!(graph.atoms()[0].formal_charge, -2);
    }

    #[test]
    fn stereo_markers_are_discarded() {
        let (atoms, bonds) = counts("C/C=C/C");
        assert_eq!((atoms, bonds), (4, 3));
        let graph = parse_smiles("N[C@@H](C)C(=O)O").unwrap();
        assert_eq!(graph.atom_count(), 6);
        assert_eq!(graph.bond_count(), 5);
    }

    #[test]
    fn percent_ring_closure() {
        let (atoms, bonds) = counts("C%10CC%10");
        assert_eq!((atoms, bonds), (3, 3));
        let graph = parse_smiles("C%10CC%10").unwrap();
        assert!(graph.atoms().iter().all(|a| a.in_ring));
    }

    #[test]
    fn dot_separates_components() {
        let graph = parse_smiles("[Na+].[Cl-]").unwrap();
        assert_eq!(graph.atom_count(), 2);
        assert_eq!(graph.bond_count(), 0);
    }

    #[test]
    fn ring_bond_order_on_closure() {
        let graph = parse_smiles("C=1CCCCC=1").unwrap();
        let ring_bond = graph
            .bonds()
            .iter()
            .find(|b| b.a == 0 && b.b == 5)
            .unwrap();
        assert_eq!(ring_bond.order, BondOrder::Double);
        assert!(parse_smiles("C=1CCCCC-1").is_err());
        assert!(parse_smiles("C=1CCCCC1").is_ok());
    }

    #[test]
    fn duplicate_and_self_bonds_rejected() {
        assert_eq!(parse_smiles("C11").unwrap_err().kind, SelfBond);
        assert_eq!(parse_smiles("C1C1").unwrap_err().kind, DuplicateBond);
    }

    #[test]
    fn aromatic_bond_needs_aromatic_atoms() {
        assert_eq!(
            parse_smiles("C:C").unwrap_err().kind,
            AromaticBondOnAliphatic
        );
        assert!(parse_smiles("c:c").is_ok());
    }

    #[test]
    fn ring_flags_only_on_cycles() {
        let graph = parse_smiles("CC1CCCCC1").unwrap();
        assert!(!graph.atoms()[0].in_ring);
        assert!((1..7).all(|i| graph.atoms()[i].in_ring));
    }

    #[test]
    fn implicit_hydrogen_counts() {
        let graph = parse_smiles("CC(=O)O").unwrap();
        assert_eq!(graph.implicit_hydrogens(0), 3);
        assert_eq!(graph.implicit_hydrogens(1), 0);
        assert_eq!(graph.implicit_hydrogens(2), 0);
        assert_eq!(graph.implicit_hydrogens(3), 1);
        // Hypervalent sulfur falls through to the next standard valence.
        let graph = parse_smiles("CS(=O)(=O)C").unwrap();
        assert_eq!(graph.implicit_hydrogens(1), 0);
    }

    #[test]
    fn permutation_relabels_consistently() {
        let graph = parse_smiles("CCO").unwrap();
        let permuted = graph.permuted(&[2, 0, 1]).unwrap();
        assert_eq!(permuted.atoms()[0].symbol(), "O");
        assert_eq!(permuted.atom_count(), 3);
        assert_eq!(permuted.bond_count(), 2);
        assert!(graph.permuted(&[0, 0, 1]).is_err());
        assert!(graph.permuted(&[0, 1]).is_err());
    }

    #[test]
    fn empty_input_rejected() {
        assert_eq!(parse_smiles("").unwrap_err().kind, Empty);
    }
}
