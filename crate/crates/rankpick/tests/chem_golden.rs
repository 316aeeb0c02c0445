//! Hand-counted structures for a small corpus of well-known molecules.
//!
//! Atom and bond counts, ring membership, aromatic flags, and implicit
//! hydrogen totals below were worked out by hand from the structures, so a
//! parser regression shows up as a disagreement with an independently
//! derived number rather than with the parser's own earlier output.

use rankpick::chem::{morgan_fingerprint, parse_smiles, tanimoto, BondOrder};

struct Golden {
    smiles: &'static str,
    atoms: usize,
    bonds: usize,
    /// Total hydrogen count over all atoms (explicit plus derived).
    hydrogens: u32,
    /// Number of atoms that lie on a ring.
    ring_atoms: usize,
}

const GOLDEN: &[Golden] = &[
    // methane: CH4
    Golden { smiles: "C", atoms: 1, bonds: 0, hydrogens: 4, ring_atoms: 0 },
    // ethanol: C2H6O
    Golden { smiles: "CCO", atoms: 3, bonds: 2, hydrogens: 6, ring_atoms: 0 },
    // benzene: C6H6
    Golden { smiles: "c1ccccc1", atoms: 6, bonds: 6, hydrogens: 6, ring_atoms: 6 },
    // isobutane: C4H10
    Golden { smiles: "CC(C)C", atoms: 4, bonds: 3, hydrogens: 10, ring_atoms: 0 },
    // formaldehyde: CH2O
    Golden { smiles: "C=O", atoms: 2, bonds: 1, hydrogens: 2, ring_atoms: 0 },
    // hydrogen cyanide: HCN
    Golden { smiles: "C#N", atoms: 2, bonds: 1, hydrogens: 1, ring_atoms: 0 },
    // acetic acid: C2H4O2
    Golden { smiles: "CC(=O)O", atoms: 4, bonds: 3, hydrogens: 4, ring_atoms: 0 },
    // naphthalene: C10H8
    Golden { smiles: "c1ccc2ccccc2c1", atoms: 10, bonds: 11, hydrogens: 8, ring_atoms: 10 },
    // cyclohexane: C6H12
    Golden { smiles: "C1CCCCC1", atoms: 6, bonds: 6, hydrogens: 12, ring_atoms: 6 },
    // paracetamol: C8H9NO2
    Golden { smiles: "CC(=O)Nc1ccc(O)cc1", atoms: 11, bonds: 11, hydrogens: 9, ring_atoms: 6 },
    // alanine (stereo discarded): C3H7NO2
    Golden { smiles: "N[C@@H](C)C(=O)O", atoms: 6, bonds: 5, hydrogens: 7, ring_atoms: 0 },
    // sodium chloride as two disconnected ions
    Golden { smiles: "[Na+].[Cl-]", atoms: 2, bonds: 0, hydrogens: 0, ring_atoms: 0 },
    // benzoic acid: C7H6O2
    Golden { smiles: "O=C(O)c1ccccc1", atoms: 9, bonds: 9, hydrogens: 6, ring_atoms: 6 },
    // cyclopropane via %nn ring closure: C3H6
    Golden { smiles: "C%10CC%10", atoms: 3, bonds: 3, hydrogens: 6, ring_atoms: 3 },
    // carbon-13 methane
    Golden { smiles: "[13CH4]", atoms: 1, bonds: 0, hydrogens: 4, ring_atoms: 0 },
    // ammonium cation
    Golden { smiles: "[NH4+]", atoms: 1, bonds: 0, hydrogens: 4, ring_atoms: 0 },
    // pyridine: C5H5N
    Golden { smiles: "c1ccncc1", atoms: 6, bonds: 6, hydrogens: 5, ring_atoms: 6 },
    // tert-butylbenzene: C10H14
    Golden { smiles: "CC(C)(C)c1ccccc1", atoms: 10, bonds: 10, hydrogens: 14, ring_atoms: 6 },
    // bromochloroiodomethane: CHBrClI
    Golden { smiles: "ClC(Br)I", atoms: 4, bonds: 3, hydrogens: 1, ring_atoms: 0 },
    // trans-2-butene (stereo discarded): C4H8
    Golden { smiles: "C/C=C/C", atoms: 4, bonds: 3, hydrogens: 8, ring_atoms: 0 },
];

#[test]
fn corpus_matches_hand_counts() {
    for entry in GOLDEN {
        let graph = parse_smiles(entry.smiles).unwrap_or_else(|e| {
            panic!("{} failed to parse: {e}", entry.smiles);
        });
        assert_eq!(graph.atom_count(), entry.atoms, "atoms of {}", entry.smiles);
        assert_eq!(graph.bond_count(), entry.bonds, "bonds of {}", entry.smiles);
        let hydrogens: u32 = (0..graph.atom_count())
            .map(|i| graph.implicit_hydrogens(i) as u32)
            .sum();
        assert_eq!(hydrogens, entry.hydrogens, "hydrogens of {}", entry.smiles);
        let ring_atoms = graph.atoms().iter().filter(|a| a.in_ring).count();
        assert_eq!(ring_atoms, entry.ring_atoms, "ring atoms of {}", entry.smiles);
    }
}

#[test]
fn aromatic_rings_use_aromatic_bonds() {
    for smiles in ["c1ccccc1", "c1ccncc1", "c1ccc2ccccc2c1"] {
        let graph = parse_smiles(smiles).unwrap();
        assert!(
            graph.bonds().iter().all(|b| b.order == BondOrder::Aromatic),
            "{smiles}"
        );
    }
}

#[test]
fn corpus_fingerprints_are_stable_under_reversal() {
    // Reversing atom order is the cheapest nontrivial relabeling; the
    // acceptance suite stresses random permutations at scale.
    for entry in GOLDEN {
        let graph = parse_smiles(entry.smiles).unwrap();
        let perm: Vec<usize> = (0..graph.atom_count()).rev().collect();
        let reversed = graph.permuted(&perm).unwrap();
        let a = morgan_fingerprint(&graph, 3, 2048).unwrap();
        let b = morgan_fingerprint(&reversed, 3, 2048).unwrap();
        assert_eq!(a, b, "fingerprint of {} changed under relabeling", entry.smiles);
    }
}

#[test]
fn similar_molecules_score_higher_than_dissimilar() {
    let fp = |s: &str| {
        let graph = parse_smiles(s).unwrap();
        morgan_fingerprint(&graph, 3, 2048).unwrap()
    };
    let ethanol = fp("CCO");
    let propanol = fp("CCCO");
    let benzene = fp("c1ccccc1");
    let close = tanimoto(&ethanol, &propanol).unwrap();
    let far = tanimoto(&ethanol, &benzene).unwrap();
    assert!(close > far, "expected {close} > {far}");
    assert_eq!(tanimoto(&benzene, &benzene).unwrap(), 1.0);
}
