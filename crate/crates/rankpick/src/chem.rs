//! Molecular structures: SMILES parsing, circular fingerprints, Tanimoto
//! similarity.

pub mod fingerprint;
pub mod smiles;

pub use fingerprint::{morgan_fingerprint, tanimoto, Fingerprint};
pub use smiles::{parse_smiles, AtomRecord, Bond, BondOrder, ChemError, MolGraph, SmilesError, SmilesErrorKind};
