//! Candidate-encoding universes: exhaustive order-4 enumeration and row
//! permutations of a base matrix, each with a content hash that downstream
//! pair tables are keyed on.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::encoding::{sylvester, Encoding};
use crate::error::{Error, Result};
use crate::parallel;

/// Row permutations beyond this order would exceed any practical table size.
pub const MAX_PERMUTATION_ORDER: usize = 8;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Provenance {
    ExhaustiveOrder4,
    SylvesterRowPermutations { k: u32 },
}

#[derive(Clone, Debug)]
pub struct MatrixUniverse {
    order: usize,
    provenance: Provenance,
    members: Vec<Encoding>,
    hash: [u8; 32],
}

impl MatrixUniverse {
    pub fn new(order: usize, members: Vec<Encoding>, provenance: Provenance) -> Result<Self> {
        if order == 0 {
            return Err(Error::Validation("universe order must be positive".into()));
        }
        for (i, m) in members.iter().enumerate() {
            if m.order() != order {
                return Err(Error::Validation(format!(
                    "universe member {i} has order {} but universe order is {order}",
                    m.order()
                )));
            }
        }
        let hash = content_hash(order, &members);
        Ok(Self { order, provenance, members, hash })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn member(&self, index: usize) -> &Encoding {
        &self.members[index]
    }

    pub fn members(&self) -> &[Encoding] {
        &self.members
    }

    pub fn hash(&self) -> &[u8; 32] {
        &self.hash
    }

    pub fn hash_hex(&self) -> String {
        hex(&self.hash)
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

fn content_hash(order: usize, members: &[Encoding]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"MAGUNIV1");
    h.update((order as u32).to_le_bytes());
    h.update((members.len() as u64).to_le_bytes());
    for m in members {
        // +1 -> 0x01, -1 -> 0x00, row-major.
        let bytes: Vec<u8> = m.cells().iter().map(|&c| if c > 0 { 1u8 } else { 0u8 }).collect();
        h.update(&bytes);
    }
    h.finalize().into()
}

/// Member `index` has cell `k` (row-major) positive iff bit `k` of `index` is set.
pub fn order4_encoding(index: u16) -> Encoding {
    let cells: Vec<i8> =
        (0..16).map(|k| if index & (1u16 << k) != 0 { 1i8 } else { -1i8 }).collect();
    Encoding::new(4, cells, None).expect("order-4 cells are always valid")
}

/// All 2^16 sign matrices of order 4.
pub fn enumerate_order4() -> MatrixUniverse {
    let members: Vec<Encoding> = (0..=u16::MAX).map(order4_encoding).collect();
    MatrixUniverse::new(4, members, Provenance::ExhaustiveOrder4)
        .expect("order-4 enumeration is well formed")
}

/// Keeps only members satisfying the Hadamard property; provenance is preserved.
pub fn filter_hadamard(universe: &MatrixUniverse) -> Result<MatrixUniverse> {
    let keep = parallel::map_indexed(universe.len(), |i| universe.member(i).is_hadamard());
    retain(universe, &keep)
}

pub fn filter_hadamard_seq(universe: &MatrixUniverse) -> Result<MatrixUniverse> {
    let keep = parallel::map_indexed_seq(universe.len(), |i| universe.member(i).is_hadamard());
    retain(universe, &keep)
}

fn retain(universe: &MatrixUniverse, keep: &[bool]) -> Result<MatrixUniverse> {
    let members: Vec<Encoding> = universe
        .members()
        .iter()
        .zip(keep)
        .filter_map(|(m, &k)| if k { Some(m.clone()) } else { None })
        .collect();
    MatrixUniverse::new(universe.order(), members, universe.provenance().clone())
}

/// All `order!` row orderings of `base`, in lexicographic permutation order.
/// The identity permutation comes first, so member 0 is `base` itself.
pub fn permute_rows(base: &Encoding) -> Result<Vec<Encoding>> {
    let n = base.order();
    if n > MAX_PERMUTATION_ORDER {
        return Err(Error::SizeLimit(format!(
            "row permutations of order {n} exceed the supported maximum of {MAX_PERMUTATION_ORDER}"
        )));
    }
    let perms = itertools::Itertools::permutations(0..n, n);
    let mut members = Vec::new();
    for perm in perms {
        let mut cells = Vec::with_capacity(n * n);
        for &src in &perm {
            for j in 0..n {
                cells.push(base.get(src, j));
            }
        }
        members.push(Encoding::new(n, cells, None)?);
    }
    Ok(members)
}

/// Universe of all row permutations of the normalized Sylvester matrix of
/// order 2^k.
pub fn sylvester_permutation_universe(k: u32) -> Result<MatrixUniverse> {
    let base = sylvester(k)?;
    let members = permute_rows(&base)?;
    MatrixUniverse::new(base.order(), members, Provenance::SylvesterRowPermutations { k })
}

/// Serializable description from which a universe can be rebuilt exactly.
/// Permutation universes store the base matrix plus row index arrays; the
/// exhaustive order-4 universe is implicit. The hash guards against drift.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct UniverseManifest {
    pub provenance: Provenance,
    pub order: usize,
    pub count: usize,
    pub hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<Encoding>,
}

impl UniverseManifest {
    pub fn describe(universe: &MatrixUniverse) -> Self {
        let base = match universe.provenance() {
            Provenance::ExhaustiveOrder4 => None,
            Provenance::SylvesterRowPermutations { .. } => Some(universe.member(0).clone()),
        };
        Self {
            provenance: universe.provenance().clone(),
            order: universe.order(),
            count: universe.len(),
            hash: universe.hash_hex(),
            base,
        }
    }

    /// Reconstructs the universe and verifies its content hash.
    pub fn rebuild(&self) -> Result<MatrixUniverse> {
        let universe = match &self.provenance {
            Provenance::ExhaustiveOrder4 => enumerate_order4(),
            Provenance::SylvesterRowPermutations { k } => sylvester_permutation_universe(*k)?,
        };
        if universe.hash_hex() != self.hash {
            return Err(Error::Cache(format!(
                "universe manifest hash {} does not match rebuilt universe {}",
                self.hash,
                universe.hash_hex()
            )));
        }
        if universe.len() != self.count || universe.order() != self.order {
            return Err(Error::Cache("universe manifest shape mismatch".into()));
        }
        Ok(universe)
    }
}
