//! Upper-triangular table of pair scores for every unordered member pair of a
//! universe, stored as raw numerators over order^2 and cached on disk keyed by
//! the universe content hash.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::bits::{self, MAX_PACKED_ORDER};
use crate::error::{Error, Result};
use crate::parallel;
use crate::rational::{ratio, Rational};
use crate::search::universe::{hex, MatrixUniverse};

const CACHE_MAGIC: &[u8; 8] = b"MAGPAIRS";
/// Bump on any change to the score semantics behind the stored numerators,
/// not just the container layout; stale caches must never be read as fresh.
const CACHE_VERSION: u32 = 3;

#[derive(Debug)]
pub struct PairTable {
    order: usize,
    len: usize,
    universe_hash: [u8; 32],
    nums: Vec<i16>,
}

impl PairTable {
    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of universe members the table covers.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn universe_hash(&self) -> &[u8; 32] {
        &self.universe_hash
    }

    pub fn hash_hex(&self) -> String {
        hex(&self.universe_hash)
    }

    pub fn entry_count(&self) -> usize {
        self.len * self.len.saturating_sub(1) / 2
    }

    #[inline]
    fn tri_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j && j < self.len);
        i * (2 * self.len - i - 1) / 2 + (j - i - 1)
    }

    /// Worst-case numerator (over order^2) for the unordered pair `{i, j}`.
    #[inline]
    pub fn numerator(&self, i: usize, j: usize) -> i16 {
        assert!(i != j, "pair table holds distinct pairs only");
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.nums[self.tri_index(a, b)]
    }

    pub fn score(&self, i: usize, j: usize) -> Rational {
        ratio(self.numerator(i, j) as i64, (self.order * self.order) as i64)
    }

    pub fn build(universe: &MatrixUniverse) -> Result<PairTable> {
        Self::build_impl(universe, true)
    }

    pub fn build_seq(universe: &MatrixUniverse) -> Result<PairTable> {
        Self::build_impl(universe, false)
    }

    fn build_impl(universe: &MatrixUniverse, par: bool) -> Result<PairTable> {
        let n = universe.order();
        if n > MAX_PACKED_ORDER {
            return Err(Error::SizeLimit(format!(
                "pair tables require order <= {MAX_PACKED_ORDER}, got {n}"
            )));
        }
        let len = universe.len();
        let rots: Vec<[u64; 4]> =
            universe.members().iter().map(bits::pack_rotations).collect();
        let table = bits::offset_table(n);
        let total = len * len.saturating_sub(1) / 2;
        let mut nums = vec![0i16; total];
        {
            let mut slices = Vec::with_capacity(len.saturating_sub(1));
            let mut rest: &mut [i16] = &mut nums;
            for i in 0..len.saturating_sub(1) {
                let (row, tail) = rest.split_at_mut(len - 1 - i);
                slices.push((i, row));
                rest = tail;
            }
            let fill = |i: usize, row: &mut [i16]| {
                let a = rots[i][0];
                for (o, j) in (i + 1..len).enumerate() {
                    row[o] = bits::pair_score_num(a, &rots[j], table) as i16;
                }
            };
            if par {
                parallel::for_each_slice(slices, fill);
            } else {
                parallel::for_each_slice_seq(slices, fill);
            }
        }
        Ok(PairTable { order: n, len, universe_hash: *universe.hash(), nums })
    }

    pub fn cache_file_name(universe: &MatrixUniverse) -> String {
        format!("pairs-{}.bin", &universe.hash_hex()[..16])
    }

    pub fn write_cache(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::with_capacity(1 << 20, File::create(path)?);
        w.write_all(CACHE_MAGIC)?;
        w.write_all(&CACHE_VERSION.to_le_bytes())?;
        w.write_all(&(self.order as u32).to_le_bytes())?;
        w.write_all(&(self.len as u64).to_le_bytes())?;
        w.write_all(&self.universe_hash)?;
        let mut buf = Vec::with_capacity(64 * 1024);
        for chunk in self.nums.chunks(32 * 1024) {
            buf.clear();
            for v in chunk {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_cache(path: impl AsRef<Path>) -> Result<PairTable> {
        let mut r = BufReader::with_capacity(1 << 20, File::open(path)?);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != CACHE_MAGIC {
            return Err(Error::Cache("pair cache magic mismatch".into()));
        }
        let mut u32buf = [0u8; 4];
        r.read_exact(&mut u32buf)?;
        let version = u32::from_le_bytes(u32buf);
        if version != CACHE_VERSION {
            return Err(Error::Cache(format!(
                "pair cache version {version} unsupported (expected {CACHE_VERSION})"
            )));
        }
        r.read_exact(&mut u32buf)?;
        let order = u32::from_le_bytes(u32buf) as usize;
        let mut u64buf = [0u8; 8];
        r.read_exact(&mut u64buf)?;
        let len = u64::from_le_bytes(u64buf) as usize;
        if order == 0 || order > MAX_PACKED_ORDER {
            return Err(Error::Cache(format!("pair cache order {order} out of range")));
        }
        let mut universe_hash = [0u8; 32];
        r.read_exact(&mut universe_hash)?;
        let total = len * len.saturating_sub(1) / 2;
        let mut nums = Vec::with_capacity(total);
        let n2 = (order * order) as i16;
        let mut bytes = vec![0u8; 64 * 1024];
        let mut remaining = total;
        while remaining > 0 {
            let take = remaining.min(32 * 1024);
            let slice = &mut bytes[..take * 2];
            r.read_exact(slice)?;
            for pair in slice.chunks_exact(2) {
                let v = i16::from_le_bytes([pair[0], pair[1]]);
                if v < -n2 || v > n2 {
                    return Err(Error::Cache(format!(
                        "pair cache numerator {v} outside [-{n2}, {n2}]"
                    )));
                }
                nums.push(v);
            }
            remaining -= take;
        }
        let mut trailing = [0u8; 1];
        if r.read(&mut trailing)? != 0 {
            return Err(Error::Cache("pair cache has trailing bytes".into()));
        }
        Ok(PairTable { order, len, universe_hash, nums })
    }

    /// Loads the table for `universe` from `dir`, building and persisting it
    /// when absent. With `build_allowed` false a missing file is a cache
    /// error; a present-but-mismatched file is always a cache error.
    /// Returns the table and whether it came from disk.
    pub fn load_or_build(
        universe: &MatrixUniverse,
        dir: impl AsRef<Path>,
        build_allowed: bool,
    ) -> Result<(PairTable, bool)> {
        let path: PathBuf = dir.as_ref().join(Self::cache_file_name(universe));
        if path.exists() {
            // A stale or damaged cache is rebuilt when building is allowed;
            // propagating the parse error would strand the caller behind a
            // file that a rebuild overwrites anyway.
            match Self::read_cache(&path) {
                Ok(table) => {
                    table.check_universe(universe)?;
                    return Ok((table, true));
                }
                Err(err) if !build_allowed => return Err(err),
                Err(_) => {}
            }
        }
        if !build_allowed {
            return Err(Error::Cache(format!(
                "pair cache {} not found and building is disabled",
                path.display()
            )));
        }
        let table = Self::build(universe)?;
        std::fs::create_dir_all(dir.as_ref())?;
        table.write_cache(&path)?;
        Ok((table, false))
    }

    pub fn check_universe(&self, universe: &MatrixUniverse) -> Result<()> {
        if self.universe_hash != *universe.hash() {
            return Err(Error::Cache(format!(
                "pair table was built for universe {} but got {}",
                self.hash_hex(),
                universe.hash_hex()
            )));
        }
        if self.len != universe.len() || self.order != universe.order() {
            return Err(Error::Cache("pair table shape does not match universe".into()));
        }
        Ok(())
    }
}
