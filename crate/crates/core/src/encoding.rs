use crate::error::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Largest Sylvester exponent accepted by [`sylvester`]: order 2^6 = 64.
pub const DEFAULT_MAX_SYLVESTER_K: u32 = 6;

/// A square ±1 matrix describing one magnetic face, row-major.
///
/// Cell +1 is a north-up magnet, -1 south-up. Construction validates shape
/// and cell values, so every `Encoding` in circulation is well-formed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "EncodingRepr", into = "EncodingRepr")]
pub struct Encoding {
    order: usize,
    label: Option<String>,
    cells: Vec<i8>,
}

/// On-disk JSON shape: `{"order": 8, "label": "...", "rows": [[1,-1,...],...]}`.
#[derive(Serialize, Deserialize)]
struct EncodingRepr {
    order: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    rows: Vec<Vec<i8>>,
}

impl TryFrom<EncodingRepr> for Encoding {
    type Error = Error;
    fn try_from(r: EncodingRepr) -> Result<Self> {
        if r.rows.len() != r.order {
            return Err(Error::Validation(format!(
                "declared order {} but {} rows",
                r.order,
                r.rows.len()
            )));
        }
        let mut cells = Vec::with_capacity(r.order * r.order);
        for row in &r.rows {
            if row.len() != r.order {
                return Err(Error::Validation(format!(
                    "row length {} in an order-{} encoding",
                    row.len(),
                    r.order
                )));
            }
            cells.extend_from_slice(row);
        }
        Encoding::new(r.order, cells, r.label)
    }
}

impl From<Encoding> for EncodingRepr {
    fn from(e: Encoding) -> Self {
        let rows = (0..e.order)
            .map(|i| e.cells[i * e.order..(i + 1) * e.order].to_vec())
            .collect();
        EncodingRepr { order: e.order, label: e.label, rows }
    }
}

impl Encoding {
    pub fn new(order: usize, cells: Vec<i8>, label: Option<String>) -> Result<Self> {
        if order == 0 {
            return Err(Error::Validation("order must be at least 1".into()));
        }
        if cells.len() != order * order {
            return Err(Error::Validation(format!(
                "order {} needs {} cells, got {}",
                order,
                order * order,
                cells.len()
            )));
        }
        if let Some(bad) = cells.iter().find(|&&c| c != 1 && c != -1) {
            return Err(Error::Validation(format!("cell value {bad} is not ±1")));
        }
        Ok(Encoding { order, label, cells })
    }

    pub fn from_rows(rows: Vec<Vec<i8>>, label: Option<String>) -> Result<Self> {
        let order = rows.len();
        EncodingRepr { order, label, rows }.try_into()
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    /// Cell at (row, col); panics when out of range.
    #[inline]
    pub fn get(&self, row: usize, col: usize) -> i8 {
        self.cells[row * self.order + col]
    }

    pub fn cells(&self) -> &[i8] {
        &self.cells
    }

    /// The mating face: every cell negated, so the aligned score is exactly -1.
    pub fn mate(&self) -> Encoding {
        Encoding {
            order: self.order,
            label: self.label.as_ref().map(|l| format!("{l}'")),
            cells: self.cells.iter().map(|c| -c).collect(),
        }
    }

    /// True when all distinct row pairs are orthogonal (A·Aᵀ = N·I).
    pub fn is_hadamard(&self) -> bool {
        let n = self.order;
        for i in 0..n {
            for j in (i + 1)..n {
                let dot: i32 = (0..n)
                    .map(|k| i32::from(self.get(i, k)) * i32::from(self.get(j, k)))
                    .sum();
                if dot != 0 {
                    return false;
                }
            }
        }
        true
    }

    /// Exact lattice rotation about the grid centre by `turns` quarter turns
    /// (positive sense matches the continuous rotation path).
    pub fn rotated_quarter(&self, turns: u8) -> Encoding {
        let n = self.order;
        let src = |i: usize, j: usize| -> i8 {
            match turns % 4 {
                0 => self.get(i, j),
                1 => self.get(n - 1 - j, i),
                2 => self.get(n - 1 - i, n - 1 - j),
                _ => self.get(j, n - 1 - i),
            }
        };
        let mut cells = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                cells.push(src(i, j));
            }
        }
        Encoding { order: n, label: None, cells }
    }

    /// Uniformly random ±1 matrix; handy for property tests and benches.
    pub fn random<R: Rng + ?Sized>(order: usize, rng: &mut R) -> Encoding {
        let cells = (0..order * order)
            .map(|_| if rng.gen::<bool>() { 1 } else { -1 })
            .collect();
        Encoding { order, label: None, cells }
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string()? + "\n")?;
        Ok(())
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}

/// Sylvester-construction Hadamard matrix of order 2^k, normalized
/// (first row and column all +1). H₁ = [1]; H₂ₘ = [[H, H], [H, -H]].
pub fn sylvester(k: u32) -> Result<Encoding> {
    sylvester_with_limit(k, DEFAULT_MAX_SYLVESTER_K)
}

pub fn sylvester_with_limit(k: u32, max_k: u32) -> Result<Encoding> {
    if k > max_k {
        return Err(Error::SizeLimit(format!(
            "sylvester exponent {k} exceeds the configured maximum {max_k}"
        )));
    }
    let n = 1usize << k;
    let mut cells = vec![1i8; n * n];
    // Doubling in place: each pass mirrors the current block right, down,
    // and negated diagonally.
    let mut m = 1;
    while m < n {
        for i in 0..m {
            for j in 0..m {
                let v = cells[i * n + j];
                cells[i * n + (j + m)] = v;
                cells[(i + m) * n + j] = v;
                cells[(i + m) * n + (j + m)] = -v;
            }
        }
        m *= 2;
    }
    Ok(Encoding {
        order: n,
        label: Some(format!("sylvester-{n}")),
        cells,
    })
}

/// cell(i, j) = (-1)^(i+j); the classic non-Hadamard reference face.
pub fn checkerboard(order: usize) -> Result<Encoding> {
    if order == 0 {
        return Err(Error::Validation("order must be at least 1".into()));
    }
    let mut cells = Vec::with_capacity(order * order);
    for i in 0..order {
        for j in 0..order {
            cells.push(if (i + j) % 2 == 0 { 1 } else { -1 });
        }
    }
    Ok(Encoding {
        order,
        label: Some(format!("checkerboard-{order}")),
        cells,
    })
}
