//! The parity-encoding code for `K` logical spins.
//!
//! A logical state `Z ∈ {±1}^K` is encoded into the `C(K,2)` physical spins
//! `z_ij = Z_i Z_j`. All state algebra is done in the spin (±1) representation
//! on the symmetric `K×K` matrix view with a fixed `+1` diagonal.
//!
//! Canonical orderings (0-based indices throughout):
//!
//! * pairs `(i, j)`, `i < j`, lexicographic: `(0,1), (0,2), …, (K-2,K-1)`;
//! * weight-3 checks: triples `(i, j, k)`, `i < j < k`, lexicographic;
//! * weight-4 checks: plaquettes of the triangular lattice. Plaquette
//!   `(a, m)` with `0 <= a < m <= K-2` has corners
//!   `(a, m), (a+1, m), (a+1, m+1), (a, m+1)` and plaquettes are ordered
//!   row-major (`a` outer, `m` inner). When `m = a + 1` the corner
//!   `(a+1, a+1)` is a diagonal entry fixed at `+1`, so the check has
//!   weight 3 in the variable nodes. In the 1-based labelling
//!   `s_{klmn} = x_km x_lm x_ln x_kn` this is `k = a+1, l = a+2, m = m+1,
//!   n = m+2`.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Index of pair `(i, j)` with `i < j < k` in the canonical pair order.
#[inline]
pub fn pair_index(k: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < k);
    i * (2 * k - i - 1) / 2 + (j - i - 1)
}

/// All pairs `(i, j)`, `i < j`, in canonical order.
pub fn pairs(k: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(k * k.saturating_sub(1) / 2);
    for i in 0..k {
        for j in i + 1..k {
            out.push((i, j));
        }
    }
    out
}

/// All triples `(i, j, l)`, `i < j < l`, in canonical order.
pub fn triples(k: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            for l in j + 1..k {
                out.push([i, j, l]);
            }
        }
    }
    out
}

/// Corners of every plaquette in canonical (row-major) order.
pub fn plaquettes(k: usize) -> Vec<[(usize, usize); 4]> {
    let mut out = Vec::new();
    for a in 0..k.saturating_sub(2) {
        for m in a + 1..k - 1 {
            out.push([(a, m), (a + 1, m), (a + 1, m + 1), (a, m + 1)]);
        }
    }
    out
}

/// Size parameters of the code for `K` logical spins.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CodeParams {
    pub k: usize,
    /// Physical spins, `C(K,2)`.
    pub n_v: usize,
    /// Weight-3 checks, `C(K,3)`.
    pub n_c3: usize,
    /// Weight-4 (plaquette) checks, `C(K-1,2)`.
    pub n_c4: usize,
}

impl CodeParams {
    pub fn new(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::invalid(format!("K must be at least 2, got {k}")));
        }
        Ok(Self {
            k,
            n_v: k * (k - 1) / 2,
            n_c3: k * (k - 1) * (k - 2) / 6,
            n_c4: (k - 1) * (k - 2) / 2,
        })
    }

    /// Column weight of the weight-3 check matrix.
    pub fn d_v3(&self) -> usize {
        self.k - 2
    }
}

/// Dense binary matrix with entries in `{0, 1}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMatrix {
    rows: usize,
    cols: usize,
    data: Vec<u8>,
}

impl BinaryMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut m = Self::zeros(rows.len(), cols);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::Parse {
                    row: r + 1,
                    column: row.len().min(cols) + 1,
                    message: format!("expected {cols} columns, found {}", row.len()),
                });
            }
            for (c, &v) in row.iter().enumerate() {
                if v > 1 {
                    return Err(Error::Parse {
                        row: r + 1,
                        column: c + 1,
                        message: format!("entry {v} is not binary"),
                    });
                }
                m.set(r, c, v);
            }
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> u8 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: u8) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[u8] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_weight(&self, r: usize) -> usize {
        self.row(r).iter().map(|&v| v as usize).sum()
    }

    pub fn col_weight(&self, c: usize) -> usize {
        (0..self.rows).map(|r| self.get(r, c) as usize).sum()
    }

    /// `self · otherᵀ (mod 2)`.
    pub fn mul_transpose_mod2(&self, other: &BinaryMatrix) -> Result<BinaryMatrix> {
        if self.cols != other.cols {
            return Err(Error::invalid(format!(
                "column mismatch: {} vs {}",
                self.cols, other.cols
            )));
        }
        let mut out = BinaryMatrix::zeros(self.rows, other.rows);
        for r in 0..self.rows {
            let a = self.row(r);
            for s in 0..other.rows {
                let b = other.row(s);
                let parity = a.iter().zip(b).fold(0u8, |acc, (&x, &y)| acc ^ (x & y));
                out.set(r, s, parity);
            }
        }
        Ok(out)
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }

    /// Plain-text dump: one row per line, digits `0`/`1`, no separators.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.rows * (self.cols + 1));
        for r in 0..self.rows {
            for &v in self.row(r) {
                s.push(if v == 1 { '1' } else { '0' });
            }
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (r, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut row = Vec::with_capacity(line.len());
            for (c, ch) in line.chars().enumerate() {
                match ch {
                    '0' => row.push(0),
                    '1' => row.push(1),
                    other => {
                        return Err(Error::Parse {
                            row: r + 1,
                            column: c + 1,
                            message: format!("unexpected character {other:?}"),
                        })
                    }
                }
            }
            rows.push(row);
        }
        Self::from_rows(&rows)
    }
}

/// Bipartite check/variable adjacency of one check family.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TannerGraph {
    /// `N(i)`: variable nodes (pair indices) of check `i`.
    pub check_vars: Vec<Vec<usize>>,
    /// `M(j)`: checks containing variable `j`, ascending.
    pub var_checks: Vec<Vec<usize>>,
}

impl TannerGraph {
    /// Adjacency of the weight-3 or weight-4 checks for `k` logical spins,
    /// without materialising the check matrix.
    pub fn build(k: usize, weight: CheckWeight) -> Self {
        let n_v = k * k.saturating_sub(1) / 2;
        let check_vars = match weight {
            CheckWeight::Three => triples(k)
                .into_iter()
                .map(|[a, b, c]| vec![pair_index(k, a, b), pair_index(k, a, c), pair_index(k, b, c)])
                .collect(),
            CheckWeight::Four => plaquettes(k)
                .into_iter()
                .map(|corners| {
                    let mut vars: Vec<usize> = corners
                        .iter()
                        .filter(|(r, c)| r != c)
                        .map(|&(r, c)| pair_index(k, r, c))
                        .collect();
                    vars.sort_unstable();
                    vars
                })
                .collect(),
        };
        Self::from_check_vars(n_v, check_vars)
    }

    fn from_check_vars(n_v: usize, check_vars: Vec<Vec<usize>>) -> Self {
        let mut var_checks = vec![Vec::new(); n_v];
        for (c, vars) in check_vars.iter().enumerate() {
            for &v in vars {
                var_checks[v].push(c);
            }
        }
        Self {
            check_vars,
            var_checks,
        }
    }

    fn to_matrix(&self, n_v: usize) -> BinaryMatrix {
        let mut m = BinaryMatrix::zeros(self.check_vars.len(), n_v);
        for (c, vars) in self.check_vars.iter().enumerate() {
            for &v in vars {
                m.set(c, v, 1);
            }
        }
        m
    }

    pub fn n_checks(&self) -> usize {
        self.check_vars.len()
    }
}

/// Which syndrome family a check or penalty refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum CheckWeight {
    #[serde(rename = "3")]
    Three,
    #[serde(rename = "4")]
    Four,
}

impl CheckWeight {
    pub fn from_weight(w: u8) -> Result<Self> {
        match w {
            3 => Ok(CheckWeight::Three),
            4 => Ok(CheckWeight::Four),
            other => Err(Error::invalid(format!(
                "check weight must be 3 or 4, got {other}"
            ))),
        }
    }

    pub fn weight(self) -> u8 {
        match self {
            CheckWeight::Three => 3,
            CheckWeight::Four => 4,
        }
    }
}

/// Generator, parity-check matrices and Tanner graphs of the code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PECode {
    pub params: CodeParams,
    /// `K × n_v`; column `(i,j)` has ones in rows `i` and `j`.
    pub generator: BinaryMatrix,
    /// `n_c4 × n_v` plaquette checks.
    pub check4: BinaryMatrix,
    /// `n_c3 × n_v` triple checks.
    pub check3: BinaryMatrix,
    pub tanner3: TannerGraph,
    pub tanner4: TannerGraph,
}

/// Builds the code for `k` logical spins. Requires `k >= 4`.
pub fn build_code(k: usize) -> Result<PECode> {
    if k < 4 {
        return Err(Error::invalid(format!(
            "weight-4 checks need K >= 4, got K = {k}"
        )));
    }
    let params = CodeParams::new(k)?;

    let mut generator = BinaryMatrix::zeros(k, params.n_v);
    for (p, (i, j)) in pairs(k).into_iter().enumerate() {
        generator.set(i, p, 1);
        generator.set(j, p, 1);
    }

    let tanner3 = TannerGraph::build(k, CheckWeight::Three);
    let tanner4 = TannerGraph::build(k, CheckWeight::Four);

    Ok(PECode {
        params,
        check3: tanner3.to_matrix(params.n_v),
        check4: tanner4.to_matrix(params.n_v),
        generator,
        tanner3,
        tanner4,
    })
}

impl PECode {
    pub fn k(&self) -> usize {
        self.params.k
    }

    pub fn tanner(&self, weight: CheckWeight) -> &TannerGraph {
        match weight {
            CheckWeight::Three => &self.tanner3,
            CheckWeight::Four => &self.tanner4,
        }
    }

    /// Syndrome of `x` for the given family, in canonical check order.
    pub fn syndrome(&self, x: &SpinMatrix, weight: CheckWeight) -> SyndromeVector {
        match weight {
            CheckWeight::Three => syndrome3(x),
            CheckWeight::Four => syndrome4(x),
        }
    }

    /// Plain-text dump of `G`, `H` (weight 4) and `H'` (weight 3).
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# K = {}", self.params.k);
        let _ = writeln!(s, "# generator {}x{}", self.generator.rows(), self.generator.cols());
        s.push_str(&self.generator.to_text());
        let _ = writeln!(s, "# check4 {}x{}", self.check4.rows(), self.check4.cols());
        s.push_str(&self.check4.to_text());
        let _ = writeln!(s, "# check3 {}x{}", self.check3.rows(), self.check3.cols());
        s.push_str(&self.check3.to_text());
        s
    }
}

#[inline]
fn check_spin(v: i8, row: usize, column: usize) -> Result<i8> {
    if v == 1 || v == -1 {
        Ok(v)
    } else {
        Err(Error::Parse {
            row,
            column,
            message: format!("entry {v} is not ±1"),
        })
    }
}

/// Symmetric `K×K` matrix of ±1 spins with unit diagonal.
///
/// Entries are stored densely, both triangles kept in sync. The diagonal is
/// always `+1` and never written by any mutating method.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpinMatrix {
    k: usize,
    entries: Vec<i8>,
}

impl SpinMatrix {
    /// The all-one matrix.
    pub fn ones(k: usize) -> Self {
        Self {
            k,
            entries: vec![1; k * k],
        }
    }

    /// Builds from a full row-major `K×K` array, validating every invariant.
    pub fn from_entries(k: usize, entries: Vec<i8>) -> Result<Self> {
        if entries.len() != k * k {
            return Err(Error::invalid(format!(
                "expected {} entries for K = {k}, got {}",
                k * k,
                entries.len()
            )));
        }
        for i in 0..k {
            for j in 0..k {
                let v = check_spin(entries[i * k + j], i + 1, j + 1)?;
                if i == j && v != 1 {
                    return Err(Error::Parse {
                        row: i + 1,
                        column: j + 1,
                        message: "diagonal entry must be +1".into(),
                    });
                }
                if v != entries[j * k + i] {
                    return Err(Error::Parse {
                        row: i + 1,
                        column: j + 1,
                        message: format!("matrix is not symmetric at ({}, {})", i + 1, j + 1),
                    });
                }
            }
        }
        Ok(Self { k, entries })
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> i8 {
        self.entries[i * self.k + j]
    }

    /// Sets off-diagonal entry `(i, j)` and its mirror.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: i8) {
        debug_assert!(i != j && (v == 1 || v == -1));
        self.entries[i * self.k + j] = v;
        self.entries[j * self.k + i] = v;
    }

    /// Flips off-diagonal entry `(i, j)` and its mirror.
    #[inline]
    pub fn flip(&mut self, i: usize, j: usize) {
        debug_assert!(i != j);
        let v = -self.get(i, j);
        self.set(i, j, v);
    }

    /// Copy with entry `(i, j)` flipped.
    pub fn flipped(&self, i: usize, j: usize) -> Self {
        let mut out = self.clone();
        out.flip(i, j);
        out
    }

    /// Row-major view of all `K²` entries.
    pub fn as_slice(&self) -> &[i8] {
        &self.entries
    }

    pub fn row(&self, i: usize) -> &[i8] {
        &self.entries[i * self.k..(i + 1) * self.k]
    }

    /// Componentwise product `self ∘ other`.
    pub fn hadamard(&self, other: &SpinMatrix) -> SpinMatrix {
        assert_eq!(self.k, other.k, "dimension mismatch");
        SpinMatrix {
            k: self.k,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a * b)
                .collect(),
        }
    }

    /// Number of off-diagonal pairs `(i < j)` equal to `-1`.
    pub fn count_negative_pairs(&self) -> usize {
        (0..self.k)
            .map(|i| self.row(i)[i + 1..].iter().filter(|&&v| v < 0).count())
            .sum()
    }

    /// Number of pairs where `self` and `other` differ.
    pub fn hamming_distance(&self, other: &SpinMatrix) -> usize {
        assert_eq!(self.k, other.k, "dimension mismatch");
        let mut d = 0;
        for i in 0..self.k {
            for j in i + 1..self.k {
                if self.get(i, j) != other.get(i, j) {
                    d += 1;
                }
            }
        }
        d
    }

    /// CSV with `K` rows of `K` comma-separated `1`/`-1` values.
    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(self.k * self.k * 3);
        for i in 0..self.k {
            for (j, v) in self.row(i).iter().enumerate() {
                if j > 0 {
                    s.push(',');
                }
                let _ = write!(s, "{v}");
            }
            s.push('\n');
        }
        s
    }

    /// Parses the [`to_csv`](Self::to_csv) format. When `expected_k` is given
    /// the matrix must have exactly that dimension. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn from_csv(text: &str, expected_k: Option<usize>) -> Result<Self> {
        let mut rows: Vec<(usize, Vec<i8>)> = Vec::new();
        for (line_no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut row = Vec::new();
            for (c, field) in line.split(',').enumerate() {
                let v: i8 = field.trim().parse().map_err(|_| Error::Parse {
                    row: line_no + 1,
                    column: c + 1,
                    message: format!("cannot parse {:?} as ±1", field.trim()),
                })?;
                row.push(check_spin(v, line_no + 1, c + 1)?);
            }
            rows.push((line_no + 1, row));
        }
        let k = rows.len();
        if let Some(expected) = expected_k {
            if k != expected {
                return Err(Error::Parse {
                    row: k.min(expected) + 1,
                    column: 1,
                    message: format!("expected {expected} rows, found {k}"),
                });
            }
        }
        let mut entries = Vec::with_capacity(k * k);
        for (line_no, row) in &rows {
            if row.len() != k {
                return Err(Error::Parse {
                    row: *line_no,
                    column: row.len().min(k) + 1,
                    message: format!("expected {k} columns, found {}", row.len()),
                });
            }
            entries.extend_from_slice(row);
        }
        Self::from_entries(k, entries)
    }
}

/// Logical source state `Z ∈ {±1}^K`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LogicalState(Vec<i8>);

impl LogicalState {
    pub fn new(spins: Vec<i8>) -> Result<Self> {
        for (i, &s) in spins.iter().enumerate() {
            check_spin(s, 1, i + 1)?;
        }
        Ok(Self(spins))
    }

    pub fn ones(k: usize) -> Self {
        Self(vec![1; k])
    }

    /// State whose spin `i` is `-1` iff bit `i` of `bits` is set.
    pub fn from_bits(k: usize, bits: u64) -> Self {
        Self((0..k).map(|i| if bits >> i & 1 == 1 { -1 } else { 1 }).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn spins(&self) -> &[i8] {
        &self.0
    }

    /// Global spin flip `-Z`.
    pub fn negated(&self) -> Self {
        Self(self.0.iter().map(|s| -s).collect())
    }

    /// Representative of `{Z, -Z}` with the first spin `+1`.
    pub fn canonical(&self) -> Self {
        if self.0.first() == Some(&-1) {
            self.negated()
        } else {
            self.clone()
        }
    }
}

/// Syndrome values (`+1` satisfied, `-1` violated) of one check family.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyndromeVector {
    pub weight: CheckWeight,
    pub values: Vec<i8>,
}

impl SyndromeVector {
    pub fn is_all_satisfied(&self) -> bool {
        self.values.iter().all(|&s| s == 1)
    }

    pub fn violated(&self) -> usize {
        self.values.iter().filter(|&&s| s < 0).count()
    }

    /// Componentwise product.
    pub fn product(&self, other: &SyndromeVector) -> SyndromeVector {
        assert_eq!(self.weight, other.weight);
        SyndromeVector {
            weight: self.weight,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect(),
        }
    }
}

/// `ẑ = Zᵀ Z`.
pub fn encode(z: &LogicalState) -> SpinMatrix {
    let k = z.len();
    let s = z.spins();
    let mut entries = Vec::with_capacity(k * k);
    for i in 0..k {
        for j in 0..k {
            entries.push(s[i] * s[j]);
        }
    }
    SpinMatrix { k, entries }
}

/// Logical state with `Z_0 = +1` whose encoding agrees with row 0 of `x`.
/// Equals the unique preimage when `x` is a code-state.
pub fn decode_row0(x: &SpinMatrix) -> LogicalState {
    LogicalState(x.row(0).to_vec())
}

/// Weight-3 syndrome `s_ijk = x_ij x_jk x_ik` over triples in canonical order.
pub fn syndrome3(x: &SpinMatrix) -> SyndromeVector {
    let k = x.k();
    let mut values = Vec::with_capacity(k * k.saturating_sub(1) * k.saturating_sub(2) / 6);
    for i in 0..k {
        for j in i + 1..k {
            let xij = x.get(i, j);
            for l in j + 1..k {
                values.push(xij * x.get(j, l) * x.get(i, l));
            }
        }
    }
    SyndromeVector {
        weight: CheckWeight::Three,
        values,
    }
}

/// Weight-4 plaquette syndrome over plaquettes in canonical order.
pub fn syndrome4(x: &SpinMatrix) -> SyndromeVector {
    let values = plaquettes(x.k())
        .into_iter()
        .map(|corners| corners.iter().map(|&(r, c)| x.get(r, c)).product())
        .collect();
    SyndromeVector {
        weight: CheckWeight::Four,
        values,
    }
}

/// True iff `x = Zᵀ Z` for some logical state (all syndromes `+1`).
pub fn is_code_state(x: &SpinMatrix) -> bool {
    // x_ij = x_0i x_0j for all i < j characterises ZᵀZ with Z = row 0.
    let k = x.k();
    let r0 = x.row(0);
    for i in 1..k {
        let row = x.row(i);
        let a = r0[i];
        for j in i + 1..k {
            if row[j] != a * r0[j] {
                return false;
            }
        }
    }
    true
}

/// Length-`C(K,2)` vector of the upper triangle in canonical pair order.
pub fn vector_view(x: &SpinMatrix) -> Vec<i8> {
    let k = x.k();
    let mut out = Vec::with_capacity(k * (k - 1) / 2);
    for i in 0..k {
        out.extend_from_slice(&x.row(i)[i + 1..]);
    }
    out
}

/// Inverse of [`vector_view`].
pub fn matrix_view(k: usize, v: &[i8]) -> Result<SpinMatrix> {
    let n_v = k * k.saturating_sub(1) / 2;
    if v.len() != n_v {
        return Err(Error::invalid(format!(
            "vector of length {} does not match C({k},2) = {n_v}",
            v.len()
        )));
    }
    let mut m = SpinMatrix::ones(k);
    let mut idx = 0;
    for i in 0..k {
        for j in i + 1..k {
            let s = v[idx];
            if s != 1 && s != -1 {
                return Err(Error::invalid(format!("entry {idx} is {s}, not ±1")));
            }
            m.set(i, j, s);
            idx += 1;
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(m: &BinaryMatrix) -> Vec<Vec<u8>> {
        (0..m.rows()).map(|r| m.row(r).to_vec()).collect()
    }

    #[test]
    fn k4_generator_matches_reference() {
        let code = build_code(4).unwrap();
        assert_eq!(
            rows(&code.generator),
            vec![
                vec![1, 1, 1, 0, 0, 0],
                vec![1, 0, 0, 1, 1, 0],
                vec![0, 1, 0, 1, 0, 1],
                vec![0, 0, 1, 0, 1, 1],
            ]
        );
    }

    #[test]
    fn k4_check_matrices_match_reference() {
        let code = build_code(4).unwrap();
        assert_eq!(
            rows(&code.check4),
            vec![
                vec![1, 1, 0, 1, 0, 0],
                vec![0, 1, 1, 1, 1, 0],
                vec![0, 0, 0, 1, 1, 1],
            ]
        );
        assert_eq!(
            rows(&code.check3),
            vec![
                vec![1, 1, 0, 1, 0, 0],
                vec![1, 0, 1, 0, 1, 0],
                vec![0, 1, 1, 0, 0, 1],
                vec![0, 0, 0, 1, 1, 1],
            ]
        );
    }

    #[test]
    fn table_of_code_sizes() {
        let expected = [(4, 6, 3, 4, 2), (5, 10, 6, 10, 3), (6, 15, 10, 20, 4), (7, 21, 15, 35, 5)];
        for (k, n_v, n_c4, n_c3, d_v) in expected {
            let code = build_code(k).unwrap();
            let p = code.params;
            assert_eq!((p.n_v, p.n_c4, p.n_c3, p.d_v3()), (n_v, n_c4, n_c3, d_v));
            assert_eq!(code.check3.rows(), n_c3);
            assert_eq!(code.check4.rows(), n_c4);
        }
    }

    #[test]
    fn small_k_is_rejected() {
        for k in 0..4 {
            assert!(matches!(build_code(k), Err(Error::InvalidParameter(_))));
        }
    }

    #[test]
    fn weights_and_orthogonality() {
        for k in 4..=12 {
            let code = build_code(k).unwrap();
            for c in 0..code.params.n_v {
                assert_eq!(code.generator.col_weight(c), 2);
                assert_eq!(code.check3.col_weight(c), k - 2);
                assert!(code.check4.col_weight(c) <= 4);
            }
            for r in 0..code.check3.rows() {
                assert_eq!(code.check3.row_weight(r), 3);
            }
            for r in 0..code.check4.rows() {
                let w = code.check4.row_weight(r);
                assert!((3..=4).contains(&w));
            }
            assert!(code.generator.mul_transpose_mod2(&code.check3).unwrap().is_zero());
            assert!(code.generator.mul_transpose_mod2(&code.check4).unwrap().is_zero());
        }
    }

    #[test]
    fn encode_examples() {
        let z = LogicalState::new(vec![1, -1, 1, -1]).unwrap();
        let m = encode(&z);
        assert_eq!(vector_view(&m), vec![-1, 1, -1, -1, 1, -1]);
        assert_eq!(encode(&z.negated()), m);
        assert_eq!(encode(&LogicalState::ones(6)), SpinMatrix::ones(6));
        assert!(is_code_state(&m));
    }

    #[test]
    fn single_flip_syndromes_k4() {
        let x = SpinMatrix::ones(4).flipped(0, 1);
        // triples 123, 124, 134, 234
        assert_eq!(syndrome3(&x).values, vec![-1, -1, 1, 1]);
        // plaquettes 1223, 1234, 2334: x12 only in the first
        assert_eq!(syndrome4(&x).values, vec![-1, 1, 1]);
        assert!(!is_code_state(&x));
    }

    #[test]
    fn single_flip_hits_exactly_adjacent_plaquettes() {
        let k = 7;
        let code = build_code(k).unwrap();
        for (p, (i, j)) in pairs(k).into_iter().enumerate() {
            let s = syndrome4(&SpinMatrix::ones(k).flipped(i, j));
            let neg: Vec<usize> = (0..s.values.len()).filter(|&c| s.values[c] < 0).collect();
            assert_eq!(neg, code.tanner4.var_checks[p]);
            assert!(neg.len() <= 4);
        }
    }

    #[test]
    fn exhaustive_code_state_count_k4() {
        let mut count = 0;
        for bits in 0u32..64 {
            let v: Vec<i8> = (0..6).map(|b| if bits >> b & 1 == 1 { -1 } else { 1 }).collect();
            let m = matrix_view(4, &v).unwrap();
            let cs = is_code_state(&m);
            assert_eq!(cs, syndrome3(&m).is_all_satisfied());
            assert_eq!(cs, syndrome4(&m).is_all_satisfied());
            if cs {
                count += 1;
            }
        }
        let distinct: std::collections::HashSet<_> =
            (0..16u64).map(|b| encode(&LogicalState::from_bits(4, b))).collect();
        assert_eq!(count, 8);
        assert_eq!(distinct.len(), 8);
    }

    #[test]
    fn vector_view_examples() {
        let m = matrix_view(4, &[-1, 1, 1, 1, 1, 1]).unwrap();
        assert_eq!(m.get(0, 1), -1);
        assert_eq!(m.get(1, 0), -1);
        assert_eq!(m.count_negative_pairs(), 1);
        assert_eq!(matrix_view(5, &[1; 10]).unwrap(), SpinMatrix::ones(5));
        assert!(matches!(matrix_view(4, &[1; 5]), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn pair_index_is_canonical_position() {
        for k in 2..10 {
            for (p, (i, j)) in pairs(k).into_iter().enumerate() {
                assert_eq!(pair_index(k, i, j), p);
            }
        }
    }

    #[test]
    fn csv_rejects_bad_input() {
        let good = SpinMatrix::ones(3).flipped(0, 2).to_csv();
        assert_eq!(SpinMatrix::from_csv(&good, Some(3)).unwrap(), SpinMatrix::ones(3).flipped(0, 2));
        match SpinMatrix::from_csv("1,1,1\n1,1,2\n1,1,1\n", Some(3)) {
            Err(Error::Parse { row, column, .. }) => assert_eq!((row, column), (2, 3)),
            other => panic!("unexpected {other:?}"),
        }
        match SpinMatrix::from_csv("1,-1,1\n1,1,1\n1,1,1\n", Some(3)) {
            Err(Error::Parse { row, column, .. }) => assert_eq!((row, column), (1, 2)),
            other => panic!("unexpected {other:?}"),
        }
        assert!(SpinMatrix::from_csv("1,1\n1,1\n", Some(3)).is_err());
        assert!(SpinMatrix::from_csv("1,1,1\n1,1\n1,1,1\n", None).is_err());
    }

    #[test]
    fn binary_text_round_trip() {
        let code = build_code(5).unwrap();
        let back = BinaryMatrix::from_text(&code.check4.to_text()).unwrap();
        assert_eq!(back, code.check4);
        assert!(BinaryMatrix::from_text("0102\n").is_err());
    }
}
