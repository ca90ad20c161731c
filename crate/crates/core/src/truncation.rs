//! Truncation maps and truncated Walsh-Hadamard (TWH) matrices.
//!
//! A TWH matrix keeps the first `Φ(k)` rows of column `k` of `WH_N` and zeroes
//! the rest. Equivalence transforms permute which Walsh-Hadamard column a
//! position draws its signs from, so every matrix also carries a `sources`
//! table: column `k` holds the signs of column `sources[k]` of `WH_N`.
//!
//! For dyadic maps a column of length `2^m` is determined by the top `m` bits
//! of its source index. Two such columns are either orthogonal or agree on
//! their common support, and which of the two happens is read off from the
//! common binary prefix of their sources. Branches and nodes are computed from
//! this prefix tree.

use std::collections::BTreeMap;
use std::io::{self, BufRead};

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::walsh::{bit_reverse, check_dense, check_level, entry_scale, fwht, walsh_sign};

/// Per-column truncation lengths `Φ(k)`, `1 <= Φ(k) <= 2^N`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TruncationMap {
    level: u32,
    lengths: Vec<usize>,
    dyadic: bool,
}

impl TruncationMap {
    pub fn new(level: u32, lengths: Vec<usize>) -> Result<Self> {
        check_level(level)?;
        if level >= 32 {
            return Err(Error::InvalidArgument(format!("level {level} is too large")));
        }
        let size = 1usize << level;
        if lengths.len() != size {
            return Err(Error::InvalidArgument(format!(
                "a level-{level} truncation map needs {size} lengths, got {}",
                lengths.len()
            )));
        }
        if let Some((k, &l)) = lengths.iter().enumerate().find(|(_, &l)| l == 0 || l > size) {
            return Err(Error::InvalidArgument(format!(
                "length {l} of column {k} is outside 1..={size}"
            )));
        }
        let dyadic = lengths.iter().all(|l| l.is_power_of_two());
        Ok(Self {
            level,
            lengths,
            dyadic,
        })
    }

    pub fn constant(level: u32, value: usize) -> Result<Self> {
        check_level(level)?;
        Self::new(level, vec![value; 1 << level])
    }

    /// `Φ^opt`: `2^N` at column 0 and `2^{N - bitlen(k)}` elsewhere.
    pub fn standard(level: u32) -> Result<Self> {
        check_level(level)?;
        let lengths = (0..1usize << level)
            .map(|k| 1usize << (level - bit_length(k)))
            .collect();
        Self::new(level, lengths)
    }

    /// Lengths `2^r` with `r` uniform in `0..=N`.
    pub fn random_dyadic<R: Rng + ?Sized>(level: u32, rng: &mut R) -> Result<Self> {
        check_level(level)?;
        let lengths = (0..1usize << level)
            .map(|_| 1usize << rng.gen_range(0..=level))
            .collect();
        Self::new(level, lengths)
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn size(&self) -> usize {
        self.lengths.len()
    }

    pub fn lengths(&self) -> &[usize] {
        &self.lengths
    }

    pub fn get(&self, k: usize) -> usize {
        self.lengths[k]
    }

    pub fn is_dyadic(&self) -> bool {
        self.dyadic
    }

    /// One `k,phi` line per column, preceded by a `k,phi` header.
    pub fn write_csv<W: io::Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "k,phi")?;
        for (k, l) in self.lengths.iter().enumerate() {
            writeln!(w, "{k},{l}")?;
        }
        Ok(())
    }

    /// Parse the `k,phi` format. Blank lines, `#` comments and a `k,phi`
    /// header are skipped; rows may come in any order but must cover every
    /// column exactly once. The level is inferred from the row count.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut rows = BTreeMap::new();
        for (i, line) in r.lines().enumerate() {
            let lineno = i + 1;
            let line = line.map_err(|e| Error::Parse {
                line: lineno,
                msg: e.to_string(),
            })?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.eq_ignore_ascii_case("k,phi") {
                continue;
            }
            let (k, l) = parse_pair(line).ok_or_else(|| Error::Parse {
                line: lineno,
                msg: format!("expected `k,phi`, got `{line}`"),
            })?;
            if rows.insert(k, l).is_some() {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("column {k} listed twice"),
                });
            }
        }
        let n = rows.len();
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::Parse {
                line: 0,
                msg: format!("{n} columns is not a power of two >= 2"),
            });
        }
        if rows.keys().copied().ne(0..n) {
            return Err(Error::Parse {
                line: 0,
                msg: "column indices must be 0..2^N-1".into(),
            });
        }
        Self::new(n.trailing_zeros(), rows.into_values().collect())
    }
}

fn parse_pair(line: &str) -> Option<(usize, usize)> {
    let (a, b) = line.split_once(',')?;
    Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
}

/// Number of significant bits of `k` (0 for 0).
#[inline]
pub fn bit_length(k: usize) -> u32 {
    usize::BITS - k.leading_zeros()
}

/// Length of the common binary prefix of two `level`-bit indices.
#[inline]
pub fn common_prefix(a: usize, b: usize, level: u32) -> u32 {
    let x = a ^ b;
    if x == 0 {
        level
    } else {
        level - bit_length(x)
    }
}

/// A truncated Walsh-Hadamard matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct TwhMatrix {
    phi: TruncationMap,
    sources: Vec<usize>,
    trim_mask: Option<Vec<usize>>,
}

impl TwhMatrix {
    pub fn new(phi: TruncationMap) -> Self {
        let sources = (0..phi.size()).collect();
        Self {
            phi,
            sources,
            trim_mask: None,
        }
    }

    /// A TWH matrix whose column `k` uses the signs of column `sources[k]`.
    /// `sources` must be a permutation of `0..2^N`.
    pub fn with_sources(phi: TruncationMap, sources: Vec<usize>) -> Result<Self> {
        let n = phi.size();
        let mut seen = vec![false; n];
        if sources.len() != n
            || !sources
                .iter()
                .all(|&s| s < n && !std::mem::replace(&mut seen[s], true))
        {
            return Err(Error::InvalidArgument(
                "sources must be a permutation of the column indices".into(),
            ));
        }
        Ok(Self {
            phi,
            sources,
            trim_mask: None,
        })
    }

    pub fn level(&self) -> u32 {
        self.phi.level
    }

    pub fn size(&self) -> usize {
        self.phi.size()
    }

    pub fn phi(&self) -> &TruncationMap {
        &self.phi
    }

    pub fn sources(&self) -> &[usize] {
        &self.sources
    }

    pub fn source(&self, k: usize) -> usize {
        self.sources[k]
    }

    pub fn trim_mask(&self) -> Option<&[usize]> {
        self.trim_mask.as_deref()
    }

    pub fn is_trimmed(&self) -> bool {
        self.trim_mask.is_some()
    }

    /// True when every effective column length is a power of two.
    pub fn is_dyadic(&self) -> bool {
        self.phi.dyadic && self.trim_mask.is_none()
    }

    /// Number of leading nonzero rows of column `k` (after trimming).
    pub fn column_length(&self, k: usize) -> usize {
        self.phi.lengths[k] - self.trim_mask.as_ref().map_or(0, |t| t[k])
    }

    pub fn column_lengths(&self) -> Vec<usize> {
        (0..self.size()).map(|k| self.column_length(k)).collect()
    }

    pub fn entry(&self, n: usize, k: usize) -> f64 {
        if n < self.column_length(k) {
            f64::from(walsh_sign(self.level(), n, self.sources[k])) * entry_scale(self.level())
        } else {
            0.0
        }
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        (0..self.size()).map(|n| self.entry(n, k)).collect()
    }

    /// Dense matrix, refused above the level `cap`.
    pub fn to_dense(&self, cap: u32) -> Result<DenseMatrix> {
        check_dense(self.level(), cap)?;
        let size = self.size();
        let scale = entry_scale(self.level());
        let mut m = DenseMatrix::zeros(size, size);
        for k in 0..size {
            let s = self.sources[k];
            for n in 0..self.column_length(k) {
                m[(n, k)] = f64::from(walsh_sign(self.level(), n, s)) * scale;
            }
        }
        Ok(m)
    }

    /// The same columns rearranged so that column `k` draws from column `k`
    /// of `WH_N`.
    pub fn to_canonical(&self) -> TwhMatrix {
        let n = self.size();
        let mut lengths = vec![0; n];
        let mut mask = self.trim_mask.as_ref().map(|_| vec![0; n]);
        for k in 0..n {
            let s = self.sources[k];
            lengths[s] = self.phi.lengths[k];
            if let (Some(out), Some(t)) = (mask.as_mut(), self.trim_mask.as_ref()) {
                out[s] = t[k];
            }
        }
        let phi = TruncationMap {
            level: self.level(),
            lengths,
            dyadic: self.phi.dyadic,
        };
        TwhMatrix {
            phi,
            sources: (0..n).collect(),
            trim_mask: mask,
        }
    }

    /// `A u`.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        assert_eq!(u.len(), self.size(), "apply dimension mismatch");
        if self.is_dyadic() {
            self.apply_fast(u)
        } else {
            self.apply_direct(u)
        }
    }

    /// `A^T y`.
    pub fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.size(), "apply_transpose dimension mismatch");
        if self.is_dyadic() {
            self.apply_transpose_fast(y)
        } else {
            self.apply_transpose_direct(y)
        }
    }

    /// `A u` by summing over every stored entry.
    pub fn apply_direct(&self, u: &[f64]) -> Vec<f64> {
        let level = self.level();
        let mut y = vec![0.0; self.size()];
        for (k, &uk) in u.iter().enumerate() {
            if uk == 0.0 {
                continue;
            }
            let s = self.sources[k];
            for (n, yn) in y.iter_mut().enumerate().take(self.column_length(k)) {
                if walsh_sign(level, n, s) > 0 {
                    *yn += uk;
                } else {
                    *yn -= uk;
                }
            }
        }
        let scale = entry_scale(level);
        y.iter_mut().for_each(|v| *v *= scale);
        y
    }

    /// `A^T y` by summing over every stored entry.
    pub fn apply_transpose_direct(&self, y: &[f64]) -> Vec<f64> {
        let level = self.level();
        let scale = entry_scale(level);
        (0..self.size())
            .map(|k| {
                let s = self.sources[k];
                let acc: f64 = (0..self.column_length(k))
                    .map(|n| f64::from(walsh_sign(level, n, s)) * y[n])
                    .sum();
                acc * scale
            })
            .collect()
    }

    // Rows split into bands: band 0 is row 0, band j >= 1 is [2^{j-1}, 2^j).
    // A column of length 2^m meets bands 0..=m, and on band j its signs only
    // depend on the top j bits of its source, through a size-2^j Hadamard
    // transform in bit-reversed order.
    fn apply_fast(&self, u: &[f64]) -> Vec<f64> {
        let level = self.level();
        let size = self.size();
        let mut by_exp: Vec<Vec<usize>> = vec![Vec::new(); level as usize + 1];
        for k in 0..size {
            by_exp[self.phi.lengths[k].trailing_zeros() as usize].push(k);
        }
        let mut y = vec![0.0; size];
        let mut acc: Vec<f64> = Vec::new();
        for j in (0..=level).rev() {
            let width = 1usize << j;
            let mut next = vec![0.0; width];
            if !acc.is_empty() {
                for (p, v) in next.iter_mut().enumerate() {
                    *v = acc[2 * p] + acc[2 * p + 1];
                }
            }
            for &k in &by_exp[j as usize] {
                next[self.sources[k] >> (level - j)] += u[k];
            }
            acc = next;
            let mut b = vec![0.0; width];
            for (p, &v) in acc.iter().enumerate() {
                b[bit_reverse(p, j)] = v;
            }
            fwht(&mut b);
            let lo = if j == 0 { 0 } else { width / 2 };
            y[lo..width].copy_from_slice(&b[lo..width]);
        }
        let scale = entry_scale(level);
        y.iter_mut().for_each(|v| *v *= scale);
        y
    }

    fn apply_transpose_fast(&self, y: &[f64]) -> Vec<f64> {
        let level = self.level();
        let mut prefix: Vec<Vec<f64>> = Vec::with_capacity(level as usize + 1);
        for j in 0..=level {
            let width = 1usize << j;
            let lo = if j == 0 { 0 } else { width / 2 };
            let mut band = vec![0.0; width];
            band[lo..width].copy_from_slice(&y[lo..width]);
            fwht(&mut band);
            let mut p = vec![0.0; width];
            for (q, v) in p.iter_mut().enumerate() {
                let up = if j == 0 { 0.0 } else { prefix[j as usize - 1][q >> 1] };
                *v = up + band[bit_reverse(q, j)];
            }
            prefix.push(p);
        }
        let scale = entry_scale(level);
        (0..self.size())
            .map(|k| {
                let m = self.phi.lengths[k].trailing_zeros();
                scale * prefix[m as usize][self.sources[k] >> (level - m)]
            })
            .collect()
    }
}

/// `W_N^opt`: every column zeroed from its first negative entry on.
pub fn standard_truncation(level: u32) -> Result<TwhMatrix> {
    Ok(TwhMatrix::new(TruncationMap::standard(level)?))
}

/// The two-branch matrix `B_{N-1,K}` of size `2^N`.
///
/// Columns below `2^{N-1}` form the primary branch `W_{N-1}^opt ⊗ [1,1]^T/√2`,
/// the next `2^K` columns the secondary branch `W_K^opt ⊗ a` with `a` the
/// normalized alternating vector of length `2^{N-K}`, and every remaining
/// column keeps only its top entry. `secondary = None` gives `W_N^opt`.
pub fn two_branch(level: u32, secondary: Option<u32>) -> Result<TwhMatrix> {
    check_level(level)?;
    let Some(k) = secondary else {
        return standard_truncation(level);
    };
    if k >= level {
        return Err(Error::InvalidArgument(format!(
            "secondary level {k} must be below {level}"
        )));
    }
    let half = 1usize << (level - 1);
    let lengths = (0..1usize << level)
        .map(|c| {
            if c < half {
                1usize << (level - bit_length(c))
            } else if c - half < 1 << k {
                1usize << (level - bit_length(c - half))
            } else {
                1
            }
        })
        .collect();
    Ok(TwhMatrix::new(TruncationMap::new(level, lengths)?))
}

/// Zero trailing negative entries of every column until its last nonzero
/// entry is positive. The top entry of a TWH column is always positive, so no
/// column can vanish. Returns the input unchanged when nothing is trimmed.
pub fn trim(m: &TwhMatrix) -> TwhMatrix {
    let level = m.level();
    let mut mask: Vec<usize> = m
        .trim_mask
        .clone()
        .unwrap_or_else(|| vec![0; m.size()]);
    let mut changed = false;
    for (k, t) in mask.iter_mut().enumerate() {
        let s = m.sources[k];
        let mut len = m.phi.lengths[k] - *t;
        while len > 1 && walsh_sign(level, len - 1, s) < 0 {
            len -= 1;
        }
        let new_t = m.phi.lengths[k] - len;
        if new_t != *t {
            changed = true;
            *t = new_t;
        }
    }
    if !changed {
        return m.clone();
    }
    TwhMatrix {
        phi: m.phi.clone(),
        sources: m.sources.clone(),
        trim_mask: Some(mask),
    }
}

/// Exact inner product of columns `i` and `j`.
pub fn column_inner(m: &TwhMatrix, i: usize, j: usize) -> f64 {
    let level = m.level();
    let (si, sj) = (m.sources[i], m.sources[j]);
    let len = m.column_length(i).min(m.column_length(j));
    let agree = (0..len)
        .map(|n| i64::from(walsh_sign(level, n, si) * walsh_sign(level, n, sj)))
        .sum::<i64>();
    agree as f64 / (1u64 << level) as f64
}

/// Multiply every column coordinatewise by the `±1` vector
/// `2^{N/2}·(column h of WH_N)`. Column `k` then draws its signs from
/// column `sources[k] ^ h`, so the Gram matrix is unchanged.
pub fn equivalence_transform(m: &TwhMatrix, h: usize) -> Result<TwhMatrix> {
    if !m.is_dyadic() {
        return Err(Error::NotDyadic);
    }
    if h >= m.size() {
        return Err(Error::InvalidArgument(format!(
            "column {h} does not exist at level {}",
            m.level()
        )));
    }
    Ok(TwhMatrix {
        phi: m.phi.clone(),
        sources: m.sources.iter().map(|s| s ^ h).collect(),
        trim_mask: None,
    })
}

/// A node at level `L`: columns with source prefix `prefix` (top `L` bits)
/// and length above `2^L` split into both halves at row `2^L`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Node {
    pub level: u32,
    pub prefix: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ColumnClass {
    /// The column lies on exactly one branch.
    AboveNode,
    /// The column is shared by several branches (it ends at or below a node).
    AtOrBelowNode,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BranchDecomposition {
    /// Maximal sets of mutually nonorthogonal columns, ordered by their
    /// smallest column index.
    pub branches: Vec<Vec<usize>>,
    /// Nodes ordered by level, then prefix.
    pub nodes: Vec<Node>,
    pub classes: Vec<ColumnClass>,
}

impl BranchDecomposition {
    pub fn deepest_level(&self) -> Option<u32> {
        self.nodes.iter().map(|n| n.level).max()
    }
}

fn exponent(m: &TwhMatrix, k: usize) -> u32 {
    m.phi.lengths[k].trailing_zeros()
}

/// Prefix-tree position `(m, top m bits of the source)` of a dyadic column.
fn tree_position(m: &TwhMatrix, k: usize) -> (u32, usize) {
    let e = exponent(m, k);
    (e, m.sources[k] >> (m.level() - e))
}

/// All nodes of a dyadic matrix.
pub fn nodes(m: &TwhMatrix) -> Result<Vec<Node>> {
    if !m.is_dyadic() {
        return Err(Error::NotDyadic);
    }
    let level = m.level();
    let mut out = Vec::new();
    for l in 0..level {
        // bit 0: a column of the lower half seen, bit 1: upper half
        let mut seen: BTreeMap<usize, u8> = BTreeMap::new();
        for k in 0..m.size() {
            if exponent(m, k) > l {
                let top = m.sources[k] >> (level - l - 1);
                *seen.entry(top >> 1).or_default() |= 1 << (top & 1);
            }
        }
        out.extend(
            seen.into_iter()
                .filter(|&(_, mask)| mask == 3)
                .map(|(prefix, _)| Node { level: l, prefix }),
        );
    }
    Ok(out)
}

/// Branches, nodes and per-column classification of a dyadic matrix.
pub fn branch_decompose(m: &TwhMatrix) -> Result<BranchDecomposition> {
    let nodes = nodes(m)?;
    let size = m.size();
    let positions: Vec<(u32, usize)> = (0..size).map(|k| tree_position(m, k)).collect();
    let is_ancestor = |(ea, pa): (u32, usize), (eb, pb): (u32, usize)| ea <= eb && pb >> (eb - ea) == pa;

    let mut distinct: Vec<(u32, usize)> = positions.clone();
    distinct.sort_unstable();
    distinct.dedup();
    let maximal: Vec<(u32, usize)> = distinct
        .iter()
        .copied()
        .filter(|&a| !distinct.iter().any(|&b| b != a && is_ancestor(a, b)))
        .collect();

    let mut membership = vec![0usize; size];
    let mut branches: Vec<Vec<usize>> = maximal
        .iter()
        .map(|&top| {
            let cols: Vec<usize> = (0..size)
                .filter(|&k| is_ancestor(positions[k], top))
                .collect();
            for &k in &cols {
                membership[k] += 1;
            }
            cols
        })
        .collect();
    branches.sort_by_key(|b| b[0]);
    let classes = membership
        .iter()
        .map(|&c| {
            if c > 1 {
                ColumnClass::AtOrBelowNode
            } else {
                ColumnClass::AboveNode
            }
        })
        .collect();
    Ok(BranchDecomposition {
        branches,
        nodes,
        classes,
    })
}

/// Replace the block of a deepest-level node by the standard pattern.
///
/// The block is the `2^{N-L}` columns whose sources start with the node
/// prefix. Columns of length at least `2^L` in it (the ones that see the
/// split) are ranked by length, primary branch first on ties, and receive
/// the lengths and sources of a single-branch standard truncation running
/// towards the deepest primary column. The primary branch is the half of the
/// split holding more columns, ties going to the half that contains the
/// lowest column index. Shorter columns are unaffected by the choice of
/// source inside the block and keep their lengths. Columns outside the block
/// are unchanged.
pub fn node_reduce(m: &TwhMatrix, node: Node) -> Result<TwhMatrix> {
    let decomposition_nodes = nodes(m)?;
    if !decomposition_nodes.contains(&node) {
        return Err(Error::NotANode {
            level: node.level,
            prefix: node.prefix,
        });
    }
    let deepest = decomposition_nodes.iter().map(|n| n.level).max().unwrap_or(0);
    if node.level != deepest {
        return Err(Error::NotDeepestNode {
            level: node.level,
            deepest,
        });
    }
    Ok(reduce_block(m, node))
}

fn reduce_block(m: &TwhMatrix, node: Node) -> TwhMatrix {
    let level = m.level();
    let l = node.level;
    let shift = level - l;
    let block: Vec<usize> = (0..m.size())
        .filter(|&k| m.sources[k] >> shift == node.prefix)
        .collect();
    let half_of = |k: usize| (m.sources[k] >> (shift - 1)) & 1;

    let above: Vec<usize> = block.iter().copied().filter(|&k| exponent(m, k) > l).collect();
    let count = |h: usize| above.iter().filter(|&&k| half_of(k) == h).count();
    let (c0, c1) = (count(0), count(1));
    let primary_half = match c0.cmp(&c1) {
        std::cmp::Ordering::Greater => 0,
        std::cmp::Ordering::Less => 1,
        std::cmp::Ordering::Equal => half_of(above[0]),
    };
    let leaf = above
        .iter()
        .copied()
        .filter(|&k| half_of(k) == primary_half)
        .max_by(|&a, &b| exponent(m, a).cmp(&exponent(m, b)).then(b.cmp(&a)))
        .map(|k| m.sources[k])
        .expect("a node has columns on both sides");

    let mut ranked: Vec<usize> = block.iter().copied().filter(|&k| exponent(m, k) >= l).collect();
    ranked.sort_by(|&a, &b| {
        exponent(m, b)
            .cmp(&exponent(m, a))
            .then_with(|| {
                let pa = exponent(m, a) > l && half_of(a) == primary_half;
                let pb = exponent(m, b) > l && half_of(b) == primary_half;
                pb.cmp(&pa)
            })
            .then(a.cmp(&b))
    });

    let mut slots: Vec<usize> = (0..1usize << shift).map(|i| (node.prefix << shift) | i).collect();
    slots.sort_by(|&a, &b| {
        common_prefix(b, leaf, level)
            .cmp(&common_prefix(a, leaf, level))
            .then(a.cmp(&b))
    });

    let mut lengths = m.phi.lengths.clone();
    let mut sources = m.sources.clone();
    for (&k, &slot) in ranked.iter().zip(&slots) {
        sources[k] = slot;
        lengths[k] = 1 << common_prefix(slot, leaf, level);
    }
    let mut leftover: Vec<usize> = slots[ranked.len()..].to_vec();
    leftover.sort_unstable();
    let rest = block.iter().copied().filter(|&k| exponent(m, k) < l);
    for (k, slot) in rest.zip(leftover) {
        sources[k] = slot;
    }
    TwhMatrix {
        phi: TruncationMap {
            level,
            lengths,
            dyadic: true,
        },
        sources,
        trim_mask: None,
    }
}

/// Reduce nodes level by level, deepest first, until one branch remains.
/// Returns the final matrix and the number of passes (at most `N`).
pub fn reduce_fully(m: &TwhMatrix) -> Result<(TwhMatrix, usize)> {
    let mut current = m.clone();
    let mut passes = 0;
    loop {
        let found = nodes(&current)?;
        let Some(deepest) = found.iter().map(|n| n.level).max() else {
            return Ok((current, passes));
        };
        for node in found.into_iter().filter(|n| n.level == deepest) {
            current = reduce_block(&current, node);
        }
        passes += 1;
    }
}

/// A random dyadic map with exactly one node.
///
/// The node level `L` and prefix are uniform; two leaves are drawn on either
/// side of the split and every column gets a length no longer than its
/// common prefix with the nearer leaf, so all columns sit on one of the two
/// chains through the leaves.
pub fn random_one_node<R: Rng + ?Sized>(level: u32, rng: &mut R) -> Result<TwhMatrix> {
    check_level(level)?;
    let size = 1usize << level;
    let l = rng.gen_range(0..level);
    let shift = level - l;
    let prefix = rng.gen_range(0..1usize << l);
    let low_bits = |rng: &mut R| rng.gen_range(0..1usize << (shift - 1));
    let leaf0 = (prefix << shift) | low_bits(rng);
    let leaf1 = (prefix << shift) | (1 << (shift - 1)) | low_bits(rng);
    let lengths = (0..size)
        .map(|k| {
            let reach = common_prefix(k, leaf0, level).max(common_prefix(k, leaf1, level));
            let lo = if k == leaf0 || k == leaf1 { l + 1 } else { 0 };
            1usize << rng.gen_range(lo..=reach)
        })
        .collect();
    Ok(TwhMatrix::new(TruncationMap::new(level, lengths)?))
}
