//! Fock basis of an `(M, n)` sector: weak compositions of `n` photons into
//! `M` modes, in a fixed canonical order with O(M) ranking and unranking.
//!
//! The canonical order is descending lexicographic on the count tuples, so
//! the first pattern is `(n, 0, ..., 0)` and the last is `(0, ..., 0, n)`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest sector that [`enumerate_basis`] will materialize.
pub const MAX_BASIS_SIZE: u64 = 20_000_000;

/// Binomial coefficient `C(n, k)`, `Some(0)` for `k > n`, `None` on `u64` overflow.
pub fn binomial(n: u64, k: u64) -> Option<u64> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) is divisible by (i + 1) at every step.
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
        if acc > u64::MAX as u128 {
            return None;
        }
    }
    Some(acc as u64)
}

/// Binomial with signed arguments: zero whenever `k < 0`, `n < 0` or `k > n`.
pub fn binomial_signed(n: i64, k: i64) -> Option<u64> {
    if n < 0 || k < 0 || k > n {
        return Some(0);
    }
    binomial(n as u64, k as u64)
}

/// Binomial in 128-bit arithmetic, `None` on overflow.
pub fn binomial_u128(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        let num = acc.checked_mul((n - i) as u128);
        acc = match num {
            Some(v) => v / (i as u128 + 1),
            None => {
                // Divide first by the gcd to delay overflow.
                let d = i as u128 + 1;
                let g = gcd(acc, d);
                (acc / g).checked_mul((n - i) as u128 / (d / g))?
            }
        };
    }
    Some(acc)
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Number of weak compositions of `n` into `m` parts, `C(n + m - 1, n)`.
pub fn sector_size(m: usize, n: usize) -> Option<u64> {
    if m == 0 {
        return Some(0);
    }
    binomial((n + m - 1) as u64, n as u64)
}

/// Measured photon counts per mode.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DetectionPattern(Vec<u8>);

impl DetectionPattern {
    /// Wraps per-mode counts; at least one mode is required.
    pub fn new(counts: Vec<u8>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::InvalidDimension("a pattern needs at least one mode".into()));
        }
        Ok(DetectionPattern(counts))
    }

    /// Builds a pattern from wider integers, rejecting counts above 255.
    pub fn from_counts(counts: &[usize]) -> Result<Self> {
        let narrowed = counts
            .iter()
            .map(|&c| u8::try_from(c).map_err(|_| Error::Domain(format!("photon count {c} exceeds 255"))))
            .collect::<Result<Vec<u8>>>()?;
        Self::new(narrowed)
    }

    pub fn counts(&self) -> &[u8] {
        &self.0
    }

    pub fn modes(&self) -> usize {
        self.0.len()
    }

    pub fn total(&self) -> usize {
        self.0.iter().map(|&c| c as usize).sum()
    }

    pub fn into_counts(self) -> Vec<u8> {
        self.0
    }
}

impl fmt::Debug for DetectionPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for DetectionPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, c) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Table of weak-composition counts `comp[s][parts]`, used for ranking.
#[derive(Debug, Clone)]
struct CompositionTable {
    n: usize,
    m: usize,
    table: Vec<u64>,
}

impl CompositionTable {
    fn new(m: usize, n: usize) -> Self {
        let mut table = vec![0u64; (n + 1) * (m + 1)];
        for s in 0..=n {
            for parts in 0..=m {
                let v = if parts == 0 {
                    u64::from(s == 0)
                } else {
                    // Callers validate the full sector size first, so every
                    // entry here is bounded by it.
                    binomial((s + parts - 1) as u64, s as u64).unwrap_or(u64::MAX)
                };
                table[s * (m + 1) + parts] = v;
            }
        }
        CompositionTable { n, m, table }
    }

    fn get(&self, s: usize, parts: usize) -> u64 {
        debug_assert!(s <= self.n && parts <= self.m);
        self.table[s * (self.m + 1) + parts]
    }
}

/// All patterns of an `(M, n)` sector in canonical order.
#[derive(Debug, Clone)]
pub struct SectorBasis {
    modes: usize,
    photons: usize,
    len: usize,
    flat: Vec<u8>,
    comp: CompositionTable,
}

impl SectorBasis {
    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn photons(&self) -> usize {
        self.photons
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Counts of the pattern at `index` as a borrowed slice.
    pub fn counts(&self, index: usize) -> &[u8] {
        &self.flat[index * self.modes..(index + 1) * self.modes]
    }

    /// Iterates over the counts of every pattern in canonical order.
    pub fn iter(&self) -> impl Iterator<Item = &[u8]> + '_ {
        self.flat.chunks_exact(self.modes)
    }

    /// Owned copies of all patterns in canonical order.
    pub fn patterns(&self) -> Vec<DetectionPattern> {
        self.iter().map(|c| DetectionPattern(c.to_vec())).collect()
    }

    /// Canonical position of `p`.
    pub fn pattern_to_index(&self, p: &DetectionPattern) -> Result<usize> {
        if p.modes() != self.modes || p.total() != self.photons {
            return Err(Error::Domain(format!("pattern {p} is not in sector (M={}, n={})", self.modes, self.photons)));
        }
        Ok(self.rank(p.counts()))
    }

    /// Pattern at canonical position `index`.
    pub fn index_to_pattern(&self, index: usize) -> Result<DetectionPattern> {
        if index >= self.len {
            return Err(Error::Domain(format!("index {index} out of range for sector of size {}", self.len)));
        }
        Ok(DetectionPattern(self.counts(index).to_vec()))
    }

    /// Rank of counts known to lie in the sector (no validation).
    pub fn rank(&self, counts: &[u8]) -> usize {
        let m = self.modes;
        let mut remaining = self.photons;
        let mut index: u64 = 0;
        for (k, &c) in counts.iter().enumerate().take(m.saturating_sub(1)) {
            let c = c as usize;
            let parts = m - k - 1;
            // Patterns agreeing so far but with a larger entry at k come first;
            // there are sum_{v>c} comp(remaining - v, parts) = comp(remaining - c - 1, parts + 1) of them.
            if c < remaining {
                index += self.comp.get(remaining - c - 1, parts + 1);
            }
            remaining -= c;
        }
        index as usize
    }

    /// Unranks without going through the stored table.
    pub fn unrank(&self, mut index: usize) -> Result<DetectionPattern> {
        if index >= self.len {
            return Err(Error::Domain(format!("index {index} out of range")));
        }
        let m = self.modes;
        let mut remaining = self.photons;
        let mut out = Vec::with_capacity(m);
        for k in 0..m - 1 {
            let parts = m - k - 1;
            let mut v = remaining;
            loop {
                let block = self.comp.get(remaining - v, parts) as usize;
                if index < block {
                    break;
                }
                index -= block;
                v -= 1;
            }
            out.push(v as u8);
            remaining -= v;
        }
        out.push(remaining as u8);
        Ok(DetectionPattern(out))
    }
}

/// Enumerates all weak `M`-compositions of `n` in canonical order.
pub fn enumerate_basis(m: usize, n: usize) -> Result<SectorBasis> {
    if m == 0 {
        return Err(Error::InvalidDimension("M must be at least 1".into()));
    }
    if n > u8::MAX as usize {
        return Err(Error::Domain(format!("n = {n} exceeds the 255-photon limit")));
    }
    let size =
        sector_size(m, n).ok_or_else(|| Error::Refused(format!("sector (M={m}, n={n}) overflows 64-bit indexing")))?;
    if size > MAX_BASIS_SIZE {
        return Err(Error::Refused(format!(
            "sector (M={m}, n={n}) has {size} patterns, above the bound {MAX_BASIS_SIZE}"
        )));
    }
    let len = size as usize;
    let mut flat = Vec::with_capacity(len * m);
    let mut current = vec![0u8; m];
    fill(&mut flat, &mut current, 0, n);
    debug_assert_eq!(flat.len(), len * m);
    Ok(SectorBasis { modes: m, photons: n, len, flat, comp: CompositionTable::new(m, n) })
}

fn fill(out: &mut Vec<u8>, current: &mut [u8], k: usize, remaining: usize) {
    let m = current.len();
    if k == m - 1 {
        current[k] = remaining as u8;
        out.extend_from_slice(current);
        return;
    }
    for v in (0..=remaining).rev() {
        current[k] = v as u8;
        fill(out, current, k + 1, remaining - v);
    }
}
