//! Lattice-path combinatorics of the reachable Fock subspaces.
//!
//! A detection pattern of the Catalan space `C_i(M, n)` is the first
//! difference of its cumulative photon counts `(0, λ_1, ..., λ_{M−1}, n)`,
//! an extended Ferrers diagram bounded by `λ_d <= min(d + c, n)` where
//! `c = i` for `n = M` and `c = i − 1` for `n = M − 1`. Reading photons as
//! down steps and detector boundaries as up steps turns these diagrams into
//! Dyck paths of `D(n + M − 1, c + 1, c + M − n)`.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{binomial_u128, DetectionPattern};
use crate::parity::{parity_bits, BitString};

/// Largest lattice or path set that will be materialized.
pub const MAX_LATTICE_VERTICES: u128 = 1_000_000;
const MAX_ENUMERATION: u128 = 20_000_000;

/// Dyck paths of length `k` from height `δ₁` to height `δ₂` that never dip below zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DyckSpec {
    pub k: usize,
    pub delta1: usize,
    pub delta2: usize,
}

impl DyckSpec {
    pub fn new(k: usize, delta1: usize, delta2: usize) -> Result<Self> {
        if (k + delta2 + delta1) % 2 != 0 {
            return Err(Error::Domain(format!("k + δ2 − δ1 must be even, got k={k}, δ1={delta1}, δ2={delta2}")));
        }
        Ok(DyckSpec { k, delta1, delta2 })
    }
}

impl fmt::Display for DyckSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "D({},{},{})", self.k, self.delta1, self.delta2)
    }
}

fn binom_signed_u128(n: i64, k: i64) -> Result<u128> {
    if n < 0 || k < 0 || k > n {
        return Ok(0);
    }
    binomial_u128(n as u64, k as u64).ok_or_else(|| Error::Refused("count overflows 128 bits".into()))
}

/// `|D(k, δ₁, δ₂)| = C(k, (k+δ₂−δ₁)/2) − C(k, (k−δ₂−δ₁−2)/2)` (reflection principle).
pub fn dyck_count(spec: &DyckSpec) -> Result<u128> {
    let spec = DyckSpec::new(spec.k, spec.delta1, spec.delta2)?;
    let (k, d1, d2) = (spec.k as i64, spec.delta1 as i64, spec.delta2 as i64);
    let all = binom_signed_u128(k, (k + d2 - d1) / 2)?;
    let crossing = if k - d2 - d1 - 2 >= 0 { binom_signed_u128(k, (k - d2 - d1 - 2) / 2)? } else { 0 };
    Ok(all - crossing)
}

/// The `m`-th Catalan number.
pub fn catalan_number(m: u64) -> Result<u128> {
    let b = binomial_u128(2 * m, m).ok_or_else(|| Error::Refused("Catalan number overflows".into()))?;
    Ok(b / (m as u128 + 1))
}

/// All Dyck words of `spec` (`U` = +1, `D` = −1), lexicographic with `D < U`.
pub fn enumerate_dyck_paths(spec: &DyckSpec) -> Result<Vec<String>> {
    let count = dyck_count(spec)?;
    if count > MAX_ENUMERATION {
        return Err(Error::Refused(format!("{count} paths exceed the bound {MAX_ENUMERATION}")));
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut word = Vec::with_capacity(spec.k);
    dyck_rec(spec, spec.delta1 as i64, &mut word, &mut out);
    Ok(out)
}

fn dyck_rec(spec: &DyckSpec, height: i64, word: &mut Vec<u8>, out: &mut Vec<String>) {
    let remaining = (spec.k - word.len()) as i64;
    if remaining == 0 {
        if height == spec.delta2 as i64 {
            out.push(String::from_utf8(word.clone()).expect("ascii"));
        }
        return;
    }
    for (step, dh) in [(b'D', -1i64), (b'U', 1i64)] {
        let h = height + dh;
        if h < 0 || (h - spec.delta2 as i64).abs() > remaining - 1 {
            continue;
        }
        word.push(step);
        dyck_rec(spec, h, word, out);
        word.pop();
    }
}

/// Heights `y_0 = δ₁, y_1, ..., y_k` of a valid word.
pub fn dyck_heights(word: &str, spec: &DyckSpec) -> Result<Vec<i64>> {
    if word.len() != spec.k {
        return Err(Error::Domain(format!("word length {} differs from k = {}", word.len(), spec.k)));
    }
    let mut heights = vec![spec.delta1 as i64];
    let mut h = spec.delta1 as i64;
    for ch in word.chars() {
        h += match ch {
            'U' => 1,
            'D' => -1,
            _ => return Err(Error::Domain(format!("invalid step {ch:?} in Dyck word"))),
        };
        if h < 0 {
            return Err(Error::Domain(format!("word {word} dips below height 0")));
        }
        heights.push(h);
    }
    if h != spec.delta2 as i64 {
        return Err(Error::Domain(format!("word {word} ends at height {h}, not {}", spec.delta2)));
    }
    Ok(heights)
}

/// The map `ι`: reflect in the horizontal axis, then turn by a quarter-right
/// angle, so that Dyck up steps become unit steps to the right and down steps
/// unit steps upwards (lengths scaled by `1/√2`).
pub fn iota(x: f64, y: f64) -> (f64, f64) {
    ((x + y) / 2.0, (x - y) / 2.0)
}

/// Inverse of [`iota`].
pub fn iota_inverse(a: f64, b: f64) -> (f64, f64) {
    (a + b, a - b)
}

/// Image of a Dyck path under `ι`, translated to start at the origin.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StaircasePath {
    pub points: Vec<(i64, i64)>,
}

impl StaircasePath {
    /// `'R'` for horizontal and `'V'` for vertical unit steps.
    pub fn steps(&self) -> String {
        self.points.windows(2).map(|w| if w[1].0 > w[0].0 { 'R' } else { 'V' }).collect()
    }
}

/// Maps a Dyck word of `spec` to its staircase path.
pub fn staircase_iso(word: &str, spec: &DyckSpec) -> Result<StaircasePath> {
    let heights = dyck_heights(word, spec)?;
    let d1 = spec.delta1 as i64;
    let points = heights
        .iter()
        .enumerate()
        .map(|(x, &y)| {
            let (x, y) = (x as i64, y - d1);
            ((x + y) / 2, (x - y) / 2)
        })
        .collect();
    Ok(StaircasePath { points })
}

/// Recovers the Dyck word from a staircase path.
pub fn staircase_inverse(path: &StaircasePath, spec: &DyckSpec) -> Result<String> {
    if path.points.first() != Some(&(0, 0)) {
        return Err(Error::Domain("staircase paths start at the origin".into()));
    }
    let mut word = String::with_capacity(spec.k);
    for w in path.points.windows(2) {
        let (da, db) = (w[1].0 - w[0].0, w[1].1 - w[0].1);
        match (da, db) {
            (1, 0) => word.push('U'),
            (0, 1) => word.push('D'),
            _ => return Err(Error::Domain("staircase step is not a unit step".into())),
        }
    }
    dyck_heights(&word, spec)?;
    Ok(word)
}

/// Column heights `(λ₀ = 0, λ₁, ..., λ_{k+1})`, non-decreasing.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ExtendedFerrers {
    columns: Vec<u32>,
}

impl ExtendedFerrers {
    pub fn new(columns: Vec<u32>) -> Result<Self> {
        if columns.first() != Some(&0) {
            return Err(Error::Domain("extended diagrams start with λ₀ = 0".into()));
        }
        if columns.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Domain(format!("columns {columns:?} are not non-decreasing")));
        }
        Ok(ExtendedFerrers { columns })
    }

    /// `(0, μ₁, ..., μ_k, top)` from a partition bound `μ` (top defaults to `max μ`).
    pub fn from_bound(mu: &[u32], top: Option<u32>) -> Result<Self> {
        let top = top.unwrap_or_else(|| mu.iter().copied().max().unwrap_or(0));
        let mut cols = Vec::with_capacity(mu.len() + 2);
        cols.push(0);
        cols.extend_from_slice(mu);
        cols.push(top);
        Self::new(cols)
    }

    pub fn columns(&self) -> &[u32] {
        &self.columns
    }

    /// Columns `λ₁..λ_k`, excluding the fixed ends.
    pub fn inner(&self) -> &[u32] {
        let n = self.columns.len();
        if n < 2 {
            &[]
        } else {
            &self.columns[1..n - 1]
        }
    }

    pub fn top(&self) -> u32 {
        *self.columns.last().expect("non-empty")
    }

    /// Boxes in the inner columns.
    pub fn size(&self) -> u32 {
        self.inner().iter().sum()
    }
}

impl fmt::Display for ExtendedFerrers {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, c) in self.columns.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// First differences `(λ₁−λ₀, ..., λ_{k+1}−λ_k)`.
pub fn ferrers_to_pattern(f: &ExtendedFerrers) -> Result<DetectionPattern> {
    let diffs: Vec<usize> = f.columns.windows(2).map(|w| (w[1] - w[0]) as usize).collect();
    DetectionPattern::from_counts(&diffs)
}

/// Cumulative sums with a leading zero.
pub fn pattern_to_ferrers(p: &DetectionPattern) -> ExtendedFerrers {
    let mut cols = Vec::with_capacity(p.modes() + 1);
    cols.push(0u32);
    let mut acc = 0u32;
    for &c in p.counts() {
        acc += c as u32;
        cols.push(acc);
    }
    ExtendedFerrers { columns: cols }
}

/// All diagrams below `mu`, ordered by size then columns, with cover edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YoungLattice {
    pub mu: ExtendedFerrers,
    pub vertices: Vec<ExtendedFerrers>,
    pub cover_edges: Vec<(usize, usize)>,
}

/// Number of diagrams below `mu` without materializing them.
pub fn young_vertex_count(mu: &ExtendedFerrers) -> u128 {
    let inner = mu.inner();
    let cap = inner.iter().copied().max().unwrap_or(0) as usize;
    // ways[v] = number of valid prefixes ending with column height v
    let mut ways = vec![0u128; cap + 1];
    ways[0] = 1;
    for &bound in inner {
        let mut next = vec![0u128; cap + 1];
        let mut running = 0u128;
        for v in 0..=cap {
            running = running.saturating_add(ways[v]);
            if v as u32 <= bound {
                next[v] = running;
            }
        }
        ways = next;
    }
    ways.iter().fold(0u128, |a, &b| a.saturating_add(b))
}

/// Young's lattice `Y_μ` of all extended diagrams `λ ⊆ μ` sharing `μ`'s ends.
pub fn young_lattice(mu: &ExtendedFerrers) -> Result<YoungLattice> {
    let count = young_vertex_count(mu);
    if count > MAX_LATTICE_VERTICES {
        return Err(Error::Refused(format!("lattice has {count} vertices, above the bound {MAX_LATTICE_VERTICES}")));
    }
    let inner = mu.inner().to_vec();
    let top = mu.top();
    let mut raw: Vec<Vec<u32>> = Vec::with_capacity(count as usize);
    let mut current = vec![0u32; inner.len()];
    young_rec(&inner, 0, 0, &mut current, &mut raw);
    let mut vertices: Vec<ExtendedFerrers> = raw
        .into_iter()
        .map(|cols| {
            let mut c = Vec::with_capacity(cols.len() + 2);
            c.push(0);
            c.extend(cols);
            c.push(top);
            ExtendedFerrers { columns: c }
        })
        .collect();
    vertices.sort_by(|a, b| a.size().cmp(&b.size()).then_with(|| a.columns.cmp(&b.columns)));
    let cover_edges = cover_edges_of(&vertices);
    Ok(YoungLattice { mu: mu.clone(), vertices, cover_edges })
}

fn young_rec(bound: &[u32], k: usize, floor: u32, current: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if k == bound.len() {
        out.push(current.clone());
        return;
    }
    for v in floor..=bound[k] {
        current[k] = v;
        young_rec(bound, k + 1, v, current, out);
    }
}

fn cover_edges_of(vertices: &[ExtendedFerrers]) -> Vec<(usize, usize)> {
    let index: HashMap<&[u32], usize> = vertices.iter().enumerate().map(|(i, v)| (v.columns(), i)).collect();
    let mut edges = Vec::new();
    for (i, v) in vertices.iter().enumerate() {
        let n = v.columns.len();
        for col in 1..n.saturating_sub(1) {
            let mut up = v.columns.clone();
            up[col] += 1;
            if let Some(&j) = index.get(up.as_slice()) {
                edges.push((i, j));
            }
        }
    }
    edges
}

fn meet(a: &[u32], b: &[u32]) -> Vec<u32> {
    a.iter().zip(b).map(|(x, y)| *x.min(y)).collect()
}

fn join(a: &[u32], b: &[u32]) -> Vec<u32> {
    a.iter().zip(b).map(|(x, y)| *x.max(y)).collect()
}

impl YoungLattice {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn index_of(&self, columns: &[u32]) -> Option<usize> {
        self.vertices.iter().position(|v| v.columns() == columns)
    }

    /// Induced sub-poset on the vertices accepted by `keep`.
    pub fn sublattice(&self, keep: impl Fn(&ExtendedFerrers) -> bool) -> YoungLattice {
        let vertices: Vec<ExtendedFerrers> = self.vertices.iter().filter(|v| keep(v)).cloned().collect();
        let cover_edges = cover_edges_of(&vertices);
        YoungLattice { mu: self.mu.clone(), vertices, cover_edges }
    }

    /// Meet and join of every pair stay inside the vertex set.
    pub fn is_closed(&self) -> bool {
        let set: HashSet<&[u32]> = self.vertices.iter().map(|v| v.columns()).collect();
        self.vertices.iter().all(|a| {
            self.vertices.iter().all(|b| {
                set.contains(meet(a.columns(), b.columns()).as_slice())
                    && set.contains(join(a.columns(), b.columns()).as_slice())
            })
        })
    }

    /// Patterns obtained from every vertex by first differences.
    pub fn patterns(&self) -> Result<Vec<DetectionPattern>> {
        self.vertices.iter().map(ferrers_to_pattern).collect()
    }

    /// Text graph: a header, one `v` line per vertex with its diagram,
    /// pattern and `℘₀` bit string, then one `e` line per cover edge.
    pub fn to_text(&self) -> Result<String> {
        let mut s = format!(
            "# young-lattice mu={} vertices={} edges={}\n",
            self.mu,
            self.vertices.len(),
            self.cover_edges.len()
        );
        for (i, v) in self.vertices.iter().enumerate() {
            let p = ferrers_to_pattern(v)?;
            let bits = parity_bits(p.counts(), 0)?;
            s.push_str(&format!("v {i} diagram={v} pattern={p} bits={bits}\n"));
        }
        for (a, b) in &self.cover_edges {
            s.push_str(&format!("e {a} {b}\n"));
        }
        Ok(s)
    }

    /// JSON document with labelled vertices and the cover-edge list.
    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Vertex {
            id: usize,
            diagram: Vec<u32>,
            pattern: Vec<u8>,
            bits: String,
        }
        #[derive(Serialize)]
        struct Doc<'a> {
            mu: &'a [u32],
            vertices: Vec<Vertex>,
            cover_edges: &'a [(usize, usize)],
        }
        let vertices = self
            .vertices
            .iter()
            .enumerate()
            .map(|(id, v)| {
                let p = ferrers_to_pattern(v)?;
                Ok(Vertex {
                    id,
                    diagram: v.columns().to_vec(),
                    bits: parity_bits(p.counts(), 0)?.to_string(),
                    pattern: p.into_counts(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(serde_json::to_string_pretty(&Doc { mu: self.mu.columns(), vertices, cover_edges: &self.cover_edges })?)
    }
}

fn check_catalan_args(m: usize, n: usize, depth: usize) -> Result<()> {
    if m < 2 {
        return Err(Error::Domain(format!("Catalan spaces need M >= 2, got {m}")));
    }
    if n != m && n + 1 != m {
        return Err(Error::Domain(format!("n must be M or M-1, got n={n} for M={m}")));
    }
    if depth == 0 || depth > m - 1 {
        return Err(Error::Domain(format!("depth must lie in 1..={}, got {depth}", m - 1)));
    }
    Ok(())
}

/// Offset `c` of the staircase bound `λ_d <= d + c`.
pub fn catalan_offset(m: usize, n: usize, depth: usize) -> Result<usize> {
    check_catalan_args(m, n, depth)?;
    Ok(depth - (m - n))
}

/// Upper diagram `(0, μ₁, ..., μ_{M−1}, n)` with `μ_d = min(d + c, n)`.
pub fn catalan_bounds(m: usize, n: usize, depth: usize) -> Result<ExtendedFerrers> {
    let c = catalan_offset(m, n, depth)?;
    let mut cols = vec![0u32];
    cols.extend((1..m).map(|d| (d + c).min(n) as u32));
    cols.push(n as u32);
    ExtendedFerrers::new(cols)
}

/// Dyck family counting `C_depth(M, n)`: `D(n + M − 1, c + 1, c + M − n)`.
pub fn catalan_dyck_spec(m: usize, n: usize, depth: usize) -> Result<DyckSpec> {
    let c = catalan_offset(m, n, depth)?;
    DyckSpec::new(n + m - 1, c + 1, c + m - n)
}

/// Dyck word of a Catalan pattern: `D` per photon, `U` per detector boundary.
pub fn pattern_to_dyck_word(p: &DetectionPattern) -> String {
    let mut s = String::new();
    let counts = p.counts();
    for (k, &c) in counts.iter().enumerate() {
        s.extend(std::iter::repeat('D').take(c as usize));
        if k + 1 < counts.len() {
            s.push('U');
        }
    }
    s
}

/// Pattern read off a Dyck word: photons (`D`) between boundaries (`U`).
pub fn dyck_word_to_pattern(word: &str) -> Result<DetectionPattern> {
    let mut counts = vec![0usize];
    for ch in word.chars() {
        match ch {
            'D' => *counts.last_mut().expect("non-empty") += 1,
            'U' => counts.push(0),
            _ => return Err(Error::Domain(format!("invalid step {ch:?}"))),
        }
    }
    DetectionPattern::from_counts(&counts)
}

/// Detection patterns reachable by slices `1..=depth` from the standard input,
/// in canonical (descending lexicographic) order.
pub fn catalan_basis(m: usize, n: usize, depth: usize) -> Result<Vec<DetectionPattern>> {
    let spec = catalan_dyck_spec(m, n, depth)?;
    let count = dyck_count(&spec)?;
    if count > MAX_ENUMERATION {
        return Err(Error::Refused(format!("{count} patterns exceed the bound {MAX_ENUMERATION}")));
    }
    let bounds = catalan_bounds(m, n, depth)?;
    let upper: Vec<u32> = bounds.inner().to_vec();
    let mut out = Vec::with_capacity(count as usize);
    let mut counts = vec![0u8; m];
    catalan_rec(&upper, n as u32, 0, 0, &mut counts, &mut out);
    out.sort_unstable_by(|a: &DetectionPattern, b| b.cmp(a));
    Ok(out)
}

fn catalan_rec(upper: &[u32], n: u32, d: usize, cum: u32, counts: &mut Vec<u8>, out: &mut Vec<DetectionPattern>) {
    if d == upper.len() {
        counts[d] = (n - cum) as u8;
        out.push(DetectionPattern::new(counts.clone()).expect("non-empty"));
        return;
    }
    for next in cum..=upper[d] {
        counts[d] = (next - cum) as u8;
        catalan_rec(upper, n, d + 1, next, counts, out);
    }
}

/// Mask `(0, s₁, ..., s_{M−1}, 0)` of boxes removed from the top diagram.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoxBitString {
    bits: Vec<u8>,
}

impl BoxBitString {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if bits.len() < 2 || bits[0] != 0 || *bits.last().expect("len >= 2") != 0 {
            return Err(Error::Domain("box bit strings start and end with 0".into()));
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::Domain("box bit string entries must be 0 or 1".into()));
        }
        Ok(BoxBitString { bits })
    }

    /// The box bit string for `M` modes with inner bits taken from `word`.
    pub fn from_inner_word(m: usize, word: u64) -> Result<Self> {
        let mut bits = vec![0u8; m + 1];
        for i in 1..m {
            bits[i] = ((word >> (i - 1)) & 1) as u8;
        }
        Self::new(bits)
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    /// Differences `d_i = s_{i−1} − s_i` for `i = 1..=M`.
    pub fn differences(&self) -> Vec<i32> {
        self.bits.windows(2).map(|w| w[0] as i32 - w[1] as i32).collect()
    }
}

/// Top diagram `(0, 1, 2, ..., M−1, M−1)` of `C_1(M, M−1)`.
pub fn box_top(m: usize) -> Result<ExtendedFerrers> {
    if m < 2 {
        return Err(Error::Domain("box bit strings need M >= 2".into()));
    }
    let mut cols: Vec<u32> = (0..m as u32).collect();
    cols.push(m as u32 - 1);
    ExtendedFerrers::new(cols)
}

/// `λ = top − S` componentwise.
pub fn box_bitstring_apply(top: &ExtendedFerrers, s: &BoxBitString) -> Result<ExtendedFerrers> {
    if top.columns().len() != s.bits().len() {
        return Err(Error::Domain(format!(
            "diagram has {} columns but the bit string has {} entries",
            top.columns().len(),
            s.bits().len()
        )));
    }
    let cols = top
        .columns()
        .iter()
        .zip(s.bits())
        .map(|(&c, &b)| c.checked_sub(b as u32).ok_or_else(|| Error::Domain("negative column height".into())))
        .collect::<Result<Vec<u32>>>()?;
    ExtendedFerrers::new(cols)
}

/// `℘₀` images of the `2^{M−1}` patterns `top − S`, computed as
/// `℘₀(λ̄_i − λ̄_{i−1}) ⊕ ℘₀(d_i)`; the direct parity of each pattern is
/// checked against this composition.
pub fn box_bitstring_images(m: usize) -> Result<Vec<BitString>> {
    if m > 30 {
        return Err(Error::Refused("box bit string enumeration is limited to M <= 30".into()));
    }
    let top = box_top(m)?;
    let top_pattern = ferrers_to_pattern(&top)?;
    let top_bits = parity_bits(top_pattern.counts(), 0)?;
    let mut images = Vec::with_capacity(1 << (m - 1));
    for word in 0..(1u64 << (m - 1)) {
        let s = BoxBitString::from_inner_word(m, word)?;
        let lambda = box_bitstring_apply(&top, &s)?;
        let pattern = ferrers_to_pattern(&lambda)?;
        let d_bits: Vec<u8> = s.differences().iter().map(|d| d.rem_euclid(2) as u8).collect();
        let composed = BitString::from_word(m, top_bits.word() ^ BitString::from_bits(&d_bits)?.word())?;
        let direct = parity_bits(pattern.counts(), 0)?;
        if composed != direct {
            return Err(Error::Numeric(format!("parity composition failed for S={:?}", s.bits())));
        }
        images.push(direct);
    }
    Ok(images)
}

/// True when the `2^{M−1}` box-bit-string patterns have distinct `℘₀` images.
pub fn parity_distinctness_check(m: usize) -> Result<bool> {
    let images = box_bitstring_images(m)?;
    let distinct: HashSet<BitString> = images.iter().copied().collect();
    Ok(distinct.len() == 1usize << (m - 1))
}

/// Reading of "Boolean sublattice isomorphic to `B_k`".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BooleanDefinition {
    /// Intervals `[λ, λ + R]` for a set `R` of `k` single boxes in distinct
    /// columns, every one of the `2^k` partial additions being a vertex.
    Interval,
    /// Any meet/join-closed subset isomorphic to `B_k` (not necessarily an
    /// interval, so its atoms may differ from the bottom by several boxes).
    Sublattice,
}

/// Number of distinct `B_k` sublattices of `lattice` under `definition`.
pub fn count_boolean_sublattices(lattice: &YoungLattice, k: usize, definition: BooleanDefinition) -> Result<u64> {
    if k == 0 {
        return Err(Error::Domain("k must be at least 1".into()));
    }
    let set: HashSet<&[u32]> = lattice.vertices.iter().map(|v| v.columns()).collect();
    let mut total = 0u64;
    match definition {
        BooleanDefinition::Interval => {
            for v in &lattice.vertices {
                let cols = v.columns();
                let addable: Vec<usize> = (1..cols.len().saturating_sub(1))
                    .filter(|&c| {
                        let mut up = cols.to_vec();
                        up[c] += 1;
                        set.contains(up.as_slice())
                    })
                    .collect();
                if addable.len() < k {
                    continue;
                }
                for_each_subset(addable.len(), k, &mut |chosen| {
                    let ok = (0u32..(1 << k)).all(|mask| {
                        let mut w = cols.to_vec();
                        for (t, &idx) in chosen.iter().enumerate() {
                            if mask >> t & 1 == 1 {
                                w[addable[idx]] += 1;
                            }
                        }
                        set.contains(w.as_slice())
                    });
                    if ok {
                        total += 1;
                    }
                });
            }
        }
        BooleanDefinition::Sublattice => {
            for b in &lattice.vertices {
                let bottom = b.columns();
                let above: Vec<&[u32]> = lattice
                    .vertices
                    .iter()
                    .map(|v| v.columns())
                    .filter(|v| *v != bottom && v.iter().zip(bottom).all(|(x, y)| x >= y))
                    .collect();
                let mut chosen: Vec<usize> = Vec::with_capacity(k);
                atoms_rec(&above, bottom, k, 0, &mut chosen, &set, &mut total);
            }
        }
    }
    Ok(total)
}

fn atoms_rec(
    above: &[&[u32]],
    bottom: &[u32],
    k: usize,
    start: usize,
    chosen: &mut Vec<usize>,
    set: &HashSet<&[u32]>,
    total: &mut u64,
) {
    if chosen.len() == k {
        // Joins of every subset must be vertices; meets are then forced by distributivity.
        let ok = (1u32..(1 << k)).all(|mask| {
            let mut w = bottom.to_vec();
            for (t, &idx) in chosen.iter().enumerate() {
                if mask >> t & 1 == 1 {
                    w = join(&w, above[idx]);
                }
            }
            set.contains(w.as_slice())
        });
        if ok {
            *total += 1;
        }
        return;
    }
    for idx in start..above.len() {
        if chosen.iter().all(|&c| meet(above[c], above[idx]) == bottom) {
            chosen.push(idx);
            atoms_rec(above, bottom, k, idx + 1, chosen, set, total);
            chosen.pop();
        }
    }
}

fn for_each_subset(n: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(n: usize, k: usize, start: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(n, k, i + 1, cur, f);
            cur.pop();
        }
    }
    let mut cur = Vec::with_capacity(k);
    rec(n, k, 0, &mut cur, f);
}

/// Chain of Boolean factors glued at shared extremal vertices, read top-down.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrdinalSum {
    /// Ranks of the factors `B_r`, from the top of the lattice downwards.
    pub factors: Vec<usize>,
    /// Vertices not covered by any factor.
    pub residual: Vec<ExtendedFerrers>,
}

impl OrdinalSum {
    pub fn is_complete(&self) -> bool {
        self.residual.is_empty()
    }

    /// Number of factors of each rank.
    pub fn multiplicities(&self) -> BTreeMap<usize, usize> {
        let mut m = BTreeMap::new();
        for &r in &self.factors {
            *m.entry(r).or_insert(0) += 1;
        }
        m
    }
}

impl fmt::Display for OrdinalSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.factors.is_empty() {
            return write!(f, "(empty)");
        }
        let parts: Vec<String> = self.factors.iter().map(|r| format!("B{r}")).collect();
        write!(f, "{}", parts.join(" ⊞ "))
    }
}

/// Greedy top-down decomposition: from the current top remove every box
/// whose removal stays in the lattice, record the Boolean interval spanned by
/// those removals, and continue from its bottom.
pub fn ordinal_sum_decomposition(lattice: &YoungLattice) -> Result<OrdinalSum> {
    if lattice.vertices.is_empty() {
        return Ok(OrdinalSum { factors: vec![], residual: vec![] });
    }
    let set: HashSet<&[u32]> = lattice.vertices.iter().map(|v| v.columns()).collect();
    let mut top = lattice.vertices[0].columns().to_vec();
    for v in &lattice.vertices {
        top = join(&top, v.columns());
    }
    if !set.contains(top.as_slice()) {
        return Err(Error::Domain("vertex set has no greatest element".into()));
    }
    let mut covered: HashSet<Vec<u32>> = HashSet::new();
    covered.insert(top.clone());
    let mut factors = Vec::new();
    loop {
        let removable: Vec<usize> = (1..top.len().saturating_sub(1))
            .filter(|&c| {
                top[c] > 0 && {
                    let mut w = top.clone();
                    w[c] -= 1;
                    set.contains(w.as_slice())
                }
            })
            .collect();
        if removable.is_empty() {
            break;
        }
        let r = removable.len();
        let mut interval = Vec::with_capacity(1 << r);
        for mask in 0u32..(1 << r) {
            let mut w = top.clone();
            for (t, &c) in removable.iter().enumerate() {
                if mask >> t & 1 == 1 {
                    w[c] -= 1;
                }
            }
            interval.push(w);
        }
        if !interval.iter().all(|w| set.contains(w.as_slice())) {
            break;
        }
        factors.push(r);
        let bottom = interval.last().expect("non-empty").clone();
        covered.extend(interval);
        top = bottom;
    }
    let residual = lattice.vertices.iter().filter(|v| !covered.contains(v.columns())).cloned().collect();
    Ok(OrdinalSum { factors, residual })
}
