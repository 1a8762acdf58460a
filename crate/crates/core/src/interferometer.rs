//! Sliced Reck meshes and exact Fock-space evolution.
//!
//! A gate `U_ij(θ, ψ)` acts on creation operators as
//!
//! ```text
//! U a_i† U† = e^{-iψ/2} ( cos(θ/2) a_i† + sin(θ/2) a_j†)
//! U a_j† U† = e^{+iψ/2} (-sin(θ/2) a_i† + cos(θ/2) a_j†)
//! ```
//!
//! which is the adjoint of the annihilation-operator form with the global
//! `e^{-iψ/2}` prefactor. Two-mode Fock amplitudes follow from the binomial
//! expansion of `(U a_i† U†)^p (U a_j† U†)^q`.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{enumerate_basis, sector_size, DetectionPattern, SectorBasis};

pub type C64 = Complex64;

/// Sectors up to this size are simulated with dense amplitude vectors.
pub const DENSE_LIMIT: u64 = 1_000_000;

/// Tolerance on `|‖ψ‖² − 1|` accepted by operations that require normalization.
pub const NORM_TOLERANCE: f64 = 1e-9;

/// `ln k!` for `k = 0..=limit`.
pub(crate) fn ln_factorials(limit: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(limit + 1);
    let mut acc = 0.0f64;
    out.push(0.0);
    for k in 1..=limit {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}

/// `C(n, k)` as a float, exact while it fits in 53 bits.
pub(crate) fn binomial_f64(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}

/// Beam splitter with phase shifter coupling modes `i < j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoModeGate {
    pub i: usize,
    pub j: usize,
    pub theta: f64,
    pub psi: f64,
}

impl TwoModeGate {
    pub fn new(i: usize, j: usize, theta: f64, psi: f64) -> Result<Self> {
        if i >= j {
            return Err(Error::Domain(format!("gate modes must satisfy i < j, got ({i}, {j})")));
        }
        Ok(TwoModeGate { i, j, theta, psi })
    }

    /// `(α, β, γ, δ)` with `U a_i† U† = α a_i† + β a_j†` and `U a_j† U† = γ a_i† + δ a_j†`.
    pub fn coefficients(&self) -> [C64; 4] {
        let (s, c) = (self.theta / 2.0).sin_cos();
        let minus = C64::from_polar(1.0, -self.psi / 2.0);
        let plus = C64::from_polar(1.0, self.psi / 2.0);
        [minus * c, minus * s, plus * (-s), plus * c]
    }

    /// Derivatives of [`coefficients`](Self::coefficients) with respect to θ.
    pub fn coefficients_dtheta(&self) -> [C64; 4] {
        let (s, c) = (self.theta / 2.0).sin_cos();
        let minus = C64::from_polar(1.0, -self.psi / 2.0);
        let plus = C64::from_polar(1.0, self.psi / 2.0);
        [minus * (-s / 2.0), minus * (c / 2.0), plus * (-c / 2.0), plus * (-s / 2.0)]
    }

    /// Derivatives of [`coefficients`](Self::coefficients) with respect to ψ.
    pub fn coefficients_dpsi(&self) -> [C64; 4] {
        let [a, b, g, d] = self.coefficients();
        let down = C64::new(0.0, -0.5);
        let up = C64::new(0.0, 0.5);
        [a * down, b * down, g * up, d * up]
    }

    /// `⟨a, p+q−a| U |p, q⟩` on the mode pair `(i, j)`.
    pub fn amplitude(&self, p: usize, q: usize, a: usize) -> C64 {
        let lf = ln_factorials(p + q);
        amplitude_with(&self.coefficients(), &lf, p, q, a)
    }

    /// The `(m+1)×(m+1)` block of the gate on total photon number `m`,
    /// row-major with entry `[a][p] = ⟨a, m−a| U |p, m−p⟩`.
    pub fn block(&self, m: usize) -> Vec<C64> {
        let coeffs = self.coefficients();
        let lf = ln_factorials(m);
        let mut out = vec![C64::new(0.0, 0.0); (m + 1) * (m + 1)];
        for p in 0..=m {
            for a in 0..=m {
                out[a * (m + 1) + p] = amplitude_with(&coeffs, &lf, p, m - p, a);
            }
        }
        out
    }
}

/// Amplitude `⟨a, m−a| U |p, q⟩` for coefficients `(α, β, γ, δ)`.
pub(crate) fn amplitude_with(coeffs: &[C64; 4], lf: &[f64], p: usize, q: usize, a: usize) -> C64 {
    let m = p + q;
    if a > m {
        return C64::new(0.0, 0.0);
    }
    let [al, be, ga, de] = *coeffs;
    let mut sum = C64::new(0.0, 0.0);
    let r_lo = a.saturating_sub(q);
    let r_hi = p.min(a);
    for r in r_lo..=r_hi {
        let t = a - r;
        let coef = binomial_f64(p, r) * binomial_f64(q, t);
        sum += al.powi(r as i32) * be.powi((p - r) as i32) * ga.powi(t as i32) * de.powi((q - t) as i32) * coef;
    }
    let scale = (0.5 * (lf[a] + lf[m - a] - lf[p] - lf[q])).exp();
    sum * scale
}

/// Ordered gate layout of slices `1..=depth` of the triangular Reck mesh.
///
/// Slice `s` holds the nearest-neighbour gates `(k, k+1)` for `k = 0..M−1−s`,
/// so slice 1 is the full diagonal of `M − 1` gates and the complete mesh has
/// `M(M−1)/2` gates. Angles are zero placeholders.
pub fn build_reck_slices(m: usize, depth: usize) -> Result<Vec<TwoModeGate>> {
    if m < 2 {
        return Err(Error::Domain(format!("a Reck mesh needs M >= 2, got {m}")));
    }
    if depth == 0 || depth > m - 1 {
        return Err(Error::Domain(format!("depth must lie in 1..={}, got {depth}", m - 1)));
    }
    let mut gates = Vec::new();
    for s in 1..=depth {
        for k in 0..(m - s) {
            gates.push(TwoModeGate { i: k, j: k + 1, theta: 0.0, psi: 0.0 });
        }
    }
    Ok(gates)
}

/// One photon per mode for `n = M`; for `n = M − 1` the first mode is left empty.
pub fn standard_input(m: usize, n: usize) -> Result<DetectionPattern> {
    if m == 0 {
        return Err(Error::InvalidDimension("M must be at least 1".into()));
    }
    if n == m {
        DetectionPattern::new(vec![1; m])
    } else if n + 1 == m {
        let mut v = vec![1; m];
        v[0] = 0;
        DetectionPattern::new(v)
    } else {
        Err(Error::Domain(format!("photon number must be M or M-1, got n={n} for M={m}")))
    }
}

/// A sliced Reck circuit bound to an input pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitSpec {
    #[serde(rename = "M")]
    pub modes: usize,
    pub depth: usize,
    pub input: DetectionPattern,
    pub gates: Vec<TwoModeGate>,
}

impl CircuitSpec {
    /// Circuit with the standard layout for `depth` and the given input.
    pub fn new(m: usize, depth: usize, input: DetectionPattern) -> Result<Self> {
        let gates = build_reck_slices(m, depth)?;
        let spec = CircuitSpec { modes: m, depth, input, gates };
        spec.validate()?;
        Ok(spec)
    }

    /// Circuit with the standard layout and [`standard_input`] for `n` photons.
    pub fn standard(m: usize, n: usize, depth: usize) -> Result<Self> {
        Self::new(m, depth, standard_input(m, n)?)
    }

    pub fn validate(&self) -> Result<()> {
        let expected = build_reck_slices(self.modes, self.depth)?;
        if expected.len() != self.gates.len() || expected.iter().zip(&self.gates).any(|(e, g)| e.i != g.i || e.j != g.j)
        {
            return Err(Error::Config(format!(
                "gate layout does not match Reck slicing for M={} depth={}",
                self.modes, self.depth
            )));
        }
        if self.input.modes() != self.modes {
            return Err(Error::Config("input pattern length differs from M".into()));
        }
        if self.input.counts().iter().any(|&c| c > 1) {
            return Err(Error::Config("input must hold at most one photon per mode".into()));
        }
        let n = self.input.total();
        if n != self.modes && n + 1 != self.modes {
            return Err(Error::Config(format!("input photon number {n} is neither M nor M-1")));
        }
        Ok(())
    }

    pub fn photons(&self) -> usize {
        self.input.total()
    }

    /// Length of the parameter vector: θ per gate, plus ψ per gate with phases.
    pub fn parameter_count(&self, with_phases: bool) -> usize {
        if with_phases {
            2 * self.gates.len()
        } else {
            self.gates.len()
        }
    }

    /// Copy with angles taken from `params` (`[θ..]` or `[θ.., ψ..]`).
    pub fn bind(&self, params: &[f64]) -> Result<CircuitSpec> {
        let k = self.gates.len();
        if params.len() != k && params.len() != 2 * k {
            return Err(Error::Config(format!("expected {k} or {} parameters, got {}", 2 * k, params.len())));
        }
        let mut out = self.clone();
        for (g, gate) in out.gates.iter_mut().enumerate() {
            gate.theta = params[g];
            if params.len() == 2 * k {
                gate.psi = params[k + g];
            }
        }
        Ok(out)
    }

    /// True when phases cannot influence output probabilities (single slice).
    pub fn phases_are_inert(&self) -> bool {
        self.depth == 1
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: CircuitSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone)]
enum Amplitudes {
    Dense { basis: Arc<SectorBasis>, amps: Vec<C64> },
    Sparse(BTreeMap<Vec<u8>, C64>),
}

/// Pure state on a fixed `(M, n)` sector.
#[derive(Debug, Clone)]
pub struct QuantumState {
    modes: usize,
    photons: usize,
    amps: Amplitudes,
}

impl QuantumState {
    /// Basis state `|p⟩`, dense when the sector is at most [`DENSE_LIMIT`].
    pub fn basis_state(p: &DetectionPattern) -> Result<Self> {
        let (m, n) = (p.modes(), p.total());
        let size = sector_size(m, n).unwrap_or(u64::MAX);
        if size <= DENSE_LIMIT {
            let basis = Arc::new(enumerate_basis(m, n)?);
            Self::basis_state_in(basis, p)
        } else {
            let mut map = BTreeMap::new();
            map.insert(p.counts().to_vec(), C64::new(1.0, 0.0));
            Ok(QuantumState { modes: m, photons: n, amps: Amplitudes::Sparse(map) })
        }
    }

    /// Basis state in a dense vector over a shared basis.
    pub fn basis_state_in(basis: Arc<SectorBasis>, p: &DetectionPattern) -> Result<Self> {
        let idx = basis.pattern_to_index(p)?;
        let mut amps = vec![C64::new(0.0, 0.0); basis.len()];
        amps[idx] = C64::new(1.0, 0.0);
        Ok(QuantumState { modes: basis.modes(), photons: basis.photons(), amps: Amplitudes::Dense { basis, amps } })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn photons(&self) -> usize {
        self.photons
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.amps, Amplitudes::Dense { .. })
    }

    pub fn norm_sqr(&self) -> f64 {
        match &self.amps {
            Amplitudes::Dense { amps, .. } => amps.iter().map(|a| a.norm_sqr()).sum(),
            Amplitudes::Sparse(map) => map.values().map(|a| a.norm_sqr()).sum(),
        }
    }

    /// Amplitude of `p` (zero outside the stored support).
    pub fn amplitude(&self, p: &DetectionPattern) -> C64 {
        if p.modes() != self.modes || p.total() != self.photons {
            return C64::new(0.0, 0.0);
        }
        match &self.amps {
            Amplitudes::Dense { basis, amps } => amps[basis.rank(p.counts())],
            Amplitudes::Sparse(map) => map.get(p.counts()).copied().unwrap_or_default(),
        }
    }

    /// `(pattern, amplitude)` pairs in canonical order, exact zeros skipped.
    pub fn entries(&self) -> Vec<(DetectionPattern, C64)> {
        let mut out = Vec::new();
        self.for_each_nonzero(|counts, a| out.push((DetectionPattern::new(counts.to_vec()).expect("non-empty"), a)));
        out
    }

    fn for_each_nonzero(&self, mut f: impl FnMut(&[u8], C64)) {
        let zero = C64::new(0.0, 0.0);
        match &self.amps {
            Amplitudes::Dense { basis, amps } => {
                for (idx, &a) in amps.iter().enumerate() {
                    if a != zero {
                        f(basis.counts(idx), a);
                    }
                }
            }
            Amplitudes::Sparse(map) => {
                for (counts, &a) in map.iter().rev() {
                    if a != zero {
                        f(counts, a);
                    }
                }
            }
        }
    }

    fn check_normalized(&self) -> Result<()> {
        let dev = (self.norm_sqr() - 1.0).abs();
        if dev > NORM_TOLERANCE {
            return Err(Error::Numeric(format!("state norm deviates from 1 by {dev:e}")));
        }
        Ok(())
    }

    fn apply_in_place(&mut self, gate: &TwoModeGate) -> Result<()> {
        if gate.j >= self.modes || gate.i >= gate.j {
            return Err(Error::Domain(format!("gate ({}, {}) does not fit {} modes", gate.i, gate.j, self.modes)));
        }
        let n = self.photons;
        let blocks: Vec<Vec<C64>> = (0..=n).map(|m| gate.block(m)).collect();
        let (gi, gj) = (gate.i, gate.j);
        let zero = C64::new(0.0, 0.0);
        match &mut self.amps {
            Amplitudes::Dense { basis, amps } => {
                let mut out = vec![zero; amps.len()];
                let mut scratch = vec![0u8; self.modes];
                for (idx, &amp) in amps.iter().enumerate() {
                    if amp == zero {
                        continue;
                    }
                    scratch.copy_from_slice(basis.counts(idx));
                    let (p, q) = (scratch[gi] as usize, scratch[gj] as usize);
                    let m = p + q;
                    let block = &blocks[m];
                    for a in 0..=m {
                        let b = block[a * (m + 1) + p];
                        if b == zero {
                            continue;
                        }
                        scratch[gi] = a as u8;
                        scratch[gj] = (m - a) as u8;
                        out[basis.rank(&scratch)] += b * amp;
                    }
                }
                *amps = out;
            }
            Amplitudes::Sparse(map) => {
                let mut out: BTreeMap<Vec<u8>, C64> = BTreeMap::new();
                for (counts, &amp) in map.iter() {
                    if amp == zero {
                        continue;
                    }
                    let (p, q) = (counts[gi] as usize, counts[gj] as usize);
                    let m = p + q;
                    let block = &blocks[m];
                    for a in 0..=m {
                        let b = block[a * (m + 1) + p];
                        if b == zero {
                            continue;
                        }
                        let mut key = counts.clone();
                        key[gi] = a as u8;
                        key[gj] = (m - a) as u8;
                        *out.entry(key).or_insert(zero) += b * amp;
                    }
                }
                *map = out;
            }
        }
        Ok(())
    }
}

/// Applies one gate to a normalized state.
pub fn apply_gate(state: &QuantumState, gate: &TwoModeGate) -> Result<QuantumState> {
    state.check_normalized()?;
    let mut out = state.clone();
    out.apply_in_place(gate)?;
    Ok(out)
}

/// `U|in⟩` with the gates of `circuit` applied in order, angles from `params`.
pub fn evolve(circuit: &CircuitSpec, params: &[f64]) -> Result<QuantumState> {
    evolve_bound(&circuit.bind(params)?)
}

/// `U|in⟩` using the angles stored in the circuit's gates.
pub fn evolve_bound(circuit: &CircuitSpec) -> Result<QuantumState> {
    let mut state = QuantumState::basis_state(&circuit.input)?;
    for g in &circuit.gates {
        state.apply_in_place(g)?;
    }
    Ok(state)
}

/// Evolution over a pre-built basis, avoiding re-enumeration in hot loops.
pub fn evolve_in(basis: &Arc<SectorBasis>, circuit: &CircuitSpec, params: &[f64]) -> Result<QuantumState> {
    let bound = circuit.bind(params)?;
    let mut state = QuantumState::basis_state_in(Arc::clone(basis), &bound.input)?;
    for g in &bound.gates {
        state.apply_in_place(g)?;
    }
    Ok(state)
}

/// Born-rule probabilities over detection patterns, in canonical order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternDistribution {
    pub modes: usize,
    pub photons: usize,
    pub entries: Vec<(DetectionPattern, f64)>,
}

impl PatternDistribution {
    /// Point mass on a single pattern.
    pub fn point(p: DetectionPattern) -> Self {
        PatternDistribution { modes: p.modes(), photons: p.total(), entries: vec![(p, 1.0)] }
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|(_, w)| w).sum()
    }

    /// Patterns with probability above `threshold`.
    pub fn support(&self, threshold: f64) -> Vec<DetectionPattern> {
        self.entries.iter().filter(|(_, w)| *w > threshold).map(|(p, _)| p.clone()).collect()
    }

    pub fn probability(&self, p: &DetectionPattern) -> f64 {
        self.entries.iter().find(|(q, _)| q == p).map(|(_, w)| *w).unwrap_or(0.0)
    }
}

/// Probabilities `|α_n|²` of a normalized state.
pub fn exact_distribution(state: &QuantumState) -> Result<PatternDistribution> {
    state.check_normalized()?;
    let mut entries = Vec::new();
    state.for_each_nonzero(|counts, a| {
        let w = a.norm_sqr();
        if w > 0.0 {
            entries.push((DetectionPattern::new(counts.to_vec()).expect("non-empty"), w));
        }
    });
    Ok(PatternDistribution { modes: state.modes, photons: state.photons, entries })
}

type Matrix = Vec<Vec<C64>>;

fn identity(m: usize) -> Matrix {
    (0..m).map(|r| (0..m).map(|c| if r == c { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) }).collect()).collect()
}

/// Left-multiplies `t` by the single-particle matrix of a gate with coefficients `c`.
fn left_apply(t: &mut Matrix, i: usize, j: usize, c: &[C64; 4], derivative: bool) {
    let [al, be, ga, de] = *c;
    let m = t.len();
    for col in 0..m {
        let (x, y) = (t[i][col], t[j][col]);
        t[i][col] = al * x + ga * y;
        t[j][col] = be * x + de * y;
    }
    if derivative {
        // The derivative of the embedded gate vanishes outside rows i and j.
        for (r, row) in t.iter_mut().enumerate() {
            if r != i && r != j {
                row.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
            }
        }
    }
}

/// Single-particle transfer matrix `T` with `U a_k† U† = Σ_l T_lk a_l†`.
pub fn transfer_matrix(circuit: &CircuitSpec, params: &[f64]) -> Result<Matrix> {
    let bound = circuit.bind(params)?;
    let mut t = identity(circuit.modes);
    for g in &bound.gates {
        left_apply(&mut t, g.i, g.j, &g.coefficients(), false);
    }
    Ok(t)
}

/// Derivative of the transfer matrix with respect to parameter `index`.
pub fn transfer_matrix_derivative(circuit: &CircuitSpec, params: &[f64], index: usize) -> Result<Matrix> {
    let bound = circuit.bind(params)?;
    let k = bound.gates.len();
    if index >= params.len() {
        return Err(Error::Domain(format!("parameter index {index} out of range")));
    }
    let (gate_idx, is_phase) = if index < k { (index, false) } else { (index - k, true) };
    let mut t = identity(circuit.modes);
    for (g_idx, g) in bound.gates.iter().enumerate() {
        if g_idx == gate_idx {
            let d = if is_phase { g.coefficients_dpsi() } else { g.coefficients_dtheta() };
            left_apply(&mut t, g.i, g.j, &d, true);
        } else {
            left_apply(&mut t, g.i, g.j, &g.coefficients(), false);
        }
    }
    Ok(t)
}

fn check_hermitian(o: &[Vec<C64>], m: usize) -> Result<()> {
    if o.len() != m || o.iter().any(|r| r.len() != m) {
        return Err(Error::Domain(format!("observable must be {m}x{m}")));
    }
    let mut dev = 0.0f64;
    for a in 0..m {
        for b in 0..m {
            dev = dev.max((o[a][b] - o[b][a].conj()).norm());
        }
    }
    if dev > 1e-9 {
        return Err(Error::Domain(format!("observable is not Hermitian (deviation {dev:e})")));
    }
    Ok(())
}

/// `Σ_k n_k Σ_ab conj(A_ak) O_ab B_bk` for transfer-like matrices `A`, `B`.
fn bilinear(input: &DetectionPattern, o: &[Vec<C64>], a: &Matrix, b: &Matrix) -> C64 {
    let m = o.len();
    let mut total = C64::new(0.0, 0.0);
    for (k, &n_k) in input.counts().iter().enumerate() {
        if n_k == 0 {
            continue;
        }
        let mut s = C64::new(0.0, 0.0);
        for x in 0..m {
            let mut inner = C64::new(0.0, 0.0);
            for y in 0..m {
                inner += o[x][y] * b[y][k];
            }
            s += a[x][k].conj() * inner;
        }
        total += s * n_k as f64;
    }
    total
}

/// `⟨in| U† O U |in⟩` for the bilinear observable `O = Σ_ab o_ab a_a† a_b`,
/// from the `M×M` transfer matrix only.
pub fn schwinger_expectation(circuit: &CircuitSpec, params: &[f64], o: &[Vec<C64>]) -> Result<f64> {
    check_hermitian(o, circuit.modes)?;
    let t = transfer_matrix(circuit, params)?;
    Ok(bilinear(&circuit.input, o, &t, &t).re)
}

/// Analytic derivative of [`schwinger_expectation`] with respect to parameter `index`.
pub fn schwinger_derivative(circuit: &CircuitSpec, params: &[f64], o: &[Vec<C64>], index: usize) -> Result<f64> {
    check_hermitian(o, circuit.modes)?;
    let t = transfer_matrix(circuit, params)?;
    let dt = transfer_matrix_derivative(circuit, params, index)?;
    Ok(2.0 * bilinear(&circuit.input, o, &t, &dt).re)
}

/// `⟨ψ| Σ_ab o_ab a_a† a_b |ψ⟩` by direct action on Fock basis states.
pub fn fock_expectation(state: &QuantumState, o: &[Vec<C64>]) -> Result<f64> {
    check_hermitian(o, state.modes)?;
    let entries = state.entries();
    let lookup: BTreeMap<Vec<u8>, C64> = entries.iter().map(|(p, a)| (p.counts().to_vec(), *a)).collect();
    let mut total = C64::new(0.0, 0.0);
    for (p, amp) in &entries {
        let counts = p.counts();
        for b in 0..state.modes {
            if counts[b] == 0 {
                continue;
            }
            for a in 0..state.modes {
                let mut out = counts.to_vec();
                let f_b = (out[b] as f64).sqrt();
                out[b] -= 1;
                let f_a = (out[a] as f64 + 1.0).sqrt();
                out[a] += 1;
                if let Some(bra) = lookup.get(&out) {
                    total += bra.conj() * o[a][b] * *amp * (f_a * f_b);
                }
            }
        }
    }
    Ok(total.re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn slice_layout_counts() {
        assert_eq!(build_reck_slices(4, 1).unwrap().len(), 3);
        assert_eq!(build_reck_slices(4, 2).unwrap().len(), 5);
        assert_eq!(build_reck_slices(4, 3).unwrap().len(), 6);
        for m in 2..=9 {
            assert_eq!(build_reck_slices(m, m - 1).unwrap().len(), m * (m - 1) / 2);
        }
        assert!(build_reck_slices(4, 0).is_err());
        assert!(build_reck_slices(4, 4).is_err());
    }

    #[test]
    fn hong_ou_mandel() {
        let gate = TwoModeGate::new(0, 1, PI / 2.0, 0.0).unwrap();
        let input = DetectionPattern::new(vec![1, 1]).unwrap();
        let s = apply_gate(&QuantumState::basis_state(&input).unwrap(), &gate).unwrap();
        let d = exact_distribution(&s).unwrap();
        let p = |v: Vec<u8>| d.probability(&DetectionPattern::new(v).unwrap());
        assert!(p(vec![1, 1]) < 1e-12);
        assert!((p(vec![2, 0]) - 0.5).abs() < 1e-12);
        assert!((p(vec![0, 2]) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn blocks_are_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let g = TwoModeGate::new(0, 1, rng.gen_range(0.0..2.0 * PI), rng.gen_range(0.0..2.0 * PI)).unwrap();
            for m in 0..=6 {
                let b = g.block(m);
                let d = m + 1;
                for x in 0..d {
                    for y in 0..d {
                        let mut s = C64::new(0.0, 0.0);
                        for r in 0..d {
                            s += b[r * d + x].conj() * b[r * d + y];
                        }
                        let target = if x == y { 1.0 } else { 0.0 };
                        assert!((s - c(target)).norm() < 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn zero_angles_leave_input() {
        let circuit = CircuitSpec::standard(4, 4, 3).unwrap();
        let s = evolve(&circuit, &[0.0; 6]).unwrap();
        let d = exact_distribution(&s).unwrap();
        assert_eq!(d.entries.len(), 1);
        assert_eq!(d.entries[0].0, circuit.input);
        assert!((d.entries[0].1 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn single_photon_matches_transfer_matrix() {
        let input = DetectionPattern::new(vec![0, 1, 0]).unwrap();
        let mut circuit = CircuitSpec { modes: 3, depth: 2, input, gates: build_reck_slices(3, 2).unwrap() };
        circuit.gates[0].theta = 0.3;
        circuit.gates[1].theta = 1.1;
        circuit.gates[1].psi = 0.4;
        circuit.gates[2].theta = 2.0;
        let params: Vec<f64> =
            circuit.gates.iter().map(|g| g.theta).chain(circuit.gates.iter().map(|g| g.psi)).collect();
        let t = transfer_matrix(&circuit, &params).unwrap();
        let s = evolve(&circuit, &params).unwrap();
        for l in 0..3 {
            let mut v = vec![0u8; 3];
            v[l] = 1;
            let amp = s.amplitude(&DetectionPattern::new(v).unwrap());
            assert!((amp - t[l][1]).norm() < 1e-12);
        }
    }

    #[test]
    fn sparse_and_dense_agree() {
        let circuit = CircuitSpec::standard(4, 3, 2).unwrap();
        let params = [0.4, 1.3, 2.2, 0.7, 1.9, 0.1, 0.2, 0.3, 0.4, 0.5];
        let dense = evolve(&circuit, &params).unwrap();
        let bound = circuit.bind(&params).unwrap();
        let mut map = BTreeMap::new();
        map.insert(circuit.input.counts().to_vec(), c(1.0));
        let mut sparse = QuantumState { modes: 4, photons: 3, amps: Amplitudes::Sparse(map) };
        for g in &bound.gates {
            sparse.apply_in_place(g).unwrap();
        }
        assert!(!sparse.is_dense());
        let (a, b) = (dense.entries(), sparse.entries());
        assert_eq!(a.len(), b.len());
        for ((pa, xa), (pb, xb)) in a.iter().zip(&b) {
            assert_eq!(pa, pb);
            assert!((xa - xb).norm() < 1e-13);
        }
    }

    #[test]
    fn apply_gate_rejects_unnormalized_state() {
        let input = DetectionPattern::new(vec![1, 1]).unwrap();
        let mut s = QuantumState::basis_state(&input).unwrap();
        if let Amplitudes::Dense { amps, .. } = &mut s.amps {
            amps[1] = c(2.0);
        }
        let g = TwoModeGate::new(0, 1, 0.1, 0.0).unwrap();
        assert!(matches!(apply_gate(&s, &g), Err(Error::Numeric(_))));
    }

    #[test]
    fn schwinger_identity_counts_photons() {
        let circuit = CircuitSpec::standard(5, 4, 2).unwrap();
        let o: Vec<Vec<C64>> = identity(5);
        let params: Vec<f64> = (0..circuit.gates.len()).map(|k| 0.3 * k as f64).collect();
        assert!((schwinger_expectation(&circuit, &params, &o).unwrap() - 4.0).abs() < 1e-12);
        let mut bad = identity(5);
        bad[0][1] = c(1.0);
        assert!(schwinger_expectation(&circuit, &params, &bad).is_err());
    }

    #[test]
    fn circuit_json_round_trip() {
        let circuit = CircuitSpec::standard(4, 3, 2).unwrap().bind(&[0.1, 0.2, 0.3, 0.4, 0.5]).unwrap();
        let text = circuit.to_json().unwrap();
        assert!(text.contains("\"M\": 4"));
        assert_eq!(CircuitSpec::from_json(&text).unwrap(), circuit);
    }

    #[test]
    fn standard_inputs() {
        assert_eq!(standard_input(4, 4).unwrap().counts(), &[1, 1, 1, 1]);
        assert_eq!(standard_input(4, 3).unwrap().counts(), &[0, 1, 1, 1]);
        assert!(standard_input(4, 2).is_err());
    }
}
