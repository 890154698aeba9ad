//! Hamiltonian assembly, the physical (Gauss-law) sector, and an exact
//! time-evolution / spectrum oracle for desk-scale registers.
//!
//! H = -m * sum_n Z_n  -  g * sum_e Z_e  -  lambda * sum_e X_u X_e X_v
//! with matter qubits first and gauge qubits after (see `lattice`).

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;

use crate::lattice::Lattice;
use crate::pauli::{Pauli, PauliString};
use crate::sim::StateVector;
use crate::{Error, Result};

/// Default qubit cap for the exact-evolution oracle.
pub const ORACLE_QUBIT_CAP: usize = 22;

/// A computational basis configuration over the full register.
/// Bit value 1 means the -1 eigenstate of Z.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BasisConfig {
    bits: Vec<u8>,
}

impl BasisConfig {
    pub fn zeros(len: usize) -> BasisConfig {
        BasisConfig { bits: vec![0; len] }
    }

    pub fn from_bits(bits: Vec<u8>) -> BasisConfig {
        assert!(bits.iter().all(|&b| b <= 1));
        BasisConfig { bits }
    }

    pub fn from_index(len: usize, index: u64) -> BasisConfig {
        let bits = (0..len).map(|q| ((index >> q) & 1) as u8).collect();
        BasisConfig { bits }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bit(&self, q: usize) -> u8 {
        self.bits[q]
    }

    pub fn flip(&mut self, q: usize) {
        self.bits[q] ^= 1;
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    /// Little-endian basis index (bit q of the index is qubit q).
    pub fn index(&self) -> u64 {
        self.bits
            .iter()
            .enumerate()
            .fold(0u64, |acc, (q, &b)| acc | ((b as u64) << q))
    }

    /// Z eigenvalue (+1/-1) of qubit q.
    pub fn z_eigenvalue(&self, q: usize) -> i8 {
        1 - 2 * self.bits[q] as i8
    }

    /// True if every Gauss check G_n = +1 holds on `lattice`.
    pub fn is_physical(&self, lattice: &Lattice) -> bool {
        (0..lattice.num_nodes()).all(|n| {
            let mut parity = self.bits[lattice.matter_qubit(n)];
            for &e in lattice.incident_edges(n).unwrap() {
                parity ^= self.bits[lattice.gauge_qubit(e)];
            }
            parity == 0
        })
    }
}

/// The Z2-Higgs Hamiltonian on a lattice.
#[derive(Debug, Clone)]
pub struct Hamiltonian {
    lattice: Lattice,
    m: f64,
    g: f64,
    lambda: f64,
    terms: Vec<(f64, PauliString)>,
}

/// Spectral gap of the Gauss-law sector, with ground-state degeneracy
/// so a zero gap is reported as such rather than hidden.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SectorGap {
    pub ground_energy: f64,
    pub gap: f64,
    pub ground_degeneracy: usize,
}

#[derive(Serialize)]
struct TermDump {
    coeff: f64,
    pauli: String,
}

impl Hamiltonian {
    pub fn build(lattice: &Lattice, m: f64, g: f64, lambda: f64) -> Hamiltonian {
        assert!(m.is_finite() && g.is_finite() && lambda.is_finite());
        let mut terms = Vec::with_capacity(lattice.num_nodes() + 2 * lattice.num_edges());
        for n in 0..lattice.num_nodes() {
            terms.push((-m, PauliString::single(lattice.matter_qubit(n), Pauli::Z)));
        }
        for e in 0..lattice.num_edges() {
            terms.push((-g, PauliString::single(lattice.gauge_qubit(e), Pauli::Z)));
        }
        for (e, &(u, v)) in lattice.edges().iter().enumerate() {
            terms.push((
                -lambda,
                PauliString::from_letters([
                    (lattice.matter_qubit(u), Pauli::X),
                    (lattice.gauge_qubit(e), Pauli::X),
                    (lattice.matter_qubit(v), Pauli::X),
                ]),
            ));
        }
        Hamiltonian { lattice: lattice.clone(), m, g, lambda, terms }
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn params(&self) -> (f64, f64, f64) {
        (self.m, self.g, self.lambda)
    }

    pub fn terms(&self) -> &[(f64, PauliString)] {
        &self.terms
    }

    pub fn n_qubits(&self) -> usize {
        self.lattice.num_qubits()
    }

    /// JSON dump of the term list for cross-checking with other tools.
    pub fn dump_terms_json(&self) -> Result<String> {
        let dump: Vec<TermDump> = self
            .terms
            .iter()
            .map(|(c, p)| TermDump { coeff: *c, pauli: p.to_string() })
            .collect();
        Ok(serde_json::to_string_pretty(&dump)?)
    }

    /// Diagonal of H in the Z basis (mass + electric terms).
    fn diagonal(&self) -> Vec<f64> {
        let nq = self.n_qubits();
        let dim = 1usize << nq;
        let nn = self.lattice.num_nodes();
        let ne = self.lattice.num_edges();
        let mut diag = vec![0.0f64; dim];
        for (i, d) in diag.iter_mut().enumerate() {
            let mut acc = 0.0;
            for q in 0..nn {
                let z = 1.0 - 2.0 * ((i >> q) & 1) as f64;
                acc -= self.m * z;
            }
            for e in 0..ne {
                let z = 1.0 - 2.0 * ((i >> (nn + e)) & 1) as f64;
                acc -= self.g * z;
            }
            *d = acc;
        }
        diag
    }

    /// Bit masks flipped by each interaction term.
    fn flip_masks(&self) -> Vec<usize> {
        let nn = self.lattice.num_nodes();
        self.lattice
            .edges()
            .iter()
            .enumerate()
            .map(|(e, &(u, v))| (1usize << u) | (1usize << v) | (1usize << (nn + e)))
            .collect()
    }

    /// y = H x on dense complex vectors (scratch-free, used by the
    /// Chebyshev propagator and energy checks).
    pub fn apply(&self, x: &[Complex64], y: &mut [Complex64], diag: &[f64], masks: &[usize]) {
        let lam = self.lambda;
        for (i, out) in y.iter_mut().enumerate() {
            *out = diag[i] * x[i];
        }
        if lam != 0.0 {
            for &mask in masks {
                for i in 0..x.len() {
                    y[i] -= lam * x[i ^ mask];
                }
            }
        }
    }

    /// <psi|H|psi>.
    pub fn energy(&self, state: &StateVector) -> f64 {
        assert_eq!(state.n_qubits(), self.n_qubits());
        let diag = self.diagonal();
        let masks = self.flip_masks();
        let x = state.amplitudes();
        let mut y = vec![Complex64::new(0.0, 0.0); x.len()];
        self.apply(x, &mut y, &diag, &masks);
        x.iter().zip(&y).map(|(a, b)| (a.conj() * b).re).sum()
    }

    /// e^{-iHt}|psi> via a Chebyshev expansion of the propagator, with
    /// truncation chosen so the series tail is below `tol`.
    pub fn exact_evolve(&self, state: &StateVector, t: f64, tol: f64) -> Result<StateVector> {
        self.exact_evolve_capped(state, t, tol, ORACLE_QUBIT_CAP)
    }

    pub fn exact_evolve_capped(
        &self,
        state: &StateVector,
        t: f64,
        tol: f64,
        cap: usize,
    ) -> Result<StateVector> {
        assert!(t.is_finite() && tol > 0.0);
        let nq = self.n_qubits();
        if nq > cap {
            return Err(Error::RegisterOverCap { got: nq, cap });
        }
        if state.n_qubits() != nq {
            return Err(Error::RegisterMismatch { state: state.n_qubits(), operand: nq });
        }
        if t == 0.0 {
            return Ok(state.clone());
        }
        let diag = self.diagonal();
        let masks = self.flip_masks();
        // Gershgorin bounds: eigenvalues lie in [min(diag) - r, max(diag) + r]
        // with r = N_e * |lambda| (each row has N_e off-diagonal entries).
        let dmin = diag.iter().cloned().fold(f64::INFINITY, f64::min);
        let dmax = diag.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let r = masks.len() as f64 * self.lambda.abs();
        let lo = dmin - r;
        let hi = dmax + r;
        let center = 0.5 * (hi + lo);
        let half = (0.5 * (hi - lo)).max(1e-12) * (1.0 + 1e-9) + 1e-12;

        let x = half * t.abs();
        let coeffs = chebyshev_coefficients(x, center * t, t.signum(), tol)?;

        // Clenshaw-style forward recurrence on T_k(Hs) |psi> with the
        // scaled operator Hs = (H - center) / half.
        let dim = 1usize << nq;
        let mut t_prev: Vec<Complex64> = state.amplitudes().to_vec(); // T_0
        let mut t_cur = vec![Complex64::new(0.0, 0.0); dim];
        let mut scratch = vec![Complex64::new(0.0, 0.0); dim];
        // T_1 = Hs |psi>
        self.apply(&t_prev, &mut scratch, &diag, &masks);
        for i in 0..dim {
            t_cur[i] = (scratch[i] - center * t_prev[i]) / half;
        }
        let mut acc: Vec<Complex64> = (0..dim)
            .map(|i| coeffs[0] * t_prev[i] + coeffs[1] * t_cur[i])
            .collect();
        for ck in coeffs.iter().skip(2) {
            // T_{k+1} = 2 Hs T_k - T_{k-1}
            self.apply(&t_cur, &mut scratch, &diag, &masks);
            for i in 0..dim {
                let next = 2.0 * (scratch[i] - center * t_cur[i]) / half - t_prev[i];
                t_prev[i] = t_cur[i];
                t_cur[i] = next;
                acc[i] += ck * t_cur[i];
            }
        }
        let mut out = StateVector::from_amplitudes(nq, acc)?;
        let norm = out.norm();
        if (norm - 1.0).abs() > 1e-8 {
            return Err(Error::NoConvergence { tol });
        }
        // Remove residual truncation-level norm drift.
        out.normalize();
        Ok(out)
    }

    /// The Gauss-law sector Hamiltonian as a dense symmetric matrix,
    /// plus the full-register basis index of each sector basis state.
    /// Sector dimension is 2^{N_e}: gauge bits are free and each matter
    /// bit is fixed to the parity of its incident gauge bits.
    pub fn physical_sector_matrix(&self) -> Result<(DMatrix<f64>, Vec<u64>)> {
        let ne = self.lattice.num_edges();
        let nn = self.lattice.num_nodes();
        if ne > 12 {
            return Err(Error::RegisterOverCap { got: ne, cap: 12 });
        }
        let dim = 1usize << ne;
        let mut basis = Vec::with_capacity(dim);
        for s in 0..dim as u64 {
            let mut idx = s << nn;
            for n in 0..nn {
                let mut parity = 0u64;
                for &e in self.lattice.incident_edges(n)? {
                    parity ^= (s >> e) & 1;
                }
                idx |= parity << n;
            }
            basis.push(idx);
        }
        let mut h = DMatrix::<f64>::zeros(dim, dim);
        for s in 0..dim {
            // Diagonal: mass and electric terms on the full bitstring.
            let idx = basis[s];
            let mut d = 0.0;
            for n in 0..nn {
                d -= self.m * (1.0 - 2.0 * ((idx >> n) & 1) as f64);
            }
            for e in 0..ne {
                d -= self.g * (1.0 - 2.0 * ((s >> e) & 1) as f64);
            }
            h[(s, s)] = d;
            // Off-diagonal: the interaction on edge e flips gauge bit e
            // (matter bits follow automatically in this parametrization).
            for e in 0..ne {
                let s2 = s ^ (1 << e);
                h[(s, s2)] -= self.lambda;
            }
        }
        Ok((h, basis))
    }

    /// E1 - E0 restricted to the Gauss-law sector.
    pub fn gap_physical_sector(&self) -> Result<SectorGap> {
        let (h, _) = self.physical_sector_matrix()?;
        let eig = SymmetricEigen::new(h);
        let mut evals: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
        evals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let e0 = evals[0];
        let degeneracy = evals.iter().take_while(|&&e| e - e0 < 1e-9).count();
        let gap = if degeneracy > 1 {
            0.0
        } else {
            evals[1] - e0
        };
        Ok(SectorGap { ground_energy: e0, gap, ground_degeneracy: degeneracy })
    }

    /// Ground state of the Gauss-law sector embedded in the full
    /// register (for expectation values of diagonal observables etc.).
    pub fn ground_state_physical(&self) -> Result<StateVector> {
        let (h, basis) = self.physical_sector_matrix()?;
        let nq = self.n_qubits();
        if nq > ORACLE_QUBIT_CAP {
            return Err(Error::RegisterOverCap { got: nq, cap: ORACLE_QUBIT_CAP });
        }
        let eig = SymmetricEigen::new(h);
        let mut best = 0;
        for k in 0..eig.eigenvalues.len() {
            if eig.eigenvalues[k] < eig.eigenvalues[best] {
                best = k;
            }
        }
        let col = eig.eigenvectors.column(best);
        let mut amps = vec![Complex64::new(0.0, 0.0); 1usize << nq];
        for (s, &idx) in basis.iter().enumerate() {
            amps[idx as usize] = Complex64::new(col[s], 0.0);
        }
        let mut out = StateVector::from_amplitudes(nq, amps)?;
        out.normalize();
        Ok(out)
    }
}

/// Chebyshev coefficients c_k = (2 - delta_k0) (-i)^k J_k(x) e^{-i phase},
/// truncated where the Bessel tail drops below `tol`. `sign` carries the
/// sign of t (J_k(-x) = (-1)^k J_k(x) folded in).
fn chebyshev_coefficients(x: f64, phase: f64, sign: f64, tol: f64) -> Result<Vec<Complex64>> {
    let bessel = bessel_j_sequence(x, tol)?;
    let global = Complex64::from_polar(1.0, -phase);
    let mut coeffs = Vec::with_capacity(bessel.len().max(2));
    for (k, &jk) in bessel.iter().enumerate() {
        let prefactor = if k == 0 { 1.0 } else { 2.0 };
        // (-i)^k, with an extra (-1)^k when evolving backwards in time.
        let mut ik = Complex64::new(0.0, -1.0).powu(k as u32);
        if sign < 0.0 && k % 2 == 1 {
            ik = -ik;
        }
        coeffs.push(global * prefactor * jk * ik);
    }
    while coeffs.len() < 2 {
        coeffs.push(Complex64::new(0.0, 0.0));
    }
    Ok(coeffs)
}

/// J_0(x) ... J_K(x) by Miller's downward recurrence, truncated at the
/// first K where the remaining tail is below `tol`.
fn bessel_j_sequence(x: f64, tol: f64) -> Result<Vec<f64>> {
    assert!(x >= 0.0);
    if x == 0.0 {
        return Ok(vec![1.0]);
    }
    // Orders above x + O(x^{1/3}) decay super-exponentially; give a
    // generous margin and verify the tail afterwards.
    let k_max = (x + 12.0 * x.cbrt() + 25.0).ceil() as usize;
    let start = k_max + 20 + (x.sqrt() as usize);
    let mut j = vec![0.0f64; start + 2];
    j[start + 1] = 0.0;
    j[start] = 1e-300;
    for k in (1..=start).rev() {
        j[k - 1] = (2.0 * k as f64 / x) * j[k] - j[k + 1];
        if j[k - 1].abs() > 1e250 {
            for v in j.iter_mut().skip(k - 1) {
                *v *= 1e-250;
            }
        }
    }
    // Normalization: J_0 + 2 sum_{k>=1} J_{2k} = 1.
    let mut norm = j[0];
    let mut k = 2;
    while k <= start {
        norm += 2.0 * j[k];
        k += 2;
    }
    if !norm.is_finite() || norm == 0.0 {
        return Err(Error::NoConvergence { tol });
    }
    for v in j.iter_mut() {
        *v /= norm;
    }
    // Truncate where the remaining tail is negligible.
    let mut cut = k_max.min(start);
    while cut > 1 && j[cut].abs() < tol * 1e-2 && j[cut - 1].abs() < tol * 1e-2 {
        cut -= 1;
    }
    if j[cut].abs() > tol {
        return Err(Error::NoConvergence { tol });
    }
    Ok(j[..=cut].to_vec())
}

/// Basis configuration for charge pairs joined by electric-field
/// strings: endpoints' matter qubits and the gauge qubits along each
/// path are set to 1.
pub fn prepare_string_state(lattice: &Lattice, paths: &[Vec<usize>]) -> Result<BasisConfig> {
    let mut config = BasisConfig::zeros(lattice.num_qubits());
    let mut used_nodes = std::collections::BTreeSet::new();
    for path in paths {
        if path.len() < 2 {
            return Err(Error::InvalidPath("path needs at least two nodes".into()));
        }
        for &n in path {
            if n >= lattice.num_nodes() {
                return Err(Error::UnknownNode(n));
            }
            if !used_nodes.insert(n) {
                return Err(Error::InvalidPath(format!(
                    "node {n} visited more than once"
                )));
            }
        }
        for w in path.windows(2) {
            let e = lattice
                .edge_between(w[0], w[1])
                .ok_or_else(|| Error::InvalidPath(format!(
                    "nodes {} and {} are not adjacent",
                    w[0], w[1]
                )))?;
            config.flip(lattice.gauge_qubit(e));
        }
        config.flip(lattice.matter_qubit(path[0]));
        config.flip(lattice.matter_qubit(path[path.len() - 1]));
    }
    debug_assert!(config.is_physical(lattice));
    Ok(config)
}
