//! Gauss-sector correction: terminal syndrome extraction from measured
//! bitstrings, minimum-weight decoding on the gauge code, post-selection
//! by decoder flip count, and a fault-propagation classifier.

use std::collections::{BTreeSet, HashMap};

use serde::Serialize;

use crate::compiler::{Circuit, Gate};
use crate::lattice::Lattice;
use crate::pauli::{Pauli, PauliString};
use crate::sim::ShotTable;
use crate::{Error, Result};

/// Defect counts above which the decoder falls back to greedy pairing.
pub const EXACT_MATCHING_CAP: usize = 16;

/// Nodes whose Gauss check fails on a measured bitstring.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Syndrome {
    pub defects: BTreeSet<usize>,
}

impl Syndrome {
    pub fn is_empty(&self) -> bool {
        self.defects.is_empty()
    }
}

/// Decoder output: the bit flips predicted to restore the physical sector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Correction {
    pub matter_flips: BTreeSet<usize>,
    pub gauge_flips: BTreeSet<usize>,
    /// True when the defect count exceeded the exact-matching cap and the
    /// pairing was found greedily (weight may then be suboptimal).
    pub greedy: bool,
}

impl Correction {
    pub fn empty() -> Self {
        Correction {
            matter_flips: BTreeSet::new(),
            gauge_flips: BTreeSet::new(),
            greedy: false,
        }
    }

    pub fn weight(&self) -> usize {
        self.matter_flips.len() + self.gauge_flips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matter_flips.is_empty() && self.gauge_flips.is_empty()
    }
}

/// Gauss parity of each node: node n is a defect iff the XOR of the bits
/// on its matter qubit and its incident gauge qubits is odd.
pub fn compute_syndrome(bits: u64, lattice: &Lattice) -> Result<Syndrome> {
    let q = lattice.num_qubits();
    if q < 64 && bits >> q != 0 {
        return Err(Error::BitstringLength {
            got: 64 - bits.leading_zeros() as usize,
            want: q,
        });
    }
    let mut defects = BTreeSet::new();
    for n in 0..lattice.num_nodes() {
        let mut parity = (bits >> lattice.matter_qubit(n)) & 1;
        for &e in lattice.incident_edges(n)? {
            parity ^= (bits >> lattice.gauge_qubit(e)) & 1;
        }
        if parity == 1 {
            defects.insert(n);
        }
    }
    Ok(Syndrome { defects })
}

/// Minimum-weight decoding. A matter flip clears one defect at cost 1; a
/// gauge flip clears an adjacent defect pair at cost 1, so the optimum
/// pairs up a maximum matching of the distance-1 defect graph and clears
/// the rest with matter flips (weight = |defects| - |matching|). Ties at
/// graph distance 2 resolve to matter flips by construction.
pub fn decode(syndrome: &Syndrome, lattice: &Lattice) -> Correction {
    let defects: Vec<usize> = syndrome.defects.iter().copied().collect();
    let k = defects.len();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); k];
    for i in 0..k {
        for j in i + 1..k {
            if lattice.edge_between(defects[i], defects[j]).is_some() {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    let (pairs, greedy) = if k <= EXACT_MATCHING_CAP {
        (max_matching_exact(k, &adj), false)
    } else {
        (max_matching_greedy(k, &adj), true)
    };
    let mut correction = Correction::empty();
    correction.greedy = greedy;
    let mut paired = vec![false; k];
    for &(i, j) in &pairs {
        paired[i] = true;
        paired[j] = true;
        let e = lattice
            .edge_between(defects[i], defects[j])
            .expect("matched defects are adjacent");
        correction.gauge_flips.insert(e);
    }
    for i in 0..k {
        if !paired[i] {
            correction.matter_flips.insert(defects[i]);
        }
    }
    correction
}

/// Maximum matching by exhaustive recursion over the defect bitmask,
/// memoizing the best matching size per residual set.
fn max_matching_exact(k: usize, adj: &[Vec<usize>]) -> Vec<(usize, usize)> {
    fn best(mask: u32, adj: &[Vec<usize>], memo: &mut HashMap<u32, usize>) -> usize {
        if mask == 0 {
            return 0;
        }
        if let Some(&v) = memo.get(&mask) {
            return v;
        }
        let i = mask.trailing_zeros() as usize;
        // Either defect i stays unmatched (matter flip) ...
        let mut v = best(mask & !(1 << i), adj, memo);
        // ... or it pairs with an adjacent defect still in the set.
        for &j in &adj[i] {
            if mask & (1 << j) != 0 {
                v = v.max(1 + best(mask & !(1 << i) & !(1 << j), adj, memo));
            }
        }
        memo.insert(mask, v);
        v
    }
    let mut memo = HashMap::new();
    let mut pairs = Vec::new();
    let mut mask = if k == 32 { u32::MAX } else { (1u32 << k) - 1 };
    while mask != 0 {
        let i = mask.trailing_zeros() as usize;
        let target = best(mask, adj, &mut memo);
        let without_i = mask & !(1 << i);
        if best(without_i, adj, &mut memo) == target {
            mask = without_i;
            continue;
        }
        let j = adj[i]
            .iter()
            .copied()
            .find(|&j| {
                mask & (1 << j) != 0
                    && 1 + best(without_i & !(1 << j), adj, &mut memo) == target
            })
            .expect("memoized optimum is attainable");
        pairs.push((i, j));
        mask = without_i & !(1 << j);
    }
    pairs
}

/// Greedy fallback for very large defect sets: repeatedly pair the
/// lowest-index defect with any remaining neighbor.
fn max_matching_greedy(k: usize, adj: &[Vec<usize>]) -> Vec<(usize, usize)> {
    let mut taken = vec![false; k];
    let mut pairs = Vec::new();
    for i in 0..k {
        if taken[i] {
            continue;
        }
        if let Some(&j) = adj[i].iter().find(|&&j| !taken[j]) {
            taken[i] = true;
            taken[j] = true;
            pairs.push((i, j));
        }
    }
    pairs
}

/// Flip the bits named by a correction.
pub fn apply_correction(bits: u64, correction: &Correction, lattice: &Lattice) -> u64 {
    let mut out = bits;
    for &n in &correction.matter_flips {
        out ^= 1 << lattice.matter_qubit(n);
    }
    for &e in &correction.gauge_flips {
        out ^= 1 << lattice.gauge_qubit(e);
    }
    out
}

/// Decode every shot in place, filling `flip_count` with the correction
/// weight, and return the per-shot corrections in shot order.
pub fn decode_shots(table: &mut ShotTable, lattice: &Lattice) -> Result<Vec<Correction>> {
    let mut corrections = Vec::with_capacity(table.shots.len());
    for shot in table.shots.iter_mut() {
        let syndrome = compute_syndrome(shot.bits, lattice)?;
        let correction = decode(&syndrome, lattice);
        shot.flip_count = Some(correction.weight() as u32);
        corrections.push(correction);
    }
    Ok(corrections)
}

/// Keep whole ascending flip-count classes until at least `min_keep`
/// shots are retained; never splits a class, so the result may exceed
/// `min_keep`. Order within kept classes is preserved.
pub fn postselect(table: &ShotTable, min_keep: usize) -> Result<ShotTable> {
    let total = table.shots.len();
    if min_keep > total {
        return Err(Error::PostselectThreshold { min_keep, total });
    }
    let mut histogram: HashMap<u32, usize> = HashMap::new();
    for shot in &table.shots {
        let flips = shot
            .flip_count
            .ok_or_else(|| Error::Other("decoder flip counts not filled".into()))?;
        *histogram.entry(flips).or_insert(0) += 1;
    }
    let mut classes: Vec<(u32, usize)> = histogram.into_iter().collect();
    classes.sort_unstable();
    let mut kept = 0usize;
    let mut cutoff = 0u32;
    for (flips, count) in classes {
        cutoff = flips;
        kept += count;
        if kept >= min_keep {
            break;
        }
    }
    Ok(ShotTable {
        n_qubits: table.n_qubits,
        master_seed: table.master_seed,
        shots: table
            .shots
            .iter()
            .filter(|s| s.flip_count.unwrap() <= cutoff)
            .copied()
            .collect(),
    })
}

/// Terminal effect of a single Pauli fault propagated to the end of the
/// circuit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum FaultClass {
    /// Terminal X-type weight 1: fully correctable by the decoder.
    CorrectableX,
    /// Terminal X-type weight >= 2 from CNOT spreading.
    XBurst { weight: usize },
    /// No terminal bit flip and at least one anticommuting rotation:
    /// an over/under-rotation of a gauge-invariant generator, invisible
    /// to the Gauss checks.
    GaugeInvariantRotation,
    /// Inserted at the final boundary with a single terminal bit flip:
    /// indistinguishable from a readout error.
    MeasurementFlip,
    /// No terminal bit flip and no rotation disturbed.
    Harmless,
}

/// Full fault-propagation report.
#[derive(Debug, Clone, Serialize)]
pub struct FaultReport {
    /// Exact terminal Pauli (phase discarded).
    pub terminal: PauliString,
    /// Number of rotations whose angle the fault flips in passing; each
    /// is an over/under-rotation of a gauge-invariant term.
    pub rotation_flips: usize,
    pub class: FaultClass,
}

/// Insert `letter` on `qubit` at gate boundary `location` (0 = before the
/// first gate, `gates.len()` = after the last) and conjugate it forward
/// through the rest of the circuit. Every gate is a CNOT, a Pauli, or a
/// Pauli-axis rotation, so propagation is exact: a Pauli either commutes
/// with a rotation's generator or passes through while negating its
/// angle, which is recorded as a rotation flip.
pub fn propagate_fault(
    circuit: &Circuit,
    location: usize,
    qubit: usize,
    letter: Pauli,
) -> Result<FaultReport> {
    if location > circuit.gates.len() || qubit >= circuit.n_qubits {
        return Err(Error::InvalidLocation(location.max(qubit)));
    }
    let mut p = PauliString::single(qubit, letter);
    let mut rotation_flips = 0usize;
    for gate in &circuit.gates[location..] {
        match *gate {
            Gate::Cnot { control, target } => {
                p = p.conjugate_through_cnot(control, target);
            }
            Gate::PauliGate { .. } => {}
            Gate::RotZ { qubit: q, .. } => {
                if p.letter(q).map_or(false, |l| l.anticommutes(Pauli::Z)) {
                    rotation_flips += 1;
                }
            }
            Gate::RotX { qubit: q, .. } => {
                if p.letter(q).map_or(false, |l| l.anticommutes(Pauli::X)) {
                    rotation_flips += 1;
                }
            }
        }
    }
    let flip_weight = p.x_weight();
    let class = match flip_weight {
        0 if rotation_flips > 0 => FaultClass::GaugeInvariantRotation,
        0 => FaultClass::Harmless,
        1 if location == circuit.gates.len() => FaultClass::MeasurementFlip,
        1 => FaultClass::CorrectableX,
        w => FaultClass::XBurst { weight: w },
    };
    Ok(FaultReport {
        terminal: p.unsigned(),
        rotation_flips,
        class,
    })
}

/// Result of the exhaustive code-distance search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DistanceBound {
    Exact(usize),
    /// No nonzero syndrome-free pattern up to `max_weight`; the distance
    /// is at least this value.
    AtLeast(usize),
}

/// Minimum weight of a nonzero X-pattern with empty syndrome, i.e. the
/// minimum Hamming distance between physical bitstrings, by exhaustive
/// search over patterns of weight 1..=max_weight.
pub fn code_distance(lattice: &Lattice, max_weight: usize) -> Result<DistanceBound> {
    let q = lattice.num_qubits();
    if q >= 64 {
        return Err(Error::RegisterOverCap { got: q, cap: 63 });
    }
    for w in 1..=max_weight {
        let mut stack: Vec<(usize, usize, u64)> = vec![(0, 0, 0)];
        while let Some((next, picked, bits)) = stack.pop() {
            if picked == w {
                if compute_syndrome(bits, lattice)?.is_empty() {
                    return Ok(DistanceBound::Exact(w));
                }
                continue;
            }
            for qubit in next..q {
                if q - qubit >= w - picked {
                    stack.push((qubit + 1, picked + 1, bits | (1 << qubit)));
                }
            }
        }
    }
    Ok(DistanceBound::AtLeast(max_weight + 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::QuenchParams;
    use crate::compiler::{trotter_circuit, CompileOptions};
    use crate::model::BasisConfig;
    use crate::sim::Shot;

    fn flake() -> Lattice {
        Lattice::flake(0)
    }

    fn table_with_flips(flips: &[u32]) -> ShotTable {
        ShotTable {
            n_qubits: 4,
            master_seed: 0,
            shots: flips
                .iter()
                .enumerate()
                .map(|(i, &f)| Shot {
                    bits: i as u64,
                    shot_index: i as u64,
                    flip_count: Some(f),
                })
                .collect(),
        }
    }

    #[test]
    fn physical_states_have_empty_syndrome() {
        let lat = flake();
        // Gauge bits free, matter bits fixed by incident parity.
        for gauge in 0u64..1 << lat.num_edges() {
            let mut bits = gauge << lat.num_nodes();
            for n in 0..lat.num_nodes() {
                let mut parity = 0u64;
                for &e in lat.incident_edges(n).unwrap() {
                    parity ^= (gauge >> e) & 1;
                }
                bits |= parity << n;
            }
            let config = BasisConfig::from_index(lat.num_qubits(), bits);
            assert!(config.is_physical(&lat));
            assert!(compute_syndrome(bits, &lat).unwrap().is_empty());
        }
    }

    #[test]
    fn single_flip_syndromes() {
        let lat = flake();
        for n in 0..lat.num_nodes() {
            let s = compute_syndrome(1 << lat.matter_qubit(n), &lat).unwrap();
            assert_eq!(s.defects, BTreeSet::from([n]));
        }
        for e in 0..lat.num_edges() {
            let (u, v) = lat.edge_endpoints(e).unwrap();
            let s = compute_syndrome(1 << lat.gauge_qubit(e), &lat).unwrap();
            assert_eq!(s.defects, BTreeSet::from([u, v]));
        }
    }

    #[test]
    fn bitstring_length_checked() {
        let lat = flake();
        assert!(matches!(
            compute_syndrome(1 << lat.num_qubits(), &lat),
            Err(Error::BitstringLength { .. })
        ));
    }

    #[test]
    fn decode_base_cases() {
        let lat = flake();
        // Empty syndrome -> empty correction.
        let c = decode(&Syndrome { defects: BTreeSet::new() }, &lat);
        assert!(c.is_empty());
        // Single defect -> one matter flip.
        let c = decode(&Syndrome { defects: BTreeSet::from([2]) }, &lat);
        assert_eq!(c.matter_flips, BTreeSet::from([2]));
        assert!(c.gauge_flips.is_empty());
        // Adjacent pair -> the shared gauge edge.
        let (u, v) = lat.edge_endpoints(0).unwrap();
        let c = decode(&Syndrome { defects: BTreeSet::from([u, v]) }, &lat);
        assert_eq!(c.gauge_flips, BTreeSet::from([0]));
        assert!(c.matter_flips.is_empty());
    }

    #[test]
    fn distant_pair_uses_matter_flips() {
        // Nodes 0 and 3 of a 4-node chain are at graph distance 3.
        let lat = Lattice::chain(4);
        let c = decode(&Syndrome { defects: BTreeSet::from([0, 3]) }, &lat);
        assert_eq!(c.matter_flips, BTreeSet::from([0, 3]));
        assert!(c.gauge_flips.is_empty());
        assert_eq!(c.weight(), 2);
    }

    #[test]
    fn distance_two_tie_prefers_matter_flips() {
        // Nodes 0 and 2 of a chain: a 2-edge gauge path ties with two
        // matter flips; the decoder must choose the matter flips.
        let lat = Lattice::chain(3);
        let c = decode(&Syndrome { defects: BTreeSet::from([0, 2]) }, &lat);
        assert_eq!(c.matter_flips, BTreeSet::from([0, 2]));
        assert!(c.gauge_flips.is_empty());
    }

    #[test]
    fn weight_one_errors_fully_reverted() {
        let lat = flake();
        let base = 0u64; // all-zero bitstring is physical
        for q in 0..lat.num_qubits() {
            let corrupted = base ^ (1 << q);
            let syndrome = compute_syndrome(corrupted, &lat).unwrap();
            let correction = decode(&syndrome, &lat);
            assert_eq!(correction.weight(), 1);
            let fixed = apply_correction(corrupted, &correction, &lat);
            assert_eq!(fixed, base, "qubit {q} not reverted");
        }
    }

    /// Brute-force minimum clearing weight over all flip patterns.
    fn brute_force_min_weight(bits: u64, lat: &Lattice) -> usize {
        let q = lat.num_qubits();
        (0u64..1 << q)
            .filter(|&pattern| {
                compute_syndrome(bits ^ pattern, lat).unwrap().is_empty()
            })
            .map(|pattern| pattern.count_ones() as usize)
            .min()
            .unwrap()
    }

    #[test]
    fn decode_weight_matches_brute_force_up_to_weight_two() {
        let lat = flake();
        let q = lat.num_qubits();
        let mut patterns: Vec<u64> = (0..q).map(|a| 1u64 << a).collect();
        for a in 0..q {
            for b in a + 1..q {
                patterns.push((1 << a) | (1 << b));
            }
        }
        for bits in patterns {
            let syndrome = compute_syndrome(bits, &lat).unwrap();
            let correction = decode(&syndrome, &lat);
            let fixed = apply_correction(bits, &correction, &lat);
            assert!(compute_syndrome(fixed, &lat).unwrap().is_empty());
            assert_eq!(
                correction.weight(),
                brute_force_min_weight(bits, &lat),
                "pattern {bits:#b}"
            );
        }
    }

    #[test]
    fn decoding_a_corrected_bitstring_is_idempotent() {
        let lat = flake();
        for bits in [0b101u64, 0b1100_0011, (1 << lat.num_qubits()) - 1] {
            let c = decode(&compute_syndrome(bits, &lat).unwrap(), &lat);
            let fixed = apply_correction(bits, &c, &lat);
            let again = decode(&compute_syndrome(fixed, &lat).unwrap(), &lat);
            assert!(again.is_empty());
        }
    }

    #[test]
    fn exact_matching_on_many_defects() {
        // All 6 outer nodes of flake(0) defective: the hexagon boundary
        // supports a perfect matching of 3 gauge edges.
        let lat = flake();
        let c = decode(
            &Syndrome { defects: (0..lat.num_nodes()).collect() },
            &lat,
        );
        assert!(!c.greedy);
        assert_eq!(c.weight(), 3);
        assert_eq!(c.gauge_flips.len(), 3);
    }

    #[test]
    fn greedy_fallback_flagged() {
        // flake(1) has 24 nodes; light them all up to exceed the cap.
        let lat = Lattice::flake(1);
        assert!(lat.num_nodes() > EXACT_MATCHING_CAP);
        let c = decode(
            &Syndrome { defects: (0..lat.num_nodes()).collect() },
            &lat,
        );
        assert!(c.greedy);
        let bits = (0..lat.num_nodes()).fold(0u64, |acc, n| acc | (1 << n));
        let fixed = apply_correction(bits, &c, &lat);
        assert!(compute_syndrome(fixed, &lat).unwrap().is_empty());
    }

    #[test]
    fn postselect_keeps_whole_classes() {
        let mut flips = vec![0u32; 20];
        flips.extend(vec![1u32; 15]);
        flips.extend(vec![2u32; 5]);
        let table = table_with_flips(&flips);
        let kept = postselect(&table, 30).unwrap();
        assert_eq!(kept.len(), 35);
        assert!(kept.shots.iter().all(|s| s.flip_count.unwrap() <= 1));
        // min_keep == total keeps everything.
        assert_eq!(postselect(&table, 40).unwrap().len(), 40);
        // Threshold above the table size is an error.
        assert!(matches!(
            postselect(&table, 41),
            Err(Error::PostselectThreshold { min_keep: 41, total: 40 })
        ));
    }

    fn small_circuit() -> (Lattice, Circuit) {
        let lat = flake();
        let params = QuenchParams {
            m: 1.0,
            g: 0.5,
            lambda: 0.7,
            t: 0.4,
            dt: 0.2,
        };
        let circuit =
            trotter_circuit(&lat, &params, &CompileOptions::default()).unwrap();
        (lat, circuit)
    }

    #[test]
    fn matter_x_before_interaction_block_is_correctable() {
        let (lat, circuit) = small_circuit();
        // Boundary right before the first CNOT sublayer of the last layer.
        let last_layer_first_sub = circuit.cnot_sublayers[6 * (circuit.layers - 1)].0;
        let report = propagate_fault(
            &circuit,
            last_layer_first_sub,
            lat.matter_qubit(0),
            Pauli::X,
        )
        .unwrap();
        assert_eq!(report.class, FaultClass::CorrectableX);
        assert_eq!(report.terminal.x_weight(), 1);
    }

    #[test]
    fn gauge_x_inside_cnot_block_bursts() {
        let (lat, circuit) = small_circuit();
        // Insert between the two CNOT sublayer groups of the final C
        // block so the X on the gauge qubit spreads through the block's
        // remaining CNOTs only.
        let boundary = circuit.cnot_sublayers[6 * circuit.layers - 2].0;
        let report =
            propagate_fault(&circuit, boundary, lat.gauge_qubit(0), Pauli::X)
                .unwrap();
        match report.class {
            FaultClass::XBurst { weight } => assert!(weight == 2 || weight == 3),
            other => panic!("expected burst, got {other:?}"),
        }
    }

    #[test]
    fn gauge_z_before_interaction_is_gauge_invariant_rotation() {
        let (lat, circuit) = small_circuit();
        let last_layer_first_sub = circuit.cnot_sublayers[6 * (circuit.layers - 1)].0;
        let report = propagate_fault(
            &circuit,
            last_layer_first_sub,
            lat.gauge_qubit(0),
            Pauli::Z,
        )
        .unwrap();
        assert_eq!(report.class, FaultClass::GaugeInvariantRotation);
        assert!(report.rotation_flips > 0);
        assert_eq!(report.terminal.x_weight(), 0);
    }

    #[test]
    fn terminal_fault_is_measurement_flip() {
        let (lat, circuit) = small_circuit();
        let report = propagate_fault(
            &circuit,
            circuit.gates.len(),
            lat.matter_qubit(1),
            Pauli::X,
        )
        .unwrap();
        assert_eq!(report.class, FaultClass::MeasurementFlip);
        // Out-of-range boundary rejected.
        assert!(matches!(
            propagate_fault(&circuit, circuit.gates.len() + 1, 0, Pauli::X),
            Err(Error::InvalidLocation(_))
        ));
    }

    #[test]
    fn code_distance_three_on_single_hexagon() {
        let lat = flake();
        assert_eq!(code_distance(&lat, 4).unwrap(), DistanceBound::Exact(3));
        let brick = Lattice::brick(1, 1);
        assert_eq!(code_distance(&brick, 4).unwrap(), DistanceBound::Exact(3));
        // A bounded search that finds nothing reports a lower bound.
        assert_eq!(code_distance(&lat, 2).unwrap(), DistanceBound::AtLeast(3));
    }
}
