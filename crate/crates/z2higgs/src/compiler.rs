//! Second-order Trotter circuit compilation: fixed-depth interaction
//! scheduling via Pauli gadgets, gauge-phase decoupling insertion,
//! Pauli twirling, and the mirror / Clifford calibration variants.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::analytics::QuenchParams;
use crate::lattice::Lattice;
use crate::model::BasisConfig;
use crate::pauli::{Pauli, PauliString};
use crate::{Error, Result};

/// Abstract gate set; no hardware translation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "gate", rename_all = "snake_case")]
pub enum Gate {
    RotZ { qubit: usize, angle: f64 },
    RotX { qubit: usize, angle: f64 },
    Cnot { control: usize, target: usize },
    PauliGate { qubit: usize, letter: Pauli },
}

impl Gate {
    /// The exact inverse gate (rotations negate, the rest self-invert).
    pub fn inverse(self) -> Gate {
        match self {
            Gate::RotZ { qubit, angle } => Gate::RotZ { qubit, angle: -angle },
            Gate::RotX { qubit, angle } => Gate::RotX { qubit, angle: -angle },
            other => other,
        }
    }
}

/// A compiled circuit with layer structure and compilation metadata.
#[derive(Debug, Clone, Serialize)]
pub struct Circuit {
    pub n_qubits: usize,
    pub gates: Vec<Gate>,
    /// Number of Trotter layers L (always even for quench circuits).
    pub layers: usize,
    /// Per-layer step dt~ = t / L.
    pub dt_eff: f64,
    /// Gate-index range [start, end) of each layer.
    pub layer_bounds: Vec<(usize, usize)>,
    /// Gate-index ranges of the scheduled CNOT sublayers, six per
    /// layer (three per CNOT block, the core rotations acting as a
    /// barrier between blocks).
    pub cnot_sublayers: Vec<(usize, usize)>,
    /// Decoupling phases phi[layer][node], when inserted.
    pub gdd_phases: Option<Vec<Vec<f64>>>,
    pub twirl_seed: Option<u64>,
}

impl Circuit {
    pub fn empty(n_qubits: usize) -> Circuit {
        Circuit {
            n_qubits,
            gates: Vec::new(),
            layers: 0,
            dt_eff: 0.0,
            layer_bounds: Vec::new(),
            cnot_sublayers: Vec::new(),
            gdd_phases: None,
            twirl_seed: None,
        }
    }

    pub fn cnot_count(&self) -> usize {
        self.gates
            .iter()
            .filter(|g| matches!(g, Gate::Cnot { .. }))
            .count()
    }

    /// ASAP two-qubit depth of a gate range (CNOTs only; single-qubit
    /// gates are free).
    pub fn two_qubit_depth(&self, range: std::ops::Range<usize>) -> usize {
        let mut depth = vec![0usize; self.n_qubits];
        let mut max = 0;
        for g in &self.gates[range] {
            if let Gate::Cnot { control, target } = g {
                let d = depth[*control].max(depth[*target]) + 1;
                depth[*control] = d;
                depth[*target] = d;
                max = max.max(d);
            }
        }
        max
    }

    /// Two-qubit depth of every layer under the compiled schedule: the
    /// number of nonempty CNOT sublayers, each verified to be a true
    /// parallel slot (internal two-qubit depth 1). The core rotations
    /// between the two CNOT blocks are a per-qubit barrier, so ASAP
    /// compaction across blocks is not physical and is not applied.
    pub fn layer_depths(&self) -> Vec<usize> {
        assert_eq!(self.cnot_sublayers.len(), 6 * self.layers);
        self.cnot_sublayers
            .chunks(6)
            .map(|subs| {
                subs.iter()
                    .filter(|&&(s, e)| {
                        let d = self.two_qubit_depth(s..e);
                        assert!(d <= 1, "sublayer is not a parallel slot");
                        d == 1
                    })
                    .count()
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Compilation switches: decoupling phases and twirling are both
/// enabled by providing their seeds.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompileOptions {
    pub gdd_phase_seed: Option<u64>,
    pub twirl_seed: Option<u64>,
}

/// Gate sequence for exp(+i angle X_u X_e X_v) on one edge: CNOTs fan
/// the gauge qubit's X onto both matter endpoints around one X
/// rotation (RotX(-2 angle) = exp(+i angle X)).
pub fn pauli_gadget(lattice: &Lattice, edge: usize, angle: f64) -> Result<Vec<Gate>> {
    let (u, v) = lattice.edge_endpoints(edge)?;
    let a = lattice.gauge_qubit(edge);
    let (mu, mv) = (lattice.matter_qubit(u), lattice.matter_qubit(v));
    Ok(vec![
        Gate::Cnot { control: a, target: mu },
        Gate::Cnot { control: a, target: mv },
        Gate::RotX { qubit: a, angle: -2.0 * angle },
        Gate::Cnot { control: a, target: mu },
        Gate::Cnot { control: a, target: mv },
    ])
}

/// The interaction block's CNOT schedule: three sublayers per block,
/// derived from a proper 3-edge-coloring and the matter bipartition so
/// that no two CNOTs in a sublayer share a qubit. Each entry is the
/// CNOT list of one sublayer.
fn cnot_schedule(lattice: &Lattice) -> Result<Vec<Vec<(usize, usize)>>> {
    let (set_a, _) = lattice.matter_bipartition()?;
    let mut in_a = vec![false; lattice.num_nodes()];
    for &n in &set_a {
        in_a[n] = true;
    }
    let colors = lattice.edge_coloring()?;
    let mut sublayers: Vec<Vec<(usize, usize)>> = vec![Vec::new(); 3];
    for (e, &(u, v)) in lattice.edges().iter().enumerate() {
        let a_end = if in_a[u] { u } else { v };
        let b_end = if in_a[u] { v } else { u };
        let c = colors[e] % 3;
        let ctrl = lattice.gauge_qubit(e);
        sublayers[c].push((ctrl, lattice.matter_qubit(a_end)));
        sublayers[(c + 1) % 3].push((ctrl, lattice.matter_qubit(b_end)));
    }
    Ok(sublayers)
}

/// Zero-sum decoupling phases: per node, L uniform draws in [-pi, pi)
/// mean-subtracted and re-wrapped, so the per-node sum vanishes mod 2pi.
fn gdd_phase_table(num_nodes: usize, layers: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut per_node: Vec<Vec<f64>> = Vec::with_capacity(num_nodes);
    for _ in 0..num_nodes {
        let raw: Vec<f64> = (0..layers).map(|_| rng.gen_range(-PI..PI)).collect();
        let mean = raw.iter().sum::<f64>() / layers.max(1) as f64;
        per_node.push(
            raw.iter()
                .map(|&x| {
                    let mut y = x - mean;
                    while y >= PI {
                        y -= 2.0 * PI;
                    }
                    while y < -PI {
                        y += 2.0 * PI;
                    }
                    y
                })
                .collect(),
        );
    }
    // Transpose to [layer][node].
    (0..layers)
        .map(|k| (0..num_nodes).map(|n| per_node[n][k]).collect())
        .collect()
}

/// Second-order Trotter circuit U(t) = prod_k U1(dt~/2) U3(dt~) U1(dt~/2)
/// with the fixed-depth interaction schedule; L is rounded up to even.
pub fn trotter_circuit(
    lattice: &Lattice,
    params: &QuenchParams,
    options: &CompileOptions,
) -> Result<Circuit> {
    let n_qubits = lattice.num_qubits();
    let layers = params.num_layers();
    let dt = params.effective_dt();
    let (m, g, lambda) = (params.m, params.g, params.lambda);
    let schedule = cnot_schedule(lattice)?;
    let gdd_phases = options
        .gdd_phase_seed
        .map(|seed| gdd_phase_table(lattice.num_nodes(), layers, seed));

    let mut circuit = Circuit::empty(n_qubits);
    circuit.layers = layers;
    circuit.dt_eff = dt;
    for k in 0..layers {
        let start = circuit.gates.len();
        // U1(dt/2): mass and electric single-qubit Z rotations.
        let push_u1_half = |gates: &mut Vec<Gate>| {
            for n in 0..lattice.num_nodes() {
                gates.push(Gate::RotZ { qubit: lattice.matter_qubit(n), angle: -m * dt });
            }
            for e in 0..lattice.num_edges() {
                gates.push(Gate::RotZ { qubit: lattice.gauge_qubit(e), angle: -g * dt });
            }
        };
        push_u1_half(&mut circuit.gates);
        // U3(dt): CNOT block, core rotations (plus decoupling phases on
        // the idle matter qubits), CNOT block.
        let push_block =
            |gates: &mut Vec<Gate>, sublayers: &mut Vec<(usize, usize)>| {
                for sub in &schedule {
                    let s = gates.len();
                    for &(control, target) in sub {
                        gates.push(Gate::Cnot { control, target });
                    }
                    sublayers.push((s, gates.len()));
                }
            };
        push_block(&mut circuit.gates, &mut circuit.cnot_sublayers);
        for e in 0..lattice.num_edges() {
            circuit.gates.push(Gate::RotX {
                qubit: lattice.gauge_qubit(e),
                angle: -2.0 * lambda * dt,
            });
        }
        if let Some(table) = &gdd_phases {
            for n in 0..lattice.num_nodes() {
                circuit.gates.push(Gate::RotZ {
                    qubit: lattice.matter_qubit(n),
                    angle: 2.0 * table[k][n],
                });
            }
        }
        push_block(&mut circuit.gates, &mut circuit.cnot_sublayers);
        push_u1_half(&mut circuit.gates);
        circuit.layer_bounds.push((start, circuit.gates.len()));
    }
    circuit.gdd_phases = gdd_phases;
    if let Some(seed) = options.twirl_seed {
        circuit = twirl(&circuit, seed);
    }
    Ok(circuit)
}

/// Wrap every CNOT with a uniformly sampled two-qubit Pauli pair and
/// its CNOT-conjugated compensation; the noiseless unitary is unchanged
/// up to global phase.
pub fn twirl(circuit: &Circuit, seed: u64) -> Circuit {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Circuit::empty(circuit.n_qubits);
    out.layers = circuit.layers;
    out.dt_eff = circuit.dt_eff;
    out.gdd_phases = circuit.gdd_phases.clone();
    out.twirl_seed = Some(seed);
    let letters = [None, Some(Pauli::X), Some(Pauli::Y), Some(Pauli::Z)];
    let mut bounds = circuit.layer_bounds.clone();
    let mut old_to_new = vec![0usize; circuit.gates.len() + 1];
    for (i, g) in circuit.gates.iter().enumerate() {
        old_to_new[i] = out.gates.len();
        match *g {
            Gate::Cnot { control, target } => {
                let lc = letters[rng.gen_range(0..4usize)];
                let lt = letters[rng.gen_range(0..4usize)];
                let mut wrap = PauliString::identity();
                wrap.set_letter(control, lc);
                wrap.set_letter(target, lt);
                if let Some(p) = lc {
                    out.gates.push(Gate::PauliGate { qubit: control, letter: p });
                }
                if let Some(p) = lt {
                    out.gates.push(Gate::PauliGate { qubit: target, letter: p });
                }
                out.gates.push(Gate::Cnot { control, target });
                let comp = wrap.conjugate_through_cnot(control, target);
                for (q, p) in comp.letters() {
                    out.gates.push(Gate::PauliGate { qubit: q, letter: p });
                }
            }
            other => out.gates.push(other),
        }
    }
    old_to_new[circuit.gates.len()] = out.gates.len();
    for (s, e) in bounds.iter_mut() {
        *s = old_to_new[*s];
        *e = old_to_new[*e];
    }
    out.layer_bounds = bounds;
    out.cnot_sublayers = circuit
        .cnot_sublayers
        .iter()
        .map(|&(s, e)| (old_to_new[s], old_to_new[e]))
        .collect();
    out
}

/// Mirror calibration circuit: the first L/2 layers followed by their
/// exact inverse (reversed order, negated angles, decoupling phases
/// negated), so the ideal output is the initial basis state.
pub fn mirror_calibration(circuit: &Circuit) -> Result<Circuit> {
    if circuit.layers % 2 != 0 {
        return Err(Error::OddLayerCount(circuit.layers));
    }
    let half_layers = circuit.layers / 2;
    let cut = if half_layers == 0 {
        0
    } else {
        circuit.layer_bounds[half_layers - 1].1
    };
    let mut out = Circuit::empty(circuit.n_qubits);
    out.layers = circuit.layers;
    out.dt_eff = circuit.dt_eff;
    out.twirl_seed = circuit.twirl_seed;
    out.gates = circuit.gates[..cut].to_vec();
    let mut bounds: Vec<(usize, usize)> = circuit.layer_bounds[..half_layers].to_vec();
    let mut sublayers: Vec<(usize, usize)> =
        circuit.cnot_sublayers[..6 * half_layers].to_vec();
    for k in (0..half_layers).rev() {
        let (s, e) = circuit.layer_bounds[k];
        let start = out.gates.len();
        for g in circuit.gates[s..e].iter().rev() {
            out.gates.push(g.inverse());
        }
        bounds.push((start, out.gates.len()));
        // Reversal maps old index i to start + (e - 1 - i), so the old
        // sublayer range (ss, se) becomes (start + e - se, start + e - ss).
        for &(ss, se) in circuit.cnot_sublayers[6 * k..6 * (k + 1)].iter().rev() {
            sublayers.push((start + e - se, start + e - ss));
        }
    }
    out.layer_bounds = bounds;
    out.cnot_sublayers = sublayers;
    // Phase table of the mirrored half, for metadata completeness.
    out.gdd_phases = circuit.gdd_phases.as_ref().map(|table| {
        let mut t: Vec<Vec<f64>> = table[..half_layers].to_vec();
        for k in (0..half_layers).rev() {
            t.push(table[k].iter().map(|&p| -p).collect());
        }
        t
    });
    Ok(out)
}

/// Snap an angle to the nearest multiple of pi/2; exact ties round
/// toward zero.
pub fn snap_to_clifford(angle: f64) -> f64 {
    let x = angle / FRAC_PI_2;
    let frac = x.abs().fract();
    let k = if (frac - 0.5).abs() < 1e-12 {
        x.trunc()
    } else {
        x.round()
    };
    k * FRAC_PI_2
}

/// Calibration variant with every rotation snapped to a Clifford angle.
pub fn cliffordize(circuit: &Circuit) -> Circuit {
    let mut out = circuit.clone();
    for g in &mut out.gates {
        match g {
            Gate::RotZ { angle, .. } | Gate::RotX { angle, .. } => {
                *angle = snap_to_clifford(*angle);
            }
            _ => {}
        }
    }
    out
}

/// True if every rotation angle is a multiple of pi/2.
pub fn is_clifford(circuit: &Circuit) -> bool {
    circuit.gates.iter().all(|g| match g {
        Gate::RotZ { angle, .. } | Gate::RotX { angle, .. } => {
            (angle / FRAC_PI_2 - (angle / FRAC_PI_2).round()).abs() < 1e-9
        }
        _ => true,
    })
}

/// Conjugate a letter by RotZ(theta) restricted to quarter turns:
/// X -> cos X + sin Y, Y -> cos Y - sin X, Z -> Z.
fn conj_letter_rotz(letter: Pauli, quarter_turns: i64) -> (i8, Pauli) {
    let k = quarter_turns.rem_euclid(4);
    let (c, s) = [(1i8, 0i8), (0, 1), (-1, 0), (0, -1)][k as usize];
    match letter {
        Pauli::Z => (1, Pauli::Z),
        Pauli::X => {
            if s == 0 {
                (c, Pauli::X)
            } else {
                (s, Pauli::Y)
            }
        }
        Pauli::Y => {
            if s == 0 {
                (c, Pauli::Y)
            } else {
                (-s, Pauli::X)
            }
        }
    }
}

/// Conjugate a letter by RotX(theta) at quarter turns:
/// Z -> cos Z - sin Y, Y -> cos Y + sin Z, X -> X.
fn conj_letter_rotx(letter: Pauli, quarter_turns: i64) -> (i8, Pauli) {
    let k = quarter_turns.rem_euclid(4);
    let (c, s) = [(1i8, 0i8), (0, 1), (-1, 0), (0, -1)][k as usize];
    match letter {
        Pauli::X => (1, Pauli::X),
        Pauli::Z => {
            if s == 0 {
                (c, Pauli::Z)
            } else {
                (-s, Pauli::Y)
            }
        }
        Pauli::Y => {
            if s == 0 {
                (c, Pauli::Y)
            } else {
                (s, Pauli::Z)
            }
        }
    }
}

/// Exact expectation of a Pauli observable at the output of a Clifford
/// circuit on a basis-state input, by Heisenberg back-propagation.
pub fn clifford_expectation(
    circuit: &Circuit,
    initial: &BasisConfig,
    obs: &PauliString,
) -> Result<f64> {
    if !is_clifford(circuit) {
        return Err(Error::Other("circuit is not Clifford".into()));
    }
    if initial.len() != circuit.n_qubits {
        return Err(Error::BitstringLength { got: initial.len(), want: circuit.n_qubits });
    }
    let mut p = obs.clone();
    for g in circuit.gates.iter().rev() {
        match *g {
            Gate::Cnot { control, target } => {
                p = p.conjugate_through_cnot(control, target);
            }
            Gate::RotZ { qubit, angle } => {
                if let Some(l) = p.letter(qubit) {
                    // G^dag O G = conjugation by RotZ(-angle).
                    let k = -(angle / FRAC_PI_2).round() as i64;
                    let (s, l2) = conj_letter_rotz(l, k);
                    if s < 0 {
                        p.mul_phase_pow(2);
                    }
                    p.set_letter(qubit, Some(l2));
                }
            }
            Gate::RotX { qubit, angle } => {
                if let Some(l) = p.letter(qubit) {
                    let k = -(angle / FRAC_PI_2).round() as i64;
                    let (s, l2) = conj_letter_rotx(l, k);
                    if s < 0 {
                        p.mul_phase_pow(2);
                    }
                    p.set_letter(qubit, Some(l2));
                }
            }
            Gate::PauliGate { qubit, letter } => {
                if let Some(l) = p.letter(qubit) {
                    if l.anticommutes(letter) {
                        p.mul_phase_pow(2);
                    }
                }
            }
        }
    }
    // Evaluate the back-propagated string on the initial basis state.
    let mut value = p.sign() as f64;
    for (q, l) in p.letters() {
        match l {
            Pauli::Z => value *= initial.z_eigenvalue(q) as f64,
            _ => return Ok(0.0),
        }
    }
    Ok(value)
}
