//! Closed-form oracles: the m=0 solution, perturbative oscillation
//! frequencies, the effective plaquette coupling, and the second-order
//! Trotter error bound (in both its closed form and as symbolic nested
//! commutators).

use serde::{Deserialize, Serialize};

use crate::lattice::Lattice;
use crate::pauli::{PauliString, PauliSum};
use crate::{Error, Result};

/// Couplings and time grid of a quench.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct QuenchParams {
    pub m: f64,
    pub g: f64,
    pub lambda: f64,
    pub t: f64,
    pub dt: f64,
}

impl QuenchParams {
    /// Number of Trotter layers: ceil(t/dt), rounded up to even so the
    /// mirror calibration can invert half the circuit.
    pub fn num_layers(&self) -> usize {
        assert!(self.dt > 0.0 && self.t >= 0.0);
        let mut l = (self.t / self.dt).ceil() as usize;
        if l % 2 == 1 {
            l += 1;
        }
        l
    }

    /// The per-layer step actually compiled: t / L (zero layers at t=0).
    pub fn effective_dt(&self) -> f64 {
        let l = self.num_layers();
        if l == 0 {
            0.0
        } else {
            self.t / l as f64
        }
    }
}

/// a(t) = 1 - (2 lambda^2 / (lambda^2 + g^2)) sin^2(t sqrt(lambda^2 + g^2)).
pub fn glassy_amplitude(g: f64, lambda: f64, t: f64) -> f64 {
    if lambda == 0.0 {
        return 1.0;
    }
    let s2 = lambda * lambda + g * g;
    1.0 - (2.0 * lambda * lambda / s2) * (t * s2.sqrt()).sin().powi(2)
}

/// Variational angle theta(g, lambda) = arctan(lambda/g) / 2 of the
/// m=0 single-link ground state.
pub fn m0_ansatz_angle(g: f64, lambda: f64) -> Result<f64> {
    if g == 0.0 && lambda == 0.0 {
        return Err(Error::ZeroCouplings);
    }
    Ok(0.5 * f64::atan2(lambda.abs(), g.abs()))
}

/// m=0 sector gap: 2 sqrt(g^2 + lambda^2).
pub fn m0_gap(g: f64, lambda: f64) -> f64 {
    2.0 * (g * g + lambda * lambda).sqrt()
}

/// Yo-yo oscillation frequency of a confined string: omega_y = 2g.
pub fn yoyo_frequency(g: f64) -> f64 {
    2.0 * g
}

/// String-bending frequency omega_b = lambda^2/g - lambda^2/(2m + g);
/// the perturbative derivation needs g dominant, so g = 0 is refused.
pub fn bending_frequency(m: f64, g: f64, lambda: f64) -> Result<f64> {
    if g == 0.0 || 2.0 * m + g == 0.0 {
        return Err(Error::BendingAtZeroG);
    }
    Ok(lambda * lambda / g - lambda * lambda / (2.0 * m + g))
}

/// Oscillation period 2 pi / omega.
pub fn period(omega: f64) -> f64 {
    std::f64::consts::TAU / omega
}

/// Effective hexagon-flip coupling gamma * lambda^6 / m^5.
pub fn effective_plaquette(m: f64, lambda: f64, gamma: f64) -> Result<f64> {
    if m == 0.0 {
        return Err(Error::PlaquetteAtZeroMass);
    }
    Ok(gamma * lambda.powi(6) / m.powi(5))
}

/// Closed-form second-order Trotter error bound. The per-node factor
/// 4 d_n^2 reduces to 16 N_{n,2} + 36 N_{n,3} on the trivalent
/// lattices; chains with degree-1 endpoints get 4 per endpoint.
pub fn trotter_error_bound(lattice: &Lattice, m: f64, g: f64, lambda: f64, t: f64, dt: f64) -> f64 {
    assert!(dt > 0.0);
    let ne = lattice.num_edges() as f64;
    let node_factor: f64 = (0..lattice.num_nodes())
        .map(|n| 4.0 * (lattice.degree(n) as f64).powi(2))
        .sum();
    let l2 = lambda * lambda;
    let first = 4.0 * ne * (g * l2).abs() + node_factor * (m * l2).abs();
    let second = 8.0 * ne * (m * m * lambda).abs()
        + 16.0 * ne * (m * g * lambda).abs()
        + ne * (4.0 * g * g * lambda + 8.0 * m * m * lambda).abs();
    t * dt * dt / 12.0 * first + t * dt * dt / 24.0 * second
}

/// The same bound evaluated from the nested-commutator formula
/// directly: per Trotter step, eps_step <= dt^3/12 ||[H3,[H3,H1]]|| +
/// dt^3/24 ||[H1,[H1,H3]]||, with the spectral norms bounded by the
/// term-wise triangle inequality, summed over t/dt steps.
pub fn trotter_error_bound_commutator(
    lattice: &Lattice,
    m: f64,
    g: f64,
    lambda: f64,
    t: f64,
    dt: f64,
) -> f64 {
    assert!(dt > 0.0);
    let h = crate::model::Hamiltonian::build(lattice, m, g, lambda);
    let nn = lattice.num_nodes();
    let ne = lattice.num_edges();
    let all = h.terms();
    let h1: Vec<(f64, PauliString)> = all[..nn + ne].to_vec();
    let h3: Vec<(f64, PauliString)> = all[nn + ne..].to_vec();
    let c331 = nested_commutator_norm(&h3, &h1);
    let c113 = nested_commutator_norm(&h1, &h3);
    let steps = t / dt;
    steps * (dt.powi(3) / 12.0 * c331 + dt.powi(3) / 24.0 * c113)
}

/// Triangle-inequality bound on ||[A, [A, B]]|| for sums of weighted
/// Pauli strings, with like terms combined before taking magnitudes.
fn nested_commutator_norm(a: &[(f64, PauliString)], b: &[(f64, PauliString)]) -> f64 {
    let mut inner = PauliSum::new();
    for (ca, pa) in a {
        for (cb, pb) in b {
            if let Some((factor, prod)) = pa.commutator(pb) {
                inner.add(ca * cb * factor, prod);
            }
        }
    }
    let mut outer = PauliSum::new();
    for (ca, pa) in a {
        for (pi, ci) in inner.iter() {
            if let Some((factor, prod)) = pa.commutator(&pi) {
                outer.add(ca * ci * factor, prod);
            }
        }
    }
    outer.norm_bound()
}

/// Estimate of the sixth-order plaquette constant gamma from the exact
/// flake(0) gap at g=0 and large m: the two lowest sector states split
/// by 2 J_hex, so gamma ~ gap * m^5 / (2 lambda^6), extrapolated in 1/m.
pub fn estimate_gamma() -> Result<f64> {
    let lat = Lattice::flake(0);
    let lambda = 1.0;
    let samples: Vec<(f64, f64)> = [20.0f64, 30.0, 40.0]
        .iter()
        .map(|&m| {
            let h = crate::model::Hamiltonian::build(&lat, m, 0.0, lambda);
            let gap = h.gap_physical_sector()?.gap;
            Ok((1.0 / m, gap * m.powi(5) / (2.0 * lambda.powi(6))))
        })
        .collect::<Result<_>>()?;
    // Linear extrapolation in 1/m to the m -> infinity limit.
    let (x1, y1) = samples[0];
    let (x3, y3) = samples[2];
    Ok(y3 - x3 * (y1 - y3) / (x1 - x3))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_8, PI};

    #[test]
    fn glassy_amplitude_values() {
        assert_abs_diff_eq!(glassy_amplitude(1.7, 0.4, 0.0), 1.0);
        assert_abs_diff_eq!(glassy_amplitude(2.2, 0.0, 5.0), 1.0);
        assert_abs_diff_eq!(glassy_amplitude(0.0, 1.0, FRAC_PI_2), -1.0, epsilon = 1e-12);
        // Periodicity pi / sqrt(g^2 + lambda^2) and minimum value.
        let (g, lam) = (1.3f64, 0.8f64);
        let period = PI / (g * g + lam * lam).sqrt();
        for t in [0.3, 1.1, 2.9] {
            assert_abs_diff_eq!(
                glassy_amplitude(g, lam, t),
                glassy_amplitude(g, lam, t + period),
                epsilon = 1e-12
            );
        }
        let min = 1.0 - 2.0 * lam * lam / (lam * lam + g * g);
        assert!((0..400).all(|k| glassy_amplitude(g, lam, k as f64 * 0.025) >= min - 1e-12));
    }

    #[test]
    fn ansatz_angle_limits() {
        assert!(m0_ansatz_angle(0.0, 0.0).is_err());
        assert_abs_diff_eq!(m0_ansatz_angle(1e12, 1.0).unwrap(), 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(m0_ansatz_angle(0.0, 2.0).unwrap(), FRAC_PI_4);
        assert_abs_diff_eq!(m0_ansatz_angle(1.5, 1.5).unwrap(), FRAC_PI_8);
    }

    #[test]
    fn gap_values() {
        assert_abs_diff_eq!(m0_gap(3.0, 4.0), 10.0);
        assert_abs_diff_eq!(m0_gap(0.0, 1.0), 2.0);
        assert!(m0_gap(1.1, 0.5) < m0_gap(1.2, 0.5));
    }

    #[test]
    fn frequencies() {
        assert_abs_diff_eq!(yoyo_frequency(2.0), 4.0);
        assert_abs_diff_eq!(period(yoyo_frequency(2.0)), 1.5708, epsilon = 1e-4);
        let wb = bending_frequency(5.0, 2.0, 1.0).unwrap();
        assert_abs_diff_eq!(wb, 5.0 / 12.0, epsilon = 1e-15);
        assert_abs_diff_eq!(period(wb), 15.0796, epsilon = 1e-4);
        assert!(bending_frequency(5.0, 0.0, 1.0).is_err());
        // m -> infinity limit.
        assert_abs_diff_eq!(
            bending_frequency(1e12, 2.0, 1.0).unwrap(),
            0.5,
            epsilon = 1e-9
        );
    }

    #[test]
    fn plaquette_values() {
        assert_abs_diff_eq!(effective_plaquette(5.0, 1.0, 0.25).unwrap(), 8e-5, epsilon = 1e-18);
        assert_abs_diff_eq!(effective_plaquette(3.0, 0.0, 0.25).unwrap(), 0.0);
        assert!(effective_plaquette(0.0, 1.0, 0.25).is_err());
    }

    #[test]
    fn layer_counts() {
        let p = QuenchParams { m: 0.0, g: 0.0, lambda: 1.0, t: 4.0, dt: 0.15 };
        let l = p.num_layers();
        assert_eq!(l % 2, 0);
        assert!(l as f64 * p.effective_dt() - 4.0 < 1e-12);
        assert_eq!(
            QuenchParams { t: 1.0, dt: 0.5, ..p }.num_layers(),
            2
        );
        assert_eq!(
            QuenchParams { t: 1.1, dt: 0.5, ..p }.num_layers(),
            4
        );
        assert_eq!(QuenchParams { t: 0.0, dt: 0.5, ..p }.num_layers(), 0);
    }

    #[test]
    fn trotter_bound_zero_couplings() {
        let lat = Lattice::brick(2, 2);
        assert_abs_diff_eq!(trotter_error_bound(&lat, 0.0, 0.0, 1.0, 4.0, 0.1), 0.0);
        assert_abs_diff_eq!(
            trotter_error_bound_commutator(&lat, 0.0, 0.0, 1.0, 4.0, 0.1),
            0.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn trotter_bound_matches_commutator_form() {
        for lat in [Lattice::flake(0), Lattice::chain(4), Lattice::brick(1, 2)] {
            for (m, g, lam) in [(1.0, 1.0, 1.0), (5.0, 2.0, 1.0), (0.3, 0.5, 1.0)] {
                let a = trotter_error_bound(&lat, m, g, lam, 1.0, 0.1);
                let b = trotter_error_bound_commutator(&lat, m, g, lam, 1.0, 0.1);
                assert_abs_diff_eq!(a, b, epsilon = 1e-9 * a.max(1.0));
            }
        }
    }

    #[test]
    fn trotter_bound_scaling() {
        let lat = Lattice::flake(0);
        let base = trotter_error_bound(&lat, 1.0, 1.0, 1.0, 1.0, 0.1);
        assert_abs_diff_eq!(
            trotter_error_bound(&lat, 1.0, 1.0, 1.0, 2.0, 0.1),
            2.0 * base,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            trotter_error_bound(&lat, 1.0, 1.0, 1.0, 1.0, 0.2),
            4.0 * base,
            epsilon = 1e-12
        );
    }

    #[test]
    fn published_bound_rows() {
        // (m, g, lambda, t, dt) = (5, 0.01, 1, 4, 0.125) on the 3x3
        // patch reproduces the published 60.50; the published 2x2 row
        // (50.28) does not match any count assignment we constructed —
        // our geometry gives 56.28 and the discrepancy is recorded in
        // the workspace metadata rather than fudged.
        let b33 = trotter_error_bound(&Lattice::brick(3, 3), 5.0, 0.01, 1.0, 4.0, 0.125);
        assert_abs_diff_eq!(b33, 60.50, epsilon = 0.01);
        let b22 = trotter_error_bound(&Lattice::brick(2, 2), 5.0, 2.0, 1.0, 4.0, 0.15);
        assert_abs_diff_eq!(b22, 56.28, epsilon = 0.01);
        // The swapped-coupling 3x3 row: (m, g) = (0.5, 0.3) gives 4.31.
        let b_sw = trotter_error_bound(&Lattice::brick(3, 3), 0.5, 0.3, 1.0, 4.0, 0.15);
        assert_abs_diff_eq!(b_sw, 4.31, epsilon = 0.01);
    }

    #[test]
    fn gamma_estimate_near_quarter() {
        let gamma = estimate_gamma().unwrap();
        assert!((gamma - 0.25).abs() < 0.02, "gamma = {gamma}");
    }
}
