//! Symbolic Pauli-string algebra with phase tracking.
//!
//! Strings are sparse maps qubit -> letter; the accumulated phase is a
//! power of i so that products and commutators stay exact.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Single-qubit Pauli letter (identity is implicit: absent from the map).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn as_char(self) -> char {
        match self {
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    /// Product of two letters: (phase power of i, optional resulting letter).
    /// `None` means identity.
    fn mul(self, other: Pauli) -> (u8, Option<Pauli>) {
        use Pauli::*;
        match (self, other) {
            (a, b) if a == b => (0, None),
            (X, Y) => (1, Some(Z)),
            (Y, Z) => (1, Some(X)),
            (Z, X) => (1, Some(Y)),
            (Y, X) => (3, Some(Z)),
            (Z, Y) => (3, Some(X)),
            (X, Z) => (3, Some(Y)),
            _ => unreachable!(),
        }
    }

    pub fn anticommutes(self, other: Pauli) -> bool {
        self != other
    }

    /// True if the letter flips Z-basis bits (has an X component).
    pub fn flips_bit(self) -> bool {
        !matches!(self, Pauli::Z)
    }
}

/// A signed tensor product of Pauli letters over the qubit register.
///
/// `phase_pow` is the exponent k in the global factor i^k, so Hermitian
/// strings have k in {0, 2} (sign +1 / -1).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PauliString {
    phase_pow: u8,
    letters: BTreeMap<usize, Pauli>,
}

impl PauliString {
    pub fn identity() -> Self {
        PauliString { phase_pow: 0, letters: BTreeMap::new() }
    }

    pub fn single(qubit: usize, letter: Pauli) -> Self {
        let mut letters = BTreeMap::new();
        letters.insert(qubit, letter);
        PauliString { phase_pow: 0, letters }
    }

    pub fn from_letters(iter: impl IntoIterator<Item = (usize, Pauli)>) -> Self {
        PauliString { phase_pow: 0, letters: iter.into_iter().collect() }
    }

    pub fn letters(&self) -> impl Iterator<Item = (usize, Pauli)> + '_ {
        self.letters.iter().map(|(&q, &p)| (q, p))
    }

    pub fn letter(&self, qubit: usize) -> Option<Pauli> {
        self.letters.get(&qubit).copied()
    }

    pub fn weight(&self) -> usize {
        self.letters.len()
    }

    pub fn is_identity(&self) -> bool {
        self.letters.is_empty()
    }

    /// Highest qubit index touched, if any.
    pub fn max_qubit(&self) -> Option<usize> {
        self.letters.keys().next_back().copied()
    }

    pub fn phase_pow(&self) -> u8 {
        self.phase_pow
    }

    /// Sign of a Hermitian string (+1 or -1); panics if the phase is
    /// imaginary.
    pub fn sign(&self) -> i8 {
        match self.phase_pow {
            0 => 1,
            2 => -1,
            _ => panic!("non-Hermitian phase i^{}", self.phase_pow),
        }
    }

    pub fn is_hermitian(&self) -> bool {
        self.phase_pow % 2 == 0
    }

    /// Drop the global phase, keeping only the letter pattern.
    pub fn unsigned(mut self) -> Self {
        self.phase_pow = 0;
        self
    }

    pub fn mul_phase_pow(&mut self, pow: u8) {
        self.phase_pow = (self.phase_pow + pow) % 4;
    }

    /// Exact product with phase tracking.
    pub fn mul(&self, other: &PauliString) -> PauliString {
        let mut letters = self.letters.clone();
        let mut phase = (self.phase_pow + other.phase_pow) % 4;
        for (&q, &p) in &other.letters {
            match letters.remove(&q) {
                None => {
                    letters.insert(q, p);
                }
                Some(mine) => {
                    let (ph, res) = mine.mul(p);
                    phase = (phase + ph) % 4;
                    if let Some(r) = res {
                        letters.insert(q, r);
                    }
                }
            }
        }
        PauliString { phase_pow: phase, letters }
    }

    /// True if the strings commute (even number of anticommuting overlaps).
    pub fn commutes_with(&self, other: &PauliString) -> bool {
        let mut anti = 0usize;
        for (&q, &p) in &self.letters {
            if let Some(&o) = other.letters.get(&q) {
                if p.anticommutes(o) {
                    anti += 1;
                }
            }
        }
        anti % 2 == 0
    }

    /// Commutator [self, other]. Returns `None` when they commute;
    /// otherwise the result is 2 * self * other (the caller owns the
    /// factor 2, which is folded into the returned coefficient).
    pub fn commutator(&self, other: &PauliString) -> Option<(f64, PauliString)> {
        if self.commutes_with(other) {
            None
        } else {
            Some((2.0, self.mul(other)))
        }
    }

    /// Number of qubits carrying a bit-flipping letter (X or Y).
    pub fn x_weight(&self) -> usize {
        self.letters.values().filter(|p| p.flips_bit()).count()
    }

    /// Overwrite (or clear) the letter at a qubit, leaving the phase
    /// untouched. Used by Clifford conjugation passes.
    pub fn set_letter(&mut self, qubit: usize, letter: Option<Pauli>) {
        match letter {
            Some(p) => {
                self.letters.insert(qubit, p);
            }
            None => {
                self.letters.remove(&qubit);
            }
        }
    }

    /// Conjugation by CNOT(control -> target): returns CNOT * P * CNOT
    /// with the exact phase (always +-1 for Hermitian input).
    pub fn conjugate_through_cnot(&self, control: usize, target: usize) -> PauliString {
        // Decompose the letters on {control, target} into X^x Z^z bits
        // (canonical X-before-Z order), transform the bits, recompose.
        let mut phase = self.phase_pow;
        let decomp = |letter: Option<Pauli>| -> (u8, u8, u8) {
            match letter {
                None => (0, 0, 0),
                Some(Pauli::X) => (1, 0, 0),
                Some(Pauli::Z) => (0, 1, 0),
                Some(Pauli::Y) => (1, 1, 1), // Y = i X Z
            }
        };
        let (xc, zc, pc) = decomp(self.letter(control));
        let (xt, zt, pt) = decomp(self.letter(target));
        phase = (phase + pc + pt) % 4;
        // CNOT maps X_c -> X_c X_t, Z_t -> Z_c Z_t; others fixed.
        let (xc2, xt2) = (xc, xt ^ xc);
        let (zc2, zt2) = (zc ^ zt, zt);
        let recomp = |x: u8, z: u8, phase: &mut u8| -> Option<Pauli> {
            match (x, z) {
                (0, 0) => None,
                (1, 0) => Some(Pauli::X),
                (0, 1) => Some(Pauli::Z),
                (1, 1) => {
                    // X Z = -i Y.
                    *phase = (*phase + 3) % 4;
                    Some(Pauli::Y)
                }
                _ => unreachable!(),
            }
        };
        let mut out = self.clone();
        out.phase_pow = 0;
        let lc = recomp(xc2, zc2, &mut phase);
        let lt = recomp(xt2, zt2, &mut phase);
        out.set_letter(control, lc);
        out.set_letter(target, lt);
        out.phase_pow = phase;
        out
    }

    /// Parse compact text like "X1 X4 X2" or "Z3"; empty string is identity.
    pub fn parse(text: &str) -> Option<PauliString> {
        let mut letters = BTreeMap::new();
        for tok in text.split_whitespace() {
            let mut chars = tok.chars();
            let letter = match chars.next()? {
                'X' => Pauli::X,
                'Y' => Pauli::Y,
                'Z' => Pauli::Z,
                _ => return None,
            };
            let q: usize = chars.as_str().parse().ok()?;
            if letters.insert(q, letter).is_some() {
                return None;
            }
        }
        Some(PauliString { phase_pow: 0, letters })
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.phase_pow {
            0 => {}
            1 => write!(f, "i")?,
            2 => write!(f, "-")?,
            3 => write!(f, "-i")?,
            _ => unreachable!(),
        }
        if self.letters.is_empty() {
            return write!(f, "I");
        }
        let mut first = true;
        for (&q, &p) in &self.letters {
            if !first {
                write!(f, " ")?;
            }
            write!(f, "{}{}", p.as_char(), q)?;
            first = false;
        }
        Ok(())
    }
}

/// A weighted sum of Pauli strings with like terms combined.
///
/// Used for symbolic nested commutators; phases are folded into the
/// real coefficients (terms stay Hermitian throughout the bound
/// computation, so this never loses information there).
#[derive(Debug, Clone, Default)]
pub struct PauliSum {
    terms: BTreeMap<BTreeMap<usize, Pauli>, f64>,
}

impl PauliSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, coeff: f64, string: PauliString) {
        // Fold the phase into the coefficient; an odd power of i on a
        // term of a Hermitian sum is matched by its conjugate partner,
        // so we track i^2 = -1 and i^1/i^3 as +1/-1 on the imaginary
        // unit, keeping |coeff| correct for the norm bound.
        let signed = match string.phase_pow {
            0 => coeff,
            2 => -coeff,
            1 => coeff,
            3 => -coeff,
            _ => unreachable!(),
        };
        let key = string.letters;
        let entry = self.terms.entry(key.clone()).or_insert(0.0);
        *entry += signed;
        if entry.abs() < 1e-14 {
            self.terms.remove(&key);
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Triangle-inequality bound on the spectral norm: sum of |coeff|.
    pub fn norm_bound(&self) -> f64 {
        self.terms.values().map(|c| c.abs()).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (PauliString, f64)> + '_ {
        self.terms.iter().map(|(letters, &c)| {
            (PauliString { phase_pow: 0, letters: letters.clone() }, c)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn involution() {
        let p = PauliString::parse("X0 Y3 Z5").unwrap();
        let sq = p.mul(&p);
        assert!(sq.is_identity());
        assert_eq!(sq.phase_pow(), 0);
    }

    #[test]
    fn xy_product_phase() {
        let x = PauliString::single(0, Pauli::X);
        let y = PauliString::single(0, Pauli::Y);
        let xy = x.mul(&y);
        assert_eq!(xy.phase_pow(), 1); // XY = iZ
        assert_eq!(xy.letter(0), Some(Pauli::Z));
        let yx = y.mul(&x);
        assert_eq!(yx.phase_pow(), 3); // YX = -iZ
    }

    #[test]
    fn commutation_parity() {
        let a = PauliString::parse("X0 X1").unwrap();
        let b = PauliString::parse("Z0 Z1").unwrap();
        assert!(a.commutes_with(&b)); // two anticommuting overlaps
        let c = PauliString::parse("Z0").unwrap();
        assert!(!a.commutes_with(&c));
    }

    #[test]
    fn parse_display_roundtrip() {
        let p = PauliString::parse("X1 X4 X2").unwrap();
        assert_eq!(p.to_string(), "X1 X2 X4");
        assert_eq!(PauliString::parse(&p.to_string()).unwrap(), p);
    }

    #[test]
    fn cnot_conjugation_rules() {
        // X_c -> X_c X_t, Z_t -> Z_c Z_t, X_t and Z_c fixed.
        let conj = |s: &str| PauliString::parse(s).unwrap().conjugate_through_cnot(0, 1);
        assert_eq!(conj("X0"), PauliString::parse("X0 X1").unwrap());
        assert_eq!(conj("Z1"), PauliString::parse("Z0 Z1").unwrap());
        assert_eq!(conj("X1"), PauliString::parse("X1").unwrap());
        assert_eq!(conj("Z0"), PauliString::parse("Z0").unwrap());
        // Y_c -> Y_c X_t, Y_t -> Z_c Y_t (both sign +1).
        assert_eq!(conj("Y0"), PauliString::parse("Y0 X1").unwrap());
        assert_eq!(conj("Y1"), PauliString::parse("Z0 Y1").unwrap());
        // Y_c Y_t -> -X_c Z_t: the one sign flip in the two-qubit table.
        let yy = conj("Y0 Y1");
        assert_eq!(yy.sign(), -1);
        assert_eq!(yy.clone().unsigned(), PauliString::parse("X0 Z1").unwrap());
        // Conjugation is an involution.
        for s in ["X0", "Y0 Z1", "Y0 Y1", "X0 Y1"] {
            let p = PauliString::parse(s).unwrap();
            assert_eq!(
                p.conjugate_through_cnot(0, 1).conjugate_through_cnot(0, 1),
                p
            );
        }
    }

    #[test]
    fn sum_combines_like_terms() {
        let mut s = PauliSum::new();
        s.add(1.5, PauliString::parse("Z0").unwrap());
        s.add(2.5, PauliString::parse("Z0").unwrap());
        s.add(-1.0, PauliString::parse("X1").unwrap());
        assert_eq!(s.len(), 2);
        assert!((s.norm_bound() - 5.0).abs() < 1e-12);
    }
}
