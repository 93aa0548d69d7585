//! Pauli-basis transforms on V-qubit operators.
//!
//! A Pauli operator is indexed by `P = Σ_k code_k 4^k` with codes
//! 0 = I, 1 = X, 2 = Y, 3 = Z acting on local qubit k. A measurement setting
//! (one of X, Y, Z per qubit) is indexed by `s = Σ_k (code_k − 1) 3^k`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Single-qubit measurement basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Basis {
    X,
    Y,
    Z,
}

impl Basis {
    pub const ALL: [Basis; 3] = [Basis::X, Basis::Y, Basis::Z];

    /// Pauli code (1, 2 or 3).
    pub fn code(self) -> usize {
        match self {
            Basis::X => 1,
            Basis::Y => 2,
            Basis::Z => 3,
        }
    }

    pub fn from_digit(d: usize) -> Self {
        Self::ALL[d]
    }

    pub fn as_char(self) -> char {
        match self {
            Basis::X => 'X',
            Basis::Y => 'Y',
            Basis::Z => 'Z',
        }
    }
}

/// One basis per subsystem qubit, in ascending site order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString(pub Vec<Basis>);

impl PauliString {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Setting index Σ_k (code_k − 1) 3^k.
    pub fn setting_index(&self) -> usize {
        self.0.iter().rev().fold(0, |acc, b| acc * 3 + (b.code() - 1))
    }

    pub fn from_setting_index(n_qubits: usize, mut index: usize) -> Self {
        let mut ops = Vec::with_capacity(n_qubits);
        for _ in 0..n_qubits {
            ops.push(Basis::from_digit(index % 3));
            index /= 3;
        }
        Self(ops)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.iter().try_for_each(|b| write!(f, "{}", b.as_char()))
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|ch| match ch {
                'X' | 'x' => Ok(Basis::X),
                'Y' | 'y' => Ok(Basis::Y),
                'Z' | 'z' => Ok(Basis::Z),
                other => Err(Error::InvalidRecord(format!("invalid basis character {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(PauliString)
    }
}

/// Pauli coefficients c_P = Tr(ρ P) of a 2^V × 2^V matrix.
pub fn to_pauli(m: &DMatrix<Complex64>) -> Vec<Complex64> {
    let dim = m.nrows();
    let v = dim.trailing_zeros() as usize;
    // Interleave row and column bits: qubit k contributes code 2 r_k + c_k.
    let mut a = vec![Complex64::default(); dim * dim];
    for r in 0..dim {
        for c in 0..dim {
            a[interleave(r, c, v)] = m[(r, c)];
        }
    }
    let i = Complex64::new(0.0, 1.0);
    for k in 0..v {
        let stride = 1usize << (2 * k);
        for base in 0..a.len() {
            if (base / stride) % 4 != 0 {
                continue;
            }
            let (m00, m01, m10, m11) = (a[base], a[base + stride], a[base + 2 * stride], a[base + 3 * stride]);
            a[base] = m00 + m11;
            a[base + stride] = m01 + m10;
            a[base + 2 * stride] = i * (m01 - m10);
            a[base + 3 * stride] = m00 - m11;
        }
    }
    a
}

/// Matrix (1/2^V) Σ_P c_P P from Pauli coefficients.
pub fn from_pauli(coeffs: &[Complex64]) -> DMatrix<Complex64> {
    let v = (coeffs.len().trailing_zeros() / 2) as usize;
    let dim = 1usize << v;
    let mut a = coeffs.to_vec();
    let i = Complex64::new(0.0, 1.0);
    for k in 0..v {
        let stride = 1usize << (2 * k);
        for base in 0..a.len() {
            if (base / stride) % 4 != 0 {
                continue;
            }
            let (pi, px, py, pz) = (a[base], a[base + stride], a[base + 2 * stride], a[base + 3 * stride]);
            a[base] = (pi + pz) * 0.5;
            a[base + stride] = (px - i * py) * 0.5;
            a[base + 2 * stride] = (px + i * py) * 0.5;
            a[base + 3 * stride] = (pi - pz) * 0.5;
        }
    }
    DMatrix::from_fn(dim, dim, |r, c| a[interleave(r, c, v)])
}

#[inline]
fn interleave(r: usize, c: usize, v: usize) -> usize {
    let mut idx = 0;
    for k in 0..v {
        idx |= ((2 * (r >> k & 1)) | (c >> k & 1)) << (2 * k);
    }
    idx
}

/// In-place Walsh-Hadamard transform: out[b] = Σ_T (−1)^{|b ∧ T|} in[T].
pub(crate) fn walsh_hadamard<T>(a: &mut [T])
where
    T: Copy + std::ops::Add<Output = T> + std::ops::Sub<Output = T>,
{
    let n = a.len();
    let mut h = 1;
    while h < n {
        for i in (0..n).step_by(2 * h) {
            for j in i..i + h {
                let (x, y) = (a[j], a[j + h]);
                a[j] = x + y;
                a[j + h] = x - y;
            }
        }
        h *= 2;
    }
}

/// Pauli index of the operator that carries `setting`'s basis on the qubits in
/// `support` (a bitmask) and identity elsewhere.
#[inline]
pub(crate) fn restricted_pauli(codes: &[usize], support: usize) -> usize {
    let mut idx = 0;
    for (k, &c) in codes.iter().enumerate() {
        if support >> k & 1 == 1 {
            idx |= c << (2 * k);
        }
    }
    idx
}

/// Pauli codes of a setting index.
pub(crate) fn setting_codes(n_qubits: usize, mut setting: usize) -> Vec<usize> {
    let mut codes = Vec::with_capacity(n_qubits);
    for _ in 0..n_qubits {
        codes.push(setting % 3 + 1);
        setting /= 3;
    }
    codes
}

/// Lookup table `[setting][support] → Pauli index` for V qubits.
pub(crate) fn restriction_table(n_qubits: usize) -> Vec<Vec<usize>> {
    let n_settings = 3usize.pow(n_qubits as u32);
    (0..n_settings)
        .map(|s| {
            let codes = setting_codes(n_qubits, s);
            (0..1usize << n_qubits).map(|t| restricted_pauli(&codes, t)).collect()
        })
        .collect()
}

/// Outcome probabilities of every setting from Pauli coefficients:
/// p_s(b) = 2^{−V} Σ_T (−1)^{|b ∧ T|} c_{P(s,T)}.
pub(crate) fn outcome_probabilities(coeffs: &[Complex64], table: &[Vec<usize>]) -> Vec<Vec<f64>> {
    let dim = table.first().map_or(1, |t| t.len());
    let scale = 1.0 / dim as f64;
    table
        .iter()
        .map(|row| {
            let mut g: Vec<f64> = row.iter().map(|&p| coeffs[p].re).collect();
            walsh_hadamard(&mut g);
            g.iter_mut().for_each(|x| *x *= scale);
            g
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pauli_matrix(code: usize) -> DMatrix<Complex64> {
        let o = Complex64::new(0.0, 0.0);
        let l = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        match code {
            0 => DMatrix::from_row_slice(2, 2, &[l, o, o, l]),
            1 => DMatrix::from_row_slice(2, 2, &[o, l, l, o]),
            2 => DMatrix::from_row_slice(2, 2, &[o, -i, i, o]),
            _ => DMatrix::from_row_slice(2, 2, &[l, o, o, -l]),
        }
    }

    /// Full operator for a Pauli index; qubit k is bit k of the matrix index.
    fn pauli_operator(index: usize, v: usize) -> DMatrix<Complex64> {
        let mut m = DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
        // Kronecker puts the first factor on the most significant bit.
        for k in (0..v).rev() {
            m = m.kronecker(&pauli_matrix(index >> (2 * k) & 3));
        }
        m
    }

    fn random_matrix(dim: usize, seed: u64) -> DMatrix<Complex64> {
        let mut x = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
        let mut next = || {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (x >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        DMatrix::from_fn(dim, dim, |_, _| Complex64::new(next(), next()))
    }

    #[test]
    fn forward_matches_traces() {
        let v = 3;
        let m = random_matrix(1 << v, 3);
        let c = to_pauli(&m);
        for p in 0..1usize << (2 * v) {
            let expect = (&m * pauli_operator(p, v)).trace();
            assert!((c[p] - expect).norm() < 1e-12, "P={p}");
        }
    }

    #[test]
    fn round_trip() {
        for v in 1..=4 {
            let m = random_matrix(1 << v, v as u64);
            let back = from_pauli(&to_pauli(&m));
            assert!((back - &m).iter().all(|z| z.norm() < 1e-12));
        }
    }

    #[test]
    fn settings_and_strings() {
        let s: PauliString = "XZY".parse().unwrap();
        assert_eq!(s.setting_index(), 2 * 3 + 1 * 9);
        assert_eq!(PauliString::from_setting_index(3, s.setting_index()), s);
        assert_eq!(s.to_string(), "XZY");
        assert!("XQ".parse::<PauliString>().is_err());
        assert_eq!(setting_codes(3, s.setting_index()), vec![1, 3, 2]);
    }

    #[test]
    fn probabilities_match_projectors() {
        let v = 2;
        let a = random_matrix(4, 9);
        let mut rho = &a * a.adjoint();
        let tr = rho.trace();
        rho /= tr;
        let table = restriction_table(v);
        let probs = outcome_probabilities(&to_pauli(&rho), &table);
        for (s, row) in probs.iter().enumerate() {
            let codes = setting_codes(v, s);
            for b in 0..4 {
                // Projector ⊗_k (I + (−1)^{b_k} B_k)/2
                let mut proj = DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
                for k in (0..v).rev() {
                    let sign = if b >> k & 1 == 1 { -1.0 } else { 1.0 };
                    let f = (pauli_matrix(0) + pauli_matrix(codes[k]) * Complex64::new(sign, 0.0)) * Complex64::new(0.5, 0.0);
                    proj = proj.kronecker(&f);
                }
                let expect = (&rho * proj).trace().re;
                assert!((row[b] - expect).abs() < 1e-12);
            }
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
