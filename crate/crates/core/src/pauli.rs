//! Exact algebra on N-site Pauli strings and weighted sums of them.
//!
//! A [`PauliString`] is stored in symplectic form: one X bit and one Z bit per
//! site, packed into two `u64` masks. Site `i` lives at bit `n - 1 - i`, so the
//! masks line up with computational-basis indices where site 0 is the most
//! significant qubit. That convention is shared by [`PauliSum::to_matrix`],
//! the state-vector code in [`crate::dynamics`], and every oracle test.
//!
//! Canonical strings carry no phase. Products return the phase separately:
//!
//! ```
//! use cold::pauli::{string_product, PauliString};
//!
//! let xz = PauliString::from_letters("XZ").unwrap();
//! let yi = PauliString::from_letters("YI").unwrap();
//! let (phase, r) = string_product(&xz, &yi).unwrap();
//! assert_eq!(r.letters(), "ZZ");
//! assert_eq!(phase.power(), 1); // i^1
//! ```

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Coefficients with modulus below this are dropped from a [`PauliSum`].
pub const PRUNE_THRESHOLD: f64 = 1e-15;

/// Default cap on the number of sites for dense matrix realisation.
pub const DEFAULT_DENSE_CAP: usize = 14;

/// Largest chain a [`PauliString`] can describe.
pub const MAX_SITES: usize = 64;

/// Single-site Pauli letter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            'I' | 'i' => Some(Pauli::I),
            'X' | 'x' => Some(Pauli::X),
            'Y' | 'y' => Some(Pauli::Y),
            'Z' | 'z' => Some(Pauli::Z),
            _ => None,
        }
    }
}

/// A power of `i`: one of {1, i, -1, -i}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Phase(u8);

impl Phase {
    pub const ONE: Phase = Phase(0);
    pub const I: Phase = Phase(1);
    pub const MINUS_ONE: Phase = Phase(2);
    pub const MINUS_I: Phase = Phase(3);

    pub fn from_power(k: i64) -> Self {
        Phase(k.rem_euclid(4) as u8)
    }

    /// Exponent `k` in `i^k`, always in `0..4`.
    pub fn power(self) -> u8 {
        self.0
    }

    pub fn value(self) -> Complex64 {
        match self.0 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        }
    }

    /// Multiply `c` by this phase without rounding.
    pub fn apply(self, c: Complex64) -> Complex64 {
        match self.0 {
            0 => c,
            1 => Complex64::new(-c.im, c.re),
            2 => -c,
            _ => Complex64::new(c.im, -c.re),
        }
    }
}

impl std::ops::Mul for Phase {
    type Output = Phase;
    fn mul(self, rhs: Phase) -> Phase {
        Phase((self.0 + rhs.0) % 4)
    }
}

/// Tensor product of single-site Pauli letters on `n` sites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PauliString {
    n: u32,
    x: u64,
    z: u64,
}

impl PauliString {
    pub fn identity(n: usize) -> Self {
        assert!(
            (1..=MAX_SITES).contains(&n),
            "Pauli strings support 1..={MAX_SITES} sites"
        );
        PauliString {
            n: n as u32,
            x: 0,
            z: 0,
        }
    }

    /// Build a string from `(site, letter)` pairs; unspecified sites are `I`.
    /// Later entries for the same site overwrite earlier ones.
    pub fn from_sites(n: usize, sites: &[(usize, Pauli)]) -> Self {
        let mut s = Self::identity(n);
        for &(site, p) in sites {
            s.set(site, p);
        }
        s
    }

    pub fn single(n: usize, site: usize, p: Pauli) -> Self {
        Self::from_sites(n, &[(site, p)])
    }

    pub fn from_letters(text: &str) -> Result<Self> {
        let letters: Vec<Pauli> = text
            .trim()
            .chars()
            .map(|c| Pauli::from_char(c).ok_or_else(|| Error::Parse(format!("bad letter {c:?} in {text:?}"))))
            .collect::<Result<_>>()?;
        if letters.is_empty() || letters.len() > MAX_SITES {
            return Err(Error::Parse(format!(
                "string length {} outside 1..={MAX_SITES}",
                letters.len()
            )));
        }
        let mut s = Self::identity(letters.len());
        for (i, p) in letters.into_iter().enumerate() {
            s.set(i, p);
        }
        Ok(s)
    }

    fn bit(&self, site: usize) -> u64 {
        assert!(site < self.n as usize, "site {site} out of range for {} sites", self.n);
        1u64 << (self.n as usize - 1 - site)
    }

    fn set(&mut self, site: usize, p: Pauli) {
        let b = self.bit(site);
        let (x, z) = p.bits();
        self.x = if x { self.x | b } else { self.x & !b };
        self.z = if z { self.z | b } else { self.z & !b };
    }

    pub fn n_sites(&self) -> usize {
        self.n as usize
    }

    pub fn letter(&self, site: usize) -> Pauli {
        let b = self.bit(site);
        Pauli::from_bits(self.x & b != 0, self.z & b != 0)
    }

    pub fn letters(&self) -> String {
        (0..self.n_sites()).map(|i| self.letter(i).as_char()).collect()
    }

    /// X-part mask in basis-index bit order.
    pub fn x_mask(&self) -> u64 {
        self.x
    }

    /// Z-part mask in basis-index bit order.
    pub fn z_mask(&self) -> u64 {
        self.z
    }

    /// Number of `Y` letters.
    pub fn y_count(&self) -> u32 {
        (self.x & self.z).count_ones()
    }

    pub fn weight(&self) -> u32 {
        (self.x | self.z).count_ones()
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    pub fn commutes_with(&self, other: &PauliString) -> bool {
        ((self.x & other.z).count_ones() + (self.z & other.x).count_ones()) % 2 == 0
    }

    /// Matrix element action: `P|b> = phase * |b ^ x_mask>`.
    pub fn apply_to_basis(&self, b: u64) -> (Phase, u64) {
        let sign = 2 * ((self.z & b).count_ones() as i64 % 2);
        (Phase::from_power(self.y_count() as i64 + sign), b ^ self.x)
    }
}

impl PartialOrd for PauliString {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Lexicographic on the letter sequence (I < X < Y < Z), site 0 first.
impl Ord for PauliString {
    fn cmp(&self, other: &Self) -> Ordering {
        self.n.cmp(&other.n).then_with(|| {
            // site 0 is the top bit, so a high-to-low bit scan is a site-order scan
            let code = |s: &PauliString| {
                let mut k: u128 = 0;
                for i in 0..s.n_sites() {
                    k = (k << 2) | s.letter(i) as u128;
                }
                k
            };
            code(self).cmp(&code(other))
        })
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.letters())
    }
}

fn check_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::LengthMismatch { left: a, right: b });
    }
    Ok(())
}

/// `p * q = phase * r` with `r` canonical.
pub fn string_product(p: &PauliString, q: &PauliString) -> Result<(Phase, PauliString)> {
    check_len(p.n_sites(), q.n_sites())?;
    Ok(product_unchecked(p, q))
}

fn product_unchecked(p: &PauliString, q: &PauliString) -> (Phase, PauliString) {
    // sigma(x,z) = i^{xz} X^x Z^z, and Z^z1 X^x2 = (-1)^{z1 x2} X^x2 Z^z1
    let r = PauliString {
        n: p.n,
        x: p.x ^ q.x,
        z: p.z ^ q.z,
    };
    let k = (p.x & p.z).count_ones() as i64 + (q.x & q.z).count_ones() as i64
        + 2 * (p.z & q.x).count_ones() as i64
        - (r.x & r.z).count_ones() as i64;
    (Phase::from_power(k), r)
}

/// Weighted sum of Pauli strings on a fixed number of sites.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliSum {
    n: usize,
    terms: BTreeMap<PauliString, Complex64>,
}

impl PauliSum {
    pub fn new(n: usize) -> Self {
        assert!((1..=MAX_SITES).contains(&n));
        PauliSum {
            n,
            terms: BTreeMap::new(),
        }
    }

    pub fn from_terms<I>(n: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Complex64, PauliString)>,
    {
        let mut s = Self::new(n);
        for (c, p) in terms {
            s.add_term(c, p)?;
        }
        Ok(s)
    }

    /// Real-weighted convenience constructor.
    pub fn from_real_terms<I>(n: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, PauliString)>,
    {
        Self::from_terms(n, terms.into_iter().map(|(c, p)| (Complex64::new(c, 0.0), p)))
    }

    pub fn n_sites(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PauliString, &Complex64)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, p: &PauliString) -> Complex64 {
        self.terms.get(p).copied().unwrap_or_default()
    }

    pub fn add_term(&mut self, c: Complex64, p: PauliString) -> Result<()> {
        check_len(self.n, p.n_sites())?;
        self.accumulate(p, c);
        Ok(())
    }

    pub fn add_real_term(&mut self, c: f64, p: PauliString) -> Result<()> {
        self.add_term(Complex64::new(c, 0.0), p)
    }

    fn accumulate(&mut self, p: PauliString, c: Complex64) {
        let entry = self.terms.entry(p).or_default();
        *entry += c;
        if entry.norm() < PRUNE_THRESHOLD {
            self.terms.remove(&p);
        }
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &PauliSum, scale: Complex64) -> Result<()> {
        check_len(self.n, other.n)?;
        for (p, c) in &other.terms {
            self.accumulate(*p, c * scale);
        }
        Ok(())
    }

    pub fn add_scaled_real(&mut self, other: &PauliSum, scale: f64) -> Result<()> {
        self.add_scaled(other, Complex64::new(scale, 0.0))
    }

    pub fn scaled(&self, scale: f64) -> PauliSum {
        let mut out = PauliSum::new(self.n);
        for (p, c) in &self.terms {
            out.accumulate(*p, c * scale);
        }
        out
    }

    /// Linear combination `sum_k w_k A_k` of same-size operators.
    pub fn linear_combination(n: usize, parts: &[(f64, &PauliSum)]) -> Result<PauliSum> {
        let mut out = PauliSum::new(n);
        for (w, a) in parts {
            out.add_scaled_real(a, *w)?;
        }
        Ok(out)
    }

    /// Largest |Im c| over all coefficients.
    pub fn max_imag(&self) -> f64 {
        self.terms.values().map(|c| c.im.abs()).fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.max_imag() <= tol
    }

    /// Sum of |coefficient|: an upper bound on the spectral norm.
    pub fn l1_norm(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).sum()
    }

    /// Dense realisation, site 0 as most significant qubit.
    pub fn to_matrix(&self) -> Result<DMatrix<Complex64>> {
        self.to_matrix_capped(DEFAULT_DENSE_CAP)
    }

    pub fn to_matrix_capped(&self, cap: usize) -> Result<DMatrix<Complex64>> {
        if self.n > cap {
            return Err(Error::DimensionCap { n: self.n, cap });
        }
        let dim = 1usize << self.n;
        let mut m = DMatrix::<Complex64>::zeros(dim, dim);
        for (p, c) in &self.terms {
            for b in 0..dim as u64 {
                let (ph, row) = p.apply_to_basis(b);
                m[(row as usize, b as usize)] += ph.apply(*c);
            }
        }
        Ok(m)
    }

    /// Render as one `coeff  letters` line per term.
    pub fn to_text(&self) -> String {
        self.to_string()
    }
}

fn format_coeff(c: &Complex64) -> String {
    if c.im == 0.0 {
        format!("{:?}", c.re)
    } else if c.re == 0.0 {
        format!("{:?}i", c.im)
    } else {
        format!("{:?}{:+?}i", c.re, c.im)
    }
}

fn parse_coeff(text: &str) -> Result<Complex64> {
    let t = text.trim().replace('\u{2212}', "-");
    let bad = || Error::Parse(format!("bad coefficient {text:?}"));
    if let Some(body) = t.strip_suffix('i') {
        // split "re+imi" at the sign that starts the imaginary part
        let split = body
            .char_indices()
            .skip(1)
            .filter(|&(k, ch)| (ch == '+' || ch == '-') && !matches!(body.as_bytes()[k - 1], b'e' | b'E'))
            .map(|(k, _)| k)
            .last();
        return match split {
            Some(k) => {
                let re: f64 = body[..k].parse().map_err(|_| bad())?;
                let im: f64 = body[k..].parse().map_err(|_| bad())?;
                Ok(Complex64::new(re, im))
            }
            None => {
                let im: f64 = match body {
                    "" | "+" => 1.0,
                    "-" => -1.0,
                    s => s.parse().map_err(|_| bad())?,
                };
                Ok(Complex64::new(0.0, im))
            }
        };
    }
    t.parse::<f64>().map(|re| Complex64::new(re, 0.0)).map_err(|_| bad())
}

impl fmt::Display for PauliSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (p, c) in &self.terms {
            writeln!(f, "{}  {}", format_coeff(c), p)?;
        }
        Ok(())
    }
}

impl FromStr for PauliSum {
    type Err = Error;

    /// Parse the `coeff  letters` line format. Blank lines and `#` comments
    /// are skipped; every string must have the same length.
    fn from_str(s: &str) -> Result<Self> {
        let mut terms = Vec::new();
        for line in s.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (Some(c), Some(p), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::Parse(format!("expected `coeff letters`, got {line:?}")));
            };
            terms.push((parse_coeff(c)?, PauliString::from_letters(p)?));
        }
        let n = terms
            .first()
            .map(|(_, p)| p.n_sites())
            .ok_or_else(|| Error::Parse("empty operator".into()))?;
        PauliSum::from_terms(n, terms)
    }
}

/// Operator product `a * b`.
pub fn product(a: &PauliSum, b: &PauliSum) -> Result<PauliSum> {
    check_len(a.n, b.n)?;
    let mut out = PauliSum::new(a.n);
    for (p, cp) in &a.terms {
        for (q, cq) in &b.terms {
            let (ph, r) = product_unchecked(p, q);
            out.accumulate(r, ph.apply(cp * cq));
        }
    }
    Ok(out)
}

/// `[a, b] = ab - ba`.
///
/// Only anticommuting string pairs contribute (`[p, q] = 2pq`). Contributions
/// are summed in an order that depends on the unordered pair `{p, q}` only,
/// which makes `commutator(a, b) == -commutator(b, a)` hold bit for bit.
pub fn commutator(a: &PauliSum, b: &PauliSum) -> Result<PauliSum> {
    check_len(a.n, b.n)?;
    let mut contributions: Vec<(PauliString, PauliString, PauliString, Complex64)> = Vec::new();
    for (p, cp) in &a.terms {
        for (q, cq) in &b.terms {
            if p.commutes_with(q) {
                continue;
            }
            let (ph, r) = product_unchecked(p, q);
            let v = ph.apply(cp * cq) * 2.0;
            let (lo, hi) = if p <= q { (*p, *q) } else { (*q, *p) };
            contributions.push((r, lo, hi, v));
        }
    }
    contributions.sort_by(|x, y| (x.0, x.1, x.2).cmp(&(y.0, y.1, y.2)));

    let mut out = PauliSum::new(a.n);
    let mut k = 0;
    while k < contributions.len() {
        let (r, lo, hi, mut v) = contributions[k];
        k += 1;
        // at most one partner: the same pair seen from the other operand
        while k < contributions.len() && (contributions[k].0, contributions[k].1, contributions[k].2) == (r, lo, hi) {
            v += contributions[k].3;
            k += 1;
        }
        out.accumulate(r, v);
    }
    Ok(out)
}

/// `Tr[a b] = 2^N * sum_P a_P b_P`.
pub fn trace_pair(a: &PauliSum, b: &PauliSum) -> Result<Complex64> {
    check_len(a.n, b.n)?;
    let mut acc = Complex64::default();
    for (p, ca) in &a.terms {
        if let Some(cb) = b.terms.get(p) {
            acc += ca * cb;
        }
    }
    Ok(acc * (2f64).powi(a.n as i32))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn ps(s: &str) -> PauliString {
        PauliString::from_letters(s).unwrap()
    }

    fn sum(n: usize, terms: &[(f64, &str)]) -> PauliSum {
        PauliSum::from_real_terms(n, terms.iter().map(|(c, s)| (*c, ps(s)))).unwrap()
    }

    fn single_site_matrix(p: Pauli) -> DMatrix<Complex64> {
        let z = c(0.0, 0.0);
        let o = c(1.0, 0.0);
        let i = c(0.0, 1.0);
        match p {
            Pauli::I => DMatrix::from_row_slice(2, 2, &[o, z, z, o]),
            Pauli::X => DMatrix::from_row_slice(2, 2, &[z, o, o, z]),
            Pauli::Y => DMatrix::from_row_slice(2, 2, &[z, -i, i, z]),
            Pauli::Z => DMatrix::from_row_slice(2, 2, &[o, z, z, -o]),
        }
    }

    /// Independent Kronecker-product realisation, site 0 leftmost.
    fn kron_matrix(a: &PauliSum) -> DMatrix<Complex64> {
        let dim = 1 << a.n_sites();
        let mut m = DMatrix::zeros(dim, dim);
        for (p, coef) in a.iter() {
            let mut k = DMatrix::from_element(1, 1, c(1.0, 0.0));
            for i in 0..p.n_sites() {
                k = k.kronecker(&single_site_matrix(p.letter(i)));
            }
            m += k * *coef;
        }
        m
    }

    #[test]
    fn single_site_products() {
        let (ph, r) = string_product(&ps("X"), &ps("X")).unwrap();
        assert_eq!((ph, r.letters()), (Phase::ONE, "I".to_string()));
        let (ph, r) = string_product(&ps("X"), &ps("Y")).unwrap();
        assert_eq!((ph, r.letters()), (Phase::I, "Z".to_string()));
        let (ph, r) = string_product(&ps("Y"), &ps("X")).unwrap();
        assert_eq!((ph, r.letters()), (Phase::MINUS_I, "Z".to_string()));
        let (ph, r) = string_product(&ps("Z"), &ps("Y")).unwrap();
        assert_eq!((ph, r.letters()), (Phase::MINUS_I, "X".to_string()));
    }

    #[test]
    fn sitewise_composition() {
        // X·Y = iZ on site 0, Z·I = Z on site 1
        let (ph, r) = string_product(&ps("XZ"), &ps("YI")).unwrap();
        assert_eq!(ph, Phase::I);
        assert_eq!(r.letters(), "ZZ");
    }

    #[test]
    fn product_length_mismatch() {
        assert_eq!(
            string_product(&ps("XZ"), &ps("X")),
            Err(Error::LengthMismatch { left: 2, right: 1 })
        );
        assert!(commutator(&sum(2, &[(1.0, "XX")]), &sum(3, &[(1.0, "XXX")])).is_err());
        assert!(trace_pair(&sum(2, &[(1.0, "XX")]), &sum(3, &[(1.0, "XXX")])).is_err());
    }

    #[test]
    fn commutator_examples() {
        assert!(commutator(&sum(1, &[(1.0, "X")]), &sum(1, &[(1.0, "X")])).unwrap().is_empty());

        let xy = commutator(&sum(1, &[(1.0, "X")]), &sum(1, &[(1.0, "Y")])).unwrap();
        assert_eq!(xy.len(), 1);
        assert_eq!(xy.coefficient(&ps("Z")), c(0.0, 2.0));

        let sy = sum(2, &[(1.0, "YI"), (1.0, "IY")]);
        let mx = sum(2, &[(-1.0, "XI"), (-1.0, "IX")]);
        let got = commutator(&sy, &mx).unwrap();
        let expected = kron_matrix(&sy) * kron_matrix(&mx) - kron_matrix(&mx) * kron_matrix(&sy);
        assert_eq!(got.len(), 2);
        assert_eq!(got.coefficient(&ps("ZI")), c(0.0, 2.0));
        assert_eq!(got.coefficient(&ps("IZ")), c(0.0, 2.0));
        assert!((got.to_matrix().unwrap() - expected).norm() < 1e-14);
    }

    #[test]
    fn trace_examples() {
        assert_eq!(trace_pair(&sum(1, &[(1.0, "X")]), &sum(1, &[(1.0, "Z")])).unwrap(), c(0.0, 0.0));
        assert_eq!(trace_pair(&sum(1, &[(2.0, "X")]), &sum(1, &[(3.0, "X")])).unwrap(), c(12.0, 0.0));
    }

    #[test]
    fn matrix_examples() {
        let z = sum(1, &[(1.0, "Z")]).to_matrix().unwrap();
        assert_eq!(z, DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]));
        let x = sum(1, &[(1.0, "X")]).to_matrix().unwrap();
        assert_eq!(x, DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]));
        let zz = sum(2, &[(1.0, "ZI"), (1.0, "IZ")]).to_matrix().unwrap();
        let diag: Vec<f64> = (0..4).map(|k| zz[(k, k)].re).collect();
        assert_eq!(diag, vec![2.0, 0.0, 0.0, -2.0]);
        assert!((zz.clone() - DMatrix::from_diagonal(&zz.diagonal())).norm() == 0.0);
    }

    #[test]
    fn dense_cap() {
        let big = PauliSum::from_real_terms(15, [(1.0, PauliString::identity(15))]).unwrap();
        assert_eq!(big.to_matrix(), Err(Error::DimensionCap { n: 15, cap: 14 }));
    }

    #[test]
    fn pruning_removes_cancelled_terms() {
        let mut s = sum(2, &[(1.0, "XX"), (0.5, "ZZ")]);
        s.add_real_term(-1.0, ps("XX")).unwrap();
        assert_eq!(s.len(), 1);
        s.add_real_term(1e-16, ps("YY")).unwrap();
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn text_roundtrip_and_format() {
        let s = sum(3, &[(-1.0, "XXI"), (0.25, "IZZ")]);
        let text = s.to_text();
        assert!(text.contains("-1.0  XXI"));
        let back: PauliSum = text.parse().unwrap();
        assert_eq!(back, s);

        let mut cplx = PauliSum::new(1);
        cplx.add_term(c(0.5, -2.0), ps("Y")).unwrap();
        cplx.add_term(c(0.0, 2.0), ps("Z")).unwrap();
        let back: PauliSum = cplx.to_text().parse().unwrap();
        assert_eq!(back, cplx);
        assert!("1.0 XY Z".parse::<PauliSum>().is_err());
        assert!("1.0 XQ".parse::<PauliSum>().is_err());
        assert!("1.0 XX\n1.0 X".parse::<PauliSum>().is_err());
    }

    fn letters_strategy(n: usize) -> impl Strategy<Value = String> {
        proptest::collection::vec(prop_oneof![Just('I'), Just('X'), Just('Y'), Just('Z')], n)
            .prop_map(|v| v.into_iter().collect())
    }

    fn sum_strategy(n: usize, hermitian: bool) -> impl Strategy<Value = PauliSum> {
        proptest::collection::vec((letters_strategy(n), -2.0f64..2.0, -2.0f64..2.0), 1..6).prop_map(move |terms| {
            PauliSum::from_terms(
                n,
                terms
                    .into_iter()
                    .map(|(s, re, im)| (c(re, if hermitian { 0.0 } else { im }), ps(&s))),
            )
            .unwrap()
        })
    }

    proptest! {
        #[test]
        fn product_phase_and_commutation(a in letters_strategy(5), b in letters_strategy(5)) {
            let (p, q) = (ps(&a), ps(&b));
            let (ph1, r1) = string_product(&p, &q).unwrap();
            let (ph2, r2) = string_product(&q, &p).unwrap();
            prop_assert_eq!(r1, r2);
            let ratio = ph1.power() as i32 - ph2.power() as i32;
            let expected = if p.commutes_with(&q) { 0 } else { 2 };
            prop_assert_eq!(ratio.rem_euclid(4), expected);
        }

        #[test]
        fn product_matches_kronecker(a in letters_strategy(3), b in letters_strategy(3)) {
            let (p, q) = (ps(&a), ps(&b));
            let (ph, r) = string_product(&p, &q).unwrap();
            let pm = kron_matrix(&PauliSum::from_real_terms(3, [(1.0, p)]).unwrap());
            let qm = kron_matrix(&PauliSum::from_real_terms(3, [(1.0, q)]).unwrap());
            let rm = kron_matrix(&PauliSum::from_terms(3, [(ph.value(), r)]).unwrap());
            prop_assert!((pm * qm - rm).norm() < 1e-14);
        }

        #[test]
        fn commutator_antisymmetric_exactly(a in sum_strategy(3, false), b in sum_strategy(3, false)) {
            let ab = commutator(&a, &b).unwrap();
            let ba = commutator(&b, &a).unwrap();
            prop_assert_eq!(ab, ba.scaled(-1.0));
        }

        #[test]
        fn hermitian_commutator_is_imaginary(a in sum_strategy(4, true), b in sum_strategy(4, true)) {
            let ab = commutator(&a, &b).unwrap();
            for (_, coef) in ab.iter() {
                prop_assert_eq!(coef.re, 0.0);
            }
        }

        #[test]
        fn commutator_matches_dense(a in sum_strategy(3, false), b in sum_strategy(3, false)) {
            let (am, bm) = (kron_matrix(&a), kron_matrix(&b));
            let dense = &am * &bm - &bm * &am;
            let got = commutator(&a, &b).unwrap().to_matrix().unwrap();
            prop_assert!((got - dense).norm() <= 1e-12 * (1.0 + am.norm() * bm.norm()));
        }

        #[test]
        fn trace_matches_dense(n in 1usize..=4, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut random_sum = || {
                let mut s = PauliSum::new(n);
                for _ in 0..6 {
                    let letters: String = (0..n).map(|_| ['I', 'X', 'Y', 'Z'][rng.gen_range(0..4)]).collect();
                    s.add_term(c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)), ps(&letters)).unwrap();
                }
                s
            };
            let (a, b) = (random_sum(), random_sum());
            let dense = (kron_matrix(&a) * kron_matrix(&b)).trace();
            let got = trace_pair(&a, &b).unwrap();
            prop_assert!((got - dense).norm() <= 1e-12 * dense.norm().max(1.0));
        }

        #[test]
        fn trace_symmetric(a in sum_strategy(3, false), b in sum_strategy(3, false)) {
            prop_assert_eq!(trace_pair(&a, &b).unwrap(), trace_pair(&b, &a).unwrap());
        }
    }

    #[test]
    fn product_of_sums_matches_dense() {
        let a = sum(2, &[(1.0, "XY"), (-0.5, "ZI")]);
        let b = sum(2, &[(2.0, "YY"), (0.25, "IX")]);
        let got = product(&a, &b).unwrap().to_matrix().unwrap();
        assert_abs_diff_eq!((got - kron_matrix(&a) * kron_matrix(&b)).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn ordering_is_lexicographic() {
        let mut v = vec![ps("ZI"), ps("IX"), ps("XY"), ps("II")];
        v.sort();
        let s: Vec<String> = v.iter().map(|p| p.letters()).collect();
        assert_eq!(s, ["II", "IX", "XY", "ZI"]);
    }
}
