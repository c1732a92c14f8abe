//! Exact arithmetic in the algebra generated by `z_i`, `z_i*` with
//! `[z_i*, z_j] = ħ δ_ij`, all `z` commuting and all `z*` commuting.
//!
//! Elements are kept in normal order `z^k z*^l` with coefficients that are
//! polynomials in `ħ` over the Gaussian rationals.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_complex::Complex;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type GaussianRational = Complex<BigRational>;
pub type MultiIndex = Vec<u32>;

pub fn gaussian(re: i64, im: i64) -> GaussianRational {
    Complex::new(BigRational::from_integer(re.into()), BigRational::from_integer(im.into()))
}

pub fn rational(x: &BigRational) -> GaussianRational {
    Complex::new(x.clone(), BigRational::zero())
}

pub fn gaussian_to_f64(z: &GaussianRational) -> Complex<f64> {
    Complex::new(
        z.re.to_f64().unwrap_or(f64::NAN),
        z.im.to_f64().unwrap_or(f64::NAN),
    )
}

pub(crate) fn factorial(k: u32) -> BigInt {
    (1..=k).fold(BigInt::one(), |acc, j| acc * BigInt::from(j))
}

fn binomial(n: u32, k: u32) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    (0..k).fold(BigInt::one(), |acc, j| acc * BigInt::from(n - j) / BigInt::from(j + 1))
}

/// Polynomial in `ħ`; `coeffs[j]` multiplies `ħ^j`. Trailing zeros are
/// never stored.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct HbarPoly(Vec<GaussianRational>);

impl HbarPoly {
    pub fn zero() -> Self {
        HbarPoly(Vec::new())
    }

    pub fn constant(c: GaussianRational) -> Self {
        HbarPoly::monomial(c, 0)
    }

    pub fn monomial(c: GaussianRational, degree: usize) -> Self {
        let mut v = vec![GaussianRational::zero(); degree + 1];
        v[degree] = c;
        HbarPoly(v).trimmed()
    }

    fn trimmed(mut self) -> Self {
        while self.0.last().is_some_and(Zero::is_zero) {
            self.0.pop();
        }
        self
    }

    pub fn coeffs(&self) -> &[GaussianRational] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn add(&self, other: &HbarPoly) -> Self {
        let len = self.0.len().max(other.0.len());
        let zero = GaussianRational::zero();
        HbarPoly(
            (0..len)
                .map(|j| self.0.get(j).unwrap_or(&zero) + other.0.get(j).unwrap_or(&zero))
                .collect(),
        )
        .trimmed()
    }

    pub fn mul(&self, other: &HbarPoly) -> Self {
        if self.is_zero() || other.is_zero() {
            return HbarPoly::zero();
        }
        let mut v = vec![GaussianRational::zero(); self.0.len() + other.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in other.0.iter().enumerate() {
                v[i + j] += a * b;
            }
        }
        HbarPoly(v).trimmed()
    }

    pub fn scale(&self, c: &GaussianRational) -> Self {
        HbarPoly(self.0.iter().map(|a| a * c).collect()).trimmed()
    }

    pub fn conj(&self) -> Self {
        HbarPoly(self.0.iter().map(Complex::conj).collect())
    }

    pub fn eval(&self, hbar: &BigRational) -> GaussianRational {
        let h = rational(hbar);
        self.0.iter().rev().fold(GaussianRational::zero(), |acc, c| acc * &h + c)
    }

    pub fn eval_f64(&self, hbar: f64) -> Complex<f64> {
        self.0
            .iter()
            .rev()
            .fold(Complex::zero(), |acc, c| acc * hbar + gaussian_to_f64(c))
    }
}

/// A finite sum `Σ p_{k,l}(ħ) z^k z*^l`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormalForm {
    n: usize,
    terms: BTreeMap<(MultiIndex, MultiIndex), HbarPoly>,
}

impl NormalForm {
    pub fn zero(n: usize) -> Self {
        NormalForm {
            n,
            terms: BTreeMap::new(),
        }
    }

    pub fn one(n: usize) -> Self {
        let mut f = NormalForm::zero(n);
        f.add_term((vec![0; n], vec![0; n]), HbarPoly::constant(gaussian(1, 0)));
        f
    }

    /// `z^k z*^l`.
    pub fn monomial(k: MultiIndex, l: MultiIndex) -> Result<Self> {
        if k.len() != l.len() {
            return Err(Error::validation("exponent vectors have different lengths"));
        }
        let mut f = NormalForm::zero(k.len());
        f.add_term((k, l), HbarPoly::constant(gaussian(1, 0)));
        Ok(f)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &BTreeMap<(MultiIndex, MultiIndex), HbarPoly> {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub(crate) fn add_term(&mut self, key: (MultiIndex, MultiIndex), p: HbarPoly) {
        let sum = match self.terms.get(&key) {
            Some(old) => old.add(&p),
            None => p,
        };
        if sum.is_zero() {
            self.terms.remove(&key);
        } else {
            self.terms.insert(key, sum);
        }
    }

    pub fn add(&self, other: &NormalForm) -> Self {
        let mut out = self.clone();
        for (key, p) in &other.terms {
            out.add_term(key.clone(), p.clone());
        }
        out
    }

    pub fn scale(&self, c: &GaussianRational) -> Self {
        let mut out = NormalForm::zero(self.n);
        for (key, p) in &self.terms {
            out.add_term(key.clone(), p.scale(c));
        }
        out
    }

    /// Product via the Wick rule
    /// `z*^l z^k = Σ_j C(l,j) C(k,j) j! ħ^j z^{k−j} z*^{l−j}` per generator.
    pub fn mul(&self, other: &NormalForm) -> Self {
        let mut out = NormalForm::zero(self.n);
        for ((k1, l1), p1) in &self.terms {
            for ((k2, l2), p2) in &other.terms {
                let bound: Vec<u32> = l1.iter().zip(k2).map(|(a, b)| *a.min(b)).collect();
                let mut j = vec![0u32; self.n];
                loop {
                    let mut coeff = BigInt::one();
                    for i in 0..self.n {
                        coeff *= binomial(l1[i], j[i]) * binomial(k2[i], j[i]) * factorial(j[i]);
                    }
                    let total: u32 = j.iter().sum();
                    let k: MultiIndex = (0..self.n).map(|i| k1[i] + k2[i] - j[i]).collect();
                    let l: MultiIndex = (0..self.n).map(|i| l1[i] + l2[i] - j[i]).collect();
                    let c = HbarPoly::monomial(rational(&BigRational::from_integer(coeff)), total as usize);
                    out.add_term((k, l), p1.mul(p2).mul(&c));
                    if !next_index(&mut j, &bound) {
                        break;
                    }
                }
            }
        }
        out
    }

    /// Anti-linear anti-involution `z_i ↦ z_i*`.
    pub fn star(&self) -> Self {
        let mut out = NormalForm::zero(self.n);
        for ((k, l), p) in &self.terms {
            out.add_term((l.clone(), k.clone()), p.conj());
        }
        out
    }
}

/// Odometer over `0 ≤ j ≤ bound`; false once exhausted.
pub(crate) fn next_index(j: &mut [u32], bound: &[u32]) -> bool {
    for i in 0..j.len() {
        if j[i] < bound[i] {
            j[i] += 1;
            return true;
        }
        j[i] = 0;
    }
    false
}

impl fmt::Display for NormalForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for ((k, l), p) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            let poly: Vec<String> = p
                .coeffs()
                .iter()
                .enumerate()
                .filter(|(_, c)| !c.is_zero())
                .map(|(j, c)| match j {
                    0 => format!("({c})"),
                    _ => format!("({c})ħ^{j}"),
                })
                .collect();
            write!(f, "[{}]", poly.join(" + "))?;
            for (i, e) in k.iter().enumerate().filter(|(_, e)| **e > 0) {
                write!(f, " z{}^{e}", i + 1)?;
            }
            for (i, e) in l.iter().enumerate().filter(|(_, e)| **e > 0) {
                write!(f, " z{}*^{e}", i + 1)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Letter {
    /// Zero-based generator index.
    pub index: usize,
    pub star: bool,
}

/// A scalar times a product of letters, in the order written.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Word {
    n: usize,
    letters: Vec<Letter>,
    scalar: GaussianRational,
}

impl Word {
    pub fn new(n: usize, letters: Vec<Letter>, scalar: GaussianRational) -> Result<Self> {
        if let Some(l) = letters.iter().find(|l| l.index >= n) {
            return Err(Error::validation(format!(
                "letter index {} out of range for {n} generators",
                l.index + 1
            )));
        }
        Ok(Word { n, letters, scalar })
    }

    /// Whitespace-separated letters `z1`, `z2*`, ... (indices start at 1).
    pub fn parse(n: usize, text: &str) -> Result<Self> {
        let mut letters = Vec::new();
        let mut column = 1;
        for token in text.split(' ') {
            if !token.is_empty() {
                let err = |message: &str| Error::Parse {
                    line: 1,
                    column,
                    message: format!("{message}: {token:?}"),
                };
                let (body, star) = match token.strip_suffix('*') {
                    Some(b) => (b, true),
                    None => (token, false),
                };
                let digits = body.strip_prefix('z').ok_or_else(|| err("expected a letter z<i>"))?;
                let i: usize = digits.parse().map_err(|_| err("bad generator index"))?;
                if i == 0 || i > n {
                    return Err(err("generator index out of range"));
                }
                letters.push(Letter { index: i - 1, star });
            }
            column += token.chars().count() + 1;
        }
        Word::new(n, letters, gaussian(1, 0))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn scalar(&self) -> &GaussianRational {
        &self.scalar
    }

    pub fn with_scalar(mut self, c: GaussianRational) -> Self {
        self.scalar = c;
        self
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut letters = self.letters.clone();
        letters.extend_from_slice(&other.letters);
        Word {
            n: self.n,
            letters,
            scalar: &self.scalar * &other.scalar,
        }
    }

    /// Reverses the letters, toggles every star and conjugates the scalar.
    pub fn star(&self) -> Word {
        Word {
            n: self.n,
            letters: self
                .letters
                .iter()
                .rev()
                .map(|l| Letter {
                    index: l.index,
                    star: !l.star,
                })
                .collect(),
            scalar: self.scalar.conj(),
        }
    }
}

/// Normal form of a sum of words by repeated rewriting
/// `z_i* z_j → z_j z_i* + ħ δ_ij`.
pub fn normal_order(words: &[Word]) -> Result<NormalForm> {
    let Some(n) = words.first().map(Word::n) else {
        return Err(Error::validation("cannot normal-order an empty sum without a generator count"));
    };
    if words.iter().any(|w| w.n != n) {
        return Err(Error::validation("words have different generator counts"));
    }
    let mut pending: BTreeMap<Vec<Letter>, HbarPoly> = BTreeMap::new();
    let push = |pending: &mut BTreeMap<Vec<Letter>, HbarPoly>, w: Vec<Letter>, p: HbarPoly| {
        let sum = pending.get(&w).map_or(p.clone(), |old| old.add(&p));
        if sum.is_zero() {
            pending.remove(&w);
        } else {
            pending.insert(w, sum);
        }
    };
    for w in words {
        push(&mut pending, w.letters.clone(), HbarPoly::constant(w.scalar.clone()));
    }
    let hbar = HbarPoly::monomial(gaussian(1, 0), 1);
    let mut out = NormalForm::zero(n);
    while let Some((letters, coeff)) = pending.pop_first() {
        match letters.windows(2).position(|p| p[0].star && !p[1].star) {
            None => {
                let mut k = vec![0u32; n];
                let mut l = vec![0u32; n];
                for x in &letters {
                    if x.star {
                        l[x.index] += 1;
                    } else {
                        k[x.index] += 1;
                    }
                }
                out.add_term((k, l), coeff);
            }
            Some(p) => {
                let mut swapped = letters.clone();
                swapped.swap(p, p + 1);
                if letters[p].index == letters[p + 1].index {
                    let mut contracted = letters.clone();
                    contracted.drain(p..p + 2);
                    push(&mut pending, contracted, coeff.mul(&hbar));
                }
                push(&mut pending, swapped, coeff);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn word(n: usize, s: &str) -> Word {
        Word::parse(n, s).unwrap()
    }

    fn hbar_poly(c: &[i64]) -> HbarPoly {
        c.iter()
            .enumerate()
            .fold(HbarPoly::zero(), |acc, (j, &x)| acc.add(&HbarPoly::monomial(gaussian(x, 0), j)))
    }

    #[test]
    fn basic_commutator() {
        let nf = normal_order(&[word(1, "z1* z1")]).unwrap();
        let mut expected = NormalForm::monomial(vec![1], vec![1]).unwrap();
        expected.add_term((vec![0], vec![0]), hbar_poly(&[0, 1]));
        assert_eq!(nf, expected);
    }

    #[test]
    fn normal_words_are_unchanged() {
        let nf = normal_order(&[word(2, "z1 z2")]).unwrap();
        assert_eq!(nf, NormalForm::monomial(vec![1, 1], vec![0, 0]).unwrap());
        let mixed = normal_order(&[word(2, "z2* z1")]).unwrap();
        assert_eq!(mixed, NormalForm::monomial(vec![1, 0], vec![0, 1]).unwrap());
    }

    #[test]
    fn two_step_rewrite() {
        let nf = normal_order(&[word(1, "z1* z1* z1")]).unwrap();
        let mut expected = NormalForm::monomial(vec![1], vec![2]).unwrap();
        expected.add_term((vec![0], vec![1]), hbar_poly(&[0, 2]));
        assert_eq!(nf, expected);
    }

    #[test]
    fn wick_product_matches_rewriting() {
        let a = normal_order(&[word(1, "z1* z1*")]).unwrap();
        let b = normal_order(&[word(1, "z1 z1")]).unwrap();
        let direct = normal_order(&[word(1, "z1* z1* z1 z1")]).unwrap();
        assert_eq!(a.mul(&b), direct);
        // z*² z² = z² z*² + 4ħ z z* + 2ħ².
        assert_eq!(direct.terms()[&(vec![0], vec![0])], hbar_poly(&[0, 0, 2]));
        assert_eq!(direct.terms()[&(vec![1], vec![1])], hbar_poly(&[0, 4]));
    }

    #[test]
    fn cancellation_leaves_no_zero_terms() {
        let w = word(1, "z1* z1");
        let v = word(1, "z1 z1*").with_scalar(gaussian(-1, 0));
        let nf = normal_order(&[w, v]).unwrap();
        assert_eq!(nf.terms().len(), 1);
        assert_eq!(nf.terms()[&(vec![0], vec![0])], hbar_poly(&[0, 1]));
    }

    #[test]
    fn star_conjugates_scalars() {
        let w = word(2, "z1* z2").with_scalar(gaussian(2, 3));
        let lhs = normal_order(&[w.star()]).unwrap();
        let rhs = normal_order(&[w]).unwrap().star();
        assert_eq!(lhs, rhs);
        assert_eq!(lhs.terms()[&(vec![1, 0], vec![0, 1])].coeffs()[0], gaussian(2, -3));
    }

    #[test]
    fn parse_errors_report_columns() {
        match Word::parse(2, "z1 z3*") {
            Err(Error::Parse { column, .. }) => assert_eq!(column, 4),
            other => panic!("{other:?}"),
        }
        assert!(Word::parse(2, "x1").is_err());
        assert!(Word::parse(1, "z0").is_err());
        assert!(normal_order(&[]).is_err());
    }

    #[test]
    fn hbar_poly_evaluation() {
        let p = hbar_poly(&[1, -2, 3]);
        let h = BigRational::new(1.into(), 2.into());
        assert_eq!(p.eval(&h), rational(&BigRational::new(3.into(), 4.into())));
        assert!((p.eval_f64(0.5).re - 0.75).abs() < 1e-15);
    }
}
