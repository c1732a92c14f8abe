//! The Gaussian state `∫_ρ z^k z*^l = ∏_i δ_{k_i l_i} k_i! ρ^{k_i}` and the
//! identities it satisfies against the derivation `∂̄_i`.

use nalgebra::DMatrix;
use num_complex::Complex;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

use super::algebra::{factorial, gaussian, next_index, rational, GaussianRational, MultiIndex, NormalForm};
use crate::error::{Error, Result};
use crate::numerics::HermitianMatrix;

pub fn state_rho(x: &NormalForm, rho: &BigRational, hbar: &BigRational) -> GaussianRational {
    let mut acc = GaussianRational::zero();
    for ((k, l), p) in x.terms() {
        if k != l {
            continue;
        }
        let mut w = BigRational::from_integer(1.into());
        for &e in k {
            w *= BigRational::from_integer(factorial(e)) * num_traits::pow(rho.clone(), e as usize);
        }
        acc += p.eval(hbar) * rational(&w);
    }
    acc
}

pub fn state_rho_f64(x: &NormalForm, rho: f64, hbar: f64) -> Complex<f64> {
    let mut acc = Complex::zero();
    for ((k, l), p) in x.terms() {
        if k != l {
            continue;
        }
        let w: f64 = k
            .iter()
            .map(|&e| (1..=e).map(f64::from).product::<f64>() * rho.powi(e as i32))
            .product();
        acc += p.eval_f64(hbar) * w;
    }
    acc
}

/// `∂̄_i (z^k z*^l) = l_i z^k z*^{l − e_i}`, equivalently `ħ⁻¹ [a, z_i]`.
pub fn dbar(x: &NormalForm, i: usize) -> NormalForm {
    let mut out = NormalForm::zero(x.n());
    for ((k, l), p) in x.terms() {
        if l[i] == 0 {
            continue;
        }
        let mut l2 = l.clone();
        l2[i] -= 1;
        out.add_term((k.clone(), l2), p.scale(&gaussian(l[i] as i64, 0)));
    }
    out
}

/// All `(k, l)` with `|k| + |l| ≤ max_degree`.
pub fn normal_monomials(n: usize, max_degree: u32) -> Vec<(MultiIndex, MultiIndex)> {
    let bound = vec![max_degree; 2 * n];
    let mut e = vec![0u32; 2 * n];
    let mut out = Vec::new();
    loop {
        if e.iter().sum::<u32>() <= max_degree {
            out.push((e[..n].to_vec(), e[n..].to_vec()));
        }
        if !next_index(&mut e, &bound) {
            break;
        }
    }
    out.sort_by_key(|(k, l)| (k.iter().sum::<u32>() + l.iter().sum::<u32>(), k.clone(), l.clone()));
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateCheck {
    /// Number of `(a, i)` pairs checked.
    pub checked: usize,
    pub max_deviation: f64,
    /// True when every difference vanished exactly.
    pub exact_zero: bool,
}

fn generator(n: usize, i: usize) -> NormalForm {
    let mut k = vec![0; n];
    k[i] = 1;
    NormalForm::monomial(k, vec![0; n]).expect("lengths agree")
}

/// Checks, for every normal monomial `a` of degree at most `max_degree` and
/// every `i`,
/// `∫ ∂̄_i a = (ρ + ħ)⁻¹ ∫ a z_i` and `∫ z_i a = ρ (ρ + ħ)⁻¹ ∫ a z_i`
/// in exact arithmetic.
pub fn verify_state_identities(
    n: usize,
    max_degree: u32,
    rho: &BigRational,
    hbar: &BigRational,
) -> Result<StateCheck> {
    let denom = rho + hbar;
    if denom.is_zero() {
        return Err(Error::Domain("rho + hbar must be nonzero".into()));
    }
    let inv = rational(&(BigRational::from_integer(1.into()) / &denom));
    let ratio = rational(&(rho / &denom));
    let mut worst = BigRational::zero();
    let mut checked = 0;
    for (k, l) in normal_monomials(n, max_degree) {
        let a = NormalForm::monomial(k, l)?;
        for i in 0..n {
            let zi = generator(n, i);
            let a_zi = state_rho(&a.mul(&zi), rho, hbar);
            let by_parts = state_rho(&dbar(&a, i), rho, hbar) - &a_zi * &inv;
            let exchange = state_rho(&zi.mul(&a), rho, hbar) - &a_zi * &ratio;
            for d in [by_parts, exchange] {
                worst = worst.max(d.re.abs()).max(d.im.abs());
            }
            checked += 1;
        }
    }
    Ok(StateCheck {
        checked,
        max_deviation: worst.to_f64().unwrap_or(f64::INFINITY),
        exact_zero: worst.is_zero(),
    })
}

/// Floating-point version of [`verify_state_identities`].
pub fn verify_state_identities_f64(n: usize, max_degree: u32, rho: f64, hbar: f64) -> Result<StateCheck> {
    if !(rho + hbar).is_normal() {
        return Err(Error::Domain("rho + hbar must be nonzero and finite".into()));
    }
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for (k, l) in normal_monomials(n, max_degree) {
        let a = NormalForm::monomial(k, l)?;
        for i in 0..n {
            let zi = generator(n, i);
            let a_zi = state_rho_f64(&a.mul(&zi), rho, hbar);
            let by_parts = state_rho_f64(&dbar(&a, i), rho, hbar) - a_zi / (rho + hbar);
            let exchange = state_rho_f64(&zi.mul(&a), rho, hbar) - a_zi * (rho / (rho + hbar));
            worst = worst.max(by_parts.norm()).max(exchange.norm());
            checked += 1;
        }
    }
    Ok(StateCheck {
        checked,
        max_deviation: worst,
        exact_zero: worst == 0.0,
    })
}

/// Smallest eigenvalue of `G_pq = ∫ m_p m_q*` over normal monomials of
/// degree at most `max_degree`.
pub fn gram_min_eigenvalue(n: usize, max_degree: u32, rho: f64, hbar: f64) -> Result<f64> {
    let basis: Vec<NormalForm> = normal_monomials(n, max_degree)
        .into_iter()
        .map(|(k, l)| NormalForm::monomial(k, l))
        .collect::<Result<_>>()?;
    let stars: Vec<NormalForm> = basis.iter().map(NormalForm::star).collect();
    let m = basis.len();
    let g = DMatrix::from_fn(m, m, |p, q| state_rho_f64(&basis[p].mul(&stars[q]), rho, hbar));
    let h = HermitianMatrix::with_tolerance(g, 1e-9)?;
    Ok(h.eigh()?.values[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(a: i64, b: i64) -> BigRational {
        BigRational::new(a.into(), b.into())
    }

    fn mono(k: &[u32], l: &[u32]) -> NormalForm {
        NormalForm::monomial(k.to_vec(), l.to_vec()).unwrap()
    }

    #[test]
    fn state_examples() {
        let (rho, hbar) = (q(3, 2), q(1, 3));
        assert_eq!(state_rho(&mono(&[1], &[1]), &rho, &hbar), rational(&rho));
        let zs_z = mono(&[0], &[1]).mul(&mono(&[1], &[0]));
        assert_eq!(state_rho(&zs_z, &rho, &hbar), rational(&(&rho + &hbar)));
        assert_eq!(state_rho(&NormalForm::one(2), &rho, &hbar), gaussian(1, 0));
        assert_eq!(state_rho(&mono(&[2, 1], &[2, 0]), &rho, &hbar), GaussianRational::zero());
        // 2!·ρ² · 1!·ρ
        assert_eq!(
            state_rho(&mono(&[2, 1], &[2, 1]), &rho, &hbar),
            rational(&(q(2, 1) * &rho * &rho * &rho))
        );
    }

    #[test]
    fn dbar_is_inner() {
        // ħ ∂̄(a) = [a, z] on a = z z*³.
        let a = mono(&[1], &[3]);
        let z = mono(&[1], &[0]);
        let comm = a.mul(&z).add(&z.mul(&a).scale(&gaussian(-1, 0)));
        let expected = mono(&[1], &[2]).scale(&gaussian(3, 0));
        let hbar_times: NormalForm = {
            let mut out = NormalForm::zero(1);
            for (key, p) in expected.terms() {
                out.add_term(key.clone(), p.mul(&super::super::algebra::HbarPoly::monomial(gaussian(1, 0), 1)));
            }
            out
        };
        assert_eq!(comm, hbar_times);
        assert_eq!(dbar(&a, 0), expected);
    }

    #[test]
    fn identities_hold_exactly() {
        let r = verify_state_identities(2, 4, &q(2, 3), &q(5, 7)).unwrap();
        assert!(r.exact_zero);
        assert_eq!(r.max_deviation, 0.0);
        assert!(r.checked > 0);
        let zero = verify_state_identities(1, 0, &q(1, 1), &q(1, 1)).unwrap();
        assert!(zero.exact_zero);
        assert_eq!(zero.checked, 1);
        assert!(verify_state_identities(1, 2, &q(1, 1), &q(-1, 1)).is_err());
    }

    #[test]
    fn float_identities_are_close() {
        let r = verify_state_identities_f64(2, 4, 0.7, 1.3).unwrap();
        assert!(r.max_deviation < 1e-12);
    }

    #[test]
    fn monomial_count() {
        // Monomials of degree ≤ 2 in four commuting variables.
        assert_eq!(normal_monomials(2, 2).len(), 15);
        assert_eq!(normal_monomials(1, 0), vec![(vec![0], vec![0])]);
    }

    #[test]
    fn gram_is_positive() {
        assert!(gram_min_eigenvalue(1, 4, 1.0, 1.0).unwrap() >= -1e-10);
    }
}
