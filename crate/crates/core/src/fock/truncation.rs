//! Monomial bases of `ℂ[z₁,…,z_n]` or of a monomial ideal, cut at total
//! degree `D`, with the shift tables used by the Nekrasov equation.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::algebra::{next_index, MultiIndex};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModuleKind {
    Full,
    Ideal(Vec<MultiIndex>),
}

#[derive(Debug, Clone)]
pub struct FockTruncation {
    n: usize,
    kind: ModuleKind,
    cap: u32,
    basis: Vec<MultiIndex>,
    index: HashMap<MultiIndex, usize>,
    up: Vec<Vec<Option<usize>>>,
    down: Vec<Vec<Option<usize>>>,
}

fn degree(m: &[u32]) -> u32 {
    m.iter().sum()
}

impl FockTruncation {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> &ModuleKind {
        &self.kind
    }

    pub fn cap(&self) -> u32 {
        self.cap
    }

    /// Graded, descending lexicographic within a degree.
    pub fn basis(&self) -> &[MultiIndex] {
        &self.basis
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    pub fn degree(&self, site: usize) -> u32 {
        degree(&self.basis[site])
    }

    pub fn position(&self, m: &[u32]) -> Option<usize> {
        self.index.get(m).copied()
    }

    /// Site of `z_i · m`, absent at the cap.
    pub fn up(&self, site: usize, i: usize) -> Option<usize> {
        self.up[site][i]
    }

    /// Site of `m / z_i` when it lies in the module.
    pub fn down(&self, site: usize, i: usize) -> Option<usize> {
        self.down[site][i]
    }

    /// Sites of total degree `level`.
    pub fn level(&self, level: u32) -> impl Iterator<Item = usize> + '_ {
        (0..self.basis.len()).filter(move |&s| self.degree(s) == level)
    }

    pub fn min_degree(&self) -> u32 {
        self.basis.iter().map(|m| degree(m)).min().unwrap_or(0)
    }
}

fn in_module(kind: &ModuleKind, m: &[u32]) -> bool {
    match kind {
        ModuleKind::Full => true,
        ModuleKind::Ideal(gens) => gens.iter().any(|g| g.iter().zip(m).all(|(a, b)| a <= b)),
    }
}

pub fn build_truncation(n: usize, kind: ModuleKind, cap: u32) -> Result<FockTruncation> {
    if n == 0 {
        return Err(Error::validation("at least one generator z_i is required"));
    }
    if let ModuleKind::Ideal(gens) = &kind {
        if gens.is_empty() {
            return Err(Error::validation("a monomial ideal needs at least one generator"));
        }
        if let Some(g) = gens.iter().find(|g| g.len() != n) {
            return Err(Error::validation(format!(
                "ideal generator {g:?} has {} exponents, expected {n}",
                g.len()
            )));
        }
        let top = gens.iter().map(|g| degree(g)).max().unwrap_or(0);
        if cap < top {
            return Err(Error::validation(format!(
                "degree cap {cap} is below the generator degree {top}"
            )));
        }
    }
    let mut all = Vec::new();
    let mut e = vec![0u32; n];
    let bound = vec![cap; n];
    loop {
        if degree(&e) <= cap && in_module(&kind, &e) {
            all.push(e.clone());
        }
        if !next_index(&mut e, &bound) {
            break;
        }
    }
    if all.is_empty() {
        return Err(Error::validation("the module is empty up to the degree cap"));
    }
    all.sort_by(|a, b| degree(a).cmp(&degree(b)).then_with(|| b.cmp(a)));
    let index: HashMap<MultiIndex, usize> = all.iter().cloned().enumerate().map(|(i, m)| (m, i)).collect();
    let shifted = |m: &MultiIndex, i: usize, up: bool| -> Option<usize> {
        let mut m2 = m.clone();
        if up {
            m2[i] += 1;
        } else {
            m2[i] = m2[i].checked_sub(1)?;
        }
        index.get(&m2).copied()
    };
    let up = all.iter().map(|m| (0..n).map(|i| shifted(m, i, true)).collect()).collect();
    let down = all.iter().map(|m| (0..n).map(|i| shifted(m, i, false)).collect()).collect();
    Ok(FockTruncation {
        n,
        kind,
        cap,
        basis: all,
        index,
        up,
        down,
    })
}
