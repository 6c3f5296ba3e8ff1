//! Solver-agnostic description of a conic program.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::ConvexError;
use crate::channel::CMatrix;

/// Index of a scalar decision variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

/// Affine expression `sum_i c_i x_i + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn var(v: VarId) -> Self {
        Self {
            terms: vec![(v, 1.0)],
            constant: 0.0,
        }
    }

    pub fn constant(c: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn term(v: VarId, coeff: f64) -> Self {
        Self {
            terms: vec![(v, coeff)],
            constant: 0.0,
        }
    }

    pub fn add_term(&mut self, v: VarId, coeff: f64) -> &mut Self {
        if coeff != 0.0 {
            self.terms.push((v, coeff));
        }
        self
    }

    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|&(_, c)| c == 0.0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .fold(self.constant, |acc, &(v, c)| acc + c * x[v.0])
    }

    /// Merges repeated variables and drops zero coefficients.
    pub fn compact(&self) -> Self {
        let mut terms = self.terms.clone();
        terms.sort_by_key(|t| t.0);
        let mut out: Vec<(VarId, f64)> = Vec::with_capacity(terms.len());
        for (v, c) in terms {
            match out.last_mut() {
                Some(last) if last.0 == v => last.1 += c,
                _ => out.push((v, c)),
            }
        }
        out.retain(|t| t.1 != 0.0);
        Self {
            terms: out,
            constant: self.constant,
        }
    }
}

impl From<VarId> for LinExpr {
    fn from(v: VarId) -> Self {
        LinExpr::var(v)
    }
}

impl From<f64> for LinExpr {
    fn from(c: f64) -> Self {
        LinExpr::constant(c)
    }
}

impl Add for LinExpr {
    type Output = LinExpr;
    fn add(mut self, rhs: LinExpr) -> LinExpr {
        self.terms.extend(rhs.terms);
        self.constant += rhs.constant;
        self
    }
}

impl Sub for LinExpr {
    type Output = LinExpr;
    fn sub(self, rhs: LinExpr) -> LinExpr {
        self + (-rhs)
    }
}

impl Neg for LinExpr {
    type Output = LinExpr;
    fn neg(self) -> LinExpr {
        self * -1.0
    }
}

impl Mul<f64> for LinExpr {
    type Output = LinExpr;
    fn mul(mut self, rhs: f64) -> LinExpr {
        for t in &mut self.terms {
            t.1 *= rhs;
        }
        self.constant *= rhs;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Free,
    Nonneg,
}

/// One constraint family member.
#[derive(Debug, Clone, PartialEq)]
pub enum Constraint {
    /// `expr == 0`.
    Eq(LinExpr),
    /// `expr <= 0`.
    Le(LinExpr),
    /// `lo <= x <= hi`; either side may be infinite.
    Bound { var: VarId, lo: f64, hi: f64 },
    /// `(x, y, z)` with `y exp(x / y) <= z`, `y > 0`.
    Exp([LinExpr; 3]),
    /// `(x, y, z)` with `x^alpha y^(1 - alpha) >= |z|`, `x, y >= 0`.
    Pow { alpha: f64, args: [LinExpr; 3] },
    /// Real symmetric `dim x dim` matrix given by its upper triangle,
    /// column-major, off-diagonal entries scaled by `sqrt(2)`, is PSD.
    Psd { dim: usize, svec: Vec<LinExpr> },
}

/// Handle to a constraint inside its program.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConstraintId(pub usize);

/// Hermitian matrix variable stored as real diagonal, real upper and
/// imaginary upper parts. Its PSD membership is imposed through the real
/// embedding `[Re -Im; Im Re]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianBlock {
    pub m: usize,
    pub diag: Vec<VarId>,
    /// Upper-triangle real parts, indexed by [`HermitianBlock::upper_index`].
    pub re: Vec<VarId>,
    pub im: Vec<VarId>,
}

impl HermitianBlock {
    /// Position of `(i, j)`, `i < j`, in the packed upper triangle.
    pub fn upper_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j);
        j * (j - 1) / 2 + i
    }

    /// `(Re S_ij, Im S_ij)` as expressions.
    pub fn entry(&self, i: usize, j: usize) -> (LinExpr, LinExpr) {
        if i == j {
            (LinExpr::var(self.diag[i]), LinExpr::default())
        } else if i < j {
            let p = self.upper_index(i, j);
            (LinExpr::var(self.re[p]), LinExpr::var(self.im[p]))
        } else {
            let p = self.upper_index(j, i);
            (LinExpr::var(self.re[p]), LinExpr::term(self.im[p], -1.0))
        }
    }

    /// `tr(C S)` for Hermitian `C`.
    pub fn inner(&self, c: &CMatrix) -> LinExpr {
        let mut e = LinExpr::default();
        for i in 0..self.m {
            e.add_term(self.diag[i], c[(i, i)].re);
            for j in (i + 1)..self.m {
                let p = self.upper_index(i, j);
                e.add_term(self.re[p], 2.0 * c[(i, j)].re);
                e.add_term(self.im[p], 2.0 * c[(i, j)].im);
            }
        }
        e
    }

    pub fn trace(&self) -> LinExpr {
        let mut e = LinExpr::default();
        for &d in &self.diag {
            e.add_term(d, 1.0);
        }
        e
    }

    /// Entry `(p, q)` of the `2m x 2m` real embedding.
    fn embedded(&self, p: usize, q: usize) -> LinExpr {
        let m = self.m;
        match (p < m, q < m) {
            (true, true) => self.entry(p, q).0,
            (false, false) => self.entry(p - m, q - m).0,
            (false, true) => self.entry(p - m, q).1,
            (true, false) => -self.entry(p, q - m).1,
        }
    }

    fn embedding_svec(&self) -> Vec<LinExpr> {
        let dim = 2 * self.m;
        let mut out = Vec::with_capacity(dim * (dim + 1) / 2);
        for j in 0..dim {
            for i in 0..=j {
                let e = self.embedded(i, j);
                out.push(if i == j { e } else { e * std::f64::consts::SQRT_2 });
            }
        }
        out
    }

    /// Reads the matrix back from a primal vector.
    pub fn value(&self, x: &[f64]) -> CMatrix {
        DMatrix::from_fn(self.m, self.m, |i, j| {
            let (re, im) = self.entry(i, j);
            Complex64::new(re.eval(x), im.eval(x))
        })
    }
}

/// Linear objective plus a list of cone constraints over scalar variables.
#[derive(Debug, Clone, Default)]
pub struct ConicProgram {
    kinds: Vec<VarKind>,
    names: Vec<String>,
    objective: LinExpr,
    constraints: Vec<Constraint>,
}

impl ConicProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, kind: VarKind) -> VarId {
        self.kinds.push(kind);
        self.names.push(name.into());
        VarId(self.kinds.len() - 1)
    }

    pub fn free(&mut self, name: impl Into<String>) -> VarId {
        self.add_var(name, VarKind::Free)
    }

    pub fn nonneg(&mut self, name: impl Into<String>) -> VarId {
        self.add_var(name, VarKind::Nonneg)
    }

    pub fn num_vars(&self) -> usize {
        self.kinds.len()
    }

    pub fn kind(&self, v: VarId) -> VarKind {
        self.kinds[v.0]
    }

    pub fn name(&self, v: VarId) -> &str {
        &self.names[v.0]
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn objective(&self) -> &LinExpr {
        &self.objective
    }

    pub fn minimize(&mut self, objective: LinExpr) {
        self.objective = objective;
    }

    pub fn add(&mut self, c: Constraint) -> ConstraintId {
        self.constraints.push(c);
        ConstraintId(self.constraints.len() - 1)
    }

    pub fn add_eq(&mut self, lhs: LinExpr, rhs: LinExpr) -> ConstraintId {
        self.add(Constraint::Eq(lhs - rhs))
    }

    /// `lhs <= rhs`.
    pub fn add_le(&mut self, lhs: LinExpr, rhs: LinExpr) -> ConstraintId {
        self.add(Constraint::Le(lhs - rhs))
    }

    pub fn add_bound(&mut self, var: VarId, lo: f64, hi: f64) -> ConstraintId {
        self.add(Constraint::Bound { var, lo, hi })
    }

    pub fn add_exp_cone(&mut self, x: LinExpr, y: LinExpr, z: LinExpr) -> ConstraintId {
        self.add(Constraint::Exp([x, y, z]))
    }

    pub fn add_pow_cone(&mut self, alpha: f64, x: LinExpr, y: LinExpr, z: LinExpr) -> ConstraintId {
        self.add(Constraint::Pow {
            alpha,
            args: [x, y, z],
        })
    }

    /// Declares an `m x m` Hermitian PSD matrix variable.
    pub fn add_hermitian_psd(&mut self, m: usize, name: &str) -> HermitianBlock {
        let diag = (0..m).map(|i| self.free(format!("{name}[{i},{i}]"))).collect();
        let mut re = Vec::new();
        let mut im = Vec::new();
        for j in 1..m {
            for i in 0..j {
                re.push(self.free(format!("re {name}[{i},{j}]")));
                im.push(self.free(format!("im {name}[{i},{j}]")));
            }
        }
        let block = HermitianBlock { m, diag, re, im };
        let svec = block.embedding_svec();
        self.add(Constraint::Psd { dim: 2 * m, svec });
        block
    }

    /// Checks that every constraint refers to declared variables and has
    /// consistent dimensions.
    pub fn validate(&self) -> Result<(), ConvexError> {
        let n = self.num_vars();
        let check = |e: &LinExpr| -> Result<(), ConvexError> {
            match e.terms.iter().find(|t| t.0 .0 >= n) {
                Some(t) => Err(ConvexError::UnknownVariable(t.0 .0)),
                None => Ok(()),
            }
        };
        check(&self.objective)?;
        for c in &self.constraints {
            match c {
                Constraint::Eq(e) | Constraint::Le(e) => check(e)?,
                Constraint::Bound { var, lo, hi } => {
                    if var.0 >= n {
                        return Err(ConvexError::UnknownVariable(var.0));
                    }
                    if lo > hi || lo.is_nan() || hi.is_nan() {
                        return Err(ConvexError::Malformed(format!(
                            "empty bound [{lo}, {hi}] on {}",
                            self.names[var.0]
                        )));
                    }
                }
                Constraint::Exp(args) => args.iter().try_for_each(check)?,
                Constraint::Pow { alpha, args } => {
                    if !(*alpha > 0.0 && *alpha < 1.0) {
                        return Err(ConvexError::Malformed(format!(
                            "power cone exponent {alpha} outside (0, 1)"
                        )));
                    }
                    args.iter().try_for_each(check)?;
                }
                Constraint::Psd { dim, svec } => {
                    if svec.len() != dim * (dim + 1) / 2 {
                        return Err(ConvexError::Malformed(format!(
                            "PSD block of dimension {dim} has {} entries",
                            svec.len()
                        )));
                    }
                    svec.iter().try_for_each(check)?;
                }
            }
        }
        Ok(())
    }
}
