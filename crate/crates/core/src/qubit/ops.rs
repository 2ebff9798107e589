//! Operators on transmon{g,e,f} ⊗ cavity Fock{0..N_F−1} and their
//! column-stacked superoperators.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

pub const QUBIT_LEVELS: usize = 3;

/// Row-major index of `|q, n>` in the joint basis.
pub fn index(q: usize, n: usize, n_fock: usize) -> usize {
    q * n_fock + n
}

pub fn identity(n: usize) -> DMatrix<C64> {
    DMatrix::identity(n, n)
}

/// Transmon lowering operator b = |g><e| + √2 |e><f|.
pub fn transmon_lowering() -> DMatrix<C64> {
    let mut b = DMatrix::zeros(QUBIT_LEVELS, QUBIT_LEVELS);
    b[(0, 1)] = C64::new(1.0, 0.0);
    b[(1, 2)] = C64::new(2f64.sqrt(), 0.0);
    b
}

/// Truncated bosonic annihilation operator.
pub fn annihilation(n_fock: usize) -> DMatrix<C64> {
    let mut a = DMatrix::zeros(n_fock, n_fock);
    for n in 1..n_fock {
        a[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    a
}

pub fn dagger(m: &DMatrix<C64>) -> DMatrix<C64> {
    m.adjoint()
}

/// Joint-space operators used by the master equation.
#[derive(Debug, Clone)]
pub struct JointOperators {
    pub n_fock: usize,
    /// b ⊗ 1
    pub b: DMatrix<C64>,
    /// 1 ⊗ a
    pub a: DMatrix<C64>,
    /// |g,0><e,1| + |e,1><g,0|
    pub bsb: DMatrix<C64>,
}

impl JointOperators {
    pub fn new(n_fock: usize) -> Self {
        let b = transmon_lowering().kronecker(&identity(n_fock));
        let a = identity(QUBIT_LEVELS).kronecker(&annihilation(n_fock));
        let dim = QUBIT_LEVELS * n_fock;
        let mut bsb = DMatrix::zeros(dim, dim);
        let g0 = index(0, 0, n_fock);
        let e1 = index(1, 1, n_fock);
        bsb[(g0, e1)] = C64::new(1.0, 0.0);
        bsb[(e1, g0)] = C64::new(1.0, 0.0);
        JointOperators { n_fock, b, a, bsb }
    }

    pub fn dim(&self) -> usize {
        QUBIT_LEVELS * self.n_fock
    }
}

/// vec(−i[H, ρ]) for column stacking: −i (1⊗H − Hᵀ⊗1).
pub fn commutator_super(h: &DMatrix<C64>) -> DMatrix<C64> {
    let id = identity(h.nrows());
    let minus_i = C64::new(0.0, -1.0);
    (id.kronecker(h) - h.transpose().kronecker(&id)) * minus_i
}

/// vec(D[L]ρ) = (L* ⊗ L − ½ 1⊗L†L − ½ (L†L)ᵀ⊗1) vec ρ.
pub fn dissipator_super(l: &DMatrix<C64>) -> DMatrix<C64> {
    let id = identity(l.nrows());
    let ldl = l.adjoint() * l;
    let half = C64::new(0.5, 0.0);
    l.conjugate().kronecker(l) - id.kronecker(&ldl) * half - ldl.transpose().kronecker(&id) * half
}

/// Explicit D[L]ρ, used to cross-check the superoperator.
pub fn dissipator_apply(l: &DMatrix<C64>, rho: &DMatrix<C64>) -> DMatrix<C64> {
    let ld = l.adjoint();
    let ldl = &ld * l;
    l * rho * &ld - (&ldl * rho + rho * &ldl) * C64::new(0.5, 0.0)
}

/// Compressed sparse rows; the Liouvillian has a few hundred nonzeros out of
/// (3 N_F)⁴ entries.
#[derive(Debug, Clone)]
pub struct Csr {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<C64>,
}

impl Csr {
    pub fn from_dense(m: &DMatrix<C64>) -> Self {
        let n = m.nrows();
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for r in 0..n {
            for c in 0..m.ncols() {
                let v = m[(r, c)];
                if v != C64::new(0.0, 0.0) {
                    indices.push(c);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Csr { n, indptr, indices, values }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// y += scale · A x
    pub fn mul_add(&self, scale: f64, x: &[C64], y: &mut [C64]) {
        debug_assert_eq!(x.len(), self.n);
        for (r, yr) in y.iter_mut().enumerate().take(self.n) {
            let mut acc = C64::new(0.0, 0.0);
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.values[k] * x[self.indices[k]];
            }
            *yr += acc * scale;
        }
    }
}

/// Column-stack a square matrix.
pub fn vectorize(m: &DMatrix<C64>) -> Vec<C64> {
    m.as_slice().to_vec()
}

pub fn unvectorize(v: &[C64], dim: usize) -> DMatrix<C64> {
    DMatrix::from_column_slice(dim, dim, v)
}
