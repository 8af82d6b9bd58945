//! Pointwise algebra of the mixture cross-diffusion matrix.
//!
//! For concentrations `c` and binary coefficients `delta`, the matrix is
//!
//! ```text
//! A(c)[i][j] = c_i c_j / delta_ij          (i != j)
//! A(c)[i][i] = -sum_{k != i} c_i c_k / delta_ik
//! ```
//!
//! Its rows sum to zero, so the ones vector spans the kernel for strictly
//! positive `c`. Everything downstream (velocity solves, decay estimates)
//! rests on the quantified nonpositivity of this matrix on the orthogonal
//! complement of the ones vector, so the checks in this module are exposed
//! as library calls rather than test-only helpers.

use nalgebra::{DMatrix, DVector};

use crate::error::{CoreError, Result};
use crate::scalar::Real;

/// Symmetric table of binary diffusion coefficients.
///
/// Off-diagonal entries are strictly positive; diagonal entries are unused
/// and stored as zero.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionTable<T: Real> {
    n: usize,
    delta: DMatrix<T>,
}

impl<T: Real> DiffusionTable<T> {
    /// Builds a table from a full `n x n` matrix in row-major order.
    pub fn new(n: usize, entries: &[T]) -> Result<Self> {
        if n < 2 {
            return Err(CoreError::InvalidDiffusionTable {
                reason: format!("need at least 2 species, got {n}"),
            });
        }
        if entries.len() != n * n {
            return Err(CoreError::DimensionMismatch {
                context: "diffusion table entries",
                expected: n * n,
                got: entries.len(),
            });
        }
        let mut delta = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let v = entries[i * n + j];
                if i == j {
                    if v != T::zero() {
                        return Err(CoreError::InvalidDiffusionTable {
                            reason: format!("diagonal entry ({i},{i}) must be 0, got {v}"),
                        });
                    }
                } else {
                    if !(v > T::zero()) {
                        return Err(CoreError::InvalidDiffusionTable {
                            reason: format!("entry ({i},{j}) must be positive, got {v}"),
                        });
                    }
                    if v != entries[j * n + i] {
                        return Err(CoreError::InvalidDiffusionTable {
                            reason: format!("entries ({i},{j}) and ({j},{i}) differ"),
                        });
                    }
                }
                delta[(i, j)] = v;
            }
        }
        Ok(Self { n, delta })
    }

    /// Convenience constructor from the strict upper triangle
    /// `[(i,j,delta_ij)]`; symmetry is filled in.
    pub fn from_pairs(n: usize, pairs: &[(usize, usize, T)]) -> Result<Self> {
        let mut entries = vec![T::zero(); n * n];
        for &(i, j, v) in pairs {
            entries[i * n + j] = v;
            entries[j * n + i] = v;
        }
        Self::new(n, &entries)
    }

    /// All off-diagonal coefficients equal to `delta`.
    pub fn uniform(n: usize, delta: T) -> Result<Self> {
        let mut entries = vec![delta; n * n];
        for i in 0..n {
            entries[i * n + i] = T::zero();
        }
        Self::new(n, &entries)
    }

    pub fn n_species(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.delta[(i, j)]
    }

    /// Largest off-diagonal coefficient.
    pub fn max_delta(&self) -> T {
        let mut m = self.delta[(0, 1)];
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j && self.delta[(i, j)] > m {
                    m = self.delta[(i, j)];
                }
            }
        }
        m
    }

    /// Smallest off-diagonal coefficient.
    pub fn min_delta(&self) -> T {
        let mut m = self.delta[(0, 1)];
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j && self.delta[(i, j)] < m {
                    m = self.delta[(i, j)];
                }
            }
        }
        m
    }
}

/// The assembled cross-diffusion matrix at one spatial point.
#[derive(Debug, Clone, PartialEq)]
pub struct MsMatrix<T: Real> {
    entries: DMatrix<T>,
}

impl<T: Real> MsMatrix<T> {
    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<T> {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.entries[(i, j)]
    }

    /// Matrix-vector product `A x`.
    pub fn apply(&self, x: &[T]) -> Result<Vec<T>> {
        let n = self.n();
        if x.len() != n {
            return Err(CoreError::DimensionMismatch {
                context: "matrix-vector product",
                expected: n,
                got: x.len(),
            });
        }
        let mut out = vec![T::zero(); n];
        for i in 0..n {
            let mut acc = T::zero();
            for j in 0..n {
                acc += self.entries[(i, j)] * x[j];
            }
            out[i] = acc;
        }
        Ok(out)
    }

    pub fn frobenius_norm(&self) -> T {
        let mut acc = T::zero();
        for v in self.entries.iter() {
            acc += *v * *v;
        }
        acc.sqrt()
    }
}

/// Constants quantifying the spectral gap and operator bound of `A(c)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapConstants<T: Real> {
    /// `1 / max_{i != j} delta_ij`.
    pub lambda_a: T,
    /// `2 * norm_equiv_c / min_{i != j} delta_ij`.
    pub mu_a: T,
    /// Norm-equivalence constant between the Euclidean and supremum norms;
    /// the tight value `sqrt(N)` is used.
    pub norm_equiv_c: T,
}

/// Outcome of a two-sided inequality check.
#[derive(Debug, Clone, Copy)]
pub struct BoundCheck<T: Real> {
    pub lhs: T,
    pub rhs: T,
    pub holds: bool,
}

fn check_dims<T: Real>(c: &[T], d: &DiffusionTable<T>) -> Result<()> {
    if c.len() != d.n_species() {
        return Err(CoreError::DimensionMismatch {
            context: "concentration vector vs diffusion table",
            expected: d.n_species(),
            got: c.len(),
        });
    }
    Ok(())
}

/// True when every entry is nonnegative.
pub fn is_physical<T: Real>(c: &[T]) -> bool {
    c.iter().all(|&v| v >= T::zero())
}

/// True when every entry is strictly positive.
pub fn is_strictly_positive<T: Real>(c: &[T]) -> bool {
    c.iter().all(|&v| v > T::zero())
}

/// Assembles `A(c)`.
///
/// Each off-diagonal pair is computed once and written to both `(i,j)` and
/// `(j,i)`, so the output is symmetric entrywise exactly. The diagonal is
/// the negated sum of the computed off-diagonals, which makes `A 1 = 0`
/// hold to rounding regardless of accumulation order.
pub fn build_ms_matrix<T: Real>(c: &[T], d: &DiffusionTable<T>) -> Result<MsMatrix<T>> {
    check_dims(c, d)?;
    let n = d.n_species();
    let mut entries = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = c[i] * c[j] / d.get(i, j);
            entries[(i, j)] = v;
            entries[(j, i)] = v;
        }
    }
    for i in 0..n {
        let mut row_sum = T::zero();
        for j in 0..n {
            if j != i {
                row_sum += entries[(i, j)];
            }
        }
        entries[(i, i)] = -row_sum;
    }
    Ok(MsMatrix { entries })
}

/// Quadratic form `<x, A x>`.
pub fn quadratic_form<T: Real>(a: &MsMatrix<T>, x: &[T]) -> Result<T> {
    let ax = a.apply(x)?;
    let mut acc = T::zero();
    for i in 0..x.len() {
        acc += x[i] * ax[i];
    }
    Ok(acc)
}

/// The pair-sum expression `-1/2 sum_ij (c_i c_j / delta_ij) (x_i - x_j)^2`,
/// an algebraically independent route to the quadratic form.
pub fn pair_sum_form<T: Real>(c: &[T], d: &DiffusionTable<T>, x: &[T]) -> Result<T> {
    check_dims(c, d)?;
    if x.len() != c.len() {
        return Err(CoreError::DimensionMismatch {
            context: "pair-sum form vector",
            expected: c.len(),
            got: x.len(),
        });
    }
    let n = c.len();
    let mut acc = T::zero();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let diff = x[i] - x[j];
                acc += c[i] * c[j] / d.get(i, j) * diff * diff;
            }
        }
    }
    Ok(-acc / T::from_f64_lossy(2.0))
}

/// Spectral-gap and operator-bound constants for a diffusion table.
pub fn gap_constants<T: Real>(d: &DiffusionTable<T>) -> GapConstants<T> {
    let norm_equiv_c = T::from_usize_lossy(d.n_species()).sqrt();
    GapConstants {
        lambda_a: T::one() / d.max_delta(),
        mu_a: T::from_f64_lossy(2.0) * norm_equiv_c / d.min_delta(),
        norm_equiv_c,
    }
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let mut acc = T::zero();
    for i in 0..a.len() {
        acc += a[i] * b[i];
    }
    acc
}

fn norm2<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

fn sum<T: Real>(a: &[T]) -> T {
    let mut acc = T::zero();
    for &v in a {
        acc += v;
    }
    acc
}

fn min_entry<T: Real>(a: &[T]) -> T {
    let mut m = a[0];
    for &v in &a[1..] {
        if v < m {
            m = v;
        }
    }
    m
}

/// Checks `<x, A(c) x> <= -lambda_a (min c)^2 [ |x|^2 - <x,1>^2 ]`.
///
/// The bracket is negative for vectors with a large ones-component, which
/// makes the inequality vacuous there; the meaningful regime is `x` with
/// `<x,1> = 0`, where the right-hand side is a genuine gap.
pub fn check_spectral_gap<T: Real>(
    c: &[T],
    d: &DiffusionTable<T>,
    x: &[T],
) -> Result<BoundCheck<T>> {
    let a = build_ms_matrix(c, d)?;
    let lhs = quadratic_form(&a, x)?;
    let gc = gap_constants(d);
    let min_c = min_entry(c);
    let ones_overlap = sum(x);
    let bracket = dot(x, x) - ones_overlap * ones_overlap;
    let rhs = -gc.lambda_a * min_c * min_c * bracket;
    let slack = T::from_f64_lossy(1e-12);
    Ok(BoundCheck {
        lhs,
        rhs,
        holds: lhs <= rhs + slack,
    })
}

/// Checks the operator bound `|A(c) x| <= mu_a <c,1>^2 |x|`.
pub fn check_operator_bound<T: Real>(
    c: &[T],
    d: &DiffusionTable<T>,
    x: &[T],
) -> Result<BoundCheck<T>> {
    let a = build_ms_matrix(c, d)?;
    let lhs = norm2(&a.apply(x)?);
    let gc = gap_constants(d);
    let total = sum(c);
    let rhs = gc.mu_a * total * total * norm2(x);
    let slack = T::from_f64_lossy(1e-12);
    Ok(BoundCheck {
        lhs,
        rhs,
        holds: lhs <= rhs + slack,
    })
}

/// Orthogonal projection onto the complement of the ones vector:
/// `x - (<x,1>/n) 1`.
pub fn project_orth_ones<T: Real>(x: &[T]) -> Vec<T> {
    let mean = sum(x) / T::from_usize_lossy(x.len());
    x.iter().map(|&v| v - mean).collect()
}

/// Solves `A x = rhs` under the constraint `<x,1> = 0`.
///
/// The kernel of `A` is spanned by the ones vector when the underlying
/// concentrations are strictly positive, so the constrained system has a
/// unique solution for `rhs` orthogonal to ones. Following the stacked
/// least-squares formulation, the `(n+1) x n` system `[A; 1^T] x = [rhs; 0]`
/// is solved by dense QR.
///
/// Errors with [`CoreError::RhsNotOrthogonal`] when `|<rhs,1>| > tol * |rhs|`
/// and with [`CoreError::SingularBeyondKernel`] when a row of `A` vanishes
/// identically (a zero concentration).
pub fn pseudo_solve<T: Real>(a: &MsMatrix<T>, rhs: &[T], tol: T) -> Result<Vec<T>> {
    let n = a.n();
    if rhs.len() != n {
        return Err(CoreError::DimensionMismatch {
            context: "pseudo solve rhs",
            expected: n,
            got: rhs.len(),
        });
    }
    for i in 0..n {
        if a.entries[(i, i)] == T::zero() {
            return Err(CoreError::SingularBeyondKernel { row: i });
        }
    }
    let rhs_norm = norm2(rhs);
    let overlap = sum(rhs).abs();
    if overlap > tol * rhs_norm {
        return Err(CoreError::RhsNotOrthogonal {
            overlap: overlap.to_subset().unwrap_or(f64::NAN),
            tol: (tol * rhs_norm).to_subset().unwrap_or(f64::NAN),
        });
    }
    let stacked = stack_with_ones_row(a);
    let qr = stacked.qr();
    let mut b = DVector::zeros(n + 1);
    for i in 0..n {
        b[i] = rhs[i];
    }
    Ok(solve_stacked_qr(&qr, &mut b, n))
}

pub(crate) fn stack_with_ones_row<T: Real>(a: &MsMatrix<T>) -> DMatrix<T> {
    let n = a.n();
    let mut stacked = DMatrix::zeros(n + 1, n);
    for i in 0..n {
        for j in 0..n {
            stacked[(i, j)] = a.entries[(i, j)];
        }
    }
    for j in 0..n {
        stacked[(n, j)] = T::one();
    }
    stacked
}

pub(crate) fn solve_stacked_qr<T: Real>(
    qr: &nalgebra::linalg::QR<T, nalgebra::Dyn, nalgebra::Dyn>,
    b: &mut DVector<T>,
    n: usize,
) -> Vec<T> {
    qr.q_tr_mul(b);
    let r = qr.r();
    // Back-substitution on the upper-triangular n x n block.
    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        let mut acc = b[i];
        for j in (i + 1)..n {
            acc -= r[(i, j)] * x[j];
        }
        x[i] = acc / r[(i, i)];
    }
    x
}

/// Checks the pseudoinverse norm bound
/// `|A^{-1} rhs| <= |rhs| / (lambda_a (min c)^2)` for `rhs` orthogonal to ones.
pub fn check_pinv_norm_bound<T: Real>(
    c: &[T],
    d: &DiffusionTable<T>,
    rhs: &[T],
) -> Result<BoundCheck<T>> {
    let a = build_ms_matrix(c, d)?;
    let x = pseudo_solve(&a, rhs, T::from_f64_lossy(1e-10))?;
    let gc = gap_constants(d);
    let min_c = min_entry(c);
    let lhs = norm2(&x);
    let rhs_bound = norm2(rhs) / (gc.lambda_a * min_c * min_c);
    let slack = T::from_f64_lossy(1e-12) * (T::one() + rhs_bound.abs());
    Ok(BoundCheck {
        lhs,
        rhs: rhs_bound,
        holds: lhs <= rhs_bound + slack,
    })
}

/// Checks the pseudoinverse coercivity bound
/// `<A^{-1} rhs, rhs> <= -(lambda_a (min c)^2 / (mu_a^2 <c,1>^4)) |rhs|^2`.
pub fn check_pinv_coercivity<T: Real>(
    c: &[T],
    d: &DiffusionTable<T>,
    rhs: &[T],
) -> Result<BoundCheck<T>> {
    let a = build_ms_matrix(c, d)?;
    let x = pseudo_solve(&a, rhs, T::from_f64_lossy(1e-10))?;
    let gc = gap_constants(d);
    let min_c = min_entry(c);
    let total = sum(c);
    let lhs = dot(&x, rhs);
    let total4 = total * total * total * total;
    let rhs_norm_sq = dot(rhs, rhs);
    let rhs_bound = -(gc.lambda_a * min_c * min_c) / (gc.mu_a * gc.mu_a * total4) * rhs_norm_sq;
    let slack = T::from_f64_lossy(1e-12) * (T::one() + rhs_bound.abs());
    Ok(BoundCheck {
        lhs,
        rhs: rhs_bound,
        holds: lhs <= rhs_bound + slack,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn table3() -> DiffusionTable<f64> {
        DiffusionTable::from_pairs(3, &[(0, 1, 1.0), (0, 2, 2.0), (1, 2, 3.0)]).unwrap()
    }

    /// Independent double-loop evaluation of the matrix definition,
    /// with the diagonal taken from the closed formula.
    fn brute_force_matrix(c: &[f64], d: &DiffusionTable<f64>) -> Vec<Vec<f64>> {
        let n = c.len();
        let mut m = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    m[i][j] = c[i] * c[j] / d.get(i, j);
                } else {
                    let mut s = 0.0;
                    for k in 0..n {
                        if k != i {
                            s += c[i] * c[k] / d.get(i, k);
                        }
                    }
                    m[i][i] = -s;
                }
            }
        }
        m
    }

    #[test]
    fn two_species_unit_case() {
        let d = DiffusionTable::uniform(2, 1.0).unwrap();
        let a = build_ms_matrix(&[1.0, 1.0], &d).unwrap();
        let expected = [[-1.0, 1.0], [1.0, -1.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(a.get(i, j), expected[i][j]);
            }
        }
    }

    #[test]
    fn zero_concentration_annihilates_row_and_column() {
        let d = DiffusionTable::uniform(2, 2.0).unwrap();
        let a = build_ms_matrix(&[0.0, 5.0], &d).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(a.get(i, j), 0.0);
            }
        }
    }

    #[test]
    fn three_species_matches_brute_force() {
        let d = table3();
        let c = [1.0, 2.0, 3.0];
        let a = build_ms_matrix(&c, &d).unwrap();
        assert_eq!(a.get(0, 0), -3.5);
        assert_eq!(a.get(0, 1), 2.0);
        assert_eq!(a.get(0, 2), 1.5);
        let oracle = brute_force_matrix(&c, &d);
        for i in 0..3 {
            for j in 0..3 {
                assert!((a.get(i, j) - oracle[i][j]).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let d = table3();
        assert!(matches!(
            build_ms_matrix(&[1.0, 2.0], &d),
            Err(CoreError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn quadratic_form_two_species() {
        let d = DiffusionTable::uniform(2, 1.0).unwrap();
        let a = build_ms_matrix(&[1.0, 1.0], &d).unwrap();
        assert_eq!(quadratic_form(&a, &[1.0, -1.0]).unwrap(), -4.0);
        // Cross-check against the hand-evaluated pair-sum: -1/2 * 2 * 1 * 4.
        assert_eq!(pair_sum_form(&[1.0, 1.0], &d, &[1.0, -1.0]).unwrap(), -4.0);
    }

    #[test]
    fn quadratic_form_vanishes_on_constants() {
        let d = table3();
        let a = build_ms_matrix(&[0.3, 1.7, 2.9], &d).unwrap();
        let q = quadratic_form(&a, &[1.0, 1.0, 1.0]).unwrap();
        assert!(q.abs() <= 1e-14);
    }

    #[test]
    fn quadratic_form_matches_pair_sum_three_species() {
        let d = table3();
        let c = [1.0, 2.0, 3.0];
        let x = [1.0, 0.0, -1.0];
        let a = build_ms_matrix(&c, &d).unwrap();
        let qf = quadratic_form(&a, &x).unwrap();
        let ps = pair_sum_form(&c, &d, &x).unwrap();
        // Hand evaluation: pairs (0,1): 2*1, (0,2): 1.5*4, (1,2): 2*1,
        // doubled for ordered pairs and halved by the formula -> -10.
        assert!((qf - -10.0).abs() <= 1e-12);
        assert!((qf - ps).abs() <= 1e-12 * (1.0 + qf.abs()));
    }

    #[test]
    fn gap_constants_examples() {
        let d2 = DiffusionTable::uniform(2, 2.0).unwrap();
        assert_eq!(gap_constants(&d2).lambda_a, 0.5);
        let d1 = DiffusionTable::uniform(2, 1.0).unwrap();
        assert!((gap_constants(&d1).mu_a - 2.0 * 2.0_f64.sqrt()).abs() <= 1e-15);
        let d3 = DiffusionTable::uniform(3, 1.0).unwrap();
        let gc = gap_constants(&d3);
        assert_eq!(gc.lambda_a, 1.0);
        assert!((gc.mu_a - 2.0 * 3.0_f64.sqrt()).abs() <= 1e-15);
    }

    #[test]
    fn spectral_gap_two_species() {
        let d = DiffusionTable::uniform(2, 1.0).unwrap();
        let chk = check_spectral_gap(&[1.0, 1.0], &d, &[1.0, -1.0]).unwrap();
        assert_eq!(chk.lhs, -4.0);
        assert_eq!(chk.rhs, -2.0);
        assert!(chk.holds);
    }

    #[test]
    fn spectral_gap_kernel_direction_is_vacuous() {
        // For x = 1 the bracket |x: &[f64]|^2 - <x,1>^2 = n - n^2 is negative, so
        // the bound is trivially true; meaningful tests use x with <x,1> = 0.
        let d = table3();
        let chk = check_spectral_gap(&[1.0, 2.0, 3.0], &d, &[1.0, 1.0, 1.0]).unwrap();
        assert!(chk.lhs.abs() <= 1e-14);
        assert!(chk.rhs >= 0.0);
        assert!(chk.holds);
    }

    #[test]
    fn operator_bound_examples() {
        let d = DiffusionTable::uniform(2, 1.0).unwrap();
        let chk = check_operator_bound(&[1.0, 1.0], &d, &[1.0, -1.0]).unwrap();
        assert!((chk.lhs - 2.0 * 2.0_f64.sqrt()).abs() <= 1e-14);
        // mu_a <c,1>^2 |x| = (2 sqrt(2)) * 4 * sqrt(2) = 16.
        assert!((chk.rhs - 16.0).abs() <= 1e-12);
        assert!(chk.holds);

        let zero = check_operator_bound(&[1.0, 1.0], &d, &[0.0, 0.0]).unwrap();
        assert_eq!(zero.lhs, 0.0);
        assert!(zero.holds);
    }

    #[test]
    fn randomized_gap_and_bound_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let n = rng.gen_range(2..=5);
            let mut pairs = Vec::new();
            for i in 0..n {
                for j in (i + 1)..n {
                    pairs.push((i, j, rng.gen_range(0.5..2.0)));
                }
            }
            let d = DiffusionTable::from_pairs(n, &pairs).unwrap();
            let c: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..10.0)).collect();
            let x_raw: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let x = project_orth_ones(&x_raw);
            assert!(check_spectral_gap(&c, &d, &x).unwrap().holds);
            assert!(check_operator_bound(&c, &d, &x).unwrap().holds);
        }
    }

    #[test]
    fn pseudo_solve_two_species() {
        let d = DiffusionTable::uniform(2, 1.0).unwrap();
        let a = build_ms_matrix(&[1.0, 1.0], &d).unwrap();
        let x: Vec<f64> = pseudo_solve(&a, &[1.0, -1.0], 1e-10).unwrap();
        assert!((x[0] - -0.5).abs() <= 1e-14);
        assert!((x[1] - 0.5).abs() <= 1e-14);
    }

    #[test]
    fn pseudo_solve_zero_rhs() {
        let d = table3();
        let a = build_ms_matrix(&[1.0, 2.0, 3.0], &d).unwrap();
        let x = pseudo_solve(&a, &[0.0, 0.0, 0.0], 1e-10).unwrap();
        assert!(x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pseudo_solve_rejects_non_orthogonal_rhs() {
        let d = table3();
        let a = build_ms_matrix(&[1.0, 2.0, 3.0], &d).unwrap();
        assert!(matches!(
            pseudo_solve(&a, &[1.0, 1.0, 1.0], 1e-10),
            Err(CoreError::RhsNotOrthogonal { .. })
        ));
    }

    #[test]
    fn pseudo_solve_rejects_degenerate_matrix() {
        let d = DiffusionTable::uniform(2, 2.0).unwrap();
        let a = build_ms_matrix(&[0.0, 5.0], &d).unwrap();
        assert!(matches!(
            pseudo_solve(&a, &[1.0, -1.0], 1e-10),
            Err(CoreError::SingularBeyondKernel { .. })
        ));
    }

    #[test]
    fn randomized_pseudo_solve_residual_and_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let n = rng.gen_range(2..=5);
            let d = DiffusionTable::uniform(n, rng.gen_range(0.5..2.0)).unwrap();
            let c: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..10.0)).collect();
            let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let rhs = project_orth_ones(&raw);
            let a = build_ms_matrix(&c, &d).unwrap();
            let x = pseudo_solve(&a, &rhs, 1e-10).unwrap();

            let ax = a.apply(&x).unwrap();
            let res: f64 = ax
                .iter()
                .zip(&rhs)
                .map(|(p, q)| (p - q) * (p - q))
                .sum::<f64>()
                .sqrt();
            let rhs_norm: f64 = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(res <= 1e-10 * (1.0 + rhs_norm));
            let ones_overlap: f64 = x.iter().sum();
            assert!(ones_overlap.abs() <= 1e-10 * (1.0 + rhs_norm));

            assert!(check_pinv_norm_bound(&c, &d, &rhs).unwrap().holds);
            assert!(check_pinv_coercivity(&c, &d, &rhs).unwrap().holds);
        }
    }

    #[test]
    fn solve_then_apply_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..200 {
            let n = rng.gen_range(2..=6);
            let d = DiffusionTable::uniform(n, rng.gen_range(0.5..2.0)).unwrap();
            let c: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..10.0)).collect();
            let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let x_true = project_orth_ones(&raw);
            let a = build_ms_matrix(&c, &d).unwrap();
            let rhs = a.apply(&x_true).unwrap();
            let x = pseudo_solve(&a, &rhs, 1e-8).unwrap();
            let scale: f64 = x_true.iter().map(|v| v * v).sum::<f64>().sqrt();
            for i in 0..n {
                assert!((x[i] - x_true[i]).abs() <= 1e-10 * (1.0 + scale));
            }
        }
    }

    #[test]
    fn kernel_and_symmetry_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..500 {
            let n = rng.gen_range(2..=6);
            let d = DiffusionTable::uniform(n, rng.gen_range(0.5..2.0)).unwrap();
            let c: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..10.0)).collect();
            let a = build_ms_matrix(&c, &d).unwrap();
            let a1 = a.apply(&vec![1.0; n]).unwrap();
            let kernel_residual: f64 = a1.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(kernel_residual <= 1e-14 * (1.0 + a.frobenius_norm()));
            for i in 0..n {
                for j in 0..n {
                    assert_eq!(a.get(i, j), a.get(j, i));
                }
            }
        }
    }

    #[test]
    fn projection_examples_and_idempotency() {
        let p: Vec<f64> = project_orth_ones(&[1.0, 0.0]);
        assert_eq!(p, vec![0.5, -0.5]);
        let z: Vec<f64> = project_orth_ones(&[3.0, 3.0, 3.0]);
        assert!(z.iter().all(|&v| v.abs() <= 1e-15));
        let x: [f64; 4] = [0.3, -1.7, 2.2, 0.9];
        let once = project_orth_ones(&x);
        let twice = project_orth_ones(&once);
        for i in 0..x.len() {
            assert!((once[i] - twice[i]).abs() <= 1e-15);
        }
    }
}
