use super::EvalError;
use crate::matrix::Matrix;

/// `10 / ln 10`
pub const MCD_CONST: f64 = 10.0 / std::f64::consts::LN_10;

#[derive(Debug, Clone, PartialEq)]
pub struct DtwResult {
    /// Index pairs `(i, j)` from `(0, 0)` to `(n − 1, m − 1)`.
    pub path: Vec<(usize, usize)>,
    /// Sum of frame costs over every cell on the path, start cell included.
    pub cost: f64,
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Minimal-cost monotone alignment with steps (1,0), (0,1), (1,1).
/// Ties prefer the diagonal, then (1,0).
pub fn dtw<F>(a: &Matrix, b: &Matrix, frame_cost: F) -> Result<DtwResult, EvalError>
where
    F: Fn(&[f64], &[f64]) -> f64,
{
    if a.is_empty() || b.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    if a.cols() != b.cols() {
        return Err(EvalError::DimMismatch(a.cols(), b.cols()));
    }
    let (n, m) = (a.rows(), b.rows());
    let mut acc = vec![f64::INFINITY; n * m];
    for i in 0..n {
        for j in 0..m {
            let c = frame_cost(a.row(i), b.row(j));
            let best = if i == 0 && j == 0 {
                0.0
            } else {
                let diag = if i > 0 && j > 0 { acc[(i - 1) * m + j - 1] } else { f64::INFINITY };
                let up = if i > 0 { acc[(i - 1) * m + j] } else { f64::INFINITY };
                let left = if j > 0 { acc[i * m + j - 1] } else { f64::INFINITY };
                diag.min(up).min(left)
            };
            acc[i * m + j] = best + c;
        }
    }
    let mut path = vec![(n - 1, m - 1)];
    let (mut i, mut j) = (n - 1, m - 1);
    while i > 0 || j > 0 {
        let diag = if i > 0 && j > 0 { acc[(i - 1) * m + j - 1] } else { f64::INFINITY };
        let up = if i > 0 { acc[(i - 1) * m + j] } else { f64::INFINITY };
        let left = if j > 0 { acc[i * m + j - 1] } else { f64::INFINITY };
        if diag <= up && diag <= left {
            i -= 1;
            j -= 1;
        } else if up <= left {
            i -= 1;
        } else {
            j -= 1;
        }
        path.push((i, j));
    }
    path.reverse();
    Ok(DtwResult { path, cost: acc[n * m - 1] })
}

/// Mel-cepstral distortion in dB between two frames, skipping coefficient 0.
pub fn mcd(a: &[f64], b: &[f64]) -> Result<f64, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::DimMismatch(a.len(), b.len()));
    }
    Ok(mcd_frame_cost(a, b))
}

/// [`mcd`] without the length check, for use as a DTW cost.
pub fn mcd_frame_cost(a: &[f64], b: &[f64]) -> f64 {
    let s: f64 = a.iter().zip(b).skip(1).map(|(x, y)| (x - y).powi(2)).sum();
    MCD_CONST * (2.0 * s).sqrt()
}

/// Mean frame MCD along the DTW path that minimizes total MCD.
pub fn dtw_mcd(a: &Matrix, b: &Matrix) -> Result<f64, EvalError> {
    let r = dtw(a, b, mcd_frame_cost)?;
    Ok(r.cost / r.path.len() as f64)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    /// Exhaustive minimum over all monotone paths.
    pub(crate) fn brute_force_cost(a: &Matrix, b: &Matrix, cost: &dyn Fn(&[f64], &[f64]) -> f64) -> f64 {
        fn go(i: usize, j: usize, a: &Matrix, b: &Matrix, cost: &dyn Fn(&[f64], &[f64]) -> f64) -> f64 {
            let here = cost(a.row(i), b.row(j));
            if i + 1 == a.rows() && j + 1 == b.rows() {
                return here;
            }
            let mut best = f64::INFINITY;
            for (di, dj) in [(1, 0), (0, 1), (1, 1)] {
                if i + di < a.rows() && j + dj < b.rows() {
                    best = best.min(go(i + di, j + dj, a, b, cost));
                }
            }
            here + best
        }
        go(0, 0, a, b, cost)
    }

    fn rand_seq(rng: &mut impl Rng, n: usize, d: usize) -> Matrix {
        Matrix::from_vec(n, d, (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect())
    }

    #[test]
    fn identical_sequences_align_diagonally() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let a = rand_seq(&mut rng, 6, 3);
        let r = dtw(&a, &a, euclidean).unwrap();
        assert_eq!(r.cost, 0.0);
        assert_eq!(r.path, (0..6).map(|i| (i, i)).collect::<Vec<_>>());
        assert_eq!(dtw_mcd(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn single_frame_against_many() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let a = rand_seq(&mut rng, 1, 2);
        let b = rand_seq(&mut rng, 5, 2);
        let expected: f64 = (0..5).map(|j| euclidean(a.row(0), b.row(j))).sum();
        assert!((dtw(&a, &b, euclidean).unwrap().cost - expected).abs() < 1e-12);
    }

    #[test]
    fn matches_exhaustive_search_5_by_6() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let a = rand_seq(&mut rng, 5, 2);
            let b = rand_seq(&mut rng, 6, 2);
            let r = dtw(&a, &b, euclidean).unwrap();
            assert!((r.cost - brute_force_cost(&a, &b, &euclidean)).abs() < 1e-12);
            let along: f64 = r.path.iter().map(|&(i, j)| euclidean(a.row(i), b.row(j))).sum();
            assert!((along - r.cost).abs() < 1e-12);
        }
    }

    #[test]
    fn tie_break_prefers_diagonal_then_first_axis() {
        let zeros = Matrix::zeros(3, 1);
        let r = dtw(&zeros, &Matrix::zeros(2, 1), euclidean).unwrap();
        // all costs are zero: diagonal first from the end, then (1,0) steps
        assert_eq!(r.path, vec![(0, 0), (1, 0), (2, 1)]);
    }

    #[test]
    fn errors() {
        let a = Matrix::zeros(2, 3);
        assert_eq!(dtw(&a, &Matrix::zeros(2, 2), euclidean), Err(EvalError::DimMismatch(3, 2)));
        assert_eq!(dtw(&a, &Matrix::zeros(0, 3), euclidean), Err(EvalError::EmptyInput));
        assert_eq!(mcd(&[0.0; 3], &[0.0; 2]), Err(EvalError::DimMismatch(3, 2)));
    }

    #[test]
    fn mcd_constants() {
        assert_eq!(mcd(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        let mut a = [0.0; 25];
        a[4] = 1.0;
        let v = mcd(&a, &[0.0; 25]).unwrap();
        // (10 / ln 10)·√2 = 6.14185...
        assert!((v - 6.141_851).abs() < 1e-6, "{v}");
        assert!((v - MCD_CONST * 2f64.sqrt()).abs() < 1e-15);
        // energy coefficient is excluded
        a = [0.0; 25];
        a[0] = 5.0;
        assert_eq!(mcd(&a, &[0.0; 25]).unwrap(), 0.0);
    }

    proptest! {
        #[test]
        fn symmetric_and_bounded_by_diagonal(seed in any::<u64>(), n in 1usize..7, m in 1usize..7) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let a = rand_seq(&mut rng, n, 3);
            let b = rand_seq(&mut rng, m, 3);
            let ab = dtw(&a, &b, mcd_frame_cost).unwrap().cost;
            let ba = dtw(&b, &a, mcd_frame_cost).unwrap().cost;
            prop_assert!((ab - ba).abs() < 1e-9);
            let b2 = rand_seq(&mut rng, n, 3);
            let diag: f64 = (0..n).map(|i| mcd_frame_cost(a.row(i), b2.row(i))).sum();
            prop_assert!(dtw(&a, &b2, mcd_frame_cost).unwrap().cost <= diag + 1e-12);
            prop_assert_eq!(dtw_mcd(&a, &a).unwrap(), 0.0);
        }
    }
}
