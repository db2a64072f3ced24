use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::ComparisonError;
use crate::dataset::Answer;

/// Conventional threshold on the first-to-second eigenvalue ratio above which
/// responses are treated as reflecting a single answer key.
pub const UNIDIMENSIONAL_RATIO: f64 = 3.0;

/// Below this the second eigenvalue counts as zero.
pub const EIGEN_ZERO: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenRatio {
    /// `λ1 / λ2`, `+inf` when `λ2` is (numerically) zero.
    pub ratio: f64,
    pub eigenvalues: Vec<f64>,
    /// Respondent pairs with no co-answered question (agreement set to 0.5).
    pub disjoint_pairs: Vec<(usize, usize)>,
}

impl EigenRatio {
    pub fn is_unidimensional(&self) -> bool {
        self.ratio >= UNIDIMENSIONAL_RATIO
    }
}

/// How pairwise agreement enters the matrix.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Agreement {
    /// Fraction of co-answered questions with the same vote.
    #[default]
    Raw,
    /// Chance-corrected for two answer options, `2 M - 1`, so respondents
    /// who guess independently sit near 0 instead of 0.5.
    Guessing,
}

/// `M[r][s]` = fraction of the questions answered by both `r` and `s` on
/// which they agree (raw agreement, no guessing correction); diagonal 1.
/// Also returns the pairs that share no question.
pub fn agreement_matrix(votes: &[Vec<Option<Answer>>]) -> (DMatrix<f64>, Vec<(usize, usize)>) {
    let n = votes.first().map_or(0, Vec::len);
    let mut m = DMatrix::identity(n, n);
    let mut disjoint = Vec::new();
    for r in 0..n {
        for s in r + 1..n {
            let (mut both, mut agree) = (0usize, 0usize);
            for row in votes {
                if let (Some(a), Some(b)) = (row[r], row[s]) {
                    both += 1;
                    agree += usize::from(a == b);
                }
            }
            let v = if both == 0 {
                disjoint.push((r, s));
                0.5
            } else {
                agree as f64 / both as f64
            };
            m[(r, s)] = v;
            m[(s, r)] = v;
        }
    }
    (m, disjoint)
}

/// Ratio of the two largest eigenvalues of the raw agreement matrix.
pub fn agreement_eigenratio(votes: &[Vec<Option<Answer>>]) -> Result<EigenRatio, ComparisonError> {
    agreement_eigenratio_with(votes, Agreement::Raw)
}

pub fn agreement_eigenratio_with(
    votes: &[Vec<Option<Answer>>],
    kind: Agreement,
) -> Result<EigenRatio, ComparisonError> {
    let (mut m, disjoint_pairs) = agreement_matrix(votes);
    if kind == Agreement::Guessing {
        // The diagonal stays 1.
        m.apply(|x| *x = 2.0 * *x - 1.0);
    }
    let n = m.nrows();
    if n < 2 {
        return Err(ComparisonError::TooFewRespondents(n));
    }
    for &(r, s) in &disjoint_pairs {
        log::warn!("respondents {r} and {s} share no answered question; agreement set to 0.5");
    }
    let mut eigenvalues: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(|a, b| b.total_cmp(a));
    let ratio = if eigenvalues[1] <= EIGEN_ZERO { f64::INFINITY } else { eigenvalues[0] / eigenvalues[1] };
    Ok(EigenRatio { ratio, eigenvalues, disjoint_pairs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use Answer::{A, B};

    #[test]
    fn two_respondents_agreeing_three_quarters() {
        let votes = vec![
            vec![Some(A), Some(A)],
            vec![Some(B), Some(B)],
            vec![Some(A), Some(A)],
            vec![Some(A), Some(B)],
        ];
        let e = agreement_eigenratio(&votes).unwrap();
        assert!((e.ratio - 7.0).abs() < 1e-12);
        // Corrected: off-diagonal 0.5, eigenvalues 1.5 and 0.5.
        let c = agreement_eigenratio_with(&votes, Agreement::Guessing).unwrap();
        assert!((c.ratio - 3.0).abs() < 1e-12);
    }

    #[test]
    fn identical_respondents_infinite() {
        let votes = vec![vec![Some(A); 4], vec![Some(B); 4], vec![Some(A); 4]];
        assert_eq!(agreement_eigenratio(&votes).unwrap().ratio, f64::INFINITY);
    }

    #[test]
    fn disjoint_pair_flagged() {
        let votes = vec![vec![Some(A), None], vec![None, Some(B)]];
        let e = agreement_eigenratio(&votes).unwrap();
        assert_eq!(e.disjoint_pairs, vec![(0, 1)]);
        assert!((e.ratio - 3.0).abs() < 1e-12);
    }
}
