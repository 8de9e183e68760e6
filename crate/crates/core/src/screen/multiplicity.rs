use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrectionMethod {
    /// Benjamini-Hochberg step-up procedure.
    #[default]
    Bh,
    Bonferroni,
}

impl std::fmt::Display for CorrectionMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CorrectionMethod::Bh => "bh",
            CorrectionMethod::Bonferroni => "bonferroni",
        })
    }
}

/// Indices (ascending) of the hypotheses rejected at `level`.
pub fn multiplicity_correct(pvalues: &[f64], method: CorrectionMethod, level: f64) -> Vec<usize> {
    assert!(level > 0.0 && level < 1.0, "level must lie in (0, 1)");
    let m = pvalues.len();
    if m == 0 {
        return Vec::new();
    }
    match method {
        CorrectionMethod::Bonferroni => {
            let cut = level / m as f64;
            (0..m).filter(|&j| pvalues[j] <= cut).collect()
        }
        CorrectionMethod::Bh => {
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by(|&a, &b| pvalues[a].total_cmp(&pvalues[b]).then(a.cmp(&b)));
            let last = (1..=m)
                .rev()
                .find(|&rank| pvalues[order[rank - 1]] <= rank as f64 * level / m as f64);
            let mut rejected = match last {
                Some(rank) => order[..rank].to_vec(),
                None => Vec::new(),
            };
            rejected.sort_unstable();
            rejected
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_up_example() {
        let p = [0.001, 0.02, 0.03, 0.5];
        assert_eq!(
            multiplicity_correct(&p, CorrectionMethod::Bh, 0.05),
            vec![0, 1, 2]
        );
        assert_eq!(
            multiplicity_correct(&p, CorrectionMethod::Bonferroni, 0.05),
            vec![0]
        );
    }

    #[test]
    fn step_up_rescues_earlier_ranks() {
        // rank 1 fails its own threshold (0.0125) but rank 2 passes (0.025)
        let p = [0.02, 0.021, 0.9, 0.8];
        assert_eq!(
            multiplicity_correct(&p, CorrectionMethod::Bh, 0.05),
            vec![0, 1]
        );
    }

    #[test]
    fn nothing_rejected_at_one() {
        let p = [1.0; 5];
        assert!(multiplicity_correct(&p, CorrectionMethod::Bh, 0.05).is_empty());
        assert!(multiplicity_correct(&p, CorrectionMethod::Bonferroni, 0.05).is_empty());
        assert!(multiplicity_correct(&[], CorrectionMethod::Bh, 0.05).is_empty());
    }

    #[test]
    fn ties_share_a_decision() {
        let p = [0.03, 0.03, 0.03];
        assert_eq!(
            multiplicity_correct(&p, CorrectionMethod::Bh, 0.05),
            vec![0, 1, 2]
        );
    }
}
