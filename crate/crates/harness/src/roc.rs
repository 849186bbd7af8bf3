//! Exact step ROC curves.

/// ROC curve of the rule "positive iff statistic ≥ τ", swept over every
/// observed value, with the trapezoidal AUC. Ties between arms are crossed
/// in a single step, so they earn half credit.
pub fn roc_curve(null: &[f64], alt: &[f64]) -> (Vec<(f64, f64)>, f64) {
    assert!(
        !null.is_empty() && !alt.is_empty(),
        "both ROC arms need values"
    );
    let mut null = null.to_vec();
    let mut alt = alt.to_vec();
    null.sort_by(|a, b| b.total_cmp(a));
    alt.sort_by(|a, b| b.total_cmp(a));
    let (n0, n1) = (null.len() as f64, alt.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut points = vec![(0.0, 0.0)];
    let mut auc = 0.0;
    while i < null.len() || j < alt.len() {
        let next = match (null.get(i), alt.get(j)) {
            (Some(&a), Some(&b)) => {
                if a.total_cmp(&b).is_ge() {
                    a
                } else {
                    b
                }
            }
            (Some(&a), None) => a,
            (None, Some(&b)) => b,
            (None, None) => unreachable!(),
        };
        while i < null.len() && null[i] == next {
            i += 1;
        }
        while j < alt.len() && alt[j] == next {
            j += 1;
        }
        let point = (i as f64 / n0, j as f64 / n1);
        let last = *points.last().expect("curve starts at the origin");
        auc += (point.0 - last.0) * (point.1 + last.1) / 2.0;
        points.push(point);
    }
    (points, auc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_statistic_has_auc_half() {
        let (points, auc) = roc_curve(&[1.0; 5], &[1.0; 7]);
        assert_eq!(points, vec![(0.0, 0.0), (1.0, 1.0)]);
        assert_eq!(auc, 0.5);
    }

    #[test]
    fn separated_statistics_have_auc_one() {
        let (points, auc) = roc_curve(&[0.0, 0.1, 0.2], &[1.0, 2.0]);
        assert_eq!(auc, 1.0);
        assert_eq!(points.last(), Some(&(1.0, 1.0)));
        let (_, auc) = roc_curve(&[1.0, 2.0], &[0.0, 0.1, 0.2]);
        assert_eq!(auc, 0.0);
    }

    #[test]
    fn auc_is_mann_whitney() {
        let null = [0.3, 1.2, -0.5, 0.8, 0.8, 2.0];
        let alt = [0.9, 0.8, 2.5, 1.1, -0.1];
        let mut wins = 0.0;
        for a in alt {
            for b in null {
                wins += if a > b {
                    1.0
                } else if a == b {
                    0.5
                } else {
                    0.0
                };
            }
        }
        let (_, auc) = roc_curve(&null, &alt);
        assert!((auc - wins / 30.0).abs() < 1e-15);
    }

    #[test]
    fn infinities_are_ordinary_extremes() {
        let (_, auc) = roc_curve(&[f64::NEG_INFINITY, 0.0], &[f64::INFINITY, 0.0]);
        assert_eq!(auc, 0.875);
    }
}
