use crate::error::{Error, Result};
use crate::scalar::{log_sum_exp, Scalar};

/// Independent objects described by weighted features.
///
/// `model[f]` is the weight of feature `f`; `+inf` and `-inf` stand for hard
/// features forcing an object into or out of a class. An instance row
/// `(object, class, feature)` says the feature fires for that object and
/// class. With `classes == 1` objects are Boolean; otherwise each object
/// takes at most one class (or none, written ⊥).
#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationInput<T> {
    pub model: Vec<T>,
    pub instance: Vec<(usize, usize, usize)>,
    pub objects: usize,
    pub classes: usize,
}

type Table<T> = Vec<Vec<T>>;

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationResult<T> {
    /// Per object: 0 for ⊥, `1 + x` for class `x`.
    pub labels: Vec<usize>,
    /// Per object, probabilities over `[⊥, class 0, class 1, ...]`.
    pub marginals: Vec<Vec<T>>,
    /// Sum of the chosen penalties (MAP) or `-log Z` (marginal).
    pub cost: T,
}

impl<T: Scalar> ClassificationInput<T> {
    /// Penalty table `W[o][s]` over states `[⊥, class 0, ...]`: minus the sum
    /// of fired feature weights, `0` for ⊥.
    pub fn penalties(&self) -> Result<Vec<Vec<T>>> {
        Ok(self.tables()?.0)
    }

    /// The penalty table and, alongside it, the finite part of each cell:
    /// soft features still count when a hard feature forces the state.
    fn tables(&self) -> Result<(Table<T>, Table<T>)> {
        let mut seen = std::collections::HashSet::new();
        let mut w = vec![vec![T::zero(); self.classes + 1]; self.objects];
        let mut soft = w.clone();
        for &(o, x, f) in &self.instance {
            if o >= self.objects || x >= self.classes || f >= self.model.len() {
                return Err(Error::Model(format!("instance row ({o}, {x}, {f}) out of range")));
            }
            if !seen.insert((o, x, f)) {
                return Err(Error::Model(format!("duplicate instance row ({o}, {x}, {f})")));
            }
            let cell = &mut w[o][x + 1];
            let wf = self.model[f];
            if wf.is_nan() || (cell.is_infinite() && wf.is_infinite() && cell.signum() == wf.signum()) {
                return Err(Error::Infeasible(format!("object {o} is forced both into and out of class {x}")));
            }
            *cell = *cell - wf;
            if wf.is_finite() {
                soft[o][x + 1] = soft[o][x + 1] - wf;
            }
        }
        Ok((w, soft))
    }
}

/// Index of the minimum entry. `-inf` entries are forced states and two of
/// them conflict; `+inf` entries are forbidden. `include_ties` prefers the
/// last state on a tie (Boolean inclusion at zero), otherwise the first.
pub(crate) fn table_argmin<T: Scalar>(row: &[T], include_ties: bool) -> Result<usize> {
    let forced: Vec<usize> = (0..row.len()).filter(|&s| row[s] == T::neg_infinity()).collect();
    match forced.len() {
        0 => {}
        1 => return Ok(forced[0]),
        _ => return Err(Error::Infeasible("several states are forced".into())),
    }
    let mut best = 0;
    for s in 1..row.len() {
        if row[s] < row[best] || (include_ties && row[s] == row[best]) {
            best = s;
        }
    }
    if row[best].is_infinite() {
        return Err(Error::Infeasible("every state is forbidden".into()));
    }
    Ok(best)
}

/// Normalized `exp(-row)` and its log normalizer. Forced states take all
/// mass; the normalizer is then reported as `0`.
pub(crate) fn table_softmax<T: Scalar>(row: &[T]) -> Result<(Vec<T>, T)> {
    let forced: Vec<usize> = (0..row.len()).filter(|&s| row[s] == T::neg_infinity()).collect();
    match forced.len() {
        0 => {}
        1 => {
            let mut p = vec![T::zero(); row.len()];
            p[forced[0]] = T::one();
            return Ok((p, T::zero()));
        }
        _ => return Err(Error::Infeasible("several states are forced".into())),
    }
    let logs: Vec<T> = row.iter().map(|&w| -w).collect();
    let z = log_sum_exp(&logs);
    if z == T::neg_infinity() {
        return Err(Error::Infeasible("every state is forbidden".into()));
    }
    Ok((logs.iter().map(|&l| (l - z).exp()).collect(), z))
}

/// Boolean: include an object iff its summed feature weight is `>= 0`.
/// Multi-class: lowest penalty, ties to ⊥ then the earlier class.
pub fn solve_classification_map<T: Scalar>(input: &ClassificationInput<T>) -> Result<ClassificationResult<T>> {
    let (w, soft) = input.tables()?;
    let boolean = input.classes == 1;
    let mut labels = Vec::with_capacity(w.len());
    let mut cost = T::zero();
    let mut marginals = Vec::with_capacity(w.len());
    for (row, finite) in w.iter().zip(&soft) {
        let s = table_argmin(row, boolean)?;
        cost = cost + finite[s];
        let mut m = vec![T::zero(); row.len()];
        m[s] = T::one();
        marginals.push(m);
        labels.push(s);
    }
    Ok(ClassificationResult { labels, marginals, cost })
}

/// `Pr[state s] = exp(-W[s]) / sum(exp(-W))` per object.
pub fn solve_classification_marginal<T: Scalar>(input: &ClassificationInput<T>) -> Result<ClassificationResult<T>> {
    let w = input.penalties()?;
    let mut labels = Vec::with_capacity(w.len());
    let mut marginals = Vec::with_capacity(w.len());
    let mut log_z = T::zero();
    for row in &w {
        let (p, z) = table_softmax(row)?;
        log_z = log_z + z;
        let mut best = 0;
        for s in 1..p.len() {
            if p[s] > p[best] {
                best = s;
            }
        }
        labels.push(best);
        marginals.push(p);
    }
    Ok(ClassificationResult { labels, marginals, cost: -log_z })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn boolean(model: Vec<f64>, rows: &[(usize, usize)]) -> ClassificationInput<f64> {
        ClassificationInput { model, instance: rows.iter().map(|&(o, f)| (o, 0, f)).collect(), objects: 2, classes: 1 }
    }

    #[test]
    fn weighted_sum_rule() {
        // a hard feature and a weight-8 feature; the object fires only the latter
        let inp = boolean(vec![f64::INFINITY, 8.0], &[(0, 1)]);
        let r = solve_classification_map(&inp).unwrap();
        assert_eq!(r.labels, vec![1, 1]);
    }

    #[test]
    fn zero_sum_includes() {
        let inp = boolean(vec![1.0, -1.0], &[(0, 0), (0, 1)]);
        assert_eq!(solve_classification_map(&inp).unwrap().labels[0], 1);
    }

    #[test]
    fn marginal_closed_form() {
        let inp = boolean(vec![2.0], &[(0, 0)]);
        let r = solve_classification_marginal(&inp).unwrap();
        assert!((r.marginals[0][1] - 1.0 / (1.0 + (-2.0f64).exp())).abs() < 1e-12);
        assert!((r.marginals[1][1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn hard_feature_is_certain() {
        let inp = boolean(vec![f64::INFINITY, f64::NEG_INFINITY], &[(0, 0), (1, 1)]);
        let r = solve_classification_marginal(&inp).unwrap();
        assert_eq!(r.marginals[0][1], 1.0);
        assert_eq!(r.marginals[1][1], 0.0);
    }

    #[test]
    fn conflicting_hard_features() {
        let inp = boolean(vec![f64::INFINITY, f64::NEG_INFINITY], &[(0, 0), (0, 1)]);
        assert!(matches!(solve_classification_map(&inp), Err(Error::Infeasible(_))));
        let multi =
            ClassificationInput { model: vec![f64::INFINITY], instance: vec![(0, 0, 0), (0, 1, 0)], objects: 1, classes: 2 };
        assert!(matches!(solve_classification_map(&multi), Err(Error::Infeasible(_))));
    }

    #[test]
    fn forced_state_keeps_soft_cost() {
        let inp = boolean(vec![f64::INFINITY, 2.5], &[(0, 0), (0, 1)]);
        let r = solve_classification_map(&inp).unwrap();
        assert_eq!(r.labels[0], 1);
        assert_eq!(r.cost, -2.5);
    }

    #[test]
    fn multiclass_ties_go_to_none() {
        let inp = ClassificationInput { model: vec![0.0], instance: vec![(0, 1, 0)], objects: 1, classes: 3 };
        assert_eq!(solve_classification_map(&inp).unwrap().labels, vec![0]);
    }
}
