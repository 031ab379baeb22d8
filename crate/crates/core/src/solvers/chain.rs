use crate::error::{Error, Result};
use crate::scalar::{log_sum_exp, Scalar};

/// A linear chain over nodes `0..n` with per-node label costs and costs on
/// consecutive label pairs. Label 0 of every node is the no-label state ⊥.
/// Costs may be `+inf` (forbidden).
#[derive(Debug, Clone, PartialEq)]
pub struct ChainModel<T> {
    pub unary: Vec<Vec<T>>,
    /// `pair[i][a][b]`: cost of node `i` taking `a` and node `i + 1` taking `b`.
    pub pair: Vec<Vec<Vec<T>>>,
}

impl<T: Scalar> ChainModel<T> {
    pub fn validate(&self) -> Result<()> {
        if self.unary.iter().any(|u| u.is_empty()) {
            return Err(Error::Model("chain node without labels".into()));
        }
        if self.pair.len() + 1 != self.unary.len().max(1) {
            return Err(Error::Model(format!(
                "{} nodes need {} edge tables, got {}",
                self.unary.len(),
                self.unary.len().saturating_sub(1),
                self.pair.len()
            )));
        }
        for (i, p) in self.pair.iter().enumerate() {
            if p.len() != self.unary[i].len() || p.iter().any(|r| r.len() != self.unary[i + 1].len()) {
                return Err(Error::Model(format!("edge table {i} does not match its node label counts")));
            }
        }
        Ok(())
    }

    pub fn cost(&self, labels: &[usize]) -> T {
        let mut c = T::zero();
        for (i, &l) in labels.iter().enumerate() {
            c = c + self.unary[i][l];
            if i + 1 < labels.len() {
                c = c + self.pair[i][l][labels[i + 1]];
            }
        }
        c
    }
}

/// Minimum-cost labeling. Among optimal labelings returns the
/// lexicographically least (earlier nodes first, lower labels first).
pub fn solve_chain_map<T: Scalar>(model: &ChainModel<T>) -> Result<(Vec<usize>, T)> {
    model.validate()?;
    let n = model.unary.len();
    if n == 0 {
        return Ok((vec![], T::zero()));
    }
    // suffix[i][s]: best cost of nodes i.. given node i takes s
    let mut suffix: Vec<Vec<T>> = vec![Vec::new(); n];
    suffix[n - 1] = model.unary[n - 1].clone();
    for i in (0..n - 1).rev() {
        suffix[i] = (0..model.unary[i].len())
            .map(|s| {
                let best =
                    (0..model.unary[i + 1].len()).map(|t| model.pair[i][s][t] + suffix[i + 1][t]).fold(T::infinity(), T::min);
                model.unary[i][s] + best
            })
            .collect();
    }
    let first_min = |vals: &mut dyn Iterator<Item = T>| {
        let mut best = (0usize, T::infinity());
        for (s, v) in vals.enumerate() {
            if v < best.1 {
                best = (s, v);
            }
        }
        best
    };
    let (s0, total) = first_min(&mut suffix[0].iter().copied());
    if total.is_infinite() {
        return Err(Error::Infeasible("every labeling of the chain is forbidden".into()));
    }
    let mut labels = vec![s0];
    for i in 0..n - 1 {
        let s = labels[i];
        let (t, _) = first_min(&mut (0..model.unary[i + 1].len()).map(|t| model.pair[i][s][t] + suffix[i + 1][t]));
        labels.push(t);
    }
    Ok((labels, total))
}

/// Exact per-node label marginals of `exp(-cost)` by forward-backward in
/// log space, with `log Z`.
pub fn solve_chain_marginal<T: Scalar>(model: &ChainModel<T>) -> Result<(Vec<Vec<T>>, T)> {
    model.validate()?;
    let n = model.unary.len();
    if n == 0 {
        return Ok((vec![], T::zero()));
    }
    let mut fwd: Vec<Vec<T>> = vec![Vec::new(); n];
    fwd[0] = model.unary[0].iter().map(|&u| -u).collect();
    for i in 1..n {
        fwd[i] = (0..model.unary[i].len())
            .map(|t| {
                let terms: Vec<T> = (0..model.unary[i - 1].len()).map(|s| fwd[i - 1][s] - model.pair[i - 1][s][t]).collect();
                log_sum_exp(&terms) - model.unary[i][t]
            })
            .collect();
    }
    let mut bwd: Vec<Vec<T>> = vec![Vec::new(); n];
    bwd[n - 1] = vec![T::zero(); model.unary[n - 1].len()];
    for i in (0..n - 1).rev() {
        bwd[i] = (0..model.unary[i].len())
            .map(|s| {
                let terms: Vec<T> =
                    (0..model.unary[i + 1].len()).map(|t| -model.pair[i][s][t] - model.unary[i + 1][t] + bwd[i + 1][t]).collect();
                log_sum_exp(&terms)
            })
            .collect();
    }
    let log_z = log_sum_exp(&fwd[n - 1]);
    if log_z == T::neg_infinity() {
        return Err(Error::Infeasible("every labeling of the chain is forbidden".into()));
    }
    let marginals = (0..n)
        .map(|i| {
            let logs: Vec<T> = (0..model.unary[i].len()).map(|s| fwd[i][s] + bwd[i][s]).collect();
            let z = log_sum_exp(&logs);
            logs.iter().map(|&l| if l == T::neg_infinity() { T::zero() } else { (l - z).exp() }).collect()
        })
        .collect();
    Ok((marginals, log_z))
}
