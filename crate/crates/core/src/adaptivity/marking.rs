use crate::estimators::EstimatorReport;

/// Outcome of the separate marking decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Case {
    /// Dörfler marking on the residual estimator.
    A,
    /// Data approximation down to a tolerance.
    B,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Marking {
    Leaves(Vec<usize>),
    Tolerance(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarkingDecision {
    pub case: Case,
    pub marking: Marking,
    /// `mu^2 / eta_SEP^2`
    pub quotient_sq: f64,
}

/// Smallest set of leaves whose indicators carry the fraction `theta` of the total.
///
/// Leaves are taken in descending order of their value with ties broken by
/// ascending leaf index. The result is sorted ascending. `theta >= 1` selects
/// every leaf; an all-zero input selects none.
pub fn dorfler_mark(values: &[f64], theta: f64) -> Vec<usize> {
    if theta >= 1.0 {
        return (0..values.len()).collect();
    }
    let total: f64 = values.iter().sum();
    if !(total > 0.0) {
        return Vec::new();
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let goal = theta * total;
    let mut acc = 0.0;
    let mut count = values.len();
    for (k, &i) in order.iter().enumerate() {
        acc += values[i];
        if acc >= goal {
            count = k + 1;
            break;
        }
    }
    let mut marked = order[..count].to_vec();
    marked.sort_unstable();
    marked
}

/// Case A marks the Dörfler set of `eta_sep`; case B asks for `mu <= rho mu(T)`.
pub fn separate_mark(mu: &EstimatorReport, eta_sep: &EstimatorReport, theta: f64, kappa: f64, rho: f64) -> MarkingDecision {
    let quotient_sq = if mu.total_sq == 0.0 {
        0.0
    } else if eta_sep.total_sq == 0.0 {
        f64::INFINITY
    } else {
        mu.total_sq / eta_sep.total_sq
    };
    if mu.total_sq <= kappa * eta_sep.total_sq {
        MarkingDecision { case: Case::A, marking: Marking::Leaves(dorfler_mark(&eta_sep.per_triangle, theta)), quotient_sq }
    } else {
        MarkingDecision { case: Case::B, marking: Marking::Tolerance(rho * mu.total()), quotient_sq }
    }
}
