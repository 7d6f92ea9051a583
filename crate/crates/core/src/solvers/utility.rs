use super::{check_capacity, finish, Regime, SolveResult};
use crate::error::Result;
use crate::population::GroupedPopulation;
use crate::scalar::Scalar;

/// Maximizes the global TP at capacity `c` with a single threshold on the pooled scores.
///
/// The atom at the pooled threshold is split pro rata: every group allocates the same
/// fraction `γ*` of its own mass there.
pub fn solve_utility_max<T: Scalar>(pop: &GroupedPopulation<T>, c: T) -> Result<SolveResult<T>> {
    run(pop, c)
}

pub(super) fn run<T: Scalar>(pop: &GroupedPopulation<T>, c: T) -> Result<SolveResult<T>> {
    check_capacity(c)?;
    let groups = pop.groups();
    let mut pts: Vec<(T, T)> = groups
        .iter()
        .flat_map(|g| g.dist.iter().map(move |(v, w)| (v, g.weight * w)))
        .collect();
    pts.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("scores are not NaN"));

    let (mut t_star, mut gamma) = (pts[pts.len() - 1].0, T::one());
    let mut above = T::zero();
    let mut i = 0;
    while i < pts.len() {
        let v = pts[i].0;
        let mut atom = T::zero();
        while i < pts.len() && pts[i].0 == v {
            atom = atom + pts[i].1;
            i += 1;
        }
        if above + atom >= c || i == pts.len() {
            t_star = v;
            gamma = ((c - above) / atom).max(T::zero()).min(T::one());
            break;
        }
        above = above + atom;
    }

    let caps: Vec<T> = groups
        .iter()
        .map(|g| g.dist.evaluate_threshold(t_star, gamma).0)
        .collect();
    finish(Regime::UtilityMax, pop, c, &caps, Some(t_star), 0, Vec::new())
}
