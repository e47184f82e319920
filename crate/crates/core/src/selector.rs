//! Data-driven bandwidth choice and the isotropic combiner.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::BandwidthGrid;
use crate::kernel::KernelSet;
use crate::ustat::{pair_sums, SplitSample, StatTable};

/// Per-member selection diagnostics.
#[derive(Clone, Debug, Serialize)]
pub struct Diagnostic {
    pub exponents: Vec<u32>,
    pub n_hat: f64,
    pub ucal: f64,
    pub ucal_hat: f64,
    pub r_hat: f64,
    pub objective: f64,
}

/// Outcome of the selection rule.
#[derive(Clone, Debug, Serialize)]
pub struct SelectionResult {
    /// Index of `h*` in grid order.
    pub index: usize,
    pub exponents: Vec<u32>,
    pub h: Vec<f64>,
    pub n_hat: f64,
    /// `|N_hat(h*)|^{1/2}`.
    pub estimate: f64,
    /// Indices attaining the minimal objective.
    pub ties: Vec<usize>,
    pub diagnostics: Vec<Diagnostic>,
}

/// `U_hat_h = max_{w'} U_{h v w'}` for every `h`, with `join` giving the index of `h v w'`.
pub fn ucal_hat_values(ucal: &[f64], join: &dyn Fn(usize, usize) -> usize) -> Vec<f64> {
    (0..ucal.len())
        .map(|h| (0..ucal.len()).map(|w| ucal[join(h, w)]).fold(f64::NEG_INFINITY, f64::max))
        .collect()
}

/// `R_hat_h = max_w (|N_{h v w} - N_w| - 18 U_hat_w)_+` for every `h`.
pub fn r_hat_values(n_hat: &[f64], ucal_hat: &[f64], join: &dyn Fn(usize, usize) -> usize) -> Vec<f64> {
    (0..n_hat.len())
        .map(|h| {
            (0..n_hat.len())
                .map(|w| ((n_hat[join(h, w)] - n_hat[w]).abs() - 18.0 * ucal_hat[w]).max(0.0))
                .fold(0.0, f64::max)
        })
        .collect()
}

/// Minimisers of `objective`: the first entry is the preferred one, chosen
/// by larger volume and then by lexicographically larger bandwidth
/// (lexicographically smaller exponent vector).
pub fn argmin_with_ties(objective: &[f64], exponents: &[Vec<u32>]) -> Vec<usize> {
    let best = objective.iter().copied().fold(f64::INFINITY, f64::min);
    let mut ties: Vec<usize> = (0..objective.len()).filter(|&i| objective[i] == best).collect();
    ties.sort_by(|&a, &b| {
        let sa: u32 = exponents[a].iter().sum();
        let sb: u32 = exponents[b].iter().sum();
        sa.cmp(&sb).then_with(|| exponents[a].cmp(&exponents[b]))
    });
    ties
}

/// Applies the selection rule to a complete statistics table.
pub fn select(table: &StatTable, grid: &BandwidthGrid) -> Result<SelectionResult> {
    if table.rows.len() != grid.len() || grid.is_empty() {
        return Err(Error::EmptyGrid { m: grid.m(), d: grid.dim() });
    }
    let join = |a: usize, b: usize| grid.join(a, b);
    let n_hat: Vec<f64> = table.rows.iter().map(|r| r.n_hat).collect();
    let ucal: Vec<f64> = table.rows.iter().map(|r| r.ucal).collect();
    let ucal_hat = ucal_hat_values(&ucal, &join);
    let r_hat = r_hat_values(&n_hat, &ucal_hat, &join);
    let objective: Vec<f64> = r_hat.iter().zip(&ucal_hat).map(|(r, u)| r + 18.0 * u).collect();
    let exps: Vec<Vec<u32>> = table.rows.iter().map(|r| r.exponents.clone()).collect();
    let ties = argmin_with_ties(&objective, &exps);
    let index = ties[0];
    let diagnostics = (0..n_hat.len())
        .map(|i| Diagnostic {
            exponents: exps[i].clone(),
            n_hat: n_hat[i],
            ucal: ucal[i],
            ucal_hat: ucal_hat[i],
            r_hat: r_hat[i],
            objective: objective[i],
        })
        .collect();
    Ok(SelectionResult {
        index,
        exponents: exps[index].clone(),
        h: table.rows[index].h.clone(),
        n_hat: n_hat[index],
        estimate: n_hat[index].abs().sqrt(),
        ties,
        diagnostics,
    })
}

/// Which bandwidth the isotropic combiner kept.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// The fixed bandwidth `m^{-1/d}` in every coordinate.
    Parametric,
    /// The data-driven `h*`.
    Adaptive,
}

/// `(m^{-1/d}, ..., m^{-1/d})`.
pub fn parametric_bandwidth(m: usize, d: usize) -> Vec<f64> {
    vec![(m as f64).powf(-1.0 / d as f64); d]
}

/// `2 ln(m) / sqrt(m)`.
pub fn combine_threshold(m: usize) -> f64 {
    let mf = m as f64;
    2.0 * mf.ln() / mf.sqrt()
}

/// Parametric branch when the two estimates differ by at most the threshold.
pub fn combine_branch(estimate_star: f64, estimate_param: f64, m: usize) -> Branch {
    combine_branch_with(estimate_star, estimate_param, combine_threshold(m))
}

/// As [`combine_branch`] with an explicit threshold.
pub fn combine_branch_with(estimate_star: f64, estimate_param: f64, threshold: f64) -> Branch {
    if (estimate_star - estimate_param).abs() <= threshold {
        Branch::Parametric
    } else {
        Branch::Adaptive
    }
}

/// Result of the isotropic combiner.
#[derive(Clone, Debug, Serialize)]
pub struct Combined {
    pub branch: Branch,
    pub estimate: f64,
    pub h_param: Vec<f64>,
    pub n_hat_param: f64,
    pub estimate_param: f64,
}

/// Evaluates `N_hat` at the parametric bandwidth and keeps it unless it
/// disagrees with the adaptive estimate.
pub fn isotropic_combine(sample: &SplitSample, kernels: &KernelSet, selection: &SelectionResult) -> Result<Combined> {
    let h = parametric_bandwidth(sample.m(), sample.dim());
    let n = pair_sums(sample, &h, kernels)?.n_hat;
    let est_param = n.abs().sqrt();
    let branch = combine_branch(selection.estimate, est_param, sample.m());
    Ok(Combined {
        branch,
        estimate: match branch {
            Branch::Parametric => est_param,
            Branch::Adaptive => selection.estimate,
        },
        h_param: h,
        n_hat_param: n,
        estimate_param: est_param,
    })
}

/// Full pipeline output for one sample.
#[derive(Clone, Debug, Serialize)]
pub struct EstimateReport {
    pub m: usize,
    pub d: usize,
    pub b: u32,
    pub q: f64,
    pub selection: SelectionResult,
    pub combined: Option<Combined>,
    pub table: StatTable,
}

impl EstimateReport {
    /// The reported estimate: combined when requested, adaptive otherwise.
    pub fn estimate(&self) -> f64 {
        self.combined.as_ref().map_or(self.selection.estimate, |c| c.estimate)
    }
}

/// Runs grid construction, statistics, selection and optionally the combiner.
pub fn run(sample: &SplitSample, kernels: &KernelSet, q: f64, isotropic: bool) -> Result<EstimateReport> {
    let grid = BandwidthGrid::new(sample.m(), sample.dim())?;
    run_with_grid(sample, &grid, kernels, q, isotropic)
}

/// As [`run`], with a prebuilt grid.
pub fn run_with_grid(
    sample: &SplitSample,
    grid: &BandwidthGrid,
    kernels: &KernelSet,
    q: f64,
    isotropic: bool,
) -> Result<EstimateReport> {
    let table = StatTable::build(sample, grid, kernels, q)?;
    let selection = select(&table, grid)?;
    let combined = if isotropic {
        Some(isotropic_combine(sample, kernels, &selection)?)
    } else {
        None
    };
    Ok(EstimateReport {
        m: sample.m(),
        d: sample.dim(),
        b: kernels.order(),
        q,
        selection,
        combined,
        table,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    // One-dimensional chain: index 0 is the largest bandwidth.
    fn chain_join(a: usize, b: usize) -> usize {
        a.min(b)
    }

    #[test]
    fn ucal_hat_hand_enumeration() {
        let u = [5.0, 2.0, 7.0];
        let uh = ucal_hat_values(&u, &chain_join);
        assert_eq!(uh, vec![5.0, 5.0, 7.0]);
        for (a, b) in uh.iter().zip(&u) {
            assert!(a >= b);
        }
    }

    #[test]
    fn r_hat_hand_enumeration() {
        let r = r_hat_values(&[1.0, 0.5], &[0.01, 0.01], &chain_join);
        assert!((r[0] - 0.32).abs() < 1e-15);
        assert_eq!(r[1], 0.0);
    }

    #[test]
    fn equal_n_gives_zero_r() {
        let r = r_hat_values(&[0.7; 4], &[0.0; 4], &chain_join);
        assert!(r.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn argmin_hand_objective() {
        let e = vec![vec![1], vec![2], vec![3]];
        assert_eq!(argmin_with_ties(&[3.0, 1.5, 2.2], &e)[0], 1);
    }

    #[test]
    fn ties_prefer_large_volume_then_lexicographic() {
        let e = vec![vec![2, 1], vec![1, 2], vec![1, 1], vec![3, 3]];
        let ties = argmin_with_ties(&[1.0, 1.0, 2.0, 1.0], &e);
        assert_eq!(ties, vec![1, 0, 3]);
    }

    #[test]
    fn combiner_threshold_inclusive() {
        let m = 500;
        let thr = combine_threshold(m);
        assert_eq!(combine_branch(0.0, thr, m), Branch::Parametric);
        assert_eq!(combine_branch(0.3, 0.3, m), Branch::Parametric);
        let ln = (m as f64).ln();
        assert_eq!(
            combine_branch(0.0, 2.0001 * ln / (m as f64).sqrt(), m),
            Branch::Adaptive
        );
    }

    #[test]
    fn doubling_ucal_never_increases_r() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = BandwidthGrid::new(200, 2).unwrap();
        let join = |a: usize, b: usize| g.join(a, b);
        let n: Vec<f64> = (0..g.len()).map(|_| rng.random::<f64>()).collect();
        let u: Vec<f64> = (0..g.len()).map(|_| 0.01 * rng.random::<f64>()).collect();
        let u2: Vec<f64> = u.iter().map(|v| 2.0 * v).collect();
        let r1 = r_hat_values(&n, &ucal_hat_values(&u, &join), &join);
        let r2 = r_hat_values(&n, &ucal_hat_values(&u2, &join), &join);
        for (a, b) in r1.iter().zip(&r2) {
            assert!(b <= a);
        }
    }

    #[test]
    fn top_member_has_ucal_hat_equal_ucal() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let data: Vec<f64> = (0..400).map(|_| rng.sample(StandardNormal)).collect();
        let s = SplitSample::from_rows(&data, 2).unwrap();
        let k = KernelSet::new(2, 2).unwrap();
        let rep = run(&s, &k, 1.0, true).unwrap();
        let g = BandwidthGrid::new(100, 2).unwrap();
        let top = &rep.selection.diagnostics[g.top()];
        assert_eq!(top.ucal, top.ucal_hat);
        assert!(rep.selection.estimate >= 0.0);
        assert!(g.find(&rep.selection.exponents).is_some());
        let again = run(&s, &k, 1.0, true).unwrap();
        assert_eq!(again.selection.index, rep.selection.index);
        assert_eq!(again.estimate(), rep.estimate());
        let c = rep.combined.unwrap();
        assert_eq!(c.branch, combine_branch(rep.selection.estimate, c.estimate_param, 100));
    }
}
