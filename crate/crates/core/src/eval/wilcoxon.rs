use serde::Serialize;
use statrs::function::erf::erfc;

use super::EvalError;

/// Direction of the one-sided test on the differences `a - b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Alternative {
    /// `a` tends to exceed `b`.
    Greater,
    /// `a` tends to fall below `b`.
    Less,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WilcoxonOptions {
    pub alternative: Alternative,
    /// Shift the statistic by 1/2 towards the mean in the normal
    /// approximation.
    pub continuity_correction: bool,
    /// Largest number of nonzero differences for which the exact null
    /// distribution is used.
    pub exact_max: usize,
}

impl WilcoxonOptions {
    pub fn new(alternative: Alternative) -> Self {
        WilcoxonOptions {
            alternative,
            continuity_correction: true,
            exact_max: 25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WilcoxonResult {
    /// Pairs with a nonzero difference.
    pub n: usize,
    /// Sum of the ranks of the positive differences.
    pub statistic: f64,
    pub p_value: f64,
    pub exact: bool,
    /// (W+ − W−) / (W+ + W−).
    pub rank_biserial: f64,
    /// Median of `a − b` over all pairs.
    pub median_difference: f64,
}

pub fn wilcoxon_signed_rank(pairs: &[(f64, f64)], alternative: Alternative) -> Result<WilcoxonResult, EvalError> {
    wilcoxon_signed_rank_with(pairs, WilcoxonOptions::new(alternative))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Average ranks of `|d|`, doubled so that tied ranks stay integral, and
/// the tie-group sizes.
fn doubled_ranks(d: &[f64]) -> (Vec<u64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..d.len()).collect();
    order.sort_by(|&i, &j| d[i].abs().total_cmp(&d[j].abs()));
    let mut ranks = vec![0; d.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && d[order[j + 1]].abs() == d[order[i]].abs() {
            j += 1;
        }
        // Positions i..=j share the average of ranks i+1..=j+1.
        let doubled = (i + 1 + j + 1) as u64;
        for &k in &order[i..=j] {
            ranks[k] = doubled;
        }
        ties.push(j - i + 1);
        i = j + 1;
    }
    (ranks, ties)
}

/// P(W ≥ w) or P(W ≤ w) under the null by counting sign assignments.
fn exact_p(ranks: &[u64], w2: u64, alternative: Alternative) -> f64 {
    let total: u64 = ranks.iter().sum();
    let mut ways = vec![0f64; total as usize + 1];
    ways[0] = 1.0;
    let mut reach = 0usize;
    for &r in ranks {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if ways[s] > 0.0 {
                ways[s + r] += ways[s];
            }
        }
        reach += r;
    }
    let all = 2f64.powi(ranks.len() as i32);
    let tail: f64 = match alternative {
        Alternative::Greater => ways[w2 as usize..].iter().sum(),
        Alternative::Less => ways[..=w2 as usize].iter().sum(),
    };
    tail / all
}

/// Paired one-sided Wilcoxon signed-rank test on `a − b`.
///
/// Zero differences are dropped and tied magnitudes get average ranks.
/// Up to `exact_max` nonzero differences the p-value is exact; beyond that
/// it uses the normal approximation with the tie-corrected variance.
pub fn wilcoxon_signed_rank_with(pairs: &[(f64, f64)], opts: WilcoxonOptions) -> Result<WilcoxonResult, EvalError> {
    if let Some(index) = pairs.iter().position(|(a, b)| !a.is_finite() || !b.is_finite()) {
        return Err(EvalError::NonFinitePair { index });
    }
    let all: Vec<f64> = pairs.iter().map(|(a, b)| a - b).collect();
    let d: Vec<f64> = all.iter().copied().filter(|&x| x != 0.0).collect();
    if d.is_empty() {
        return Err(EvalError::AllTied);
    }
    let n = d.len();
    let (ranks, ties) = doubled_ranks(&d);
    let w2_plus: u64 = d.iter().zip(&ranks).filter(|(x, _)| **x > 0.0).map(|(_, r)| r).sum();
    let w2_total: u64 = ranks.iter().sum();
    let w_plus = w2_plus as f64 / 2.0;
    let w_minus = (w2_total - w2_plus) as f64 / 2.0;

    let exact = n <= opts.exact_max;
    let p = if exact {
        exact_p(&ranks, w2_plus, opts.alternative)
    } else {
        let nf = n as f64;
        let mean = nf * (nf + 1.0) / 4.0;
        let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term;
        let cc = if opts.continuity_correction { 0.5 } else { 0.0 };
        let z = match opts.alternative {
            Alternative::Greater => (w_plus - mean - cc) / var.sqrt(),
            Alternative::Less => (mean - w_plus - cc) / var.sqrt(),
        };
        0.5 * erfc(z / std::f64::consts::SQRT_2)
    };
    Ok(WilcoxonResult {
        n,
        statistic: w_plus,
        p_value: p.min(1.0),
        exact,
        rank_biserial: (w_plus - w_minus) / (w_plus + w_minus),
        median_difference: median(all),
    })
}
