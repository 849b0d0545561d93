//! Artifact-selection probabilities under the worst-case voting model.
//!
//! With `λ = 1` and every artifact landing in the same node, the tree picks an
//! artifact exactly when the artifact count wins the weight comparison at
//! depth one. [`exact_worst_case_tail`] evaluates that binomial tail exactly.
//! [`upper_bound_clt`] is the closed-form normal (CLT) approximation
//! `½[1 − erf((n/2 − nε)/√(2nε(1−ε)))]`.
//!
//! The closed form is an approximation, not a guaranteed bound: at small `n`
//! it can sit below the exact tail (`n = 2`, `ε = 0.2`: 0.1444 against 0.36
//! when ties go to the artifact).

pub mod erf;
pub mod quadrature;

pub use erf::{erf, erfc, ln_erfc};

use crate::error::{Result, TatError};
use crate::fmt::sig12;

/// Largest `n` accepted by the direct tail summation.
pub const MAX_EXACT_N: u64 = 10_000;

/// A point `(n, ε)` of the voting model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundQuery {
    pub n: u64,
    pub eps: f64,
    /// Ties (`m = n/2`) count as artifact wins: threshold `⌈n/2⌉` instead of
    /// `⌊n/2⌋ + 1`.
    pub tie_to_artifact: bool,
}

impl BoundQuery {
    pub fn new(n: u64, eps: f64, tie_to_artifact: bool) -> Result<Self> {
        let q = Self {
            n,
            eps,
            tie_to_artifact,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(TatError::Domain(format!("n must be at least 2, got {}", self.n)));
        }
        if !(self.eps > 0.0 && self.eps < 0.5) {
            return Err(TatError::EpsilonDomain(self.eps));
        }
        Ok(())
    }

    /// Smallest artifact count that makes the tree choose the artifact.
    pub fn threshold(&self) -> u64 {
        majority_threshold(self.n, self.tie_to_artifact)
    }
}

/// `⌈n/2⌉` when ties go to the artifact, `⌊n/2⌋ + 1` otherwise.
pub fn majority_threshold(n: u64, tie_to_artifact: bool) -> u64 {
    if tie_to_artifact {
        n.div_ceil(2)
    } else {
        n / 2 + 1
    }
}

/// CLT approximation of the artifact-selection probability,
/// `½ erfc((n/2 − nε)/√(2nε(1−ε)))`.
pub fn upper_bound_clt(q: &BoundQuery) -> Result<f64> {
    q.validate()?;
    let n = q.n as f64;
    let eps = q.eps;
    let z = (n / 2.0 - n * eps) / (2.0 * n * eps * (1.0 - eps)).sqrt();
    Ok(0.5 * erf::erfc_unchecked(z))
}

/// Natural log of [`upper_bound_clt`]; stays finite where the bound itself
/// underflows to zero (large `n`, small `ε`).
pub fn ln_upper_bound_clt(q: &BoundQuery) -> Result<f64> {
    q.validate()?;
    let n = q.n as f64;
    let eps = q.eps;
    let z = (n / 2.0 - n * eps) / (2.0 * n * eps * (1.0 - eps)).sqrt();
    Ok(erf::ln_erfc(z)? - std::f64::consts::LN_2)
}

/// Alias of [`upper_bound_clt`].
pub fn upper_bound(q: &BoundQuery) -> Result<f64> {
    upper_bound_clt(q)
}

/// Smallest `n >= 2` whose CLT bound at `eps` falls below `level`.
pub fn min_n_below(eps: f64, level: f64) -> Result<u64> {
    if !(level > 0.0 && level < 0.5) {
        return Err(TatError::Domain(format!("level must lie in (0, 0.5), got {level}")));
    }
    let below = |n: u64| -> Result<bool> { Ok(upper_bound_clt(&BoundQuery::new(n, eps, false)?)? < level) };
    let mut hi = 2u64;
    while !below(hi)? {
        hi = hi.checked_mul(2).ok_or_else(|| TatError::Domain("n overflow".into()))?;
    }
    let mut lo = hi / 2;
    if lo < 2 {
        return Ok(2);
    }
    // below(lo) is false, below(hi) is true
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if below(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Exact worst-case tail `Σ_{m ≥ threshold} C(n,m) ε^m (1−ε)^(n−m)`.
pub fn exact_worst_case_tail(q: &BoundQuery) -> Result<f64> {
    q.validate()?;
    binomial_tail(q.n, q.eps, q.threshold())
}

/// `P(X >= threshold)` for `X ~ Binomial(n, p)`, summed in log space with
/// Neumaier compensation. Accepts any `n` in `1..=MAX_EXACT_N` and `p` in
/// `[0, 1]`.
pub fn binomial_tail(n: u64, p: f64, threshold: u64) -> Result<f64> {
    if n == 0 || n > MAX_EXACT_N {
        return Err(TatError::Domain(format!(
            "n must lie in 1..={MAX_EXACT_N}, got {n}"
        )));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(TatError::Domain(format!("probability must lie in [0, 1], got {p}")));
    }
    if threshold == 0 {
        return Ok(1.0);
    }
    if threshold > n {
        return Ok(0.0);
    }
    if p == 0.0 {
        return Ok(0.0);
    }
    if p == 1.0 {
        return Ok(1.0);
    }
    let ln_fact = log_factorials(n);
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for m in threshold..=n {
        let ln_term = ln_fact[n as usize] - ln_fact[m as usize] - ln_fact[(n - m) as usize]
            + m as f64 * lp
            + (n - m) as f64 * lq;
        let term = ln_term.exp();
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
    }
    Ok((sum + comp).clamp(0.0, 1.0))
}

fn log_factorials(n: u64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n as usize + 1);
    out.push(0.0);
    let mut acc = 0.0f64;
    let mut comp = 0.0f64;
    for k in 1..=n {
        // compensated running sum of ln k
        let y = (k as f64).ln() - comp;
        let t = acc + y;
        comp = (t - acc) - y;
        acc = t;
        out.push(acc);
    }
    out
}

/// CLT bound evaluated on an `n × ε` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundSurface {
    pub n_values: Vec<u64>,
    pub eps_values: Vec<f64>,
    /// `upper_bounds[i][j]` is the bound at `(n_values[i], eps_values[j])`.
    pub upper_bounds: Vec<Vec<f64>>,
}

pub const BOUND_SURFACE_HEADER: &str = "n,eps,upper_bound";

impl BoundSurface {
    /// CSV with header `n,eps,upper_bound`, n-major rows, `%.12g` numbers.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(32 * self.n_values.len() * self.eps_values.len());
        out.push_str(BOUND_SURFACE_HEADER);
        out.push('\n');
        for (i, n) in self.n_values.iter().enumerate() {
            for (j, eps) in self.eps_values.iter().enumerate() {
                out.push_str(&format!("{n},{},{}\n", sig12(*eps), sig12(self.upper_bounds[i][j])));
            }
        }
        out
    }

    pub fn get(&self, n: u64, eps: f64) -> Option<f64> {
        let i = self.n_values.iter().position(|&v| v == n)?;
        let j = self.eps_values.iter().position(|&v| v == eps)?;
        Some(self.upper_bounds[i][j])
    }
}

pub fn bound_surface(n_values: &[u64], eps_values: &[f64]) -> Result<BoundSurface> {
    if n_values.windows(2).any(|w| w[0] >= w[1]) || eps_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(TatError::Domain("grid values must be strictly increasing".into()));
    }
    let mut upper_bounds = Vec::with_capacity(n_values.len());
    for &n in n_values {
        let row = eps_values
            .iter()
            .map(|&eps| upper_bound_clt(&BoundQuery::new(n, eps, false)?))
            .collect::<Result<Vec<f64>>>()?;
        upper_bounds.push(row);
    }
    Ok(BoundSurface {
        n_values: n_values.to_vec(),
        eps_values: eps_values.to_vec(),
        upper_bounds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::theory::quadrature::erf_by_quadrature;

    fn q(n: u64, eps: f64, tie: bool) -> BoundQuery {
        BoundQuery::new(n, eps, tie).unwrap()
    }

    /// Probability that the artifact wins, enumerating all 2^n outcomes.
    fn enumerate_tail(n: u32, eps: f64, threshold: u32) -> f64 {
        let mut p = 0.0;
        for mask in 0u32..(1 << n) {
            let m = mask.count_ones();
            if m >= threshold {
                p += eps.powi(m as i32) * (1.0 - eps).powi((n - m) as i32);
            }
        }
        p
    }

    #[test]
    fn log_bound_tracks_bound_and_survives_underflow() {
        for n in [2u64, 10, 60, 200] {
            for eps in [0.05, 0.2, 0.45] {
                let b = upper_bound_clt(&q(n, eps, false)).unwrap();
                let l = ln_upper_bound_clt(&q(n, eps, false)).unwrap();
                if b > 1e-300 {
                    assert!((l - b.ln()).abs() < 1e-10 * b.ln().abs().max(1.0), "{n} {eps}");
                }
            }
        }
        assert_eq!(upper_bound_clt(&q(200, 0.01, false)).unwrap(), 0.0);
        let mut prev = f64::INFINITY;
        for n in 2..=200 {
            let l = ln_upper_bound_clt(&q(n, 0.01, false)).unwrap();
            assert!(l.is_finite() && l < prev);
            prev = l;
        }
    }

    #[test]
    fn bound_examples() {
        // erf(0.75) from the quadrature reference, then the closed form
        let via_oracle = 0.5 * (1.0 - erf_by_quadrature(0.75));
        assert!((via_oracle - 0.144422).abs() < 1e-5);
        let b = upper_bound_clt(&q(2, 0.2, false)).unwrap();
        assert!((b - via_oracle).abs() < 1e-12);

        let b60 = upper_bound_clt(&q(60, 0.2, false)).unwrap();
        assert!(b60 < 1e-8 && (b60 - 3.1e-9).abs() < 0.1e-9, "{b60}");

        let near_half = upper_bound_clt(&q(2, 0.5 - 1e-9, false)).unwrap();
        assert!((near_half - 0.5).abs() < 1e-6);
        assert_eq!(upper_bound(&q(2, 0.2, true)).unwrap(), b);
    }

    #[test]
    fn bound_domain() {
        assert_eq!(BoundQuery::new(5, 0.5, false), Err(TatError::EpsilonDomain(0.5)));
        assert!(BoundQuery::new(5, 0.0, false).is_err());
        assert!(BoundQuery::new(1, 0.2, false).is_err());
        let bad = BoundQuery {
            n: 4,
            eps: 0.7,
            tie_to_artifact: false,
        };
        assert_eq!(upper_bound_clt(&bad), Err(TatError::EpsilonDomain(0.7)));
    }

    #[test]
    fn exact_tail_examples() {
        let t5 = exact_worst_case_tail(&q(5, 0.2, false)).unwrap();
        assert!((t5 - enumerate_tail(5, 0.2, 3)).abs() < 1e-15);
        assert!((t5 - 0.05792).abs() < 1e-12);
        let t3 = exact_worst_case_tail(&q(3, 0.2, false)).unwrap();
        assert!((t3 - 0.104).abs() < 1e-12);
        let t2 = exact_worst_case_tail(&q(2, 0.2, true)).unwrap();
        assert!((t2 - 0.36).abs() < 1e-12);
        // the CLT formula is below the exact tail here
        assert!(upper_bound_clt(&q(2, 0.2, true)).unwrap() < t2);
    }

    #[test]
    fn exact_tail_matches_enumeration() {
        for n in 2..=16u32 {
            for &eps in &[0.05, 0.2, 0.35, 0.49] {
                for tie in [false, true] {
                    let query = q(n as u64, eps, tie);
                    let exact = exact_worst_case_tail(&query).unwrap();
                    let brute = enumerate_tail(n, eps, query.threshold() as u32);
                    assert!((exact - brute).abs() < 1e-12, "n={n} eps={eps} tie={tie} diff={}", exact - brute);
                }
            }
        }
    }

    #[test]
    fn strict_tail_never_exceeds_tie_tail() {
        for n in 2..=400u64 {
            for k in 1..50 {
                let eps = k as f64 * 0.01;
                let strict = exact_worst_case_tail(&q(n, eps, false)).unwrap();
                let tie = exact_worst_case_tail(&q(n, eps, true)).unwrap();
                assert!(strict <= tie);
            }
        }
    }

    #[test]
    fn exact_tail_large_n_domain() {
        let t = exact_worst_case_tail(&q(10_000, 0.3, false)).unwrap();
        assert!((0.0..1e-100).contains(&t));
        let t = exact_worst_case_tail(&q(10_000, 0.499, false)).unwrap();
        assert!(t > 0.0 && t < 0.5);
        assert!(exact_worst_case_tail(&q(10_001, 0.3, false)).is_err());
        assert_eq!(binomial_tail(1, 0.2, 1).unwrap(), 0.2);
        assert_eq!(binomial_tail(1, 0.0, 1).unwrap(), 0.0);
    }

    #[test]
    fn surface_examples() {
        let s = bound_surface(&[60], &[0.35]).unwrap();
        let v = s.get(60, 0.35).unwrap();
        assert!(v < 0.01 && (v - 7.5e-3).abs() < 1e-4, "{v}");

        let ns: Vec<u64> = (2..=200).collect();
        let s = bound_surface(&ns, &[0.2]).unwrap();
        assert!(s.upper_bounds.windows(2).all(|w| w[1][0] < w[0][0]));

        let eps: Vec<f64> = (1..50).map(|k| k as f64 * 0.01).collect();
        let s = bound_surface(&[2], &eps).unwrap();
        assert!(s.upper_bounds[0].windows(2).all(|w| w[1] > w[0]));
        assert!(bound_surface(&[3, 2], &[0.2]).is_err());
        assert!(bound_surface(&[2], &[0.2, 0.6]).is_err());
    }

    #[test]
    fn surface_csv_layout() {
        let s = bound_surface(&[2, 3], &[0.1, 0.2]).unwrap();
        let csv = s.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "n,eps,upper_bound");
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("2,0.1,"));
        assert!(lines[2].starts_with("2,0.2,"));
        assert!(lines[3].starts_with("3,0.1,"));
    }

    #[test]
    fn min_n_for_level() {
        let n = min_n_below(0.3, 1e-10).unwrap();
        assert!(upper_bound_clt(&q(n, 0.3, false)).unwrap() < 1e-10);
        assert!(upper_bound_clt(&q(n - 1, 0.3, false)).unwrap() >= 1e-10);
        assert!(n < 10_000);
    }
}
