//! Closed-form error rates and false-negative bounds.

use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};

/// Expected FP rate of two-stage decoding with the block `G2` design when
/// the infected communities are known, under model II with uniform `q`, `p`.
///
/// `N1` counts expected uninfected degree-one members of infected
/// communities and `N2` the expected uninfected shared members with an
/// infected community; a degree-one member is a false positive when one of
/// its `c - 1` test mates is infected, a shared member when one of its
/// mates' `2(c - 1)` communities infects it.
pub fn error_rate_model2(f: usize, f_o: usize, m: usize, m_o: usize, q: f64, p: f64, c: usize, n: usize) -> Result<f64> {
    check_probability("q", q)?;
    check_probability("p", p)?;
    if 2 * f_o > f || m_o >= m || c == 0 {
        return Err(Error::InvalidParameter(format!(
            "invalid layout F = {f}, F_o = {f_o}, M = {m}, M_o = {m_o}, c = {c}"
        )));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("n must be >= 1".into()));
    }
    let (ff, fo, mm, mo) = (f as f64, f_o as f64, m as f64, m_o as f64);
    let n1 = (ff - 2.0 * fo) * q * (1.0 - p) * mm + 2.0 * fo * q * (1.0 - p) * (mm - mo);
    let n2 = fo * (1.0 - (1.0 - q).powi(2)) * (1.0 - p) * mo;
    let miss = 1.0 - p * q;
    let c1 = (c - 1) as i32;
    Ok(((1.0 - miss.powi(c1)) * n1 + (1.0 - miss.powi(2 * c1)) * n2) / n as f64)
}

/// FP rate of COMP with a Bernoulli(1/k) design of `T` tests and exactly
/// `k` infected among `n`.
pub fn error_rate_traditional(n: usize, k: usize, t: usize) -> Result<f64> {
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!("need 1 <= k <= n, got k = {k}, n = {n}")));
    }
    let kf = k as f64;
    let covered_clean = (1.0 / kf) * (1.0 - 1.0 / kf).powf(kf);
    Ok((n - k) as f64 / n as f64 * (1.0 - covered_clean).powf(t as f64))
}

/// Lower bound on the expected extra tests spent on falsely flagged
/// overlapped communities when overlaps are ignored:
/// `(1 - z) F_o M k_f (F - k_f) / (F (F - 1))`.
pub fn expected_extra_tests(f: usize, f_o: usize, m: usize, k_f: usize, z: f64) -> Result<f64> {
    check_probability("z", z)?;
    if f < 2 {
        return Err(Error::InvalidParameter("F must be >= 2".into()));
    }
    if k_f > f {
        return Err(Error::InvalidParameter(format!("k_f = {k_f} exceeds F = {f}")));
    }
    let ff = f as f64;
    Ok((1.0 - z) * f_o as f64 * m as f64 * k_f as f64 * (ff - k_f as f64) / (ff * (ff - 1.0)))
}

/// `N_{1,0}` recovered from the expected number of extra tests.
pub fn n10_from_extra_tests(extra: f64, m: usize, z: f64) -> Result<f64> {
    check_probability("z", z)?;
    if z >= 1.0 || m == 0 {
        return Err(Error::InvalidParameter("need z < 1 and M >= 1".into()));
    }
    Ok(extra / ((1.0 - z) * m as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapProbs {
    pub p_one: f64,
    pub p_both: f64,
}

/// For two overlapping communities at least one of which is infected, the
/// probabilities that exactly one or both are infected when `k_f` of `F`
/// communities are infected uniformly.
pub fn overlap_conditional_probs(f: usize, k_f: usize) -> Result<OverlapProbs> {
    if f < 2 || k_f == 0 || k_f > f {
        return Err(Error::InvalidParameter(format!("need F >= 2 and 1 <= k_f <= F, got F = {f}, k_f = {k_f}")));
    }
    let denom = (2 * f - k_f - 1) as f64;
    Ok(OverlapProbs {
        p_one: 2.0 * (f - k_f) as f64 / denom,
        p_both: (k_f - 1) as f64 / denom,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoisyCompareParams {
    pub k_f: f64,
    pub k_m: f64,
    pub t1: f64,
    pub t2: f64,
    /// Gain factor multiplying `delta` inside the exponents.
    pub z_gain: f64,
    pub delta: f64,
    /// Uninfected communities adjacent to infected ones through overlaps.
    pub n10: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommunityFnBounds {
    pub q_c1: f64,
    pub q_c2: f64,
    pub k_c2: f64,
}

/// FN bounds for overlap-unaware community testing:
/// `Q_c1 = exp(-2 T1 (z delta)^2 / (k_f + N10))`, `k_c2 = Q_c1 k_f k_m`,
/// `Q_c2 = exp(-2 T2 (z delta)^2 / k_c2)`.
pub fn fn_bounds_community(p: &NoisyCompareParams) -> Result<CommunityFnBounds> {
    let gain = (p.z_gain * p.delta).powi(2);
    let d1 = p.k_f + p.n10;
    if d1 <= 0.0 {
        return Err(Error::InvalidParameter("k_f + N10 must be positive".into()));
    }
    let q_c1 = (-2.0 * p.t1 * gain / d1).exp();
    let k_c2 = q_c1 * p.k_f * p.k_m;
    if k_c2 <= 0.0 {
        return Err(Error::InvalidParameter("k_c2 must be positive".into()));
    }
    let q_c2 = (-2.0 * p.t2 * gain / k_c2).exp();
    Ok(CommunityFnBounds { q_c1, q_c2, k_c2 })
}

/// `f(g) = u^((1-g)/(1+g)) * w^(u^(g/(1+g)))`.
pub fn fn_comparison_f(gamma: f64, u: f64, w: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0 && w > 0.0 && w < 1.0) {
        return Err(Error::InvalidParameter(format!("need u, w in (0, 1), got u = {u}, w = {w}")));
    }
    if gamma.is_nan() || gamma < 0.0 {
        return Err(Error::InvalidParameter(format!("gamma = {gamma} must be >= 0")));
    }
    Ok(u.powf((1.0 - gamma) / (1.0 + gamma)) * w.powf(u.powf(gamma / (1.0 + gamma))))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FnRegime {
    /// `f(g) < 1`.
    Below,
    /// `f(g) = 1`.
    Equal,
    /// `f(g) > 1`.
    Above,
}

pub fn classify_fn_regime(gamma: f64, u: f64, w: f64) -> Result<FnRegime> {
    let f = fn_comparison_f(gamma, u, w)?;
    Ok(if f < 1.0 {
        FnRegime::Below
    } else if f > 1.0 {
        FnRegime::Above
    } else {
        FnRegime::Equal
    })
}

/// FN probability of an overlap member mixing the one-infected and
/// both-infected cases: `p_one Q1 Q2 + p_both Q1^2 Q2`.
pub fn overlap_fn_mixture(q1: f64, q2: f64, f: usize, k_f: usize) -> Result<f64> {
    check_probability("Q1", q1)?;
    check_probability("Q2", q2)?;
    let pr = overlap_conditional_probs(f, k_f)?;
    Ok(pr.p_one * q1 * q2 + pr.p_both * q1 * q1 * q2)
}
