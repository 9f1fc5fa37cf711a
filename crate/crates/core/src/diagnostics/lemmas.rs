use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{euclidean, LambdaRegion, ParamBox};

/// Inequalities used to pass from joint to marginal and from plug-in to
/// population limits, checked on random discrete instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Lemma {
    /// `∫|a/∫a − b/∫b| ≤ 2∫|a − b| / ∫b`.
    RatioBound,
    /// `∫|aI₁ − bI₂| ≤ ∫|a − b| + ∫|b||I₁ − I₂|`.
    IndicatorBound,
    /// `∫f|I_Λ(λ) − I_Λ(λ(θ))| ≤ ∫f·1[λ(θ) ∈ ∂_δΛ] + 2∫f·d(λ, λ(θ))/δ`.
    SplitBound,
    /// `∫|∫f dt − ∫g dt| dθ ≤ ∫∫|f − g| dt dθ`.
    MarginalBound,
}

impl Lemma {
    pub const ALL: [Lemma; 4] = [Lemma::RatioBound, Lemma::IndicatorBound, Lemma::SplitBound, Lemma::MarginalBound];

    pub fn as_str(&self) -> &'static str {
        match self {
            Lemma::RatioBound => "ratio-bound",
            Lemma::IndicatorBound => "indicator-bound",
            Lemma::SplitBound => "split-bound",
            Lemma::MarginalBound => "marginal-bound",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|l| l.as_str() == s).ok_or_else(|| Error::input(format!("unknown lemma '{s}'")))
    }
}

impl fmt::Display for Lemma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub lemma: Lemma,
    pub trials: usize,
    pub violations: usize,
    /// Largest `lhs − rhs` seen (negative when every instance holds strictly).
    pub worst_margin: f64,
    /// The first few violating instances, verbatim.
    pub counterexamples: Vec<String>,
}

impl LemmaReport {
    pub fn pass(&self) -> bool {
        self.violations == 0
    }
}

const MAX_COUNTEREXAMPLES: usize = 5;

/// Sides of one instance plus a printable description of it.
struct Instance {
    lhs: f64,
    rhs: f64,
    text: String,
}

/// Checks `which` on `trials` random instances with grid sizes 10 to 1000.
pub fn lemma_property_check(which: Lemma, trials: usize, seed: u64) -> Result<LemmaReport> {
    if trials == 0 {
        return Err(Error::input("lemma check needs at least one trial"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report =
        LemmaReport { lemma: which, trials, violations: 0, worst_margin: f64::NEG_INFINITY, counterexamples: vec![] };
    for trial in 0..trials {
        let inst = match which {
            Lemma::RatioBound => ratio_instance(&mut rng, trial),
            Lemma::IndicatorBound => indicator_instance(&mut rng, trial),
            Lemma::SplitBound => split_instance(&mut rng, trial),
            Lemma::MarginalBound => marginal_instance(&mut rng, trial),
        };
        let margin = inst.lhs - inst.rhs;
        report.worst_margin = report.worst_margin.max(margin);
        // Round-off allowance relative to the size of the bound.
        if margin > 1e-12 * (1.0 + inst.rhs.abs()) {
            report.violations += 1;
            if report.counterexamples.len() < MAX_COUNTEREXAMPLES {
                report.counterexamples.push(format!("lhs={} rhs={} {}", inst.lhs, inst.rhs, inst.text));
            }
        }
    }
    Ok(report)
}

fn weights(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(0.01..2.0)).collect()
}

/// Nonnegative vector with a random share of exact zeros.
fn nonneg(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    let zeros: f64 = rng.gen_range(0.0..0.5);
    let scale: f64 = 10f64.powf(rng.gen_range(-3.0..3.0));
    (0..len).map(|_| if rng.gen::<f64>() < zeros { 0.0 } else { scale * rng.gen::<f64>() }).collect()
}

fn integral(mu: &[f64], f: impl Fn(usize) -> f64) -> f64 {
    mu.iter().enumerate().map(|(i, w)| w * f(i)).sum()
}

fn ratio_instance(rng: &mut ChaCha8Rng, trial: usize) -> Instance {
    let len = rng.gen_range(10..=1000);
    let mu = weights(rng, len);
    let mut a = nonneg(rng, len);
    a[0] += 1e-3;
    // Every tenth trial uses a = b, where both sides vanish.
    let b = if trial.is_multiple_of(10) {
        a.clone()
    } else {
        let mut b = nonneg(rng, len);
        b[len - 1] += 1e-3;
        b
    };
    let (ia, ib) = (integral(&mu, |i| a[i]), integral(&mu, |i| b[i]));
    let lhs = integral(&mu, |i| (a[i] / ia - b[i] / ib).abs());
    let rhs = 2.0 * integral(&mu, |i| (a[i] - b[i]).abs()) / ib;
    Instance { lhs, rhs, text: format!("trial={trial} len={len} int_a={ia} int_b={ib}") }
}

fn indicator_instance(rng: &mut ChaCha8Rng, trial: usize) -> Instance {
    let len = rng.gen_range(10..=1000);
    let mu = weights(rng, len);
    let signed = rng.gen_bool(0.5);
    let draw = |rng: &mut ChaCha8Rng| {
        let mut v = nonneg(rng, len);
        if signed {
            v.iter_mut().for_each(|x| {
                if rng.gen_bool(0.5) {
                    *x = -*x
                }
            });
        }
        v
    };
    let a = draw(rng);
    let b = draw(rng);
    let p: f64 = rng.gen();
    let i1: Vec<bool> = (0..len).map(|_| rng.gen_bool(p)).collect();
    let i2: Vec<bool> = if trial.is_multiple_of(10) { i1.clone() } else { (0..len).map(|_| rng.gen_bool(p)).collect() };
    let ind = |x: bool| if x { 1.0 } else { 0.0 };
    let lhs = integral(&mu, |i| (a[i] * ind(i1[i]) - b[i] * ind(i2[i])).abs());
    let rhs = integral(&mu, |i| (a[i] - b[i]).abs()) + integral(&mu, |i| b[i].abs() * (ind(i1[i]) - ind(i2[i])).abs());
    Instance { lhs, rhs, text: format!("trial={trial} len={len} signed={signed}") }
}

fn random_region(rng: &mut ChaCha8Rng) -> LambdaRegion<f64> {
    match rng.gen_range(0..4) {
        0 => LambdaRegion::nonneg_orthant(rng.gen_range(1..=3)).expect("orthant"),
        1 => {
            let dim = rng.gen_range(1..=3);
            let lo: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..0.5)).collect();
            let hi: Vec<f64> = lo.iter().map(|l| l + rng.gen_range(0.1..2.0)).collect();
            LambdaRegion::boxed(ParamBox::new(lo, hi).expect("box"))
        }
        2 => LambdaRegion::ordered_cone(),
        _ => LambdaRegion::unconstrained(rng.gen_range(1..=2)).expect("unconstrained"),
    }
}

/// `f` over ξ = (t, θ) nodes with paired points `λ` and `λ(θ)`.
fn split_instance(rng: &mut ChaCha8Rng, trial: usize) -> Instance {
    let len = rng.gen_range(10..=1000);
    let region = random_region(rng);
    let dim = region.dim();
    let f = nonneg(rng, len);
    let delta: f64 = 10f64.powf(rng.gen_range(-3.0..0.0));
    let spread: f64 = 10f64.powf(rng.gen_range(-3.0..0.5));
    let mut lhs = 0.0;
    let mut boundary = 0.0;
    let mut shift = 0.0;
    for fi in &f {
        let anchor: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.5..2.5)).collect();
        let point: Vec<f64> = anchor.iter().map(|x| x + spread * rng.gen_range(-1.0..1.0)).collect();
        let (ia, ip) = (region.contains(&anchor), region.contains(&point));
        if ia != ip {
            lhs += fi;
        }
        if region.boundary_distance(&anchor) <= delta {
            boundary += fi;
        }
        shift += fi * euclidean(&point, &anchor);
    }
    let rhs = boundary + 2.0 * shift / delta;
    Instance {
        lhs,
        rhs,
        text: format!("trial={trial} len={len} kind={:?} delta={delta} spread={spread}", region.kind()),
    }
}

/// Joint grids on t × θ, compared before and after summing out t.
fn marginal_instance(rng: &mut ChaCha8Rng, trial: usize) -> Instance {
    let nt = rng.gen_range(2..=32);
    let nth = (rng.gen_range(10..=1000) / nt).max(1);
    let wt = weights(rng, nt);
    let wth = weights(rng, nth);
    let f = nonneg(rng, nt * nth);
    let g = nonneg(rng, nt * nth);
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for j in 0..nth {
        let mut mf = 0.0;
        let mut mg = 0.0;
        for i in 0..nt {
            let (a, b) = (f[j * nt + i], g[j * nt + i]);
            mf += wt[i] * a;
            mg += wt[i] * b;
            rhs += wth[j] * wt[i] * (a - b).abs();
        }
        lhs += wth[j] * (mf - mg).abs();
    }
    Instance { lhs, rhs, text: format!("trial={trial} nt={nt} ntheta={nth}") }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thousand_trials_each_hold() {
        for lemma in Lemma::ALL {
            let r = lemma_property_check(lemma, 1000, 17).unwrap();
            assert!(r.pass(), "{r:?}");
        }
    }

    #[test]
    fn equal_inputs_are_tight() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let inst = ratio_instance(&mut rng, 0);
        assert_eq!((inst.lhs, inst.rhs), (0.0, 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let inst = indicator_instance(&mut rng, 10);
        assert!(inst.lhs <= inst.rhs);
    }

    #[test]
    fn names_round_trip_and_zero_trials_rejected() {
        for l in Lemma::ALL {
            assert_eq!(Lemma::parse(l.as_str()).unwrap(), l);
        }
        assert!(lemma_property_check(Lemma::RatioBound, 0, 0).is_err());
    }
}
