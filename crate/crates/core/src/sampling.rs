//! Index-selection rules: fixed distributions, max-distance, loss-proportional, and capped.

use std::fmt;
use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::sketch::PrecomputedOperators;

const SIMPLEX_TOL: f64 = 1e-12;

/// Seeded, counter-based random stream. Identical `(seed, stream)` pairs give
/// identical draws on every platform.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    /// An independent stream for the same seed.
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `0..n` (multiply-shift; `n >= 1`).
    pub fn below(&mut self, n: usize) -> usize {
        ((self.rng.next_u64() as u128 * n as u128) >> 64) as usize
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Checks that `p` has length `q` and lies in the probability simplex.
pub fn validate_probabilities(p: &[f64], q: usize) -> Result<()> {
    if p.len() != q {
        return Err(Error::invalid(format!(
            "probability vector has length {}, expected {q}",
            p.len()
        )));
    }
    if p.iter().any(|&v| !v.is_finite() || v < 0.0) {
        return Err(Error::invalid("probabilities must be finite and nonnegative"));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::invalid(format!("probabilities sum to {sum}, not 1")));
    }
    Ok(())
}

/// Vose alias table: O(q) construction, O(1) draws.
#[derive(Clone, Debug)]
pub struct AliasTable {
    prob: Vec<f64>,
    alias: Vec<usize>,
}

impl AliasTable {
    pub fn new(p: &[f64]) -> Result<Self> {
        validate_probabilities(p, p.len())?;
        let q = p.len();
        if q == 0 {
            return Err(Error::invalid("cannot sample from an empty distribution"));
        }
        let heaviest = (0..q).fold(0, |best, i| if p[i] > p[best] { i } else { best });
        let mut scaled: Vec<f64> = p.iter().map(|&v| v * q as f64).collect();
        let mut prob = vec![0.0; q];
        let mut alias = vec![heaviest; q];
        let (mut small, mut large): (Vec<usize>, Vec<usize>) = (0..q).partition(|&i| scaled[i] < 1.0);
        while let (Some(&s), Some(&l)) = (small.last(), large.last()) {
            small.pop();
            prob[s] = scaled[s];
            alias[s] = l;
            scaled[l] -= 1.0 - scaled[s];
            if scaled[l] < 1.0 {
                large.pop();
                small.push(l);
            }
        }
        for l in large {
            prob[l] = 1.0;
        }
        // rounding leftovers; zero-probability entries must stay unreachable
        for s in small {
            prob[s] = if p[s] > 0.0 { 1.0 } else { 0.0 };
        }
        Ok(Self { prob, alias })
    }

    pub fn len(&self) -> usize {
        self.prob.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prob.is_empty()
    }

    pub fn sample(&self, rng: &mut RngStream) -> usize {
        let i = rng.below(self.prob.len());
        if rng.next_f64() < self.prob[i] {
            i
        } else {
            self.alias[i]
        }
    }
}

/// One draw from `p`. Builds a throwaway alias table; prefer [`AliasTable`] in loops.
pub fn sample_fixed(p: &[f64], rng: &mut RngStream) -> Result<usize> {
    Ok(AliasTable::new(p)?.sample(rng))
}

/// Smallest index attaining `max f`, or `None` once `max f <= tol`.
pub fn select_max_distance(f: &[f64], tol: f64) -> Option<usize> {
    let mut best = 0;
    for (i, &v) in f.iter().enumerate() {
        if v > f[best] {
            best = i;
        }
    }
    (f.get(best).copied().unwrap_or(0.0) > tol).then_some(best)
}

/// Draws `i` with probability `f_i / sum f` by sequential search, or `None` once `sum f <= tol`.
pub fn sample_proportional(f: &[f64], tol: f64, rng: &mut RngStream) -> Option<usize> {
    let total: f64 = f.iter().sum();
    if total <= tol {
        return None;
    }
    let r = rng.next_f64() * total;
    let mut acc = 0.0;
    let mut last = None;
    for (i, &v) in f.iter().enumerate() {
        if v > 0.0 {
            acc += v;
            last = Some(i);
            if r < acc {
                return last;
            }
        }
    }
    last
}

/// Capped rule. Returns the chosen index and the size of the admissible set
/// `W = {i : f_i >= theta max f + (1 - theta) <reference, f>}`, or `None` once `max f <= tol`.
pub fn sample_capped(
    f: &[f64],
    reference: &[f64],
    theta: f64,
    tol: f64,
    rng: &mut RngStream,
) -> Option<(usize, usize)> {
    let max = f.iter().copied().fold(0.0, f64::max);
    if max <= tol {
        return None;
    }
    if theta >= 1.0 {
        return select_max_distance(f, tol).map(|i| (i, 1));
    }
    let threshold = capped_threshold(f, reference, theta, max);
    let (mut mass, mut size) = (0.0, 0);
    for &v in f {
        if v >= threshold {
            mass += v;
            size += 1;
        }
    }
    let r = rng.next_f64() * mass;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &v) in f.iter().enumerate() {
        if v >= threshold {
            acc += v;
            last = i;
            if r < acc {
                return Some((i, size));
            }
        }
    }
    Some((last, size))
}

fn capped_threshold(f: &[f64], reference: &[f64], theta: f64, max: f64) -> f64 {
    let mean: f64 = reference.iter().zip(f).map(|(p, v)| p * v).sum();
    (theta * max + (1.0 - theta) * mean).min(max)
}

/// `1 / (1 - min_i p_i)`.
pub fn gamma(p: &[f64]) -> Result<f64> {
    validate_probabilities(p, p.len())?;
    if p.iter().any(|&v| v >= 1.0) || p.len() < 2 {
        return Err(Error::invalid("gamma needs at least two indices with positive mass left over"));
    }
    let min = p.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(1.0 / (1.0 - min))
}

/// Reference distribution for the capped rule's threshold.
#[derive(Clone, Debug, PartialEq)]
pub enum CappedReference {
    NormProportional,
    Uniform,
    Explicit(Vec<f64>),
}

/// Which sketch is used at each iteration.
#[derive(Clone, Debug, PartialEq)]
pub enum SamplingRule {
    Fixed(Vec<f64>),
    Uniform,
    /// `p_i` proportional to `||A^T S_i||^2_{B^{-1}}`.
    NormProportional,
    MaxDistance,
    ProportionalToLoss,
    Capped {
        theta: f64,
        reference: CappedReference,
    },
}

impl SamplingRule {
    pub const DEFAULT_THETA: f64 = 0.5;

    pub fn capped(theta: f64) -> Self {
        SamplingRule::Capped {
            theta,
            reference: CappedReference::NormProportional,
        }
    }

    /// Parses `uniform`, `rownorm`, `fixed:<path>`, `maxdist`, `proportional`,
    /// `capped` or `capped:<theta>`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let rule = match s {
            "uniform" => SamplingRule::Uniform,
            "rownorm" | "colnorm" | "normprop" => SamplingRule::NormProportional,
            "maxdist" => SamplingRule::MaxDistance,
            "proportional" => SamplingRule::ProportionalToLoss,
            "capped" => SamplingRule::capped(Self::DEFAULT_THETA),
            _ => {
                if let Some(path) = s.strip_prefix("fixed:") {
                    SamplingRule::Fixed(read_probabilities(Path::new(path))?)
                } else if let Some(theta) = s.strip_prefix("capped:") {
                    let theta: f64 = theta
                        .parse()
                        .map_err(|_| Error::invalid(format!("bad capped theta '{theta}'")))?;
                    SamplingRule::capped(theta)
                } else {
                    return Err(Error::invalid(format!("unknown sampling rule '{s}'")));
                }
            }
        };
        rule.validate()?;
        Ok(rule)
    }

    fn validate(&self) -> Result<()> {
        match self {
            SamplingRule::Capped { theta, reference } => {
                if !(0.0..=1.0).contains(theta) {
                    return Err(Error::invalid(format!("capped theta {theta} outside [0, 1]")));
                }
                if let CappedReference::Explicit(p) = reference {
                    validate_probabilities(p, p.len())?;
                }
                Ok(())
            }
            SamplingRule::Fixed(p) => validate_probabilities(p, p.len()),
            _ => Ok(()),
        }
    }

    /// Whether the rule reads the current losses.
    pub fn is_adaptive(&self) -> bool {
        matches!(
            self,
            SamplingRule::MaxDistance | SamplingRule::ProportionalToLoss | SamplingRule::Capped { .. }
        )
    }

    /// Short name used for file names and reports.
    pub fn label(&self) -> String {
        match self {
            SamplingRule::Fixed(_) => "fixed".into(),
            SamplingRule::Uniform => "uniform".into(),
            SamplingRule::NormProportional => "rownorm".into(),
            SamplingRule::MaxDistance => "maxdist".into(),
            SamplingRule::ProportionalToLoss => "proportional".into(),
            SamplingRule::Capped { theta, .. } => format!("capped-{theta}"),
        }
    }
}

impl fmt::Display for SamplingRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Reads whitespace- or comma-separated probabilities.
pub fn read_probabilities(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut p = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        for tok in line.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()) {
            p.push(tok.parse::<f64>().map_err(|_| Error::Parse {
                line: line_no + 1,
                message: format!("'{tok}' is not a number"),
            })?);
        }
    }
    Ok(p)
}

/// Outcome of asking a sampler for the next index.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Draw {
    Index { index: usize, w_size: usize },
    Converged,
}

#[derive(Clone, Debug)]
enum Prepared {
    Fixed { p: Vec<f64>, table: AliasTable },
    MaxDistance,
    Proportional,
    Capped { theta: f64, reference: Vec<f64> },
}

/// A rule bound to a concrete sketch set, with any fixed distribution resolved.
#[derive(Clone, Debug)]
pub struct Sampler {
    rule: SamplingRule,
    prepared: Prepared,
}

impl Sampler {
    pub fn new(rule: &SamplingRule, ops: &PrecomputedOperators) -> Result<Self> {
        Self::with_weights(rule, ops.q(), ops.sketch_weights())
    }

    /// Binds `rule` to `q` sketches whose norm-proportional weights are `weights`.
    pub fn with_weights(rule: &SamplingRule, q: usize, weights: &[f64]) -> Result<Self> {
        rule.validate()?;
        let resolve = |r: &SamplingRule| -> Result<Vec<f64>> {
            Ok(match r {
                SamplingRule::Uniform => vec![1.0 / q as f64; q],
                SamplingRule::NormProportional => normalize(weights)?,
                SamplingRule::Fixed(p) => {
                    validate_probabilities(p, q)?;
                    p.clone()
                }
                _ => unreachable!(),
            })
        };
        let prepared = match rule {
            SamplingRule::MaxDistance => Prepared::MaxDistance,
            SamplingRule::ProportionalToLoss => Prepared::Proportional,
            SamplingRule::Capped { theta, reference } => {
                let reference = match reference {
                    CappedReference::NormProportional => resolve(&SamplingRule::NormProportional)?,
                    CappedReference::Uniform => resolve(&SamplingRule::Uniform)?,
                    CappedReference::Explicit(p) => resolve(&SamplingRule::Fixed(p.clone()))?,
                };
                Prepared::Capped {
                    theta: *theta,
                    reference,
                }
            }
            fixed => {
                let p = resolve(fixed)?;
                let table = AliasTable::new(&p)?;
                Prepared::Fixed { p, table }
            }
        };
        Ok(Self {
            rule: rule.clone(),
            prepared,
        })
    }

    pub fn rule(&self) -> &SamplingRule {
        &self.rule
    }

    pub fn is_adaptive(&self) -> bool {
        !matches!(self.prepared, Prepared::Fixed { .. })
    }

    /// The fixed distribution, or the capped reference.
    pub fn distribution(&self) -> Option<&[f64]> {
        match &self.prepared {
            Prepared::Fixed { p, .. } => Some(p),
            Prepared::Capped { reference, .. } => Some(reference),
            _ => None,
        }
    }

    /// Draws the next index. Adaptive rules need the current losses `f`.
    pub fn draw(&self, f: Option<&[f64]>, tol: f64, rng: &mut RngStream) -> Draw {
        let need = || f.expect("adaptive rules need the current losses");
        let picked = match &self.prepared {
            Prepared::Fixed { table, .. } => Some((table.sample(rng), 0)),
            Prepared::MaxDistance => select_max_distance(need(), tol).map(|i| (i, 1)),
            Prepared::Proportional => {
                let f = need();
                sample_proportional(f, tol, rng).map(|i| (i, f.iter().filter(|&&v| v > 0.0).count()))
            }
            Prepared::Capped { theta, reference } => sample_capped(need(), reference, *theta, tol, rng),
        };
        match picked {
            Some((index, w_size)) => Draw::Index { index, w_size },
            None => Draw::Converged,
        }
    }

    /// The distribution `p^k` this rule uses at losses `f`.
    pub fn probabilities(&self, f: &[f64]) -> Vec<f64> {
        let q = f.len();
        match &self.prepared {
            Prepared::Fixed { p, .. } => p.clone(),
            Prepared::MaxDistance => {
                let mut p = vec![0.0; q];
                if let Some(i) = select_max_distance(f, f64::NEG_INFINITY) {
                    p[i] = 1.0;
                }
                p
            }
            Prepared::Proportional => {
                let total: f64 = f.iter().sum();
                if total > 0.0 {
                    f.iter().map(|v| v / total).collect()
                } else {
                    vec![1.0 / q as f64; q]
                }
            }
            Prepared::Capped { theta, .. } if *theta >= 1.0 => {
                let mut p = vec![0.0; q];
                if let Some(i) = select_max_distance(f, f64::NEG_INFINITY) {
                    p[i] = 1.0;
                }
                p
            }
            Prepared::Capped { theta, reference } => {
                let max = f.iter().copied().fold(0.0, f64::max);
                if max <= 0.0 {
                    return vec![1.0 / q as f64; q];
                }
                let t = capped_threshold(f, reference, *theta, max);
                let mass: f64 = f.iter().filter(|&&v| v >= t).sum();
                f.iter().map(|&v| if v >= t { v / mass } else { 0.0 }).collect()
            }
        }
    }

    /// `sum_i p^k_i f_i`.
    pub fn expected_loss(&self, f: &[f64]) -> f64 {
        match &self.prepared {
            Prepared::Fixed { p, .. } => p.iter().zip(f).map(|(a, b)| a * b).sum(),
            Prepared::MaxDistance => f.iter().copied().fold(0.0, f64::max),
            Prepared::Proportional => {
                let total: f64 = f.iter().sum();
                if total > 0.0 {
                    f.iter().map(|v| v * v).sum::<f64>() / total
                } else {
                    0.0
                }
            }
            Prepared::Capped { .. } => {
                let p = self.probabilities(f);
                p.iter().zip(f).map(|(a, b)| a * b).sum()
            }
        }
    }
}

fn normalize(w: &[f64]) -> Result<Vec<f64>> {
    let total: f64 = w.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::invalid("norm-proportional weights are all zero"));
    }
    Ok(w.iter().map(|v| v / total).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frequencies(q: usize, draws: usize, mut draw: impl FnMut() -> usize) -> Vec<f64> {
        let mut counts = vec![0usize; q];
        for _ in 0..draws {
            counts[draw()] += 1;
        }
        counts.into_iter().map(|c| c as f64 / draws as f64).collect()
    }

    #[test]
    fn degenerate_fixed_distribution() {
        let mut rng = RngStream::new(1);
        let table = AliasTable::new(&[1.0, 0.0]).unwrap();
        assert!((0..1000).all(|_| table.sample(&mut rng) == 0));
    }

    #[test]
    fn uniform_alias_frequencies() {
        let mut rng = RngStream::new(2);
        let table = AliasTable::new(&[0.25; 4]).unwrap();
        for freq in frequencies(4, 100_000, || table.sample(&mut rng)) {
            assert!((freq - 0.25).abs() < 0.01);
        }
    }

    #[test]
    fn same_seed_same_sequence() {
        let table = AliasTable::new(&[0.1, 0.2, 0.3, 0.4]).unwrap();
        let mut a = RngStream::new(9);
        let mut b = RngStream::new(9);
        let sa: Vec<usize> = (0..200).map(|_| table.sample(&mut a)).collect();
        let sb: Vec<usize> = (0..200).map(|_| table.sample(&mut b)).collect();
        assert_eq!(sa, sb);
        assert_ne!(
            RngStream::with_stream(9, 1).next_u64(),
            RngStream::with_stream(9, 2).next_u64()
        );
    }

    #[test]
    fn fixed_rejects_non_simplex() {
        let mut rng = RngStream::new(0);
        assert!(sample_fixed(&[0.5, 0.6], &mut rng).is_err());
        assert!(sample_fixed(&[1.5, -0.5], &mut rng).is_err());
    }

    #[test]
    fn max_distance_examples() {
        assert_eq!(select_max_distance(&[1.0, 3.0, 2.0], 1e-14), Some(1));
        assert_eq!(select_max_distance(&[2.0, 2.0], 1e-14), Some(0));
        assert_eq!(select_max_distance(&[0.0, 0.0], 1e-14), None);
    }

    #[test]
    fn proportional_examples() {
        let mut rng = RngStream::new(3);
        assert!((0..1000).all(|_| sample_proportional(&[0.0, 5.0], 1e-14, &mut rng) == Some(1)));
        assert_eq!(sample_proportional(&[0.0; 3], 1e-14, &mut rng), None);
        let freq = frequencies(3, 100_000, || {
            sample_proportional(&[1.0, 1.0, 2.0], 1e-14, &mut rng).unwrap()
        });
        assert!((freq[2] - 0.5).abs() < 0.01);
    }

    #[test]
    fn capped_examples() {
        let mut rng = RngStream::new(4);
        assert_eq!(sample_capped(&[1.0, 3.0], &[0.5, 0.5], 0.5, 1e-14, &mut rng), Some((1, 1)));
        let f = [1.0, 2.0, 3.0];
        let u = [1.0 / 3.0; 3];
        let mut counts = [0usize; 3];
        for _ in 0..100_000 {
            let (i, w) = sample_capped(&f, &u, 0.0, 1e-14, &mut rng).unwrap();
            assert_eq!(w, 2);
            counts[i] += 1;
        }
        assert_eq!(counts[0], 0);
        assert!((counts[1] as f64 / 1e5 - 0.4).abs() < 0.01);
        assert_eq!(sample_capped(&[0.0, 0.0], &[0.5, 0.5], 0.5, 1e-14, &mut rng), None);
        for f in [[1.0, 5.0, 5.0], [4.0, 1.0, 0.5]] {
            let (i, w) = sample_capped(&f, &u, 1.0, 1e-14, &mut rng).unwrap();
            assert_eq!(Some(i), select_max_distance(&f, 1e-14));
            assert!(w >= 1);
        }
    }

    #[test]
    fn gamma_examples() {
        assert_eq!(gamma(&[0.5, 0.5]).unwrap(), 2.0);
        assert!((gamma(&[0.25; 4]).unwrap() - 4.0 / 3.0).abs() < 1e-15);
        assert!((gamma(&[0.9, 0.1]).unwrap() - 1.0 / 0.9).abs() < 1e-15);
        assert!(gamma(&[1.0, 0.0]).is_err());
    }

    #[test]
    fn rule_strings() {
        assert_eq!(SamplingRule::parse("uniform").unwrap(), SamplingRule::Uniform);
        assert_eq!(SamplingRule::parse("rownorm").unwrap(), SamplingRule::NormProportional);
        assert_eq!(SamplingRule::parse("maxdist").unwrap(), SamplingRule::MaxDistance);
        assert_eq!(SamplingRule::parse("proportional").unwrap(), SamplingRule::ProportionalToLoss);
        assert_eq!(SamplingRule::parse("capped:0.25").unwrap(), SamplingRule::capped(0.25));
        assert_eq!(SamplingRule::parse("capped:0.25").unwrap().label(), "capped-0.25");
        assert!(SamplingRule::parse("capped:1.5").is_err());
        assert!(SamplingRule::parse("greedy").is_err());
    }

    #[test]
    fn fixed_rule_from_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.txt");
        std::fs::write(&path, "0.25 0.75\n").unwrap();
        let rule = SamplingRule::parse(&format!("fixed:{}", path.display())).unwrap();
        assert_eq!(rule, SamplingRule::Fixed(vec![0.25, 0.75]));
        std::fs::write(&path, "0.25\nabc\n").unwrap();
        let err = SamplingRule::parse(&format!("fixed:{}", path.display())).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn expected_loss_per_rule() {
        let f = [1.0, 1.0];
        let w = [1.0, 1.0];
        let uni = Sampler::with_weights(&SamplingRule::Uniform, 2, &w).unwrap();
        assert_eq!(uni.expected_loss(&f), 1.0);
        let max = Sampler::with_weights(&SamplingRule::MaxDistance, 2, &w).unwrap();
        assert_eq!(max.expected_loss(&[1.0, 3.0]), 3.0);
        let prop = Sampler::with_weights(&SamplingRule::ProportionalToLoss, 2, &w).unwrap();
        assert_eq!(prop.expected_loss(&[1.0, 3.0]), 10.0 / 4.0);
        let cap = Sampler::with_weights(&SamplingRule::capped(0.0), 3, &[1.0; 3]).unwrap();
        assert!((cap.expected_loss(&[1.0, 2.0, 3.0]) - 13.0 / 5.0).abs() < 1e-15);
    }
}
