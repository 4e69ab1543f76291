//! Tunneling between two EC3 solutions.
//!
//! Bits on which the solutions agree are frozen; the remaining `n` bits form
//! an Agree instance (pairwise equality constraints) whose two solutions are
//! all-0 and all-1. The leading amplitude between them is `λ^n` times
//!
//! ```text
//! Σ_{p ∈ S_n} Π_{j=1}^{n-1} 1 / E_j(p),   E_j(p) = cut(first j bits of p)
//! ```
//!
//! which [`amplitude_dp`] evaluates over subsets instead of permutations.

use std::collections::VecDeque;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ec3::{BitString, Instance};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DP_MAX_BITS: usize = 24;
pub const BRUTEFORCE_MAX_BITS: usize = 9;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgreeInstance {
    n_bits: usize,
    /// Equality constraints `(i, j)`, `i < j`, with multiplicity.
    edges: Vec<(usize, usize)>,
    /// Original bit index of each Agree bit (empty when built directly).
    origin: Vec<usize>,
}

impl AgreeInstance {
    pub fn new(n_bits: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        let mut norm = Vec::with_capacity(edges.len());
        for (i, j) in edges {
            if i == j || i >= n_bits || j >= n_bits {
                return Err(Error::invalid(format!("bad Agree edge ({i}, {j}) for n = {n_bits}")));
            }
            norm.push((i.min(j), i.max(j)));
        }
        Ok(AgreeInstance {
            n_bits,
            edges: norm,
            origin: Vec::new(),
        })
    }

    pub fn n_bits(&self) -> usize {
        self.n_bits
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn origin(&self) -> &[usize] {
        &self.origin
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn beta(&self) -> f64 {
        self.m() as f64 / self.n_bits as f64
    }

    /// Degrees `B̃_i` with multiplicity.
    pub fn b_tilde(&self) -> Vec<u32> {
        let mut b = vec![0; self.n_bits];
        for &(i, j) in &self.edges {
            b[i] += 1;
            b[j] += 1;
        }
        b
    }

    pub fn j_tilde(&self, i: usize, j: usize) -> u32 {
        let key = (i.min(j), i.max(j));
        self.edges.iter().filter(|&&e| e == key).count() as u32
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_bits];
        for &(i, j) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        adj
    }

    /// Connected components, each sorted, ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let adj = self.adjacency();
        let mut seen = vec![false; self.n_bits];
        let mut out = Vec::new();
        for start in 0..self.n_bits {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut comp = vec![start];
            let mut stack = vec![start];
            while let Some(v) = stack.pop() {
                for &w in &adj[v] {
                    if !seen[w] {
                        seen[w] = true;
                        comp.push(w);
                        stack.push(w);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        self.n_bits > 0 && self.components().len() == 1
    }

    /// Sub-instance induced on `bits` (re-indexed in the given order).
    pub fn induced(&self, bits: &[usize]) -> AgreeInstance {
        let mut pos = vec![usize::MAX; self.n_bits];
        for (k, &b) in bits.iter().enumerate() {
            pos[b] = k;
        }
        let edges = self
            .edges
            .iter()
            .filter(|&&(i, j)| pos[i] != usize::MAX && pos[j] != usize::MAX)
            .map(|&(i, j)| (pos[i].min(pos[j]), pos[i].max(pos[j])))
            .collect();
        let origin = if self.origin.is_empty() {
            Vec::new()
        } else {
            bits.iter().map(|&b| self.origin[b]).collect()
        };
        AgreeInstance {
            n_bits: bits.len(),
            edges,
            origin,
        }
    }

    /// Number of constraints violated when exactly the bits in `mask` are 1.
    pub fn cut(&self, mask: u64) -> u32 {
        self.edges
            .iter()
            .filter(|&&(i, j)| (mask >> i ^ mask >> j) & 1 == 1)
            .count() as u32
    }
}

/// Reduce the pair `(a, b)` of solutions to an Agree instance on the bits
/// where they differ.
pub fn reduce(instance: &Instance, a: &BitString, b: &BitString) -> Result<AgreeInstance> {
    for x in [a, b] {
        if crate::ec3::cost(instance, x)? != 0 {
            return Err(Error::invalid(format!("{x} is not a solution")));
        }
    }
    if a == b {
        return Err(Error::invalid("the two solutions are identical"));
    }
    let n = instance.n_bits();
    let relevant: Vec<usize> = (0..n).filter(|&i| a.get(i) != b.get(i)).collect();
    let mut pos = vec![usize::MAX; n];
    for (k, &bit) in relevant.iter().enumerate() {
        pos[bit] = k;
    }
    let mut edges = Vec::new();
    for c in instance.clauses() {
        let rel: Vec<usize> = c.bits().into_iter().filter(|&bit| pos[bit] != usize::MAX).collect();
        match rel.len() {
            0 => {}
            2 => {
                let (i, j) = (rel[0], rel[1]);
                if a.get(i) == a.get(j) || b.get(i) == b.get(j) {
                    return Err(Error::InternalInconsistency(format!(
                        "clause {c} has relevant bits that agree"
                    )));
                }
                edges.push((pos[i], pos[j]));
            }
            k => {
                return Err(Error::InternalInconsistency(format!(
                    "clause {c} has {k} differing bits"
                )))
            }
        }
    }
    // Two-colour the Disagree graph; negating one colour per component turns
    // every x_i ≠ x_j into x_i = x_j.
    let m = relevant.len();
    let mut adj = vec![Vec::new(); m];
    for &(i, j) in &edges {
        adj[i].push(j);
        adj[j].push(i);
    }
    let mut colour = vec![u8::MAX; m];
    for s in 0..m {
        if colour[s] != u8::MAX {
            continue;
        }
        colour[s] = 0;
        let mut q = VecDeque::from([s]);
        while let Some(v) = q.pop_front() {
            for &w in &adj[v] {
                if colour[w] == u8::MAX {
                    colour[w] = 1 - colour[v];
                    q.push_back(w);
                } else if colour[w] == colour[v] {
                    return Err(Error::InternalInconsistency(
                        "Disagree graph is not bipartite".into(),
                    ));
                }
            }
        }
    }
    let edges = edges.into_iter().map(|(i, j)| (i.min(j), i.max(j))).collect();
    Ok(AgreeInstance {
        n_bits: m,
        edges,
        origin: relevant,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeResult<S> {
    pub coefficient: S,
    pub order: usize,
}

impl<S: Scalar> AmplitudeResult<S> {
    pub fn amplitude_at(&self, lambda: f64) -> f64 {
        lambda.powi(self.order as i32) * self.coefficient.to_f64()
    }
}

fn check_size(agree: &AgreeInstance, limit: usize) -> Result<()> {
    if agree.n_bits == 0 {
        return Err(Error::invalid("Agree instance has no bits"));
    }
    if agree.n_bits > limit {
        return Err(Error::ResourceLimit(format!(
            "n = {} exceeds the limit {limit}",
            agree.n_bits
        )));
    }
    Ok(())
}

fn cut_table(agree: &AgreeInstance) -> Vec<u32> {
    let n = agree.n_bits;
    let mut cut = vec![0u32; 1 << n];
    let adj = agree.adjacency();
    // cut(S ∪ {i}) = cut(S) + deg(i) − 2·|edges from i into S|.
    for mask in 1usize..1 << n {
        let i = mask.trailing_zeros() as usize;
        let rest = mask & (mask - 1);
        let inside = adj[i].iter().filter(|&&w| rest >> w & 1 == 1).count() as u32;
        cut[mask] = cut[rest] + adj[i].len() as u32 - 2 * inside;
    }
    cut
}

/// Sum over all flip orders by dynamic programming over flipped sets.
pub fn amplitude_dp<S: Scalar>(agree: &AgreeInstance) -> Result<AmplitudeResult<S>> {
    check_size(agree, DP_MAX_BITS)?;
    let n = agree.n_bits;
    let full = (1usize << n) - 1;
    let cut = cut_table(agree);
    let mut g: Vec<S> = vec![S::zero(); 1 << n];
    g[0] = S::one();
    // Masks in increasing numeric order visit every subset after its subsets.
    for mask in 1..full {
        if cut[mask] == 0 {
            let subset = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
            return Err(Error::DegeneratePath { subset });
        }
        let mut acc = S::zero();
        let mut m = mask;
        while m != 0 {
            let i = m.trailing_zeros();
            acc = acc + g[mask ^ (1 << i)].clone();
            m &= m - 1;
        }
        g[mask] = acc / S::from_i64(cut[mask] as i64);
    }
    let coefficient = (0..n).fold(S::zero(), |acc, i| acc + g[full ^ (1 << i)].clone());
    Ok(AmplitudeResult {
        coefficient,
        order: n,
    })
}

/// Literal sum over the `n!` flip orders.
pub fn amplitude_bruteforce<S: Scalar>(agree: &AgreeInstance) -> Result<AmplitudeResult<S>> {
    check_size(agree, BRUTEFORCE_MAX_BITS)?;
    let n = agree.n_bits;

    fn rec<S: Scalar>(agree: &AgreeInstance, n: usize, mask: u64, depth: usize, acc: S, total: &mut S) -> Result<()> {
        if depth == n - 1 {
            *total = total.clone() + acc;
            return Ok(());
        }
        for i in 0..n {
            if mask >> i & 1 == 0 {
                let next = mask | 1 << i;
                let e = agree.cut(next);
                if e == 0 {
                    let subset = (0..n).filter(|&k| next >> k & 1 == 1).collect();
                    return Err(Error::DegeneratePath { subset });
                }
                rec(agree, n, next, depth + 1, acc.clone() / S::from_i64(e as i64), total)?;
            }
        }
        Ok(())
    }

    let mut total = S::zero();
    // The last flip is forced, so each depth-(n-1) prefix is one permutation.
    rec(agree, n, 0, 0, S::one(), &mut total)?;
    Ok(AmplitudeResult {
        coefficient: total,
        order: n,
    })
}

/// Per-component amplitudes for a possibly disconnected instance: orders add
/// and coefficients multiply.
pub fn amplitude_by_components<S: Scalar>(agree: &AgreeInstance) -> Result<AmplitudeResult<S>> {
    let mut coefficient = S::one();
    for comp in agree.components() {
        let r = amplitude_dp::<S>(&agree.induced(&comp))?;
        coefficient = coefficient * r.coefficient;
    }
    Ok(AmplitudeResult {
        coefficient,
        order: agree.n_bits,
    })
}

/// `½ (2λ)^n`.
pub fn upper_bound(n: usize, lambda: f64) -> f64 {
    0.5 * (2.0 * lambda).powi(n as i32)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierProfile {
    /// `⟨E_j⟩` for `j = 1..n-1`.
    pub mean_e: Vec<f64>,
    /// `2β/e` with `β = m/n`.
    pub lambda_a: f64,
}

impl BarrierProfile {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("j,mean_e\n");
        for (k, e) in self.mean_e.iter().enumerate() {
            let _ = writeln!(s, "{},{}", k + 1, e);
        }
        s
    }
}

/// Average of `E_j` over uniformly random flip orders:
/// `2 m j (n − j) / (n (n − 1))`.
pub fn barrier_profile(agree: &AgreeInstance) -> Result<BarrierProfile> {
    let n = agree.n_bits;
    if n < 2 {
        return Err(Error::invalid("barrier profile needs n >= 2"));
    }
    let (nf, mf) = (n as f64, agree.m() as f64);
    let mean_e = (1..n)
        .map(|j| {
            let jf = j as f64;
            2.0 * mf * jf * (nf - jf) / (nf * (nf - 1.0))
        })
        .collect();
    Ok(BarrierProfile {
        mean_e,
        lambda_a: 2.0 * agree.beta() / std::f64::consts::E,
    })
}

/// Sample mean and standard error of `E_j` over random flip orders.
pub fn barrier_monte_carlo(agree: &AgreeInstance, samples: usize, seed: u64) -> Result<Vec<(f64, f64)>> {
    let n = agree.n_bits;
    if n < 2 || samples < 2 {
        return Err(Error::invalid("Monte-Carlo barrier needs n >= 2 and >= 2 samples"));
    }
    if n > 64 {
        return Err(Error::ResourceLimit("Monte-Carlo barrier limited to n <= 64".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = vec![0.0; n - 1];
    let mut sum2 = vec![0.0; n - 1];
    let mut perm: Vec<usize> = (0..n).collect();
    for _ in 0..samples {
        perm.shuffle(&mut rng);
        let mut mask = 0u64;
        for j in 0..n - 1 {
            mask |= 1 << perm[j];
            let e = agree.cut(mask) as f64;
            sum[j] += e;
            sum2[j] += e * e;
        }
    }
    let k = samples as f64;
    Ok(sum
        .iter()
        .zip(&sum2)
        .map(|(&s, &s2)| {
            let mean = s / k;
            let var = ((s2 - k * mean * mean) / (k - 1.0)).max(0.0);
            (mean, (var / k).sqrt())
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TypicalityProfile {
    pub p00: f64,
    pub p01: f64,
    pub p10: f64,
    pub p11: f64,
    pub typ_n: f64,
    pub typ_m: f64,
    pub typ_beta: f64,
    pub lambda_a: f64,
}

/// Typical Agree parameters for two independent solutions of a random
/// instance at ratio `alpha` with `n_bits` bits.
pub fn typicality(alpha: f64, n_bits: usize) -> Result<TypicalityProfile> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::invalid(format!("alpha must be positive, got {alpha}")));
    }
    let nf = n_bits as f64;
    let e3a = (3.0 * alpha).exp();
    let typ_beta = 1.5 * alpha * e3a / (e3a - 1.0);
    Ok(TypicalityProfile {
        p00: 4.0 / 9.0,
        p01: 2.0 / 9.0,
        p10: 2.0 / 9.0,
        p11: 1.0 / 9.0,
        typ_n: 4.0 / 9.0 * nf * (1.0 - (-3.0 * alpha).exp()),
        typ_m: 2.0 * alpha * nf / 3.0,
        typ_beta,
        lambda_a: 2.0 * typ_beta / std::f64::consts::E,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapEstimate {
    pub value: f64,
    /// `λ_c >= λ_a`: no exponential suppression is predicted.
    pub not_suppressed: bool,
}

/// `(λ_c / λ_a)^n`.
pub fn gap_estimate(lambda_c: f64, lambda_a: f64, n: usize) -> Result<GapEstimate> {
    if !(lambda_c > 0.0 && lambda_a > 0.0) {
        return Err(Error::invalid("gap estimate needs positive λ_c and λ_a"));
    }
    Ok(GapEstimate {
        value: (lambda_c / lambda_a).powi(n as i32),
        not_suppressed: lambda_c >= lambda_a,
    })
}

/// Uniform random labelled tree (Prüfer sequence).
pub fn random_tree<R: Rng + ?Sized>(n: usize, rng: &mut R) -> AgreeInstance {
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    if n == 2 {
        edges.push((0, 1));
    } else if n > 2 {
        let seq: Vec<usize> = (0..n - 2).map(|_| rng.random_range(0..n)).collect();
        let mut degree = vec![1usize; n];
        for &v in &seq {
            degree[v] += 1;
        }
        for &v in &seq {
            let leaf = (0..n).find(|&u| degree[u] == 1).expect("a leaf exists");
            edges.push((leaf.min(v), leaf.max(v)));
            degree[leaf] -= 1;
            degree[v] -= 1;
        }
        let rest: Vec<usize> = (0..n).filter(|&u| degree[u] == 1).collect();
        edges.push((rest[0], rest[1]));
    }
    AgreeInstance {
        n_bits: n,
        edges,
        origin: Vec::new(),
    }
}

/// Random tree plus `extra` uniformly drawn edges (duplicates allowed).
pub fn random_connected<R: Rng + ?Sized>(n: usize, extra: usize, rng: &mut R) -> AgreeInstance {
    let mut g = random_tree(n, rng);
    if n >= 2 {
        for _ in 0..extra {
            let i = rng.random_range(0..n);
            let mut j = rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            g.edges.push((i.min(j), i.max(j)));
        }
    }
    g
}

pub fn format_agree(agree: &AgreeInstance) -> String {
    let mut s = format!("p agree {} {}\n", agree.n_bits, agree.m());
    for &(i, j) in &agree.edges {
        let _ = writeln!(s, "{} {}", i + 1, j + 1);
    }
    s
}

pub fn parse_agree(text: &str) -> Result<AgreeInstance> {
    let mut header: Option<(usize, usize)> = None;
    let mut edges = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let t = raw.trim();
        if t.is_empty() || t == "c" || t.starts_with("c ") {
            continue;
        }
        let err = |message: String| Error::Parse { line, message };
        let fields: Vec<&str> = t.split_whitespace().collect();
        match header {
            None => {
                if fields.len() != 4 || fields[0] != "p" || fields[1] != "agree" {
                    return Err(err("expected header `p agree <n> <m>`".into()));
                }
                let n = fields[2].parse().map_err(|_| err("bad n".into()))?;
                let m = fields[3].parse().map_err(|_| err("bad m".into()))?;
                header = Some((n, m));
            }
            Some((n, _)) => {
                if fields.len() != 2 {
                    return Err(err("expected `<i> <j>`".into()));
                }
                let parse = |s: &str| -> Result<usize> {
                    let v: usize = s.parse().map_err(|_| err(format!("bad index `{s}`")))?;
                    if v == 0 || v > n {
                        return Err(err(format!("index {v} out of range 1..={n}")));
                    }
                    Ok(v - 1)
                };
                let (i, j) = (parse(fields[0])?, parse(fields[1])?);
                if i == j {
                    return Err(err("edge joins a bit to itself".into()));
                }
                edges.push((i.min(j), i.max(j)));
            }
        }
    }
    let (n, m) = header.ok_or(Error::Parse {
        line: 0,
        message: "missing header".into(),
    })?;
    if edges.len() != m {
        return Err(Error::Parse {
            line: 0,
            message: format!("header declares {m} edges, found {}", edges.len()),
        });
    }
    AgreeInstance::new(n, edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    type Q = BigRational;

    fn bits(s: &str) -> BitString {
        s.parse().unwrap()
    }

    fn cycle(n: usize) -> AgreeInstance {
        AgreeInstance::new(n, (0..n).map(|i| (i, (i + 1) % n)).collect()).unwrap()
    }

    #[test]
    fn ring_reduction() {
        let inst = Instance::from_triples(6, &[[1, 2, 3], [3, 4, 5], [5, 6, 1]]).unwrap();
        let agree = reduce(&inst, &bits("100100"), &bits("010101")).unwrap();
        assert_eq!(agree.origin(), &[0, 1, 5]);
        let mut e = agree.edges().to_vec();
        e.sort();
        assert_eq!(e, vec![(0, 1), (0, 2)]);
        assert!(agree.is_connected());
        assert!(reduce(&inst, &bits("100100"), &bits("100100")).is_err());
        let r = amplitude_dp::<Q>(&agree).unwrap();
        assert_eq!(r.coefficient, Q::from_integer(4.into()));
    }

    #[test]
    fn edgeless_reduction() {
        let inst = Instance::from_triples(6, &[[1, 2, 3], [4, 5, 6]]).unwrap();
        let agree = reduce(&inst, &bits("100100"), &bits("010010")).unwrap();
        let agree2 = reduce(&inst, &bits("100100"), &bits("001100")).unwrap();
        assert_eq!(agree.n_bits(), 4);
        assert!(!agree.is_connected());
        assert!(agree2.is_connected());
        assert!(matches!(
            amplitude_dp::<Q>(&agree),
            Err(Error::DegeneratePath { .. })
        ));
        let by = amplitude_by_components::<Q>(&agree).unwrap();
        assert_eq!(by.coefficient, Q::from_integer(4.into()));
        assert_eq!(by.order, 4);
    }

    #[test]
    fn small_coefficients() {
        let edge = AgreeInstance::new(2, vec![(0, 1)]).unwrap();
        assert_eq!(amplitude_dp::<Q>(&edge).unwrap().coefficient, Q::from_integer(2.into()));
        assert_eq!(amplitude_bruteforce::<Q>(&edge).unwrap().coefficient, Q::from_integer(2.into()));
        let c4 = cycle(4);
        let want = Q::new(5.into(), 2.into());
        assert_eq!(amplitude_dp::<Q>(&c4).unwrap().coefficient, want);
        assert_eq!(amplitude_bruteforce::<Q>(&c4).unwrap().coefficient, want);
        assert!(amplitude_bruteforce::<Q>(&cycle(10)).is_err());
    }

    #[test]
    fn trees_give_powers_of_two() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for n in 2..=12 {
            let t = random_tree(n, &mut rng);
            assert!(t.is_connected() && t.m() == n - 1);
            let c = amplitude_dp::<Q>(&t).unwrap().coefficient;
            assert_eq!(c, Q::from_integer((1i64 << (n - 1)).into()), "n = {n}");
        }
    }

    #[test]
    fn bounds_and_estimates() {
        assert_eq!(upper_bound(2, 1.0), 2.0);
        assert!((upper_bound(10, 0.4) - 0.5 * 0.8f64.powi(10)).abs() < 1e-15);
        let g = gap_estimate(0.81, 0.81, 10).unwrap();
        assert!(g.not_suppressed && g.value == 1.0);
        let g = gap_estimate(0.52, 0.81, 60).unwrap();
        assert!((g.value - (0.52f64 / 0.81).powi(60)).abs() < 1e-25);
        let g2 = gap_estimate(0.52, 0.81, 120).unwrap();
        assert!((g2.value / (g.value * g.value) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn barrier_closed_form() {
        let p = barrier_profile(&cycle(4)).unwrap();
        assert_eq!(p.mean_e.len(), 3);
        assert!((p.mean_e[0] - 2.0).abs() < 1e-12);
        assert!((p.mean_e[1] - 8.0 / 3.0).abs() < 1e-12);
        assert!((p.mean_e[2] - 2.0).abs() < 1e-12);
        // Exhaustive average over the 24 orders of the 4-cycle.
        let c4 = cycle(4);
        let mut sums = [0.0; 3];
        let mut perm = [0usize, 1, 2, 3];
        let mut count = 0.0;
        permute(&mut perm, 0, &mut |p| {
            let mut mask = 0u64;
            for j in 0..3 {
                mask |= 1 << p[j];
                sums[j] += c4.cut(mask) as f64;
            }
            count += 1.0;
        });
        for j in 0..3 {
            assert!((sums[j] / count - p.mean_e[j]).abs() < 1e-12);
        }
        let big = random_connected(20, 1, &mut ChaCha8Rng::seed_from_u64(0));
        let pb = barrier_profile(&big).unwrap();
        assert!((pb.mean_e[9] - 2000.0 / 190.0).abs() < 1e-12);
        assert!(pb.to_csv().starts_with("j,mean_e\n1,"));
    }

    fn permute(p: &mut [usize], k: usize, f: &mut dyn FnMut(&[usize])) {
        if k == p.len() {
            f(p);
            return;
        }
        for i in k..p.len() {
            p.swap(k, i);
            permute(p, k + 1, f);
            p.swap(k, i);
        }
    }

    #[test]
    fn typical_lambda_a() {
        let t = typicality(0.62, 300).unwrap();
        assert!((t.lambda_a - 0.81).abs() < 0.005);
        assert!((t.p00 + t.p01 + t.p10 + t.p11 - 1.0).abs() < 1e-15);
        assert!((t.typ_m - 124.0).abs() < 1e-9);
    }

    #[test]
    fn agree_file_round_trip() {
        let g = random_connected(7, 4, &mut ChaCha8Rng::seed_from_u64(2));
        let text = format_agree(&g);
        assert_eq!(parse_agree(&text).unwrap(), g);
        assert!(matches!(
            parse_agree("p agree 3 1\n1 4\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(parse_agree("p agree 3 2\n1 2\n").is_err());
    }
}
