//! Small-`λ` expansion of the eigenvalues of `H(λ) = H_P + λ H_0`.
//!
//! Every level is labelled by the assignment `x` it reduces to at `λ = 0`.
//! The self-energy `Σ_x(E)` is a sum over closed hypercube walks starting and
//! ending at `x` that avoid `x` in between; each walk contributes a product of
//! poles `1 / (E - E_y)` over its interior states. Solving `E = E_x + Σ_x(E)`
//! order by order (Lagrange inversion) gives
//!
//! ```text
//! E^(2) = Σ2
//! E^(4) = ½ ((Σ2)²)' + Σ4
//! E^(6) = ⅙ ((Σ2)³)'' + (Σ2 Σ4)' + Σ6
//! ```
//!
//! with everything evaluated at `E = E_x`. Derivatives are carried exactly by
//! expanding each pole as a truncated Taylor series in `δ = E - E_x`.
//!
//! Grouping terms by the flip vector `P` (half the number of times each bit is
//! flipped), the coefficient `A(P)` vanishes whenever the flipped bits split
//! into groups with no clause in common. [`order_q_generic`] therefore only
//! visits flip supports that are connected in the coupling graph.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::ec3::{
    self, clause_penalty, cost, couplings, BitString, Clause, CouplingData, Instance,
};
use crate::error::{Error, Result};
use crate::scalar::{NumericMode, Scalar};

/// Highest order handled by the path-sum engine.
pub const MAX_ORDER: usize = 6;

/// Energies of the states around a reference assignment, evaluated
/// incrementally from the clauses touching the flipped bits.
pub struct Landscape<'a> {
    clauses: &'a [Clause],
    incidence: Vec<Vec<usize>>,
    x: BitString,
    weight: Vec<u32>,
    energy: u64,
}

impl<'a> Landscape<'a> {
    pub fn new(instance: &'a Instance, x: &BitString) -> Result<Self> {
        let energy = cost(instance, x)?;
        Ok(Landscape {
            clauses: instance.clauses(),
            incidence: instance.incidence(),
            x: x.clone(),
            weight: instance.clauses().iter().map(|c| c.weight(x)).collect(),
            energy,
        })
    }

    pub fn energy(&self) -> u64 {
        self.energy
    }

    pub fn reference(&self) -> &BitString {
        &self.x
    }

    /// `E_y - E_x` for `y = x` with the listed (distinct) bits flipped.
    pub fn delta(&self, flips: &[usize]) -> i64 {
        let mut touched: Vec<usize> = flips
            .iter()
            .flat_map(|&b| self.incidence[b].iter().copied())
            .collect();
        touched.sort_unstable();
        touched.dedup();
        touched
            .into_iter()
            .map(|ci| {
                let c = &self.clauses[ci];
                let mut w = self.weight[ci] as i64;
                for &b in flips {
                    if c.contains(b) {
                        w += if self.x.get(b) { -1 } else { 1 };
                    }
                }
                clause_penalty(w as u32) as i64 - clause_penalty(self.weight[ci]) as i64
            })
            .sum()
    }
}

/// Truncated power series `c0 + c1 δ + c2 δ²`.
#[derive(Debug, Clone, PartialEq)]
struct Taylor<S>([S; 3]);

impl<S: Scalar> Taylor<S> {
    fn one() -> Self {
        Taylor([S::one(), S::zero(), S::zero()])
    }

    fn zero() -> Self {
        Taylor([S::zero(), S::zero(), S::zero()])
    }

    /// `1 / (E - E_y)` expanded around `E = E_x`, where `gap = E_x - E_y`.
    fn pole(gap: i64) -> Self {
        let inv = S::from_i64(gap).recip();
        let inv2 = inv.clone() * inv.clone();
        let inv3 = inv2.clone() * inv.clone();
        Taylor([inv, -inv2, inv3])
    }

    fn mul(&self, o: &Self) -> Self {
        let [a0, a1, a2] = &self.0;
        let [b0, b1, b2] = &o.0;
        Taylor([
            a0.clone() * b0.clone(),
            a0.clone() * b1.clone() + a1.clone() * b0.clone(),
            a0.clone() * b2.clone() + a1.clone() * b1.clone() + a2.clone() * b0.clone(),
        ])
    }

    fn add_assign(&mut self, o: &Self) {
        for (a, b) in self.0.iter_mut().zip(&o.0) {
            *a = a.clone() + b.clone();
        }
    }
}

/// Flip counts per slot of a support (at most three slots below order 8).
type Key = [u8; 3];

fn key_order(k: &Key) -> usize {
    k.iter().map(|&v| v as usize).sum()
}

/// Self-energy restricted to walks inside one support, grouped by flip counts.
type Series<S> = BTreeMap<Key, Taylor<S>>;

fn series_mul<S: Scalar>(a: &Series<S>, b: &Series<S>, max_order: usize) -> Series<S> {
    let mut out: Series<S> = BTreeMap::new();
    for (ka, ta) in a {
        for (kb, tb) in b {
            let k = [ka[0] + kb[0], ka[1] + kb[1], ka[2] + kb[2]];
            if key_order(&k) > max_order {
                continue;
            }
            out.entry(k).or_insert_with(Taylor::zero).add_assign(&ta.mul(tb));
        }
    }
    out
}

/// Closed walks of length `<= max_order` using only the bits of `support`.
fn support_series<S: Scalar>(
    land: &Landscape<'_>,
    support: &[usize],
    max_order: usize,
) -> Result<Series<S>> {
    let u = support.len();
    debug_assert!(u <= 3);
    // Every non-empty sub-mask is an interior state of some closed walk of
    // length 2|mask| <= max_order, so any zero gap is fatal.
    let mut poles = Vec::with_capacity(1 << u);
    poles.push(Taylor::one());
    for mask in 1usize..(1 << u) {
        let flips: Vec<usize> = (0..u).filter(|s| mask >> s & 1 == 1).map(|s| support[s]).collect();
        let d = land.delta(&flips);
        if d == 0 {
            let mut flip_set = flips;
            flip_set.sort_unstable();
            return Err(Error::DegenerateNeighbor { flip_set });
        }
        poles.push(Taylor::<S>::pole(-d));
    }

    struct Walk<'p, S> {
        u: usize,
        max_order: usize,
        poles: &'p [Taylor<S>],
        out: Series<S>,
    }

    impl<S: Scalar> Walk<'_, S> {
        fn step(&mut self, mask: usize, len: usize, counts: Key, acc: &Taylor<S>) {
            for s in 0..self.u {
                let next = mask ^ (1 << s);
                let mut c = counts;
                c[s] += 1;
                let nlen = len + 1;
                if next == 0 {
                    self.out.entry(c).or_insert_with(Taylor::zero).add_assign(acc);
                    continue;
                }
                if self.max_order < nlen + next.count_ones() as usize {
                    continue;
                }
                let nacc = acc.mul(&self.poles[next]);
                self.step(next, nlen, c, &nacc);
            }
        }
    }

    // V = -H_0 has entries -1; even-length walks carry sign +1.
    let mut walk = Walk {
        u,
        max_order,
        poles: &poles,
        out: BTreeMap::new(),
    };
    walk.step(0, 0, [0; 3], &Taylor::one());
    Ok(walk.out)
}

/// `A(P)` for every flip vector of the support with total flips `<= max_order`.
fn support_amplitudes<S: Scalar>(sigma: &Series<S>, max_order: usize) -> BTreeMap<Key, S> {
    let mut amps: BTreeMap<Key, S> = BTreeMap::new();
    let mut power = sigma.clone();
    // E - E_x = Σ_k (1/k) [δ^{k-1}] Σ(δ)^k ; Σ starts at λ², so k <= max_order/2.
    for k in 1..=(max_order / 2).max(1) {
        if k > 1 {
            power = series_mul(&power, sigma, max_order);
        }
        let inv_k = S::ratio(1, k as i64);
        for (key, t) in &power {
            let v = inv_k.clone() * t.0[k - 1].clone();
            let e = amps.entry(*key).or_insert_with(S::zero);
            *e = e.clone() + v;
        }
    }
    amps
}

/// Which flip supports the path sum visits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Pruning {
    /// Only supports connected in the coupling graph.
    #[default]
    Connected,
    /// Every subset of bits; `O(N^{q/2})`, for validation.
    Exhaustive,
}

fn supports(cd: &CouplingData, max_size: usize, pruning: Pruning) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    match pruning {
        Pruning::Connected => ec3::for_each_connected_set(cd, max_size, |s| {
            let mut v = s.to_vec();
            v.sort_unstable();
            out.push(v);
        }),
        Pruning::Exhaustive => {
            fn rec(n: usize, start: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
                for v in start..n {
                    cur.push(v);
                    out.push(cur.clone());
                    if cur.len() < max {
                        rec(n, v + 1, max, cur, out);
                    }
                    cur.pop();
                }
            }
            rec(cd.n_bits(), 0, max_size, &mut Vec::new(), &mut out);
        }
    }
    out
}

fn check_order(q: usize) -> Result<()> {
    if q == 0 || q > MAX_ORDER {
        return Err(Error::invalid(format!(
            "perturbative order must be in 1..={MAX_ORDER}, got {q}"
        )));
    }
    Ok(())
}

/// Accumulates `Σ_{S(P) = S} A(P)` per order over the given supports.
fn orders_over_supports<S: Scalar>(
    land: &Landscape<'_>,
    supports: &[Vec<usize>],
    max_order: usize,
) -> Result<Vec<S>> {
    let mut by_order = vec![S::zero(); max_order + 1];
    for sup in supports {
        let sigma = support_series::<S>(land, sup, max_order)?;
        for (key, a) in support_amplitudes(&sigma, max_order) {
            if key[..sup.len()].iter().all(|&c| c > 0) {
                let q = key_order(&key);
                by_order[q] = by_order[q].clone() + a;
            }
        }
    }
    Ok(by_order)
}

/// `E_x^(q)` by connected-support path enumeration.
pub fn order_q_generic<S: Scalar>(instance: &Instance, x: &BitString, q: usize) -> Result<S> {
    order_q_generic_with(instance, x, q, Pruning::Connected)
}

pub fn order_q_generic_with<S: Scalar>(
    instance: &Instance,
    x: &BitString,
    q: usize,
    pruning: Pruning,
) -> Result<S> {
    check_order(q)?;
    let land = Landscape::new(instance, x)?;
    let cd = couplings(instance);
    let sups = supports(&cd, q / 2, pruning);
    let by_order = orders_over_supports::<S>(&land, &sups, q)?;
    Ok(by_order[q].clone())
}

/// Half flip counts per bit, `p_i`, for one group of walks.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FlipVector {
    /// `(bit, p_i)` with `p_i > 0`, ascending by bit.
    pub entries: Vec<(usize, u32)>,
}

impl FlipVector {
    pub fn support(&self) -> Vec<usize> {
        self.entries.iter().map(|&(b, _)| b).collect()
    }

    /// `Σ_i p_i`, i.e. half the perturbative order.
    pub fn half_order(&self) -> u32 {
        self.entries.iter().map(|&(_, p)| p).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlipAmplitude<S> {
    pub flips: FlipVector,
    /// Whether the support is connected in the coupling graph.
    pub connected: bool,
    pub value: S,
}

/// Every coefficient `A(P)` of order `q` over all supports of size `<= q/2`,
/// connected or not.
pub fn flip_amplitudes<S: Scalar>(
    instance: &Instance,
    x: &BitString,
    q: usize,
) -> Result<Vec<FlipAmplitude<S>>> {
    check_order(q)?;
    let land = Landscape::new(instance, x)?;
    let cd = couplings(instance);
    let mut out = Vec::new();
    for sup in supports(&cd, q / 2, Pruning::Exhaustive) {
        let connected = ec3::is_connected_set(&cd, &sup);
        let sigma = support_series::<S>(&land, &sup, q)?;
        for (key, value) in support_amplitudes(&sigma, q) {
            let full = key[..sup.len()].iter().all(|&c| c > 0);
            if full && key_order(&key) == q {
                let entries = sup
                    .iter()
                    .zip(key.iter())
                    .map(|(&b, &c)| (b, c as u32 / 2))
                    .collect();
                out.push(FlipAmplitude {
                    flips: FlipVector { entries },
                    connected,
                    value,
                });
            }
        }
    }
    Ok(out)
}

/// `E_x` and its first non-zero corrections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionSeries<S> {
    pub mode: NumericMode,
    pub e0: u64,
    pub e2: S,
    pub e4: S,
    /// Absent when the series was computed through order 4 only.
    pub e6: Option<S>,
}

impl<S: Scalar> CorrectionSeries<S> {
    /// Truncated level `E_x(λ)` through the available orders.
    pub fn eval(&self, lambda: f64) -> f64 {
        let l2 = lambda * lambda;
        let mut e = self.e0 as f64 + l2 * self.e2.to_f64() + l2 * l2 * self.e4.to_f64();
        if let Some(e6) = &self.e6 {
            e += l2 * l2 * l2 * e6.to_f64();
        }
        e
    }

    pub fn to_f64(&self) -> CorrectionSeries<f64> {
        CorrectionSeries {
            mode: self.mode,
            e0: self.e0,
            e2: self.e2.to_f64(),
            e4: self.e4.to_f64(),
            e6: self.e6.as_ref().map(|v| v.to_f64()),
        }
    }
}

/// Corrections through order 4 or 6 in a single pass over the supports.
pub fn correction_series<S: Scalar>(
    instance: &Instance,
    x: &BitString,
    max_order: usize,
) -> Result<CorrectionSeries<S>> {
    if max_order != 4 && max_order != 6 {
        return Err(Error::invalid("correction series are computed through order 4 or 6"));
    }
    let land = Landscape::new(instance, x)?;
    let cd = couplings(instance);
    let sups = supports(&cd, max_order / 2, Pruning::Connected);
    let by_order = orders_over_supports::<S>(&land, &sups, max_order)?;
    Ok(CorrectionSeries {
        mode: S::MODE,
        e0: land.energy(),
        e2: by_order[2].clone(),
        e4: by_order[4].clone(),
        e6: (max_order == 6).then(|| by_order[6].clone()),
    })
}

fn require_solution(instance: &Instance, x: &BitString) -> Result<()> {
    if cost(instance, x)? != 0 {
        return Err(Error::invalid(format!("{x} is not a solution")));
    }
    Ok(())
}

fn positive_counts(cd: &CouplingData) -> Result<()> {
    match cd.b().iter().position(|&b| b == 0) {
        Some(bit) => Err(Error::DegenerateInstance { bit }),
        None => Ok(()),
    }
}

/// `E_x^(2) = -Σ_i 1/B_i` for a solution `x`.
pub fn order2_solution<S: Scalar>(instance: &Instance, x: &BitString) -> Result<S> {
    require_solution(instance, x)?;
    let cd = couplings(instance);
    positive_counts(&cd)?;
    Ok(cd
        .b()
        .iter()
        .fold(S::zero(), |acc, &b| acc - S::from_i64(b as i64).recip()))
}

fn pair_weight<S: Scalar>(bi: u32, bj: u32) -> S {
    let s = S::from_i64(bi as i64).recip() + S::from_i64(bj as i64).recip();
    s.clone() * s
}

/// `E^x_ij` for every coupled pair, or the first zero (a solution at
/// Hamming distance 2).
fn pair_energies(land: &Landscape<'_>, cd: &CouplingData) -> Result<Vec<((usize, usize), i64)>> {
    cd.edges()
        .map(|(i, j)| {
            let e = land.energy() as i64 + land.delta(&[i, j]);
            if e == 0 {
                Err(Error::DegenerateNeighbor {
                    flip_set: vec![i, j],
                })
            } else {
                Ok(((i, j), e))
            }
        })
        .collect()
}

/// Closed form for `E_x^(4)` of a solution:
/// `Σ_i 1/B_i³ + Σ_{i<j, J_ij≠0} (1/B_i + 1/B_j)² (1/(B_i+B_j) - 1/E^x_ij)`.
pub fn order4_solution<S: Scalar>(instance: &Instance, x: &BitString) -> Result<S> {
    require_solution(instance, x)?;
    let cd = couplings(instance);
    positive_counts(&cd)?;
    let land = Landscape::new(instance, x)?;
    let b = cd.b();
    let mut total = b.iter().fold(S::zero(), |acc, &v| {
        let bi = S::from_i64(v as i64);
        acc + (bi.clone() * bi.clone() * bi).recip()
    });
    for ((i, j), e) in pair_energies(&land, &cd)? {
        let sum = S::from_i64((b[i] + b[j]) as i64).recip();
        total = total + pair_weight::<S>(b[i], b[j]) * (sum - S::from_i64(e).recip());
    }
    Ok(total)
}

/// Splitting corrections between two solutions `a` and `b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplittingResult<S> {
    pub mode: NumericMode,
    /// `E_a^(4) - E_b^(4)`.
    pub e12_4: S,
    /// `E_a^(6) - E_b^(6)`.
    pub e12_6: S,
    pub hamming_n: usize,
}

pub fn splitting<S: Scalar>(
    instance: &Instance,
    a: &BitString,
    b: &BitString,
) -> Result<SplittingResult<S>> {
    require_solution(instance, a)?;
    require_solution(instance, b)?;
    let hamming_n = crate::dpll::hamming(a, b)?;
    let cd = couplings(instance);
    positive_counts(&cd)?;
    let la = Landscape::new(instance, a)?;
    let lb = Landscape::new(instance, b)?;
    let ea = pair_energies(&la, &cd)?;
    let eb = pair_energies(&lb, &cd)?;
    let bc = cd.b();
    let e12_4 = ea.iter().zip(&eb).fold(S::zero(), |acc, (&((i, j), xa), &(_, xb))| {
        acc + pair_weight::<S>(bc[i], bc[j]) * (S::from_i64(xb).recip() - S::from_i64(xa).recip())
    });
    let e12_6 = if a == b {
        S::zero()
    } else {
        order_q_generic::<S>(instance, a, 6)? - order_q_generic::<S>(instance, b, 6)?
    };
    Ok(SplittingResult {
        mode: S::MODE,
        e12_4,
        e12_6,
        hamming_n,
    })
}

/// `Σ_x^(q)` and the derivatives needed through sixth order, at `E = E_x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfEnergyTable<S> {
    pub sigma2: S,
    pub sigma2_d1: S,
    pub sigma2_d2: S,
    pub sigma4: S,
    pub sigma4_d1: S,
    pub sigma6: S,
}

impl<S: Scalar> SelfEnergyTable<S> {
    /// Corrections assembled directly from the self-energy values.
    pub fn corrections(&self) -> [S; 3] {
        let (s2, d1, d2) = (&self.sigma2, &self.sigma2_d1, &self.sigma2_d2);
        let e2 = s2.clone();
        let e4 = s2.clone() * d1.clone() + self.sigma4.clone();
        let half = S::ratio(1, 2);
        let e6 = s2.clone() * d1.clone() * d1.clone()
            + half * s2.clone() * s2.clone() * d2.clone()
            + d1.clone() * self.sigma4.clone()
            + s2.clone() * self.sigma4_d1.clone()
            + self.sigma6.clone();
        [e2, e4, e6]
    }
}

/// Largest `N` accepted by [`self_energy_table`] (it stores every state within
/// Hamming distance 3 of `x`).
pub const SELF_ENERGY_TABLE_MAX_BITS: usize = 64;

/// Full self-energy sums by propagating amplitudes over the states within
/// distance 3 of `x`, without any support pruning. Independent of the
/// flip-vector engine; intended for cross-checks on small instances.
pub fn self_energy_table<S: Scalar>(instance: &Instance, x: &BitString) -> Result<SelfEnergyTable<S>> {
    let n = instance.n_bits();
    if n > SELF_ENERGY_TABLE_MAX_BITS {
        return Err(Error::ResourceLimit(format!(
            "self-energy table limited to N <= {SELF_ENERGY_TABLE_MAX_BITS}, got {n}"
        )));
    }
    let land = Landscape::new(instance, x)?;
    let mut pole_cache: HashMap<Vec<usize>, Taylor<S>> = HashMap::new();
    let mut amp: HashMap<Vec<usize>, Taylor<S>> = HashMap::new();
    amp.insert(Vec::new(), Taylor::one());
    let mut sigma: [Taylor<S>; 7] = std::array::from_fn(|_| Taylor::zero());

    for step in 1..=MAX_ORDER {
        // Apply V (entries -1): move to every neighbor within reach of x.
        let reach = MAX_ORDER - step;
        let mut next: HashMap<Vec<usize>, Taylor<S>> = HashMap::new();
        for (state, t) in &amp {
            let neg = Taylor(t.0.clone().map(|c| -c));
            for bit in 0..n {
                let mut s = state.clone();
                match s.binary_search(&bit) {
                    Ok(pos) => {
                        s.remove(pos);
                    }
                    Err(pos) => s.insert(pos, bit),
                }
                if s.len() <= reach {
                    next.entry(s).or_insert_with(Taylor::zero).add_assign(&neg);
                }
            }
        }
        if let Some(back) = next.remove(&Vec::new()) {
            sigma[step] = back;
        }
        // Apply the resolvent on every interior state.
        for (state, t) in next.iter_mut() {
            let pole = match pole_cache.get(state) {
                Some(p) => p.clone(),
                None => {
                    let d = land.delta(state);
                    if d == 0 {
                        return Err(Error::DegenerateNeighbor {
                            flip_set: state.clone(),
                        });
                    }
                    let p = Taylor::<S>::pole(-d);
                    pole_cache.insert(state.clone(), p.clone());
                    p
                }
            };
            *t = t.mul(&pole);
        }
        amp = next;
    }
    let two = S::from_i64(2);
    Ok(SelfEnergyTable {
        sigma2: sigma[2].0[0].clone(),
        sigma2_d1: sigma[2].0[1].clone(),
        sigma2_d2: two * sigma[2].0[2].clone(),
        sigma4: sigma[4].0[0].clone(),
        sigma4_d1: sigma[4].0[1].clone(),
        sigma6: sigma[6].0[0].clone(),
    })
}

/// Smallest `λ* ∈ (0, lambda_max]` where the truncated levels cross, located
/// by sign-change bracketing on a uniform grid and bisection to `1e-10`.
pub fn crossing_lambda<S: Scalar>(
    a: &CorrectionSeries<S>,
    b: &CorrectionSeries<S>,
    lambda_max: f64,
) -> Option<f64> {
    const GRID: usize = 4096;
    if !(lambda_max > 0.0) {
        return None;
    }
    let diff = |l: f64| a.eval(l) - b.eval(l);
    let sign = |v: f64| if v > 0.0 { 1 } else if v < 0.0 { -1 } else { 0 };
    let mut lo = lambda_max / GRID as f64;
    let mut s_lo = sign(diff(lo));
    for k in 2..=GRID {
        let hi = lambda_max * k as f64 / GRID as f64;
        let s_hi = sign(diff(hi));
        if s_lo != 0 && s_hi != 0 && s_lo != s_hi {
            let (mut l, mut h) = (lo, hi);
            while h - l > 1e-10 {
                let mid = 0.5 * (l + h);
                let s_mid = sign(diff(mid));
                if s_mid == 0 {
                    return Some(mid);
                }
                if s_mid == s_lo {
                    l = mid;
                } else {
                    h = mid;
                }
            }
            return Some(0.5 * (l + h));
        }
        if s_hi != 0 {
            s_lo = s_hi;
            lo = hi;
        }
    }
    None
}

fn require_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be positive, got {v}")))
    }
}

/// `λ_c = √2 (C N)^{-1/8}`: beyond it `|E_12(λ)| > 4` for a fraction of
/// instances set by the percentile behind `C`.
pub fn lambda_c(c4: f64, n_bits: f64) -> Result<f64> {
    require_positive("c4", c4)?;
    require_positive("N", n_bits)?;
    Ok(2f64.sqrt() * (c4 * n_bits).powf(-0.125))
}

/// `λ_r = (C4 / C6)^{1/4}`, where the sixth-order splitting overtakes the fourth.
pub fn lambda_r(c4: f64, c6: f64) -> Result<f64> {
    require_positive("c4", c4)?;
    require_positive("c6", c6)?;
    Ok((c4 / c6).powf(0.25))
}

/// Sizes beyond which `λ_c < λ_r` when the added clause raises the energy by
/// 4 (`16 / (C4 λ_r^8)`) or by 1 (`1 / (C4 λ_r^8)`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdN {
    pub gap4: f64,
    pub gap1: f64,
}

pub fn threshold_n(c4: f64, lambda_r: f64) -> Result<ThresholdN> {
    require_positive("c4", c4)?;
    require_positive("lambda_r", lambda_r)?;
    let base = 1.0 / (c4 * lambda_r.powi(8));
    Ok(ThresholdN {
        gap4: 16.0 * base,
        gap1: base,
    })
}
