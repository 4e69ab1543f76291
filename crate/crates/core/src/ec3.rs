//! Exact Cover 3 instances: generation, cost, couplings, cleaning, statistics
//! and the text file format.
//!
//! Bits are 0-based inside the crate and 1-based in files and printed output.
//!
//! File grammar:
//!
//! ```text
//! c <free text>          optional comment lines (metadata such as `seed=7 gen=chacha8`)
//! p ec3 <N> <M>          exactly one header
//! <i> <j> <k>            exactly M clause lines, distinct 1-based indices
//! ```

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use num_rational::Ratio;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Name recorded in instance metadata for the generator's RNG.
pub const GENERATOR_NAME: &str = "chacha8";

/// Three distinct bits, stored in ascending order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Clause([usize; 3]);

impl Clause {
    pub fn new(a: usize, b: usize, c: usize) -> Result<Self> {
        if a == b || b == c || a == c {
            return Err(Error::invalid(format!(
                "clause ({a}, {b}, {c}) repeats a bit"
            )));
        }
        let mut bits = [a, b, c];
        bits.sort_unstable();
        Ok(Clause(bits))
    }

    pub fn bits(&self) -> [usize; 3] {
        self.0
    }

    pub fn contains(&self, bit: usize) -> bool {
        self.0.contains(&bit)
    }

    /// Number of clause bits set in `bits`.
    pub fn weight(&self, bits: &BitString) -> u32 {
        self.0.iter().filter(|&&i| bits.get(i)).count() as u32
    }

    pub fn penalty(&self, bits: &BitString) -> u64 {
        clause_penalty(self.weight(bits))
    }

    pub fn is_satisfied(&self, bits: &BitString) -> bool {
        self.weight(bits) == 1
    }
}

/// `(s - 1)^2` for a clause holding `s` ones.
#[inline]
pub fn clause_penalty(ones: u32) -> u64 {
    let d = ones as i64 - 1;
    (d * d) as u64
}

/// Comment lines carried through read/write.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metadata {
    /// Comments before the header, in order.
    pub preamble: Vec<String>,
    /// Comments in the clause section, keyed by the number of clause lines
    /// preceding them.
    pub inline: Vec<(usize, String)>,
}

impl Metadata {
    /// Value of the first `key=value` token in the preamble.
    pub fn lookup(&self, key: &str) -> Option<&str> {
        let prefix = format!("{key}=");
        self.preamble
            .iter()
            .flat_map(|line| line.split_whitespace())
            .find_map(|tok| tok.strip_prefix(prefix.as_str()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    n_bits: usize,
    clauses: Vec<Clause>,
    meta: Metadata,
}

impl Instance {
    pub fn new(n_bits: usize, clauses: Vec<Clause>) -> Result<Self> {
        Self::with_metadata(n_bits, clauses, Metadata::default())
    }

    pub fn with_metadata(n_bits: usize, clauses: Vec<Clause>, meta: Metadata) -> Result<Self> {
        if let Some(c) = clauses.iter().find(|c| c.0[2] >= n_bits) {
            return Err(Error::invalid(format!(
                "clause {c} references a bit beyond N = {n_bits}"
            )));
        }
        Ok(Instance {
            n_bits,
            clauses,
            meta,
        })
    }

    /// Build from 1-based triples, as written in files and examples.
    pub fn from_triples(n_bits: usize, triples: &[[usize; 3]]) -> Result<Self> {
        let clauses = triples
            .iter()
            .map(|t| {
                if t.iter().any(|&v| v == 0) {
                    return Err(Error::invalid("bit indices are 1-based"));
                }
                Clause::new(t[0] - 1, t[1] - 1, t[2] - 1)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(n_bits, clauses)
    }

    pub fn n_bits(&self) -> usize {
        self.n_bits
    }

    pub fn n_clauses(&self) -> usize {
        self.clauses.len()
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn metadata(&self) -> &Metadata {
        &self.meta
    }

    pub fn metadata_mut(&mut self) -> &mut Metadata {
        &mut self.meta
    }

    /// `M / N` as an exact ratio.
    pub fn alpha(&self) -> Ratio<usize> {
        Ratio::new(self.clauses.len(), self.n_bits.max(1))
    }

    pub fn seed(&self) -> Option<u64> {
        self.meta.lookup("seed").and_then(|s| s.parse().ok())
    }

    /// Copy of this instance with one more clause appended.
    pub fn with_clause(&self, clause: Clause) -> Result<Self> {
        let mut clauses = self.clauses.clone();
        clauses.push(clause);
        Self::with_metadata(self.n_bits, clauses, self.meta.clone())
    }

    /// For every bit, the indices of the clauses containing it.
    pub fn incidence(&self) -> Vec<Vec<usize>> {
        let mut inc = vec![Vec::new(); self.n_bits];
        for (ci, c) in self.clauses.iter().enumerate() {
            for &b in &c.0 {
                inc[b].push(ci);
            }
        }
        inc
    }

    /// Per-bit clause counts `B_i` with multiplicity.
    pub fn clause_counts(&self) -> Vec<u32> {
        let mut b = vec![0u32; self.n_bits];
        for c in &self.clauses {
            for &i in &c.0 {
                b[i] += 1;
            }
        }
        b
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({} {} {})", self.0[0] + 1, self.0[1] + 1, self.0[2] + 1)
    }
}

/// An `N`-bit assignment. Ordering is lexicographic from bit 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BitString(Vec<bool>);

impl BitString {
    pub fn zeros(n: usize) -> Self {
        BitString(vec![false; n])
    }

    pub fn from_bools(bits: Vec<bool>) -> Self {
        BitString(bits)
    }

    /// Bit `i` of the string is bit `i` of `index`.
    pub fn from_index(index: u64, n: usize) -> Self {
        BitString((0..n).map(|i| (index >> i) & 1 == 1).collect())
    }

    pub fn to_index(&self) -> u64 {
        self.0
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, &b)| acc | ((b as u64) << i))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn set(&mut self, i: usize, v: bool) {
        self.0[i] = v;
    }

    pub fn flip(&mut self, i: usize) {
        self.0[i] = !self.0[i];
    }

    pub fn flipped(&self, bits: &[usize]) -> Self {
        let mut out = self.clone();
        for &i in bits {
            out.flip(i);
        }
        out
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl std::str::FromStr for BitString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.trim()
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::invalid(format!("`{other}` is not a bit"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(BitString)
    }
}

/// A bit string together with its cost.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Assignment {
    pub bits: BitString,
    pub energy: u64,
}

impl Assignment {
    pub fn evaluate(instance: &Instance, bits: BitString) -> Result<Self> {
        let energy = cost(instance, &bits)?;
        Ok(Assignment { bits, energy })
    }

    pub fn is_solution(&self) -> bool {
        self.energy == 0
    }
}

/// Draw `n_clauses` clauses independently and uniformly over the distinct
/// triples of `n_bits` bits (with replacement across clauses).
pub fn generate_random(n_bits: usize, n_clauses: usize, seed: u64) -> Result<Instance> {
    if n_bits < 3 {
        return Err(Error::invalid(format!("need at least 3 bits, got {n_bits}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clauses = (0..n_clauses)
        .map(|_| random_clause(&mut rng, n_bits))
        .collect();
    let meta = Metadata {
        preamble: vec![format!("seed={seed} gen={GENERATOR_NAME}")],
        inline: Vec::new(),
    };
    Instance::with_metadata(n_bits, clauses, meta)
}

/// One uniform unordered triple of distinct bits.
pub fn random_clause<R: rand::Rng + ?Sized>(rng: &mut R, n_bits: usize) -> Clause {
    let picked = index::sample(rng, n_bits, 3);
    let mut bits = [picked.index(0), picked.index(1), picked.index(2)];
    bits.sort_unstable();
    Clause(bits)
}

/// `Σ_C (x_i + x_j + x_k - 1)^2`.
pub fn cost(instance: &Instance, bits: &BitString) -> Result<u64> {
    if bits.len() != instance.n_bits {
        return Err(Error::invalid(format!(
            "assignment has {} bits, instance has {}",
            bits.len(),
            instance.n_bits
        )));
    }
    Ok(instance.clauses.iter().map(|c| c.penalty(bits)).sum())
}

/// Clause counts `B_i` and pairwise co-occurrence counts `J_ij`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CouplingData {
    n: usize,
    b: Vec<u32>,
    j: Vec<u32>,
    neighbors: Vec<Vec<usize>>,
}

impl CouplingData {
    pub fn n_bits(&self) -> usize {
        self.n
    }

    pub fn b(&self) -> &[u32] {
        &self.b
    }

    #[inline]
    pub fn j(&self, i: usize, k: usize) -> u32 {
        self.j[i * self.n + k]
    }

    /// Bits `k` with `J_ik > 0`, ascending.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    /// Unordered pairs `(i, k)`, `i < k`, with `J_ik > 0`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |i| {
            self.neighbors[i]
                .iter()
                .copied()
                .filter(move |&k| k > i)
                .map(move |k| (i, k))
        })
    }

    /// Checks `B_i = ½ Σ_k J_ik` for every bit.
    pub fn is_consistent(&self) -> bool {
        (0..self.n).all(|i| {
            let row: u32 = (0..self.n).map(|k| self.j(i, k)).sum();
            row == 2 * self.b[i] && self.j(i, i) == 0
        })
    }
}

pub fn couplings(instance: &Instance) -> CouplingData {
    let n = instance.n_bits;
    let mut b = vec![0u32; n];
    let mut j = vec![0u32; n * n];
    for c in &instance.clauses {
        let [p, q, r] = c.0;
        for &i in &c.0 {
            b[i] += 1;
        }
        for (x, y) in [(p, q), (p, r), (q, r)] {
            j[x * n + y] += 1;
            j[y * n + x] += 1;
        }
    }
    let neighbors = (0..n)
        .map(|i| (0..n).filter(|&k| j[i * n + k] > 0).collect())
        .collect();
    CouplingData { n, b, j, neighbors }
}

/// Outcome of [`clean`]: the reduced instance and where each original bit went.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cleaned {
    pub instance: Instance,
    /// `remap[old] = Some(new)` for surviving bits.
    pub remap: Vec<Option<usize>>,
}

impl Cleaned {
    pub fn map_clause(&self, clause: &Clause) -> Option<Clause> {
        let [a, b, c] = clause.0;
        let mapped = [self.remap[a]?, self.remap[b]?, self.remap[c]?];
        Clause::new(mapped[0], mapped[1], mapped[2]).ok()
    }
}

/// Remove, to a fixpoint, every clause with two or more bits that appear in
/// no other clause; then drop absent bits and re-index the rest contiguously.
pub fn clean(instance: &Instance) -> Cleaned {
    let mut clauses = instance.clauses.clone();
    loop {
        let mut b = vec![0u32; instance.n_bits];
        for c in &clauses {
            for &i in &c.0 {
                b[i] += 1;
            }
        }
        let before = clauses.len();
        clauses.retain(|c| c.0.iter().filter(|&&i| b[i] == 1).count() < 2);
        if clauses.len() == before {
            break;
        }
    }

    let mut present = vec![false; instance.n_bits];
    for c in &clauses {
        for &i in &c.0 {
            present[i] = true;
        }
    }
    let mut remap = vec![None; instance.n_bits];
    let mut next = 0;
    for (old, &p) in present.iter().enumerate() {
        if p {
            remap[old] = Some(next);
            next += 1;
        }
    }
    let clauses = clauses
        .iter()
        .map(|c| {
            let [a, b, d] = c.0;
            Clause([
                remap[a].expect("present"),
                remap[b].expect("present"),
                remap[d].expect("present"),
            ])
        })
        .collect();
    let meta = Metadata {
        preamble: instance.meta.preamble.clone(),
        inline: Vec::new(),
    };
    Cleaned {
        instance: Instance {
            n_bits: next,
            clauses,
            meta,
        },
        remap,
    }
}

/// Largest subgraph size accepted by [`instance_stats`].
pub const MAX_CENSUS_SIZE: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceStats {
    /// Bits appearing in at least one clause.
    pub present_bits: usize,
    pub b_mean: f64,
    /// Mean squared deviation of `B_i` over all `N` bits.
    pub b_var: f64,
    /// `g_u[u - 1]` connected induced subgraphs with `u` vertices.
    pub g_u: Vec<u64>,
}

impl InstanceStats {
    pub fn g(&self, u: usize) -> u64 {
        self.g_u[u - 1]
    }
}

pub fn instance_stats(instance: &Instance, u_max: usize) -> Result<InstanceStats> {
    if u_max > MAX_CENSUS_SIZE {
        return Err(Error::ResourceLimit(format!(
            "connected-subgraph census limited to u <= {MAX_CENSUS_SIZE}, got {u_max}"
        )));
    }
    let n = instance.n_bits;
    let b = instance.clause_counts();
    let present_bits = b.iter().filter(|&&v| v > 0).count();
    let (b_mean, b_var) = if n == 0 {
        (0.0, 0.0)
    } else {
        let mean = b.iter().map(|&v| v as f64).sum::<f64>() / n as f64;
        let var = b.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n as f64;
        (mean, var)
    };
    let cd = couplings(instance);
    Ok(InstanceStats {
        present_bits,
        b_mean,
        b_var,
        g_u: connected_subgraph_census(&cd, u_max),
    })
}

/// Counts connected induced subgraphs of each size `1..=u_max`.
/// Isolated vertices are not counted at size 1.
pub fn connected_subgraph_census(cd: &CouplingData, u_max: usize) -> Vec<u64> {
    let mut counts = vec![0u64; u_max];
    if u_max == 0 {
        return counts;
    }
    for_each_connected_set(cd, u_max, |set| {
        if set.len() > 1 || !cd.neighbors(set[0]).is_empty() {
            counts[set.len() - 1] += 1;
        }
    });
    counts
}

/// Visits every connected vertex set of size `1..=u_max` exactly once (ESU
/// enumeration). Singletons are visited for every vertex, isolated or not.
pub fn for_each_connected_set<F: FnMut(&[usize])>(cd: &CouplingData, u_max: usize, mut visit: F) {
    if u_max == 0 {
        return;
    }
    let mut sub = Vec::with_capacity(u_max);
    for v in 0..cd.n {
        sub.clear();
        sub.push(v);
        visit(&sub);
        let ext: Vec<usize> = cd.neighbors(v).iter().copied().filter(|&w| w > v).collect();
        esu_extend(cd, &mut sub, ext, v, u_max, &mut visit);
    }
}

fn esu_extend<F: FnMut(&[usize])>(
    cd: &CouplingData,
    sub: &mut Vec<usize>,
    mut ext: Vec<usize>,
    root: usize,
    u_max: usize,
    visit: &mut F,
) {
    if sub.len() >= u_max {
        return;
    }
    while let Some(w) = ext.pop() {
        sub.push(w);
        visit(sub);
        if sub.len() < u_max {
            // Exclusive neighbors of w: not in sub, not adjacent to the old sub.
            let old = &sub[..sub.len() - 1];
            let mut next = ext.clone();
            for &u in cd.neighbors(w) {
                if u > root
                    && !sub.contains(&u)
                    && !next.contains(&u)
                    && !old.iter().any(|&s| cd.j(s, u) > 0)
                {
                    next.push(u);
                }
            }
            esu_extend(cd, sub, next, root, u_max, visit);
        }
        sub.pop();
    }
}

/// Whether `set` induces a connected subgraph.
pub fn is_connected_set(cd: &CouplingData, set: &[usize]) -> bool {
    if set.is_empty() {
        return false;
    }
    let mut seen = vec![false; set.len()];
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(a) = stack.pop() {
        for (bi, &b) in set.iter().enumerate() {
            if !seen[bi] && cd.j(set[a], b) > 0 {
                seen[bi] = true;
                stack.push(bi);
            }
        }
    }
    seen.iter().all(|&s| s)
}

/// Brute-force census over all `C(N, u)` subsets. Exponential; for tests.
pub fn census_bruteforce(cd: &CouplingData, u: usize) -> u64 {
    fn rec(cd: &CouplingData, start: usize, u: usize, set: &mut Vec<usize>) -> u64 {
        if set.len() == u {
            let ok = is_connected_set(cd, set) && (u > 1 || !cd.neighbors(set[0]).is_empty());
            return ok as u64;
        }
        (start..cd.n)
            .map(|v| {
                set.push(v);
                let c = rec(cd, v + 1, u, set);
                set.pop();
                c
            })
            .sum()
    }
    if u == 0 {
        return 0;
    }
    rec(cd, 0, u, &mut Vec::new())
}

pub fn parse_instance(text: &str) -> Result<Instance> {
    let mut preamble = Vec::new();
    let mut inline = Vec::new();
    let mut header: Option<(usize, usize)> = None;
    let mut clauses = Vec::new();
    let parse_err = |line: usize, message: String| Error::Parse { line, message };

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim_end();
        if line.is_empty() {
            continue;
        }
        if line == "c" || line.starts_with("c ") {
            let body = line.get(2..).unwrap_or("").to_string();
            match header {
                None => preamble.push(body),
                Some(_) => inline.push((clauses.len(), body)),
            }
            continue;
        }
        if line.starts_with('p') {
            if header.is_some() {
                return Err(parse_err(lineno, "duplicate header".into()));
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != 4 || toks[0] != "p" || toks[1] != "ec3" {
                return Err(parse_err(lineno, format!("malformed header `{line}`")));
            }
            let n = toks[2]
                .parse()
                .map_err(|_| parse_err(lineno, format!("bad bit count `{}`", toks[2])))?;
            let m = toks[3]
                .parse()
                .map_err(|_| parse_err(lineno, format!("bad clause count `{}`", toks[3])))?;
            header = Some((n, m));
            continue;
        }
        let Some((n, m)) = header else {
            return Err(parse_err(lineno, "clause before header".into()));
        };
        if clauses.len() == m {
            return Err(parse_err(lineno, format!("more than the declared {m} clauses")));
        }
        let vals = line
            .split_whitespace()
            .map(|t| {
                t.parse::<usize>()
                    .map_err(|_| parse_err(lineno, format!("bad index `{t}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        if vals.len() != 3 {
            return Err(parse_err(lineno, format!("expected 3 indices, got {}", vals.len())));
        }
        if let Some(&bad) = vals.iter().find(|&&v| v == 0 || v > n) {
            return Err(parse_err(lineno, format!("index {bad} outside 1..={n}")));
        }
        let clause = Clause::new(vals[0] - 1, vals[1] - 1, vals[2] - 1)
            .map_err(|_| parse_err(lineno, format!("clause `{line}` repeats a bit")))?;
        clauses.push(clause);
    }
    let Some((n, m)) = header else {
        return Err(parse_err(0, "missing `p ec3 <N> <M>` header".into()));
    };
    if clauses.len() != m {
        return Err(parse_err(
            text.lines().count(),
            format!("header declares {m} clauses, found {}", clauses.len()),
        ));
    }
    Instance::with_metadata(n, clauses, Metadata { preamble, inline })
}

pub fn format_instance(instance: &Instance) -> String {
    fn comment(out: &mut String, text: &str) {
        if text.is_empty() {
            out.push_str("c\n");
        } else {
            out.push_str("c ");
            out.push_str(text);
            out.push('\n');
        }
    }
    let mut out = String::new();
    for line in &instance.meta.preamble {
        comment(&mut out, line);
    }
    out.push_str(&format!("p ec3 {} {}\n", instance.n_bits, instance.clauses.len()));
    let mut inline = instance.meta.inline.iter().peekable();
    for (k, c) in instance.clauses.iter().enumerate() {
        while let Some((_, text)) = inline.next_if(|(pos, _)| *pos == k) {
            comment(&mut out, text);
        }
        let [a, b, d] = c.0;
        out.push_str(&format!("{} {} {}\n", a + 1, b + 1, d + 1));
    }
    for (_, text) in inline {
        comment(&mut out, text);
    }
    out
}

pub fn read_instance(path: impl AsRef<Path>) -> Result<Instance> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_instance(&text)
}

pub fn write_instance(instance: &Instance, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_instance(instance)).map_err(|e| Error::io(path, e))
}

/// Distinct bits that appear in at least one clause.
pub fn present_bits(instance: &Instance) -> HashSet<usize> {
    instance.clauses.iter().flat_map(|c| c.0).collect()
}
