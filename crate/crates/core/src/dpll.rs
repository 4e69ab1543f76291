//! Complete enumeration of EC3 solutions by DPLL with 1-in-3 propagation.
//!
//! Branching picks the unassigned bit with the largest clause count `B_i`
//! (lowest index on ties). Propagation rules for a clause `(a, b, c)`:
//!
//! * one bit set to 1 forces the other two to 0;
//! * two bits set to 0 force the remaining one to 1;
//! * two bits at 1, or all three at 0, is a conflict.

use crate::ec3::{Assignment, BitString, Instance};
use crate::error::{Error, Result};

pub const DEFAULT_SOLUTION_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolutionSet {
    /// Zero-cost assignments, sorted lexicographically.
    pub solutions: Vec<Assignment>,
    /// The cap was reached before the search finished.
    pub truncated: bool,
}

impl SolutionSet {
    pub fn len(&self) -> usize {
        self.solutions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.solutions.is_empty()
    }

    pub fn bits(&self) -> impl Iterator<Item = &BitString> {
        self.solutions.iter().map(|a| &a.bits)
    }
}

const UNSET: i8 = -1;

struct Solver<'a> {
    instance: &'a Instance,
    incidence: Vec<Vec<usize>>,
    order: Vec<usize>,
    value: Vec<i8>,
    trail: Vec<usize>,
    found: Vec<BitString>,
    cap: usize,
    truncated: bool,
}

impl<'a> Solver<'a> {
    fn new(instance: &'a Instance, cap: usize) -> Self {
        let b = instance.clause_counts();
        let mut order: Vec<usize> = (0..instance.n_bits()).collect();
        order.sort_by(|&x, &y| b[y].cmp(&b[x]).then(x.cmp(&y)));
        Solver {
            instance,
            incidence: instance.incidence(),
            order,
            value: vec![UNSET; instance.n_bits()],
            trail: Vec::with_capacity(instance.n_bits()),
            found: Vec::new(),
            cap,
            truncated: false,
        }
    }

    /// Assign and propagate. Returns false on conflict; the trail records every
    /// assignment made so the caller can undo them.
    fn assign(&mut self, bit: usize, v: bool) -> bool {
        let mut queue = vec![(bit, v)];
        while let Some((x, val)) = queue.pop() {
            let cur = self.value[x];
            if cur != UNSET {
                if (cur == 1) != val {
                    return false;
                }
                continue;
            }
            self.value[x] = val as i8;
            self.trail.push(x);
            for &ci in &self.incidence[x] {
                let bits = self.instance.clauses()[ci].bits();
                let (mut ones, mut zeros) = (0, 0);
                for &b in &bits {
                    match self.value[b] {
                        1 => ones += 1,
                        0 => zeros += 1,
                        _ => {}
                    }
                }
                if ones >= 2 || zeros == 3 {
                    return false;
                }
                if ones == 1 {
                    for &b in &bits {
                        if self.value[b] == UNSET {
                            queue.push((b, false));
                        }
                    }
                } else if zeros == 2 {
                    for &b in &bits {
                        if self.value[b] == UNSET {
                            queue.push((b, true));
                        }
                    }
                }
            }
        }
        true
    }

    fn undo_to(&mut self, mark: usize) {
        while self.trail.len() > mark {
            let x = self.trail.pop().expect("non-empty trail");
            self.value[x] = UNSET;
        }
    }

    fn search(&mut self) {
        if self.found.len() >= self.cap {
            self.truncated = true;
            return;
        }
        let Some(&bit) = self.order.iter().find(|&&b| self.value[b] == UNSET) else {
            let bits = self.value.iter().map(|&v| v == 1).collect();
            self.found.push(BitString::from_bools(bits));
            return;
        };
        for v in [false, true] {
            let mark = self.trail.len();
            if self.assign(bit, v) {
                self.search();
            }
            self.undo_to(mark);
            if self.truncated {
                return;
            }
        }
    }
}

/// All zero-cost assignments, or the first `cap` found with `truncated` set.
pub fn solve_all(instance: &Instance, cap: usize) -> Result<SolutionSet> {
    if cap == 0 {
        return Err(Error::invalid("solution cap must be at least 1"));
    }
    let mut solver = Solver::new(instance, cap);
    solver.search();
    let truncated = solver.truncated;
    let mut sols = solver.found;
    sols.sort();
    sols.dedup();
    Ok(SolutionSet {
        solutions: sols
            .into_iter()
            .map(|bits| Assignment { bits, energy: 0 })
            .collect(),
        truncated,
    })
}

/// Exhaustive scan over all `2^N` assignments. Oracle for small instances.
pub fn solve_bruteforce(instance: &Instance) -> Result<Vec<BitString>> {
    let n = instance.n_bits();
    if n > 24 {
        return Err(Error::ResourceLimit(format!("brute force over 2^{n} assignments")));
    }
    let mut out: Vec<BitString> = (0..1u64 << n)
        .map(|idx| BitString::from_index(idx, n))
        .filter(|b| instance.clauses().iter().all(|c| c.is_satisfied(b)))
        .collect();
    out.sort();
    Ok(out)
}

pub fn hamming(a: &BitString, b: &BitString) -> Result<usize> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "length mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.as_slice()
        .iter()
        .zip(b.as_slice())
        .filter(|(x, y)| x != y)
        .count())
}
