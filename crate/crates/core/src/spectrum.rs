//! Exact spectra of `H(s) = (1-s) H_0 + s H_P` on the `2^N` hypercube.
//!
//! States are indexed by the integer whose bit `i` is bit `i` of the
//! assignment. The Hamiltonian is applied matrix-free from a cached cost
//! table. The two lowest levels come from a block Krylov (Davidson-type)
//! iteration with full reorthogonalization that locks converged vectors, so
//! a degenerate pair is reported with `E_1 - E_0 ≈ 0`.

use std::fmt::Write as _;
use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dpll::solve_all;
use crate::ec3::{BitString, Instance};
use crate::error::{Error, Result};
use crate::par::{self, Exec};

pub const DEFAULT_MAX_BITS: usize = 22;
/// Largest `N` accepted by the dense oracle.
pub const DENSE_MAX_BITS: usize = 12;
pub const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Param {
    /// `H(s) = (1-s) H_0 + s H_P`.
    S(f64),
    /// `H(λ) = H_P + λ H_0`.
    Lambda(f64),
}

/// `f(x)` for every basis state, as `u32`.
fn cost_table(instance: &Instance, exec: Exec) -> Vec<u32> {
    let masks: Vec<u64> = instance
        .clauses()
        .iter()
        .map(|c| c.bits().iter().fold(0u64, |m, &b| m | 1 << b))
        .collect();
    let mut out = vec![0u32; 1usize << instance.n_bits()];
    par::fill_indexed(exec, &mut out, |idx| {
        masks
            .iter()
            .map(|&m| {
                let w = (idx as u64 & m).count_ones() as i32 - 1;
                (w * w) as u32
            })
            .sum()
    });
    out
}

#[derive(Debug, Clone)]
pub struct HamiltonianSpec {
    n_bits: usize,
    param: Param,
    costs: Arc<Vec<u32>>,
    exec: Exec,
}

impl HamiltonianSpec {
    pub fn new(instance: &Instance, param: Param) -> Result<Self> {
        Self::with_limit(instance, param, DEFAULT_MAX_BITS)
    }

    pub fn with_limit(instance: &Instance, param: Param, max_bits: usize) -> Result<Self> {
        let n = instance.n_bits();
        if n > max_bits {
            return Err(Error::ResourceLimit(format!(
                "state space 2^{n} exceeds the limit 2^{max_bits}"
            )));
        }
        if n == 0 {
            return Err(Error::invalid("instance has no bits"));
        }
        validate_param(param)?;
        Ok(HamiltonianSpec {
            n_bits: n,
            param,
            costs: Arc::new(cost_table(instance, Exec::default())),
            exec: Exec::default(),
        })
    }

    /// Same instance and cost table, different parameter.
    pub fn with_param(&self, param: Param) -> Result<Self> {
        validate_param(param)?;
        Ok(HamiltonianSpec {
            param,
            ..self.clone()
        })
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn n_bits(&self) -> usize {
        self.n_bits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_bits
    }

    pub fn param(&self) -> Param {
        self.param
    }

    pub fn costs(&self) -> &[u32] {
        &self.costs
    }

    /// `(d, t)` with `H = d·H_P − t·Σ σ^x`.
    pub fn coefficients(&self) -> (f64, f64) {
        match self.param {
            Param::S(s) => (s, 1.0 - s),
            Param::Lambda(l) => (1.0, l),
        }
    }

    /// `λ = (1-s)/s`; infinite at `s = 0`.
    pub fn lambda(&self) -> f64 {
        let (d, t) = self.coefficients();
        t / d
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.dim() {
            return Err(Error::invalid(format!(
                "state has dimension {}, expected {}",
                v.len(),
                self.dim()
            )));
        }
        let mut out = vec![0.0; v.len()];
        self.apply_into(v, &mut out);
        Ok(out)
    }

    fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        let (d, t) = self.coefficients();
        let n = self.n_bits;
        let costs = &self.costs;
        par::fill_indexed(self.exec, out, |i| {
            let mut hop = 0.0;
            for b in 0..n {
                hop += v[i ^ (1 << b)];
            }
            d * costs[i] as f64 * v[i] - t * hop
        });
    }

    fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        par::sum_indexed(self.exec, a.len(), |i| a[i] * b[i])
    }

    /// Dense matrix, for `N <= 12`.
    pub fn dense(&self) -> Result<DMatrix<f64>> {
        if self.n_bits > DENSE_MAX_BITS {
            return Err(Error::ResourceLimit(format!(
                "dense matrix limited to N <= {DENSE_MAX_BITS}"
            )));
        }
        let (d, t) = self.coefficients();
        let dim = self.dim();
        let mut m = DMatrix::zeros(dim, dim);
        for i in 0..dim {
            m[(i, i)] = d * self.costs[i] as f64;
            for b in 0..self.n_bits {
                m[(i, i ^ (1 << b))] = -t;
            }
        }
        Ok(m)
    }
}

fn validate_param(param: Param) -> Result<()> {
    match param {
        Param::S(s) if (0.0..=1.0).contains(&s) => Ok(()),
        Param::Lambda(l) if l >= 0.0 && l.is_finite() => Ok(()),
        other => Err(Error::invalid(format!("parameter out of range: {other:?}"))),
    }
}

/// Full sorted spectrum by dense diagonalization.
pub fn full_spectrum(spec: &HamiltonianSpec) -> Result<Vec<f64>> {
    let eig = SymmetricEigen::new(spec.dense()?);
    let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// Dense lowest eigenpair and second eigenvalue, for cross-checks.
pub fn dense_lowest_two(spec: &HamiltonianSpec) -> Result<LowestTwo> {
    let eig = SymmetricEigen::new(spec.dense()?);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let g = order[0];
    let e1 = order.get(1).map_or(f64::INFINITY, |&k| eig.eigenvalues[k]);
    Ok(LowestTwo {
        e0: eig.eigenvalues[g],
        e1,
        ground_state: eig.eigenvectors.column(g).iter().copied().collect(),
        residual: 0.0,
        applications: 0,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LowestTwo {
    pub e0: f64,
    pub e1: f64,
    pub ground_state: Vec<f64>,
    /// Largest residual norm of the two returned Ritz pairs.
    pub residual: f64,
    /// Number of Hamiltonian applications used.
    pub applications: usize,
}

impl LowestTwo {
    pub fn gap(&self) -> f64 {
        (self.e1 - self.e0).max(0.0)
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += a * xi);
}

/// Orthogonalize `w` against `basis` twice; returns the remaining norm.
fn orthonormalize(spec: &HamiltonianSpec, basis: &[Vec<f64>], w: &mut [f64]) -> f64 {
    for _ in 0..2 {
        for b in basis {
            let c = spec.dot(b, w);
            axpy(w, -c, b);
        }
    }
    normalize(w)
}

/// Two lowest eigenvalues with residuals below [`RESIDUAL_TOL`].
pub fn lowest_two(spec: &HamiltonianSpec) -> Result<LowestTwo> {
    lowest_two_with(spec, RESIDUAL_TOL)
}

pub fn lowest_two_with(spec: &HamiltonianSpec, tol: f64) -> Result<LowestTwo> {
    let dim = spec.dim();
    if dim <= 64 {
        return dense_lowest_two(spec);
    }
    let (dcoef, tcoef) = spec.coefficients();
    if tcoef == 0.0 {
        return Ok(diagonal_lowest_two(spec, dcoef));
    }
    let want = 2;
    // Extra Ritz pairs expanded each step so that clustered levels resolve.
    let block = 4;
    let max_basis = 48.min(dim);
    let keep = 8;
    let cap = (10.0 * 2f64.powf(spec.n_bits() as f64 / 2.0)).ceil() as usize;
    let cap = cap.max(400);
    let diag: Vec<f64> = spec.costs.iter().map(|&c| dcoef * c as f64).collect();

    let mut sub = Subspace::new(spec);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    // Uniform vector (overlaps the Perron ground state) plus a random one so
    // degenerate pairs are resolved.
    sub.push(vec![1.0; dim]);
    sub.push((0..dim).map(|_| rng.random::<f64>() - 0.5).collect());

    let mut best_res = f64::INFINITY;
    loop {
        let k = sub.len();
        let t = DMatrix::from_fn(k, k, |i, j| 0.5 * (sub.t[i][j] + sub.t[j][i]));
        let eig = SymmetricEigen::new(t);
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let ritz = |col: usize, src: &[Vec<f64>]| -> Vec<f64> {
            let mut y = vec![0.0; dim];
            for (j, v) in src.iter().enumerate() {
                axpy(&mut y, eig.eigenvectors[(j, col)], v);
            }
            y
        };

        let nb = block.min(k);
        let mut residuals = Vec::with_capacity(nb);
        let mut corrections = Vec::with_capacity(nb);
        for &col in &order[..nb] {
            let theta = eig.eigenvalues[col];
            let mut r = ritz(col, &sub.images);
            axpy(&mut r, -theta, &ritz(col, &sub.basis));
            let norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
            residuals.push(norm);
            if norm >= tol {
                // Diagonal preconditioner, kept away from its poles.
                let floor = 1e-3 * (1.0 + theta.abs());
                for (ri, di) in r.iter_mut().zip(&diag) {
                    let den = di - theta;
                    *ri /= if den.abs() < floor { floor.copysign(den) } else { den };
                }
                corrections.push(r);
            }
        }
        let worst = residuals[..want.min(nb)].iter().copied().fold(0.0, f64::max);
        best_res = best_res.min(worst);
        if (k >= want && worst < tol) || k == dim {
            let mut ground = ritz(order[0], &sub.basis);
            normalize(&mut ground);
            return Ok(LowestTwo {
                e0: eig.eigenvalues[order[0]],
                e1: if k > 1 { eig.eigenvalues[order[1]] } else { f64::INFINITY },
                ground_state: ground,
                residual: worst,
                applications: sub.applications,
            });
        }
        if sub.applications >= cap {
            return Err(Error::ConvergenceFailure { residual: best_res });
        }
        if k + corrections.len() > max_basis {
            // Thick restart on the lowest Ritz vectors.
            let cols = &order[..keep.min(k)];
            let kept: Vec<Vec<f64>> = cols.iter().map(|&c| ritz(c, &sub.basis)).collect();
            sub = Subspace::new(spec);
            for v in kept {
                sub.push(v);
            }
        }
        let before = sub.len();
        for c in corrections {
            sub.push(c);
        }
        if sub.len() == before {
            // Stagnation: inject a fresh random direction.
            sub.push((0..dim).map(|_| rng.random::<f64>() - 0.5).collect());
            if sub.len() == before {
                return Err(Error::ConvergenceFailure { residual: best_res });
            }
        }
    }
}

/// Exact answer when the driver term vanishes.
fn diagonal_lowest_two(spec: &HamiltonianSpec, d: f64) -> LowestTwo {
    let mut idx: Vec<usize> = (0..spec.dim()).collect();
    idx.sort_by_key(|&i| (spec.costs[i], i));
    let mut ground = vec![0.0; spec.dim()];
    ground[idx[0]] = 1.0;
    LowestTwo {
        e0: d * spec.costs[idx[0]] as f64,
        e1: idx.get(1).map_or(f64::INFINITY, |&i| d * spec.costs[i] as f64),
        ground_state: ground,
        residual: 0.0,
        applications: 0,
    }
}

/// Orthonormal basis, its images under `H`, and the projected matrix.
struct Subspace<'a> {
    spec: &'a HamiltonianSpec,
    basis: Vec<Vec<f64>>,
    images: Vec<Vec<f64>>,
    t: Vec<Vec<f64>>,
    applications: usize,
}

impl<'a> Subspace<'a> {
    fn new(spec: &'a HamiltonianSpec) -> Self {
        Subspace {
            spec,
            basis: Vec::new(),
            images: Vec::new(),
            t: Vec::new(),
            applications: 0,
        }
    }

    fn len(&self) -> usize {
        self.basis.len()
    }

    /// Adds `v` if it has a direction (relative to its own norm) outside the span.
    fn push(&mut self, mut v: Vec<f64>) {
        if normalize(&mut v) == 0.0 || orthonormalize(self.spec, &self.basis, &mut v) < 1e-8 {
            return;
        }
        let mut h = vec![0.0; v.len()];
        self.spec.apply_into(&v, &mut h);
        self.applications += 1;
        let row: Vec<f64> = self.images.iter().map(|hj| self.spec.dot(&v, hj)).collect();
        for (i, b) in self.basis.iter().enumerate() {
            self.t[i].push(self.spec.dot(b, &h));
        }
        let mut row = row;
        row.push(self.spec.dot(&v, &h));
        self.t.push(row);
        self.basis.push(v);
        self.images.push(h);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapPoint {
    pub s: f64,
    pub e0: f64,
    pub e1: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapScan {
    pub grid: Vec<GapPoint>,
    pub min_gap: f64,
    pub argmin_s: f64,
}

impl GapScan {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut out = String::from("s,e0,e1,gap\n");
        for p in &self.grid {
            let _ = writeln!(out, "{},{},{},{}", p.s, p.e0, p.e1, p.gap);
        }
        w.write_all(out.as_bytes())
            .map_err(|e| Error::io("<gap scan>", e))
    }
}

fn gap_point(base: &HamiltonianSpec, s: f64) -> Result<GapPoint> {
    let r = lowest_two(&base.with_param(Param::S(s))?)?;
    Ok(GapPoint {
        s,
        e0: r.e0,
        e1: r.e1,
        gap: r.gap(),
    })
}

/// `Δ(s)` on a grid in `(0, 1]`; with `refine`, golden-section search
/// brackets the coarse minimum to `|δs| <= 1e-4`.
pub fn gap_scan(instance: &Instance, grid: &[f64], refine: bool) -> Result<GapScan> {
    gap_scan_with(instance, grid, refine, Exec::default())
}

pub fn gap_scan_with(instance: &Instance, grid: &[f64], refine: bool, exec: Exec) -> Result<GapScan> {
    if grid.is_empty() || grid.iter().any(|&s| !(s > 0.0 && s <= 1.0)) {
        return Err(Error::invalid("gap scan grid must be non-empty and within (0, 1]"));
    }
    let base = HamiltonianSpec::new(instance, Param::S(1.0))?.with_exec(Exec::Sequential);
    let points: Vec<GapPoint> = par::map_slice(exec, grid, |&s| gap_point(&base, s))
        .into_iter()
        .collect::<Result<_>>()?;
    let (imin, pmin) = points
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.gap.total_cmp(&b.1.gap))
        .expect("non-empty grid");
    let (mut min_gap, mut argmin_s) = (pmin.gap, pmin.s);
    if refine && points.len() > 1 {
        let base = base.with_exec(exec);
        let mut sorted: Vec<f64> = grid.to_vec();
        sorted.sort_by(f64::total_cmp);
        let pos = sorted.iter().position(|&s| s == points[imin].s).unwrap_or(0);
        let mut a = sorted[pos.saturating_sub(1)];
        let mut b = sorted[(pos + 1).min(sorted.len() - 1)];
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        let f = |s: f64| gap_point(&base, s).map(|p| p.gap);
        let mut c = b - phi * (b - a);
        let mut d = a + phi * (b - a);
        let (mut fc, mut fd) = (f(c)?, f(d)?);
        while b - a > 1e-4 {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - phi * (b - a);
                fc = f(c)?;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + phi * (b - a);
                fd = f(d)?;
            }
        }
        for (s, g) in [(c, fc), (d, fd)] {
            if g < min_gap {
                min_gap = g;
                argmin_s = s;
            }
        }
    }
    Ok(GapScan {
        grid: points,
        min_gap,
        argmin_s,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Gershgorin,
    Mixing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundCertificate {
    pub regime: Regime,
    pub s: f64,
    pub n_bits: usize,
    /// Cost bound `M' = 4M` used in the mixing regime.
    pub max_cost: u64,
    pub bound_value: f64,
    /// `ln bound_value`, finite even when the value underflows.
    pub ln_bound: f64,
}

impl LowerBoundCertificate {
    pub fn to_kv(&self) -> String {
        let regime = match self.regime {
            Regime::Gershgorin => "gershgorin",
            Regime::Mixing => "mixing",
        };
        format!(
            "regime={regime}\ns={}\nn_bits={}\nmax_cost={}\nbound={:e}\nln_bound={}\n",
            self.s, self.n_bits, self.max_cost, self.bound_value, self.ln_bound
        )
    }
}

/// Lower bound on `Δ(s)` for an instance with a unique solution.
pub fn lower_bound(instance: &Instance, s: f64) -> Result<LowerBoundCertificate> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::invalid(format!("s = {s} outside [0, 1]")));
    }
    let sols = solve_all(instance, 2)?;
    if sols.len() != 1 {
        return Err(Error::Inapplicable(format!(
            "bound requires a unique solution, found {}{}",
            sols.len(),
            if sols.truncated { "+" } else { "" }
        )));
    }
    let n = instance.n_bits();
    let nf = n as f64;
    let m_prime = 4 * instance.n_clauses() as u64;
    let threshold = (2.0 * nf + 1.0) / (2.0 * nf + 2.0);
    let (regime, bound_value, ln_bound) = if s >= threshold {
        let v = s - 2.0 * (1.0 - s) * nf;
        (Regime::Gershgorin, v, v.ln())
    } else {
        let mp = m_prime as f64;
        let base = 4.0 * mp * nf + 2.0 * mp + 2.0 * nf;
        let ln = -(2.0 * nf + 2.0).ln() - (nf - 1.0) * base.ln();
        (Regime::Mixing, ln.exp(), ln)
    };
    Ok(LowerBoundCertificate {
        regime,
        s,
        n_bits: n,
        max_cost: m_prime,
        bound_value,
        ln_bound,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certification {
    pub estimate_energy: f64,
    pub residual: f64,
    pub lower: f64,
    pub upper: f64,
}

impl Certification {
    pub fn contains(&self, e: f64) -> bool {
        self.lower <= e && e <= self.upper
    }

    pub fn to_kv(&self) -> String {
        format!(
            "estimate={}\nresidual={}\nlower={}\nupper={}\n",
            self.estimate_energy, self.residual, self.lower, self.upper
        )
    }
}

/// `ε = ‖(H − Ẽ)ψ‖`: some eigenvalue lies in `[Ẽ − ε, Ẽ + ε]`.
pub fn certify(spec: &HamiltonianSpec, state: &[f64], energy: f64) -> Result<Certification> {
    let hv = spec.apply(state)?;
    let norm2 = spec.dot(state, state);
    if (norm2 - 1.0).abs() > 1e-8 {
        return Err(Error::invalid(format!(
            "candidate state has squared norm {norm2}, expected 1"
        )));
    }
    let residual = par::sum_indexed(spec.exec, hv.len(), |i| {
        let r = hv[i] - energy * state[i];
        r * r
    })
    .sqrt();
    Ok(Certification {
        estimate_energy: energy,
        residual,
        lower: energy - residual,
        upper: energy + residual,
    })
}

/// `|x⟩ + λ Σ_{y~x} |y⟩ / (E_y − E_x)`, normalized.
pub fn first_order_candidate(spec: &HamiltonianSpec, x: &BitString) -> Result<Vec<f64>> {
    let idx = basis_index(spec, x)?;
    let lambda = spec.lambda();
    let ex = spec.costs[idx] as i64;
    let mut v = vec![0.0; spec.dim()];
    v[idx] = 1.0;
    for b in 0..spec.n_bits {
        let y = idx ^ (1 << b);
        let ey = spec.costs[y] as i64;
        if ey == ex {
            return Err(Error::DegenerateNeighbor { flip_set: vec![b] });
        }
        v[y] = lambda / (ey - ex) as f64;
    }
    normalize(&mut v);
    Ok(v)
}

fn basis_index(spec: &HamiltonianSpec, x: &BitString) -> Result<usize> {
    if x.len() != spec.n_bits {
        return Err(Error::invalid(format!(
            "assignment has {} bits, expected {}",
            x.len(),
            spec.n_bits
        )));
    }
    Ok(x.to_index() as usize)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Localization {
    /// `|⟨x|ψ_0⟩|²`.
    pub overlap: f64,
    /// Ground-state weight at each Hamming distance `0..=N` from `x`.
    pub profile: Vec<f64>,
}

pub fn localization_overlap(spec: &HamiltonianSpec, x: &BitString) -> Result<Localization> {
    let idx = basis_index(spec, x)?;
    let g = lowest_two(spec)?.ground_state;
    let mut profile = vec![0.0; spec.n_bits + 1];
    for (i, a) in g.iter().enumerate() {
        profile[(i ^ idx).count_ones() as usize] += a * a;
    }
    Ok(Localization {
        overlap: g[idx] * g[idx],
        profile,
    })
}

/// `E(λ) − E_x` for the level that starts at an isolated minimum `x` of the
/// cost, from the self-consistent equation `E = E_x − vᵀ (Q(H−E)Q)⁻¹ v`
/// with `v = λ Σ_{y~x} |y⟩` and `Q = 1 − |x⟩⟨x|`.
///
/// The inner solve is conjugate gradients and the quadratic form is
/// evaluated variationally, so the shift is resolved to near machine
/// precision relative to itself even when it is far below `ulp(E_x)`.
/// Requires `E_y > E_x` for every `y ≠ x` and small enough `λ`.
pub fn level_shift(instance: &Instance, x: &BitString, lambda: f64) -> Result<f64> {
    let spec = HamiltonianSpec::new(instance, Param::Lambda(lambda))?;
    let idx = basis_index(&spec, x)?;
    let ex = spec.costs[idx] as f64;
    if spec
        .costs
        .iter()
        .enumerate()
        .any(|(i, &c)| i != idx && c as f64 <= ex)
    {
        return Err(Error::Inapplicable(format!(
            "{x} is not the unique cost minimum"
        )));
    }
    if lambda == 0.0 {
        return Ok(0.0);
    }
    let dim = spec.dim();
    let mut v = vec![0.0; dim];
    for b in 0..spec.n_bits {
        v[idx ^ (1 << b)] = lambda;
    }
    // A w = Q (H − E) Q w, with w[idx] pinned to zero.
    let apply_a = |w: &[f64], e: f64, out: &mut Vec<f64>| {
        spec.apply_into(w, out);
        for (o, wi) in out.iter_mut().zip(w) {
            *o -= (ex + e) * wi;
        }
        out[idx] = 0.0;
    };
    let mut shift = -lambda * lambda * spec.n_bits as f64;
    let mut w = vec![0.0; dim];
    let mut aw = vec![0.0; dim];
    for _ in 0..50 {
        // CG on A w = v, warm-started.
        apply_a(&w, shift, &mut aw);
        let mut r: Vec<f64> = v.iter().zip(&aw).map(|(a, b)| a - b).collect();
        let mut p = r.clone();
        let mut rr = spec.dot(&r, &r);
        let vnorm2 = spec.dot(&v, &v);
        let mut ap = vec![0.0; dim];
        let mut iters = 0;
        while rr > 1e-30 * vnorm2 && iters < 10 * dim.max(100) {
            apply_a(&p, shift, &mut ap);
            let pap = spec.dot(&p, &ap);
            if pap <= 0.0 {
                return Err(Error::Inapplicable(
                    "projected operator is not positive definite (λ too large)".into(),
                ));
            }
            let a = rr / pap;
            axpy(&mut w, a, &p);
            axpy(&mut r, -a, &ap);
            let rr_new = spec.dot(&r, &r);
            let beta = rr_new / rr;
            rr = rr_new;
            p.iter_mut().zip(&r).for_each(|(pi, ri)| *pi = ri + beta * *pi);
            iters += 1;
        }
        if rr > 1e-24 * vnorm2 {
            return Err(Error::ConvergenceFailure {
                residual: (rr / vnorm2).sqrt(),
            });
        }
        apply_a(&w, shift, &mut aw);
        let quad = 2.0 * spec.dot(&v, &w) - spec.dot(&w, &aw);
        let next = -quad;
        let done = (next - shift).abs() <= 1e-15 * next.abs();
        shift = next;
        if done {
            return Ok(shift);
        }
    }
    Err(Error::ConvergenceFailure { residual: f64::NAN })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ec3::generate_random;

    fn ring() -> Instance {
        Instance::from_triples(6, &[[1, 2, 3], [3, 4, 5], [5, 6, 1]]).unwrap()
    }

    /// Random instance with exactly one solution.
    fn unique_fixture(n: usize, seed0: u64) -> (Instance, BitString) {
        for seed in seed0.. {
            let inst = generate_random(n, n * 2 / 3, seed).unwrap();
            let sols = solve_all(&inst, 2).unwrap();
            if sols.len() == 1 {
                return (inst, sols.solutions[0].bits.clone());
            }
        }
        unreachable!()
    }

    fn basis(dim: usize, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; dim];
        v[i] = 1.0;
        v
    }

    #[test]
    fn apply_endpoints() {
        let inst = ring();
        let h1 = HamiltonianSpec::new(&inst, Param::S(1.0)).unwrap();
        let x = BitString::from_index(0b000111, 6);
        let e = crate::ec3::cost(&inst, &x).unwrap() as f64;
        let out = h1.apply(&basis(64, 0b000111)).unwrap();
        assert_eq!(out, basis(64, 0b000111).iter().map(|v| v * e).collect::<Vec<_>>());

        let h0 = h1.with_param(Param::S(0.0)).unwrap();
        let u = vec![0.125; 64];
        let out = h0.apply(&u).unwrap();
        assert!(out.iter().all(|&v| (v + 6.0 * 0.125).abs() < 1e-15));
        assert!(h0.apply(&[1.0; 3]).is_err());
    }

    #[test]
    fn apply_is_symmetric() {
        let inst = generate_random(9, 5, 3).unwrap();
        let h = HamiltonianSpec::new(&inst, Param::S(0.4)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u: Vec<f64> = (0..512).map(|_| rng.random::<f64>() - 0.5).collect();
        let v: Vec<f64> = (0..512).map(|_| rng.random::<f64>() - 0.5).collect();
        let a = h.dot(&u, &h.apply(&v).unwrap());
        let b = h.dot(&v, &h.apply(&u).unwrap());
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn dense_matches_apply() {
        let inst = generate_random(5, 3, 2).unwrap();
        let h = HamiltonianSpec::new(&inst, Param::Lambda(0.3)).unwrap();
        let m = h.dense().unwrap();
        for i in 0..32 {
            let col = h.apply(&basis(32, i)).unwrap();
            for j in 0..32 {
                assert_eq!(m[(j, i)], col[j]);
            }
        }
    }

    #[test]
    fn lowest_two_small_cases() {
        let inst = Instance::from_triples(3, &[[1, 2, 3]]).unwrap();
        let r = lowest_two(&HamiltonianSpec::new(&inst, Param::S(1.0)).unwrap()).unwrap();
        assert_eq!((r.e0, r.e1), (0.0, 0.0));
        let r = lowest_two(&HamiltonianSpec::new(&ring(), Param::S(1.0)).unwrap()).unwrap();
        assert!(r.e0.abs() < 1e-12 && r.e1.abs() < 1e-12);
        let inst = generate_random(10, 6, 5).unwrap();
        let r = lowest_two(&HamiltonianSpec::new(&inst, Param::S(0.0)).unwrap()).unwrap();
        assert!((r.e0 + 10.0).abs() < 1e-9 && (r.e1 + 8.0).abs() < 1e-9);
    }

    #[test]
    fn krylov_matches_dense() {
        for seed in 0..4 {
            let inst = generate_random(9, 6, seed).unwrap();
            for s in [0.2, 0.55, 0.8, 1.0] {
                let h = HamiltonianSpec::new(&inst, Param::S(s)).unwrap();
                let k = lowest_two(&h).unwrap();
                let d = dense_lowest_two(&h).unwrap();
                assert!((k.e0 - d.e0).abs() < 1e-8, "seed {seed} s {s}");
                assert!((k.e1 - d.e1).abs() < 1e-8, "seed {seed} s {s}");
            }
        }
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let inst = generate_random(11, 7, 9).unwrap();
        let h = HamiltonianSpec::new(&inst, Param::S(0.6)).unwrap();
        let a = lowest_two(&h.clone().with_exec(Exec::Sequential)).unwrap();
        let b = lowest_two(&h.with_exec(Exec::Parallel)).unwrap();
        assert_eq!(a.e0, b.e0);
        assert_eq!(a.e1, b.e1);
    }

    #[test]
    fn bound_endpoints() {
        let inst = Instance::from_triples(4, &[[1, 2, 3], [2, 3, 4], [1, 2, 4]]).unwrap();
        assert_eq!(solve_all(&inst, 10).unwrap().len(), 1);
        let c = lower_bound(&inst, 1.0).unwrap();
        assert_eq!(c.regime, Regime::Gershgorin);
        assert_eq!(c.bound_value, 1.0);
        let s = 9.0 / 10.0;
        let c = lower_bound(&inst, s).unwrap();
        assert!((c.bound_value - 0.1).abs() < 1e-12);
        let c = lower_bound(&inst, 0.3).unwrap();
        assert_eq!(c.regime, Regime::Mixing);
        assert!(c.bound_value > 0.0);
        assert!(matches!(lower_bound(&ring(), 0.5), Err(Error::Inapplicable(_))));
    }

    #[test]
    fn certify_basis_state() {
        let inst = generate_random(8, 4, 1).unwrap();
        let lambda = 0.07;
        let h = HamiltonianSpec::new(&inst, Param::Lambda(lambda)).unwrap();
        let idx = 37;
        let c = certify(&h, &basis(256, idx), h.costs()[idx] as f64).unwrap();
        assert!((c.residual - lambda * 8f64.sqrt()).abs() < 1e-12);
        assert!(certify(&h, &vec![1.0; 256], 0.0).is_err());
        let d = dense_lowest_two(&h).unwrap();
        let c = certify(&h, &d.ground_state, d.e0).unwrap();
        assert!(c.residual < 1e-10);
    }

    #[test]
    fn localization_limits() {
        let (inst, x) = unique_fixture(6, 0);
        let x = &x;
        let h = HamiltonianSpec::new(&inst, Param::Lambda(0.0)).unwrap();
        assert!((localization_overlap(&h, x).unwrap().overlap - 1.0).abs() < 1e-12);
        let h = h.with_param(Param::Lambda(1e3)).unwrap();
        let loc = localization_overlap(&h, x).unwrap();
        assert!((loc.overlap * 64.0 - 1.0).abs() < 0.1, "{}", loc.overlap);
        assert!((loc.profile.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn level_shift_matches_dense() {
        let (inst, x) = unique_fixture(8, 0);
        for lambda in [0.05, 0.1, 0.2] {
            let shift = level_shift(&inst, &x, lambda).unwrap();
            let h = HamiltonianSpec::new(&inst, Param::Lambda(lambda)).unwrap();
            let e0 = full_spectrum(&h).unwrap()[0];
            assert!((shift - e0).abs() < 1e-12, "{lambda}: {shift} vs {e0}");
        }
        assert!(matches!(
            level_shift(&ring(), &BitString::from_index(0b001001, 6), 0.1),
            Err(Error::Inapplicable(_))
        ));
    }

    #[test]
    fn order2_from_exact_levels() {
        // Degenerate solutions share E^(2) = -9/2; the quadratic coefficient
        // of the lowest level converges to it as λ → 0.
        let h = HamiltonianSpec::new(&ring(), Param::Lambda(1e-3)).unwrap();
        let e = full_spectrum(&h).unwrap()[0];
        assert!((e / 1e-6 + 4.5).abs() < 0.02);
    }

    #[test]
    fn gap_scan_unique_solution() {
        let (inst, _) = unique_fixture(9, 0);
        let grid: Vec<f64> = (1..=20).map(|k| k as f64 / 20.0).collect();
        let scan = gap_scan(&inst, &grid, true).unwrap();
        assert!(scan.grid.iter().all(|p| p.gap > 0.0));
        assert!(scan.grid.iter().all(|p| scan.min_gap <= p.gap));
        let last = scan.grid.last().unwrap();
        let mut costs = cost_table(&inst, Exec::Sequential);
        costs.sort_unstable();
        assert!((last.gap - (costs[1] - costs[0]) as f64).abs() < 1e-9);
        let mut buf = Vec::new();
        scan.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("s,e0,e1,gap\n"));
        assert!(gap_scan(&inst, &[0.0], false).is_err());
    }
}
