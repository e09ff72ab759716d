//! Weak (barycentric) optimal transport `d_p^w` for `p ∈ {1, 2}`.
//!
//! The cost only sees the barycentres `w_i = Σ_j γ_ij y_j` of the mass sent
//! from each source atom, so the feasible set is the linear image `W` of the
//! transport polytope. Its vertices are north-west-corner couplings with the
//! target atoms sorted by decreasing value and the source atoms in some
//! order, which gives a cheap linear-minimisation oracle for Frank–Wolfe.

use crate::error::{Error, Result};
use crate::scenario::DiscreteDistribution;
use crate::transport::lp::{solve_lp, ConstraintOp, LinearProgram};
use crate::transport::ot::{quantile_coupling, Coupling};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeakMethod {
    Lp,
    FrankWolfe,
    Exhaustive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeakTransport {
    pub value: f64,
    pub cost: f64,
    pub coupling: Coupling,
    pub method: WeakMethod,
    pub iterations: usize,
    /// Frank–Wolfe duality gap at termination (zero for exact methods).
    pub gap: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct FrankWolfeOptions {
    pub gap_tol: f64,
    pub max_iter: usize,
    /// Source-support size up to which exhaustive search backs up a failed run.
    pub exhaustive_limit: usize,
}

impl Default for FrankWolfeOptions {
    fn default() -> Self {
        FrankWolfeOptions {
            gap_tol: 1e-7,
            max_iter: 100_000,
            exhaustive_limit: 4,
        }
    }
}

pub fn weak_ot(mu: &DiscreteDistribution, nu: &DiscreteDistribution, p: f64) -> Result<WeakTransport> {
    weak_ot_with(mu, nu, p, FrankWolfeOptions::default())
}

pub fn weak_ot_with(
    mu: &DiscreteDistribution,
    nu: &DiscreteDistribution,
    p: f64,
    opts: FrankWolfeOptions,
) -> Result<WeakTransport> {
    if p == 1.0 {
        weak_ot_lp(mu, nu)
    } else if p == 2.0 {
        match frank_wolfe(mu, nu, opts) {
            Ok(r) => Ok(r),
            Err(_) if mu.len() <= opts.exhaustive_limit => weak_ot_exhaustive(mu, nu),
            Err(e) => Err(e),
        }
    } else {
        Err(Error::InvalidParameter(format!(
            "weak transport supports p = 1 or 2, got {p}"
        )))
    }
}

fn weak_ot_lp(mu: &DiscreteDistribution, nu: &DiscreteDistribution) -> Result<WeakTransport> {
    let (a, x) = (mu.weights(), mu.values());
    let (b, y) = (nu.weights(), nu.values());
    let (n, m) = (a.len(), b.len());
    let mut lp = LinearProgram::new();
    for _ in 0..n * m {
        lp.add_var(0.0, 0.0, f64::INFINITY);
    }
    let z: Vec<usize> = (0..n).map(|_| lp.add_var(1.0, 0.0, f64::INFINITY)).collect();
    for i in 0..n {
        lp.add_constraint((0..m).map(|j| (i * m + j, 1.0)).collect(), ConstraintOp::Eq, a[i]);
        // z_i >= ± (a_i x_i - Σ_j γ_ij y_j)
        let mut up: Vec<(usize, f64)> = (0..m).map(|j| (i * m + j, -y[j])).collect();
        up.push((z[i], -1.0));
        lp.add_constraint(up, ConstraintOp::Le, -a[i] * x[i]);
        let mut dn: Vec<(usize, f64)> = (0..m).map(|j| (i * m + j, y[j])).collect();
        dn.push((z[i], -1.0));
        lp.add_constraint(dn, ConstraintOp::Le, a[i] * x[i]);
    }
    for j in 0..m.saturating_sub(1) {
        lp.add_constraint((0..n).map(|i| (i * m + j, 1.0)).collect(), ConstraintOp::Eq, b[j]);
    }
    let sol = solve_lp(&lp)?.require_optimal("weak transport LP")?;
    let mut coupling = Coupling::zeros(a, b);
    for k in 0..n * m {
        coupling.weights[k] = sol.x[k].max(0.0);
    }
    let cost = barycentric_cost(mu, nu, &coupling, 1.0);
    Ok(WeakTransport {
        value: cost,
        cost,
        coupling,
        method: WeakMethod::Lp,
        iterations: 0,
        gap: 0.0,
    })
}

/// `Σ_i μ_i |x_i − bary_i(γ)|^p` for a given coupling.
pub fn barycentric_cost(mu: &DiscreteDistribution, nu: &DiscreteDistribution, c: &Coupling, p: f64) -> f64 {
    let (a, x) = (mu.weights(), mu.values());
    let y = nu.values();
    (0..a.len())
        .map(|i| {
            let w: f64 = (0..y.len()).map(|j| c.get(i, j) * y[j]).sum();
            a[i] * (x[i] - w / a[i]).abs().powf(p)
        })
        .sum()
}

/// Quadratic objective over barycentre masses: `Σ (a_i x_i − w_i)² / a_i`.
struct Quadratic {
    target: Vec<f64>,
    inv_weight: Vec<f64>,
}

impl Quadratic {
    fn new(mu: &DiscreteDistribution) -> Self {
        Quadratic {
            target: mu.atoms().iter().map(|a| a.weight * a.value).collect(),
            inv_weight: mu.atoms().iter().map(|a| 1.0 / a.weight).collect(),
        }
    }

    fn value(&self, w: &[f64]) -> f64 {
        w.iter()
            .zip(&self.target)
            .zip(&self.inv_weight)
            .map(|((w, t), k)| (t - w) * (t - w) * k)
            .sum()
    }

    fn gradient(&self, w: &[f64]) -> Vec<f64> {
        w.iter()
            .zip(&self.target)
            .zip(&self.inv_weight)
            .map(|((w, t), k)| 2.0 * (w - t) * k)
            .collect()
    }

    /// Minimiser of `t ↦ f(w + t d)` on `[0, t_max]`.
    fn line_search(&self, grad: &[f64], d: &[f64], t_max: f64) -> f64 {
        let slope: f64 = grad.iter().zip(d).map(|(g, d)| g * d).sum();
        let curv: f64 = d.iter().zip(&self.inv_weight).map(|(d, k)| 2.0 * d * d * k).sum();
        if curv <= 0.0 {
            return if slope < 0.0 { t_max } else { 0.0 };
        }
        (-slope / curv).clamp(0.0, t_max)
    }
}

/// A vertex of `W`: the NW coupling for a given source order.
#[derive(Clone)]
struct Vertex {
    order: Vec<usize>,
    coupling: Coupling,
    w: Vec<f64>,
}

fn vertex(mu: &DiscreteDistribution, nu: &DiscreteDistribution, order: Vec<usize>) -> Vertex {
    let a = mu.weights();
    let mut b = nu.weights();
    let mut y = nu.values();
    b.reverse();
    y.reverse();
    let permuted: Vec<f64> = order.iter().map(|&i| a[i]).collect();
    let nw = quantile_coupling(&permuted, &b);
    let (n, m) = (a.len(), b.len());
    let mut coupling = Coupling::zeros(a.clone(), nu.weights());
    let mut w = vec![0.0; n];
    for (r, &i) in order.iter().enumerate() {
        for j in 0..m {
            let g = nw.get(r, j);
            if g != 0.0 {
                coupling.set(i, m - 1 - j, g);
                w[i] += g * y[j];
            }
        }
    }
    Vertex { order, coupling, w }
}

/// Linear minimisation over `W`: pair small gradients with large targets.
fn lmo(mu: &DiscreteDistribution, nu: &DiscreteDistribution, grad: &[f64]) -> Vertex {
    let mut order: Vec<usize> = (0..grad.len()).collect();
    order.sort_by(|&i, &j| grad[i].total_cmp(&grad[j]).then(i.cmp(&j)));
    vertex(mu, nu, order)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn assemble(mu: &DiscreteDistribution, nu: &DiscreteDistribution, active: &[(Vertex, f64)]) -> Coupling {
    let mut c = Coupling::zeros(mu.weights(), nu.weights());
    for (v, lam) in active {
        for (k, g) in v.coupling.weights.iter().enumerate() {
            c.weights[k] += lam * g;
        }
    }
    c
}

/// Away-step Frank–Wolfe for `p = 2` with exact line search.
fn frank_wolfe(
    mu: &DiscreteDistribution,
    nu: &DiscreteDistribution,
    opts: FrankWolfeOptions,
) -> Result<WeakTransport> {
    let f = Quadratic::new(mu);
    let n = mu.len();
    let start = vertex(mu, nu, (0..n).collect());
    let mut w = start.w.clone();
    let mut active: Vec<(Vertex, f64)> = vec![(start, 1.0)];
    let mut gap = f64::INFINITY;
    for it in 0..opts.max_iter {
        let grad = f.gradient(&w);
        let s = lmo(mu, nu, &grad);
        let fw_dir: Vec<f64> = s.w.iter().zip(&w).map(|(s, w)| s - w).collect();
        gap = -dot(&grad, &fw_dir);
        if gap < opts.gap_tol {
            let mut active = active;
            polish(&f, &mut active, &mut w);
            let coupling = assemble(mu, nu, &active);
            let cost = f.value(&w).max(0.0);
            return Ok(WeakTransport {
                value: cost.sqrt(),
                cost,
                coupling,
                method: WeakMethod::FrankWolfe,
                iterations: it,
                gap: gap.max(0.0),
            });
        }
        let (ai, away_gap) = active
            .iter()
            .enumerate()
            .map(|(k, (v, _))| (k, dot(&grad, &v.w) - dot(&grad, &w)))
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
            .expect("active set is never empty");
        if gap >= away_gap || active.len() == 1 {
            let t = f.line_search(&grad, &fw_dir, 1.0);
            for (_, lam) in active.iter_mut() {
                *lam *= 1.0 - t;
            }
            match active.iter_mut().find(|(v, _)| v.order == s.order) {
                Some(entry) => entry.1 += t,
                None => active.push((s, t)),
            }
            for (wi, d) in w.iter_mut().zip(&fw_dir) {
                *wi += t * d;
            }
        } else {
            let lam_a = active[ai].1;
            let t_max = lam_a / (1.0 - lam_a);
            let dir: Vec<f64> = w.iter().zip(&active[ai].0.w).map(|(w, v)| w - v).collect();
            let t = f.line_search(&grad, &dir, t_max);
            for (_, lam) in active.iter_mut() {
                *lam *= 1.0 + t;
            }
            active[ai].1 -= t;
            for (wi, d) in w.iter_mut().zip(&dir) {
                *wi += t * d;
            }
        }
        active.retain(|(_, lam)| *lam > 1e-15);
        let total: f64 = active.iter().map(|a| a.1).sum();
        for a in active.iter_mut() {
            a.1 /= total;
        }
    }
    Err(Error::Solver(format!(
        "Frank–Wolfe stopped after {} iterations with gap {gap:e}",
        opts.max_iter
    )))
}

/// Replaces the iterate by the exact minimiser over the affine hull of the
/// active vertices when that point stays inside their convex hull.
fn polish(f: &Quadratic, active: &mut [(Vertex, f64)], w: &mut Vec<f64>) {
    let pts: Vec<&[f64]> = active.iter().map(|(v, _)| v.w.as_slice()).collect();
    if let Some(lam) = affine_hull_minimiser(f, &pts) {
        if lam.iter().all(|&l| l >= 0.0) {
            let cand = combine(&pts, &lam);
            if f.value(&cand) <= f.value(w) {
                for (a, l) in active.iter_mut().zip(lam) {
                    a.1 = l;
                }
                *w = cand;
            }
        }
    }
}

fn combine(pts: &[&[f64]], lam: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; pts[0].len()];
    for (p, l) in pts.iter().zip(lam) {
        for (o, v) in out.iter_mut().zip(p.iter()) {
            *o += l * v;
        }
    }
    out
}

/// Solves `min f(Σ λ_k v_k)` s.t. `Σ λ_k = 1` through its KKT system.
/// Returns `None` when the points are affinely dependent.
fn affine_hull_minimiser(f: &Quadratic, pts: &[&[f64]]) -> Option<Vec<f64>> {
    let k = pts.len();
    if k == 1 {
        return Some(vec![1.0]);
    }
    let dim = k + 1;
    let mut a = nalgebra::DMatrix::<f64>::zeros(dim, dim);
    let mut rhs = nalgebra::DVector::<f64>::zeros(dim);
    for r in 0..k {
        for s in 0..k {
            a[(r, s)] = pts[r]
                .iter()
                .zip(pts[s].iter())
                .zip(&f.inv_weight)
                .map(|((x, y), c)| 2.0 * x * y * c)
                .sum();
        }
        a[(r, k)] = 1.0;
        a[(k, r)] = 1.0;
        rhs[r] = pts[r]
            .iter()
            .zip(&f.target)
            .zip(&f.inv_weight)
            .map(|((x, t), c)| 2.0 * x * t * c)
            .sum();
    }
    rhs[k] = 1.0;
    // Affine independence: the differences v_s − v_0 must be linearly independent.
    let diffs = nalgebra::DMatrix::<f64>::from_fn(pts[0].len(), k - 1, |i, s| pts[s + 1][i] - pts[0][i]);
    let scale = diffs.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-300);
    let sv = diffs.svd(false, false).singular_values;
    if sv.iter().any(|&s| s <= 1e-10 * scale) {
        return None;
    }
    let sol = a.lu().solve(&rhs)?;
    Some(sol.iter().take(k).copied().collect())
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..n).collect();
    fn rec(k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k == cur.len() {
            out.push(cur.clone());
            return;
        }
        for i in k..cur.len() {
            cur.swap(k, i);
            rec(k + 1, cur, out);
            cur.swap(k, i);
        }
    }
    rec(0, &mut cur, &mut out);
    out.sort();
    out
}

fn subsets(n: usize, max: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(start: usize, n: usize, max: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if !cur.is_empty() {
            f(cur);
        }
        if cur.len() == max {
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, max, cur, f);
            cur.pop();
        }
    }
    rec(0, n, max, &mut Vec::new(), f);
}

/// Exact `d_2^w` by enumerating every face of `W` spanned by affinely
/// independent vertices. Exponential; intended for source supports ≤ 4.
pub fn weak_ot_exhaustive(mu: &DiscreteDistribution, nu: &DiscreteDistribution) -> Result<WeakTransport> {
    let n = mu.len();
    if n > 4 {
        return Err(Error::SizeExceeded {
            what: "exhaustive weak transport support",
            size: n,
            budget: 4,
        });
    }
    let f = Quadratic::new(mu);
    let mut verts: Vec<Vertex> = Vec::new();
    for order in permutations(n) {
        let v = vertex(mu, nu, order);
        if !verts.iter().any(|u| u.w.iter().zip(&v.w).all(|(a, b)| (a - b).abs() < 1e-14)) {
            verts.push(v);
        }
    }
    // W lies in the hyperplane Σ w_i = mean(ν), so faces have at most n vertices.
    let mut best: Option<(f64, Vec<usize>, Vec<f64>)> = None;
    subsets(verts.len(), n, &mut |idx| {
        let pts: Vec<&[f64]> = idx.iter().map(|&k| verts[k].w.as_slice()).collect();
        let Some(lam) = affine_hull_minimiser(&f, &pts) else {
            return;
        };
        if lam.iter().any(|&l| l < -1e-12) {
            return;
        }
        let lam: Vec<f64> = lam.iter().map(|l| l.max(0.0)).collect();
        let val = f.value(&combine(&pts, &lam));
        if best.as_ref().map_or(true, |b| val < b.0) {
            best = Some((val, idx.to_vec(), lam));
        }
    });
    let (cost, idx, lam) = best.ok_or_else(|| Error::Solver("no feasible face found".into()))?;
    let active: Vec<(Vertex, f64)> = idx.iter().zip(lam).map(|(&k, l)| (verts[k].clone(), l)).collect();
    let cost = cost.max(0.0);
    Ok(WeakTransport {
        value: cost.sqrt(),
        cost,
        coupling: assemble(mu, nu, &active),
        method: WeakMethod::Exhaustive,
        iterations: 0,
        gap: 0.0,
    })
}
