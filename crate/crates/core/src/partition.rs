//! Metric-adapted partition of unity.
//!
//! `ω_Y(X) = χ₀(r^{-2} g_Y(X−Y))`, `ω(X) = ∫ ω_Y(X)|g_Y|^{1/2} dY`,
//! `φ_Y = ω_Y/ω` and `ψ_Y(X) = χ₀(½ r^{-2} g_Y(X−Y))`.
//!
//! The `dY` integral is discretized on a tensor product of one-dimensional
//! charts `S_i` with `S_i' = G_ii^{-1/2}`, so that lattice steps are uniform
//! in the metric along each axis. Quadrature weights are `h^{2n} Π S_i'`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WeylError};
use crate::jet::Jet;
use crate::metric::{MetricField, StructureConstants, WeightField};
use crate::quad::gauss_legendre;
use crate::sampling::SampleSpec;
use crate::symbol::{product, seminorm_at, SemiNormReport, Symbol, SymbolRef};
use crate::symplectic::QuadraticForm;
use crate::window::{chi0, chi0_jet};

/// How `ω(X)` is computed.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub enum Normalization {
    /// The same lattice sum as the members; the discrete identity is exact.
    Discrete,
    /// A lattice refined by the given factor, so the identity defect of the
    /// base lattice measures its quadrature error.
    Reference { refine: usize },
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PartitionOptions {
    /// Chart step as a fraction of `r`.
    pub step: f64,
    pub normalization: Normalization,
    /// `ω` must stay above this fraction of its constant-metric value.
    pub floor_factor: f64,
    /// Domain points checked against the floor.
    pub floor_samples: usize,
}

impl Default for PartitionOptions {
    fn default() -> Self {
        PartitionOptions {
            step: 0.25,
            normalization: Normalization::Discrete,
            floor_factor: 0.05,
            floor_samples: 400,
        }
    }
}

/// Axis-aligned box of phase space.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Domain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Domain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() || lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(WeylError::InvalidParameter {
                name: "domain".into(),
                reason: "need lo < hi componentwise".into(),
            });
        }
        Ok(Domain { lo, hi })
    }

    /// `|x| ≤ x_half`, `|ξ| ≤ xi_half`.
    pub fn phase_box(n: usize, x_half: f64, xi_half: f64) -> Self {
        let mut hi = vec![x_half; n];
        hi.extend(std::iter::repeat(xi_half).take(n));
        Domain {
            lo: hi.iter().map(|v| -v).collect(),
            hi,
        }
    }

    fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }
}

/// Monotone chart `u ↦ S(u)` sampled at `u = k h`, `k ∈ [k0, k0 + len)`.
#[derive(Clone, Debug)]
struct Chart {
    nodes: Vec<f64>,
    speed: Vec<f64>,
}

fn axis_speed(g: &MetricField, anchor: &[f64], axis: usize, s: f64) -> Result<f64> {
    let mut p = anchor.to_vec();
    p[axis] = s;
    let gx = g.eval(&p)?;
    Ok(1.0 / gx.matrix()[(axis, axis)].sqrt())
}

impl Chart {
    /// Covers `[lo, hi]` plus `extra` steps beyond each end.
    fn build(g: &MetricField, anchor: &[f64], axis: usize, lo: f64, hi: f64, h: f64, extra: usize) -> Result<Self> {
        let sub = 8;
        let dt = h / sub as f64;
        let march = |dir: f64| -> Result<(Vec<f64>, Vec<f64>)> {
            let mut s = anchor[axis];
            let mut nodes = Vec::new();
            let mut speed = Vec::new();
            let mut beyond = 0usize;
            loop {
                for _ in 0..sub {
                    let f = |v: f64| axis_speed(g, anchor, axis, v).map(|w| dir * w);
                    let k1 = f(s)?;
                    let k2 = f(s + 0.5 * dt * k1)?;
                    let k3 = f(s + 0.5 * dt * k2)?;
                    let k4 = f(s + dt * k3)?;
                    s += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                }
                nodes.push(s);
                speed.push(axis_speed(g, anchor, axis, s)?);
                let out = if dir > 0.0 { s > hi } else { s < lo };
                if out {
                    beyond += 1;
                    if beyond > extra {
                        break;
                    }
                }
                if nodes.len() > 1_000_000 {
                    return Err(WeylError::InvalidParameter {
                        name: "partition step".into(),
                        reason: "lattice too large".into(),
                    });
                }
            }
            Ok((nodes, speed))
        };
        let (mut left, mut lspeed) = march(-1.0)?;
        let (right, rspeed) = march(1.0)?;
        left.reverse();
        lspeed.reverse();
        let mut nodes = left;
        let mut speed = lspeed;
        nodes.push(anchor[axis]);
        speed.push(axis_speed(g, anchor, axis, anchor[axis])?);
        nodes.extend(right);
        speed.extend(rspeed);
        Ok(Chart { nodes, speed })
    }

    fn len(&self) -> usize {
        self.nodes.len()
    }

    /// Fractional node index of `t`, clamped to the chart.
    fn locate(&self, t: f64) -> f64 {
        let n = self.nodes.len();
        if t <= self.nodes[0] {
            return 0.0;
        }
        if t >= self.nodes[n - 1] {
            return (n - 1) as f64;
        }
        let k = self.nodes.partition_point(|&v| v <= t) - 1;
        let (a, b) = (self.nodes[k], self.nodes[k + 1]);
        k as f64 + (t - a) / (b - a)
    }
}

#[derive(Clone, Debug)]
pub struct Center {
    pub y: Vec<f64>,
    /// Quadrature weight `w_Y`.
    pub weight: f64,
    /// `|g_Y|^{1/2}`.
    pub sqrt_det: f64,
    pub form: QuadraticForm,
}

#[derive(Clone, Debug)]
struct Lattice {
    charts: Vec<Chart>,
    centers: Vec<Center>,
    strides: Vec<usize>,
    reach: Vec<usize>,
}

impl Lattice {
    fn build(g: &MetricField, r: f64, domain: &Domain, h: f64) -> Result<Self> {
        let d = domain.lo.len();
        let anchor = domain.center();
        let extra = (2.0 * r / h).ceil() as usize + 2;
        let charts: Vec<Chart> = (0..d)
            .map(|i| Chart::build(g, &anchor, i, domain.lo[i], domain.hi[i], h, extra))
            .collect::<Result<_>>()?;
        let dims: Vec<usize> = charts.iter().map(Chart::len).collect();
        let total: usize = dims.iter().product();
        if total > 4_000_000 {
            return Err(WeylError::InvalidParameter {
                name: "partition step".into(),
                reason: format!("lattice of {total} centers is too large"),
            });
        }
        let mut strides = vec![1usize; d];
        for i in (0..d.saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * dims[i + 1];
        }
        let centers: Vec<Center> = (0..total)
            .into_par_iter()
            .map(|flat| {
                let mut y = vec![0.0; d];
                let mut w = h.powi(d as i32);
                for i in 0..d {
                    let k = (flat / strides[i]) % dims[i];
                    y[i] = charts[i].nodes[k];
                    w *= charts[i].speed[k];
                }
                let form = g.eval(&y)?;
                Ok(Center {
                    sqrt_det: form.sqrt_det(),
                    weight: w,
                    form,
                    y,
                })
            })
            .collect::<Result<_>>()?;
        // index reach of every center's r-ball bounding box
        let mut reach = vec![0usize; d];
        for (flat, c) in centers.iter().enumerate() {
            let inv = c.form.inverse_matrix();
            for i in 0..d {
                let k = ((flat / strides[i]) % dims[i]) as f64;
                let e = r * inv[(i, i)].sqrt();
                let lo = charts[i].locate(c.y[i] - e);
                let hi = charts[i].locate(c.y[i] + e);
                let span = (k - lo).max(hi - k).ceil() as usize + 1;
                reach[i] = reach[i].max(span);
            }
        }
        Ok(Lattice {
            charts,
            centers,
            strides,
            reach,
        })
    }

    fn neighbors(&self, x: &[f64]) -> Vec<usize> {
        let d = x.len();
        let mut ranges = Vec::with_capacity(d);
        for i in 0..d {
            let f = self.charts[i].locate(x[i]);
            let n = self.charts[i].len();
            let lo = (f - self.reach[i] as f64).floor().max(0.0) as usize;
            let hi = ((f + self.reach[i] as f64).ceil() as usize).min(n - 1);
            ranges.push((lo, hi));
        }
        let mut out = Vec::new();
        let mut idx: Vec<usize> = ranges.iter().map(|r| r.0).collect();
        loop {
            out.push(idx.iter().zip(&self.strides).map(|(k, s)| k * s).sum());
            let mut i = d;
            loop {
                if i == 0 {
                    return out;
                }
                i -= 1;
                if idx[i] < ranges[i].1 {
                    idx[i] += 1;
                    break;
                }
                idx[i] = ranges[i].0;
            }
        }
    }

    fn omega_jet(&self, r: f64, x: &[f64], dir: &[f64], order: usize) -> Jet {
        let mut s = Jet::zero(order);
        for k in self.neighbors(x) {
            let c = &self.centers[k];
            let j = ball_jet(&c.form, &c.y, r * r, x, dir, order);
            if j.value() < 1.0 {
                s = s + chi0_jet(j).scale(c.weight * c.sqrt_det);
            }
        }
        s
    }

    fn omega(&self, r: f64, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for k in self.neighbors(x) {
            let c = &self.centers[k];
            s += c.weight * c.sqrt_det * chi0(scaled_distance(&c.form, &c.y, r * r, x));
        }
        s
    }
}

/// `r^{-2} g_Y(X − Y)`.
fn scaled_distance(g: &QuadraticForm, y: &[f64], r2: f64, x: &[f64]) -> f64 {
    let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    g.eval(&diff) / r2
}

/// Jet of `t ↦ r^{-2} g_Y(X + tT − Y)`, a quadratic polynomial in `t`.
fn ball_jet(g: &QuadraticForm, y: &[f64], r2: f64, x: &[f64], dir: &[f64], order: usize) -> Jet {
    let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let a = g.eval(&diff) / r2;
    let b = 2.0 * g.inner(&diff, dir) / r2;
    let c = g.eval(dir) / r2;
    let mut coeffs = [a, b, c];
    let len = (order + 1).min(3);
    coeffs[len..].iter_mut().for_each(|v| *v = 0.0);
    let mut full = vec![0.0; order + 1];
    full[..len].copy_from_slice(&coeffs[..len]);
    Jet::from_coeffs(&full)
}

/// `r^d ∫ χ₀(|Z|²) dZ`, the value of `ω` for the metric `Γ₀`.
pub fn flat_omega(d: usize, r: f64) -> f64 {
    // radial integral split at the plateau edge 1/√2
    let edge = std::f64::consts::FRAC_1_SQRT_2;
    let area = 2.0 * std::f64::consts::PI.powi(d as i32 / 2) / crate::jet::factorial(d / 2 - 1);
    let mut s = edge.powi(d as i32) / d as f64;
    let (x, w) = gauss_legendre(48, edge, 1.0);
    for (rho, wt) in x.iter().zip(&w) {
        s += wt * rho.powi(d as i32 - 1) * chi0(rho * rho);
    }
    area * s * r.powi(d as i32)
}

pub struct PartitionGrid {
    metric: MetricField,
    r: f64,
    domain: Domain,
    lattice: Lattice,
    reference: Option<Lattice>,
    options: PartitionOptions,
}

impl std::fmt::Debug for PartitionGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PartitionGrid")
            .field("metric", &self.metric.name())
            .field("r", &self.r)
            .field("centers", &self.lattice.centers.len())
            .field("options", &self.options)
            .finish()
    }
}

/// Default radius `min(C₀^{-1/2}, μ_m^{-1/2}) / 2`.
pub fn default_radius(k: &StructureConstants) -> f64 {
    0.5 * k.c0.max(k.mu_m).powf(-0.5)
}

pub fn build_partition(
    g: &MetricField,
    r: f64,
    domain: &Domain,
    constants: &StructureConstants,
    opts: &PartitionOptions,
) -> Result<Arc<PartitionGrid>> {
    if domain.lo.len() != 2 * g.dim_n() {
        return Err(WeylError::DimensionMismatch {
            expected: 2 * g.dim_n(),
            got: domain.lo.len(),
        });
    }
    Domain::new(domain.lo.clone(), domain.hi.clone())?;
    if !(r > 0.0) || r > constants.c0.powf(-0.5) * (1.0 + 1e-12) {
        return Err(WeylError::Precondition(format!(
            "partition radius {r} must lie in (0, C0^(-1/2)] with C0 = {}",
            constants.c0
        )));
    }
    if !(opts.step > 0.0 && opts.step <= 1.0) {
        return Err(WeylError::InvalidParameter {
            name: "step".into(),
            reason: "must lie in (0, 1]".into(),
        });
    }
    let h = opts.step * r;
    let lattice = Lattice::build(g, r, domain, h)?;
    let reference = match opts.normalization {
        Normalization::Discrete => None,
        Normalization::Reference { refine } => {
            if refine < 2 {
                return Err(WeylError::InvalidParameter {
                    name: "refine".into(),
                    reason: "must be at least 2".into(),
                });
            }
            Some(Lattice::build(g, r, domain, h / refine as f64)?)
        }
    };
    let grid = PartitionGrid {
        metric: g.clone(),
        r,
        domain: domain.clone(),
        lattice,
        reference,
        options: opts.clone(),
    };
    let floor = opts.floor_factor * flat_omega(domain.lo.len(), r);
    let spec = SampleSpec {
        lo: domain.lo.clone(),
        hi: domain.hi.clone(),
        lattice: opts.floor_samples,
        random: 0,
        seed: 0,
    };
    for x in spec.points()? {
        let w = grid.omega(&x);
        if !(w >= floor) {
            return Err(WeylError::PartitionFloor { point: x, value: w });
        }
    }
    Ok(Arc::new(grid))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MemberKind {
    Omega,
    Phi,
    Psi,
}

impl PartitionGrid {
    pub fn metric(&self) -> &MetricField {
        &self.metric
    }

    pub fn radius(&self) -> f64 {
        self.r
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn options(&self) -> &PartitionOptions {
        &self.options
    }

    pub fn len(&self) -> usize {
        self.lattice.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lattice.centers.is_empty()
    }

    pub fn center(&self, idx: usize) -> &Center {
        &self.lattice.centers[idx]
    }

    pub fn centers(&self) -> &[Center] {
        &self.lattice.centers
    }

    /// Centers whose `r`-ball may contain `x`.
    pub fn neighbors(&self, x: &[f64]) -> Vec<usize> {
        self.lattice.neighbors(x)
    }

    fn norm_lattice(&self) -> &Lattice {
        self.reference.as_ref().unwrap_or(&self.lattice)
    }

    /// `ω(X, r)`.
    pub fn omega(&self, x: &[f64]) -> f64 {
        self.norm_lattice().omega(self.r, x)
    }

    pub fn omega_member(&self, idx: usize, x: &[f64]) -> f64 {
        let c = self.center(idx);
        chi0(scaled_distance(&c.form, &c.y, self.r * self.r, x))
    }

    pub fn phi(&self, idx: usize, x: &[f64]) -> f64 {
        let w = self.omega_member(idx, x);
        if w == 0.0 {
            return 0.0;
        }
        w / self.omega(x)
    }

    pub fn psi(&self, idx: usize, x: &[f64]) -> f64 {
        let c = self.center(idx);
        chi0(0.5 * scaled_distance(&c.form, &c.y, self.r * self.r, x))
    }

    /// `Σ_Y w_Y φ_Y(X) |g_Y|^{1/2}`.
    pub fn identity_sum(&self, x: &[f64]) -> f64 {
        self.lattice.omega(self.r, x) / self.omega(x)
    }

    /// `Σ_Y w_Y a_Y(X) |g_Y|^{1/2}` for `a_Y = φ_Y a`.
    pub fn reconstruct(&self, a: &dyn Symbol, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for k in self.neighbors(x) {
            let c = self.center(k);
            s += c.weight * c.sqrt_det * self.phi(k, x) * a.value(x);
        }
        s
    }

    /// `g_X`-distance from `x` to the boundary of the domain.
    pub fn boundary_distance(&self, x: &[f64]) -> Result<f64> {
        let gx = self.metric.eval(x)?;
        let inv = gx.inverse_matrix();
        let mut best = f64::INFINITY;
        for i in 0..x.len() {
            let s = inv[(i, i)].sqrt();
            best = best.min((x[i] - self.domain.lo[i]) / s);
            best = best.min((self.domain.hi[i] - x[i]) / s);
        }
        Ok(best)
    }

    /// At least `2r` from the boundary in the metric at `x`.
    pub fn is_interior(&self, x: &[f64]) -> Result<bool> {
        Ok(self.boundary_distance(x)? >= 2.0 * self.r)
    }

    /// Deterministic interior points: a Halton sequence in the domain,
    /// filtered by [`PartitionGrid::is_interior`].
    pub fn interior_points(&self, count: usize) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(count);
        let mut batch = count.max(16);
        let mut skip = 0;
        while out.len() < count {
            let spec = SampleSpec {
                lo: self.domain.lo.clone(),
                hi: self.domain.hi.clone(),
                lattice: skip + batch,
                random: 0,
                seed: 0,
            };
            let pts = spec.points()?;
            for p in pts.into_iter().skip(skip) {
                if self.is_interior(&p)? {
                    out.push(p);
                    if out.len() == count {
                        break;
                    }
                }
            }
            skip += batch;
            batch *= 2;
            if skip > 100 * count + 10_000 {
                return Err(WeylError::Precondition("domain has no interior at this radius".into()));
            }
        }
        Ok(out)
    }

    /// Index of the center nearest to `x` in chart coordinates.
    pub fn nearest_center(&self, x: &[f64]) -> usize {
        let mut flat = 0;
        for i in 0..x.len() {
            let k = self.lattice.charts[i].locate(x[i]).round() as usize;
            flat += k * self.lattice.strides[i];
        }
        flat
    }

    pub fn member(self: &Arc<Self>, idx: usize, kind: MemberKind) -> SymbolRef {
        Arc::new(MemberSymbol {
            grid: self.clone(),
            idx,
            kind,
        })
    }
}

/// `ω_Y`, `φ_Y` or `ψ_Y` as a symbol.
pub struct MemberSymbol {
    grid: Arc<PartitionGrid>,
    idx: usize,
    kind: MemberKind,
}

impl Symbol for MemberSymbol {
    fn dim_n(&self) -> usize {
        self.grid.metric.dim_n()
    }

    fn name(&self) -> String {
        format!("{:?}[{}]", self.kind, self.idx)
    }

    fn jet(&self, x: &[f64], dir: &[f64], order: usize) -> Jet {
        let g = &self.grid;
        let c = g.center(self.idx);
        let r2 = g.r * g.r;
        let q = ball_jet(&c.form, &c.y, r2, x, dir, order);
        match self.kind {
            MemberKind::Psi => chi0_jet(q.scale(0.5)),
            MemberKind::Omega => chi0_jet(q),
            MemberKind::Phi => {
                if q.value() >= 1.0 {
                    return Jet::zero(order);
                }
                chi0_jet(q) / g.norm_lattice().omega_jet(g.r, x, dir, order)
            }
        }
    }

    fn decays(&self) -> bool {
        true
    }
}

/// Sample points inside `U_{Y, ρ}` on a polar grid in `g_Y` coordinates.
pub fn ball_samples(form: &QuadraticForm, y: &[f64], rho: f64, radial: usize, angular: usize) -> Vec<Vec<f64>> {
    let d = y.len();
    let dirs = crate::sampling::unit_directions(d, angular, 29);
    let mut pts = vec![y.to_vec()];
    for i in 1..=radial {
        let s = rho * i as f64 / radial as f64;
        for u in &dirs {
            for sign in [1.0, -1.0] {
                let t = form.unit_direction(u);
                pts.push(y.iter().zip(&t).map(|(a, b)| a + sign * s * b).collect());
            }
        }
    }
    pts
}

/// `‖member‖^{(l)}_{S(1,g)}` sampled on its support.
pub fn member_seminorm(grid: &Arc<PartitionGrid>, idx: usize, kind: MemberKind, l: usize) -> Result<SemiNormReport> {
    let c = grid.center(idx);
    let rho = match kind {
        MemberKind::Psi => std::f64::consts::SQRT_2 * grid.r,
        _ => grid.r,
    };
    let pts = ball_samples(&c.form, &c.y, rho, 12, 16);
    let s = grid.member(idx, kind);
    let one = WeightField::one(grid.metric.dim_n());
    seminorm_at(s.as_ref(), &one, &grid.metric, l, &pts, 12, 31)
}

/// Max of [`member_seminorm`] over the given centers.
pub fn max_member_seminorm(
    grid: &Arc<PartitionGrid>,
    centers: &[usize],
    kind: MemberKind,
    l: usize,
) -> Result<SemiNormReport> {
    let reps: Vec<SemiNormReport> = centers
        .par_iter()
        .map(|&i| member_seminorm(grid, i, kind, l))
        .collect::<Result<_>>()?;
    let best = reps
        .into_iter()
        .max_by(|a, b| a.value.total_cmp(&b.value))
        .ok_or_else(|| WeylError::Precondition("no centers given".into()))?;
    Ok(best)
}

/// `a_Y = φ_Y a` for every center, built on demand.
pub struct SplitSymbol {
    pub grid: Arc<PartitionGrid>,
    pub symbol: SymbolRef,
}

impl SplitSymbol {
    pub fn part(&self, idx: usize) -> SymbolRef {
        product(self.grid.member(idx, MemberKind::Phi), self.symbol.clone())
    }

    pub fn reconstruct(&self, x: &[f64]) -> f64 {
        self.grid.reconstruct(self.symbol.as_ref(), x)
    }

    /// `‖a_Y‖^{(l)}_{S(m(Y), g_Y)}` with metric and weight frozen at `Y`.
    pub fn frozen_seminorm(&self, idx: usize, m: &WeightField, l: usize) -> Result<SemiNormReport> {
        let c = self.grid.center(idx);
        let my = m.eval(&c.y);
        let n = self.grid.metric.dim_n();
        let frozen = MetricField::constant(c.form.clone());
        let weight = WeightField::new(n, "frozen", Arc::new(move |_| my));
        let pts = ball_samples(&c.form, &c.y, self.grid.r, 12, 16);
        seminorm_at(self.part(idx).as_ref(), &weight, &frozen, l, &pts, 12, 37)
    }
}

/// Requires `r ≤ min(C₀^{-1/2}, μ_m^{-1/2})`.
pub fn split_symbol(a: SymbolRef, grid: &Arc<PartitionGrid>, constants: &StructureConstants) -> Result<SplitSymbol> {
    let bound = constants.c0.max(constants.mu_m).powf(-0.5);
    if grid.r > bound * (1.0 + 1e-12) {
        return Err(WeylError::Precondition(format!(
            "splitting radius {} exceeds min(C0, mu)^(-1/2) = {bound}",
            grid.r
        )));
    }
    if a.dim_n() != grid.metric.dim_n() {
        return Err(WeylError::DimensionMismatch {
            expected: 2 * grid.metric.dim_n(),
            got: 2 * a.dim_n(),
        });
    }
    Ok(SplitSymbol {
        grid: grid.clone(),
        symbol: a,
    })
}
