//! Orbit iteration and the numerical analyses built on top of it: fixed
//! points with stability, cycles, omega-limit estimates, Cesaro averages,
//! itineraries, convergence-rate fits.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use crate::linalg;
use crate::sample;
use crate::simplex::{renormalize_in_place, Normalization, SimplexError, SimplexPoint};
use crate::tensor::HeredityTensor;
use crate::volterra::{PermutedVolterra, SkewSymmetricMatrix};

/// A reported fixed point must satisfy distance(V(x), x) within this bound.
pub const RESIDUAL_TOL: f64 = 1e-10;
/// Roots closer than this (sup norm) are treated as the same point.
pub const DEDUP_TOL: f64 = 1e-8;
/// Central-difference step for numerical Jacobians. Quadratic maps make
/// central differences exact up to rounding.
pub const FD_STEP: f64 = 1e-7;
/// Spectrum magnitudes within this band of 1 are treated as neutral.
pub const HYPERBOLICITY_BAND: f64 = 1e-9;
/// Distances below this are saturated round-off, excluded from rate fits.
pub const SATURATION_TOL: f64 = 1e-15;
/// Cesaro oscillation below this is called converging.
pub const CESARO_CONVERGING_TOL: f64 = 1e-3;
/// Cesaro oscillation above this is called oscillating.
pub const CESARO_OSCILLATING_TOL: f64 = 5e-2;
/// Points kept at the end of a trajectory when no window is specified.
pub const DEFAULT_TAIL_WINDOW: usize = 512;
/// Clustering subsamples tails longer than this, keeping both endpoints.
pub const OMEGA_SUBSAMPLE_CAP: usize = 2048;

const NEWTON_TOL: f64 = 1e-13;

/// Anything that maps the simplex into itself. `apply_raw` writes the raw
/// image; callers renormalize to absorb float drift.
pub trait SimplexMap {
    fn dim(&self) -> usize;
    fn apply_raw(&self, x: &[f64], out: &mut [f64]);

    /// One renormalized step.
    fn step(&self, x: &SimplexPoint) -> Result<SimplexPoint, SimplexError> {
        if x.dim() != self.dim() {
            return Err(SimplexError::DimensionMismatch {
                expected: self.dim(),
                got: x.dim(),
            });
        }
        let mut out = vec![0.0; self.dim()];
        self.apply_raw(x.coords(), &mut out);
        SimplexPoint::new(out, Normalization::Renormalize)
    }
}

impl SimplexMap for HeredityTensor {
    fn dim(&self) -> usize {
        self.m()
    }
    fn apply_raw(&self, x: &[f64], out: &mut [f64]) {
        HeredityTensor::apply_raw(self, x, out);
    }
}

impl SimplexMap for SkewSymmetricMatrix {
    fn dim(&self) -> usize {
        self.m()
    }
    fn apply_raw(&self, x: &[f64], out: &mut [f64]) {
        SkewSymmetricMatrix::apply_raw(self, x, out);
    }
}

impl SimplexMap for PermutedVolterra {
    fn dim(&self) -> usize {
        self.matrix().m()
    }
    fn apply_raw(&self, x: &[f64], out: &mut [f64]) {
        PermutedVolterra::apply_raw(self, x, out);
    }
}

/// `inner` composed with itself `times` times, without intermediate
/// renormalization so the composition stays smooth for root finding.
pub struct IteratedMap<'a, M: SimplexMap + ?Sized> {
    inner: &'a M,
    times: usize,
}

impl<'a, M: SimplexMap + ?Sized> IteratedMap<'a, M> {
    pub fn new(inner: &'a M, times: usize) -> Self {
        assert!(times >= 1, "iterate at least once");
        IteratedMap { inner, times }
    }
}

impl<M: SimplexMap + ?Sized> SimplexMap for IteratedMap<'_, M> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn apply_raw(&self, x: &[f64], out: &mut [f64]) {
        let mut a = x.to_vec();
        let mut b = vec![0.0; x.len()];
        for _ in 0..self.times {
            self.inner.apply_raw(&a, &mut b);
            core::mem::swap(&mut a, &mut b);
        }
        out.copy_from_slice(&a);
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Schedule {
    /// Steps 0, 1, 2, 4, 8, ... and the final step.
    Geometric,
    /// Every k-th step plus the final step.
    Stride(usize),
}

impl Schedule {
    fn hits(&self, i: usize, n: usize) -> bool {
        if i == 0 || i == n {
            return true;
        }
        match self {
            Schedule::Geometric => i.is_power_of_two(),
            Schedule::Stride(k) => i % k == 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct IterateConfig {
    pub schedule: Schedule,
    pub tail_window: usize,
}

impl Default for IterateConfig {
    fn default() -> Self {
        IterateConfig {
            schedule: Schedule::Geometric,
            tail_window: DEFAULT_TAIL_WINDOW,
        }
    }
}

/// One computed orbit: checkpointed states, running Cesaro means at the
/// same steps, and a dense window of the last points.
#[derive(Clone, Debug)]
pub struct Trajectory {
    m: usize,
    x0: SimplexPoint,
    n_steps: usize,
    checkpoints: Vec<(usize, SimplexPoint)>,
    cesaro_checkpoints: Vec<(usize, SimplexPoint)>,
    tail_data: Vec<f64>,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.m
    }
    pub fn x0(&self) -> &SimplexPoint {
        &self.x0
    }
    pub fn n_steps(&self) -> usize {
        self.n_steps
    }
    /// (step, state) pairs, steps strictly increasing, first 0, last n.
    pub fn checkpoints(&self) -> &[(usize, SimplexPoint)] {
        &self.checkpoints
    }
    /// (step, running mean over steps 0..=step) at the same schedule.
    pub fn cesaro_checkpoints(&self) -> &[(usize, SimplexPoint)] {
        &self.cesaro_checkpoints
    }
    pub fn tail_len(&self) -> usize {
        self.tail_data.len() / self.m
    }
    /// Step index of `tail_coords(0)`.
    pub fn tail_first_step(&self) -> usize {
        self.n_steps + 1 - self.tail_len()
    }
    /// i-th oldest retained point, exact stored bits.
    pub fn tail_coords(&self, i: usize) -> &[f64] {
        &self.tail_data[i * self.m..(i + 1) * self.m]
    }
    pub fn tail_point(&self, i: usize) -> SimplexPoint {
        SimplexPoint::from_trusted(self.tail_coords(i).to_vec())
    }
    pub fn final_point(&self) -> SimplexPoint {
        self.tail_point(self.tail_len() - 1)
    }
}

/// Runs `n` renormalized steps of `map` from `x0`, recording states and
/// running Cesaro means at the schedule and keeping the last
/// `config.tail_window` points.
pub fn iterate<M: SimplexMap + ?Sized>(
    map: &M,
    x0: &SimplexPoint,
    n: usize,
    config: &IterateConfig,
) -> Result<Trajectory, SimplexError> {
    let m = map.dim();
    if x0.dim() != m {
        return Err(SimplexError::DimensionMismatch {
            expected: m,
            got: x0.dim(),
        });
    }
    if let Schedule::Stride(k) = config.schedule {
        assert!(k >= 1, "stride must be positive");
    }
    assert!(config.tail_window >= 1, "tail window must keep at least one point");

    let cap = config.tail_window.min(n + 1);
    let mut tail_data: Vec<f64> = Vec::with_capacity(cap * m);
    let mut tail_head = 0usize;
    let push_tail = |tail_data: &mut Vec<f64>, tail_head: &mut usize, x: &[f64]| {
        if tail_data.len() < cap * m {
            tail_data.extend_from_slice(x);
        } else {
            tail_data[*tail_head * m..(*tail_head + 1) * m].copy_from_slice(x);
            *tail_head = (*tail_head + 1) % cap;
        }
    };

    let mut checkpoints = Vec::new();
    let mut cesaro = Vec::new();
    let mut cur = x0.coords().to_vec();
    let mut next = vec![0.0; m];
    let mut mean = cur.clone();

    checkpoints.push((0, x0.clone()));
    cesaro.push((0, x0.clone()));
    push_tail(&mut tail_data, &mut tail_head, &cur);

    for i in 1..=n {
        map.apply_raw(&cur, &mut next);
        renormalize_in_place(&mut next)?;
        core::mem::swap(&mut cur, &mut next);
        let w = (i + 1) as f64;
        for (mk, &ck) in mean.iter_mut().zip(cur.iter()) {
            *mk += (ck - *mk) / w;
        }
        push_tail(&mut tail_data, &mut tail_head, &cur);
        if config.schedule.hits(i, n) {
            checkpoints.push((i, SimplexPoint::from_trusted(cur.clone())));
            // Raw running mean: a convex combination of simplex points, kept
            // bit-exact rather than re-scaled.
            cesaro.push((i, SimplexPoint::from_trusted(mean.clone())));
        }
    }
    tail_data.rotate_left(tail_head * m);

    Ok(Trajectory {
        m,
        x0: x0.clone(),
        n_steps: n,
        checkpoints,
        cesaro_checkpoints: cesaro,
        tail_data,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stability {
    Attracting,
    Repelling,
    Saddle,
    Nonhyperbolic,
}

#[derive(Clone, Debug)]
pub struct FixedPoint {
    pub point: SimplexPoint,
    pub residual: f64,
    pub stability: Stability,
    /// Magnitudes of the tangent-space spectrum, descending.
    pub tangent_spectrum: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct FixedPointReport {
    pub points: Vec<FixedPoint>,
    pub converged_starts: usize,
    pub total_starts: usize,
}

#[derive(Clone, Debug)]
pub struct FixedPointConfig {
    /// Random starts beyond the deterministic seed set.
    pub n_starts: usize,
    pub seed: u64,
    pub max_iterations: usize,
    pub fd_step: f64,
    pub residual_tol: f64,
    pub dedup_tol: f64,
    pub hyperbolicity_band: f64,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        FixedPointConfig {
            n_starts: 32,
            seed: 17,
            max_iterations: 60,
            fd_step: FD_STEP,
            residual_tol: RESIDUAL_TOL,
            dedup_tol: DEDUP_TOL,
            hyperbolicity_band: HYPERBOLICITY_BAND,
        }
    }
}

/// The map with the last coordinate eliminated through the sum constraint.
struct Reduced<'a, M: ?Sized> {
    map: &'a M,
    m: usize,
    x: Vec<f64>,
    g: Vec<f64>,
}

impl<'a, M: SimplexMap + ?Sized> Reduced<'a, M> {
    fn new(map: &'a M) -> Self {
        let m = map.dim();
        Reduced {
            map,
            m,
            x: vec![0.0; m],
            g: vec![0.0; m],
        }
    }

    fn embed(&mut self, u: &[f64]) {
        let mut s = 0.0;
        for l in 0..self.m - 1 {
            self.x[l] = u[l];
            s += u[l];
        }
        self.x[self.m - 1] = 1.0 - s;
    }

    /// F(u) = V(x(u)) - x(u), first m-1 coordinates.
    fn residual(&mut self, u: &[f64], out: &mut [f64]) {
        self.embed(u);
        self.map.apply_raw(&self.x, &mut self.g);
        for l in 0..self.m - 1 {
            out[l] = self.g[l] - self.x[l];
        }
    }

    /// Reduced image map, for stability differentiation.
    fn image(&mut self, u: &[f64], out: &mut [f64]) {
        self.embed(u);
        self.map.apply_raw(&self.x, &mut self.g);
        out.copy_from_slice(&self.g[..self.m - 1]);
    }
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, &b| a.max(libm::fabs(b)))
}

fn embed_full(u: &[f64]) -> Vec<f64> {
    let mut s = 0.0;
    let mut x = Vec::with_capacity(u.len() + 1);
    for &v in u {
        x.push(v);
        s += v;
    }
    x.push(1.0 - s);
    x
}

/// Damped Newton on the reduced residual. Returns the converged reduced
/// coordinates or None.
fn newton_from<M: SimplexMap + ?Sized>(
    red: &mut Reduced<'_, M>,
    mut u: Vec<f64>,
    config: &FixedPointConfig,
) -> Option<Vec<f64>> {
    let r = red.m - 1;
    let mut f = vec![0.0; r];
    let mut f_try = vec![0.0; r];
    let mut jac = vec![0.0; r * r];
    let mut fp = vec![0.0; r];
    let mut fm = vec![0.0; r];
    red.residual(&u, &mut f);
    let mut fnorm = norm_inf(&f);
    for _ in 0..config.max_iterations {
        if fnorm <= NEWTON_TOL {
            return Some(u);
        }
        let h = config.fd_step;
        for c in 0..r {
            let saved = u[c];
            u[c] = saved + h;
            red.residual(&u, &mut fp);
            u[c] = saved - h;
            red.residual(&u, &mut fm);
            u[c] = saved;
            for row in 0..r {
                jac[row * r + c] = (fp[row] - fm[row]) / (2.0 * h);
            }
        }
        let rhs: Vec<f64> = f.iter().map(|v| -v).collect();
        let delta = linalg::solve(&jac, r, &rhs)?;
        let mut t = 1.0;
        loop {
            let u_try: Vec<f64> = u.iter().zip(&delta).map(|(a, d)| a + t * d).collect();
            red.residual(&u_try, &mut f_try);
            let norm_try = norm_inf(&f_try);
            if norm_try < fnorm {
                u = u_try;
                core::mem::swap(&mut f, &mut f_try);
                fnorm = norm_try;
                break;
            }
            t *= 0.5;
            if t < 1e-10 {
                return None;
            }
        }
    }
    if fnorm <= NEWTON_TOL {
        Some(u)
    } else {
        None
    }
}

fn stability_at<M: SimplexMap + ?Sized>(
    red: &mut Reduced<'_, M>,
    point: &SimplexPoint,
    config: &FixedPointConfig,
) -> (Stability, Vec<f64>) {
    let r = red.m - 1;
    if r == 0 {
        return (Stability::Attracting, Vec::new());
    }
    let u = &point.coords()[..r];
    let h = config.fd_step;
    let mut jac = vec![0.0; r * r];
    let mut up = u.to_vec();
    let mut gp = vec![0.0; r];
    let mut gm = vec![0.0; r];
    for c in 0..r {
        let saved = up[c];
        up[c] = saved + h;
        red.image(&up, &mut gp);
        up[c] = saved - h;
        red.image(&up, &mut gm);
        up[c] = saved;
        for row in 0..r {
            jac[row * r + c] = (gp[row] - gm[row]) / (2.0 * h);
        }
    }
    match linalg::eig_magnitudes(&jac, r) {
        None => (Stability::Nonhyperbolic, Vec::new()),
        Some(mut mags) => {
            mags.sort_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
            let band = config.hyperbolicity_band;
            let stability = if mags.iter().any(|&t| (1.0 - band..=1.0 + band).contains(&t)) {
                Stability::Nonhyperbolic
            } else if mags.iter().all(|&t| t < 1.0 - band) {
                Stability::Attracting
            } else if mags.iter().all(|&t| t > 1.0 + band) {
                Stability::Repelling
            } else {
                Stability::Saddle
            };
            (stability, mags)
        }
    }
}

fn newton_starts(m: usize, n_starts: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut starts = Vec::new();
    // Vertices: reduced coordinates of e_k.
    for k in 0..m {
        let mut u = vec![0.0; m - 1];
        if k < m - 1 {
            u[k] = 1.0;
        }
        starts.push(u);
    }
    starts.push(vec![1.0 / m as f64; m - 1]);
    // Proper-face barycenters, enumerable only for small m. The excluded
    // last coordinate comes back through the sum constraint.
    if (3..=8).contains(&m) {
        for mask in 1u32..(1 << m) {
            let cnt = mask.count_ones() as usize;
            if cnt < 2 || cnt > m - 1 {
                continue;
            }
            let w = 1.0 / cnt as f64;
            let mut u = vec![0.0; m - 1];
            for (k, slot) in u.iter_mut().enumerate() {
                if mask & (1 << k) != 0 {
                    *slot = w;
                }
            }
            starts.push(u);
        }
    }
    let mut rng = sample::rng(seed);
    for _ in 0..n_starts {
        let p = sample::random_simplex_point(&mut rng, m);
        starts.push(p.coords()[..m - 1].to_vec());
    }
    starts
}

/// Multi-start damped Newton search for the fixed points of `map`, with
/// stability read from the numerically differentiated reduced map.
pub fn find_fixed_points<M: SimplexMap + ?Sized>(
    map: &M,
    config: &FixedPointConfig,
) -> FixedPointReport {
    let m = map.dim();
    let mut red = Reduced::new(map);
    let starts = if m == 1 {
        vec![Vec::new()]
    } else {
        newton_starts(m, config.n_starts, config.seed)
    };
    let total_starts = starts.len();
    let mut points: Vec<FixedPoint> = Vec::new();
    let mut converged_starts = 0usize;

    for u0 in starts {
        let u = if m == 1 {
            Some(u0)
        } else {
            newton_from(&mut red, u0, config)
        };
        let Some(u) = u else { continue };
        let Ok(candidate) = SimplexPoint::new(embed_full(&u), Normalization::Renormalize) else {
            continue;
        };
        let Ok(image) = map.step(&candidate) else { continue };
        let residual = image.sup_distance(&candidate);
        if residual > config.residual_tol {
            continue;
        }
        converged_starts += 1;
        if points
            .iter()
            .any(|p| p.point.sup_distance(&candidate) <= config.dedup_tol)
        {
            continue;
        }
        let (stability, tangent_spectrum) = stability_at(&mut red, &candidate, config);
        points.push(FixedPoint {
            point: candidate,
            residual,
            stability,
            tangent_spectrum,
        });
    }
    FixedPointReport {
        points,
        converged_starts,
        total_starts,
    }
}

#[derive(Clone, Debug)]
pub struct Cycle {
    pub period: usize,
    /// Orbit order: points[i+1] = V(points[i]).
    pub points: Vec<SimplexPoint>,
}

fn rotations_match(a: &[SimplexPoint], b: &[SimplexPoint], tol: f64) -> bool {
    let k = a.len();
    if b.len() != k {
        return false;
    }
    (0..k).any(|r| (0..k).all(|i| a[i].sup_distance(&b[(i + r) % k]) <= tol))
}

/// Finds cycles of minimal period 2..=max_period as fixed points of the
/// iterated map, dropping anything fixed by a proper-divisor power and
/// deduplicating orbits up to rotation.
pub fn detect_cycles<M: SimplexMap + ?Sized>(
    map: &M,
    max_period: usize,
    config: &FixedPointConfig,
) -> Vec<Cycle> {
    assert!((2..=12).contains(&max_period), "period out of supported range");
    let mut cycles: Vec<Cycle> = Vec::new();
    for k in 2..=max_period {
        let iterated = IteratedMap::new(map, k);
        let report = find_fixed_points(&iterated, config);
        'candidate: for fp in report.points {
            for d in 1..k {
                if k % d != 0 {
                    continue;
                }
                let mut y = fp.point.clone();
                for _ in 0..d {
                    let Ok(z) = map.step(&y) else { continue 'candidate };
                    y = z;
                }
                if y.sup_distance(&fp.point) <= config.residual_tol {
                    continue 'candidate;
                }
            }
            let mut orbit = vec![fp.point.clone()];
            for _ in 1..k {
                let Ok(z) = map.step(orbit.last().unwrap()) else { continue 'candidate };
                orbit.push(z);
            }
            // Every orbit point must close up under k steps.
            for p in &orbit {
                let mut y = p.clone();
                for _ in 0..k {
                    let Ok(z) = map.step(&y) else { continue 'candidate };
                    y = z;
                }
                if y.sup_distance(p) > config.residual_tol {
                    continue 'candidate;
                }
            }
            if cycles
                .iter()
                .any(|c| c.period == k && rotations_match(&c.points, &orbit, config.dedup_tol))
            {
                continue 'candidate;
            }
            cycles.push(Cycle { period: k, points: orbit });
        }
    }
    cycles
}

/// Cycles of the partial map e_k -> e_j defined where the image of vertex
/// k is itself a vertex within `tol`. Each cycle starts at its smallest
/// member; cycles are sorted by that member.
pub fn vertex_cycles(p: &HeredityTensor, tol: f64) -> Vec<Vec<usize>> {
    let m = p.m();
    let mut next: Vec<Option<usize>> = vec![None; m];
    'vertex: for k in 0..m {
        let mut hit = None;
        for j in 0..m {
            let v = p.get(k, k, j);
            if libm::fabs(v - 1.0) <= tol {
                if hit.is_some() {
                    continue 'vertex;
                }
                hit = Some(j);
            } else if libm::fabs(v) > tol {
                continue 'vertex;
            }
        }
        next[k] = hit;
    }

    let mut state = vec![0u8; m]; // 0 new, 1 on current path, 2 done
    let mut cycles = Vec::new();
    for s in 0..m {
        if state[s] != 0 {
            continue;
        }
        let mut path = Vec::new();
        let mut cur = s;
        loop {
            state[cur] = 1;
            path.push(cur);
            match next[cur] {
                Some(nx) if state[nx] == 0 => cur = nx,
                Some(nx) if state[nx] == 1 => {
                    let start = path.iter().position(|&v| v == nx).unwrap();
                    let mut cyc = path[start..].to_vec();
                    let min_pos = cyc
                        .iter()
                        .enumerate()
                        .min_by_key(|&(_, &v)| v)
                        .map(|(i, _)| i)
                        .unwrap();
                    cyc.rotate_left(min_pos);
                    cycles.push(cyc);
                    break;
                }
                _ => break,
            }
        }
        for &v in &path {
            state[v] = 2;
        }
    }
    cycles.sort();
    cycles
}

#[derive(Clone, Debug)]
pub struct OmegaEstimate {
    /// One representative (member mean) per cluster, in order of first
    /// appearance along the tail.
    pub clusters: Vec<SimplexPoint>,
    pub cluster_sizes: Vec<usize>,
    /// Smallest coordinate seen anywhere in the full tail.
    pub boundary_proximity: f64,
    /// True iff a single cluster of diameter below the tolerance remains.
    pub converged: bool,
}

/// Single-linkage clustering of the trajectory tail at `cluster_tol`.
/// Tails longer than [`OMEGA_SUBSAMPLE_CAP`] are subsampled evenly with
/// both endpoints retained; boundary proximity still scans every point.
pub fn omega_limit_estimate(traj: &Trajectory, cluster_tol: f64) -> OmegaEstimate {
    let len = traj.tail_len();
    assert!(len >= 1, "tail window is never empty");
    let m = traj.dim();

    let mut boundary_proximity = f64::INFINITY;
    for i in 0..len {
        for &v in traj.tail_coords(i) {
            boundary_proximity = boundary_proximity.min(v);
        }
    }

    let idx: Vec<usize> = if len <= OMEGA_SUBSAMPLE_CAP {
        (0..len).collect()
    } else {
        let k = OMEGA_SUBSAMPLE_CAP;
        (0..k)
            .map(|i| {
                let t = i as f64 * (len - 1) as f64 / (k - 1) as f64;
                libm::round(t) as usize
            })
            .collect()
    };
    let n = idx.len();

    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut a: usize) -> usize {
        while parent[a] != a {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        a
    }
    let sup = |a: &[f64], b: &[f64]| -> f64 {
        a.iter()
            .zip(b)
            .fold(0.0f64, |acc, (x, y)| acc.max(libm::fabs(x - y)))
    };
    for i in 0..n {
        for j in i + 1..n {
            if sup(traj.tail_coords(idx[i]), traj.tail_coords(idx[j])) <= cluster_tol {
                let (ra, rb) = (find(&mut parent, i), find(&mut parent, j));
                if ra != rb {
                    parent[rb] = ra;
                }
            }
        }
    }

    let mut root_order: Vec<usize> = Vec::new();
    let mut sums: Vec<Vec<f64>> = Vec::new();
    let mut sizes: Vec<usize> = Vec::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        let slot = match root_order.iter().position(|&q| q == r) {
            Some(s) => s,
            None => {
                root_order.push(r);
                sums.push(vec![0.0; m]);
                sizes.push(0);
                members.push(Vec::new());
                root_order.len() - 1
            }
        };
        for (acc, &v) in sums[slot].iter_mut().zip(traj.tail_coords(idx[i])) {
            *acc += v;
        }
        sizes[slot] += 1;
        members[slot].push(idx[i]);
    }
    let clusters: Vec<SimplexPoint> = sums
        .iter()
        .zip(&sizes)
        .map(|(s, &c)| {
            let mean: Vec<f64> = s.iter().map(|v| v / c as f64).collect();
            SimplexPoint::new(mean, Normalization::Renormalize)
                .expect("means of simplex points stay on the simplex")
        })
        .collect();

    let converged = clusters.len() == 1 && {
        let ms = &members[0];
        let mut diameter = 0.0f64;
        for i in 0..ms.len() {
            for j in i + 1..ms.len() {
                diameter = diameter.max(sup(traj.tail_coords(ms[i]), traj.tail_coords(ms[j])));
            }
        }
        diameter < cluster_tol
    };

    OmegaEstimate {
        clusters,
        cluster_sizes: sizes,
        boundary_proximity,
        converged,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CesaroVerdict {
    Converging,
    Oscillating,
    Inconclusive,
}

#[derive(Clone, Debug)]
pub struct CesaroDiagnostic {
    /// Max-minus-min of each mean coordinate over the window.
    pub oscillation: Vec<f64>,
    pub oscillation_sup: f64,
    pub verdict: CesaroVerdict,
}

#[derive(Clone, Debug, PartialEq)]
pub enum DynamicsError {
    Simplex(SimplexError),
    TooFewCheckpoints { got: usize, need: usize },
    EmptyFixedPointSet,
    BallRadiusNotPositive { radius: f64 },
    OverlappingBalls { min_distance: f64, radius: f64 },
}

impl fmt::Display for DynamicsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DynamicsError::Simplex(e) => write!(f, "{e}"),
            DynamicsError::TooFewCheckpoints { got, need } => {
                write!(f, "window holds {got} checkpoints, need {need}")
            }
            DynamicsError::EmptyFixedPointSet => write!(f, "no fixed points to label with"),
            DynamicsError::BallRadiusNotPositive { radius } => {
                write!(f, "ball radius {radius} must be positive")
            }
            DynamicsError::OverlappingBalls { min_distance, radius } => {
                write!(
                    f,
                    "balls of radius {radius} overlap: fixed points only {min_distance} apart"
                )
            }
        }
    }
}

impl core::error::Error for DynamicsError {}

impl From<SimplexError> for DynamicsError {
    fn from(e: SimplexError) -> Self {
        DynamicsError::Simplex(e)
    }
}

fn verdict_of(oscillation_sup: f64) -> CesaroVerdict {
    if oscillation_sup < CESARO_CONVERGING_TOL {
        CesaroVerdict::Converging
    } else if oscillation_sup > CESARO_OSCILLATING_TOL {
        CesaroVerdict::Oscillating
    } else {
        CesaroVerdict::Inconclusive
    }
}

/// Oscillation of the running means over the last half of the checkpoint
/// list. Needs at least 4 checkpoints in that window.
pub fn cesaro_diagnostic(traj: &Trajectory) -> Result<CesaroDiagnostic, DynamicsError> {
    let cps = traj.cesaro_checkpoints();
    let window = &cps[cps.len() / 2..];
    if window.len() < 4 {
        return Err(DynamicsError::TooFewCheckpoints {
            got: window.len(),
            need: 4,
        });
    }
    let m = traj.dim();
    let mut oscillation = vec![0.0f64; m];
    for k in 0..m {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (_, p) in window {
            lo = lo.min(p.coords()[k]);
            hi = hi.max(p.coords()[k]);
        }
        oscillation[k] = hi - lo;
    }
    let oscillation_sup = oscillation.iter().fold(0.0f64, |a, &b| a.max(b));
    Ok(CesaroDiagnostic {
        oscillation,
        oscillation_sup,
        verdict: verdict_of(oscillation_sup),
    })
}

#[derive(Clone, Debug)]
pub struct HistoricReport {
    /// (step, running mean of f over steps 0..=step).
    pub means: Vec<(usize, f64)>,
    pub oscillation: f64,
    pub verdict: CesaroVerdict,
}

/// Running means of a scalar observable along the orbit, with the same
/// windowed oscillation statistic as [`cesaro_diagnostic`]. For a
/// coordinate projection this reproduces that diagnostic exactly.
pub fn historic_behavior<M, F>(
    map: &M,
    x0: &SimplexPoint,
    f: F,
    n: usize,
    schedule: &Schedule,
) -> Result<HistoricReport, DynamicsError>
where
    M: SimplexMap + ?Sized,
    F: Fn(&[f64]) -> f64,
{
    let m = map.dim();
    if x0.dim() != m {
        return Err(SimplexError::DimensionMismatch {
            expected: m,
            got: x0.dim(),
        }
        .into());
    }
    let mut cur = x0.coords().to_vec();
    let mut next = vec![0.0; m];
    let mut mean = f(&cur);
    let mut means = vec![(0usize, mean)];
    for i in 1..=n {
        map.apply_raw(&cur, &mut next);
        renormalize_in_place(&mut next).map_err(DynamicsError::Simplex)?;
        core::mem::swap(&mut cur, &mut next);
        mean += (f(&cur) - mean) / (i + 1) as f64;
        if schedule.hits(i, n) {
            means.push((i, mean));
        }
    }
    let window = &means[means.len() / 2..];
    if window.len() < 4 {
        return Err(DynamicsError::TooFewCheckpoints {
            got: window.len(),
            need: 4,
        });
    }
    let lo = window.iter().fold(f64::INFINITY, |a, &(_, v)| a.min(v));
    let hi = window.iter().fold(f64::NEG_INFINITY, |a, &(_, v)| a.max(v));
    let oscillation = hi - lo;
    Ok(HistoricReport {
        means,
        oscillation,
        verdict: verdict_of(oscillation),
    })
}

#[derive(Clone, Debug)]
pub struct ItineraryReport {
    /// Indices into the fixed-point report, consecutive repeats merged.
    pub labels: Vec<usize>,
    /// Fraction of steps 1..=n spent inside some ball.
    pub occupancy_fraction: f64,
    pub radius: f64,
}

/// Replays the orbit and labels visits to disjoint balls around the
/// reported fixed points. Balls must be separated: the minimal pairwise
/// fixed-point distance has to exceed twice the radius.
pub fn itinerary<M: SimplexMap + ?Sized>(
    map: &M,
    traj: &Trajectory,
    fixed_points: &FixedPointReport,
    radius: f64,
) -> Result<ItineraryReport, DynamicsError> {
    if fixed_points.points.is_empty() {
        return Err(DynamicsError::EmptyFixedPointSet);
    }
    if !(radius > 0.0) {
        return Err(DynamicsError::BallRadiusNotPositive { radius });
    }
    let pts = &fixed_points.points;
    let mut min_distance = f64::INFINITY;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            min_distance = min_distance.min(pts[i].point.sup_distance(&pts[j].point));
        }
    }
    if min_distance <= 2.0 * radius {
        return Err(DynamicsError::OverlappingBalls {
            min_distance,
            radius,
        });
    }
    let n = traj.n_steps();
    assert!(n >= 1, "itinerary needs at least one step");

    let label_of = |x: &SimplexPoint| -> Option<usize> {
        pts.iter()
            .position(|p| p.point.sup_distance(x) <= radius)
    };
    let mut labels = Vec::new();
    let push = |labels: &mut Vec<usize>, l: usize| {
        if labels.last() != Some(&l) {
            labels.push(l);
        }
    };
    let mut cur = traj.x0().clone();
    if let Some(l) = label_of(&cur) {
        push(&mut labels, l);
    }
    let mut inside = 0usize;
    for _ in 1..=n {
        cur = map.step(&cur)?;
        if let Some(l) = label_of(&cur) {
            inside += 1;
            push(&mut labels, l);
        }
    }
    Ok(ItineraryReport {
        labels,
        occupancy_fraction: inside as f64 / n as f64,
        radius,
    })
}

#[derive(Clone, Copy, Debug)]
pub struct RateFit {
    /// Estimated per-step contraction factor exp(slope of ln d vs step).
    pub rate: f64,
    pub r_squared: f64,
}

/// Fits ln distance-to-target against step over the last decade of
/// checkpoints, skipping distances saturated at round-off.
pub fn convergence_rate(traj: &Trajectory, target: &SimplexPoint) -> RateFit {
    let usable: Vec<(f64, f64)> = traj
        .checkpoints()
        .iter()
        .filter_map(|(s, p)| {
            let d = p.sup_distance(target);
            if d > SATURATION_TOL {
                Some((*s as f64, libm::log(d)))
            } else {
                None
            }
        })
        .collect();
    if usable.is_empty() {
        // Already at the target everywhere.
        return RateFit {
            rate: 0.0,
            r_squared: 1.0,
        };
    }
    let s_max = usable.last().unwrap().0;
    let window: Vec<(f64, f64)> = usable
        .iter()
        .copied()
        .filter(|&(s, _)| s > s_max / 10.0)
        .collect();
    let pts = if window.len() >= 2 { window } else { usable };
    if pts.len() < 2 {
        return RateFit {
            rate: 1.0,
            r_squared: 1.0,
        };
    }
    let n = pts.len() as f64;
    let x_bar = pts.iter().map(|&(x, _)| x).sum::<f64>() / n;
    let y_bar = pts.iter().map(|&(_, y)| y).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|&(x, _)| (x - x_bar) * (x - x_bar)).sum();
    let sxy: f64 = pts.iter().map(|&(x, y)| (x - x_bar) * (y - y_bar)).sum();
    let slope = sxy / sxx;
    let ss_tot: f64 = pts.iter().map(|&(_, y)| (y - y_bar) * (y - y_bar)).sum();
    let ss_res: f64 = pts
        .iter()
        .map(|&(x, y)| {
            let fit = y_bar + slope * (x - x_bar);
            (y - fit) * (y - fit)
        })
        .sum();
    let r_squared = if ss_tot <= 1e-30 {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    };
    RateFit {
        rate: libm::exp(slope),
        r_squared,
    }
}
