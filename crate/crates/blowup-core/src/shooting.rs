//! Two-parameter shooting for trapped trajectories and the stability
//! perturbation experiment.
//!
//! Both searches refine a rectangle in a parameter plane using the rescaled
//! exit map `w = (s*²/A)(θ₀(s*), θ₁(s*))`. A 5×5 lattice of shots covers the
//! current rectangle; its 16 boundary shots give the winding number at the
//! top level and each of the nine half-size children is tested with its own
//! 8-shot ring. Even data stay even under the flow, so on the line `y = 0`
//! the search reduces to bisection in the first coordinate.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::dynamics::{ClauseId, Engine, Sample, Snapshots, SolverConfig, Termination, Trajectory};
use crate::profile::{exponents, initial_shapes, intermediate_profile};
use crate::real::{Dd, Real};
use crate::spectral::Params;
use crate::{Error, Result};

/// Search settings shared by `find_trapped` and `stability_scan`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShootConfig {
    /// Length of the trapping window; the run ends at `s0 + horizon`.
    pub horizon: f64,
    /// Maximum number of refinement levels.
    pub levels: usize,
    /// Boundary shots per lattice (fixed at 16).
    pub boundary_samples: usize,
    /// Width of the first coordinate below which shots use double-double.
    pub dd_width: f64,
    /// Extra time past the horizon that `find_trapped` shots must also stay
    /// trapped for. The certificate still ends at `s0 + horizon`.
    pub probe: f64,
}

impl Default for ShootConfig {
    fn default() -> Self {
        ShootConfig {
            horizon: 40.0,
            levels: 90,
            boundary_samples: 16,
            dd_width: 1e-9,
            probe: 10.0,
        }
    }
}

impl ShootConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::Config(format!("horizon = {} must be positive", self.horizon)));
        }
        if self.levels == 0 {
            return Err(Error::Config("levels must be positive".into()));
        }
        if self.boundary_samples != 16 {
            return Err(Error::Config(format!(
                "boundary_samples = {} (only 16 is supported)",
                self.boundary_samples
            )));
        }
        if !(self.dd_width >= 0.0) {
            return Err(Error::Config(format!("dd_width = {} must be nonnegative", self.dd_width)));
        }
        if !(self.probe >= 0.0 && self.probe.is_finite()) {
            return Err(Error::Config(format!("probe = {} must be finite and nonnegative", self.probe)));
        }
        Ok(())
    }
}

/// Arithmetic used for one shot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Precision {
    Double,
    DoubleDouble,
}

/// Outcome of one trajectory launched from a parameter point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShotResult {
    pub d0: f64,
    pub d1: f64,
    /// Low parts of the double-double coordinates.
    pub d0_lo: f64,
    pub d1_lo: f64,
    pub start_s: f64,
    pub exit_s: f64,
    pub horizon: f64,
    /// Reached the horizon inside the shrinking set.
    pub captured: bool,
    pub exit_clause: Option<ClauseId>,
    /// Exit through a clause other than `θ₀`, `θ₁`, or a solver abort.
    pub anomaly: bool,
    pub end_theta: (f64, f64),
    /// `(s²/A)(θ₀, θ₁)` at exit or horizon.
    pub rescaled: (f64, f64),
    /// `ω·θ_n′ > 0` for the saturated clause.
    pub transverse: Option<bool>,
    pub precision: Precision,
}

impl ShotResult {
    fn point(&self) -> (Dd, Dd) {
        (Dd::new(self.d0, self.d0_lo), Dd::new(self.d1, self.d1_lo))
    }

    fn exits_theta1(&self) -> bool {
        self.exit_clause == Some(ClauseId::Theta(1))
    }
}

/// Runs `(Φ, Ψ)` from `s_start` until the first exit from the shrinking set
/// or the engine horizon.
pub fn shoot_state<T: Real>(
    engine: &mut Engine,
    phi: Vec<T>,
    psi: Vec<T>,
    s_start: f64,
    point: (Dd, Dd),
) -> Result<ShotResult> {
    let mut prev: Option<(f64, f64, f64)> = None;
    let mut last: Option<(f64, f64, f64)> = None;
    let traj = engine.run(phi, psi, s_start, Snapshots::None, |smp: &Sample| {
        prev = last;
        last = Some((smp.s, smp.modes.theta[0], smp.modes.theta[1]));
        smp.report.in_set
    })?;
    let precision = if core::any::TypeId::of::<T>() == core::any::TypeId::of::<Dd>() {
        Precision::DoubleDouble
    } else {
        Precision::Double
    };
    Ok(summarize(&traj, point, s_start, engine.config.a, prev, precision))
}

fn summarize(
    traj: &Trajectory,
    point: (Dd, Dd),
    start_s: f64,
    a: f64,
    prev: Option<(f64, f64, f64)>,
    precision: Precision,
) -> ShotResult {
    let horizon = traj.config.s_end;
    let lastsmp = traj.samples.last();
    let (exit_s, theta, clause) = match lastsmp {
        Some(smp) => (
            smp.s,
            (smp.modes.theta[0], smp.modes.theta[1]),
            smp.report.first_violated,
        ),
        None => (start_s, (0.0, 0.0), None),
    };
    let nonfinite = matches!(traj.termination, Termination::NonFinite { .. });
    let captured = !nonfinite && clause.is_none() && lastsmp.is_some();
    let anomaly = nonfinite
        || !matches!(clause, None | Some(ClauseId::Theta(0)) | Some(ClauseId::Theta(1)));
    let transverse = match (clause, prev) {
        (Some(ClauseId::Theta(n)), Some((s_prev, t0, t1))) if n <= 1 => {
            let (now, before) = if n == 0 { (theta.0, t0) } else { (theta.1, t1) };
            let slope = (now - before) / (exit_s - s_prev);
            Some(libm::copysign(1.0, now) * slope > 0.0)
        }
        _ => None,
    };
    let w = exit_s * exit_s / a;
    ShotResult {
        d0: point.0.hi,
        d1: point.1.hi,
        d0_lo: point.0.lo,
        d1_lo: point.1.lo,
        start_s,
        exit_s,
        horizon,
        captured,
        exit_clause: clause,
        anomaly,
        end_theta: theta,
        rescaled: (w * theta.0, w * theta.1),
        transverse,
        precision,
    }
}

/// `(Φ, Ψ) = (φ, ψ) + d₀(f₀, g₀) + d₁(f₁, g₁)` at `s0`, in precision `T`.
pub fn trapped_initial_state<T: Real>(engine: &Engine, d0: Dd, d1: Dd) -> (Vec<T>, Vec<T>) {
    let cfg = &engine.config;
    let (c, p) = (engine.constants, engine.params);
    let (d0, d1) = (T::from_dd(d0), T::from_dd(d1));
    let mut u = Vec::with_capacity(engine.grid.n);
    let mut v = Vec::with_capacity(engine.grid.n);
    for y in engine.grid.nodes() {
        let (ph, ps) = intermediate_profile(y, cfg.s0, &c, &p);
        let [(f0, g0), (f1, g1)] = initial_shapes(y, cfg.s0, cfg.a, cfg.k, &c, &p);
        u.push(T::from_f64(ph) + d0 * T::from_f64(f0) + d1 * T::from_f64(f1));
        v.push(T::from_f64(ps) + d0 * T::from_f64(g0) + d1 * T::from_f64(g1));
    }
    (u, v)
}

/// Exit data for the initial datum with parameters `(d₀, d₁)`.
pub fn flow_map(engine: &mut Engine, d0: Dd, d1: Dd, precision: Precision) -> Result<ShotResult> {
    let s0 = engine.config.s0;
    match precision {
        Precision::Double => {
            let (u, v) = trapped_initial_state::<f64>(engine, d0, d1);
            shoot_state(engine, u, v, s0, (d0, d1))
        }
        Precision::DoubleDouble => {
            let (u, v) = trapped_initial_state::<Dd>(engine, d0, d1);
            shoot_state(engine, u, v, s0, (d0, d1))
        }
    }
}

/// Search phase of one refinement level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Phase {
    Lattice,
    Bisection,
}

/// One refinement level of a search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelRecord {
    pub level: usize,
    pub phase: Phase,
    /// `[x0, x1, y0, y1]` of the retained cell.
    pub rect: [f64; 4],
    pub width: (f64, f64),
    pub winding: Option<i32>,
    pub shots: usize,
    /// Earliest exit among the shots on the retained cell boundary.
    pub depth: f64,
    pub precision: Precision,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchOutcome {
    pub captured: bool,
    /// Captured shot, or the deepest one seen.
    pub best: ShotResult,
    pub levels: Vec<LevelRecord>,
    pub shots: usize,
    pub stop_reason: String,
}

#[derive(Clone, Copy)]
struct Rect {
    x0: Dd,
    x1: Dd,
    y0: Dd,
    y1: Dd,
}

impl Rect {
    fn at(&self, i: usize, j: usize) -> (Dd, Dd) {
        let fx = i as f64 / 4.0;
        let fy = j as f64 / 4.0;
        let x = if i == 4 { self.x1 } else { self.x0 + (self.x1 - self.x0).scale(fx) };
        let y = if j == 4 { self.y1 } else { self.y0 + (self.y1 - self.y0).scale(fy) };
        (x, y)
    }

    fn width(&self) -> (f64, f64) {
        ((self.x1 - self.x0).to_f64(), (self.y1 - self.y0).to_f64())
    }

    fn as_array(&self) -> [f64; 4] {
        [self.x0.to_f64(), self.x1.to_f64(), self.y0.to_f64(), self.y1.to_f64()]
    }
}

/// Winding number of a closed polygon of planar vectors around the origin.
pub fn winding_number(ring: &[(f64, f64)]) -> i32 {
    let n = ring.len();
    if n < 3 {
        return 0;
    }
    let pi = core::f64::consts::PI;
    let mut total = 0.0;
    for k in 0..n {
        let (ax, ay) = ring[k];
        let (bx, by) = ring[(k + 1) % n];
        let mut d = libm::atan2(by, bx) - libm::atan2(ay, ax);
        while d > pi {
            d -= 2.0 * pi;
        }
        while d <= -pi {
            d += 2.0 * pi;
        }
        total += d;
    }
    libm::round(total / (2.0 * pi)) as i32
}

/// Counter-clockwise ring of a `(size+1)²` sub-lattice starting at `(i0, j0)`.
fn ring_indices(i0: usize, j0: usize, size: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(4 * size);
    for i in 0..size {
        out.push((i0 + i, j0));
    }
    for j in 0..size {
        out.push((i0 + size, j0 + j));
    }
    for i in 0..size {
        out.push((i0 + size - i, j0 + size));
    }
    for j in 0..size {
        out.push((i0, j0 + size - j));
    }
    out
}

const CHILD_ORDER: [(usize, usize); 9] = [
    (1, 1),
    (0, 1),
    (2, 1),
    (1, 0),
    (1, 2),
    (0, 0),
    (2, 0),
    (0, 2),
    (2, 2),
];

struct Search<'a, F> {
    shot: F,
    cfg: &'a ShootConfig,
    count: usize,
    best: Option<ShotResult>,
}

impl<'a, F> Search<'a, F>
where
    F: FnMut(Dd, Dd, Precision) -> Result<ShotResult>,
{
    fn fire(&mut self, x: Dd, y: Dd, width: f64) -> Result<ShotResult> {
        let prec = if width < self.cfg.dd_width {
            Precision::DoubleDouble
        } else {
            Precision::Double
        };
        let r = (self.shot)(x, y, prec)?;
        self.count += 1;
        let better = match &self.best {
            None => true,
            Some(b) => (r.captured && !b.captured) || (r.captured == b.captured && r.exit_s > b.exit_s),
        };
        if better {
            self.best = Some(r.clone());
        }
        Ok(r)
    }

    fn fill(&mut self, rect: &Rect, lat: &mut [[Option<ShotResult>; 5]; 5]) -> Result<Option<ShotResult>> {
        let wx = rect.width().0;
        // Centre first so that a captured centre ends the level early.
        let mut order: Vec<(usize, usize)> = Vec::with_capacity(25);
        order.push((2, 2));
        for i in 0..5 {
            for j in 0..5 {
                if (i, j) != (2, 2) {
                    order.push((i, j));
                }
            }
        }
        for (i, j) in order {
            if lat[i][j].is_none() {
                let (x, y) = rect.at(i, j);
                lat[i][j] = Some(self.fire(x, y, wx)?);
            }
            if let Some(r) = &lat[i][j] {
                if r.captured {
                    return Ok(Some(r.clone()));
                }
            }
        }
        Ok(None)
    }

    fn finish(self, captured: Option<ShotResult>, levels: Vec<LevelRecord>, reason: &str) -> Result<SearchOutcome> {
        let best = match captured.or(self.best) {
            Some(b) => b,
            None => return Err(Error::NoCapture("no shots were evaluated".into())),
        };
        Ok(SearchOutcome {
            captured: best.captured,
            best,
            levels,
            shots: self.count,
            stop_reason: reason.into(),
        })
    }
}

fn vectors(lat: &[[Option<ShotResult>; 5]; 5], idx: &[(usize, usize)]) -> Vec<(f64, f64)> {
    idx.iter()
        .map(|&(i, j)| lat[i][j].as_ref().map_or((0.0, 0.0), |r| r.rescaled))
        .collect()
}

fn min_exit(lat: &[[Option<ShotResult>; 5]; 5], idx: &[(usize, usize)]) -> f64 {
    idx.iter()
        .filter_map(|&(i, j)| lat[i][j].as_ref().map(|r| r.exit_s))
        .fold(f64::INFINITY, f64::min)
}

/// Sign data for bisection along the parity line.
struct Bracket {
    left_sign: f64,
    left_exit: f64,
    right_exit: f64,
}

impl Bracket {
    fn from_lattice(lat: &[[Option<ShotResult>; 5]; 5]) -> Option<Bracket> {
        let l = lat[0][2].as_ref()?;
        let r = lat[4][2].as_ref()?;
        if l.end_theta.0.signum() == r.end_theta.0.signum() {
            return None;
        }
        Some(Bracket {
            left_sign: l.end_theta.0.signum(),
            left_exit: l.exit_s,
            right_exit: r.exit_s,
        })
    }
}

/// Nested-rectangle search for a parameter point whose shot reaches the
/// horizon. `shot(x, y, precision)` evaluates one trajectory. With `parity`
/// the second exit coordinate vanishes identically on `y = 0`, and once the
/// retained cell is centred there the search bisects along that line.
pub fn refine<F>(shot: F, rect: [Dd; 4], cfg: &ShootConfig, parity: bool) -> Result<SearchOutcome>
where
    F: FnMut(Dd, Dd, Precision) -> Result<ShotResult>,
{
    cfg.validate()?;
    let mut rect = Rect {
        x0: rect[0],
        x1: rect[1],
        y0: rect[2],
        y1: rect[3],
    };
    let mut search = Search {
        shot,
        cfg,
        count: 0,
        best: None,
    };
    let mut levels = Vec::new();
    let mut lat: [[Option<ShotResult>; 5]; 5] = Default::default();
    if let Some(c) = search.fill(&rect, &mut lat)? {
        return search.finish(Some(c), levels, "captured");
    }
    let outer = ring_indices(0, 0, 4);
    let top = winding_number(&vectors(&lat, &outer));
    levels.push(LevelRecord {
        level: 0,
        phase: Phase::Lattice,
        rect: rect.as_array(),
        width: rect.width(),
        winding: Some(top),
        shots: search.count,
        depth: min_exit(&lat, &outer),
        precision: Precision::Double,
    });
    if top == 0 {
        return Err(Error::NoCapture(format!(
            "winding number 0 on the boundary of [{:.3e}, {:.3e}] x [{:.3e}, {:.3e}]",
            rect.x0.to_f64(),
            rect.x1.to_f64(),
            rect.y0.to_f64(),
            rect.y1.to_f64()
        )));
    }
    let mut bracket: Option<Bracket> = None;
    for level in 1..cfg.levels {
        let before = search.count;
        let Some(br) = bracket.as_mut() else {
            if let Some(c) = search.fill(&rect, &mut lat)? {
                return search.finish(Some(c), levels, "captured");
            }
            let mut chosen = None;
            for &(ci, cj) in CHILD_ORDER.iter() {
                let ring = ring_indices(ci, cj, 2);
                let w = winding_number(&vectors(&lat, &ring));
                if w != 0 {
                    chosen = Some((ci, cj, w, ring));
                    break;
                }
            }
            let Some((ci, cj, w, ring)) = chosen else {
                return search.finish(None, levels, "no child cell with nonzero winding");
            };
            let depth = min_exit(&lat, &ring);
            let (nx0, ny0) = rect.at(ci, cj);
            let (nx1, ny1) = rect.at(ci + 2, cj + 2);
            let mut next: [[Option<ShotResult>; 5]; 5] = Default::default();
            for a in 0..3 {
                for b in 0..3 {
                    next[2 * a][2 * b] = lat[ci + a][cj + b].take();
                }
            }
            rect = Rect {
                x0: nx0,
                x1: nx1,
                y0: ny0,
                y1: ny1,
            };
            lat = next;
            if let Some(c) = search.fill(&rect, &mut lat)? {
                return search.finish(Some(c), levels, "captured");
            }
            levels.push(LevelRecord {
                level,
                phase: Phase::Lattice,
                rect: rect.as_array(),
                width: rect.width(),
                winding: Some(w),
                shots: search.count - before,
                depth,
                precision: lat[2][2].as_ref().map_or(Precision::Double, |r| r.precision),
            });
            let (_, yc) = rect.at(2, 2);
            if parity && yc == Dd::from_f64(0.0) {
                bracket = Bracket::from_lattice(&lat);
                if bracket.is_some() {
                    rect.y0 = yc;
                    rect.y1 = yc;
                }
            }
            continue;
        };
        let xm = Dd::midpoint(rect.x0, rect.x1);
        if xm == rect.x0 || xm == rect.x1 {
            return search.finish(None, levels, "bracket at working precision");
        }
        let m = search.fire(xm, rect.y0, rect.width().0)?;
        if m.captured {
            return search.finish(Some(m), levels, "captured");
        }
        if m.exits_theta1() {
            return search.finish(None, levels, "theta_1 exit on the parity line");
        }
        if m.end_theta.0.signum() == br.left_sign {
            rect.x0 = xm;
            br.left_exit = m.exit_s;
        } else {
            rect.x1 = xm;
            br.right_exit = m.exit_s;
        }
        levels.push(LevelRecord {
            level,
            phase: Phase::Bisection,
            rect: rect.as_array(),
            width: rect.width(),
            winding: None,
            shots: 1,
            depth: br.left_exit.min(br.right_exit),
            precision: m.precision,
        });
    }
    search.finish(None, levels, "level limit reached")
}

/// Trapped parameters with the certificate trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrappedResult {
    pub d0: Dd,
    pub d1: Dd,
    pub search: SearchOutcome,
    pub certificate: Trajectory,
}

/// Solver settings with the end time set to `s0 + horizon`.
pub fn with_horizon(solver: &SolverConfig, horizon: f64) -> SolverConfig {
    let mut cfg = solver.clone();
    cfg.s_end = cfg.s0 + horizon;
    cfg
}

/// Searches `[−2, 2]²` for `(d₀, d₁)` trapped in the shrinking set up to
/// `s0 + horizon + probe`, and reruns the result to `s0 + horizon` keeping
/// every sample.
pub fn find_trapped(solver: &SolverConfig, shoot: &ShootConfig, params: &Params) -> Result<TrappedResult> {
    shoot.validate()?;
    let cfg = with_horizon(solver, shoot.horizon + shoot.probe);
    let mut engine = Engine::new(&cfg, params)?;
    let rect = [
        Dd::from_f64(-2.0),
        Dd::from_f64(2.0),
        Dd::from_f64(-2.0),
        Dd::from_f64(2.0),
    ];
    let search = refine(|x, y, prec| flow_map(&mut engine, x, y, prec), rect, shoot, true)?;
    let (d0, d1) = search.best.point();
    let mut engine = Engine::new(&with_horizon(solver, shoot.horizon), params)?;
    let certificate = certificate_run(&mut engine, d0, d1, search.best.precision)?;
    Ok(TrappedResult {
        d0,
        d1,
        search,
        certificate,
    })
}

/// Full trajectory for `(d₀, d₁)` with every sample kept.
pub fn certificate_run(engine: &mut Engine, d0: Dd, d1: Dd, precision: Precision) -> Result<Trajectory> {
    let s0 = engine.config.s0;
    let snaps = Snapshots::Every(0);
    match precision {
        Precision::Double => {
            let (u, v) = trapped_initial_state::<f64>(engine, d0, d1);
            engine.run(u, v, s0, snaps, |_| true)
        }
        Precision::DoubleDouble => {
            let (u, v) = trapped_initial_state::<Dd>(engine, d0, d1);
            engine.run(u, v, s0, snaps, |_| true)
        }
    }
}

/// Shape of a perturbation added to the base initial datum in the
/// similarity variables of the base solution at `σ₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PerturbationShape {
    /// `ε₀(e^{-z²/16}, e^{-z²/16}/2)`.
    Even,
    /// `ε₀(e^{-(z-1)²/16}, e^{-(z+2)²/16}/2)`.
    Shifted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub eps0: f64,
    pub shape: PerturbationShape,
}

impl Perturbation {
    pub fn zero() -> Self {
        Perturbation {
            eps0: 0.0,
            shape: PerturbationShape::Even,
        }
    }

    pub fn eval(&self, z: f64) -> (f64, f64) {
        if self.eps0 == 0.0 {
            return (0.0, 0.0);
        }
        let g = |c: f64| libm::exp(-(z - c) * (z - c) / 16.0);
        match self.shape {
            PerturbationShape::Even => (self.eps0 * g(0.0), 0.5 * self.eps0 * g(0.0)),
            PerturbationShape::Shifted => (self.eps0 * g(1.0), 0.5 * self.eps0 * g(-2.0)),
        }
    }

    pub fn describe(&self) -> String {
        let name = match self.shape {
            PerturbationShape::Even => "even",
            PerturbationShape::Shifted => "shifted",
        };
        format!("{name} gaussian, eps0 = {:e}", self.eps0)
    }
}

/// Base solution of a stability scan: the trapped datum at `σ₀`, with blowup
/// time `T̂ = e^{-σ₀}` and point `â = 0` in the frame where `t = 0` at `σ₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityBase {
    pub d0: Dd,
    pub d1: Dd,
    pub sigma0: f64,
}

impl StabilityBase {
    pub fn t_hat(&self) -> f64 {
        libm::exp(-self.sigma0)
    }

    pub fn a_hat(&self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityFit {
    pub perturbation: String,
    pub eps0: f64,
    pub fitted_t: f64,
    pub fitted_a: f64,
    pub tau: f64,
    pub alpha: f64,
    /// `|T − T̂| + |a − â|`.
    pub distance: f64,
    pub captured: bool,
    pub exit_s: f64,
    pub shots: usize,
    pub levels: Vec<LevelRecord>,
}

/// `(τ, α)` search box `|τ| ≤ 2B(pq−1)/σ₀²`, `|α| ≤ B(pq−1)/(bσ₀)`.
pub fn stability_box(sigma0: f64, b_big: f64, params: &Params, b: f64) -> (f64, f64) {
    let k = params.k();
    (2.0 * b_big * k / (sigma0 * sigma0), b_big * k / (b * sigma0))
}

/// `(Φ, Ψ)` for trial parameters `(τ, α)`:
/// `(1+τ)^{(p+1)/(pq−1)}[Φ̂(z, σ₀) + h(z)]` with `z = y√(1+τ) + α`, starting at
/// `s = σ₀ − log(1+τ)`.
pub fn stability_initial_state(
    engine: &Engine,
    base: &StabilityBase,
    pert: &Perturbation,
    tau: f64,
    alpha: f64,
) -> (Vec<f64>, Vec<f64>, f64) {
    let (c, p) = (engine.constants, engine.params);
    let cfg = &engine.config;
    let (ea, ec) = exponents(&p);
    let sq = libm::sqrt(1.0 + tau);
    let (fa, fc) = (libm::pow(1.0 + tau, ea), libm::pow(1.0 + tau, ec));
    let (d0, d1) = (base.d0.to_f64(), base.d1.to_f64());
    let mut u = Vec::with_capacity(engine.grid.n);
    let mut v = Vec::with_capacity(engine.grid.n);
    for y in engine.grid.nodes() {
        let z = y * sq + alpha;
        let (ph, ps) = intermediate_profile(z, base.sigma0, &c, &p);
        let [(f0, g0), (f1, g1)] = initial_shapes(z, base.sigma0, cfg.a, cfg.k, &c, &p);
        let (h, g) = pert.eval(z);
        u.push(fa * (ph + d0 * f0 + d1 * f1 + h));
        v.push(fc * (ps + d0 * g0 + d1 * g1 + g));
    }
    (u, v, base.sigma0 - libm::log(1.0 + tau))
}

/// For each perturbation, searches `(τ, α)` so that the perturbed solution,
/// rewritten in the similarity variables of `(T, a)`, stays trapped up to
/// `σ₀ + horizon`. `solver.a` plays the role of `B`.
pub fn stability_scan(
    base: &StabilityBase,
    perturbations: &[Perturbation],
    solver: &SolverConfig,
    shoot: &ShootConfig,
    params: &Params,
) -> Result<Vec<StabilityFit>> {
    shoot.validate()?;
    let mut cfg = solver.clone();
    cfg.s0 = base.sigma0;
    cfg.s_end = base.sigma0 + shoot.horizon;
    let mut engine = Engine::new(&cfg, params)?;
    let (tmax, amax) = stability_box(base.sigma0, cfg.a, params, engine.constants.b);
    if !(tmax < 1.0) {
        return Err(Error::Stability(format!(
            "search box |tau| <= {tmax} reaches tau = -1; increase s0 or lower A"
        )));
    }
    let rect = [
        Dd::from_f64(-tmax),
        Dd::from_f64(tmax),
        Dd::from_f64(-amax),
        Dd::from_f64(amax),
    ];
    let mut fits = Vec::with_capacity(perturbations.len());
    for pert in perturbations {
        let outcome = refine(
            |x, y, _| {
                let (tau, alpha) = (x.to_f64(), y.to_f64());
                let (u, v, s_start) = stability_initial_state(&engine, base, pert, tau, alpha);
                shoot_state(&mut engine, u, v, s_start, (x, y))
            },
            rect,
            shoot,
            pert.shape == PerturbationShape::Even,
        )
        .map_err(|e| match e {
            Error::NoCapture(m) => Error::Stability(format!("{}: {m}", pert.describe())),
            other => other,
        })?;
        if !outcome.captured {
            return Err(Error::Stability(format!(
                "{}: no trapped (T, a) in the search box ({})",
                pert.describe(),
                outcome.stop_reason
            )));
        }
        let (tau, alpha) = (outcome.best.d0, outcome.best.d1);
        let dt = tau * base.t_hat();
        let da = alpha * libm::exp(-base.sigma0 / 2.0);
        fits.push(StabilityFit {
            perturbation: pert.describe(),
            eps0: pert.eps0,
            fitted_t: base.t_hat() + dt,
            fitted_a: base.a_hat() + da,
            tau,
            alpha,
            distance: dt.abs() + da.abs(),
            captured: outcome.captured,
            exit_s: outcome.best.exit_s,
            shots: outcome.shots,
            levels: outcome.levels,
        });
    }
    Ok(fits)
}
