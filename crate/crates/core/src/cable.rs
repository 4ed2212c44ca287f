//! Quasi-static planar elastic cable manipulated by kinematic grippers.
//!
//! The cable is an inextensible chain of `N` equal segments described by
//! their absolute tangent angles `theta_1..theta_N`. Its equilibrium shape
//! minimises the discrete bending energy
//!
//! ```text
//! E = (1/l) * sum_j (theta_{j+1} - theta_j)^2
//! ```
//!
//! over all joints, where the base tangent (and the tip tangent, when the
//! gripper clamps it) enter as fixed boundary angles, subject to the tip
//! position constraint `p_base + l * sum_i (cos theta_i, sin theta_i) = p_tip`.
//! The constrained problem is solved by Newton iteration on the KKT system
//! with analytic first and second derivatives.
//!
//! Shapes are reached by continuation from a fixed reference configuration, so
//! the observation map `x -> contour` is a pure function of `x`.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const GRADIENT_TOL: f64 = 1e-9;
const CONSTRAINT_TOL: f64 = 1e-12;
const MAX_NEWTON_ITERS: usize = 500;
/// Largest boundary displacement per continuation substep (positions).
const CONTINUATION_STEP: f64 = 0.04;
/// Largest boundary rotation per continuation substep (radians).
const CONTINUATION_ANGLE_STEP: f64 = 0.15;
const MAX_BISECTIONS: usize = 12;
/// Largest change of any tangent angle in one solver iteration (radians).
const MAX_ANGLE_STEP: f64 = 0.5;
/// Escalating Hessian shifts tried when the line search rejects a step.
const FALLBACK_SHIFTS: usize = 8;

/// Planar pose: position and tangent angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: [f64; 2],
    pub angle: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, angle: f64) -> Self {
        Self {
            position: [x, y],
            angle,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CableSpec {
    pub length: f64,
    /// Number of contour points reported by `observe`.
    pub alpha: usize,
    pub segments: usize,
    /// Static clamped end (single-gripper rig).
    pub anchor: Pose,
}

impl Default for CableSpec {
    fn default() -> Self {
        Self {
            length: 0.5,
            alpha: 100,
            segments: 99,
            anchor: Pose::new(0.1, 0.4, 0.0),
        }
    }
}

impl CableSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "cable length must be positive, got {}",
                self.length
            )));
        }
        if self.alpha < 2 || self.segments < 2 {
            return Err(Error::InvalidParameter(format!(
                "need alpha >= 2 and segments >= 2 (alpha={}, segments={})",
                self.alpha, self.segments
            )));
        }
        Ok(())
    }

    pub fn segment_length(&self) -> f64 {
        self.length / self.segments as f64
    }
}

/// End conditions of one static solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Boundary {
    pub base: [f64; 2],
    /// Clamped base tangent; `None` leaves it free.
    pub base_angle: Option<f64>,
    pub tip: [f64; 2],
    /// Clamped tip tangent; `None` leaves it free.
    pub tip_angle: Option<f64>,
}

impl Boundary {
    fn base(&self) -> Vector2<f64> {
        Vector2::new(self.base[0], self.base[1])
    }

    fn tip(&self) -> Vector2<f64> {
        Vector2::new(self.tip[0], self.tip[1])
    }

    pub fn separation(&self) -> f64 {
        (self.tip() - self.base()).norm()
    }

    /// Reflection about the horizontal line through the base.
    pub fn mirrored(&self) -> Self {
        let by = self.base[1];
        Self {
            base: self.base,
            base_angle: self.base_angle.map(|a| -a),
            tip: [self.tip[0], 2.0 * by - self.tip[1]],
            tip_angle: self.tip_angle.map(|a| -a),
        }
    }

    fn lerp(&self, other: &Self, s: f64) -> Self {
        let mix = |a: f64, b: f64| a + (b - a) * s;
        let mix_opt = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (Some(a), Some(b)) => Some(mix(a, b)),
            _ => b,
        };
        Self {
            base: [
                mix(self.base[0], other.base[0]),
                mix(self.base[1], other.base[1]),
            ],
            base_angle: mix_opt(self.base_angle, other.base_angle),
            tip: [
                mix(self.tip[0], other.tip[0]),
                mix(self.tip[1], other.tip[1]),
            ],
            tip_angle: mix_opt(self.tip_angle, other.tip_angle),
        }
    }

    fn distance(&self, other: &Self) -> f64 {
        let pos = (self.base() - other.base())
            .norm()
            .max((self.tip() - other.tip()).norm())
            / CONTINUATION_STEP;
        let ang = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (Some(a), Some(b)) => (a - b).abs() / CONTINUATION_ANGLE_STEP,
            _ => 0.0,
        };
        pos.max(ang(self.base_angle, other.base_angle))
            .max(ang(self.tip_angle, other.tip_angle))
    }
}

/// Ordered contour points from the base to the tip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contour {
    pub points: Vec<[f64; 2]>,
}

impl Contour {
    pub fn new(points: Vec<[f64; 2]>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Total polyline length.
    pub fn arc_length(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2)).sqrt())
            .sum()
    }

    /// Flattened `[x_1, y_1, x_2, y_2, ...]`.
    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_iterator(
            2 * self.points.len(),
            self.points.iter().flat_map(|p| [p[0], p[1]]),
        )
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["index", "x", "y"])?;
        for (i, p) in self.points.iter().enumerate() {
            w.write_record([i.to_string(), p[0].to_string(), p[1].to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// A solved equilibrium.
#[derive(Debug, Clone, PartialEq)]
pub struct Shape {
    pub boundary: Boundary,
    pub angles: DVector<f64>,
    /// Lagrange multipliers of the tip constraint (the tip reaction force).
    pub multipliers: Vector2<f64>,
    pub segment_length: f64,
    pub iterations: usize,
}

impl Shape {
    pub fn vertices(&self) -> Vec<[f64; 2]> {
        let mut p = self.boundary.base();
        let mut out = Vec::with_capacity(self.angles.len() + 1);
        out.push([p.x, p.y]);
        for &t in self.angles.iter() {
            p += Vector2::new(t.cos(), t.sin()) * self.segment_length;
            out.push([p.x, p.y]);
        }
        out
    }

    pub fn energy(&self) -> f64 {
        bending_energy(&self.angles, &self.boundary, self.segment_length)
    }

    /// Contour with `alpha` points at uniform arc length.
    pub fn contour(&self, alpha: usize) -> Contour {
        let verts = self.vertices();
        if verts.len() == alpha {
            return Contour::new(verts);
        }
        let nseg = self.angles.len();
        let total = self.segment_length * nseg as f64;
        let points = (0..alpha)
            .map(|k| {
                let s = total * k as f64 / (alpha - 1) as f64;
                let pos = s / self.segment_length;
                let i = (pos.floor() as usize).min(nseg - 1);
                let f = pos - i as f64;
                let (a, b) = (verts[i], verts[i + 1]);
                [a[0] + (b[0] - a[0]) * f, a[1] + (b[1] - a[1]) * f]
            })
            .collect();
        Contour::new(points)
    }
}

/// Discrete bending energy of a chain of angles under the given end clamps.
pub fn bending_energy(angles: &DVector<f64>, boundary: &Boundary, segment_length: f64) -> f64 {
    let n = angles.len();
    let mut e = 0.0;
    if let Some(b) = boundary.base_angle {
        e += (angles[0] - b).powi(2);
    }
    for i in 1..n {
        e += (angles[i] - angles[i - 1]).powi(2);
    }
    if let Some(t) = boundary.tip_angle {
        e += (t - angles[n - 1]).powi(2);
    }
    e / segment_length
}

fn energy_gradient(angles: &DVector<f64>, boundary: &Boundary, l: f64) -> DVector<f64> {
    let n = angles.len();
    let mut g = DVector::zeros(n);
    let k = 2.0 / l;
    if let Some(b) = boundary.base_angle {
        g[0] += k * (angles[0] - b);
    }
    for i in 1..n {
        let d = k * (angles[i] - angles[i - 1]);
        g[i] += d;
        g[i - 1] -= d;
    }
    if let Some(t) = boundary.tip_angle {
        g[n - 1] -= k * (t - angles[n - 1]);
    }
    g
}

/// Tip position residual.
fn constraint(angles: &DVector<f64>, boundary: &Boundary, l: f64) -> Vector2<f64> {
    let mut p = boundary.base();
    for &t in angles.iter() {
        p += Vector2::new(t.cos(), t.sin()) * l;
    }
    p - boundary.tip()
}

struct Kkt {
    grad_l: DVector<f64>,
    g: Vector2<f64>,
}

fn kkt_residual(angles: &DVector<f64>, nu: &Vector2<f64>, boundary: &Boundary, l: f64) -> Kkt {
    let mut grad_l = energy_gradient(angles, boundary, l);
    for (i, &t) in angles.iter().enumerate() {
        grad_l[i] += l * (-nu.x * t.sin() + nu.y * t.cos());
    }
    Kkt {
        grad_l,
        g: constraint(angles, boundary, l),
    }
}

fn residual_norm(k: &Kkt) -> f64 {
    (k.grad_l.norm_squared() + k.g.norm_squared()).sqrt()
}

/// Least-squares multipliers for fixed angles.
fn estimate_multipliers(angles: &DVector<f64>, boundary: &Boundary, l: f64) -> Vector2<f64> {
    let ge = energy_gradient(angles, boundary, l);
    let mut jjt = Matrix2::zeros();
    let mut jge = Vector2::zeros();
    for (i, &t) in angles.iter().enumerate() {
        let j = Vector2::new(-l * t.sin(), l * t.cos());
        jjt += j * j.transpose();
        jge += j * ge[i];
    }
    jjt.try_inverse()
        .map(|inv| -(inv * jge))
        .unwrap_or_else(Vector2::zeros)
}

/// Lagrangian Hessian (tridiagonal) and constraint Jacobian rows.
struct Linearization {
    diag: DVector<f64>,
    off: f64,
    jx: DVector<f64>,
    jy: DVector<f64>,
}

fn linearize(
    angles: &DVector<f64>,
    nu: &Vector2<f64>,
    boundary: &Boundary,
    l: f64,
) -> Linearization {
    let n = angles.len();
    let k = 2.0 / l;
    let diag = DVector::from_fn(n, |i, _| {
        let mut d = 0.0;
        if i > 0 || boundary.base_angle.is_some() {
            d += k;
        }
        if i + 1 < n || boundary.tip_angle.is_some() {
            d += k;
        }
        let t = angles[i];
        d + l * (-nu.x * t.cos() - nu.y * t.sin())
    });
    Linearization {
        diag,
        off: -k,
        jx: DVector::from_iterator(n, angles.iter().map(|t| -l * t.sin())),
        jy: DVector::from_iterator(n, angles.iter().map(|t| l * t.cos())),
    }
}

struct Step {
    dtheta: DVector<f64>,
    dnu: Vector2<f64>,
    /// The shifted KKT matrix has the inertia of a strict constrained
    /// minimum: the Hessian is positive definite on the constraint tangent
    /// space.
    stable: bool,
}

/// Solves the KKT system with the Hessian shifted by `shift * I`.
///
/// Thomas elimination factors the tridiagonal block; the 2x2 Schur complement
/// `S = J W^-1 J^T` finishes the solve. By inertia additivity the KKT matrix
/// has exactly two negative eigenvalues (a constrained minimum) iff the
/// number of negative pivots of `W` plus the number of positive eigenvalues
/// of `S` equals two.
fn kkt_step(lin: &Linearization, shift: f64, res: &Kkt) -> Option<Step> {
    let n = lin.diag.len();
    let off = lin.off;
    let scale = lin
        .diag
        .iter()
        .fold(0.0_f64, |a, d| a.max(d.abs()))
        .max(off.abs());
    let mut c_prime = vec![0.0; n];
    let mut negative_pivots = 0;
    let mut rhs: [Vec<f64>; 3] = [
        res.grad_l.as_slice().to_vec(),
        lin.jx.as_slice().to_vec(),
        lin.jy.as_slice().to_vec(),
    ];
    for i in 0..n {
        let d = lin.diag[i] + shift;
        let p = if i == 0 { d } else { d - off * c_prime[i - 1] };
        if p.abs() < 1e-12 * scale {
            return None;
        }
        if p < 0.0 {
            negative_pivots += 1;
        }
        c_prime[i] = off / p;
        for r in rhs.iter_mut() {
            let prev = if i == 0 { 0.0 } else { r[i - 1] };
            r[i] = (r[i] - off * prev) / p;
        }
    }
    for i in (0..n.saturating_sub(1)).rev() {
        for r in rhs.iter_mut() {
            r[i] -= c_prime[i] * r[i + 1];
        }
    }
    let [w_grad, w_jx, w_jy] = rhs;
    let dot = |a: &DVector<f64>, b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let sxy = 0.5 * (dot(&lin.jx, &w_jy) + dot(&lin.jy, &w_jx));
    let s = Matrix2::new(dot(&lin.jx, &w_jx), sxy, sxy, dot(&lin.jy, &w_jy));
    let (tr, det) = (s.trace(), s.determinant());
    let positive_s = if det < 0.0 {
        1
    } else if tr > 0.0 {
        2
    } else {
        0
    };
    let rhs2 = res.g - Vector2::new(dot(&lin.jx, &w_grad), dot(&lin.jy, &w_grad));
    let dnu = s.try_inverse()? * rhs2;
    let dtheta = DVector::from_fn(n, |i, _| -(w_grad[i] + w_jx[i] * dnu.x + w_jy[i] * dnu.y));
    if dtheta.iter().any(|x| !x.is_finite()) || !dnu.iter().all(|x| x.is_finite()) {
        return None;
    }
    Some(Step {
        dtheta,
        dnu,
        stable: negative_pivots + positive_s == 2,
    })
}

/// Newton step when the current point already looks like a minimum,
/// otherwise the step of the smallest Hessian shift that restores the
/// inertia of a minimum. The returned flag is true when no shift was needed.
fn search_direction(lin: &Linearization, res: &Kkt) -> Option<(Step, bool)> {
    if let Some(step) = kkt_step(lin, 0.0, res) {
        if step.stable {
            return Some((step, true));
        }
    }
    let k = lin.off.abs();
    let mut shift = 1e-8 * k;
    for _ in 0..24 {
        if let Some(step) = kkt_step(lin, shift, res) {
            if step.stable {
                return Some((step, false));
            }
        }
        shift *= 4.0;
    }
    None
}

/// Most negative curvature direction of the Hessian on the constraint tangent
/// space, if there is one.
fn negative_curvature(lin: &Linearization) -> Option<DVector<f64>> {
    let n = lin.diag.len();
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        w[(i, i)] = lin.diag[i];
        if i + 1 < n {
            w[(i, i + 1)] = lin.off;
            w[(i + 1, i)] = lin.off;
        }
    }
    let j = DMatrix::from_rows(&[lin.jx.transpose(), lin.jy.transpose()]);
    let jjt = (&j * j.transpose()).try_inverse()?;
    let proj = DMatrix::identity(n, n) - j.transpose() * jjt * &j;
    let reduced = &proj * w * &proj;
    let reduced = (&reduced + reduced.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::new(reduced);
    let (idx, &min) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))?;
    if min >= -1e-9 * lin.off.abs() {
        return None;
    }
    Some(eig.eigenvectors.column(idx).into_owned())
}

/// Exact-penalty merit `E + rho |g|_1`.
fn merit(angles: &DVector<f64>, boundary: &Boundary, l: f64, rho: f64) -> f64 {
    let g = constraint(angles, boundary, l);
    bending_energy(angles, boundary, l) + rho * (g.x.abs() + g.y.abs())
}

fn converged(res: &Kkt, loose: f64) -> bool {
    res.grad_l.amax() < loose * GRADIENT_TOL && res.g.amax() < loose * CONSTRAINT_TOL
}

/// Solves for a stable static equilibrium starting from the given angles.
///
/// Newton steps on the KKT conditions are taken while the linearization has
/// the inertia of a minimum; otherwise the Hessian is shifted and the step is
/// globalized with an exact-penalty merit, which lets the shape snap onto a
/// neighbouring stable branch when the followed one ends. Saddle points are
/// left along their negative curvature direction.
pub fn solve_shape_from(
    spec: &CableSpec,
    boundary: &Boundary,
    initial: &DVector<f64>,
) -> Result<Shape> {
    spec.validate()?;
    if initial.len() != spec.segments {
        return Err(Error::Dimension(format!(
            "initial guess has {} angles, cable has {} segments",
            initial.len(),
            spec.segments
        )));
    }
    check_feasible(spec, boundary)?;
    if let Some(shape) = straight_shape(spec, boundary) {
        return Ok(shape);
    }
    let l = spec.segment_length();
    let mut angles = initial.clone();
    let mut nu = estimate_multipliers(&angles, boundary, l);
    let mut res = kkt_residual(&angles, &nu, boundary, l);
    let mut norm = residual_norm(&res);
    let mut rho = 0.0_f64;
    let mut escapes = 0;
    let done = |angles: DVector<f64>, nu: Vector2<f64>, it: usize| Shape {
        boundary: *boundary,
        angles,
        multipliers: nu,
        segment_length: l,
        iterations: it,
    };
    for it in 0..MAX_NEWTON_ITERS {
        let lin = linearize(&angles, &nu, boundary, l);
        let direction = search_direction(&lin, &res);
        let newton_ok = matches!(direction, Some((_, true)));
        if converged(&res, 1.0) {
            if newton_ok {
                return Ok(done(angles, nu, it));
            }
            // saddle: leave along the unstable mode
            let v = negative_curvature(&lin).ok_or(Error::SolverFailure {
                iterations: it,
                residual: norm,
            })?;
            escapes += 1;
            if escapes > 8 {
                return Err(Error::SolverFailure {
                    iterations: it,
                    residual: norm,
                });
            }
            angles += v * (0.05 * std::f64::consts::PI / (angles.len() as f64).sqrt());
            nu = estimate_multipliers(&angles, boundary, l);
            res = kkt_residual(&angles, &nu, boundary, l);
            norm = residual_norm(&res);
            continue;
        }
        let (mut step, pure) = direction.ok_or(Error::SolverFailure {
            iterations: it,
            residual: norm,
        })?;
        cap_step(&mut step);
        let mut accepted = line_search(
            &mut angles,
            &mut nu,
            &mut rho,
            &step,
            pure,
            boundary,
            l,
            norm,
        );
        // stronger shifts bend the step towards steepest descent
        let mut shift = 1e-2 * lin.off.abs();
        for _ in 0..FALLBACK_SHIFTS {
            if accepted {
                break;
            }
            if let Some(mut step) = kkt_step(&lin, shift, &res).filter(|s| s.stable) {
                cap_step(&mut step);
                accepted = line_search(
                    &mut angles,
                    &mut nu,
                    &mut rho,
                    &step,
                    false,
                    boundary,
                    l,
                    norm,
                );
            }
            shift *= 16.0;
        }
        if accepted {
            res = kkt_residual(&angles, &nu, boundary, l);
            norm = residual_norm(&res);
        }
        if !accepted {
            // stalled at round-off level
            if pure && converged(&res, 1e3) {
                return Ok(done(angles, nu, it));
            }
            return Err(Error::SolverFailure {
                iterations: it,
                residual: norm,
            });
        }
    }
    Err(Error::SolverFailure {
        iterations: MAX_NEWTON_ITERS,
        residual: norm,
    })
}

fn cap_step(step: &mut Step) {
    let largest = step.dtheta.amax();
    if largest > MAX_ANGLE_STEP {
        let c = MAX_ANGLE_STEP / largest;
        step.dtheta *= c;
        step.dnu *= c;
    }
}

/// Backtracks along `step`, accepting on residual decrease for pure Newton
/// steps or on sufficient decrease of the merit. Updates the iterate in place.
#[allow(clippy::too_many_arguments)]
fn line_search(
    angles: &mut DVector<f64>,
    nu: &mut Vector2<f64>,
    rho: &mut f64,
    step: &Step,
    pure: bool,
    boundary: &Boundary,
    l: f64,
    norm: f64,
) -> bool {
    let nu_plus = *nu + step.dnu;
    *rho = rho.max(nu_plus.amax() * 1.5 + 1.0);
    let g = constraint(angles, boundary, l);
    let ge = energy_gradient(angles, boundary, l);
    let slope = ge.dot(&step.dtheta) - *rho * (g.x.abs() + g.y.abs());
    let phi0 = merit(angles, boundary, l, *rho);
    let mut alpha = 1.0;
    for _ in 0..40 {
        let trial = &*angles + &step.dtheta * alpha;
        let trial_nu = *nu + step.dnu * alpha;
        let trial_norm = residual_norm(&kkt_residual(&trial, &trial_nu, boundary, l));
        let residual_ok =
            pure && trial_norm.is_finite() && trial_norm < norm * (1.0 - 1e-4 * alpha);
        let merit_ok =
            slope < 0.0 && merit(&trial, boundary, l, *rho) <= phi0 + 1e-4 * alpha * slope;
        if residual_ok || merit_ok {
            *nu = if pure {
                trial_nu
            } else {
                estimate_multipliers(&trial, boundary, l)
            };
            *angles = trial;
            return true;
        }
        alpha *= 0.5;
    }
    false
}

fn check_feasible(spec: &CableSpec, boundary: &Boundary) -> Result<()> {
    let sep = boundary.separation();
    if !sep.is_finite() {
        return Err(Error::InfeasibleConfiguration("non-finite boundary".into()));
    }
    if sep > spec.length * (1.0 + 1e-12) {
        return Err(Error::InfeasibleConfiguration(format!(
            "end separation {sep} exceeds cable length {}",
            spec.length
        )));
    }
    Ok(())
}

/// When the ends are exactly one cable length apart the only feasible shape is
/// the straight segment between them.
fn straight_shape(spec: &CableSpec, boundary: &Boundary) -> Option<Shape> {
    let sep = boundary.separation();
    if sep < spec.length * (1.0 - 1e-12) {
        return None;
    }
    let d = boundary.tip() - boundary.base();
    let heading = d.y.atan2(d.x);
    Some(Shape {
        boundary: *boundary,
        angles: DVector::from_element(spec.segments, heading),
        multipliers: Vector2::zeros(),
        segment_length: spec.segment_length(),
        iterations: 0,
    })
}

/// Continuation from a solved shape to a new boundary, with substep
/// bisection when Newton fails.
pub fn continue_shape(spec: &CableSpec, from: &Shape, to: &Boundary) -> Result<Shape> {
    check_feasible(spec, to)?;
    let dist = from.boundary.distance(to);
    let steps = dist.ceil().max(1.0) as usize;
    let mut current = from.clone();
    let start = from.boundary;
    let mut s_done = 0.0;
    let base_ds = 1.0 / steps as f64;
    let mut ds = base_ds;
    let mut bisections = 0;
    while s_done < 1.0 - 1e-15 {
        let s_next = (s_done + ds).min(1.0);
        let target = if s_next >= 1.0 {
            *to
        } else {
            start.lerp(to, s_next)
        };
        match solve_shape_from(spec, &target, &current.angles) {
            Ok(shape) => {
                current = shape;
                s_done = s_next;
                ds = (ds * 2.0).min(base_ds);
            }
            Err(e @ Error::InfeasibleConfiguration(_)) => return Err(e),
            Err(e) => {
                bisections += 1;
                if bisections > MAX_BISECTIONS {
                    return Err(e);
                }
                ds *= 0.5;
            }
        }
    }
    Ok(current)
}

/// How the configuration vector maps onto the cable's end conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rig {
    /// One gripper holds the tip by position only (`x = [px, py]`); the base is
    /// the static clamped anchor.
    SingleFree,
    /// Two grippers clamp both ends (`x = [xL, yL, phiL, xR, yR, phiR]`).
    DualClamped,
}

impl Rig {
    pub fn dim(&self) -> usize {
        match self {
            Rig::SingleFree => 2,
            Rig::DualClamped => 6,
        }
    }

    pub fn boundary(&self, spec: &CableSpec, x: &DVector<f64>) -> Result<Boundary> {
        if x.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "{self:?} configuration has {} entries, expected {}",
                x.len(),
                self.dim()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "configuration has non-finite entries".into(),
            ));
        }
        Ok(match self {
            Rig::SingleFree => Boundary {
                base: spec.anchor.position,
                base_angle: Some(spec.anchor.angle),
                tip: [x[0], x[1]],
                tip_angle: None,
            },
            Rig::DualClamped => Boundary {
                base: [x[0], x[1]],
                base_angle: Some(x[2]),
                tip: [x[3], x[4]],
                tip_angle: Some(x[5]),
            },
        })
    }

    /// Indices of the positional entries of each gripper.
    fn gripper_positions(&self) -> &'static [(usize, usize)] {
        match self {
            Rig::SingleFree => &[(0, 1)],
            Rig::DualClamped => &[(0, 1), (3, 4)],
        }
    }

    fn angle_indices(&self) -> &'static [usize] {
        match self {
            Rig::SingleFree => &[],
            Rig::DualClamped => &[2, 5],
        }
    }
}

/// Admissible region for gripper motions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Workspace {
    pub min: [f64; 2],
    pub max: [f64; 2],
    /// Largest allowed end separation as a fraction of the cable length.
    pub max_stretch: f64,
    /// Bound on gripper orientation magnitude (radians).
    pub max_angle: f64,
}

impl Default for Workspace {
    fn default() -> Self {
        Self {
            min: [0.0, 0.0],
            max: [1.0, 1.0],
            max_stretch: 0.98,
            max_angle: std::f64::consts::PI,
        }
    }
}

/// A cable, the rig that holds it and a solved reference equilibrium that all
/// observations are continued from.
#[derive(Debug, Clone)]
pub struct CableWorld {
    spec: CableSpec,
    rig: Rig,
    workspace: Workspace,
    reference: Shape,
}

impl CableWorld {
    pub fn new(
        spec: CableSpec,
        rig: Rig,
        workspace: Workspace,
        reference_config: &DVector<f64>,
    ) -> Result<Self> {
        spec.validate()?;
        let target = rig.boundary(&spec, reference_config)?;
        let seed = arc_shape(&spec, &target)?;
        let reference = continue_shape(&spec, &seed, &target)?;
        Ok(Self {
            spec,
            rig,
            workspace,
            reference,
        })
    }

    pub fn spec(&self) -> &CableSpec {
        &self.spec
    }

    pub fn rig(&self) -> Rig {
        self.rig
    }

    pub fn workspace(&self) -> &Workspace {
        &self.workspace
    }

    pub fn n(&self) -> usize {
        self.rig.dim()
    }

    pub fn reference(&self) -> &Shape {
        &self.reference
    }

    /// Same rig and reference configuration with the static anchor moved.
    pub fn with_anchor(&self, anchor: Pose) -> Result<Self> {
        let spec = CableSpec {
            anchor,
            ..self.spec
        };
        let x_ref = self.reference_config();
        Self::new(spec, self.rig, self.workspace, &x_ref)
    }

    fn reference_config(&self) -> DVector<f64> {
        let b = &self.reference.boundary;
        match self.rig {
            Rig::SingleFree => DVector::from_row_slice(&b.tip),
            Rig::DualClamped => DVector::from_row_slice(&[
                b.base[0],
                b.base[1],
                b.base_angle.unwrap_or(0.0),
                b.tip[0],
                b.tip[1],
                b.tip_angle.unwrap_or(0.0),
            ]),
        }
    }

    /// Equilibrium shape at configuration `x`.
    pub fn solve(&self, x: &DVector<f64>) -> Result<Shape> {
        let target = self.rig.boundary(&self.spec, x)?;
        continue_shape(&self.spec, &self.reference, &target)
    }

    /// Equilibrium at `x`, continued from a nearby solved shape.
    pub fn solve_from(&self, previous: &Shape, x: &DVector<f64>) -> Result<Shape> {
        let target = self.rig.boundary(&self.spec, x)?;
        continue_shape(&self.spec, previous, &target)
    }

    /// The sensed contour at configuration `x`.
    pub fn observe(&self, x: &DVector<f64>) -> Result<Contour> {
        Ok(self.solve(x)?.contour(self.spec.alpha))
    }

    /// Checks that `x` is an admissible configuration.
    pub fn check_admissible(&self, x: &DVector<f64>) -> Result<()> {
        let b = self.rig.boundary(&self.spec, x)?;
        let ws = &self.workspace;
        for &(i, j) in self.rig.gripper_positions() {
            let (px, py) = (x[i], x[j]);
            if px < ws.min[0] || px > ws.max[0] || py < ws.min[1] || py > ws.max[1] {
                return Err(Error::RejectedAction(format!(
                    "gripper at ({px:.4}, {py:.4}) leaves the workspace"
                )));
            }
        }
        for &i in self.rig.angle_indices() {
            if x[i].abs() > ws.max_angle {
                return Err(Error::RejectedAction(format!(
                    "gripper angle {} exceeds the limit",
                    x[i]
                )));
            }
        }
        if b.separation() > ws.max_stretch * self.spec.length {
            return Err(Error::RejectedAction(format!(
                "end separation {:.4} exceeds {:.4}",
                b.separation(),
                ws.max_stretch * self.spec.length
            )));
        }
        Ok(())
    }

    /// Kinematic displacement `x + u`; inadmissible moves are rejected.
    pub fn apply_action(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        apply_action(x, u, |next| self.check_admissible(next))
    }
}

/// `x + u`, subject to an admissibility check on the result.
pub fn apply_action<F>(x: &DVector<f64>, u: &DVector<f64>, admissible: F) -> Result<DVector<f64>>
where
    F: FnOnce(&DVector<f64>) -> Result<()>,
{
    if x.len() != u.len() {
        return Err(Error::Dimension(format!(
            "configuration has {} entries, action {}",
            x.len(),
            u.len()
        )));
    }
    let next = x + u;
    admissible(&next)?;
    Ok(next)
}

/// Constant-curvature arc leaving the base; it is an exact equilibrium when
/// both ends are clamped to its own end tangents, which makes it a safe
/// starting point for continuation.
fn arc_shape(spec: &CableSpec, target: &Boundary) -> Result<Shape> {
    let n = spec.segments;
    let l = spec.segment_length();
    let base_angle = target.base_angle.unwrap_or_else(|| {
        let d = target.tip() - target.base();
        d.y.atan2(d.x) - 0.5
    });
    let kappa_step = 1.0 / n as f64;
    let angles = DVector::from_fn(n, |i, _| base_angle + kappa_step * (i + 1) as f64);
    let mut boundary = Boundary {
        base: target.base,
        base_angle: target.base_angle.map(|_| base_angle),
        tip: [0.0, 0.0],
        tip_angle: target
            .tip_angle
            .map(|_| base_angle + kappa_step * (n + 1) as f64),
    };
    let mut p = boundary.base();
    for &t in angles.iter() {
        p += Vector2::new(t.cos(), t.sin()) * l;
    }
    boundary.tip = [p.x, p.y];
    solve_shape_from(spec, &boundary, &angles)
}

/// Reproducible uniform babbling actions.
#[derive(Debug, Clone)]
pub struct Babbler {
    rng: ChaCha8Rng,
    amplitude: f64,
}

impl Babbler {
    pub fn new(seed: u64, amplitude: f64) -> Result<Self> {
        if !(amplitude > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "babbling amplitude must be positive, got {amplitude}"
            )));
        }
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            amplitude,
        })
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    /// Next action, each component uniform in `[-amplitude, amplitude]`.
    pub fn next_action(&mut self, n: usize) -> DVector<f64> {
        let a = self.amplitude;
        DVector::from_fn(n, |_, _| self.rng.gen_range(-a..=a))
    }

    /// Uniform sample in the box `center +- radius`.
    pub fn sample_around(&mut self, center: &DVector<f64>, radius: f64) -> DVector<f64> {
        center.map(|c| c + self.rng.gen_range(-radius..=radius))
    }
}
