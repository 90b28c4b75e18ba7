//! Quadrature oracle: ground-truth evaluation of the kernel integral, the
//! boundary term [g]_a^b, and analytic continuation in x-space by contour
//! deformation in t with explicit branch tracking.

use crate::atlas::{EvaluationPoint, RegionTag};
use crate::error::{Error, Result};
use crate::scalar::{branched_pow, principal_log, real_pow, C64, EPS_BD};
use crate::series::Parameters;

// 15-point Gauss-Kronrod nodes and weights (QUADPACK dqk15).
const XGK: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];
const WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

/// One 15-point Gauss-Kronrod panel on [u, v] for a complex integrand of a
/// real parameter; returns (kronrod value, error estimate).
fn gk15<F: Fn(f64) -> C64>(f: &F, u: f64, v: f64) -> (C64, f64) {
    let c = 0.5 * (u + v);
    let h = 0.5 * (v - u);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        kron += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    ((kron * h), ((kron - gauss) * h).norm())
}

/// Adaptive bisection driver. `tol` is absolute on the whole interval.
fn adaptive_gk<F: Fn(f64) -> C64>(f: &F, u: f64, v: f64, tol: f64) -> Result<(C64, f64)> {
    fn rec<F: Fn(f64) -> C64>(
        f: &F,
        u: f64,
        v: f64,
        tol: f64,
        depth: u32,
    ) -> Result<(C64, f64)> {
        let (val, err) = gk15(f, u, v);
        if err <= tol || err <= 1e-16 * val.norm() {
            return Ok((val, err));
        }
        if depth >= 40 {
            return Err(Error::QuadratureNotConverged { estimate: err });
        }
        let mid = 0.5 * (u + v);
        let (l, le) = rec(f, u, mid, 0.5 * tol, depth + 1)?;
        let (r, re) = rec(f, mid, v, 0.5 * tol, depth + 1)?;
        Ok((l + r, le + re))
    }
    rec(f, u, v, tol, 0)
}

/// Tanh-sinh (double exponential) quadrature on [0, b] for an integrand with
/// an algebraic singularity at 0. `f` receives t computed as a stable offset
/// from 0.
fn tanh_sinh<F: Fn(f64) -> C64>(f: &F, b: f64, tol: f64) -> Result<(C64, f64)> {
    let half = 0.5 * b;
    let pi_2 = 0.5 * std::f64::consts::PI;
    // node at u: t = half (1 + tanh(pi/2 sinh u)), weight half pi/2 cosh u sech^2
    let eval = |u: f64| -> C64 {
        let w = pi_2 * u.sinh();
        if w.abs() > 350.0 {
            return C64::new(0.0, 0.0);
        }
        // 1 + tanh w = 2 e^{2w} / (1 + e^{2w}) computed from the small side
        let t = if w <= 0.0 {
            let e = (2.0 * w).exp();
            half * 2.0 * e / (1.0 + e)
        } else {
            let e = (-2.0 * w).exp();
            half * 2.0 / (1.0 + e)
        };
        if t <= 0.0 || t >= b {
            return C64::new(0.0, 0.0);
        }
        let sech = 2.0 / (w.exp() + (-w).exp());
        let weight = half * pi_2 * u.cosh() * sech * sech;
        f(t) * weight
    };
    let umax = 4.0;
    let mut prev = C64::new(f64::NAN, 0.0);
    for level in 2..=12u32 {
        let h = 1.0 / (1 << level) as f64 * 4.0; // level 2: h = 0.25
        let n = (umax / h).ceil() as i64;
        let mut sum = C64::new(0.0, 0.0);
        for k in -n..=n {
            sum += eval(k as f64 * h);
        }
        let cur = sum * h;
        if prev.re.is_finite() {
            let diff = (cur - prev).norm();
            if diff <= tol.max(1e-15 * cur.norm()) {
                return Ok((cur, diff));
            }
        }
        prev = cur;
    }
    Err(Error::QuadratureNotConverged {
        estimate: f64::INFINITY,
    })
}

/// Branch points of the integrand in t: -x11/x21 and -x12/x22 (when the
/// trailing coordinate is nonzero).
pub fn t_branch_points(x: &EvaluationPoint) -> [Option<C64>; 2] {
    let bp = |x1: C64, x2: C64| {
        if x2.norm() == 0.0 {
            None
        } else {
            Some(-x1 / x2)
        }
    };
    [bp(x.x11, x.x21), bp(x.x12, x.x22)]
}

fn dist_to_segment(p: C64, u: f64, v: f64) -> f64 {
    let t = p.re.clamp(u, v);
    (p - C64::new(t, 0.0)).norm()
}

/// Check that the principal-branch integrand is continuous on [a, b]: no
/// branch point on the segment and no branch-cut crossing of either linear
/// factor.
fn check_contour_clear(p: &Parameters, x: &EvaluationPoint) -> Result<()> {
    for (i, bp) in t_branch_points(x).iter().enumerate() {
        if let Some(pt) = bp {
            let d = dist_to_segment(*pt, p.a, p.b);
            if d <= 1e-10 * (1.0 + pt.norm()) {
                return Err(Error::BranchPointOnContour(format!(
                    "factor {} branch point {pt} within {d:.2e} of [a,b]",
                    i + 1
                )));
            }
        }
    }
    for (x1, x2) in [(x.x11, x.x21), (x.x12, x.x22)] {
        if x2.im.abs() > 0.0 {
            let t_star = -x1.im / x2.im;
            if t_star >= p.a && t_star <= p.b {
                let w = x1 + x2 * t_star;
                if w.re < 0.0 {
                    return Err(Error::BranchPointOnContour(format!(
                        "principal cut of a linear factor crosses [a,b] at t = {t_star}"
                    )));
                }
            }
        }
    }
    Ok(())
}

/// The kernel integral over [a, b] with principal-branch factors.
///
/// Adaptive Gauss-Kronrod; when a = 0 the endpoint power t^gamma is handled
/// by tanh-sinh weighting (requires Re gamma > -1).
pub fn phi_integral(p: &Parameters, x: &EvaluationPoint, tol: f64) -> Result<C64> {
    check_contour_clear(p, x)?;
    let integrand = |t: f64| -> C64 {
        let w1 = x.x11 + x.x21 * t;
        let w2 = x.x12 + x.x22 * t;
        let f1 = branched_pow(w1, p.alpha1).unwrap_or(C64::new(f64::NAN, 0.0));
        let f2 = branched_pow(w2, p.alpha2).unwrap_or(C64::new(f64::NAN, 0.0));
        real_pow(t, p.gamma) * f1 * f2
    };
    if p.a == 0.0 {
        if p.gamma.re <= -1.0 {
            return Err(Error::Endpoint(format!(
                "a = 0 requires Re gamma > -1, got {}",
                p.gamma
            )));
        }
        let (v, _) = tanh_sinh(&integrand, p.b, tol)?;
        Ok(v)
    } else {
        let (v, _) = adaptive_gk(&integrand, p.a, p.b, tol)?;
        Ok(v)
    }
}

/// Which side of each linear factor the anchor factorization pulls out.
fn anchor_inverted(anchor: RegionTag) -> (bool, bool) {
    // superscript picks x11 vs x21 t for the first factor, subscript picks
    // x12 vs x22 t for the second
    match anchor {
        RegionTag::D12_11 => (false, false),
        RegionTag::D22_11 => (false, true),
        RegionTag::D12_21 => (true, false),
        RegionTag::D22_21 => (true, true),
    }
}

/// g(t, x) = t^{gamma+1} (x11 + x21 t)^{alpha1} (x12 + x22 t)^{alpha2}
/// evaluated through the anchored factorization at real t >= 0.
pub fn g_at(p: &Parameters, x: &EvaluationPoint, t: f64, anchor: RegionTag) -> Result<C64> {
    let (inv1, inv2) = anchor_inverted(anchor);
    let mut t_exp = p.gamma + 1.0;
    if inv1 {
        t_exp += p.alpha1;
    }
    if inv2 {
        t_exp += p.alpha2;
    }
    if t == 0.0 {
        return if t_exp.re > 0.0 {
            Ok(C64::new(0.0, 0.0))
        } else {
            Err(Error::Endpoint(format!(
                "g(0, x) undefined: Re t-exponent {} <= 0",
                t_exp
            )))
        };
    }
    let factor = |x1: C64, x2: C64, alpha: C64, inverted: bool| -> Result<C64> {
        let arg = if inverted {
            x1 / (x2 * t) + 1.0
        } else {
            C64::new(1.0, 0.0) + x2 * t / x1
        };
        if arg.im.abs() <= EPS_BD * (1.0 + arg.norm()) && arg.re <= 0.0 {
            return Err(Error::Boundary(format!(
                "anchored factor argument {arg} on the branch cut"
            )));
        }
        let outer = if inverted { x2 } else { x1 };
        Ok(branched_pow(outer, alpha)? * branched_pow(arg, alpha)?)
    };
    let f1 = factor(x.x11, x.x21, p.alpha1, inv1)?;
    let f2 = factor(x.x12, x.x22, p.alpha2, inv2)?;
    Ok(real_pow(t, t_exp) * f1 * f2)
}

/// [g]_a^b = g(b, x) - g(a, x) through the anchor factorization.
pub fn boundary_term(p: &Parameters, x: &EvaluationPoint, anchor: RegionTag) -> Result<C64> {
    Ok(g_at(p, x, p.b, anchor)? - g_at(p, x, p.a, anchor)?)
}

// ---------------------------------------------------------------------------
// path continuation
// ---------------------------------------------------------------------------

/// A polyline in x-space along which the integral is continued.
#[derive(Debug, Clone)]
pub struct PathSpec {
    pub vertices: Vec<EvaluationPoint>,
    pub closed: bool,
}

impl PathSpec {
    pub fn open(vertices: Vec<EvaluationPoint>) -> Self {
        PathSpec {
            vertices,
            closed: false,
        }
    }

    pub fn closed(vertices: Vec<EvaluationPoint>) -> Self {
        PathSpec {
            vertices,
            closed: true,
        }
    }

    /// The vertex sequence actually walked (closing the loop if requested).
    fn walk_vertices(&self) -> Vec<EvaluationPoint> {
        let mut v = self.vertices.clone();
        if self.closed {
            if let Some(first) = self.vertices.first().copied() {
                v.push(first);
            }
        }
        v
    }

    /// A keyhole loop in the x11 coordinate around `center`, based at `x0`:
    /// out along the upper half plane, once counterclockwise around a small
    /// circle, and back the same way.
    pub fn keyhole_x11(x0: &EvaluationPoint, center: C64, radius: f64, height: f64) -> PathSpec {
        let mut xs: Vec<C64> = vec![x0.x11];
        xs.push(x0.x11 + C64::new(0.0, height));
        xs.push(center + C64::new(0.0, height));
        for k in 0..=24 {
            let ang = std::f64::consts::FRAC_PI_2 + 2.0 * std::f64::consts::PI * k as f64 / 24.0;
            xs.push(center + radius * C64::new(ang.cos(), ang.sin()));
        }
        xs.push(center + C64::new(0.0, height));
        xs.push(x0.x11 + C64::new(0.0, height));
        xs.push(x0.x11);
        let vertices = xs
            .into_iter()
            .map(|x11| EvaluationPoint::new(x11, x0.x21, x0.x12, x0.x22))
            .collect();
        PathSpec::open(vertices)
    }
}

#[derive(Debug, Clone, Copy)]
struct Tracked {
    t: C64,
    log_t: C64,
    log_w1: C64,
    log_w2: C64,
}

/// A t-contour from a to b with the branch of each integrand factor carried
/// at every vertex. The contour deforms to dodge the moving branch points.
pub struct Continuation {
    params: Parameters,
    x: EvaluationPoint,
    verts: Vec<Tracked>,
}

const MAX_VERTICES: usize = 40_000;

impl Continuation {
    /// Start at x0 with the straight contour [a, b] and principal branches.
    pub fn new(params: &Parameters, x0: &EvaluationPoint) -> Result<Self> {
        check_contour_clear(params, x0)?;
        if params.a == 0.0 {
            return Err(Error::Endpoint(
                "path continuation requires a > 0 (the contour endpoint t = a = 0 \
                 sits on the t^gamma branch point)"
                    .into(),
            ));
        }
        let n0 = 48;
        let mut verts = Vec::with_capacity(n0 + 1);
        for j in 0..=n0 {
            let t = C64::new(
                params.a + (params.b - params.a) * j as f64 / n0 as f64,
                0.0,
            );
            verts.push(Tracked {
                t,
                log_t: principal_log(t),
                log_w1: principal_log(x0.x11 + x0.x21 * t),
                log_w2: principal_log(x0.x12 + x0.x22 * t),
            });
        }
        // the initial principal chain must be continuous along [a, b]
        for j in 0..n0 {
            let d1 = (verts[j + 1].log_w1 - verts[j].log_w1).im.abs();
            let d2 = (verts[j + 1].log_w2 - verts[j].log_w2).im.abs();
            if d1 > 1.5 || d2 > 1.5 {
                return Err(Error::BranchPointOnContour(
                    "principal branch discontinuous along [a, b] at the base point".into(),
                ));
            }
        }
        Ok(Continuation {
            params: *params,
            x: *x0,
            verts,
        })
    }

    pub fn current_point(&self) -> EvaluationPoint {
        self.x
    }

    fn branch_points(&self) -> Vec<C64> {
        let mut pts: Vec<C64> = t_branch_points(&self.x).iter().flatten().copied().collect();
        pts.push(C64::new(0.0, 0.0)); // t^gamma branch point
        pts
    }

    fn min_dist_to_contour(&self, p: C64) -> f64 {
        let mut d = f64::INFINITY;
        for w in self.verts.windows(2) {
            d = d.min(seg_dist(w[0].t, w[1].t, p));
        }
        d
    }

    /// One small step of every x coordinate; fails if any vertex log would
    /// jump by more than half a turn (the caller then subdivides).
    fn try_step(&mut self, xn: &EvaluationPoint) -> Result<()> {
        let xo = self.x;
        // opposite-side guard: the branch point may not cross the contour
        for bp_new in t_branch_points(xn).iter().flatten() {
            let d = self.min_dist_to_contour(*bp_new);
            if d <= 1e-9 * (1.0 + bp_new.norm()) {
                return Err(Error::ContourCollision(format!(
                    "branch point {bp_new} lands on the contour"
                )));
            }
        }
        let mut updates = Vec::with_capacity(self.verts.len());
        for vert in &self.verts {
            let t = vert.t;
            let r1 = (xn.x11 + xn.x21 * t) / (xo.x11 + xo.x21 * t);
            let r2 = (xn.x12 + xn.x22 * t) / (xo.x12 + xo.x22 * t);
            let (l1, l2) = (principal_log(r1), principal_log(r2));
            if l1.im.abs() > 1.0 || l2.im.abs() > 1.0 {
                return Err(Error::ContourCollision("x step too large".into()));
            }
            updates.push((l1, l2));
        }
        for (vert, (l1, l2)) in self.verts.iter_mut().zip(updates) {
            vert.log_w1 += l1;
            vert.log_w2 += l2;
        }
        self.x = *xn;
        Ok(())
    }

    /// Move a vertex at fixed x, updating its logs by continuity.
    fn move_vertex(&mut self, j: usize, tn: C64) -> Result<()> {
        let to = self.verts[j].t;
        let rt = tn / to;
        let r1 = (self.x.x11 + self.x.x21 * tn) / (self.x.x11 + self.x.x21 * to);
        let r2 = (self.x.x12 + self.x.x22 * tn) / (self.x.x12 + self.x.x22 * to);
        let (lt, l1, l2) = (principal_log(rt), principal_log(r1), principal_log(r2));
        if lt.im.abs() > 1.5 || l1.im.abs() > 1.5 || l2.im.abs() > 1.5 {
            return Err(Error::ContourCollision("vertex move too large".into()));
        }
        let v = &mut self.verts[j];
        v.t = tn;
        v.log_t += lt;
        v.log_w1 += l1;
        v.log_w2 += l2;
        Ok(())
    }

    /// Insert a vertex on edge (j, j+1) at its midpoint, branch-anchored at
    /// the nearer endpoint.
    fn split_edge(&mut self, j: usize) -> Result<()> {
        if self.verts.len() >= MAX_VERTICES {
            return Err(Error::NumericBreakdown(
                "contour refinement exceeded the vertex budget".into(),
            ));
        }
        let u = self.verts[j];
        let v = self.verts[j + 1];
        let mid = 0.5 * (u.t + v.t);
        let anchor = if (u.t - mid).norm() <= (v.t - mid).norm() {
            u
        } else {
            v
        };
        let rt = mid / anchor.t;
        let r1 = (self.x.x11 + self.x.x21 * mid) / (self.x.x11 + self.x.x21 * anchor.t);
        let r2 = (self.x.x12 + self.x.x22 * mid) / (self.x.x12 + self.x.x22 * anchor.t);
        let (lt, l1, l2) = (principal_log(rt), principal_log(r1), principal_log(r2));
        if lt.im.abs() > 1.5 || l1.im.abs() > 1.5 || l2.im.abs() > 1.5 {
            return Err(Error::ContourCollision("edge split across a branch cut".into()));
        }
        self.verts.insert(
            j + 1,
            Tracked {
                t: mid,
                log_t: anchor.log_t + lt,
                log_w1: anchor.log_w1 + l1,
                log_w2: anchor.log_w2 + l2,
            },
        );
        Ok(())
    }

    /// Keep every vertex outside the safety disc of each branch point and
    /// every edge short relative to its distance to the branch points.
    fn deform(&mut self) -> Result<()> {
        let a = C64::new(self.params.a, 0.0);
        let b = C64::new(self.params.b, 0.0);
        for pass in 0..64 {
            let mut changed = false;
            let pts = self.branch_points();
            for p in &pts {
                let rsafe = 0.45 * (p - a).norm().min((p - b).norm());
                if rsafe <= 0.0 {
                    return Err(Error::ContourCollision(
                        "branch point reached a contour endpoint".into(),
                    ));
                }
                // split edges that pass near p or are long relative to the
                // distance to p
                let len_floor = 1e-4 * (self.params.b - self.params.a);
                let mut j = 0;
                while j + 1 < self.verts.len() {
                    let u = self.verts[j].t;
                    let v = self.verts[j + 1].t;
                    let len = (u - v).norm();
                    let d = seg_dist(u, v, *p);
                    if d < 1e-6 * rsafe && len > len_floor {
                        return Err(Error::ContourCollision(format!(
                            "branch point {p} sits on a contour edge"
                        )));
                    }
                    let needs_split = (d < 2.2 * rsafe && len > 0.5 * rsafe)
                        || (len > 1.2 * d && len > len_floor);
                    if needs_split {
                        self.split_edge(j)?;
                        changed = true;
                    } else {
                        j += 1;
                    }
                }
                // push interior vertices out of the safety disc, radially,
                // with overshoot so rounding cannot re-trigger the push
                for j in 1..self.verts.len() - 1 {
                    let d = (self.verts[j].t - p).norm();
                    if d < rsafe {
                        if d < 1e-3 * rsafe {
                            return Err(Error::ContourCollision(format!(
                                "branch point {p} overran the contour"
                            )));
                        }
                        let tn = p + (self.verts[j].t - p) * (1.08 * rsafe / d);
                        self.move_vertex(j, tn)?;
                        changed = true;
                    }
                }
            }
            if !changed {
                return Ok(());
            }
            let _ = pass;
        }
        Err(Error::NumericBreakdown(format!(
            "contour deformation did not settle ({} vertices, x = {:?}, branch points {:?})",
            self.verts.len(),
            self.x,
            self.branch_points()
        )))
    }

    /// Advance x to `target`, micro-stepping so the branch points move by a
    /// small fraction of their distance to the contour per step.
    pub fn walk_to(&mut self, target: &EvaluationPoint) -> Result<()> {
        let mut done = 0.0f64;
        let mut step = 1.0f64;
        let start = self.x;
        while done < 1.0 {
            step = step.min(1.0 - done);
            // limit the step so each branch point moves < 0.3 of its contour distance
            let s = done + step;
            let xn = lerp_point(&start, target, s);
            let mut ok = true;
            for (bp_old, bp_new) in t_branch_points(&self.x)
                .iter()
                .zip(t_branch_points(&xn).iter())
            {
                if let (Some(po), Some(pn)) = (bp_old, bp_new) {
                    let d = self.min_dist_to_contour(*po);
                    if (pn - po).norm() > 0.3 * d {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                // try_step mutates nothing when it fails
                match self.try_step(&xn) {
                    Ok(()) => {
                        self.deform()?;
                        done += step;
                        step *= 1.6;
                        continue;
                    }
                    Err(Error::ContourCollision(_)) if step > 1e-6 => {}
                    Err(e) => return Err(e),
                }
            }
            step *= 0.5;
            if step < 1e-9 {
                return Err(Error::ContourCollision(
                    "step size underflow while walking the x path".into(),
                ));
            }
        }
        Ok(())
    }

    /// Integrate over the current contour with the tracked branch.
    pub fn value(&self, tol: f64) -> Result<C64> {
        let x = self.x;
        let p = &self.params;
        let mut total = C64::new(0.0, 0.0);
        let edge_tol = tol / self.verts.len().max(1) as f64;
        for w in self.verts.windows(2) {
            let (u, v) = (w[0], w[1]);
            let dt = v.t - u.t;
            let wu1 = x.x11 + x.x21 * u.t;
            let wu2 = x.x12 + x.x22 * u.t;
            let f = |s: f64| -> C64 {
                let t = u.t + dt * s;
                let lt = u.log_t + principal_log(t / u.t);
                let l1 = u.log_w1 + principal_log((x.x11 + x.x21 * t) / wu1);
                let l2 = u.log_w2 + principal_log((x.x12 + x.x22 * t) / wu2);
                (p.gamma * lt + p.alpha1 * l1 + p.alpha2 * l2).exp() * dt
            };
            let (val, _) = adaptive_gk(&f, 0.0, 1.0, edge_tol)?;
            total += val;
        }
        Ok(total)
    }

    pub fn vertex_count(&self) -> usize {
        self.verts.len()
    }
}

fn lerp_point(a: &EvaluationPoint, b: &EvaluationPoint, s: f64) -> EvaluationPoint {
    let l = |u: C64, v: C64| u + (v - u) * s;
    EvaluationPoint::new(
        l(a.x11, b.x11),
        l(a.x21, b.x21),
        l(a.x12, b.x12),
        l(a.x22, b.x22),
    )
}

fn seg_dist(u: C64, v: C64, p: C64) -> f64 {
    let d = v - u;
    let len2 = d.norm_sqr();
    if len2 == 0.0 {
        return (p - u).norm();
    }
    let s = ((p - u) * d.conj()).re / len2;
    let s = s.clamp(0.0, 1.0);
    (u + d * s - p).norm()
}

/// Continue the kernel integral along an x-space path; returns the value at
/// the path end. The t-contour starts as [a, b] at the first vertex and is
/// deformed as the branch points move.
pub fn continue_along_path(p: &Parameters, path: &PathSpec, tol: f64) -> Result<C64> {
    let verts = path.walk_vertices();
    let first = verts
        .first()
        .ok_or_else(|| Error::Config("empty path".into()))?;
    let mut cont = Continuation::new(p, first)?;
    for v in &verts[1..] {
        cont.walk_to(v)?;
    }
    cont.value(tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn assert_close(x: C64, y: C64, tol: f64) {
        let scale = 1.0 + x.norm().max(y.norm());
        assert!(
            (x - y).norm() <= tol * scale,
            "{x} vs {y} (err {})",
            (x - y).norm() / scale
        );
    }

    #[test]
    fn phi_constant_integrand() {
        let p = Parameters::from_reals(0.0, 0.0, 0.0, 1.0, 2.0).unwrap();
        let x = EvaluationPoint::from_reals(1.0, 1.0, 1.0, 1.0);
        let v = phi_integral(&p, &x, 1e-12).unwrap();
        assert_close(v, c(1.0, 0.0), 1e-13);
    }

    #[test]
    fn phi_polynomial_integrand() {
        // alpha1 = 1: x11 (b-a) + x21 (b^2-a^2)/2 = 1 + 0.5 = 1.5
        let p = Parameters::from_reals(1.0, 0.0, 0.0, 0.0, 1.0).unwrap();
        let x = EvaluationPoint::from_reals(1.0, 1.0, 1.0, 1.0);
        let v = phi_integral(&p, &x, 1e-12).unwrap();
        assert_close(v, c(1.5, 0.0), 1e-12);
    }

    #[test]
    fn phi_arcsin_closed_form() {
        // gamma = a1 = a2 = -1/2, a=0, b=1, x = (1, -z^2, 1, 0): 2 asin(z)/z
        let z = 0.5f64;
        let p = Parameters::from_reals(-0.5, -0.5, -0.5, 0.0, 1.0).unwrap();
        let x = EvaluationPoint::new(c(1.0, 0.0), c(-z * z, 0.0), c(1.0, 0.0), c(0.0, 0.0));
        let v = phi_integral(&p, &x, 1e-12).unwrap();
        assert_close(v, c(2.0 * z.asin() / z, 0.0), 1e-11);
        assert_close(v, c(2.0 * std::f64::consts::PI / 3.0, 0.0), 1e-11);
    }

    #[test]
    fn phi_branch_point_on_contour_rejected() {
        let p = Parameters::from_reals(0.5, 0.0, 0.0, 0.5, 2.0).unwrap();
        // -x11/x21 = 1.0 inside [0.5, 2]
        let x = EvaluationPoint::from_reals(1.0, -1.0, 1.0, 1.0);
        assert!(matches!(
            phi_integral(&p, &x, 1e-10),
            Err(Error::BranchPointOnContour(_))
        ));
    }

    #[test]
    fn phi_scaling_in_first_pair() {
        let p = Parameters::from_reals(0.37, -0.21, 0.13, 0.8, 1.5).unwrap();
        let x = EvaluationPoint::from_reals(5.0, 1.0, 3.0, 2.0);
        let s = 1.7f64;
        let xs = EvaluationPoint::from_reals(5.0 * s, s, 3.0, 2.0);
        let v = phi_integral(&p, &x, 1e-12).unwrap();
        let vs = phi_integral(&p, &xs, 1e-12).unwrap();
        assert_close(vs, real_pow(s, p.alpha1) * v, 1e-9);
    }

    #[test]
    fn boundary_term_trivial() {
        // alpha = 0, gamma = 0: g = t, [g] = b - a
        let p = Parameters::from_reals(0.0, 0.0, 0.0, 0.8, 1.5).unwrap();
        let x = EvaluationPoint::from_reals(1.0, 2.0, 3.0, 4.0);
        for anchor in RegionTag::ALL {
            let v = boundary_term(&p, &x, anchor).unwrap();
            assert_close(v, c(0.7, 0.0), 1e-14);
        }
    }

    #[test]
    fn boundary_term_anchors_agree_for_positive_reals() {
        let p = Parameters::from_reals(0.37, -0.21, 0.13, 0.8, 1.5).unwrap();
        let x = EvaluationPoint::from_reals(1.0, 3.0, 1.0, 6.0);
        let direct = |t: f64| {
            real_pow(t, p.gamma + 1.0)
                * branched_pow(x.x11 + x.x21 * t, p.alpha1).unwrap()
                * branched_pow(x.x12 + x.x22 * t, p.alpha2).unwrap()
        };
        let expect = direct(p.b) - direct(p.a);
        for anchor in RegionTag::ALL {
            let v = boundary_term(&p, &x, anchor).unwrap();
            assert_close(v, expect, 1e-12);
        }
    }

    #[test]
    fn boundary_term_a_zero() {
        let p = Parameters::from_reals(0.37, -0.21, 0.13, 0.0, 1.5).unwrap();
        let x = EvaluationPoint::from_reals(1.0, 0.2, 1.0, 0.3);
        let v = boundary_term(&p, &x, RegionTag::D12_11).unwrap();
        let g_b = g_at(&p, &x, p.b, RegionTag::D12_11).unwrap();
        assert_eq!(v, g_b);
        // inverted anchor with too-negative exponent at t = 0 errors
        let p2 = Parameters::from_reals(-0.9, -0.9, -0.2, 0.0, 1.5).unwrap();
        assert!(boundary_term(&p2, &x, RegionTag::D22_21).is_err());
    }

    #[test]
    fn continuation_constant_path_matches_phi() {
        let p = Parameters::from_reals(0.37, -0.21, 0.13, 0.8, 1.5).unwrap();
        let x = EvaluationPoint::from_reals(5.0, 1.0, 10.0, 1.0);
        let path = PathSpec::open(vec![x]);
        let v = continue_along_path(&p, &path, 1e-11).unwrap();
        let phi = phi_integral(&p, &x, 1e-12).unwrap();
        assert_close(v, phi, 1e-10);
    }

    #[test]
    fn continuation_null_loop_is_identity() {
        let p = Parameters::from_reals(0.37, -0.21, 0.13, 0.8, 1.5).unwrap();
        let x = EvaluationPoint::from_reals(5.0, 1.0, 10.0, 1.0);
        // small circle around x11 = 5 not enclosing any branch point
        let mut verts = Vec::new();
        for k in 0..=16 {
            let ang = 2.0 * std::f64::consts::PI * k as f64 / 16.0;
            verts.push(EvaluationPoint::new(
                c(5.0, 0.0) + 0.5 * c(ang.cos(), ang.sin()) - c(0.5, 0.0),
                x.x21,
                x.x12,
                x.x22,
            ));
        }
        let v = continue_along_path(&p, &PathSpec::open(verts), 1e-11).unwrap();
        let phi = phi_integral(&p, &x, 1e-12).unwrap();
        assert_close(v, phi, 1e-8);
    }

    #[test]
    fn continuation_path_composition() {
        let p = Parameters::from_reals(0.37, -0.21, 0.13, 0.8, 1.5).unwrap();
        let x0 = EvaluationPoint::from_reals(5.0, 1.0, 10.0, 1.0);
        let x1 = EvaluationPoint::new(c(4.0, 1.0), c(1.0, 0.0), c(10.0, 0.0), c(1.0, 0.0));
        let x2 = EvaluationPoint::new(c(3.0, -0.5), c(1.0, -0.2), c(10.0, 0.0), c(1.0, 0.0));
        // walk the full polyline in one call
        let v_all =
            continue_along_path(&p, &PathSpec::open(vec![x0, x1, x2]), 1e-11).unwrap();
        // walk it as two continuations sharing the intermediate state
        let mut cont = Continuation::new(&p, &x0).unwrap();
        cont.walk_to(&x1).unwrap();
        cont.walk_to(&x2).unwrap();
        let v_steps = cont.value(1e-11).unwrap();
        assert_close(v_all, v_steps, 1e-8);
    }

    #[test]
    fn continuation_rejects_a_zero() {
        let p = Parameters::from_reals(0.37, -0.21, 0.13, 0.0, 1.5).unwrap();
        let x = EvaluationPoint::from_reals(5.0, 1.0, 10.0, 1.0);
        assert!(Continuation::new(&p, &x).is_err());
    }
}
