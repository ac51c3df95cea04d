//! Two-interval degree-7 polynomial trajectories between roadmap nodes.
//!
//! A segment connects the vehicle's current state to a middle node `n1`
//! and on to `n2`. Each axis gets two polynomials of degree 7 (16
//! coefficients) pinned by 11 linear constraints: full state at `t0`,
//! rest at `t2`, prescribed position and velocity at `t1`, and
//! acceleration continuity across `t1`. The remaining five degrees of
//! freedom per axis minimize the graph arc length `∫√(1+ẋ²)dt` over both
//! intervals, which suppresses the wild excursions a pure interpolation
//! would produce; the integral is evaluated with fixed 20-point
//! Gauss–Legendre quadrature and minimized by damped Newton steps on the
//! null-space coordinates.

use nalgebra::{DMatrix, DVector, Vector3};
use std::sync::OnceLock;

use crate::error::{Error, Result};

const GL_POINTS: usize = 20;
/// Below this separation two nodes count as coincident.
const COINCIDENT_EPS: f64 = 1e-9;
/// Gradient norm at which the arc-length Newton iteration stops.
const GRAD_TOL: f64 = 1e-8;
const MAX_NEWTON_ITERS: usize = 100;

/// Value and derivative of the Legendre polynomial `P_n` at `x`.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss–Legendre nodes and weights transplanted to [0, 1].
pub(crate) fn quadrature() -> &'static ([f64; GL_POINTS], [f64; GL_POINTS]) {
    static CACHE: OnceLock<([f64; GL_POINTS], [f64; GL_POINTS])> = OnceLock::new();
    CACHE.get_or_init(|| {
        let mut nodes = [0.0; GL_POINTS];
        let mut weights = [0.0; GL_POINTS];
        for (i, (node, weight)) in nodes.iter_mut().zip(weights.iter_mut()).enumerate() {
            let mut x: f64 = (std::f64::consts::PI * (i as f64 + 0.75)
                / (GL_POINTS as f64 + 0.5))
                .cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(GL_POINTS, x);
                dp = d;
                let step = p / d;
                x -= step;
                if step.abs() < 1e-15 {
                    break;
                }
            }
            *node = 0.5 * (x + 1.0);
            *weight = 1.0 / ((1.0 - x * x) * dp * dp);
        }
        (nodes, weights)
    })
}

/// Piecewise-polynomial trajectory through a node pair.
///
/// Coefficients are stored in physical time: the first piece is a
/// polynomial in `(t − t0)` valid on `[t0, t1]`, the second in `(t − t1)`
/// valid on `(t1, t2]`. When the segment ends at its middle node
/// (`n2 == n1`, the stop-stop case) the second piece is a constant and
/// `t2 == t1`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectorySegment {
    pub t0: f64,
    pub t1: f64,
    pub t2: f64,
    /// Per-axis coefficients of the first piece, powers of `(t − t0)`.
    pub coeffs_01: [[f64; 8]; 3],
    /// Per-axis coefficients of the second piece, powers of `(t − t1)`.
    pub coeffs_12: [[f64; 8]; 3],
    /// Prescribed (pre-filtered) velocity at the middle node.
    pub node_velocity: Vector3<f64>,
    /// True when any axis' arc-length optimization failed to converge and
    /// that axis kept the minimum-norm solution instead.
    pub fallback: bool,
}

/// Options for [`build_spline_opts`]; the defaults are what
/// [`build_spline`] uses.
#[derive(Clone, Copy, Debug)]
pub struct SplineOptions {
    /// Zero middle-node velocity components whose direction flips between
    /// the incoming and outgoing legs.
    pub prefilter: bool,
    /// Minimize arc length over the constraint null space; disabled, the
    /// minimum-coefficient-norm solution is kept.
    pub optimize: bool,
}

impl Default for SplineOptions {
    fn default() -> Self {
        Self {
            prefilter: true,
            optimize: true,
        }
    }
}

/// Node passage times at constant cruise speed: each hop takes
/// `distance / v_c`.
pub fn arrival_times(nodes: &[Vector3<f64>], v_c: f64, t0: f64) -> Result<Vec<f64>> {
    if !(v_c.is_finite() && v_c > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "cruise speed must be positive, got {v_c}"
        )));
    }
    let mut times = Vec::with_capacity(nodes.len());
    if nodes.is_empty() {
        return Ok(times);
    }
    times.push(t0);
    for i in 1..nodes.len() {
        let d = (nodes[i] - nodes[i - 1]).norm();
        if d < COINCIDENT_EPS {
            return Err(Error::DuplicateNode(i));
        }
        times.push(times[i - 1] + d / v_c);
    }
    Ok(times)
}

fn unit_or_zero(v: &Vector3<f64>) -> Vector3<f64> {
    let n = v.norm();
    if n < COINCIDENT_EPS {
        Vector3::zeros()
    } else {
        v / n
    }
}

/// Per-node desired velocities along a polyline: cruise speed in the
/// incoming direction at interior nodes, with a pre-filter that zeroes
/// any component whose sign strictly flips between the incoming and
/// outgoing legs (a zero component on either side is not a flip). The
/// first node carries the vehicle's current velocity and the last is at
/// rest.
pub fn node_velocities(
    nodes: &[Vector3<f64>],
    v_c: f64,
    v_start: &Vector3<f64>,
) -> Vec<Vector3<f64>> {
    let n = nodes.len();
    let mut out = vec![Vector3::zeros(); n];
    if n == 0 {
        return out;
    }
    out[0] = *v_start;
    for i in 1..n.saturating_sub(1) {
        let incoming = unit_or_zero(&(nodes[i] - nodes[i - 1]));
        let outgoing = unit_or_zero(&(nodes[i + 1] - nodes[i]));
        let mut v = v_c * incoming;
        for k in 0..3 {
            if incoming[k] * outgoing[k] < 0.0 {
                v[k] = 0.0;
            }
        }
        out[i] = v;
    }
    out
}

/// Constraint matrix for the full two-interval problem, on coefficients
/// of the normalized variable σ = (t−tₖ)/τₖ ∈ [0,1]. Row scaling keeps
/// entries O(1)–O(10²) regardless of τ.
fn two_interval_constraints(tau1: f64, tau2: f64) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(11, 16);
    // First piece boundary values at σ=0.
    a[(0, 0)] = 1.0;
    a[(1, 1)] = 1.0;
    a[(2, 2)] = 2.0;
    for i in 0..8 {
        let fi = i as f64;
        a[(3, i)] = 1.0; // position at σ=1
        a[(4, i)] = fi; // velocity at σ=1
        a[(7, 8 + i)] = 1.0; // second piece position at σ=1
        a[(8, 8 + i)] = fi; // second piece velocity at σ=1
        a[(9, 8 + i)] = fi * (fi - 1.0); // second piece acceleration at σ=1
        // Acceleration continuity: x₀₁''(1)/τ1² = x₁₂''(0)/τ2², cleared of
        // denominators.
        a[(10, i)] = fi * (fi - 1.0) * tau2 * tau2;
    }
    a[(5, 8)] = 1.0; // second piece position at σ=0
    a[(6, 9)] = 1.0; // second piece velocity at σ=0
    a[(10, 10)] = -2.0 * tau1 * tau1;
    a
}

/// Constraint matrix for a single interval ending at rest (stop-stop).
fn single_interval_constraints() -> DMatrix<f64> {
    let mut a = DMatrix::zeros(6, 8);
    a[(0, 0)] = 1.0;
    a[(1, 1)] = 1.0;
    a[(2, 2)] = 2.0;
    for i in 0..8 {
        let fi = i as f64;
        a[(3, i)] = 1.0;
        a[(4, i)] = fi;
        a[(5, i)] = fi * (fi - 1.0);
    }
    a
}

/// Orthonormal basis of the null space of `a`, by modified Gram–Schmidt
/// with one re-orthogonalization pass: orthonormalize the rows, then
/// extend with standard basis vectors; the extensions span the null space.
fn null_basis(a: &DMatrix<f64>) -> Vec<DVector<f64>> {
    let n = a.ncols();
    let mut row_space: Vec<DVector<f64>> = Vec::new();
    for i in 0..a.nrows() {
        let mut v: DVector<f64> = a.row(i).transpose();
        let scale = v.norm().max(1.0);
        for _ in 0..2 {
            for q in &row_space {
                let d = q.dot(&v);
                v -= q * d;
            }
        }
        if v.norm() > 1e-10 * scale {
            let n = v.norm();
            row_space.push(v / n);
        }
    }
    let rank = row_space.len();
    let mut null: Vec<DVector<f64>> = Vec::new();
    for i in 0..n {
        if rank + null.len() == n {
            break;
        }
        let mut v = DVector::zeros(n);
        v[i] = 1.0;
        for _ in 0..2 {
            for q in row_space.iter().chain(null.iter()) {
                let d = q.dot(&v);
                v -= q * d;
            }
        }
        if v.norm() > 1e-8 {
            let nn = v.norm();
            null.push(v / nn);
        }
    }
    null
}

/// One quadrature station of the arc-length objective: weight, interval
/// duration, base derivative value, and the derivative's sensitivity to
/// the null-space coordinates.
struct Station {
    weight: f64,
    tau2: f64,
    d0: f64,
    b: DVector<f64>,
}

/// Minimize `Σ_k ∫₀¹ √(τ_k² + x'(σ)²) dσ` over `c = c_p + N·z` by damped
/// Newton on `z`. The integrand is strictly convex in the derivative
/// value and the derivative is affine in `z`, so the objective is convex;
/// Newton with Armijo backtracking converges or we fall back.
/// Returns the coefficient vector and whether the fallback was taken.
fn minimize_axis(
    c_p: &DVector<f64>,
    null: &[DVector<f64>],
    taus: &[f64],
    optimize: bool,
) -> (DVector<f64>, bool) {
    let m = null.len();
    if m == 0 || !optimize {
        return (c_p.clone(), false);
    }
    let (nodes, weights) = quadrature();

    let mut stations = Vec::with_capacity(taus.len() * GL_POINTS);
    for (k, &tau) in taus.iter().enumerate() {
        for j in 0..GL_POINTS {
            let s = nodes[j];
            let mut row = DVector::zeros(c_p.len());
            for i in 1..8 {
                row[k * 8 + i] = i as f64 * s.powi(i as i32 - 1);
            }
            let b = DVector::from_iterator(m, null.iter().map(|nv| row.dot(nv)));
            stations.push(Station {
                weight: weights[j],
                tau2: tau * tau,
                d0: row.dot(c_p),
                b,
            });
        }
    }

    let cost = |z: &DVector<f64>| -> f64 {
        stations
            .iter()
            .map(|st| {
                let d = st.d0 + st.b.dot(z);
                st.weight * (st.tau2 + d * d).sqrt()
            })
            .sum()
    };

    let assemble = |z: &DVector<f64>| -> (DVector<f64>, DMatrix<f64>) {
        let mut g = DVector::zeros(m);
        let mut h = DMatrix::zeros(m, m);
        for st in &stations {
            let d = st.d0 + st.b.dot(z);
            let root = (st.tau2 + d * d).sqrt();
            g.axpy(st.weight * d / root, &st.b, 1.0);
            let curv = st.weight * st.tau2 / (root * root * root);
            h.syger(curv, &st.b, &st.b, 1.0);
        }
        (g, h)
    };

    let mut z = DVector::zeros(m);
    let mut jz = cost(&z);
    let mut converged = false;
    for _ in 0..MAX_NEWTON_ITERS {
        let (g, h) = assemble(&z);
        if g.norm() < GRAD_TOL {
            converged = true;
            break;
        }
        // Solve H·step = −g, nudging the diagonal if Cholesky balks.
        let mut lambda = 0.0;
        let step = loop {
            let mut h_reg = h.clone();
            for i in 0..m {
                h_reg[(i, i)] += lambda;
            }
            if let Some(ch) = h_reg.cholesky() {
                break ch.solve(&(-&g));
            }
            lambda = if lambda == 0.0 { 1e-10 } else { lambda * 100.0 };
            if lambda > 1e6 {
                break -g.clone();
            }
        };
        let slope = g.dot(&step);
        let mut t = 1.0;
        let mut advanced = false;
        for _ in 0..40 {
            let cand = &z + &step * t;
            let jc = cost(&cand);
            if jc <= jz + 1e-4 * t * slope {
                z = cand;
                jz = jc;
                advanced = true;
                break;
            }
            t *= 0.5;
        }
        if !advanced {
            break;
        }
    }
    if !converged {
        // Re-check: the loop may have exited right at tolerance.
        let (g, _) = assemble(&z);
        converged = g.norm() < GRAD_TOL;
    }
    if converged {
        let mut c = c_p.clone();
        for (i, nv) in null.iter().enumerate() {
            c.axpy(z[i], nv, 1.0);
        }
        (c, false)
    } else {
        (c_p.clone(), true)
    }
}

/// Build a trajectory from the current state through `n1` to `n2`,
/// starting at time `t0`, with node times set by cruise speed `v_c`.
///
/// `n2 == n1` requests a stop at `n1`: the segment becomes a single
/// interval ending at rest there. If additionally `n1` coincides with the
/// current position and the vehicle is at rest, the result is a
/// zero-duration hold. A coincident `n1` with motion still demanded is
/// rejected.
pub fn build_spline(
    position: &Vector3<f64>,
    velocity: &Vector3<f64>,
    acceleration: &Vector3<f64>,
    n1: &Vector3<f64>,
    n2: &Vector3<f64>,
    v_c: f64,
    t0: f64,
) -> Result<TrajectorySegment> {
    build_spline_opts(
        position,
        velocity,
        acceleration,
        n1,
        n2,
        v_c,
        t0,
        &SplineOptions::default(),
    )
}

/// [`build_spline`] with explicit options.
#[allow(clippy::too_many_arguments)]
pub fn build_spline_opts(
    position: &Vector3<f64>,
    velocity: &Vector3<f64>,
    acceleration: &Vector3<f64>,
    n1: &Vector3<f64>,
    n2: &Vector3<f64>,
    v_c: f64,
    t0: f64,
    opts: &SplineOptions,
) -> Result<TrajectorySegment> {
    if !(v_c.is_finite() && v_c > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "cruise speed must be positive, got {v_c}"
        )));
    }
    let d1 = n1 - position;
    let d2 = n2 - n1;
    let single = d2.norm() < COINCIDENT_EPS;

    // Acceleration and jerk budgets used to stretch a leg's schedule when
    // its entry state is not at rest. A leg entered at rest keeps the pure
    // cruise-speed schedule; a short leg entered hot (a sharp reversal
    // after a replan, a stop close ahead) would otherwise demand interior
    // accelerations far beyond what either medium can deliver.
    const A_NOM: f64 = 1.0;
    const J_NOM: f64 = 10.0;

    if d1.norm() < COINCIDENT_EPS {
        if single && velocity.norm() < 1e-9 && acceleration.norm() < 1e-9 {
            // Already there, already stopped: hold.
            let mut c = [[0.0; 8]; 3];
            for (axis, row) in c.iter_mut().enumerate() {
                row[0] = position[axis];
            }
            return Ok(TrajectorySegment {
                t0,
                t1: t0,
                t2: t0,
                coeffs_01: c,
                coeffs_12: c,
                node_velocity: Vector3::zeros(),
                fallback: false,
            });
        }
        return Err(Error::DuplicateNode(1));
    }

    let v1 = if single {
        Vector3::zeros()
    } else {
        let mut v1 = v_c * unit_or_zero(&d1);
        if opts.prefilter {
            let incoming = unit_or_zero(&d1);
            let outgoing = unit_or_zero(&d2);
            for k in 0..3 {
                if incoming[k] * outgoing[k] < 0.0 {
                    v1[k] = 0.0;
                }
            }
        }
        v1
    };
    // The cruise-speed schedule, lengthened if the velocity change across
    // the leg or the entry acceleration needs more room than the distance
    // alone would grant. Both extra terms vanish for a leg entered at rest
    // toward a stop, so rest-to-rest legs keep exactly d/v_c.
    let tau1 = (d1.norm() / v_c)
        .max((v1 - velocity).norm() / A_NOM)
        .max(acceleration.norm() / J_NOM);
    let tau2 = if single { 0.0 } else { d2.norm() / v_c };

    let a = if single {
        single_interval_constraints()
    } else {
        two_interval_constraints(tau1, tau2)
    };
    let null = null_basis(&a);
    let svd = a.clone().svd(true, true);
    let pinv = svd.pseudo_inverse(1e-10).map_err(|e| {
        Error::NumericFailure(format!("constraint pseudo-inverse failed: {e}"))
    })?;

    let taus: &[f64] = if single { &[tau1] } else { &[tau1, tau2] };
    let mut coeffs_01 = [[0.0; 8]; 3];
    let mut coeffs_12 = [[0.0; 8]; 3];
    let mut fallback = false;
    for axis in 0..3 {
        let rhs = if single {
            DVector::from_column_slice(&[
                position[axis],
                velocity[axis] * tau1,
                acceleration[axis] * tau1 * tau1,
                n1[axis],
                0.0,
                0.0,
            ])
        } else {
            DVector::from_column_slice(&[
                position[axis],
                velocity[axis] * tau1,
                acceleration[axis] * tau1 * tau1,
                n1[axis],
                v1[axis] * tau1,
                n1[axis],
                v1[axis] * tau2,
                n2[axis],
                0.0,
                0.0,
                0.0,
            ])
        };
        let c_p = &pinv * rhs;
        let (c, fell_back) = minimize_axis(&c_p, &null, taus, opts.optimize);
        fallback |= fell_back;

        let mut t1p = 1.0;
        for i in 0..8 {
            coeffs_01[axis][i] = c[i] / t1p;
            t1p *= tau1;
        }
        if single {
            coeffs_12[axis] = [0.0; 8];
            coeffs_12[axis][0] = n1[axis];
        } else {
            let mut t2p = 1.0;
            for i in 0..8 {
                coeffs_12[axis][i] = c[8 + i] / t2p;
                t2p *= tau2;
            }
        }
    }

    Ok(TrajectorySegment {
        t0,
        t1: t0 + tau1,
        t2: t0 + tau1 + tau2,
        coeffs_01,
        coeffs_12,
        node_velocity: v1,
        fallback,
    })
}

fn horner(coeffs: &[f64; 8], u: f64) -> (f64, f64, f64) {
    let mut p = coeffs[7];
    let mut v = 0.0;
    let mut a = 0.0;
    for c in coeffs[..7].iter().rev() {
        a = a * u + v;
        v = v * u + p;
        p = p * u + c;
    }
    (p, v, 2.0 * a)
}

/// Desired position, velocity, and acceleration at time `t ∈ [t0, t2]`.
pub fn eval_spline(
    seg: &TrajectorySegment,
    t: f64,
) -> Result<(Vector3<f64>, Vector3<f64>, Vector3<f64>)> {
    const SLOP: f64 = 1e-9;
    if !(t >= seg.t0 - SLOP && t <= seg.t2 + SLOP) {
        return Err(Error::TimeOutOfRange {
            t,
            t0: seg.t0,
            t2: seg.t2,
        });
    }
    let (coeffs, u) = if t <= seg.t1 {
        (&seg.coeffs_01, (t - seg.t0).max(0.0))
    } else {
        (&seg.coeffs_12, (t - seg.t1).min(seg.t2 - seg.t1))
    };
    let mut pos = Vector3::zeros();
    let mut vel = Vector3::zeros();
    let mut acc = Vector3::zeros();
    for axis in 0..3 {
        let (p, v, a) = horner(&coeffs[axis], u);
        pos[axis] = p;
        vel[axis] = v;
        acc[axis] = a;
    }
    Ok((pos, vel, acc))
}

/// Per-axis graph arc length `∫√(1+ẋ²)dt` over the whole segment,
/// evaluated with the same quadrature the optimizer uses.
pub fn arc_cost(seg: &TrajectorySegment) -> [f64; 3] {
    let (nodes, weights) = quadrature();
    let mut out = [0.0; 3];
    for (start, end, coeffs) in [
        (seg.t0, seg.t1, &seg.coeffs_01),
        (seg.t1, seg.t2, &seg.coeffs_12),
    ] {
        let tau = end - start;
        if tau < COINCIDENT_EPS {
            continue;
        }
        for j in 0..GL_POINTS {
            let u = nodes[j] * tau;
            for axis in 0..3 {
                let (_, v, _) = horner(&coeffs[axis], u);
                out[axis] += weights[j] * tau * (1.0 + v * v).sqrt();
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    // ∫₀¹ √(1+(3s²)²) ds and ∫₀¹ √(1+(2−2s)²) ds, computed with adaptive
    // quadrature in an independent numeric environment and pinned.
    const CUBIC_ARC: f64 = 1.5478656546836098;
    const PARABOLA_ARC: f64 = 1.4789428575445973;

    #[test]
    fn quadrature_matches_pinned_arc_integrals() {
        let (nodes, weights) = quadrature();
        let total: f64 = nodes
            .iter()
            .zip(weights)
            .map(|(s, w)| {
                let d = 3.0 * s * s;
                w * (1.0 + d * d).sqrt()
            })
            .sum();
        assert_relative_eq!(total, CUBIC_ARC, epsilon = 1e-9);

        let total: f64 = nodes
            .iter()
            .zip(weights)
            .map(|(s, w)| {
                let d = 2.0 - 2.0 * s;
                w * (1.0 + d * d).sqrt()
            })
            .sum();
        assert_relative_eq!(total, PARABOLA_ARC, epsilon = 1e-9);

        // Exactness on polynomials and the unit weight.
        let one: f64 = weights.iter().sum();
        assert_relative_eq!(one, 1.0, epsilon = 1e-13);
    }

    #[test]
    fn arrival_times_basics() {
        let nodes = [
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(3.0, 0.0, 0.0),
        ];
        let t = arrival_times(&nodes, 1.5, 0.0).unwrap();
        assert_eq!(t, vec![0.0, 2.0]);

        let nodes = [
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(2.0, 0.0, 0.0),
            Vector3::new(4.0, 0.0, 0.0),
            Vector3::new(6.0, 0.0, 0.0),
        ];
        let t = arrival_times(&nodes, 1.0, 1.0).unwrap();
        assert_eq!(t, vec![1.0, 3.0, 5.0, 7.0]);
        let fast = arrival_times(&nodes, 2.0, 1.0).unwrap();
        for (a, b) in t.iter().zip(&fast) {
            assert_relative_eq!(b - 1.0, (a - 1.0) / 2.0, epsilon = 1e-12);
        }

        let dup = [Vector3::zeros(), Vector3::zeros()];
        assert!(matches!(
            arrival_times(&dup, 1.0, 0.0),
            Err(Error::DuplicateNode(1))
        ));
        assert!(arrival_times(&nodes, 0.0, 0.0).is_err());
    }

    #[test]
    fn prefilter_zeroes_reversing_component() {
        // 1-D out-and-back: the middle node would carry full +x speed into
        // a −x leg; the filter zeroes it.
        let nodes = [
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(0.0, 0.0, 0.0),
        ];
        let v = node_velocities(&nodes, 1.0, &Vector3::zeros());
        assert_eq!(v[1], Vector3::zeros());
        assert_eq!(v[2], Vector3::zeros());

        // Straight line: nothing zeroed.
        let nodes = [
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(1.0, 1.0, 0.0),
            Vector3::new(2.0, 2.0, 0.0),
        ];
        let v = node_velocities(&nodes, 2.0, &Vector3::zeros());
        let expect = 2.0 * Vector3::new(1.0, 1.0, 0.0).normalize();
        assert_relative_eq!(v[1], expect, epsilon = 1e-12);

        // L-shape x then y: outgoing x-component is zero, which is not a
        // sign change, so the x speed survives.
        let nodes = [
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(1.0, 1.0, 0.0),
        ];
        let v = node_velocities(&nodes, 1.0, &Vector3::zeros());
        assert_relative_eq!(v[1], Vector3::new(1.0, 0.0, 0.0), epsilon = 1e-12);
    }

    fn random_vec(rng: &mut impl Rng, scale: f64) -> Vector3<f64> {
        Vector3::new(
            rng.random_range(-scale..scale),
            rng.random_range(-scale..scale),
            rng.random_range(-scale..scale),
        )
    }

    #[test]
    fn constraint_residuals_for_random_triples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for trial in 0..1000 {
            let p0 = random_vec(&mut rng, 5.0);
            let v0 = random_vec(&mut rng, 1.0);
            let a0 = random_vec(&mut rng, 0.5);
            let mut n1 = p0 + random_vec(&mut rng, 8.0);
            while (n1 - p0).norm() < 0.3 {
                n1 = p0 + random_vec(&mut rng, 8.0);
            }
            let n2 = if trial % 5 == 0 {
                n1 // stop-stop form
            } else {
                let mut n2 = n1 + random_vec(&mut rng, 8.0);
                while (n2 - n1).norm() < 0.3 {
                    n2 = n1 + random_vec(&mut rng, 8.0);
                }
                n2
            };
            let seg = build_spline(&p0, &v0, &a0, &n1, &n2, 1.0, 0.0).unwrap();

            let (p, v, a) = eval_spline(&seg, seg.t0).unwrap();
            assert_relative_eq!(p, p0, epsilon = 1e-6);
            assert_relative_eq!(v, v0, epsilon = 1e-6);
            assert_relative_eq!(a, a0, epsilon = 1e-6);

            let (p, v, _) = eval_spline(&seg, seg.t1).unwrap();
            assert_relative_eq!(p, n1, epsilon = 1e-6);
            assert_relative_eq!(v, seg.node_velocity, epsilon = 1e-6);

            let (p, v, a) = eval_spline(&seg, seg.t2).unwrap();
            assert_relative_eq!(p, n2, epsilon = 1e-6);
            assert_relative_eq!(v, Vector3::zeros(), epsilon = 1e-6);
            assert_relative_eq!(a, Vector3::zeros(), epsilon = 1e-6);
            assert!(!seg.fallback, "fallback on trial {trial}");
        }
    }

    #[test]
    fn pieces_join_smoothly_at_the_middle_node() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let p0 = random_vec(&mut rng, 3.0);
            let n1 = p0 + random_vec(&mut rng, 6.0) + Vector3::new(1.0, 0.0, 0.0);
            let n2 = n1 + random_vec(&mut rng, 6.0) + Vector3::new(0.0, 1.0, 0.0);
            let seg = build_spline(
                &p0,
                &random_vec(&mut rng, 0.5),
                &random_vec(&mut rng, 0.2),
                &n1,
                &n2,
                1.0,
                0.0,
            )
            .unwrap();
            // Exact one-sided limits straight from the stored pieces.
            let tau1 = seg.t1 - seg.t0;
            for axis in 0..3 {
                let (pl, vl, al) = horner(&seg.coeffs_01[axis], tau1);
                let (pr, vr, ar) = horner(&seg.coeffs_12[axis], 0.0);
                assert_relative_eq!(pl, pr, epsilon = 1e-9, max_relative = 1e-9);
                assert_relative_eq!(vl, vr, epsilon = 1e-9, max_relative = 1e-9);
                assert_relative_eq!(al, ar, epsilon = 1e-7, max_relative = 1e-7);
            }
        }
    }

    #[test]
    fn optimizer_not_worse_than_minimum_norm_and_strictly_better_generically() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut strictly_better = 0;
        for _ in 0..50 {
            let p0 = random_vec(&mut rng, 3.0);
            let n1 = p0 + random_vec(&mut rng, 6.0) + Vector3::new(2.0, 0.0, 0.0);
            let n2 = n1 + random_vec(&mut rng, 6.0) + Vector3::new(0.0, 2.0, 0.0);
            let v0 = random_vec(&mut rng, 0.5);
            let a0 = random_vec(&mut rng, 0.2);
            let opt = build_spline(&p0, &v0, &a0, &n1, &n2, 1.0, 0.0).unwrap();
            let raw = build_spline_opts(
                &p0,
                &v0,
                &a0,
                &n1,
                &n2,
                1.0,
                0.0,
                &SplineOptions {
                    prefilter: true,
                    optimize: false,
                },
            )
            .unwrap();
            let j_opt: f64 = arc_cost(&opt).iter().sum();
            let j_raw: f64 = arc_cost(&raw).iter().sum();
            assert!(j_opt <= j_raw + 1e-9, "{j_opt} > {j_raw}");
            if j_opt < j_raw - 1e-6 {
                strictly_better += 1;
            }
        }
        assert!(
            strictly_better > 25,
            "optimizer only strictly improved {strictly_better}/50 cases"
        );
    }

    #[test]
    fn stationary_triple_holds() {
        let p = Vector3::new(1.0, -2.0, 3.0);
        let z = Vector3::zeros();
        let seg = build_spline(&p, &z, &z, &p, &p, 1.0, 4.0).unwrap();
        assert_eq!(seg.t0, 4.0);
        assert_eq!(seg.t2, 4.0);
        let (pos, vel, acc) = eval_spline(&seg, 4.0).unwrap();
        assert_eq!(pos, p);
        assert_eq!(vel, z);
        assert_eq!(acc, z);
        assert_eq!(arc_cost(&seg), [0.0; 3]);

        // Coincident nodes with motion still demanded are rejected.
        let v = Vector3::new(0.5, 0.0, 0.0);
        assert!(build_spline(&p, &v, &z, &p, &p, 1.0, 0.0).is_err());
    }

    #[test]
    fn stop_stop_single_interval_ends_at_rest() {
        let p0 = Vector3::zeros();
        let z = Vector3::zeros();
        let n = Vector3::new(3.0, -2.0, 1.0);
        let seg = build_spline(&p0, &z, &z, &n, &n, 1.0, 0.0).unwrap();
        assert_eq!(seg.t1, seg.t2);
        assert_relative_eq!(seg.t1, n.norm(), epsilon = 1e-12);
        let (p, v, a) = eval_spline(&seg, seg.t2).unwrap();
        assert_relative_eq!(p, n, epsilon = 1e-9);
        assert_relative_eq!(v.norm(), 0.0, epsilon = 1e-9);
        assert_relative_eq!(a.norm(), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn eval_outside_range_is_an_error() {
        let z = Vector3::zeros();
        let seg = build_spline(
            &z,
            &z,
            &z,
            &Vector3::new(1.0, 0.0, 0.0),
            &Vector3::new(2.0, 0.0, 0.0),
            1.0,
            0.0,
        )
        .unwrap();
        assert!(eval_spline(&seg, -0.5).is_err());
        assert!(eval_spline(&seg, seg.t2 + 0.5).is_err());
        assert!(eval_spline(&seg, seg.t2).is_ok());
    }
}
