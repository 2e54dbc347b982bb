//! Roots of ψ(β) = q for the rational Laplace exponent of a
//! hyper-exponential jump diffusion.
//!
//! Clearing denominators turns ψ(β) = q into a polynomial equation, but the
//! solver does not work with the polynomial: every root is bracketed
//! analytically and refined by bisection on ψ itself, which is deterministic
//! and immune to coefficient conditioning. The bracket structure follows from
//! the shape of ψ:
//!
//! * between two consecutive poles on the same side of zero, ψ runs from one
//!   infinity to the other, so there is exactly one root;
//! * on the innermost interval (between the largest downward pole and the
//!   smallest upward pole) ψ is strictly convex, so there are zero, one
//!   (tangent), or two roots, located from the interior minimum;
//! * beyond the extreme poles the asymptotics of ψ decide whether a root
//!   exists; a geometric probe schedule brackets it when it does.
//!
//! The cleared polynomial is still exposed ([`characteristic_polynomial`])
//! because tests cross-check the bisection roots against an independent
//! polynomial solver and against Vieta's formulas.

use crate::error::{Error, Result};
use crate::model::LevyModel;

/// Relative width at which bisection stops.
const REL_TOL: f64 = 1e-13;

/// Minimum relative separation between distinct roots; closer pairs are
/// reported as degenerate.
const SEP_TOL: f64 = 1e-8;

/// Perturbation applied to `q` in the single automatic degeneracy retry.
const RETRY_BUMP: f64 = 1e-9;

/// All real roots of ψ(β) = q with the classification the Wiener–Hopf
/// machinery needs.
///
/// Immutable. `q` records the level actually solved, which can differ from
/// the requested level by the 1e−9 degeneracy perturbation (see
/// [`solve_roots`]).
#[derive(Debug, Clone)]
pub struct RootSet {
    q: f64,
    all_roots: Vec<f64>,
    phi: f64,
    i_alpha: Vec<f64>,
    j_set: Vec<f64>,
    degree: usize,
}

impl RootSet {
    /// The level solved.
    pub fn q(&self) -> f64 {
        self.q
    }

    /// All real roots, ascending.
    pub fn all_roots(&self) -> &[f64] {
        &self.all_roots
    }

    /// Φ(q): the largest root inside (0, β₀).
    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// The roots with real part ≥ Φ(q), ascending; the first entry is Φ(q).
    /// These drive the ascending Wiener–Hopf factor.
    pub fn i_alpha(&self) -> &[f64] {
        &self.i_alpha
    }

    /// The positive poles of ψ (the upward mixture rates), ascending.
    pub fn j_set(&self) -> &[f64] {
        &self.j_set
    }

    /// Degree of the cleared polynomial (= total root count over ℂ).
    pub fn degree(&self) -> usize {
        self.degree
    }
}

// ---------------------------------------------------------------------------
// characteristic polynomial
// ---------------------------------------------------------------------------

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}

fn poly_add_into(acc: &mut Vec<f64>, other: &[f64]) {
    if acc.len() < other.len() {
        acc.resize(other.len(), 0.0);
    }
    for (a, &o) in acc.iter_mut().zip(other) {
        *a += o;
    }
}

/// Coefficients (ascending) of the polynomial obtained by multiplying
/// ψ(β) − q with ∏ᵢ(μᵢ + β) · ∏ⱼ(ϑⱼ − β): its real simple roots off the
/// poles are exactly the solutions of ψ(β) = q.
pub fn characteristic_polynomial(model: &LevyModel, q: f64) -> Vec<f64> {
    let down = model.down_mix();
    let up = model.up_mix();

    // Entire part of ψ − q (the jump terms contribute their −λ constants).
    let mut entire = vec![
        -q - model.down_rate() - model.up_rate(),
        model.drift(),
        0.5 * model.sigma() * model.sigma(),
    ];
    while entire.len() > 1 && *entire.last().unwrap() == 0.0 {
        entire.pop();
    }

    let down_prod: Vec<Vec<f64>> = down.iter().map(|p| vec![p.rate, 1.0]).collect();
    let up_prod: Vec<Vec<f64>> = up.iter().map(|p| vec![p.rate, -1.0]).collect();
    let prod_of = |factors: &[Vec<f64>], skip: Option<usize>| -> Vec<f64> {
        let mut acc = vec![1.0];
        for (i, f) in factors.iter().enumerate() {
            if Some(i) != skip {
                acc = poly_mul(&acc, f);
            }
        }
        acc
    };

    let d_full = prod_of(&down_prod, None);
    let u_full = prod_of(&up_prod, None);

    let mut p = poly_mul(&poly_mul(&entire, &d_full), &u_full);
    for (i, ph) in down.iter().enumerate() {
        let partial = poly_mul(&prod_of(&down_prod, Some(i)), &u_full);
        let scaled: Vec<f64> = partial
            .iter()
            .map(|c| c * model.down_rate() * ph.weight * ph.rate)
            .collect();
        poly_add_into(&mut p, &scaled);
    }
    for (j, ph) in up.iter().enumerate() {
        let partial = poly_mul(&d_full, &prod_of(&up_prod, Some(j)));
        let scaled: Vec<f64> = partial
            .iter()
            .map(|c| c * model.up_rate() * ph.weight * ph.rate)
            .collect();
        poly_add_into(&mut p, &scaled);
    }
    p
}

// ---------------------------------------------------------------------------
// bracketing and bisection
// ---------------------------------------------------------------------------

fn bisect(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> Result<f64> {
    let (f_lo, f_hi) = (f(lo), f(hi));
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::BracketFailure {
            what: "psi(beta) = q",
            lo,
            hi,
            f_lo,
            f_hi,
        });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (hi - lo).abs() <= REL_TOL * lo.abs().max(hi.abs()).max(1.0) {
            return Ok(mid);
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Probe points filling (a, b) with geometric clustering toward both ends
/// (which sit on poles), plus the midpoint.
fn pole_to_pole_probes(a: f64, b: f64) -> Vec<f64> {
    let half = 0.5 * (b - a);
    let mut pts = Vec::with_capacity(101);
    for k in (1..=50).rev() {
        pts.push(a + half * 0.5f64.powi(k));
    }
    pts.push(a + half);
    for k in 1..=50 {
        pts.push(b - half * 0.5f64.powi(k));
    }
    pts
}

/// Roots located by scanning `pts` (ascending) for sign changes of `f` and
/// bisecting each bracket.
fn roots_from_scan(f: &dyn Fn(f64) -> f64, pts: &[f64]) -> Result<Vec<f64>> {
    let mut roots = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for &x in pts {
        let fx = f(x);
        if !fx.is_finite() {
            prev = None;
            continue;
        }
        if let Some((px, pfx)) = prev {
            if fx == 0.0 {
                roots.push(x);
                prev = Some((x, fx));
                continue;
            }
            if pfx.signum() != fx.signum() {
                roots.push(bisect(f, px, x)?);
            }
        }
        prev = Some((x, fx));
    }
    Ok(roots)
}

/// Exactly-one-root search between two consecutive same-side poles.
fn roots_between_poles(model: &LevyModel, q: f64, a: f64, b: f64) -> Result<Vec<f64>> {
    let f = |x: f64| model.psi(x) - q;
    roots_from_scan(&f, &pole_to_pole_probes(a, b))
}

/// Probe schedule for an unbounded interval: geometric approach to the pole
/// plus doubling steps outward. `dir` is −1 for (−∞, pole), +1 for (pole, ∞).
fn outer_probes(pole: f64, dir: f64) -> Vec<f64> {
    let scale = pole.abs().max(1.0);
    let mut pts = Vec::with_capacity(100);
    for k in (0..=45).rev() {
        pts.push(pole + dir * scale * 0.5f64.powi(k + 1));
    }
    for k in 0..=45 {
        pts.push(pole + dir * scale * 2f64.powi(k + 1));
    }
    if dir < 0.0 {
        pts.reverse();
    }
    pts
}

/// Roots on the innermost interval (a, b), where ψ is strictly convex.
/// `a`/`b` are the enclosing poles, or `None` for ±∞.
fn middle_interval_roots(
    model: &LevyModel,
    q: f64,
    a: Option<f64>,
    b: Option<f64>,
) -> Result<Vec<f64>> {
    let f = |x: f64| model.psi(x) - q;
    let fp = |x: f64| model.psi_deriv(x);
    let sigma = model.sigma();
    let drift = model.drift();

    // Limits of ψ at the interval ends: +∞ at any pole; at ±∞ decided by the
    // quadratic/drift asymptotics.
    let la_inf = a.is_some() || sigma > 0.0 || drift < 0.0;
    let lb_inf = b.is_some() || sigma > 0.0 || drift > 0.0;

    // A point strictly inside, biased toward the finite side if any.
    let interior = match (a, b) {
        (Some(x), Some(y)) => 0.5 * (x + y),
        (Some(x), None) => x + x.abs().max(1.0),
        (None, Some(y)) => y - y.abs().max(1.0),
        (None, None) => 0.0,
    };

    // Walk toward the left end until the predicate holds.
    let walk_left = |start: f64, pred: &dyn Fn(f64) -> bool| -> Option<f64> {
        let mut x = start;
        for _ in 0..300 {
            if pred(x) {
                return Some(x);
            }
            x = match a {
                Some(pole) => pole + 0.5 * (x - pole),
                None => x - 2.0 * (x.abs().max(1.0)),
            };
        }
        None
    };
    let walk_right = |start: f64, pred: &dyn Fn(f64) -> bool| -> Option<f64> {
        let mut x = start;
        for _ in 0..300 {
            if pred(x) {
                return Some(x);
            }
            x = match b {
                Some(pole) => pole - 0.5 * (pole - x),
                None => x + 2.0 * (x.abs().max(1.0)),
            };
        }
        None
    };

    if la_inf && lb_inf {
        // Convex with +∞ at both ends: locate the interior minimum by
        // bisecting the increasing derivative, then split each branch.
        // ψ → +∞ at both ends forces ψ' to change sign inside, so both
        // walks succeed for every admissible model.
        let pa = walk_left(interior, &|x| fp(x) < 0.0).ok_or(Error::BracketFailure {
            what: "descending slope on the convex interval",
            lo: interior,
            hi: interior,
            f_lo: fp(interior),
            f_hi: fp(interior),
        })?;
        let pb = walk_right(interior, &|x| fp(x) > 0.0).ok_or(Error::BracketFailure {
            what: "ascending slope on the convex interval",
            lo: interior,
            hi: interior,
            f_lo: fp(interior),
            f_hi: fp(interior),
        })?;
        let mut lo = pa;
        let mut hi = pb;
        for _ in 0..200 {
            if (hi - lo).abs() <= REL_TOL * lo.abs().max(hi.abs()).max(1.0) {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if fp(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let x_min = 0.5 * (lo + hi);
        let f_min = f(x_min);
        if f_min > 0.0 {
            // Level lies below the dip: the remaining pair is complex.
            return Ok(vec![]);
        }
        let left_plus = walk_left(x_min, &|x| f(x) > 0.0).ok_or(Error::BracketFailure {
            what: "left branch of the convex interval",
            lo: x_min,
            hi: x_min,
            f_lo: f_min,
            f_hi: f_min,
        })?;
        let right_plus = walk_right(x_min, &|x| f(x) > 0.0).ok_or(Error::BracketFailure {
            what: "right branch of the convex interval",
            lo: x_min,
            hi: x_min,
            f_lo: f_min,
            f_hi: f_min,
        })?;
        let r1 = bisect(&f, left_plus, x_min)?;
        let r2 = bisect(&f, x_min, right_plus)?;
        Ok(vec![r1, r2])
    } else {
        // Exactly one end at −∞: ψ is strictly monotone here, one root.
        let (lo, hi) = if !la_inf {
            // rises from −∞ on the left toward +∞ on the right
            let lo = walk_left(interior, &|x| f(x) < 0.0);
            let hi = walk_right(interior, &|x| f(x) > 0.0);
            (lo, hi)
        } else {
            let lo = walk_left(interior, &|x| f(x) > 0.0);
            let hi = walk_right(interior, &|x| f(x) < 0.0);
            (lo, hi)
        };
        match (lo, hi) {
            (Some(l), Some(h)) => Ok(vec![bisect(&f, l, h)?]),
            _ => Ok(vec![]),
        }
    }
}

fn find_real_roots(model: &LevyModel, q: f64) -> Result<Vec<f64>> {
    let poles = model.poles();
    let f = |x: f64| model.psi(x) - q;
    let mut roots = Vec::new();

    let a_mid = poles.iter().copied().filter(|p| *p < 0.0).fold(None, |acc: Option<f64>, p| {
        Some(acc.map_or(p, |a: f64| a.max(p)))
    });
    let b_mid = poles.iter().copied().find(|p| *p > 0.0);

    roots.extend(middle_interval_roots(model, q, a_mid, b_mid)?);

    for w in poles.windows(2) {
        // Skip the straddling gap (that is the middle interval).
        if w[0] < 0.0 && w[1] > 0.0 {
            continue;
        }
        roots.extend(roots_between_poles(model, q, w[0], w[1])?);
    }

    if let Some(&pmin) = poles.first() {
        if pmin < 0.0 {
            roots.extend(roots_from_scan(&f, &outer_probes(pmin, -1.0))?);
        }
    }
    if let Some(&pmax) = poles.last() {
        if pmax > 0.0 {
            roots.extend(roots_from_scan(&f, &outer_probes(pmax, 1.0))?);
        }
    }

    roots.sort_by(|x, y| x.partial_cmp(y).unwrap());
    Ok(roots)
}

fn assemble(model: &LevyModel, q: f64, roots: Vec<f64>) -> Result<RootSet> {
    let degree = model.poly_degree();
    if roots.len() != degree {
        return Err(Error::DegenerateRoots {
            q,
            detail: format!(
                "found {} real roots, expected {} (a root pair is degenerate or complex)",
                roots.len(),
                degree
            ),
        });
    }
    for w in roots.windows(2) {
        if (w[1] - w[0]).abs() <= SEP_TOL * w[0].abs().max(w[1].abs()).max(1.0) {
            return Err(Error::DegenerateRoots {
                q,
                detail: format!("roots {} and {} are closer than the separation tolerance", w[0], w[1]),
            });
        }
    }
    let beta0 = model.beta0();
    let phi = roots
        .iter()
        .copied()
        .filter(|r| *r > 0.0 && *r < beta0)
        .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a: f64| a.max(r))))
        .ok_or(Error::NoRootInStrip { q, beta0 })?;
    let phi_idx = roots.iter().position(|r| *r == phi).unwrap();
    let i_alpha = roots[phi_idx..].to_vec();
    let j_set: Vec<f64> = {
        let mut j: Vec<f64> = model.up_mix().iter().map(|p| p.rate).collect();
        j.sort_by(|x, y| x.partial_cmp(y).unwrap());
        j
    };
    Ok(RootSet {
        q,
        all_roots: roots,
        phi,
        i_alpha,
        j_set,
        degree,
    })
}

/// Find all roots of ψ(β) = q and classify them.
///
/// If the root set comes out degenerate (two roots within 1e−8, or a pair
/// that has left the real axis because `q` sits on the wrong side of a local
/// extremum of ψ), the level is perturbed once to `q + 1e−9` with a logged
/// warning and the solve is retried, mirroring the fact that degeneracy can
/// occur only at countably many levels.
///
/// # Errors
///
/// [`Error::DegenerateRoots`] when the retry is degenerate as well;
/// [`Error::NoRootInStrip`] when no root lies in (0, β₀), so Φ(q) does not
/// exist (such levels are outside every validated use of this solver).
pub fn solve_roots(model: &LevyModel, q: f64) -> Result<RootSet> {
    let first = find_real_roots(model, q).and_then(|r| assemble(model, q, r));
    match first {
        Err(Error::DegenerateRoots { .. }) => {
            let bumped = q + RETRY_BUMP;
            log::warn!(
                "degenerate roots at level q = {q:.15e}; retrying once at q = {bumped:.15e}"
            );
            find_real_roots(model, bumped).and_then(|r| assemble(model, bumped, r))
        }
        other => other,
    }
}

/// Φ(q): the largest root of ψ(β) = q in (0, β₀).
///
/// # Errors
///
/// [`Error::NoRootInStrip`] if the interval contains no crossing.
pub fn phi_alpha(model: &LevyModel, q: f64) -> Result<f64> {
    let poles = model.poles();
    let a_mid = poles.iter().copied().filter(|p| *p < 0.0).fold(None, |acc: Option<f64>, p| {
        Some(acc.map_or(p, |a: f64| a.max(p)))
    });
    let b_mid = poles.iter().copied().find(|p| *p > 0.0);
    let beta0 = model.beta0();
    middle_interval_roots(model, q, a_mid, b_mid)?
        .into_iter()
        .filter(|r| *r > 0.0 && *r < beta0)
        .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a: f64| a.max(r))))
        .ok_or(Error::NoRootInStrip { q, beta0 })
}
