//! A closed function algebra: piecewise exponential polynomials.
//!
//! Every function the solver manipulates — payoffs, continuation values,
//! resolvent smoothings — has the form
//!
//! ```text
//! f(x) = Σ_k  c_k · (x − a_i)^k · exp(r · (x − a_i))      on piece i,
//! ```
//!
//! where the pieces partition ℝ at a finite set of breakpoints. The algebra
//! is closed under linear combination, translation, multiplication by
//! exponentials, differentiation, and — the operation everything hinges on —
//! convolution with two-sided exponential densities. Convolution is carried
//! out symbolically, so the only numerical error anywhere is the floating
//! point of the coefficient arithmetic itself.
//!
//! # Anchored coefficients
//!
//! Polynomials are written in the *local* variable `x − a_i`, where the
//! anchor `a_i` is the left breakpoint of the piece (the first breakpoint
//! for the unbounded left piece, zero if there are no breakpoints). This
//! keeps every stored coefficient at the scale of the function values on its
//! own piece. The naive global form `c · x^k · e^{r·x}` is catastrophic
//! here: rates of magnitude 20 and abscissas of magnitude 5 would force
//! coefficient pairs of magnitude `e^{±100}` that cancel to order one.
//!
//! # Known limitation
//!
//! When two rates differ by λ with 1e−10 < |λ| ≲ 1e−3, convolution produces
//! term pairs whose coefficients grow like 1/λ and cancel pointwise; the
//! evaluation then loses up to `16 + log10|λ|` digits near the far end of a
//! piece. Exact collisions (|λ| ≤ 1e−10) are detected and handled through a
//! degree bump instead, which is exact. The rate gaps arising from the
//! stopping models this crate targets are of order 0.1 or wider, safely
//! outside the valley.

use std::fmt;

use crate::error::{Error, Result};

/// Largest allowed polynomial degree inside a term.
pub const DEGREE_CAP: usize = 8;

/// Two rates closer than this (absolutely) are treated as the same
/// exponential.
pub const RATE_COLLISION_TOL: f64 = 1e-10;

/// Breakpoints closer than this are merged.
pub const BREAK_DEDUP_TOL: f64 = 1e-12;

/// One exponential-polynomial term on a piece: `coefs[k] · dx^k · e^{rate·dx}`
/// with `dx = x − anchor`.
#[derive(Debug, Clone, PartialEq)]
struct Term {
    rate: f64,
    coefs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
struct Piece {
    anchor: f64,
    terms: Vec<Term>,
}

/// A piecewise exponential polynomial on ℝ.
///
/// Pieces are left-closed: with breakpoints `b_1 < … < b_M`, piece `i ≥ 1`
/// lives on `[b_i, b_{i+1})` and piece 0 on `(−∞, b_1)`. The representation
/// is canonical (sorted deduplicated rates, no trailing zero coefficients,
/// no empty terms), so two equal functions built the same way print
/// identically.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpPoly {
    breaks: Vec<f64>,
    pieces: Vec<Piece>,
}

fn binomial(n: usize, k: usize) -> f64 {
    let mut acc = 1.0;
    for j in 0..k.min(n - k) {
        acc = acc * (n - j) as f64 / (j + 1) as f64;
    }
    acc
}

impl Term {
    fn canonical(mut self) -> Option<Term> {
        while self.coefs.last() == Some(&0.0) {
            self.coefs.pop();
        }
        if self.coefs.is_empty() {
            None
        } else {
            Some(self)
        }
    }

    fn degree(&self) -> usize {
        self.coefs.len().saturating_sub(1)
    }

    fn eval(&self, dx: f64) -> f64 {
        let poly = self.coefs.iter().rev().fold(0.0, |acc, c| acc * dx + c);
        poly * (self.rate * dx).exp()
    }
}

impl Piece {
    fn canonical(mut self) -> Result<Piece> {
        let mut terms: Vec<Term> = self.terms.drain(..).filter_map(Term::canonical).collect();
        terms.sort_by(|a, b| a.rate.partial_cmp(&b.rate).unwrap());
        let mut merged: Vec<Term> = Vec::with_capacity(terms.len());
        for t in terms {
            match merged.last_mut() {
                Some(last) if (t.rate - last.rate).abs() <= RATE_COLLISION_TOL => {
                    if last.coefs.len() < t.coefs.len() {
                        last.coefs.resize(t.coefs.len(), 0.0);
                    }
                    for (a, b) in last.coefs.iter_mut().zip(t.coefs.iter()) {
                        *a += b;
                    }
                }
                _ => merged.push(t),
            }
        }
        let mut terms: Vec<Term> = merged.into_iter().filter_map(Term::canonical).collect();
        for t in &terms {
            if t.degree() > DEGREE_CAP {
                return Err(Error::DegreeCap {
                    degree: t.degree(),
                    cap: DEGREE_CAP,
                });
            }
            if !t.rate.is_finite() || t.coefs.iter().any(|c| !c.is_finite()) {
                return Err(Error::Unsupported(format!(
                    "non-finite term (rate {}, coefs {:?})",
                    t.rate, t.coefs
                )));
            }
        }
        terms.shrink_to_fit();
        Ok(Piece {
            anchor: self.anchor,
            terms,
        })
    }

    fn eval(&self, x: f64) -> f64 {
        let dx = x - self.anchor;
        self.terms.iter().map(|t| t.eval(dx)).sum()
    }

    /// Rewrite the terms relative to a new anchor (exact up to rounding).
    fn re_anchor(&self, new_anchor: f64) -> Piece {
        if new_anchor == self.anchor {
            return self.clone();
        }
        let d = new_anchor - self.anchor; // dx_old = dx_new + d
        let terms = self
            .terms
            .iter()
            .map(|t| {
                // dx_old = dx_new + d, so expand (dx_new + d)^k binomially
                // and absorb e^{r·d} into the coefficients.
                let scale = (t.rate * d).exp();
                let mut coefs = vec![0.0; t.coefs.len()];
                for (k, &c) in t.coefs.iter().enumerate() {
                    for (j, cj) in coefs.iter_mut().enumerate().take(k + 1) {
                        *cj += c * scale * binomial(k, j) * d.powi((k - j) as i32);
                    }
                }
                Term { rate: t.rate, coefs }
            })
            .collect();
        Piece {
            anchor: new_anchor,
            terms,
        }
    }

    fn derivative(&self) -> Piece {
        let terms = self
            .terms
            .iter()
            .map(|t| {
                // d/dx [dx^k e^{r dx}] = (k dx^{k−1} + r dx^k) e^{r dx}
                let mut coefs = vec![0.0; t.coefs.len() + 1];
                for (k, &c) in t.coefs.iter().enumerate() {
                    if k > 0 {
                        coefs[k - 1] += c * k as f64;
                    }
                    coefs[k] += c * t.rate;
                }
                Term { rate: t.rate, coefs }
            })
            .collect();
        Piece {
            anchor: self.anchor,
            terms,
        }
    }
}

/// Anchor dictated by the policy for piece `i` of a function with the given
/// breakpoints.
fn policy_anchor(breaks: &[f64], i: usize) -> f64 {
    if breaks.is_empty() {
        0.0
    } else if i == 0 {
        breaks[0]
    } else {
        breaks[i - 1]
    }
}

impl ExpPoly {
    // -- construction --------------------------------------------------

    /// The zero function.
    pub fn zero() -> ExpPoly {
        ExpPoly {
            breaks: vec![],
            pieces: vec![Piece {
                anchor: 0.0,
                terms: vec![],
            }],
        }
    }

    /// A constant.
    pub fn constant(c: f64) -> ExpPoly {
        ExpPoly::single(&[(0.0, c)]).expect("constant is always valid")
    }

    /// A single global piece `Σ coef · e^{rate·x}` (anchor 0, degree 0).
    pub fn single(terms: &[(f64, f64)]) -> Result<ExpPoly> {
        ExpPoly::from_term_lists(vec![], vec![terms
            .iter()
            .map(|&(rate, coef)| (rate, vec![coef]))
            .collect()])
    }

    /// General constructor. `pieces[i]` lists `(rate, coefs)` pairs for
    /// piece `i`, with coefficients in powers of `x − a_i` where the anchor
    /// `a_i` follows the policy documented on the type (left breakpoint;
    /// first breakpoint for piece 0; zero when there are no breakpoints).
    ///
    /// # Errors
    ///
    /// [`Error::Unsupported`] on malformed input (unsorted or non-finite
    /// breakpoints, wrong piece count, non-finite terms) and
    /// [`Error::DegreeCap`] when a polynomial exceeds degree 8.
    pub fn from_term_lists(
        breaks: Vec<f64>,
        pieces: Vec<Vec<(f64, Vec<f64>)>>,
    ) -> Result<ExpPoly> {
        if pieces.len() != breaks.len() + 1 {
            return Err(Error::Unsupported(format!(
                "{} breakpoints require {} pieces, got {}",
                breaks.len(),
                breaks.len() + 1,
                pieces.len()
            )));
        }
        for w in breaks.windows(2) {
            // NaN-aware: a NaN difference must fail this check too.
            if w[1] - w[0] <= BREAK_DEDUP_TOL || (w[1] - w[0]).is_nan() {
                return Err(Error::Unsupported(format!(
                    "breakpoints must be ascending and separated by more than {BREAK_DEDUP_TOL}: {} then {}",
                    w[0], w[1]
                )));
            }
        }
        if breaks.iter().any(|b| !b.is_finite()) {
            return Err(Error::Unsupported("non-finite breakpoint".into()));
        }
        let pieces = pieces
            .into_iter()
            .enumerate()
            .map(|(i, terms)| {
                Piece {
                    anchor: policy_anchor(&breaks, i),
                    terms: terms
                        .into_iter()
                        .map(|(rate, coefs)| Term { rate, coefs })
                        .collect(),
                }
                .canonical()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ExpPoly { breaks, pieces })
    }

    // -- inspection -----------------------------------------------------

    /// The breakpoints, ascending.
    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    /// Number of pieces (breakpoints + 1).
    pub fn piece_count(&self) -> usize {
        self.pieces.len()
    }

    /// True when the function is identically zero.
    pub fn is_zero(&self) -> bool {
        self.pieces.iter().all(|p| p.terms.is_empty())
    }

    /// Largest polynomial degree over all terms.
    pub fn degree(&self) -> usize {
        self.pieces
            .iter()
            .flat_map(|p| p.terms.iter().map(Term::degree))
            .max()
            .unwrap_or(0)
    }

    fn piece_index(&self, x: f64) -> usize {
        self.breaks.partition_point(|b| *b <= x)
    }

    /// Evaluate at `x`.
    pub fn evaluate(&self, x: f64) -> f64 {
        self.pieces[self.piece_index(x)].eval(x)
    }

    // -- algebra ---------------------------------------------------------

    /// Σ scaleᵢ · fᵢ over a merged breakpoint grid.
    pub fn linear_combine(parts: &[(f64, &ExpPoly)]) -> Result<ExpPoly> {
        let mut breaks: Vec<f64> = parts
            .iter()
            .flat_map(|(_, f)| f.breaks.iter().copied())
            .collect();
        breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
        breaks.dedup_by(|next, kept| (*next - *kept).abs() <= BREAK_DEDUP_TOL);

        let n_pieces = breaks.len() + 1;
        let mut pieces = Vec::with_capacity(n_pieces);
        for i in 0..n_pieces {
            let anchor = policy_anchor(&breaks, i);
            let sample = piece_sample(&breaks, i);
            let mut terms = Vec::new();
            for &(scale, f) in parts {
                if scale == 0.0 {
                    continue;
                }
                let src = &f.pieces[f.piece_index(sample)];
                let moved = src.re_anchor(anchor);
                terms.extend(moved.terms.into_iter().map(|mut t| {
                    for c in &mut t.coefs {
                        *c *= scale;
                    }
                    t
                }));
            }
            pieces.push(Piece { anchor, terms }.canonical()?);
        }
        Ok(ExpPoly { breaks, pieces })
    }

    /// Pointwise sum.
    pub fn add(&self, other: &ExpPoly) -> Result<ExpPoly> {
        ExpPoly::linear_combine(&[(1.0, self), (1.0, other)])
    }

    /// Pointwise scale.
    pub fn scale(&self, s: f64) -> Result<ExpPoly> {
        ExpPoly::linear_combine(&[(s, self)])
    }

    /// Translate the graph: the result `g` satisfies `g(x) = f(x − s)`.
    /// Exact — breakpoints and anchors move, coefficients do not change.
    pub fn shift(&self, s: f64) -> ExpPoly {
        ExpPoly {
            breaks: self.breaks.iter().map(|b| b + s).collect(),
            pieces: self
                .pieces
                .iter()
                .map(|p| Piece {
                    anchor: p.anchor + s,
                    terms: p.terms.clone(),
                })
                .collect(),
        }
    }

    /// Multiply pointwise by `e^{rate·x}`.
    pub fn mul_exp(&self, rate: f64) -> Result<ExpPoly> {
        let pieces = self
            .pieces
            .iter()
            .map(|p| {
                let scale = (rate * p.anchor).exp();
                Piece {
                    anchor: p.anchor,
                    terms: p
                        .terms
                        .iter()
                        .map(|t| Term {
                            rate: t.rate + rate,
                            coefs: t.coefs.iter().map(|c| c * scale).collect(),
                        })
                        .collect(),
                }
                .canonical()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ExpPoly {
            breaks: self.breaks.clone(),
            pieces,
        })
    }

    /// The piecewise derivative (jump discontinuities differentiate to
    /// nothing; the caller is responsible for knowing the function is
    /// continuous where that matters).
    pub fn derivative(&self) -> Result<ExpPoly> {
        let pieces = self
            .pieces
            .iter()
            .map(|p| p.derivative().canonical())
            .collect::<Result<Vec<_>>>()?;
        Ok(ExpPoly {
            breaks: self.breaks.clone(),
            pieces,
        })
    }

    /// Replace the function by zero on `(−∞, cut)`, keeping it unchanged on
    /// `[cut, ∞)`.
    pub fn zero_below(&self, cut: f64) -> Result<ExpPoly> {
        let mut breaks = vec![cut];
        breaks.extend(
            self.breaks
                .iter()
                .copied()
                .filter(|b| *b > cut + BREAK_DEDUP_TOL),
        );
        let n_pieces = breaks.len() + 1;
        let mut pieces = Vec::with_capacity(n_pieces);
        pieces.push(Piece {
            anchor: policy_anchor(&breaks, 0),
            terms: vec![],
        });
        for i in 1..n_pieces {
            let anchor = policy_anchor(&breaks, i);
            let sample = piece_sample(&breaks, i);
            let src = &self.pieces[self.piece_index(sample)];
            pieces.push(src.re_anchor(anchor).canonical()?);
        }
        Ok(ExpPoly { breaks, pieces })
    }

    /// Replace the function by zero on `[cut, ∞)`, keeping it unchanged on
    /// `(−∞, cut)`.
    pub fn zero_above(&self, cut: f64) -> Result<ExpPoly> {
        let mut breaks: Vec<f64> = self
            .breaks
            .iter()
            .copied()
            .filter(|b| *b < cut - BREAK_DEDUP_TOL)
            .collect();
        breaks.push(cut);
        let n_pieces = breaks.len() + 1;
        let mut pieces = Vec::with_capacity(n_pieces);
        for i in 0..n_pieces - 1 {
            let anchor = policy_anchor(&breaks, i);
            let sample = piece_sample(&breaks, i);
            let src = &self.pieces[self.piece_index(sample)];
            pieces.push(src.re_anchor(anchor).canonical()?);
        }
        pieces.push(Piece {
            anchor: *breaks.last().unwrap(),
            terms: vec![],
        });
        Ok(ExpPoly { breaks, pieces })
    }

    // -- integral transforms ----------------------------------------------

    /// `∫_0^∞ f(from + y) · e^{−decay·y} dy` for `decay > 0`.
    ///
    /// # Errors
    ///
    /// [`Error::DivergentConvolution`] when the rightmost piece grows at
    /// rate ≥ `decay`.
    pub fn integrate_exp_right(&self, from: f64, decay: f64) -> Result<f64> {
        assert!(decay > 0.0, "decay must be positive");
        if let Some(t) = self.pieces.last().unwrap().terms.iter().last() {
            if t.rate - decay >= -RATE_COLLISION_TOL {
                return Err(Error::DivergentConvolution {
                    side: "right tail",
                    growth: t.rate,
                    decay,
                });
            }
        }
        let mut total = 0.0;
        let start_piece = self.piece_index(from);
        for (i, p) in self.pieces.iter().enumerate().skip(start_piece) {
            let lo_u = if i == start_piece {
                from
            } else {
                self.breaks[i - 1]
            };
            let hi_u = self.breaks.get(i).copied();
            // e^{−decay(u−from)} with u = anchor + s.
            let outer = (-decay * (p.anchor - from)).exp();
            let lo_s = lo_u - p.anchor;
            let hi_s = hi_u.map(|h| h - p.anchor);
            for t in &p.terms {
                let lam = t.rate - decay;
                for (k, &c) in t.coefs.iter().enumerate() {
                    total += c * outer * exp_poly_integral(k, lam, Some(lo_s), hi_s);
                }
            }
        }
        Ok(total)
    }

    /// Convolve with a two-sided exponential kernel:
    /// `g(x) = ∫_ℝ f(x + y) · kernel(y) dy`.
    ///
    /// The kernel must be a pure two-sided exponential mixture: exactly one
    /// breakpoint at 0, degree-0 terms, negative rates on `[0, ∞)` (decay to
    /// the right) and positive rates on `(−∞, 0)` (decay to the left).
    ///
    /// # Errors
    ///
    /// [`Error::Unsupported`] for kernels outside that shape, and
    /// [`Error::DivergentConvolution`] when a tail of `f` outgrows the
    /// kernel's decay on that side.
    pub fn convolve_density(&self, kernel: &ExpPoly) -> Result<ExpPoly> {
        let (left_terms, right_terms) = split_kernel(kernel)?;
        // ζ_min / ρ_min are the slowest decays; the tails of f must stay
        // strictly inside them for the convolution to exist.
        let zeta_min = left_terms
            .iter()
            .map(|t| t.0)
            .fold(f64::INFINITY, f64::min);
        let rho_min = right_terms
            .iter()
            .map(|t| t.0)
            .fold(f64::INFINITY, f64::min);
        for t in &self.pieces[0].terms {
            if !left_terms.is_empty() && t.rate + zeta_min <= RATE_COLLISION_TOL {
                return Err(Error::DivergentConvolution {
                    side: "left tail",
                    growth: -t.rate,
                    decay: zeta_min,
                });
            }
        }
        for t in &self.pieces.last().unwrap().terms {
            if !right_terms.is_empty() && t.rate - rho_min >= -RATE_COLLISION_TOL {
                return Err(Error::DivergentConvolution {
                    side: "right tail",
                    growth: t.rate,
                    decay: rho_min,
                });
            }
        }

        let breaks = self.breaks.clone();
        let m = self.pieces.len();
        let mut out_pieces = Vec::with_capacity(m);

        for j in 0..m {
            // Work relative to the stored anchors (which may lawfully
            // deviate from the construction policy, e.g. after `shift`).
            let aj = self.pieces[j].anchor;
            let mut terms: Vec<Term> = Vec::new();

            for (i, p) in self.pieces.iter().enumerate() {
                let lo_s = if i == 0 {
                    None
                } else {
                    Some(self.breaks[i - 1] - p.anchor)
                };
                let hi_s = self.breaks.get(i).map(|b| b - p.anchor);

                if i > j {
                    // Whole piece lies to the right of x: right kernel side.
                    for &(rho, a) in &right_terms {
                        let carry = a * (-rho * (p.anchor - aj)).exp();
                        let mut coef = 0.0;
                        for t in &p.terms {
                            for (k, &c) in t.coefs.iter().enumerate() {
                                coef +=
                                    c * carry * exp_poly_integral(k, t.rate - rho, lo_s, hi_s);
                            }
                        }
                        terms.push(Term {
                            rate: rho,
                            coefs: vec![coef],
                        });
                    }
                } else if i < j {
                    // Whole piece to the left of x: left kernel side.
                    for &(zeta, b) in &left_terms {
                        let carry = b * (zeta * (p.anchor - aj)).exp();
                        let mut coef = 0.0;
                        for t in &p.terms {
                            for (k, &c) in t.coefs.iter().enumerate() {
                                coef +=
                                    c * carry * exp_poly_integral(k, t.rate + zeta, lo_s, hi_s);
                            }
                        }
                        terms.push(Term {
                            rate: -zeta,
                            coefs: vec![coef],
                        });
                    }
                } else {
                    // The piece containing x itself: split at u = x.
                    for t in &p.terms {
                        for (k, &c) in t.coefs.iter().enumerate() {
                            // u ∈ [piece start, x): left kernel side.
                            for &(zeta, b) in &left_terms {
                                let lam = t.rate + zeta;
                                if lam.abs() <= RATE_COLLISION_TOL {
                                    // e^{−ζ dx} ∫ s^k ds from lo to dx.
                                    let mut poly = vec![0.0; k + 2];
                                    poly[k + 1] = c * b / (k + 1) as f64;
                                    terms.push(Term {
                                        rate: -zeta,
                                        coefs: poly,
                                    });
                                    let lo =
                                        lo_s.expect("collision on the unbounded piece is pre-checked");
                                    terms.push(Term {
                                        rate: -zeta,
                                        coefs: vec![-c * b * lo.powi(k as i32 + 1) / (k + 1) as f64],
                                    });
                                } else {
                                    // c·b·e^{−ζdx}[F_λ(dx) − F_λ(lo)]
                                    let phi = antiderivative_coefs(k, lam);
                                    terms.push(Term {
                                        rate: t.rate,
                                        coefs: phi.iter().map(|p| c * b * p).collect(),
                                    });
                                    let f_lo = match lo_s {
                                        Some(lo) => eval_antiderivative(&phi, lam, lo),
                                        None => 0.0, // λ > 0 guaranteed by the pre-check
                                    };
                                    terms.push(Term {
                                        rate: -zeta,
                                        coefs: vec![-c * b * f_lo],
                                    });
                                }
                            }
                            // u ∈ [x, piece end): right kernel side.
                            for &(rho, a) in &right_terms {
                                let lam = t.rate - rho;
                                if lam.abs() <= RATE_COLLISION_TOL {
                                    let hi = hi_s
                                        .expect("collision on the unbounded piece is pre-checked");
                                    terms.push(Term {
                                        rate: rho,
                                        coefs: vec![c * a * hi.powi(k as i32 + 1) / (k + 1) as f64],
                                    });
                                    let mut poly = vec![0.0; k + 2];
                                    poly[k + 1] = -c * a / (k + 1) as f64;
                                    terms.push(Term {
                                        rate: rho,
                                        coefs: poly,
                                    });
                                } else {
                                    // c·a·e^{ρdx}[F_λ(hi) − F_λ(dx)]
                                    let phi = antiderivative_coefs(k, lam);
                                    let f_hi = match hi_s {
                                        Some(hi) => eval_antiderivative(&phi, lam, hi),
                                        None => 0.0, // λ < 0 guaranteed by the pre-check
                                    };
                                    terms.push(Term {
                                        rate: rho,
                                        coefs: vec![c * a * f_hi],
                                    });
                                    terms.push(Term {
                                        rate: t.rate,
                                        coefs: phi.iter().map(|p| -c * a * p).collect(),
                                    });
                                }
                            }
                        }
                    }
                }
            }
            out_pieces.push(Piece { anchor: aj, terms }.canonical()?);
        }
        Ok(ExpPoly {
            breaks,
            pieces: out_pieces,
        })
    }
}

/// Sample point strictly inside piece `i` of the breakpoint grid.
fn piece_sample(breaks: &[f64], i: usize) -> f64 {
    if breaks.is_empty() {
        0.0
    } else if i == 0 {
        breaks[0] - 1.0
    } else if i == breaks.len() {
        breaks[i - 1] + 1.0
    } else {
        0.5 * (breaks[i - 1] + breaks[i])
    }
}

/// One side of a split convolution kernel: `(rate, coefficient)` pairs of a
/// plain exponential mixture.
type KernelSide = Vec<(f64, f64)>;

/// Validate the kernel shape and split it into `(left, right)` term lists:
/// left entries `(ζ, b)` mean `b·e^{ζy}` on `y < 0` (ζ > 0), right entries
/// `(ρ, a)` mean `a·e^{−ρy}` on `y ≥ 0` (ρ > 0).
fn split_kernel(kernel: &ExpPoly) -> Result<(KernelSide, KernelSide)> {
    let ok_shape = kernel.breaks.len() == 1
        && kernel.breaks[0] == 0.0
        && kernel.pieces.iter().all(|p| {
            p.anchor == 0.0 && p.terms.iter().all(|t| t.coefs.len() == 1)
        });
    if !ok_shape {
        return Err(Error::Unsupported(
            "convolution kernel must be a two-sided exponential mixture with its single breakpoint at 0"
                .into(),
        ));
    }
    let mut left = Vec::new();
    for t in &kernel.pieces[0].terms {
        if t.rate <= 0.0 {
            return Err(Error::Unsupported(format!(
                "kernel term e^{{{}y}} on y<0 does not decay to the left",
                t.rate
            )));
        }
        left.push((t.rate, t.coefs[0]));
    }
    let mut right = Vec::new();
    for t in &kernel.pieces[1].terms {
        if t.rate >= 0.0 {
            return Err(Error::Unsupported(format!(
                "kernel term e^{{{}y}} on y≥0 does not decay to the right",
                t.rate
            )));
        }
        right.push((-t.rate, t.coefs[0]));
    }
    Ok((left, right))
}

/// Coefficients φ of the antiderivative `∫ s^k e^{λs} ds = e^{λs} Σ φ_m s^m`,
/// valid for λ ≠ 0.
fn antiderivative_coefs(k: usize, lam: f64) -> Vec<f64> {
    let mut phi = vec![0.0; k + 1];
    phi[k] = 1.0 / lam;
    for m in (0..k).rev() {
        phi[m] = -((m + 1) as f64) * phi[m + 1] / lam;
    }
    phi
}

fn eval_antiderivative(phi: &[f64], lam: f64, s: f64) -> f64 {
    let poly = phi.iter().rev().fold(0.0, |acc, p| acc * s + p);
    poly * (lam * s).exp()
}

/// `∫ s^k e^{λs} ds` over `[lo, hi]`, where `lo = None` means −∞ (requires
/// λ > 0) and `hi = None` means +∞ (requires λ < 0). Uses a power-series
/// path on short intervals to dodge cancellation in `F(hi) − F(lo)`.
fn exp_poly_integral(k: usize, lam: f64, lo: Option<f64>, hi: Option<f64>) -> f64 {
    match (lo, hi) {
        (Some(lo), Some(hi)) => {
            if hi <= lo {
                return 0.0;
            }
            if lam.abs() <= RATE_COLLISION_TOL {
                return (hi.powi(k as i32 + 1) - lo.powi(k as i32 + 1)) / (k + 1) as f64;
            }
            let w = hi - lo;
            if (lam * w).abs() < 0.5 {
                // F(hi) − F(lo) cancels badly when λ·w is small; expand
                // ∫_0^w (lo+t)^k e^{λ(lo+t)} dt around t = 0 instead, using
                // ∫_0^w t^j e^{λt} dt = Σ_i λ^i w^{j+i+1} / (i! (j+i+1)).
                let outer = (lam * lo).exp();
                let mut total = 0.0;
                for j in 0..=k {
                    let c = binomial(k, j) * lo.powi((k - j) as i32);
                    let mut pow = w.powi(j as i32 + 1);
                    let mut sum = pow / (j as f64 + 1.0);
                    let mut fact = 1.0;
                    let mut lam_pow = 1.0;
                    for idx in 1..80 {
                        fact *= idx as f64;
                        lam_pow *= lam;
                        pow *= w;
                        let t_i = lam_pow * pow / (fact * (j as f64 + idx as f64 + 1.0));
                        sum += t_i;
                        if t_i.abs() <= 1e-18 * sum.abs().max(1e-300) {
                            break;
                        }
                    }
                    total += c * outer * sum;
                }
                total
            } else {
                let phi = antiderivative_coefs(k, lam);
                eval_antiderivative(&phi, lam, hi) - eval_antiderivative(&phi, lam, lo)
            }
        }
        (None, Some(hi)) => {
            debug_assert!(lam > 0.0);
            let phi = antiderivative_coefs(k, lam);
            eval_antiderivative(&phi, lam, hi)
        }
        (Some(lo), None) => {
            debug_assert!(lam < 0.0);
            let phi = antiderivative_coefs(k, lam);
            -eval_antiderivative(&phi, lam, lo)
        }
        (None, None) => {
            debug_assert!(false, "doubly infinite elemental integral");
            f64::NAN
        }
    }
}

impl fmt::Display for ExpPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "piecewise exponential polynomial, {} breakpoint(s)",
            self.breaks.len()
        )?;
        for (i, p) in self.pieces.iter().enumerate() {
            let lo = if i == 0 {
                "-inf".to_string()
            } else {
                format!("{:.16e}", self.breaks[i - 1])
            };
            let hi = if i == self.breaks.len() {
                "+inf".to_string()
            } else {
                format!("{:.16e}", self.breaks[i])
            };
            write!(f, "  piece {i} on [{lo}, {hi}), anchor {:.16e}:", p.anchor)?;
            if p.terms.is_empty() {
                writeln!(f, " zero")?;
            } else {
                writeln!(f)?;
                for t in &p.terms {
                    let coefs: Vec<String> =
                        t.coefs.iter().map(|c| format!("{c:.16e}")).collect();
                    writeln!(
                        f,
                        "    exp({:.16e}*dx) * poly[{}]",
                        t.rate,
                        coefs.join(", ")
                    )?;
                }
            }
        }
        Ok(())
    }
}
